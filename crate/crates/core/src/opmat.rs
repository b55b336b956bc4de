//! Truncated matrices of continuous operators between `A^(α,r)` and `D^(α,r)`.
//!
//! Entries are stored scaled: for an A-type operator from radius `r` to
//! radius `s`, the entry in row `m`, column `n` is
//! `α^(⌈rΣn⌉ − ⌈sΣm⌉)·f_nm`, where `f(binom(z,n)) = Σ_m f_nm binom(z,m)`.
//! The D-type matrix of the dual map is the transpose.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg;
use crate::bound::{ceil_mul, ratio_string, Affine};
use crate::mahler::{self, MahlerError, MahlerFn, Tail};
use crate::multi::{box_points, MultiIndices};
use crate::rings::{Elem, Kind, RingError, RingSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OpError {
    #[error("radii {r} → {s}: no continuity certificate")]
    Radii { r: String, s: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("truncation error cannot be certified: {0}")]
    Uncertified(String),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Mahler(#[from] MahlerError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpaceKind {
    A,
    D,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Space {
    pub kind: SpaceKind,
    pub k: usize,
    pub r: Ratio<i64>,
    pub cutoff: u32,
}

impl Space {
    pub fn a(k: usize, r: Ratio<i64>, cutoff: u32) -> Self {
        Space { kind: SpaceKind::A, k, r, cutoff }
    }

    fn dual(self) -> Self {
        let kind = match self.kind {
            SpaceKind::A => SpaceKind::D,
            SpaceKind::D => SpaceKind::A,
        };
        Space { kind, ..self }
    }

    fn same_module(&self, o: &Space) -> bool {
        self.kind == o.kind && self.k == o.k && self.r == o.r
    }
}

/// Integer polynomial map `Z_p^j → Z_p^k`, each coordinate in the binomial basis.
#[derive(Clone, Debug)]
pub struct PolyMap {
    pub j: usize,
    pub coords: Vec<Vec<(Vec<u32>, BigInt)>>,
}

impl PolyMap {
    /// One-variable map from binomial-basis coefficients.
    pub fn univariate(coeffs: &[i64]) -> Self {
        let c = coeffs.iter().enumerate().map(|(i, &x)| (vec![i as u32], BigInt::from(x))).collect();
        PolyMap { j: 1, coords: vec![c] }
    }

    /// `z ↦ a·z + b` coordinatewise.
    pub fn affine(a: i64, b: &[i64]) -> Self {
        let j = b.len();
        let coords = (0..j)
            .map(|i| {
                let mut e = vec![0u32; j];
                e[i] = 1;
                vec![(vec![0u32; j], BigInt::from(b[i])), (e, BigInt::from(a))]
            })
            .collect();
        PolyMap { j, coords }
    }

    pub fn degree(&self) -> u32 {
        self.coords
            .iter()
            .flat_map(|c| c.iter().filter(|(_, a)| !a.is_zero()).map(|(n, _)| n.iter().sum::<u32>()))
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, z: &[BigInt]) -> Vec<BigInt> {
        self.coords
            .iter()
            .map(|c| {
                c.iter().fold(BigInt::zero(), |acc, (n, a)| {
                    let b = n.iter().zip(z).fold(BigInt::from(1), |s, (&ni, zi)| s * mahler::binom(zi, ni));
                    acc + a * b
                })
            })
            .collect()
    }

    /// `g ∘ h` (apply `h` first).
    pub fn compose(&self, h: &PolyMap) -> PolyMap {
        assert_eq!(h.coords.len(), self.j);
        let d = self.degree() * h.degree().max(1);
        let coords = (0..self.coords.len())
            .map(|c| {
                let vals: Vec<BigInt> = box_points(h.j, d + 1)
                    .iter()
                    .map(|z| {
                        let zb: Vec<BigInt> = z.iter().map(|&x| BigInt::from(x)).collect();
                        self.eval(&h.eval(&zb))[c].clone()
                    })
                    .collect();
                let coeffs = int_differences(vals, h.j, d as usize + 1);
                MultiIndices::new(h.j, d)
                    .iter()
                    .map(|n| (n.to_vec(), coeffs[box_pos(n, d as usize + 1)].clone()))
                    .filter(|(_, a)| !a.is_zero())
                    .collect()
            })
            .collect();
        PolyMap { j: h.j, coords }
    }
}

fn box_pos(n: &[u32], side: usize) -> usize {
    n.iter().fold(0usize, |acc, &c| acc * side + c as usize)
}

/// Exact forward differences at the origin on a box of integers.
pub fn int_differences(mut vals: Vec<BigInt>, k: usize, side: usize) -> Vec<BigInt> {
    for c in 0..k {
        let s = side.pow((k - 1 - c) as u32);
        for base in 0..vals.len() {
            if (base / s) % side != 0 {
                continue;
            }
            for step in 1..side {
                for i in (step..side).rev() {
                    let d = &vals[base + i * s] - &vals[base + (i - 1) * s];
                    vals[base + i * s] = d;
                }
            }
        }
    }
    vals
}

/// `α^e·f` for an integer `f`.
pub fn scale_int(ring: RingSpec, f: &BigInt, e: i64) -> Result<Elem, RingError> {
    if ring.kind == Kind::Qp && e < 0 {
        return Elem::from_parts(ring, 0, f, ring.n as i64).and_then(|x| {
            let x = if f.is_zero() { Elem::zero(ring) } else { x };
            x.mul_alpha_pow(e)
        });
    }
    Elem::from_bigint(ring, f).mul_alpha_pow(e)
}

#[derive(Clone, Debug)]
pub struct OpMatrix {
    ring: RingSpec,
    domain: Space,
    codomain: Space,
    rows: MultiIndices,
    cols: MultiIndices,
    entries: Vec<Vec<Elem>>,
    /// per-column bound on the dropped rows
    col_tail: Vec<Tail>,
    /// `v(entry in row m) ≥ bound(Σm)` for every column, stored or not
    row_bound: Option<Affine>,
    /// `v(entry in column n) ≥ bound(Σn)` for every row, stored or not
    col_bound: Option<Affine>,
    /// all entries outside the stored block vanish
    finite: bool,
    /// the full matrix is triangular with `v(diagonal entry n) ≥ bound(Σn)`
    tri: Option<Affine>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CcReport {
    pub bounded: bool,
    pub column_decay: bool,
    pub row_decay: bool,
    /// the flags are backed by bounds on the dropped entries
    pub certified: bool,
    pub floor: i64,
}

impl OpMatrix {
    /// A matrix with no analytic side data; entries outside the block are zero.
    pub fn from_dense(ring: RingSpec, entries: Vec<Vec<Elem>>) -> Result<Self, OpError> {
        let n = entries.len();
        if entries.iter().any(|r| r.len() != n) || n == 0 {
            return Err(OpError::Shape("dense matrices must be square and nonempty".into()));
        }
        let sp = Space::a(1, Ratio::from_integer(0), n as u32 - 1);
        Ok(OpMatrix {
            ring,
            domain: sp,
            codomain: sp,
            rows: MultiIndices::new(1, n as u32 - 1),
            cols: MultiIndices::new(1, n as u32 - 1),
            entries,
            col_tail: vec![Tail::Zero; n],
            row_bound: None,
            tri: None,
            col_bound: None,
            finite: true,
        })
    }

    pub fn from_ints(ring: RingSpec, rows: &[Vec<i64>]) -> Result<Self, OpError> {
        let e = rows.iter().map(|r| r.iter().map(|&x| Elem::from_int(ring, x)).collect()).collect();
        OpMatrix::from_dense(ring, e)
    }

    pub fn identity(ring: RingSpec, k: usize, r: Ratio<i64>, d: u32) -> Self {
        let idx = MultiIndices::new(k, d);
        let n = idx.len();
        let entries = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Elem::one(ring) } else { Elem::zero(ring) }).collect())
            .collect();
        let b = Some(Affine::new(Ratio::from_integer(0), 0));
        OpMatrix {
            ring,
            domain: Space::a(k, r, d),
            codomain: Space::a(k, r, d),
            rows: idx.clone(),
            cols: idx,
            entries,
            col_tail: vec![Tail::Zero; n],
            row_bound: b,
            tri: b,
            col_bound: b,
            finite: false,
        }
    }

    /// Assembles an A-type matrix from unscaled image columns.
    pub fn from_columns(ring: RingSpec, domain: Space, codomain: Space, columns: Vec<MahlerFn>) -> Result<Self, OpError> {
        let rows = MultiIndices::new(codomain.k, codomain.cutoff);
        let cols = MultiIndices::new(domain.k, domain.cutoff);
        if columns.len() != cols.len() {
            return Err(OpError::Shape("one column per domain index".into()));
        }
        let (r, s) = (domain.r, codomain.r);
        let mut entries = vec![Vec::with_capacity(cols.len()); rows.len()];
        let mut col_tail = Vec::with_capacity(cols.len());
        for (ci, col) in columns.iter().enumerate() {
            let en = ceil_mul(r, cols.degree(ci) as i64);
            for (mi, m) in rows.iter().enumerate() {
                let f = col.coeff(m).cloned().unwrap_or_else(|| Elem::zero(ring));
                let e = en - ceil_mul(s, rows.degree(mi) as i64);
                entries[mi].push(f.mul_alpha_pow(e)?);
            }
            col_tail.push(match col.tail() {
                Tail::Zero if col.cutoff() >= codomain.cutoff => Tail::Zero,
                Tail::Affine(a) => Tail::Affine(Affine::new(a.slope - s, a.offset + en - 1)),
                Tail::Finite { degree, floor } => Tail::Finite { degree, floor: floor + en - ceil_mul(s, degree as i64) },
                _ => Tail::Unknown,
            });
        }
        Ok(OpMatrix { ring, domain, codomain, rows, cols, entries, col_tail, row_bound: None, col_bound: None, finite: false, tri: None })
    }

    /// Assembles an A-type matrix from exact integer columns.
    fn from_int_columns(
        ring: RingSpec,
        domain: Space,
        codomain: Space,
        columns: Vec<(Vec<BigInt>, Tail)>,
    ) -> Result<Self, OpError> {
        let rows = MultiIndices::new(codomain.k, codomain.cutoff);
        let cols = MultiIndices::new(domain.k, domain.cutoff);
        let (r, s) = (domain.r, codomain.r);
        let mut entries = vec![Vec::with_capacity(cols.len()); rows.len()];
        let mut col_tail = Vec::new();
        for (ci, (col, tail)) in columns.into_iter().enumerate() {
            let en = ceil_mul(r, cols.degree(ci) as i64);
            for (mi, f) in col.iter().enumerate() {
                let e = en - ceil_mul(s, rows.degree(mi) as i64);
                entries[mi].push(scale_int(ring, f, e)?);
            }
            col_tail.push(tail);
        }
        Ok(OpMatrix { ring, domain, codomain, rows, cols, entries, col_tail, row_bound: None, col_bound: None, finite: false, tri: None })
    }

    pub fn ring(&self) -> RingSpec {
        self.ring
    }

    pub fn domain(&self) -> Space {
        self.domain
    }

    pub fn codomain(&self) -> Space {
        self.codomain
    }

    pub fn nrows(&self) -> usize {
        self.entries.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn row_indices(&self) -> &MultiIndices {
        &self.rows
    }

    pub fn col_indices(&self) -> &MultiIndices {
        &self.cols
    }

    pub fn entry(&self, m: usize, n: usize) -> &Elem {
        &self.entries[m][n]
    }

    pub fn entries(&self) -> &[Vec<Elem>] {
        &self.entries
    }

    pub fn col_tail(&self) -> &[Tail] {
        &self.col_tail
    }

    pub fn row_bound(&self) -> Option<Affine> {
        self.row_bound
    }

    pub fn col_bound(&self) -> Option<Affine> {
        self.col_bound
    }

    pub fn is_finite(&self) -> bool {
        self.finite
    }

    pub fn tri_bound(&self) -> Option<Affine> {
        self.tri
    }

    /// Declares the full matrix triangular, with a bound on its diagonal.
    pub fn with_triangular(mut self, diag: Option<Affine>) -> Self {
        self.tri = diag;
        self
    }

    pub fn with_bounds(mut self, row: Option<Affine>, col: Option<Affine>) -> Self {
        self.row_bound = row;
        self.col_bound = col;
        self
    }

    pub fn with_spaces(mut self, domain: Space, codomain: Space) -> Self {
        self.domain = domain;
        self.codomain = codomain;
        self
    }

    /// Entrywise sum of two matrices with the same shape and spaces.
    pub fn add(&self, other: &OpMatrix) -> Result<OpMatrix, OpError> {
        if self.domain != other.domain || self.codomain != other.codomain || self.ring != other.ring {
            return Err(OpError::Shape("sum of operators between different spaces".into()));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.add(y)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let col_tail = self.col_tail.iter().zip(&other.col_tail).map(|(a, b)| tail_min(*a, *b)).collect();
        let mb = |a: Option<Affine>, b: Option<Affine>| match (a, b) {
            (Some(a), Some(b)) if a.slope == b.slope => Some(Affine::new(a.slope, a.offset.min(b.offset))),
            _ => None,
        };
        Ok(OpMatrix {
            entries,
            col_tail,
            row_bound: mb(self.row_bound, other.row_bound),
            tri: None,
            col_bound: mb(self.col_bound, other.col_bound),
            finite: self.finite && other.finite,
            ..self.clone()
        })
    }

    /// The induced map on the dual spaces.
    pub fn transpose(&self) -> OpMatrix {
        let nr = self.nrows();
        let nc = self.ncols();
        let entries = (0..nc).map(|j| (0..nr).map(|i| self.entries[i][j].clone()).collect()).collect();
        let col_tail = if self.finite { vec![Tail::Zero; nr] } else { vec![Tail::Unknown; nr] };
        OpMatrix {
            ring: self.ring,
            domain: self.codomain.dual(),
            codomain: self.domain.dual(),
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            entries,
            col_tail,
            row_bound: self.col_bound,
            tri: self.tri,
            col_bound: self.row_bound,
            finite: self.finite,
        }
    }

    /// `a ∘ b`; entries whose truncation error cannot be bounded lose their tail certificate.
    pub fn compose(a: &OpMatrix, b: &OpMatrix) -> Result<OpMatrix, OpError> {
        if !b.codomain.same_module(&a.domain) || a.ring != b.ring {
            return Err(OpError::Shape("codomain of the inner map differs from the domain of the outer map".into()));
        }
        let inner = a.ncols().min(b.nrows());
        let rows = a.nrows();
        let cols = b.ncols();
        let entries: Vec<Vec<Elem>> = (0..rows)
            .into_par_iter()
            .map(|m| {
                (0..cols)
                    .map(|n| {
                        let mut acc = linalg::acc_zero(a.ring);
                        for l in 0..inner {
                            let t = a.entries[m][l].mul(&b.entries[l][n]).unwrap();
                            acc = acc.add(&t).unwrap();
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let exact_inner = b.finite || (b.col_tail.iter().all(|t| *t == Tail::Zero) && b.nrows() <= a.ncols());
        let tail = if exact_inner && a.col_tail.iter().all(|t| *t == Tail::Zero) { Tail::Zero } else { Tail::Unknown };
        let col_tail = vec![tail; cols];
        let row_bound = match (a.row_bound, b.row_bound) {
            (Some(x), Some(_)) => Some(x),
            _ => None,
        };
        Ok(OpMatrix {
            ring: a.ring,
            domain: b.domain,
            codomain: a.codomain,
            rows: a.rows.clone(),
            cols: b.cols.clone(),
            entries,
            col_tail,
            row_bound,
            tri: None,
            col_bound: None,
            finite: a.finite && b.finite,
        })
    }

    /// `compose`, but refuses when the inner truncation is not exact.
    pub fn compose_certified(a: &OpMatrix, b: &OpMatrix) -> Result<OpMatrix, OpError> {
        let c = OpMatrix::compose(a, b)?;
        if c.col_tail.iter().any(|t| *t == Tail::Unknown) {
            return Err(OpError::Uncertified("inner columns have unbounded dropped rows; grow the inner cutoff".into()));
        }
        Ok(c)
    }

    /// Top-left `n × n` block as a plain matrix.
    pub fn dense_block(&self, n: usize) -> Vec<Vec<Elem>> {
        self.entries.iter().take(n).map(|r| r.iter().take(n).cloned().collect()).collect()
    }

    /// Leading block over all indices of total degree `≤ d` (rows and columns).
    pub fn truncate(&self, d: u32) -> OpMatrix {
        let rows = MultiIndices::new(self.codomain.k, d.min(self.codomain.cutoff));
        let cols = MultiIndices::new(self.domain.k, d.min(self.domain.cutoff));
        let entries = (0..rows.len()).map(|i| self.entries[i][..cols.len()].to_vec()).collect();
        let col_tail = self.col_tail[..cols.len()]
            .iter()
            .enumerate()
            .map(|(ci, t)| {
                let kept = (0..self.nrows()).skip(rows.len()).all(|i| self.entries[i][ci].is_zero());
                if *t == Tail::Zero && kept {
                    Tail::Zero
                } else {
                    Tail::Unknown
                }
            })
            .collect();
        OpMatrix {
            domain: Space { cutoff: cols.cutoff(), ..self.domain },
            codomain: Space { cutoff: rows.cutoff(), ..self.codomain },
            rows,
            cols,
            entries,
            col_tail,
            ..self.clone()
        }
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    /// Complete-continuity report read off the stored entries.
    ///
    /// `column_decay` (resp. `row_decay`) holds when the entries of the far
    /// half of the columns (rows) are strictly smaller than the overall sup.
    pub fn cc_certificate(&self) -> CcReport {
        let floor = self.entries.iter().flatten().map(|e| e.lo()).min().unwrap_or(0);
        let bounded = floor >= 0 || self.row_bound.is_some() || self.col_bound.is_some();
        let col_min: Vec<i64> =
            (0..self.ncols()).map(|n| self.entries.iter().map(|r| r[n].lo()).min().unwrap_or(i64::MAX)).collect();
        let row_min: Vec<i64> = self.entries.iter().map(|r| r.iter().map(|e| e.lo()).min().unwrap_or(i64::MAX)).collect();
        let far = |v: &[i64], deg: &dyn Fn(usize) -> u32, cut: u32| -> bool {
            let tail = v.iter().enumerate().filter(|(i, _)| 2 * deg(*i) > cut).map(|(_, &x)| x).min();
            matches!(tail, Some(t) if t > floor)
        };
        let column_decay = far(&col_min, &|i| self.cols.degree(i), self.domain.cutoff);
        let row_decay = far(&row_min, &|i| self.rows.degree(i), self.codomain.cutoff);
        let pos = |b: Option<Affine>| matches!(b, Some(a) if *a.slope.numer() > 0);
        let certified = self.finite || (pos(self.row_bound) && pos(self.col_bound));
        CcReport { bounded, column_decay, row_decay, certified, floor }
    }

    /// Sparse triples `(row multi-index, column multi-index, element)`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut triples = Vec::new();
        for (i, m) in self.rows.iter().enumerate() {
            for (j, n) in self.cols.iter().enumerate() {
                let e = &self.entries[i][j];
                if !e.is_zero() {
                    triples.push(serde_json::json!([m, n, e.repr()]));
                }
            }
        }
        let sp = |s: &Space| {
            serde_json::json!({"kind": s.kind, "k": s.k, "r": ratio_string(s.r), "cutoff": s.cutoff})
        };
        serde_json::json!({
            "ring": self.ring,
            "domain": sp(&self.domain),
            "codomain": sp(&self.codomain),
            "entries": triples,
        })
    }
}

fn tail_min(a: Tail, b: Tail) -> Tail {
    match (a, b) {
        (Tail::Zero, t) | (t, Tail::Zero) => t,
        (Tail::Affine(x), Tail::Affine(y)) if x.slope == y.slope => Tail::Affine(Affine::new(x.slope, x.offset.min(y.offset))),
        (Tail::Finite { degree: a, floor: x }, Tail::Finite { degree: b, floor: y }) => Tail::Finite { degree: a.max(b), floor: x.min(y) },
        _ => Tail::Unknown,
    }
}

/// Unscaled integer columns of `f ↦ f∘g` on the grid `{0..=d_out}^j`.
fn pullback_columns(g: &PolyMap, k: usize, d_in: u32, d_out: u32) -> Vec<(Vec<BigInt>, Tail)> {
    let cols = MultiIndices::new(k, d_in);
    let rows = MultiIndices::new(g.j, d_out);
    let side = d_out as usize + 1;
    let pts: Vec<Vec<BigInt>> = box_points(g.j, d_out + 1)
        .iter()
        .map(|z| g.eval(&z.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>()))
        .collect();
    let deg = g.degree();
    (0..cols.len())
        .into_par_iter()
        .map(|ci| {
            let n = cols.get(ci);
            let vals: Vec<BigInt> = pts
                .iter()
                .map(|gz| n.iter().zip(gz).fold(BigInt::from(1), |acc, (&ni, gi)| acc * mahler::binom(gi, ni)))
                .collect();
            let diffs = int_differences(vals, g.j, side);
            let col = rows.iter().map(|m| diffs[box_pos(m, side)].clone()).collect();
            let tail = if deg * cols.degree(ci) <= d_out { Tail::Zero } else { Tail::Unknown };
            (col, tail)
        })
        .collect()
}

/// Matrix of `f ↦ f∘g` from `A^r(Z_p^k)` to `A^s(Z_p^j)`.
pub fn pullback(ring: RingSpec, g: &PolyMap, r: Ratio<i64>, s: Ratio<i64>, d_in: u32, d_out: u32) -> Result<OpMatrix, OpError> {
    let deg = g.degree();
    if s > r || (s == r && deg > 1) {
        return Err(OpError::Radii { r: ratio_string(r), s: ratio_string(s) });
    }
    let k = g.coords.len();
    let cols = pullback_columns(g, k, d_in, d_out);
    let m = OpMatrix::from_int_columns(ring, Space::a(k, r, d_in), Space::a(g.j, s, d_out), cols)?;
    let bounds = if deg <= 1 {
        let b = Affine::new(r - s, -1);
        (Some(b), Some(b))
    } else {
        (None, None)
    };
    Ok(m.with_bounds(bounds.0, bounds.1))
}

/// Unscaled integer matrix `g_nm` of `f ↦ f(pz + j)`, indexed `[m][n]`.
pub fn rescale_unscaled(p: u64, j: &[i64], d: u32) -> Vec<Vec<BigInt>> {
    let g = PolyMap::affine(p as i64, j);
    let cols = pullback_columns(&g, j.len(), d, d);
    let nr = cols[0].0.len();
    (0..nr).map(|m| cols.iter().map(|(c, _)| c[m].clone()).collect()).collect()
}

/// Matrix of `f ↦ f(pz + j)` from `A^r` to `A^(pr)`.
pub fn rescale(ring: RingSpec, j: &[i64], r: Ratio<i64>, d: u32) -> Result<OpMatrix, OpError> {
    let p = ring.p;
    let g = PolyMap::affine(p as i64, j);
    let k = j.len();
    let cols = pullback_columns(&g, k, d, d);
    let s = r * p as i64;
    Ok(OpMatrix::from_int_columns(ring, Space::a(k, r, d), Space::a(k, s, d), cols)?)
}

/// Smallest `v_p(g_nm) − ⌊m/p − n/p²⌋` over the nonzero entries of a one-variable rescale.
pub fn local_bound_margin(p: u64, j: i64, d: u32) -> i64 {
    let g = rescale_unscaled(p, &[j], d);
    let mut best = i64::MAX;
    for (m, row) in g.iter().enumerate() {
        for (n, x) in row.iter().enumerate() {
            if let Some(v) = crate::rings::vp_bigint(x, p) {
                let pp = (p * p) as i64;
                let bound = ((m as i64) * p as i64 - n as i64).div_euclid(pp);
                best = best.min(v as i64 - bound);
            }
        }
    }
    best
}

/// Matrix of `f ↦ h·f` on `A^r`.
pub fn twist_mul(h: &MahlerFn, r: Ratio<i64>, d: u32) -> Result<OpMatrix, OpError> {
    let ring = h.ring();
    if !h.decay_report(r).certified {
        return Err(OpError::Uncertified("multiplier is not certified at the domain radius".into()));
    }
    let h = extend(h, d);
    let k = h.dim();
    let idx = MultiIndices::new(k, d);
    let cols: Vec<MahlerFn> = (0..idx.len())
        .into_par_iter()
        .map(|i| MahlerFn::basis(ring, idx.get(i), d).mul(&h))
        .collect::<Result<_, _>>()?;
    OpMatrix::from_columns(ring, Space::a(k, r, d), Space::a(k, r, d), cols)
}

/// Pads a polynomial expansion with zeros up to cutoff `d`.
fn extend(h: &MahlerFn, d: u32) -> MahlerFn {
    if h.cutoff() >= d || h.tail() != Tail::Zero {
        return h.clone();
    }
    let idx = MultiIndices::new(h.dim(), d);
    let c = idx.iter().map(|n| h.coeff(n).cloned().unwrap_or_else(|| Elem::zero(h.ring()))).collect();
    MahlerFn::from_coeffs(h.ring(), h.dim(), d, c, Tail::Zero).unwrap()
}

/// Diagonal inclusion `A^r ↪ A^s` for `s < r`: entries `α^(⌈rΣn⌉ − ⌈sΣn⌉)` in the scaled bases.
pub fn inclusion(ring: RingSpec, k: usize, r: Ratio<i64>, s: Ratio<i64>, d: u32) -> Result<OpMatrix, OpError> {
    if s >= r {
        return Err(OpError::Radii { r: ratio_string(r), s: ratio_string(s) });
    }
    let idx = MultiIndices::new(k, d);
    let n = idx.len();
    let entries = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        let deg = idx.degree(i) as i64;
                        Elem::alpha(ring).pow((ceil_mul(r, deg) - ceil_mul(s, deg)) as u64)
                    } else {
                        Elem::zero(ring)
                    }
                })
                .collect()
        })
        .collect();
    let b = Some(Affine::new(r - s, -1));
    Ok(OpMatrix {
        ring,
        domain: Space::a(k, r, d),
        codomain: Space::a(k, s, d),
        rows: idx.clone(),
        cols: idx,
        entries,
        col_tail: vec![Tail::Zero; n],
        row_bound: b,
        tri: b,
        col_bound: b,
        finite: false,
    })
}
