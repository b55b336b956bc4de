//! The rank-one Iwahori model: the λ-twisted action on distributions on `Z_p`,
//! the `U_p` operator and its slopes, and the classicality congruence.
//!
//! On functions `γ = (a, b; c, d)` acts by
//! `f ↦ λ(a + cz)·f((b + dz)/(a + cz))`. This is a left action, so the
//! distribution-side matrices (transposes) satisfy
//! `star(γ₁γ₂) = star(γ₂)·star(γ₁)`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bound::{ceil_mul, ratio_string, Affine};
use crate::fredholm::{self, FredError, FredholmSeries, NewtonPolygon};
use crate::linalg::Mat;
use crate::mahler::{self, MahlerError, MahlerFn, Tail};
use crate::opmat::{OpError, OpMatrix, Space};
use crate::rings::{Elem, Kind, RingError, RingSpec};
use crate::weights::{DatumType, Factor, RootDatum, WeightChar, WeightError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UpError {
    #[error("({0}, {1}; {2}, {3}) is not in the Iwahori subgroup")]
    NotIwahori(i64, i64, i64, i64),
    #[error("the model needs a one-factor weight")]
    Rank,
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Mahler(#[from] MahlerError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Fred(#[from] FredError),
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// An integer matrix `(a, b; c, d)` with `a` a unit, `p | c`, `ad − bc ≠ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IwahoriMat {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IwahoriMat {
    pub fn new(p: u64, a: i64, b: i64, c: i64, d: i64) -> Result<Self, UpError> {
        let p = p as i64;
        if a.rem_euclid(p) == 0 || c.rem_euclid(p) != 0 || a as i128 * d as i128 == b as i128 * c as i128 {
            return Err(UpError::NotIwahori(a, b, c, d));
        }
        Ok(IwahoriMat { a, b, c, d })
    }

    pub fn identity() -> Self {
        IwahoriMat { a: 1, b: 0, c: 0, d: 1 }
    }

    /// The coset representative `(1, j; 0, p)`.
    pub fn coset(p: u64, j: i64) -> Self {
        IwahoriMat { a: 1, b: j, c: 0, d: p as i64 }
    }

    pub fn mul(&self, o: &IwahoriMat) -> IwahoriMat {
        IwahoriMat {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// `(b + dz)/(a + cz)` as a residue modulo `p^e`, exact when `a + cz = 1`.
    fn mobius(&self, p: u64, z: i64, e: u32) -> BigInt {
        let num = BigInt::from(self.b) + BigInt::from(self.d) * z;
        let den = BigInt::from(self.a) + BigInt::from(self.c) * z;
        if den.is_one() {
            return num;
        }
        let m = BigInt::from(p).pow(e);
        let phi = &m - &m / BigInt::from(p);
        let inv = den.mod_floor(&m).modpow(&(phi - 1u32), &m);
        (num * inv).mod_floor(&m)
    }
}

fn one_factor(l: &WeightChar) -> Result<(), UpError> {
    if l.factors().len() != 1 {
        return Err(UpError::Rank);
    }
    Ok(())
}

/// Unscaled image columns `γ·binom(z, n)` for `n ≤ d_in`, through degree `d_out`.
pub fn function_columns(g: &IwahoriMat, l: &WeightChar, d_in: u32, d_out: u32) -> Result<Vec<MahlerFn>, UpError> {
    one_factor(l)?;
    let ring = l.ring();
    let p = ring.p;
    let cap = match ring.kind {
        Kind::Zp | Kind::Qp => ring.n,
        _ => ring.n.max(1),
    };
    let exact_arg = g.c == 0 && g.a == 1;
    let e = cap + mahler::vp_factorial(d_in as u64, p) as u32 + 2;
    let twist: Vec<Elem> = (0..=d_out as i64)
        .map(|z| l.eval_units(&[g.a + g.c * z]).map(|v| v.value))
        .collect::<Result<_, _>>()?;
    let args: Vec<BigInt> = (0..=d_out as i64).map(|z| g.mobius(p, z, e)).collect();
    let algebraic = l.algebraic_weight().map(|w| w[0] as u32);
    (0..=d_in)
        .into_par_iter()
        .map(|n| {
            let loss = mahler::vp_factorial(n as u64, p) as i64;
            let vals: Vec<Elem> = args
                .iter()
                .zip(&twist)
                .map(|(w, t)| {
                    let b = Elem::from_bigint(ring, &mahler::binom(w, n));
                    let b = if exact_arg || !matches!(ring.kind, Kind::Zp | Kind::Qp) { b } else { b.truncate(e as i64 - loss) };
                    b.mul(t)
                })
                .collect::<Result<_, _>>()?;
            let f = MahlerFn::fit_values(ring, 1, d_out, &vals)?;
            // polynomial images: c = 0, or an algebraic weight of exponent ≥ n
            let poly = (g.c == 0 || algebraic.is_some_and(|k| k >= n && k <= d_out)) && n <= d_out;
            Ok(f.with_tail(if poly { Tail::Zero } else { Tail::Unknown }))
        })
        .collect()
}

/// Distribution-side matrix of `γ` on `D^r`, truncated at degree `d`.
pub fn star_matrix(g: &IwahoriMat, l: &WeightChar, r: Ratio<i64>, d: u32) -> Result<OpMatrix, UpError> {
    let ring = l.ring();
    let cols = function_columns(g, l, d, d)?;
    let f = OpMatrix::from_columns(ring, Space::a(1, r, d), Space::a(1, r, d), cols)?;
    Ok(f.transpose())
}

/// Decay bounds for the function-side `U_p` matrix on `A^r`: `(column, row, diagonal)`.
pub fn up_bounds(ring: RingSpec, r: Ratio<i64>) -> (Affine, Affine, Affine) {
    let p = ring.p as i64;
    let pm1 = Ratio::from_integer(p - 1);
    match ring.kind {
        Kind::Zp | Kind::Qp => {
            let col = Affine::new((pm1 / (p * p)).min(r * pm1 / p), -ceil_mul(r, p) - 2);
            let row = Affine::new((pm1 / (p * p)).min(r * pm1), -3);
            (col, row, Affine::new(Ratio::from_integer(1), 1))
        }
        _ => {
            let np = ring.n.max(1) as i64;
            let col = Affine::new(r * pm1 / p, -ceil_mul(r, p * np) - 1);
            let row = Affine::new(r * pm1, -ceil_mul(r, p * p * np) - 1);
            // diagonal entries p^(n+1) vanish once n + 1 ≥ N
            let m = ring.m as i64 + 1;
            (col, row, Affine::new(Ratio::from_integer(m), -m * (np - 1)))
        }
    }
}

#[derive(Clone, Debug)]
pub struct UpOperator {
    pub weight: WeightChar,
    pub r: Ratio<i64>,
    pub cutoff: u32,
    pub matrix: OpMatrix,
    pub summands: Vec<OpMatrix>,
}

/// `U_p = Σ_j star((1, j; 0, p))` on `D^r`, with its decay bounds.
pub fn up_matrix(l: &WeightChar, r: Ratio<i64>, d: u32) -> Result<UpOperator, UpError> {
    let ring = l.ring();
    let p = ring.p;
    let summands: Vec<OpMatrix> = (0..p as i64)
        .into_par_iter()
        .map(|j| star_matrix(&IwahoriMat::coset(p, j), l, r, d))
        .collect::<Result<_, _>>()?;
    let mut total = summands[0].clone();
    for s in &summands[1..] {
        total = total.add(s)?;
    }
    let (col, row, diag) = up_bounds(ring, r);
    // the distribution side swaps rows and columns
    let matrix = total.with_bounds(Some(col), Some(row)).with_triangular(Some(diag));
    Ok(UpOperator { weight: l.clone(), r, cutoff: d, matrix, summands })
}

impl UpOperator {
    pub fn char_series(&self, k: usize, target: Option<i64>) -> Result<FredholmSeries, UpError> {
        Ok(fredholm::char_series(&self.matrix, k, target)?)
    }

    /// `true` when the stored matrix is the sum of the stored summands.
    pub fn sum_check(&self) -> bool {
        let mut t = self.summands[0].clone();
        for s in &self.summands[1..] {
            t = t.add(s).expect("same shape");
        }
        crate::linalg::agrees(t.entries(), self.matrix.entries())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopeReport {
    pub series: serde_json::Value,
    pub polygon: NewtonPolygon,
    pub certified_upto: Option<String>,
}

pub fn up_slopes(l: &WeightChar, r: Ratio<i64>, d: u32, k: usize, target: Option<i64>) -> Result<(FredholmSeries, NewtonPolygon), UpError> {
    let u = up_matrix(l, r, d)?;
    let s = u.char_series(k, target)?;
    let np = s.newton_polygon();
    Ok((s, np))
}

/// `U_p` on `V_k`, the dual of polynomials of degree `≤ k`, for the algebraic weight `k`.
pub fn classical_matrix(ring: RingSpec, k: u32) -> Result<Mat, UpError> {
    let l = WeightChar::algebraic(ring, &[k]);
    let u = up_matrix(&l, Ratio::from_integer(0), k)?;
    Ok(u.matrix.entries().to_vec())
}

/// The ⋆-action of `γ` on `V_k`.
pub fn classical_star(ring: RingSpec, g: &IwahoriMat, k: u32) -> Result<Mat, UpError> {
    let l = WeightChar::algebraic(ring, &[k]);
    Ok(star_matrix(g, &l, Ratio::from_integer(0), k)?.entries().to_vec())
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeMargin {
    pub m: usize,
    /// `v(coefficient of X^m in det_D/det_Vk) − (k+1)m`
    pub ratio_margin: i64,
    /// `v(coefficient of X^m in det_D − det_Vk) − (k+1)m`
    pub difference_margin: i64,
    /// the precision reaches `(k+1)m`, so the margins decide the congruence
    pub decided: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalityReport {
    pub k: u32,
    pub p: u64,
    pub n_bound_exponent: i64,
    pub cutoff: u32,
    pub degrees: Vec<DegreeMargin>,
    /// ratio reading: `det_D ≡ det_Vk·(1 + O(N X))`
    pub holds: bool,
    /// difference reading: `det_D − det_Vk ∈ O(N X)`
    pub holds_additive: bool,
}

fn margin(e: &Elem, need: i64) -> (i64, bool) {
    let v = if e.is_zero() { e.prec() } else { e.lo() };
    (v - need, e.prec() >= need || !e.is_zero())
}

/// Compares `det(1 − X U_p)` on the distribution model with the one on `V_k`.
pub fn classicality_check(ring: RingSpec, k: u32, kk: usize, d: u32, r: Ratio<i64>) -> Result<ClassicalityReport, UpError> {
    let datum = RootDatum::new(DatumType::GL2);
    let nb = datum.n_bound(&[k as i64, 0], &crate::weights::standard_tau(DatumType::GL2))?;
    let l = WeightChar::algebraic(ring, &[k]);
    let big = up_matrix(&l, r, d)?.char_series(kk, None)?;
    let small = fredholm::char_poly(&classical_matrix(ring, k)?)?;
    let ratio = big.div(&small, Some(kk))?;
    let mut degrees = Vec::new();
    for m in 0..=kk {
        let need = nb * m as i64;
        let (rm, d1) = if m == 0 { (0, true) } else { margin(&ratio.coeff(m), need) };
        let diff = big.coeff(m).sub(&small.coeff(m))?;
        let (dm, d2) = margin(&diff, need);
        degrees.push(DegreeMargin { m, ratio_margin: rm, difference_margin: dm, decided: d1 && d2 && big.is_certified(m) });
    }
    let holds = degrees.iter().all(|g| g.decided && g.ratio_margin >= 0);
    let holds_additive = degrees.iter().all(|g| g.decided && g.difference_margin >= 0);
    Ok(ClassicalityReport { k, p: ring.p, n_bound_exponent: nb, cutoff: d, degrees, holds, holds_additive })
}

/// The boundary weight `γ ↦ 1 + T` in a series model.
pub fn boundary_weight(ring: RingSpec) -> Result<WeightChar, UpError> {
    let u = Elem::one(ring).add(&Elem::alpha(ring))?;
    Ok(WeightChar::new(ring, vec![Factor::Generator(u)])?)
}

/// Radius as a display string.
pub fn radius_label(r: Ratio<i64>) -> String {
    ratio_string(r)
}

/// Exact unscaled integer `U_p` column data, `[m][n]`, for tests and reports.
pub fn up_unscaled(p: u64, d: u32) -> Vec<Vec<BigInt>> {
    let mut acc: Vec<Vec<BigInt>> = vec![vec![BigInt::zero(); d as usize + 1]; d as usize + 1];
    for j in 0..p as i64 {
        let g = crate::opmat::rescale_unscaled(p, &[j], d);
        for (a, b) in acc.iter_mut().zip(g) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_entry() {
        let ring = RingSpec::qp(3, 10);
        let u = up_matrix(&WeightChar::algebraic(ring, &[0]), Ratio::new(1, 2), 8).unwrap();
        assert!(u.matrix.entry(0, 0).eq_int(3));
        assert!((1..9).all(|n| u.matrix.entry(0, n).is_zero()));
        assert!(u.sum_check());
    }

    #[test]
    fn classical_k0() {
        let m = classical_matrix(RingSpec::qp(3, 10), 0).unwrap();
        assert!(m.len() == 1 && m[0][0].eq_int(3));
    }
}
