//! Characteristic series `det(1 − X·u)`, Newton polygons, slope factorization
//! and Riesz projectors.

use std::collections::HashMap;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bound::{ratio_string, Affine};
use crate::linalg::{self, Mat};
use crate::opmat::{OpError, OpMatrix};
use crate::rings::{Elem, Kind, RingError, RingSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FredError {
    #[error("coefficient of X^{coeff} misses the target precision: grow cutoff to {needed}")]
    GrowCutoff { coeff: usize, needed: u32 },
    #[error("coefficient of X^{0} cannot be certified: the operator carries no decay bound")]
    NoBound(usize),
    #[error("operator is not an endomorphism of one space")]
    NotEndomorphism,
    #[error("matrix of size {0} exceeds the enumeration limit {1}")]
    SizeLimit(usize, usize),
    #[error("slope {0} is an uncertified Newton slope; choose a separating value")]
    Ambiguous(String),
    #[error("slopes up to {0} are not certified by the coefficient precision")]
    Unseparated(String),
    #[error("{0}")]
    Precision(String),
    #[error("not supported: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Op(#[from] OpError),
}

/// A truncated series `1 + a_1 X + … + a_K X^K`.
#[derive(Clone, Debug)]
pub struct FredholmSeries {
    ring: RingSpec,
    coeffs: Vec<Elem>,
    certified: Vec<bool>,
    /// all coefficients past `K` vanish
    poly: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Segment {
    pub slope: String,
    pub length: usize,
    pub certified: bool,
    #[serde(skip)]
    pub value: Ratio<i64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonPolygon {
    pub vertices: Vec<(usize, i64)>,
    pub segments: Vec<Segment>,
    pub certified_upto: Option<String>,
}

impl NewtonPolygon {
    /// Slopes with multiplicity, in increasing order.
    pub fn slopes(&self) -> Vec<Ratio<i64>> {
        self.segments.iter().flat_map(|s| std::iter::repeat(s.value).take(s.length)).collect()
    }

    pub fn certified_slopes(&self) -> Vec<Ratio<i64>> {
        self.segments
            .iter()
            .take_while(|s| s.certified)
            .flat_map(|s| std::iter::repeat(s.value).take(s.length))
            .collect()
    }

    pub fn width(&self) -> usize {
        self.segments.iter().map(|s| s.length).sum()
    }
}

fn ser_mul(a: &[Elem], b: &[Elem], k: usize) -> Result<Vec<Elem>, RingError> {
    let ring = a[0].spec();
    let mut out = vec![linalg::acc_zero(ring); k + 1];
    for (i, x) in a.iter().enumerate().take(k + 1) {
        if x.is_zero() && x.prec() >= i64::MAX / 8 {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(k + 1 - i) {
            out[i + j] = out[i + j].add(&x.mul(y)?)?;
        }
    }
    Ok(out)
}

/// Power-series inverse of `a` with invertible constant term.
fn ser_inv(a: &[Elem], k: usize) -> Result<Vec<Elem>, RingError> {
    let ring = a[0].spec();
    let b0 = a[0].inv()?;
    let mut b = vec![b0.clone()];
    for i in 1..=k {
        let mut s = linalg::acc_zero(ring);
        for j in 1..=i.min(a.len() - 1) {
            s = s.add(&a[j].mul(&b[i - j])?)?;
        }
        b.push(s.mul(&b0)?.neg());
    }
    Ok(b)
}

impl FredholmSeries {
    /// Series with the given coefficients; `coeffs[0]` must be 1.
    pub fn new(ring: RingSpec, coeffs: Vec<Elem>, poly: bool) -> Result<Self, FredError> {
        if coeffs.is_empty() || !coeffs[0].eq_int(1) {
            return Err(FredError::Precision("constant term must be 1".into()));
        }
        let n = coeffs.len();
        Ok(FredholmSeries { ring, coeffs, certified: vec![true; n], poly })
    }

    pub fn from_ints(ring: RingSpec, c: &[i64]) -> Self {
        let coeffs = c.iter().map(|&x| Elem::from_int(ring, x)).collect();
        FredholmSeries::new(ring, coeffs, true).expect("constant term 1")
    }

    pub fn one(ring: RingSpec, k: usize) -> Self {
        let mut c = vec![Elem::zero(ring); k + 1];
        c[0] = Elem::one(ring);
        FredholmSeries { ring, coeffs: c, certified: vec![true; k + 1], poly: true }
    }

    /// `Π (1 − c_i X)`.
    pub fn from_roots(ring: RingSpec, cs: &[Elem], k: usize) -> Self {
        let mut s = FredholmSeries::one(ring, k);
        for c in cs {
            let f = FredholmSeries { ring, coeffs: vec![Elem::one(ring), c.neg()], certified: vec![true; 2], poly: true };
            s = s.mul(&f).expect("same ring");
        }
        s
    }

    pub fn ring(&self) -> RingSpec {
        self.ring
    }

    pub fn coeffs(&self) -> &[Elem] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Elem {
        self.coeffs.get(i).cloned().unwrap_or_else(|| Elem::zero(self.ring))
    }

    pub fn cutoff(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_certified(&self, i: usize) -> bool {
        self.certified.get(i).copied().unwrap_or(self.poly)
    }

    pub fn all_certified(&self) -> bool {
        self.certified.iter().all(|&c| c)
    }

    pub fn is_poly(&self) -> bool {
        self.poly
    }

    /// Degree of the last nonzero coefficient.
    pub fn degree(&self) -> usize {
        (0..self.coeffs.len()).rev().find(|&i| !self.coeffs[i].is_zero()).unwrap_or(0)
    }

    /// Keeps `X^0 … X^k`.
    pub fn truncate(&self, k: usize) -> Self {
        let k = k.min(self.cutoff());
        FredholmSeries {
            ring: self.ring,
            coeffs: self.coeffs[..=k].to_vec(),
            certified: self.certified[..=k].to_vec(),
            poly: self.poly && self.degree() <= k,
        }
    }

    /// Grows the stored range with zeros when the series is a polynomial.
    fn padded(&self, k: usize) -> Vec<Elem> {
        let mut c = self.coeffs.clone();
        while c.len() <= k {
            c.push(if self.poly { Elem::zero(self.ring) } else { Elem::zero_at(self.ring, i64::MIN / 8) });
        }
        c
    }

    fn joint_cutoff(&self, o: &FredholmSeries) -> usize {
        match (self.poly, o.poly) {
            (true, true) => self.cutoff() + o.cutoff(),
            (true, false) => o.cutoff(),
            (false, true) => self.cutoff(),
            (false, false) => self.cutoff().min(o.cutoff()),
        }
    }

    pub fn mul(&self, o: &FredholmSeries) -> Result<Self, FredError> {
        if self.ring != o.ring {
            return Err(RingError::SpecMismatch.into());
        }
        let k = self.joint_cutoff(o);
        let c = ser_mul(&self.padded(k), &o.padded(k), k)?;
        let cert = (0..=k).map(|i| (0..=i).all(|j| self.is_certified(j) && o.is_certified(i - j))).collect();
        Ok(FredholmSeries { ring: self.ring, coeffs: c, certified: cert, poly: self.poly && o.poly })
    }

    /// `self / o` as power series through `X^k` (`k` defaults to the joint cutoff).
    pub fn div(&self, o: &FredholmSeries, k: Option<usize>) -> Result<Self, FredError> {
        if self.ring != o.ring {
            return Err(RingError::SpecMismatch.into());
        }
        let k = k.unwrap_or_else(|| if o.poly { self.cutoff() } else { self.cutoff().min(o.cutoff()) });
        let inv = ser_inv(&o.padded(k), k)?;
        let c = ser_mul(&self.padded(k), &inv, k)?;
        let cert = (0..=k).map(|i| (0..=i).all(|j| self.is_certified(j) && o.is_certified(j))).collect();
        let mut out = FredholmSeries { ring: self.ring, coeffs: c, certified: cert, poly: false };
        if self.poly && o.poly && out.degree() + o.degree() <= k && out.mul(o)?.agrees(self) {
            out.poly = self.poly && o.poly;
        }
        Ok(out)
    }

    /// Coefficientwise agreement at joint precision, over the common range.
    pub fn agrees(&self, o: &FredholmSeries) -> bool {
        let k = if self.poly && o.poly { self.cutoff().max(o.cutoff()) } else { self.cutoff().min(o.cutoff()) };
        (0..=k).all(|i| self.coeff(i).agrees(&o.coeff(i)))
    }

    /// `v(a_n) + n` for the stored range; a Fredholm series has these tending to infinity.
    pub fn margins(&self) -> Vec<i64> {
        let va = match self.ring.kind {
            Kind::Zp | Kind::Qp | Kind::FpLaurent | Kind::MixedAnnulus => 1,
        };
        self.coeffs.iter().enumerate().map(|(n, a)| a.lo().min(a.prec()) + va * n as i64).collect()
    }

    /// Margin test at truncation: the last margin does not fall below the first.
    pub fn margin_ok(&self) -> bool {
        let m = self.margins();
        self.poly || m.last() >= m.first()
    }

    pub fn map<F>(&self, ring: RingSpec, f: F) -> Result<Self, FredError>
    where
        F: Fn(&Elem) -> Result<Elem, RingError>,
    {
        let coeffs = self.coeffs.iter().map(f).collect::<Result<Vec<_>, _>>()?;
        Ok(FredholmSeries { ring, coeffs, certified: self.certified.clone(), poly: self.poly })
    }

    pub fn newton_polygon(&self) -> NewtonPolygon {
        newton_polygon(self)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let c: Vec<_> = self
            .coeffs
            .iter()
            .zip(&self.certified)
            .map(|(a, &ok)| serde_json::json!({"coeff": a.repr(), "prec": a.prec(), "certified": ok}))
            .collect();
        serde_json::json!({"ring": self.ring, "coeffs": c, "polynomial": self.poly, "margin_ok": self.margin_ok()})
    }
}

/// `det(1 − X·m)` through `X^k` by elimination over `R[X]/X^(k+1)`.
pub fn det_one_minus(m: &Mat, k: usize) -> Result<Vec<Elem>, RingError> {
    let n = m.len();
    let ring = m[0][0].spec();
    let mut a: Vec<Vec<Vec<Elem>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut s = vec![Elem::zero_at(ring, i64::MAX / 4); k + 1];
                    if i == j {
                        s[0] = Elem::one(ring);
                    }
                    if k >= 1 {
                        s[1] = m[i][j].neg();
                    }
                    s
                })
                .collect()
        })
        .collect();
    let mut det = vec![Elem::zero_at(ring, i64::MAX / 4); k + 1];
    det[0] = Elem::one(ring);
    for c in 0..n {
        let piv = a[c][c].clone();
        det = ser_mul(&det, &piv, k)?;
        let pinv = ser_inv(&piv, k)?;
        let prow: Vec<Vec<Elem>> = a[c][c + 1..].iter().map(|x| ser_mul(&pinv, x, k)).collect::<Result<_, _>>()?;
        let rest: Vec<Vec<Vec<Elem>>> = a
            .drain(c + 1..)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|mut row| -> Result<_, RingError> {
                let f = row[c].clone();
                if f.iter().all(|x| x.is_zero()) {
                    return Ok(row);
                }
                for (j, pj) in prow.iter().enumerate() {
                    let t = ser_mul(&f, pj, k)?;
                    let e = &mut row[c + 1 + j];
                    for (x, y) in e.iter_mut().zip(t) {
                        *x = x.sub(&y)?;
                    }
                }
                Ok(row)
            })
            .collect::<Result<_, _>>()?;
        a.extend(rest);
    }
    Ok(det.into_iter().map(|x| if x.prec() >= i64::MAX / 8 { Elem::zero(ring) } else { x }).collect())
}

/// Lower bound on the truncation error of `a_k`, from an affine bound on rows (or columns).
fn tail_certificate(b: &Affine, sizes: &[usize], d: u32, k: usize) -> i64 {
    if k == 0 {
        return i64::MAX / 4;
    }
    let mut rest = 0i64;
    let mut need = k - 1;
    let mut deg = 0usize;
    while need > 0 {
        let cnt = if deg < sizes.len() { sizes[deg] } else { usize::MAX };
        let take = cnt.min(need);
        rest += b.at(deg as i64) * take as i64;
        need -= take;
        deg += 1;
    }
    b.at(d as i64 + 1) + rest
}

fn degree_sizes(op: &OpMatrix) -> Vec<usize> {
    let idx = op.row_indices();
    let mut v = vec![0usize; idx.cutoff() as usize + 1];
    for i in 0..idx.len() {
        v[idx.degree(i) as usize] += 1;
    }
    // counts for degrees past the cutoff, k-variable simplex numbers
    let kk = idx.k();
    for t in v.len()..v.len() + 64 {
        v.push(binom_usize(t + kk - 1, kk - 1));
    }
    v
}

fn binom_usize(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Characteristic series of a completely continuous endomorphism.
///
/// Each coefficient is truncated to the precision certified by the decay
/// bound of the operator. With `target`, a coefficient that misses it yields
/// a `GrowCutoff` error naming a cutoff that would suffice.
pub fn char_series(op: &OpMatrix, k: usize, target: Option<i64>) -> Result<FredholmSeries, FredError> {
    if !op.is_square() || op.domain().k != op.codomain().k || op.domain().r != op.codomain().r {
        return Err(FredError::NotEndomorphism);
    }
    let ring = op.ring();
    let raw = det_one_minus(&op.entries().to_vec(), k)?;
    let d = op.domain().cutoff;
    let sizes = degree_sizes(op);
    // triangular operators only need the diagonal; otherwise rows or columns
    let bounds: Vec<Affine> =
        [op.tri_bound(), op.row_bound(), op.col_bound()].into_iter().flatten().filter(|b| *b.slope.numer() > 0).collect();
    let cert_at = |dd: u32, i: usize| bounds.iter().map(|b| tail_certificate(b, &sizes, dd, i)).max();
    let mut coeffs = Vec::with_capacity(k + 1);
    let mut certified = Vec::with_capacity(k + 1);
    for (i, a) in raw.into_iter().enumerate() {
        if op.is_finite() || i == 0 {
            coeffs.push(a);
            certified.push(true);
            continue;
        }
        let Some(cert) = cert_at(d, i) else {
            if target.is_some() {
                return Err(FredError::NoBound(i));
            }
            coeffs.push(a);
            certified.push(false);
            continue;
        };
        if let Some(t) = target {
            if cert < t.min(a.prec()) {
                let mut dd = d;
                while cert_at(dd, i).unwrap() < t && dd < d + 10_000 {
                    dd += 1;
                }
                return Err(FredError::GrowCutoff { coeff: i, needed: dd });
            }
        }
        coeffs.push(a.truncate(cert));
        certified.push(true);
    }
    let poly = op.is_finite() && op.nrows() <= k;
    Ok(FredholmSeries { ring, coeffs, certified, poly })
}

/// Characteristic series of a finite dense block (exact polynomial).
pub fn char_poly(m: &Mat) -> Result<FredholmSeries, FredError> {
    let ring = m[0][0].spec();
    let c = det_one_minus(m, m.len())?;
    Ok(FredholmSeries { ring, certified: vec![true; c.len()], coeffs: c, poly: true })
}

/// A bounded complex: `us[i]` acts in degree `start + i`.
#[derive(Clone, Debug)]
pub struct ComplexOp {
    pub start: i32,
    pub us: Vec<OpMatrix>,
    pub ds: Vec<OpMatrix>,
}

impl ComplexOp {
    pub fn new(start: i32, us: Vec<OpMatrix>) -> Self {
        ComplexOp { start, us, ds: vec![] }
    }

    pub fn with_differentials(mut self, ds: Vec<OpMatrix>) -> Self {
        self.ds = ds;
        self
    }

    /// `d∘d = 0` and `d∘u = u∘d` on the stored blocks.
    pub fn check(&self) -> Result<bool, FredError> {
        let z = |m: &Mat| m.iter().flatten().all(|x| x.is_zero());
        for w in self.ds.windows(2) {
            if !z(&linalg::mul(w[1].entries(), w[0].entries())?) {
                return Ok(false);
            }
        }
        for (i, d) in self.ds.iter().enumerate() {
            let l = linalg::mul(d.entries(), self.us[i].entries())?;
            let r = linalg::mul(self.us[i + 1].entries(), d.entries())?;
            if !linalg::agrees(&l, &r) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Clone, Debug)]
pub struct ComplexSeries {
    pub numerator: FredholmSeries,
    pub denominator: FredholmSeries,
    pub quotient: Option<FredholmSeries>,
}

/// `Π det(1 − X u^i)^((−1)^i)` as numerator over denominator, optionally divided out.
pub fn char_series_complex(c: &ComplexOp, k: usize, target: Option<i64>, single: bool) -> Result<ComplexSeries, FredError> {
    let ring = c.us.first().map(|u| u.ring()).ok_or(FredError::NotEndomorphism)?;
    let mut num = FredholmSeries::one(ring, k);
    let mut den = FredholmSeries::one(ring, k);
    for (i, u) in c.us.iter().enumerate() {
        let s = char_series(u, k, target)?;
        if (c.start + i as i32).rem_euclid(2) == 0 {
            num = num.mul(&s)?.truncate(k);
        } else {
            den = den.mul(&s)?.truncate(k);
        }
    }
    let quotient = if single {
        let q = num.div(&den, Some(k))?;
        if !q.margin_ok() {
            return Err(FredError::Precision("quotient fails the Fredholm margin test".into()));
        }
        Some(q)
    } else {
        None
    };
    Ok(ComplexSeries { numerator: num, denominator: den, quotient })
}

/// `tr Sym^a(u)`: diagonal coefficients of `u` acting on degree-`a` monomials.
pub fn trace_sym(u: &Mat, a: usize) -> Result<Elem, RingError> {
    let n = u.len();
    let ring = u[0][0].spec();
    if a == 0 {
        return Ok(Elem::one(ring));
    }
    let mut total = linalg::acc_zero(ring);
    for m in monomials(n, a) {
        // expand Π_i (Σ_j u_ji x_j)^{m_i}
        let mut poly: HashMap<Vec<u8>, Elem> = HashMap::from([(vec![0u8; n], Elem::one(ring))]);
        for (i, &mi) in m.iter().enumerate() {
            for _ in 0..mi {
                let mut next: HashMap<Vec<u8>, Elem> = HashMap::new();
                for (e, c) in &poly {
                    for j in 0..n {
                        if u[j][i].is_zero() || e[j] + 1 > m[j] {
                            continue;
                        }
                        let mut f = e.clone();
                        f[j] += 1;
                        let t = c.mul(&u[j][i])?;
                        let slot = next.entry(f).or_insert_with(|| linalg::acc_zero(ring));
                        *slot = slot.add(&t)?;
                    }
                }
                poly = next;
            }
        }
        if let Some(c) = poly.get(&m) {
            total = total.add(c)?;
        }
    }
    Ok(total)
}

fn monomials(n: usize, a: usize) -> Vec<Vec<u8>> {
    if n == 0 {
        return if a == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=a).rev() {
        for mut rest in monomials(n - 1, a - first) {
            rest.insert(0, first as u8);
            out.push(rest);
        }
    }
    out
}

/// `tr Λ^b(u)`: sum of the principal `b × b` minors.
pub fn trace_wedge(u: &Mat, b: usize) -> Result<Elem, RingError> {
    let ring = u[0][0].spec();
    let mut total = linalg::acc_zero(ring);
    for s in subsets(u.len(), b) {
        if s.is_empty() {
            return Ok(Elem::one(ring));
        }
        let sub: Mat = s.iter().map(|&i| s.iter().map(|&j| u[i][j].clone()).collect()).collect();
        total = total.add(&linalg::det_leibniz(&sub)?)?;
    }
    Ok(total)
}

fn subsets(n: usize, b: usize) -> Vec<Vec<usize>> {
    if b == 0 {
        return vec![vec![]];
    }
    if n < b {
        return vec![];
    }
    let mut out = subsets(n - 1, b);
    for mut s in subsets(n - 1, b - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SymCheck {
    pub k_max: usize,
    /// `(k, agrees)` per degree
    pub degrees: Vec<(usize, bool)>,
    pub ok: bool,
}

/// Compares `det(1 − X u^•)^(−1)` with the graded symmetric power traces.
pub fn sym_check(c: &ComplexOp, k_max: usize) -> Result<SymCheck, FredError> {
    const LIMIT: usize = 12;
    let ring = c.us[0].ring();
    for u in &c.us {
        if u.nrows() > LIMIT {
            return Err(FredError::SizeLimit(u.nrows(), LIMIT));
        }
    }
    // left side: inverse of the alternating product of exact characteristic polynomials
    let mut num = FredholmSeries::one(ring, k_max);
    let mut den = FredholmSeries::one(ring, k_max);
    for (i, u) in c.us.iter().enumerate() {
        let s = char_poly(&u.entries().to_vec())?;
        if (c.start + i as i32).rem_euclid(2) == 0 {
            num = num.mul(&s)?;
        } else {
            den = den.mul(&s)?;
        }
    }
    let lhs = den.div(&num, Some(k_max))?;
    // right side: graded traces, Sym in even degrees and signed Λ in odd degrees
    let mut rhs = vec![Elem::zero(ring); k_max + 1];
    rhs[0] = Elem::one(ring);
    for (i, u) in c.us.iter().enumerate() {
        let m = u.entries().to_vec();
        let odd = (c.start + i as i32).rem_euclid(2) == 1;
        let mut t = Vec::with_capacity(k_max + 1);
        for a in 0..=k_max {
            t.push(if odd {
                let w = trace_wedge(&m, a)?;
                if a % 2 == 1 { w.neg() } else { w }
            } else {
                trace_sym(&m, a)?
            });
        }
        rhs = ser_mul(&rhs, &t, k_max)?;
    }
    let degrees: Vec<(usize, bool)> = (0..=k_max).map(|k| (k, lhs.coeff(k).agrees(&rhs[k]))).collect();
    let ok = degrees.iter().all(|d| d.1);
    Ok(SymCheck { k_max, degrees, ok })
}

fn lower_hull(pts: &[(usize, i64)]) -> Vec<(usize, i64)> {
    let mut h: Vec<(usize, i64)> = Vec::new();
    for &p in pts {
        while h.len() >= 2 {
            let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
            // drop b when it lies on or above the segment a–p
            let lhs = (b.1 - a.1) as i128 * (p.0 - a.0) as i128;
            let rhs = (p.1 - a.1) as i128 * (b.0 - a.0) as i128;
            if lhs >= rhs {
                h.pop();
            } else {
                break;
            }
        }
        h.push(p);
    }
    h
}

/// Lower convex hull of `(n, v(a_n))`.
///
/// Zero coefficients enter with their precision as a lower bound. A segment
/// is certified when both ends are exact valuations and every earlier
/// segment is certified; a segment ending at the truncation of a
/// non-polynomial series is never certified.
pub fn newton_polygon(p: &FredholmSeries) -> NewtonPolygon {
    let k = p.cutoff();
    let pts: Vec<(usize, i64)> = p
        .coeffs
        .iter()
        .enumerate()
        .filter(|(i, a)| !(p.poly && a.is_zero()) || *i == 0)
        .filter(|(i, a)| !a.is_zero() || (*i > 0 && !p.poly))
        .map(|(i, a)| (i, a.lo()))
        .collect();
    let mut pts = pts;
    // trailing lower bounds beyond the last exact point carry no slope information
    while pts.len() > 1 && p.coeffs[pts[pts.len() - 1].0].is_zero() {
        pts.pop();
    }
    let hull = lower_hull(&pts);
    let mut segments = Vec::new();
    let mut ok = true;
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let slope = Ratio::new(b.1 - a.1, (b.0 - a.0) as i64);
        let exact = !p.coeffs[a.0].is_zero() && !p.coeffs[b.0].is_zero() && p.is_certified(a.0) && p.is_certified(b.0);
        let inner = (a.0 + 1..b.0).all(|i| p.coeffs[i].is_zero() == false || p.coeffs[i].prec() >= a.1 + ((slope * (i - a.0) as i64).ceil()).to_integer());
        ok = ok && exact && inner && (p.poly || b.0 < k);
        segments.push(Segment { slope: ratio_string(slope), length: b.0 - a.0, certified: ok, value: slope });
    }
    let certified_upto = segments.iter().take_while(|s| s.certified).last().map(|s| s.slope.clone());
    NewtonPolygon { vertices: hull, segments, certified_upto }
}

/// `X^d·Q(1/X)` coefficients of a polynomial series.
fn reversed(q: &FredholmSeries) -> Vec<Elem> {
    let d = q.degree();
    (0..=d).map(|i| q.coeff(d - i)).collect()
}

fn poly_quo(f: &[Elem], g: &[Elem]) -> Result<Vec<Elem>, RingError> {
    let d = g.len() - 1;
    let n = f.len() - 1;
    if n < d {
        return Ok(vec![Elem::zero(f[0].spec())]);
    }
    let mut r = f.to_vec();
    let lead = g[d].inv()?;
    let mut q = vec![Elem::zero(f[0].spec()); n - d + 1];
    for i in (0..=n - d).rev() {
        let c = r[i + d].mul(&lead)?;
        for (j, gj) in g.iter().enumerate() {
            r[i + j] = r[i + j].sub(&c.mul(gj)?)?;
        }
        q[i] = c;
    }
    Ok(q)
}

#[derive(Clone, Debug)]
pub struct SlopeFactor {
    pub q: FredholmSeries,
    pub s: FredholmSeries,
    pub iterations: usize,
    /// the residual `P − Q·S` vanishes at the working precision
    pub residual_ok: bool,
}

/// Factors `P = Q·S` with `Q` a polynomial carrying the slopes `≤ ν`.
pub fn slope_factor(p: &FredholmSeries, nu: Ratio<i64>) -> Result<SlopeFactor, FredError> {
    let ring = p.ring();
    if !matches!(ring.kind, Kind::Qp | Kind::FpLaurent) {
        return Err(FredError::Unsupported("slope factorization needs a field-like model (Qp or FpLaurent)"));
    }
    let np = newton_polygon(p);
    // a slope equal to ν goes to Q, but only if its multiplicity is known
    if np.segments.iter().any(|s| s.value == nu && !s.certified) {
        return Err(FredError::Ambiguous(ratio_string(nu)));
    }
    let d: usize = np.segments.iter().filter(|s| s.value <= nu).map(|s| s.length).sum();
    if np.segments.iter().filter(|s| s.value <= nu).any(|s| !s.certified)
        || (!np.segments.iter().any(|s| s.value > nu) && !p.is_poly() && d > 0)
    {
        return Err(FredError::Unseparated(ratio_string(nu)));
    }
    let k = p.cutoff();
    if d == 0 {
        return Ok(SlopeFactor { q: FredholmSeries::one(ring, 0), s: p.clone(), iterations: 0, residual_ok: true });
    }
    let f: Vec<Elem> = p.coeffs.iter().take(p.degree().max(d) + 1).cloned().collect();
    let mut g: Vec<Elem> = f[..=d].to_vec();
    let mut it = 0;
    loop {
        it += 1;
        let h = poly_quo(&f, &g)?;
        let hinv = ser_inv(&h, d)?;
        let mut ng = ser_mul(&f, &hinv, d)?;
        let c0 = ng[0].inv()?;
        for x in ng.iter_mut() {
            *x = x.mul(&c0)?;
        }
        let stable = ng.iter().zip(&g).all(|(a, b)| a.agrees(b));
        g = ng;
        if stable {
            break;
        }
        if it >= 200 {
            return Err(FredError::Precision("factor iteration did not stabilize".into()));
        }
    }
    let q = FredholmSeries { ring, certified: vec![true; d + 1], coeffs: g, poly: true };
    let s = p.div(&q, Some(k))?;
    let back = q.mul(&s)?;
    let residual_ok = (0..=k).all(|i| back.coeff(i).agrees(&p.coeff(i)));
    Ok(SlopeFactor { q, s, iterations: it, residual_ok })
}

#[derive(Clone, Debug)]
pub struct Riesz {
    pub projector: Mat,
    pub rank: usize,
    pub trace: Elem,
    pub n_block: Mat,
    pub iterations: usize,
}

/// Projector onto the part of `u` where `Q*(u)` is nilpotent, and `u` restricted there.
pub fn riesz_decompose(u: &Mat, q: &FredholmSeries) -> Result<Riesz, FredError> {
    let ring = u[0][0].spec();
    let n = u.len();
    let qs = reversed(q);
    let d = qs.len() - 1;
    if d == 0 {
        let z: Mat = vec![vec![Elem::zero(ring); n]; n];
        return Ok(Riesz { projector: z, rank: 0, trace: Elem::zero(ring), n_block: vec![], iterations: 0 });
    }
    // Q*(u) = Σ q_i u^(d−i) by Horner from the leading q_0, then A = 1 − Q*(u)/Q*(0)
    let mut acc = linalg::scale(&linalg::identity(ring, n), &qs[d])?;
    for c in qs[..d].iter().rev() {
        acc = linalg::mul(&acc, u)?;
        for (i, row) in acc.iter_mut().enumerate() {
            row[i] = row[i].add(c)?;
        }
    }
    let q0inv = qs[0].inv()?;
    let mut e = linalg::sub(&linalg::identity(ring, n), &linalg::scale(&acc, &q0inv)?)?;
    let mut it = 0;
    loop {
        it += 1;
        // A = 1 on the Q-block and topologically nilpotent on the rest, so A^(2^k)
        // has the same limit as A^(n!); squaring spends the fewest digits per step
        let next = linalg::mul(&e, &e)?;
        let stable = linalg::agrees(&next, &e);
        e = next;
        if stable {
            break;
        }
        if it >= 64 {
            return Err(FredError::Precision("projector did not stabilize".into()));
        }
    }
    let trace = linalg::trace(&e)?;
    let piv = linalg::pivots(&e)?;
    let rank = piv.len();
    // the trace of an idempotent is its rank; if precision cannot see that, nothing here is reliable
    if trace.prec() < 1 || !trace.agrees(&Elem::from_int(ring, rank as i64)) {
        return Err(FredError::Precision(format!(
            "projector lost its precision (trace {trace}); raise the ring precision"
        )));
    }
    let rows: Vec<usize> = piv.iter().map(|x| x.0).collect();
    let cols: Vec<usize> = piv.iter().map(|x| x.1).collect();
    let n_block = if rank == 0 {
        vec![]
    } else {
        let basis: Mat = (0..n).map(|i| cols.iter().map(|&c| e[i][c].clone()).collect()).collect();
        let er: Mat = rows.iter().map(|&r| basis[r].clone()).collect();
        let ub = linalg::mul(u, &basis)?;
        let ubr: Mat = rows.iter().map(|&r| ub[r].clone()).collect();
        linalg::mul(&linalg::inverse(&er)?, &ubr)?
    };
    Ok(Riesz { projector: e, rank, trace, n_block, iterations: it })
}
