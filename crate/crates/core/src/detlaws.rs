//! Determinant laws of matrix representations, the ratio criterion, and kernel sampling.
//!
//! Everything is computed in a polynomial ring `A[t_1, …, t_s, X_1, …]` over a
//! ring model: the `t`'s are the symbols appearing in the generator matrices,
//! the `X`'s are appended by the operations as needed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::rings::{Elem, RingError, RingSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DetError {
    #[error("degree {got} exceeds the bound {bound}")]
    DegreeBlowup { got: u32, bound: u32 },
    #[error("the numerator law has smaller dimension ({plus}) than the denominator ({minus})")]
    Dimensions { plus: usize, minus: usize },
    #[error("cannot parse polynomial '{0}'")]
    Parse(String),
    #[error("generator '{0}' is not square of the law's dimension")]
    Shape(String),
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// Sparse polynomial; exponent vectors carry no trailing zeros.
#[derive(Clone, Debug)]
pub struct Poly {
    ring: RingSpec,
    terms: BTreeMap<Vec<u32>, Elem>,
}

fn trim(mut e: Vec<u32>) -> Vec<u32> {
    while e.last() == Some(&0) {
        e.pop();
    }
    e
}

fn add_exp(a: &[u32], b: &[u32]) -> Vec<u32> {
    let n = a.len().max(b.len());
    (0..n).map(|i| a.get(i).copied().unwrap_or(0) + b.get(i).copied().unwrap_or(0)).collect()
}

impl Poly {
    pub fn zero(ring: RingSpec) -> Self {
        Poly { ring, terms: BTreeMap::new() }
    }

    pub fn constant(c: Elem) -> Self {
        let mut p = Poly::zero(c.spec());
        p.push(vec![], c);
        p
    }

    pub fn int(ring: RingSpec, n: i64) -> Self {
        Poly::constant(Elem::from_int(ring, n))
    }

    pub fn var(ring: RingSpec, i: usize) -> Self {
        let mut e = vec![0; i + 1];
        e[i] = 1;
        let mut p = Poly::zero(ring);
        p.push(e, Elem::one(ring));
        p
    }

    pub fn ring(&self) -> RingSpec {
        self.ring
    }

    fn push(&mut self, e: Vec<u32>, c: Elem) {
        let e = trim(e);
        let v = match self.terms.remove(&e) {
            Some(old) => old.add(&c).expect("same ring"),
            None => c,
        };
        if !v.is_zero() {
            self.terms.insert(e, v);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Elem)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.push(e.clone(), c.clone());
        }
        r
    }

    pub fn neg(&self) -> Poly {
        Poly { ring: self.ring, terms: self.terms.iter().map(|(e, c)| (e.clone(), c.neg())).collect() }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero(self.ring);
        for (e, c) in &self.terms {
            for (f, d) in &o.terms {
                r.push(add_exp(e, f), c.mul(d).expect("same ring"));
            }
        }
        r
    }

    pub fn scale(&self, c: &Elem) -> Poly {
        let mut r = Poly::zero(self.ring);
        for (e, d) in &self.terms {
            r.push(e.clone(), d.mul(c).expect("same ring"));
        }
        r
    }

    pub fn pow(&self, n: u32) -> Poly {
        (0..n).fold(Poly::int(self.ring, 1), |acc, _| acc.mul(self))
    }

    /// Total degree in the variables with index `≥ from`.
    pub fn degree_from(&self, from: usize) -> u32 {
        self.terms.keys().map(|e| e.iter().skip(from).sum()).max().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.degree_from(0)
    }

    /// Drops the terms of degree `> max` in the variables with index `≥ from`.
    pub fn truncate_from(&self, from: usize, max: u32) -> Poly {
        let terms =
            self.terms.iter().filter(|(e, _)| e.iter().skip(from).sum::<u32>() <= max).map(|(e, c)| (e.clone(), c.clone())).collect();
        Poly { ring: self.ring, terms }
    }

    /// Splits off the variables with index `≥ from`: `Σ X^e · coefficient(e)`.
    pub fn split_from(&self, from: usize) -> BTreeMap<Vec<u32>, Poly> {
        let mut out: BTreeMap<Vec<u32>, Poly> = BTreeMap::new();
        for (e, c) in &self.terms {
            let lo: Vec<u32> = e.iter().take(from).copied().collect();
            let hi = trim(e.iter().skip(from).copied().collect());
            out.entry(hi).or_insert_with(|| Poly::zero(self.ring)).push(lo, c.clone());
        }
        out
    }

    /// Every term has degree exactly `d` in the variables with index `≥ from`.
    pub fn is_homogeneous_from(&self, from: usize, d: u32) -> bool {
        self.terms.keys().all(|e| e.iter().skip(from).sum::<u32>() == d)
    }

    pub fn agrees(&self, o: &Poly) -> bool {
        self.sub(o).is_zero()
    }

    /// Parses sums of terms like `3*x^2*y`, `-t1`, `7` over the given symbol names.
    pub fn parse(ring: RingSpec, s: &str, names: &[String]) -> Result<Poly, DetError> {
        let err = || DetError::Parse(s.to_string());
        let mut out = Poly::zero(ring);
        let t = s.replace(' ', "");
        if t.is_empty() {
            return Err(err());
        }
        let mut chunks = Vec::new();
        let mut cur = String::new();
        for (i, ch) in t.chars().enumerate() {
            if (ch == '+' || ch == '-') && i > 0 && !cur.ends_with('^') {
                chunks.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
        }
        chunks.push(cur);
        for chunk in chunks {
            let (sign, body) = match chunk.strip_prefix('-') {
                Some(b) => (-1, b),
                None => (1, chunk.strip_prefix('+').unwrap_or(&chunk)),
            };
            let mut term = Poly::int(ring, sign);
            for f in body.split('*') {
                let (base, exp) = match f.split_once('^') {
                    Some((b, e)) => (b, e.parse::<u32>().map_err(|_| err())?),
                    None => (f, 1),
                };
                let factor = if let Ok(n) = base.parse::<i64>() {
                    Poly::int(ring, n)
                } else {
                    let i = names.iter().position(|n| n == base).ok_or_else(err)?;
                    Poly::var(ring, i)
                };
                term = term.mul(&factor.pow(exp));
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// Renders with the given variable names (`X<i>` for unnamed ones).
    pub fn display(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (k, (e, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                s.push_str(" + ");
            }
            let _ = write!(s, "({c})");
            for (i, &x) in e.iter().enumerate() {
                if x == 0 {
                    continue;
                }
                let n = names.get(i).cloned().unwrap_or_else(|| format!("X{}", i - names.len() + 1));
                if x == 1 {
                    let _ = write!(s, "*{n}");
                } else {
                    let _ = write!(s, "*{n}^{x}");
                }
            }
        }
        s
    }
}

pub type PolyMat = Vec<Vec<Poly>>;

fn mat_mul(a: &PolyMat, b: &PolyMat) -> PolyMat {
    let n = a.len();
    let ring = a[0][0].ring();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).fold(Poly::zero(ring), |s, l| s.add(&a[i][l].mul(&b[l][j])))).collect())
        .collect()
}

fn mat_identity(ring: RingSpec, n: usize) -> PolyMat {
    (0..n).map(|i| (0..n).map(|j| Poly::int(ring, (i == j) as i64)).collect()).collect()
}

/// Coefficients of `det(λ − A)`, leading first, by Berkowitz's division-free recursion.
pub fn berkowitz(a: &PolyMat) -> Vec<Poly> {
    let n = a.len();
    let ring = a[0][0].ring();
    let mut v = vec![Poly::int(ring, 1), a[0][0].neg()];
    for k in 1..n {
        let mut q = vec![Poly::int(ring, 1), a[k][k].neg()];
        let mut t: Vec<Poly> = (0..k).map(|i| a[i][k].clone()).collect();
        for _ in 2..=k + 1 {
            let rt = (0..k).fold(Poly::zero(ring), |s, j| s.add(&a[k][j].mul(&t[j])));
            q.push(rt.neg());
            t = (0..k).map(|i| (0..k).fold(Poly::zero(ring), |s, j| s.add(&a[i][j].mul(&t[j])))).collect();
        }
        v = (0..k + 2)
            .map(|i| (0..=i.min(k)).fold(Poly::zero(ring), |s, j| s.add(&q[i - j].mul(&v[j]))))
            .collect();
    }
    v
}

/// Determinant of a nonempty square matrix.
pub fn det(a: &PolyMat) -> Poly {
    let v = berkowitz(a);
    let n = a.len();
    if n % 2 == 0 {
        v[n].clone()
    } else {
        v[n].neg()
    }
}

/// A formal element `Σ c_i · w_i` of the free algebra on the generators.
#[derive(Clone, Debug)]
pub struct AlgElem {
    pub terms: Vec<(Poly, Vec<usize>)>,
}

impl AlgElem {
    pub fn scalar(c: Poly) -> Self {
        AlgElem { terms: vec![(c, vec![])] }
    }

    pub fn gen(ring: RingSpec, i: usize) -> Self {
        AlgElem { terms: vec![(Poly::int(ring, 1), vec![i])] }
    }

    pub fn word(ring: RingSpec, w: &[usize]) -> Self {
        AlgElem { terms: vec![(Poly::int(ring, 1), w.to_vec())] }
    }

    pub fn add(&self, o: &AlgElem) -> AlgElem {
        AlgElem { terms: self.terms.iter().chain(&o.terms).cloned().collect() }
    }

    pub fn mul(&self, o: &AlgElem) -> AlgElem {
        let mut terms = Vec::new();
        for (c, w) in &self.terms {
            for (d, v) in &o.terms {
                let mut u = w.clone();
                u.extend(v);
                terms.push((c.mul(d), u));
            }
        }
        AlgElem { terms }
    }

    pub fn scale(&self, c: &Poly) -> AlgElem {
        AlgElem { terms: self.terms.iter().map(|(d, w)| (d.mul(c), w.clone())).collect() }
    }
}

#[derive(Clone, Debug)]
pub struct MatrixDetLaw {
    pub ring: RingSpec,
    pub dim: usize,
    pub symbols: Vec<String>,
    pub generators: Vec<(String, PolyMat)>,
}

impl MatrixDetLaw {
    pub fn new(ring: RingSpec, dim: usize, symbols: Vec<String>, generators: Vec<(String, PolyMat)>) -> Result<Self, DetError> {
        for (name, m) in &generators {
            if m.len() != dim || m.iter().any(|r| r.len() != dim) {
                return Err(DetError::Shape(name.clone()));
            }
        }
        Ok(MatrixDetLaw { ring, dim, symbols, generators })
    }

    /// Generators given entrywise as polynomial strings in `symbols`.
    pub fn parse(ring: RingSpec, symbols: &[&str], generators: &[(&str, Vec<Vec<&str>>)]) -> Result<Self, DetError> {
        let names: Vec<String> = symbols.iter().map(|s| s.to_string()).collect();
        let dim = generators.first().map(|g| g.1.len()).unwrap_or(0);
        let gens = generators
            .iter()
            .map(|(n, m)| {
                let pm = m
                    .iter()
                    .map(|r| r.iter().map(|e| Poly::parse(ring, e, &names)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((n.to_string(), pm))
            })
            .collect::<Result<Vec<_>, DetError>>()?;
        MatrixDetLaw::new(ring, dim, names, gens)
    }

    /// Index of the first variable after the symbols.
    pub fn x0(&self) -> usize {
        self.symbols.len()
    }

    pub fn matrix(&self, r: &AlgElem) -> PolyMat {
        let mut acc: PolyMat = vec![vec![Poly::zero(self.ring); self.dim]; self.dim];
        for (c, w) in &r.terms {
            let mut m = mat_identity(self.ring, self.dim);
            for &g in w {
                m = mat_mul(&m, &self.generators[g].1);
            }
            for (ar, mr) in acc.iter_mut().zip(&m) {
                for (a, x) in ar.iter_mut().zip(mr) {
                    *a = a.add(&x.mul(c));
                }
            }
        }
        acc
    }

    /// `D(r)`, with an optional bound on the total degree of the value.
    pub fn eval(&self, r: &AlgElem, max_deg: Option<u32>) -> Result<Poly, DetError> {
        let v = if self.dim == 0 { Poly::int(self.ring, 1) } else { det(&self.matrix(r)) };
        if let Some(b) = max_deg {
            if v.degree() > b {
                return Err(DetError::DegreeBlowup { got: v.degree(), bound: b });
            }
        }
        Ok(v)
    }

    /// `1 + X_1 r_1 + … + X_n r_n` with `X_i` the variable `x0 + i − 1`.
    pub fn generic(&self, rs: &[AlgElem]) -> AlgElem {
        let mut e = AlgElem::scalar(Poly::int(self.ring, 1));
        for (i, r) in rs.iter().enumerate() {
            e = e.add(&r.scale(&Poly::var(self.ring, self.x0() + i)));
        }
        e
    }

    /// `D(X_1 r_1 + … + X_n r_n)` is homogeneous of degree `d` in the `X`'s.
    pub fn homogeneity(&self, rs: &[AlgElem]) -> Result<bool, DetError> {
        let mut e = AlgElem { terms: vec![] };
        for (i, r) in rs.iter().enumerate() {
            e = e.add(&r.scale(&Poly::var(self.ring, self.x0() + i)));
        }
        if e.terms.is_empty() {
            return Ok(true);
        }
        Ok(self.eval(&e, None)?.is_homogeneous_from(self.x0(), self.dim as u32))
    }
}

/// `a / b` as a series in the variables from `from` on, through total degree `t`; needs `b ≡ 1`.
pub fn series_div(a: &Poly, b: &Poly, from: usize, t: u32) -> Poly {
    let ring = a.ring();
    let u = b.sub(&Poly::int(ring, 1)).truncate_from(from, t);
    let mut inv = Poly::int(ring, 1);
    let mut pw = Poly::int(ring, 1);
    for _ in 0..t {
        pw = pw.mul(&u.neg()).truncate_from(from, t);
        inv = inv.add(&pw);
    }
    a.mul(&inv).truncate_from(from, t)
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessTerm {
    pub x_exponents: Vec<u32>,
    pub x_degree: u32,
    pub coefficient: String,
}

#[derive(Clone, Debug)]
pub struct DetRatio {
    pub d: usize,
    pub truncation: u32,
    /// the quotient on the generic element, split by `X`-monomial
    pub quotient: BTreeMap<Vec<u32>, Poly>,
    /// the `X`-monomials of degree `> d` with nonzero coefficient
    pub witness: Vec<(Vec<u32>, Poly)>,
    /// `D(r)` per sample, on success
    pub values: Vec<Poly>,
    pub multiplicative: bool,
    pub homogeneous: bool,
}

impl DetRatio {
    pub fn ok(&self) -> bool {
        self.witness.is_empty()
    }

    pub fn to_json(&self, names: &[String]) -> serde_json::Value {
        let w: Vec<WitnessTerm> = self
            .witness
            .iter()
            .map(|(e, c)| WitnessTerm { x_exponents: e.clone(), x_degree: e.iter().sum(), coefficient: c.display(names) })
            .collect();
        serde_json::json!({
            "d": self.d,
            "truncation": self.truncation,
            "polynomial": self.ok(),
            "witness": w,
            "values": self.values.iter().map(|v| v.display(names)).collect::<Vec<_>>(),
            "multiplicative": self.multiplicative,
            "homogeneous": self.homogeneous,
        })
    }
}

/// Tests whether `D⁺/D⁻` is a determinant law of degree `d⁺ − d⁻` on the samples.
///
/// The quotient is expanded on `1 + X_1 r_1 + … + X_n r_n` through total
/// `X`-degree `d⁺ + 2`. On success `D(r)` is the coefficient of `X^d` in the
/// quotient on `1 + X r`, checked for multiplicativity on sample pairs and for
/// homogeneity under `r ↦ 2r`.
pub fn det_ratio(plus: &MatrixDetLaw, minus: &MatrixDetLaw, samples: &[AlgElem]) -> Result<DetRatio, DetError> {
    if plus.dim < minus.dim {
        return Err(DetError::Dimensions { plus: plus.dim, minus: minus.dim });
    }
    let d = plus.dim - minus.dim;
    let t = plus.dim as u32 + 2;
    let from = plus.x0().max(minus.x0());
    let shift = |law: &MatrixDetLaw| MatrixDetLaw { symbols: pad(&law.symbols, from), ..law.clone() };
    let (pl, mi) = (shift(plus), shift(minus));
    let fp = pl.eval(&pl.generic(samples), None)?;
    let fm = mi.eval(&mi.generic(samples), None)?;
    let q = series_div(&fp, &fm, from, t);
    let quotient = q.split_from(from);
    let witness: Vec<(Vec<u32>, Poly)> =
        quotient.iter().filter(|(e, c)| e.iter().sum::<u32>() > d as u32 && !c.is_zero()).map(|(e, c)| (e.clone(), c.clone())).collect();
    let mut out = DetRatio { d, truncation: t, quotient, witness, values: vec![], multiplicative: false, homogeneous: false };
    if !out.ok() {
        return Ok(out);
    }
    let value = |r: &AlgElem| -> Result<Poly, DetError> {
        let a = pl.eval(&pl.generic(std::slice::from_ref(r)), None)?;
        let b = mi.eval(&mi.generic(std::slice::from_ref(r)), None)?;
        let q = series_div(&a, &b, from, t).split_from(from);
        let key = trim(vec![d as u32]);
        Ok(q.get(&key).cloned().unwrap_or_else(|| Poly::zero(plus.ring)))
    };
    out.values = samples.iter().map(value).collect::<Result<_, _>>()?;
    let mut mult = true;
    for (i, a) in samples.iter().enumerate() {
        for (j, b) in samples.iter().enumerate() {
            let ab = value(&a.mul(b))?;
            mult &= ab.agrees(&out.values[i].mul(&out.values[j]));
        }
    }
    let two = Poly::int(plus.ring, 2);
    let mut hom = true;
    for (i, a) in samples.iter().enumerate() {
        hom &= value(&a.scale(&two))?.agrees(&out.values[i].mul(&two.pow(d as u32)));
    }
    out.multiplicative = mult;
    out.homogeneous = hom;
    Ok(out)
}

fn pad(s: &[String], n: usize) -> Vec<String> {
    let mut v = s.to_vec();
    while v.len() < n {
        v.push(format!("_{}", v.len()));
    }
    v
}

#[derive(Clone, Debug)]
pub struct KernelReport {
    /// not refuted at the sample size
    pub passed: bool,
    pub samples: usize,
    /// the first `r′` with `D(1 + r′r) ≠ 1`, and that value
    pub witness: Option<(AlgElem, Poly)>,
}

/// A random element with coefficients in `A[X]` (`X` the first variable after the symbols).
pub fn random_elem<R: Rng>(law: &MatrixDetLaw, rng: &mut R, terms: usize, max_len: usize) -> AlgElem {
    let ring = law.ring;
    let x = Poly::var(ring, law.x0());
    let mut e = AlgElem { terms: vec![] };
    for _ in 0..terms {
        let c = Poly::int(ring, rng.gen_range(-5..=5)).add(&x.scale(&Elem::from_int(ring, rng.gen_range(-5..=5))));
        let len = rng.gen_range(0..=max_len);
        let w: Vec<usize> = (0..len).map(|_| rng.gen_range(0..law.generators.len())).collect();
        e = e.add(&AlgElem { terms: vec![(c, w)] });
    }
    e
}

/// Samples `r′` and checks `D(1 + r′r) = 1`.
pub fn kernel_test<R: Rng>(law: &MatrixDetLaw, r: &AlgElem, samples: usize, rng: &mut R) -> Result<KernelReport, DetError> {
    let one = AlgElem::scalar(Poly::int(law.ring, 1));
    for i in 0..samples {
        // the first sample is r′ = 1
        let rp = if i == 0 { one.clone() } else { random_elem(law, rng, 3, 3) };
        let v = law.eval(&one.add(&rp.mul(r)), None)?;
        if !v.agrees(&Poly::int(law.ring, 1)) {
            return Ok(KernelReport { passed: false, samples: i + 1, witness: Some((rp, v)) });
        }
    }
    Ok(KernelReport { passed: true, samples, witness: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> RingSpec {
        RingSpec::qp(5, 10)
    }

    #[test]
    fn berkowitz_small() {
        let r = q();
        let names = vec!["x".to_string(), "y".to_string()];
        let m: PolyMat = vec![
            vec![Poly::parse(r, "x", &names).unwrap(), Poly::int(r, 2)],
            vec![Poly::int(r, 3), Poly::parse(r, "y", &names).unwrap()],
        ];
        assert!(det(&m).agrees(&Poly::parse(r, "x*y-6", &names).unwrap()));
    }

    #[test]
    fn complementary_block() {
        let r = q();
        let plus = MatrixDetLaw::parse(r, &["x", "y"], &[("g", vec![vec!["x", "0"], vec!["0", "y"]])]).unwrap();
        let minus = MatrixDetLaw::parse(r, &["x", "y"], &[("g", vec![vec!["x"]])]).unwrap();
        let rep = det_ratio(&plus, &minus, &[AlgElem::gen(r, 0)]).unwrap();
        assert!(rep.ok() && rep.multiplicative && rep.homogeneous);
        assert!(rep.values[0].agrees(&Poly::var(r, 1)));
    }
}
