//! Functions `Z_p^k → A` as truncated Mahler series `Σ a_n·binom(z, n)`.
//!
//! Coefficients are stored for every multi-index with `Σn ≤ D`. The
//! optional tail bound says what is known about the coefficients that were
//! dropped; it is only ever produced when it can be derived, never guessed.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::bound::{ceil_mul, Affine};
use crate::multi::{box_points, MultiIndices};
use crate::rings::{Elem, ElemRepr, Kind, RingError, RingSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MahlerError {
    #[error("grid has {got} values, expected {want}")]
    IncompleteGrid { got: usize, want: usize },
    #[error("dimension or ring mismatch")]
    Mismatch,
    #[error("λ(1)−1 has valuation {0} < 1; split into cosets before expanding")]
    NotNilpotent(i64),
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// What is known about the coefficients beyond the cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tail {
    Unknown,
    /// every dropped coefficient is exactly zero
    Zero,
    /// `v(a_n) ≥ ⌈slope·Σn⌉ + offset` for every dropped `n`
    Affine(Affine),
    /// dropped coefficients vanish past total degree `degree` and have valuation `≥ floor` below it
    Finite { degree: u32, floor: i64 },
}

impl Tail {
    /// Offset `o` with `v(a_n) ≥ ⌈slope·Σn⌉ + o` on the dropped part, if one is known.
    pub fn offset_at(&self, slope: Ratio<i64>) -> Option<i64> {
        match *self {
            Tail::Zero => Some(i64::MAX / 4),
            Tail::Affine(a) if a.slope >= slope => Some(a.offset),
            Tail::Finite { degree, floor } if slope >= Ratio::from_integer(0) => Some(floor - ceil_mul(slope, degree as i64)),
            _ => None,
        }
    }
}

impl Serialize for Tail {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Tail::Unknown => s.serialize_none(),
            Tail::Zero => s.serialize_str("zero"),
            Tail::Affine(a) => a.serialize(s),
            Tail::Finite { degree, floor } => {
                use serde::ser::SerializeMap;
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("degree", degree)?;
                m.serialize_entry("floor", floor)?;
                m.end()
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct MahlerFn {
    ring: RingSpec,
    idx: MultiIndices,
    coeffs: Vec<Elem>,
    tail: Tail,
}

/// Value of a truncated expansion, with whether the dropped tail is accounted for.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: Elem,
    pub certified: bool,
}

/// `‖g‖_r = p^log_p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NormValue {
    pub log_p: i64,
    pub certified: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    #[serde(serialize_with = "ser_ratio")]
    pub r: Ratio<i64>,
    /// `(Σn, min v(a_n) − ⌈r·Σn⌉)` for each stored total degree
    pub witness: Vec<(u32, i64)>,
    pub certified: bool,
}

fn ser_ratio<S: Serializer>(r: &Ratio<i64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&crate::bound::ratio_string(*r))
}

/// Exact `binom(z, n)` for any integer `z`.
pub fn binom(z: &BigInt, n: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..n {
        acc *= z - BigInt::from(i);
        acc /= BigInt::from(i + 1);
    }
    acc
}

/// `v_p(n!)` by Legendre's formula.
pub fn vp_factorial(n: u64, p: u64) -> u64 {
    let mut v = 0;
    let mut q = p;
    loop {
        v += n / q;
        match q.checked_mul(p) {
            Some(nq) if nq <= n => q = nq,
            _ => break,
        }
    }
    v
}

/// Valuation of the Amice normalisation `Π ⌊n_i/p^h⌋!`.
pub fn amice_scale(n: &[u64], h: u32, p: u64) -> u64 {
    let ph = p.pow(h);
    n.iter().map(|&ni| vp_factorial(ni / ph, p)).sum()
}

/// Forward differences at the origin of a box of values, in place.
fn difference_box(vals: &mut [Elem], k: usize, side: usize) -> Result<(), RingError> {
    let stride: Vec<usize> = (0..k).map(|c| side.pow((k - 1 - c) as u32)).collect();
    for c in 0..k {
        let s = stride[c];
        for base in 0..vals.len() {
            if (base / s) % side != 0 {
                continue;
            }
            for step in 1..side {
                for i in (step..side).rev() {
                    let d = vals[base + i * s].sub(&vals[base + (i - 1) * s])?;
                    vals[base + i * s] = d;
                }
            }
        }
    }
    Ok(())
}

impl MahlerFn {
    pub fn from_coeffs(ring: RingSpec, k: usize, d: u32, coeffs: Vec<Elem>, tail: Tail) -> Result<Self, MahlerError> {
        let idx = MultiIndices::new(k, d);
        if coeffs.len() != idx.len() || coeffs.iter().any(|c| c.spec() != ring) {
            return Err(MahlerError::Mismatch);
        }
        Ok(MahlerFn { ring, idx, coeffs, tail })
    }

    /// A one-variable polynomial `Σ c_i binom(z, i)` with integer coefficients.
    pub fn from_ints(ring: RingSpec, coeffs: &[i64]) -> Self {
        let d = coeffs.len().saturating_sub(1) as u32;
        let c = coeffs.iter().map(|&x| Elem::from_int(ring, x)).collect();
        MahlerFn::from_coeffs(ring, 1, d, c, Tail::Zero).unwrap()
    }

    /// `binom(z, n)` as a truncated expansion with cutoff `d ≥ Σn`.
    pub fn basis(ring: RingSpec, n: &[u32], d: u32) -> Self {
        let idx = MultiIndices::new(n.len(), d);
        let mut c = vec![Elem::zero(ring); idx.len()];
        if let Some(i) = idx.position(n) {
            c[i] = Elem::one(ring);
        }
        MahlerFn { ring, idx, coeffs: c, tail: Tail::Zero }
    }

    pub fn ring(&self) -> RingSpec {
        self.ring
    }

    pub fn dim(&self) -> usize {
        self.idx.k()
    }

    pub fn cutoff(&self) -> u32 {
        self.idx.cutoff()
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn with_tail(mut self, tail: Tail) -> Self {
        self.tail = tail;
        self
    }

    pub fn indices(&self) -> &MultiIndices {
        &self.idx
    }

    pub fn coeffs(&self) -> &[Elem] {
        &self.coeffs
    }

    pub fn coeff(&self, n: &[u32]) -> Option<&Elem> {
        self.idx.position(n).map(|i| &self.coeffs[i])
    }

    /// Coefficients from values on the grid `{0..=D}^k` (last coordinate fastest).
    pub fn fit_values(ring: RingSpec, k: usize, d: u32, values: &[Elem]) -> Result<Self, MahlerError> {
        let side = d as usize + 1;
        let want = side.pow(k as u32);
        if values.len() != want {
            return Err(MahlerError::IncompleteGrid { got: values.len(), want });
        }
        if values.iter().any(|v| v.spec() != ring) {
            return Err(MahlerError::Mismatch);
        }
        let mut vals = values.to_vec();
        difference_box(&mut vals, k, side)?;
        let idx = MultiIndices::new(k, d);
        let coeffs = idx
            .iter()
            .map(|n| {
                let pos = n.iter().fold(0usize, |acc, &c| acc * side + c as usize);
                vals[pos].clone()
            })
            .collect();
        Ok(MahlerFn { ring, idx, coeffs, tail: Tail::Unknown })
    }

    /// Fits a function given pointwise on the grid.
    pub fn fit_fn<F>(ring: RingSpec, k: usize, d: u32, f: F) -> Result<Self, MahlerError>
    where
        F: Fn(&[u32]) -> Elem,
    {
        let vals: Vec<Elem> = box_points(k, d + 1).iter().map(|z| f(z)).collect();
        MahlerFn::fit_values(ring, k, d, &vals)
    }

    /// `Σ a_n binom(z, n)` at an integer point.
    pub fn eval(&self, z: &[i64]) -> Evaluation {
        let zb: Vec<BigInt> = z.iter().map(|&x| BigInt::from(x)).collect();
        self.eval_big(&zb)
    }

    pub fn eval_big(&self, z: &[BigInt]) -> Evaluation {
        assert_eq!(z.len(), self.dim());
        let d = self.cutoff();
        let tables: Vec<Vec<BigInt>> = z.iter().map(|zi| binom_row(zi, d)).collect();
        let mut acc = Elem::zero_at(self.ring, i64::MAX / 4);
        let mut first = true;
        for (i, n) in self.idx.iter().enumerate() {
            let mut b = BigInt::one();
            for (c, &nc) in n.iter().enumerate() {
                b *= &tables[c][nc as usize];
            }
            if b.is_zero() {
                continue;
            }
            let term = self.coeffs[i].mul(&Elem::from_bigint(self.ring, &b)).unwrap();
            acc = if first { term } else { acc.add(&term).unwrap() };
            first = false;
        }
        if first {
            acc = Elem::zero(self.ring);
            // all stored terms vanish at z; precision is the min stored precision
            let p = self.coeffs.iter().map(|c| c.prec()).min().unwrap_or(acc.prec());
            acc = acc.truncate(p);
        }
        // nonnegative z with Σz ≤ D never touches the tail
        let inside = z.iter().all(|x| !x.is_negative()) && z.iter().fold(BigInt::zero(), |s, x| s + x) <= BigInt::from(d);
        let (value, certified) = match self.tail {
            _ if inside => (acc, true),
            Tail::Zero => (acc, true),
            Tail::Affine(a) if a.slope >= Ratio::from_integer(0) => (acc.truncate(a.at(d as i64 + 1)), true),
            Tail::Finite { floor, .. } => (acc.truncate(floor), true),
            _ => (acc, false),
        };
        Evaluation { value, certified }
    }

    /// Evaluation at a p-adic point known only modulo `p^e`.
    ///
    /// A change of `z` by a multiple of `p^e` moves `binom(z, n)` by a
    /// multiple of `p^(e − v_p(n!))`; the result's precision accounts for it.
    pub fn eval_approx(&self, z: &[BigInt], e: u32) -> Evaluation {
        let p = self.ring.p;
        let mut ev = self.eval_big(z);
        for (i, n) in self.idx.iter().enumerate() {
            let loss: u64 = n.iter().map(|&x| vp_factorial(x as u64, p)).sum();
            let room = e as i64 - loss as i64;
            let err = match self.ring.kind {
                Kind::Zp | Kind::Qp => room.max(0),
                _ if room >= self.ring.n as i64 => i64::MAX / 4,
                _ => 0,
            };
            let bound = self.coeffs[i].lo().saturating_add(err);
            ev.value = ev.value.truncate(bound);
        }
        ev
    }

    /// `‖g‖_r = sup |a_n|·|α^{-1}|^{⌈rΣn⌉}` as a power of `p`.
    pub fn norm_r(&self, r: Ratio<i64>) -> NormValue {
        let mut best: Option<(i64, bool)> = None;
        for (i, c) in self.coeffs.iter().enumerate() {
            let m = c.lo() - ceil_mul(r, self.idx.degree(i) as i64);
            let cert = c.valuation().certified;
            best = match best {
                None => Some((m, cert)),
                Some((b, bc)) if m < b || (m == b && cert && !bc) => Some((m, cert)),
                other => other,
            };
        }
        let (m, cert) = best.unwrap_or((i64::MAX / 4, false));
        let tail_ok = self.tail.offset_at(r).is_some_and(|o| o >= m);
        NormValue { log_p: -m, certified: cert && tail_ok }
    }

    pub fn decay_report(&self, r: Ratio<i64>) -> DecayReport {
        let d = self.cutoff();
        let mut witness = Vec::new();
        for deg in 0..=d {
            let m = self
                .idx
                .iter()
                .enumerate()
                .filter(|(i, _)| self.idx.degree(*i) == deg)
                .map(|(i, _)| self.coeffs[i].lo() - ceil_mul(r, deg as i64))
                .min();
            if let Some(m) = m {
                witness.push((deg, m));
            }
        }
        let certified = self.tail.offset_at(r).is_some();
        DecayReport { r, witness, certified }
    }

    /// Best offset `o` with `v(a_n) ≥ ⌈slope·Σn⌉ + o` for all `n`, tail included.
    pub fn global_offset(&self, slope: Ratio<i64>) -> Option<i64> {
        let stored = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.lo() - ceil_mul(slope, self.idx.degree(i) as i64))
            .min()
            .unwrap_or(0);
        self.tail.offset_at(slope).map(|o| stored.min(o))
    }

    /// Largest total degree that can carry a nonzero coefficient, if finite.
    fn support_degree(&self) -> Option<u32> {
        match self.tail {
            Tail::Zero => Some(self.cutoff()),
            Tail::Finite { degree, .. } => Some(degree.max(self.cutoff())),
            _ => None,
        }
    }

    /// Product, exact through degree `min(D_f, D_g)`.
    pub fn mul(&self, other: &MahlerFn) -> Result<MahlerFn, MahlerError> {
        if self.ring != other.ring || self.dim() != other.dim() {
            return Err(MahlerError::Mismatch);
        }
        let k = self.dim();
        let big = self.cutoff() + other.cutoff();
        let keep = self.cutoff().min(other.cutoff());
        let tf = self.value_table(big);
        let tg = other.value_table(big);
        let vals: Vec<Elem> = tf.iter().zip(&tg).map(|(a, b)| a.mul(b)).collect::<Result<_, _>>()?;
        let full = MahlerFn::fit_values(self.ring, k, big, &vals)?;
        let idx = MultiIndices::new(k, keep);
        let coeffs: Vec<Elem> = idx.iter().map(|n| full.coeff(n).unwrap().clone()).collect();
        let tail = match (self.tail, other.tail) {
            (Tail::Unknown, _) | (_, Tail::Unknown) => Tail::Unknown,
            (Tail::Zero, Tail::Zero) => {
                let dropped = full
                    .idx
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| full.idx.degree(*i) > keep)
                    .map(|(i, _)| full.coeffs[i].lo())
                    .min();
                match dropped {
                    None => Tail::Zero,
                    Some(floor) => Tail::Finite { degree: big, floor },
                }
            }
            (ta, tb) => match (self.support_degree(), other.support_degree()) {
                // finitely supported factors: the tail terms only reach degrees above `keep`
                (Some(a), Some(b)) => {
                    let zero = Ratio::from_integer(0);
                    let floor = self.global_offset(zero).unwrap() + other.global_offset(zero).unwrap();
                    Tail::Finite { degree: a + b, floor }
                }
                _ => {
                    let s = match (ta, tb) {
                        (Tail::Affine(a), Tail::Affine(b)) => a.slope.min(b.slope),
                        (Tail::Affine(a), _) | (_, Tail::Affine(a)) => a.slope,
                        _ => unreachable!(),
                    };
                    match (self.global_offset(s), other.global_offset(s)) {
                        (Some(a), Some(b)) => Tail::Affine(Affine::new(s, a + b)),
                        _ => Tail::Unknown,
                    }
                }
            },
        };
        Ok(MahlerFn { ring: self.ring, idx, coeffs, tail })
    }

    /// Values of the truncated expansion on the box `{0..=side_max}^k`.
    fn value_table(&self, side_max: u32) -> Vec<Elem> {
        let k = self.dim();
        let d = self.cutoff();
        let pts = box_points(k, side_max + 1);
        let binoms: Vec<Vec<BigInt>> = (0..=side_max).map(|z| binom_row(&BigInt::from(z), d)).collect();
        pts.iter()
            .map(|z| {
                let mut acc = Elem::zero(self.ring);
                let mut first = true;
                for (i, n) in self.idx.iter().enumerate() {
                    let mut b = BigInt::one();
                    for (c, &nc) in n.iter().enumerate() {
                        b *= &binoms[z[c] as usize][nc as usize];
                    }
                    if b.is_zero() {
                        continue;
                    }
                    let t = self.coeffs[i].mul(&Elem::from_bigint(self.ring, &b)).unwrap();
                    acc = if first { t } else { acc.add(&t).unwrap() };
                    first = false;
                }
                if first {
                    let p = self.coeffs.iter().map(|c| c.prec()).min().unwrap_or(acc.prec());
                    acc = acc.truncate(p);
                }
                acc
            })
            .collect()
    }

    /// Restriction to a smaller cutoff; the tail bound follows.
    pub fn truncate(&self, d: u32) -> MahlerFn {
        if d >= self.cutoff() {
            return self.clone();
        }
        let idx = MultiIndices::new(self.dim(), d);
        let coeffs: Vec<Elem> = idx.iter().map(|n| self.coeff(n).unwrap().clone()).collect();
        let dropped_min = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| self.idx.degree(*i) > d)
            .map(|(_, c)| c.lo())
            .min();
        let tail = match (self.tail, dropped_min) {
            (Tail::Unknown, _) => Tail::Unknown,
            (Tail::Affine(a), _) => {
                // the stored part may sit below the old tail line; lower the offset
                let o = self.global_offset(a.slope).unwrap_or(a.offset);
                Tail::Affine(Affine::new(a.slope, o))
            }
            (Tail::Finite { degree, floor }, m) => Tail::Finite { degree, floor: m.map_or(floor, |m| m.min(floor)) },
            (Tail::Zero, None) => Tail::Zero,
            (Tail::Zero, Some(m)) => Tail::Finite { degree: self.cutoff(), floor: m },
        };
        MahlerFn { ring: self.ring, idx, coeffs, tail }
    }

    /// `Ser`: coefficients `f(n)·α^{⌈rΣn⌉}` from a sequence `f`.
    pub fn ser(ring: RingSpec, k: usize, d: u32, r: Ratio<i64>, f: &[Elem]) -> Result<MahlerFn, MahlerError> {
        let idx = MultiIndices::new(k, d);
        if f.len() != idx.len() {
            return Err(MahlerError::Mismatch);
        }
        let coeffs = f
            .iter()
            .enumerate()
            .map(|(i, x)| x.mul_alpha_pow(ceil_mul(r, idx.degree(i) as i64)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MahlerFn { ring, idx, coeffs, tail: Tail::Zero })
    }

    /// `Coeff`: the inverse of [`MahlerFn::ser`].
    pub fn coeff_seq(&self, r: Ratio<i64>) -> Result<Vec<Elem>, MahlerError> {
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, x)| x.mul_alpha_pow(-ceil_mul(r, self.idx.degree(i) as i64)))
            .collect::<Result<Vec<_>, _>>()?)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coeffs: Vec<(Vec<u32>, ElemRepr)> =
            self.idx.iter().zip(&self.coeffs).map(|(n, c)| (n.to_vec(), c.repr())).collect();
        serde_json::json!({
            "ring": self.ring,
            "k": self.dim(),
            "D": self.cutoff(),
            "coeffs": coeffs,
            "tail_bound": self.tail,
        })
    }
}

/// `binom(z, 0..=d)` by the multiplicative recurrence.
fn binom_row(z: &BigInt, d: u32) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(d as usize + 1);
    let mut b = BigInt::one();
    row.push(b.clone());
    for n in 0..d {
        b = b * (z - BigInt::from(n)) / BigInt::from(n + 1);
        row.push(b.clone());
    }
    row
}

/// Mahler expansion of `z ↦ Π u_i^{z_i}`, coefficients `Π (u_i − 1)^{n_i}`.
pub fn character(us: &[Elem], d: u32) -> Result<MahlerFn, MahlerError> {
    let ring = us.first().ok_or(MahlerError::Mismatch)?.spec();
    let mut ws = Vec::new();
    for u in us {
        if u.spec() != ring {
            return Err(MahlerError::Mismatch);
        }
        let w = u.sub(&Elem::one(ring))?;
        if w.lo() < 1 {
            return Err(MahlerError::NotNilpotent(w.lo()));
        }
        ws.push(w);
    }
    let idx = MultiIndices::new(us.len(), d);
    let pows: Vec<Vec<Elem>> = ws.iter().map(|w| (0..=d as u64).map(|e| w.pow(e)).collect()).collect();
    let coeffs = idx
        .iter()
        .map(|n| {
            n.iter()
                .enumerate()
                .fold(Elem::one(ring), |acc, (c, &nc)| acc.mul(&pows[c][nc as usize]).unwrap())
        })
        .collect();
    let slope = ws.iter().map(|w| w.lo()).min().unwrap_or(1);
    let tail = Tail::Affine(Affine::new(Ratio::from_integer(slope), 0));
    Ok(MahlerFn { ring, idx, coeffs, tail })
}
