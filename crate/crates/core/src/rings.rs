//! Truncated models of complete Tate rings.
//!
//! Every element carries its own absolute precision: an element of valuation
//! `lo` and precision `prec` is known modulo `α^prec`. The four models are
//!
//! | kind           | models              | α | precision cap          |
//! |----------------|---------------------|---|------------------------|
//! | `Zp(p,N)`      | `Z_p`               | p | absolute, `prec ≤ N`   |
//! | `Qp(p,N)`      | `Q_p`               | p | relative, `N` digits   |
//! | `FpLaurent`    | `F_p((T))`          | T | relative, `M` terms    |
//! | `MixedAnnulus` | `(Z/p^N)((T))`      | T | relative, `M` terms    |
//!
//! In the mixed model `p^N = 0` holds exactly, so only the `T`-adic
//! precision is tracked.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Zp,
    Qp,
    FpLaurent,
    MixedAnnulus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingSpec {
    pub kind: Kind,
    pub p: u64,
    #[serde(rename = "N", default)]
    pub n: u32,
    #[serde(rename = "M", default)]
    pub m: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("precision must be ≥ 1")]
    BadPrecision,
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("modulus {0}^{1} does not fit in 62 bits")]
    ModulusTooLarge(u64, u32),
    #[error("operands live in different rings")]
    SpecMismatch,
    #[error("division by an element indistinguishable from 0 at its precision")]
    ZeroDivisor,
    #[error("element is not invertible in this model")]
    NotInvertible,
    #[error("operation not supported in this model: {0}")]
    Unsupported(&'static str),
}

pub type RingResult<T> = Result<T, RingError>;

impl RingSpec {
    pub fn zp(p: u64, n: u32) -> Self {
        RingSpec { kind: Kind::Zp, p, n, m: 0 }
    }

    pub fn qp(p: u64, n: u32) -> Self {
        RingSpec { kind: Kind::Qp, p, n, m: 0 }
    }

    pub fn fp_laurent(p: u64, m: u32) -> Self {
        RingSpec { kind: Kind::FpLaurent, p, n: 1, m }
    }

    pub fn mixed(p: u64, n: u32, m: u32) -> Self {
        RingSpec { kind: Kind::MixedAnnulus, p, n, m }
    }

    pub fn validate(&self) -> RingResult<()> {
        if !is_prime(self.p) {
            return Err(RingError::NotPrime(self.p));
        }
        if self.n < 1 {
            return Err(RingError::BadPrecision);
        }
        if self.is_series() && self.m < 1 {
            return Err(RingError::BadPrecision);
        }
        if checked_pow(self.p, self.n).map_or(true, |q| q >= 1 << 62) {
            return Err(RingError::ModulusTooLarge(self.p, self.n));
        }
        if self.kind == Kind::FpLaurent && self.n != 1 {
            return Err(RingError::Unsupported("FpLaurent has N = 1"));
        }
        Ok(())
    }

    pub fn is_series(&self) -> bool {
        matches!(self.kind, Kind::FpLaurent | Kind::MixedAnnulus)
    }

    /// True when α is a unit of the model (everything except `Zp`).
    pub fn alpha_invertible(&self) -> bool {
        self.kind != Kind::Zp
    }

    /// Field-like models, where every certified nonzero element is a unit.
    pub fn is_field(&self) -> bool {
        matches!(self.kind, Kind::Qp | Kind::FpLaurent)
    }

    /// Modulus of a single series coefficient (`p` or `p^N`).
    fn coeff_modulus(&self) -> u64 {
        self.p.pow(self.n)
    }

    fn name(&self) -> String {
        match self.kind {
            Kind::Zp => format!("Zp({},{})", self.p, self.n),
            Kind::Qp => format!("Qp({},{})", self.p, self.n),
            Kind::FpLaurent => format!("FpLaurent({},{})", self.p, self.m),
            Kind::MixedAnnulus => format!("MixedAnnulus({},{},{})", self.p, self.n, self.m),
        }
    }
}

impl fmt::Display for RingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

fn checked_pow(p: u64, e: u32) -> Option<u64> {
    p.checked_pow(e)
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn invmod(a: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let g = (a as i128).extended_gcd(&(m as i128));
    debug_assert_eq!(g.gcd, 1);
    g.x.rem_euclid(m as i128) as u64
}

/// Valuation in units of `v(α)`, with a flag telling whether it is exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Valuation {
    pub value: i64,
    pub certified: bool,
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.certified {
            write!(f, "{}", self.value)
        } else {
            write!(f, "≥ {}, uncertified", self.value)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Digits {
    /// unit residue modulo `p^(prec - lo)`
    Int(u64),
    /// coefficients of `T^lo, T^(lo+1), …`, leading one nonzero
    Series(Vec<u64>),
}

/// An element of a truncated Tate ring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Elem {
    spec: RingSpec,
    lo: i64,
    prec: i64,
    digits: Digits,
}

/// Handle over a validated [`RingSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ring {
    spec: RingSpec,
}

impl Ring {
    pub fn new(spec: RingSpec) -> RingResult<Ring> {
        spec.validate()?;
        Ok(Ring { spec })
    }

    pub fn spec(&self) -> RingSpec {
        self.spec
    }

    pub fn zero(&self) -> Elem {
        Elem::zero(self.spec)
    }

    pub fn one(&self) -> Elem {
        Elem::from_int(self.spec, 1)
    }

    pub fn alpha(&self) -> Elem {
        Elem::alpha(self.spec)
    }

    pub fn int(&self, n: i64) -> Elem {
        Elem::from_int(self.spec, n)
    }

    /// The default precision cap of the model.
    pub fn cap(&self) -> i64 {
        default_cap(self.spec)
    }

    /// Modulus of the model as a human readable string, e.g. `243` or `T^8`.
    pub fn modulus(&self) -> String {
        let s = self.spec;
        match s.kind {
            Kind::Zp | Kind::Qp => format!("{}", s.p.pow(s.n)),
            _ => format!("T^{}", s.m),
        }
    }

    /// A random element with valuation in `lo_range` (before normalisation).
    pub fn random<R: Rng>(&self, rng: &mut R, lo_range: std::ops::Range<i64>) -> Elem {
        let s = self.spec;
        let lo = if lo_range.is_empty() {
            0
        } else {
            rng.gen_range(lo_range)
        };
        let lo = if s.kind == Kind::Zp { lo.max(0) } else { lo };
        match s.kind {
            Kind::Zp | Kind::Qp => {
                let w = if s.kind == Kind::Zp {
                    (s.n as i64 - lo).max(0)
                } else {
                    s.n as i64
                };
                let q = s.p.pow(w as u32);
                let u = if q > 1 { rng.gen_range(0..q) } else { 0 };
                Elem::normalized(s, lo, lo + w, Digits::Int(u))
            }
            _ => {
                let q = s.coeff_modulus();
                let c: Vec<u64> = (0..s.m).map(|_| rng.gen_range(0..q)).collect();
                Elem::normalized(s, lo, lo + s.m as i64, Digits::Series(c))
            }
        }
    }
}

fn default_cap(s: RingSpec) -> i64 {
    match s.kind {
        Kind::Zp | Kind::Qp => s.n as i64,
        _ => s.m as i64,
    }
}

impl Elem {
    pub fn zero(spec: RingSpec) -> Elem {
        Elem::zero_at(spec, default_cap(spec))
    }

    /// `O(α^prec)`.
    pub fn zero_at(spec: RingSpec, prec: i64) -> Elem {
        let prec = if spec.kind == Kind::Zp { prec.clamp(0, spec.n as i64) } else { prec };
        let digits = if spec.is_series() { Digits::Series(vec![]) } else { Digits::Int(0) };
        Elem { spec, lo: prec, prec, digits }
    }

    pub fn one(spec: RingSpec) -> Elem {
        Elem::from_int(spec, 1)
    }

    pub fn alpha(spec: RingSpec) -> Elem {
        match spec.kind {
            Kind::Zp | Kind::Qp => Elem::from_int(spec, spec.p as i64),
            _ => {
                let mut c = vec![0u64; spec.m as usize];
                c[0] = 1;
                Elem::normalized(spec, 1, 1 + spec.m as i64, Digits::Series(c))
            }
        }
    }

    pub fn from_int(spec: RingSpec, n: i64) -> Elem {
        Elem::from_bigint(spec, &BigInt::from(n))
    }

    pub fn from_bigint(spec: RingSpec, n: &BigInt) -> Elem {
        let p = spec.p;
        match spec.kind {
            Kind::Zp | Kind::Qp => {
                if n.is_zero() {
                    return Elem::zero(spec);
                }
                let pb = BigInt::from(p);
                let mut v = 0i64;
                let mut u = n.clone();
                while (&u % &pb).is_zero() {
                    u /= &pb;
                    v += 1;
                    if spec.kind == Kind::Zp && v >= spec.n as i64 {
                        return Elem::zero(spec);
                    }
                }
                let w = match spec.kind {
                    Kind::Zp => spec.n as i64 - v,
                    _ => spec.n as i64,
                };
                let q = BigInt::from(p.pow(w as u32));
                let r = u.mod_floor(&q).to_u64().unwrap();
                Elem { spec, lo: v, prec: v + w, digits: Digits::Int(r) }
            }
            _ => {
                let q = BigInt::from(spec.coeff_modulus());
                let c0 = n.mod_floor(&q).to_u64().unwrap();
                let mut c = vec![0u64; spec.m as usize];
                c[0] = c0;
                Elem::normalized(spec, 0, spec.m as i64, Digits::Series(c))
            }
        }
    }

    /// Builds a series-model element `Σ coeffs[i] T^(lo+i) + O(T^prec)`.
    pub fn from_series(spec: RingSpec, lo: i64, coeffs: &[i64], prec: i64) -> RingResult<Elem> {
        if !spec.is_series() {
            return Err(RingError::Unsupported("series constructor on a p-adic model"));
        }
        let q = spec.coeff_modulus() as i64;
        let w = (prec - lo).max(0) as usize;
        let mut c = vec![0u64; w];
        for (i, &x) in coeffs.iter().enumerate().take(w) {
            c[i] = x.rem_euclid(q) as u64;
        }
        Ok(Elem::normalized(spec, lo, prec, Digits::Series(c)))
    }

    /// `p^lo · u + O(p^prec)` for the p-adic models.
    pub fn from_parts(spec: RingSpec, lo: i64, u: &BigInt, prec: i64) -> RingResult<Elem> {
        if spec.is_series() {
            return Err(RingError::Unsupported("p-adic constructor on a series model"));
        }
        if spec.kind == Kind::Zp && lo < 0 {
            return Err(RingError::NotInvertible);
        }
        let w = (prec - lo).clamp(0, spec.n as i64 + 2);
        let q = BigInt::from(spec.p).pow(w as u32);
        let r = u.mod_floor(&q);
        // renormalise the residue to width ≤ N before packing into u64
        let mut lo = lo;
        let mut r = r;
        let mut w = w;
        let pb = BigInt::from(spec.p);
        while w > 0 && (&r % &pb).is_zero() {
            r /= &pb;
            lo += 1;
            w -= 1;
        }
        let cap = match spec.kind {
            Kind::Zp => (spec.n as i64 - lo).max(0),
            _ => spec.n as i64,
        };
        let w = w.min(cap);
        let r = r.mod_floor(&BigInt::from(spec.p).pow(w as u32)).to_u64().unwrap();
        Ok(Elem::normalized(spec, lo, lo + w, Digits::Int(r)))
    }

    pub fn spec(&self) -> RingSpec {
        self.spec
    }

    /// Absolute precision: the element is known modulo `α^prec`.
    pub fn prec(&self) -> i64 {
        self.prec
    }

    /// Valuation if nonzero, otherwise the precision.
    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn is_zero(&self) -> bool {
        self.lo >= self.prec
    }

    pub fn valuation(&self) -> Valuation {
        Valuation { value: self.lo, certified: self.lo < self.prec }
    }

    /// The unit part for the p-adic models.
    pub fn unit(&self) -> Option<u64> {
        match self.digits {
            Digits::Int(u) => Some(u),
            _ => None,
        }
    }

    /// Series coefficients starting at `T^lo` (empty for zero).
    pub fn coeffs(&self) -> &[u64] {
        match &self.digits {
            Digits::Series(c) => c,
            _ => &[],
        }
    }

    /// Base-`p` digits of the unit part, or the series coefficients.
    pub fn digit_vec(&self) -> Vec<u64> {
        match &self.digits {
            Digits::Series(c) => c.clone(),
            Digits::Int(u) => {
                let mut u = *u;
                (0..self.prec - self.lo)
                    .map(|_| {
                        let d = u % self.spec.p;
                        u /= self.spec.p;
                        d
                    })
                    .collect()
            }
        }
    }

    /// Integer representative of a `Zp`/`Qp` element with `lo ≥ 0`, in `[0, p^prec)`.
    pub fn to_bigint(&self) -> Option<BigInt> {
        match self.digits {
            Digits::Int(u) if self.lo >= 0 => {
                if self.is_zero() {
                    return Some(BigInt::zero());
                }
                Some(BigInt::from(u) * BigInt::from(self.spec.p).pow(self.lo as u32))
            }
            _ => None,
        }
    }

    fn check(&self, other: &Elem) -> RingResult<()> {
        if self.spec != other.spec {
            return Err(RingError::SpecMismatch);
        }
        Ok(())
    }

    fn normalized(spec: RingSpec, lo: i64, prec: i64, digits: Digits) -> Elem {
        let p = spec.p;
        let (mut lo, mut prec) = (lo, prec);
        let digits = match digits {
            Digits::Int(mut u) => {
                let mut w = prec - lo;
                if w <= 0 {
                    return Elem::zero_at(spec, prec);
                }
                u %= p.pow(w as u32);
                while w > 0 && u % p == 0 {
                    if u == 0 {
                        return Elem::zero_at(spec, prec);
                    }
                    u /= p;
                    lo += 1;
                    w -= 1;
                }
                let cap = match spec.kind {
                    Kind::Zp => spec.n as i64 - lo,
                    _ => spec.n as i64,
                };
                if cap <= 0 {
                    return Elem::zero_at(spec, spec.n as i64);
                }
                if w > cap {
                    w = cap;
                    u %= p.pow(w as u32);
                }
                prec = lo + w;
                Digits::Int(u)
            }
            Digits::Series(c) => {
                let q = spec.coeff_modulus();
                let w = (prec - lo).max(0) as usize;
                let mut c: Vec<u64> = c.into_iter().take(w).map(|x| x % q).collect();
                c.resize(w, 0);
                let lead = c.iter().position(|&x| x != 0);
                match lead {
                    None => return Elem::zero_at(spec, prec),
                    Some(k) => {
                        c.drain(..k);
                        lo += k as i64;
                    }
                }
                if c.len() > spec.m as usize {
                    c.truncate(spec.m as usize);
                    prec = lo + spec.m as i64;
                }
                Digits::Series(c)
            }
        };
        Elem { spec, lo, prec, digits }
    }

    /// Residue of the unit part shifted to base exponent `base`, modulo `p^w`.
    fn int_shifted(&self, base: i64, w: i64) -> u64 {
        let p = self.spec.p;
        let shift = self.lo - base;
        if self.is_zero() || shift >= w {
            return 0;
        }
        let u = match self.digits {
            Digits::Int(u) => u,
            _ => unreachable!(),
        };
        let keep = (w - shift) as u32;
        (u % p.pow(keep)) * p.pow(shift as u32)
    }

    fn series_shifted(&self, base: i64, w: i64) -> Vec<u64> {
        let mut out = vec![0u64; w.max(0) as usize];
        let shift = self.lo - base;
        for (i, &c) in self.coeffs().iter().enumerate() {
            let j = shift + i as i64;
            if j >= 0 && j < w {
                out[j as usize] = c;
            }
        }
        out
    }

    pub fn add(&self, other: &Elem) -> RingResult<Elem> {
        self.check(other)?;
        let spec = self.spec;
        let prec = self.prec.min(other.prec);
        let lo = self.lo.min(other.lo);
        if lo >= prec {
            return Ok(Elem::zero_at(spec, prec));
        }
        let w = prec - lo;
        if spec.is_series() {
            let q = spec.coeff_modulus();
            let a = self.series_shifted(lo, w);
            let b = other.series_shifted(lo, w);
            let c = a.iter().zip(&b).map(|(x, y)| (x + y) % q).collect();
            Ok(Elem::normalized(spec, lo, prec, Digits::Series(c)))
        } else {
            let q = spec.p.pow(w as u32);
            let s = (self.int_shifted(lo, w) as u128 + other.int_shifted(lo, w) as u128) % q as u128;
            Ok(Elem::normalized(spec, lo, prec, Digits::Int(s as u64)))
        }
    }

    pub fn neg(&self) -> Elem {
        if self.is_zero() {
            return self.clone();
        }
        let spec = self.spec;
        match &self.digits {
            Digits::Int(u) => {
                let q = spec.p.pow((self.prec - self.lo) as u32);
                Elem { digits: Digits::Int((q - u) % q), ..self.clone() }
            }
            Digits::Series(c) => {
                let q = spec.coeff_modulus();
                let c = c.iter().map(|x| (q - x) % q).collect();
                Elem { digits: Digits::Series(c), ..self.clone() }
            }
        }
    }

    pub fn sub(&self, other: &Elem) -> RingResult<Elem> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Elem) -> RingResult<Elem> {
        self.check(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Elem) -> Elem {
        let spec = self.spec;
        let lo = self.lo + other.lo;
        let prec = (self.prec + other.lo).min(other.prec + self.lo);
        if lo >= prec {
            return Elem::zero_at(spec, prec);
        }
        let w = (prec - lo) as usize;
        match (&self.digits, &other.digits) {
            (Digits::Int(a), Digits::Int(b)) => {
                let q = spec.p.pow(w as u32);
                Elem::normalized(spec, lo, prec, Digits::Int(mulmod(*a, *b, q)))
            }
            (Digits::Series(a), Digits::Series(b)) => {
                let q = spec.coeff_modulus();
                let mut c = vec![0u64; w];
                for (i, &x) in a.iter().enumerate().take(w) {
                    if x == 0 {
                        continue;
                    }
                    for (j, &y) in b.iter().enumerate().take(w - i) {
                        c[i + j] = (c[i + j] + mulmod(x, y, q)) % q;
                    }
                }
                Elem::normalized(spec, lo, prec, Digits::Series(c))
            }
            _ => unreachable!(),
        }
    }

    fn inv_raw(&self) -> RingResult<Elem> {
        if self.is_zero() {
            return Err(RingError::ZeroDivisor);
        }
        let spec = self.spec;
        let w = self.prec - self.lo;
        let lo = -self.lo;
        match &self.digits {
            Digits::Int(u) => {
                let q = spec.p.pow(w as u32);
                Ok(Elem { spec, lo, prec: lo + w, digits: Digits::Int(invmod(*u, q)) })
            }
            Digits::Series(c) => {
                let q = spec.coeff_modulus();
                if c[0] % spec.p == 0 {
                    return Err(RingError::NotInvertible);
                }
                let b0 = invmod(c[0], q);
                let w = w as usize;
                let mut b = vec![0u64; w];
                b[0] = b0;
                for i in 1..w {
                    let mut s = 0u64;
                    for j in 1..=i {
                        s = (s + mulmod(c[j], b[i - j], q)) % q;
                    }
                    b[i] = (q - mulmod(b0, s, q)) % q;
                }
                Ok(Elem::normalized(spec, lo, lo + w as i64, Digits::Series(b)))
            }
        }
    }

    pub fn inv(&self) -> RingResult<Elem> {
        if self.spec.kind == Kind::Zp && !self.is_zero() && self.lo > 0 {
            return Err(RingError::NotInvertible);
        }
        self.inv_raw()
    }

    pub fn div(&self, other: &Elem) -> RingResult<Elem> {
        self.check(other)?;
        let yi = other.inv_raw()?;
        if self.spec.kind == Kind::Zp {
            if !self.is_zero() && self.lo < other.lo {
                return Err(RingError::NotInvertible);
            }
            // the quotient has nonnegative valuation; compute it Qp-style
            let q = RingSpec::qp(self.spec.p, self.spec.n);
            let a = self.recast(q);
            let b = yi.recast(q);
            let r = a.mul_unchecked(&b);
            return Ok(r.recast(self.spec));
        }
        Ok(self.mul_unchecked(&yi))
    }

    fn recast(&self, spec: RingSpec) -> Elem {
        let e = Elem { spec, ..self.clone() };
        if e.is_zero() {
            return Elem::zero_at(spec, e.prec);
        }
        Elem::normalized(spec, e.lo, e.prec, e.digits)
    }

    /// Multiplies by `α^e`; in `Zp` a negative shift must stay integral.
    pub fn mul_alpha_pow(&self, e: i64) -> RingResult<Elem> {
        if self.spec.kind == Kind::Zp && e < 0 && !self.is_zero() && self.lo + e < 0 {
            return Err(RingError::NotInvertible);
        }
        let shifted = Elem { lo: self.lo + e, prec: self.prec + e, ..self.clone() };
        if shifted.is_zero() {
            return Ok(Elem::zero_at(self.spec, shifted.prec));
        }
        Ok(Elem::normalized(self.spec, shifted.lo, shifted.prec, shifted.digits))
    }

    pub fn pow(&self, e: u64) -> Elem {
        let mut acc = Elem::one(self.spec);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_unchecked(&base);
            }
            base = base.mul_unchecked(&base);
            e >>= 1;
        }
        acc
    }

    /// Lowers the precision to `prec` (never raises it).
    pub fn truncate(&self, prec: i64) -> Elem {
        if prec >= self.prec {
            return self.clone();
        }
        if self.lo >= prec {
            return Elem::zero_at(self.spec, prec);
        }
        Elem::normalized(self.spec, self.lo, prec, self.digits.clone())
    }

    /// True when `self − other` is zero at the joint precision.
    pub fn agrees(&self, other: &Elem) -> bool {
        self.sub(other).map(|d| d.is_zero()).unwrap_or(false)
    }

    pub fn eq_int(&self, n: i64) -> bool {
        self.agrees(&Elem::from_int(self.spec, n))
    }

    /// Substitutes `T ↦ p^c` in a mixed-model element with `lo ≥ 0`.
    ///
    /// The image lands in `Zp(p, N)` with precision `min(N, c·prec)`.
    pub fn specialize_t(&self, c: u32) -> RingResult<Elem> {
        let s = self.spec;
        if s.kind != Kind::MixedAnnulus {
            return Err(RingError::Unsupported("specialisation needs the mixed model"));
        }
        let target = RingSpec::zp(s.p, s.n);
        let prec = (c as i64 * self.prec).min(s.n as i64);
        if self.is_zero() {
            return Ok(Elem::zero_at(target, prec.max(0)));
        }
        if self.lo < 0 {
            return Err(RingError::NotInvertible);
        }
        let mut acc = BigInt::zero();
        let pc = BigInt::from(s.p).pow(c);
        for &x in self.coeffs().iter().rev() {
            acc = acc * &pc + BigInt::from(x);
        }
        acc *= pc.pow(self.lo as u32);
        Ok(Elem::from_bigint(target, &acc).truncate(prec))
    }

    /// Reduction of a mixed-model element modulo `p`, landing in `FpLaurent(p, M)`.
    pub fn reduce_mod_p(&self) -> RingResult<Elem> {
        let s = self.spec;
        if s.kind != Kind::MixedAnnulus {
            return Err(RingError::Unsupported("reduction needs the mixed model"));
        }
        let target = RingSpec::fp_laurent(s.p, s.m);
        let c: Vec<i64> = self.coeffs().iter().map(|&x| (x % s.p) as i64).collect();
        if self.is_zero() {
            return Ok(Elem::zero_at(target, self.prec));
        }
        Elem::from_series(target, self.lo, &c, self.prec)
    }

    /// Serialisable snapshot: valuation, precision and digit array.
    pub fn repr(&self) -> ElemRepr {
        ElemRepr { val: self.lo, prec: self.prec, certified: !self.is_zero(), digits: self.digit_vec() }
    }

    pub fn from_repr(spec: RingSpec, r: &ElemRepr) -> RingResult<Elem> {
        if r.val >= r.prec {
            return Ok(Elem::zero_at(spec, r.prec));
        }
        if spec.is_series() {
            let c: Vec<i64> = r.digits.iter().map(|&d| d as i64).collect();
            Elem::from_series(spec, r.val, &c, r.prec)
        } else {
            let mut u = BigInt::zero();
            for &d in r.digits.iter().rev() {
                u = u * BigInt::from(spec.p) + BigInt::from(d);
            }
            Elem::from_parts(spec, r.val, &u, r.prec)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElemRepr {
    pub val: i64,
    pub prec: i64,
    pub certified: bool,
    pub digits: Vec<u64>,
}

impl Serialize for Elem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.repr().serialize(s)
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let var = match self.spec.kind {
            Kind::Zp | Kind::Qp => self.spec.p.to_string(),
            _ => "T".to_string(),
        };
        if self.is_zero() {
            return write!(f, "O({}^{})", var, self.prec);
        }
        match &self.digits {
            Digits::Int(u) => write!(f, "{}*{}^{} + O({}^{})", u, var, self.lo, var, self.prec),
            Digits::Series(c) => {
                let terms: Vec<String> = c
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0)
                    .map(|(i, x)| format!("{}*T^{}", x, self.lo + i as i64))
                    .collect();
                write!(f, "{} + O(T^{})", terms.join(" + "), self.prec)
            }
        }
    }
}

/// Signed integer to ring, through a `BigInt` when it is large.
pub fn elem_from_i128(spec: RingSpec, n: i128) -> Elem {
    Elem::from_bigint(spec, &BigInt::from(n))
}

/// `v_p` of a nonzero integer; `None` for zero.
pub fn vp_bigint(n: &BigInt, p: u64) -> Option<u64> {
    if n.is_zero() {
        return None;
    }
    let pb = BigInt::from(p);
    let mut v = 0;
    let mut m = n.abs();
    while (&m % &pb).is_zero() {
        m /= &pb;
        v += 1;
    }
    Some(v)
}
