//! Root data, Weyl groups, the classicality bound `N(μ, t)`, and weight characters.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mahler::{self, Evaluation, MahlerError, MahlerFn};
use crate::rings::{Elem, RingError, RingSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeightError {
    #[error("unsupported root datum {0}")]
    Unsupported(String),
    #[error("weight {0:?} is not dominant")]
    NotDominant(Vec<i64>),
    #[error("weight has {got} coordinates, the datum has rank {want}")]
    Rank { got: usize, want: usize },
    #[error("{0} is not a p-adic unit")]
    NotUnit(i64),
    #[error(transparent)]
    Mahler(#[from] MahlerError),
    #[error(transparent)]
    Ring(#[from] RingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatumType {
    A1,
    A2,
    C2,
    GL2,
}

impl std::str::FromStr for DatumType {
    type Err = WeightError;
    fn from_str(s: &str) -> Result<Self, WeightError> {
        match s.to_ascii_uppercase().as_str() {
            "A1" => Ok(DatumType::A1),
            "A2" => Ok(DatumType::A2),
            "C2" => Ok(DatumType::C2),
            "GL2" => Ok(DatumType::GL2),
            _ => Err(WeightError::Unsupported(s.into())),
        }
    }
}

/// Roots and coroots as integer vectors in the character (resp. cocharacter) lattice.
#[derive(Clone, Debug, Serialize)]
pub struct RootDatum {
    pub label: DatumType,
    pub dim: usize,
    pub roots: Vec<Vec<i64>>,
    pub coroots: Vec<Vec<i64>>,
    pub positive: Vec<usize>,
    pub simple: Vec<usize>,
    /// `2ρ`
    pub two_rho: Vec<i64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeylElement {
    /// matrix acting on column vectors of the character lattice
    pub matrix: Vec<Vec<i64>>,
    pub length: usize,
}

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl RootDatum {
    pub fn new(label: DatumType) -> Self {
        // (root, coroot, positive, simple)
        let data: Vec<(Vec<i64>, Vec<i64>, bool, bool)> = match label {
            DatumType::A1 => vec![(vec![1], vec![2], true, true), (vec![-1], vec![-2], false, false)],
            DatumType::GL2 => vec![(vec![1, -1], vec![1, -1], true, true), (vec![-1, 1], vec![-1, 1], false, false)],
            DatumType::A2 => {
                let mut v = Vec::new();
                for i in 0..3 {
                    for j in 0..3 {
                        if i != j {
                            let mut r = vec![0; 3];
                            r[i] = 1;
                            r[j] = -1;
                            v.push((r.clone(), r, i < j, j == i + 1));
                        }
                    }
                }
                v
            }
            DatumType::C2 => vec![
                (vec![2, 0], vec![1, 0], true, false),
                (vec![0, 2], vec![0, 1], true, true),
                (vec![-2, 0], vec![-1, 0], false, false),
                (vec![0, -2], vec![0, -1], false, false),
                (vec![1, 1], vec![1, 1], true, false),
                (vec![1, -1], vec![1, -1], true, true),
                (vec![-1, -1], vec![-1, -1], false, false),
                (vec![-1, 1], vec![-1, 1], false, false),
            ],
        };
        let dim = data[0].0.len();
        let mut two_rho = vec![0; dim];
        for (r, _, pos, _) in &data {
            if *pos {
                for (a, b) in two_rho.iter_mut().zip(r) {
                    *a += b;
                }
            }
        }
        RootDatum {
            label,
            dim,
            positive: (0..data.len()).filter(|&i| data[i].2).collect(),
            simple: (0..data.len()).filter(|&i| data[i].3).collect(),
            roots: data.iter().map(|d| d.0.clone()).collect(),
            coroots: data.iter().map(|d| d.1.clone()).collect(),
            two_rho,
        }
    }

    pub fn rank(&self) -> usize {
        self.simple.len()
    }

    /// `s_α(x) = x − ⟨α^∨, x⟩ α`.
    pub fn reflect(&self, i: usize, x: &[i64]) -> Vec<i64> {
        let c = dot(&self.coroots[i], x);
        x.iter().zip(&self.roots[i]).map(|(a, r)| a - c * r).collect()
    }

    fn reflection_matrix(&self, i: usize) -> Vec<Vec<i64>> {
        let cols: Vec<Vec<i64>> = (0..self.dim)
            .map(|j| {
                let mut e = vec![0; self.dim];
                e[j] = 1;
                self.reflect(i, &e)
            })
            .collect();
        (0..self.dim).map(|r| (0..self.dim).map(|c| cols[c][r]).collect()).collect()
    }

    /// Enumerates the Weyl group by breadth-first search over simple reflections.
    pub fn weyl_group(&self) -> Vec<WeylElement> {
        let id: Vec<Vec<i64>> = (0..self.dim).map(|i| (0..self.dim).map(|j| (i == j) as i64).collect()).collect();
        let gens: Vec<Vec<Vec<i64>>> = self.simple.iter().map(|&i| self.reflection_matrix(i)).collect();
        let mut seen: HashMap<Vec<Vec<i64>>, usize> = HashMap::from([(id.clone(), 0)]);
        let mut order = vec![id.clone()];
        let mut queue = VecDeque::from([id]);
        while let Some(w) = queue.pop_front() {
            let l = seen[&w];
            for g in &gens {
                let n = matmul(g, &w);
                if !seen.contains_key(&n) {
                    seen.insert(n.clone(), l + 1);
                    order.push(n.clone());
                    queue.push_back(n);
                }
            }
        }
        order.into_iter().map(|m| WeylElement { length: seen[&m], matrix: m }).collect()
    }

    fn check_rank(&self, mu: &[i64]) -> Result<(), WeightError> {
        if mu.len() != self.dim {
            return Err(WeightError::Rank { got: mu.len(), want: self.dim });
        }
        Ok(())
    }

    pub fn is_dominant(&self, mu: &[i64]) -> bool {
        self.positive.iter().all(|&i| dot(&self.coroots[i], mu) >= 0)
    }

    pub fn is_regular_dominant(&self, mu: &[i64]) -> bool {
        self.positive.iter().all(|&i| dot(&self.coroots[i], mu) > 0)
    }

    /// The exponent `e` with `N(μ, t) = p^(−e)`; `tau` lists the valuations `v_p(χ(t))` of the basis characters.
    pub fn n_bound(&self, mu: &[i64], tau: &[i64]) -> Result<i64, WeightError> {
        self.check_rank(mu)?;
        self.check_rank(tau)?;
        if !self.is_dominant(mu) {
            return Err(WeightError::NotDominant(mu.to_vec()));
        }
        let shifted: Vec<i64> = mu.iter().zip(&self.two_rho).map(|(m, r)| 2 * m + r).collect();
        let best = self
            .weyl_group()
            .iter()
            .filter(|w| w.length > 0)
            .map(|w| {
                let wx = apply(&w.matrix, &shifted);
                let diff: Vec<i64> = wx.iter().zip(&shifted).map(|(a, b)| a - b).collect();
                // (w−1)ρ lies in the root lattice, so the pairing is even
                dot(&diff, tau) / 2
            })
            .max()
            .unwrap_or(0);
        Ok(best)
    }
}

fn matmul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
}

fn apply(m: &[Vec<i64>], x: &[i64]) -> Vec<i64> {
    m.iter().map(|r| dot(r, x)).collect()
}

/// Standard `t` data: `diag(1, p)` for GL2, the valuation `−1` on the root for A1,
/// `diag(1, p, p²)` for A2, `diag(1, p)` on the torus of C2.
pub fn standard_tau(label: DatumType) -> Vec<i64> {
    match label {
        DatumType::A1 => vec![-1],
        DatumType::GL2 => vec![0, 1],
        DatumType::A2 => vec![0, 1, 2],
        DatumType::C2 => vec![0, 1],
    }
}

/// One factor of a character of `Z_p^× × … `.
#[derive(Clone, Debug)]
pub enum Factor {
    /// `z ↦ z^k`
    Algebraic(u32),
    /// value at the topological generator of `1 + pZ_p` (`1 + 4Z_2` for `p = 2`)
    Generator(Elem),
    /// `z ↦ ω(z)^j`
    Teichmuller(u32),
}

#[derive(Clone, Debug)]
pub struct WeightChar {
    ring: RingSpec,
    factors: Vec<Factor>,
}

/// The topological generator `γ` used for principal units.
pub fn generator(p: u64) -> i64 {
    if p == 2 {
        5
    } else {
        1 + p as i64
    }
}

/// Teichmüller representative of `a` modulo `p^prec`.
pub fn teichmuller(a: i64, p: u64, prec: u32) -> BigInt {
    let m = BigInt::from(p).pow(prec);
    if p == 2 {
        return if a.rem_euclid(4) == 1 { BigInt::one() } else { &m - 1 };
    }
    let mut x = BigInt::from(a).mod_floor(&m);
    for _ in 0..=prec {
        x = x.modpow(&BigInt::from(p), &m);
    }
    x
}

/// `log_p(x)` for `x ≡ 1 mod p` (mod 4 when `p = 2`), as `(L, s)` with `log x ≡ L·p^(−s) mod p^prec`.
fn padic_log(x: &BigInt, p: u64, prec: u32) -> (BigInt, u32) {
    let pb = BigInt::from(p);
    let y = x - 1u32;
    let vy = crate::rings::vp_bigint(&y, p).unwrap_or(prec as u64) as u32;
    // terms y^n/n with n·v(y) − v(n) ≥ prec are dropped
    let mut nmax = 1u32;
    while (nmax + 1) * vy < prec + log_p(nmax + 1, p) {
        nmax += 1;
    }
    let s = log_p(nmax, p);
    let m = pb.pow(prec + s);
    let mut acc = BigInt::zero();
    let mut ypow = BigInt::one();
    for n in 1..=nmax {
        ypow = (&ypow * &y).mod_floor(&m);
        let vn = crate::rings::vp_bigint(&BigInt::from(n), p).unwrap() as u32;
        let unit = BigInt::from(n) / pb.pow(vn);
        let inv = unit.modpow(&(phi(&pb, prec + s) - 1u32), &m);
        let t = (&ypow * inv * pb.pow(s - vn)).mod_floor(&m);
        if n % 2 == 1 {
            acc += t;
        } else {
            acc -= t;
        }
    }
    (acc.mod_floor(&m), s)
}

fn log_p(n: u32, p: u64) -> u32 {
    let mut k = 0;
    let mut q = 1u64;
    while q * p <= n as u64 {
        q *= p;
        k += 1;
    }
    k
}

fn phi(p: &BigInt, e: u32) -> BigInt {
    p.pow(e) - p.pow(e - 1)
}

/// `ℓ(a)` with `a = ω(a)·γ^ℓ(a)`, modulo `p^prec`.
pub fn gamma_exponent(a: i64, p: u64, prec: u32) -> Result<BigInt, WeightError> {
    if a.rem_euclid(p as i64) == 0 {
        return Err(WeightError::NotUnit(a));
    }
    let work = prec + 8;
    let m = BigInt::from(p).pow(work);
    let w = teichmuller(a, p, work);
    let winv = w.modpow(&(phi(&BigInt::from(p), work) - 1u32), &m);
    let x = (BigInt::from(a) * winv).mod_floor(&m);
    let (lx, sx) = padic_log(&x, p, work);
    let (lg, sg) = padic_log(&BigInt::from(generator(p)), p, work);
    let v0 = if p == 2 { 2 } else { 1 };
    // ℓ = (lx·p^−sx)/(lg·p^−sg); both logs have valuation ≥ v0, lg exactly v0
    let pb = BigInt::from(p);
    let num = lx * pb.pow(sg);
    let den = lg * pb.pow(sx);
    let vd = crate::rings::vp_bigint(&den, p).unwrap() as u32;
    debug_assert!(vd >= v0);
    let out_m = pb.pow(prec);
    let big = pb.pow(work + sx + sg);
    let nu = num.mod_floor(&big) / pb.pow(vd);
    let du = den.mod_floor(&big) / pb.pow(vd);
    let inv = du.modpow(&(phi(&pb, prec) - 1u32), &out_m);
    Ok((nu * inv).mod_floor(&out_m))
}

impl WeightChar {
    pub fn new(ring: RingSpec, factors: Vec<Factor>) -> Result<Self, WeightError> {
        let w = WeightChar { ring, factors };
        w.restriction(1)?;
        Ok(w)
    }

    pub fn algebraic(ring: RingSpec, ks: &[u32]) -> Self {
        WeightChar { ring, factors: ks.iter().map(|&k| Factor::Algebraic(k)).collect() }
    }

    pub fn ring(&self) -> RingSpec {
        self.ring
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Exponents when every factor is algebraic.
    pub fn algebraic_weight(&self) -> Option<Vec<i64>> {
        self.factors
            .iter()
            .map(|f| match f {
                Factor::Algebraic(k) => Some(*k as i64),
                _ => None,
            })
            .collect()
    }

    /// `λ(γ)` per factor.
    pub fn at_generator(&self) -> Vec<Elem> {
        let g = generator(self.ring.p);
        self.factors
            .iter()
            .map(|f| match f {
                Factor::Algebraic(k) => Elem::from_bigint(self.ring, &BigInt::from(g).pow(*k)),
                Factor::Generator(u) => u.clone(),
                Factor::Teichmuller(_) => Elem::one(self.ring),
            })
            .collect()
    }

    /// Mahler expansion of `z ↦ λ(γ^z)` through total degree `d`.
    pub fn restriction(&self, d: u32) -> Result<MahlerFn, WeightError> {
        Ok(mahler::character(&self.at_generator(), d)?)
    }

    /// `λ(a_1, …, a_k)` at integer units.
    pub fn eval_units(&self, a: &[i64]) -> Result<Evaluation, WeightError> {
        let ring = self.ring;
        let cap = match ring.kind {
            crate::rings::Kind::Zp | crate::rings::Kind::Qp => ring.n,
            _ => ring.m,
        };
        let mut value = Elem::one(ring);
        let mut certified = true;
        for (f, &x) in self.factors.iter().zip(a) {
            if x.rem_euclid(ring.p as i64) == 0 {
                return Err(WeightError::NotUnit(x));
            }
            let v = match f {
                Factor::Algebraic(k) => Elem::from_int(ring, x).pow(*k as u64),
                Factor::Teichmuller(j) => Elem::from_bigint(ring, &teichmuller(x, ring.p, ring.n.max(1))).pow(*j as u64),
                Factor::Generator(u) => {
                    let w = u.sub(&Elem::one(ring))?.lo().max(1) as u32;
                    let d = cap.div_ceil(w) + 1;
                    let e = ring.n.max(1) + 2 * d;
                    let l = gamma_exponent(x, ring.p, e)?;
                    let ch = mahler::character(std::slice::from_ref(u), d)?;
                    let ev = ch.eval_approx(&[l], e);
                    certified &= ev.certified;
                    ev.value
                }
            };
            value = value.mul(&v)?;
        }
        Ok(Evaluation { value, certified })
    }
}
