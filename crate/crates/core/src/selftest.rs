//! Small invariant suites per module, run by the `selftest` command.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::detlaws::{self, AlgElem, MatrixDetLaw};
use crate::fredholm::{self, ComplexOp, FredholmSeries};
use crate::linalg;
use crate::mahler::{self, MahlerFn};
use crate::multi::box_points;
use crate::opmat::{self, OpMatrix, PolyMap};
use crate::rings::{Elem, Kind, Ring, RingSpec};
use crate::upengine::{self, IwahoriMat};
use crate::weights::{self, DatumType, RootDatum, WeightChar};

pub const MODULES: [&str; 7] = ["rings", "mahler", "opmat", "fredholm", "weights", "upengine", "detlaws"];

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub invariant: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub modules: BTreeMap<String, Vec<Check>>,
    pub pass: bool,
}

type Suite = Vec<Check>;

fn check(name: &str, f: impl FnOnce() -> Result<bool, String>) -> Check {
    match f() {
        Ok(pass) => Check { invariant: name.into(), pass, detail: None },
        Err(e) => Check { invariant: name.into(), pass: false, detail: Some(e) },
    }
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Runs the suites for `scope`; an empty scope passes vacuously.
pub fn run(scope: &[String], seed: u64) -> Result<Report, String> {
    let mut modules = BTreeMap::new();
    for m in scope {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let suite = match m.as_str() {
            "rings" => rings(&mut rng),
            "mahler" => mahler_suite(&mut rng),
            "opmat" => opmat_suite(),
            "fredholm" => fredholm_suite(&mut rng),
            "weights" => weights_suite(),
            "upengine" => upengine_suite(),
            "detlaws" => detlaws_suite(&mut rng),
            _ => return Err(format!("unknown module '{m}'; known: {}", MODULES.join(", "))),
        };
        modules.insert(m.clone(), suite);
    }
    let pass = modules.values().flatten().all(|c| c.pass);
    Ok(Report { modules, pass })
}

fn test_rings() -> [RingSpec; 4] {
    [RingSpec::zp(3, 8), RingSpec::qp(5, 6), RingSpec::fp_laurent(2, 10), RingSpec::mixed(3, 2, 6)]
}

fn rings(rng: &mut ChaCha8Rng) -> Suite {
    let mut out = Vec::new();
    for spec in test_rings() {
        let ring = Ring::new(spec).unwrap();
        let lo = if spec.alpha_invertible() { -2..3 } else { 0..3 };
        let samples: Vec<(Elem, Elem, Elem)> =
            (0..50).map(|_| (ring.random(rng, lo.clone()), ring.random(rng, lo.clone()), ring.random(rng, lo.clone()))).collect();
        out.push(check(&format!("{spec}: additive inverse"), || {
            Ok(samples.iter().all(|(a, b, _)| a.add(b).and_then(|x| x.sub(b)).map(|x| x.agrees(a)).unwrap_or(false)))
        }));
        out.push(check(&format!("{spec}: distributivity"), || {
            for (a, b, c) in &samples {
                let l = a.mul(&b.add(c).map_err(s)?).map_err(s)?;
                let r = a.mul(b).map_err(s)?.add(&a.mul(c).map_err(s)?).map_err(s)?;
                if !l.agrees(&r) {
                    return Ok(false);
                }
            }
            Ok(true)
        }));
        out.push(check(&format!("{spec}: inverse of units"), || {
            for (a, _, _) in &samples {
                if a.is_zero() || (!spec.alpha_invertible() && a.lo() > 0) {
                    continue;
                }
                // units of the mixed model need a unit constant term; skip the others
                let Ok(inv) = a.inv() else { continue };
                if !a.mul(&inv).map_err(s)?.agrees(&ring.one()) {
                    return Ok(false);
                }
            }
            Ok(true)
        }));
    }
    out
}

fn mahler_suite(rng: &mut ChaCha8Rng) -> Suite {
    let mut out = Vec::new();
    for spec in [RingSpec::zp(3, 8), RingSpec::fp_laurent(2, 10)] {
        let ring = Ring::new(spec).unwrap();
        out.push(check(&format!("{spec}: fit∘eval roundtrip"), || {
            for _ in 0..20 {
                let (k, d) = (rng.gen_range(1..=2usize), rng.gen_range(0..=5u32));
                let n = crate::multi::MultiIndices::new(k, d).len();
                let c: Vec<Elem> = (0..n).map(|_| ring.random(rng, 0..2)).collect();
                let f = MahlerFn::from_coeffs(spec, k, d, c, mahler::Tail::Zero).map_err(s)?;
                let vals: Vec<Elem> = box_points(k, d + 1).iter().map(|z| f.eval(&z.iter().map(|&x| x as i64).collect::<Vec<_>>()).value).collect();
                let g = MahlerFn::fit_values(spec, k, d, &vals).map_err(s)?;
                if !f.coeffs().iter().zip(g.coeffs()).all(|(a, b)| a.agrees(b)) {
                    return Ok(false);
                }
            }
            Ok(true)
        }));
        out.push(check(&format!("{spec}: Ser isometry"), || {
            for _ in 0..20 {
                let r = Ratio::new(rng.gen_range(0..=4i64), rng.gen_range(1..=3i64));
                // absolute precision: α^⌈rn⌉ times a valuation < 3 must stay below p^N
                let dmax = if spec.kind == Kind::Zp && r > Ratio::from_integer(0) {
                    ((Ratio::from_integer(spec.n as i64 - 3) / r).floor().to_integer() as u32).min(6)
                } else {
                    6
                };
                let d = rng.gen_range(0..=dmax);
                let f: Vec<Elem> = (0..=d).map(|_| ring.random(rng, 0..3)).collect();
                let g = MahlerFn::ser(spec, 1, d, r, &f).map_err(s)?;
                let sup = f.iter().filter(|x| !x.is_zero()).map(|x| -x.lo()).max();
                let n = g.norm_r(r);
                if let Some(m) = sup {
                    // an uncertified norm is only an upper bound
                    if (n.certified && n.log_p != m) || n.log_p < m {
                        return Err(format!("r = {r}, D = {d}: ‖Ser f‖ = p^{} but sup |f(n)| = p^{m}", n.log_p));
                    }
                }
                let back = g.coeff_seq(r).map_err(s)?;
                if !back.iter().zip(&f).all(|(a, b)| a.agrees(b)) {
                    return Err(format!("r = {r}, D = {d}: Coeff∘Ser is not the identity"));
                }
            }
            Ok(true)
        }));
    }
    let spec = RingSpec::fp_laurent(2, 10);
    out.push(check("boundary character coefficients are T^n", || {
        let u = Elem::one(spec).add(&Elem::alpha(spec)).map_err(s)?;
        let ch = mahler::character(&[u], 12).map_err(s)?;
        let t = Elem::alpha(spec);
        Ok((0..=12u32).all(|n| ch.coeff(&[n]).unwrap().agrees(&t.pow(n as u64))))
    }));
    out
}

fn opmat_suite() -> Suite {
    let mut out = Vec::new();
    let ring = RingSpec::zp(3, 8);
    let r = Ratio::new(1, 2);
    out.push(check("pullback of a composite is the composite of pullbacks", || {
        let g = PolyMap::univariate(&[1, 3]);
        let h = PolyMap::univariate(&[0, 2, 2]);
        let d = 4;
        let (r1, r2) = (r / 2, r / 4);
        let pg = opmat::pullback(ring, &g, r1, r2, d * 2, d * 2).map_err(s)?;
        let ph = opmat::pullback(ring, &h, r, r1, d, d * 2).map_err(s)?;
        // (f∘h)∘g = f∘(h∘g)
        let direct = opmat::pullback(ring, &h.compose(&g), r, r2, d, d * 2).map_err(s)?;
        let comp = OpMatrix::compose(&pg, &ph).map_err(s)?;
        Ok(linalg::agrees(direct.entries(), comp.entries()))
    }));
    out.push(check("rescale entries obey the local valuation bound", || {
        Ok([2u64, 3, 5].iter().all(|&p| (0..p as i64).all(|j| opmat::local_bound_margin(p, j, 20) >= 0)))
    }));
    out.push(check("identity is neutral for composition", || {
        let f = opmat::rescale(ring, &[1], r, 6).map_err(s)?;
        let id = OpMatrix::identity(ring, 1, r * 3, 6);
        let a = OpMatrix::compose(&id, &f).map_err(s)?;
        Ok(linalg::agrees(a.entries(), f.entries()))
    }));
    out
}

/// Random `n × m` integer matrix with entries in `[−range, range]`.
fn random_ints(rng: &mut ChaCha8Rng, n: usize, m: usize, range: i64) -> Vec<Vec<i64>> {
    (0..n).map(|_| (0..m).map(|_| rng.gen_range(-range..=range)).collect()).collect()
}

/// A random unimodular integer matrix as a product of elementary ones.
pub fn random_unimodular(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
    let mut p: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i64).collect()).collect();
    let mut q = p.clone();
    if n < 2 {
        return (p, q);
    }
    for _ in 0..2 * n {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i == j {
            continue;
        }
        let c = rng.gen_range(-2..=2);
        // p ← p·E_ij(c), q ← E_ij(−c)·q
        for row in p.iter_mut() {
            row[j] += c * row[i];
        }
        let qi = q[j].clone();
        for (a, b) in q[i].iter_mut().zip(qi) {
            *a -= c * b;
        }
    }
    (p, q)
}

fn imul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    a.iter().map(|r| (0..b[0].len()).map(|j| r.iter().zip(b).map(|(x, row)| x * row[j]).sum()).collect()).collect()
}

/// `u` on `V`, extended by a contractible two-term piece `E → E` and conjugated:
/// degree 0 carries `P·[[u, x], [0, w]]·P⁻¹`, degree 1 carries `w`.
pub fn chain_conjugate(rng: &mut ChaCha8Rng, u: &[Vec<i64>], e: usize) -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
    let n = u.len();
    let x = random_ints(rng, n, e, 3);
    let w = random_ints(rng, e, e, 3);
    let mut big = vec![vec![0i64; n + e]; n + e];
    for i in 0..n {
        big[i][..n].copy_from_slice(&u[i]);
        big[i][n..].copy_from_slice(&x[i]);
    }
    for i in 0..e {
        big[n + i][n..].copy_from_slice(&w[i]);
    }
    let (p, q) = random_unimodular(rng, n + e);
    (imul(&imul(&p, &big), &q), w)
}

fn fredholm_suite(rng: &mut ChaCha8Rng) -> Suite {
    let mut out = Vec::new();
    let ring = RingSpec::zp(3, 10);
    out.push(check("homotopy invariance under chain conjugation", || {
        for _ in 0..10 {
            let n = rng.gen_range(1..=4);
            let u = random_ints(rng, n, n, 5);
            let base = fredholm::char_poly(&linalg::from_ints(ring, &u)).map_err(s)?;
            let e = rng.gen_range(1..=3);
            let (c0, c1) = chain_conjugate(rng, &u, e);
            let cx = ComplexOp::new(0, vec![OpMatrix::from_ints(ring, &c0).map_err(s)?, OpMatrix::from_ints(ring, &c1).map_err(s)?]);
            let q = fredholm::char_series_complex(&cx, n + 3, None, true).map_err(s)?.quotient.unwrap();
            if !(0..=n + 3).all(|i| q.coeff(i).agrees(&base.truncate(n + 3).coeff(i))) {
                return Ok(false);
            }
        }
        Ok(true)
    }));
    out.push(check("sym_check on a two-term complex", || {
        let a = OpMatrix::from_ints(ring, &random_ints(rng, 3, 3, 4)).map_err(s)?;
        let b = OpMatrix::from_ints(ring, &random_ints(rng, 2, 2, 4)).map_err(s)?;
        Ok(fredholm::sym_check(&ComplexOp::new(0, vec![a, b]), 4).map_err(s)?.ok)
    }));
    out.push(check("slope factor of (1 − 3X)(1 − 9X)", || {
        let q = RingSpec::qp(3, 10);
        let p = FredholmSeries::from_ints(q, &[1, -12, 27]);
        let f = fredholm::slope_factor(&p, Ratio::new(3, 2)).map_err(s)?;
        Ok(f.residual_ok && f.q.degree() == 1 && f.q.coeff(1).eq_int(-3))
    }));
    out
}

fn weights_suite() -> Suite {
    let mut out = Vec::new();
    out.push(check("Weyl group orders", || {
        let orders: Vec<usize> =
            [DatumType::A1, DatumType::A2, DatumType::C2, DatumType::GL2].iter().map(|&t| RootDatum::new(t).weyl_group().len()).collect();
        Ok(orders == [2, 6, 8, 2])
    }));
    out.push(check("GL2 classicality exponent is k+1", || {
        let d = RootDatum::new(DatumType::GL2);
        let tau = weights::standard_tau(DatumType::GL2);
        for k in 0..6 {
            if d.n_bound(&[k, 0], &tau).map_err(s)? != k + 1 {
                return Ok(false);
            }
        }
        Ok(true)
    }));
    out.push(check("algebraic weight is multiplicative on units", || {
        let ring = RingSpec::zp(5, 6);
        let l = WeightChar::algebraic(ring, &[3]);
        let ab = l.eval_units(&[2 * 7]).map_err(s)?.value;
        let a = l.eval_units(&[2]).map_err(s)?.value;
        let b = l.eval_units(&[7]).map_err(s)?.value;
        Ok(ab.agrees(&a.mul(&b).map_err(s)?))
    }));
    out
}

fn upengine_suite() -> Suite {
    let mut out = Vec::new();
    let ring = RingSpec::qp(3, 8);
    out.push(check("U_p is the sum of its coset terms", || {
        let u = upengine::up_matrix(&WeightChar::algebraic(ring, &[0]), Ratio::from_integer(1), 8).map_err(s)?;
        Ok(u.sum_check() && u.matrix.entry(0, 0).eq_int(3))
    }));
    out.push(check("cocycle on V_k", || {
        for k in 0..4u32 {
            let g1 = IwahoriMat::new(3, 2, 1, 3, 1).map_err(s)?;
            let g2 = IwahoriMat::new(3, 1, 2, 6, 4).map_err(s)?;
            let a = upengine::classical_star(ring, &g1.mul(&g2), k).map_err(s)?;
            let b = linalg::mul(&upengine::classical_star(ring, &g2, k).map_err(s)?, &upengine::classical_star(ring, &g1, k).map_err(s)?)
                .map_err(s)?;
            if !linalg::agrees(&a, &b) {
                return Ok(false);
            }
        }
        Ok(true)
    }));
    out.push(check("U_p char series at weight 0 is Π(1 − 3^(n+1) X)", || {
        let (ser, _) = upengine::up_slopes(&WeightChar::algebraic(ring, &[0]), Ratio::from_integer(1), 20, 3, None).map_err(s)?;
        let roots: Vec<Elem> = (1..=8).map(|i| Elem::from_bigint(ring, &BigInt::from(3).pow(i))).collect();
        let want = FredholmSeries::from_roots(ring, &roots, 3);
        Ok((0..=3).all(|i| ser.coeff(i).agrees(&want.coeff(i))))
    }));
    out
}

fn detlaws_suite(rng: &mut ChaCha8Rng) -> Suite {
    let mut out = Vec::new();
    let ring = RingSpec::zp(5, 8);
    out.push(check("complementary block gives the block determinant", || {
        let plus = MatrixDetLaw::parse(ring, &["a", "b", "c", "d", "e"], &[("g", vec![vec!["a", "b", "0"], vec!["c", "d", "0"], vec!["0", "0", "e"]])])
            .map_err(s)?;
        let minus = MatrixDetLaw::parse(ring, &["a", "b", "c", "d", "e"], &[("g", vec![vec!["e"]])]).map_err(s)?;
        let dr = detlaws::det_ratio(&plus, &minus, &[AlgElem::gen(ring, 0)]).map_err(s)?;
        Ok(dr.ok() && dr.multiplicative && dr.homogeneous && dr.values[0].agrees(&crate::detlaws::Poly::parse(ring, "a*d - b*c", &plus.symbols).map_err(s)?))
    }));
    out.push(check("diag(x,y)/diag(x,x) is refuted", || {
        let plus = MatrixDetLaw::parse(ring, &["x", "y"], &[("g", vec![vec!["x", "0"], vec!["0", "y"]])]).map_err(s)?;
        let minus = MatrixDetLaw::parse(ring, &["x", "y"], &[("g", vec![vec!["x", "0"], vec!["0", "x"]])]).map_err(s)?;
        Ok(!detlaws::det_ratio(&plus, &minus, &[AlgElem::gen(ring, 0)]).map_err(s)?.ok())
    }));
    out.push(check("strictly upper triangular generator lies in the kernel", || {
        let law = MatrixDetLaw::parse(ring, &[], &[("n", vec![vec!["0", "1"], vec!["0", "0"]]), ("t", vec![vec!["2", "0"], vec!["0", "3"]])])
            .map_err(s)?;
        let r = detlaws::kernel_test(&law, &AlgElem::gen(ring, 0), 50, rng).map_err(s)?;
        let t = detlaws::kernel_test(&law, &AlgElem::gen(ring, 1), 5, rng).map_err(s)?;
        Ok(r.passed && !t.passed)
    }));
    out
}
