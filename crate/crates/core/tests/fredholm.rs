use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tate_spectral::fredholm::{
    char_poly, char_series, char_series_complex, det_one_minus, riesz_decompose, slope_factor, sym_check, trace_sym,
    ComplexOp, FredError, FredholmSeries,
};
use tate_spectral::linalg;
use tate_spectral::opmat::{inclusion, rescale, OpMatrix, Space};
use tate_spectral::rings::{Elem, RingSpec};
use tate_spectral::selftest::chain_conjugate;

fn q(a: i64, b: i64) -> Ratio<i64> {
    Ratio::new(a, b)
}

fn series_agree(a: &FredholmSeries, b: &[BigInt]) -> bool {
    (0..=a.cutoff()).all(|i| a.coeff(i).agrees(&Elem::from_bigint(a.ring(), b.get(i).unwrap_or(&BigInt::zero()))))
}

/// Coefficients of `Π (1 − c_i X)` over the integers.
fn product_oracle(cs: &[BigInt], k: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); k + 1];
    out[0] = BigInt::one();
    for c in cs {
        for i in (1..=k).rev() {
            let t = &out[i - 1] * c;
            out[i] -= t;
        }
    }
    out
}

fn det_big(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    // cofactor expansion along the first row
    (0..n).fold(BigInt::zero(), |acc, j| {
        let minor: Vec<Vec<BigInt>> =
            m[1..].iter().map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, x)| x.clone()).collect()).collect();
        let t = &m[0][j] * det_big(&minor);
        if j % 2 == 0 { acc + t } else { acc - t }
    })
}

/// `det(1 − X·m)` as `Σ (−1)^i (sum of principal i-minors) X^i`.
fn minors_oracle(m: &[Vec<i64>]) -> Vec<BigInt> {
    let n = m.len();
    let mut out = vec![BigInt::zero(); n + 1];
    for mask in 0u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let sub: Vec<Vec<BigInt>> = idx.iter().map(|&i| idx.iter().map(|&j| BigInt::from(m[i][j])).collect()).collect();
        let d = det_big(&sub);
        let i = idx.len();
        out[i] += if i % 2 == 0 { d } else { -d };
    }
    out
}

/// The inclusion matrix read as an endomorphism of `c(N)` through the orthonormal bases.
fn inclusion_on_c0(r: RingSpec, d: u32) -> OpMatrix {
    let sp = Space::a(1, q(1, 1), d);
    inclusion(r, 1, q(1, 1), q(1, 2), d).unwrap().with_spaces(sp, sp)
}

fn random_ints(rng: &mut ChaCha8Rng, r: usize, c: usize, b: i64) -> Vec<Vec<i64>> {
    (0..r).map(|_| (0..c).map(|_| rng.gen_range(-b..=b)).collect()).collect()
}

#[test]
fn char_series_examples() {
    let r = RingSpec::qp(3, 10);
    let m = OpMatrix::from_ints(r, &[vec![2, 0, 0, 0], vec![0, 5, 0, 0], vec![0, 0, 9, 0], vec![0, 0, 0, 0]]).unwrap();
    let s = char_series(&m, 4, None).unwrap();
    assert!(series_agree(&s, &product_oracle(&[2, 5, 9].map(BigInt::from), 4)));
    let n = OpMatrix::from_ints(r, &[vec![0, 1, 0, 0], vec![0, 0, 1, 0], vec![0, 0, 0, 1], vec![0, 0, 0, 0]]).unwrap();
    assert!(char_series(&n, 4, None).unwrap().agrees(&FredholmSeries::one(r, 4)));
}

#[test]
fn dense_blocks_match_principal_minors() {
    let r = RingSpec::zp(5, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=6 {
        for _ in 0..5 {
            let m = random_ints(&mut rng, n, n, 9);
            let got = det_one_minus(&linalg::from_ints(r, &m), n).unwrap();
            let want = minors_oracle(&m);
            for (g, w) in got.iter().zip(&want) {
                assert!(g.agrees(&Elem::from_bigint(r, w)), "{m:?}");
            }
        }
    }
}

#[test]
fn inclusion_series_matches_diagonal_product() {
    let (p, d, k) = (3i64, 29u32, 8usize);
    let r = RingSpec::qp(3, 12);
    let m = inclusion_on_c0(r, d);
    assert!(char_series(&inclusion(r, 1, q(1, 1), q(1, 2), d).unwrap(), k, None).is_err());
    let s = char_series(&m, k, None).unwrap();
    assert!(s.all_certified());
    // diagonal p^(n − ⌈n/2⌉) = p^⌊n/2⌋ on the 30 × 30 block
    let diag: Vec<BigInt> = (0..=d).map(|n| BigInt::from(p).pow(n / 2)).collect();
    let want = product_oracle(&diag, k);
    assert!(series_agree(&s, &want));
    // a dense oracle on the same block, through X^4
    let ints: Vec<Vec<i64>> = (0..=d as usize).map(|i| (0..=d as usize).map(|j| if i == j { p.pow(i as u32 / 2) } else { 0 }).collect()).collect();
    let dense = det_one_minus(&linalg::from_ints(r, &ints), 4).unwrap();
    for i in 0..=4 {
        assert!(dense[i].agrees(&s.coeff(i)));
    }
}

#[test]
fn missing_precision_names_a_cutoff() {
    let r = RingSpec::qp(3, 30);
    let m = inclusion_on_c0(r, 10);
    match char_series(&m, 4, Some(20)) {
        Err(FredError::GrowCutoff { coeff, needed }) => {
            assert!(needed > 10, "{coeff} {needed}");
            let bigger = inclusion_on_c0(r, needed);
            let s = char_series(&bigger, 4, Some(20));
            assert!(!matches!(s, Err(FredError::GrowCutoff { coeff: c, .. }) if c == coeff));
        }
        other => panic!("{other:?}"),
    }
    // no decay bound at all
    let c = OpMatrix::compose(&inclusion(r, 1, q(1, 6), q(1, 18), 8).unwrap(), &rescale(r, &[0], q(1, 18), 8).unwrap()).unwrap();
    assert!(matches!(char_series(&c, 3, Some(5)), Err(FredError::NoBound(_))));
}

/// `f ↦ f(pz)` followed by `A^(pr) ↪ A^r`: the same operator at two radii.
#[test]
fn series_does_not_depend_on_the_radius() {
    let r = RingSpec::qp(3, 16);
    let d = 12;
    let at = |rad: Ratio<i64>| {
        let c = OpMatrix::compose(&inclusion(r, 1, rad * 3, rad, d).unwrap(), &rescale(r, &[0], rad, d).unwrap()).unwrap();
        char_series(&c, 6, None).unwrap()
    };
    let (a, b) = (at(q(1, 18)), at(q(1, 36)));
    assert!(a.agrees(&b));
    // triangular with diagonal p^n
    let diag: Vec<BigInt> = (0..=d).map(|n| BigInt::from(3).pow(n)).collect();
    assert!(series_agree(&a, &product_oracle(&diag, 6)));
}

#[test]
fn complex_examples() {
    let r = RingSpec::qp(3, 10);
    let u = OpMatrix::from_ints(r, &[vec![2, 1], vec![3, 3]]).unwrap();
    let id = OpMatrix::from_ints(r, &[vec![1, 0], vec![0, 1]]).unwrap();
    let c = ComplexOp::new(0, vec![u.clone(), u.clone()]).with_differentials(vec![id]);
    assert!(c.check().unwrap());
    let s = char_series_complex(&c, 4, None, true).unwrap();
    assert!(s.quotient.unwrap().agrees(&FredholmSeries::one(r, 4)));
    let one = char_series_complex(&ComplexOp::new(0, vec![u.clone()]), 4, None, true).unwrap();
    assert!(one.quotient.unwrap().agrees(&char_series(&u, 4, None).unwrap()));
    let (a, b) = (7, 3);
    let c = ComplexOp::new(0, vec![OpMatrix::from_ints(r, &[vec![a, 0], vec![0, b]]).unwrap(), OpMatrix::from_ints(r, &[vec![a]]).unwrap()]);
    let s = char_series_complex(&c, 5, None, true).unwrap().quotient.unwrap();
    assert!(series_agree(&s, &[BigInt::one(), BigInt::from(-b)]));
}

/// A random complex with a contractible summand, conjugated by a random chain isomorphism.
#[test]
fn homotopy_invariance_on_random_chains() {
    let r = RingSpec::zp(3, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let n = rng.gen_range(1..=4);
        let u = random_ints(&mut rng, n, n, 5);
        let e = rng.gen_range(1..=3);
        let (c0, c1) = chain_conjugate(&mut rng, &u, e);
        let k = n + 3;
        let cx = ComplexOp::new(0, vec![OpMatrix::from_ints(r, &c0).unwrap(), OpMatrix::from_ints(r, &c1).unwrap()]);
        let got = char_series_complex(&cx, k, None, true).unwrap().quotient.unwrap();
        assert!(series_agree(&got, &minors_oracle(&u)), "{u:?}");
    }
}

#[test]
fn sym_examples() {
    let r = RingSpec::zp(5, 10);
    let (a, b) = (3i64, 7i64);
    let u = linalg::from_ints(r, &[vec![a, 0], vec![0, b]]);
    assert!(trace_sym(&u, 2).unwrap().eq_int(a * a + a * b + b * b));
    assert!(trace_sym(&u, 0).unwrap().eq_int(1));
    let c = ComplexOp::new(0, vec![OpMatrix::from_ints(r, &[vec![a, 0], vec![0, b]]).unwrap()]);
    assert!(sym_check(&c, 5).unwrap().ok);
    // nilpotent in degree 0, [c] in degree 1: 1 − cX exactly
    let cc = 4;
    let cx = ComplexOp::new(0, vec![OpMatrix::from_ints(r, &[vec![0, 1], vec![0, 0]]).unwrap(), OpMatrix::from_ints(r, &[vec![cc]]).unwrap()]);
    let rep = sym_check(&cx, 4).unwrap();
    assert!(rep.ok && rep.degrees.len() == 5);
    let big = OpMatrix::identity(r, 1, q(0, 1), 12);
    assert!(matches!(sym_check(&ComplexOp::new(0, vec![big]), 2), Err(FredError::SizeLimit(13, 12))));
}

#[test]
fn sym_check_on_random_complexes() {
    let r = RingSpec::zp(3, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let us: Vec<OpMatrix> = (0..3)
            .map(|_| {
                let n = rng.gen_range(1..=3);
                OpMatrix::from_ints(r, &random_ints(&mut rng, n, n, 4)).unwrap()
            })
            .collect();
        let start = rng.gen_range(-1..=1);
        assert!(sym_check(&ComplexOp { start, us, ds: vec![] }, 4).unwrap().ok);
    }
}

#[test]
fn series_arithmetic() {
    let r = RingSpec::qp(3, 12);
    let p = FredholmSeries::from_ints(r, &[1, -4, 3]);
    assert!(p.mul(&FredholmSeries::one(r, 2)).unwrap().agrees(&p));
    let quo = p.div(&FredholmSeries::from_ints(r, &[1, -1]), Some(4)).unwrap();
    assert!(series_agree(&quo, &[BigInt::one(), BigInt::from(-3)]));
    // (1 − X)/(1 − 3X) = 1 + Σ (3^i − 3^(i−1)) X^i
    let g = FredholmSeries::from_ints(r, &[1, -1]).div(&FredholmSeries::from_ints(r, &[1, -3]), Some(5)).unwrap();
    let want: Vec<BigInt> = (0..=5u32).map(|i| if i == 0 { BigInt::one() } else { BigInt::from(3).pow(i) - BigInt::from(3).pow(i - 1) }).collect();
    assert!(series_agree(&g, &want));
    assert_eq!(g.margins().len(), 6);
}

#[test]
fn polygon_examples() {
    let r = RingSpec::qp(3, 12);
    let np = FredholmSeries::from_ints(r, &[1, -1, 3]).newton_polygon();
    assert_eq!(np.slopes(), vec![q(0, 1), q(1, 1)]);
    assert_eq!(np.vertices, vec![(0, 0), (1, 0), (2, 1)]);
    assert!(FredholmSeries::one(r, 3).newton_polygon().slopes().is_empty());
    assert_eq!(FredholmSeries::from_ints(r, &[1, -3]).newton_polygon().slopes(), vec![q(1, 1)]);
    // 1 + 9X² over 1 + 0X: one segment of slope 1 and length 2
    let np = FredholmSeries::from_ints(r, &[1, 0, 9]).newton_polygon();
    assert_eq!(np.slopes(), vec![q(1, 1), q(1, 1)]);
    let t = RingSpec::fp_laurent(3, 12);
    let s = FredholmSeries::new(t, vec![Elem::one(t), Elem::from_series(t, 1, &[1], 12).unwrap(), Elem::from_series(t, 5, &[2], 12).unwrap()], true).unwrap();
    assert_eq!(s.newton_polygon().slopes(), vec![q(1, 1), q(4, 1)]);
}

#[test]
fn slope_factor_examples() {
    let r = RingSpec::qp(3, 12);
    let p = FredholmSeries::from_ints(r, &[1, -4, 3]);
    let f = slope_factor(&p, q(0, 1)).unwrap();
    assert!(f.residual_ok);
    assert!(f.q.agrees(&FredholmSeries::from_ints(r, &[1, -1])));
    assert!(series_agree(&f.s, &[BigInt::one(), BigInt::from(-3)]));
    let f = slope_factor(&p, q(-1, 2)).unwrap();
    assert_eq!(f.q.degree(), 0);
    assert!(f.s.agrees(&p));
    // (1 − T X)(1 − T³ X) over F_3((T)), ν = 2
    let t = RingSpec::fp_laurent(3, 16);
    let el = |lo: i64| Elem::from_series(t, lo, &[1], 16).unwrap();
    let pl = FredholmSeries::new(t, vec![Elem::one(t), el(1).add(&el(3)).unwrap().neg(), el(4)], true).unwrap();
    let f = slope_factor(&pl, q(2, 1)).unwrap();
    assert!(f.residual_ok);
    assert!(f.q.coeff(1).agrees(&el(1).neg()) && f.q.degree() == 1);
    assert!(matches!(slope_factor(&FredholmSeries::from_ints(RingSpec::zp(3, 8), &[1, -1]), q(0, 1)), Err(FredError::Unsupported(_))));
}

#[test]
fn riesz_examples() {
    let r = RingSpec::qp(3, 12);
    let z = riesz_decompose(&linalg::from_ints(r, &[vec![1, 0], vec![0, 3]]), &FredholmSeries::from_ints(r, &[1, -1])).unwrap();
    assert!(linalg::agrees(&z.projector, &linalg::from_ints(r, &[vec![1, 0], vec![0, 0]])));
    assert!(linalg::agrees(&z.n_block, &linalg::from_ints(r, &[vec![1]])));
    let z = riesz_decompose(&linalg::from_ints(r, &[vec![1, 1], vec![0, 3]]), &FredholmSeries::one(r, 0)).unwrap();
    assert_eq!(z.rank, 0);
    assert!(z.projector.iter().flatten().all(|x| x.is_zero()));
    let u = linalg::from_ints(r, &[vec![1, 1], vec![0, 3]]);
    let z = riesz_decompose(&u, &FredholmSeries::from_ints(r, &[1, -1])).unwrap();
    assert_eq!(z.rank, 1);
    assert!(char_poly(&z.n_block).unwrap().agrees(&FredholmSeries::from_ints(r, &[1, -1])));
    // a degree-2 factor: Q* ≠ Q
    let u3 = linalg::from_ints(r, &[vec![1, 1, 0], vec![0, 2, 1], vec![0, 0, 9]]);
    let z3 = riesz_decompose(&u3, &FredholmSeries::from_ints(r, &[1, -3, 2])).unwrap();
    assert_eq!(z3.rank, 2);
    assert!(char_poly(&z3.n_block).unwrap().agrees(&FredholmSeries::from_ints(r, &[1, -3, 2])));
    // the eigenvector for 1 is (1, 0), for 3 it is (1, 2): e = [[1, −1/2], [0, 0]]
    let half = Elem::from_int(r, -1).div(&Elem::from_int(r, 2)).unwrap();
    assert!(z.projector[0][1].agrees(&half) && z.projector[1][1].is_zero());
}

/// Too little precision for a clustered spectrum is reported, not turned into a wrong rank.
#[test]
fn riesz_reports_exhausted_precision() {
    let m = vec![
        vec![20, -76, -3, -38, -7],
        vec![57, -1440, -468, -675, -114],
        vec![-101, 1027, 291, 476, 79],
        vec![-108, 2864, 936, 1342, 225],
        vec![-20, 56, -6, 28, 16],
    ];
    let outcome = |n: u32| {
        let r = RingSpec::qp(3, n);
        let u = linalg::from_ints(r, &m);
        let f = slope_factor(&char_poly(&u).unwrap(), q(5, 2)).unwrap();
        riesz_decompose(&u, &f.q).map(|z| z.rank)
    };
    assert!(matches!(outcome(20), Err(FredError::Precision(_))));
    assert_eq!(outcome(38), Ok(4));
}

/// `T` upper triangular with diagonal `u_i·p^(e_i)`, conjugated by a unimodular matrix.
fn spectral_matrix(rng: &mut ChaCha8Rng, es: &[u32]) -> Vec<Vec<i64>> {
    let n = es.len();
    let mut t = vec![vec![0i64; n]; n];
    for i in 0..n {
        let unit = [1, 2, 4, 5, 7][rng.gen_range(0..5)];
        t[i][i] = unit * 3i64.pow(es[i]);
        for j in i + 1..n {
            t[i][j] = rng.gen_range(-3..=3);
        }
    }
    let (p, pi) = tate_spectral::selftest::random_unimodular(rng, n);
    let mul = |a: &[Vec<i64>], b: &[Vec<i64>]| -> Vec<Vec<i64>> {
        a.iter().map(|r| (0..n).map(|j| r.iter().zip(b).map(|(x, row)| x * row[j]).sum()).collect()).collect()
    };
    mul(&mul(&p, &t), &pi)
}

#[test]
fn factor_and_project_random_spectra() {
    // clustered slopes make Q*(0) small; each power of 1 − Q*(u)/Q*(0) spends that many digits
    let r = RingSpec::qp(3, 38);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..30 {
        let n = rng.gen_range(2..=5);
        let es: Vec<u32> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let m = spectral_matrix(&mut rng, &es);
        let u = linalg::from_ints(r, &m);
        let p = char_poly(&u).unwrap();
        let cut = rng.gen_range(0..4) as i64;
        let nu = q(2 * cut + 1, 2);
        let f = slope_factor(&p, nu).unwrap();
        assert!(f.residual_ok);
        let d = es.iter().filter(|&&e| (e as i64) <= cut).count();
        assert_eq!(f.q.degree(), d, "{es:?} ν={nu}");
        assert!(f.q.newton_polygon().slopes().iter().all(|s| *s < nu));
        assert!(f.s.newton_polygon().slopes().iter().all(|s| *s > nu));
        let z = riesz_decompose(&u, &f.q).unwrap();
        let e2 = linalg::mul(&z.projector, &z.projector).unwrap();
        assert!(linalg::agrees(&e2, &z.projector));
        assert_eq!(z.rank, d);
        assert!(z.trace.agrees(&Elem::from_int(r, d as i64)));
        if d > 0 {
            assert!(char_poly(&z.n_block).unwrap().agrees(&f.q));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn block_triangular_is_multiplicative(n in 1usize..4, m in 1usize..4, seed in any::<u64>()) {
        let r = RingSpec::zp(5, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_ints(&mut rng, n, n, 6);
        let b = random_ints(&mut rng, m, m, 6);
        let x = random_ints(&mut rng, n, m, 6);
        let mut big = vec![vec![0i64; n + m]; n + m];
        for i in 0..n {
            big[i][..n].copy_from_slice(&a[i]);
            big[i][n..].copy_from_slice(&x[i]);
        }
        for i in 0..m {
            big[n + i][n..].copy_from_slice(&b[i]);
        }
        let whole = char_series(&OpMatrix::from_ints(r, &big).unwrap(), n + m, None).unwrap();
        let pa = char_series(&OpMatrix::from_ints(r, &a).unwrap(), n + m, None).unwrap();
        let pb = char_series(&OpMatrix::from_ints(r, &b).unwrap(), n + m, None).unwrap();
        prop_assert!(whole.agrees(&pa.mul(&pb).unwrap().truncate(n + m)));
    }

    #[test]
    fn products_divide_back(a in proptest::collection::vec(-30i64..30, 1..5), b in proptest::collection::vec(-30i64..30, 1..5)) {
        let r = RingSpec::qp(5, 14);
        let mk = |c: &[i64]| FredholmSeries::from_ints(r, &[&[1][..], c].concat());
        let (pa, pb) = (mk(&a), mk(&b));
        let k = a.len() + b.len();
        let prod = pa.mul(&pb).unwrap();
        prop_assert!(prod.div(&pb, Some(k)).unwrap().agrees(&pa.truncate(k)));
    }
}
