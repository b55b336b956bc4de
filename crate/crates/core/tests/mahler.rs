use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tate_spectral::mahler::{self, amice_scale, vp_factorial, MahlerFn, Tail};
use tate_spectral::multi::{box_points, MultiIndices};
use tate_spectral::rings::{Elem, Ring, RingSpec};

fn ints(ring: RingSpec, xs: &[i64]) -> Vec<Elem> {
    xs.iter().map(|&x| Elem::from_int(ring, x)).collect()
}

fn same(a: &[Elem], b: &[Elem]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.agrees(y))
}

#[test]
fn fit_examples() {
    let s = RingSpec::zp(5, 6);
    let f = MahlerFn::fit_values(s, 1, 2, &ints(s, &[0, 1, 4])).unwrap();
    assert!(same(f.coeffs(), &ints(s, &[0, 1, 2])));
    let f = MahlerFn::fit_values(s, 1, 4, &ints(s, &[1; 5])).unwrap();
    assert!(same(f.coeffs(), &ints(s, &[1, 0, 0, 0, 0])));
    assert!(MahlerFn::fit_values(s, 1, 4, &ints(s, &[1; 4])).is_err());
}

/// Forward differences of `z₁z₂` on `{0,1,2}²`, computed by hand.
#[test]
fn fit_two_variables() {
    let s = RingSpec::zp(3, 6);
    let pts = box_points(2, 3);
    let vals: Vec<i64> = pts.iter().map(|z| (z[0] * z[1]) as i64).collect();
    let f = MahlerFn::fit_values(s, 2, 2, &ints(s, &vals)).unwrap();
    // Δ₁^a Δ₂^b (z₁z₂)(0) = 1 iff a = b = 1
    let mut want = std::collections::BTreeMap::new();
    for a in 0..3usize {
        for b in 0..3usize {
            let mut acc = 0i64;
            for i in 0..=a {
                for j in 0..=b {
                    let sign = if (a - i + b - j) % 2 == 0 { 1 } else { -1 };
                    acc += sign * binom(a, i) * binom(b, j) * (i * j) as i64;
                }
            }
            want.insert(vec![a as u32, b as u32], acc);
        }
    }
    for n in MultiIndices::new(2, 2).iter() {
        assert!(f.coeff(n).unwrap().eq_int(want[n]), "{n:?}");
    }
    assert!(f.coeff(&[1, 1]).unwrap().eq_int(1));
}

fn binom(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

#[test]
fn eval_examples() {
    let s = RingSpec::zp(3, 6);
    assert!(MahlerFn::from_ints(s, &[0, 1, 2]).eval(&[3]).value.eq_int(9));
    assert!(MahlerFn::from_ints(s, &[1]).eval(&[17]).value.eq_int(1));
    // (1+p)^z at z = 1 + p against modular exponentiation
    let ch = mahler::character(&[Elem::from_int(s, 4)], 6).unwrap();
    let want = BigInt::from(4).modpow(&BigInt::from(4), &BigInt::from(729)).to_i64().unwrap();
    assert!(ch.eval(&[4]).value.eq_int(want));
}

#[test]
fn norm_examples() {
    let s = RingSpec::qp(3, 8);
    let r = Ratio::new(2, 3);
    for n in 0..6u32 {
        let e = ((r * n as i64).ceil()).to_integer();
        let f = MahlerFn::basis(s, &[n], 6);
        let g = MahlerFn::from_coeffs(s, 1, 6, f.coeffs().iter().map(|c| c.mul_alpha_pow(e).unwrap()).collect(), Tail::Zero).unwrap();
        assert_eq!(g.norm_r(r).log_p, 0);
    }
    assert_eq!(MahlerFn::from_ints(s, &[1]).norm_r(r).log_p, 0);
    let f = MahlerFn::from_ints(s, &[0, 1]);
    assert_eq!(f.norm_r(Ratio::from_integer(1)).log_p, 1);
    assert!(f.norm_r(Ratio::from_integer(1)).certified);
}

/// `sup_n ‖α^{⌊−rn⌋}·Δ^n f‖_0` from values on a window of integers.
fn norm_by_differences(p: i64, f: &[i64], r: Ratio<i64>, window: usize) -> i64 {
    let vals: Vec<BigInt> = (0..window + f.len())
        .map(|z| f.iter().enumerate().map(|(n, &a)| BigInt::from(a) * mahler::binom(&BigInt::from(z), n as u32)).sum())
        .collect();
    let mut best = i64::MIN;
    let mut cur = vals;
    for n in 0..f.len() {
        let sup = cur.iter().take(window).filter(|x| **x != BigInt::from(0)).map(|x| -vp(x, p)).max();
        if let Some(s) = sup {
            best = best.max(s + (r * n as i64).ceil().to_integer());
        }
        cur = cur.windows(2).map(|w| &w[1] - &w[0]).collect();
    }
    best
}

fn vp(x: &BigInt, p: i64) -> i64 {
    let mut v = 0;
    let mut x = x.clone();
    let pb = BigInt::from(p);
    while &x % &pb == BigInt::from(0) {
        x /= &pb;
        v += 1;
    }
    v
}

#[test]
fn norm_matches_difference_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = RingSpec::qp(3, 20);
    for _ in 0..200 {
        let d = rng.gen_range(0..6);
        let f: Vec<i64> = (0..=d).map(|_| rng.gen_range(-200..200)).collect();
        if f.iter().all(|&x| x == 0) {
            continue;
        }
        let r = Ratio::new(rng.gen_range(0..5), rng.gen_range(1..4));
        let m = MahlerFn::from_ints(s, &f);
        assert_eq!(m.norm_r(r).log_p, norm_by_differences(3, &f, r, 30), "{f:?} r={r}");
    }
}

#[test]
fn decay_examples() {
    let s = RingSpec::zp(3, 6);
    let ch = mahler::character(&[Elem::from_int(s, 4)], 5).unwrap();
    let rep = ch.decay_report(Ratio::from_integer(1));
    assert!(rep.certified);
    assert!(rep.witness.iter().all(|&(_, m)| m == 0), "{:?}", rep.witness);
    let poly = MahlerFn::from_ints(s, &[1, 2, 3]);
    assert!(poly.decay_report(Ratio::new(5, 2)).certified);
    let ones = MahlerFn::from_coeffs(s, 1, 5, ints(s, &[1; 6]), Tail::Unknown).unwrap();
    let rep = ones.decay_report(Ratio::from_integer(1));
    assert!(!rep.certified);
    assert_eq!(rep.witness, (0..=5).map(|n| (n, -(n as i64))).collect::<Vec<_>>());
}

#[test]
fn product_examples() {
    let s = RingSpec::zp(5, 6);
    let b1 = MahlerFn::basis(s, &[1], 3);
    let b2 = MahlerFn::basis(s, &[2], 3);
    assert!(same(b1.mul(&b1).unwrap().coeffs(), &ints(s, &[0, 1, 2, 0])));
    assert!(same(b1.mul(&b2).unwrap().coeffs(), &ints(s, &[0, 0, 2, 3])));
    let f = MahlerFn::from_ints(s, &[3, -1, 7, 2]);
    let one = MahlerFn::from_ints(s, &[1, 0, 0, 0]);
    assert!(same(f.mul(&one).unwrap().coeffs(), f.coeffs()));
}

#[test]
fn character_examples() {
    let s = RingSpec::zp(3, 6);
    let ch = mahler::character(&[Elem::from_int(s, 4)], 8).unwrap();
    for n in 0..=8u32 {
        assert!(ch.coeff(&[n]).unwrap().agrees(&Elem::from_int(s, 3).pow(n as u64)));
    }
    let triv = mahler::character(&[Elem::one(s)], 4).unwrap();
    assert!(same(triv.coeffs(), &ints(s, &[1, 0, 0, 0, 0])));
    let t = RingSpec::fp_laurent(2, 8);
    let u = Elem::one(t).add(&Elem::alpha(t)).unwrap();
    let ch = mahler::character(&[u], 10).unwrap();
    for n in 0..=10u32 {
        assert!(ch.coeff(&[n]).unwrap().agrees(&Elem::alpha(t).pow(n as u64)));
    }
    assert!(mahler::character(&[Elem::from_int(s, 2)], 4).is_err());
}

/// Legendre's sum checked against factoring every factor of `n!`.
#[test]
fn factorial_valuations() {
    let direct = |n: u64, p: u64| (1..=n).map(|mut i| {
        let mut v = 0;
        while i % p == 0 {
            i /= p;
            v += 1;
        }
        v
    }).sum::<u64>();
    assert_eq!(vp_factorial(10, 2), 8);
    assert_eq!(vp_factorial(10, 2), direct(10, 2));
    assert_eq!(vp_factorial(0, 7), 0);
    assert_eq!(vp_factorial(9, 3), direct(9, 3));
    assert_eq!(vp_factorial(9, 3), 4);
    assert_eq!(amice_scale(&[9], 2, 3), 0);
    assert_eq!(amice_scale(&[0, 0], 3, 5), 0);
    assert_eq!(amice_scale(&[10], 1, 2), direct(5, 2));
    assert_eq!(amice_scale(&[10], 1, 2), 3);
    for p in [2u64, 3, 5] {
        for n in 0..=10_000u64 {
            let v = vp_factorial(n, p) as f64;
            let upper = n as f64 / (p - 1) as f64;
            let lower = upper - ((n + 1) as f64).ln() / (p as f64).ln();
            assert!(v <= upper + 1e-9 && v >= lower - 1e-9, "p={p} n={n}");
        }
    }
}

#[test]
fn roundtrip_thousand_per_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in [RingSpec::zp(3, 8), RingSpec::fp_laurent(2, 10)] {
        let ring = Ring::new(s).unwrap();
        for _ in 0..1000 {
            let k = rng.gen_range(1..=2usize);
            let d = rng.gen_range(0..=6u32);
            let n = MultiIndices::new(k, d).len();
            let c: Vec<Elem> = (0..n).map(|_| ring.random(&mut rng, 0..3)).collect();
            let f = MahlerFn::from_coeffs(s, k, d, c, Tail::Zero).unwrap();
            let vals: Vec<Elem> =
                box_points(k, d + 1).iter().map(|z| f.eval(&z.iter().map(|&x| x as i64).collect::<Vec<_>>()).value).collect();
            let g = MahlerFn::fit_values(s, k, d, &vals).unwrap();
            assert!(same(f.coeffs(), g.coeffs()));
        }
    }
}

#[test]
fn character_is_a_homomorphism() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let z = RingSpec::zp(3, 8);
    let t = RingSpec::fp_laurent(2, 10);
    let cases = [
        (mahler::character(&[Elem::from_int(z, 4)], 24).unwrap(), 24),
        (mahler::character(&[Elem::one(t).add(&Elem::alpha(t)).unwrap()], 24).unwrap(), 24),
    ];
    for (ch, d) in &cases {
        for _ in 0..1000 {
            let x = rng.gen_range(0..=d / 2) as i64;
            let y = rng.gen_range(0..=d / 2) as i64;
            let (a, b, c) = (ch.eval(&[x]), ch.eval(&[y]), ch.eval(&[x + y]));
            assert!(a.certified && b.certified && c.certified);
            assert!(c.value.agrees(&a.value.mul(&b.value).unwrap()));
            assert_eq!(c.value.prec(), ch.ring().n.max(ch.ring().m) as i64);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ser_is_an_isometry(fs in proptest::collection::vec((0i64..4, 1i64..9), 1..8), num in 0i64..7, den in 1i64..4) {
        let s = RingSpec::qp(3, 8);
        let r = Ratio::new(num, den);
        let d = fs.len() as u32 - 1;
        let f: Vec<Elem> = fs.iter().map(|&(v, u)| Elem::from_int(s, u).mul_alpha_pow(v).unwrap()).collect();
        let g = MahlerFn::ser(s, 1, d, r, &f).unwrap();
        let sup = f.iter().map(|x| -x.lo()).max().unwrap();
        prop_assert_eq!(g.norm_r(r).log_p, sup);
        prop_assert!(same(&g.coeff_seq(r).unwrap(), &f));
    }

    #[test]
    fn product_keeps_decay(fa in proptest::collection::vec(1i64..50, 3..7), fb in proptest::collection::vec(1i64..50, 3..7), num in 1i64..4) {
        let s = RingSpec::qp(3, 12);
        let r = Ratio::new(num, 2);
        let mk = |c: &[i64]| {
            let e: Vec<Elem> = c.iter().map(|&x| Elem::from_int(s, x)).collect();
            MahlerFn::ser(s, 1, c.len() as u32 - 1, r, &e).unwrap()
        };
        let (f, g) = (mk(&fa), mk(&fb));
        let (mf, mg) = (f.global_offset(r).unwrap(), g.global_offset(r).unwrap());
        let h = f.mul(&g).unwrap();
        for s2 in [r, r / 2, Ratio::from_integer(0)] {
            let rep = h.decay_report(s2);
            prop_assert!(rep.certified);
            prop_assert!(rep.witness.iter().all(|&(_, m)| m >= mf + mg));
        }
    }

    #[test]
    fn truncation_keeps_a_valid_tail(c in proptest::collection::vec(-40i64..40, 2..9), cut in 0u32..6) {
        let s = RingSpec::zp(3, 8);
        let f = MahlerFn::from_ints(s, &c);
        let t = f.truncate(cut);
        let floor = t.tail().offset_at(Ratio::from_integer(0)).unwrap();
        for (n, x) in c.iter().enumerate().skip(cut as usize + 1) {
            let v = Elem::from_int(s, *x);
            prop_assert!(v.is_zero() || v.lo() >= floor);
            if let Tail::Finite { degree, .. } = t.tail() {
                prop_assert!(n as u32 <= degree);
            }
        }
        prop_assert_eq!(t.tail() == Tail::Zero, cut as usize + 1 >= c.len());
    }
}
