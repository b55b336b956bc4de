use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use proptest::prelude::*;
use tate_spectral::rings::{Elem, RingSpec};
use tate_spectral::weights::{gamma_exponent, generator, standard_tau, DatumType, Factor, RootDatum, WeightChar, WeightError};

const ALL: [DatumType; 4] = [DatumType::A1, DatumType::A2, DatumType::C2, DatumType::GL2];

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lengths(t: DatumType) -> Vec<usize> {
    let mut l: Vec<usize> = RootDatum::new(t).weyl_group().iter().map(|w| w.length).collect();
    l.sort();
    l
}

#[test]
fn weyl_groups() {
    assert_eq!(lengths(DatumType::A1), vec![0, 1]);
    assert_eq!(lengths(DatumType::GL2), vec![0, 1]);
    assert_eq!(lengths(DatumType::A2), vec![0, 1, 1, 2, 2, 3]);
    assert_eq!(lengths(DatumType::C2), vec![0, 1, 1, 2, 2, 3, 3, 4]);
    // C2 acts on Z² as the signed permutation matrices
    let got: BTreeSet<Vec<Vec<i64>>> = RootDatum::new(DatumType::C2).weyl_group().into_iter().map(|w| w.matrix).collect();
    let mut want = BTreeSet::new();
    for (a, b) in [(0, 1), (1, 0)] {
        for s in [-1, 1] {
            for t in [-1, 1] {
                let mut m = vec![vec![0i64; 2]; 2];
                m[0][a] = s;
                m[1][b] = t;
                want.insert(m);
            }
        }
    }
    assert_eq!(got, want);
    // A2 acts by permuting coordinates
    let got: BTreeSet<Vec<Vec<i64>>> = RootDatum::new(DatumType::A2).weyl_group().into_iter().map(|w| w.matrix).collect();
    assert_eq!(got.len(), 6);
    assert!(got.iter().all(|m| m.iter().all(|r| r.iter().filter(|&&x| x == 1).count() == 1 && r.iter().all(|&x| x == 0 || x == 1))));
}

#[test]
fn root_data_pairings() {
    for t in ALL {
        let d = RootDatum::new(t);
        for (a, c) in d.roots.iter().zip(&d.coroots) {
            assert_eq!(dot(a, c), 2, "{t:?}");
        }
        for &s in &d.simple {
            assert_eq!(dot(&d.coroots[s], &d.two_rho), 2, "{t:?}");
        }
        assert_eq!(d.positive.len() * 2, d.roots.len());
    }
}

#[test]
fn rho_shift_is_integral() {
    for t in ALL {
        let d = RootDatum::new(t);
        for mu in small_weights(d.dim, 3) {
            for w in d.weyl_group() {
                let x: Vec<i64> = mu.iter().zip(&d.two_rho).map(|(m, r)| 2 * m + r).collect();
                let wx: Vec<i64> = w.matrix.iter().map(|r| dot(r, &x)).collect();
                // w(μ + ρ) − ρ, doubled
                assert!(wx.iter().zip(&d.two_rho).all(|(a, r)| (a - r) % 2 == 0), "{t:?} {mu:?}");
            }
        }
    }
}

fn small_weights(dim: usize, b: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out.into_iter().flat_map(|v| (-b..=b).map(move |x| [v.clone(), vec![x]].concat())).collect();
    }
    out
}

#[test]
fn n_bound_examples() {
    let gl2 = RootDatum::new(DatumType::GL2);
    let tau = standard_tau(DatumType::GL2);
    for k in 0..=20 {
        assert_eq!(gl2.n_bound(&[k, 0], &tau).unwrap(), k + 1);
    }
    assert_eq!(RootDatum::new(DatumType::A1).n_bound(&[0], &standard_tau(DatumType::A1)).unwrap(), 1);
    for t in ALL {
        let d = RootDatum::new(t);
        let zero = vec![0; d.dim];
        for mu in small_weights(d.dim, 2).into_iter().filter(|m| d.is_dominant(m)) {
            assert_eq!(d.n_bound(&mu, &zero).unwrap(), 0);
        }
    }
    assert!(matches!(gl2.n_bound(&[0, 3], &tau), Err(WeightError::NotDominant(_))));
    assert!(matches!(gl2.n_bound(&[1], &tau), Err(WeightError::Rank { got: 1, want: 2 })));
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// `max_{w ≠ 1} ⟨(w − 1)(μ + ρ), τ⟩` with `W = S₃` permuting coordinates.
fn a2_oracle(mu: &[i64], tau: &[i64]) -> i64 {
    let x: Vec<i64> = mu.iter().zip([2, 0, -2]).map(|(m, r)| 2 * m + r).collect();
    permutations(3)
        .into_iter()
        .filter(|p| *p != vec![0, 1, 2])
        .map(|p| {
            let wx: Vec<i64> = p.iter().map(|&i| x[i]).collect();
            dot(&wx.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>(), tau) / 2
        })
        .max()
        .unwrap()
}

#[test]
fn n_bound_matches_permutation_oracle() {
    let d = RootDatum::new(DatumType::A2);
    for tau in [vec![0, 1, 2], vec![0, 0, 1], vec![0, 2, 3]] {
        for a in 0..8 {
            for b in 0..=a {
                let mu = [a, b, 0];
                assert_eq!(d.n_bound(&mu, &tau).unwrap(), a2_oracle(&mu, &tau), "{mu:?} {tau:?}");
            }
        }
    }
}

#[test]
fn n_bound_is_monotone() {
    for t in ALL {
        let d = RootDatum::new(t);
        let tau = standard_tau(t);
        let dominant: Vec<Vec<i64>> = small_weights(d.dim, 4).into_iter().filter(|m| d.is_dominant(m)).collect();
        let steps: Vec<Vec<i64>> = small_weights(d.dim, 1).into_iter().filter(|v| d.is_dominant(v) && v.iter().any(|&x| x != 0)).collect();
        for mu in &dominant {
            for v in &steps {
                let nu: Vec<i64> = mu.iter().zip(v).map(|(a, b)| a + b).collect();
                // N = p^(−e): larger e is a smaller N
                assert!(d.n_bound(&nu, &tau).unwrap() >= d.n_bound(mu, &tau).unwrap(), "{t:?} {mu:?} → {nu:?}");
            }
        }
    }
    let gl2 = RootDatum::new(DatumType::GL2);
    let tau = standard_tau(DatumType::GL2);
    for k in 0..20 {
        assert!(gl2.n_bound(&[k + 1, 0], &tau).unwrap() > gl2.n_bound(&[k, 0], &tau).unwrap());
    }
}

#[test]
fn algebraic_character() {
    let s = RingSpec::qp(3, 8);
    let w = WeightChar::algebraic(s, &[2]);
    assert_eq!(w.algebraic_weight(), Some(vec![2]));
    assert!(w.eval_units(&[5]).unwrap().value.eq_int(25));
    // λ(γ^z) = 16^z has Mahler coefficients 15^n
    let f = w.restriction(6).unwrap();
    for n in 0..=6u32 {
        assert!(f.coeffs()[n as usize].agrees(&Elem::from_int(s, 15i64.pow(n))));
    }
    assert!(matches!(w.eval_units(&[6]), Err(WeightError::NotUnit(6))));
}

#[test]
fn boundary_character() {
    let s = RingSpec::fp_laurent(2, 10);
    let t1 = Elem::from_series(s, 0, &[1, 1], 10).unwrap();
    let w = WeightChar::new(s, vec![Factor::Generator(t1)]).unwrap();
    let f = w.restriction(9).unwrap();
    for n in 0..=9 {
        assert!(f.coeffs()[n].agrees(&Elem::from_series(s, n as i64, &[1], 10).unwrap()), "n={n}");
    }
    assert_eq!(w.algebraic_weight(), None);
}

#[test]
fn center_character() {
    let s = RingSpec::zp(3, 8);
    let w = WeightChar::new(s, vec![Factor::Generator(Elem::from_int(s, 4))]).unwrap();
    let f = w.restriction(7).unwrap();
    for n in 0..=7u32 {
        assert!(f.coeffs()[n as usize].agrees(&Elem::from_int(s, 3i64.pow(n))));
    }
    assert!(w.eval_units(&[4]).unwrap().value.eq_int(4));
    assert!(w.eval_units(&[7]).unwrap().value.eq_int(7));
    // λ(1) − 1 must be topologically nilpotent
    assert!(WeightChar::new(s, vec![Factor::Generator(Elem::from_int(s, 2))]).is_err());
}

fn teich_oracle(a: i64, p: u64, n: u32) -> BigInt {
    let m = BigInt::from(p).pow(n);
    let mut x = BigInt::from(a).mod_floor(&m);
    // x ↦ x^p converges to ω(a) in n steps
    for _ in 0..n + 1 {
        x = x.modpow(&BigInt::from(p), &m);
    }
    x
}

fn inverse_mod(x: &BigInt, m: &BigInt) -> BigInt {
    x.extended_gcd(m).x.mod_floor(m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn generator_exponent_recovers_units(a in 1i64..2000, p in prop::sample::select(vec![3u64, 5, 7])) {
        prop_assume!(a % p as i64 != 0);
        let n = 6u32;
        let m = BigInt::from(p).pow(n);
        let l = gamma_exponent(a, p, n).unwrap();
        let lhs = BigInt::from(generator(p)).modpow(&l, &m);
        let rhs = (BigInt::from(a) * inverse_mod(&teich_oracle(a, p, n), &m)).mod_floor(&m);
        prop_assert_eq!(lhs, rhs);
    }

    /// With `λ(γ) = γ^j`, `λ(a) = (a/ω(a))^j`.
    #[test]
    fn generator_character_on_units(a in 1i64..500, j in 0u32..4) {
        let p = 5u64;
        prop_assume!(a % 5 != 0);
        let s = RingSpec::zp(p, 6);
        let u = Elem::from_bigint(s, &BigInt::from(generator(p)).pow(j));
        let w = WeightChar::new(s, vec![Factor::Generator(u)]).unwrap();
        let ev = w.eval_units(&[a]).unwrap();
        let m = BigInt::from(p).pow(6);
        let want = (BigInt::from(a) * inverse_mod(&teich_oracle(a, p, 6), &m)).modpow(&BigInt::from(j), &m);
        prop_assert!(ev.certified);
        prop_assert!(ev.value.agrees(&Elem::from_bigint(s, &want)));
    }

    #[test]
    fn algebraic_is_multiplicative(a in 1i64..300, b in 1i64..300, k in 0u32..6) {
        prop_assume!(a % 3 != 0 && b % 3 != 0);
        let s = RingSpec::zp(3, 10);
        let w = WeightChar::algebraic(s, &[k]);
        let x = w.eval_units(&[a]).unwrap().value.mul(&w.eval_units(&[b]).unwrap().value).unwrap();
        prop_assert!(x.agrees(&w.eval_units(&[a * b]).unwrap().value));
        let one = w.eval_units(&[1]).unwrap().value;
        prop_assert!(one.agrees(&Elem::one(s)));
    }
}
