//! Dense matrices over a ring model.

use crate::rings::{Elem, RingError, RingSpec};

pub type Mat = Vec<Vec<Elem>>;

pub fn identity(ring: RingSpec, n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| if i == j { Elem::one(ring) } else { Elem::zero(ring) }).collect()).collect()
}

pub fn from_ints(ring: RingSpec, rows: &[Vec<i64>]) -> Mat {
    rows.iter().map(|r| r.iter().map(|&x| Elem::from_int(ring, x)).collect()).collect()
}

/// Sum accumulator that starts exact and only loses precision through its summands.
pub fn acc_zero(ring: RingSpec) -> Elem {
    Elem::zero_at(ring, i64::MAX / 4)
}

pub fn mul(a: &[Vec<Elem>], b: &[Vec<Elem>]) -> Result<Mat, RingError> {
    let ring = a[0][0].spec();
    let inner = b.len();
    let cols = b[0].len();
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let mut s = acc_zero(ring);
                    for l in 0..inner {
                        s = s.add(&row[l].mul(&b[l][j])?)?;
                    }
                    Ok(s)
                })
                .collect()
        })
        .collect()
}

pub fn sub(a: &Mat, b: &Mat) -> Result<Mat, RingError> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u.sub(v)).collect()).collect()
}

pub fn scale(a: &Mat, c: &Elem) -> Result<Mat, RingError> {
    a.iter().map(|r| r.iter().map(|x| x.mul(c)).collect()).collect()
}

pub fn trace(a: &Mat) -> Result<Elem, RingError> {
    let mut s = acc_zero(a[0][0].spec());
    for (i, r) in a.iter().enumerate() {
        s = s.add(&r[i])?;
    }
    Ok(s)
}

pub fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

/// Entrywise agreement at the joint precision.
pub fn agrees(a: &[Vec<Elem>], b: &[Vec<Elem>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(u, v)| u.agrees(v)))
}

/// All permutations of `0..n` with their signs.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, bool)> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    heap(n, &mut p, &mut out, true);
    out
}

fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, bool)>, even: bool) -> bool {
    if k <= 1 {
        out.push((p.clone(), even));
        return even;
    }
    let mut even = even;
    for i in 0..k - 1 {
        even = heap(k - 1, p, out, even);
        if k % 2 == 0 {
            p.swap(i, k - 1);
        } else {
            p.swap(0, k - 1);
        }
        even = !even;
    }
    heap(k - 1, p, out, even)
}

/// Determinant by the Leibniz expansion; meant for small blocks.
pub fn det_leibniz(a: &Mat) -> Result<Elem, RingError> {
    let n = a.len();
    let ring = a[0][0].spec();
    let mut s = acc_zero(ring);
    for (p, even) in permutations(n) {
        let mut t = Elem::one(ring);
        for (i, &j) in p.iter().enumerate() {
            t = t.mul(&a[i][j])?;
        }
        s = if even { s.add(&t)? } else { s.sub(&t)? };
    }
    Ok(s)
}

/// Row echelon data over a field-like model: pivot `(row, col)` pairs, pivots of least valuation first.
pub fn pivots(a: &Mat) -> Result<Vec<(usize, usize)>, RingError> {
    let mut m = a.clone();
    let rows = m.len();
    let cols = m[0].len();
    let mut used = vec![false; rows];
    let mut out = Vec::new();
    for c in 0..cols {
        let best = (0..rows).filter(|&r| !used[r] && !m[r][c].is_zero()).min_by_key(|&r| m[r][c].lo());
        let Some(pr) = best else { continue };
        used[pr] = true;
        out.push((pr, c));
        let inv = m[pr][c].inv()?;
        for r in 0..rows {
            if r == pr || m[r][c].is_zero() {
                continue;
            }
            let f = m[r][c].mul(&inv)?;
            for cc in c..cols {
                let t = f.mul(&m[pr][cc])?;
                m[r][cc] = m[r][cc].sub(&t)?;
            }
        }
    }
    Ok(out)
}

/// Inverse over a field-like model by Gauss–Jordan elimination.
pub fn inverse(a: &Mat) -> Result<Mat, RingError> {
    let n = a.len();
    let ring = a[0][0].spec();
    let mut m: Mat = a.iter().cloned().zip(identity(ring, n)).map(|(mut r, i)| {
        r.extend(i);
        r
    }).collect();
    for c in 0..n {
        let pr = (c..n)
            .filter(|&r| !m[r][c].is_zero())
            .min_by_key(|&r| m[r][c].lo())
            .ok_or(RingError::ZeroDivisor)?;
        m.swap(c, pr);
        let inv = m[c][c].inv()?;
        for x in m[c].iter_mut() {
            *x = x.mul(&inv)?;
        }
        for r in 0..n {
            if r == c || m[r][c].is_zero() {
                continue;
            }
            let f = m[r][c].clone();
            for cc in 0..2 * n {
                let t = f.mul(&m[c][cc])?;
                m[r][cc] = m[r][cc].sub(&t)?;
            }
        }
    }
    Ok(m.into_iter().map(|r| r[n..].to_vec()).collect())
}
