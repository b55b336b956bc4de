//! Affine lower bounds `v ≥ ⌈slope·m⌉ + offset` on valuations indexed by total degree.

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affine {
    pub slope: Ratio<i64>,
    pub offset: i64,
}

impl Affine {
    pub fn new(slope: Ratio<i64>, offset: i64) -> Self {
        Affine { slope, offset }
    }

    pub fn at(&self, m: i64) -> i64 {
        ceil_mul(self.slope, m) + self.offset
    }

    /// Smallest `m` with `at(m) ≥ target`, if the slope is positive.
    pub fn reach(&self, target: i64) -> Option<i64> {
        if *self.slope.numer() <= 0 {
            return None;
        }
        let mut m = 0;
        while self.at(m) < target {
            m += 1;
        }
        Some(m)
    }
}

pub fn ceil_mul(r: Ratio<i64>, m: i64) -> i64 {
    (r * m).ceil().to_integer()
}

/// Parses `"3"`, `"1/2"` or `"-2/3"`.
pub fn parse_ratio(s: &str) -> Option<Ratio<i64>> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (i64, i64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            if b == 0 {
                None
            } else {
                Some(Ratio::new(a, b))
            }
        }
        None => s.parse().ok().map(Ratio::from_integer),
    }
}

pub fn ratio_string(r: Ratio<i64>) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        let g = r.numer().gcd(r.denom());
        format!("{}/{}", r.numer() / g, r.denom() / g)
    }
}
