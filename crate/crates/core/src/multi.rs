//! Multi-indices `n ∈ N^k` with `Σn ≤ D`, in graded order.

use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct MultiIndices {
    k: usize,
    d: u32,
    list: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl MultiIndices {
    pub fn new(k: usize, d: u32) -> Self {
        let mut list = Vec::new();
        for total in 0..=d {
            let mut cur = vec![0u32; k];
            push_with_total(&mut list, &mut cur, 0, total);
        }
        let index = list.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        MultiIndices { k, d, list, index }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cutoff(&self) -> u32 {
        self.d
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.list[i]
    }

    pub fn position(&self, n: &[u32]) -> Option<usize> {
        self.index.get(n).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.list.iter().map(|v| v.as_slice())
    }

    /// Total degree of the `i`-th index.
    pub fn degree(&self, i: usize) -> u32 {
        self.list[i].iter().sum()
    }
}

fn push_with_total(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if cur.is_empty() {
        if left == 0 {
            out.push(vec![]);
        }
        return;
    }
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for a in (0..=left).rev() {
        cur[pos] = a;
        push_with_total(out, cur, pos + 1, left - a);
    }
    cur[pos] = 0;
}

/// Row-major enumeration of the box `{0..=side-1}^k`, last coordinate fastest.
pub fn box_points(k: usize, side: u32) -> Vec<Vec<u32>> {
    let total = (side as usize).pow(k as u32);
    (0..total)
        .map(|mut t| {
            let mut z = vec![0u32; k];
            for c in (0..k).rev() {
                z[c] = (t % side as usize) as u32;
                t /= side as usize;
            }
            z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(MultiIndices::new(1, 5).len(), 6);
        assert_eq!(MultiIndices::new(2, 2).len(), 6);
        assert_eq!(MultiIndices::new(3, 2).len(), 10);
        let m = MultiIndices::new(2, 3);
        for (i, n) in m.iter().enumerate() {
            assert_eq!(m.position(n), Some(i));
        }
    }
}
