//! Permutations of `{1..n}`, stored 0-based.

use rand::Rng;

use crate::{Error, Result};

/// Maximum size accepted by [`enumerate`]; 8! = 40320 permutations keep an
/// exhaustive pass over all of them well under a second, 9! does not.
pub const ENUMERATION_CAP: usize = 8;

/// A permutation of `{0, 1, ..., n-1}`.
///
/// Index `i` maps to `perm[i]`. The 1-based convention used in the math
/// (`pi(i) >= i` and friends) translates as `perm[i] >= i` on 0-based
/// indices, which is how the rest of the crate consumes it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    /// Validates that `images` is a bijection on `{0..n-1}`.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &img in &images {
            if img >= n {
                return Err(Error::InvalidPermutation(format!(
                    "image {} out of range for n={}",
                    img, n
                )));
            }
            if seen[img] {
                return Err(Error::InvalidPermutation(format!("duplicate image {}", img)));
            }
            seen[img] = true;
        }
        Ok(Self(images))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// `pi(i) = n + 1 - i` in 1-based terms.
    pub fn reversal(n: usize) -> Self {
        Self((0..n).rev().collect())
    }

    /// Uniform random permutation via Fisher-Yates on the given stream.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut v: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            v.swap(i, j);
        }
        Self(v)
    }

    /// In-place Fisher-Yates reusing an existing buffer; avoids the
    /// allocation when drawing millions of permutations.
    pub fn random_into<R: Rng + ?Sized>(buf: &mut Vec<usize>, n: usize, rng: &mut R) {
        buf.clear();
        buf.extend(0..n);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            buf.swap(i, j);
        }
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Iterator over all `n!` permutations in Heap's order.
///
/// Returns [`Error::TooLarge`] for `n > 8`; exact-moment oracles are the
/// only intended consumer and they live at desk scale.
pub fn enumerate(n: usize) -> Result<Permutations> {
    if n > ENUMERATION_CAP {
        return Err(Error::TooLarge(n));
    }
    Ok(Permutations {
        items: (0..n).collect(),
        counters: vec![0; n],
        depth: 0,
        started: false,
    })
}

/// Total count `n!` as `u64` (valid for `n <= 20`).
pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

pub struct Permutations {
    items: Vec<usize>,
    counters: Vec<usize>,
    depth: usize,
    started: bool,
}

impl Iterator for Permutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        if !self.started {
            self.started = true;
            return Some(Permutation(self.items.clone()));
        }
        // Heap's algorithm, iterative form.
        while self.depth < self.items.len() {
            if self.counters[self.depth] < self.depth {
                if self.depth.is_multiple_of(2) {
                    self.items.swap(0, self.depth);
                } else {
                    self.items.swap(self.counters[self.depth], self.depth);
                }
                self.counters[self.depth] += 1;
                self.depth = 0;
                return Some(Permutation(self.items.clone()));
            } else {
                self.counters[self.depth] = 0;
                self.depth += 1;
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn enumerate_visits_each_once() {
        for n in 0..=5 {
            let all: Vec<_> = enumerate(n).unwrap().collect();
            assert_eq!(all.len(), factorial(n) as usize);
            let distinct: HashSet<_> = all.iter().map(|p| p.as_slice().to_vec()).collect();
            assert_eq!(distinct.len(), all.len());
        }
    }

    #[test]
    fn enumerate_rejects_large_n() {
        assert!(matches!(enumerate(9), Err(Error::TooLarge(9))));
    }

    #[test]
    fn new_rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert!(Permutation::new(vec![1, 0]).is_ok());
    }

    #[test]
    fn n_equals_one_is_always_identity() {
        let mut rng = rand::rng();
        for _ in 0..10 {
            assert_eq!(Permutation::random(1, &mut rng).as_slice(), &[0]);
        }
    }
}
