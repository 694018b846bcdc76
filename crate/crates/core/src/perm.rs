//! Permutations and injections: the index algebra driving the switching
//! network and record alignment.

use crate::crypto::RandomSource;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PermError {
    #[error("size must be at least 1")]
    InvalidSize,
    #[error("duplicate index {index} at position {position}")]
    DuplicateIndex { index: usize, position: usize },
    #[error("index {index} at position {position} out of range (codomain {codomain})")]
    OutOfRange {
        index: usize,
        position: usize,
        codomain: usize,
    },
    #[error("dimension mismatch: injection codomain {expected}, permutation length {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// A bijection on [n]; `map[i]` is the image of i.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn from_map(map: Vec<usize>) -> Result<Permutation, PermError> {
        if map.is_empty() {
            return Err(PermError::InvalidSize);
        }
        let n = map.len();
        let mut seen = vec![false; n];
        for (position, &index) in map.iter().enumerate() {
            if index >= n {
                return Err(PermError::OutOfRange {
                    index,
                    position,
                    codomain: n,
                });
            }
            if seen[index] {
                return Err(PermError::DuplicateIndex { index, position });
            }
            seen[index] = true;
        }
        Ok(Permutation { map })
    }

    pub fn identity(n: usize) -> Permutation {
        Permutation {
            map: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    /// Returns q with q[self[i]] = i.
    pub fn invert(&self) -> Permutation {
        let mut inv = vec![0usize; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }

    /// Permutes `items` so that output position i holds `items[self[i]]`.
    pub fn select<T: Clone>(&self, items: &[T]) -> Vec<T> {
        assert_eq!(items.len(), self.map.len());
        self.map.iter().map(|&j| items[j].clone()).collect()
    }
}

/// Uniform draw from S_n via Fisher-Yates over the CSPRNG stream.
pub fn random_permutation(n: usize, rng: &mut RandomSource) -> Result<Permutation, PermError> {
    if n == 0 {
        return Err(PermError::InvalidSize);
    }
    let mut map: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.index(i + 1);
        map.swap(i, j);
    }
    Ok(Permutation { map })
}

/// An injection [c] -> [m]: distinct entries, each below the codomain size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Injection {
    map: Vec<usize>,
    codomain_size: usize,
}

impl Injection {
    pub fn from_map(map: Vec<usize>, codomain_size: usize) -> Result<Injection, PermError> {
        let inj = Injection { map, codomain_size };
        inj.validate()?;
        Ok(inj)
    }

    pub fn domain_size(&self) -> usize {
        self.map.len()
    }

    pub fn codomain_size(&self) -> usize {
        self.codomain_size
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    /// Structured check: entries distinct and within the codomain.
    pub fn validate(&self) -> Result<(), PermError> {
        let mut seen = std::collections::HashSet::new();
        for (position, &index) in self.map.iter().enumerate() {
            if index >= self.codomain_size {
                return Err(PermError::OutOfRange {
                    index,
                    position,
                    codomain: self.codomain_size,
                });
            }
            if !seen.insert(index) {
                return Err(PermError::DuplicateIndex { index, position });
            }
        }
        Ok(())
    }
}

/// Computes rho2 with rho2(i) = rho1^{-1}(pi(i)), so rho1(rho2(i)) = pi(i).
pub fn compose_rho2(pi: &Injection, rho1: &Permutation) -> Result<Injection, PermError> {
    if pi.codomain_size() != rho1.len() {
        return Err(PermError::DimensionMismatch {
            expected: pi.codomain_size(),
            actual: rho1.len(),
        });
    }
    let inv = rho1.invert();
    let map = pi.as_slice().iter().map(|&v| inv.apply(v)).collect();
    Injection::from_map(map, rho1.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> RandomSource {
        RandomSource::from_seed([11u8; 32])
    }

    #[test]
    fn random_permutation_edge_cases() {
        let mut r = rng();
        assert_eq!(random_permutation(1, &mut r).unwrap().as_slice(), &[0]);
        assert_eq!(random_permutation(0, &mut r), Err(PermError::InvalidSize));
        for _ in 0..50 {
            let p = random_permutation(64, &mut r).unwrap();
            assert!(Permutation::from_map(p.as_slice().to_vec()).is_ok());
        }
    }

    #[test]
    fn random_permutation_uniform_on_s3() {
        // 6000 draws over S_3: each of the 6 permutations within 1000 +- 150.
        let mut r = rng();
        let mut counts = std::collections::HashMap::new();
        for _ in 0..6000 {
            let p = random_permutation(3, &mut r).unwrap();
            *counts.entry(p.as_slice().to_vec()).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (p, c) in counts {
            assert!((850..=1150).contains(&c), "perm {p:?} drawn {c} times");
        }
    }

    #[test]
    fn random_permutation_reproducible() {
        let a = random_permutation(100, &mut RandomSource::from_seed([1u8; 32])).unwrap();
        let b = random_permutation(100, &mut RandomSource::from_seed([1u8; 32])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invert_round_trips() {
        let mut r = rng();
        assert_eq!(
            Permutation::identity(5).invert(),
            Permutation::identity(5)
        );
        let p = Permutation::from_map(vec![2, 0, 1]).unwrap();
        assert_eq!(p.invert().as_slice(), &[1, 2, 0]);
        for _ in 0..20 {
            let p = random_permutation(128, &mut r).unwrap();
            let q = p.invert();
            for i in 0..128 {
                assert_eq!(q.apply(p.apply(i)), i);
            }
            assert_eq!(q.invert(), p);
        }
    }

    #[test]
    fn compose_rho2_satisfies_contract() {
        // rho1 = identity => rho2 = pi.
        let pi = Injection::from_map(vec![3, 0], 4).unwrap();
        let rho2 = compose_rho2(&pi, &Permutation::identity(4)).unwrap();
        assert_eq!(rho2.as_slice(), pi.as_slice());

        // Worked example: rho1 = [2,0,3,1], pi = [3,0] => rho2 = [2,1].
        let rho1 = Permutation::from_map(vec![2, 0, 3, 1]).unwrap();
        let rho2 = compose_rho2(&pi, &rho1).unwrap();
        assert_eq!(rho2.as_slice(), &[2, 1]);
        for i in 0..pi.domain_size() {
            assert_eq!(rho1.apply(rho2.apply(i)), pi.apply(i));
        }

        // Random instances, m=256, c=100.
        let mut r = rng();
        for _ in 0..20 {
            let rho1 = random_permutation(256, &mut r).unwrap();
            let targets = random_permutation(256, &mut r).unwrap();
            let pi = Injection::from_map(targets.as_slice()[..100].to_vec(), 256).unwrap();
            let rho2 = compose_rho2(&pi, &rho1).unwrap();
            for i in 0..100 {
                assert_eq!(rho1.apply(rho2.apply(i)), pi.apply(i));
            }
        }
    }

    #[test]
    fn compose_rho2_dimension_mismatch() {
        let pi = Injection::from_map(vec![0], 3).unwrap();
        let rho1 = Permutation::identity(4);
        assert!(matches!(
            compose_rho2(&pi, &rho1),
            Err(PermError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn validate_injection_reports_violations() {
        assert!(Injection::from_map(vec![0, 1, 2], 5).is_ok());
        assert_eq!(
            Injection::from_map(vec![1, 1], 3).unwrap_err(),
            PermError::DuplicateIndex {
                index: 1,
                position: 1
            }
        );
        assert_eq!(
            Injection::from_map(vec![4], 3).unwrap_err(),
            PermError::OutOfRange {
                index: 4,
                position: 0,
                codomain: 3
            }
        );
    }
}
