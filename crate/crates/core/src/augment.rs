//! Deterministic expansion of a keyword subset into a fixed index space.
//!
//! Each keyword owns a contiguous block of indices whose length is its
//! largest-remainder quota of the capacity. Both endpoints recompute the
//! augmented sets from the shared catalog, so the expansion must be exactly
//! reproducible: no sampling, no floating-point order dependence beyond the
//! quota products themselves.

use thiserror::Error;

use crate::catalog::{KeywordCatalog, KeywordSubset, SubsetRole};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("capacity {capacity} is smaller than the {entries} keywords")]
    CapacityTooSmall { capacity: u32, entries: usize },
    #[error("index {index} out of range (capacity {capacity})")]
    IndexOutOfRange { index: u32, capacity: u32 },
    #[error("keyword '{0}' not in augmented subset")]
    UnknownKeyword(String),
}

/// One keyword's contiguous index block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub surface: String,
    pub base: u32,
    pub length: u32,
}

/// A keyword subset expanded to `capacity` index slots.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSubset {
    pub role: SubsetRole,
    pub capacity: u32,
    pub index_width: u8,
    pub blocks: Vec<Block>,
}

impl AugmentedSubset {
    /// Surface of the keyword whose block contains `index`.
    pub fn keyword_at(&self, index: u32) -> Result<&str, AugmentError> {
        if index >= self.capacity {
            return Err(AugmentError::IndexOutOfRange {
                index,
                capacity: self.capacity,
            });
        }
        // Last block whose base <= index.
        let pos = self.blocks.partition_point(|b| b.base <= index) - 1;
        Ok(&self.blocks[pos].surface)
    }

    /// Block descriptor for a canonical surface.
    pub fn block_of(&self, surface: &str) -> Result<&Block, AugmentError> {
        self.blocks
            .iter()
            .find(|b| b.surface == surface)
            .ok_or_else(|| AugmentError::UnknownKeyword(surface.to_string()))
    }
}

/// Expand `subset` into `capacity` slots by largest-remainder apportionment.
///
/// Every keyword gets `floor(p_i * capacity)` slots (at least 1); leftover
/// slots go one each to the largest fractional remainders, ties broken by
/// earlier catalog position.
pub fn augment(subset: &KeywordSubset, capacity: u32) -> Result<AugmentedSubset, AugmentError> {
    let n = subset.entries.len();
    if (capacity as usize) < n || n == 0 {
        return Err(AugmentError::CapacityTooSmall {
            capacity,
            entries: n,
        });
    }

    let quotas: Vec<f64> = subset
        .entries
        .iter()
        .map(|k| k.probability * capacity as f64)
        .collect();
    let mut lengths: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u64 = lengths.iter().map(|&l| l as u64).sum();

    // Standard largest remainder: one extra slot each to the biggest
    // fractional remainders, earlier position winning ties.
    let mut leftover = (capacity as u64).saturating_sub(assigned);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut i = 0;
    while leftover > 0 {
        lengths[order[i % n]] += 1;
        leftover -= 1;
        i += 1;
    }

    // Enforce the minimum length of 1 afterwards, so a bumped entry never
    // also holds a leftover slot; take the slots back from the largest
    // surpluses, never dropping anyone below 1.
    let mut deficit = lengths.iter().filter(|&&l| l == 0).count() as u64;
    for length in &mut lengths {
        if *length == 0 {
            *length = 1;
        }
    }
    while deficit > 0 {
        let victim = (0..n)
            .filter(|&i| lengths[i] > 1)
            .max_by(|&a, &b| {
                let sa = lengths[a] as f64 - quotas[a];
                let sb = lengths[b] as f64 - quotas[b];
                sa.partial_cmp(&sb).unwrap().then(b.cmp(&a))
            })
            .expect("capacity >= n guarantees a shaveable block");
        lengths[victim] -= 1;
        deficit -= 1;
    }

    let mut blocks = Vec::with_capacity(n);
    let mut base = 0u32;
    for (kw, &length) in subset.entries.iter().zip(&lengths) {
        blocks.push(Block {
            surface: kw.surface.clone(),
            base,
            length,
        });
        base += length;
    }
    debug_assert_eq!(base, capacity);

    let index_width = 32 - (capacity - 1).max(1).leading_zeros();
    Ok(AugmentedSubset {
        role: subset.role,
        capacity,
        index_width: index_width as u8,
        blocks,
    })
}

/// The four full-scale augmented subsets recomputed from a catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCatalog {
    pub subject: AugmentedSubset,
    pub predicate: AugmentedSubset,
    pub object: AugmentedSubset,
    pub emotion: AugmentedSubset,
    pub fingerprint: String,
}

impl AugmentedCatalog {
    pub fn from_catalog(catalog: &KeywordCatalog) -> Result<AugmentedCatalog, AugmentError> {
        Ok(AugmentedCatalog {
            subject: augment(&catalog.subject, SubsetRole::Subject.capacity())?,
            predicate: augment(&catalog.predicate, SubsetRole::Predicate.capacity())?,
            object: augment(&catalog.object, SubsetRole::Object.capacity())?,
            emotion: augment(&catalog.emotion, SubsetRole::Emotion.capacity())?,
            fingerprint: catalog.fingerprint.clone(),
        })
    }

    pub fn subset(&self, role: SubsetRole) -> &AugmentedSubset {
        match role {
            SubsetRole::Subject => &self.subject,
            SubsetRole::Predicate => &self.predicate,
            SubsetRole::Object => &self.object,
            SubsetRole::Emotion => &self.emotion,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Keyword;

    fn subset_from(probs: &[f64]) -> KeywordSubset {
        // Bypass the role-count validation; augment itself only needs entries.
        KeywordSubset {
            role: SubsetRole::Subject,
            entries: probs
                .iter()
                .enumerate()
                .map(|(i, &p)| Keyword {
                    surface: format!("kw{i}"),
                    probability: p,
                })
                .collect(),
        }
    }

    #[test]
    fn exact_quotas() {
        let aug = augment(&subset_from(&[0.5, 0.25, 0.25]), 8).unwrap();
        let lengths: Vec<u32> = aug.blocks.iter().map(|b| b.length).collect();
        let bases: Vec<u32> = aug.blocks.iter().map(|b| b.base).collect();
        assert_eq!(lengths, vec![4, 2, 2]);
        assert_eq!(bases, vec![0, 4, 6]);
    }

    #[test]
    fn tied_remainders_go_to_earlier_position() {
        // Quotas 4.0 / 3.5 / 2.5: one leftover slot, remainders tie at 0.5.
        let aug = augment(&subset_from(&[0.4, 0.35, 0.25]), 10).unwrap();
        let lengths: Vec<u32> = aug.blocks.iter().map(|b| b.length).collect();
        assert_eq!(lengths, vec![4, 4, 2]);
    }

    #[test]
    fn uniform_full_scale() {
        let probs = vec![1.0 / 16.0; 16];
        let aug = augment(&subset_from(&probs), 1 << 18).unwrap();
        for b in &aug.blocks {
            assert_eq!(b.length, 16384);
        }
        assert_eq!(aug.index_width, 18);
    }

    #[test]
    fn capacity_too_small() {
        let err = augment(&subset_from(&[0.5, 0.3, 0.2]), 2).unwrap_err();
        assert!(matches!(err, AugmentError::CapacityTooSmall { .. }));
    }

    #[test]
    fn keyword_at_walks_blocks() {
        let aug = augment(&subset_from(&[0.5, 0.25, 0.25]), 8).unwrap();
        assert_eq!(aug.keyword_at(0).unwrap(), "kw0");
        assert_eq!(aug.keyword_at(5).unwrap(), "kw1");
        assert_eq!(aug.keyword_at(7).unwrap(), "kw2");
        assert!(matches!(
            aug.keyword_at(8),
            Err(AugmentError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn block_of_descriptor() {
        let aug = augment(&subset_from(&[0.5, 0.25, 0.25]), 8).unwrap();
        let b = aug.block_of("kw1").unwrap();
        assert_eq!((b.base, b.length), (4, 2));
        assert_eq!(aug.block_of("kw0").unwrap().base, 0);
        assert!(matches!(
            aug.block_of("zzz"),
            Err(AugmentError::UnknownKeyword(_))
        ));
    }

    #[test]
    fn minimum_length_one_for_tiny_probability() {
        let mut probs = vec![1e-7; 15];
        probs.push(1.0 - 15e-7);
        let aug = augment(&subset_from(&probs), 1 << 18).unwrap();
        for b in &aug.blocks[..15] {
            assert_eq!(b.length, 1);
        }
        let total: u64 = aug.blocks.iter().map(|b| b.length as u64).sum();
        assert_eq!(total, 1 << 18);
    }

    #[test]
    fn determinism() {
        let s = subset_from(&[0.37, 0.21, 0.19, 0.13, 0.1]);
        assert_eq!(augment(&s, 4096).unwrap(), augment(&s, 4096).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn round_trip_and_quota_bounds(
            raw in proptest::collection::vec(0.05f64..1.0, 2..=16),
            capacity in 64u32..=4096,
        ) {
            let total: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let subset = subset_from(&probs);
            let aug = augment(&subset, capacity).unwrap();

            let sum: u64 = aug.blocks.iter().map(|b| b.length as u64).sum();
            proptest::prop_assert_eq!(sum, capacity as u64);

            for (b, &p) in aug.blocks.iter().zip(&probs) {
                proptest::prop_assert!((b.length as f64 - p * capacity as f64).abs() < 1.0);
            }
            for i in 0..probs.len() {
                for j in 0..probs.len() {
                    if probs[i] > probs[j] {
                        proptest::prop_assert!(aug.blocks[i].length >= aug.blocks[j].length);
                    }
                }
            }
            for index in [0, capacity / 2, capacity - 1] {
                let surface = aug.keyword_at(index).unwrap().to_string();
                let b = aug.block_of(&surface).unwrap();
                proptest::prop_assert!(b.base <= index && index < b.base + b.length);
            }
        }
    }
}
