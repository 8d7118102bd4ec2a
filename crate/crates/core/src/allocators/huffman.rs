//! Huffman code lengths for station probability vectors.
//!
//! The lengths are used as channel-count ratios: they always satisfy the
//! Kraft inequality `Σ 2^(−l_i) ≤ 1`, with equality on dyadic inputs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::traffic::ProbabilityVector;

struct Subtree {
    prob: f64,
    /// Smallest station id in the subtree, the deterministic tie-breaker.
    min_station: usize,
    members: Vec<usize>,
}

impl PartialEq for Subtree {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Subtree {}

impl PartialOrd for Subtree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Subtree {
    // Reversed so the BinaryHeap pops the lowest probability first; ties go
    // to the subtree containing the lowest station id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .prob
            .total_cmp(&self.prob)
            .then(other.min_station.cmp(&self.min_station))
    }
}

/// Per-station Huffman tree depths.
///
/// Merges always take the two lowest-probability subtrees, preferring the
/// lower smallest-station-id on equal probability, so the assignment is
/// deterministic.
pub fn huffman_code_lengths(probs: &ProbabilityVector) -> Result<Vec<u32>> {
    if probs.len() < 2 {
        return Err(Error::InvalidInput(
            "huffman code lengths need at least two stations".into(),
        ));
    }
    for (station, &p) in probs.values().iter().enumerate() {
        if p <= 0.0 {
            return Err(Error::ZeroProbability { station });
        }
    }

    let mut depths = vec![0u32; probs.len()];
    let mut heap: BinaryHeap<Subtree> = probs
        .values()
        .iter()
        .enumerate()
        .map(|(station, &p)| Subtree {
            prob: p,
            min_station: station,
            members: vec![station],
        })
        .collect();

    while heap.len() > 1 {
        let first = heap.pop().expect("len > 1");
        let second = heap.pop().expect("len > 1");
        let mut members = first.members;
        members.extend(second.members);
        for &station in &members {
            depths[station] += 1;
        }
        heap.push(Subtree {
            prob: first.prob + second.prob,
            min_station: first.min_station.min(second.min_station),
            members,
        });
    }
    Ok(depths)
}

/// Left-hand side of the Kraft inequality for a set of code lengths.
pub fn kraft_sum(lengths: &[u32]) -> f64 {
    lengths.iter().map(|&l| 2.0f64.powi(-(l as i32))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::ProbabilitySource;

    fn probs(values: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(values.to_vec(), ProbabilitySource::External).unwrap()
    }

    #[test]
    fn textbook_dyadic_lengths() {
        let lengths = huffman_code_lengths(&probs(&[0.5, 0.25, 0.125, 0.125])).unwrap();
        assert_eq!(lengths, vec![1, 2, 3, 3]);
        assert_eq!(kraft_sum(&lengths), 1.0);
    }

    #[test]
    fn uniform_three_symbols() {
        // Tie-break merges stations 0 and 1 first, leaving station 2 at the root.
        let third = 1.0 / 3.0;
        let lengths = huffman_code_lengths(&probs(&[third, third, 1.0 - 2.0 * third])).unwrap();
        assert_eq!(lengths, vec![2, 2, 1]);
    }

    #[test]
    fn two_symbols() {
        assert_eq!(huffman_code_lengths(&probs(&[0.5, 0.5])).unwrap(), vec![1, 1]);
    }

    #[test]
    fn zero_probability_is_rejected() {
        let err = huffman_code_lengths(&probs(&[1.0, 0.0])).unwrap_err();
        match err {
            Error::ZeroProbability { station } => assert_eq!(station, 1),
            other => panic!("expected ZeroProbability, got {other:?}"),
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kraft_inequality_holds(
                raw in proptest::collection::vec(0.001f64..1.0, 2..16),
            ) {
                let probs = ProbabilityVector::from_weights(&raw, ProbabilitySource::External).unwrap();
                let lengths = huffman_code_lengths(&probs).unwrap();
                prop_assert!(kraft_sum(&lengths) <= 1.0 + 1e-12);
            }

            // Dyadic distributions meet the Kraft bound exactly and recover
            // the ideal lengths −log2(p).
            #[test]
            fn dyadic_inputs_reach_equality(splits in proptest::collection::vec(0usize..32, 1..12)) {
                // Grow a dyadic distribution by repeatedly halving one entry.
                let mut exponents: Vec<u32> = vec![1, 1];
                for &pick in &splits {
                    let idx = pick % exponents.len();
                    if exponents[idx] >= 12 {
                        continue;
                    }
                    exponents[idx] += 1;
                    let e = exponents[idx];
                    exponents.push(e);
                }
                let values: Vec<f64> = exponents.iter().map(|&e| 2.0f64.powi(-(e as i32))).collect();
                let probs = ProbabilityVector::new(values, ProbabilitySource::External).unwrap();
                let lengths = huffman_code_lengths(&probs).unwrap();
                prop_assert!((kraft_sum(&lengths) - 1.0).abs() < 1e-12);
                prop_assert_eq!(lengths, exponents);
            }
        }
    }
}
