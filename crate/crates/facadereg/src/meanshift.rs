//! 1-D mean-shift clustering used to build the per-attribute model spaces.
//!
//! Uses a flat kernel with window radius equal to the bandwidth (the lower
//! bound on distinguishable attribute values), so the bandwidth semantics
//! stay literal: samples further apart than the bandwidth never attract
//! each other.

use crate::error::{Error, Result};
use crate::types::Attribute;

const SHIFT_TOLERANCE: f64 = 1e-6;
const MAX_ITERATIONS: usize = 200;

/// Candidate values for one attribute: the cluster centers found by mean
/// shift, plus the sample-to-center assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    pub attr: Attribute,
    /// Strictly ascending center values.
    pub centers: Vec<f64>,
    /// For each input sample, the index of its center.
    pub assignment: Vec<usize>,
    /// Bandwidth the space was built with.
    pub bandwidth: f64,
}

impl ModelSpace {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Flat-kernel mean shift over scalar samples.
///
/// Every sample is iterated to its mode; modes closer than `bandwidth / 2`
/// are merged, and each center is the mean of the samples that converged to
/// the merged mode. Deterministic for identical inputs.
pub fn mean_shift_1d(attr: Attribute, values: &[f64], bandwidth: f64) -> Result<ModelSpace> {
    if values.is_empty() {
        return Err(Error::EmptyDetections);
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::InvalidParams(format!(
            "mean-shift bandwidth must be positive and finite, got {bandwidth}"
        )));
    }

    let modes: Vec<f64> = values.iter().map(|&v| climb(values, v, bandwidth)).collect();

    // Group modes left to right; a gap >= bandwidth/2 starts a new group.
    let mut order: Vec<usize> = (0..modes.len()).collect();
    order.sort_by(|&a, &b| modes[a].total_cmp(&modes[b]).then(a.cmp(&b)));

    let merge_gap = bandwidth / 2.0;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last_mode = f64::NEG_INFINITY;
    for &i in &order {
        if groups.is_empty() || modes[i] - last_mode >= merge_gap {
            groups.push(vec![i]);
        } else {
            groups.last_mut().unwrap().push(i);
        }
        last_mode = modes[i];
    }

    // Center of a group is the mean of its member samples.
    let mut clusters: Vec<(f64, Vec<usize>)> = groups
        .into_iter()
        .map(|members| {
            let mean = anchored_mean(members.iter().map(|&i| values[i]));
            (mean, members)
        })
        .collect();
    clusters.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Equal centers collapse into one so the list stays strictly ascending.
    let mut merged: Vec<(f64, Vec<usize>)> = Vec::with_capacity(clusters.len());
    for (center, members) in clusters {
        match merged.last_mut() {
            Some((prev, prev_members)) if *prev == center => prev_members.extend(members),
            _ => merged.push((center, members)),
        }
    }

    let mut assignment = vec![0usize; values.len()];
    let centers: Vec<f64> = merged
        .iter()
        .enumerate()
        .map(|(k, (center, members))| {
            for &i in members {
                assignment[i] = k;
            }
            *center
        })
        .collect();

    Ok(ModelSpace {
        attr,
        centers,
        assignment,
        bandwidth,
    })
}

/// Mean anchored on the first element: a + sum(v - a) / n. Exact when all
/// inputs are equal, which keeps re-clustering of already-snapped values a
/// fixed point.
fn anchored_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut iter = values.into_iter();
    let anchor = iter.next().expect("mean of at least one value");
    let mut sum = 0.0;
    let mut count = 1usize;
    for v in iter {
        sum += v - anchor;
        count += 1;
    }
    anchor + sum / count as f64
}

/// Iterates one seed to its mode: repeatedly replace the estimate with the
/// mean of all samples within the window radius.
fn climb(values: &[f64], seed: f64, bandwidth: f64) -> f64 {
    let mut m = seed;
    for _ in 0..MAX_ITERATIONS {
        // The window always contains the seed's own chain, so it is never
        // empty.
        let next = anchored_mean(values.iter().copied().filter(|v| (v - m).abs() <= bandwidth));
        let shift = (next - m).abs();
        m = next;
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space(values: &[f64], bw: f64) -> ModelSpace {
        mean_shift_1d(Attribute::X, values, bw).unwrap()
    }

    #[test]
    fn identical_values_collapse_to_one_center() {
        let s = space(&[7.0, 7.0, 7.0], 4.0);
        assert_eq!(s.centers, vec![7.0]);
        assert_eq!(s.assignment, vec![0, 0, 0]);
    }

    #[test]
    fn two_separated_groups_yield_their_means() {
        let s = space(&[10.0, 11.0, 12.0, 40.0, 41.0], 4.0);
        assert_eq!(s.centers, vec![11.0, 40.5]);
        assert_eq!(s.assignment, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn singleton() {
        let s = space(&[5.0], 3.0);
        assert_eq!(s.centers, vec![5.0]);
        assert_eq!(s.assignment, vec![0]);
    }

    #[test]
    fn empty_input_errors() {
        assert!(matches!(
            mean_shift_1d(Attribute::X, &[], 4.0),
            Err(Error::EmptyDetections)
        ));
    }

    #[test]
    fn invalid_bandwidth_errors() {
        assert!(mean_shift_1d(Attribute::X, &[1.0], 0.0).is_err());
        assert!(mean_shift_1d(Attribute::X, &[1.0], -2.0).is_err());
    }

    #[test]
    fn unsorted_input_gets_ascending_centers() {
        let s = space(&[41.0, 10.0, 40.0, 12.0, 11.0], 4.0);
        assert_eq!(s.centers, vec![11.0, 40.5]);
        assert_eq!(s.assignment, vec![1, 0, 1, 0, 0]);
    }

    /// Builds `groups` clusters of `per_group` samples with intra-group gaps
    /// below the bandwidth and inter-group pitch far above it.
    fn grid_samples(groups: usize, per_group: usize, pitch: f64, jitter: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for g in 0..groups {
            let base = 100.0 + g as f64 * pitch;
            for j in 0..per_group {
                // Deterministic spread inside [-jitter, jitter].
                let frac = if per_group == 1 {
                    0.0
                } else {
                    j as f64 / (per_group - 1) as f64 * 2.0 - 1.0
                };
                out.push(base + frac * jitter);
            }
        }
        out
    }

    proptest! {
        /// Separation soundness: well-separated groups are recovered exactly,
        /// and every sample is assigned within the bandwidth.
        #[test]
        fn separated_groups_are_recovered(
            groups in 1usize..7,
            per_group in 1usize..6,
            bw in 2.0..6.0f64,
        ) {
            let pitch = 3.5 * bw + 10.0;
            let jitter = 0.4 * bw;
            let values = grid_samples(groups, per_group, pitch, jitter);
            let s = space(&values, bw);
            prop_assert_eq!(s.centers.len(), groups);
            for (i, &v) in values.iter().enumerate() {
                prop_assert!((v - s.centers[s.assignment[i]]).abs() <= bw);
            }
        }

        /// Determinism and compression: identical inputs give identical
        /// spaces, and there are never more centers than samples.
        #[test]
        fn deterministic_and_compressive(
            values in prop::collection::vec(0.0..640.0f64, 1..50),
            bw in 1.0..8.0f64,
        ) {
            let a = space(&values, bw);
            let b = space(&values, bw);
            prop_assert_eq!(&a, &b);
            prop_assert!(a.centers.len() <= values.len());
            prop_assert!(!a.centers.is_empty());
            for w in a.centers.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
        }
    }
}
