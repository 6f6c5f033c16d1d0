//! Synthetic ground-truth generation: jittered grids, compressible layouts
//! with known model-space sizes, and dimension-matched benchmark instances.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pipeline::RegularizationParams;
use crate::types::{Attribute, BoundingBox, DetectionSet, PrimitiveClass};

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A rows x cols window grid with optional per-attribute jitter and dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Offset of the first box in both axes.
    pub origin: f64,
    pub pitch_x: f64,
    pub pitch_y: f64,
    pub box_w: f64,
    pub box_h: f64,
    /// Uniform jitter half-width applied to all four attributes.
    pub jitter: f64,
    /// Probability of dropping each box.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for SyntheticGridSpec {
    fn default() -> Self {
        SyntheticGridSpec {
            rows: 6,
            cols: 8,
            origin: 40.0,
            pitch_x: 60.0,
            pitch_y: 60.0,
            box_w: 30.0,
            box_h: 40.0,
            jitter: 0.0,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParams("grid needs rows > 0, cols > 0".into()));
        }
        if !(self.pitch_x > self.box_w) || !(self.pitch_y > self.box_h) {
            return Err(Error::InvalidParams(
                "pitch must exceed the box size".into(),
            ));
        }
        if !(self.jitter >= 0.0) || self.jitter >= self.pitch_x.min(self.pitch_y) / 4.0 {
            return Err(Error::InvalidParams(
                "jitter must be below a quarter pitch".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParams("dropout must be in [0, 1)".into()));
        }
        if !(self.origin >= 0.0) || !(self.box_w > 0.0) || !(self.box_h > 0.0) {
            return Err(Error::InvalidParams(
                "origin must be non-negative and box sizes positive".into(),
            ));
        }
        Ok(())
    }
}

/// Generates the (noisy, clean) detection pair for a grid spec. Seeded and
/// reproducible: a fixed seed yields bit-identical sets.
pub fn synth_grid(spec: &SyntheticGridSpec) -> Result<(DetectionSet, DetectionSet)> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed);
    let mut noisy = Vec::new();
    let mut clean = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let drop = spec.dropout > 0.0 && rng.random_range(0.0..1.0) < spec.dropout;
            let mut jit = || -> f64 {
                if spec.jitter > 0.0 {
                    rng.random_range(-spec.jitter..spec.jitter)
                } else {
                    0.0
                }
            };
            let (jx, jy, jw, jh) = (jit(), jit(), jit(), jit());
            if drop {
                continue;
            }
            let x = spec.origin + c as f64 * spec.pitch_x;
            let y = spec.origin + r as f64 * spec.pitch_y;
            clean.push(BoundingBox::new(
                PrimitiveClass::Window,
                1.0,
                x,
                y,
                spec.box_w,
                spec.box_h,
            )?);
            noisy.push(BoundingBox::new(
                PrimitiveClass::Window,
                1.0,
                x + jx,
                y + jy,
                spec.box_w + jw,
                spec.box_h + jh,
            )?);
        }
    }
    let width = (2.0 * spec.origin + spec.cols as f64 * spec.pitch_x + spec.jitter).ceil() as u32;
    let height = (2.0 * spec.origin + spec.rows as f64 * spec.pitch_y + spec.jitter).ceil() as u32;
    let source = format!("synth-grid-{}x{}-seed{}", spec.rows, spec.cols, spec.seed);
    Ok((
        DetectionSet::new(width, height, source.clone(), noisy)?,
        DetectionSet::new(width, height, source, clean)?,
    ))
}

// ---------------------------------------------------------------------------
// Compressible layouts with exact detected model-space sizes
// ---------------------------------------------------------------------------

/// Detected and kept model-space sizes per attribute for a compressible
/// layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressibleSpec {
    /// Model-space size per attribute (x, y, w, h) found by clustering.
    pub detected: [usize; 4],
    /// Anchor clusters that stay open after regularization.
    pub kept: [usize; 4],
    pub seed: u64,
}

const ANCHOR_MIN_SAMPLES: usize = 5;
const SATELLITE_JITTER: f64 = 0.05;

/// Worst-case data saving if the satellite at `slots[hub]` were kept open as
/// a second center of its anchor neighborhood: everything at or above the
/// hub re-homes to it, closer slots re-home when profitable.
fn hub_saving(slots: &[f64], hub: usize) -> f64 {
    let s_hub = slots[hub];
    let mut saving = s_hub;
    for (t, &s) in slots.iter().enumerate() {
        if t > hub {
            saving += s_hub;
        } else if t < hub {
            saving += (2.0 * s - s_hub).max(0.0);
        }
    }
    saving
}

/// One-sided satellite offsets for an attribute: strictly between the
/// bandwidth (so clustering keeps satellites distinct) and the weight and
/// snap bound (so closing each one pays off), capped so that keeping any
/// satellite open can never beat the anchor-only solution.
fn satellite_slots(params: &RegularizationParams, attr: Attribute) -> Vec<f64> {
    let omega = params.weight(attr);
    let high = omega.min(params.delta_u) - 0.5;
    let step = params.delta_l + 0.5;
    let mut slots: Vec<f64> = Vec::new();
    let mut offset = params.delta_l + 0.3;
    while offset < high {
        slots.push(offset);
        let safe = (0..slots.len()).all(|t| hub_saving(&slots, t) < omega - 0.8);
        if !safe {
            slots.pop();
            break;
        }
        offset += step;
    }
    slots
}

/// Builds one attribute's sample list: `kept` heavy anchors that survive
/// regularization plus `detected - kept` satellite singletons that are
/// cheaper to merge into their anchor than to keep open.
fn compressible_samples(
    n: usize,
    detected: usize,
    kept: usize,
    base: f64,
    slots: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if kept == 0 || kept > detected {
        return Err(Error::InvalidParams(format!(
            "kept clusters must be in 1..=detected ({kept} of {detected})"
        )));
    }
    let satellites = detected - kept;
    // Slots mirror on both sides of each anchor.
    let capacity = kept * slots.len() * 2;
    if satellites > capacity {
        return Err(Error::InvalidParams(format!(
            "cannot place {satellites} satellites on {kept} anchors ({capacity} slots)"
        )));
    }
    if n < satellites + ANCHOR_MIN_SAMPLES * kept {
        return Err(Error::InvalidParams(format!(
            "need at least {} samples, got {n}",
            satellites + ANCHOR_MIN_SAMPLES * kept
        )));
    }
    // Anchors separated far beyond the snap bound so neighborhoods stay
    // independent.
    let anchors: Vec<f64> = (0..kept).map(|j| base + 120.0 * j as f64).collect();
    let mut values = Vec::with_capacity(n);
    for s in 0..satellites {
        let anchor = anchors[s % kept];
        let side_slot = s / kept;
        let slot = slots[side_slot / 2];
        let sign = if side_slot % 2 == 0 { 1.0 } else { -1.0 };
        values.push(anchor + sign * slot + rng.random_range(-SATELLITE_JITTER..SATELLITE_JITTER));
    }
    let heavy = n - satellites;
    for t in 0..heavy {
        values.push(anchors[t % kept]);
    }
    values.shuffle(rng);
    Ok(values)
}

/// Generates a detection set whose per-attribute model spaces have exactly
/// the `detected` sizes and regularize down to the `kept` sizes under the
/// given parameters.
pub fn synth_compressible(
    spec: &CompressibleSpec,
    params: &RegularizationParams,
) -> Result<DetectionSet> {
    params.validate()?;
    let mut rng = rng_for(spec.seed);
    let mut n = 0usize;
    for i in 0..4 {
        let satellites = spec.detected[i].saturating_sub(spec.kept[i]);
        n = n.max(satellites + ANCHOR_MIN_SAMPLES * spec.kept[i]);
    }

    let mut per_attr = Vec::with_capacity(4);
    for (i, attr) in Attribute::ALL.iter().enumerate() {
        let slots = satellite_slots(params, *attr);
        // Keep w/h values clear of zero; x/y anchors start further in.
        let base = match attr {
            Attribute::X | Attribute::Y => 80.0,
            Attribute::W | Attribute::H => 60.0,
        };
        per_attr.push(compressible_samples(
            n,
            spec.detected[i],
            spec.kept[i],
            base,
            &slots,
            &mut rng,
        )?);
    }

    let boxes: Vec<BoundingBox> = (0..n)
        .map(|j| {
            BoundingBox::new(
                PrimitiveClass::Window,
                1.0,
                per_attr[0][j],
                per_attr[1][j],
                per_attr[2][j],
                per_attr[3][j],
            )
        })
        .collect::<Result<_>>()?;

    let width = boxes.iter().map(|b| b.x + b.w).fold(0.0f64, f64::max).ceil() as u32 + 40;
    let height = boxes.iter().map(|b| b.y + b.h).fold(0.0f64, f64::max).ceil() as u32 + 40;
    DetectionSet::new(
        width,
        height,
        format!("synth-compressible-seed{}", spec.seed),
        boxes,
    )
}

// ---------------------------------------------------------------------------
// Benchmark instances
// ---------------------------------------------------------------------------

/// Problem dimensions for one benchmark case: box count and per-attribute
/// model-space sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchDims {
    pub n_boxes: usize,
    pub spaces: [usize; 4],
}

/// The six built-in benchmark cases, spanning the size range the solver is
/// expected to handle interactively.
pub const BENCH_CASES: [BenchDims; 6] = [
    BenchDims {
        n_boxes: 26,
        spaces: [11, 5, 3, 2],
    },
    BenchDims {
        n_boxes: 74,
        spaces: [20, 13, 3, 3],
    },
    BenchDims {
        n_boxes: 60,
        spaces: [29, 10, 4, 7],
    },
    BenchDims {
        n_boxes: 61,
        spaces: [10, 16, 4, 7],
    },
    BenchDims {
        n_boxes: 67,
        spaces: [24, 6, 4, 5],
    },
    BenchDims {
        n_boxes: 45,
        spaces: [35, 12, 9, 9],
    },
];

/// One attribute of a benchmark instance: exact anchor values whose gaps mix
/// mergeable (below the snap bound) and isolating (above it) distances, with
/// the samples distributed over them.
fn bench_samples(
    n: usize,
    clusters: usize,
    base: f64,
    params: &RegularizationParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if clusters == 0 || n < clusters {
        return Err(Error::InvalidParams(format!(
            "need at least one sample per cluster ({n} samples, {clusters} clusters)"
        )));
    }
    let mut anchors = Vec::with_capacity(clusters);
    let mut value = base;
    for _ in 0..clusters {
        anchors.push(value);
        let gap = if rng.random_range(0.0..1.0) < 0.5 {
            // Mergeable neighbor: beyond the bandwidth, within the snap
            // bound.
            rng.random_range(params.delta_l + 4.0..0.8 * params.delta_u)
        } else {
            rng.random_range(1.4 * params.delta_u..3.0 * params.delta_u)
        };
        value += gap;
    }
    let mut counts = vec![1usize; clusters];
    for _ in clusters..n {
        counts[rng.random_range(0..clusters)] += 1;
    }
    let mut values = Vec::with_capacity(n);
    for (anchor, count) in anchors.iter().zip(&counts) {
        values.extend(std::iter::repeat_n(*anchor, *count));
    }
    values.shuffle(rng);
    Ok(values)
}

/// Generates a detection set whose detected model-space sizes equal `dims`
/// under the given parameters.
pub fn synth_bench_case(
    dims: &BenchDims,
    params: &RegularizationParams,
    seed: u64,
) -> Result<DetectionSet> {
    params.validate()?;
    let mut rng = rng_for(seed);
    let mut per_attr = Vec::with_capacity(4);
    for (i, attr) in Attribute::ALL.iter().enumerate() {
        let base = match attr {
            Attribute::X | Attribute::Y => 60.0,
            Attribute::W | Attribute::H => 40.0,
        };
        per_attr.push(bench_samples(
            dims.n_boxes,
            dims.spaces[i],
            base,
            params,
            &mut rng,
        )?);
    }
    let boxes: Vec<BoundingBox> = (0..dims.n_boxes)
        .map(|j| {
            BoundingBox::new(
                PrimitiveClass::Window,
                1.0,
                per_attr[0][j],
                per_attr[1][j],
                per_attr[2][j],
                per_attr[3][j],
            )
        })
        .collect::<Result<_>>()?;
    let width = boxes.iter().map(|b| b.x + b.w).fold(0.0f64, f64::max).ceil() as u32 + 40;
    let height = boxes.iter().map(|b| b.y + b.h).fold(0.0f64, f64::max).ceil() as u32 + 40;
    DetectionSet::new(
        width,
        height,
        format!("synth-bench-n{}-seed{seed}", dims.n_boxes),
        boxes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanshift::mean_shift_1d;

    #[test]
    fn zero_jitter_zero_dropout_noisy_equals_clean() {
        let spec = SyntheticGridSpec::default();
        let (noisy, clean) = synth_grid(&spec).unwrap();
        assert_eq!(noisy, clean);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let spec = SyntheticGridSpec {
            jitter: 2.0,
            dropout: 0.2,
            seed: 77,
            ..Default::default()
        };
        let a = synth_grid(&spec).unwrap();
        let b = synth_grid(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_has_expected_distinct_values() {
        let spec = SyntheticGridSpec {
            rows: 6,
            cols: 8,
            ..Default::default()
        };
        let (_, clean) = synth_grid(&spec).unwrap();
        assert_eq!(clean.len(), 48);
        let mut xs: Vec<f64> = clean.boxes.iter().map(|b| b.x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        assert_eq!(xs.len(), 8);
        let mut ys: Vec<f64> = clean.boxes.iter().map(|b| b.y).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        assert_eq!(ys.len(), 6);
    }

    #[test]
    fn clean_grid_clusters_to_grid_dimensions() {
        let spec = SyntheticGridSpec {
            rows: 5,
            cols: 7,
            ..Default::default()
        };
        let (_, clean) = synth_grid(&spec).unwrap();
        for (attr, expect) in [
            (Attribute::X, 7),
            (Attribute::Y, 5),
            (Attribute::W, 1),
            (Attribute::H, 1),
        ] {
            let samples = clean.attribute_samples(attr).unwrap();
            // Any bandwidth below half the pitch recovers the grid.
            let space = mean_shift_1d(attr, &samples, 12.0).unwrap();
            assert_eq!(space.centers.len(), expect, "{}", attr.name());
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let spec = SyntheticGridSpec {
            jitter: 20.0,
            ..Default::default()
        };
        assert!(synth_grid(&spec).is_err());
        let spec = SyntheticGridSpec {
            dropout: 1.0,
            ..Default::default()
        };
        assert!(synth_grid(&spec).is_err());
        let spec = SyntheticGridSpec {
            box_w: 100.0,
            ..Default::default()
        };
        assert!(synth_grid(&spec).is_err());
    }

    #[test]
    fn default_slots_stay_profitable_and_separable() {
        let params = RegularizationParams::default();
        for attr in Attribute::ALL {
            let slots = satellite_slots(&params, attr);
            assert!(!slots.is_empty(), "{}", attr.name());
            let omega = params.weight(attr);
            for w in slots.windows(2) {
                assert!(w[1] - w[0] > params.delta_l);
            }
            for &s in &slots {
                assert!(s > params.delta_l && s < omega.min(params.delta_u));
            }
            for t in 0..slots.len() {
                assert!(hub_saving(&slots, t) < omega);
            }
        }
    }

    #[test]
    fn compressible_detected_sizes_match() {
        let params = RegularizationParams::default();
        let spec = CompressibleSpec {
            detected: [22, 20, 17, 17],
            kept: [16, 6, 6, 6],
            seed: 3,
        };
        let set = synth_compressible(&spec, &params).unwrap();
        for (i, attr) in Attribute::ALL.iter().enumerate() {
            let samples = set.attribute_samples(*attr).unwrap();
            let space = mean_shift_1d(*attr, &samples, params.delta_l).unwrap();
            assert_eq!(space.centers.len(), spec.detected[i], "{}", attr.name());
        }
    }

    #[test]
    fn bench_detected_sizes_match() {
        let params = RegularizationParams::default();
        for (row, dims) in BENCH_CASES.iter().enumerate() {
            let set = synth_bench_case(dims, &params, 1000 + row as u64).unwrap();
            assert_eq!(set.len(), dims.n_boxes);
            for (i, attr) in Attribute::ALL.iter().enumerate() {
                let samples = set.attribute_samples(*attr).unwrap();
                let space = mean_shift_1d(*attr, &samples, params.delta_l).unwrap();
                assert_eq!(
                    space.centers.len(),
                    dims.spaces[i],
                    "row {row} {}",
                    attr.name()
                );
            }
        }
    }
}
