//! End-to-end pipeline: group detections, cluster each attribute, assemble
//! and solve the program, apply the solution, and report regularity metrics.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bip::{
    assemble_problem, build_residuals, evaluate_objective, prune_mask, AttributePart, Formulation,
    ObjectiveValue,
};
use crate::error::{Error, Result};
use crate::meanshift::{mean_shift_1d, ModelSpace};
use crate::solve::{
    solve_branch_bound, solve_brute_force, solve_dp_1d, AttributeInstance, Solution, SolveStats,
    SolverTag,
};
use crate::types::{explicit_unknown_count, Attribute, BoundingBox, DetectionSet, PrimitiveClass};

/// How boxes are grouped into independent programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// One program per primitive class. Windows, doors and balconies have
    /// systematically different sizes, so this avoids cross-class center
    /// pollution.
    PerClass,
    /// A single joint program over all boxes.
    Merged,
}

/// Pipeline configuration. Defaults are the standard parameter set:
/// delta_l = 4 px, delta_u = 10 * delta_l, weights (100, 100, 10, 10).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    /// Mean-shift bandwidth: the finest distinction kept between values.
    pub delta_l: f64,
    /// Maximum snap distance; selections beyond it are pruned.
    pub delta_u: f64,
    /// Regularity weight per attribute, indexed as (x, y, w, h).
    pub weights: [f64; 4],
    pub grouping: Grouping,
    pub solver: SolverTag,
    pub formulation: Formulation,
    pub time_limit: Duration,
    /// Boxes below this confidence are excluded before regularization.
    pub min_confidence: f64,
}

impl Default for RegularizationParams {
    fn default() -> Self {
        RegularizationParams {
            delta_l: 4.0,
            delta_u: 40.0,
            weights: [100.0, 100.0, 10.0, 10.0],
            grouping: Grouping::PerClass,
            solver: SolverTag::BranchBound,
            formulation: Formulation::Indicator,
            time_limit: Duration::from_secs(60),
            min_confidence: 0.0,
        }
    }
}

impl RegularizationParams {
    pub fn weight(&self, attr: Attribute) -> f64 {
        self.weights[attr.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_l > 0.0) || !self.delta_l.is_finite() {
            return Err(Error::InvalidParams(format!(
                "delta_l must be positive, got {}",
                self.delta_l
            )));
        }
        if !(self.delta_u >= self.delta_l) {
            return Err(Error::InvalidParams(format!(
                "delta_u ({}) must be at least delta_l ({})",
                self.delta_u, self.delta_l
            )));
        }
        for (attr, &w) in Attribute::ALL.iter().zip(&self.weights) {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "weight for {} must be positive, got {w}",
                    attr.name()
                )));
            }
        }
        if !(self.min_confidence >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "min_confidence must be non-negative, got {}",
                self.min_confidence
            )));
        }
        Ok(())
    }
}

/// One value per attribute, serialized under the attribute names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerAttribute<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T> PerAttribute<T> {
    pub fn get(&self, attr: Attribute) -> &T {
        match attr {
            Attribute::X => &self.x,
            Attribute::Y => &self.y,
            Attribute::W => &self.w,
            Attribute::H => &self.h,
        }
    }

    pub fn get_mut(&mut self, attr: Attribute) -> &mut T {
        match attr {
            Attribute::X => &mut self.x,
            Attribute::Y => &mut self.y,
            Attribute::W => &mut self.w,
            Attribute::H => &mut self.h,
        }
    }
}

impl PerAttribute<usize> {
    pub fn as_array(&self) -> [usize; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisplacementStats {
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub solver: SolverTag,
    pub nodes: u64,
    pub wall_ms: f64,
    pub proven: bool,
}

impl From<&SolveStats> for SolverReport {
    fn from(s: &SolveStats) -> Self {
        SolverReport {
            solver: s.solver,
            nodes: s.nodes,
            wall_ms: s.wall.as_secs_f64() * 1e3,
            proven: s.proven,
        }
    }
}

/// Metrics for one solved group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    /// None under merged grouping.
    pub class: Option<PrimitiveClass>,
    pub n_boxes: usize,
    /// Model-space sizes found by clustering.
    pub detected_counts: PerAttribute<usize>,
    /// Distinct model values actually selected.
    pub regularized_counts: PerAttribute<usize>,
    pub explicit_unknowns: usize,
    pub objective: ObjectiveValue,
    pub solver: SolverReport,
    pub displacement: PerAttribute<DisplacementStats>,
}

/// Aggregate report across all groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationReport {
    pub groups: Vec<GroupReport>,
    pub detected_counts: PerAttribute<usize>,
    pub regularized_counts: PerAttribute<usize>,
    pub explicit_unknowns: usize,
    pub objective: ObjectiveValue,
    pub wall_ms: f64,
    pub proven: bool,
    pub warnings: Vec<String>,
}

/// Writes each box's attributes to its selected centers. Class label and
/// confidence are preserved.
pub fn apply_solution(
    boxes: &[BoundingBox],
    solution: &Solution,
    spaces: &[ModelSpace],
) -> Result<Vec<BoundingBox>> {
    let mut out = boxes.to_vec();
    for slice in &solution.per_attribute {
        let space = spaces
            .iter()
            .find(|s| s.attr == slice.attr)
            .ok_or_else(|| {
                Error::DimensionMismatch(format!(
                    "no model space for attribute {}",
                    slice.attr.name()
                ))
            })?;
        if slice.chosen.len() != out.len() {
            return Err(Error::DimensionMismatch(format!(
                "attribute {}: solution covers {} boxes, group has {}",
                slice.attr.name(),
                slice.chosen.len(),
                out.len()
            )));
        }
        for (b, &c) in out.iter_mut().zip(&slice.chosen) {
            let value = *space.centers.get(c).ok_or_else(|| {
                Error::DimensionMismatch(format!(
                    "attribute {}: selected center {c} of {}",
                    slice.attr.name(),
                    space.centers.len()
                ))
            })?;
            b.set_attribute(slice.attr, value);
        }
    }
    Ok(out)
}

/// Builds the per-group metrics: model-space sizes before and after, unknown
/// count, objective split, and per-box displacement.
pub fn regularity_metrics(
    class: Option<PrimitiveClass>,
    before: &[BoundingBox],
    after: &[BoundingBox],
    spaces: &[ModelSpace],
    solution: &Solution,
    objective: ObjectiveValue,
    stats: &SolveStats,
) -> GroupReport {
    let mut detected = PerAttribute::<usize>::default();
    let mut regularized = PerAttribute::<usize>::default();
    let mut displacement = PerAttribute::<DisplacementStats>::default();
    let mut sizes = [0usize; 4];
    for space in spaces {
        *detected.get_mut(space.attr) = space.centers.len();
        sizes[space.attr.index()] = space.centers.len();
    }
    for slice in &solution.per_attribute {
        *regularized.get_mut(slice.attr) = slice.used_count();
    }
    for attr in Attribute::ALL {
        let mut max = 0.0f64;
        let mut sum = 0.0f64;
        for (b, a) in before.iter().zip(after) {
            let d = (b.attribute(attr) - a.attribute(attr)).abs();
            sum += d;
            max = max.max(d);
        }
        *displacement.get_mut(attr) = DisplacementStats {
            mean: if before.is_empty() {
                0.0
            } else {
                sum / before.len() as f64
            },
            max,
        };
    }
    GroupReport {
        class,
        n_boxes: before.len(),
        detected_counts: detected,
        regularized_counts: regularized,
        explicit_unknowns: explicit_unknown_count(before.len(), sizes),
        objective,
        solver: SolverReport::from(stats),
        displacement,
    }
}

/// Clusters, assembles and solves one group of boxes.
fn regularize_group(
    boxes: &[BoundingBox],
    class: Option<PrimitiveClass>,
    params: &RegularizationParams,
) -> Result<(Vec<BoundingBox>, GroupReport)> {
    let mut spaces = Vec::with_capacity(4);
    let mut parts = Vec::with_capacity(4);
    let mut instances = Vec::with_capacity(4);
    for attr in Attribute::ALL {
        let samples = crate::types::attribute_samples(boxes, attr)?;
        let space = mean_shift_1d(attr, &samples, params.delta_l)?;
        let residuals = build_residuals(&samples, &space)?;
        let mask = prune_mask(&residuals, params.delta_u)?;
        instances.push(AttributeInstance::from_space(
            samples,
            &space,
            Some(&mask),
            params.weight(attr),
        )?);
        parts.push(AttributePart {
            residuals,
            mask,
            omega: params.weight(attr),
        });
        spaces.push(space);
    }
    let problem = assemble_problem(&parts, params.formulation)?;

    let solution = match params.solver {
        SolverTag::BranchBound => solve_branch_bound(&problem, params.time_limit)?,
        SolverTag::Dp | SolverTag::BruteForce => {
            let t0 = Instant::now();
            let mut slices = Vec::with_capacity(instances.len());
            for inst in &instances {
                slices.push(match params.solver {
                    SolverTag::Dp => solve_dp_1d(inst)?,
                    _ => solve_brute_force(inst)?,
                });
            }
            Solution::from_attribute_solutions(
                slices,
                SolveStats {
                    nodes: 0,
                    wall: t0.elapsed(),
                    solver: params.solver,
                    proven: true,
                },
            )
        }
    };

    let objective = evaluate_objective(&problem, &solution.selections())?;
    debug_assert!(
        (objective.total - solution.objective).abs() <= 1e-6 * objective.total.max(1.0),
        "solver objective diverges from evaluation"
    );
    let applied = apply_solution(boxes, &solution, &spaces)?;
    let report = regularity_metrics(
        class,
        boxes,
        &applied,
        &spaces,
        &solution,
        objective,
        &solution.stats,
    );
    Ok((applied, report))
}

/// Runs the full pipeline: filter by confidence, group, cluster, solve,
/// apply, and aggregate. The returned set preserves the relative order of
/// the surviving boxes.
pub fn regularize(
    detections: &DetectionSet,
    params: &RegularizationParams,
) -> Result<(DetectionSet, RegularizationReport)> {
    params.validate()?;
    if detections.is_empty() {
        return Err(Error::EmptyDetections);
    }
    let t0 = Instant::now();
    let mut warnings = Vec::new();

    let boxes: Vec<BoundingBox> = detections
        .boxes
        .iter()
        .filter(|b| b.confidence >= params.min_confidence)
        .cloned()
        .collect();
    if boxes.len() < detections.len() {
        warnings.push(format!(
            "excluded {} box(es) below confidence floor {}",
            detections.len() - boxes.len(),
            params.min_confidence
        ));
    }
    if boxes.is_empty() {
        return Err(Error::EmptyDetections);
    }

    let groups: Vec<(Option<PrimitiveClass>, Vec<usize>)> = match params.grouping {
        Grouping::Merged => vec![(None, (0..boxes.len()).collect())],
        Grouping::PerClass => {
            let mut by_class: BTreeMap<PrimitiveClass, Vec<usize>> = BTreeMap::new();
            for (i, b) in boxes.iter().enumerate() {
                by_class.entry(b.class).or_default().push(i);
            }
            by_class.into_iter().map(|(c, v)| (Some(c), v)).collect()
        }
    };

    let mut out_boxes = boxes.clone();
    let mut group_reports = Vec::new();
    for (class, idx) in groups {
        let members: Vec<BoundingBox> = idx.iter().map(|&i| boxes[i].clone()).collect();
        let (applied, report) = regularize_group(&members, class, params)?;
        for (&slot, b) in idx.iter().zip(applied) {
            out_boxes[slot] = b;
        }
        group_reports.push(report);
    }

    let mut detected = PerAttribute::<usize>::default();
    let mut regularized = PerAttribute::<usize>::default();
    let mut explicit_unknowns = 0;
    let mut objective = ObjectiveValue {
        total: 0.0,
        data_term: 0.0,
        regularity_term: 0.0,
    };
    let mut proven = true;
    for g in &group_reports {
        for attr in Attribute::ALL {
            *detected.get_mut(attr) += g.detected_counts.get(attr);
            *regularized.get_mut(attr) += g.regularized_counts.get(attr);
        }
        explicit_unknowns += g.explicit_unknowns;
        objective.total += g.objective.total;
        objective.data_term += g.objective.data_term;
        objective.regularity_term += g.objective.regularity_term;
        proven &= g.solver.proven;
    }
    if !proven {
        warnings.push("time limit reached before optimality was proven".into());
    }

    let out = DetectionSet {
        image_width: detections.image_width,
        image_height: detections.image_height,
        source_id: detections.source_id.clone(),
        boxes: out_boxes,
    };
    let report = RegularizationReport {
        groups: group_reports,
        detected_counts: detected,
        regularized_counts: regularized,
        explicit_unknowns,
        objective,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        proven,
        warnings,
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_box(class: PrimitiveClass, x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(class, 1.0, x, y, w, h).unwrap()
    }

    /// 2 columns x 3 rows of identical windows with 60 px pitch.
    fn perfect_grid() -> DetectionSet {
        let mut boxes = Vec::new();
        for r in 0..3 {
            for c in 0..2 {
                boxes.push(grid_box(
                    PrimitiveClass::Window,
                    100.0 + 60.0 * c as f64,
                    80.0 + 60.0 * r as f64,
                    30.0,
                    40.0,
                ));
            }
        }
        DetectionSet::new(400, 400, "perfect-grid", boxes).unwrap()
    }

    #[test]
    fn perfect_grid_is_a_fixed_point() {
        let set = perfect_grid();
        let (out, report) = regularize(&set, &RegularizationParams::default()).unwrap();
        assert_eq!(out, set);
        assert_eq!(report.detected_counts.as_array(), [2, 3, 1, 1]);
        assert_eq!(report.regularized_counts.as_array(), [2, 3, 1, 1]);
        assert_eq!(report.objective.data_term, 0.0);
        // N = 6 boxes, spaces (2, 3, 1, 1): 6 * 7 explicit unknowns.
        assert_eq!(report.explicit_unknowns, 42);
        assert!(report.proven);
    }

    #[test]
    fn jittered_grid_snaps_within_delta_u() {
        let params = RegularizationParams::default();
        let mut boxes = Vec::new();
        let jit = [1.5, -1.8, 0.4, -0.9, 1.1, -1.3];
        for r in 0..3 {
            for c in 0..2 {
                let j = jit[(r * 2 + c) % jit.len()];
                boxes.push(grid_box(
                    PrimitiveClass::Window,
                    100.0 + 60.0 * c as f64 + j,
                    80.0 + 60.0 * r as f64 - j,
                    30.0 + j,
                    40.0 - j,
                ));
            }
        }
        let set = DetectionSet::new(400, 400, "jittered", boxes).unwrap();
        let (out, report) = regularize(&set, &params).unwrap();
        assert_eq!(report.regularized_counts.as_array(), [2, 3, 1, 1]);
        for (b, a) in set.boxes.iter().zip(&out.boxes) {
            for attr in Attribute::ALL {
                assert!((b.attribute(attr) - a.attribute(attr)).abs() <= params.delta_u);
            }
        }
        for g in &report.groups {
            for attr in Attribute::ALL {
                assert!(g.displacement.get(attr).max <= params.delta_u);
            }
        }
    }

    #[test]
    fn report_objective_matches_solution() {
        let set = perfect_grid();
        let (_, report) = regularize(&set, &RegularizationParams::default()).unwrap();
        let o = report.objective;
        assert!((o.total - (o.data_term + o.regularity_term)).abs() <= 1e-9 * o.total.max(1.0));
        // Perfect grid: data 0, regularity = 100*2 + 100*3 + 10 + 10.
        assert_eq!(o.total, 520.0);
    }

    #[test]
    fn single_box_is_trivially_regularized() {
        let set = DetectionSet::new(
            200,
            200,
            "one",
            vec![grid_box(PrimitiveClass::Door, 13.0, 17.0, 21.0, 55.0)],
        )
        .unwrap();
        let (out, report) = regularize(&set, &RegularizationParams::default()).unwrap();
        assert_eq!(out.boxes, set.boxes);
        assert_eq!(report.detected_counts.as_array(), [1, 1, 1, 1]);
    }

    #[test]
    fn forced_single_center_application() {
        use crate::solve::AttributeSolution;
        let boxes = vec![grid_box(PrimitiveClass::Window, 2.0, 3.0, 4.0, 5.0)];
        let spaces: Vec<ModelSpace> = Attribute::ALL
            .iter()
            .map(|&attr| ModelSpace {
                attr,
                centers: vec![5.0],
                assignment: vec![0],
                bandwidth: 4.0,
            })
            .collect();
        let slices: Vec<AttributeSolution> = Attribute::ALL
            .iter()
            .map(|&attr| AttributeSolution {
                attr,
                chosen: vec![0],
                used: vec![true],
                data_cost: 0.0,
                regularity_cost: 0.0,
            })
            .collect();
        let solution = Solution::from_attribute_solutions(
            slices,
            SolveStats {
                nodes: 0,
                wall: Duration::ZERO,
                solver: SolverTag::Dp,
                proven: true,
            },
        );
        let applied = apply_solution(&boxes, &solution, &spaces).unwrap();
        assert_eq!(applied[0].x, 5.0);
        assert_eq!(applied[0].y, 5.0);
        assert_eq!(applied[0].w, 5.0);
        assert_eq!(applied[0].h, 5.0);
        assert_eq!(applied[0].class, PrimitiveClass::Window);
    }

    #[test]
    fn per_class_grouping_is_order_independent() {
        let windows: Vec<BoundingBox> = (0..4)
            .map(|i| {
                grid_box(
                    PrimitiveClass::Window,
                    100.0 + 50.0 * i as f64,
                    90.0,
                    30.0,
                    40.0,
                )
            })
            .collect();
        let doors: Vec<BoundingBox> = (0..3)
            .map(|i| {
                grid_box(
                    PrimitiveClass::Door,
                    120.0 + 70.0 * i as f64,
                    300.0,
                    35.0,
                    80.0,
                )
            })
            .collect();

        let mut interleaved = Vec::new();
        for i in 0..4 {
            interleaved.push(windows[i].clone());
            if i < doors.len() {
                interleaved.push(doors[i].clone());
            }
        }
        let mut blocked = windows.clone();
        blocked.extend(doors.clone());

        let params = RegularizationParams::default();
        let a = regularize(
            &DetectionSet::new(600, 600, "a", interleaved).unwrap(),
            &params,
        )
        .unwrap();
        let b = regularize(&DetectionSet::new(600, 600, "b", blocked).unwrap(), &params).unwrap();

        let pick = |set: &DetectionSet, class: PrimitiveClass| -> Vec<BoundingBox> {
            set.boxes
                .iter()
                .filter(|x| x.class == class)
                .cloned()
                .collect()
        };
        assert_eq!(
            pick(&a.0, PrimitiveClass::Window),
            pick(&b.0, PrimitiveClass::Window)
        );
        assert_eq!(
            pick(&a.0, PrimitiveClass::Door),
            pick(&b.0, PrimitiveClass::Door)
        );
        assert_eq!(a.1.objective, b.1.objective);
    }

    #[test]
    fn confidence_floor_excludes_boxes() {
        let mut boxes = perfect_grid().boxes;
        boxes[0].confidence = 0.1;
        let set = DetectionSet::new(400, 400, "conf", boxes).unwrap();
        let params = RegularizationParams {
            min_confidence: 0.5,
            ..Default::default()
        };
        let (out, report) = regularize(&set, &params).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn all_boxes_filtered_is_an_error() {
        let set = perfect_grid();
        let params = RegularizationParams {
            min_confidence: 2.0,
            ..Default::default()
        };
        assert!(matches!(
            regularize(&set, &params),
            Err(Error::EmptyDetections)
        ));
    }

    #[test]
    fn invalid_params_rejected() {
        let set = perfect_grid();
        let bad = RegularizationParams {
            delta_u: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            regularize(&set, &bad),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn solver_choices_agree() {
        let set = perfect_grid();
        let mut objs = Vec::new();
        for solver in [SolverTag::BranchBound, SolverTag::Dp, SolverTag::BruteForce] {
            let params = RegularizationParams {
                solver,
                ..Default::default()
            };
            let (out, report) = regularize(&set, &params).unwrap();
            objs.push(report.objective.total);
            assert_eq!(out, set);
        }
        assert!(objs.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-9));
    }

    #[test]
    fn idempotent_on_own_output() {
        let mut boxes = Vec::new();
        let jit = [1.5, -1.8, 0.4, -0.9];
        for r in 0..2 {
            for c in 0..2 {
                let j = jit[r * 2 + c];
                boxes.push(grid_box(
                    PrimitiveClass::Window,
                    100.0 + 60.0 * c as f64 + j,
                    80.0 + 60.0 * r as f64 - j,
                    30.0 + j,
                    40.0,
                ));
            }
        }
        let set = DetectionSet::new(400, 400, "idem", boxes).unwrap();
        let params = RegularizationParams::default();
        let (once, _) = regularize(&set, &params).unwrap();
        let (twice, report) = regularize(&once, &params).unwrap();
        assert_eq!(once, twice);
        assert_eq!(report.objective.data_term, 0.0);
    }
}
