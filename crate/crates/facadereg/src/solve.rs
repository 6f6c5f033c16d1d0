//! Exact solvers for the assembled program.
//!
//! Every attribute decomposes into an uncapacitated-facility-location
//! sub-problem: opening a cluster costs its attribute weight, and each box
//! pays the absolute residual to the open cluster it selects. Three exact
//! routes are shipped and must agree:
//!
//! - `solve_branch_bound`: best-first search branching on usage variables
//!   (open/closed), bound = omega * opened + per-box minimum feasible cost
//!   over not-yet-closed clusters. Clusters that share no feasible box are
//!   searched as independent components.
//! - `solve_dp_1d`: dynamic program over sorted samples; each open center
//!   serves a contiguous run under absolute-difference costs.
//! - `solve_brute_force`: subset enumeration, the test oracle.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bip::{AttributeSelection, BipProblem, FeasibilityMask};
use crate::error::{Error, Result};
use crate::meanshift::ModelSpace;
use crate::types::Attribute;

/// Which route produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverTag {
    BranchBound,
    Dp,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    /// Search nodes expanded (branch-and-bound only; 0 for DP and brute force).
    pub nodes: u64,
    pub wall: Duration,
    pub solver: SolverTag,
    /// False only when the time limit expired before optimality was proven.
    pub proven: bool,
}

/// Solution slice for one attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSolution {
    pub attr: Attribute,
    /// Chosen center index per box.
    pub chosen: Vec<usize>,
    /// Usage flag per center; true iff some box selects it.
    pub used: Vec<bool>,
    pub data_cost: f64,
    pub regularity_cost: f64,
}

impl AttributeSolution {
    pub fn objective(&self) -> f64 {
        self.data_cost + self.regularity_cost
    }

    pub fn used_count(&self) -> usize {
        self.used.iter().filter(|&&u| u).count()
    }

    pub fn selection(&self) -> AttributeSelection {
        AttributeSelection {
            attr: self.attr,
            chosen: self.chosen.clone(),
            used: self.used.clone(),
        }
    }
}

/// Full solution across all attributes of one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub per_attribute: Vec<AttributeSolution>,
    pub objective: f64,
    pub data_term: f64,
    pub regularity_term: f64,
    pub stats: SolveStats,
}

impl Solution {
    pub fn from_attribute_solutions(parts: Vec<AttributeSolution>, stats: SolveStats) -> Solution {
        let data_term: f64 = parts.iter().map(|p| p.data_cost).sum();
        let regularity_term: f64 = parts.iter().map(|p| p.regularity_cost).sum();
        Solution {
            objective: data_term + regularity_term,
            data_term,
            regularity_term,
            per_attribute: parts,
            stats,
        }
    }

    pub fn selections(&self) -> Vec<AttributeSelection> {
        self.per_attribute.iter().map(|p| p.selection()).collect()
    }

    pub fn slice(&self, attr: Attribute) -> Option<&AttributeSolution> {
        self.per_attribute.iter().find(|p| p.attr == attr)
    }
}

/// Decomposed per-attribute sub-problem consumed by the DP and brute-force
/// routes.
#[derive(Debug, Clone)]
pub struct AttributeInstance {
    pub attr: Attribute,
    pub samples: Vec<f64>,
    pub centers: Vec<f64>,
    /// Absolute residuals, N x K.
    pub costs: Vec<Vec<f64>>,
    /// False entries are infeasible selections.
    pub allowed: Vec<Vec<bool>>,
    pub omega: f64,
}

impl AttributeInstance {
    pub fn new(
        attr: Attribute,
        samples: Vec<f64>,
        centers: Vec<f64>,
        mask: Option<&FeasibilityMask>,
        omega: f64,
    ) -> Result<Self> {
        if samples.is_empty() || centers.is_empty() {
            return Err(Error::DimensionMismatch(
                "instance needs at least one sample and one center".into(),
            ));
        }
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::InvalidParams(format!(
                "weight must be non-negative, got {omega}"
            )));
        }
        let (n, k) = (samples.len(), centers.len());
        let allowed = match mask {
            Some(m) => {
                if m.allowed.len() != n || m.allowed.iter().any(|r| r.len() != k) {
                    return Err(Error::DimensionMismatch(format!(
                        "mask shape does not match instance ({n} x {k})"
                    )));
                }
                m.allowed.clone()
            }
            None => vec![vec![true; k]; n],
        };
        for (i, row) in allowed.iter().enumerate() {
            if !row.iter().any(|&a| a) {
                return Err(Error::InfeasibleRow {
                    box_index: i,
                    delta_u: mask.map_or(f64::INFINITY, |m| m.delta_u),
                });
            }
        }
        let costs = samples
            .iter()
            .map(|&s| centers.iter().map(|&c| (s - c).abs()).collect())
            .collect();
        Ok(AttributeInstance {
            attr,
            samples,
            centers,
            costs,
            allowed,
            omega,
        })
    }

    pub fn from_space(
        samples: Vec<f64>,
        space: &ModelSpace,
        mask: Option<&FeasibilityMask>,
        omega: f64,
    ) -> Result<Self> {
        AttributeInstance::new(space.attr, samples, space.centers.clone(), mask, omega)
    }

    fn solution_from_chosen(&self, chosen: Vec<usize>) -> AttributeSolution {
        let mut used = vec![false; self.centers.len()];
        let mut data_cost = 0.0;
        for (i, &c) in chosen.iter().enumerate() {
            used[c] = true;
            data_cost += self.costs[i][c];
        }
        let regularity_cost = self.omega * used.iter().filter(|&&u| u).count() as f64;
        AttributeSolution {
            attr: self.attr,
            chosen,
            used,
            data_cost,
            regularity_cost,
        }
    }
}

// ---------------------------------------------------------------------------
// Brute force
// ---------------------------------------------------------------------------

/// Enumeration guard for the brute-force route.
pub const BRUTE_FORCE_MAX_CENTERS: usize = 20;

/// Enumerates every non-empty center subset, assigning each sample to its
/// cheapest feasible open center. Exact because samples are independent
/// given the open set.
pub fn solve_brute_force(inst: &AttributeInstance) -> Result<AttributeSolution> {
    let k = inst.centers.len();
    if k > BRUTE_FORCE_MAX_CENTERS {
        return Err(Error::TooLargeForEnumeration {
            centers: k,
            limit: BRUTE_FORCE_MAX_CENTERS,
        });
    }
    let n = inst.samples.len();
    let mut best: Option<(f64, u32)> = None;
    for subset in 1u32..(1u32 << k) {
        let mut total = inst.omega * f64::from(subset.count_ones());
        let mut feasible = true;
        for i in 0..n {
            let mut m = f64::INFINITY;
            for c in 0..k {
                if subset >> c & 1 == 1 && inst.allowed[i][c] && inst.costs[i][c] < m {
                    m = inst.costs[i][c];
                }
            }
            if !m.is_finite() {
                feasible = false;
                break;
            }
            total += m;
        }
        if feasible && best.is_none_or(|(b, _)| total < b) {
            best = Some((total, subset));
        }
    }
    let (_, subset) = best.ok_or(Error::Infeasible)?;
    let chosen = (0..n)
        .map(|i| {
            let mut arg = usize::MAX;
            let mut m = f64::INFINITY;
            for c in 0..k {
                if subset >> c & 1 == 1 && inst.allowed[i][c] && inst.costs[i][c] < m {
                    m = inst.costs[i][c];
                    arg = c;
                }
            }
            arg
        })
        .collect();
    Ok(inst.solution_from_chosen(chosen))
}

// ---------------------------------------------------------------------------
// Dynamic program over sorted samples
// ---------------------------------------------------------------------------

/// Exact fast path for one attribute. Sorts the samples; in an optimal
/// solution every open center serves a contiguous run of them, so a DP over
/// (prefix, last opened center) finds the optimum.
pub fn solve_dp_1d(inst: &AttributeInstance) -> Result<AttributeSolution> {
    let n = inst.samples.len();
    let k = inst.centers.len();

    let mut sample_order: Vec<usize> = (0..n).collect();
    sample_order.sort_by(|&a, &b| {
        inst.samples[a]
            .total_cmp(&inst.samples[b])
            .then(a.cmp(&b))
    });
    let sorted: Vec<f64> = sample_order.iter().map(|&i| inst.samples[i]).collect();

    let mut center_order: Vec<usize> = (0..k).collect();
    center_order.sort_by(|&a, &b| {
        inst.centers[a]
            .total_cmp(&inst.centers[b])
            .then(a.cmp(&b))
    });

    let mut prefix = vec![0.0; n + 1];
    for j in 0..n {
        prefix[j + 1] = prefix[j] + sorted[j];
    }

    // feasible_prefix[c][j]: allowed samples for ordered center c among the
    // first j sorted samples. A block [i, j) is feasible iff the count
    // difference equals the block length.
    let mut feasible_prefix = vec![vec![0u32; n + 1]; k];
    for (c, row) in feasible_prefix.iter_mut().enumerate() {
        let orig_c = center_order[c];
        for j in 0..n {
            row[j + 1] = row[j] + u32::from(inst.allowed[sample_order[j]][orig_c]);
        }
    }

    let seg_cost = |i: usize, j: usize, center: f64| -> f64 {
        let split = sorted.partition_point(|&x| x < center).clamp(i, j);
        center * (split - i) as f64 - (prefix[split] - prefix[i]) + (prefix[j] - prefix[split])
            - center * (j - split) as f64
    };

    // dp[j][c]: min cost covering the first j sorted samples where ordered
    // center c is open and serves the last block. prefix_min folds over c.
    let inf = f64::INFINITY;
    let mut dp = vec![vec![inf; k]; n + 1];
    let mut block_start = vec![vec![usize::MAX; k]; n + 1];
    let mut prev_center = vec![vec![usize::MAX; k]; n + 1];
    let mut prefix_min = vec![vec![(inf, usize::MAX); k]; n + 1];

    for j in 1..=n {
        for c in 0..k {
            let center = inst.centers[center_order[c]];
            for i in 0..j {
                let before = if i == 0 {
                    0.0
                } else if c == 0 {
                    continue;
                } else {
                    let (m, _) = prefix_min[i][c - 1];
                    if !m.is_finite() {
                        continue;
                    }
                    m
                };
                if feasible_prefix[c][j] - feasible_prefix[c][i] != (j - i) as u32 {
                    continue;
                }
                let cand = before + seg_cost(i, j, center) + inst.omega;
                if cand < dp[j][c] {
                    dp[j][c] = cand;
                    block_start[j][c] = i;
                    prev_center[j][c] = if i == 0 {
                        usize::MAX
                    } else {
                        prefix_min[i][c - 1].1
                    };
                }
            }
        }
        for c in 0..k {
            let prev = if c == 0 { (inf, usize::MAX) } else { prefix_min[j][c - 1] };
            prefix_min[j][c] = if dp[j][c] < prev.0 {
                (dp[j][c], c)
            } else {
                prev
            };
        }
    }

    let (final_cost, mut c) = prefix_min[n][k - 1];
    if !final_cost.is_finite() {
        return Err(Error::Infeasible);
    }

    let mut chosen = vec![usize::MAX; n];
    let mut j = n;
    while j > 0 {
        let i = block_start[j][c];
        for t in i..j {
            chosen[sample_order[t]] = center_order[c];
        }
        let pc = prev_center[j][c];
        j = i;
        c = pc;
    }
    Ok(inst.solution_from_chosen(chosen))
}

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dec {
    Undecided,
    Open,
    Closed,
}

/// One independent cluster component of an attribute block: clusters linked
/// by sharing at least one feasible sample, plus those samples.
struct Component {
    clusters: Vec<usize>,
    samples: Vec<usize>,
}

struct BlockView<'a> {
    costs: &'a [Vec<f64>],
    /// Feasible cluster indices per sample, ascending.
    feasible: Vec<Vec<usize>>,
    omega: f64,
}

struct SearchNode {
    state: Vec<Dec>,
}

struct HeapKey {
    bound: f64,
    seq: u64,
    idx: usize,
}

impl PartialEq for HeapKey {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for HeapKey {}
impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Exact solve of the full assembled program by best-first branch and bound
/// on the usage variables.
///
/// If the time limit expires, the best incumbent found so far is returned
/// with `stats.proven == false`.
pub fn solve_branch_bound(problem: &BipProblem, time_limit: Duration) -> Result<Solution> {
    let start = Instant::now();
    let deadline = start + time_limit;
    let mut parts = Vec::with_capacity(problem.blocks.len());
    let mut nodes = 0u64;
    let mut proven = true;

    for block in &problem.blocks {
        let n = block.n_boxes();
        let k = block.n_centers();
        let feasible: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..k).filter(|&c| block.allowed[i][c]).collect())
            .collect();
        if feasible.iter().any(Vec::is_empty) {
            return Err(Error::Infeasible);
        }
        let view = BlockView {
            costs: &block.costs,
            feasible,
            omega: block.omega,
        };

        let mut chosen = vec![usize::MAX; n];
        for comp in components(&view, k) {
            let (comp_chosen, comp_proven) = search_component(&view, &comp, deadline, &mut nodes)?;
            proven &= comp_proven;
            for (&i, &c) in comp.samples.iter().zip(&comp_chosen) {
                chosen[i] = c;
            }
        }

        let mut used = vec![false; k];
        let mut data_cost = 0.0;
        for (i, &c) in chosen.iter().enumerate() {
            used[c] = true;
            data_cost += block.costs[i][c];
        }
        let regularity_cost = block.omega * used.iter().filter(|&&u| u).count() as f64;
        parts.push(AttributeSolution {
            attr: block.attr,
            chosen,
            used,
            data_cost,
            regularity_cost,
        });
    }

    Ok(Solution::from_attribute_solutions(
        parts,
        SolveStats {
            nodes,
            wall: start.elapsed(),
            solver: SolverTag::BranchBound,
            proven,
        },
    ))
}

/// Clusters connected through a shared feasible sample form one component;
/// each component is solved independently.
fn components(view: &BlockView, k: usize) -> Vec<Component> {
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for feas in &view.feasible {
        for w in feas.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut comps: Vec<Component> = Vec::new();
    let mut comp_of = vec![usize::MAX; k];
    for c in 0..k {
        let root = find(&mut parent, c);
        if comp_of[root] == usize::MAX {
            comp_of[root] = comps.len();
            comps.push(Component {
                clusters: Vec::new(),
                samples: Vec::new(),
            });
        }
        comp_of[c] = comp_of[root];
        comps[comp_of[root]].clusters.push(c);
    }
    for (i, feas) in view.feasible.iter().enumerate() {
        comps[comp_of[feas[0]]].samples.push(i);
    }
    // Clusters no sample can reach stay permanently closed: drop empty
    // components.
    comps.retain(|c| !c.samples.is_empty());
    comps
}

/// Lower bound: omega * opened + per-sample minimum feasible cost over
/// not-yet-closed clusters. None if some sample has no candidate left.
fn node_bound(view: &BlockView, comp: &Component, state: &[Dec]) -> Option<f64> {
    let opened = state.iter().filter(|&&d| d == Dec::Open).count();
    let mut bound = view.omega * opened as f64;
    for &i in &comp.samples {
        let mut m = f64::INFINITY;
        for (local, &c) in comp.clusters.iter().enumerate() {
            if state[local] != Dec::Closed && view.feasible[i].binary_search(&c).is_ok() {
                let cost = view.costs[i][c];
                if cost < m {
                    m = cost;
                }
            }
        }
        if !m.is_finite() {
            return None;
        }
        bound += m;
    }
    Some(bound)
}

/// Forces open any cluster that is the sole remaining candidate of some
/// sample. Returns false if a sample has no candidate left.
fn propagate(view: &BlockView, comp: &Component, state: &mut [Dec]) -> bool {
    loop {
        let mut changed = false;
        for &i in &comp.samples {
            let mut last = usize::MAX;
            let mut count = 0;
            for (local, &c) in comp.clusters.iter().enumerate() {
                if state[local] != Dec::Closed && view.feasible[i].binary_search(&c).is_ok() {
                    last = local;
                    count += 1;
                    if count > 1 {
                        break;
                    }
                }
            }
            match count {
                0 => return false,
                1 if state[last] == Dec::Undecided => {
                    state[last] = Dec::Open;
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            return true;
        }
    }
}

/// Picks the undecided cluster that currently provides the per-sample
/// minimum for the most samples. None means every minimum is already on an
/// open cluster, so closing the rest completes the node at its bound.
fn pick_branch(view: &BlockView, comp: &Component, state: &[Dec]) -> Option<usize> {
    let mut tally = vec![0u32; comp.clusters.len()];
    for &i in &comp.samples {
        let mut best_local = usize::MAX;
        let mut best_cost = f64::INFINITY;
        for (local, &c) in comp.clusters.iter().enumerate() {
            if state[local] != Dec::Closed && view.feasible[i].binary_search(&c).is_ok() {
                let cost = view.costs[i][c];
                if cost < best_cost {
                    best_cost = cost;
                    best_local = local;
                }
            }
        }
        if best_local != usize::MAX && state[best_local] == Dec::Undecided {
            tally[best_local] += 1;
        }
    }
    let (local, &count) = tally
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    if count == 0 {
        None
    } else {
        Some(local)
    }
}

/// Assigns every component sample to its cheapest open feasible cluster
/// (ties to the lowest index) and returns (assignment, exact cost).
fn complete_assignment(
    view: &BlockView,
    comp: &Component,
    state: &[Dec],
) -> Option<(Vec<usize>, f64)> {
    let mut chosen = Vec::with_capacity(comp.samples.len());
    let mut used = vec![false; comp.clusters.len()];
    let mut data = 0.0;
    for &i in &comp.samples {
        let mut best = usize::MAX;
        let mut best_cost = f64::INFINITY;
        for (local, &c) in comp.clusters.iter().enumerate() {
            if state[local] == Dec::Open && view.feasible[i].binary_search(&c).is_ok() {
                let cost = view.costs[i][c];
                if cost < best_cost {
                    best_cost = cost;
                    best = local;
                }
            }
        }
        if best == usize::MAX {
            return None;
        }
        used[best] = true;
        data += best_cost;
        chosen.push(comp.clusters[best]);
    }
    let cost = data + view.omega * used.iter().filter(|&&u| u).count() as f64;
    Some((chosen, cost))
}

fn search_component(
    view: &BlockView,
    comp: &Component,
    deadline: Instant,
    nodes: &mut u64,
) -> Result<(Vec<usize>, bool)> {
    let mut root = vec![Dec::Undecided; comp.clusters.len()];
    if !propagate(view, comp, &mut root) {
        return Err(Error::Infeasible);
    }
    let root_bound = node_bound(view, comp, &root).ok_or(Error::Infeasible)?;

    let mut arena: Vec<SearchNode> = vec![SearchNode { state: root }];
    let mut heap: BinaryHeap<Reverse<HeapKey>> = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Reverse(HeapKey {
        bound: root_bound,
        seq,
        idx: 0,
    }));

    while let Some(Reverse(key)) = heap.pop() {
        *nodes += 1;

        if Instant::now() > deadline {
            // Return the best incumbent reachable from this node greedily.
            let mut state = arena[key.idx].state.clone();
            for d in state.iter_mut() {
                if *d == Dec::Undecided {
                    *d = Dec::Open;
                }
            }
            let (chosen, _) = complete_assignment(view, comp, &state).ok_or(Error::Infeasible)?;
            return Ok((chosen, false));
        }

        let branch = pick_branch(view, comp, &arena[key.idx].state);
        match branch {
            None => {
                // Every per-sample minimum sits on an open cluster: closing
                // the remaining undecided clusters realizes the bound, and
                // best-first order makes it globally optimal.
                let mut state = arena[key.idx].state.clone();
                for d in state.iter_mut() {
                    if *d == Dec::Undecided {
                        *d = Dec::Closed;
                    }
                }
                let (chosen, _) =
                    complete_assignment(view, comp, &state).ok_or(Error::Infeasible)?;
                return Ok((chosen, true));
            }
            Some(local) => {
                for dec in [Dec::Open, Dec::Closed] {
                    let mut state = arena[key.idx].state.clone();
                    state[local] = dec;
                    if !propagate(view, comp, &mut state) {
                        continue;
                    }
                    if let Some(bound) = node_bound(view, comp, &state) {
                        seq += 1;
                        arena.push(SearchNode { state });
                        heap.push(Reverse(HeapKey {
                            bound,
                            seq,
                            idx: arena.len() - 1,
                        }));
                    }
                }
            }
        }
    }
    Err(Error::Infeasible)
}
