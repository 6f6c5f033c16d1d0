//! Binary integer program assembly.
//!
//! For each attribute, every box carries a one-hot selection vector over the
//! attribute's model space. The objective is the sum of absolute residuals of
//! the selected values (data term) plus a weighted count of the distinct
//! model values in use (regularity term). Residual magnitudes are data, not
//! decisions, so they enter as constant objective coefficients and the whole
//! program stays pure-binary.
//!
//! Two encodings of the usage indicators are shipped:
//! - `Indicator`: u_k >= a_ik for every box i. Minimization with a positive
//!   weight drives u_k down to the logical OR of its column at the optimum.
//! - `Chain`: a left fold of pairwise logical-or linearizations
//!   (c <= a + b, c >= a, c >= b), whose auxiliaries are fully determined by
//!   the selections at every feasible point.
//!
//! Both encodings have identical optimal objective values.

pub mod lp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanshift::ModelSpace;
use crate::types::Attribute;

/// Signed residuals sample_i - center_k for one attribute, N x K.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    pub attr: Attribute,
    pub values: Vec<Vec<f64>>,
}

impl ResidualMatrix {
    pub fn n_boxes(&self) -> usize {
        self.values.len()
    }

    pub fn n_centers(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

/// Entry (i, k) is sample_i - centers_k, signed. The data term consumes the
/// magnitudes.
pub fn build_residuals(samples: &[f64], space: &ModelSpace) -> Result<ResidualMatrix> {
    if samples.is_empty() {
        return Err(Error::EmptyDetections);
    }
    if space.centers.is_empty() {
        return Err(Error::DimensionMismatch(
            "model space has no centers".into(),
        ));
    }
    let values = samples
        .iter()
        .map(|&s| space.centers.iter().map(|&c| s - c).collect())
        .collect();
    Ok(ResidualMatrix {
        attr: space.attr,
        values,
    })
}

/// Which (box, center) selections survive the upper-bound residual pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityMask {
    pub attr: Attribute,
    pub allowed: Vec<Vec<bool>>,
    pub delta_u: f64,
}

/// allowed(i, k) iff |residual(i, k)| <= delta_u.
///
/// Errors with the offending box index if a row loses all candidates, which
/// can only happen when delta_u is below the clustering bandwidth.
pub fn prune_mask(residuals: &ResidualMatrix, delta_u: f64) -> Result<FeasibilityMask> {
    if !(delta_u > 0.0) {
        return Err(Error::InvalidParams(format!(
            "delta_u must be positive, got {delta_u}"
        )));
    }
    let mut allowed = Vec::with_capacity(residuals.values.len());
    for (i, row) in residuals.values.iter().enumerate() {
        let mask_row: Vec<bool> = row.iter().map(|r| r.abs() <= delta_u).collect();
        if !mask_row.iter().any(|&a| a) {
            return Err(Error::InfeasibleRow {
                box_index: i,
                delta_u,
            });
        }
        allowed.push(mask_row);
    }
    Ok(FeasibilityMask {
        attr: residuals.attr,
        allowed,
        delta_u,
    })
}

/// Usage-indicator encoding choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Indicator,
    Chain,
}

/// Index into the problem's variable arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        const EPS: f64 = 1e-9;
        match self {
            Relation::Le => lhs <= rhs + EPS,
            Relation::Eq => (lhs - rhs).abs() <= EPS,
            Relation::Ge => lhs >= rhs - EPS,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

/// sum(coeff * var) `relation` rhs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Usage indicator for one (attribute, cluster). A single-box chain
/// degenerates to the selection variable itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UsageVar {
    Dedicated(VarId),
    Alias(VarId),
}

impl UsageVar {
    pub fn var(self) -> VarId {
        match self {
            UsageVar::Dedicated(v) | UsageVar::Alias(v) => v,
        }
    }
}

/// One attribute's slice of the program.
#[derive(Debug, Clone)]
pub struct AttributeBlock {
    pub attr: Attribute,
    /// Absolute residuals, N x K.
    pub costs: Vec<Vec<f64>>,
    pub allowed: Vec<Vec<bool>>,
    pub omega: f64,
    pub selection_vars: Vec<Vec<VarId>>,
    pub usage_vars: Vec<UsageVar>,
    /// Intermediate or-chain auxiliaries per cluster (chain encoding only;
    /// excludes the final variable, which is the usage indicator).
    pub chain_aux: Vec<Vec<VarId>>,
}

impl AttributeBlock {
    pub fn n_boxes(&self) -> usize {
        self.costs.len()
    }

    pub fn n_centers(&self) -> usize {
        self.costs.first().map_or(0, Vec::len)
    }
}

/// The assembled program: structured per-attribute blocks plus the flat
/// variable/constraint view used by evaluation and the LP export.
#[derive(Debug, Clone)]
pub struct BipProblem {
    pub formulation: Formulation,
    pub blocks: Vec<AttributeBlock>,
    /// Objective coefficient per variable id. All coefficients are >= 0.
    pub objective: Vec<f64>,
    pub var_names: Vec<String>,
    pub constraints: Vec<LinearConstraint>,
}

impl BipProblem {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    /// Selection unknowns only, excluding usage and chain auxiliaries.
    pub fn n_selection_vars(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.n_boxes() * b.n_centers())
            .sum()
    }
}

/// Inputs for one attribute of `assemble_problem`.
#[derive(Debug, Clone)]
pub struct AttributePart {
    pub residuals: ResidualMatrix,
    pub mask: FeasibilityMask,
    pub omega: f64,
}

struct VarArena {
    names: Vec<String>,
    objective: Vec<f64>,
}

impl VarArena {
    fn alloc(&mut self, name: String, coeff: f64) -> VarId {
        let id = VarId(self.names.len());
        self.names.push(name);
        self.objective.push(coeff);
        id
    }
}

/// Builds the left-fold or-chain over `inputs`: c1 = in0 | in1,
/// c2 = c1 | in2, ... The last returned auxiliary equals the logical OR of
/// all inputs in every feasible binary assignment.
///
/// `alloc` allocates auxiliary variables; `label` prefixes constraint and
/// variable names.
pub fn or_chain_constraints(
    inputs: &[VarId],
    mut alloc: impl FnMut(String) -> VarId,
    label: &str,
) -> Result<(Vec<VarId>, Vec<LinearConstraint>)> {
    if inputs.len() < 2 {
        return Err(Error::ChainTooShort(inputs.len()));
    }
    let mut aux = Vec::with_capacity(inputs.len() - 1);
    let mut constraints = Vec::with_capacity(3 * (inputs.len() - 1));
    let mut left = inputs[0];
    for (step, &right) in inputs[1..].iter().enumerate() {
        let c = alloc(format!("{label}_or{step}"));
        constraints.push(LinearConstraint {
            name: format!("{label}_or{step}_ub"),
            terms: vec![(c, 1.0), (left, -1.0), (right, -1.0)],
            relation: Relation::Le,
            rhs: 0.0,
        });
        constraints.push(LinearConstraint {
            name: format!("{label}_or{step}_lba"),
            terms: vec![(c, 1.0), (left, -1.0)],
            relation: Relation::Ge,
            rhs: 0.0,
        });
        constraints.push(LinearConstraint {
            name: format!("{label}_or{step}_lbb"),
            terms: vec![(c, 1.0), (right, -1.0)],
            relation: Relation::Ge,
            rhs: 0.0,
        });
        aux.push(c);
        left = c;
    }
    Ok((aux, constraints))
}

/// Assembles the full program from per-attribute residuals, masks and
/// weights.
pub fn assemble_problem(parts: &[AttributePart], formulation: Formulation) -> Result<BipProblem> {
    if parts.is_empty() {
        return Err(Error::DimensionMismatch("no attribute parts".into()));
    }
    let mut arena = VarArena {
        names: Vec::new(),
        objective: Vec::new(),
    };
    let mut constraints = Vec::new();
    let mut blocks = Vec::with_capacity(parts.len());

    for part in parts {
        let attr = part.residuals.attr;
        let a = attr.name();
        if part.mask.attr != attr {
            return Err(Error::DimensionMismatch(format!(
                "mask attribute {} does not match residual attribute {}",
                part.mask.attr.name(),
                a
            )));
        }
        let n = part.residuals.n_boxes();
        let k = part.residuals.n_centers();
        if n == 0 || k == 0 {
            return Err(Error::DimensionMismatch(format!(
                "attribute {a}: empty residual matrix"
            )));
        }
        if part.mask.allowed.len() != n || part.mask.allowed.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch(format!(
                "attribute {a}: mask shape does not match residuals ({n} x {k})"
            )));
        }
        if !(part.omega > 0.0) || !part.omega.is_finite() {
            return Err(Error::InvalidParams(format!(
                "attribute {a}: weight must be positive, got {}",
                part.omega
            )));
        }

        let costs: Vec<Vec<f64>> = part
            .residuals
            .values
            .iter()
            .map(|row| row.iter().map(|r| r.abs()).collect())
            .collect();

        let selection_vars: Vec<Vec<VarId>> = (0..n)
            .map(|i| {
                (0..k)
                    .map(|c| arena.alloc(format!("a_{a}_{i}_{c}"), costs[i][c]))
                    .collect()
            })
            .collect();

        // Eq-style one-hot: each box picks exactly one model value.
        for (i, row) in selection_vars.iter().enumerate() {
            constraints.push(LinearConstraint {
                name: format!("onehot_{a}_{i}"),
                terms: row.iter().map(|&v| (v, 1.0)).collect(),
                relation: Relation::Eq,
                rhs: 1.0,
            });
        }

        // Pruned selections are pinned to zero.
        for (i, row) in part.mask.allowed.iter().enumerate() {
            for (c, &ok) in row.iter().enumerate() {
                if !ok {
                    constraints.push(LinearConstraint {
                        name: format!("mask_{a}_{i}_{c}"),
                        terms: vec![(selection_vars[i][c], 1.0)],
                        relation: Relation::Eq,
                        rhs: 0.0,
                    });
                }
            }
        }

        let mut usage_vars = Vec::with_capacity(k);
        let mut chain_aux = vec![Vec::new(); k];
        match formulation {
            Formulation::Indicator => {
                for c in 0..k {
                    let u = arena.alloc(format!("u_{a}_{c}"), part.omega);
                    for (i, row) in selection_vars.iter().enumerate() {
                        constraints.push(LinearConstraint {
                            name: format!("link_{a}_{c}_{i}"),
                            terms: vec![(u, 1.0), (row[c], -1.0)],
                            relation: Relation::Ge,
                            rhs: 0.0,
                        });
                    }
                    usage_vars.push(UsageVar::Dedicated(u));
                }
            }
            Formulation::Chain => {
                for c in 0..k {
                    let column: Vec<VarId> = selection_vars.iter().map(|row| row[c]).collect();
                    if column.len() == 1 {
                        // One box: its selection is the usage indicator.
                        arena.objective[column[0].0] += part.omega;
                        usage_vars.push(UsageVar::Alias(column[0]));
                    } else {
                        let label = format!("u_{a}_{c}");
                        let (aux, chain) =
                            or_chain_constraints(&column, |nm| arena.alloc(nm, 0.0), &label)?;
                        constraints.extend(chain);
                        let usage = *aux.last().expect("chain yields at least one aux");
                        arena.objective[usage.0] = part.omega;
                        chain_aux[c] = aux[..aux.len() - 1].to_vec();
                        usage_vars.push(UsageVar::Dedicated(usage));
                    }
                }
            }
        }

        blocks.push(AttributeBlock {
            attr,
            costs,
            allowed: part.mask.allowed.clone(),
            omega: part.omega,
            selection_vars,
            usage_vars,
            chain_aux,
        });
    }

    Ok(BipProblem {
        formulation,
        blocks,
        objective: arena.objective,
        var_names: arena.names,
        constraints,
    })
}

/// Objective value split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub total: f64,
    pub data_term: f64,
    pub regularity_term: f64,
}

/// Per-attribute slice of a feasible assignment: the chosen center per box
/// and the used-center flags.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSelection {
    pub attr: Attribute,
    pub chosen: Vec<usize>,
    pub used: Vec<bool>,
}

/// Expands a structured selection into a full 0/1 assignment over the
/// problem's variables. Chain auxiliaries are set to the prefix ORs they
/// stand for; indicator usages take the minimal feasible completion.
pub fn variable_assignment(
    problem: &BipProblem,
    selections: &[AttributeSelection],
) -> Result<Vec<f64>> {
    if selections.len() != problem.blocks.len() {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} attribute slices, problem has {} blocks",
            selections.len(),
            problem.blocks.len()
        )));
    }
    let mut x = vec![0.0; problem.n_vars()];
    for (block, sel) in problem.blocks.iter().zip(selections) {
        if sel.attr != block.attr {
            return Err(Error::DimensionMismatch(format!(
                "selection attribute {} does not match block {}",
                sel.attr.name(),
                block.attr.name()
            )));
        }
        let (n, k) = (block.n_boxes(), block.n_centers());
        if sel.chosen.len() != n || sel.used.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "attribute {}: selection shape mismatch",
                block.attr.name()
            )));
        }
        let mut derived_used = vec![false; k];
        for (i, &c) in sel.chosen.iter().enumerate() {
            if c >= k {
                return Err(Error::DimensionMismatch(format!(
                    "attribute {}: box {i} selects center {c} of {k}",
                    block.attr.name()
                )));
            }
            x[block.selection_vars[i][c].0] = 1.0;
            derived_used[c] = true;
        }
        if derived_used != sel.used {
            return Err(Error::ViolatedConstraint {
                name: format!(
                    "usage_{}: used flags must equal the or of the selections",
                    block.attr.name()
                ),
            });
        }
        for (c, usage) in block.usage_vars.iter().enumerate() {
            match usage {
                UsageVar::Dedicated(u) => {
                    if derived_used[c] {
                        x[u.0] = 1.0;
                    }
                    // Chain intermediates are the running ORs of the column.
                    let mut acc = x[block.selection_vars[0][c].0] != 0.0;
                    for (j, aux) in block.chain_aux[c].iter().enumerate() {
                        acc = acc || x[block.selection_vars[j + 1][c].0] != 0.0;
                        x[aux.0] = if acc { 1.0 } else { 0.0 };
                    }
                }
                UsageVar::Alias(_) => {}
            }
        }
    }
    Ok(x)
}

/// Checks a full assignment against every constraint; the first violated
/// constraint is reported by name.
pub fn check_feasible(problem: &BipProblem, x: &[f64]) -> Result<()> {
    for c in &problem.constraints {
        let lhs: f64 = c.terms.iter().map(|&(v, coeff)| coeff * x[v.0]).sum();
        if !c.relation.holds(lhs, c.rhs) {
            return Err(Error::ViolatedConstraint {
                name: c.name.clone(),
            });
        }
    }
    Ok(())
}

/// Evaluates a structured selection against the assembled program: verifies
/// feasibility, then returns the objective with its data/regularity split.
///
/// The total is computed from the flat objective vector; the split comes from
/// the structured costs. The two always agree to floating-point noise.
pub fn evaluate_objective(
    problem: &BipProblem,
    selections: &[AttributeSelection],
) -> Result<ObjectiveValue> {
    let x = variable_assignment(problem, selections)?;
    check_feasible(problem, &x)?;
    let total: f64 = problem
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    let mut data_term = 0.0;
    let mut regularity_term = 0.0;
    for (block, sel) in problem.blocks.iter().zip(selections) {
        for (i, &c) in sel.chosen.iter().enumerate() {
            data_term += block.costs[i][c];
        }
        regularity_term += block.omega * sel.used.iter().filter(|&&u| u).count() as f64;
    }
    Ok(ObjectiveValue {
        total,
        data_term,
        regularity_term,
    })
}
