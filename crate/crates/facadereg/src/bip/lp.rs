//! Export of an assembled program in the CPLEX LP text format, for
//! cross-checking against external solvers.
//!
//! Variable names encode (attribute, box, cluster): selections are
//! `a_<attr>_<box>_<cluster>`, usage indicators `u_<attr>_<cluster>`, and
//! chain auxiliaries `u_<attr>_<cluster>_or<step>`.

use std::fmt::Write as _;

use super::{BipProblem, Relation};

/// Renders the problem as an LP-format string. Output is deterministic for
/// identical problems.
pub fn write_lp(problem: &BipProblem) -> String {
    let mut out = String::new();
    out.push_str("\\ facade regularization binary integer program\n");
    out.push_str("Minimize\n obj:");
    let mut first = true;
    for (id, &coeff) in problem.objective.iter().enumerate() {
        if coeff == 0.0 {
            continue;
        }
        push_term(&mut out, &mut first, coeff, &problem.var_names[id]);
    }
    if first {
        out.push_str(" 0");
    }
    out.push('\n');

    out.push_str("Subject To\n");
    for c in &problem.constraints {
        let _ = write!(out, " {}:", c.name);
        let mut first = true;
        for &(v, coeff) in &c.terms {
            push_term(&mut out, &mut first, coeff, &problem.var_names[v.0]);
        }
        let _ = writeln!(out, " {} {}", rel_symbol(c.relation), fmt_num(c.rhs));
    }

    out.push_str("Binary\n");
    for name in &problem.var_names {
        let _ = writeln!(out, " {name}");
    }
    out.push_str("End\n");
    out
}

fn rel_symbol(r: Relation) -> &'static str {
    match r {
        Relation::Le => "<=",
        Relation::Eq => "=",
        Relation::Ge => ">=",
    }
}

fn push_term(out: &mut String, first: &mut bool, coeff: f64, name: &str) {
    let sign = if coeff < 0.0 {
        " - "
    } else if *first {
        " "
    } else {
        " + "
    };
    out.push_str(sign);
    let mag = coeff.abs();
    if mag == 1.0 {
        out.push_str(name);
    } else {
        let _ = write!(out, "{} {}", fmt_num(mag), name);
    }
    *first = false;
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
