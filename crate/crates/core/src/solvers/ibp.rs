use crate::exec::{interval_forward, Interval};
use crate::netir::Network;
use crate::vnnlib::{Clause, LinearConstraint, Property};

use super::{SolveStatus, SolverError};

/// Per-dimension bounds `[lo, hi]`.
pub type IntervalVector = Vec<Interval>;

/// Interval image of `input` through the network. Encloses the `f64`
/// forward output of every point in the box.
pub fn ibp_bounds(net: &Network, input: &[Interval]) -> Result<IntervalVector, SolverError> {
    Ok(interval_forward(net, input)?)
}

/// Lower bound of the constraint's left-hand side over output intervals,
/// accumulated in the same order as [`LinearConstraint::lhs`].
pub(crate) fn lhs_lower_bound(c: &LinearConstraint, y: &[Interval]) -> f64 {
    c.coefficients().iter().fold(0.0, |acc, (&j, &w)| {
        acc + if w >= 0.0 { w * y[j].lo } else { w * y[j].hi }
    })
}

/// Slack demanded beyond the right-hand side before a constraint counts as
/// refuted, so refutation also holds for the exact real-valued network.
pub(crate) fn refutation_slack(rhs: f64) -> f64 {
    1e-9 * (1.0 + rhs.abs())
}

/// True when some output constraint of `clause` is infeasible on the box.
/// Boxes whose bounds overflow are never refuted.
pub(crate) fn clause_refuted_on(net: &Network, clause: &Clause, lo: &[f64], hi: &[f64]) -> bool {
    if clause.output_constraints.is_empty() {
        return false;
    }
    let input: Vec<Interval> = lo
        .iter()
        .zip(hi)
        .map(|(&l, &h)| Interval::new(l, h))
        .collect();
    let Ok(y) = interval_forward(net, &input) else {
        return false;
    };
    clause
        .output_constraints
        .iter()
        .any(|c| lhs_lower_bound(c, &y) > c.rhs() + refutation_slack(c.rhs()))
}

/// `Holds` if interval bounds refute every clause on its input box hull,
/// otherwise `Unknown`.
pub fn verify_ibp(net: &Network, p: &Property) -> Result<SolveStatus, SolverError> {
    crate::adjudicate::check_arity(net, p)?;
    for clause in p.clauses() {
        let hull = clause.box_hull(p.num_inputs())?;
        if hull.is_empty() {
            continue;
        }
        if !clause_refuted_on(net, clause, &hull.lower(), &hull.upper()) {
            return Ok(SolveStatus::Unknown);
        }
    }
    Ok(SolveStatus::Holds)
}
