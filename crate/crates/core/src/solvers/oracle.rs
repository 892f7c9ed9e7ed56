//! Exact decision procedure for small piecewise-linear networks.
//!
//! For each clause, activation patterns are explored depth first. A pattern
//! prefix is extended only while the input constraints together with the
//! pattern's sign conditions stay feasible; a complete pattern makes the
//! network affine, and the clause is satisfiable on it iff adding the output
//! constraints keeps the system feasible. All arithmetic is exact over the
//! real-number semantics of the network.

use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::fm::{feasible, Row};
use super::symbolic::{rational, Affine, PatternDomain, Sym};
use super::SolverError;
use crate::exec::run;
use crate::netir::{Network, NodeOp};
use crate::vnnlib::{Assignment, Clause, LinearConstraint, Property};

pub const ORACLE_MAX_RELUS: usize = 16;
pub const ORACLE_MAX_INPUTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleVerdict {
    Holds,
    /// A point satisfying the clause exactly, rounded to the nearest doubles,
    /// with the network's `f64` outputs at that point.
    Violated {
        clause: usize,
        witness: Assignment,
    },
}

impl OracleVerdict {
    pub fn is_holds(&self) -> bool {
        matches!(self, OracleVerdict::Holds)
    }
}

pub fn check_oracle_preconditions(net: &Network, p: &Property) -> Result<(), SolverError> {
    if let Some(n) = net.nodes().iter().find(|n| !n.op.is_piecewise_linear()) {
        return Err(SolverError::Oracle(format!(
            "node `{}` ({}) is not piecewise linear",
            n.name,
            n.op.kind()
        )));
    }
    if let Some(n) = net.nodes().iter().find(|n| {
        matches!(n.op, NodeOp::MatMul | NodeOp::Gemm { .. })
            && net.constant(n.inputs[0]).is_none()
            && net.constant(n.inputs[1]).is_none()
    }) {
        return Err(SolverError::Oracle(format!(
            "node `{}` multiplies two computed tensors",
            n.name
        )));
    }
    if net.relu_count() > ORACLE_MAX_RELUS {
        return Err(SolverError::Oracle(format!(
            "{} ReLU units exceed the limit of {ORACLE_MAX_RELUS}",
            net.relu_count()
        )));
    }
    if net.num_inputs() > ORACLE_MAX_INPUTS {
        return Err(SolverError::Oracle(format!(
            "{} inputs exceed the limit of {ORACLE_MAX_INPUTS}",
            net.num_inputs()
        )));
    }
    crate::adjudicate::check_arity(net, p)?;
    Ok(())
}

fn constraint_row(c: &LinearConstraint, n: usize) -> Row {
    let mut coeffs = vec![BigRational::from_integer(0.into()); n];
    for (&i, &v) in c.coefficients() {
        coeffs[i] = rational(v);
    }
    Row::new(coeffs, rational(c.rhs()))
}

/// The output constraint `Σ c_j y_j <= rhs` with `y` affine in the inputs.
fn output_row(c: &LinearConstraint, outputs: &[Affine]) -> Row {
    let n = outputs[0].coeffs.len();
    let mut lhs = Affine {
        coeffs: vec![BigRational::from_integer(0.into()); n],
        constant: -rational(c.rhs()),
    };
    for (&j, &w) in c.coefficients() {
        let w = rational(w);
        for (acc, v) in lhs.coeffs.iter_mut().zip(&outputs[j].coeffs) {
            *acc += &w * v;
        }
        lhs.constant += &w * &outputs[j].constant;
    }
    lhs.nonpositive()
}

fn decide_clause(
    net: &Network,
    clause: &Clause,
    n: usize,
) -> Result<Option<Vec<BigRational>>, SolverError> {
    let hull = clause.box_hull(n)?;
    if hull.is_empty() {
        return Ok(None);
    }
    let lo: Vec<BigRational> = hull.bounds.iter().map(|b| rational(b.0)).collect();
    let hi: Vec<BigRational> = hull.bounds.iter().map(|b| rational(b.1)).collect();
    let base: Vec<Row> = clause
        .input_constraints
        .iter()
        .map(|c| constraint_row(c, n))
        .collect();
    if feasible(&base, n).is_none() {
        return Ok(None);
    }
    let inputs: Vec<Sym> = (0..n).map(|i| Sym::Live(Affine::variable(n, i))).collect();
    let mut stack: Vec<Vec<bool>> = vec![Vec::new()];
    while let Some(tape) = stack.pop() {
        let mut dom = PatternDomain::new(&lo, &hi, &tape);
        let values = run(&mut dom, net, inputs.clone(), |_, _| Ok(()))?;
        let mut rows = base.clone();
        rows.append(&mut dom.rows);
        if let Some(expr) = dom.pending.take() {
            // explore the active/larger branch first
            for (decision, row) in [(false, expr.nonpositive()), (true, expr.nonnegative())] {
                let mut child = rows.clone();
                child.push(row);
                if feasible(&child, n).is_some() {
                    let mut t = tape.clone();
                    t.push(decision);
                    stack.push(t);
                }
            }
            continue;
        }
        let outputs: Vec<Affine> = values[net.output()]
            .as_ref()
            .expect("output computed")
            .data()
            .iter()
            .map(|v| match v {
                Sym::Live(a) => a.clone(),
                Sym::Dead => unreachable!("complete pattern"),
            })
            .collect();
        rows.extend(
            clause
                .output_constraints
                .iter()
                .map(|c| output_row(c, &outputs)),
        );
        if let Some(x) = feasible(&rows, n) {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

/// Decides the property exactly. Clauses are tried in order; the first
/// satisfiable one yields the witness.
pub fn oracle_decide(net: &Network, p: &Property) -> Result<OracleVerdict, SolverError> {
    check_oracle_preconditions(net, p)?;
    let n = net.num_inputs();
    for (i, clause) in p.clauses().iter().enumerate() {
        if let Some(x) = decide_clause(net, clause, n)? {
            let inputs: Vec<f64> = x
                .iter()
                .map(|v| v.to_f64().expect("bounded rational"))
                .collect();
            let outputs = crate::exec::forward(net, &inputs)?;
            return Ok(OracleVerdict::Violated {
                clause: i,
                witness: Assignment::new(inputs, Some(outputs)),
            });
        }
    }
    Ok(OracleVerdict::Holds)
}

/// True when the verdict survives moving every output threshold by `delta`
/// against it: a holding property still holds with outputs relaxed by
/// `delta`, a violated one is still violated with outputs tightened by
/// `delta`.
pub fn oracle_margin_exceeds(net: &Network, p: &Property, delta: f64) -> Result<bool, SolverError> {
    Ok(match oracle_decide(net, p)? {
        OracleVerdict::Holds => oracle_decide(net, &p.with_output_shift(delta))?.is_holds(),
        OracleVerdict::Violated { .. } => {
            !oracle_decide(net, &p.with_output_shift(-delta))?.is_holds()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netir::parse_text_network;
    use crate::vnnlib::{evaluate_assignment, parse_vnnlib};

    fn relu_net() -> Network {
        parse_text_network("gemm 1 1\nweights 1\nrelu\n").unwrap()
    }

    fn spec(out: &str) -> Property {
        parse_vnnlib(&format!(
            "(declare-const X_0 Real)(declare-const Y_0 Real)\
             (assert (>= X_0 -1))(assert (<= X_0 1)){out}"
        ))
        .unwrap()
    }

    #[test]
    fn relu_reaches_half() {
        let p = spec("(assert (>= Y_0 0.5))");
        match oracle_decide(&relu_net(), &p).unwrap() {
            OracleVerdict::Violated { clause, witness } => {
                assert_eq!(clause, 0);
                let y = witness.outputs.clone().unwrap();
                assert!(
                    evaluate_assignment(&p, &witness.inputs, &y, 0.0).is_some(),
                    "{witness:?}"
                );
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn relu_is_nonnegative() {
        let p = spec("(assert (<= Y_0 -0.1))");
        assert_eq!(
            oracle_decide(&relu_net(), &p).unwrap(),
            OracleVerdict::Holds
        );
        // the boundary y = 0 is reachable
        let p = spec("(assert (<= Y_0 0))");
        assert!(!oracle_decide(&relu_net(), &p).unwrap().is_holds());
    }

    #[test]
    fn margins() {
        let p = spec("(assert (<= Y_0 -0.1))");
        assert!(oracle_margin_exceeds(&relu_net(), &p, 0.05).unwrap());
        assert!(!oracle_margin_exceeds(&relu_net(), &p, 0.2).unwrap());
    }

    #[test]
    fn preconditions() {
        let p = spec("(assert (<= Y_0 0))");
        let tanh = parse_text_network("gemm 1 1\nweights 1\ntanh\n").unwrap();
        assert!(matches!(
            oracle_decide(&tanh, &p),
            Err(SolverError::Oracle(_))
        ));
        let wide = parse_text_network("input 5\ngemm 1 5\nweights 1 1 1 1 1\n").unwrap();
        assert!(oracle_decide(&wide, &p).is_err());
    }
}
