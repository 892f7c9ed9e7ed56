//! Counterexample files.
//!
//! ```text
//! file    := status? bindings
//! status  := atom            ; e.g. `sat`, `violated`; ignored
//! bindings:= "(" binding* ")" | binding*
//! binding := "(" var real ")"
//! var     := X_<int> | Y_<int>
//! ```
//!
//! Every declared input must be bound exactly once. Outputs are optional, but
//! if any `Y_j` appears then all of them must.

use super::parse::{real_literal, var_name};
use super::property::{Assignment, VarKind};
use super::sexpr::{read_all, SExpr};
use super::VnnlibError;

pub fn parse_counterexample(
    text: &str,
    num_inputs: usize,
    num_outputs: usize,
) -> Result<Assignment, VnnlibError> {
    let exprs = read_all(text).map_err(|e| VnnlibError::Syntax {
        pos: e.pos,
        message: e.message,
    })?;
    let body: Vec<&SExpr> = exprs.iter().skip_while(|e| e.as_atom().is_some()).collect();

    let bindings: Vec<&SExpr> = match body.as_slice() {
        [SExpr::List(items, _)] if items.first().is_some_and(|i| i.as_list().is_some()) => {
            items.iter().collect()
        }
        _ => body,
    };

    let mut inputs = vec![None; num_inputs];
    let mut outputs = vec![None; num_outputs];
    for b in bindings {
        let (name, value) = match b.as_list() {
            Some([SExpr::Atom(name, npos), SExpr::Atom(value, vpos)]) => {
                (var_name(name, *npos)?, real_literal(value, *vpos)?)
            }
            _ => {
                return Err(VnnlibError::Syntax {
                    pos: b.pos(),
                    message: "expected a `(name value)` binding".into(),
                })
            }
        };
        let (kind, index) = name;
        let slots = match kind {
            VarKind::Input => &mut inputs,
            VarKind::Output => &mut outputs,
        };
        let label = format!("{}_{}", kind.prefix(), index);
        let declared = slots.len();
        let slot = slots.get_mut(index).ok_or(VnnlibError::IndexOutOfRange {
            name: label.clone(),
            declared,
        })?;
        if slot.replace(value).is_some() {
            return Err(VnnlibError::DuplicateBinding {
                pos: b.pos(),
                name: label,
            });
        }
    }

    let inputs = inputs
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or(VnnlibError::MissingDeclaration {
                name: format!("X_{i}"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let outputs = if outputs.iter().all(Option::is_none) {
        None
    } else {
        Some(
            outputs
                .into_iter()
                .enumerate()
                .map(|(j, v)| {
                    v.ok_or(VnnlibError::MissingDeclaration {
                        name: format!("Y_{j}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
        )
    };
    Ok(Assignment { inputs, outputs })
}

/// Renders an assignment as `(` bindings joined by newlines `)` plus a trailing
/// newline. Values use the shortest representation that round-trips.
pub fn write_counterexample(a: &Assignment) -> String {
    let mut lines: Vec<String> = a
        .inputs
        .iter()
        .enumerate()
        .map(|(i, v)| format!("(X_{i} {v:?})"))
        .collect();
    if let Some(ys) = &a.outputs {
        lines.extend(ys.iter().enumerate().map(|(j, v)| format!("(Y_{j} {v:?})")));
    }
    format!("({})\n", lines.join("\n"))
}
