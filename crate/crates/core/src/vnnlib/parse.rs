use std::collections::{BTreeMap, BTreeSet};

use super::property::{Formula, LinearConstraint, Property, Relation, Script, VarKind};
use super::sexpr::{read_all, Pos, SExpr};
use super::VnnlibError;

/// Parses a VNN-LIB file and expands it into disjunctive normal form.
pub fn parse_vnnlib(text: &str) -> Result<Property, VnnlibError> {
    parse_script(text)?.expand()
}

/// Parses declarations and assertions without expanding them.
pub fn parse_script(text: &str) -> Result<Script, VnnlibError> {
    let exprs = read_all(text).map_err(|e| VnnlibError::Syntax {
        pos: e.pos,
        message: e.message,
    })?;

    let mut declared: BTreeMap<VarKind, BTreeSet<usize>> = BTreeMap::new();
    let mut asserts = Vec::new();
    for expr in &exprs {
        let items = expr
            .as_list()
            .ok_or_else(|| syntax(expr.pos(), "expected a command"))?;
        let head = items
            .first()
            .and_then(SExpr::as_atom)
            .ok_or_else(|| syntax(expr.pos(), "expected a command name"))?;
        match head {
            "declare-const" => {
                let [_, name, sort] = items else {
                    return Err(syntax(expr.pos(), "declare-const takes a name and a sort"));
                };
                let (name, pos) = atom(name)?;
                let (kind, index) = var_name(name, pos)?;
                match atom(sort)? {
                    ("Real", _) => {}
                    (other, pos) => {
                        return Err(syntax(pos, &format!("unsupported sort `{other}`")));
                    }
                }
                if !declared.entry(kind).or_default().insert(index) {
                    return Err(syntax(pos, &format!("`{name}` declared twice")));
                }
            }
            "assert" => {
                let [_, body] = items else {
                    return Err(syntax(expr.pos(), "assert takes exactly one formula"));
                };
                asserts.push(formula(body, &declared)?);
            }
            other => {
                return Err(syntax(
                    items[0].pos(),
                    &format!("unsupported command `{other}`"),
                ));
            }
        }
    }

    let count = |kind: VarKind| -> Result<usize, VnnlibError> {
        let set = declared.get(&kind).cloned().unwrap_or_default();
        match (0..set.len()).find(|i| !set.contains(i)) {
            None => Ok(set.len()),
            Some(gap) => Err(VnnlibError::MissingDeclaration {
                name: format!("{}_{}", kind.prefix(), gap),
            }),
        }
    };
    Ok(Script {
        num_inputs: count(VarKind::Input)?,
        num_outputs: count(VarKind::Output)?,
        asserts,
    })
}

fn syntax(pos: Pos, message: &str) -> VnnlibError {
    VnnlibError::Syntax {
        pos,
        message: message.to_string(),
    }
}

fn atom(e: &SExpr) -> Result<(&str, Pos), VnnlibError> {
    match e {
        SExpr::Atom(s, p) => Ok((s, *p)),
        SExpr::List(_, p) => Err(syntax(*p, "expected an atom")),
    }
}

/// Splits `X_<int>` / `Y_<int>`.
pub(crate) fn var_name(name: &str, pos: Pos) -> Result<(VarKind, usize), VnnlibError> {
    let bad = || VnnlibError::BadIdentifier {
        pos,
        name: name.to_string(),
    };
    let (kind, digits) = if let Some(rest) = name.strip_prefix("X_") {
        (VarKind::Input, rest)
    } else if let Some(rest) = name.strip_prefix("Y_") {
        (VarKind::Output, rest)
    } else {
        return Err(bad());
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    digits.parse().map(|i| (kind, i)).map_err(|_| bad())
}

/// Parses a real literal; scientific notation is accepted, non-finite values are not.
pub(crate) fn real_literal(text: &str, pos: Pos) -> Result<f64, VnnlibError> {
    let looks_numeric = text
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
        && text.bytes().any(|b| b.is_ascii_digit());
    match text.parse::<f64>() {
        Ok(v) if looks_numeric && v.is_finite() => Ok(v),
        _ => Err(VnnlibError::BadLiteral {
            pos,
            text: text.to_string(),
        }),
    }
}

fn is_numeric_start(text: &str) -> bool {
    let mut bytes = text.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_digit() || b == b'.' => true,
        Some(b'-' | b'+') => matches!(bytes.next(), Some(b) if b.is_ascii_digit() || b == b'.'),
        _ => false,
    }
}

fn formula(
    e: &SExpr,
    declared: &BTreeMap<VarKind, BTreeSet<usize>>,
) -> Result<Formula, VnnlibError> {
    let items = e
        .as_list()
        .ok_or_else(|| syntax(e.pos(), "expected a formula"))?;
    let (head, hpos) = match items.first() {
        Some(h) => atom(h)?,
        None => return Err(syntax(e.pos(), "empty formula")),
    };
    match head {
        "and" => Ok(Formula::And(
            items[1..]
                .iter()
                .map(|f| formula(f, declared))
                .collect::<Result<_, _>>()?,
        )),
        "or" => Ok(Formula::Or(
            items[1..]
                .iter()
                .map(|f| formula(f, declared))
                .collect::<Result<_, _>>()?,
        )),
        "<=" | ">=" => {
            let [_, lhs, rhs] = items else {
                return Err(syntax(hpos, &format!("`{head}` takes exactly two terms")));
            };
            let relation = if head == "<=" {
                Relation::LessEq
            } else {
                Relation::GreaterEq
            };
            let mut diff = term(lhs, declared)?;
            diff.add_scaled(&term(rhs, declared)?, -1.0);
            diff.coeffs.retain(|_, c| *c != 0.0);
            let mut kinds = diff.coeffs.keys().map(|(k, _)| *k).collect::<BTreeSet<_>>();
            let kind = match kinds.len() {
                0 => return Err(VnnlibError::ConstantAtom { pos: Some(e.pos()) }),
                1 => kinds.pop_first().expect("one kind"),
                _ => return Err(VnnlibError::MixedAtom { pos: e.pos() }),
            };
            let coeffs = diff.coeffs.iter().map(|(&(_, i), &c)| (i, c));
            LinearConstraint::new(kind, coeffs, relation, -diff.constant)
                .map(Formula::Atom)
                .map_err(|err| match err {
                    VnnlibError::ConstantAtom { .. } => {
                        VnnlibError::ConstantAtom { pos: Some(e.pos()) }
                    }
                    other => other,
                })
        }
        other => Err(syntax(hpos, &format!("unsupported connective `{other}`"))),
    }
}

#[derive(Debug, Clone, Default)]
struct LinExpr {
    coeffs: BTreeMap<(VarKind, usize), f64>,
    constant: f64,
}

impl LinExpr {
    fn is_constant(&self) -> bool {
        self.coeffs.values().all(|c| *c == 0.0)
    }

    fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        for (k, c) in &other.coeffs {
            *self.coeffs.entry(*k).or_insert(0.0) += s * c;
        }
        self.constant += s * other.constant;
    }

    fn scale(&mut self, s: f64) {
        for c in self.coeffs.values_mut() {
            *c *= s;
        }
        self.constant *= s;
    }
}

fn term(e: &SExpr, declared: &BTreeMap<VarKind, BTreeSet<usize>>) -> Result<LinExpr, VnnlibError> {
    match e {
        SExpr::Atom(text, pos) => {
            if is_numeric_start(text) {
                return Ok(LinExpr {
                    constant: real_literal(text, *pos)?,
                    ..Default::default()
                });
            }
            let (kind, index) = var_name(text, *pos)?;
            if !declared.get(&kind).is_some_and(|s| s.contains(&index)) {
                return Err(VnnlibError::Undeclared {
                    pos: *pos,
                    name: text.clone(),
                });
            }
            let mut out = LinExpr::default();
            out.coeffs.insert((kind, index), 1.0);
            Ok(out)
        }
        SExpr::List(items, pos) => {
            let (head, hpos) = match items.first() {
                Some(h) => atom(h)?,
                None => return Err(syntax(*pos, "empty term")),
            };
            let args = items[1..]
                .iter()
                .map(|t| term(t, declared))
                .collect::<Result<Vec<_>, _>>()?;
            if args.is_empty() {
                return Err(syntax(hpos, &format!("`{head}` needs arguments")));
            }
            match head {
                "+" => {
                    let mut out = LinExpr::default();
                    for a in &args {
                        out.add_scaled(a, 1.0);
                    }
                    Ok(out)
                }
                "-" => {
                    let mut out = args[0].clone();
                    if args.len() == 1 {
                        out.scale(-1.0);
                    }
                    for a in &args[1..] {
                        out.add_scaled(a, -1.0);
                    }
                    Ok(out)
                }
                "*" => {
                    let mut factor = 1.0;
                    let mut variable: Option<LinExpr> = None;
                    for a in args {
                        if a.is_constant() {
                            factor *= a.constant;
                        } else if variable.is_some() {
                            return Err(VnnlibError::NonLinear { pos: *pos });
                        } else {
                            variable = Some(a);
                        }
                    }
                    let mut out = variable.unwrap_or_else(|| LinExpr {
                        constant: 1.0,
                        ..Default::default()
                    });
                    out.scale(factor);
                    Ok(out)
                }
                other => Err(syntax(hpos, &format!("unsupported operator `{other}`"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vnnlib::property::Clause;

    const BOX_1D: &str = "(declare-const X_0 Real)\n(declare-const Y_0 Real)\n";

    #[test]
    fn single_clause_transcription() {
        let p = parse_vnnlib(&format!(
            "{BOX_1D}(assert (>= X_0 0.0)) (assert (<= X_0 1.0)) (assert (>= Y_0 0.5))"
        ))
        .unwrap();
        assert_eq!(p.num_inputs(), 1);
        assert_eq!(p.num_outputs(), 1);
        let expected = Clause::from_constraints(vec![
            LinearConstraint::lower(VarKind::Input, 0, 0.0),
            LinearConstraint::upper(VarKind::Input, 0, 1.0),
            LinearConstraint::lower(VarKind::Output, 0, 0.5),
        ]);
        assert_eq!(p.clauses(), &[expected]);
    }

    #[test]
    fn runner_up_disjunction_shares_input_box() {
        let text = "\
(declare-const X_0 Real)
(declare-const Y_0 Real)
(declare-const Y_1 Real)
(declare-const Y_2 Real)
(assert (>= X_0 -1))
(assert (<= X_0 1))
(assert (or (and (<= Y_0 Y_1)) (and (<= Y_0 Y_2))))
";
        let p = parse_vnnlib(text).unwrap();
        assert_eq!(p.clauses().len(), 2);
        for (k, other) in [1usize, 2].into_iter().enumerate() {
            let c = &p.clauses()[k];
            assert_eq!(c.input_constraints.len(), 2);
            assert_eq!(c.output_constraints.len(), 1);
            let o = &c.output_constraints[0];
            assert_eq!(o.coefficients().get(&0), Some(&1.0));
            assert_eq!(o.coefficients().get(&other), Some(&-1.0));
            assert_eq!(o.rhs(), 0.0);
        }
    }

    #[test]
    fn independent_disjunctions_cross_multiply() {
        let text = format!(
            "{BOX_1D}(declare-const Y_1 Real)\n(assert (<= X_0 1)) (assert (>= X_0 0))\n\
             (assert (or (<= Y_0 1) (>= Y_0 2)))\n(assert (or (<= Y_1 3) (>= Y_1 4)))"
        );
        let p = parse_vnnlib(&text).unwrap();
        // 2 x 2 cross product, ordered by the first assert's choice.
        let rhs: Vec<(f64, f64)> = p
            .clauses()
            .iter()
            .map(|c| {
                (
                    c.output_constraints[0].written().1,
                    c.output_constraints[1].written().1,
                )
            })
            .collect();
        assert_eq!(rhs, vec![(1.0, 3.0), (1.0, 4.0), (2.0, 3.0), (2.0, 4.0)]);
    }

    #[test]
    fn nonlinear_product_is_rejected() {
        let text =
            "(declare-const X_0 Real)(declare-const X_1 Real)\n(assert (<= (* X_0 X_1) 1.0))";
        assert!(matches!(
            parse_vnnlib(text),
            Err(VnnlibError::NonLinear { .. })
        ));
    }

    #[test]
    fn linear_terms() {
        let text = "(declare-const X_0 Real)(declare-const X_1 Real)(declare-const Y_0 Real)
(assert (<= (+ (* 2 X_0) (- X_1) 1.5e0) (* 0.5 3)))
(assert (>= X_0 -1)) (assert (<= X_0 1)) (assert (>= X_1 -1)) (assert (<= X_1 1))
(assert (>= (- Y_0 1) 0))";
        let p = parse_vnnlib(text).unwrap();
        let c = &p.clauses()[0].input_constraints[0];
        assert_eq!(c.coefficients()[&0], 2.0);
        assert_eq!(c.coefficients()[&1], -1.0);
        assert_eq!(c.rhs(), 0.0);
        let y = &p.clauses()[0].output_constraints[0];
        assert_eq!(y.written(), (vec![(0, 1.0)], 1.0));
    }

    #[test]
    fn error_cases() {
        let undeclared = "(declare-const X_0 Real)(assert (<= X_1 1))";
        assert!(matches!(
            parse_vnnlib(undeclared),
            Err(VnnlibError::Undeclared { .. })
        ));

        let mixed = "(declare-const X_0 Real)(declare-const Y_0 Real)(assert (<= X_0 Y_0))";
        assert!(matches!(
            parse_vnnlib(mixed),
            Err(VnnlibError::MixedAtom { .. })
        ));

        let empty = "(declare-const X_0 Real)";
        assert!(matches!(
            parse_vnnlib(empty),
            Err(VnnlibError::NoAssertions)
        ));

        let bad_name = "(declare-const foo Real)";
        assert!(matches!(
            parse_vnnlib(bad_name),
            Err(VnnlibError::BadIdentifier { .. })
        ));

        let sort = "(declare-const X_0 Int)";
        assert!(matches!(
            parse_vnnlib(sort),
            Err(VnnlibError::Syntax { .. })
        ));

        let gap = "(declare-const X_1 Real)(assert (<= X_1 1))";
        assert!(matches!(
            parse_vnnlib(gap),
            Err(VnnlibError::MissingDeclaration { .. })
        ));

        let unbounded = format!("{BOX_1D}(assert (<= X_0 1)) (assert (>= Y_0 0))");
        assert!(matches!(
            parse_vnnlib(&unbounded),
            Err(VnnlibError::Unbounded { .. })
        ));

        let constant = format!("{BOX_1D}(assert (<= X_0 1)) (assert (>= X_0 0)) (assert (<= 1 2))");
        assert!(matches!(
            parse_vnnlib(&constant),
            Err(VnnlibError::ConstantAtom { .. })
        ));

        let literal = format!("{BOX_1D}(assert (<= X_0 1.2.3))");
        assert!(matches!(
            parse_vnnlib(&literal),
            Err(VnnlibError::BadLiteral { .. })
        ));
    }

    #[test]
    fn errors_carry_positions() {
        let err =
            parse_vnnlib("(declare-const X_0 Real)\n\n  (assert (<= (* X_0 X_0) 1))").unwrap_err();
        assert_eq!(
            err.to_string(),
            "3:15: non-linear term: product of two variables"
        );
    }

    #[test]
    fn clause_cap_is_enforced() {
        let mut text = String::from("(declare-const X_0 Real)(declare-const Y_0 Real)\n");
        text.push_str("(assert (<= X_0 1)) (assert (>= X_0 0))\n");
        // 2^17 = 131072 > 65536
        for _ in 0..17 {
            text.push_str("(assert (or (<= Y_0 1) (>= Y_0 2)))\n");
        }
        assert!(matches!(
            parse_vnnlib(&text),
            Err(VnnlibError::TooManyClauses { cap: 65_536 })
        ));
    }
}
