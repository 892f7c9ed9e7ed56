use std::fmt::{self, Write};

use super::property::{LinearConstraint, Property, Relation};

fn term(c: &LinearConstraint) -> String {
    let (coeffs, _) = c.written();
    let parts: Vec<String> = coeffs
        .iter()
        .map(|&(i, a)| {
            let name = format!("{}_{}", c.kind().prefix(), i);
            if a == 1.0 {
                name
            } else if a == -1.0 {
                format!("(- {name})")
            } else {
                format!("(* {a:?} {name})")
            }
        })
        .collect();
    if parts.len() == 1 {
        parts.into_iter().next().expect("one part")
    } else {
        format!("(+ {})", parts.join(" "))
    }
}

/// The constraint as a VNN-LIB atom in its written relation.
pub fn atom_sexpr(c: &LinearConstraint) -> String {
    let (_, rhs) = c.written();
    let op = match c.relation() {
        Relation::LessEq => "<=",
        Relation::GreaterEq => ">=",
    };
    format!("({op} {} {rhs:?})", term(c))
}

/// Renders a property as a VNN-LIB file that parses back to the same clauses.
pub fn write_vnnlib(p: &Property) -> String {
    let mut out = String::new();
    for i in 0..p.num_inputs() {
        writeln!(out, "(declare-const X_{i} Real)").unwrap();
    }
    for j in 0..p.num_outputs() {
        writeln!(out, "(declare-const Y_{j} Real)").unwrap();
    }
    out.push_str("(assert (or\n");
    for clause in p.clauses() {
        let atoms: Vec<String> = clause
            .input_constraints
            .iter()
            .chain(&clause.output_constraints)
            .map(atom_sexpr)
            .collect();
        writeln!(out, "  (and {})", atoms.join(" ")).unwrap();
    }
    out.push_str("))\n");
    out
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_vnnlib(self))
    }
}
