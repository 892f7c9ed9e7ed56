//! VNN-LIB specifications and counterexample files.
//!
//! A specification declares inputs `X_i` and outputs `Y_j` of sort `Real` and
//! asserts linear `<=`/`>=` atoms combined with `and`/`or`. The conjunction of
//! all asserts describes a counterexample: if it is satisfiable the property is
//! violated, otherwise it holds. Parsing expands the asserts into disjunctive
//! normal form ([`Property::clauses`]).

mod counterexample;
mod parse;
mod print;
mod property;
pub mod sexpr;

use thiserror::Error;

pub use counterexample::{parse_counterexample, write_counterexample};
pub use parse::{parse_script, parse_vnnlib};
pub use print::{atom_sexpr, write_vnnlib};
pub use property::{
    evaluate_assignment, input_box_hull, Assignment, BoxHull, Clause, Formula, LinearConstraint,
    Property, Relation, Script, VarKind, MAX_CLAUSES,
};
pub use sexpr::Pos;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VnnlibError {
    #[error("{pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: undeclared variable `{name}`")]
    Undeclared { pos: Pos, name: String },
    #[error("{pos}: unsupported identifier `{name}` (expected X_<int> or Y_<int>)")]
    BadIdentifier { pos: Pos, name: String },
    #[error("{pos}: invalid numeric literal `{text}`")]
    BadLiteral { pos: Pos, text: String },
    #[error("{pos}: non-linear term: product of two variables")]
    NonLinear { pos: Pos },
    #[error("{pos}: atom mixes input and output variables")]
    MixedAtom { pos: Pos },
    #[error("{}atom has no variable with a nonzero coefficient", pos.map(|p| format!("{p}: ")).unwrap_or_default())]
    ConstantAtom { pos: Option<Pos> },
    #[error("DNF expansion exceeds {cap} clauses")]
    TooManyClauses { cap: usize },
    #[error("specification has no assertions")]
    NoAssertions,
    #[error("property has no clauses")]
    NoClauses,
    #[error("`{name}` is missing")]
    MissingDeclaration { name: String },
    #[error("`{name}` is out of range ({declared} declared)")]
    IndexOutOfRange { name: String, declared: usize },
    #[error("{pos}: `{name}` bound twice")]
    DuplicateBinding { pos: Pos, name: String },
    #[error("input X_{index} is unbounded{}", clause.map(|c| format!(" in clause {c}")).unwrap_or_default())]
    Unbounded { clause: Option<usize>, index: usize },
}
