use std::collections::BTreeMap;
use std::fmt;

use super::VnnlibError;

/// Upper bound on the number of clauses produced by DNF expansion.
pub const MAX_CLAUSES: usize = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Input,
    Output,
}

impl VarKind {
    pub fn prefix(self) -> &'static str {
        match self {
            VarKind::Input => "X",
            VarKind::Output => "Y",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    GreaterEq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::LessEq => "<=",
            Relation::GreaterEq => ">=",
        }
    }
}

/// A linear atom over variables of a single kind.
///
/// Stored normalized as `sum(coefficients[i] * v[i]) <= rhs`; a `>=` atom has
/// its coefficients and right-hand side negated on construction. `relation`
/// remembers the written form so printing reproduces it.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    kind: VarKind,
    coefficients: BTreeMap<usize, f64>,
    relation: Relation,
    rhs: f64,
}

impl LinearConstraint {
    /// Builds a constraint from its written form `sum(coeffs) <relation> rhs`.
    /// Zero coefficients are dropped; at least one must remain.
    pub fn new(
        kind: VarKind,
        coefficients: impl IntoIterator<Item = (usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<Self, VnnlibError> {
        let sign = match relation {
            Relation::LessEq => 1.0,
            Relation::GreaterEq => -1.0,
        };
        let mut normalized = BTreeMap::new();
        for (index, c) in coefficients {
            *normalized.entry(index).or_insert(0.0) += c;
        }
        normalized.retain(|_, c| *c != 0.0);
        if normalized.is_empty() {
            return Err(VnnlibError::ConstantAtom { pos: None });
        }
        for c in normalized.values_mut() {
            *c *= sign;
        }
        Ok(Self {
            kind,
            coefficients: normalized,
            relation,
            rhs: sign * rhs,
        })
    }

    /// `v[index] <= bound`
    pub fn upper(kind: VarKind, index: usize, bound: f64) -> Self {
        Self::new(kind, [(index, 1.0)], Relation::LessEq, bound).expect("unit coefficient")
    }

    /// `v[index] >= bound`
    pub fn lower(kind: VarKind, index: usize, bound: f64) -> Self {
        Self::new(kind, [(index, 1.0)], Relation::GreaterEq, bound).expect("unit coefficient")
    }

    pub fn kind(&self) -> VarKind {
        self.kind
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }

    /// Normalized coefficients (the `<=` form).
    pub fn coefficients(&self) -> &BTreeMap<usize, f64> {
        &self.coefficients
    }

    /// Normalized right-hand side (the `<=` form).
    pub fn rhs(&self) -> f64 {
        self.rhs
    }

    /// Coefficients and right-hand side as originally written.
    pub fn written(&self) -> (Vec<(usize, f64)>, f64) {
        let sign = match self.relation {
            Relation::LessEq => 1.0,
            Relation::GreaterEq => -1.0,
        };
        (
            self.coefficients
                .iter()
                .map(|(&i, &c)| (i, sign * c))
                .collect(),
            sign * self.rhs,
        )
    }

    pub fn max_index(&self) -> usize {
        *self.coefficients.keys().next_back().expect("nonempty")
    }

    /// Single-variable constraints return `Some((index, coefficient))`.
    pub fn single_variable(&self) -> Option<(usize, f64)> {
        if self.coefficients.len() == 1 {
            self.coefficients.iter().next().map(|(&i, &c)| (i, c))
        } else {
            None
        }
    }

    /// Left-hand side of the normalized form, summed in index order.
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .fold(0.0, |acc, (&i, &c)| acc + c * values[i])
    }

    /// Amount by which the constraint is violated (positive) or satisfied
    /// (non-positive) at `values`.
    pub fn excess(&self, values: &[f64]) -> f64 {
        self.lhs(values) - self.rhs
    }

    pub fn holds(&self, values: &[f64], tol: f64) -> bool {
        self.lhs(values) <= self.rhs + tol
    }

    /// The same constraint with its normalized right-hand side moved by `delta`
    /// (positive relaxes, negative tightens).
    pub fn shifted(&self, delta: f64) -> Self {
        let mut c = self.clone();
        c.rhs += delta;
        c
    }
}

impl fmt::Display for LinearConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (coeffs, rhs) = self.written();
        for (n, (i, c)) in coeffs.iter().enumerate() {
            let name = format!("{}_{}", self.kind.prefix(), i);
            let mag = c.abs();
            let sign = if *c < 0.0 { "-" } else { "+" };
            match (n, mag == 1.0) {
                (0, true) if *c < 0.0 => write!(f, "-{name}")?,
                (0, true) => write!(f, "{name}")?,
                (0, false) => write!(f, "{c}*{name}")?,
                (_, true) => write!(f, " {sign} {name}")?,
                (_, false) => write!(f, " {sign} {mag}*{name}")?,
            }
        }
        write!(f, " {} {}", self.relation.symbol(), rhs)
    }
}

/// One disjunct of a property: a conjunction of input and output constraints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Clause {
    pub input_constraints: Vec<LinearConstraint>,
    pub output_constraints: Vec<LinearConstraint>,
}

impl Clause {
    pub fn from_constraints(constraints: Vec<LinearConstraint>) -> Self {
        let (input_constraints, output_constraints) = constraints
            .into_iter()
            .partition(|c| c.kind() == VarKind::Input);
        Self {
            input_constraints,
            output_constraints,
        }
    }

    pub fn inputs_hold(&self, x: &[f64], tol: f64) -> bool {
        self.input_constraints.iter().all(|c| c.holds(x, tol))
    }

    pub fn outputs_hold(&self, y: &[f64], tol: f64) -> bool {
        self.output_constraints.iter().all(|c| c.holds(y, tol))
    }

    /// Per-input interval enclosure implied by the single-variable input
    /// constraints. Multi-variable input constraints are kept in
    /// [`BoxHull::joint`].
    pub fn box_hull(&self, num_inputs: usize) -> Result<BoxHull, VnnlibError> {
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); num_inputs];
        let mut joint = Vec::new();
        for c in &self.input_constraints {
            match c.single_variable() {
                Some((i, a)) => {
                    let bound = c.rhs() / a;
                    let slot = bounds.get_mut(i).ok_or(VnnlibError::IndexOutOfRange {
                        name: format!("X_{i}"),
                        declared: num_inputs,
                    })?;
                    if a > 0.0 {
                        slot.1 = slot.1.min(bound);
                    } else {
                        slot.0 = slot.0.max(bound);
                    }
                }
                None => joint.push(c.clone()),
            }
        }
        if let Some(index) = bounds
            .iter()
            .position(|(lo, hi)| !lo.is_finite() || !hi.is_finite())
        {
            return Err(VnnlibError::Unbounded {
                clause: None,
                index,
            });
        }
        Ok(BoxHull { bounds, joint })
    }
}

/// Interval enclosure of a clause's input region.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxHull {
    pub bounds: Vec<(f64, f64)>,
    /// Multi-variable input constraints not captured by `bounds`; when
    /// nonempty the hull over-approximates the input region.
    pub joint: Vec<LinearConstraint>,
}

impl BoxHull {
    pub fn is_over_approximation(&self) -> bool {
        !self.joint.is_empty()
    }

    /// True when some dimension has `lo > hi`, i.e. the region is empty.
    pub fn is_empty(&self) -> bool {
        self.bounds.iter().any(|(lo, hi)| lo > hi)
    }

    pub fn lower(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| b.0).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| b.1).collect()
    }
}

/// A specification in disjunctive normal form. A satisfying assignment is a
/// counterexample: satisfiable means the property is violated.
#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    num_inputs: usize,
    num_outputs: usize,
    clauses: Vec<Clause>,
}

impl Property {
    pub fn new(
        num_inputs: usize,
        num_outputs: usize,
        clauses: Vec<Clause>,
    ) -> Result<Self, VnnlibError> {
        if clauses.is_empty() {
            return Err(VnnlibError::NoClauses);
        }
        for clause in &clauses {
            for (c, declared) in clause
                .input_constraints
                .iter()
                .map(|c| (c, num_inputs))
                .chain(clause.output_constraints.iter().map(|c| (c, num_outputs)))
            {
                if c.max_index() >= declared {
                    return Err(VnnlibError::IndexOutOfRange {
                        name: format!("{}_{}", c.kind().prefix(), c.max_index()),
                        declared,
                    });
                }
            }
        }
        for (k, clause) in clauses.iter().enumerate() {
            if let Err(VnnlibError::Unbounded { index, .. }) = clause.box_hull(num_inputs) {
                return Err(VnnlibError::Unbounded {
                    clause: Some(k),
                    index,
                });
            }
        }
        Ok(Self {
            num_inputs,
            num_outputs,
            clauses,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Copy of the property with every output constraint's right-hand side
    /// moved by `delta`.
    pub fn with_output_shift(&self, delta: f64) -> Self {
        let clauses = self
            .clauses
            .iter()
            .map(|c| Clause {
                input_constraints: c.input_constraints.clone(),
                output_constraints: c
                    .output_constraints
                    .iter()
                    .map(|o| o.shifted(delta))
                    .collect(),
            })
            .collect();
        Self {
            clauses,
            ..self.clone()
        }
    }
}

/// An input point with optional tool-claimed outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub inputs: Vec<f64>,
    pub outputs: Option<Vec<f64>>,
}

impl Assignment {
    pub fn new(inputs: Vec<f64>, outputs: Option<Vec<f64>>) -> Self {
        Self { inputs, outputs }
    }
}

/// Boolean structure of an `assert` body before DNF expansion.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom(LinearConstraint),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    /// Direct evaluation of the formula tree.
    pub fn holds(&self, x: &[f64], y: &[f64], tol: f64) -> bool {
        match self {
            Formula::Atom(c) => match c.kind() {
                VarKind::Input => c.holds(x, tol),
                VarKind::Output => c.holds(y, tol),
            },
            Formula::And(fs) => fs.iter().all(|f| f.holds(x, y, tol)),
            Formula::Or(fs) => fs.iter().any(|f| f.holds(x, y, tol)),
        }
    }

    /// Disjunctive normal form as a list of conjunctions.
    pub fn dnf(&self, cap: usize) -> Result<Vec<Vec<LinearConstraint>>, VnnlibError> {
        match self {
            Formula::Atom(c) => Ok(vec![vec![c.clone()]]),
            Formula::Or(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    out.extend(f.dnf(cap)?);
                    if out.len() > cap {
                        return Err(VnnlibError::TooManyClauses { cap });
                    }
                }
                Ok(out)
            }
            Formula::And(fs) => {
                let mut acc: Vec<Vec<LinearConstraint>> = vec![Vec::new()];
                for f in fs {
                    let part = f.dnf(cap)?;
                    if acc.len().saturating_mul(part.len()) > cap {
                        return Err(VnnlibError::TooManyClauses { cap });
                    }
                    let mut next = Vec::with_capacity(acc.len() * part.len());
                    for left in &acc {
                        for right in &part {
                            let mut conj = left.clone();
                            conj.extend(right.iter().cloned());
                            next.push(conj);
                        }
                    }
                    acc = next;
                }
                Ok(acc)
            }
        }
    }
}

/// Declarations and assertions of a VNN-LIB file, prior to expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub asserts: Vec<Formula>,
}

impl Script {
    /// Direct evaluation of the conjunction of all asserts.
    pub fn holds(&self, x: &[f64], y: &[f64], tol: f64) -> bool {
        self.asserts.iter().all(|f| f.holds(x, y, tol))
    }

    /// Expands the conjunction of asserts into a [`Property`].
    pub fn expand(&self) -> Result<Property, VnnlibError> {
        if self.asserts.is_empty() {
            return Err(VnnlibError::NoAssertions);
        }
        let conjunctions = Formula::And(self.asserts.clone()).dnf(MAX_CLAUSES)?;
        let clauses = conjunctions
            .into_iter()
            .map(Clause::from_constraints)
            .collect();
        Property::new(self.num_inputs, self.num_outputs, clauses)
    }
}

/// Index of the first clause satisfied by `(x, y)` within additive slack `tol`.
pub fn evaluate_assignment(p: &Property, x: &[f64], y: &[f64], tol: f64) -> Option<usize> {
    p.clauses()
        .iter()
        .position(|c| c.inputs_hold(x, tol) && c.outputs_hold(y, tol))
}

pub fn input_box_hull(clause: &Clause, num_inputs: usize) -> Result<BoxHull, VnnlibError> {
    clause.box_hull(num_inputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_clause() -> Property {
        let clause = Clause::from_constraints(vec![
            LinearConstraint::lower(VarKind::Input, 0, 0.0),
            LinearConstraint::upper(VarKind::Input, 0, 1.0),
            LinearConstraint::lower(VarKind::Output, 0, 0.5),
        ]);
        Property::new(1, 1, vec![clause]).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let p = unit_clause();
        assert_eq!(evaluate_assignment(&p, &[0.5], &[0.7], 0.0), Some(0));
        assert_eq!(evaluate_assignment(&p, &[1.5], &[0.7], 0.0), None);
        assert_eq!(
            evaluate_assignment(&p, &[1.0 + 1e-9], &[0.7], 1e-6),
            Some(0)
        );
        assert_eq!(evaluate_assignment(&p, &[1.0 + 1e-9], &[0.7], 0.0), None);
    }

    #[test]
    fn greater_eq_is_negated_on_ingestion() {
        let c = LinearConstraint::lower(VarKind::Output, 0, 0.5);
        assert_eq!(c.coefficients()[&0], -1.0);
        assert_eq!(c.rhs(), -0.5);
        assert_eq!(c.relation(), Relation::GreaterEq);
        assert_eq!(c.to_string(), "Y_0 >= 0.5");
    }

    #[test]
    fn zero_coefficients_are_rejected() {
        let err =
            LinearConstraint::new(VarKind::Input, [(0, 1.0), (0, -1.0)], Relation::LessEq, 1.0);
        assert!(matches!(err, Err(VnnlibError::ConstantAtom { .. })));
    }

    #[test]
    fn box_hull_examples() {
        let lo = LinearConstraint::lower(VarKind::Input, 0, 0.0);
        let hi = LinearConstraint::upper(VarKind::Input, 0, 1.0);
        let c = Clause::from_constraints(vec![lo.clone(), hi.clone()]);
        assert_eq!(input_box_hull(&c, 1).unwrap().bounds, vec![(0.0, 1.0)]);

        let tighter = LinearConstraint::upper(VarKind::Input, 0, 0.5);
        let c = Clause::from_constraints(vec![lo.clone(), hi.clone(), tighter]);
        assert_eq!(input_box_hull(&c, 1).unwrap().bounds, vec![(0.0, 0.5)]);

        let joint =
            LinearConstraint::new(VarKind::Input, [(0, 1.0), (1, 1.0)], Relation::LessEq, 1.0)
                .unwrap();
        let c = Clause::from_constraints(vec![
            joint.clone(),
            lo,
            hi,
            LinearConstraint::lower(VarKind::Input, 1, 0.0),
            LinearConstraint::upper(VarKind::Input, 1, 1.0),
        ]);
        let hull = input_box_hull(&c, 2).unwrap();
        assert_eq!(hull.bounds, vec![(0.0, 1.0), (0.0, 1.0)]);
        assert_eq!(hull.joint, vec![joint]);
        assert!(hull.is_over_approximation());
    }

    #[test]
    fn unbounded_input_is_an_error() {
        let c = Clause::from_constraints(vec![LinearConstraint::lower(VarKind::Input, 0, 0.0)]);
        assert!(matches!(
            input_box_hull(&c, 1),
            Err(VnnlibError::Unbounded { index: 0, .. })
        ));
        assert!(matches!(
            Property::new(1, 1, vec![c]),
            Err(VnnlibError::Unbounded {
                clause: Some(0),
                index: 0
            })
        ));
    }

    #[test]
    fn negative_coefficient_bounds_from_below() {
        // -2 x <= 1  =>  x >= -0.5
        let c = LinearConstraint::new(VarKind::Input, [(0, -2.0)], Relation::LessEq, 1.0).unwrap();
        let clause =
            Clause::from_constraints(vec![c, LinearConstraint::upper(VarKind::Input, 0, 3.0)]);
        assert_eq!(clause.box_hull(1).unwrap().bounds, vec![(-0.5, 3.0)]);
    }
}
