//! Counterexample validation, ground-truth resolution and answer
//! classification.
//!
//! A tool claiming a violation must back it with a counterexample that the
//! network reproduces; claimed outputs in the counterexample file are only
//! compared against the recomputed ones for diagnostics.

use std::fmt;
use std::str::FromStr;

use crate::exec::forward;
use crate::netir::Network;
use crate::vnnlib::{Assignment, LinearConstraint, Property};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub input: f64,
    pub output: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            input: DEFAULT_TOLERANCE,
            output: DEFAULT_TOLERANCE,
        }
    }
}

/// What a tool reported for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResultStatus {
    Holds,
    Violated,
    Timeout,
    Unknown,
    Error,
}

impl ResultStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ResultStatus::Holds => "holds",
            ResultStatus::Violated => "violated",
            ResultStatus::Timeout => "timeout",
            ResultStatus::Unknown => "unknown",
            ResultStatus::Error => "error",
        }
    }
}

impl fmt::Display for ResultStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResultStatus {
    type Err = String;

    /// Accepts the status words plus the SMT-style synonyms `unsat`
    /// (holds) and `sat` (violated), case-insensitively.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "holds" | "unsat" => Ok(ResultStatus::Holds),
            "violated" | "sat" => Ok(ResultStatus::Violated),
            "timeout" => Ok(ResultStatus::Timeout),
            "unknown" => Ok(ResultStatus::Unknown),
            "error" => Ok(ResultStatus::Error),
            other => Err(format!("unrecognized result `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CEVerdict {
    /// The counterexample satisfies clause `clause`.
    Valid {
        clause: usize,
    },
    /// No clause accepts the input; the first violated input constraint.
    InvalidInput {
        constraint: LinearConstraint,
    },
    /// Some clause accepts the input but none accepts the recomputed output.
    InvalidOutput {
        constraint: LinearConstraint,
    },
    Malformed {
        reason: String,
    },
}

impl CEVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, CEVerdict::Valid { .. })
    }
}

impl fmt::Display for CEVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CEVerdict::Valid { clause } => write!(f, "valid (clause {clause})"),
            CEVerdict::InvalidInput { constraint } => {
                write!(f, "invalid input: {constraint} fails")
            }
            CEVerdict::InvalidOutput { constraint } => {
                write!(f, "invalid output: {constraint} fails")
            }
            CEVerdict::Malformed { reason } => write!(f, "malformed: {reason}"),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AdjudicateError {
    #[error("network has {net} {what} but the property declares {property}")]
    Arity {
        what: &'static str,
        net: usize,
        property: usize,
    },
}

pub fn check_arity(net: &Network, p: &Property) -> Result<(), AdjudicateError> {
    if net.num_inputs() != p.num_inputs() {
        return Err(AdjudicateError::Arity {
            what: "inputs",
            net: net.num_inputs(),
            property: p.num_inputs(),
        });
    }
    if net.num_outputs() != p.num_outputs() {
        return Err(AdjudicateError::Arity {
            what: "outputs",
            net: net.num_outputs(),
            property: p.num_outputs(),
        });
    }
    Ok(())
}

/// Re-evaluates the network at the counterexample input and checks the
/// property clause by clause.
pub fn validate_counterexample(
    net: &Network,
    p: &Property,
    a: &Assignment,
    tol: Tolerances,
) -> Result<CEVerdict, AdjudicateError> {
    check_arity(net, p)?;
    if a.inputs.len() != p.num_inputs() {
        return Ok(CEVerdict::Malformed {
            reason: format!(
                "{} inputs given, {} expected",
                a.inputs.len(),
                p.num_inputs()
            ),
        });
    }
    let y = match forward(net, &a.inputs) {
        Ok(y) => y,
        Err(e) => {
            return Ok(CEVerdict::Malformed {
                reason: e.to_string(),
            })
        }
    };
    if let Some(claimed) = &a.outputs {
        let worst = claimed
            .iter()
            .zip(&y)
            .map(|(c, r)| (c - r).abs())
            .fold(0.0, f64::max);
        if claimed.len() != y.len() || worst > tol.output {
            log::warn!(
                "claimed outputs differ from recomputed outputs by {worst:e}; using recomputed values"
            );
        }
    }
    let mut first_input_failure = None;
    let mut first_output_failure = None;
    for (i, clause) in p.clauses().iter().enumerate() {
        match clause
            .input_constraints
            .iter()
            .find(|c| !c.holds(&a.inputs, tol.input))
        {
            Some(c) => {
                first_input_failure.get_or_insert_with(|| c.clone());
            }
            None => match clause
                .output_constraints
                .iter()
                .find(|c| !c.holds(&y, tol.output))
            {
                Some(c) => {
                    first_output_failure.get_or_insert_with(|| c.clone());
                }
                None => return Ok(CEVerdict::Valid { clause: i }),
            },
        }
    }
    Ok(match (first_output_failure, first_input_failure) {
        (Some(constraint), _) => CEVerdict::InvalidOutput { constraint },
        (None, Some(constraint)) => CEVerdict::InvalidInput { constraint },
        (None, None) => unreachable!("properties have at least one clause"),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Violated { tool: String, witness: Assignment },
    AssumedHold,
    Unknown,
}

impl GroundTruth {
    pub fn label(&self) -> &'static str {
        match self {
            GroundTruth::Violated { .. } => "violated",
            GroundTruth::AssumedHold => "holds",
            GroundTruth::Unknown => "unknown",
        }
    }
}

/// One tool's answer on an instance, with its validated witness if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub tool: String,
    pub status: ResultStatus,
    pub witness: Option<Assignment>,
    pub verdict: Option<CEVerdict>,
}

/// The first valid witness (in submission order) makes the instance
/// violated; otherwise any `holds` answer makes it assumed to hold.
pub fn resolve_ground_truth(submissions: &[Submission]) -> GroundTruth {
    for s in submissions {
        if let (Some(v), Some(w)) = (&s.verdict, &s.witness) {
            if v.is_valid() {
                return GroundTruth::Violated {
                    tool: s.tool.clone(),
                    witness: w.clone(),
                };
            }
        }
    }
    if submissions.iter().any(|s| s.status == ResultStatus::Holds) {
        GroundTruth::AssumedHold
    } else {
        GroundTruth::Unknown
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    CorrectHold,
    CorrectViolated,
    Incorrect,
    Unsolved,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::CorrectHold => "correct-hold",
            Classification::CorrectViolated => "correct-violated",
            Classification::Incorrect => "incorrect",
            Classification::Unsolved => "unsolved",
        }
    }

    pub fn is_correct(self) -> bool {
        matches!(
            self,
            Classification::CorrectHold | Classification::CorrectViolated
        )
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Classification {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "correct-hold" => Ok(Classification::CorrectHold),
            "correct-violated" => Ok(Classification::CorrectViolated),
            "incorrect" => Ok(Classification::Incorrect),
            "unsolved" => Ok(Classification::Unsolved),
            other => Err(format!("unrecognized classification `{other}`")),
        }
    }
}

/// `ce` is the verdict on the tool's own counterexample (absent if none was
/// produced).
pub fn classify(status: ResultStatus, gt: &GroundTruth, ce: Option<&CEVerdict>) -> Classification {
    match status {
        ResultStatus::Holds => match gt {
            GroundTruth::Violated { .. } => Classification::Incorrect,
            _ => Classification::CorrectHold,
        },
        ResultStatus::Violated => match ce {
            Some(v) if v.is_valid() => Classification::CorrectViolated,
            _ => Classification::Incorrect,
        },
        ResultStatus::Timeout | ResultStatus::Unknown | ResultStatus::Error => {
            Classification::Unsolved
        }
    }
}

/// Ground truth plus one classification per submission, in order.
pub fn adjudicate_instance(submissions: &[Submission]) -> (GroundTruth, Vec<Classification>) {
    let gt = resolve_ground_truth(submissions);
    let classes = submissions
        .iter()
        .map(|s| classify(s.status, &gt, s.verdict.as_ref()))
        .collect();
    (gt, classes)
}
