//! Built-in solvers: interval bound propagation, a gradient attack,
//! input-splitting branch and bound, and an exact oracle for small
//! piecewise-linear networks.

mod bab;
mod fm;
mod ibp;
mod oracle;
mod pgd;
mod symbolic;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

pub use bab::{verify_bab, BabConfig};
pub use fm::{feasible, Row};
pub use ibp::{ibp_bounds, verify_ibp, IntervalVector};
pub use oracle::{
    check_oracle_preconditions, oracle_decide, oracle_margin_exceeds, OracleVerdict,
    ORACLE_MAX_INPUTS, ORACLE_MAX_RELUS,
};
pub use pgd::{attack_pgd, attack_pgd_until, PgdConfig};

use crate::adjudicate::{AdjudicateError, ResultStatus};
use crate::exec::ExecError;
use crate::netir::Network;
use crate::vnnlib::{Assignment, Property, VnnlibError};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Property(#[from] VnnlibError),
    #[error(transparent)]
    Arity(#[from] AdjudicateError),
    #[error("oracle precondition violated: {0}")]
    Oracle(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Holds,
    Violated(Assignment),
    Unknown,
    Timeout,
}

impl SolveStatus {
    pub fn result_status(&self) -> ResultStatus {
        match self {
            SolveStatus::Holds => ResultStatus::Holds,
            SolveStatus::Violated(_) => ResultStatus::Violated,
            SolveStatus::Unknown => ResultStatus::Unknown,
            SolveStatus::Timeout => ResultStatus::Timeout,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Seconds.
    pub elapsed: f64,
}

/// Strategy of the built-in tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Interval check, then branch and bound.
    VerifyFirst,
    /// Full attack, then branch and bound.
    AttackFirst,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::VerifyFirst => "verify-first",
            Mode::AttackFirst => "attack-first",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "verify-first" => Ok(Mode::VerifyFirst),
            "attack-first" => Ok(Mode::AttackFirst),
            other => Err(format!(
                "unknown mode `{other}` (expected verify-first or attack-first)"
            )),
        }
    }
}

/// Runs the built-in strategy until a conclusive answer or the time limit.
pub fn builtin_solve(
    mode: Mode,
    net: &Network,
    p: &Property,
    timeout: Duration,
    seed: u64,
) -> Result<SolveOutcome, SolverError> {
    let start = Instant::now();
    let done = |status| SolveOutcome {
        status,
        elapsed: start.elapsed().as_secs_f64(),
    };
    if timeout.is_zero() {
        return Ok(done(SolveStatus::Timeout));
    }
    crate::adjudicate::check_arity(net, p)?;
    let deadline = start + timeout;
    match mode {
        Mode::VerifyFirst => {
            if verify_ibp(net, p)? == SolveStatus::Holds {
                return Ok(done(SolveStatus::Holds));
            }
        }
        Mode::AttackFirst => {
            let cfg = PgdConfig {
                seed,
                ..PgdConfig::default()
            };
            if let Some(a) = attack_pgd_until(net, p, &cfg, Some(deadline))? {
                return Ok(done(SolveStatus::Violated(a)));
            }
        }
    }
    let mut cfg = BabConfig {
        deadline: Some(deadline),
        ..BabConfig::default()
    };
    cfg.attack.seed = seed;
    let status = verify_bab(net, p, &cfg)?;
    if Instant::now() >= deadline
        && !matches!(status, SolveStatus::Holds | SolveStatus::Violated(_))
    {
        return Ok(done(SolveStatus::Timeout));
    }
    Ok(done(status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netir::parse_text_network;
    use crate::vnnlib::{evaluate_assignment, parse_vnnlib};

    fn identity() -> Network {
        parse_text_network("gemm 1 1\nweights 1\n").unwrap()
    }

    fn spec(lo: f64, hi: f64, out: &str) -> Property {
        parse_vnnlib(&format!(
            "(declare-const X_0 Real)(declare-const Y_0 Real)\
             (assert (>= X_0 {lo}))(assert (<= X_0 {hi})){out}"
        ))
        .unwrap()
    }

    fn iv(lo: f64, hi: f64) -> crate::exec::Interval {
        crate::exec::Interval::new(lo, hi)
    }

    #[test]
    fn ibp_examples() {
        let relu = parse_text_network("relu").unwrap();
        assert_eq!(
            ibp_bounds(&relu, &[iv(-1.0, 2.0)]).unwrap(),
            vec![iv(0.0, 2.0)]
        );
        let affine = parse_text_network("gemm 1 1\nweights 2\nbias -1\n").unwrap();
        assert_eq!(
            ibp_bounds(&affine, &[iv(0.0, 1.0)]).unwrap(),
            vec![iv(-1.0, 1.0)]
        );
        // hidden [-1,1]^2 -> ReLU [0,1]^2 -> sum [0,2]
        let two =
            parse_text_network("gemm 2 1\nweights 1 -1\nrelu\ngemm 1 2\nweights 1 1\n").unwrap();
        assert_eq!(
            ibp_bounds(&two, &[iv(-1.0, 1.0)]).unwrap(),
            vec![iv(0.0, 2.0)]
        );
    }

    #[test]
    fn verify_ibp_examples() {
        let net = identity();
        assert_eq!(
            verify_ibp(&net, &spec(0.0, 1.0, "(assert (>= Y_0 2))")).unwrap(),
            SolveStatus::Holds
        );
        assert_eq!(
            verify_ibp(&net, &spec(0.0, 1.0, "(assert (>= Y_0 0.5))")).unwrap(),
            SolveStatus::Unknown
        );
        let two = spec(0.0, 1.0, "(assert (or (>= Y_0 2) (>= Y_0 0.5)))");
        assert_eq!(verify_ibp(&net, &two).unwrap(), SolveStatus::Unknown);
    }

    #[test]
    fn pgd_examples() {
        let net = identity();
        let p = spec(0.0, 1.0, "(assert (>= Y_0 0.5))");
        let a = attack_pgd(&net, &p, &PgdConfig::default())
            .unwrap()
            .unwrap();
        assert!(a.inputs[0] >= 0.5);
        let p = spec(0.0, 1.0, "(assert (>= Y_0 2))");
        assert_eq!(attack_pgd(&net, &p, &PgdConfig::default()).unwrap(), None);
    }

    #[test]
    fn bab_examples() {
        let p = spec(0.0, 1.0, "(assert (>= Y_0 2))");
        let cfg = BabConfig {
            max_depth: 0,
            ..BabConfig::default()
        };
        assert_eq!(
            verify_bab(&identity(), &p, &cfg).unwrap(),
            SolveStatus::Holds
        );

        let net =
            parse_text_network("gemm 1 1\nweights 1\nrelu\ngemm 1 1\nweights 1\nbias -0.25\n")
                .unwrap();
        let p = spec(-1.0, 1.0, "(assert (>= Y_0 0))");
        match verify_bab(&net, &p, &BabConfig::default()).unwrap() {
            SolveStatus::Violated(a) => {
                assert!(a.inputs[0] >= 0.25);
                assert!(
                    evaluate_assignment(&p, &a.inputs, a.outputs.as_ref().unwrap(), 0.0).is_some()
                );
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn builtin_examples() {
        let net = identity();
        let infeasible = spec(0.0, 1.0, "(assert (>= Y_0 2))");
        let feasible = spec(0.0, 1.0, "(assert (>= Y_0 0.5))");
        for mode in [Mode::VerifyFirst, Mode::AttackFirst] {
            let t = Duration::from_secs(10);
            assert_eq!(
                builtin_solve(mode, &net, &infeasible, t, 1).unwrap().status,
                SolveStatus::Holds
            );
            let out = builtin_solve(mode, &net, &feasible, t, 1).unwrap();
            assert!(matches!(out.status, SolveStatus::Violated(_)), "{out:?}");
            let zero = builtin_solve(mode, &net, &feasible, Duration::ZERO, 1).unwrap();
            assert_eq!(zero.status, SolveStatus::Timeout);
        }
    }
}
