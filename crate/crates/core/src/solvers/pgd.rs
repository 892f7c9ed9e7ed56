use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{forward_with_trace, gradient};
use crate::netir::Network;
use crate::vnnlib::{evaluate_assignment, Assignment, Property};

use super::SolverError;

#[derive(Debug, Clone, PartialEq)]
pub struct PgdConfig {
    pub steps: usize,
    pub restarts: usize,
    /// Initial step as a fraction of each box dimension's width.
    pub step_size: f64,
    pub seed: u64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            restarts: 20,
            step_size: 0.05,
            seed: 0,
        }
    }
}

/// Searches each clause's input box hull for a point that violates the
/// property, by signed-gradient descent on the summed hinge losses of the
/// clause's output constraints. Every returned point satisfies the property
/// at tolerance 0 under [`crate::exec::forward`].
pub fn attack_pgd(
    net: &Network,
    p: &Property,
    cfg: &PgdConfig,
) -> Result<Option<Assignment>, SolverError> {
    attack_pgd_until(net, p, cfg, None)
}

/// [`attack_pgd`] that gives up once `deadline` passes.
pub fn attack_pgd_until(
    net: &Network,
    p: &Property,
    cfg: &PgdConfig,
    deadline: Option<Instant>,
) -> Result<Option<Assignment>, SolverError> {
    crate::adjudicate::check_arity(net, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for (ci, clause) in p.clauses().iter().enumerate() {
        let hull = clause.box_hull(p.num_inputs())?;
        if hull.is_empty() {
            continue;
        }
        if let Some(a) = attack_box(
            net,
            p,
            ci,
            &hull.lower(),
            &hull.upper(),
            cfg,
            &mut rng,
            deadline,
        ) {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

fn expired(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn attack_box(
    net: &Network,
    p: &Property,
    clause: usize,
    lo: &[f64],
    hi: &[f64],
    cfg: &PgdConfig,
    rng: &mut ChaCha8Rng,
    deadline: Option<Instant>,
) -> Option<Assignment> {
    let outputs = &p.clauses()[clause].output_constraints;
    let widths: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
    for _ in 0..cfg.restarts {
        let mut x: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(&l, &h)| if h > l { rng.gen_range(l..=h) } else { l })
            .collect();
        for t in 0..=cfg.steps {
            if expired(deadline) {
                return None;
            }
            let Ok(trace) = forward_with_trace(net, &x) else {
                break;
            };
            if evaluate_assignment(p, &x, &trace.output, 0.0).is_some() {
                return Some(Assignment::new(x, Some(trace.output)));
            }
            if t == cfg.steps {
                break;
            }
            let mut dy = vec![0.0; trace.output.len()];
            for c in outputs {
                if c.excess(&trace.output) > 0.0 {
                    for (&j, &w) in c.coefficients() {
                        dy[j] += w;
                    }
                }
            }
            if dy.iter().all(|&v| v == 0.0) {
                break;
            }
            let Ok(g) = gradient(net, &trace, &dy) else {
                break;
            };
            let decay = 0.8f64.powi((t / 20) as i32);
            for i in 0..x.len() {
                let step = cfg.step_size * widths[i] * decay;
                if g[i] > 0.0 {
                    x[i] = (x[i] - step).max(lo[i]);
                } else if g[i] < 0.0 {
                    x[i] = (x[i] + step).min(hi[i]);
                }
            }
        }
    }
    None
}
