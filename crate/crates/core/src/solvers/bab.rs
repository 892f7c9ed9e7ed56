use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exec::forward;
use crate::netir::Network;
use crate::vnnlib::{evaluate_assignment, Assignment, Property};

use super::ibp::clause_refuted_on;
use super::pgd::{attack_box, PgdConfig};
use super::{SolveStatus, SolverError};

#[derive(Debug, Clone, PartialEq)]
pub struct BabConfig {
    /// Maximum number of bisections along any branch.
    pub max_depth: usize,
    /// Maximum number of boxes examined over all clauses.
    pub max_nodes: usize,
    /// Attack budget spent on every box that interval bounds cannot refute.
    pub attack: PgdConfig,
    pub deadline: Option<Instant>,
}

impl Default for BabConfig {
    fn default() -> Self {
        Self {
            max_depth: 20,
            max_nodes: 200_000,
            attack: PgdConfig {
                steps: 10,
                restarts: 1,
                ..PgdConfig::default()
            },
            deadline: None,
        }
    }
}

/// Input-splitting branch and bound. Boxes are processed depth first, lower
/// half before upper half; each unrefuted box is probed at its centre and by
/// a short attack before being bisected along its widest dimension relative
/// to the clause's original box.
pub fn verify_bab(
    net: &Network,
    p: &Property,
    cfg: &BabConfig,
) -> Result<SolveStatus, SolverError> {
    crate::adjudicate::check_arity(net, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.attack.seed);
    let mut nodes = 0usize;
    let mut incomplete = false;
    for (ci, clause) in p.clauses().iter().enumerate() {
        let hull = clause.box_hull(p.num_inputs())?;
        if hull.is_empty() {
            continue;
        }
        let root: Vec<f64> = hull.bounds.iter().map(|(l, h)| h - l).collect();
        let mut stack = vec![(hull.lower(), hull.upper(), 0usize)];
        while let Some((lo, hi, depth)) = stack.pop() {
            if cfg.deadline.is_some_and(|d| Instant::now() >= d) {
                return Ok(SolveStatus::Timeout);
            }
            nodes += 1;
            if nodes > cfg.max_nodes {
                return Ok(SolveStatus::Unknown);
            }
            if clause_refuted_on(net, clause, &lo, &hi) {
                continue;
            }
            let mid: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| l + (h - l) / 2.0).collect();
            if let Ok(y) = forward(net, &mid) {
                if evaluate_assignment(p, &mid, &y, 0.0).is_some() {
                    return Ok(SolveStatus::Violated(Assignment::new(mid, Some(y))));
                }
            }
            if let Some(a) = attack_box(net, p, ci, &lo, &hi, &cfg.attack, &mut rng, cfg.deadline) {
                return Ok(SolveStatus::Violated(a));
            }
            let split = (0..lo.len())
                .filter(|&i| root[i] > 0.0 && hi[i] > lo[i])
                .max_by(|&a, &b| {
                    let (wa, wb) = ((hi[a] - lo[a]) / root[a], (hi[b] - lo[b]) / root[b]);
                    wa.total_cmp(&wb).then(b.cmp(&a))
                });
            let (Some(d), true) = (split, depth < cfg.max_depth) else {
                incomplete = true;
                continue;
            };
            let m = lo[d] + (hi[d] - lo[d]) / 2.0;
            let (mut upper_lo, mut lower_hi) = (lo.clone(), hi.clone());
            upper_lo[d] = m;
            lower_hi[d] = m;
            stack.push((upper_lo, hi, depth + 1));
            stack.push((lo, lower_hi, depth + 1));
        }
    }
    Ok(if incomplete {
        SolveStatus::Unknown
    } else {
        SolveStatus::Holds
    })
}
