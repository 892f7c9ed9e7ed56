//! Exact feasibility of `A x <= b` by Fourier–Motzkin elimination over
//! rationals, with Chernikov's redundancy rule and witness recovery.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// `coeffs · x <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<BigRational>,
    pub rhs: BigRational,
}

impl Row {
    pub fn new(coeffs: Vec<BigRational>, rhs: BigRational) -> Self {
        Self { coeffs, rhs }
    }

    /// Scales so the first nonzero coefficient has magnitude 1. Returns
    /// `None` for rows without variables.
    fn normalized(mut self) -> Option<Self> {
        let lead = self.coeffs.iter().find(|c| !c.is_zero())?.abs();
        for c in &mut self.coeffs {
            *c = &*c / &lead;
        }
        self.rhs = &self.rhs / &lead;
        Some(self)
    }
}

struct Tracked {
    row: Row,
    origin: BTreeSet<usize>,
}

/// Merges parallel rows (keeping the tightest) and reports a contradiction
/// if a variable-free row `0 <= rhs` has negative `rhs`. A merged row is
/// labelled with the intersection of the merged origins so that it never
/// looks older than any row it replaces.
fn canonicalize(rows: Vec<Tracked>) -> Option<Vec<Tracked>> {
    let mut index: HashMap<Vec<BigRational>, usize> = HashMap::new();
    let mut out: Vec<Tracked> = Vec::new();
    for Tracked { row, origin } in rows {
        if row.coeffs.iter().all(Zero::is_zero) {
            if row.rhs.is_negative() {
                return None;
            }
            continue;
        }
        let row = row.normalized().expect("row has a variable");
        match index.get(&row.coeffs) {
            Some(&i) => {
                let kept = &mut out[i];
                kept.origin = kept.origin.intersection(&origin).copied().collect();
                if row.rhs < kept.row.rhs {
                    kept.row = row;
                }
            }
            None => {
                index.insert(row.coeffs.clone(), out.len());
                out.push(Tracked { row, origin });
            }
        }
    }
    Some(out)
}

/// Returns a point satisfying every row, or `None` if the system is
/// infeasible. Each variable of the witness is the midpoint of its feasible
/// interval given the variables chosen after it (a bound if one side is
/// open, 0 if both are).
pub fn feasible(rows: &[Row], num_vars: usize) -> Option<Vec<BigRational>> {
    eliminate(rows, num_vars, true)
}

fn eliminate(rows: &[Row], num_vars: usize, prune: bool) -> Option<Vec<BigRational>> {
    let tracked: Vec<Tracked> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            debug_assert_eq!(r.coeffs.len(), num_vars);
            Tracked {
                row: r.clone(),
                origin: BTreeSet::from([i]),
            }
        })
        .collect();
    let mut current = canonicalize(tracked)?;
    let mut remaining: Vec<usize> = (0..num_vars).collect();
    let mut stages: Vec<(usize, Vec<Row>)> = Vec::with_capacity(num_vars);

    for step in 1..=num_vars {
        // eliminate the variable producing the fewest new rows
        let (pick, &var) = remaining
            .iter()
            .enumerate()
            .min_by_key(|&(_, &v)| {
                let pos = current
                    .iter()
                    .filter(|t| t.row.coeffs[v].is_positive())
                    .count();
                let neg = current
                    .iter()
                    .filter(|t| t.row.coeffs[v].is_negative())
                    .count();
                (pos * neg) as isize - (pos + neg) as isize
            })
            .expect("variables remain");
        remaining.remove(pick);
        stages.push((var, current.iter().map(|t| t.row.clone()).collect()));

        let (mut pos, mut neg, mut next) = (Vec::new(), Vec::new(), Vec::new());
        for t in current {
            let c = &t.row.coeffs[var];
            if c.is_positive() {
                pos.push(t);
            } else if c.is_negative() {
                neg.push(t);
            } else {
                next.push(t);
            }
        }
        for p in &pos {
            for q in &neg {
                let origin: BTreeSet<usize> = p.origin.union(&q.origin).copied().collect();
                if prune && origin.len() > step + 1 {
                    continue;
                }
                // p: a x_v + ... <= b (a > 0), q: -c x_v + ... <= d (c > 0)
                let a = &p.row.coeffs[var];
                let c = -&q.row.coeffs[var];
                let coeffs: Vec<BigRational> = p
                    .row
                    .coeffs
                    .iter()
                    .zip(&q.row.coeffs)
                    .map(|(pc, qc)| pc * &c + qc * a)
                    .collect();
                let rhs = &p.row.rhs * &c + &q.row.rhs * a;
                next.push(Tracked {
                    row: Row { coeffs, rhs },
                    origin,
                });
            }
        }
        current = canonicalize(next)?;
    }

    let mut x = vec![BigRational::zero(); num_vars];
    for (var, rows) in stages.iter().rev() {
        let (mut lo, mut hi): (Option<BigRational>, Option<BigRational>) = (None, None);
        for r in rows {
            let a = &r.coeffs[*var];
            if a.is_zero() {
                continue;
            }
            let rest: BigRational = r
                .coeffs
                .iter()
                .zip(&x)
                .enumerate()
                .filter(|(i, _)| i != var)
                .map(|(_, (c, v))| c * v)
                .sum();
            let bound = (&r.rhs - rest) / a;
            if a.is_positive() {
                hi = Some(match hi {
                    Some(h) if h <= bound => h,
                    _ => bound,
                });
            } else {
                lo = Some(match lo {
                    Some(l) if l >= bound => l,
                    _ => bound,
                });
            }
        }
        x[*var] = match (lo, hi) {
            (Some(l), Some(h)) => {
                debug_assert!(l <= h, "projection lost a point");
                (l + h) / BigRational::from_integer(BigInt::from(2))
            }
            (Some(l), None) => l,
            (None, Some(h)) => h,
            (None, None) => BigRational::zero(),
        };
    }
    Some(x)
}
