//! Deterministic forward evaluation, interval propagation and reverse-mode
//! gradients.
//!
//! All arithmetic is IEEE double precision with a fixed summation order
//! (see [`kernel`]), so repeated evaluations are bit-identical.

mod gradient;
pub mod kernel;

pub use gradient::gradient;
pub(crate) use kernel::fold_node;
pub use kernel::{eval_node, run, Arg, Domain};

use crate::netir::{NetError, Network, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("input has {got} values, network expects {expected}")]
    InputSize { expected: usize, got: usize },
    #[error("non-finite value produced by node `{node}`")]
    NonFinite { node: String },
    #[error("node `{node}` ({op}) is not supported in the {domain} domain")]
    Unsupported {
        node: String,
        op: &'static str,
        domain: &'static str,
    },
    #[error("gradient seed has {got} values, network has {expected} outputs")]
    SeedSize { expected: usize, got: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Plain double-precision evaluation.
#[derive(Debug, Default, Clone, Copy)]
pub struct F64;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Domain for F64 {
    type V = f64;
    const NAME: &'static str = "f64";
    fn constant(&mut self, c: f64) -> f64 {
        c
    }
    fn add(&mut self, a: &f64, b: &f64) -> f64 {
        a + b
    }
    fn sub(&mut self, a: &f64, b: &f64) -> f64 {
        a - b
    }
    fn scale(&mut self, a: &f64, w: f64) -> f64 {
        a * w
    }
    fn mul(&mut self, a: &f64, b: &f64) -> Option<f64> {
        Some(a * b)
    }
    fn relu(&mut self, a: &f64) -> f64 {
        if *a > 0.0 {
            *a
        } else {
            0.0
        }
    }
    fn sigmoid(&mut self, a: &f64) -> Option<f64> {
        Some(sigmoid(*a))
    }
    fn tanh(&mut self, a: &f64) -> Option<f64> {
        Some(a.tanh())
    }
    fn max(&mut self, a: &f64, b: &f64) -> f64 {
        if b > a {
            *b
        } else {
            *a
        }
    }
}

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Interval arithmetic with round-to-nearest endpoints. Each operation is the
/// monotone image of the [`F64`] one, so the result encloses the `f64`
/// forward value for every input in the box. Sigmoid and tanh are widened
/// by one ulp to absorb library rounding.
#[derive(Debug, Default, Clone, Copy)]
pub struct IntervalDomain;

impl Domain for IntervalDomain {
    type V = Interval;
    const NAME: &'static str = "interval";
    fn constant(&mut self, c: f64) -> Interval {
        Interval::point(c)
    }
    fn add(&mut self, a: &Interval, b: &Interval) -> Interval {
        Interval::new(a.lo + b.lo, a.hi + b.hi)
    }
    fn sub(&mut self, a: &Interval, b: &Interval) -> Interval {
        Interval::new(a.lo - b.hi, a.hi - b.lo)
    }
    fn scale(&mut self, a: &Interval, w: f64) -> Interval {
        if w >= 0.0 {
            Interval::new(a.lo * w, a.hi * w)
        } else {
            Interval::new(a.hi * w, a.lo * w)
        }
    }
    fn mul(&mut self, a: &Interval, b: &Interval) -> Option<Interval> {
        let c = [a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi];
        Some(Interval::new(
            c.iter().copied().fold(f64::INFINITY, f64::min),
            c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ))
    }
    fn relu(&mut self, a: &Interval) -> Interval {
        Interval::new(a.lo.max(0.0), a.hi.max(0.0))
    }
    fn sigmoid(&mut self, a: &Interval) -> Option<Interval> {
        Some(Interval::new(
            sigmoid(a.lo).next_down().max(0.0),
            sigmoid(a.hi).next_up().min(1.0),
        ))
    }
    fn tanh(&mut self, a: &Interval) -> Option<Interval> {
        Some(Interval::new(
            a.lo.tanh().next_down().max(-1.0),
            a.hi.tanh().next_up().min(1.0),
        ))
    }
    fn max(&mut self, a: &Interval, b: &Interval) -> Interval {
        Interval::new(a.lo.max(b.lo), a.hi.max(b.hi))
    }
}

/// Activations recorded by [`forward_with_trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Tensor,
    /// Output of each node, in node order.
    pub activations: Vec<Tensor>,
    pub output: Vec<f64>,
}

impl ForwardTrace {
    /// Number of scalars retained (input plus every node output).
    pub fn len(&self) -> usize {
        self.input.len() + self.activations.iter().map(Tensor::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn finite_check(node: &crate::netir::Node, t: &Tensor) -> Result<(), ExecError> {
    if t.data().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ExecError::NonFinite {
            node: node.name.clone(),
        })
    }
}

/// Evaluates the network on a flattened input.
pub fn forward(net: &Network, x: &[f64]) -> Result<Vec<f64>, ExecError> {
    Ok(forward_with_trace(net, x)?.output)
}

pub fn forward_with_trace(net: &Network, x: &[f64]) -> Result<ForwardTrace, ExecError> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ExecError::NonFinite {
            node: "input".into(),
        });
    }
    let mut values = run(&mut F64, net, x.to_vec(), finite_check)?;
    let output = values[net.output()]
        .as_ref()
        .expect("output computed")
        .data()
        .to_vec();
    let activations = net
        .nodes()
        .iter()
        .map(|n| values[n.output].take().expect("node evaluated"))
        .collect();
    let input = values[net.input()].take().expect("input bound");
    Ok(ForwardTrace {
        input,
        activations,
        output,
    })
}

/// Propagates an input box through the network.
pub fn interval_forward(net: &Network, input: &[Interval]) -> Result<Vec<Interval>, ExecError> {
    let values = run(&mut IntervalDomain, net, input.to_vec(), |node, t| {
        if t.data()
            .iter()
            .all(|v| v.lo.is_finite() && v.hi.is_finite())
        {
            Ok(())
        } else {
            Err(ExecError::NonFinite {
                node: node.name.clone(),
            })
        }
    })?;
    Ok(values[net.output()]
        .as_ref()
        .expect("output computed")
        .data()
        .to_vec())
}
