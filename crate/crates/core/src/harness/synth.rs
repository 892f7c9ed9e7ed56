//! Seeded synthetic instances: small ReLU networks with dyadic weights and
//! local-robustness properties.

use rand::Rng;

use crate::exec::forward;
use crate::netir::{Network, NetworkBuilder, NodeOp};
use crate::vnnlib::{Clause, LinearConstraint, Property, Relation, VarKind, VnnlibError};

/// A multiple of `1/denom` in `[-range, range]`. Dyadic values keep every
/// weight exact in binary and short in decimal.
pub fn dyadic(rng: &mut impl Rng, denom: u32, range: f64) -> f64 {
    let steps = (range * denom as f64).round() as i64;
    rng.gen_range(-steps..=steps) as f64 / denom as f64
}

/// Fully connected ReLU network `inputs -> hidden.. -> outputs` with weights
/// in multiples of 1/32 and biases in multiples of 1/16.
pub fn random_network(
    rng: &mut impl Rng,
    inputs: usize,
    hidden: &[usize],
    outputs: usize,
) -> Network {
    let mut b = NetworkBuilder::new();
    let mut x = b.input(vec![1, inputs]);
    let mut width = inputs;
    let widths: Vec<usize> = hidden.iter().copied().chain([outputs]).collect();
    for (layer, &out) in widths.iter().enumerate() {
        let weights: Vec<Vec<f64>> = (0..out)
            .map(|_| (0..width).map(|_| dyadic(rng, 32, 1.0)).collect())
            .collect();
        let bias: Vec<f64> = (0..out).map(|_| dyadic(rng, 16, 0.5)).collect();
        x = b.dense(x, &weights, &bias).expect("consistent layer sizes");
        if layer + 1 < widths.len() {
            x = b.node(NodeOp::Relu, &[x]);
        }
        width = out;
    }
    b.finish(x).expect("valid network")
}

/// Index of the first maximal output.
pub fn argmax(y: &[f64]) -> usize {
    y.iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > y[best] { i } else { best })
}

/// Property violated iff some input within `eps` (L-infinity) of `center`
/// makes another output at least as large as the one predicted at `center`:
/// one clause per competing output.
pub fn robustness_property(
    net: &Network,
    center: &[f64],
    eps: f64,
) -> Result<Property, VnnlibError> {
    let label = argmax(&forward(net, center).expect("finite center"));
    let inputs: Vec<LinearConstraint> = center
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| {
            [
                LinearConstraint::lower(VarKind::Input, i, c - eps),
                LinearConstraint::upper(VarKind::Input, i, c + eps),
            ]
        })
        .collect();
    let clauses = (0..net.num_outputs())
        .filter(|&j| j != label)
        .map(|j| {
            let out = LinearConstraint::new(
                VarKind::Output,
                [(j, 1.0), (label, -1.0)],
                Relation::GreaterEq,
                0.0,
            )?;
            Ok(Clause {
                input_constraints: inputs.clone(),
                output_constraints: vec![out],
            })
        })
        .collect::<Result<Vec<_>, VnnlibError>>()?;
    Property::new(net.num_inputs(), net.num_outputs(), clauses)
}

/// A random center with coordinates in multiples of 1/16 in `[-1, 1]`.
pub fn random_center(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| dyadic(rng, 16, 1.0)).collect()
}
