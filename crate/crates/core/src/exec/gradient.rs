use crate::netir::{broadcast_index_map, normalize_axis, Network, NodeOp, Tensor};

use super::kernel::{concat_map, conv_taps, pool_taps, transpose_map, transpose_perm, MatIndex};
use super::{ExecError, ForwardTrace};

fn slot(grads: &mut [Option<Vec<f64>>], e: usize, len: usize) -> &mut Vec<f64> {
    grads[e].get_or_insert_with(|| vec![0.0; len])
}

/// Reverse-mode gradient of `dy · net(x)` with respect to `x`, replayed from
/// `trace`. ReLU has subgradient 0 at 0; MaxPool routes to the first maximal
/// element of each window, matching the forward tie-break.
pub fn gradient(net: &Network, trace: &ForwardTrace, dy: &[f64]) -> Result<Vec<f64>, ExecError> {
    if dy.len() != net.num_outputs() {
        return Err(ExecError::SeedSize {
            expected: net.num_outputs(),
            got: dy.len(),
        });
    }
    let mut values: Vec<Option<&Tensor>> = vec![None; net.num_edges()];
    values[net.input()] = Some(&trace.input);
    for (node, a) in net.nodes().iter().zip(&trace.activations) {
        values[node.output] = Some(a);
    }
    let get = |e: usize| -> &Tensor {
        net.constant(e)
            .or(values[e])
            .expect("trace comes from this network")
    };
    let is_var = |e: usize| net.constant(e).is_none();

    let mut grads: Vec<Option<Vec<f64>>> = vec![None; net.num_edges()];
    grads[net.output()] = Some(dy.to_vec());
    for node in net.nodes().iter().rev() {
        let Some(g) = grads[node.output].take() else {
            continue;
        };
        let ins = &node.inputs;
        let out_shape = net.edge_shape(node.output);
        match &node.op {
            NodeOp::Gemm { .. } | NodeOp::MatMul => {
                let (a, b) = (get(ins[0]), get(ins[1]));
                let (ix, alpha) = match &node.op {
                    NodeOp::Gemm {
                        alpha,
                        trans_a,
                        trans_b,
                        ..
                    } => (
                        MatIndex::gemm(a.shape(), b.shape(), *trans_a, *trans_b),
                        *alpha,
                    ),
                    _ => (MatIndex::matmul(a.shape(), b.shape()), 1.0),
                };
                let mut da = is_var(ins[0]).then(|| vec![0.0; a.len()]);
                let mut db = is_var(ins[1]).then(|| vec![0.0; b.len()]);
                for m in 0..ix.m {
                    for n in 0..ix.n {
                        let gy = g[m * ix.n + n] * alpha;
                        for k in 0..ix.k {
                            let (ai, bi) = (ix.a(m, k), ix.b(k, n));
                            if let Some(da) = &mut da {
                                da[ai] += gy * b.data()[bi];
                            }
                            if let Some(db) = &mut db {
                                db[bi] += gy * a.data()[ai];
                            }
                        }
                    }
                }
                for (pos, d) in [(0, da), (1, db)] {
                    if let Some(d) = d {
                        let s = slot(&mut grads, ins[pos], d.len());
                        s.iter_mut().zip(&d).for_each(|(s, v)| *s += v);
                    }
                }
                if let (Some(&c), NodeOp::Gemm { beta, .. }) = (ins.get(2), &node.op) {
                    if is_var(c) {
                        let ct = get(c);
                        let map = broadcast_index_map(ct.shape(), out_shape);
                        let s = slot(&mut grads, c, ct.len());
                        for (i, &j) in map.iter().enumerate() {
                            s[j] += beta * g[i];
                        }
                    }
                }
            }
            NodeOp::Add | NodeOp::Sub => {
                for (pos, &e) in ins.iter().enumerate().take(2) {
                    if !is_var(e) {
                        continue;
                    }
                    let sign = if pos == 1 && node.op == NodeOp::Sub {
                        -1.0
                    } else {
                        1.0
                    };
                    let t = get(e);
                    let map = broadcast_index_map(t.shape(), out_shape);
                    let s = slot(&mut grads, e, t.len());
                    for (i, &j) in map.iter().enumerate() {
                        s[j] += sign * g[i];
                    }
                }
            }
            NodeOp::Relu | NodeOp::Sigmoid | NodeOp::Tanh => {
                if !is_var(ins[0]) {
                    continue;
                }
                let x = get(ins[0]).data();
                let y = get(node.output).data();
                let s = slot(&mut grads, ins[0], x.len());
                for i in 0..x.len() {
                    s[i] += g[i]
                        * match node.op {
                            NodeOp::Relu => {
                                if x[i] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            NodeOp::Sigmoid => y[i] * (1.0 - y[i]),
                            _ => 1.0 - y[i] * y[i],
                        };
                }
            }
            NodeOp::Conv2d { window, group } => {
                let (x, w) = (get(ins[0]), get(ins[1]));
                let taps = conv_taps(x.shape(), w.shape(), window, *group, out_shape);
                let s = slot(&mut grads, ins[0], x.len());
                for (o, t) in taps.iter().enumerate() {
                    for &(xi, wi) in t {
                        s[xi] += g[o] * w.data()[wi];
                    }
                }
            }
            NodeOp::MaxPool2d { window } => {
                let x = get(ins[0]);
                let taps = pool_taps(x.shape(), window, out_shape);
                let s = slot(&mut grads, ins[0], x.len());
                for (o, t) in taps.iter().enumerate() {
                    let mut best: Option<usize> = None;
                    for &xi in t {
                        if best.is_none_or(|b| x.data()[xi] > x.data()[b]) {
                            best = Some(xi);
                        }
                    }
                    if let Some(b) = best {
                        s[b] += g[o];
                    }
                }
            }
            NodeOp::AveragePool2d {
                window,
                count_include_pad,
            } => {
                let x = get(ins[0]);
                let taps = pool_taps(x.shape(), window, out_shape);
                let full = window.kernel[0] * window.kernel[1];
                let s = slot(&mut grads, ins[0], x.len());
                for (o, t) in taps.iter().enumerate() {
                    let count = if *count_include_pad { full } else { t.len() };
                    let f = 1.0 / count.max(1) as f64;
                    for &xi in t {
                        s[xi] += g[o] * f;
                    }
                }
            }
            NodeOp::BatchNorm { epsilon } => {
                let x = get(ins[0]);
                let (scale, var) = (get(ins[1]).data(), get(ins[4]).data());
                let inner: usize = x.shape()[2..].iter().product();
                let channels = x.shape()[1];
                let s = slot(&mut grads, ins[0], x.len());
                for i in 0..x.len() {
                    let c = (i / inner) % channels;
                    s[i] += g[i] * (scale[c] / (var[c] + epsilon).sqrt());
                }
            }
            NodeOp::Flatten { .. } | NodeOp::Reshape => {
                if is_var(ins[0]) {
                    let s = slot(&mut grads, ins[0], g.len());
                    s.iter_mut().zip(&g).for_each(|(s, v)| *s += v);
                }
            }
            NodeOp::Transpose { perm } => {
                if is_var(ins[0]) {
                    let x = get(ins[0]);
                    let map = transpose_map(x.shape(), &transpose_perm(perm, x.shape().len()));
                    let s = slot(&mut grads, ins[0], x.len());
                    for (i, &j) in map.iter().enumerate() {
                        s[j] += g[i];
                    }
                }
            }
            NodeOp::Concat { axis } => {
                let shapes: Vec<&[usize]> = ins.iter().map(|&e| get(e).shape()).collect();
                let axis = normalize_axis(*axis, out_shape.len()).expect("validated axis");
                for (o, (j, i)) in concat_map(&shapes, axis).into_iter().enumerate() {
                    if is_var(ins[j]) {
                        let len = get(ins[j]).len();
                        slot(&mut grads, ins[j], len)[i] += g[o];
                    }
                }
            }
        }
    }
    let dx = grads[net.input()]
        .take()
        .unwrap_or_else(|| vec![0.0; net.num_inputs()]);
    if dx.iter().any(|v| !v.is_finite()) {
        return Err(ExecError::NonFinite {
            node: "gradient".into(),
        });
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::forward_with_trace;
    use crate::netir::parse_text_network;

    #[test]
    fn affine_derivative() {
        let net = parse_text_network("gemm 1 1\nweights 2\nbias -1\n").unwrap();
        let trace = forward_with_trace(&net, &[0.5]).unwrap();
        assert_eq!(trace.output, vec![0.0]);
        assert_eq!(gradient(&net, &trace, &[1.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn inactive_relu() {
        let net = parse_text_network("relu").unwrap();
        let trace = forward_with_trace(&net, &[-1.0]).unwrap();
        assert_eq!(gradient(&net, &trace, &[1.0]).unwrap(), vec![0.0]);
        let trace = forward_with_trace(&net, &[0.0]).unwrap();
        assert_eq!(gradient(&net, &trace, &[1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn seed_size_checked() {
        let net = parse_text_network("relu").unwrap();
        let trace = forward_with_trace(&net, &[1.0]).unwrap();
        assert!(gradient(&net, &trace, &[1.0, 2.0]).is_err());
    }
}
