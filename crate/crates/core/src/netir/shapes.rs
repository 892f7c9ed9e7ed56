use super::graph::NodeOp;
use super::tensor::broadcast_shapes;
use super::{NetError, Tensor};

fn mismatch(node: &str, op: &NodeOp, detail: String) -> NetError {
    NetError::ShapeMismatch(format!("node `{node}` ({}): {detail}", op.kind()))
}

pub(crate) fn normalize_axis(axis: i64, rank: usize) -> Option<usize> {
    let a = if axis < 0 { axis + rank as i64 } else { axis };
    (0..rank as i64).contains(&a).then_some(a as usize)
}

/// Resolves a Reshape target (`0` copies the input dim, `-1` is inferred).
pub(crate) fn reshape_target(input: &[usize], target: &[f64]) -> Option<Vec<usize>> {
    let total: usize = input.iter().product();
    let mut out = Vec::with_capacity(target.len());
    let mut infer = None;
    for (i, &t) in target.iter().enumerate() {
        if t.fract() != 0.0 {
            return None;
        }
        match t as i64 {
            -1 if infer.is_none() => {
                infer = Some(i);
                out.push(1);
            }
            0 => out.push(*input.get(i)?),
            d if d > 0 => out.push(d as usize),
            _ => return None,
        }
    }
    let known: usize = out.iter().product();
    if let Some(i) = infer {
        if known == 0 || !total.is_multiple_of(known) {
            return None;
        }
        out[i] = total / known;
    }
    (out.iter().product::<usize>() == total).then_some(out)
}

pub(crate) fn infer_node_shape(
    node: &str,
    op: &NodeOp,
    inputs: &[&[usize]],
    consts: &[Option<&Tensor>],
) -> Result<Vec<usize>, NetError> {
    let err = |d: String| mismatch(node, op, d);
    match op {
        NodeOp::Gemm {
            trans_a, trans_b, ..
        } => {
            let (a, b) = (inputs[0], inputs[1]);
            if a.len() != 2 || b.len() != 2 {
                return Err(err(format!("expects rank-2 operands, got {a:?} and {b:?}")));
            }
            let (m, k) = if *trans_a { (a[1], a[0]) } else { (a[0], a[1]) };
            let (kb, n) = if *trans_b { (b[1], b[0]) } else { (b[0], b[1]) };
            if k != kb {
                return Err(err(format!("inner dimensions differ: {a:?} vs {b:?}")));
            }
            if let Some(c) = inputs.get(2) {
                match broadcast_shapes(c, &[m, n]) {
                    Some(s) if s == [m, n] => {}
                    _ => return Err(err(format!("bias {c:?} does not broadcast to [{m}, {n}]"))),
                }
            }
            Ok(vec![m, n])
        }
        NodeOp::MatMul => {
            let (a, b) = (inputs[0], inputs[1]);
            if b.len() != 2 || a.is_empty() {
                return Err(err(format!(
                    "supports [.., K] x [K, N] only, got {a:?} and {b:?}"
                )));
            }
            if a[a.len() - 1] != b[0] {
                return Err(err(format!("inner dimensions differ: {a:?} vs {b:?}")));
            }
            let mut out = a[..a.len() - 1].to_vec();
            out.push(b[1]);
            Ok(out)
        }
        NodeOp::Add | NodeOp::Sub => broadcast_shapes(inputs[0], inputs[1]).ok_or_else(|| {
            err(format!(
                "{:?} and {:?} do not broadcast",
                inputs[0], inputs[1]
            ))
        }),
        NodeOp::Relu | NodeOp::Sigmoid | NodeOp::Tanh => Ok(inputs[0].to_vec()),
        NodeOp::Conv2d { window, group } => {
            let (x, w) = (inputs[0], inputs[1]);
            if x.len() != 4 || w.len() != 4 {
                return Err(err(format!("expects 2-D convolution, got {x:?} and {w:?}")));
            }
            if *group == 0 || x[1] % group != 0 || w[0] % group != 0 || x[1] / group != w[1] {
                return Err(err(format!(
                    "channels {} and weight {w:?} inconsistent with group {group}",
                    x[1]
                )));
            }
            if [w[2], w[3]] != window.kernel {
                return Err(err(format!(
                    "kernel_shape {:?} disagrees with weight {w:?}",
                    window.kernel
                )));
            }
            if let Some(bias) = inputs.get(2) {
                if *bias != [w[0]] {
                    return Err(err(format!("bias {bias:?} expected [{}]", w[0])));
                }
            }
            let h = window.output_dim(x[2], 0);
            let wd = window.output_dim(x[3], 1);
            match (h, wd) {
                (Some(h), Some(wd)) => Ok(vec![x[0], w[0], h, wd]),
                _ => Err(err(format!("window larger than padded input {x:?}"))),
            }
        }
        NodeOp::MaxPool2d { window } | NodeOp::AveragePool2d { window, .. } => {
            let x = inputs[0];
            if x.len() != 4 {
                return Err(err(format!("expects [N,C,H,W], got {x:?}")));
            }
            match (window.output_dim(x[2], 0), window.output_dim(x[3], 1)) {
                (Some(h), Some(w)) => Ok(vec![x[0], x[1], h, w]),
                _ => Err(err(format!("window larger than padded input {x:?}"))),
            }
        }
        NodeOp::BatchNorm { .. } => {
            let x = inputs[0];
            if x.len() < 2 {
                return Err(err(format!("expects [N,C,...], got {x:?}")));
            }
            for p in &inputs[1..] {
                if *p != [x[1]] {
                    return Err(err(format!("parameter shape {p:?} expected [{}]", x[1])));
                }
            }
            Ok(x.to_vec())
        }
        NodeOp::Flatten { axis } => {
            let x = inputs[0];
            let a = if *axis as usize == x.len() {
                x.len()
            } else {
                normalize_axis(*axis, x.len())
                    .ok_or_else(|| err(format!("axis {axis} out of range for {x:?}")))?
            };
            Ok(vec![x[..a].iter().product(), x[a..].iter().product()])
        }
        NodeOp::Reshape => {
            let target = consts[1].expect("validated constant");
            reshape_target(inputs[0], target.data()).ok_or_else(|| {
                err(format!(
                    "cannot reshape {:?} to {:?}",
                    inputs[0],
                    target.data()
                ))
            })
        }
        NodeOp::Transpose { perm } => {
            let x = inputs[0];
            let perm: Vec<usize> = perm.clone().unwrap_or_else(|| (0..x.len()).rev().collect());
            let mut seen = vec![false; x.len()];
            if perm.len() != x.len()
                || perm
                    .iter()
                    .any(|&p| p >= x.len() || std::mem::replace(&mut seen[p], true))
            {
                return Err(err(format!("perm {perm:?} invalid for {x:?}")));
            }
            Ok(perm.iter().map(|&p| x[p]).collect())
        }
        NodeOp::Concat { axis } => {
            let first = inputs[0];
            let a = normalize_axis(*axis, first.len())
                .ok_or_else(|| err(format!("axis {axis} out of range for {first:?}")))?;
            let mut out = first.to_vec();
            for s in &inputs[1..] {
                if s.len() != first.len()
                    || s.iter()
                        .zip(first)
                        .enumerate()
                        .any(|(i, (x, y))| i != a && x != y)
                {
                    return Err(err(format!("{s:?} cannot be concatenated with {first:?}")));
                }
                out[a] += s[a];
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netir::Window;

    fn gemm() -> NodeOp {
        NodeOp::Gemm {
            alpha: 1.0,
            beta: 1.0,
            trans_a: false,
            trans_b: true,
        }
    }

    #[test]
    fn gemm_dims() {
        // weight 3x5 (transB) on input [1,5]
        let s = infer_node_shape("g", &gemm(), &[&[1, 5], &[3, 5]], &[None, None]).unwrap();
        assert_eq!(s, vec![1, 3]);
        assert!(infer_node_shape("g", &gemm(), &[&[1, 4], &[3, 5]], &[None, None]).is_err());
    }

    #[test]
    fn matmul_mismatch() {
        let err = infer_node_shape("m", &NodeOp::MatMul, &[&[1, 4], &[5, 2]], &[None, None]);
        assert!(matches!(err, Err(NetError::ShapeMismatch(_))));
        let ok = infer_node_shape("m", &NodeOp::MatMul, &[&[1, 5], &[5, 2]], &[None, None]);
        assert_eq!(ok.unwrap(), vec![1, 2]);
    }

    #[test]
    fn conv_same_padding() {
        // out = (8 + 1 + 1 - 3) / 1 + 1 = 8
        let mut window = Window::new([3, 3]);
        window.pads = [1, 1, 1, 1];
        let op = NodeOp::Conv2d { window, group: 1 };
        let s = infer_node_shape("c", &op, &[&[1, 2, 8, 8], &[4, 2, 3, 3]], &[None, None]).unwrap();
        assert_eq!(s, vec![1, 4, 8, 8]);
    }

    #[test]
    fn strided_pool() {
        // out = (7 - 2) / 2 + 1 = 3
        let mut window = Window::new([2, 2]);
        window.strides = [2, 2];
        let op = NodeOp::MaxPool2d { window };
        let s = infer_node_shape("p", &op, &[&[1, 3, 7, 7]], &[None]).unwrap();
        assert_eq!(s, vec![1, 3, 3, 3]);
    }

    #[test]
    fn reshape_targets() {
        assert_eq!(reshape_target(&[1, 2, 3], &[0.0, -1.0]), Some(vec![1, 6]));
        assert_eq!(reshape_target(&[6], &[2.0, 3.0]), Some(vec![2, 3]));
        assert_eq!(reshape_target(&[6], &[4.0, -1.0]), None);
    }

    #[test]
    fn flatten_and_concat() {
        let f = infer_node_shape("f", &NodeOp::Flatten { axis: 1 }, &[&[1, 2, 3]], &[None]);
        assert_eq!(f.unwrap(), vec![1, 6]);
        let c = infer_node_shape(
            "c",
            &NodeOp::Concat { axis: -1 },
            &[&[1, 2], &[1, 3]],
            &[None, None],
        );
        assert_eq!(c.unwrap(), vec![1, 5]);
    }
}
