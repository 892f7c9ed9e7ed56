//! Operator kernels written once over an abstract value [`Domain`].
//!
//! Every kernel performs the same sequence of domain operations regardless of
//! the domain, so a domain whose operations are monotone images of the `f64`
//! ones (intervals, for instance) bounds exactly what [`super::forward`]
//! computes.

use crate::netir::{
    broadcast_index_map, normalize_axis, strides, NetError, Network, Node, NodeOp, Tensor, Window,
};

use super::ExecError;

/// Scalar arithmetic used by the kernels. Operations a domain cannot express
/// return `None`.
pub trait Domain {
    type V: Clone;
    /// Short name used in error messages.
    const NAME: &'static str;
    fn constant(&mut self, c: f64) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn scale(&mut self, a: &Self::V, w: f64) -> Self::V;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Option<Self::V>;
    fn relu(&mut self, a: &Self::V) -> Self::V;
    fn sigmoid(&mut self, a: &Self::V) -> Option<Self::V>;
    fn tanh(&mut self, a: &Self::V) -> Option<Self::V>;
    /// Keeps `a` unless `b` is strictly larger.
    fn max(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
}

/// A node operand: a computed value or a network constant.
pub enum Arg<'a, V> {
    Var(&'a Tensor<V>),
    Const(&'a Tensor<f64>),
}

impl<V> Arg<'_, V> {
    pub fn shape(&self) -> &[usize] {
        match self {
            Arg::Var(t) => t.shape(),
            Arg::Const(t) => t.shape(),
        }
    }

    fn at(&self, i: usize) -> Scalar<'_, V> {
        match self {
            Arg::Var(t) => Scalar::Var(&t.data()[i]),
            Arg::Const(t) => Scalar::Const(t.data()[i]),
        }
    }

    fn constant(&self) -> Option<&Tensor<f64>> {
        match self {
            Arg::Const(t) => Some(t),
            Arg::Var(_) => None,
        }
    }
}

enum Scalar<'a, V> {
    Var(&'a V),
    Const(f64),
}

fn lift<D: Domain>(d: &mut D, s: Scalar<'_, D::V>) -> D::V {
    match s {
        Scalar::Var(v) => v.clone(),
        Scalar::Const(c) => d.constant(c),
    }
}

fn unsupported<D: Domain>(node: &str, op: &NodeOp) -> ExecError {
    ExecError::Unsupported {
        node: node.to_string(),
        op: op.kind(),
        domain: D::NAME,
    }
}

fn product<D: Domain>(d: &mut D, a: Scalar<'_, D::V>, b: Scalar<'_, D::V>) -> Option<D::V> {
    match (a, b) {
        (Scalar::Var(x), Scalar::Var(y)) => d.mul(x, y),
        (Scalar::Var(x), Scalar::Const(w)) | (Scalar::Const(w), Scalar::Var(x)) => {
            Some(d.scale(x, w))
        }
        (Scalar::Const(x), Scalar::Const(y)) => Some(d.constant(x * y)),
    }
}

/// Flat index maps `(a_index(m, k), b_index(k, n))` for `A' B'`.
pub(crate) struct MatIndex {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    trans_a: bool,
    b_cols: usize,
    trans_b: bool,
}

impl MatIndex {
    pub(crate) fn gemm(a: &[usize], b: &[usize], trans_a: bool, trans_b: bool) -> Self {
        let (m, k) = if trans_a { (a[1], a[0]) } else { (a[0], a[1]) };
        let n = if trans_b { b[0] } else { b[1] };
        Self {
            m,
            k,
            n,
            trans_a,
            b_cols: b[1],
            trans_b,
        }
    }

    /// MatMul of `[.., K]` with `[K, N]`; leading dims fold into rows.
    pub(crate) fn matmul(a: &[usize], b: &[usize]) -> Self {
        let k = a[a.len() - 1];
        let m = a[..a.len() - 1].iter().product();
        Self::gemm(&[m, k], b, false, false)
    }

    pub(crate) fn a(&self, m: usize, k: usize) -> usize {
        if self.trans_a {
            k * self.m + m
        } else {
            m * self.k + k
        }
    }

    pub(crate) fn b(&self, k: usize, n: usize) -> usize {
        if self.trans_b {
            n * self.k + k
        } else {
            k * self.b_cols + n
        }
    }
}

/// Per output element, the `(input, weight)` flat index pairs in summation
/// order (input channel, kernel row, kernel column). Taps in the zero padding
/// are omitted.
pub(crate) fn conv_taps(
    x: &[usize],
    w: &[usize],
    window: &Window,
    group: usize,
    out: &[usize],
) -> Vec<Vec<(usize, usize)>> {
    let (c_in, h, wd) = (x[1], x[2], x[3]);
    let (m_out, c_per, kh, kw) = (w[0], w[1], w[2], w[3]);
    let m_per = m_out / group;
    let (oh, ow) = (out[2], out[3]);
    let mut taps = Vec::with_capacity(out.iter().product());
    for nb in 0..x[0] {
        for m in 0..m_out {
            let g = m / m_per;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut t = Vec::with_capacity(c_per * kh * kw);
                    for c in 0..c_per {
                        let ci = g * c_per + c;
                        for ky in 0..kh {
                            let iy = (oy * window.strides[0] + ky * window.dilations[0]) as isize
                                - window.pads[0] as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * window.strides[1] + kx * window.dilations[1])
                                    as isize
                                    - window.pads[1] as isize;
                                if ix < 0 || ix >= wd as isize {
                                    continue;
                                }
                                let xi = ((nb * c_in + ci) * h + iy as usize) * wd + ix as usize;
                                let wi = ((m * c_per + c) * kh + ky) * kw + kx;
                                t.push((xi, wi));
                            }
                        }
                    }
                    taps.push(t);
                }
            }
        }
    }
    taps
}

/// Per output element, the flat input indices inside the pooling window
/// (row-major within the window), excluding padding.
pub(crate) fn pool_taps(x: &[usize], window: &Window, out: &[usize]) -> Vec<Vec<usize>> {
    let (h, wd) = (x[2], x[3]);
    let mut taps = Vec::with_capacity(out.iter().product());
    for plane in 0..x[0] * x[1] {
        for oy in 0..out[2] {
            for ox in 0..out[3] {
                let mut t = Vec::with_capacity(window.kernel[0] * window.kernel[1]);
                for ky in 0..window.kernel[0] {
                    let iy = (oy * window.strides[0] + ky) as isize - window.pads[0] as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..window.kernel[1] {
                        let ix = (ox * window.strides[1] + kx) as isize - window.pads[1] as isize;
                        if ix < 0 || ix >= wd as isize {
                            continue;
                        }
                        t.push((plane * h + iy as usize) * wd + ix as usize);
                    }
                }
                taps.push(t);
            }
        }
    }
    taps
}

/// For each output flat index, the source flat index of the transposed input.
pub(crate) fn transpose_map(x: &[usize], perm: &[usize]) -> Vec<usize> {
    let in_strides = strides(x);
    let out_shape: Vec<usize> = perm.iter().map(|&p| x[p]).collect();
    let total: usize = x.iter().product();
    let mut idx = vec![0usize; x.len()];
    let mut map = Vec::with_capacity(total);
    for _ in 0..total {
        map.push(idx.iter().zip(perm).map(|(&i, &p)| i * in_strides[p]).sum());
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < out_shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    map
}

pub(crate) fn transpose_perm(perm: &Option<Vec<usize>>, rank: usize) -> Vec<usize> {
    perm.clone().unwrap_or_else(|| (0..rank).rev().collect())
}

/// For each output flat index, `(operand, flat index)` of its source.
pub(crate) fn concat_map(shapes: &[&[usize]], axis: usize) -> Vec<(usize, usize)> {
    let outer: usize = shapes[0][..axis].iter().product();
    let mut map = Vec::new();
    for o in 0..outer {
        for (j, s) in shapes.iter().enumerate() {
            let block: usize = s[axis..].iter().product();
            map.extend((0..block).map(|i| (j, o * block + i)));
        }
    }
    map
}

/// Evaluates one node on its operands. `out_shape` is the node's inferred
/// output shape.
pub fn eval_node<D: Domain>(
    d: &mut D,
    node: &str,
    op: &NodeOp,
    args: &[Arg<'_, D::V>],
    out_shape: &[usize],
) -> Result<Tensor<D::V>, ExecError> {
    let total: usize = out_shape.iter().product();
    let data: Vec<D::V> = match op {
        NodeOp::Gemm {
            alpha,
            beta,
            trans_a,
            trans_b,
        } => {
            let ix = MatIndex::gemm(args[0].shape(), args[1].shape(), *trans_a, *trans_b);
            let bias_map = args
                .get(2)
                .map(|c| broadcast_index_map(c.shape(), out_shape));
            let mut out = Vec::with_capacity(total);
            for m in 0..ix.m {
                for n in 0..ix.n {
                    let mut acc: Option<D::V> = None;
                    for k in 0..ix.k {
                        let t = product(d, args[0].at(ix.a(m, k)), args[1].at(ix.b(k, n)))
                            .ok_or_else(|| unsupported::<D>(node, op))?;
                        acc = Some(match acc {
                            None => t,
                            Some(a) => d.add(&a, &t),
                        });
                    }
                    let mut y = acc.expect("k >= 1");
                    if *alpha != 1.0 {
                        y = d.scale(&y, *alpha);
                    }
                    if let (Some(c), Some(map)) = (args.get(2), &bias_map) {
                        let mut cv = lift(d, c.at(map[m * ix.n + n]));
                        if *beta != 1.0 {
                            cv = d.scale(&cv, *beta);
                        }
                        y = d.add(&y, &cv);
                    }
                    out.push(y);
                }
            }
            out
        }
        NodeOp::MatMul => {
            let ix = MatIndex::matmul(args[0].shape(), args[1].shape());
            let mut out = Vec::with_capacity(total);
            for m in 0..ix.m {
                for n in 0..ix.n {
                    let mut acc: Option<D::V> = None;
                    for k in 0..ix.k {
                        let t = product(d, args[0].at(ix.a(m, k)), args[1].at(ix.b(k, n)))
                            .ok_or_else(|| unsupported::<D>(node, op))?;
                        acc = Some(match acc {
                            None => t,
                            Some(a) => d.add(&a, &t),
                        });
                    }
                    out.push(acc.expect("k >= 1"));
                }
            }
            out
        }
        NodeOp::Add | NodeOp::Sub => {
            let ma = broadcast_index_map(args[0].shape(), out_shape);
            let mb = broadcast_index_map(args[1].shape(), out_shape);
            let mut out = Vec::with_capacity(total);
            for i in 0..total {
                let a = lift(d, args[0].at(ma[i]));
                let b = lift(d, args[1].at(mb[i]));
                out.push(if *op == NodeOp::Add {
                    d.add(&a, &b)
                } else {
                    d.sub(&a, &b)
                });
            }
            out
        }
        NodeOp::Relu | NodeOp::Sigmoid | NodeOp::Tanh => {
            let mut out = Vec::with_capacity(total);
            for i in 0..total {
                let x = lift(d, args[0].at(i));
                out.push(match op {
                    NodeOp::Relu => d.relu(&x),
                    NodeOp::Sigmoid => d.sigmoid(&x).ok_or_else(|| unsupported::<D>(node, op))?,
                    _ => d.tanh(&x).ok_or_else(|| unsupported::<D>(node, op))?,
                });
            }
            out
        }
        NodeOp::Conv2d { window, group } => {
            let w = args[1].constant().expect("validated constant weight");
            let taps = conv_taps(args[0].shape(), w.shape(), window, *group, out_shape);
            let per_map = out_shape[2] * out_shape[3];
            let mut out = Vec::with_capacity(total);
            for (o, t) in taps.iter().enumerate() {
                let mut acc: Option<D::V> = None;
                for &(xi, wi) in t {
                    let term = product(d, args[0].at(xi), Scalar::Const(w.data()[wi]))
                        .expect("scale is total");
                    acc = Some(match acc {
                        None => term,
                        Some(a) => d.add(&a, &term),
                    });
                }
                let mut y = acc.unwrap_or_else(|| d.constant(0.0));
                if let Some(b) = args.get(2).and_then(Arg::constant) {
                    let m = (o / per_map) % out_shape[1];
                    let bv = d.constant(b.data()[m]);
                    y = d.add(&y, &bv);
                }
                out.push(y);
            }
            out
        }
        NodeOp::MaxPool2d { window } => {
            let taps = pool_taps(args[0].shape(), window, out_shape);
            let mut out = Vec::with_capacity(total);
            for t in &taps {
                let mut best: Option<D::V> = None;
                for &xi in t {
                    let v = lift(d, args[0].at(xi));
                    best = Some(match best {
                        None => v,
                        Some(b) => d.max(&b, &v),
                    });
                }
                out.push(best.unwrap_or_else(|| d.constant(f64::NEG_INFINITY)));
            }
            out
        }
        NodeOp::AveragePool2d {
            window,
            count_include_pad,
        } => {
            let taps = pool_taps(args[0].shape(), window, out_shape);
            let full = window.kernel[0] * window.kernel[1];
            let mut out = Vec::with_capacity(total);
            for t in &taps {
                let mut acc: Option<D::V> = None;
                for &xi in t {
                    let v = lift(d, args[0].at(xi));
                    acc = Some(match acc {
                        None => v,
                        Some(a) => d.add(&a, &v),
                    });
                }
                let count = if *count_include_pad { full } else { t.len() };
                let sum = acc.unwrap_or_else(|| d.constant(0.0));
                out.push(d.scale(&sum, 1.0 / count.max(1) as f64));
            }
            out
        }
        NodeOp::BatchNorm { epsilon } => {
            let p: Vec<&Tensor> = args[1..]
                .iter()
                .map(|a| a.constant().expect("validated constant"))
                .collect();
            let (scale, bias, mean, var) = (p[0].data(), p[1].data(), p[2].data(), p[3].data());
            let shape = args[0].shape();
            let inner: usize = shape[2..].iter().product();
            let mut out = Vec::with_capacity(total);
            for i in 0..total {
                let c = (i / inner) % shape[1];
                let x = lift(d, args[0].at(i));
                let mu = d.constant(mean[c]);
                let centered = d.sub(&x, &mu);
                let s = scale[c] / (var[c] + epsilon).sqrt();
                let scaled = d.scale(&centered, s);
                let b = d.constant(bias[c]);
                out.push(d.add(&scaled, &b));
            }
            out
        }
        NodeOp::Flatten { .. } | NodeOp::Reshape => {
            (0..total).map(|i| lift(d, args[0].at(i))).collect()
        }
        NodeOp::Transpose { perm } => {
            let perm = transpose_perm(perm, args[0].shape().len());
            transpose_map(args[0].shape(), &perm)
                .into_iter()
                .map(|i| lift(d, args[0].at(i)))
                .collect()
        }
        NodeOp::Concat { axis } => {
            let shapes: Vec<&[usize]> = args.iter().map(Arg::shape).collect();
            let axis = normalize_axis(*axis, out_shape.len()).expect("validated axis");
            concat_map(&shapes, axis)
                .into_iter()
                .map(|(j, i)| lift(d, args[j].at(i)))
                .collect()
        }
    };
    Ok(Tensor::new(out_shape.to_vec(), data)?)
}

/// Runs `net` in domain `d`, returning the value of every non-constant edge
/// (indexed by edge id). `after` sees each node's output as it is produced.
pub fn run<D: Domain>(
    d: &mut D,
    net: &Network,
    input: Vec<D::V>,
    mut after: impl FnMut(&Node, &Tensor<D::V>) -> Result<(), ExecError>,
) -> Result<Vec<Option<Tensor<D::V>>>, ExecError> {
    if input.len() != net.num_inputs() {
        return Err(ExecError::InputSize {
            expected: net.num_inputs(),
            got: input.len(),
        });
    }
    let mut values: Vec<Option<Tensor<D::V>>> = vec![None; net.num_edges()];
    values[net.input()] = Some(Tensor::new(net.input_shape().to_vec(), input)?);
    for node in net.nodes() {
        let args: Vec<Arg<'_, D::V>> = node
            .inputs
            .iter()
            .map(|&e| match net.constant(e) {
                Some(c) => Arg::Const(c),
                None => Arg::Var(values[e].as_ref().expect("topological order")),
            })
            .collect();
        let out = eval_node(d, &node.name, &node.op, &args, net.edge_shape(node.output))?;
        after(node, &out)?;
        values[node.output] = Some(out);
    }
    Ok(values)
}

/// Evaluates a node whose operands are all constants.
pub(crate) fn fold_node(name: &str, op: &NodeOp, inputs: &[&Tensor]) -> Result<Tensor, NetError> {
    let shapes: Vec<&[usize]> = inputs.iter().map(|t| t.shape()).collect();
    let consts: Vec<Option<&Tensor>> = inputs.iter().map(|&t| Some(t)).collect();
    let out_shape = crate::netir::infer_node_shape(name, op, &shapes, &consts)?;
    if *op == NodeOp::Reshape {
        return inputs[0].clone().reshaped(out_shape);
    }
    let args: Vec<Arg<'_, f64>> = inputs.iter().map(|&t| Arg::Var(t)).collect();
    eval_node(&mut super::F64, name, op, &args, &out_shape).map_err(|e| match e {
        ExecError::Net(n) => n,
        other => NetError::Graph(format!("cannot fold `{name}`: {other}")),
    })
}
