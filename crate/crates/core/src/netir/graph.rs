use std::collections::BTreeMap;

use super::shapes::infer_node_shape;
use super::{NetError, Tensor};

pub type EdgeId = usize;

/// Window parameters shared by convolution and pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    /// `[height, width]`; for convolutions this is taken from the weight shape.
    pub kernel: [usize; 2],
    pub strides: [usize; 2],
    /// `[top, left, bottom, right]`, the ONNX `pads` order.
    pub pads: [usize; 4],
    pub dilations: [usize; 2],
}

impl Window {
    pub fn new(kernel: [usize; 2]) -> Self {
        Self {
            kernel,
            strides: [1, 1],
            pads: [0; 4],
            dilations: [1, 1],
        }
    }

    /// Output spatial size along axis `a` (0 = height, 1 = width).
    pub fn output_dim(&self, input: usize, a: usize) -> Option<usize> {
        let padded = input + self.pads[a] + self.pads[a + 2];
        let span = self.dilations[a] * (self.kernel[a] - 1) + 1;
        if padded < span || self.strides[a] == 0 {
            return None;
        }
        Some((padded - span) / self.strides[a] + 1)
    }
}

/// Supported operators with their attributes.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeOp {
    /// `alpha * A' B' + beta * C` with `A'`/`B'` optionally transposed.
    Gemm {
        alpha: f64,
        beta: f64,
        trans_a: bool,
        trans_b: bool,
    },
    MatMul,
    Add,
    Sub,
    Relu,
    Sigmoid,
    Tanh,
    /// Inputs: data `[N,C,H,W]`, constant weight `[M,C/group,kH,kW]`,
    /// optional constant bias `[M]`.
    Conv2d {
        window: Window,
        group: usize,
    },
    MaxPool2d {
        window: Window,
    },
    AveragePool2d {
        window: Window,
        count_include_pad: bool,
    },
    /// Inputs: data, scale, bias, mean, var (all but data constant).
    BatchNorm {
        epsilon: f64,
    },
    Flatten {
        axis: i64,
    },
    /// Second input is a constant int64 target shape (`0` copies, `-1` infers).
    Reshape,
    Transpose {
        perm: Option<Vec<usize>>,
    },
    Concat {
        axis: i64,
    },
}

impl NodeOp {
    /// ONNX operator name.
    pub fn kind(&self) -> &'static str {
        match self {
            NodeOp::Gemm { .. } => "Gemm",
            NodeOp::MatMul => "MatMul",
            NodeOp::Add => "Add",
            NodeOp::Sub => "Sub",
            NodeOp::Relu => "Relu",
            NodeOp::Sigmoid => "Sigmoid",
            NodeOp::Tanh => "Tanh",
            NodeOp::Conv2d { .. } => "Conv",
            NodeOp::MaxPool2d { .. } => "MaxPool",
            NodeOp::AveragePool2d { .. } => "AveragePool",
            NodeOp::BatchNorm { .. } => "BatchNormalization",
            NodeOp::Flatten { .. } => "Flatten",
            NodeOp::Reshape => "Reshape",
            NodeOp::Transpose { .. } => "Transpose",
            NodeOp::Concat { .. } => "Concat",
        }
    }

    pub fn is_piecewise_linear(&self) -> bool {
        !matches!(self, NodeOp::Sigmoid | NodeOp::Tanh)
    }

    /// `(min, max)` number of inputs.
    pub(crate) fn arity(&self) -> (usize, usize) {
        match self {
            NodeOp::Gemm { .. } => (2, 3),
            NodeOp::MatMul | NodeOp::Add | NodeOp::Sub | NodeOp::Reshape => (2, 2),
            NodeOp::Conv2d { .. } => (2, 3),
            NodeOp::BatchNorm { .. } => (5, 5),
            NodeOp::Concat { .. } => (1, usize::MAX),
            _ => (1, 1),
        }
    }

    /// Input positions that must be constants.
    pub(crate) fn constant_inputs(&self) -> &'static [usize] {
        match self {
            NodeOp::Conv2d { .. } => &[1, 2],
            NodeOp::BatchNorm { .. } => &[1, 2, 3, 4],
            NodeOp::Reshape => &[1],
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub op: NodeOp,
    pub inputs: Vec<EdgeId>,
    pub output: EdgeId,
}

/// A validated, shape-annotated computation graph with one input and one
/// output. Nodes are stored in topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    constants: BTreeMap<EdgeId, Tensor>,
    edge_names: Vec<String>,
    edge_shapes: Vec<Vec<usize>>,
    input: EdgeId,
    output: EdgeId,
}

impl Network {
    /// Validates the graph structure and infers every edge shape.
    pub fn new(
        nodes: Vec<Node>,
        constants: BTreeMap<EdgeId, Tensor>,
        edge_names: Vec<String>,
        input: EdgeId,
        input_shape: Vec<usize>,
        output: EdgeId,
    ) -> Result<Self, NetError> {
        let edges = edge_names.len();
        let mut shapes: Vec<Option<Vec<usize>>> = vec![None; edges];
        if input >= edges || output >= edges {
            return Err(NetError::Graph(
                "graph input/output edge out of range".into(),
            ));
        }
        if constants.contains_key(&input) {
            return Err(NetError::Graph("graph input is a constant".into()));
        }
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(NetError::Graph(format!(
                "invalid input shape {input_shape:?}"
            )));
        }
        shapes[input] = Some(input_shape);
        for (&e, t) in &constants {
            if e >= edges {
                return Err(NetError::Graph("constant edge out of range".into()));
            }
            shapes[e] = Some(t.shape().to_vec());
        }
        for node in &nodes {
            let (lo, hi) = node.op.arity();
            if node.inputs.len() < lo || node.inputs.len() > hi {
                return Err(NetError::Graph(format!(
                    "node `{}` ({}) has {} inputs",
                    node.name,
                    node.op.kind(),
                    node.inputs.len()
                )));
            }
            for (pos, &e) in node.inputs.iter().enumerate() {
                if e >= edges || shapes[e].is_none() {
                    return Err(NetError::Graph(format!(
                        "node `{}` consumes an edge that is not yet produced",
                        node.name
                    )));
                }
                if node.op.constant_inputs().contains(&pos) && !constants.contains_key(&e) {
                    return Err(NetError::Graph(format!(
                        "node `{}` ({}) requires input {pos} to be a constant",
                        node.name,
                        node.op.kind()
                    )));
                }
            }
            if node.output >= edges || shapes[node.output].is_some() {
                return Err(NetError::Graph(format!(
                    "node `{}` output edge is invalid or produced twice",
                    node.name
                )));
            }
            let in_shapes: Vec<&[usize]> = node
                .inputs
                .iter()
                .map(|&e| shapes[e].as_deref().expect("checked"))
                .collect();
            let in_consts: Vec<Option<&Tensor>> =
                node.inputs.iter().map(|e| constants.get(e)).collect();
            let out = infer_node_shape(&node.name, &node.op, &in_shapes, &in_consts)?;
            shapes[node.output] = Some(out);
        }
        if output != input && !nodes.iter().any(|n| n.output == output) {
            return Err(NetError::Graph(
                "graph output is not produced by any node".into(),
            ));
        }
        let edge_shapes = shapes.into_iter().map(|s| s.unwrap_or_default()).collect();
        Ok(Self {
            nodes,
            constants,
            edge_names,
            edge_shapes,
            input,
            output,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn constants(&self) -> &BTreeMap<EdgeId, Tensor> {
        &self.constants
    }

    pub fn constant(&self, edge: EdgeId) -> Option<&Tensor> {
        self.constants.get(&edge)
    }

    pub fn edge_names(&self) -> &[String] {
        &self.edge_names
    }

    pub fn edge_shape(&self, edge: EdgeId) -> &[usize] {
        &self.edge_shapes[edge]
    }

    pub fn num_edges(&self) -> usize {
        self.edge_names.len()
    }

    pub fn input(&self) -> EdgeId {
        self.input
    }

    pub fn output(&self) -> EdgeId {
        self.output
    }

    pub fn input_shape(&self) -> &[usize] {
        self.edge_shape(self.input)
    }

    pub fn output_shape(&self) -> &[usize] {
        self.edge_shape(self.output)
    }

    /// Flattened input size.
    pub fn num_inputs(&self) -> usize {
        self.input_shape().iter().product()
    }

    /// Flattened output size.
    pub fn num_outputs(&self) -> usize {
        self.output_shape().iter().product()
    }

    /// Number of scalar ReLU units.
    pub fn relu_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.op == NodeOp::Relu)
            .map(|n| self.edge_shape(n.output).iter().product::<usize>())
            .sum()
    }
}

/// Re-derives every edge shape from the graph input and constants.
pub fn infer_shapes(net: &Network) -> Result<Network, NetError> {
    Network::new(
        net.nodes.clone(),
        net.constants.clone(),
        net.edge_names.clone(),
        net.input,
        net.input_shape().to_vec(),
        net.output,
    )
}

/// Incremental construction of a [`Network`].
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    nodes: Vec<Node>,
    constants: BTreeMap<EdgeId, Tensor>,
    names: Vec<String>,
    input: Option<(EdgeId, Vec<usize>)>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn edge(&mut self, name: String) -> EdgeId {
        self.names.push(name);
        self.names.len() - 1
    }

    pub fn input(&mut self, shape: Vec<usize>) -> EdgeId {
        let e = self.edge("input".into());
        self.input = Some((e, shape));
        e
    }

    pub fn constant(&mut self, t: Tensor) -> EdgeId {
        let e = self.edge(format!("c{}", self.constants.len()));
        self.constants.insert(e, t);
        e
    }

    pub fn node(&mut self, op: NodeOp, inputs: &[EdgeId]) -> EdgeId {
        let name = format!("{}_{}", op.kind().to_lowercase(), self.nodes.len());
        let output = self.edge(format!("{name}_out"));
        self.nodes.push(Node {
            name,
            op,
            inputs: inputs.to_vec(),
            output,
        });
        output
    }

    /// Fully connected layer `W x + b` with `W` given as `[out][in]` rows.
    pub fn dense(
        &mut self,
        x: EdgeId,
        weights: &[Vec<f64>],
        bias: &[f64],
    ) -> Result<EdgeId, NetError> {
        let out = weights.len();
        let inp = weights.first().map_or(0, Vec::len);
        if weights.iter().any(|r| r.len() != inp) || bias.len() != out {
            return Err(NetError::ShapeMismatch(format!(
                "dense layer declared {out}x{inp} with ragged rows or {} biases",
                bias.len()
            )));
        }
        let w = self.constant(Tensor::new(vec![out, inp], weights.concat())?);
        let b = self.constant(Tensor::new(vec![out], bias.to_vec())?);
        Ok(self.node(
            NodeOp::Gemm {
                alpha: 1.0,
                beta: 1.0,
                trans_a: false,
                trans_b: true,
            },
            &[x, w, b],
        ))
    }

    /// True while no node has been added.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn finish(self, output: EdgeId) -> Result<Network, NetError> {
        let (input, shape) = self
            .input
            .ok_or_else(|| NetError::Graph("builder has no input".into()))?;
        Network::new(self.nodes, self.constants, self.names, input, shape, output)
    }
}
