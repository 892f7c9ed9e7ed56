//! Network intermediate representation: tensors, the operator graph, shape
//! inference, and loaders for ONNX and a small text format.

mod graph;
mod onnx;
pub mod onnx_proto;
mod shapes;
mod tensor;
mod text;

use std::path::Path;

pub use graph::{infer_shapes, EdgeId, Network, NetworkBuilder, Node, NodeOp, Window};
pub use onnx::{load_onnx, load_onnx_bytes, save_onnx, save_onnx_bytes};
pub(crate) use shapes::{infer_node_shape, normalize_axis};
pub use tensor::{broadcast_index_map, broadcast_shapes, strides, Tensor};
pub use text::{load_text_network, parse_text_network, write_text_network};

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed ONNX model: {0}")]
    Decode(String),
    #[error("unsupported operator `{0}`")]
    UnsupportedOperator(String),
    #[error("unsupported attribute on {op}: {detail}")]
    UnsupportedAttribute { op: String, detail: String },
    #[error("unsupported opset version {0} (accepted: 9 to 17)")]
    UnsupportedOpset(i64),
    #[error("expected exactly one graph input, found {0}")]
    MultipleInputs(usize),
    #[error("expected exactly one graph output, found {0}")]
    MultipleOutputs(usize),
    #[error("symbolic dimension at axis {dim}; only a leading batch dimension may be symbolic")]
    DynamicDim { dim: usize },
    #[error("batch size {0} is not supported; inputs must have a leading dimension of 1")]
    BatchSize(usize),
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("line {line}: {message}")]
    Text { line: usize, message: String },
}

/// Loads `.onnx` files as ONNX and anything else as the text format.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network, NetError> {
    let path = path.as_ref();
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("onnx"))
    {
        load_onnx(path)
    } else {
        load_text_network(path)
    }
}

/// `ReLU(I x + 0)` on `n` inputs, the overhead probe network.
pub fn trivial_network(n: usize) -> Network {
    assert!(n >= 1, "trivial_network needs at least one input");
    let mut b = NetworkBuilder::new();
    let x = b.input(vec![1, n]);
    let eye: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let h = b.dense(x, &eye, &vec![0.0; n]).expect("square identity");
    let y = b.node(NodeOp::Relu, &[h]);
    b.finish(y).expect("valid probe network")
}
