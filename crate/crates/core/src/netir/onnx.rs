//! ONNX import and export.
//!
//! Accepted: default-domain opsets 9 through 17, a single graph input whose
//! only symbolic dimension may be a leading batch dimension (bound to 1), a
//! single graph output. Initializers and `Constant` nodes become constants;
//! nodes whose inputs are all constants are folded on load; `Identity` is
//! elided. Implemented attributes:
//!
//! | op | attributes (default) |
//! |----|----------------------|
//! | Gemm | `alpha` (1.0), `beta` (1.0), `transA` (0), `transB` (0) |
//! | Conv | `kernel_shape` (from weight), `strides` (1), `pads` (0), `dilations` (1), `group` (1), `auto_pad` (`NOTSET`; `VALID` accepted) |
//! | MaxPool | `kernel_shape`, `strides` (1), `pads` (0); `ceil_mode=1` and dilations other than 1 rejected |
//! | AveragePool | as MaxPool plus `count_include_pad` (0) |
//! | BatchNormalization | `epsilon` (1e-5); `training_mode=1` rejected |
//! | Flatten | `axis` (1) |
//! | Reshape | `allowzero` (0; 1 rejected) |
//! | Transpose | `perm` (reversed axes) |
//! | Concat | `axis` (required) |
//!
//! MatMul, Add, Sub, Relu, Sigmoid and Tanh take no attributes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use prost::Message;

use super::graph::{Network, Node, NodeOp, Window};
use super::onnx_proto::*;
use super::{NetError, Tensor};

fn new_edge(name: &str, names: &mut Vec<String>, by_name: &mut HashMap<String, usize>) -> usize {
    names.push(name.to_string());
    by_name.insert(name.to_string(), names.len() - 1);
    names.len() - 1
}

const OPSET_RANGE: std::ops::RangeInclusive<i64> = 9..=17;

pub fn load_onnx(path: impl AsRef<Path>) -> Result<Network, NetError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_onnx_bytes(&bytes)
}

fn is_default_domain(d: &str) -> bool {
    d.is_empty() || d == "ai.onnx"
}

pub fn load_onnx_bytes(bytes: &[u8]) -> Result<Network, NetError> {
    let model = ModelProto::decode(bytes).map_err(|e| NetError::Decode(e.to_string()))?;
    let opset = model
        .opset_import
        .iter()
        .find(|o| is_default_domain(&o.domain))
        .map(|o| o.version)
        .ok_or(NetError::UnsupportedOpset(0))?;
    if !OPSET_RANGE.contains(&opset) {
        return Err(NetError::UnsupportedOpset(opset));
    }
    let graph = model
        .graph
        .ok_or_else(|| NetError::Decode("model has no graph".into()))?;

    let mut names: Vec<String> = Vec::new();
    let mut by_name: HashMap<String, usize> = HashMap::new();
    let mut constants: BTreeMap<usize, Tensor> = BTreeMap::new();

    for t in &graph.initializer {
        let e = new_edge(&t.name, &mut names, &mut by_name);
        constants.insert(e, tensor_from_proto(t)?);
    }

    let inputs: Vec<&ValueInfoProto> = graph
        .input
        .iter()
        .filter(|v| !by_name.contains_key(&v.name))
        .collect();
    if inputs.len() != 1 {
        return Err(NetError::MultipleInputs(inputs.len()));
    }
    if graph.output.len() != 1 {
        return Err(NetError::MultipleOutputs(graph.output.len()));
    }
    let input_shape = value_info_shape(inputs[0])?;
    let input = new_edge(&inputs[0].name, &mut names, &mut by_name);

    let mut nodes = Vec::new();
    for n in &graph.node {
        if !is_default_domain(&n.domain) {
            return Err(NetError::UnsupportedOperator(format!(
                "{}:{}",
                n.domain, n.op_type
            )));
        }
        let out_name = n
            .output
            .first()
            .ok_or_else(|| NetError::Graph(format!("node `{}` has no output", n.name)))?;
        match n.op_type.as_str() {
            "Constant" => {
                let t = constant_value(n)?;
                let e = new_edge(out_name, &mut names, &mut by_name);
                constants.insert(e, t);
                continue;
            }
            "Identity" => {
                let src = lookup(&by_name, &n.input[0])?;
                by_name.insert(out_name.clone(), src);
                continue;
            }
            _ => {}
        }
        let mut op = node_op(n)?;
        let ins = n
            .input
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| lookup(&by_name, s))
            .collect::<Result<Vec<_>, _>>()?;
        if let NodeOp::Conv2d { window, .. } = &mut op {
            if window.kernel == [0, 0] {
                let w = ins.get(1).and_then(|e| constants.get(e));
                match w.map(|w| w.shape()) {
                    Some(&[_, _, kh, kw]) => window.kernel = [kh, kw],
                    _ => {
                        return Err(unsupported_attr(
                            n,
                            "kernel_shape not derivable from weight",
                        ))
                    }
                }
            }
        }
        let name = if n.name.is_empty() {
            format!("{}_{}", n.op_type, nodes.len())
        } else {
            n.name.clone()
        };
        if !ins.is_empty() && ins.iter().all(|e| constants.contains_key(e)) {
            let args: Vec<&Tensor> = ins.iter().map(|e| &constants[e]).collect();
            let folded = crate::exec::fold_node(&name, &op, &args)?;
            let e = new_edge(out_name, &mut names, &mut by_name);
            constants.insert(e, folded);
            continue;
        }
        let output = new_edge(out_name, &mut names, &mut by_name);
        nodes.push(Node {
            name,
            op,
            inputs: ins,
            output,
        });
    }
    let output = lookup(&by_name, &graph.output[0].name)?;
    Network::new(nodes, constants, names, input, input_shape, output)
}

fn lookup(by_name: &HashMap<String, usize>, name: &str) -> Result<usize, NetError> {
    by_name
        .get(name)
        .copied()
        .ok_or_else(|| NetError::Graph(format!("unknown tensor `{name}`")))
}

fn value_info_shape(v: &ValueInfoProto) -> Result<Vec<usize>, NetError> {
    let dims = v
        .r#type
        .as_ref()
        .and_then(|t| t.tensor_type.as_ref())
        .and_then(|t| t.shape.as_ref())
        .map(|s| s.dim.as_slice())
        .ok_or_else(|| NetError::Graph(format!("input `{}` has no tensor shape", v.name)))?;
    let mut shape = Vec::with_capacity(dims.len());
    for (i, d) in dims.iter().enumerate() {
        match d.value {
            Some(DimensionValue::DimValue(x)) if x > 0 => shape.push(x as usize),
            _ if i == 0 => shape.push(1),
            _ => return Err(NetError::DynamicDim { dim: i }),
        }
    }
    if shape.len() >= 2 && shape[0] != 1 {
        return Err(NetError::BatchSize(shape[0]));
    }
    if shape.is_empty() {
        return Err(NetError::Graph(format!("input `{}` is a scalar", v.name)));
    }
    Ok(shape)
}

fn tensor_from_proto(t: &TensorProto) -> Result<Tensor, NetError> {
    if !t.external_data.is_empty() || t.data_location == 1 {
        return Err(NetError::InvalidTensor(format!(
            "tensor `{}` uses external data",
            t.name
        )));
    }
    let shape = t
        .dims
        .iter()
        .map(|&d| {
            usize::try_from(d)
                .map_err(|_| NetError::InvalidTensor(format!("negative dim in `{}`", t.name)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let raw = &t.raw_data;
    let data: Vec<f64> = match t.data_type {
        data_type::FLOAT if !raw.is_empty() => raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
        data_type::FLOAT => t.float_data.iter().map(|&v| v as f64).collect(),
        data_type::DOUBLE if !raw.is_empty() => raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
        data_type::DOUBLE => t.double_data.clone(),
        data_type::INT64 if !raw.is_empty() => raw
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().expect("8 bytes")) as f64)
            .collect(),
        data_type::INT64 => t.int64_data.iter().map(|&v| v as f64).collect(),
        data_type::INT32 if !raw.is_empty() => raw
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
        data_type::INT32 => t.int32_data.iter().map(|&v| v as f64).collect(),
        other => {
            return Err(NetError::InvalidTensor(format!(
                "tensor `{}` has unsupported data type {other}",
                t.name
            )))
        }
    };
    Tensor::new(shape, data)
}

fn attr<'a>(n: &'a NodeProto, name: &str) -> Option<&'a AttributeProto> {
    n.attribute.iter().find(|a| a.name == name)
}

fn int_attr(n: &NodeProto, name: &str, default: i64) -> i64 {
    attr(n, name).map_or(default, |a| a.i)
}

fn float_attr(n: &NodeProto, name: &str, default: f64) -> f64 {
    attr(n, name).map_or(default, |a| a.f as f64)
}

fn ints_attr(n: &NodeProto, name: &str) -> Option<Vec<i64>> {
    attr(n, name).map(|a| a.ints.clone())
}

fn unsupported_attr(n: &NodeProto, detail: &str) -> NetError {
    NetError::UnsupportedAttribute {
        op: n.op_type.clone(),
        detail: detail.to_string(),
    }
}

fn constant_value(n: &NodeProto) -> Result<Tensor, NetError> {
    if let Some(a) = attr(n, "value") {
        let t =
            a.t.as_ref()
                .ok_or_else(|| unsupported_attr(n, "value without tensor"))?;
        return tensor_from_proto(t);
    }
    if let Some(a) = attr(n, "value_float") {
        return Ok(Tensor::scalar(a.f as f64));
    }
    if let Some(a) = attr(n, "value_int") {
        return Ok(Tensor::scalar(a.i as f64));
    }
    if let Some(a) = attr(n, "value_floats") {
        return Tensor::new(
            vec![a.floats.len()],
            a.floats.iter().map(|&v| v as f64).collect(),
        );
    }
    if let Some(a) = attr(n, "value_ints") {
        return Tensor::new(
            vec![a.ints.len()],
            a.ints.iter().map(|&v| v as f64).collect(),
        );
    }
    Err(unsupported_attr(
        n,
        "Constant without a supported value attribute",
    ))
}

fn pair(n: &NodeProto, name: &str, default: usize) -> Result<[usize; 2], NetError> {
    match ints_attr(n, name) {
        None => Ok([default; 2]),
        Some(v) if v.len() == 2 && v.iter().all(|&x| x >= 1) => Ok([v[0] as usize, v[1] as usize]),
        Some(v) => Err(unsupported_attr(n, &format!("{name}={v:?}"))),
    }
}

fn window(n: &NodeProto, kernel: Option<[usize; 2]>) -> Result<Window, NetError> {
    let kernel = match (ints_attr(n, "kernel_shape"), kernel) {
        (Some(_), _) => pair(n, "kernel_shape", 1)?,
        (None, Some(k)) => k,
        (None, None) => return Err(unsupported_attr(n, "missing kernel_shape")),
    };
    match attr(n, "auto_pad").map(|a| String::from_utf8_lossy(&a.s).into_owned()) {
        None => {}
        Some(p) if p == "NOTSET" || p == "VALID" => {}
        Some(p) => return Err(unsupported_attr(n, &format!("auto_pad={p}"))),
    }
    let pads = match ints_attr(n, "pads") {
        None => [0; 4],
        Some(v) if v.len() == 4 && v.iter().all(|&x| x >= 0) => {
            [v[0] as usize, v[1] as usize, v[2] as usize, v[3] as usize]
        }
        Some(v) => return Err(unsupported_attr(n, &format!("pads={v:?}"))),
    };
    Ok(Window {
        kernel,
        strides: pair(n, "strides", 1)?,
        pads,
        dilations: pair(n, "dilations", 1)?,
    })
}

fn node_op(n: &NodeProto) -> Result<NodeOp, NetError> {
    let op = match n.op_type.as_str() {
        "Gemm" => NodeOp::Gemm {
            alpha: float_attr(n, "alpha", 1.0),
            beta: float_attr(n, "beta", 1.0),
            trans_a: int_attr(n, "transA", 0) != 0,
            trans_b: int_attr(n, "transB", 0) != 0,
        },
        "MatMul" => NodeOp::MatMul,
        "Add" => NodeOp::Add,
        "Sub" => NodeOp::Sub,
        "Relu" => NodeOp::Relu,
        "Sigmoid" => NodeOp::Sigmoid,
        "Tanh" => NodeOp::Tanh,
        "Conv" => {
            // kernel_shape defaults to the weight's spatial dims; resolved
            // against the weight during shape inference.
            let kernel = ints_attr(n, "kernel_shape")
                .map(|_| pair(n, "kernel_shape", 1))
                .transpose()?;
            NodeOp::Conv2d {
                window: window(n, Some(kernel.unwrap_or([0, 0])))?,
                group: int_attr(n, "group", 1).max(0) as usize,
            }
        }
        "MaxPool" | "AveragePool" => {
            if int_attr(n, "ceil_mode", 0) != 0 {
                return Err(unsupported_attr(n, "ceil_mode=1"));
            }
            let w = window(n, None)?;
            if w.dilations != [1, 1] {
                return Err(unsupported_attr(n, "dilations other than 1"));
            }
            if n.op_type == "MaxPool" {
                NodeOp::MaxPool2d { window: w }
            } else {
                NodeOp::AveragePool2d {
                    window: w,
                    count_include_pad: int_attr(n, "count_include_pad", 0) != 0,
                }
            }
        }
        "BatchNormalization" => {
            if int_attr(n, "training_mode", 0) != 0 {
                return Err(unsupported_attr(n, "training_mode=1"));
            }
            NodeOp::BatchNorm {
                epsilon: float_attr(n, "epsilon", 1e-5),
            }
        }
        "Flatten" => NodeOp::Flatten {
            axis: int_attr(n, "axis", 1),
        },
        "Reshape" => {
            if int_attr(n, "allowzero", 0) != 0 {
                return Err(unsupported_attr(n, "allowzero=1"));
            }
            NodeOp::Reshape
        }
        "Transpose" => NodeOp::Transpose {
            perm: ints_attr(n, "perm").map(|p| p.into_iter().map(|x| x.max(0) as usize).collect()),
        },
        "Concat" => NodeOp::Concat {
            axis: attr(n, "axis")
                .map(|a| a.i)
                .ok_or_else(|| unsupported_attr(n, "missing axis"))?,
        },
        other => return Err(NetError::UnsupportedOperator(other.to_string())),
    };
    Ok(op)
}

fn int_attr_proto(name: &str, i: i64) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        i,
        r#type: attribute_type::INT,
        ..Default::default()
    }
}

fn float_attr_proto(name: &str, f: f64) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        f: f as f32,
        r#type: attribute_type::FLOAT,
        ..Default::default()
    }
}

fn ints_attr_proto(name: &str, v: &[usize]) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        ints: v.iter().map(|&x| x as i64).collect(),
        r#type: attribute_type::INTS,
        ..Default::default()
    }
}

fn window_attrs(w: &Window, out: &mut Vec<AttributeProto>) {
    out.push(ints_attr_proto("kernel_shape", &w.kernel));
    out.push(ints_attr_proto("strides", &w.strides));
    out.push(ints_attr_proto("pads", &w.pads));
}

fn node_attrs(op: &NodeOp) -> Vec<AttributeProto> {
    let mut a = Vec::new();
    match op {
        NodeOp::Gemm {
            alpha,
            beta,
            trans_a,
            trans_b,
        } => {
            a.push(float_attr_proto("alpha", *alpha));
            a.push(float_attr_proto("beta", *beta));
            a.push(int_attr_proto("transA", *trans_a as i64));
            a.push(int_attr_proto("transB", *trans_b as i64));
        }
        NodeOp::Conv2d { window, group } => {
            window_attrs(window, &mut a);
            a.push(ints_attr_proto("dilations", &window.dilations));
            a.push(int_attr_proto("group", *group as i64));
        }
        NodeOp::MaxPool2d { window } => window_attrs(window, &mut a),
        NodeOp::AveragePool2d {
            window,
            count_include_pad,
        } => {
            window_attrs(window, &mut a);
            a.push(int_attr_proto(
                "count_include_pad",
                *count_include_pad as i64,
            ));
        }
        NodeOp::BatchNorm { epsilon } => a.push(float_attr_proto("epsilon", *epsilon)),
        NodeOp::Flatten { axis } | NodeOp::Concat { axis } => a.push(int_attr_proto("axis", *axis)),
        NodeOp::Transpose { perm: Some(p) } => a.push(ints_attr_proto("perm", p)),
        _ => {}
    }
    a
}

fn shape_info(name: &str, elem_type: i32, shape: &[usize]) -> ValueInfoProto {
    ValueInfoProto {
        name: name.into(),
        r#type: Some(TypeProto {
            tensor_type: Some(TypeProtoTensor {
                elem_type,
                shape: Some(TensorShapeProto {
                    dim: shape
                        .iter()
                        .map(|&d| Dimension {
                            value: Some(DimensionValue::DimValue(d as i64)),
                            denotation: String::new(),
                        })
                        .collect(),
                }),
            }),
            denotation: String::new(),
        }),
        doc_string: String::new(),
    }
}

/// Encodes a network as an opset-13 ONNX model. Weights are stored as 32-bit
/// floats when every value converts exactly, otherwise as doubles.
pub fn save_onnx_bytes(net: &Network) -> Vec<u8> {
    let shape_inputs: BTreeSet<usize> = net
        .nodes()
        .iter()
        .filter(|n| n.op == NodeOp::Reshape)
        .map(|n| n.inputs[1])
        .collect();
    let f32_exact = net
        .constants()
        .iter()
        .filter(|(e, _)| !shape_inputs.contains(e))
        .all(|(_, t)| t.data().iter().all(|&v| (v as f32) as f64 == v));
    let elem_type = if f32_exact {
        data_type::FLOAT
    } else {
        data_type::DOUBLE
    };
    let names = net.edge_names();
    let initializer = net
        .constants()
        .iter()
        .map(|(&e, t)| {
            let (data_type, raw_data) = if shape_inputs.contains(&e) {
                (
                    data_type::INT64,
                    t.data()
                        .iter()
                        .flat_map(|&v| (v as i64).to_le_bytes())
                        .collect(),
                )
            } else if f32_exact {
                (
                    data_type::FLOAT,
                    t.data()
                        .iter()
                        .flat_map(|&v| (v as f32).to_le_bytes())
                        .collect(),
                )
            } else {
                (
                    data_type::DOUBLE,
                    t.data().iter().flat_map(|&v| v.to_le_bytes()).collect(),
                )
            };
            TensorProto {
                dims: t.shape().iter().map(|&d| d as i64).collect(),
                data_type,
                name: names[e].clone(),
                raw_data,
                ..Default::default()
            }
        })
        .collect();
    let node = net
        .nodes()
        .iter()
        .map(|n| NodeProto {
            input: n.inputs.iter().map(|&e| names[e].clone()).collect(),
            output: vec![names[n.output].clone()],
            name: n.name.clone(),
            op_type: n.op.kind().into(),
            attribute: node_attrs(&n.op),
            ..Default::default()
        })
        .collect();
    let model = ModelProto {
        ir_version: 7,
        producer_name: "vnnarena".into(),
        producer_version: env!("CARGO_PKG_VERSION").into(),
        graph: Some(GraphProto {
            node,
            name: "network".into(),
            initializer,
            input: vec![shape_info(
                &names[net.input()],
                elem_type,
                net.input_shape(),
            )],
            output: vec![shape_info(
                &names[net.output()],
                elem_type,
                net.output_shape(),
            )],
            ..Default::default()
        }),
        opset_import: vec![OperatorSetIdProto {
            domain: String::new(),
            version: 13,
        }],
        ..Default::default()
    };
    model.encode_to_vec()
}

pub fn save_onnx(net: &Network, path: impl AsRef<Path>) -> Result<(), NetError> {
    let path = path.as_ref();
    std::fs::write(path, save_onnx_bytes(net)).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })
}
