//! ONNX import checked against models exported by PyTorch. Reference inputs,
//! outputs and shapes were recorded by `fixtures/export_onnx.py`.

use std::path::PathBuf;

use prost::Message;
use vnnarena::exec::forward;
use vnnarena::netir::onnx_proto::{DimensionValue, ModelProto};
use vnnarena::netir::{load_onnx, load_onnx_bytes, save_onnx_bytes, NetError, NodeOp};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn reference(model: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(fixture("onnx_reference.json")).unwrap();
    let all: serde_json::Value = serde_json::from_str(&text).unwrap();
    all[model].clone()
}

fn floats(v: &serde_json::Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn dims(v: &serde_json::Value) -> Vec<usize> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap() as usize)
        .collect()
}

/// PyTorch evaluates in f32; we evaluate the same f32 weights in f64.
fn assert_close(got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= 1e-5 * (1.0 + w.abs()), "{g} vs {w}");
    }
}

#[test]
fn mlp_matches_export() {
    let r = reference("mlp");
    let net = load_onnx(fixture("mlp.onnx")).unwrap();
    assert_eq!(net.nodes().len(), r["nodes"].as_u64().unwrap() as usize);
    let kinds: Vec<&str> = net.nodes().iter().map(|n| n.op.kind()).collect();
    assert_eq!(kinds, ["Gemm", "Relu", "Gemm"]);
    assert_eq!(net.input_shape(), dims(&r["input_shape"]).as_slice());
    assert_eq!(net.num_inputs(), 4);
    assert_eq!(net.num_outputs(), 3);
    assert_close(
        &forward(&net, &floats(&r["input"])).unwrap(),
        &floats(&r["output"]),
    );
}

#[test]
fn conv_pool_shape_matches_export() {
    let r = reference("conv_pool");
    let net = load_onnx(fixture("conv_pool.onnx")).unwrap();
    assert_eq!(net.output_shape(), dims(&r["output_shape"]).as_slice());
    assert_eq!(net.output_shape(), &[1, 4, 4, 4]);
    assert_close(
        &forward(&net, &floats(&r["input"])).unwrap(),
        &floats(&r["output"]),
    );
}

#[test]
fn mixed_operators_match_export() {
    let r = reference("mixed");
    let net = load_onnx(fixture("mixed.onnx")).unwrap();
    let kinds: Vec<&str> = net.nodes().iter().map(|n| n.op.kind()).collect();
    assert_eq!(
        kinds,
        [
            "Conv",
            "Tanh",
            "BatchNormalization",
            "AveragePool",
            "Reshape",
            "Sub",
            "Concat",
            "Gemm",
            "Sigmoid"
        ]
    );
    assert_eq!(net.output_shape(), dims(&r["output_shape"]).as_slice());
    assert_close(
        &forward(&net, &floats(&r["input"])).unwrap(),
        &floats(&r["output"]),
    );
}

#[test]
fn softmax_is_rejected_by_name() {
    let err = load_onnx(fixture("softmax.onnx")).unwrap_err();
    assert!(
        matches!(&err, NetError::UnsupportedOperator(op) if op == "Softmax"),
        "{err}"
    );
    assert!(err.to_string().contains("Softmax"));
}

#[test]
fn loading_is_deterministic() {
    for name in ["mlp.onnx", "conv_pool.onnx", "mixed.onnx"] {
        assert_eq!(
            load_onnx(fixture(name)).unwrap(),
            load_onnx(fixture(name)).unwrap()
        );
    }
}

#[test]
fn save_then_load_preserves_function() {
    for name in ["mlp", "conv_pool", "mixed"] {
        let r = reference(name);
        let net = load_onnx(fixture(&format!("{name}.onnx"))).unwrap();
        let again = load_onnx_bytes(&save_onnx_bytes(&net)).unwrap();
        let ops = |n: &vnnarena::netir::Network| {
            n.nodes()
                .iter()
                .map(|n| n.op.clone())
                .collect::<Vec<NodeOp>>()
        };
        assert_eq!(ops(&net), ops(&again));
        let x = floats(&r["input"]);
        assert_eq!(forward(&net, &x).unwrap(), forward(&again, &x).unwrap());
    }
}

fn edit_model(name: &str, f: impl FnOnce(&mut ModelProto)) -> Vec<u8> {
    let bytes = std::fs::read(fixture(name)).unwrap();
    let mut model = ModelProto::decode(bytes.as_slice()).unwrap();
    f(&mut model);
    model.encode_to_vec()
}

fn set_input_dim(model: &mut ModelProto, axis: usize, value: DimensionValue) {
    let graph = model.graph.as_mut().unwrap();
    let shape = graph.input[0]
        .r#type
        .as_mut()
        .unwrap()
        .tensor_type
        .as_mut()
        .unwrap()
        .shape
        .as_mut()
        .unwrap();
    shape.dim[axis].value = Some(value);
}

#[test]
fn batch_dimension_rules() {
    // symbolic leading dim binds to 1
    assert_eq!(
        load_onnx(fixture("mlp.onnx")).unwrap().input_shape(),
        &[1, 4]
    );
    let two = edit_model("mlp.onnx", |m| {
        set_input_dim(m, 0, DimensionValue::DimValue(2))
    });
    assert!(matches!(load_onnx_bytes(&two), Err(NetError::BatchSize(2))));
    let symbolic = edit_model("mlp.onnx", |m| {
        set_input_dim(m, 1, DimensionValue::DimParam("n".into()))
    });
    assert!(matches!(
        load_onnx_bytes(&symbolic),
        Err(NetError::DynamicDim { dim: 1 })
    ));
}

#[test]
fn opset_range() {
    let newer = edit_model("mlp.onnx", |m| m.opset_import[0].version = 18);
    assert!(matches!(
        load_onnx_bytes(&newer),
        Err(NetError::UnsupportedOpset(18))
    ));
    let older = edit_model("mlp.onnx", |m| m.opset_import[0].version = 9);
    assert!(load_onnx_bytes(&older).is_ok());
}

#[test]
fn multiple_outputs_rejected() {
    let two = edit_model("mlp.onnx", |m| {
        let g = m.graph.as_mut().unwrap();
        let extra = g.output[0].clone();
        g.output.push(extra);
    });
    assert!(matches!(
        load_onnx_bytes(&two),
        Err(NetError::MultipleOutputs(2))
    ));
}

#[test]
fn ceil_mode_rejected() {
    let ceil = edit_model("conv_pool.onnx", |m| {
        let g = m.graph.as_mut().unwrap();
        let pool = g.node.iter_mut().find(|n| n.op_type == "MaxPool").unwrap();
        for a in &mut pool.attribute {
            if a.name == "ceil_mode" {
                a.i = 1;
            }
        }
        if !pool.attribute.iter().any(|a| a.name == "ceil_mode") {
            pool.attribute
                .push(vnnarena::netir::onnx_proto::AttributeProto {
                    name: "ceil_mode".into(),
                    i: 1,
                    r#type: 2,
                    ..Default::default()
                });
        }
    });
    assert!(matches!(
        load_onnx_bytes(&ceil),
        Err(NetError::UnsupportedAttribute { ref op, .. }) if op == "MaxPool"
    ));
}
