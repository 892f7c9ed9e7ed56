//! Line-oriented fixture format for small fully connected networks.
//!
//! ```text
//! network  := line*
//! line     := blank | comment | input | gemm | weights | bias | act
//! comment  := '#' any*
//! input    := "input" N                 ; flattened input width, at most once, first
//! gemm     := "gemm" OUT IN             ; dense layer y = W x + b, W is OUT x IN
//! weights  := "weights" real{OUT*IN}    ; row-major, must follow its gemm
//! bias     := "bias" real{OUT}          ; optional, defaults to zeros
//! act      := "relu" | "sigmoid" | "tanh"
//! ```
//!
//! Tokens are whitespace separated and keywords are case-insensitive. Without
//! an `input` line the width is taken from the first `gemm`, or is 1 if there
//! is none. Shapes are `[1, width]`.

use std::path::Path;

use super::graph::{Network, NetworkBuilder, NodeOp};
use super::{NetError, Tensor};

enum Layer {
    Gemm {
        out: usize,
        inp: usize,
        weights: Option<Vec<f64>>,
        bias: Option<Vec<f64>>,
        line: usize,
    },
    Act(NodeOp),
}

fn text_err(line: usize, message: impl Into<String>) -> NetError {
    NetError::Text {
        line,
        message: message.into(),
    }
}

fn dim(tok: Option<&str>, line: usize, what: &str) -> Result<usize, NetError> {
    let tok = tok.ok_or_else(|| text_err(line, format!("missing {what}")))?;
    match tok.parse::<usize>() {
        Ok(d) if d >= 1 => Ok(d),
        _ => Err(text_err(
            line,
            format!("{what} `{tok}` is not a positive integer"),
        )),
    }
}

fn reals<'a>(toks: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec<f64>, NetError> {
    toks.map(|t| match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(text_err(line, format!("`{t}` is not a finite number"))),
    })
    .collect()
}

pub fn parse_text_network(text: &str) -> Result<Network, NetError> {
    let mut width: Option<usize> = None;
    let mut layers: Vec<Layer> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        let Some(kw) = toks.next() else { continue };
        match kw.to_ascii_lowercase().as_str() {
            "input" => {
                if width.is_some() || !layers.is_empty() {
                    return Err(text_err(line, "`input` must come first and only once"));
                }
                width = Some(dim(toks.next(), line, "input width")?);
            }
            "gemm" => {
                let out = dim(toks.next(), line, "output size")?;
                let inp = dim(toks.next(), line, "input size")?;
                layers.push(Layer::Gemm {
                    out,
                    inp,
                    weights: None,
                    bias: None,
                    line,
                });
            }
            kw @ ("weights" | "bias") => {
                let values = reals(toks.by_ref(), line)?;
                let Some(Layer::Gemm {
                    out,
                    inp,
                    weights,
                    bias,
                    ..
                }) = layers.last_mut()
                else {
                    return Err(text_err(line, format!("`{kw}` without a preceding gemm")));
                };
                let (slot, expected) = if kw == "weights" {
                    (weights, *out * *inp)
                } else {
                    (bias, *out)
                };
                if slot.is_some() {
                    return Err(text_err(line, format!("duplicate `{kw}`")));
                }
                if values.len() != expected {
                    return Err(NetError::ShapeMismatch(format!(
                        "line {line}: gemm {out}x{inp} needs {expected} {kw} values, got {}",
                        values.len()
                    )));
                }
                *slot = Some(values);
            }
            "relu" => layers.push(Layer::Act(NodeOp::Relu)),
            "sigmoid" => layers.push(Layer::Act(NodeOp::Sigmoid)),
            "tanh" => layers.push(Layer::Act(NodeOp::Tanh)),
            other => return Err(text_err(line, format!("unknown layer kind `{other}`"))),
        }
        if kw != "weights" && kw != "bias" {
            if let Some(extra) = toks.next() {
                return Err(text_err(line, format!("unexpected token `{extra}`")));
            }
        }
    }

    let width = width.unwrap_or_else(|| {
        layers
            .iter()
            .find_map(|l| match l {
                Layer::Gemm { inp, .. } => Some(*inp),
                Layer::Act(_) => None,
            })
            .unwrap_or(1)
    });
    let mut b = NetworkBuilder::new();
    let mut x = b.input(vec![1, width]);
    let mut current = width;
    for layer in layers {
        x = match layer {
            Layer::Gemm {
                out,
                inp,
                weights,
                bias,
                line,
            } => {
                if inp != current {
                    return Err(NetError::ShapeMismatch(format!(
                        "line {line}: gemm expects {inp} inputs but receives {current}"
                    )));
                }
                let w = weights.ok_or_else(|| text_err(line, "gemm without `weights`"))?;
                let w = b.constant(Tensor::new(vec![out, inp], w)?);
                let c = b.constant(Tensor::new(
                    vec![out],
                    bias.unwrap_or_else(|| vec![0.0; out]),
                )?);
                current = out;
                b.node(
                    NodeOp::Gemm {
                        alpha: 1.0,
                        beta: 1.0,
                        trans_a: false,
                        trans_b: true,
                    },
                    &[x, w, c],
                )
            }
            Layer::Act(op) => b.node(op, &[x]),
        };
    }
    if b.is_empty() {
        return Err(text_err(0, "network has no layers"));
    }
    b.finish(x)
}

pub fn load_text_network(path: impl AsRef<Path>) -> Result<Network, NetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_text_network(&text)
}

/// Serializes a chain of transB Gemm layers and activations; other graphs
/// are rejected.
pub fn write_text_network(net: &Network) -> Result<String, NetError> {
    let mut out = format!("input {}\n", net.num_inputs());
    let mut prev = net.input();
    for node in net.nodes() {
        if node.inputs[0] != prev {
            return Err(NetError::Graph(
                "text format only holds layer chains".into(),
            ));
        }
        prev = node.output;
        match &node.op {
            NodeOp::Relu => out.push_str("relu\n"),
            NodeOp::Sigmoid => out.push_str("sigmoid\n"),
            NodeOp::Tanh => out.push_str("tanh\n"),
            NodeOp::Gemm {
                alpha,
                beta,
                trans_a: false,
                trans_b: true,
            } if *alpha == 1.0 && *beta == 1.0 => {
                let w = net
                    .constant(node.inputs[1])
                    .ok_or_else(|| NetError::Graph("gemm weight is not constant".into()))?;
                let (o, i) = (w.shape()[0], w.shape()[1]);
                let fmt = |v: &[f64]| {
                    v.iter()
                        .map(|x| format!("{x:?}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                out.push_str(&format!("gemm {o} {i}\nweights {}\n", fmt(w.data())));
                if let Some(&c) = node.inputs.get(2) {
                    let c = net
                        .constant(c)
                        .filter(|c| c.shape() == [o])
                        .ok_or_else(|| {
                            NetError::Graph("gemm bias is not a constant vector".into())
                        })?;
                    out.push_str(&format!("bias {}\n", fmt(c.data())));
                }
            }
            other => {
                return Err(NetError::Graph(format!(
                    "text format cannot hold {} nodes",
                    other.kind()
                )))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_line() {
        let net = parse_text_network("gemm 1 1\nweights 2\nbias -1\n").unwrap();
        assert_eq!(net.nodes().len(), 1);
        assert_eq!((net.num_inputs(), net.num_outputs()), (1, 1));
    }

    #[test]
    fn relu_only() {
        let net = parse_text_network("# pass-through\ninput 3\nrelu\n").unwrap();
        assert_eq!(net.nodes()[0].op, NodeOp::Relu);
        assert_eq!(net.output_shape(), &[1, 3]);
        assert_eq!(parse_text_network("relu").unwrap().num_inputs(), 1);
    }

    #[test]
    fn weight_count_mismatch() {
        let err = parse_text_network("gemm 2 2\nweights 1 2 3\n").unwrap_err();
        assert!(matches!(err, NetError::ShapeMismatch(_)), "{err}");
    }

    #[test]
    fn chained_widths_checked() {
        let err = parse_text_network("gemm 2 1\nweights 1 1\ngemm 1 3\nweights 1 1 1\n");
        assert!(matches!(err, Err(NetError::ShapeMismatch(_))));
        assert!(parse_text_network("bias 1").is_err());
        assert!(parse_text_network("conv 1").is_err());
    }

    #[test]
    fn text_round_trip() {
        let src = "input 2\ngemm 2 2\nweights 1.0 -0.5 0.25 2.0\nbias 0.0 1.0\nrelu\ngemm 1 2\nweights 1.0 1.0\nbias -0.125\n";
        let net = parse_text_network(src).unwrap();
        let written = write_text_network(&net).unwrap();
        assert_eq!(written, src);
        assert_eq!(parse_text_network(&written).unwrap(), net);
    }
}
