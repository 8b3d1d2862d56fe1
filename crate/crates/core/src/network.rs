//! Dense feedforward networks: affine layers interleaved with ReLU or tanh.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stage of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Layer {
    /// `y = W x + b`, with `weight` stored row-major as `rows x cols`.
    Affine {
        weight: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    Relu,
    Tanh,
}

/// Activation kinds that act componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }
}

impl Layer {
    pub fn affine(weight: Vec<Vec<f64>>, bias: Vec<f64>) -> Self {
        Layer::Affine { weight, bias }
    }

    pub fn activation(&self) -> Option<Activation> {
        match self {
            Layer::Relu => Some(Activation::Relu),
            Layer::Tanh => Some(Activation::Tanh),
            Layer::Affine { .. } => None,
        }
    }

    /// Output width given the input width.
    fn output_width(&self, input: usize) -> usize {
        match self {
            Layer::Affine { bias, .. } => bias.len(),
            _ => input,
        }
    }

    /// Applies this layer to `input`. Dimensions must already be validated.
    pub(crate) fn apply(&self, input: &[f64]) -> Vec<f64> {
        match self {
            Layer::Affine { weight, bias } => weight.iter().zip(bias).map(|(row, b)| dot(row, input) + b).collect(),
            Layer::Relu => input.iter().map(|&z| Activation::Relu.apply(z)).collect(),
            Layer::Tanh => input.iter().map(|&z| Activation::Tanh.apply(z)).collect(),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// A validated network `f: R^n -> R^m`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_dim: usize,
    output_dim: usize,
}

#[derive(Deserialize)]
struct NetworkDocument {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<Layer>,
}

#[derive(Serialize)]
struct NetworkDocumentRef<'a> {
    input_dim: usize,
    output_dim: usize,
    layers: &'a [Layer],
}

impl Network {
    /// Checks the dimension chain and finiteness of every parameter.
    pub fn new(layers: Vec<Layer>, input_dim: usize, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Dimension("input_dim and output_dim must be positive".into()));
        }
        let mut width = input_dim;
        for (k, layer) in layers.iter().enumerate() {
            if let Layer::Affine { weight, bias } = layer {
                if weight.len() != bias.len() {
                    return Err(Error::Dimension(format!(
                        "layer {k}: weight has {} rows but bias has {} entries",
                        weight.len(),
                        bias.len()
                    )));
                }
                if weight.is_empty() {
                    return Err(Error::Dimension(format!("layer {k}: empty weight matrix")));
                }
                for (i, row) in weight.iter().enumerate() {
                    if row.len() != width {
                        return Err(Error::Dimension(format!(
                            "layer {k}: row {i} has {} columns, expected {width}",
                            row.len()
                        )));
                    }
                    if row.iter().any(|w| !w.is_finite()) {
                        return Err(Error::Value(format!("layer {k}: non-finite weight")));
                    }
                }
                if bias.iter().any(|b| !b.is_finite()) {
                    return Err(Error::Value(format!("layer {k}: non-finite bias")));
                }
            }
            width = layer.output_width(width);
        }
        if width != output_dim {
            return Err(Error::Dimension(format!(
                "final width {width} does not match output_dim {output_dim}"
            )));
        }
        Ok(Self {
            layers,
            input_dim,
            output_dim,
        })
    }

    /// Parses the JSON network document.
    pub fn from_json(source: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(source).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(doc.layers, doc.input_dim, doc.output_dim)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&NetworkDocumentRef {
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            layers: &self.layers,
        })
        .expect("network serializes")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// True when the network contains no activation layers.
    pub fn is_affine(&self) -> bool {
        self.layers.iter().all(|l| matches!(l, Layer::Affine { .. }))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim {
            return Err(Error::Dimension(format!(
                "input has length {}, expected {}",
                input.len(),
                self.input_dim
            )));
        }
        Ok(self.forward_unchecked(input))
    }

    pub(crate) fn forward_unchecked(&self, input: &[f64]) -> Vec<f64> {
        let mut current = input.to_vec();
        for layer in &self.layers {
            current = layer.apply(&current);
        }
        current
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_single_affine() {
        let net = Network::from_json(
            r#"{"layers":[{"type":"affine","weight":[[1.0]],"bias":[0.0]}],"input_dim":1,"output_dim":1}"#,
        )
        .unwrap();
        assert_eq!(net.layers().len(), 1);
        assert!(net.is_affine());
    }

    #[test]
    fn rejects_broken_chain() {
        let err = Network::from_json(
            r#"{"input_dim":3,"output_dim":1,"layers":[
                {"type":"affine","weight":[[1,0,0],[0,1,0]],"bias":[0,0]},
                {"type":"affine","weight":[[1,1,1,1]],"bias":[0]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "{err}");
    }

    #[test]
    fn rejects_nan_bias() {
        let err = Network::new(vec![Layer::affine(vec![vec![1.0]], vec![f64::NAN])], 1, 1).unwrap_err();
        assert!(matches!(err, Error::Value(_)));
    }

    #[test]
    fn rejects_malformed_document() {
        assert!(matches!(Network::from_json("{\"layers\": ["), Err(Error::Parse(_))));
        assert!(matches!(
            Network::from_json(r#"{"input_dim":1,"output_dim":1,"layers":[{"type":"conv"}]}"#),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn rejects_bias_row_mismatch() {
        let err = Network::new(vec![Layer::affine(vec![vec![1.0]], vec![0.0, 1.0])], 1, 2).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn forward_examples() {
        let id = Network::new(
            vec![Layer::affine(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0])],
            2,
            2,
        )
        .unwrap();
        assert_eq!(id.forward(&[3.0, -2.0]).unwrap(), vec![3.0, -2.0]);

        let relu = Network::new(vec![Layer::Relu], 2, 2).unwrap();
        assert_eq!(relu.forward(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);

        let net = Network::new(vec![Layer::affine(vec![vec![1.0, -1.0]], vec![0.5]), Layer::Relu], 2, 1).unwrap();
        assert_eq!(net.forward(&[2.0, 1.0]).unwrap(), vec![1.5]);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn json_round_trip() {
        let net = Network::new(
            vec![
                Layer::affine(vec![vec![1.0, -1.0], vec![0.25, 2.0]], vec![0.5, -1.0]),
                Layer::Tanh,
                Layer::affine(vec![vec![1.0, 1.0]], vec![0.0]),
            ],
            2,
            1,
        )
        .unwrap();
        assert_eq!(Network::from_json(&net.to_json()).unwrap(), net);
    }
}
