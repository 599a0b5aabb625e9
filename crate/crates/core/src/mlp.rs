//! Single-hidden-layer perceptron.
//!
//! Hidden units use the logistic sigmoid; the output layer is a plain
//! weighted sum unless [`OutputActivation::Sigmoid`] is selected.
//!
//! Flat parameter layout, used by [`encode`]/[`decode`] and the model file:
//! for each hidden unit `j`, its `n` incoming weights followed by its bias;
//! then for each output unit `k`, its `m` incoming weights followed by its
//! bias. Total length is `(n + 1) * m + (m + 1) * o`.

use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MlpTopology {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

impl MlpTopology {
    pub fn new(inputs: usize, hidden: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || hidden == 0 || outputs == 0 {
            return Err(Error::Config(format!(
                "topology {inputs}-{hidden}-{outputs}: every layer needs at least one unit"
            )));
        }
        Ok(Self { inputs, hidden, outputs })
    }

    /// Hidden width chosen by [`hidden_size_rule`].
    pub fn with_default_hidden(inputs: usize, outputs: usize) -> Result<Self> {
        Self::new(inputs, hidden_size_rule(inputs), outputs)
    }

    pub fn vector_dimension(&self) -> usize {
        vector_dimension(self)
    }
}

impl std::fmt::Display for MlpTopology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}-{}", self.inputs, self.hidden, self.outputs)
    }
}

/// Number of weights and biases, i.e. the search-space dimension.
pub fn vector_dimension(topology: &MlpTopology) -> usize {
    let MlpTopology { inputs: n, hidden: m, outputs: o } = *topology;
    (n + 1) * m + (m + 1) * o
}

/// `2N + 1` hidden units for `N` input features.
pub fn hidden_size_rule(feature_count: usize) -> usize {
    2 * feature_count + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputActivation {
    #[default]
    Linear,
    Sigmoid,
}

impl std::str::FromStr for OutputActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "sigmoid" => Ok(Self::Sigmoid),
            other => Err(Error::Config(format!("unknown output activation `{other}`"))),
        }
    }
}

/// Structured weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub topology: MlpTopology,
    /// `input_hidden[j * n + i]` is the weight from input `i` to hidden `j`.
    pub input_hidden: Vec<f64>,
    pub hidden_biases: Vec<f64>,
    /// `hidden_output[k * m + j]` is the weight from hidden `j` to output `k`.
    pub hidden_output: Vec<f64>,
    pub output_biases: Vec<f64>,
    pub output_activation: OutputActivation,
}

impl MlpParams {
    pub fn zeros(topology: MlpTopology) -> Self {
        let MlpTopology { inputs: n, hidden: m, outputs: o } = topology;
        Self {
            topology,
            input_hidden: vec![0.0; n * m],
            hidden_biases: vec![0.0; m],
            hidden_output: vec![0.0; m * o],
            output_biases: vec![0.0; o],
            output_activation: OutputActivation::Linear,
        }
    }

    pub fn with_output_activation(mut self, activation: OutputActivation) -> Self {
        self.output_activation = activation;
        self
    }

    pub fn input_weight(&self, input: usize, hidden: usize) -> f64 {
        self.input_hidden[hidden * self.topology.inputs + input]
    }

    pub fn output_weight(&self, hidden: usize, output: usize) -> f64 {
        self.hidden_output[output * self.topology.hidden + hidden]
    }

    /// Network outputs for one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.topology.inputs {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.topology.inputs,
                actual: input.len(),
            });
        }
        let mut hidden = vec![0.0; self.topology.hidden];
        let mut out = vec![0.0; self.topology.outputs];
        self.forward_into(input, &mut hidden, &mut out);
        Ok(out)
    }

    /// Unchecked forward pass writing hidden activations and outputs into
    /// caller-owned buffers.
    pub(crate) fn forward_into(&self, input: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        let n = self.topology.inputs;
        let m = self.topology.hidden;
        for (j, h) in hidden.iter_mut().enumerate() {
            let w = &self.input_hidden[j * n..(j + 1) * n];
            let s: f64 = w.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.hidden_biases[j];
            *h = sigmoid(s);
        }
        for (k, o) in out.iter_mut().enumerate() {
            let w = &self.hidden_output[k * m..(k + 1) * m];
            let s: f64 = w.iter().zip(hidden.iter()).map(|(w, f)| w * f).sum::<f64>() + self.output_biases[k];
            *o = match self.output_activation {
                OutputActivation::Linear => s,
                OutputActivation::Sigmoid => sigmoid(s),
            };
        }
    }
}

pub fn forward(params: &MlpParams, input: &[f64]) -> Result<Vec<f64>> {
    params.forward(input)
}

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

pub fn decode(flat: &[f64], topology: MlpTopology) -> Result<MlpParams> {
    let expected = vector_dimension(&topology);
    if flat.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "flat parameter vector",
            expected,
            actual: flat.len(),
        });
    }
    let MlpTopology { inputs: n, hidden: m, outputs: o } = topology;
    let mut params = MlpParams::zeros(topology);
    let (first, second) = flat.split_at((n + 1) * m);
    for (j, block) in first.chunks_exact(n + 1).enumerate() {
        params.input_hidden[j * n..(j + 1) * n].copy_from_slice(&block[..n]);
        params.hidden_biases[j] = block[n];
    }
    for (k, block) in second.chunks_exact(m + 1).enumerate() {
        params.hidden_output[k * m..(k + 1) * m].copy_from_slice(&block[..m]);
        params.output_biases[k] = block[m];
    }
    debug_assert_eq!(second.len(), (m + 1) * o);
    Ok(params)
}

pub fn encode(params: &MlpParams) -> Vec<f64> {
    let MlpTopology { inputs: n, hidden: m, outputs: o } = params.topology;
    let mut flat = Vec::with_capacity(vector_dimension(&params.topology));
    for j in 0..m {
        flat.extend_from_slice(&params.input_hidden[j * n..(j + 1) * n]);
        flat.push(params.hidden_biases[j]);
    }
    for k in 0..o {
        flat.extend_from_slice(&params.hidden_output[k * m..(k + 1) * m]);
        flat.push(params.output_biases[k]);
    }
    flat
}

/// Class label for one network output.
///
/// A single output is thresholded (inclusive); several outputs pick the
/// argmax, lowest index on ties.
pub fn predict_class(output: &[f64], threshold: f64) -> usize {
    match output {
        [single] => usize::from(*single >= threshold),
        _ => {
            let mut best = 0;
            for (i, v) in output.iter().enumerate().skip(1) {
                if *v > output[best] {
                    best = i;
                }
            }
            best
        }
    }
}

/// Two-line text form: `n m o`, then the flat vector. A sigmoid output layer
/// appends `sigmoid` to the first line.
pub fn write_model(params: &MlpParams) -> String {
    let t = params.topology;
    let mut out = format!("{} {} {}", t.inputs, t.hidden, t.outputs);
    if params.output_activation == OutputActivation::Sigmoid {
        out.push_str(" sigmoid");
    }
    out.push('\n');
    let flat = encode(params);
    for (i, v) in flat.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:?}").expect("writing to a String");
    }
    out.push('\n');
    out
}

pub fn read_model(text: &str) -> Result<MlpParams> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::ModelFormat("missing topology line".into()))?;
    let mut tokens: Vec<&str> = header.split_whitespace().collect();
    let activation = match tokens.last() {
        Some(last) if last.parse::<usize>().is_err() => {
            let a = last
                .parse::<OutputActivation>()
                .map_err(|_| Error::ModelFormat(format!("unknown output activation `{last}`")))?;
            tokens.pop();
            a
        }
        _ => OutputActivation::Linear,
    };
    let sizes: Vec<usize> = tokens
        .iter()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::ModelFormat(format!("topology line `{header}`: {e}")))?;
    let [n, m, o] = sizes[..] else {
        return Err(Error::ModelFormat(format!(
            "topology line `{header}` must hold three integers"
        )));
    };
    let topology = MlpTopology::new(n, m, o)?;
    let flat: Vec<f64> = lines
        .next()
        .unwrap_or("")
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| Error::ModelFormat(format!("parameter `{s}`: {e}")))
        })
        .collect::<Result<_>>()?;
    if let Some(extra) = lines.next() {
        return Err(Error::ModelFormat(format!("unexpected trailing line `{extra}`")));
    }
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::ModelFormat("parameters must be finite".into()));
    }
    Ok(decode(&flat, topology)?.with_output_activation(activation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn topo(n: usize, m: usize, o: usize) -> MlpTopology {
        MlpTopology::new(n, m, o).unwrap()
    }

    #[test]
    fn vector_dimension_examples() {
        assert_eq!(vector_dimension(&topo(18, 37, 1)), 741);
        assert_eq!(vector_dimension(&topo(1, 1, 1)), 4);
        assert_eq!(vector_dimension(&topo(2, 5, 3)), 33);
    }

    #[test]
    fn hidden_rule_examples() {
        assert_eq!(hidden_size_rule(18), 37);
        assert_eq!(hidden_size_rule(1), 3);
        assert_eq!(hidden_size_rule(2), 5);
    }

    #[test]
    fn empty_layers_rejected() {
        assert!(MlpTopology::new(0, 1, 1).is_err());
        assert!(MlpTopology::new(1, 0, 1).is_err());
        assert!(MlpTopology::new(1, 1, 0).is_err());
    }

    #[test]
    fn decode_canonical_layout() {
        let p = decode(&[1.0, 2.0, 3.0, 4.0], topo(1, 1, 1)).unwrap();
        assert_eq!(p.input_weight(0, 0), 1.0);
        assert_eq!(p.hidden_biases, vec![2.0]);
        assert_eq!(p.output_weight(0, 0), 3.0);
        assert_eq!(p.output_biases, vec![4.0]);

        // 2-2-1: [w00 w10 b0 | w01 w11 b1 | v0 v1 c]
        let p = decode(&[1., 2., 3., 4., 5., 6., 7., 8., 9.], topo(2, 2, 1)).unwrap();
        assert_eq!(p.input_weight(1, 0), 2.0);
        assert_eq!(p.input_weight(0, 1), 4.0);
        assert_eq!(p.hidden_biases, vec![3.0, 6.0]);
        assert_eq!(p.output_weight(1, 0), 8.0);
        assert_eq!(p.output_biases, vec![9.0]);
    }

    #[test]
    fn decode_wrong_length() {
        match decode(&[0.0; 5], topo(1, 1, 1)) {
            Err(Error::DimensionMismatch { expected: 4, actual: 5, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn encode_zeros() {
        assert_eq!(encode(&MlpParams::zeros(topo(1, 1, 1))), vec![0.0; 4]);
        assert_eq!(encode(&MlpParams::zeros(topo(3, 4, 2))).len(), 26);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        // 1 / (1 + e^-2), e^-2 = 0.1353352832366127
        assert!((sigmoid(2.0) - 0.8807970779778823).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn forward_zero_params() {
        let p = MlpParams::zeros(topo(3, 4, 2));
        assert_eq!(p.forward(&[0.3, -1.0, 7.0]).unwrap(), vec![0.0, 0.0]);
        let mut hidden = vec![0.0; 4];
        let mut out = vec![0.0; 2];
        p.forward_into(&[0.3, -1.0, 7.0], &mut hidden, &mut out);
        assert_eq!(hidden, vec![0.5; 4]);
    }

    #[test]
    fn forward_single_unit() {
        let p = decode(&[0.0, 0.0, 2.0, 0.0], topo(1, 1, 1)).unwrap();
        assert_eq!(p.forward(&[123.0]).unwrap(), vec![1.0]);
        let s = p.clone().with_output_activation(OutputActivation::Sigmoid);
        assert_eq!(s.forward(&[0.0]).unwrap(), vec![sigmoid(1.0)]);
    }

    #[test]
    fn forward_shape_mismatch() {
        let p = MlpParams::zeros(topo(2, 2, 1));
        assert!(p.forward(&[1.0]).is_err());
    }

    #[test]
    fn predict_class_rules() {
        assert_eq!(predict_class(&[0.7], 0.5), 1);
        assert_eq!(predict_class(&[0.5], 0.5), 1);
        assert_eq!(predict_class(&[0.49], 0.5), 0);
        assert_eq!(predict_class(&[0.2, 0.9], 0.5), 1);
        assert_eq!(predict_class(&[0.9, 0.9, 0.1], 0.5), 0);
    }

    #[test]
    fn model_text_round_trip() {
        let flat: Vec<f64> = (0..33).map(|i| (i as f64 * 0.7311).sin() / 3.0).collect();
        let p = decode(&flat, topo(2, 5, 3)).unwrap();
        let text = write_model(&p);
        assert!(text.starts_with("2 5 3\n"));
        assert_eq!(read_model(&text).unwrap(), p);

        let s = p.with_output_activation(OutputActivation::Sigmoid);
        let text = write_model(&s);
        assert!(text.starts_with("2 5 3 sigmoid\n"));
        assert_eq!(read_model(&text).unwrap(), s);
    }

    #[test]
    fn model_text_errors() {
        assert!(read_model("").is_err());
        assert!(read_model("1 1\n0 0 0 0\n").is_err());
        assert!(read_model("1 1 1\n0 0 0\n").is_err());
        assert!(read_model("1 1 1\n0 0 x 0\n").is_err());
        assert!(read_model("1 1 1 tanh\n0 0 0 0\n").is_err());
    }

    /// Straight-line evaluation of the weighted sums, indexing the flat vector
    /// directly.
    fn reference_forward(flat: &[f64], t: MlpTopology, input: &[f64]) -> Vec<f64> {
        let (n, m, o) = (t.inputs, t.hidden, t.outputs);
        let mut f = Vec::new();
        for j in 0..m {
            let mut s = flat[j * (n + 1) + n];
            for i in 0..n {
                s += flat[j * (n + 1) + i] * input[i];
            }
            f.push(1.0 / (1.0 + (-s).exp()));
        }
        let base = (n + 1) * m;
        (0..o)
            .map(|k| {
                let mut s = flat[base + k * (m + 1) + m];
                for j in 0..m {
                    s += flat[base + k * (m + 1) + j] * f[j];
                }
                s
            })
            .collect()
    }

    fn topology_strategy() -> impl Strategy<Value = MlpTopology> {
        (1usize..6, 1usize..8, 1usize..4).prop_map(|(n, m, o)| topo(n, m, o))
    }

    proptest! {
        #[test]
        fn decode_encode_round_trip(
            (t, flat) in topology_strategy().prop_flat_map(|t| {
                (Just(t), proptest::collection::vec(-50.0f64..50.0, t.vector_dimension()))
            })
        ) {
            let p = decode(&flat, t).unwrap();
            prop_assert_eq!(encode(&p), flat);
            prop_assert_eq!(decode(&encode(&p), t).unwrap(), p);
        }

        #[test]
        fn sigmoid_symmetry(s in -30.0f64..30.0) {
            let v = sigmoid(s);
            prop_assert!(v > 0.0 && v < 1.0);
            prop_assert!((v + sigmoid(-s) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn forward_matches_reference(
            (t, flat, input) in topology_strategy().prop_flat_map(|t| {
                (
                    Just(t),
                    proptest::collection::vec(-5.0f64..5.0, t.vector_dimension()),
                    proptest::collection::vec(-2.0f64..2.0, t.inputs),
                )
            })
        ) {
            let got = decode(&flat, t).unwrap().forward(&input).unwrap();
            let want = reference_forward(&flat, t, &input);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() < 1e-12);
            }
        }

        #[test]
        fn dimension_with_hidden_rule(n in 1usize..500, o in 1usize..20) {
            let t = MlpTopology::with_default_hidden(n, o).unwrap();
            prop_assert_eq!(t.vector_dimension(), (n + 1) * (2 * n + 1) + (2 * n + 2) * o);
        }
    }
}
