//! Training a perceptron by minimizing its mean squared error, either with
//! the Fitness Dependent Optimizer searching the flat weight vector or with
//! full-batch gradient descent as a baseline.

use rand::Rng;

use crate::dataset::LabeledDataset;
use crate::fdo::{self, Bounds, ConvergenceCurve, DrawMode, FdoConfig, Objective};
use crate::mlp::{self, decode, encode, MlpParams, MlpTopology, OutputActivation};
use crate::{Error, Result};

/// Scout and iteration budgets for FDO training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 40 scouts, 75 iterations.
    Compact,
    /// 40 scouts, 200 iterations.
    Extended,
}

impl Preset {
    pub fn population(self) -> usize {
        40
    }

    pub fn iterations(self) -> usize {
        match self {
            Preset::Compact => 75,
            Preset::Extended => 200,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "compact" => Ok(Preset::Compact),
            "extended" => Ok(Preset::Extended),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub topology: MlpTopology,
    pub population: usize,
    pub max_iterations: usize,
    pub weight_factor: f64,
    /// Search box applied to every weight and bias.
    pub weight_bounds: (f64, f64),
    pub threshold: f64,
    pub output_activation: OutputActivation,
    pub draws: DrawMode,
    pub parallel: bool,
}

impl TrainingConfig {
    pub fn new(topology: MlpTopology) -> Self {
        Self::from_preset(topology, Preset::Compact)
    }

    pub fn from_preset(topology: MlpTopology, preset: Preset) -> Self {
        Self {
            topology,
            population: preset.population(),
            max_iterations: preset.iterations(),
            weight_factor: 0.0,
            weight_bounds: (-10.0, 10.0),
            threshold: 0.5,
            output_activation: OutputActivation::Linear,
            draws: DrawMode::default(),
            parallel: false,
        }
    }

    /// Optimizer settings over the `(n+1)m + (m+1)o` dimensional weight box.
    pub fn fdo_config(&self) -> Result<FdoConfig> {
        let (lo, hi) = self.weight_bounds;
        let bounds = Bounds::uniform(self.topology.vector_dimension(), lo, hi)?;
        let mut config = FdoConfig::new(bounds);
        config.population = self.population;
        config.max_iterations = self.max_iterations;
        config.weight_factor = self.weight_factor;
        config.draws = self.draws;
        config.parallel = self.parallel;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpConfig {
    pub topology: MlpTopology,
    pub learning_rate: f64,
    pub epochs: usize,
    pub threshold: f64,
    pub output_activation: OutputActivation,
}

impl BpConfig {
    pub fn new(topology: MlpTopology) -> Self {
        Self {
            topology,
            learning_rate: 0.5,
            epochs: 5000,
            threshold: 0.5,
            output_activation: OutputActivation::Linear,
        }
    }
}

/// Which training procedure to run.
#[derive(Debug, Clone, PartialEq)]
pub enum Trainer {
    Fdo(TrainingConfig),
    Backprop(BpConfig),
}

impl Trainer {
    pub fn topology(&self) -> MlpTopology {
        match self {
            Trainer::Fdo(c) => c.topology,
            Trainer::Backprop(c) => c.topology,
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            Trainer::Fdo(c) => c.threshold,
            Trainer::Backprop(c) => c.threshold,
        }
    }

    pub fn train<R: Rng + ?Sized>(&self, data: &LabeledDataset, rng: &mut R) -> Result<TrainedModel> {
        match self {
            Trainer::Fdo(c) => train_fdo_mlp(data, c, rng),
            Trainer::Backprop(c) => train_bp_mlp(data, c, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: MlpParams,
    /// MSE of `params` on the training set.
    pub train_mse: f64,
    pub curve: ConvergenceCurve,
    pub trainer: Trainer,
}

fn target(label: usize, output: usize, outputs: usize) -> f64 {
    if outputs == 1 {
        label as f64
    } else {
        f64::from(u8::from(label == output))
    }
}

fn check_data(topology: &MlpTopology, data: &LabeledDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.n_features() != topology.inputs {
        return Err(Error::DimensionMismatch {
            what: "dataset feature width",
            expected: topology.inputs,
            actual: data.n_features(),
        });
    }
    let max_label = if topology.outputs == 1 { 1 } else { topology.outputs - 1 };
    if let Some(&bad) = data.labels().iter().find(|&&l| l > max_label) {
        return Err(Error::Config(format!(
            "label {bad} cannot be encoded with {} output unit(s)",
            topology.outputs
        )));
    }
    Ok(())
}

fn mse_unchecked(params: &MlpParams, data: &LabeledDataset) -> f64 {
    let o = params.topology.outputs;
    let mut hidden = vec![0.0; params.topology.hidden];
    let mut out = vec![0.0; o];
    let mut total = 0.0;
    for (x, &label) in data.features().iter().zip(data.labels()) {
        params.forward_into(x, &mut hidden, &mut out);
        total += out
            .iter()
            .enumerate()
            .map(|(k, y)| (y - target(label, k, o)).powi(2))
            .sum::<f64>();
    }
    total / data.len() as f64
}

/// Mean over samples of the summed squared output error against 0/1 targets
/// (one-hot when there are several outputs).
pub fn mse_fitness(params: &MlpParams, data: &LabeledDataset) -> Result<f64> {
    check_data(&params.topology, data)?;
    Ok(mse_unchecked(params, data))
}

/// MSE of the network decoded from a flat vector.
pub struct MseObjective<'a> {
    topology: MlpTopology,
    activation: OutputActivation,
    data: &'a LabeledDataset,
}

impl MseObjective<'_> {
    pub fn try_evaluate(&self, flat: &[f64]) -> Result<f64> {
        let params = decode(flat, self.topology)?.with_output_activation(self.activation);
        mse_fitness(&params, self.data)
    }
}

impl Objective for MseObjective<'_> {
    /// Shape errors surface as NaN, which the optimizer reports.
    fn evaluate(&self, flat: &[f64]) -> f64 {
        self.try_evaluate(flat).unwrap_or(f64::NAN)
    }
}

pub fn make_objective(topology: MlpTopology, data: &LabeledDataset) -> MseObjective<'_> {
    MseObjective {
        topology,
        activation: OutputActivation::Linear,
        data,
    }
}

/// Same as [`make_objective`] with an explicit output activation.
pub fn make_objective_with(
    topology: MlpTopology,
    activation: OutputActivation,
    data: &LabeledDataset,
) -> MseObjective<'_> {
    MseObjective { topology, activation, data }
}

/// Searches the weight box with FDO and returns the lowest-MSE network.
pub fn train_fdo_mlp<R: Rng + ?Sized>(
    train_data: &LabeledDataset,
    config: &TrainingConfig,
    rng: &mut R,
) -> Result<TrainedModel> {
    check_data(&config.topology, train_data)?;
    let fdo_config = config.fdo_config()?;
    let objective = make_objective_with(config.topology, config.output_activation, train_data);
    let result = fdo::optimize(&objective, &fdo_config, rng)?;
    let params = decode(&result.best_position, config.topology)?.with_output_activation(config.output_activation);
    let train_mse = mse_unchecked(&params, train_data);
    Ok(TrainedModel {
        params,
        train_mse,
        curve: result.curve,
        trainer: Trainer::Fdo(config.clone()),
    })
}

/// MSE and its gradient with respect to the flat parameter vector.
pub fn mse_gradient(params: &MlpParams, data: &LabeledDataset) -> Result<(f64, Vec<f64>)> {
    check_data(&params.topology, data)?;
    let MlpTopology { inputs: n, hidden: m, outputs: o } = params.topology;
    let scale = 2.0 / data.len() as f64;
    let mut grad = MlpParams::zeros(params.topology);
    let mut hidden = vec![0.0; m];
    let mut out = vec![0.0; o];
    let mut delta_out = vec![0.0; o];
    let mut loss = 0.0;

    for (x, &label) in data.features().iter().zip(data.labels()) {
        params.forward_into(x, &mut hidden, &mut out);
        for k in 0..o {
            let err = out[k] - target(label, k, o);
            loss += err * err;
            delta_out[k] = scale
                * err
                * match params.output_activation {
                    OutputActivation::Linear => 1.0,
                    OutputActivation::Sigmoid => out[k] * (1.0 - out[k]),
                };
            grad.output_biases[k] += delta_out[k];
            for (g, h) in grad.hidden_output[k * m..(k + 1) * m].iter_mut().zip(&hidden) {
                *g += delta_out[k] * h;
            }
        }
        for (j, h) in hidden.iter().enumerate() {
            let back: f64 = (0..o).map(|k| delta_out[k] * params.hidden_output[k * m + j]).sum();
            let delta = back * h * (1.0 - h);
            grad.hidden_biases[j] += delta;
            for (g, xi) in grad.input_hidden[j * n..(j + 1) * n].iter_mut().zip(x) {
                *g += delta * xi;
            }
        }
    }
    Ok((loss / data.len() as f64, encode(&grad)))
}

/// Full-batch gradient descent from weights uniform in [-0.5, 0.5].
///
/// The returned parameters are the lowest-loss ones visited, and the curve
/// records that running minimum after every epoch.
pub fn train_bp_mlp<R: Rng + ?Sized>(
    train_data: &LabeledDataset,
    config: &BpConfig,
    rng: &mut R,
) -> Result<TrainedModel> {
    check_data(&config.topology, train_data)?;
    if !(config.learning_rate.is_finite() && config.learning_rate >= 0.0) {
        return Err(Error::Config(format!(
            "learning rate {} must be finite and non-negative",
            config.learning_rate
        )));
    }
    let dim = config.topology.vector_dimension();
    let mut flat: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..=0.5)).collect();
    let mut params = decode(&flat, config.topology)?.with_output_activation(config.output_activation);
    let mut best = (mse_unchecked(&params, train_data), params.clone());
    let mut curve = ConvergenceCurve::new();

    for epoch in 1..=config.epochs {
        let (_, grad) = mse_gradient(&params, train_data)?;
        for (w, g) in flat.iter_mut().zip(&grad) {
            *w -= config.learning_rate * g;
        }
        params = decode(&flat, config.topology)?.with_output_activation(config.output_activation);
        let loss = mse_unchecked(&params, train_data);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        if loss < best.0 {
            best = (loss, params.clone());
        }
        curve.push(best.0);
    }

    let (train_mse, params) = best;
    Ok(TrainedModel {
        params,
        train_mse,
        curve,
        trainer: Trainer::Backprop(config.clone()),
    })
}

/// Raw network outputs for every sample.
pub fn predict_outputs(params: &MlpParams, data: &LabeledDataset) -> Result<Vec<Vec<f64>>> {
    if data.n_features() != params.topology.inputs {
        return Err(Error::DimensionMismatch {
            what: "dataset feature width",
            expected: params.topology.inputs,
            actual: data.n_features(),
        });
    }
    data.features().iter().map(|x| params.forward(x)).collect()
}

/// Predicted class labels for every sample.
pub fn predict_labels(params: &MlpParams, data: &LabeledDataset, threshold: f64) -> Result<Vec<usize>> {
    Ok(predict_outputs(params, data)?
        .iter()
        .map(|y| mlp::predict_class(y, threshold))
        .collect())
}

/// Fraction of samples classified correctly.
pub fn classification_rate(params: &MlpParams, data: &LabeledDataset, threshold: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predicted = predict_labels(params, data, threshold)?;
    let correct = predicted.iter().zip(data.labels()).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / data.len() as f64)
}

/// Whether larger values of a summarized metric are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStatistics {
    pub avg: f64,
    /// Population standard deviation.
    pub std: f64,
    pub best: f64,
    pub worst: f64,
}

/// Summary of a metric across repeated runs.
pub fn run_statistics(values: &[f64], direction: Direction) -> Result<RunStatistics> {
    if values.is_empty() {
        return Err(Error::Config("run statistics need at least one value".into()));
    }
    // Welford
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let std = (m2 / values.len() as f64).max(0.0).sqrt();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (best, worst) = match direction {
        Direction::HigherIsBetter => (max, min),
        Direction::LowerIsBetter => (min, max),
    };
    Ok(RunStatistics { avg: mean, std, best, worst })
}
