//! Feed-forward traffic predictor.
//!
//! Maps (station, day type, slot-of-day) features to predicted idle time
//! and packet count. The network is a plain tanh multilayer perceptron with
//! a linear output layer, trained by mini-batch gradient descent on
//! mean-squared error over standardized targets. A finite-difference
//! gradient check guards the backpropagation.

use std::io;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::ChannelBounds;

/// Observation-slot length used by the synthetic dataset, in seconds.
pub const SLOT_SECONDS: f64 = 3600.0;

/// Input features of one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficFeatures {
    /// Base station number in `[0, stations)`.
    pub bsn: usize,
    /// Working day vs weekend.
    pub is_weekend: bool,
    /// Slot of day in `[0, slots_per_day)`.
    pub slot: u32,
}

/// Encodes features as one-hot station ++ weekend flag ++ circular slot.
///
/// The slot is mapped to `(sin, cos)` of its day angle so the last and
/// first slots of a day are neighbors. Output length is `stations + 3`.
pub fn encode_features(
    features: &TrafficFeatures,
    stations: usize,
    slots_per_day: u32,
) -> Result<Vec<f64>> {
    if features.bsn >= stations {
        return Err(Error::EncodingError(format!(
            "station {} is outside 0..{stations}",
            features.bsn
        )));
    }
    if features.slot >= slots_per_day {
        return Err(Error::EncodingError(format!(
            "slot {} is outside 0..{slots_per_day}",
            features.slot
        )));
    }
    let mut encoded = vec![0.0; stations + 3];
    encoded[features.bsn] = 1.0;
    encoded[stations] = if features.is_weekend { 1.0 } else { 0.0 };
    let angle = 2.0 * std::f64::consts::PI * features.slot as f64 / slots_per_day as f64;
    encoded[stations + 1] = angle.sin();
    encoded[stations + 2] = angle.cos();
    Ok(encoded)
}

/// Hidden-layer activation. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
}

/// Multilayer perceptron: sizes, row-major weight matrices, bias vectors,
/// and the target standardization learned during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    /// `weights[l][o * in + i]` connects input `i` to output `o` of layer `l`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    hidden_activation: Activation,
    target_mean: Vec<f64>,
    target_std: Vec<f64>,
}

impl MlpModel {
    /// Fresh model with uniform `±sqrt(6 / (fan_in + fan_out))` weights.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidInput(
                "a model needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidInput("layer sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let layer: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            weights.push(layer);
            biases.push(vec![0.0; fan_out]);
        }
        let outputs = *layer_sizes.last().expect("at least two layers");
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden_activation: Activation::Tanh,
            target_mean: vec![0.0; outputs],
            target_std: vec![1.0; outputs],
        })
    }

    /// Builds a model from explicit parameters, validating shape chaining
    /// and finiteness.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let outputs = *layer_sizes.last().ok_or_else(|| {
            Error::InvalidInput("a model needs at least an input and an output layer".into())
        })?;
        let mut model = Self {
            layer_sizes,
            weights,
            biases,
            hidden_activation: Activation::Tanh,
            target_mean: vec![0.0; outputs],
            target_std: vec![1.0; outputs],
        };
        model.validate()?;
        model.target_mean = vec![0.0; model.output_dim()];
        model.target_std = vec![1.0; model.output_dim()];
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidInput(
                "a model needs at least an input and an output layer".into(),
            ));
        }
        if self.layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidInput("layer sizes must be positive".into()));
        }
        let layers = self.layer_sizes.len() - 1;
        if self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::DimensionMismatch {
                expected: layers,
                got: self.weights.len().min(self.biases.len()),
            });
        }
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            if self.weights[l].len() != fan_in * fan_out {
                return Err(Error::DimensionMismatch {
                    expected: fan_in * fan_out,
                    got: self.weights[l].len(),
                });
            }
            if self.biases[l].len() != fan_out {
                return Err(Error::DimensionMismatch {
                    expected: fan_out,
                    got: self.biases[l].len(),
                });
            }
        }
        let finite = self
            .weights
            .iter()
            .chain(self.biases.iter())
            .flat_map(|v| v.iter())
            .all(|x| x.is_finite());
        if !finite || !self.target_mean.iter().chain(&self.target_std).all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("model parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn target_standardization(&self) -> (&[f64], &[f64]) {
        (&self.target_mean, &self.target_std)
    }

    /// Per-layer activations: `trace[0]` is the input, `trace.last()` the
    /// network output.
    fn forward_trace(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let layers = self.weights.len();
        let mut trace = Vec::with_capacity(layers + 1);
        trace.push(input.to_vec());
        for l in 0..layers {
            let fan_in = self.layer_sizes[l];
            let fan_out = self.layer_sizes[l + 1];
            let previous = &trace[l];
            let mut out = vec![0.0; fan_out];
            for (o, out_slot) in out.iter_mut().enumerate() {
                let row = &self.weights[l][o * fan_in..(o + 1) * fan_in];
                let mut z = self.biases[l][o];
                for (w, x) in row.iter().zip(previous) {
                    z += w * x;
                }
                *out_slot = if l + 1 == layers {
                    z
                } else {
                    match self.hidden_activation {
                        Activation::Tanh => z.tanh(),
                    }
                };
            }
            trace.push(out);
        }
        Ok(trace)
    }

    /// Forward pass: affine + tanh per hidden layer, linear output.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut trace = self.forward_trace(input)?;
        Ok(trace.pop().expect("trace contains the output"))
    }

    /// Forward pass mapped back to target units via the stored
    /// standardization.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let output = self.forward(input)?;
        Ok(output
            .iter()
            .zip(self.target_mean.iter().zip(&self.target_std))
            .map(|(&y, (&mean, &std))| y * std + mean)
            .collect())
    }

    /// Serializes the model as JSON.
    pub fn write_json<W: io::Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// Reads and validates a JSON model.
    pub fn read_json<R: io::Read>(reader: R) -> Result<Self> {
        let model: MlpModel = serde_json::from_reader(reader)?;
        model.validate()?;
        Ok(model)
    }
}

/// Parameter gradients parallel to the model's weight and bias layout.
#[derive(Debug, Clone)]
struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn add(&mut self, other: &Gradients) {
        for (acc, g) in self.weights.iter_mut().zip(&other.weights) {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
        for (acc, g) in self.biases.iter_mut().zip(&other.biases) {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
    }
}

/// Mean-squared error of one output against its target.
fn sample_loss(output: &[f64], target: &[f64]) -> f64 {
    let n = output.len() as f64;
    output
        .iter()
        .zip(target)
        .map(|(y, t)| (y - t) * (y - t))
        .sum::<f64>()
        / n
}

/// Loss and analytic parameter gradients for one sample.
fn backprop(model: &MlpModel, input: &[f64], target: &[f64]) -> Result<(f64, Gradients)> {
    if target.len() != model.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.output_dim(),
            got: target.len(),
        });
    }
    let trace = model.forward_trace(input)?;
    let output = trace.last().expect("trace contains the output");
    let loss = sample_loss(output, target);

    let layers = model.weights.len();
    let mut grads = Gradients::zeros_like(model);
    // Output layer is linear, so dL/dz is the loss derivative directly.
    let mut delta: Vec<f64> = output
        .iter()
        .zip(target)
        .map(|(y, t)| 2.0 * (y - t) / output.len() as f64)
        .collect();

    for l in (0..layers).rev() {
        let fan_in = model.layer_sizes[l];
        let inputs = &trace[l];
        for (o, &d) in delta.iter().enumerate() {
            grads.biases[l][o] = d;
            let row = &mut grads.weights[l][o * fan_in..(o + 1) * fan_in];
            for (slot, &x) in row.iter_mut().zip(inputs) {
                *slot = d * x;
            }
        }
        if l == 0 {
            break;
        }
        // Propagate to the previous layer through its tanh.
        let mut previous_delta = vec![0.0; fan_in];
        for (o, &d) in delta.iter().enumerate() {
            let row = &model.weights[l][o * fan_in..(o + 1) * fan_in];
            for (p, &w) in previous_delta.iter_mut().zip(row) {
                *p += d * w;
            }
        }
        for (p, &a) in previous_delta.iter_mut().zip(inputs) {
            *p *= 1.0 - a * a;
        }
        delta = previous_delta;
    }
    Ok((loss, grads))
}

/// Central-difference gradients, the independent check on [`backprop`].
fn numerical_gradients(model: &MlpModel, input: &[f64], target: &[f64]) -> Result<Gradients> {
    const STEP: f64 = 1e-4;
    let mut grads = Gradients::zeros_like(model);
    let mut probe = model.clone();
    for l in 0..model.weights.len() {
        for i in 0..model.weights[l].len() {
            let original = probe.weights[l][i];
            probe.weights[l][i] = original + STEP;
            let plus = sample_loss(&probe.forward(input)?, target);
            probe.weights[l][i] = original - STEP;
            let minus = sample_loss(&probe.forward(input)?, target);
            probe.weights[l][i] = original;
            grads.weights[l][i] = (plus - minus) / (2.0 * STEP);
        }
        for i in 0..model.biases[l].len() {
            let original = probe.biases[l][i];
            probe.biases[l][i] = original + STEP;
            let plus = sample_loss(&probe.forward(input)?, target);
            probe.biases[l][i] = original - STEP;
            let minus = sample_loss(&probe.forward(input)?, target);
            probe.biases[l][i] = original;
            grads.biases[l][i] = (plus - minus) / (2.0 * STEP);
        }
    }
    Ok(grads)
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn max_relative_error(analytic: &Gradients, numeric: &Gradients) -> f64 {
    let mut max = 0.0f64;
    for (aw, nw) in analytic.weights.iter().zip(&numeric.weights) {
        for (&a, &n) in aw.iter().zip(nw) {
            max = max.max(relative_error(a, n));
        }
    }
    for (ab, nb) in analytic.biases.iter().zip(&numeric.biases) {
        for (&a, &n) in ab.iter().zip(nb) {
            max = max.max(relative_error(a, n));
        }
    }
    max
}

/// Largest relative disagreement between analytic and central-difference
/// gradients over every parameter, for one sample.
pub fn gradient_check(model: &MlpModel, input: &[f64], target: &[f64]) -> Result<f64> {
    let (_, analytic) = backprop(model, input, target)?;
    let numeric = numerical_gradients(model, input, target)?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 300,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Trains by mini-batch gradient descent on standardized targets.
///
/// Returns the trained model (carrying the target standardization) and the
/// per-epoch loss history: entry `i` is the full-dataset mean-squared error
/// in standardized units measured at the start of epoch `i`, so entry 0 is
/// the untrained loss.
pub fn mlp_train(
    model: &MlpModel,
    dataset: &[(Vec<f64>, Vec<f64>)],
    config: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.learning_rate < 0.0 || !config.learning_rate.is_finite() {
        return Err(Error::InvalidInput("learning rate must be nonnegative".into()));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::InvalidInput("epochs and batch size must be positive".into()));
    }
    let outputs = model.output_dim();
    for (input, target) in dataset {
        if input.len() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                got: input.len(),
            });
        }
        if target.len() != outputs {
            return Err(Error::DimensionMismatch {
                expected: outputs,
                got: target.len(),
            });
        }
    }

    // Standardize targets column-wise; constant columns get unit scale.
    let n = dataset.len() as f64;
    let mut mean = vec![0.0; outputs];
    for (_, target) in dataset {
        for (m, &t) in mean.iter_mut().zip(target) {
            *m += t;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut std = vec![0.0; outputs];
    for (_, target) in dataset {
        for (s, (&t, &m)) in std.iter_mut().zip(target.iter().zip(&mean)) {
            *s += (t - m) * (t - m);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if *s < 1e-9 {
            *s = 1.0;
        }
    }
    let standardized: Vec<Vec<f64>> = dataset
        .iter()
        .map(|(_, target)| {
            target
                .iter()
                .zip(mean.iter().zip(&std))
                .map(|(&t, (&m, &s))| (t - m) / s)
                .collect()
        })
        .collect();

    let mut trained = model.clone();
    trained.target_mean = mean;
    trained.target_std = std;

    let dataset_mse = |model: &MlpModel| -> Result<f64> {
        let mut total = 0.0;
        for ((input, _), target) in dataset.iter().zip(&standardized) {
            total += sample_loss(&model.forward(input)?, target);
        }
        Ok(total / dataset.len() as f64)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        history.push(dataset_mse(&trained)?);
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut batch_grads = Gradients::zeros_like(&trained);
            for &idx in batch {
                let (_, grads) = backprop(&trained, &dataset[idx].0, &standardized[idx])?;
                batch_grads.add(&grads);
            }
            let scale = config.learning_rate / batch.len() as f64;
            for (w, g) in trained.weights.iter_mut().zip(&batch_grads.weights) {
                for (value, grad) in w.iter_mut().zip(g) {
                    *value -= scale * grad;
                }
            }
            for (b, g) in trained.biases.iter_mut().zip(&batch_grads.biases) {
                for (value, grad) in b.iter_mut().zip(g) {
                    *value -= scale * grad;
                }
            }
        }
    }
    Ok((trained, history))
}

/// Predicted `(idle_time, packet_count)` for one feature triple.
pub fn predict_parameters(
    model: &MlpModel,
    features: &TrafficFeatures,
    stations: usize,
    slots_per_day: u32,
) -> Result<(f64, f64)> {
    if model.output_dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: model.output_dim(),
        });
    }
    let encoded = encode_features(features, stations, slots_per_day)?;
    let out = model.predict(&encoded)?;
    Ok((out[0], out[1]))
}

/// Derives channel bounds from per-slot predicted demand.
///
/// Demand is the packet-count prediction scaled by `capacity_factor`
/// (channels per predicted packet), clamped at zero. The lower bound floors
/// the smallest demand (at least one channel); the upper bound is the
/// ceiling of the largest.
pub fn derive_bounds(packet_predictions: &[f64], capacity_factor: f64) -> Result<ChannelBounds> {
    if packet_predictions.is_empty() {
        return Err(Error::InvalidInput("no predictions to derive bounds from".into()));
    }
    if !capacity_factor.is_finite() || capacity_factor < 0.0 {
        return Err(Error::InvalidInput("capacity factor must be nonnegative".into()));
    }
    let demands: Vec<f64> = packet_predictions
        .iter()
        .map(|&p| p.max(0.0) * capacity_factor)
        .collect();
    let lowest = demands.iter().cloned().fold(f64::INFINITY, f64::min);
    let highest = demands.iter().cloned().fold(0.0, f64::max);
    let l_min = (lowest.floor() as u32).max(1);
    let l_max = (highest.ceil() as u32).max(l_min);
    ChannelBounds::new(l_min, l_max)
}

/// One labeled example of the predictor's dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub bsn: usize,
    pub is_weekend: bool,
    pub slot: u32,
    pub idle_time: f64,
    pub packet_count: f64,
}

impl DatasetRow {
    pub fn features(&self) -> TrafficFeatures {
        TrafficFeatures {
            bsn: self.bsn,
            is_weekend: self.is_weekend,
            slot: self.slot,
        }
    }
}

/// Noise-free generative signal of the synthetic dataset.
///
/// Per-slot busy fraction: `0.2 + 0.08·bsn + 0.25·sin(day angle)`, scaled by
/// 0.6 on weekends and clamped to `[0.05, 0.95]`. Targets are
/// `idle = SLOT_SECONDS · (1 − busy)` and
/// `packets = 20 · (bsn + 1) · busy · SLOT_SECONDS`.
pub fn diurnal_targets(bsn: usize, is_weekend: bool, slot: u32, slots_per_day: u32) -> (f64, f64) {
    let angle = 2.0 * std::f64::consts::PI * slot as f64 / slots_per_day as f64;
    let base = 0.2 + 0.08 * bsn as f64 + 0.25 * angle.sin();
    let scaled = if is_weekend { base * 0.6 } else { base };
    let busy = scaled.clamp(0.05, 0.95);
    let idle_time = SLOT_SECONDS * (1.0 - busy);
    let packet_count = 20.0 * (bsn + 1) as f64 * busy * SLOT_SECONDS;
    (idle_time, packet_count)
}

/// Synthetic training data: the diurnal signal of [`diurnal_targets`] with
/// multiplicative Gaussian noise of relative scale `0.05 · noise_amplitude`.
///
/// Days `d` with `d % 7 >= 5` are weekends. Rows are emitted in
/// (day, slot, station) order and depend only on the seed.
pub fn synth_traffic_dataset(
    stations: usize,
    days: u32,
    slots_per_day: u32,
    noise_amplitude: f64,
    seed: u64,
) -> Vec<DatasetRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(stations * days as usize * slots_per_day as usize);
    for day in 0..days {
        let is_weekend = day % 7 >= 5;
        for slot in 0..slots_per_day {
            for bsn in 0..stations {
                let (idle, packets) = diurnal_targets(bsn, is_weekend, slot, slots_per_day);
                let noise_idle: f64 = StandardNormal.sample(&mut rng);
                let noise_packets: f64 = StandardNormal.sample(&mut rng);
                rows.push(DatasetRow {
                    bsn,
                    is_weekend,
                    slot,
                    idle_time: (idle * (1.0 + 0.05 * noise_amplitude * noise_idle)).max(0.0),
                    packet_count: (packets * (1.0 + 0.05 * noise_amplitude * noise_packets))
                        .max(0.0),
                });
            }
        }
    }
    rows
}

/// Encodes dataset rows into (input, target) pairs for [`mlp_train`].
pub fn encode_dataset(
    rows: &[DatasetRow],
    stations: usize,
    slots_per_day: u32,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    rows.iter()
        .map(|row| {
            let input = encode_features(&row.features(), stations, slots_per_day)?;
            Ok((input, vec![row.idle_time, row.packet_count]))
        })
        .collect()
}

/// Writes dataset rows as CSV with header
/// `bsn,is_weekend,slot,idle_time,packet_count` (weekend as 0/1).
pub fn write_dataset_csv<W: io::Write>(rows: &[DatasetRow], mut writer: W) -> Result<()> {
    writeln!(writer, "bsn,is_weekend,slot,idle_time,packet_count")?;
    for row in rows {
        writeln!(
            writer,
            "{},{},{},{},{}",
            row.bsn,
            u8::from(row.is_weekend),
            row.slot,
            row.idle_time,
            row.packet_count
        )?;
    }
    Ok(())
}

/// Reads dataset rows from the CSV form written by [`write_dataset_csv`].
pub fn read_dataset_csv<R: io::Read>(reader: R) -> Result<Vec<DatasetRow>> {
    #[derive(Deserialize)]
    struct Row {
        bsn: usize,
        is_weekend: u8,
        slot: u32,
        idle_time: f64,
        packet_count: f64,
    }
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for row in csv_reader.deserialize() {
        let row: Row = row?;
        rows.push(DatasetRow {
            bsn: row.bsn,
            is_weekend: row.is_weekend != 0,
            slot: row.slot,
            idle_time: row.idle_time,
            packet_count: row.packet_count,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn encoding_layout() {
        let f = TrafficFeatures {
            bsn: 1,
            is_weekend: false,
            slot: 0,
        };
        let v = encode_features(&f, 3, 24).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(&v[0..4], &[0.0, 1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(v[4], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[5], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn encoding_half_day_angle() {
        let f = TrafficFeatures {
            bsn: 0,
            is_weekend: true,
            slot: 12,
        };
        let v = encode_features(&f, 2, 24).unwrap();
        assert_abs_diff_eq!(v[3], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[4], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn encoding_rejects_out_of_range() {
        let f = TrafficFeatures {
            bsn: 3,
            is_weekend: false,
            slot: 0,
        };
        assert!(matches!(
            encode_features(&f, 3, 24),
            Err(Error::EncodingError(_))
        ));
    }

    #[test]
    fn zero_model_outputs_zero() {
        let model = MlpModel::from_parts(
            vec![3, 2, 2],
            vec![vec![0.0; 6], vec![0.0; 4]],
            vec![vec![0.0; 2], vec![0.0; 2]],
        )
        .unwrap();
        assert_eq!(model.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer_is_affine() {
        // Identity weights, bias [1, 1]: input [2, 3] -> [3, 4].
        let model = MlpModel::from_parts(
            vec![2, 2],
            vec![vec![1.0, 0.0, 0.0, 1.0]],
            vec![vec![1.0, 1.0]],
        )
        .unwrap();
        assert_eq!(model.forward(&[2.0, 3.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn non_finite_weight_rejected_at_construction() {
        let err = MlpModel::from_parts(
            vec![2, 1],
            vec![vec![f64::NAN, 1.0]],
            vec![vec![0.0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn forward_rejects_shape_mismatch() {
        let model = MlpModel::new(&[3, 2], 0).unwrap();
        assert!(matches!(
            model.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_check_on_random_models() {
        // Three seeds, sizes up to [8, 16, 2].
        for (seed, sizes) in [
            (1u64, vec![3usize, 4, 2]),
            (2, vec![8, 16, 2]),
            (3, vec![5, 8, 4, 2]),
        ] {
            let model = MlpModel::new(&sizes, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
            let input: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..*sizes.last().unwrap())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let err = gradient_check(&model, &input, &target).unwrap();
            assert!(err < 1e-5, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn gradient_check_detects_sign_flip() {
        let model = MlpModel::new(&[3, 4, 2], 7).unwrap();
        let input = [0.4, -0.2, 0.9];
        let target = [0.3, -0.5];
        let (_, mut analytic) = backprop(&model, &input, &target).unwrap();
        for layer in analytic.weights.iter_mut().chain(analytic.biases.iter_mut()) {
            for g in layer.iter_mut() {
                *g = -*g;
            }
        }
        let numeric = numerical_gradients(&model, &input, &target).unwrap();
        let err = max_relative_error(&analytic, &numeric);
        assert!((err - 2.0).abs() < 1e-3, "sign flip gave error {err}");
    }

    #[test]
    fn gradient_check_zero_network_zero_target() {
        let model = MlpModel::from_parts(
            vec![2, 2],
            vec![vec![0.0; 4]],
            vec![vec![0.0; 2]],
        )
        .unwrap();
        let err = gradient_check(&model, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn zero_learning_rate_keeps_loss_constant() {
        let dataset = encode_dataset(&synth_traffic_dataset(2, 2, 6, 1.0, 5), 2, 6).unwrap();
        let model = MlpModel::new(&[5, 4, 2], 1).unwrap();
        let config = TrainConfig {
            learning_rate: 0.0,
            epochs: 4,
            batch_size: 8,
            seed: 3,
        };
        let (_, history) = mlp_train(&model, &dataset, &config).unwrap();
        assert_eq!(history.len(), 4);
        for window in history.windows(2) {
            assert_abs_diff_eq!(window[0], window[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_targets_are_recovered_exactly() {
        // Single linear layer fitting a linear map: MSE should vanish.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let true_w = [0.7, -1.3, 0.4];
        let true_b = 0.25;
        let dataset: Vec<(Vec<f64>, Vec<f64>)> = (0..48)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = true_b + x.iter().zip(true_w).map(|(xi, wi)| xi * wi).sum::<f64>();
                (x, vec![y])
            })
            .collect();
        let model = MlpModel::new(&[3, 1], 2).unwrap();
        let config = TrainConfig {
            learning_rate: 0.2,
            epochs: 800,
            batch_size: 16,
            seed: 4,
        };
        let (_, history) = mlp_train(&model, &dataset, &config).unwrap();
        assert!(
            *history.last().unwrap() < 1e-4,
            "final MSE {}",
            history.last().unwrap()
        );
    }

    #[test]
    fn training_rejects_empty_dataset() {
        let model = MlpModel::new(&[3, 1], 0).unwrap();
        assert!(matches!(
            mlp_train(&model, &[], &TrainConfig::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn prediction_restores_target_units() {
        let rows = synth_traffic_dataset(2, 8, 8, 0.0, 9);
        let dataset = encode_dataset(&rows, 2, 8).unwrap();
        let model = MlpModel::new(&[5, 12, 2], 3).unwrap();
        let config = TrainConfig {
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 16,
            seed: 1,
        };
        let (trained, _) = mlp_train(&model, &dataset, &config).unwrap();
        let (idle, packets) = predict_parameters(
            &trained,
            &TrafficFeatures {
                bsn: 1,
                is_weekend: false,
                slot: 2,
            },
            2,
            8,
        )
        .unwrap();
        let (want_idle, want_packets) = diurnal_targets(1, false, 2, 8);
        // Loose tolerance: the point is that outputs are in target units,
        // not standardized ones.
        assert!((idle - want_idle).abs() / want_idle < 0.5, "idle {idle} vs {want_idle}");
        assert!(
            (packets - want_packets).abs() / want_packets < 0.5,
            "packets {packets} vs {want_packets}"
        );
    }

    #[test]
    fn bounds_from_predictions() {
        let b = derive_bounds(&[2.2, 5.7, 13.1], 1.0).unwrap();
        assert_eq!((b.l_min(), b.l_max()), (2, 14));
    }

    #[test]
    fn bounds_constant_integral_predictions() {
        let b = derive_bounds(&[5.0, 5.0, 5.0], 1.0).unwrap();
        assert_eq!((b.l_min(), b.l_max()), (5, 5));
    }

    #[test]
    fn bounds_clamp_negative_predictions() {
        let b = derive_bounds(&[-3.0, 4.2], 1.0).unwrap();
        assert_eq!(b.l_min(), 1);
        assert_eq!(b.l_max(), 5);
    }

    #[test]
    fn synth_dataset_is_deterministic_and_noiseless_at_zero() {
        let a = synth_traffic_dataset(3, 9, 12, 1.0, 42);
        let b = synth_traffic_dataset(3, 9, 12, 1.0, 42);
        assert_eq!(a, b);
        let clean = synth_traffic_dataset(3, 9, 12, 0.0, 42);
        for row in &clean {
            let (idle, packets) = diurnal_targets(row.bsn, row.is_weekend, row.slot, 12);
            assert_abs_diff_eq!(row.idle_time, idle, epsilon = 1e-12);
            assert_abs_diff_eq!(row.packet_count, packets, epsilon = 1e-12);
        }
    }

    #[test]
    fn weekend_rows_follow_the_documented_scale() {
        let clean = synth_traffic_dataset(2, 14, 6, 0.0, 1);
        let weekday = clean.iter().find(|r| !r.is_weekend && r.slot == 1 && r.bsn == 0).unwrap();
        let weekend = clean.iter().find(|r| r.is_weekend && r.slot == 1 && r.bsn == 0).unwrap();
        let (idle_wd, _) = diurnal_targets(0, false, 1, 6);
        let (idle_we, _) = diurnal_targets(0, true, 1, 6);
        assert_abs_diff_eq!(weekday.idle_time, idle_wd, epsilon = 1e-12);
        assert_abs_diff_eq!(weekend.idle_time, idle_we, epsilon = 1e-12);
        assert!(weekend.idle_time > weekday.idle_time);
    }

    #[test]
    fn dataset_csv_round_trip() {
        let rows = synth_traffic_dataset(2, 2, 3, 1.0, 8);
        let mut buf = Vec::new();
        write_dataset_csv(&rows, &mut buf).unwrap();
        let back = read_dataset_csv(buf.as_slice()).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn model_json_round_trip() {
        let model = MlpModel::new(&[4, 6, 2], 77).unwrap();
        let mut buf = Vec::new();
        model.write_json(&mut buf).unwrap();
        let back = MlpModel::read_json(buf.as_slice()).unwrap();
        assert_eq!(model, back);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn output_length_matches_last_layer(
                hidden in 1usize..8,
                outputs in 1usize..4,
                seed in 0u64..100,
            ) {
                let model = MlpModel::new(&[5, hidden, outputs], seed).unwrap();
                let out = model.forward(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
                prop_assert_eq!(out.len(), outputs);
            }

            #[test]
            fn encoding_is_injective(slots in 3u32..12, stations in 1usize..5) {
                let mut seen = std::collections::HashSet::new();
                for bsn in 0..stations {
                    for weekend in [false, true] {
                        for slot in 0..slots {
                            let f = TrafficFeatures { bsn, is_weekend: weekend, slot };
                            let v = encode_features(&f, stations, slots).unwrap();
                            let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
                            prop_assert!(seen.insert(key), "collision at {f:?}");
                        }
                    }
                }
            }
        }
    }
}
