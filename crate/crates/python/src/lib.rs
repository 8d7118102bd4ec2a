//! Python bindings for the hybrid channel allocation toolkit.
//!
//! Exposes the probability constructors, the five allocation strategies,
//! the hybrid blocking simulator with its Erlang-B oracle, and the traffic
//! predictor. Build the importable module with
//! `cargo build -p ohca-py --release --features extension-module`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ohca_core::allocators;
use ohca_core::error::Error;
use ohca_core::mlp;
use ohca_core::plan::{self, AllocationPlan, ObjectiveDirection, Strategy};
use ohca_core::sim;
use ohca_core::traffic::{self, BaseStationStats, ChannelBounds, ProbabilitySource, ProbabilityVector};

fn py_err(err: Error) -> PyErr {
    PyValueError::new_err(format!("{}: {err}", err.name()))
}

fn probs_from_values(values: Vec<f64>) -> PyResult<ProbabilityVector> {
    ProbabilityVector::new(values, ProbabilitySource::External).map_err(py_err)
}

fn parse_direction(direction: &str) -> PyResult<ObjectiveDirection> {
    direction.parse().map_err(py_err)
}

fn bounds_from_options(lmin: Option<u32>, lmax: Option<u32>) -> PyResult<Option<ChannelBounds>> {
    match (lmin, lmax) {
        (Some(lo), hi) => ChannelBounds::new(lo, hi.unwrap_or(lo))
            .map(Some)
            .map_err(py_err),
        (None, Some(_)) => Err(PyValueError::new_err("lmax requires lmin")),
        (None, None) => Ok(None),
    }
}

/// Idle-time probabilities from per-station idle seconds.
#[pyfunction]
fn idle_time_probabilities(idle_times: Vec<f64>) -> PyResult<Vec<f64>> {
    let stats: Vec<BaseStationStats> = idle_times
        .iter()
        .enumerate()
        .map(|(station_id, &idle_time)| BaseStationStats {
            station_id,
            idle_time,
            packet_count: 0,
        })
        .collect();
    traffic::idle_time_probabilities(&stats)
        .map(|p| p.values().to_vec())
        .map_err(py_err)
}

/// Inverse-packet-count probabilities from per-station packet counts.
#[pyfunction]
fn inverse_packet_count_probabilities(packet_counts: Vec<u64>) -> PyResult<Vec<f64>> {
    let stats: Vec<BaseStationStats> = packet_counts
        .iter()
        .enumerate()
        .map(|(station_id, &packet_count)| BaseStationStats {
            station_id,
            idle_time: 0.0,
            packet_count,
        })
        .collect();
    traffic::inverse_packet_count_probabilities(&stats)
        .map(|p| p.values().to_vec())
        .map_err(py_err)
}

/// `(l_min, l_max)` from observed per-slot peak demand.
#[pyfunction]
fn estimate_channel_bounds(per_slot_peak_demand: Vec<u32>) -> PyResult<(u32, u32)> {
    traffic::estimate_channel_bounds(&per_slot_peak_demand)
        .map(|b| (b.l_min(), b.l_max()))
        .map_err(py_err)
}

/// Station indices by descending probability.
#[pyfunction]
fn rank_cells(probs: Vec<f64>) -> PyResult<Vec<usize>> {
    Ok(plan::rank_cells(&probs_from_values(probs)?))
}

/// Huffman tree depths per station.
#[pyfunction]
fn huffman_code_lengths(probs: Vec<f64>) -> PyResult<Vec<u32>> {
    allocators::huffman_code_lengths(&probs_from_values(probs)?).map_err(py_err)
}

/// Solves `e·x + f·y = target` over the integers.
///
/// Returns `(base_x, base_y, step_x, step_y, gcd)` describing the solution
/// family, or `None` when the gcd does not divide the target.
#[pyfunction]
fn solve_linear_diophantine(e: u64, f: u64, target: i64) -> Option<(i64, i64, i64, i64, u64)> {
    allocators::solve_linear_diophantine(e, f, target)
        .map(|s| (s.base_x, s.base_y, s.step_x, s.step_y, s.gcd))
}

/// Erlang-B blocking probability for `channels` servers.
#[pyfunction]
fn erlang_b(offered_erlangs: f64, channels: u32) -> f64 {
    sim::erlang_b(offered_erlangs, channels)
}

/// Splits a channel budget into `(fixed, dynamic)` shares.
#[pyfunction]
#[pyo3(signature = (total, fixed_fraction = sim::DEFAULT_FIXED_FRACTION))]
fn split_channels(total: u32, fixed_fraction: f64) -> (u32, u32) {
    sim::split_channels(total, fixed_fraction)
}

/// A fixed-channel allocation plan.
#[pyclass(name = "Plan")]
struct PyPlan {
    inner: AllocationPlan,
}

#[pymethods]
impl PyPlan {
    /// Channels per station, indexed by station id.
    #[getter]
    fn counts(&self) -> Vec<u32> {
        self.inner.counts.clone()
    }

    #[getter]
    fn total_fixed(&self) -> u32 {
        self.inner.total_fixed
    }

    #[getter]
    fn residual_to_pool(&self) -> u32 {
        self.inner.residual_to_pool
    }

    #[getter]
    fn strategy(&self) -> String {
        self.inner.strategy.token().to_string()
    }

    /// Average channels weighted by station probability.
    fn objective(&self, probs: Vec<f64>) -> PyResult<f64> {
        plan::average_allocation(&self.inner, &probs_from_values(probs)?).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Plan(strategy='{}', counts={:?}, residual_to_pool={})",
            self.inner.strategy.token(),
            self.inner.counts,
            self.inner.residual_to_pool
        )
    }
}

/// Computes a plan with the named strategy.
///
/// `strategy` is one of `ap1 | ap2 | ap3 | gp4 | source | uniform`;
/// `ap2`, `ap3`, and `gp4` need `lmin` (and `lmax` where it matters).
#[pyfunction]
#[pyo3(signature = (strategy, channels, probs, lmin = None, lmax = None, direction = "min"))]
fn allocate(
    strategy: &str,
    channels: u32,
    probs: Vec<f64>,
    lmin: Option<u32>,
    lmax: Option<u32>,
    direction: &str,
) -> PyResult<PyPlan> {
    let strategy: Strategy = strategy.parse().map_err(py_err)?;
    let probs = probs_from_values(probs)?;
    let bounds = bounds_from_options(lmin, lmax)?;
    let direction = parse_direction(direction)?;
    allocators::allocate(strategy, channels, &probs, bounds.as_ref(), direction)
        .map(|inner| PyPlan { inner })
        .map_err(py_err)
}

/// Blocking metrics of one simulation run.
#[pyclass(name = "Metrics")]
struct PyMetrics {
    inner: sim::SimMetrics,
}

#[pymethods]
impl PyMetrics {
    #[getter]
    fn offered(&self) -> Vec<u64> {
        self.inner.cells.iter().map(|c| c.offered).collect()
    }

    #[getter]
    fn blocked(&self) -> Vec<u64> {
        self.inner.cells.iter().map(|c| c.blocked).collect()
    }

    #[getter]
    fn completed(&self) -> Vec<u64> {
        self.inner.cells.iter().map(|c| c.completed).collect()
    }

    #[getter]
    fn blocking_probability(&self) -> Vec<f64> {
        self.inner
            .cells
            .iter()
            .map(|c| c.blocking_probability)
            .collect()
    }

    #[getter]
    fn overall_blocking(&self) -> f64 {
        self.inner.overall_blocking
    }

    #[getter]
    fn peak_dynamic_in_use(&self) -> u32 {
        self.inner.peak_dynamic_in_use
    }

    #[getter]
    fn mean_dynamic_in_use(&self) -> f64 {
        self.inner.mean_dynamic_in_use
    }

    fn __repr__(&self) -> String {
        format!("Metrics({})", self.inner.summary_line())
    }
}

/// Offered traffic and simulation horizon for one scenario.
#[pyclass(name = "Scenario")]
struct PyScenario {
    inner: sim::ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (
        arrival_rates,
        total_channels,
        mean_holding_time,
        sim_duration,
        fixed_fraction = sim::DEFAULT_FIXED_FRACTION,
        seed = 0,
    ))]
    fn new(
        arrival_rates: Vec<f64>,
        total_channels: u32,
        mean_holding_time: f64,
        sim_duration: f64,
        fixed_fraction: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let inner = sim::ScenarioConfig {
            stations: arrival_rates.len(),
            total_channels,
            fixed_fraction,
            arrival_rates,
            mean_holding_time,
            sim_duration,
            seed,
        };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        sim::ScenarioConfig::read_json(text.as_bytes())
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn stations(&self) -> usize {
        self.inner.stations
    }

    /// `(fixed, dynamic)` channel split of this scenario.
    fn split(&self) -> (u32, u32) {
        sim::split_channels(self.inner.total_channels, self.inner.fixed_fraction)
    }

    /// Idle-time probability vector implied by the offered loads.
    fn probability_vector(&self) -> PyResult<Vec<f64>> {
        self.inner
            .probability_vector()
            .map(|p| p.values().to_vec())
            .map_err(py_err)
    }

    /// Runs the hybrid simulation once.
    ///
    /// The dynamic pool defaults to every channel the plan left unassigned.
    #[pyo3(signature = (plan, dynamic_pool = None, seed = None))]
    fn simulate(
        &self,
        plan: &PyPlan,
        dynamic_pool: Option<u32>,
        seed: Option<u64>,
    ) -> PyResult<PyMetrics> {
        let mut scenario = self.inner.clone();
        if let Some(seed) = seed {
            scenario.seed = seed;
        }
        let fixed = plan.inner.total_fixed;
        if fixed > scenario.total_channels {
            return Err(py_err(Error::SeriesExceedsBudget {
                required: fixed as u64,
                budget: scenario.total_channels,
            }));
        }
        let pool = dynamic_pool.unwrap_or(scenario.total_channels - fixed);
        sim::run_hca_simulation(&scenario, &plan.inner, pool)
            .map(|inner| PyMetrics { inner })
            .map_err(py_err)
    }

    /// Runs once per seed; returns `(objective, mean_blocking, std_blocking,
    /// per_seed_blocking)`.
    fn evaluate(&self, plan: &PyPlan, seeds: Vec<u64>) -> PyResult<(f64, f64, f64, Vec<f64>)> {
        sim::evaluate_plan(&self.inner, &plan.inner, &seeds)
            .map(|e| (e.objective, e.mean_blocking, e.std_blocking, e.per_seed_blocking))
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(stations={}, total_channels={}, fixed_fraction={})",
            self.inner.stations, self.inner.total_channels, self.inner.fixed_fraction
        )
    }
}

/// The traffic predictor: a small tanh network over (station, day type,
/// slot-of-day) features.
#[pyclass(name = "Predictor")]
struct PyPredictor {
    model: mlp::MlpModel,
    stations: usize,
    slots_per_day: u32,
}

#[pymethods]
impl PyPredictor {
    #[new]
    #[pyo3(signature = (stations, slots_per_day, hidden = 16, seed = 0))]
    fn new(stations: usize, slots_per_day: u32, hidden: usize, seed: u64) -> PyResult<Self> {
        let model = mlp::MlpModel::new(&[stations + 3, hidden, 2], seed).map_err(py_err)?;
        Ok(Self {
            model,
            stations,
            slots_per_day,
        })
    }

    /// Trains on rows of `(bsn, is_weekend, slot, idle_time, packet_count)`.
    /// Returns the per-epoch loss history (standardized units).
    #[pyo3(signature = (rows, learning_rate = 0.05, epochs = 300, batch_size = 32, seed = 0))]
    fn train(
        &mut self,
        rows: Vec<(usize, bool, u32, f64, f64)>,
        learning_rate: f64,
        epochs: usize,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let rows: Vec<mlp::DatasetRow> = rows
            .into_iter()
            .map(|(bsn, is_weekend, slot, idle_time, packet_count)| mlp::DatasetRow {
                bsn,
                is_weekend,
                slot,
                idle_time,
                packet_count,
            })
            .collect();
        let dataset = mlp::encode_dataset(&rows, self.stations, self.slots_per_day).map_err(py_err)?;
        let config = mlp::TrainConfig {
            learning_rate,
            epochs,
            batch_size,
            seed,
        };
        let (trained, history) = mlp::mlp_train(&self.model, &dataset, &config).map_err(py_err)?;
        self.model = trained;
        Ok(history)
    }

    /// Trains on the synthetic diurnal dataset. Returns the loss history.
    #[pyo3(signature = (days = 30, noise = 1.0, learning_rate = 0.05, epochs = 300, batch_size = 32, seed = 0))]
    fn train_synthetic(
        &mut self,
        days: u32,
        noise: f64,
        learning_rate: f64,
        epochs: usize,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let rows = mlp::synth_traffic_dataset(self.stations, days, self.slots_per_day, noise, seed);
        let rows: Vec<(usize, bool, u32, f64, f64)> = rows
            .into_iter()
            .map(|r| (r.bsn, r.is_weekend, r.slot, r.idle_time, r.packet_count))
            .collect();
        self.train(rows, learning_rate, epochs, batch_size, seed)
    }

    /// Predicted `(idle_time, packet_count)` for one feature triple.
    fn predict(&self, bsn: usize, is_weekend: bool, slot: u32) -> PyResult<(f64, f64)> {
        mlp::predict_parameters(
            &self.model,
            &mlp::TrafficFeatures {
                bsn,
                is_weekend,
                slot,
            },
            self.stations,
            self.slots_per_day,
        )
        .map_err(py_err)
    }

    /// Channel bounds from per-slot packet predictions.
    #[pyo3(signature = (packet_predictions, capacity_factor = 1.0))]
    fn derive_bounds(&self, packet_predictions: Vec<f64>, capacity_factor: f64) -> PyResult<(u32, u32)> {
        mlp::derive_bounds(&packet_predictions, capacity_factor)
            .map(|b| (b.l_min(), b.l_max()))
            .map_err(py_err)
    }

    /// Largest relative error between analytic and finite-difference
    /// gradients on a seeded random sample.
    fn gradient_check(&self, seed: u64) -> PyResult<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let input: Vec<f64> = (0..self.model.input_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let target: Vec<f64> = (0..self.model.output_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        mlp::gradient_check(&self.model, &input, &target).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.model.write_json(&mut buf).map_err(py_err)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str, stations: usize, slots_per_day: u32) -> PyResult<Self> {
        let model = mlp::MlpModel::read_json(text.as_bytes()).map_err(py_err)?;
        Ok(Self {
            model,
            stations,
            slots_per_day,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Predictor(stations={}, slots_per_day={}, layer_sizes={:?})",
            self.stations,
            self.slots_per_day,
            self.model.layer_sizes()
        )
    }
}

#[pymodule]
fn ohca_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(idle_time_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_packet_count_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_channel_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(rank_cells, m)?)?;
    m.add_function(wrap_pyfunction!(huffman_code_lengths, m)?)?;
    m.add_function(wrap_pyfunction!(solve_linear_diophantine, m)?)?;
    m.add_function(wrap_pyfunction!(erlang_b, m)?)?;
    m.add_function(wrap_pyfunction!(split_channels, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyMetrics>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyPredictor>()?;
    Ok(())
}
