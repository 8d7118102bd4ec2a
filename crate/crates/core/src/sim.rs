//! Discrete-event simulation of hybrid channel allocation.
//!
//! Each cell owns the fixed channels its plan assigned; a central dynamic
//! pool catches overflow. Arrivals are Poisson per cell, holding times are
//! exponential, and an arrival takes a fixed channel if one is free, then a
//! pool channel, and is blocked otherwise. Departing calls return their
//! channel to wherever it came from.
//!
//! Per-cell randomness is split deterministically from `(seed, cell id)`,
//! so a run is bit-reproducible and the arrival streams do not change when
//! the pool size or the plan does.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{average_allocation, AllocationPlan};
use crate::traffic::{ProbabilitySource, ProbabilityVector};

/// Default share of the channel budget that is fixed (the classic 3:1 split).
pub const DEFAULT_FIXED_FRACTION: f64 = 0.75;

fn default_fixed_fraction() -> f64 {
    DEFAULT_FIXED_FRACTION
}

/// Offered traffic and simulation horizon for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Number of cells (base stations).
    pub stations: usize,
    /// Total channels split between fixed assignments and the dynamic pool.
    pub total_channels: u32,
    /// Share of the total that is fixed; the rest feeds the pool.
    #[serde(default = "default_fixed_fraction")]
    pub fixed_fraction: f64,
    /// Call arrival rate per cell, in calls per second.
    pub arrival_rates: Vec<f64>,
    /// Mean call holding time in seconds.
    pub mean_holding_time: f64,
    /// Simulated horizon in seconds.
    pub sim_duration: f64,
    /// Base RNG seed.
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stations == 0 {
            return Err(Error::InvalidInput("scenario needs at least one station".into()));
        }
        if self.arrival_rates.len() != self.stations {
            return Err(Error::DimensionMismatch {
                expected: self.stations,
                got: self.arrival_rates.len(),
            });
        }
        if self.arrival_rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidInput("arrival rates must be nonnegative".into()));
        }
        if !(self.fixed_fraction >= 0.0 && self.fixed_fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "fixed fraction {} is outside [0, 1]",
                self.fixed_fraction
            )));
        }
        if !self.mean_holding_time.is_finite() || self.mean_holding_time <= 0.0 {
            return Err(Error::InvalidInput("mean holding time must be positive".into()));
        }
        if !self.sim_duration.is_finite() || self.sim_duration <= 0.0 {
            return Err(Error::InvalidInput("simulation duration must be positive".into()));
        }
        if self.total_channels == 0 {
            return Err(Error::InvalidInput("total channels must be positive".into()));
        }
        Ok(())
    }

    /// Offered load of one cell in Erlangs.
    pub fn offered_erlangs(&self, cell: usize) -> f64 {
        self.arrival_rates[cell] * self.mean_holding_time
    }

    /// Idle-time probability vector implied by the offered loads.
    ///
    /// The idle-time proxy for a cell at load `a` Erlangs is `exp(−a)`, the
    /// stationary probability that a cell with unconstrained capacity has no
    /// call in progress. Lightly loaded cells therefore get large
    /// probabilities and, under the minimizing pairing, few channels.
    pub fn probability_vector(&self) -> Result<ProbabilityVector> {
        self.validate()?;
        let weights: Vec<f64> = (0..self.stations)
            .map(|cell| (-self.offered_erlangs(cell)).exp())
            .collect();
        ProbabilityVector::from_weights(&weights, ProbabilitySource::IdleTime)
    }

    pub fn read_json<R: io::Read>(reader: R) -> Result<Self> {
        let scenario: ScenarioConfig = serde_json::from_reader(reader)?;
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Splits a channel budget into fixed and dynamic shares.
///
/// The fixed share is `total · fixed_fraction` rounded half-up.
pub fn split_channels(total: u32, fixed_fraction: f64) -> (u32, u32) {
    let fixed = ((total as f64 * fixed_fraction) + 0.5).floor() as u32;
    let fixed = fixed.min(total);
    (fixed, total - fixed)
}

/// Blocking probability of an Erlang loss system: `channels` servers, no
/// queue, `offered_erlangs` of Poisson traffic.
///
/// Computed by the stable recursion `B(E, c) = E·B(E, c−1) / (c + E·B(E, c−1))`
/// from `B(E, 0) = 1`.
pub fn erlang_b(offered_erlangs: f64, channels: u32) -> f64 {
    assert!(
        offered_erlangs >= 0.0 && offered_erlangs.is_finite(),
        "offered load must be a nonnegative number"
    );
    let mut blocking = 1.0;
    for c in 1..=channels {
        let weighted = offered_erlangs * blocking;
        blocking = weighted / (c as f64 + weighted);
    }
    blocking
}

/// Counters for one cell after a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub offered: u64,
    pub blocked: u64,
    pub completed: u64,
    pub in_progress_at_end: u64,
    pub blocking_probability: f64,
}

/// Run-level metrics: per-cell counters plus pool occupancy statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub cells: Vec<CellMetrics>,
    pub overall_blocking: f64,
    pub peak_dynamic_in_use: u32,
    pub mean_dynamic_in_use: f64,
}

impl SimMetrics {
    pub fn total_offered(&self) -> u64 {
        self.cells.iter().map(|c| c.offered).sum()
    }

    pub fn total_blocked(&self) -> u64 {
        self.cells.iter().map(|c| c.blocked).sum()
    }

    /// Writes per-cell counters as CSV with header
    /// `cell,offered,blocked,completed,blocking_prob`.
    pub fn write_csv<W: io::Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "cell,offered,blocked,completed,blocking_prob")?;
        for (cell, m) in self.cells.iter().enumerate() {
            writeln!(
                writer,
                "{cell},{},{},{},{}",
                m.offered, m.blocked, m.completed, m.blocking_probability
            )?;
        }
        Ok(())
    }

    /// One-line human summary for standard output.
    pub fn summary_line(&self) -> String {
        format!(
            "offered {} blocked {} overall_blocking {:.6} peak_pool {} mean_pool {:.3}",
            self.total_offered(),
            self.total_blocked(),
            self.overall_blocking,
            self.peak_dynamic_in_use,
            self.mean_dynamic_in_use
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Arrival { holding: f64 },
    Departure { from_pool: bool },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    cell: usize,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: the BinaryHeap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Per-cell RNG stream, derived only from the scenario seed and the cell id.
fn cell_rng(seed: u64, cell: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell as u64);
    rng
}

/// Runs the hybrid simulation of one scenario against a fixed-channel plan
/// and a dynamic pool of the given size.
///
/// Arrival order plus a per-event sequence number make the event ordering
/// total, so identical inputs give bit-identical metrics.
pub fn run_hca_simulation(
    scenario: &ScenarioConfig,
    plan: &AllocationPlan,
    dynamic_pool: u32,
) -> Result<SimMetrics> {
    scenario.validate()?;
    if plan.counts.len() != scenario.stations {
        return Err(Error::DimensionMismatch {
            expected: scenario.stations,
            got: plan.counts.len(),
        });
    }

    // Pre-generate every arrival with its holding time. Drawing the holding
    // time at arrival time (not at acceptance) keeps the sample path
    // identical across plans and pool sizes.
    let mut arrivals: Vec<(f64, usize, f64)> = Vec::new();
    let holding_dist = Exp::new(1.0 / scenario.mean_holding_time)
        .expect("validated mean holding time is positive");
    for (cell, &rate) in scenario.arrival_rates.iter().enumerate() {
        if rate == 0.0 {
            continue;
        }
        let mut rng = cell_rng(scenario.seed, cell);
        let interarrival = Exp::new(rate).expect("validated rate is positive");
        let mut t = 0.0;
        loop {
            t += interarrival.sample(&mut rng);
            if t >= scenario.sim_duration {
                break;
            }
            let holding = holding_dist.sample(&mut rng);
            arrivals.push((t, cell, holding));
        }
    }
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut queue: BinaryHeap<Event> = BinaryHeap::with_capacity(arrivals.len() * 2);
    let mut next_seq: u64 = 0;
    for (time, cell, holding) in arrivals {
        queue.push(Event {
            time,
            seq: next_seq,
            cell,
            kind: EventKind::Arrival { holding },
        });
        next_seq += 1;
    }

    let mut offered = vec![0u64; scenario.stations];
    let mut blocked = vec![0u64; scenario.stations];
    let mut completed = vec![0u64; scenario.stations];
    let mut fixed_busy = vec![0u32; scenario.stations];
    let mut dynamic_held = vec![0u32; scenario.stations];
    let mut pool_free = dynamic_pool;
    let mut peak_pool_in_use: u32 = 0;
    let mut pool_in_use_integral = 0.0;
    let mut last_time = 0.0;

    while let Some(event) = queue.pop() {
        if event.time > scenario.sim_duration {
            break;
        }
        let pool_in_use = dynamic_pool - pool_free;
        pool_in_use_integral += pool_in_use as f64 * (event.time - last_time);
        last_time = event.time;

        match event.kind {
            EventKind::Arrival { holding } => {
                let cell = event.cell;
                offered[cell] += 1;
                let from_pool = if fixed_busy[cell] < plan.counts[cell] {
                    fixed_busy[cell] += 1;
                    false
                } else if pool_free > 0 {
                    pool_free -= 1;
                    dynamic_held[cell] += 1;
                    peak_pool_in_use = peak_pool_in_use.max(dynamic_pool - pool_free);
                    true
                } else {
                    blocked[cell] += 1;
                    continue;
                };
                queue.push(Event {
                    time: event.time + holding,
                    seq: next_seq,
                    cell,
                    kind: EventKind::Departure { from_pool },
                });
                next_seq += 1;
            }
            EventKind::Departure { from_pool } => {
                let cell = event.cell;
                completed[cell] += 1;
                if from_pool {
                    debug_assert!(dynamic_held[cell] > 0);
                    dynamic_held[cell] -= 1;
                    pool_free += 1;
                } else {
                    debug_assert!(fixed_busy[cell] > 0);
                    fixed_busy[cell] -= 1;
                }
            }
        }
        debug_assert!(fixed_busy
            .iter()
            .zip(&plan.counts)
            .all(|(&busy, &cap)| busy <= cap));
        debug_assert_eq!(
            dynamic_held.iter().sum::<u32>() + pool_free,
            dynamic_pool,
            "pool channels must be conserved"
        );
    }
    let pool_in_use = dynamic_pool - pool_free;
    pool_in_use_integral += pool_in_use as f64 * (scenario.sim_duration - last_time);

    let cells: Vec<CellMetrics> = (0..scenario.stations)
        .map(|cell| {
            let in_progress = offered[cell] - blocked[cell] - completed[cell];
            CellMetrics {
                offered: offered[cell],
                blocked: blocked[cell],
                completed: completed[cell],
                in_progress_at_end: in_progress,
                blocking_probability: if offered[cell] == 0 {
                    0.0
                } else {
                    blocked[cell] as f64 / offered[cell] as f64
                },
            }
        })
        .collect();
    let total_offered: u64 = offered.iter().sum();
    let total_blocked: u64 = blocked.iter().sum();
    Ok(SimMetrics {
        cells,
        overall_blocking: if total_offered == 0 {
            0.0
        } else {
            total_blocked as f64 / total_offered as f64
        },
        peak_dynamic_in_use: peak_pool_in_use,
        mean_dynamic_in_use: pool_in_use_integral / scenario.sim_duration,
    })
}

/// Aggregate of repeated simulation runs of one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEvaluation {
    /// Average-channels objective of the plan against the scenario's
    /// probability vector.
    pub objective: f64,
    pub mean_blocking: f64,
    pub std_blocking: f64,
    pub per_seed_blocking: Vec<f64>,
}

/// Runs the simulation once per seed and summarizes overall blocking.
///
/// The plan must have been cut from this scenario's fixed share; its pool
/// residual joins the scenario's dynamic channels.
pub fn evaluate_plan(
    scenario: &ScenarioConfig,
    plan: &AllocationPlan,
    seeds: &[u64],
) -> Result<PlanEvaluation> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("at least one seed is required".into()));
    }
    scenario.validate()?;
    let (fixed_budget, dynamic) = split_channels(scenario.total_channels, scenario.fixed_fraction);
    if plan.budget() != fixed_budget {
        return Err(Error::InvalidInput(format!(
            "plan was cut from a budget of {} but the scenario's fixed share is {}",
            plan.budget(),
            fixed_budget
        )));
    }
    let pool = dynamic + plan.residual_to_pool;

    let mut per_seed_blocking = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let run_scenario = ScenarioConfig {
            seed,
            ..scenario.clone()
        };
        let metrics = run_hca_simulation(&run_scenario, plan, pool)?;
        per_seed_blocking.push(metrics.overall_blocking);
    }
    let n = per_seed_blocking.len() as f64;
    let mean = per_seed_blocking.iter().sum::<f64>() / n;
    let std = if per_seed_blocking.len() < 2 {
        0.0
    } else {
        let var = per_seed_blocking
            .iter()
            .map(|b| (b - mean) * (b - mean))
            .sum::<f64>()
            / (n - 1.0);
        var.sqrt()
    };
    let objective = average_allocation(plan, &scenario.probability_vector()?)?;
    Ok(PlanEvaluation {
        objective,
        mean_blocking: mean,
        std_blocking: std,
        per_seed_blocking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{Strategy, StrategyParams};
    use approx::assert_abs_diff_eq;

    fn plan_of(counts: &[u32], budget: u32) -> AllocationPlan {
        AllocationPlan::new(
            counts.to_vec(),
            budget,
            Strategy::UniformFca,
            StrategyParams::default(),
        )
        .unwrap()
    }

    fn scenario(rates: &[f64], total: u32, duration: f64, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            stations: rates.len(),
            total_channels: total,
            fixed_fraction: DEFAULT_FIXED_FRACTION,
            arrival_rates: rates.to_vec(),
            mean_holding_time: 1.0,
            sim_duration: duration,
            seed,
        }
    }

    #[test]
    fn split_three_to_one() {
        assert_eq!(split_channels(200, 0.75), (150, 50));
        assert_eq!(split_channels(201, 0.75), (151, 50));
        assert_eq!(split_channels(40, 1.0), (40, 0));
    }

    #[test]
    fn erlang_b_known_values() {
        assert_abs_diff_eq!(erlang_b(2.5, 0), 1.0);
        assert_abs_diff_eq!(erlang_b(1.0, 1), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(erlang_b(2.0, 2), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn zero_traffic_produces_zero_counters() {
        let s = scenario(&[0.0, 0.0], 10, 100.0, 7);
        let metrics = run_hca_simulation(&s, &plan_of(&[4, 4], 8), 2).unwrap();
        assert_eq!(metrics.total_offered(), 0);
        assert_eq!(metrics.total_blocked(), 0);
        assert_eq!(metrics.overall_blocking, 0.0);
    }

    #[test]
    fn accounting_is_exact() {
        let s = scenario(&[1.5, 0.5], 8, 500.0, 11);
        let metrics = run_hca_simulation(&s, &plan_of(&[3, 3], 6), 2).unwrap();
        for cell in &metrics.cells {
            assert_eq!(
                cell.offered,
                cell.blocked + cell.completed + cell.in_progress_at_end
            );
        }
        assert!(metrics.total_offered() > 0);
    }

    #[test]
    fn identical_seeds_reproduce_metrics() {
        let s = scenario(&[2.0, 1.0, 0.25], 12, 300.0, 99);
        let p = plan_of(&[4, 3, 2], 9);
        let a = run_hca_simulation(&s, &p, 3).unwrap();
        let b = run_hca_simulation(&s, &p, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn zero_pool_matches_pure_fixed_run() {
        let s = scenario(&[2.0, 1.0], 8, 400.0, 5);
        let p = plan_of(&[4, 4], 8);
        let with_empty_pool = run_hca_simulation(&s, &p, 0).unwrap();
        assert_eq!(with_empty_pool.peak_dynamic_in_use, 0);
        assert_eq!(with_empty_pool.mean_dynamic_in_use, 0.0);
        // Re-running with the pool removed from the scenario is identical.
        let again = run_hca_simulation(&s, &p, 0).unwrap();
        assert_eq!(with_empty_pool, again);
    }

    #[test]
    fn growing_pool_never_blocks_more() {
        let s = scenario(&[1.8, 1.2, 0.7], 9, 400.0, 21);
        let p = plan_of(&[2, 2, 2], 6);
        let blocked: Vec<u64> = [0u32, 2, 5]
            .iter()
            .map(|&pool| run_hca_simulation(&s, &p, pool).unwrap().total_blocked())
            .collect();
        assert!(blocked[0] >= blocked[1]);
        assert!(blocked[1] >= blocked[2]);
    }

    #[test]
    fn single_cell_tracks_erlang_b() {
        // 2 Erlang offered to 2 channels, no pool: blocking is 0.4.
        let s = ScenarioConfig {
            stations: 1,
            total_channels: 2,
            fixed_fraction: 1.0,
            arrival_rates: vec![2.0],
            mean_holding_time: 1.0,
            sim_duration: 20_000.0,
            seed: 1234,
        };
        let metrics = run_hca_simulation(&s, &plan_of(&[2], 2), 0).unwrap();
        assert!(metrics.total_offered() > 10_000);
        assert!((metrics.overall_blocking - erlang_b(2.0, 2)).abs() <= 0.02);
    }

    #[test]
    fn rejects_plan_dimension_mismatch() {
        let s = scenario(&[1.0], 4, 10.0, 0);
        let err = run_hca_simulation(&s, &plan_of(&[2, 2], 4), 0).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn evaluation_single_seed_has_zero_std() {
        let s = scenario(&[1.0, 0.5], 8, 200.0, 3);
        let p = plan_of(&[3, 3], 6);
        let eval = evaluate_plan(&s, &p, &[42]).unwrap();
        assert_eq!(eval.std_blocking, 0.0);
        assert_eq!(eval.per_seed_blocking.len(), 1);
    }

    #[test]
    fn evaluation_repeated_seed_is_deterministic() {
        let s = scenario(&[1.0, 0.5], 8, 200.0, 3);
        let p = plan_of(&[3, 3], 6);
        let eval = evaluate_plan(&s, &p, &[7, 7, 7]).unwrap();
        assert_eq!(eval.per_seed_blocking[0], eval.per_seed_blocking[1]);
        assert_eq!(eval.per_seed_blocking[1], eval.per_seed_blocking[2]);
        assert_eq!(eval.std_blocking, 0.0);
    }

    #[test]
    fn evaluation_requires_matching_budget() {
        let s = scenario(&[1.0, 0.5], 8, 200.0, 3);
        let p = plan_of(&[3, 3], 7);
        assert!(evaluate_plan(&s, &p, &[1]).is_err());
    }

    #[test]
    fn scenario_probability_vector_prefers_idle_cells() {
        let s = scenario(&[2.0, 0.5], 8, 100.0, 0);
        let p = s.probability_vector().unwrap();
        assert!(p.values()[1] > p.values()[0]);
        assert_eq!(p.source(), ProbabilitySource::IdleTime);
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = scenario(&[1.0, 2.0], 16, 50.0, 9);
        let text = serde_json::to_string(&s).unwrap();
        let back = ScenarioConfig::read_json(text.as_bytes()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn scenario_json_defaults_fixed_fraction() {
        let text = r#"{
            "stations": 2,
            "total_channels": 10,
            "arrival_rates": [1.0, 0.5],
            "mean_holding_time": 2.0,
            "sim_duration": 100.0
        }"#;
        let s = ScenarioConfig::read_json(text.as_bytes()).unwrap();
        assert_eq!(s.fixed_fraction, DEFAULT_FIXED_FRACTION);
        assert_eq!(s.seed, 0);
    }
}
