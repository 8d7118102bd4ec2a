//! Allocation plans and the pairing/rounding machinery shared by all allocators.
//!
//! The average-channels objective being minimized (or maximized) is
//! `Σ n_i · p_i` subject to `Σ n_i = L`. Allocators produce an ascending
//! multiset of counts; [`pair_counts_to_cells`] matches it against the
//! stations so that high-probability cells get few channels under
//! [`ObjectiveDirection::Minimize`] and many under `Maximize`.

use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::ProbabilityVector;

/// Exact rational, used for the case-1 scaling constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    /// Builds a reduced fraction. `den` must be nonzero.
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "denominator must be nonzero");
        let g = gcd_u64(num, den);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Whether the allocator drives the average-channels objective down or up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ObjectiveDirection {
    #[default]
    Minimize,
    Maximize,
}

impl FromStr for ObjectiveDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" | "minimize" => Ok(ObjectiveDirection::Minimize),
            "max" | "maximize" => Ok(ObjectiveDirection::Maximize),
            other => Err(Error::InvalidInput(format!(
                "direction must be `min` or `max`, got `{other}`"
            ))),
        }
    }
}

/// Allocation strategies selectable by token in configs and on the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Arithmetic progression 1..M scaled by a constant.
    ApCase1,
    /// Arithmetic progression anchored at the lower channel bound.
    ApCase2,
    /// Arithmetic progression solved exactly from the budget equation.
    ApCase3,
    /// Geometric progression anchored at the lower channel bound.
    GpCase4,
    /// Counts proportional to ideal code lengths.
    SourceCoding,
    /// Equal split baseline.
    UniformFca,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::ApCase1,
        Strategy::ApCase2,
        Strategy::ApCase3,
        Strategy::GpCase4,
        Strategy::SourceCoding,
        Strategy::UniformFca,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Strategy::ApCase1 => "ap1",
            Strategy::ApCase2 => "ap2",
            Strategy::ApCase3 => "ap3",
            Strategy::GpCase4 => "gp4",
            Strategy::SourceCoding => "source",
            Strategy::UniformFca => "uniform",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ap1" => Ok(Strategy::ApCase1),
            "ap2" => Ok(Strategy::ApCase2),
            "ap3" => Ok(Strategy::ApCase3),
            "gp4" => Ok(Strategy::GpCase4),
            "source" => Ok(Strategy::SourceCoding),
            "uniform" => Ok(Strategy::UniformFca),
            other => Err(Error::UnknownStrategy(other.to_string())),
        }
    }
}

/// Parameters recorded by the strategy that produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StrategyParams {
    /// Case-1 scaling constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Ratio>,
    /// Series start.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<u32>,
    /// Arithmetic difference.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    /// Geometric ratio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    /// Budget multiple of the coefficient gcd in the exact-series case.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
}

/// Integer channel counts per station plus what is left for the dynamic pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    /// Channels for station `i`, indexed by station id.
    pub counts: Vec<u32>,
    /// Channels consumed by the fixed assignment (`Σ counts`).
    pub total_fixed: u32,
    /// Channels the series left unassigned; they join the dynamic pool.
    pub residual_to_pool: u32,
    pub strategy: Strategy,
    pub params: StrategyParams,
}

impl AllocationPlan {
    /// Assembles a plan from per-station counts and the budget they were cut
    /// from. The counts must not exceed the budget.
    pub fn new(
        counts: Vec<u32>,
        budget: u32,
        strategy: Strategy,
        params: StrategyParams,
    ) -> Result<Self> {
        let total_fixed: u64 = counts.iter().map(|&c| c as u64).sum();
        if total_fixed > budget as u64 {
            return Err(Error::SeriesExceedsBudget {
                required: total_fixed,
                budget,
            });
        }
        let total_fixed = total_fixed as u32;
        Ok(Self {
            counts,
            total_fixed,
            residual_to_pool: budget - total_fixed,
            strategy,
            params,
        })
    }

    /// The budget the plan was built for: fixed counts plus pool residual.
    pub fn budget(&self) -> u32 {
        self.total_fixed + self.residual_to_pool
    }

    pub fn stations(&self) -> usize {
        self.counts.len()
    }

    /// Writes the plan as CSV with header `station,channels`.
    pub fn write_csv<W: io::Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "station,channels")?;
        for (station, count) in self.counts.iter().enumerate() {
            writeln!(writer, "{station},{count}")?;
        }
        Ok(())
    }

    /// Reads per-station counts from `station,channels` CSV. Strategy and
    /// params are not part of the CSV form, so only the counts come back.
    pub fn read_counts_csv<R: io::Read>(reader: R) -> Result<Vec<u32>> {
        #[derive(Deserialize)]
        struct Row {
            station: usize,
            channels: u32,
        }
        let mut csv_reader = csv::Reader::from_reader(reader);
        let mut rows: Vec<Row> = Vec::new();
        for row in csv_reader.deserialize() {
            rows.push(row?);
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("plan CSV has no rows".into()));
        }
        rows.sort_by_key(|r| r.station);
        for (i, row) in rows.iter().enumerate() {
            if row.station != i {
                return Err(Error::InvalidInput(format!(
                    "plan CSV station ids must cover 0..{} contiguously",
                    rows.len()
                )));
            }
        }
        Ok(rows.into_iter().map(|r| r.channels).collect())
    }
}

/// Average number of channels weighted by station probability: `Σ n_i · p_i`.
pub fn average_allocation(plan: &AllocationPlan, probs: &ProbabilityVector) -> Result<f64> {
    if plan.counts.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            got: plan.counts.len(),
        });
    }
    Ok(plan
        .counts
        .iter()
        .zip(probs.values())
        .map(|(&n, &p)| n as f64 * p)
        .sum())
}

/// Station indices sorted by descending probability, ties by ascending id.
pub fn rank_cells(probs: &ProbabilityVector) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&i, &j| {
        probs.values()[j]
            .total_cmp(&probs.values()[i])
            .then(i.cmp(&j))
    });
    order
}

/// Matches an ascending count sequence to stations.
///
/// Under `Minimize` the highest-probability station receives the smallest
/// count; under `Maximize` the pairing is reversed. Returns per-station
/// counts indexed by station id.
pub fn pair_counts_to_cells(
    counts_ascending: &[u32],
    probs: &ProbabilityVector,
    direction: ObjectiveDirection,
) -> Result<Vec<u32>> {
    if counts_ascending.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            got: counts_ascending.len(),
        });
    }
    let mut sorted = counts_ascending.to_vec();
    sorted.sort_unstable();
    if direction == ObjectiveDirection::Maximize {
        sorted.reverse();
    }
    let mut per_station = vec![0u32; probs.len()];
    for (count, station) in sorted.into_iter().zip(rank_cells(probs)) {
        per_station[station] = count;
    }
    Ok(per_station)
}

/// Rounds real quotas to integers summing exactly to `total` by the
/// largest-remainder rule.
///
/// Quotas are first rescaled so they sum to `total`, floored, and the
/// leftover units go to the largest fractional remainders (ties to the
/// lowest index). With `min_one`, every entry is then raised to at least one
/// channel by taking units from the largest entries. If the quota sequence
/// was already ascending, the result is re-sorted ascending afterwards so
/// rounding cannot perturb the series order.
pub fn largest_remainder_round(quotas: &[f64], total: u32, min_one: bool) -> Result<Vec<u32>> {
    if quotas.is_empty() {
        return Err(Error::InvalidInput("no quotas to round".into()));
    }
    if quotas.iter().any(|q| !q.is_finite() || *q < 0.0) {
        return Err(Error::InvalidInput(
            "quotas must be nonnegative finite numbers".into(),
        ));
    }
    let sum: f64 = quotas.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidInput("quota sum must be positive".into()));
    }
    if min_one && (total as usize) < quotas.len() {
        return Err(Error::InfeasibleMinimum {
            budget: total,
            cells: quotas.len(),
        });
    }

    let scale = total as f64 / sum;
    let scaled: Vec<f64> = quotas.iter().map(|q| q * scale).collect();
    let mut counts: Vec<u32> = scaled.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = counts.iter().sum();

    let mut by_remainder: Vec<usize> = (0..scaled.len()).collect();
    by_remainder.sort_by(|&i, &j| {
        let ri = scaled[i] - scaled[i].floor();
        let rj = scaled[j] - scaled[j].floor();
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in by_remainder.iter().take((total - assigned) as usize) {
        counts[i] += 1;
    }

    if min_one {
        for i in 0..counts.len() {
            while counts[i] == 0 {
                // The donor is a maximum-count entry; among those, the one
                // with the smallest quota, so the counts stay weakly
                // monotone in the quotas after the transfer.
                let donor = (0..counts.len())
                    .max_by(|&a, &b| {
                        counts[a]
                            .cmp(&counts[b])
                            .then(scaled[b].total_cmp(&scaled[a]))
                            .then(b.cmp(&a))
                    })
                    .expect("non-empty");
                debug_assert!(counts[donor] > 1, "budget >= cells guarantees a donor");
                counts[donor] -= 1;
                counts[i] += 1;
            }
        }
    }

    let ascending_input = quotas.windows(2).all(|w| w[0] <= w[1]);
    if ascending_input {
        counts.sort_unstable();
    }
    debug_assert_eq!(counts.iter().map(|&c| c as u64).sum::<u64>(), total as u64);
    Ok(counts)
}
