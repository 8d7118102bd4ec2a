//! The five channel-count generators and the dispatching front door.
//!
//! Four series-based strategies (arithmetic cases 1–3, geometric case 4)
//! plus a source-coding strategy that sizes counts by ideal code lengths.
//! A uniform equal-split serves as the baseline. All of them return an
//! [`AllocationPlan`] whose counts and pool residual add up to the budget.

pub mod diophantine;
pub mod huffman;

pub use diophantine::{solve_linear_diophantine, DiophantineSolution};
pub use huffman::{huffman_code_lengths, kraft_sum};

use crate::error::{Error, Result};
use crate::plan::{
    largest_remainder_round, pair_counts_to_cells, AllocationPlan, ObjectiveDirection, Ratio,
    Strategy, StrategyParams,
};
use crate::traffic::{ChannelBounds, ProbabilityVector};

fn require_stations(probs: &ProbabilityVector) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::InvalidInput("probability vector is empty".into()));
    }
    Ok(probs.len())
}

/// Case 1: counts proportional to 1..M, scaled so the series spends the
/// whole budget.
///
/// The scaling constant is `c = 2L / (M² + M)`, the unique value for which
/// `Σ c·i = L`; non-integral series values are resolved by
/// largest-remainder rounding.
pub fn allocate_ap_case1(
    total: u32,
    probs: &ProbabilityVector,
    direction: ObjectiveDirection,
) -> Result<AllocationPlan> {
    let stations = require_stations(probs)?;
    if (total as usize) < stations {
        return Err(Error::InfeasibleMinimum {
            budget: total,
            cells: stations,
        });
    }
    let m = stations as u64;
    let c = Ratio::new(2 * total as u64, m * m + m);
    let quotas: Vec<f64> = (1..=m).map(|i| c.to_f64() * i as f64).collect();
    let series = largest_remainder_round(&quotas, total, true)?;
    let counts = pair_counts_to_cells(&series, probs, direction)?;
    AllocationPlan::new(
        counts,
        total,
        Strategy::ApCase1,
        StrategyParams {
            c: Some(c),
            ..StrategyParams::default()
        },
    )
}

/// Case 2: arithmetic series anchored at the lower channel bound, with the
/// difference set by how far the bounds spread over the stations.
///
/// `a = l_min`, `d = ⌊(l_max − l_min) / M⌋`. A series that underspends the
/// budget sends the remainder to the dynamic pool; one that overspends is an
/// error.
pub fn allocate_ap_case2(
    total: u32,
    bounds: &ChannelBounds,
    probs: &ProbabilityVector,
    direction: ObjectiveDirection,
) -> Result<AllocationPlan> {
    let stations = require_stations(probs)?;
    let m = stations as u64;
    let a = bounds.l_min();
    let d = (bounds.l_max() - bounds.l_min()) as u64 / m;
    let series: Vec<u32> = (0..m).map(|i| a + (i * d) as u32).collect();
    let required: u64 = series.iter().map(|&n| n as u64).sum();
    if required > total as u64 {
        return Err(Error::SeriesExceedsBudget {
            required,
            budget: total,
        });
    }
    let counts = pair_counts_to_cells(&series, probs, direction)?;
    AllocationPlan::new(
        counts,
        total,
        Strategy::ApCase2,
        StrategyParams {
            a: Some(a),
            d: Some(d as u32),
            ..StrategyParams::default()
        },
    )
}

/// Case 3: arithmetic series whose parameters solve the budget equation
/// `M·a + (M(M−1)/2)·d = L` exactly.
///
/// Solvable only when `gcd(M, M(M−1)/2)` divides `L`. Among the solutions
/// with `a ≥ 1` and `d ≥ 0`, the one whose start lies nearest the lower
/// bound wins; ties go to the smaller start.
pub fn allocate_ap_case3(
    total: u32,
    l_min: u32,
    probs: &ProbabilityVector,
    direction: ObjectiveDirection,
) -> Result<AllocationPlan> {
    let stations = require_stations(probs)?;
    if stations < 2 {
        return Err(Error::InvalidInput(
            "the exact-series case needs at least two stations".into(),
        ));
    }
    let m = stations as u64;
    let e = m;
    let f = m * (m - 1) / 2;
    let solution = solve_linear_diophantine(e, f, total as i64).ok_or(Error::NoFeasibleL {
        budget: total,
        gcd: diophantine::gcd(e, f),
    })?;

    // a(t) = base_x + t·step_x rises with t; d(t) = base_y + t·step_y falls.
    let step_a = solution.step_x;
    let step_d = -solution.step_y;
    debug_assert!(step_a > 0 && step_d > 0);
    let t_min = div_ceil_i64(1 - solution.base_x, step_a);
    let t_max = div_floor_i64(solution.base_y, step_d);
    if t_min > t_max {
        return Err(Error::NoAdmissibleSeries);
    }

    let mut best: Option<(u64, i64, i64)> = None;
    for t in t_min..=t_max {
        let (a, d) = solution.solution_at(t);
        debug_assert!(a >= 1 && d >= 0);
        let distance = (a - l_min as i64).unsigned_abs();
        let candidate = (distance, a, d);
        best = Some(match best {
            None => candidate,
            Some(current) => {
                // Nearer to l_min wins; on a tie the smaller start wins.
                if (candidate.0, candidate.1) < (current.0, current.1) {
                    candidate
                } else {
                    current
                }
            }
        });
    }
    let (_, a, d) = best.expect("t range non-empty");
    let (a, d) = (a as u32, d as u32);
    let series: Vec<u32> = (0..stations as u32).map(|i| a + i * d).collect();
    debug_assert_eq!(series.iter().map(|&n| n as u64).sum::<u64>(), total as u64);
    let counts = pair_counts_to_cells(&series, probs, direction)?;
    AllocationPlan::new(
        counts,
        total,
        Strategy::ApCase3,
        StrategyParams {
            a: Some(a),
            d: Some(d),
            k: Some(total as u64 / solution.gcd),
            ..StrategyParams::default()
        },
    )
}

/// Case 4: geometric series anchored at the lower bound with the largest
/// integer ratio `r ≥ 2` for which `l_max − l_min > l_min·(r^{M−1} − 1)`.
pub fn allocate_gp_case4(
    total: u32,
    bounds: &ChannelBounds,
    probs: &ProbabilityVector,
    direction: ObjectiveDirection,
) -> Result<AllocationPlan> {
    let stations = require_stations(probs)?;
    if stations < 2 {
        return Err(Error::InvalidInput(
            "the geometric case needs at least two stations".into(),
        ));
    }
    let a = bounds.l_min() as u128;
    let gap = (bounds.l_max() - bounds.l_min()) as u128;
    let fits = |r: u128| -> bool {
        let mut power: u128 = 1;
        for _ in 0..stations - 1 {
            power = power.saturating_mul(r);
            if power > u64::MAX as u128 {
                return false;
            }
        }
        gap > a * (power - 1)
    };
    if !fits(2) {
        return Err(Error::CaseInapplicable);
    }
    let mut ratio: u128 = 2;
    while fits(ratio + 1) {
        ratio += 1;
    }

    let mut series = Vec::with_capacity(stations);
    let mut term = a;
    let mut required: u128 = 0;
    for _ in 0..stations {
        series.push(term);
        required += term;
        term = term.saturating_mul(ratio);
    }
    if required > total as u128 {
        return Err(Error::SeriesExceedsBudget {
            required: required.min(u64::MAX as u128) as u64,
            budget: total,
        });
    }
    let series: Vec<u32> = series.into_iter().map(|n| n as u32).collect();
    let counts = pair_counts_to_cells(&series, probs, direction)?;
    AllocationPlan::new(
        counts,
        total,
        Strategy::GpCase4,
        StrategyParams {
            a: Some(bounds.l_min()),
            r: Some(ratio as u32),
            ..StrategyParams::default()
        },
    )
}

/// Source-coding strategy: counts proportional to the ideal code lengths
/// `−log2(p_i)`, rounded to spend the whole budget.
///
/// Under `Minimize` no re-ranking happens — the weights already give
/// high-probability stations fewer channels. Under `Maximize` the sorted
/// counts are paired in reverse.
pub fn allocate_source_coding(
    probs: &ProbabilityVector,
    total: u32,
    direction: ObjectiveDirection,
) -> Result<AllocationPlan> {
    let stations = require_stations(probs)?;
    if (total as usize) < stations {
        return Err(Error::InfeasibleMinimum {
            budget: total,
            cells: stations,
        });
    }
    for (station, &p) in probs.values().iter().enumerate() {
        if p <= 0.0 {
            return Err(Error::ZeroProbability { station });
        }
    }
    let counts = if stations == 1 {
        vec![total]
    } else {
        let weights: Vec<f64> = probs.values().iter().map(|&p| -p.log2()).collect();
        let rounded = largest_remainder_round(&weights, total, true)?;
        match direction {
            ObjectiveDirection::Minimize => rounded,
            ObjectiveDirection::Maximize => pair_counts_to_cells(&rounded, probs, direction)?,
        }
    };
    AllocationPlan::new(counts, total, Strategy::SourceCoding, StrategyParams::default())
}

/// Baseline: equal split, remainder units to the lowest station ids.
pub fn allocate_uniform(total: u32, stations: usize) -> Result<AllocationPlan> {
    if stations == 0 {
        return Err(Error::InvalidInput("no stations to allocate to".into()));
    }
    if (total as usize) < stations {
        return Err(Error::InfeasibleMinimum {
            budget: total,
            cells: stations,
        });
    }
    let base = total / stations as u32;
    let remainder = total as usize % stations;
    let counts: Vec<u32> = (0..stations)
        .map(|i| base + u32::from(i < remainder))
        .collect();
    AllocationPlan::new(counts, total, Strategy::UniformFca, StrategyParams::default())
}

/// Dispatches to the strategy named by `strategy`.
///
/// The bound-driven strategies (`ap2`, `ap3`, `gp4`) require `bounds`.
pub fn allocate(
    strategy: Strategy,
    total: u32,
    probs: &ProbabilityVector,
    bounds: Option<&ChannelBounds>,
    direction: ObjectiveDirection,
) -> Result<AllocationPlan> {
    let need_bounds = || bounds.ok_or(Error::MissingBounds(strategy.token()));
    match strategy {
        Strategy::ApCase1 => allocate_ap_case1(total, probs, direction),
        Strategy::ApCase2 => allocate_ap_case2(total, need_bounds()?, probs, direction),
        Strategy::ApCase3 => allocate_ap_case3(total, need_bounds()?.l_min(), probs, direction),
        Strategy::GpCase4 => allocate_gp_case4(total, need_bounds()?, probs, direction),
        Strategy::SourceCoding => allocate_source_coding(probs, total, direction),
        Strategy::UniformFca => allocate_uniform(total, probs.len()),
    }
}

fn div_floor_i64(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    a.div_euclid(b)
}

fn div_ceil_i64(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    -(-a).div_euclid(b)
}
