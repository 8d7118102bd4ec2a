//! Per-station traffic statistics and the probability vectors built from them.
//!
//! A [`TrafficTrace`] is the raw observation record for one base station:
//! per-slot busy time and packet counts. [`summarize_trace`] reduces it to
//! [`BaseStationStats`] (total idle time, total packet count), and the two
//! probability constructors turn a set of station stats into the normalized
//! [`ProbabilityVector`] every allocator consumes.

use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum-to-one invariant of a probability vector.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// One observation slot of a station trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub slot_index: u64,
    pub busy_seconds: f64,
    pub packets: u64,
}

/// Raw per-station observation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrace {
    station_id: usize,
    window_length: f64,
    samples: Vec<TraceSample>,
}

impl TrafficTrace {
    /// Builds a trace, checking that busy time fits inside each slot and
    /// that slot indices are strictly increasing.
    pub fn new(station_id: usize, window_length: f64, samples: Vec<TraceSample>) -> Result<Self> {
        if !window_length.is_finite() || window_length <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "window length must be positive, got {window_length}"
            )));
        }
        let mut last_slot = None;
        for sample in &samples {
            if !sample.busy_seconds.is_finite() || sample.busy_seconds < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "station {station_id} slot {}: busy time {} is not a nonnegative number",
                    sample.slot_index, sample.busy_seconds
                )));
            }
            if sample.busy_seconds > window_length {
                return Err(Error::InvalidInput(format!(
                    "station {station_id} slot {}: busy time {} exceeds window length {}",
                    sample.slot_index, sample.busy_seconds, window_length
                )));
            }
            if let Some(prev) = last_slot {
                if sample.slot_index <= prev {
                    return Err(Error::InvalidInput(format!(
                        "station {station_id}: slot indices must be strictly increasing \
                         ({prev} then {})",
                        sample.slot_index
                    )));
                }
            }
            last_slot = Some(sample.slot_index);
        }
        Ok(Self {
            station_id,
            window_length,
            samples,
        })
    }

    pub fn station_id(&self) -> usize {
        self.station_id
    }

    pub fn window_length(&self) -> f64 {
        self.window_length
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }
}

/// Aggregated idle time and packet count for one station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseStationStats {
    pub station_id: usize,
    pub idle_time: f64,
    pub packet_count: u64,
}

/// Where a probability vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbabilitySource {
    IdleTime,
    InversePacketCount,
    External,
}

/// Normalized per-station probabilities: entries are nonnegative and sum to
/// one within [`PROBABILITY_TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    values: Vec<f64>,
    source: ProbabilitySource,
}

impl ProbabilityVector {
    pub fn new(values: Vec<f64>, source: ProbabilitySource) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput(
                "probability vector must have at least one entry".into(),
            ));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "probability {v} at station {i} is not in [0, 1]"
                )));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(Self { values, source })
    }

    /// Normalizes nonnegative weights into a probability vector.
    pub fn from_weights(weights: &[f64], source: ProbabilitySource) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput(
                "probability vector must have at least one entry".into(),
            ));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight {w} at station {i} is not a nonnegative number"
                )));
            }
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::DegenerateTraffic);
        }
        Ok(Self {
            values: weights.iter().map(|w| w / sum).collect(),
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> ProbabilitySource {
        self.source
    }
}

/// Lower and upper bound on the channels allocable to any single station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelBounds {
    l_min: u32,
    l_max: u32,
}

impl ChannelBounds {
    pub fn new(l_min: u32, l_max: u32) -> Result<Self> {
        if l_min == 0 {
            return Err(Error::InvalidInput("lower channel bound must be >= 1".into()));
        }
        if l_min > l_max {
            return Err(Error::InvalidInput(format!(
                "lower bound {l_min} exceeds upper bound {l_max}"
            )));
        }
        Ok(Self { l_min, l_max })
    }

    pub fn l_min(&self) -> u32 {
        self.l_min
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }
}

/// Reduces a trace to total idle time and total packet count.
///
/// Idle time is the unused remainder of every slot: `Σ (window − busy)`.
pub fn summarize_trace(trace: &TrafficTrace) -> Result<BaseStationStats> {
    if trace.samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let idle_time = trace
        .samples
        .iter()
        .map(|s| trace.window_length - s.busy_seconds)
        .sum();
    let packet_count = trace.samples.iter().map(|s| s.packets).sum();
    Ok(BaseStationStats {
        station_id: trace.station_id,
        idle_time,
        packet_count,
    })
}

/// Probability of idle time: each station's share of the total idle time.
pub fn idle_time_probabilities(stats: &[BaseStationStats]) -> Result<ProbabilityVector> {
    if stats.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let weights: Vec<f64> = stats.iter().map(|s| s.idle_time).collect();
    if weights.iter().all(|&t| t <= 0.0) {
        return Err(Error::DegenerateTraffic);
    }
    ProbabilityVector::from_weights(&weights, ProbabilitySource::IdleTime)
}

/// Probability of inverse packet count: stations that move fewer packets
/// get proportionally larger probabilities.
pub fn inverse_packet_count_probabilities(
    stats: &[BaseStationStats],
) -> Result<ProbabilityVector> {
    if stats.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut weights = Vec::with_capacity(stats.len());
    for s in stats {
        if s.packet_count == 0 {
            return Err(Error::ZeroPacketCount {
                station: s.station_id,
            });
        }
        weights.push(1.0 / s.packet_count as f64);
    }
    ProbabilityVector::from_weights(&weights, ProbabilitySource::InversePacketCount)
}

/// Derives channel bounds from observed per-slot peak demand.
///
/// The lower bound is floored at one channel so no cell is starved.
pub fn estimate_channel_bounds(per_slot_peak_demand: &[u32]) -> Result<ChannelBounds> {
    if per_slot_peak_demand.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let min = *per_slot_peak_demand.iter().min().expect("non-empty");
    let max = *per_slot_peak_demand.iter().max().expect("non-empty");
    let l_min = min.max(1);
    let l_max = max.max(l_min);
    ChannelBounds::new(l_min, l_max)
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    station: usize,
    slot: u64,
    busy_seconds: f64,
    packets: u64,
}

/// Reads traces from CSV with header `station,slot,busy_seconds,packets`.
///
/// Station ids must cover `0..M` contiguously; rows for one station must be
/// in slot order. Returns one trace per station, sorted by station id.
pub fn read_traces_csv<R: io::Read>(reader: R, window_length: f64) -> Result<Vec<TrafficTrace>> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut per_station: std::collections::BTreeMap<usize, Vec<TraceSample>> =
        std::collections::BTreeMap::new();
    for row in csv_reader.deserialize() {
        let row: TraceRow = row?;
        per_station.entry(row.station).or_default().push(TraceSample {
            slot_index: row.slot,
            busy_seconds: row.busy_seconds,
            packets: row.packets,
        });
    }
    if per_station.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let station_count = per_station.len();
    if *per_station.keys().last().expect("non-empty") != station_count - 1 {
        return Err(Error::InvalidInput(format!(
            "station ids must cover 0..{station_count} contiguously"
        )));
    }
    per_station
        .into_iter()
        .map(|(station, samples)| TrafficTrace::new(station, window_length, samples))
        .collect()
}

/// Summarizes every trace in station order.
pub fn summarize_traces(traces: &[TrafficTrace]) -> Result<Vec<BaseStationStats>> {
    traces.iter().map(summarize_trace).collect()
}

/// Reads an externally supplied probability vector from CSV with header
/// `station,probability`. Station ids must cover `0..M` contiguously.
pub fn read_probs_csv<R: io::Read>(reader: R) -> Result<ProbabilityVector> {
    #[derive(Deserialize)]
    struct Row {
        station: usize,
        probability: f64,
    }
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut rows: Vec<Row> = Vec::new();
    for row in csv_reader.deserialize() {
        rows.push(row?);
    }
    rows.sort_by_key(|r| r.station);
    for (i, row) in rows.iter().enumerate() {
        if row.station != i {
            return Err(Error::InvalidInput(format!(
                "station ids must cover 0..{} contiguously",
                rows.len()
            )));
        }
    }
    ProbabilityVector::new(
        rows.into_iter().map(|r| r.probability).collect(),
        ProbabilitySource::External,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trace(station: usize, window: f64, rows: &[(u64, f64, u64)]) -> TrafficTrace {
        let samples = rows
            .iter()
            .map(|&(slot_index, busy_seconds, packets)| TraceSample {
                slot_index,
                busy_seconds,
                packets,
            })
            .collect();
        TrafficTrace::new(station, window, samples).unwrap()
    }

    fn stats(values: &[(f64, u64)]) -> Vec<BaseStationStats> {
        values
            .iter()
            .enumerate()
            .map(|(station_id, &(idle_time, packet_count))| BaseStationStats {
                station_id,
                idle_time,
                packet_count,
            })
            .collect()
    }

    #[test]
    fn summarize_sums_idle_and_packets() {
        let t = trace(0, 10.0, &[(0, 4.0, 3), (1, 6.0, 7)]);
        let s = summarize_trace(&t).unwrap();
        assert_abs_diff_eq!(s.idle_time, 10.0);
        assert_eq!(s.packet_count, 10);
    }

    #[test]
    fn summarize_fully_busy_slot() {
        let t = trace(3, 10.0, &[(0, 10.0, 0)]);
        let s = summarize_trace(&t).unwrap();
        assert_abs_diff_eq!(s.idle_time, 0.0);
        assert_eq!(s.packet_count, 0);
        assert_eq!(s.station_id, 3);
    }

    #[test]
    fn summarize_rejects_empty_trace() {
        let t = TrafficTrace::new(0, 10.0, vec![]).unwrap();
        assert!(matches!(summarize_trace(&t), Err(Error::EmptyTrace)));
    }

    #[test]
    fn trace_rejects_busy_beyond_window() {
        let err = TrafficTrace::new(
            0,
            5.0,
            vec![TraceSample {
                slot_index: 0,
                busy_seconds: 6.0,
                packets: 1,
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn trace_rejects_nonincreasing_slots() {
        let samples = vec![
            TraceSample {
                slot_index: 2,
                busy_seconds: 1.0,
                packets: 0,
            },
            TraceSample {
                slot_index: 2,
                busy_seconds: 1.0,
                packets: 0,
            },
        ];
        assert!(TrafficTrace::new(0, 5.0, samples).is_err());
    }

    #[test]
    fn idle_probabilities_symmetric() {
        let p = idle_time_probabilities(&stats(&[(4.0, 1), (4.0, 1), (4.0, 1), (4.0, 1)])).unwrap();
        for &v in p.values() {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-12);
        }
        assert_eq!(p.source(), ProbabilitySource::IdleTime);
    }

    #[test]
    fn idle_probabilities_proportional() {
        let p = idle_time_probabilities(&stats(&[(6.0, 1), (3.0, 1), (1.0, 1)])).unwrap();
        assert_abs_diff_eq!(p.values()[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values()[1], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values()[2], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn idle_probabilities_single_active_station() {
        let p = idle_time_probabilities(&stats(&[(10.0, 1), (0.0, 1), (0.0, 1)])).unwrap();
        assert_eq!(p.values(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn idle_probabilities_reject_all_zero() {
        let err = idle_time_probabilities(&stats(&[(0.0, 1), (0.0, 1)])).unwrap_err();
        assert!(matches!(err, Error::DegenerateTraffic));
    }

    #[test]
    fn inverse_packet_probabilities_symmetric() {
        let p = inverse_packet_count_probabilities(&stats(&[(0.0, 100), (0.0, 100)])).unwrap();
        assert_abs_diff_eq!(p.values()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values()[1], 0.5, epsilon = 1e-12);
        assert_eq!(p.source(), ProbabilitySource::InversePacketCount);
    }

    #[test]
    fn inverse_packet_probabilities_weight_light_stations() {
        let p = inverse_packet_count_probabilities(&stats(&[(0.0, 1), (0.0, 2), (0.0, 4)])).unwrap();
        assert_abs_diff_eq!(p.values()[0], 4.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values()[1], 2.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values()[2], 1.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_packet_probabilities_name_zero_station() {
        let err = inverse_packet_count_probabilities(&stats(&[(0.0, 5), (0.0, 0)])).unwrap_err();
        match err {
            Error::ZeroPacketCount { station } => assert_eq!(station, 1),
            other => panic!("expected ZeroPacketCount, got {other:?}"),
        }
    }

    #[test]
    fn bounds_from_peak_demand() {
        let b = estimate_channel_bounds(&[2, 5, 13, 7]).unwrap();
        assert_eq!((b.l_min(), b.l_max()), (2, 13));
    }

    #[test]
    fn bounds_floor_at_one() {
        let b = estimate_channel_bounds(&[0, 0, 0]).unwrap();
        assert_eq!((b.l_min(), b.l_max()), (1, 1));
    }

    #[test]
    fn bounds_singleton() {
        let b = estimate_channel_bounds(&[4]).unwrap();
        assert_eq!((b.l_min(), b.l_max()), (4, 4));
    }

    #[test]
    fn bounds_reject_empty() {
        assert!(matches!(estimate_channel_bounds(&[]), Err(Error::EmptyTrace)));
    }

    #[test]
    fn read_traces_from_csv() {
        let csv = "station,slot,busy_seconds,packets\n0,0,4.0,3\n0,1,6.0,7\n1,0,1.0,2\n";
        let traces = read_traces_csv(csv.as_bytes(), 10.0).unwrap();
        assert_eq!(traces.len(), 2);
        let stats = summarize_traces(&traces).unwrap();
        assert_abs_diff_eq!(stats[0].idle_time, 10.0);
        assert_eq!(stats[1].packet_count, 2);
    }

    #[test]
    fn read_traces_rejects_gap_in_station_ids() {
        let csv = "station,slot,busy_seconds,packets\n0,0,1.0,1\n2,0,1.0,1\n";
        assert!(read_traces_csv(csv.as_bytes(), 10.0).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn probabilities_sum_to_one(idle in proptest::collection::vec(0.0f64..1e6, 1..32)) {
                prop_assume!(idle.iter().any(|&t| t > 0.0));
                let stats: Vec<BaseStationStats> = idle
                    .iter()
                    .enumerate()
                    .map(|(station_id, &idle_time)| BaseStationStats {
                        station_id,
                        idle_time,
                        packet_count: 1,
                    })
                    .collect();
                let p = idle_time_probabilities(&stats).unwrap();
                let sum: f64 = p.values().iter().sum();
                prop_assert!((sum - 1.0).abs() <= PROBABILITY_TOLERANCE);
            }

            #[test]
            fn power_of_two_scaling_is_exact(
                idle in proptest::collection::vec(0.01f64..1e3, 1..16),
                exponent in -3i32..9,
            ) {
                let stats: Vec<BaseStationStats> = idle
                    .iter()
                    .enumerate()
                    .map(|(station_id, &idle_time)| BaseStationStats {
                        station_id,
                        idle_time,
                        packet_count: 1,
                    })
                    .collect();
                let scale = 2.0f64.powi(exponent);
                let scaled: Vec<BaseStationStats> = stats
                    .iter()
                    .map(|s| BaseStationStats { idle_time: s.idle_time * scale, ..*s })
                    .collect();
                let p = idle_time_probabilities(&stats).unwrap();
                let q = idle_time_probabilities(&scaled).unwrap();
                prop_assert_eq!(p.values(), q.values());
            }

            #[test]
            fn inverse_packet_order_anticorrelates(
                packets in proptest::collection::vec(1u64..100_000, 2..16),
            ) {
                let stats: Vec<BaseStationStats> = packets
                    .iter()
                    .enumerate()
                    .map(|(station_id, &packet_count)| BaseStationStats {
                        station_id,
                        idle_time: 0.0,
                        packet_count,
                    })
                    .collect();
                let p = inverse_packet_count_probabilities(&stats).unwrap();
                for i in 0..packets.len() {
                    for j in 0..packets.len() {
                        if packets[i] < packets[j] {
                            prop_assert!(p.values()[i] > p.values()[j]);
                        }
                    }
                }
            }

            #[test]
            fn summarize_is_additive(
                first in proptest::collection::vec((0.0f64..10.0, 0u64..1000), 1..16),
                second in proptest::collection::vec((0.0f64..10.0, 0u64..1000), 1..16),
            ) {
                let window = 10.0;
                let to_samples = |rows: &[(f64, u64)], offset: u64| -> Vec<TraceSample> {
                    rows.iter()
                        .enumerate()
                        .map(|(i, &(busy_seconds, packets))| TraceSample {
                            slot_index: offset + i as u64,
                            busy_seconds,
                            packets,
                        })
                        .collect()
                };
                let a = TrafficTrace::new(0, window, to_samples(&first, 0)).unwrap();
                let b = TrafficTrace::new(0, window, to_samples(&second, first.len() as u64)).unwrap();
                let mut joined = to_samples(&first, 0);
                joined.extend(to_samples(&second, first.len() as u64));
                let both = TrafficTrace::new(0, window, joined).unwrap();

                let sa = summarize_trace(&a).unwrap();
                let sb = summarize_trace(&b).unwrap();
                let sc = summarize_trace(&both).unwrap();
                prop_assert!((sc.idle_time - (sa.idle_time + sb.idle_time)).abs() < 1e-9);
                prop_assert_eq!(sc.packet_count, sa.packet_count + sb.packet_count);
            }
        }
    }
}
