use std::fmt;

use serde::{Deserialize, Serialize};

use super::NodeId;

/// Number of features the recommender reads from a sample.
pub const FEATURE_COUNT: usize = 5;

/// Floor applied to `cpu_tdp * cpu_time` before taking its reciprocal.
const ENERGY_FLOOR_J: f64 = 1e-9;

/// One node's observed resource state at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitoringSample {
    pub node_id: NodeId,
    pub cpu_tdp_w: f64,
    pub cpu_usage: f64,
    pub mem_usage: f64,
    pub cpi: f64,
    pub bandwidth_kbps: f64,
    pub cpu_time_s: f64,
}

impl MonitoringSample {
    /// Raw recommender features: TDP, CPU usage, memory usage, CPI and
    /// log-bandwidth. Bandwidth is heavy-tailed, so it enters in log space.
    pub fn features(&self) -> [f64; FEATURE_COUNT] {
        [
            self.cpu_tdp_w,
            self.cpu_usage,
            self.mem_usage,
            self.cpi,
            self.bandwidth_kbps.ln_1p(),
        ]
    }

    pub fn energy_j(&self) -> f64 {
        self.cpu_tdp_w * self.cpu_time_s
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        validate_sample(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    CpuTdp,
    CpuUsage,
    MemUsage,
    CyclesPerInstruction,
    Bandwidth,
    CpuTime,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Field::CpuTdp => "cpu_tdp",
            Field::CpuUsage => "cpu_usage",
            Field::MemUsage => "mem_usage",
            Field::CyclesPerInstruction => "cycles_per_instruction",
            Field::Bandwidth => "bandwidth_kbps",
            Field::CpuTime => "cpu_time_s",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: Field,
    pub value: f64,
    pub rule: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={} violates {}", self.field, self.value, self.rule)
    }
}

/// Returns every violated invariant; `Ok` iff there are none.
pub fn validate_sample(s: &MonitoringSample) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let mut check = |field, value: f64, ok: bool, rule| {
        if !ok {
            out.push(Violation { field, value, rule });
        }
    };
    check(
        Field::CpuTdp,
        s.cpu_tdp_w,
        s.cpu_tdp_w.is_finite() && s.cpu_tdp_w > 0.0,
        "> 0",
    );
    check(
        Field::CpuUsage,
        s.cpu_usage,
        (0.0..=1.0).contains(&s.cpu_usage),
        "in [0, 1]",
    );
    check(
        Field::MemUsage,
        s.mem_usage,
        (0.0..=1.0).contains(&s.mem_usage),
        "in [0, 1]",
    );
    check(
        Field::CyclesPerInstruction,
        s.cpi,
        s.cpi.is_finite() && s.cpi > 0.0,
        "> 0",
    );
    check(
        Field::Bandwidth,
        s.bandwidth_kbps,
        s.bandwidth_kbps.is_finite() && s.bandwidth_kbps >= 0.0,
        ">= 0",
    );
    check(
        Field::CpuTime,
        s.cpu_time_s,
        s.cpu_time_s.is_finite() && s.cpu_time_s >= 0.0,
        ">= 0",
    );
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub sample: MonitoringSample,
    pub is_winner: bool,
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect()
}

/// Index of the winner of one labeling group.
///
/// The winner maximizes `norm(bandwidth) + norm(1 / energy) - norm(cpu_usage)`
/// where `norm` is min-max scaling within the group. Ties go to the lowest
/// node id. Returns `None` for an empty group.
pub fn label_group(group: &[MonitoringSample]) -> Option<usize> {
    if group.is_empty() {
        return None;
    }
    let bw: Vec<f64> = group.iter().map(|s| s.bandwidth_kbps).collect();
    let thrift: Vec<f64> = group
        .iter()
        .map(|s| 1.0 / s.energy_j().max(ENERGY_FLOOR_J))
        .collect();
    let usage: Vec<f64> = group.iter().map(|s| s.cpu_usage).collect();
    let (bw, thrift, usage) = (min_max(&bw), min_max(&thrift), min_max(&usage));

    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for i in 0..group.len() {
        let score = bw[i] + thrift[i] - usage[i];
        let better =
            score > best_score || (score == best_score && group[i].node_id < group[best].node_id);
        if better {
            best = i;
            best_score = score;
        }
    }
    Some(best)
}

/// Labels one group with exactly one winner.
pub fn label_records(group: &[MonitoringSample]) -> Vec<LabeledRecord> {
    let winner = label_group(group);
    group
        .iter()
        .enumerate()
        .map(|(i, s)| LabeledRecord {
            sample: *s,
            is_winner: Some(i) == winner,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MonitoringSample {
        MonitoringSample {
            node_id: NodeId(0),
            cpu_tdp_w: 65.0,
            cpu_usage: 0.5,
            mem_usage: 0.4,
            cpi: 1.2,
            bandwidth_kbps: 10_000.0,
            cpu_time_s: 2.0,
        }
    }

    #[test]
    fn valid_sample_passes() {
        assert!(validate_sample(&sample()).is_ok());
    }

    #[test]
    fn usage_out_of_range() {
        let s = MonitoringSample {
            cpu_usage: 1.5,
            ..sample()
        };
        let v = validate_sample(&s).unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, Field::CpuUsage);
    }

    #[test]
    fn zero_tdp_is_excluded() {
        let s = MonitoringSample {
            cpu_tdp_w: 0.0,
            ..sample()
        };
        let v = validate_sample(&s).unwrap_err();
        assert_eq!(
            v.iter().map(|v| v.field).collect::<Vec<_>>(),
            vec![Field::CpuTdp]
        );
    }

    #[test]
    fn every_violation_is_reported() {
        let s = MonitoringSample {
            cpu_tdp_w: -1.0,
            mem_usage: f64::NAN,
            bandwidth_kbps: -3.0,
            cpu_time_s: -1.0,
            ..sample()
        };
        assert_eq!(validate_sample(&s).unwrap_err().len(), 4);
    }

    #[test]
    fn labeling_prefers_thrifty_high_bandwidth_nodes() {
        let a = MonitoringSample {
            node_id: NodeId(0),
            ..sample()
        };
        let b = MonitoringSample {
            node_id: NodeId(1),
            bandwidth_kbps: 50_000.0,
            cpu_time_s: 1.0,
            cpu_usage: 0.1,
            ..sample()
        };
        assert_eq!(label_group(&[a, b]), Some(1));
        let labels = label_records(&[a, b]);
        assert!(!labels[0].is_winner && labels[1].is_winner);
    }

    #[test]
    fn labeling_ties_go_to_lowest_id() {
        let a = MonitoringSample {
            node_id: NodeId(4),
            ..sample()
        };
        let b = MonitoringSample {
            node_id: NodeId(2),
            ..sample()
        };
        assert_eq!(label_group(&[a, b]), Some(1));
        assert_eq!(label_group(&[]), None);
    }
}
