//! Synthetic monitoring traces and their CSV form.
//!
//! A trace is a sequence of labeling groups of `group_size` records each
//! (the last group may be shorter). Every group holds exactly one winner
//! chosen by [`label_group`]. The generator draws TDP from a small discrete
//! set, usages from Beta distributions and bandwidth from a log-normal, which
//! yields a right-skewed bandwidth column where values above 75 Mbps are rare.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::domain::{
    label_records, validate_sample, LabeledRecord, MonitoringSample, NodeId, NodeProfile,
};
use crate::error::{Error, Result};
use crate::rng::{indexed_stream, stream};

pub const TRACE_HEADER: [&str; 8] = [
    "node_id",
    "cpu_tdp_w",
    "cpu_usage",
    "mem_usage",
    "cpi",
    "bandwidth_kbps",
    "cpu_time_s",
    "is_winner",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSpec {
    pub records: usize,
    pub nodes: usize,
    /// Explicit profiles; when empty they are drawn from the seed.
    pub profiles: Vec<NodeProfile>,
    /// Node whose profile is replaced by [`NodeProfile::planted_winner`].
    pub planted_winner: Option<NodeId>,
    /// Records per labeling group; defaults to the node count.
    pub group_size: Option<usize>,
    pub seed: u64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec {
            records: 10_000,
            nodes: 10,
            profiles: Vec::new(),
            planted_winner: None,
            group_size: None,
            seed: 42,
        }
    }
}

impl TraceSpec {
    pub fn group_size(&self) -> usize {
        self.group_size.unwrap_or(self.nodes)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("trace: {m}")));
        if self.nodes == 0 {
            return bad("node count must be >= 1".into());
        }
        if self.records < self.nodes {
            return bad(format!(
                "record count {} below node count {}",
                self.records, self.nodes
            ));
        }
        let k = self.group_size();
        if k < 2 || k > self.nodes {
            return bad(format!("group size {k} must be in [2, {}]", self.nodes));
        }
        if !self.profiles.is_empty() && self.profiles.len() != self.nodes {
            return bad(format!(
                "{} profiles for {} nodes",
                self.profiles.len(),
                self.nodes
            ));
        }
        if let Some(p) = self.planted_winner {
            if p.index() >= self.nodes {
                return bad(format!("planted winner {p} is not a node"));
            }
        }
        Ok(())
    }

    /// Profiles in node order, drawn from the seed unless given explicitly.
    pub fn resolve_profiles(&self) -> Result<Vec<NodeProfile>> {
        self.validate()?;
        let mut profiles = if self.profiles.is_empty() {
            default_profiles(self.nodes, self.seed)
        } else {
            self.profiles.clone()
        };
        if let Some(p) = self.planted_winner {
            profiles[p.index()] = NodeProfile::planted_winner(p);
        }
        for (i, p) in profiles.iter().enumerate() {
            p.validate()?;
            if p.node_id.index() != i {
                return Err(Error::Config(format!(
                    "profile {i} carries node id {}",
                    p.node_id
                )));
            }
        }
        Ok(profiles)
    }
}

/// Per-node profiles derived from `seed`; node `i` always gets the same
/// profile regardless of how many nodes exist.
pub fn default_profiles(nodes: usize, seed: u64) -> Vec<NodeProfile> {
    (0..nodes)
        .map(|i| {
            NodeProfile::random(
                NodeId::from(i),
                &mut indexed_stream(seed, "profile", i as u64),
            )
        })
        .collect()
}

pub fn generate_trace(spec: &TraceSpec) -> Result<Vec<LabeledRecord>> {
    let profiles = spec.resolve_profiles()?;
    let k = spec.group_size();
    let mut rng = stream(spec.seed, "trace");
    let mut out = Vec::with_capacity(spec.records);
    while out.len() < spec.records {
        let mut members: Vec<usize> = if k == spec.nodes {
            (0..spec.nodes).collect()
        } else {
            index::sample(&mut rng, spec.nodes, k).into_vec()
        };
        members.sort_unstable();
        members.truncate(spec.records - out.len());
        let group = members
            .iter()
            .map(|&i| profiles[i].draw(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        out.extend(label_records(&group));
    }
    Ok(out)
}

/// Splits a flat trace into consecutive labeling groups.
pub fn group_records(records: &[LabeledRecord], group_size: usize) -> Vec<Vec<LabeledRecord>> {
    records
        .chunks(group_size.max(1))
        .map(<[LabeledRecord]>::to_vec)
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    node_id: u32,
    cpu_tdp_w: f64,
    cpu_usage: f64,
    mem_usage: f64,
    cpi: f64,
    bandwidth_kbps: f64,
    cpu_time_s: f64,
    is_winner: u8,
}

pub fn write_trace<W: Write>(w: W, records: &[LabeledRecord]) -> Result<()> {
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    csv.write_record(TRACE_HEADER)?;
    for r in records {
        let s = &r.sample;
        csv.serialize(TraceRow {
            node_id: s.node_id.0,
            cpu_tdp_w: s.cpu_tdp_w,
            cpu_usage: s.cpu_usage,
            mem_usage: s.mem_usage,
            cpi: s.cpi,
            bandwidth_kbps: s.bandwidth_kbps,
            cpu_time_s: s.cpu_time_s,
            is_winner: u8::from(r.is_winner),
        })?;
    }
    csv.flush()?;
    Ok(())
}

pub fn save_trace(path: &Path, records: &[LabeledRecord]) -> Result<()> {
    write_trace(File::create(path)?, records)
}

/// Reads a trace and checks every row and every labeling group. With no
/// explicit `group_size`, groups span as many rows as there are distinct
/// node ids in the file.
pub fn read_trace<R: Read>(
    r: R,
    origin: &Path,
    group_size: Option<usize>,
) -> Result<Vec<LabeledRecord>> {
    let fail = |line: u64, reason: String| Error::Trace {
        path: origin.to_path_buf(),
        line,
        reason,
    };
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = csv.headers().map_err(|e| fail(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(fail(
            1,
            format!(
                "header {:?} does not match {:?}",
                header.iter().collect::<Vec<_>>(),
                TRACE_HEADER
            ),
        ));
    }
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in csv.deserialize::<TraceRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            fail(line, format!("malformed row: {e}"))
        })?;
        let line = records.len() as u64 + 2;
        if row.is_winner > 1 {
            return Err(fail(
                line,
                format!("is_winner must be 0 or 1, got {}", row.is_winner),
            ));
        }
        let sample = MonitoringSample {
            node_id: NodeId(row.node_id),
            cpu_tdp_w: row.cpu_tdp_w,
            cpu_usage: row.cpu_usage,
            mem_usage: row.mem_usage,
            cpi: row.cpi,
            bandwidth_kbps: row.bandwidth_kbps,
            cpu_time_s: row.cpu_time_s,
        };
        if let Err(v) = validate_sample(&sample) {
            let msg = v
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", ");
            return Err(fail(line, msg));
        }
        records.push(LabeledRecord {
            sample,
            is_winner: row.is_winner == 1,
        });
        lines.push(line);
    }
    if records.is_empty() {
        log::warn!("{}: trace has a header but no records", origin.display());
        return Ok(records);
    }
    let k = group_size.unwrap_or_else(|| {
        records
            .iter()
            .map(|r| r.sample.node_id)
            .collect::<BTreeSet<_>>()
            .len()
    });
    for (g, chunk) in records.chunks(k.max(1)).enumerate() {
        let base = g * k.max(1);
        let winners: Vec<usize> = (0..chunk.len()).filter(|&i| chunk[i].is_winner).collect();
        match winners.as_slice() {
            [_] => {}
            [] => return Err(fail(lines[base], format!("group {g} has no winner"))),
            [_, second, ..] => {
                return Err(fail(
                    lines[base + second],
                    format!("duplicate winner in group {g}"),
                ));
            }
        }
    }
    Ok(records)
}

pub fn load_trace(path: &Path, group_size: Option<usize>) -> Result<Vec<LabeledRecord>> {
    read_trace(File::open(path)?, path, group_size)
}
