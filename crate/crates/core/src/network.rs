//! Interaction networks and per-tower features.
//!
//! Tower-to-tower event records are aggregated into one directed weighted
//! matrix per event type (calls, call minutes, texts). From each matrix every
//! tower gets six features: within-cell events, outgoing and incoming totals,
//! degree and closeness centrality on the support graph, and a smoothed
//! outgoing-over-incoming ratio. Three matrices make the 18-feature rows the
//! classifiers consume.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::io::{io_err, parse_err, require_exists};

/// Number of features per tower across all event types.
pub const N_FEATURES: usize = 18;

/// Column names of the feature schema, in order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "cn_te", "cn_out", "cn_in", "cn_dc", "cn_cc", "cn_ratio", "cl_te", "cl_out", "cl_in", "cl_dc",
    "cl_cc", "cl_ratio", "sn_te", "sn_out", "sn_in", "sn_dc", "sn_cc", "sn_ratio",
];

/// Feature indices derived from the text-message network.
pub const SN_FEATURES: std::ops::Range<usize> = 12..18;

/// Event types: number of calls, total call length in minutes, number of
/// text messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventType {
    CN,
    CL,
    SN,
}

impl EventType {
    pub const ALL: [EventType; 3] = [EventType::CN, EventType::CL, EventType::SN];

    pub fn as_str(&self) -> &'static str {
        match self {
            EventType::CN => "CN",
            EventType::CL => "CL",
            EventType::SN => "SN",
        }
    }
}

impl std::fmt::Display for EventType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "CN" => Ok(EventType::CN),
            "CL" => Ok(EventType::CL),
            "SN" => Ok(EventType::SN),
            other => Err(format!("unknown event type {other:?}")),
        }
    }
}

/// One aggregated record: total events from one tower to another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionRecord {
    pub from_tower: String,
    pub to_tower: String,
    pub event_type: EventType,
    pub count: u64,
}

/// Directed weighted tower-to-tower totals for one event type.
///
/// Entry (i, j) is the number of events from tower i to tower j over the
/// whole observation period; the diagonal holds within-cell events.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    event_type: EventType,
    registry: Vec<String>,
    weights: Vec<f64>,
}

impl InteractionMatrix {
    /// Aggregates matching records onto the tower registry. Records of other
    /// event types are ignored; unknown tower ids are rejected with the
    /// offending record index.
    pub fn build(
        event_type: EventType,
        registry: Vec<String>,
        records: &[InteractionRecord],
    ) -> Result<Self> {
        let n = registry.len();
        let index: HashMap<&str, usize> = registry
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut weights = vec![0.0; n * n];
        for (k, r) in records.iter().enumerate() {
            let i = *index.get(r.from_tower.as_str()).ok_or(Error::UnknownTower {
                index: k,
                id: r.from_tower.clone(),
            })?;
            let j = *index.get(r.to_tower.as_str()).ok_or(Error::UnknownTower {
                index: k,
                id: r.to_tower.clone(),
            })?;
            if r.event_type == event_type {
                weights[i * n + j] += r.count as f64;
            }
        }
        Ok(InteractionMatrix {
            event_type,
            registry,
            weights,
        })
    }

    /// Wraps an explicit weight matrix (row-major, n×n).
    pub fn from_weights(
        event_type: EventType,
        registry: Vec<String>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = registry.len();
        if weights.len() != n * n {
            return Err(Error::InvalidConfig(format!(
                "weight matrix has {} entries, registry needs {}",
                weights.len(),
                n * n
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(InteractionMatrix {
            event_type,
            registry,
            weights,
        })
    }

    pub fn event_type(&self) -> EventType {
        self.event_type
    }

    pub fn n(&self) -> usize {
        self.registry.len()
    }

    pub fn registry(&self) -> &[String] {
        &self.registry
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n() + j]
    }

    /// Within-cell events of tower i (the diagonal entry).
    pub fn te(&self, i: usize) -> f64 {
        self.weight(i, i)
    }

    /// Total outgoing events of tower i, diagonal excluded.
    pub fn out(&self, i: usize) -> f64 {
        (0..self.n()).filter(|j| *j != i).map(|j| self.weight(i, j)).sum()
    }

    /// Total incoming events of tower i, diagonal excluded.
    pub fn incoming(&self, i: usize) -> f64 {
        (0..self.n()).filter(|j| *j != i).map(|j| self.weight(j, i)).sum()
    }
}

fn require_pair(m: &InteractionMatrix) -> Result<()> {
    if m.n() < 2 {
        return Err(Error::TooFewTowers(m.n()));
    }
    Ok(())
}

/// Fraction of other towers tower i exchanges any events with (either
/// direction, diagonal ignored).
pub fn degree_centrality(m: &InteractionMatrix, i: usize) -> Result<f64> {
    require_pair(m)?;
    let n = m.n();
    let linked = (0..n)
        .filter(|j| *j != i && (m.weight(i, *j) > 0.0 || m.weight(*j, i) > 0.0))
        .count();
    Ok(linked as f64 / (n - 1) as f64)
}

/// Wasserman–Faust closeness on unweighted hop distances over outgoing
/// support edges: ((r-1)/(n-1)) · ((r-1)/Σd), where r towers (including i)
/// are reachable from i and Σd sums their hop distances. 0 when nothing is
/// reachable.
pub fn closeness_centrality(m: &InteractionMatrix, i: usize) -> Result<f64> {
    require_pair(m)?;
    let n = m.n();
    let mut dist = vec![usize::MAX; n];
    dist[i] = 0;
    let mut queue = std::collections::VecDeque::from([i]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if v != u && m.weight(u, v) > 0.0 && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let reached: Vec<usize> = dist.iter().copied().filter(|d| *d != usize::MAX).collect();
    let r = reached.len();
    if r <= 1 {
        return Ok(0.0);
    }
    let sum: usize = reached.iter().sum();
    let r_minus_1 = (r - 1) as f64;
    Ok((r_minus_1 / (n - 1) as f64) * (r_minus_1 / sum as f64))
}

/// The six per-tower features of one event network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerFeatures {
    pub te: f64,
    pub out: f64,
    pub incoming: f64,
    pub dc: f64,
    pub cc: f64,
    pub ratio: f64,
}

/// Computes the sextet (te, out, in, dc, cc, ratio) for tower i. The ratio is
/// smoothed as (out+1)/(in+1) so towers without incoming events stay defined.
pub fn tower_features(m: &InteractionMatrix, i: usize) -> Result<TowerFeatures> {
    let out = m.out(i);
    let incoming = m.incoming(i);
    Ok(TowerFeatures {
        te: m.te(i),
        out,
        incoming,
        dc: degree_centrality(m, i)?,
        cc: closeness_centrality(m, i)?,
        ratio: (out + 1.0) / (incoming + 1.0),
    })
}

/// Builds the 18-feature row per tower from the three event networks, in
/// registry order. The networks must share one registry.
pub fn extract_features(
    cn: &InteractionMatrix,
    cl: &InteractionMatrix,
    sn: &InteractionMatrix,
) -> Result<Vec<[f64; N_FEATURES]>> {
    if cn.registry != cl.registry || cn.registry != sn.registry {
        return Err(Error::RegistryMismatch);
    }
    let mut rows = Vec::with_capacity(cn.n());
    for i in 0..cn.n() {
        let mut row = [0.0; N_FEATURES];
        for (slot, m) in [cn, cl, sn].into_iter().enumerate() {
            let f = tower_features(m, i)?;
            let base = slot * 6;
            row[base] = f.te;
            row[base + 1] = f.out;
            row[base + 2] = f.incoming;
            row[base + 3] = f.dc;
            row[base + 4] = f.cc;
            row[base + 5] = f.ratio;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads interaction records (`from_tower,to_tower,event_type,count`).
pub fn read_records_csv(path: &Path) -> Result<Vec<InteractionRecord>> {
    require_exists(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut records = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| parse_err(path, 0, e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |idx: usize, name: &str| {
            record
                .get(idx)
                .ok_or_else(|| parse_err(path, line, format!("missing column {name}")))
        };
        let event_type: EventType = get(2, "event_type")?
            .parse()
            .map_err(|m: String| parse_err(path, line, m))?;
        let count: u64 = get(3, "count")?
            .parse()
            .map_err(|_| parse_err(path, line, "column count: not an integer"))?;
        records.push(InteractionRecord {
            from_tower: get(0, "from_tower")?.to_string(),
            to_tower: get(1, "to_tower")?.to_string(),
            event_type,
            count,
        });
    }
    Ok(records)
}

pub fn write_records_csv(path: &Path, records: &[InteractionRecord]) -> Result<()> {
    let mut out = String::from("from_tower,to_tower,event_type,count\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.from_tower, r.to_tower, r.event_type, r.count
        ));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}
