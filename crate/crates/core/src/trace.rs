//! Run records and their on-disk formats (CSV traces, profile snapshots, events.json).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const TRACE_HEADER: [&str; 8] = [
    "time", "a", "b", "theta_a", "theta_b", "energy", "volume", "lambda",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub a: f64,
    pub b: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub energy: f64,
    pub volume: f64,
    pub lambda: f64,
}

impl TraceRecord {
    fn fields(&self) -> [String; 8] {
        [
            self.time,
            self.a,
            self.b,
            self.theta_a,
            self.theta_b,
            self.energy,
            self.volume,
            self.lambda,
        ]
        .map(|v| v.to_string())
    }
}

/// Profile samples at one output time. Multi-droplet snapshots hold the
/// droplets back to back in x order.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Split,
    Merge,
    Collapse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
    /// Emerged contact points of a split.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d: Option<f64>,
    /// Droplet indices involved (parent for split/collapse, pair for merge).
    pub indices: Vec<usize>,
    pub volumes_before: Vec<f64>,
    pub volumes_after: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SimulationTrace {
    /// One record per accepted step for the whole system.
    pub records: Vec<TraceRecord>,
    /// Per-droplet records `(droplet index, record)` for multi-droplet runs.
    pub droplet_records: Vec<(usize, TraceRecord)>,
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<Event>,
}

impl SimulationTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(TRACE_HEADER)?;
        for r in &self.records {
            w.write_record(r.fields())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_droplet_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["droplet"];
        header.extend(TRACE_HEADER);
        w.write_record(&header)?;
        for (k, r) in &self.droplet_records {
            let mut row = vec![k.to_string()];
            row.extend(r.fields());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `snapshots/NNNN.csv` with columns `x,u,w,h`.
    pub fn write_snapshots(&self, dir: &Path) -> Result<()> {
        let dir = dir.join("snapshots");
        fs::create_dir_all(&dir)?;
        for (k, s) in self.snapshots.iter().enumerate() {
            let mut w = csv::Writer::from_path(dir.join(format!("{k:04}.csv")))?;
            w.write_record(["x", "u", "w", "h"])?;
            for j in 0..s.x.len() {
                w.write_record([s.x[j], s.u[j], s.w[j], s.u[j] + s.w[j]].map(|v| v.to_string()))?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn write_events_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.events)?)?;
        Ok(())
    }

    /// trace.csv, droplets.csv (when present), snapshots/ and events.json.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_trace_csv(&dir.join("trace.csv"))?;
        if !self.droplet_records.is_empty() {
            self.write_droplet_csv(&dir.join("droplets.csv"))?;
        }
        self.write_snapshots(dir)?;
        self.write_events_json(&dir.join("events.json"))
    }
}
