//! Per-iteration metric records shared by every solver.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

/// Column order of the CSV trace format.
pub const CSV_HEADER: &str = "iter,elapsed_s,objective,rel_objective,p_metric,xy_gap,rho,beta,inner_iters";

/// One row of a convergence trace. Fields that do not apply to a solver are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub t: usize,
    /// Cumulative solver wall-clock seconds, excluding metric evaluation.
    pub elapsed_s: f64,
    pub objective: f64,
    pub rel_objective: f64,
    pub p_metric: Option<f64>,
    pub xy_gap: Option<f64>,
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub inner_iters: Option<usize>,
    /// `||X - proj_+(X - grad f(X))||_inf`, when the solver computes it.
    #[serde(default)]
    pub opt_gap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterTrace {
    records: Vec<IterRecord>,
}

impl IterTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; iteration indices must be strictly increasing.
    pub fn push(&mut self, rec: IterRecord) {
        if let Some(last) = self.records.last() {
            assert!(rec.t > last.t, "trace index {} after {}", rec.t, last.t);
        }
        self.records.push(rec);
    }

    pub fn records(&self) -> &[IterRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&IterRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    /// Running minimum of the P metric, `e(t) = min_{s <= t} P(s)`, one entry per record.
    pub fn p_envelope(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                if let Some(p) = r.p_metric {
                    best = best.min(p);
                }
                best
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.records.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                r.elapsed_s,
                r.objective,
                r.rel_objective,
                opt(r.p_metric),
                opt(r.xy_gap),
                opt(r.rho),
                opt(r.beta),
                r.inner_iters.map(|v| v.to_string()).unwrap_or_default(),
            );
        }
        s
    }

    pub fn write_csv(&self, mut w: impl io::Write) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
