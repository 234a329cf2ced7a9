//! Multi-restart experiment driver.
//!
//! Restart `r` draws one initial factor from seed `base + r` and hands the same
//! factor to every selected solver. Restarts run concurrently; each writes its
//! own trace files and the summary is written once all of them have finished.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use symnmf_core::baselines::{anls_run_from, pgd_run_from};
use symnmf_core::solver::{self, initial_factor};
use symnmf_core::{
    gen_dataset, global_certificate, local_certificate, local_certificate_k1, BaselineConfig, Certificate,
    DenseMat, IterTrace, SolverConfig, StopReason, SymProblem,
};

use crate::config::{ExperimentConfig, InputSpec, SolverKind};
use crate::error::{CliError, Result};
use crate::io::load_matrix;

pub const SUMMARY_TXT: &str = "summary.txt";
pub const SUMMARY_JSON: &str = "summary.json";
pub const CERTIFICATES_JSON: &str = "certificates.json";

/// File name of the trace of one (solver, restart) pair.
pub fn trace_file_name(solver: SolverKind, restart: usize) -> String {
    format!("{}_r{restart:03}.csv", solver.name())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub solver: SolverKind,
    pub restart: usize,
    pub seed: u64,
    /// Iterations completed; `None` for a failed run.
    pub iterations: Option<usize>,
    pub final_objective: Option<f64>,
    pub final_rel_objective: Option<f64>,
    /// Solver time of the last trace row.
    pub elapsed_s: Option<f64>,
    pub stop_reason: Option<StopReason>,
    pub trace_file: Option<String>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Statistics of the final relative objective over the successful runs of one
/// solver; `std` is the sample standard deviation (0 for a single run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solver: SolverKind,
    pub runs: usize,
    pub failed: usize,
    pub mean_rel_objective: Option<f64>,
    pub std_rel_objective: Option<f64>,
    pub best_rel_objective: Option<f64>,
    pub mean_elapsed_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub restart: usize,
    pub seed: u64,
    pub global: std::result::Result<Certificate, String>,
    pub local: std::result::Result<Certificate, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub n: usize,
    pub k: usize,
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<SolverSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub certificates: Vec<CertificateRecord>,
}

impl ExperimentReport {
    /// 0 when at least one run succeeded, 2 when every run failed.
    pub fn exit_code(&self) -> i32 {
        if self.runs.iter().any(RunRecord::succeeded) {
            0
        } else {
            2
        }
    }
}

/// Sample mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

pub fn load_problem(input: &InputSpec) -> Result<SymProblem> {
    match input {
        InputSpec::Generate(spec) => Ok(gen_dataset(spec)?),
        InputSpec::File { path, k } => Ok(SymProblem::new(load_matrix(path)?, *k)?),
    }
}

struct Solved {
    trace: IterTrace,
    stop_reason: Option<StopReason>,
    /// Point handed to the certificates (NS only).
    certify_point: Option<DenseMat>,
}

fn solve(kind: SolverKind, prob: &SymProblem, cfg: &ExperimentConfig, seed: u64, x0: DenseMat) -> Result<Solved> {
    match kind {
        SolverKind::Ns => {
            let ns = SolverConfig { seed, ..cfg.ns.clone() };
            let state = solver::init_from(prob, &ns, x0)?;
            let out = solver::run_from(prob, &ns, state)?;
            Ok(Solved {
                stop_reason: Some(out.stop_reason),
                certify_point: Some(out.certify_point()),
                trace: out.trace,
            })
        }
        SolverKind::Pgd | SolverKind::Anls => {
            let base = if kind == SolverKind::Pgd { &cfg.pgd } else { &cfg.anls };
            let bc = BaselineConfig { seed, ..base.clone() };
            let out = if kind == SolverKind::Pgd {
                pgd_run_from(prob, &bc, x0)?
            } else {
                anls_run_from(prob, &bc, x0)?
            };
            Ok(Solved {
                trace: out.trace,
                stop_reason: None,
                certify_point: None,
            })
        }
    }
}

fn certify(x: &DenseMat, prob: &SymProblem, cfg: &ExperimentConfig, restart: usize, seed: u64) -> CertificateRecord {
    let global = global_certificate(x, prob, &cfg.certify).map_err(|e| e.to_string());
    let local = if prob.k() == 1 {
        local_certificate_k1(&x.column(0), prob, &cfg.certify)
    } else {
        local_certificate(x, prob, &cfg.certify)
    }
    .map_err(|e| e.to_string());
    CertificateRecord {
        restart,
        seed,
        global,
        local,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Runs one restart of every selected solver and writes their traces.
fn run_restart(
    prob: &SymProblem,
    cfg: &ExperimentConfig,
    restart: usize,
) -> Result<(Vec<RunRecord>, Option<CertificateRecord>)> {
    let seed = cfg.seed.wrapping_add(restart as u64);
    let x0 = initial_factor(prob, seed);
    let mut records = Vec::with_capacity(cfg.solvers.len());
    let mut cert = None;
    for &kind in &cfg.solvers {
        let mut rec = RunRecord {
            solver: kind,
            restart,
            seed,
            iterations: None,
            final_objective: None,
            final_rel_objective: None,
            elapsed_s: None,
            stop_reason: None,
            trace_file: None,
            error: None,
        };
        match x0.clone().map_err(CliError::from).and_then(|x0| solve(kind, prob, cfg, seed, x0)) {
            Ok(solved) => {
                if let Some(last) = solved.trace.last() {
                    rec.iterations = Some(last.t);
                    rec.final_objective = Some(last.objective);
                    rec.final_rel_objective = Some(last.rel_objective);
                    rec.elapsed_s = Some(last.elapsed_s);
                }
                rec.stop_reason = solved.stop_reason;
                if cfg.emit.traces {
                    let name = trace_file_name(kind, restart);
                    write_file(&cfg.output_dir.join(&name), &solved.trace.to_csv())?;
                    rec.trace_file = Some(name);
                }
                if cfg.emit.certificates {
                    if let Some(x) = &solved.certify_point {
                        cert = Some(certify(x, prob, cfg, restart, seed));
                    }
                }
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        records.push(rec);
    }
    Ok((records, cert))
}

pub fn summarize(solvers: &[SolverKind], runs: &[RunRecord]) -> Vec<SolverSummary> {
    solvers
        .iter()
        .map(|&solver| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.solver == solver).collect();
            let rel: Vec<f64> = mine.iter().filter_map(|r| r.final_rel_objective).collect();
            let times: Vec<f64> = mine.iter().filter_map(|r| r.elapsed_s).collect();
            let stats = mean_std(&rel);
            SolverSummary {
                solver,
                runs: mine.len(),
                failed: mine.iter().filter(|r| !r.succeeded()).count(),
                mean_rel_objective: stats.map(|s| s.0),
                std_rel_objective: stats.map(|s| s.1),
                best_rel_objective: rel.iter().copied().reduce(f64::min),
                mean_elapsed_s: mean_std(&times).map(|s| s.0),
            }
        })
        .collect()
}

fn opt_e(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into())
}

/// Human-readable summary table.
pub fn format_summary(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "N = {}, K = {}", report.n, report.k);
    let _ = writeln!(
        s,
        "{:<6} {:>5} {:>7} {:>30} {:>14} {:>12}",
        "solver", "runs", "failed", "final rel_objective mean ± std", "best", "mean time s"
    );
    for sm in &report.summaries {
        let ms = match (sm.mean_rel_objective, sm.std_rel_objective) {
            (Some(m), Some(sd)) => format!("{m:.6e} ± {sd:.3e}"),
            _ => "-".into(),
        };
        let _ = writeln!(
            s,
            "{:<6} {:>5} {:>7} {:>30} {:>14} {:>12}",
            sm.solver.name(),
            sm.runs,
            sm.failed,
            ms,
            opt_e(sm.best_rel_objective),
            sm.mean_elapsed_s.map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into()),
        );
    }
    for r in report.runs.iter().filter(|r| !r.succeeded()) {
        let _ = writeln!(
            s,
            "failed: {} restart {}: {}",
            r.solver.name(),
            r.restart,
            r.error.as_deref().unwrap_or_default()
        );
    }
    if !report.certificates.is_empty() {
        let certified = report
            .certificates
            .iter()
            .filter(|c| c.local.as_ref().is_ok_and(|c| c.is_certified()) || c.global.as_ref().is_ok_and(|c| c.is_certified()))
            .count();
        let _ = writeln!(s, "certified: {certified}/{} ns outputs", report.certificates.len());
    }
    s
}

/// Runs the experiment and writes its outputs under `cfg.output_dir`.
///
/// Configuration and input problems are returned as errors; individual solver
/// failures are recorded in the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    let prob = load_problem(&cfg.input)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;

    let per_restart = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(&prob, &cfg, r))
        .collect::<Result<Vec<_>>>()?;

    let mut runs = Vec::new();
    let mut certificates = Vec::new();
    for (recs, cert) in per_restart {
        runs.extend(recs);
        certificates.extend(cert);
    }
    let report = ExperimentReport {
        n: prob.n(),
        k: prob.k(),
        summaries: summarize(&cfg.solvers, &runs),
        runs,
        certificates,
    };

    if cfg.emit.summary {
        write_file(&cfg.output_dir.join(SUMMARY_TXT), &format_summary(&report))?;
        let json = serde_json::json!({
            "n": report.n,
            "k": report.k,
            "summaries": report.summaries,
            "runs": report.runs,
        });
        write_file(&cfg.output_dir.join(SUMMARY_JSON), &serde_json::to_string_pretty(&json)?)?;
    }
    if cfg.emit.certificates {
        write_file(
            &cfg.output_dir.join(CERTIFICATES_JSON),
            &serde_json::to_string_pretty(&report.certificates)?,
        )?;
    }
    Ok(report)
}
