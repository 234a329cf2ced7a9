//! Reference solvers: projected gradient descent (PGD) and alternating
//! nonnegative least squares on the penalized splitting
//! `g(X, Y) = ||X Y^T - Z||_F^2 + ν ||X - Y||_F^2` (ANLS).
//!
//! Both start from [`initial_factor`] and emit the same [`IterTrace`] schema
//! as the splitting solver.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SymNmfError};
use crate::matrix::{spd_solve_right, DenseMat};
use crate::problem::{grad_f, objective, rel_objective, stationarity_gap_inf, SymProblem};
use crate::solver::{initial_factor, lipschitz};
use crate::trace::{IterRecord, IterTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineAlgorithm {
    Pgd,
    Anls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub algorithm: BaselineAlgorithm,
    pub pgd_step: f64,
    /// ANLS penalty; `None` means the largest entry of `Z`.
    pub anls_nu: Option<f64>,
    pub max_iters: usize,
    /// Inner NNLS stops once a step moves every row by less than `inner_tol` relative to its norm.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            algorithm: BaselineAlgorithm::Pgd,
            pgd_step: 1e-5,
            anls_nu: None,
            max_iters: 2000,
            inner_tol: 1e-8,
            inner_max_iters: 100,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn pgd() -> Self {
        Self::default()
    }

    pub fn anls() -> Self {
        Self {
            algorithm: BaselineAlgorithm::Anls,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pgd_step >= 0.0) || !self.pgd_step.is_finite() {
            return Err(SymNmfError::Config(format!("pgd_step must be >= 0 (got {})", self.pgd_step)));
        }
        if let Some(nu) = self.anls_nu {
            if !(nu >= 0.0) || !nu.is_finite() {
                return Err(SymNmfError::Config(format!("anls_nu must be >= 0 (got {nu})")));
            }
        }
        if self.inner_max_iters == 0 {
            return Err(SymNmfError::Config("inner_max_iters must be >= 1".into()));
        }
        Ok(())
    }

    pub fn nu(&self, prob: &SymProblem) -> f64 {
        self.anls_nu.unwrap_or_else(|| prob.z().max_entry().max(0.0))
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub x: DenseMat,
    pub trace: IterTrace,
    /// Raw `||X - Y||_F` before symmetrization (ANLS only).
    pub xy_gap: Option<f64>,
}

/// `X <- max(X - α grad f(X), 0)`, the divergence limit is `1e12` times the
/// initial objective.
pub fn pgd_run(prob: &SymProblem, cfg: &BaselineConfig) -> Result<BaselineOutput> {
    let x0 = initial_factor(prob, cfg.seed)?;
    pgd_run_from(prob, cfg, x0)
}

pub fn pgd_run_from(prob: &SymProblem, cfg: &BaselineConfig, x0: DenseMat) -> Result<BaselineOutput> {
    cfg.validate()?;
    prob.check_factor("pgd_run", &x0)?;
    let alpha = cfg.pgd_step;
    let mut x = x0;
    let mut trace = IterTrace::new();
    let f0 = objective(&x, prob)?;
    trace.push(pgd_record(&x, prob, 0, 0.0)?);
    let limit = 1e12 * f0.max(f64::MIN_POSITIVE);
    let mut elapsed = 0.0;
    for t in 1..=cfg.max_iters {
        let start = Instant::now();
        let g = grad_f(&x, prob)?;
        x = x.zip_with(&g, |xi, gi| (xi - alpha * gi).max(0.0));
        elapsed += start.elapsed().as_secs_f64();
        let rec = pgd_record(&x, prob, t, elapsed)?;
        if !(rec.objective <= limit) {
            return Err(SymNmfError::Divergence {
                iter: t,
                step: alpha,
                objective: rec.objective,
            });
        }
        trace.push(rec);
    }
    Ok(BaselineOutput { x, trace, xy_gap: None })
}

fn pgd_record(x: &DenseMat, prob: &SymProblem, t: usize, elapsed_s: f64) -> Result<IterRecord> {
    Ok(IterRecord {
        t,
        elapsed_s,
        objective: objective(x, prob)?,
        rel_objective: rel_objective(x, prob)?,
        p_metric: None,
        xy_gap: None,
        rho: None,
        beta: None,
        inner_iters: None,
        opt_gap: Some(stationarity_gap_inf(x, prob)?),
    })
}

/// `g(X, Y) = ||X Y^T - Z||_F^2 + ν ||X - Y||_F^2`.
pub fn anls_objective(x: &DenseMat, y: &DenseMat, prob: &SymProblem, nu: f64) -> Result<f64> {
    let d = x.sub(y);
    Ok(prob.z().residual_fro_sq(x, y)? + nu * d.dot(&d))
}

/// Unconstrained minimizer of `g` over `X`: `X = (Z Y + ν Y)(Y^T Y + ν I)^{-1}`.
pub fn anls_x_step(y: &DenseMat, prob: &SymProblem, nu: f64) -> Result<DenseMat> {
    let mut a = y.gram();
    for i in 0..a.rows() {
        a.set(i, i, a.get(i, i) + nu);
    }
    let mut rhs = prob.z().mul(y)?;
    rhs.axpy(nu, y);
    spd_solve_right(&a, &rhs)
}

/// Minimizes `g` over `Y >= 0` by row-wise projected gradient warm-started
/// at `y`. Returns the largest per-row step count.
pub fn anls_y_step(
    x: &DenseMat,
    y: &mut DenseMat,
    prob: &SymProblem,
    nu: f64,
    tol: f64,
    max_iters: usize,
) -> Result<usize> {
    let k = x.cols();
    let mut a = x.gram();
    let alpha = 1.0 / (lipschitz(&a)? + nu).max(f64::MIN_POSITIVE);
    for i in 0..k {
        a.set(i, i, a.get(i, i) + nu);
    }
    let ztx = prob.z().mul_t(x)?;
    let counts: Vec<usize> = y
        .as_mut_slice()
        .par_chunks_mut(k)
        .enumerate()
        .map(|(i, yi)| {
            let b: Vec<f64> = (0..k).map(|j| ztx.get(i, j) + nu * x.get(i, j)).collect();
            let mut w = vec![0.0; k];
            for it in 1..=max_iters {
                for (j, wj) in w.iter_mut().enumerate() {
                    let ay: f64 = a.row(j).iter().zip(yi.iter()).map(|(p, q)| p * q).sum();
                    *wj = (yi[j] - alpha * (ay - b[j])).max(0.0);
                }
                let mut disp = 0.0;
                let mut norm = 0.0;
                for (p, q) in w.iter().zip(yi.iter()) {
                    disp += (p - q) * (p - q);
                    norm += p * p;
                }
                yi.copy_from_slice(&w);
                if disp.sqrt() <= tol * norm.sqrt().max(1e-300) {
                    return it;
                }
            }
            max_iters
        })
        .collect();
    if !y.is_finite() {
        return Err(SymNmfError::Numerical {
            context: "ANLS Y step".into(),
        });
    }
    Ok(counts.into_iter().max().unwrap_or(0))
}

/// Symmetrized output `max((X + Y)/2, 0)`.
pub fn anls_output(x: &DenseMat, y: &DenseMat) -> DenseMat {
    x.zip_with(y, |a, b| (0.5 * (a + b)).max(0.0))
}

pub fn anls_run(prob: &SymProblem, cfg: &BaselineConfig) -> Result<BaselineOutput> {
    let x0 = initial_factor(prob, cfg.seed)?;
    anls_run_from(prob, cfg, x0)
}

/// Alternates the exact `X` step and the NNLS `Y` step from `X = Y = x0`.
pub fn anls_run_from(prob: &SymProblem, cfg: &BaselineConfig, x0: DenseMat) -> Result<BaselineOutput> {
    cfg.validate()?;
    prob.check_factor("anls_run", &x0)?;
    let nu = cfg.nu(prob);
    let mut x = x0.clone();
    let mut y = x0;
    let mut trace = IterTrace::new();
    trace.push(anls_record(&x, &y, prob, 0, 0.0, None)?);
    let mut elapsed = 0.0;
    for t in 1..=cfg.max_iters {
        let start = Instant::now();
        x = anls_x_step(&y, prob, nu)?;
        let inner = anls_y_step(&x, &mut y, prob, nu, cfg.inner_tol, cfg.inner_max_iters)?;
        elapsed += start.elapsed().as_secs_f64();
        trace.push(anls_record(&x, &y, prob, t, elapsed, Some(inner))?);
    }
    let xy_gap = x.sub(&y).fro_norm();
    Ok(BaselineOutput {
        x: anls_output(&x, &y),
        trace,
        xy_gap: Some(xy_gap),
    })
}

fn anls_record(
    x: &DenseMat,
    y: &DenseMat,
    prob: &SymProblem,
    t: usize,
    elapsed_s: f64,
    inner: Option<usize>,
) -> Result<IterRecord> {
    let out = anls_output(x, y);
    Ok(IterRecord {
        t,
        elapsed_s,
        objective: objective(&out, prob)?,
        rel_objective: rel_objective(&out, prob)?,
        p_metric: None,
        xy_gap: Some(x.sub(y).fro_norm()),
        rho: None,
        beta: None,
        inner_iters: inner,
        opt_gap: Some(stationarity_gap_inf(&out, prob)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::matmul;
    use crate::problem::{gen_dataset, GenSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pgd_zero_step_is_identity() {
        let prob = gen_dataset(&GenSpec::low_rank(10, 2, 1)).unwrap();
        let cfg = BaselineConfig { pgd_step: 0.0, max_iters: 5, ..BaselineConfig::pgd() };
        let out = pgd_run(&prob, &cfg).unwrap();
        assert_eq!(out.x, initial_factor(&prob, 0).unwrap());
        assert_eq!(out.trace.len(), 6);
    }

    #[test]
    fn pgd_fixed_point_at_exact_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DenseMat::from_fn(6, 2, |_, _| rng.random_range(0.5..1.0));
        let prob = SymProblem::new(matmul(&x, &x.transpose()).unwrap(), 2).unwrap();
        let cfg = BaselineConfig { max_iters: 3, ..BaselineConfig::pgd() };
        let out = pgd_run_from(&prob, &cfg, x.clone()).unwrap();
        assert!(out.x.sub(&x).max_abs() < 1e-14);
        assert!(out.trace.last().unwrap().opt_gap.unwrap() < 1e-12);
    }

    #[test]
    fn pgd_iterates_nonnegative() {
        let prob = gen_dataset(&GenSpec::full_rank(20, 3, 3)).unwrap();
        let cfg = BaselineConfig { pgd_step: 1e-3, max_iters: 50, ..BaselineConfig::pgd() };
        let out = pgd_run(&prob, &cfg).unwrap();
        assert!(out.x.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn pgd_large_step_diverges() {
        // start next to an exact factor so the divergence limit is small
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DenseMat::from_fn(10, 2, |_, _| rng.random_range(0.5..1.0));
        let prob = SymProblem::new(matmul(&x, &x.transpose()).unwrap(), 2).unwrap();
        let x0 = x.map(|v| v + 1e-9);
        let cfg = BaselineConfig { pgd_step: 1.0, max_iters: 5, ..BaselineConfig::pgd() };
        match pgd_run_from(&prob, &cfg, x0) {
            Err(SymNmfError::Divergence { step, iter, .. }) => {
                assert_eq!(step, 1.0);
                assert!(iter <= 5);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn anls_huge_nu_x_step_copies_y() {
        let prob = gen_dataset(&GenSpec::low_rank(8, 2, 5)).unwrap();
        let y = initial_factor(&prob, 5).unwrap();
        let x = anls_x_step(&y, &prob, 1e12).unwrap();
        assert!(x.sub(&y).max_abs() <= 1e-6 * y.max_abs());
    }

    #[test]
    fn anls_exact_rank_one_fixed_point() {
        let x = DenseMat::from_rows(&[vec![1.0], vec![2.0], vec![0.5]]).unwrap();
        let prob = SymProblem::new(matmul(&x, &x.transpose()).unwrap(), 1).unwrap();
        let cfg = BaselineConfig { max_iters: 3, ..BaselineConfig::anls() };
        let out = anls_run_from(&prob, &cfg, x.clone()).unwrap();
        assert!(out.x.sub(&x).max_abs() < 1e-10);
        assert!(out.trace.last().unwrap().objective < 1e-18);
    }

    #[test]
    fn anls_block_descent() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = DenseMat::from_fn(5, 5, |_, _| rng.random_range(0.0..1.0));
            let prob = SymProblem::new(z, 2).unwrap();
            let nu = 0.7;
            let mut y = initial_factor(&prob, seed).unwrap();
            let mut x = y.clone();
            let mut g = anls_objective(&x, &y, &prob, nu).unwrap();
            for _ in 0..10 {
                x = anls_x_step(&y, &prob, nu).unwrap();
                let g1 = anls_objective(&x, &y, &prob, nu).unwrap();
                assert!(g1 <= g + 1e-9, "X step {g} -> {g1}");
                anls_y_step(&x, &mut y, &prob, nu, 1e-10, 200).unwrap();
                let g2 = anls_objective(&x, &y, &prob, nu).unwrap();
                assert!(g2 <= g1 + 1e-9, "Y step {g1} -> {g2}");
                assert!(y.as_slice().iter().all(|&v| v >= 0.0));
                g = g2;
            }
        }
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(BaselineConfig { pgd_step: -1.0, ..Default::default() }.validate().is_err());
        assert!(BaselineConfig { anls_nu: Some(-0.1), ..Default::default() }.validate().is_err());
    }
}
