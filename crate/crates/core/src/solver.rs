//! Nonconvex splitting solver.
//!
//! The factor is split into `X` (free) and `Y` (nonnegative, squared row norms
//! at most `tau`) coupled by `X = Y` through the augmented Lagrangian
//!
//! ```text
//! L(X, Y; Λ) = 1/2 ||X Y^T - Z||_F^2 + <Y - X, Λ> + ρ/2 ||Y - X||_F^2
//! ```
//!
//! Each iteration runs, in order:
//!
//! 1. a proximal `Y` step, `argmin_Y L(X, Y; Λ) + β/2 ||Y - Y_prev||_F^2` over
//!    the feasible set, solved row by row with projected gradient;
//! 2. an exact `X` step, `X = (Z Y + Λ + ρ Y)(Y^T Y + ρ I)^{-1}`;
//! 3. dual ascent `Λ += ρ (Y - X)`;
//! 4. the `ρ`, `ξ`, `β` schedules.
//!
//! After step 2 the multiplier satisfies `Λ = (X Y^T - Z) Y` exactly, which is
//! checked by [`dual_identity_residual`].

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::progress_p;
use crate::error::{Result, SymNmfError};
use crate::matrix::{matmul, power_max_eig, spd_solve_right, DenseMat, LinOp};
use crate::problem::{objective, rel_objective, SymProblem};
use crate::trace::{IterRecord, IterTrace};

/// Initial penalty rule, based on `tau_bar = mean_k theta_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoInit {
    /// `ρ = tau_bar`, for data that admits an exact symmetric factorization.
    TauBar,
    /// `ρ = sqrt(N) tau_bar`.
    SqrtNTauBar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    /// Stop once the progress metric P drops to this value.
    pub stop_eps: f64,
    pub gp_max_iters: usize,
    /// Per-row early exit once a projected-gradient step moves less than `gp_tol * sqrt(tau)`.
    pub gp_tol: f64,
    pub rho_init_mode: RhoInit,
    /// `ρ` is capped at `rho_cap_factor * N * tau`; with `use_schedules = false`
    /// it is held at exactly that value.
    pub rho_cap_factor: f64,
    pub schedule_eps: f64,
    pub xi_init: f64,
    pub beta_update_period: usize,
    pub seed: u64,
    /// `false`: fixed `ρ` and `β` recomputed every iteration, the setting
    /// under which the Lagrangian is guaranteed to decrease.
    pub use_schedules: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 2000,
            stop_eps: 1e-8,
            gp_max_iters: 40,
            gp_tol: 1e-8,
            rho_init_mode: RhoInit::SqrtNTauBar,
            rho_cap_factor: 6.1,
            schedule_eps: 1e-3,
            xi_init: 0.01,
            beta_update_period: 100,
            seed: 0,
            use_schedules: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gp_max_iters == 0 {
            return Err(SymNmfError::Config("gp_max_iters must be >= 1".into()));
        }
        if !(self.stop_eps > 0.0) {
            return Err(SymNmfError::Config("stop_eps must be > 0".into()));
        }
        if !(self.rho_cap_factor > 6.0) {
            return Err(SymNmfError::Config(format!(
                "rho_cap_factor must exceed 6 (got {})",
                self.rho_cap_factor
            )));
        }
        if !(self.gp_tol >= 0.0) {
            return Err(SymNmfError::Config("gp_tol must be >= 0".into()));
        }
        if self.use_schedules
            && (!(self.schedule_eps > 0.0) || !(self.xi_init > 0.0) || self.beta_update_period == 0)
        {
            return Err(SymNmfError::Config(
                "schedule_eps and xi_init must be > 0, beta_update_period >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Iterates and schedule scalars. `t` counts completed iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: DenseMat,
    pub y: DenseMat,
    pub lambda: DenseMat,
    pub rho: f64,
    pub beta: f64,
    pub xi: f64,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Reported factor.
    pub x: DenseMat,
    pub y: DenseMat,
    pub lambda: DenseMat,
    pub rho: f64,
    pub trace: IterTrace,
    pub stop_reason: StopReason,
    pub final_p: f64,
    /// `||X - Y||_F` at exit.
    pub xy_gap: f64,
}

impl RunOutput {
    /// `max(X, 0)`: the reported factor clipped to the orthant, the point
    /// handed to the certificates. `X` is only nonnegative in the limit.
    pub fn certify_point(&self) -> DenseMat {
        self.x.map(|v| v.max(0.0))
    }
}

/// Euclidean projection onto `{y >= 0, ||y||^2 <= tau}`: clip negatives, then
/// rescale into the ball.
pub fn project_row(w: &[f64], tau: f64) -> Vec<f64> {
    let mut v = w.to_vec();
    project_row_in_place(&mut v, tau);
    v
}

pub fn project_row_in_place(w: &mut [f64], tau: f64) {
    for v in w.iter_mut() {
        *v = v.max(0.0);
    }
    let r = tau.sqrt();
    let mut norm = row_norm(w);
    if norm > r {
        let s = r / norm;
        for v in w.iter_mut() {
            *v *= s;
        }
        // rounding can leave the computed norm an ulp or two above r; shrink
        // until it is not, so projecting a projected row changes nothing
        norm = row_norm(w);
        while norm > r {
            for v in w.iter_mut() {
                *v *= 1.0 - f64::EPSILON;
            }
            norm = row_norm(w);
        }
    }
}

fn row_norm(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Applies [`project_row`] to every row.
pub fn project_rows(m: &mut DenseMat, tau: f64) {
    let k = m.cols();
    if k == 0 {
        return;
    }
    m.as_mut_slice()
        .chunks_mut(k)
        .for_each(|row| project_row_in_place(row, tau));
}

/// Shared starting factor: entries i.i.d. uniform on `[0, tau]`, rows then
/// projected onto the feasible set.
pub fn initial_factor(prob: &SymProblem, seed: u64) -> Result<DenseMat> {
    let tau = prob.tau();
    if !(tau > 0.0) {
        return Err(SymNmfError::Degenerate(format!(
            "row bound tau = {tau}; the data matrix is zero or not admissible"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = DenseMat::from_fn(prob.n(), prob.k(), |_, _| rng.random::<f64>() * tau);
    project_rows(&mut y, tau);
    Ok(y)
}

pub fn tau_bar(prob: &SymProblem) -> f64 {
    let th = prob.thetas();
    th.iter().sum::<f64>() / th.len() as f64
}

/// Starting state from the seeded uniform initialization.
pub fn init(prob: &SymProblem, cfg: &SolverConfig) -> Result<SolverState> {
    let y0 = initial_factor(prob, cfg.seed)?;
    init_from(prob, cfg, y0)
}

/// Starting state from a given factor: `Y` is the projection of `y0`, `X = Y`, `Λ = 0`.
pub fn init_from(prob: &SymProblem, cfg: &SolverConfig, y0: DenseMat) -> Result<SolverState> {
    cfg.validate()?;
    prob.check_factor("init_from", &y0)?;
    let tau = prob.tau();
    if !(tau > 0.0) {
        return Err(SymNmfError::Degenerate(format!("row bound tau = {tau}")));
    }
    let mut y = y0;
    project_rows(&mut y, tau);
    let x = y.clone();
    let n = prob.n() as f64;
    let (rho, xi) = if cfg.use_schedules {
        let tb = tau_bar(prob);
        let rho = match cfg.rho_init_mode {
            RhoInit::TauBar => tb,
            RhoInit::SqrtNTauBar => n.sqrt() * tb,
        };
        let cap = cfg.rho_cap_factor * n * tau;
        (rho.min(cap), cfg.xi_init.min(1.0))
    } else {
        (cfg.rho_cap_factor * n * tau, 1.0)
    };
    let resid = prob.z().residual_fro_sq(&x, &y)?;
    let beta = 6.0 * xi * resid / rho;
    Ok(SolverState {
        lambda: DenseMat::zeros(prob.n(), prob.k()),
        x,
        y,
        rho,
        beta,
        xi,
        t: 0,
    })
}

/// Objective of the proximal `Y` subproblem for the current `X`, `Λ`, `ρ`, `β`
/// with proximal center `y_prev`.
pub fn y_subproblem_objective(
    state: &SolverState,
    prob: &SymProblem,
    y_prev: &DenseMat,
    y: &DenseMat,
) -> Result<f64> {
    let fit = 0.5 * prob.z().residual_fro_sq(&state.x, y)?;
    let rho = state.rho;
    let mut pen = 0.0;
    let mut prox = 0.0;
    for ((&yi, &xi), (&li, &pi)) in y
        .as_slice()
        .iter()
        .zip(state.x.as_slice())
        .zip(state.lambda.as_slice().iter().zip(y_prev.as_slice()))
    {
        let d = yi - xi + li / rho;
        pen += d * d;
        prox += (yi - pi) * (yi - pi);
    }
    Ok(fit + 0.5 * rho * pen + 0.5 * state.beta * prox)
}

/// Largest eigenvalue of a small symmetric PSD matrix, used for the
/// projected-gradient step. Falls back to the Frobenius norm (an upper bound)
/// if power iteration does not settle.
pub(crate) fn lipschitz(g: &DenseMat) -> Result<f64> {
    let op = LinOp::from_dense(g);
    let r = power_max_eig(&op, 1e-12, 2000, 0x5eed)?;
    let fro = g.fro_norm();
    Ok(if r.converged { r.value.max(0.0).min(fro) } else { fro })
}

/// Projected gradient on `1/2 y^T A y - b^T y` over the row feasible set,
/// starting from `y`. Returns the number of steps taken.
fn gp_row(a: &DenseMat, b: &[f64], y: &mut [f64], alpha: f64, tau: f64, max_iters: usize, tol: f64) -> usize {
    let k = y.len();
    let mut w = vec![0.0; k];
    for it in 1..=max_iters {
        for (i, wi) in w.iter_mut().enumerate() {
            let ay: f64 = a.row(i).iter().zip(y.iter()).map(|(p, q)| p * q).sum();
            *wi = y[i] - alpha * (ay - b[i]);
        }
        project_row_in_place(&mut w, tau);
        let disp = w
            .iter()
            .zip(y.iter())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        y.copy_from_slice(&w);
        if disp < tol {
            return it;
        }
    }
    max_iters
}

/// Proximal `Y` update. Rows are independent and solved in parallel with
/// projected gradient, step `1/λ_max(X^T X + (ρ + β) I)`, warm-started from the
/// current `Y`. Returns the largest per-row step count.
pub fn update_y(state: &mut SolverState, prob: &SymProblem, cfg: &SolverConfig) -> Result<usize> {
    let k = prob.k();
    let tau = prob.tau();
    let (rho, beta) = (state.rho, state.beta);
    let mut a = state.x.gram();
    let lmax = lipschitz(&a)? + rho + beta;
    for i in 0..k {
        a.set(i, i, a.get(i, i) + rho + beta);
    }
    let alpha = 1.0 / lmax;
    let ztx = prob.z().mul_t(&state.x)?;
    let tol = cfg.gp_tol * tau.sqrt();
    let x = &state.x;
    let lam = &state.lambda;
    let max_it = cfg.gp_max_iters;
    let counts: Vec<usize> = state
        .y
        .as_mut_slice()
        .par_chunks_mut(k)
        .enumerate()
        .map(|(i, yi)| {
            let b: Vec<f64> = (0..k)
                .map(|j| ztx.get(i, j) + rho * x.get(i, j) - lam.get(i, j) + beta * yi[j])
                .collect();
            gp_row(&a, &b, yi, alpha, tau, max_it, tol)
        })
        .collect();
    if !state.y.is_finite() {
        return Err(SymNmfError::Numerical {
            context: format!("Y update at iteration {}", state.t + 1),
        });
    }
    Ok(counts.into_iter().max().unwrap_or(0))
}

/// Exact `X` update: `X = (Z Y + Λ + ρ Y)(Y^T Y + ρ I)^{-1}`.
pub fn update_x(state: &mut SolverState, prob: &SymProblem) -> Result<()> {
    let rho = state.rho;
    let mut a = state.y.gram();
    for i in 0..a.rows() {
        a.set(i, i, a.get(i, i) + rho);
    }
    let mut rhs = prob.z().mul(&state.y)?;
    rhs.axpy(1.0, &state.lambda);
    rhs.axpy(rho, &state.y);
    state.x = spd_solve_right(&a, &rhs).map_err(|e| match e {
        SymNmfError::Numerical { .. } => SymNmfError::Numerical {
            context: format!("X update at iteration {}", state.t + 1),
        },
        other => other,
    })?;
    Ok(())
}

/// `Λ += ρ (Y - X)`.
pub fn update_dual(state: &mut SolverState) {
    let rho = state.rho;
    for ((l, &y), &x) in state
        .lambda
        .as_mut_slice()
        .iter_mut()
        .zip(state.y.as_slice())
        .zip(state.x.as_slice())
    {
        *l += rho * (y - x);
    }
}

/// One step of the `ρ`/`ξ` recurrences `s <- min(s / (1 - eps/s), cap)`.
pub fn schedule_next(value: f64, eps: f64, cap: f64) -> Result<f64> {
    if !(value > eps) {
        return Err(SymNmfError::Config(format!(
            "schedule value {value} must exceed schedule_eps {eps}"
        )));
    }
    Ok((value / (1.0 - eps / value)).min(cap))
}

/// Advances `ρ`, `ξ` and `β` after an iteration.
///
/// With schedules, `ρ` and `ξ` grow every iteration and `β = 6 ξ ||X Y^T - Z||^2 / ρ`
/// is refreshed every `beta_update_period` iterations. Without, `ρ` is fixed
/// and `β = 6 ||X Y^T - Z||^2 / ρ` every iteration.
pub fn update_schedules(state: &mut SolverState, prob: &SymProblem, cfg: &SolverConfig) -> Result<()> {
    let done = state.t + 1;
    if cfg.use_schedules {
        let cap = cfg.rho_cap_factor * prob.n() as f64 * prob.tau();
        state.rho = schedule_next(state.rho, cfg.schedule_eps, cap)?;
        state.xi = schedule_next(state.xi, cfg.schedule_eps, 1.0)?;
        if done.is_multiple_of(cfg.beta_update_period) {
            let r = prob.z().residual_fro_sq(&state.x, &state.y)?;
            state.beta = 6.0 * state.xi * r / state.rho;
        }
    } else {
        let r = prob.z().residual_fro_sq(&state.x, &state.y)?;
        state.beta = 6.0 * r / state.rho;
    }
    Ok(())
}

/// `L(X, Y; Λ)` at penalty `rho`.
pub fn augmented_lagrangian(
    x: &DenseMat,
    y: &DenseMat,
    lambda: &DenseMat,
    prob: &SymProblem,
    rho: f64,
) -> Result<f64> {
    let fit = 0.5 * prob.z().residual_fro_sq(x, y)?;
    let d = y.sub(x);
    Ok(fit + d.dot(lambda) + 0.5 * rho * d.dot(&d))
}

/// `||Λ - (X Y^T - Z) Y||_F`; zero after every completed iteration.
pub fn dual_identity_residual(state: &SolverState, prob: &SymProblem) -> Result<f64> {
    let mut g = matmul(&state.x, &state.y.gram())?;
    g.axpy(-1.0, &prob.z().mul(&state.y)?);
    Ok(state.lambda.sub(&g).fro_norm())
}

/// `||(X Y^T - Z) Y + ρ (X - Y - Λ/ρ)||_F`: stationarity of the `X` step,
/// evaluated with the multiplier from before the dual update.
pub fn x_step_residual(state: &SolverState, prob: &SymProblem) -> Result<f64> {
    let mut g = matmul(&state.x, &state.y.gram())?;
    g.axpy(-1.0, &prob.z().mul(&state.y)?);
    g.axpy(state.rho, &state.x);
    g.axpy(-state.rho, &state.y);
    g.axpy(-1.0, &state.lambda);
    Ok(g.fro_norm())
}

fn record(
    state: &SolverState,
    prob: &SymProblem,
    rho: f64,
    beta: f64,
    elapsed_s: f64,
    inner: Option<usize>,
) -> Result<IterRecord> {
    let p = progress_p(&state.x, &state.y, &state.lambda, prob, rho)?;
    Ok(IterRecord {
        t: state.t,
        elapsed_s,
        objective: objective(&state.x, prob)?,
        rel_objective: rel_objective(&state.x, prob)?,
        p_metric: Some(p.p),
        xy_gap: Some(state.x.sub(&state.y).fro_norm()),
        rho: Some(rho),
        beta: Some(beta),
        inner_iters: inner,
        opt_gap: None,
    })
}

/// One full iteration. The returned record carries the `ρ` and `β` used in
/// this iteration and the P metric of the new iterates at that `ρ`;
/// `elapsed_s` is this iteration's update time only.
pub fn step(state: &mut SolverState, prob: &SymProblem, cfg: &SolverConfig) -> Result<IterRecord> {
    let (rho, beta) = (state.rho, state.beta);
    let start = Instant::now();
    let inner = update_y(state, prob, cfg)?;
    update_x(state, prob)?;
    update_dual(state);
    update_schedules(state, prob, cfg)?;
    let secs = start.elapsed().as_secs_f64();
    state.t += 1;
    record(state, prob, rho, beta, secs, Some(inner))
}

pub fn run(prob: &SymProblem, cfg: &SolverConfig) -> Result<RunOutput> {
    let state = init(prob, cfg)?;
    run_from(prob, cfg, state)
}

/// Iterates until `P <= stop_eps` or `max_outer_iters` iterations. Trace row 0
/// describes the starting state.
pub fn run_from(prob: &SymProblem, cfg: &SolverConfig, mut state: SolverState) -> Result<RunOutput> {
    cfg.validate()?;
    prob.check_factor("run_from", &state.x)?;
    let mut trace = IterTrace::new();
    let mut rec = record(&state, prob, state.rho, state.beta, 0.0, None)?;
    let mut elapsed = 0.0;
    let mut last_rho = state.rho;
    let mut stop_reason = StopReason::BudgetExhausted;
    let mut final_p = rec.p_metric.unwrap_or(f64::INFINITY);
    trace.push(rec);
    if final_p <= cfg.stop_eps {
        stop_reason = StopReason::Converged;
    }
    while stop_reason != StopReason::Converged && state.t < cfg.max_outer_iters {
        last_rho = state.rho;
        rec = step(&mut state, prob, cfg)?;
        elapsed += rec.elapsed_s;
        rec.elapsed_s = elapsed;
        final_p = rec.p_metric.unwrap_or(f64::INFINITY);
        trace.push(rec);
        if final_p <= cfg.stop_eps {
            stop_reason = StopReason::Converged;
        }
    }
    let xy_gap = state.x.sub(&state.y).fro_norm();
    Ok(RunOutput {
        x: state.x,
        y: state.y,
        lambda: state.lambda,
        rho: last_rho,
        trace,
        stop_reason,
        final_p,
        xy_gap,
    })
}

/// Checks that every row of `y` is feasible up to relative slack `slack`.
pub fn is_feasible(y: &DenseMat, tau: f64, slack: f64) -> bool {
    (0..y.rows()).all(|i| {
        let r = y.row(i);
        r.iter().all(|&v| v >= 0.0) && r.iter().map(|v| v * v).sum::<f64>() <= tau * (1.0 + slack)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{gen_dataset, GenSpec};

    fn small_problem(seed: u64) -> SymProblem {
        gen_dataset(&GenSpec::adjacency(12, 3, seed)).unwrap()
    }

    #[test]
    fn project_row_hand_case_and_idempotence() {
        let p = project_row(&[-1.0, 2.0], 1.0);
        assert_eq!(p, vec![0.0, 1.0]);
        let w = [0.3, 0.4];
        assert_eq!(project_row(&w, 1.0), w.to_vec());
        let twice = project_row(&project_row(&[3.0, -2.0, 4.0], 2.0), 2.0);
        assert_eq!(twice, project_row(&[3.0, -2.0, 4.0], 2.0));
    }

    #[test]
    fn init_state_is_feasible_and_deterministic() {
        let prob = small_problem(1);
        let cfg = SolverConfig::default();
        let s = init(&prob, &cfg).unwrap();
        assert!(is_feasible(&s.y, prob.tau(), 1e-12));
        assert_eq!(s.x, s.y);
        assert_eq!(s.lambda.max_abs(), 0.0);
        assert!(s.rho > 0.0 && s.beta >= 0.0);
        assert_eq!(s, init(&prob, &cfg).unwrap());
    }

    #[test]
    fn init_rho_rules() {
        let prob = gen_dataset(&GenSpec::full_rank(100, 3, 2)).unwrap();
        let tb = tau_bar(&prob);
        let mut cfg = SolverConfig::default();
        let s = init(&prob, &cfg).unwrap();
        assert!((s.rho - 10.0 * tb).abs() <= 1e-12 * s.rho);
        cfg.rho_init_mode = RhoInit::TauBar;
        assert!((init(&prob, &cfg).unwrap().rho - tb).abs() <= 1e-12 * tb);
        cfg.use_schedules = false;
        let s = init(&prob, &cfg).unwrap();
        assert!((s.rho - 6.1 * 100.0 * prob.tau()).abs() <= 1e-9 * s.rho);
    }

    #[test]
    fn init_rejects_zero_data() {
        let prob = SymProblem::new(DenseMat::zeros(3, 3), 1).unwrap();
        assert!(matches!(
            init(&prob, &SolverConfig::default()),
            Err(SymNmfError::Degenerate(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::default();
        cfg.rho_cap_factor = 6.0;
        assert!(cfg.validate().is_err());
        cfg = SolverConfig { gp_max_iters: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = SolverConfig { stop_eps: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn update_y_zero_factor_gives_zero() {
        let prob = small_problem(2);
        let cfg = SolverConfig { gp_max_iters: 2000, gp_tol: 0.0, ..Default::default() };
        let mut s = init(&prob, &cfg).unwrap();
        s.x = DenseMat::zeros(prob.n(), prob.k());
        s.beta = 0.0;
        update_y(&mut s, &prob, &cfg).unwrap();
        assert!(s.y.max_abs() < 1e-12);
    }

    #[test]
    fn update_y_scalar_case() {
        let prob = SymProblem::with_tau(DenseMat::from_rows(&[vec![4.0]]).unwrap(), 1, 100.0).unwrap();
        let cfg = SolverConfig::default();
        let rho = 0.1;
        let mut s = SolverState {
            x: DenseMat::from_rows(&[vec![1.0]]).unwrap(),
            y: DenseMat::from_rows(&[vec![0.0]]).unwrap(),
            lambda: DenseMat::zeros(1, 1),
            rho,
            beta: 0.0,
            xi: 1.0,
            t: 0,
        };
        update_y(&mut s, &prob, &cfg).unwrap();
        let expected = (4.0 + rho) / (1.0 + rho);
        assert!((s.y.get(0, 0) - expected).abs() < 1e-12);

        // bound active: clip to sqrt(tau)
        let prob = SymProblem::with_tau(DenseMat::from_rows(&[vec![4.0]]).unwrap(), 1, 4.0).unwrap();
        s.y = DenseMat::zeros(1, 1);
        update_y(&mut s, &prob, &cfg).unwrap();
        assert!((s.y.get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn update_y_does_not_increase_subproblem_objective() {
        for seed in 0..5 {
            let prob = small_problem(seed);
            let cfg = SolverConfig { seed, ..Default::default() };
            let mut s = init(&prob, &cfg).unwrap();
            for _ in 0..3 {
                let prev = s.y.clone();
                let before = y_subproblem_objective(&s, &prob, &prev, &prev).unwrap();
                update_y(&mut s, &prob, &cfg).unwrap();
                let after = y_subproblem_objective(&s, &prob, &prev, &s.y).unwrap();
                assert!(after <= before + 1e-12 * before.abs().max(1.0));
                assert!(is_feasible(&s.y, prob.tau(), 1e-12));
                update_x(&mut s, &prob).unwrap();
                update_dual(&mut s);
                update_schedules(&mut s, &prob, &cfg).unwrap();
                s.t += 1;
            }
        }
    }

    #[test]
    fn update_x_reductions() {
        let prob = small_problem(3);
        let cfg = SolverConfig::default();
        let mut s = init(&prob, &cfg).unwrap();
        s.y = DenseMat::zeros(prob.n(), prob.k());
        s.lambda = DenseMat::zeros(prob.n(), prob.k());
        update_x(&mut s, &prob).unwrap();
        assert_eq!(s.x.max_abs(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        s.lambda = DenseMat::from_fn(prob.n(), prob.k(), |_, _| rng.random_range(-1.0..1.0));
        update_x(&mut s, &prob).unwrap();
        let expected = s.lambda.scaled(1.0 / s.rho);
        assert!(s.x.sub(&expected).max_abs() < 1e-14);
    }

    #[test]
    fn update_x_satisfies_stationarity() {
        let prob = small_problem(4);
        let cfg = SolverConfig::default();
        let mut s = init(&prob, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        s.lambda = DenseMat::from_fn(prob.n(), prob.k(), |_, _| rng.random_range(-1.0..1.0));
        update_y(&mut s, &prob, &cfg).unwrap();
        update_x(&mut s, &prob).unwrap();
        let r = x_step_residual(&s, &prob).unwrap();
        assert!(r <= 1e-8 * (1.0 + s.x.fro_norm()), "residual {r}");
    }

    #[test]
    fn dual_update_cases() {
        let prob = small_problem(5);
        let mut s = init(&prob, &SolverConfig::default()).unwrap();
        let before = s.lambda.clone();
        update_dual(&mut s);
        assert_eq!(s.lambda, before);

        s.rho = 1.0;
        let e = DenseMat::from_fn(prob.n(), prob.k(), |i, j| (i + j) as f64 * 0.01);
        s.y = s.x.add(&e);
        update_dual(&mut s);
        assert!(s.lambda.sub(&before.add(&e)).max_abs() < 1e-15);
    }

    #[test]
    fn dual_identity_after_iteration() {
        let prob = small_problem(6);
        let cfg = SolverConfig::default();
        let mut s = init(&prob, &cfg).unwrap();
        for _ in 0..5 {
            step(&mut s, &prob, &cfg).unwrap();
            let r = dual_identity_residual(&s, &prob).unwrap();
            assert!(r <= 1e-8 * (1.0 + s.lambda.fro_norm()), "residual {r}");
        }
    }

    #[test]
    fn schedule_recurrences() {
        let r = schedule_next(2.0, 1e-3, 1e9).unwrap();
        assert!((r - 2.0 / (1.0 - 0.0005)).abs() < 1e-15);
        assert!((r - 2.001_000_500_250_125).abs() < 1e-12);
        assert_eq!(schedule_next(1.0, 1e-3, 1.0).unwrap(), 1.0);
        assert_eq!(schedule_next(5.0, 1e-3, 5.0).unwrap(), 5.0);
        assert!(matches!(schedule_next(1e-3, 1e-3, 1.0), Err(SymNmfError::Config(_))));
    }

    #[test]
    fn rho_held_at_cap() {
        let prob = small_problem(7);
        let cfg = SolverConfig::default();
        let mut s = init(&prob, &cfg).unwrap();
        let cap = 6.1 * prob.n() as f64 * prob.tau();
        s.rho = cap;
        s.xi = 1.0;
        update_schedules(&mut s, &prob, &cfg).unwrap();
        assert_eq!(s.rho, cap);
        assert_eq!(s.xi, 1.0);
    }

    #[test]
    fn beta_refresh_period() {
        let prob = small_problem(8);
        let cfg = SolverConfig { beta_update_period: 3, ..Default::default() };
        let mut s = init(&prob, &cfg).unwrap();
        let b0 = s.beta;
        step(&mut s, &prob, &cfg).unwrap();
        step(&mut s, &prob, &cfg).unwrap();
        assert_eq!(s.beta, b0);
        step(&mut s, &prob, &cfg).unwrap();
        let r = prob.z().residual_fro_sq(&s.x, &s.y).unwrap();
        assert!((s.beta - 6.0 * s.xi * r / s.rho).abs() <= 1e-12 * s.beta.max(1e-300));

        let cfg = SolverConfig { use_schedules: false, ..Default::default() };
        let mut s = init(&prob, &cfg).unwrap();
        let rho = s.rho;
        step(&mut s, &prob, &cfg).unwrap();
        assert_eq!(s.rho, rho);
        let r = prob.z().residual_fro_sq(&s.x, &s.y).unwrap();
        assert!((s.beta - 6.0 * r / rho).abs() <= 1e-12 * s.beta);
    }

    #[test]
    fn step_trace_increments() {
        let prob = small_problem(9);
        let cfg = SolverConfig::default();
        let mut s = init(&prob, &cfg).unwrap();
        let a = step(&mut s, &prob, &cfg).unwrap();
        let b = step(&mut s, &prob, &cfg).unwrap();
        assert_eq!(a.t + 1, b.t);
        assert!(b.inner_iters.unwrap() >= 1);
    }

    #[test]
    fn zero_budget_returns_initial_state() {
        let prob = small_problem(10);
        let cfg = SolverConfig { max_outer_iters: 0, ..Default::default() };
        let out = run(&prob, &cfg).unwrap();
        assert_eq!(out.stop_reason, StopReason::BudgetExhausted);
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.x, init(&prob, &cfg).unwrap().x);
    }

    #[test]
    fn run_is_deterministic() {
        let prob = small_problem(11);
        let cfg = SolverConfig { max_outer_iters: 30, ..Default::default() };
        let a = run(&prob, &cfg).unwrap();
        let b = run(&prob, &cfg).unwrap();
        assert_eq!(a.x, b.x);
        let strip = |o: &RunOutput| -> Vec<IterRecord> {
            o.trace.records().iter().map(|r| IterRecord { elapsed_s: 0.0, ..r.clone() }).collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }
}
