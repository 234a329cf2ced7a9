//! Progress metric and optimality certificates.
//!
//! * [`progress_p`]: squared proximal gradient of the augmented Lagrangian plus
//!   the squared consensus gap, the solver's stopping measure.
//! * [`global_certificate`]: `S = X X^T - (Z + Z^T)/2` positive semidefinite
//!   implies `X` is a global minimizer.
//! * [`local_certificate`]: the `KN x KN` block operator `T(δ)` positive
//!   definite for some `δ > 0` implies a strict local minimizer. `δ` is scanned
//!   downward from 1 in steps of 0.01.
//!
//! Smallest eigenvalues come from power iteration on `η I - A` with `η` an
//! upper bound on the spectrum of `A`.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result, SymNmfError};
use crate::matrix::{power_max_eig, power_max_eig_from, DenseMat, LinOp};
use crate::problem::SymProblem;
use crate::solver::project_row_in_place;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressMetrics {
    pub p: f64,
    pub prox_grad_norm_sq: f64,
    pub xy_gap_sq: f64,
}

/// `∇_X L = (X Y^T - Z) Y - Λ + ρ (X - Y)`.
pub fn lagrangian_grad_x(
    x: &DenseMat,
    y: &DenseMat,
    lambda: &DenseMat,
    prob: &SymProblem,
    rho: f64,
) -> Result<DenseMat> {
    let mut g = crate::matrix::matmul(x, &y.gram())?;
    g.axpy(-1.0, &prob.z().mul(y)?);
    g.axpy(-1.0, lambda);
    g.axpy(rho, x);
    g.axpy(-rho, y);
    Ok(g)
}

/// `∇_Y L = (Y X^T - Z^T) X + Λ + ρ (Y - X)`.
pub fn lagrangian_grad_y(
    x: &DenseMat,
    y: &DenseMat,
    lambda: &DenseMat,
    prob: &SymProblem,
    rho: f64,
) -> Result<DenseMat> {
    let mut g = crate::matrix::matmul(y, &x.gram())?;
    g.axpy(-1.0, &prob.z().mul_t(x)?);
    g.axpy(1.0, lambda);
    g.axpy(rho, y);
    g.axpy(-rho, x);
    Ok(g)
}

/// Progress metric
/// `P = ||Y - proj(Y - ∇_Y L)||^2 + ||∇_X L||^2 + ||X - Y||^2`,
/// where `proj` maps each row onto `{y >= 0, ||y||^2 <= tau}`.
pub fn progress_p(
    x: &DenseMat,
    y: &DenseMat,
    lambda: &DenseMat,
    prob: &SymProblem,
    rho: f64,
) -> Result<ProgressMetrics> {
    prob.check_factor("progress_p", x)?;
    if y.shape() != x.shape() || lambda.shape() != x.shape() {
        return Err(shape_err(
            "progress_p",
            format!("X {:?}, Y {:?}, Λ {:?}", x.shape(), y.shape(), lambda.shape()),
        ));
    }
    if !(rho > 0.0) {
        return Err(SymNmfError::Config(format!("rho must be > 0 (got {rho})")));
    }
    let gx = lagrangian_grad_x(x, y, lambda, prob, rho)?;
    let mut w = y.sub(&lagrangian_grad_y(x, y, lambda, prob, rho)?);
    let k = prob.k();
    let tau = prob.tau();
    w.as_mut_slice()
        .chunks_mut(k)
        .for_each(|r| project_row_in_place(r, tau));
    let yblock = y.sub(&w);
    let d = x.sub(y);
    let prox = yblock.dot(&yblock) + gx.dot(&gx);
    let gap = d.dot(&d);
    Ok(ProgressMetrics {
        p: prox + gap,
        prox_grad_norm_sq: prox,
        xy_gap_sq: gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Global,
    Local,
    LocalK1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    NotCertified,
}

/// One evaluated `δ` of a local scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub delta: f64,
    pub lambda_min: f64,
    pub eig_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub verdict: Verdict,
    /// Certified `δ`, or for a failed local scan the `δ` with the largest `λ_min`.
    pub delta: Option<f64>,
    pub lambda_min: f64,
    pub eig_residual: f64,
    pub scanned_deltas: usize,
    /// Scan points dropped because the eigensolver did not converge.
    pub skipped: usize,
    pub scan: Vec<ScanPoint>,
    pub diagnostic: Option<String>,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyOptions {
    /// Global check tolerance; `None` means `1e-8 (1 + ||Z||_F)`.
    pub psd_tol: Option<f64>,
    /// Local checks require `λ_min > psd_margin`.
    pub psd_margin: f64,
    pub scan_start: f64,
    pub scan_step: f64,
    pub scan_min: f64,
    /// Power iteration stops once the residual is below `eig_tol * η`.
    pub eig_tol: f64,
    pub eig_max_iters: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            psd_tol: None,
            psd_margin: 0.0,
            scan_start: 1.0,
            scan_step: 0.01,
            scan_min: 0.01,
            eig_tol: 1e-11,
            eig_max_iters: 200_000,
            seed: 0x00c0_ffee,
        }
    }
}

impl CertifyOptions {
    /// The scanned `δ` values, from `scan_start` down to `scan_min`.
    pub fn deltas(&self) -> Result<Vec<f64>> {
        if !(self.scan_step > 0.0) || !(self.scan_min > 0.0) || !(self.scan_start >= self.scan_min) {
            return Err(SymNmfError::Config(format!(
                "bad δ scan: start {}, step {}, min {}",
                self.scan_start, self.scan_step, self.scan_min
            )));
        }
        let steps = ((self.scan_start - self.scan_min) / self.scan_step + 1e-9).floor() as usize;
        Ok((0..=steps)
            .map(|j| self.scan_start - j as f64 * self.scan_step)
            .collect())
    }
}

/// Smallest eigenvalue estimate of a symmetric operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MinEig {
    pub lambda_min: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub vector: Vec<f64>,
}

/// `λ_min(A) = η - λ_max(η I - A)`; `η` must bound the spectrum of `A` from above.
pub fn shifted_min_eig(
    op: LinOp<'_>,
    eta: f64,
    tol: f64,
    max_iter: usize,
    start: Option<&[f64]>,
    seed: u64,
) -> Result<MinEig> {
    let shifted = op.shifted(eta);
    let r = match start {
        Some(s) => power_max_eig_from(&shifted, tol, max_iter, s, seed)?,
        None => power_max_eig(&shifted, tol, max_iter, seed)?,
    };
    Ok(MinEig {
        lambda_min: eta - r.value,
        residual: r.residual,
        iterations: r.iterations,
        converged: r.converged,
        vector: r.vector,
    })
}

fn check_nonneg(op: &'static str, x: &DenseMat) -> Result<()> {
    if x.as_slice().iter().any(|&v| !(v >= 0.0)) {
        return Err(shape_err(op, "factor must be entrywise nonnegative and finite"));
    }
    Ok(())
}

/// `S v = X (X^T v) - (Z + Z^T)/2 v`.
pub fn global_certificate_op<'a>(x: &'a DenseMat, prob: &'a SymProblem) -> LinOp<'a> {
    let (n, k) = x.shape();
    LinOp::new(n, move |v, out| {
        prob.z().sym_mul_vec(v, out);
        let mut h = vec![0.0; k];
        for i in 0..n {
            let xi = x.row(i);
            for (hj, &xij) in h.iter_mut().zip(xi) {
                *hj += xij * v[i];
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            let p: f64 = x.row(i).iter().zip(&h).map(|(a, b)| a * b).sum();
            *o = p - *o;
        }
    })
}

fn global_shift(x: &DenseMat, prob: &SymProblem) -> f64 {
    x.dot(x) + prob.z_fro_sq().sqrt() + 1.0
}

/// `λ_min(S)` by shifted power iteration.
pub fn global_min_eig(x: &DenseMat, prob: &SymProblem, opts: &CertifyOptions) -> Result<MinEig> {
    prob.check_factor("global_min_eig", x)?;
    let eta = global_shift(x, prob);
    shifted_min_eig(global_certificate_op(x, prob), eta, opts.eig_tol, opts.eig_max_iters, None, opts.seed)
}

/// Certified iff `λ_min(S) >= -psd_tol`.
pub fn global_certificate(x: &DenseMat, prob: &SymProblem, opts: &CertifyOptions) -> Result<Certificate> {
    prob.check_factor("global_certificate", x)?;
    check_nonneg("global_certificate", x)?;
    let psd_tol = opts
        .psd_tol
        .unwrap_or(1e-8 * (1.0 + prob.z_fro_sq().sqrt()));
    let e = global_min_eig(x, prob, opts)?;
    let ok = e.converged && e.lambda_min >= -psd_tol;
    Ok(Certificate {
        kind: CertificateKind::Global,
        verdict: if ok { Verdict::Certified } else { Verdict::NotCertified },
        delta: None,
        lambda_min: e.lambda_min,
        eig_residual: e.residual,
        scanned_deltas: 0,
        skipped: 0,
        scan: Vec::new(),
        diagnostic: (!e.converged)
            .then(|| format!("eigensolver did not converge in {} iterations", e.iterations)),
    })
}

/// Applies the local block operator to `v = [v_1; ...; v_K]`, `v_n in R^N`.
///
/// Block `(m, n)` is `(G_mn - δ c_n) I + X_n X_m^T + [m = n] S` with
/// `G = X^T X` and `c_n = ||X_n||^2`, so with `V = [v_1 ... v_K]` and
/// `H = X^T V` the product is `V M + X (H + H^T) - Zs V`, `M_nm = G_nm - δ c_n`.
/// With `symmetric` the coefficient `δ c_n` becomes `δ (c_m + c_n)/2`, which
/// gives the symmetric part of the operator.
fn t_apply(x: &DenseMat, prob: &SymProblem, delta: f64, symmetric: bool, v: &[f64], out: &mut [f64]) {
    let (n, k) = x.shape();
    let g = x.gram();
    let c: Vec<f64> = (0..k).map(|j| g.get(j, j)).collect();
    // h[m][j] = X_m . v_j
    let mut h = vec![0.0; k * k];
    for i in 0..n {
        let xi = x.row(i);
        for j in 0..k {
            let vij = v[j * n + i];
            if vij != 0.0 {
                for m in 0..k {
                    h[m * k + j] += xi[m] * vij;
                }
            }
        }
    }
    let coef = |nn: usize, m: usize| -> f64 {
        if symmetric {
            g.get(nn, m) - 0.5 * delta * (c[nn] + c[m])
        } else {
            g.get(nn, m) - delta * c[nn]
        }
    };
    for m in 0..k {
        let (head, _) = out.split_at_mut((m + 1) * n);
        let om = &mut head[m * n..];
        prob.z().sym_mul_vec(&v[m * n..(m + 1) * n], om);
        for o in om.iter_mut() {
            *o = -*o;
        }
        for nn in 0..k {
            let a = coef(nn, m);
            let vn = &v[nn * n..(nn + 1) * n];
            for (o, &vi) in om.iter_mut().zip(vn) {
                *o += a * vi;
            }
        }
        // X (H + H^T) column m
        let hs: Vec<f64> = (0..k).map(|j| h[j * k + m] + h[m * k + j]).collect();
        for (i, o) in om.iter_mut().enumerate() {
            *o += x.row(i).iter().zip(&hs).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// The local certificate operator `T(δ)` on stacked columns, applied exactly
/// as its block definition reads. For `K > 1` this operator is not symmetric;
/// eigenvalues are taken from [`local_certificate_op`].
pub fn local_t_op<'a>(x: &'a DenseMat, prob: &'a SymProblem, delta: f64) -> LinOp<'a> {
    LinOp::new(x.rows() * x.cols(), move |v, out| t_apply(x, prob, delta, false, v, out))
}

/// Symmetric part `(T + T^T)/2`, which has the same quadratic form as `T`.
pub fn local_certificate_op<'a>(x: &'a DenseMat, prob: &'a SymProblem, delta: f64) -> LinOp<'a> {
    LinOp::new(x.rows() * x.cols(), move |v, out| t_apply(x, prob, delta, true, v, out))
}

/// Upper bound on the spectrum of the symmetric local operator:
/// `||M|| <= (1 + δ sqrt(K)) ||X||_F^2`, `||V -> X(X^T V + V^T X)|| <= 2 ||X||_F^2`.
fn local_shift(x: &DenseMat, prob: &SymProblem, delta: f64) -> f64 {
    let k = x.cols() as f64;
    (3.0 + delta * k.sqrt()) * x.dot(x) + prob.z_fro_sq().sqrt() + 1.0
}

/// `λ_min` of the symmetric local operator at `δ`.
pub fn local_min_eig(x: &DenseMat, prob: &SymProblem, delta: f64, opts: &CertifyOptions) -> Result<MinEig> {
    prob.check_factor("local_min_eig", x)?;
    let eta = local_shift(x, prob, delta);
    shifted_min_eig(
        local_certificate_op(x, prob, delta),
        eta,
        opts.eig_tol,
        opts.eig_max_iters,
        None,
        opts.seed,
    )
}

/// `T_1(δ) = (1 - δ) ||x||^2 I + 2 x x^T - (Z + Z^T)/2`.
pub fn local_certificate_k1_op<'a>(x: &'a [f64], prob: &'a SymProblem, delta: f64) -> LinOp<'a> {
    let c = (1.0 - delta) * x.iter().map(|v| v * v).sum::<f64>();
    LinOp::new(x.len(), move |v, out| {
        prob.z().sym_mul_vec(v, out);
        let p: f64 = 2.0 * x.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        for ((o, &vi), &xi) in out.iter_mut().zip(v).zip(x) {
            *o = c * vi + p * xi - *o;
        }
    })
}

fn scan(
    kind: CertificateKind,
    deltas: &[f64],
    opts: &CertifyOptions,
    mut eval: impl FnMut(f64, Option<&[f64]>) -> Result<MinEig>,
) -> Result<Certificate> {
    let mut points = Vec::with_capacity(deltas.len());
    let mut skipped = 0;
    let mut warm: Option<Vec<f64>> = None;
    let mut best: Option<ScanPoint> = None;
    for &delta in deltas {
        let e = eval(delta, warm.as_deref())?;
        let pt = ScanPoint {
            delta,
            lambda_min: e.lambda_min,
            eig_residual: e.residual,
            converged: e.converged,
        };
        points.push(pt);
        warm = Some(e.vector);
        if !e.converged {
            skipped += 1;
            continue;
        }
        if e.lambda_min > opts.psd_margin {
            return Ok(Certificate {
                kind,
                verdict: Verdict::Certified,
                delta: Some(delta),
                lambda_min: e.lambda_min,
                eig_residual: e.residual,
                scanned_deltas: points.len(),
                skipped,
                scan: points,
                diagnostic: None,
            });
        }
        if best.is_none_or(|b| e.lambda_min > b.lambda_min) {
            best = Some(pt);
        }
    }
    let diagnostic = if best.is_none() {
        Some(format!("eigensolver failed to converge at all {} δ values", points.len()))
    } else if skipped > 0 {
        Some(format!("{skipped} δ values skipped for non-convergence"))
    } else {
        None
    };
    let (delta, lambda_min, eig_residual) = match best {
        Some(b) => (Some(b.delta), b.lambda_min, b.eig_residual),
        None => (None, f64::NAN, points.last().map_or(f64::NAN, |p| p.eig_residual)),
    };
    Ok(Certificate {
        kind,
        verdict: Verdict::NotCertified,
        delta,
        lambda_min,
        eig_residual,
        scanned_deltas: points.len(),
        skipped,
        scan: points,
        diagnostic,
    })
}

/// Scans `δ` downward and certifies at the first `δ` with `λ_min(T(δ)) > psd_margin`.
/// Each `δ` warm-starts the eigensolver from the previous eigenvector.
pub fn local_certificate(x: &DenseMat, prob: &SymProblem, opts: &CertifyOptions) -> Result<Certificate> {
    prob.check_factor("local_certificate", x)?;
    check_nonneg("local_certificate", x)?;
    let deltas = opts.deltas()?;
    scan(CertificateKind::Local, &deltas, opts, |delta, warm| {
        shifted_min_eig(
            local_certificate_op(x, prob, delta),
            local_shift(x, prob, delta),
            opts.eig_tol,
            opts.eig_max_iters,
            warm,
            opts.seed,
        )
    })
}

/// Single-column variant of [`local_certificate`] on the `N x N` operator `T_1(δ)`.
pub fn local_certificate_k1(x: &[f64], prob: &SymProblem, opts: &CertifyOptions) -> Result<Certificate> {
    if prob.k() != 1 || x.len() != prob.n() {
        return Err(shape_err(
            "local_certificate_k1",
            format!("K = {}, N = {}, x of length {}", prob.k(), prob.n(), x.len()),
        ));
    }
    if x.iter().any(|&v| !(v >= 0.0)) {
        return Err(shape_err("local_certificate_k1", "factor must be entrywise nonnegative"));
    }
    let deltas = opts.deltas()?;
    let xx: f64 = x.iter().map(|v| v * v).sum();
    scan(CertificateKind::LocalK1, &deltas, opts, |delta, warm| {
        let eta = (3.0 - delta) * xx + prob.z_fro_sq().sqrt() + 1.0;
        shifted_min_eig(local_certificate_k1_op(x, prob, delta), eta, opts.eig_tol, opts.eig_max_iters, warm, opts.seed)
    })
}
