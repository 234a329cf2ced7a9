//! Problem instances: the data matrix, target rank and row-norm bound, the
//! factorization objective with its gradient, and synthetic data generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result, SymNmfError};
use crate::matrix::{DataMatrix, DenseMat, SparseSym};

/// Relative slack added to `max_k theta_k` so the bound is strict.
pub const TAU_SLACK: f64 = 1e-6;

/// A SymNMF instance `min_{X >= 0} 1/2 ||X X^T - Z||_F^2` with `X` of size
/// `N x K`, together with the bound `tau` on squared row norms used by the
/// splitting solver.
#[derive(Debug, Clone)]
pub struct SymProblem {
    z: DataMatrix,
    k: usize,
    tau: f64,
    z_fro_sq: f64,
}

impl SymProblem {
    /// Instance with `tau = default_tau(z)`.
    pub fn new(z: impl Into<DataMatrix>, k: usize) -> Result<Self> {
        let z = z.into();
        let tau = default_tau(&z);
        Self::with_tau(z, k, tau)
    }

    pub fn with_tau(z: impl Into<DataMatrix>, k: usize, tau: f64) -> Result<Self> {
        let z = z.into();
        if !z.is_square() {
            return Err(shape_err("SymProblem", "data matrix must be square"));
        }
        let n = z.n();
        if n == 0 {
            return Err(shape_err("SymProblem", "empty data matrix"));
        }
        if k == 0 || k > n {
            return Err(shape_err("SymProblem", format!("rank {k} outside [1, {n}]")));
        }
        if !tau.is_finite() || tau < 0.0 {
            return Err(SymNmfError::Config(format!("tau must be finite and >= 0, got {tau}")));
        }
        let z_fro_sq = z.fro_norm_sq();
        Ok(Self { z, k, tau, z_fro_sq })
    }

    pub fn z(&self) -> &DataMatrix {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.z.n()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn z_fro_sq(&self) -> f64 {
        self.z_fro_sq
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n()).map(|k| theta_k(&self.z, k)).collect()
    }

    pub(crate) fn check_factor(&self, op: &'static str, x: &DenseMat) -> Result<()> {
        if x.rows() != self.n() || x.cols() != self.k {
            return Err(shape_err(
                op,
                format!("factor {:?}, expected {}x{}", x.shape(), self.n(), self.k),
            ));
        }
        Ok(())
    }
}

/// `theta_k = (Z_kk + 1/2 sqrt(sum_i (Z_ik + Z_ki)^2)) / 2`; any `tau` above
/// every `theta_k` keeps all KKT points of the unbounded problem.
pub fn theta_k(z: &DataMatrix, k: usize) -> f64 {
    let (diag, sum_sq) = match z {
        DataMatrix::Dense(d) => {
            let n = d.rows();
            let s: f64 = (0..n).map(|i| (d.get(i, k) + d.get(k, i)).powi(2)).sum();
            (d.get(k, k), s)
        }
        DataMatrix::Sparse(s) => {
            let (cols, vals) = s.row(k);
            let sum: f64 = vals.iter().map(|v| 4.0 * v * v).sum();
            let diag = cols.binary_search(&k).map_or(0.0, |p| vals[p]);
            (diag, sum)
        }
    };
    (diag + 0.5 * sum_sq.sqrt()) / 2.0
}

/// `max_k theta_k * (1 + TAU_SLACK)`.
pub fn default_tau(z: &DataMatrix) -> f64 {
    let m = (0..z.n()).map(|k| theta_k(z, k)).fold(f64::NEG_INFINITY, f64::max);
    if m.is_finite() {
        m * (1.0 + TAU_SLACK)
    } else {
        0.0
    }
}

/// `f(X) = 1/2 ||X X^T - Z||_F^2`, accumulated without forming `X X^T`.
pub fn objective(x: &DenseMat, prob: &SymProblem) -> Result<f64> {
    prob.check_factor("objective", x)?;
    Ok(0.5 * prob.z.residual_fro_sq(x, x)?)
}

/// `||X X^T - Z||_F^2 / ||Z||_F^2`.
pub fn rel_objective(x: &DenseMat, prob: &SymProblem) -> Result<f64> {
    if prob.z_fro_sq == 0.0 {
        return Err(SymNmfError::Degenerate(
            "relative objective undefined for Z = 0".into(),
        ));
    }
    Ok(2.0 * objective(x, prob)? / prob.z_fro_sq)
}

/// `grad f(X) = 2 (X X^T - (Z + Z^T)/2) X`.
pub fn grad_f(x: &DenseMat, prob: &SymProblem) -> Result<DenseMat> {
    prob.check_factor("grad_f", x)?;
    let xxtx = crate::matrix::matmul(x, &x.gram())?;
    let zx = prob.z.sym_mul(x)?;
    Ok(xxtx.zip_with(&zx, |a, b| 2.0 * (a - b)))
}

/// `||X - max(X - grad f(X), 0)||_inf`, zero exactly at KKT points.
pub fn stationarity_gap_inf(x: &DenseMat, prob: &SymProblem) -> Result<f64> {
    let g = grad_f(x, prob)?;
    Ok(x.as_slice()
        .iter()
        .zip(g.as_slice())
        .fold(0.0, |m, (&xi, &gi)| m.max((xi - (xi - gi).max(0.0)).abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    /// `Z = M M^T` with `M` of size `N x K` holding `|g|`, `g` standard normal.
    LowRank,
    /// `Z = (P + P^T)/2` with `P` uniform on `[0, 1]`.
    FullRank,
    /// Gaussian-kernel similarity of 1-D points drawn from per-cluster normals.
    Adjacency,
}

impl std::str::FromStr for GenKind {
    type Err = SymNmfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "low_rank" => Ok(GenKind::LowRank),
            "full_rank" => Ok(GenKind::FullRank),
            "adjacency" => Ok(GenKind::Adjacency),
            other => Err(SymNmfError::Config(format!("unknown generator kind `{other}`"))),
        }
    }
}

/// Synthetic data specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: GenKind,
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub cluster_sizes: Vec<usize>,
    #[serde(default)]
    pub cluster_means: Vec<f64>,
    #[serde(default = "default_variance")]
    pub cluster_variance: f64,
    #[serde(default = "default_variance")]
    pub kernel_sigma_sq: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_variance() -> f64 {
    0.5
}

/// Cluster proportions and means of the four-cluster adjacency benchmark.
pub const ADJACENCY_RATIOS: [usize; 4] = [3, 5, 8, 4];
pub const ADJACENCY_MEANS: [f64; 4] = [2.0, 3.0, 6.0, 8.0];

impl GenSpec {
    pub fn low_rank(n: usize, k: usize, seed: u64) -> Self {
        Self::bare(GenKind::LowRank, n, k, seed)
    }

    pub fn full_rank(n: usize, k: usize, seed: u64) -> Self {
        Self::bare(GenKind::FullRank, n, k, seed)
    }

    /// Four clusters in ratio 3:5:8:4 with means 2, 3, 6, 8 and variance 0.5,
    /// kernel width `sigma^2 = 0.5`.
    pub fn adjacency(n: usize, k: usize, seed: u64) -> Self {
        Self {
            cluster_sizes: apportion(n, &ADJACENCY_RATIOS),
            cluster_means: ADJACENCY_MEANS.to_vec(),
            ..Self::bare(GenKind::Adjacency, n, k, seed)
        }
    }

    fn bare(kind: GenKind, n: usize, k: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            k,
            cluster_sizes: Vec::new(),
            cluster_means: Vec::new(),
            cluster_variance: default_variance(),
            kernel_sigma_sq: default_variance(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.k > self.n {
            return Err(SymNmfError::Config(format!(
                "need 1 <= k <= n, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if self.kind == GenKind::Adjacency {
            if self.cluster_sizes.iter().sum::<usize>() != self.n {
                return Err(SymNmfError::Config(format!(
                    "cluster sizes {:?} do not sum to n = {}",
                    self.cluster_sizes, self.n
                )));
            }
            if self.cluster_sizes.len() != self.cluster_means.len() {
                return Err(SymNmfError::Config(
                    "cluster_sizes and cluster_means differ in length".into(),
                ));
            }
            if !(self.cluster_variance >= 0.0) || !(self.kernel_sigma_sq > 0.0) {
                return Err(SymNmfError::Config(
                    "cluster variance must be >= 0 and kernel sigma^2 > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Splits `n` into parts proportional to `weights` (largest remainder, ties to
/// the lower index).
pub fn apportion(n: usize, weights: &[usize]) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let mut sizes: Vec<usize> = weights.iter().map(|w| n * w / total).collect();
    let mut rema: Vec<(usize, usize)> = weights.iter().map(|w| (n * w % total, 0)).collect();
    for (i, r) in rema.iter_mut().enumerate() {
        r.1 = i;
    }
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = n - sizes.iter().sum::<usize>();
    for &(_, i) in rema.iter().take(short) {
        sizes[i] += 1;
    }
    sizes
}

/// Generates a dataset. Normal draws use the ziggurat sampler of `rand_distr`
/// on a ChaCha8 stream seeded from `spec.seed`, so output is bitwise
/// reproducible for a given seed.
pub fn gen_dataset(spec: &GenSpec) -> Result<SymProblem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let z = match spec.kind {
        GenKind::LowRank => {
            let m = DenseMat::from_fn(n, spec.k, |_, _| {
                let g: f64 = rng.sample(StandardNormal);
                g.abs()
            });
            crate::matrix::matmul(&m, &m.transpose())?
        }
        GenKind::FullRank => {
            let p = DenseMat::from_fn(n, n, |_, _| rng.random::<f64>());
            DenseMat::from_fn(n, n, |i, j| 0.5 * (p.get(i, j) + p.get(j, i)))
        }
        GenKind::Adjacency => {
            let sd = spec.cluster_variance.sqrt();
            let mut pts = Vec::with_capacity(n);
            for (&size, &mean) in spec.cluster_sizes.iter().zip(&spec.cluster_means) {
                for _ in 0..size {
                    let g: f64 = rng.sample(StandardNormal);
                    pts.push(mean + sd * g);
                }
            }
            let two_s2 = 2.0 * spec.kernel_sigma_sq;
            DenseMat::from_fn(n, n, |i, j| (-(pts[i] - pts[j]).powi(2) / two_s2).exp())
        }
    };
    SymProblem::new(z, spec.k)
}

/// Sparse view of a dense symmetric matrix (entries with `|v| > 0`).
pub fn sparsify(d: &DenseMat) -> Result<SparseSym> {
    let n = d.rows();
    let mut t = Vec::new();
    for i in 0..n {
        for j in i..n {
            let v = d.get(i, j);
            if v != 0.0 {
                t.push((i, j, v));
            }
        }
    }
    SparseSym::new(n, t)
}
