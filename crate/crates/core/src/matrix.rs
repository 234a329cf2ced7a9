//! Dense and sparse matrix kernels plus a matrix-free extremal eigenvalue routine.
//!
//! Dense matrices are stored row-major since the solvers mostly touch whole rows
//! (row-separable subproblems, per-row projections). Sparse input matrices are
//! symmetric and read-only after ingestion: the upper-triangle coordinate list
//! is kept for export and expanded once into a compressed row structure holding
//! both triangles for fast products.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result, SymNmfError};

/// Work threshold (multiply-adds) above which products fan out over rows.
const PAR_THRESHOLD: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err(
                "DenseMat::from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SymNmfError::Numerical {
                context: "DenseMat::from_vec input".into(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(shape_err("DenseMat::from_rows", "ragged rows"));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMat {
        DenseMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn fro_norm(&self) -> f64 {
        fro_norm_sq(self).sqrt()
    }

    /// Frobenius inner product `<self, other>`.
    pub fn dot(&self, other: &DenseMat) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> DenseMat {
        DenseMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &DenseMat) -> DenseMat {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &DenseMat) -> DenseMat {
        self.zip_with(other, |a, b| a + b)
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &DenseMat) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn zip_with(&self, other: &DenseMat, f: impl Fn(f64, f64) -> f64) -> DenseMat {
        assert_eq!(self.shape(), other.shape(), "elementwise shape mismatch");
        DenseMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMat {
        DenseMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self^T * other`, without forming the transpose.
    pub fn t_matmul(&self, other: &DenseMat) -> Result<DenseMat> {
        if self.rows != other.rows {
            return Err(shape_err(
                "t_matmul",
                format!("{:?}^T x {:?}", self.shape(), other.shape()),
            ));
        }
        let (m, n) = (self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for r in 0..self.rows {
            let a = self.row(r);
            let b = other.row(r);
            for (i, &ai) in a.iter().enumerate() {
                if ai == 0.0 {
                    continue;
                }
                let dst = &mut out[i * n..(i + 1) * n];
                for (d, &bj) in dst.iter_mut().zip(b) {
                    *d += ai * bj;
                }
            }
        }
        Ok(DenseMat {
            rows: m,
            cols: n,
            data: out,
        })
    }

    /// Gram matrix `self^T self`.
    pub fn gram(&self) -> DenseMat {
        self.t_matmul(self).expect("gram is always conformable")
    }
}

fn row_times(a_row: &[f64], b: &DenseMat, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (k, &a) in a_row.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (o, &bv) in out.iter_mut().zip(b.row(k)) {
            *o += a * bv;
        }
    }
}

/// Dense product `a * b`.
pub fn matmul(a: &DenseMat, b: &DenseMat) -> Result<DenseMat> {
    if a.cols != b.rows {
        return Err(shape_err(
            "matmul",
            format!("{:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let (m, n) = (a.rows, b.cols);
    let mut out = DenseMat::zeros(m, n);
    if n == 0 {
        return Ok(out);
    }
    if m * n * a.cols >= PAR_THRESHOLD {
        out.data
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, dst)| row_times(a.row(i), b, dst));
    } else {
        for (i, dst) in out.data.chunks_mut(n).enumerate() {
            row_times(a.row(i), b, dst);
        }
    }
    Ok(out)
}

pub fn fro_norm_sq(a: &DenseMat) -> f64 {
    a.data.iter().map(|v| v * v).sum()
}

/// Sparse symmetric matrix.
///
/// `entries` holds each symmetric pair once with `i <= j`; the compressed row
/// arrays hold both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Builds from coordinate triples. Lower-triangle triples are mirrored into
    /// the upper triangle and duplicates are summed.
    pub fn new(n: usize, triples: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triples {
            if i >= n || j >= n {
                return Err(shape_err(
                    "SparseSym::new",
                    format!("index ({i}, {j}) out of range for n = {n}"),
                ));
            }
            if !v.is_finite() {
                return Err(SymNmfError::Numerical {
                    context: format!("SparseSym entry ({i}, {j})"),
                });
            }
            entries.push((i.min(j), i.max(j), v));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        entries.dedup_by(|later, kept| {
            if later.0 == kept.0 && later.1 == kept.1 {
                kept.2 += later.2;
                true
            } else {
                false
            }
        });

        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in &entries {
            per_row[i].push((j, v));
            if i != j {
                per_row[j].push((i, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in per_row {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                col_idx.push(j);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            entries,
            row_ptr,
            col_idx,
            vals,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Upper-triangle entries `(i, j, v)` with `i <= j`.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Stored nonzeros of the full (both-triangle) matrix.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `i` of the full matrix.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.vals[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn to_dense(&self) -> DenseMat {
        let mut d = DenseMat::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            d.set(i, j, v);
            d.set(j, i, v);
        }
        d
    }

    pub fn fro_norm_sq(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum()
    }
}

/// Sparse-times-dense product `z * b`.
pub fn spmm(z: &SparseSym, b: &DenseMat) -> Result<DenseMat> {
    if z.n != b.rows {
        return Err(shape_err(
            "spmm",
            format!("{}x{} sparse x {:?}", z.n, z.n, b.shape()),
        ));
    }
    let k = b.cols;
    let mut out = DenseMat::zeros(z.n, k);
    if k == 0 {
        return Ok(out);
    }
    let kernel = |(i, dst): (usize, &mut [f64])| {
        let (cols, vals) = z.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            for (d, &bv) in dst.iter_mut().zip(b.row(j)) {
                *d += v * bv;
            }
        }
    };
    if z.nnz() * k >= PAR_THRESHOLD {
        out.data.par_chunks_mut(k).enumerate().for_each(kernel);
    } else {
        out.data.chunks_mut(k).enumerate().for_each(kernel);
    }
    Ok(out)
}

/// The data matrix `Z` of a factorization problem, dense (possibly
/// nonsymmetric) or sparse symmetric.
#[derive(Debug, Clone, PartialEq)]
pub enum DataMatrix {
    Dense(DenseMat),
    Sparse(SparseSym),
}

impl From<DenseMat> for DataMatrix {
    fn from(m: DenseMat) -> Self {
        DataMatrix::Dense(m)
    }
}

impl From<SparseSym> for DataMatrix {
    fn from(m: SparseSym) -> Self {
        DataMatrix::Sparse(m)
    }
}

impl DataMatrix {
    /// Row count; constructors guarantee the matrix is square.
    pub fn n(&self) -> usize {
        match self {
            DataMatrix::Dense(d) => d.rows(),
            DataMatrix::Sparse(s) => s.n(),
        }
    }

    pub fn is_square(&self) -> bool {
        match self {
            DataMatrix::Dense(d) => d.rows() == d.cols(),
            DataMatrix::Sparse(_) => true,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            DataMatrix::Dense(d) => d.get(i, j),
            DataMatrix::Sparse(s) => s.get(i, j),
        }
    }

    pub fn to_dense(&self) -> DenseMat {
        match self {
            DataMatrix::Dense(d) => d.clone(),
            DataMatrix::Sparse(s) => s.to_dense(),
        }
    }

    pub fn fro_norm_sq(&self) -> f64 {
        match self {
            DataMatrix::Dense(d) => fro_norm_sq(d),
            DataMatrix::Sparse(s) => s.fro_norm_sq(),
        }
    }

    pub fn max_entry(&self) -> f64 {
        match self {
            DataMatrix::Dense(d) => d.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max),
            DataMatrix::Sparse(s) => {
                let m = s.vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if s.nnz() < s.n * s.n {
                    m.max(0.0)
                } else {
                    m
                }
            }
        }
    }

    /// `Z * b`
    pub fn mul(&self, b: &DenseMat) -> Result<DenseMat> {
        match self {
            DataMatrix::Dense(d) => matmul(d, b),
            DataMatrix::Sparse(s) => spmm(s, b),
        }
    }

    /// `Z^T * b`
    pub fn mul_t(&self, b: &DenseMat) -> Result<DenseMat> {
        match self {
            DataMatrix::Dense(d) => d.t_matmul(b),
            DataMatrix::Sparse(s) => spmm(s, b),
        }
    }

    /// `(Z + Z^T)/2 * b`
    pub fn sym_mul(&self, b: &DenseMat) -> Result<DenseMat> {
        match self {
            DataMatrix::Dense(d) => {
                let mut out = matmul(d, b)?;
                out.axpy(1.0, &d.t_matmul(b)?);
                Ok(out.scaled(0.5))
            }
            DataMatrix::Sparse(s) => spmm(s, b),
        }
    }

    /// `(Z + Z^T)/2 * v` for a single vector.
    pub fn sym_mul_vec(&self, v: &[f64], out: &mut [f64]) {
        match self {
            DataMatrix::Dense(d) => {
                let n = d.rows();
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..n {
                    let row = d.row(i);
                    let mut acc = 0.0;
                    for (a, x) in row.iter().zip(v) {
                        acc += a * x;
                    }
                    out[i] += 0.5 * acc;
                    let vi = v[i];
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += 0.5 * a * vi;
                    }
                }
            }
            DataMatrix::Sparse(s) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let (cols, vals) = s.row(i);
                    *o = cols.iter().zip(vals).map(|(&j, &a)| a * v[j]).sum();
                }
            }
        }
    }

    /// `||X Y^T - Z||_F^2` accumulated over entries without forming `X Y^T`.
    ///
    /// Dense `Z` sums squared residuals entry by entry. Sparse `Z` uses
    /// `<X^T X, Y^T Y>` for the implicit zeros and corrects each stored entry.
    pub fn residual_fro_sq(&self, x: &DenseMat, y: &DenseMat) -> Result<f64> {
        let n = self.n();
        if x.rows() != n || y.rows() != n || x.cols() != y.cols() {
            return Err(shape_err(
                "residual_fro_sq",
                format!("Z {n}x{n}, X {:?}, Y {:?}", x.shape(), y.shape()),
            ));
        }
        Ok(match self {
            DataMatrix::Dense(d) => {
                let row_sum = |i: usize| -> f64 {
                    let xi = x.row(i);
                    let zi = d.row(i);
                    (0..n)
                        .map(|j| {
                            let p: f64 = xi.iter().zip(y.row(j)).map(|(a, b)| a * b).sum();
                            let r = p - zi[j];
                            r * r
                        })
                        .sum()
                };
                if n * n * x.cols() >= PAR_THRESHOLD {
                    let parts: Vec<f64> = (0..n).into_par_iter().map(row_sum).collect();
                    parts.iter().sum()
                } else {
                    (0..n).map(row_sum).sum()
                }
            }
            DataMatrix::Sparse(s) => {
                let mut acc = x.gram().dot(&y.gram());
                for i in 0..n {
                    let (cols, vals) = s.row(i);
                    let xi = x.row(i);
                    for (&j, &zij) in cols.iter().zip(vals) {
                        let p: f64 = xi.iter().zip(y.row(j)).map(|(a, b)| a * b).sum();
                        acc += (p - zij) * (p - zij) - p * p;
                    }
                }
                acc.max(0.0)
            }
        })
    }

    /// `||X Y^T - Z||_F^2` by the trace expansion
    /// `<X^T X, Y^T Y> - 2 <X, Z Y> + ||Z||_F^2`.
    pub fn residual_fro_sq_expansion(&self, x: &DenseMat, y: &DenseMat) -> Result<f64> {
        let zy = self.mul(y)?;
        if x.shape() != zy.shape() {
            return Err(shape_err("residual_fro_sq_expansion", "X and ZY differ"));
        }
        Ok(x.gram().dot(&y.gram()) - 2.0 * x.dot(&zy) + self.fro_norm_sq())
    }
}

/// Matrix-free linear operator on `R^dim`.
pub struct LinOp<'a> {
    dim: usize,
    apply: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync + 'a>,
}

impl<'a> LinOp<'a> {
    pub fn new(dim: usize, apply: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'a) -> Self {
        Self {
            dim,
            apply: Box::new(apply),
        }
    }

    /// Operator backed by an explicit square matrix.
    pub fn from_dense(m: &'a DenseMat) -> Self {
        assert_eq!(m.rows(), m.cols(), "LinOp::from_dense needs a square matrix");
        Self::new(m.rows(), move |x, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = m.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.apply)(x, out)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(x, &mut out);
        out
    }

    /// The operator `eta * I - self`.
    pub fn shifted(self, eta: f64) -> LinOp<'a> {
        let dim = self.dim;
        LinOp::new(dim, move |x, out| {
            (self.apply)(x, out);
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = eta * xi - *o;
            }
        })
    }

    /// Materializes the operator column by column; for tests and small sizes.
    pub fn to_dense(&self) -> DenseMat {
        let n = self.dim;
        let mut m = DenseMat::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            for i in 0..n {
                m.set(i, j, col[i]);
            }
            e[j] = 0.0;
        }
        m
    }
}

/// Result of a power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EigResult {
    /// Rayleigh quotient of the final iterate.
    pub value: f64,
    /// Unit-norm eigenvector estimate.
    pub vector: Vec<f64>,
    /// `||op(v) - value * v||`
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nv = norm(&v);
        if nv > 0.0 {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
}

/// Largest eigenvalue of a symmetric operator with nonnegative spectrum, by
/// power iteration from a seeded uniform random start.
///
/// Stops once `||op(v) - lambda v|| <= tol * max(1, |lambda|)` or after
/// `max_iter` products; the latter is reported through `converged = false`.
pub fn power_max_eig(op: &LinOp<'_>, tol: f64, max_iter: usize, seed: u64) -> Result<EigResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = random_unit(&mut rng, op.dim());
    power_iterate(op, tol, max_iter, start, &mut rng)
}

/// Power iteration from a caller-supplied start (e.g. the eigenvector of a
/// nearby operator). A zero start falls back to a seeded random vector.
pub fn power_max_eig_from(
    op: &LinOp<'_>,
    tol: f64,
    max_iter: usize,
    start: &[f64],
    seed: u64,
) -> Result<EigResult> {
    if start.len() != op.dim() {
        return Err(shape_err(
            "power_max_eig_from",
            format!("start of length {} for dim {}", start.len(), op.dim()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = norm(start);
    let v = if ns > 0.0 && ns.is_finite() {
        start.iter().map(|x| x / ns).collect()
    } else {
        random_unit(&mut rng, op.dim())
    };
    power_iterate(op, tol, max_iter, v, &mut rng)
}

const MAX_RESTARTS: usize = 8;

fn power_iterate(
    op: &LinOp<'_>,
    tol: f64,
    max_iter: usize,
    mut v: Vec<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<EigResult> {
    let dim = op.dim();
    if dim == 0 {
        return Ok(EigResult {
            value: 0.0,
            vector: Vec::new(),
            residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let mut w = vec![0.0; dim];
    let mut restarts = 0;
    let mut value: f64;
    let mut residual: f64;
    let mut iterations = 0;
    loop {
        op.apply_into(&v, &mut w);
        iterations += 1;
        if w.iter().any(|x| !x.is_finite()) {
            return Err(SymNmfError::Numerical {
                context: format!("power iteration, step {iterations}"),
            });
        }
        value = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        residual = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (b - value * a).powi(2))
            .sum::<f64>()
            .sqrt();
        let nw = norm(&w);
        if nw == 0.0 && restarts < MAX_RESTARTS {
            // start landed in the null space; the top eigenvalue may still be positive
            restarts += 1;
            v = random_unit(rng, dim);
            continue;
        }
        if residual <= tol * value.abs().max(1.0) {
            return Ok(EigResult {
                value,
                vector: v,
                residual,
                iterations,
                converged: true,
            });
        }
        if iterations >= max_iter || nw == 0.0 {
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    Ok(EigResult {
        value,
        vector: v,
        residual,
        iterations,
        converged: false,
    })
}

/// Computes `b * a^{-1}` for symmetric positive definite `a` through its
/// Cholesky factor; `a` is only read on and below the diagonal.
pub fn spd_solve_right(a: &DenseMat, b: &DenseMat) -> Result<DenseMat> {
    let k = a.rows();
    if a.cols() != k || b.cols() != k {
        return Err(shape_err(
            "spd_solve_right",
            format!("A {:?}, B {:?}", a.shape(), b.shape()),
        ));
    }
    let l = cholesky(a)?;
    let mut out = b.clone();
    // a symmetric: row r of b a^{-1} solves a x = b_r
    let solve = |row: &mut [f64]| {
        for i in 0..k {
            let mut s = row[i];
            for j in 0..i {
                s -= l[i * k + j] * row[j];
            }
            row[i] = s / l[i * k + i];
        }
        for i in (0..k).rev() {
            let mut s = row[i];
            for j in i + 1..k {
                s -= l[j * k + i] * row[j];
            }
            row[i] = s / l[i * k + i];
        }
    };
    if k > 0 {
        out.data.chunks_mut(k).for_each(solve);
    }
    if !out.is_finite() {
        return Err(SymNmfError::Numerical {
            context: "spd_solve_right".into(),
        });
    }
    Ok(out)
}

fn cholesky(a: &DenseMat) -> Result<Vec<f64>> {
    let k = a.rows();
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(SymNmfError::Singular { index: i, pivot: s });
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    Ok(l)
}
