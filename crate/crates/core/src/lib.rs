//! Symmetric nonnegative matrix factorization: `min ||X X^T - Z||_F^2` over
//! `X >= 0`, solved by a nonconvex splitting method, with PGD and ANLS
//! baselines, a KKT progress metric and global/local optimality certificates.

pub mod baselines;
pub mod certificates;
pub mod error;
pub mod matrix;
pub mod problem;
pub mod solver;
pub mod trace;

pub use baselines::{anls_run, pgd_run, BaselineAlgorithm, BaselineConfig, BaselineOutput};
pub use certificates::{
    global_certificate, local_certificate, local_certificate_k1, local_t_op, progress_p, Certificate,
    CertificateKind, CertifyOptions, ProgressMetrics, Verdict,
};
pub use error::{Result, SymNmfError};
pub use matrix::{DataMatrix, DenseMat, LinOp, SparseSym};
pub use problem::{
    gen_dataset, grad_f, objective, rel_objective, stationarity_gap_inf, GenKind, GenSpec, SymProblem,
};
pub use solver::{project_row, RhoInit, RunOutput, SolverConfig, SolverState, StopReason};
pub use trace::{IterRecord, IterTrace, CSV_HEADER};
