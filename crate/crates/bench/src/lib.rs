//! Fixtures shared by the benchmarks.

use symnmf_core::problem::sparsify;
use symnmf_core::solver::{self, SolverState};
use symnmf_core::{gen_dataset, GenSpec, SolverConfig, SymProblem};

/// Dense clustered similarity data, `n` points in four clusters.
pub fn clustered(n: usize, k: usize) -> SymProblem {
    gen_dataset(&GenSpec::adjacency(n, k, 0)).expect("valid generator spec")
}

/// Same data stored sparse, with entries below `cutoff` dropped.
pub fn clustered_sparse(n: usize, k: usize, cutoff: f64) -> SymProblem {
    let dense = clustered(n, k).z().to_dense().map(|v| if v < cutoff { 0.0 } else { v });
    SymProblem::new(sparsify(&dense).expect("square"), k).expect("valid problem")
}

/// Solver state after `warm` iterations, so timings reflect the steady phase.
pub fn warm_state(prob: &SymProblem, cfg: &SolverConfig, warm: usize) -> SolverState {
    let mut s = solver::init(prob, cfg).expect("feasible init");
    for _ in 0..warm {
        solver::step(&mut s, prob, cfg).expect("step");
    }
    s
}
