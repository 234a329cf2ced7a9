//! Experiment configuration: an optional TOML file, then command-line overrides.
//!
//! ```toml
//! solvers = ["ns", "pgd", "anls"]
//! restarts = 20
//! seed = 0
//! output_dir = "runs/adjacency"
//!
//! [input.generate]
//! kind = "adjacency"
//! n = 200
//! k = 4
//!
//! [emit]
//! certificates = true
//!
//! [ns]
//! stop_eps = 1e-10
//! ```
//!
//! A file input is written `[input.file]` with `path` and `k`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symnmf_core::problem::{apportion, ADJACENCY_MEANS, ADJACENCY_RATIOS};
use symnmf_core::{BaselineAlgorithm, BaselineConfig, CertifyOptions, GenKind, GenSpec, SolverConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Nonconvex splitting.
    Ns,
    /// Projected gradient descent.
    Pgd,
    /// Alternating nonnegative least squares.
    Anls,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Ns => "ns",
            SolverKind::Pgd => "pgd",
            SolverKind::Anls => "anls",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSpec {
    Generate(GenSpec),
    File { path: PathBuf, k: usize },
}

impl InputSpec {
    pub fn k(&self) -> usize {
        match self {
            InputSpec::Generate(g) => g.k,
            InputSpec::File { k, .. } => *k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Emit {
    pub traces: bool,
    pub summary: bool,
    pub certificates: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self {
            traces: true,
            summary: true,
            certificates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputSpec,
    pub solvers: Vec<SolverKind>,
    pub restarts: usize,
    /// Restart `r` uses seed `seed + r`.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub emit: Emit,
    pub ns: SolverConfig,
    pub pgd: BaselineConfig,
    pub anls: BaselineConfig,
    pub certify: CertifyOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: InputSpec::Generate(GenSpec::adjacency(200, 4, 0)),
            solvers: vec![SolverKind::Ns, SolverKind::Pgd, SolverKind::Anls],
            restarts: 20,
            seed: 0,
            output_dir: PathBuf::from("symnmf-out"),
            emit: Emit::default(),
            ns: SolverConfig::default(),
            pgd: BaselineConfig::pgd(),
            anls: BaselineConfig::anls(),
            certify: CertifyOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks invariants and pins each baseline config to its own algorithm.
    pub fn validate(&mut self) -> Result<()> {
        if self.restarts == 0 {
            return Err(CliError::Config("restarts must be >= 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(CliError::Config("select at least one solver".into()));
        }
        let mut seen = Vec::new();
        self.solvers.retain(|s| {
            let fresh = !seen.contains(s);
            seen.push(*s);
            fresh
        });
        if self.input.k() == 0 {
            return Err(CliError::Config("k must be >= 1".into()));
        }
        if let InputSpec::Generate(g) = &mut self.input {
            fill_clusters(g);
            g.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.pgd.algorithm = BaselineAlgorithm::Pgd;
        self.anls.algorithm = BaselineAlgorithm::Anls;
        let checks = [
            self.ns.validate(),
            self.pgd.validate(),
            self.anls.validate(),
            self.certify.deltas().map(|_| ()),
        ];
        for c in checks {
            c.map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Adjacency specs may omit clusters: means default to the four-cluster
/// benchmark and sizes are apportioned from its ratios (equal parts for
/// other cluster counts).
fn fill_clusters(g: &mut GenSpec) {
    if g.kind != GenKind::Adjacency {
        return;
    }
    if g.cluster_means.is_empty() {
        g.cluster_means = ADJACENCY_MEANS.to_vec();
    }
    if g.cluster_sizes.is_empty() {
        g.cluster_sizes = if g.cluster_means.len() == ADJACENCY_RATIOS.len() {
            apportion(g.n, &ADJACENCY_RATIOS)
        } else {
            apportion(g.n, &vec![1; g.cluster_means.len()])
        };
    }
}

/// Command-line settings layered over the file configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub generate: Option<GenKind>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub solvers: Vec<SolverKind>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub certify: bool,
    pub stop_eps: Option<f64>,
    pub max_iters: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if self.input.is_some() && self.generate.is_some() {
            return Err(CliError::Config("--input and --generate are mutually exclusive".into()));
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(path) = &self.input {
            if self.n.is_some() {
                return Err(CliError::Config("--n only applies to generated data".into()));
            }
            let k = self.k.unwrap_or(cfg.input.k());
            cfg.input = InputSpec::File { path: path.clone(), k };
        } else if let Some(kind) = self.generate {
            let (n0, k0) = match &cfg.input {
                InputSpec::Generate(g) => (g.n, g.k),
                InputSpec::File { k, .. } => (200, *k),
            };
            let n = self.n.unwrap_or(n0);
            let k = self.k.unwrap_or(k0);
            cfg.input = InputSpec::Generate(match kind {
                GenKind::LowRank => GenSpec::low_rank(n, k, cfg.seed),
                GenKind::FullRank => GenSpec::full_rank(n, k, cfg.seed),
                GenKind::Adjacency => GenSpec::adjacency(n, k, cfg.seed),
            });
        } else {
            match &mut cfg.input {
                InputSpec::Generate(g) => {
                    if let Some(n) = self.n {
                        g.n = n;
                        g.cluster_sizes.clear();
                    }
                    if let Some(k) = self.k {
                        g.k = k;
                    }
                }
                InputSpec::File { k, .. } => {
                    if self.n.is_some() {
                        return Err(CliError::Config("--n only applies to generated data".into()));
                    }
                    if let Some(kk) = self.k {
                        *k = kk;
                    }
                }
            }
        }
        if !self.solvers.is_empty() {
            cfg.solvers = self.solvers.clone();
        }
        if let Some(r) = self.restarts {
            cfg.restarts = r;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if self.certify {
            cfg.emit.certificates = true;
        }
        if let Some(eps) = self.stop_eps {
            cfg.ns.stop_eps = eps;
        }
        if let Some(m) = self.max_iters {
            cfg.ns.max_outer_iters = m;
            cfg.pgd.max_iters = m;
            cfg.anls.max_iters = m;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_partial_sections() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            solvers = ["ns", "anls"]
            restarts = 3
            output_dir = "out"

            [input.generate]
            kind = "low_rank"
            n = 30
            k = 3

            [ns]
            stop_eps = 1e-6
            "#,
        )
        .unwrap();
        assert_eq!(cfg.solvers, vec![SolverKind::Ns, SolverKind::Anls]);
        assert_eq!(cfg.ns.stop_eps, 1e-6);
        assert_eq!(cfg.ns.gp_max_iters, SolverConfig::default().gp_max_iters);
        match &cfg.input {
            InputSpec::Generate(g) => assert_eq!((g.kind, g.n, g.k), (GenKind::LowRank, 30, 3)),
            other => panic!("{other:?}"),
        }
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn file_input_section() {
        let cfg = ExperimentConfig::from_toml("[input.file]\npath = \"z.mtx\"\nk = 5\n").unwrap();
        assert_eq!(
            cfg.input,
            InputSpec::File {
                path: "z.mtx".into(),
                k: 5
            }
        );
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(matches!(
            ExperimentConfig::from_toml("solvers = [\"cd\"]"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(ExperimentConfig::from_toml("restart = 3"), Err(CliError::Config(_))));
        let mut cfg = ExperimentConfig {
            restarts: 0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let mut cfg = ExperimentConfig {
            solvers: vec![],
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn adjacency_clusters_filled_in() {
        let mut cfg = ExperimentConfig::from_toml("[input.generate]\nkind = \"adjacency\"\nn = 50\nk = 4\n").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.input, InputSpec::Generate(GenSpec::adjacency(50, 4, 0)));

        let mut cfg = ExperimentConfig::default();
        Overrides {
            n: Some(60),
            ..Default::default()
        }
        .apply(&mut cfg)
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.input, InputSpec::Generate(GenSpec::adjacency(60, 4, 0)));
    }

    #[test]
    fn validate_dedups_and_pins_algorithms() {
        let mut cfg = ExperimentConfig {
            solvers: vec![SolverKind::Pgd, SolverKind::Ns, SolverKind::Pgd],
            anls: BaselineConfig::pgd(),
            ..Default::default()
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.solvers, vec![SolverKind::Pgd, SolverKind::Ns]);
        assert_eq!(cfg.anls.algorithm, BaselineAlgorithm::Anls);
    }

    #[test]
    fn overrides_replace_input_and_budgets() {
        let mut cfg = ExperimentConfig::default();
        Overrides {
            generate: Some(GenKind::LowRank),
            n: Some(40),
            k: Some(2),
            seed: Some(7),
            max_iters: Some(50),
            stop_eps: Some(1e-4),
            certify: true,
            ..Default::default()
        }
        .apply(&mut cfg)
        .unwrap();
        assert_eq!(cfg.input, InputSpec::Generate(GenSpec::low_rank(40, 2, 7)));
        assert_eq!(cfg.seed, 7);
        assert_eq!((cfg.ns.max_outer_iters, cfg.pgd.max_iters, cfg.anls.max_iters), (50, 50, 50));
        assert_eq!(cfg.ns.stop_eps, 1e-4);
        assert!(cfg.emit.certificates);

        let mut cfg = ExperimentConfig::default();
        Overrides {
            input: Some("z.mtx".into()),
            k: Some(3),
            ..Default::default()
        }
        .apply(&mut cfg)
        .unwrap();
        assert_eq!(
            cfg.input,
            InputSpec::File {
                path: "z.mtx".into(),
                k: 3
            }
        );

        let both = Overrides {
            input: Some("z.mtx".into()),
            generate: Some(GenKind::Adjacency),
            ..Default::default()
        };
        assert!(both.apply(&mut ExperimentConfig::default()).is_err());
    }
}
