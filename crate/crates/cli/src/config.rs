//! Experiment configuration documents.

use std::path::PathBuf;

use bridgekernel::kernel::McParams;
use bridgekernel::potentials::{ScalarPotentialSpec, VectorPotentialSpec};
use bridgekernel::random_fields::GaussianFieldSpec;
use bridgekernel::region::BoxRegion;
use bridgekernel::spectral::{Lattice, SpectralFunction};
use serde::{Deserialize, Serialize};

use crate::RunError;

/// Version of the configuration and output schema.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Root of every random stream used by the run.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_samples: usize,
    pub n_steps: usize,
}

/// Cube `[−length/2, length/2]^dim` with `n_per_dim` cell-centred sites per
/// axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n_per_dim: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl EnergyGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n).map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldGridConfig {
    pub half_width: f64,
    pub spacing: f64,
}

/// Initial datum `exp(−|x|² / (2 width²))` for the evolution check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialValueConfig {
    pub t: f64,
    pub dt: f64,
    pub width: f64,
}

fn zero_a() -> VectorPotentialSpec {
    VectorPotentialSpec::Zero
}

fn zero_v() -> ScalarPotentialSpec {
    ScalarPotentialSpec::Zero
}

fn yes() -> bool {
    true
}

fn default_tail_tolerance() -> f64 {
    1e-3
}

fn default_slope_range() -> (f64, f64) {
    (-2.5, -1.5)
}

/// One subcommand with its parameters; the `name` field selects it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    Kernel {
        x: Vec<f64>,
        y: Vec<f64>,
        t: f64,
        #[serde(default = "zero_a")]
        a: VectorPotentialSpec,
        #[serde(default = "zero_v")]
        v: ScalarPotentialSpec,
    },
    Hermiticity {
        x: Vec<f64>,
        y: Vec<f64>,
        t: f64,
        #[serde(default = "zero_a")]
        a: VectorPotentialSpec,
        #[serde(default = "zero_v")]
        v: ScalarPotentialSpec,
    },
    Semigroup {
        x: Vec<f64>,
        z: Vec<f64>,
        t: f64,
        t_prime: f64,
        #[serde(default = "zero_a")]
        a: VectorPotentialSpec,
        #[serde(default = "zero_v")]
        v: ScalarPotentialSpec,
        quad_box: BoxRegion,
        quad_n: usize,
        #[serde(default = "default_tail_tolerance")]
        tail_tolerance: f64,
        /// Largest admissible `budget.total / |k_{t+t'}|`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_budget_fraction: Option<f64>,
    },
    BoundEnvelope {
        t: f64,
        delta: f64,
        #[serde(default = "zero_a")]
        a: VectorPotentialSpec,
        #[serde(default = "zero_v")]
        v: ScalarPotentialSpec,
        pairs: Vec<(Vec<f64>, Vec<f64>)>,
    },
    Diamagnetic {
        x: Vec<f64>,
        y: Vec<f64>,
        t: f64,
        a: VectorPotentialSpec,
        #[serde(default = "zero_v")]
        v: ScalarPotentialSpec,
    },
    TruncationRate {
        x: Vec<f64>,
        y: Vec<f64>,
        t: f64,
        #[serde(default = "zero_a")]
        a: VectorPotentialSpec,
        v: ScalarPotentialSpec,
        radii: Vec<f64>,
        #[serde(default)]
        rho: f64,
        #[serde(default)]
        rho_tilde: f64,
        #[serde(default = "default_slope_range")]
        slope_range: (f64, f64),
    },
    GaussianIdentity {
        x: Vec<f64>,
        y: Vec<f64>,
        t: f64,
        field: GaussianFieldSpec,
        n_field_samples: usize,
    },
    AveragedKernel {
        x: Vec<f64>,
        y: Vec<f64>,
        t: f64,
        #[serde(default = "zero_a")]
        a: VectorPotentialSpec,
        field: GaussianFieldSpec,
        field_grid: FieldGridConfig,
        n_fields: usize,
        samples_per_field: usize,
    },
    AveragedBounds {
        t: f64,
        #[serde(default = "zero_a")]
        a: VectorPotentialSpec,
        field: GaussianFieldSpec,
        pairs: Vec<(Vec<f64>, Vec<f64>)>,
    },
    OracleCompare {
        x: Vec<f64>,
        y: Vec<f64>,
        t: f64,
        #[serde(default = "zero_a")]
        a: VectorPotentialSpec,
        #[serde(default = "zero_v")]
        v: ScalarPotentialSpec,
        #[serde(default = "yes")]
        box_doubling: bool,
        #[serde(default = "yes")]
        spacing_halving: bool,
    },
    SpectralChecks {
        #[serde(default = "zero_a")]
        a: VectorPotentialSpec,
        #[serde(default = "zero_v")]
        v: ScalarPotentialSpec,
        /// Spectral projection onto `]−∞, energy_cut[`.
        energy_cut: f64,
        function: SpectralFunction,
        t_checks: Vec<f64>,
        projection_t: f64,
        /// Site pairs for the functional-calculus check; the centre site by
        /// default.
        #[serde(default)]
        sites: Vec<(usize, usize)>,
        initial_value: InitialValueConfig,
    },
    Ids {
        #[serde(default = "zero_a")]
        a: VectorPotentialSpec,
        field: GaussianFieldSpec,
        #[serde(default = "zero_v")]
        background: ScalarPotentialSpec,
        gamma_half_width: f64,
        n_realizations: usize,
        energies: EnergyGrid,
    },
    Laplace {
        field: GaussianFieldSpec,
        #[serde(default = "zero_v")]
        background: ScalarPotentialSpec,
        gamma_half_width: f64,
        n_realizations: usize,
        t_list: Vec<f64>,
        n_bins: usize,
    },
    Upsilon {
        xi: Vec<f64>,
        dim: usize,
    },
    KatoKappa {
        v: ScalarPotentialSpec,
        t: f64,
        n_s: usize,
        n_mc: usize,
        probes: Vec<Vec<f64>>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Kernel { .. } => "kernel",
            Self::Hermiticity { .. } => "hermiticity",
            Self::Semigroup { .. } => "semigroup",
            Self::BoundEnvelope { .. } => "bound-envelope",
            Self::Diamagnetic { .. } => "diamagnetic",
            Self::TruncationRate { .. } => "truncation-rate",
            Self::GaussianIdentity { .. } => "gaussian-identity",
            Self::AveragedKernel { .. } => "averaged-kernel",
            Self::AveragedBounds { .. } => "averaged-bounds",
            Self::OracleCompare { .. } => "oracle-compare",
            Self::SpectralChecks { .. } => "spectral-checks",
            Self::Ids { .. } => "ids",
            Self::Laplace { .. } => "laplace",
            Self::Upsilon { .. } => "upsilon",
            Self::KatoKappa { .. } => "kato-kappa",
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let config: Self = serde_json::from_str(text).map_err(|e| RunError::Schema(e.to_string()))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(RunError::Schema(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                config.schema_version
            )));
        }
        Ok(config)
    }

    pub fn mc_params(&self) -> Result<McParams, RunError> {
        let mc = self.mc.ok_or_else(|| RunError::Schema(format!("`{}` requires an `mc` block", self.command.name())))?;
        Ok(McParams::new(mc.n_samples, mc.n_steps, self.seed))
    }

    pub fn lattice(&self) -> Result<Lattice, RunError> {
        let g = self.grid.ok_or_else(|| RunError::Schema(format!("`{}` requires a `grid` block", self.command.name())))?;
        Ok(Lattice::new(g.dim, g.n_per_dim, g.length)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_kernel_config() {
        let c = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "seed": 5, "mc": {"n_samples": 10, "n_steps": 4},
                "command": {"name": "kernel", "x": [0.0], "y": [1.0], "t": 1.0}}"#,
        )
        .unwrap();
        assert_eq!(c.command.name(), "kernel");
        assert_eq!(c.output.format, Format::Json);
        assert_eq!(c.mc_params().unwrap().seed, 5);
    }

    #[test]
    fn rejects_unknown_fields_and_versions() {
        let bad_field = r#"{"schema_version": 1, "command": {"name": "upsilon", "xi": [0.0], "dim": 1, "extra": 2}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad_field), Err(RunError::Schema(_))));
        let bad_top = r#"{"schema_version": 1, "bogus": 1, "command": {"name": "upsilon", "xi": [0.0], "dim": 1}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad_top), Err(RunError::Schema(_))));
        let bad_version = r#"{"schema_version": 9, "command": {"name": "upsilon", "xi": [0.0], "dim": 1}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad_version), Err(RunError::Schema(_))));
        let bad_name = r#"{"schema_version": 1, "command": {"name": "nope"}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad_name), Err(RunError::Schema(_))));
    }

    #[test]
    fn missing_blocks_are_schema_errors() {
        let c = ExperimentConfig::from_json(r#"{"schema_version": 1, "command": {"name": "kernel", "x": [0.0], "y": [0.0], "t": 1.0}}"#)
            .unwrap();
        assert!(matches!(c.mc_params(), Err(RunError::Schema(_))));
        assert!(matches!(c.lattice(), Err(RunError::Schema(_))));
    }

    #[test]
    fn config_round_trips() {
        let text = r#"{"schema_version": 1, "seed": 3, "grid": {"dim": 1, "n_per_dim": 8, "length": 4.0},
            "output": {"format": "csv"},
            "command": {"name": "ids", "field": {"kind": "squared_exponential", "variance": 1.0, "length": 1.0},
                        "gamma_half_width": 1.0, "n_realizations": 2, "energies": {"lo": 0.0, "hi": 1.0, "n": 3}}}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        let again = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }
}
