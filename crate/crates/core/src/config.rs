//! TOML run configuration for the `conekit` binary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curvature::RateQuantity;
use crate::error::{ConeError, Result};
use crate::holder::DistanceConvention;
use crate::model_geometry::{BaseMetric, ConeParams, CorrectionSign, DomainSpec, HermitianWeight, ReferenceMetric};
use crate::solver::{SolveOptions, SourceSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Metric,
    SymbolicVerify,
    CurvatureScan,
    RateFit,
    Holder,
    Solve,
    Sweep,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Metric => "metric",
            Command::SymbolicVerify => "symbolic-verify",
            Command::CurvatureScan => "curvature-scan",
            Command::RateFit => "rate-fit",
            Command::Holder => "holder",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Defaults to the command given on the command line.
    #[serde(default)]
    pub command: Option<Command>,
    /// Key of this run in merged reports; defaults to the config file stem.
    #[serde(default)]
    pub run_id: Option<String>,
    pub params: ConeParams,
    pub domain: DomainSpec,
    #[serde(default = "default_weight")]
    pub weight: String,
    #[serde(default = "default_source")]
    pub source: String,
    #[serde(default)]
    pub source_mu_coupled: bool,
    #[serde(default = "default_out")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub base: BaseSection,
    #[serde(default)]
    pub sign: CorrectionSign,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub holder: HolderSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub report: ReportSection,
}

fn default_weight() -> String {
    "unit".into()
}

fn default_source() -> String {
    "zero".into()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Flat base metric `scale * I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSection {
    pub scale: f64,
}

impl Default for BaseSection {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub r_max: f64,
    pub r_min: f64,
    pub radii: usize,
    pub theta: f64,
    pub quantity: RateQuantity,
    /// Relative tolerance of the rate check.
    pub rate_tolerance: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            r_max: 1e-1,
            r_min: 1e-3,
            radii: 13,
            theta: 0.3,
            quantity: RateQuantity::Normalized,
            rate_tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolderSection {
    pub alpha: f64,
    /// `r2tau` (`|z_1|^{2 tau}`), `re_z` or `phase` (`Re z_1 / |z_1|`).
    pub function: String,
    pub radial: usize,
    pub angular: usize,
    pub pair_budget: usize,
    pub convention: DistanceConvention,
    /// Refinement levels for the divergence trend.
    pub levels: usize,
}

impl Default for HolderSection {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            function: "r2tau".into(),
            radial: 64,
            angular: 16,
            pair_budget: 2_000_000,
            convention: DistanceConvention::XiMap,
            levels: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    /// ε-continuation schedule; empty means a single solve at `params.epsilon`.
    pub schedule: Vec<f64>,
    pub tol: f64,
    pub max_iterations: usize,
    pub with_curvature: bool,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            schedule: Vec::new(),
            tol: 1e-10,
            max_iterations: 60,
            with_curvature: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// First entry is the naive run, the rest are compared against it.
    pub c_values: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub random_pairs: usize,
    /// Largest allowed spread of the good-metric infimum.
    pub max_good_spread: f64,
    /// Smallest required decrease of the naive infimum.
    pub min_naive_decrease: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            c_values: vec![0.0, 0.5],
            epsilons: vec![1e-1, 1e-2, 1e-3, 1e-4],
            random_pairs: 16,
            max_good_spread: 2.0,
            min_naive_decrease: 10.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    /// Report files to merge, relative to the config file.
    pub inputs: Vec<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConeError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Parse and resolve relative paths against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConeError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        cfg.report.inputs = cfg.report.inputs.iter().map(|p| dir.join(p)).collect();
        if cfg.run_id.is_none() {
            cfg.run_id = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    /// Structural checks that do not need the engines.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.domain.validate()?;
        self.domain.validate_for(&self.params)?;
        HermitianWeight::from_catalog(&self.weight, self.domain.smooth_period)?;
        SourceSpec::from_catalog(&self.source)?;
        if !(self.base.scale >= 0.0) {
            return Err(ConeError::Config("base.scale must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn reference(&self) -> Result<ReferenceMetric> {
        let weight = HermitianWeight::from_catalog(&self.weight, self.domain.smooth_period)?;
        let base = BaseMetric::scaled_flat(self.domain.dim, self.base.scale);
        Ok(ReferenceMetric::new(self.params, weight, base)?.with_sign(self.sign))
    }

    pub fn source_spec(&self) -> Result<SourceSpec> {
        let mut s = SourceSpec::from_catalog(&self.source)?;
        s.mu_coupled = self.source_mu_coupled;
        Ok(s)
    }

    pub fn solve_options(&self, workers: usize) -> SolveOptions {
        SolveOptions {
            tol: self.solve.tol,
            max_iterations: self.solve.max_iterations,
            workers,
            ..SolveOptions::default()
        }
    }
}
