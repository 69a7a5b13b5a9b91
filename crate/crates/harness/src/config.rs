//! Experiment configuration, read from TOML.
//!
//! ```toml
//! mode = "rate_in_h"
//! replicates = 20
//! base_seed = 1
//! n_list = [100000]
//! kernel = "gaussian"
//!
//! [distribution]
//! kind = "uniform_cube"
//! dim = 1
//!
//! [h_grid]
//! l_n = 0.05
//! h_max = 0.4
//! count = 12
//!
//! [x_grid]
//! step = 0.005
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use kdvol::grid::BandwidthSpec;
use kdvol::{BandwidthGrid, DistributionKind, EvalGrid, Kernel, MultiIndex, ReferenceDistribution};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    RateInH,
    RateInN,
    Voldim,
    Bounds,
    Covering,
    MomentScaling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    #[default]
    Gaussian,
    Epanechnikov,
    Uniform,
    Triangular,
}

impl KernelSpec {
    pub fn build(self, dim: usize) -> Kernel {
        match self {
            KernelSpec::Gaussian => Kernel::gaussian(dim),
            KernelSpec::Epanechnikov => Kernel::epanechnikov(dim),
            KernelSpec::Uniform => Kernel::uniform(dim),
            KernelSpec::Triangular => Kernel::triangular(dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Lattice step; defaults per distribution kind.
    pub step: Option<f64>,
    /// Add atoms and singular points to the grid.
    #[serde(default = "yes")]
    pub include_candidates: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    #[default]
    Median,
    Q10,
    Q90,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `sup_x` at each fixed bandwidth.
    #[default]
    Fixed,
    /// `sup` over grid bandwidths `>= h`.
    Ray,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    #[serde(default)]
    pub statistic: Statistic,
    #[serde(default)]
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoldimSource {
    #[default]
    Oracle,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoldimSpec {
    #[serde(default)]
    pub source: VoldimSource,
    /// Empirical sample size; defaults to the first entry of `n_list`.
    pub n: Option<usize>,
    pub radii: Option<Vec<f64>>,
    /// Fitting window. Defaults to `[2^-8, 2^-3] * diam` for the oracle and,
    /// for the empirical source, to the radii whose sup probability lies in
    /// `probability_band`.
    pub window: Option<[f64; 2]>,
    /// Probability band selecting the empirical window; defaults to `[0.01, 0.3]`.
    pub probability_band: Option<[f64; 2]>,
    /// Exponent for the assumption check; defaults to the analytic volume dimension.
    pub nu: Option<f64>,
    /// Scales for the box-counting estimate (empirical source only).
    pub box_deltas: Option<Vec<f64>>,
    /// Radii for the correlation-dimension estimate (empirical source only).
    pub correlation_radii: Option<Vec<f64>>,
    /// Subsample size for the correlation dimension.
    pub correlation_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default = "one")]
    pub universal_c: f64,
    #[serde(default = "one")]
    pub a: f64,
    /// VC dimension; defaults to the ambient dimension.
    pub nu: Option<f64>,
    #[serde(default = "yes")]
    pub dimension_exact: bool,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            eps: 0.0,
            universal_c: 1.0,
            a: 1.0,
            nu: None,
            dimension_exact: true,
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoveringSpec {
    /// Bandwidths; defaults to the `h_grid` values.
    pub hs: Option<Vec<f64>>,
    /// Radii as fractions of `||D^s K||_∞`.
    pub eta_fractions: Option<Vec<f64>>,
    /// Size of the measure `Q`; defaults to 200.
    pub q_n: Option<usize>,
    /// Domain radius `R`; defaults to the distribution's.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSpec {
    #[serde(default = "two")]
    pub k: f64,
}

impl Default for MomentSpec {
    fn default() -> Self {
        Self { k: 2.0 }
    }
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub distribution: DistributionKind,
    #[serde(default)]
    pub kernel: KernelSpec,
    /// Derivative multi-index; zero when absent.
    #[serde(default)]
    pub s: Option<Vec<u32>>,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub h_grid: Option<BandwidthSpec>,
    #[serde(default)]
    pub x_grid: GridSpec,
    #[serde(default = "one_replicate")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub fit: FitSpec,
    #[serde(default)]
    pub voldim: VoldimSpec,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub covering: CoveringSpec,
    #[serde(default)]
    pub moments: MomentSpec,
}

fn one_replicate() -> usize {
    1
}

/// Distribution, kernel and grids built from a configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub dist: ReferenceDistribution,
    pub kernel: Kernel,
    pub s: MultiIndex,
    pub x_grid: EvalGrid,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(HarnessError::Config("replicates must be at least 1".into()));
        }
        if matches!(self.mode, Mode::RateInH | Mode::RateInN) {
            if self.n_list.is_empty() {
                return Err(HarnessError::Config("n_list must be nonempty".into()));
            }
            if self.h_grid.is_none() {
                return Err(HarnessError::Config("h_grid is required".into()));
            }
        }
        if self.n_list.contains(&0) {
            return Err(HarnessError::Config("sample sizes must be positive".into()));
        }
        self.setup()?;
        if let Some(spec) = &self.h_grid {
            BandwidthGrid::from_spec(spec)?;
        }
        Ok(())
    }

    pub fn setup(&self) -> Result<Setup> {
        let dist = ReferenceDistribution::new(self.distribution.clone())?;
        let d = dist.ambient_dim();
        let kernel = self.kernel.build(d);
        let s = match &self.s {
            Some(v) => {
                if v.len() != d {
                    return Err(HarnessError::Config(format!(
                        "derivative index has {} components, distribution dimension is {d}",
                        v.len()
                    )));
                }
                MultiIndex::new(v.clone())
            }
            None => MultiIndex::zero(d),
        };
        let step = self.x_grid.step.unwrap_or_else(|| default_step(&dist));
        let mut x_grid = EvalGrid::for_distribution(&dist, step)?;
        if self.x_grid.include_candidates {
            x_grid = x_grid.with_points(&dist.candidate_points());
        }
        Ok(Setup {
            dist,
            kernel,
            s,
            x_grid,
        })
    }

    pub fn bandwidths(&self) -> Result<BandwidthGrid> {
        let spec = self
            .h_grid
            .as_ref()
            .ok_or_else(|| HarnessError::Config("h_grid is required".into()))?;
        Ok(BandwidthGrid::from_spec(spec)?)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Default lattice step, sized so grids stay near or below 2000 points.
pub fn default_step(dist: &ReferenceDistribution) -> f64 {
    match dist.kind() {
        DistributionKind::UniformCube { dim: 1 } => 0.005,
        DistributionKind::UniformCube { dim: 2 } => 0.025,
        DistributionKind::UniformCube { .. } => 0.1,
        DistributionKind::UnboundedBall { dim: 1, .. } => 0.01,
        DistributionKind::UnboundedBall { dim: 2, .. } => 0.04,
        DistributionKind::UnboundedBall { .. } => 0.15,
        DistributionKind::UniformCircle { radius } => 0.01 * radius,
        DistributionKind::UniformSphere { radius, manifold_dim } => radius * 0.05 * *manifold_dim as f64,
        DistributionKind::PointMasses { .. } => 1.0,
        DistributionKind::Mixture { .. } => 0.04,
    }
}
