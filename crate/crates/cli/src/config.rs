use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use singmap::closed_forms::{KerrParams, TangentParams};
use singmap::cylinder::Renormalizer;
use singmap::grid::CylinderGrid;
use singmap::solver::SolveConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
    pub n_theta: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { t_min: 2.0, t_max: 8.0, n_t: 65, n_theta: 64 }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<CylinderGrid, CliError> {
        CylinderGrid::new(self.t_min, self.t_max, self.n_t, self.n_theta).map_err(CliError::config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RenormChoice {
    TranslationInvariant,
    LinearGrowth,
}

impl RenormChoice {
    pub fn build(self) -> Renormalizer {
        match self {
            Self::TranslationInvariant => Renormalizer::TranslationInvariant,
            Self::LinearGrowth => Renormalizer::LinearGrowth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Kerr,
    Tangent,
    /// `Φ = 0`, `v = 0`.
    Constant,
}

/// Which closed-form state a command samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub kind: SourceKind,
    pub m: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self { kind: SourceKind::Kerr, m: 1.0, a: 1.0, b: 0.0 }
    }
}

impl SourceConfig {
    pub fn kerr(&self) -> Result<KerrParams, CliError> {
        KerrParams::new(self.m).map_err(CliError::config)
    }

    pub fn tangent(&self) -> Result<TangentParams, CliError> {
        TangentParams::new(self.a, self.b).map_err(CliError::config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub window: Option<(f64, f64)>,
    pub exclude: usize,
    pub min_slices: usize,
    pub min_r2: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        let d = singmap::asymptotics::TangentFitOptions::default();
        Self { window: d.window, exclude: d.exclude, min_slices: d.min_slices, min_r2: d.min_r2 }
    }
}

/// Seeded smooth perturbation of the lower Dirichlet datum of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub amplitude: f64,
    /// Number of Legendre modes `P_1 … P_modes` with random weights.
    pub modes: usize,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self { amplitude: 0.0, modes: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub twist: bool,
    pub k: usize,
    pub n_theta: usize,
    /// Azimuthal number of the linearized operator.
    pub azimuthal: u32,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { twist: false, k: 5, n_theta: 512, azimuthal: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub renormalizer: RenormChoice,
    pub source: SourceConfig,
    pub solver: SolveConfig,
    pub fit: FitConfig,
    pub perturb: PerturbConfig,
    pub spectrum: SpectrumConfig,
    /// Square grids `n × n` for the residual ladder.
    pub ladder: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub rbar: f64,
    /// State file written by an earlier `solve`.
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            renormalizer: RenormChoice::TranslationInvariant,
            source: SourceConfig::default(),
            solver: SolveConfig::default(),
            fit: FitConfig::default(),
            perturb: PerturbConfig::default(),
            spectrum: SpectrumConfig::default(),
            ladder: vec![64, 128, 256],
            epsilons: (2..=6).map(|k| 2f64.powi(-k)).collect(),
            rbar: 1.0,
            input: None,
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.build()?;
        self.solver.validate().map_err(CliError::config)?;
        let bad = |m: String| Err(CliError::Config(m));
        if self.ladder.len() < 2 || self.ladder.iter().any(|&n| n < 8) {
            return bad("ladder needs at least two grids of size ≥ 8".into());
        }
        if self.spectrum.k == 0 || self.spectrum.n_theta < 8 {
            return bad("spectrum needs k ≥ 1 and n_theta ≥ 8".into());
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0)) || !(self.rbar > 0.0) {
            return bad("epsilons and rbar must be positive".into());
        }
        if !self.perturb.amplitude.is_finite() {
            return bad("perturbation amplitude must be finite".into());
        }
        if let Some((lo, hi)) = self.fit.window {
            if !(lo < hi) {
                return bad(format!("fit window [{lo}, {hi}] is empty"));
            }
        }
        match self.source.kind {
            SourceKind::Kerr => {
                self.source.kerr()?;
            }
            SourceKind::Tangent => {
                self.source.tangent()?;
            }
            SourceKind::Constant => {}
        }
        Ok(())
    }
}
