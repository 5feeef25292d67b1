//! Run configuration files and the built-in study presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cartography::{Axis, Embedding, GridSpec, SweepConfig, UncertaintyMode};
use crate::error::{Result, SdiError};
use crate::indicators::{IndicatorConfig, Selection};
use crate::odeint::IntegratorConfig;
use crate::systems::{er3bp_pseudo_energy, l1_energy, l1_series, system_by_name, DynamicalSystem};

/// Offset above the L1 energy used by the three-body presets.
pub const L1_ENERGY_OFFSET: f64 = 0.03715;

pub const PRESET_NAMES: [&str; 6] = ["pendulum", "double_gyre", "cr3bp_case1", "cr3bp_case2", "er3bp", "l4_stability"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: String,
    #[serde(default)]
    pub preset: Option<String>,
    pub mode: UncertaintyMode,
    pub grid: GridSpec,
    pub selection: Selection,
    pub indicators: IndicatorConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_workers() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| SdiError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| SdiError::Config(e.to_string()))
    }

    pub fn build_system(&self) -> Result<Box<dyn DynamicalSystem>> {
        system_by_name(&self.system).ok_or_else(|| SdiError::Config(format!("unknown system '{}'", self.system)))
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            indicators: self.indicators.clone(),
            selection: self.selection,
            mode: self.mode.clone(),
            workers: self.workers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sys = self.build_system()?;
        let cfg_err = |e: SdiError| SdiError::Config(e.to_string());
        self.grid.validate().map_err(cfg_err)?;
        self.indicators.validate().map_err(cfg_err)?;
        if self.grid.embedding.state_dim() != sys.state_dim() {
            return Err(SdiError::Config(format!("embedding does not produce {} states", sys.state_dim())));
        }
        match &self.mode {
            UncertaintyMode::Parameters { bounds } => {
                if bounds.len() != sys.param_dim() {
                    return Err(SdiError::Config(format!("{} needs {} parameter bounds", self.system, sys.param_dim())));
                }
                if bounds.iter().any(|(a, b)| !(a < b)) {
                    return Err(SdiError::Config("parameter bounds need lo < hi".into()));
                }
            }
            UncertaintyMode::InitialState { params, edge } => {
                if params.len() != sys.param_dim() || !(*edge > 0.0) {
                    return Err(SdiError::Config("initial-state mode needs fixed parameters and a positive edge".into()));
                }
            }
        }
        if self.selection == Selection::NONE {
            return Err(SdiError::Config("no indicator selected".into()));
        }
        if self.selection.alpha && self.indicators.horizon() <= crate::indicators::MIN_ALPHA_HORIZON {
            return Err(SdiError::Config("alpha needs tf - t0 > 1.05".into()));
        }
        if self.workers == 0 {
            return Err(SdiError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Switches to expansion over a cube of side `edge` around each initial
    /// state, keeping the nominal parameters fixed.
    pub fn with_ic_uncertainty(mut self, edge: f64) -> Self {
        let params = self.mode.nominal_params();
        self.mode = UncertaintyMode::InitialState { params, edge };
        self.indicators.degree = 1;
        self.indicators.n_per_dim = 3;
        self
    }

    pub fn set_grid_size(&mut self, nx: usize, ny: usize) {
        self.grid.axis1.count = nx;
        self.grid.axis2.count = ny;
    }
}

fn indicators(degree: usize, tf: f64, epsilon: f64, tol: (f64, f64)) -> IndicatorConfig {
    IndicatorConfig { degree, tf, epsilon, integrator: IntegratorConfig::new(tol.0, tol.1), ..IndicatorConfig::default() }
}

/// Jacobi energy of the series L1 point plus the preset offset.
pub fn cr3bp_reference_energy(mu: f64) -> f64 {
    l1_energy(mu) + L1_ENERGY_OFFSET
}

/// Pseudo-energy of the series L1 point at true anomaly zero plus the offset.
pub fn er3bp_reference_energy(e: f64, mu: f64) -> f64 {
    er3bp_pseudo_energy(0.0, e, mu, &[l1_series(mu), 0.0, 0.0, 0.0]) + L1_ENERGY_OFFSET
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let three_body_axes =
        || (Axis::new("x", -0.85, -0.125, 200), Axis::new("vx", -2.0, 2.0, 200));
    let cfg = match name {
        "pendulum" => RunConfig {
            system: "pendulum".into(),
            preset: Some(name.into()),
            mode: UncertaintyMode::Parameters { bounds: vec![(2.25, 2.75)] },
            grid: GridSpec::new(Axis::new("x", -3.0, 3.0, 200), Axis::new("vx", -3.0, 3.0, 200), Embedding::Direct),
            selection: Selection::ALL,
            indicators: indicators(4, 10.0, 0.1, (1e-10, 1e-9)),
            workers: 1,
            output: default_output(),
        },
        "double_gyre" => RunConfig {
            system: "double_gyre".into(),
            preset: Some(name.into()),
            mode: UncertaintyMode::Parameters { bounds: vec![(0.09, 0.11)] },
            grid: GridSpec::new(Axis::new("x", 0.0, 2.0, 200), Axis::new("y", 0.0, 1.0, 200), Embedding::Direct),
            selection: Selection::ALL,
            indicators: indicators(4, 20.0, 0.25, (1e-10, 1e-9)),
            workers: 1,
            output: default_output(),
        },
        "cr3bp_case1" | "cr3bp_case2" => {
            let (bounds, tf) = if name == "cr3bp_case1" { ((0.1 - 1e-7, 0.1 + 1e-7), 2.0) } else { ((0.099, 0.101), 2.8) };
            let (a1, a2) = three_body_axes();
            RunConfig {
                system: "cr3bp".into(),
                preset: Some(name.into()),
                mode: UncertaintyMode::Parameters { bounds: vec![bounds] },
                grid: GridSpec::new(a1, a2, Embedding::Cr3bpEnergy { energy: cr3bp_reference_energy(0.1), mu: 0.1 }),
                selection: if name == "cr3bp_case1" {
                    Selection::ALL
                } else {
                    Selection { ftle: true, alpha: true, expectation: true, ..Selection::NONE }
                },
                indicators: indicators(4, tf, 0.1, (1e-10, 1e-8)),
                workers: 1,
                output: default_output(),
            }
        }
        "er3bp" => {
            let (a1, a2) = three_body_axes();
            RunConfig {
                system: "er3bp".into(),
                preset: Some(name.into()),
                mode: UncertaintyMode::Parameters { bounds: vec![(0.039, 0.041), (0.099, 0.101)] },
                grid: GridSpec::new(
                    a1,
                    a2,
                    Embedding::Er3bpEnergy { energy: er3bp_reference_energy(0.04, 0.1), e: 0.04, mu: 0.1 },
                ),
                selection: Selection { alpha: true, expectation: true, ..Selection::NONE },
                indicators: indicators(3, 2.8 * std::f64::consts::TAU, 0.1, (1e-10, 1e-8)),
                workers: 1,
                output: default_output(),
            }
        }
        "l4_stability" => RunConfig {
            system: "cr3bp".into(),
            preset: Some(name.into()),
            mode: UncertaintyMode::Parameters { bounds: vec![(0.038, 0.040)] },
            grid: GridSpec::new(Axis::new("x", 0.3, 0.7, 200), Axis::new("y", 0.7, 1.0, 200), Embedding::PlanarRest),
            selection: Selection { alpha: true, ..Selection::NONE },
            indicators: indicators(3, 80.0, 0.1, (1e-10, 1e-8)),
            workers: 1,
            output: default_output(),
        },
        other => {
            return Err(SdiError::Config(format!("unknown preset '{other}' (known: {})", PRESET_NAMES.join(", "))))
        }
    };
    Ok(cfg)
}
