//! Sweep configuration, loadable from TOML. Every field has a default, so a
//! config file only needs the values it changes.

use std::path::{Path, PathBuf};

use fvsbl::array_model::{ArrayGeometry, SignalGrid, SPEED_OF_LIGHT};
use fvsbl::estimator::{EstimatorConfig, GridSpec, DEFAULT_FALSE_ALARM};
use fvsbl::metrics::MetricsConfig;
use fvsbl::simplex::SimplexOptions;
use fvsbl::vsbl::{threshold_for_false_alarm, Hyperparams, WeightPrior};
use fvsbl::{DispersionParams, ObservationModel};
use serde::{Deserialize, Serialize};

use crate::ExperimentError;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "FVSBL_OUT_DIR";

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sigma_grid: Vec<f64>,
    pub trials_per_sigma: usize,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
    pub modes: Modes,
    pub array: ArraySettings,
    pub scenario: ScenarioSettings,
    pub estimator: EstimatorSettings,
    pub metrics: MetricsSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sigma_grid: log_space(1e-3, 0.35, 8),
            trials_per_sigma: 100,
            master_seed: 1,
            out_dir: std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("results")),
            parallelism: 0,
            modes: Modes::default(),
            array: ArraySettings::default(),
            scenario: ScenarioSettings::default(),
            estimator: EstimatorSettings::default(),
            metrics: MetricsSettings::default(),
        }
    }
}

/// Which estimator variants to run on each measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Modes {
    pub cal: bool,
    pub nocal: bool,
}

impl Default for Modes {
    fn default() -> Self {
        Self { cal: true, nocal: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySettings {
    /// Elements of a half-wavelength uniform linear array along x.
    pub elements: usize,
    pub num_samples: usize,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
}

impl Default for ArraySettings {
    fn default() -> Self {
        Self {
            elements: 4,
            num_samples: 64,
            bandwidth_hz: 1e9,
            carrier_hz: 60e9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub phi_deg: f64,
    /// Path delay expressed as propagation distance.
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSettings {
    pub component_snrs_db: Vec<f64>,
    pub placements: Vec<Placement>,
    pub noise_precision: f64,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        Self {
            component_snrs_db: vec![40.0, 38.0, 35.0],
            placements: vec![
                Placement { phi_deg: 40.0, distance_m: 3.0 },
                Placement { phi_deg: 90.0, distance_m: 7.0 },
                Placement { phi_deg: 130.0, distance_m: 12.0 },
            ],
            noise_precision: 1.0,
        }
    }
}

impl ScenarioSettings {
    pub fn thetas(&self) -> Vec<DispersionParams> {
        self.placements
            .iter()
            .map(|p| DispersionParams::new(p.phi_deg.to_radians(), p.distance_m / SPEED_OF_LIGHT))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSettings {
    /// Explicit pruning threshold; derived from `false_alarm` when absent.
    pub chi: Option<f64>,
    pub false_alarm: f64,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub eta: f64,
    pub weight_prior_var: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub k_max: usize,
    /// Search grid; each defaults to the model-derived value.
    pub delay_step_s: Option<f64>,
    pub delay_max_s: Option<f64>,
    pub angle_step_deg: Option<f64>,
    pub simplex_max_evaluations: usize,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            chi: None,
            false_alarm: DEFAULT_FALSE_ALARM,
            a: 0.0,
            b: 0.0,
            eps: 0.0,
            eta: 0.0,
            weight_prior_var: 100.0,
            max_iters: 200,
            tol: 1e-6,
            k_max: 20,
            delay_step_s: None,
            delay_max_s: None,
            angle_step_deg: None,
            simplex_max_evaluations: SimplexOptions::default().max_evaluations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSettings {
    pub cutoff_tau_d: f64,
    pub cutoff_phi: f64,
    pub ospa_order: f64,
}

impl Default for MetricsSettings {
    fn default() -> Self {
        let m = MetricsConfig::default();
        Self {
            cutoff_tau_d: m.cutoff_tau_d,
            cutoff_phi: m.cutoff_phi,
            ospa_order: m.ospa_order,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn model(&self) -> Result<ObservationModel, ExperimentError> {
        let a = &self.array;
        let grid = SignalGrid::flat(a.num_samples, a.bandwidth_hz, a.carrier_hz)?;
        let geom = ArrayGeometry::half_wavelength_ula(a.elements, grid.carrier(), grid.speed())?;
        Ok(ObservationModel::new(geom, grid))
    }

    pub fn estimator_config(&self, model: &ObservationModel) -> Result<EstimatorConfig, ExperimentError> {
        let e = &self.estimator;
        let defaults = GridSpec::default_for(model);
        let theta_grid = GridSpec {
            delay_step: e.delay_step_s.unwrap_or(defaults.delay_step),
            delay_max: e.delay_max_s.unwrap_or(defaults.delay_max),
            angle_step: e.angle_step_deg.map(f64::to_radians).unwrap_or(defaults.angle_step),
        };
        if !(e.false_alarm > 0.0 && e.false_alarm < 1.0) {
            return Err(ExperimentError::Config("false_alarm must lie in (0, 1)".into()));
        }
        let chi = e
            .chi
            .unwrap_or_else(|| threshold_for_false_alarm(e.false_alarm, theta_grid.resolution_cells(model)));
        let config = EstimatorConfig {
            theta_grid,
            hyper: Hyperparams {
                a: e.a,
                b: e.b,
                eps: e.eps,
                eta: e.eta,
                chi,
            },
            weight_prior: WeightPrior::isotropic(model.num_elements(), e.weight_prior_var),
            max_iters: e.max_iters,
            tol: e.tol,
            calibration_enabled: true,
            k_max: e.k_max,
            simplex: SimplexOptions {
                max_evaluations: e.simplex_max_evaluations,
                ..SimplexOptions::default()
            },
        };
        config.validate(model)?;
        theta_grid.build(model)?;
        Ok(config)
    }

    pub fn metrics_config(&self) -> Result<MetricsConfig, ExperimentError> {
        let m = MetricsConfig {
            cutoff_tau_d: self.metrics.cutoff_tau_d,
            cutoff_phi: self.metrics.cutoff_phi,
            ospa_order: self.metrics.ospa_order,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks everything that can be checked without running a trial.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.sigma_grid.is_empty() {
            return Err(ExperimentError::Config("sigma_grid must not be empty".into()));
        }
        if self.sigma_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(ExperimentError::Config("sigma_grid values must be positive and finite".into()));
        }
        if self.trials_per_sigma == 0 {
            return Err(ExperimentError::Config("trials_per_sigma must be at least 1".into()));
        }
        if !self.modes.cal && !self.modes.nocal {
            return Err(ExperimentError::Config("at least one of cal and nocal must be enabled".into()));
        }
        let s = &self.scenario;
        if s.component_snrs_db.len() != s.placements.len() {
            return Err(ExperimentError::Config(
                "scenario needs one SNR per placement".into(),
            ));
        }
        if !(s.noise_precision > 0.0 && s.noise_precision.is_finite()) {
            return Err(ExperimentError::Config("noise_precision must be positive and finite".into()));
        }
        let model = self.model()?;
        self.estimator_config(&model)?;
        self.metrics_config()?;
        Ok(())
    }
}
