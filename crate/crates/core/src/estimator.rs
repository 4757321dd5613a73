//! The outer estimation loop: detection, weight update, component
//! refinement with pruning, amplitude and noise updates.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::array_model::{DispersionParams, ObservationModel};
use crate::error::{invalid, Error, Result};
use crate::simplex::SimplexOptions;
use crate::vsbl::{
    beamformer_init, gamma_fast_update, optimize_component, threshold_for_false_alarm, update_amplitudes,
    update_noise, update_weights, Hyperparams, LeaveOneOut, PosteriorState, ThetaGrid, WeightPrior,
};

/// False-alarm probability used for the default pruning threshold.
pub const DEFAULT_FALSE_ALARM: f64 = 1e-3;

/// Rectangular search grid in delay and angle, all starting at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub delay_step: f64,
    pub delay_max: f64,
    pub angle_step: f64,
}

impl GridSpec {
    /// Half-cell delay steps over 90% of the sampled delay span, 1 degree in angle.
    pub fn default_for(model: &ObservationModel) -> Self {
        let b = model.grid.bandwidth();
        let n = model.num_samples() as f64;
        Self {
            delay_step: 1.0 / (2.0 * b),
            delay_max: 0.9 * (n - 1.0) / b,
            angle_step: PI / 180.0,
        }
    }

    pub fn build(&self, model: &ObservationModel) -> Result<ThetaGrid> {
        ThetaGrid::uniform(model, self.delay_step, self.delay_max, self.angle_step)
    }

    /// Independent resolution cells searched per detection: delay span in
    /// units of `1/B`, times the number of antennas.
    pub fn resolution_cells(&self, model: &ObservationModel) -> f64 {
        (self.delay_max * model.grid.bandwidth()).max(1.0) * model.num_elements() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub theta_grid: GridSpec,
    pub hyper: Hyperparams,
    pub weight_prior: WeightPrior,
    pub max_iters: usize,
    /// Relative change below which the iteration counts as converged.
    pub tol: f64,
    pub calibration_enabled: bool,
    /// Cap on the number of active components.
    pub k_max: usize,
    pub simplex: SimplexOptions,
}

impl EstimatorConfig {
    /// Jeffreys priors, uninformative weight prior, default grid, and a
    /// threshold giving about 0.1% false alarms per detection test.
    pub fn default_for(model: &ObservationModel) -> Self {
        let theta_grid = GridSpec::default_for(model);
        let chi = threshold_for_false_alarm(DEFAULT_FALSE_ALARM, theta_grid.resolution_cells(model));
        Self {
            theta_grid,
            hyper: Hyperparams::jeffreys(chi),
            weight_prior: WeightPrior::uninformative(model.num_elements()),
            max_iters: 200,
            tol: 1e-6,
            calibration_enabled: true,
            k_max: 20,
            simplex: SimplexOptions::default(),
        }
    }

    pub fn validate(&self, model: &ObservationModel) -> Result<()> {
        self.hyper.validate()?;
        self.weight_prior.validate(model.num_elements())?;
        if self.max_iters == 0 {
            return invalid("max_iters must be at least 1");
        }
        if !(self.tol > 0.0) {
            return invalid("tolerance must be positive");
        }
        if self.k_max == 0 {
            return invalid("k_max must be at least 1");
        }
        if self.simplex.max_evaluations < 3 {
            return invalid("simplex budget must allow at least 3 evaluations");
        }
        Ok(())
    }
}

/// Steps of one outer iteration, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Detection,
    /// Only after a candidate was accepted.
    AmplitudeNoiseAfterDetection,
    /// Skipped when calibration is disabled.
    CalibrationWeights,
    ComponentUpdate,
    AmplitudeNoise,
}

/// Diagnostics of one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub phases: Vec<Phase>,
    /// `|mu|^2 / s` of the refined detection candidate, if one was tested.
    pub candidate_ratio: Option<f64>,
    pub added: bool,
    pub removed: usize,
    pub k_hat: usize,
    pub lambda_hat: f64,
    /// Largest relative parameter change; infinite when `k_hat` changed.
    pub max_change: f64,
    /// Simplex searches that ran out of budget.
    pub budget_exhausted: usize,
    /// Amplitude solves that needed diagonal jitter.
    pub jittered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub k_hat: usize,
    pub thetas: Vec<DispersionParams>,
    pub alpha_hat: DVector<Complex64>,
    pub sigma_alpha: DMatrix<Complex64>,
    pub gamma_hat: Vec<f64>,
    /// `|mu_k|^2 / s_k` when each component was last tested.
    pub detection_ratios: Vec<f64>,
    pub w_hat: DVector<Complex64>,
    pub var_w_hat: DVector<f64>,
    pub lambda_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<IterationTrace>,
}

struct Snapshot {
    thetas: Vec<DispersionParams>,
    w_hat: DVector<Complex64>,
    lambda_hat: f64,
}

impl Snapshot {
    fn of(state: &PosteriorState) -> Self {
        Self {
            thetas: state.thetas().to_vec(),
            w_hat: state.w_hat.clone(),
            lambda_hat: state.lambda_hat,
        }
    }

    /// Max over `tau B`, `phi`, `|w|`, `arg w` and `ln lambda` of
    /// `|new - old| / max(|old|, 1)`.
    ///
    /// Weights are compared after dividing out their mean: a common complex
    /// factor moves freely between weights and amplitudes and drifts slowly
    /// under the mean-field updates without changing the fit.
    fn change(&self, state: &PosteriorState, bandwidth: f64) -> f64 {
        if self.thetas.len() != state.k_hat() {
            return f64::INFINITY;
        }
        let relative = |old: f64, new: f64| (new - old).abs() / old.abs().max(1.0);
        let mut worst: f64 = 0.0;
        for (old, new) in self.thetas.iter().zip(state.thetas()) {
            worst = worst.max(relative(old.tau * bandwidth, new.tau * bandwidth));
            worst = worst.max(relative(old.phi, new.phi));
        }
        let old_w = normalized(&self.w_hat);
        let new_w = normalized(&state.w_hat);
        for (old, new) in old_w.iter().zip(new_w.iter()) {
            worst = worst.max(relative(old.norm(), new.norm()));
            let dphase = (new * old.conj()).arg();
            worst = worst.max(dphase.abs() / old.arg().abs().max(1.0));
        }
        worst.max(relative(self.lambda_hat.ln(), state.lambda_hat.ln()))
    }
}

fn normalized(w: &DVector<Complex64>) -> DVector<Complex64> {
    let mean = w.sum() / w.len() as f64;
    if mean.norm() > 0.0 {
        w / mean
    } else {
        w.clone()
    }
}

fn refresh_amplitudes_and_noise(state: &mut PosteriorState, y: &DVector<Complex64>, hyper: &Hyperparams) -> Result<bool> {
    let upd = update_amplitudes(state, y)?;
    state.alpha_hat = upd.alpha;
    state.sigma_alpha = upd.sigma;
    state.lambda_hat = update_noise(state, y, hyper);
    Ok(upd.jittered)
}

/// Estimates paths, calibration weights and noise precision from `y`.
pub fn run_fvsbl(y: &DVector<Complex64>, model: &ObservationModel, config: &EstimatorConfig) -> Result<EstimationResult> {
    config.validate(model)?;
    if y.len() != model.measurement_len() {
        return invalid(format!(
            "measurement has length {}, expected {}",
            y.len(),
            model.measurement_len()
        ));
    }
    if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return invalid("measurement must be finite");
    }
    let grid = config.theta_grid.build(model)?;
    let cell = grid.cell();
    let chi = config.hyper.chi;
    let bandwidth = model.grid.bandwidth();

    let mut state = PosteriorState::empty(model, y, &config.weight_prior)?;
    let mut ratios: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_iters {
        let at = |e: Error| Error::AtIteration {
            iteration,
            source: Box::new(e),
        };
        let before = Snapshot::of(&state);
        let mut step = IterationTrace {
            phases: Vec::with_capacity(5),
            candidate_ratio: None,
            added: false,
            removed: 0,
            k_hat: 0,
            lambda_hat: 0.0,
            max_change: 0.0,
            budget_exhausted: 0,
            jittered: 0,
        };

        step.phases.push(Phase::Detection);
        if state.k_hat() < config.k_max {
            let y_res = state.residual(y);
            let init = beamformer_init(&y_res, &state, &grid);
            let ctx = LeaveOneOut::new(model, &state, y, None).map_err(at)?;
            match optimize_component(init, &ctx, cell, &config.simplex) {
                Ok(r) => {
                    step.candidate_ratio = Some(r.stat.ratio());
                    step.budget_exhausted += r.budget_exhausted as usize;
                    if r.stat.ratio() > chi {
                        state
                            .push_component(model, r.theta, gamma_fast_update(&r.stat, chi))
                            .map_err(at)?;
                        ratios.push(r.stat.ratio());
                        step.added = true;
                        step.jittered += refresh_amplitudes_and_noise(&mut state, y, &config.hyper).map_err(at)? as usize;
                        step.phases.push(Phase::AmplitudeNoiseAfterDetection);
                    }
                }
                // the whole search space duplicates existing components
                Err(Error::Conditioning { .. }) => {}
                Err(e) => return Err(at(e)),
            }
        }

        if config.calibration_enabled {
            step.phases.push(Phase::CalibrationWeights);
            let (w, var) = update_weights(&state, &config.weight_prior, y);
            state.w_hat = w;
            state.var_w_hat = var;
        }

        step.phases.push(Phase::ComponentUpdate);
        let mut k = 0;
        while k < state.k_hat() {
            let ctx = LeaveOneOut::new(model, &state, y, Some(k)).map_err(at)?;
            let keep = match optimize_component(state.thetas()[k], &ctx, cell, &config.simplex) {
                Ok(r) => {
                    step.budget_exhausted += r.budget_exhausted as usize;
                    (r.stat.ratio() > chi).then_some(r)
                }
                Err(Error::Conditioning { .. }) => None,
                Err(e) => return Err(at(e)),
            };
            match keep {
                Some(r) => {
                    state
                        .set_component(model, k, r.theta, gamma_fast_update(&r.stat, chi))
                        .map_err(at)?;
                    ratios[k] = r.stat.ratio();
                    k += 1;
                }
                None => {
                    state.remove_component(model, k).map_err(at)?;
                    ratios.remove(k);
                    step.removed += 1;
                }
            }
        }

        step.jittered += refresh_amplitudes_and_noise(&mut state, y, &config.hyper).map_err(at)? as usize;
        step.phases.push(Phase::AmplitudeNoise);

        step.k_hat = state.k_hat();
        step.lambda_hat = state.lambda_hat;
        step.max_change = before.change(&state, bandwidth);
        let done = !step.added && step.removed == 0 && step.max_change < config.tol;
        trace.push(step);
        if done {
            converged = true;
            break;
        }
    }

    Ok(EstimationResult {
        k_hat: state.k_hat(),
        thetas: state.thetas().to_vec(),
        alpha_hat: state.alpha_hat.clone(),
        sigma_alpha: state.sigma_alpha.clone(),
        gamma_hat: state.gamma_hat.clone(),
        detection_ratios: ratios,
        w_hat: state.w_hat.clone(),
        var_w_hat: state.var_w_hat.clone(),
        lambda_hat: state.lambda_hat,
        iterations: trace.len(),
        converged,
        objective_trace: trace,
    })
}
