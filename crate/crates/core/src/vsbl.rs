//! Variational updates for the self-calibrating sparse Bayesian model.
//!
//! The proxy posterior factorizes into independent complex Gaussians for the
//! calibration weights, a joint complex Gaussian for the active amplitudes,
//! and Gamma factors for the noise and component precisions. Component
//! precisions and dispersion parameters use the fast leave-one-out update:
//! the marginal likelihood of component `k` given everything else depends
//! only on the pair `(s_k, mu_k)`.
//!
//! Quadratic terms use the second moments `W_p = |w_p|^2 + var_w_p` of the
//! weight posterior, the same weighting the amplitude covariance uses, so the
//! fast precision update is the exact fixed point of alternating the
//! amplitude and precision updates. With a point-mass weight posterior this
//! is plain `d = D(w) a(theta)` algebra.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::array_model::{
    shaped_temporal_vector, steering_vector, Dictionary, DispersionParams, ObservationModel,
};
use crate::error::{invalid, Error, Result};
use crate::simplex::{self, SimplexOptions};

/// Gamma hyperparameters and the pruning threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    /// Shape of the noise-precision prior.
    pub a: f64,
    /// Rate of the noise-precision prior.
    pub b: f64,
    /// Shape of each component-precision prior.
    pub eps: f64,
    /// Rate of each component-precision prior.
    pub eta: f64,
    /// Pruning threshold on `|mu|^2 / s`, at least 1.
    pub chi: f64,
}

impl Hyperparams {
    /// Non-informative Jeffreys priors (`a = b = eps = eta = 0`).
    pub fn jeffreys(chi: f64) -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            eps: 0.0,
            eta: 0.0,
            chi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.a, self.b, self.eps, self.eta].iter().any(|v| !(*v >= 0.0)) {
            return invalid("Gamma hyperparameters must be non-negative");
        }
        if !(self.chi >= 1.0) {
            return invalid("pruning threshold must be at least 1");
        }
        Ok(())
    }
}

/// Threshold on `|mu|^2 / s` for a false-alarm probability `p_fa` when the
/// search covers `cells` independent resolution cells.
///
/// Under noise alone the statistic at a fixed point is unit exponential, so
/// one cell gives `ln(1 / p_fa)`; the maximum over `cells` cells exceeds
/// `ln(cells / p_fa)` with probability about `p_fa`.
pub fn threshold_for_false_alarm(p_fa: f64, cells: f64) -> f64 {
    (cells.max(1.0) / p_fa).ln().max(1.0)
}

/// Independent complex Gaussian prior on each calibration weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPrior {
    pub mean: DVector<Complex64>,
    pub var: DVector<f64>,
}

impl WeightPrior {
    pub fn new(mean: DVector<Complex64>, var: DVector<f64>) -> Result<Self> {
        let prior = Self { mean, var };
        prior.validate(prior.mean.len())?;
        Ok(prior)
    }

    /// Mean 1 with the given variance on every element.
    pub fn isotropic(elements: usize, var: f64) -> Self {
        Self {
            mean: DVector::from_element(elements, Complex64::new(1.0, 0.0)),
            var: DVector::from_element(elements, var),
        }
    }

    /// Mean 1, variance 100: nearly flat around the nominal weights.
    pub fn uninformative(elements: usize) -> Self {
        Self::isotropic(elements, 100.0)
    }

    /// Mean 1, variance `1e-8`: pins the weights to their nominal value.
    pub fn pinned(elements: usize) -> Self {
        Self::isotropic(elements, 1e-8)
    }

    pub fn validate(&self, elements: usize) -> Result<()> {
        if self.mean.len() != elements || self.var.len() != elements {
            return invalid(format!("weight prior must have {elements} entries"));
        }
        if self.var.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid("weight prior variances must be positive and finite");
        }
        Ok(())
    }
}

/// The pair `(s_k, mu_k)` of the leave-one-out marginal likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionStat {
    pub s: f64,
    pub mu: Complex64,
}

impl DetectionStat {
    /// `|mu|^2 / s`, the quantity compared against the pruning threshold.
    pub fn ratio(&self) -> f64 {
        self.mu.norm_sqr() / self.s
    }
}

/// Variational state of one estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub w_hat: DVector<Complex64>,
    pub var_w_hat: DVector<f64>,
    pub alpha_hat: DVector<Complex64>,
    pub sigma_alpha: DMatrix<Complex64>,
    pub gamma_hat: Vec<f64>,
    pub lambda_hat: f64,
    dictionary: Dictionary,
}

impl PosteriorState {
    /// Empty model with `lambda = PN / ||y||^2` and the weights at their prior
    /// mean (zero posterior variance until the first weight update).
    pub fn empty(model: &ObservationModel, y: &DVector<Complex64>, prior: &WeightPrior) -> Result<Self> {
        check_measurement(model, y)?;
        prior.validate(model.num_elements())?;
        let energy = y.norm_squared();
        if !(energy > 0.0 && energy.is_finite()) {
            return invalid("measurement must have finite nonzero energy");
        }
        Ok(Self {
            w_hat: prior.mean.clone(),
            var_w_hat: DVector::zeros(model.num_elements()),
            alpha_hat: DVector::zeros(0),
            sigma_alpha: DMatrix::zeros(0, 0),
            gamma_hat: Vec::new(),
            lambda_hat: model.measurement_len() as f64 / energy,
            dictionary: model.dictionary(&[])?,
        })
    }

    /// State with the given components; amplitudes start at zero.
    pub fn with_components(
        model: &ObservationModel,
        thetas: &[DispersionParams],
        gammas: &[f64],
        w_hat: DVector<Complex64>,
        var_w_hat: DVector<f64>,
        lambda_hat: f64,
    ) -> Result<Self> {
        if thetas.len() != gammas.len() {
            return invalid("need one precision per component");
        }
        if w_hat.len() != model.num_elements() || var_w_hat.len() != model.num_elements() {
            return invalid("weight posterior does not match the array size");
        }
        let k = thetas.len();
        Ok(Self {
            w_hat,
            var_w_hat,
            alpha_hat: DVector::zeros(k),
            sigma_alpha: DMatrix::zeros(k, k),
            gamma_hat: gammas.to_vec(),
            lambda_hat,
            dictionary: model.dictionary(thetas)?,
        })
    }

    pub fn k_hat(&self) -> usize {
        self.dictionary.len()
    }

    pub fn thetas(&self) -> &[DispersionParams] {
        self.dictionary.thetas()
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// `|w_p|^2 + var_w_p` per element.
    pub fn weight_second_moments(&self) -> Vec<f64> {
        self.w_hat
            .iter()
            .zip(self.var_w_hat.iter())
            .map(|(w, v)| w.norm_sqr() + v)
            .collect()
    }

    pub fn push_component(&mut self, model: &ObservationModel, theta: DispersionParams, gamma: f64) -> Result<()> {
        let mut thetas = self.thetas().to_vec();
        thetas.push(theta);
        self.dictionary = model.dictionary(&thetas)?;
        self.gamma_hat.push(gamma);
        let k = thetas.len();
        self.alpha_hat = self.alpha_hat.clone().insert_row(k - 1, Complex64::new(0.0, 0.0));
        self.sigma_alpha = self
            .sigma_alpha
            .clone()
            .insert_row(k - 1, Complex64::new(0.0, 0.0))
            .insert_column(k - 1, Complex64::new(0.0, 0.0));
        Ok(())
    }

    pub fn remove_component(&mut self, model: &ObservationModel, k: usize) -> Result<()> {
        let mut thetas = self.thetas().to_vec();
        thetas.remove(k);
        self.dictionary = model.dictionary(&thetas)?;
        self.gamma_hat.remove(k);
        self.alpha_hat = self.alpha_hat.clone().remove_row(k);
        self.sigma_alpha = self.sigma_alpha.clone().remove_row(k).remove_column(k);
        Ok(())
    }

    pub fn set_component(&mut self, model: &ObservationModel, k: usize, theta: DispersionParams, gamma: f64) -> Result<()> {
        let mut thetas = self.thetas().to_vec();
        thetas[k] = theta;
        self.dictionary = model.dictionary(&thetas)?;
        self.gamma_hat[k] = gamma;
        Ok(())
    }

    /// `D(w) A alpha`.
    pub fn reconstruction(&self) -> DVector<Complex64> {
        let n = self.dictionary.num_samples();
        let mut out = DVector::zeros(self.dictionary.num_elements() * n);
        for (p, block) in self.dictionary.blocks().iter().enumerate() {
            let t_alpha = block * &self.alpha_hat * self.w_hat[p];
            out.rows_mut(p * n, n).copy_from(&t_alpha);
        }
        out
    }

    /// `y - D(w) A alpha`.
    pub fn residual(&self, y: &DVector<Complex64>) -> DVector<Complex64> {
        y - self.reconstruction()
    }
}

fn check_measurement(model: &ObservationModel, y: &DVector<Complex64>) -> Result<()> {
    if y.len() != model.measurement_len() {
        return invalid(format!(
            "measurement has length {}, expected {}",
            y.len(),
            model.measurement_len()
        ));
    }
    Ok(())
}

/// Columns `idx` of the weighted Gram `A^H (|D_w|^2 + D_sigma) A`, using the
/// Kronecker structure of the atoms.
fn weighted_gram(steering: &DMatrix<Complex64>, temporal: &DMatrix<Complex64>, energy: &[f64]) -> DMatrix<Complex64> {
    let k = steering.ncols();
    let temporal_gram = temporal.adjoint() * temporal;
    DMatrix::from_fn(k, k, |i, j| {
        let spatial: Complex64 = energy
            .iter()
            .enumerate()
            .map(|(p, e)| steering[(p, i)].conj() * steering[(p, j)] * *e)
            .sum();
        spatial * temporal_gram[(i, j)]
    })
}

/// `A^H D_w^H y`.
fn matched_output(
    steering: &DMatrix<Complex64>,
    temporal: &DMatrix<Complex64>,
    w_hat: &DVector<Complex64>,
    y: &DVector<Complex64>,
) -> DVector<Complex64> {
    let n = temporal.nrows();
    let p_count = steering.nrows();
    let y_mat = DMatrix::from_column_slice(n, p_count, y.as_slice());
    // z[(j, p)] = u_j^H y_p
    let z = temporal.adjoint() * y_mat;
    DVector::from_fn(steering.ncols(), |j, _| {
        (0..p_count).map(|p| (w_hat[p] * steering[(p, j)]).conj() * z[(j, p)]).sum()
    })
}

/// Covariance from a Hermitian precision matrix via Cholesky.
///
/// On factorization failure a diagonal jitter of `1e-12 * trace / K` is added
/// once; the returned flag reports whether that happened.
pub fn hermitian_inverse(precision: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, bool)> {
    let k = precision.nrows();
    if k == 0 {
        return Ok((DMatrix::zeros(0, 0), false));
    }
    let sym = (precision + precision.adjoint()) * Complex64::new(0.5, 0.0);
    let (chol, jittered) = match Cholesky::new(sym.clone()) {
        Some(c) => (c, false),
        None => {
            let trace = sym.diagonal().iter().map(|v| v.re).sum::<f64>();
            let jitter = 1e-12 * trace.abs() / k as f64;
            let mut reg = sym.clone();
            for i in 0..k {
                reg[(i, i)] += jitter;
            }
            match Cholesky::new(reg) {
                Some(c) => (c, true),
                None => {
                    let min_diag = sym.diagonal().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
                    return Err(Error::DegenerateGeometry(format!(
                        "{k}x{k} amplitude precision, trace {trace:e}, smallest diagonal {min_diag:e}"
                    )));
                }
            }
        }
    };
    let inv = chol.inverse();
    let inv = (&inv + inv.adjoint()) * Complex64::new(0.5, 0.0);
    Ok((inv, jittered))
}

/// Posterior mean and variance of the calibration weights.
///
/// Per element: `var = (lambda (a^H T^H T a + tr(T^H T Sigma)) + 1/prior_var)^-1`
/// and `w = var (lambda a^H T^H y_p + prior_mean / prior_var)`.
pub fn update_weights(
    state: &PosteriorState,
    prior: &WeightPrior,
    y: &DVector<Complex64>,
) -> (DVector<Complex64>, DVector<f64>) {
    let dict = state.dictionary();
    if dict.is_empty() {
        return (prior.mean.clone(), prior.var.clone());
    }
    let n = dict.num_samples();
    let p_count = dict.num_elements();
    let mut w = DVector::zeros(p_count);
    let mut var = DVector::zeros(p_count);
    for p in 0..p_count {
        let block = dict.block(p);
        let t_alpha = block * &state.alpha_hat;
        let gram = block.adjoint() * block;
        let trace: f64 = (&gram * &state.sigma_alpha).trace().re;
        let precision = state.lambda_hat * (t_alpha.norm_squared() + trace) + 1.0 / prior.var[p];
        let data = t_alpha.dotc(&y.rows(p * n, n)) * state.lambda_hat + prior.mean[p] / prior.var[p];
        var[p] = 1.0 / precision;
        w[p] = data / precision;
    }
    (w, var)
}

/// Result of the amplitude update.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeUpdate {
    pub alpha: DVector<Complex64>,
    pub sigma: DMatrix<Complex64>,
    /// Cholesky needed diagonal jitter.
    pub jittered: bool,
}

/// `Sigma = (lambda A^H (|D_w|^2 + D_sigma) A + diag(gamma))^-1`,
/// `alpha = lambda Sigma A^H D_w^H y`.
pub fn update_amplitudes(state: &PosteriorState, y: &DVector<Complex64>) -> Result<AmplitudeUpdate> {
    let dict = state.dictionary();
    if let Some(k) = state.gamma_hat.iter().position(|g| !g.is_finite()) {
        return invalid(format!("component {k} has infinite precision and must be pruned first"));
    }
    if dict.is_empty() {
        return Ok(AmplitudeUpdate {
            alpha: DVector::zeros(0),
            sigma: DMatrix::zeros(0, 0),
            jittered: false,
        });
    }
    let energy = state.weight_second_moments();
    let mut precision = weighted_gram(dict.steering(), dict.temporal(), &energy) * Complex64::from(state.lambda_hat);
    for (i, g) in state.gamma_hat.iter().enumerate() {
        precision[(i, i)] += g;
    }
    let (sigma, jittered) = hermitian_inverse(&precision)?;
    let h = matched_output(dict.steering(), dict.temporal(), &state.w_hat, y);
    let alpha = &sigma * h * Complex64::from(state.lambda_hat);
    Ok(AmplitudeUpdate { alpha, sigma, jittered })
}

/// Posterior mean of the noise precision, `(a + NP) / (b + rho)`.
pub fn update_noise(state: &PosteriorState, y: &DVector<Complex64>, hyper: &Hyperparams) -> f64 {
    let dict = state.dictionary();
    let count = y.len() as f64;
    if dict.is_empty() {
        return (hyper.a + count) / (hyper.b + y.norm_squared());
    }
    let residual = state.residual(y).norm_squared();
    // tr(A Sigma A^H |D_w|^2) + tr(D_sigma A Sigma A^H), one antenna block at a time
    let temporal_gram = dict.temporal().adjoint() * dict.temporal();
    let k = dict.len();
    let mut trace = 0.0;
    for (p, e) in state.weight_second_moments().iter().enumerate() {
        let a = dict.steering().row(p);
        let mut t = Complex64::new(0.0, 0.0);
        for i in 0..k {
            for j in 0..k {
                t += a[i].conj() * temporal_gram[(i, j)] * a[j] * state.sigma_alpha[(j, i)];
            }
        }
        trace += e * t.re;
    }
    (hyper.a + count) / (hyper.b + residual + trace)
}

/// Mean of the Gamma factor of one component precision, used as the slow
/// single-step reference for the fast update.
pub fn gamma_consistency_update(alpha_k: Complex64, sigma_kk: f64, hyper: &Hyperparams) -> f64 {
    let denom = hyper.eta + sigma_kk + alpha_k.norm_sqr();
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    (hyper.eps + 1.0) / denom
}

/// Per-component log marginal likelihood
/// `(|mu|^2/s) / (1 + gamma s) + ln(gamma s / (1 + gamma s))`; zero for an
/// inactive (`gamma = inf`) component.
pub fn component_log_objective(gamma: f64, stat: &DetectionStat) -> f64 {
    if gamma.is_infinite() {
        return 0.0;
    }
    let gs = gamma * stat.s;
    stat.ratio() / (1.0 + gs) + (gs / (1.0 + gs)).ln()
}

/// Closed-form maximizer of [`component_log_objective`] over `gamma`,
/// or `inf` when `|mu|^2 / s` does not exceed `chi`.
pub fn gamma_fast_update(stat: &DetectionStat, chi: f64) -> f64 {
    if stat.ratio() > chi {
        1.0 / (stat.mu.norm_sqr() - stat.s)
    } else {
        f64::INFINITY
    }
}

/// Everything needed to score one component against the rest of the model.
///
/// With `exclude = Some(k)` this scores existing component `k` against the
/// others; with `None` it scores a new candidate against the full model.
#[derive(Debug, Clone)]
pub struct LeaveOneOut<'a> {
    model: &'a ObservationModel,
    y: &'a DVector<Complex64>,
    w_hat: DVector<Complex64>,
    energy: Vec<f64>,
    lambda: f64,
    steering: DMatrix<Complex64>,
    temporal: DMatrix<Complex64>,
    sigma: DMatrix<Complex64>,
    sigma_h: DVector<Complex64>,
}

impl<'a> LeaveOneOut<'a> {
    pub fn new(
        model: &'a ObservationModel,
        state: &PosteriorState,
        y: &'a DVector<Complex64>,
        exclude: Option<usize>,
    ) -> Result<Self> {
        check_measurement(model, y)?;
        let k = state.k_hat();
        if let Some(e) = exclude {
            if e >= k {
                return invalid(format!("component {e} out of range for {k} components"));
            }
        }
        let keep: Vec<usize> = (0..k).filter(|&i| Some(i) != exclude).collect();
        if keep.iter().any(|&i| !state.gamma_hat[i].is_finite()) {
            return invalid("remaining components must have finite precision");
        }
        let dict = state.dictionary();
        let steering = dict.steering().select_columns(&keep);
        let temporal = dict.temporal().select_columns(&keep);
        let energy = state.weight_second_moments();
        let mut precision = weighted_gram(&steering, &temporal, &energy) * Complex64::from(state.lambda_hat);
        for (i, &j) in keep.iter().enumerate() {
            precision[(i, i)] += state.gamma_hat[j];
        }
        let (sigma, _) = hermitian_inverse(&precision)?;
        let h = matched_output(&steering, &temporal, &state.w_hat, y);
        let sigma_h = &sigma * h;
        Ok(Self {
            model,
            y,
            w_hat: state.w_hat.clone(),
            energy,
            lambda: state.lambda_hat,
            steering,
            temporal,
            sigma,
            sigma_h,
        })
    }

    pub fn model(&self) -> &ObservationModel {
        self.model
    }

    /// `(s, mu)` at `theta`.
    pub fn statistics(&self, theta: DispersionParams) -> Result<DetectionStat> {
        let a = steering_vector(theta.phi, &self.model.geom, &self.model.grid)?;
        let v = shaped_temporal_vector(theta.tau, &self.model.grid)?;
        let n = v.len();
        let lambda = self.lambda;

        let v_energy = v.norm_squared();
        let energy: f64 = a.iter().zip(&self.energy).map(|(ap, e)| e * ap.norm_sqr()).sum::<f64>() * v_energy;

        let mut d_y = Complex64::new(0.0, 0.0);
        for (p, ap) in a.iter().enumerate() {
            d_y += (self.w_hat[p] * ap).conj() * v.dotc(&self.y.rows(p * n, n));
        }

        let k = self.steering.ncols();
        let mut quad = 0.0;
        let mut cross = Complex64::new(0.0, 0.0);
        if k > 0 {
            // c_j = d^H W A_j for the remaining columns
            let temporal_ip = self.temporal.adjoint() * &v;
            let c: Vec<Complex64> = (0..k)
                .map(|j| {
                    let spatial: Complex64 = (0..a.len())
                        .map(|p| a[p].conj() * self.steering[(p, j)] * self.energy[p])
                        .sum();
                    spatial * temporal_ip[j].conj()
                })
                .collect();
            let mut q = Complex64::new(0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    q += c[i] * self.sigma[(i, j)] * c[j].conj();
                }
                cross += c[i] * self.sigma_h[i];
            }
            quad = q.re;
        }

        let inv_s = lambda * energy - lambda * lambda * quad;
        if !(inv_s > 1e-12 * lambda * energy) {
            return Err(Error::Conditioning { inv_s });
        }
        let s = 1.0 / inv_s;
        let mu = (d_y * lambda - cross * (lambda * lambda)) * s;
        Ok(DetectionStat { s, mu })
    }
}

/// `(s, mu)` of `theta` against the model with component `exclude` removed
/// (or against the full model for a new candidate).
pub fn detection_statistics(
    theta: DispersionParams,
    model: &ObservationModel,
    state: &PosteriorState,
    y: &DVector<Complex64>,
    exclude: Option<usize>,
) -> Result<DetectionStat> {
    LeaveOneOut::new(model, state, y, exclude)?.statistics(theta)
}

/// Outcome of a local search over `(phi, tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub theta: DispersionParams,
    pub stat: DetectionStat,
    pub evaluations: usize,
    /// The evaluation budget ran out; `theta` is the best point seen.
    pub budget_exhausted: bool,
}

/// Maximizes `|mu(theta)|^2 / s(theta)` with a simplex search started at
/// `theta_init`. `cell` is the `(angle, delay)` size of the initial simplex,
/// normally one search-grid cell.
pub fn optimize_component(
    theta_init: DispersionParams,
    context: &LeaveOneOut<'_>,
    cell: (f64, f64),
    options: &SimplexOptions,
) -> Result<Refinement> {
    if !theta_init.is_finite() {
        return invalid("initial dispersion parameters must be finite");
    }
    let grid = &context.model().grid;
    let to_theta = |x: &[f64]| DispersionParams::new(x[0] * cell.0, x[1] * cell.1).wrapped(grid);
    let objective = |x: &[f64]| match context.statistics(to_theta(x)) {
        Ok(stat) => -stat.ratio(),
        Err(_) => f64::INFINITY,
    };
    let x0 = [theta_init.phi / cell.0, theta_init.tau / cell.1];
    let result = simplex::minimize(objective, &x0, &[1.0, 1.0], options);
    if !result.value.is_finite() {
        return Err(Error::Conditioning { inv_s: f64::NAN });
    }
    let theta = to_theta(&result.x);
    let stat = context.statistics(theta)?;
    Ok(Refinement {
        theta,
        stat,
        evaluations: result.evaluations,
        budget_exhausted: result.budget_exhausted,
    })
}

/// Rectangular search grid over delay and angle with precomputed responses.
///
/// Points are ordered delay-major: index `i * angles.len() + j` is
/// `(angles[j], delays[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    delays: Vec<f64>,
    angles: Vec<f64>,
    delay_step: f64,
    angle_step: f64,
    steering: DMatrix<Complex64>,
    temporal: DMatrix<Complex64>,
}

impl ThetaGrid {
    /// Delays `0, step, ...` up to `delay_max` and angles `0, step, ...` below pi.
    pub fn uniform(model: &ObservationModel, delay_step: f64, delay_max: f64, angle_step: f64) -> Result<Self> {
        if !(delay_step > 0.0 && angle_step > 0.0 && delay_max >= 0.0) {
            return invalid("grid steps must be positive");
        }
        if delay_max >= model.grid.max_delay() {
            return invalid("grid exceeds the unambiguous delay range");
        }
        let n_tau = (delay_max / delay_step + 1e-9).floor() as usize + 1;
        let n_phi = ((PI / angle_step) - 1e-9).ceil().max(1.0) as usize;
        let delays = (0..n_tau).map(|i| i as f64 * delay_step).collect();
        let angles = (0..n_phi).map(|j| j as f64 * angle_step).collect();
        Self::from_points(model, delays, angles, delay_step, angle_step)
    }

    /// Half-cell delay spacing over 90% of the sampled delay span, 1 degree in angle.
    pub fn default_for(model: &ObservationModel) -> Result<Self> {
        let b = model.grid.bandwidth();
        let n = model.num_samples() as f64;
        Self::uniform(model, 1.0 / (2.0 * b), 0.9 * (n - 1.0) / b, PI / 180.0)
    }

    /// Arbitrary axes; the steps set the initial simplex size.
    pub fn from_points(
        model: &ObservationModel,
        delays: Vec<f64>,
        angles: Vec<f64>,
        delay_step: f64,
        angle_step: f64,
    ) -> Result<Self> {
        if delays.is_empty() || angles.is_empty() {
            return invalid("search grid must be non-empty");
        }
        let mut steering = DMatrix::zeros(model.num_elements(), angles.len());
        for (j, phi) in angles.iter().enumerate() {
            steering.set_column(j, &steering_vector(*phi, &model.geom, &model.grid)?);
        }
        let mut temporal = DMatrix::zeros(model.num_samples(), delays.len());
        for (i, tau) in delays.iter().enumerate() {
            temporal.set_column(i, &shaped_temporal_vector(*tau, &model.grid)?);
        }
        Ok(Self {
            delays,
            angles,
            delay_step,
            angle_step,
            steering,
            temporal,
        })
    }

    pub fn len(&self) -> usize {
        self.delays.len() * self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, index: usize) -> DispersionParams {
        let n_phi = self.angles.len();
        DispersionParams::new(self.angles[index % n_phi], self.delays[index / n_phi])
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// `(angle, delay)` size of one grid cell.
    pub fn cell(&self) -> (f64, f64) {
        (self.angle_step, self.delay_step)
    }
}

/// Grid point maximizing the beamformer `|d(theta)^H y_res|^2` with
/// `d = D(w) a(theta)`; ties go to the lowest index.
pub fn beamformer_init(y_res: &DVector<Complex64>, state: &PosteriorState, grid: &ThetaGrid) -> DispersionParams {
    let n = grid.temporal.nrows();
    let p_count = grid.steering.nrows();
    let y_mat = DMatrix::from_column_slice(n, p_count, y_res.as_slice());
    let z = grid.temporal.adjoint() * y_mat;
    let weighted = DMatrix::from_fn(p_count, grid.angles.len(), |p, j| (state.w_hat[p] * grid.steering[(p, j)]).conj());
    let scores = z * weighted;
    let n_phi = grid.angles.len();
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..grid.delays.len() {
        for j in 0..n_phi {
            let v = scores[(i, j)].norm_sqr();
            if v > best.1 {
                best = (i * n_phi + j, v);
            }
        }
    }
    grid.point(best.0)
}
