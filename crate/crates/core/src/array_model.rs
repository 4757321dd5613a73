//! Array and wideband signal model.
//!
//! A multipath component with angle of arrival `phi` and delay `tau` is seen by
//! antenna `p` at baseband frequency `f_n` as
//!
//! ```text
//! t_p,n(theta) = a_p(phi) * s_f[n] * exp(-j 2 pi f_n tau)
//! ```
//!
//! with `a_p(phi) = exp(-j 2 pi f_c / c * r_p . u(phi))` and
//! `u(phi) = [cos phi, sin phi]`. Stacking the `P` antenna blocks gives the
//! dictionary atom `a(phi) kron (diag(s_f) a_tau(tau))`. Measurements are laid
//! out antenna-major: sample `n` of antenna `p` lives at index `p * N + n`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default carrier frequency (60 GHz mmWave band).
pub const DEFAULT_CARRIER_HZ: f64 = 60e9;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 1e9;
pub const DEFAULT_NUM_SAMPLES: usize = 64;

/// Planar antenna array: element positions in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<[f64; 2]>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.is_empty() {
            return invalid("array needs at least one element");
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("array element positions must be finite");
        }
        Ok(Self { positions })
    }

    /// Uniform linear array along the x-axis with half-wavelength spacing.
    pub fn half_wavelength_ula(elements: usize, carrier_hz: f64, speed: f64) -> Result<Self> {
        if !(carrier_hz > 0.0 && speed > 0.0) {
            return invalid("carrier frequency and propagation speed must be positive");
        }
        let spacing = speed / (2.0 * carrier_hz);
        Self::new((0..elements).map(|p| [p as f64 * spacing, 0.0]).collect())
    }

    pub fn num_elements(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }
}

/// Frequency sampling grid and transmit spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalGrid {
    spacing: f64,
    carrier: f64,
    speed: f64,
    spectrum: Vec<Complex64>,
    frequencies: Vec<f64>,
}

impl SignalGrid {
    /// `spectrum.len()` sets the sample count `N`, which must be even.
    pub fn new(spacing_hz: f64, carrier_hz: f64, speed: f64, spectrum: Vec<Complex64>) -> Result<Self> {
        let n = spectrum.len();
        if n == 0 || n % 2 != 0 {
            return invalid(format!("sample count must be even and positive, got {n}"));
        }
        if !(spacing_hz > 0.0 && spacing_hz.is_finite()) {
            return invalid("frequency spacing must be positive and finite");
        }
        if !(carrier_hz > 0.0 && speed > 0.0) {
            return invalid("carrier frequency and propagation speed must be positive");
        }
        if spectrum.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return invalid("transmit spectrum must be finite");
        }
        if spectrum.iter().all(|s| s.norm_sqr() == 0.0) {
            return invalid("transmit spectrum must have nonzero energy");
        }
        let half = (n / 2) as f64;
        let frequencies = (0..n).map(|i| (i as f64 - half) * spacing_hz).collect();
        Ok(Self {
            spacing: spacing_hz,
            carrier: carrier_hz,
            speed,
            spectrum,
            frequencies,
        })
    }

    /// Flat unit spectrum with `n` samples over `bandwidth_hz`.
    pub fn flat(n: usize, bandwidth_hz: f64, carrier_hz: f64) -> Result<Self> {
        if n == 0 {
            return invalid("sample count must be positive");
        }
        Self::new(
            bandwidth_hz / n as f64,
            carrier_hz,
            SPEED_OF_LIGHT,
            vec![Complex64::new(1.0, 0.0); n],
        )
    }

    pub fn num_samples(&self) -> usize {
        self.spectrum.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn bandwidth(&self) -> f64 {
        self.spacing * self.num_samples() as f64
    }

    pub fn carrier(&self) -> f64 {
        self.carrier
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn wavelength(&self) -> f64 {
        self.speed / self.carrier
    }

    /// Baseband frequencies `[-N/2, ..., N/2 - 1] * spacing`.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn spectrum_energy(&self) -> f64 {
        self.spectrum.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Length of the unambiguous delay range, `1 / spacing`.
    pub fn max_delay(&self) -> f64 {
        1.0 / self.spacing
    }
}

impl Default for SignalGrid {
    fn default() -> Self {
        Self::flat(DEFAULT_NUM_SAMPLES, DEFAULT_BANDWIDTH_HZ, DEFAULT_CARRIER_HZ)
            .expect("default grid is valid")
    }
}

/// Angle of arrival (radians) and delay (seconds) of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionParams {
    pub phi: f64,
    pub tau: f64,
}

impl DispersionParams {
    pub fn new(phi: f64, tau: f64) -> Self {
        Self { phi, tau }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.tau.is_finite()
    }

    /// Maps the angle into `[0, pi)` by reflection and clamps the delay into
    /// `[0, max_delay)`.
    pub fn wrapped(self, grid: &SignalGrid) -> Self {
        let mut phi = self.phi.rem_euclid(2.0 * PI);
        if phi >= PI {
            phi = 2.0 * PI - phi;
        }
        let phi = phi.min(PI * (1.0 - f64::EPSILON));
        let tau_max = grid.max_delay() * (1.0 - f64::EPSILON);
        Self {
            phi,
            tau: self.tau.clamp(0.0, tau_max),
        }
    }
}

/// Array geometry plus frequency grid: everything needed to evaluate atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    pub geom: ArrayGeometry,
    pub grid: SignalGrid,
}

impl ObservationModel {
    pub fn new(geom: ArrayGeometry, grid: SignalGrid) -> Self {
        Self { geom, grid }
    }

    /// Half-wavelength ULA with `elements` antennas on the default 64-sample,
    /// 1 GHz grid at 60 GHz.
    pub fn default_ula(elements: usize) -> Result<Self> {
        let grid = SignalGrid::default();
        let geom = ArrayGeometry::half_wavelength_ula(elements, grid.carrier(), grid.speed())?;
        Ok(Self { geom, grid })
    }

    pub fn num_elements(&self) -> usize {
        self.geom.num_elements()
    }

    pub fn num_samples(&self) -> usize {
        self.grid.num_samples()
    }

    /// Length `P * N` of a stacked measurement.
    pub fn measurement_len(&self) -> usize {
        self.num_elements() * self.num_samples()
    }

    pub fn atom(&self, theta: DispersionParams) -> Result<DVector<Complex64>> {
        atom(theta, &self.geom, &self.grid)
    }

    pub fn dictionary(&self, thetas: &[DispersionParams]) -> Result<Dictionary> {
        build_dictionary(thetas, &self.geom, &self.grid)
    }
}

/// Array response `a(phi)`.
pub fn steering_vector(phi: f64, geom: &ArrayGeometry, grid: &SignalGrid) -> Result<DVector<Complex64>> {
    if !phi.is_finite() {
        return invalid("angle must be finite");
    }
    let k = 2.0 * PI * grid.carrier() / grid.speed();
    let (s, c) = phi.sin_cos();
    Ok(DVector::from_iterator(
        geom.num_elements(),
        geom.positions()
            .iter()
            .map(|r| Complex64::from_polar(1.0, -k * (r[0] * c + r[1] * s))),
    ))
}

/// Temporal response `a_tau(tau) = exp(-j 2 pi f tau)`.
pub fn temporal_vector(tau: f64, grid: &SignalGrid) -> Result<DVector<Complex64>> {
    if !tau.is_finite() {
        return invalid("delay must be finite");
    }
    Ok(DVector::from_iterator(
        grid.num_samples(),
        grid.frequencies()
            .iter()
            .map(|f| Complex64::from_polar(1.0, -2.0 * PI * f * tau)),
    ))
}

/// `diag(s_f) a_tau(tau)`: the frequency-domain part shared by all antennas.
pub fn shaped_temporal_vector(tau: f64, grid: &SignalGrid) -> Result<DVector<Complex64>> {
    let mut v = temporal_vector(tau, grid)?;
    v.iter_mut().zip(grid.spectrum()).for_each(|(x, s)| *x *= s);
    Ok(v)
}

/// Stacked atom `a(phi) kron (diag(s_f) a_tau(tau))`, length `P * N`.
pub fn atom(theta: DispersionParams, geom: &ArrayGeometry, grid: &SignalGrid) -> Result<DVector<Complex64>> {
    let a = steering_vector(theta.phi, geom, grid)?;
    let t = shaped_temporal_vector(theta.tau, grid)?;
    Ok(a.kronecker(&t))
}

/// Dictionary for a set of paths.
///
/// Holds the separable factors alongside the stacked columns and per-antenna
/// blocks `T_p` so callers can pick whichever is cheapest.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    thetas: Vec<DispersionParams>,
    steering: DMatrix<Complex64>,
    temporal: DMatrix<Complex64>,
    blocks: Vec<DMatrix<Complex64>>,
    columns: DMatrix<Complex64>,
}

impl Dictionary {
    pub fn thetas(&self) -> &[DispersionParams] {
        &self.thetas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// `P x K` matrix of steering vectors.
    pub fn steering(&self) -> &DMatrix<Complex64> {
        &self.steering
    }

    /// `N x K` matrix of `diag(s_f) a_tau(tau_k)`.
    pub fn temporal(&self) -> &DMatrix<Complex64> {
        &self.temporal
    }

    /// Per-antenna `N x K` block `T_p`.
    pub fn block(&self, p: usize) -> &DMatrix<Complex64> {
        &self.blocks[p]
    }

    pub fn blocks(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }

    /// Stacked `PN x K` matrix `A(theta)`.
    pub fn columns(&self) -> &DMatrix<Complex64> {
        &self.columns
    }

    pub fn num_elements(&self) -> usize {
        self.steering.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.temporal.nrows()
    }
}

pub fn build_dictionary(
    thetas: &[DispersionParams],
    geom: &ArrayGeometry,
    grid: &SignalGrid,
) -> Result<Dictionary> {
    let p_count = geom.num_elements();
    let n = grid.num_samples();
    let k = thetas.len();
    let mut steering = DMatrix::zeros(p_count, k);
    let mut temporal = DMatrix::zeros(n, k);
    for (j, theta) in thetas.iter().enumerate() {
        steering.set_column(j, &steering_vector(theta.phi, geom, grid)?);
        temporal.set_column(j, &shaped_temporal_vector(theta.tau, grid)?);
    }
    let blocks: Vec<DMatrix<Complex64>> = (0..p_count)
        .map(|p| DMatrix::from_fn(n, k, |row, j| steering[(p, j)] * temporal[(row, j)]))
        .collect();
    let columns = DMatrix::from_fn(p_count * n, k, |row, j| blocks[row / n][(row % n, j)]);
    Ok(Dictionary {
        thetas: thetas.to_vec(),
        steering,
        temporal,
        blocks,
        columns,
    })
}

/// Blockwise `diag(w kron 1_N) x`.
pub fn apply_calibration(w: &DVector<Complex64>, x: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let p_count = w.len();
    if p_count == 0 || x.len() % p_count != 0 {
        return invalid(format!(
            "calibration vector of length {} does not divide signal of length {}",
            p_count,
            x.len()
        ));
    }
    let n = x.len() / p_count;
    Ok(DVector::from_fn(x.len(), |i, _| w[i / n] * x[i]))
}
