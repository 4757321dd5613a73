//! Synthetic measurements `y = D(w) A(theta) alpha + n`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::array_model::{apply_calibration, atom, build_dictionary, ArrayGeometry, DispersionParams, SignalGrid};
use crate::error::{invalid, Result};

/// One specular path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub alpha: Complex64,
    pub theta: DispersionParams,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub components: Vec<Path>,
}

impl GroundTruth {
    pub fn thetas(&self) -> Vec<DispersionParams> {
        self.components.iter().map(|c| c.theta).collect()
    }

    pub fn amplitudes(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.components.len(), self.components.iter().map(|c| c.alpha))
    }
}

/// True per-element calibration weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTruth {
    pub w: DVector<Complex64>,
}

impl CalibrationTruth {
    pub fn ideal(elements: usize) -> Self {
        Self {
            w: DVector::from_element(elements, Complex64::new(1.0, 0.0)),
        }
    }
}

/// Scenario description: one entry in `component_snrs_db` per entry in `placements`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Standard deviation of the circular complex weight deviation.
    pub sigma_w_sim: f64,
    pub component_snrs_db: Vec<f64>,
    pub placements: Vec<DispersionParams>,
    /// Noise precision `lambda`; `f64::INFINITY` disables noise.
    pub noise_precision: f64,
    pub seed: u64,
}

impl SimConfig {
    /// Three well-separated paths at 40, 38 and 35 dB.
    pub fn evaluation_scenario(sigma_w_sim: f64, seed: u64, speed: f64) -> Self {
        let deg = PI / 180.0;
        Self {
            sigma_w_sim,
            component_snrs_db: vec![40.0, 38.0, 35.0],
            placements: vec![
                DispersionParams::new(40.0 * deg, 3.0 / speed),
                DispersionParams::new(90.0 * deg, 7.0 / speed),
                DispersionParams::new(130.0 * deg, 12.0 / speed),
            ],
            noise_precision: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_w_sim >= 0.0 && self.sigma_w_sim.is_finite()) {
            return invalid("sigma_w_sim must be finite and non-negative");
        }
        if !(self.noise_precision > 0.0) {
            return invalid("noise precision must be positive");
        }
        if self.component_snrs_db.len() != self.placements.len() {
            return invalid("need one SNR per path placement");
        }
        if self.placements.iter().any(|t| !t.is_finite()) {
            return invalid("path placements must be finite");
        }
        Ok(())
    }
}

/// Independent RNG substream `stream` of the master seed.
///
/// ChaCha keeps a separate 64-bit stream id next to the seed, so substreams
/// never overlap and each trial can be replayed on its own.
pub fn substream(master_seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Circularly symmetric standard complex normal draw, `E|z|^2 = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `w_p ~ CN(1, sigma_w_sim^2)`.
pub fn draw_calibration_weights<R: Rng + ?Sized>(sigma_w_sim: f64, elements: usize, rng: &mut R) -> CalibrationTruth {
    let w = DVector::from_fn(elements, |_, _| {
        let z = complex_normal(rng);
        Complex64::new(1.0, 0.0) + z * sigma_w_sim
    });
    CalibrationTruth { w }
}

/// Integrated SNR of one path: `lambda * |alpha|^2 * ||atom||^2`.
pub fn component_snr_db(
    alpha: Complex64,
    theta: DispersionParams,
    geom: &ArrayGeometry,
    grid: &SignalGrid,
    lambda_true: f64,
) -> Result<f64> {
    let energy = atom(theta, geom, grid)?.norm_squared();
    Ok(10.0 * (lambda_true * alpha.norm_sqr() * energy).log10())
}

/// Amplitude with the requested integrated SNR and a uniformly random phase.
pub fn amplitude_from_component_snr<R: Rng + ?Sized>(
    snr_db: f64,
    theta: DispersionParams,
    geom: &ArrayGeometry,
    grid: &SignalGrid,
    lambda_true: f64,
    rng: &mut R,
) -> Result<Complex64> {
    if !(lambda_true > 0.0 && lambda_true.is_finite()) {
        return invalid("noise precision must be positive and finite");
    }
    let energy = atom(theta, geom, grid)?.norm_squared();
    let power = 10f64.powf(snr_db / 10.0) / (lambda_true * energy);
    let phase = rng.random_range(0.0..2.0 * PI);
    Ok(Complex64::from_polar(power.sqrt(), phase))
}

/// Noise-free part `D(w) A(theta) alpha`.
pub fn noiseless_signal(
    truth: &GroundTruth,
    cal: &CalibrationTruth,
    geom: &ArrayGeometry,
    grid: &SignalGrid,
) -> Result<DVector<Complex64>> {
    if cal.w.len() != geom.num_elements() {
        return invalid("calibration weights do not match the array size");
    }
    let dict = build_dictionary(&truth.thetas(), geom, grid)?;
    let clean = dict.columns() * truth.amplitudes();
    apply_calibration(&cal.w, &clean)
}

/// Adds circular complex AWGN with per-entry variance `1 / lambda_true`.
/// An infinite precision yields the noise-free signal.
pub fn synthesize_measurement<R: Rng + ?Sized>(
    truth: &GroundTruth,
    cal: &CalibrationTruth,
    lambda_true: f64,
    geom: &ArrayGeometry,
    grid: &SignalGrid,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    if !(lambda_true > 0.0) {
        return invalid("noise precision must be positive");
    }
    let mut y = noiseless_signal(truth, cal, geom, grid)?;
    if lambda_true.is_finite() {
        let std = lambda_true.sqrt().recip();
        y.iter_mut().for_each(|v| *v += complex_normal(rng) * std);
    }
    Ok(y)
}

/// Draws amplitudes and weights for `config`.
pub fn draw_truth<R: Rng + ?Sized>(
    config: &SimConfig,
    geom: &ArrayGeometry,
    grid: &SignalGrid,
    rng: &mut R,
) -> Result<(GroundTruth, CalibrationTruth)> {
    config.validate()?;
    // amplitude scaling needs a finite reference precision
    let lambda_ref = if config.noise_precision.is_finite() { config.noise_precision } else { 1.0 };
    let components = config
        .placements
        .iter()
        .zip(&config.component_snrs_db)
        .map(|(theta, snr)| {
            Ok(Path {
                alpha: amplitude_from_component_snr(*snr, *theta, geom, grid, lambda_ref, rng)?,
                theta: *theta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cal = draw_calibration_weights(config.sigma_w_sim, geom.num_elements(), rng);
    Ok((GroundTruth { components }, cal))
}

/// The three-path evaluation scenario with weights drawn per `sigma_w_sim`.
pub fn default_scenario(
    sigma_w_sim: f64,
    seed: u64,
    geom: &ArrayGeometry,
    grid: &SignalGrid,
) -> Result<(GroundTruth, CalibrationTruth, SimConfig)> {
    let config = SimConfig::evaluation_scenario(sigma_w_sim, seed, grid.speed());
    let mut rng = substream(seed, 0);
    let (truth, cal) = draw_truth(&config, geom, grid, &mut rng)?;
    Ok((truth, cal, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::SPEED_OF_LIGHT;
    use proptest::prelude::*;
    use rand::Rng;

    fn setup() -> (ArrayGeometry, SignalGrid) {
        let grid = SignalGrid::default();
        let geom = ArrayGeometry::half_wavelength_ula(4, grid.carrier(), grid.speed()).unwrap();
        (geom, grid)
    }

    #[test]
    fn zero_sigma_gives_ideal_weights() {
        let mut rng = substream(1, 2);
        let cal = draw_calibration_weights(0.0, 4, &mut rng);
        assert_eq!(cal, CalibrationTruth::ideal(4));
    }

    #[test]
    fn weight_moments() {
        let mut rng = substream(7, 0);
        let n = 100_000;
        let cal = draw_calibration_weights(0.1, n, &mut rng);
        let mean = cal.w.sum() / n as f64;
        let var = cal.w.iter().map(|w| (w - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
        assert!((mean - Complex64::new(1.0, 0.0)).norm() < 0.01);
        assert!((var - 0.01).abs() < 0.001, "variance {var}");
    }

    #[test]
    fn snr_definition_at_unity() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let grid = SignalGrid::new(1.0, 1.0, 1.0, vec![Complex64::new(h, 0.0); 2]).unwrap();
        let geom = ArrayGeometry::new(vec![[0.0, 0.0]]).unwrap();
        let theta = DispersionParams::new(0.3, 0.1);
        assert!((atom(theta, &geom, &grid).unwrap().norm_squared() - 1.0).abs() < 1e-12);
        let mut rng = substream(0, 0);
        let a = amplitude_from_component_snr(0.0, theta, &geom, &grid, 1.0, &mut rng).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forty_db_amplitude() {
        let (geom, grid) = setup();
        let mut rng = substream(0, 0);
        let theta = DispersionParams::new(1.0, 1e-8);
        let a = amplitude_from_component_snr(40.0, theta, &geom, &grid, 1.0, &mut rng).unwrap();
        assert!((a.norm_sqr() - 1e4 / 256.0).abs() < 1e-9);
        let back = component_snr_db(a, theta, &geom, &grid, 1.0).unwrap();
        assert!((back - 40.0).abs() < 1e-9);
    }

    #[test]
    fn empty_noiseless_measurement_is_zero() {
        let (geom, grid) = setup();
        let mut rng = substream(0, 0);
        let y = synthesize_measurement(&GroundTruth::default(), &CalibrationTruth::ideal(4), f64::INFINITY, &geom, &grid, &mut rng)
            .unwrap();
        assert_eq!(y.len(), 256);
        assert!(y.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn single_path_noiseless_equals_scaled_atom() {
        let (geom, grid) = setup();
        let mut rng = substream(0, 0);
        let theta = DispersionParams::new(0.9, 2.2e-8);
        let alpha = Complex64::new(0.3, -1.2);
        let truth = GroundTruth { components: vec![Path { alpha, theta }] };
        let y = synthesize_measurement(&truth, &CalibrationTruth::ideal(4), f64::INFINITY, &geom, &grid, &mut rng).unwrap();
        let want = atom(theta, &geom, &grid).unwrap() * alpha;
        assert!((y - want).norm() < 1e-12);
    }

    #[test]
    fn noise_variance_matches_precision() {
        let geom = ArrayGeometry::new(vec![[0.0, 0.0]]).unwrap();
        let grid = SignalGrid::flat(100_000, 1e9, 60e9).unwrap();
        let mut rng = substream(3, 9);
        let y = synthesize_measurement(&GroundTruth::default(), &CalibrationTruth::ideal(1), 4.0, &geom, &grid, &mut rng).unwrap();
        let var = y.norm_squared() / y.len() as f64;
        // |z|^2 is exponential: relative std of the mean is 1/sqrt(n) ~ 0.3%
        assert!((var - 0.25).abs() < 0.05 * 0.25);
        assert!((var - 0.25).abs() < 3.0 * 0.25 / (y.len() as f64).sqrt());
    }

    #[test]
    fn default_scenario_contract() {
        let (geom, grid) = setup();
        let (truth, cal, config) = default_scenario(0.0, 11, &geom, &grid).unwrap();
        assert_eq!(cal, CalibrationTruth::ideal(4));
        assert_eq!(truth.components.len(), 3);
        let snrs: Vec<f64> = truth
            .components
            .iter()
            .map(|c| component_snr_db(c.alpha, c.theta, &geom, &grid, config.noise_precision).unwrap())
            .collect();
        for (got, want) in snrs.iter().zip([40.0, 38.0, 35.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        let d = truth.components[1].theta.tau * SPEED_OF_LIGHT;
        assert!((d - 7.0).abs() < 1e-12);

        let again = default_scenario(0.0, 11, &geom, &grid).unwrap();
        assert_eq!(again.0, truth);
        let other = default_scenario(0.2, 11, &geom, &grid).unwrap();
        assert_ne!(other.1, cal);
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| substream(5, 1).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let b: u64 = substream(5, 2).random();
        assert_ne!(a[0], b);
    }

    proptest! {
        #[test]
        fn noiseless_synthesis_is_linear(
            scale in -3.0..3.0f64, rot in 0.0..6.28f64, p in 0usize..4, wscale in 0.1..4.0f64,
        ) {
            let (geom, grid) = setup();
            let mut rng = substream(1, 1);
            let (truth, cal, _) = default_scenario(0.1, 4, &geom, &grid).unwrap();
            let y = synthesize_measurement(&truth, &cal, f64::INFINITY, &geom, &grid, &mut rng).unwrap();

            let k = Complex64::from_polar(scale, rot);
            let mut scaled = truth.clone();
            scaled.components.iter_mut().for_each(|c| c.alpha *= k);
            let ys = synthesize_measurement(&scaled, &cal, f64::INFINITY, &geom, &grid, &mut rng).unwrap();
            prop_assert!((ys - &y * k).norm() <= 1e-10 * y.norm());

            let mut cal2 = cal.clone();
            cal2.w[p] *= wscale;
            let yw = synthesize_measurement(&truth, &cal2, f64::INFINITY, &geom, &grid, &mut rng).unwrap();
            for i in 0..y.len() {
                let f = if i / 64 == p { wscale } else { 1.0 };
                prop_assert!((yw[i] - y[i] * f).norm() <= 1e-10 * y.norm());
            }
        }
    }
}
