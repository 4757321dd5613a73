//! OSPA distances for estimated parameter sets and weight RMSE.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    /// Cutoff for delay distances, meters.
    pub cutoff_tau_d: f64,
    /// Cutoff for angles, degrees.
    pub cutoff_phi: f64,
    pub ospa_order: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            cutoff_tau_d: 0.05,
            cutoff_phi: 10.0,
            ospa_order: 1.0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_tau_d > 0.0 && self.cutoff_phi > 0.0) {
            return invalid("OSPA cutoffs must be positive");
        }
        if !(self.ospa_order >= 1.0) {
            return invalid("OSPA order must be at least 1");
        }
        Ok(())
    }
}

/// Minimum-cost assignment of every row to a distinct column (`rows <= cols`).
///
/// Returns the column of each row. Shortest augmenting path form of the
/// Hungarian method, `O(rows^2 cols)`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "more rows than columns");
    // 1-based potentials; column 0 is the virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// OSPA distance of order `p` with cutoff `cutoff` between two sets of scalars.
pub fn ospa(estimates: &[f64], truths: &[f64], cutoff: f64, p: f64) -> f64 {
    let (small, large) = if estimates.len() <= truths.len() {
        (estimates, truths)
    } else {
        (truths, estimates)
    };
    let n = large.len();
    if n == 0 {
        return 0.0;
    }
    let cost: Vec<Vec<f64>> = small
        .iter()
        .map(|a| large.iter().map(|b| (a - b).abs().min(cutoff).powf(p)).collect())
        .collect();
    let assignment = min_cost_assignment(&cost);
    let matched: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    let penalty = cutoff.powf(p) * (n - small.len()) as f64;
    ((matched + penalty) / n as f64).powf(1.0 / p)
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Gain RMSE and phase RMSE (degrees) of weight estimates.
///
/// With `calibrated = false` the estimate is taken to be all ones.
pub fn rmse_weights(w_hat: &DVector<Complex64>, w_true: &DVector<Complex64>, calibrated: bool) -> Result<(f64, f64)> {
    if w_hat.len() != w_true.len() {
        return invalid("weight vectors differ in length");
    }
    if w_true.is_empty() {
        return invalid("weight vectors are empty");
    }
    let one = Complex64::new(1.0, 0.0);
    let (mut gain, mut phase) = (0.0, 0.0);
    for (est, truth) in w_hat.iter().zip(w_true.iter()) {
        let est = if calibrated { *est } else { one };
        gain += (est.norm() - truth.norm()).powi(2);
        phase += wrap_degrees((est.arg() - truth.arg()).to_degrees()).powi(2);
    }
    let count = w_true.len() as f64;
    Ok(((gain / count).sqrt(), (phase / count).sqrt()))
}

/// Delay expressed as a propagation distance, `c * tau`.
pub fn tau_to_distance(tau: f64, speed: f64) -> f64 {
    speed * tau
}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::SPEED_OF_LIGHT;
    use proptest::prelude::*;

    /// OSPA with the assignment found by trying every permutation.
    fn brute_force_ospa(x: &[f64], y: &[f64], c: f64, p: f64) -> f64 {
        let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
        let n = large.len();
        if n == 0 {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        let mut idx: Vec<usize> = (0..n).collect();
        permute(&mut idx, 0, &mut |perm| {
            let cost: f64 = small.iter().zip(perm).map(|(a, &j)| (a - large[j]).abs().min(c).powf(p)).sum();
            best = best.min(cost);
        });
        ((best + c.powf(p) * (n - small.len()) as f64) / n as f64).powf(1.0 / p)
    }

    fn permute(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == idx.len() {
            visit(idx);
            return;
        }
        for i in k..idx.len() {
            idx.swap(k, i);
            permute(idx, k + 1, visit);
            idx.swap(k, i);
        }
    }

    #[test]
    fn ospa_examples() {
        assert_eq!(ospa(&[1.0, 5.0, 2.0], &[2.0, 1.0, 5.0], 3.0, 1.0), 0.0);
        assert_eq!(ospa(&[], &[4.2], 0.7, 1.0), 0.7);
        assert!((ospa(&[0.0], &[0.0, 10.0], 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(ospa(&[], &[], 1.0, 2.0), 0.0);
    }

    #[test]
    fn assignment_matches_brute_force_up_to_eight() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for n in 1..=8 {
            for _ in 0..20 {
                let m = n + (next() * 2.0) as usize;
                let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| next()).collect()).collect();
                let a = min_cost_assignment(&cost);
                let mut seen = vec![false; m];
                for &j in &a {
                    assert!(!seen[j]);
                    seen[j] = true;
                }
                let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
                let mut best = f64::INFINITY;
                let mut idx: Vec<usize> = (0..m).collect();
                permute(&mut idx, 0, &mut |perm| {
                    best = best.min((0..n).map(|i| cost[i][perm[i]]).sum());
                });
                assert!((total - best).abs() < 1e-12, "n={n}: {total} vs {best}");
            }
        }
    }

    #[test]
    fn rmse_examples() {
        let w = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(1.1, 0.0)]);
        assert_eq!(rmse_weights(&w, &w, true).unwrap(), (0.0, 0.0));
        let (g, ph) = rmse_weights(&w, &w, false).unwrap();
        assert!((g - (0.01f64 / 2.0).sqrt()).abs() < 1e-12);
        assert_eq!(ph, 0.0);
        let a = DVector::from_element(1, Complex64::from_polar(1.0, 179f64.to_radians()));
        let b = DVector::from_element(1, Complex64::from_polar(1.0, -179f64.to_radians()));
        let (_, ph) = rmse_weights(&a, &b, true).unwrap();
        assert!((ph - 2.0).abs() < 1e-9);
        assert!(rmse_weights(&a, &w, true).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(tau_to_distance(0.0, SPEED_OF_LIGHT), 0.0);
        assert!((tau_to_distance(10e-9, SPEED_OF_LIGHT) - 2.99792458).abs() < 1e-12);
        assert!((tau_to_distance(1.0 / SPEED_OF_LIGHT, SPEED_OF_LIGHT) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(358.0), -2.0);
    }

    fn small_set() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, 0..=5)
    }

    proptest! {
        #[test]
        fn matches_brute_force(x in small_set(), y in small_set(), c in 0.1f64..4.0, p in 1.0f64..3.0) {
            let fast = ospa(&x, &y, c, p);
            prop_assert!((fast - brute_force_ospa(&x, &y, c, p)).abs() < 1e-12);
            prop_assert!((0.0..=c + 1e-12).contains(&fast));
        }

        #[test]
        fn metric_axioms(x in small_set(), y in small_set(), z in small_set(), c in 0.1f64..4.0) {
            let d = |a: &[f64], b: &[f64]| ospa(a, b, c, 1.0);
            prop_assert!((d(&x, &y) - d(&y, &x)).abs() < 1e-12);
            prop_assert!(d(&x, &x) == 0.0);
            prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
        }

        #[test]
        fn rmse_permutation_invariant(pairs in prop::collection::vec((0.1f64..2.0, -3.0f64..3.0, 0.1f64..2.0, -3.0f64..3.0), 1..6), shift in 0usize..6) {
            let est: Vec<_> = pairs.iter().map(|t| Complex64::from_polar(t.0, t.1)).collect();
            let tru: Vec<_> = pairs.iter().map(|t| Complex64::from_polar(t.2, t.3)).collect();
            let a = rmse_weights(&DVector::from_vec(est.clone()), &DVector::from_vec(tru.clone()), true).unwrap();
            let k = shift % est.len();
            let mut est2 = est.clone();
            let mut tru2 = tru.clone();
            est2.rotate_left(k);
            tru2.rotate_left(k);
            let b = rmse_weights(&DVector::from_vec(est2), &DVector::from_vec(tru2), true).unwrap();
            prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-9);
        }
    }
}
