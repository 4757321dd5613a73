//! Nelder-Mead simplex minimizer with an evaluation budget.

/// Stopping rules for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_evaluations: usize,
    /// Stop once every vertex is within this distance (per coordinate) of the best one...
    pub x_tol: f64,
    /// ...and every function value is within `f_tol * |f_best|` of the best one.
    pub f_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 200,
            x_tol: 1e-7,
            f_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// The budget ran out before the tolerances were met.
    pub budget_exhausted: bool,
}

/// Minimizes `f` starting from a simplex with vertices `x0` and `x0 + step_i e_i`.
///
/// `f` may return `+inf` (or NaN, treated as `+inf`) for infeasible points.
pub fn minimize<F>(mut f: F, x0: &[f64], steps: &[f64], options: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), steps.len());
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    verts.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        verts.push(v);
    }
    let mut vals: Vec<f64> = verts.iter().map(|v| eval(v, &mut evals)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];

    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> { c.iter().zip(w).map(|(c, w)| c + t * (w - c)).collect() };

    let mut exhausted = false;
    loop {
        // stable sort keeps the earlier vertex on ties
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];

        let x_spread = verts
            .iter()
            .flat_map(|v| v.iter().zip(&verts[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let f_spread = vals.iter().map(|v| (v - vals[best]).abs()).fold(0.0, f64::max);
        if x_spread <= options.x_tol && f_spread <= options.f_tol * vals[best].abs() {
            break;
        }
        if evals >= options.max_evaluations {
            exhausted = true;
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            centroid.iter_mut().zip(&verts[i]).for_each(|(c, v)| *c += v / n as f64);
        }

        let xr = point(&centroid, &verts[worst], -1.0);
        let fr = eval(&xr, &mut evals);
        if fr < vals[best] {
            let xe = point(&centroid, &verts[worst], -2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                verts[worst] = xe;
                vals[worst] = fe;
            } else {
                verts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            verts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        // contraction: outside if the reflection beat the worst vertex, else inside
        let (xc, fc) = if fr < vals[worst] {
            let xc = point(&centroid, &verts[worst], -0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = point(&centroid, &verts[worst], 0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < vals[worst].min(fr) {
            verts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        // shrink towards the best vertex
        let anchor = verts[best].clone();
        for i in 0..=n {
            if i == best {
                continue;
            }
            verts[i] = point(&anchor, &verts[i], 0.5);
            vals[i] = eval(&verts[i], &mut evals);
        }
    }

    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    SimplexResult {
        x: verts[best].clone(),
        value: vals[best],
        evaluations: evals,
        budget_exhausted: exhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = minimize(
            |x| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.25).powi(2) + 2.0,
            &[0.0, 0.0],
            &[1.0, 1.0],
            &SimplexOptions::default(),
        );
        assert!((r.x[0] - 1.5).abs() < 1e-6 && (r.x[1] + 0.25).abs() < 1e-6, "{r:?}");
        assert!(!r.budget_exhausted);
        assert!(r.evaluations <= 200);
    }

    #[test]
    fn rosenbrock_hits_budget_gracefully() {
        let opts = SimplexOptions {
            max_evaluations: 30,
            ..Default::default()
        };
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let start = f(&[-1.2, 1.0]);
        let r = minimize(f, &[-1.2, 1.0], &[0.5, 0.5], &opts);
        assert!(r.budget_exhausted);
        assert!(r.value <= start);
        // one iteration can overshoot by reflect + contract + shrink
        assert!(r.evaluations <= 30 + 3);
    }

    #[test]
    fn infeasible_region_is_avoided() {
        let r = minimize(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.1).powi(2) + x[1] * x[1] },
            &[1.0, 1.0],
            &[1.0, 1.0],
            &SimplexOptions::default(),
        );
        assert!(r.x[0] >= 0.0);
        assert!((r.x[0] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn never_worse_than_start() {
        for s in 0..50 {
            let a = 0.3 + s as f64 * 0.17;
            let f = |x: &[f64]| (a * x[0]).sin() * (x[1] * 1.3).cos() + 0.01 * x[0] * x[0];
            let x0 = [s as f64 * 0.1, -(s as f64) * 0.05];
            let r = minimize(f, &x0, &[1.0, 1.0], &SimplexOptions::default());
            assert!(r.value <= f(&x0));
        }
    }
}
