//! Power-law tail fitting.
//!
//! The primary route is nonlinear least squares of `density ≈ a·x^(−β)` on
//! untransformed densities (damped Gauss–Newton, Marquardt scaling), with R²
//! computed in linear space. Log-log ordinary least squares is the
//! cross-check and supplies the solver's starting point. The solver works in
//! (ln a, β) coordinates: the prefactor stays positive by construction and
//! the 2×2 normal equations stay well scaled; the objective is unchanged.

use serde::Serialize;

use crate::density::TailSegment;
use crate::error::{Error, Result};
use crate::flow::Year;
use crate::numeric::ols_line;
use crate::schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitMethod {
    #[serde(rename = "nonlinear-ls")]
    NonlinearLs,
    #[serde(rename = "loglog-ols")]
    LoglogOls,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitMethod::NonlinearLs => write!(f, "nonlinear-ls"),
            FitMethod::LoglogOls => write!(f, "loglog-ols"),
        }
    }
}

impl std::str::FromStr for FitMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nonlinear" | "nonlinear-ls" | "nls" => Ok(FitMethod::NonlinearLs),
            "loglog" | "loglog-ols" | "ols" => Ok(FitMethod::LoglogOls),
            other => Err(Error::InvalidArgument(format!(
                "unknown fit method {other:?} (expected `nonlinear` or `loglog`)"
            ))),
        }
    }
}

/// A fitted power law `density = a·x^(−β)` with goodness-of-fit and tail
/// metadata.
#[derive(Debug, Clone, Serialize)]
pub struct PowerLawFit {
    pub method: FitMethod,
    pub a: f64,
    pub beta: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub tail_start: usize,
    /// Solver iterations (0 for the closed-form log-log fit).
    pub iterations: usize,
}

impl PowerLawFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a * x.powf(-self.beta)
    }
}

/// Damped Gauss–Newton contract: relative parameter tolerance and iteration
/// cap.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-10,
            max_iter: 200,
        }
    }
}

fn check_points(tail: &TailSegment) -> Result<()> {
    if tail.len() < 2 {
        return Err(Error::InsufficientData {
            op: "power-law fit",
            needed: 2,
            got: tail.len(),
        });
    }
    Ok(())
}

/// Starting point for the nonlinear solver: the log-log OLS estimates.
pub fn nl_initialize(tail: &TailSegment) -> Result<(f64, f64)> {
    check_points(tail)?;
    let lx: Vec<f64> = tail.points().iter().map(|p| p.x.ln()).collect();
    let ld: Vec<f64> = tail.points().iter().map(|p| p.density.ln()).collect();
    let line = ols_line(&lx, &ld);
    Ok((line.intercept.exp(), -line.slope))
}

/// Ordinary least squares of log density on log x; β = −slope, a =
/// exp(intercept), R² in log space.
pub fn fit_loglog(tail: &TailSegment) -> Result<PowerLawFit> {
    check_points(tail)?;
    let lx: Vec<f64> = tail.points().iter().map(|p| p.x.ln()).collect();
    let ld: Vec<f64> = tail.points().iter().map(|p| p.density.ln()).collect();
    let line = ols_line(&lx, &ld);
    Ok(PowerLawFit {
        method: FitMethod::LoglogOls,
        a: line.intercept.exp(),
        beta: -line.slope,
        r_squared: line.r_squared,
        n_points: tail.len(),
        x_min: tail.x_min(),
        x_max: tail.x_max(),
        tail_start: tail.start_index(),
        iterations: 0,
    })
}

/// Nonlinear least squares with the default contract (xtol 1e-10, 200
/// iterations).
pub fn fit_power_law(tail: &TailSegment) -> Result<PowerLawFit> {
    fit_power_law_with(tail, FitOptions::default())
}

struct Quadratic {
    g: [f64; 2],
    h: [[f64; 2]; 2],
}

fn sum_squares(theta: [f64; 2], lx: &[f64], d: &[f64]) -> f64 {
    let mut ss = 0.0;
    for (l, y) in lx.iter().zip(d) {
        let m = (theta[0] - theta[1] * l).exp();
        let r = y - m;
        ss += r * r;
    }
    ss
}

fn gradient_and_hessian(theta: [f64; 2], lx: &[f64], d: &[f64]) -> Quadratic {
    let mut g = [0.0f64; 2];
    let mut h = [[0.0f64; 2]; 2];
    for (l, y) in lx.iter().zip(d) {
        let m = (theta[0] - theta[1] * l).exp();
        let r = y - m;
        // ∂r/∂θ0 = −m, ∂r/∂θ1 = m·ln x
        g[0] += -m * r;
        g[1] += m * l * r;
        h[0][0] += m * m;
        h[0][1] += -m * m * l;
        h[1][1] += m * m * l * l;
    }
    h[1][0] = h[0][1];
    Quadratic { g, h }
}

/// Minimize Σ (density − a·x^(−β))² by a Levenberg–Marquardt-style damped
/// Gauss–Newton iteration, starting from the log-log estimates. Only
/// improving steps are accepted, so the final residual never exceeds the
/// initialization's residual in the same linear-space objective.
pub fn fit_power_law_with(tail: &TailSegment, opts: FitOptions) -> Result<PowerLawFit> {
    check_points(tail)?;
    let (a0, beta0) = nl_initialize(tail)?;
    let lx: Vec<f64> = tail.points().iter().map(|p| p.x.ln()).collect();
    let d: Vec<f64> = tail.points().iter().map(|p| p.density).collect();

    let mut theta = [a0.ln(), beta0];
    let mut ss = sum_squares(theta, &lx, &d);
    let mut lambda = 1e-3;
    let mut iterations = 0usize;
    // Residuals at the float noise floor cannot shrink further; stop there.
    let ss_floor = 1e-28 * d.iter().map(|y| y * y).sum::<f64>();

    let finish = |theta: [f64; 2], ss: f64, iterations: usize| -> Result<PowerLawFit> {
        let a = theta[0].exp();
        if !a.is_finite() || a <= 0.0 || !theta[1].is_finite() {
            return Err(Error::DidNotConverge {
                a,
                beta: theta[1],
                ss_res: ss,
                iterations,
            });
        }
        Ok(PowerLawFit {
            method: FitMethod::NonlinearLs,
            a,
            beta: theta[1],
            r_squared: linear_r_squared(&d, ss),
            n_points: tail.len(),
            x_min: tail.x_min(),
            x_max: tail.x_max(),
            tail_start: tail.start_index(),
            iterations,
        })
    };

    while iterations < opts.max_iter {
        iterations += 1;
        let quad = gradient_and_hessian(theta, &lx, &d);
        let mut accepted = None;
        while lambda <= 1e14 {
            let a00 = quad.h[0][0] * (1.0 + lambda);
            let a11 = quad.h[1][1] * (1.0 + lambda);
            let a01 = quad.h[0][1];
            let det = a00 * a11 - a01 * a01;
            if !(det.abs() > 0.0) || !det.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let delta = [
                (-a11 * quad.g[0] + a01 * quad.g[1]) / det,
                (a01 * quad.g[0] - a00 * quad.g[1]) / det,
            ];
            let candidate = [theta[0] + delta[0], theta[1] + delta[1]];
            let ss_new = sum_squares(candidate, &lx, &d);
            if ss_new.is_finite() && ss_new <= ss {
                theta = candidate;
                ss = ss_new;
                lambda = (lambda * 0.3).max(1e-14);
                accepted = Some(delta);
                break;
            }
            lambda *= 10.0;
        }
        match accepted {
            Some(delta) => {
                // θ0 = ln a, so an absolute step there is already a relative
                // step on a; β is dimensionless O(1). The +1 floor keeps the
                // criterion meaningful when a parameter passes through zero.
                let tol0 = opts.xtol * (theta[0].abs() + 1.0);
                let tol1 = opts.xtol * (theta[1].abs() + 1.0);
                if (delta[0].abs() <= tol0 && delta[1].abs() <= tol1) || ss <= ss_floor {
                    let (theta, ss) = polish(theta, ss, &lx, &d);
                    return finish(theta, ss, iterations);
                }
            }
            // Damping exhausted without an improving step: the iterate is a
            // numerical stationary point.
            None => return finish(theta, ss, iterations),
        }
    }
    Err(Error::DidNotConverge {
        a: theta[0].exp(),
        beta: theta[1],
        ss_res: ss,
        iterations,
    })
}

/// Undamped Gauss–Newton refinement after the xtol stop: quadratic
/// convergence drives the iterate to machine-precision stationarity, so the
/// fitted parameters are reproducible under last-ulp input perturbations
/// (flow rescaling, registry permutation). Near the SS floor the objective
/// cannot resolve improvements, so small Newton steps are trusted on size
/// and contraction rather than on an SS comparison; a final SS check reverts
/// anything that genuinely got worse.
fn polish(entry: [f64; 2], entry_ss: f64, lx: &[f64], d: &[f64]) -> ([f64; 2], f64) {
    let mut theta = entry;
    let mut prev_norm = f64::INFINITY;
    for _ in 0..6 {
        let quad = gradient_and_hessian(theta, lx, d);
        let det = quad.h[0][0] * quad.h[1][1] - quad.h[0][1] * quad.h[0][1];
        if !(det.abs() > 0.0) || !det.is_finite() {
            break;
        }
        let delta = [
            (-quad.h[1][1] * quad.g[0] + quad.h[0][1] * quad.g[1]) / det,
            (quad.h[0][1] * quad.g[0] - quad.h[0][0] * quad.g[1]) / det,
        ];
        let norm = (delta[0] / (theta[0].abs() + 1e-15))
            .abs()
            .max((delta[1] / (theta[1].abs() + 1e-15)).abs());
        if !norm.is_finite() || norm > 1e-4 || norm > prev_norm {
            break;
        }
        theta = [theta[0] + delta[0], theta[1] + delta[1]];
        prev_norm = norm;
        if norm <= 1e-15 {
            break;
        }
    }
    let ss = sum_squares(theta, lx, d);
    if !ss.is_finite() || ss > entry_ss * (1.0 + 1e-9) {
        return (entry, entry_ss);
    }
    (theta, ss.min(entry_ss))
}

/// R² = 1 − SS_res/SS_tot on untransformed densities. A zero-variance
/// response fitted exactly reports 1; pathological misfits may go negative
/// and are reported as-is.
fn linear_r_squared(d: &[f64], ss_res: f64) -> f64 {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let ss_tot: f64 = d.iter().map(|y| (y - mean) * (y - mean)).sum();
    let scale = d.iter().fold(1.0f64, |m, y| m.max(y.abs()));
    if ss_tot <= 1e-28 * n * scale * scale {
        if ss_res <= ss_tot {
            return 1.0;
        }
        return f64::NEG_INFINITY;
    }
    1.0 - ss_res / ss_tot
}

/// Dispatch on the configured method.
pub fn fit_with_method(tail: &TailSegment, method: FitMethod) -> Result<PowerLawFit> {
    match method {
        FitMethod::NonlinearLs => fit_power_law(tail),
        FitMethod::LoglogOls => fit_loglog(tail),
    }
}

/// The fit JSON wire format.
#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema: &'static str,
    pub activity_type: String,
    pub year: Year,
    pub method: FitMethod,
    pub a: f64,
    pub beta: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub tail_start: usize,
}

impl FitReport {
    pub fn new(activity_type: &str, year: Year, fit: &PowerLawFit) -> Self {
        Self {
            schema: schema::FIT,
            activity_type: activity_type.to_owned(),
            year,
            method: fit.method,
            a: fit.a,
            beta: fit.beta,
            r_squared: fit.r_squared,
            n_points: fit.n_points,
            x_min: fit.x_min,
            x_max: fit.x_max,
            tail_start: fit.tail_start,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::TailPoint;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn tail_from(a: f64, beta: f64, xs: &[f64]) -> TailSegment {
        let points = xs
            .iter()
            .map(|&x| TailPoint {
                x,
                density: a * x.powf(-beta),
            })
            .collect();
        TailSegment::new(1, points).unwrap()
    }

    fn grid() -> Vec<f64> {
        (0..19).map(|k| 750.0 + 500.0 * k as f64).collect()
    }

    #[test]
    fn exact_points_recover_model() {
        let tail = tail_from(5.0, 1.5, &grid());
        for fit in [fit_power_law(&tail).unwrap(), fit_loglog(&tail).unwrap()] {
            assert_abs_diff_eq!(fit.a, 5.0, epsilon = 5.0 * 1e-9);
            assert_abs_diff_eq!(fit.beta, 1.5, epsilon = 1.5 * 1e-9);
            assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-9);
        }
        let nl = fit_power_law(&tail).unwrap();
        assert!(nl.iterations <= 2, "iterations = {}", nl.iterations);
        assert_eq!(nl.n_points, 19);
        assert_eq!(nl.x_min, 750.0);
        assert_eq!(nl.x_max, 9750.0);
    }

    #[test]
    fn two_point_slope_is_exact() {
        let points = vec![
            TailPoint {
                x: 1000.0,
                density: 1e-3,
            },
            TailPoint {
                x: 2000.0,
                density: 2.5e-4,
            },
        ];
        let tail = TailSegment::new(1, points).unwrap();
        let fit = fit_loglog(&tail).unwrap();
        assert_abs_diff_eq!(fit.beta, 2.0, epsilon = 1e-12);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn initialization_equals_loglog_estimates() {
        let tail = tail_from(0.3, 2.2, &grid());
        let (a0, b0) = nl_initialize(&tail).unwrap();
        let ll = fit_loglog(&tail).unwrap();
        assert_eq!(a0, ll.a);
        assert_eq!(b0, ll.beta);
    }

    fn noisy_tail(a: f64, beta: f64, sigma: f64, seed: u64) -> TailSegment {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let points = grid()
            .iter()
            .map(|&x| {
                let z: f64 = rng.random::<f64>() - 0.5;
                TailPoint {
                    x,
                    density: a * x.powf(-beta) * (sigma * z).exp(),
                }
            })
            .collect();
        TailSegment::new(1, points).unwrap()
    }

    #[test]
    fn near_flat_tail_converges_with_small_beta() {
        let tail = noisy_tail(4.0, 0.0, 0.02, 11);
        let (_, b0) = nl_initialize(&tail).unwrap();
        assert!(b0.abs() < 0.05, "beta0 = {b0}");
        let fit = fit_power_law(&tail).unwrap();
        assert!(fit.beta.abs() < 0.05);
        assert!(fit.a > 0.0);
    }

    #[test]
    fn noisy_fits_agree_within_band() {
        for seed in 0..5 {
            let tail = noisy_tail(2.0, 1.8, 0.2, seed);
            let nl = fit_power_law(&tail).unwrap();
            let ll = fit_loglog(&tail).unwrap();
            assert!(
                (nl.beta - ll.beta).abs() < 0.15,
                "seed {seed}: nl {} vs ll {}",
                nl.beta,
                ll.beta
            );
        }
    }

    #[test]
    fn solver_never_worsens_its_start() {
        for seed in 0..5 {
            let tail = noisy_tail(1.0, 2.0, 0.3, seed);
            let (a0, b0) = nl_initialize(&tail).unwrap();
            let lx: Vec<f64> = tail.points().iter().map(|p| p.x.ln()).collect();
            let d: Vec<f64> = tail.points().iter().map(|p| p.density).collect();
            let ss_init = sum_squares([a0.ln(), b0], &lx, &d);
            let fit = fit_power_law(&tail).unwrap();
            let ss_final = sum_squares([fit.a.ln(), fit.beta], &lx, &d);
            assert!(ss_final <= ss_init + 1e-15);
        }
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let tail = noisy_tail(1.0, 2.0, 0.5, 3);
        let err = fit_power_law_with(
            &tail,
            FitOptions {
                xtol: 1e-10,
                max_iter: 1,
            },
        )
        .unwrap_err();
        match err {
            Error::DidNotConverge {
                a,
                beta,
                ss_res,
                iterations,
            } => {
                assert_eq!(iterations, 1);
                assert!(a > 0.0 && beta.is_finite() && ss_res.is_finite());
            }
            other => panic!("expected DidNotConverge, got {other:?}"),
        }
    }

    #[test]
    fn single_point_is_insufficient() {
        let points = vec![TailPoint {
            x: 1000.0,
            density: 1.0,
        }];
        let tail = TailSegment::new(1, points).unwrap();
        assert!(matches!(
            fit_power_law(&tail),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn x_rescaling_maps_prefactor_and_keeps_beta() {
        // Measuring x in units 1/s the size (x' = s·x, densities unchanged)
        // maps a → a·s^β and leaves β alone; equivalently x' = x/s maps
        // a → a·s^(−β).
        let a = 2.0;
        let beta = 1.7;
        let s = 3.25;
        let xs = grid();
        let tail = tail_from(a, beta, &xs);
        let scaled_xs: Vec<f64> = xs.iter().map(|x| x * s).collect();
        let points = scaled_xs
            .iter()
            .zip(tail.points())
            .map(|(&x, p)| TailPoint {
                x,
                density: p.density,
            })
            .collect();
        let scaled = TailSegment::new(1, points).unwrap();

        let base = fit_loglog(&tail).unwrap();
        let moved = fit_loglog(&scaled).unwrap();
        assert_abs_diff_eq!(moved.beta, base.beta, epsilon = 1e-12);
        let expected_a = base.a * s.powf(base.beta);
        assert_abs_diff_eq!(moved.a, expected_a, epsilon = expected_a * 1e-9);

        let nl_base = fit_power_law(&tail).unwrap();
        let nl_moved = fit_power_law(&scaled).unwrap();
        assert_abs_diff_eq!(nl_moved.beta, nl_base.beta, epsilon = 1e-8);
        let nl_expected_a = nl_base.a * s.powf(nl_base.beta);
        assert_abs_diff_eq!(nl_moved.a, nl_expected_a, epsilon = nl_expected_a * 1e-6);
    }
}
