//! Quasi-maximum-likelihood calibration from discretely observed paths.
//!
//! The exact transition density of the quartic-drift diffusion has no
//! closed form; the likelihood uses the Euler approximation
//!
//! ```text
//! X_{t+dt} | X_t ~ Normal( x + (θx - κx² - gx³) dt,  σ²x²dt )
//! ```
//!
//! which is consistent as `dt → 0`. Only the reduced-form parameters
//! `(θ, κ, g, σ)` are identifiable from a single price path; the
//! microstructure parameters enter only through the forward map (`κ` and
//! `g` share the factor `μ_impact - 1`), so they are not fitted here. The
//! constant flow rate `ū` can be estimated from exogenous aggregate inflow
//! data with [`flow_rate_estimate`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("consecutive zero observations at index {index}; truncate the absorbed tail first")]
    DegenerateObservation { index: usize },
    #[error("non-positive observation {value} at index {index}")]
    NonPositiveObservation { index: usize, value: f64 },
    #[error("invalid calibration input: {0}")]
    Config(String),
}

/// Reduced-form parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub theta: f64,
    pub kappa: f64,
    pub g: f64,
    pub sigma: f64,
}

impl FitParams {
    pub fn new(theta: f64, kappa: f64, g: f64, sigma: f64) -> Self {
        Self {
            theta,
            kappa,
            g,
            sigma,
        }
    }

    fn to_array(self) -> [f64; 4] {
        [self.theta, self.kappa, self.g, self.sigma]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    fn drift_coefficient(&self, x: f64) -> f64 {
        self.theta - self.kappa * x - self.g * x * x
    }
}

/// Box bounds for the optimizer. The defaults keep `σ > 0` and `g >= 0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lo: FitParams,
    pub hi: FitParams,
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            lo: FitParams::new(-10.0, -10.0, 0.0, 1e-6),
            hi: FitParams::new(10.0, 10.0, 10.0, 5.0),
        }
    }
}

impl ParamBounds {
    fn validate(&self) -> Result<(), CalibrateError> {
        let lo = self.lo.to_array();
        let hi = self.hi.to_array();
        for i in 0..4 {
            if !(lo[i] <= hi[i]) {
                return Err(CalibrateError::Config(format!(
                    "empty bounds: component {i} has lo {} > hi {}",
                    lo[i], hi[i]
                )));
            }
        }
        if !(self.lo.sigma > 0.0) {
            return Err(CalibrateError::Config(format!(
                "sigma lower bound must be positive, got {}",
                self.lo.sigma
            )));
        }
        if self.lo.g < 0.0 {
            return Err(CalibrateError::Config(format!(
                "g lower bound must be non-negative, got {}",
                self.lo.g
            )));
        }
        Ok(())
    }

    fn clamp(&self, p: [f64; 4]) -> [f64; 4] {
        let lo = self.lo.to_array();
        let hi = self.hi.to_array();
        std::array::from_fn(|i| p[i].clamp(lo[i], hi[i]))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    pub params: FitParams,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Asymptotic standard errors from the inverse observed information,
    /// when the Hessian is usable at the optimum.
    pub stderr_estimates: Option<FitParams>,
}

fn validate_path(path: &[f64], dt: f64) -> Result<(), CalibrateError> {
    if path.len() < 2 {
        return Err(CalibrateError::Config(format!(
            "need at least 2 observations, got {}",
            path.len()
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(CalibrateError::Config(format!(
            "dt must be positive and finite, got {dt}"
        )));
    }
    for (i, w) in path.windows(2).enumerate() {
        if w[0] == 0.0 && w[1] == 0.0 {
            return Err(CalibrateError::DegenerateObservation { index: i });
        }
    }
    if let Some((i, &v)) = path.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(CalibrateError::NonPositiveObservation { index: i, value: v });
    }
    Ok(())
}

/// Sum of log Gaussian Euler transition densities along an equally spaced,
/// strictly positive path.
pub fn loglik(params: &FitParams, path: &[f64], dt: f64) -> Result<f64, CalibrateError> {
    validate_path(path, dt)?;
    if !(params.sigma > 0.0) {
        return Err(CalibrateError::Config(format!(
            "sigma must be positive, got {}",
            params.sigma
        )));
    }
    let s2 = params.sigma * params.sigma;
    let mut ll = 0.0;
    for w in path.windows(2) {
        let x = w[0];
        let mean = x + x * params.drift_coefficient(x) * dt;
        let var = s2 * x * x * dt;
        let r = w[1] - mean;
        ll += -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + r * r / var);
    }
    Ok(ll)
}

/// Per-observation cache so the optimizer avoids re-deriving increments.
struct ObsCache {
    xs: Vec<f64>,
    /// Per-step drift-coefficient observations `y = Δx / (x dt)`.
    ys: Vec<f64>,
    sum_ln_x: f64,
    dt: f64,
}

impl ObsCache {
    fn new(path: &[f64], dt: f64) -> Self {
        let n = path.len() - 1;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let mut sum_ln_x = 0.0;
        for w in path.windows(2) {
            xs.push(w[0]);
            ys.push((w[1] - w[0]) / (w[0] * dt));
            sum_ln_x += w[0].ln();
        }
        Self {
            xs,
            ys,
            sum_ln_x,
            dt,
        }
    }

    /// Same value as [`loglik`], rearranged so the hot loop is free of
    /// transcendentals.
    fn loglik(&self, p: &FitParams) -> f64 {
        let n = self.xs.len() as f64;
        let s2 = p.sigma * p.sigma;
        let mut rss = 0.0;
        for (&x, &y) in self.xs.iter().zip(&self.ys) {
            let e = y - p.drift_coefficient(x);
            rss += e * e;
        }
        -0.5 * (n * (2.0 * std::f64::consts::PI * self.dt).ln()
            + 2.0 * n * p.sigma.ln()
            + 2.0 * self.sum_ln_x
            + self.dt * rss / s2)
    }

    /// Weighted least squares of `y` on `(1, -x, -x²)` plus the residual
    /// volatility; used as a deterministic warm start.
    fn ols_start(&self) -> Option<FitParams> {
        let mut a = [[0.0f64; 3]; 3];
        let mut b = [0.0f64; 3];
        for (&x, &y) in self.xs.iter().zip(&self.ys) {
            let z = [1.0, -x, -x * x];
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] += z[i] * z[j];
                }
                b[i] += z[i] * y;
            }
        }
        let coef = solve3(a, b)?;
        let p3 = FitParams::new(coef[0], coef[1], coef[2], 1.0);
        let rss: f64 = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(&x, &y)| {
                let e = y - p3.drift_coefficient(x);
                e * e
            })
            .sum();
        let sigma = (rss / self.xs.len() as f64 * self.dt).sqrt();
        Some(FitParams::new(coef[0], coef[1], coef[2], sigma))
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut s = b[col];
        for k in col + 1..3 {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

const MAX_NM_ITERATIONS: usize = 1200;

struct StartResult {
    params: [f64; 4],
    loglik: f64,
    iterations: usize,
    converged: bool,
}

/// Nelder–Mead descent on the negative log-likelihood with box clamping.
fn nelder_mead(
    cache: &ObsCache,
    bounds: &ParamBounds,
    start: [f64; 4],
    opt_tol: f64,
) -> StartResult {
    let scales = {
        let lo = bounds.lo.to_array();
        let hi = bounds.hi.to_array();
        std::array::from_fn::<f64, 4, _>(|i| (hi[i] - lo[i]).max(1e-9))
    };
    let objective = |raw: &[f64; 4]| -> f64 {
        let clamped = bounds.clamp(*raw);
        let mut penalty = 0.0;
        for i in 0..4 {
            let d = (raw[i] - clamped[i]) / scales[i];
            penalty += 1e6 * d * d;
        }
        -cache.loglik(&FitParams::from_array(clamped)) + penalty
    };

    // Initial simplex: the start plus one vertex per coordinate.
    let mut simplex: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    let p0 = bounds.clamp(start);
    simplex.push((p0, objective(&p0)));
    for i in 0..4 {
        let mut v = p0;
        let step = (0.2 * v[i].abs()).max(0.02 * scales[i].min(1.0)).max(1e-4);
        v[i] += step;
        simplex.push((v, objective(&v)));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_NM_ITERATIONS {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[4].1 - simplex[0].1;
        if spread.abs() < opt_tol {
            converged = true;
            break;
        }

        let mut centroid = [0.0; 4];
        for v in &simplex[0..4] {
            for i in 0..4 {
                centroid[i] += v.0[i] / 4.0;
            }
        }
        let worst = simplex[4];
        let reflect: [f64; 4] = std::array::from_fn(|i| centroid[i] + (centroid[i] - worst.0[i]));
        let f_reflect = objective(&reflect);

        if f_reflect < simplex[0].1 {
            let expand: [f64; 4] =
                std::array::from_fn(|i| centroid[i] + 2.0 * (centroid[i] - worst.0[i]));
            let f_expand = objective(&expand);
            simplex[4] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[3].1 {
            simplex[4] = (reflect, f_reflect);
        } else {
            let (towards, f_towards) = if f_reflect < worst.1 {
                (reflect, f_reflect)
            } else {
                (worst.0, worst.1)
            };
            let contract: [f64; 4] =
                std::array::from_fn(|i| centroid[i] + 0.5 * (towards[i] - centroid[i]));
            let f_contract = objective(&contract);
            if f_contract < f_towards {
                simplex[4] = (contract, f_contract);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let shrunk: [f64; 4] =
                        std::array::from_fn(|i| best[i] + 0.5 * (v.0[i] - best[i]));
                    *v = (shrunk, objective(&shrunk));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let best = bounds.clamp(simplex[0].0);
    StartResult {
        params: best,
        loglik: cache.loglik(&FitParams::from_array(best)),
        iterations,
        converged,
    }
}

/// Standard errors from the observed information at the optimum.
fn hessian_stderr(cache: &ObsCache, p: [f64; 4]) -> Option<FitParams> {
    let f = |q: [f64; 4]| cache.loglik(&FitParams::from_array(q));
    let h: [f64; 4] = std::array::from_fn(|i| 1e-4 * p[i].abs().max(1.0));
    let mut hess = [[0.0f64; 4]; 4];
    let f0 = f(p);
    for i in 0..4 {
        for j in i..4 {
            let v = if i == j {
                let (mut pp, mut pm) = (p, p);
                pp[i] += h[i];
                pm[i] -= h[i];
                (f(pp) - 2.0 * f0 + f(pm)) / (h[i] * h[i])
            } else {
                let (mut a, mut b, mut c, mut d) = (p, p, p, p);
                a[i] += h[i];
                a[j] += h[j];
                b[i] += h[i];
                b[j] -= h[j];
                c[i] -= h[i];
                c[j] += h[j];
                d[i] -= h[i];
                d[j] -= h[j];
                (f(a) - f(b) - f(c) + f(d)) / (4.0 * h[i] * h[j])
            };
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    // Covariance = inverse of the negative Hessian.
    let mut neg = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            neg[i][j] = -hess[i][j];
        }
    }
    let inv = invert4(neg)?;
    let diag: [f64; 4] = std::array::from_fn(|i| inv[i][i]);
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return None;
    }
    Some(FitParams::from_array(std::array::from_fn(|i| {
        diag[i].sqrt()
    })))
}

fn invert4(a: [[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut m = [[0.0f64; 8]; 4];
    for i in 0..4 {
        m[i][..4].copy_from_slice(&a[i]);
        m[i][4 + i] = 1.0;
    }
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        let d = m[col][col];
        for k in 0..8 {
            m[col][k] /= d;
        }
        for row in 0..4 {
            if row != col {
                let f = m[row][col];
                for k in 0..8 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    let mut out = [[0.0f64; 4]; 4];
    for i in 0..4 {
        out[i].copy_from_slice(&m[i][4..]);
    }
    Some(out)
}

/// Maximizes the Euler quasi-likelihood by deterministic multi-start
/// Nelder–Mead.
///
/// The start set is the caller's `init`, a least-squares warm start and
/// four fixed multiplicative tweaks of `init`; the best final likelihood
/// wins, ties broken by start index. The result is flagged unconverged
/// when no start terminated within the iteration cap (the best point is
/// still returned).
pub fn fit(
    path: &[f64],
    dt: f64,
    init: &FitParams,
    bounds: &ParamBounds,
    opt_tol: f64,
) -> Result<CalibrationResult, CalibrateError> {
    validate_path(path, dt)?;
    bounds.validate()?;
    if !(opt_tol > 0.0) {
        return Err(CalibrateError::Config(format!(
            "opt_tol must be positive, got {opt_tol}"
        )));
    }
    let cache = ObsCache::new(path, dt);

    let mut starts: Vec<[f64; 4]> = vec![init.to_array()];
    if let Some(ols) = cache.ols_start() {
        starts.push(bounds.clamp(ols.to_array()));
    }
    let i0 = init.to_array();
    starts.push(std::array::from_fn(|i| i0[i] * 1.3));
    starts.push(std::array::from_fn(|i| i0[i] * 0.7));
    starts.push([i0[0] * 0.8, i0[1] * 1.2, i0[2] * 1.2, i0[3] * 0.8]);
    starts.push([i0[0] * 1.2, i0[1] * 0.8, i0[2] * 0.8, i0[3] * 1.2]);

    let results: Vec<StartResult> = starts
        .par_iter()
        .map(|s| nelder_mead(&cache, bounds, *s, opt_tol))
        .collect();

    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.loglik > results[best].loglik {
            best = i;
        }
    }
    let winner = &results[best];
    let params = FitParams::from_array(winner.params);
    Ok(CalibrationResult {
        params,
        loglik: winner.loglik,
        converged: winner.converged,
        iterations: winner.iterations,
        stderr_estimates: hessian_stderr(&cache, winner.params),
    })
}

/// Flow-rate estimate from aggregate inflow data:
/// `ū = equity_fraction · annual_inflow / market_cap`.
pub fn flow_rate_estimate(annual_inflow: f64, market_cap: f64, equity_fraction: f64) -> f64 {
    assert!(market_cap > 0.0, "market cap must be positive");
    assert!(
        (0.0..=1.0).contains(&equity_fraction),
        "equity fraction must lie in [0, 1]"
    );
    equity_fraction * annual_inflow / market_cap
}
