//! Rare-event and stability analysis.
//!
//! Escape from a metastable well is quantified two independent ways that
//! bracket the same physical quantity:
//!
//! * exact mean first-passage quadrature for the 1-D diffusion
//!   `dX = -U'(X) dt + σX dW`, built on the scale density
//!   `exp(-∫ 2U'(u)/(σ²u²) du)`;
//! * Monte Carlo absorption statistics from the simulator.
//!
//! The singular small-noise limit shows up as `log(1/MFPT)` scaling
//! linearly in `1/σ²`, and the zero-noise barrier-hopping trajectories
//! (instanton, anti-instanton, bounce) come from integrating the
//! time-reversed gradient flow `dx/dt = +U'(x)` from a well to the
//! barrier top.

use crate::models::ModelSpec;
use crate::potential::QuarticPotential;
use crate::quad::{self, QuadError};
use crate::simulate::{simulate_outcomes, PathEnsemble, PathOutcome, SimConfig, SimError};
use crate::stats;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("scale density not integrable: {0}")]
    NonIntegrable(String),
    #[error("potential shape unsuitable: {0}")]
    Shape(String),
    #[error("invalid analysis input: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl From<QuadError> for AnalysisError {
    fn from(e: QuadError) -> Self {
        AnalysisError::NonIntegrable(e.to_string())
    }
}

/// Escape direction; the only supported mode is downward, through the
/// barrier toward the default boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeDirection {
    #[default]
    DownThroughBarrier,
}

/// First-passage problem: starting point (typically a metastable minimum)
/// and exit level (typically the barrier top or the absorption threshold).
///
/// The quadrature below is exact for any positive `start >= exit`; the rate
/// interpretation additionally needs a barrier between them, which
/// [`escape_scaling_fit`] enforces.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EscapeProblem {
    pub potential: QuarticPotential,
    pub sigma: f64,
    pub start: f64,
    pub exit: f64,
    pub direction: EscapeDirection,
}

impl EscapeProblem {
    pub fn new(
        potential: QuarticPotential,
        sigma: f64,
        start: f64,
        exit: f64,
    ) -> Result<Self, AnalysisError> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(AnalysisError::Config(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        if !(exit > 0.0) || !(start >= exit) || !start.is_finite() {
            return Err(AnalysisError::Config(format!(
                "need 0 < exit <= start, got start = {start}, exit = {exit}"
            )));
        }
        Ok(Self {
            potential,
            sigma,
            start,
            exit,
            direction: EscapeDirection::DownThroughBarrier,
        })
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self, AnalysisError> {
        Self::new(self.potential, sigma, self.start, self.exit)
    }

    /// Log scale-density exponent `G(x) = ∫ 2U'(u)/(σ²u²) du` (closed form
    /// for the quartic), normalized so `G(start) = 0`.
    fn log_scale_exponent(&self, x: f64) -> f64 {
        let p = &self.potential;
        let s2 = self.sigma * self.sigma;
        let antiderivative = |u: f64| -> f64 {
            2.0 / s2 * (-p.theta * u.ln() + p.kappa * u + 0.5 * p.g * u * u)
        };
        antiderivative(x) - antiderivative(self.start)
    }
}

const MFPT_CUTOFF_MARGIN: f64 = 25.0;
const MAX_LOG_SCALE_SPAN: f64 = 700.0;

/// Reflecting upper cutoff: the lowest `R` above the start (and above the
/// rightmost critical point) where `U(R) >= U(start) + margin·σ²`.
fn reflecting_cutoff(ep: &EscapeProblem, margin: f64) -> Result<f64, AnalysisError> {
    let p = &ep.potential;
    let target = p.evaluate(ep.start) + margin * ep.sigma * ep.sigma;
    let rightmost = p
        .critical_points(1e-9)
        .iter()
        .map(|c| c.location)
        .fold(ep.start, f64::max);
    let mut lo = rightmost.max(ep.start);
    let mut hi = lo.max(1e-3) * 2.0;
    let mut grew = 0;
    while p.evaluate(hi) < target {
        hi *= 2.0;
        grew += 1;
        if grew > 200 {
            return Err(AnalysisError::Shape(format!(
                "potential never rises {margin}σ² above U(start); no reflecting cutoff"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p.evaluate(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= 1e-12 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(hi)
}

/// Largest scale-density exponent spread `G(y) - min_{z in [y, R]} G(z)`
/// reachable by the double integral; used to detect overflow up front.
fn worst_exponent(ep: &EscapeProblem, cutoff: f64) -> (f64, f64, f64) {
    let mut ys: Vec<f64> = vec![ep.exit, ep.start];
    let mut zs: Vec<f64> = vec![cutoff];
    for c in ep.potential.critical_points(1e-9) {
        if c.location > ep.exit && c.location < ep.start {
            ys.push(c.location);
        }
        if c.location > ep.exit && c.location < cutoff {
            zs.push(c.location);
        }
    }
    let mut worst = (f64::NEG_INFINITY, ep.exit, ep.exit);
    for &y in &ys {
        let gy = ep.log_scale_exponent(y);
        let mut zmin = (gy, y);
        for &z in zs.iter().filter(|&&z| z >= y) {
            let gz = ep.log_scale_exponent(z);
            if gz < zmin.0 {
                zmin = (gz, z);
            }
        }
        if gy - zmin.0 > worst.0 {
            worst = (gy - zmin.0, y, zmin.1);
        }
    }
    worst
}

fn mfpt_with_margin(
    ep: &EscapeProblem,
    quad_tol: f64,
    margin: f64,
) -> Result<f64, AnalysisError> {
    if !(quad_tol > 0.0) {
        return Err(AnalysisError::Config(format!(
            "quadrature tolerance must be positive, got {quad_tol}"
        )));
    }
    if ep.start == ep.exit {
        return Ok(0.0);
    }
    let cutoff = reflecting_cutoff(ep, margin)?;
    let (span, y_bad, z_bad) = worst_exponent(ep, cutoff);
    if span > MAX_LOG_SCALE_SPAN {
        return Err(AnalysisError::NonIntegrable(format!(
            "scale density overflows: exp({span:.1}) needed on subinterval [{z_bad:.6}, {y_bad:.6}]"
        )));
    }

    let s2 = ep.sigma * ep.sigma;
    let inner_tol = 0.1 * quad_tol;
    // T(start) = ∫_exit^start e^{G(y)} ∫_y^R 2 e^{-G(z)} / (σ²z²) dz dy,
    // with the inner integral shifted by G(y) so every exponent stays
    // within the rare-event span checked above.
    let outer = |y: f64| -> f64 {
        let gy = ep.log_scale_exponent(y);
        let inner = |z: f64| 2.0 / (s2 * z * z) * (gy - ep.log_scale_exponent(z)).exp();
        quad::integrate(&inner, y, cutoff, inner_tol).unwrap_or(f64::NAN)
    };
    Ok(quad::integrate(&outer, ep.exit, ep.start, quad_tol)?)
}

/// Mean first-passage time from `start` down to `exit` by exact adaptive
/// quadrature of the scale-density double integral, with a reflecting
/// upper cutoff where `U` exceeds `U(start)` by 25σ².
pub fn mfpt_quadrature(ep: &EscapeProblem, quad_tol: f64) -> Result<f64, AnalysisError> {
    mfpt_with_margin(ep, quad_tol, MFPT_CUTOFF_MARGIN)
}

/// Fraction of paths absorbed by the horizon, with binomial standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DefaultProbability {
    pub probability: f64,
    pub std_error: f64,
    pub n_absorbed: usize,
    pub n_paths: usize,
}

impl DefaultProbability {
    pub fn from_outcomes(outcomes: &[PathOutcome]) -> Self {
        let n = outcomes.len();
        let k = outcomes.iter().filter(|o| o.absorbed_at.is_some()).count();
        let p = k as f64 / n as f64;
        DefaultProbability {
            probability: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n_absorbed: k,
            n_paths: n,
        }
    }

    /// Whether the 95% normal-approximation interval excludes zero.
    pub fn excludes_zero(&self) -> bool {
        self.n_absorbed > 0 && self.probability > 1.96 * self.std_error
    }
}

/// Monte Carlo default probability: the fraction of paths absorbed by the
/// horizon. Requires a multiplicative model (ABM has no absorbing state).
pub fn default_probability_mc(
    m: &ModelSpec,
    cfg: &SimConfig,
) -> Result<DefaultProbability, AnalysisError> {
    if !m.is_multiplicative() {
        return Err(AnalysisError::Config(
            "default probability needs a multiplicative model with an absorbing state".into(),
        ));
    }
    let outcomes = simulate_outcomes(m, cfg)?;
    Ok(DefaultProbability::from_outcomes(&outcomes))
}

/// Exponential escape scaling over a volatility grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EscapeScalingFit {
    /// Magnitude of the fitted slope of `log(1/MFPT)` against `1/σ²`
    /// (the action of the dominant escape path).
    pub action: f64,
    pub r_squared: f64,
}

/// Regress `log(1/MFPT)` on `1/σ²` over a grid of volatilities.
///
/// Requires at least four grid points and a barrier-bearing potential;
/// an inverted parabola or single well has no rate to fit.
pub fn escape_scaling_fit(
    ep: &EscapeProblem,
    sigma_grid: &[f64],
) -> Result<EscapeScalingFit, AnalysisError> {
    if sigma_grid.len() < 4 {
        return Err(AnalysisError::Config(format!(
            "need at least 4 grid points, got {}",
            sigma_grid.len()
        )));
    }
    let report = ep.potential.classify(1e-9);
    if report.barrier_height.is_none() {
        return Err(AnalysisError::Shape(format!(
            "{:?} potential has no barrier; escape rate undefined",
            report.shape_label
        )));
    }
    let mut xs = Vec::with_capacity(sigma_grid.len());
    let mut ys = Vec::with_capacity(sigma_grid.len());
    for &sigma in sigma_grid {
        let t = mfpt_quadrature(&ep.with_sigma(sigma)?, 1e-8)?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(AnalysisError::NonIntegrable(format!(
                "MFPT at sigma = {sigma} is {t}; escape not measurable"
            )));
        }
        xs.push(1.0 / (sigma * sigma));
        ys.push((1.0 / t).ln());
    }
    let fit = stats::linear_fit(&xs, &ys);
    Ok(EscapeScalingFit {
        action: fit.slope.abs(),
        r_squared: fit.r_squared,
    })
}

/// Zero-noise barrier-hopping trajectory kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstantonKind {
    Instanton,
    AntiInstanton,
    Bounce,
}

/// A barrier-hopping trajectory on a uniform time grid.
#[derive(Debug, Clone, Serialize)]
pub struct InstantonPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: InstantonKind,
}

/// Integrates the time-reversed gradient flow `dx/dt = +U'(x)` from the
/// metastable minimum (offset by `1e-6` of the well-to-barrier distance)
/// up to the barrier top, stopping once `|U'(x)| < ode_tol`.
///
/// The anti-instanton is the exact time reverse; the bounce concatenates
/// the instanton with its reverse and is symmetric about its midpoint.
pub fn instanton_trajectory(
    p: &QuarticPotential,
    kind: InstantonKind,
    t_span: f64,
    ode_tol: f64,
) -> Result<InstantonPath, AnalysisError> {
    if !(t_span > 0.0) || !t_span.is_finite() || !(ode_tol > 0.0) {
        return Err(AnalysisError::Config(format!(
            "need positive finite t_span and ode_tol, got {t_span}, {ode_tol}"
        )));
    }
    let report = p.classify(1e-9);
    if report.barrier_height.is_none() {
        return Err(AnalysisError::Shape(format!(
            "{:?} potential has no barrier to hop",
            report.shape_label
        )));
    }
    let well = report
        .metastable_minimum()
        .ok_or_else(|| AnalysisError::Shape("no metastable minimum".into()))?;
    let top = report
        .barrier_top()
        .ok_or_else(|| AnalysisError::Shape("no barrier top".into()))?;

    let offset = 1e-6 * (top.location - well.location);
    let uprime = |x: f64| -p.drift(x);

    // Step small enough to resolve the stiffest curvature along the leg.
    let leg = (top.location - well.location).abs();
    let mut curvature_max: f64 = 0.0;
    for i in 0..=64 {
        let x = well.location + (top.location - well.location) * i as f64 / 64.0;
        curvature_max = curvature_max.max(p.second_derivative(x).abs());
    }
    let n_steps = ((t_span * curvature_max * 8.0).ceil() as usize).clamp(4096, 1 << 20);
    let h = t_span / n_steps as f64;

    let mut values = vec![well.location + offset];
    let mut x = well.location + offset;
    for _ in 0..n_steps {
        if uprime(x).abs() < ode_tol {
            break;
        }
        let k1 = uprime(x);
        let k2 = uprime(x + 0.5 * h * k1);
        let k3 = uprime(x + 0.5 * h * k2);
        let k4 = uprime(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        // The flow decelerates into the barrier top; clamp any terminal
        // floating-point overshoot onto it.
        if (top.location - x).abs() < 1e-3 * leg && (x - top.location).signum() == (x - well.location).signum() {
            x = top.location;
            values.push(x);
            break;
        }
        values.push(x);
    }

    let times: Vec<f64> = (0..values.len()).map(|i| i as f64 * h).collect();
    let path = match kind {
        InstantonKind::Instanton => InstantonPath {
            times,
            values,
            kind,
        },
        InstantonKind::AntiInstanton => {
            let mut rev = values;
            rev.reverse();
            InstantonPath {
                times,
                values: rev,
                kind,
            }
        }
        InstantonKind::Bounce => {
            let mut all = values.clone();
            all.extend(values.iter().rev());
            let times = (0..all.len()).map(|i| i as f64 * h).collect();
            InstantonPath {
                times,
                values: all,
                kind,
            }
        }
    };
    Ok(path)
}

/// Cross-sectional moments over time plus an exponential growth fit.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Fit of `ln(mean)` against time, when at least two means are positive.
    pub growth: Option<GrowthFit>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthFit {
    pub rate: f64,
    pub r_squared: f64,
}

/// Per-time cross-sectional mean and population variance, with an
/// exponential fit of the mean against time.
pub fn moment_report(e: &PathEnsemble) -> MomentReport {
    let n_times = e.times().len();
    let mut means = vec![0.0; n_times];
    let mut variances = vec![0.0; n_times];
    let mut column = vec![0.0; e.n_paths()];
    for k in 0..n_times {
        for (i, slot) in column.iter_mut().enumerate() {
            *slot = e.path(i)[k];
        }
        means[k] = stats::mean(&column);
        variances[k] = stats::variance(&column);
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, &m) in means.iter().enumerate() {
        if m > 0.0 {
            xs.push(e.times()[k]);
            ys.push(m.ln());
        }
    }
    let growth = if xs.len() >= 2 && xs[xs.len() - 1] > xs[0] {
        let fit = stats::linear_fit(&xs, &ys);
        Some(GrowthFit {
            rate: fit.slope,
            r_squared: fit.r_squared,
        })
    } else {
        None
    };

    MomentReport {
        times: e.times().to_vec(),
        means,
        variances,
        growth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate;

    /// Two wells at 0 and 2 separated by a barrier at 1.5; the starting
    /// (right) well is the higher, metastable one.
    fn escape_fixture() -> QuarticPotential {
        QuarticPotential::new(-24.0, -28.0, 8.0)
    }

    /// Local minimum at 0, barrier at 1.1, global minimum at 3.3.
    fn fig_two_left() -> QuarticPotential {
        QuarticPotential::new(-1.1 * 3.3, -4.4, 1.0)
    }

    #[test]
    fn mfpt_degenerate_interval_is_zero() {
        let ep = EscapeProblem::new(escape_fixture(), 0.3, 1.0, 1.0).unwrap();
        assert_eq!(mfpt_quadrature(&ep, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn mfpt_matches_analytic_first_passage_for_log_linear_drift() {
        // With κ = g = 0 the diffusion is dX = θX dt + σX dW; for θ < 0 the
        // log-price is a Brownian motion with drift m = θ - σ²/2 < 0 and the
        // expected time to fall from x0 to b is ln(x0/b)/|m|.
        let theta = -1.0;
        let sigma = 0.3;
        let (x0, b) = (1.0, 0.2);
        let p = QuarticPotential::new(theta, 0.0, 0.0);
        let ep = EscapeProblem::new(p, sigma, x0, b).unwrap();
        let t = mfpt_quadrature(&ep, 1e-9).unwrap();
        let exact = (x0 / b).ln() / (theta - 0.5 * sigma * sigma).abs();
        assert!(
            (t - exact).abs() < 2e-3 * exact,
            "quadrature {t} vs analytic {exact}"
        );
    }

    #[test]
    fn mfpt_decreases_monotonically_in_sigma() {
        let ep = EscapeProblem::new(escape_fixture(), 0.2, 2.0, 0.2).unwrap();
        let mut last = f64::INFINITY;
        for sigma in [0.2, 0.25, 0.3, 0.35, 0.4, 0.5] {
            let t = mfpt_quadrature(&ep.with_sigma(sigma).unwrap(), 1e-8).unwrap();
            assert!(t < last, "MFPT should fall with noise: {t} !< {last}");
            last = t;
        }
    }

    #[test]
    fn mfpt_insensitive_to_reflecting_cutoff_choice() {
        let ep = EscapeProblem::new(escape_fixture(), 0.25, 2.0, 0.2).unwrap();
        let t25 = mfpt_with_margin(&ep, 1e-9, 25.0).unwrap();
        let t50 = mfpt_with_margin(&ep, 1e-9, 50.0).unwrap();
        assert!(
            (t25 - t50).abs() <= 0.01 * t25,
            "cutoff sensitivity {} vs {}",
            t25,
            t50
        );
    }

    #[test]
    fn mfpt_overflow_reports_non_integrable() {
        let ep = EscapeProblem::new(escape_fixture(), 1e-3, 2.0, 0.2).unwrap();
        match mfpt_quadrature(&ep, 1e-8) {
            Err(AnalysisError::NonIntegrable(msg)) => {
                assert!(msg.contains("subinterval"), "message: {msg}")
            }
            other => panic!("expected NonIntegrable, got {other:?}"),
        }
    }

    #[test]
    fn scaling_fit_refuses_barrierless_potentials() {
        let gbm = QuarticPotential::gbm(0.05);
        let ep = EscapeProblem::new(gbm, 0.2, 1.0, 0.5).unwrap();
        let err = escape_scaling_fit(&ep, &[0.2, 0.25, 0.3, 0.35]).unwrap_err();
        assert!(matches!(err, AnalysisError::Shape(_)));
        // And too few grid points is a config error.
        let ep2 = EscapeProblem::new(escape_fixture(), 0.2, 2.0, 0.2).unwrap();
        assert!(matches!(
            escape_scaling_fit(&ep2, &[0.2, 0.3, 0.4]),
            Err(AnalysisError::Config(_))
        ));
    }

    #[test]
    fn scaling_fit_is_linear_in_inverse_sigma_squared() {
        let ep = EscapeProblem::new(escape_fixture(), 0.2, 2.0, 0.2).unwrap();
        let sigmas: Vec<f64> = (0..6).map(|i| 0.16 + 0.02 * i as f64).collect();
        let fit = escape_scaling_fit(&ep, &sigmas).unwrap();
        assert!(fit.r_squared >= 0.95, "R² = {}", fit.r_squared);
        assert!(fit.action > 0.0);
    }

    #[test]
    fn doubling_the_barrier_increases_the_fitted_action() {
        let base = escape_fixture();
        // Scaling all coefficients doubles U and hence the barrier height
        // at the same critical points.
        let doubled = QuarticPotential::new(2.0 * base.theta, 2.0 * base.kappa, 2.0 * base.g);
        let sigmas: Vec<f64> = (0..6).map(|i| 0.24 + 0.02 * i as f64).collect();
        let a1 = escape_scaling_fit(
            &EscapeProblem::new(base, 0.3, 2.0, 0.2).unwrap(),
            &sigmas,
        )
        .unwrap();
        let a2 = escape_scaling_fit(
            &EscapeProblem::new(doubled, 0.3, 2.0, 0.2).unwrap(),
            &sigmas,
        )
        .unwrap();
        assert!(
            a2.action > a1.action,
            "doubled barrier action {} !> {}",
            a2.action,
            a1.action
        );
    }

    #[test]
    fn instanton_endpoints_and_monotonicity() {
        let p = fig_two_left();
        let path = instanton_trajectory(&p, InstantonKind::Instanton, 40.0, 1e-8).unwrap();
        // Starts at the metastable minimum (x = 0 side), climbs to the
        // barrier top at 1.1, strictly monotone.
        assert!(path.values[0].abs() < 1e-5);
        let end = *path.values.last().unwrap();
        assert!((end - 1.1).abs() < 1e-5, "endpoint {end}");
        assert!(path.values.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(path.times.len(), path.values.len());
    }

    #[test]
    fn anti_instanton_is_exact_reverse() {
        let p = fig_two_left();
        let inst = instanton_trajectory(&p, InstantonKind::Instanton, 40.0, 1e-8).unwrap();
        let anti = instanton_trajectory(&p, InstantonKind::AntiInstanton, 40.0, 1e-8).unwrap();
        let mut rev = inst.values.clone();
        rev.reverse();
        assert_eq!(anti.values, rev);
    }

    #[test]
    fn bounce_is_symmetric_about_midpoint() {
        let p = fig_two_left();
        let bounce = instanton_trajectory(&p, InstantonKind::Bounce, 40.0, 1e-8).unwrap();
        let n = bounce.values.len();
        for i in 0..n / 2 {
            assert_eq!(bounce.values[i], bounce.values[n - 1 - i]);
        }
    }

    #[test]
    fn instanton_requires_a_barrier() {
        let err =
            instanton_trajectory(&QuarticPotential::gbm(0.05), InstantonKind::Bounce, 10.0, 1e-8)
                .unwrap_err();
        assert!(matches!(err, AnalysisError::Shape(_)));
    }

    #[test]
    fn default_probability_zero_noise_is_exactly_zero() {
        let m = ModelSpec::Langevin {
            potential: fig_two_left(),
            sigma: 0.0,
        };
        // Start at the global minimum: no fluctuations, no hopping.
        let cfg = SimConfig::new(1e-3, 2.0, 100, 1, 3.3).with_absorb_threshold(0.2);
        let dp = default_probability_mc(&m, &cfg).unwrap();
        assert_eq!(dp.n_absorbed, 0);
        assert_eq!(dp.probability, 0.0);
    }

    #[test]
    fn default_probability_gbm_consistent_with_zero() {
        let m = ModelSpec::Gbm {
            mu: 0.05,
            sigma: 0.3,
        };
        let cfg = SimConfig::new(1e-3, 2.0, 1000, 2, 1.0);
        let dp = default_probability_mc(&m, &cfg).unwrap();
        assert_eq!(dp.n_absorbed, 0);
    }

    #[test]
    fn default_probability_metastable_ci_excludes_zero() {
        let m = ModelSpec::Langevin {
            potential: escape_fixture(),
            sigma: 0.4,
        };
        let cfg = SimConfig::new(1e-3, 5.0, 2000, 3, 2.0).with_absorb_threshold(0.2);
        let dp = default_probability_mc(&m, &cfg).unwrap();
        assert!(dp.excludes_zero(), "p = {} ± {}", dp.probability, dp.std_error);
    }

    #[test]
    fn default_probability_rejects_abm() {
        let m = ModelSpec::Abm { mu: 0.0, sigma: 1.0 };
        let cfg = SimConfig::new(1e-2, 1.0, 10, 0, 1.0);
        assert!(matches!(
            default_probability_mc(&m, &cfg),
            Err(AnalysisError::Config(_))
        ));
    }

    #[test]
    fn moment_report_gbm_growth_rate() {
        let mu = 0.1;
        let m = ModelSpec::Gbm { mu, sigma: 0.15 };
        let cfg = SimConfig::new(1e-2, 2.0, 1024, 11, 1.0);
        let e = simulate(&m, &cfg).unwrap();
        let report = moment_report(&e);
        let growth = report.growth.expect("positive means");
        // Monte Carlo error of the fitted rate, dominated by the terminal
        // mean: SE(rate) ≈ SE(mean_T) / (T · mean_T).
        let terminal: Vec<f64> = (0..e.n_paths())
            .map(|i| *e.path(i).last().unwrap())
            .collect();
        let se_mean = (stats::variance(&terminal) / terminal.len() as f64).sqrt();
        let se_rate = se_mean / (2.0 * stats::mean(&terminal));
        assert!(
            (growth.rate - mu).abs() <= 3.0 * se_rate + 1e-3,
            "rate {} vs mu {mu} (se {se_rate})",
            growth.rate
        );
        assert!(growth.r_squared > 0.9);
    }

    #[test]
    fn moment_report_metastable_mean_plateaus() {
        let m = ModelSpec::Langevin {
            potential: fig_two_left(),
            sigma: 0.1,
        };
        let cfg = SimConfig::new(1e-2, 5.0, 256, 17, 3.3);
        let e = simulate(&m, &cfg).unwrap();
        let growth = moment_report(&e).growth.unwrap();
        assert!(growth.rate.abs() < 0.01, "plateau rate {}", growth.rate);
    }

    #[test]
    fn moment_report_single_constant_path() {
        let m = ModelSpec::Abm { mu: 0.0, sigma: 0.0 };
        let cfg = SimConfig::new(0.1, 1.0, 1, 0, 2.0);
        let e = simulate(&m, &cfg).unwrap();
        let report = moment_report(&e);
        assert!(report.variances.iter().all(|&v| v == 0.0));
        assert!(report.means.iter().all(|&v| v == 2.0));
    }
}

