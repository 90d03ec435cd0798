//! Seeded, reproducible, parallel Monte Carlo path generation.
//!
//! Paths follow the Euler–Maruyama discretization in price space,
//! `x_{n+1} = x_n + μ(x_n)Δt + σ(x_n)√Δt·ε`, with `ε ~ N(0,1)`; the
//! microstructure model steps its exact discrete recursion instead.
//! Multiplicative models clamp negative excursions to zero and treat any
//! value at or below the absorption threshold as permanently absorbed.
//!
//! # Random number streams
//!
//! Each path owns an independent, counter-based random stream derived
//! deterministically from `(master_seed, path_index)`: the ChaCha8 key is
//! the SplitMix64 expansion of `master_seed` (`SeedableRng::seed_from_u64`)
//! and the ChaCha stream number is the path index. Draws are standard
//! normals in step order. Results are therefore invariant to execution
//! order and worker count; bit-exact reproducibility across rand versions
//! or languages is not a goal.

use crate::models::{micro_step_value, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("every path was absorbed before the requested window")]
    EmptySample,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed ensemble data: {0}")]
    Format(String),
}

/// Monte Carlo run description: grid, ensemble size, seed and absorption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    /// Time step (years).
    pub dt: f64,
    /// Total simulated horizon (years); the number of steps is
    /// `round(horizon / dt)`.
    pub horizon: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    /// Initial price; must exceed the absorption threshold.
    pub x0: f64,
    /// Prices at or below this level absorb (multiplicative models only).
    /// Zero by default; a positive value catches paths that an Euler step
    /// would otherwise carry across a narrow neighborhood of zero.
    pub absorb_threshold: f64,
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, master_seed: u64, x0: f64) -> Self {
        Self {
            dt,
            horizon,
            n_paths,
            master_seed,
            x0,
            absorb_threshold: 0.0,
        }
    }

    pub fn with_absorb_threshold(mut self, threshold: f64) -> Self {
        self.absorb_threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SimError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(SimError::Config(format!(
                "horizon must be at least one step, got {} with dt {}",
                self.horizon, self.dt
            )));
        }
        if self.n_paths == 0 {
            return Err(SimError::Config("n_paths must be at least 1".into()));
        }
        if !(self.absorb_threshold >= 0.0) {
            return Err(SimError::Config(format!(
                "absorb_threshold must be non-negative, got {}",
                self.absorb_threshold
            )));
        }
        if !(self.x0 > self.absorb_threshold) || !self.x0.is_finite() {
            return Err(SimError::Config(format!(
                "x0 must exceed the absorption threshold, got x0 = {} <= {}",
                self.x0, self.absorb_threshold
            )));
        }
        Ok(())
    }

    /// Number of Euler steps; sample times are `0, dt, ..., n_steps·dt`.
    pub fn n_steps(&self) -> usize {
        ((self.horizon / self.dt) + 0.5).floor().max(1.0) as usize
    }
}

/// Terminal state of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOutcome {
    pub terminal: f64,
    /// Time of absorption, if the path was absorbed within the horizon.
    pub absorbed_at: Option<f64>,
}

/// Columnar store of a simulated ensemble.
///
/// Values are laid out path-major: path `i` occupies one contiguous row of
/// `times().len()` entries (the initial value plus one per step). Once a
/// path is absorbed all its subsequent entries repeat the absorbing value
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    times: Vec<f64>,
    values: Vec<f64>,
    absorbed_at: Vec<Option<f64>>,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.absorbed_at.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.times.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn absorbed_at(&self, i: usize) -> Option<f64> {
        self.absorbed_at[i]
    }

    pub fn absorption_times(&self) -> &[Option<f64>] {
        &self.absorbed_at
    }

    pub fn n_absorbed(&self) -> usize {
        self.absorbed_at.iter().filter(|a| a.is_some()).count()
    }

    /// CSV serialization: header `t,path_0,...`, one row per sample time.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<(), SimError> {
        write!(w, "t")?;
        for i in 0..self.n_paths() {
            write!(w, ",path_{i}")?;
        }
        writeln!(w)?;
        for (k, t) in self.times.iter().enumerate() {
            write!(w, "{t}")?;
            for i in 0..self.n_paths() {
                write!(w, ",{}", self.path(i)[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Compact binary layout: a 24-byte header (magic `QEDE`, format
    /// version `u32 = 1`, `n_paths: u64`, `n_samples: u64`, all
    /// little-endian) followed by the value matrix as little-endian `f64`,
    /// row-major with one row per path.
    pub fn to_binary<W: Write>(&self, mut w: W) -> Result<(), SimError> {
        w.write_all(b"QEDE")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.n_paths() as u64).to_le_bytes())?;
        w.write_all(&(self.times.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads back the value matrix written by [`Self::to_binary`].
    pub fn read_binary<R: Read>(mut r: R) -> Result<(usize, usize, Vec<f64>), SimError> {
        let mut header = [0u8; 24];
        r.read_exact(&mut header)?;
        if &header[0..4] != b"QEDE" {
            return Err(SimError::Format("bad magic, expected QEDE".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != 1 {
            return Err(SimError::Format(format!("unsupported version {version}")));
        }
        let n_paths = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let n_samples = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
        let mut values = vec![0.0f64; n_paths * n_samples];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok((n_paths, n_samples, values))
    }
}

/// Normalized histogram (integrates to one over its support).
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    /// Bin edges, `density.len() + 1` of them.
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    /// Center of the highest-density bin.
    pub fn mode_center(&self) -> f64 {
        let (i, _) = self
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("histogram has at least one bin");
        0.5 * (self.edges[i] + self.edges[i + 1])
    }
}

fn path_rng(master_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng
}

#[inline]
fn euler_step(m: &ModelSpec, x: f64, eps: f64, dt: f64, sqrt_dt: f64) -> f64 {
    match *m {
        ModelSpec::Abm { mu, sigma } => x + mu * dt + sigma * sqrt_dt * eps,
        ModelSpec::Gbm { mu, sigma } => x + mu * x * dt + sigma * x * sqrt_dt * eps,
        ModelSpec::Langevin { potential, sigma } => {
            x + potential.drift(x) * dt + sigma * x * sqrt_dt * eps
        }
        ModelSpec::Micro(ref p) => micro_step_value(p, x, p.signal_offset, eps, dt),
    }
}

/// Advances one path, recording each sample through `record(step, value)`.
fn run_path<F: FnMut(usize, f64)>(
    m: &ModelSpec,
    cfg: &SimConfig,
    path_index: u64,
    mut record: F,
) -> PathOutcome {
    let mut rng = path_rng(cfg.master_seed, path_index);
    let n_steps = cfg.n_steps();
    let sqrt_dt = cfg.dt.sqrt();
    let multiplicative = m.is_multiplicative();

    let mut x = cfg.x0;
    record(0, x);
    let mut absorbed_at = None;
    for n in 1..=n_steps {
        let eps: f64 = rng.sample(StandardNormal);
        let mut next = euler_step(m, x, eps, cfg.dt, sqrt_dt);
        if multiplicative {
            if next < 0.0 {
                next = 0.0;
            }
            if next <= cfg.absorb_threshold {
                absorbed_at = Some(n as f64 * cfg.dt);
            }
        }
        x = next;
        record(n, x);
        if absorbed_at.is_some() {
            // Absorption is permanent: hold the absorbing value.
            for k in n + 1..=n_steps {
                record(k, x);
            }
            break;
        }
    }
    PathOutcome {
        terminal: x,
        absorbed_at,
    }
}

/// Simulates the full ensemble, storing every sample.
///
/// Identical `(m, cfg)` produce a bit-identical ensemble regardless of how
/// many worker threads run the paths. For large ensembles where only
/// terminal values matter, prefer [`simulate_outcomes`].
pub fn simulate(m: &ModelSpec, cfg: &SimConfig) -> Result<PathEnsemble, SimError> {
    cfg.validate()?;
    m.validate().map_err(|e| SimError::Config(e.to_string()))?;

    let n_samples = cfg.n_steps() + 1;
    let total = cfg
        .n_paths
        .checked_mul(n_samples)
        .filter(|&t| t <= 1usize << 28)
        .ok_or_else(|| {
            SimError::Config(format!(
                "ensemble of {} paths x {} samples is too large to store; \
                 use simulate_outcomes for summary statistics",
                cfg.n_paths, n_samples
            ))
        })?;

    let times: Vec<f64> = (0..n_samples).map(|i| i as f64 * cfg.dt).collect();
    let mut values = vec![0.0f64; total];
    let absorbed_at: Vec<Option<f64>> = values
        .par_chunks_mut(n_samples)
        .enumerate()
        .map(|(i, row)| run_path(m, cfg, i as u64, |k, v| row[k] = v).absorbed_at)
        .collect();

    Ok(PathEnsemble {
        times,
        values,
        absorbed_at,
    })
}

/// Simulates the ensemble keeping only per-path outcomes (terminal value
/// and absorption time). Paths are bit-identical to those of [`simulate`].
pub fn simulate_outcomes(m: &ModelSpec, cfg: &SimConfig) -> Result<Vec<PathOutcome>, SimError> {
    cfg.validate()?;
    m.validate().map_err(|e| SimError::Config(e.to_string()))?;
    Ok((0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(m, cfg, i, |_, _| {}))
        .collect())
}

/// Histogram of not-yet-absorbed path values inside a time window,
/// normalized to integrate to one.
///
/// A path absorbed inside the window contributes its samples strictly
/// before the absorption time. Errors with [`SimError::EmptySample`] when
/// no sample survives into the window.
pub fn quasi_stationary_histogram(
    e: &PathEnsemble,
    window: (f64, f64),
    bins: usize,
) -> Result<Histogram, SimError> {
    let (t0, t1) = window;
    let horizon = *e.times().last().expect("non-empty time grid");
    if bins == 0 {
        return Err(SimError::Config("bins must be at least 1".into()));
    }
    if !(t0 <= t1) || t0 < 0.0 || t1 > horizon {
        return Err(SimError::Config(format!(
            "window [{t0}, {t1}] not contained in [0, {horizon}]"
        )));
    }

    let mut samples = Vec::new();
    for i in 0..e.n_paths() {
        let row = e.path(i);
        let cutoff = e.absorbed_at(i).unwrap_or(f64::INFINITY);
        for (k, &t) in e.times().iter().enumerate() {
            if t >= t0 && t <= t1 && t < cutoff {
                samples.push(row[k]);
            }
        }
    }
    if samples.is_empty() {
        return Err(SimError::EmptySample);
    }

    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Degenerate dispersion (e.g. a zero-noise ensemble): pad to a narrow
    // band around the common value, wide enough that bin edges stay
    // resolvable in floating point.
    let (lo, hi) = if hi - lo < 1e-9 * hi.abs().max(1.0) {
        let pad = 0.5e-9 * hi.abs().max(1.0);
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    };

    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in &samples {
        let idx = (((s - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    // Normalize against the realized bin widths so the density integrates
    // to one exactly.
    let n = samples.len() as f64;
    let density = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 / (n * (edges[i + 1] - edges[i])))
        .collect();
    Ok(Histogram { edges, density })
}

#[cfg(test)]
pub(crate) fn pooled_log_return_skewness(e: &PathEnsemble) -> f64 {
    let mut returns = Vec::new();
    for i in 0..e.n_paths() {
        let row = e.path(i);
        let cutoff = e.absorbed_at(i).unwrap_or(f64::INFINITY);
        for k in 1..row.len() {
            if e.times()[k] < cutoff && row[k] > 0.0 && row[k - 1] > 0.0 {
                returns.push((row[k] / row[k - 1]).ln());
            }
        }
    }
    crate::stats::skewness(&returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::QuarticPotential;

    fn gbm() -> ModelSpec {
        ModelSpec::Gbm {
            mu: 0.05,
            sigma: 0.2,
        }
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::new(1e-3, 1.0, 10, 7, 1.0);
        assert!(ok.validate().is_ok());
        assert!(SimConfig::new(0.0, 1.0, 10, 7, 1.0).validate().is_err());
        assert!(SimConfig::new(1e-3, 0.0, 10, 7, 1.0).validate().is_err());
        assert!(SimConfig::new(1e-3, 1.0, 0, 7, 1.0).validate().is_err());
        assert!(SimConfig::new(1e-3, 1.0, 10, 7, 0.0)
            .with_absorb_threshold(0.5)
            .validate()
            .is_err());
    }

    #[test]
    fn deterministic_zero_noise_gbm_matches_exponential() {
        // Euler bias for the noiseless ODE is O(dt).
        let m = ModelSpec::Gbm { mu: 0.05, sigma: 0.0 };
        let cfg = SimConfig::new(1e-4, 1.0, 1, 0, 1.0);
        let out = simulate_outcomes(&m, &cfg).unwrap();
        let exact = (0.05f64).exp();
        assert!(
            (out[0].terminal - exact).abs() < 1e-4,
            "terminal {} vs e^0.05 {}",
            out[0].terminal,
            exact
        );
    }

    #[test]
    fn zero_noise_metastable_path_relaxes_monotonically() {
        // Metastable potential; start just above the absorbing threshold and
        // relax toward the nearest minimum (x = 0) without ever reaching it.
        let p = QuarticPotential::new(-1.1 * 3.3, -4.4, 1.0);
        let m = ModelSpec::Langevin {
            potential: p,
            sigma: 0.0,
        };
        let cfg = SimConfig::new(1e-3, 2.0, 1, 0, 0.05);
        let e = simulate(&m, &cfg).unwrap();
        let row = e.path(0);
        assert!(row.windows(2).all(|w| w[1] <= w[0] && w[1] > 0.0));
        assert!(e.absorbed_at(0).is_none());
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let cfg = SimConfig::new(1e-2, 1.0, 64, 42, 1.0);
        let m = gbm();
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = pool1.install(|| simulate(&m, &cfg)).unwrap();
        let b = pool4.install(|| simulate(&m, &cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn outcomes_match_full_simulation() {
        let cfg = SimConfig::new(1e-2, 1.0, 32, 9, 1.0);
        let m = gbm();
        let full = simulate(&m, &cfg).unwrap();
        let light = simulate_outcomes(&m, &cfg).unwrap();
        for i in 0..cfg.n_paths {
            assert_eq!(full.path(i).last().copied().unwrap(), light[i].terminal);
            assert_eq!(full.absorbed_at(i), light[i].absorbed_at);
        }
    }

    #[test]
    fn absorption_is_permanent_and_stable_under_horizon_extension() {
        // A potential with a well above a positive threshold plus sizable
        // noise produces absorptions.
        let p = QuarticPotential::new(-24.0, -28.0, 8.0);
        let m = ModelSpec::Langevin {
            potential: p,
            sigma: 0.45,
        };
        let short = SimConfig::new(1e-3, 2.0, 256, 3, 2.0).with_absorb_threshold(0.2);
        let long = SimConfig {
            horizon: 4.0,
            ..short
        };
        let a = simulate(&m, &short).unwrap();
        let b = simulate(&m, &long).unwrap();
        let mut seen = 0;
        for i in 0..short.n_paths {
            if let Some(ta) = a.absorbed_at(i) {
                seen += 1;
                assert_eq!(b.absorbed_at(i), Some(ta), "path {i}");
                // Absorbed value held exactly.
                let row = a.path(i);
                let k = (ta / short.dt).round() as usize;
                assert!(row[k..].iter().all(|&v| v == row[k]));
            }
            // Extension can only add absorptions, never remove them.
            if a.absorbed_at(i).is_none() {
                if let Some(tb) = b.absorbed_at(i) {
                    assert!(tb > short.horizon);
                }
            }
        }
        assert!(seen > 10, "fixture should absorb many paths, saw {seen}");
        assert!(b.n_absorbed() >= a.n_absorbed());
    }

    #[test]
    fn abm_admits_negative_prices_and_never_absorbs() {
        let m = ModelSpec::Abm {
            mu: -5.0,
            sigma: 1.0,
        };
        let cfg = SimConfig::new(1e-2, 1.0, 128, 11, 0.5);
        let e = simulate(&m, &cfg).unwrap();
        let any_negative = (0..e.n_paths()).any(|i| e.path(i).iter().any(|&v| v < 0.0));
        assert!(any_negative, "strong downward ABM drift should go negative");
        assert_eq!(e.n_absorbed(), 0);
    }

    #[test]
    fn multiplicative_paths_stay_non_negative() {
        let p = QuarticPotential::new(-24.0, -28.0, 8.0);
        let m = ModelSpec::Langevin {
            potential: p,
            sigma: 0.6,
        };
        let cfg = SimConfig::new(1e-3, 3.0, 128, 5, 2.0).with_absorb_threshold(0.0);
        let e = simulate(&m, &cfg).unwrap();
        for i in 0..e.n_paths() {
            assert!(e.path(i).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn gbm_log_returns_pass_normality_skew_check() {
        let cfg = SimConfig::new(1e-3, 1.0, 1000, 2024, 1.0);
        let e = simulate(&gbm(), &cfg).unwrap();
        let skew = pooled_log_return_skewness(&e);
        assert!(skew.abs() < 0.05, "pooled skewness {skew}");
    }

    #[test]
    fn weak_convergence_halving_dt_halves_mean_bias() {
        // Deterministic limit isolates the Euler weak bias of the mean.
        let m = ModelSpec::Gbm { mu: 1.0, sigma: 0.0 };
        let exact = 1f64.exp();
        let bias = |dt: f64| {
            let cfg = SimConfig::new(dt, 1.0, 1, 0, 1.0);
            simulate_outcomes(&m, &cfg).unwrap()[0].terminal - exact
        };
        let ratio = bias(0.05) / bias(0.025);
        assert!((1.8..=2.2).contains(&ratio), "bias ratio {ratio}");
    }

    #[test]
    fn csv_layout_one_row_per_time() {
        let cfg = SimConfig::new(0.5, 1.0, 2, 1, 1.0);
        let e = simulate(&gbm(), &cfg).unwrap();
        let mut buf = Vec::new();
        e.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,path_0,path_1");
        assert_eq!(lines.len(), 1 + e.times().len());
        assert!(lines[1].starts_with("0,1,1"));
    }

    #[test]
    fn binary_round_trip() {
        let cfg = SimConfig::new(0.25, 1.0, 3, 8, 1.0);
        let e = simulate(&gbm(), &cfg).unwrap();
        let mut buf = Vec::new();
        e.to_binary(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"QEDE");
        let (n_paths, n_samples, values) = PathEnsemble::read_binary(&buf[..]).unwrap();
        assert_eq!(n_paths, 3);
        assert_eq!(n_samples, e.times().len());
        assert_eq!(values, e.values);

        let bad = PathEnsemble::read_binary(&b"NOPE0000000000000000000000"[..]);
        assert!(matches!(bad, Err(SimError::Format(_))));
    }

    #[test]
    fn histogram_point_mass_and_window_checks() {
        let m = ModelSpec::Gbm { mu: 0.05, sigma: 0.0 };
        let cfg = SimConfig::new(1e-2, 1.0, 4, 0, 1.0);
        let e = simulate(&m, &cfg).unwrap();
        // σ = 0: all mass collapses onto the deterministic trajectory value.
        let h = quasi_stationary_histogram(&e, (1.0, 1.0), 16).unwrap();
        let terminal = e.path(0).last().copied().unwrap();
        assert!((h.mode_center() - terminal).abs() < 1e-6);
        let total: f64 = h
            .density
            .iter()
            .enumerate()
            .map(|(i, d)| d * (h.edges[i + 1] - h.edges[i]))
            .sum();
        assert!((total - 1.0).abs() < 1e-9);

        assert!(quasi_stationary_histogram(&e, (0.5, 2.0), 4).is_err());
        assert!(quasi_stationary_histogram(&e, (0.5, 1.0), 0).is_err());
    }

    #[test]
    fn gbm_window_mean_drifts_right_with_time() {
        let m = ModelSpec::Gbm { mu: 0.1, sigma: 0.1 };
        let cfg = SimConfig::new(1e-2, 4.0, 512, 77, 1.0);
        let e = simulate(&m, &cfg).unwrap();
        let mode_of = |w: (f64, f64)| {
            let h = quasi_stationary_histogram(&e, w, 64).unwrap();
            h.mode_center()
        };
        // Lognormal median e^{(μ-σ²/2)t} grows; the mode of the window
        // histogram must move right between an early and a late window.
        assert!(mode_of((3.0, 4.0)) > mode_of((0.0, 1.0)));
    }
}
