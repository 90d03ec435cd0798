//! Langevin dynamics of asset prices in a quartic potential.
//!
//! The model family is the Itô diffusion `dX = μ(X) dt + σ(X) dW` with the
//! drift read as the negative gradient of a potential `U(X)`:
//!
//! ```text
//! U(X) = -(θ/2) X² + (κ/3) X³ + (g/4) X⁴
//! dX   = (θX - κX² - gX³) dt + σ X dW
//! ```
//!
//! Setting `κ = g = 0` recovers geometric Brownian motion in an inverted
//! parabola; non-zero `κ, g` stabilize the dynamics in a (meta)stable well
//! and make the absorbing default state `X = 0` reachable through rare
//! noise-induced barrier crossings.
//!
//! The crate provides:
//!
//! * [`potential`] — the quartic potential, its critical points, shape
//!   taxonomy and the microstructure parameter map;
//! * [`models`] — the simulatable model family (ABM, GBM, Langevin/QED,
//!   discrete microstructure dynamics);
//! * [`simulate`] — seeded, reproducible, parallel Monte Carlo with an
//!   absorbing boundary at zero;
//! * [`analysis`] — default probabilities, exact mean first-passage times,
//!   small-noise escape scaling and instanton trajectories;
//! * [`calibrate`] — quasi-maximum-likelihood parameter fitting and flow
//!   rate estimation.

pub mod analysis;
pub mod calibrate;
pub mod models;
pub mod potential;
pub mod simulate;

mod quad;
mod stats;

pub use analysis::{
    default_probability_mc, escape_scaling_fit, instanton_trajectory, mfpt_quadrature,
    moment_report, EscapeProblem, InstantonKind, InstantonPath,
};
pub use calibrate::{fit, flow_rate_estimate, loglik, CalibrationResult, FitParams, ParamBounds};
pub use models::{micro_step, MicroParams, ModelSpec};
pub use potential::{CriticalKind, CriticalPoint, QuarticPotential, ShapeLabel, ShapeReport};
pub use simulate::{
    quasi_stationary_histogram, simulate, simulate_outcomes, Histogram, PathEnsemble, PathOutcome,
    SimConfig,
};
