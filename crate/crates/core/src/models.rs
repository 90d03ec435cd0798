//! The simulatable model family.
//!
//! Every member is an Itô diffusion `dX = μ(X) dt + σ(X) dW` (plus one
//! explicit discrete-time recursion):
//!
//! * `ABM`  — constant drift and diffusion, prices may go negative;
//! * `GBM`  — linear drift `μX`, multiplicative noise `σX`;
//! * `LANGEVIN` — drift `-U'(X)` from a [`QuarticPotential`], noise `σX`;
//! * `MICRO` — the discrete microstructure recursion (flows plus linear
//!   impact) whose continuum limit is the Langevin model above.

use crate::potential::QuarticPotential;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("microstructure step produced a negative price {value} from x = {x}")]
    NegativePrice { x: f64, value: f64 },
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Parameters of the discrete microstructure dynamics.
///
/// Per step of length `Δt`, flows arrive at rate `u = ū + φx + λx²`, the
/// return is `r = r_f + z - μ_impact·u + (σ/√Δt)ε`, and the price updates as
/// `x' = (1 + rΔt)(x - cxΔt + uxΔt)`: dividend out, inflow in, then growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroParams {
    /// Risk-free rate.
    pub r_f: f64,
    /// Dividend rate.
    pub c: f64,
    /// Constant flow rate.
    pub u_bar: f64,
    /// Linear flow response to price.
    pub phi: f64,
    /// Quadratic flow response to price.
    pub lambda: f64,
    /// Linear impact coefficient (positive = saturation).
    pub mu_impact: f64,
    /// Return volatility.
    pub sigma: f64,
    /// Constant signal offset added to the return.
    pub signal_offset: f64,
}

impl MicroParams {
    /// Flow rate `u(x) = ū + φx + λx²`.
    pub fn flow_rate(&self, x: f64) -> f64 {
        self.u_bar + self.phi * x + self.lambda * x * x
    }

    /// The reduced-form potential under the parameter map
    /// `θ = r_f - c + ū`, `κ = (μ-1)φ`, `g = (μ-1)λ`.
    pub fn potential(&self) -> QuarticPotential {
        QuarticPotential::from_microstructure(
            self.r_f,
            self.c,
            self.u_bar,
            self.phi,
            self.lambda,
            self.mu_impact,
        )
    }
}

/// Tagged description of a simulatable diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ModelSpec {
    /// Arithmetic Brownian motion: `dX = μ dt + σ dW`.
    Abm { mu: f64, sigma: f64 },
    /// Geometric Brownian motion: `dX = μX dt + σX dW`.
    Gbm { mu: f64, sigma: f64 },
    /// Langevin diffusion in a quartic potential: `dX = -U'(X) dt + σX dW`.
    Langevin {
        potential: QuarticPotential,
        sigma: f64,
    },
    /// Discrete microstructure dynamics (stepped by [`micro_step`]).
    Micro(MicroParams),
}

impl ModelSpec {
    /// QED diffusion over a quartic potential.
    pub fn qed(theta: f64, kappa: f64, g: f64, sigma: f64) -> Self {
        ModelSpec::Langevin {
            potential: QuarticPotential::new(theta, kappa, g),
            sigma,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let sigma = self.sigma();
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(ModelError::Invalid(format!(
                "sigma must be finite and non-negative, got {sigma}"
            )));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            ModelSpec::Abm { sigma, .. }
            | ModelSpec::Gbm { sigma, .. }
            | ModelSpec::Langevin { sigma, .. } => sigma,
            ModelSpec::Micro(p) => p.sigma,
        }
    }

    /// Whether the diffusion term is proportional to the price. These are
    /// the variants with an absorbing state at zero.
    pub fn is_multiplicative(&self) -> bool {
        !matches!(self, ModelSpec::Abm { .. })
    }

    /// Instantaneous drift `μ(x)`.
    ///
    /// For `MICRO` this is the continuum-limit drift of the recursion,
    /// obtained by expanding one step to first order in `Δt`:
    /// `x·(r_f - c + z + (1 - μ_impact)·u(x))`.
    pub fn drift(&self, x: f64) -> f64 {
        match *self {
            ModelSpec::Abm { mu, .. } => mu,
            ModelSpec::Gbm { mu, .. } => mu * x,
            ModelSpec::Langevin { potential, .. } => potential.drift(x),
            ModelSpec::Micro(p) => {
                x * (p.r_f - p.c + p.signal_offset + (1.0 - p.mu_impact) * p.flow_rate(x))
            }
        }
    }

    /// Instantaneous diffusion `σ(x)`.
    pub fn diffusion(&self, x: f64) -> f64 {
        match *self {
            ModelSpec::Abm { sigma, .. } => sigma,
            ModelSpec::Gbm { sigma, .. } | ModelSpec::Langevin { sigma, .. } => sigma * x,
            ModelSpec::Micro(p) => p.sigma * x,
        }
    }
}

/// Raw one-step microstructure update; may return a negative price when
/// flows overdraw the firm within a single step.
pub(crate) fn micro_step_value(p: &MicroParams, x: f64, z_offset: f64, eps: f64, dt: f64) -> f64 {
    let u = p.flow_rate(x);
    let r = p.r_f + z_offset - p.mu_impact * u + p.sigma / dt.sqrt() * eps;
    (1.0 + r * dt) * (x - p.c * x * dt + u * x * dt)
}

/// One step of the discrete microstructure dynamics.
///
/// Errors with [`ModelError::NegativePrice`] when the update falls below
/// zero; the simulator clamps such excursions to the absorbing state.
pub fn micro_step(
    p: &MicroParams,
    x: f64,
    z_offset: f64,
    eps: f64,
    dt: f64,
) -> Result<f64, ModelError> {
    assert!(x >= 0.0, "price must be non-negative");
    assert!(dt > 0.0, "time step must be positive");
    let value = micro_step_value(p, x, z_offset, eps, dt);
    if value < 0.0 {
        return Err(ModelError::NegativePrice { x, value });
    }
    Ok(value)
}
