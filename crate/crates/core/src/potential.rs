//! The quartic potential and its shape taxonomy.
//!
//! Canonical form used everywhere in this crate:
//!
//! ```text
//! U(X) = -(θ/2) X² + (κ/3) X³ + (g/4) X⁴
//! ```
//!
//! so that the force `-U'(X) = θX - κX² - gX³` is exactly the drift of the
//! QED diffusion. `θ` carries units of 1/time, `κ` of 1/(time·price) and `g`
//! of 1/(time·price²); prices are treated as dimensionless, rescaled to be
//! of order one.

use serde::{Deserialize, Serialize};

/// Quartic potential `U(X) = -(θ/2)X² + (κ/3)X³ + (g/4)X⁴`.
///
/// Any constant signal offset `wᵀz` is folded into `theta`. Values are
/// immutable and cheap to copy; all operations are pure functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticPotential {
    /// Quadratic coefficient (the GBM drift in the `κ = g = 0` limit).
    pub theta: f64,
    /// Cubic coefficient.
    pub kappa: f64,
    /// Quartic coefficient.
    pub g: f64,
}

/// Classification of a single critical point by the sign of `U''`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimum,
    Maximum,
    Inflection,
}

/// A root of `U'` together with its type and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub location: f64,
    pub kind: CriticalKind,
    pub potential_value: f64,
}

impl CriticalPoint {
    /// Whether the point lies in the price domain `X >= 0`.
    pub fn in_price_domain(&self) -> bool {
        self.location >= 0.0
    }
}

/// Overall shape of the potential on the full real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ShapeLabel {
    /// `κ = g = 0`, `θ > 0`: the unstable GBM potential.
    InvertedParabola,
    /// Exactly one minimum on the real line.
    SingleWell,
    /// Two minima at different energies separated by a barrier.
    Metastable,
    /// `X = 0` is the only minimum and the potential falls without bound
    /// beyond a barrier.
    MetastableAtZero,
    /// Two minima at equal energy (spontaneous symmetry breaking).
    DoubleWell,
    Degenerate,
}

/// Critical-point structure and shape classification of a potential.
///
/// `barrier_height` is present exactly for the barrier-bearing shapes
/// (`Metastable`, `MetastableAtZero`, `DoubleWell`) and equals
/// `U(barrier top) - U(metastable minimum)`.
#[derive(Debug, Clone, Serialize)]
pub struct ShapeReport {
    /// All critical points in ascending location order.
    pub critical_points: Vec<CriticalPoint>,
    pub shape_label: ShapeLabel,
    pub barrier_height: Option<f64>,
}

impl ShapeReport {
    pub fn minima(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.critical_points
            .iter()
            .filter(|c| c.kind == CriticalKind::Minimum)
    }

    pub fn maxima(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.critical_points
            .iter()
            .filter(|c| c.kind == CriticalKind::Maximum)
    }

    /// Critical points restricted to the price domain `X >= 0`.
    ///
    /// Classification runs over the full real line (symmetric double
    /// wells straddle zero); simulation only ever sees `X >= 0`, so
    /// callers often want this view.
    pub fn in_price_domain(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.critical_points
            .iter()
            .filter(|c| c.in_price_domain())
    }

    /// The metastable (higher) minimum, when the shape has a barrier.
    pub fn metastable_minimum(&self) -> Option<&CriticalPoint> {
        match self.shape_label {
            ShapeLabel::Metastable => self
                .minima()
                .max_by(|a, b| a.potential_value.total_cmp(&b.potential_value)),
            ShapeLabel::MetastableAtZero => self.minima().next(),
            // Equal wells: report the left one.
            ShapeLabel::DoubleWell => self.minima().next(),
            _ => None,
        }
    }

    /// The barrier top adjacent to the metastable minimum.
    pub fn barrier_top(&self) -> Option<&CriticalPoint> {
        let well = self.metastable_minimum()?;
        // The adjacent maximum: nearest maximum on either side; for the
        // at-zero shape prefer the one in the price domain.
        let mut candidates: Vec<&CriticalPoint> = self.maxima().collect();
        if self.shape_label == ShapeLabel::MetastableAtZero && candidates.len() > 1 {
            candidates.retain(|c| c.location > well.location);
        }
        candidates
            .into_iter()
            .min_by(|a, b| {
                (a.location - well.location)
                    .abs()
                    .total_cmp(&(b.location - well.location).abs())
            })
    }
}

impl QuarticPotential {
    /// New potential from the canonical coefficients. All must be finite.
    pub fn new(theta: f64, kappa: f64, g: f64) -> Self {
        assert!(
            theta.is_finite() && kappa.is_finite() && g.is_finite(),
            "potential coefficients must be finite, got θ={theta}, κ={kappa}, g={g}"
        );
        Self { theta, kappa, g }
    }

    /// The GBM potential `-(μ/2)X²` (inverted parabola for `μ > 0`).
    pub fn gbm(mu: f64) -> Self {
        Self::new(mu, 0.0, 0.0)
    }

    /// Microstructure parameter map.
    ///
    /// Flows `u(X) = ū + φX + λX²` with linear impact `-μ_impact·u` map onto
    /// the reduced-form coefficients
    ///
    /// ```text
    /// θ = r_f - c + ū,   κ = (μ_impact - 1)·φ,   g = (μ_impact - 1)·λ
    /// ```
    pub fn from_microstructure(
        r_f: f64,
        c: f64,
        u_bar: f64,
        phi: f64,
        lambda: f64,
        mu_impact: f64,
    ) -> Self {
        Self::new(
            r_f - c + u_bar,
            (mu_impact - 1.0) * phi,
            (mu_impact - 1.0) * lambda,
        )
    }

    /// `U(x)`.
    pub fn evaluate(&self, x: f64) -> f64 {
        -0.5 * self.theta * x * x + self.kappa / 3.0 * x * x * x + 0.25 * self.g * x * x * x * x
    }

    /// The force `-U'(x) = θx - κx² - gx³`; the drift of the diffusion.
    pub fn drift(&self, x: f64) -> f64 {
        self.theta * x - self.kappa * x * x - self.g * x * x * x
    }

    /// `U''(x) = -θ + 2κx + 3gx²`.
    pub fn second_derivative(&self, x: f64) -> f64 {
        -self.theta + 2.0 * self.kappa * x + 3.0 * self.g * x * x
    }

    /// All real critical points of `U`, ascending, each labeled by the sign
    /// of `U''`. Roots closer than the tolerance are merged and labeled
    /// [`CriticalKind::Inflection`].
    ///
    /// `U'(x) = x·(g x² + κ x - θ)` factors in closed form: `x = 0` always,
    /// plus real roots of the quadratic factor when they exist. The
    /// degenerate case `g = κ = 0` is handled by returning the single point
    /// at zero labeled by the sign of `-θ`.
    pub fn critical_points(&self, tol: f64) -> Vec<CriticalPoint> {
        assert!(tol > 0.0, "tolerance must be positive");
        let mut roots = vec![0.0];
        roots.extend(quadratic_roots(self.g, self.kappa, -self.theta));
        roots.sort_by(f64::total_cmp);

        // Merge clusters of nearly coincident roots into inflection points.
        let coeff_scale = self.theta.abs().max(self.kappa.abs()).max(self.g.abs());
        let flat_tol = tol * coeff_scale.max(1.0);
        let mut points: Vec<CriticalPoint> = Vec::with_capacity(roots.len());
        let mut i = 0;
        while i < roots.len() {
            let mut j = i + 1;
            while j < roots.len()
                && (roots[j] - roots[j - 1]).abs()
                    <= tol * roots[j].abs().max(roots[j - 1].abs()).max(1.0)
            {
                j += 1;
            }
            let cluster = &roots[i..j];
            let location = cluster.iter().sum::<f64>() / cluster.len() as f64;
            let kind = if cluster.len() > 1 {
                CriticalKind::Inflection
            } else {
                let dd = self.second_derivative(location);
                if dd > flat_tol {
                    CriticalKind::Minimum
                } else if dd < -flat_tol {
                    CriticalKind::Maximum
                } else {
                    CriticalKind::Inflection
                }
            };
            points.push(CriticalPoint {
                location,
                kind,
                potential_value: self.evaluate(location),
            });
            i = j;
        }
        points
    }

    /// Shape classification over the full real line.
    pub fn classify(&self, tol: f64) -> ShapeReport {
        let critical_points = self.critical_points(tol);

        if self.kappa == 0.0 && self.g == 0.0 && self.theta > 0.0 {
            return ShapeReport {
                critical_points,
                shape_label: ShapeLabel::InvertedParabola,
                barrier_height: None,
            };
        }

        let minima: Vec<&CriticalPoint> = critical_points
            .iter()
            .filter(|c| c.kind == CriticalKind::Minimum)
            .collect();
        let maxima: Vec<&CriticalPoint> = critical_points
            .iter()
            .filter(|c| c.kind == CriticalKind::Maximum)
            .collect();

        let (shape_label, barrier_height) = match (minima.len(), maxima.len()) {
            // A quartic with two minima has exactly one interior maximum; a
            // flat in-between extremum demoted to inflection is degenerate.
            (2, 0) => (ShapeLabel::Degenerate, None),
            (2, _) => {
                let higher = if minima[0].potential_value >= minima[1].potential_value {
                    minima[0]
                } else {
                    minima[1]
                };
                let top = maxima
                    .iter()
                    .find(|m| m.location > minima[0].location && m.location < minima[1].location)
                    .copied()
                    .unwrap_or(maxima[0]);
                let height = top.potential_value - higher.potential_value;
                let label = if (minima[0].potential_value - minima[1].potential_value).abs() < tol {
                    ShapeLabel::DoubleWell
                } else {
                    ShapeLabel::Metastable
                };
                (label, Some(height.max(0.0)))
            }
            (1, n_max) => {
                let well = minima[0];
                let at_zero = well.location.abs() <= tol;
                let falls_beyond = self.g < 0.0 || (self.g == 0.0 && self.kappa != 0.0);
                if at_zero && n_max >= 1 && falls_beyond {
                    // Barrier on the unbounded side; prefer the price domain.
                    let top = maxima
                        .iter()
                        .find(|m| m.location > 0.0)
                        .copied()
                        .unwrap_or(maxima[0]);
                    (
                        ShapeLabel::MetastableAtZero,
                        Some((top.potential_value - well.potential_value).max(0.0)),
                    )
                } else {
                    (ShapeLabel::SingleWell, None)
                }
            }
            _ => (ShapeLabel::Degenerate, None),
        };

        ShapeReport {
            critical_points,
            shape_label,
            barrier_height,
        }
    }
}

/// Linear slope of the log-price potential `V(y) = -(μ - σ²/2) y`.
///
/// In log-price coordinates the GBM noise is additive and the potential is
/// the straight line with this slope. A negative slope (`μ > σ²/2`) pushes
/// the particle away from ruin at `y = -∞`; a positive slope (`μ < σ²/2`)
/// attracts it.
pub fn log_price_potential(mu: f64, sigma: f64) -> f64 {
    assert!(sigma >= 0.0, "volatility must be non-negative");
    -(mu - 0.5 * sigma * sigma)
}

/// Real roots of `a x² + b x + c`, numerically stable branch.
///
/// Returns an empty vector for a negative discriminant and falls back to
/// the linear (or empty) solution when `a = 0`.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-b / (2.0 * a), -b / (2.0 * a)];
    }
    // Avoid cancellation: compute the larger-magnitude root first.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let q = if q == 0.0 {
        // b == 0: symmetric pair.
        return vec![-(disc.sqrt()) / (2.0 * a), disc.sqrt() / (2.0 * a)];
    } else {
        q
    };
    vec![q / a, c / q]
}
