//! Motion and measurement models: constant-velocity dynamics for agents and
//! potential targets (with survival and birth), and the range-bearing sensor with
//! its first-order expansion about the prediction means.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gm::{symmetrize, GaussianMixture, ScaledGaussian};

/// Constant-velocity transition and process noise for a 2-D state (px, py, vx, vy)
/// with white-acceleration intensity `sigma`.
pub fn constant_velocity(dt: f64, sigma: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = DMatrix::identity(4, 4);
    a[(0, 2)] = dt;
    a[(1, 3)] = dt;
    let s2 = sigma * sigma;
    let (pp, pv, vv) = (0.25 * dt.powi(4) * s2, 0.5 * dt.powi(3) * s2, dt * dt * s2);
    let mut q = DMatrix::zeros(4, 4);
    for i in 0..2 {
        q[(i, i)] = pp;
        q[(i, i + 2)] = pv;
        q[(i + 2, i)] = pv;
        q[(i + 2, i + 2)] = vv;
    }
    (a, q)
}

// ============================================================================
// Dynamics
// ============================================================================

#[derive(Debug, Clone, PartialEq)]
pub struct AgentDynamics {
    pub transition: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
}

impl AgentDynamics {
    pub fn constant_velocity(dt: f64, sigma: f64) -> Self {
        let (transition, process_noise) = constant_velocity(dt, sigma);
        Self {
            transition,
            process_noise,
        }
    }
}

/// Component-wise m' = A m, P' = Q + A P Aᵀ; weights untouched.
pub fn agent_predict(prior: &GaussianMixture, dynamics: &AgentDynamics) -> Result<GaussianMixture> {
    propagate(prior, &dynamics.transition, &dynamics.process_noise, 0.0)
}

fn propagate(
    gm: &GaussianMixture,
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    log_scale: f64,
) -> Result<GaussianMixture> {
    if a.ncols() != gm.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: gm.dim(),
        });
    }
    let comps = gm
        .iter()
        .map(|c| {
            ScaledGaussian::new(
                c.log_weight + log_scale,
                a * &c.mean,
                symmetrize(&(q + a * &c.cov * a.transpose())),
            )
        })
        .collect();
    GaussianMixture::from_components(a.nrows(), comps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetDynamics {
    pub transition: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    pub p_survival: f64,
    /// Birth density; its total weight is the birth probability.
    pub birth: GaussianMixture,
}

impl TargetDynamics {
    pub fn new(
        transition: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        p_survival: f64,
        birth: GaussianMixture,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_survival) {
            return Err(Error::Config(format!(
                "p_survival {p_survival} outside [0, 1]"
            )));
        }
        let p_birth = birth.total_weight();
        if p_birth > 1.0 + 1e-9 {
            return Err(Error::Config(format!("birth weights sum to {p_birth} > 1")));
        }
        Ok(Self {
            transition,
            process_noise,
            p_survival,
            birth,
        })
    }

    pub fn p_birth(&self) -> f64 {
        self.birth.total_weight()
    }
}

/// Belief of one potential target: r = 1 part as a mixture, r = 0 part as a mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PtBelief {
    pub exist: GaussianMixture,
    pub nonexist_mass: f64,
}

impl PtBelief {
    /// A slot known not to hold a target.
    pub fn absent(dim: usize) -> Self {
        Self {
            exist: GaussianMixture::empty(dim),
            nonexist_mass: 1.0,
        }
    }

    pub fn existence_probability(&self) -> f64 {
        let e = self.exist.total_weight();
        let total = e + self.nonexist_mass;
        if total > 0.0 {
            e / total
        } else {
            0.0
        }
    }

    /// Rescales so that existence and nonexistence masses sum to one.
    pub fn normalized(self) -> Result<Self> {
        let log_e = self.exist.log_total_weight();
        let log_n = self.nonexist_mass.ln();
        let log_total = crate::gm::log_sum_exp(&[log_e, log_n]);
        if !log_total.is_finite() {
            return Err(Error::ZeroWeight);
        }
        Ok(Self {
            exist: self.exist.scaled(-log_total),
            nonexist_mass: (log_n - log_total).exp(),
        })
    }
}

/// Survivors (weights × P_S, propagated) plus birth components
/// (weights × (1 − P^e)); nonexistence mass 1 − P^B + (P^B − P^S)·P^e.
pub fn target_predict(prior: &PtBelief, dynamics: &TargetDynamics) -> Result<PtBelief> {
    let p_e = prior.exist.total_weight();
    let p_b = dynamics.p_birth();
    let p_s = dynamics.p_survival;
    let mut exist = if p_s > 0.0 {
        propagate(
            &prior.exist,
            &dynamics.transition,
            &dynamics.process_noise,
            p_s.ln(),
        )?
    } else {
        GaussianMixture::empty(dynamics.transition.nrows())
    };
    let birth_scale = (1.0 - p_e).max(0.0);
    if birth_scale > 0.0 {
        for c in dynamics.birth.iter() {
            exist.push(c.clone().with_log_weight(c.log_weight + birth_scale.ln()));
        }
    }
    let nonexist_mass = (1.0 - p_b + (p_b - p_s) * p_e).max(0.0);
    Ok(PtBelief {
        exist,
        nonexist_mass,
    })
}

// ============================================================================
// Range-bearing sensor
// ============================================================================

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Roi {
    pub fn square(side: f64) -> Self {
        Self {
            x_min: 0.0,
            x_max: side,
            y_min: 0.0,
            y_max: side,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeBearingModel {
    /// 2×2 noise covariance on (range m, bearing rad).
    pub noise: DMatrix<f64>,
    pub p_detect: f64,
    pub clutter_rate: f64,
    pub roi: Roi,
    pub max_range: f64,
}

impl RangeBearingModel {
    /// Clutter density in measurement space, 1/(r_max · 2π).
    pub fn clutter_density(&self) -> f64 {
        if self.max_range > 0.0 {
            1.0 / (self.max_range * 2.0 * PI)
        } else {
            0.0
        }
    }

    /// λ f^FA, with λ floored at [`MIN_CLUTTER_RATE`] so that clutter-free
    /// sensors keep finite association weights. Zero density is a configuration
    /// error.
    pub fn clutter_intensity(&self) -> Result<f64> {
        let f = self.clutter_density();
        if !(f > 0.0) {
            return Err(Error::ZeroClutterDensity);
        }
        Ok(self.clutter_rate.max(MIN_CLUTTER_RATE) * f)
    }
}

/// Smallest clutter rate used in association weights.
pub const MIN_CLUTTER_RATE: f64 = 1e-9;

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Range and bearing from the observer position to the source position.
/// Only the first two entries of each slice are used.
pub fn range_bearing(observer: &[f64], source: &[f64]) -> Result<(f64, f64)> {
    let dx = source[0] - observer[0];
    let dy = source[1] - observer[1];
    let r = dx.hypot(dy);
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok((r, wrap_angle(dy.atan2(dx))))
}

/// First-order expansion z ≈ h(ŷ, x̂) + G(y − ŷ) + E(x − x̂) of the
/// range-bearing function, with y the observer state and x the source state.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedObservation {
    /// Jacobian with respect to the observing agent (G, or D for inter-agent links).
    pub observer_jac: DMatrix<f64>,
    /// Jacobian with respect to the observed target or neighbor (E, or F).
    pub source_jac: DMatrix<f64>,
    /// h(ŷ, x̂)
    pub predicted: DVector<f64>,
    /// h(ŷ, x̂) − Gŷ − Ex̂
    pub offset: DVector<f64>,
    pub noise: DMatrix<f64>,
    /// Whether the second measurement coordinate is an angle to be wrapped.
    pub wrap_bearing: bool,
}

impl LinearizedObservation {
    /// Measurement in the linear model z' = G y + E x + n:
    /// z' = wrap(z − h(ŷ, x̂)) + Gŷ + Ex̂.
    pub fn effective(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut r = z - &self.predicted;
        if self.wrap_bearing {
            r[1] = wrap_angle(r[1]);
        }
        r + &self.predicted - &self.offset
    }
}

/// Linearizes the range-bearing model at the given observer and source means.
pub fn linearize_range_bearing(
    observer_mean: &DVector<f64>,
    source_mean: &DVector<f64>,
    noise: &DMatrix<f64>,
) -> Result<LinearizedObservation> {
    let (r, theta) = range_bearing(observer_mean.as_slice(), source_mean.as_slice())?;
    let dx = source_mean[0] - observer_mean[0];
    let dy = source_mean[1] - observer_mean[1];
    let r2 = r * r;
    let mut source_jac = DMatrix::zeros(2, source_mean.len());
    source_jac[(0, 0)] = dx / r;
    source_jac[(0, 1)] = dy / r;
    source_jac[(1, 0)] = -dy / r2;
    source_jac[(1, 1)] = dx / r2;
    let mut observer_jac = DMatrix::zeros(2, observer_mean.len());
    for i in 0..2 {
        for j in 0..2 {
            observer_jac[(i, j)] = -source_jac[(i, j)];
        }
    }
    let predicted = DVector::from_vec(vec![r, theta]);
    let offset = &predicted - &observer_jac * observer_mean - &source_jac * source_mean;
    Ok(LinearizedObservation {
        observer_jac,
        source_jac,
        predicted,
        offset,
        noise: noise.clone(),
        wrap_bearing: true,
    })
}
