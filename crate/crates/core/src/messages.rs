//! Gaussian-mixture likelihood messages exchanged in the factor graph:
//! inter-agent messages Φ (over the receiving agent), target-to-agent messages Λ
//! (over the agent) and agent-to-target messages γ (over the target).

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::gm::{
    canonicalize, log_sum_exp, symmetrize, CanonicalInfo, GaussianMixture, LikelihoodComponent,
};
use crate::models::LinearizedObservation;

/// u⁰ + Σᵢ uᵢ N(eᵢ; Hᵢ x, Cᵢ), with u⁰ stored as a log (−∞ when absent).
///
/// Terms whose weight is exactly zero are omitted, so the term count can be
/// smaller than the measurement-by-component product.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodMessage {
    pub log_constant: f64,
    pub terms: Vec<LikelihoodComponent>,
}

impl LikelihoodMessage {
    /// The message ≡ 1.
    pub fn unit() -> Self {
        Self {
            log_constant: 0.0,
            terms: Vec::new(),
        }
    }

    pub fn is_unit(&self) -> bool {
        self.terms.is_empty() && self.log_constant == 0.0
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// ln of the message at x.
    pub fn log_eval(&self, x: &DVector<f64>) -> Result<f64> {
        let mut v = vec![self.log_constant];
        for t in &self.terms {
            v.push(t.log_eval(x)?);
        }
        Ok(log_sum_exp(&v))
    }

    /// Information form of every label: index 0 is the constant term (`None`
    /// when absent), index i ≥ 1 the i-th Gaussian term.
    pub fn canonical_table(&self, dim: usize) -> Result<Vec<Option<CanonicalInfo>>> {
        let mut out = Vec::with_capacity(self.terms.len() + 1);
        out.push(
            (self.log_constant > f64::NEG_INFINITY)
                .then(|| CanonicalInfo::constant(dim, self.log_constant)),
        );
        for t in &self.terms {
            out.push(Some(canonicalize(t)?));
        }
        Ok(out)
    }
}

/// Φ_{ℓ→s}: one term per component i of the neighbor belief, with
/// u = w_i, e = w' − F m_i, H = D, C = W + F P_i Fᵀ and no constant.
///
/// `obs` is linearized with agent s as observer and neighbor ℓ as source; `w` is
/// the raw inter-agent measurement taken by s.
pub fn compute_phi_msg(
    neighbor_belief: &GaussianMixture,
    obs: &LinearizedObservation,
    w: &DVector<f64>,
) -> LikelihoodMessage {
    let w_eff = obs.effective(w);
    let f = &obs.source_jac;
    let terms = neighbor_belief
        .iter()
        .filter(|c| c.log_weight > f64::NEG_INFINITY)
        .map(|c| LikelihoodComponent {
            log_u: c.log_weight,
            residual: &w_eff - f * &c.mean,
            obs_matrix: obs.observer_jac.clone(),
            noise: symmetrize(&(&obs.noise + f * &c.cov * f.transpose())),
        })
        .collect();
    LikelihoodMessage {
        log_constant: f64::NEG_INFINITY,
        terms,
    }
}

/// Λ_{k→s} over the agent state: constant η(0)(1 − P_D Σω), and terms indexed
/// row-major over (m, j) with u = η(m) P_D ω_j/(λ f), e = z_m − E μ_j, H = G,
/// C = R + E Ω_j Eᵀ.
pub fn compute_lambda_msg(
    eta: &[f64],
    delta_exist: &GaussianMixture,
    measurements: &[DVector<f64>],
    obs: &LinearizedObservation,
    p_detect: f64,
    clutter_intensity: f64,
) -> LikelihoodMessage {
    let log_constant = (eta[0] * (1.0 - p_detect * delta_exist.total_weight()).max(0.0)).ln();
    let e = &obs.source_jac;
    let per_component: Vec<(DVector<f64>, DMatrix<f64>, f64)> = delta_exist
        .iter()
        .map(|c| {
            (
                e * &c.mean,
                symmetrize(&(&obs.noise + e * &c.cov * e.transpose())),
                c.log_weight,
            )
        })
        .collect();
    let mut terms = Vec::new();
    let base = p_detect.ln() - clutter_intensity.ln();
    for (m, z) in measurements.iter().enumerate() {
        let eta_m = eta[m + 1];
        if !(eta_m > 0.0) {
            continue;
        }
        let z_eff = obs.effective(z);
        for (e_mu, cov, lw) in &per_component {
            let log_u = eta_m.ln() + base + lw;
            if log_u == f64::NEG_INFINITY {
                continue;
            }
            terms.push(LikelihoodComponent {
                log_u,
                residual: &z_eff - e_mu,
                obs_matrix: obs.observer_jac.clone(),
                noise: cov.clone(),
            });
        }
    }
    LikelihoodMessage {
        log_constant,
        terms,
    }
}

/// γ_{s→k} over the target state: existence part with constant η(0)(1 − P_D)
/// and terms indexed row-major over (m, j) with u = η(m) P_D w_j/(λ f),
/// e = z_m − G m_j, H = E, C = R + G P_j Gᵀ. Returns the message and the
/// nonexistence value η(0).
pub fn compute_gamma_msg(
    eta: &[f64],
    theta: &GaussianMixture,
    measurements: &[DVector<f64>],
    obs: &LinearizedObservation,
    p_detect: f64,
    clutter_intensity: f64,
) -> (LikelihoodMessage, f64) {
    let log_constant = (eta[0] * (1.0 - p_detect)).ln();
    let g = &obs.observer_jac;
    let per_component: Vec<(DVector<f64>, DMatrix<f64>, f64)> = theta
        .iter()
        .map(|c| {
            (
                g * &c.mean,
                symmetrize(&(&obs.noise + g * &c.cov * g.transpose())),
                c.log_weight,
            )
        })
        .collect();
    let mut terms = Vec::new();
    let base = p_detect.ln() - clutter_intensity.ln();
    for (m, z) in measurements.iter().enumerate() {
        let eta_m = eta[m + 1];
        if !(eta_m > 0.0) {
            continue;
        }
        let z_eff = obs.effective(z);
        for (g_m, cov, lw) in &per_component {
            let log_u = eta_m.ln() + base + lw;
            if log_u == f64::NEG_INFINITY {
                continue;
            }
            terms.push(LikelihoodComponent {
                log_u,
                residual: &z_eff - g_m,
                obs_matrix: obs.source_jac.clone(),
                noise: cov.clone(),
            });
        }
    }
    (
        LikelihoodMessage {
            log_constant,
            terms,
        },
        eta[0],
    )
}
