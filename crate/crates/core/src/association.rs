//! Single-target association weights β and the iterative data-association loop
//! that turns them into approximate marginal association probabilities η.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::gm::{chol_log_det, spd_cholesky, symmetrize, GaussianMixture, LN_2PI};
use crate::models::LinearizedObservation;

/// Per-agent association weights and marginals. Row k covers measurements
/// 0..=M of potential target k, with column 0 the missed detection.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationTable {
    pub beta: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
}

/// Row for a potential target outside the agent's field of view.
pub fn unobserved_beta(n_measurements: usize) -> Vec<f64> {
    let mut row = vec![0.0; n_measurements + 1];
    row[0] = 1.0;
    row
}

/// Precomputed Gaussian N(·; mean, cov) for repeated evaluation.
struct Innovation {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl Innovation {
    fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let ch = spd_cholesky(cov, "innovation covariance")?;
        let log_norm = -0.5 * (mean.len() as f64 * LN_2PI + chol_log_det(&ch));
        Ok(Self {
            mean,
            precision: symmetrize(&ch.inverse()),
            log_norm,
        })
    }

    fn log_pdf(&self, z: &DVector<f64>) -> f64 {
        let d = z.len();
        let mut quad = 0.0;
        for a in 0..d {
            let ra = z[a] - self.mean[a];
            for b in 0..d {
                quad += ra * self.precision[(a, b)] * (z[b] - self.mean[b]);
            }
        }
        self.log_norm - 0.5 * quad
    }
}

/// β(m) = Σ_j Σ_i P_D ω_i w_j N(z_m; Eμ_i + G m_j, R + EΩ_iEᵀ + G P_j Gᵀ) / (λ f^FA)
/// for m ≥ 1 and β(0) = 1 − P_D Σ_i ω_i.
///
/// # Arguments
/// * `theta` - normalized extrinsic agent-state message
/// * `delta_exist` - existence part of the extrinsic target message (sub-probability)
/// * `measurements` - raw (range, bearing) measurements; they are mapped through `obs`
/// * `clutter_intensity` - λ f^FA
pub fn compute_beta_gm(
    theta: &GaussianMixture,
    delta_exist: &GaussianMixture,
    obs: &LinearizedObservation,
    measurements: &[DVector<f64>],
    p_detect: f64,
    clutter_intensity: f64,
) -> Result<Vec<f64>> {
    let mut row = vec![0.0; measurements.len() + 1];
    row[0] = (1.0 - p_detect * delta_exist.total_weight()).max(0.0);
    if measurements.is_empty() || delta_exist.is_empty() || p_detect == 0.0 {
        return Ok(row);
    }
    let g = &obs.observer_jac;
    let e = &obs.source_jac;
    let eff: Vec<DVector<f64>> = measurements.iter().map(|z| obs.effective(z)).collect();
    let log_scale = p_detect.ln() - clutter_intensity.ln();
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); measurements.len()];
    for d in delta_exist.iter() {
        let e_mu = e * &d.mean;
        let e_cov = &obs.noise + e * &d.cov * e.transpose();
        for t in theta.iter() {
            let inn = Innovation::new(&e_mu + g * &t.mean, &(&e_cov + g * &t.cov * g.transpose()))?;
            let lw = log_scale + d.log_weight + t.log_weight;
            for (m, z) in eff.iter().enumerate() {
                terms[m].push(lw + inn.log_pdf(z));
            }
        }
    }
    for (m, t) in terms.iter().enumerate() {
        row[m + 1] = crate::gm::log_sum_exp(t).exp();
    }
    Ok(row)
}

/// Result of the association loop.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerBpOutcome {
    pub eta: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

pub const DEFAULT_INNER_ITERS: usize = 100;
pub const DEFAULT_INNER_TOL: f64 = 1e-8;

/// Iterates target-to-measurement messages
/// φ_{k→m} = β_k(m) / (β_k(0) + Σ_{m'≠m} β_k(m') ν_{m'→k}) and measurement-to-target
/// messages ν_{m→k} = 1 / (1 + Σ_{k'≠k} φ_{k'→m}) until the largest change in ν is
/// below `tol`. On exit η_k(m) ∝ β_k(m) ν_{m→k} and η_k(0) ∝ β_k(0).
pub fn inner_bp(beta: &[Vec<f64>], max_iters: usize, tol: f64) -> InnerBpOutcome {
    let k_count = beta.len();
    let m_count = beta.first().map_or(0, |r| r.len().saturating_sub(1));
    let mut nu = vec![vec![1.0; k_count]; m_count];
    let mut phi = vec![vec![0.0; m_count]; k_count];
    let mut iterations = 0;
    let mut converged = m_count == 0 || k_count <= 1;
    // A single target or no measurements is a tree with trivial fixed point ν = 1.
    if !converged {
        while iterations < max_iters {
            iterations += 1;
            for k in 0..k_count {
                let row = &beta[k];
                for m in 0..m_count {
                    let mut denom = row[0];
                    for mp in 0..m_count {
                        if mp != m {
                            denom += row[mp + 1] * nu[mp][k];
                        }
                    }
                    phi[k][m] = if denom > 0.0 {
                        row[m + 1] / denom
                    } else if row[m + 1] > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    };
                }
            }
            let mut change: f64 = 0.0;
            for m in 0..m_count {
                for k in 0..k_count {
                    let mut s = 1.0;
                    for kp in 0..k_count {
                        if kp != k {
                            s += phi[kp][m];
                        }
                    }
                    let v = 1.0 / s;
                    change = change.max((v - nu[m][k]).abs());
                    nu[m][k] = v;
                }
            }
            if change < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!("association loop stopped after {iterations} iterations without converging");
        }
    }
    let eta = beta
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let mut out: Vec<f64> = (0..=m_count)
                .map(|m| {
                    if m == 0 {
                        row[0]
                    } else {
                        row[m] * nu[m - 1][k]
                    }
                })
                .collect();
            let total: f64 = out.iter().sum();
            if total > 0.0 && total.is_finite() {
                out.iter_mut().for_each(|v| *v /= total);
            } else {
                out = unobserved_beta(m_count);
            }
            out
        })
        .collect();
    InnerBpOutcome {
        eta,
        iterations,
        converged,
    }
}

/// Builds the table for one agent: β rows from the supplied closures, then η.
pub fn associate(beta: Vec<Vec<f64>>, max_iters: usize, tol: f64) -> AssociationTable {
    let eta = inner_bp(&beta, max_iters, tol).eta;
    AssociationTable { beta, eta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gm::ScaledGaussian;

    #[test]
    fn no_measurements_gives_missed_detection() {
        let out = inner_bp(&[vec![0.3], vec![1.0]], 100, 1e-8);
        assert_eq!(out.eta, vec![vec![1.0], vec![1.0]]);
    }

    #[test]
    fn single_target_single_measurement() {
        let out = inner_bp(&[vec![0.2, 0.6]], 100, 1e-8);
        assert!((out.eta[0][1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn two_targets_one_measurement() {
        let out = inner_bp(&[vec![1.0, 1.0], vec![1.0, 1.0]], 100, 1e-8);
        assert!(out.converged);
        for row in &out.eta {
            assert!((row[1] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    fn scalar_obs() -> LinearizedObservation {
        LinearizedObservation {
            observer_jac: DMatrix::from_element(1, 1, 1.0),
            source_jac: DMatrix::from_element(1, 1, 1.0),
            predicted: DVector::zeros(1),
            offset: DVector::zeros(1),
            noise: DMatrix::from_element(1, 1, 0.5),
            wrap_bearing: false,
        }
    }

    #[test]
    fn beta_missed_detection_weight() {
        let theta = GaussianMixture::single(ScaledGaussian::normal(
            DVector::zeros(1),
            DMatrix::identity(1, 1),
        ));
        let delta = theta.clone();
        let obs = scalar_obs();
        let row = compute_beta_gm(&theta, &delta, &obs, &[], 0.95, 1.0).unwrap();
        assert!((row[0] - 0.05).abs() < 1e-15);
        let empty = GaussianMixture::empty(1);
        let row = compute_beta_gm(&theta, &empty, &obs, &[DVector::zeros(1)], 0.95, 1.0).unwrap();
        assert_eq!(row, vec![1.0, 0.0]);
    }

    #[test]
    fn beta_scalar_plug_in() {
        // z = y + x + n with y ~ N(1, 2), x ~ N(3, 1), n ~ N(0, 0.5): z ~ N(4, 3.5)
        let theta = GaussianMixture::single(ScaledGaussian::normal(
            DVector::from_element(1, 1.0),
            DMatrix::from_element(1, 1, 2.0),
        ));
        let delta = GaussianMixture::single(ScaledGaussian::normal(
            DVector::from_element(1, 3.0),
            DMatrix::from_element(1, 1, 1.0),
        ));
        let obs = scalar_obs();
        let row = compute_beta_gm(
            &theta,
            &delta,
            &obs,
            &[DVector::from_element(1, 5.0)],
            0.9,
            0.01,
        )
        .unwrap();
        let pdf =
            (-(1.0f64).powi(2) / (2.0 * 3.5)).exp() / (2.0 * std::f64::consts::PI * 3.5).sqrt();
        assert!((row[1] - 0.9 * pdf / 0.01).abs() < 1e-12);
        assert!((row[0] - 0.1).abs() < 1e-15);
    }
}
