//! Decentralized single-Gaussian PT beliefs.
//!
//! Each agent multiplies the S-th root of the predicted existence density by
//! its own γ message and compresses the result to one scaled Gaussian (a
//! shard). The network sums shard information by consensus, which yields the
//! product of all shards at every agent; δ messages follow locally by removing
//! the own shard.

use nalgebra::DVector;

use crate::consensus::{flatten, unflatten_canonical, Consensus};
use crate::error::{Error, Result};
use crate::gm::{
    canonicalize, chol_log_det, gaussian_fractional_power, moment_match, spd_cholesky, spd_inverse,
    symmetrize, CanonicalInfo, GaussianMixture, InfoPrior, ScaledGaussian, LN_2PI,
};
use crate::hogwild::normalize_parts;
use crate::messages::LikelihoodMessage;
use crate::models::PtBelief;

/// Which scalar the agents sum alongside precision and information vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShardFusion {
    /// Canonical log-scales: the fused Gaussian is the exact product of shards.
    #[default]
    ExactProduct,
    /// ln ĉ_s: the fused weight is Π_s ĉ_s, dropping the product's normalizer.
    SummedScales,
}

/// b_s(x, 1) = (α(x, 1))^{1/S} γ_s(x, 1), moment-matched to one scaled Gaussian.
///
/// # Arguments
/// * `alpha_exist` - existence part of the predicted PT belief
/// * `gamma` - this agent's γ message (unit when not observing the PT)
/// * `s_count` - number S of agents
pub fn local_shard(
    alpha_exist: &ScaledGaussian,
    gamma: &LikelihoodMessage,
    s_count: usize,
) -> Result<ScaledGaussian> {
    let root = gaussian_fractional_power(alpha_exist, s_count)?;
    if gamma.is_unit() {
        return Ok(root);
    }
    let prior = InfoPrior::new(&root)?;
    let mut gm = GaussianMixture::empty(root.dim());
    if gamma.log_constant > f64::NEG_INFINITY {
        gm.push(
            root.clone()
                .with_log_weight(root.log_weight + gamma.log_constant),
        );
    }
    for t in &gamma.terms {
        match canonicalize(t).and_then(|info| prior.fuse(&info)) {
            Ok(g) if g.log_weight > f64::NEG_INFINITY => gm.push(g),
            Ok(_) => {}
            Err(e) => log::debug!("skipping γ term in local shard: {e}"),
        }
    }
    moment_match(&gm)
}

/// Network-agreed product of the shards.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedShards {
    pub gaussian: ScaledGaussian,
    /// Agreed sums: precision, information vector and scalar.
    pub sums: CanonicalInfo,
    /// ln b₀ = Σ_s ln η_s(0).
    pub log_b0: f64,
    pub fusion: ShardFusion,
}

fn shard_info(shard: &ScaledGaussian, fusion: ShardFusion) -> Result<CanonicalInfo> {
    let mut info = CanonicalInfo::from_scaled_gaussian(shard)?;
    if fusion == ShardFusion::SummedScales {
        info.log_scale = shard.log_weight;
    }
    Ok(info)
}

/// Scaled Gaussian with precision Λ and information vector ξ whose scale
/// follows `fusion` from the scalar `c`.
fn from_info(info: &CanonicalInfo, fusion: ShardFusion) -> Result<ScaledGaussian> {
    let cov = spd_inverse(&info.info_matrix, "fused precision")?;
    let mean = &cov * &info.info_vector;
    let log_weight = match fusion {
        ShardFusion::SummedScales => info.log_scale,
        ShardFusion::ExactProduct => {
            let ch = spd_cholesky(&cov, "fused covariance")?;
            info.log_scale
                + 0.5 * info.info_vector.dot(&mean)
                + 0.5 * (mean.len() as f64 * LN_2PI + chol_log_det(&ch))
        }
    };
    Ok(ScaledGaussian::new(log_weight, mean, symmetrize(&cov)))
}

/// One consensus invocation over (Λ_s, Λ_s m_s, scalar_s, ln η_s(0)), a payload
/// of d² + d + 2 reals.
pub fn fuse_shards(
    shards: &[ScaledGaussian],
    eta0: &[f64],
    consensus: &mut Consensus,
    fusion: ShardFusion,
) -> Result<FusedShards> {
    if shards.len() != consensus.n_agents() || eta0.len() != shards.len() {
        return Err(Error::DimensionMismatch {
            expected: consensus.n_agents(),
            found: shards.len().min(eta0.len()),
        });
    }
    let dim = shards.first().map_or(0, ScaledGaussian::dim);
    let payloads = shards
        .iter()
        .zip(eta0)
        .map(|(shard, e)| {
            let info = shard_info(shard, fusion)?;
            Ok(flatten(
                &[&info.info_matrix],
                &[&info.info_vector],
                &[info.log_scale, e.max(1e-300).ln()],
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let agreed = consensus.sum_agreed(&payloads)?;
    let (m, v, c) = unflatten_canonical(&agreed, dim);
    let sums = CanonicalInfo {
        info_matrix: symmetrize(&m),
        info_vector: v,
        log_scale: c,
    };
    let gaussian = from_info(&sums, fusion)?;
    Ok(FusedShards {
        gaussian,
        sums,
        log_b0: agreed[dim * dim + dim + 1],
        fusion,
    })
}

/// Normalized PT belief from the fused shards and the prior nonexistence mass.
pub fn fused_belief(fused: &FusedShards, prior_nonexist: f64) -> Result<PtBelief> {
    normalize_parts(
        GaussianMixture::single(fused.gaussian.clone()),
        fused.log_b0 + prior_nonexist.ln(),
    )
}

/// Existence part of δ_s: the fused product with the own shard removed, times
/// the S-th root of α. Falls back to the fused Gaussian when the remaining
/// precision is not positive definite.
pub fn extract_delta_single(
    fused: &FusedShards,
    shard: &ScaledGaussian,
    alpha_exist: &ScaledGaussian,
    s_count: usize,
) -> Result<ScaledGaussian> {
    let root = gaussian_fractional_power(alpha_exist, s_count)?;
    let others = fused.sums.minus(&shard_info(shard, fused.fusion)?);
    let result = match fused.fusion {
        ShardFusion::ExactProduct => InfoPrior::new(&root)?.fuse(&others),
        ShardFusion::SummedScales => {
            remaining_shards(&others).and_then(|b| crate::gm::gaussian_product_pair(&b, &root))
        }
    };
    match result {
        Ok(g) => Ok(g),
        Err(e) => {
            log::warn!("extrinsic single-Gaussian message fell back to the fused belief: {e}");
            Ok(fused.gaussian.clone())
        }
    }
}

/// b_¬s with scale ĉ/ĉ_s, precision P̂⁻¹ − P̂_s⁻¹ and mean P̂_¬s(P̂⁻¹m̂ − P̂_s⁻¹m̂_s).
fn remaining_shards(others: &CanonicalInfo) -> Result<ScaledGaussian> {
    let ch = nalgebra::Cholesky::new(others.info_matrix.clone())
        .ok_or(Error::NotPositiveDefinite("remaining shard precision"))?;
    let cov = symmetrize(&ch.inverse());
    let mean: DVector<f64> = &cov * &others.info_vector;
    Ok(ScaledGaussian::new(others.log_scale, mean, cov))
}

/// δ_s(x, 0) = b(x, 0)/η_s(0) joined with the existence part and normalized.
pub fn delta_single_belief(
    exist: ScaledGaussian,
    fused: &FusedShards,
    prior_nonexist: f64,
    eta0_s: f64,
) -> Result<PtBelief> {
    normalize_parts(
        GaussianMixture::single(exist),
        fused.log_b0 + prior_nonexist.ln() - eta0_s.max(1e-300).ln(),
    )
}
