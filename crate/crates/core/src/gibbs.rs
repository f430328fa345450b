//! Gibbs sampler over label vectors for the product of a Gaussian-mixture prior
//! with several Gaussian-mixture likelihood messages.
//!
//! A label vector picks one term (0 = constant term) from every likelihood. Its
//! product with prior component j is a single scaled Gaussian obtained by
//! fusing the prior with the summed information of the selected terms, so the
//! sampler only has to select labels; the components are then materialized
//! exactly from the labels.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gm::{log_sum_exp, CanonicalInfo, GaussianMixture, InfoPrior, ScaledGaussian};
use crate::messages::LikelihoodMessage;

/// How archived labels are ordered before the top ones are materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelRanking {
    /// Total materialized weight ln Σ_j w^(j,i).
    #[default]
    Weight,
    /// Summed log-scale c^(i) of the selected terms.
    LogScale,
}

/// Draws an index with probability ∝ exp(log_weights). `None` if all are −∞.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Option<usize> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = log_weights.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (i, wi) in w.iter().enumerate() {
        if *wi > 0.0 {
            last = Some(i);
            if u < *wi {
                return Some(i);
            }
            u -= wi;
        }
    }
    last
}

/// ln Σ_j w^(j) of the prior fused with `info`; failed fusions count as zero.
pub fn fused_log_weight(priors: &[InfoPrior], info: &CanonicalInfo) -> f64 {
    let values: Vec<f64> = priors
        .iter()
        .map(|p| match p.fused_log_weight(info) {
            Ok(v) => v,
            Err(e) => {
                log::debug!("skipping component in conditional weight: {e}");
                f64::NEG_INFINITY
            }
        })
        .collect();
    log_sum_exp(&values)
}

/// Every prior component fused with `info`; failed fusions are skipped.
pub fn materialize(priors: &[InfoPrior], info: &CanonicalInfo) -> Vec<ScaledGaussian> {
    priors
        .iter()
        .filter_map(|p| match p.fuse(info) {
            Ok(g) if g.log_weight > f64::NEG_INFINITY => Some(g),
            Ok(_) => None,
            Err(e) => {
                log::debug!("skipping component during materialization: {e}");
                None
            }
        })
        .collect()
}

/// Prior components in information form, skipping zero-weight ones.
pub fn info_priors(prior: &GaussianMixture) -> Result<Vec<InfoPrior>> {
    prior
        .iter()
        .filter(|c| c.log_weight > f64::NEG_INFINITY)
        .map(InfoPrior::new)
        .collect()
}

/// Drops the terms of `msg` whose stand-alone product weight with `prior`
/// (u_i Σ_j w_j N(e_i; H m_j, C + H P_j Hᵀ)) is below `rel_floor` times the
/// largest such weight, the constant term included.
pub fn prune_likelihood(
    prior: &[InfoPrior],
    msg: &LikelihoodMessage,
    rel_floor: f64,
) -> Result<LikelihoodMessage> {
    if msg.terms.is_empty() || rel_floor <= 0.0 {
        return Ok(msg.clone());
    }
    let dim = prior.first().map_or(0, InfoPrior::dim);
    let table = msg.canonical_table(dim)?;
    let weights: Vec<f64> = table
        .iter()
        .map(|info| {
            info.as_ref()
                .map_or(f64::NEG_INFINITY, |i| fused_log_weight(prior, i))
        })
        .collect();
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cutoff = max + rel_floor.ln();
    let terms = msg
        .terms
        .iter()
        .zip(&weights[1..])
        .filter(|(_, w)| **w >= cutoff && **w > f64::NEG_INFINITY)
        .map(|(t, _)| t.clone())
        .collect();
    Ok(LikelihoodMessage {
        log_constant: msg.log_constant,
        terms,
    })
}

/// Sampler state for one product: canonical tables, current labels with their
/// running sums, and the archive of distinct visited label vectors.
#[derive(Debug, Clone)]
pub struct GibbsProductState {
    priors: Vec<InfoPrior>,
    dim: usize,
    tables: Vec<Vec<Option<CanonicalInfo>>>,
    labels: Vec<usize>,
    sums: CanonicalInfo,
    /// Distinct visited label vectors with their ln Σ_j w^(j,i).
    archive: BTreeMap<Vec<usize>, f64>,
    /// Also archive every candidate evaluated by a conditional draw.
    archive_candidates: bool,
}

impl GibbsProductState {
    pub fn new(prior: &GaussianMixture, likelihoods: &[LikelihoodMessage]) -> Result<Self> {
        let dim = prior.dim();
        let tables = likelihoods
            .iter()
            .map(|m| m.canonical_table(dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            priors: info_priors(prior)?,
            dim,
            labels: vec![0; tables.len()],
            sums: CanonicalInfo::constant(dim, 0.0),
            tables,
            archive: BTreeMap::new(),
            archive_candidates: false,
        })
    }

    /// Enables archiving of every label vector whose exact weight a
    /// conditional draw evaluates, not only the drawn one.
    pub fn with_candidate_archiving(mut self, on: bool) -> Self {
        self.archive_candidates = on;
        self
    }

    pub fn n_likelihoods(&self) -> usize {
        self.tables.len()
    }

    /// Number of labels of likelihood `l` (terms plus the constant slot).
    pub fn n_labels(&self, l: usize) -> usize {
        self.tables[l].len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sums(&self) -> &CanonicalInfo {
        &self.sums
    }

    pub fn priors(&self) -> &[InfoPrior] {
        &self.priors
    }

    pub fn archive(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.archive.keys()
    }

    pub fn archive_len(&self) -> usize {
        self.archive.len()
    }

    /// Canonical parameters of label `q` of likelihood `l`, if that term exists.
    pub fn info(&self, l: usize, q: usize) -> Option<&CanonicalInfo> {
        self.tables[l][q].as_ref()
    }

    /// Σ_l of the canonical parameters selected by `labels`, skipping `exclude`.
    pub fn sums_excluding(
        &self,
        labels: &[usize],
        exclude: Option<usize>,
    ) -> Option<CanonicalInfo> {
        let mut acc = CanonicalInfo::constant(self.dim, 0.0);
        for (l, &q) in labels.iter().enumerate() {
            if Some(l) == exclude {
                continue;
            }
            acc.add_assign(self.info(l, q)?);
        }
        Some(acc)
    }

    pub fn sums_for(&self, labels: &[usize]) -> Option<CanonicalInfo> {
        self.sums_excluding(labels, None)
    }

    /// c^(i): summed log-scales of the selected terms.
    pub fn log_scale(&self, labels: &[usize]) -> f64 {
        labels
            .iter()
            .enumerate()
            .map(|(l, &q)| self.info(l, q).map_or(f64::NEG_INFINITY, |i| i.log_scale))
            .sum()
    }

    /// ln Σ_j w^(j,i) for a label vector.
    pub fn label_log_weight(&self, labels: &[usize]) -> f64 {
        self.sums_for(labels)
            .map_or(f64::NEG_INFINITY, |s| fused_log_weight(&self.priors, &s))
    }

    /// The prior components times the selected terms.
    pub fn materialize(&self, labels: &[usize]) -> Vec<ScaledGaussian> {
        self.sums_for(labels)
            .map_or_else(Vec::new, |s| materialize(&self.priors, &s))
    }

    /// Samples every label independently with probability ∝ the stand-alone
    /// product weight of its term with the prior.
    pub fn init_labels<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        for l in 0..self.tables.len() {
            let weights: Vec<f64> = self.tables[l]
                .iter()
                .map(|info| {
                    info.as_ref()
                        .map_or(f64::NEG_INFINITY, |i| fused_log_weight(&self.priors, i))
                })
                .collect();
            self.labels[l] =
                sample_log_categorical(&weights, rng).ok_or(Error::DegenerateLikelihood(l))?;
        }
        self.sums = self
            .sums_for(&self.labels)
            .expect("sampled labels refer to existing terms");
        let w = fused_log_weight(&self.priors, &self.sums);
        self.archive.insert(self.labels.clone(), w);
        Ok(())
    }

    /// One systematic scan: each label is redrawn from its conditional given the
    /// others, and every resulting label vector is archived.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        // Recompute from scratch so incremental updates never drift across sweeps.
        self.sums = self
            .sums_for(&self.labels)
            .expect("current labels refer to existing terms");
        for l in 0..self.tables.len() {
            let mut base = self.sums.clone();
            base.sub_assign(self.info(l, self.labels[l]).expect("current label exists"));
            let candidates: Vec<Option<CanonicalInfo>> = self.tables[l]
                .iter()
                .map(|info| info.as_ref().map(|i| base.plus(i)))
                .collect();
            let weights: Vec<f64> = candidates
                .iter()
                .map(|c| {
                    c.as_ref()
                        .map_or(f64::NEG_INFINITY, |c| fused_log_weight(&self.priors, c))
                })
                .collect();
            let q = sample_log_categorical(&weights, rng).ok_or(Error::DegenerateLikelihood(l))?;
            if self.archive_candidates {
                let mut candidate = self.labels.clone();
                for (c, &w) in weights.iter().enumerate() {
                    if w > f64::NEG_INFINITY {
                        candidate[l] = c;
                        self.archive.entry(candidate.clone()).or_insert(w);
                    }
                }
            }
            self.labels[l] = q;
            self.sums = candidates[q].clone().expect("sampled candidate exists");
            self.archive
                .entry(self.labels.clone())
                .or_insert(weights[q]);
        }
        debug_assert!(self.sums_consistent(1e-8));
        Ok(())
    }

    fn sums_consistent(&self, tol: f64) -> bool {
        let Some(exact) = self.sums_for(&self.labels) else {
            return false;
        };
        let scale =
            1.0 + exact.log_scale.abs() + exact.info_matrix.amax() + exact.info_vector.amax();
        (exact.log_scale - self.sums.log_scale).abs() <= tol * scale
            && (&exact.info_matrix - &self.sums.info_matrix).amax() <= tol * scale
            && (&exact.info_vector - &self.sums.info_vector).amax() <= tol * scale
    }

    /// Archived labels sorted by the ranking key, descending, ties broken by
    /// lexicographic label order.
    pub fn ranked_labels(&self, ranking: LabelRanking) -> Vec<(Vec<usize>, f64)> {
        let mut ranked: Vec<(Vec<usize>, f64)> = self
            .archive
            .iter()
            .map(|(labels, w)| {
                let key = match ranking {
                    LabelRanking::Weight => *w,
                    LabelRanking::LogScale => self.log_scale(labels),
                };
                (labels.clone(), key)
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        ranked
    }

    /// Unnormalized mixture from the `top` best archived labels.
    pub fn product(&self, top: usize, ranking: LabelRanking) -> Result<GaussianMixture> {
        let comps = self
            .ranked_labels(ranking)
            .into_iter()
            .take(top.max(1))
            .flat_map(|(labels, _)| self.materialize(&labels))
            .collect();
        GaussianMixture::from_components(self.dim, comps)
    }

    /// Prior times every likelihood except `l` (unnormalized), materialized from
    /// the `top` heaviest distinct leave-`l`-out label vectors in the archive.
    pub fn leave_one_out_mixture(&self, l: usize, top: usize) -> Result<GaussianMixture> {
        let mut candidates: BTreeMap<Vec<usize>, (CanonicalInfo, f64)> = BTreeMap::new();
        for labels in self.archive.keys() {
            let mut key = labels.clone();
            key.remove(l);
            if candidates.contains_key(&key) {
                continue;
            }
            if let Some(info) = self.sums_excluding(labels, Some(l)) {
                let w = fused_log_weight(&self.priors, &info);
                candidates.insert(key, (info, w));
            }
        }
        let mut ranked: Vec<(CanonicalInfo, f64)> = candidates.into_values().collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        let comps = ranked
            .iter()
            .take(top.max(1))
            .flat_map(|(info, _)| materialize(&self.priors, info))
            .collect();
        GaussianMixture::from_components(self.dim, comps)
    }
}

/// Samples the initial label vector for `likelihoods` against `prior`.
pub fn gibbs_init_labels<R: Rng + ?Sized>(
    prior: &GaussianMixture,
    likelihoods: &[LikelihoodMessage],
    rng: &mut R,
) -> Result<GibbsProductState> {
    let mut state = GibbsProductState::new(prior, likelihoods)?;
    state.init_labels(rng)?;
    Ok(state)
}

pub fn gibbs_sweep<R: Rng + ?Sized>(state: &mut GibbsProductState, rng: &mut R) -> Result<()> {
    state.sweep(rng)
}

/// Settings of the product sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsSettings {
    pub sweeps: usize,
    /// Archive every evaluated candidate label vector, see
    /// [`GibbsProductState::with_candidate_archiving`].
    pub archive_candidates: bool,
    pub top: usize,
    pub ranking: LabelRanking,
}

impl Default for GibbsSettings {
    fn default() -> Self {
        Self {
            sweeps: 20,
            archive_candidates: true,
            top: 20,
            ranking: LabelRanking::Weight,
        }
    }
}

/// Runs initialization plus `settings.sweeps` sweeps and materializes the
/// top-ranked labels. With no likelihoods the prior is returned unchanged.
pub fn gibbs_product<R: Rng + ?Sized>(
    prior: &GaussianMixture,
    likelihoods: &[LikelihoodMessage],
    settings: GibbsSettings,
    rng: &mut R,
) -> Result<(GaussianMixture, GibbsProductState)> {
    let mut state = GibbsProductState::new(prior, likelihoods)?
        .with_candidate_archiving(settings.archive_candidates);
    if likelihoods.is_empty() {
        state.archive.insert(Vec::new(), prior.log_total_weight());
        return Ok((prior.clone(), state));
    }
    state.init_labels(rng)?;
    for _ in 0..settings.sweeps.max(1) {
        state.sweep(rng)?;
    }
    let gm = state.product(settings.top, settings.ranking)?;
    Ok((gm, state))
}
