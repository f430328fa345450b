//! Decentralized target beliefs by Hogwild Gibbs sampling.
//!
//! Every agent owns one label into its own γ message. Each round the network
//! agrees (sum then max consensus) on the summed canonical parameters of the
//! current label vector; every agent then redraws its own label against those
//! global sums with its own contribution swapped out. Label vectors are
//! forwarded alongside the consensus traffic so that all agents archive the
//! same distinct vectors and materialize identical beliefs.

use std::collections::BTreeSet;

use rand::Rng;

use crate::consensus::{flatten, unflatten_canonical, Consensus};
use crate::error::{Error, Result};
use crate::gibbs::{fused_log_weight, info_priors, materialize, sample_log_categorical};
use crate::gm::{log_sum_exp, CanonicalInfo, GaussianMixture, InfoPrior, ScaledGaussian};
use crate::messages::LikelihoodMessage;
use crate::models::PtBelief;

/// Smallest η(0) used when taking logs of nonexistence values.
const MIN_ETA0: f64 = 1e-300;

/// How archived components are told apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchiveMode {
    /// By the full label vector, forwarded with the consensus payloads.
    #[default]
    Labels,
    /// By the bit pattern of the agreed total weight; no labels are forwarded.
    DistinctWeights,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogwildSettings {
    /// Number T of rounds (one consensus invocation each).
    pub rounds: usize,
    /// Archived label vectors materialized into the belief.
    pub top: usize,
    pub archive_mode: ArchiveMode,
}

impl Default for HogwildSettings {
    fn default() -> Self {
        Self {
            rounds: 20,
            top: 20,
            archive_mode: ArchiveMode::Labels,
        }
    }
}

/// An archived label vector with the agreed global sums it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub labels: Vec<usize>,
    pub sums: CanonicalInfo,
    /// Each agent's own copy of the agreed sums.
    pub copies: Vec<CanonicalInfo>,
    /// ln Σ_j ω^(j,i) of the prior fused with `sums`.
    pub log_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArchiveKey {
    Labels,
    Weight,
}

/// Sampler state shared by the simulated network.
#[derive(Debug, Clone)]
pub struct HogwildState {
    priors: Vec<InfoPrior>,
    dim: usize,
    tables: Vec<Vec<Option<CanonicalInfo>>>,
    labels: Vec<usize>,
    archive: Vec<ArchiveEntry>,
    seen: BTreeSet<Vec<u64>>,
    key: ArchiveKey,
    /// (round, agent, label) of every draw, round 0 being the initial one.
    trajectory: Vec<(usize, usize, usize)>,
}

impl HogwildState {
    /// # Arguments
    /// * `prior` - existence part of the predicted PT belief
    /// * `gammas` - one γ message per agent (unit for agents not observing the PT)
    pub fn new(
        prior: &GaussianMixture,
        gammas: &[LikelihoodMessage],
        mode: ArchiveMode,
    ) -> Result<Self> {
        let dim = prior.dim();
        let tables = gammas
            .iter()
            .map(|g| g.canonical_table(dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            priors: info_priors(prior)?,
            dim,
            labels: vec![0; tables.len()],
            tables,
            archive: Vec::new(),
            seen: BTreeSet::new(),
            key: match mode {
                ArchiveMode::Labels => ArchiveKey::Labels,
                ArchiveMode::DistinctWeights => ArchiveKey::Weight,
            },
            trajectory: Vec::new(),
        })
    }

    pub fn n_agents(&self) -> usize {
        self.tables.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn archive(&self) -> &[ArchiveEntry] {
        &self.archive
    }

    pub fn trajectory(&self) -> &[(usize, usize, usize)] {
        &self.trajectory
    }

    pub fn priors(&self) -> &[InfoPrior] {
        &self.priors
    }

    /// Local canonical parameters C̃, ẽ, c of label `q` at agent `s`.
    pub fn local_info(&self, s: usize, q: usize) -> Option<&CanonicalInfo> {
        self.tables[s][q].as_ref()
    }

    /// Exact Σ_s of the local parameters for `labels`.
    pub fn exact_sums(&self, labels: &[usize]) -> Option<CanonicalInfo> {
        let mut acc = CanonicalInfo::constant(self.dim, 0.0);
        for (s, &q) in labels.iter().enumerate() {
            acc.add_assign(self.local_info(s, q)?);
        }
        Some(acc)
    }

    fn payload(&self, s: usize) -> Vec<f64> {
        let info = self
            .local_info(s, self.labels[s])
            .expect("current label exists");
        flatten(
            &[&info.info_matrix],
            &[&info.info_vector],
            &[info.log_scale],
        )
    }

    fn record(&mut self, labels: Vec<usize>, copies: Vec<CanonicalInfo>) {
        let sums = copies[0].clone();
        let log_weight = fused_log_weight(&self.priors, &sums);
        let key = match self.key {
            ArchiveKey::Labels => labels.iter().map(|&l| l as u64).collect(),
            ArchiveKey::Weight => vec![log_weight.to_bits()],
        };
        if self.seen.insert(key) {
            self.archive.push(ArchiveEntry {
                labels,
                sums,
                copies,
                log_weight,
            });
        }
    }

    /// Archive entries ordered by weight, descending; ties by insertion order.
    pub fn ranked(&self) -> Vec<&ArchiveEntry> {
        let mut out: Vec<&ArchiveEntry> = self.archive.iter().collect();
        out.sort_by(|a, b| {
            b.log_weight
                .partial_cmp(&a.log_weight)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        out
    }
}

/// Every agent draws its initial label with probability ∝ the stand-alone
/// product weight of the selected term with the prior.
pub fn hogwild_init<R: Rng>(state: &mut HogwildState, rngs: &mut [R]) -> Result<()> {
    for s in 0..state.n_agents() {
        let weights: Vec<f64> = state.tables[s]
            .iter()
            .map(|info| {
                info.as_ref()
                    .map_or(f64::NEG_INFINITY, |i| fused_log_weight(&state.priors, i))
            })
            .collect();
        state.labels[s] =
            sample_log_categorical(&weights, &mut rngs[s]).ok_or(Error::DegenerateLikelihood(s))?;
        state.trajectory.push((0, s, state.labels[s]));
    }
    Ok(())
}

/// One round: agreement on the global sums of the current labels, archiving,
/// then a simultaneous local redraw at every agent.
pub fn hogwild_round<R: Rng>(
    state: &mut HogwildState,
    consensus: &mut Consensus,
    rngs: &mut [R],
    round: usize,
) -> Result<()> {
    let s_count = state.n_agents();
    let payloads: Vec<Vec<f64>> = (0..s_count).map(|s| state.payload(s)).collect();
    let copies: Vec<CanonicalInfo> = consensus
        .sum_agreed_copies(&payloads)?
        .iter()
        .map(|agreed| {
            let (m, v, c) = unflatten_canonical(agreed, state.dim);
            CanonicalInfo {
                info_matrix: m,
                info_vector: v,
                log_scale: c,
            }
        })
        .collect();
    if state.key == ArchiveKey::Labels {
        consensus.charge_labels(s_count);
    }
    state.record(state.labels.clone(), copies.clone());

    let mut next = state.labels.clone();
    for s in 0..s_count {
        // every agent works from its own copy of the agreed sums
        let global = &copies[s];
        let own = state
            .local_info(s, state.labels[s])
            .expect("current label exists");
        let base = global.minus(own);
        let weights: Vec<f64> = state.tables[s]
            .iter()
            .enumerate()
            .map(|(q, info)| match info {
                None => f64::NEG_INFINITY,
                Some(_) if q == state.labels[s] => fused_log_weight(&state.priors, global),
                Some(i) => fused_log_weight(&state.priors, &base.plus(i)),
            })
            .collect();
        next[s] =
            sample_log_categorical(&weights, &mut rngs[s]).ok_or(Error::DegenerateLikelihood(s))?;
        state.trajectory.push((round, s, next[s]));
    }
    state.labels = next;
    Ok(())
}

/// Network-wide PT belief together with what δ extraction needs.
#[derive(Debug, Clone)]
pub struct HogwildOutcome {
    /// Normalized belief of agent 0.
    pub belief: PtBelief,
    /// The belief as materialized by every agent from its own copies.
    pub agent_beliefs: Vec<PtBelief>,
    pub state: HogwildState,
    /// ln b₀ = Σ_s ln η_s(0) as agreed by consensus.
    pub log_b0: f64,
    /// ln of the prior nonexistence mass.
    pub log_prior_nonexist: f64,
    pub top: usize,
}

/// Runs `settings.rounds` rounds and forms the normalized PT belief.
///
/// # Arguments
/// * `prior` - predicted PT belief α
/// * `gammas` - per-agent γ messages
/// * `eta0` - per-agent η_s(0) (1 for agents not observing the PT)
pub fn hogwild_belief<R: Rng>(
    prior: &PtBelief,
    gammas: &[LikelihoodMessage],
    eta0: &[f64],
    settings: HogwildSettings,
    consensus: &mut Consensus,
    rngs: &mut [R],
) -> Result<HogwildOutcome> {
    let s_count = consensus.n_agents();
    if gammas.len() != s_count || eta0.len() != s_count || rngs.len() < s_count {
        return Err(Error::DimensionMismatch {
            expected: s_count,
            found: gammas.len().min(eta0.len()).min(rngs.len()),
        });
    }
    let mut state = HogwildState::new(&prior.exist, gammas, settings.archive_mode)?;
    if !state.priors.is_empty() {
        hogwild_init(&mut state, rngs)?;
        for round in 1..=settings.rounds.max(1) {
            hogwild_round(&mut state, consensus, rngs, round)?;
        }
    }
    let log_eta0: Vec<Vec<f64>> = eta0.iter().map(|e| vec![e.max(MIN_ETA0).ln()]).collect();
    let log_b0_copies = consensus.sum_agreed_copies(&log_eta0)?;
    let log_prior_nonexist = prior.nonexist_mass.ln();
    let top = settings.top.max(1);
    let agent_beliefs = (0..s_count)
        .map(|s| {
            // each agent ranks its own archive copies
            let mut entries: Vec<(&CanonicalInfo, f64)> = state
                .archive
                .iter()
                .map(|e| (&e.copies[s], fused_log_weight(&state.priors, &e.copies[s])))
                .collect();
            entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
            let comps: Vec<ScaledGaussian> = entries
                .into_iter()
                .take(top)
                .flat_map(|(sums, _)| materialize(&state.priors, sums))
                .collect();
            let exist = GaussianMixture::from_components(state.dim, comps)?;
            normalize_parts(exist, log_b0_copies[s][0] + log_prior_nonexist)
        })
        .collect::<Result<Vec<_>>>()?;
    let belief = agent_beliefs[0].clone();
    let log_b0 = log_b0_copies[0][0];
    Ok(HogwildOutcome {
        belief,
        agent_beliefs,
        state,
        log_b0,
        log_prior_nonexist,
        top,
    })
}

/// Scales an unnormalized (existence GM, ln nonexistence) pair to unit mass.
pub fn normalize_parts(exist: GaussianMixture, log_nonexist: f64) -> Result<PtBelief> {
    let log_n = log_sum_exp(&[exist.log_total_weight(), log_nonexist]);
    if !log_n.is_finite() {
        return Err(Error::ZeroWeight);
    }
    Ok(PtBelief {
        exist: exist.scaled(-log_n),
        nonexist_mass: (log_nonexist - log_n).exp(),
    })
}

/// δ message to agent `s`: the agreed sums with the agent's own contribution
/// removed, fused with the prior, over distinct leave-`s`-out label vectors;
/// nonexistence b₀ α₀ / η_s(0). Normalized jointly. Falls back to the prior when
/// no component survives.
///
/// # Arguments
/// * `prior` - the same predicted PT belief passed to [`hogwild_belief`]
/// * `eta0_s` - η_s(0) of agent `s`
pub fn extract_delta(
    outcome: &HogwildOutcome,
    prior: &PtBelief,
    s: usize,
    eta0_s: f64,
) -> Result<PtBelief> {
    let state = &outcome.state;
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut comps = Vec::new();
    let mut kept = 0;
    for entry in state.ranked() {
        if kept >= outcome.top {
            break;
        }
        let own = state
            .local_info(s, entry.labels[s])
            .expect("archived label exists");
        let sums = entry.sums.minus(own);
        let key: Vec<u64> = match state.key {
            ArchiveKey::Labels => {
                let mut k: Vec<u64> = entry.labels.iter().map(|&l| l as u64).collect();
                k.remove(s);
                k
            }
            ArchiveKey::Weight => vec![fused_log_weight(&state.priors, &sums).to_bits()],
        };
        if !seen.insert(key) {
            continue;
        }
        kept += 1;
        comps.extend(materialize(&state.priors, &sums));
    }
    let log_nonexist = outcome.log_b0 + outcome.log_prior_nonexist - eta0_s.max(MIN_ETA0).ln();
    let exist = GaussianMixture::from_components(state.dim, comps)?;
    if exist.is_empty() && prior.exist.total_weight() > 0.0 {
        log::warn!("no components for extrinsic message at agent {s}; using the prior");
        return prior.clone().normalized();
    }
    normalize_parts(exist, log_nonexist)
}
