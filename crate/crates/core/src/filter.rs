//! One time step of the cooperative self-localization and tracking filter for
//! the whole network, in its centralized/decentralized, mixture/single-Gaussian
//! and separate-localization (SPAWN) variants.
//!
//! Every potential target (PT) slot keeps one belief shared by all agents; the
//! decentralized variants obtain it through consensus, so the shared copy is
//! exactly what each agent would hold.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::association::{compute_beta_gm, inner_bp};
use crate::consensus::{CommCounter, Consensus};
use crate::error::{Error, Result};
use crate::gibbs::{gibbs_product, info_priors, prune_likelihood, GibbsSettings, LabelRanking};
use crate::gm::{gm_merge, gm_truncate, moment_match, GaussianMixture};
use crate::hogwild::{
    extract_delta, hogwild_belief, normalize_parts, ArchiveMode, HogwildSettings,
};
use crate::messages::{compute_gamma_msg, compute_lambda_msg, compute_phi_msg, LikelihoodMessage};
use crate::models::{
    agent_predict, linearize_range_bearing, target_predict, LinearizedObservation, PtBelief,
};
use crate::scenario::{FrameMeasurements, NetworkGraph, Scenario};
use crate::seeding::derive_seed;
use crate::single_gaussian::{
    delta_single_belief, extract_delta_single, fuse_shards, fused_belief, local_shard, ShardFusion,
};

// ============================================================================
// Configuration
// ============================================================================

/// Filter variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Variant {
    /// Centralized Gaussian mixture.
    #[default]
    #[serde(rename = "CGM")]
    Cgm,
    /// Decentralized Gaussian mixture (Hogwild Gibbs for PT beliefs).
    #[serde(rename = "DGM")]
    Dgm,
    /// Centralized single Gaussian.
    #[serde(rename = "CG")]
    Cg,
    /// Decentralized single Gaussian (shard fusion for PT beliefs).
    #[serde(rename = "DG")]
    Dg,
    /// Separate localization then tracking, mixtures.
    #[serde(rename = "CGM-SPAWN")]
    CgmSpawn,
    /// Separate localization then tracking, single Gaussians.
    #[serde(rename = "CG-SPAWN")]
    CgSpawn,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Cgm,
        Variant::Dgm,
        Variant::Cg,
        Variant::Dg,
        Variant::CgmSpawn,
        Variant::CgSpawn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cgm => "CGM",
            Variant::Dgm => "DGM",
            Variant::Cg => "CG",
            Variant::Dg => "DG",
            Variant::CgmSpawn => "CGM-SPAWN",
            Variant::CgSpawn => "CG-SPAWN",
        }
    }

    /// Beliefs are single Gaussians.
    pub fn single_gaussian(self) -> bool {
        matches!(self, Variant::Cg | Variant::Dg | Variant::CgSpawn)
    }

    /// Agent beliefs ignore target measurements.
    pub fn spawn(self) -> bool {
        matches!(self, Variant::CgmSpawn | Variant::CgSpawn)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant `{s}` (expected one of CGM, DGM, CG, DG, CGM-SPAWN, CG-SPAWN)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub variant: Variant,
    /// Outer iterations P per step.
    pub outer_iters: usize,
    /// Gibbs sweeps T (also Hogwild rounds).
    pub gibbs_sweeps: usize,
    /// Label vectors materialized per product.
    pub gibbs_top: usize,
    /// Archive every candidate label vector evaluated by the centralized sampler.
    pub gibbs_archive_candidates: bool,
    pub label_ranking: LabelRanking,
    /// Average-consensus rounds Q.
    pub consensus_rounds: usize,
    /// Existence probability τ above which a PT is reported.
    pub existence_threshold: f64,
    pub agent_max_components: usize,
    pub target_max_components: usize,
    /// Relative weight below which mixture components are dropped.
    pub weight_floor: f64,
    /// Squared Mahalanobis radius within which belief components are merged
    /// before truncation; 0 disables merging.
    pub merge_threshold: f64,
    /// Relative product weight below which likelihood terms are dropped.
    pub prune_floor: f64,
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub archive_mode: ArchiveMode,
    pub shard_fusion: ShardFusion,
    /// Record the message schedule of every step.
    pub trace: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Cgm,
            outer_iters: 1,
            gibbs_sweeps: 20,
            gibbs_top: 20,
            gibbs_archive_candidates: true,
            label_ranking: LabelRanking::Weight,
            consensus_rounds: 50,
            existence_threshold: 0.5,
            agent_max_components: 20,
            target_max_components: 20,
            weight_floor: crate::gm::DEFAULT_WEIGHT_FLOOR,
            merge_threshold: 1.0,
            prune_floor: 1e-9,
            inner_iters: crate::association::DEFAULT_INNER_ITERS,
            inner_tol: crate::association::DEFAULT_INNER_TOL,
            archive_mode: ArchiveMode::Labels,
            shard_fusion: ShardFusion::ExactProduct,
            trace: false,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 {
            return Err(Error::Config("outer_iters must be at least 1".into()));
        }
        if !(self.existence_threshold > 0.0 && self.existence_threshold < 1.0) {
            return Err(Error::Config(
                "existence_threshold must lie in (0, 1)".into(),
            ));
        }
        if self.gibbs_sweeps == 0 || self.gibbs_top == 0 {
            return Err(Error::Config(
                "gibbs_sweeps and gibbs_top must be positive".into(),
            ));
        }
        if self.agent_max_components == 0 || self.target_max_components == 0 {
            return Err(Error::Config("component caps must be positive".into()));
        }
        if !(self.merge_threshold >= 0.0 && self.merge_threshold.is_finite()) {
            return Err(Error::Config(
                "merge_threshold must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    fn gibbs(&self) -> GibbsSettings {
        GibbsSettings {
            sweeps: self.gibbs_sweeps,
            archive_candidates: self.gibbs_archive_candidates,
            top: self.gibbs_top,
            ranking: self.label_ranking,
        }
    }
}

// ============================================================================
// Beliefs and reports
// ============================================================================

/// Agent beliefs (normalized mixtures) and PT beliefs at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Beliefs {
    pub agents: Vec<GaussianMixture>,
    pub targets: Vec<PtBelief>,
}

impl Beliefs {
    /// Agent priors from the scenario (moment-matched for single-Gaussian
    /// variants) and every PT slot absent.
    pub fn initial(scenario: &Scenario, variant: Variant) -> Result<Self> {
        let agents = scenario
            .agent_priors
            .iter()
            .map(|gm| {
                if variant.single_gaussian() {
                    Ok(GaussianMixture::single(moment_match(gm)?))
                } else {
                    Ok(gm.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let dim = scenario
            .target_dynamics
            .first()
            .map_or(4, |d| d.transition.nrows());
        Ok(Self {
            agents,
            targets: vec![PtBelief::absent(dim); scenario.n_slots()],
        })
    }

    /// Writes every component as CSV: kind, index, component, weight, mean entries.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["kind", "index", "component", "weight", "mean"])?;
        for (s, gm) in self.agents.iter().enumerate() {
            for (j, c) in gm.iter().enumerate() {
                let mut rec = vec![
                    "agent".to_string(),
                    s.to_string(),
                    j.to_string(),
                    c.weight().to_string(),
                ];
                rec.extend(c.mean.iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
        for (k, b) in self.targets.iter().enumerate() {
            w.write_record([
                "absent".to_string(),
                k.to_string(),
                String::new(),
                b.nonexist_mass.to_string(),
            ])?;
            for (j, c) in b.exist.iter().enumerate() {
                let mut rec = vec![
                    "target".to_string(),
                    k.to_string(),
                    j.to_string(),
                    c.weight().to_string(),
                ];
                rec.extend(c.mean.iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Message-schedule stages in execution order within an outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Predict,
    Initialize,
    Phi,
    Beta,
    Eta,
    Lambda,
    AgentBelief,
    Theta,
    Gamma,
    TargetBelief,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEvent {
    /// Outer iteration (0 for prediction and initialization).
    pub iteration: usize,
    pub stage: Stage,
}

/// Diagnostics of one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// Consensus traffic of the whole step.
    pub comm: CommCounter,
    /// Consensus traffic per PT slot and outer iteration, `[p][k]`.
    pub comm_per_pt: Vec<Vec<CommCounter>>,
    pub pt_failures: usize,
    pub agent_failures: usize,
    /// PT slots each agent treated as observed in the last iteration.
    pub observed: Vec<Vec<usize>>,
    pub trace: Vec<ScheduleEvent>,
}

impl StepReport {
    fn mark(&mut self, enabled: bool, iteration: usize, stage: Stage) {
        if enabled {
            self.trace.push(ScheduleEvent { iteration, stage });
        }
    }
}

/// Everything a step consumes besides the previous beliefs.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub scenario: &'a Scenario,
    pub graph: &'a NetworkGraph,
    pub frame: &'a FrameMeasurements,
    /// Time index n.
    pub step: usize,
    /// Seed of the run; per-step randomness is derived from it.
    pub seed: u64,
}

mod purpose {
    pub const AGENT_GIBBS: u64 = 1;
    pub const TARGET_GIBBS: u64 = 2;
    pub const HOGWILD: u64 = 3;
}

fn stream(
    seed: u64,
    step: usize,
    purpose: u64,
    iteration: usize,
    a: usize,
    b: usize,
) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[
        seed,
        step as u64,
        purpose,
        iteration as u64,
        a as u64,
        b as u64,
    ]))
}

fn mixture_mean(gm: &GaussianMixture) -> Option<DVector<f64>> {
    if gm.is_empty() || !(gm.log_total_weight() > f64::NEG_INFINITY) {
        return None;
    }
    gm.mean()
}

fn position_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn single_if(gm: GaussianMixture, single: bool) -> Result<GaussianMixture> {
    if single && gm.len() > 1 {
        Ok(GaussianMixture::single(moment_match(&gm)?))
    } else {
        Ok(gm)
    }
}

fn finish_pt(belief: PtBelief, cfg: &FilterConfig) -> Result<PtBelief> {
    let exist = gm_merge(&belief.exist, cfg.merge_threshold)?;
    let exist = single_if(
        gm_truncate(&exist, cfg.target_max_components, cfg.weight_floor),
        cfg.variant.single_gaussian(),
    )?;
    Ok(PtBelief {
        exist,
        nonexist_mass: belief.nonexist_mass,
    })
}

fn finish_agent(gm: GaussianMixture, cfg: &FilterConfig) -> Result<GaussianMixture> {
    let gm = gm_merge(&gm, cfg.merge_threshold)?;
    let gm = gm_truncate(&gm, cfg.agent_max_components, cfg.weight_floor).normalized();
    single_if(gm, cfg.variant.single_gaussian())
}

// ============================================================================
// Step
// ============================================================================

/// Per-(agent, PT) association inputs of one outer iteration.
struct Link {
    slot: usize,
    obs: LinearizedObservation,
}

/// Target-side outcome of one outer iteration for one PT.
struct PtOutcome {
    belief: PtBelief,
    /// δ per agent, present when another iteration follows.
    deltas: Option<Vec<PtBelief>>,
}

/// Runs prediction and `outer_iters` message-passing iterations.
pub fn step(
    prev: &Beliefs,
    input: StepInput<'_>,
    cfg: &FilterConfig,
) -> Result<(Beliefs, StepReport)> {
    cfg.validate()?;
    let sc = input.scenario;
    let n_agents = sc.n_agents();
    let n_slots = sc.n_slots();
    if prev.agents.len() != n_agents || prev.targets.len() != n_slots {
        return Err(Error::DimensionMismatch {
            expected: n_agents,
            found: prev.agents.len(),
        });
    }
    let single = cfg.variant.single_gaussian();
    let mut report = StepReport::default();

    // Prediction.
    let phi: Vec<GaussianMixture> = prev
        .agents
        .iter()
        .zip(&sc.agent_dynamics)
        .map(|(b, d)| single_if(agent_predict(b, d)?.normalized(), single))
        .collect::<Result<_>>()?;
    let alpha: Vec<PtBelief> = prev
        .targets
        .iter()
        .zip(&sc.target_dynamics)
        .map(|(b, d)| {
            let pred = target_predict(b, d)?;
            PtBelief {
                exist: single_if(pred.exist, single)?,
                nonexist_mass: pred.nonexist_mass,
            }
            .normalized()
        })
        .collect::<Result<_>>()?;
    report.mark(cfg.trace, 0, Stage::Predict);

    // Initialization.
    let mut beliefs: Vec<GaussianMixture> = phi.clone();
    let mut theta: Vec<Vec<GaussianMixture>> = vec![Vec::new(); n_agents];
    for s in 0..n_agents {
        theta[s] = vec![phi[s].clone(); n_slots];
    }
    let mut delta: Vec<Vec<PtBelief>> = alpha.iter().map(|a| vec![a.clone(); n_agents]).collect();
    let mut targets: Vec<PtBelief> = alpha.clone();
    report.mark(cfg.trace, 0, Stage::Initialize);

    let clutter: Vec<f64> = sc
        .target_sensors
        .iter()
        .map(|m| m.clutter_intensity())
        .collect::<Result<_>>()?;

    for p in 1..=cfg.outer_iters {
        let last = p == cfg.outer_iters;

        // Φ from the previous iteration's agent beliefs.
        let snapshot = beliefs.clone();
        let mut phi_msgs: Vec<Vec<LikelihoodMessage>> = vec![Vec::new(); n_agents];
        for s in 0..n_agents {
            let Some(own_mean) = mixture_mean(&snapshot[s]) else {
                continue;
            };
            for &l in input.graph.neighbors(s) {
                let (Some(w), Some(nb_mean)) = (
                    input.frame.inter_agent_from(s, l),
                    mixture_mean(&snapshot[l]),
                ) else {
                    continue;
                };
                match linearize_range_bearing(&own_mean, &nb_mean, &sc.inter_agent_noise) {
                    Ok(obs) => phi_msgs[s].push(compute_phi_msg(&snapshot[l], &obs, w)),
                    Err(e) => log::warn!("step {}: no Φ from agent {l} to {s}: {e}", input.step),
                }
            }
        }
        report.mark(cfg.trace, p, Stage::Phi);

        // β and η per agent over the PTs it can observe.
        let mut links: Vec<Vec<Link>> = Vec::with_capacity(n_agents);
        let mut etas: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_agents);
        for s in 0..n_agents {
            let sensor = &sc.target_sensors[s];
            let z = &input.frame.target[s];
            let mut agent_links = Vec::new();
            let mut rows = Vec::new();
            let agent_mean = mixture_mean(&phi[s]);
            for k in 0..n_slots {
                let (Some(am), Some(pt_mean)) =
                    (agent_mean.as_ref(), mixture_mean(&alpha[k].exist))
                else {
                    continue;
                };
                if position_distance(am, &pt_mean) > sensor.max_range {
                    continue;
                }
                let d = &delta[k][s];
                let (Some(th_mean), Some(d_mean)) =
                    (mixture_mean(&theta[s][k]), mixture_mean(&d.exist))
                else {
                    continue;
                };
                let obs = match linearize_range_bearing(&th_mean, &d_mean, &sensor.noise) {
                    Ok(o) => o,
                    Err(e) => {
                        log::warn!("step {}: PT {k} skipped at agent {s}: {e}", input.step);
                        continue;
                    }
                };
                match compute_beta_gm(&theta[s][k], &d.exist, &obs, z, sensor.p_detect, clutter[s])
                {
                    Ok(row) => {
                        rows.push(row);
                        agent_links.push(Link { slot: k, obs });
                    }
                    Err(e) => log::warn!("step {}: PT {k} skipped at agent {s}: {e}", input.step),
                }
            }
            etas.push(inner_bp(&rows, cfg.inner_iters, cfg.inner_tol).eta);
            links.push(agent_links);
        }
        report.mark(cfg.trace, p, Stage::Beta);
        report.mark(cfg.trace, p, Stage::Eta);

        // Λ messages.
        let mut lambda_msgs: Vec<Vec<LikelihoodMessage>> = vec![Vec::new(); n_agents];
        if !cfg.variant.spawn() {
            for s in 0..n_agents {
                let sensor = &sc.target_sensors[s];
                for (link, eta) in links[s].iter().zip(&etas[s]) {
                    let d = &delta[link.slot][s];
                    lambda_msgs[s].push(compute_lambda_msg(
                        eta,
                        &d.exist,
                        &input.frame.target[s],
                        &link.obs,
                        sensor.p_detect,
                        clutter[s],
                    ));
                }
            }
        }
        report.mark(cfg.trace, p, Stage::Lambda);

        // Agent beliefs and θ.
        for s in 0..n_agents {
            let mut rng = stream(input.seed, input.step, purpose::AGENT_GIBBS, p, s, 0);
            match agent_update(&phi[s], &phi_msgs[s], &lambda_msgs[s], cfg, &mut rng) {
                Ok((belief, thetas)) => {
                    beliefs[s] = belief;
                    if cfg.variant.spawn() {
                        for k in 0..n_slots {
                            theta[s][k] = beliefs[s].clone();
                        }
                    } else {
                        for (link, th) in links[s].iter().zip(thetas) {
                            theta[s][link.slot] = th.unwrap_or_else(|| beliefs[s].clone());
                        }
                    }
                }
                Err(e) => {
                    log::warn!(
                        "step {}: agent {s} belief fell back to its prediction: {e}",
                        input.step
                    );
                    report.agent_failures += 1;
                    beliefs[s] = phi[s].clone();
                }
            }
        }
        report.mark(cfg.trace, p, Stage::AgentBelief);
        report.mark(cfg.trace, p, Stage::Theta);

        // γ messages, indexed [k][s].
        let mut gammas: Vec<Vec<LikelihoodMessage>> =
            vec![vec![LikelihoodMessage::unit(); n_agents]; n_slots];
        let mut eta0: Vec<Vec<f64>> = vec![vec![1.0; n_agents]; n_slots];
        for s in 0..n_agents {
            let sensor = &sc.target_sensors[s];
            for (link, eta) in links[s].iter().zip(&etas[s]) {
                let k = link.slot;
                let th = &theta[s][k];
                let d_mean = mixture_mean(&delta[k][s].exist);
                let obs = match (mixture_mean(th), d_mean) {
                    (Some(tm), Some(dm)) => linearize_range_bearing(&tm, &dm, &sensor.noise)
                        .unwrap_or_else(|_| link.obs.clone()),
                    _ => link.obs.clone(),
                };
                let (msg, e0) = compute_gamma_msg(
                    eta,
                    th,
                    &input.frame.target[s],
                    &obs,
                    sensor.p_detect,
                    clutter[s],
                );
                gammas[k][s] = msg;
                eta0[k][s] = e0;
            }
        }
        report.mark(cfg.trace, p, Stage::Gamma);
        report.observed = links
            .iter()
            .map(|l| l.iter().map(|x| x.slot).collect())
            .collect();

        // PT beliefs.
        let mut consensus = Consensus::new(input.graph.clone(), cfg.consensus_rounds);
        let mut comm_row = Vec::with_capacity(n_slots);
        for k in 0..n_slots {
            let outcome = target_update(
                &alpha[k],
                &gammas[k],
                &eta0[k],
                !last,
                cfg,
                &mut consensus,
                input,
                p,
                k,
            );
            let counter = consensus.take_counter();
            report.comm.add(&counter);
            comm_row.push(counter);
            match outcome {
                Ok(out) => {
                    targets[k] = out.belief;
                    if let Some(d) = out.deltas {
                        delta[k] = d;
                    }
                }
                Err(e) => {
                    log::warn!(
                        "step {}: PT {k} fell back to its prediction: {e}",
                        input.step
                    );
                    report.pt_failures += 1;
                    targets[k] = alpha[k].clone();
                    delta[k] = vec![alpha[k].clone(); n_agents];
                }
            }
        }
        report.comm_per_pt.push(comm_row);
        report.mark(cfg.trace, p, Stage::TargetBelief);
        if !last {
            report.mark(cfg.trace, p, Stage::Delta);
        }
    }

    Ok((
        Beliefs {
            agents: beliefs,
            targets,
        },
        report,
    ))
}

type AgentUpdate = (GaussianMixture, Vec<Option<GaussianMixture>>);

/// Agent belief from prediction, Φ and Λ messages, plus θ for every Λ.
fn agent_update(
    phi: &GaussianMixture,
    phi_msgs: &[LikelihoodMessage],
    lambda_msgs: &[LikelihoodMessage],
    cfg: &FilterConfig,
    rng: &mut ChaCha8Rng,
) -> Result<AgentUpdate> {
    if phi_msgs.is_empty() && lambda_msgs.is_empty() {
        return Ok((phi.clone(), Vec::new()));
    }
    let priors = info_priors(phi)?;
    let likelihoods: Vec<LikelihoodMessage> = phi_msgs
        .iter()
        .chain(lambda_msgs)
        .map(|m| prune_likelihood(&priors, m, cfg.prune_floor))
        .collect::<Result<_>>()?;
    let (product, state) = gibbs_product(phi, &likelihoods, cfg.gibbs(), rng)?;
    let belief = finish_agent(product, cfg)?;
    let thetas = (0..lambda_msgs.len())
        .map(|i| {
            let l = phi_msgs.len() + i;
            match state.leave_one_out_mixture(l, cfg.gibbs_top) {
                Ok(gm) if gm.log_total_weight().is_finite() => finish_agent(gm, cfg).ok(),
                Ok(_) => None,
                Err(e) => {
                    log::warn!("θ extraction fell back to the agent belief: {e}");
                    None
                }
            }
        })
        .collect();
    Ok((belief, thetas))
}

#[allow(clippy::too_many_arguments)]
fn target_update(
    alpha: &PtBelief,
    gammas: &[LikelihoodMessage],
    eta0: &[f64],
    want_delta: bool,
    cfg: &FilterConfig,
    consensus: &mut Consensus,
    input: StepInput<'_>,
    p: usize,
    k: usize,
) -> Result<PtOutcome> {
    match cfg.variant {
        Variant::Dgm => {
            target_update_hogwild(alpha, gammas, eta0, want_delta, cfg, consensus, input, p, k)
        }
        Variant::Dg => target_update_shards(alpha, gammas, eta0, want_delta, cfg, consensus),
        _ => target_update_central(alpha, gammas, eta0, want_delta, cfg, input, p, k),
    }
}

#[allow(clippy::too_many_arguments)]
fn target_update_central(
    alpha: &PtBelief,
    gammas: &[LikelihoodMessage],
    eta0: &[f64],
    want_delta: bool,
    cfg: &FilterConfig,
    input: StepInput<'_>,
    p: usize,
    k: usize,
) -> Result<PtOutcome> {
    let observers: Vec<usize> = (0..gammas.len())
        .filter(|&s| !gammas[s].is_unit())
        .collect();
    if observers.is_empty() || alpha.exist.is_empty() {
        let log_b0: f64 = eta0.iter().map(|e| e.ln()).sum();
        let belief = finish_pt(
            normalize_parts(alpha.exist.clone(), alpha.nonexist_mass.ln() + log_b0)?,
            cfg,
        )?;
        let deltas = want_delta.then(|| vec![belief.clone(); gammas.len()]);
        return Ok(PtOutcome { belief, deltas });
    }
    let priors = info_priors(&alpha.exist)?;
    let likelihoods: Vec<LikelihoodMessage> = observers
        .iter()
        .map(|&s| prune_likelihood(&priors, &gammas[s], cfg.prune_floor))
        .collect::<Result<_>>()?;
    let mut rng = stream(input.seed, input.step, purpose::TARGET_GIBBS, p, k, 0);
    let (product, state) = gibbs_product(&alpha.exist, &likelihoods, cfg.gibbs(), &mut rng)?;
    let log_eta0: Vec<f64> = eta0.iter().map(|e| e.max(1e-300).ln()).collect();
    let log_b0: f64 = log_eta0.iter().sum();
    let log_a0 = alpha.nonexist_mass.ln();
    let belief = finish_pt(normalize_parts(product, log_a0 + log_b0)?, cfg)?;
    let deltas = if want_delta {
        let mut out = vec![belief.clone(); gammas.len()];
        for (l, &s) in observers.iter().enumerate() {
            let exist = state.leave_one_out_mixture(l, cfg.gibbs_top)?;
            out[s] = finish_pt(normalize_parts(exist, log_a0 + log_b0 - log_eta0[s])?, cfg)?;
        }
        Some(out)
    } else {
        None
    };
    Ok(PtOutcome { belief, deltas })
}

#[allow(clippy::too_many_arguments)]
fn target_update_hogwild(
    alpha: &PtBelief,
    gammas: &[LikelihoodMessage],
    eta0: &[f64],
    want_delta: bool,
    cfg: &FilterConfig,
    consensus: &mut Consensus,
    input: StepInput<'_>,
    p: usize,
    k: usize,
) -> Result<PtOutcome> {
    let priors = info_priors(&alpha.exist)?;
    let pruned: Vec<LikelihoodMessage> = gammas
        .iter()
        .map(|g| {
            if g.is_unit() {
                Ok(g.clone())
            } else {
                prune_likelihood(&priors, g, cfg.prune_floor)
            }
        })
        .collect::<Result<_>>()?;
    let mut rngs: Vec<ChaCha8Rng> = (0..gammas.len())
        .map(|s| stream(input.seed, input.step, purpose::HOGWILD, p, k, s))
        .collect();
    let settings = HogwildSettings {
        rounds: cfg.gibbs_sweeps,
        top: cfg.gibbs_top,
        archive_mode: cfg.archive_mode,
    };
    let outcome = hogwild_belief(alpha, &pruned, eta0, settings, consensus, &mut rngs)?;
    let belief = finish_pt(outcome.belief.clone(), cfg)?;
    let deltas = if want_delta {
        Some(
            (0..gammas.len())
                .map(|s| finish_pt(extract_delta(&outcome, alpha, s, eta0[s])?, cfg))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(PtOutcome { belief, deltas })
}

fn target_update_shards(
    alpha: &PtBelief,
    gammas: &[LikelihoodMessage],
    eta0: &[f64],
    want_delta: bool,
    cfg: &FilterConfig,
    consensus: &mut Consensus,
) -> Result<PtOutcome> {
    let s_count = gammas.len();
    if alpha.exist.is_empty() {
        let belief = PtBelief::absent(alpha.exist.dim());
        return Ok(PtOutcome {
            deltas: want_delta.then(|| vec![belief.clone(); s_count]),
            belief,
        });
    }
    let alpha_g = moment_match(&alpha.exist)?;
    let shards = gammas
        .iter()
        .map(|g| local_shard(&alpha_g, g, s_count))
        .collect::<Result<Vec<_>>>()?;
    let fused = fuse_shards(&shards, eta0, consensus, cfg.shard_fusion)?;
    let belief = fused_belief(&fused, alpha.nonexist_mass)?;
    let deltas = if want_delta {
        let mut out = Vec::with_capacity(s_count);
        for s in 0..s_count {
            let exist = extract_delta_single(&fused, &shards[s], &alpha_g, s_count)?;
            out.push(delta_single_belief(
                exist,
                &fused,
                alpha.nonexist_mass,
                eta0[s],
            )?);
        }
        Some(out)
    } else {
        None
    };
    Ok(PtOutcome { belief, deltas })
}

// ============================================================================
// Estimates
// ============================================================================

/// A PT whose existence probability reached the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfirmedTarget {
    pub slot: usize,
    pub existence: f64,
    pub state: DVector<f64>,
}

/// MMSE estimates at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub agents: Vec<DVector<f64>>,
    pub targets: Vec<ConfirmedTarget>,
}

impl Estimates {
    pub fn agent_positions(&self) -> Vec<[f64; 2]> {
        self.agents.iter().map(|a| [a[0], a[1]]).collect()
    }

    pub fn target_positions(&self) -> Vec<[f64; 2]> {
        self.targets
            .iter()
            .map(|t| [t.state[0], t.state[1]])
            .collect()
    }
}

/// Agent posterior means and the PTs with existence probability ≥ τ.
pub fn infer(beliefs: &Beliefs, threshold: f64) -> Estimates {
    let agents = beliefs
        .agents
        .iter()
        .map(|gm| gm.mean().unwrap_or_else(|| DVector::zeros(gm.dim())))
        .collect();
    let targets = beliefs
        .targets
        .iter()
        .enumerate()
        .filter_map(|(slot, b)| {
            let existence = b.existence_probability();
            if existence < threshold {
                return None;
            }
            Some(ConfirmedTarget {
                slot,
                existence,
                state: b.exist.mean()?,
            })
        })
        .collect();
    Estimates { agents, targets }
}
