//! Independent oracles and seeded instance generators shared by the
//! integration tests and the acceptance report.
//!
//! The oracles deliberately avoid the library's information-form code paths:
//! Gaussians are evaluated through explicit inverses and determinants, and
//! products are built by sequential covariance-form Kalman updates.

#![allow(dead_code)]

use std::time::{Duration, Instant};

use coopmtt::association::inner_bp;
use coopmtt::consensus::{bitwise_equal, CommCounter, Consensus};
use coopmtt::filter::{step, Beliefs, FilterConfig, StepInput, StepReport, Variant};
use coopmtt::gibbs::{gibbs_product, GibbsProductState, GibbsSettings, LabelRanking};
use coopmtt::gm::{
    fuse_prior_with_info, gaussian_fractional_power, gaussian_product_pair, moment_match,
    CanonicalInfo, GaussianMixture, LikelihoodComponent, ScaledGaussian,
};
use coopmtt::hogwild::{hogwild_belief, normalize_parts, HogwildSettings};
use coopmtt::messages::LikelihoodMessage;
use coopmtt::metrics::{ospa, ospa_breakdown, OspaParams};
use coopmtt::models::PtBelief;
use coopmtt::scenario::{
    build_graphs, reference_scenario, synthesize_frame, NetworkGraph, Scenario,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ============================================================================
// Random instances
// ============================================================================

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut impl Rng, d: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-scale..scale))
}

/// A Aᵀ + floor·I with A uniform in [−1, 1]: condition number stays moderate.
pub fn random_spd(rng: &mut impl Rng, d: usize, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let m = &a * a.transpose() + DMatrix::identity(d, d) * floor;
    (&m + m.transpose()) * 0.5
}

pub fn random_gaussian(rng: &mut impl Rng, d: usize) -> ScaledGaussian {
    ScaledGaussian::new(
        rng.random_range(-2.0..1.0),
        random_vector(rng, d, 3.0),
        random_spd(rng, d, 0.5),
    )
}

// ============================================================================
// Gaussian oracles
// ============================================================================

/// ln N(x; m, P) through an explicit inverse and LU determinant.
pub fn log_gauss(x: &DVector<f64>, m: &DVector<f64>, p: &DMatrix<f64>) -> f64 {
    let d = x.len() as f64;
    let inv = p.clone().try_inverse().expect("invertible covariance");
    let r = x - m;
    -0.5 * (d * (2.0 * std::f64::consts::PI).ln()
        + p.determinant().ln()
        + (r.transpose() * inv * &r)[(0, 0)])
}

pub fn log_scaled(g: &ScaledGaussian, x: &DVector<f64>) -> f64 {
    g.log_weight + log_gauss(x, &g.mean, &g.cov)
}

/// |exp(a − b) − 1|: relative error of a value given both logs.
pub fn rel_from_logs(a: f64, b: f64) -> f64 {
    ((a - b).exp() - 1.0).abs()
}

/// Largest entry-wise difference relative to the larger magnitude (floored at 1).
pub fn rel_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(1.0);
    (a - b).amax() / scale
}

pub fn rel_vector(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(1.0);
    (a - b).amax() / scale
}

/// Points within about two standard deviations of `g`.
fn probe_points(rng: &mut impl Rng, g: &ScaledGaussian, n: usize) -> Vec<DVector<f64>> {
    let l = g.cov.clone().cholesky().expect("SPD").l();
    (0..n)
        .map(|_| &g.mean + &l * random_vector(rng, g.dim(), 2.0))
        .collect()
}

/// Outcome of one algebra property on one random instance.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlgebraErrors {
    pub product: f64,
    pub fuse: f64,
    pub moment_match: f64,
    pub fractional_power: f64,
}

impl AlgebraErrors {
    pub fn max(self, o: Self) -> Self {
        Self {
            product: self.product.max(o.product),
            fuse: self.fuse.max(o.fuse),
            moment_match: self.moment_match.max(o.moment_match),
            fractional_power: self.fractional_power.max(o.fractional_power),
        }
    }
}

/// Pointwise check of the pair product: a(x)·b(x) = (a·b)(x).
pub fn product_error(rng: &mut impl Rng, d: usize) -> f64 {
    let a = random_gaussian(rng, d);
    let b = ScaledGaussian::new(
        rng.random_range(-2.0..1.0),
        &a.mean + random_vector(rng, d, 1.0),
        random_spd(rng, d, 0.5),
    );
    let prod = gaussian_product_pair(&a, &b).expect("SPD inputs");
    probe_points(rng, &prod, 5)
        .iter()
        .map(|x| rel_from_logs(log_scaled(&prod, x), log_scaled(&a, x) + log_scaled(&b, x)))
        .fold(0.0, f64::max)
}

/// Pointwise check of prior fusion: prior(x)·exp(c − ½xᵀC̃x + xᵀẽ) = fused(x).
pub fn fuse_error(rng: &mut impl Rng, d: usize) -> f64 {
    let prior = random_gaussian(rng, d);
    let info = CanonicalInfo {
        info_vector: random_vector(rng, d, 1.0),
        info_matrix: random_spd(rng, d, 0.1),
        log_scale: rng.random_range(-3.0..0.0),
    };
    let fused = fuse_prior_with_info(&prior, &info).expect("SPD inputs");
    probe_points(rng, &fused, 5)
        .iter()
        .map(|x| {
            let lik = info.log_scale - 0.5 * (x.transpose() * &info.info_matrix * x)[(0, 0)]
                + x.dot(&info.info_vector);
            rel_from_logs(log_scaled(&fused, x), log_scaled(&prior, x) + lik)
        })
        .fold(0.0, f64::max)
}

/// Moment matching against weighted sums of component moments; in one
/// dimension also against composite Simpson quadrature of the mixture density.
pub fn moment_match_error(rng: &mut impl Rng, d: usize) -> f64 {
    let n = rng.random_range(1..5usize);
    let comps: Vec<ScaledGaussian> = (0..n).map(|_| random_gaussian(rng, d)).collect();
    let gm = GaussianMixture::from_components(d, comps.clone()).unwrap();
    let mm = moment_match(&gm).unwrap();
    let total: f64 = comps.iter().map(|c| c.log_weight.exp()).sum();
    let mean = comps.iter().fold(DVector::zeros(d), |acc, c| {
        acc + &c.mean * c.log_weight.exp()
    }) / total;
    let second = comps.iter().fold(DMatrix::zeros(d, d), |acc, c| {
        acc + (&c.cov + &c.mean * c.mean.transpose()) * c.log_weight.exp()
    }) / total;
    let cov = second - &mean * mean.transpose();
    let mut err = rel_from_logs(mm.log_weight, total.ln())
        .max(rel_vector(&mm.mean, &mean))
        .max(rel_matrix(&mm.cov, &cov));
    if d == 1 {
        let (q0, q1, q2) = simpson_moments(&comps);
        err = err.max(((mm.log_weight.exp() - q0) / q0).abs());
        err = err.max((mm.mean[0] - q1 / q0).abs() / (q1 / q0).abs().max(1.0));
        let var = q2 / q0 - (q1 / q0).powi(2);
        err = err.max((mm.cov[(0, 0)] - var).abs() / var.max(1.0));
    }
    err
}

/// ∫p, ∫x p, ∫x² p of a 1-D mixture by composite Simpson over ±14σ.
fn simpson_moments(comps: &[ScaledGaussian]) -> (f64, f64, f64) {
    let lo = comps
        .iter()
        .map(|c| c.mean[0] - 14.0 * c.cov[(0, 0)].sqrt())
        .fold(f64::INFINITY, f64::min);
    let hi = comps
        .iter()
        .map(|c| c.mean[0] + 14.0 * c.cov[(0, 0)].sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let pdf = |x: f64| -> f64 {
        comps
            .iter()
            .map(|c| {
                let v = c.cov[(0, 0)];
                c.log_weight.exp() * (-(x - c.mean[0]).powi(2) / (2.0 * v)).exp()
                    / (2.0 * std::f64::consts::PI * v).sqrt()
            })
            .sum()
    };
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let p = pdf(x) * w;
        s0 += p;
        s1 += p * x;
        s2 += p * x * x;
    }
    (s0 * h / 3.0, s1 * h / 3.0, s2 * h / 3.0)
}

/// Pointwise check of the S-th root: g(x)^{1/S} = root(x).
pub fn fractional_power_error(rng: &mut impl Rng, d: usize) -> f64 {
    let g = random_gaussian(rng, d);
    let s = rng.random_range(1..9usize);
    let root = gaussian_fractional_power(&g, s).unwrap();
    probe_points(rng, &root, 5)
        .iter()
        .map(|x| rel_from_logs(log_scaled(&root, x), log_scaled(&g, x) / s as f64))
        .fold(0.0, f64::max)
}

/// Runs `cases` instances of each algebra property with dimensions 1..=4.
pub fn algebra_suite(seed: u64, cases: usize) -> (AlgebraErrors, Duration) {
    let start = Instant::now();
    let mut r = rng(seed);
    let mut worst = AlgebraErrors::default();
    for i in 0..cases {
        let d = 1 + i % 4;
        worst = worst.max(AlgebraErrors {
            product: product_error(&mut r, d),
            fuse: fuse_error(&mut r, d),
            moment_match: moment_match_error(&mut r, d),
            fractional_power: fractional_power_error(&mut r, d),
        });
    }
    (worst, start.elapsed())
}

// ============================================================================
// Association oracle
// ============================================================================

/// Exact marginals η_k(m) over all consistent associations: every target takes
/// a measurement or none (0), every measurement at most one target.
pub fn enumerate_association(beta: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m_count = beta.first().map_or(0, |r| r.len() - 1);
    let mut marg = vec![vec![0.0; m_count + 1]; beta.len()];
    let mut assign = vec![0usize; beta.len()];
    let mut used = vec![false; m_count + 1];
    fn rec(
        k: usize,
        beta: &[Vec<f64>],
        assign: &mut [usize],
        used: &mut [bool],
        w: f64,
        marg: &mut [Vec<f64>],
    ) {
        if k == beta.len() {
            for (kk, &a) in assign.iter().enumerate() {
                marg[kk][a] += w;
            }
            return;
        }
        for m in 0..beta[k].len() {
            if beta[k][m] == 0.0 || (m > 0 && used[m]) {
                continue;
            }
            assign[k] = m;
            if m > 0 {
                used[m] = true;
            }
            rec(k + 1, beta, assign, used, w * beta[k][m], marg);
            if m > 0 {
                used[m] = false;
            }
        }
    }
    rec(0, beta, &mut assign, &mut used, 1.0, &mut marg);
    for row in &mut marg {
        let t: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= t);
    }
    marg
}

/// True when the target–measurement graph (edges where β_k(m) > 0, m ≥ 1) has no cycle.
pub fn is_forest(beta: &[Vec<f64>]) -> bool {
    let k_count = beta.len();
    let m_count = beta.first().map_or(0, |r| r.len() - 1);
    let mut parent: Vec<usize> = (0..k_count + m_count).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for k in 0..k_count {
        for m in 1..=m_count {
            if beta[k][m] > 0.0 {
                let (a, b) = (find(&mut parent, k), find(&mut parent, k_count + m - 1));
                if a == b {
                    return false;
                }
                parent[a] = b;
            }
        }
    }
    true
}

/// β rows with a positive missed-detection entry and each detection entry
/// zero with probability `sparsity`.
pub fn random_beta(rng: &mut impl Rng, k: usize, m: usize, sparsity: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| {
            let mut row = vec![rng.random_range(0.05..1.0)];
            row.extend((0..m).map(|_| {
                if rng.random::<f64>() < sparsity {
                    0.0
                } else {
                    rng.random_range(-3.0f64..3.0).exp()
                }
            }));
            row
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AssociationReport {
    pub tree_cases: usize,
    pub loopy_cases: usize,
    /// Largest |η − exact| over tree cases.
    pub worst_tree_error: f64,
    /// Loopy cases that did not settle below 1e-10 within 200 iterations.
    pub loopy_failures: usize,
}

/// `per_shape` random β for every K ≤ 3, M ≤ 3, alternating sparse and dense rows.
pub fn association_suite(per_shape: usize, seed: u64) -> AssociationReport {
    let mut r = rng(seed);
    let mut rep = AssociationReport::default();
    for k in 1..=3 {
        for m in 0..=3 {
            for i in 0..per_shape {
                let beta = random_beta(&mut r, k, m, if i % 2 == 0 { 0.5 } else { 0.0 });
                if is_forest(&beta) {
                    rep.tree_cases += 1;
                    let out = inner_bp(&beta, 200, 1e-14);
                    let exact = enumerate_association(&beta);
                    for (a, b) in out.eta.iter().flatten().zip(exact.iter().flatten()) {
                        rep.worst_tree_error = rep.worst_tree_error.max((a - b).abs());
                    }
                } else {
                    rep.loopy_cases += 1;
                    let out = inner_bp(&beta, 200, 1e-10);
                    if !(out.converged && out.iterations <= 200) {
                        rep.loopy_failures += 1;
                    }
                }
            }
        }
    }
    rep
}

// ============================================================================
// Product oracle
// ============================================================================

/// Prior component times the selected term of each likelihood, by sequential
/// covariance-form updates. Label 0 is the constant slot. Returns (ln w, m, P).
pub fn kalman_product(
    prior: &ScaledGaussian,
    likelihoods: &[LikelihoodMessage],
    labels: &[usize],
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let (mut lw, mut m, mut p) = (prior.log_weight, prior.mean.clone(), prior.cov.clone());
    for (msg, &q) in likelihoods.iter().zip(labels) {
        if q == 0 {
            lw += msg.log_constant;
            continue;
        }
        let LikelihoodComponent {
            log_u,
            residual,
            obs_matrix: h,
            noise,
        } = &msg.terms[q - 1];
        let s = h * &p * h.transpose() + noise;
        let s_inv = s.clone().try_inverse().expect("invertible innovation");
        let nu = residual - h * &m;
        lw += log_u + log_gauss(&nu, &DVector::zeros(nu.len()), &s);
        let k = &p * h.transpose() * &s_inv;
        let i_kh = DMatrix::identity(m.len(), m.len()) - &k * h;
        m += &k * nu;
        p = &i_kh * &p * i_kh.transpose() + &k * noise * k.transpose();
        p = (&p + p.transpose()) * 0.5;
    }
    (lw, m, p)
}

pub fn random_message(
    rng: &mut impl Rng,
    d: usize,
    terms: usize,
    center: &DVector<f64>,
) -> LikelihoodMessage {
    LikelihoodMessage {
        log_constant: rng.random_range(-4.0..-1.0),
        terms: (0..terms)
            .map(|_| {
                let h = DMatrix::identity(d, d)
                    + DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.3..0.3));
                LikelihoodComponent {
                    log_u: rng.random_range(-1.0..0.0),
                    residual: &h * (center + random_vector(rng, d, 2.0)),
                    obs_matrix: h,
                    noise: random_spd(rng, d, 0.5),
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GibbsFidelity {
    pub max_param_error: f64,
    pub median_captured: f64,
    pub elapsed: Duration,
}

/// J = 2 prior components, L = 3 likelihoods with 2 terms each (27 labels), T = 20.
pub fn gibbs_fidelity(instances: usize, seed: u64) -> GibbsFidelity {
    let start = Instant::now();
    let d = 2;
    let mut worst: f64 = 0.0;
    let mut captured = Vec::with_capacity(instances);
    for i in 0..instances {
        let mut r = rng(seed + i as u64);
        let center = random_vector(&mut r, d, 3.0);
        let prior = GaussianMixture::from_components(
            d,
            (0..2)
                .map(|_| {
                    ScaledGaussian::new(
                        r.random_range(-1.0..0.0),
                        &center + random_vector(&mut r, d, 2.0),
                        random_spd(&mut r, d, 1.0),
                    )
                })
                .collect(),
        )
        .unwrap();
        let liks: Vec<LikelihoodMessage> = (0..3)
            .map(|_| random_message(&mut r, d, 2, &center))
            .collect();
        let settings = GibbsSettings {
            sweeps: 20,
            archive_candidates: true,
            top: 20,
            ranking: LabelRanking::Weight,
        };
        let (gm, state) = gibbs_product(&prior, &liks, settings, &mut r).unwrap();

        let mut idx = 0;
        for (labels, _) in state
            .ranked_labels(LabelRanking::Weight)
            .into_iter()
            .take(20)
        {
            for pc in prior.components() {
                let (lw, m, p) = kalman_product(pc, &liks, &labels);
                let c = &gm.components()[idx];
                idx += 1;
                worst = worst
                    .max(rel_from_logs(c.log_weight, lw))
                    .max(rel_vector(&c.mean, &m))
                    .max(rel_matrix(&c.cov, &p));
            }
        }
        assert_eq!(idx, gm.len(), "every component attributed to a label");

        let mut all = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for pc in prior.components() {
                        all.push(kalman_product(pc, &liks, &[a, b, c]).0);
                    }
                }
            }
        }
        let total: f64 = all.iter().map(|v| v.exp()).sum();
        captured.push(gm.total_weight() / total);
    }
    captured.sort_by(f64::total_cmp);
    let median = if captured.len() % 2 == 1 {
        captured[captured.len() / 2]
    } else {
        0.5 * (captured[captured.len() / 2 - 1] + captured[captured.len() / 2])
    };
    GibbsFidelity {
        max_param_error: worst,
        median_captured: median,
        elapsed: start.elapsed(),
    }
}

// ============================================================================
// Hogwild toy problems
// ============================================================================

#[derive(Debug, Clone, Copy)]
pub struct HogwildFidelity {
    pub max_error: f64,
    pub all_bitwise_identical: bool,
    pub complete_archives: usize,
}

fn belief_bits_equal(a: &PtBelief, b: &PtBelief) -> bool {
    a.nonexist_mass.to_bits() == b.nonexist_mass.to_bits()
        && a.exist.len() == b.exist.len()
        && a.exist.iter().zip(b.exist.iter()).all(|(x, y)| {
            x.log_weight.to_bits() == y.log_weight.to_bits()
                && bitwise_equal(x.mean.as_slice(), y.mean.as_slice())
                && bitwise_equal(x.cov.as_slice(), y.cov.as_slice())
        })
}

/// Two agents, one γ term each, single-Gaussian prior, Q = 100. The reference is
/// the centralized product of the prior with both pooled messages over the same
/// label vectors, normalized with the same nonexistence mass.
pub fn hogwild_fidelity(instances: usize, seed: u64) -> HogwildFidelity {
    let d = 2;
    let mut worst: f64 = 0.0;
    let mut bitwise = true;
    let mut complete = 0;
    for i in 0..instances {
        let mut r = rng(seed + i as u64);
        let center = random_vector(&mut r, d, 3.0);
        let exist_mass: f64 = r.random_range(0.3..0.9);
        let prior = PtBelief {
            exist: GaussianMixture::single(ScaledGaussian::new(
                exist_mass.ln(),
                center.clone(),
                random_spd(&mut r, d, 1.0),
            )),
            nonexist_mass: 1.0 - exist_mass,
        };
        let gammas: Vec<LikelihoodMessage> = (0..2)
            .map(|_| random_message(&mut r, d, 1, &center))
            .collect();
        let eta0 = [r.random_range(0.2..1.0), r.random_range(0.2..1.0)];
        let mut consensus = Consensus::new(NetworkGraph::path(2), 100);
        let mut rngs: Vec<ChaCha8Rng> = (0..2)
            .map(|s| rng(seed * 1000 + i as u64 * 10 + s))
            .collect();
        let out = hogwild_belief(
            &prior,
            &gammas,
            &eta0,
            HogwildSettings::default(),
            &mut consensus,
            &mut rngs,
        )
        .unwrap();
        bitwise &= out
            .agent_beliefs
            .iter()
            .all(|b| belief_bits_equal(b, &out.agent_beliefs[0]));

        let central = GibbsProductState::new(&prior.exist, &gammas).unwrap();
        let mut comps = Vec::new();
        for entry in out.state.archive() {
            comps.extend(central.materialize(&entry.labels));
        }
        if out.state.archive().len() == 4 {
            complete += 1;
        }
        let log_nonexist = prior.nonexist_mass.ln() + eta0.iter().map(|e| e.ln()).sum::<f64>();
        let reference = normalize_parts(
            GaussianMixture::from_components(d, comps).unwrap(),
            log_nonexist,
        )
        .unwrap();

        let sorted = |b: &PtBelief| {
            let mut c = b.exist.components().to_vec();
            c.sort_by(|a, b| b.log_weight.total_cmp(&a.log_weight));
            c
        };
        let (got, want) = (sorted(&out.belief), sorted(&reference));
        assert_eq!(got.len(), want.len());
        worst = worst.max((out.belief.nonexist_mass - reference.nonexist_mass).abs());
        for (g, w) in got.iter().zip(&want) {
            worst = worst
                .max((g.weight() - w.weight()).abs())
                .max(rel_vector(&g.mean, &w.mean))
                .max(rel_matrix(&g.cov, &w.cov));
        }
    }
    HogwildFidelity {
        max_error: worst,
        all_bitwise_identical: bitwise,
        complete_archives: complete,
    }
}

// ============================================================================
// Filter runs
// ============================================================================

/// Filters `steps` steps of the builtin scenario, returning every report with
/// the graph diameter of its step.
pub fn filter_reports(
    variant: Variant,
    steps: usize,
    seed: u64,
) -> (Scenario, Vec<(usize, StepReport)>) {
    let scenario = reference_scenario();
    let cfg = FilterConfig {
        variant,
        ..Default::default()
    };
    let mut beliefs = Beliefs::initial(&scenario, variant).unwrap();
    let mut out = Vec::new();
    for t in 1..=steps {
        let (graph, visible) = build_graphs(&scenario.truth, t).unwrap();
        let frame = synthesize_frame(
            &scenario,
            t,
            &graph,
            &visible,
            &mut rng(seed * 1000 + t as u64),
        )
        .unwrap();
        let input = StepInput {
            scenario: &scenario,
            graph: &graph,
            frame: &frame,
            step: t,
            seed,
        };
        let (next, report) = step(&beliefs, input, &cfg).unwrap();
        beliefs = next;
        out.push((graph.diameter(), report));
    }
    (scenario, out)
}

/// Per-PT counters that differ from `expected(diameter)`: (step, p, k, counter).
pub fn comm_mismatches(
    reports: &[(usize, StepReport)],
    expected: impl Fn(usize) -> u64,
) -> Vec<(usize, usize, usize, CommCounter)> {
    let mut bad = Vec::new();
    for (t, (diam, report)) in reports.iter().enumerate() {
        for (p, row) in report.comm_per_pt.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                if c.reals_per_agent != expected(*diam) {
                    bad.push((t + 1, p, k, *c));
                }
            }
        }
    }
    bad
}

// ============================================================================
// OSPA
// ============================================================================

pub fn random_set(rng: &mut impl Rng, max: usize) -> Vec<[f64; 2]> {
    let n = rng.random_range(0..=max);
    (0..n)
        .map(|_| [rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0)])
        .collect()
}

/// Violations among `checks` random symmetry, bound, triangle and p = 1
/// decomposition checks, plus the three fixed examples.
pub fn ospa_suite(checks: usize, seed: u64) -> Vec<String> {
    let mut failures = Vec::new();
    let p1 = OspaParams {
        cutoff: 20.0,
        order: 1.0,
    };
    let a = [[1.0, 2.0], [5.0, -3.0]];
    if ospa(&a, &a, p1) != 0.0 {
        failures.push("X = Y must give 0".to_string());
    }
    if (ospa(&[], &[[4.0, 4.0]], p1) - 20.0).abs() > 1e-12 {
        failures.push("empty vs singleton must give the cutoff".to_string());
    }
    if (ospa(&[[0.0, 0.0]], &[[3.0, 4.0]], p1) - 5.0).abs() > 1e-12 {
        failures.push("single pair at distance 5".to_string());
    }
    let mut r = rng(seed);
    for i in 0..checks {
        let params = OspaParams {
            cutoff: r.random_range(1.0..40.0),
            order: if i % 2 == 0 {
                1.0
            } else {
                r.random_range(1.0..3.0)
            },
        };
        let (x, y, z) = (
            random_set(&mut r, 6),
            random_set(&mut r, 6),
            random_set(&mut r, 6),
        );
        let (dxy, dyx) = (ospa(&x, &y, params), ospa(&y, &x, params));
        if (dxy - dyx).abs() > 1e-9 {
            failures.push(format!("check {i}: asymmetric {dxy} vs {dyx}"));
        }
        if !(0.0..=params.cutoff + 1e-12).contains(&dxy) {
            failures.push(format!("check {i}: {dxy} outside [0, c]"));
        }
        let (dxz, dzy) = (ospa(&x, &z, params), ospa(&z, &y, params));
        if dxy > dxz + dzy + 1e-9 {
            failures.push(format!("check {i}: triangle {dxy} > {dxz} + {dzy}"));
        }
        if params.order == 1.0 {
            let b = ospa_breakdown(&x, &y, params);
            if (b.localization + b.cardinality - b.total).abs() > 1e-9 {
                failures.push(format!("check {i}: breakdown does not add up"));
            }
        }
    }
    failures
}
