//! Ground truth, network topology and measurement synthesis.
//!
//! Trajectories are straight constant-velocity tracks described by a
//! [`ScenarioSpec`], which doubles as the on-disk scenario format.
//! [`ScenarioSpec::reference`] is the builtin two-anchor, six-agent,
//! ten-target layout on a 1500 m square.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gm::{spd_cholesky, GaussianMixture, ScaledGaussian};
use crate::metrics::OspaParams;
use crate::models::{
    constant_velocity, range_bearing, wrap_angle, AgentDynamics, RangeBearingModel, Roi,
    TargetDynamics,
};

// ============================================================================
// Ground truth
// ============================================================================

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrack {
    /// States (px, py, vx, vy) for t = 0..=steps.
    pub states: Vec<DVector<f64>>,
    pub anchor: bool,
    pub meas_range: f64,
    pub comm_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetTrack {
    pub birth: usize,
    /// First step at which the target no longer exists.
    pub death: Option<usize>,
    /// States from `birth` up to (excluding) `death` or the last step.
    pub states: Vec<DVector<f64>>,
}

impl TargetTrack {
    pub fn alive(&self, t: usize) -> bool {
        t >= self.birth && self.death.is_none_or(|d| t < d)
    }

    pub fn state_at(&self, t: usize) -> Option<&DVector<f64>> {
        if self.alive(t) {
            self.states.get(t - self.birth)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub dt: f64,
    pub steps: usize,
    pub agents: Vec<AgentTrack>,
    pub targets: Vec<TargetTrack>,
}

impl GroundTruth {
    pub fn agent_state(&self, agent: usize, t: usize) -> &DVector<f64> {
        &self.agents[agent].states[t]
    }

    pub fn alive_targets(&self, t: usize) -> Vec<usize> {
        (0..self.targets.len())
            .filter(|&k| self.targets[k].alive(t))
            .collect()
    }

    pub fn cardinality(&self, t: usize) -> usize {
        self.targets.iter().filter(|tr| tr.alive(t)).count()
    }

    /// Target positions alive at `t`.
    pub fn target_positions(&self, t: usize) -> Vec<[f64; 2]> {
        self.targets
            .iter()
            .filter_map(|tr| tr.state_at(t))
            .map(|s| [s[0], s[1]])
            .collect()
    }

    /// Steps at which the cardinality changes.
    pub fn cardinality_change_steps(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (1..=self.steps)
            .filter(|&t| self.cardinality(t) != self.cardinality(t - 1))
            .collect();
        out.dedup();
        out
    }

    /// CSV with columns t, id, px, py, vx, vy; ids are `a<i>` for agents and `t<k>` for targets.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "id", "px", "py", "vx", "vy"])?;
        for t in 0..=self.steps {
            let agents = self
                .agents
                .iter()
                .enumerate()
                .map(|(i, a)| (format!("a{i}"), &a.states[t]));
            let targets = self
                .targets
                .iter()
                .enumerate()
                .filter_map(|(k, tr)| tr.state_at(t).map(|s| (format!("t{k}"), s)));
            for (id, s) in agents.chain(targets) {
                w.write_record([
                    t.to_string(),
                    id,
                    s[0].to_string(),
                    s[1].to_string(),
                    s[2].to_string(),
                    s[3].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

// ============================================================================
// Network graph
// ============================================================================

/// Undirected, connected communication graph over agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    neighbors: Vec<Vec<usize>>,
    diameter: usize,
}

impl NetworkGraph {
    /// Builds a graph from adjacency lists; lists are sorted, and the graph must
    /// be symmetric and connected.
    pub fn new(mut neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                if j >= n || j == i || neighbors[j].binary_search(&i).is_err() {
                    return Err(Error::Config(format!(
                        "adjacency of agent {i} is not symmetric"
                    )));
                }
            }
        }
        let mut diameter = 0;
        for s in 0..n {
            let dist = bfs(&neighbors, s);
            if dist.iter().any(Option::is_none) {
                return Err(Error::DisconnectedGraph { step: None });
            }
            diameter = diameter.max(dist.into_iter().flatten().max().unwrap_or(0));
        }
        Ok(Self {
            neighbors,
            diameter,
        })
    }

    pub fn path(n: usize) -> Self {
        let neighbors = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        Self::new(neighbors).expect("a path is connected")
    }

    pub fn complete(n: usize) -> Self {
        Self::new(
            (0..n)
                .map(|i| (0..n).filter(|&j| j != i).collect())
                .collect(),
        )
        .expect("complete graph is connected")
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    pub fn degree(&self, agent: usize) -> usize {
        self.neighbors[agent].len()
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }
}

fn bfs(neighbors: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; neighbors.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &w in &neighbors[u] {
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Communication graph at step `t` (edge iff the distance is within both agents'
/// communication ranges) and the targets each agent can physically observe.
pub fn build_graphs(truth: &GroundTruth, t: usize) -> Result<(NetworkGraph, Vec<Vec<usize>>)> {
    let n = truth.agents.len();
    let pos: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let s = truth.agent_state(i, t);
            [s[0], s[1]]
        })
        .collect();
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let neighbors = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    j != i
                        && dist(pos[i], pos[j])
                            <= truth.agents[i].comm_range.min(truth.agents[j].comm_range)
                })
                .collect()
        })
        .collect();
    let graph = NetworkGraph::new(neighbors).map_err(|e| match e {
        Error::DisconnectedGraph { .. } => Error::DisconnectedGraph { step: Some(t) },
        other => other,
    })?;
    let visible = (0..n)
        .map(|i| {
            truth
                .targets
                .iter()
                .enumerate()
                .filter_map(|(k, tr)| tr.state_at(t).map(|s| (k, s)))
                .filter(|(_, s)| dist(pos[i], [s[0], s[1]]) <= truth.agents[i].meas_range)
                .map(|(k, _)| k)
                .collect()
        })
        .collect();
    Ok((graph, visible))
}

// ============================================================================
// Measurements
// ============================================================================

/// One frame of measurements for every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMeasurements {
    /// Unlabeled (range, bearing) target measurements per agent, randomly ordered.
    pub target: Vec<Vec<DVector<f64>>>,
    /// (neighbor, measurement) pairs per agent, sorted by neighbor.
    pub inter_agent: Vec<Vec<(usize, DVector<f64>)>>,
}

impl FrameMeasurements {
    pub fn counts(&self) -> Vec<usize> {
        self.target.iter().map(Vec::len).collect()
    }

    pub fn inter_agent_from(&self, agent: usize, neighbor: usize) -> Option<&DVector<f64>> {
        self.inter_agent[agent]
            .iter()
            .find(|(j, _)| *j == neighbor)
            .map(|(_, w)| w)
    }
}

fn noisy_range_bearing<R: Rng + ?Sized>(
    observer: &[f64],
    source: &[f64],
    noise_factor: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (r, theta) = range_bearing(observer, source)?;
    let n = noise_factor * DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(DVector::from_vec(vec![r + n[0], wrap_angle(theta + n[1])]))
}

/// Synthesizes detections, clutter and inter-agent measurements at step `t`.
pub fn synthesize_frame<R: Rng + ?Sized>(
    scenario: &Scenario,
    t: usize,
    graph: &NetworkGraph,
    visible: &[Vec<usize>],
    rng: &mut R,
) -> Result<FrameMeasurements> {
    let truth = &scenario.truth;
    let n = truth.agents.len();
    let inter_factor = spd_cholesky(&scenario.inter_agent_noise, "inter-agent noise")?.l();
    let mut target = Vec::with_capacity(n);
    let mut inter_agent = Vec::with_capacity(n);
    for s in 0..n {
        let sensor = &scenario.target_sensors[s];
        let factor = spd_cholesky(&sensor.noise, "measurement noise")?.l();
        let y = truth.agent_state(s, t);
        let mut zs = Vec::new();
        for &k in &visible[s] {
            let Some(x) = truth.targets[k].state_at(t) else {
                continue;
            };
            if rng.random::<f64>() < sensor.p_detect {
                zs.push(noisy_range_bearing(
                    y.as_slice(),
                    x.as_slice(),
                    &factor,
                    rng,
                )?);
            }
        }
        if sensor.clutter_rate > 0.0 {
            let count = Poisson::new(sensor.clutter_rate)
                .map_err(|e| Error::Config(format!("clutter rate: {e}")))?
                .sample(rng) as usize;
            let roi = sensor.roi;
            for _ in 0..count {
                let px = roi.x_min + rng.random::<f64>() * (roi.x_max - roi.x_min);
                let py = roi.y_min + rng.random::<f64>() * (roi.y_max - roi.y_min);
                if let Ok((r, b)) = range_bearing(y.as_slice(), &[px, py]) {
                    zs.push(DVector::from_vec(vec![r, b]));
                }
            }
        }
        zs.shuffle(rng);
        target.push(zs);

        let mut ws = Vec::new();
        for &l in graph.neighbors(s) {
            let yl = truth.agent_state(l, t);
            ws.push((
                l,
                noisy_range_bearing(y.as_slice(), yl.as_slice(), &inter_factor, rng)?,
            ));
        }
        inter_agent.push(ws);
    }
    Ok(FrameMeasurements {
        target,
        inter_agent,
    })
}

// ============================================================================
// Scenario specification
// ============================================================================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub position: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default)]
    pub anchor: bool,
    pub meas_range: f64,
    pub comm_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    #[serde(default)]
    pub birth: usize,
    #[serde(default)]
    pub death: Option<usize>,
}

/// Range-bearing sensor parameters; variances in m² and rad².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub range_var: f64,
    pub bearing_var: f64,
    pub p_detect: f64,
    pub clutter_rate: f64,
}

/// Scenario file schema. Every field has the builtin layout as its default, so a
/// file only needs the keys it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub steps: usize,
    pub dt: f64,
    pub roi: Roi,
    pub target_sigma: f64,
    pub agent_sigma: f64,
    /// Process-noise variance applied to anchors, which are held still.
    pub anchor_noise_var: f64,
    pub p_survival: f64,
    pub p_birth: f64,
    pub target_sensor: SensorSpec,
    /// (range, bearing) variances of inter-agent measurements.
    pub inter_agent_noise: [f64; 2],
    /// Offset of the four initial agent components from the true position.
    pub agent_init_offset: f64,
    pub agent_init_cov: [f64; 4],
    pub anchor_init_cov: [f64; 4],
    pub birth_cov: [f64; 4],
    pub ospa_cutoff: f64,
    pub ospa_order: f64,
    pub agents: Vec<AgentSpec>,
    pub targets: Vec<TargetSpec>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self::reference()
    }
}

impl ScenarioSpec {
    /// Builtin layout: 1500 m square, 50 steps, two anchors and six mobile agents on
    /// a ring, up to ten targets with births at steps 5, 10, 20 and deaths at 40.
    pub fn reference() -> Self {
        let agent = |x: f64, y: f64, vx: f64, vy: f64| AgentSpec {
            position: [x, y],
            velocity: [vx, vy],
            anchor: false,
            meas_range: 1000.0,
            comm_range: 1000.0,
        };
        let anchor = |x: f64, y: f64| AgentSpec {
            position: [x, y],
            velocity: [0.0, 0.0],
            anchor: true,
            meas_range: 1500.0,
            comm_range: 1000.0,
        };
        let target =
            |x: f64, y: f64, vx: f64, vy: f64, birth: usize, death: Option<usize>| TargetSpec {
                position: [x, y],
                velocity: [vx, vy],
                birth,
                death,
            };
        Self {
            steps: 50,
            dt: 1.0,
            roi: Roi::square(1500.0),
            target_sigma: 0.5,
            agent_sigma: 0.1,
            anchor_noise_var: 1e-6,
            p_survival: 0.99,
            p_birth: 0.25,
            target_sensor: SensorSpec {
                range_var: 10.0,
                bearing_var: 1e-4,
                p_detect: 0.95,
                clutter_rate: 25.0,
            },
            inter_agent_noise: [10.0, 1e-4],
            agent_init_offset: 50.0,
            agent_init_cov: [1600.0, 1600.0, 40.0, 40.0],
            anchor_init_cov: [1e-2, 1e-2, 1e-4, 1e-4],
            birth_cov: [1600.0, 1600.0, 16.0, 16.0],
            ospa_cutoff: 20.0,
            ospa_order: 1.0,
            agents: vec![
                anchor(30.0, 750.0),
                agent(100.0, 1400.0, 1.0, -0.5),
                agent(750.0, 1470.0, 1.0, 0.0),
                agent(1400.0, 1400.0, -0.5, -1.0),
                anchor(1470.0, 750.0),
                agent(1400.0, 100.0, -1.0, 0.5),
                agent(750.0, 30.0, 1.0, 0.0),
                agent(100.0, 100.0, 0.5, 1.0),
            ],
            targets: vec![
                target(300.0, 300.0, 5.0, 0.0, 0, None),
                target(1200.0, 1200.0, -5.0, 0.0, 0, None),
                target(300.0, 1200.0, 0.0, -5.0, 0, Some(40)),
                target(1200.0, 300.0, 0.0, 5.0, 0, None),
                target(600.0, 500.0, 4.0, 3.0, 5, None),
                target(900.0, 1000.0, -4.0, -3.0, 5, Some(40)),
                target(500.0, 900.0, 3.0, 4.0, 10, None),
                target(1000.0, 500.0, -3.0, -4.0, 10, None),
                target(1350.0, 1000.0, -4.0, 0.0, 20, None),
                target(150.0, 600.0, 4.0, 0.0, 20, None),
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive".into());
        }
        if self.agents.is_empty() {
            return bad("at least one agent is required".into());
        }
        for (name, p) in [
            ("p_survival", self.p_survival),
            ("p_birth", self.p_birth),
            ("target_sensor.p_detect", self.target_sensor.p_detect),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        if !(self.target_sensor.clutter_rate >= 0.0) {
            return bad("target_sensor.clutter_rate must be nonnegative".into());
        }
        for (k, t) in self.targets.iter().enumerate() {
            if t.death.is_some_and(|d| d <= t.birth) {
                return bad(format!("targets[{k}]: death must come after birth"));
            }
        }
        Ok(())
    }

    /// Expands the description into ground truth and models.
    pub fn build(&self) -> Result<Scenario> {
        self.validate()?;
        let diag = |d: [f64; 4]| DMatrix::from_diagonal(&DVector::from_row_slice(&d));
        let cv_state = |p: [f64; 2], v: [f64; 2], dt: f64| {
            DVector::from_vec(vec![p[0] + v[0] * dt, p[1] + v[1] * dt, v[0], v[1]])
        };

        let agents: Vec<AgentTrack> = self
            .agents
            .iter()
            .map(|a| {
                let v = if a.anchor { [0.0, 0.0] } else { a.velocity };
                AgentTrack {
                    states: (0..=self.steps)
                        .map(|t| cv_state(a.position, v, t as f64 * self.dt))
                        .collect(),
                    anchor: a.anchor,
                    meas_range: a.meas_range,
                    comm_range: a.comm_range,
                }
            })
            .collect();
        let targets: Vec<TargetTrack> = self
            .targets
            .iter()
            .map(|tg| {
                let end = tg.death.unwrap_or(self.steps + 1).min(self.steps + 1);
                TargetTrack {
                    birth: tg.birth,
                    death: tg.death,
                    states: (tg.birth..end)
                        .map(|t| {
                            cv_state(tg.position, tg.velocity, (t - tg.birth) as f64 * self.dt)
                        })
                        .collect(),
                }
            })
            .collect();
        let truth = GroundTruth {
            dt: self.dt,
            steps: self.steps,
            agents,
            targets,
        };

        let mobile = AgentDynamics::constant_velocity(self.dt, self.agent_sigma);
        let still = AgentDynamics {
            transition: DMatrix::identity(4, 4),
            process_noise: DMatrix::identity(4, 4) * self.anchor_noise_var,
        };
        let agent_dynamics = self
            .agents
            .iter()
            .map(|a| {
                if a.anchor {
                    still.clone()
                } else {
                    mobile.clone()
                }
            })
            .collect();

        let (b, sigma) = constant_velocity(self.dt, self.target_sigma);
        let target_dynamics = self
            .targets
            .iter()
            .map(|tg| {
                let birth = if self.p_birth > 0.0 {
                    GaussianMixture::single(ScaledGaussian::new(
                        self.p_birth.ln(),
                        cv_state(tg.position, tg.velocity, 0.0),
                        diag(self.birth_cov),
                    ))
                } else {
                    GaussianMixture::empty(4)
                };
                TargetDynamics::new(b.clone(), sigma.clone(), self.p_survival, birth)
            })
            .collect::<Result<Vec<_>>>()?;

        let noise = DMatrix::from_diagonal(&DVector::from_row_slice(&[
            self.target_sensor.range_var,
            self.target_sensor.bearing_var,
        ]));
        let target_sensors = self
            .agents
            .iter()
            .map(|a| RangeBearingModel {
                noise: noise.clone(),
                p_detect: self.target_sensor.p_detect,
                clutter_rate: self.target_sensor.clutter_rate,
                roi: self.roi,
                max_range: a.meas_range,
            })
            .collect();

        let agent_priors = truth
            .agents
            .iter()
            .map(|a| {
                let s0 = &a.states[0];
                if a.anchor {
                    return GaussianMixture::single(ScaledGaussian::normal(
                        s0.clone(),
                        diag(self.anchor_init_cov),
                    ));
                }
                let r = self.agent_init_offset;
                let comps = [[r, 0.0], [-r, 0.0], [0.0, r], [0.0, -r]]
                    .iter()
                    .map(|o| {
                        let mut m = s0.clone();
                        m[0] += o[0];
                        m[1] += o[1];
                        ScaledGaussian::new(0.25f64.ln(), m, diag(self.agent_init_cov))
                    })
                    .collect();
                GaussianMixture::from_components(4, comps).expect("uniform dimension")
            })
            .collect();

        Ok(Scenario {
            truth,
            agent_dynamics,
            target_dynamics,
            target_sensors,
            inter_agent_noise: DMatrix::from_diagonal(&DVector::from_row_slice(
                &self.inter_agent_noise,
            )),
            agent_priors,
            ospa: OspaParams {
                cutoff: self.ospa_cutoff,
                order: self.ospa_order,
            },
        })
    }
}

/// Ground truth plus every model the filter needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub truth: GroundTruth,
    pub agent_dynamics: Vec<AgentDynamics>,
    /// One entry per potential-target slot; slot k births at target k's start.
    pub target_dynamics: Vec<TargetDynamics>,
    /// Target sensor per agent.
    pub target_sensors: Vec<RangeBearingModel>,
    pub inter_agent_noise: DMatrix<f64>,
    pub agent_priors: Vec<GaussianMixture>,
    pub ospa: OspaParams,
}

impl Scenario {
    pub fn n_agents(&self) -> usize {
        self.truth.agents.len()
    }

    pub fn n_slots(&self) -> usize {
        self.target_dynamics.len()
    }

    pub fn mobile_agents(&self) -> Vec<usize> {
        (0..self.n_agents())
            .filter(|&i| !self.truth.agents[i].anchor)
            .collect()
    }
}

/// The builtin scenario.
pub fn reference_scenario() -> Scenario {
    ScenarioSpec::reference()
        .build()
        .expect("builtin scenario is valid")
}
