//! Average, sum and max consensus over a simulated agent network, with
//! per-agent communication counters.
//!
//! Payloads are flat real vectors. Composite payloads are flattened as
//! row-major matrices, then vectors, then scalars (see [`flatten`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scenario::NetworkGraph;

/// W_ij = 1/(1 + max(deg_i, deg_j)) on edges, W_ii = 1 − Σ_{j≠i} W_ij.
pub fn metropolis_weights(graph: &NetworkGraph) -> DMatrix<f64> {
    let n = graph.len();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for &j in graph.neighbors(i) {
            w[(i, j)] = 1.0 / (1.0 + graph.degree(i).max(graph.degree(j)) as f64);
        }
        let off: f64 = graph.neighbors(i).iter().map(|&j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    w
}

/// Concatenates row-major matrices, then vectors, then scalars.
pub fn flatten(matrices: &[&DMatrix<f64>], vectors: &[&DVector<f64>], scalars: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for m in matrices {
        for r in 0..m.nrows() {
            out.extend(m.row(r).iter());
        }
    }
    for v in vectors {
        out.extend(v.iter());
    }
    out.extend_from_slice(scalars);
    out
}

/// Inverse of [`flatten`] for one square d×d matrix, one d-vector and one scalar.
pub fn unflatten_canonical(payload: &[f64], dim: usize) -> (DMatrix<f64>, DVector<f64>, f64) {
    let m = DMatrix::from_row_slice(dim, dim, &payload[..dim * dim]);
    let v = DVector::from_row_slice(&payload[dim * dim..dim * dim + dim]);
    (m, v, payload[dim * dim + dim])
}

/// Reals and label entries transmitted by every agent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct CommCounter {
    pub invocations: u64,
    pub rounds: u64,
    pub reals_per_agent: u64,
    pub label_entries_per_agent: u64,
}

impl CommCounter {
    pub fn add(&mut self, other: &CommCounter) {
        self.invocations += other.invocations;
        self.rounds += other.rounds;
        self.reals_per_agent += other.reals_per_agent;
        self.label_entries_per_agent += other.label_entries_per_agent;
    }
}

fn check_shapes(graph: &NetworkGraph, values: &[Vec<f64>]) -> Result<usize> {
    if values.len() != graph.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.len(),
            found: values.len(),
        });
    }
    let len = values.first().map_or(0, Vec::len);
    for v in values {
        if v.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: v.len(),
            });
        }
    }
    Ok(len)
}

fn lex_max<'a>(a: &'a [f64], b: &'a [f64]) -> &'a [f64] {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return b,
            std::cmp::Ordering::Greater => return a,
            std::cmp::Ordering::Equal => {}
        }
    }
    a
}

/// Consensus engine for one network snapshot.
#[derive(Debug, Clone)]
pub struct Consensus {
    graph: NetworkGraph,
    weights: DMatrix<f64>,
    rounds: usize,
    counter: CommCounter,
}

impl Consensus {
    /// # Arguments
    /// * `graph` - connected communication graph
    /// * `rounds` - number Q of average-consensus iterations
    pub fn new(graph: NetworkGraph, rounds: usize) -> Self {
        let weights = metropolis_weights(&graph);
        Self {
            graph,
            weights,
            rounds,
            counter: CommCounter::default(),
        }
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn n_agents(&self) -> usize {
        self.graph.len()
    }

    pub fn counter(&self) -> &CommCounter {
        &self.counter
    }

    pub fn take_counter(&mut self) -> CommCounter {
        std::mem::take(&mut self.counter)
    }

    fn charge(&mut self, rounds: usize, payload: usize) {
        self.counter.rounds += rounds as u64;
        self.counter.reals_per_agent += (rounds * payload) as u64;
    }

    /// Records label vectors forwarded alongside consensus traffic.
    pub fn charge_labels(&mut self, entries: usize) {
        self.counter.label_entries_per_agent += entries as u64;
    }

    fn average_rounds(&self, values: &[Vec<f64>], rounds: usize) -> Vec<Vec<f64>> {
        let mut cur = values.to_vec();
        let len = values.first().map_or(0, Vec::len);
        for _ in 0..rounds {
            let next: Vec<Vec<f64>> = (0..self.graph.len())
                .map(|i| {
                    let wii = self.weights[(i, i)];
                    let mut out: Vec<f64> = cur[i].iter().map(|v| wii * v).collect();
                    for &j in self.graph.neighbors(i) {
                        let wij = self.weights[(i, j)];
                        for (o, v) in out.iter_mut().zip(&cur[j]) {
                            *o += wij * v;
                        }
                    }
                    debug_assert_eq!(out.len(), len);
                    out
                })
                .collect();
            cur = next;
        }
        cur
    }

    fn max_rounds(&self, values: &[Vec<f64>], rounds: usize) -> Vec<Vec<f64>> {
        let mut cur = values.to_vec();
        for _ in 0..rounds {
            let next: Vec<Vec<f64>> = (0..self.graph.len())
                .map(|i| {
                    let mut best: &[f64] = &cur[i];
                    for &j in self.graph.neighbors(i) {
                        best = lex_max(best, &cur[j]);
                    }
                    best.to_vec()
                })
                .collect();
            cur = next;
        }
        cur
    }

    /// Q rounds of x ← W x, element-wise over the payload.
    pub fn average(&mut self, values: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let len = check_shapes(&self.graph, values)?;
        self.counter.invocations += 1;
        self.charge(self.rounds, len);
        Ok(self.average_rounds(values, self.rounds))
    }

    /// Average consensus scaled by the agent count.
    pub fn sum(&mut self, values: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let s = self.graph.len() as f64;
        let mut out = self.average(values)?;
        out.iter_mut().flatten().for_each(|v| *v *= s);
        Ok(out)
    }

    /// Lexicographic max flooded for `diameter` rounds.
    pub fn max(&mut self, values: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let len = check_shapes(&self.graph, values)?;
        let d = self.graph.diameter();
        self.counter.invocations += 1;
        self.charge(d, len);
        Ok(self.max_rounds(values, d))
    }

    /// Sum consensus finalized by max consensus: one invocation costing
    /// (Q + D_G)·payload reals per agent. Returns every agent's copy.
    pub fn sum_agreed_copies(&mut self, values: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let len = check_shapes(&self.graph, values)?;
        if values.is_empty() {
            return Ok(Vec::new());
        }
        let s = self.graph.len() as f64;
        let mut avg = self.average_rounds(values, self.rounds);
        avg.iter_mut().flatten().for_each(|v| *v *= s);
        let d = self.graph.diameter();
        let agreed = self.max_rounds(&avg, d);
        self.counter.invocations += 1;
        self.charge(self.rounds + d, len);
        Ok(agreed)
    }

    /// [`Consensus::sum_agreed_copies`] checked for bitwise agreement and
    /// returned once.
    pub fn sum_agreed(&mut self, values: &[Vec<f64>]) -> Result<Vec<f64>> {
        let copies = self.sum_agreed_copies(values)?;
        if !copies.windows(2).all(|w| bitwise_equal(&w[0], &w[1])) {
            return Err(Error::Runtime("agents disagree after max consensus".into()));
        }
        Ok(copies.into_iter().next().unwrap_or_default())
    }
}

/// True when both slices hold the same bit patterns.
pub fn bitwise_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Stand-alone average consensus.
pub fn average_consensus(
    graph: &NetworkGraph,
    values: &[Vec<f64>],
    rounds: usize,
) -> Result<Vec<Vec<f64>>> {
    Consensus::new(graph.clone(), rounds).average(values)
}

/// Stand-alone sum consensus.
pub fn sum_consensus(
    graph: &NetworkGraph,
    values: &[Vec<f64>],
    rounds: usize,
) -> Result<Vec<Vec<f64>>> {
    Consensus::new(graph.clone(), rounds).sum(values)
}

/// Stand-alone max consensus over `rounds` flooding rounds.
pub fn max_consensus(
    graph: &NetworkGraph,
    values: &[Vec<f64>],
    rounds: usize,
) -> Result<Vec<Vec<f64>>> {
    check_shapes(graph, values)?;
    Ok(Consensus::new(graph.clone(), 0).max_rounds(values, rounds))
}
