//! Seeded random d-regular relay graphs.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

const PAIRING_RESTARTS: usize = 1_000;
const CONNECT_RETRIES: usize = 64;
const RANDOM_PICKS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("no {degree}-regular graph on {nodes} nodes: {reason}")]
    Infeasible {
        nodes: usize,
        degree: usize,
        reason: &'static str,
    },
    #[error("graph still disconnected after {0} attempts")]
    Disconnected(usize),
    #[error("random pairing did not complete after {0} restarts")]
    PairingFailed(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Topology {
    pub nodes: usize,
    pub degree: usize,
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Build from explicit adjacency lists. Used by tests and fixed layouts.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let degree = adjacency.first().map_or(0, Vec::len);
        Self {
            nodes: adjacency.len(),
            degree,
            adjacency,
        }
    }

    pub fn peers(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn is_regular(&self) -> bool {
        self.adjacency.iter().all(|p| p.len() == self.degree)
    }

    pub fn is_undirected(&self) -> bool {
        self.adjacency
            .iter()
            .enumerate()
            .all(|(u, ps)| ps.iter().all(|&v| self.adjacency[v].contains(&u)))
    }

    /// Hop distances from `src`; `None` for unreachable nodes.
    pub fn distances(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.nodes];
        let mut q = VecDeque::new();
        dist[src] = Some(0);
        q.push_back(src);
        while let Some(u) = q.pop_front() {
            let du = dist[u].expect("queued nodes have a distance");
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.nodes == 0 || self.distances(0).iter().all(Option::is_some)
    }

    /// Longest shortest path; `None` if disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for s in 0..self.nodes {
            for d in self.distances(s) {
                best = best.max(d?);
            }
        }
        Some(best)
    }
}

/// Seeded random `degree`-regular connected graph on `nodes` vertices.
pub fn build_topology(nodes: usize, degree: usize, seed: u64) -> Result<Topology, TopologyError> {
    let infeasible = |reason| TopologyError::Infeasible {
        nodes,
        degree,
        reason,
    };
    if nodes == 0 {
        return Err(infeasible("no nodes"));
    }
    if degree >= nodes {
        return Err(infeasible("degree must be below node count"));
    }
    if !(nodes * degree).is_multiple_of(2) {
        return Err(infeasible("nodes * degree must be even"));
    }
    if nodes > 1 && degree == 0 {
        return Err(infeasible("degree 0 cannot be connected"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..CONNECT_RETRIES {
        let adjacency = random_regular(nodes, degree, &mut rng)?;
        let t = Topology {
            nodes,
            degree,
            adjacency,
        };
        if t.is_connected() {
            return Ok(t);
        }
    }
    Err(TopologyError::Disconnected(CONNECT_RETRIES))
}

/// Incremental random pairing of degree stubs, rejecting loops and multi-edges
/// and restarting when no admissible pair is left.
fn random_regular(
    nodes: usize,
    degree: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>, TopologyError> {
    'restart: for _ in 0..PAIRING_RESTARTS {
        let mut stubs: Vec<usize> = (0..nodes)
            .flat_map(|v| std::iter::repeat_n(v, degree))
            .collect();
        stubs.shuffle(rng);
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nodes];
        while !stubs.is_empty() {
            let ok = |i: usize, j: usize, adj: &[BTreeSet<usize>], stubs: &[usize]| {
                let (u, v) = (stubs[i], stubs[j]);
                u != v && !adj[u].contains(&v)
            };
            let mut chosen = None;
            for _ in 0..RANDOM_PICKS {
                let i = rng.gen_range(0..stubs.len());
                let j = rng.gen_range(0..stubs.len());
                if i != j && ok(i, j, &adj, &stubs) {
                    chosen = Some((i, j));
                    break;
                }
            }
            if chosen.is_none() {
                let mut admissible = Vec::new();
                for i in 0..stubs.len() {
                    for j in (i + 1)..stubs.len() {
                        if ok(i, j, &adj, &stubs) {
                            admissible.push((i, j));
                        }
                    }
                }
                if admissible.is_empty() {
                    continue 'restart;
                }
                chosen = Some(admissible[rng.gen_range(0..admissible.len())]);
            }
            let (i, j) = chosen.expect("set above");
            let (u, v) = (stubs[i], stubs[j]);
            adj[u].insert(v);
            adj[v].insert(u);
            let (hi, lo) = if i > j { (i, j) } else { (j, i) };
            stubs.swap_remove(hi);
            stubs.swap_remove(lo);
        }
        return Ok(adj.into_iter().map(|s| s.into_iter().collect()).collect());
    }
    Err(TopologyError::PairingFailed(PAIRING_RESTARTS))
}
