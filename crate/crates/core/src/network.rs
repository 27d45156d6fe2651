//! Erdős–Rényi interaction graphs and degree-based authority.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Maximum number of G(n, p) samples drawn when connectivity is required.
pub const MAX_CONNECT_ATTEMPTS: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub edge_prob: f64,
    pub enforce_connected: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            edge_prob: 0.1,
            enforce_connected: true,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::config(
                "graph.edge_prob",
                format!("{} is outside [0, 1]", self.edge_prob),
            ));
        }
        Ok(())
    }
}

/// Undirected simple graph stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let adjacency = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect();
        Self { adjacency }
    }

    /// Builds a graph from an edge list. Self-loops and duplicates are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range for n={n}");
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self { adjacency }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Number of neighbors divided by the number of other nodes.
    pub fn authority(&self, i: usize) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        self.degree(i) as f64 / (n - 1) as f64
    }

    pub fn authorities(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.authority(i)).collect()
    }

    pub fn component_count(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        let mut components = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// Appends `extra` nodes. Each new node links to every earlier node (old
    /// or new) independently with probability `edge_prob`.
    pub fn extend_er<R: Rng>(&mut self, extra: usize, edge_prob: f64, rng: &mut R) {
        let old = self.n();
        self.adjacency.resize(old + extra, Vec::new());
        for j in old..old + extra {
            for i in 0..j {
                if rng.random::<f64>() < edge_prob {
                    self.adjacency[i].push(j);
                    self.adjacency[j].push(i);
                }
            }
        }
        for list in &mut self.adjacency {
            list.sort_unstable();
        }
    }

    /// Writes one `i j` pair per line.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }
}

fn sample_gnp<R: Rng>(n: usize, edge_prob: f64, rng: &mut R) -> Graph {
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < edge_prob {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    Graph { adjacency }
}

/// Samples G(n, p). When connectivity is enforced, disconnected samples are
/// discarded and redrawn from a child seed until one is connected.
pub fn generate_er(n: usize, config: &GraphConfig, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::config("n", format!("graph needs at least 2 nodes, got {n}")));
    }
    config.validate()?;

    let mut rng = rng::stream(seed, Stream::Graph);
    let graph = sample_gnp(n, config.edge_prob, &mut rng);
    if !config.enforce_connected || graph.is_connected() {
        return Ok(graph);
    }
    for attempt in 1..MAX_CONNECT_ATTEMPTS {
        let mut rng = rng::stream(rng::child_seed(seed, attempt as u64), Stream::Graph);
        let graph = sample_gnp(n, config.edge_prob, &mut rng);
        if graph.is_connected() {
            return Ok(graph);
        }
    }
    Err(Error::Disconnected {
        n,
        edge_prob: config.edge_prob,
        attempts: MAX_CONNECT_ATTEMPTS,
    })
}
