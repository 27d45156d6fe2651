//! Agent state, scenario parameters and the synchronous opinion update.
//!
//! Agents come in three usage classes: `Nin` listens to graph neighbors
//! only, `Ninl` listens to neighbors and to the LLM when the LLM opinion is
//! within its confidence threshold, and `Nil` simply adopts the LLM opinion.
//! Neighbor opinions are weighted by authority (degree over `n - 1`) and every
//! update is anchored to the agent's current opinion by its stubbornness.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clustering;
use crate::error::{Error, Result};
use crate::network::{self, Graph, GraphConfig};
use crate::rng::{self, Stream};

/// Authority of the LLM opinion source.
pub const LLM_AUTHORITY: f64 = 1.0;

/// Allowed deviation of the proportion sum from one.
pub const PROPORTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "NIN")]
    Nin,
    #[serde(rename = "NINL")]
    Ninl,
    #[serde(rename = "NIL")]
    Nil,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Nin, Category::Ninl, Category::Nil];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Nin => "NIN",
            Category::Ninl => "NINL",
            Category::Nil => "NIL",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NIN" => Ok(Category::Nin),
            "NINL" => Ok(Category::Ninl),
            "NIL" => Ok(Category::Nil),
            other => Err(Error::Schema(format!("unknown category `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub category: Category,
    pub opinion: f64,
    pub stubbornness: f64,
    pub threshold: f64,
    pub authority: f64,
}

/// Exogenous shocks applied after every synchronous step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EventConfig {
    pub enabled: bool,
    /// Chance that an event happens in a given iteration.
    pub probability: f64,
    /// Fraction of the population hit by an event.
    pub fraction: f64,
    /// Perturbations are uniform on `[-amplitude, amplitude]`.
    pub amplitude: f64,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            probability: 0.05,
            fraction: 0.05,
            amplitude: 0.1,
        }
    }
}

impl EventConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, value) in [("events.probability", self.probability), ("events.fraction", self.fraction)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::config(key, format!("{value} is outside [0, 1]")));
            }
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::config(
                "events.amplitude",
                format!("{} must be a finite value >= 0", self.amplitude),
            ));
        }
        Ok(())
    }

    fn is_noop(&self) -> bool {
        !self.enabled || self.probability == 0.0 || self.fraction == 0.0 || self.amplitude == 0.0
    }
}

/// Starting opinion of fully LLM-reliant agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NilStart {
    /// Already holding the LLM opinion at `t = 0`, so NIL agents never move.
    #[default]
    Llm,
    /// Drawn uniformly from `[-1, 1]` like every other agent.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    /// Group size.
    pub n: usize,
    /// Number of opinion exchanges.
    pub t: usize,
    /// Shared confidence threshold.
    pub epsilon: f64,
    pub pro_nin: f64,
    pub pro_ninl: f64,
    pub pro_nil: f64,
    pub x_llm: f64,
    /// Plain bounded-confidence averaging, no LLM, stubbornness or authority.
    pub classic_hk: bool,
    pub nil_start: NilStart,
    /// Negate every initial opinion after drawing it.
    pub negate_initial: bool,
    pub graph: GraphConfig,
    pub events: EventConfig,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self::benchmark()
    }
}

impl ScenarioParams {
    /// `(100, 100, 0.4, 0.6, 0.2, 0.2, -1)`
    pub fn benchmark() -> Self {
        Self {
            n: 100,
            t: 100,
            epsilon: 0.4,
            pro_nin: 0.6,
            pro_ninl: 0.2,
            pro_nil: 0.2,
            x_llm: -1.0,
            classic_hk: false,
            nil_start: NilStart::default(),
            negate_initial: false,
            graph: GraphConfig::default(),
            events: EventConfig::default(),
        }
    }

    pub fn with_mix(mut self, pro_nin: f64, pro_ninl: f64, pro_nil: f64) -> Self {
        self.pro_nin = pro_nin;
        self.pro_ninl = pro_ninl;
        self.pro_nil = pro_nil;
        self
    }

    pub fn proportions(&self) -> [f64; 3] {
        [self.pro_nin, self.pro_ninl, self.pro_nil]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n", format!("group size must be at least 2, got {}", self.n)));
        }
        if self.t < 1 {
            return Err(Error::config("t", "at least one iteration is required"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config("epsilon", format!("{} is outside [0, 1]", self.epsilon)));
        }
        if !(-1.0..=1.0).contains(&self.x_llm) {
            return Err(Error::config("x_llm", format!("{} is outside [-1, 1]", self.x_llm)));
        }
        for (key, value) in [("pro_nin", self.pro_nin), ("pro_ninl", self.pro_ninl), ("pro_nil", self.pro_nil)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::config(key, format!("{value} is outside [0, 1]")));
            }
        }
        let sum: f64 = self.proportions().iter().sum();
        if (sum - 1.0).abs() > PROPORTION_TOLERANCE {
            return Err(Error::config(
                "pro_nin + pro_ninl + pro_nil",
                format!("proportions must sum to 1, got {sum}"),
            ));
        }
        self.graph.validate()?;
        self.events.validate()
    }

    /// Category sizes by largest-remainder rounding of `proportion * n`.
    pub fn category_counts(&self) -> [usize; 3] {
        largest_remainder(self.proportions(), self.n)
    }
}

fn largest_remainder(proportions: [f64; 3], n: usize) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut remainders = [0f64; 3];
    for k in 0..3 {
        let mut quota = proportions[k] * n as f64;
        if (quota - quota.round()).abs() < 1e-9 {
            quota = quota.round();
        }
        counts[k] = quota.floor() as usize;
        remainders[k] = quota - quota.floor();
    }
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    // stable: equal remainders go to the earlier category
    order.sort_by(|&a, &b| remainders[b].total_cmp(&remainders[a]));
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Draws the initial population on `graph`.
pub fn init_population(params: &ScenarioParams, graph: &Graph, seed: u64) -> Result<Vec<AgentState>> {
    params.validate()?;
    if graph.n() != params.n {
        return Err(Error::config(
            "n",
            format!("graph has {} nodes but the scenario has {}", graph.n(), params.n),
        ));
    }

    let [nin, ninl, nil] = params.category_counts();
    let mut categories: Vec<Category> = std::iter::repeat_n(Category::Nin, nin)
        .chain(std::iter::repeat_n(Category::Ninl, ninl))
        .chain(std::iter::repeat_n(Category::Nil, nil))
        .collect();
    categories.shuffle(&mut rng::stream(seed, Stream::Categories));

    let mut opinion_rng = rng::stream(seed, Stream::Opinions);
    let mut stubborn_rng = rng::stream(seed, Stream::Stubbornness);
    let agents = categories
        .into_iter()
        .enumerate()
        .map(|(i, category)| {
            let mut opinion: f64 = opinion_rng.random_range(-1.0..=1.0);
            let stubbornness: f64 = stubborn_rng.random_range(0.0..=1.0);
            if params.negate_initial {
                opinion = -opinion;
            }
            if category == Category::Nil && params.nil_start == NilStart::Llm {
                opinion = params.x_llm;
            }
            AgentState {
                category,
                opinion,
                stubbornness,
                threshold: params.epsilon,
                authority: graph.authority(i),
            }
        })
        .collect();
    Ok(agents)
}

/// Neighbors of `j` whose opinion lies within `j`'s threshold.
pub fn confidence_set(j: usize, agents: &[AgentState], graph: &Graph) -> Vec<usize> {
    let (xj, eps) = (agents[j].opinion, agents[j].threshold);
    graph
        .neighbors(j)
        .iter()
        .copied()
        .filter(|&i| (agents[i].opinion - xj).abs() <= eps)
        .collect()
}

/// Sums over in-range neighbors, kept as offsets from the focal opinion so
/// that a consensus state maps exactly onto itself.
#[derive(Default)]
struct InRange {
    count: usize,
    offset_sum: f64,
    weighted_offset_sum: f64,
    weight: f64,
}

fn scan_neighbors(j: usize, agents: &[AgentState], graph: &Graph) -> InRange {
    let (xj, eps) = (agents[j].opinion, agents[j].threshold);
    let mut acc = InRange::default();
    for &i in graph.neighbors(j) {
        let offset = agents[i].opinion - xj;
        if offset.abs() <= eps {
            acc.count += 1;
            acc.offset_sum += offset;
            acc.weighted_offset_sum += agents[i].authority * offset;
            acc.weight += agents[i].authority;
        }
    }
    acc
}

/// Opinion of agent `j` at `t + 1` given the full state at `t`.
pub fn update_agent(j: usize, agents: &[AgentState], graph: &Graph, x_llm: f64) -> f64 {
    let agent = &agents[j];
    if agent.category == Category::Nil {
        return x_llm;
    }
    let (xj, sd) = (agent.opinion, agent.stubbornness);
    let acc = scan_neighbors(j, agents, graph);
    let llm_in_range = agent.category == Category::Ninl && (xj - x_llm).abs() <= agent.threshold;

    // weighted mean of the in-confidence sources, as an offset from xj
    let shift = match (acc.count, llm_in_range) {
        (0, false) => return xj,
        (0, true) => x_llm - xj,
        (_, true) => (acc.weighted_offset_sum + LLM_AUTHORITY * (x_llm - xj)) / (acc.weight + LLM_AUTHORITY),
        (count, false) => {
            if acc.weight > 0.0 {
                acc.weighted_offset_sum / acc.weight
            } else {
                acc.offset_sum / count as f64
            }
        }
    };
    // xj * sd + mean * (1 - sd)
    xj + (1.0 - sd) * shift
}

/// Plain bounded-confidence average over the in-range neighbors and `j` itself.
pub fn update_classic_hk(j: usize, agents: &[AgentState], graph: &Graph) -> f64 {
    let acc = scan_neighbors(j, agents, graph);
    agents[j].opinion + acc.offset_sum / (acc.count + 1) as f64
}

/// Perturbs a random subset of non-NIL agents. Draws come from `rng` only
/// when the config can actually change something.
pub fn apply_random_event<R: Rng>(agents: &mut [AgentState], config: &EventConfig, rng: &mut R) {
    if config.is_noop() || agents.is_empty() {
        return;
    }
    if rng.random::<f64>() >= config.probability {
        return;
    }
    let hit = ((config.fraction * agents.len() as f64) + 1e-9).floor() as usize;
    let hit = hit.min(agents.len());
    let mut chosen = rand::seq::index::sample(rng, agents.len(), hit).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        let delta: f64 = rng.random_range(-config.amplitude..=config.amplitude);
        let agent = &mut agents[i];
        if agent.category != Category::Nil {
            agent.opinion = (agent.opinion + delta).clamp(-1.0, 1.0);
        }
    }
}

/// A running scenario that can be stepped and modified between steps.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: ScenarioParams,
    graph: Graph,
    agents: Vec<AgentState>,
    event_rng: rand_chacha::ChaCha8Rng,
    next: Vec<f64>,
    time: usize,
}

impl Simulation {
    pub fn new(params: &ScenarioParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let graph = network::generate_er(params.n, &params.graph, seed)?;
        let agents = init_population(params, &graph, seed)?;
        Ok(Self {
            params: params.clone(),
            graph,
            agents,
            event_rng: rng::stream(seed, Stream::Events),
            next: Vec::new(),
            time: 0,
        })
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn opinions(&self) -> impl Iterator<Item = f64> + '_ {
        self.agents.iter().map(|a| a.opinion)
    }

    /// Replaces graph and population, e.g. after injecting agents.
    pub(crate) fn replace_population(&mut self, graph: Graph, agents: Vec<AgentState>) {
        debug_assert_eq!(graph.n(), agents.len());
        self.graph = graph;
        self.agents = agents;
    }

    /// One synchronous update followed by the random event.
    pub fn step(&mut self) {
        let x_llm = self.params.x_llm;
        self.next.clear();
        if self.params.classic_hk {
            self.next
                .extend((0..self.agents.len()).map(|j| update_classic_hk(j, &self.agents, &self.graph)));
        } else {
            self.next
                .extend((0..self.agents.len()).map(|j| update_agent(j, &self.agents, &self.graph, x_llm)));
        }
        for (agent, &x) in self.agents.iter_mut().zip(&self.next) {
            agent.opinion = x;
        }
        apply_random_event(&mut self.agents, &self.params.events, &mut self.event_rng);
        self.time += 1;
    }
}

/// Per-iteration summary curves of one run (or their average over runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub mean_opinion: Vec<f64>,
    /// Zero at `t = 0`.
    pub mean_abs_change: Vec<f64>,
    /// Sample standard deviation (divisor `n - 1`).
    pub std_dev: Vec<f64>,
    pub n_clusters: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.mean_opinion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_opinion.is_empty()
    }

    /// Pointwise mean of equally long series.
    pub fn average(all: &[Series]) -> Option<Series> {
        let first = all.first()?;
        let len = first.len();
        if all.iter().any(|s| s.len() != len) {
            return None;
        }
        let k = all.len() as f64;
        let avg = |pick: fn(&Series) -> &Vec<f64>| -> Vec<f64> {
            (0..len).map(|t| all.iter().map(|s| pick(s)[t]).sum::<f64>() / k).collect()
        };
        Some(Series {
            mean_opinion: avg(|s| &s.mean_opinion),
            mean_abs_change: avg(|s| &s.mean_abs_change),
            std_dev: avg(|s| &s.std_dev),
            n_clusters: avg(|s| &s.n_clusters),
        })
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn sample_std(values: &[f64]) -> f64 {
    // A rounded mean would leave ~1e-16 residue for identical values.
    if values.iter().all(|&x| x == values[0]) {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Full opinion history of one run. Row `t` holds every agent's opinion at
/// iteration `t`; row 0 is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    opinions: Vec<f64>,
    categories: Vec<Category>,
}

impl Trajectory {
    pub fn from_rows(rows: Vec<Vec<f64>>, categories: Vec<Category>) -> Self {
        let n = categories.len();
        assert!(rows.iter().all(|r| r.len() == n), "ragged trajectory rows");
        assert!(!rows.is_empty(), "trajectory needs at least the initial row");
        Self {
            n,
            opinions: rows.into_iter().flatten().collect(),
            categories,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of completed iterations.
    pub fn iterations(&self) -> usize {
        self.opinions.len() / self.n - 1
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.opinions[t * self.n..(t + 1) * self.n]
    }

    pub fn initial(&self) -> &[f64] {
        self.row(0)
    }

    pub fn last(&self) -> &[f64] {
        self.row(self.iterations())
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.opinions.chunks_exact(self.n)
    }

    /// Indices of agents in `category`, or all agents for `None`.
    pub fn members(&self, category: Option<Category>) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| category.is_none_or(|c| self.categories[i] == c))
            .collect()
    }

    pub fn series(&self) -> Series {
        let mut series = Series {
            mean_opinion: Vec::with_capacity(self.iterations() + 1),
            mean_abs_change: Vec::with_capacity(self.iterations() + 1),
            std_dev: Vec::with_capacity(self.iterations() + 1),
            n_clusters: Vec::with_capacity(self.iterations() + 1),
        };
        let mut previous: Option<&[f64]> = None;
        for row in self.rows() {
            series.mean_opinion.push(mean(row));
            series.mean_abs_change.push(match previous {
                Some(prev) => row.iter().zip(prev).map(|(a, b)| (a - b).abs()).sum::<f64>() / self.n as f64,
                None => 0.0,
            });
            series.std_dev.push(sample_std(row));
            series
                .n_clusters
                .push(clustering::cluster_count(row, clustering::DEFAULT_CUT) as f64);
            previous = Some(row);
        }
        series
    }
}

/// Runs one scenario for `params.t` iterations.
pub fn run_scenario(params: &ScenarioParams, seed: u64) -> Result<Trajectory> {
    let mut sim = Simulation::new(params, seed)?;
    let n = params.n;
    let mut opinions = Vec::with_capacity((params.t + 1) * n);
    opinions.extend(sim.opinions());
    for _ in 0..params.t {
        sim.step();
        opinions.extend(sim.opinions());
    }
    Ok(Trajectory {
        n,
        opinions,
        categories: sim.agents.iter().map(|a| a.category).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quiet(mut p: ScenarioParams) -> ScenarioParams {
        p.events = EventConfig::disabled();
        p
    }

    fn agent(category: Category, opinion: f64, stubbornness: f64, threshold: f64, authority: f64) -> AgentState {
        AgentState {
            category,
            opinion,
            stubbornness,
            threshold,
            authority,
        }
    }

    #[test]
    fn degenerate_mix_is_all_nin() {
        let p = ScenarioParams::benchmark().with_mix(1.0, 0.0, 0.0);
        assert_eq!(p.category_counts(), [100, 0, 0]);
    }

    #[test]
    fn benchmark_counts() {
        assert_eq!(ScenarioParams::benchmark().category_counts(), [60, 20, 20]);
    }

    #[test]
    fn thirds_round_to_n() {
        let third = 1.0 / 3.0;
        let p = ScenarioParams::benchmark().with_mix(third, third, third);
        let c = p.category_counts();
        assert_eq!(c.iter().sum::<usize>(), 100);
        assert!(c.iter().all(|&k| k == 33 || k == 34), "{c:?}");
    }

    #[test]
    fn counts_sum_to_n_on_grid_steps() {
        for a in 0..=10 {
            for b in 0..=(10 - a) {
                let (x, y) = (a as f64 / 10.0, b as f64 / 10.0);
                let z = (10 - a - b) as f64 / 10.0;
                let p = ScenarioParams::benchmark().with_mix(x, y, z);
                assert_eq!(p.category_counts(), [a * 10, b * 10, (10 - a - b) * 10]);
            }
        }
    }

    #[test]
    fn rejects_bad_proportions() {
        let p = ScenarioParams::benchmark().with_mix(0.5, 0.5, 0.5);
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("sum to 1"), "{err}");
    }

    #[test]
    fn population_draws() {
        let p = ScenarioParams::benchmark();
        let g = network::generate_er(100, &p.graph, 4).unwrap();
        let agents = init_population(&p, &g, 4).unwrap();
        let nil = agents.iter().filter(|a| a.category == Category::Nil).count();
        assert_eq!(nil, 20);
        for (i, a) in agents.iter().enumerate() {
            assert!((-1.0..=1.0).contains(&a.opinion));
            assert!((0.0..=1.0).contains(&a.stubbornness));
            assert_eq!(a.threshold, 0.4);
            assert_eq!(a.authority, g.authority(i));
        }
    }

    #[test]
    fn confidence_set_examples() {
        // agent 0 at 0 with neighbors at 0.2 and 0.8
        let g = Graph::from_edges(3, [(0, 1), (0, 2)]);
        let agents = vec![
            agent(Category::Nin, 0.0, 0.0, 0.5, 1.0),
            agent(Category::Nin, 0.2, 0.0, 0.5, 0.5),
            agent(Category::Nin, 0.8, 0.0, 0.5, 0.5),
        ];
        assert_eq!(confidence_set(0, &agents, &g), vec![1]);

        let g = Graph::complete(3);
        let mut wide = agents.clone();
        wide[0].threshold = 1.0;
        assert_eq!(confidence_set(0, &wide, &g), vec![1, 2]);

        let mut closed = agents;
        closed[0].threshold = 0.0;
        assert!(confidence_set(0, &closed, &g).is_empty());
    }

    #[test]
    fn nil_adopts_llm() {
        let g = Graph::complete(2);
        let agents = vec![
            agent(Category::Nil, 0.5, 0.3, 0.4, 1.0),
            agent(Category::Nin, 0.4, 0.3, 0.4, 1.0),
        ];
        assert_eq!(update_agent(0, &agents, &g, -1.0), -1.0);
    }

    #[test]
    fn full_stubbornness_keeps_opinion() {
        let g = Graph::complete(3);
        let agents = vec![
            agent(Category::Nin, 0.1, 1.0, 1.0, 1.0),
            agent(Category::Nin, 0.3, 0.0, 1.0, 1.0),
            agent(Category::Nin, -0.4, 0.0, 1.0, 1.0),
        ];
        assert_eq!(update_agent(0, &agents, &g, 0.0), 0.1);
    }

    #[test]
    fn nin_weighted_mean() {
        // neighbors 0.2 (au 0.5) and -0.4 (au 1.0): (0.1 - 0.4) / 1.5 = -0.2
        let g = Graph::from_edges(3, [(0, 1), (0, 2)]);
        let agents = vec![
            agent(Category::Nin, 0.0, 0.5, 1.0, 1.0),
            agent(Category::Nin, 0.2, 0.0, 1.0, 0.5),
            agent(Category::Nin, -0.4, 0.0, 1.0, 1.0),
        ];
        let x = update_agent(0, &agents, &g, 0.9);
        assert!((x - (-0.1)).abs() < 1e-15, "{x}");
    }

    #[test]
    fn ninl_with_llm_in_range() {
        let g = Graph::from_edges(2, [(0, 1)]);
        let agents = vec![
            agent(Category::Ninl, 0.0, 0.0, 0.5, 1.0),
            agent(Category::Nin, 0.2, 0.0, 0.5, 0.5),
        ];
        let x = update_agent(0, &agents, &g, 0.4);
        let expected = (0.5 * 0.2 + 1.0 * 0.4) / (0.5 + 1.0);
        assert!((x - expected).abs() < 1e-15, "{x}");
        assert!((x - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ninl_llm_out_of_range_uses_neighbors() {
        let g = Graph::from_edges(2, [(0, 1)]);
        let agents = vec![
            agent(Category::Ninl, 0.0, 0.0, 0.5, 1.0),
            agent(Category::Nin, 0.2, 0.0, 0.5, 0.5),
        ];
        assert!((update_agent(0, &agents, &g, -0.9) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ninl_gap_case_follows_llm_alone() {
        let g = Graph::from_edges(2, [(0, 1)]);
        let agents = vec![
            agent(Category::Ninl, 0.0, 0.25, 0.3, 1.0),
            agent(Category::Nin, 0.9, 0.0, 0.3, 1.0),
        ];
        let x = update_agent(0, &agents, &g, 0.2);
        assert!((x - 0.75 * 0.2).abs() < 1e-15);
        // neither neighbors nor LLM reachable
        assert_eq!(update_agent(0, &agents, &g, -0.8), 0.0);
    }

    #[test]
    fn zero_authority_falls_back_to_plain_mean() {
        let g = Graph::from_edges(3, [(0, 1), (0, 2)]);
        let agents = vec![
            agent(Category::Nin, 0.0, 0.0, 1.0, 1.0),
            agent(Category::Nin, 0.2, 0.0, 1.0, 0.0),
            agent(Category::Nin, 0.6, 0.0, 1.0, 0.0),
        ];
        assert!((update_agent(0, &agents, &g, 0.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn isolated_nin_is_unchanged() {
        let g = Graph::empty(2);
        let agents = vec![agent(Category::Nin, 0.3, 0.0, 1.0, 0.0); 2];
        assert_eq!(update_agent(0, &agents, &g, 1.0), 0.3);
    }

    #[test]
    fn classic_hk_examples() {
        let g = Graph::complete(3);
        let agents = vec![
            agent(Category::Nin, 0.0, 0.7, 0.4, 1.0),
            agent(Category::Nin, 0.2, 0.7, 0.4, 1.0),
            agent(Category::Nin, -0.2, 0.7, 0.4, 1.0),
        ];
        assert!(update_classic_hk(0, &agents, &g).abs() < 1e-15);

        let lone = Graph::empty(3);
        assert_eq!(update_classic_hk(1, &agents, &lone), 0.2);

        let same = vec![agent(Category::Nin, 0.37, 0.0, 0.1, 1.0); 3];
        for j in 0..3 {
            assert_eq!(update_classic_hk(j, &same, &g), 0.37);
        }
    }

    #[test]
    fn events_noop_and_clamp() {
        let base = vec![agent(Category::Nin, 0.95, 0.0, 0.4, 1.0); 10];
        let mut rng = rng::stream(1, Stream::Events);

        let mut a = base.clone();
        apply_random_event(&mut a, &EventConfig::disabled(), &mut rng);
        assert_eq!(a, base);

        let mut b = base.clone();
        let zero = EventConfig {
            amplitude: 0.0,
            ..EventConfig::default()
        };
        apply_random_event(&mut b, &zero, &mut rng);
        assert_eq!(b, base);

        // always fire, hit everyone, large kicks: everything stays in range
        let wild = EventConfig {
            enabled: true,
            probability: 1.0,
            fraction: 1.0,
            amplitude: 5.0,
        };
        let mut c = base.clone();
        apply_random_event(&mut c, &wild, &mut rng);
        assert!(c.iter().all(|x| (-1.0..=1.0).contains(&x.opinion)));
        assert!(c.iter().any(|x| x.opinion != 0.95));
        assert_eq!((0.95f64 + 0.2).clamp(-1.0, 1.0), 1.0);
    }

    #[test]
    fn events_skip_nil() {
        let mut agents = vec![agent(Category::Nil, -1.0, 0.0, 0.4, 1.0); 10];
        let wild = EventConfig {
            enabled: true,
            probability: 1.0,
            fraction: 1.0,
            amplitude: 1.0,
        };
        apply_random_event(&mut agents, &wild, &mut rng::stream(2, Stream::Events));
        assert!(agents.iter().all(|a| a.opinion == -1.0));
    }

    #[test]
    fn all_nil_pins_to_llm() {
        let p = ScenarioParams::benchmark().with_mix(0.0, 0.0, 1.0);
        let traj = run_scenario(&p, 11).unwrap();
        for t in 1..=p.t {
            assert!(traj.row(t).iter().all(|&x| x == p.x_llm));
        }
        let s = traj.series();
        assert!(s.std_dev[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn runs_are_reproducible() {
        let p = ScenarioParams::benchmark();
        assert_eq!(run_scenario(&p, 5).unwrap(), run_scenario(&p, 5).unwrap());
        assert_ne!(run_scenario(&p, 5).unwrap(), run_scenario(&p, 6).unwrap());
    }

    #[test]
    fn events_do_not_shift_initial_state() {
        let on = ScenarioParams::benchmark();
        let off = quiet(on.clone());
        let a = run_scenario(&on, 9).unwrap();
        let b = run_scenario(&off, 9).unwrap();
        assert_eq!(a.initial(), b.initial());
        assert_eq!(a.categories(), b.categories());
    }

    #[test]
    fn nil_start_variants() {
        let mut p = quiet(ScenarioParams::benchmark());
        let traj = run_scenario(&p, 3).unwrap();
        for i in traj.members(Some(Category::Nil)) {
            assert!(traj.rows().all(|r| r[i] == -1.0));
        }
        p.nil_start = NilStart::Uniform;
        let traj = run_scenario(&p, 3).unwrap();
        let nil = traj.members(Some(Category::Nil));
        assert!(nil.iter().any(|&i| traj.initial()[i] != -1.0));
        assert!(nil.iter().all(|&i| traj.row(1)[i] == -1.0));
    }

    #[test]
    fn series_first_row() {
        let traj = Trajectory::from_rows(vec![vec![0.0, 1.0], vec![0.5, 0.5]], vec![Category::Nin; 2]);
        let s = traj.series();
        assert_eq!(s.mean_opinion, vec![0.5, 0.5]);
        assert_eq!(s.mean_abs_change, vec![0.0, 0.5]);
        assert_eq!(s.n_clusters, vec![2.0, 1.0]);
        assert_eq!(s.std_dev[1], 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trajectory_invariants(
            seed in any::<u64>(),
            eps in 0.0f64..=1.0,
            x_llm in -1.0f64..=1.0,
            a in 0usize..=10,
            b in 0usize..=10,
            events in any::<bool>(),
        ) {
            let b = b.min(10 - a);
            let mut p = ScenarioParams::benchmark()
                .with_mix(a as f64 / 10.0, b as f64 / 10.0, (10 - a - b) as f64 / 10.0);
            p.n = 40;
            p.t = 30;
            p.epsilon = eps;
            p.x_llm = x_llm;
            p.graph.edge_prob = 0.25;
            if events {
                p.events = EventConfig { enabled: true, probability: 0.5, fraction: 0.3, amplitude: 0.5 };
            } else {
                p.events = EventConfig::disabled();
            }
            let sim0 = Simulation::new(&p, seed).unwrap();
            let stubborn: Vec<usize> = (0..p.n).filter(|&i| sim0.agents()[i].stubbornness == 1.0).collect();
            let traj = run_scenario(&p, seed).unwrap();
            for row in traj.rows() {
                prop_assert!(row.iter().all(|x| (-1.0..=1.0).contains(x)));
            }
            for i in traj.members(Some(Category::Nil)) {
                for t in 1..=p.t {
                    prop_assert_eq!(traj.row(t)[i], x_llm);
                }
            }
            if !events {
                for i in stubborn {
                    prop_assert!(traj.rows().all(|r| r[i] == traj.initial()[i]));
                }
            }
        }

        #[test]
        fn consensus_at_llm_is_stationary(seed in any::<u64>(), x_llm in -1.0f64..=1.0, eps in 0.0f64..=1.0) {
            let p = quiet(ScenarioParams { x_llm, epsilon: eps, n: 30, ..ScenarioParams::benchmark() });
            let mut sim = Simulation::new(&p, seed).unwrap();
            let mut agents = sim.agents().to_vec();
            for a in &mut agents {
                a.opinion = x_llm;
            }
            let graph = sim.graph().clone();
            sim.replace_population(graph, agents);
            for _ in 0..5 {
                sim.step();
                prop_assert!(sim.opinions().all(|x| x == x_llm));
            }
        }
    }
}
