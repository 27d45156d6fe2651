//! Countermeasure experiments: add agents holding an opposite, neutral or
//! random opinion and compare final collective opinions with the
//! uncorrected baseline.
//!
//! Every intervention kind replays the same run seeds, so differences
//! between kinds come from the injected agents alone.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, SignTest, WelchTest};
use crate::error::{Error, Result};
use crate::model::{self, AgentState, Category, ScenarioParams, Simulation};
use crate::network::Graph;
use crate::rng::{self, Stream};
use crate::sweep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionKind {
    None,
    /// Opinion `-x_LLM`.
    Opposite,
    /// Opinion 0.
    Neutral,
    /// Opinion uniform on `[-1, 1]`.
    Random,
}

impl InterventionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InterventionKind::None => "none",
            InterventionKind::Opposite => "opposite",
            InterventionKind::Neutral => "neutral",
            InterventionKind::Random => "random",
        }
    }
}

impl fmt::Display for InterventionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InterventionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(InterventionKind::None),
            "opposite" => Ok(InterventionKind::Opposite),
            "neutral" => Ok(InterventionKind::Neutral),
            "random" => Ok(InterventionKind::Random),
            other => Err(Error::config("kinds", format!("unknown intervention kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub kind: InterventionKind,
    /// Injected agents; `None` means `ceil(0.1 * N)`.
    pub count: Option<usize>,
    pub category: Category,
    /// Iteration before which the agents are added.
    pub time: usize,
    /// Fixed stubbornness of injected agents; `None` draws it uniformly.
    pub stubbornness: Option<f64>,
}

impl InterventionSpec {
    pub fn new(kind: InterventionKind) -> Self {
        Self {
            kind,
            count: None,
            category: Category::Nin,
            time: 0,
            stubbornness: None,
        }
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = Some(count);
        self
    }

    pub fn resolved_count(&self, n: usize) -> usize {
        match self.kind {
            InterventionKind::None => 0,
            _ => self.count.unwrap_or_else(|| (n as f64 * 0.1).ceil() as usize),
        }
    }

    pub fn validate(&self, params: &ScenarioParams) -> Result<()> {
        if self.time > params.t {
            return Err(Error::config(
                "intervention.time",
                format!("{} is after the last iteration {}", self.time, params.t),
            ));
        }
        if let Some(sd) = self.stubbornness {
            if !(0.0..=1.0).contains(&sd) {
                return Err(Error::config("intervention.stubbornness", format!("{sd} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Appends the injected agents to `agents`, wires them into `graph` with fresh
/// G(n, p) edges and recomputes every authority on the enlarged graph.
pub fn inject_agents<R: Rng>(
    agents: &[AgentState],
    graph: &Graph,
    spec: &InterventionSpec,
    params: &ScenarioParams,
    rng: &mut R,
) -> (Vec<AgentState>, Graph) {
    let count = spec.resolved_count(params.n);
    let mut agents = agents.to_vec();
    let mut graph = graph.clone();
    if count == 0 {
        return (agents, graph);
    }
    for _ in 0..count {
        let opinion = match spec.kind {
            InterventionKind::Opposite => -params.x_llm,
            InterventionKind::Neutral => 0.0,
            InterventionKind::Random => rng.random_range(-1.0..=1.0),
            InterventionKind::None => unreachable!("count is zero for no intervention"),
        };
        let stubbornness = spec.stubbornness.unwrap_or_else(|| rng.random_range(0.0..=1.0));
        agents.push(AgentState {
            category: spec.category,
            opinion,
            stubbornness,
            threshold: params.epsilon,
            authority: 0.0,
        });
    }
    graph.extend_er(count, params.graph.edge_prob, rng);
    for (i, agent) in agents.iter_mut().enumerate() {
        agent.authority = graph.authority(i);
    }
    (agents, graph)
}

/// Final state of one intervention run.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionRun {
    pub initial_mean: f64,
    /// Mean opinion of every agent, injected ones included, after the last step.
    pub final_mean: f64,
    pub final_opinions: Vec<f64>,
}

pub fn run_intervention(params: &ScenarioParams, spec: &InterventionSpec, seed: u64) -> Result<InterventionRun> {
    spec.validate(params)?;
    let mut sim = Simulation::new(params, seed)?;
    let initial: Vec<f64> = sim.opinions().collect();
    let mut rng = rng::stream(seed, Stream::Injection);
    for _ in 0..params.t {
        if sim.time() == spec.time {
            let (agents, graph) = inject_agents(sim.agents(), sim.graph(), spec, params, &mut rng);
            sim.replace_population(graph, agents);
        }
        sim.step();
    }
    if spec.time == params.t {
        let (agents, graph) = inject_agents(sim.agents(), sim.graph(), spec, params, &mut rng);
        sim.replace_population(graph, agents);
    }
    let final_opinions: Vec<f64> = sim.opinions().collect();
    Ok(InterventionRun {
        initial_mean: model::mean(&initial),
        final_mean: model::mean(&final_opinions),
        final_opinions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionOutcome {
    pub spec: InterventionSpec,
    pub count: usize,
    pub final_means: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std_dev: f64,
    /// Welch test of this kind's final means against the baseline.
    pub welch_vs_none: Option<WelchTest>,
    /// Paired sign test against the baseline run with the same seed.
    pub sign_vs_none: Option<SignTest>,
}

impl InterventionOutcome {
    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Runs the baseline and every spec for `repeats` shared seeds.
pub fn run_intervention_study(
    base: &ScenarioParams,
    specs: &[InterventionSpec],
    repeats: usize,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<InterventionOutcome>> {
    if repeats < 2 {
        return Err(Error::config("repeats", "at least two repeats are needed for a comparison"));
    }
    base.validate()?;
    let mut all = vec![InterventionSpec::new(InterventionKind::None)];
    all.extend(specs.iter().filter(|s| s.kind != InterventionKind::None).copied());
    for spec in &all {
        spec.validate(base)?;
    }

    let pool = sweep::thread_pool(workers)?;
    let finals: Vec<Vec<f64>> = pool.install(|| {
        all.par_iter()
            .map(|spec| {
                (0..repeats)
                    .map(|r| {
                        run_intervention(base, spec, rng::run_seed(master_seed, 0, r))
                            .map(|run| run.final_mean)
                            .map_err(|e| Error::Run { combo: 0, repeat: r, source: Box::new(e) })
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let baseline = finals[0].clone();
    all.iter()
        .zip(finals)
        .map(|(spec, values)| {
            let (welch_vs_none, sign_vs_none) = if spec.kind == InterventionKind::None {
                (None, None)
            } else {
                (
                    Some(analysis::welch_t_test(&values, &baseline)?),
                    Some(analysis::sign_test(&values, &baseline)?),
                )
            };
            let mean = model::mean(&values);
            Ok(InterventionOutcome {
                spec: *spec,
                count: spec.resolved_count(base.n),
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean,
                std_dev: model::sample_std(&values),
                final_means: values,
                welch_vs_none,
                sign_vs_none,
            })
        })
        .collect()
}
