//! Parameter grid enumeration and the parallel repeat runner.
//!
//! Each (combination, repeat) pair owns a seed derived from the master seed,
//! so results do not depend on scheduling or on the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{self, Group, IndicatorSet};
use crate::model::{self, EventConfig, NilStart, ScenarioParams};
use crate::network::GraphConfig;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParameterGrid {
    pub epsilon: Vec<f64>,
    pub x_llm: Vec<f64>,
    /// Proportions run over the non-negative multiples of this step that sum to one.
    pub proportion_step: f64,
    /// Explicit `(pro_NIN, pro_NINL, pro_NIL)` list; overrides the step when non-empty.
    pub mixes: Vec<[f64; 3]>,
    pub n: usize,
    pub t: usize,
    pub nil_start: NilStart,
    pub graph: GraphConfig,
    pub events: EventConfig,
}

impl Default for ParameterGrid {
    fn default() -> Self {
        Self {
            epsilon: (0..=10).map(|i| i as f64 / 10.0).collect(),
            x_llm: (-5..=5).map(|i| i as f64 / 5.0).collect(),
            proportion_step: 0.1,
            mixes: Vec::new(),
            n: 100,
            t: 100,
            nil_start: NilStart::default(),
            graph: GraphConfig::default(),
            events: EventConfig::default(),
        }
    }
}

impl ParameterGrid {
    /// Number of proportion steps between 0 and 1.
    pub fn divisions(&self) -> Result<usize> {
        let step = self.proportion_step;
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::config("proportion_step", format!("{step} is outside (0, 1]")));
        }
        let k = (1.0 / step).round();
        if (k * step - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "proportion_step",
                format!("{step} does not divide 1 evenly"),
            ));
        }
        Ok(k as usize)
    }

    /// `(pro_NIN, pro_NINL, pro_NIL)` triples in lexicographic order.
    pub fn proportion_triples(&self) -> Result<Vec<[f64; 3]>> {
        if !self.mixes.is_empty() {
            return Ok(self.mixes.clone());
        }
        let k = self.divisions()?;
        let kf = k as f64;
        let mut out = Vec::with_capacity((k + 1) * (k + 2) / 2);
        for a in 0..=k {
            for b in 0..=k - a {
                let c = k - a - b;
                out.push([a as f64 / kf, b as f64 / kf, c as f64 / kf]);
            }
        }
        Ok(out)
    }
}

/// Every parameter combination of the grid: threshold outermost, then LLM
/// opinion, then proportion triple.
pub fn enumerate_grid(grid: &ParameterGrid) -> Result<Vec<ScenarioParams>> {
    let triples = grid.proportion_triples()?;
    let mut combos = Vec::with_capacity(grid.epsilon.len() * grid.x_llm.len() * triples.len());
    for &epsilon in &grid.epsilon {
        for &x_llm in &grid.x_llm {
            for &[pro_nin, pro_ninl, pro_nil] in &triples {
                let params = ScenarioParams {
                    n: grid.n,
                    t: grid.t,
                    epsilon,
                    pro_nin,
                    pro_ninl,
                    pro_nil,
                    x_llm,
                    classic_hk: false,
                    nil_start: grid.nil_start,
                    negate_initial: false,
                    graph: grid.graph,
                    events: grid.events,
                };
                params.validate()?;
                combos.push(params);
            }
        }
    }
    Ok(combos)
}

/// Indicators of one combination for the three classes and the population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboResult {
    pub index: usize,
    pub params: ScenarioParams,
    pub sets: [IndicatorSet; 4],
    pub repeats: usize,
}

impl ComboResult {
    pub fn group(&self, group: Group) -> &IndicatorSet {
        &self.sets[Group::EVERY.iter().position(|&g| g == group).expect("known group")]
    }
}

/// Runs `repeats` seeded repeats of one combination.
pub fn run_combo(params: &ScenarioParams, index: usize, repeats: usize, master_seed: u64) -> Result<ComboResult> {
    let mut per_group: [Vec<IndicatorSet>; 4] = Default::default();
    for repeat in 0..repeats {
        let seed = rng::run_seed(master_seed, index, repeat);
        let traj = model::run_scenario(params, seed).map_err(|e| Error::Run {
            combo: index,
            repeat,
            source: Box::new(e),
        })?;
        for (k, &group) in Group::EVERY.iter().enumerate() {
            per_group[k].push(indicators::run_indicators(&traj, group));
        }
    }
    let sets = per_group.map(|runs| {
        IndicatorSet::mean_of(&runs).expect("at least one repeat")
    });
    Ok(ComboResult {
        index,
        params: params.clone(),
        sets,
        repeats,
    })
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

/// Runs `combos[i]` with combination index `first_index + i` on `pool`.
pub fn run_combos(
    pool: &rayon::ThreadPool,
    combos: &[ScenarioParams],
    first_index: usize,
    repeats: usize,
    master_seed: u64,
) -> Result<Vec<ComboResult>> {
    if repeats == 0 {
        return Err(Error::config("repeats", "at least one repeat is required"));
    }
    pool.install(|| {
        combos
            .par_iter()
            .enumerate()
            .map(|(i, params)| run_combo(params, first_index + i, repeats, master_seed))
            .collect()
    })
}

/// Full sweep held in memory.
pub fn run_sweep(grid: &ParameterGrid, repeats: usize, master_seed: u64, workers: usize) -> Result<Vec<ComboResult>> {
    let combos = enumerate_grid(grid)?;
    let pool = thread_pool(workers)?;
    run_combos(&pool, &combos, 0, repeats, master_seed)
}

/// A named scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub params: ScenarioParams,
}

/// The eight reference scenarios: plain bounded confidence, the benchmark,
/// and six one-parameter variations of the benchmark.
pub fn scenario_presets() -> Vec<Preset> {
    let base = ScenarioParams::benchmark();
    let g1 = ScenarioParams {
        classic_hk: true,
        x_llm: 0.0,
        ..base.clone().with_mix(1.0, 0.0, 0.0)
    };
    vec![
        Preset { name: "G1", params: g1 },
        Preset { name: "benchmark", params: base.clone() },
        Preset { name: "N=300", params: ScenarioParams { n: 300, ..base.clone() } },
        Preset { name: "T=300", params: ScenarioParams { t: 300, ..base.clone() } },
        Preset { name: "epsilon=0.8", params: ScenarioParams { epsilon: 0.8, ..base.clone() } },
        Preset { name: "pro_NINL=0.6", params: base.clone().with_mix(0.2, 0.6, 0.2) },
        Preset { name: "pro_NIL=0.6", params: base.clone().with_mix(0.2, 0.2, 0.6) },
        Preset { name: "x_LLM=1", params: ScenarioParams { x_llm: 1.0, ..base } },
    ]
}

pub fn preset(name: &str) -> Option<ScenarioParams> {
    scenario_presets().into_iter().find(|p| p.name == name).map(|p| p.params)
}
