//! Outcome indicators: opinion shift, convergence time, final dispersion and
//! final cluster count, per agent class or for the whole population.
//!
//! Multi-run indicators are the arithmetic mean of the single-run values.
//! An indicator that is undefined for the group (empty class, or fewer than
//! two members for the standard deviation) is `None`, never zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering;
use crate::error::{Error, Result};
use crate::model::{self, Category, Trajectory};

/// Per-agent change below which an iteration counts as converged.
pub const CONVERGENCE_TOL: f64 = 0.005;

/// An agent class or the whole population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "NIN")]
    Nin,
    #[serde(rename = "NINL")]
    Ninl,
    #[serde(rename = "NIL")]
    Nil,
    #[serde(rename = "ALL")]
    All,
}

impl Group {
    pub const EVERY: [Group; 4] = [Group::Nin, Group::Ninl, Group::Nil, Group::All];

    pub fn category(self) -> Option<Category> {
        match self {
            Group::Nin => Some(Category::Nin),
            Group::Ninl => Some(Category::Ninl),
            Group::Nil => Some(Category::Nil),
            Group::All => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Nin => "NIN",
            Group::Ninl => "NINL",
            Group::Nil => "NIL",
            Group::All => "ALL",
        }
    }
}

impl From<Category> for Group {
    fn from(c: Category) -> Self {
        match c {
            Category::Nin => Group::Nin,
            Category::Ninl => Group::Ninl,
            Category::Nil => Group::Nil,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ALL" => Ok(Group::All),
            other => other.parse::<Category>().map(Group::from),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    NodeDiff,
    NodeConv,
    NodeSd,
    NodeClus,
}

impl Indicator {
    pub const EVERY: [Indicator; 4] = [
        Indicator::NodeDiff,
        Indicator::NodeConv,
        Indicator::NodeSd,
        Indicator::NodeClus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Indicator::NodeDiff => "node_diff",
            Indicator::NodeConv => "node_conv",
            Indicator::NodeSd => "node_sd",
            Indicator::NodeClus => "node_clus",
        }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Indicator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Indicator::EVERY
            .into_iter()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| Error::config("indicator", format!("unknown indicator `{s}`")))
    }
}

/// The four indicators of one group, averaged over `repeats` runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSet {
    pub group: Group,
    pub node_diff: Option<f64>,
    pub node_conv: Option<f64>,
    pub node_sd: Option<f64>,
    pub node_clus: Option<f64>,
    pub repeats: usize,
}

impl IndicatorSet {
    pub fn get(&self, indicator: Indicator) -> Option<f64> {
        match indicator {
            Indicator::NodeDiff => self.node_diff,
            Indicator::NodeConv => self.node_conv,
            Indicator::NodeSd => self.node_sd,
            Indicator::NodeClus => self.node_clus,
        }
    }

    /// Averages single-run sets of the same group.
    pub fn mean_of(runs: &[IndicatorSet]) -> Option<IndicatorSet> {
        let first = runs.first()?;
        let avg = |pick: fn(&IndicatorSet) -> Option<f64>| -> Option<f64> {
            let values: Option<Vec<f64>> = runs.iter().map(pick).collect();
            values.map(|v| model::mean(&v))
        };
        Some(IndicatorSet {
            group: first.group,
            node_diff: avg(|s| s.node_diff),
            node_conv: avg(|s| s.node_conv),
            node_sd: avg(|s| s.node_sd),
            node_clus: avg(|s| s.node_clus),
            repeats: runs.iter().map(|s| s.repeats).sum(),
        })
    }
}

fn group_values(row: &[f64], members: &[usize]) -> Vec<f64> {
    members.iter().map(|&i| row[i]).collect()
}

/// Mean of `x_i(T) - x_i(0)` over the members.
pub fn run_node_diff(traj: &Trajectory, members: &[usize]) -> Option<f64> {
    if members.is_empty() {
        return None;
    }
    let (first, last) = (traj.initial(), traj.last());
    let total: f64 = members.iter().map(|&i| last[i] - first[i]).sum();
    Some(total / members.len() as f64)
}

/// First iteration at which every member moved by at most `tol`; the run
/// length when that never happens.
pub fn run_node_conv(traj: &Trajectory, members: &[usize], tol: f64) -> Option<f64> {
    if members.is_empty() {
        return None;
    }
    let horizon = traj.iterations();
    let first = (1..=horizon).find(|&t| {
        let (prev, cur) = (traj.row(t - 1), traj.row(t));
        members.iter().all(|&i| (cur[i] - prev[i]).abs() <= tol)
    });
    Some(first.unwrap_or(horizon) as f64)
}

/// Sample standard deviation of the members' final opinions.
pub fn run_node_sd(traj: &Trajectory, members: &[usize]) -> Option<f64> {
    if members.len() < 2 {
        return None;
    }
    Some(model::sample_std(&group_values(traj.last(), members)))
}

/// Single-linkage cluster count of the members' final opinions.
pub fn run_node_clus(traj: &Trajectory, members: &[usize], cut: f64) -> Option<f64> {
    if members.is_empty() {
        return None;
    }
    Some(clustering::cluster_count(&group_values(traj.last(), members), cut) as f64)
}

pub fn run_indicators(traj: &Trajectory, group: Group) -> IndicatorSet {
    let members = traj.members(group.category());
    IndicatorSet {
        group,
        node_diff: run_node_diff(traj, &members),
        node_conv: run_node_conv(traj, &members, CONVERGENCE_TOL),
        node_sd: run_node_sd(traj, &members),
        node_clus: run_node_clus(traj, &members, clustering::DEFAULT_CUT),
        repeats: 1,
    }
}

fn over_runs(trajs: &[Trajectory], group: Group, f: impl Fn(&Trajectory, &[usize]) -> Option<f64>) -> Option<f64> {
    if trajs.is_empty() {
        return None;
    }
    let values: Option<Vec<f64>> = trajs
        .iter()
        .map(|t| f(t, &t.members(group.category())))
        .collect();
    values.map(|v| model::mean(&v))
}

pub fn node_diff(trajs: &[Trajectory], group: Group) -> Option<f64> {
    over_runs(trajs, group, run_node_diff)
}

pub fn node_conv(trajs: &[Trajectory], group: Group, tol: f64) -> Option<f64> {
    over_runs(trajs, group, |t, m| run_node_conv(t, m, tol))
}

pub fn node_sd(trajs: &[Trajectory], group: Group) -> Option<f64> {
    over_runs(trajs, group, run_node_sd)
}

pub fn node_clus(trajs: &[Trajectory], group: Group, cut: f64) -> Option<f64> {
    over_runs(trajs, group, |t, m| run_node_clus(t, m, cut))
}

pub fn indicator_set(trajs: &[Trajectory], group: Group) -> IndicatorSet {
    IndicatorSet {
        group,
        node_diff: node_diff(trajs, group),
        node_conv: node_conv(trajs, group, CONVERGENCE_TOL),
        node_sd: node_sd(trajs, group),
        node_clus: node_clus(trajs, group, clustering::DEFAULT_CUT),
        repeats: trajs.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{run_scenario, EventConfig, NilStart, ScenarioParams};
    use proptest::prelude::*;

    fn traj(rows: Vec<Vec<f64>>) -> Trajectory {
        let n = rows[0].len();
        Trajectory::from_rows(rows, vec![Category::Nin; n])
    }

    #[test]
    fn diff_extremes() {
        let up = traj(vec![vec![-1.0; 5], vec![0.0; 5], vec![1.0; 5]]);
        assert_eq!(node_diff(&[up], Group::All), Some(2.0));
        let down = traj(vec![vec![1.0; 3], vec![-1.0; 3]]);
        assert_eq!(node_diff(&[down], Group::Nin), Some(-2.0));
    }

    #[test]
    fn static_run_has_zero_diff() {
        let mut p = ScenarioParams::benchmark().with_mix(1.0, 0.0, 0.0);
        p.events = EventConfig::disabled();
        let t = run_scenario(&p, 1).unwrap();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for _ in 0..4 {
            rows.push(t.initial().to_vec());
        }
        let frozen = Trajectory::from_rows(rows, t.categories().to_vec());
        assert_eq!(node_diff(&[frozen.clone()], Group::All), Some(0.0));
        assert_eq!(node_conv(&[frozen], Group::All, CONVERGENCE_TOL), Some(1.0));
    }

    #[test]
    fn empty_group_is_undefined() {
        let t = traj(vec![vec![0.1, 0.2], vec![0.1, 0.2]]);
        let set = indicator_set(&[t], Group::Nil);
        assert_eq!(set.node_diff, None);
        assert_eq!(set.node_conv, None);
        assert_eq!(set.node_sd, None);
        assert_eq!(set.node_clus, None);
    }

    #[test]
    fn singleton_sd_is_undefined() {
        let t = Trajectory::from_rows(vec![vec![0.1, 0.2], vec![0.3, 0.2]], vec![Category::Nin, Category::Nil]);
        assert_eq!(node_sd(&[t.clone()], Group::Nil), None);
        assert_eq!(node_clus(&[t], Group::Nil, 0.2), Some(1.0));
    }

    #[test]
    fn conv_detects_first_quiet_step() {
        // moves by 0.5 at t=1, then sits still
        let t = traj(vec![vec![0.0, 0.5], vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(node_conv(&[t], Group::All, CONVERGENCE_TOL), Some(2.0));
    }

    #[test]
    fn conv_never_settles() {
        let rows: Vec<Vec<f64>> = (0..=10).map(|t| vec![if t % 2 == 0 { 0.5 } else { -0.5 }; 3]).collect();
        assert_eq!(node_conv(&[traj(rows)], Group::All, CONVERGENCE_TOL), Some(10.0));
    }

    #[test]
    fn conv_boundary_is_inclusive() {
        let t = traj(vec![vec![0.0], vec![0.005]]);
        assert_eq!(run_node_conv(&t, &[0], 0.005), Some(1.0));
    }

    #[test]
    fn sd_examples() {
        let t = traj(vec![vec![0.0; 4], vec![1.0, 1.0, -1.0, -1.0]]);
        let sd = node_sd(&[t], Group::All).unwrap();
        assert!((sd - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((sd - 1.1547).abs() < 1e-4);
        let flat = traj(vec![vec![0.0; 4], vec![0.3; 4]]);
        assert_eq!(node_sd(&[flat], Group::All), Some(0.0));
    }

    #[test]
    fn clus_examples() {
        let t = traj(vec![vec![0.0; 4], vec![-1.0, -0.95, 0.9, 1.0]]);
        assert_eq!(node_clus(&[t], Group::All, 0.2), Some(2.0));
        let same = traj(vec![vec![0.0; 4], vec![0.4; 4]]);
        assert_eq!(node_clus(&[same], Group::All, 0.2), Some(1.0));
        let spread = traj(vec![vec![0.0; 4], vec![-1.0, -0.5, 0.0, 0.5]]);
        assert_eq!(node_clus(&[spread], Group::All, 0.2), Some(4.0));
    }

    #[test]
    fn all_nil_population() {
        for (start, conv) in [(NilStart::Llm, 1.0), (NilStart::Uniform, 2.0)] {
            let mut p = ScenarioParams::benchmark().with_mix(0.0, 0.0, 1.0);
            p.x_llm = 0.6;
            p.nil_start = start;
            let trajs: Vec<_> = (0..3).map(|s| run_scenario(&p, s).unwrap()).collect();
            let initial_mean: f64 = trajs
                .iter()
                .map(|t| t.initial().iter().sum::<f64>() / t.n() as f64)
                .sum::<f64>()
                / 3.0;
            for g in [Group::Nil, Group::All] {
                let set = indicator_set(&trajs, g);
                assert!((set.node_diff.unwrap() - (0.6 - initial_mean)).abs() < 1e-12);
                assert_eq!(set.node_sd, Some(0.0));
                assert_eq!(set.node_clus, Some(1.0));
                assert_eq!(set.node_conv, Some(conv));
            }
        }
    }

    #[test]
    fn group_names_round_trip() {
        for g in Group::EVERY {
            assert_eq!(g.as_str().parse::<Group>().unwrap(), g);
        }
        for i in Indicator::EVERY {
            assert_eq!(i.as_str().parse::<Indicator>().unwrap(), i);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn ranges_and_linearity(seed in any::<u64>(), eps in 0.0f64..=1.0, x_llm in -1.0f64..=1.0) {
            let p = ScenarioParams { n: 30, t: 25, epsilon: eps, x_llm, ..ScenarioParams::benchmark() };
            let trajs: Vec<_> = (0..3).map(|k| run_scenario(&p, seed.wrapping_add(k)).unwrap()).collect();
            for g in Group::EVERY {
                let n = trajs[0].members(g.category()).len() as f64;
                let set = indicator_set(&trajs, g);
                let diff = set.node_diff.unwrap();
                prop_assert!((-2.0..=2.0).contains(&diff));
                let conv = set.node_conv.unwrap();
                prop_assert!((0.0..=p.t as f64).contains(&conv));
                let sd = set.node_sd.unwrap();
                prop_assert!(sd >= 0.0 && sd <= (n / (n - 1.0)).sqrt() + 1e-12);
                let clus = set.node_clus.unwrap();
                prop_assert!((1.0..=n).contains(&clus));

                let singles: Vec<_> = trajs.iter().map(|t| run_indicators(t, g)).collect();
                let pooled = IndicatorSet::mean_of(&singles).unwrap();
                prop_assert_eq!(pooled, set);
            }
        }
    }
}
