//! Statistics over sweep summaries: Pearson correlations with t-test
//! significance, extremal parameter combinations, and comparisons between
//! the pure usage-strategy families.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

use crate::error::{Error, Result};
use crate::indicators::{Group, Indicator, IndicatorSet};
use crate::sweep::ComboResult;

/// One row of a sweep summary: a parameter combination and one group's
/// repeat-averaged indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub t: usize,
    pub epsilon: f64,
    pub pro_nin: f64,
    pub pro_ninl: f64,
    pub pro_nil: f64,
    pub x_llm: f64,
    pub set: IndicatorSet,
}

impl SummaryRow {
    pub fn parameter(&self, p: Parameter) -> f64 {
        match p {
            Parameter::Epsilon => self.epsilon,
            Parameter::ProNin => self.pro_nin,
            Parameter::ProNinl => self.pro_ninl,
            Parameter::ProNil => self.pro_nil,
            Parameter::XLlm => self.x_llm,
        }
    }

    /// One row per group, in `Group::EVERY` order.
    pub fn from_combo(combo: &ComboResult) -> Vec<SummaryRow> {
        let p = &combo.params;
        combo
            .sets
            .iter()
            .map(|set| SummaryRow {
                n: p.n,
                t: p.t,
                epsilon: p.epsilon,
                pro_nin: p.pro_nin,
                pro_ninl: p.pro_ninl,
                pro_nil: p.pro_nil,
                x_llm: p.x_llm,
                set: *set,
            })
            .collect()
    }
}

pub fn summary_rows(combos: &[ComboResult]) -> Vec<SummaryRow> {
    combos.iter().flat_map(SummaryRow::from_combo).collect()
}

/// The five swept parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parameter {
    #[serde(rename = "epsilon")]
    Epsilon,
    #[serde(rename = "pro_NIN")]
    ProNin,
    #[serde(rename = "pro_NINL")]
    ProNinl,
    #[serde(rename = "pro_NIL")]
    ProNil,
    #[serde(rename = "x_LLM")]
    XLlm,
}

impl Parameter {
    pub const EVERY: [Parameter; 5] = [
        Parameter::Epsilon,
        Parameter::ProNin,
        Parameter::ProNinl,
        Parameter::ProNil,
        Parameter::XLlm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Parameter::Epsilon => "epsilon",
            Parameter::ProNin => "pro_NIN",
            Parameter::ProNinl => "pro_NINL",
            Parameter::ProNil => "pro_NIL",
            Parameter::XLlm => "x_LLM",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Parameter::EVERY
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("unknown parameter `{s}`")))
    }
}

/// Product-moment correlation. `None` when either series is constant or
/// shorter than three points.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "series lengths differ");
    let n = x.len();
    if n < 3 || x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    StudentsT::new(0.0, 1.0, df)
        .expect("positive degrees of freedom")
        .sf(t)
}

/// Two-sided p-value of `r` from `n` pairs, via `t = r sqrt((n-2)/(1-r^2))`.
pub fn t_test_p(r: f64, n: usize) -> f64 {
    assert!(n >= 3, "need at least three pairs");
    if r.abs() >= 1.0 {
        return 0.0;
    }
    if r == 0.0 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    (2.0 * student_t_sf(t.abs(), df)).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Significance {
    #[serde(rename = "***")]
    P001,
    #[serde(rename = "**")]
    P01,
    #[serde(rename = "*")]
    P05,
    #[serde(rename = "ns")]
    NotSignificant,
}

impl Significance {
    pub fn from_p(p: f64) -> Self {
        if p < 0.001 {
            Significance::P001
        } else if p < 0.01 {
            Significance::P01
        } else if p < 0.05 {
            Significance::P05
        } else {
            Significance::NotSignificant
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Significance::P001 => "***",
            Significance::P01 => "**",
            Significance::P05 => "*",
            Significance::NotSignificant => "ns",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub parameter: Parameter,
    pub indicator: Indicator,
    pub category: Group,
    pub r: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: Option<Significance>,
    /// Number of rows with a defined indicator value.
    pub n: usize,
}

impl CorrelationCell {
    pub fn missing(&self) -> bool {
        self.r.is_none()
    }
}

/// Correlation of every (parameter, indicator, group) triple over the
/// summary rows. Rows whose indicator is undefined are dropped pairwise.
pub fn correlation_matrix(rows: &[SummaryRow]) -> Result<Vec<CorrelationCell>> {
    if rows.is_empty() {
        return Err(Error::Schema("no summary rows".into()));
    }
    let mut cells = Vec::with_capacity(5 * 4 * 4);
    for group in Group::EVERY {
        let members: Vec<&SummaryRow> = rows.iter().filter(|r| r.set.group == group).collect();
        for indicator in Indicator::EVERY {
            for parameter in Parameter::EVERY {
                let (xs, ys): (Vec<f64>, Vec<f64>) = members
                    .iter()
                    .filter_map(|r| r.set.get(indicator).map(|v| (r.parameter(parameter), v)))
                    .unzip();
                let r = if xs.len() >= 3 { pearson_r(&xs, &ys) } else { None };
                let p_value = r.map(|r| t_test_p(r, xs.len()));
                cells.push(CorrelationCell {
                    parameter,
                    indicator,
                    category: group,
                    r,
                    p_value,
                    stars: p_value.map(Significance::from_p),
                    n: xs.len(),
                });
            }
        }
    }
    Ok(cells)
}

pub fn find_cell(cells: &[CorrelationCell], parameter: Parameter, indicator: Indicator, group: Group) -> Option<&CorrelationCell> {
    cells
        .iter()
        .find(|c| c.parameter == parameter && c.indicator == indicator && c.category == group)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Min,
    Max,
    /// Closest to the given value, e.g. two clusters for polarization.
    Value(f64),
}

impl Target {
    pub const POLARIZATION: Target = Target::Value(2.0);

    /// Larger is better.
    fn score(self, v: f64) -> f64 {
        match self {
            Target::Min => -v,
            Target::Max => v,
            Target::Value(goal) => -(v - goal).abs(),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Min => f.write_str("min"),
            Target::Max => f.write_str("max"),
            Target::Value(v) => write!(f, "value={v}"),
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Target::Min),
            "max" => Ok(Target::Max),
            "polarization" => Ok(Target::POLARIZATION),
            other => other
                .strip_prefix("value=")
                .and_then(|v| v.parse().ok())
                .map(Target::Value)
                .ok_or_else(|| Error::config("target", format!("expected min, max, polarization or value=<x>, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeReport {
    pub indicator: Indicator,
    pub category: Group,
    pub target: Target,
    pub epsilon: f64,
    pub pro_nin: f64,
    pub pro_ninl: f64,
    pub pro_nil: f64,
    pub x_llm: f64,
    pub n_combos: usize,
    /// Whether the selection was a tie at the extreme rather than the top `k`.
    pub tied: bool,
}

/// Averages the parameters of the combinations at the extreme of
/// `indicator`: every combination sharing the exact best value when there is
/// a tie, otherwise the `k` best.
pub fn extremal_combos(rows: &[SummaryRow], indicator: Indicator, group: Group, target: Target, k: usize) -> Result<ExtremeReport> {
    let mut scored: Vec<(f64, &SummaryRow)> = rows
        .iter()
        .filter(|r| r.set.group == group)
        .filter_map(|r| r.set.get(indicator).map(|v| (target.score(v), r)))
        .collect();
    if scored.is_empty() || k == 0 {
        return Err(Error::Analysis(format!(
            "no {group} rows with a defined {indicator} to select from"
        )));
    }
    // stable sort: equal scores keep row order
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let best = scored[0].0;
    let ties = scored.iter().take_while(|(s, _)| *s == best).count();
    let take = if ties > 1 { ties } else { k.min(scored.len()) };
    let chosen = &scored[..take];

    let avg = |p: Parameter| chosen.iter().map(|(_, r)| r.parameter(p)).sum::<f64>() / take as f64;
    Ok(ExtremeReport {
        indicator,
        category: group,
        target,
        epsilon: avg(Parameter::Epsilon),
        pro_nin: avg(Parameter::ProNin),
        pro_ninl: avg(Parameter::ProNinl),
        pro_nil: avg(Parameter::ProNil),
        x_llm: avg(Parameter::XLlm),
        n_combos: take,
        tied: ties > 1,
    })
}

/// Welch's unequal-variance two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_two_sided: f64,
    /// One-sided, alternative `mean_a > mean_b`.
    pub p_greater: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Analysis("Welch test needs at least two values per sample".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        // both samples constant
        let (p_two, p_gt) = if ma == mb {
            (1.0, 0.5)
        } else if ma > mb {
            (0.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let t = if ma == mb { 0.0 } else { (ma - mb).signum() * f64::INFINITY };
        return Ok(WelchTest { mean_a: ma, mean_b: mb, t, df: f64::NAN, p_two_sided: p_two, p_greater: p_gt });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (if sa > 0.0 { sa * sa / (a.len() - 1) as f64 } else { 0.0 }
            + if sb > 0.0 { sb * sb / (b.len() - 1) as f64 } else { 0.0 });
    let upper = student_t_sf(t, df);
    Ok(WelchTest {
        mean_a: ma,
        mean_b: mb,
        t,
        df,
        p_two_sided: (2.0 * student_t_sf(t.abs(), df)).min(1.0),
        p_greater: upper,
    })
}

/// Paired sign test over `a[i] - b[i]`; zero differences are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// One-sided, alternative `a` tends to exceed `b`.
    pub p_greater: f64,
}

pub fn sign_test(a: &[f64], b: &[f64]) -> Result<SignTest> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Analysis("sign test needs two non-empty samples of equal length".into()));
    }
    let wins = a.iter().zip(b).filter(|(x, y)| x > y).count();
    let losses = a.iter().zip(b).filter(|(x, y)| x < y).count();
    let ties = a.len() - wins - losses;
    let n = (wins + losses) as u64;
    let p_greater = if wins == 0 {
        1.0
    } else {
        // P(X >= wins) for X ~ Binomial(n, 1/2)
        Binomial::new(0.5, n).expect("valid binomial").sf(wins as u64 - 1)
    };
    Ok(SignTest { wins, losses, ties, p_greater })
}

/// The three populations made of a single usage strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "pro_NIN=1")]
    NoUse,
    #[serde(rename = "pro_NINL=1")]
    Partial,
    #[serde(rename = "pro_NIL=1")]
    Full,
}

impl Family {
    pub const EVERY: [Family; 3] = [Family::NoUse, Family::Partial, Family::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::NoUse => "pro_NIN=1",
            Family::Partial => "pro_NINL=1",
            Family::Full => "pro_NIL=1",
        }
    }

    fn contains(self, row: &SummaryRow) -> bool {
        let hit = |v: f64| (v - 1.0).abs() < 1e-9;
        match self {
            Family::NoUse => hit(row.pro_nin),
            Family::Partial => hit(row.pro_ninl),
            Family::Full => hit(row.pro_nil),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyStats {
    pub family: Family,
    pub n: usize,
    pub mean_node_sd: f64,
    pub mean_node_clus: f64,
    pub node_sd: Vec<f64>,
    pub node_clus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyComparison {
    pub indicator: Indicator,
    pub a: Family,
    pub b: Family,
    pub test: WelchTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub families: Vec<FamilyStats>,
    /// Mean `node_sd` of the partial-reliance family over the no-use family.
    pub diversity_ratio: f64,
    pub comparisons: Vec<FamilyComparison>,
}

impl StrategyReport {
    pub fn family(&self, family: Family) -> &FamilyStats {
        self.families.iter().find(|f| f.family == family).expect("all families present")
    }
}

/// Compares the population-level `node_sd` and `node_clus` of the three
/// pure-strategy families.
pub fn compare_extreme_strategies(rows: &[SummaryRow]) -> Result<StrategyReport> {
    let families = Family::EVERY
        .iter()
        .map(|&family| {
            let members: Vec<&SummaryRow> = rows
                .iter()
                .filter(|r| r.set.group == Group::All && family.contains(r))
                .collect();
            let pick = |ind: Indicator| -> Result<Vec<f64>> {
                members
                    .iter()
                    .map(|r| {
                        r.set.get(ind).ok_or_else(|| {
                            Error::Analysis(format!("{} row missing {ind}", family.as_str()))
                        })
                    })
                    .collect()
            };
            let node_sd = pick(Indicator::NodeSd)?;
            let node_clus = pick(Indicator::NodeClus)?;
            if node_sd.len() < 2 {
                return Err(Error::Analysis(format!(
                    "family {} has {} rows; need at least 2",
                    family.as_str(),
                    node_sd.len()
                )));
            }
            Ok(FamilyStats {
                family,
                n: node_sd.len(),
                mean_node_sd: node_sd.iter().sum::<f64>() / node_sd.len() as f64,
                mean_node_clus: node_clus.iter().sum::<f64>() / node_clus.len() as f64,
                node_sd,
                node_clus,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if families.iter().any(|f| f.n != families[0].n) {
        return Err(Error::Analysis(format!(
            "incomplete families: sizes {:?}",
            families.iter().map(|f| f.n).collect::<Vec<_>>()
        )));
    }

    let get = |fam: Family| families.iter().find(|f| f.family == fam).expect("present");
    let pairs = [
        (Family::Partial, Family::NoUse),
        (Family::Partial, Family::Full),
        (Family::NoUse, Family::Full),
    ];
    let mut comparisons = Vec::new();
    for indicator in [Indicator::NodeSd, Indicator::NodeClus] {
        for (a, b) in pairs {
            let values = |f: &FamilyStats| match indicator {
                Indicator::NodeSd => f.node_sd.clone(),
                _ => f.node_clus.clone(),
            };
            comparisons.push(FamilyComparison {
                indicator,
                a,
                b,
                test: welch_t_test(&values(get(a)), &values(get(b)))?,
            });
        }
    }
    let diversity_ratio = get(Family::Partial).mean_node_sd / get(Family::NoUse).mean_node_sd;
    Ok(StrategyReport {
        families,
        diversity_ratio,
        comparisons,
    })
}
