//! Run configuration: a TOML file layered over built-in defaults, then
//! command-line overrides, validated as a whole before anything runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::interventions::{InterventionKind, InterventionSpec};
use crate::model::{Category, ScenarioParams};
use crate::sweep::{self, ParameterGrid};

/// Repeats used when the CI profile is selected and no count is given.
pub const CI_REPEATS: usize = 10;
pub const DEFAULT_REPEATS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::config("format", format!("expected csv or json, got `{other}`"))),
        }
    }
}

/// Settings of the injection experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterventionConfig {
    pub kinds: Vec<InterventionKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    pub category: Category,
    pub time: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stubbornness: Option<f64>,
}

impl Default for InterventionConfig {
    fn default() -> Self {
        Self {
            kinds: vec![InterventionKind::Opposite, InterventionKind::Neutral, InterventionKind::Random],
            count: None,
            category: Category::Nin,
            time: 0,
            stubbornness: None,
        }
    }
}

impl InterventionConfig {
    pub fn specs(&self) -> Vec<InterventionSpec> {
        self.kinds
            .iter()
            .map(|&kind| InterventionSpec {
                kind,
                count: self.count,
                category: self.category,
                time: self.time,
                stubbornness: self.stubbornness,
            })
            .collect()
    }
}

/// Fully resolved configuration shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; never affects results.
    pub workers: usize,
    pub repeats: usize,
    pub ci_profile: bool,
    pub format: Format,
    pub out_dir: PathBuf,
    /// Name of the preset the scenario was built on.
    pub preset: String,
    pub scenario: ScenarioParams,
    pub grid: ParameterGrid,
    pub intervention: InterventionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            repeats: DEFAULT_REPEATS,
            ci_profile: false,
            format: Format::Csv,
            out_dir: PathBuf::from("."),
            preset: "benchmark".into(),
            scenario: ScenarioParams::benchmark(),
            grid: ParameterGrid::default(),
            intervention: InterventionConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub repeats: Option<usize>,
    pub ci_profile: bool,
    pub format: Option<Format>,
    pub out_dir: Option<PathBuf>,
    pub events: Option<bool>,
    pub preset: Option<String>,
}

const TOP_LEVEL_SCALARS: [&str; 7] = ["seed", "workers", "repeats", "ci_profile", "format", "out_dir", "preset"];

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::config("repeats", "at least one repeat is required"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "at least one worker is required"));
        }
        self.scenario.validate().map_err(|e| prefixed(e, "scenario"))?;
        sweep::enumerate_grid(&self.grid).map_err(|e| prefixed(e, "grid"))?;
        for spec in self.intervention.specs() {
            spec.validate(&self.scenario)?;
        }
        Ok(())
    }

    /// Short hash of everything that can change results. Worker count and
    /// output location are excluded.
    pub fn config_hash(&self, command: &str) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            command: &'a str,
            seed: u64,
            repeats: usize,
            scenario: &'a ScenarioParams,
            grid: &'a ParameterGrid,
            intervention: &'a InterventionConfig,
        }
        let canonical = serde_json::to_string(&Hashed {
            command,
            seed: self.seed,
            repeats: self.repeats,
            scenario: &self.scenario,
            grid: &self.grid,
            intervention: &self.intervention,
        })
        .expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn prefixed(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { key, message } => Error::config(format!("{prefix}.{key}"), message),
        other => other,
    }
}

fn to_table<T: Serialize>(value: &T) -> Table {
    match Value::try_from(value).expect("defaults serialize to TOML") {
        Value::Table(t) => t,
        _ => unreachable!("structs serialize to tables"),
    }
}

/// Rejects keys absent from `template`, naming the full dotted path.
fn check_keys(table: &Table, template: &Table, prefix: &str) -> Result<()> {
    for (key, value) in table {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (template.get(key), value) {
            (None, _) => return Err(Error::config(path, "unknown key")),
            (Some(Value::Table(inner)), Value::Table(given)) => check_keys(given, inner, &path)?,
            (Some(Value::Table(_)), _) => return Err(Error::config(path, "expected a table")),
            _ => {}
        }
    }
    Ok(())
}

fn merge(base: &mut Table, over: &Table) {
    for (key, value) in over {
        match (base.get_mut(key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(key.clone(), value.clone());
            }
        }
    }
}

/// Deserializes `base` overlaid with `over`. On failure, retries one key at a
/// time so the error names the offending key.
fn layered<T: for<'de> Deserialize<'de>>(base: &Table, over: &Table, prefix: &str) -> Result<T> {
    let mut merged = base.clone();
    merge(&mut merged, over);
    match merged.try_into::<T>() {
        Ok(v) => Ok(v),
        Err(err) => {
            for (key, value) in over {
                let mut single = base.clone();
                merge(&mut single, &Table::from_iter([(key.clone(), value.clone())]));
                if let Err(e) = single.try_into::<T>() {
                    return Err(Error::config(format!("{prefix}.{key}"), e.message().to_string()));
                }
            }
            Err(Error::config(prefix, err.message().to_string()))
        }
    }
}

fn scalar<T: for<'de> Deserialize<'de>>(table: &Table, key: &str) -> Result<Option<T>> {
    table
        .get(key)
        .map(|v| v.clone().try_into::<T>().map_err(|e| Error::config(key, e.message().to_string())))
        .transpose()
}

fn sub_table(table: &Table, key: &str) -> Table {
    match table.get(key) {
        Some(Value::Table(t)) => t.clone(),
        _ => Table::new(),
    }
}

/// Parses TOML text; an empty string yields the defaults.
pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;

    let defaults = RunConfig::default();
    let mut template = Table::new();
    for key in TOP_LEVEL_SCALARS {
        template.insert(key.into(), Value::Integer(0));
    }
    template.insert("scenario".into(), Value::Table(to_table(&defaults.scenario)));
    template.insert("grid".into(), Value::Table(to_table(&defaults.grid)));
    let full_intervention = InterventionConfig {
        count: Some(0),
        stubbornness: Some(0.0),
        ..InterventionConfig::default()
    };
    template.insert("intervention".into(), Value::Table(to_table(&full_intervention)));
    check_keys(&table, &template, "")?;

    let preset = match &overrides.preset {
        Some(name) => name.clone(),
        None => scalar::<String>(&table, "preset")?.unwrap_or(defaults.preset.clone()),
    };
    let base = sweep::preset(&preset)
        .ok_or_else(|| Error::config("preset", format!("unknown preset `{preset}`")))?;
    let mut scenario: ScenarioParams = layered(&to_table(&base), &sub_table(&table, "scenario"), "scenario")?;
    let mut grid: ParameterGrid = layered(&to_table(&defaults.grid), &sub_table(&table, "grid"), "grid")?;
    let intervention: InterventionConfig = layered(
        &to_table(&defaults.intervention),
        &sub_table(&table, "intervention"),
        "intervention",
    )?;

    let ci_profile = overrides.ci_profile || scalar::<bool>(&table, "ci_profile")?.unwrap_or(false);
    let repeats = overrides
        .repeats
        .or(scalar::<usize>(&table, "repeats")?)
        .unwrap_or(if ci_profile { CI_REPEATS } else { DEFAULT_REPEATS });
    if let Some(on) = overrides.events {
        scenario.events.enabled = on;
        grid.events.enabled = on;
    }

    let config = RunConfig {
        seed: overrides.seed.or(scalar(&table, "seed")?).unwrap_or(defaults.seed),
        workers: overrides.workers.or(scalar(&table, "workers")?).unwrap_or(defaults.workers),
        repeats,
        ci_profile,
        format: match overrides.format {
            Some(f) => f,
            None => scalar(&table, "format")?.unwrap_or_default(),
        },
        out_dir: overrides
            .out_dir
            .clone()
            .or(scalar(&table, "out_dir")?)
            .unwrap_or(defaults.out_dir),
        preset,
        scenario,
        grid,
        intervention,
    };
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config_str(text, &Overrides::default())
    }

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn empty_config_is_all_defaults() {
        let a = parse("").unwrap();
        assert_eq!(a, RunConfig::default());
        assert_eq!(a, parse("").unwrap());
        assert_eq!(a.config_hash("sweep"), parse("").unwrap().config_hash("sweep"));
    }

    #[test]
    fn benchmark_preset() {
        let c = parse("preset = \"benchmark\"").unwrap();
        let s = &c.scenario;
        assert_eq!((s.n, s.t), (100, 100));
        assert_eq!([s.epsilon, s.pro_nin, s.pro_ninl, s.pro_nil, s.x_llm], [0.4, 0.6, 0.2, 0.2, -1.0]);
    }

    #[test]
    fn scenario_overrides_layer_on_the_preset() {
        let c = parse("preset = \"N=300\"\n[scenario]\nepsilon = 0.7\n[scenario.events]\nenabled = false").unwrap();
        assert_eq!(c.scenario.n, 300);
        assert_eq!(c.scenario.epsilon, 0.7);
        assert!(!c.scenario.events.enabled);
        assert_eq!(c.scenario.events.probability, 0.05);
    }

    #[test]
    fn bad_proportions_name_the_sum() {
        let e = parse("[scenario]\npro_nin = 0.5\npro_ninl = 0.5\npro_nil = 0.5").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("pro_nin + pro_ninl + pro_nil"), "{msg}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_named() {
        assert_eq!(key_of(parse("seeds = 1").unwrap_err()), "seeds");
        assert_eq!(key_of(parse("[scenario]\nepsilonn = 0.1").unwrap_err()), "scenario.epsilonn");
        assert_eq!(key_of(parse("[grid.events]\nprob = 0.1").unwrap_err()), "grid.events.prob");
        assert_eq!(key_of(parse("[nope]\na = 1").unwrap_err()), "nope");
    }

    #[test]
    fn bad_values_are_named() {
        assert_eq!(key_of(parse("[scenario]\nepsilon = \"wide\"").unwrap_err()), "scenario.epsilon");
        assert_eq!(key_of(parse("[scenario]\nepsilon = 1.5").unwrap_err()), "scenario.epsilon");
        assert_eq!(key_of(parse("[grid]\nproportion_step = 0.3").unwrap_err()), "grid.proportion_step");
        assert_eq!(key_of(parse("repeats = 0").unwrap_err()), "repeats");
        assert_eq!(key_of(parse("preset = \"nope\"").unwrap_err()), "preset");
        assert_eq!(key_of(parse("[intervention]\ntime = 500").unwrap_err()), "intervention.time");
    }

    #[test]
    fn flags_win_over_the_file() {
        let o = Overrides {
            seed: Some(9),
            repeats: Some(3),
            events: Some(false),
            format: Some(Format::Json),
            ..Overrides::default()
        };
        let c = parse_config_str("seed = 1\nrepeats = 50", &o).unwrap();
        assert_eq!((c.seed, c.repeats, c.format), (9, 3, Format::Json));
        assert!(!c.scenario.events.enabled && !c.grid.events.enabled);
    }

    #[test]
    fn ci_profile_lowers_default_repeats() {
        let o = Overrides { ci_profile: true, ..Overrides::default() };
        assert_eq!(parse_config_str("", &o).unwrap().repeats, CI_REPEATS);
        assert_eq!(parse_config_str("repeats = 4", &o).unwrap().repeats, 4);
    }

    #[test]
    fn hash_ignores_workers_and_paths() {
        let a = parse("").unwrap();
        let b = parse("workers = 8\nout_dir = \"elsewhere\"\nformat = \"json\"").unwrap();
        assert_eq!(a.config_hash("sweep"), b.config_hash("sweep"));
        assert_ne!(a.config_hash("sweep"), a.config_hash("run"));
        let c = parse("seed = 1").unwrap();
        assert_ne!(a.config_hash("sweep"), c.config_hash("sweep"));
    }

    #[test]
    fn intervention_table() {
        let c = parse("[intervention]\nkinds = [\"neutral\"]\ncount = 3\nstubbornness = 0.5").unwrap();
        let specs = c.intervention.specs();
        assert_eq!(specs.len(), 1);
        assert_eq!(specs[0].count, Some(3));
        assert_eq!(specs[0].stubbornness, Some(0.5));
    }
}
