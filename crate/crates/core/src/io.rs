//! Output files: a one-line `#` provenance header, then CSV with fixed
//! column order, or JSON Lines (a `{"meta": ...}` line followed by one
//! object per row).
//!
//! CSV numbers carry 6 significant digits and missing values are written as
//! `nan`; JSON keeps full precision and uses `null`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{CorrelationCell, ExtremeReport, FamilyComparison, FamilyStats, StrategyReport, SummaryRow};
use crate::config::{Format, RunConfig};
use crate::error::{Error, Result};
use crate::indicators::{Group, IndicatorSet};
use crate::interventions::InterventionOutcome;
use crate::model::{Series, Trajectory};
use crate::sweep::{self, Preset};

pub const TOOL_NAME: &str = "opinion-sim";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Combinations computed between two index checkpoints of a streamed sweep.
pub const SWEEP_CHUNK: usize = 256;

/// Provenance written atop every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            config_hash: config.config_hash(command),
            seed: config.seed,
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "# tool={} version={} command={} config_hash={} seed={}",
            self.tool, self.version, self.command, self.config_hash, self.seed
        )
    }

    pub fn parse_csv_line(line: &str) -> Option<Header> {
        let body = line.strip_prefix('#')?;
        let get = |key: &str| {
            body.split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .map(str::to_string)
        };
        Some(Header {
            tool: get("tool")?,
            version: get("version")?,
            command: get("command")?,
            config_hash: get("config_hash")?,
            seed: get("seed")?.parse().ok()?,
        })
    }
}

/// Rounds to 6 significant digits, the precision kept in CSV files.
pub fn quantize(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// `x` at 6 significant digits; plain decimals unless very small or large.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let q = quantize(x);
    if q == 0.0 {
        "0".into()
    } else if q.abs() < 1e-4 || q.abs() >= 1e15 {
        format!("{q:e}")
    } else {
        q.to_string()
    }
}

pub fn format_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), format_sig)
}

pub fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s == "nan" || s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Schema(format!("`{s}` is not a number")))
}

/// A row type that can be written as CSV or JSON.
pub trait Record: Serialize {
    const COLUMNS: &'static [&'static str];
    fn csv_fields(&self) -> Vec<String>;
}

/// Path of an output named `stem` in `dir` with the format's extension.
pub fn output_path(dir: &Path, stem: &str, format: Format) -> PathBuf {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "jsonl",
    };
    dir.join(format!("{stem}.{ext}"))
}

fn preamble(header: &Header, columns: &[&str], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut out = header.csv_line().into_bytes();
            out.push(b'\n');
            let mut w = csv::Writer::from_writer(out);
            w.write_record(columns).map_err(|e| csv_error("<memory>", e))?;
            Ok(w.into_inner().expect("in-memory writer"))
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Meta<'a> {
                meta: &'a Header,
                columns: &'a [&'a str],
            }
            let mut out = serde_json::to_vec(&Meta { meta: header, columns }).expect("header serializes");
            out.push(b'\n');
            Ok(out)
        }
    }
}

fn encode_rows<R: Record>(rows: &[R], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.write_record(row.csv_fields()).map_err(|e| csv_error("<memory>", e))?;
            }
            Ok(w.into_inner().expect("in-memory writer"))
        }
        Format::Json => {
            let mut out = Vec::new();
            for row in rows {
                serde_json::to_writer(&mut out, row).expect("row serializes");
                out.push(b'\n');
            }
            Ok(out)
        }
    }
}

fn csv_error(path: impl Into<PathBuf>, source: csv::Error) -> Error {
    Error::Csv { path: path.into(), source }
}

/// Whole-table bytes, as they would be written to disk.
pub fn render_table<R: Record>(header: &Header, rows: &[R], format: Format) -> Result<Vec<u8>> {
    let mut out = preamble(header, R::COLUMNS, format)?;
    out.extend(encode_rows(rows, format)?);
    Ok(out)
}

pub fn write_table<R: Record>(path: &Path, header: &Header, rows: &[R], format: Format) -> Result<()> {
    let bytes = render_table(header, rows, format)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Summary row with the external column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub epsilon: f64,
    #[serde(rename = "pro_NIN")]
    pub pro_nin: f64,
    #[serde(rename = "pro_NINL")]
    pub pro_ninl: f64,
    #[serde(rename = "pro_NIL")]
    pub pro_nil: f64,
    #[serde(rename = "x_LLM")]
    pub x_llm: f64,
    pub category: Group,
    pub node_diff: Option<f64>,
    pub node_conv: Option<f64>,
    pub node_sd: Option<f64>,
    pub node_clus: Option<f64>,
    #[serde(rename = "S")]
    pub s: usize,
}

impl From<&SummaryRow> for SummaryRecord {
    fn from(r: &SummaryRow) -> Self {
        Self {
            n: r.n,
            t: r.t,
            epsilon: r.epsilon,
            pro_nin: r.pro_nin,
            pro_ninl: r.pro_ninl,
            pro_nil: r.pro_nil,
            x_llm: r.x_llm,
            category: r.set.group,
            node_diff: r.set.node_diff,
            node_conv: r.set.node_conv,
            node_sd: r.set.node_sd,
            node_clus: r.set.node_clus,
            s: r.set.repeats,
        }
    }
}

impl From<SummaryRecord> for SummaryRow {
    fn from(r: SummaryRecord) -> Self {
        Self {
            n: r.n,
            t: r.t,
            epsilon: r.epsilon,
            pro_nin: r.pro_nin,
            pro_ninl: r.pro_ninl,
            pro_nil: r.pro_nil,
            x_llm: r.x_llm,
            set: IndicatorSet {
                group: r.category,
                node_diff: r.node_diff,
                node_conv: r.node_conv,
                node_sd: r.node_sd,
                node_clus: r.node_clus,
                repeats: r.s,
            },
        }
    }
}

impl Record for SummaryRecord {
    const COLUMNS: &'static [&'static str] = &[
        "N", "T", "epsilon", "pro_NIN", "pro_NINL", "pro_NIL", "x_LLM", "category", "node_diff", "node_conv",
        "node_sd", "node_clus", "S",
    ];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.t.to_string(),
            format_sig(self.epsilon),
            format_sig(self.pro_nin),
            format_sig(self.pro_ninl),
            format_sig(self.pro_nil),
            format_sig(self.x_llm),
            self.category.to_string(),
            format_opt(self.node_diff),
            format_opt(self.node_conv),
            format_opt(self.node_sd),
            format_opt(self.node_clus),
            self.s.to_string(),
        ]
    }
}

impl SummaryRecord {
    fn from_csv(fields: &csv::StringRecord) -> Result<Self> {
        let f = |i: usize| fields.get(i).unwrap_or("");
        let int = |i: usize| -> Result<usize> {
            f(i).parse().map_err(|_| Error::Schema(format!("`{}` is not a count", f(i))))
        };
        let num = |i: usize| -> Result<f64> {
            parse_opt(f(i))?.ok_or_else(|| Error::Schema(format!("missing value in column {}", Self::COLUMNS[i])))
        };
        Ok(Self {
            n: int(0)?,
            t: int(1)?,
            epsilon: num(2)?,
            pro_nin: num(3)?,
            pro_ninl: num(4)?,
            pro_nil: num(5)?,
            x_llm: num(6)?,
            category: f(7).parse().map_err(|_| Error::Schema(format!("unknown category `{}`", f(7))))?,
            node_diff: parse_opt(f(8))?,
            node_conv: parse_opt(f(9))?,
            node_sd: parse_opt(f(10))?,
            node_clus: parse_opt(f(11))?,
            s: int(12)?,
        })
    }
}

pub fn summary_records(rows: &[SummaryRow]) -> Vec<SummaryRecord> {
    rows.iter().map(SummaryRecord::from).collect()
}

/// Reads a summary file written by `sweep` (CSV or JSON Lines).
pub fn read_summary(path: &Path) -> Result<(Option<Header>, Vec<SummaryRow>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    if first.trim_start().starts_with('{') {
        return read_summary_jsonl(path, &first, reader);
    }

    let header = Header::parse_csv_line(first.trim_end());
    let text = if header.is_some() {
        let mut rest = String::new();
        std::io::Read::read_to_string(&mut reader, &mut rest).map_err(|e| Error::io(path, e))?;
        rest
    } else {
        fs::read_to_string(path).map_err(|e| Error::io(path, e))?
    };
    let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let columns = csv.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = SummaryRecord::COLUMNS;
    if columns.iter().ne(expected.iter().copied()) {
        let missing: Vec<&str> = expected.iter().copied().filter(|c| !columns.iter().any(|h| h == *c)).collect();
        return Err(Error::Schema(format!(
            "{}: expected columns {}; missing {:?}",
            path.display(),
            expected.join(","),
            missing
        )));
    }
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        rows.push(SummaryRecord::from_csv(&record)?.into());
    }
    Ok((header, rows))
}

fn read_summary_jsonl(path: &Path, first: &str, reader: impl BufRead) -> Result<(Option<Header>, Vec<SummaryRow>)> {
    #[derive(Deserialize)]
    struct Meta {
        meta: Header,
    }
    let meta: Meta = serde_json::from_str(first).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SummaryRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("{} line {}: {e}", path.display(), i + 2)))?;
        rows.push(record.into());
    }
    Ok((Some(meta.meta), rows))
}

/// Per-iteration series row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub scenario: String,
    pub t: usize,
    pub mean_opinion: f64,
    pub mean_abs_change: f64,
    pub std_dev: f64,
    pub n_clusters: f64,
}

impl Record for SeriesRecord {
    const COLUMNS: &'static [&'static str] =
        &["scenario", "t", "mean_opinion", "mean_abs_change", "std_dev", "n_clusters"];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.scenario.clone(),
            self.t.to_string(),
            format_sig(self.mean_opinion),
            format_sig(self.mean_abs_change),
            format_sig(self.std_dev),
            format_sig(self.n_clusters),
        ]
    }
}

pub fn series_records(scenario: &str, series: &Series) -> Vec<SeriesRecord> {
    (0..series.len())
        .map(|t| SeriesRecord {
            scenario: scenario.into(),
            t,
            mean_opinion: series.mean_opinion[t],
            mean_abs_change: series.mean_abs_change[t],
            std_dev: series.std_dev[t],
            n_clusters: series.n_clusters[t],
        })
        .collect()
}

/// Reads a series CSV back.
pub fn read_series_csv(path: &Path) -> Result<Vec<SeriesRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let columns = csv.headers().map_err(|e| csv_error(path, e))?.clone();
    if columns.iter().ne(SeriesRecord::COLUMNS.iter().copied()) {
        return Err(Error::Schema(format!(
            "{}: expected columns {}",
            path.display(),
            SeriesRecord::COLUMNS.join(",")
        )));
    }
    csv.records()
        .map(|r| {
            let r = r.map_err(|e| csv_error(path, e))?;
            let num = |i: usize| parse_opt(&r[i])?.ok_or_else(|| Error::Schema("missing series value".into()));
            Ok(SeriesRecord {
                scenario: r[0].to_string(),
                t: r[1].parse().map_err(|_| Error::Schema(format!("`{}` is not an iteration", &r[1])))?,
                mean_opinion: num(2)?,
                mean_abs_change: num(3)?,
                std_dev: num(4)?,
                n_clusters: num(5)?,
            })
        })
        .collect()
}

/// One agent's opinion at one iteration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub run_id: usize,
    pub t: usize,
    pub agent_id: usize,
    pub category: String,
    pub opinion: f64,
}

impl Record for TrajectoryRecord {
    const COLUMNS: &'static [&'static str] = &["run_id", "t", "agent_id", "category", "opinion"];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.run_id.to_string(),
            self.t.to_string(),
            self.agent_id.to_string(),
            self.category.clone(),
            format_sig(self.opinion),
        ]
    }
}

pub fn trajectory_records(run_id: usize, traj: &Trajectory) -> Vec<TrajectoryRecord> {
    let mut out = Vec::with_capacity(traj.n() * traj.iterations());
    for (t, row) in traj.rows().enumerate() {
        for (agent_id, &opinion) in row.iter().enumerate() {
            out.push(TrajectoryRecord {
                run_id,
                t,
                agent_id,
                category: traj.categories()[agent_id].to_string(),
                opinion,
            });
        }
    }
    out
}

impl Record for CorrelationCell {
    const COLUMNS: &'static [&'static str] = &["parameter", "indicator", "category", "r", "p_value", "stars", "n"];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.parameter.to_string(),
            self.indicator.to_string(),
            self.category.to_string(),
            format_opt(self.r),
            format_opt(self.p_value),
            self.stars.map_or("nan", |s| s.as_str()).to_string(),
            self.n.to_string(),
        ]
    }
}

impl Record for ExtremeReport {
    const COLUMNS: &'static [&'static str] = &[
        "indicator", "category", "target", "epsilon", "pro_NIN", "pro_NINL", "pro_NIL", "x_LLM", "n_combos", "tied",
    ];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.indicator.to_string(),
            self.category.to_string(),
            self.target.to_string(),
            format_sig(self.epsilon),
            format_sig(self.pro_nin),
            format_sig(self.pro_ninl),
            format_sig(self.pro_nil),
            format_sig(self.x_llm),
            self.n_combos.to_string(),
            self.tied.to_string(),
        ]
    }
}

/// Family summary row; `sd_ratio` is the family's mean node_sd over the
/// no-use family's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub family: String,
    pub n: usize,
    pub mean_node_sd: f64,
    pub mean_node_clus: f64,
    pub sd_ratio: f64,
}

impl Record for FamilyRecord {
    const COLUMNS: &'static [&'static str] = &["family", "n", "mean_node_sd", "mean_node_clus", "sd_ratio"];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.family.clone(),
            self.n.to_string(),
            format_sig(self.mean_node_sd),
            format_sig(self.mean_node_clus),
            format_sig(self.sd_ratio),
        ]
    }
}

pub fn family_records(report: &StrategyReport) -> Vec<FamilyRecord> {
    let base = report.family(crate::analysis::Family::NoUse).mean_node_sd;
    report
        .families
        .iter()
        .map(|f: &FamilyStats| FamilyRecord {
            family: f.family.as_str().into(),
            n: f.n,
            mean_node_sd: f.mean_node_sd,
            mean_node_clus: f.mean_node_clus,
            sd_ratio: f.mean_node_sd / base,
        })
        .collect()
}

impl Record for FamilyComparison {
    const COLUMNS: &'static [&'static str] =
        &["indicator", "family_a", "family_b", "mean_a", "mean_b", "t", "df", "p_two_sided", "p_greater"];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.indicator.to_string(),
            self.a.as_str().into(),
            self.b.as_str().into(),
            format_sig(self.test.mean_a),
            format_sig(self.test.mean_b),
            format_sig(self.test.t),
            format_sig(self.test.df),
            format_sig(self.test.p_two_sided),
            format_sig(self.test.p_greater),
        ]
    }
}

impl Record for InterventionOutcome {
    const COLUMNS: &'static [&'static str] = &[
        "kind", "count", "mean", "std_dev", "min", "max", "span", "sign_wins", "sign_losses", "sign_p_greater",
        "welch_p_greater",
    ];

    fn csv_fields(&self) -> Vec<String> {
        let sign = self.sign_vs_none;
        vec![
            self.spec.kind.to_string(),
            self.count.to_string(),
            format_sig(self.mean),
            format_sig(self.std_dev),
            format_sig(self.min),
            format_sig(self.max),
            format_sig(self.span()),
            sign.map_or("nan".into(), |s| s.wins.to_string()),
            sign.map_or("nan".into(), |s| s.losses.to_string()),
            format_opt(sign.map(|s| s.p_greater)),
            format_opt(self.welch_vs_none.map(|w| w.p_greater)),
        ]
    }
}

/// Final mean opinion of one intervention run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionRunRecord {
    pub kind: String,
    pub repeat: usize,
    pub final_mean: f64,
}

impl Record for InterventionRunRecord {
    const COLUMNS: &'static [&'static str] = &["kind", "repeat", "final_mean"];

    fn csv_fields(&self) -> Vec<String> {
        vec![self.kind.clone(), self.repeat.to_string(), format_sig(self.final_mean)]
    }
}

pub fn intervention_run_records(outcomes: &[InterventionOutcome]) -> Vec<InterventionRunRecord> {
    outcomes
        .iter()
        .flat_map(|o| {
            o.final_means.iter().enumerate().map(|(repeat, &final_mean)| InterventionRunRecord {
                kind: o.spec.kind.to_string(),
                repeat,
                final_mean,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetRecord {
    pub name: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub epsilon: f64,
    #[serde(rename = "pro_NIN")]
    pub pro_nin: f64,
    #[serde(rename = "pro_NINL")]
    pub pro_ninl: f64,
    #[serde(rename = "pro_NIL")]
    pub pro_nil: f64,
    #[serde(rename = "x_LLM")]
    pub x_llm: f64,
    pub classic_hk: bool,
}

impl From<&Preset> for PresetRecord {
    fn from(p: &Preset) -> Self {
        let s = &p.params;
        Self {
            name: p.name.into(),
            n: s.n,
            t: s.t,
            epsilon: s.epsilon,
            pro_nin: s.pro_nin,
            pro_ninl: s.pro_ninl,
            pro_nil: s.pro_nil,
            x_llm: s.x_llm,
            classic_hk: s.classic_hk,
        }
    }
}

impl Record for PresetRecord {
    const COLUMNS: &'static [&'static str] =
        &["name", "N", "T", "epsilon", "pro_NIN", "pro_NINL", "pro_NIL", "x_LLM", "classic_hk"];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.name.clone(),
            self.n.to_string(),
            self.t.to_string(),
            format_sig(self.epsilon),
            format_sig(self.pro_nin),
            format_sig(self.pro_ninl),
            format_sig(self.pro_nil),
            format_sig(self.x_llm),
            self.classic_hk.to_string(),
        ]
    }
}

/// Checkpoint of a streamed sweep, stored next to the output as `<out>.index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepIndex {
    pub config_hash: String,
    pub format: Format,
    pub total_combos: usize,
    pub completed_combos: usize,
    /// Length of the output file after the last completed chunk.
    pub bytes: u64,
}

pub fn index_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".index");
    PathBuf::from(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepProgress {
    pub total_combos: usize,
    /// Combinations already on disk when this call started.
    pub resumed_from: usize,
    pub completed_combos: usize,
}

impl SweepProgress {
    pub fn finished(&self) -> bool {
        self.completed_combos == self.total_combos
    }
}

fn write_index(path: &Path, index: &SweepIndex) -> Result<()> {
    let tmp = path.with_extension("index.tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(index).expect("index serializes")).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_index(path: &Path) -> Option<SweepIndex> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Runs the configured grid and streams summary rows to `out` in chunks of
/// `chunk` combinations, in combination order. A matching index file left by
/// an interrupted run is picked up and only the missing combinations are
/// computed. `stop_after` bounds the number of chunks processed in this call.
pub fn stream_sweep(
    config: &RunConfig,
    header: &Header,
    out: &Path,
    chunk: usize,
    stop_after: Option<usize>,
    mut on_chunk: impl FnMut(&SweepProgress),
) -> Result<SweepProgress> {
    let combos = sweep::enumerate_grid(&config.grid).map_err(|e| match e {
        Error::Config { key, message } => Error::config(format!("grid.{key}"), message),
        other => other,
    })?;
    let total = combos.len();
    let chunk = chunk.max(1);
    let index_file = index_path(out);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let resume = read_index(&index_file).filter(|ix| {
        ix.config_hash == header.config_hash
            && ix.format == config.format
            && ix.total_combos == total
            && fs::metadata(out).map(|m| m.len() >= ix.bytes).unwrap_or(false)
    });
    let (mut file, mut index) = match resume {
        Some(ix) => {
            let mut file = OpenOptions::new().write(true).open(out).map_err(|e| Error::io(out, e))?;
            file.set_len(ix.bytes).map_err(|e| Error::io(out, e))?;
            file.seek(SeekFrom::End(0)).map_err(|e| Error::io(out, e))?;
            (file, ix)
        }
        None => {
            let mut file = File::create(out).map_err(|e| Error::io(out, e))?;
            let pre = preamble(header, SummaryRecord::COLUMNS, config.format)?;
            file.write_all(&pre).map_err(|e| Error::io(out, e))?;
            let ix = SweepIndex {
                config_hash: header.config_hash.clone(),
                format: config.format,
                total_combos: total,
                completed_combos: 0,
                bytes: pre.len() as u64,
            };
            write_index(&index_file, &ix)?;
            (file, ix)
        }
    };

    let resumed_from = index.completed_combos;
    let pool = sweep::thread_pool(config.workers)?;
    let mut chunks_done = 0;
    while index.completed_combos < total && stop_after.is_none_or(|n| chunks_done < n) {
        let start = index.completed_combos;
        let end = (start + chunk).min(total);
        let results = sweep::run_combos(&pool, &combos[start..end], start, config.repeats, config.seed)?;
        let rows = crate::analysis::summary_rows(&results);
        let bytes = encode_rows(&summary_records(&rows), config.format)?;
        file.write_all(&bytes).map_err(|e| Error::io(out, e))?;
        file.flush().map_err(|e| Error::io(out, e))?;
        file.sync_data().map_err(|e| Error::io(out, e))?;
        index.completed_combos = end;
        index.bytes += bytes.len() as u64;
        write_index(&index_file, &index)?;
        chunks_done += 1;
        on_chunk(&SweepProgress { total_combos: total, resumed_from, completed_combos: end });
    }

    let progress = SweepProgress { total_combos: total, resumed_from, completed_combos: index.completed_combos };
    if progress.finished() {
        fs::remove_file(&index_file).map_err(|e| Error::io(&index_file, e))?;
    }
    Ok(progress)
}
