use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use opinion_sim::analysis::{self, SummaryRow, Target};
use opinion_sim::config::{self, Format, Overrides, RunConfig};
use opinion_sim::indicators::{self, Group, Indicator, IndicatorSet};
use opinion_sim::interventions;
use opinion_sim::io::{self, Header};
use opinion_sim::model::{self, Series};
use opinion_sim::{rng, sweep, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "opinion-sim", version, about = "Opinion dynamics under a constant LLM opinion source")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    repeats: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Random events on or off.
    #[arg(long, global = true, value_enum)]
    events: Option<Switch>,
    /// Small repeat count for quick checks.
    #[arg(long, global = true)]
    ci_profile: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one scenario; write per-iteration series and indicators.
    Run {
        /// Scenario preset to start from (see `presets`).
        #[arg(long)]
        preset: Option<String>,
        /// Also write every agent's opinion at every iteration.
        #[arg(long)]
        trajectory: bool,
        /// Also write the interaction graph of each repeat as an edge list.
        #[arg(long)]
        graph: bool,
    },
    /// Run the parameter grid and stream the summary table.
    Sweep {
        /// Grid configuration (same format as --config).
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Output file; defaults to summary.csv in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = io::SWEEP_CHUNK)]
        chunk: usize,
    },
    /// Pearson correlations of parameters and indicators.
    Correlate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Averaged parameters of the extreme combinations.
    Extremes {
        #[arg(long)]
        input: PathBuf,
        /// node_diff, node_conv, node_sd or node_clus; all when omitted.
        #[arg(long)]
        indicator: Option<String>,
        /// min, max, polarization or value=<x>; min and max when omitted.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value = "ALL")]
        category: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Compare the three single-strategy populations.
    ExtremeStrategies {
        #[arg(long)]
        input: PathBuf,
    },
    /// Inject opposite, neutral or random agents and compare with no injection.
    Intervene {
        #[arg(long)]
        preset: Option<String>,
        /// Comma-separated kinds; defaults to the configured list.
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<String>>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// List the reference scenarios, optionally running them all.
    Presets {
        /// Run every preset and write their averaged series.
        #[arg(long)]
        series: bool,
    },
}

impl GlobalArgs {
    fn overrides(&self, preset: Option<&String>) -> Overrides {
        Overrides {
            seed: self.seed,
            workers: self.workers,
            repeats: self.repeats,
            ci_profile: self.ci_profile,
            format: self.format.map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            }),
            out_dir: self.out_dir.clone(),
            events: self.events.map(|s| matches!(s, Switch::On)),
            preset: preset.cloned(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Run { preset, trajectory, graph } => {
            let cfg = config::parse_config(g.config.as_deref(), &g.overrides(preset.as_ref()))?;
            cmd_run(&cfg, *trajectory, *graph)
        }
        Command::Sweep { grid, out, chunk } => {
            let path = grid.as_deref().or(g.config.as_deref());
            let cfg = config::parse_config(path, &g.overrides(None))?;
            cmd_sweep(&cfg, out.as_deref(), *chunk)
        }
        Command::Correlate { input } => {
            let cfg = config::parse_config(g.config.as_deref(), &g.overrides(None))?;
            let (header, rows) = load(input, "correlate")?;
            let cells = analysis::correlation_matrix(&rows)?;
            emit(&cfg, "correlation", &header, &cells)
        }
        Command::Extremes { input, indicator, target, category, k } => {
            let cfg = config::parse_config(g.config.as_deref(), &g.overrides(None))?;
            let (header, rows) = load(input, "extremes")?;
            let group: Group = category.parse().map_err(|_| Error::config("category", format!("unknown category `{category}`")))?;
            let indicators = match indicator {
                Some(name) => vec![name.parse::<Indicator>()?],
                None => Indicator::EVERY.to_vec(),
            };
            let targets = match target {
                Some(t) => vec![t.parse::<Target>()?],
                None => vec![Target::Min, Target::Max],
            };
            let mut reports = Vec::new();
            for &ind in &indicators {
                for &t in &targets {
                    reports.push(analysis::extremal_combos(&rows, ind, group, t, *k)?);
                }
            }
            emit(&cfg, "extremes", &header, &reports)
        }
        Command::ExtremeStrategies { input } => {
            let cfg = config::parse_config(g.config.as_deref(), &g.overrides(None))?;
            let (header, rows) = load(input, "extreme-strategies")?;
            let report = analysis::compare_extreme_strategies(&rows)?;
            emit(&cfg, "strategy_families", &header, &io::family_records(&report))?;
            emit(&cfg, "strategy_tests", &header, &report.comparisons)?;
            eprintln!("partial/no-use node_sd ratio: {:.4}", report.diversity_ratio);
            Ok(())
        }
        Command::Intervene { preset, kinds, count } => {
            let mut cfg = config::parse_config(g.config.as_deref(), &g.overrides(preset.as_ref()))?;
            if let Some(kinds) = kinds {
                cfg.intervention.kinds = kinds.iter().map(|k| k.parse()).collect::<Result<_>>()?;
            }
            if count.is_some() {
                cfg.intervention.count = *count;
            }
            cfg.validate()?;
            let outcomes = interventions::run_intervention_study(
                &cfg.scenario,
                &cfg.intervention.specs(),
                cfg.repeats,
                cfg.seed,
                cfg.workers,
            )?;
            let header = Header::new("intervene", &cfg);
            emit(&cfg, "intervention", &header, &outcomes)?;
            emit(&cfg, "intervention_runs", &header, &io::intervention_run_records(&outcomes))
        }
        Command::Presets { series } => {
            let cfg = config::parse_config(g.config.as_deref(), &g.overrides(None))?;
            cmd_presets(&cfg, *series)
        }
    }
}

fn emit<R: io::Record>(cfg: &RunConfig, stem: &str, header: &Header, rows: &[R]) -> Result<()> {
    let path = io::output_path(&cfg.out_dir, stem, cfg.format);
    io::write_table(&path, header, rows, cfg.format)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Reads a summary table; outputs derived from it carry its provenance.
fn load(input: &Path, command: &str) -> Result<(Header, Vec<SummaryRow>)> {
    let (header, rows) = io::read_summary(input)?;
    let header = match header {
        Some(h) => Header { command: command.into(), ..h },
        None => Header {
            tool: io::TOOL_NAME.into(),
            version: io::TOOL_VERSION.into(),
            command: command.into(),
            config_hash: "unknown".into(),
            seed: 0,
        },
    };
    Ok((header, rows))
}

/// Repeats of one scenario: averaged series plus per-group indicators.
fn simulate(cfg: &RunConfig, params: &model::ScenarioParams, keep: bool) -> Result<(Series, [IndicatorSet; 4], Vec<model::Trajectory>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let runs: Vec<(Series, Vec<IndicatorSet>, Option<model::Trajectory>)> = pool.install(|| {
        (0..cfg.repeats)
            .into_par_iter()
            .map(|r| {
                let traj = model::run_scenario(params, rng::run_seed(cfg.seed, 0, r))
                    .map_err(|e| Error::Run { combo: 0, repeat: r, source: Box::new(e) })?;
                let sets = Group::EVERY.iter().map(|&g| indicators::run_indicators(&traj, g)).collect();
                Ok((traj.series(), sets, keep.then_some(traj)))
            })
            .collect::<Result<_>>()
    })?;
    let series: Vec<Series> = runs.iter().map(|r| r.0.clone()).collect();
    let sets = std::array::from_fn(|k| {
        let per: Vec<IndicatorSet> = runs.iter().map(|r| r.1[k]).collect();
        IndicatorSet::mean_of(&per).expect("at least one repeat")
    });
    let trajs = runs.into_iter().filter_map(|r| r.2).collect();
    Ok((Series::average(&series).expect("at least one repeat"), sets, trajs))
}

fn cmd_run(cfg: &RunConfig, trajectory: bool, graph: bool) -> Result<()> {
    let header = Header::new("run", cfg);
    let (series, sets, trajs) = simulate(cfg, &cfg.scenario, trajectory)?;
    emit(cfg, "series", &header, &io::series_records(&cfg.preset, &series))?;
    let p = &cfg.scenario;
    let rows: Vec<SummaryRow> = sets
        .iter()
        .map(|&set| SummaryRow {
            n: p.n,
            t: p.t,
            epsilon: p.epsilon,
            pro_nin: p.pro_nin,
            pro_ninl: p.pro_ninl,
            pro_nil: p.pro_nil,
            x_llm: p.x_llm,
            set,
        })
        .collect();
    emit(cfg, "indicators", &header, &io::summary_records(&rows))?;
    if trajectory {
        let records: Vec<io::TrajectoryRecord> =
            trajs.iter().enumerate().flat_map(|(r, t)| io::trajectory_records(r, t)).collect();
        emit(cfg, "trajectory", &header, &records)?;
    }
    if graph {
        for r in 0..cfg.repeats {
            let seed = rng::run_seed(cfg.seed, 0, r);
            let g = opinion_sim::network::generate_er(p.n, &p.graph, seed)?;
            let path = cfg.out_dir.join(format!("graph_{r}.edges"));
            std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            g.write_edge_list(std::io::BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
        }
        eprintln!("wrote {} edge lists to {}", cfg.repeats, cfg.out_dir.display());
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, out: Option<&Path>, chunk: usize) -> Result<()> {
    let header = Header::new("sweep", cfg);
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => io::output_path(&cfg.out_dir, "summary", cfg.format),
    };
    let progress = io::stream_sweep(cfg, &header, &path, chunk, None, |p| {
        eprintln!("{}/{} combinations", p.completed_combos, p.total_combos);
    })?;
    if progress.resumed_from > 0 {
        eprintln!("resumed after {} combinations", progress.resumed_from);
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_presets(cfg: &RunConfig, series: bool) -> Result<()> {
    let presets = sweep::scenario_presets();
    let header = Header::new("presets", cfg);
    let listing: Vec<io::PresetRecord> = presets.iter().map(io::PresetRecord::from).collect();
    emit(cfg, "presets", &header, &listing)?;
    if series {
        let mut records = Vec::new();
        for preset in &presets {
            let mut params = preset.params.clone();
            params.events = cfg.scenario.events;
            let (s, _, _) = simulate(cfg, &params, false)?;
            records.extend(io::series_records(preset.name, &s));
        }
        emit(cfg, "preset_series", &header, &records)?;
    }
    Ok(())
}
