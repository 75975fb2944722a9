use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lrdn::experiment::{run_experiment, sha256_json, ExperimentConfig};
use lrdn::model::{random_model, true_graph, validate_with, DirectedGraph, LrdnModel};
use lrdn::polymat::DEFAULT_ZERO_TOL;
use lrdn::sim::{simulate, SeriesMeta, TimeSeries};
use lrdn::topology::{
    compare_graphs, decide_graph, partition_select, write_edge_tests_csv, GraphDecision, GraphMetrics, Partition,
};
use lrdn::wiener::{estimate_h, estimate_s, FilterEstimate};
use lrdn::LrdnError;

/// Low-rank dynamical networks: generate, simulate, estimate and recover topology.
#[derive(Parser)]
#[command(name = "lrdn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random model and write it with its true graph.
    Generate(Common),
    /// Simulate a model to CSV plus a metadata sidecar.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Model JSON written by `generate`.
        #[arg(long)]
        model: PathBuf,
    },
    /// Select the partition of raw CSV data, then estimate filters and decide the graph.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Lag window for partition selection (defaults to max(order_p, 1)).
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long, default_value_t = 1e-6)]
        rank_tol: f64,
    },
    /// Estimate filters and decide the graph for data with a known partition.
    Decide {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Metadata sidecar (defaults to `<data>.meta.json`).
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Compare an estimated graph with the truth.
    Compare {
        #[arg(long)]
        estimated: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Directory for `metrics.json`; nothing is written when absent.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run the Monte-Carlo topology-recovery experiment.
    RunExperiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON, or TOML by extension); defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed relevant to the subcommand.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to the config's `outputs`, then `.`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Format of the summary printed to stdout.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Dot,
}

/// Failures classified for the exit code.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<LrdnError>() {
            Some(le) if le.is_numerical() => Failure::Numerical(e),
            _ => Failure::Config(e),
        }
    }
}

impl From<LrdnError> for Failure {
    fn from(e: LrdnError) -> Self {
        anyhow::Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Config(e.into())
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(c) => cmd_generate(&c),
        Command::Simulate { common, model } => cmd_simulate(&common, &model),
        Command::Estimate {
            common,
            data,
            max_lag,
            rank_tol,
        } => cmd_estimate(&common, &data, max_lag, rank_tol),
        Command::Decide { common, data, meta } => cmd_decide(&common, &data, meta.as_deref()),
        Command::Compare {
            estimated,
            truth,
            out_dir,
            format,
        } => cmd_compare(&estimated, &truth, out_dir.as_deref(), format),
        Command::RunExperiment { common, trials } => cmd_run_experiment(&common, trials),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    cfg.validate().map_err(|e| Failure::Config(e.into()))?;
    Ok(cfg)
}

impl Common {
    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| cfg.outputs.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn pretty<T: serde::Serialize>(value: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn write_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig, seed: u64, files: &[&str]) -> CliResult<()> {
    let manifest = json!({
        "command": command,
        "config_hash": cfg.hash(),
        "seed": seed,
        "files": files,
    });
    write_file(dir, "manifest.json", pretty(&manifest)?)
}

fn graph_summary(graph: &DirectedGraph, format: Format) -> CliResult<String> {
    Ok(match format {
        Format::Json => pretty(graph)?,
        Format::Dot => graph.to_dot(None),
        Format::Csv => {
            let mut out = String::from("target,source\n");
            for (i, j) in graph.edges() {
                out.push_str(&format!("{i},{j}\n"));
            }
            out
        }
    })
}

fn cmd_generate(c: &Common) -> CliResult<()> {
    let mut cfg = load_config(c.config.as_deref())?;
    let out = c.out_dir(&cfg);
    if let Some(seed) = c.seed {
        cfg.generator.rng_seed = seed;
    }
    let model = random_model(&cfg.generator)?;
    let report = validate_with(&model, cfg.generator.horizon, cfg.generator.decay_tol);
    eprint!("{report}");
    let graph = true_graph(&model, DEFAULT_ZERO_TOL);
    let comment = format!("model {} seed {}", model.hash(), cfg.generator.rng_seed);
    write_file(&out, "model.json", pretty(&model)?)?;
    write_file(&out, "graph.json", pretty(&graph)?)?;
    write_file(&out, "graph.dot", graph.to_dot(Some(&comment)))?;
    write_file(&out, "validation.json", pretty(&report)?)?;
    write_manifest(
        &out,
        "generate",
        &cfg,
        cfg.generator.rng_seed,
        &["model.json", "graph.json", "graph.dot", "validation.json"],
    )?;
    print!("{}", graph_summary(&graph, c.format)?);
    Ok(())
}

fn cmd_simulate(c: &Common, model_path: &Path) -> CliResult<()> {
    if c.format == Format::Dot {
        return Err(Failure::Config(anyhow!("simulate has no DOT output")));
    }
    let cfg = load_config(c.config.as_deref())?;
    let out = c.out_dir(&cfg);
    let model: LrdnModel = read_json(model_path)?;
    let seed = c.seed.unwrap_or(cfg.master_seed);
    let ts = simulate(&model, cfg.sim.num_samples, cfg.sim.burn_in, seed)?;
    let meta = ts.meta(Some(model.hash()));
    let mut csv = Vec::new();
    ts.write_csv(&mut csv)?;
    write_file(&out, "series.csv", &csv)?;
    write_file(&out, "series.csv.meta.json", pretty(&meta)?)?;
    write_manifest(&out, "simulate", &cfg, seed, &["series.csv", "series.csv.meta.json"])?;
    match c.format {
        Format::Json => print!("{}", pretty(&meta)?),
        Format::Csv => print!("{}", String::from_utf8_lossy(&csv)),
        Format::Dot => unreachable!("rejected above"),
    }
    Ok(())
}

struct Pipeline {
    h: Option<FilterEstimate>,
    s: FilterEstimate,
    decision: GraphDecision,
}

fn run_pipeline(ts: &TimeSeries, cfg: &ExperimentConfig) -> CliResult<Pipeline> {
    let h = if ts.m > 0 { Some(estimate_h(ts, cfg.estimation)?) } else { None };
    let s = estimate_s(ts, cfg.estimation)?;
    let decision = decide_graph(h.as_ref(), &s, ts, &cfg.decision)?;
    Ok(Pipeline { h, s, decision })
}

/// Writes filter estimates, the decided graph and the edge tests; returns the file names.
fn write_pipeline(dir: &Path, p: &Pipeline, comment: &str) -> CliResult<Vec<&'static str>> {
    let mut files = Vec::new();
    if let Some(h) = &p.h {
        write_file(dir, "filter_h.json", pretty(&h.to_json())?)?;
        files.push("filter_h.json");
    }
    write_file(dir, "filter_s.json", pretty(&p.s.to_json())?)?;
    write_file(dir, "graph.json", pretty(&p.decision.graph)?)?;
    write_file(dir, "graph.dot", p.decision.graph.to_dot(Some(comment)))?;
    let mut tests = Vec::new();
    write_edge_tests_csv(&p.decision.tests, &mut tests)?;
    write_file(dir, "edge_tests.csv", tests)?;
    files.extend(["filter_s.json", "graph.json", "graph.dot", "edge_tests.csv"]);
    Ok(files)
}

fn read_series(path: &Path, meta: Option<&SeriesMeta>) -> CliResult<TimeSeries> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(TimeSeries::read_csv(file, meta).with_context(|| format!("reading {}", path.display()))?)
}

fn cmd_estimate(c: &Common, data: &Path, max_lag: Option<usize>, rank_tol: f64) -> CliResult<()> {
    let cfg = load_config(c.config.as_deref())?;
    let out = c.out_dir(&cfg);
    let raw = read_series(data, None)?;
    let q = max_lag.unwrap_or(cfg.estimation.order_p.max(1));
    let partition: Partition = partition_select(&raw, q, rank_tol)?;
    let ts = partition.apply(&raw)?;
    let pipeline = run_pipeline(&ts, &cfg)?;
    let seed = c.seed.unwrap_or(raw.seed);
    let comment = format!(
        "estimated from {}; nodes renumbered as m_indices then l_indices",
        data.display()
    );
    write_file(&out, "partition.json", pretty(&partition)?)?;
    let mut files = vec!["partition.json"];
    files.extend(write_pipeline(&out, &pipeline, &comment)?);
    write_manifest(&out, "estimate", &cfg, seed, &files)?;
    print!("{}", graph_summary(&pipeline.decision.graph, c.format)?);
    Ok(())
}

fn cmd_decide(c: &Common, data: &Path, meta: Option<&Path>) -> CliResult<()> {
    let cfg = load_config(c.config.as_deref())?;
    let out = c.out_dir(&cfg);
    let meta_path = meta.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut p = data.as_os_str().to_owned();
        p.push(".meta.json");
        PathBuf::from(p)
    });
    let meta: SeriesMeta = read_json(&meta_path)?;
    let ts = read_series(data, Some(&meta))?;
    if ts.num_samples() != meta.num_samples {
        return Err(Failure::Config(anyhow!(
            "{} has {} samples, metadata says {}",
            data.display(),
            ts.num_samples(),
            meta.num_samples
        )));
    }
    let pipeline = run_pipeline(&ts, &cfg)?;
    let comment = format!("decided from {}", data.display());
    let files = write_pipeline(&out, &pipeline, &comment)?;
    write_manifest(&out, "decide", &cfg, c.seed.unwrap_or(meta.seed), &files)?;
    print!("{}", graph_summary(&pipeline.decision.graph, c.format)?);
    Ok(())
}

fn metrics_csv(m: &GraphMetrics) -> String {
    format!(
        "true_positives,false_positives,false_negatives,precision,recall,exact_match,precision_defined,recall_defined\n{},{},{},{},{},{},{},{}\n",
        m.true_positives,
        m.false_positives,
        m.false_negatives,
        m.precision,
        m.recall,
        m.exact_match,
        m.precision_defined,
        m.recall_defined
    )
}

fn cmd_compare(estimated: &Path, truth: &Path, out_dir: Option<&Path>, format: Format) -> CliResult<()> {
    if format == Format::Dot {
        return Err(Failure::Config(anyhow!("compare has no DOT output")));
    }
    let est: DirectedGraph = read_json(estimated)?;
    let tru: DirectedGraph = read_json(truth)?;
    let metrics = compare_graphs(&est, &tru).map_err(|e| Failure::Config(e.into()))?;
    if let Some(dir) = out_dir {
        let hashed = json!({
            "metrics": metrics,
            "estimated_hash": sha256_json(&est),
            "truth_hash": sha256_json(&tru),
        });
        write_file(dir, "metrics.json", pretty(&hashed)?)?;
    }
    match format {
        Format::Json => print!("{}", pretty(&metrics)?),
        Format::Csv => print!("{}", metrics_csv(&metrics)),
        Format::Dot => unreachable!("rejected above"),
    }
    Ok(())
}

fn cmd_run_experiment(c: &Common, trials: Option<usize>) -> CliResult<()> {
    if c.format == Format::Dot {
        return Err(Failure::Config(anyhow!("run-experiment has no DOT output")));
    }
    let mut cfg = load_config(c.config.as_deref())?;
    let out = c.out_dir(&cfg);
    if let Some(seed) = c.seed {
        cfg.master_seed = seed;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Err(e) = cfg.validate() {
        return Err(Failure::Config(e.into()));
    }
    let result = run_experiment(&cfg).map_err(|e| Failure::Config(e.into()))?;
    result.write(&out)?;
    write_manifest(
        &out,
        "run-experiment",
        &cfg,
        cfg.master_seed,
        &["config.json", "trials.csv", "aggregate.json", "timing.json"],
    )?;
    if result.aggregate.failed > 0 {
        eprintln!("{} of {} trials failed; see trials.csv", result.aggregate.failed, result.aggregate.trials);
    }
    match c.format {
        Format::Json => print!("{}", pretty(&result.aggregate)?),
        Format::Csv => {
            let mut out = Vec::new();
            result.write_trials_csv(&mut out)?;
            print!("{}", String::from_utf8_lossy(&out));
        }
        Format::Dot => unreachable!("rejected above"),
    }
    Ok(())
}
