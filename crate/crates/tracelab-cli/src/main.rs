//! `tracelab` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 scenario
//! predicate failed, 3 I/O or input-file error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracelab::config::ExperimentConfig;
use tracelab::experiments::{self, ScenarioOptions};
use tracelab::graph::{self, LoadOptions, SbmVariant};
use tracelab::policies::PolicySpec;
use tracelab::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_PREDICATE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "tracelab", version, about = "Sequential testing and isolation experiments on contact networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated network as an edge list.
    Generate(GenerateArgs),
    /// Run one policy for the configured number of replications.
    Run(RunArgs),
    /// Run several policies on paired seeds and report Ratio and Δ_Err.
    Compare(CompareArgs),
    /// Clustering, path length and components of an edge-list file.
    Metrics(MetricsArgs),
    /// Run a scripted scenario and check its predicate.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Generator {
    /// Watts-Strogatz: N D DELTA
    #[arg(long, num_args = 3, value_names = ["N", "D", "DELTA"])]
    ws: Option<Vec<String>>,
    /// Scale-free: N ALPHA
    #[arg(long, num_args = 2, value_names = ["N", "ALPHA"])]
    sf: Option<Vec<String>>,
    /// Stochastic block model: N M P1 P2
    #[arg(long, num_args = 4, value_names = ["N", "M", "P1", "P2"])]
    sbm: Option<Vec<String>>,
    /// Block model linking only successive clusters: N M P1 P2
    #[arg(long, num_args = 4, value_names = ["N", "M", "P1", "P2"])]
    vsbm: Option<Vec<String>>,
    /// Line: N
    #[arg(long, value_name = "N")]
    line: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    generator: Generator,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed (run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Replications (run.reps).
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory, created if absent.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ConfigArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Comma-separated policy names.
    #[arg(long, default_value = "rbex,reer,none", value_delimiter = ',')]
    policies: Vec<String>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Edge-list file.
    file: PathBuf,
    /// Day whose graph is measured.
    #[arg(long, default_value_t = 0)]
    day: usize,
}

#[derive(Args)]
struct ReproduceArgs {
    /// One of the scripted scenario names.
    scenario: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory for the raw numbers and resolved config.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Parse { .. } => Failure::Io(e.to_string()),
            Error::Config(list) => Failure::Usage(format!("invalid configuration:\n  {}", list.join("\n  "))),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn parse_field<T: std::str::FromStr>(flag: &str, v: &str) -> Result<T, Failure> {
    v.parse().map_err(|_| Failure::Usage(format!("--{flag}: cannot parse `{v}`")))
}

fn generate(args: &GenerateArgs) -> Result<u8, Failure> {
    // same generator stream as the network of a run with this seed
    let mut rng = experiments::stream_rng(args.seed, experiments::NETWORK_STREAM);
    let g = &args.generator;
    let net = if let Some(v) = &g.ws {
        graph::watts_strogatz(parse_field("ws", &v[0])?, parse_field("ws", &v[1])?, parse_field("ws", &v[2])?, &mut rng)?
    } else if let Some(v) = &g.sf {
        graph::scale_free(parse_field("sf", &v[0])?, parse_field("sf", &v[1])?, &mut rng)?
    } else if let Some(v) = g.sbm.as_ref().or(g.vsbm.as_ref()) {
        let variant = if g.sbm.is_some() { SbmVariant::Standard } else { SbmVariant::Chain };
        graph::sbm(
            parse_field("sbm", &v[0])?,
            parse_field("sbm", &v[1])?,
            parse_field("sbm", &v[2])?,
            parse_field("sbm", &v[3])?,
            variant,
            &mut rng,
        )?
    } else if let Some(n) = g.line {
        graph::line(n)?
    } else {
        return Err(Failure::Usage("one generator flag is required".into()));
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&args.out, net.to_edge_list())?;
    Ok(0)
}

fn resolve(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_text(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let mut errors = Vec::new();
    for kv in &args.set {
        match kv.split_once('=') {
            Some((k, v)) => {
                if let Err(e) = config.set(k.trim(), v) {
                    errors.push(format!("--set {}: {e}", k.trim()));
                }
            }
            None => errors.push(format!("--set {kv}: expected KEY=VALUE")),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors).into());
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(reps) = args.reps {
        config.reps = reps;
    }
    config.validate()?;
    Ok(config)
}

fn write_outputs<'a>(
    out: &Path,
    config: &ExperimentConfig,
    records: &[&'a experiments::RunRecord],
) -> Result<impl Fn(&str) -> Option<f64>, Failure> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.txt"), config.to_text())?;
    let mut csv = Vec::new();
    experiments::write_runs_csv(&mut csv, records.iter().copied())?;
    fs::write(out.join("runs.csv"), csv)?;
    let summary = experiments::summarize(config, records.iter().copied());
    fs::write(out.join("summary.json"), format!("{summary:#}\n"))?;
    Ok(move |key: &str| summary.get("metrics")?.get(key)?.as_f64())
}

fn run(args: &RunArgs) -> Result<u8, Failure> {
    let config = resolve(&args.common)?;
    let records = experiments::run_replications(&config)?;
    let summary = write_outputs(&args.common.out, &config, &records.iter().collect::<Vec<_>>())?;
    let label = config.policy_spec()?.label();
    if let Some(c) = summary(&format!("mean_final_cumulative.{label}")) {
        println!("{label}: mean C(T) = {c:.3} over {} runs", records.len());
    }
    Ok(0)
}

fn compare(args: &CompareArgs) -> Result<u8, Failure> {
    let config = resolve(&args.common)?;
    let specs = args
        .policies
        .iter()
        .map(|name| PolicySpec::parse(name.trim(), config.policy_share, config.policy_random))
        .collect::<Result<Vec<_>, _>>()?;
    let cmp = experiments::compare(&config, &specs)?;
    let summary = write_outputs(&args.common.out, &config, &cmp.all_records().collect::<Vec<_>>())?;
    for spec in &specs {
        if let Some(c) = summary(&format!("mean_final_cumulative.{}", spec.label())) {
            println!("{}: mean C(T) = {c:.3}", spec.label());
        }
    }
    if let Some(r) = summary("ratio") {
        println!("Ratio = {r:.6}");
    }
    if let Some(d) = summary("delta_err") {
        println!("Delta_Err = {d:.6}");
    }
    Ok(0)
}

fn metrics(args: &MetricsArgs) -> Result<u8, Failure> {
    let net = graph::load_temporal_edges(&args.file, LoadOptions::identity())?;
    let m = graph::topology_metrics(&net, args.day);
    println!("nodes\t{}", net.n());
    println!("edges\t{}", net.edge_count(args.day));
    println!("gamma_c\t{}", m.gamma_c);
    println!("l_p\t{}", m.l_p.map_or("undefined".into(), |v| v.to_string()));
    println!("components\t{}", m.n_components);
    Ok(0)
}

fn reproduce(args: &ReproduceArgs) -> Result<u8, Failure> {
    let opts = ScenarioOptions {
        n: args.n,
        reps: args.reps,
        seed: args.seed,
    };
    let report = experiments::reproduce_scenario(&args.scenario, &opts)?;
    for line in &report.lines {
        println!("{line}");
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        fs::write(out.join(format!("{}.csv", report.name)), &report.csv)?;
        fs::write(out.join("config.txt"), report.config.to_text())?;
    }
    println!("{}: {}", report.name, if report.passed { "PASS" } else { "FAIL" });
    Ok(if report.passed { 0 } else { EXIT_PREDICATE })
}

fn set_jobs(jobs: Option<usize>) -> Result<(), Failure> {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Failure::Usage("--jobs: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => set_jobs(a.common.jobs).and_then(|_| run(a)),
        Command::Compare(a) => set_jobs(a.common.jobs).and_then(|_| compare(a)),
        Command::Metrics(a) => metrics(a),
        Command::Reproduce(a) => set_jobs(a.jobs).and_then(|_| reproduce(a)),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
