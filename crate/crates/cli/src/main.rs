use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bodyschema::active::{select_next, SelectionProblem};
use bodyschema::experiment::{
    read_jsonl, render_table, resolve_chain, run_experiment, summarize, write_csv, write_jsonl, ExperimentConfig,
    Strategy, Thresholds,
};
use bodyschema::schema::ChainDocument;
use bodyschema::sim::{builtin_chain, BUILTIN_CHAINS};
use bodyschema::{ChainModel, EstimatorState, Error, Result};

#[derive(Parser)]
#[command(name = "bodyschema", version, about = "Kinematic chain calibration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write one record per iteration as JSON lines.
    Run(RunArgs),
    /// Per-strategy statistics of a record file.
    Summarize(SummarizeArgs),
    /// List the built-in chains, or print one as a chain file.
    Fixtures {
        /// Print this fixture in the chain file format.
        #[arg(long)]
        export: Option<String>,
    },
    /// Choose the next configuration for a saved estimator state.
    Select(SelectArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML). Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated strategies; overrides the configured one.
    #[arg(long, value_delimiter = ',')]
    strategy: Vec<Strategy>,
    /// Seeds as `1,2,5` or an inclusive range `1..20`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Fixture name or chain file.
    #[arg(long)]
    chain: Option<String>,
    /// Record file; stdout when neither this nor the config names one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the records as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// `key.path=value`, applied to the configuration in order.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Record file (JSON lines).
    #[arg(long = "in")]
    input: PathBuf,
    /// Radians.
    #[arg(long, default_value_t = Thresholds::default().orientation)]
    orientation_threshold: f64,
    /// Meters.
    #[arg(long, default_value_t = Thresholds::default().location)]
    location_threshold: f64,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SelectArgs {
    /// Fixture name or chain file; supplies joint limits and field of view.
    #[arg(long)]
    chain: String,
    /// Estimator snapshot (JSON with `mean` and `covariance`).
    #[arg(long)]
    state: PathBuf,
    /// Experiment configuration for noise and optimizer settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot read seeds from '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    ExperimentConfig::parse_with_overrides(&text, overrides)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(args: RunArgs) -> Result<()> {
    let mut overrides = args.overrides;
    if let Some(s) = &args.seeds {
        let list: Vec<String> = parse_seeds(s)?.iter().map(u64::to_string).collect();
        overrides.push(format!("seeds=[{}]", list.join(",")));
    }
    if let Some(n) = args.iterations {
        overrides.push(format!("iterations={n}"));
    }
    if let Some(c) = &args.chain {
        overrides.push(format!("chain={}", serde_json::to_string(c).expect("string serializes")));
    }
    let cfg = load_config(args.config.as_deref(), &overrides)?;
    log::info!("running {} seeds of {} iterations on {}", cfg.seeds.len(), cfg.iterations, cfg.chain);

    let records = run_experiment(&cfg, &args.strategy)?;
    match args.out.as_ref().or(cfg.output.as_ref()) {
        Some(p) => {
            let mut w = create(p)?;
            write_jsonl(&mut w, &records)?;
            w.flush()?;
        }
        None => write_jsonl(io::stdout().lock(), &records)?,
    }
    if let Some(p) = &args.csv {
        let mut w = create(p)?;
        write_csv(&mut w, &records)?;
        w.flush()?;
    }
    eprint!("{}", render_table(&summarize(&records, &cfg.thresholds)?));
    Ok(())
}

fn summarize_cmd(args: SummarizeArgs) -> Result<()> {
    let records = read_jsonl(BufReader::new(File::open(&args.input)?))?;
    let thresholds = Thresholds {
        orientation: args.orientation_threshold,
        location: args.location_threshold,
    };
    let summaries = summarize(&records, &thresholds)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summaries).expect("summary serializes"));
    } else {
        print!("{}", render_table(&summaries));
    }
    Ok(())
}

fn fixtures(export: Option<String>) -> Result<()> {
    match export {
        Some(name) => print!("{}", ChainDocument::from_ground_truth(&builtin_chain(&name)?).to_toml()),
        None => {
            for name in BUILTIN_CHAINS {
                let gt = builtin_chain(name)?;
                println!("{name}\t{} joints", gt.joints());
            }
        }
    }
    Ok(())
}

fn select(args: SelectArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), &args.overrides)?;
    let truth = resolve_chain(&args.chain, cfg.noise.obs_variance)?;
    let state = EstimatorState::from_json(&std::fs::read_to_string(&args.state)?)?;
    let problem = SelectionProblem {
        state,
        model: ChainModel::for_chain(&truth.params).with_jacobian(cfg.jacobian),
        noise: cfg.noise,
        joint_limits: truth.joint_limits,
        fov: truth.fov,
        optimizer: cfg.optimizer,
        record_trace: false,
        excluded: Vec::new(),
        exclusion_radius: cfg.active.exclusion_radius,
    };
    let res = select_next(&problem)?;
    let out = serde_json::json!({
        "config": res.config.angles,
        "cost": res.cost,
        "prior_trace": problem.state.trace(),
        "evaluations": res.evaluations,
    });
    println!("{out}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Summarize(a) => summarize_cmd(a),
        Command::Fixtures { export } => fixtures(export),
        Command::Select(a) => select(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1,2, 5").unwrap(), vec![1, 2, 5]);
        assert_eq!(parse_seeds("3..5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_seeds("3..=4").unwrap(), vec![3, 4]);
        assert!(parse_seeds("5..3").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
