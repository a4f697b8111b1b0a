use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metro_ads::cost::CostMode;
use metro_ads::pipeline::{replay, ExternalInputs, Pipeline, RunConfig, Stage, REPORT_FILE, SCENARIO_FILE};
use metro_ads::scheduler::Policy;
use metro_ads::{Error, Result};

/// Transit advertising simulator, pattern miner and screen scheduler.
#[derive(Parser, Debug)]
#[command(name = "metro-ads", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Run config (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// max_audience, audience_ratio, nearest_buildings or building_ratio
    #[arg(long, global = true, value_parser = parse_policy)]
    policy: Option<Policy>,

    /// literal or consistent
    #[arg(long = "cost-mode", global = true, value_parser = parse_cost_mode)]
    cost_mode: Option<CostMode>,

    /// Day index to schedule and price.
    #[arg(long, global = true)]
    day: Option<u32>,

    /// Output directory shared by all stages [default: out; for replay, the
    /// manifest's directory].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a world, population and trip log.
    Simulate {
        /// Use this world instead of generating one.
        #[arg(long)]
        world: Option<PathBuf>,
        /// Use this population instead of generating one.
        #[arg(long)]
        persons: Option<PathBuf>,
    },
    /// Mine temporal and spatial clusters and predict audiences.
    Cluster {
        /// Ingest this trip CSV instead of the simulated one.
        #[arg(long)]
        trips: Option<PathBuf>,
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        persons: Option<PathBuf>,
    },
    /// Build one day of screen schedules.
    Schedule {
        /// Viewer feedback CSV applied to ad weights first.
        #[arg(long)]
        feedback: Option<PathBuf>,
        #[arg(long)]
        world: Option<PathBuf>,
    },
    /// Price the schedules under both cost models.
    Cost,
    /// Summarise the artifacts in the output directory.
    Report,
    /// Run the bundled metro scenario end to end.
    Scenario {
        /// Fixture directory with world, persons, trips, feedback and scenario files
        #[arg(long, default_value = "fixtures/metro")]
        fixtures: PathBuf,
    },
    /// Re-run the stage recorded in a manifest.
    Replay { manifest: PathBuf },
}

fn parse_policy(s: &str) -> std::result::Result<Policy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_cost_mode(s: &str) -> std::result::Result<CostMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(g: &GlobalArgs, fallback: Option<PathBuf>) -> Result<RunConfig> {
    let mut config = match g.config.clone().or(fallback) {
        Some(path) => RunConfig::load(&path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        config.world.rng_seed = seed;
    }
    if let Some(policy) = g.policy {
        config.run.policy = policy;
    }
    if let Some(mode) = g.cost_mode {
        config.cost.mode = mode;
    }
    if let Some(day) = g.day {
        config.run.day = day;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let (stage, external) = match cli.command {
        Command::Replay { manifest } => {
            let m = replay(&manifest, cli.global.out.as_deref())?;
            println!("replayed {} -> {}", m.stage, m.outputs.join(", "));
            return Ok(());
        }
        Command::Simulate { world, persons } => (
            Stage::Simulate,
            ExternalInputs {
                world,
                persons,
                ..Default::default()
            },
        ),
        Command::Cluster { trips, world, persons } => (
            Stage::Cluster,
            ExternalInputs {
                world,
                persons,
                trips,
                ..Default::default()
            },
        ),
        Command::Schedule { feedback, world } => (
            Stage::Schedule,
            ExternalInputs {
                world,
                feedback,
                ..Default::default()
            },
        ),
        Command::Cost => (Stage::Cost, ExternalInputs::default()),
        Command::Report => (Stage::Report, ExternalInputs::default()),
        Command::Scenario { fixtures } => (
            Stage::Scenario,
            ExternalInputs {
                fixture: Some(fixtures),
                ..Default::default()
            },
        ),
    };
    let out = cli.global.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    // The scenario fixture carries its own config.
    let fallback = external
        .fixture
        .as_ref()
        .map(|dir| dir.join("config.toml"))
        .filter(|p| p.is_file());
    let pipeline = Pipeline::new(load_config(&cli.global, fallback)?, out)?;
    let manifest = pipeline.run(stage, &external)?;
    match stage {
        Stage::Report => print!(
            "{}",
            std::fs::read_to_string(pipeline.out_dir().join(REPORT_FILE)).unwrap_or_default()
        ),
        Stage::Scenario => print!(
            "{}",
            std::fs::read_to_string(pipeline.out_dir().join(SCENARIO_FILE)).unwrap_or_default()
        ),
        _ => println!("{}: wrote {}", stage, manifest.outputs.join(", ")),
    }
    Ok(())
}

fn diagnostic(err: &Error) -> serde_json::Value {
    let mut d = serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
    });
    match err {
        Error::Row { line, field, .. } => {
            d["line"] = (*line).into();
            d["field"] = field.as_str().into();
        }
        Error::MissingArtifact { path, run_first } => {
            d["path"] = path.display().to_string().into();
            d["run_first"] = run_first.as_str().into();
        }
        _ => {}
    }
    d
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", serde_json::json!({ "error": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            ExitCode::FAILURE
        }
    }
}
