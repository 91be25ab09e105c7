use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ion2d::cli::{run_scenario, RunConfig, Scenario};

/// 2D spectroscopy of trapped-ion Coulomb crystals.
#[derive(Debug, Parser)]
#[command(name = "ion2d", version)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's scenario.
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Multiplies t_max (and so the number of grid points) at fixed dt.
    #[arg(long)]
    grid_scale: Option<f64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn build_config(args: &Args) -> Result<RunConfig, String> {
    let mut config = match (&args.config, args.scenario) {
        (Some(path), _) => RunConfig::load(path).map_err(|e| e.to_string())?,
        (None, Some(s)) => RunConfig::new(s),
        (None, None) => return Err("either --config or --scenario is required".into()),
    };
    if let Some(s) = args.scenario {
        config.scenario = s;
    }
    if args.out_dir.is_some() {
        config.out_dir = args.out_dir.clone();
    }
    if args.grid_scale.is_some() {
        config.grid_scale = args.grid_scale;
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match build_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run_scenario(&config) {
        Ok(m) => {
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} finished in {:.2} s; {} files written", m.scenario, m.wall_time_s, m.outputs.len() + 1);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.module());
            ExitCode::FAILURE
        }
    }
}
