use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use riscf_sim::{config, experiment, output, Experiment};

/// Energy-efficiency experiments for RIS-aided cell-free networks.
#[derive(Debug, Parser)]
#[command(name = "riscf-sim", version)]
struct Args {
    /// Key-value config file; Table I defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides the config's experiment: convergence, ee_vs_pmax,
    /// ee_vs_backhaul or single.
    #[arg(short, long)]
    experiment: Option<Experiment>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(short, long, default_value_t = 0)]
    jobs: usize,
    /// More log output (-v info, -vv debug).
    #[arg(short, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Exit 0 even if some trials have no feasible starting point.
    #[arg(long)]
    allow_infeasible: bool,
    /// Exit 0 even if some trials hit solver errors or flagged projections.
    #[arg(long)]
    allow_failures: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let mut cfg = match &args.config {
        Some(path) => config::load_config(path),
        None => config::parse_config(""),
    }
    .unwrap_or_else(|e| {
        eprintln!("error: {e}");
        std::process::exit(2);
    });
    if let Some(e) = args.experiment {
        cfg.spec.experiment = e;
    }
    if let Some(s) = args.seed {
        cfg.spec.seed = s;
        cfg.spec.algo.seed = s;
    }
    if let Some(t) = args.trials {
        if t == 0 {
            eprintln!("error: --trials must be at least 1");
            return ExitCode::from(2);
        }
        cfg.spec.trials = t;
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }

    log::info!("running {} with {} trials", cfg.spec.experiment.name(), cfg.spec.trials);
    let out = experiment::run_experiment(&cfg);
    let paths = match output::write_all(&out, &args.out) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: writing {}: {e}", args.out.display());
            return ExitCode::from(2);
        }
    };
    for p in &paths {
        log::info!("wrote {}", p.display());
    }
    let mut problems = 0;
    for t in output::problem_trials(&out) {
        problems += 1;
        log::info!("{} x={} trial {} (seed {}): {} {}", t.scheme.name(), t.x, t.trial, t.seed, t.status.name(), t.message);
    }
    if problems > 0 {
        log::warn!("{problems} of {} trials did not end ok; see trials.csv", out.trials.len());
    }
    let counts = out.row_counts();
    if counts.iter().all(|c| c.tolerated(args.allow_infeasible, args.allow_failures)) {
        ExitCode::SUCCESS
    } else {
        let bad = counts.iter().filter(|c| !c.tolerated(args.allow_infeasible, args.allow_failures)).count();
        eprintln!("{bad} of {} rows are not ok; see trials.csv", counts.len());
        ExitCode::FAILURE
    }
}
