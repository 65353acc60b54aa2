use clap::{Parser, Subcommand};
use hetex::allocator::Strategy;
use hetex::config::MissionConfig;
use hetex::error::Error;
use hetex::scenario::Scenario;
use hetex::sim_harness::{self, Simulation};
use std::path::PathBuf;
use std::process::ExitCode;

/// Heterogeneous two-UAV exploration simulator.
#[derive(Parser)]
#[command(name = "hetex", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mission and write timeline/events/timings/summary outputs.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Task allocation strategy.
        #[arg(long, value_parser = parse_strategy)]
        allocator: Strategy,
        /// Mission seed (HETEX_SEED overrides).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Optional config file (key = value lines).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run both allocators over n seeds and write a paired summary.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        /// Number of seeds (runs use seeds 1..=n).
        #[arg(long)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a scenario file against the schema and report basic stats.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s {
        "greedy" => Ok(Strategy::Greedy),
        "mcf" => Ok(Strategy::Mcf),
        other => Err(format!("`{other}` is not one of greedy|mcf")),
    }
}

// Exit codes: 0 success, 1 incomplete mission or other runtime failure,
// 2 schema/config error, 3 safety fault.
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Schema { .. } | Error::Config { .. } | Error::Bounds { .. } => 2,
        Error::CollisionFault { .. } => 3,
        _ => 1,
    }
}

fn load_config(path: &Option<PathBuf>) -> hetex::Result<MissionConfig> {
    match path {
        Some(p) => MissionConfig::from_file(p),
        None => Ok(MissionConfig::default()),
    }
}

fn apply_seed_env(cfg: &mut MissionConfig) -> hetex::Result<()> {
    if let Ok(v) = std::env::var("HETEX_SEED") {
        cfg.seed = v
            .parse::<u64>()
            .map_err(|_| Error::config("HETEX_SEED", format!("`{v}` is not a u64")))?;
    }
    Ok(())
}

fn cmd_run(
    scenario: PathBuf,
    allocator: Strategy,
    seed: Option<u64>,
    out: PathBuf,
    config: Option<PathBuf>,
) -> hetex::Result<bool> {
    let scenario = Scenario::from_path(&scenario)?;
    let mut cfg = load_config(&config)?;
    cfg.allocator = allocator;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    apply_seed_env(&mut cfg)?;
    let mut sim = Simulation::new(scenario, cfg)?;
    let completed = sim.run()?;
    sim_harness::write_run_outputs(sim.record(), sim.map(), &out)?;
    let s = &sim.record().summary;
    println!(
        "{}: {} after {:.2} s, explored {:.1}%, t95 {}",
        s.scenario,
        if completed { "completed" } else { "incomplete" },
        s.t_final,
        100.0 * s.explored_fraction,
        s.t_95.map(|t| format!("{t:.2} s")).unwrap_or_else(|| "-".into()),
    );
    Ok(completed)
}

fn cmd_compare(
    scenario: PathBuf,
    seeds: u64,
    out: PathBuf,
    config: Option<PathBuf>,
) -> hetex::Result<bool> {
    let scenario = Scenario::from_path(&scenario)?;
    let mut cfg = load_config(&config)?;
    apply_seed_env(&mut cfg)?;
    std::fs::create_dir_all(&out)?;
    let mut all_completed = true;
    let report = {
        let out_dir = out.clone();
        let mut write_each = |rec: &hetex::metrics::MetricsRecord| {
            let sub = out_dir.join(format!("{}_seed{}", rec.summary.strategy.name(), rec.summary.seed));
            if let Err(e) = hetex::metrics::write_outputs(rec, &sub) {
                eprintln!("warning: could not write {}: {e}", sub.display());
            }
            println!(
                "seed {} {}: t95 {}",
                rec.summary.seed,
                rec.summary.strategy.name(),
                rec.summary.t_95.map(|t| format!("{t:.2} s")).unwrap_or_else(|| "-".into()),
            );
        };
        sim_harness::compare_runs(&scenario, &cfg, seeds, Some(&mut write_each))?
    };
    for r in &report.runs {
        all_completed &= r.completed_greedy && r.completed_mcf;
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(out.join("compare.json"), json + "\n")?;
    println!(
        "median t95: greedy {} | mcf {}",
        report.median_t95_greedy.map(|t| format!("{t:.2} s")).unwrap_or_else(|| "-".into()),
        report.median_t95_mcf.map(|t| format!("{t:.2} s")).unwrap_or_else(|| "-".into()),
    );
    Ok(all_completed)
}

fn cmd_validate(path: PathBuf) -> hetex::Result<()> {
    let scenario = Scenario::from_path(&path)?;
    let world = hetex::voxel_world::load_world(&scenario)?;
    let dims = world.dims();
    let occupied = (0..world.cell_count())
        .filter(|&i| world.state_linear(i) == hetex::voxel_world::CellState::Occupied)
        .count();
    println!(
        "{}: ok ({}x{}x{} cells at {} m, {} boxes, {} occupied cells)",
        if scenario.name.is_empty() { "scenario" } else { &scenario.name },
        dims[0],
        dims[1],
        dims[2],
        scenario.resolution,
        scenario.boxes.len(),
        occupied
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { scenario, allocator, seed, out, config } => {
            cmd_run(scenario, allocator, seed, out, config)
        }
        Command::Compare { scenario, seeds, out, config } => {
            cmd_compare(scenario, seeds, out, config)
        }
        Command::Validate { scenario } => cmd_validate(scenario).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
