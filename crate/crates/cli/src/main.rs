use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use trustgames_cli::experiments::{table1_csv, table1_options};
use trustgames_cli::{run_experiment, validate_config, write_artifacts, CliError, ExperimentConfig, ExperimentId, Overrides};
use trustgames_core::{reproduce_table1, Table1Row};
use trustgames_session::{Clock, ServiceConfig};

#[derive(Parser)]
#[command(name = "trustgames", version, about = "Robot planning against humans who learn its objective")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the plate-game comparison of the six planning formulations.
    Table1 {
        /// Print CSV instead of a text table.
        #[arg(long)]
        csv: bool,
        /// Prior grid size.
        #[arg(long, default_value_t = 301)]
        grid: usize,
        /// Also write the full experiment artifacts here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve interactive cart-pole sessions over HTTP and WebSocket.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Advance sessions only through the advance endpoint.
        #[arg(long)]
        fake_clock: bool,
        #[arg(long, default_value_t = 16)]
        capacity: usize,
        /// Directory for finished session logs.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>, trials: Option<usize>, jobs: Option<usize>) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(&config).map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    let mut cfg = validate_config(&raw).map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(k) = trials {
        cfg.trials = k;
    }
    let start = Instant::now();
    let artifacts = run_experiment(&cfg, jobs)?;
    write_artifacts(&out, &artifacts)?;
    eprintln!("{}: {} trials in {:.1}s -> {}", cfg.id.name(), cfg.trials, start.elapsed().as_secs_f64(), out.display());
    Ok(())
}

fn print_table(rows: &[Table1Row<f64>]) {
    let plan = |a: &[usize]| format!("({})", a.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    println!("{:<12} {:<10} {:>8} {:>8} {:>9} {:>6} {:>6}", "formulation", "prior", "robot", "human", "estimate", "R_r", "R_h");
    for r in rows {
        println!(
            "{:<12} {:<10} {:>8} {:>8} {:>9} {:>6.2} {:>6.2}",
            r.formulation,
            r.distribution,
            plan(&r.robot_actions),
            plan(&r.human_actions),
            r.estimate_label,
            r.value_robot,
            r.value_human
        );
    }
}

fn table1(csv: bool, grid: usize, out: Option<PathBuf>) -> Result<(), CliError> {
    let overrides = Overrides { grid: Some(grid as i64), ..Default::default() };
    let mut cfg = ExperimentConfig::new(ExperimentId::Table1, 1, 0);
    cfg.overrides = overrides;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(out) = out {
        write_artifacts(&out, &run_experiment(&cfg, None)?)?;
    }
    let rows = reproduce_table1(&table1_options(&cfg.overrides)).map_err(|e| CliError::Solver(e.to_string()))?;
    if csv {
        print!("{}", table1_csv(&rows)?);
    } else {
        print_table(&rows);
    }
    Ok(())
}

fn serve(port: u16, host: IpAddr, fake_clock: bool, capacity: usize, log_dir: Option<PathBuf>) -> Result<(), CliError> {
    if capacity == 0 {
        return Err(CliError::Config("capacity must be at least 1".into()));
    }
    let config = ServiceConfig { capacity, clock: if fake_clock { Clock::Fake } else { Clock::Real }, log_dir };
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    rt.block_on(trustgames_session::serve(SocketAddr::new(host, port), config)).map_err(|e| CliError::Io(e.to_string()))
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run { config, out, seed, trials, jobs } => run(config, out, seed, trials, jobs),
        Command::Table1 { csv, grid, out } => table1(csv, grid, out),
        Command::Serve { port, host, fake_clock, capacity, log_dir } => serve(port, host, fake_clock, capacity, log_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
