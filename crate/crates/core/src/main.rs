use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bionet::cli_io::{
    cmd_converge, cmd_distance, cmd_order, cmd_rotate, cmd_run, parse_angle, parse_config, parse_n_list, study_csv,
    with_out_dir, RunConfig,
};
use bionet::{Error, Result};

#[derive(Parser)]
#[command(name = "bionet", version, about = "Cut-cell simulator for adaptive transport networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write energy, snapshots and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence study: Wasserstein distances between consecutive resolutions.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "50,100,200")]
        n_list: String,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// Rotation study: leaf against the rotated leaf at each resolution.
    Rotate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "100,200")]
        n_list: String,
        /// Rotation angle in radians (`pi/4` style accepted); defaults to the config's theta.
        #[arg(long)]
        theta: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// Wasserstein distance between the conductivity columns of two snapshot files.
    Distance {
        file_a: PathBuf,
        file_b: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// Richardson order from errors on a coarse and a fine grid.
    Order {
        e_coarse: f64,
        e_fine: f64,
        #[arg(default_value_t = 2.0)]
        ratio: f64,
    },
}

fn load(config: &PathBuf, out: Option<PathBuf>) -> Result<RunConfig> {
    Ok(with_out_dir(parse_config(config)?, out))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config, out)?;
            let m = cmd_run(&cfg)?;
            println!(
                "{}: {} steps, t = {}, outputs in {}",
                m.termination,
                m.steps,
                m.final_time,
                cfg.out_dir.display()
            );
        }
        Command::Converge { config, out, n_list, p } => {
            let cfg = load(&config, out)?;
            let n_list = parse_n_list(&n_list)?;
            print!("{}", study_csv(&cmd_converge(&cfg, &n_list, p)?));
        }
        Command::Rotate {
            config,
            out,
            n_list,
            theta,
            p,
        } => {
            let cfg = load(&config, out)?;
            let n_list = parse_n_list(&n_list)?;
            let theta = match theta {
                Some(t) => parse_angle(&t)?,
                None => cfg.theta,
            };
            print!("{}", study_csv(&cmd_rotate(&cfg, theta, &n_list, p)?));
        }
        Command::Distance { file_a, file_b, p } => println!("{}", cmd_distance(&file_a, &file_b, p)?),
        Command::Order {
            e_coarse,
            e_fine,
            ratio,
        } => println!("{}", cmd_order(e_coarse, e_fine, ratio)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else {
        1
    }
}
