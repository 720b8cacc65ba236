use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skyquery::commands::{self, AlignArgs, AnalyzeArgs, RouteArgs, SimulateArgs};
use skyquery::simulator::Policy;

#[derive(Parser)]
#[command(name = "skyquery", version, about = "Drone sensing: alignment, analytics, routing and fleet simulation")]
struct Cli {
    /// Directory for outputs and manifest.json.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Group keypoints, geolocate groups and estimate frame poses.
    Align {
        /// Keypoint log (JSON lines).
        log: PathBuf,
        #[arg(long)]
        region: Option<PathBuf>,
        /// Descriptor distance threshold.
        #[arg(long)]
        t_f: Option<f64>,
        /// Pixel distance threshold for stable groups.
        #[arg(long)]
        t_d_px: Option<f64>,
        /// Meter distance threshold for global groups.
        #[arg(long)]
        t_d_m: Option<f64>,
    },
    /// Run a program and write its exported dataframes.
    Analyze {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        region: PathBuf,
        /// Source binding, repeatable.
        #[arg(long = "bind", value_name = "NAME=PATH", value_parser = parse_binding)]
        bindings: Vec<(String, PathBuf)>,
        /// Where unbound sources are looked up (default: the program's directory).
        #[arg(long)]
        base_dir: Option<PathBuf>,
        #[arg(long)]
        merge_threshold: Option<f64>,
    },
    /// Simulate the sensing loop for several policies and fleet sizes.
    Simulate {
        /// Parking trace CSV; a synthetic trace is generated when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        region: Option<PathBuf>,
        #[arg(long)]
        program: Option<PathBuf>,
        /// Drone counts, e.g. `1-4` or `1,2,6`.
        #[arg(long, default_value = "1-4")]
        drones: String,
        /// ConstFreq, PredictOnly or ForecastRates; repeatable (default: all three).
        #[arg(long = "policy")]
        policies: Vec<Policy>,
        /// Length of a generated trace.
        #[arg(long, default_value_t = 8.0)]
        weeks: f64,
        #[arg(long, default_value = "counts")]
        objective: String,
    },
    /// Plan one route from a priorities CSV.
    Route {
        #[arg(long)]
        priorities: PathBuf,
        #[arg(long)]
        region: PathBuf,
        /// Depot cell as `x,y` (default: the center cell).
        #[arg(long)]
        depot: Option<String>,
        #[arg(long, default_value_t = 17.88)]
        speed: f64,
        /// Flight time budget in seconds.
        #[arg(long, default_value_t = 3600.0)]
        budget: f64,
        #[arg(long, default_value_t = skyquery::routing::RESTARTS)]
        restarts: usize,
    },
}

fn parse_binding(s: &str) -> Result<(String, PathBuf), String> {
    commands::parse_binding(s).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> skyquery::Result<()> {
    let (out_dir, seed) = (cli.out_dir, cli.seed);
    match cli.command {
        Command::Align { log, region, t_f, t_d_px, t_d_m } => {
            let args = AlignArgs { log, region, t_f, t_d_px, t_d_m, out_dir, seed };
            let (_, s) = commands::align(&args)?;
            println!(
                "{} frames, {} stable groups, {} global groups, {} sensor-only frames",
                s.frames, s.stable_groups, s.global_groups, s.sensor_only_frames
            );
            if let Some((est, sensor)) = s.rmse {
                println!("pose RMSE {est:.3} m (sensor only {sensor:.3} m)");
            }
        }
        Command::Analyze { program, region, bindings, base_dir, merge_threshold } => {
            let args = AnalyzeArgs { program, region, bindings, base_dir, merge_threshold, out_dir, seed };
            let (m, warnings) = commands::analyze(&args)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            for o in &m.outputs {
                println!("wrote {}", o.path);
            }
        }
        Command::Simulate { trace, region, program, drones, policies, weeks, objective } => {
            let policies = if policies.is_empty() { Policy::ALL.to_vec() } else { policies };
            let drones = commands::parse_drones(&drones)?;
            let args = SimulateArgs { trace, region, program, drones, policies, weeks, objective, out_dir, seed };
            let m = commands::simulate(&args)?;
            for o in &m.outputs {
                println!("wrote {}", o.path);
            }
        }
        Command::Route { priorities, region, depot, speed, budget, restarts } => {
            let depot = depot.as_deref().map(commands::parse_cell).transpose()?;
            let args = RouteArgs { priorities, region, depot, speed, budget, restarts, out_dir, seed };
            let (_, r) = commands::route(&args)?;
            println!("{} cells, reward {:.3}, time {:.1} s", r.visits().len(), r.total_reward, r.total_time);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        // The panic hook has already printed the message.
        Err(_) => ExitCode::from(3),
    }
}
