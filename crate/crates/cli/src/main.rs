use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use scenewalk_cli::{
    cmd_bench, cmd_plan, cmd_randomize, cmd_render, cmd_simulate, AppError, BenchKind, Common,
    Format,
};

#[derive(Parser)]
#[command(name = "scenewalk", version, about = "Scene-aware route planning toolkit")]
struct Cli {
    /// Scene description (JSON)
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// Route instruction file
    #[arg(long, global = true)]
    route: Option<PathBuf>,
    /// RNG seed; all commands are deterministic under it
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Planner configuration (JSON), overridden by explicit flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Tabular output format
    #[arg(long, global = true, value_enum, default_value_t = CliFormat::Csv)]
    format: CliFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliBenchKind {
    Slalom,
    Pyramid,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a route and write path/profile/trajectory tables
    Plan {
        /// Slope-aversion weight in the grid edge cost
        #[arg(long)]
        c_slope: Option<f64>,
    },
    /// Plan and track a route in closed loop; write report and trace
    Simulate {
        /// Lateral disturbance intensity
        #[arg(long)]
        sigma: Option<f64>,
        /// Replace the speed solver with a constant cruise speed
        #[arg(long)]
        constant_speed: Option<f64>,
    },
    /// Run a benchmark suite
    Bench {
        #[arg(long, value_enum, default_value_t = CliBenchKind::Slalom)]
        kind: CliBenchKind,
        /// Monte-Carlo runs per configuration (slalom)
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Scene count (random)
        #[arg(long, default_value_t = 20)]
        scenes: usize,
    },
    /// Generate a random scene and write it as JSON
    Randomize,
    /// Render the scene (and optionally a planned route) to SVG
    Render,
}

fn run(cli: &Cli) -> Result<(), AppError> {
    let common = Common {
        scene: cli.scene.clone(),
        route: cli.route.clone(),
        seed: cli.seed,
        config: cli.config.clone(),
        out_dir: cli.out_dir.clone(),
        format: match cli.format {
            CliFormat::Csv => Format::Csv,
            CliFormat::Json => Format::Json,
        },
    };
    match cli.command {
        Command::Plan { c_slope } => cmd_plan(&common, c_slope),
        Command::Simulate {
            sigma,
            constant_speed,
        } => cmd_simulate(&common, sigma, constant_speed),
        Command::Bench { kind, runs, scenes } => cmd_bench(
            &common,
            match kind {
                CliBenchKind::Slalom => BenchKind::Slalom,
                CliBenchKind::Pyramid => BenchKind::Pyramid,
                CliBenchKind::Random => BenchKind::Random,
            },
            runs,
            scenes,
        ),
        Command::Randomize => cmd_randomize(&common),
        Command::Render => cmd_render(&common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successful exits; bad usage is code 1
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
