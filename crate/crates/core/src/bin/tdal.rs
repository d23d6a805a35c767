use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tdal::cli::{cmd_report, cmd_run, cmd_sweep, Failure, SweepAxis};

#[derive(Parser)]
#[command(
    name = "tdal",
    version,
    about = "Task-driven active learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run only this seed instead of the config's seed list.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Write results here instead of the config's output_dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config.
    Run { config: PathBuf },
    /// Rerun an experiment config over values of one axis.
    Sweep {
        config: PathBuf,
        /// imbalance_ratio, redundant_ratio or retrain_period
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Draw learning curves from a run or sweep directory.
    Report {
        dir: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed_override;
    let out_dir = cli.out_dir.as_deref();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config, seed, out_dir).map(|s| {
            println!(
                "final accuracy {:.4} ± {:.4} over {} seeds, mean target acquisitions {:.1}",
                s.mean_final_acc,
                s.stderr_final_acc,
                s.seeds.len(),
                s.mean_target_count
            );
        }),
        Command::Sweep {
            config,
            axis,
            values,
        } => axis
            .parse::<SweepAxis>()
            .map_err(Failure::Config)
            .and_then(|axis| cmd_sweep(config, axis, values, seed, out_dir))
            .map(|runs| println!("completed {} sweep values", runs.len())),
        Command::Report { dir, output } => {
            cmd_report(dir, output.as_deref()).map(|path| println!("wrote {}", path.display()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tdal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
