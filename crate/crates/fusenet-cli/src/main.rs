use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fusenet_cli::config::load_config;
use fusenet_cli::runner::{regraph, run, with_output_dir};
use fusenet_cli::CliError;

#[derive(Parser)]
#[command(
    name = "fusenet",
    about = "Joint training of per-dataset networks with robust fusion penalties",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Parse and dry-run-check a config file without training.
    Validate { config: PathBuf },
    /// Re-derive sharing graphs from a weights snapshot.
    Graph {
        snapshot: PathBuf,
        /// Mutual top-k size.
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// weight | inverse_distance
        #[arg(long, default_value = "weight")]
        metric: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Comma-separated dataset names.
        #[arg(long)]
        names: Option<String>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, output_dir } => {
            let config = with_output_dir(load_config(&config)?, output_dir);
            let summary = run(&config)?;
            println!(
                "done: {} iterations, outputs in {}",
                summary.iterations,
                config.output_dir.display()
            );
            Ok(())
        }
        Command::Validate { config } => {
            let config = load_config(&config)?;
            println!(
                "ok: task {:?}, output dir {}",
                config.task,
                config.output_dir.display()
            );
            Ok(())
        }
        Command::Graph {
            snapshot,
            k,
            metric,
            out_dir,
            names,
        } => {
            let names = names.map(|s| s.split(',').map(|n| n.trim().to_string()).collect());
            let written = regraph(&snapshot, k, &metric, names, &out_dir)?;
            println!("wrote {}", written.join(", "));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
