use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use impulsive::Error;
use impulsive::scenario::{canonical_scenario, examples_listing, output_root, run_file};

#[derive(Parser)]
#[command(name = "impulsive", version, about = "Simulate and analyse impulsive semiflows")]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config.
    Run {
        config: PathBuf,
        /// Also write whitespace-separated columns ready for plotting.
        #[arg(long)]
        emit_plot_data: bool,
        /// Output root (overrides the environment).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in example systems.
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
}

#[derive(Subcommand)]
enum ExamplesAction {
    /// Names and known facts.
    List,
    /// Print the canonical scenario config of an example.
    Emit { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match cli.command {
        Command::Run {
            config,
            emit_plot_data,
            out,
        } => {
            let root = out.unwrap_or_else(output_root);
            match run_file(&config, &root, emit_plot_data) {
                Ok(outcome) => {
                    print!("{}", outcome.summary);
                    ExitCode::from(outcome.status.exit_code() as u8)
                }
                Err(e @ (Error::Config(_) | Error::UnknownExample(_) | Error::BadParams(_))) => {
                    eprintln!("{e}");
                    ExitCode::from(1)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Examples { action } => match action {
            ExamplesAction::List => match examples_listing() {
                Ok(s) => {
                    print!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            },
            ExamplesAction::Emit { name } => match canonical_scenario(&name) {
                Ok(sc) => {
                    println!("{}", serde_json::to_string_pretty(&sc).expect("serializable"));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            },
        },
    }
}
