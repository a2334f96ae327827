use clap::{Parser, Subcommand};

use biascope::commands::{cmd_compose, cmd_generate, cmd_rate, ComposeArgs, GenerateArgs, RateArgs};

/// Black-box bias rater for text-transforming services.
///
/// Probes a service with blocks of generated text whose attribute
/// distribution is known, classifies what comes back, and grades the service
/// BS, DSBS or UCS per language and overall.
#[derive(Debug, Parser)]
#[command(name = "biascope", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate probe blocks and write them to disk.
    Generate(GenerateArgs),
    /// Rate services across middle languages via round-trip translation.
    Rate(RateArgs),
    /// Compose stage ratings: worst-case rating set of the pipeline.
    Compose(ComposeArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Generate(args) => cmd_generate(args).map(|()| false),
        Command::Rate(args) => cmd_rate(args),
        Command::Compose(args) => cmd_compose(args).map(|()| false),
    };
    match outcome {
        Ok(false) => {}
        Ok(true) => std::process::exit(3),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
