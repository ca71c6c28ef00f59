//! Command-line front end for the event-flow pipeline: run it on a stream,
//! generate synthetic scenes with ground truth, score estimates, render
//! fields, grid-search parameters, and benchmark per-stage timings.

mod commands;
mod overrides;
mod util;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ebof",
    version,
    about = "Dense optical flow from event-camera streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process an event stream into per-window flow fields.
    Run(commands::run::RunArgs),
    /// Generate a synthetic event scene with analytic ground truth.
    Synth(commands::synth::SynthArgs),
    /// Score estimated flow fields against ground truth.
    Eval(commands::eval::EvalArgs),
    /// Render flow fields as color-wheel images.
    Viz(commands::viz::VizArgs),
    /// Grid-search denoise, fill, and saturation parameters on one scene.
    Sweep(commands::sweep::SweepArgs),
    /// Replay a stream at full speed and report per-stage timings.
    Bench(commands::bench::BenchArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run::execute(args),
        Command::Synth(args) => commands::synth::execute(args),
        Command::Eval(args) => commands::eval::execute(args),
        Command::Viz(args) => commands::viz::execute(args),
        Command::Sweep(args) => commands::sweep::execute(args),
        Command::Bench(args) => commands::bench::execute(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
