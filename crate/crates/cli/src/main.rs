use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quadtrack_cli::{cmd_bench, cmd_eval, cmd_synth, cmd_track, BenchArgs, CliError, EvalArgs, SynthArgs, TrackArgs};

#[derive(Parser)]
#[command(name = "quadtrack", version, about = "Planar target tracking and evaluation")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a tracker over a dataset and write per-frame results.
    Track(TrackArgs),
    /// Score results files, or run and score from several initial frames.
    Eval(EvalArgs),
    /// Time a tracker on frames held in memory.
    Bench(BenchArgs),
    /// Render a synthetic sequence into a dataset directory.
    Synth(SynthArgs),
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Track(a) => {
            let rec = cmd_track(&a)?;
            let lost = rec.frames.iter().filter(|f| f.quad.is_none()).count();
            println!("tracked {} frames ({lost} lost) -> {}", rec.frames.len(), a.out.display());
        }
        Command::Eval(a) => println!("{}", cmd_eval(&a)?.line()),
        Command::Bench(a) => println!("{}", cmd_bench(&a)?.line()),
        Command::Synth(a) => {
            let n = cmd_synth(&a)?;
            println!("wrote {n} frames to {}", a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
