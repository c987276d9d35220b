//! Command-line front end for the infrared small-target super-resolution toolkit.

pub mod commands;
pub mod util;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{detect, eval_detect, eval_sr, gradcheck, sr, synth, train};

#[derive(Parser, Debug)]
#[command(name = "irsr", version, about = "Infrared small-target video super-resolution and detection")]
pub struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "IRSR_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic annotated HR/LR sequence.
    Synth(synth::SynthArgs),
    /// Bicubic-downsample a frame directory.
    Degrade(synth::DegradeArgs),
    /// Train the super-resolution network.
    Train(train::TrainArgs),
    /// Super-resolve an LR sequence with a checkpoint.
    Sr(sr::SrArgs),
    /// Image-quality and target-contrast metrics of SR output.
    EvalSr(eval_sr::EvalSrArgs),
    /// Run a small-target detector.
    Detect(detect::DetectArgs),
    /// Detection gains and ROC of detector output.
    EvalDetect(eval_detect::EvalDetectArgs),
    /// Finite-difference gradient verification.
    Gradcheck(gradcheck::GradcheckArgs),
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .context("building the worker pool")?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => synth::synth(a).map(|_| 0),
        Command::Degrade(a) => synth::degrade_cmd(a).map(|_| 0),
        Command::Train(a) => train::train(a).map(|_| 0),
        Command::Sr(a) => sr::sr(a).map(|_| 0),
        Command::EvalSr(a) => eval_sr::eval_sr(a).map(|_| 0),
        Command::Detect(a) => detect::detect_cmd(a).map(|_| 0),
        Command::EvalDetect(a) => eval_detect::eval_detect(a).map(|_| 0),
        Command::Gradcheck(a) => gradcheck::gradcheck(a).map(|r| if r.passed { 0 } else { 1 }),
    })
}
