use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use d2dsec::{rerun_manifest, run_scenario, Experiment, Overrides};

#[derive(Parser)]
#[command(name = "d2dsec", version, about = "Security-aware incentive design for D2D offloading")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the ODE step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the solver residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Best response over a grid of compromise levels.
    SolveBr(Common),
    /// Steady state and mean-field trajectory.
    SteadyState(Common),
    /// Nash equilibrium of the K-type game.
    Ne(Common),
    /// Attack-free and secure optimal rewards plus the brute utility curve.
    RewardOpt(Common),
    /// Joint reward and security-level choice.
    JointOpt(Common),
    /// Agent-based simulation.
    Simulate(Common),
    /// Parameter sweep.
    Sweep(Common),
    /// Mean-field versus simulator gap report.
    Compare(Common),
    /// Run the experiment named in the scenario file.
    Run(Common),
    /// Re-execute a previous run from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (exp, common) = match cli.cmd {
        Cmd::SolveBr(c) => (Some(Experiment::SolveBr), c),
        Cmd::SteadyState(c) => (Some(Experiment::SteadyState), c),
        Cmd::Ne(c) => (Some(Experiment::Ne), c),
        Cmd::RewardOpt(c) => (Some(Experiment::RewardOpt), c),
        Cmd::JointOpt(c) => (Some(Experiment::JointOpt), c),
        Cmd::Simulate(c) => (Some(Experiment::Simulate), c),
        Cmd::Sweep(c) => (Some(Experiment::Sweep), c),
        Cmd::Compare(c) => (Some(Experiment::Compare), c),
        Cmd::Run(c) => (None, c),
        Cmd::Rerun { manifest, out } => return report(rerun_manifest(&manifest, &out)),
    };
    let overrides = Overrides { seed: common.seed, dt: common.dt, tol: common.tol };
    report(run_scenario(&common.scenario, exp, &overrides, &common.out))
}

fn report(r: d2dsec::Result<(PathBuf, d2dsec::Manifest)>) -> ExitCode {
    match r {
        Ok((path, m)) => {
            for o in &m.outputs {
                println!("{}  {} rows  {}", o.file, o.rows, &o.sha256[..16]);
            }
            println!("manifest: {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
