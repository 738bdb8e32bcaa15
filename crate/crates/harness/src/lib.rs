//! Scenario files, experiment recipes and result bundles for
//! `d2dsec-core`.

pub mod error;
pub mod experiments;
pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

pub use error::{HarnessError, Result};
pub use experiments::{run_experiment, Table};
pub use output::{write_bundle, Manifest};
pub use scenario::{Experiment, Overrides, Scenario};

/// Loads, overrides, runs and writes one scenario. The experiment defaults
/// to the one named in the file.
pub fn run_scenario(
    path: &Path,
    experiment: Option<Experiment>,
    overrides: &Overrides,
    out: &Path,
) -> Result<(PathBuf, Manifest)> {
    let mut scenario = Scenario::load(path)?;
    scenario.apply(overrides)?;
    let exp = experiment
        .or(scenario.experiment)
        .ok_or_else(|| HarnessError::invalid("experiment", "not given on the command line or in the scenario"))?;
    let tables = run_experiment(&scenario, exp)?;
    write_bundle(out, &scenario, exp, &tables)
}

/// Re-executes the scenario echoed in a manifest.
pub fn rerun_manifest(path: &Path, out: &Path) -> Result<(PathBuf, Manifest)> {
    let m = Manifest::load(path)?;
    let tables = run_experiment(&m.scenario, m.experiment)?;
    write_bundle(out, &m.scenario, m.experiment, &tables)
}
