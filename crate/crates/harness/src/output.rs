//! CSV bundles and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::experiments::Table;
use crate::scenario::{Experiment, Scenario};

/// Hex digits of the scenario hash carried in file names.
pub const HASH_PREFIX: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: Experiment,
    pub scenario_hash: String,
    pub seed: u64,
    pub scenario: Scenario,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let m: Manifest = serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Parse {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        m.scenario.validate()?;
        Ok(m)
    }
}

/// RFC 4180 rendering: comma separated, CRLF line ends, quoted as needed.
pub fn to_csv(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| HarnessError::io("<csv buffer>", e.into_error()))
}

/// Writes through a temporary sibling and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub fn file_name(table: &str, hash: &str) -> String {
    format!("{table}-{}.csv", &hash[..HASH_PREFIX])
}

pub fn manifest_name(experiment: Experiment, hash: &str) -> String {
    format!("manifest-{}-{}.json", experiment.name(), &hash[..HASH_PREFIX])
}

/// Writes every table plus the manifest and returns the manifest path.
pub fn write_bundle(out: &Path, scenario: &Scenario, experiment: Experiment, tables: &[Table]) -> Result<(PathBuf, Manifest)> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let hash = scenario.hash();
    let mut outputs = Vec::with_capacity(tables.len());
    for t in tables {
        let bytes = to_csv(t)?;
        let name = file_name(&t.name, &hash);
        write_atomic(&out.join(&name), &bytes)?;
        outputs.push(OutputFile { file: name, rows: t.rows.len(), sha256: hex::encode(Sha256::digest(&bytes)) });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment,
        scenario_hash: hash.clone(),
        seed: scenario.seed,
        scenario: scenario.clone(),
        outputs,
    };
    let path = out.join(manifest_name(experiment, &hash));
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&path, &json)?;
    Ok((path, manifest))
}
