//! Run manifest embedded in history files: enough to reproduce a run
//! bit-for-bit in deterministic mode.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use psdid::problems::{write_matrix_market, OscillatorSpec};
use psdid::{ConvergenceHistory, Error, Pencil, SolverConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

impl InputRecord {
    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let bytes = std::fs::read(path)?;
        Ok(InputRecord {
            path: path.display().to_string(),
            sha256: hex(&Sha256::digest(&bytes)),
        })
    }

    /// Hash an inline-generated pencil through its Matrix Market encoding.
    pub fn generated(spec: &OscillatorSpec, pencil: &Pencil) -> Result<Self, Error> {
        let dir = std::env::temp_dir().join(format!("psdid-hash-{}", std::process::id()));
        std::fs::create_dir_all(&dir)?;
        let mut hasher = Sha256::new();
        for (name, m) in [("H", pencil.h()), ("S", pencil.s())] {
            let path = dir.join(format!("{name}.mtx"));
            write_matrix_market(m, &path)?;
            hasher.update(std::fs::read(&path)?);
            std::fs::remove_file(&path)?;
        }
        let _ = std::fs::remove_dir(&dir);
        Ok(InputRecord {
            path: format!(
                "generated://oscillator/{:?}/{}",
                spec.discretization, spec.n_elem
            ),
            sha256: hex(&hasher.finalize()),
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: SolverConfig,
    pub inputs: Vec<InputRecord>,
    pub seed: u64,
    pub artifact_version: String,
    pub started_at_unix: u64,
    pub finished_at_unix: u64,
}

impl Manifest {
    pub fn new(
        command: &str,
        cfg: &SolverConfig,
        inputs: Vec<InputRecord>,
        deterministic: bool,
    ) -> Self {
        Manifest {
            command: command.to_string(),
            config: cfg.clone(),
            inputs,
            seed: cfg.rng_seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at_unix: if deterministic { 0 } else { now_unix() },
            finished_at_unix: 0,
        }
    }

    pub fn finish(&mut self, deterministic: bool) {
        self.finished_at_unix = if deterministic { 0 } else { now_unix() };
    }
}

/// On-disk history file: manifest plus one record per target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryFile {
    pub manifest: Manifest,
    pub targets: Vec<ConvergenceHistory>,
}
