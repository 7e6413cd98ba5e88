//! Run report, canonical JSON and atomic output.

use super::config::{Command, RunConfig};
use super::CliError;
use crate::bounds::{BoundReport, Estimator, ZzForm};
use crate::expansions::{CurvatureIdentity, ExpansionFit, RegularityReport};
use crate::fisher::{FisherMatrix, FisherResult};
use crate::info::{CeForm, InfoValue};
use crate::numerics::{Estimate, Numerics};
use crate::observer::{DetectionTask, RocCurve};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const ARTIFACT: &str = "fomlab";

/// Field excluded from byte-for-byte reproducibility.
pub const WALL_TIME_KEY: &str = "wall_time_s";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "section", rename_all = "snake_case")]
pub enum Section {
    Fisher { theta: f64, fisher: FisherResult },
    FisherMatrix { theta: Vec<f64>, fisher: FisherMatrix },
    BayesianFisher { fisher: FisherResult },
    BayesianFisherMatrix { fisher: FisherMatrix },
    Roc { task: DetectionTask, curve: RocCurve },
    Auc { task: DetectionTask, auc: Estimate, detectability: f64 },
    Mpe { task: DetectionTask, mpe: Estimate },
    Entropy { form: CeForm, binary_entropy: f64, conditional_entropy: InfoValue },
    ShannonInfo { si: InfoValue },
    Emse { estimator: Estimator, emse: Estimate },
    Bound { report: BoundReport },
    ZivZakai { form: ZzForm, bound: Estimate },
    Expansion { fit: ExpansionFit },
    Regularity { report: RegularityReport },
    CurvatureIdentity { theta: f64, identity: CurvatureIdentity },
    Skipped { command: Command, reason: String },
}

/// Machine-readable failure description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorObject {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub artifact: String,
    pub version: String,
    pub config: RunConfig,
    /// Numerics after defaults were filled in.
    pub numerics: Numerics,
    pub results: Vec<Section>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorObject>,
    pub wall_time_s: f64,
}

impl RunReport {
    /// Pretty JSON with keys in sorted order.
    pub fn to_json(&self) -> Result<String, CliError> {
        let v = serde_json::to_value(self).map_err(|e| CliError::io(format!("cannot serialise report: {e}")))?;
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::io(format!("cannot parse report: {e}")))
    }

    /// Canonical JSON without the wall-time field, for reproducibility checks.
    pub fn canonical_without_time(&self) -> Result<String, CliError> {
        let mut v = serde_json::to_value(self).map_err(|e| CliError::io(e.to_string()))?;
        if let Some(o) = v.as_object_mut() {
            o.remove(WALL_TIME_KEY);
        }
        serde_json::to_string_pretty(&v).map_err(|e| CliError::io(e.to_string()))
    }

    pub fn roc_csv(&self) -> Option<String> {
        self.results.iter().find_map(|s| match s {
            Section::Roc { curve, .. } => Some(curve.to_csv()),
            _ => None,
        })
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, renamed into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::io(format!("cannot create temporary file in {}: {e}", dir.display())))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.flush())
        .map_err(|e| CliError::io(format!("cannot write report: {e}")))?;
    // temporary files are created owner-only
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(|e| CliError::io(format!("cannot set report permissions: {e}")))?;
    }
    tmp.persist(path)
        .map_err(|e| CliError::io(format!("cannot move report to {}: {}", path.display(), e.error)))?;
    Ok(())
}
