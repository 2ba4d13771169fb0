//! Library side of the `petreg` command: bound reports, single runs and
//! parameter sweeps over scenario documents.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use petreg::{self as core, ScenarioDocument};

mod bounds;
mod run;
mod sweep;

pub use bounds::{cmd_bounds, AgentBounds, BoundsReport};
pub use run::{check_periods, cmd_run, RunSummary};
pub use sweep::{apply_axis, cmd_sweep, parse_axis, parse_values, Axis, SweepRow, SweepTable};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] petreg::Error),

    #[error("{0}")]
    BoundViolation(String),

    #[error("unknown axis path `{0}`")]
    UnknownAxis(String),

    #[error("bad sweep values: {0}")]
    BadValues(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("serializing {what}: {message}")]
    Serialize { what: &'static str, message: String },
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(petreg::Error::Schema { .. })
            | CliError::UnknownAxis(_)
            | CliError::BadValues(_) => 2,
            CliError::Core(petreg::Error::Infeasible(_)) | CliError::BoundViolation(_) => 3,
            CliError::Core(petreg::Error::Divergence { .. }) => 4,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_document(path: &Path) -> Result<ScenarioDocument> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(ScenarioDocument::from_toml(&text)?)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub(crate) fn to_json<T: serde::Serialize>(what: &'static str, value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Serialize {
        what,
        message: e.to_string(),
    })?;
    out.push(b'\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let schema = petreg::Error::Schema {
            path: "sim".into(),
            message: "x".into(),
        };
        assert_eq!(CliError::from(schema).exit_code(), 2);
        assert_eq!(CliError::UnknownAxis("a.b".into()).exit_code(), 2);
        assert_eq!(CliError::BoundViolation("T".into()).exit_code(), 3);
        assert_eq!(
            CliError::from(petreg::Error::Infeasible("zeta1".into())).exit_code(),
            3
        );
        let div = petreg::Error::Divergence {
            time: 1.0,
            detail: "nan".into(),
        };
        assert_eq!(CliError::from(div).exit_code(), 4);
        assert_eq!(
            CliError::from(petreg::Error::Internal("x".into())).exit_code(),
            1
        );
    }
}
