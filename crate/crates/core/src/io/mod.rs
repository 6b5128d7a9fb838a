//! File formats: PFF field grids, camera and result JSON, trajectory CSV.

mod json;
mod pff;
mod trajectory_csv;

use std::path::PathBuf;

use thiserror::Error;

pub use json::{
    read_camera, read_json, read_result, write_camera, write_json, write_result, CameraJson, IntrinsicsJson,
    ResultJson, ViewJson,
};
pub use pff::{read_pff, read_pff_file, write_pff, write_pff_file, PffRecord, PFF_MAGIC, PFF_VERSION};
pub use trajectory_csv::{read_trajectory, read_trajectory_file, write_trajectory, write_trajectory_file};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}, expected \"PFLD\"")]
    Magic([u8; 4]),
    #[error("unsupported PFF version {0}")]
    Version(u32),
    #[error("truncated PFF data")]
    Truncated,
    #[error("PFF flags {0:#x}: up and latitude planes are mandatory")]
    Flags(u32),
    #[error("NaN in {plane} plane at sample {index}")]
    NaN { plane: &'static str, index: usize },
    #[error("trailing bytes after PFF planes")]
    Trailing,
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid record: {0}")]
    Invalid(String),
}

pub(crate) fn file_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}
