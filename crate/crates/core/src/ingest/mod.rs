//! Parsing and validation of external session inputs: pose keypoint frames,
//! shuttle trajectory tracks, IMU traces and session manifests.

mod imu;
mod manifest;
mod pose;
mod trajectory;
mod validate;

use std::path::PathBuf;

use thiserror::Error;

pub use imu::{parse_imu, write_imu_csv, ImuSample, ImuTrace};
pub use manifest::{load_manifest, Role, SessionManifest, ViewEntry};
pub use pose::{parse_pose_frames, pose_file_name, write_pose_file, RawKeypoint, DEFAULT_CONFIDENCE_FLOOR};
pub use trajectory::{parse_trajectory, write_trajectory_csv, TrackSample, TrackSpace, TrajectoryTrack};
pub use validate::{
    validate_session, CheckStatus, SessionObservations, ValidationCheck, ValidationReport, DEFAULT_V_MIN,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },
    #[error("session contains no frames")]
    EmptySession,
    #[error("{path}: person record holds {count} values, expected 75")]
    BadKeypointCount { path: PathBuf, count: usize },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("frame indices not strictly increasing at line {line}")]
    NonMonotoneFrames { line: u64 },
    #[error("timestamps not strictly increasing at line {line}")]
    NonMonotoneTime { line: u64 },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("confidence floor {0} outside [0, 1]")]
    BadConfidenceFloor(f64),
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        IngestError::MalformedFile {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
