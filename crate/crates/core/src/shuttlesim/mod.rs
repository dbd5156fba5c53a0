//! Shuttlecock flight under quadratic drag, and synthetic fixture sessions
//! built on it.

mod fixture;
mod flight;

use std::path::PathBuf;

use thiserror::Error;

pub use fixture::{
    build_fixture, generate_fixture_session, write_fixture, FixtureCamera, FixtureSession, FixtureSpec, FixtureStroke,
    GroundTruth, InjectedFault, FIXTURE_VERSION, GROUND_TRUTH_FILE, MANIFEST_FILE,
};
pub use flight::{advance, sample_flight, simulate_to_landing, step_rk4, DragParams, Landing, ShuttleState, Vec3};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_MAX: f64 = 10.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation parameters: {0}")]
    BadParams(String),
    #[error("shuttle did not land within {t_max} s")]
    NoLanding { t_max: f64 },
    #[error("invalid fixture spec: {0}")]
    BadSpec(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
}
