//! Swing detection, stroke classification and per-stroke features.

mod classify;
mod features;
mod segment;
mod speed;
mod swing;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::kinematics::Handedness;
pub use classify::{
    classify, classify_stroke, contact_overhead, decide, outgoing_angle, ClassifierThresholds, Outgoing, SpeedTier,
    StrokeCues, DEFAULT_OUTGOING_WINDOW,
};
pub use features::{extract_features, resample_phase, FeatureParams, StrokeFeatures, PHASE_SAMPLES};
pub use segment::{segment_strokes, SegmentParams};
pub use speed::wrist_speed_series;
pub use swing::{swing_metrics, SwingMetrics, SwingParams, JOULES_PER_KCAL};

/// The six stroke classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrokeClass {
    Smash,
    Lift,
    Clear,
    Block,
    Slice,
    Drive,
}

impl StrokeClass {
    pub const ALL: [StrokeClass; 6] = [
        StrokeClass::Smash,
        StrokeClass::Lift,
        StrokeClass::Clear,
        StrokeClass::Block,
        StrokeClass::Slice,
        StrokeClass::Drive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrokeClass::Smash => "Smash",
            StrokeClass::Lift => "Lift",
            StrokeClass::Clear => "Clear",
            StrokeClass::Block => "Block",
            StrokeClass::Slice => "Slice",
            StrokeClass::Drive => "Drive",
        }
    }

    /// Lowercase name for file names.
    pub fn slug(self) -> String {
        self.name().to_ascii_lowercase()
    }
}

impl fmt::Display for StrokeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A detected swing window. Frame fields index the session's dense frame sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrokeSegment {
    pub start_frame: usize,
    pub peak_frame: usize,
    pub end_frame: usize,
    pub view_id: String,
    pub handedness: Handedness,
}

impl StrokeSegment {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrokeError {
    #[error("stroke window [{start}, {end}] has too few present samples in every angle")]
    EmptyStroke { start: usize, end: usize },
    #[error("no IMU samples inside [{t0}, {t1}] s")]
    EmptyWindow { t0: f64, t1: f64 },
    #[error("segment [{start}, {end}] outside a sequence of {len} frames")]
    OutOfRange { start: usize, end: usize, len: usize },
}
