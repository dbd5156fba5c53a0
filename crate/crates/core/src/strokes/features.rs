use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::classify::{classify, stroke_cues, ClassifierThresholds};
use super::{StrokeClass, StrokeError, StrokeSegment};
use crate::ingest::TrajectoryTrack;
use crate::kinematics::{JointAngleSeries, SkeletonFrame};
use crate::scalar::{from_usize, Real};

/// Samples per phase-normalized angle series (phase 0 to 1 inclusive).
pub const PHASE_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StrokeFeatures<T> {
    pub class: StrokeClass,
    pub contact_overhead: bool,
    /// Torso lengths per second.
    pub peak_wrist_speed: T,
    /// Degrees, positive upwards.
    pub outgoing_shuttle_angle: Option<T>,
    /// Per angle name; `None` when the window holds a gap longer than allowed.
    pub angle_phase_series: BTreeMap<String, Option<Vec<T>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FeatureParams<T> {
    pub max_gap: usize,
    pub thresholds: ClassifierThresholds<T>,
}

/// Resamples a window onto `PHASE_SAMPLES` evenly spaced phases by linear
/// interpolation between present samples.
///
/// Returns `None` if fewer than two samples are present or any missing run
/// (including one touching a window edge) is longer than `max_gap`. Short
/// edge runs hold the nearest present value.
pub fn resample_phase<T: Real>(window: &[Option<T>], max_gap: usize) -> Option<Vec<T>> {
    let present: Vec<(usize, T)> = window.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
    if present.len() < 2 {
        return None;
    }
    let leading = present[0].0;
    let trailing = window.len() - 1 - present[present.len() - 1].0;
    let interior = present.windows(2).map(|w| w[1].0 - w[0].0 - 1).max().unwrap_or(0);
    if leading.max(trailing).max(interior) > max_gap {
        return None;
    }
    let last = from_usize::<T>(window.len() - 1);
    let denom = from_usize::<T>(PHASE_SAMPLES - 1);
    let mut seg = 0;
    Some(
        (0..PHASE_SAMPLES)
            .map(|k| {
                let t = from_usize::<T>(k) * last / denom;
                while seg + 2 < present.len() && from_usize::<T>(present[seg + 1].0) <= t {
                    seg += 1;
                }
                let (i0, v0) = present[seg];
                let (i1, v1) = present[seg + 1];
                let (t0, t1) = (from_usize::<T>(i0), from_usize::<T>(i1));
                if t <= t0 {
                    v0
                } else if t >= t1 {
                    v1
                } else {
                    v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
                }
            })
            .collect(),
    )
}

/// Builds the classified feature record of one segment.
///
/// `frames` are normalized skeletons, `speed` the wrist speed series and
/// `angles` the per-frame angle series, all sharing the same frame positions.
pub fn extract_features<T: Real>(
    segment: &StrokeSegment,
    frames: &[SkeletonFrame<T>],
    speed: &[Option<T>],
    angles: &[JointAngleSeries<T>],
    trajectory: Option<&TrajectoryTrack<T>>,
    params: &FeatureParams<T>,
) -> Result<StrokeFeatures<T>, StrokeError> {
    let (start, end) = (segment.start_frame, segment.end_frame);
    let len = angles.iter().map(|a| a.len()).min().unwrap_or(0);
    if start > end || end >= len {
        return Err(StrokeError::OutOfRange { start, end, len });
    }
    let angle_phase_series: BTreeMap<String, Option<Vec<T>>> = angles
        .iter()
        .map(|a| (a.angle_name.clone(), resample_phase(&a.values[start..=end], params.max_gap)))
        .collect();
    if angle_phase_series.values().all(Option::is_none) {
        return Err(StrokeError::EmptyStroke { start, end });
    }
    let cues = stroke_cues(segment, frames, speed, trajectory, &params.thresholds);
    Ok(StrokeFeatures {
        class: classify(&cues, &params.thresholds),
        contact_overhead: cues.contact_overhead,
        peak_wrist_speed: cues.peak_wrist_speed,
        outgoing_shuttle_angle: cues.outgoing_angle,
        angle_phase_series,
    })
}
