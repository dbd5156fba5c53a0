use serde::{Deserialize, Serialize};

use super::{StrokeClass, StrokeSegment};
use crate::ingest::{TrackSpace, TrajectoryTrack};
use crate::kinematics::{BodyPart, SkeletonFrame};
use crate::scalar::Real;

/// Frames after the peak over which the outgoing shuttle direction is measured.
pub const DEFAULT_OUTGOING_WINDOW: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeedTier {
    Slow,
    Mid,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outgoing {
    Down,
    Flat,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ClassifierThresholds<T> {
    /// Peak wrist speed at or above which a stroke is fast.
    pub fast_speed: T,
    /// Peak wrist speed below which a stroke is slow.
    pub slow_speed: T,
    /// Outgoing angle magnitude (degrees) separating up/down from flat.
    pub outgoing_deg: T,
    pub outgoing_window: u64,
}

impl<T: Real> Default for ClassifierThresholds<T> {
    fn default() -> Self {
        Self {
            fast_speed: T::of(6.0),
            slow_speed: T::of(2.5),
            outgoing_deg: T::of(20.0),
            outgoing_window: DEFAULT_OUTGOING_WINDOW,
        }
    }
}

impl<T: Real> ClassifierThresholds<T> {
    pub fn tier(&self, speed: T) -> SpeedTier {
        if speed >= self.fast_speed {
            SpeedTier::Fast
        } else if speed < self.slow_speed {
            SpeedTier::Slow
        } else {
            SpeedTier::Mid
        }
    }

    /// A missing angle counts as flat.
    pub fn outgoing(&self, angle: Option<T>) -> Outgoing {
        match angle {
            Some(a) if a < -self.outgoing_deg => Outgoing::Down,
            Some(a) if a > self.outgoing_deg => Outgoing::Up,
            _ => Outgoing::Flat,
        }
    }
}

/// Observable cues a stroke is classified from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StrokeCues<T> {
    pub contact_overhead: bool,
    /// Degrees, positive upwards; `None` without a usable trajectory.
    pub outgoing_angle: Option<T>,
    pub peak_wrist_speed: T,
}

/// The ordered decision table; the first matching rule wins.
pub fn decide(overhead: bool, outgoing: Outgoing, speed: SpeedTier) -> StrokeClass {
    use Outgoing::*;
    match (overhead, outgoing, speed) {
        (true, Down, SpeedTier::Fast) => StrokeClass::Smash,
        (true, Up, _) => StrokeClass::Clear,
        (true, Down, _) => StrokeClass::Slice,
        (false, Up, _) => StrokeClass::Lift,
        (_, _, SpeedTier::Slow) => StrokeClass::Block,
        _ => StrokeClass::Drive,
    }
}

pub fn classify<T: Real>(cues: &StrokeCues<T>, thresholds: &ClassifierThresholds<T>) -> StrokeClass {
    decide(
        cues.contact_overhead,
        thresholds.outgoing(cues.outgoing_angle),
        thresholds.tier(cues.peak_wrist_speed),
    )
}

/// Whether the racket wrist is above the neck (smaller image y) at the peak.
/// If either keypoint is missing there, the nearest frame inside the segment
/// holding both is used; with none, the contact counts as underarm.
pub fn contact_overhead<T: Real>(segment: &StrokeSegment, frames: &[SkeletonFrame<T>]) -> bool {
    let wrist = segment.handedness.wrist();
    let probe = |i: usize| {
        let f = frames.get(i)?;
        Some(f.point(wrist)?.y < f.point(BodyPart::Neck)?.y)
    };
    let max_offset = (segment.peak_frame - segment.start_frame).max(segment.end_frame - segment.peak_frame);
    for offset in 0..=max_offset {
        let before = segment.peak_frame.checked_sub(offset).filter(|&i| i >= segment.start_frame);
        let after = Some(segment.peak_frame + offset).filter(|&i| i <= segment.end_frame && offset > 0);
        for i in [before, after].into_iter().flatten() {
            if let Some(v) = probe(i) {
                return v;
            }
        }
    }
    false
}

/// Launch angle of the shuttle from the visible track in the frames
/// `[peak, peak + window]`. Only pixel-space tracks carry height; court-space
/// tracks lie on the floor plane and give `None`.
pub fn outgoing_angle<T: Real>(peak_frame: u64, track: &TrajectoryTrack<T>, window: u64) -> Option<T> {
    if track.space != TrackSpace::Pixel {
        return None;
    }
    let mut visible = track.visible_between(peak_frame, peak_frame + window);
    let first = visible.next()?;
    let last = visible.last()?;
    let rise = first.y - last.y;
    let run = (last.x - first.x).abs();
    if rise == T::zero() && run == T::zero() {
        return None;
    }
    Some(rise.atan2(run).to_degrees())
}

/// Classifies a segment of normalized frames. `speed` is the wrist speed
/// series the segment was detected on.
pub fn classify_stroke<T: Real>(
    segment: &StrokeSegment,
    frames: &[SkeletonFrame<T>],
    speed: &[Option<T>],
    trajectory: Option<&TrajectoryTrack<T>>,
    thresholds: &ClassifierThresholds<T>,
) -> StrokeClass {
    classify(&stroke_cues(segment, frames, speed, trajectory, thresholds), thresholds)
}

pub(crate) fn stroke_cues<T: Real>(
    segment: &StrokeSegment,
    frames: &[SkeletonFrame<T>],
    speed: &[Option<T>],
    trajectory: Option<&TrajectoryTrack<T>>,
    thresholds: &ClassifierThresholds<T>,
) -> StrokeCues<T> {
    let peak_wrist_speed = speed.get(segment.peak_frame).copied().flatten().unwrap_or_else(T::zero);
    let outgoing_angle = trajectory.zip(frames.get(segment.peak_frame)).and_then(|(track, frame)| {
        outgoing_angle(frame.frame_index, track, thresholds.outgoing_window)
    });
    StrokeCues {
        contact_overhead: contact_overhead(segment, frames),
        outgoing_angle,
        peak_wrist_speed,
    }
}
