//! Skeleton frames and joint-angle time series.
//!
//! Keypoints follow the BODY-25 layout. Angles are measured in degrees at the
//! middle keypoint of a triple, between the rays towards the outer two.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_usize, Real};

/// Number of body keypoints in a frame.
pub const KEYPOINT_COUNT: usize = 25;

/// Minimum ray length (pixels or normalized units) for a joint angle to be defined.
pub const RAY_EPSILON: f64 = 1e-9;

/// BODY-25 keypoint indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BodyPart {
    Nose = 0,
    Neck = 1,
    RShoulder = 2,
    RElbow = 3,
    RWrist = 4,
    LShoulder = 5,
    LElbow = 6,
    LWrist = 7,
    MidHip = 8,
    RHip = 9,
    RKnee = 10,
    RAnkle = 11,
    LHip = 12,
    LKnee = 13,
    LAnkle = 14,
    REye = 15,
    LEye = 16,
    REar = 17,
    LEar = 18,
    LBigToe = 19,
    LSmallToe = 20,
    LHeel = 21,
    RBigToe = 22,
    RSmallToe = 23,
    RHeel = 24,
}

impl BodyPart {
    pub const fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("degenerate joint: a ray has length at or below {RAY_EPSILON}")]
    DegenerateJoint,
    #[error("neck or mid-hip keypoint missing; cannot normalize skeleton")]
    MissingTorso,
    #[error("smoothing window must be odd and at least 1, got {0}")]
    BadWindow(usize),
    #[error("invalid angle definition `{name}`: {reason}")]
    InvalidAngleDefinition { name: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn sub(self, other: Self) -> Self {
        Self::new(self.x - other.x, self.y - other.y)
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> T {
        self.sub(other).norm()
    }
}

/// A keypoint slot. When `present` is false the coordinates carry no meaning.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Keypoint<T> {
    pub x: T,
    pub y: T,
    pub present: bool,
}

impl<T: Real> Keypoint<T> {
    pub fn present(x: T, y: T) -> Self {
        Self { x, y, present: true }
    }

    pub fn missing() -> Self {
        Self {
            x: T::zero(),
            y: T::zero(),
            present: false,
        }
    }

    pub fn point(&self) -> Option<Point2<T>> {
        self.present.then(|| Point2::new(self.x, self.y))
    }
}

/// One frame of body keypoints from a single view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SkeletonFrame<T> {
    pub frame_index: u64,
    pub view_id: String,
    pub keypoints: [Keypoint<T>; KEYPOINT_COUNT],
}

impl<T: Real> SkeletonFrame<T> {
    pub fn empty(frame_index: u64, view_id: impl Into<String>) -> Self {
        Self {
            frame_index,
            view_id: view_id.into(),
            keypoints: [Keypoint::missing(); KEYPOINT_COUNT],
        }
    }

    pub fn point(&self, part: BodyPart) -> Option<Point2<T>> {
        self.keypoints[part.index()].point()
    }

    pub fn point_at(&self, index: usize) -> Option<Point2<T>> {
        self.keypoints.get(index).and_then(Keypoint::point)
    }
}

/// Which hand holds the racket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Handedness {
    #[default]
    Right,
    Left,
}

impl Handedness {
    /// Wrist keypoint of the racket hand.
    pub fn wrist(self) -> BodyPart {
        match self {
            Handedness::Right => BodyPart::RWrist,
            Handedness::Left => BodyPart::LWrist,
        }
    }
}

/// An angle measured at keypoint `b` between rays `b→a` and `b→c`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AngleDefinition {
    pub name: String,
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl AngleDefinition {
    pub fn new(name: impl Into<String>, a: usize, b: usize, c: usize) -> Result<Self, KinematicsError> {
        let def = Self {
            name: name.into(),
            a,
            b,
            c,
        };
        def.validate()?;
        Ok(def)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let invalid = |reason: &str| KinematicsError::InvalidAngleDefinition {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.is_empty() {
            return Err(invalid("empty name"));
        }
        if [self.a, self.b, self.c].iter().any(|&i| i >= KEYPOINT_COUNT) {
            return Err(invalid("keypoint index out of range 0..=24"));
        }
        if self.a == self.b || self.b == self.c || self.a == self.c {
            return Err(invalid("keypoint indices must be distinct"));
        }
        Ok(())
    }

    fn parts(name: &str, a: BodyPart, b: BodyPart, c: BodyPart) -> Self {
        Self {
            name: name.to_string(),
            a: a.index(),
            b: b.index(),
            c: c.index(),
        }
    }
}

/// The eight tracked angles: elbows, shoulders, knees and hips on both sides.
pub fn canonical_angles() -> Vec<AngleDefinition> {
    use BodyPart::*;
    vec![
        AngleDefinition::parts("RElbow", RShoulder, RElbow, RWrist),
        AngleDefinition::parts("LElbow", LShoulder, LElbow, LWrist),
        AngleDefinition::parts("RShoulder", Neck, RShoulder, RElbow),
        AngleDefinition::parts("LShoulder", Neck, LShoulder, LElbow),
        AngleDefinition::parts("RKnee", RHip, RKnee, RAnkle),
        AngleDefinition::parts("LKnee", LHip, LKnee, LAnkle),
        AngleDefinition::parts("RHip", Neck, RHip, RKnee),
        AngleDefinition::parts("LHip", Neck, LHip, LKnee),
    ]
}

/// Angle at `b` in degrees, in `[0, 180]`.
///
/// Uses `atan2(|u × v|, u · v)`, which stays well conditioned near 0° and 180°
/// where an arccos of the normalized dot product loses precision.
pub fn angle_at_joint<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> Result<T, KinematicsError> {
    let u = a.sub(b);
    let v = c.sub(b);
    let eps = T::of(RAY_EPSILON);
    if u.norm() <= eps || v.norm() <= eps {
        return Err(KinematicsError::DegenerateJoint);
    }
    let cross = u.x * v.y - u.y * v.x;
    let dot = u.x * v.x + u.y * v.y;
    Ok(cross.abs().atan2(dot).to_degrees())
}

/// Per-frame values of one joint angle; `None` marks a missing frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct JointAngleSeries<T> {
    pub angle_name: String,
    pub values: Vec<Option<T>>,
    pub fps: T,
}

impl<T: Real> JointAngleSeries<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Evaluates every definition on every frame. A frame with a missing or
/// degenerate triple yields `None` for that angle.
pub fn compute_angle_series<T: Real>(
    frames: &[SkeletonFrame<T>],
    defs: &[AngleDefinition],
    fps: T,
) -> Vec<JointAngleSeries<T>> {
    defs.iter()
        .map(|def| JointAngleSeries {
            angle_name: def.name.clone(),
            values: frames
                .iter()
                .map(|frame| {
                    let a = frame.point_at(def.a)?;
                    let b = frame.point_at(def.b)?;
                    let c = frame.point_at(def.c)?;
                    angle_at_joint(a, b, c).ok()
                })
                .collect(),
            fps,
        })
        .collect()
}

/// Linearly interpolates interior missing runs no longer than `max_gap`.
/// Runs touching either end of the series are left missing.
pub fn fill_gaps<T: Real>(series: &JointAngleSeries<T>, max_gap: usize) -> JointAngleSeries<T> {
    let mut values = series.values.clone();
    let mut last_present: Option<usize> = None;
    for i in 0..values.len() {
        if values[i].is_none() {
            continue;
        }
        if let Some(prev) = last_present {
            let run = i - prev - 1;
            if run > 0 && run <= max_gap {
                let (v0, v1) = (values[prev].unwrap(), values[i].unwrap());
                let span = from_usize::<T>(i - prev);
                for (k, slot) in values.iter_mut().enumerate().take(i).skip(prev + 1) {
                    let w = from_usize::<T>(k - prev) / span;
                    *slot = Some(v0 + (v1 - v0) * w);
                }
            }
        }
        last_present = Some(i);
    }
    JointAngleSeries {
        angle_name: series.angle_name.clone(),
        values,
        fps: series.fps,
    }
}

/// Centered moving average over the present values inside each window.
/// Missing entries stay missing; windows are truncated at the series ends.
pub fn smooth<T: Real>(series: &JointAngleSeries<T>, window: usize) -> Result<JointAngleSeries<T>, KinematicsError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(KinematicsError::BadWindow(window));
    }
    let half = window / 2;
    let n = series.values.len();
    let values = (0..n)
        .map(|i| {
            series.values[i]?;
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n.saturating_sub(1));
            let (sum, count) = series.values[lo..=hi]
                .iter()
                .flatten()
                .fold((T::zero(), 0usize), |(s, c), &v| (s + v, c + 1));
            Some(sum / from_usize(count))
        })
        .collect();
    Ok(JointAngleSeries {
        angle_name: series.angle_name.clone(),
        values,
        fps: series.fps,
    })
}

/// Translates MidHip to the origin and scales by the neck–midhip distance.
pub fn normalize_skeleton<T: Real>(frame: &SkeletonFrame<T>) -> Result<SkeletonFrame<T>, KinematicsError> {
    let neck = frame.point(BodyPart::Neck).ok_or(KinematicsError::MissingTorso)?;
    let hip = frame.point(BodyPart::MidHip).ok_or(KinematicsError::MissingTorso)?;
    let torso = neck.distance(hip);
    if torso <= T::of(RAY_EPSILON) {
        return Err(KinematicsError::MissingTorso);
    }
    let mut out = frame.clone();
    for kp in out.keypoints.iter_mut().filter(|k| k.present) {
        kp.x = (kp.x - hip.x) / torso;
        kp.y = (kp.y - hip.y) / torso;
    }
    Ok(out)
}

/// Gap-fill limit in frames for a duration in seconds.
pub fn frames_for(seconds: f64, fps: f64) -> usize {
    (seconds * fps).round().max(0.0) as usize
}

/// Nearest odd window (at least 1) to `seconds × fps` frames.
pub fn odd_window_for(seconds: f64, fps: f64) -> usize {
    let target = seconds * fps;
    let k = ((target - 1.0) / 2.0).round().max(0.0);
    2 * k as usize + 1
}

/// Writes `frame,<angle_name>...` rows, leaving missing cells empty.
pub fn write_angle_csv<T: Real, W: io::Write>(
    writer: W,
    frame_indices: &[u64],
    series: &[JointAngleSeries<T>],
) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["frame".to_string()];
    header.extend(series.iter().map(|s| s.angle_name.clone()));
    out.write_record(&header)?;
    for (row, frame) in frame_indices.iter().enumerate() {
        let mut record = vec![frame.to_string()];
        for s in series {
            record.push(match s.values.get(row).copied().flatten() {
                Some(v) => v.to_string(),
                None => String::new(),
            });
        }
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}
