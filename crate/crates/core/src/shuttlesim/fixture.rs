//! Deterministic synthetic sessions with ground truth.
//!
//! A stick figure seen side-on performs one swing per stroke. Each class has
//! start and finish values for the eight tracked joint angles; a swing eases
//! between them with a quintic smoothstep, and its duration is chosen so the
//! wrist reaches the class's peak speed. Between swings the figure holds still,
//! then moves slowly into the next start pose. The shuttle is launched at the
//! frame of peak wrist speed and flown with the drag model.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.json        session manifest, one view
//! pose/frame_*.json    BODY-25 keypoint files, one per frame
//! trajectory.csv       pixel-space shuttle track
//! imu.csv              wrist IMU, clock aligned with video time
//! ground_truth.json    strokes, classes, landings and injected faults
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::flight::{sample_flight, simulate_to_landing, DragParams, ShuttleState, Vec3};
use super::{SimError, DEFAULT_DT, DEFAULT_T_MAX};
use crate::court::{zone_of, CourtGeometry, ZoneGrid};
use crate::ingest::{
    pose_file_name, write_imu_csv, write_pose_file, write_trajectory_csv, ImuSample, ImuTrace, Role, SessionManifest,
    TrackSample, TrackSpace, TrajectoryTrack, ViewEntry,
};
use crate::kinematics::{normalize_skeleton, BodyPart, Handedness, Keypoint, SkeletonFrame, KEYPOINT_COUNT};
use crate::strokes::{wrist_speed_series, StrokeClass};

pub const FIXTURE_VERSION: &str = "shuttlesense-fixture/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
const POSE_DIR: &str = "pose";
const POSE_PREFIX: &str = "frame";
const TRAJECTORY_FILE: &str = "trajectory.csv";
const IMU_FILE: &str = "imu.csv";
const VIEW_ID: &str = "side";
const KEYPOINT_CONFIDENCE: f64 = 0.9;

/// Angle order used throughout this module; matches `canonical_angles`.
const ANGLE_NAMES: [&str; 8] = ["RElbow", "LElbow", "RShoulder", "LShoulder", "RKnee", "LKnee", "RHip", "LHip"];
const ELBOW: usize = 0;
const SHOULDER: usize = 2;
const KNEE: usize = 4;
const HIP: usize = 6;

// Segment lengths in meters.
const TORSO: f64 = 0.50;
const SHOULDER_DROP: f64 = 0.05;
const UPPER_ARM: f64 = 0.30;
const FOREARM: f64 = 0.27;
const THIGH: f64 = 0.45;
const SHANK: f64 = 0.43;
const RACKET_REACH: f64 = 0.35;

/// Wrist speed ceiling between swings, torso lengths per second.
const RECOVERY_SPEED: f64 = 0.9;
const HOLD_S: f64 = 0.2;
/// Width of the smooth ramp on either side of a fault's phase span.
const FAULT_RAMP: f64 = 0.08;
const ANGLE_JITTER_DEG: f64 = 2.0;
const LEAN_JITTER_DEG: f64 = 1.5;
const ELEVATION_JITTER_DEG: f64 = 0.5;
const SPEED_JITTER: f64 = 0.03;
const CALIBRATION_STEPS: usize = 400;

/// Side-on camera looking across the court: image x runs along the court
/// length, image y down from the floor line, court width foreshortened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureCamera {
    pub origin_x: f64,
    pub origin_y: f64,
    /// Pixels per meter along the court length and in height.
    pub scale: f64,
    /// Pixels per meter across the court width.
    pub depth: f64,
}

impl Default for FixtureCamera {
    fn default() -> Self {
        Self {
            origin_x: 80.0,
            origin_y: 1000.0,
            scale: 60.0,
            depth: 12.0,
        }
    }
}

impl FixtureCamera {
    /// Pixel position of court point `(x, y)` at height `z`.
    pub fn project(&self, x: f64, y: f64, z: f64) -> (f64, f64) {
        (self.origin_x + self.scale * y, self.origin_y - self.scale * z - self.depth * x)
    }

    /// Maps floor-level pixels back to court meters.
    pub fn homography(&self) -> [[f64; 3]; 3] {
        [
            [0.0, -1.0 / self.depth, self.origin_y / self.depth],
            [1.0 / self.scale, 0.0, -self.origin_x / self.scale],
            [0.0, 0.0, 1.0],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectedFault {
    pub angle_name: String,
    pub class: StrokeClass,
    /// Phase interval `[from, to]` within the swing, in `[0, 1]`.
    pub phase_span: [f64; 2],
    pub offset_deg: f64,
}

fn default_session_id() -> String {
    "fixture".into()
}
fn default_subject_id() -> String {
    "synthetic".into()
}
fn default_role() -> Role {
    Role::Trainee
}
fn default_mix() -> BTreeMap<StrokeClass, f64> {
    StrokeClass::ALL.iter().map(|&c| (c, 1.0 / 6.0)).collect()
}
fn default_sigma() -> f64 {
    0.3
}
fn default_fps() -> f64 {
    60.0
}
fn default_imu_rate() -> f64 {
    200.0
}
fn default_jitter() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    pub seed: u64,
    #[serde(default = "default_session_id")]
    pub session_id: String,
    #[serde(default = "default_subject_id")]
    pub subject_id: String,
    #[serde(default = "default_role")]
    pub role: Role,
    #[serde(default)]
    pub handedness: Handedness,
    /// Class probabilities; classes absent from the map are not generated.
    #[serde(default = "default_mix")]
    pub class_mix: BTreeMap<StrokeClass, f64>,
    pub strokes_per_class: usize,
    #[serde(default)]
    pub injected_faults: Vec<InjectedFault>,
    /// Standard deviation of landing points around the aim point, meters.
    #[serde(default = "default_sigma")]
    pub landing_sigma: f64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default = "default_imu_rate")]
    pub imu_rate: f64,
    /// Multiplier on the per-stroke variation of poses, speeds and launch angles.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default)]
    pub drag: DragParams<f64>,
    #[serde(default)]
    pub camera: FixtureCamera,
}

impl FixtureSpec {
    pub fn new(seed: u64, strokes_per_class: usize) -> Self {
        Self {
            seed,
            session_id: default_session_id(),
            subject_id: default_subject_id(),
            role: default_role(),
            handedness: Handedness::Right,
            class_mix: default_mix(),
            strokes_per_class,
            injected_faults: Vec::new(),
            landing_sigma: default_sigma(),
            fps: default_fps(),
            imu_rate: default_imu_rate(),
            jitter: default_jitter(),
            drag: DragParams::default(),
            camera: FixtureCamera::default(),
        }
    }

    pub fn check(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::BadSpec(m));
        if self.session_id.is_empty() {
            return bad("session_id is empty".into());
        }
        if !(self.fps.is_finite() && (10.0..=1000.0).contains(&self.fps)) {
            return bad(format!("fps must lie in [10, 1000], got {}", self.fps));
        }
        if !(self.imu_rate.is_finite() && self.imu_rate > 0.0) {
            return bad("imu_rate must be positive".into());
        }
        if !(self.landing_sigma.is_finite() && self.landing_sigma >= 0.0) {
            return bad("landing_sigma must be non-negative".into());
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return bad("jitter must be non-negative".into());
        }
        if self.class_mix.is_empty() {
            return bad("class_mix is empty".into());
        }
        if self.class_mix.values().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return bad("class probabilities must be non-negative".into());
        }
        let total: f64 = self.class_mix.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("class probabilities sum to {total}, expected 1"));
        }
        for f in &self.injected_faults {
            if !ANGLE_NAMES.contains(&f.angle_name.as_str()) {
                return bad(format!("unknown angle `{}` in injected fault", f.angle_name));
            }
            let [a, b] = f.phase_span;
            if !(0.0 <= a && a < b && b <= 1.0) {
                return bad(format!("fault phase span [{a}, {b}] must satisfy 0 <= from < to <= 1"));
            }
            if !f.offset_deg.is_finite() {
                return bad("fault offset must be finite".into());
            }
        }
        self.drag.check().map_err(|e| SimError::BadSpec(e.to_string()))
    }

    /// Strokes per class: `p × strokes_per_class × |classes with p > 0|`,
    /// rounded by largest remainder.
    pub fn class_counts(&self) -> BTreeMap<StrokeClass, usize> {
        let support = self.class_mix.values().filter(|&&p| p > 0.0).count();
        let total = self.strokes_per_class * support;
        let quotas: Vec<(StrokeClass, f64)> = self
            .class_mix
            .iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|(&c, &p)| (c, p * total as f64))
            .collect();
        let mut counts: BTreeMap<StrokeClass, usize> = quotas.iter().map(|&(c, q)| (c, q.floor() as usize)).collect();
        let assigned: usize = counts.values().sum();
        let mut by_remainder = quotas.clone();
        by_remainder.sort_by(|a, b| {
            let (ra, rb) = (a.1 - a.1.floor(), b.1 - b.1.floor());
            rb.partial_cmp(&ra).expect("finite").then(a.0.cmp(&b.0))
        });
        for (c, _) in by_remainder.iter().take(total.saturating_sub(assigned)) {
            *counts.get_mut(c).expect("present") += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureStroke {
    pub index: usize,
    pub class: StrokeClass,
    /// First and last frame of the swing; the pose is still outside them.
    pub start_frame: u64,
    pub contact_frame: u64,
    pub end_frame: u64,
    /// Ankle midpoint at contact, court meters.
    pub origin: [f64; 2],
    pub origin_zone: Option<usize>,
    pub launch_position: [f64; 3],
    pub launch_velocity: [f64; 3],
    pub landing: [f64; 2],
    pub landing_frame: u64,
    pub flight_time: f64,
    pub target_peak_speed: f64,
    pub injected_faults: Vec<InjectedFault>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub version: String,
    pub seed: u64,
    pub session_id: String,
    pub role: Role,
    pub handedness: Handedness,
    pub fps: f64,
    pub frame_count: u64,
    pub camera: FixtureCamera,
    pub class_counts: BTreeMap<StrokeClass, usize>,
    pub injected_faults: Vec<InjectedFault>,
    pub strokes: Vec<FixtureStroke>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSession {
    pub manifest: SessionManifest,
    pub frames: Vec<SkeletonFrame<f64>>,
    pub track: TrajectoryTrack<f64>,
    pub imu: ImuTrace<f64>,
    pub truth: GroundTruth,
}

/// Per-class swing: start and finish interior angles for the racket arm,
/// the free arm and both legs, plus trunk lean and launch geometry.
struct ClassProfile {
    racket_shoulder: (f64, f64),
    racket_elbow: (f64, f64),
    /// +1 bends the forearm back over the head, −1 bends it down.
    racket_bend: f64,
    free_shoulder: (f64, f64),
    free_elbow: (f64, f64),
    hip: (f64, f64),
    knee: (f64, f64),
    lean: (f64, f64),
    peak_speed: f64,
    elevation_deg: f64,
    /// Aim distance down the court from the launch point, meters.
    distance: f64,
    /// Range of the player's court y position.
    court_y: (f64, f64),
}

fn profile(class: StrokeClass) -> ClassProfile {
    match class {
        StrokeClass::Smash => ClassProfile {
            racket_shoulder: (35.0, 80.0),
            racket_elbow: (70.0, 170.0),
            racket_bend: 1.0,
            free_shoulder: (60.0, 30.0),
            free_elbow: (150.0, 120.0),
            hip: (165.0, 175.0),
            knee: (160.0, 170.0),
            lean: (0.0, 10.0),
            peak_speed: 8.5,
            elevation_deg: -25.0,
            distance: 3.5,
            court_y: (3.5, 5.5),
        },
        StrokeClass::Clear => ClassProfile {
            racket_shoulder: (25.0, 65.0),
            racket_elbow: (60.0, 165.0),
            racket_bend: 1.0,
            free_shoulder: (50.0, 30.0),
            free_elbow: (150.0, 130.0),
            hip: (170.0, 175.0),
            knee: (165.0, 172.0),
            lean: (-5.0, 5.0),
            peak_speed: 4.8,
            elevation_deg: 50.0,
            distance: 9.0,
            court_y: (0.8, 3.5),
        },
        StrokeClass::Slice => ClassProfile {
            racket_shoulder: (35.0, 75.0),
            racket_elbow: (80.0, 165.0),
            racket_bend: 1.0,
            free_shoulder: (55.0, 35.0),
            free_elbow: (150.0, 130.0),
            hip: (168.0, 174.0),
            knee: (162.0, 170.0),
            lean: (0.0, 8.0),
            peak_speed: 4.0,
            elevation_deg: -30.0,
            distance: 2.8,
            court_y: (3.5, 5.5),
        },
        StrokeClass::Lift => ClassProfile {
            racket_shoulder: (165.0, 70.0),
            racket_elbow: (150.0, 170.0),
            racket_bend: -1.0,
            free_shoulder: (150.0, 120.0),
            free_elbow: (160.0, 150.0),
            hip: (150.0, 165.0),
            knee: (140.0, 160.0),
            lean: (20.0, 10.0),
            peak_speed: 4.2,
            elevation_deg: 55.0,
            distance: 7.0,
            court_y: (3.5, 5.5),
        },
        StrokeClass::Drive => ClassProfile {
            racket_shoulder: (100.0, 80.0),
            racket_elbow: (80.0, 165.0),
            racket_bend: 1.0,
            free_shoulder: (110.0, 100.0),
            free_elbow: (150.0, 140.0),
            hip: (160.0, 165.0),
            knee: (150.0, 155.0),
            lean: (10.0, 10.0),
            peak_speed: 4.5,
            elevation_deg: 4.0,
            distance: 6.0,
            court_y: (3.0, 5.0),
        },
        StrokeClass::Block => ClassProfile {
            racket_shoulder: (105.0, 90.0),
            racket_elbow: (120.0, 150.0),
            racket_bend: -1.0,
            free_shoulder: (120.0, 115.0),
            free_elbow: (150.0, 150.0),
            hip: (155.0, 158.0),
            knee: (145.0, 148.0),
            lean: (15.0, 15.0),
            peak_speed: 2.0,
            elevation_deg: 10.0,
            distance: 3.0,
            court_y: (4.0, 5.5),
        },
    }
}

/// Signed generating parameters of one body configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pose {
    lean: f64,
    /// Upper arm rotated forward from the trunk axis, `[right, left]`.
    shoulder: [f64; 2],
    /// Forearm rotated from the upper arm direction, counter-clockwise positive.
    elbow: [f64; 2],
    hip: [f64; 2],
    knee: [f64; 2],
    court: (f64, f64),
}

impl Pose {
    fn lerp(&self, other: &Pose, w: f64) -> Pose {
        let l = |a: f64, b: f64| a + (b - a) * w;
        let l2 = |a: [f64; 2], b: [f64; 2]| [l(a[0], b[0]), l(a[1], b[1])];
        Pose {
            lean: l(self.lean, other.lean),
            shoulder: l2(self.shoulder, other.shoulder),
            elbow: l2(self.elbow, other.elbow),
            hip: l2(self.hip, other.hip),
            knee: l2(self.knee, other.knee),
            court: (l(self.court.0, other.court.0), l(self.court.1, other.court.1)),
        }
    }
}

type P2 = (f64, f64);

fn rotate(v: P2, deg: f64) -> P2 {
    let (s, c) = deg.to_radians().sin_cos();
    (v.0 * c - v.1 * s, v.0 * s + v.1 * c)
}

fn along(p: P2, dir: P2, len: f64) -> P2 {
    (p.0 + dir.0 * len, p.1 + dir.1 * len)
}

/// Keypoints in the body plane: `u` along the court length from the mid-hip,
/// `z` height above the floor.
struct Body {
    points: [P2; KEYPOINT_COUNT],
    racket_forearm: P2,
}

fn body(pose: &Pose, racket: usize) -> Body {
    use BodyPart::*;
    let trunk = rotate((0.0, 1.0), -pose.lean);
    let forward = rotate(trunk, -90.0);
    let hip = (0.0, 0.0);
    let neck = along(hip, trunk, TORSO);
    let shoulder = along(neck, trunk, -SHOULDER_DROP);
    let mut pts = [(0.0, 0.0); KEYPOINT_COUNT];
    let mut forearms = [(0.0, 0.0); 2];
    for side in 0..2 {
        let upper = rotate(trunk, -pose.shoulder[side]);
        let elbow = along(shoulder, upper, UPPER_ARM);
        let fore = rotate(upper, pose.elbow[side]);
        let wrist = along(elbow, fore, FOREARM);
        forearms[side] = fore;
        let (s, e, w) = if side == 0 { (RShoulder, RElbow, RWrist) } else { (LShoulder, LElbow, LWrist) };
        pts[s.index()] = shoulder;
        pts[e.index()] = elbow;
        pts[w.index()] = wrist;

        let sign = if side == 0 { -1.0 } else { 1.0 };
        let thigh = rotate(trunk, sign * pose.hip[side]);
        let knee = along(hip, thigh, THIGH);
        let shank = rotate((-thigh.0, -thigh.1), pose.knee[side]);
        let ankle = along(knee, shank, SHANK);
        let (h, k, a, toe, small, heel) = if side == 0 {
            (RHip, RKnee, RAnkle, RBigToe, RSmallToe, RHeel)
        } else {
            (LHip, LKnee, LAnkle, LBigToe, LSmallToe, LHeel)
        };
        pts[h.index()] = hip;
        pts[k.index()] = knee;
        pts[a.index()] = ankle;
        pts[toe.index()] = (ankle.0 + 0.16, ankle.1 - 0.04);
        pts[small.index()] = (ankle.0 + 0.13, ankle.1 - 0.04);
        pts[heel.index()] = (ankle.0 - 0.05, ankle.1 - 0.03);
    }
    let head = along(neck, trunk, 0.15);
    pts[Neck.index()] = neck;
    pts[MidHip.index()] = hip;
    pts[Nose.index()] = along(head, forward, 0.09);
    pts[REye.index()] = along(along(head, forward, 0.07), trunk, 0.03);
    pts[LEye.index()] = along(along(head, forward, 0.06), trunk, 0.03);
    pts[REar.index()] = along(head, forward, -0.02);
    pts[LEar.index()] = along(head, forward, -0.03);

    let ground = -(pts[RAnkle.index()].1 + pts[LAnkle.index()].1) / 2.0;
    for p in pts.iter_mut() {
        p.1 += ground;
    }
    Body {
        points: pts,
        racket_forearm: forearms[racket],
    }
}

fn wrist_normalized(pose: &Pose, racket: usize) -> P2 {
    let b = body(pose, racket);
    let w = b.points[if racket == 0 { BodyPart::RWrist } else { BodyPart::LWrist }.index()];
    let h = b.points[BodyPart::MidHip.index()];
    ((w.0 - h.0) / TORSO, (w.1 - h.1) / TORSO)
}

fn smoothstep5(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (x * 6.0 - 15.0) + 10.0)
}

fn smoothstep3(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Weight of a fault at phase `phi`: 1 inside the span, easing to 0 over the ramp.
fn fault_weight(phi: f64, span: [f64; 2]) -> f64 {
    let [a, b] = span;
    if phi < a {
        smoothstep3((phi - (a - FAULT_RAMP)) / FAULT_RAMP)
    } else if phi > b {
        smoothstep3(((b + FAULT_RAMP) - phi) / FAULT_RAMP)
    } else {
        1.0
    }
}

struct SwingPlan {
    class: StrokeClass,
    start: [f64; 8],
    finish: [f64; 8],
    lean: (f64, f64),
    court: (f64, f64),
    racket: usize,
    racket_bend: f64,
    faults: Vec<(usize, InjectedFault)>,
    target_speed: f64,
    elevation_deg: f64,
    aim: (f64, f64),
}

impl SwingPlan {
    fn interior_at(&self, phi: f64) -> [f64; 8] {
        let w = smoothstep5(phi);
        let mut out = [0.0; 8];
        for i in 0..8 {
            out[i] = self.start[i] + (self.finish[i] - self.start[i]) * w;
        }
        for (idx, f) in &self.faults {
            out[*idx] += f.offset_deg * fault_weight(phi, f.phase_span);
        }
        out
    }

    fn pose_at(&self, phi: f64) -> Pose {
        let a = self.interior_at(phi);
        let bend = |side: usize| if side == self.racket { self.racket_bend } else { -1.0 };
        let w = smoothstep5(phi);
        Pose {
            lean: self.lean.0 + (self.lean.1 - self.lean.0) * w,
            shoulder: [a[SHOULDER], a[SHOULDER + 1]],
            elbow: [bend(0) * (180.0 - a[ELBOW]), bend(1) * (180.0 - a[ELBOW + 1])],
            hip: [a[HIP], a[HIP + 1]],
            knee: [a[KNEE], a[KNEE + 1]],
            court: self.court,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn plan_stroke(spec: &FixtureSpec, class: StrokeClass, rng: &mut ChaCha8Rng) -> SwingPlan {
    let p = profile(class);
    let racket = match spec.handedness {
        Handedness::Right => 0,
        Handedness::Left => 1,
    };
    let free = 1 - racket;
    let mut start = [0.0; 8];
    let mut finish = [0.0; 8];
    let mut set = |idx: usize, (a, b): (f64, f64)| {
        start[idx] = a;
        finish[idx] = b;
    };
    set(ELBOW + racket, p.racket_elbow);
    set(SHOULDER + racket, p.racket_shoulder);
    set(ELBOW + free, p.free_elbow);
    set(SHOULDER + free, p.free_shoulder);
    for side in 0..2 {
        set(HIP + side, p.hip);
        set(KNEE + side, p.knee);
    }
    let j = spec.jitter;
    for v in start.iter_mut().chain(finish.iter_mut()) {
        *v = (*v + normal(rng) * ANGLE_JITTER_DEG * j).clamp(5.0, 175.0);
    }
    let lean = (
        p.lean.0 + normal(rng) * LEAN_JITTER_DEG * j,
        p.lean.1 + normal(rng) * LEAN_JITTER_DEG * j,
    );
    let court = (rng.random_range(1.0..5.1), rng.random_range(p.court_y.0..p.court_y.1));
    let target_speed = p.peak_speed * (1.0 + (normal(rng) * SPEED_JITTER * j).clamp(-0.1, 0.1));
    let elevation_deg = p.elevation_deg + normal(rng) * ELEVATION_JITTER_DEG * j;
    let aim = (
        court.0 + normal(rng) * spec.landing_sigma,
        court.1 + p.distance + normal(rng) * spec.landing_sigma,
    );
    let faults = spec
        .injected_faults
        .iter()
        .filter(|f| f.class == class)
        .map(|f| {
            let idx = ANGLE_NAMES.iter().position(|n| *n == f.angle_name).expect("checked");
            (idx, f.clone())
        })
        .collect();
    SwingPlan {
        class,
        start,
        finish,
        lean,
        court,
        racket,
        racket_bend: p.racket_bend,
        faults,
        target_speed,
        elevation_deg,
        aim,
    }
}

/// Largest wrist speed per unit of motion parameter along a path.
fn peak_rate(path: impl Fn(f64) -> P2) -> f64 {
    let h = 1.0 / CALIBRATION_STEPS as f64;
    let mut best: f64 = 0.0;
    for k in 0..CALIBRATION_STEPS {
        let a = path(k as f64 * h);
        let b = path((k + 1) as f64 * h);
        best = best.max((b.0 - a.0).hypot(b.1 - a.1) / h);
    }
    best
}

#[derive(Debug, Clone, Copy)]
enum Motion {
    Hold(Pose),
    Swing(usize),
    Move(Pose, Pose),
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    from: f64,
    to: f64,
    motion: Motion,
}

struct Timeline<'a> {
    segments: Vec<Segment>,
    plans: &'a [SwingPlan],
}

impl Timeline<'_> {
    /// Pose at fractional frame position `x`.
    fn pose(&self, x: f64) -> Pose {
        let i = self.segments.partition_point(|s| s.to < x).min(self.segments.len() - 1);
        let seg = &self.segments[i];
        let w = if seg.to > seg.from {
            ((x - seg.from) / (seg.to - seg.from)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        match seg.motion {
            Motion::Hold(p) => p,
            Motion::Swing(k) => self.plans[k].pose_at(w),
            Motion::Move(a, b) => a.lerp(&b, smoothstep5(w)),
        }
    }

    fn end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.to)
    }
}

fn launch_state(position: Vec3<f64>, heading: (f64, f64), elevation_deg: f64, speed: f64) -> ShuttleState<f64> {
    let (se, ce) = elevation_deg.to_radians().sin_cos();
    ShuttleState::new(
        position,
        Vec3::new(heading.0 * ce * speed, heading.1 * ce * speed, se * speed),
    )
}

/// Bisects the launch speed so the landing lies `range` meters away along `heading`.
fn speed_for_range(
    position: Vec3<f64>,
    heading: (f64, f64),
    elevation_deg: f64,
    range: f64,
    drag: &DragParams<f64>,
) -> Result<f64, SimError> {
    let reach = |v: f64| -> Result<f64, SimError> {
        let l = simulate_to_landing(&launch_state(position, heading, elevation_deg, v), drag, DEFAULT_DT, DEFAULT_T_MAX)?;
        Ok((l.x - position.x).hypot(l.y - position.y))
    };
    let (mut lo, mut hi) = (0.5, 150.0);
    if reach(hi)? <= range {
        return Ok(hi);
    }
    if reach(lo)? >= range {
        return Ok(lo);
    }
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if reach(mid)? < range {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn frames_for(seconds: f64, fps: f64) -> f64 {
    (seconds * fps).round().max(1.0)
}

fn skeleton(pose: &Pose, racket: usize, camera: &FixtureCamera, frame_index: u64) -> SkeletonFrame<f64> {
    let b = body(pose, racket);
    let mut frame = SkeletonFrame::empty(frame_index, VIEW_ID);
    for (kp, &(u, z)) in frame.keypoints.iter_mut().zip(b.points.iter()) {
        let (px, py) = camera.project(pose.court.0, pose.court.1 + u, z);
        *kp = Keypoint::present(px, py);
    }
    frame
}

/// Offset within the swing (in frames) of the largest wrist speed as the
/// stroke pipeline measures it.
fn contact_offset(plan: &SwingPlan, frames: u64, camera: &FixtureCamera, handedness: Handedness, fps: f64) -> u64 {
    let n = frames as f64;
    let seq: Vec<SkeletonFrame<f64>> = (0..=frames + 2)
        .map(|i| {
            let phi = (i as f64 - 1.0) / n;
            let f = skeleton(&plan.pose_at(phi.clamp(0.0, 1.0)), plan.racket, camera, i);
            normalize_skeleton(&f).expect("synthetic torso")
        })
        .collect();
    let speed = wrist_speed_series(&seq, handedness, fps);
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for k in 0..=frames {
        let v = speed[k as usize + 1].unwrap_or(f64::NEG_INFINITY);
        if v > best_v {
            best_v = v;
            best = k;
        }
    }
    best
}

fn stroke_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn ready_pose() -> Pose {
    Pose {
        lean: 5.0,
        shoulder: [40.0, 40.0],
        elbow: [-60.0, -60.0],
        hip: [170.0, 170.0],
        knee: [165.0, 165.0],
        court: (3.05, 3.0),
    }
}

/// Builds a session in memory. Identical specs give identical sessions.
pub fn build_fixture(spec: &FixtureSpec) -> Result<FixtureSession, SimError> {
    spec.check()?;
    let fps = spec.fps;
    let camera = spec.camera;

    let counts = spec.class_counts();
    let mut order: Vec<StrokeClass> = counts.iter().flat_map(|(&c, &n)| std::iter::repeat_n(c, n)).collect();
    order.shuffle(&mut stroke_rng(spec.seed, 0));
    let plans: Vec<SwingPlan> = order
        .iter()
        .enumerate()
        .map(|(i, &c)| plan_stroke(spec, c, &mut stroke_rng(spec.seed, i as u64 + 1)))
        .collect();

    let racket = match spec.handedness {
        Handedness::Right => 0,
        Handedness::Left => 1,
    };
    let hold = frames_for(HOLD_S, fps);
    let mut segments = Vec::new();
    let mut cursor = 0.0;
    let push = |segments: &mut Vec<Segment>, cursor: &mut f64, len: f64, motion: Motion| {
        segments.push(Segment {
            from: *cursor,
            to: *cursor + len,
            motion,
        });
        *cursor += len;
    };

    let first_pose = plans.first().map_or_else(ready_pose, |p| p.pose_at(0.0));
    push(&mut segments, &mut cursor, hold, Motion::Hold(first_pose));

    struct Flight {
        contact: u64,
        landing_frame: u64,
        state: ShuttleState<f64>,
        landing: (f64, f64),
        flight_time: f64,
        origin: (f64, f64),
    }
    let mut flights: Vec<Flight> = Vec::with_capacity(plans.len());
    let mut last_landing_frame = 0u64;
    for (i, plan) in plans.iter().enumerate() {
        let rate = peak_rate(|phi| wrist_normalized(&plan.pose_at(phi), racket));
        let swing_frames = frames_for(rate / plan.target_speed, fps).max(8.0);
        let start = cursor;
        push(&mut segments, &mut cursor, swing_frames, Motion::Swing(i));

        let offset = contact_offset(plan, swing_frames as u64, &camera, spec.handedness, fps);
        let contact = start as u64 + offset;
        let phi = offset as f64 / swing_frames;
        let contact_pose = plan.pose_at(phi);
        let b = body(&contact_pose, racket);
        let wrist = b.points[spec.handedness.wrist().index()];
        let head = along(wrist, b.racket_forearm, RACKET_REACH);
        let position = Vec3::new(plan.court.0, plan.court.1 + head.0, head.1.max(0.05));
        let (dx, dy) = (plan.aim.0 - position.x, plan.aim.1 - position.y);
        let range = dx.hypot(dy);
        let heading = if range > 0.0 { (dx / range, dy / range) } else { (0.0, 1.0) };
        let speed = speed_for_range(position, heading, plan.elevation_deg, range, &spec.drag)?;
        let state = launch_state(position, heading, plan.elevation_deg, speed);
        let landing = simulate_to_landing(&state, &spec.drag, DEFAULT_DT, DEFAULT_T_MAX)?;
        let landing_frame = contact + ((landing.flight_time * fps).ceil() as u64).max(1);
        let ankles = (
            (b.points[BodyPart::RAnkle.index()].0 + b.points[BodyPart::LAnkle.index()].0) / 2.0,
            0.0,
        );
        flights.push(Flight {
            contact,
            landing_frame,
            state,
            landing: (landing.x, landing.y),
            flight_time: landing.flight_time,
            origin: (plan.court.0, plan.court.1 + ankles.0),
        });
        last_landing_frame = landing_frame;

        let finish = plan.pose_at(1.0);
        push(&mut segments, &mut cursor, hold, Motion::Hold(finish));
        if let Some(next) = plans.get(i + 1) {
            let target = next.pose_at(0.0);
            let rate = peak_rate(|w| wrist_normalized(&finish.lerp(&target, smoothstep5(w)), racket));
            let move_frames = frames_for(rate / RECOVERY_SPEED, fps).max(frames_for(0.25, fps));
            push(&mut segments, &mut cursor, move_frames, Motion::Move(finish, target));
            let wait = (landing_frame as f64 + 1.0 - cursor).max(hold);
            push(&mut segments, &mut cursor, wait, Motion::Hold(target));
        } else {
            let wait = (landing_frame as f64 + 2.0 - cursor).max(hold);
            push(&mut segments, &mut cursor, wait, Motion::Hold(finish));
        }
    }

    let timeline = Timeline {
        segments,
        plans: &plans,
    };
    let last_frame = timeline.end() as u64;
    debug_assert!(last_frame >= last_landing_frame);
    let frames: Vec<SkeletonFrame<f64>> = (0..=last_frame)
        .map(|f| skeleton(&timeline.pose(f as f64), racket, &camera, f))
        .collect();

    let mut samples: Vec<TrackSample<f64>> = (0..=last_frame)
        .map(|f| TrackSample {
            frame: f,
            visible: false,
            x: 0.0,
            y: 0.0,
        })
        .collect();
    for fl in &flights {
        let steps = fl.landing_frame - fl.contact;
        let times: Vec<f64> = (0..steps).map(|k| k as f64 / fps).collect();
        let states = sample_flight(&fl.state, &spec.drag, DEFAULT_DT, &times);
        for (k, s) in states.iter().enumerate() {
            let (px, py) = camera.project(s.position.x, s.position.y, s.position.z);
            samples[(fl.contact + k as u64) as usize] = TrackSample {
                frame: fl.contact + k as u64,
                visible: true,
                x: px,
                y: py,
            };
        }
        let (px, py) = camera.project(fl.landing.0, fl.landing.1, 0.0);
        samples[fl.landing_frame as usize] = TrackSample {
            frame: fl.landing_frame,
            visible: true,
            x: px,
            y: py,
        };
    }
    let track = TrajectoryTrack {
        samples,
        space: TrackSpace::Pixel,
    };

    let imu = imu_trace(&timeline, racket, spec, last_frame as f64 / fps);

    let court = CourtGeometry::default();
    let grid = ZoneGrid::default();
    let strokes = plans
        .iter()
        .zip(&flights)
        .enumerate()
        .map(|(i, (plan, fl))| {
            let seg = timeline
                .segments
                .iter()
                .find(|s| matches!(s.motion, Motion::Swing(k) if k == i))
                .expect("swing segment");
            FixtureStroke {
                index: i,
                class: plan.class,
                start_frame: seg.from as u64,
                contact_frame: fl.contact,
                end_frame: seg.to as u64,
                origin: [fl.origin.0, fl.origin.1],
                origin_zone: zone_of(fl.origin.0, fl.origin.1, &court, &grid).ok(),
                launch_position: [fl.state.position.x, fl.state.position.y, fl.state.position.z],
                launch_velocity: [fl.state.velocity.x, fl.state.velocity.y, fl.state.velocity.z],
                landing: [fl.landing.0, fl.landing.1],
                landing_frame: fl.landing_frame,
                flight_time: fl.flight_time,
                target_peak_speed: plan.target_speed,
                injected_faults: plan.faults.iter().map(|(_, f)| f.clone()).collect(),
            }
        })
        .collect();

    let manifest = SessionManifest {
        session_id: spec.session_id.clone(),
        subject_id: spec.subject_id.clone(),
        role: spec.role,
        fps,
        handedness: spec.handedness,
        views: vec![ViewEntry {
            view_id: VIEW_ID.into(),
            camera_angle_deg: 0.0,
            pose_dir: PathBuf::from(POSE_DIR),
            trajectory_path: Some(PathBuf::from(TRAJECTORY_FILE)),
            trajectory_space: TrackSpace::Pixel,
            homography: Some(camera.homography()),
            imu_path: Some(PathBuf::from(IMU_FILE)),
            imu_offset_s: 0.0,
        }],
    };
    let truth = GroundTruth {
        version: FIXTURE_VERSION.into(),
        seed: spec.seed,
        session_id: spec.session_id.clone(),
        role: spec.role,
        handedness: spec.handedness,
        fps,
        frame_count: last_frame + 1,
        camera,
        class_counts: counts,
        injected_faults: spec.injected_faults.clone(),
        strokes,
    };
    Ok(FixtureSession {
        manifest,
        frames,
        track,
        imu,
        truth,
    })
}

/// Racket-wrist IMU: specific force in court axes and the forearm's angular
/// rate about the court's x axis.
fn imu_trace(timeline: &Timeline<'_>, racket: usize, spec: &FixtureSpec, duration: f64) -> ImuTrace<f64> {
    let fps = spec.fps;
    let h = 1e-4;
    let wrist_part = spec.handedness.wrist().index();
    let state = |t: f64| {
        let pose = timeline.pose(t * fps);
        let b = body(&pose, racket);
        let (u, z) = b.points[wrist_part];
        let f = b.racket_forearm;
        ([pose.court.0, pose.court.1 + u, z], f.1.atan2(f.0))
    };
    let count = (duration * spec.imu_rate - 1e-9).ceil().max(0.0) as usize + 1;
    let samples = (0..count)
        .map(|k| {
            let t = k as f64 / spec.imu_rate;
            let (p0, a0) = state(t - h);
            let (p1, _) = state(t);
            let (p2, a2) = state(t + h);
            let mut accel = [0.0; 3];
            for i in 0..3 {
                accel[i] = (p2[i] - 2.0 * p1[i] + p0[i]) / (h * h);
            }
            accel[2] += spec.drag.gravity;
            let mut da = a2 - a0;
            if da > std::f64::consts::PI {
                da -= std::f64::consts::TAU;
            } else if da < -std::f64::consts::PI {
                da += std::f64::consts::TAU;
            }
            ImuSample {
                t,
                accel,
                gyro: [da / (2.0 * h), 0.0, 0.0],
            }
        })
        .collect();
    ImuTrace { samples }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), SimError> {
    let mut text = serde_json::to_string_pretty(value).expect("fixture metadata serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Writes the session under `dir`, replacing any earlier `pose/` directory.
pub fn write_fixture(session: &FixtureSession, dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let pose_dir = dir.join(POSE_DIR);
    if pose_dir.exists() {
        fs::remove_dir_all(&pose_dir).map_err(io_err(&pose_dir))?;
    }
    fs::create_dir_all(&pose_dir).map_err(io_err(&pose_dir))?;
    let conf = [KEYPOINT_CONFIDENCE; KEYPOINT_COUNT];
    for frame in &session.frames {
        write_pose_file(&pose_dir.join(pose_file_name(POSE_PREFIX, frame.frame_index)), frame, &conf)?;
    }

    let track_path = dir.join(TRAJECTORY_FILE);
    let file = fs::File::create(&track_path).map_err(io_err(&track_path))?;
    write_trajectory_csv(file, &session.track).map_err(|e| SimError::BadParams(format!("writing track: {e}")))?;

    let imu_path = dir.join(IMU_FILE);
    let file = fs::File::create(&imu_path).map_err(io_err(&imu_path))?;
    write_imu_csv(file, &session.imu).map_err(|e| SimError::BadParams(format!("writing imu: {e}")))?;

    write_json(&dir.join(MANIFEST_FILE), &session.manifest)?;
    write_json(&dir.join(GROUND_TRUTH_FILE), &session.truth)
}

pub fn generate_fixture_session(spec: &FixtureSpec, dir: &Path) -> Result<GroundTruth, SimError> {
    let session = build_fixture(spec)?;
    write_fixture(&session, dir)?;
    Ok(session.truth)
}
