use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::manifest::SessionManifest;
use crate::kinematics::SkeletonFrame;
use crate::scalar::Real;

pub const DEFAULT_V_MIN: f64 = 0.8;

/// Allowed deviation from the 120° spacing of a three-camera rig.
const RIG_TOLERANCE_DEG: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub status: CheckStatus,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub session_id: String,
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn has_failures(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Fail)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Warn)
            .map(|c| format!("{}: {}", c.name, c.message))
            .collect()
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("session {}\n", self.session_id);
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Warn => "warn",
                CheckStatus::Fail => "FAIL",
            };
            let _ = writeln!(out, "  [{tag}] {}: {}", c.name, c.message);
        }
        out
    }
}

/// Decoded per-view data a session is validated against.
pub struct SessionObservations<'a, T> {
    pub frames: &'a BTreeMap<String, Vec<SkeletonFrame<T>>>,
    /// IMU clock span per view, already shifted onto the video clock.
    pub imu_spans: &'a BTreeMap<String, (f64, f64)>,
}

fn rig_check(manifest: &SessionManifest) -> ValidationCheck {
    let n = manifest.views.len();
    let (status, message) = match n {
        3 => {
            let mut angles: Vec<f64> = manifest.views.iter().map(|v| v.camera_angle_deg.rem_euclid(360.0)).collect();
            angles.sort_by(f64::total_cmp);
            let gaps = [angles[1] - angles[0], angles[2] - angles[1], 360.0 - angles[2] + angles[0]];
            if gaps.iter().all(|g| (g - 120.0).abs() <= RIG_TOLERANCE_DEG) {
                (CheckStatus::Pass, "three views at mutual 120°".to_string())
            } else {
                (
                    CheckStatus::Warn,
                    format!("three views not at 120° spacing (gaps {:.1}°, {:.1}°, {:.1}°)", gaps[0], gaps[1], gaps[2]),
                )
            }
        }
        2 => (CheckStatus::Warn, "two-view session".to_string()),
        _ => (CheckStatus::Warn, "single-view session".to_string()),
    };
    ValidationCheck {
        name: "views".into(),
        status,
        message,
    }
}

/// Checks a session against the capture criteria.
///
/// `joints` lists the keypoints whose visibility ratio must reach `v_min` in
/// every view. The result is a pure function of the inputs.
pub fn validate_session<T: Real>(
    manifest: &SessionManifest,
    observations: &SessionObservations<'_, T>,
    joints: &[(String, usize)],
    v_min: f64,
) -> ValidationReport {
    let mut checks = vec![rig_check(manifest)];

    for view in &manifest.views {
        let name = format!("visibility:{}", view.view_id);
        let frames = observations.frames.get(&view.view_id).map(Vec::as_slice).unwrap_or(&[]);
        if frames.is_empty() {
            checks.push(ValidationCheck {
                name,
                status: CheckStatus::Fail,
                message: "no frames".into(),
            });
            continue;
        }
        let worst = joints
            .iter()
            .map(|(joint, idx)| {
                let seen = frames.iter().filter(|f| f.keypoints[*idx].present).count();
                (joint.as_str(), seen as f64 / frames.len() as f64)
            })
            .fold(None::<(&str, f64)>, |acc, cur| match acc {
                Some(a) if a.1 <= cur.1 => Some(a),
                _ => Some(cur),
            });
        let (status, message) = match worst {
            None => (CheckStatus::Pass, "no tracked joints configured".to_string()),
            Some((joint, ratio)) if ratio >= v_min => (
                CheckStatus::Pass,
                format!("lowest joint visibility {joint} {:.1}% (min {:.1}%)", ratio * 100.0, v_min * 100.0),
            ),
            Some((joint, ratio)) => (
                CheckStatus::Fail,
                format!("{joint} visible in {:.1}% of frames, below {:.1}%", ratio * 100.0, v_min * 100.0),
            ),
        };
        checks.push(ValidationCheck { name, status, message });
    }

    checks.push(ValidationCheck {
        name: "fps".into(),
        status: CheckStatus::Pass,
        message: format!("declared {} fps", manifest.fps),
    });

    for view in manifest.views.iter().filter(|v| v.imu_path.is_some()) {
        let frames = observations.frames.get(&view.view_id).map(Vec::as_slice).unwrap_or(&[]);
        let span = observations.imu_spans.get(&view.view_id);
        let video = frames
            .first()
            .zip(frames.last())
            .map(|(a, b)| (a.frame_index as f64 / manifest.fps, b.frame_index as f64 / manifest.fps));
        let covered = match (span, video) {
            (Some(&(i0, i1)), Some((v0, v1))) => i0 <= v0 + 1e-9 && i1 >= v1 - 1e-9,
            _ => false,
        };
        checks.push(ValidationCheck {
            name: format!("imu:{}", view.view_id),
            status: if covered { CheckStatus::Pass } else { CheckStatus::Warn },
            message: if covered {
                "IMU trace covers the video span".into()
            } else {
                "IMU trace does not cover the video span; check imu_offset_s".into()
            },
        });
    }

    ValidationReport {
        session_id: manifest.session_id.clone(),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;

    use super::*;
    use crate::ingest::{Role, TrackSpace, ViewEntry};
    use crate::kinematics::{Handedness, Keypoint};

    fn manifest(angles: &[f64]) -> SessionManifest {
        SessionManifest {
            session_id: "s1".into(),
            subject_id: "a".into(),
            role: Role::Trainee,
            fps: 30.0,
            handedness: Handedness::Right,
            views: angles
                .iter()
                .enumerate()
                .map(|(i, &a)| ViewEntry {
                    view_id: format!("v{i}"),
                    camera_angle_deg: a,
                    pose_dir: PathBuf::new(),
                    trajectory_path: None,
                    trajectory_space: TrackSpace::Court,
                    homography: None,
                    imu_path: None,
                    imu_offset_s: 0.0,
                })
                .collect(),
        }
    }

    fn frames(n: usize, elbow_visible: usize) -> Vec<SkeletonFrame<f64>> {
        (0..n)
            .map(|i| {
                let mut f = SkeletonFrame::empty(i as u64, "v");
                for kp in f.keypoints.iter_mut() {
                    *kp = Keypoint::present(1.0, 1.0);
                }
                if i >= elbow_visible {
                    f.keypoints[3] = Keypoint::missing();
                }
                f
            })
            .collect()
    }

    fn joints() -> Vec<(String, usize)> {
        vec![("RElbow".into(), 3), ("RShoulder".into(), 2)]
    }

    fn run(m: &SessionManifest, per_view: Vec<SkeletonFrame<f64>>) -> ValidationReport {
        let frames: BTreeMap<_, _> = m.views.iter().map(|v| (v.view_id.clone(), per_view.clone())).collect();
        let spans = BTreeMap::new();
        validate_session(
            m,
            &SessionObservations {
                frames: &frames,
                imu_spans: &spans,
            },
            &joints(),
            0.8,
        )
    }

    #[test]
    fn three_views_at_120_all_pass() {
        let r = run(&manifest(&[0.0, 120.0, 240.0]), frames(100, 99));
        assert!(r.checks.iter().all(|c| c.status == CheckStatus::Pass), "{r:?}");
    }

    #[test]
    fn single_view_warns() {
        let r = run(&manifest(&[0.0]), frames(10, 10));
        assert_eq!(r.checks[0].status, CheckStatus::Warn);
        assert_eq!(r.checks[0].message, "single-view session");
        assert!(!r.has_failures());
    }

    #[test]
    fn low_visibility_fails() {
        let r = run(&manifest(&[0.0]), frames(10, 4));
        assert!(r.has_failures());
        let fail = r.checks.iter().find(|c| c.status == CheckStatus::Fail).unwrap();
        assert!(fail.message.contains("RElbow"));
    }

    #[test]
    fn pure() {
        let m = manifest(&[10.0, 130.0, 200.0]);
        let a = serde_json::to_string(&run(&m, frames(10, 9))).unwrap();
        let b = serde_json::to_string(&run(&m, frames(10, 9))).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("not at 120"));
    }
}
