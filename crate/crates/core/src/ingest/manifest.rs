use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trajectory::TrackSpace;
use super::IngestError;
use crate::kinematics::Handedness;

/// Whose footage a session holds: the professional reference or the trainee.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Reference,
    Trainee,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewEntry {
    pub view_id: String,
    pub camera_angle_deg: f64,
    pub pose_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_path: Option<PathBuf>,
    #[serde(default)]
    pub trajectory_space: TrackSpace,
    /// Row-major 3×3 map from trajectory coordinates to court meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homography: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imu_path: Option<PathBuf>,
    /// Video time (seconds) at which the IMU clock reads zero.
    #[serde(default)]
    pub imu_offset_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionManifest {
    pub session_id: String,
    pub subject_id: String,
    pub role: Role,
    pub fps: f64,
    #[serde(default)]
    pub handedness: Handedness,
    pub views: Vec<ViewEntry>,
}

impl SessionManifest {
    pub fn check(&self) -> Result<(), IngestError> {
        let bad = |m: String| Err(IngestError::InvalidManifest(m));
        if self.session_id.is_empty() {
            return bad("session_id is empty".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if self.views.is_empty() || self.views.len() > 3 {
            return bad(format!("expected 1 to 3 views, got {}", self.views.len()));
        }
        let mut ids = BTreeSet::new();
        let mut angles: Vec<f64> = Vec::new();
        for view in &self.views {
            if !ids.insert(view.view_id.as_str()) {
                return bad(format!("duplicate view_id `{}`", view.view_id));
            }
            if !view.camera_angle_deg.is_finite() {
                return bad(format!("view `{}` has a non-finite camera angle", view.view_id));
            }
            let a = view.camera_angle_deg.rem_euclid(360.0);
            if angles.iter().any(|&b| (a - b).abs() < 1e-9) {
                return bad(format!("view `{}` repeats camera angle {a}", view.view_id));
            }
            angles.push(a);
            if let Some(h) = &view.homography {
                if h.iter().flatten().any(|v| !v.is_finite()) {
                    return bad(format!("view `{}` has a non-finite homography", view.view_id));
                }
            }
            if !view.imu_offset_s.is_finite() {
                return bad(format!("view `{}` has a non-finite IMU offset", view.view_id));
            }
        }
        Ok(())
    }

    /// Rewrites relative paths as paths under `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for view in &mut self.views {
            join(&mut view.pose_dir);
            if let Some(p) = view.trajectory_path.as_mut() {
                join(p);
            }
            if let Some(p) = view.imu_path.as_mut() {
                join(p);
            }
        }
    }
}

/// Loads a manifest, accepting either the JSON file or a directory containing
/// `manifest.json`. Relative paths resolve against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<SessionManifest, IngestError> {
    let file = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| IngestError::io(&file, e))?;
    let mut manifest: SessionManifest =
        serde_json::from_str(&text).map_err(|e| IngestError::InvalidManifest(format!("{}: {e}", file.display())))?;
    manifest.check()?;
    let base = file.parent().unwrap_or_else(|| Path::new("."));
    manifest.resolve_paths(base);
    Ok(manifest)
}
