//! Session loading and per-stroke analysis.
//!
//! Strokes are detected on the first view of the manifest only; the other
//! views take part in validation.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::court::{accumulate_landings, most_probable_zone, Homography, LandingHeatmaps, LandingObservation};
use crate::ingest::{
    load_manifest, parse_imu, parse_pose_frames, parse_trajectory, validate_session, ImuTrace, IngestError,
    SessionManifest, SessionObservations, TrackSpace, TrajectoryTrack, ValidationReport, ViewEntry,
};
use crate::kinematics::{
    compute_angle_series, fill_gaps, normalize_skeleton, smooth, BodyPart, JointAngleSeries, KinematicsError,
    SkeletonFrame,
};
use crate::report::HeatmapRef;
use crate::reference::{score_stroke, EnvelopeModel, ScoredStroke};
use crate::scalar::Real;
use crate::strokes::{
    extract_features, segment_strokes, swing_metrics, wrist_speed_series, FeatureParams, StrokeError, StrokeFeatures,
    StrokeSegment, SwingMetrics,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Court(#[from] crate::court::CourtError),
    #[error("view `{0}` has no pose frames")]
    NoFrames(String),
}

/// Everything read from a session directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionData<T> {
    pub manifest: SessionManifest,
    pub frames: BTreeMap<String, Vec<SkeletonFrame<T>>>,
    pub tracks: BTreeMap<String, TrajectoryTrack<T>>,
    pub imu: BTreeMap<String, ImuTrace<T>>,
}

impl<T: Real> SessionData<T> {
    pub fn primary_view(&self) -> &ViewEntry {
        &self.manifest.views[0]
    }
}

pub fn load_session<T: Real>(manifest_path: &Path, confidence_floor: f64) -> Result<SessionData<T>, IngestError> {
    let manifest = load_manifest(manifest_path)?;
    let mut frames = BTreeMap::new();
    let mut tracks = BTreeMap::new();
    let mut imu = BTreeMap::new();
    for view in &manifest.views {
        frames.insert(
            view.view_id.clone(),
            parse_pose_frames(&view.pose_dir, confidence_floor, &view.view_id)?,
        );
        if let Some(p) = &view.trajectory_path {
            tracks.insert(view.view_id.clone(), parse_trajectory(p, view.trajectory_space)?);
        }
        if let Some(p) = &view.imu_path {
            imu.insert(view.view_id.clone(), parse_imu(p)?);
        }
    }
    Ok(SessionData {
        manifest,
        frames,
        tracks,
        imu,
    })
}

/// Visibility is checked on the vertex keypoint of every configured angle.
pub fn validate_loaded<T: Real>(data: &SessionData<T>, cfg: &Config) -> ValidationReport {
    let joints: Vec<(String, usize)> = cfg.kinematics.angles.iter().map(|d| (d.name.clone(), d.b)).collect();
    let imu_spans: BTreeMap<String, (f64, f64)> = data
        .manifest
        .views
        .iter()
        .filter_map(|v| {
            let (a, b) = data.imu.get(&v.view_id)?.span()?;
            Some((v.view_id.clone(), (a.to_f64_lossy() + v.imu_offset_s, b.to_f64_lossy() + v.imu_offset_s)))
        })
        .collect();
    let obs = SessionObservations {
        frames: &data.frames,
        imu_spans: &imu_spans,
    };
    validate_session(&data.manifest, &obs, &joints, cfg.ingest.v_min)
}

/// Fills index gaps with all-missing frames so positions map one-to-one onto
/// consecutive frame indices starting at the first frame.
pub fn densify_frames<T: Real>(frames: &[SkeletonFrame<T>], view_id: &str) -> Vec<SkeletonFrame<T>> {
    let (Some(first), Some(last)) = (frames.first(), frames.last()) else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity((last.frame_index - first.frame_index + 1) as usize);
    let mut it = frames.iter().peekable();
    for idx in first.frame_index..=last.frame_index {
        match it.peek() {
            Some(f) if f.frame_index == idx => out.push(it.next().expect("peeked").clone()),
            _ => out.push(SkeletonFrame::empty(idx, view_id)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StrokeRecord<T> {
    /// Positions in the dense frame sequence.
    pub segment: StrokeSegment,
    /// Absolute frame indices of start, peak and end.
    pub frames: [u64; 3],
    pub features: StrokeFeatures<T>,
    pub swing: Option<SwingMetrics<T>>,
    pub landing: LandingObservation<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedStroke {
    pub start_frame: u64,
    pub end_frame: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionAnalysis<T> {
    pub session_id: String,
    pub view_id: String,
    pub fps: f64,
    pub frame_indices: Vec<u64>,
    /// Gap-filled, smoothed angle series over the dense frames.
    pub angles: Vec<JointAngleSeries<T>>,
    pub speed: Vec<Option<T>>,
    pub strokes: Vec<StrokeRecord<T>>,
    pub dropped: Vec<DroppedStroke>,
    /// Strokes whose IMU window held no samples.
    pub imu_gaps: usize,
}

fn landing_point<T: Real>(view: &ViewEntry, x: T, y: T) -> Option<(T, T)> {
    match (view.homography, view.trajectory_space) {
        (Some(h), _) => Homography(h).apply(x, y),
        (None, TrackSpace::Court) => Some((x, y)),
        (None, TrackSpace::Pixel) => None,
    }
}

/// Court position of the player at the peak frame. Pixel tracks share the pose
/// camera, so the ankle midpoint goes through the view homography; court-space
/// tracks give the shuttle's first floor position after the peak instead.
fn origin_point<T: Real>(
    view: &ViewEntry,
    frame: &SkeletonFrame<T>,
    track: Option<&TrajectoryTrack<T>>,
    window: u64,
) -> Option<(T, T)> {
    match view.trajectory_space {
        TrackSpace::Pixel => {
            let h = Homography(view.homography?);
            let pts: Vec<_> = [BodyPart::RAnkle, BodyPart::LAnkle]
                .iter()
                .filter_map(|&p| frame.point(p))
                .collect();
            if pts.is_empty() {
                return None;
            }
            let n = T::of(pts.len() as f64);
            let x = pts.iter().fold(T::zero(), |a, p| a + p.x) / n;
            let y = pts.iter().fold(T::zero(), |a, p| a + p.y) / n;
            h.apply(x, y)
        }
        TrackSpace::Court => {
            let s = track?.visible_between(frame.frame_index, frame.frame_index + window).next()?;
            landing_point(view, s.x, s.y)
        }
    }
}

pub fn analyze_session<T: Real>(data: &SessionData<T>, cfg: &Config) -> Result<SessionAnalysis<T>, PipelineError> {
    let view = data.primary_view();
    let fps = data.manifest.fps;
    let fps_t = T::of(fps);
    let raw = data.frames.get(&view.view_id).map(Vec::as_slice).unwrap_or(&[]);
    if raw.is_empty() {
        return Err(PipelineError::NoFrames(view.view_id.clone()));
    }
    let dense = densify_frames(raw, &view.view_id);
    let frame_indices: Vec<u64> = dense.iter().map(|f| f.frame_index).collect();
    let normalized: Vec<SkeletonFrame<T>> = dense
        .iter()
        .map(|f| normalize_skeleton(f).unwrap_or_else(|_| SkeletonFrame::empty(f.frame_index, &view.view_id)))
        .collect();

    let max_gap = cfg.kinematics.max_gap_frames(fps);
    let window = cfg.kinematics.smoothing_window(fps);
    let angles = compute_angle_series(&dense, &cfg.kinematics.angles, fps_t)
        .iter()
        .map(|s| smooth(&fill_gaps(s, max_gap), window))
        .collect::<Result<Vec<_>, _>>()?;

    let handedness = data.manifest.handedness;
    let speed = wrist_speed_series(&normalized, handedness, fps_t);
    let segments = segment_strokes(&speed, fps_t, &cfg.strokes.segment_params(), &view.view_id, handedness);

    let track = data.tracks.get(&view.view_id);
    let imu = data.imu.get(&view.view_id);
    let params = FeatureParams {
        max_gap,
        thresholds: cfg.strokes.thresholds(),
    };
    let swing_params = cfg.strokes.swing_params();

    let mut strokes = Vec::new();
    let mut dropped = Vec::new();
    let mut imu_gaps = 0;
    for (i, seg) in segments.iter().enumerate() {
        let abs = [
            frame_indices[seg.start_frame],
            frame_indices[seg.peak_frame],
            frame_indices[seg.end_frame],
        ];
        let features = match extract_features(seg, &normalized, &speed, &angles, track, &params) {
            Ok(f) => f,
            Err(e @ (StrokeError::EmptyStroke { .. } | StrokeError::OutOfRange { .. })) => {
                dropped.push(DroppedStroke {
                    start_frame: abs[0],
                    end_frame: abs[2],
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => unreachable!("feature extraction error {e}"),
        };
        let swing = imu.and_then(|trace| {
            let t0 = T::of(abs[0] as f64 / fps - view.imu_offset_s);
            let t1 = T::of(abs[2] as f64 / fps - view.imu_offset_s);
            match swing_metrics(trace, t0, t1, &swing_params) {
                Ok(m) => Some(m),
                Err(_) => {
                    imu_gaps += 1;
                    None
                }
            }
        });
        let next_peak = segments.get(i + 1).map_or(u64::MAX, |n| frame_indices[n.peak_frame]);
        let landing = track
            .and_then(|t| t.visible_between(abs[1], next_peak.saturating_sub(1)).last())
            .and_then(|s| landing_point(view, s.x, s.y));
        let origin = origin_point(view, &dense[seg.peak_frame], track, cfg.strokes.outgoing_window);
        strokes.push(StrokeRecord {
            segment: seg.clone(),
            frames: abs,
            landing: LandingObservation {
                class: features.class,
                origin,
                landing,
            },
            features,
            swing,
        });
    }

    Ok(SessionAnalysis {
        session_id: data.manifest.session_id.clone(),
        view_id: view.view_id.clone(),
        fps,
        frame_indices,
        angles,
        speed,
        strokes,
        dropped,
        imu_gaps,
    })
}

pub fn session_heatmaps<T: Real>(analysis: &SessionAnalysis<T>, cfg: &Config) -> Result<LandingHeatmaps<T>, PipelineError> {
    let obs: Vec<_> = analysis.strokes.iter().map(|s| s.landing).collect();
    Ok(accumulate_landings(
        &obs,
        &cfg.court.geometry(),
        &cfg.court.grid(),
        &cfg.court.heatmap(),
    )?)
}

pub const HEATMAP_DIR: &str = "heatmaps";

/// File name of the heatmap for one (origin zone, class) key.
pub fn heatmap_file_name(zone: usize, class: crate::strokes::StrokeClass) -> String {
    format!("zone{zone:02}_{}.csv", class.slug())
}

/// Normalizes each heatmap and writes it as CSV plus a PGM preview under
/// `out_dir/heatmaps`. Returned paths are relative to `out_dir`.
pub fn write_heatmaps<T: Real>(
    maps: &LandingHeatmaps<T>,
    cfg: &Config,
    out_dir: &Path,
) -> Result<Vec<HeatmapRef>, PipelineError> {
    let court = cfg.court.geometry();
    let grid = cfg.court.grid();
    let dir = out_dir.join(HEATMAP_DIR);
    if !maps.maps.is_empty() {
        std::fs::create_dir_all(&dir).map_err(|e| crate::court::CourtError::Io(format!("{}: {e}", dir.display())))?;
    }
    let mut refs = Vec::new();
    for (&(zone, class), map) in &maps.maps {
        let mut map = map.clone();
        map.normalize()?;
        let name = heatmap_file_name(zone, class);
        map.write_to(&dir.join(&name))?;
        map.write_to(&dir.join(name.replace(".csv", ".pgm")))?;
        refs.push(HeatmapRef {
            origin_zone: zone,
            class,
            shots: maps.counts.get(&(zone, class)).copied().unwrap_or(0),
            path: format!("{HEATMAP_DIR}/{name}"),
            most_probable_zone: most_probable_zone(&map, &court, &grid)?,
        });
    }
    Ok(refs)
}

/// Scores every analyzed stroke against the envelope. Strokes the envelope
/// cannot score are returned with the reason, keyed by stroke position.
pub fn score_session<T: Real>(
    analysis: &SessionAnalysis<T>,
    model: &EnvelopeModel<T>,
    d_norm: T,
) -> (Vec<(usize, ScoredStroke<T>)>, Vec<(usize, String)>) {
    let mut scored = Vec::new();
    let mut unscored = Vec::new();
    for (i, s) in analysis.strokes.iter().enumerate() {
        match score_stroke(&s.features, model, d_norm) {
            Ok(sc) => scored.push((i, sc)),
            Err(e) => unscored.push((i, e.to_string())),
        }
    }
    (scored, unscored)
}

/// Writes `start,peak,end,class,peak_wrist_speed,outgoing_angle` rows,
/// leaving the angle empty when no track was available.
pub fn write_stroke_csv<T: Real, W: io::Write>(writer: W, analysis: &SessionAnalysis<T>) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["start", "peak", "end", "class", "peak_wrist_speed", "outgoing_angle"])?;
    for s in &analysis.strokes {
        out.write_record([
            s.frames[0].to_string(),
            s.frames[1].to_string(),
            s.frames[2].to_string(),
            s.features.class.name().to_string(),
            s.features.peak_wrist_speed.to_string(),
            s.features.outgoing_shuttle_angle.map(|a| a.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Keypoint;

    #[test]
    fn densify_inserts_missing_frames() {
        let mut a = SkeletonFrame::<f64>::empty(3, "v");
        a.keypoints[0] = Keypoint::present(1.0, 1.0);
        let b = SkeletonFrame::<f64>::empty(6, "v");
        let d = densify_frames(&[a.clone(), b], "v");
        assert_eq!(d.iter().map(|f| f.frame_index).collect::<Vec<_>>(), vec![3, 4, 5, 6]);
        assert_eq!(d[0], a);
        assert!(d[1].keypoints.iter().all(|k| !k.present));
        assert!(densify_frames::<f64>(&[], "v").is_empty());
    }
}
