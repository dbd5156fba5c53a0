use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::kinematics::{Keypoint, SkeletonFrame, KEYPOINT_COUNT};
use crate::scalar::Real;

pub const DEFAULT_CONFIDENCE_FLOOR: f64 = 0.1;

const FILE_SUFFIX: &str = "_keypoints.json";

/// A keypoint as emitted by the pose detector. `(0, 0, 0)` means not detected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawKeypoint {
    pub x: f64,
    pub y: f64,
    pub c: f64,
}

impl RawKeypoint {
    fn undetected(&self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.c == 0.0
    }

    fn usable(&self, floor: f64) -> bool {
        !self.undetected() && self.c >= floor
    }
}

#[derive(Deserialize, Serialize)]
struct PoseFile {
    version: serde_json::Number,
    people: Vec<PersonRecord>,
}

#[derive(Deserialize, Serialize)]
struct PersonRecord {
    pose_keypoints_2d: Vec<f64>,
}

/// `<prefix>_<frameidx>_keypoints.json` with the index zero-padded to six digits.
pub fn pose_file_name(prefix: &str, frame_index: u64) -> String {
    format!("{prefix}_{frame_index:06}{FILE_SUFFIX}")
}

fn frame_index_of(path: &Path) -> Option<Result<u64, IngestError>> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_suffix(FILE_SUFFIX)?;
    let digits = match stem.rsplit_once('_') {
        Some((_, d)) => d,
        None => return Some(Err(IngestError::malformed(path, "missing `<prefix>_` before frame index"))),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Some(Err(IngestError::malformed(path, "frame index is not numeric")));
    }
    Some(
        digits
            .parse::<u64>()
            .map_err(|_| IngestError::malformed(path, "frame index overflows")),
    )
}

fn decode_person(path: &Path, values: &[f64]) -> Result<Vec<RawKeypoint>, IngestError> {
    if values.len() != KEYPOINT_COUNT * 3 {
        return Err(IngestError::BadKeypointCount {
            path: path.to_path_buf(),
            count: values.len(),
        });
    }
    values
        .chunks_exact(3)
        .map(|chunk| {
            let kp = RawKeypoint {
                x: chunk[0],
                y: chunk[1],
                c: chunk[2],
            };
            if !(kp.x.is_finite() && kp.y.is_finite()) || !(0.0..=1.0).contains(&kp.c) {
                return Err(IngestError::malformed(path, "keypoint value out of range"));
            }
            Ok(kp)
        })
        .collect()
}

fn bbox_area(person: &[RawKeypoint], floor: f64) -> f64 {
    let mut usable = person.iter().filter(|k| k.usable(floor)).peekable();
    if usable.peek().is_none() {
        return -1.0;
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for k in usable {
        x0 = x0.min(k.x);
        y0 = y0.min(k.y);
        x1 = x1.max(k.x);
        y1 = y1.max(k.y);
    }
    (x1 - x0) * (y1 - y0)
}

fn read_frame<T: Real>(path: &Path, frame_index: u64, view_id: &str, floor: f64) -> Result<SkeletonFrame<T>, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let file: PoseFile = serde_json::from_str(&text).map_err(|e| IngestError::malformed(path, e.to_string()))?;
    let people = file
        .people
        .iter()
        .map(|p| decode_person(path, &p.pose_keypoints_2d))
        .collect::<Result<Vec<_>, _>>()?;

    let mut frame = SkeletonFrame::empty(frame_index, view_id);
    // Largest bounding box wins; the first record wins ties.
    let chosen = people
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |best, (i, person)| {
            let area = bbox_area(person, floor);
            match best {
                Some((_, a)) if a >= area => best,
                _ => Some((i, area)),
            }
        })
        .map(|(i, _)| &people[i]);
    if let Some(person) = chosen {
        for (slot, raw) in frame.keypoints.iter_mut().zip(person) {
            if raw.usable(floor) {
                *slot = Keypoint::present(T::of(raw.x), T::of(raw.y));
            }
        }
    }
    Ok(frame)
}

/// Reads every `*_keypoints.json` file in `dir`, ordered by embedded frame index.
///
/// Keypoints below `confidence_floor`, or encoded as `(0, 0, 0)`, are marked missing.
pub fn parse_pose_frames<T: Real>(
    dir: &Path,
    confidence_floor: f64,
    view_id: &str,
) -> Result<Vec<SkeletonFrame<T>>, IngestError> {
    if !(0.0..=1.0).contains(&confidence_floor) {
        return Err(IngestError::BadConfidenceFloor(confidence_floor));
    }
    let mut files: BTreeMap<u64, PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| IngestError::io(dir, e))? {
        let path = entry.map_err(|e| IngestError::io(dir, e))?.path();
        let Some(index) = frame_index_of(&path) else {
            continue;
        };
        let index = index?;
        if let Some(previous) = files.insert(index, path.clone()) {
            let (a, b) = if previous < path { (previous, path) } else { (path, previous) };
            return Err(IngestError::malformed(
                b,
                format!("duplicate frame index {index} (also {})", a.display()),
            ));
        }
    }
    if files.is_empty() {
        return Err(IngestError::EmptySession);
    }
    files
        .iter()
        .map(|(&index, path)| read_frame(path, index, view_id, confidence_floor))
        .collect()
}

/// Writes one pose file holding a single person. Present keypoints get
/// confidence `confidences[i]`; missing ones are written as `(0, 0, 0)`.
pub fn write_pose_file<T: Real>(
    path: &Path,
    frame: &SkeletonFrame<T>,
    confidences: &[f64; KEYPOINT_COUNT],
) -> Result<(), IngestError> {
    let mut values = Vec::with_capacity(KEYPOINT_COUNT * 3);
    for (kp, &c) in frame.keypoints.iter().zip(confidences) {
        if kp.present {
            values.extend([kp.x.to_f64_lossy(), kp.y.to_f64_lossy(), c]);
        } else {
            values.extend([0.0, 0.0, 0.0]);
        }
    }
    let file = PoseFile {
        version: serde_json::Number::from_f64(1.3).expect("finite"),
        people: vec![PersonRecord {
            pose_keypoints_2d: values,
        }],
    };
    let text = serde_json::to_string(&file).expect("pose file serializes");
    fs::write(path, text).map_err(|e| IngestError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person(fill: impl Fn(usize) -> [f64; 3]) -> String {
        let vals: Vec<String> = (0..KEYPOINT_COUNT).flat_map(|i| fill(i).map(|v| v.to_string())).collect();
        format!("{{\"pose_keypoints_2d\":[{}]}}", vals.join(","))
    }

    fn write(dir: &Path, name: &str, people: &[String]) {
        let body = format!("{{\"version\":1.3,\"people\":[{}]}}", people.join(","));
        fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn single_valid_file() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "clip_000000000000_keypoints.json", &[person(|i| [i as f64 + 1.0, 2.0, 0.9])]);
        let frames = parse_pose_frames::<f64>(dir.path(), 0.1, "v0").unwrap();
        assert_eq!(frames.len(), 1);
        assert!(frames[0].keypoints.iter().all(|k| k.present));
        assert_eq!(frames[0].keypoints[4].x, 5.0);
    }

    #[test]
    fn undetected_and_low_confidence_are_missing() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "clip_000001_keypoints.json",
            &[person(|i| match i {
                3 => [0.0, 0.0, 0.0],
                4 => [10.0, 10.0, 0.05],
                _ => [1.0 + i as f64, 1.0, 0.8],
            })],
        );
        let frames = parse_pose_frames::<f64>(dir.path(), 0.1, "v0").unwrap();
        assert!(!frames[0].keypoints[3].present);
        assert!(!frames[0].keypoints[4].present);
        assert!(frames[0].keypoints[5].present);
        // A zero floor still treats (0,0,0) as undetected.
        let frames = parse_pose_frames::<f64>(dir.path(), 0.0, "v0").unwrap();
        assert!(!frames[0].keypoints[3].present);
        assert!(frames[0].keypoints[4].present);
    }

    #[test]
    fn wrong_keypoint_count() {
        let dir = tempfile::tempdir().unwrap();
        let vals: Vec<String> = (0..72).map(|_| "1".to_string()).collect();
        write(
            dir.path(),
            "clip_000000_keypoints.json",
            &[format!("{{\"pose_keypoints_2d\":[{}]}}", vals.join(","))],
        );
        assert!(matches!(
            parse_pose_frames::<f64>(dir.path(), 0.1, "v0"),
            Err(IngestError::BadKeypointCount { count: 72, .. })
        ));
    }

    #[test]
    fn largest_person_is_selected() {
        let dir = tempfile::tempdir().unwrap();
        let small = person(|i| [100.0 + (i % 5) as f64, 100.0 + (i / 5) as f64, 0.9]);
        let large = person(|i| [(i % 5) as f64 * 20.0 + 1.0, (i / 5) as f64 * 30.0 + 1.0, 0.9]);
        write(dir.path(), "clip_000000_keypoints.json", &[small, large]);
        let frames = parse_pose_frames::<f64>(dir.path(), 0.1, "v0").unwrap();
        assert_eq!(frames[0].keypoints[24].x, 81.0);
    }

    #[test]
    fn errors_for_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            parse_pose_frames::<f64>(dir.path(), 0.1, "v0"),
            Err(IngestError::EmptySession)
        ));
        fs::write(dir.path().join("clip_000000_keypoints.json"), "{not json").unwrap();
        assert!(matches!(
            parse_pose_frames::<f64>(dir.path(), 0.1, "v0"),
            Err(IngestError::MalformedFile { .. })
        ));
        fs::write(dir.path().join("clip_000000_keypoints.json"), "{\"version\":1,\"people\":[]}").unwrap();
        fs::write(dir.path().join("clip_0_keypoints.json"), "{\"version\":1,\"people\":[]}").unwrap();
        assert!(matches!(
            parse_pose_frames::<f64>(dir.path(), 0.1, "v0"),
            Err(IngestError::MalformedFile { .. })
        ));
        assert!(matches!(
            parse_pose_frames::<f64>(dir.path(), 1.5, "v0"),
            Err(IngestError::BadConfidenceFloor(_))
        ));
    }

    #[test]
    fn frames_sorted_by_numeric_index() {
        let dir = tempfile::tempdir().unwrap();
        for idx in [10u64, 2, 7] {
            write(dir.path(), &format!("c_{idx}_keypoints.json"), &[person(|i| [idx as f64, i as f64, 0.9])]);
        }
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let frames = parse_pose_frames::<f64>(dir.path(), 0.1, "v0").unwrap();
        let order: Vec<u64> = frames.iter().map(|f| f.frame_index).collect();
        assert_eq!(order, vec![2, 7, 10]);
    }

    #[test]
    fn empty_people_gives_all_missing_frame() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "c_000003_keypoints.json", &[]);
        let frames = parse_pose_frames::<f64>(dir.path(), 0.1, "v0").unwrap();
        assert!(frames[0].keypoints.iter().all(|k| !k.present));
    }
}
