use crate::kinematics::{Handedness, SkeletonFrame};
use crate::scalar::Real;

/// Racket-hand wrist speed in torso lengths per second.
///
/// Expects normalized frames. Uses a central difference where both neighbours
/// hold the wrist, a one-sided difference where only one does, and `None` where
/// the wrist itself is missing or isolated. Frame index gaps scale the time step.
pub fn wrist_speed_series<T: Real>(frames: &[SkeletonFrame<T>], handedness: Handedness, fps: T) -> Vec<Option<T>> {
    let wrist = handedness.wrist();
    let pos: Vec<_> = frames.iter().map(|f| f.point(wrist)).collect();
    let diff = |a: usize, b: usize| -> Option<T> {
        let (pa, pb) = (pos[a]?, pos[b]?);
        let frames_apart = frames[b].frame_index.checked_sub(frames[a].frame_index)?;
        if frames_apart == 0 {
            return None;
        }
        let dt = T::of(frames_apart as f64) / fps;
        Some(pb.distance(pa) / dt)
    };
    (0..frames.len())
        .map(|i| {
            pos[i]?;
            let prev = (i > 0 && pos[i - 1].is_some()).then(|| i - 1);
            let next = (i + 1 < frames.len() && pos[i + 1].is_some()).then_some(i + 1);
            match (prev, next) {
                (Some(p), Some(n)) => diff(p, n),
                (Some(p), None) => diff(p, i),
                (None, Some(n)) => diff(i, n),
                (None, None) => None,
            }
        })
        .collect()
}
