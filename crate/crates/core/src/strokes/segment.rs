use serde::{Deserialize, Serialize};

use super::StrokeSegment;
use crate::kinematics::Handedness;
use crate::scalar::Real;

/// Minimum `end - start` of a segment, in frames.
const MIN_SPAN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SegmentParams<T> {
    /// Speed (torso lengths / s) a run must reach to count as a swing.
    pub trigger_speed: T,
    /// Peaks closer than this (seconds) are merged into one stroke.
    pub min_gap_s: T,
}

#[derive(Debug, Clone, Copy)]
struct Window {
    start: usize,
    peak: usize,
    end: usize,
}

fn value<T: Real>(speed: &[Option<T>], i: usize) -> T {
    speed[i].unwrap_or_else(T::neg_infinity)
}

/// Index of the larger of two peaks, preferring the earlier on ties.
fn stronger<T: Real>(speed: &[Option<T>], a: usize, b: usize) -> usize {
    let (first, second) = if a <= b { (a, b) } else { (b, a) };
    if value(speed, second) > value(speed, first) {
        second
    } else {
        first
    }
}

/// Detects swings as threshold crossings of the wrist speed.
///
/// Each maximal run at or above the trigger becomes a stroke whose peak is the
/// run's first maximum. Runs with peaks closer than `min_gap_s` merge, and each
/// stroke then widens outwards to the nearest local minimum of the speed on
/// either side. Output is sorted and non-overlapping.
pub fn segment_strokes<T: Real>(
    speed: &[Option<T>],
    fps: T,
    params: &SegmentParams<T>,
    view_id: &str,
    handedness: Handedness,
) -> Vec<StrokeSegment> {
    let n = speed.len();
    let above = |i: usize| speed[i].is_some_and(|v| v >= params.trigger_speed);

    let mut runs: Vec<Window> = Vec::new();
    let mut i = 0;
    while i < n {
        if !above(i) {
            i += 1;
            continue;
        }
        let start = i;
        let mut peak = i;
        while i < n && above(i) {
            if value(speed, i) > value(speed, peak) {
                peak = i;
            }
            i += 1;
        }
        runs.push(Window { start, peak, end: i - 1 });
    }

    let min_gap_frames = params.min_gap_s * fps;
    let mut merged: Vec<Window> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some(prev) if T::of((run.peak - prev.peak) as f64) < min_gap_frames => {
                prev.end = run.end;
                prev.peak = stronger(speed, prev.peak, run.peak);
            }
            _ => merged.push(run),
        }
    }

    let mut out: Vec<Window> = Vec::new();
    for mut w in merged {
        while w.start > 0 && speed[w.start - 1].is_some() && value(speed, w.start - 1) < value(speed, w.start) {
            w.start -= 1;
        }
        while w.end + 1 < n && speed[w.end + 1].is_some() && value(speed, w.end + 1) < value(speed, w.end) {
            w.end += 1;
        }
        if let Some(prev) = out.last_mut() {
            if w.start <= prev.end {
                w.start = prev.end + 1;
            }
            if w.start > w.peak || w.end - w.start < MIN_SPAN {
                prev.end = prev.end.max(w.end);
                prev.peak = stronger(speed, prev.peak, w.peak);
                continue;
            }
        }
        out.push(w);
    }

    let mut segments = Vec::with_capacity(out.len());
    for idx in 0..out.len() {
        let lower = if idx == 0 { 0 } else { out[idx - 1].end + 1 };
        let upper = out.get(idx + 1).map_or(n.saturating_sub(1), |next| next.start.saturating_sub(1));
        let w = &mut out[idx];
        while w.end - w.start < MIN_SPAN {
            if w.start > lower {
                w.start -= 1;
            } else if w.end < upper {
                w.end += 1;
            } else {
                break;
            }
        }
        if w.end - w.start >= MIN_SPAN {
            segments.push(StrokeSegment {
                start_frame: w.start,
                peak_frame: w.peak,
                end_frame: w.end,
                view_id: view_id.to_string(),
                handedness,
            });
        }
    }
    segments
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SegmentParams<f64> {
        SegmentParams {
            trigger_speed: 4.0,
            min_gap_s: 0.5,
        }
    }

    fn bump(at: usize, height: f64, width: f64) -> impl Fn(usize) -> f64 {
        move |i| {
            let d = (i as f64 - at as f64) / width;
            height * (-d * d).exp()
        }
    }

    fn series(n: usize, f: impl Fn(usize) -> f64) -> Vec<Option<f64>> {
        (0..n).map(|i| Some(f(i))).collect()
    }

    #[test]
    fn zero_speed_gives_nothing() {
        assert!(segment_strokes(&vec![Some(0.0); 100], 30.0, &params(), "v", Handedness::Right).is_empty());
    }

    #[test]
    fn single_bump() {
        let b = bump(40, 8.0, 4.0);
        let s = series(100, |i| 0.01 * (i % 2) as f64 + b(i));
        let segs = segment_strokes(&s, 30.0, &params(), "v", Handedness::Right);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].peak_frame, 40);
        assert!(segs[0].start_frame < 35 && segs[0].end_frame > 45);
    }

    #[test]
    fn two_separated_bumps_and_merging() {
        let (a, b) = (bump(40, 8.0, 3.0), bump(120, 9.0, 3.0));
        let s = series(200, |i| a(i) + b(i));
        let segs = segment_strokes(&s, 30.0, &params(), "v", Handedness::Right);
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[0].peak_frame, segs[1].peak_frame), (40, 120));
        assert!(segs[0].end_frame < segs[1].start_frame);

        // Peaks 8 frames apart at 30 fps (< 0.5 s) merge; the stronger wins.
        let (a, b) = (bump(40, 8.0, 2.0), bump(48, 9.0, 2.0));
        let s = series(100, |i| a(i) + b(i));
        let segs = segment_strokes(&s, 30.0, &params(), "v", Handedness::Right);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].peak_frame, 48);
    }

    #[test]
    fn ties_pick_earliest_and_short_runs_widen() {
        let mut s = vec![Some(0.0); 20];
        s[9] = Some(5.0);
        s[10] = Some(5.0);
        let segs = segment_strokes(&s, 30.0, &params(), "v", Handedness::Left);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].peak_frame, 9);
        assert!(segs[0].end_frame - segs[0].start_frame >= 3);
        assert_eq!(segs[0].handedness, Handedness::Left);
    }

    #[test]
    fn missing_values_stop_runs() {
        let mut s = vec![Some(0.0); 30];
        for v in s.iter_mut().take(16).skip(10) {
            *v = Some(6.0);
        }
        s[13] = None;
        let segs = segment_strokes(&s, 30.0, &params(), "v", Handedness::Right);
        assert_eq!(segs.len(), 1);
    }
}
