//! Inefficiency assessment reports and progress across sessions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::Config;
use crate::pipeline::SessionAnalysis;
use crate::reference::{play_accuracy, rank_faults, Direction, Fault, ScoredStroke};
use crate::scalar::Real;
use crate::strokes::StrokeClass;

pub const REPORT_VERSION: &str = "shuttlesense-report/1";
pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unsupported report version `{0}`")]
    BadVersion(String),
    #[error("progress track is empty")]
    EmptyTrack,
    #[error("session `{0}` has no accuracy")]
    NoAccuracy(String),
    #[error("timestamp `{later}` precedes `{earlier}`")]
    Unordered { earlier: String, later: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub accuracy: f64,
    pub strokes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeSummary {
    pub index: usize,
    /// Absolute start, peak and end frames.
    pub frames: [u64; 3],
    pub class: StrokeClass,
    pub peak_wrist_speed: f64,
    pub outgoing_angle: Option<f64>,
    pub accuracy: Option<f64>,
    pub mean_dev: Option<f64>,
    pub skipped_angles: Vec<String>,
    pub unscored_reason: Option<String>,
    pub head_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultEntry {
    pub class: StrokeClass,
    pub angle_name: String,
    pub severity: f64,
    pub max_dev: f64,
    pub direction: Direction,
    pub worst_phase_span: Option<(f64, f64)>,
    pub stroke_count: usize,
}

impl<T: Real> From<&Fault<T>> for FaultEntry {
    fn from(f: &Fault<T>) -> Self {
        Self {
            class: f.class,
            angle_name: f.angle_name.clone(),
            severity: f.severity.to_f64_lossy(),
            max_dev: f.max_dev.to_f64_lossy(),
            direction: f.direction,
            worst_phase_span: f.worst_phase_span.map(|(a, b)| (a.to_f64_lossy(), b.to_f64_lossy())),
            stroke_count: f.stroke_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwingSummary {
    pub strokes: usize,
    pub mean_head_speed: f64,
    pub max_head_speed: f64,
    pub mean_force: f64,
    pub mean_radian: f64,
    pub total_calories: f64,
}

/// A landing heatmap written next to the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRef {
    pub origin_zone: usize,
    pub class: StrokeClass,
    pub shots: usize,
    /// Relative to the report directory.
    pub path: String,
    pub most_probable_zone: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentReport {
    pub version: String,
    pub session_id: String,
    pub view_id: String,
    pub accuracy: Option<f64>,
    pub per_class: BTreeMap<StrokeClass, ClassAccuracy>,
    pub strokes: Vec<StrokeSummary>,
    pub dropped_strokes: usize,
    /// Every ranked fault.
    pub faults: Vec<FaultEntry>,
    /// At most `top_k` faults at or above the severity threshold.
    pub top_faults: Vec<FaultEntry>,
    pub swing: Option<SwingSummary>,
    pub swing_by_class: BTreeMap<StrokeClass, SwingSummary>,
    pub heatmaps: Vec<HeatmapRef>,
    pub heatmaps_skipped: usize,
    pub warnings: Vec<String>,
    pub config: Config,
}

impl AssessmentReport {
    pub fn check_version(&self) -> Result<(), ReportError> {
        if self.version == REPORT_VERSION {
            Ok(())
        } else {
            Err(ReportError::BadVersion(self.version.clone()))
        }
    }
}

fn summarize_swings<'a>(metrics: impl Iterator<Item = [f64; 4]> + 'a) -> Option<SwingSummary> {
    let all: Vec<[f64; 4]> = metrics.collect();
    if all.is_empty() {
        return None;
    }
    let n = all.len() as f64;
    let mean = |k: usize| all.iter().map(|m| m[k]).sum::<f64>() / n;
    Some(SwingSummary {
        strokes: all.len(),
        mean_head_speed: mean(0),
        max_head_speed: all.iter().map(|m| m[0]).fold(f64::NEG_INFINITY, f64::max),
        mean_force: mean(1),
        mean_radian: mean(2),
        total_calories: all.iter().map(|m| m[3]).sum(),
    })
}

/// `scored` and `unscored` are keyed by position in `analysis.strokes`, as
/// returned by [`crate::pipeline::score_session`].
pub fn assemble_report<T: Real>(
    analysis: &SessionAnalysis<T>,
    scored: &[(usize, ScoredStroke<T>)],
    unscored: &[(usize, String)],
    heatmaps: Vec<HeatmapRef>,
    heatmaps_skipped: usize,
    warnings: Vec<String>,
    config: &Config,
) -> AssessmentReport {
    let only: Vec<ScoredStroke<T>> = scored.iter().map(|(_, s)| s.clone()).collect();
    let accuracy = play_accuracy(&only);
    let faults: Vec<FaultEntry> = rank_faults(&only).iter().map(FaultEntry::from).collect();
    let top_faults = faults
        .iter()
        .filter(|f| f.severity >= config.report.severity_threshold)
        .take(config.report.top_k)
        .cloned()
        .collect();

    let by_index: BTreeMap<usize, &ScoredStroke<T>> = scored.iter().map(|(i, s)| (*i, s)).collect();
    let reasons: BTreeMap<usize, &String> = unscored.iter().map(|(i, r)| (*i, r)).collect();
    let strokes = analysis
        .strokes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let sc = by_index.get(&i);
            StrokeSummary {
                index: i,
                frames: s.frames,
                class: s.features.class,
                peak_wrist_speed: s.features.peak_wrist_speed.to_f64_lossy(),
                outgoing_angle: s.features.outgoing_shuttle_angle.map(Real::to_f64_lossy),
                accuracy: sc.map(|x| x.accuracy.to_f64_lossy()),
                mean_dev: sc.map(|x| x.profile.mean_dev.to_f64_lossy()),
                skipped_angles: sc.map(|x| x.skipped_angles.clone()).unwrap_or_default(),
                unscored_reason: reasons.get(&i).map(|r| r.to_string()),
                head_speed: s.swing.map(|m| m.head_speed.to_f64_lossy()),
            }
        })
        .collect();

    let swing_row = |m: &crate::strokes::SwingMetrics<T>| {
        [
            m.head_speed.to_f64_lossy(),
            m.force.to_f64_lossy(),
            m.radian.to_f64_lossy(),
            m.calories.to_f64_lossy(),
        ]
    };
    let swing = summarize_swings(analysis.strokes.iter().filter_map(|s| s.swing.as_ref()).map(swing_row));
    let swing_by_class = StrokeClass::ALL
        .iter()
        .filter_map(|&c| {
            let rows = analysis
                .strokes
                .iter()
                .filter(|s| s.features.class == c)
                .filter_map(|s| s.swing.as_ref())
                .map(swing_row);
            summarize_swings(rows).map(|s| (c, s))
        })
        .collect();

    AssessmentReport {
        version: REPORT_VERSION.to_string(),
        session_id: analysis.session_id.clone(),
        view_id: analysis.view_id.clone(),
        accuracy: accuracy.as_ref().map(|a| a.session.to_f64_lossy()),
        per_class: accuracy
            .map(|a| {
                a.per_class
                    .into_iter()
                    .map(|(c, (acc, n))| {
                        (
                            c,
                            ClassAccuracy {
                                accuracy: acc.to_f64_lossy(),
                                strokes: n,
                            },
                        )
                    })
                    .collect()
            })
            .unwrap_or_default(),
        strokes,
        dropped_strokes: analysis.dropped.len(),
        faults,
        top_faults,
        swing,
        swing_by_class,
        heatmaps,
        heatmaps_skipped,
        warnings,
        config: config.clone(),
    }
}

/// Rounds to `SIGNIFICANT_DIGITS` significant digits.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .map(round_significant)
            .and_then(serde_json::Number::from_f64)
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys, floats at nine significant digits and a
/// trailing newline.
pub fn to_canonical_json<S: Serialize>(value: &S) -> Result<String, ReportError> {
    let v = canonicalize(serde_json::to_value(value)?);
    let mut out = serde_json::to_string_pretty(&v)?;
    out.push('\n');
    Ok(out)
}

pub fn parse_report(text: &str) -> Result<AssessmentReport, ReportError> {
    let r: AssessmentReport = serde_json::from_str(text)?;
    r.check_version()?;
    Ok(r)
}

fn fmt_span(span: Option<(f64, f64)>) -> String {
    span.map_or_else(|| "-".to_string(), |(a, b)| format!("{a:.2}–{b:.2}"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Above => "above",
        Direction::Below => "below",
    }
}

pub fn render_markdown(report: &AssessmentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Assessment: {}\n", report.session_id);
    s.push_str("## Summary\n\n| Metric | Value |\n|---|---|\n");
    let _ = writeln!(s, "| View | {} |", report.view_id);
    let _ = writeln!(s, "| Strokes analyzed | {} |", report.strokes.len());
    let _ = writeln!(s, "| Strokes dropped | {} |", report.dropped_strokes);
    let _ = writeln!(s, "| Accuracy of play | {} |", fmt_opt(report.accuracy));
    s.push('\n');

    if !report.per_class.is_empty() {
        s.push_str("## Accuracy by class\n\n| Class | Strokes | Accuracy |\n|---|---|---|\n");
        for (c, a) in &report.per_class {
            let _ = writeln!(s, "| {} | {} | {:.2} |", c, a.strokes, a.accuracy);
        }
        s.push('\n');
    }

    if report.top_faults.is_empty() {
        let _ = writeln!(
            s,
            "## No faults above threshold\n\nNo (angle, class) pair deviates by {:.1}° or more on average.\n",
            report.config.report.severity_threshold
        );
    } else {
        s.push_str("## Faults\n\n");
        s.push_str("| Rank | Class | Angle | Severity (°) | Max deviation (°) | Direction | Worst phase | Strokes |\n");
        s.push_str("|---|---|---|---|---|---|---|---|\n");
        for (i, f) in report.top_faults.iter().enumerate() {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.2} | {:.2} | {} | {} | {} |",
                i + 1,
                f.class,
                f.angle_name,
                f.severity,
                f.max_dev,
                direction_name(f.direction),
                fmt_span(f.worst_phase_span),
                f.stroke_count
            );
        }
        s.push('\n');
    }

    if let Some(sw) = &report.swing {
        s.push_str("## Swing metrics\n\n");
        s.push_str("| Class | Strokes | Mean head speed (m/s) | Max head speed (m/s) | Mean force (N) | Mean arc (rad) | Calories (kcal) |\n");
        s.push_str("|---|---|---|---|---|---|---|\n");
        let mut row = |name: &str, m: &SwingSummary| {
            let _ = writeln!(
                s,
                "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.4} |",
                name, m.strokes, m.mean_head_speed, m.max_head_speed, m.mean_force, m.mean_radian, m.total_calories
            );
        };
        for (c, m) in &report.swing_by_class {
            row(c.name(), m);
        }
        row("All", sw);
        s.push('\n');
    }

    if !report.heatmaps.is_empty() {
        s.push_str("## Landing heatmaps\n\n| Origin zone | Class | Shots | Most probable landing zone | File |\n|---|---|---|---|---|\n");
        for h in &report.heatmaps {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | [{}]({}) |",
                h.origin_zone, h.class, h.shots, h.most_probable_zone, h.path, h.path
            );
        }
        if report.heatmaps_skipped > 0 {
            let _ = writeln!(s, "\n{} strokes had no usable origin or landing.", report.heatmaps_skipped);
        }
        s.push('\n');
    }

    s.push_str("## Validation warnings\n\n");
    if report.warnings.is_empty() {
        s.push_str("None.\n");
    } else {
        for w in &report.warnings {
            let _ = writeln!(s, "- {w}");
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressEntry {
    pub session_id: String,
    /// Compared as text, so ISO 8601 or zero-padded values order correctly.
    pub timestamp: String,
    pub accuracy: f64,
    pub per_class: BTreeMap<StrokeClass, f64>,
}

impl ProgressEntry {
    pub fn from_report(report: &AssessmentReport, timestamp: impl Into<String>) -> Result<Self, ReportError> {
        Ok(Self {
            session_id: report.session_id.clone(),
            timestamp: timestamp.into(),
            accuracy: report.accuracy.ok_or_else(|| ReportError::NoAccuracy(report.session_id.clone()))?,
            per_class: report.per_class.iter().map(|(c, a)| (*c, a.accuracy)).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressTrack {
    pub entries: Vec<ProgressEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressSummary {
    pub entries: Vec<ProgressEntry>,
    /// Accuracy change from each session to the next.
    pub deltas: Vec<f64>,
    /// Index of the highest accuracy; the earliest wins ties.
    pub best: usize,
    pub best_session_id: String,
    /// Every delta is strictly positive.
    pub monotonic: bool,
    /// Last minus first accuracy for classes present in both.
    pub class_change: BTreeMap<StrokeClass, f64>,
}

pub fn compare_sessions(track: &ProgressTrack) -> Result<ProgressSummary, ReportError> {
    let e = &track.entries;
    let (first, last) = match (e.first(), e.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(ReportError::EmptyTrack),
    };
    for w in e.windows(2) {
        if w[1].timestamp < w[0].timestamp {
            return Err(ReportError::Unordered {
                earlier: w[0].timestamp.clone(),
                later: w[1].timestamp.clone(),
            });
        }
    }
    let deltas: Vec<f64> = e.windows(2).map(|w| w[1].accuracy - w[0].accuracy).collect();
    let best = e
        .iter()
        .enumerate()
        .fold(0, |b, (i, x)| if x.accuracy > e[b].accuracy { i } else { b });
    let class_change = first
        .per_class
        .iter()
        .filter_map(|(c, a)| last.per_class.get(c).map(|b| (*c, b - a)))
        .collect();
    Ok(ProgressSummary {
        entries: e.clone(),
        monotonic: deltas.iter().all(|&d| d > 0.0),
        deltas,
        best,
        best_session_id: e[best].session_id.clone(),
        class_change,
    })
}

pub fn render_progress_markdown(summary: &ProgressSummary) -> String {
    let mut s = String::from("# Progress\n\n| Session | Timestamp | Accuracy | Change |\n|---|---|---|---|\n");
    for (i, e) in summary.entries.iter().enumerate() {
        let change = if i == 0 {
            "-".to_string()
        } else {
            format!("{:+.2}", summary.deltas[i - 1])
        };
        let _ = writeln!(s, "| {} | {} | {:.2} | {} |", e.session_id, e.timestamp, e.accuracy, change);
    }
    let _ = writeln!(
        s,
        "\nBest session: {} ({:.2}).",
        summary.best_session_id, summary.entries[summary.best].accuracy
    );
    let _ = writeln!(
        s,
        "Improvement is {}monotonic.",
        if summary.monotonic { "" } else { "not " }
    );
    if !summary.class_change.is_empty() {
        s.push_str("\n| Class | Change |\n|---|---|\n");
        for (c, d) in &summary.class_change {
            let _ = writeln!(s, "| {c} | {d:+.2} |");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, ts: &str, acc: f64) -> ProgressEntry {
        ProgressEntry {
            session_id: id.into(),
            timestamp: ts.into(),
            accuracy: acc,
            per_class: BTreeMap::new(),
        }
    }

    fn empty_report() -> AssessmentReport {
        AssessmentReport {
            version: REPORT_VERSION.into(),
            session_id: "s".into(),
            view_id: "v".into(),
            accuracy: Some(100.0),
            per_class: BTreeMap::new(),
            strokes: vec![],
            dropped_strokes: 0,
            faults: vec![],
            top_faults: vec![],
            swing: None,
            swing_by_class: BTreeMap::new(),
            heatmaps: vec![],
            heatmaps_skipped: 0,
            warnings: vec![],
            config: Config::default(),
        }
    }

    fn fault(sev: f64) -> FaultEntry {
        FaultEntry {
            class: StrokeClass::Clear,
            angle_name: "RElbow".into(),
            severity: sev,
            max_dev: sev * 2.0,
            direction: Direction::Above,
            worst_phase_span: Some((0.3, 0.6)),
            stroke_count: 4,
        }
    }

    #[test]
    fn progress_examples() {
        let t = |v: &[f64]| ProgressTrack {
            entries: v.iter().enumerate().map(|(i, &a)| entry(&format!("s{i}"), &format!("{i}"), a)).collect(),
        };
        let one = compare_sessions(&t(&[70.0])).unwrap();
        assert!(one.deltas.is_empty());
        assert_eq!(one.best, 0);
        let up = compare_sessions(&t(&[60.0, 70.0, 80.0])).unwrap();
        assert_eq!(up.deltas, vec![10.0, 10.0]);
        assert!(up.monotonic);
        assert_eq!(up.best_session_id, "s2");
        assert!(!compare_sessions(&t(&[60.0, 55.0])).unwrap().monotonic);
        assert!(matches!(compare_sessions(&t(&[])), Err(ReportError::EmptyTrack)));
        let bad = ProgressTrack {
            entries: vec![entry("a", "2024-02", 1.0), entry("b", "2024-01", 2.0)],
        };
        assert!(matches!(compare_sessions(&bad), Err(ReportError::Unordered { .. })));
    }

    #[test]
    fn rounding() {
        assert_eq!(round_significant(1.0 / 3.0), 0.333333333);
        assert_eq!(round_significant(123456.7891234), 123456.789);
        assert_eq!(round_significant(0.0), 0.0);
        assert_eq!(round_significant(round_significant(2.0f64.sqrt())), round_significant(2.0f64.sqrt()));
    }

    #[test]
    fn canonical_round_trip() {
        let mut r = empty_report();
        r.accuracy = Some(97.123456789123);
        r.faults = vec![fault(1.0 / 7.0)];
        let a = to_canonical_json(&r).unwrap();
        let b = to_canonical_json(&parse_report(&a).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("97.1234568"));
    }

    #[test]
    fn markdown_without_faults() {
        let md = render_markdown(&empty_report());
        assert!(md.contains("## No faults above threshold"));
        assert!(!md.contains("| Rank |"));
    }

    #[test]
    fn markdown_fault_rows() {
        let mut r = empty_report();
        r.top_faults = vec![fault(9.0), fault(5.0), fault(3.0)];
        let md = render_markdown(&r);
        let rows: Vec<&str> = md.lines().filter(|l| l.starts_with("| ") && l.contains("RElbow")).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].starts_with("| 1 | Clear | RElbow | 9.00"));
        assert!(rows[2].starts_with("| 3 |"));
        assert!(rows[0].contains("0.30–0.60"));
    }

    #[test]
    fn bad_version_rejected() {
        let mut r = empty_report();
        r.version = "other/9".into();
        let text = to_canonical_json(&r).unwrap();
        assert!(matches!(parse_report(&text), Err(ReportError::BadVersion(_))));
    }
}
