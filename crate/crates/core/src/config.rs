//! Every tunable of the pipeline, grouped by stage. Files layer over the
//! defaults field by field; unknown keys are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::court::{CourtGeometry, HeatmapConfig, ZoneGrid};
use crate::ingest::{DEFAULT_CONFIDENCE_FLOOR, DEFAULT_V_MIN};
use crate::kinematics::{canonical_angles, frames_for, odd_window_for, AngleDefinition};
use crate::reference::{AngleLimit, EnvelopeParams};
use crate::scalar::Real;
use crate::shuttlesim::{DragParams, DEFAULT_DT, DEFAULT_T_MAX};
use crate::strokes::{ClassifierThresholds, SegmentParams, SwingParams, DEFAULT_OUTGOING_WINDOW};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config value out of range: {0}")]
    Range(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub confidence_floor: f64,
    pub v_min: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            confidence_floor: DEFAULT_CONFIDENCE_FLOOR,
            v_min: DEFAULT_V_MIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicsConfig {
    pub angles: Vec<AngleDefinition>,
    /// Longest gap (seconds) bridged by interpolation.
    pub max_gap_s: f64,
    /// Moving-average window (seconds), rounded to an odd frame count.
    pub smoothing_s: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        Self {
            angles: canonical_angles(),
            max_gap_s: 0.1,
            smoothing_s: 0.15,
        }
    }
}

impl KinematicsConfig {
    pub fn max_gap_frames(&self, fps: f64) -> usize {
        frames_for(self.max_gap_s, fps)
    }

    pub fn smoothing_window(&self, fps: f64) -> usize {
        odd_window_for(self.smoothing_s, fps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrokesConfig {
    pub trigger_speed: f64,
    pub min_gap_s: f64,
    pub fast_speed: f64,
    pub slow_speed: f64,
    pub outgoing_deg: f64,
    pub outgoing_window: u64,
    pub racket_mass: f64,
    pub r_eff: f64,
    pub efficiency: f64,
}

impl Default for StrokesConfig {
    fn default() -> Self {
        let t = ClassifierThresholds::<f64>::default();
        let s = SwingParams::<f64>::default();
        Self {
            trigger_speed: 1.5,
            min_gap_s: 0.5,
            fast_speed: t.fast_speed,
            slow_speed: t.slow_speed,
            outgoing_deg: t.outgoing_deg,
            outgoing_window: DEFAULT_OUTGOING_WINDOW,
            racket_mass: s.racket_mass,
            r_eff: s.r_eff,
            efficiency: s.efficiency,
        }
    }
}

impl StrokesConfig {
    pub fn segment_params<T: Real>(&self) -> SegmentParams<T> {
        SegmentParams {
            trigger_speed: T::of(self.trigger_speed),
            min_gap_s: T::of(self.min_gap_s),
        }
    }

    pub fn thresholds<T: Real>(&self) -> ClassifierThresholds<T> {
        ClassifierThresholds {
            fast_speed: T::of(self.fast_speed),
            slow_speed: T::of(self.slow_speed),
            outgoing_deg: T::of(self.outgoing_deg),
            outgoing_window: self.outgoing_window,
        }
    }

    pub fn swing_params<T: Real>(&self) -> SwingParams<T> {
        SwingParams {
            racket_mass: T::of(self.racket_mass),
            r_eff: T::of(self.r_eff),
            efficiency: T::of(self.efficiency),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub p_lo: f64,
    pub p_hi: f64,
    pub n_min: usize,
    pub d_norm: f64,
    /// Fixed per-angle bounds replacing the percentile band.
    pub limits: BTreeMap<String, AngleLimit>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        let p = EnvelopeParams::default();
        Self {
            p_lo: p.p_lo,
            p_hi: p.p_hi,
            n_min: p.n_min,
            d_norm: 45.0,
            limits: BTreeMap::new(),
        }
    }
}

impl ReferenceConfig {
    pub fn envelope_params(&self) -> EnvelopeParams {
        EnvelopeParams {
            p_lo: self.p_lo,
            p_hi: self.p_hi,
            n_min: self.n_min,
            limits: self.limits.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CourtConfig {
    pub sigma: f64,
    pub amplitude: f64,
    pub resolution: f64,
    pub rows: usize,
    pub cols: usize,
}

impl Default for CourtConfig {
    fn default() -> Self {
        let h = HeatmapConfig::<f64>::default();
        let g = ZoneGrid::default();
        Self {
            sigma: h.sigma,
            amplitude: h.amplitude,
            resolution: h.resolution,
            rows: g.rows,
            cols: g.cols,
        }
    }
}

impl CourtConfig {
    pub fn heatmap<T: Real>(&self) -> HeatmapConfig<T> {
        HeatmapConfig {
            sigma: T::of(self.sigma),
            amplitude: T::of(self.amplitude),
            resolution: T::of(self.resolution),
        }
    }

    pub fn grid(&self) -> ZoneGrid {
        ZoneGrid {
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn geometry<T: Real>(&self) -> CourtGeometry<T> {
        CourtGeometry::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub terminal_velocity: f64,
    pub gravity: f64,
    pub dt: f64,
    pub t_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let d = DragParams::<f64>::default();
        Self {
            terminal_velocity: d.terminal_velocity,
            gravity: d.gravity,
            dt: DEFAULT_DT,
            t_max: DEFAULT_T_MAX,
        }
    }
}

impl SimConfig {
    pub fn drag<T: Real>(&self) -> DragParams<T> {
        DragParams {
            terminal_velocity: T::of(self.terminal_velocity),
            gravity: T::of(self.gravity),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub top_k: usize,
    /// Faults below this severity (degrees) are left out of the rendered table.
    pub severity_threshold: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            top_k: 10,
            severity_threshold: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub ingest: IngestConfig,
    pub kinematics: KinematicsConfig,
    pub strokes: StrokesConfig,
    pub reference: ReferenceConfig,
    pub court: CourtConfig,
    pub shuttlesim: SimConfig,
    pub report: ReportConfig,
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::Range(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::Range(format!("{name} must be non-negative, got {v}")))
    }
}

fn unit(name: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::Range(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |m: String| Err(ConfigError::Range(m));
        unit("ingest.confidence_floor", self.ingest.confidence_floor)?;
        unit("ingest.v_min", self.ingest.v_min)?;

        let k = &self.kinematics;
        if k.angles.is_empty() {
            return range("kinematics.angles is empty".into());
        }
        let mut names = BTreeSet::new();
        for def in &k.angles {
            def.validate().map_err(|e| ConfigError::Range(e.to_string()))?;
            if !names.insert(def.name.as_str()) {
                return range(format!("duplicate angle name `{}`", def.name));
            }
        }
        non_negative("kinematics.max_gap_s", k.max_gap_s)?;
        non_negative("kinematics.smoothing_s", k.smoothing_s)?;

        let s = &self.strokes;
        positive("strokes.trigger_speed", s.trigger_speed)?;
        non_negative("strokes.min_gap_s", s.min_gap_s)?;
        positive("strokes.slow_speed", s.slow_speed)?;
        positive("strokes.fast_speed", s.fast_speed)?;
        if s.slow_speed > s.fast_speed {
            return range("strokes.slow_speed exceeds strokes.fast_speed".into());
        }
        if !(s.outgoing_deg > 0.0 && s.outgoing_deg < 90.0) {
            return range(format!("strokes.outgoing_deg must lie in (0, 90), got {}", s.outgoing_deg));
        }
        if s.outgoing_window == 0 {
            return range("strokes.outgoing_window must be at least 1".into());
        }
        positive("strokes.racket_mass", s.racket_mass)?;
        positive("strokes.r_eff", s.r_eff)?;
        positive("strokes.efficiency", s.efficiency)?;
        if s.efficiency > 1.0 {
            return range("strokes.efficiency must not exceed 1".into());
        }

        let r = &self.reference;
        if !(0.0 <= r.p_lo && r.p_lo < r.p_hi && r.p_hi <= 100.0) {
            return range(format!("reference percentiles ({}, {}) must satisfy 0 <= p_lo < p_hi <= 100", r.p_lo, r.p_hi));
        }
        if r.n_min == 0 {
            return range("reference.n_min must be at least 1".into());
        }
        positive("reference.d_norm", r.d_norm)?;
        for (name, l) in &r.limits {
            if let (Some(a), Some(b)) = (l.min, l.max) {
                if a > b {
                    return range(format!("reference.limits.{name}: min above max"));
                }
            }
        }

        let c = &self.court;
        positive("court.sigma", c.sigma)?;
        positive("court.amplitude", c.amplitude)?;
        positive("court.resolution", c.resolution)?;
        if c.rows == 0 || c.cols == 0 {
            return range("court.rows and court.cols must be at least 1".into());
        }

        let m = &self.shuttlesim;
        positive("shuttlesim.terminal_velocity", m.terminal_velocity)?;
        positive("shuttlesim.gravity", m.gravity)?;
        positive("shuttlesim.dt", m.dt)?;
        positive("shuttlesim.t_max", m.t_max)?;

        if self.report.top_k == 0 {
            return range("report.top_k must be at least 1".into());
        }
        non_negative("report.severity_threshold", self.report.severity_threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = Config::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), c);
        assert_eq!(c.kinematics.max_gap_frames(30.0), 3);
        assert_eq!(c.kinematics.smoothing_window(60.0), 9);
    }

    #[test]
    fn partial_file_layers_over_defaults() {
        let c = Config::from_json(r#"{"reference": {"d_norm": 30}}"#).unwrap();
        assert_eq!(c.reference.d_norm, 30.0);
        assert_eq!(c.reference.p_lo, 10.0);
        assert_eq!(c.strokes, StrokesConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(Config::from_json(r#"{"refrence": {}}"#), Err(ConfigError::Parse(_))));
        assert!(matches!(
            Config::from_json(r#"{"court": {"sigma": 0.2, "colour": 1}}"#),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn ranges_enforced() {
        for bad in [
            r#"{"reference": {"p_lo": 90, "p_hi": 10}}"#,
            r#"{"court": {"sigma": 0}}"#,
            r#"{"ingest": {"v_min": 1.5}}"#,
            r#"{"strokes": {"slow_speed": 7}}"#,
            r#"{"report": {"top_k": 0}}"#,
            r#"{"kinematics": {"angles": []}}"#,
        ] {
            assert!(matches!(Config::from_json(bad), Err(ConfigError::Range(_))), "{bad}");
        }
    }
}
