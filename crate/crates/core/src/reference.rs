//! Reference envelopes and deviation scoring.
//!
//! An envelope holds, per (stroke class, angle), a percentile band for each of
//! the `PHASE_SAMPLES` phases, gathered from reference strokes. Trainee strokes
//! are scored by how far their phase series leave that band.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_usize, Real};
use crate::strokes::{StrokeClass, StrokeFeatures, PHASE_SAMPLES};

pub const ENVELOPE_VERSION: &str = "shuttlesense-envelope/1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("percentiles must satisfy 0 <= p_lo < p_hi <= 100 (got {p_lo}, {p_hi})")]
    BadPercentiles { p_lo: f64, p_hi: f64 },
    #[error("no (class, angle) pair reaches the minimum support of {n_min} strokes")]
    EmptyReference { n_min: usize },
    #[error("envelope has no entries for class {0}")]
    UnknownClass(StrokeClass),
    #[error("stroke shares no angles with the envelope")]
    NoComparableAngles,
    #[error("normalization distance must be positive")]
    BadNormalization,
    #[error("hard limit for `{0}` has min above max")]
    BadLimit(String),
    #[error("unsupported envelope version `{0}`")]
    BadVersion(String),
}

/// Percentile with linear interpolation between order statistics
/// (rank `p/100 · (n − 1)` into the sorted values).
pub fn percentile<T: Real>(sorted: &[T], p: f64) -> T {
    debug_assert!(!sorted.is_empty());
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let w = T::of(rank - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * w
}

/// Optional fixed bounds replacing the statistical band for one angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleLimit {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EnvelopeBand<T> {
    pub class: StrokeClass,
    pub angle_name: String,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub support_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedPair {
    pub class: StrokeClass,
    pub angle_name: String,
    pub support_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EnvelopeModel<T> {
    pub version: String,
    pub p_lo: f64,
    pub p_hi: f64,
    pub n_min: usize,
    pub bands: Vec<EnvelopeBand<T>>,
    /// Pairs seen in the reference set but below `n_min`.
    pub excluded: Vec<ExcludedPair>,
}

impl<T: Real> EnvelopeModel<T> {
    pub fn band(&self, class: StrokeClass, angle: &str) -> Option<&EnvelopeBand<T>> {
        self.bands.iter().find(|b| b.class == class && b.angle_name == angle)
    }

    pub fn has_class(&self, class: StrokeClass) -> bool {
        self.bands.iter().any(|b| b.class == class)
    }

    pub fn check_version(&self) -> Result<(), ReferenceError> {
        if self.version != ENVELOPE_VERSION {
            return Err(ReferenceError::BadVersion(self.version.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeParams {
    pub p_lo: f64,
    pub p_hi: f64,
    pub n_min: usize,
    pub limits: BTreeMap<String, AngleLimit>,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self {
            p_lo: 10.0,
            p_hi: 90.0,
            n_min: 5,
            limits: BTreeMap::new(),
        }
    }
}

/// Gathers reference phase series per (class, angle) and takes per-phase percentiles.
pub fn build_envelope<T: Real>(
    reference: &[StrokeFeatures<T>],
    params: &EnvelopeParams,
) -> Result<EnvelopeModel<T>, ReferenceError> {
    let (p_lo, p_hi) = (params.p_lo, params.p_hi);
    if !(0.0..=100.0).contains(&p_lo) || !(0.0..=100.0).contains(&p_hi) || p_lo >= p_hi {
        return Err(ReferenceError::BadPercentiles { p_lo, p_hi });
    }
    for (name, limit) in &params.limits {
        if let (Some(a), Some(b)) = (limit.min, limit.max) {
            if a > b {
                return Err(ReferenceError::BadLimit(name.clone()));
            }
        }
    }

    let mut gathered: BTreeMap<(StrokeClass, String), Vec<&Vec<T>>> = BTreeMap::new();
    for stroke in reference {
        for (angle, series) in &stroke.angle_phase_series {
            let entry = gathered.entry((stroke.class, angle.clone())).or_default();
            if let Some(s) = series {
                entry.push(s);
            }
        }
    }

    let mut bands = Vec::new();
    let mut excluded = Vec::new();
    for ((class, angle_name), series) in gathered {
        if series.len() < params.n_min.max(1) {
            excluded.push(ExcludedPair {
                class,
                angle_name,
                support_count: series.len(),
            });
            continue;
        }
        let limit = params.limits.get(&angle_name).copied().unwrap_or_default();
        let mut lo = Vec::with_capacity(PHASE_SAMPLES);
        let mut hi = Vec::with_capacity(PHASE_SAMPLES);
        let mut column: Vec<T> = Vec::with_capacity(series.len());
        for phase in 0..PHASE_SAMPLES {
            column.clear();
            column.extend(series.iter().map(|s| s[phase]));
            column.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
            lo.push(limit.min.map_or_else(|| percentile(&column, p_lo), T::of));
            hi.push(limit.max.map_or_else(|| percentile(&column, p_hi), T::of));
        }
        for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
            if *l > *h {
                // A one-sided limit crossed the other statistical bound.
                if limit.min.is_some() {
                    *h = *l;
                } else {
                    *l = *h;
                }
            }
        }
        bands.push(EnvelopeBand {
            class,
            angle_name,
            lo,
            hi,
            support_count: series.len(),
        });
    }
    if bands.is_empty() {
        return Err(ReferenceError::EmptyReference { n_min: params.n_min });
    }
    Ok(EnvelopeModel {
        version: ENVELOPE_VERSION.to_string(),
        p_lo,
        p_hi,
        n_min: params.n_min,
        bands,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Above,
    Below,
}

/// Deviation of one angle from its band over all phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AngleDeviation<T> {
    pub angle_name: String,
    /// Distance outside the band per phase; zero inside.
    pub dev: Vec<T>,
    pub mean_dev: T,
    pub max_dev: T,
    /// Summed excess above `hi` and shortfall below `lo`.
    pub above_total: T,
    pub below_total: T,
    /// Phase interval `[from, to]` around the worst deviation, `None` if `dev` is all zero.
    pub worst_phase_span: Option<(T, T)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DeviationProfile<T> {
    pub angles: Vec<AngleDeviation<T>>,
    /// Mean over every scored angle and phase.
    pub mean_dev: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScoredStroke<T> {
    pub class: StrokeClass,
    pub profile: DeviationProfile<T>,
    /// In `[0, 100]`.
    pub accuracy: T,
    /// Angles missing from the stroke or the envelope.
    pub skipped_angles: Vec<String>,
}

/// The contiguous run of phases around the largest deviation where the
/// deviation stays at or above half of that maximum.
pub fn worst_phase_span<T: Real>(dev: &[T]) -> Option<(T, T)> {
    let (peak_idx, peak) = dev
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::zero()), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    if !(peak > T::zero()) {
        return None;
    }
    let half = peak * T::of(0.5);
    let mut a = peak_idx;
    while a > 0 && dev[a - 1] >= half {
        a -= 1;
    }
    let mut b = peak_idx;
    while b + 1 < dev.len() && dev[b + 1] >= half {
        b += 1;
    }
    let denom = from_usize::<T>(dev.len().max(2) - 1);
    Some((from_usize::<T>(a) / denom, from_usize::<T>(b) / denom))
}

fn angle_deviation<T: Real>(angle_name: &str, values: &[T], band: &EnvelopeBand<T>) -> AngleDeviation<T> {
    let mut dev = Vec::with_capacity(values.len());
    let (mut above, mut below) = (T::zero(), T::zero());
    for ((&v, &lo), &hi) in values.iter().zip(&band.lo).zip(&band.hi) {
        let up = (v - hi).max(T::zero());
        let down = (lo - v).max(T::zero());
        above = above + up;
        below = below + down;
        dev.push(up.max(down));
    }
    let sum = dev.iter().fold(T::zero(), |a, &b| a + b);
    let max_dev = dev.iter().fold(T::zero(), |a, &b| a.max(b));
    AngleDeviation {
        angle_name: angle_name.to_string(),
        mean_dev: sum / from_usize(dev.len().max(1)),
        max_dev,
        above_total: above,
        below_total: below,
        worst_phase_span: worst_phase_span(&dev),
        dev,
    }
}

/// `accuracy = 100 · max(0, 1 − mean_dev / d_norm)`.
pub fn accuracy_from_deviation<T: Real>(mean_dev: T, d_norm: T) -> T {
    T::of(100.0) * (T::one() - mean_dev / d_norm).max(T::zero())
}

pub fn score_stroke<T: Real>(
    features: &StrokeFeatures<T>,
    model: &EnvelopeModel<T>,
    d_norm: T,
) -> Result<ScoredStroke<T>, ReferenceError> {
    if !(d_norm > T::zero()) {
        return Err(ReferenceError::BadNormalization);
    }
    if !model.has_class(features.class) {
        return Err(ReferenceError::UnknownClass(features.class));
    }
    let mut angles = Vec::new();
    let mut skipped: BTreeSet<String> = BTreeSet::new();
    for (name, series) in &features.angle_phase_series {
        match (series, model.band(features.class, name)) {
            (Some(values), Some(band)) => angles.push(angle_deviation(name, values, band)),
            _ => {
                skipped.insert(name.clone());
            }
        }
    }
    for band in model.bands.iter().filter(|b| b.class == features.class) {
        if !features.angle_phase_series.contains_key(&band.angle_name) {
            skipped.insert(band.angle_name.clone());
        }
    }
    if angles.is_empty() {
        return Err(ReferenceError::NoComparableAngles);
    }
    let total: T = angles.iter().fold(T::zero(), |acc, a| acc + a.mean_dev);
    let mean_dev = total / from_usize(angles.len());
    Ok(ScoredStroke {
        class: features.class,
        accuracy: accuracy_from_deviation(mean_dev, d_norm),
        profile: DeviationProfile { angles, mean_dev },
        skipped_angles: skipped.into_iter().collect(),
    })
}

/// One (angle, class) pair that deviates from the reference on average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Fault<T> {
    pub class: StrokeClass,
    pub angle_name: String,
    /// Mean over the class's strokes of the angle's mean deviation, degrees.
    pub severity: T,
    pub max_dev: T,
    pub direction: Direction,
    pub worst_phase_span: Option<(T, T)>,
    pub stroke_count: usize,
}

/// Aggregates deviations per (angle, class) and sorts by severity, breaking
/// ties by class name then angle name. Pairs without deviation are dropped.
pub fn rank_faults<T: Real>(scored: &[ScoredStroke<T>]) -> Vec<Fault<T>> {
    struct Acc<T> {
        dev_sum: Vec<T>,
        mean_sum: T,
        max_dev: T,
        above: T,
        below: T,
        count: usize,
    }
    let mut groups: BTreeMap<(&'static str, String), (StrokeClass, Acc<T>)> = BTreeMap::new();
    for stroke in scored {
        for angle in &stroke.profile.angles {
            let (_, acc) = groups
                .entry((stroke.class.name(), angle.angle_name.clone()))
                .or_insert_with(|| {
                    (
                        stroke.class,
                        Acc {
                            dev_sum: vec![T::zero(); angle.dev.len()],
                            mean_sum: T::zero(),
                            max_dev: T::zero(),
                            above: T::zero(),
                            below: T::zero(),
                            count: 0,
                        },
                    )
                });
            for (s, &d) in acc.dev_sum.iter_mut().zip(&angle.dev) {
                *s = *s + d;
            }
            acc.mean_sum = acc.mean_sum + angle.mean_dev;
            acc.max_dev = acc.max_dev.max(angle.max_dev);
            acc.above = acc.above + angle.above_total;
            acc.below = acc.below + angle.below_total;
            acc.count += 1;
        }
    }
    let mut faults: Vec<Fault<T>> = groups
        .into_iter()
        .filter_map(|((_, angle_name), (class, acc))| {
            let n = from_usize::<T>(acc.count);
            let severity = acc.mean_sum / n;
            if !(severity > T::zero()) {
                return None;
            }
            let mean_profile: Vec<T> = acc.dev_sum.iter().map(|&s| s / n).collect();
            Some(Fault {
                class,
                angle_name,
                severity,
                max_dev: acc.max_dev,
                direction: if acc.above >= acc.below {
                    Direction::Above
                } else {
                    Direction::Below
                },
                worst_phase_span: worst_phase_span(&mean_profile),
                stroke_count: acc.count,
            })
        })
        .collect();
    // Stable sort over name-ordered groups yields the lexicographic tie-break.
    faults.sort_by(|a, b| b.severity.partial_cmp(&a.severity).expect("finite severity"));
    faults
}

/// Session and per-class accuracy, each the unweighted mean over strokes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PlayAccuracy<T> {
    pub strokes: Vec<T>,
    pub session: T,
    pub per_class: BTreeMap<StrokeClass, (T, usize)>,
}

pub fn play_accuracy<T: Real>(scored: &[ScoredStroke<T>]) -> Option<PlayAccuracy<T>> {
    if scored.is_empty() {
        return None;
    }
    let strokes: Vec<T> = scored.iter().map(|s| s.accuracy).collect();
    let session = strokes.iter().fold(T::zero(), |a, &b| a + b) / from_usize(strokes.len());
    let mut sums: BTreeMap<StrokeClass, (T, usize)> = BTreeMap::new();
    for s in scored {
        let e = sums.entry(s.class).or_insert((T::zero(), 0));
        e.0 = e.0 + s.accuracy;
        e.1 += 1;
    }
    let per_class = sums
        .into_iter()
        .map(|(c, (sum, n))| (c, (sum / from_usize(n), n)))
        .collect();
    Some(PlayAccuracy {
        strokes,
        session,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stroke(class: StrokeClass, series: &[(&str, Vec<f64>)]) -> StrokeFeatures<f64> {
        StrokeFeatures {
            class,
            contact_overhead: true,
            peak_wrist_speed: 5.0,
            outgoing_shuttle_angle: None,
            angle_phase_series: series.iter().map(|(n, v)| (n.to_string(), Some(v.clone()))).collect(),
        }
    }

    fn constant(v: f64) -> Vec<f64> {
        vec![v; PHASE_SAMPLES]
    }

    fn params(p_lo: f64, p_hi: f64, n_min: usize) -> EnvelopeParams {
        EnvelopeParams {
            p_lo,
            p_hi,
            n_min,
            limits: BTreeMap::new(),
        }
    }

    #[test]
    fn percentile_definition() {
        let v: Vec<f64> = (0..=10).map(|i| 10.0 * i as f64).collect();
        assert_eq!(percentile(&v, 10.0), 10.0);
        assert_eq!(percentile(&v, 90.0), 90.0);
        assert_eq!(percentile(&[80.0, 90.0, 100.0], 0.0), 80.0);
        assert_eq!(percentile(&[80.0, 90.0, 100.0], 100.0), 100.0);
        assert_eq!(percentile(&[80.0, 90.0, 100.0], 25.0), 85.0);
    }

    #[test]
    fn identical_strokes_give_point_band() {
        let refs: Vec<_> = (0..5).map(|_| stroke(StrokeClass::Clear, &[("RElbow", constant(90.0))])).collect();
        let m = build_envelope(&refs, &params(0.0, 100.0, 5)).unwrap();
        let b = m.band(StrokeClass::Clear, "RElbow").unwrap();
        assert_eq!(b.lo, constant(90.0));
        assert_eq!(b.hi, constant(90.0));
        assert_eq!(b.support_count, 5);
    }

    #[test]
    fn min_max_band_and_exclusions() {
        let mut refs: Vec<_> = [80.0, 90.0, 100.0]
            .iter()
            .map(|&v| stroke(StrokeClass::Clear, &[("RElbow", constant(v))]))
            .collect();
        refs.push(stroke(StrokeClass::Smash, &[("RElbow", constant(1.0))]));
        let m = build_envelope(&refs, &params(0.0, 100.0, 3)).unwrap();
        let b = m.band(StrokeClass::Clear, "RElbow").unwrap();
        assert_eq!((b.lo[7], b.hi[7]), (80.0, 100.0));
        assert_eq!(m.excluded.len(), 1);
        assert_eq!(m.excluded[0].class, StrokeClass::Smash);

        assert_eq!(
            build_envelope(&refs, &params(0.0, 100.0, 10)),
            Err(ReferenceError::EmptyReference { n_min: 10 })
        );
        assert!(matches!(
            build_envelope(&refs, &params(50.0, 50.0, 1)),
            Err(ReferenceError::BadPercentiles { .. })
        ));
    }

    #[test]
    fn hard_limits_replace_bounds() {
        let refs: Vec<_> = [80.0, 90.0, 100.0]
            .iter()
            .map(|&v| stroke(StrokeClass::Clear, &[("RElbow", constant(v))]))
            .collect();
        let mut p = params(0.0, 100.0, 3);
        p.limits.insert(
            "RElbow".into(),
            AngleLimit {
                min: Some(70.0),
                max: None,
            },
        );
        let m = build_envelope(&refs, &p).unwrap();
        let b = m.band(StrokeClass::Clear, "RElbow").unwrap();
        assert_eq!((b.lo[0], b.hi[0]), (70.0, 100.0));
        p.limits.insert(
            "RElbow".into(),
            AngleLimit {
                min: Some(120.0),
                max: Some(110.0),
            },
        );
        assert!(matches!(build_envelope(&refs, &p), Err(ReferenceError::BadLimit(_))));
    }

    fn model() -> EnvelopeModel<f64> {
        let refs: Vec<_> = [80.0, 90.0, 100.0]
            .iter()
            .map(|&v| stroke(StrokeClass::Clear, &[("RElbow", constant(v)), ("LElbow", constant(v))]))
            .collect();
        build_envelope(&refs, &params(0.0, 100.0, 3)).unwrap()
    }

    #[test]
    fn scoring_examples() {
        let m = model();
        let inside = score_stroke(&stroke(StrokeClass::Clear, &[("RElbow", constant(91.0))]), &m, 50.0).unwrap();
        assert_eq!(inside.accuracy, 100.0);
        assert_eq!(inside.skipped_angles, vec!["LElbow".to_string()]);
        assert!(inside.profile.angles[0].worst_phase_span.is_none());

        let above = score_stroke(
            &stroke(StrokeClass::Clear, &[("RElbow", constant(110.0)), ("LElbow", constant(110.0))]),
            &m,
            50.0,
        )
        .unwrap();
        assert!((above.profile.mean_dev - 10.0).abs() < 1e-12);
        assert!((above.accuracy - 80.0).abs() < 1e-12);

        let far = score_stroke(&stroke(StrokeClass::Clear, &[("RElbow", constant(200.0))]), &m, 50.0).unwrap();
        assert_eq!(far.accuracy, 0.0);

        assert_eq!(
            score_stroke(&stroke(StrokeClass::Smash, &[("RElbow", constant(1.0))]), &m, 50.0),
            Err(ReferenceError::UnknownClass(StrokeClass::Smash))
        );
        assert_eq!(
            score_stroke(&stroke(StrokeClass::Clear, &[("RKnee", constant(1.0))]), &m, 50.0),
            Err(ReferenceError::NoComparableAngles)
        );
    }

    #[test]
    fn phase_span_is_half_maximum_run() {
        let mut dev = vec![0.0; PHASE_SAMPLES];
        for (i, d) in dev.iter_mut().enumerate().take(39).skip(19) {
            *d = 10.0 + (i % 3) as f64;
        }
        dev[5] = 3.0;
        let (a, b) = worst_phase_span(&dev).unwrap();
        assert!((a - 19.0 / 63.0).abs() < 1e-12 && (b - 38.0 / 63.0).abs() < 1e-12);
        assert_eq!(worst_phase_span(&[0.0; 4]), None);
    }

    #[test]
    fn ranking() {
        let m = model();
        let mut series = constant(90.0);
        for v in series.iter_mut().skip(10).take(20) {
            *v = 105.0;
        }
        let s = score_stroke(
            &stroke(StrokeClass::Clear, &[("RElbow", series), ("LElbow", constant(90.0))]),
            &m,
            45.0,
        )
        .unwrap();
        let faults = rank_faults(&[s.clone()]);
        assert_eq!(faults.len(), 1);
        assert_eq!(faults[0].angle_name, "RElbow");
        assert_eq!(faults[0].direction, Direction::Above);
        let span = faults[0].worst_phase_span.unwrap();
        assert!((span.0 - 10.0 / 63.0).abs() < 1e-12 && (span.1 - 29.0 / 63.0).abs() < 1e-12);

        let perfect = score_stroke(&stroke(StrokeClass::Clear, &[("RElbow", constant(90.0))]), &m, 45.0).unwrap();
        assert!(rank_faults(&[perfect.clone()]).is_empty());

        // Equal severities fall back to (class, angle) name order.
        let low = score_stroke(
            &stroke(StrokeClass::Clear, &[("RElbow", constant(70.0)), ("LElbow", constant(70.0))]),
            &m,
            45.0,
        )
        .unwrap();
        let faults = rank_faults(&[low]);
        assert_eq!(faults[0].angle_name, "LElbow");
        assert_eq!(faults[1].angle_name, "RElbow");
        assert_eq!(faults[0].direction, Direction::Below);

        let acc = play_accuracy(&[s, perfect]).unwrap();
        assert_eq!(acc.per_class[&StrokeClass::Clear].1, 2);
        assert!(acc.session <= 100.0);
    }
}
