//! Court geometry, landing zones and Gaussian landing heatmaps.
//!
//! Heatmaps are splatted with the same kernel shape used for shuttle detection
//! ground truth: an amplified isotropic Gaussian centred on the point. Here it
//! accumulates landing points per (origin zone, stroke class).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_usize, Real};
use crate::strokes::StrokeClass;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CourtError {
    #[error("point ({x}, {y}) lies outside the court")]
    OutOfCourt { x: f64, y: f64 },
    #[error("heatmap has no mass")]
    EmptyHeatmap,
    #[error("invalid heatmap configuration: {0}")]
    BadConfig(String),
    #[error("unsupported heatmap extension `{0}` (use .pgm or .csv)")]
    UnsupportedFormat(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Singles/doubles court outline in meters: x across, y along, net at mid-length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CourtGeometry<T> {
    pub length: T,
    pub width: T,
    pub net_y: T,
}

impl<T: Real> Default for CourtGeometry<T> {
    fn default() -> Self {
        Self {
            length: T::of(13.40),
            width: T::of(6.10),
            net_y: T::of(6.70),
        }
    }
}

impl<T: Real> CourtGeometry<T> {
    pub fn contains(&self, x: T, y: T) -> bool {
        x >= T::zero() && x <= self.width && y >= T::zero() && y <= self.length
    }

    pub fn half_length(&self) -> T {
        self.net_y
    }
}

/// Zones per court half. Ids run over the near half first, row-major, with
/// rows increasing in y and columns increasing in x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneGrid {
    pub rows: usize,
    pub cols: usize,
}

impl Default for ZoneGrid {
    fn default() -> Self {
        Self { rows: 3, cols: 3 }
    }
}

impl ZoneGrid {
    pub fn zone_count(&self) -> usize {
        2 * self.rows * self.cols
    }
}

fn cell_index<T: Real>(value: T, extent: T, parts: usize) -> usize {
    let idx = (value / (extent / from_usize(parts))).floor().to_usize().unwrap_or(0);
    idx.min(parts - 1)
}

/// Zone containing a court point. Cells are half-open, so boundary points go to
/// the higher-index cell; the far edges of the court close the last cells.
pub fn zone_of<T: Real>(x: T, y: T, court: &CourtGeometry<T>, grid: &ZoneGrid) -> Result<usize, CourtError> {
    if !court.contains(x, y) || grid.rows == 0 || grid.cols == 0 {
        return Err(CourtError::OutOfCourt {
            x: x.to_f64_lossy(),
            y: y.to_f64_lossy(),
        });
    }
    let half = court.half_length();
    let (far, local_y) = if y >= half { (1, y - half) } else { (0, y) };
    let col = cell_index(x, court.width, grid.cols);
    let row = cell_index(local_y, court.length - half, grid.rows);
    Ok(far * grid.rows * grid.cols + row * grid.cols + col)
}

/// Projective map from image or court coordinates onto court meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography(pub [[f64; 3]; 3]);

impl Homography {
    pub const IDENTITY: Homography = Homography([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn apply<T: Real>(&self, x: T, y: T) -> Option<(T, T)> {
        let (x, y) = (x.to_f64_lossy(), y.to_f64_lossy());
        let m = &self.0;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        if w.abs() < 1e-12 {
            return None;
        }
        let u = (m[0][0] * x + m[0][1] * y + m[0][2]) / w;
        let v = (m[1][0] * x + m[1][1] * y + m[1][2]) / w;
        (u.is_finite() && v.is_finite()).then(|| (T::of(u), T::of(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HeatmapConfig<T> {
    /// Kernel standard deviation in the heatmap's units.
    pub sigma: T,
    pub amplitude: T,
    /// Cell edge length.
    pub resolution: T,
}

impl<T: Real> Default for HeatmapConfig<T> {
    fn default() -> Self {
        Self {
            sigma: T::of(0.25),
            amplitude: T::of(255.0),
            resolution: T::of(0.1),
        }
    }
}

impl<T: Real> HeatmapConfig<T> {
    pub fn check(&self) -> Result<(), CourtError> {
        if !(self.sigma > T::zero()) || !(self.resolution > T::zero()) || !(self.amplitude >= T::zero()) {
            return Err(CourtError::BadConfig(
                "sigma and resolution must be positive, amplitude non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Kernel support radius in standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 4.0;

/// Landing density over the court, `height` rows along y by `width` columns along x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LandingHeatmap<T> {
    pub width: usize,
    pub height: usize,
    pub resolution: T,
    pub values: Vec<T>,
    pub normalized: bool,
}

impl<T: Real> LandingHeatmap<T> {
    pub fn for_court(court: &CourtGeometry<T>, resolution: T) -> Self {
        let cells = |extent: T| (extent / resolution - T::of(1e-9)).ceil().to_usize().unwrap_or(0).max(1);
        let (width, height) = (cells(court.width), cells(court.length));
        Self {
            width,
            height,
            resolution,
            values: vec![T::zero(); width * height],
            normalized: false,
        }
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (T, T) {
        let half = T::of(0.5);
        (
            (from_usize::<T>(col) + half) * self.resolution,
            (from_usize::<T>(row) + half) * self.resolution,
        )
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.width + col]
    }

    pub fn total(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Adds `other` cell-wise; both grids must share a shape.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!((self.width, self.height), (other.width, other.height), "heatmap shapes differ");
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + b;
        }
        self.normalized = false;
    }

    /// Scales the grid to unit mass.
    pub fn normalize(&mut self) -> Result<(), CourtError> {
        let total = self.total();
        if !(total > T::zero()) {
            return Err(CourtError::EmptyHeatmap);
        }
        for v in &mut self.values {
            *v = *v / total;
        }
        self.normalized = true;
        Ok(())
    }

    /// Row and column of the largest cell, or `None` when all cells are zero.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, T)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if v > T::zero() && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| (i / self.width, i % self.width))
    }

    /// P2 grayscale image: header `P2 W H 255`, values rescaled so the peak is 255.
    pub fn to_pgm(&self) -> String {
        let peak = self.values.iter().fold(T::zero(), |a, &b| a.max(b));
        let mut out = format!("P2 {} {} 255\n", self.width, self.height);
        for row in 0..self.height {
            let line: Vec<String> = (0..self.width)
                .map(|col| {
                    let v = self.get(row, col);
                    let level = if peak > T::zero() {
                        (v / peak * T::of(255.0)).round().to_u32().unwrap_or(0).min(255)
                    } else {
                        0
                    };
                    level.to_string()
                })
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Raw cell values, one grid row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in 0..self.height {
            let line: Vec<String> = (0..self.width).map(|col| self.get(row, col).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    /// Writes P2 or CSV depending on the file extension.
    pub fn write_to(&self, path: &Path) -> Result<(), CourtError> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let text = match ext.as_str() {
            "pgm" => self.to_pgm(),
            "csv" => self.to_csv(),
            other => return Err(CourtError::UnsupportedFormat(other.to_string())),
        };
        std::fs::write(path, text).map_err(|e| CourtError::Io(format!("{}: {e}", path.display())))
    }
}

/// Adds an amplified Gaussian centred at `(cx, cy)`, evaluated at cell
/// centres within `TRUNCATION_SIGMAS` standard deviations.
pub fn splat_gaussian<T: Real>(
    heatmap: &mut LandingHeatmap<T>,
    cx: T,
    cy: T,
    court: &CourtGeometry<T>,
    cfg: &HeatmapConfig<T>,
) -> Result<(), CourtError> {
    if !court.contains(cx, cy) {
        return Err(CourtError::OutOfCourt {
            x: cx.to_f64_lossy(),
            y: cy.to_f64_lossy(),
        });
    }
    cfg.check()?;
    let radius = cfg.sigma * T::of(TRUNCATION_SIGMAS);
    let two_var = T::of(2.0) * cfg.sigma * cfg.sigma;
    let res = heatmap.resolution;
    let span = |c: T, cells: usize| {
        let lo = ((c - radius) / res - T::of(0.5)).floor().max(T::zero());
        let hi = ((c + radius) / res - T::of(0.5)).ceil();
        let lo = lo.to_usize().unwrap_or(0);
        let hi = hi.to_usize().unwrap_or(0).min(cells.saturating_sub(1));
        lo..=hi
    };
    for row in span(cy, heatmap.height) {
        for col in span(cx, heatmap.width) {
            let (x, y) = heatmap.cell_center(row, col);
            let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if d2 > radius * radius {
                continue;
            }
            let idx = row * heatmap.width + col;
            heatmap.values[idx] = heatmap.values[idx] + cfg.amplitude * (-d2 / two_var).exp();
        }
    }
    heatmap.normalized = false;
    Ok(())
}

/// A stroke's origin and landing in court meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LandingObservation<T> {
    pub class: StrokeClass,
    pub origin: Option<(T, T)>,
    pub landing: Option<(T, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandingHeatmaps<T> {
    pub maps: BTreeMap<(usize, StrokeClass), LandingHeatmap<T>>,
    pub counts: BTreeMap<(usize, StrokeClass), usize>,
    /// Strokes lacking a landing or origin, or falling outside the court.
    pub skipped: usize,
}

/// One heatmap per observed (origin zone, class).
pub fn accumulate_landings<T: Real>(
    observations: &[LandingObservation<T>],
    court: &CourtGeometry<T>,
    grid: &ZoneGrid,
    cfg: &HeatmapConfig<T>,
) -> Result<LandingHeatmaps<T>, CourtError> {
    cfg.check()?;
    let mut out = LandingHeatmaps {
        maps: BTreeMap::new(),
        counts: BTreeMap::new(),
        skipped: 0,
    };
    for obs in observations {
        let (Some((ox, oy)), Some((lx, ly))) = (obs.origin, obs.landing) else {
            out.skipped += 1;
            continue;
        };
        let Ok(zone) = zone_of(ox, oy, court, grid) else {
            out.skipped += 1;
            continue;
        };
        if !court.contains(lx, ly) {
            out.skipped += 1;
            continue;
        }
        let key = (zone, obs.class);
        let map = out
            .maps
            .entry(key)
            .or_insert_with(|| LandingHeatmap::for_court(court, cfg.resolution));
        splat_gaussian(map, lx, ly, court, cfg)?;
        *out.counts.entry(key).or_insert(0) += 1;
    }
    Ok(out)
}

/// Zone of the heatmap's peak cell. Equal peaks resolve to the lowest zone id.
pub fn most_probable_zone<T: Real>(
    heatmap: &LandingHeatmap<T>,
    court: &CourtGeometry<T>,
    grid: &ZoneGrid,
) -> Result<usize, CourtError> {
    let (row, col) = heatmap.argmax().ok_or(CourtError::EmptyHeatmap)?;
    let peak = heatmap.get(row, col);
    let mut best = usize::MAX;
    for (i, &v) in heatmap.values.iter().enumerate() {
        if v == peak {
            let (x, y) = heatmap.cell_center(i / heatmap.width, i % heatmap.width);
            let x = x.min(court.width);
            let y = y.min(court.length);
            best = best.min(zone_of(x, y, court, grid)?);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn court() -> CourtGeometry<f64> {
        CourtGeometry::default()
    }

    #[test]
    fn zones() {
        let g = ZoneGrid::default();
        let c = court();
        assert_eq!(zone_of(0.0, 0.0, &c, &g).unwrap(), 0);
        let eps = 1e-9;
        assert_eq!(zone_of(6.10 - eps, 13.40 - eps, &c, &g).unwrap(), 17);
        assert_eq!(zone_of(6.10, 13.40, &c, &g).unwrap(), 17);
        assert_eq!(zone_of(1.0, 1.0, &c, &g).unwrap(), 0);
        // Half-open boundaries: the net line belongs to the far half.
        assert_eq!(zone_of(0.0, 6.70, &c, &g).unwrap(), 9);
        assert_eq!(zone_of(3.05, 3.35, &c, &g).unwrap(), 4);
        assert!(matches!(zone_of(-0.1, 1.0, &c, &g), Err(CourtError::OutOfCourt { .. })));
        assert!(matches!(zone_of(1.0, 13.5, &c, &g), Err(CourtError::OutOfCourt { .. })));
    }

    #[test]
    fn grid_shape() {
        let h = LandingHeatmap::for_court(&court(), 0.1);
        assert_eq!((h.width, h.height), (61, 134));
        let h = LandingHeatmap::for_court(&court(), 0.5);
        assert_eq!((h.width, h.height), (13, 27));
    }

    #[test]
    fn splat_peak_and_sigma_distance() {
        let c = court();
        let cfg = HeatmapConfig::default();
        let mut h = LandingHeatmap::for_court(&c, 0.1);
        let (cx, cy) = h.cell_center(30, 20);
        splat_gaussian(&mut h, cx, cy, &c, &cfg).unwrap();
        assert_eq!(h.get(30, 20), 255.0);
        // Cell offset by sigma (0.25 m) does not exist at 0.1 m cells; use 0.05 m.
        let mut fine = LandingHeatmap::for_court(&c, 0.05);
        let (cx, cy) = fine.cell_center(40, 40);
        splat_gaussian(&mut fine, cx, cy, &c, &cfg).unwrap();
        let expected = 255.0 * (-0.5f64).exp();
        assert!((fine.get(40, 45) - expected).abs() < 1e-9);
        assert!((fine.get(45, 40) - expected).abs() < 1e-9);
    }

    #[test]
    fn splat_is_truncated_and_additive() {
        let c = court();
        let cfg = HeatmapConfig::default();
        let mut once = LandingHeatmap::for_court(&c, 0.1);
        splat_gaussian(&mut once, 2.0, 3.0, &c, &cfg).unwrap();
        let mut twice = once.clone();
        splat_gaussian(&mut twice, 2.0, 3.0, &c, &cfg).unwrap();
        for (a, b) in once.values.iter().zip(&twice.values) {
            assert_eq!(2.0 * a, *b);
        }
        // Beyond 4 sigma nothing is written.
        let far = once.cell_center(0, 60);
        assert!(((far.0 - 2.0).powi(2) + (far.1 - 3.0).powi(2)).sqrt() > 1.0);
        assert_eq!(once.get(0, 60), 0.0);
        assert!(splat_gaussian(&mut once, 7.0, 1.0, &c, &cfg).is_err());
    }

    #[test]
    fn accumulate_skips_missing() {
        let c = court();
        let g = ZoneGrid::default();
        let cfg = HeatmapConfig::default();
        let obs = vec![
            LandingObservation {
                class: StrokeClass::Clear,
                origin: Some((1.0, 1.0)),
                landing: Some((3.0, 12.0)),
            },
            LandingObservation {
                class: StrokeClass::Clear,
                origin: Some((1.0, 1.0)),
                landing: None,
            },
        ];
        let maps = accumulate_landings(&obs, &c, &g, &cfg).unwrap();
        assert_eq!(maps.maps.len(), 1);
        assert_eq!(maps.skipped, 1);
        let map = &maps.maps[&(0, StrokeClass::Clear)];
        assert_eq!(most_probable_zone(map, &c, &g).unwrap(), zone_of(3.0, 12.0, &c, &g).unwrap());

        let none = accumulate_landings(&obs[1..], &c, &g, &cfg).unwrap();
        assert!(none.maps.is_empty());
        assert_eq!(none.skipped, 1);
    }

    #[test]
    fn most_probable_zone_single_and_tie() {
        let c = court();
        let g = ZoneGrid::default();
        let cfg = HeatmapConfig::default();
        let mut h = LandingHeatmap::for_court(&c, 0.1);
        splat_gaussian(&mut h, 3.05, 3.35, &c, &cfg).unwrap();
        assert_eq!(most_probable_zone(&h, &c, &g).unwrap(), 4);

        let mut tie = LandingHeatmap::for_court(&c, 0.1);
        let row = 33;
        let left = tie.cell_center(row, 10);
        let right = tie.cell_center(row, tie.width - 1 - 10);
        splat_gaussian(&mut tie, left.0, left.1, &c, &cfg).unwrap();
        splat_gaussian(&mut tie, right.0, right.1, &c, &cfg).unwrap();
        assert_eq!(zone_of(left.0, left.1, &c, &g).unwrap(), 3);
        assert_eq!(zone_of(right.0, right.1, &c, &g).unwrap(), 5);
        assert_eq!(most_probable_zone(&tie, &c, &g).unwrap(), 3);

        let empty = LandingHeatmap::<f64>::for_court(&c, 0.1);
        assert_eq!(most_probable_zone(&empty, &c, &g), Err(CourtError::EmptyHeatmap));
    }

    #[test]
    fn normalize_and_exports() {
        let c = court();
        let cfg = HeatmapConfig::default();
        let mut h = LandingHeatmap::for_court(&c, 0.5);
        splat_gaussian(&mut h, 1.0, 1.0, &c, &cfg).unwrap();
        let before = h.argmax();
        h.normalize().unwrap();
        assert!((h.total() - 1.0).abs() < 1e-12);
        assert_eq!(h.argmax(), before);
        let pgm = h.to_pgm();
        assert!(pgm.starts_with("P2 13 27 255\n"));
        assert_eq!(pgm.lines().count(), 28);
        assert!(pgm.contains("255"));
        assert_eq!(h.to_csv().lines().count(), 27);
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            h.write_to(&dir.path().join("x.png")),
            Err(CourtError::UnsupportedFormat(_))
        ));
        h.write_to(&dir.path().join("x.pgm")).unwrap();
    }

    #[test]
    fn homography_identity_and_affine() {
        assert_eq!(Homography::IDENTITY.apply(2.0, 3.0), Some((2.0, 3.0)));
        let h = Homography([[0.0, -0.5, 2.0], [0.25, 0.0, 1.0], [0.0, 0.0, 1.0]]);
        assert_eq!(h.apply(4.0, 2.0), Some((1.0, 2.0)));
    }
}
