use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::scalar::Real;

const HEADER: [&str; 4] = ["Frame", "Visibility", "X", "Y"];

/// Coordinate space of a trajectory track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TrackSpace {
    /// Image pixels, y pointing down.
    Pixel,
    /// Court meters on the floor plane.
    #[default]
    Court,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrackSample<T> {
    pub frame: u64,
    pub visible: bool,
    pub x: T,
    pub y: T,
}

/// Shuttle positions per frame. Invisible rows are kept for gap statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrajectoryTrack<T> {
    pub samples: Vec<TrackSample<T>>,
    pub space: TrackSpace,
}

impl<T: Real> TrajectoryTrack<T> {
    /// Visible samples with `from <= frame <= to`, in frame order.
    pub fn visible_between(&self, from: u64, to: u64) -> impl Iterator<Item = &TrackSample<T>> {
        let start = self.samples.partition_point(|s| s.frame < from);
        self.samples[start..]
            .iter()
            .take_while(move |s| s.frame <= to)
            .filter(|s| s.visible)
    }
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, line: u64) -> Result<T, IngestError> {
    let raw = record.get(idx).ok_or_else(|| IngestError::MalformedRow {
        line,
        reason: format!("missing column {}", HEADER[idx]),
    })?;
    raw.trim().parse().map_err(|_| IngestError::MalformedRow {
        line,
        reason: format!("cannot parse {} value `{raw}`", HEADER[idx]),
    })
}

/// Parses a `Frame,Visibility,X,Y` CSV track.
pub fn parse_trajectory<T: Real>(path: &Path, space: TrackSpace) -> Result<TrajectoryTrack<T>, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_trajectory(file, space)
}

pub(crate) fn read_trajectory<T: Real, R: io::Read>(reader: R, space: TrackSpace) -> Result<TrajectoryTrack<T>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut samples: Vec<TrackSample<T>> = Vec::new();
    let mut header_seen = false;
    for result in rdr.records() {
        let record = result.map_err(|e| IngestError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if !header_seen {
            header_seen = true;
            let is_header = record.iter().map(str::trim).eq(HEADER.iter().copied());
            if is_header {
                continue;
            }
            if record.get(0).is_some_and(|f| f.trim().parse::<u64>().is_err()) {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: "expected header `Frame,Visibility,X,Y`".into(),
                });
            }
        }
        if record.len() != 4 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected 4 columns, found {}", record.len()),
            });
        }
        let frame: u64 = field(&record, 0, line)?;
        let visible = match field::<u8>(&record, 1, line)? {
            0 => false,
            1 => true,
            v => {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: format!("visibility must be 0 or 1, got {v}"),
                })
            }
        };
        let x: f64 = field(&record, 2, line)?;
        let y: f64 = field(&record, 3, line)?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(IngestError::MalformedRow {
                line,
                reason: "non-finite coordinate".into(),
            });
        }
        if !visible && (x != 0.0 || y != 0.0) {
            return Err(IngestError::MalformedRow {
                line,
                reason: "invisible sample must carry X=Y=0".into(),
            });
        }
        if samples.last().is_some_and(|prev| prev.frame >= frame) {
            return Err(IngestError::NonMonotoneFrames { line });
        }
        samples.push(TrackSample {
            frame,
            visible,
            x: T::of(x),
            y: T::of(y),
        });
    }
    Ok(TrajectoryTrack { samples, space })
}

pub fn write_trajectory_csv<T: Real, W: io::Write>(writer: W, track: &TrajectoryTrack<T>) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(HEADER)?;
    for s in &track.samples {
        out.write_record([
            s.frame.to_string(),
            u8::from(s.visible).to_string(),
            s.x.to_string(),
            s.y.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
