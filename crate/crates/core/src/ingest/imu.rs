use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::scalar::Real;

const HEADER: [&str; 7] = ["t", "ax", "ay", "az", "gx", "gy", "gz"];

/// One inertial sample: time in seconds, specific force in m/s², angular rate in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ImuSample<T> {
    pub t: T,
    pub accel: [T; 3],
    pub gyro: [T; 3],
}

impl<T: Real> ImuSample<T> {
    pub fn accel_magnitude(&self) -> T {
        norm3(self.accel)
    }

    pub fn gyro_magnitude(&self) -> T {
        norm3(self.gyro)
    }
}

fn norm3<T: Real>(v: [T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ImuTrace<T> {
    pub samples: Vec<ImuSample<T>>,
}

impl<T: Real> ImuTrace<T> {
    /// Time span covered by the trace, if any samples exist.
    pub fn span(&self) -> Option<(T, T)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }
}

pub fn parse_imu<T: Real>(path: &Path) -> Result<ImuTrace<T>, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_imu(file)
}

pub(crate) fn read_imu<T: Real, R: io::Read>(reader: R) -> Result<ImuTrace<T>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| IngestError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if !headers.iter().map(str::trim).eq(HEADER.iter().copied()) {
        return Err(IngestError::MalformedRow {
            line: 1,
            reason: "expected header `t,ax,ay,az,gx,gy,gz`".into(),
        });
    }
    let mut samples: Vec<ImuSample<T>> = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(|e| IngestError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut vals = [0.0f64; 7];
        for (i, slot) in vals.iter_mut().enumerate() {
            let raw = record.get(i).unwrap_or("");
            *slot = raw.trim().parse().map_err(|_| IngestError::MalformedRow {
                line,
                reason: format!("cannot parse {} value `{raw}`", HEADER[i]),
            })?;
            if !slot.is_finite() {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: format!("non-finite {}", HEADER[i]),
                });
            }
        }
        let t = T::of(vals[0]);
        if samples.last().is_some_and(|prev| prev.t >= t) {
            return Err(IngestError::NonMonotoneTime { line });
        }
        samples.push(ImuSample {
            t,
            accel: [T::of(vals[1]), T::of(vals[2]), T::of(vals[3])],
            gyro: [T::of(vals[4]), T::of(vals[5]), T::of(vals[6])],
        });
    }
    Ok(ImuTrace { samples })
}

pub fn write_imu_csv<T: Real, W: io::Write>(writer: W, trace: &ImuTrace<T>) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(HEADER)?;
    for s in &trace.samples {
        let row = [s.t, s.accel[0], s.accel[1], s.accel[2], s.gyro[0], s.gyro[1], s.gyro[2]];
        out.write_record(row.iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}
