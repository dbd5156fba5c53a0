use serde::{Deserialize, Serialize};

use super::StrokeError;
use crate::ingest::ImuTrace;
use crate::scalar::Real;

pub const JOULES_PER_KCAL: f64 = 4184.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SwingParams<T> {
    /// Kilograms.
    pub racket_mass: T,
    /// Effective radius from the rotation centre to the racket head, meters.
    pub r_eff: T,
    /// Metabolic efficiency turning food energy into swing kinetic energy.
    pub efficiency: T,
}

impl<T: Real> Default for SwingParams<T> {
    fn default() -> Self {
        Self {
            racket_mass: T::of(0.09),
            r_eff: T::of(0.6),
            efficiency: T::of(0.25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SwingMetrics<T> {
    /// m/s
    pub head_speed: T,
    /// N
    pub force: T,
    /// Swept arc, rad.
    pub radian: T,
    /// kcal
    pub calories: T,
}

/// Swing metrics over the IMU samples with `t0 <= t <= t1`.
pub fn swing_metrics<T: Real>(trace: &ImuTrace<T>, t0: T, t1: T, params: &SwingParams<T>) -> Result<SwingMetrics<T>, StrokeError> {
    let start = trace.samples.partition_point(|s| s.t < t0);
    let window: Vec<_> = trace.samples[start..].iter().take_while(|s| s.t <= t1).collect();
    if window.is_empty() {
        return Err(StrokeError::EmptyWindow {
            t0: t0.to_f64_lossy(),
            t1: t1.to_f64_lossy(),
        });
    }
    let omega_peak = window.iter().map(|s| s.gyro_magnitude()).fold(T::zero(), T::max);
    let accel_peak = window.iter().map(|s| s.accel_magnitude()).fold(T::zero(), T::max);
    let half = T::of(0.5);
    let radian = window.windows(2).fold(T::zero(), |acc, w| {
        acc + (w[1].t - w[0].t) * (w[0].gyro_magnitude() + w[1].gyro_magnitude()) * half
    });
    let head_speed = omega_peak * params.r_eff;
    let kinetic = half * params.racket_mass * head_speed * head_speed;
    Ok(SwingMetrics {
        head_speed,
        force: params.racket_mass * accel_peak,
        radian,
        calories: kinetic / params.efficiency / T::of(JOULES_PER_KCAL),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ImuSample;

    fn trace(n: usize, dt: f64, gyro: impl Fn(usize) -> f64, accel: f64) -> ImuTrace<f64> {
        ImuTrace {
            samples: (0..n)
                .map(|i| ImuSample {
                    t: i as f64 * dt,
                    accel: [accel, 0.0, 0.0],
                    gyro: [0.0, 0.0, gyro(i)],
                })
                .collect(),
        }
    }

    #[test]
    fn constant_rate_rectangle() {
        let t = trace(31, 0.01, |_| 10.0, 2.0);
        let m = swing_metrics(&t, 0.0, 0.3 + 1e-12, &SwingParams::default()).unwrap();
        assert!((m.radian - 3.0).abs() < 1e-9);
        assert!((m.force - 0.18).abs() < 1e-12);
    }

    #[test]
    fn head_speed_and_calories() {
        let t = trace(5, 0.01, |i| if i == 2 { 30.0 } else { 1.0 }, 0.0);
        let m = swing_metrics(&t, 0.0, 1.0, &SwingParams::default()).unwrap();
        assert!((m.head_speed - 18.0).abs() < 1e-12);

        let t = trace(2, 0.01, |_| 20.0 / 0.6, 0.0);
        let m = swing_metrics(&t, 0.0, 1.0, &SwingParams::default()).unwrap();
        assert!((m.head_speed - 20.0).abs() < 1e-12);
        // (0.5 * 0.09 * 400 / 0.25) / 4184
        assert!((m.calories - 0.017_208_413).abs() < 1e-8);
    }

    #[test]
    fn empty_window() {
        let t = trace(5, 0.01, |_| 1.0, 0.0);
        assert!(matches!(
            swing_metrics(&t, 2.0, 3.0, &SwingParams::default()),
            Err(StrokeError::EmptyWindow { .. })
        ));
    }
}
