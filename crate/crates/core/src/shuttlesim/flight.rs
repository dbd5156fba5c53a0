use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn norm(self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Shuttle position (m) and velocity (m/s); `z` is height above the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ShuttleState<T> {
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
}

impl<T: Real> ShuttleState<T> {
    pub fn new(position: Vec3<T>, velocity: Vec3<T>) -> Self {
        Self { position, velocity }
    }
}

/// Quadratic drag parameterized by terminal velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct DragParams<T> {
    pub terminal_velocity: T,
    pub gravity: T,
}

impl<T: Real> Default for DragParams<T> {
    fn default() -> Self {
        Self {
            terminal_velocity: T::of(6.7),
            gravity: T::of(9.81),
        }
    }
}

impl<T: Real> DragParams<T> {
    pub fn check(&self) -> Result<(), SimError> {
        let ok = |v: T| v.is_finite() && v > T::zero();
        if !ok(self.terminal_velocity) || !ok(self.gravity) {
            return Err(SimError::BadParams("terminal velocity and gravity must be positive".into()));
        }
        Ok(())
    }

    /// `a = (0, 0, −g) − (g / v_t²) |v| v`.
    pub fn acceleration(&self, v: Vec3<T>) -> Vec3<T> {
        let k = self.gravity / (self.terminal_velocity * self.terminal_velocity);
        Vec3::new(T::zero(), T::zero(), -self.gravity) - v * (k * v.norm())
    }
}

/// One classical Runge–Kutta step.
pub fn step_rk4<T: Real>(state: &ShuttleState<T>, params: &DragParams<T>, dt: T) -> ShuttleState<T> {
    let half = dt * T::of(0.5);
    let (p, v) = (state.position, state.velocity);

    let k1v = params.acceleration(v);
    let k1p = v;
    let k2v = params.acceleration(v + k1v * half);
    let k2p = v + k1v * half;
    let k3v = params.acceleration(v + k2v * half);
    let k3p = v + k2v * half;
    let k4v = params.acceleration(v + k3v * dt);
    let k4p = v + k3v * dt;

    let two = T::of(2.0);
    let sixth = dt / T::of(6.0);
    ShuttleState {
        position: p + (k1p + k2p * two + k3p * two + k4p) * sixth,
        velocity: v + (k1v + k2v * two + k3v * two + k4v) * sixth,
    }
}

/// Integrates for `duration` seconds using steps of `dt`, shortening the last.
pub fn advance<T: Real>(state: &ShuttleState<T>, params: &DragParams<T>, dt: T, duration: T) -> ShuttleState<T> {
    let mut s = *state;
    let mut remaining = duration;
    let tiny = dt * T::of(1e-9);
    while remaining > tiny {
        let h = dt.min(remaining);
        s = step_rk4(&s, params, h);
        remaining = remaining - h;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Landing<T> {
    pub x: T,
    pub y: T,
    pub flight_time: T,
}

fn check_step<T: Real>(dt: T, t_max: T) -> Result<(), SimError> {
    if !(dt > T::zero()) || !dt.is_finite() || !(t_max > T::zero()) {
        return Err(SimError::BadParams("dt and t_max must be positive".into()));
    }
    Ok(())
}

/// Integrates until the shuttle reaches the floor and interpolates the
/// crossing linearly within the last step.
pub fn simulate_to_landing<T: Real>(
    initial: &ShuttleState<T>,
    params: &DragParams<T>,
    dt: T,
    t_max: T,
) -> Result<Landing<T>, SimError> {
    params.check()?;
    check_step(dt, t_max)?;
    if !(initial.position.z > T::zero()) || !initial.position.is_finite() || !initial.velocity.is_finite() {
        return Err(SimError::BadParams("shuttle must start above the floor".into()));
    }
    let mut s = *initial;
    let mut t = T::zero();
    while t < t_max {
        let next = step_rk4(&s, params, dt);
        if next.position.z <= T::zero() {
            let f = s.position.z / (s.position.z - next.position.z);
            let at = s.position + (next.position - s.position) * f;
            return Ok(Landing {
                x: at.x,
                y: at.y,
                flight_time: t + dt * f,
            });
        }
        s = next;
        t = t + dt;
    }
    Err(SimError::NoLanding { t_max: t_max.to_f64_lossy() })
}

/// States at the requested times (seconds after launch, ascending).
pub fn sample_flight<T: Real>(initial: &ShuttleState<T>, params: &DragParams<T>, dt: T, times: &[T]) -> Vec<ShuttleState<T>> {
    let mut out = Vec::with_capacity(times.len());
    let mut s = *initial;
    let mut t = T::zero();
    for &target in times {
        s = advance(&s, params, dt, target - t);
        t = target;
        out.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> DragParams<f64> {
        DragParams::default()
    }

    #[test]
    fn acceleration_cases() {
        let p = params();
        assert_eq!(p.acceleration(Vec3::zero()), Vec3::new(0.0, 0.0, -9.81));
        let a = p.acceleration(Vec3::new(0.0, 0.0, -6.7));
        assert!(a.z.abs() < 1e-12);
    }

    #[test]
    fn drop_from_rest_lands_below() {
        let s = ShuttleState::new(Vec3::new(0.0, 0.0, 3.0), Vec3::zero());
        let l = simulate_to_landing(&s, &params(), 1e-3, 10.0).unwrap();
        assert_eq!((l.x, l.y), (0.0, 0.0));
        assert!(l.flight_time > 0.0);
    }

    #[test]
    fn mirrored_launch_mirrors_landing() {
        let a = ShuttleState::new(Vec3::new(3.0, 2.0, 2.0), Vec3::new(4.0, 15.0, 10.0));
        let b = ShuttleState::new(Vec3::new(3.0, 2.0, 2.0), Vec3::new(-4.0, 15.0, 10.0));
        let la = simulate_to_landing(&a, &params(), 1e-3, 10.0).unwrap();
        let lb = simulate_to_landing(&b, &params(), 1e-3, 10.0).unwrap();
        assert!((la.x - 3.0 + (lb.x - 3.0)).abs() < 1e-12);
        assert_eq!(la.y, lb.y);
        assert_eq!(la.flight_time, lb.flight_time);
    }

    #[test]
    fn no_landing_and_bad_input() {
        let s = ShuttleState::new(Vec3::new(0.0, 0.0, 50.0), Vec3::zero());
        assert!(matches!(
            simulate_to_landing(&s, &params(), 1e-3, 0.5),
            Err(SimError::NoLanding { .. })
        ));
        let floor = ShuttleState::new(Vec3::zero(), Vec3::zero());
        assert!(simulate_to_landing(&floor, &params(), 1e-3, 1.0).is_err());
        assert!(simulate_to_landing(&s, &params(), 0.0, 1.0).is_err());
    }

    #[test]
    fn sampling_matches_stepping() {
        let s = ShuttleState::new(Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 20.0, 5.0));
        let p = params();
        let direct = (0..100).fold(s, |acc, _| step_rk4(&acc, &p, 1e-3));
        let sampled = sample_flight(&s, &p, 1e-3, &[0.05, 0.1]);
        assert!((sampled[1].position - direct.position).norm() < 1e-12);
    }

    #[test]
    fn f32_runs() {
        let s = ShuttleState::new(Vec3::new(0.0f32, 0.0, 2.0), Vec3::new(0.0, 10.0, 5.0));
        let l = simulate_to_landing(&s, &DragParams::default(), 1e-3, 10.0).unwrap();
        assert!(l.y > 0.0);
    }
}
