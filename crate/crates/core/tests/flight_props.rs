use proptest::prelude::*;
use shuttlesense::shuttlesim::{advance, step_rk4, DragParams, ShuttleState, Vec3};

fn params() -> DragParams<f64> {
    DragParams::default()
}

proptest! {
    #[test]
    fn vertical_speed_approaches_terminal_monotonically(vz in -30.0..10.0f64) {
        let p = params();
        let mut st = ShuttleState { position: Vec3::new(0.0, 0.0, 100.0), velocity: Vec3::new(0.0, 0.0, vz) };
        let mut prev_down = -vz;
        for _ in 0..3000 {
            st = step_rk4(&st, &p, 1e-3);
            let down = -st.velocity.z;
            if prev_down > p.terminal_velocity {
                prop_assert!(down <= prev_down + 1e-12);
                prop_assert!(down >= p.terminal_velocity - 1e-9);
            } else {
                prop_assert!(down >= prev_down - 1e-12);
                prop_assert!(down <= p.terminal_velocity + 1e-9);
            }
            prev_down = down;
        }
    }

    #[test]
    fn horizontal_direction_never_reverses(
        vx in -30.0..30.0f64, vy in -30.0..30.0f64, vz in -10.0..30.0f64, t in 0.1..3.0f64,
    ) {
        let p = params();
        let mut st = ShuttleState { position: Vec3::new(3.0, 3.0, 2.0), velocity: Vec3::new(vx, vy, vz) };
        for _ in 0..20 {
            let next = advance(&st, &p, 1e-3, t / 20.0);
            prop_assert!(next.velocity.x * vx >= 0.0 && next.velocity.y * vy >= 0.0);
            let cross = next.velocity.x * vy - next.velocity.y * vx;
            prop_assert!(cross.abs() <= 1e-9 * (vx.abs() + vy.abs()).max(1.0));
            st = next;
        }
    }
}
