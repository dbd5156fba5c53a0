use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use proptest::prelude::*;
use shuttlesense::kinematics::{angle_at_joint, fill_gaps, smooth, JointAngleSeries, Point2};

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Arccos of a cosine whose dot product and norms are accumulated exactly.
fn rational_oracle(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let (ux, uy) = (exact(a.0) - exact(b.0), exact(a.1) - exact(b.1));
    let (vx, vy) = (exact(c.0) - exact(b.0), exact(c.1) - exact(b.1));
    let dot = &ux * &vx + &uy * &vy;
    let nn = (&ux * &ux + &uy * &uy) * (&vx * &vx + &vy * &vy);
    let cos2 = (&dot * &dot / nn).to_f64().unwrap();
    let cos = if dot.is_negative() { -cos2.sqrt() } else { cos2.sqrt() };
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

fn pt() -> impl Strategy<Value = (f64, f64)> {
    (-100.0..100.0f64, -100.0..100.0f64)
}

fn far_enough(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    let d = |p: (f64, f64)| ((p.0 - b.0).powi(2) + (p.1 - b.1).powi(2)).sqrt();
    d(a) > 1.0 && d(c) > 1.0
}

fn p(v: (f64, f64)) -> Point2<f64> {
    Point2::new(v.0, v.1)
}

fn series(values: Vec<Option<f64>>) -> JointAngleSeries<f64> {
    JointAngleSeries {
        angle_name: "A".into(),
        values,
        fps: 60.0,
    }
}

#[test]
fn exact_cosine_oracle_on_known_angles() {
    assert!((rational_oracle((1.0, 0.0), (0.0, 0.0), (0.0, 1.0)) - 90.0).abs() < 1e-12);
    assert!((rational_oracle((3.0, 4.0), (0.0, 0.0), (-3.0, -4.0)) - 180.0).abs() < 1e-12);
    assert!((rational_oracle((2.0, 0.0), (1.0, 0.0), (2.0, 1.0)) - 45.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn angle_matches_exact_cosine_oracle(a in pt(), b in pt(), c in pt()) {
        prop_assume!(far_enough(a, b, c));
        let oracle = rational_oracle(a, b, c);
        prop_assume!(oracle > 1e-3 && oracle < 180.0 - 1e-3);
        let got = angle_at_joint(p(a), p(b), p(c)).unwrap();
        prop_assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn angle_is_symmetric(a in pt(), b in pt(), c in pt()) {
        prop_assume!(far_enough(a, b, c));
        let x = angle_at_joint(p(a), p(b), p(c)).unwrap();
        let y = angle_at_joint(p(c), p(b), p(a)).unwrap();
        prop_assert_eq!(x, y);
        prop_assert!((0.0..=180.0).contains(&x));
    }

    #[test]
    fn angle_is_similarity_invariant(
        a in pt(), b in pt(), c in pt(),
        theta in 0.0..std::f64::consts::TAU,
        scale in 0.01..100.0f64,
        t in pt(),
    ) {
        prop_assume!(far_enough(a, b, c));
        let m = |q: (f64, f64)| Point2::new(
            scale * (theta.cos() * q.0 - theta.sin() * q.1) + t.0,
            scale * (theta.sin() * q.0 + theta.cos() * q.1) + t.1,
        );
        let x = angle_at_joint(p(a), p(b), p(c)).unwrap();
        let y = angle_at_joint(m(a), m(b), m(c)).unwrap();
        prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }

    #[test]
    fn fill_gaps_is_idempotent(
        values in prop::collection::vec(prop::option::weighted(0.7, 0.0..180.0f64), 0..80),
        max_gap in 0usize..10,
    ) {
        let once = fill_gaps(&series(values), max_gap);
        prop_assert_eq!(fill_gaps(&once, max_gap), once);
    }

    #[test]
    fn smooth_stays_within_window_range(
        values in prop::collection::vec(prop::option::weighted(0.8, 0.0..180.0f64), 1..80),
        half in 0usize..6,
    ) {
        let window = 2 * half + 1;
        let out = smooth(&series(values.clone()), window).unwrap();
        for (i, v) in out.values.iter().enumerate() {
            prop_assert_eq!(v.is_some(), values[i].is_some());
            if let Some(v) = v {
                let lo = i.saturating_sub(half);
                let hi = (i + half).min(values.len() - 1);
                let win: Vec<f64> = values[lo..=hi].iter().flatten().copied().collect();
                let min = win.iter().copied().fold(f64::INFINITY, f64::min);
                let max = win.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(*v >= min - 1e-9 && *v <= max + 1e-9);
            }
        }
    }
}

#[test]
fn big_rational_is_exact_for_f64_inputs() {
    let r = exact(0.1);
    assert_eq!(r.to_f64().unwrap(), 0.1);
    assert!(r.denom() > &BigInt::from(1));
}
