use meanlab_core::pseudometrics::{f_pseudometric, orbit_pseudometric, MetricKind};
use meanlab_core::{make_observable, make_system, GroupIndex, GroupKind, ObservableSpec, Point, Schedule, SystemSpec};
use proptest::prelude::*;

fn sched() -> Schedule {
    Schedule::new(vec![200.0, 400.0, 800.0], 1).unwrap()
}

fn rotation(alpha: f64) -> (meanlab_core::SystemHandle, SystemSpec) {
    let spec = SystemSpec::TorusRotation { alpha: vec![alpha], flow: false };
    (make_system(&spec).unwrap(), spec)
}

fn bernoulli() -> (meanlab_core::SystemHandle, SystemSpec) {
    let spec = SystemSpec::BernoulliShift { p: 0.5, alphabet: vec!["0".into(), "1".into()] };
    (make_system(&spec).unwrap(), spec)
}

#[test]
fn character_distance_is_constant_along_rotation_orbits() {
    // |e(x + j a) - e(y + j a)| = 2 |sin(pi (x - y))| for every j
    let (s, spec) = rotation(0.3819660112501051);
    let chi = make_observable(&ObservableSpec::Character { k: vec![1] }, &spec).unwrap();
    for (x, y) in [(0.0, 0.5), (0.1, 0.2), (0.7, 0.05)] {
        let want = 2.0 * (std::f64::consts::PI * (x - y)).sin().abs();
        let (px, py) = (Point::Torus(vec![x]), Point::Torus(vec![y]));
        for kind in [MetricKind::DfL1, MetricKind::DfL2] {
            let got = f_pseudometric(kind, &s, &chi, &px, &py, &sched()).unwrap().value;
            assert!((got - want).abs() < 1e-12, "{kind:?}: {got} vs {want}");
        }
        let db = orbit_pseudometric(MetricKind::Db, &s, &px, &py, &sched()).unwrap().value;
        let circ = (x - y).abs().min(1.0 - (x - y).abs());
        assert!((db - circ).abs() < 1e-12, "{db} vs {circ}");
    }
}

#[test]
fn identical_points_are_at_distance_zero() {
    let (s, spec) = bernoulli();
    let f = make_observable(&ObservableSpec::Symbol { index: 0 }, &spec).unwrap();
    let x = s.sample_mu(4);
    for kind in [MetricKind::DfL1, MetricKind::DfL2, MetricKind::RhoF] {
        assert_eq!(f_pseudometric(kind, &s, &f, &x, &x, &sched()).unwrap().value, 0.0);
    }
    for kind in [MetricKind::Db, MetricKind::RhoB] {
        assert_eq!(orbit_pseudometric(kind, &s, &x, &x, &sched()).unwrap().value, 0.0);
    }
}

#[test]
fn wrong_metric_family_is_rejected() {
    let (s, spec) = bernoulli();
    let f = make_observable(&ObservableSpec::Symbol { index: 0 }, &spec).unwrap();
    let (x, y) = (s.sample_mu(1), s.sample_mu(2));
    assert!(f_pseudometric(MetricKind::Db, &s, &f, &x, &y, &sched()).is_err());
    assert!(orbit_pseudometric(MetricKind::DfL2, &s, &x, &y, &sched()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metric_axioms_on_rotation(alpha in 0.01f64..0.99, x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0) {
        let (s, spec) = rotation(alpha);
        let f = make_observable(&ObservableSpec::CosCoordinate { coord: 0 }, &spec).unwrap();
        let (px, py, pz) = (Point::Torus(vec![x]), Point::Torus(vec![y]), Point::Torus(vec![z]));
        for kind in [MetricKind::DfL1, MetricKind::DfL2] {
            let d = |a: &Point, b: &Point| f_pseudometric(kind, &s, &f, a, b, &sched()).unwrap();
            let (xy, yx, yz, xz) = (d(&px, &py), d(&py, &px), d(&py, &pz), d(&px, &pz));
            prop_assert!(xy.value >= 0.0);
            prop_assert_eq!(&xy.per_window, &yx.per_window);
            for k in 0..xy.per_window.len() {
                prop_assert!(xz.per_window[k].1 <= xy.per_window[k].1 + yz.per_window[k].1 + 1e-12);
            }
        }
    }

    #[test]
    fn l1_is_dominated_by_l2(seed_x in 0u64..1000, seed_y in 1000u64..2000) {
        let (s, spec) = bernoulli();
        let f = make_observable(&ObservableSpec::Spin { index: 0 }, &spec).unwrap();
        let (x, y) = (s.sample_mu(seed_x), s.sample_mu(seed_y));
        let l1 = f_pseudometric(MetricKind::DfL1, &s, &f, &x, &y, &sched()).unwrap();
        let l2 = f_pseudometric(MetricKind::DfL2, &s, &f, &x, &y, &sched()).unwrap();
        for (a, b) in l1.per_window.iter().zip(&l2.per_window) {
            prop_assert!(a.1 <= b.1 + 1e-12);
        }
    }

    #[test]
    fn scaling_the_observable_scales_the_distance(c in -3.0f64..3.0, seed in 0u64..500) {
        let (s, spec) = bernoulli();
        let base = ObservableSpec::Symbol { index: 0 };
        let f = make_observable(&base, &spec).unwrap();
        let g = make_observable(&ObservableSpec::Scaled { inner: Box::new(base), re: c, im: 0.0 }, &spec).unwrap();
        let (x, y) = (s.sample_mu(seed), s.sample_mu(seed + 7919));
        for kind in [MetricKind::DfL1, MetricKind::DfL2] {
            let a = f_pseudometric(kind, &s, &f, &x, &y, &sched()).unwrap().value;
            let b = f_pseudometric(kind, &s, &g, &x, &y, &sched()).unwrap().value;
            prop_assert!((b - c.abs() * a).abs() < 1e-9);
        }
    }

    #[test]
    fn lipschitz_observable_is_bounded_by_orbit_distance(alpha in 0.01f64..0.99, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        // |cos 2 pi u - cos 2 pi v| <= 2 pi |u - v| on the circle
        let (s, spec) = rotation(alpha);
        let f = make_observable(&ObservableSpec::CosCoordinate { coord: 0 }, &spec).unwrap();
        let (px, py) = (Point::Torus(vec![x]), Point::Torus(vec![y]));
        let l1 = f_pseudometric(MetricKind::DfL1, &s, &f, &px, &py, &sched()).unwrap().value;
        let db = orbit_pseudometric(MetricKind::Db, &s, &px, &py, &sched()).unwrap().value;
        prop_assert!(l1 <= 2.0 * std::f64::consts::PI * db + 1e-12);
    }

    #[test]
    fn shifting_both_points_barely_moves_d_b(seed in 0u64..500, j in 1i64..20) {
        let (s, _) = bernoulli();
        let (x, y) = (s.sample_mu(seed), s.sample_mu(seed + 31337));
        let g = GroupIndex::new(vec![j as f64], GroupKind::Discrete).unwrap();
        let (tx, ty) = (s.act(&g, &x), s.act(&g, &y));
        let a = orbit_pseudometric(MetricKind::Db, &s, &x, &y, &sched()).unwrap().value;
        let b = orbit_pseudometric(MetricKind::Db, &s, &tx, &ty, &sched()).unwrap().value;
        // the windows differ in at most j terms out of at least 400
        prop_assert!((a - b).abs() <= 2.0 * j as f64 / 400.0);
    }
}
