use meanlab_core::delone::{
    build_delone, classify_delone, delone_check, diffraction, intensity, Construction, DeloneClassifyConfig,
    DiffractionParams, Region,
};
use proptest::prelude::*;

#[test]
fn unperturbed_lattice_classifies_like_the_lattice() {
    let basis = vec![vec![1.0]];
    let region = Region { side: 1500.0 };
    let a = build_delone(&Construction::Lattice { basis: basis.clone() }, &region).unwrap();
    let b = build_delone(&Construction::Perturbed { basis, amplitude: 0.0, seed: 9 }, &region).unwrap();
    let cfg = DeloneClassifyConfig::for_patch(1, region.side);
    let (ra, rb) = (classify_delone(&a, &cfg).unwrap(), classify_delone(&b, &cfg).unwrap());
    assert_eq!(ra.class, rb.class);
    assert_eq!(ra.period_rank, rb.period_rank);
}

#[test]
fn point_fraction_shrinks_as_the_growth_test_tightens() {
    let side = 2000.0;
    let set = build_delone(&Construction::CutProject { beta: 0.0 }, &Region { side }).unwrap();
    let mut last = f64::INFINITY;
    for (lo, hi) in [(0.5, 2.0), (0.8, 1.25), (0.95, 1.05), (0.999, 1.001)] {
        let p = DiffractionParams { ratio_lo: lo, ratio_hi: hi, ..DiffractionParams::for_patch(1, side) };
        let pf = diffraction(&set, &p).unwrap().point_fraction;
        assert!(pf <= last + 1e-12, "{pf} after {last}");
        last = pf;
    }
}

#[test]
fn delone_check_flags_clumps() {
    let set = build_delone(&Construction::Lattice { basis: vec![vec![1.0]] }, &Region { side: 200.0 }).unwrap();
    assert!(delone_check(&set, 0.4, 1.5).unwrap().ok);
    assert!(!delone_check(&set, 1.5, 2.0).unwrap().ok);
    assert!(delone_check(&set, 0.0, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn intensity_ignores_translations(seed in 0u64..1000, t in -50.0f64..50.0, k in 0.01f64..2.0) {
        let set = build_delone(&Construction::Poisson { intensity: 1.0, dim: 1, seed }, &Region { side: 100.0 }).unwrap();
        // a window large enough to hold both copies whole
        let moved: Vec<Vec<f64>> = set.points.iter().map(|p| vec![p[0] + 100.0 + t]).collect();
        let a = intensity(&set.points, &[k], 1000.0);
        let b = intensity(&moved, &[k], 1000.0);
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }
}
