//! Acceptance gate. Each test prints one `PASS`/`FAIL` line for its
//! criterion and then asserts it. Tests take a shared lock so the timed
//! criteria are not measured against each other.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use meanlab_cli::{run, ExperimentConfig};
use meanlab_core::classify::{center_profiles, dichotomy_report, DichotomyConfig, SamplerParams};
use meanlab_core::delone::{
    build_delone, classify_delone, golden_ratio, Construction, DeloneClass, DeloneClassifyConfig, Region,
};
use meanlab_core::fixtures::{fixture, golden_alpha};
use meanlab_core::pseudometrics::{
    default_equivalence_grid, equivalence_check, f_pseudometric, orbit_pseudometric, MetricKind,
};
use meanlab_core::spectral::{discrete_spectrum_score, spectrum_scan, FrequencyGrid, ScanOptions};
use meanlab_core::systems::sample_ball;
use meanlab_core::{
    make_observable, make_system, Complex64, Observable, ObservableSpec, Point, Schedule, SystemHandle, SystemSpec,
};

static LOCK: Mutex<()> = Mutex::new(());

fn report(n: u32, name: &str, ok: bool, detail: String) {
    // written to the handle directly so the line shows without --nocapture
    let line = format!("acceptance {n} {name}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().write_all(line.as_bytes());
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

fn rotation() -> SystemHandle {
    make_system(&SystemSpec::TorusRotation { alpha: vec![golden_alpha()], flow: false }).unwrap()
}

fn bernoulli_spec() -> SystemSpec {
    SystemSpec::BernoulliShift { p: 0.5, alphabet: vec!["0".into(), "1".into()] }
}

fn observable(spec: ObservableSpec, system: &SystemSpec) -> Observable {
    make_observable(&spec, system).unwrap()
}

fn sched(sizes: &[f64]) -> Schedule {
    Schedule::new(sizes.to_vec(), 1).unwrap()
}

fn seeded_pairs(s: &SystemHandle, n: usize, salt: u64) -> Vec<(Point, Point)> {
    (0..n as u64).map(|i| (s.sample_mu(salt + 2 * i), s.sample_mu(salt + 2 * i + 1))).collect()
}

#[test]
fn criterion_1_pseudometric_oracles() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let big = sched(&[25000.0, 50000.0, 100000.0]);
    let rot_spec = SystemSpec::TorusRotation { alpha: vec![golden_alpha()], flow: false };
    let rot = rotation();
    let chi = observable(ObservableSpec::Character { k: vec![1] }, &rot_spec);
    let t = Instant::now();
    let d = f_pseudometric(MetricKind::DfL2, &rot, &chi, &Point::Torus(vec![0.0]), &Point::Torus(vec![0.25]), &big)
        .unwrap()
        .value;
    let rot_secs = t.elapsed().as_secs_f64();
    let rot_ok = (d - 2f64.sqrt()).abs() <= 1e-6 && rot_secs < 1.0;

    let spec = bernoulli_spec();
    let bern = make_system(&spec).unwrap();
    let sym = observable(ObservableSpec::Symbol { index: 0 }, &spec);
    let pairs = seeded_pairs(&bern, 20, 100);
    let l1: Vec<f64> =
        pairs.iter().map(|(x, y)| f_pseudometric(MetricKind::DfL1, &bern, &sym, x, y, &big).unwrap().value).collect();
    let db: Vec<f64> =
        pairs.iter().map(|(x, y)| orbit_pseudometric(MetricKind::Db, &bern, x, y, &big).unwrap().value).collect();
    let worst_l1 = l1.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
    let worst_db = db.iter().map(|v| (v - 2.0 / 3.0).abs()).fold(0.0, f64::max);
    let ok = rot_ok && worst_l1 <= 0.02 && worst_db <= 0.02;
    report(
        1,
        "pseudometric oracles",
        ok,
        format!(
            "rotation df_L2 = {d:.9} in {rot_secs:.3}s; bernoulli over 20 pairs: max |df_L1 - 1/2| = {worst_l1:.4}, max |d_b - 2/3| = {worst_db:.4}"
        ),
    );
}

#[test]
fn criterion_2_metric_equivalence() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let sc = sched(&[4096.0, 8192.0]);
    let sqrt2 = 2f64.sqrt();
    let cases: Vec<(&str, SystemSpec, ObservableSpec)> = vec![
        (
            "rotation",
            SystemSpec::TorusRotation { alpha: vec![golden_alpha()], flow: false },
            ObservableSpec::Scaled { inner: Box::new(ObservableSpec::Character { k: vec![1] }), re: 0.5, im: 0.0 },
        ),
        ("bernoulli", bernoulli_spec(), ObservableSpec::CenteredSymbol { index: 0, mean: 0.5 }),
        (
            "sturmian",
            SystemSpec::Sturmian { alpha: sqrt2 - 1.0 },
            ObservableSpec::Scaled { inner: Box::new(ObservableSpec::Symbol { index: 0 }), re: 0.5, im: 0.0 },
        ),
    ];
    let grid = default_equivalence_grid();
    let mut ok = grid.len() == 8;
    let mut details = Vec::new();
    for (name, spec, obs) in cases {
        let s = make_system(&spec).unwrap();
        let f = observable(obs, &spec);
        // half independent pairs, half pairs drawn from small balls
        let mut pairs = seeded_pairs(&s, 100, 7);
        for i in 0..100u64 {
            let c = s.sample_mu(1000 + i);
            let delta = 2f64.powi(-((i % 10) as i32 + 1));
            let y = sample_ball(&s, &c, delta, 1, 5000 + i).unwrap().remove(0);
            pairs.push((c, y));
        }
        let rep = equivalence_check(&s, &f, &pairs, &grid, &sc).unwrap();
        ok &= rep.pairs == 200 && rep.violations.is_empty();
        details.push(format!("{name}: {} violations, {} non-vacuous", rep.violations.len(), rep.nonvacuous));
    }
    report(2, "metric-equivalence implications", ok, format!("200 pairs x 8 eps; {}", details.join("; ")));
}

#[test]
fn criterion_3_pseudometric_axioms() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let sc = sched(&[256.0, 512.0, 1024.0]);
    let rot_spec = SystemSpec::TorusRotation { alpha: vec![golden_alpha()], flow: false };
    let rot = rotation();
    let chi = observable(ObservableSpec::Character { k: vec![1] }, &rot_spec);
    let spec = bernoulli_spec();
    let bern = make_system(&spec).unwrap();
    let sym = observable(ObservableSpec::Symbol { index: 0 }, &spec);
    type Est<'a> = Box<dyn Fn(&Point, &Point) -> Vec<f64> + 'a>;
    let sc = &sc;
    let per_window =
        |v: meanlab_core::pseudometrics::MetricEstimate| v.per_window.iter().map(|p| p.1).collect::<Vec<f64>>();
    let cases: Vec<(&str, &SystemHandle, Est)> = vec![
        ("df_L2 rotation", &rot, {
            let (s, f) = (rot.clone(), chi.clone());
            Box::new(move |x, y| per_window(f_pseudometric(MetricKind::DfL2, &s, &f, x, y, sc).unwrap()))
        }),
        ("df_L1 rotation", &rot, {
            let (s, f) = (rot.clone(), chi.clone());
            Box::new(move |x, y| per_window(f_pseudometric(MetricKind::DfL1, &s, &f, x, y, sc).unwrap()))
        }),
        ("d_b rotation", &rot, {
            let s = rot.clone();
            Box::new(move |x, y| per_window(orbit_pseudometric(MetricKind::Db, &s, x, y, sc).unwrap()))
        }),
        ("df_L2 bernoulli", &bern, {
            let (s, f) = (bern.clone(), sym.clone());
            Box::new(move |x, y| per_window(f_pseudometric(MetricKind::DfL2, &s, &f, x, y, sc).unwrap()))
        }),
        ("df_L1 bernoulli", &bern, {
            let (s, f) = (bern.clone(), sym.clone());
            Box::new(move |x, y| per_window(f_pseudometric(MetricKind::DfL1, &s, &f, x, y, sc).unwrap()))
        }),
        ("d_b bernoulli", &bern, {
            let s = bern.clone();
            Box::new(move |x, y| per_window(orbit_pseudometric(MetricKind::Db, &s, x, y, sc).unwrap()))
        }),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, s, est) in &cases {
        let (mut asym, mut tri) = (0usize, 0usize);
        for i in 0..1000u64 {
            let (x, y, z) = (s.sample_mu(3 * i), s.sample_mu(3 * i + 1), s.sample_mu(3 * i + 2));
            let xy = est(&x, &y);
            let yx = est(&y, &x);
            let yz = est(&y, &z);
            let xz = est(&x, &z);
            asym += (xy != yx) as usize;
            // floating-point slack only
            tri += (0..xy.len()).filter(|&k| xz[k] > xy[k] + yz[k] + 1e-12).count();
        }
        ok &= asym == 0 && tri == 0;
        details.push(format!("{name}: {asym} asymmetric, {tri} triangle failures"));
    }
    report(3, "pseudometric axioms", ok, format!("1000 triples each; {}", details.join("; ")));
}

#[test]
fn criterion_4_spectrum() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let big = sched(&[25000.0, 50000.0, 100000.0]);
    let grid = FrequencyGrid::unit(1, meanlab_core::spectral::DEFAULT_GRID_STEP);
    let t = Instant::now();
    let rot_spec = SystemSpec::TorusRotation { alpha: vec![golden_alpha()], flow: false };
    let rot = rotation();
    let chi = observable(ObservableSpec::Character { k: vec![1] }, &rot_spec);
    let scan = spectrum_scan(&rot, &chi, &rot.sample_mu(11), &grid, &big, ScanOptions::default()).unwrap();
    let score = discrete_spectrum_score(&scan).unwrap();
    let spec = bernoulli_spec();
    let bern = make_system(&spec).unwrap();
    let centered = observable(ObservableSpec::CenteredSymbol { index: 0, mean: 0.5 }, &spec);
    let bscan = spectrum_scan(&bern, &centered, &bern.sample_mu(12), &grid, &big, ScanOptions::default()).unwrap();
    let bscore = discrete_spectrum_score(&bscan).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let one = scan.peaks.len() == 1;
    let (err, mag) =
        scan.peaks.first().map_or((f64::INFINITY, 0.0), |p| ((p.freq[0] - golden_alpha()).abs(), p.magnitude));
    let ok = one && err <= 1e-4 && mag >= 0.98 && score >= 0.95 && bscore <= 0.05 && secs < 30.0;
    report(
        4,
        "spectrum",
        ok,
        format!(
            "rotation: {} peak(s), |w - alpha| = {err:.2e}, magnitude {mag:.4}, score {score:.4}; bernoulli centered score {bscore:.4}; {secs:.1}s",
            scan.peaks.len()
        ),
    );
}

#[test]
fn criterion_5_consistency_matrix() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let cfg = DichotomyConfig::default();
    let mut ok = true;
    let mut details = Vec::new();
    for name in ["torus_rotation", "product_rotation", "sturmian", "fibonacci_substitution", "bernoulli_shift"] {
        let fx = fixture(name).unwrap();
        let s = make_system(&fx.system).unwrap();
        let fs: Vec<Observable> = fx.observables.iter().map(|o| make_observable(o, &fx.system).unwrap()).collect();
        let t = Instant::now();
        let rep = dichotomy_report(&s, &fs, &cfg).unwrap();
        let agrees = rep.agrees_with_known_class(0.3, 0.95);
        let good = fs.len() >= 3 && rep.double_positives() == 0 && rep.violations.is_empty() && agrees == Some(true);
        ok &= good;
        details.push(format!(
            "{name}: {} observables, {} double-positive, {} violations, agrees={agrees:?}, {:.0}s",
            fs.len(),
            rep.double_positives(),
            rep.violations.len(),
            t.elapsed().as_secs_f64()
        ));
        for v in &rep.violations {
            println!("  violation on {name}: {v}");
        }
    }
    report(5, "dichotomy consistency matrix", ok, details.join("; "));
}

#[test]
fn criterion_6_expansivity_uniformity() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let bern = make_system(&bernoulli_spec()).unwrap();
    let sampler = SamplerParams::default();
    let delta = sampler.delta_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let prof = center_profiles(&bern, None, delta, &sampler, &DichotomyConfig::default().sched).unwrap();
    let means: Vec<f64> = prof.iter().map(|p| p.mean).collect();
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = (hi - lo) / avg;
    let ok = prof.len() == 32 && spread <= 0.1;
    report(
        6,
        "expansivity uniformity",
        ok,
        format!(
            "{} centers at delta {delta}: mean in-ball d_b in [{lo:.4}, {hi:.4}], relative spread {spread:.4}",
            prof.len()
        ),
    );
}

#[test]
fn criterion_7_delone_classification() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let cases: Vec<(&str, Construction, f64, DeloneClass)> = vec![
        ("Z", Construction::Lattice { basis: vec![vec![1.0]] }, 10000.0, DeloneClass::Crystalline),
        ("Z^2", Construction::Lattice { basis: vec![vec![1.0, 0.0], vec![0.0, 1.0]] }, 100.0, DeloneClass::Crystalline),
        ("fibonacci", Construction::CutProject { beta: 0.0 }, 13820.0, DeloneClass::Quasicrystalline),
        ("poisson", Construction::Poisson { intensity: 1.0, dim: 1, seed: 3 }, 10000.0, DeloneClass::Neither),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, c, side, want) in cases {
        let t = Instant::now();
        let set = build_delone(&c, &Region { side }).unwrap();
        let r = classify_delone(&set, &DeloneClassifyConfig::for_patch(set.dim, side)).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let pf = r.diffraction.point_fraction;
        let mut good = r.class == want && secs <= 60.0 && set.len() >= 10_000;
        match want {
            DeloneClass::Quasicrystalline => good &= pf >= 0.9 && r.diffraction.max_drift() <= 1e-3,
            DeloneClass::Neither => good &= pf <= 0.1,
            DeloneClass::Crystalline => {}
        }
        ok &= good;
        details.push(format!(
            "{name}: {} points, {:?}, point_fraction {pf:.4}, drift {:.1e}, {secs:.1}s",
            set.len(),
            r.class,
            r.diffraction.max_drift()
        ));
    }
    let _ = golden_ratio();
    report(7, "Delone classification", ok, details.join("; "));
}

fn strip_timing(mut v: serde_json::Value) -> serde_json::Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn criterion_8_determinism() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let configs = [
        ("pseudometric", include_str!("../../../configs/rotation_pseudometric.toml").to_string()),
        ("spectrum", include_str!("../../../configs/rotation_spectrum.toml").to_string()),
        (
            "classify",
            "kind = \"classify\"\nseed = 4\nfixture = \"sturmian\"\n[schedule]\nsizes = [256.0, 512.0]\nburn_in = 1\n[sampler]\nn_centers = 6\nn_per_ball = 4\n".to_string(),
        ),
        (
            "dichotomy",
            "kind = \"dichotomy\"\nseed = 9\nfixture = \"bernoulli_shift\"\n[schedule]\nsizes = [256.0, 512.0]\nburn_in = 1\n[sampler]\nn_centers = 6\nn_per_ball = 4\n".to_string(),
        ),
        (
            "delone",
            "kind = \"delone\"\nseed = 5\n[delone]\nconstruction = { kind = \"cut_project\" }\nregion = { side = 1500.0 }\n".to_string(),
        ),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, text) in configs {
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let a = run(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run(&cfg)).unwrap();
        let same = strip_timing(a.report.clone()) == strip_timing(b.report.clone()) && a.csv == b.csv;
        let bytes = |v: &serde_json::Value| serde_json::to_string(&strip_timing(v.clone())).unwrap();
        let same = same && bytes(&a.report) == bytes(&b.report);
        ok &= same;
        details.push(format!("{name}: {}", if same { "identical" } else { "differs" }));
    }
    let _ = Complex64::new(0.0, 0.0);
    report(8, "determinism", ok, format!("two runs each, 1 and 3 threads; {}", details.join("; ")));
}
