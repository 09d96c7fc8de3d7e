//! Executes an experiment config and assembles its report and CSV tables.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use meanlab_core::classify::{self, default_eps_grid, dichotomy_report, DichotomyConfig, SamplerParams, Verdict};
use meanlab_core::delone::{build_delone, classify_delone, DeloneClassifyConfig, DiffractionSpectrum};
use meanlab_core::pseudometrics::{default_equivalence_grid, equivalence_check, f_pseudometric, orbit_pseudometric};
use meanlab_core::spectral::{discrete_spectrum_score, fourier_mode, spectrum_scan, FrequencyGrid, ScanOptions};
use meanlab_core::{
    make_observable, make_system, Complex64, GroupKind, Observable, Point, Schedule, SystemHandle, SystemSpec,
};

use crate::config::{kind_name, ClassifyTest, ExperimentConfig, Kind};
use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;
/// Peaks whose per-window traces go to `traces.csv`.
const TRACED_PEAKS: usize = 8;

/// A finished run: the report and the CSV tables to write next to it.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Value,
    pub csv: Vec<(String, String)>,
}

struct Ctx {
    cfg: ExperimentConfig,
    rng: ChaCha8Rng,
    csv: Vec<(String, String)>,
}

impl Ctx {
    fn seed(&mut self) -> u64 {
        self.rng.gen()
    }
}

fn core(e: meanlab_core::Error) -> CliError {
    match e {
        meanlab_core::Error::InvalidArgument(m) => CliError::Config(m),
        other => CliError::Internal(other.to_string()),
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

/// Runs `cfg`. The report's `timing` block is the only part that varies
/// between runs with the same config.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut ctx = Ctx { cfg: cfg.clone(), rng: ChaCha8Rng::seed_from_u64(cfg.seed), csv: Vec::new() };
    let (system, results, sched) = match cfg.kind {
        Kind::Delone => run_delone(&mut ctx)?,
        kind => {
            let spec = cfg.system_spec().ok_or_else(|| CliError::Config("no system given".into()))?;
            let s = make_system(&spec).map_err(core)?;
            let fs: Vec<Observable> =
                cfg.observables().iter().map(|o| make_observable(o, &spec).map_err(core)).collect::<Result<_, _>>()?;
            let sched = cfg.schedule.clone().unwrap_or_else(|| default_schedule(kind, &spec, &s));
            let results = match kind {
                Kind::Pseudometric => run_pseudometric(&mut ctx, &s, &fs, &sched)?,
                Kind::Spectrum => run_spectrum(&mut ctx, &s, &fs, &sched)?,
                Kind::Classify => run_classify(&mut ctx, &s, &fs, &sched)?,
                Kind::Dichotomy => run_dichotomy(&mut ctx, &s, &fs, &sched)?,
                Kind::Delone => unreachable!(),
            };
            (json!({ "tag": s.tag, "known_class": s.known_class }), results, sched)
        }
    };
    let report = json!({
        "format_version": FORMAT_VERSION,
        "kind": kind_name(cfg.kind),
        "config": to_json(cfg),
        "system": system,
        "windows": to_json(&sched),
        "results": results,
        "timing": {
            "wall_seconds": start.elapsed().as_secs_f64(),
            "threads": rayon::current_num_threads(),
        },
    });
    Ok(RunOutput { report, csv: ctx.csv })
}

/// Window schedule used when the config gives none.
pub fn default_schedule(kind: Kind, spec: &SystemSpec, s: &SystemHandle) -> Schedule {
    if let SystemSpec::DeloneHull { construction, region, .. } = spec {
        return DeloneClassifyConfig::for_patch(construction.dim(), region.side).sched;
    }
    let continuous = s.group_kind() == GroupKind::Continuous;
    let sizes: Vec<f64> = match (kind, continuous) {
        (Kind::Pseudometric | Kind::Spectrum, false) => vec![25000.0, 50000.0, 100000.0],
        (Kind::Pseudometric | Kind::Spectrum, true) => vec![2500.0, 5000.0, 10000.0],
        (_, false) => return DichotomyConfig::default().sched,
        (_, true) => vec![128.0, 256.0, 512.0],
    };
    let d = s.group_dim() as f64;
    let n = sizes.iter().map(|v| v.powf(1.0 / d).ceil()).collect();
    Schedule::new(n, 1).expect("valid default schedule")
}

fn run_pseudometric(ctx: &mut Ctx, s: &SystemHandle, fs: &[Observable], sched: &Schedule) -> Result<Value, CliError> {
    let settings = ctx.cfg.pseudometric.clone().unwrap_or_default();
    let pairs: Vec<(Point, Point)> = (0..settings.pairs)
        .map(|_| {
            let (a, b) = (ctx.seed(), ctx.seed());
            (s.sample_mu(a), s.sample_mu(b))
        })
        .collect();
    let mut traces = String::from("metric,observable,pair,window,value\n");
    let mut out = Vec::new();
    for &kind in &settings.metrics {
        let targets: Vec<Option<&Observable>> =
            if kind.uses_observable() { fs.iter().map(Some).collect() } else { vec![None] };
        if targets.is_empty() {
            return Err(CliError::Config(format!("metric {kind:?} needs at least one observable")));
        }
        for f in targets {
            let mut values = Vec::with_capacity(pairs.len());
            let mut converged = 0usize;
            for (i, (x, y)) in pairs.iter().enumerate() {
                let est = match f {
                    Some(f) => f_pseudometric(kind, s, f, x, y, sched),
                    None => orbit_pseudometric(kind, s, x, y, sched),
                }
                .map_err(core)?;
                let name = f.map_or("", |f| f.tag.as_str());
                for (n, v) in &est.per_window {
                    let _ =
                        writeln!(traces, "{},{},{i},{n},{v}", to_json(&kind).as_str().unwrap_or(""), csv_field(name));
                }
                converged += est.converged as usize;
                values.push(est.value);
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
            out.push(json!({
                "metric": kind,
                "observable": f.map(|f| f.tag.clone()),
                "values": values,
                "mean": mean,
                "std": var.sqrt(),
                "converged_pairs": converged,
            }));
        }
    }
    ctx.csv.push(("traces.csv".into(), traces));
    let mut equivalence = Vec::new();
    if settings.equivalence {
        for f in fs {
            let g = if f.sup_bound > 0.5 { f.scaled(Complex64::new(0.5 / f.sup_bound, 0.0)) } else { f.clone() };
            let rep = equivalence_check(s, &g, &pairs, &default_equivalence_grid(), sched).map_err(core)?;
            equivalence.push(json!({ "observable": g.tag, "report": rep }));
        }
    }
    Ok(json!({ "pairs": pairs.len(), "estimates": out, "equivalence": equivalence }))
}

fn frequency_grid(ctx: &Ctx, s: &SystemHandle) -> FrequencyGrid {
    ctx.cfg
        .frequency_grid
        .clone()
        .unwrap_or_else(|| FrequencyGrid::unit(s.group_dim(), meanlab_core::spectral::DEFAULT_GRID_STEP))
}

fn run_spectrum(ctx: &mut Ctx, s: &SystemHandle, fs: &[Observable], sched: &Schedule) -> Result<Value, CliError> {
    let x = s.sample_mu(ctx.seed());
    let grid = frequency_grid(ctx, s);
    let dim = s.group_dim();
    let freq_cols: Vec<String> = (0..dim).map(|c| format!("w{c}")).collect();
    let mut spectra = format!("observable,{},re,im,magnitude\n", freq_cols.join(","));
    let mut traces = format!("observable,{},window,re,im\n", freq_cols.join(","));
    let mut out = Vec::new();
    for f in fs {
        let scan = spectrum_scan(s, f, &x, &grid, sched, ScanOptions::default()).map_err(core)?;
        let (score, note) = match discrete_spectrum_score(&scan) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        for p in &scan.peaks {
            let _ = writeln!(
                spectra,
                "{},{},{},{},{}",
                csv_field(&f.tag),
                join(&p.freq),
                p.amplitude.re,
                p.amplitude.im,
                p.magnitude
            );
        }
        for p in scan.peaks.iter().take(TRACED_PEAKS) {
            let t = fourier_mode(s, f, &x, &p.freq, sched).map_err(core)?;
            for (n, v) in &t.per_window {
                let _ = writeln!(traces, "{},{},{n},{},{}", csv_field(&f.tag), join(&p.freq), v.re, v.im);
            }
        }
        out.push(json!({
            "observable": f.tag,
            "peaks": scan.peaks,
            "f_energy": scan.f_energy,
            "floor": scan.floor,
            "discrete_spectrum_score": score,
            "note": note,
        }));
    }
    ctx.csv.push(("spectra.csv".into(), spectra));
    ctx.csv.push(("traces.csv".into(), traces));
    Ok(json!({ "point": x.describe(), "grid": grid, "observables": out }))
}

fn sampler(ctx: &Ctx, base: SamplerParams) -> SamplerParams {
    ctx.cfg.sampler_params(base)
}

fn run_classify(ctx: &mut Ctx, s: &SystemHandle, fs: &[Observable], sched: &Schedule) -> Result<Value, CliError> {
    let p = sampler(ctx, SamplerParams::default());
    let eps = ctx.cfg.eps_grid.clone().unwrap_or_else(default_eps_grid);
    let tau = ctx.cfg.tau.unwrap_or(0.05);
    let tests = ctx.cfg.classify.clone().unwrap_or_default().tests;
    let targets: Vec<Option<&Observable>> = std::iter::once(None).chain(fs.iter().map(Some)).collect();
    let mut out: Vec<Verdict> = Vec::new();
    for f in targets {
        for t in &tests {
            let v = match t {
                ClassifyTest::MeanSensitivity => classify::mean_sensitivity_test(s, f, &p, sched),
                ClassifyTest::MeanEquicontinuity => classify::mean_equicontinuity_test(s, f, &eps, &p, sched),
                ClassifyTest::MuMeanEquicontinuity => classify::mu_mean_equicontinuity_test(s, f, tau, &eps, &p, sched),
                ClassifyTest::PlainEquicontinuity if f.is_none() => {
                    classify::plain_equicontinuity_test(s, &eps, &p, sched)
                }
                ClassifyTest::PlainEquicontinuity => continue,
            }
            .map_err(core)?;
            out.push(v);
        }
    }
    let mut table = String::from("test,flavor,observable,label,epsilon\n");
    for v in &out {
        let _ = writeln!(
            table,
            "{},{},{},{},{}",
            to_json(&v.evidence.statistic).to_string().replace(',', ";").replace('"', ""),
            to_json(&v.flavor).as_str().unwrap_or(""),
            csv_field(v.observable.as_deref().unwrap_or("")),
            to_json(&v.label).as_str().unwrap_or(""),
            v.epsilon.map(|e| e.to_string()).unwrap_or_default()
        );
    }
    ctx.csv.push(("verdicts.csv".into(), table));
    Ok(json!({ "verdicts": out }))
}

fn run_dichotomy(ctx: &mut Ctx, s: &SystemHandle, fs: &[Observable], sched: &Schedule) -> Result<Value, CliError> {
    let mut cfg = DichotomyConfig { sched: sched.clone(), ..DichotomyConfig::default() };
    cfg.sampler = sampler(ctx, cfg.sampler);
    if let Some(e) = &ctx.cfg.eps_grid {
        cfg.eps_grid = e.clone();
    }
    if let Some(t) = ctx.cfg.tau {
        cfg.tau = t;
    }
    if let Some(g) = &ctx.cfg.frequency_grid {
        cfg.frequency_grid = Some(g.clone());
    }
    let rep = dichotomy_report(s, fs, &cfg).map_err(core)?;
    let mut matrix = String::from("law,subject,holds\n");
    for c in &rep.implications {
        let _ = writeln!(matrix, "{},{},{}", csv_field(&c.law), csv_field(&c.subject), c.holds);
    }
    ctx.csv.push(("implications.csv".into(), matrix));
    let mut balls = String::from("flavor,observable,delta,min_ball_max,median_ball_max\n");
    for fr in rep.flavors() {
        for b in &fr.sensitivity.evidence.balls {
            let obs = fr.sensitivity.observable.as_deref().unwrap_or("");
            let _ = writeln!(
                balls,
                "{},{},{},{},{}",
                to_json(&fr.flavor).as_str().unwrap_or(""),
                csv_field(obs),
                b.delta,
                b.min_ball_max,
                b.median_ball_max
            );
        }
    }
    ctx.csv.push(("traces.csv".into(), balls));
    let matrix: Vec<Value> =
        rep.implications.iter().map(|c| json!({ "law": c.law, "subject": c.subject, "holds": c.holds })).collect();
    Ok(json!({
        "double_positives": rep.double_positives(),
        "violations": rep.violations.len(),
        "agrees_with_known_class": rep.agrees_with_known_class(0.3, cfg.expansive_fraction),
        "implication_matrix": matrix,
        "report": rep,
    }))
}

fn diffraction_summary(d: &DiffractionSpectrum) -> Value {
    json!({
        "point_fraction": d.point_fraction,
        "total_intensity": d.total_intensity,
        "window_sizes": d.window_sizes,
        "peaks": d.peaks,
        "rejected_candidates": d.rejected,
        "max_drift": d.max_drift(),
        "grid_points": d.freqs.len(),
    })
}

fn run_delone(ctx: &mut Ctx) -> Result<(Value, Value, Schedule), CliError> {
    let (construction, region, patch_radius) = match ctx.cfg.system_spec() {
        Some(SystemSpec::DeloneHull { construction, region, patch_radius }) => (construction, region, patch_radius),
        _ => return Err(CliError::Config("kind = \"delone\" needs a Delone patch".into())),
    };
    let set = build_delone(&construction, &region).map_err(core)?;
    let mut cfg = DeloneClassifyConfig::for_patch(set.dim, region.side);
    cfg.patch_radius = patch_radius;
    cfg.sampler = sampler(ctx, cfg.sampler);
    if let Some(s) = &ctx.cfg.schedule {
        cfg.sched = s.clone();
    }
    if let Some(e) = &ctx.cfg.eps_grid {
        cfg.eps_grid = e.clone();
    }
    if let Some(t) = ctx.cfg.tau {
        cfg.tau = t;
    }
    if let Some(d) = &ctx.cfg.delone {
        if let Some(p) = &d.diffraction {
            cfg.diffraction = p.clone();
        }
        if let Some(t) = d.point_fraction_threshold {
            cfg.point_fraction_threshold = t;
        }
    }
    let c = classify_delone(&set, &cfg).map_err(core)?;
    ctx.csv.push(("diffraction.csv".into(), c.diffraction.to_csv()));
    let system = json!({
        "tag": format!("delone_hull({}, side={}, patch_radius={})", construction.describe(), region.side, cfg.patch_radius),
        "points": set.len(),
        "r": set.r,
        "big_r": set.big_r,
    });
    let results = json!({
        "class": c.class,
        "check": c.check,
        "periods": c.periods,
        "period_rank": c.period_rank,
        "plain": c.plain,
        "mu_mean": c.mu_mean,
        "diffraction": diffraction_summary(&c.diffraction),
        "settings": cfg,
    });
    Ok((system, results, cfg.sched))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
