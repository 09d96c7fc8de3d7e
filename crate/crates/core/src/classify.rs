//! Sampled-ball classifiers for mean sensitivity, mean equicontinuity and
//! mean expansivity in the topological, observable-relative and
//! measure-relative flavors, plus a consolidated consistency report.
//!
//! Open sets and sets of positive measure are represented by `delta`-balls
//! around `mu`-sampled centers; the pseudometric is estimated between each
//! center and points sampled inside its ball.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pseudometrics::{differences, estimate_value, MetricKind};
use crate::rng;
use crate::spectral::{self, ApReport, FrequencyGrid, ScanOptions};
use crate::systems::{
    check_layout, dist_series_on_layout, sample_ball, series_on_layout, KnownClass, Observable, Point, SystemHandle,
};
use crate::windows::{Schedule, WindowLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Topological,
    FRelative,
    MuRelative,
    MuFRelative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    MeanEquicontinuous,
    MeanSensitive,
    Inconclusive,
}

/// What is measured between a center and a ball-mate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// A Besicovitch-type pseudometric estimate.
    Metric(MetricKind),
    /// `sup_j d(T^j x, T^j y)` over the largest window.
    SupDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    pub n_centers: usize,
    pub n_per_ball: usize,
    pub delta_list: Vec<f64>,
    pub seed: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self { n_centers: 32, n_per_ball: 16, delta_list: (2..=10).map(|k| 2f64.powi(-k)).collect(), seed: 0 }
    }
}

impl SamplerParams {
    fn validate(&self) -> Result<()> {
        if self.n_centers == 0 || self.n_per_ball == 0 {
            return invalid("sampler needs at least one center and one point per ball");
        }
        if self.delta_list.is_empty() || self.delta_list.iter().any(|d| !(*d > 0.0)) {
            return invalid("delta list must be non-empty and positive");
        }
        Ok(())
    }
}

/// `{2^-8, 2^-7, ..., 1}`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..=8).rev().map(|k| 2f64.powi(-k)).collect()
}

/// Candidate sensitivity constants: `2^{-8} ... 1` with ratio `2^{1/4}`.
fn sensitivity_grid() -> Vec<f64> {
    (0..=32).map(|i| 2f64.powf(-8.0 + i as f64 / 4.0)).collect()
}

/// Exponents `e` (radius `2^-e`) searched for the `delta` of an
/// `(eps, delta)` pair: roughly geometric with ratio 1.25, up to 1000.
pub fn delta_search_exponents() -> Vec<u32> {
    let mut out: Vec<u32> = Vec::new();
    let mut x = 1.0f64;
    while x <= 1000.0 {
        let e = x.round() as u32;
        if out.last() != Some(&e) {
            out.push(e);
        }
        x *= 1.25;
    }
    if out.last() != Some(&1000) {
        out.push(1000);
    }
    out
}

/// Share of the ball-max median that may remain at the smallest radius for
/// the estimates to count as shrinking with the radius.
const DECAY_RATIO: f64 = 0.5;
/// The reported sensitivity constant stays this far below the weakest ball.
const SENSITIVITY_MARGIN: f64 = 0.9;
/// A sensitivity constant is dropped when balls of radius `2^-e`, with
/// `e` up to this share of the shortest tail window, all stay within it.
const REFUTE_SHARE: f64 = 16.0;
/// Witness pairs kept per verdict.
const MAX_WITNESSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessPair {
    pub center: usize,
    pub center_point: String,
    pub other_point: String,
    pub delta: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsDelta {
    pub epsilon: f64,
    /// Largest searched radius with every sampled estimate `<= epsilon`.
    pub delta: Option<f64>,
    /// Largest estimate at that radius (or at the smallest radius tried).
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSummary {
    pub delta: f64,
    pub min_ball_max: f64,
    pub median_ball_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub statistic: Statistic,
    pub witnesses: Vec<WitnessPair>,
    pub table: Vec<EpsDelta>,
    pub balls: Vec<BallSummary>,
    /// Centers dropped by the measure-relative surrogate.
    pub discarded_centers: Vec<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    pub flavor: Flavor,
    pub epsilon: Option<f64>,
    pub observable: Option<String>,
    pub evidence: Evidence,
    pub params: SamplerParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansivityReport {
    pub epsilon: f64,
    pub fraction: f64,
    pub n_pairs: usize,
}

fn metric_for(f: Option<&Observable>) -> MetricKind {
    if f.is_some() {
        MetricKind::RhoF
    } else {
        MetricKind::Db
    }
}

struct BallSet {
    points: Vec<Vec<Point>>,
    /// `est[k][i][j]`: statistic `k` between center `i` and its `j`-th mate.
    est: Vec<Vec<Vec<f64>>>,
}

impl BallSet {
    fn ball_max(&self, k: usize) -> Vec<f64> {
        self.est[k].iter().map(|e| e.iter().cloned().fold(0.0, f64::max)).collect()
    }
}

type BallCache = Arc<Mutex<BTreeMap<u64, Arc<BallSet>>>>;

/// Lazily sampled `delta`-balls around a fixed set of centers, with the
/// statistics between each center and each of its ball-mates. Views made
/// with `with_stat` share the sampled balls.
#[derive(Clone)]
struct Probe<'a> {
    s: &'a SystemHandle,
    f: Option<&'a Observable>,
    stats: Vec<Statistic>,
    sel: usize,
    stat: Statistic,
    layout: WindowLayout,
    centers: Vec<Point>,
    params: SamplerParams,
    cache: BallCache,
}

impl<'a> Probe<'a> {
    fn new(
        s: &'a SystemHandle,
        f: Option<&'a Observable>,
        stat: Statistic,
        sched: &Schedule,
        params: &SamplerParams,
    ) -> Result<Self> {
        Self::joint(s, f, &[stat], sched, params)
    }

    fn joint(
        s: &'a SystemHandle,
        f: Option<&'a Observable>,
        stats: &[Statistic],
        sched: &Schedule,
        params: &SamplerParams,
    ) -> Result<Self> {
        params.validate()?;
        let layout = WindowLayout::new(sched, s.group_kind(), s.group_dim())?;
        check_layout(s, &layout)?;
        if let Some(f) = f {
            s.check_observable(f)?;
        }
        let centers = (0..params.n_centers).map(|i| s.sample_mu(rng::derive(params.seed, &[0xCE, i as u64]))).collect();
        Ok(Self {
            s,
            f,
            stats: stats.to_vec(),
            sel: 0,
            stat: stats[0],
            layout,
            centers,
            params: params.clone(),
            cache: Arc::new(Mutex::new(BTreeMap::new())),
        })
    }

    /// The same probe reporting statistic `stat`, which must be one of
    /// the statistics it was built with.
    fn with_stat(&self, stat: Statistic) -> Self {
        let sel = self.stats.iter().position(|s| *s == stat).expect("statistic computed by the probe");
        Self { sel, stat, ..self.clone() }
    }

    fn pair(&self, x: &Point, y: &Point) -> Vec<f64> {
        let on_f = |kind: MetricKind| kind.uses_observable() && self.f.is_some();
        let need_dist = self.stats.iter().any(|st| !matches!(st, Statistic::Metric(k) if on_f(*k)));
        let dist = if need_dist { dist_series_on_layout(self.s.system(), x, y, &self.layout) } else { Vec::new() };
        self.stats
            .iter()
            .map(|stat| match *stat {
                Statistic::Metric(kind) if on_f(kind) => {
                    let d = differences(kind, self.s, self.f, x, y, &self.layout);
                    estimate_value(kind, &self.layout, &d)
                }
                Statistic::Metric(kind) => estimate_value(kind, &self.layout, &dist),
                Statistic::SupDistance => dist.iter().cloned().fold(0.0, f64::max),
            })
            .collect()
    }

    fn ball(&self, delta: f64) -> Result<Arc<BallSet>> {
        let key = delta.to_bits();
        if let Some(b) = self.cache.lock().unwrap().get(&key) {
            return Ok(b.clone());
        }
        let points: Vec<Vec<Point>> = self
            .centers
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let seed = rng::derive(self.params.seed, &[0xBA, i as u64, key]);
                sample_ball(self.s, c, delta, self.params.n_per_ball, seed)
            })
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, usize)> =
            (0..points.len()).flat_map(|i| (0..points[i].len()).map(move |j| (i, j))).collect();
        let flat: Vec<Vec<f64>> = jobs.par_iter().map(|&(i, j)| self.pair(&self.centers[i], &points[i][j])).collect();
        let mut est = vec![vec![Vec::with_capacity(self.params.n_per_ball); points.len()]; self.stats.len()];
        for (&(i, _), v) in jobs.iter().zip(flat) {
            for (k, e) in v.into_iter().enumerate() {
                est[k][i].push(e);
            }
        }
        let b = Arc::new(BallSet { points, est });
        self.cache.lock().unwrap().insert(key, b.clone());
        Ok(b)
    }

    fn summary(&self, delta: f64) -> Result<BallSummary> {
        let m = self.ball(delta)?.ball_max(self.sel);
        Ok(BallSummary {
            delta,
            min_ball_max: m.iter().cloned().fold(f64::INFINITY, f64::min),
            median_ball_max: median(&m),
        })
    }

    fn witnesses(&self, delta: f64, above: f64) -> Result<Vec<WitnessPair>> {
        let b = self.ball(delta)?;
        let mut out = Vec::new();
        for (i, est) in b.est[self.sel].iter().enumerate() {
            if let Some((j, &e)) = est.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
                if e > above {
                    out.push(WitnessPair {
                        center: i,
                        center_point: self.centers[i].describe(),
                        other_point: b.points[i][j].describe(),
                        delta,
                        estimate: e,
                    });
                }
            }
            if out.len() >= MAX_WITNESSES {
                break;
            }
        }
        Ok(out)
    }

    fn evidence(&self) -> Evidence {
        Evidence {
            statistic: self.stat,
            witnesses: Vec::new(),
            table: Vec::new(),
            balls: Vec::new(),
            discarded_centers: Vec::new(),
            note: None,
        }
    }

    /// Largest estimate over the given centers in the ball of radius `2^-e`.
    fn worst(&self, e: u32, centers: &[usize]) -> Result<f64> {
        let m = self.ball(2f64.powi(-(e as i32)))?.ball_max(self.sel);
        Ok(centers.iter().map(|&i| m[i]).fold(0.0, f64::max))
    }

    /// For each `eps`, the largest searched radius at which every sampled
    /// estimate around the given centers is `<= eps`.
    fn eps_delta_table(&self, eps_grid: &[f64], centers: &[usize]) -> Result<Vec<EpsDelta>> {
        let exps = delta_search_exponents();
        let mut table = Vec::with_capacity(eps_grid.len());
        for &eps in eps_grid {
            let last = exps.len() - 1;
            let w_last = self.worst(exps[last], centers)?;
            if w_last > eps {
                table.push(EpsDelta { epsilon: eps, delta: None, worst: w_last });
                continue;
            }
            let (mut lo, mut hi) = (0usize, last);
            let mut w_hi = w_last;
            let w0 = self.worst(exps[0], centers)?;
            if w0 <= eps {
                hi = 0;
                w_hi = w0;
            } else {
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    let w = self.worst(exps[mid], centers)?;
                    if w <= eps {
                        hi = mid;
                        w_hi = w;
                    } else {
                        lo = mid;
                    }
                }
            }
            table.push(EpsDelta { epsilon: eps, delta: Some(2f64.powi(-(exps[hi] as i32))), worst: w_hi });
        }
        Ok(table)
    }

    /// Sensitivity constant, if every sampled ball on the delta list holds a
    /// pair above it and the estimates do not shrink with the radius.
    fn sensitivity(&self) -> Result<(Option<f64>, Vec<BallSummary>, Option<String>)> {
        let mut deltas = self.params.delta_list.clone();
        deltas.sort_by(|a, b| b.total_cmp(a));
        let balls: Vec<BallSummary> = deltas.iter().map(|&d| self.summary(d)).collect::<Result<_>>()?;
        let weakest = balls.iter().map(|b| b.min_ball_max).fold(f64::INFINITY, f64::min);
        let (first, last) = (&balls[0], balls.last().unwrap());
        if balls.len() > 1 && last.median_ball_max <= DECAY_RATIO * first.median_ball_max {
            let note = format!(
                "ball estimates shrink with the radius (median {:.4} at delta {} vs {:.4} at delta {})",
                last.median_ball_max, last.delta, first.median_ball_max, first.delta
            );
            return Ok((None, balls, Some(note)));
        }
        let eps = sensitivity_grid().into_iter().rfind(|e| *e < SENSITIVITY_MARGIN * weakest);
        if let Some(e) = eps {
            let r = self.refute_exponent();
            let w = self.worst(r, &self.all_centers())?;
            if w <= e {
                let note = format!("every ball of radius 2^-{r} stays within {e:.4} (largest estimate {w:.4})");
                return Ok((None, balls, Some(note)));
            }
        }
        Ok((eps, balls, None))
    }

    /// Deepest searched exponent whose radius still leaves the shortest tail
    /// window mostly unconstrained (`e <= n / REFUTE_SHARE`).
    fn refute_exponent(&self) -> u32 {
        let n = self.layout.sizes[self.layout.tail().start].max(1.0);
        let cap = (n / REFUTE_SHARE).max(1.0);
        delta_search_exponents().into_iter().rfind(|&e| e as f64 <= cap).unwrap_or(1)
    }

    fn all_centers(&self) -> Vec<usize> {
        (0..self.centers.len()).collect()
    }

    /// Centers kept after dropping the worst `floor(tau N)` by mean ball-max
    /// over the delta list.
    fn survivors(&self, tau: f64) -> Result<(Vec<usize>, Vec<usize>)> {
        let n = self.centers.len();
        let mut profile = vec![0.0; n];
        for &d in &self.params.delta_list {
            for (p, m) in profile.iter_mut().zip(self.ball(d)?.ball_max(self.sel)) {
                *p += m / self.params.delta_list.len() as f64;
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| profile[b].total_cmp(&profile[a]).then(a.cmp(&b)));
        let drop = ((tau * n as f64).floor() as usize).min(n.saturating_sub(1));
        let mut discarded: Vec<usize> = order[..drop].to_vec();
        let mut kept: Vec<usize> = order[drop..].to_vec();
        discarded.sort_unstable();
        kept.sort_unstable();
        Ok((kept, discarded))
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn eq_label(table: &[EpsDelta]) -> Label {
    if table.iter().all(|r| r.delta.is_some()) {
        Label::MeanEquicontinuous
    } else {
        Label::Inconclusive
    }
}

fn validate_grid(eps_grid: &[f64]) -> Result<()> {
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > 0.0)) {
        return invalid("epsilon grid must be non-empty and positive");
    }
    Ok(())
}

fn sensitivity_verdict(probe: &Probe<'_>, flavor: Flavor, eps_grid: &[f64], centers: &[usize]) -> Result<Verdict> {
    let (eps, balls, note) = probe.sensitivity()?;
    let mut evidence = probe.evidence();
    evidence.balls = balls;
    evidence.note = note;
    let label = match eps {
        Some(e) => {
            let smallest = probe.params.delta_list.iter().cloned().fold(f64::INFINITY, f64::min);
            evidence.witnesses = probe.witnesses(smallest, e)?;
            Label::MeanSensitive
        }
        None => {
            evidence.table = probe.eps_delta_table(eps_grid, centers)?;
            eq_label(&evidence.table)
        }
    };
    Ok(Verdict {
        label,
        flavor,
        epsilon: eps,
        observable: probe.f.map(|f| f.tag.clone()),
        evidence,
        params: probe.params.clone(),
    })
}

fn equicontinuity_verdict(probe: &Probe<'_>, flavor: Flavor, eps_grid: &[f64], tau: Option<f64>) -> Result<Verdict> {
    let mut evidence = probe.evidence();
    let centers = match tau {
        Some(t) => {
            let (kept, dropped) = probe.survivors(t)?;
            evidence.discarded_centers = dropped;
            evidence.note =
                Some(format!("compact set of measure >= 1 - {t} realized by the {} retained centers", kept.len()));
            kept
        }
        None => probe.all_centers(),
    };
    evidence.table = probe.eps_delta_table(eps_grid, &centers)?;
    Ok(Verdict {
        label: eq_label(&evidence.table),
        flavor,
        epsilon: None,
        observable: probe.f.map(|f| f.tag.clone()),
        evidence,
        params: probe.params.clone(),
    })
}

/// Mean sensitivity (topological with `d_b` when `f` is `None`, otherwise
/// `f`-relative with `rho_f`). Balls whose estimates shrink with the radius
/// are handed to the equicontinuity search instead.
pub fn mean_sensitivity_test(
    s: &SystemHandle,
    f: Option<&Observable>,
    sampler: &SamplerParams,
    sched: &Schedule,
) -> Result<Verdict> {
    let probe = Probe::new(s, f, Statistic::Metric(metric_for(f)), sched, sampler)?;
    let flavor = if f.is_some() { Flavor::FRelative } else { Flavor::Topological };
    sensitivity_verdict(&probe, flavor, &default_eps_grid(), &probe.all_centers())
}

/// For each `eps`, searches the radius by bisection over
/// [`delta_search_exponents`]; equicontinuous iff every `eps` gets one.
pub fn mean_equicontinuity_test(
    s: &SystemHandle,
    f: Option<&Observable>,
    eps_grid: &[f64],
    sampler: &SamplerParams,
    sched: &Schedule,
) -> Result<Verdict> {
    validate_grid(eps_grid)?;
    let probe = Probe::new(s, f, Statistic::Metric(metric_for(f)), sched, sampler)?;
    let flavor = if f.is_some() { Flavor::FRelative } else { Flavor::Topological };
    equicontinuity_verdict(&probe, flavor, eps_grid, None)
}

/// The measure-relative version: the worst `floor(tau N)` centers are
/// discarded before the `(eps, delta)` search.
pub fn mu_mean_equicontinuity_test(
    s: &SystemHandle,
    f: Option<&Observable>,
    tau: f64,
    eps_grid: &[f64],
    sampler: &SamplerParams,
    sched: &Schedule,
) -> Result<Verdict> {
    if !(tau > 0.0 && tau < 0.5) {
        return invalid(format!("tau must lie in (0, 1/2), got {tau}"));
    }
    validate_grid(eps_grid)?;
    let probe = Probe::new(s, f, Statistic::Metric(metric_for(f)), sched, sampler)?;
    let flavor = if f.is_some() { Flavor::MuFRelative } else { Flavor::MuRelative };
    equicontinuity_verdict(&probe, flavor, eps_grid, Some(tau))
}

/// Equicontinuity of the family `{T^j}` on the largest window: the same
/// `(eps, delta)` search with `sup_j d(T^j x, T^j y)` in place of a mean.
pub fn plain_equicontinuity_test(
    s: &SystemHandle,
    eps_grid: &[f64],
    sampler: &SamplerParams,
    sched: &Schedule,
) -> Result<Verdict> {
    validate_grid(eps_grid)?;
    let probe = Probe::new(s, None, Statistic::SupDistance, sched, sampler)?;
    equicontinuity_verdict(&probe, Flavor::Topological, eps_grid, None)
}

/// In-ball estimates around one sampled center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterProfile {
    pub center: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-center summaries of the estimates (`d_b`, or `rho_f` with `f`) between
/// each sampled center and its `delta`-ball mates.
pub fn center_profiles(
    s: &SystemHandle,
    f: Option<&Observable>,
    delta: f64,
    sampler: &SamplerParams,
    sched: &Schedule,
) -> Result<Vec<CenterProfile>> {
    if !(delta > 0.0) {
        return invalid(format!("ball radius must be positive, got {delta}"));
    }
    let probe = Probe::new(s, f, Statistic::Metric(metric_for(f)), sched, sampler)?;
    let b = probe.ball(delta)?;
    Ok(b.est[0]
        .iter()
        .zip(&probe.centers)
        .map(|(e, c)| CenterProfile {
            center: c.describe(),
            mean: e.iter().sum::<f64>() / e.len() as f64,
            min: e.iter().cloned().fold(f64::INFINITY, f64::min),
            max: e.iter().cloned().fold(0.0, f64::max),
        })
        .collect())
}

/// `plain_equicontinuity_test` and the `d_b` version of
/// `mu_mean_equicontinuity_test` from one set of sampled balls.
pub fn plain_and_mu_equicontinuity_tests(
    s: &SystemHandle,
    tau: f64,
    eps_grid: &[f64],
    sampler: &SamplerParams,
    sched: &Schedule,
) -> Result<(Verdict, Verdict)> {
    if !(tau > 0.0 && tau < 0.5) {
        return invalid(format!("tau must lie in (0, 1/2), got {tau}"));
    }
    validate_grid(eps_grid)?;
    let db = Statistic::Metric(MetricKind::Db);
    let probe = Probe::joint(s, None, &[Statistic::SupDistance, db], sched, sampler)?;
    let plain = equicontinuity_verdict(&probe, Flavor::Topological, eps_grid, None)?;
    let mu = equicontinuity_verdict(&probe.with_stat(db), Flavor::MuRelative, eps_grid, Some(tau))?;
    Ok((plain, mu))
}

/// Fraction of independent `mu x mu` pairs whose estimate exceeds `eps`.
pub fn expansivity_fraction(
    s: &SystemHandle,
    f: Option<&Observable>,
    eps: f64,
    n_pairs: usize,
    sched: &Schedule,
    seed: u64,
) -> Result<ExpansivityReport> {
    if !(eps > 0.0) {
        return invalid(format!("expansivity threshold must be positive, got {eps}"));
    }
    if n_pairs == 0 {
        return invalid("expansivity needs at least one pair");
    }
    let layout = WindowLayout::new(sched, s.group_kind(), s.group_dim())?;
    check_layout(s, &layout)?;
    if let Some(f) = f {
        s.check_observable(f)?;
    }
    let kind = metric_for(f);
    let above = (0..n_pairs)
        .into_par_iter()
        .filter(|&i| {
            let x = s.sample_mu(rng::derive(seed, &[0xE0, i as u64, 1]));
            let y = s.sample_mu(rng::derive(seed, &[0xE0, i as u64, 2]));
            estimate_value(kind, &layout, &differences(kind, s, f, &x, &y, &layout)) > eps
        })
        .count();
    Ok(ExpansivityReport { epsilon: eps, fraction: above as f64 / n_pairs as f64, n_pairs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyConfig {
    pub sampler: SamplerParams,
    pub sched: Schedule,
    pub eps_grid: Vec<f64>,
    pub tau: f64,
    pub n_pairs: usize,
    /// Schedule for spectral scans and the almost-periodicity probe.
    pub spectral_sched: Schedule,
    pub frequency_grid: Option<FrequencyGrid>,
    pub ap_sched: Schedule,
    pub ap_epsilons: Vec<f64>,
    /// Score at or above which the spectrum counts as discrete.
    pub score_threshold: f64,
    /// Fraction of separated pairs required of a sensitive flavor.
    pub expansive_fraction: f64,
}

impl Default for DichotomyConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerParams::default(),
            sched: Schedule::new(vec![1024.0, 2048.0, 4096.0], 1).expect("valid"),
            eps_grid: default_eps_grid(),
            tau: 0.05,
            n_pairs: 128,
            spectral_sched: Schedule::new(vec![25000.0, 50000.0, 100000.0], 1).expect("valid"),
            frequency_grid: None,
            ap_sched: Schedule::new(vec![4096.0, 8192.0], 0).expect("valid"),
            ap_epsilons: spectral::default_ap_grid(),
            score_threshold: 0.9,
            expansive_fraction: 0.95,
        }
    }
}

/// Sensitivity and equicontinuity verdicts for one flavor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlavorResult {
    pub flavor: Flavor,
    pub label: Label,
    pub sensitive: bool,
    pub equicontinuous: bool,
    pub epsilon: Option<f64>,
    pub sensitivity: Verdict,
    pub equicontinuity: Verdict,
    pub expansivity: Option<ExpansivityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableResult {
    pub observable: String,
    pub f_relative: FlavorResult,
    pub mu_f_relative: FlavorResult,
    pub spectral_score: f64,
    pub peaks: usize,
    pub almost_periodicity: ApReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicationCheck {
    pub law: String,
    pub subject: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub system: String,
    pub known_class: KnownClass,
    pub topological: FlavorResult,
    pub mu_relative: FlavorResult,
    pub observables: Vec<ObservableResult>,
    pub mean_spectral_score: f64,
    /// Equicontinuity of `{T^j}` itself (sup over time, not averaged).
    pub plain: Verdict,
    pub implications: Vec<ImplicationCheck>,
    pub violations: Vec<String>,
}

impl DichotomyReport {
    pub fn double_positives(&self) -> usize {
        self.flavors().filter(|r| r.sensitive && r.equicontinuous).count()
    }

    pub fn flavors(&self) -> impl Iterator<Item = &FlavorResult> {
        std::iter::once(&self.topological)
            .chain(std::iter::once(&self.mu_relative))
            .chain(self.observables.iter().flat_map(|o| [&o.f_relative, &o.mu_f_relative]))
    }

    /// Whether the measure-relative verdicts match the fixture label:
    /// discrete spectrum gives equicontinuity, weak mixing gives
    /// sensitivity with `eps >= min_eps` and expansive pairs at that `eps`.
    pub fn agrees_with_known_class(&self, min_eps: f64, min_fraction: f64) -> Option<bool> {
        let mu: Vec<&FlavorResult> =
            std::iter::once(&self.mu_relative).chain(self.observables.iter().map(|o| &o.mu_f_relative)).collect();
        match self.known_class {
            KnownClass::DiscreteSpectrum => Some(mu.iter().all(|r| r.label == Label::MeanEquicontinuous)),
            KnownClass::WeaklyMixing => Some(mu.iter().all(|r| {
                r.label == Label::MeanSensitive
                    && r.epsilon.is_some_and(|e| e >= min_eps)
                    && r.expansivity.as_ref().is_some_and(|x| x.fraction >= min_fraction)
            })),
            KnownClass::Unknown => None,
        }
    }
}

fn flavor_result(
    probe: &Probe<'_>,
    flavor: Flavor,
    cfg: &DichotomyConfig,
    tau: Option<f64>,
    s: &SystemHandle,
    seed: u64,
) -> Result<FlavorResult> {
    let sens = sensitivity_verdict(probe, flavor, &cfg.eps_grid, &probe.all_centers())?;
    let eq = equicontinuity_verdict(probe, flavor, &cfg.eps_grid, tau)?;
    let sensitive = sens.label == Label::MeanSensitive;
    let equicontinuous = eq.label == Label::MeanEquicontinuous;
    let label = match (sensitive, equicontinuous) {
        (true, false) => Label::MeanSensitive,
        (false, true) => Label::MeanEquicontinuous,
        _ => Label::Inconclusive,
    };
    let expansivity = match sens.epsilon {
        Some(e) => Some(expansivity_fraction(s, probe.f, e, cfg.n_pairs, &cfg.sched, seed)?),
        None => None,
    };
    Ok(FlavorResult {
        flavor,
        label,
        sensitive,
        equicontinuous,
        epsilon: sens.epsilon,
        sensitivity: sens,
        equicontinuity: eq,
        expansivity,
    })
}

/// Runs every flavor on `s` and on each observable, together with spectral
/// scores and almost-periodicity probes, and checks the implications that
/// must hold between them.
pub fn dichotomy_report(s: &SystemHandle, f_list: &[Observable], cfg: &DichotomyConfig) -> Result<DichotomyReport> {
    if f_list.is_empty() {
        return invalid("dichotomy report needs at least one observable");
    }
    if !(cfg.tau > 0.0 && cfg.tau < 0.5) {
        return invalid(format!("tau must lie in (0, 1/2), got {}", cfg.tau));
    }
    validate_grid(&cfg.eps_grid)?;
    let seed = cfg.sampler.seed;
    let db = Statistic::Metric(MetricKind::Db);
    let joint = Probe::joint(s, None, &[db, Statistic::SupDistance], &cfg.sched, &cfg.sampler)?;
    let topo_probe = joint.with_stat(db);
    let topological = flavor_result(&topo_probe, Flavor::Topological, cfg, None, s, rng::derive(seed, &[1]))?;
    let mu_relative = flavor_result(&topo_probe, Flavor::MuRelative, cfg, Some(cfg.tau), s, rng::derive(seed, &[1]))?;
    let plain =
        equicontinuity_verdict(&joint.with_stat(Statistic::SupDistance), Flavor::Topological, &cfg.eps_grid, None)?;
    drop((topo_probe, joint));

    let x = s.sample_mu(rng::derive(seed, &[0x5E]));
    let spec_layout = WindowLayout::new(&cfg.spectral_sched, s.group_kind(), s.group_dim())?;
    check_layout(s, &spec_layout)?;
    let ap_layout = WindowLayout::new(&cfg.ap_sched, s.group_kind(), s.group_dim())?;
    let grid =
        cfg.frequency_grid.clone().unwrap_or_else(|| FrequencyGrid::unit(s.group_dim(), spectral::DEFAULT_GRID_STEP));
    let mut observables = Vec::with_capacity(f_list.len());
    for (i, f) in f_list.iter().enumerate() {
        let probe = Probe::new(s, Some(f), Statistic::Metric(MetricKind::RhoF), &cfg.sched, &cfg.sampler)?;
        let fseed = rng::derive(seed, &[2, i as u64]);
        let f_relative = flavor_result(&probe, Flavor::FRelative, cfg, None, s, fseed)?;
        let mu_f_relative = flavor_result(&probe, Flavor::MuFRelative, cfg, Some(cfg.tau), s, fseed)?;
        drop(probe);
        let series = series_on_layout(s.system(), f, &x, &spec_layout);
        let scan = spectral::scan_series(&spec_layout, &series, &grid, ScanOptions::default());
        let spectral_score = spectral::discrete_spectrum_score(&scan).unwrap_or(1.0);
        let almost_periodicity = if s.group_dim() == 1 {
            spectral::ap_from_series(&ap_layout, &series_on_layout(s.system(), f, &x, &ap_layout), &cfg.ap_epsilons)
        } else {
            return invalid("dichotomy report supports one-dimensional time only");
        };
        observables.push(ObservableResult {
            observable: f.tag.clone(),
            f_relative,
            mu_f_relative,
            spectral_score,
            peaks: scan.peaks.len(),
            almost_periodicity,
        });
    }
    let mean_spectral_score = observables.iter().map(|o| o.spectral_score).sum::<f64>() / observables.len() as f64;
    let mut report = DichotomyReport {
        system: s.tag.clone(),
        known_class: s.known_class,
        topological,
        mu_relative,
        observables,
        mean_spectral_score,
        plain,
        implications: Vec::new(),
        violations: Vec::new(),
    };
    report.implications = implications(&report, cfg);
    report.violations = report
        .implications
        .iter()
        .filter(|c| !c.holds)
        .map(|c| format!("{} [{}]: {}", c.law, c.subject, c.detail))
        .collect();
    Ok(report)
}

fn implications(r: &DichotomyReport, cfg: &DichotomyConfig) -> Vec<ImplicationCheck> {
    let mut out = Vec::new();
    let mut push = |law: &str, subject: &str, holds: bool, detail: String| {
        out.push(ImplicationCheck { law: law.into(), subject: subject.into(), holds, detail });
    };
    let subject = |fr: &FlavorResult, obs: Option<&str>| match obs {
        Some(o) => format!("{:?}/{o}", fr.flavor),
        None => format!("{:?}", fr.flavor),
    };
    let mut rows: Vec<(&FlavorResult, Option<&str>)> = vec![(&r.topological, None), (&r.mu_relative, None)];
    for o in &r.observables {
        rows.push((&o.f_relative, Some(&o.observable)));
        rows.push((&o.mu_f_relative, Some(&o.observable)));
    }
    for (fr, obs) in &rows {
        let sub = subject(fr, *obs);
        push(
            "no_double_positive",
            &sub,
            !(fr.sensitive && fr.equicontinuous),
            format!("sensitive={}, equicontinuous={}", fr.sensitive, fr.equicontinuous),
        );
        push("dichotomy", &sub, fr.label != Label::Inconclusive, format!("label={:?}", fr.label));
        if fr.sensitive {
            let frac = fr.expansivity.as_ref().map_or(0.0, |x| x.fraction);
            push(
                "sensitive_implies_expansive",
                &sub,
                frac >= cfg.expansive_fraction,
                format!("fraction {frac:.3} at eps {:?}", fr.epsilon),
            );
        }
    }
    let topo_eq = r.topological.label == Label::MeanEquicontinuous;
    let mu_eq = r.mu_relative.label == Label::MeanEquicontinuous;
    for o in &r.observables {
        if topo_eq {
            push(
                "equicontinuous_implies_f_equicontinuous",
                &o.observable,
                o.f_relative.label == Label::MeanEquicontinuous,
                format!("f-relative label {:?}", o.f_relative.label),
            );
        }
        if mu_eq {
            push(
                "mu_equicontinuous_implies_mu_f_equicontinuous",
                &o.observable,
                o.mu_f_relative.label == Label::MeanEquicontinuous,
                format!("mu-f label {:?}", o.mu_f_relative.label),
            );
        }
        let ap = o.almost_periodicity.consistent;
        let sens = o.mu_f_relative.sensitive;
        push(
            "almost_periodic_iff_not_mean_sensitive",
            &o.observable,
            ap != sens,
            format!("almost periodic consistent={ap}, mu-f sensitive={sens}"),
        );
    }
    let high = r.mean_spectral_score >= cfg.score_threshold;
    push(
        "mu_equicontinuous_iff_discrete_spectrum",
        &r.system,
        mu_eq == high,
        format!("mu label {:?}, mean spectral score {:.4}", r.mu_relative.label, r.mean_spectral_score),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = default_eps_grid();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 2f64.powi(-8));
        assert_eq!(*g.last().unwrap(), 1.0);
        let e = delta_search_exponents();
        assert_eq!(e[0], 1);
        assert_eq!(*e.last().unwrap(), 1000);
        assert!(e.windows(2).all(|p| p[0] < p[1]));
        let s = sensitivity_grid();
        assert_eq!(s.len(), 33);
        assert!((s[32] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn median_of_small_lists() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
    }
}
