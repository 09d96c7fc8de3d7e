//! Birkhoff and Fourier-Birkhoff averages along a single orbit, point
//! spectrum scanning, an energy-fraction score for discrete spectrum, and a
//! return-time probe for almost periodicity.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::systems::{check_layout, series_on_layout, Observable, Point, SystemHandle};
use crate::windows::{syndetic_probe, GroupIndex, GroupKind, Schedule, WindowLayout};

/// Tail oscillation, relative to `max(|value|, sup|f|)`, above which an
/// average is flagged as diverging.
pub const DIVERGENCE_RATIO: f64 = 0.2;
/// Peak floor as a multiple of `sqrt(f_energy)`.
pub const DEFAULT_PEAK_FLOOR: f64 = 0.05;
pub const DEFAULT_GRID_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageTrace {
    pub value: Complex64,
    pub per_window: Vec<(f64, Complex64)>,
    pub diverged: bool,
}

fn trace(layout: &WindowLayout, means: Vec<Complex64>, sup: f64) -> AverageTrace {
    let tail = &means[layout.tail()];
    let value = *tail.last().expect("non-empty tail");
    let mut osc: f64 = 0.0;
    for a in tail {
        for b in tail {
            osc = osc.max((a - b).norm());
        }
    }
    let scale = value.norm().max(sup);
    AverageTrace {
        value,
        per_window: layout.sizes.iter().cloned().zip(means).collect(),
        diverged: scale > 0.0 && osc > DIVERGENCE_RATIO * scale,
    }
}

fn orbit(s: &SystemHandle, f: &Observable, x: &Point, sched: &Schedule) -> Result<(WindowLayout, Vec<Complex64>)> {
    let layout = WindowLayout::new(sched, s.group_kind(), s.group_dim())?;
    check_layout(s, &layout)?;
    s.check_observable(f)?;
    s.check_point(x)?;
    let v = series_on_layout(s.system(), f, x, &layout);
    Ok((layout, v))
}

/// `(1/nu(F_n)) int_{F_n} f(T^g x)` for each scheduled window.
pub fn birkhoff_average(s: &SystemHandle, f: &Observable, x: &Point, sched: &Schedule) -> Result<AverageTrace> {
    let (layout, v) = orbit(s, f, x, sched)?;
    Ok(trace(&layout, layout.window_means_complex(&v), f.sup_bound))
}

/// `(1/nu(F_n)) int_{F_n} e^{-2 pi i <w, g>} f(T^g x)` for each scheduled window.
pub fn fourier_mode(s: &SystemHandle, f: &Observable, x: &Point, w: &[f64], sched: &Schedule) -> Result<AverageTrace> {
    if w.len() != s.group_dim() {
        return invalid(format!("frequency has dimension {}, the group has {}", w.len(), s.group_dim()));
    }
    let (layout, mut v) = orbit(s, f, x, sched)?;
    let mut g = vec![0.0; layout.dim];
    for (i, vi) in v.iter_mut().enumerate() {
        layout.coords(i, &mut g);
        let phase: f64 = w.iter().zip(&g).map(|(a, b)| a * b).sum();
        *vi *= Complex64::from_polar(1.0, -TAU * phase);
    }
    Ok(trace(&layout, layout.window_means_complex(&v), f.sup_bound))
}

/// The box `[lo, hi)` sampled with spacing `step` in every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub step: f64,
}

impl FrequencyGrid {
    /// `[0, 1)^d` with spacing `step`; the natural torus of frequencies for
    /// discrete time.
    pub fn unit(dim: usize, step: f64) -> Self {
        Self { lo: vec![0.0; dim], hi: vec![1.0; dim], step }
    }

    pub fn band(lo: f64, hi: f64, step: f64) -> Self {
        Self { lo: vec![lo], hi: vec![hi], step }
    }

    fn counts(&self) -> Vec<usize> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| ((h - l) / self.step - 1e-9).ceil().max(0.0) as usize).collect()
    }

    pub fn len(&self) -> usize {
        if self.lo.is_empty() {
            return 0;
        }
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lo.len() != dim || self.hi.len() != dim {
            return invalid(format!("frequency grid must have dimension {dim}"));
        }
        if !(self.step > 0.0) || self.is_empty() {
            return invalid("frequency grid is empty");
        }
        Ok(())
    }

    fn point(&self, mut i: usize, counts: &[usize]) -> Vec<f64> {
        let mut w = vec![0.0; counts.len()];
        for c in (0..counts.len()).rev() {
            w[c] = self.lo[c] + (i % counts[c]) as f64 * self.step;
            i /= counts[c];
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub freq: Vec<f64>,
    pub amplitude: Complex64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumScan {
    pub peaks: Vec<Peak>,
    pub grid: FrequencyGrid,
    /// Mean of `|f(T^g x)|^2` over the largest window.
    pub f_energy: f64,
    /// Magnitude threshold applied to the peaks.
    pub floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Peak floor as a multiple of `sqrt(f_energy)`.
    pub peak_floor: f64,
    /// Golden-section tolerance on the full window.
    pub tolerance: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { peak_floor: DEFAULT_PEAK_FLOOR, tolerance: 1e-6 }
    }
}

/// Orbit samples arranged for Fourier sums over the sub-cubes `[0, L)^d`.
struct Signal<'a> {
    layout: &'a WindowLayout,
    values: &'a [Complex64],
}

impl Signal<'_> {
    /// Mean of `e^{-2 pi i <w, g>} v_g` over the cube of side `l` samples.
    fn mode(&self, w: &[f64], l: usize) -> Complex64 {
        let d = self.layout.dim;
        let axis = self.layout.axis;
        let h = self.layout.step;
        let rows = l.pow(d as u32 - 1);
        let step = Complex64::from_polar(1.0, -TAU * w[d - 1] * h);
        let mut total = Complex64::new(0.0, 0.0);
        let mut head = vec![0usize; d];
        for r in 0..rows {
            let mut rr = r;
            for c in (0..d - 1).rev() {
                head[c] = rr % l;
                rr /= l;
            }
            let base: usize = head[..d - 1].iter().fold(0, |acc, &i| acc * axis + i) * axis;
            let phase0: f64 = (0..d - 1).map(|c| w[c] * head[c] as f64 * h).sum();
            let mut z = Complex64::from_polar(1.0, -TAU * phase0);
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in self.values[base..base + l].iter().enumerate() {
                acc += v * z;
                z *= step;
                if j % 1024 == 1023 {
                    z /= z.norm();
                }
            }
            total += acc;
        }
        total / (rows * l) as f64
    }
}

/// Scans `grid` for eigenfrequencies of `f` along the orbit of `x`.
///
/// The grid is evaluated on a sub-window whose length matches the grid
/// resolution; each local maximum is then followed through windows of
/// doubling length, re-maximized by golden-section search at each length.
pub fn spectrum_scan(
    s: &SystemHandle,
    f: &Observable,
    x: &Point,
    grid: &FrequencyGrid,
    sched: &Schedule,
    opts: ScanOptions,
) -> Result<SpectrumScan> {
    grid.validate(s.group_dim())?;
    let (layout, values) = orbit(s, f, x, sched)?;
    Ok(scan_series(&layout, &values, grid, opts))
}

pub(crate) fn scan_series(
    layout: &WindowLayout,
    values: &[Complex64],
    grid: &FrequencyGrid,
    opts: ScanOptions,
) -> SpectrumScan {
    let f_energy = values.iter().map(|v| v.norm_sqr()).sum::<f64>() / values.len() as f64;
    let floor = opts.peak_floor * f_energy.sqrt();
    let mut scan = SpectrumScan { peaks: Vec::new(), grid: grid.clone(), f_energy, floor };
    if f_energy == 0.0 {
        return scan;
    }
    let sig = Signal { layout, values };
    let h = layout.step;
    let axis = layout.axis;
    let periodic = layout.kind == GroupKind::Discrete;
    let l0 = ((1.0 / (grid.step * h)).ceil() as usize).clamp(1, axis);

    let counts = grid.counts();
    let coarse: Vec<f64> =
        (0..grid.len()).into_par_iter().map(|i| sig.mode(&grid.point(i, &counts), l0).norm()).collect();
    let candidates: Vec<usize> =
        (0..coarse.len()).filter(|&i| coarse[i] >= 0.5 * floor && is_local_max(&coarse, &counts, i)).collect();

    let mut lengths = vec![l0];
    while *lengths.last().unwrap() < axis {
        lengths.push((lengths.last().unwrap() * 2).min(axis));
    }
    let final_tol = opts.tolerance.min(0.01 / (axis as f64 * h));
    let mut found: Vec<(Vec<f64>, f64)> = candidates
        .par_iter()
        .filter_map(|&i| {
            let mut w = grid.point(i, &counts);
            let mut mag = coarse[i];
            for (li, &l) in lengths.iter().enumerate().skip(1) {
                let half = 1.0 / (l as f64 * h);
                let tol = if li + 1 == lengths.len() { final_tol } else { 0.01 * half };
                let (bw, bm) = refine(&sig, &w, l, half, tol);
                w = bw;
                mag = bm;
                if mag < 0.5 * floor {
                    return None;
                }
            }
            if lengths.len() == 1 {
                let (bw, bm) = refine(&sig, &w, l0, 1.0 / (l0 as f64 * h), final_tol);
                w = bw;
                mag = bm;
            }
            Some((w, mag))
        })
        .collect();

    found.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal)));
    let sep = 2.0 / (axis as f64 * h);
    let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
    for (w, m) in found {
        if m < floor {
            continue;
        }
        let w = if periodic { w.iter().map(|c| c.rem_euclid(1.0)).collect() } else { w };
        let close = kept.iter().any(|(k, _)| {
            k.iter().zip(&w).all(|(a, b)| {
                let d = (a - b).abs();
                (if periodic { d.min(1.0 - d) } else { d }) < sep
            })
        });
        if !close {
            kept.push((w, m));
        }
    }
    scan.peaks = kept
        .into_iter()
        .map(|(w, _)| {
            let a = sig.mode(&w, axis);
            Peak { freq: w, amplitude: a, magnitude: a.norm() }
        })
        .filter(|p| p.magnitude >= floor)
        .collect();
    scan.peaks.sort_by(|a, b| a.freq.partial_cmp(&b.freq).unwrap_or(std::cmp::Ordering::Equal));
    scan
}

pub(crate) fn is_local_max(vals: &[f64], counts: &[usize], i: usize) -> bool {
    let mut stride = 1;
    for c in (0..counts.len()).rev() {
        let pos = (i / stride) % counts[c];
        if pos > 0 && vals[i - stride] > vals[i] {
            return false;
        }
        if pos + 1 < counts[c] && vals[i + stride] > vals[i] {
            return false;
        }
        stride *= counts[c];
    }
    true
}

/// Coordinate-wise golden-section maximization of `|a_l(w)|` in the box
/// `w +- half`; returns the best point evaluated, the start included.
fn refine(sig: &Signal<'_>, start: &[f64], l: usize, half: f64, tol: f64) -> (Vec<f64>, f64) {
    let mut best_w = start.to_vec();
    let mut best = sig.mode(&best_w, l).norm();
    for c in 0..start.len() {
        let center = best_w[c];
        let eval = |t: f64| {
            let mut w = best_w.clone();
            w[c] = t;
            sig.mode(&w, l).norm()
        };
        let (t, m) = golden_max(eval, center - half, center + half, tol);
        if m > best {
            best = m;
            best_w[c] = t;
        }
    }
    (best_w, best)
}

pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
    }
    best
}

/// `sum |a_w|^2 / f_energy`, clipped to `[0, 1]`.
pub fn discrete_spectrum_score(scan: &SpectrumScan) -> Result<f64> {
    if !(scan.f_energy > 0.0) {
        return Err(Error::UndefinedScore("observable has zero energy along the orbit".into()));
    }
    let captured: f64 = scan.peaks.iter().map(|p| p.magnitude * p.magnitude).sum();
    Ok((captured / scan.f_energy).clamp(0.0, 1.0))
}

/// Default tolerance grid for the almost-periodicity probe.
pub fn default_ap_grid() -> Vec<f64> {
    vec![0.1, 0.05, 0.02]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimes {
    pub epsilon: f64,
    /// Smallest tested gap bound `K` for which the return set was syndetic.
    pub k_side: Option<f64>,
    /// Fraction of tested lags that are `epsilon`-returns.
    pub density: f64,
    /// Start of an empty gap at the largest tested `K`, if any.
    pub witness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub consistent: bool,
    pub lags: usize,
    pub average_len: usize,
    pub returns: Vec<ReturnTimes>,
    pub reason: Option<String>,
}

/// Estimates `e(j) = mean_i |f(T^{i+j} x) - f(T^i x)|^2` for lags `j` in
/// the first half of the largest window (averaging over the second half's
/// length) and asks whether `{j : e(j) <= eps}` is syndetic for every
/// `eps` in `epsilons`, growing the gap bound `K = 2, 4, ...` up to a
/// quarter of the lag range.
pub fn almost_periodicity_probe(
    s: &SystemHandle,
    f: &Observable,
    x: &Point,
    epsilons: &[f64],
    sched: &Schedule,
) -> Result<ApReport> {
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return invalid("almost-periodicity tolerances must be positive");
    }
    if s.group_dim() != 1 {
        return invalid("almost-periodicity probe supports one-dimensional time only");
    }
    let (layout, v) = orbit(s, f, x, sched)?;
    Ok(ap_from_series(&layout, &v, epsilons))
}

pub(crate) fn ap_from_series(layout: &WindowLayout, v: &[Complex64], epsilons: &[f64]) -> ApReport {
    let n = v.len();
    let lags = n / 2;
    let m = n - lags;
    let h = layout.step;
    let e: Vec<f64> = (0..lags)
        .into_par_iter()
        .map(|j| v[j..j + m].iter().zip(&v[..m]).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / m as f64)
        .collect();
    let mut report = ApReport { consistent: true, lags, average_len: m, returns: Vec::new(), reason: None };
    let cap = lags / 4;
    if lags < 8 {
        report.consistent = false;
        report.reason = Some("window too short for the return-time probe".into());
        return report;
    }
    let sched = Schedule::with_mesh(vec![(lags / 2) as f64 * h, lags as f64 * h], 0, h).expect("valid lag schedule");
    let kind = layout.kind;
    for &eps in epsilons {
        let member = |g: &GroupIndex| {
            let j = (g.coords[0] / h).round() as usize;
            j < lags && e[j] <= eps
        };
        let density = e.iter().filter(|x| **x <= eps).count() as f64 / lags as f64;
        let mut k = 2usize;
        let mut found = None;
        let mut witness = None;
        while k <= cap {
            let rep = syndetic_probe(member, k as f64 * h, &sched, kind, 1).expect("valid probe");
            if rep.syndetic {
                found = Some(k as f64 * h);
                witness = None;
                break;
            }
            witness = rep.witness.map(|w| w.coords[0]);
            k *= 2;
        }
        if found.is_none() {
            report.consistent = false;
            report
                .reason
                .get_or_insert_with(|| format!("return set at eps = {eps} has gaps beyond K = {}", cap as f64 * h));
        }
        report.returns.push(ReturnTimes { epsilon: eps, k_side: found, density, witness });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_max() {
        let (x, v) = golden_max(|t| 1.0 - (t - 0.3).powi(2), 0.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-8 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_max_on_grid_edges() {
        let v = [3.0, 1.0, 2.0, 2.5];
        let c = [4];
        assert!(is_local_max(&v, &c, 0));
        assert!(!is_local_max(&v, &c, 1));
        assert!(is_local_max(&v, &c, 3));
    }

    #[test]
    fn grid_counts() {
        let g = FrequencyGrid::unit(1, 1e-3);
        assert_eq!(g.len(), 1000);
        assert_eq!(g.point(999, &g.counts()), vec![0.999]);
        assert!(FrequencyGrid::band(0.0, 0.0, 0.1).is_empty());
    }
}
