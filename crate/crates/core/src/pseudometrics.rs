//! Finite-window estimators for the orbit pseudometrics `d_f`, `d'_f`,
//! `rho_f`, `d_b`, `rho_b`, and a numerical check of the implications that
//! make them topologically equivalent.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::systems::{check_layout, dist_series_on_layout, series_on_layout, Observable, Point, SystemHandle};
use crate::windows::{Schedule, WindowLayout};

/// Relative tolerance between the last two tail values for `converged`.
pub const CONVERGENCE_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// `limsup ((1/nu) sum |f(T^j x) - f(T^j y)|^2)^{1/2}`
    DfL2,
    /// `limsup (1/nu) sum |f(T^j x) - f(T^j y)|`
    DfL1,
    /// `inf { eps : upper density of |f(T^j x) - f(T^j y)| > eps is < eps }`
    RhoF,
    /// `limsup (1/nu) sum d(T^j x, T^j y)`
    Db,
    /// `inf { eps : upper density of d(T^j x, T^j y) > eps is < eps }`
    RhoB,
}

impl MetricKind {
    pub fn uses_observable(self) -> bool {
        matches!(self, MetricKind::DfL2 | MetricKind::DfL1 | MetricKind::RhoF)
    }

    fn is_density(self) -> bool {
        matches!(self, MetricKind::RhoF | MetricKind::RhoB)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub kind: MetricKind,
    pub value: f64,
    pub per_window: Vec<(f64, f64)>,
    pub converged: bool,
}

pub fn f_pseudometric(
    kind: MetricKind,
    s: &SystemHandle,
    f: &Observable,
    x: &Point,
    y: &Point,
    sched: &Schedule,
) -> Result<MetricEstimate> {
    if !kind.uses_observable() {
        return invalid(format!("{kind:?} is an orbit pseudometric; use orbit_pseudometric"));
    }
    let layout = prepare(s, x, y, sched)?;
    s.check_observable(f)?;
    Ok(estimate(kind, &layout, &f_differences(s, f, x, y, &layout)))
}

pub fn orbit_pseudometric(
    kind: MetricKind,
    s: &SystemHandle,
    x: &Point,
    y: &Point,
    sched: &Schedule,
) -> Result<MetricEstimate> {
    if kind.uses_observable() {
        return invalid(format!("{kind:?} needs an observable; use f_pseudometric"));
    }
    let layout = prepare(s, x, y, sched)?;
    Ok(estimate(kind, &layout, &dist_series_on_layout(s.system(), x, y, &layout)))
}

fn prepare(s: &SystemHandle, x: &Point, y: &Point, sched: &Schedule) -> Result<WindowLayout> {
    let layout = WindowLayout::new(sched, s.group_kind(), s.group_dim())?;
    check_layout(s, &layout)?;
    s.check_point(x)?;
    s.check_point(y)?;
    Ok(layout)
}

/// `|f(T^g x) - f(T^g y)|` over the layout.
pub(crate) fn f_differences(s: &SystemHandle, f: &Observable, x: &Point, y: &Point, layout: &WindowLayout) -> Vec<f64> {
    if x == y {
        return vec![0.0; layout.len()];
    }
    let a = series_on_layout(s.system(), f, x, layout);
    let b = series_on_layout(s.system(), f, y, layout);
    a.iter().zip(&b).map(|(u, v)| (u - v).norm()).collect()
}

/// Pointwise differences for `kind`: observable differences or orbit distances.
pub(crate) fn differences(
    kind: MetricKind,
    s: &SystemHandle,
    f: Option<&Observable>,
    x: &Point,
    y: &Point,
    layout: &WindowLayout,
) -> Vec<f64> {
    match (kind.uses_observable(), f) {
        (true, Some(f)) => f_differences(s, f, x, y, layout),
        _ => dist_series_on_layout(s.system(), x, y, layout),
    }
}

/// Turns a difference series into the estimate of `kind`.
pub(crate) fn estimate(kind: MetricKind, layout: &WindowLayout, diffs: &[f64]) -> MetricEstimate {
    let per: Vec<f64> = if kind.is_density() {
        (0..layout.windows()).map(|k| density_infimum(&[window_sorted(layout, diffs, k)])).collect()
    } else if kind == MetricKind::DfL2 {
        let sq: Vec<f64> = diffs.iter().map(|d| d * d).collect();
        layout.window_means(&sq).into_iter().map(f64::sqrt).collect()
    } else {
        layout.window_means(diffs)
    };
    let tail = layout.tail();
    let value = if kind.is_density() {
        let sorted: Vec<Vec<f64>> = tail.clone().map(|k| window_sorted(layout, diffs, k)).collect();
        density_infimum(&sorted)
    } else {
        per[tail.clone()].iter().cloned().fold(0.0, f64::max)
    };
    let converged = converged(&per[tail]);
    MetricEstimate { kind, value, per_window: layout.sizes.iter().cloned().zip(per).collect(), converged }
}

/// Only the combined tail value of [`estimate`].
pub(crate) fn estimate_value(kind: MetricKind, layout: &WindowLayout, diffs: &[f64]) -> f64 {
    let tail = layout.tail();
    if kind.is_density() {
        let sorted: Vec<Vec<f64>> = tail.map(|k| window_sorted(layout, diffs, k)).collect();
        density_infimum(&sorted)
    } else if kind == MetricKind::DfL2 {
        let sq: Vec<f64> = diffs.iter().map(|d| d * d).collect();
        layout.window_means(&sq)[tail].iter().map(|v| v.sqrt()).fold(0.0, f64::max)
    } else {
        layout.window_means(diffs)[tail].iter().cloned().fold(0.0, f64::max)
    }
}

pub(crate) fn converged(tail: &[f64]) -> bool {
    match tail {
        [.., a, b] => {
            let scale = a.abs().max(b.abs());
            scale == 0.0 || (a - b).abs() <= CONVERGENCE_TOL * scale
        }
        _ => false,
    }
}

fn window_sorted(layout: &WindowLayout, diffs: &[f64], k: usize) -> Vec<f64> {
    let axis = layout.window_axes[k];
    let mut v: Vec<f64> = diffs.iter().enumerate().filter(|(i, _)| layout.shell(*i) < axis).map(|(_, d)| *d).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Exact `inf { eps > 0 : max_k ratio_k(d > eps) < eps }` for windows given
/// as sorted difference lists.
///
/// `G(eps) = max_k ratio_k(d > eps)` is a right-continuous step function,
/// constant on `[b_i, b_{i+1})` between consecutive distinct values `b_i`
/// (with `b_0 = 0`); the first interval where `max(b_i, G_i) < b_{i+1}`
/// holds the infimum.
fn density_infimum(windows: &[Vec<f64>]) -> f64 {
    let mut breaks: Vec<f64> =
        std::iter::once(0.0).chain(windows.iter().flat_map(|w| w.iter().cloned())).filter(|b| *b >= 0.0).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let g = |b: f64| {
        windows
            .iter()
            .map(|w| {
                let above = w.len() - w.partition_point(|d| *d <= b);
                above as f64 / w.len() as f64
            })
            .fold(0.0, f64::max)
    };
    for (i, &b) in breaks.iter().enumerate() {
        let level = b.max(g(b));
        match breaks.get(i + 1) {
            Some(&next) if level >= next => continue,
            _ => return level,
        }
    }
    0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Implication {
    /// `rho_f < eps/2  =>  d'_f < eps`
    RhoBoundsL1,
    /// `d_f^2 < eps^3  =>  rho_f < eps`
    L2BoundsRho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceViolation {
    pub pair: usize,
    pub epsilon: f64,
    pub implication: Implication,
    pub rho_f: f64,
    pub df_l1: f64,
    pub df_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub pairs: usize,
    pub epsilons: Vec<f64>,
    /// Implications whose hypothesis held, so the conclusion was tested.
    pub nonvacuous: usize,
    pub violations: Vec<EquivalenceViolation>,
}

/// Default grid `{2^-8, ..., 2^-1}` for [`equivalence_check`].
pub fn default_equivalence_grid() -> Vec<f64> {
    (1..=8).rev().map(|k| 2f64.powi(-k)).collect()
}

/// Tests both equivalence implications for every pair and grid `eps` on the
/// same finite-window estimates. Needs `sup |f| <= 1/2`.
pub fn equivalence_check(
    s: &SystemHandle,
    f: &Observable,
    pairs: &[(Point, Point)],
    epsilons: &[f64],
    sched: &Schedule,
) -> Result<EquivalenceReport> {
    if f.sup_bound > 0.5 + 1e-12 {
        return invalid(format!("observable {} must be rescaled to sup <= 1/2, has {}", f.tag, f.sup_bound));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return invalid("equivalence grid must be positive");
    }
    use rayon::prelude::*;
    let estimates: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|(x, y)| -> Result<(f64, f64, f64)> {
            let layout = prepare(s, x, y, sched)?;
            let d = f_differences(s, f, x, y, &layout);
            Ok((
                estimate(MetricKind::RhoF, &layout, &d).value,
                estimate(MetricKind::DfL1, &layout, &d).value,
                estimate(MetricKind::DfL2, &layout, &d).value,
            ))
        })
        .collect::<Result<_>>()?;
    s.check_observable(f)?;
    let mut report =
        EquivalenceReport { pairs: pairs.len(), epsilons: epsilons.to_vec(), nonvacuous: 0, violations: Vec::new() };
    for (i, &(rho, l1, l2)) in estimates.iter().enumerate() {
        for &eps in epsilons {
            let checks = [
                (Implication::RhoBoundsL1, rho < eps / 2.0, l1 < eps),
                (Implication::L2BoundsRho, l2 * l2 < eps.powi(3), rho < eps),
            ];
            for (implication, hyp, concl) in checks {
                if hyp {
                    report.nonvacuous += 1;
                    if !concl {
                        report.violations.push(EquivalenceViolation {
                            pair: i,
                            epsilon: eps,
                            implication,
                            rho_f: rho,
                            df_l1: l1,
                            df_l2: l2,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over a fine grid of candidate eps.
    fn brute(windows: &[Vec<f64>]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=20000 {
            let eps = i as f64 / 10000.0;
            let g = windows
                .iter()
                .map(|w| w.iter().filter(|d| **d > eps).count() as f64 / w.len() as f64)
                .fold(0.0, f64::max);
            if g < eps {
                best = best.min(eps);
            }
        }
        best
    }

    #[test]
    fn density_infimum_matches_brute_force() {
        let cases: Vec<Vec<Vec<f64>>> = vec![
            vec![vec![0.0, 1.0]],
            vec![vec![0.0, 0.0, 0.0, 1.0]],
            vec![vec![0.3; 10]],
            vec![vec![0.1, 0.2, 0.7, 0.9], vec![0.05, 0.1, 0.2, 0.7, 0.9, 0.95]],
            vec![vec![0.0; 5]],
        ];
        for mut c in cases {
            for w in &mut c {
                w.sort_by(f64::total_cmp);
            }
            let exact = density_infimum(&c);
            assert!((exact - brute(&c)).abs() <= 1e-4 + 1e-12, "{c:?}: {exact} vs {}", brute(&c));
        }
    }

    #[test]
    fn half_disagreement_gives_half() {
        let w = vec![vec![0.0, 0.0, 1.0, 1.0]];
        assert_eq!(density_infimum(&w), 0.5);
    }

    #[test]
    fn convergence_flag() {
        assert!(converged(&[1.0, 1.01]));
        assert!(!converged(&[1.0, 1.2]));
        assert!(converged(&[0.0, 0.0]));
        assert!(!converged(&[1.0]));
    }
}
