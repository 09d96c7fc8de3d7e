use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use super::index::Coords;
use super::{sup_dist, Construction, DeloneSet, PointIndex, MATCH_TOL};
use crate::error::{invalid, Result};
use crate::rng;
use crate::systems::{Domain, KnownClass, Observable, Point, PointKind, System, SystemHandle};
use crate::windows::GroupKind;

/// The translation hull of a finite patch. A point `Translate(t)` stands for
/// `Λ - t`; only `t` at least `margin` away from the patch boundary are valid.
#[derive(Debug)]
pub(crate) struct Hull {
    dim: usize,
    side: f64,
    rho: f64,
    margin: f64,
    span: f64,
    xs: Vec<f64>,
    index: Arc<PointIndex>,
    returns: Mutex<ReturnCache>,
}

/// Return shifts keyed by the bit patterns of translate and radius.
type ReturnCache = HashMap<(Vec<u64>, u64), Arc<Vec<Vec<f64>>>>;

fn coords(x: &Point) -> &[f64] {
    match x {
        Point::Translate(t) => t,
        other => panic!("Delone hull received {other:?}"),
    }
}

impl Hull {
    fn in_sampling(&self, t: &[f64]) -> bool {
        t.iter().all(|c| *c >= self.margin && *c <= self.margin + self.span)
    }

    fn is_member(&self, y: &[f64]) -> bool {
        if self.dim == 1 {
            let i = self.xs.partition_point(|x| *x < y[0] - MATCH_TOL);
            i < self.xs.len() && self.xs[i] <= y[0] + MATCH_TOL
        } else {
            self.index.has_near(y, MATCH_TOL)
        }
    }

    fn nearest_point(&self, t: &[f64]) -> Option<Coords<f64>> {
        if self.dim == 1 {
            let i = self.xs.partition_point(|x| *x < t[0]);
            let right = self.xs.get(i).map(|x| x - t[0]);
            let left = i.checked_sub(1).map(|j| t[0] - self.xs[j]);
            let x = match (left, right) {
                (Some(l), Some(r)) if l <= r => self.xs[i - 1],
                (_, Some(_)) => self.xs[i],
                (Some(_), None) => self.xs[i - 1],
                (None, None) => return None,
            };
            Some(SmallVec::from_slice(&[x]))
        } else {
            self.index.nearest(t, self.side).map(|(i, _)| SmallVec::from_slice(self.index.point(i)))
        }
    }

    /// Distance from `t` to the nearest point of `Λ Δ (Λ + v)`, if one lies
    /// closer than `limit`.
    fn mismatch_radius(&self, t: &[f64], v: &[f64], limit: f64) -> Option<f64> {
        if self.dim == 1 {
            return self.mismatch_radius_1d(t[0], v[0], limit);
        }
        // grow the search box so that early mismatches stay cheap
        let mut r = limit.min(1.0);
        loop {
            if let Some(d) = self.mismatch_within(t, v, r) {
                return Some(d);
            }
            if r >= limit {
                return None;
            }
            r = (2.0 * r).min(limit);
        }
    }

    fn mismatch_within(&self, t: &[f64], v: &[f64], limit: f64) -> Option<f64> {
        let mut best = f64::INFINITY;
        let mut buf: Coords<f64> = SmallVec::from_slice(t);
        for i in self.index.within(t, limit) {
            let x = self.index.point(i);
            let d = sup_dist(x, t);
            if d < best && d < limit {
                for c in 0..self.dim {
                    buf[c] = x[c] - v[c];
                }
                if !self.is_member(&buf) {
                    best = d;
                }
            }
        }
        let shifted: Coords<f64> = t.iter().zip(v).map(|(a, b)| a - b).collect();
        for i in self.index.within(&shifted, limit) {
            let x = self.index.point(i);
            for c in 0..self.dim {
                buf[c] = x[c] + v[c];
            }
            let d = sup_dist(&buf, t);
            if d < best && d < limit && !self.is_member(&buf) {
                best = d;
            }
        }
        (best < limit).then_some(best)
    }

    /// Walks `Λ` and `Λ + v` outward from `t` in both directions.
    fn mismatch_radius_1d(&self, t: f64, v: f64, limit: f64) -> Option<f64> {
        let xs = &self.xs;
        let n = xs.len();
        let mut best = f64::INFINITY;
        let mut i = xs.partition_point(|x| *x < t - MATCH_TOL);
        let mut j = xs.partition_point(|x| *x + v < t - MATCH_TOL);
        loop {
            let a = if i < n { xs[i] } else { f64::INFINITY };
            let b = if j < n { xs[j] + v } else { f64::INFINITY };
            let next = a.min(b);
            if (next - t).abs() >= limit {
                break;
            }
            if (a - b).abs() <= MATCH_TOL {
                i += 1;
                j += 1;
            } else {
                best = (next - t).abs();
                break;
            }
        }
        let mut i = xs.partition_point(|x| *x <= t + MATCH_TOL);
        let mut j = xs.partition_point(|x| *x + v <= t + MATCH_TOL);
        loop {
            let a = if i > 0 { xs[i - 1] } else { f64::NEG_INFINITY };
            let b = if j > 0 { xs[j - 1] + v } else { f64::NEG_INFINITY };
            let next = a.max(b);
            if (t - next).abs() >= limit.min(best) {
                break;
            }
            if (a - b).abs() <= MATCH_TOL {
                i -= 1;
                j -= 1;
            } else {
                best = best.min((t - next).abs());
                break;
            }
        }
        (best < limit).then_some(best)
    }

    /// `min(1, min_v max(|Δ - v|, 1/R_v(t)))` over the shifts `v` that move a
    /// point of `Λ` onto the point of `Λ` nearest `t`, plus `v = Δ`. A patch
    /// agreeing out to the comparison radius counts as `R_v = ∞`.
    fn one_sided(&self, t: &[f64], delta: &[f64]) -> f64 {
        let mut cands: Vec<(f64, Coords<f64>)> = vec![(0.0, SmallVec::from_slice(delta))];
        if let Some(p0) = self.nearest_point(t) {
            let target: Coords<f64> = p0.iter().zip(delta).map(|(a, b)| a - b).collect();
            let mut push = |q: &[f64]| {
                let v: Coords<f64> = p0.iter().zip(q).map(|(a, b)| a - b).collect();
                cands.push((sup_dist(q, &target), v));
            };
            if self.dim == 1 {
                let lo = self.xs.partition_point(|x| *x < target[0] - 1.0);
                let hi = self.xs.partition_point(|x| *x <= target[0] + 1.0);
                for x in &self.xs[lo..hi] {
                    push(std::slice::from_ref(x));
                }
            } else {
                for i in self.index.within(&target, 1.0) {
                    push(self.index.point(i));
                }
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = 1.0f64;
        for (a, v) in cands {
            if a >= best {
                break;
            }
            let limit = if a > 0.0 { (1.0 / a).min(self.rho) } else { self.rho };
            let value = match self.mismatch_radius(t, &v, limit) {
                Some(r) if r > 0.0 => a.max(1.0 / r),
                Some(_) => f64::INFINITY,
                None => a,
            };
            best = best.min(value);
        }
        best
    }

    /// Shifts `τ` with `t + τ` in the sampling box whose radius-`radius`
    /// patch equals that of `t`. Always contains `0`.
    fn returns(&self, t: &[f64], radius: f64) -> Arc<Vec<Vec<f64>>> {
        let key = (t.iter().map(|c| c.to_bits()).collect::<Vec<u64>>(), radius.to_bits());
        if let Some(r) = self.returns.lock().unwrap().get(&key) {
            return r.clone();
        }
        let mut out = vec![vec![0.0; self.dim]];
        let fits = |c: &[f64]| c.iter().all(|x| *x - radius >= 0.0 && *x + radius <= self.side);
        if fits(t) {
            if let Some(p0) = self.nearest_point(t) {
                let lo: Vec<f64> = p0.iter().zip(t).map(|(p, x)| p - x + self.margin).collect();
                let hi: Vec<f64> = lo.iter().map(|c| c + self.span).collect();
                let mut qs = Vec::new();
                self.index.for_each_in_box(&lo, &hi, |i| qs.push(i));
                qs.sort_unstable();
                for i in qs {
                    let q = self.index.point(i);
                    let tau: Vec<f64> = q.iter().zip(&p0).map(|(a, b)| a - b).collect();
                    if tau.iter().all(|c| c.abs() <= MATCH_TOL) {
                        continue;
                    }
                    let moved: Vec<f64> = t.iter().zip(&tau).map(|(a, b)| a + b).collect();
                    if !self.in_sampling(&moved) || !fits(&moved) {
                        continue;
                    }
                    let back: Vec<f64> = tau.iter().map(|c| -c).collect();
                    if self.mismatch_radius(t, &back, radius).is_none() {
                        out.push(tau);
                    }
                }
            }
        }
        let out = Arc::new(out);
        self.returns.lock().unwrap().insert(key, out.clone());
        out
    }
}

impl System for Hull {
    fn group_kind(&self) -> GroupKind {
        GroupKind::Continuous
    }

    fn group_dim(&self) -> usize {
        self.dim
    }

    fn point_kind(&self) -> PointKind {
        PointKind::DelonePatch { dim: self.dim }
    }

    fn act(&self, g: &[f64], x: &Point) -> Point {
        Point::Translate(coords(x).iter().zip(g).map(|(a, b)| a + b).collect())
    }

    fn dist(&self, x: &Point, y: &Point) -> f64 {
        let (a, b) = (coords(x), coords(y));
        if a == b {
            return 0.0;
        }
        let delta: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
        let back: Vec<f64> = delta.iter().map(|c| -c).collect();
        let d = self.one_sided(a, &delta);
        if d >= 1.0 {
            return 1.0;
        }
        d.max(self.one_sided(b, &back))
    }

    fn diameter(&self) -> f64 {
        1.0
    }

    fn contains(&self, x: &Point) -> bool {
        match x {
            Point::Translate(t) => {
                t.len() == self.dim && t.iter().all(|c| *c >= self.margin && *c <= self.side - self.margin)
            }
            _ => false,
        }
    }

    fn sample_mu(&self, seed: u64) -> Point {
        let mut r = rng::chacha(seed);
        Point::Translate((0..self.dim).map(|_| self.margin + r.gen::<f64>() * self.span).collect())
    }

    fn sample_near(&self, center: &Point, delta: f64, r: &mut ChaCha8Rng) -> Option<Point> {
        let t = coords(center);
        let taus = self.returns(t, 1.0 / delta);
        let tau = &taus[r.gen_range(0..taus.len())];
        let moved: Vec<f64> = t.iter().zip(tau).map(|(a, b)| a + b + (r.gen::<f64>() - 0.5) * delta).collect();
        self.in_sampling(&moved).then_some(Point::Translate(moved))
    }

    fn time_budget(&self) -> f64 {
        self.span
    }
}

/// The hull of `set` as an `R^d` system. Patches are compared out to
/// `patch_radius`; sampled translates keep that radius plus two inside the
/// patch, and orbits may run for half of the remaining side.
pub fn hull_system(set: &DeloneSet, patch_radius: f64) -> Result<SystemHandle> {
    if !(patch_radius > 0.0) || !patch_radius.is_finite() {
        return invalid(format!("patch radius must be positive, got {patch_radius}"));
    }
    let margin = patch_radius + 2.0;
    let span = 0.5 * (set.side - 2.0 * margin);
    if !(span > 0.0) {
        return invalid(format!("patch radius {patch_radius} leaves no room inside a region of side {}", set.side));
    }
    let xs = if set.dim == 1 { set.points.iter().map(|p| p[0]).collect() } else { Vec::new() };
    let hull = Hull {
        dim: set.dim,
        side: set.side,
        rho: patch_radius,
        margin,
        span,
        xs,
        index: set.index.clone(),
        returns: Mutex::new(HashMap::new()),
    };
    let class = match &set.construction {
        Construction::Lattice { .. } | Construction::CutProject { .. } => KnownClass::DiscreteSpectrum,
        Construction::Perturbed { amplitude, .. } if *amplitude == 0.0 => KnownClass::DiscreteSpectrum,
        _ => KnownClass::Unknown,
    };
    let tag = format!("delone_hull({}, side={}, patch_radius={patch_radius})", set.construction.describe(), set.side);
    Ok(SystemHandle::new(Arc::new(hull), tag, class))
}

/// `max_x (1 - |x - t| / r)_+` over the points of `Λ`, with `r` the packing
/// radius of `set`.
pub fn hull_bump(set: &DeloneSet) -> Observable {
    let r = set.r.max(1e-9);
    let index = set.index.clone();
    Observable::new(format!("hull_bump(r={r})"), 1.0, Domain::Translate, move |x| {
        let v = match x {
            Point::Translate(t) => index.nearest(t, r).map_or(0.0, |(_, d)| (1.0 - d / r).max(0.0)),
            _ => 0.0,
        };
        Complex64::new(v, 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::super::{build_delone, golden_ratio, Region};
    use super::*;
    use crate::systems::sample_ball;

    fn fib(side: f64) -> DeloneSet {
        build_delone(&Construction::CutProject { beta: 0.0 }, &Region { side }).unwrap()
    }

    #[test]
    fn lattice_translate_by_period_is_same_point() {
        let set = build_delone(&Construction::Lattice { basis: vec![vec![1.0]] }, &Region { side: 200.0 }).unwrap();
        let h = hull_system(&set, 16.0).unwrap();
        let t = Point::Translate(vec![40.3]);
        assert_eq!(h.dist(&t, &Point::Translate(vec![41.3])), 0.0);
        assert!((h.dist(&t, &Point::Translate(vec![40.5])) - 0.2).abs() < 1e-9);
        assert_eq!(h.dist(&t, &t), 0.0);
    }

    #[test]
    fn square_lattice_periods() {
        let basis = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let set = build_delone(&Construction::Lattice { basis }, &Region { side: 40.0 }).unwrap();
        let h = hull_system(&set, 4.0).unwrap();
        let t = Point::Translate(vec![10.25, 11.5]);
        assert_eq!(h.dist(&t, &Point::Translate(vec![11.25, 11.5])), 0.0);
        assert_eq!(h.dist(&t, &Point::Translate(vec![10.25, 12.5])), 0.0);
        assert!((h.dist(&t, &Point::Translate(vec![10.35, 11.5])) - 0.1).abs() < 1e-9);
    }

    #[test]
    fn fibonacci_translates_are_separated() {
        let set = fib(800.0);
        let h = hull_system(&set, 32.0).unwrap();
        for k in 1..40 {
            let a = Point::Translate(vec![100.0 + 0.37 * k as f64]);
            let b = Point::Translate(vec![100.0 + 0.37 * k as f64 + 1.0 + golden_ratio() * k as f64]);
            assert!(h.dist(&a, &b) > 0.0);
        }
    }

    #[test]
    fn metric_axioms_on_sampled_triples() {
        let set = fib(600.0);
        let h = hull_system(&set, 16.0).unwrap();
        let pts: Vec<Point> = (0..24).map(|i| h.sample_mu(i)).collect();
        let near = sample_ball(&h, &pts[0], 0.05, 12, 3).unwrap();
        let all: Vec<&Point> = pts.iter().chain(&near).collect();
        for x in &all {
            assert_eq!(h.dist(x, x), 0.0);
            for y in &all {
                let d = h.dist(x, y);
                assert!((0.0..=1.0).contains(&d));
                assert_eq!(d, h.dist(y, x));
            }
        }
    }

    #[test]
    fn ball_samples_are_patch_returns() {
        let set = fib(2000.0);
        let h = hull_system(&set, 32.0).unwrap();
        let c = h.sample_mu(5);
        let ball = sample_ball(&h, &c, 0.1, 40, 9).unwrap();
        let t = coords(&c)[0];
        // some sampled translates come from far-away returns of the patch
        assert!(ball.iter().any(|p| (coords(p)[0] - t).abs() > 5.0));
        assert!(ball.iter().all(|p| h.dist(&c, p) <= 0.1));
    }

    #[test]
    fn window_beyond_budget_is_rejected() {
        let set = fib(300.0);
        let h = hull_system(&set, 32.0).unwrap();
        let w = crate::windows::Window::continuous(200.0, 0.5, 1).unwrap();
        let f = hull_bump(&set);
        assert!(crate::systems::orbit_series(&h, &f, &h.sample_mu(0), &w).is_err());
        assert!(hull_system(&set, 200.0).is_err());
    }

    #[test]
    fn bump_is_one_on_points() {
        let set = fib(100.0);
        let f = hull_bump(&set);
        let x = set.points[10].clone();
        assert!((f.eval(&Point::Translate(x.clone())).re - 1.0).abs() < 1e-12);
        let off = Point::Translate(vec![x[0] + set.r]);
        assert!(f.eval(&off).re.abs() < 1e-9);
    }
}
