//! Følner windows `[0, n)^d` over `Z^d` and `R^d`, the volume functional,
//! and density / syndeticity estimators built on top of them.
//!
//! Windows are half-open so the discrete point count is exactly `n^d`.
//! Continuous windows are discretized on a uniform grid of spacing `mesh`,
//! and volumes become Riemann sums `mesh^d * count`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const DEFAULT_MESH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    Discrete,
    Continuous,
}

/// An element of `Z^d` or `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupIndex {
    pub coords: Vec<f64>,
    pub kind: GroupKind,
}

impl GroupIndex {
    pub fn new(coords: Vec<f64>, kind: GroupKind) -> Result<Self> {
        if coords.is_empty() {
            return invalid("group index needs dimension >= 1");
        }
        if kind == GroupKind::Discrete && coords.iter().any(|c| c.fract() != 0.0) {
            return invalid(format!("discrete group index has non-integer coordinate: {coords:?}"));
        }
        Ok(Self { coords, kind })
    }

    pub fn zero(dim: usize, kind: GroupKind) -> Self {
        Self { coords: vec![0.0; dim.max(1)], kind }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn add(&self, other: &GroupIndex) -> GroupIndex {
        GroupIndex { coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(), kind: self.kind }
    }
}

/// The window `[0, n)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub n: f64,
    pub kind: GroupKind,
    /// Grid spacing for continuous windows; always 1 for discrete ones.
    pub mesh: f64,
    pub dim: usize,
}

impl Window {
    pub fn new(n: f64, kind: GroupKind, mesh: f64, dim: usize) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return invalid(format!("window side must be positive, got {n}"));
        }
        if dim == 0 {
            return invalid("window dimension must be >= 1");
        }
        match kind {
            GroupKind::Discrete => {
                if n.fract() != 0.0 {
                    return invalid(format!("discrete window side must be an integer, got {n}"));
                }
                Ok(Self { n, kind, mesh: 1.0, dim })
            }
            GroupKind::Continuous => {
                if !(mesh > 0.0) || !mesh.is_finite() {
                    return invalid(format!("mesh must be positive, got {mesh}"));
                }
                if mesh > n {
                    return invalid(format!("mesh {mesh} exceeds window side {n}"));
                }
                Ok(Self { n, kind, mesh, dim })
            }
        }
    }

    pub fn discrete(n: usize, dim: usize) -> Result<Self> {
        Self::new(n as f64, GroupKind::Discrete, 1.0, dim)
    }

    pub fn continuous(n: f64, mesh: f64, dim: usize) -> Result<Self> {
        Self::new(n, GroupKind::Continuous, mesh, dim)
    }

    /// Grid points along one axis.
    pub fn axis_count(&self) -> usize {
        axis_count(self.n, self.kind, self.mesh)
    }

    pub fn point_count(&self) -> usize {
        self.axis_count().pow(self.dim as u32)
    }

    /// `nu(F_n)`: cardinality for `Z^d`, Riemann volume `mesh^d * count` for `R^d`.
    pub fn volume(&self) -> f64 {
        match self.kind {
            GroupKind::Discrete => self.point_count() as f64,
            GroupKind::Continuous => self.mesh.powi(self.dim as i32) * self.point_count() as f64,
        }
    }
}

fn axis_count(n: f64, kind: GroupKind, mesh: f64) -> usize {
    match kind {
        GroupKind::Discrete => n as usize,
        GroupKind::Continuous => (n / mesh + 1e-9).floor() as usize,
    }
}

/// Enumerates `[0, n)^d` in lexicographic order together with `nu(w)`.
pub fn enumerate_window(w: &Window) -> Result<(Vec<GroupIndex>, f64)> {
    let w = Window::new(w.n, w.kind, w.mesh, w.dim)?;
    let axis = w.axis_count();
    let step = w.mesh;
    let total = w.point_count();
    let mut out = Vec::with_capacity(total);
    let mut buf = vec![0.0; w.dim];
    for i in 0..total {
        fill_coords(i, axis, w.dim, step, &mut buf);
        out.push(GroupIndex { coords: buf.clone(), kind: w.kind });
    }
    Ok((out, w.volume()))
}

fn fill_coords(mut i: usize, axis: usize, dim: usize, step: f64, buf: &mut [f64]) {
    for c in (0..dim).rev() {
        buf[c] = (i % axis) as f64 * step;
        i /= axis;
    }
}

/// Increasing window sides `n_1 < ... < n_K`; limsup/liminf are read off
/// the windows at index `burn_in` and above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub sizes: Vec<f64>,
    pub burn_in: usize,
    #[serde(default = "default_mesh")]
    pub mesh: f64,
}

fn default_mesh() -> f64 {
    DEFAULT_MESH
}

impl Schedule {
    pub fn new(sizes: Vec<f64>, burn_in: usize) -> Result<Self> {
        Self::with_mesh(sizes, burn_in, DEFAULT_MESH)
    }

    pub fn with_mesh(sizes: Vec<f64>, burn_in: usize, mesh: f64) -> Result<Self> {
        let s = Self { sizes, burn_in, mesh };
        s.validate()?;
        Ok(s)
    }

    /// `n_k = ceil(n_1 * 2^k)` for `k = 0..count`.
    pub fn geometric(n1: f64, count: usize, burn_in: usize) -> Result<Self> {
        let sizes = (0..count).map(|k| (n1 * 2f64.powi(k as i32)).ceil()).collect();
        Self::new(sizes, burn_in)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 {
            return invalid("schedule needs at least two window sizes");
        }
        if self.burn_in >= self.sizes.len() {
            return invalid(format!(
                "burn_in {} must be below the number of windows {}",
                self.burn_in,
                self.sizes.len()
            ));
        }
        if self.sizes.iter().any(|&n| !(n > 0.0) || !n.is_finite()) {
            return invalid("window sizes must be positive and finite");
        }
        if self.sizes.windows(2).any(|p| p[0] >= p[1]) {
            return invalid("window sizes must be strictly increasing");
        }
        if !(self.mesh > 0.0) {
            return invalid("mesh must be positive");
        }
        Ok(())
    }

    pub fn largest(&self) -> f64 {
        *self.sizes.last().expect("validated schedule")
    }

    pub fn windows(&self, kind: GroupKind, dim: usize) -> Result<Vec<Window>> {
        self.sizes.iter().map(|&n| Window::new(n, kind, self.mesh, dim)).collect()
    }

    pub fn largest_window(&self, kind: GroupKind, dim: usize) -> Result<Window> {
        Window::new(self.largest(), kind, self.mesh, dim)
    }
}

/// Lower and upper density read off a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub lower: f64,
    pub upper: f64,
    pub per_window: Vec<(f64, f64)>,
}

/// Flattened grid of the largest scheduled window, with each point tagged by
/// its shell (largest axis index) so that every smaller window is a prefix
/// union of shells.
#[derive(Debug, Clone)]
pub struct WindowLayout {
    pub dim: usize,
    pub kind: GroupKind,
    pub step: f64,
    /// Axis count of the largest window.
    pub axis: usize,
    /// Axis count of each scheduled window.
    pub window_axes: Vec<usize>,
    pub sizes: Vec<f64>,
    pub burn_in: usize,
}

impl WindowLayout {
    pub fn new(sched: &Schedule, kind: GroupKind, dim: usize) -> Result<Self> {
        sched.validate()?;
        let windows = sched.windows(kind, dim)?;
        let window_axes: Vec<usize> = windows.iter().map(Window::axis_count).collect();
        if window_axes.contains(&0) {
            return invalid("a scheduled window contains no grid points");
        }
        let step = windows[0].mesh;
        Ok(Self {
            dim,
            kind,
            step,
            axis: *window_axes.last().unwrap(),
            window_axes,
            sizes: sched.sizes.clone(),
            burn_in: sched.burn_in,
        })
    }

    pub fn len(&self) -> usize {
        self.axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn windows(&self) -> usize {
        self.window_axes.len()
    }

    pub fn coords(&self, i: usize, buf: &mut [f64]) {
        fill_coords(i, self.axis, self.dim, self.step, buf);
    }

    pub fn shell(&self, mut i: usize) -> usize {
        let mut m = 0;
        for _ in 0..self.dim {
            m = m.max(i % self.axis);
            i /= self.axis;
        }
        m
    }

    pub fn shells(&self) -> Vec<u32> {
        (0..self.len()).map(|i| self.shell(i) as u32).collect()
    }

    pub fn count(&self, k: usize) -> usize {
        self.window_axes[k].pow(self.dim as u32)
    }

    pub fn volume(&self, k: usize) -> f64 {
        match self.kind {
            GroupKind::Discrete => self.count(k) as f64,
            GroupKind::Continuous => self.step.powi(self.dim as i32) * self.count(k) as f64,
        }
    }

    /// Indices of the windows used for tail statistics.
    pub fn tail(&self) -> std::ops::Range<usize> {
        self.burn_in..self.windows()
    }

    /// Per-window means of `values` (indexed like the flattened grid).
    pub fn window_means(&self, values: &[f64]) -> Vec<f64> {
        let mut hist = vec![0.0; self.axis];
        for (i, v) in values.iter().enumerate() {
            hist[self.shell(i)] += v;
        }
        self.prefix_means(&hist, 0.0, |a, b| a + b, |s, c| s / c)
    }

    pub fn window_means_complex(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut hist = vec![Complex64::new(0.0, 0.0); self.axis];
        for (i, v) in values.iter().enumerate() {
            hist[self.shell(i)] += v;
        }
        self.prefix_means(&hist, Complex64::new(0.0, 0.0), |a, b| a + b, |s, c| s / c)
    }

    fn prefix_means<T: Copy>(&self, hist: &[T], zero: T, add: impl Fn(T, T) -> T, div: impl Fn(T, f64) -> T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.windows());
        let mut acc = zero;
        let mut shell = 0;
        for (k, &a) in self.window_axes.iter().enumerate() {
            while shell < a {
                acc = add(acc, hist[shell]);
                shell += 1;
            }
            out.push(div(acc, self.count(k) as f64));
        }
        out
    }
}

/// Ratios `nu(S ∩ F_n) / nu(F_n)` over the schedule; lower/upper are the
/// min/max of the post-burn-in ratios.
pub fn density<F>(indicator: F, sched: &Schedule, kind: GroupKind, dim: usize) -> Result<DensityEstimate>
where
    F: Fn(&GroupIndex) -> bool,
{
    let layout = WindowLayout::new(sched, kind, dim)?;
    let mut g = GroupIndex::zero(dim, kind);
    let values: Vec<f64> = (0..layout.len())
        .map(|i| {
            layout.coords(i, &mut g.coords);
            if indicator(&g) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let ratios = layout.window_means(&values);
    Ok(density_from_ratios(&layout, &ratios))
}

pub(crate) fn density_from_ratios(layout: &WindowLayout, ratios: &[f64]) -> DensityEstimate {
    let tail = &ratios[layout.tail()];
    let lower = tail.iter().cloned().fold(f64::INFINITY, f64::min).clamp(0.0, 1.0);
    let upper = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max).clamp(0.0, 1.0);
    DensityEstimate { lower, upper, per_window: layout.sizes.iter().cloned().zip(ratios.iter().cloned()).collect() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyndeticReport {
    pub syndetic: bool,
    /// Corner of an empty translate of `[0, k_side)^d`, when one exists.
    pub witness: Option<GroupIndex>,
    pub k_side: f64,
}

/// Checks that every translate of `[0, k_side)^d` inside the largest
/// scheduled window meets the set.
pub fn syndetic_probe<F>(
    indicator: F,
    k_side: f64,
    sched: &Schedule,
    kind: GroupKind,
    dim: usize,
) -> Result<SyndeticReport>
where
    F: Fn(&GroupIndex) -> bool,
{
    if !(k_side > 0.0) {
        return invalid(format!("K side must be positive, got {k_side}"));
    }
    let layout = WindowLayout::new(sched, kind, dim)?;
    if k_side > sched.largest() {
        return invalid(format!("K side {k_side} exceeds the largest window {}", sched.largest()));
    }
    let kc = ((k_side / layout.step) - 1e-9).ceil().max(1.0) as usize;
    let axis = layout.axis;
    if kc > axis {
        return invalid(format!("K side {k_side} exceeds the largest window grid"));
    }
    let mut g = GroupIndex::zero(dim, kind);
    let mask: Vec<u32> = (0..layout.len())
        .map(|i| {
            layout.coords(i, &mut g.coords);
            indicator(&g) as u32
        })
        .collect();
    let table = SummedArea::new(&mask, axis, dim);
    let corners = axis - kc + 1;
    let total = corners.pow(dim as u32);
    let mut lo = vec![0usize; dim];
    let mut witness = None;
    for i in 0..total {
        let mut r = i;
        for c in (0..dim).rev() {
            lo[c] = r % corners;
            r /= corners;
        }
        if table.box_sum(&lo, kc) == 0 {
            witness = Some(lo.clone());
        }
    }
    Ok(SyndeticReport {
        syndetic: witness.is_none(),
        witness: witness.map(|w| GroupIndex { coords: w.iter().map(|&c| c as f64 * layout.step).collect(), kind }),
        k_side,
    })
}

/// d-dimensional summed-area table over an `axis^d` grid.
struct SummedArea {
    table: Vec<u64>,
    side: usize,
    dim: usize,
}

impl SummedArea {
    fn new(mask: &[u32], axis: usize, dim: usize) -> Self {
        let side = axis + 1;
        let mut table = vec![0u64; side.pow(dim as u32)];
        let mut idx = vec![0usize; dim];
        for (i, &m) in mask.iter().enumerate() {
            let mut r = i;
            for c in (0..dim).rev() {
                idx[c] = r % axis + 1;
                r /= axis;
            }
            table[Self::flat(&idx, side)] = m as u64;
        }
        let stride: Vec<usize> = (0..dim).map(|c| side.pow((dim - 1 - c) as u32)).collect();
        for &s in &stride {
            for i in 0..table.len() {
                if (i / s) % side != 0 {
                    table[i] += table[i - s];
                }
            }
        }
        Self { table, side, dim }
    }

    fn flat(idx: &[usize], side: usize) -> usize {
        idx.iter().fold(0, |acc, &i| acc * side + i)
    }

    /// Sum over the cube `[lo, lo + k)`.
    fn box_sum(&self, lo: &[usize], k: usize) -> i64 {
        let mut total = 0i64;
        let mut corner = vec![0usize; self.dim];
        for mask in 0..(1usize << self.dim) {
            let mut sign = 1i64;
            for c in 0..self.dim {
                if mask >> c & 1 == 1 {
                    corner[c] = lo[c] + k;
                } else {
                    corner[c] = lo[c];
                    sign = -sign;
                }
            }
            total += sign * self.table[Self::flat(&corner, self.side)] as i64;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerate_small_windows() {
        let (pts, nu) = enumerate_window(&Window::discrete(3, 1).unwrap()).unwrap();
        let xs: Vec<f64> = pts.iter().map(|g| g.coords[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0]);
        assert_eq!(nu, 3.0);

        let (pts, nu) = enumerate_window(&Window::discrete(1, 2).unwrap()).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].coords, vec![0.0, 0.0]);
        assert_eq!(nu, 1.0);

        let (pts, nu) = enumerate_window(&Window::continuous(1.0, 0.25, 1).unwrap()).unwrap();
        let xs: Vec<f64> = pts.iter().map(|g| g.coords[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75]);
        assert!((nu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lexicographic_order_2d() {
        let (pts, _) = enumerate_window(&Window::discrete(2, 2).unwrap()).unwrap();
        let c: Vec<Vec<f64>> = pts.into_iter().map(|g| g.coords).collect();
        assert_eq!(c, vec![vec![0., 0.], vec![0., 1.], vec![1., 0.], vec![1., 1.]]);
    }

    #[test]
    fn window_errors() {
        assert!(Window::new(0.0, GroupKind::Discrete, 1.0, 1).is_err());
        assert!(Window::new(-1.0, GroupKind::Continuous, 0.1, 1).is_err());
        assert!(Window::new(1.0, GroupKind::Continuous, 0.0, 1).is_err());
        assert!(Window::new(1.0, GroupKind::Continuous, 2.0, 1).is_err());
        assert!(Window::new(2.5, GroupKind::Discrete, 1.0, 1).is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::new(vec![10.0], 0).is_err());
        assert!(Schedule::new(vec![10.0, 5.0], 0).is_err());
        assert!(Schedule::new(vec![10.0, 20.0], 2).is_err());
        let s = Schedule::geometric(100.0, 4, 1).unwrap();
        assert_eq!(s.sizes, vec![100.0, 200.0, 400.0, 800.0]);
    }

    #[test]
    fn density_of_even_integers() {
        // exact count ceil(n/2)/n
        let sched = Schedule::geometric(625.0, 5, 2).unwrap();
        let d = density(|g| g.coords[0] as i64 % 2 == 0, &sched, GroupKind::Discrete, 1).unwrap();
        for &(n, r) in &d.per_window {
            assert_eq!(r, (n / 2.0).ceil() / n);
        }
        assert!((d.lower - 0.5).abs() < 1e-3 && (d.upper - 0.5).abs() < 1e-3);
    }

    #[test]
    fn density_of_everything_and_squares() {
        let sched = Schedule::new(vec![100.0, 1000.0, 10000.0], 1).unwrap();
        let d = density(|_| true, &sched, GroupKind::Discrete, 1).unwrap();
        assert_eq!((d.lower, d.upper), (1.0, 1.0));
        let square = |g: &GroupIndex| {
            let n = g.coords[0] as u64;
            let r = (n as f64).sqrt() as u64;
            r * r == n || (r + 1) * (r + 1) == n
        };
        let d = density(square, &sched, GroupKind::Discrete, 1).unwrap();
        // sqrt(n)/n counting bound
        assert!(d.per_window.last().unwrap().1 <= 0.02);
        assert_eq!(d.per_window.last().unwrap().1, 100.0 / 10000.0);
    }

    #[test]
    fn continuous_density_half_line() {
        let sched = Schedule::with_mesh(vec![10.0, 20.0, 40.0], 0, 0.1).unwrap();
        let d = density(|g| g.coords[0].fract() < 0.5, &sched, GroupKind::Continuous, 1).unwrap();
        assert!((d.lower - 0.5).abs() <= 0.1 && (d.upper - 0.5).abs() <= 0.1);
    }

    #[test]
    fn syndetic_examples() {
        let sched = Schedule::new(vec![100.0, 10000.0], 0).unwrap();
        let even = |g: &GroupIndex| g.coords[0] as i64 % 2 == 0;
        assert!(syndetic_probe(even, 2.0, &sched, GroupKind::Discrete, 1).unwrap().syndetic);
        assert!(syndetic_probe(|_| true, 1.0, &sched, GroupKind::Discrete, 1).unwrap().syndetic);
        let square = |g: &GroupIndex| {
            let n = g.coords[0] as u64;
            let r = (n as f64).sqrt().round() as u64;
            r * r == n
        };
        let rep = syndetic_probe(square, 10.0, &sched, GroupKind::Discrete, 1).unwrap();
        assert!(!rep.syndetic);
        let w = rep.witness.unwrap().coords[0];
        assert!(w > 9000.0, "witness {w}");
        assert!(!square(&GroupIndex::new(vec![w], GroupKind::Discrete).unwrap()));
        assert!(syndetic_probe(even, 20000.0, &sched, GroupKind::Discrete, 1).is_err());
        assert!(syndetic_probe(even, 0.0, &sched, GroupKind::Discrete, 1).is_err());
    }

    #[test]
    fn syndetic_2d() {
        let sched = Schedule::new(vec![8.0, 16.0], 0).unwrap();
        let grid3 = |g: &GroupIndex| g.coords.iter().all(|c| *c as i64 % 3 == 0);
        assert!(syndetic_probe(grid3, 3.0, &sched, GroupKind::Discrete, 2).unwrap().syndetic);
        let rep = syndetic_probe(grid3, 2.0, &sched, GroupKind::Discrete, 2).unwrap();
        assert!(!rep.syndetic);
    }

    #[test]
    fn layout_shells_match_windows() {
        let sched = Schedule::new(vec![2.0, 4.0], 0).unwrap();
        let l = WindowLayout::new(&sched, GroupKind::Discrete, 2).unwrap();
        let ones = vec![1.0; l.len()];
        assert_eq!(l.window_means(&ones), vec![1.0, 1.0]);
        let inner: Vec<f64> = (0..l.len()).map(|i| (l.shell(i) < 2) as u8 as f64).collect();
        assert_eq!(l.window_means(&inner), vec![1.0, 4.0 / 16.0]);
    }
}
