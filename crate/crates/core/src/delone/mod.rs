//! Delone sets in `R^d`: constructions, the Delone property on a finite
//! patch, the hull as an `R^d` system, numerical diffraction, and the
//! crystalline / quasicrystalline / neither classification.

mod diffraction;
mod hull;
mod index;

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{self, SamplerParams, Verdict};
use crate::error::{invalid, Result};
use crate::rng;
use crate::windows::Schedule;

pub use diffraction::{diffraction, intensity, BraggPeak, DiffractionParams, DiffractionSpectrum};
pub use hull::{hull_bump, hull_system};
pub(crate) use index::{sup_dist, PointIndex};

/// Points closer than this (sup norm) are the same point.
pub const MATCH_TOL: f64 = 1e-6;

pub fn golden_ratio() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Construction {
    /// Integer combinations of the basis rows.
    Lattice { basis: Vec<Vec<f64>> },
    /// The Fibonacci model set `x_m = m + (1/phi) floor(m/phi + beta)`.
    CutProject {
        #[serde(default)]
        beta: f64,
    },
    /// Lattice points moved by i.i.d. uniform jitter in `[-amplitude, amplitude]^d`.
    Perturbed { basis: Vec<Vec<f64>>, amplitude: f64, seed: u64 },
    /// `round(intensity * volume)` i.i.d. uniform points.
    Poisson { intensity: f64, dim: usize, seed: u64 },
}

impl Construction {
    pub fn dim(&self) -> usize {
        match self {
            Construction::Lattice { basis } | Construction::Perturbed { basis, .. } => basis.len(),
            Construction::CutProject { .. } => 1,
            Construction::Poisson { dim, .. } => *dim,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Construction::Lattice { basis } => format!("lattice({basis:?})"),
            Construction::CutProject { beta } => format!("cut_project(fibonacci, beta={beta})"),
            Construction::Perturbed { basis, amplitude, seed } => {
                format!("perturbed({basis:?}, amplitude={amplitude}, seed={seed})")
            }
            Construction::Poisson { intensity, dim, seed } => {
                format!("poisson(intensity={intensity}, d={dim}, seed={seed})")
            }
        }
    }
}

/// The box `[0, side)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub side: f64,
}

#[derive(Debug, Clone)]
pub struct DeloneSet {
    pub dim: usize,
    pub side: f64,
    pub points: Vec<Vec<f64>>,
    /// Packing radius: half the least distance between points.
    pub r: f64,
    /// Covering radius estimated away from the boundary.
    pub big_r: f64,
    pub construction: Construction,
    pub(crate) index: Arc<PointIndex>,
}

impl DeloneSet {
    pub fn new(points: Vec<Vec<f64>>, side: f64, construction: Construction) -> Result<Self> {
        if points.is_empty() {
            return invalid("Delone construction produced no points");
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return invalid("points must share a positive dimension");
        }
        let mut points = points;
        points.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let volume = side.powi(dim as i32);
        let cell = (volume / points.len() as f64).powf(1.0 / dim as f64).max(1e-6);
        let index = Arc::new(PointIndex::new(&points, dim, cell));
        let mut set = Self { dim, side, points, r: 0.0, big_r: 0.0, construction, index };
        set.r = 0.5 * set.min_distance().0;
        let spacing = set.index_cell();
        set.big_r = set.largest_hole((4.0 * spacing).min(0.25 * side)).0;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Least pairwise sup distance and the midpoint of a closest pair.
    fn min_distance(&self) -> (f64, Vec<f64>) {
        let mut best = (f64::INFINITY, self.points[0].clone());
        if self.dim == 1 {
            for w in self.points.windows(2) {
                let d = w[1][0] - w[0][0];
                if d < best.0 {
                    best = (d, vec![0.5 * (w[0][0] + w[1][0])]);
                }
            }
            return best;
        }
        let probe = 4.0 * self.index_cell();
        for (i, p) in self.points.iter().enumerate() {
            for j in self.index.within(p, probe) {
                let q = self.index.point(j);
                let d = sup_dist(p, q);
                if i != j && d < best.0 {
                    best = (d, p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect());
                }
            }
        }
        best
    }

    fn index_cell(&self) -> f64 {
        (self.side.powi(self.dim as i32) / self.len() as f64).powf(1.0 / self.dim as f64)
    }

    /// Largest sup distance from a probe center in `[margin, side - margin]^d`
    /// to the set, with the center attaining it.
    fn largest_hole(&self, margin: f64) -> (f64, Vec<f64>) {
        let lo = margin;
        let hi = self.side - margin;
        if hi <= lo {
            return (0.0, vec![lo; self.dim]);
        }
        if self.dim == 1 {
            let mut best = (0.0, vec![lo]);
            let xs: Vec<f64> = self.points.iter().map(|p| p[0]).collect();
            let mut candidates = vec![lo, hi];
            for w in xs.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                if mid >= lo && mid <= hi {
                    candidates.push(mid);
                }
            }
            for c in candidates {
                let i = xs.partition_point(|x| *x < c);
                let mut d = f64::INFINITY;
                if i < xs.len() {
                    d = d.min(xs[i] - c);
                }
                if i > 0 {
                    d = d.min(c - xs[i - 1]);
                }
                if d > best.0 {
                    best = (d, vec![c]);
                }
            }
            return best;
        }
        let step = 0.25 * self.index_cell();
        let n = ((hi - lo) / step).ceil() as usize + 1;
        let mut best = (0.0, vec![lo; self.dim]);
        let total = n.pow(self.dim as u32);
        let mut c = vec![0.0; self.dim];
        for i in 0..total {
            let mut r = i;
            for k in (0..self.dim).rev() {
                c[k] = (lo + (r % n) as f64 * step).min(hi);
                r /= n;
            }
            let d = self.index.nearest(&c, self.side).map_or(f64::INFINITY, |(_, d)| d);
            if d > best.0 {
                best = (d, c.clone());
            }
        }
        best
    }

    /// One point per line, coordinates separated by spaces.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.points {
            let line: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str, side: f64, construction: Construction) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let p: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            match p {
                Ok(p) => points.push(p),
                Err(e) => return invalid(format!("line {}: {e}", n + 1)),
            }
        }
        Self::new(points, side, construction)
    }
}

fn lattice_points(basis: &[Vec<f64>], side: f64) -> Result<Vec<Vec<f64>>> {
    let d = basis.len();
    if d == 0 || basis.iter().any(|b| b.len() != d) {
        return invalid("lattice basis must be a square d x d matrix");
    }
    let inv = invert(basis).ok_or_else(|| crate::Error::InvalidArgument("lattice basis is singular".into()))?;
    // coefficient bounds from the box corners
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for corner in 0..(1usize << d) {
        let x: Vec<f64> = (0..d).map(|c| if corner >> c & 1 == 1 { side } else { 0.0 }).collect();
        for k in 0..d {
            let coef: f64 = (0..d).map(|c| x[c] * inv[c][k]).sum();
            lo[k] = lo[k].min(coef);
            hi[k] = hi[k].max(coef);
        }
    }
    let lo: Vec<i64> = lo.iter().map(|v| v.floor() as i64 - 1).collect();
    let hi: Vec<i64> = hi.iter().map(|v| v.ceil() as i64 + 1).collect();
    let count: i64 = lo.iter().zip(&hi).map(|(a, b)| b - a + 1).product();
    if count > 50_000_000 {
        return invalid("lattice region too large");
    }
    let mut out = Vec::new();
    let mut n = lo.clone();
    loop {
        let x: Vec<f64> = (0..d).map(|c| (0..d).map(|k| n[k] as f64 * basis[k][c]).sum()).collect();
        if x.iter().all(|v| *v >= -1e-9 && *v < side - 1e-9) {
            out.push(x.iter().map(|v| if v.abs() < 1e-9 { 0.0 } else { *v }).collect());
        }
        let mut c = d;
        loop {
            if c == 0 {
                return Ok(out);
            }
            c -= 1;
            if n[c] < hi[c] {
                n[c] += 1;
                break;
            }
            n[c] = lo[c];
        }
    }
}

/// Inverse of a small square matrix by Gauss-Jordan elimination.
fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let d = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().cloned().chain((0..d).map(|j| (i == j) as u8 as f64)).collect())
        .collect();
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..d {
            if r != col {
                let f = a[r][col];
                for c in 0..2 * d {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[d..].to_vec()).collect())
}

/// Builds the points of `construction` inside `region`.
pub fn build_delone(construction: &Construction, region: &Region) -> Result<DeloneSet> {
    let side = region.side;
    if !(side > 0.0) || !side.is_finite() {
        return invalid(format!("region side must be positive, got {side}"));
    }
    let points = match construction {
        Construction::Lattice { basis } => lattice_points(basis, side)?,
        Construction::CutProject { beta } => {
            if !(0.0..1.0).contains(beta) {
                return invalid(format!("cut-and-project offset beta must lie in [0, 1), got {beta}"));
            }
            let phi = golden_ratio();
            let mut pts = Vec::new();
            for m in 0.. {
                let x = m as f64 + ((m as f64 / phi + beta).floor()) / phi;
                if x >= side {
                    break;
                }
                pts.push(vec![x]);
            }
            pts
        }
        Construction::Perturbed { basis, amplitude, seed } => {
            if !(*amplitude >= 0.0) {
                return invalid("jitter amplitude must be non-negative");
            }
            let mut r = rng::chacha(*seed);
            lattice_points(basis, side)?
                .into_iter()
                .map(|p| {
                    p.into_iter()
                        .map(|v| if *amplitude > 0.0 { v + r.gen_range(-amplitude..=*amplitude) } else { v })
                        .collect()
                })
                .collect()
        }
        Construction::Poisson { intensity, dim, seed } => {
            if !(*intensity > 0.0) || *dim == 0 {
                return invalid("poisson construction needs positive intensity and dimension");
            }
            let n = (intensity * side.powi(*dim as i32)).round() as usize;
            let mut r = rng::chacha(*seed);
            (0..n).map(|_| (0..*dim).map(|_| r.gen::<f64>() * side).collect()).collect()
        }
    };
    DeloneSet::new(points, side, construction.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeloneCheck {
    pub ok: bool,
    /// Center of a ball violating one of the two radii.
    pub witness: Option<Vec<f64>>,
    pub reason: Option<String>,
    pub min_distance: f64,
    pub largest_hole: f64,
}

/// Every open `r`-ball holds at most one point and, away from a margin `R`
/// at the boundary, every closed `R`-ball holds at least one.
pub fn delone_check(set: &DeloneSet, r: f64, big_r: f64) -> Result<DeloneCheck> {
    if !(r > 0.0) || !(big_r > 0.0) {
        return invalid("radii must be positive");
    }
    if set.side <= 2.0 * big_r {
        return invalid("margin-adjusted region is empty");
    }
    let (dmin, mid) = set.min_distance();
    let (hole, center) = set.largest_hole(big_r);
    let mut out = DeloneCheck { ok: true, witness: None, reason: None, min_distance: dmin, largest_hole: hole };
    if dmin < 2.0 * r {
        out.ok = false;
        out.witness = Some(mid);
        out.reason = Some(format!("two points at distance {dmin} < 2r = {}", 2.0 * r));
    } else if hole > big_r {
        out.ok = false;
        out.witness = Some(center);
        out.reason = Some(format!("empty ball of radius {hole} > R = {big_r}"));
    }
    Ok(out)
}

/// Nonzero vectors `v` (among the shortest differences from a central
/// point) with `set + v = set` on the interior of the patch.
pub fn detect_periods(set: &DeloneSet, max_candidates: usize) -> Vec<Vec<f64>> {
    let center = vec![0.5 * set.side; set.dim];
    let Some((p0, _)) = set.index.nearest(&center, set.side) else { return Vec::new() };
    let p0 = set.index.point(p0).to_vec();
    let reach = 0.25 * set.side;
    let mut cands: Vec<Vec<f64>> = set
        .index
        .within(&p0, reach)
        .into_iter()
        .map(|j| set.index.point(j).iter().zip(&p0).map(|(a, b)| a - b).collect::<Vec<f64>>())
        .filter(|v| v.iter().any(|c| c.abs() > MATCH_TOL))
        .collect();
    cands.sort_by(|a, b| norm(a).total_cmp(&norm(b)).then(a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)));
    cands.truncate(max_candidates);
    let margin = reach + set.big_r.max(1.0);
    cands.into_iter().filter(|v| is_period(set, v, margin)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c.abs()).fold(0.0, f64::max)
}

fn is_period(set: &DeloneSet, v: &[f64], margin: f64) -> bool {
    let lo = margin;
    let hi = set.side - margin;
    if hi <= lo {
        return false;
    }
    set.points.iter().filter(|p| p.iter().all(|c| *c >= lo && *c <= hi)).all(|p| {
        let fwd: Vec<f64> = p.iter().zip(v).map(|(a, b)| a + b).collect();
        let back: Vec<f64> = p.iter().zip(v).map(|(a, b)| a - b).collect();
        set.index.has_near(&fwd, MATCH_TOL) && set.index.has_near(&back, MATCH_TOL)
    })
}

/// Rank of a set of vectors (Gaussian elimination with tolerance).
pub(crate) fn rank(vectors: &[Vec<f64>]) -> usize {
    let mut rows: Vec<Vec<f64>> = vectors.to_vec();
    let mut rank = 0;
    let d = rows.first().map_or(0, Vec::len);
    for col in 0..d {
        let Some(piv) = (rank..rows.len()).max_by(|&i, &j| rows[i][col].abs().total_cmp(&rows[j][col].abs())) else {
            break;
        };
        if rows[piv][col].abs() < 1e-9 {
            continue;
        }
        rows.swap(rank, piv);
        for r in 0..rows.len() {
            if r != rank {
                let f = rows[r][col] / rows[rank][col];
                for c in 0..d {
                    rows[r][c] -= f * rows[rank][c];
                }
            }
        }
        rank += 1;
    }
    rank
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeloneClass {
    Crystalline,
    Quasicrystalline,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeloneClassifyConfig {
    pub patch_radius: f64,
    pub sampler: SamplerParams,
    pub sched: Schedule,
    pub eps_grid: Vec<f64>,
    pub tau: f64,
    pub diffraction: DiffractionParams,
    pub point_fraction_threshold: f64,
    pub max_period_candidates: usize,
    /// Radii for the Delone check as multiples of the mean spacing
    /// `(volume / N)^(1/d)`.
    #[serde(default = "default_check_radii")]
    pub check_radii: [f64; 2],
}

fn default_check_radii() -> [f64; 2] {
    [0.1, 2.0]
}

impl DeloneClassifyConfig {
    /// Settings sized for a patch of side `side` in dimension `dim`.
    pub fn for_patch(dim: usize, side: f64) -> Self {
        let (sizes, mesh, patch_radius) =
            if dim == 1 { (vec![64.0, 128.0, 256.0], 0.25, 32.0) } else { (vec![4.0, 8.0, 16.0], 0.75, 4.0) };
        Self {
            patch_radius,
            sampler: SamplerParams {
                n_centers: 16,
                n_per_ball: 8,
                delta_list: (1..=5).map(|k| 2f64.powi(-k)).collect(),
                seed: 0,
            },
            sched: Schedule::with_mesh(sizes, 1, mesh).expect("valid"),
            eps_grid: (0..=4).rev().map(|k| 2f64.powi(-k)).collect(),
            tau: 0.05,
            diffraction: DiffractionParams::for_patch(dim, side),
            point_fraction_threshold: 0.9,
            max_period_candidates: 64,
            check_radii: default_check_radii(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeloneClassification {
    pub class: DeloneClass,
    pub check: DeloneCheck,
    pub periods: Vec<Vec<f64>>,
    pub period_rank: usize,
    /// Equicontinuity of the hull with the sup-over-time distance.
    pub plain: Verdict,
    /// Measure-relative mean equicontinuity of the hull with `d_b`.
    pub mu_mean: Verdict,
    pub diffraction: DiffractionSpectrum,
}

/// Crystalline when `d` independent exact periods exist and the hull is
/// equicontinuous; quasicrystalline when not crystalline, the hull is
/// `mu`-mean equicontinuous and the diffraction is essentially pure point;
/// neither otherwise, and always neither when the patch fails the Delone
/// check.
pub fn classify_delone(set: &DeloneSet, cfg: &DeloneClassifyConfig) -> Result<DeloneClassification> {
    let [cr, cbig] = cfg.check_radii;
    if !(cr > 0.0 && cbig > cr) {
        return invalid("check_radii must satisfy 0 < r < R");
    }
    let spacing = set.index_cell();
    let check = delone_check(set, cr * spacing, cbig * spacing)?;
    let hull = hull_system(set, cfg.patch_radius)?;
    let periods = detect_periods(set, cfg.max_period_candidates);
    let period_rank = rank(&periods);
    let (plain, mu_mean) =
        classify::plain_and_mu_equicontinuity_tests(&hull, cfg.tau, &cfg.eps_grid, &cfg.sampler, &cfg.sched)?;
    let diffraction = diffraction(set, &cfg.diffraction)?;
    let crystalline = period_rank == set.dim && plain.label == classify::Label::MeanEquicontinuous;
    let class = if !check.ok {
        DeloneClass::Neither
    } else if crystalline {
        DeloneClass::Crystalline
    } else if mu_mean.label == classify::Label::MeanEquicontinuous
        && diffraction.point_fraction >= cfg.point_fraction_threshold
    {
        DeloneClass::Quasicrystalline
    } else {
        DeloneClass::Neither
    };
    Ok(DeloneClassification { class, check, periods, period_rank, plain, mu_mean, diffraction })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_lattice() {
        let s = build_delone(&Construction::Lattice { basis: vec![vec![1.0]] }, &Region { side: 1000.0 }).unwrap();
        assert_eq!(s.len(), 1000);
        assert_eq!(s.r, 0.5);
        assert_eq!(s.big_r, 0.5);
        assert!(delone_check(&s, 0.4, 0.6).unwrap().ok);
    }

    #[test]
    fn square_lattice_points() {
        let s = build_delone(
            &Construction::Lattice { basis: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
            &Region { side: 10.0 },
        )
        .unwrap();
        assert_eq!(s.len(), 100);
        assert_eq!(rank(&detect_periods(&s, 16)), 2);
    }

    #[test]
    fn fibonacci_gaps() {
        let s = build_delone(&Construction::CutProject { beta: 0.0 }, &Region { side: 1000.0 }).unwrap();
        let phi = golden_ratio();
        let mut gaps: Vec<f64> = s.points.windows(2).map(|w| w[1][0] - w[0][0]).collect();
        gaps.sort_by(f64::total_cmp);
        let (short, long) = (gaps[0], *gaps.last().unwrap());
        assert!(gaps.iter().all(|g| (g - short).abs() < 1e-9 || (g - long).abs() < 1e-9));
        assert!((long / short - phi).abs() < 1e-6);
        assert!(delone_check(&s, 0.4, phi).unwrap().ok);
        assert!(detect_periods(&s, 64).is_empty());
    }

    #[test]
    fn poisson_fails_delone_check() {
        let s =
            build_delone(&Construction::Poisson { intensity: 1.0, dim: 1, seed: 7 }, &Region { side: 1000.0 }).unwrap();
        let c = delone_check(&s, 0.4, 1.0).unwrap();
        assert!(!c.ok);
        assert!(c.witness.is_some());
    }

    #[test]
    fn text_round_trip() {
        let s = build_delone(&Construction::CutProject { beta: 0.3 }, &Region { side: 50.0 }).unwrap();
        let t = DeloneSet::from_text(&s.to_text(), 50.0, s.construction.clone()).unwrap();
        assert_eq!(t.points, s.points);
    }

    #[test]
    fn invert_matrix() {
        let inv = invert(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!((inv[0][0] - 1.0).abs() < 1e-12 && (inv[0][1] + 1.0).abs() < 1e-12);
        assert!(invert(&[vec![1.0, 2.0], vec![2.0, 4.0]]).is_none());
    }
}
