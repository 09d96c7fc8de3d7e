use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DeloneSet;
use crate::error::{invalid, Result};
use crate::spectral::{golden_max, is_local_max};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffractionParams {
    /// Frequency box `[k_lo, k_hi]^d`.
    pub k_lo: f64,
    pub k_hi: f64,
    /// Frequencies with `|k| < exclude` (sup norm) are left out.
    pub exclude: f64,
    /// Sides of the windows `[0, W)^d`, increasing.
    pub window_sizes: Vec<f64>,
    /// Grid step is `1 / (grid_factor * W)` for the largest `W`.
    pub grid_factor: f64,
    /// Candidates must exceed this multiple of the median grid intensity.
    pub peak_factor: f64,
    /// Accepted range of `(I_{i+1} / I_i) / (nu_{i+1} / nu_i)`.
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub max_candidates: usize,
}

impl DiffractionParams {
    pub fn for_patch(dim: usize, side: f64) -> Self {
        let (k_lo, k_hi) = if dim == 1 { (0.0, 1.5) } else { (-0.15, 1.1) };
        Self {
            k_lo,
            k_hi,
            exclude: 0.05,
            window_sizes: vec![side / 8.0, side / 4.0, side / 2.0, side],
            grid_factor: 2.0,
            peak_factor: 20.0,
            ratio_lo: 0.5,
            ratio_hi: 2.0,
            max_candidates: 256,
        }
    }

    fn validate(&self, set: &DeloneSet) -> Result<()> {
        if self.window_sizes.len() < 2 {
            return invalid("diffraction needs at least two window sizes");
        }
        if self.window_sizes.iter().any(|w| !(*w > 0.0) || *w > set.side * (1.0 + 1e-12))
            || self.window_sizes.windows(2).any(|p| p[1] <= p[0])
        {
            return invalid("window sizes must increase and fit inside the patch");
        }
        if !(self.k_hi > self.k_lo) || !(self.grid_factor >= 1.0) || !(self.exclude >= 0.0) {
            return invalid("degenerate frequency box");
        }
        if !(self.ratio_lo > 0.0 && self.ratio_hi >= self.ratio_lo) {
            return invalid("ratio bounds must satisfy 0 < lo <= hi");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BraggPeak {
    /// Position at the largest window.
    pub k: Vec<f64>,
    /// Locally maximized position in each window.
    pub positions: Vec<Vec<f64>>,
    pub intensities: Vec<f64>,
    /// Normalized growth between consecutive windows.
    pub growth: Vec<f64>,
    /// `I_W(k) / nu(W)` at the largest window.
    pub mass: f64,
    /// Largest position change between consecutive windows.
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffractionSpectrum {
    pub freqs: Vec<Vec<f64>>,
    /// `I_W(k)` on the grid at the largest window.
    pub intensities: Vec<f64>,
    pub is_peak: Vec<bool>,
    pub peaks: Vec<BraggPeak>,
    /// Candidates that failed the growth test.
    pub rejected: Vec<BraggPeak>,
    pub point_fraction: f64,
    pub total_intensity: f64,
    pub window_sizes: Vec<f64>,
}

impl DiffractionSpectrum {
    pub fn to_csv(&self) -> String {
        let d = self.freqs.first().map_or(1, Vec::len);
        let mut s: String = (0..d).map(|c| format!("k{c},")).collect();
        s.push_str("intensity,is_peak\n");
        for ((k, i), p) in self.freqs.iter().zip(&self.intensities).zip(&self.is_peak) {
            for c in k {
                s.push_str(&format!("{c},"));
            }
            s.push_str(&format!("{i},{}\n", *p as u8));
        }
        s
    }

    /// Largest drift over accepted peaks.
    pub fn max_drift(&self) -> f64 {
        self.peaks.iter().map(|p| p.drift).fold(0.0, f64::max)
    }
}

fn in_window(p: &[f64], w: f64) -> bool {
    p.iter().all(|c| *c >= 0.0 && *c < w)
}

/// `|sum_{x in Λ ∩ [0, w)^d} e^{-2 pi i <k, x>}|^2 / w^d`.
pub fn intensity(points: &[Vec<f64>], k: &[f64], w: f64) -> f64 {
    let refs: Vec<&Vec<f64>> = points.iter().collect();
    intensity_of(&refs, k, w)
}

fn intensity_of(points: &[&Vec<f64>], k: &[f64], w: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for p in points.iter().filter(|p| in_window(p, w)) {
        let phase: f64 = p.iter().zip(k).map(|(a, b)| a * b).sum();
        acc += Complex64::from_polar(1.0, -TAU * phase);
    }
    acc.norm_sqr() / w.powi(k.len() as i32)
}

struct Grid {
    dim: usize,
    lo: f64,
    step: f64,
    axis: usize,
}

impl Grid {
    fn len(&self) -> usize {
        self.axis.pow(self.dim as u32)
    }

    fn freq(&self, mut i: usize) -> Vec<f64> {
        let mut k = vec![0.0; self.dim];
        for c in (0..self.dim).rev() {
            k[c] = self.lo + (i % self.axis) as f64 * self.step;
            i /= self.axis;
        }
        k
    }

    fn nearest(&self, k: &[f64]) -> usize {
        k.iter().fold(0, |acc, c| {
            let j = (((c - self.lo) / self.step).round().max(0.0) as usize).min(self.axis - 1);
            acc * self.axis + j
        })
    }
}

/// Grid sums by phase recurrence, parallel over blocks of points and
/// combined in block order.
fn grid_sums(points: &[&Vec<f64>], g: &Grid) -> Vec<Complex64> {
    let n_axis = g.axis;
    let total = g.len();
    let chunk = 256;
    points
        .par_chunks(chunk)
        .map(|block| {
            let mut acc = vec![Complex64::new(0.0, 0.0); total];
            let mut rows: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n_axis]; g.dim];
            for p in block {
                for c in 0..g.dim {
                    let mut z = Complex64::from_polar(1.0, -TAU * g.lo * p[c]);
                    let w = Complex64::from_polar(1.0, -TAU * g.step * p[c]);
                    for v in rows[c].iter_mut() {
                        *v = z;
                        z *= w;
                    }
                }
                if g.dim == 1 {
                    for (a, z) in acc.iter_mut().zip(&rows[0]) {
                        *a += z;
                    }
                } else {
                    outer_add(&mut acc, &rows, n_axis);
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![Complex64::new(0.0, 0.0); total], |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        })
}

fn outer_add(acc: &mut [Complex64], rows: &[Vec<Complex64>], n: usize) {
    if rows.len() == 1 {
        for (a, z) in acc.iter_mut().zip(&rows[0]) {
            *a += z;
        }
        return;
    }
    let (head, rest) = rows.split_first().unwrap();
    let stride = n.pow(rest.len() as u32);
    for (i, h) in head.iter().enumerate() {
        let block = &mut acc[i * stride..(i + 1) * stride];
        if rest.len() == 1 {
            for (a, z) in block.iter_mut().zip(&rest[0]) {
                *a += h * z;
            }
        } else {
            let scaled: Vec<Vec<Complex64>> =
                std::iter::once(rest[0].iter().map(|z| h * z).collect()).chain(rest[1..].iter().cloned()).collect();
            outer_add(block, &scaled, n);
        }
    }
}

fn local_max(points: &[&Vec<f64>], start: &[f64], w: f64, half: f64) -> (Vec<f64>, f64) {
    let tol = (1e-3 / w).max(1e-12);
    let mut k = start.to_vec();
    let mut best = intensity_of(points, &k, w);
    let sweeps = if k.len() == 1 { 1 } else { 2 };
    for _ in 0..sweeps {
        for c in 0..k.len() {
            let center = k[c];
            let eval = |t: f64| {
                let mut q = k.clone();
                q[c] = t;
                intensity_of(points, &q, w)
            };
            let (t, m) = golden_max(eval, center - half, center + half, tol);
            if m > best {
                best = m;
                k[c] = t;
            }
        }
    }
    (k, best)
}

/// Numerical diffraction of `set` over nested windows `[0, W)^d`.
///
/// A local maximum of the largest-window grid is a Bragg peak when, after
/// re-maximizing in every window, its intensity grows in proportion to the
/// window volume between every pair of consecutive windows.
pub fn diffraction(set: &DeloneSet, params: &DiffractionParams) -> Result<DiffractionSpectrum> {
    params.validate(set)?;
    let d = set.dim;
    let sizes = &params.window_sizes;
    let w_max = *sizes.last().unwrap();
    let step = 1.0 / (params.grid_factor * w_max);
    let axis = ((params.k_hi - params.k_lo) / step).floor() as usize + 1;
    if axis.checked_pow(d as u32).is_none_or(|n| n > 50_000_000) {
        return invalid("frequency grid too large");
    }
    let grid = Grid { dim: d, lo: params.k_lo, step, axis };
    let largest: Vec<&Vec<f64>> = set.points.iter().filter(|p| in_window(p, w_max)).collect();
    let vol = w_max.powi(d as i32);
    let sums = grid_sums(&largest, &grid);
    let freqs: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.freq(i)).collect();
    let keep: Vec<bool> =
        freqs.iter().map(|k| k.iter().map(|c| c.abs()).fold(0.0, f64::max) >= params.exclude).collect();
    let intensities: Vec<f64> = sums.iter().map(|z| z.norm_sqr() / vol).collect();
    let masked: Vec<f64> = intensities.iter().zip(&keep).map(|(v, k)| if *k { *v } else { 0.0 }).collect();

    let mut kept_vals: Vec<f64> = masked.iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| *v).collect();
    kept_vals.sort_by(f64::total_cmp);
    let median = kept_vals.get(kept_vals.len() / 2).cloned().unwrap_or(0.0);
    let total_intensity: f64 = kept_vals.iter().sum::<f64>() * step.powi(d as i32);

    let counts = vec![axis; d];
    let mut cands: Vec<usize> = (0..grid.len())
        .filter(|&i| keep[i] && masked[i] > params.peak_factor * median && is_local_max(&masked, &counts, i))
        .collect();
    cands.sort_by(|&a, &b| masked[b].total_cmp(&masked[a]).then(a.cmp(&b)));
    let nms = 2.0 / sizes[0];
    let mut chosen: Vec<usize> = Vec::new();
    for i in cands {
        let k = &freqs[i];
        if chosen.iter().all(|&j| freqs[j].iter().zip(k).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > nms) {
            chosen.push(i);
            if chosen.len() >= params.max_candidates {
                break;
            }
        }
    }

    let per_window: Vec<Vec<&Vec<f64>>> =
        sizes.iter().map(|&w| largest.iter().filter(|p| in_window(p, w)).cloned().collect()).collect();
    let refined: Vec<BraggPeak> = chosen
        .par_iter()
        .map(|&i| {
            let mut positions = vec![Vec::new(); sizes.len()];
            let mut values = vec![0.0; sizes.len()];
            let mut start = freqs[i].clone();
            let mut half = step;
            for s in (0..sizes.len()).rev() {
                let (k, v) = local_max(&per_window[s], &start, sizes[s], half);
                positions[s] = k.clone();
                values[s] = v;
                start = k;
                half = 0.5 / sizes[s];
            }
            let growth: Vec<f64> = (0..sizes.len() - 1)
                .map(|s| {
                    let ratio = (sizes[s + 1] / sizes[s]).powi(d as i32);
                    if values[s] > 0.0 {
                        values[s + 1] / values[s] / ratio
                    } else {
                        f64::INFINITY
                    }
                })
                .collect();
            let drift = positions
                .windows(2)
                .map(|p| p[0].iter().zip(&p[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            let last = sizes.len() - 1;
            BraggPeak {
                k: positions[last].clone(),
                mass: values[last] / vol,
                positions,
                intensities: values,
                growth,
                drift,
            }
        })
        .collect();
    let (peaks, rejected): (Vec<BraggPeak>, Vec<BraggPeak>) = refined.into_iter().partition(|p| {
        p.growth.iter().all(|g| *g >= params.ratio_lo && *g <= params.ratio_hi)
            && p.k.iter().map(|c| c.abs()).fold(0.0, f64::max) >= params.exclude
    });
    let mass: f64 = peaks.iter().map(|p| p.mass).sum();
    let point_fraction = if total_intensity > 0.0 { (mass / total_intensity).clamp(0.0, 1.0) } else { 0.0 };
    let mut is_peak = vec![false; grid.len()];
    for p in &peaks {
        is_peak[grid.nearest(&p.k)] = true;
    }
    Ok(DiffractionSpectrum {
        freqs,
        intensities,
        is_peak,
        peaks,
        rejected,
        point_fraction,
        total_intensity,
        window_sizes: sizes.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::{build_delone, golden_ratio, Construction, Region};
    use super::*;

    #[test]
    fn integer_lattice_peaks_at_integers() {
        let set = build_delone(&Construction::Lattice { basis: vec![vec![1.0]] }, &Region { side: 2000.0 }).unwrap();
        let mut p = DiffractionParams::for_patch(1, 2000.0);
        p.k_hi = 2.5;
        let s = diffraction(&set, &p).unwrap();
        let ks: Vec<f64> = s.peaks.iter().map(|p| p.k[0]).collect();
        assert_eq!(ks.len(), 2, "{ks:?}");
        for k in ks {
            assert!((k - k.round()).abs() < 1e-4);
        }
        assert!(s.point_fraction >= 0.95, "{}", s.point_fraction);
    }

    #[test]
    fn grid_matches_direct_sum() {
        let set = build_delone(&Construction::CutProject { beta: 0.2 }, &Region { side: 300.0 }).unwrap();
        let p = DiffractionParams::for_patch(1, 300.0);
        let s = diffraction(&set, &p).unwrap();
        for i in [3usize, 100, 411] {
            let direct = intensity(&set.points, &s.freqs[i], 300.0);
            assert!((direct - s.intensities[i]).abs() < 1e-8 * (1.0 + direct));
        }
    }

    #[test]
    fn square_lattice_grid_matches_direct_sum() {
        let basis = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let set = build_delone(&Construction::Lattice { basis }, &Region { side: 40.0 }).unwrap();
        let s = diffraction(&set, &DiffractionParams::for_patch(2, 40.0)).unwrap();
        for i in [0usize, 77, 500] {
            let direct = intensity(&set.points, &s.freqs[i], 40.0);
            assert!((direct - s.intensities[i]).abs() < 1e-8 * (1.0 + direct));
        }
        assert_eq!(s.peaks.len(), 3);
        assert!(s.point_fraction >= 0.95, "{}", s.point_fraction);
    }

    #[test]
    fn fibonacci_peaks_lie_in_the_module() {
        let set = build_delone(&Construction::CutProject { beta: 0.0 }, &Region { side: 4000.0 }).unwrap();
        let s = diffraction(&set, &DiffractionParams::for_patch(1, 4000.0)).unwrap();
        let phi = golden_ratio();
        let density = 1.0 / (3.0 - phi);
        assert!(!s.peaks.is_empty());
        for p in s.peaks.iter().filter(|p| p.mass > 1e-3) {
            let k = p.k[0] / density;
            let hit = (-12i64..=12).any(|q| {
                let r = k - q as f64 / phi;
                (r - r.round()).abs() < 2e-3
            });
            assert!(hit, "peak at {} outside the module", p.k[0]);
        }
    }

    #[test]
    fn poisson_is_diffuse() {
        let set =
            build_delone(&Construction::Poisson { intensity: 1.0, dim: 1, seed: 4 }, &Region { side: 3000.0 }).unwrap();
        let s = diffraction(&set, &DiffractionParams::for_patch(1, 3000.0)).unwrap();
        assert!(s.point_fraction <= 0.1, "{}", s.point_fraction);
    }

    #[test]
    fn rejects_single_window() {
        let set = build_delone(&Construction::Lattice { basis: vec![vec![1.0]] }, &Region { side: 100.0 }).unwrap();
        let mut p = DiffractionParams::for_patch(1, 100.0);
        p.window_sizes = vec![100.0];
        assert!(diffraction(&set, &p).is_err());
    }
}
