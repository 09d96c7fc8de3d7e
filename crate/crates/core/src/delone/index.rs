use smallvec::SmallVec;

/// Coordinates kept inline for the usual `d <= 4`.
pub(crate) type Coords<T> = SmallVec<[T; 4]>;

/// Uniform cell grid over a point cloud in `R^d`, queried in the sup norm.
#[derive(Debug, Clone)]
pub(crate) struct PointIndex {
    dim: usize,
    cell: f64,
    lo: Vec<f64>,
    axis: Vec<usize>,
    start: Vec<u32>,
    items: Vec<u32>,
    coords: Vec<f64>,
}

impl PointIndex {
    pub fn new(points: &[Vec<f64>], dim: usize, cell: f64) -> Self {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in points {
            for c in 0..dim {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        if points.is_empty() {
            lo = vec![0.0; dim];
            hi = vec![0.0; dim];
        }
        let axis: Vec<usize> = (0..dim).map(|c| ((hi[c] - lo[c]) / cell).floor() as usize + 1).collect();
        let total: usize = axis.iter().product();
        let mut idx =
            Self { dim, cell, lo, axis, start: vec![0; total + 1], items: vec![0; points.len()], coords: Vec::new() };
        let cells: Vec<usize> = points.iter().map(|p| idx.flat(&idx.cell_of(p))).collect();
        for &c in &cells {
            idx.start[c + 1] += 1;
        }
        for i in 0..total {
            idx.start[i + 1] += idx.start[i];
        }
        let mut fill = idx.start.clone();
        for (i, &c) in cells.iter().enumerate() {
            idx.items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        idx.coords = points.iter().flat_map(|p| p.iter().cloned()).collect();
        idx
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn cell_of(&self, p: &[f64]) -> Coords<usize> {
        (0..self.dim)
            .map(|c| (((p[c] - self.lo[c]) / self.cell).floor().max(0.0) as usize).min(self.axis[c] - 1))
            .collect()
    }

    fn flat(&self, cell: &[usize]) -> usize {
        cell.iter().zip(&self.axis).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Calls `visit` for every point in the closed box `[lo, hi]`.
    pub fn for_each_in_box(&self, lo: &[f64], hi: &[f64], mut visit: impl FnMut(usize)) {
        self.try_each_in_box(lo, hi, |i| {
            visit(i);
            true
        });
    }

    /// As `for_each_in_box`, stopping once `visit` returns `false`.
    fn try_each_in_box(&self, lo: &[f64], hi: &[f64], mut visit: impl FnMut(usize) -> bool) {
        if self.items.is_empty() {
            return;
        }
        let mut a: Coords<usize> = SmallVec::from_elem(0, self.dim);
        let mut b: Coords<usize> = SmallVec::from_elem(0, self.dim);
        for c in 0..self.dim {
            if hi[c] < self.lo[c] || lo[c] > self.lo[c] + self.axis[c] as f64 * self.cell {
                return;
            }
            a[c] = (((lo[c] - self.lo[c]) / self.cell).floor().max(0.0) as usize).min(self.axis[c] - 1);
            b[c] = (((hi[c] - self.lo[c]) / self.cell).floor().max(0.0) as usize).min(self.axis[c] - 1);
        }
        let mut cur = a.clone();
        loop {
            let f = self.flat(&cur);
            for &i in &self.items[self.start[f] as usize..self.start[f + 1] as usize] {
                let p = self.point(i as usize);
                if (0..self.dim).all(|c| p[c] >= lo[c] && p[c] <= hi[c]) && !visit(i as usize) {
                    return;
                }
            }
            let mut c = self.dim;
            loop {
                if c == 0 {
                    return;
                }
                c -= 1;
                if cur[c] < b[c] {
                    cur[c] += 1;
                    break;
                }
                cur[c] = a[c];
            }
        }
    }

    /// Whether some point lies within `tol` (sup norm) of `y`.
    pub fn has_near(&self, y: &[f64], tol: f64) -> bool {
        let lo: Coords<f64> = y.iter().map(|v| v - tol).collect();
        let hi: Coords<f64> = y.iter().map(|v| v + tol).collect();
        let mut found = false;
        self.try_each_in_box(&lo, &hi, |_| {
            found = true;
            false
        });
        found
    }

    /// Points within sup distance `r` of `y`.
    pub fn within(&self, y: &[f64], r: f64) -> Vec<usize> {
        let lo: Coords<f64> = y.iter().map(|v| v - r).collect();
        let hi: Coords<f64> = y.iter().map(|v| v + r).collect();
        let mut out = Vec::new();
        self.for_each_in_box(&lo, &hi, |i| out.push(i));
        out
    }

    /// Nearest point to `y` in the sup norm, if one lies within `max_r`.
    pub fn nearest(&self, y: &[f64], max_r: f64) -> Option<(usize, f64)> {
        let mut r = self.cell;
        loop {
            let r_eff = r.min(max_r);
            let mut best: Option<(usize, f64)> = None;
            for i in self.within(y, r_eff) {
                let d = sup_dist(self.point(i), y);
                if best.is_none_or(|(_, b)| d < b) {
                    best = Some((i, d));
                }
            }
            if best.is_some() || r_eff >= max_r {
                return best;
            }
            r *= 2.0;
        }
    }
}

pub(crate) fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_queries_match_brute_force() {
        let pts: Vec<Vec<f64>> =
            (0..200).map(|i| vec![(i as f64 * 0.618).fract() * 20.0, (i as f64 * 0.414).fract() * 10.0]).collect();
        let idx = PointIndex::new(&pts, 2, 1.5);
        let y = [7.3, 4.1];
        let mut got = idx.within(&y, 2.0);
        got.sort_unstable();
        let want: Vec<usize> = (0..pts.len()).filter(|&i| sup_dist(&pts[i], &y) <= 2.0).collect();
        assert_eq!(got, want);
        let (n, d) = idx.nearest(&y, 100.0).unwrap();
        let best = pts.iter().map(|p| sup_dist(p, &y)).fold(f64::INFINITY, f64::min);
        assert_eq!(d, best);
        assert_eq!(sup_dist(&pts[n], &y), best);
        assert!(idx.nearest(&[1000.0, 1000.0], 5.0).is_none());
    }
}
