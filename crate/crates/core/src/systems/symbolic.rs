use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Point, PointKind, System};
use crate::rng;
use crate::windows::{GroupKind, WindowLayout};

/// Deepest scan index looked at by the shift metric. Past it `2^-m`
/// underflows to zero anyway.
pub const SCAN_LIMIT: i64 = 1100;

/// Coordinates reachable within `SCAN_LIMIT` scan steps on either side.
const COORD_LIMIT: i64 = SCAN_LIMIT / 2 + 1;

/// Raw coordinates fixed to given symbols; used for points sampled inside a
/// cylinder around another point.
#[derive(Debug, PartialEq, Eq)]
pub struct Pinned {
    pub lo: i64,
    pub symbols: Vec<u8>,
}

/// A two-sided binary sequence with random access.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolPoint {
    /// i.i.d. Bernoulli(p) letters generated from a counter-based hash.
    Iid { seed: u64, p: f64, offset: i64, pinned: Option<Arc<Pinned>> },
    /// Mechanical (Sturmian) word `x_k = floor((k+1)a + t) - floor(k a + t)`.
    Mechanical { alpha: f64, theta: f64 },
    /// Shifted two-sided Thue-Morse fixed point.
    ThueMorse { offset: i64 },
}

impl SymbolPoint {
    pub fn symbol(&self, k: i64) -> u8 {
        match self {
            SymbolPoint::Iid { seed, p, offset, pinned } => {
                let i = offset + k;
                if let Some(pin) = pinned {
                    let rel = i - pin.lo;
                    if rel >= 0 && (rel as usize) < pin.symbols.len() {
                        return pin.symbols[rel as usize];
                    }
                }
                (rng::unit(*seed, i) < *p) as u8
            }
            SymbolPoint::Mechanical { alpha, theta } => mechanical(*alpha, *theta, k),
            SymbolPoint::ThueMorse { offset } => thue_morse(offset + k),
        }
    }

    pub fn shift(&self, j: i64) -> SymbolPoint {
        match self {
            SymbolPoint::Iid { seed, p, offset, pinned } => {
                SymbolPoint::Iid { seed: *seed, p: *p, offset: offset + j, pinned: pinned.clone() }
            }
            SymbolPoint::Mechanical { alpha, theta } => {
                SymbolPoint::Mechanical { alpha: *alpha, theta: (theta + j as f64 * alpha).rem_euclid(1.0) }
            }
            SymbolPoint::ThueMorse { offset } => SymbolPoint::ThueMorse { offset: offset + j },
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SymbolPoint::Iid { seed, offset, pinned, .. } => match pinned {
                Some(p) => {
                    format!("iid(seed={seed}, offset={offset}, pinned={}..{})", p.lo, p.lo + p.symbols.len() as i64)
                }
                None => format!("iid(seed={seed}, offset={offset})"),
            },
            SymbolPoint::Mechanical { theta, .. } => format!("mechanical(theta={theta:.12})"),
            SymbolPoint::ThueMorse { offset } => format!("thue_morse(offset={offset})"),
        }
    }
}

fn mechanical(alpha: f64, theta: f64, k: i64) -> u8 {
    let k = k as f64;
    (((k + 1.0) * alpha + theta).floor() - (k * alpha + theta).floor()) as u8
}

fn thue_morse(n: i64) -> u8 {
    let m = if n >= 0 { n as u64 } else { (-n - 1) as u64 };
    (m.count_ones() & 1) as u8
}

/// Position of coordinate `k` in the scan order `0, 1, -1, 2, -2, ...`.
pub fn scan_index(k: i64) -> i64 {
    if k > 0 {
        2 * k - 1
    } else {
        -2 * k
    }
}

/// Coordinate visited at scan position `m`.
fn scan_coord(m: i64) -> i64 {
    if m % 2 == 1 {
        (m + 1) / 2
    } else {
        -m / 2
    }
}

/// Shift metric `2^-m`, `m` the scan position of the first coordinate where
/// `x` and `y` differ.
pub fn shift_distance(x: &SymbolPoint, y: &SymbolPoint) -> f64 {
    if x == y {
        return 0.0;
    }
    for m in 0..=SCAN_LIMIT {
        let k = scan_coord(m);
        if x.symbol(k) != y.symbol(k) {
            return 2f64.powi(-(m as i32));
        }
    }
    0.0
}

/// Coordinates `lo..=hi` on which agreement is exactly the condition
/// `dist <= delta`; `None` when every point qualifies.
pub fn cylinder_window(delta: f64) -> Option<(i64, i64)> {
    if delta >= 1.0 {
        return None;
    }
    let m = ((1.0 / delta).log2().ceil() as i64).clamp(1, SCAN_LIMIT);
    Some((-(m - 1) / 2, m / 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubstitutionRule {
    Fibonacci,
    ThueMorse,
}

impl SubstitutionRule {
    fn image(self, letter: u8) -> &'static [u8] {
        match (self, letter) {
            (SubstitutionRule::Fibonacci, 0) => &[0, 1],
            (SubstitutionRule::Fibonacci, _) => &[0],
            (SubstitutionRule::ThueMorse, 0) => &[0, 1],
            (SubstitutionRule::ThueMorse, _) => &[1, 0],
        }
    }
}

/// Iterates the substitution from the letter `0` until the word has at
/// least `min_len` letters.
pub fn substitution_word(rule: SubstitutionRule, min_len: usize) -> Vec<u8> {
    let mut w = vec![0u8];
    while w.len() < min_len.max(1) {
        w = w.iter().flat_map(|&a| rule.image(a).iter().copied()).collect();
    }
    w
}

/// Frequency of the letter `1` in the Fibonacci word, `2 - phi`.
pub fn fibonacci_slope() -> f64 {
    2.0 - (1.0 + 5f64.sqrt()) / 2.0
}

#[derive(Debug)]
pub(crate) enum SymbolicRule {
    Bernoulli { p: f64 },
    Mechanical { alpha: f64 },
    ThueMorse,
}

#[derive(Debug)]
pub(crate) struct ShiftSystem {
    pub rule: SymbolicRule,
}

const TM_OFFSET_RANGE: i64 = 1 << 40;

impl ShiftSystem {
    fn unwrap<'a>(&self, x: &'a Point) -> &'a SymbolPoint {
        match x {
            Point::Symbolic(s) => s,
            other => panic!("shift system received a non-symbolic point {other:?}"),
        }
    }
}

impl System for ShiftSystem {
    fn group_kind(&self) -> GroupKind {
        GroupKind::Discrete
    }

    fn group_dim(&self) -> usize {
        1
    }

    fn point_kind(&self) -> PointKind {
        PointKind::SymbolSequence
    }

    fn act(&self, g: &[f64], x: &Point) -> Point {
        Point::Symbolic(self.unwrap(x).shift(g[0] as i64))
    }

    fn dist(&self, x: &Point, y: &Point) -> f64 {
        shift_distance(self.unwrap(x), self.unwrap(y))
    }

    fn diameter(&self) -> f64 {
        1.0
    }

    fn contains(&self, x: &Point) -> bool {
        match (x, &self.rule) {
            (Point::Symbolic(SymbolPoint::Iid { p, .. }), SymbolicRule::Bernoulli { p: q }) => p == q,
            (Point::Symbolic(SymbolPoint::Mechanical { alpha, .. }), SymbolicRule::Mechanical { alpha: a }) => {
                alpha == a
            }
            (Point::Symbolic(SymbolPoint::ThueMorse { .. }), SymbolicRule::ThueMorse) => true,
            _ => false,
        }
    }

    fn sample_mu(&self, seed: u64) -> Point {
        let mut r = rng::chacha(seed);
        Point::Symbolic(match self.rule {
            SymbolicRule::Bernoulli { p } => SymbolPoint::Iid { seed: r.gen(), p, offset: 0, pinned: None },
            SymbolicRule::Mechanical { alpha } => SymbolPoint::Mechanical { alpha, theta: r.gen::<f64>() },
            SymbolicRule::ThueMorse => {
                SymbolPoint::ThueMorse { offset: r.gen_range(-TM_OFFSET_RANGE..TM_OFFSET_RANGE) }
            }
        })
    }

    fn sample_near(&self, center: &Point, delta: f64, r: &mut ChaCha8Rng) -> Option<Point> {
        let c = self.unwrap(center);
        let Some((lo, hi)) = cylinder_window(delta) else {
            return Some(self.sample_mu(r.gen()));
        };
        let y = match c {
            SymbolPoint::Iid { p, offset, .. } => {
                let symbols = (lo..=hi).map(|k| c.symbol(k)).collect();
                let lo = offset + lo;
                SymbolPoint::Iid {
                    seed: r.gen(),
                    p: *p,
                    offset: *offset,
                    pinned: Some(Arc::new(Pinned { lo, symbols })),
                }
            }
            SymbolPoint::Mechanical { alpha, theta } => {
                let (below, above) = cylinder_arc(*alpha, *theta, lo, hi);
                let t = r.gen_range(-below..above) * 0.999_999;
                SymbolPoint::Mechanical { alpha: *alpha, theta: (theta + t).rem_euclid(1.0) }
            }
            SymbolPoint::ThueMorse { offset } => {
                // Shifting by a multiple of a block length 2^L > hi - lo + 1 keeps
                // the in-block words; the surrounding block parities are
                // checked by the caller's rejection step.
                let mut l = 1;
                while (1i64 << l) < hi - lo + 2 {
                    l += 1;
                }
                let q = r.gen_range(-(1i64 << 20)..(1i64 << 20));
                SymbolPoint::ThueMorse { offset: offset + (q << l) }
            }
        };
        let agree = (lo..=hi).all(|k| y.symbol(k) == c.symbol(k));
        agree.then_some(Point::Symbolic(y))
    }

    fn dist_series(&self, x: &Point, y: &Point, layout: &WindowLayout) -> Option<Vec<f64>> {
        if layout.dim != 1 || layout.kind != GroupKind::Discrete {
            return None;
        }
        let (x, y) = (self.unwrap(x), self.unwrap(y));
        let n = layout.axis as i64;
        if x == y {
            return Some(vec![0.0; n as usize]);
        }
        let lo = -COORD_LIMIT;
        let hi = n - 1 + COORD_LIMIT;
        let mismatch: Vec<bool> = (lo..=hi).map(|k| x.symbol(k) != y.symbol(k)).collect();
        Some(nearest_mismatch_distances(&mismatch, COORD_LIMIT as usize, n as usize))
    }
}

/// For each of the `n` positions (offset by `pad` inside `mismatch`), `2^-m`
/// where `m` is the scan index of the first mismatch seen from there, or 0
/// past `SCAN_LIMIT`.
fn nearest_mismatch_distances(mismatch: &[bool], pad: usize, n: usize) -> Vec<f64> {
    let len = mismatch.len();
    let mut left = vec![usize::MAX; len];
    let mut last = None;
    for i in 0..len {
        if mismatch[i] {
            last = Some(i);
        }
        if let Some(l) = last {
            left[i] = i - l;
        }
    }
    let mut right = vec![usize::MAX; len];
    let mut next = None;
    for i in (0..len).rev() {
        if mismatch[i] {
            next = Some(i);
        }
        if let Some(r) = next {
            right[i] = r - i;
        }
    }
    (0..n)
        .map(|j| {
            let (l, r) = (left[j + pad], right[j + pad]);
            let m = if r == 0 {
                0
            } else {
                let from_right = if r <= pad { 2 * r - 1 } else { usize::MAX };
                let from_left = if l <= pad { 2 * l } else { usize::MAX };
                from_right.min(from_left)
            };
            if m <= SCAN_LIMIT as usize {
                2f64.powi(-(m as i32))
            } else {
                0.0
            }
        })
        .collect()
}

/// Distances from `theta` to the nearest cut points below and above, where
/// the cuts are the intercepts at which one of the letters `lo..=hi`
/// changes.
fn cylinder_arc(alpha: f64, theta: f64, lo: i64, hi: i64) -> (f64, f64) {
    let mut below = 1.0f64;
    let mut above = 1.0f64;
    for k in lo..=hi {
        for base in [0.0, 1.0 - alpha] {
            let cut = (base - k as f64 * alpha).rem_euclid(1.0);
            let up = (cut - theta).rem_euclid(1.0);
            let down = (theta - cut).rem_euclid(1.0);
            if up > 0.0 {
                above = above.min(up);
            }
            if down > 0.0 {
                below = below.min(down);
            }
        }
    }
    (below, above)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_word_is_characteristic_mechanical_word() {
        let w = substitution_word(SubstitutionRule::Fibonacci, 2000);
        let a = fibonacci_slope();
        let p = SymbolPoint::Mechanical { alpha: a, theta: a };
        for (k, &c) in w.iter().enumerate().take(2000) {
            assert_eq!(p.symbol(k as i64), c, "position {k}");
        }
    }

    #[test]
    fn thue_morse_word_matches_popcount() {
        let w = substitution_word(SubstitutionRule::ThueMorse, 4096);
        let p = SymbolPoint::ThueMorse { offset: 0 };
        for (k, &c) in w.iter().enumerate() {
            assert_eq!(p.symbol(k as i64), c);
        }
        // two-sided extension is the mirror image
        assert_eq!(p.symbol(-1), p.symbol(0));
        assert_eq!(p.symbol(-6), p.symbol(5));
    }

    #[test]
    fn shift_metric_depth() {
        let x = SymbolPoint::Iid { seed: 1, p: 0.5, offset: 0, pinned: None };
        let pinned = Pinned { lo: -3, symbols: (-3..=3).map(|k| x.symbol(k)).collect() };
        let y = SymbolPoint::Iid { seed: 2, p: 0.5, offset: 0, pinned: Some(Arc::new(pinned)) };
        // coordinates -3..=3 are the scan positions 0..=6
        assert!(shift_distance(&x, &y) <= 2f64.powi(-7));
        assert_eq!(shift_distance(&x, &x), 0.0);
        assert_eq!(cylinder_window(0.125), Some((-1, 1)));
        assert_eq!(cylinder_window(0.25), Some((0, 1)));
        assert_eq!(cylinder_window(2.0), None);
        for m in 0..50 {
            assert_eq!(scan_index(scan_coord(m)), m);
        }
    }

    #[test]
    fn mismatch_transform_matches_scan() {
        let x = SymbolPoint::Iid { seed: 5, p: 0.5, offset: 0, pinned: None };
        let pinned = Pinned { lo: -20, symbols: (-20..=20).map(|k| x.symbol(k)).collect() };
        let y = SymbolPoint::Iid { seed: 9, p: 0.5, offset: 0, pinned: Some(Arc::new(pinned)) };
        let sys = ShiftSystem { rule: SymbolicRule::Bernoulli { p: 0.5 } };
        let sched = crate::windows::Schedule::new(vec![32.0, 64.0], 0).unwrap();
        let layout = WindowLayout::new(&sched, GroupKind::Discrete, 1).unwrap();
        let fast = sys.dist_series(&Point::Symbolic(x.clone()), &Point::Symbolic(y.clone()), &layout).unwrap();
        for (j, v) in fast.iter().enumerate() {
            let slow = shift_distance(&x.shift(j as i64), &y.shift(j as i64));
            assert_eq!(*v, slow, "j = {j}");
        }
    }

    #[test]
    fn mechanical_cylinder_sampling_agrees() {
        let sys = ShiftSystem { rule: SymbolicRule::Mechanical { alpha: fibonacci_slope() } };
        let c = sys.sample_mu(3);
        let mut r = rng::chacha(4);
        for m0 in [3, 40, 700] {
            let delta = 2f64.powi(-m0);
            let y = sys.sample_near(&c, delta, &mut r).expect("cylinder arc sampling is exact");
            assert!(sys.dist(&c, &y) <= delta);
        }
    }
}
