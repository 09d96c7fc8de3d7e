use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Point, PointKind, System};
use crate::rng;
use crate::windows::GroupKind;

/// Circle distance on `R/Z`.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Rotation `x -> x + j alpha` on `T^D` (discrete time) or the linear flow
/// `x -> x + t alpha` (continuous time).
#[derive(Debug)]
pub(crate) struct TorusRotation {
    pub alpha: Vec<f64>,
    pub flow: bool,
}

impl TorusRotation {
    fn coords<'a>(&self, x: &'a Point) -> &'a [f64] {
        match x {
            Point::Torus(c) => c,
            other => panic!("torus system received {other:?}"),
        }
    }
}

impl System for TorusRotation {
    fn group_kind(&self) -> GroupKind {
        if self.flow {
            GroupKind::Continuous
        } else {
            GroupKind::Discrete
        }
    }

    fn group_dim(&self) -> usize {
        1
    }

    fn point_kind(&self) -> PointKind {
        PointKind::TorusPoint { dim: self.alpha.len() }
    }

    fn act(&self, g: &[f64], x: &Point) -> Point {
        let t = g[0];
        Point::Torus(self.coords(x).iter().zip(&self.alpha).map(|(c, a)| (c + t * a).rem_euclid(1.0)).collect())
    }

    fn dist(&self, x: &Point, y: &Point) -> f64 {
        self.coords(x).iter().zip(self.coords(y)).map(|(a, b)| circle_distance(*a, *b)).fold(0.0, f64::max)
    }

    fn diameter(&self) -> f64 {
        0.5
    }

    fn contains(&self, x: &Point) -> bool {
        matches!(x, Point::Torus(c) if c.len() == self.alpha.len() && c.iter().all(|v| (0.0..1.0).contains(v)))
    }

    fn sample_mu(&self, seed: u64) -> Point {
        let mut r = rng::chacha(seed);
        Point::Torus(self.alpha.iter().map(|_| r.gen::<f64>()).collect())
    }

    fn sample_near(&self, center: &Point, delta: f64, r: &mut ChaCha8Rng) -> Option<Point> {
        let h = delta.min(0.5);
        Some(Point::Torus(self.coords(center).iter().map(|c| (c + r.gen_range(-h..=h)).rem_euclid(1.0)).collect()))
    }
}

/// Accepts `alpha` when its continued-fraction expansion runs for `terms`
/// partial quotients without the remainder dropping below `tol`.
pub fn looks_irrational(alpha: f64, terms: usize, tol: f64) -> bool {
    if !alpha.is_finite() {
        return false;
    }
    let mut x = alpha.rem_euclid(1.0);
    for _ in 0..terms {
        if x < tol || 1.0 - x < tol {
            return false;
        }
        let inv = 1.0 / x;
        x = inv - inv.floor();
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn irrationality_guard() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!(looks_irrational(phi - 1.0, 40, 1e-12));
        assert!(looks_irrational(2f64.sqrt(), 20, 1e-12));
        assert!(!looks_irrational(0.5, 40, 1e-12));
        assert!(!looks_irrational(3.0 / 7.0, 40, 1e-12));
        assert!(!looks_irrational(0.0, 40, 1e-12));
    }

    #[test]
    fn circle_distance_wraps() {
        assert!((circle_distance(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert_eq!(circle_distance(0.0, 0.5), 0.5);
        assert_eq!(circle_distance(0.3, 0.3), 0.0);
    }
}
