//! Built-in dynamical systems: point spaces, group actions, metrics and
//! measure samplers.

mod observables;
pub mod symbolic;
pub mod torus;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delone::{self, Construction, Region};
use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::windows::{enumerate_window, GroupIndex, GroupKind, Window, WindowLayout};

pub use observables::{Domain, Observable};
pub use symbolic::{SubstitutionRule, SymbolPoint};

/// Continued-fraction length and tolerance used to reject rational rotations.
pub const IRRATIONALITY_TERMS: usize = 40;
pub const IRRATIONALITY_TOL: f64 = 1e-12;

/// Attempts per point before [`sample_ball`] gives up.
pub const MAX_BALL_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Torus(Vec<f64>),
    Symbolic(SymbolPoint),
    /// A translation parameter `t` of a Delone hull, standing for `Λ - t`.
    Translate(Vec<f64>),
    Product(Box<Point>, Box<Point>),
}

impl Point {
    pub fn describe(&self) -> String {
        match self {
            Point::Torus(c) => format!("torus{c:?}"),
            Point::Symbolic(s) => s.describe(),
            Point::Translate(t) => format!("translate{t:?}"),
            Point::Product(a, b) => format!("({}, {})", a.describe(), b.describe()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    TorusPoint { dim: usize },
    SymbolSequence,
    DelonePatch { dim: usize },
    Product(Box<PointKind>, Box<PointKind>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnownClass {
    DiscreteSpectrum,
    WeaklyMixing,
    Unknown,
}

/// A topological dynamical system with an invariant measure sampler.
pub trait System: Send + Sync + fmt::Debug {
    fn group_kind(&self) -> GroupKind;
    fn group_dim(&self) -> usize;
    fn point_kind(&self) -> PointKind;
    fn act(&self, g: &[f64], x: &Point) -> Point;
    fn dist(&self, x: &Point, y: &Point) -> f64;
    fn diameter(&self) -> f64;
    /// Whether `x` is a point this system can act on.
    fn contains(&self, x: &Point) -> bool;
    fn sample_mu(&self, seed: u64) -> Point;
    /// One candidate near `center`; the caller re-checks the distance.
    fn sample_near(&self, center: &Point, delta: f64, rng: &mut ChaCha8Rng) -> Option<Point>;

    /// `dist(T^g x, T^g y)` over a layout, when the system has a faster
    /// route than acting point by point.
    fn dist_series(&self, _x: &Point, _y: &Point, _layout: &WindowLayout) -> Option<Vec<f64>> {
        None
    }

    /// Largest coordinate of a group element that may be applied to a
    /// sampled point. Finite for systems built from a finite patch.
    fn time_budget(&self) -> f64 {
        f64::INFINITY
    }
}

#[derive(Clone)]
pub struct SystemHandle {
    inner: Arc<dyn System>,
    pub tag: String,
    pub known_class: KnownClass,
}

impl fmt::Debug for SystemHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemHandle")
            .field("tag", &self.tag)
            .field("known_class", &self.known_class)
            .field("system", &self.inner)
            .finish()
    }
}

impl SystemHandle {
    pub fn new(inner: Arc<dyn System>, tag: impl Into<String>, known_class: KnownClass) -> Self {
        Self { inner, tag: tag.into(), known_class }
    }

    pub fn system(&self) -> &dyn System {
        &*self.inner
    }

    pub fn group_kind(&self) -> GroupKind {
        self.inner.group_kind()
    }

    pub fn group_dim(&self) -> usize {
        self.inner.group_dim()
    }

    pub fn point_kind(&self) -> PointKind {
        self.inner.point_kind()
    }

    pub fn act(&self, g: &GroupIndex, x: &Point) -> Point {
        self.inner.act(&g.coords, x)
    }

    pub fn dist(&self, x: &Point, y: &Point) -> f64 {
        self.inner.dist(x, y)
    }

    pub fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.inner.contains(x)
    }

    pub fn sample_mu(&self, seed: u64) -> Point {
        self.inner.sample_mu(seed)
    }

    pub(crate) fn check_point(&self, x: &Point) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            invalid(format!("point {} does not belong to system {}", x.describe(), self.tag))
        }
    }

    pub(crate) fn check_observable(&self, f: &Observable) -> Result<()> {
        if f.accepts(&self.point_kind()) {
            Ok(())
        } else {
            invalid(format!("observable {} is not defined on the points of {}", f.tag, self.tag))
        }
    }
}

/// Declarative description of a built-in system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    TorusRotation {
        alpha: Vec<f64>,
        /// Continuous-time linear flow instead of the discrete rotation.
        #[serde(default)]
        flow: bool,
    },
    BernoulliShift {
        p: f64,
        #[serde(default = "default_alphabet")]
        alphabet: Vec<String>,
    },
    SubstitutionSubshift {
        rule: SubstitutionRule,
    },
    Sturmian {
        alpha: f64,
    },
    DeloneHull {
        construction: Construction,
        region: Region,
        patch_radius: f64,
    },
    Product {
        left: Box<SystemSpec>,
        right: Box<SystemSpec>,
    },
}

fn default_alphabet() -> Vec<String> {
    vec!["0".into(), "1".into()]
}

/// All tags accepted by [`SystemSpec`].
pub const SYSTEM_TAGS: &[&str] =
    &["bernoulli_shift", "delone_hull", "product", "sturmian", "substitution_subshift", "torus_rotation"];

pub fn make_system(spec: &SystemSpec) -> Result<SystemHandle> {
    match spec {
        SystemSpec::TorusRotation { alpha, flow } => {
            if alpha.is_empty() {
                return invalid("torus_rotation needs at least one coordinate");
            }
            for &a in alpha {
                if !torus::looks_irrational(a, IRRATIONALITY_TERMS, IRRATIONALITY_TOL) {
                    return invalid(format!("rotation number {a} is rational within tolerance"));
                }
            }
            let inner = torus::TorusRotation { alpha: alpha.iter().map(|a| a.rem_euclid(1.0)).collect(), flow: *flow };
            let tag =
                format!("torus_rotation(d={}, alpha={alpha:?}{})", alpha.len(), if *flow { ", flow" } else { "" });
            Ok(SystemHandle::new(Arc::new(inner), tag, KnownClass::DiscreteSpectrum))
        }
        SystemSpec::BernoulliShift { p, alphabet } => {
            if !(*p > 0.0 && *p < 1.0) {
                return invalid(format!("bernoulli parameter must lie in (0, 1), got {p}"));
            }
            if alphabet.len() != 2 || alphabet[0] == alphabet[1] {
                return invalid("bernoulli_shift needs an alphabet of two distinct letters");
            }
            let inner = symbolic::ShiftSystem { rule: symbolic::SymbolicRule::Bernoulli { p: *p } };
            let tag = format!("bernoulli_shift(p={p}, alphabet={alphabet:?})");
            Ok(SystemHandle::new(Arc::new(inner), tag, KnownClass::WeaklyMixing))
        }
        SystemSpec::SubstitutionSubshift { rule } => {
            let (inner, class) = match rule {
                SubstitutionRule::Fibonacci => (
                    symbolic::ShiftSystem {
                        rule: symbolic::SymbolicRule::Mechanical { alpha: symbolic::fibonacci_slope() },
                    },
                    KnownClass::DiscreteSpectrum,
                ),
                // Thue-Morse has a continuous spectral component, so neither label applies.
                SubstitutionRule::ThueMorse => {
                    (symbolic::ShiftSystem { rule: symbolic::SymbolicRule::ThueMorse }, KnownClass::Unknown)
                }
            };
            let tag = format!("substitution_subshift({})", rule_name(*rule));
            Ok(SystemHandle::new(Arc::new(inner), tag, class))
        }
        SystemSpec::Sturmian { alpha } => {
            let a = alpha.rem_euclid(1.0);
            if !torus::looks_irrational(a, IRRATIONALITY_TERMS, IRRATIONALITY_TOL) {
                return invalid(format!("sturmian slope {alpha} is rational within tolerance"));
            }
            let inner = symbolic::ShiftSystem { rule: symbolic::SymbolicRule::Mechanical { alpha: a } };
            Ok(SystemHandle::new(Arc::new(inner), format!("sturmian(alpha={alpha})"), KnownClass::DiscreteSpectrum))
        }
        SystemSpec::DeloneHull { construction, region, patch_radius } => {
            let set = delone::build_delone(construction, region)?;
            delone::hull_system(&set, *patch_radius)
        }
        SystemSpec::Product { left, right } => {
            let l = make_system(left)?;
            let r = make_system(right)?;
            if l.group_kind() != r.group_kind() || l.group_dim() != r.group_dim() {
                return invalid(format!("product factors act by different groups: {} and {}", l.tag, r.tag));
            }
            let class = match (l.known_class, r.known_class) {
                (KnownClass::WeaklyMixing, KnownClass::WeaklyMixing) => KnownClass::WeaklyMixing,
                // Products of ergodic rotations are rotations; ergodicity of the
                // product is not checked here.
                (KnownClass::DiscreteSpectrum, KnownClass::DiscreteSpectrum) => KnownClass::DiscreteSpectrum,
                _ => KnownClass::Unknown,
            };
            let tag = format!("product({}, {})", l.tag, r.tag);
            Ok(SystemHandle::new(Arc::new(ProductSystem { left: l.inner, right: r.inner }), tag, class))
        }
    }
}

/// Declarative description of a built-in observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Constant {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Character {
        k: Vec<i64>,
    },
    CosCoordinate {
        coord: usize,
    },
    ArcIndicator {
        coord: usize,
        lo: f64,
        hi: f64,
    },
    Symbol {
        index: i64,
    },
    CenteredSymbol {
        index: i64,
        mean: f64,
    },
    Spin {
        index: i64,
    },
    Cylinder {
        word: Vec<u8>,
        #[serde(default)]
        at: i64,
    },
    SymbolWindow {
        radius: i64,
    },
    HullBump,
    Left {
        inner: Box<ObservableSpec>,
    },
    Right {
        inner: Box<ObservableSpec>,
    },
    Scaled {
        inner: Box<ObservableSpec>,
        re: f64,
        #[serde(default)]
        im: f64,
    },
}

/// All tags accepted by [`ObservableSpec`].
pub const OBSERVABLE_TAGS: &[&str] = &[
    "arc_indicator",
    "centered_symbol",
    "character",
    "constant",
    "cos_coordinate",
    "cylinder",
    "hull_bump",
    "left",
    "right",
    "scaled",
    "spin",
    "symbol",
    "symbol_window",
];

/// Builds `spec` for use on the system described by `system`.
pub fn make_observable(spec: &ObservableSpec, system: &SystemSpec) -> Result<Observable> {
    let finite = |v: f64, what: &str| if v.is_finite() { Ok(()) } else { invalid(format!("{what} must be finite")) };
    let f = match spec {
        ObservableSpec::Constant { re, im } => {
            finite(*re, "re")?;
            finite(*im, "im")?;
            Observable::constant(Complex64::new(*re, *im))
        }
        ObservableSpec::Character { k } => {
            if k.is_empty() {
                return invalid("character needs a non-empty frequency vector");
            }
            Observable::character(k.clone())
        }
        ObservableSpec::CosCoordinate { coord } => Observable::cos_coordinate(*coord),
        ObservableSpec::ArcIndicator { coord, lo, hi } => {
            if !(0.0 <= *lo && lo < hi && *hi <= 1.0) {
                return invalid(format!("arc [{lo}, {hi}) must satisfy 0 <= lo < hi <= 1"));
            }
            Observable::arc_indicator(*coord, *lo, *hi)
        }
        ObservableSpec::Symbol { index } => Observable::symbol(*index),
        ObservableSpec::CenteredSymbol { index, mean } => {
            finite(*mean, "mean")?;
            Observable::centered_symbol(*index, *mean)
        }
        ObservableSpec::Spin { index } => Observable::spin(*index),
        ObservableSpec::Cylinder { word, at } => {
            if word.is_empty() || word.iter().any(|w| *w > 1) {
                return invalid("cylinder word must be a non-empty string of 0/1 letters");
            }
            Observable::cylinder(word.clone(), *at)
        }
        ObservableSpec::SymbolWindow { radius } => {
            if *radius < 0 {
                return invalid("symbol_window radius must be non-negative");
            }
            Observable::symbol_window(*radius)
        }
        ObservableSpec::HullBump => match system {
            SystemSpec::DeloneHull { construction, region, .. } => {
                delone::hull_bump(&delone::build_delone(construction, region)?)
            }
            _ => return invalid("hull_bump needs a delone_hull system"),
        },
        ObservableSpec::Left { inner } => match system {
            SystemSpec::Product { left, .. } => Observable::on_left(make_observable(inner, left)?),
            _ => return invalid("left needs a product system"),
        },
        ObservableSpec::Right { inner } => match system {
            SystemSpec::Product { right, .. } => Observable::on_right(make_observable(inner, right)?),
            _ => return invalid("right needs a product system"),
        },
        ObservableSpec::Scaled { inner, re, im } => {
            finite(*re, "re")?;
            finite(*im, "im")?;
            make_observable(inner, system)?.scaled(Complex64::new(*re, *im))
        }
    };
    Ok(f)
}

fn rule_name(rule: SubstitutionRule) -> &'static str {
    match rule {
        SubstitutionRule::Fibonacci => "fibonacci",
        SubstitutionRule::ThueMorse => "thue_morse",
    }
}

#[derive(Debug)]
struct ProductSystem {
    left: Arc<dyn System>,
    right: Arc<dyn System>,
}

fn split(x: &Point) -> (&Point, &Point) {
    match x {
        Point::Product(a, b) => (a, b),
        other => panic!("product system received {other:?}"),
    }
}

impl System for ProductSystem {
    fn group_kind(&self) -> GroupKind {
        self.left.group_kind()
    }

    fn group_dim(&self) -> usize {
        self.left.group_dim()
    }

    fn point_kind(&self) -> PointKind {
        PointKind::Product(Box::new(self.left.point_kind()), Box::new(self.right.point_kind()))
    }

    fn act(&self, g: &[f64], x: &Point) -> Point {
        let (a, b) = split(x);
        Point::Product(Box::new(self.left.act(g, a)), Box::new(self.right.act(g, b)))
    }

    fn dist(&self, x: &Point, y: &Point) -> f64 {
        let (xa, xb) = split(x);
        let (ya, yb) = split(y);
        self.left.dist(xa, ya).max(self.right.dist(xb, yb))
    }

    fn diameter(&self) -> f64 {
        self.left.diameter().max(self.right.diameter())
    }

    fn contains(&self, x: &Point) -> bool {
        match x {
            Point::Product(a, b) => self.left.contains(a) && self.right.contains(b),
            _ => false,
        }
    }

    fn sample_mu(&self, seed: u64) -> Point {
        Point::Product(
            Box::new(self.left.sample_mu(rng::derive(seed, &[1]))),
            Box::new(self.right.sample_mu(rng::derive(seed, &[2]))),
        )
    }

    fn sample_near(&self, center: &Point, delta: f64, r: &mut ChaCha8Rng) -> Option<Point> {
        let (a, b) = split(center);
        let a2 = self.left.sample_near(a, delta, r).filter(|p| self.left.dist(a, p) <= delta)?;
        let b2 = self.right.sample_near(b, delta, r).filter(|p| self.right.dist(b, p) <= delta)?;
        Some(Point::Product(Box::new(a2), Box::new(b2)))
    }

    fn time_budget(&self) -> f64 {
        self.left.time_budget().min(self.right.time_budget())
    }

    fn dist_series(&self, x: &Point, y: &Point, layout: &WindowLayout) -> Option<Vec<f64>> {
        let (xa, xb) = split(x);
        let (ya, yb) = split(y);
        let l = dist_series_on_layout(&*self.left, xa, ya, layout);
        let r = dist_series_on_layout(&*self.right, xb, yb, layout);
        Some(l.into_iter().zip(r).map(|(a, b)| a.max(b)).collect())
    }
}

/// The values of `f` along an orbit window.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSeries {
    pub values: Vec<Complex64>,
    pub window: Window,
}

fn check_window(s: &SystemHandle, kind: GroupKind, dim: usize) -> Result<()> {
    if kind != s.group_kind() {
        return invalid(format!("window kind {kind:?} does not match the {:?} action of {}", s.group_kind(), s.tag));
    }
    if dim != s.group_dim() {
        return invalid(format!(
            "window dimension {dim} does not match the group dimension {} of {}",
            s.group_dim(),
            s.tag
        ));
    }
    Ok(())
}

pub(crate) fn check_layout(s: &SystemHandle, layout: &WindowLayout) -> Result<()> {
    check_window(s, layout.kind, layout.dim)?;
    let reach = layout.sizes.iter().cloned().fold(0.0, f64::max);
    let budget = s.inner.time_budget();
    if reach > budget {
        return invalid(format!("window side {reach} exceeds the usable extent {budget} of {}", s.tag));
    }
    Ok(())
}

/// `f(T^{g_i} x)` for the enumerated points `g_i` of `w`.
pub fn orbit_series(s: &SystemHandle, f: &Observable, x: &Point, w: &Window) -> Result<OrbitSeries> {
    check_window(s, w.kind, w.dim)?;
    if w.n > s.inner.time_budget() {
        return invalid(format!(
            "window side {} exceeds the usable extent {} of {}",
            w.n,
            s.inner.time_budget(),
            s.tag
        ));
    }
    s.check_observable(f)?;
    s.check_point(x)?;
    let (points, _) = enumerate_window(w)?;
    let values = points.iter().map(|g| f.eval(&s.act(g, x))).collect();
    Ok(OrbitSeries { values, window: w.clone() })
}

/// `f(T^g x)` over every point of a layout.
pub(crate) fn series_on_layout(s: &dyn System, f: &Observable, x: &Point, layout: &WindowLayout) -> Vec<Complex64> {
    let mut g = vec![0.0; layout.dim];
    (0..layout.len())
        .map(|i| {
            layout.coords(i, &mut g);
            f.eval(&s.act(&g, x))
        })
        .collect()
}

/// `dist(T^g x, T^g y)` over every point of a layout.
pub(crate) fn dist_series_on_layout(s: &dyn System, x: &Point, y: &Point, layout: &WindowLayout) -> Vec<f64> {
    if let Some(v) = s.dist_series(x, y, layout) {
        return v;
    }
    let mut g = vec![0.0; layout.dim];
    (0..layout.len())
        .map(|i| {
            layout.coords(i, &mut g);
            s.dist(&s.act(&g, x), &s.act(&g, y))
        })
        .collect()
}

/// `count` points within `delta` of `center`. When `delta` covers the whole
/// space these are plain `mu`-samples.
pub fn sample_ball(s: &SystemHandle, center: &Point, delta: f64, count: usize, seed: u64) -> Result<Vec<Point>> {
    if !(delta > 0.0) {
        return invalid(format!("ball radius must be positive, got {delta}"));
    }
    s.check_point(center)?;
    if delta >= s.diameter() {
        return Ok((0..count).map(|i| s.sample_mu(rng::derive(seed, &[i as u64]))).collect());
    }
    let mut r = rng::chacha(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut found = None;
        for _ in 0..MAX_BALL_ATTEMPTS {
            if let Some(y) = s.inner.sample_near(center, delta, &mut r) {
                if s.dist(center, &y) <= delta {
                    found = Some(y);
                    break;
                }
            }
        }
        match found {
            Some(y) => out.push(y),
            None => {
                return Err(Error::SamplingExhausted {
                    attempts: MAX_BALL_ATTEMPTS,
                    context: format!("ball of radius {delta} around {} in {}", center.describe(), s.tag),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    #[test]
    fn constructors_and_errors() {
        let rot = make_system(&SystemSpec::TorusRotation { alpha: vec![golden()], flow: false }).unwrap();
        assert_eq!(rot.group_kind(), GroupKind::Discrete);
        assert_eq!(rot.known_class, KnownClass::DiscreteSpectrum);
        assert!(make_system(&SystemSpec::TorusRotation { alpha: vec![0.25], flow: false }).is_err());
        assert!(make_system(&SystemSpec::BernoulliShift { p: 1.0, alphabet: default_alphabet() }).is_err());
        let b = make_system(&SystemSpec::BernoulliShift { p: 0.5, alphabet: default_alphabet() }).unwrap();
        assert_eq!(b.known_class, KnownClass::WeaklyMixing);
        let r = SystemSpec::TorusRotation { alpha: vec![golden()], flow: false };
        let prod = make_system(&SystemSpec::Product { left: Box::new(r.clone()), right: Box::new(r) }).unwrap();
        assert_eq!(
            prod.point_kind(),
            PointKind::Product(Box::new(PointKind::TorusPoint { dim: 1 }), Box::new(PointKind::TorusPoint { dim: 1 }))
        );
    }

    #[test]
    fn rotation_orbit_closed_form() {
        let a = golden();
        let rot = make_system(&SystemSpec::TorusRotation { alpha: vec![a], flow: false }).unwrap();
        let f = Observable::character(vec![1]);
        let s = orbit_series(&rot, &f, &Point::Torus(vec![0.0]), &Window::discrete(4, 1).unwrap()).unwrap();
        for (j, v) in s.values.iter().enumerate() {
            let want = Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 * a);
            assert!((v - want).norm() < 1e-12);
        }
        let wrong = Window::continuous(4.0, 0.5, 1).unwrap();
        assert!(orbit_series(&rot, &f, &Point::Torus(vec![0.0]), &wrong).is_err());
        assert!(orbit_series(&rot, &Observable::symbol(0), &Point::Torus(vec![0.0]), &Window::discrete(4, 1).unwrap())
            .is_err());
    }

    #[test]
    fn bernoulli_orbit_replays_sampler() {
        let b = make_system(&SystemSpec::BernoulliShift { p: 0.5, alphabet: default_alphabet() }).unwrap();
        let x = b.sample_mu(17);
        let s = orbit_series(&b, &Observable::symbol(0), &x, &Window::discrete(64, 1).unwrap()).unwrap();
        let Point::Symbolic(sp) = &x else { panic!() };
        for (j, v) in s.values.iter().enumerate() {
            assert_eq!(v.re, sp.symbol(j as i64) as f64);
        }
    }

    #[test]
    fn ball_sampling() {
        let rot = make_system(&SystemSpec::TorusRotation { alpha: vec![golden()], flow: false }).unwrap();
        let c = Point::Torus(vec![0.995]);
        let pts = sample_ball(&rot, &c, 0.01, 100, 3).unwrap();
        assert_eq!(pts.len(), 100);
        assert!(pts.iter().all(|p| rot.dist(&c, p) <= 0.01));
        let wide = sample_ball(&rot, &c, 0.6, 5, 3).unwrap();
        assert_eq!(wide.len(), 5);
        assert!(sample_ball(&rot, &c, 0.0, 1, 3).is_err());

        let b = make_system(&SystemSpec::BernoulliShift { p: 0.5, alphabet: default_alphabet() }).unwrap();
        let x = b.sample_mu(1);
        let Point::Symbolic(xs) = &x else { panic!() };
        for y in sample_ball(&b, &x, 0.125, 20, 9).unwrap() {
            let Point::Symbolic(ys) = &y else { panic!() };
            assert!((-1..=1).all(|k| xs.symbol(k) == ys.symbol(k)));
        }

        let tm = make_system(&SystemSpec::SubstitutionSubshift { rule: SubstitutionRule::ThueMorse }).unwrap();
        let x = tm.sample_mu(2);
        let ys = sample_ball(&tm, &x, 2f64.powi(-8), 10, 4).unwrap();
        assert!(ys.iter().all(|y| tm.dist(&x, y) <= 2f64.powi(-8)));
    }
}
