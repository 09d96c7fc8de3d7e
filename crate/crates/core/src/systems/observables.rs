use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::{Point, PointKind};

/// Which points an observable understands.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Any,
    Torus { min_dim: usize },
    Symbolic,
    Translate,
    Product(Box<Domain>, Box<Domain>),
}

impl Domain {
    pub fn accepts(&self, kind: &PointKind) -> bool {
        match (self, kind) {
            (Domain::Any, _) => true,
            (Domain::Torus { min_dim }, PointKind::TorusPoint { dim }) => dim >= min_dim,
            (Domain::Symbolic, PointKind::SymbolSequence) => true,
            (Domain::Translate, PointKind::DelonePatch { .. }) => true,
            (Domain::Product(a, b), PointKind::Product(ka, kb)) => a.accepts(ka) && b.accepts(kb),
            _ => false,
        }
    }

    fn meet(&self, other: &Domain) -> Option<Domain> {
        match (self, other) {
            (Domain::Any, d) | (d, Domain::Any) => Some(d.clone()),
            (Domain::Torus { min_dim: a }, Domain::Torus { min_dim: b }) => Some(Domain::Torus { min_dim: *a.max(b) }),
            (Domain::Product(a1, b1), Domain::Product(a2, b2)) => {
                Some(Domain::Product(Box::new(a1.meet(a2)?), Box::new(b1.meet(b2)?)))
            }
            (a, b) if a == b => Some(a.clone()),
            _ => None,
        }
    }
}

type EvalFn = dyn Fn(&Point) -> Complex64 + Send + Sync;

/// A bounded complex-valued function on points.
#[derive(Clone)]
pub struct Observable {
    eval: Arc<EvalFn>,
    pub sup_bound: f64,
    pub tag: String,
    pub domain: Domain,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("tag", &self.tag)
            .field("sup_bound", &self.sup_bound)
            .field("domain", &self.domain)
            .finish()
    }
}

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn symbol_at(x: &Point, k: i64) -> f64 {
    match x {
        Point::Symbolic(s) => s.symbol(k) as f64,
        _ => 0.0,
    }
}

impl Observable {
    pub fn new(
        tag: impl Into<String>,
        sup_bound: f64,
        domain: Domain,
        eval: impl Fn(&Point) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self { eval: Arc::new(eval), sup_bound, tag: tag.into(), domain }
    }

    pub fn eval(&self, x: &Point) -> Complex64 {
        (self.eval)(x)
    }

    pub fn accepts(&self, kind: &PointKind) -> bool {
        self.domain.accepts(kind)
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(format!("constant({},{})", c.re, c.im), c.norm(), Domain::Any, move |_| c)
    }

    /// `e^{2 pi i <k, x>}` on the torus.
    pub fn character(k: Vec<i64>) -> Self {
        let tag = format!("character({k:?})");
        let min_dim = k.len();
        Self::new(tag, 1.0, Domain::Torus { min_dim }, move |x| match x {
            Point::Torus(c) => {
                let phase: f64 = k.iter().zip(c).map(|(&ki, &ci)| ki as f64 * ci).sum();
                Complex64::from_polar(1.0, TAU * phase)
            }
            _ => Complex64::new(0.0, 0.0),
        })
    }

    /// `cos(2 pi x_c)` on the torus.
    pub fn cos_coordinate(c: usize) -> Self {
        Self::new(format!("cos_coordinate({c})"), 1.0, Domain::Torus { min_dim: c + 1 }, move |x| match x {
            Point::Torus(v) => re((TAU * v[c]).cos()),
            _ => re(0.0),
        })
    }

    /// Indicator of the arc `[lo, hi)` in coordinate `c` of the torus.
    pub fn arc_indicator(c: usize, lo: f64, hi: f64) -> Self {
        let tag = format!("arc_indicator({c},{lo},{hi})");
        Self::new(tag, 1.0, Domain::Torus { min_dim: c + 1 }, move |x| match x {
            Point::Torus(v) => re(((lo..hi).contains(&v[c])) as u8 as f64),
            _ => re(0.0),
        })
    }

    /// The letter (0 or 1) at coordinate `index`.
    pub fn symbol(index: i64) -> Self {
        Self::new(format!("symbol({index})"), 1.0, Domain::Symbolic, move |x| re(symbol_at(x, index)))
    }

    /// `symbol(index) - mean`.
    pub fn centered_symbol(index: i64, mean: f64) -> Self {
        let sup = mean.abs().max((1.0 - mean).abs());
        Self::new(format!("centered_symbol({index},{mean})"), sup, Domain::Symbolic, move |x| {
            re(symbol_at(x, index) - mean)
        })
    }

    /// `2 x_index - 1`, values in {-1, 1}.
    pub fn spin(index: i64) -> Self {
        Self::new(format!("spin({index})"), 1.0, Domain::Symbolic, move |x| re(2.0 * symbol_at(x, index) - 1.0))
    }

    /// Indicator of the cylinder `x_{at..at+len} = word`.
    pub fn cylinder(word: Vec<u8>, at: i64) -> Self {
        let tag = format!("cylinder({word:?},{at})");
        Self::new(tag, 1.0, Domain::Symbolic, move |x| match x {
            Point::Symbolic(s) => re(word.iter().enumerate().all(|(i, &w)| s.symbol(at + i as i64) == w) as u8 as f64),
            _ => re(0.0),
        })
    }

    /// Weighted window `sum_{|k|<=r} 2^-|k| x_k`, normalized into [0, 1].
    pub fn symbol_window(radius: i64) -> Self {
        let norm: f64 = (-radius..=radius).map(|k| 0.5f64.powi(k.abs() as i32)).sum();
        Self::new(format!("symbol_window({radius})"), 1.0, Domain::Symbolic, move |x| {
            re((-radius..=radius).map(|k| 0.5f64.powi(k.abs() as i32) * symbol_at(x, k)).sum::<f64>() / norm)
        })
    }

    /// Lifts `f` to the left factor of a product.
    pub fn on_left(f: Observable) -> Self {
        let tag = format!("left({})", f.tag);
        let domain = Domain::Product(Box::new(f.domain.clone()), Box::new(Domain::Any));
        let sup = f.sup_bound;
        Self::new(tag, sup, domain, move |x| match x {
            Point::Product(a, _) => f.eval(a),
            _ => re(0.0),
        })
    }

    pub fn on_right(f: Observable) -> Self {
        let tag = format!("right({})", f.tag);
        let domain = Domain::Product(Box::new(Domain::Any), Box::new(f.domain.clone()));
        let sup = f.sup_bound;
        Self::new(tag, sup, domain, move |x| match x {
            Point::Product(_, b) => f.eval(b),
            _ => re(0.0),
        })
    }

    /// `c * f`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let f = self.clone();
        Self::new(
            format!("{}*({},{})", self.tag, c.re, c.im),
            self.sup_bound * c.norm(),
            self.domain.clone(),
            move |x| c * f.eval(x),
        )
    }

    /// `a f + b g`; `None` when the domains are incompatible.
    pub fn linear(a: Complex64, f: &Observable, b: Complex64, g: &Observable) -> Option<Self> {
        let domain = f.domain.meet(&g.domain)?;
        let (f2, g2) = (f.clone(), g.clone());
        let tag = format!("lin({},{};{},{})", a, f.tag, b, g.tag);
        let sup = a.norm() * f.sup_bound + b.norm() * g.sup_bound;
        Some(Self::new(tag, sup, domain, move |x| a * f2.eval(x) + b * g2.eval(x)))
    }

    /// Pointwise product; `None` when the domains are incompatible.
    pub fn product(f: &Observable, g: &Observable) -> Option<Self> {
        let domain = f.domain.meet(&g.domain)?;
        let (f2, g2) = (f.clone(), g.clone());
        let tag = format!("mul({},{})", f.tag, g.tag);
        Some(Self::new(tag, f.sup_bound * g.sup_bound, domain, move |x| f2.eval(x) * g2.eval(x)))
    }
}
