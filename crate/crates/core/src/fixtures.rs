//! Built-in systems with representative observables and their known
//! spectral class.

use serde::{Deserialize, Serialize};

use crate::delone::{golden_ratio, Construction, Region};
use crate::systems::{KnownClass, ObservableSpec, SubstitutionRule, SystemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub system: SystemSpec,
    pub observables: Vec<ObservableSpec>,
    pub known_class: KnownClass,
}

pub fn golden_alpha() -> f64 {
    golden_ratio() - 1.0
}

fn fx(name: &str, system: SystemSpec, observables: Vec<ObservableSpec>, known_class: KnownClass) -> Fixture {
    Fixture { name: name.into(), system, observables, known_class }
}

fn symbol_observables(mean: f64) -> Vec<ObservableSpec> {
    vec![
        ObservableSpec::Symbol { index: 0 },
        ObservableSpec::CenteredSymbol { index: 0, mean },
        ObservableSpec::Cylinder { word: vec![1, 0], at: 0 },
    ]
}

fn hull(name: &str, construction: Construction, side: f64, patch_radius: f64, class: KnownClass) -> Fixture {
    let system = SystemSpec::DeloneHull { construction, region: Region { side }, patch_radius };
    fx(name, system, vec![ObservableSpec::HullBump], class)
}

/// Every built-in fixture, sorted by name.
pub fn catalog() -> Vec<Fixture> {
    let phi = golden_ratio();
    let sqrt2 = 2f64.sqrt();
    let torus_obs = vec![
        ObservableSpec::Character { k: vec![1] },
        ObservableSpec::CosCoordinate { coord: 0 },
        ObservableSpec::ArcIndicator { coord: 0, lo: 0.0, hi: 0.5 },
    ];
    let rotation = |a: f64| SystemSpec::TorusRotation { alpha: vec![a], flow: false };
    let mut out = vec![
        fx(
            "bernoulli_shift",
            SystemSpec::BernoulliShift { p: 0.5, alphabet: vec!["0".into(), "1".into()] },
            vec![
                ObservableSpec::Symbol { index: 0 },
                ObservableSpec::CenteredSymbol { index: 0, mean: 0.5 },
                ObservableSpec::Spin { index: 0 },
            ],
            KnownClass::WeaklyMixing,
        ),
        hull("delone_cut_project", Construction::CutProject { beta: 0.0 }, 4000.0, 32.0, KnownClass::DiscreteSpectrum),
        hull(
            "delone_lattice_z",
            Construction::Lattice { basis: vec![vec![1.0]] },
            2000.0,
            32.0,
            KnownClass::DiscreteSpectrum,
        ),
        hull(
            "delone_lattice_z2",
            Construction::Lattice { basis: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
            60.0,
            6.0,
            KnownClass::DiscreteSpectrum,
        ),
        hull(
            "delone_perturbed",
            Construction::Perturbed { basis: vec![vec![1.0]], amplitude: 0.3, seed: 1 },
            2000.0,
            32.0,
            KnownClass::Unknown,
        ),
        hull(
            "delone_poisson",
            Construction::Poisson { intensity: 1.0, dim: 1, seed: 1 },
            2000.0,
            32.0,
            KnownClass::Unknown,
        ),
        fx(
            "fibonacci_substitution",
            SystemSpec::SubstitutionSubshift { rule: SubstitutionRule::Fibonacci },
            symbol_observables(2.0 - phi),
            KnownClass::DiscreteSpectrum,
        ),
        fx(
            "product_rotation",
            SystemSpec::Product { left: Box::new(rotation(golden_alpha())), right: Box::new(rotation(sqrt2 - 1.0)) },
            vec![
                ObservableSpec::Left { inner: Box::new(ObservableSpec::Character { k: vec![1] }) },
                ObservableSpec::Right { inner: Box::new(ObservableSpec::Character { k: vec![1] }) },
                ObservableSpec::Right { inner: Box::new(ObservableSpec::CosCoordinate { coord: 0 }) },
            ],
            KnownClass::DiscreteSpectrum,
        ),
        fx(
            "sturmian",
            SystemSpec::Sturmian { alpha: sqrt2 - 1.0 },
            symbol_observables(sqrt2 - 1.0),
            KnownClass::DiscreteSpectrum,
        ),
        fx(
            "thue_morse_substitution",
            SystemSpec::SubstitutionSubshift { rule: SubstitutionRule::ThueMorse },
            [symbol_observables(0.5), vec![ObservableSpec::SymbolWindow { radius: 3 }]].concat(),
            KnownClass::Unknown,
        ),
        fx("torus_rotation", rotation(golden_alpha()), torus_obs.clone(), KnownClass::DiscreteSpectrum),
        fx(
            "torus_rotation_2d",
            SystemSpec::TorusRotation { alpha: vec![golden_alpha(), sqrt2 - 1.0], flow: false },
            vec![
                ObservableSpec::Character { k: vec![1, 0] },
                ObservableSpec::Character { k: vec![1, 1] },
                ObservableSpec::CosCoordinate { coord: 1 },
            ],
            KnownClass::DiscreteSpectrum,
        ),
        fx(
            "torus_flow",
            SystemSpec::TorusRotation { alpha: vec![golden_alpha()], flow: true },
            torus_obs,
            KnownClass::DiscreteSpectrum,
        ),
    ];
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

/// Fixtures whose name contains `filter`; the empty filter keeps all.
pub fn list_fixtures(filter: &str) -> Vec<Fixture> {
    catalog().into_iter().filter(|f| f.name.contains(filter)).collect()
}

pub fn fixture(name: &str) -> Option<Fixture> {
    catalog().into_iter().find(|f| f.name == name)
}
