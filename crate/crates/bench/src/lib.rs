//! Shared inputs for the kernel benchmarks.

use meanlab_core::delone::{build_delone, golden_ratio, Construction, DeloneSet, Region};
use meanlab_core::{make_observable, make_system, Observable, ObservableSpec, Schedule, SystemHandle, SystemSpec};

pub fn golden_rotation() -> (SystemHandle, Observable) {
    let spec = SystemSpec::TorusRotation { alpha: vec![golden_ratio() - 1.0], flow: false };
    let s = make_system(&spec).unwrap();
    let f = make_observable(&ObservableSpec::Character { k: vec![1] }, &spec).unwrap();
    (s, f)
}

pub fn fair_bernoulli() -> (SystemHandle, Observable) {
    let spec = SystemSpec::BernoulliShift { p: 0.5, alphabet: vec!["0".into(), "1".into()] };
    let s = make_system(&spec).unwrap();
    let f = make_observable(&ObservableSpec::CenteredSymbol { index: 0, mean: 0.5 }, &spec).unwrap();
    (s, f)
}

/// Three nested windows ending at `n`.
pub fn schedule(n: f64) -> Schedule {
    Schedule::new(vec![n / 4.0, n / 2.0, n], 1).unwrap()
}

pub fn fibonacci_patch(side: f64) -> DeloneSet {
    build_delone(&Construction::CutProject { beta: 0.0 }, &Region { side }).unwrap()
}
