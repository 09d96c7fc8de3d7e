//! Experiment configuration files (TOML).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use meanlab_core::classify::SamplerParams;
use meanlab_core::delone::{Construction, DeloneClassifyConfig, DiffractionParams, Region};
use meanlab_core::fixtures;
use meanlab_core::pseudometrics::MetricKind;
use meanlab_core::spectral::FrequencyGrid;
use meanlab_core::systems::{OBSERVABLE_TAGS, SYSTEM_TAGS};
use meanlab_core::{ObservableSpec, Schedule, SystemSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Pseudometric,
    Spectrum,
    Classify,
    Dichotomy,
    Delone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    /// Built-in fixture supplying the system, observables and known class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observables: Vec<ObservableSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_grid: Option<FrequencyGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudometric: Option<PseudometricSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifySettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delone: Option<DeloneSettings>,
}

/// Sampler overrides; the seed always comes from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSettings {
    pub n_centers: Option<usize>,
    pub n_per_ball: Option<usize>,
    pub delta_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudometricSettings {
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricKind>,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Also check the metric-equivalence implications for each observable
    /// rescaled to `sup |f| = 1/2`.
    #[serde(default)]
    pub equivalence: bool,
}

impl Default for PseudometricSettings {
    fn default() -> Self {
        Self { metrics: default_metrics(), pairs: default_pairs(), equivalence: false }
    }
}

fn default_metrics() -> Vec<MetricKind> {
    vec![MetricKind::DfL2, MetricKind::DfL1, MetricKind::RhoF, MetricKind::Db, MetricKind::RhoB]
}

fn default_pairs() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyTest {
    MeanSensitivity,
    MeanEquicontinuity,
    MuMeanEquicontinuity,
    PlainEquicontinuity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySettings {
    #[serde(default = "default_tests")]
    pub tests: Vec<ClassifyTest>,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        Self { tests: default_tests() }
    }
}

fn default_tests() -> Vec<ClassifyTest> {
    vec![ClassifyTest::MeanSensitivity, ClassifyTest::MeanEquicontinuity, ClassifyTest::MuMeanEquicontinuity]
}

/// A Delone patch to classify, with optional overrides of the settings
/// sized for the patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeloneSettings {
    pub construction: Construction,
    pub region: Region,
    pub patch_radius: Option<f64>,
    pub diffraction: Option<DiffractionParams>,
    pub point_fraction_threshold: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let value: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        check_tags(&value)?;
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |m: String| Err(CliError::Config(m));
        if let Some(name) = &self.fixture {
            if fixtures::fixture(name).is_none() {
                let names: Vec<String> = fixtures::catalog().into_iter().map(|f| f.name).collect();
                return cfg(format!("unknown fixture `{name}`; valid fixtures: {}", names.join(", ")));
            }
            if self.system.is_some() {
                return cfg("give either `fixture` or `system`, not both".into());
            }
        }
        match self.kind {
            Kind::Delone => {
                if self.delone.is_none()
                    && !self.fixture.as_deref().is_some_and(|f| f.starts_with("delone"))
                    && !matches!(self.system, Some(SystemSpec::DeloneHull { .. }))
                {
                    return cfg(
                        "kind = \"delone\" needs a [delone] table, a delone fixture or a delone_hull system".into()
                    );
                }
            }
            _ => {
                if self.fixture.is_none() && self.system.is_none() {
                    return cfg("give a `fixture` or a [system] table".into());
                }
            }
        }
        if matches!(self.kind, Kind::Spectrum | Kind::Dichotomy) && self.observables().is_empty() {
            return cfg(format!("kind = \"{}\" needs at least one observable", kind_name(self.kind)));
        }
        if let Some(s) = &self.schedule {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t < 0.5) {
                return cfg(format!("tau must lie in (0, 1/2), got {t}"));
            }
        }
        if let Some(g) = &self.eps_grid {
            if g.is_empty() || g.iter().any(|e| !(*e > 0.0)) {
                return cfg("eps_grid must be non-empty and positive".into());
            }
        }
        if let Some(p) = &self.pseudometric {
            if p.pairs == 0 || p.metrics.is_empty() {
                return cfg("[pseudometric] needs at least one metric and one pair".into());
            }
        }
        Ok(())
    }

    /// The system under study: the fixture's, the `[system]` table, or the
    /// hull of the `[delone]` patch.
    pub fn system_spec(&self) -> Option<SystemSpec> {
        if let Some(name) = &self.fixture {
            return fixtures::fixture(name).map(|f| f.system);
        }
        if let Some(s) = &self.system {
            return Some(s.clone());
        }
        self.delone.as_ref().map(|d| SystemSpec::DeloneHull {
            construction: d.construction.clone(),
            region: d.region,
            patch_radius: d
                .patch_radius
                .unwrap_or_else(|| DeloneClassifyConfig::for_patch(d.construction.dim(), d.region.side).patch_radius),
        })
    }

    /// Observables listed in the config, or the fixture's when none are.
    pub fn observables(&self) -> Vec<ObservableSpec> {
        if !self.observables.is_empty() {
            return self.observables.clone();
        }
        self.fixture.as_deref().and_then(fixtures::fixture).map(|f| f.observables).unwrap_or_default()
    }

    pub fn sampler_params(&self, base: SamplerParams) -> SamplerParams {
        let mut p = base;
        if let Some(s) = &self.sampler {
            if let Some(n) = s.n_centers {
                p.n_centers = n;
            }
            if let Some(n) = s.n_per_ball {
                p.n_per_ball = n;
            }
            if let Some(d) = &s.delta_list {
                p.delta_list = d.clone();
            }
        }
        p.seed = self.seed;
        p
    }

    /// Replaces the window sizes, keeping burn-in and mesh where they
    /// still fit.
    pub fn override_schedule(&mut self, sizes: Vec<f64>, default: &Schedule) -> Result<(), CliError> {
        let base = self.schedule.clone().unwrap_or_else(|| default.clone());
        let burn_in = base.burn_in.min(sizes.len().saturating_sub(1));
        let s = Schedule::with_mesh(sizes, burn_in, base.mesh).map_err(|e| CliError::Config(e.to_string()))?;
        self.schedule = Some(s);
        Ok(())
    }
}

pub fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Pseudometric => "pseudometric",
        Kind::Spectrum => "spectrum",
        Kind::Classify => "classify",
        Kind::Dichotomy => "dichotomy",
        Kind::Delone => "delone",
    }
}

/// Rejects unknown system and observable tags with the list of valid ones
/// before serde reports a less specific error.
fn check_tags(value: &toml::Value) -> Result<(), CliError> {
    fn system(v: &toml::Value) -> Result<(), CliError> {
        let Some(t) = v.get("tag") else { return Ok(()) };
        let tag = t.as_str().unwrap_or_default();
        if !SYSTEM_TAGS.contains(&tag) {
            return Err(CliError::Config(format!(
                "unknown system tag `{tag}`; valid system tags: {}",
                SYSTEM_TAGS.join(", ")
            )));
        }
        for side in ["left", "right"] {
            if let Some(inner) = v.get(side) {
                system(inner)?;
            }
        }
        Ok(())
    }
    fn observable(v: &toml::Value) -> Result<(), CliError> {
        let Some(t) = v.get("tag") else { return Ok(()) };
        let tag = t.as_str().unwrap_or_default();
        if !OBSERVABLE_TAGS.contains(&tag) {
            return Err(CliError::Config(format!(
                "unknown observable tag `{tag}`; valid observable tags: {}",
                OBSERVABLE_TAGS.join(", ")
            )));
        }
        match v.get("inner") {
            Some(inner) => observable(inner),
            None => Ok(()),
        }
    }
    if let Some(s) = value.get("system") {
        system(s)?;
    }
    if let Some(list) = value.get("observables").and_then(|o| o.as_array()) {
        for o in list {
            observable(o)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_system_tag_lists_valid_tags() {
        let err =
            ExperimentConfig::from_toml("kind = \"spectrum\"\nseed = 1\n[system]\ntag = \"baker_map\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("baker_map") && msg.contains("torus_rotation") && msg.contains("sturmian"), "{msg}");
    }

    #[test]
    fn unknown_observable_tag_lists_valid_tags() {
        let text = "kind = \"spectrum\"\nseed = 1\nfixture = \"torus_rotation\"\n[[observables]]\ntag = \"left\"\ninner = { tag = \"wavelet\" }\n";
        let msg = ExperimentConfig::from_toml(text).unwrap_err().to_string();
        assert!(msg.contains("wavelet") && msg.contains("character"), "{msg}");
    }

    #[test]
    fn seed_is_required() {
        assert!(ExperimentConfig::from_toml("kind = \"spectrum\"\nfixture = \"torus_rotation\"\n").is_err());
    }

    #[test]
    fn echo_revalidates() {
        let text = r#"
kind = "pseudometric"
seed = 7
[system]
tag = "torus_rotation"
alpha = [0.25]
[[observables]]
tag = "character"
k = [1]
[schedule]
sizes = [100.0, 200.0]
burn_in = 1
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }
}
