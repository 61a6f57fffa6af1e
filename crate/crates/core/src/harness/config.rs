use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::{Pairing, PicardOptions};
use crate::sde::SampleLaw;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    /// `d = 1`, `b⁰ = -x`, `b¹(x, y) = sin(y - x)`, `σ = 1`.
    BoundedKernel,
    /// `d = 1`, `b⁰ = -x`, `b¹(x, y) = sin(sign(y - x)√|y - x|)`, `σ = 1`.
    DiniKernel,
    /// Spectral SPDE with `b̃(r) = sign(r)√|r|`.
    SpdeSpectral,
    /// `d = 1`, `b⁰ = -x`, `b¹ = 0`, `σ = 1`.
    NoInteraction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub h: f64,
}

pub type CouplingConfig = Pairing;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Neighbour order of the entropy estimator.
    pub knn_k: usize,
    /// Bootstrap replicates for metric standard errors.
    pub replicates: usize,
    /// Bins per axis of the variation-distance histograms.
    pub bins: usize,
    /// Residual-bootstrap replicates of the rate fits.
    pub fit_bootstrap: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            knn_k: 5,
            replicates: 50,
            bins: 200,
            fit_bootstrap: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpdeConfig {
    pub modes: usize,
    pub epsilon: f64,
    pub alpha: f64,
}

impl Default for SpdeConfig {
    fn default() -> Self {
        Self {
            modes: 64,
            epsilon: 1.0,
            alpha: 0.25,
        }
    }
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

/// A convergence study, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub model_id: ModelId,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "one")]
    pub k_marginal: usize,
    pub t_checkpoints: Vec<f64>,
    pub trials: usize,
    #[serde(default = "half")]
    pub eta: f64,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    pub grid: GridConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
    /// Initial law of both systems; the model's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<SampleLaw>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub flow: PicardOptions,
    #[serde(default)]
    pub spde: SpdeConfig,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.with_context(path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("study config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_list.is_empty() || self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return fail(format!("N_list must be positive and strictly increasing, got {:?}", self.n_list));
        }
        if self.trials < 30 {
            return fail(format!("trials must be at least 30, got {}", self.trials));
        }
        if self.k_marginal == 0 || self.k_marginal > self.n_list[0] {
            return fail(format!(
                "k_marginal must lie in 1..=min(N_list) = {}, got {}",
                self.n_list[0], self.k_marginal
            ));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return fail(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        let g = self.grid;
        if !(g.horizon > 0.0 && g.h > 0.0 && g.h <= g.horizon) {
            return fail(format!("grid needs 0 < h <= T, got T = {}, h = {}", g.horizon, g.h));
        }
        if self.t_checkpoints.is_empty()
            || self.t_checkpoints.iter().any(|&t| !(t > 0.0 && t <= g.horizon * (1.0 + 1e-12)))
        {
            return fail(format!("t_checkpoints must lie in (0, T], got {:?}", self.t_checkpoints));
        }
        if self.estimator.knn_k == 0 || self.estimator.bins == 0 {
            return fail("estimator needs knn_k >= 1 and bins >= 1".into());
        }
        if self.flow.support < 100 || self.flow.max_iter == 0 {
            return fail(format!(
                "flow needs support >= 100 and max_iter >= 1, got {} and {}",
                self.flow.support, self.flow.max_iter
            ));
        }
        if let Some(tol) = self.flow.tol {
            if !(tol > 0.0) {
                return fail(format!("flow tol must be positive, got {tol}"));
            }
        }
        if let Pairing::Shift { c, a } = self.coupling {
            if !c.is_finite() || !(a >= 0.0) {
                return fail(format!("shift coupling needs finite c and a >= 0, got c = {c}, a = {a}"));
            }
        }
        if let Some(law) = &self.init {
            law.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model_id = "bounded_kernel"
N_list = [8, 16, 32]
t_checkpoints = [0.5, 1.0]
trials = 30
master_seed = 7

[grid]
T = 1.0
h = 0.01
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c = StudyConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.n_list, vec![8, 16, 32]);
        assert_eq!(c.k_marginal, 1);
        assert_eq!(c.coupling, Pairing::Identical);
        assert_eq!(c.estimator.bins, 200);
        assert_eq!(c.flow.support, 2000);
        let again = StudyConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn parses_nested_sections() {
        let text = format!(
            "{MINIMAL}\n[coupling]\nkind = \"shift\"\nc = 2.0\na = 0.5\n\n[init]\nkind = \"dirac\"\npoint = [0.0]\n\n[flow]\nsupport = 500\nstart = {{ kind = \"frozen_initial\" }}\n"
        );
        let c = StudyConfig::from_toml(&text).unwrap();
        assert_eq!(c.coupling, Pairing::Shift { c: 2.0, a: 0.5 });
        assert_eq!(c.init, Some(SampleLaw::Dirac { point: vec![0.0] }));
        assert_eq!(c.flow.support, 500);
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to) in [
            ("N_list = [8, 16, 32]", "N_list = [8, 8, 32]"),
            ("trials = 30", "trials = 5"),
            ("t_checkpoints = [0.5, 1.0]", "t_checkpoints = [0.0]"),
            ("model_id = \"bounded_kernel\"", "model_id = \"nope\""),
            ("master_seed = 7", "master_seed = 7\nunknown = 1"),
        ] {
            let err = StudyConfig::from_toml(&MINIMAL.replace(from, to)).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{err}");
        }
    }
}
