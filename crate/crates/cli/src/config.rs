//! Pipeline configuration: one strict JSON document.

use serde::{Deserialize, Serialize};

use semref::energy::{EnergyWeights, Formulation, Schedule};
use semref::error::{Error, Result};
use semref::mesh::Label;
use semref::relabel::{BpOptions, GeoPriorParams, RelabelParams};

/// Settings of a refinement run. Every field has a default, so `{}` is a
/// valid config; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub formulation: Formulation,
    pub weights: EnergyWeights,
    pub geo_prior: GeoPriorParams,
    pub mu1: f64,
    pub mu2: f64,
    pub bp: BpOptions,
    pub step_size: f64,
    pub max_halvings: usize,
    pub max_outer_iters: usize,
    /// Accepted geometric steps per outer round, i.e. the relabeling period.
    #[serde(alias = "relabel_every")]
    pub geo_iters_per_outer: usize,
    /// Vertices touching faces of these labels keep their position.
    pub frozen_labels: Vec<Label>,
    pub zncc_window: usize,
    pub rel_tol: f64,
    pub patience: usize,
    /// Seeds the surface sampling of the geometric evaluation.
    pub seed: u64,
    pub eval_samples: usize,
}

/// Weights tuned on the default synthetic city block.
pub fn default_weights() -> EnergyWeights {
    EnergyWeights {
        lambda1: 1.0,
        lambda2: 750.0,
        lambda3: 300.0,
        ..EnergyWeights::default()
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let sched = Schedule::default();
        let relabel = RelabelParams::default();
        PipelineConfig {
            formulation: Formulation::Semantic,
            weights: default_weights(),
            geo_prior: relabel.geo,
            mu1: relabel.mu1,
            mu2: relabel.mu2,
            bp: relabel.bp,
            step_size: 5e-5,
            max_halvings: sched.max_halvings,
            max_outer_iters: 5,
            geo_iters_per_outer: 10,
            frozen_labels: Vec::new(),
            zncc_window: 7,
            rel_tol: sched.rel_tol,
            patience: sched.patience,
            seed: 0,
            eval_samples: 20_000,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.energy_weights().validate()?;
        self.relabel_params().validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("step_size", self.step_size)?;
        if !(self.rel_tol >= 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::Config(format!(
                "rel_tol must be non-negative, got {}",
                self.rel_tol
            )));
        }
        if self.max_halvings > 60 {
            return Err(Error::Config(format!(
                "max_halvings must be at most 60, got {}",
                self.max_halvings
            )));
        }
        if self.geo_iters_per_outer == 0 {
            return Err(Error::Config("geo_iters_per_outer must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.eval_samples == 0 {
            return Err(Error::Config("eval_samples must be at least 1".into()));
        }
        if let Some(l) = self.frozen_labels.iter().find(|&&l| l == 0) {
            return Err(Error::Config(format!("frozen label {l} is not a class id")));
        }
        if self.bp.max_iters == 0 || !self.bp.tol.is_finite() || self.bp.tol < 0.0 {
            return Err(Error::Config("bp needs max_iters >= 1 and a non-negative tol".into()));
        }
        Ok(())
    }

    pub fn energy_weights(&self) -> EnergyWeights {
        EnergyWeights {
            zncc_window: self.zncc_window,
            ..self.weights.clone()
        }
    }

    pub fn relabel_params(&self) -> RelabelParams {
        RelabelParams {
            mu1: self.mu1,
            mu2: self.mu2,
            geo: self.geo_prior.clone(),
            bp: self.bp,
        }
    }

    /// Descent schedule of one outer round.
    pub fn schedule(&self) -> Schedule {
        Schedule {
            step_size: self.step_size,
            max_iters: self.geo_iters_per_outer,
            max_halvings: self.max_halvings,
            rel_tol: self.rel_tol,
            patience: self.patience,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = PipelineConfig::from_json("{}").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!((c.max_outer_iters, c.geo_iters_per_outer), (5, 10));
        assert!(c.frozen_labels.is_empty());
        assert_eq!((c.mu1, c.mu2), (0.35, 0.5));
    }

    #[test]
    fn relabel_every_is_an_alias() {
        let c = PipelineConfig::from_json(r#"{"relabel_every": 3}"#).unwrap();
        assert_eq!(c.geo_iters_per_outer, 3);
        assert!(PipelineConfig::from_json(r#"{"relabel_every": 3, "geo_iters_per_outer": 4}"#).is_err());
    }

    #[test]
    fn unknown_keys_and_bad_ranges_are_rejected() {
        for bad in [
            r#"{"lamda1": 1}"#,
            r#"{"weights": {"lambda1": 1, "lambda2": 1, "lambda3": 1, "typo": 0}}"#,
            r#"{"step_size": 0}"#,
            r#"{"zncc_window": 4}"#,
            r#"{"mu1": -1}"#,
            r#"{"weights": {"lambda1": -1, "lambda2": 1, "lambda3": 1}}"#,
            r#"{"geo_prior": {"bands": {"1": {"alpha": 200, "beta": 0}}}}"#,
        ] {
            let e = PipelineConfig::from_json(bad).unwrap_err();
            assert!(e.is_validation(), "{bad}: {e}");
        }
    }

    #[test]
    fn serialized_config_reloads_identically() {
        let c = PipelineConfig {
            frozen_labels: vec![1],
            seed: 17,
            ..PipelineConfig::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(PipelineConfig::from_json(&text).unwrap(), c);
    }
}
