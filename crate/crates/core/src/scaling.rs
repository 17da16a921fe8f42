//! Chinchilla-style scaling law `L = E + A/N^alpha + B/D^beta`, the compute
//! identity `C = 6ND`, the overtraining ratio, and the quality penalty χ that
//! converts a suboptimally shaped run into compute-optimal-equivalent FLOPs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tokens per parameter treated as the compute-optimal baseline for OT.
pub const DEFAULT_R_OPT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChinchillaParams {
    /// Irreducible loss, nats.
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ChinchillaParams {
    /// The replication fit of the Chinchilla parametric law.
    fn default() -> Self {
        ChinchillaParams {
            e: 1.8172,
            a: 482.01,
            b: 2085.43,
            alpha: 0.3478,
            beta: 0.3658,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub n_params: f64,
    pub d_tokens: f64,
}

impl TrainedModel {
    pub fn new(n_params: f64, d_tokens: f64) -> Self {
        TrainedModel { n_params, d_tokens }
    }
}

pub fn training_compute(model: &TrainedModel) -> f64 {
    6.0 * model.n_params * model.d_tokens
}

pub fn overtraining_ratio(model: &TrainedModel, r_opt: f64) -> f64 {
    model.d_tokens / (r_opt * model.n_params)
}

impl ChinchillaParams {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("chinchilla.E", self.e),
            ("chinchilla.A", self.a),
            ("chinchilla.B", self.b),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(key, format!("must be positive, got {v}")));
            }
        }
        for (key, v) in [("chinchilla.alpha", self.alpha), ("chinchilla.beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(key, format!("must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn loss(&self, model: &TrainedModel) -> f64 {
        self.e + self.excess_loss(model)
    }

    /// `L - E`: the reducible part of the loss.
    pub fn excess_loss(&self, model: &TrainedModel) -> f64 {
        self.a / model.n_params.powf(self.alpha) + self.b / model.d_tokens.powf(self.beta)
    }

    /// Loss-minimizing `(N, D)` subject to `6ND = compute`.
    pub fn chinchilla_optimal(&self, compute: f64) -> TrainedModel {
        let sum = self.alpha + self.beta;
        let g = (self.alpha * self.a / (self.beta * self.b)).powf(1.0 / sum);
        let n = g * (compute / 6.0).powf(self.beta / sum);
        TrainedModel::new(n, compute / (6.0 * n))
    }

    /// Exponent `c` in `ΔL*(C) ∝ C^-c` along the compute-optimal frontier.
    pub fn frontier_exponent(&self) -> f64 {
        self.alpha * self.beta / (self.alpha + self.beta)
    }

    /// χ = C_equivalent / C, where a compute-optimal run at C_equivalent reaches
    /// the same loss. Clamped to (0, 1].
    pub fn quality_penalty(&self, model: &TrainedModel) -> f64 {
        let compute = training_compute(model);
        let optimal = self.excess_loss(&self.chinchilla_optimal(compute));
        let actual = self.excess_loss(model);
        let chi = (optimal / actual).powf(1.0 / self.frontier_exponent());
        if chi.is_nan() {
            return 1.0;
        }
        chi.clamp(f64::MIN_POSITIVE, 1.0)
    }
}
