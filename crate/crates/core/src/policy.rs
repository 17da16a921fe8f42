//! Cluster-registration and model-compute thresholds.
//!
//! All thresholds are strict: a node sitting exactly at a limit is not
//! registrable, and a run at exactly a FLOP threshold does not exceed it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{NodeSpec, H100_EQUIVALENT_TFLOPS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelThreshold {
    pub label: String,
    pub flop: f64,
    /// Applies only to runs trained mainly on biological sequence data.
    #[serde(default)]
    pub biological_only: bool,
}

impl ModelThreshold {
    pub fn new(label: impl Into<String>, flop: f64) -> Self {
        ModelThreshold {
            label: label.into(),
            flop,
            biological_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRegime {
    pub name: String,
    /// H100-equivalents a single site may hold without registering.
    #[serde(default)]
    pub node_compute_threshold: Option<f64>,
    /// GB of accelerator memory a single site may hold without registering.
    #[serde(default)]
    pub node_memory_threshold_gb: Option<f64>,
    #[serde(default)]
    pub model_flop_thresholds: Vec<ModelThreshold>,
    /// Interconnect speed that qualifies a cluster. Recorded, not evaluated:
    /// wide-area links never reach it.
    #[serde(default)]
    pub bandwidth_cap_bps: Option<f64>,
}

impl PolicyRegime {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: Option<f64>| match v {
            Some(v) if !(v > 0.0 && v.is_finite()) => {
                Err(Error::invalid(key, format!("threshold must be positive, got {v}")))
            }
            _ => Ok(()),
        };
        positive("policy.node_compute_threshold", self.node_compute_threshold)?;
        positive("policy.node_memory_threshold_gb", self.node_memory_threshold_gb)?;
        positive("policy.bandwidth_cap_bps", self.bandwidth_cap_bps)?;
        for t in &self.model_flop_thresholds {
            positive("policy.model_flop_thresholds", Some(t.flop))?;
        }
        Ok(())
    }

    /// The same regime with an added per-site memory threshold.
    pub fn with_memory_threshold(mut self, name: impl Into<String>, gb: f64) -> Self {
        self.name = name.into();
        self.node_memory_threshold_gb = Some(gb);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegistrationRule {
    Compute,
    Memory,
}

impl fmt::Display for RegistrationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegistrationRule::Compute => "compute",
            RegistrationRule::Memory => "memory",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub registrable: bool,
    /// Every rule the node exceeds; empty when not registrable.
    pub binding: Vec<RegistrationRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdViolation {
    pub label: String,
    pub threshold: f64,
    /// Whether the quality-adjusted compute also exceeds the threshold.
    pub c_quality_exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub regime: String,
    pub node_registrable: bool,
    pub binding_rules: Vec<RegistrationRule>,
    pub model_violations: Vec<ThresholdViolation>,
    pub narrative: String,
}

pub fn node_registrable(node: &NodeSpec, regime: &PolicyRegime) -> Registration {
    let mut binding = Vec::new();
    if regime
        .node_compute_threshold
        .is_some_and(|t| node.h100_equivalents() > t)
    {
        binding.push(RegistrationRule::Compute);
    }
    if regime.node_memory_threshold_gb.is_some_and(|t| node.node_hbm_gb() > t) {
        binding.push(RegistrationRule::Memory);
    }
    Registration {
        registrable: !binding.is_empty(),
        binding,
    }
}

/// Thresholds exceeded by `c_local`. Biological-only thresholds apply when
/// `biological` is set.
pub fn model_threshold_violations(
    c_local: f64,
    c_quality: f64,
    regime: &PolicyRegime,
    biological: bool,
) -> Vec<ThresholdViolation> {
    regime
        .model_flop_thresholds
        .iter()
        .filter(|t| biological || !t.biological_only)
        .filter(|t| c_local > t.flop)
        .map(|t| ThresholdViolation {
            label: t.label.clone(),
            threshold: t.flop,
            c_quality_exceeds: c_quality > t.flop,
        })
        .collect()
}

pub fn compliance_report(
    node: &NodeSpec,
    c_local: f64,
    c_quality: f64,
    regime: &PolicyRegime,
    biological: bool,
) -> ComplianceReport {
    let reg = node_registrable(node, regime);
    let violations = model_threshold_violations(c_local, c_quality, regime, biological);
    let mut narrative = if reg.registrable {
        let rules: Vec<String> = reg.binding.iter().map(ToString::to_string).collect();
        format!(
            "{} nodes must register under {} ({}).",
            node.name,
            regime.name,
            rules.join(" and ")
        )
    } else {
        format!(
            "{} nodes stay below the {} registration thresholds.",
            node.name, regime.name
        )
    };
    if violations.is_empty() {
        narrative.push_str(" The run exceeds no model-compute threshold.");
    } else {
        let labels: Vec<&str> = violations.iter().map(|v| v.label.as_str()).collect();
        narrative.push_str(&format!(" The run exceeds: {}.", labels.join(", ")));
    }
    ComplianceReport {
        regime: regime.name.clone(),
        node_registrable: reg.registrable,
        binding_rules: reg.binding,
        model_violations: violations,
        narrative,
    }
}

/// Per-site registration threshold proposed for covered chip clusters.
pub const SCHER_NODE_H100_EQ: f64 = 16.0;
/// Memory of 16 H100s, GB.
pub const AMENDED_MEMORY_GB: f64 = 1280.0;

pub fn builtin_regimes() -> Vec<PolicyRegime> {
    let scher = PolicyRegime {
        name: "scher".into(),
        node_compute_threshold: Some(SCHER_NODE_H100_EQ),
        node_memory_threshold_gb: None,
        model_flop_thresholds: vec![
            ModelThreshold::new("monitored-floor", 1e23),
            ModelThreshold::new("ban", 1e24),
        ],
        bandwidth_cap_bps: None,
    };
    let amended = scher.clone().with_memory_threshold("scher-amended", AMENDED_MEMORY_GB);
    vec![
        PolicyRegime {
            name: "eo-14110".into(),
            // 1e20 OP/s aggregate.
            node_compute_threshold: Some(1e20 / (H100_EQUIVALENT_TFLOPS * 1e12)),
            node_memory_threshold_gb: None,
            model_flop_thresholds: vec![
                ModelThreshold::new("reporting", 1e26),
                ModelThreshold {
                    label: "reporting-bio".into(),
                    flop: 1e23,
                    biological_only: true,
                },
            ],
            bandwidth_cap_bps: Some(300e9),
        },
        PolicyRegime {
            name: "eu-ai-act".into(),
            node_compute_threshold: None,
            node_memory_threshold_gb: None,
            model_flop_thresholds: vec![ModelThreshold::new("systemic-risk", 1e25)],
            bandwidth_cap_bps: None,
        },
        PolicyRegime {
            name: "sb-53".into(),
            node_compute_threshold: None,
            node_memory_threshold_gb: None,
            model_flop_thresholds: vec![ModelThreshold::new("frontier", 1e26)],
            bandwidth_cap_bps: None,
        },
        scher,
        amended,
    ]
}

pub fn regime(name: &str) -> Result<PolicyRegime> {
    let key = name.trim().to_ascii_lowercase();
    let all = builtin_regimes();
    if let Some(r) = all.iter().find(|r| r.name == key) {
        return Ok(r.clone());
    }
    let suggestion = all
        .iter()
        .min_by_key(|r| strsim::levenshtein(&r.name, &key))
        .map(|r| r.name.clone());
    Err(Error::UnknownPreset {
        name: name.to_string(),
        suggestion,
    })
}
