//! End-to-end evaluation of one training run: time bound, throughput,
//! `C_local = C_throughput·η`, `C_quality = C_local·χ`, cost, traffic and
//! compliance.

use serde::{Deserialize, Serialize};

use crate::catalog::{cluster_cost, max_model_params, BytesPerParam, NodeSpec, Precision};
use crate::efficiency::{
    total_inefficiency, DilocoConfig, DilocoMode, EfficiencyBreakdown, EfficiencyParams, ScenarioMode,
};
use crate::error::{Error, Result};
use crate::network::{self, NetworkConditions, TrafficProfile, DEFAULT_TOKENS_PER_STEP};
use crate::policy::{compliance_report, ComplianceReport, PolicyRegime};
use crate::scaling::{overtraining_ratio, ChinchillaParams, TrainedModel, DEFAULT_R_OPT};

pub const DAYS_PER_YEAR: f64 = 365.25;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const DEFAULT_DURATION_DAYS: f64 = 740.0;
pub const DEFAULT_MFU: f64 = 0.40;
pub const GPU_HOURS_PER_FAILURE: f64 = 50_000.0;
/// Share of a pipeline group's peak throughput that turns into training
/// progress, relative to a data-parallel node.
pub const DEFAULT_PIPELINE_THROUGHPUT_FACTOR: f64 = 1.0 / 15.0;

/// Annual growth rates as fractions (0.5 = ×1.5 per year).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRates {
    pub g_h: f64,
    pub g_s: f64,
    pub g_i: f64,
}

impl GrowthRates {
    /// Hardware, software and investment growth under a restricted regime.
    pub const RESTRICTED: GrowthRates = GrowthRates {
        g_h: 0.06,
        g_s: 0.50,
        g_i: 0.03,
    };
    pub const UNRESTRICTED: GrowthRates = GrowthRates {
        g_h: 0.37,
        g_s: 2.0,
        g_i: 2.5,
    };
}

/// Longest run worth starting, in days: past it, waiting for better hardware,
/// software and budgets beats training longer. The rates are turned into
/// continuous rates via `ln(1 + g)`.
pub fn max_training_time(rates: &GrowthRates) -> Result<f64> {
    for (key, g) in [("g_h", rates.g_h), ("g_s", rates.g_s), ("g_i", rates.g_i)] {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::invalid(key, format!("growth rate must be ≥ 0, got {g}")));
        }
    }
    let total = rates.g_h.ln_1p() + rates.g_s.ln_1p() + rates.g_i.ln_1p();
    if total == 0.0 {
        return Err(Error::UnboundedTime);
    }
    Ok(DAYS_PER_YEAR / total)
}

pub fn expected_hardware_failures(total_chips: f64, duration_days: f64) -> f64 {
    total_chips * duration_days * 24.0 / GPU_HOURS_PER_FAILURE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelSize {
    /// Largest model that fits in a node's (or pipeline group's) memory.
    #[default]
    Auto,
    Params(f64),
}

/// Model constants shared by every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumptions {
    pub mfu: f64,
    pub tokens_per_step: f64,
    pub efficiency: EfficiencyParams,
    pub chinchilla: ChinchillaParams,
    pub r_opt: f64,
    pub bytes_per_param: BytesPerParam,
    pub pipeline_throughput_factor: f64,
}

impl Default for Assumptions {
    fn default() -> Self {
        Assumptions {
            mfu: DEFAULT_MFU,
            tokens_per_step: DEFAULT_TOKENS_PER_STEP,
            efficiency: EfficiencyParams::default(),
            chinchilla: ChinchillaParams::default(),
            r_opt: DEFAULT_R_OPT,
            bytes_per_param: BytesPerParam::default(),
            pipeline_throughput_factor: DEFAULT_PIPELINE_THROUGHPUT_FACTOR,
        }
    }
}

impl Assumptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.mfu > 0.0 && self.mfu <= 1.0) {
            return Err(Error::invalid(
                "hardware.mfu",
                format!("must lie in (0, 1], got {}", self.mfu),
            ));
        }
        if !(self.tokens_per_step >= 0.0 && self.tokens_per_step.is_finite()) {
            return Err(Error::invalid("training.tokens_per_step", "must be ≥ 0"));
        }
        if !(self.r_opt > 0.0 && self.r_opt.is_finite()) {
            return Err(Error::invalid("scaling.r_opt", "must be positive"));
        }
        if !(self.bytes_per_param.fp8 > 0.0 && self.bytes_per_param.fp16 > 0.0) {
            return Err(Error::invalid("memory.bytes_per_param", "must be positive"));
        }
        if !(self.pipeline_throughput_factor > 0.0 && self.pipeline_throughput_factor <= 1.0) {
            return Err(Error::invalid("run.pipeline_throughput_factor", "must lie in (0, 1]"));
        }
        self.efficiency.validate()?;
        self.chinchilla.validate()
    }

    pub fn scenario(&self) -> ScenarioMode {
        self.efficiency.scenario
    }

    fn throughput_factor(&self, mode: DilocoMode) -> f64 {
        match mode {
            DilocoMode::Pipeline => self.pipeline_throughput_factor,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub node: NodeSpec,
    pub n_nodes: u32,
    pub precision: Precision,
    pub diloco: DilocoConfig,
    pub net: NetworkConditions,
    pub duration_days: f64,
    pub model: ModelSize,
    pub assumptions: Assumptions,
    /// Regime to check the run against, if any.
    #[serde(default)]
    pub regime: Option<PolicyRegime>,
    /// Training data is mainly biological sequences.
    #[serde(default)]
    pub biological: bool,
}

impl RunConfig {
    /// Largest model the memory of one replica (a node, or a pipeline group) holds.
    pub fn memory_max_params(&self) -> f64 {
        max_model_params(
            self.node.node_hbm_gb(),
            self.precision,
            &self.assumptions.bytes_per_param,
        ) * f64::from(self.diloco.stages)
    }

    pub fn n_params(&self) -> f64 {
        match self.model {
            ModelSize::Auto => self.memory_max_params(),
            ModelSize::Params(n) => n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(Error::infeasible("n_nodes", "a run needs at least one node"));
        }
        self.diloco.validate()?;
        if self.diloco.mode == DilocoMode::Pipeline && !self.n_nodes.is_multiple_of(self.diloco.stages) {
            return Err(Error::invalid(
                "diloco.stages",
                format!(
                    "{} nodes do not split into {}-stage pipelines",
                    self.n_nodes, self.diloco.stages
                ),
            ));
        }
        if self.diloco.nodes() != self.n_nodes {
            return Err(Error::invalid(
                "diloco.replicas",
                format!(
                    "{} replicas × {} stages occupy {} nodes, not {}",
                    self.diloco.replicas,
                    self.diloco.stages,
                    self.diloco.nodes(),
                    self.n_nodes
                ),
            ));
        }
        if !(self.duration_days > 0.0 && self.duration_days.is_finite()) {
            return Err(Error::invalid("training.duration_days", "must be positive"));
        }
        self.node.validate()?;
        self.node.node_flops(self.precision)?;
        self.net.validate()?;
        self.assumptions.validate()?;
        if let Some(r) = &self.regime {
            r.validate()?;
        }
        let n = self.n_params();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid("training.model_params", "must be positive"));
        }
        let max = self.memory_max_params();
        if n > max * (1.0 + 1e-12) {
            return Err(Error::infeasible(
                "memory",
                format!(
                    "{:.1}B parameters need more than the {:.0} GB a {} holds ({:.1}B max)",
                    n / 1e9,
                    self.node.node_hbm_gb() * f64::from(self.diloco.stages),
                    if self.diloco.stages > 1 {
                        "pipeline group"
                    } else {
                        "node"
                    },
                    max / 1e9
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub n_params: f64,
    #[serde(with = "crate::report::flop")]
    pub c_throughput: f64,
    pub eta: EfficiencyBreakdown,
    #[serde(with = "crate::report::flop")]
    pub c_local: f64,
    pub chi: f64,
    #[serde(with = "crate::report::flop")]
    pub c_quality: f64,
    pub d_tokens: f64,
    pub ot: f64,
    /// `None` for unpriced presets.
    pub cost: Option<f64>,
    pub step_time_s: f64,
    pub traffic: TrafficProfile,
    pub expected_failures: f64,
    pub compliance: Option<ComplianceReport>,
    pub warnings: Vec<String>,
}

/// Per-node quantities that do not depend on the node count.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NodeRate {
    pub step_time_s: f64,
    pub traffic: TrafficProfile,
    /// Training FLOP one node contributes over the run, before η.
    pub flop_per_node: f64,
}

pub(crate) fn node_rate(
    node_flops: f64,
    n_params: f64,
    diloco: &DilocoConfig,
    net: &NetworkConditions,
    duration_days: f64,
    a: &Assumptions,
) -> NodeRate {
    let stages = f64::from(diloco.stages);
    let factor = a.throughput_factor(diloco.mode);
    let step_time_s = network::step_time(n_params, a.tokens_per_step, node_flops * stages * factor, a.mfu);
    // Each pipeline stage exchanges its own shard.
    let payload = network::sync_payload(n_params / stages, diloco.compression);
    let traffic = network::traffic(diloco.h, net, step_time_s, payload);
    let flop_per_node = node_flops * a.mfu * factor * duration_days * SECONDS_PER_DAY / traffic.slowdown;
    NodeRate {
        step_time_s,
        traffic,
        flop_per_node,
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Outcome {
    pub c_throughput: f64,
    pub eta: EfficiencyBreakdown,
    pub c_local: f64,
}

pub(crate) fn outcome(rate: &NodeRate, n_nodes: u32, diloco: &DilocoConfig, n_params: f64, a: &Assumptions) -> Outcome {
    let c_throughput = f64::from(n_nodes) * rate.flop_per_node;
    let eta = total_inefficiency(diloco, n_params, &a.efficiency);
    Outcome {
        c_throughput,
        eta,
        c_local: c_throughput * eta.eta,
    }
}

/// `(d_tokens, χ, C_quality)` for a run reaching `c_local`.
pub(crate) fn quality(c_local: f64, n_params: f64, a: &Assumptions) -> (f64, f64, f64) {
    let d_tokens = c_local / (6.0 * n_params);
    let chi = if d_tokens > 0.0 {
        a.chinchilla.quality_penalty(&TrainedModel::new(n_params, d_tokens))
    } else {
        1.0
    };
    (d_tokens, chi, c_local * chi)
}

pub fn simulate(cfg: &RunConfig) -> Result<RunMetrics> {
    cfg.validate()?;
    let a = &cfg.assumptions;
    let n_params = cfg.n_params();
    let node_flops = cfg.node.node_flops(cfg.precision)?;
    let rate = node_rate(node_flops, n_params, &cfg.diloco, &cfg.net, cfg.duration_days, a);
    let out = outcome(&rate, cfg.n_nodes, &cfg.diloco, n_params, a);
    let (d_tokens, chi, c_quality) = quality(out.c_local, n_params, a);
    let cost = match cluster_cost(&cfg.node, cfg.n_nodes) {
        Ok(c) => Some(c),
        Err(Error::MissingPrice { .. }) => None,
        Err(e) => return Err(e),
    };

    let mut warnings = Vec::new();
    if out.eta.clamped {
        warnings.push(format!(
            "an efficiency factor hit the floor {}; results are extrapolated",
            a.efficiency.clamp_floor
        ));
    }
    if !rate.traffic.compute_bound {
        warnings.push(format!(
            "not compute-bound: each sync takes {:.1} s against {:.1} s of compute, slowing the run {:.2}×",
            rate.traffic.sync_wall_time_s,
            f64::from(cfg.diloco.h) * rate.step_time_s,
            rate.traffic.slowdown
        ));
    }
    if rate.traffic.latency_ratio < 100.0 {
        warnings.push(format!(
            "round-trip time is not negligible: transmission is only {:.1}× the RTT",
            rate.traffic.latency_ratio
        ));
    }
    if cost.is_none() {
        warnings.push(format!("preset `{}` has no price; cost omitted", cfg.node.name));
    }

    let compliance = cfg
        .regime
        .as_ref()
        .map(|r| compliance_report(&cfg.node, out.c_local, c_quality, r, cfg.biological));
    let chips = f64::from(cfg.node.chips_per_node) * f64::from(cfg.n_nodes);
    Ok(RunMetrics {
        n_params,
        c_throughput: out.c_throughput,
        eta: out.eta,
        c_local: out.c_local,
        chi,
        c_quality,
        d_tokens,
        ot: overtraining_ratio(&TrainedModel::new(n_params, d_tokens), a.r_opt),
        cost,
        step_time_s: rate.step_time_s,
        traffic: rate.traffic,
        expected_failures: expected_hardware_failures(chips, cfg.duration_days),
        compliance,
        warnings,
    })
}
