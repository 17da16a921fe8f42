//! Scenario input shared by the scenario file and the JSON API.
//!
//! A scenario file is flat `section.key = value` lines with `#` comments.
//! The same keys, nested one level (`{"hardware": {"node": …}}`), form the
//! JSON request body. Every field is optional; an empty scenario describes
//! two 16×H100 nodes training at 100 Mbps for 740 days.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::catalog::{Catalog, NodeSpec, Precision};
use crate::efficiency::{CompressionAnchor, DilocoConfig, DilocoMode, ScenarioMode, ScenarioValues};
use crate::error::{Error, Result};
use crate::network::NetworkConditions;
use crate::optimizer::{OptimizationRequest, SearchSpace, TargetMetric, DEFAULT_COMPRESSION};
use crate::policy::{self, ModelThreshold, PolicyRegime};
use crate::run_model::{Assumptions, ModelSize, RunConfig, DEFAULT_DURATION_DAYS};

pub const DEFAULT_NODE: &str = "16xH100";
pub const DEFAULT_N_NODES: u32 = 2;
pub const DEFAULT_H: u32 = 18;
pub const DEFAULT_REGIME: &str = "scher";
pub const DEFAULT_BANDWIDTH_MBPS: f64 = 100.0;
pub const DEFAULT_RTT_MS: f64 = 100.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hardware {
    #[serde(deserialize_with = "flex_string", skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_nodes: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<Precision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mfu: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Training {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_days: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tokens_per_step: Option<f64>,
    /// `auto`, a count, or a count with a K/M/B/T suffix.
    #[serde(deserialize_with = "flex_string", skip_serializing_if = "Option::is_none")]
    pub model_params: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub biological: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Diloco {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compression: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<DilocoMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u32>,
    /// `8x12` (outer × inner) or just the outer count.
    #[serde(deserialize_with = "flex_string", skip_serializing_if = "Option::is_none")]
    pub groups: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Efficiency {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_h1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_h_scale: Option<f64>,
    /// `ratio:factor` pairs, e.g. `1:1, 150:0.99`, for every scenario mode.
    #[serde(deserialize_with = "flex_string", skip_serializing_if = "Option::is_none")]
    pub eta_comp_table: Option<String>,
    /// Per-boundary factor for the selected scenario mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_act: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_floor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Chinchilla {
    #[serde(rename = "E", skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scaling {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_opt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Network {
    /// Sets both directions; the directional keys override it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_up_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_down_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtt_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Policy {
    /// Built-in regime name, or `none`.
    #[serde(deserialize_with = "flex_string", skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_compute_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_memory_threshold_gb: Option<f64>,
    /// `label:flop` pairs replacing the regime's model thresholds.
    #[serde(deserialize_with = "flex_string", skip_serializing_if = "Option::is_none")]
    pub model_flop_thresholds: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Optimize {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_metric: Option<TargetMetric>,
    #[serde(deserialize_with = "flex_f64", skip_serializing_if = "Option::is_none")]
    pub target_flop: Option<f64>,
    /// Comma-separated presets; all priced presets when absent.
    #[serde(deserialize_with = "flex_string", skip_serializing_if = "Option::is_none")]
    pub node_types: Option<String>,
    /// Comma-separated subset of `flat, hier, pipeline`.
    #[serde(deserialize_with = "flex_string", skip_serializing_if = "Option::is_none")]
    pub modes: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_nodes: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Memory {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes_per_param_fp8: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes_per_param_fp16: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Run {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline_throughput_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub hardware: Hardware,
    pub training: Training,
    pub diloco: Diloco,
    pub efficiency: Efficiency,
    pub chinchilla: Chinchilla,
    pub scaling: Scaling,
    pub network: Network,
    pub policy: Policy,
    pub optimize: Optimize,
    pub memory: Memory,
    pub run: Run,
}

/// Every key a scenario file accepts.
pub const KEYS: &[&str] = &[
    "hardware.node",
    "hardware.n_nodes",
    "hardware.precision",
    "hardware.mfu",
    "training.duration_days",
    "training.tokens_per_step",
    "training.model_params",
    "training.biological",
    "diloco.h",
    "diloco.compression",
    "diloco.mode",
    "diloco.replicas",
    "diloco.groups",
    "diloco.stages",
    "efficiency.scenario",
    "efficiency.alpha0",
    "efficiency.n_ref",
    "efficiency.kappa",
    "efficiency.gamma0",
    "efficiency.gamma_slope",
    "efficiency.gamma_h1",
    "efficiency.gamma_h_scale",
    "efficiency.eta_comp_table",
    "efficiency.f_act",
    "efficiency.clamp_floor",
    "chinchilla.E",
    "chinchilla.A",
    "chinchilla.B",
    "chinchilla.alpha",
    "chinchilla.beta",
    "scaling.r_opt",
    "network.bandwidth_mbps",
    "network.bandwidth_up_mbps",
    "network.bandwidth_down_mbps",
    "network.rtt_ms",
    "network.topology_factor",
    "policy.regime",
    "policy.node_compute_threshold",
    "policy.node_memory_threshold_gb",
    "policy.model_flop_thresholds",
    "optimize.target_metric",
    "optimize.target_flop",
    "optimize.node_types",
    "optimize.modes",
    "optimize.max_nodes",
    "optimize.h_max",
    "optimize.model_points",
    "memory.bytes_per_param_fp8",
    "memory.bytes_per_param_fp16",
    "run.pipeline_throughput_factor",
];

fn flex_string<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    match Option::<Value>::deserialize(d)? {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(Value::Bool(b)) => Ok(Some(b.to_string())),
        Some(other) => Err(serde::de::Error::custom(format!("expected a string, got {other}"))),
    }
}

/// Numbers may arrive as JSON numbers or as decimal strings.
fn flex_f64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    match Option::<Value>::deserialize(d)? {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => Ok(n.as_f64()),
        Some(Value::String(s)) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| serde::de::Error::custom(format!("`{s}` is not a number"))),
        Some(other) => Err(serde::de::Error::custom(format!("expected a number, got {other}"))),
    }
}

fn scalar(raw: &str) -> Value {
    let v = raw.trim();
    if let Ok(i) = v.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(f) = v.parse::<f64>() {
        if f.is_finite() {
            return Value::from(f);
        }
    }
    match v {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(v.trim_matches('"').to_string()),
    }
}

fn unknown_key(key: &str) -> String {
    let suggestion = KEYS
        .iter()
        .min_by_key(|k| strsim::levenshtein(k, key))
        .filter(|k| strsim::levenshtein(k, key) <= 4);
    match suggestion {
        Some(s) => format!("unknown key (did you mean `{s}`?)"),
        None => "unknown key".to_string(),
    }
}

fn key_error(line: usize, key: &str) -> Error {
    Error::Parse {
        line,
        key: key.to_string(),
        message: unknown_key(key),
    }
}

impl Scenario {
    /// Parses scenario-file text. Errors carry the 1-based line and key.
    pub fn parse(text: &str) -> Result<Self> {
        let mut root = Map::new();
        let mut lines: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    key: content.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(key_error(line, key));
            }
            if let Some(first) = lines.insert(key.to_string(), line) {
                return Err(Error::Parse {
                    line,
                    key: key.to_string(),
                    message: format!("duplicate key, first set on line {first}"),
                });
            }
            let (section, field) = key.split_once('.').expect("known keys are dotted");
            let entry = root.entry(section).or_insert_with(|| Value::Object(Map::new()));
            entry
                .as_object_mut()
                .expect("sections are objects")
                .insert(field.to_string(), scalar(value));
        }
        serde_path_to_error::deserialize(Value::Object(root)).map_err(|e| {
            let key = e.path().to_string();
            Error::Parse {
                line: lines.get(&key).copied().unwrap_or(0),
                key,
                message: e.into_inner().to_string(),
            }
        })
    }

    /// Parses a JSON request body, either nested by section or keyed by the
    /// dotted file keys. Errors name the offending field path.
    pub fn from_json(body: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(body).map_err(|e| Error::invalid("body", e.to_string()))?;
        let value = match value {
            Value::Object(map) if map.keys().any(|k| k.contains('.')) => {
                let mut root = Map::new();
                for (key, v) in map {
                    let Some((section, field)) = key.split_once('.').filter(|_| KEYS.contains(&key.as_str())) else {
                        let message = unknown_key(&key);
                        return Err(Error::invalid(key, message));
                    };
                    root.entry(section)
                        .or_insert_with(|| Value::Object(Map::new()))
                        .as_object_mut()
                        .ok_or_else(|| Error::invalid(section, "mixes nested and dotted keys"))?
                        .insert(field.to_string(), v);
                }
                Value::Object(root)
            }
            other => other,
        };
        serde_path_to_error::deserialize(value).map_err(|e| {
            let key = e.path().to_string();
            Error::invalid(key, e.into_inner().to_string())
        })
    }

    /// Flat `key = value` text that parses back to this scenario.
    pub fn to_file(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serializes");
        let mut out = String::new();
        if let Value::Object(sections) = value {
            for key in KEYS {
                let (section, field) = key.split_once('.').expect("dotted");
                if let Some(v) = sections.get(section).and_then(|s| s.get(field)) {
                    let text = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    out.push_str(&format!("{key} = {text}\n"));
                }
            }
        }
        out
    }

    /// Applies command-line overrides that exist for every command.
    pub fn override_with(&mut self, scenario: Option<ScenarioMode>, duration_days: Option<f64>, regime: Option<&str>) {
        if scenario.is_some() {
            self.efficiency.scenario = scenario;
        }
        if duration_days.is_some() {
            self.training.duration_days = duration_days;
        }
        if let Some(r) = regime {
            self.policy.regime = Some(r.to_string());
        }
    }

    pub fn node(&self, catalog: &Catalog) -> Result<NodeSpec> {
        catalog.lookup_preset(self.hardware.node.as_deref().unwrap_or(DEFAULT_NODE))
    }

    pub fn assumptions(&self) -> Result<Assumptions> {
        let mut a = Assumptions::default();
        set(&mut a.mfu, self.hardware.mfu);
        set(&mut a.tokens_per_step, self.training.tokens_per_step);
        set(&mut a.r_opt, self.scaling.r_opt);
        set(&mut a.pipeline_throughput_factor, self.run.pipeline_throughput_factor);
        set(&mut a.bytes_per_param.fp8, self.memory.bytes_per_param_fp8);
        set(&mut a.bytes_per_param.fp16, self.memory.bytes_per_param_fp16);

        let c = &self.chinchilla;
        set(&mut a.chinchilla.e, c.e);
        set(&mut a.chinchilla.a, c.a);
        set(&mut a.chinchilla.b, c.b);
        set(&mut a.chinchilla.alpha, c.alpha);
        set(&mut a.chinchilla.beta, c.beta);

        let e = &self.efficiency;
        let p = &mut a.efficiency;
        if let Some(s) = e.scenario {
            p.scenario = s;
        }
        set(&mut p.alpha0, e.alpha0);
        set(&mut p.n_ref, e.n_ref);
        set(&mut p.kappa, e.kappa);
        set(&mut p.gamma0, e.gamma0);
        set(&mut p.gamma_slope, e.gamma_slope);
        set(&mut p.gamma_h1, e.gamma_h1);
        set(&mut p.gamma_h_scale, e.gamma_h_scale);
        set(&mut p.clamp_floor, e.clamp_floor);
        if let Some(f) = e.f_act {
            p.f_act.set(p.scenario, f);
        }
        if let Some(table) = &e.eta_comp_table {
            p.eta_comp_table = parse_pairs("efficiency.eta_comp_table", table)?
                .into_iter()
                .map(|(ratio, factor)| {
                    let ratio = ratio
                        .parse::<f64>()
                        .map_err(|_| Error::invalid("efficiency.eta_comp_table", format!("bad ratio `{ratio}`")))?;
                    Ok(CompressionAnchor {
                        ratio,
                        factor: ScenarioValues::uniform(factor),
                    })
                })
                .collect::<Result<_>>()?;
        }
        a.validate()?;
        Ok(a)
    }

    pub fn network(&self) -> NetworkConditions {
        let n = &self.network;
        let both = n.bandwidth_mbps.unwrap_or(DEFAULT_BANDWIDTH_MBPS);
        let mut net = NetworkConditions::mbps(
            n.bandwidth_up_mbps.unwrap_or(both),
            n.bandwidth_down_mbps.unwrap_or(both),
            n.rtt_ms.unwrap_or(DEFAULT_RTT_MS),
        );
        set(&mut net.topology_factor, n.topology_factor);
        net
    }

    /// The selected regime with inline overrides, or `None` for `policy.regime = none`.
    pub fn regime(&self) -> Result<Option<PolicyRegime>> {
        let p = &self.policy;
        let name = p.regime.as_deref().unwrap_or(DEFAULT_REGIME);
        let inline = p.node_compute_threshold.is_some()
            || p.node_memory_threshold_gb.is_some()
            || p.model_flop_thresholds.is_some();
        let mut regime = if name.eq_ignore_ascii_case("none") {
            if !inline {
                return Ok(None);
            }
            PolicyRegime {
                name: "custom".into(),
                node_compute_threshold: None,
                node_memory_threshold_gb: None,
                model_flop_thresholds: Vec::new(),
                bandwidth_cap_bps: None,
            }
        } else {
            policy::regime(name).map_err(|e| Error::invalid("policy.regime", e.to_string()))?
        };
        if p.node_compute_threshold.is_some() {
            regime.node_compute_threshold = p.node_compute_threshold;
        }
        if p.node_memory_threshold_gb.is_some() {
            regime.node_memory_threshold_gb = p.node_memory_threshold_gb;
        }
        if let Some(t) = &p.model_flop_thresholds {
            regime.model_flop_thresholds = parse_pairs("policy.model_flop_thresholds", t)?
                .into_iter()
                .map(|(label, flop)| ModelThreshold::new(label, flop))
                .collect();
        }
        if inline && !name.eq_ignore_ascii_case("none") {
            regime.name = format!("{}+custom", regime.name);
        }
        regime.validate()?;
        Ok(Some(regime))
    }

    pub fn model_size(&self) -> Result<ModelSize> {
        match self.training.model_params.as_deref().map(str::trim) {
            None => Ok(ModelSize::Auto),
            Some(s) if s.eq_ignore_ascii_case("auto") => Ok(ModelSize::Auto),
            Some(s) => parse_count(s)
                .map(ModelSize::Params)
                .ok_or_else(|| Error::invalid("training.model_params", format!("`{s}` is neither `auto` nor a count"))),
        }
    }

    fn diloco(&self, n_nodes: u32, compression: f64) -> Result<DilocoConfig> {
        let d = &self.diloco;
        let h = d.h.unwrap_or(DEFAULT_H);
        let mode = d.mode.unwrap_or(DilocoMode::Flat);
        let mut cfg = match mode {
            DilocoMode::Flat => DilocoConfig::flat(n_nodes, h, compression),
            DilocoMode::Pipeline => {
                let stages = d.stages.unwrap_or(2).max(1);
                DilocoConfig::pipeline(stages, n_nodes / stages, h, compression)
            }
            DilocoMode::Hierarchical => {
                let spec = d
                    .groups
                    .as_deref()
                    .ok_or_else(|| Error::invalid("diloco.groups", "hierarchical mode needs groups, e.g. `8x12`"))?;
                let (outer, inner) = parse_groups(spec, n_nodes)?;
                DilocoConfig::hierarchical(outer, inner, h, compression)
            }
        };
        if let Some(s) = d.stages {
            cfg.stages = s;
        }
        if let Some(r) = d.replicas {
            cfg.replicas = r;
        }
        Ok(cfg)
    }

    pub fn to_run_config(&self, catalog: &Catalog) -> Result<RunConfig> {
        let node = self.node(catalog)?;
        let n_nodes = self.hardware.n_nodes.unwrap_or(DEFAULT_N_NODES);
        let precision = self.hardware.precision.unwrap_or(if node.supports(Precision::Fp8) {
            Precision::Fp8
        } else {
            Precision::Fp16
        });
        let compression = self.diloco.compression.unwrap_or(DEFAULT_COMPRESSION);
        Ok(RunConfig {
            diloco: self.diloco(n_nodes, compression)?,
            node,
            n_nodes,
            precision,
            net: self.network(),
            duration_days: self.training.duration_days.unwrap_or(DEFAULT_DURATION_DAYS),
            model: self.model_size()?,
            assumptions: self.assumptions()?,
            regime: self.regime()?,
            biological: self.training.biological.unwrap_or(false),
        })
    }

    pub fn to_optimization_request(&self, catalog: &Catalog) -> Result<OptimizationRequest> {
        let o = &self.optimize;
        let nodes = match &o.node_types {
            Some(list) => split_list(list)
                .map(|name| catalog.lookup_preset(name))
                .collect::<Result<Vec<_>>>()?,
            None => catalog.priced().cloned().collect(),
        };
        let mut grids = SearchSpace::default();
        if let Some(modes) = &o.modes {
            grids.modes = split_list(modes)
                .map(|m| {
                    DilocoMode::parse(m).ok_or_else(|| Error::invalid("optimize.modes", format!("unknown mode `{m}`")))
                })
                .collect::<Result<_>>()?;
        }
        if let Some(max) = o.max_nodes {
            grids.n_nodes_grid.retain(|&n| n <= max);
        }
        if let Some(h) = o.h_max {
            grids.h_grid = (1..=h).collect();
        }
        if let Some(p) = o.model_points {
            grids.model_points = p;
        }
        if let Some(p) = self.hardware.precision {
            grids.precisions = vec![p];
        }
        let target_value = o
            .target_flop
            .ok_or_else(|| Error::invalid("optimize.target_flop", "optimize needs a target"))?;
        Ok(OptimizationRequest {
            target_metric: o.target_metric.unwrap_or_default(),
            target_value,
            regime: self.regime()?,
            net: self.network(),
            duration_days: self.training.duration_days.unwrap_or(DEFAULT_DURATION_DAYS),
            nodes,
            grids,
            compression: self.diloco.compression.unwrap_or(DEFAULT_COMPRESSION),
            assumptions: self.assumptions()?,
        })
    }
}

fn set(slot: &mut f64, v: Option<f64>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

/// `a:1, b:2` → `[("a", 1.0), ("b", 2.0)]`.
fn parse_pairs<'a>(key: &str, s: &'a str) -> Result<Vec<(&'a str, f64)>> {
    split_list(s)
        .map(|pair| {
            let (label, v) = pair
                .split_once(':')
                .ok_or_else(|| Error::invalid(key, format!("`{pair}` is not `label:value`")))?;
            let v = v
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(key, format!("`{v}` is not a number")))?;
            Ok((label.trim(), v))
        })
        .collect()
}

/// `91e9`, `91B`, `1.5T`.
pub fn parse_count(s: &str) -> Option<f64> {
    let s = s.trim();
    let (digits, scale) = match s.chars().last()?.to_ascii_uppercase() {
        'K' => (&s[..s.len() - 1], 1e3),
        'M' => (&s[..s.len() - 1], 1e6),
        'B' | 'G' => (&s[..s.len() - 1], 1e9),
        'T' => (&s[..s.len() - 1], 1e12),
        _ => (s, 1.0),
    };
    let v = digits.trim().parse::<f64>().ok()? * scale;
    (v > 0.0 && v.is_finite()).then_some(v)
}

fn parse_groups(spec: &str, n_nodes: u32) -> Result<(u32, u32)> {
    let bad = || Error::invalid("diloco.groups", format!("`{spec}` is not `outer` or `outer x inner`"));
    let parts: Vec<&str> = spec.split(['x', 'X', '×']).map(str::trim).collect();
    match parts.as_slice() {
        [outer] => {
            let outer: u32 = outer.parse().map_err(|_| bad())?;
            if outer == 0 || !n_nodes.is_multiple_of(outer) {
                return Err(Error::invalid(
                    "diloco.groups",
                    format!("{n_nodes} nodes do not split into {outer} equal groups"),
                ));
            }
            Ok((outer, n_nodes / outer))
        }
        [outer, inner] => Ok((outer.parse().map_err(|_| bad())?, inner.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}
