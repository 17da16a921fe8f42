//! Minimum-cost search over node type, precision, DiLoCo layout, model size,
//! inner steps and node count.
//!
//! For a fixed (node, precision, layout, model, H) the target metric is
//! non-decreasing in node count whenever the divergence exponent is below 1,
//! so the first qualifying count is found by bisection; otherwise the counts
//! are scanned in order. Node counts whose cost already exceeds the best cost
//! found so far are skipped. Ties resolve on cost, then nodes, H, model size,
//! catalog order, precision, mode, stages and groups.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{cluster_cost, max_model_params, NodeSpec, Precision};
use crate::efficiency::{DilocoConfig, DilocoMode, ScenarioMode};
use crate::error::{Error, Result};
use crate::network::NetworkConditions;
use crate::policy::{node_registrable, PolicyRegime};
use crate::run_model::{
    node_rate, outcome, quality, simulate, Assumptions, ModelSize, RunConfig, RunMetrics, DEFAULT_DURATION_DAYS,
};

pub const DEFAULT_COMPRESSION: f64 = 150.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetMetric {
    #[default]
    CLocal,
    CQuality,
}

impl TargetMetric {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "c_local" | "local" => Some(TargetMetric::CLocal),
            "c_quality" | "quality" => Some(TargetMetric::CQuality),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TargetMetric::CLocal => "c_local",
            TargetMetric::CQuality => "c_quality",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub h_grid: Vec<u32>,
    pub n_nodes_grid: Vec<u32>,
    /// Explicit model sizes; when absent, `model_points` log-spaced sizes from
    /// `model_min` up to each replica's memory maximum.
    pub model_grid: Option<Vec<f64>>,
    pub model_points: usize,
    pub model_min: f64,
    pub modes: Vec<DilocoMode>,
    /// Pipeline stage counts; 1 stands for the non-pipeline modes.
    pub stage_grid: Vec<u32>,
    /// Outer group counts for hierarchical mode.
    pub group_grid: Vec<u32>,
    pub precisions: Vec<Precision>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            h_grid: (1..=128).collect(),
            n_nodes_grid: geometric_counts(1.05, 10_000),
            model_grid: None,
            model_points: 64,
            model_min: 1e9,
            modes: vec![DilocoMode::Flat, DilocoMode::Hierarchical, DilocoMode::Pipeline],
            stage_grid: vec![1, 2, 4, 8],
            group_grid: vec![2, 4, 8, 10, 12, 16],
            precisions: vec![Precision::Fp8, Precision::Fp16],
        }
    }
}

/// Distinct rounded powers of `ratio` from 1 up to `max`.
pub fn geometric_counts(ratio: f64, max: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut x = 1.0f64;
    while x.round() <= f64::from(max) {
        out.push(x.round() as u32);
        x *= ratio;
    }
    out.dedup();
    out
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let mut v: Vec<f64> = (0..points)
                .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
                .collect();
            v[0] = lo;
            v[points - 1] = hi;
            v
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        fn sorted_nonempty<T: PartialOrd>(key: &str, v: &[T]) -> Result<()> {
            if v.is_empty() {
                return Err(Error::invalid(key, "grid is empty"));
            }
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(key, "grid must be strictly increasing"));
            }
            Ok(())
        }
        sorted_nonempty("optimize.h_grid", &self.h_grid)?;
        sorted_nonempty("optimize.nodes", &self.n_nodes_grid)?;
        sorted_nonempty("optimize.stage_grid", &self.stage_grid)?;
        if self.h_grid[0] == 0 || self.n_nodes_grid[0] == 0 || self.stage_grid[0] == 0 {
            return Err(Error::invalid("optimize", "grid values must be at least 1"));
        }
        if self.modes.is_empty() {
            return Err(Error::invalid("optimize.modes", "no modes to search"));
        }
        if self.precisions.is_empty() {
            return Err(Error::invalid("optimize.precisions", "no precisions to search"));
        }
        if self.modes.contains(&DilocoMode::Hierarchical) {
            sorted_nonempty("optimize.group_grid", &self.group_grid)?;
            if self.group_grid[0] < 1 {
                return Err(Error::invalid("optimize.group_grid", "groups must be at least 1"));
            }
        }
        match &self.model_grid {
            Some(g) => {
                sorted_nonempty("optimize.model_grid", g)?;
                if !(g[0] > 0.0) {
                    return Err(Error::invalid("optimize.model_grid", "model sizes must be positive"));
                }
            }
            None => {
                if self.model_points == 0 || !(self.model_min > 0.0) {
                    return Err(Error::invalid(
                        "optimize.model_points",
                        "need a positive count and minimum size",
                    ));
                }
            }
        }
        Ok(())
    }

    fn models(&self, memory_max: f64) -> Vec<f64> {
        match &self.model_grid {
            Some(g) => g.iter().copied().filter(|&n| n <= memory_max).collect(),
            None if memory_max <= self.model_min => vec![memory_max],
            None => log_space(self.model_min, memory_max, self.model_points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRequest {
    pub target_metric: TargetMetric,
    pub target_value: f64,
    /// Nodes registrable under this regime are excluded.
    pub regime: Option<PolicyRegime>,
    pub net: NetworkConditions,
    pub duration_days: f64,
    /// Candidate node types; defaults to every priced preset.
    pub nodes: Vec<NodeSpec>,
    pub grids: SearchSpace,
    pub compression: f64,
    pub assumptions: Assumptions,
}

impl OptimizationRequest {
    pub fn new(target_metric: TargetMetric, target_value: f64, nodes: Vec<NodeSpec>) -> Self {
        OptimizationRequest {
            target_metric,
            target_value,
            regime: None,
            net: NetworkConditions::default(),
            duration_days: DEFAULT_DURATION_DAYS,
            nodes,
            grids: SearchSpace::default(),
            compression: DEFAULT_COMPRESSION,
            assumptions: Assumptions::default(),
        }
    }

    pub fn scenario(&self) -> ScenarioMode {
        self.assumptions.scenario()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_value.is_finite()) {
            return Err(Error::invalid("optimize.target_flop", "must be finite"));
        }
        if !(self.duration_days > 0.0 && self.duration_days.is_finite()) {
            return Err(Error::invalid("training.duration_days", "must be positive"));
        }
        if !(self.compression >= 1.0 && self.compression.is_finite()) {
            return Err(Error::invalid("diloco.compression", "must be ≥ 1"));
        }
        if self.nodes.is_empty() {
            return Err(Error::invalid("optimize.node_types", "no candidate node types"));
        }
        for n in &self.nodes {
            n.validate()?;
        }
        if let Some(r) = &self.regime {
            r.validate()?;
        }
        self.net.validate()?;
        self.assumptions.validate()?;
        self.grids.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalConfig {
    /// `None` for a target met by no hardware at all.
    pub config: Option<RunConfig>,
    pub metrics: Option<RunMetrics>,
    pub cost: f64,
    pub binding_constraints: Vec<String>,
}

impl OptimalConfig {
    pub fn nodes(&self) -> u32 {
        self.config.as_ref().map_or(0, |c| c.n_nodes)
    }

    fn empty() -> Self {
        OptimalConfig {
            config: None,
            metrics: None,
            cost: 0.0,
            binding_constraints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Layout {
    Flat,
    Hier(u32),
    Pipe(u32),
}

impl Layout {
    fn stages(self) -> u32 {
        match self {
            Layout::Pipe(s) => s,
            _ => 1,
        }
    }

    fn mode(self) -> DilocoMode {
        match self {
            Layout::Flat => DilocoMode::Flat,
            Layout::Hier(_) => DilocoMode::Hierarchical,
            Layout::Pipe(_) => DilocoMode::Pipeline,
        }
    }

    fn groups(self) -> u32 {
        match self {
            Layout::Hier(g) => g,
            _ => 0,
        }
    }

    /// Configuration for a requested count `n`, rounded up to whole groups.
    fn config(self, n: u32, h: u32, compression: f64) -> DilocoConfig {
        match self {
            Layout::Flat => DilocoConfig::flat(n, h, compression),
            Layout::Hier(g) => DilocoConfig::hierarchical(g, n.div_ceil(g).max(2), h, compression),
            Layout::Pipe(s) => DilocoConfig::pipeline(s, n.div_ceil(s), h, compression),
        }
    }
}

/// Everything that orders candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    cost: f64,
    nodes: u32,
    h: u32,
    model: f64,
    node_index: usize,
    precision: Precision,
    mode: DilocoMode,
    stages: u32,
    groups: u32,
}

impl Key {
    fn cmp(&self, other: &Key) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.nodes.cmp(&other.nodes))
            .then(self.h.cmp(&other.h))
            .then(self.model.total_cmp(&other.model))
            .then(self.node_index.cmp(&other.node_index))
            .then(self.precision.cmp(&other.precision))
            .then(self.mode.cmp(&other.mode))
            .then(self.stages.cmp(&other.stages))
            .then(self.groups.cmp(&other.groups))
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    key: Key,
    diloco: DilocoConfig,
}

fn better(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.key.cmp(&a.key) == Ordering::Less { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

struct Combo<'a> {
    node_index: usize,
    node: &'a NodeSpec,
    precision: Precision,
    layout: Layout,
    node_flops: f64,
}

/// Node types the regime allows and the cost model can price.
fn eligible(req: &OptimizationRequest) -> Vec<(usize, &NodeSpec)> {
    req.nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.chip.price_usd.is_some())
        .filter(|(_, n)| req.regime.as_ref().is_none_or(|r| !node_registrable(n, r).registrable))
        .collect()
}

fn combos(req: &OptimizationRequest) -> Vec<Combo<'_>> {
    let g = &req.grids;
    let mut layouts = Vec::new();
    for mode in [DilocoMode::Flat, DilocoMode::Hierarchical, DilocoMode::Pipeline] {
        if !g.modes.contains(&mode) {
            continue;
        }
        match mode {
            DilocoMode::Flat => layouts.push(Layout::Flat),
            DilocoMode::Hierarchical => layouts.extend(g.group_grid.iter().map(|&k| Layout::Hier(k))),
            DilocoMode::Pipeline => layouts.extend(g.stage_grid.iter().filter(|&&s| s > 1).map(|&s| Layout::Pipe(s))),
        }
    }
    let mut precisions = g.precisions.clone();
    precisions.sort_unstable();
    precisions.dedup();
    let mut out = Vec::new();
    for (node_index, node) in eligible(req) {
        for &precision in &precisions {
            let Ok(node_flops) = node.node_flops(precision) else {
                continue;
            };
            for &layout in &layouts {
                out.push(Combo {
                    node_index,
                    node,
                    precision,
                    layout,
                    node_flops,
                });
            }
        }
    }
    out
}

fn node_cost(combo: &Combo, nodes: u32) -> f64 {
    cluster_cost(combo.node, nodes).expect("eligible nodes are priced")
}

fn metric(req: &OptimizationRequest, c_local: f64, n_params: f64) -> f64 {
    match req.target_metric {
        TargetMetric::CLocal => c_local,
        TargetMetric::CQuality => quality(c_local, n_params, &req.assumptions).2,
    }
}

/// First index in `0..len` where `pred` fails, for a predicate that holds on
/// a prefix.
fn first_failing(len: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, len);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Best candidate for one (combo, model) and the largest metric seen.
fn search_model(
    req: &OptimizationRequest,
    combo: &Combo,
    n_params: f64,
    incumbent: &AtomicU64,
) -> (Option<Candidate>, f64) {
    let a = &req.assumptions;
    let counts = &req.grids.n_nodes_grid;
    let mut best: Option<Candidate> = None;
    let mut achieved = 0.0f64;
    for &h in &req.grids.h_grid {
        let template = combo.layout.config(1, h, req.compression);
        let rate = node_rate(combo.node_flops, n_params, &template, &req.net, req.duration_days, a);
        let eval = |i: usize| {
            let diloco = combo.layout.config(counts[i], h, req.compression);
            let nodes = diloco.nodes();
            let out = outcome(&rate, nodes, &diloco, n_params, a);
            (metric(req, out.c_local, n_params), diloco, nodes)
        };
        let cost_of = |i: usize| node_cost(combo, combo.layout.config(counts[i], h, 1.0).nodes());

        // Counts beyond the incumbent's cost cannot win.
        let limit = f64::from_bits(incumbent.load(AtomicOrdering::Relaxed));
        let hi = if limit.is_finite() {
            first_failing(counts.len(), |i| cost_of(i) <= limit)
        } else {
            counts.len()
        };
        if hi == 0 {
            continue;
        }

        let exponent = a.efficiency.gamma(n_params) * a.efficiency.divergence_ramp(h);
        let found = if exponent < 1.0 {
            let (top, _, _) = eval(hi - 1);
            achieved = achieved.max(top);
            if top < req.target_value {
                None
            } else {
                Some(first_failing(hi - 1, |i| eval(i).0 < req.target_value))
            }
        } else {
            let mut hit = None;
            for i in 0..hi {
                let m = eval(i).0;
                achieved = achieved.max(m);
                if m >= req.target_value {
                    hit = Some(i);
                    break;
                }
            }
            hit
        };
        let Some(i) = found else { continue };
        let (_, diloco, nodes) = eval(i);
        let cost = node_cost(combo, nodes);
        let cand = Candidate {
            key: Key {
                cost,
                nodes,
                h,
                model: n_params,
                node_index: combo.node_index,
                precision: combo.precision,
                mode: combo.layout.mode(),
                stages: combo.layout.stages(),
                groups: combo.layout.groups(),
            },
            diloco,
        };
        best = better(best, Some(cand));
        incumbent.fetch_min(cost.to_bits(), AtomicOrdering::Relaxed);
    }
    (best, achieved)
}

/// Cheapest grid configuration whose target metric reaches the target value.
pub fn min_cost_config(req: &OptimizationRequest) -> Result<OptimalConfig> {
    req.validate()?;
    if req.target_value <= 0.0 {
        return Ok(OptimalConfig::empty());
    }
    let combos = combos(req);
    if combos.is_empty() {
        return Err(Error::infeasible(
            "regime",
            "no priced node type stays below the registration thresholds",
        ));
    }
    let tasks: Vec<(usize, f64)> = combos
        .iter()
        .enumerate()
        .flat_map(|(c, combo)| {
            let memory = max_model_params(
                combo.node.node_hbm_gb(),
                combo.precision,
                &req.assumptions.bytes_per_param,
            ) * f64::from(combo.layout.stages());
            req.grids.models(memory).into_iter().map(move |n| (c, n))
        })
        .collect();

    // Costs are positive, so their bit patterns order like the values.
    let incumbent = AtomicU64::new(f64::INFINITY.to_bits());
    let (best, achieved) = tasks
        .par_iter()
        .map(|&(c, n)| search_model(req, &combos[c], n, &incumbent))
        .reduce(|| (None, 0.0), |(a, x), (b, y)| (better(a, b), x.max(y)));

    let Some(best) = best else {
        return Err(Error::TargetUnreachable {
            target: req.target_value,
            best_achieved: achieved,
        });
    };
    let node = req.nodes[best.key.node_index].clone();
    let config = RunConfig {
        node,
        n_nodes: best.key.nodes,
        precision: best.key.precision,
        diloco: best.diloco,
        net: req.net,
        duration_days: req.duration_days,
        model: ModelSize::Params(best.key.model),
        assumptions: req.assumptions.clone(),
        regime: req.regime.clone(),
        biological: false,
    };
    let metrics = simulate(&config)?;
    let binding_constraints = binding_constraints(req, &config, &metrics);
    Ok(OptimalConfig {
        cost: best.key.cost,
        config: Some(config),
        metrics: Some(metrics),
        binding_constraints,
    })
}

fn binding_constraints(req: &OptimizationRequest, cfg: &RunConfig, m: &RunMetrics) -> Vec<String> {
    let mut out = Vec::new();
    if m.n_params >= cfg.memory_max_params() * (1.0 - 1e-9) {
        out.push(format!(
            "memory: model fills the {:.0} GB per replica",
            cfg.node.node_hbm_gb() * f64::from(cfg.diloco.stages)
        ));
    }
    if !m.traffic.compute_bound {
        out.push(format!("bandwidth: sync slows the run {:.2}×", m.traffic.slowdown));
    }
    if let Some(r) = &req.regime {
        if let Some(t) = r.node_compute_threshold {
            out.push(format!("regime {}: ≤ {t} H100-equivalents per node", r.name));
        }
        if let Some(t) = r.node_memory_threshold_gb {
            out.push(format!("regime {}: ≤ {t} GB per node", r.name));
        }
    }
    out.push(format!("duration: {} days", req.duration_days));
    out
}

/// One optimization per link condition; rows fail independently.
pub fn bandwidth_sweep(req: &OptimizationRequest, bandwidths: &[NetworkConditions]) -> Vec<Result<OptimalConfig>> {
    bandwidths
        .iter()
        .map(|net| {
            let r = OptimizationRequest {
                net: *net,
                ..req.clone()
            };
            min_cost_config(&r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountermeasureImpact {
    pub baseline: OptimalConfig,
    pub amended: OptimalConfig,
    pub cost_ratio: f64,
    pub node_ratio: f64,
    /// Largest model one unregistered node holds under each regime.
    pub max_model_baseline: f64,
    pub max_model_amended: f64,
}

/// Largest memory-limited model over the node types a regime leaves unregistered.
pub fn max_unregistered_model(req: &OptimizationRequest, regime: &PolicyRegime) -> f64 {
    let r = OptimizationRequest {
        regime: Some(regime.clone()),
        ..req.clone()
    };
    eligible(&r)
        .into_iter()
        .flat_map(|(_, n)| {
            req.grids
                .precisions
                .iter()
                .filter(|&&p| n.supports(p))
                .map(|&p| max_model_params(n.node_hbm_gb(), p, &req.assumptions.bytes_per_param))
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

pub fn countermeasure_impact(
    req: &OptimizationRequest,
    baseline: &PolicyRegime,
    amended: &PolicyRegime,
) -> Result<CountermeasureImpact> {
    let run = |regime: &PolicyRegime| {
        min_cost_config(&OptimizationRequest {
            regime: Some(regime.clone()),
            ..req.clone()
        })
    };
    let base = run(baseline)?;
    let amend = if baseline == amended {
        base.clone()
    } else {
        run(amended)?
    };
    let ratio = |a: f64, b: f64| if a == b { 1.0 } else { a / b };
    Ok(CountermeasureImpact {
        cost_ratio: ratio(amend.cost, base.cost),
        node_ratio: ratio(f64::from(amend.nodes()), f64::from(base.nodes())),
        max_model_baseline: max_unregistered_model(req, baseline),
        max_model_amended: max_unregistered_model(req, amended),
        baseline: base,
        amended: amend,
    })
}
