//! Exhaustive reference search shared by the integration and acceptance
//! targets. It only calls `simulate`, so it shares no search code with the
//! optimizer.

#![allow(dead_code)]

use std::cmp::Ordering;

use dtsim_core::catalog::{cluster_cost, Catalog, Precision};
use dtsim_core::optimizer::{OptimalConfig, OptimizationRequest, SearchSpace, TargetMetric};
use dtsim_core::policy::{node_registrable, regime};
use dtsim_core::{simulate, DilocoConfig, DilocoMode, ModelSize, NetworkConditions, RunConfig};
use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct Best {
    pub cost: f64,
    pub config: RunConfig,
}

fn layouts(grids: &SearchSpace, n: u32, h: u32, compression: f64) -> Vec<DilocoConfig> {
    let mut out = Vec::new();
    if grids.modes.contains(&DilocoMode::Flat) {
        out.push(DilocoConfig::flat(n, h, compression));
    }
    if grids.modes.contains(&DilocoMode::Hierarchical) {
        for &g in &grids.group_grid {
            let inner = n.div_ceil(g).max(2);
            out.push(DilocoConfig::hierarchical(g, inner, h, compression));
        }
    }
    if grids.modes.contains(&DilocoMode::Pipeline) {
        for &s in grids.stage_grid.iter().filter(|&&s| s > 1) {
            out.push(DilocoConfig::pipeline(s, n.div_ceil(s), h, compression));
        }
    }
    out
}

fn order(
    a: &(f64, u32, u32, f64, usize, Precision, DilocoMode, u32, u32),
    b: &(f64, u32, u32, f64, usize, Precision, DilocoMode, u32, u32),
) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
        .then(a.3.total_cmp(&b.3))
        .then(a.4.cmp(&b.4))
        .then(a.5.cmp(&b.5))
        .then(a.6.cmp(&b.6))
        .then(a.7.cmp(&b.7))
        .then(a.8.cmp(&b.8))
}

/// Every grid point through `simulate`; ties broken by cost, node count, H,
/// model size, node index, precision, mode, stages, groups.
pub fn brute_force(req: &OptimizationRequest) -> Option<Best> {
    let models = req
        .grids
        .model_grid
        .clone()
        .expect("oracle needs an explicit model grid");
    let mut best: Option<((f64, u32, u32, f64, usize, Precision, DilocoMode, u32, u32), RunConfig)> = None;
    for (idx, node) in req.nodes.iter().enumerate() {
        if node.chip.price_usd.is_none() {
            continue;
        }
        if let Some(r) = &req.regime {
            if node_registrable(node, r).registrable {
                continue;
            }
        }
        for &precision in &req.grids.precisions {
            if !node.supports(precision) {
                continue;
            }
            for &n in &req.grids.n_nodes_grid {
                for &h in &req.grids.h_grid {
                    for diloco in layouts(&req.grids, n, h, req.compression) {
                        for &model in &models {
                            let cfg = RunConfig {
                                node: node.clone(),
                                n_nodes: diloco.nodes(),
                                precision,
                                diloco,
                                net: req.net,
                                duration_days: req.duration_days,
                                model: ModelSize::Params(model),
                                assumptions: req.assumptions.clone(),
                                regime: None,
                                biological: false,
                            };
                            let Ok(m) = simulate(&cfg) else { continue };
                            let reached = match req.target_metric {
                                TargetMetric::CLocal => m.c_local,
                                TargetMetric::CQuality => m.c_quality,
                            };
                            if reached < req.target_value {
                                continue;
                            }
                            let cost = cluster_cost(node, cfg.n_nodes).unwrap();
                            let groups = match diloco.mode {
                                DilocoMode::Hierarchical => diloco.groups.unwrap().0,
                                _ => 0,
                            };
                            let key = (
                                cost,
                                cfg.n_nodes,
                                h,
                                model,
                                idx,
                                precision,
                                diloco.mode,
                                diloco.stages,
                                groups,
                            );
                            if best.as_ref().is_none_or(|(k, _)| order(&key, k) == Ordering::Less) {
                                best = Some((key, cfg));
                            }
                        }
                    }
                }
            }
        }
    }
    best.map(|(k, config)| Best { cost: k.0, config })
}

fn no_eligible_node(req: &OptimizationRequest) -> bool {
    req.nodes
        .iter()
        .all(|n| n.chip.price_usd.is_none() || req.regime.as_ref().is_some_and(|r| node_registrable(n, r).registrable))
}

/// `Ok` when the optimizer and the oracle pick the same configuration.
pub fn agree(req: &OptimizationRequest, got: &dtsim_core::Result<OptimalConfig>) -> Result<(), String> {
    let want = brute_force(req);
    match (got, want) {
        (Err(dtsim_core::Error::TargetUnreachable { .. }), None) => Ok(()),
        (Err(e), None) if e.is_infeasible() && no_eligible_node(req) => Ok(()),
        (Ok(o), Some(w)) => {
            let c = o.config.as_ref().ok_or("optimizer returned no configuration")?;
            let same = o.cost == w.cost
                && c.node.name == w.config.node.name
                && c.precision == w.config.precision
                && c.n_nodes == w.config.n_nodes
                && c.diloco == w.config.diloco
                && c.model == w.config.model;
            if same {
                Ok(())
            } else {
                Err(format!(
                    "optimizer {} × {} {:?} {:?} ${}, oracle {} × {} {:?} {:?} ${}",
                    c.n_nodes,
                    c.node.name,
                    c.diloco,
                    c.model,
                    o.cost,
                    w.config.n_nodes,
                    w.config.node.name,
                    w.config.diloco,
                    w.config.model,
                    w.cost
                ))
            }
        }
        (got, want) => Err(format!(
            "optimizer {:?} vs oracle {:?}",
            got.as_ref().map(|o| o.cost),
            want.map(|w| w.cost)
        )),
    }
}

/// Requests whose grids hold at most 5,000 points.
pub fn small_request() -> impl Strategy<Value = OptimizationRequest> {
    let presets = [
        "16xH100",
        "16xGH200",
        "50xA100",
        "26xAscend910C",
        "34xTPUv5p",
        "GH200 NVL32",
    ];
    (
        proptest::sample::subsequence(presets.to_vec(), 1..=2),
        proptest::sample::subsequence(vec![1u32, 2, 3, 5, 8, 12, 20, 32, 50, 80, 128, 200], 4..=6),
        proptest::sample::subsequence(vec![1u32, 2, 4, 8, 16, 32, 64, 100], 2..=4),
        proptest::sample::subsequence(vec![5e9, 2e10, 4e10, 7e10, 9e10, 1.5e11, 2.5e11], 2..=3),
        proptest::sample::subsequence(
            vec![DilocoMode::Flat, DilocoMode::Hierarchical, DilocoMode::Pipeline],
            1..=3,
        ),
        21.0f64..24.8,
        prop_oneof![Just(10.0), Just(100.0), Just(1000.0)],
        any::<bool>(),
        prop_oneof![Just("scher"), Just("scher-amended"), Just("none")],
    )
        .prop_map(
            |(names, counts, hs, models, modes, log_target, mbps, quality, regime_name)| {
                let cat = Catalog::builtin();
                let nodes = names.iter().map(|n| cat.lookup_preset(n).unwrap()).collect();
                let metric = if quality {
                    TargetMetric::CQuality
                } else {
                    TargetMetric::CLocal
                };
                let mut req = OptimizationRequest::new(metric, 10f64.powf(log_target), nodes);
                req.net = NetworkConditions::symmetric_mbps(mbps, 100.0);
                req.regime = (regime_name != "none").then(|| regime(regime_name).unwrap());
                req.grids = SearchSpace {
                    h_grid: hs,
                    n_nodes_grid: counts,
                    model_grid: Some(models),
                    modes,
                    stage_grid: vec![1, 2, 4],
                    group_grid: vec![2, 4],
                    ..SearchSpace::default()
                };
                req
            },
        )
}

/// Upper bound on the grid points `brute_force` visits.
pub fn grid_points(req: &OptimizationRequest) -> usize {
    let g = &req.grids;
    let layouts = g
        .modes
        .iter()
        .map(|m| match m {
            DilocoMode::Flat => 1,
            DilocoMode::Hierarchical => g.group_grid.len(),
            DilocoMode::Pipeline => g.stage_grid.iter().filter(|&&s| s > 1).count(),
        })
        .sum::<usize>();
    req.nodes.len()
        * g.precisions.len()
        * layouts
        * g.n_nodes_grid.len()
        * g.h_grid.len()
        * g.model_grid.as_ref().map_or(0, Vec::len)
}
