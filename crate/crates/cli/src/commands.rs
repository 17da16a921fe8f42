use std::path::Path;

use dtsim_core::catalog::Catalog;
use dtsim_core::optimizer::min_cost_config;
use dtsim_core::report::{emit_table, format_flop, regenerate, ResultRecord, TableFormat, TablePreset};
use dtsim_core::scenario::Scenario;
use dtsim_core::{simulate, Error, Result, ScenarioMode};

/// Flags every command accepts on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario_mode: Option<ScenarioMode>,
    pub duration_days: Option<f64>,
    pub regime: Option<String>,
}

impl Overrides {
    pub fn apply(&self, sc: &mut Scenario) {
        sc.override_with(self.scenario_mode, self.duration_days, self.regime.as_deref());
    }
}

/// What a command prints: the table on stdout, notes on stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub notes: Vec<String>,
}

/// 2 for malformed input, 3 for well-formed but impossible requests.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_infeasible() {
        3
    } else {
        2
    }
}

pub fn load_scenario(path: &Path, o: &Overrides) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid("scenario", format!("cannot read {}: {e}", path.display())))?;
    let mut sc = Scenario::parse(&text)?;
    o.apply(&mut sc);
    Ok(sc)
}

pub fn simulate_scenario(sc: &Scenario, catalog: &Catalog, format: TableFormat) -> Result<Output> {
    let cfg = sc.to_run_config(catalog)?;
    let m = simulate(&cfg)?;
    let record = ResultRecord::from_run("scenario", &cfg, &m);
    Ok(Output {
        stdout: emit_table(&[record], format),
        notes: m.warnings,
    })
}

pub fn optimize_scenario(sc: &Scenario, catalog: &Catalog, format: TableFormat) -> Result<Output> {
    let req = sc.to_optimization_request(catalog)?;
    let best = min_cost_config(&req)?;
    let label = format!("{} ≥ {}", req.target_metric.label(), format_flop(req.target_value));
    let mut notes: Vec<String> = best
        .binding_constraints
        .iter()
        .map(|c| format!("binding: {c}"))
        .collect();
    if let Some(m) = &best.metrics {
        notes.extend(m.warnings.iter().cloned());
    }
    Ok(Output {
        stdout: emit_table(&[ResultRecord::from_optimal(label, &best)], format),
        notes,
    })
}

pub fn table(preset: TablePreset, sc: &Scenario, catalog: &Catalog, format: TableFormat) -> Result<Output> {
    Ok(Output {
        stdout: emit_table(&regenerate(preset, sc, catalog)?, format),
        notes: Vec::new(),
    })
}
