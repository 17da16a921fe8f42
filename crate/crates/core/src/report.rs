//! Result records in the minimum-cost table's column layout, and their
//! text, CSV, JSON and Markdown renderings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::optimizer::{bandwidth_sweep, min_cost_config, OptimalConfig, OptimizationRequest};
use crate::run_model::{RunConfig, RunMetrics};
use crate::scenario::Scenario;
use crate::tables::{bandwidth_conditions, TARGETS};

/// FLOP counts as decimal strings in JSON; numbers are accepted on input.
pub mod flop {
    use serde::{Deserialize, Deserializer, Serializer};
    use serde_json::Value;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| serde::de::Error::custom("FLOP value out of range")),
            Value::String(s) => s
                .trim()
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("`{s}` is not a FLOP value"))),
            other => Err(serde::de::Error::custom(format!("expected a FLOP value, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub target: String,
    pub node_config: String,
    pub nodes: u32,
    pub mode: String,
    pub model_params: f64,
    pub h: u32,
    pub eta: f64,
    #[serde(with = "flop")]
    pub c_local: f64,
    pub chi: f64,
    #[serde(with = "flop")]
    pub c_quality: f64,
    pub ot: f64,
    pub cost: Option<f64>,
    pub traffic_mbps: f64,
    pub compute_bound: bool,
    pub registrable: Option<bool>,
    pub violations: Vec<String>,
}

impl ResultRecord {
    pub fn from_run(target: impl Into<String>, cfg: &RunConfig, m: &RunMetrics) -> Self {
        ResultRecord {
            target: target.into(),
            node_config: cfg.node.label(cfg.precision),
            nodes: cfg.n_nodes,
            mode: cfg.diloco.mode_label(),
            model_params: m.n_params,
            h: cfg.diloco.h,
            eta: m.eta.eta,
            c_local: m.c_local,
            chi: m.chi,
            c_quality: m.c_quality,
            ot: m.ot,
            cost: m.cost,
            traffic_mbps: m.traffic.average_traffic_bps / 1e6,
            compute_bound: m.traffic.compute_bound,
            registrable: m.compliance.as_ref().map(|c| c.node_registrable),
            violations: m
                .compliance
                .as_ref()
                .map(|c| c.model_violations.iter().map(|v| v.label.clone()).collect())
                .unwrap_or_default(),
        }
    }

    pub fn from_optimal(target: impl Into<String>, opt: &OptimalConfig) -> Self {
        match (&opt.config, &opt.metrics) {
            (Some(cfg), Some(m)) => ResultRecord::from_run(target, cfg, m),
            _ => ResultRecord {
                target: target.into(),
                node_config: "none".into(),
                nodes: 0,
                mode: "-".into(),
                model_params: 0.0,
                h: 0,
                eta: 1.0,
                c_local: 0.0,
                chi: 1.0,
                c_quality: 0.0,
                ot: 0.0,
                cost: Some(0.0),
                traffic_mbps: 0.0,
                compute_bound: true,
                registrable: None,
                violations: Vec::new(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Text,
    Csv,
    Json,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(TableFormat::Text),
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(format!("unknown format `{other}` (text, csv, json, markdown)")),
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Text => "text",
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
            TableFormat::Markdown => "markdown",
        })
    }
}

pub const HEADERS: [&str; 16] = [
    "Target",
    "Node Config",
    "Nodes",
    "Mode",
    "Model",
    "H",
    "η",
    "C_local",
    "χ",
    "C_quality",
    "OT",
    "Cost",
    "Traffic",
    "Compute-bound",
    "Registrable",
    "Violations",
];

const CSV_HEADERS: [&str; 16] = [
    "target",
    "node_config",
    "nodes",
    "mode",
    "model",
    "h",
    "eta",
    "c_local",
    "chi",
    "c_quality",
    "ot",
    "cost",
    "traffic_mbps",
    "compute_bound",
    "registrable",
    "violations",
];

/// `1.3e24`.
pub fn format_flop(v: f64) -> String {
    format!("{v:.1e}")
}

/// `$1.6M`, `$441.3M`, `$2.32B`.
pub fn format_cost(v: Option<f64>) -> String {
    match v {
        None => "n/a".into(),
        Some(0.0) => "$0".into(),
        Some(c) if c >= 1e9 => format!("${:.2}B", c / 1e9),
        Some(c) if c >= 1e5 => format!("${:.1}M", c / 1e6),
        Some(c) => format!("${:.0}K", c / 1e3),
    }
}

/// `91B`, `2.5B`.
pub fn format_params(n: f64) -> String {
    let b = n / 1e9;
    if b >= 10.0 {
        format!("{b:.0}B")
    } else {
        format!("{b:.1}B")
    }
}

/// `1.3×`, `21×`.
pub fn format_ratio(v: f64) -> String {
    if v >= 10.0 {
        format!("{v:.0}×")
    } else {
        format!("{v:.1}×")
    }
}

fn cells(r: &ResultRecord) -> [String; 16] {
    [
        r.target.clone(),
        r.node_config.clone(),
        r.nodes.to_string(),
        r.mode.clone(),
        format_params(r.model_params),
        r.h.to_string(),
        format!("{:.4}", r.eta),
        format_flop(r.c_local),
        format!("{:.4}", r.chi),
        format_flop(r.c_quality),
        format_ratio(r.ot),
        format_cost(r.cost),
        format!("{:.1} Mbps", r.traffic_mbps),
        if r.compute_bound { "yes" } else { "no" }.into(),
        match r.registrable {
            Some(true) => "yes".into(),
            Some(false) => "no".into(),
            None => "-".into(),
        },
        r.violations.join("; "),
    ]
}

/// Renders records; output depends only on the records.
pub fn emit_table(records: &[ResultRecord], format: TableFormat) -> String {
    match format {
        TableFormat::Json => {
            let mut s = serde_json::to_string_pretty(records).expect("records serialize");
            s.push('\n');
            s
        }
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADERS).expect("in-memory write");
            for r in records {
                w.write_record(cells(r)).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
        }
        TableFormat::Markdown => {
            let mut s = format!("| {} |\n", HEADERS.join(" | "));
            s.push_str(&format!("|{}\n", "---|".repeat(HEADERS.len())));
            for r in records {
                let row: Vec<String> = cells(r).iter().map(|c| c.replace('|', "\\|")).collect();
                s.push_str(&format!("| {} |\n", row.join(" | ")));
            }
            s
        }
        TableFormat::Text => {
            let rows: Vec<[String; 16]> = records.iter().map(cells).collect();
            let mut widths: Vec<usize> = HEADERS.iter().map(|h| h.chars().count()).collect();
            for row in &rows {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |row: &[String]| {
                let padded: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                    .collect();
                format!("{}\n", padded.join("  ").trim_end())
            };
            let header: Vec<String> = HEADERS.iter().map(|h| h.to_string()).collect();
            let mut s = line(&header);
            for row in &rows {
                s.push_str(&line(row));
            }
            s
        }
    }
}

/// Regenerable minimum-cost tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TablePreset {
    /// Cheapest configuration per compute target at the scenario's link.
    Table1,
    /// Cheapest configuration per link condition at the scenario's target.
    Table2,
}

impl FromStr for TablePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table1" => Ok(TablePreset::Table1),
            "table2" => Ok(TablePreset::Table2),
            other => Err(Error::invalid(
                "table",
                format!("unknown preset `{other}` (table1, table2)"),
            )),
        }
    }
}

/// Target used by `table2` when the scenario sets none.
pub const TABLE2_TARGET: f64 = 1e25;

/// Builds the rows of a preset; scenario keys (regime, duration, node types,
/// grids, assumptions) apply to every row.
///
/// Unless the scenario sets `optimize.model_points`, each row trains the
/// largest model its nodes hold, as the published tables do. With the
/// default efficiency fit η does not depend on model size, so this changes
/// the model column and χ but not the cost.
pub fn regenerate(preset: TablePreset, scenario: &Scenario, catalog: &Catalog) -> Result<Vec<ResultRecord>> {
    let mut sc = scenario.clone();
    sc.optimize.target_flop.get_or_insert(TABLE2_TARGET);
    sc.optimize.model_points.get_or_insert(1);
    let base = sc.to_optimization_request(catalog)?;
    match preset {
        TablePreset::Table1 => TARGETS
            .iter()
            .map(|&(label, target)| {
                let req = OptimizationRequest {
                    target_value: target,
                    ..base.clone()
                };
                min_cost_config(&req).map(|o| ResultRecord::from_optimal(label, &o))
            })
            .collect(),
        TablePreset::Table2 => {
            let conditions = bandwidth_conditions();
            let nets: Vec<_> = conditions.iter().map(|(_, n)| *n).collect();
            bandwidth_sweep(&base, &nets)
                .into_iter()
                .zip(conditions)
                .map(|(r, (label, _))| r.map(|o| ResultRecord::from_optimal(label, &o)))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> ResultRecord {
        ResultRecord {
            target: "1e24".into(),
            node_config: "16×H100 FP8".into(),
            nodes: 2,
            mode: "Flat".into(),
            model_params: 91.4e9,
            h: 18,
            eta: 0.7957,
            c_local: 1.3e24,
            chi: 0.9796,
            c_quality: 1.27e24,
            ot: 1.31,
            cost: Some(1_613_760.0),
            traffic_mbps: 10.2,
            compute_bound: true,
            registrable: Some(false),
            violations: vec!["monitored-floor".into(), "ban".into()],
        }
    }

    #[test]
    fn compact_cells() {
        assert_eq!(format_flop(1.3e24), "1.3e24");
        assert_eq!(format_cost(Some(1_613_760.0)), "$1.6M");
        assert_eq!(format_cost(Some(441.3e6)), "$441.3M");
        assert_eq!(format_cost(Some(2.3243e9)), "$2.32B");
        assert_eq!(format_params(91.4e9), "91B");
        assert_eq!(format_ratio(1.31), "1.3×");
        assert_eq!(format_ratio(21.2), "21×");
    }

    #[test]
    fn json_is_an_array_with_string_flops() {
        let s = emit_table(&[record()], TableFormat::Json);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 1);
        assert!(v[0]["c_local"].is_string());
        let back: Vec<ResultRecord> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![record()]);
    }

    #[test]
    fn csv_quotes_and_parses_back() {
        let mut r = record();
        r.target = "a, \"quoted\" target".into();
        let s = emit_table(&[r.clone()], TableFormat::Csv);
        let mut rd = csv::Reader::from_reader(s.as_bytes());
        let row = rd.records().next().unwrap().unwrap();
        assert_eq!(&row[0], "a, \"quoted\" target");
        assert_eq!(&row[11], "$1.6M");
        assert_eq!(&row[15], "monitored-floor; ban");
    }

    #[test]
    fn text_and_markdown_are_stable() {
        let a = emit_table(&[record(), record()], TableFormat::Text);
        assert_eq!(a, emit_table(&[record(), record()], TableFormat::Text));
        assert_eq!(a.lines().count(), 3);
        let md = emit_table(&[record()], TableFormat::Markdown);
        assert!(md.starts_with("| Target | Node Config |"));
        assert_eq!(md.lines().count(), 3);
    }

    #[test]
    fn format_names_parse() {
        assert_eq!("md".parse::<TableFormat>().unwrap(), TableFormat::Markdown);
        assert!("xml".parse::<TableFormat>().is_err());
    }
}
