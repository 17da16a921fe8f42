use std::path::PathBuf;

use dtsim_core::catalog::Catalog;
use dtsim_core::report::{emit_table, regenerate, ResultRecord, TableFormat, TablePreset, HEADERS};
use dtsim_core::scenario::Scenario;
use dtsim_core::{simulate, Error, ScenarioMode};

fn shipped(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    Scenario::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn run(sc: &Scenario) -> ResultRecord {
    let cfg = sc.to_run_config(&Catalog::builtin()).unwrap();
    ResultRecord::from_run("scenario", &cfg, &simulate(&cfg).unwrap())
}

#[test]
fn first_table_row_costs_its_published_amount() {
    let r = run(&shipped("table1_row1.scn"));
    assert!((r.cost.unwrap() - 1_613_760.0).abs() < 1e-6);
    assert!((r.c_local / 1.3e24 - 1.0).abs() < 0.05, "{}", r.c_local);
    assert_eq!(r.violations, vec!["monitored-floor", "ban"]);
    assert_eq!(r.registrable, Some(false));
}

#[test]
fn empty_file_uses_defaults() {
    let sc = Scenario::parse("").unwrap();
    let r = run(&sc);
    assert_eq!(r.nodes, 2);
    assert_eq!(r.node_config, run(&shipped("table1_row1.scn")).node_config);
}

#[test]
fn eight_stage_pipeline_under_conservative_mode() {
    let sc = shipped("pipeline_8stage.scn");
    let cfg = sc.to_run_config(&Catalog::builtin()).unwrap();
    let m = simulate(&cfg).unwrap();
    assert!((m.eta.eta_act - 0.56).abs() < 0.02, "{}", m.eta.eta_act);
    assert_eq!(cfg.assumptions.scenario(), ScenarioMode::Conservative);

    // Expected mode keeps more quality at the same node count.
    let mut expected = sc.clone();
    expected.override_with(Some(ScenarioMode::Expected), None, None);
    let e = simulate(&expected.to_run_config(&Catalog::builtin()).unwrap()).unwrap();
    assert!(e.c_quality > m.c_quality);
}

#[test]
fn flagship_is_compute_bound_under_forty_mbps() {
    let r = run(&shipped("flagship_1e25.scn"));
    assert!(r.compute_bound);
    assert!(r.traffic_mbps < 40.0);
    assert!((r.cost.unwrap() / 30.7e6 - 1.0).abs() < 0.005);
}

#[test]
fn optimize_scenarios_build_requests() {
    for name in ["optimize_1e25.scn", "countermeasure_amended.scn"] {
        let req = shipped(name).to_optimization_request(&Catalog::builtin()).unwrap();
        assert_eq!(req.target_value, 1e25);
    }
}

#[test]
fn parse_errors_name_line_and_key() {
    match Scenario::parse("hardware.node = 16xH100\nhardware.nodez = 3\n") {
        Err(Error::Parse { line, key, message }) => {
            assert_eq!((line, key.as_str()), (2, "hardware.nodez"));
            assert!(message.contains("hardware.node"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn infeasible_node_count_names_the_constraint() {
    let sc = Scenario::parse("hardware.n_nodes = 0").unwrap();
    let err = sc
        .to_run_config(&Catalog::builtin())
        .and_then(|c| simulate(&c))
        .unwrap_err();
    assert!(err.is_infeasible());
    assert!(err.to_string().contains("n_nodes"), "{err}");
}

#[test]
fn first_table_regenerates_seven_rows() {
    let rows = regenerate(TablePreset::Table1, &Scenario::default(), &Catalog::builtin()).unwrap();
    assert_eq!(rows.len(), 7);
    let labels: Vec<&str> = rows.iter().map(|r| r.target.as_str()).collect();
    assert_eq!(labels[0], "1e24");
    assert_eq!(labels[6], "1e26");
    // Higher targets cost at least as much.
    assert!(rows.windows(2).all(|w| w[1].cost >= w[0].cost));
    assert!((rows[0].model_params / 91.4e9 - 1.0).abs() < 0.01);

    let text = emit_table(&rows, TableFormat::Text);
    assert_eq!(text.lines().count(), 8);
    assert_eq!(text, emit_table(&rows, TableFormat::Text));
    let csv_out = emit_table(&rows, TableFormat::Csv);
    let mut rd = csv::Reader::from_reader(csv_out.as_bytes());
    assert_eq!(rd.headers().unwrap().len(), HEADERS.len());
    assert_eq!(rd.records().count(), 7);
    let json: Vec<ResultRecord> = serde_json::from_str(&emit_table(&rows, TableFormat::Json)).unwrap();
    assert_eq!(json, rows);
}
