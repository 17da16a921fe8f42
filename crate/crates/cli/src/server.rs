//! Stateless JSON endpoints over the core simulator.

use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dtsim_core::catalog::Catalog;
use dtsim_core::optimizer::{min_cost_config, SearchSpace, DEFAULT_COMPRESSION};
use dtsim_core::policy::builtin_regimes;
use dtsim_core::run_model::DEFAULT_DURATION_DAYS;
use dtsim_core::scenario::{self, Scenario, KEYS};
use dtsim_core::{simulate, Assumptions, Error, NetworkConditions};
use serde_json::{json, Value};

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let (status, field) = match &e {
            Error::Infeasible { constraint, .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, json!({ "constraint": constraint }))
            }
            Error::TargetUnreachable { best_achieved, .. } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "constraint": "target", "best_achieved": best_achieved.to_string() }),
            ),
            Error::UnsupportedPrecision { .. } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "constraint": "hardware.precision" }),
            ),
            Error::InvalidInput { key, .. } | Error::Parse { key, .. } => {
                (StatusCode::BAD_REQUEST, json!({ "key": key }))
            }
            Error::UnknownPreset { .. } => (StatusCode::BAD_REQUEST, json!({ "key": "hardware.node" })),
            _ => (StatusCode::BAD_REQUEST, json!({})),
        };
        let mut body = field;
        body["error"] = Value::String(e.to_string());
        (status, Json(body)).into_response()
    }
}

type Shared = Arc<Catalog>;

pub fn router(catalog: Catalog) -> Router {
    Router::new()
        .route("/simulate", post(simulate_handler))
        .route("/optimize", post(optimize_handler))
        .route("/catalog", get(catalog_handler))
        .route("/regimes", get(regimes_handler))
        .route("/defaults", get(defaults_handler))
        .with_state(Arc::new(catalog))
}

fn require(sc: &Scenario) -> Result<(), Error> {
    if sc.hardware.node.is_none() {
        return Err(Error::invalid("hardware.node", "missing key"));
    }
    if sc.hardware.n_nodes.is_none() {
        return Err(Error::invalid("hardware.n_nodes", "missing key"));
    }
    Ok(())
}

async fn simulate_handler(State(catalog): State<Shared>, body: String) -> Result<Response, ApiError> {
    let sc = Scenario::from_json(&body)?;
    require(&sc)?;
    let cfg = sc.to_run_config(&catalog)?;
    Ok(Json(simulate(&cfg)?).into_response())
}

async fn optimize_handler(State(catalog): State<Shared>, body: String) -> Result<Response, ApiError> {
    let sc = Scenario::from_json(&body)?;
    let req = sc.to_optimization_request(&catalog)?;
    let best = tokio::task::spawn_blocking(move || min_cost_config(&req))
        .await
        .map_err(|e| Error::infeasible("optimizer", e.to_string()))??;
    Ok(Json(best).into_response())
}

async fn catalog_handler(State(catalog): State<Shared>) -> Json<Value> {
    Json(json!(catalog.nodes()))
}

async fn regimes_handler() -> Json<Value> {
    Json(json!(builtin_regimes()))
}

async fn defaults_handler() -> Json<Value> {
    Json(json!({
        "keys": KEYS,
        "scenario": {
            "hardware.node": scenario::DEFAULT_NODE,
            "hardware.n_nodes": scenario::DEFAULT_N_NODES,
            "diloco.h": scenario::DEFAULT_H,
            "diloco.compression": DEFAULT_COMPRESSION,
            "training.duration_days": DEFAULT_DURATION_DAYS,
            "network.bandwidth_mbps": scenario::DEFAULT_BANDWIDTH_MBPS,
            "network.rtt_ms": scenario::DEFAULT_RTT_MS,
            "policy.regime": scenario::DEFAULT_REGIME,
        },
        "assumptions": Assumptions::default(),
        "network": NetworkConditions::default(),
        "search_space": SearchSpace::default(),
    }))
}
