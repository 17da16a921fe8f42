//! Feasibility, cost and compliance model for training runs spread over
//! many small, individually unregistered sites that synchronize over the
//! public internet with DiLoCo-style outer steps.
//!
//! The pipeline is `RunConfig → simulate → RunMetrics`; `optimizer` searches
//! the cheapest configuration reaching a compute target.

pub mod catalog;
pub mod efficiency;
pub mod error;
pub mod network;
pub mod optimizer;
pub mod policy;
pub mod report;
pub mod run_model;
pub mod scaling;
pub mod scenario;
pub mod tables;

pub use catalog::{Catalog, ChipSpec, NodeSpec, Precision};
pub use efficiency::{DilocoConfig, DilocoMode, EfficiencyBreakdown, EfficiencyParams, ScenarioMode};
pub use error::{Error, Result};
pub use network::{NetworkConditions, TrafficProfile};
pub use policy::{ComplianceReport, PolicyRegime};
pub use run_model::{simulate, Assumptions, GrowthRates, ModelSize, RunConfig, RunMetrics};
pub use scaling::{ChinchillaParams, TrainedModel};
