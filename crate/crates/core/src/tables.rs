//! Published minimum-cost configurations: one table over compute targets at
//! 100 Mbps, one over bandwidths at 1e25 FLOP. Used to calibrate η, to check
//! the cost formula, and as regression targets.

use crate::catalog::Precision;
use crate::efficiency::{CalibrationRow, DilocoConfig, DilocoMode};
use crate::network::NetworkConditions;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub label: &'static str,
    pub preset: &'static str,
    pub precision: Precision,
    pub nodes: u32,
    pub mode: DilocoMode,
    /// Outer groups × inner replicas, or stages × replicas for pipelines.
    pub layout: (u32, u32),
    pub model_params: f64,
    pub h: u32,
    pub eta: f64,
    pub c_local: f64,
    pub chi: f64,
    pub c_quality: f64,
    pub ot: f64,
    pub cost: f64,
}

impl PublishedRow {
    /// Replica layout as listed. Hierarchical rows list more nodes than
    /// groups × inner; the layout, not the node count, is used.
    pub fn diloco(&self, compression: f64) -> DilocoConfig {
        match self.mode {
            DilocoMode::Flat => DilocoConfig::flat(self.nodes, self.h, compression),
            DilocoMode::Hierarchical => DilocoConfig::hierarchical(self.layout.0, self.layout.1, self.h, compression),
            DilocoMode::Pipeline => DilocoConfig::pipeline(self.layout.0, self.layout.1, self.h, compression),
        }
    }

    pub fn calibration_row(&self, compression: f64) -> CalibrationRow {
        CalibrationRow {
            config: self.diloco(compression),
            n_params: self.model_params,
            eta: self.eta,
        }
    }
}

const FLAT: (u32, u32) = (1, 1);

#[rustfmt::skip]
pub const MIN_COST_BY_TARGET: [PublishedRow; 7] = [
    PublishedRow { label: "1e24", preset: "16xH100", precision: Precision::Fp8, nodes: 2, mode: DilocoMode::Flat, layout: FLAT, model_params: 91e9, h: 18, eta: 0.7957, c_local: 1.3e24, chi: 0.9796, c_quality: 1.3e24, ot: 1.3, cost: 1.6e6 },
    PublishedRow { label: "DeepSeek-V3", preset: "16xGH200", precision: Precision::Fp8, nodes: 7, mode: DilocoMode::Flat, layout: FLAT, model_params: 160e9, h: 19, eta: 0.5973, c_local: 3.4e24, chi: 0.9635, c_quality: 3.3e24, ot: 1.4, cost: 6.3e6 },
    PublishedRow { label: "1e25", preset: "16xGH200", precision: Precision::Fp8, nodes: 34, mode: DilocoMode::Flat, layout: FLAT, model_params: 160e9, h: 19, eta: 0.3698, c_local: 1.0e25, chi: 0.6250, c_quality: 6.4e24, ot: 7.0, cost: 30.7e6 },
    PublishedRow { label: "GPT-4", preset: "16xGH200", precision: Precision::Fp8, nodes: 101, mode: DilocoMode::Hierarchical, layout: (8, 12), model_params: 160e9, h: 19, eta: 0.2580, c_local: 2.1e25, chi: 0.3689, c_quality: 7.8e24, ot: 21.0, cost: 91.3e6 },
    PublishedRow { label: "Llama 3.1-405B", preset: "50xA100", precision: Precision::Fp16, nodes: 625, mode: DilocoMode::Hierarchical, layout: (10, 62), model_params: 250e9, h: 19, eta: 0.1524, c_local: 3.8e25, chi: 0.3214, c_quality: 1.2e25, ot: 26.0, cost: 441.3e6 },
    PublishedRow { label: "GPT-5", preset: "16xH100", precision: Precision::Fp8, nodes: 2880, mode: DilocoMode::Pipeline, layout: (2, 1440), model_params: 180e9, h: 3, eta: 0.4244, c_local: 6.6e25, chi: 0.2901, c_quality: 1.9e25, ot: 31.0, cost: 2.32e9 },
    PublishedRow { label: "1e26", preset: "16xH100", precision: Precision::Fp8, nodes: 4706, mode: DilocoMode::Pipeline, layout: (2, 2353), model_params: 180e9, h: 3, eta: 0.3934, c_local: 1.0e26, chi: 0.2123, c_quality: 2.1e25, ot: 51.0, cost: 3.80e9 },
];

/// Compute targets of the first table, FLOP.
pub const TARGETS: [(&str, f64); 7] = [
    ("1e24", 1e24),
    ("DeepSeek-V3", 3.3e24),
    ("1e25", 1e25),
    ("GPT-4", 2.1e25),
    ("Llama 3.1-405B", 3.8e25),
    ("GPT-5", 6.6e25),
    ("1e26", 1e26),
];

#[rustfmt::skip]
pub const MIN_COST_BY_BANDWIDTH: [PublishedRow; 7] = [
    PublishedRow { label: "10 Mbps", preset: "16xGH200", precision: Precision::Fp8, nodes: 3082, mode: DilocoMode::Pipeline, layout: (2, 1541), model_params: 310e9, h: 4, eta: 0.4234, c_local: 1.0e25, chi: 0.9465, c_quality: 9.5e24, ot: 1.6, cost: 2.79e9 },
    PublishedRow { label: "30 Mbps", preset: "50xA100", precision: Precision::Fp16, nodes: 168, mode: DilocoMode::Hierarchical, layout: (10, 16), model_params: 250e9, h: 61, eta: 0.1493, c_local: 1.0e25, chi: 0.6213, c_quality: 6.2e24, ot: 7.0, cost: 118.6e6 },
    PublishedRow { label: "China avg", preset: "16xGH200", precision: Precision::Fp8, nodes: 38, mode: DilocoMode::Flat, layout: FLAT, model_params: 160e9, h: 25, eta: 0.3266, c_local: 1.0e25, chi: 0.5969, c_quality: 6.0e24, ot: 7.8, cost: 34.3e6 },
    PublishedRow { label: "US avg", preset: "16xGH200", precision: Precision::Fp8, nodes: 34, mode: DilocoMode::Flat, layout: FLAT, model_params: 160e9, h: 20, eta: 0.3639, c_local: 1.0e25, chi: 0.6250, c_quality: 6.3e24, ot: 7.0, cost: 30.7e6 },
    PublishedRow { label: "100 Mbps", preset: "16xGH200", precision: Precision::Fp8, nodes: 34, mode: DilocoMode::Flat, layout: FLAT, model_params: 160e9, h: 19, eta: 0.3698, c_local: 1.0e25, chi: 0.6250, c_quality: 6.4e24, ot: 7.0, cost: 30.7e6 },
    PublishedRow { label: "300 Mbps", preset: "16xH100", precision: Precision::Fp8, nodes: 23, mode: DilocoMode::Flat, layout: FLAT, model_params: 91e9, h: 7, eta: 0.5391, c_local: 1.0e25, chi: 0.4507, c_quality: 4.5e24, ot: 15.0, cost: 18.6e6 },
    PublishedRow { label: "1 Gbps", preset: "16xH100", precision: Precision::Fp8, nodes: 16, mode: DilocoMode::Flat, layout: FLAT, model_params: 91e9, h: 2, eta: 0.8160, c_local: 1.1e25, chi: 0.5370, c_quality: 5.7e24, ot: 10.0, cost: 12.9e6 },
];

/// Link conditions of the bandwidth table, in row order.
pub fn bandwidth_conditions() -> [(&'static str, NetworkConditions); 7] {
    [
        ("10 Mbps", NetworkConditions::symmetric_mbps(10.0, 100.0)),
        ("30 Mbps", NetworkConditions::symmetric_mbps(30.0, 100.0)),
        ("China avg", NetworkConditions::mbps(47.0, 207.0, 100.0)),
        ("US avg", NetworkConditions::mbps(57.0, 310.0, 100.0)),
        ("100 Mbps", NetworkConditions::symmetric_mbps(100.0, 100.0)),
        ("300 Mbps", NetworkConditions::symmetric_mbps(300.0, 100.0)),
        ("1 Gbps", NetworkConditions::symmetric_mbps(1000.0, 100.0)),
    ]
}

/// The five data-parallel rows of the target table, for fitting η.
pub fn calibration_rows(compression: f64) -> Vec<CalibrationRow> {
    MIN_COST_BY_TARGET
        .iter()
        .filter(|r| r.mode != DilocoMode::Pipeline)
        .map(|r| r.calibration_row(compression))
        .collect()
}
