//! The distributed-training efficiency factor
//! `η = η_H × η_comp × η_rep × η_act` and its calibration.
//!
//! * `η_H = 1 − α(N)·log10(H)`, `α(N) = alpha0·(n_ref/N)^kappa`
//! * `η_comp`: log-linear interpolation over compression anchors
//! * `η_rep = R^(−γ(N)·ramp(H))`, `γ(N) = gamma0·(n_ref/N)^gamma_slope`,
//!   `ramp(H) = h1 + (1 − h1)·(1 − exp(−(H − 1)/h_scale))`
//! * `η_act = f_act^(stages − 1)`, pipeline mode only
//!
//! Every factor is clamped to `[clamp_floor, 1]`; the breakdown records whether
//! a clamp engaged.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioMode {
    Optimistic,
    #[default]
    Expected,
    Conservative,
}

impl ScenarioMode {
    pub const ALL: [ScenarioMode; 3] = [
        ScenarioMode::Optimistic,
        ScenarioMode::Expected,
        ScenarioMode::Conservative,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "optimistic" => Some(ScenarioMode::Optimistic),
            "expected" => Some(ScenarioMode::Expected),
            "conservative" => Some(ScenarioMode::Conservative),
            _ => None,
        }
    }
}

impl fmt::Display for ScenarioMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioMode::Optimistic => "optimistic",
            ScenarioMode::Expected => "expected",
            ScenarioMode::Conservative => "conservative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DilocoMode {
    #[default]
    Flat,
    #[serde(alias = "hier")]
    Hierarchical,
    #[serde(alias = "pp")]
    Pipeline,
}

impl DilocoMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flat" => Some(DilocoMode::Flat),
            "hier" | "hierarchical" => Some(DilocoMode::Hierarchical),
            "pp" | "pipeline" => Some(DilocoMode::Pipeline),
            _ => None,
        }
    }
}

impl fmt::Display for DilocoMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DilocoMode::Flat => "flat",
            DilocoMode::Hierarchical => "hierarchical",
            DilocoMode::Pipeline => "pipeline",
        })
    }
}

/// How replicas are arranged and synchronized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilocoConfig {
    /// Inner steps between synchronizations.
    pub h: u32,
    /// Pseudo-gradient compression ratio relative to 16-bit.
    pub compression: f64,
    pub mode: DilocoMode,
    /// DiLoCo replicas. A pipeline replica is a group of `stages` nodes.
    pub replicas: u32,
    /// Hierarchical mode: (outer groups, replicas per group).
    #[serde(default)]
    pub groups: Option<(u32, u32)>,
    #[serde(default = "one")]
    pub stages: u32,
}

fn one() -> u32 {
    1
}

impl DilocoConfig {
    pub fn flat(replicas: u32, h: u32, compression: f64) -> Self {
        DilocoConfig {
            h,
            compression,
            mode: DilocoMode::Flat,
            replicas,
            groups: None,
            stages: 1,
        }
    }

    pub fn hierarchical(outer: u32, inner: u32, h: u32, compression: f64) -> Self {
        DilocoConfig {
            h,
            compression,
            mode: DilocoMode::Hierarchical,
            replicas: outer * inner,
            groups: Some((outer, inner)),
            stages: 1,
        }
    }

    pub fn pipeline(stages: u32, replicas: u32, h: u32, compression: f64) -> Self {
        DilocoConfig {
            h,
            compression,
            mode: DilocoMode::Pipeline,
            replicas,
            groups: None,
            stages,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h < 1 {
            return Err(Error::invalid("diloco.h", "must be at least 1"));
        }
        if !(self.compression >= 1.0 && self.compression.is_finite()) {
            return Err(Error::invalid(
                "diloco.compression",
                format!("must be ≥ 1, got {}", self.compression),
            ));
        }
        if self.replicas < 1 {
            return Err(Error::invalid("diloco.replicas", "must be at least 1"));
        }
        if self.stages < 1 {
            return Err(Error::invalid("diloco.stages", "must be at least 1"));
        }
        match self.mode {
            DilocoMode::Flat if self.stages != 1 => {
                Err(Error::invalid("diloco.stages", "flat mode runs one stage per replica"))
            }
            DilocoMode::Hierarchical => match self.groups {
                None => Err(Error::invalid("diloco.groups", "hierarchical mode needs outer groups")),
                Some((outer, inner)) if outer < 1 || inner < 1 => Err(Error::invalid(
                    "diloco.groups",
                    "groups and replicas per group must be ≥ 1",
                )),
                Some((outer, inner)) if outer * inner != self.replicas => Err(Error::invalid(
                    "diloco.groups",
                    format!("{outer}×{inner} does not equal {} replicas", self.replicas),
                )),
                Some(_) if self.stages != 1 => Err(Error::invalid(
                    "diloco.stages",
                    "hierarchical mode runs one stage per replica",
                )),
                Some(_) => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Nodes the configuration occupies.
    pub fn nodes(&self) -> u32 {
        self.replicas * self.stages
    }

    /// Replica count that drives the divergence penalty. Hierarchical inner
    /// replicas still hold diverging weights, so every replica counts.
    pub fn divergence_replicas(&self) -> u32 {
        match (self.mode, self.groups) {
            (DilocoMode::Hierarchical, Some((outer, inner))) => outer * inner,
            _ => self.replicas,
        }
    }

    /// `Flat`, `Hier (8×12)`, `PP (2×1440)`.
    pub fn mode_label(&self) -> String {
        match self.mode {
            DilocoMode::Flat => "Flat".to_string(),
            DilocoMode::Hierarchical => {
                let (o, i) = self.groups.unwrap_or((self.replicas, 1));
                format!("Hier ({o}×{i})")
            }
            DilocoMode::Pipeline => format!("PP ({}×{})", self.stages, self.replicas),
        }
    }
}

/// A value per scenario mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioValues {
    pub optimistic: f64,
    pub expected: f64,
    pub conservative: f64,
}

impl ScenarioValues {
    pub const fn uniform(v: f64) -> Self {
        ScenarioValues {
            optimistic: v,
            expected: v,
            conservative: v,
        }
    }

    pub fn get(&self, mode: ScenarioMode) -> f64 {
        match mode {
            ScenarioMode::Optimistic => self.optimistic,
            ScenarioMode::Expected => self.expected,
            ScenarioMode::Conservative => self.conservative,
        }
    }

    pub fn set(&mut self, mode: ScenarioMode, v: f64) {
        match mode {
            ScenarioMode::Optimistic => self.optimistic = v,
            ScenarioMode::Expected => self.expected = v,
            ScenarioMode::Conservative => self.conservative = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionAnchor {
    pub ratio: f64,
    pub factor: ScenarioValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyParams {
    /// Sync-interval coefficient at `n_ref`.
    pub alpha0: f64,
    pub n_ref: f64,
    pub kappa: f64,
    pub gamma0: f64,
    pub gamma_slope: f64,
    /// Fraction of the divergence exponent already present at H = 1.
    pub gamma_h1: f64,
    /// Inner-step scale over which the divergence exponent saturates.
    pub gamma_h_scale: f64,
    /// Sorted by ratio; the first anchor should be `1 → 1.0`.
    pub eta_comp_table: Vec<CompressionAnchor>,
    /// Quality factor per pipeline boundary.
    pub f_act: ScenarioValues,
    pub clamp_floor: f64,
    pub scenario: ScenarioMode,
}

impl Default for EfficiencyParams {
    fn default() -> Self {
        EfficiencyParams {
            alpha0: 0.05,
            n_ref: 250e9,
            kappa: 0.0,
            gamma0: 0.274396,
            gamma_slope: 0.0,
            gamma_h1: 0.3,
            gamma_h_scale: 1.0,
            eta_comp_table: vec![
                CompressionAnchor {
                    ratio: 1.0,
                    factor: ScenarioValues::uniform(1.0),
                },
                CompressionAnchor {
                    ratio: 150.0,
                    factor: ScenarioValues {
                        optimistic: 0.995,
                        expected: 0.99,
                        conservative: 0.97,
                    },
                },
            ],
            f_act: ScenarioValues {
                optimistic: 0.98,
                expected: 0.95,
                conservative: 0.92,
            },
            clamp_floor: 0.01,
            scenario: ScenarioMode::Expected,
        }
    }
}

impl EfficiencyParams {
    pub fn with_scenario(mut self, scenario: ScenarioMode) -> Self {
        self.scenario = scenario;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(key, format!("must be positive, got {v}")))
            }
        };
        positive("efficiency.n_ref", self.n_ref)?;
        positive("efficiency.gamma_h_scale", self.gamma_h_scale)?;
        positive("efficiency.clamp_floor", self.clamp_floor)?;
        for (key, v) in [
            ("efficiency.alpha0", self.alpha0),
            ("efficiency.kappa", self.kappa),
            ("efficiency.gamma0", self.gamma0),
            ("efficiency.gamma_slope", self.gamma_slope),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(key, format!("must be ≥ 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma_h1) {
            return Err(Error::invalid("efficiency.gamma_h1", "must lie in [0, 1]"));
        }
        if self.clamp_floor >= 1.0 {
            return Err(Error::invalid("efficiency.clamp_floor", "must be below 1"));
        }
        if self.eta_comp_table.is_empty() {
            return Err(Error::invalid("efficiency.eta_comp_table", "needs at least one anchor"));
        }
        if self.eta_comp_table.windows(2).any(|w| w[0].ratio >= w[1].ratio) {
            return Err(Error::invalid(
                "efficiency.eta_comp_table",
                "anchors must be strictly increasing in ratio",
            ));
        }
        for a in &self.eta_comp_table {
            for mode in ScenarioMode::ALL {
                let v = a.factor.get(mode);
                if !(v > 0.0 && v <= 1.0) || a.ratio < 1.0 {
                    return Err(Error::invalid(
                        "efficiency.eta_comp_table",
                        "factors must lie in (0, 1], ratios ≥ 1",
                    ));
                }
            }
        }
        for mode in ScenarioMode::ALL {
            let v = self.f_act.get(mode);
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("efficiency.f_act.{mode}"), "must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Sync-interval coefficient `α(N)`.
    pub fn alpha(&self, n_params: f64) -> f64 {
        self.alpha0 * (self.n_ref / n_params).powf(self.kappa)
    }

    /// Divergence exponent base `γ(N)`.
    pub fn gamma(&self, n_params: f64) -> f64 {
        self.gamma0 * (self.n_ref / n_params).powf(self.gamma_slope)
    }

    /// How much of the divergence exponent applies at `h` inner steps.
    pub fn divergence_ramp(&self, h: u32) -> f64 {
        let steps = f64::from(h.max(1)) - 1.0;
        self.gamma_h1 + (1.0 - self.gamma_h1) * (1.0 - (-steps / self.gamma_h_scale).exp())
    }

    fn clamp(&self, v: f64) -> (f64, bool) {
        if v.is_nan() || v < self.clamp_floor {
            (self.clamp_floor, true)
        } else {
            (v.min(1.0), false)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBreakdown {
    pub eta_h: f64,
    pub eta_comp: f64,
    pub eta_rep: f64,
    pub eta_act: f64,
    pub eta: f64,
    /// Some factor hit the clamp floor.
    pub clamped: bool,
}

fn sync_penalty_raw(n_params: f64, h: u32, p: &EfficiencyParams) -> (f64, bool) {
    p.clamp(1.0 - p.alpha(n_params) * f64::from(h.max(1)).log10())
}

fn compression_penalty_raw(ratio: f64, p: &EfficiencyParams) -> (f64, bool) {
    let table = &p.eta_comp_table;
    let value = |a: &CompressionAnchor| a.factor.get(p.scenario);
    let x = ratio.max(1.0).ln();
    let v = if table.len() == 1 || x <= table[0].ratio.ln() {
        value(&table[0])
    } else {
        // Segment containing x, or the last segment for extrapolation.
        let i = table
            .windows(2)
            .position(|w| x <= w[1].ratio.ln())
            .unwrap_or(table.len() - 2);
        let (lo, hi) = (&table[i], &table[i + 1]);
        let t = (x - lo.ratio.ln()) / (hi.ratio.ln() - lo.ratio.ln());
        value(lo) + t * (value(hi) - value(lo))
    };
    p.clamp(v)
}

fn replica_penalty_raw(replicas: u32, n_params: f64, h: u32, p: &EfficiencyParams) -> (f64, bool) {
    let exponent = p.gamma(n_params) * p.divergence_ramp(h);
    p.clamp(f64::from(replicas.max(1)).powf(-exponent))
}

fn activation_penalty_raw(stages: u32, p: &EfficiencyParams) -> (f64, bool) {
    p.clamp(p.f_act.get(p.scenario).powi(stages.max(1) as i32 - 1))
}

/// η_H: loss from replicas drifting apart over `h` inner steps.
pub fn sync_penalty(n_params: f64, h: u32, p: &EfficiencyParams) -> f64 {
    sync_penalty_raw(n_params, h, p).0
}

/// η_comp for a pseudo-gradient compression ratio.
pub fn compression_penalty(ratio: f64, p: &EfficiencyParams) -> f64 {
    compression_penalty_raw(ratio, p).0
}

/// η_rep for `replicas` DiLoCo replicas of an `n_params` model syncing every `h` steps.
pub fn replica_penalty(replicas: u32, n_params: f64, h: u32, p: &EfficiencyParams) -> f64 {
    replica_penalty_raw(replicas, n_params, h, p).0
}

/// η_act for a pipeline of `stages` nodes.
pub fn activation_penalty(stages: u32, p: &EfficiencyParams) -> f64 {
    activation_penalty_raw(stages, p).0
}

pub fn total_inefficiency(cfg: &DilocoConfig, n_params: f64, p: &EfficiencyParams) -> EfficiencyBreakdown {
    let (eta_h, c1) = sync_penalty_raw(n_params, cfg.h, p);
    let (eta_comp, c2) = compression_penalty_raw(cfg.compression, p);
    let (eta_rep, c3) = replica_penalty_raw(cfg.divergence_replicas(), n_params, cfg.h, p);
    let (eta_act, c4) = match cfg.mode {
        DilocoMode::Pipeline => activation_penalty_raw(cfg.stages, p),
        _ => (1.0, false),
    };
    EfficiencyBreakdown {
        eta_h,
        eta_comp,
        eta_rep,
        eta_act,
        eta: eta_h * eta_comp * eta_rep * eta_act,
        clamped: c1 || c2 || c3 || c4,
    }
}

/// An observed configuration and its efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub config: DilocoConfig,
    pub n_params: f64,
    pub eta: f64,
}

const KAPPA_MAX: f64 = 4.0;
const SLOPE_MAX: f64 = 4.0;

/// Least-squares fit (in log η) of `kappa`, `gamma0` and `gamma_slope`, with
/// every other field of `base` held fixed. `kappa` and `gamma_slope` are
/// constrained to `[0, 4]` so that both penalties shrink with model size.
pub fn calibrate_efficiency(rows: &[CalibrationRow], base: &EfficiencyParams) -> Result<EfficiencyParams> {
    if rows.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 rows, got {}",
            rows.len()
        )));
    }
    for (i, r) in rows.iter().enumerate() {
        r.config.validate()?;
        if !(r.eta > 0.0 && r.eta <= 1.0) || !(r.n_params > 0.0) {
            return Err(Error::invalid(
                format!("rows[{i}]"),
                "η must lie in (0, 1] and n_params be positive",
            ));
        }
    }
    let mut configs: Vec<(u64, u32, u32)> = rows
        .iter()
        .map(|r| (r.n_params.to_bits(), r.config.divergence_replicas(), r.config.h))
        .collect();
    configs.sort_unstable();
    configs.dedup();
    if configs.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} distinct configurations for 3 parameters",
            configs.len()
        )));
    }
    let mut sizes: Vec<u64> = rows.iter().map(|r| r.n_params.to_bits()).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(Error::DegenerateFit("all rows share one model size".into()));
    }
    if rows.iter().all(|r| r.config.divergence_replicas() <= 1) {
        return Err(Error::DegenerateFit("no row has more than one replica".into()));
    }

    let fit = Fit { rows, base };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=40 {
        for j in 0..=40 {
            let (kappa, slope) = (KAPPA_MAX * f64::from(i) / 40.0, SLOPE_MAX * f64::from(j) / 40.0);
            let sse = fit.profile(kappa, slope).0;
            if sse < best.0 {
                best = (sse, kappa, slope);
            }
        }
    }

    // Compass search from the best grid point.
    let (mut sse, mut kappa, mut slope) = best;
    let mut step = 0.05;
    while step > 1e-12 {
        let mut improved = false;
        for (dk, ds) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let k = (kappa + dk).clamp(0.0, KAPPA_MAX);
            let s = (slope + ds).clamp(0.0, SLOPE_MAX);
            let candidate = fit.profile(k, s).0;
            if candidate < sse {
                (sse, kappa, slope) = (candidate, k, s);
                improved = true;
                break;
            }
        }
        if !improved {
            step /= 2.0;
        }
    }

    let gamma0 = fit.profile(kappa, slope).1;
    Ok(EfficiencyParams {
        kappa,
        gamma0,
        gamma_slope: slope,
        ..base.clone()
    })
}

struct Fit<'a> {
    rows: &'a [CalibrationRow],
    base: &'a EfficiencyParams,
}

impl Fit<'_> {
    /// SSE with `gamma0` profiled out in closed form.
    fn profile(&self, kappa: f64, slope: f64) -> (f64, f64) {
        let p = EfficiencyParams {
            kappa,
            gamma_slope: slope,
            gamma0: 1.0,
            ..self.base.clone()
        };
        // ln η_obs = fixed − gamma0·b
        let terms: Vec<(f64, f64)> = self
            .rows
            .iter()
            .map(|r| {
                let mut fixed =
                    sync_penalty(r.n_params, r.config.h, &p).ln() + compression_penalty(r.config.compression, &p).ln();
                if r.config.mode == DilocoMode::Pipeline {
                    fixed += activation_penalty(r.config.stages, &p).ln();
                }
                let b = p.gamma(r.n_params)
                    * p.divergence_ramp(r.config.h)
                    * f64::from(r.config.divergence_replicas()).ln();
                (fixed - r.eta.ln(), b)
            })
            .collect();
        let bb: f64 = terms.iter().map(|(_, b)| b * b).sum();
        let gamma0 = if bb > 0.0 {
            (terms.iter().map(|(d, b)| d * b).sum::<f64>() / bb).max(0.0)
        } else {
            0.0
        };
        let sse = terms.iter().map(|(d, b)| (d - gamma0 * b).powi(2)).sum();
        (sse, gamma0)
    }
}
