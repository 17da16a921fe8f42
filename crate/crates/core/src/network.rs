//! Communication model for outer synchronizations: pseudo-gradient payload,
//! per-step compute time, the compute-bound condition and resulting traffic.

use serde::{Deserialize, Serialize};

use crate::efficiency::DilocoConfig;
use crate::error::{Error, Result};

/// Bytes per pseudo-gradient element before compression.
pub const PSEUDO_GRADIENT_BYTES: f64 = 2.0;
pub const DEFAULT_TOKENS_PER_STEP: f64 = 524_288.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConditions {
    pub bandwidth_up_bps: f64,
    pub bandwidth_down_bps: f64,
    pub rtt_ms: f64,
    /// Multiplier on the bytes each node moves per sync. 1 is a flat
    /// per-replica exchange; an all-reduce schedule could set it higher.
    #[serde(default = "unit")]
    pub topology_factor: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for NetworkConditions {
    fn default() -> Self {
        NetworkConditions::symmetric_mbps(100.0, 100.0)
    }
}

impl NetworkConditions {
    pub fn symmetric_mbps(mbps: f64, rtt_ms: f64) -> Self {
        NetworkConditions::mbps(mbps, mbps, rtt_ms)
    }

    pub fn mbps(up: f64, down: f64, rtt_ms: f64) -> Self {
        NetworkConditions {
            bandwidth_up_bps: up * 1e6,
            bandwidth_down_bps: down * 1e6,
            rtt_ms,
            topology_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("network.bandwidth_up_mbps", self.bandwidth_up_bps),
            ("network.bandwidth_down_mbps", self.bandwidth_down_bps),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::invalid(key, format!("must be positive, got {}", v / 1e6)));
            }
        }
        if !(self.rtt_ms >= 0.0 && self.rtt_ms.is_finite()) {
            return Err(Error::invalid(
                "network.rtt_ms",
                format!("must be ≥ 0, got {}", self.rtt_ms),
            ));
        }
        if !(self.topology_factor > 0.0 && self.topology_factor.is_finite()) {
            return Err(Error::invalid("network.topology_factor", "must be positive"));
        }
        Ok(())
    }

    /// Every replica both sends and receives, so the slower direction binds.
    pub fn effective_bps(&self) -> f64 {
        self.bandwidth_up_bps.min(self.bandwidth_down_bps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    /// Bytes each node sends per synchronization.
    pub payload_bytes: f64,
    pub sync_wall_time_s: f64,
    /// Link rate at which the sync would just fit inside `H` steps.
    pub required_bandwidth_bps: f64,
    /// Mean rate per node over the run.
    pub average_traffic_bps: f64,
    pub compute_bound: bool,
    pub slowdown: f64,
    pub latency_ratio: f64,
}

/// Bytes of one compressed pseudo-gradient for `n_params` parameters.
pub fn sync_payload(n_params: f64, compression: f64) -> f64 {
    PSEUDO_GRADIENT_BYTES * n_params / compression
}

/// Seconds per optimizer step: `6·N·tokens / (flops·mfu)`.
pub fn step_time(n_params: f64, tokens_per_step: f64, flops: f64, mfu: f64) -> f64 {
    6.0 * n_params * tokens_per_step / (flops * mfu)
}

/// Transmission time over round-trip time; `+∞` when the RTT is zero.
pub fn latency_ratio(net: &NetworkConditions, payload_bytes: f64) -> f64 {
    let transmission = transmission_time(net, payload_bytes);
    if transmission == 0.0 {
        0.0
    } else if net.rtt_ms == 0.0 {
        f64::INFINITY
    } else {
        transmission / (net.rtt_ms / 1000.0)
    }
}

fn transmission_time(net: &NetworkConditions, payload_bytes: f64) -> f64 {
    payload_bytes * 8.0 * net.topology_factor / net.effective_bps()
}

pub fn compute_bound_check(
    cfg: &DilocoConfig,
    net: &NetworkConditions,
    t_step: f64,
    payload_bytes: f64,
) -> TrafficProfile {
    traffic(cfg.h, net, t_step, payload_bytes)
}

pub(crate) fn traffic(h: u32, net: &NetworkConditions, t_step: f64, payload_bytes: f64) -> TrafficProfile {
    let rtt_s = net.rtt_ms / 1000.0;
    let sync = transmission_time(net, payload_bytes) + rtt_s;
    let window = f64::from(h) * t_step;
    let compute_bound = sync <= window;
    let slowdown = if compute_bound { 1.0 } else { sync / window };
    let span = window.max(sync);
    let bits = payload_bytes * 8.0;
    let average_traffic_bps = if bits == 0.0 { 0.0 } else { bits / span };
    let required_bandwidth_bps = if bits == 0.0 {
        0.0
    } else if window > rtt_s {
        bits * net.topology_factor / (window - rtt_s)
    } else {
        f64::INFINITY
    };
    TrafficProfile {
        payload_bytes,
        sync_wall_time_s: sync,
        required_bandwidth_bps,
        average_traffic_bps,
        compute_bound,
        slowdown,
        latency_ratio: latency_ratio(net, payload_bytes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_examples() {
        assert_eq!(sync_payload(1e9, 1.0), 2e9);
        assert!((sync_payload(160e9, 150.0) / 2.1333e9 - 1.0).abs() < 1e-4);
        assert_eq!(sync_payload(1e9, 20.0), sync_payload(1e9, 10.0) / 2.0);
    }

    #[test]
    fn step_time_examples() {
        let t = step_time(160e9, DEFAULT_TOKENS_PER_STEP, 31.68e15, 0.40);
        assert!((t - 39.7).abs() < 0.05, "{t}");
        assert_eq!(step_time(160e9, 0.0, 31.68e15, 0.4), 0.0);
        let half = step_time(1e9, 1e6, 1e15, 0.2);
        assert!((half / step_time(1e9, 1e6, 1e15, 0.4) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn flagship_traffic() {
        let net = NetworkConditions::symmetric_mbps(100.0, 100.0);
        let cfg = DilocoConfig::flat(34, 19, 150.0);
        let payload = sync_payload(160e9, 150.0);
        let t = step_time(160e9, DEFAULT_TOKENS_PER_STEP, 31.68e15, 0.40);
        let tp = compute_bound_check(&cfg, &net, t, payload);
        assert!((tp.sync_wall_time_s - 170.8).abs() < 0.2, "{}", tp.sync_wall_time_s);
        assert!(tp.compute_bound);
        assert_eq!(tp.slowdown, 1.0);
        assert!(
            (tp.average_traffic_bps / 1e6 - 22.6).abs() < 0.1,
            "{}",
            tp.average_traffic_bps
        );
    }

    #[test]
    fn limits() {
        let net = NetworkConditions::symmetric_mbps(100.0, 100.0);
        let long = traffic(1, &net, 1e30, 1e9);
        assert!(long.compute_bound);
        assert!(long.average_traffic_bps < 1e-15);

        let starved = NetworkConditions {
            bandwidth_up_bps: 1e-300,
            ..net
        };
        let tp = traffic(10, &starved, 1.0, 1e9);
        assert!(!tp.compute_bound);
        assert!(tp.slowdown > 1e100);
    }

    #[test]
    fn latency_ratio_examples() {
        let net = NetworkConditions::symmetric_mbps(100.0, 100.0);
        let r = latency_ratio(&net, sync_payload(160e9, 150.0));
        assert!((r - 1707.0).abs() < 1.0, "{r}");
        assert_eq!(latency_ratio(&net, 0.0), 0.0);
        let zero_rtt = NetworkConditions { rtt_ms: 0.0, ..net };
        assert_eq!(latency_ratio(&zero_rtt, 1e9), f64::INFINITY);
    }

    #[test]
    fn asymmetric_link_uses_slower_direction() {
        let net = NetworkConditions::mbps(47.0, 207.0, 100.0);
        assert_eq!(net.effective_bps(), 47e6);
    }

    #[test]
    fn validation() {
        assert!(NetworkConditions::symmetric_mbps(0.0, 100.0).validate().is_err());
        assert!(NetworkConditions::symmetric_mbps(100.0, -1.0).validate().is_err());
        assert!(NetworkConditions::default().validate().is_ok());
    }
}
