use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bandwidths below this are treated as this, so a stalled link still
/// finishes in finite simulated time.
pub const MIN_BANDWIDTH_KBPS: f64 = 1.0;

/// Point-to-point transfer cost: `size / bandwidth + latency`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub latency_ms: f64,
    pub model_blob_bytes: f64,
    pub block_bytes: f64,
}

impl NetworkModel {
    pub fn new(latency_ms: f64, model_blob_bytes: f64, block_bytes: f64) -> Result<Self> {
        for (name, v) in [
            ("latency_ms", latency_ms),
            ("model_blob_bytes", model_blob_bytes),
            ("block_bytes", block_bytes),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "network {name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(NetworkModel {
            latency_ms,
            model_blob_bytes,
            block_bytes,
        })
    }

    /// Seconds to push `bytes` over an uplink of `bandwidth_kbps`.
    pub fn transfer_s(&self, bytes: f64, bandwidth_kbps: f64) -> f64 {
        let kbits = bytes * 8.0 / 1000.0;
        kbits / bandwidth_kbps.max(MIN_BANDWIDTH_KBPS) + self.latency_ms / 1000.0
    }

    pub fn model_broadcast_s(&self, bandwidth_kbps: f64) -> f64 {
        self.transfer_s(self.model_blob_bytes, bandwidth_kbps)
    }

    /// Block propagation; blocks carrying a model include its blob.
    pub fn block_broadcast_s(&self, bandwidth_kbps: f64, carries_model: bool) -> f64 {
        let extra = if carries_model {
            self.model_blob_bytes
        } else {
            0.0
        };
        self.transfer_s(self.block_bytes + extra, bandwidth_kbps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transfer_is_size_over_bandwidth_plus_latency() {
        let n = NetworkModel::new(20.0, 4000.0, 100_000.0).unwrap();
        assert!((n.transfer_s(1000.0, 8.0) - 1.02).abs() < 1e-12);
        assert!((n.block_broadcast_s(800.0, false) - 1.02).abs() < 1e-12);
        assert!((n.block_broadcast_s(800.0, true) - 1.06).abs() < 1e-12);
        assert!(n.transfer_s(1000.0, 0.0).is_finite());
        assert!(NetworkModel::new(-1.0, 0.0, 0.0).is_err());
    }
}
