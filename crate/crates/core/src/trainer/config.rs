use serde::{Deserialize, Serialize};

use super::PredictorKind;
use crate::error::{Error, Result};
use crate::kernel::{Activation, PhiKind};

/// Hyperparameters for one pretraining run. Adaptation reuses `lr`,
/// `max_epochs`, `patience`, `seed` and `hidden`.
///
/// Feature preprocessing is not part of the config; see
/// [`Dataset::row_normalized`](crate::Dataset::row_normalized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Hop count `K`; the finder set has `2K + 1` views.
    pub hops: u32,
    /// Number of layers in `φ`. `1` is the linear GVT.
    pub phi_depth: usize,
    /// Recurrent depth `L` used during pretraining.
    pub depth: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub predictor: PredictorKind,
    /// Hidden width of the MLP predictor.
    pub hidden: usize,
    /// Ablation: `φ` without its nonlinearity.
    pub no_nonlinearity: bool,
    /// Ablation: a single GVT application, whatever `depth` says.
    pub no_recurrence: bool,
    /// Keep view tensors from the forward pass instead of recomputing them.
    pub cache_views: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hops: 2,
            phi_depth: 2,
            depth: 8,
            lr: 0.005,
            max_epochs: 2500,
            patience: 200,
            seed: 0,
            predictor: PredictorKind::Mlp,
            hidden: 128,
            no_nonlinearity: false,
            no_recurrence: false,
            cache_views: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hops", self.hops as usize),
            ("phi_depth", self.phi_depth),
            ("depth", self.depth),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
            ("hidden", self.hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive and finite, got {}",
                self.lr
            )));
        }
        if self.hops > crate::viewfinder::MAX_HOPS {
            return Err(Error::InvalidParameter(format!(
                "hops {} exceeds the supported maximum {}",
                self.hops,
                crate::viewfinder::MAX_HOPS
            )));
        }
        Ok(())
    }

    /// Depth actually unrolled during pretraining.
    pub fn effective_depth(&self) -> usize {
        if self.no_recurrence {
            1
        } else {
            self.depth
        }
    }

    pub fn phi_kind(&self) -> PhiKind {
        if self.phi_depth == 1 {
            PhiKind::Linear
        } else {
            let activation = if self.no_nonlinearity {
                Activation::Identity
            } else {
                Activation::Gelu
            };
            PhiKind::Mlp {
                depth: self.phi_depth,
                activation,
            }
        }
    }
}
