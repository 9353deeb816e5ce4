use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adapt, pretrain, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::Dataset;

/// A Cartesian hyperparameter space, enumerated with `hops` outermost and
/// `lrs` innermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpace {
    pub hops: Vec<u32>,
    pub phi_depths: Vec<usize>,
    pub depths: Vec<usize>,
    pub lrs: Vec<f64>,
}

impl GridSpace {
    /// `K ∈ {1,2,3}`, `D ∈ {1,2,3}`, `L ∈ {2,4,6,8}`, `η ∈ {0.01, 0.05}`.
    pub fn standard() -> Self {
        Self {
            hops: vec![1, 2, 3],
            phi_depths: vec![1, 2, 3],
            depths: vec![2, 4, 6, 8],
            lrs: vec![0.01, 0.05],
        }
    }

    /// A space holding exactly `cfg`'s values.
    pub fn singleton(cfg: &TrainConfig) -> Self {
        Self {
            hops: vec![cfg.hops],
            phi_depths: vec![cfg.phi_depth],
            depths: vec![cfg.depth],
            lrs: vec![cfg.lr],
        }
    }

    pub fn len(&self) -> usize {
        self.hops.len() * self.phi_depths.len() * self.depths.len() * self.lrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every point of the space layered over `base`.
    pub fn configs(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &hops in &self.hops {
            for &phi_depth in &self.phi_depths {
                for &depth in &self.depths {
                    for &lr in &self.lrs {
                        out.push(TrainConfig {
                            hops,
                            phi_depth,
                            depth,
                            lr,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub config: TrainConfig,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: TrainConfig,
    pub entries: Vec<GridEntry>,
}

/// Scores each config by pretraining, freezing the encoder, and re-adapting
/// a fresh predictor on the same dataset; returns the best by validation
/// accuracy, ties going to the first in enumeration order.
pub fn grid_search(space: &GridSpace, base: &TrainConfig, data: &Dataset) -> Result<GridOutcome> {
    if space.is_empty() {
        return Err(Error::InvalidParameter("empty hyperparameter space".into()));
    }
    let entries = space
        .configs(base)
        .into_par_iter()
        .map(|config| {
            let run = pretrain(&config, data)?;
            let adapted = adapt(&run.checkpoint, data, config.predictor)?;
            Ok(GridEntry {
                val_accuracy: adapted.chosen().val_accuracy,
                config,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, e) in entries.iter().enumerate() {
        if e.val_accuracy > entries[best].val_accuracy {
            best = i;
        }
    }
    Ok(GridOutcome {
        best: entries[best].config.clone(),
        entries,
    })
}
