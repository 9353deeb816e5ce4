use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{accuracy, cross_entropy, Adam, Checkpoint, PredictorParams, TrainConfig, TrainingMeta};
use crate::error::{Error, Result};
use crate::graph::{Dataset, FeatureMatrix};
use crate::kernel::{rgvt_backward_params, rgvt_forward_with, EncoderState, Phi};
use crate::viewfinder::default_finder_set;

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// `None` when the dataset has no validation split.
    pub val_accuracy: Option<f64>,
}

/// Tracks the best validation accuracy. Only strict improvements count.
#[derive(Debug, Clone)]
pub(crate) struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub(crate) fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records an epoch; true when it is a new best.
    pub(crate) fn observe(&mut self, epoch: usize, val: f64) -> bool {
        if val > self.best {
            self.best = val;
            self.best_epoch = epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub(crate) fn exhausted(&self) -> bool {
        self.stale >= self.patience
    }

    pub(crate) fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

/// Result of [`pretrain`]: the checkpoint plus what was learned alongside it.
#[derive(Debug, Clone)]
pub struct PretrainRun {
    pub checkpoint: Checkpoint,
    /// The pretraining predictor at the best epoch.
    pub predictor: PredictorParams,
    pub history: Vec<EpochRecord>,
    /// Test accuracy at the best epoch, if the dataset has a test split.
    pub test_accuracy: Option<f64>,
}

pub(crate) fn require_split(nodes: &[usize], name: &str) -> Result<()> {
    if nodes.is_empty() {
        Err(Error::InvalidSplit(format!("{name} split is empty")))
    } else {
        Ok(())
    }
}

/// Jointly trains `φ` and a predictor, full batch, keeping the parameters of
/// the epoch with the best validation accuracy. Without a validation split
/// there is no early stopping and the final parameters are kept.
pub fn pretrain(cfg: &TrainConfig, data: &Dataset) -> Result<PretrainRun> {
    pretrain_with_hook(cfg, data, |_, _, _| {})
}

/// As [`pretrain`], calling `hook(epoch, d_phi, d_predictor)` on the
/// gradients before each optimizer step.
pub fn pretrain_with_hook<H>(cfg: &TrainConfig, data: &Dataset, mut hook: H) -> Result<PretrainRun>
where
    H: FnMut(usize, &mut [f64], &mut [f64]),
{
    cfg.validate()?;
    let splits = &data.splits;
    require_split(&splits.train, "train")?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let finders = default_finder_set(cfg.hops)?;
    let phi = Phi::glorot(cfg.phi_kind(), finders.len(), &mut rng)?;
    let depth = cfg.effective_depth();
    let mut enc = EncoderState::new(finders, phi, depth)?;
    let (n, f, k) = (
        data.graph.num_nodes(),
        data.features.num_features(),
        data.num_classes(),
    );
    let mut pred = PredictorParams::glorot(cfg.predictor, f, cfg.hidden, k, &mut rng)?;

    let train_labels = data.labels.gather(&splits.train);
    let val_labels = data.labels.gather(&splits.val);
    let mut phi_opt = Adam::new(enc.phi.params().len());
    let mut pred_opt = Adam::new(pred.params().len());
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = (enc.phi.clone(), pred.clone());
    let mut history = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let trace = rgvt_forward_with(&enc, &data.graph, &data.features, depth, cfg.cache_views)?;
        let z = trace.output();
        let (logits, cache) = pred.forward_cached(z, &splits.train)?;
        let (loss, d_logits) = cross_entropy(&logits, k, &train_labels)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        let val_accuracy = if splits.val.is_empty() {
            None
        } else {
            Some(accuracy(&pred, z, &splits.val, &val_labels)?)
        };
        history.push(EpochRecord {
            epoch,
            loss,
            val_accuracy,
        });
        let improved = match val_accuracy {
            Some(v) => stopper.observe(epoch, v),
            None => true,
        };
        if improved {
            best = (enc.phi.clone(), pred.clone());
        }
        if stopper.exhausted() || epoch == cfg.max_epochs {
            break;
        }

        let mut d_z = FeatureMatrix::zeros(n, f);
        let mut d_pred = pred.backward(z, &splits.train, &cache, &d_logits, Some(&mut d_z))?;
        let mut d_phi = rgvt_backward_params(&enc, &data.graph, &trace, &d_z)?.d_phi;
        hook(epoch, &mut d_phi, &mut d_pred);
        phi_opt.step(enc.phi.params_mut(), &d_phi, cfg.lr)?;
        pred_opt.step(pred.params_mut(), &d_pred, cfg.lr)?;
    }

    let (best_epoch, best_val_accuracy) = if splits.val.is_empty() {
        (history.len(), None)
    } else {
        let (e, v) = stopper.best();
        (e, Some(v))
    };
    enc.phi = best.0;
    let predictor = best.1;
    let test_accuracy = if splits.test.is_empty() {
        None
    } else {
        let z = rgvt_forward_with(&enc, &data.graph, &data.features, depth, false)?;
        let labels = data.labels.gather(&splits.test);
        Some(accuracy(&predictor, z.output(), &splits.test, &labels)?)
    };
    let checkpoint = Checkpoint {
        encoder: enc,
        config: cfg.clone(),
        meta: TrainingMeta {
            dataset: data.name.clone(),
            num_features: f,
            num_classes: k,
            epochs_run: history.len(),
            best_epoch,
            best_val_accuracy,
        },
    };
    Ok(PretrainRun {
        checkpoint,
        predictor,
        history,
        test_accuracy,
    })
}
