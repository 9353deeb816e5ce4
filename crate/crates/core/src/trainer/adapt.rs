use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::predictor::argmax;
use super::pretrain::{require_split, EarlyStopping};
use super::{cross_entropy, Adam, Checkpoint, PredictorKind, PredictorParams, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{Dataset, FeatureMatrix, SplitSpec};
use crate::kernel::{rgvt_forward, EncoderState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn nodes(self, splits: &SplitSpec) -> &[usize] {
        match self {
            Split::Train => &splits.train,
            Split::Val => &splits.val,
            Split::Test => &splits.test,
        }
    }
}

/// Predictor-training settings. Defaults come from the pretraining config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub hidden: usize,
}

impl From<&TrainConfig> for AdaptConfig {
    fn from(c: &TrainConfig) -> Self {
        Self {
            lr: c.lr,
            max_epochs: c.max_epochs,
            patience: c.patience,
            seed: c.seed,
            hidden: c.hidden,
        }
    }
}

/// A predictor trained on fixed representations.
#[derive(Debug, Clone)]
pub struct FittedPredictor {
    pub predictor: PredictorParams,
    pub val_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub depth: usize,
    pub val_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub epochs_run: usize,
}

#[derive(Debug, Clone)]
pub struct Adapted {
    pub predictor: PredictorParams,
    pub depth: usize,
    pub reports: Vec<DepthReport>,
}

impl Adapted {
    pub fn chosen(&self) -> &DepthReport {
        &self.reports[self.depth - 1]
    }
}

/// Fraction of `nodes` whose argmax logit equals the label.
pub fn accuracy(
    predictor: &PredictorParams,
    z: &FeatureMatrix,
    nodes: &[usize],
    labels: &[usize],
) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::InvalidSplit("accuracy over an empty split".into()));
    }
    if nodes.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} nodes but {} labels",
            nodes.len(),
            labels.len()
        )));
    }
    let logits = predictor.forward(z, nodes)?;
    let k = predictor.classes();
    let correct = logits
        .chunks_exact(k)
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    Ok(correct as f64 / nodes.len() as f64)
}

/// Trains a fresh predictor on the rows of `z`, early-stopped on validation
/// accuracy.
pub fn train_predictor(
    z: &FeatureMatrix,
    data: &Dataset,
    kind: PredictorKind,
    cfg: &AdaptConfig,
) -> Result<FittedPredictor> {
    let splits = &data.splits;
    require_split(&splits.train, "train")?;
    require_split(&splits.val, "validation")?;
    if cfg.max_epochs == 0 || cfg.patience == 0 || !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bad predictor training settings {cfg:?}"
        )));
    }
    let k = data.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pred = PredictorParams::glorot(kind, z.num_features(), cfg.hidden, k, &mut rng)?;
    let train_labels = data.labels.gather(&splits.train);
    let val_labels = data.labels.gather(&splits.val);
    let mut opt = Adam::new(pred.params().len());
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = pred.clone();
    let mut epochs_run = 0;
    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        let (logits, cache) = pred.forward_cached(z, &splits.train)?;
        let (loss, d_logits) = cross_entropy(&logits, k, &train_labels)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        if stopper.observe(epoch, accuracy(&pred, z, &splits.val, &val_labels)?) {
            best = pred.clone();
        }
        if stopper.exhausted() || epoch == cfg.max_epochs {
            break;
        }
        let grad = pred.backward(z, &splits.train, &cache, &d_logits, None)?;
        opt.step(pred.params_mut(), &grad, cfg.lr)?;
    }
    let (best_epoch, val_accuracy) = stopper.best();
    let test_accuracy = if splits.test.is_empty() {
        None
    } else {
        Some(accuracy(
            &best,
            z,
            &splits.test,
            &data.labels.gather(&splits.test),
        )?)
    };
    Ok(FittedPredictor {
        predictor: best,
        val_accuracy,
        test_accuracy,
        best_epoch,
        epochs_run,
    })
}

/// Freezes the checkpoint's encoder, trains one predictor per depth
/// `1..=L_pretrain`, and keeps the depth with the best validation accuracy
/// (ties go to the smaller depth).
pub fn adapt(ckpt: &Checkpoint, data: &Dataset, kind: PredictorKind) -> Result<Adapted> {
    adapt_with(ckpt, data, kind, &AdaptConfig::from(&ckpt.config))
}

pub fn adapt_with(
    ckpt: &Checkpoint,
    data: &Dataset,
    kind: PredictorKind,
    cfg: &AdaptConfig,
) -> Result<Adapted> {
    let enc = &ckpt.encoder;
    let trace = rgvt_forward(enc, &data.graph, &data.features, enc.pretrain_depth)?;
    adapt_on_states(&trace.states[1..], data, kind, cfg)
}

/// Depth selection over precomputed representations; `states[l - 1]` is the
/// representation at depth `l`.
pub fn adapt_on_states(
    states: &[FeatureMatrix],
    data: &Dataset,
    kind: PredictorKind,
    cfg: &AdaptConfig,
) -> Result<Adapted> {
    if states.is_empty() {
        return Err(Error::InvalidParameter("no depths to adapt over".into()));
    }
    let fits = states
        .par_iter()
        .map(|z| train_predictor(z, data, kind, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut chosen = 0;
    for (i, fit) in fits.iter().enumerate() {
        if fit.val_accuracy > fits[chosen].val_accuracy {
            chosen = i;
        }
    }
    let reports = fits
        .iter()
        .enumerate()
        .map(|(i, f)| DepthReport {
            depth: i + 1,
            val_accuracy: f.val_accuracy,
            test_accuracy: f.test_accuracy,
            epochs_run: f.epochs_run,
        })
        .collect();
    Ok(Adapted {
        predictor: fits.into_iter().nth(chosen).unwrap().predictor,
        depth: chosen + 1,
        reports,
    })
}

/// Accuracy of `predictor` on `Ψ^depth(X)` over one split.
pub fn evaluate(
    enc: &EncoderState,
    predictor: &PredictorParams,
    depth: usize,
    data: &Dataset,
    split: Split,
) -> Result<f64> {
    let nodes = split.nodes(&data.splits);
    if nodes.is_empty() {
        return Err(Error::InvalidSplit(format!("{split:?} split is empty")));
    }
    let trace = rgvt_forward(enc, &data.graph, &data.features, depth)?;
    accuracy(predictor, trace.output(), nodes, &data.labels.gather(nodes))
}
