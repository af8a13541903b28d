//! Supervised training and evaluation.
//!
//! Augmentation protocol: deterministic augmentations (identity, FDM,
//! expected-mode FANA) are applied once before the loop; stochastic ones
//! are re-sampled every epoch with a seed mixed from `(run_seed, epoch)`.
//! Validation and test metrics are always computed on the original graph in
//! eval mode, so augmentation acts purely as a training-time regularizer.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::{apply, apply_with_seed, AugmenterSpec};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::models::{init_params, model_forward, Mode, ModelConfig};
use crate::rng;
use crate::tensor::adam::{AdamConfig, AdamState, SgdState};
use crate::tensor::checkpoint::ParamSet;
use crate::tensor::ops::cross_entropy_masked;
use crate::tensor::{backward, Variable};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerConfig {
    Adam(AdamConfig),
    Sgd { lr: f64, weight_decay: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam(AdamConfig::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_epochs() -> usize {
    200
}
fn default_patience() -> usize {
    30
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: default_epochs(),
            patience: default_patience(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

/// Frozen architecture + parameters, the unit that gets checkpointed.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub params: ParamSet,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub trace: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

enum Optimizer {
    Adam(AdamState),
    Sgd(SgdState),
}

impl Optimizer {
    fn new(cfg: OptimizerConfig, shapes: &[(usize, usize)]) -> Self {
        match cfg {
            OptimizerConfig::Adam(a) => Optimizer::Adam(AdamState::new(a, shapes)),
            OptimizerConfig::Sgd { lr, weight_decay } => {
                Optimizer::Sgd(SgdState { lr, weight_decay })
            }
        }
    }

    fn step_vars(&mut self, vars: &[Variable]) -> Result<()> {
        match self {
            Optimizer::Adam(state) => state.step_vars(vars),
            Optimizer::Sgd(state) => {
                let mut params: Vec<_> = vars.iter().map(Variable::value).collect();
                let grads: Vec<_> = vars
                    .iter()
                    .map(|v| {
                        v.grad().ok_or_else(|| {
                            Error::Validation("parameter has no gradient".into())
                        })
                    })
                    .collect::<Result<_>>()?;
                state.step(&mut params, &grads)?;
                for (var, updated) in vars.iter().zip(params) {
                    var.set_value(updated)?;
                    var.zero_grad();
                }
                Ok(())
            }
        }
    }
}

/// Full training run: per-epoch augmentation, Adam on the train-mask
/// cross-entropy, best-validation checkpointing, early stopping. Fully
/// deterministic for a fixed `(graph, configs, seed)`.
pub fn train_supervised(
    g: &Graph,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    aug: &AugmenterSpec,
    seed: u64,
) -> Result<TrainOutcome> {
    let labels = g
        .labels()
        .ok_or_else(|| Error::Validation("training needs node labels".into()))?;
    let (train_mask, val_mask) = match (g.train_mask(), g.val_mask()) {
        (Some(tr), Some(va)) => (tr, va),
        _ => {
            return Err(Error::Validation(
                "training needs train/val/test masks".into(),
            ))
        }
    };
    cfg.validate()?;
    aug.validate()?;

    let mut params = init_params(cfg, rng::mix(seed, 0x1A17))?;
    let mut optimizer = Optimizer::new(tcfg.optimizer, &params.shapes());

    // Deterministic augmentations are applied once up front.
    let pre_augmented = aug.is_deterministic().then(|| apply(aug, g)).transpose()?;

    let mut trace = Vec::with_capacity(tcfg.epochs);
    let mut best_val_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_params = params.clone();
    let mut stale = 0usize;

    for epoch in 0..tcfg.epochs {
        let epoch_graph;
        let train_graph: &Graph = match &pre_augmented {
            Some(ga) => ga,
            None => {
                epoch_graph = apply_with_seed(aug, g, rng::mix(seed, epoch as u64))?;
                &epoch_graph
            }
        };

        let fp = model_forward(
            cfg,
            &params,
            train_graph,
            Mode::Train,
            rng::mix_all(seed, &[0xF0, epoch as u64]),
        )?;
        let loss = cross_entropy_masked(&fp.logits, labels, train_mask)?;
        let train_loss = loss.value().get(0, 0);
        backward(&loss)?;
        optimizer.step_vars(&fp.param_vars)?;
        params.set_all(fp.param_vars.iter().map(Variable::value).collect())?;

        let val = evaluate_params(cfg, &params, g, val_mask)?;
        trace.push(EpochRecord {
            epoch,
            train_loss,
            val_acc: val.accuracy,
        });

        if val.accuracy > best_val_acc {
            best_val_acc = val.accuracy;
            best_epoch = epoch;
            best_params = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= tcfg.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        model: TrainedModel {
            config: cfg.clone(),
            params: best_params,
        },
        trace,
        best_epoch,
        best_val_acc,
    })
}

/// Accuracy and macro-F1 of a trained model over the masked nodes of `g`.
/// Argmax ties break toward the lowest class index.
pub fn evaluate(model: &TrainedModel, g: &Graph, mask: &[bool]) -> Result<Metrics> {
    evaluate_params(&model.config, &model.params, g, mask)
}

pub(crate) fn evaluate_params(
    cfg: &ModelConfig,
    params: &ParamSet,
    g: &Graph,
    mask: &[bool],
) -> Result<Metrics> {
    let labels = g
        .labels()
        .ok_or_else(|| Error::Validation("evaluation needs node labels".into()))?;
    if mask.len() != g.num_nodes() {
        return Err(Error::Validation(format!(
            "mask of length {} for {} nodes",
            mask.len(),
            g.num_nodes()
        )));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::Validation("evaluation mask selects no nodes".into()));
    }
    let fp = model_forward(cfg, params, g, Mode::Eval, 0)?;
    let logits = fp.logits.value();
    let classes = logits.cols();

    let predictions: Vec<usize> = (0..g.num_nodes()).map(|i| argmax_row(logits.row(i))).collect();
    Ok(metrics_from_predictions(
        &predictions,
        labels,
        mask,
        classes,
    ))
}

pub(crate) fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Confusion-matrix based accuracy and macro-F1 (unweighted mean of
/// per-class F1; classes with zero denominator contribute zero).
pub fn metrics_from_predictions(
    predictions: &[usize],
    labels: &[usize],
    mask: &[bool],
    classes: usize,
) -> Metrics {
    let mut correct = 0usize;
    let mut total = 0usize;
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for i in 0..labels.len() {
        if !mask[i] {
            continue;
        }
        total += 1;
        let (pred, truth) = (predictions[i], labels[i]);
        if pred == truth {
            correct += 1;
            tp[truth] += 1;
        } else {
            fp[pred] += 1;
            fn_[truth] += 1;
        }
    }
    let mut f1_sum = 0.0;
    for c in 0..classes {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom > 0 {
            f1_sum += 2.0 * tp[c] as f64 / denom as f64;
        }
    }
    Metrics {
        accuracy: correct as f64 / total as f64,
        macro_f1: f1_sum / classes as f64,
    }
}

/// Writes the per-epoch metric trace as `epoch,train_loss,val_acc`.
pub fn write_trace_csv(trace: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("epoch,train_loss,val_acc\n");
    for rec in trace {
        text.push_str(&format!("{},{},{}\n", rec.epoch, rec.train_loss, rec.val_acc));
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelCheckpoint {
    config: ModelConfig,
    params: Vec<crate::tensor::checkpoint::NamedParam>,
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ckpt = ModelCheckpoint {
        config: model.config.clone(),
        params: model.params.to_named(),
    };
    let mut text = serde_json::to_string_pretty(&ckpt).expect("checkpoint serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let ckpt: ModelCheckpoint = serde_json::from_str(&text)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    Ok(TrainedModel {
        config: ckpt.config,
        params: ParamSet::from_named(ckpt.params)?,
    })
}
