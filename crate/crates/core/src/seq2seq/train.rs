use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Batch, Example, Model, ModelConfig};
use super::optim::{clip_global_norm, Optimizer};
use super::Seq2SeqError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub val_split: f64,
    /// Drives the train/validation split and per-epoch shuffles.
    pub seed: u64,
    /// Global gradient-norm ceiling, if any.
    pub clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 16,
            val_split: 0.2,
            seed: 0,
            clip: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub mae: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,mae,mse\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{:.10e},{:.10e},{:.10e},{:.10e}", e.epoch, e.train_loss, e.val_loss, e.mae, e.mse);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub mae: f64,
    pub mse: f64,
    /// Fraction of weighted positions whose argmax equals the target.
    pub accuracy: f64,
}

/// Teacher-forced loss, plus MAE/MSE of `(argmax − target) / V`, over target
/// tokens and the closing `PAD`.
pub fn evaluate(model: &Model, data: &[&Example], batch_size: usize) -> Evaluation {
    let v = model.cfg.vocab_size as f64;
    let (mut loss, mut abs, mut sq, mut hits, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for chunk in data.chunks(batch_size.max(1)) {
        let batch = Batch::new(chunk, model.cfg.seq_len);
        let out = model.run(&batch, false);
        let w: f64 = batch.weights.iter().sum();
        loss += out.loss * w;
        for ((&pred, &tgt), &wt) in out.argmax.iter().zip(&batch.tgt).zip(&batch.weights) {
            let d = (pred as f64 - tgt as f64) / v;
            abs += wt * d.abs();
            sq += wt * d * d;
            hits += wt * f64::from(u8::from(pred == tgt));
        }
        n += w;
    }
    let n = if n > 0.0 { n } else { 1.0 };
    Evaluation {
        loss: loss / n,
        mae: abs / n,
        mse: sq / n,
        accuracy: hits / n,
    }
}

/// Indices of the training and validation parts. With fewer than five
/// examples the validation part would be empty, so it reuses the training
/// set.
pub fn split(n: usize, val_split: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (n as f64 * val_split).floor() as usize;
    if n_val == 0 || n_val >= n {
        return (idx.clone(), idx);
    }
    let train = idx.split_off(n_val);
    (train, idx)
}

/// Mini-batch training with full backpropagation through time.
pub fn train(model: &mut Model, data: &[Example], opt: &mut Optimizer, cfg: &TrainConfig) -> Result<TrainHistory, Seq2SeqError> {
    if data.is_empty() {
        return Err(Seq2SeqError::EmptyDataset);
    }
    if cfg.epochs == 0 {
        return Err(Seq2SeqError::Config("epochs must be at least 1".into()));
    }
    let (train_idx, val_idx) = split(data.len(), cfg.val_split, cfg.seed);
    let val: Vec<&Example> = val_idx.iter().map(|&i| &data[i]).collect();
    let mut order = train_idx;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut history = TrainHistory::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut weight) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let examples: Vec<&Example> = chunk.iter().map(|&i| &data[i]).collect();
            let batch = Batch::new(&examples, model.cfg.seq_len);
            let out = model.run(&batch, true);
            if !out.loss.is_finite() {
                return Err(Seq2SeqError::Diverged {
                    epoch,
                    last_good: epoch - 1,
                });
            }
            let mut grads = out.grads.expect("gradients requested");
            if let Some(c) = cfg.clip {
                clip_global_norm(&mut grads, c);
            }
            opt.step(&mut model.params.values, &grads);
            let w: f64 = batch.weights.iter().sum();
            total += out.loss * w;
            weight += w;
        }
        let ev = evaluate(model, &val, cfg.batch_size);
        if !ev.loss.is_finite() {
            return Err(Seq2SeqError::Diverged {
                epoch,
                last_good: epoch - 1,
            });
        }
        history.epochs.push(EpochStats {
            epoch,
            train_loss: total / weight.max(1.0),
            val_loss: ev.loss,
            mae: ev.mae,
            mse: ev.mse,
        });
    }
    Ok(history)
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub names: Vec<String>,
    pub params: Vec<Array2<f64>>,
    pub optimizer: Option<Optimizer>,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn new(model: &Model, optimizer: Option<&Optimizer>, epoch: usize) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config: model.cfg,
            names: model.params.names.clone(),
            params: model.params.values.clone(),
            optimizer: optimizer.cloned(),
            epoch,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, Seq2SeqError> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| Seq2SeqError::Checkpoint(e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Seq2SeqError::Checkpoint(format!("unsupported version {}", c.version)));
        }
        Ok(c)
    }

    pub fn model(&self) -> Result<Model, Seq2SeqError> {
        Model::from_parts(self.config, self.names.clone(), self.params.clone()).map_err(Seq2SeqError::Checkpoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq2seq::model::Variant;
    use crate::seq2seq::optim::OptimizerConfig;

    fn toy() -> Vec<Example> {
        (0..6u32)
            .map(|k| Example {
                src: vec![3 + k % 4, 4, 5 + k % 3],
                tgt: vec![5 + k % 3, 3 + k % 4],
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut m = Model::build(ModelConfig::new(Variant::M3, 10, 4), 1);
        let before = m.params.clone();
        let mut opt = Optimizer::new(OptimizerConfig::adam().with_lr(0.0));
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let h = train(&mut m, &toy(), &mut opt, &cfg).unwrap();
        assert_eq!(m.params, before);
        assert!(h.epochs.windows(2).all(|w| w[0].val_loss == w[1].val_loss));
        assert_eq!(h.epochs.len(), 3);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let run = || {
            let mut m = Model::build(ModelConfig::new(Variant::M3, 10, 4), 2);
            let mut opt = Optimizer::new(OptimizerConfig::adam().with_lr(0.01));
            let cfg = TrainConfig {
                epochs: 60,
                val_split: 0.0,
                ..TrainConfig::default()
            };
            train(&mut m, &toy(), &mut opt, &cfg).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.last().unwrap().val_loss < 0.5 * a.epochs[0].val_loss);
    }

    #[test]
    fn divergence_names_last_good_epoch() {
        let mut m = Model::build(ModelConfig::new(Variant::M3, 10, 4), 1);
        m.params.values[0].fill(f64::NAN);
        let mut opt = Optimizer::new(OptimizerConfig::sgd());
        match train(&mut m, &toy(), &mut opt, &TrainConfig::default()) {
            Err(Seq2SeqError::Diverged { epoch, last_good }) => assert_eq!((epoch, last_good), (1, 0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn split_sizes() {
        let (t, v) = split(80, 0.2, 0);
        assert_eq!((t.len(), v.len()), (64, 16));
        let (t, v) = split(2, 0.2, 0);
        assert_eq!(t, v);
    }

    #[test]
    fn perfect_predictions_have_zero_error() {
        let mut m = Model::build(ModelConfig::new(Variant::M3, 10, 4), 2);
        let mut opt = Optimizer::new(OptimizerConfig::adam().with_lr(0.02));
        let data = toy();
        let cfg = TrainConfig {
            epochs: 300,
            val_split: 0.0,
            ..TrainConfig::default()
        };
        train(&mut m, &data, &mut opt, &cfg).unwrap();
        let refs: Vec<&Example> = data.iter().collect();
        let ev = evaluate(&m, &refs, 16);
        assert_eq!(ev.accuracy, 1.0);
        assert_eq!((ev.mae, ev.mse), (0.0, 0.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = Model::build(ModelConfig::new(Variant::M1, 9, 3), 5);
        let opt = Optimizer::new(OptimizerConfig::rmsprop());
        let ck = Checkpoint::new(&m, Some(&opt), 7);
        let back = Checkpoint::from_json(&ck.to_json()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.model().unwrap(), m);
        let csv = TrainHistory {
            epochs: vec![EpochStats {
                epoch: 1,
                train_loss: 1.0,
                val_loss: 2.0,
                mae: 0.0,
                mse: 0.0,
            }],
        }
        .to_csv();
        assert!(csv.starts_with("epoch,train_loss,val_loss,mae,mse\n1,"));
    }
}
