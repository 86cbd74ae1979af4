//! Gradient-descent training loop with per-epoch loss curves.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{grad_sq_loss_with_loss, forward_batch, sign_disagreement, MLPParams};
use crate::activation::ActivationSpec;
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Losses above this abort training.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchMode {
    Full,
    Minibatch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskMode {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch: BatchMode,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    pub seed: u64,
}

fn default_batch() -> BatchMode {
    BatchMode::Full
}

fn default_init_scale() -> f64 {
    1.0
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be positive"));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(invalid("init_scale must be positive"));
        }
        if let BatchMode::Minibatch(0) = self.batch {
            return Err(invalid("minibatch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentArch {
    pub hidden_units: usize,
    pub activation: ActivationSpec,
}

/// Train and test sets. `bayes_01` is the test 0/1 error of the Bayes
/// classifier, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train_x: Array2<f64>,
    pub train_y: Array1<f64>,
    pub test_x: Array2<f64>,
    pub test_y: Array1<f64>,
    pub bayes_01: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_sq_loss: f64,
    pub test_sq_loss: f64,
    pub train_01: Option<f64>,
    pub test_01: Option<f64>,
    pub bayes_01: Option<f64>,
}

/// One record per epoch; record 0 is the initialization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Curves {
    pub records: Vec<EpochRecord>,
}

impl Curves {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub curves: Curves,
    pub params: MLPParams,
}

fn evaluate(p: &MLPParams, data: &Dataset, mode: TaskMode, epoch: usize) -> Result<EpochRecord> {
    let htr = forward_batch(p, &data.train_x.view())?;
    let hte = forward_batch(p, &data.test_x.view())?;
    let mse = |h: &Array1<f64>, y: &Array1<f64>| (h - y).mapv(|r| r * r).mean().unwrap_or(f64::NAN);
    let (train_01, test_01, bayes_01) = match mode {
        TaskMode::Regression => (None, None, None),
        TaskMode::Classification => (
            Some(sign_disagreement(htr.as_slice().expect("fresh"), &data.train_y.view())),
            Some(sign_disagreement(hte.as_slice().expect("fresh"), &data.test_y.view())),
            data.bayes_01,
        ),
    };
    Ok(EpochRecord {
        epoch,
        train_sq_loss: mse(&htr, &data.train_y),
        test_sq_loss: mse(&hte, &data.test_y),
        train_01,
        test_01,
        bayes_01,
    })
}

fn check_data(arch: &StudentArch, data: &Dataset) -> Result<usize> {
    let n = data.train_x.ncols();
    if data.test_x.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: data.test_x.ncols(),
        });
    }
    if data.train_x.nrows() != data.train_y.len() {
        return Err(Error::DimensionMismatch {
            expected: data.train_x.nrows(),
            got: data.train_y.len(),
        });
    }
    if data.test_x.nrows() != data.test_y.len() {
        return Err(Error::DimensionMismatch {
            expected: data.test_x.nrows(),
            got: data.test_y.len(),
        });
    }
    if data.train_x.nrows() == 0 || data.test_x.nrows() == 0 {
        return Err(invalid("train and test sets must be nonempty"));
    }
    if arch.hidden_units == 0 {
        return Err(invalid("student needs at least one hidden unit"));
    }
    Ok(n)
}

/// Trains a freshly initialized student. Initialization uses
/// `derive_seed(cfg.seed, "train/init", 0)` and minibatch shuffling uses
/// `derive_seed(cfg.seed, "train/shuffle", 0)`.
pub fn train(arch: &StudentArch, data: &Dataset, cfg: &TrainConfig, mode: TaskMode) -> Result<TrainResult> {
    cfg.validate()?;
    let n = check_data(arch, data)?;
    let params = MLPParams::init(
        arch.hidden_units,
        n,
        arch.activation,
        cfg.init_scale,
        derive_seed(cfg.seed, "train/init", 0),
    )?;
    train_from(params, data, cfg, mode)
}

/// Trains starting from the given parameters.
pub fn train_from(mut params: MLPParams, data: &Dataset, cfg: &TrainConfig, mode: TaskMode) -> Result<TrainResult> {
    cfg.validate()?;
    params.validate()?;
    let arch = StudentArch {
        hidden_units: params.hidden(),
        activation: params.activation,
    };
    check_data(&arch, data)?;
    let mut curves = Curves {
        records: vec![evaluate(&params, data, mode, 0)?],
    };
    let rows = data.train_x.nrows();
    let mut order: Vec<usize> = (0..rows).collect();
    let mut shuffle_rng = rng_from_seed(derive_seed(cfg.seed, "train/shuffle", 0));
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        match cfg.batch {
            BatchMode::Full => {
                let (g, loss) = grad_sq_loss_with_loss(&params, &data.train_x.view(), &data.train_y.view())?;
                check_loss(step, loss)?;
                params.add_scaled(&g, -cfg.learning_rate);
                step += 1;
            }
            BatchMode::Minibatch(size) => {
                order.shuffle(&mut shuffle_rng);
                for idx in order.chunks(size) {
                    let xb = data.train_x.select(Axis(0), idx);
                    let yb = data.train_y.select(Axis(0), idx);
                    let (g, loss) = grad_sq_loss_with_loss(&params, &xb.view(), &yb.view())?;
                    check_loss(step, loss)?;
                    params.add_scaled(&g, -cfg.learning_rate);
                    step += 1;
                }
            }
        }
        let rec = evaluate(&params, data, mode, epoch)?;
        check_loss(step, rec.train_sq_loss)?;
        curves.records.push(rec);
    }
    Ok(TrainResult { curves, params })
}

fn check_loss(step: usize, loss: f64) -> Result<()> {
    if !loss.is_finite() || loss > DIVERGENCE_LOSS {
        return Err(Error::Diverged { step, loss });
    }
    Ok(())
}
