//! Minibatch training loop with validation-driven schedule and best-epoch
//! selection.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, OptimState};
use super::checkpoint::Checkpoint;
use super::loss::{hybrid_loss_batch, LossWeights};
use super::schedule::Schedule;
use crate::config::ExperimentConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::metrics::score;
use crate::fista::default_step;
use crate::forward::{Echo, SensingMatrix};
use crate::model::Model;

pub const LOG_HEADER: &str = "epoch,lr,train_loss,val_loss,val_mse,val_ssim";
const EVAL_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_mse: f64,
    pub val_ssim: f64,
}

impl EpochLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.lr, self.train_loss, self.val_loss, self.val_mse, self.val_ssim
        )
    }
}

/// Mean loss and image metrics of a model over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub mse: f64,
    pub ssim: f64,
}

pub(crate) fn truth_matrix(data: &Dataset, idx: &[usize], cells: usize) -> Array2<f64> {
    let mut t = Array2::zeros((idx.len(), cells));
    for (r, &i) in idx.iter().enumerate() {
        t.row_mut(r).assign(&ndarray::ArrayView1::from(data.maps[i].values()));
    }
    t
}

pub fn evaluate(model: &Model, a: &SensingMatrix, data: &Dataset, w: LossWeights) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let (mut loss, mut mse, mut ssim) = (0.0, 0.0, 0.0);
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let echoes: Vec<&Echo> = chunk.iter().map(|&i| &data.echoes[i]).collect();
        let pred = model.predict_batch(a, &echoes)?;
        let truth = truth_matrix(data, chunk, a.cols());
        let (l, _, _) = hybrid_loss_batch(truth.view(), pred.view(), &echoes, a, w)?;
        loss += l * chunk.len() as f64;
        for (r, &i) in chunk.iter().enumerate() {
            let (m, s) = score(data.maps[i].values(), pred.row(r).as_slice().expect("row-major"), model.side())?;
            mse += m;
            ssim += s;
        }
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        mse: mse / n,
        ssim: ssim / n,
    })
}

/// Loss weights of `cfg`, with the physics scale taken from `a` when
/// normalization is on.
pub fn loss_weights(cfg: &ExperimentConfig, a: &SensingMatrix) -> Result<LossWeights> {
    let w = LossWeights::new(cfg.loss_lambda1, cfg.loss_lambda2)?;
    if cfg.normalize_physics {
        w.with_physics_scale(default_step(a)?)
    } else {
        Ok(w)
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// State at the epoch with the lowest validation loss (epoch 0 is the
    /// untrained model).
    pub best: Checkpoint,
    pub final_model: Model,
    pub history: Vec<EpochLog>,
}

/// Trains `model` on noise-free `train` echoes, monitoring `val`. Writes the
/// per-epoch CSV to `log_path` when given; row 0 describes the untrained
/// model.
fn non_finite(epoch: usize, batch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Diverged { .. } => Error::NonFiniteLoss { epoch, batch },
        other => other,
    }
}

pub fn fit(
    mut model: Model,
    a: &SensingMatrix,
    train: &Dataset,
    val: &Dataset,
    cfg: &ExperimentConfig,
    log_path: Option<&Path>,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let w = loss_weights(cfg, a)?;
    let mut optim = OptimState::new(model.params(), cfg.learning_rate);
    let mut schedule = Schedule::new(cfg.learning_rate, cfg.lr_factor, cfg.lr_patience);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut log = match log_path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Error::io(p, e))?;
            let mut b = BufWriter::new(f);
            writeln!(b, "{LOG_HEADER}").map_err(|e| Error::io(p, e))?;
            Some((p, b))
        }
        None => None,
    };

    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let mut record = |row: EpochLog, log: &mut Option<(&Path, BufWriter<File>)>| -> Result<()> {
        log::info!(
            "epoch {:>3}  lr {:.1e}  train {:.5}  val {:.5}  mse {:.5}  ssim {:.4}",
            row.epoch,
            row.lr,
            row.train_loss,
            row.val_loss,
            row.val_mse,
            row.val_ssim
        );
        if let Some((p, b)) = log {
            writeln!(b, "{}", row.csv_row())
                .and_then(|_| b.flush())
                .map_err(|e| Error::io(*p, e))?;
        }
        history.push(row);
        Ok(())
    };

    let init_train = evaluate(&model, a, train, w).map_err(non_finite(0, 0))?;
    let init_val = evaluate(&model, a, val, w).map_err(non_finite(0, 0))?;
    record(
        EpochLog {
            epoch: 0,
            lr: optim.learning_rate,
            train_loss: init_train.loss,
            val_loss: init_val.loss,
            val_mse: init_val.mse,
            val_ssim: init_val.ssim,
        },
        &mut log,
    )?;
    schedule.observe(init_val.loss);
    let mut best = Checkpoint {
        config: cfg.clone(),
        model: model.clone(),
        optim: optim.clone(),
        schedule: schedule.clone(),
        epoch: 0,
        best_val_loss: init_val.loss,
    };

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let lr = optim.learning_rate;
        let mut total = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let echoes: Vec<&Echo> = chunk.iter().map(|&i| &train.echoes[i]).collect();
            let truth = truth_matrix(train, chunk, a.cols());
            let (pred, cache) = model.forward_batch(a, &echoes, true).map_err(non_finite(epoch, batch))?;
            let (loss, d_out, _) = hybrid_loss_batch(truth.view(), pred.view(), &echoes, a, w)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            let grads = model.backward(a, &cache.expect("cache requested"), d_out.view());
            if !grads.all_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            adam_step(model.params_mut(), &grads, &mut optim)?;
            total += loss * chunk.len() as f64;
        }
        let v = evaluate(&model, a, val, w).map_err(non_finite(epoch, 0))?;
        record(
            EpochLog {
                epoch,
                lr,
                train_loss: total / train.len() as f64,
                val_loss: v.loss,
                val_mse: v.mse,
                val_ssim: v.ssim,
            },
            &mut log,
        )?;
        let improved = v.loss < best.best_val_loss;
        if schedule.observe(v.loss) {
            log::info!("learning rate reduced to {:e}", schedule.learning_rate);
        }
        optim.learning_rate = schedule.learning_rate;
        if improved {
            best = Checkpoint {
                config: cfg.clone(),
                model: model.clone(),
                optim: optim.clone(),
                schedule: schedule.clone(),
                epoch,
                best_val_loss: v.loss,
            };
        }
    }
    Ok(FitOutcome {
        best,
        final_model: model,
        history,
    })
}
