use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use xtal_nn::{Adam, AdamConfig, ParamSet, Tape, Tensor, Var};

use super::mp::MpDeepOnet;
use super::resunet::is_trunk;
use super::scaler::{InputScaler, ScalerPerStep};
use super::sc::ScDeepOnet;
use super::{grid_tensor, Dataset};
use crate::basis::BasisSet;
use crate::error::{Error, Result};

pub const LOG_EVERY: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Baseline,
    Transfer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub mode: TrainMode,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 80_000,
            batch_size: 4,
            learning_rate: 1e-3,
            seed: 0,
            train_fraction: 0.8,
            mode: TrainMode::Baseline,
            finetune_epochs: 20_000,
            finetune_lr: 5e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Argument(format!("train_fraction {} outside (0, 1)", self.train_fraction)));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be positive".into()));
        }
        for lr in [self.learning_rate, self.finetune_lr] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Argument(format!("learning rate {lr} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub mse: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<LossRecord>,
    pub final_loss: Option<f64>,
    pub epochs: usize,
    pub samples: usize,
    pub wall_seconds: f64,
}

/// Loss history as CSV with header `epoch,mse`.
pub fn loss_csv(history: &[LossRecord]) -> String {
    let mut s = String::from("epoch,mse\n");
    for r in history {
        s.push_str(&format!("{},{:e}\n", r.epoch, r.mse));
    }
    s
}

/// Seeded shuffle split into (train, test) index lists.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Argument(format!("train_fraction {train_fraction} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * train_fraction).round() as usize).min(n);
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

struct Fit {
    epochs: usize,
    batch: usize,
    lr: f64,
    seed: u64,
}

/// Minibatch Adam over `n` samples. The batch closure returns the mean loss
/// of its samples; the epoch loss weights batches by their size.
fn fit(
    params: &mut ParamSet,
    n: usize,
    cfg: Fit,
    mut batch_loss: impl FnMut(&mut Tape, &[Var], &[usize]) -> Result<Var>,
) -> Result<TrainReport> {
    let start = Instant::now();
    if n == 0 {
        return Err(Error::Contract("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(params, AdamConfig::with_lr(cfg.lr));
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();
    let mut last = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch).enumerate() {
            let mut tape = Tape::new();
            let vars = params.bind(&mut tape);
            let loss = batch_loss(&mut tape, &vars, chunk)?;
            let l = tape.value(loss).item().ok_or_else(|| Error::Contract("loss is not a scalar".into()))?;
            if !l.is_finite() {
                return Err(Error::Numerical(format!(
                    "loss {l} at epoch {epoch}, batch {bi}, learning rate {:e}",
                    cfg.lr
                )));
            }
            let grads = tape.backward(loss)?;
            params.accumulate(&vars, &grads)?;
            adam.step(params)?;
            total += l * chunk.len() as f64;
        }
        let mse = total / n as f64;
        last = Some(mse);
        if epoch % LOG_EVERY == 0 || epoch == cfg.epochs {
            log::debug!("epoch {epoch}: mse {mse:e}");
            history.push(LossRecord { epoch, mse });
        }
    }
    Ok(TrainReport { history, final_loss: last, epochs: cfg.epochs, samples: n, wall_seconds: start.elapsed().as_secs_f64() })
}

fn scaled_targets(data: &Dataset, scaler: &ScalerPerStep) -> Result<Vec<Vec<f64>>> {
    data.targets.iter().map(|t| scaler.scale(t)).collect()
}

fn target_batch(targets: &[Vec<f64>], idx: &[usize]) -> Result<Tensor> {
    let t = targets[0].len();
    let data = idx.iter().flat_map(|&i| targets[i].iter().copied()).collect();
    Ok(Tensor::new(vec![idx.len(), t], data)?)
}

fn check_steps(data: &Dataset, basis: &BasisSet) -> Result<()> {
    if data.n_steps() != basis.n_steps() {
        return Err(Error::Dimension(format!("dataset has {} steps, basis {}", data.n_steps(), basis.n_steps())));
    }
    Ok(())
}

/// Trains every SC parameter for `cfg.epochs` at `cfg.learning_rate`.
pub fn train_sc(model: &mut ScDeepOnet, data: &Dataset, basis: &BasisSet, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    check_steps(data, basis)?;
    let scaler = ScalerPerStep::from_basis(basis)?;
    let basis_t = scaler.scale_basis(basis)?;
    let targets = scaled_targets(data, &scaler)?;
    let mut params = model.params().clone();
    params.set_trainable(|_| true, true);
    let m = &*model;
    let fit_cfg = Fit { epochs: cfg.epochs, batch: cfg.batch_size, lr: cfg.learning_rate, seed: cfg.seed };
    let report = fit(&mut params, data.len(), fit_cfg, |tape, vars, idx| {
        let g = tape.constant(data.grid_batch(idx)?);
        let b = tape.constant(basis_t.clone());
        let y = m.forward_on(tape, vars, g, b)?;
        Ok(tape.mse(y, &target_batch(&targets, idx)?)?)
    })?;
    *model.params_mut() = params;
    Ok(report)
}

/// Spatially averaged trunk features `[N, HD]` for every grid in `data`.
pub fn trunk_features(model: &ScDeepOnet, data: &Dataset) -> Result<Tensor> {
    let hd = model.config().hidden;
    let mut out = Vec::with_capacity(data.len() * hd);
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(64) {
        let mut tape = Tape::new();
        let vars = model.params().bind(&mut tape);
        let g = tape.constant(data.grid_batch(chunk)?);
        let f = model.features(&mut tape, &vars, g)?;
        out.extend_from_slice(tape.value(f).data());
    }
    Ok(Tensor::new(vec![data.len(), hd], out)?)
}

/// Transfer learning: the trunk stays frozen bitwise while the branch and
/// β train for `cfg.finetune_epochs` at `cfg.finetune_lr`. Trunk features
/// are computed once since they cannot change.
pub fn finetune_sc(model: &mut ScDeepOnet, data: &Dataset, basis: &BasisSet, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    check_steps(data, basis)?;
    let scaler = ScalerPerStep::from_basis(basis)?;
    let basis_t = scaler.scale_basis(basis)?;
    let targets = scaled_targets(data, &scaler)?;
    let feats = trunk_features(model, data)?;
    let hd = model.config().hidden;
    let mut params = model.params().clone();
    params.set_trainable(|_| true, true);
    params.set_trainable(is_trunk, false);
    let m = &*model;
    let fit_cfg = Fit { epochs: cfg.finetune_epochs, batch: cfg.batch_size, lr: cfg.finetune_lr, seed: cfg.seed };
    let report = fit(&mut params, data.len(), fit_cfg, |tape, vars, idx| {
        let rows = idx.iter().flat_map(|&i| feats.data()[i * hd..(i + 1) * hd].iter().copied()).collect();
        let f = tape.constant(Tensor::new(vec![idx.len(), hd], rows)?);
        let b = tape.constant(basis_t.clone());
        let br = m.branch(tape, vars, b)?;
        let y = m.readout(tape, vars, f, br)?;
        Ok(tape.mse(y, &target_batch(&targets, idx)?)?)
    })?;
    params.set_trainable(|_| true, true);
    *model.params_mut() = params;
    Ok(report)
}

/// Dispatches on `cfg.mode`.
pub fn train(model: &mut ScDeepOnet, data: &Dataset, basis: &BasisSet, cfg: &TrainConfig) -> Result<TrainReport> {
    match cfg.mode {
        TrainMode::Baseline => train_sc(model, data, basis, cfg),
        TrainMode::Transfer => finetune_sc(model, data, basis, cfg),
    }
}

/// Trains an MP model. `inputs[i]` holds the nine raw inputs of sample i;
/// the input scaler is fitted on them and stored in the model.
pub fn train_mp(
    model: &mut MpDeepOnet,
    data: &Dataset,
    inputs: &[Vec<f64>],
    scaler: &ScalerPerStep,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.n_steps() != model.steps() {
        return Err(Error::Dimension(format!("dataset has {} steps, MP model {}", data.n_steps(), model.steps())));
    }
    if inputs.len() != data.len() {
        return Err(Error::Dimension(format!("{} input rows for {} samples", inputs.len(), data.len())));
    }
    model.input_scaler = Some(InputScaler::fit(inputs)?);
    let x = model.scale_inputs(inputs)?;
    let targets = scaled_targets(data, scaler)?;
    let mut params = model.params().clone();
    params.set_trainable(|_| true, true);
    let m = &*model;
    let fit_cfg = Fit { epochs: cfg.epochs, batch: cfg.batch_size, lr: cfg.learning_rate, seed: cfg.seed };
    let report = fit(&mut params, data.len(), fit_cfg, |tape, vars, idx| {
        let g = tape.constant(data.grid_batch(idx)?);
        let rows = idx.iter().flat_map(|&i| x.data()[i * 9..(i + 1) * 9].iter().copied()).collect();
        let xi = tape.constant(Tensor::new(vec![idx.len(), 9], rows)?);
        let y = m.forward_on(tape, vars, g, xi)?;
        Ok(tape.mse(y, &target_batch(&targets, idx)?)?)
    })?;
    *model.params_mut() = params;
    Ok(report)
}

/// `[N, H, W, 1]` tensor from every grid of a dataset, for callers that
/// want the raw forward pass.
pub fn dataset_grids(data: &Dataset) -> Result<Tensor> {
    grid_tensor(&data.grids, data.height, data.width)
}
