//! DeepONet surrogates mapping orientation grids to mean stress curves.

pub mod mp;
pub mod resunet;
pub mod sc;
pub mod scaler;
pub mod train;
pub mod weights;

use std::time::Instant;

use xtal_nn::Tensor;

pub use mp::{mp_inputs, MpDeepOnet, MP_INPUTS};
pub use resunet::{TrunkConfig, HIDDEN};
pub use sc::{ScDeepOnet, SC_BRANCH};
pub use scaler::{InputScaler, ScalerPerStep};
pub use train::{
    finetune_sc, loss_csv, split_indices, train, train_mp, train_sc, trunk_features, LossRecord, TrainConfig, TrainMode,
    TrainReport,
};
pub use weights::{read_descriptor, ModelDescriptor, ModelKind};

use crate::basis::BasisSet;
use crate::cpfem::ResponseCurve;
use crate::error::{Error, Result};
use crate::micro::{normalize_orientations, Microstructure};

/// Normalized orientation grid of a microstructure, row-major.
pub fn normalized_grid(m: &Microstructure) -> Result<Vec<f64>> {
    normalize_orientations(&m.orientation_field().angles)
}

/// Stacks `[H·W]` grids into `[N, H, W, 1]`.
pub fn grid_tensor(grids: &[Vec<f64>], height: usize, width: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(grids.len() * height * width);
    for g in grids {
        if g.len() != height * width {
            return Err(Error::Dimension(format!("grid of {} values for {height}x{width}", g.len())));
        }
        data.extend_from_slice(g);
    }
    Ok(Tensor::new(vec![grids.len(), height, width, 1], data)?)
}

/// Normalized grids paired with FE stress curves in MPa.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    pub grids: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(height: usize, width: usize, grids: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if grids.len() != targets.len() {
            return Err(Error::Dimension(format!("{} grids for {} curves", grids.len(), targets.len())));
        }
        if let Some(g) = grids.iter().find(|g| g.len() != height * width) {
            return Err(Error::Dimension(format!("grid of {} values for {height}x{width}", g.len())));
        }
        if grids.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Argument("grid values must lie in [0, 1]".into()));
        }
        if targets.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Argument("target stresses must be finite".into()));
        }
        if let Some(t) = targets.first() {
            if targets.iter().any(|s| s.len() != t.len()) {
                return Err(Error::Dimension("curves must share one step count".into()));
            }
        }
        Ok(Self { height, width, grids, targets })
    }

    pub fn from_pairs(micros: &[Microstructure], curves: &[ResponseCurve]) -> Result<Self> {
        let Some(first) = micros.first() else {
            return Err(Error::Contract("dataset needs at least one microstructure".into()));
        };
        if micros.iter().any(|m| m.height != first.height || m.width != first.width) {
            return Err(Error::Dimension("microstructures differ in grid size".into()));
        }
        let grids = micros.iter().map(normalized_grid).collect::<Result<Vec<_>>>()?;
        let targets = curves.iter().map(|c| c.stresses.clone()).collect();
        Self::new(first.height, first.width, grids, targets)
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            height: self.height,
            width: self.width,
            grids: idx.iter().map(|&i| self.grids[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i].clone()).collect(),
        }
    }

    pub fn grid_batch(&self, idx: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(idx.len() * self.height * self.width);
        for &i in idx {
            data.extend_from_slice(&self.grids[i]);
        }
        Ok(Tensor::new(vec![idx.len(), self.height, self.width, 1], data)?)
    }
}

/// Predicted curves in MPa with the measured inference cost.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub stresses: Vec<Vec<f64>>,
    pub seconds_per_case: f64,
}

const PREDICT_CHUNK: usize = 64;

fn unscale_rows(y: &Tensor, scaler: &ScalerPerStep) -> Result<Vec<Vec<f64>>> {
    let t = y.shape()[1];
    y.data().chunks(t).map(|r| scaler.unscale(r)).collect()
}

/// SC forward pass plus unscaling for each grid, in order.
pub fn predict_sc(model: &ScDeepOnet, grids: &[Vec<f64>], height: usize, width: usize, basis: &BasisSet, scaler: &ScalerPerStep) -> Result<Prediction> {
    let start = Instant::now();
    let basis_t = scaler.scale_basis(basis)?;
    let mut stresses = Vec::with_capacity(grids.len());
    for chunk in grids.chunks(PREDICT_CHUNK) {
        let y = model.forward(&grid_tensor(chunk, height, width)?, &basis_t)?;
        stresses.extend(unscale_rows(&y, scaler)?);
    }
    let seconds_per_case = start.elapsed().as_secs_f64() / grids.len().max(1) as f64;
    Ok(Prediction { stresses, seconds_per_case })
}

/// MP forward pass plus unscaling; `inputs[i]` are the raw nine inputs.
pub fn predict_mp(model: &MpDeepOnet, grids: &[Vec<f64>], height: usize, width: usize, inputs: &[Vec<f64>], scaler: &ScalerPerStep) -> Result<Prediction> {
    let start = Instant::now();
    if inputs.len() != grids.len() {
        return Err(Error::Dimension(format!("{} input rows for {} grids", inputs.len(), grids.len())));
    }
    if scaler.len() != model.steps() {
        return Err(Error::Dimension(format!("{}-step scaler for a {}-step model", scaler.len(), model.steps())));
    }
    let mut stresses = Vec::with_capacity(grids.len());
    for (g, x) in grids.chunks(PREDICT_CHUNK).zip(inputs.chunks(PREDICT_CHUNK)) {
        let y = model.forward(&grid_tensor(g, height, width)?, &model.scale_inputs(x)?)?;
        stresses.extend(unscale_rows(&y, scaler)?);
    }
    let seconds_per_case = start.elapsed().as_secs_f64() / grids.len().max(1) as f64;
    Ok(Prediction { stresses, seconds_per_case })
}
