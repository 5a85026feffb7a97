use std::path::Path;

use serde::{Deserialize, Serialize};
use xtal_nn::{container, ParamSet, Tensor};

use super::mp::MpDeepOnet;
use super::resunet::TrunkConfig;
use super::scaler::InputScaler;
use super::sc::ScDeepOnet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sc,
    Mp,
}

/// Architecture record stored in the weight container header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub kind: ModelKind,
    pub hidden: usize,
    pub widths: [usize; 3],
    #[serde(default)]
    pub steps: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub input_scaler: Option<InputScaler>,
}

impl ModelDescriptor {
    fn trunk(&self) -> TrunkConfig {
        TrunkConfig { widths: self.widths, hidden: self.hidden }
    }

    fn same_architecture(&self, other: &ModelDescriptor) -> bool {
        self.kind == other.kind && self.hidden == other.hidden && self.widths == other.widths && self.steps == other.steps
    }
}

fn tensors(params: &ParamSet) -> Vec<(String, Tensor)> {
    params.iter().map(|p| (p.name.clone(), p.value.clone())).collect()
}

fn read(path: &Path) -> Result<(ModelDescriptor, container::NamedTensors)> {
    let nt = container::load(path)?;
    let desc: ModelDescriptor = serde_json::from_value(nt.descriptor.clone())
        .map_err(|e| Error::Weights(format!("{}: bad descriptor: {e}", path.display())))?;
    Ok((desc, nt))
}

fn fill(params: &mut ParamSet, nt: &container::NamedTensors) -> Result<()> {
    if nt.tensors.len() != params.len() {
        return Err(Error::Weights(format!("container holds {} tensors, model has {}", nt.tensors.len(), params.len())));
    }
    for p in params.iter_mut() {
        let t = nt.get(&p.name).ok_or_else(|| Error::Weights(format!("missing tensor '{}'", p.name)))?;
        if t.shape() != p.value.shape() {
            return Err(Error::Weights(format!("'{}' has shape {:?}, expected {:?}", p.name, t.shape(), p.value.shape())));
        }
        p.value.data_mut().copy_from_slice(t.data());
    }
    Ok(())
}

fn expect_kind(desc: &ModelDescriptor, kind: ModelKind) -> Result<()> {
    if desc.kind != kind {
        return Err(Error::Weights(format!("container holds a {:?} model, not {kind:?}", desc.kind)));
    }
    Ok(())
}

impl ScDeepOnet {
    pub fn descriptor(&self) -> ModelDescriptor {
        let c = self.config();
        ModelDescriptor { kind: ModelKind::Sc, hidden: c.hidden, widths: c.widths, steps: None, seed: self.seed(), input_scaler: None }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let desc = serde_json::to_value(self.descriptor())?;
        Ok(container::save(path, &desc, &tensors(self.params()))?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (desc, nt) = read(path)?;
        expect_kind(&desc, ModelKind::Sc)?;
        let mut m = ScDeepOnet::new(desc.trunk(), desc.seed)?;
        fill(m.params_mut(), &nt)?;
        Ok(m)
    }

    /// Overwrites this model's weights, refusing a different architecture.
    pub fn load_into(&mut self, path: &Path) -> Result<()> {
        let (desc, nt) = read(path)?;
        expect_kind(&desc, ModelKind::Sc)?;
        if !desc.same_architecture(&self.descriptor()) {
            return Err(Error::Weights(format!("architecture {desc:?} does not match {:?}", self.descriptor())));
        }
        fill(self.params_mut(), &nt)
    }
}

impl MpDeepOnet {
    pub fn descriptor(&self) -> ModelDescriptor {
        let c = self.config();
        ModelDescriptor {
            kind: ModelKind::Mp,
            hidden: c.hidden,
            widths: c.widths,
            steps: Some(self.steps()),
            seed: self.seed(),
            input_scaler: self.input_scaler.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let desc = serde_json::to_value(self.descriptor())?;
        Ok(container::save(path, &desc, &tensors(self.params()))?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (desc, nt) = read(path)?;
        expect_kind(&desc, ModelKind::Mp)?;
        let steps = desc.steps.ok_or_else(|| Error::Weights("MP descriptor without step count".into()))?;
        let mut m = MpDeepOnet::new(desc.trunk(), steps, desc.seed)?;
        fill(m.params_mut(), &nt)?;
        m.input_scaler = desc.input_scaler;
        Ok(m)
    }

    pub fn load_into(&mut self, path: &Path) -> Result<()> {
        let (desc, nt) = read(path)?;
        expect_kind(&desc, ModelKind::Mp)?;
        if !desc.same_architecture(&self.descriptor()) {
            return Err(Error::Weights(format!("architecture {desc:?} does not match {:?}", self.descriptor())));
        }
        fill(self.params_mut(), &nt)?;
        self.input_scaler = desc.input_scaler;
        Ok(())
    }
}

/// Reads only the descriptor of a weight container.
pub fn read_descriptor(path: &Path) -> Result<ModelDescriptor> {
    Ok(read(path)?.0)
}
