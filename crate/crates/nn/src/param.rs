use crate::error::{NnError, Result};
use crate::tape::{Gradients, Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Option<Tensor>,
    pub trainable: bool,
}

/// Ordered, named collection of model weights.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a trainable parameter and returns its position.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        let mut value = value;
        value.requires_grad = false;
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad: None,
            trainable: true,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn get(&self, i: usize) -> &Parameter {
        &self.params[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Parameter {
        &mut self.params[i]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Number of scalar values in parameters whose name satisfies `pred`.
    pub fn count_values(&self, pred: impl Fn(&str) -> bool) -> usize {
        self.params
            .iter()
            .filter(|p| pred(&p.name))
            .map(|p| p.value.len())
            .sum()
    }

    pub fn set_trainable(&mut self, pred: impl Fn(&str) -> bool, trainable: bool) {
        for p in self.params.iter_mut().filter(|p| pred(&p.name)) {
            p.trainable = trainable;
        }
    }

    /// Records every parameter as a leaf on `tape`; trainable ones track
    /// gradients.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                let mut t = p.value.clone();
                t.requires_grad = p.trainable;
                tape.leaf(t)
            })
            .collect()
    }

    /// Adds the gradients of `vars` (as returned by [`ParamSet::bind`]) into
    /// each parameter's gradient slot.
    pub fn accumulate(&mut self, vars: &[Var], grads: &Gradients) -> Result<()> {
        if vars.len() != self.params.len() {
            return Err(NnError::Contract(format!(
                "{} bound vars for {} parameters",
                vars.len(),
                self.params.len()
            )));
        }
        for (p, &v) in self.params.iter_mut().zip(vars) {
            if !p.trainable {
                continue;
            }
            // Unreached parameters get an explicit zero gradient.
            let zero;
            let g = match grads.get(v) {
                Some(g) => g,
                None => {
                    zero = Tensor::zeros(p.value.shape());
                    &zero
                }
            };
            match &mut p.grad {
                Some(acc) => {
                    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
                None => p.grad = Some(g.clone()),
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }
}
