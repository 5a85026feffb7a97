use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xtal_nn::{ParamSet, Tape, Tensor, Var};

use super::resunet::{is_trunk, Dense, Trunk, TrunkConfig};
use super::scaler::InputScaler;
use crate::cpfem::{LoadCase, MaterialParams};
use crate::error::{Error, Result};

pub const MP_INPUTS: usize = 9;

/// Eight material constants followed by the applied strain magnitude.
pub fn mp_inputs(mat: &MaterialParams, load: &LoadCase) -> Vec<f64> {
    let mut v = mat.table().to_vec();
    v.push(load.magnitude);
    v
}

/// DeepONet whose branch maps nine scalars to a full `[T, HD]` block.
#[derive(Clone, Debug)]
pub struct MpDeepOnet {
    config: TrunkConfig,
    seed: u64,
    steps: usize,
    params: ParamSet,
    trunk: Trunk,
    branch: Dense,
    beta: usize,
    pub input_scaler: Option<InputScaler>,
}

impl MpDeepOnet {
    pub fn new(config: TrunkConfig, steps: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if steps == 0 {
            return Err(Error::Argument("MP model needs at least one time step".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let trunk = Trunk::build(&mut params, &config, &mut rng);
        let branch = Dense::build(&mut params, "branch.dense1", MP_INPUTS, steps * config.hidden, &mut rng);
        let beta = params.add("beta", Tensor::scalar(0.0));
        Ok(Self { config, seed, steps, params, trunk, branch, beta, input_scaler: None })
    }

    pub fn config(&self) -> TrunkConfig {
        self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn trunk_param_count(&self) -> usize {
        self.params.count_values(is_trunk)
    }

    pub fn branch_param_count(&self) -> usize {
        self.params.count_values(|n| n.starts_with("branch."))
    }

    /// Applies the fitted input scaler to raw input rows, giving `[N, 9]`.
    pub fn scale_inputs(&self, rows: &[Vec<f64>]) -> Result<Tensor> {
        let scaler = self
            .input_scaler
            .as_ref()
            .ok_or_else(|| Error::Contract("MP input scaler not fitted".into()))?;
        let mut data = Vec::with_capacity(rows.len() * MP_INPUTS);
        for r in rows {
            if r.len() != MP_INPUTS {
                return Err(Error::Dimension(format!("MP model takes {MP_INPUTS} inputs, got {}", r.len())));
            }
            data.extend(scaler.scale(r)?);
        }
        Ok(Tensor::new(vec![rows.len(), MP_INPUTS], data)?)
    }

    /// Full trunk output `[N, H, W, HD]`.
    pub fn trunk_field(&self, tape: &mut Tape, vars: &[Var], grids: Var) -> Result<Var> {
        self.trunk.forward(tape, vars, grids)
    }

    pub fn forward_on(&self, tape: &mut Tape, vars: &[Var], grids: Var, inputs: Var) -> Result<Var> {
        let n = tape.value(grids).shape()[0];
        let s = tape.value(inputs).shape();
        if s != [n, MP_INPUTS] {
            return Err(Error::Dimension(format!("MP inputs must be [{n}, {MP_INPUTS}], got {s:?}")));
        }
        let t = self.trunk.forward(tape, vars, grids)?;
        let f = tape.spatial_mean(t)?;
        let b = self.branch.apply(tape, vars, inputs)?;
        let b = tape.reshape(b, &[n, self.steps, self.config.hidden])?;
        let y = tape.batch_matvec(b, f)?;
        Ok(tape.add_scalar(y, vars[self.beta])?)
    }

    /// Scaled predictions `[N, T]` from grids `[N, H, W, 1]` and scaled
    /// inputs `[N, 9]`.
    pub fn forward(&self, grids: &Tensor, inputs_scaled: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape);
        let g = tape.constant(grids.clone());
        let x = tape.constant(inputs_scaled.clone());
        let y = self.forward_on(&mut tape, &vars, g, x)?;
        Ok(tape.value(y).clone())
    }
}
