use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xtal_nn::{ParamSet, Tape, Tensor, Var};

use super::resunet::{is_trunk, Dense, Trunk, TrunkConfig};
use crate::basis::N_BASIS;
use crate::error::{Error, Result};

/// Branch widths applied to each time step's 36 basis stresses.
pub const SC_BRANCH: [usize; 3] = [72, 36, 16];

/// DeepONet whose branch sees the scaled single-crystal basis at each step.
#[derive(Clone, Debug)]
pub struct ScDeepOnet {
    config: TrunkConfig,
    seed: u64,
    params: ParamSet,
    trunk: Trunk,
    branch: [Dense; 3],
    beta: usize,
}

impl ScDeepOnet {
    pub fn new(config: TrunkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.hidden != SC_BRANCH[2] {
            return Err(Error::Argument(format!("SC branch emits {} features, trunk {}", SC_BRANCH[2], config.hidden)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let trunk = Trunk::build(&mut params, &config, &mut rng);
        let branch = [
            Dense::build(&mut params, "branch.dense1", N_BASIS, SC_BRANCH[0], &mut rng),
            Dense::build(&mut params, "branch.dense2", SC_BRANCH[0], SC_BRANCH[1], &mut rng),
            Dense::build(&mut params, "branch.dense3", SC_BRANCH[1], SC_BRANCH[2], &mut rng),
        ];
        let beta = params.add("beta", Tensor::scalar(0.0));
        Ok(Self { config, seed, params, trunk, branch, beta })
    }

    pub fn config(&self) -> TrunkConfig {
        self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
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

    pub fn beta(&self) -> f64 {
        self.params.get(self.beta).value.data()[0]
    }

    /// Full trunk output `[N, H, W, HD]`.
    pub fn trunk_field(&self, tape: &mut Tape, vars: &[Var], grids: Var) -> Result<Var> {
        self.trunk.forward(tape, vars, grids)
    }

    /// Spatially averaged trunk output `[N, HD]`.
    pub fn features(&self, tape: &mut Tape, vars: &[Var], grids: Var) -> Result<Var> {
        let t = self.trunk.forward(tape, vars, grids)?;
        Ok(tape.spatial_mean(t)?)
    }

    /// Branch output `[T, HD]`, one row per time step.
    pub fn branch(&self, tape: &mut Tape, vars: &[Var], basis: Var) -> Result<Var> {
        let s = tape.value(basis).shape();
        if s.len() != 2 || s[1] != N_BASIS {
            return Err(Error::Dimension(format!("branch input must be [T, {N_BASIS}], got {s:?}")));
        }
        let h = self.branch[0].apply(tape, vars, basis)?;
        let h = tape.relu(h)?;
        let h = self.branch[1].apply(tape, vars, h)?;
        let h = tape.relu(h)?;
        self.branch[2].apply(tape, vars, h)
    }

    /// σ̂[n, t] = Σ_k features[n, k] · branch[t, k] + β.
    pub fn readout(&self, tape: &mut Tape, vars: &[Var], features: Var, branch: Var) -> Result<Var> {
        let bt = tape.transpose(branch)?;
        let y = tape.matmul(features, bt)?;
        Ok(tape.add_scalar(y, vars[self.beta])?)
    }

    pub fn forward_on(&self, tape: &mut Tape, vars: &[Var], grids: Var, basis: Var) -> Result<Var> {
        let f = self.features(tape, vars, grids)?;
        let b = self.branch(tape, vars, basis)?;
        self.readout(tape, vars, f, b)
    }

    /// Scaled predictions `[N, T]` for grids `[N, H, W, 1]` and a scaled
    /// basis `[T, 36]`.
    pub fn forward(&self, grids: &Tensor, basis_scaled: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape);
        let g = tape.constant(grids.clone());
        let b = tape.constant(basis_scaled.clone());
        let y = self.forward_on(&mut tape, &vars, g, b)?;
        Ok(tape.value(y).clone())
    }
}
