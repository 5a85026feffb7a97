use rand::Rng;
use serde::{Deserialize, Serialize};
use xtal_nn::init::he_uniform;
use xtal_nn::{Padding, ParamSet, Tape, Tensor, Var};

use crate::error::{Error, Result};

/// Channel widths of the three encoder levels and the output feature count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrunkConfig {
    pub widths: [usize; 3],
    pub hidden: usize,
}

pub const HIDDEN: usize = 16;

impl TrunkConfig {
    /// Full-size trunk: 24628 parameters.
    pub fn standard() -> Self {
        Self { widths: [9, 16, 27], hidden: HIDDEN }
    }

    /// Small trunk for 16×16 grids: 1864 parameters.
    pub fn desk() -> Self {
        Self { widths: [2, 4, 8], hidden: HIDDEN }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.iter().any(|&w| w == 0) || self.hidden == 0 {
            return Err(Error::Argument(format!("trunk widths {:?} and hidden {} must be positive", self.widths, self.hidden)));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let [a, b, c] = self.widths;
        block_params(1, a)
            + block_params(a, b)
            + block_params(b, c)
            + block_params(c, b)
            + block_params(b, a)
            + a * self.hidden
            + self.hidden
    }
}

fn block_params(cin: usize, cout: usize) -> usize {
    let skip = if cin == cout { 0 } else { cin * cout + cout };
    9 * cin * cout + cout + 9 * cout * cout + cout + skip
}

#[derive(Clone, Copy, Debug)]
struct Conv {
    k: usize,
    b: usize,
}

impl Conv {
    fn build<R: Rng>(params: &mut ParamSet, name: &str, size: usize, cin: usize, cout: usize, rng: &mut R) -> Self {
        let k = params.add(format!("{name}.kernel"), he_uniform(&[size, size, cin, cout], size * size * cin, rng));
        let b = params.add(format!("{name}.bias"), Tensor::zeros(&[cout]));
        Self { k, b }
    }

    fn apply(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        Ok(tape.conv2d(x, vars[self.k], vars[self.b], 1, Padding::Same)?)
    }
}

/// conv3×3 → relu → conv3×3, plus identity or 1×1 projection, then relu.
#[derive(Clone, Copy, Debug)]
struct ResBlock {
    c1: Conv,
    c2: Conv,
    skip: Option<Conv>,
}

impl ResBlock {
    fn build<R: Rng>(params: &mut ParamSet, name: &str, cin: usize, cout: usize, rng: &mut R) -> Self {
        let c1 = Conv::build(params, &format!("{name}.conv1"), 3, cin, cout, rng);
        let c2 = Conv::build(params, &format!("{name}.conv2"), 3, cout, cout, rng);
        let skip = (cin != cout).then(|| Conv::build(params, &format!("{name}.skip"), 1, cin, cout, rng));
        Self { c1, c2, skip }
    }

    fn apply(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let h = self.c1.apply(tape, vars, x)?;
        let h = tape.relu(h)?;
        let h = self.c2.apply(tape, vars, h)?;
        let s = match &self.skip {
            Some(c) => c.apply(tape, vars, x)?,
            None => x,
        };
        let y = tape.add(h, s)?;
        Ok(tape.relu(y)?)
    }
}

/// Residual U-Net mapping `[N, H, W, 1]` grids to `[N, H, W, hidden]`.
#[derive(Clone, Debug)]
pub(crate) struct Trunk {
    enc: [ResBlock; 3],
    dec: [ResBlock; 2],
    head: Conv,
}

impl Trunk {
    pub(crate) fn build<R: Rng>(params: &mut ParamSet, cfg: &TrunkConfig, rng: &mut R) -> Self {
        let [a, b, c] = cfg.widths;
        let enc = [
            ResBlock::build(params, "trunk.enc1", 1, a, rng),
            ResBlock::build(params, "trunk.enc2", a, b, rng),
            ResBlock::build(params, "trunk.enc3", b, c, rng),
        ];
        let dec = [
            ResBlock::build(params, "trunk.dec2", c, b, rng),
            ResBlock::build(params, "trunk.dec1", b, a, rng),
        ];
        let head = Conv::build(params, "trunk.head", 1, a, cfg.hidden, rng);
        Self { enc, dec, head }
    }

    pub(crate) fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let s = tape.value(x).shape();
        if s.len() != 4 || s[3] != 1 || s[1] % 4 != 0 || s[2] % 4 != 0 {
            return Err(Error::Dimension(format!("trunk needs [N, H, W, 1] with H, W divisible by 4, got {s:?}")));
        }
        let e1 = self.enc[0].apply(tape, vars, x)?;
        let p1 = tape.max_pool2(e1)?;
        let e2 = self.enc[1].apply(tape, vars, p1)?;
        let p2 = tape.max_pool2(e2)?;
        let e3 = self.enc[2].apply(tape, vars, p2)?;
        let u2 = tape.upsample_nearest2(e3)?;
        let d2 = self.dec[0].apply(tape, vars, u2)?;
        let d2 = tape.add(d2, e2)?;
        let u1 = tape.upsample_nearest2(d2)?;
        let d1 = self.dec[1].apply(tape, vars, u1)?;
        let d1 = tape.add(d1, e1)?;
        self.head.apply(tape, vars, d1)
    }
}

pub(crate) fn is_trunk(name: &str) -> bool {
    name.starts_with("trunk.")
}

/// Dense layer parameter positions.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Dense {
    w: usize,
    b: usize,
}

impl Dense {
    pub(crate) fn build<R: Rng>(params: &mut ParamSet, name: &str, nin: usize, nout: usize, rng: &mut R) -> Self {
        let w = params.add(format!("{name}.weight"), he_uniform(&[nin, nout], nin, rng));
        let b = params.add(format!("{name}.bias"), Tensor::zeros(&[nout]));
        Self { w, b }
    }

    pub(crate) fn apply(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        Ok(tape.dense(x, vars[self.w], vars[self.b])?)
    }
}
