//! Reverse-mode vs central-difference gradient comparison.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NnError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Entries compared per tensor; smaller tensors are checked in full.
    pub samples_per_tensor: usize,
    pub seed: u64,
    /// Gradient magnitude below which the error is measured in absolute
    /// rather than relative terms. It is raised automatically to the
    /// resolution of central differences, `10·ε·|L| / (step·tolerance)`,
    /// below which roundoff in the two loss evaluations dominates.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-6,
            samples_per_tensor: 64,
            seed: 0,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor, entry)` of the worst comparison.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    /// Entries whose perturbation crossed a relu kink.
    pub excluded: usize,
    pub tolerance: f64,
    pub passed: bool,
}

fn evaluate<F>(forward: &F, params: &[Tensor], track: bool) -> Result<(Tape, Vec<Var>, Var)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params
        .iter()
        .map(|p| {
            let mut t = p.clone();
            t.requires_grad = track;
            tape.leaf(t)
        })
        .collect();
    let loss = forward(&mut tape, &vars)?;
    Ok((tape, vars, loss))
}

/// Compares reverse-mode gradients of the scalar produced by `forward`
/// against central differences, on a seeded subsample of each parameter
/// tensor. Entries whose `+step` or `-step` evaluation changes the sign
/// pattern of any relu input straddle a kink and are excluded.
pub fn grad_check<F>(
    forward: F,
    params: &[Tensor],
    tolerance: f64,
    config: GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let (mut tape, vars, loss) = evaluate(&forward, params, true)?;
    let base_loss = tape.value(loss).item().unwrap_or(0.0);
    let floor = config
        .floor
        .max(10.0 * f64::EPSILON * base_loss.abs() / (config.step * tolerance));
    let base_sig = tape.relu_signature();
    let grads = tape.backward(loss)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut work: Vec<Tensor> = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        excluded: 0,
        tolerance,
        passed: true,
    };

    let loss_at = |work: &[Tensor]| -> Result<(f64, Vec<bool>)> {
        let (tape, _, l) = evaluate(&forward, work, false)?;
        let v = tape
            .value(l)
            .item()
            .ok_or_else(|| NnError::Contract("grad_check forward must return a scalar".into()))?;
        Ok((v, tape.relu_signature()))
    };

    for (ti, p) in params.iter().enumerate() {
        let analytic = match grads.get(vars[ti]) {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; p.len()],
        };
        let entries: Vec<usize> = if p.len() <= config.samples_per_tensor {
            (0..p.len()).collect()
        } else {
            let mut e = sample(&mut rng, p.len(), config.samples_per_tensor).into_vec();
            e.sort_unstable();
            e
        };
        for e in entries {
            let orig = work[ti].data()[e];
            work[ti].data_mut()[e] = orig + config.step;
            let (fp, sp) = loss_at(&work)?;
            work[ti].data_mut()[e] = orig - config.step;
            let (fm, sm) = loss_at(&work)?;
            work[ti].data_mut()[e] = orig;
            if sp != base_sig || sm != base_sig {
                report.excluded += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * config.step);
            let a = analytic[e];
            let denom = a.abs().max(numeric.abs()).max(floor);
            let rel = (a - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((ti, e));
            }
        }
    }
    report.passed = report.max_rel_error < tolerance;
    Ok(report)
}
