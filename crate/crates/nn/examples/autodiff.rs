//! Reverse-mode gradients of a small dense network, checked against central
//! finite differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xtal_nn::init::he_uniform;
use xtal_nn::{grad_check, GradCheckConfig, Tape, Tensor};

fn main() -> xtal_nn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = he_uniform(&[3, 4], 3, &mut rng);
    let b = Tensor::zeros(&[4]);
    let x = Tensor::new(vec![2, 3], vec![0.1, -0.4, 0.7, 1.2, 0.3, -0.9])?;
    let target = Tensor::new(vec![2, 4], vec![0.5; 8])?;

    let mut tape = Tape::new();
    let (wv, bv) = (tape.param(w.clone()), tape.param(b.clone()));
    let xv = tape.constant(x.clone());
    let h = tape.dense(xv, wv, bv)?;
    let h = tape.relu(h)?;
    let loss = tape.mse(h, &target)?;
    println!("loss {:.6}", tape.value(loss).item().unwrap());
    let grads = tape.backward(loss)?;
    println!("dL/dW {:?}", grads.get(wv).map(Tensor::data));

    let report = grad_check(
        |tape, p| {
            let xv = tape.constant(x.clone());
            let h = tape.dense(xv, p[0], p[1])?;
            let h = tape.relu(h)?;
            tape.mse(h, &target)
        },
        &[w, b],
        1e-6,
        GradCheckConfig::default(),
    )?;
    println!("grad check: max relative error {:.2e}, passed {}", report.max_rel_error, report.passed);
    Ok(())
}
