//! Fits y = 2x - 1 with minibatch Adam over a seeded shuffle.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xtal_nn::{Adam, AdamConfig, ParamSet, Tape, Tensor};

fn main() -> xtal_nn::Result<()> {
    let xs: Vec<f64> = (0..32).map(|i| i as f64 / 31.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
    let mut params = ParamSet::new();
    params.add("w", Tensor::zeros(&[1, 1]));
    params.add("b", Tensor::zeros(&[1]));
    let mut adam = Adam::new(&params, AdamConfig::with_lr(0.05));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for epoch in 1..=300 {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(8) {
            let mut tape = Tape::new();
            let v = params.bind(&mut tape);
            let x = tape.constant(Tensor::new(vec![batch.len(), 1], batch.iter().map(|&i| xs[i]).collect())?);
            let y = tape.dense(x, v[0], v[1])?;
            let t = Tensor::new(vec![batch.len(), 1], batch.iter().map(|&i| ys[i]).collect())?;
            let loss = tape.mse(y, &t)?;
            total += tape.value(loss).item().unwrap() * batch.len() as f64;
            let g = tape.backward(loss)?;
            params.accumulate(&v, &g)?;
            adam.step(&mut params)?;
        }
        if epoch % 100 == 0 {
            println!("epoch {epoch}: mse {:.3e}", total / xs.len() as f64);
        }
    }
    println!("w {:.4}, b {:.4}", params.get(0).value.data()[0], params.get(1).value.data()[0]);
    Ok(())
}
