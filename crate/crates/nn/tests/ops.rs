use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xtal_nn::{NnError, Padding, Tape, Tensor};

fn t(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    t(shape, &(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>())
}

/// Direct nested-loop cross-correlation, NHWC / KKIO, same or valid padding.
fn conv_oracle(x: &Tensor, k: &Tensor, b: &[f64], stride: usize, pad: usize) -> Vec<f64> {
    let (n, h, w, cin) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (kk, cout) = (k.shape()[0], k.shape()[3]);
    let oh = (h + 2 * pad - kk) / stride + 1;
    let ow = (w + 2 * pad - kk) / stride + 1;
    let mut out = vec![0.0; n * oh * ow * cout];
    for ni in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for co in 0..cout {
                    let mut s = b[co];
                    for ky in 0..kk {
                        for kx in 0..kk {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                let xv = x.data()[((ni * h + iy as usize) * w + ix as usize) * cin + ci];
                                let kv = k.data()[((ky * kk + kx) * cin + ci) * cout + co];
                                s += xv * kv;
                            }
                        }
                    }
                    out[((ni * oh + oy) * ow + ox) * cout + co] = s;
                }
            }
        }
    }
    out
}

#[test]
fn dense_identity() {
    let mut tape = Tape::new();
    let x = tape.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
    let w = tape.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
    let b = tape.constant(Tensor::zeros(&[2]));
    let y = tape.dense(x, w, b).unwrap();
    assert_eq!(tape.value(y).data(), &[1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn dense_shape_mismatch() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(&[2, 3]));
    let w = tape.constant(Tensor::zeros(&[2, 2]));
    let b = tape.constant(Tensor::zeros(&[2]));
    assert!(matches!(tape.dense(x, w, b), Err(NnError::Dimension(_))));
}

#[test]
fn conv_identity_kernel_same_padding() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random(&[2, 5, 6, 1], &mut rng);
    let mut k = vec![0.0; 9];
    k[4] = 1.0;
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let kv = tape.constant(t(&[3, 3, 1, 1], &k));
    let bv = tape.constant(Tensor::zeros(&[1]));
    let y = tape.conv2d(xv, kv, bv, 1, Padding::Same).unwrap();
    assert_eq!(tape.value(y), &x);
}

#[test]
fn conv_constant_field_interior() {
    let c = 2.5;
    let mut tape = Tape::new();
    let xv = tape.constant(Tensor::full(&[1, 5, 5, 1], c));
    let kv = tape.constant(Tensor::full(&[3, 3, 1, 1], 1.0));
    let bv = tape.constant(Tensor::zeros(&[1]));
    let y = tape.conv2d(xv, kv, bv, 1, Padding::Same).unwrap();
    assert_eq!(tape.value(y).data()[2 * 5 + 2], 9.0 * c);
    // corner only sees 4 cells
    assert_eq!(tape.value(y).data()[0], 4.0 * c);
}

#[test]
fn conv_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (stride, padding, pad) in [(1, Padding::Same, 1), (1, Padding::Valid, 0), (2, Padding::Same, 1)] {
        let x = random(&[2, 6, 7, 3], &mut rng);
        let k = random(&[3, 3, 3, 4], &mut rng);
        let b = random(&[4], &mut rng);
        let mut tape = Tape::new();
        let (xv, kv, bv) = (tape.constant(x.clone()), tape.constant(k.clone()), tape.constant(b.clone()));
        let y = tape.conv2d(xv, kv, bv, stride, padding).unwrap();
        let want = conv_oracle(&x, &k, b.data(), stride, pad);
        assert_eq!(tape.value(y).data(), &want[..]);
    }
}

#[test]
fn conv_channel_mismatch() {
    let mut tape = Tape::new();
    let xv = tape.constant(Tensor::zeros(&[1, 4, 4, 2]));
    let kv = tape.constant(Tensor::zeros(&[3, 3, 3, 1]));
    let bv = tape.constant(Tensor::zeros(&[1]));
    assert!(matches!(tape.conv2d(xv, kv, bv, 1, Padding::Same), Err(NnError::Dimension(_))));
}

#[test]
fn relu_pool_upsample() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::from_vec(vec![-1.0, 0.0, 2.0]));
    let r = tape.relu(a).unwrap();
    assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);

    let blk = tape.constant(t(&[1, 2, 2, 1], &[1.0, 2.0, 3.0, 4.0]));
    let p = tape.max_pool2(blk).unwrap();
    assert_eq!(tape.value(p).data(), &[4.0]);
    assert_eq!(tape.value(p).shape(), &[1, 1, 1, 1]);

    let five = tape.constant(t(&[1, 1, 1, 1], &[5.0]));
    let u = tape.upsample_nearest2(five).unwrap();
    assert_eq!(tape.value(u).data(), &[5.0; 4]);
    assert_eq!(tape.value(u).shape(), &[1, 2, 2, 1]);

    let odd = tape.constant(Tensor::zeros(&[1, 3, 2, 1]));
    assert!(matches!(tape.max_pool2(odd), Err(NnError::Dimension(_))));
}

#[test]
fn backward_of_sum_is_ones() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::full(&[2, 3, 2], 0.7));
    let s = tape.sum(x).unwrap();
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[1.0; 12]);
}

#[test]
fn backward_of_sum_of_squares() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::from_vec(vec![1.0, 2.0]));
    let sq = tape.mul(x, x).unwrap();
    let s = tape.sum(sq).unwrap();
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[2.0, 4.0]);
}

#[test]
fn backward_requires_scalar_and_single_use() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::from_vec(vec![1.0, 2.0]));
    assert!(matches!(tape.backward(x), Err(NnError::Contract(_))));
    let s = tape.sum(x).unwrap();
    tape.backward(s).unwrap();
    assert!(matches!(tape.backward(s), Err(NnError::Contract(_))));
    assert!(tape.relu(x).is_err());
}

/// dense -> relu -> dense -> MSE loss as a function of the flat parameters.
fn mlp_loss(tape: &mut Tape, p: &[xtal_nn::Var], x: &Tensor, y: &Tensor) -> xtal_nn::Result<xtal_nn::Var> {
    let xv = tape.constant(x.clone());
    let h = tape.dense(xv, p[0], p[1])?;
    let h = tape.relu(h)?;
    let o = tape.dense(h, p[2], p[3])?;
    tape.mse(o, y)
}

#[test]
fn composite_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(&[4, 3], &mut rng);
    let y = random(&[4, 2], &mut rng);
    let params = vec![
        random(&[3, 5], &mut rng),
        random(&[5], &mut rng),
        random(&[5, 2], &mut rng),
        random(&[2], &mut rng),
    ];
    let mut tape = Tape::new();
    let vars: Vec<_> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = mlp_loss(&mut tape, &vars, &x, &y).unwrap();
    let sig = tape.relu_signature();
    let grads = tape.backward(loss).unwrap();

    // Independent finite-difference oracle, step 1e-6.
    let f = |ps: &[Tensor]| -> (f64, Vec<bool>) {
        let mut tp = Tape::new();
        let v: Vec<_> = ps.iter().map(|p| tp.constant(p.clone())).collect();
        let l = mlp_loss(&mut tp, &v, &x, &y).unwrap();
        (tp.value(l).item().unwrap(), tp.relu_signature())
    };
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (ti, p) in params.iter().enumerate() {
        for e in 0..p.len() {
            let mut plus = params.clone();
            plus[ti].data_mut()[e] += h;
            let mut minus = params.clone();
            minus[ti].data_mut()[e] -= h;
            let ((fp, sp), (fm, sm)) = (f(&plus), f(&minus));
            if sp != sig || sm != sig {
                continue;
            }
            let fd = (fp - fm) / (2.0 * h);
            let ad = grads.get(vars[ti]).unwrap().data()[e];
            worst = worst.max((ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-6));
        }
    }
    assert!(worst < 1e-6, "worst relative error {worst}");
}

#[test]
fn forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random(&[2, 8, 8, 2], &mut rng);
    let k = random(&[3, 3, 2, 3], &mut rng);
    let run = || {
        let mut tape = Tape::new();
        let (xv, kv) = (tape.constant(x.clone()), tape.constant(k.clone()));
        let bv = tape.constant(Tensor::zeros(&[3]));
        let y = tape.conv2d(xv, kv, bv, 1, Padding::Same).unwrap();
        let y = tape.relu(y).unwrap();
        let y = tape.max_pool2(y).unwrap();
        let y = tape.upsample_nearest2(y).unwrap();
        let y = tape.spatial_mean(y).unwrap();
        tape.value(y).clone()
    };
    let (a, b) = (run(), run());
    assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn pool_and_upsample_gradients() {
    let mut tape = Tape::new();
    let x = tape.param(t(&[1, 2, 2, 1], &[1.0, 5.0, 3.0, 4.0]));
    let p = tape.max_pool2(x).unwrap();
    let u = tape.upsample_nearest2(p).unwrap();
    let s = tape.sum(u).unwrap();
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[0.0, 4.0, 0.0, 0.0]);
}

#[test]
fn batch_matvec_matches_loops_and_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random(&[3, 4, 2], &mut rng);
    let x = random(&[3, 2], &mut rng);
    let mut tape = Tape::new();
    let av = tape.constant(a.clone());
    let xv = tape.constant(x.clone());
    let y = tape.batch_matvec(av, xv).unwrap();
    for n in 0..3 {
        for ti in 0..4 {
            let want: f64 = (0..2).map(|k| a.data()[(n * 4 + ti) * 2 + k] * x.data()[n * 2 + k]).sum();
            assert!((tape.value(y).data()[n * 4 + ti] - want).abs() < 1e-15);
        }
    }
    let bad = tape.constant(Tensor::zeros(&[2, 2]));
    assert!(matches!(tape.batch_matvec(av, bad), Err(NnError::Dimension(_))));
    let report = xtal_nn::grad_check(
        |tape, p| {
            let y = tape.batch_matvec(p[0], p[1])?;
            let y = tape.mul(y, y)?;
            tape.sum(y)
        },
        &[a, x],
        1e-6,
        Default::default(),
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
}

proptest! {
    #[test]
    fn identity_kernel_is_identity(h in 1usize..7, w in 1usize..7, c in 1usize..3, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&[1, h, w, c], &mut rng);
        let mut k = vec![0.0; 9 * c * c];
        for ci in 0..c {
            k[(4 * c + ci) * c + ci] = 1.0;
        }
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let kv = tape.constant(t(&[3, 3, c, c], &k));
        let bv = tape.constant(Tensor::zeros(&[c]));
        let y = tape.conv2d(xv, kv, bv, 1, Padding::Same).unwrap();
        prop_assert_eq!(tape.value(y), &x);
    }

    #[test]
    fn conv_gradient_matches_finite_differences(seed in 0u64..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&[1, 4, 4, 2], &mut rng);
        let params = vec![random(&[3, 3, 2, 2], &mut rng), random(&[2], &mut rng)];
        let report = xtal_nn::grad_check(
            |tape, p| {
                let xv = tape.constant(x.clone());
                let y = tape.conv2d(xv, p[0], p[1], 1, Padding::Same)?;
                let y = tape.mul(y, y)?;
                let y = tape.spatial_mean(y)?;
                tape.sum(y)
            },
            &params,
            1e-5,
            Default::default(),
        ).unwrap();
        prop_assert!(report.passed, "{:?}", report);
    }
}
