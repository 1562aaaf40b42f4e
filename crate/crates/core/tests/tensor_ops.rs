use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xlstm_unet::gradcheck::{finite_diff_check, FdOptions};
use xlstm_unet::tensor::kernels;
use xlstm_unet::{Array, Graph, Var};

fn random(shape: &[usize], seed: u64) -> Array<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn arr(shape: &[usize], v: &[f64]) -> Array<f64> {
    Array::new(shape, v.to_vec()).unwrap()
}

/// Direct sliding-window cross-correlation, 2D only.
fn conv2d_oracle(x: &Array<f64>, w: &Array<f64>, b: &Array<f64>, stride: usize, pad: usize) -> Array<f64> {
    let (bn, cin, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (cout, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = Array::zeros(&[bn, cout, oh, ow]);
    for n in 0..bn {
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = b.data()[co];
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    s += x.get(&[n, ci, iy as usize, ix as usize]) * w.get(&[co, ci, ky, kx]);
                                }
                            }
                        }
                    }
                    let idx = ((n * cout + co) * oh + oy) * ow + ox;
                    out.data_mut()[idx] = s;
                }
            }
        }
    }
    out
}

#[test]
fn conv_identity_kernel() {
    let x = random(&[2, 3, 5, 4], 1);
    let mut w = Array::zeros(&[3, 3, 1, 1]);
    for c in 0..3 {
        w.data_mut()[c * 3 + c] = 1.0;
    }
    let (y, _) = kernels::conv_nd(&x, &w, &Array::zeros(&[3]), &[1, 1], &[0, 0]).unwrap();
    assert_eq!(y, x);
}

#[test]
fn conv_all_ones_padded() {
    let x = Array::full(&[1, 1, 3, 3], 1.0);
    let w = Array::full(&[1, 1, 3, 3], 1.0);
    let (y, _) = kernels::conv_nd(&x, &w, &Array::zeros(&[1]), &[1, 1], &[1, 1]).unwrap();
    let oracle = conv2d_oracle(&x, &w, &Array::zeros(&[1]), 1, 1);
    assert_eq!(y.data(), &[4., 6., 4., 6., 9., 6., 4., 6., 4.]);
    assert_eq!(y, oracle);
}

#[test]
fn conv_zero_kernel_gives_bias() {
    let x = random(&[1, 2, 4, 4], 2);
    let w = Array::zeros(&[3, 2, 3, 3]);
    let b = arr(&[3], &[0.5, -1.0, 2.0]);
    let (y, _) = kernels::conv_nd(&x, &w, &b, &[2, 2], &[1, 1]).unwrap();
    assert_eq!(y.shape(), &[1, 3, 2, 2]);
    for c in 0..3 {
        for i in 0..4 {
            assert_eq!(y.data()[c * 4 + i], b.data()[c]);
        }
    }
}

#[test]
fn conv_matches_sliding_window_oracle() {
    for (seed, stride, pad) in [(3, 1, 1), (4, 2, 1), (5, 2, 0)] {
        let x = random(&[2, 3, 7, 6], seed);
        let w = random(&[4, 3, 3, 3], seed + 10);
        let b = random(&[4], seed + 20);
        let (y, _) = kernels::conv_nd(&x, &w, &b, &[stride, stride], &[pad, pad]).unwrap();
        let o = conv2d_oracle(&x, &w, &b, stride, pad);
        assert_eq!(y.shape(), o.shape());
        assert!(y.max_abs_diff(&o) < 1e-12);
    }
}

#[test]
fn conv_rejects_rank_and_empty_output() {
    let x = random(&[1, 1, 2, 2], 0);
    let w = random(&[1, 1, 3, 3], 0);
    assert!(kernels::conv_nd(&x, &w, &Array::zeros(&[1]), &[1, 1], &[0, 0]).is_err());
    let w1 = random(&[1, 1, 3], 0);
    assert!(kernels::conv_nd(&x, &w1, &Array::zeros(&[1]), &[1], &[0]).is_err());
}

#[test]
fn conv_transpose_tiles_blocks() {
    let x = arr(&[1, 1, 2, 2], &[1., 2., 3., 4.]);
    let w = Array::full(&[1, 1, 2, 2], 1.0);
    let (y, _) = kernels::conv_transpose_nd(&x, &w, &Array::zeros(&[1]), &[2, 2], &[0, 0]).unwrap();
    // scatter-add oracle: each input lands on its own 2×2 block
    let mut oracle = Array::zeros(&[1, 1, 4, 4]);
    for i in 0..2 {
        for j in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    oracle.data_mut()[(2 * i + a) * 4 + 2 * j + b] += x.get(&[0, 0, i, j]) * w.get(&[0, 0, a, b]);
                }
            }
        }
    }
    assert_eq!(y, oracle);
    assert_eq!(
        y.data(),
        &[1., 1., 2., 2., 1., 1., 2., 2., 3., 3., 4., 4., 3., 3., 4., 4.]
    );
}

#[test]
fn conv_transpose_zero_input_is_bias() {
    let x = Array::zeros(&[1, 2, 3, 3, 3]);
    let w = random(&[2, 3, 2, 2, 2], 9);
    let b = arr(&[3], &[1., 2., 3.]);
    let (y, _) = kernels::conv_transpose_nd(&x, &w, &b, &[2, 2, 2], &[0, 0, 0]).unwrap();
    assert_eq!(y.shape(), &[1, 3, 6, 6, 6]);
    for c in 0..3 {
        assert!(y.data()[c * 216..(c + 1) * 216].iter().all(|&v| v == b.data()[c]));
    }
}

fn inner(a: &Array<f64>, b: &Array<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conv_adjoint_identity(
        rank in 1usize..=3,
        seed in 0u64..1000,
        k in 1usize..=3,
        stride in 1usize..=2,
        pad in 0usize..=1,
        extra in 0usize..=3,
    ) {
        let size = k + stride * (extra + 2) - 2 * pad;
        let mut xs = vec![2, 3];
        xs.extend(std::iter::repeat_n(size, rank));
        let mut ws = vec![4, 3];
        ws.extend(std::iter::repeat_n(k, rank));
        let x = random(&xs, seed);
        let w = random(&ws, seed + 1);
        let (y, _) = kernels::conv_nd(&x, &w, &Array::zeros(&[4]), &vec![stride; rank], &vec![pad; rank]).unwrap();
        let probe = random(y.shape(), seed + 2);
        let (xt, _) = kernels::conv_transpose_nd(&probe, &w, &Array::zeros(&[3]), &vec![stride; rank], &vec![pad; rank]).unwrap();
        prop_assert_eq!(xt.shape(), x.shape());
        let lhs = inner(&y, &probe);
        let rhs = inner(&x, &xt);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn softmax_sums_to_one_f32(v in proptest::collection::vec(-1000.0f32..1000.0, 2..=16)) {
        let n = v.len();
        let x = Array::new(&[1, n], v).unwrap();
        let y = kernels::softmax(&x, 1).unwrap();
        let s: f32 = y.data().iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-6);
        prop_assert!(y.data().iter().all(|p| p.is_finite() && *p >= 0.0 && *p <= 1.0));
    }

    #[test]
    fn reshape_permute_round_trip_bitwise(seed in 0u64..500, order_seed in 0usize..24) {
        let x = random(&[2, 3, 4, 5], seed).cast::<f32>();
        let mut order: Vec<usize> = (0..4).collect();
        // deterministic permutation from the seed (Lehmer code)
        let mut code = order_seed;
        for i in 0..4 {
            let j = i + code % (4 - i);
            code /= 4 - i;
            order.swap(i, j);
        }
        let g = Graph::<f32>::new();
        let v = g.constant(x.clone());
        let p = g.permute(v, &order).unwrap();
        let mut inv = vec![0; 4];
        for (i, &a) in order.iter().enumerate() { inv[a] = i; }
        let back = g.permute(p, &inv).unwrap();
        prop_assert_eq!(&*g.value(back), &x);
    }
}

#[test]
fn conv_transpose_output_extent() {
    let x = random(&[1, 2, 4, 4], 3);
    let w = random(&[2, 5, 3, 3], 4);
    let (y, _) = kernels::conv_transpose_nd(&x, &w, &Array::zeros(&[5]), &[2, 2], &[1, 1]).unwrap();
    // (in − 1)·stride − 2·pad + kernel
    assert_eq!(y.shape(), &[1, 5, 7, 7]);
}

#[test]
fn instance_norm_examples() {
    let g = Graph::<f64>::new();
    let x = g.constant(arr(&[1, 1, 2], &[1.0, 3.0]));
    let one = g.constant(arr(&[1], &[1.0]));
    let zero = g.constant(arr(&[1], &[0.0]));
    let y = g.instance_norm(x, one, zero, 0.0).unwrap();
    assert_eq!(g.value(y).data(), &[-1.0, 1.0]);

    let c = g.constant(Array::full(&[1, 2, 3, 3], 4.2));
    let gamma = g.constant(arr(&[2], &[2.0, 3.0]));
    let beta = g.constant(arr(&[2], &[0.25, -0.5]));
    let y = g.instance_norm(c, gamma, beta, 1e-5).unwrap();
    let v = g.value(y);
    assert!(v.data()[..9].iter().all(|&a| a == 0.25));
    assert!(v.data()[9..].iter().all(|&a| a == -0.5));
}

#[test]
fn instance_norm_standardizes_random_slices() {
    let g = Graph::<f64>::new();
    let x = g.constant(random(&[2, 3, 4, 5], 7));
    let gamma = g.constant(Array::full(&[3], 1.0));
    let beta = g.constant(Array::zeros(&[3]));
    let y = g.instance_norm(x, gamma, beta, 1e-5).unwrap();
    let v = g.value(y);
    for slice in v.data().chunks(20) {
        let mean: f64 = slice.iter().sum::<f64>() / 20.0;
        let var: f64 = slice.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 20.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-3);
    }
}

#[test]
fn layer_norm_examples() {
    let g = Graph::<f64>::new();
    let one = g.constant(Array::full(&[2], 1.0));
    let zero = g.constant(Array::zeros(&[2]));
    let x = g.constant(arr(&[1, 2], &[0.0, 2.0]));
    let y = g.layer_norm(x, one, zero, 0.0).unwrap();
    assert_eq!(g.value(y).data(), &[-1.0, 1.0]);

    let beta = g.constant(arr(&[2], &[0.3, 0.7]));
    let c = g.constant(Array::full(&[3, 2], 5.0));
    let y = g.layer_norm(c, one, beta, 1e-5).unwrap();
    assert_eq!(g.value(y).data(), &[0.3, 0.7, 0.3, 0.7, 0.3, 0.7]);

    let gamma = g.constant(Array::full(&[4], 1.0));
    let beta = g.constant(Array::zeros(&[4]));
    let base = random(&[3, 4], 11);
    let shifted = base.map(|v| v + 0.75);
    let a = g.layer_norm(g.constant(base), gamma, beta, 0.0).unwrap();
    let b = g.layer_norm(g.constant(shifted), gamma, beta, 0.0).unwrap();
    assert!(g.value(a).max_abs_diff(&g.value(b)) < 1e-12);
}

#[test]
fn softmax_examples() {
    let x = arr(&[2], &[0.0, std::f64::consts::LN_2]);
    let y = kernels::softmax(&x, 0).unwrap();
    assert!((y.data()[0] - 1.0 / 3.0).abs() < 1e-15);
    assert!((y.data()[1] - 2.0 / 3.0).abs() < 1e-15);

    let u = kernels::softmax(&Array::full(&[2, 4, 3], 0.7), 1).unwrap();
    assert!(u.data().iter().all(|&p: &f64| (p - 0.25).abs() < 1e-15));

    let r = random(&[3, 5], 12);
    let a = kernels::softmax(&r, 1).unwrap();
    let b = kernels::softmax(&r.map(|v| v + 3.0), 1).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-14);
}

#[test]
fn reshape_permute_examples() {
    let g = Graph::<f64>::new();
    let x = random(&[1, 2, 2, 2], 13);
    let v = g.constant(x.clone());
    let y = g.reshape_permute(v, &[1, 4, 2], &[0, 2, 3, 1]).unwrap();
    assert_eq!(g.shape(y), vec![1, 4, 2]);

    // explicit (c,h,w,d) → (h·W·D + w·D + d, c) index loop
    let x5 = random(&[1, 3, 2, 2, 2], 14);
    let v5 = g.constant(x5.clone());
    let s = g.reshape_permute(v5, &[1, 8, 3], &[0, 2, 3, 4, 1]).unwrap();
    let sv = g.value(s).clone();
    for c in 0..3 {
        for h in 0..2 {
            for w in 0..2 {
                for d in 0..2 {
                    assert_eq!(sv.get(&[0, h * 4 + w * 2 + d, c]), x5.get(&[0, c, h, w, d]));
                }
            }
        }
    }
    let back = g.reshape_permute(s, &[1, 3, 2, 2, 2], &[0, 2, 1]).unwrap();
    let back = g.value(back).clone();
    // [1,8,3] → permute to [1,3,8] → reshape
    assert_eq!(back, x5);

    let err = g.reshape_permute(v, &[1, 5, 2], &[0, 2, 3, 1]).unwrap_err().to_string();
    assert!(err.contains("[1, 2, 2, 2]") && err.contains("[1, 5, 2]"), "{err}");
}

#[test]
fn kernels_are_deterministic() {
    let x = random(&[3, 4, 9, 9], 15).cast::<f32>();
    let w = random(&[6, 4, 3, 3], 16).cast::<f32>();
    let b = random(&[6], 17).cast::<f32>();
    let (a, _) = kernels::conv_nd(&x, &w, &b, &[1, 1], &[1, 1]).unwrap();
    for _ in 0..3 {
        let (c, _) = kernels::conv_nd(&x, &w, &b, &[1, 1], &[1, 1]).unwrap();
        assert_eq!(a.data(), c.data());
    }
}

type Op = fn(&Graph<f64>, &[Var]) -> xlstm_unet::Result<Var>;

/// Scalar test objective: weighted sum with a fixed random weight so every
/// output element contributes distinctly.
fn weighted_sum(g: &Graph<f64>, y: Var, seed: u64) -> xlstm_unet::Result<Var> {
    let w = g.constant(random(&g.shape(y), seed));
    let p = g.mul(y, w)?;
    g.sum(p)
}

fn check_op(name: &str, op: Op, shapes: &[&[usize]], positive: &[usize]) {
    for seed in [1u64, 2, 3] {
        let inputs: Vec<Array<f64>> = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let a = random(s, seed * 100 + i as u64);
                if positive.contains(&i) {
                    a.map(|v| v.abs() + 0.5)
                } else {
                    a
                }
            })
            .collect();
        let r = finite_diff_check(
            |g, v| {
                let y = op(g, v)?;
                weighted_sum(g, y, 999)
            },
            &inputs,
            &FdOptions::default(),
        )
        .unwrap();
        assert!(r.passed, "{name} seed {seed}: {r:?}");
    }
}

#[test]
fn every_op_passes_finite_differences() {
    check_op("add", |g, v| g.add(v[0], v[1]), &[&[3, 4], &[3, 4]], &[]);
    check_op("add_scalar_tensor", |g, v| g.add(v[0], v[1]), &[&[3, 4], &[1]], &[]);
    check_op("sub", |g, v| g.sub(v[0], v[1]), &[&[5], &[5]], &[]);
    check_op("mul", |g, v| g.mul(v[0], v[1]), &[&[2, 3], &[2, 3]], &[]);
    check_op("mul_scalar_tensor", |g, v| g.mul(v[0], v[1]), &[&[1], &[2, 3]], &[]);
    check_op("sigmoid", |g, v| g.sigmoid(v[0]), &[&[7]], &[]);
    check_op("silu", |g, v| g.silu(v[0]), &[&[7]], &[]);
    check_op("exp", |g, v| g.exp(v[0]), &[&[7]], &[]);
    check_op("leaky_relu", |g, v| g.leaky_relu(v[0], 0.01), &[&[7]], &[]);
    check_op("max_scalar", |g, v| g.max_scalar(v[0], 0.1), &[&[7]], &[]);
    check_op("matmul", |g, v| g.matmul(v[0], v[1]), &[&[3, 4], &[4, 2]], &[]);
    check_op("linear", |g, v| g.linear(v[0], v[1], Some(v[2])), &[&[2, 3, 4], &[4, 5], &[5]], &[]);
    check_op("mul_last", |g, v| g.mul_last(v[0], v[1]), &[&[2, 3, 4], &[4]], &[]);
    check_op("reshape_permute", |g, v| g.reshape_permute(v[0], &[3, 8], &[2, 0, 1]), &[&[2, 4, 3]], &[]);
    check_op("flip", |g, v| g.flip(v[0], 1), &[&[2, 4, 3]], &[]);
    check_op("slice_last", |g, v| g.slice_last(v[0], 1, 2), &[&[2, 4]], &[]);
    check_op("concat", |g, v| g.concat(&[v[0], v[1]], 1), &[&[2, 3, 2], &[2, 1, 2]], &[]);
    check_op(
        "conv_nd_1d",
        |g, v| g.conv_nd(v[0], v[1], v[2], &[2], &[1]),
        &[&[2, 2, 7], &[3, 2, 3], &[3]],
        &[],
    );
    check_op(
        "conv_nd_2d",
        |g, v| g.conv_nd(v[0], v[1], v[2], &[1, 2], &[1, 0]),
        &[&[2, 2, 5, 6], &[3, 2, 3, 2], &[3]],
        &[],
    );
    check_op(
        "conv_nd_3d",
        |g, v| g.conv_nd(v[0], v[1], v[2], &[2, 1, 1], &[1, 1, 0]),
        &[&[1, 2, 4, 3, 3], &[2, 2, 3, 3, 2], &[2]],
        &[],
    );
    check_op(
        "conv_transpose_2d",
        |g, v| g.conv_transpose_nd(v[0], v[1], v[2], &[2, 2], &[0, 0]),
        &[&[2, 3, 3, 2], &[3, 2, 2, 2], &[2]],
        &[],
    );
    check_op(
        "conv_transpose_3d",
        |g, v| g.conv_transpose_nd(v[0], v[1], v[2], &[2, 2, 1], &[1, 0, 0]),
        &[&[1, 2, 3, 2, 2], &[2, 2, 3, 2, 2], &[2]],
        &[],
    );
    check_op(
        "instance_norm",
        |g, v| g.instance_norm(v[0], v[1], v[2], 1e-5),
        &[&[2, 3, 4, 3], &[3], &[3]],
        &[],
    );
    check_op(
        "layer_norm",
        |g, v| g.layer_norm(v[0], v[1], v[2], 1e-5),
        &[&[2, 3, 5], &[5], &[5]],
        &[],
    );
    check_op("softmax", |g, v| g.softmax(v[0], 1), &[&[2, 4, 3]], &[]);
    check_op(
        "causal_conv1d",
        |g, v| g.causal_conv1d(v[0], v[1], v[2]),
        &[&[2, 6, 3], &[3, 4], &[3]],
        &[],
    );
}
