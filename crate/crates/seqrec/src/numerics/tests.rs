use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Independent triple-loop product used as the matmul oracle.
fn matmul_oracle(a: &Tensor, b: &Tensor) -> Vec<f64> {
    let (m, k, p) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        for j in 0..p {
            for t in 0..k {
                out[i * p + j] += a.at(i, t) * b.at(t, j);
            }
        }
    }
    out
}

#[test]
fn matmul_identity() {
    let mut tape = Tape::new();
    let a = tape.input(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let eye = tape.input(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let out = tape.matmul(a, eye).unwrap();
    assert_eq!(tape.value(out).data(), &[1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn matmul_matches_triple_loop_oracle() {
    let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = Tensor::matrix(2, 1, vec![5.0, 6.0]).unwrap();
    assert_eq!(matmul_oracle(&a, &b), vec![17.0, 39.0]);

    let mut tape = Tape::new();
    let av = tape.input(a);
    let bv = tape.input(b);
    let out = tape.matmul(av, bv).unwrap();
    assert_eq!(tape.value(out).data(), &[17.0, 39.0]);

    let mut r = rng(11);
    for _ in 0..20 {
        let a = rand_tensor(&[3, 4], &mut r);
        let b = rand_tensor(&[4, 5], &mut r);
        let oracle = matmul_oracle(&a, &b);
        let mut tape = Tape::new();
        let av = tape.input(a);
        let bv = tape.input(b);
        let out = tape.matmul(av, bv).unwrap();
        for (x, y) in tape.value(out).data().iter().zip(&oracle) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }
}

#[test]
fn matmul_zero_matrix() {
    let mut tape = Tape::new();
    let a = tape.input(Tensor::matrix(2, 3, vec![1.0; 6]).unwrap());
    let z = tape.input(Tensor::zeros(vec![3, 2]));
    let out = tape.matmul(a, z).unwrap();
    assert!(tape.value(out).data().iter().all(|&v| v == 0.0));
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let mut tape = Tape::new();
    let a = tape.input(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
    let b = tape.input(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
    let err = tape.matmul(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "got: {msg}");
}

#[test]
fn softmax_symmetry_and_closed_form() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::vector(vec![0.0, 0.0]));
    let y = tape.softmax(x, 0).unwrap();
    assert_eq!(tape.value(y).data(), &[0.5, 0.5]);

    let x = tape.input(Tensor::vector(vec![2.0f64.ln(), 0.0]));
    let y = tape.softmax(x, 0).unwrap();
    assert_abs_diff_eq!(tape.value(y).data()[0], 2.0 / 3.0, epsilon = 1e-15);
    assert_abs_diff_eq!(tape.value(y).data()[1], 1.0 / 3.0, epsilon = 1e-15);
}

#[test]
fn softmax_column_axis() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::matrix(2, 2, vec![0.0, 5.0, 0.0, 5.0]).unwrap());
    let y = tape.softmax(x, 0).unwrap();
    assert_eq!(tape.value(y).data(), &[0.5, 0.5, 0.5, 0.5]);
    let bad = tape.softmax(x, 2);
    assert!(bad.is_err());
}

#[test]
fn layer_norm_examples() {
    let mut tape = Tape::new();
    let gain = tape.input(Tensor::vector(vec![1.0; 3]));
    let shift = tape.input(Tensor::vector(vec![0.0; 3]));

    // Constant input: zero variance, epsilon keeps it finite and near zero.
    let x = tape.input(Tensor::vector(vec![4.0; 3]));
    let y = tape.layer_norm(x, gain, shift, 1e-12);
    for &v in tape.value(y).data() {
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
    }

    // [1,-1] already has mean 0 and unit variance.
    let gain2 = tape.input(Tensor::vector(vec![1.0; 2]));
    let shift2 = tape.input(Tensor::vector(vec![0.0; 2]));
    let x = tape.input(Tensor::vector(vec![1.0, -1.0]));
    let y = tape.layer_norm(x, gain2, shift2, 1e-15);
    assert_abs_diff_eq!(tape.value(y).data()[0], 1.0, epsilon = 1e-7);
    assert_abs_diff_eq!(tape.value(y).data()[1], -1.0, epsilon = 1e-7);

    // Zero gain: output equals the shift everywhere.
    let gain0 = tape.input(Tensor::vector(vec![0.0; 3]));
    let shift3 = tape.input(Tensor::vector(vec![0.7; 3]));
    let x = tape.input(Tensor::vector(vec![3.0, -1.0, 9.0]));
    let y = tape.layer_norm(x, gain0, shift3, 1e-12);
    assert_eq!(tape.value(y).data(), &[0.7, 0.7, 0.7]);
}

#[test]
fn gelu_point_values() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::vector(vec![0.0, 10.0, -10.0]));
    let y = tape.gelu(x);
    let out = tape.value(y).data();
    assert_eq!(out[0], 0.0);
    assert_abs_diff_eq!(out[1], 10.0, epsilon = 1e-6);
    assert_abs_diff_eq!(out[2], 0.0, epsilon = 1e-6);
}

#[test]
fn backward_product_rule() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::scalar(2.0).with_grad());
    let y = tape.input(Tensor::scalar(3.0).with_grad());
    let f = tape.mul(x, y);
    let grads = tape.backward(f).unwrap();
    assert_eq!(grads.get(x).unwrap().item(), 3.0);
    assert_eq!(grads.get(y).unwrap().item(), 2.0);
}

#[test]
fn backward_sum_is_all_ones() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::vector(vec![1.0, -2.0, 5.0]).with_grad());
    let f = tape.sum(x);
    let grads = tape.backward(f).unwrap();
    assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
}

#[test]
fn backward_softmax_nll_equals_p_minus_onehot() {
    let mut r = rng(3);
    for _ in 0..10 {
        let x = rand_tensor(&[1, 6], &mut r).with_grad();
        let label = r.random_range(0..6);

        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let lsm = tape.log_softmax(xv, 1).unwrap();
        let picked = tape.pick_elements(lsm, &[(0, label)]);
        let s = tape.sum(picked);
        let loss = tape.scale(s, -1.0);
        let grads = tape.backward(loss).unwrap();
        let dx = grads.get(xv).unwrap();

        // Analytic oracle: softmax probabilities minus the one-hot label.
        let max = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = x.data().iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for j in 0..6 {
            let expected = exps[j] / z - if j == label { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(dx.data()[j], expected, epsilon = 1e-12);
        }
    }
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::vector(vec![1.0, 2.0]).with_grad());
    let y = tape.scale(x, 2.0);
    let err = tape.backward(y).unwrap_err();
    assert!(matches!(err, NumericsError::NonScalarLoss { .. }));
}

#[test]
fn backward_dag_fanout_matches_unrolled_tree() {
    let x = Tensor::vector(vec![0.3, -0.8, 1.4]).with_grad();

    // Shared subexpression: z = gelu(x) consumed twice.
    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let z = tape.gelu(xv);
    let prod = tape.mul(z, z);
    let loss = tape.sum(prod);
    let shared = tape.backward(loss).unwrap();

    // Unrolled: two structurally separate gelu nodes.
    let mut tape = Tape::new();
    let xv2 = tape.input(x);
    let z1 = tape.gelu(xv2);
    let z2 = tape.gelu(xv2);
    let prod = tape.mul(z1, z2);
    let loss = tape.sum(prod);
    let unrolled = tape.backward(loss).unwrap();

    for (a, b) in shared
        .get(xv)
        .unwrap()
        .data()
        .iter()
        .zip(unrolled.get(xv2).unwrap().data())
    {
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
    }
}

#[test]
fn grad_check_sum_of_squares() {
    let mut r = rng(17);
    let x = rand_tensor(&[8], &mut r);
    let err = grad_check(
        |tape, x| {
            let sq = tape.mul(x, x);
            Ok(tape.sum(sq))
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "err = {err}");
}

#[test]
fn grad_check_flags_corrupted_backward_rule() {
    let mut r = rng(29);
    let x = rand_tensor(&[6], &mut r);
    // True gradient of sum(x^2) is 2x; corrupt it by doubling.
    let corrupted = Tensor::new(
        x.shape().to_vec(),
        x.data().iter().map(|v| 4.0 * v).collect(),
    )
    .unwrap();
    let f = |p: &Tensor| -> Result<f64, NumericsError> {
        Ok(p.data().iter().map(|v| v * v).sum())
    };
    let err = grad_check_against(f, &corrupted, &x, 1e-5).unwrap();
    assert!(err > 0.1, "err = {err}");
}

#[test]
fn grad_check_constant_function_is_zero() {
    let x = Tensor::vector(vec![1.0, 2.0, 3.0]);
    let err = grad_check(
        |tape, _x| {
            let c = tape.constant(Tensor::scalar(5.0));
            Ok(tape.scale(c, 1.0))
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert_eq!(err, 0.0);
}

/// Every primitive the model uses, gradient-checked on 10 random seeds.
#[test]
fn grad_check_every_primitive_ten_seeds() {
    type Builder = fn(&mut Tape, VarId) -> Result<VarId, NumericsError>;
    let cases: Vec<(&str, Vec<usize>, Builder)> = vec![
        ("matmul_lhs", vec![3, 4], |t, x| {
            let c = t.constant(Tensor::full(vec![4, 2], 0.7));
            let y = t.matmul(x, c)?;
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("matmul_rhs", vec![4, 2], |t, x| {
            let c = t.constant(Tensor::full(vec![3, 4], -0.4));
            let y = t.matmul(c, x)?;
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("matmul_nt_lhs", vec![3, 4], |t, x| {
            let c = t.constant(Tensor::full(vec![2, 4], 0.9));
            let y = t.matmul_nt(x, c)?;
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("matmul_nt_rhs", vec![2, 4], |t, x| {
            let c = t.constant(Tensor::full(vec![3, 4], 0.6));
            let y = t.matmul_nt(c, x)?;
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("add", vec![3, 3], |t, x| {
            let c = t.constant(Tensor::full(vec![3, 3], 0.2));
            let y = t.add(x, c);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("mul_fanout", vec![5], |t, x| {
            let y = t.mul(x, x);
            Ok(t.sum(y))
        }),
        ("scale", vec![4], |t, x| {
            let y = t.scale(x, -2.5);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("add_row_broadcast_matrix", vec![3, 4], |t, x| {
            let row = t.constant(Tensor::vector(vec![0.1, -0.2, 0.3, 0.4]));
            let y = t.add_row_broadcast(x, row);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("add_row_broadcast_row", vec![4], |t, x| {
            let m = t.constant(Tensor::full(vec![3, 4], 0.5));
            let y = t.add_row_broadcast(m, x);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("softmax_rows", vec![3, 5], |t, x| {
            let shape = t.value(x).shape().to_vec();
            let len = t.value(x).len();
            let w = t.constant(
                Tensor::new(shape, (0..len).map(|i| (i as f64 * 0.77).sin()).collect()).unwrap(),
            );
            let y = t.softmax(x, 1)?;
            let m = t.mul(y, w);
            Ok(t.sum(m))
        }),
        ("softmax_cols", vec![3, 5], |t, x| {
            let shape = t.value(x).shape().to_vec();
            let len = t.value(x).len();
            let w = t.constant(
                Tensor::new(shape, (0..len).map(|i| (i as f64 * 0.37).cos()).collect()).unwrap(),
            );
            let y = t.softmax(x, 0)?;
            let m = t.mul(y, w);
            Ok(t.sum(m))
        }),
        ("log_softmax", vec![2, 6], |t, x| {
            let y = t.log_softmax(x, 1)?;
            let picked = t.pick_elements(y, &[(0, 2), (1, 4)]);
            let s = t.sum(picked);
            Ok(t.scale(s, -0.5))
        }),
        ("layer_norm_x", vec![3, 6], |t, x| {
            let g = t.constant(Tensor::vector(vec![1.1, 0.9, 1.0, 1.2, 0.8, 1.0]));
            let b = t.constant(Tensor::vector(vec![0.0, 0.1, -0.1, 0.2, 0.0, 0.3]));
            let y = t.layer_norm(x, g, b, 1e-12);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("layer_norm_gain", vec![6], |t, x| {
            let m = t.constant(
                Tensor::new(vec![2, 6], (0..12).map(|i| (i as f64 * 0.43).sin()).collect())
                    .unwrap(),
            );
            let b = t.constant(Tensor::zeros(vec![6]));
            let y = t.layer_norm(m, x, b, 1e-12);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("layer_norm_shift", vec![6], |t, x| {
            let m = t.constant(
                Tensor::new(vec![2, 6], (0..12).map(|i| (i as f64 * 0.61).cos()).collect())
                    .unwrap(),
            );
            let g = t.constant(Tensor::full(vec![6], 1.0));
            let y = t.layer_norm(m, g, x, 1e-12);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("gelu", vec![7], |t, x| {
            let y = t.gelu(x);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("softplus", vec![7], |t, x| {
            let y = t.softplus(x);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("slice_cols", vec![3, 5], |t, x| {
            let y = t.slice_cols(x, 1, 3);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("slice_rows", vec![4, 3], |t, x| {
            let y = t.slice_rows(x, 1, 2);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("gather_rows", vec![5, 3], |t, x| {
            let y = t.gather_rows(x, &[0, 2, 2, 4])?;
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("pick_elements", vec![3, 4], |t, x| {
            let y = t.pick_elements(x, &[(0, 1), (2, 3), (1, 0)]);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
        ("dropout", vec![4, 4], |t, x| {
            let mut r = ChaCha8Rng::seed_from_u64(99);
            let y = t.dropout(x, 0.4, &mut r);
            let sq = t.mul(y, y);
            Ok(t.sum(sq))
        }),
    ];

    for (name, shape, builder) in &cases {
        for seed in 0..10u64 {
            let mut r = rng(1000 + seed);
            let x = rand_tensor(shape, &mut r);
            let err = grad_check(builder, &x, 1e-5).unwrap();
            assert!(err < 1e-4, "{name} seed {seed}: err = {err}");
        }
    }
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..5, cols in 1usize..8, seed in 0u64..500) {
        let mut r = rng(seed);
        let x = rand_tensor(&[rows, cols], &mut r);
        let mut tape = Tape::new();
        let xv = tape.input(x);
        let y = tape.softmax(xv, 1).unwrap();
        for i in 0..rows {
            let s: f64 = tape.value(y).row(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariance(c in -50.0f64..50.0, seed in 0u64..500) {
        let mut r = rng(seed);
        let x = rand_tensor(&[6], &mut r);
        let shifted = Tensor::vector(x.data().iter().map(|v| v + c).collect());
        let mut tape = Tape::new();
        let a = tape.input(x);
        let b = tape.input(shifted);
        let ya = tape.softmax(a, 0).unwrap();
        let yb = tape.softmax(b, 0).unwrap();
        for (u, v) in tape.value(ya).data().iter().zip(tape.value(yb).data()) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_centers_rows(rows in 1usize..4, cols in 2usize..8, seed in 0u64..500) {
        let mut r = rng(seed);
        let x = rand_tensor(&[rows, cols], &mut r);
        let mut tape = Tape::new();
        let xv = tape.input(x);
        let g = tape.input(Tensor::full(vec![cols], 1.0));
        let s = tape.input(Tensor::zeros(vec![cols]));
        let y = tape.layer_norm(xv, g, s, 1e-12);
        for i in 0..rows {
            let mean: f64 = tape.value(y).row(i).iter().sum::<f64>() / cols as f64;
            prop_assert!(mean.abs() < 1e-8);
        }
    }
}
