use ndarray::array;
use proptest::prelude::*;
use rand::Rng as _;

use super::*;
use crate::error::{Error, Result};
use crate::rng;

fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor {
    Tensor::from_vec(rows, cols, v.to_vec()).unwrap()
}

fn random_tensor(rng: &mut rng::Rng, rows: usize, cols: usize) -> Tensor {
    let v = (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect();
    Tensor::from_vec(rows, cols, v).unwrap()
}

#[test]
fn activation_values() {
    let g = Graph::new();
    let zero = g.leaf(&Tensor::scalar(0.0));
    assert_eq!(zero.sigmoid().item().unwrap(), 0.5);
    assert_eq!(zero.tanh().item().unwrap(), 0.0);
    let v = g.leaf(&t(1, 2, &[3.0, 4.0]));
    assert_eq!(v.norm_rows().item().unwrap(), 5.0);
    let x = g.leaf(&t(1, 3, &[-2.0, 0.0, 3.0]));
    assert_eq!(x.leaky_relu(0.1).value().as_slice().unwrap(), &[-0.2, 0.0, 3.0]);
    assert_eq!(x.relu().value().as_slice().unwrap(), &[0.0, 0.0, 3.0]);
}

#[test]
fn sigmoid_derivative_at_zero() {
    let g = Graph::new();
    let x = g.leaf(&Tensor::scalar(0.0));
    let y = x.sigmoid();
    let dx = g.grad_values(y, &[x]).unwrap();
    assert_eq!(dx[0].item().unwrap(), 0.25);
}

#[test]
fn second_derivative_of_cube() {
    let g = Graph::new();
    let x = g.leaf(&Tensor::scalar(2.0));
    let cube = x.square().mul(&x).unwrap();
    let dx = g.grad(cube, &[x], true).unwrap()[0];
    assert_eq!(dx.item().unwrap(), 12.0);
    let ddx = g.grad(dx, &[x], false).unwrap()[0];
    assert_eq!(ddx.item().unwrap(), 12.0);
}

#[test]
fn third_derivative_through_tanh() {
    // d³/dx³ tanh(x) = −2 sech²(x) (1 − 3 tanh²(x)); checked at x = 0.3.
    let x0 = 0.3_f64;
    let g = Graph::new();
    let x = g.leaf(&Tensor::scalar(x0));
    let y = x.tanh();
    let d1 = g.grad(y, &[x], true).unwrap()[0];
    let d2 = g.grad(d1, &[x], true).unwrap()[0];
    let d3 = g.grad(d2, &[x], false).unwrap()[0].item().unwrap();
    let th = x0.tanh();
    let expected = -2.0 * (1.0 - th * th) * (1.0 - 3.0 * th * th);
    assert!((d3 - expected).abs() < 1e-12, "{d3} vs {expected}");
}

#[test]
fn norm_gradient_at_origin_is_zero() {
    let g = Graph::new();
    let x = g.leaf(&Tensor::zeros(2, 3));
    let y = x.norm_rows().sum();
    let dx = &g.grad_values(y, &[x]).unwrap()[0];
    assert!(dx.values().iter().all(|&v| v == 0.0));
}

#[test]
fn leaky_relu_derivative_at_zero_is_alpha() {
    let g = Graph::new();
    let x = g.leaf(&Tensor::scalar(0.0));
    let dx = g.grad_values(x.leaky_relu(0.1), &[x]).unwrap();
    assert_eq!(dx[0].item().unwrap(), 0.1);
}

#[test]
fn shape_mismatch_names_operation() {
    let g = Graph::new();
    let a = g.leaf(&Tensor::zeros(2, 3));
    let b = g.leaf(&Tensor::zeros(2, 3));
    let err = a.matmul(&b).unwrap_err();
    match err {
        Error::ShapeMismatch { op, lhs, rhs } => {
            assert_eq!(op, "matmul");
            assert_eq!(lhs, vec![2, 3]);
            assert_eq!(rhs, vec![2, 3]);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        a.add(&g.leaf(&Tensor::zeros(3, 2))),
        Err(Error::ShapeMismatch { op: "add", .. })
    ));
}

#[test]
fn grad_errors() {
    let g = Graph::new();
    let a = g.leaf(&Tensor::zeros(2, 2));
    let b = g.leaf(&Tensor::zeros(2, 2));
    assert!(matches!(
        g.grad(a.square(), &[a], false),
        Err(Error::NonScalarOutput(_))
    ));
    let y = a.sum();
    assert!(matches!(g.grad(y, &[b], false), Err(Error::Disconnected(_))));

    let other = Graph::new();
    let c = other.leaf(&Tensor::zeros(2, 2));
    assert!(matches!(a.add(&c), Err(Error::ForeignGraph)));
}

#[test]
fn detached_gradient_is_not_differentiable() {
    let g = Graph::new();
    let x = g.leaf(&Tensor::scalar(1.5));
    let dx = g.grad(x.square(), &[x], false).unwrap()[0];
    assert!(matches!(g.grad(dx, &[x], false), Err(Error::Disconnected(_))));
}

#[test]
fn matmul_and_bias_values() {
    let g = Graph::new();
    let x = g.leaf(&t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    let w = g.leaf(&t(2, 1, &[0.5, -1.0]));
    let b = g.leaf(&t(1, 1, &[0.25]));
    let y = x.matmul(&w).unwrap().add_bias(&b).unwrap();
    assert_eq!(*y.value(), array![[-1.25], [-2.25]]);
    let grads = g.grad_values(y.sum(), &[w, b]).unwrap();
    assert_eq!(grads[0].values(), &[4.0, 6.0]);
    assert_eq!(grads[1].values(), &[2.0]);
}

#[test]
fn finite_diff_check_on_linear_function_is_exact() {
    let w = t(1, 4, &[0.5, -1.25, 2.0, 0.125]);
    let x = t(1, 4, &[1.0, 2.0, -3.0, 0.5]);
    let err = finite_diff_check(
        |g, x| Ok(x.mul(&g.leaf(&w))?.sum()),
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-9, "{err}");
}

#[test]
fn finite_diff_check_sigmoid_at_zero() {
    let err = finite_diff_check(|_, x| Ok(x.sigmoid().sum()), &Tensor::scalar(0.0), 1e-5).unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn finite_diff_check_rejects_bad_inputs() {
    assert!(finite_diff_check(|_, x| Ok(x.sum()), &Tensor::scalar(0.0), 0.0).is_err());
    let err = finite_diff_check(
        |_, x| Ok(x.safe_recip().scale(f64::INFINITY).sum()),
        &Tensor::scalar(1.0),
        1e-5,
    );
    assert!(matches!(err, Err(Error::NonFinite(_))));
}

/// Two-layer tanh/relu network used as a generic scalar map.
fn mlp_output<'g>(g: &'g Graph, x: Var<'g>, params: &[Tensor]) -> Result<Var<'g>> {
    let h = x
        .matmul(&g.leaf(&params[0]))?
        .add_bias(&g.leaf(&params[1]))?
        .tanh();
    let out = h.matmul(&g.leaf(&params[2]))?.add_bias(&g.leaf(&params[3]))?;
    Ok(out.silu().sum())
}

#[test]
fn mlp_input_gradient_matches_finite_differences() {
    let mut r = rng::stream(11, 0);
    let params = vec![
        random_tensor(&mut r, 3, 8),
        random_tensor(&mut r, 1, 8),
        random_tensor(&mut r, 8, 2),
        random_tensor(&mut r, 1, 2),
    ];
    let x = random_tensor(&mut r, 4, 3);
    let err = finite_diff_check(|g, x| mlp_output(g, x, &params), &x, 1e-5).unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn batch_gradient_is_sum_of_row_gradients() {
    let mut r = rng::stream(12, 0);
    let params = vec![
        random_tensor(&mut r, 3, 5),
        random_tensor(&mut r, 1, 5),
        random_tensor(&mut r, 5, 1),
        random_tensor(&mut r, 1, 1),
    ];
    let batch = random_tensor(&mut r, 6, 3);

    let weight_grad = |x: &Tensor| {
        let g = Graph::new();
        let w = g.leaf(&params[0]);
        let h = g
            .leaf(x)
            .matmul(&w)
            .unwrap()
            .add_bias(&g.leaf(&params[1]))
            .unwrap()
            .tanh();
        let y = h
            .matmul(&g.leaf(&params[2]))
            .unwrap()
            .add_bias(&g.leaf(&params[3]))
            .unwrap()
            .sum();
        g.grad_values(y, &[w]).unwrap().remove(0)
    };

    let whole = weight_grad(&batch);
    let mut summed = ndarray::Array2::<f64>::zeros((3, 5));
    for i in 0..batch.rows() {
        let row = Tensor::from_array(batch.array().slice(ndarray::s![i..i + 1, ..]).to_owned());
        summed += weight_grad(&row).array();
    }
    for (a, b) in whole.values().iter().zip(summed.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grad_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng::stream(seed, 0);
        let x = random_tensor(&mut r, 2, 3);
        let grad_of = |ca: f64, cb: f64| {
            let g = Graph::new();
            let xv = g.leaf(&x);
            let u = xv.tanh().sum();
            let v = xv.square().sigmoid().sum();
            let y = u.scale(ca).add(&v.scale(cb)).unwrap();
            g.grad_values(y, &[xv]).unwrap().remove(0)
        };
        let combined = grad_of(a, b);
        let gu = grad_of(1.0, 0.0);
        let gv = grad_of(0.0, 1.0);
        for i in 0..combined.len() {
            let expect = a * gu.values()[i] + b * gv.values()[i];
            prop_assert!((combined.values()[i] - expect).abs() < 1e-12);
        }
    }
}
