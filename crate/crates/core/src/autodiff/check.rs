use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Compares the reverse-mode gradient of a scalar function against central
/// differences.
///
/// Returns `max_i |g_i − fd_i| / (|fd_i| + 1e-12)` over all coordinates of
/// `point`, where `fd_i = (f(x + h e_i) − f(x − h e_i)) / 2h`.
pub fn finite_diff_check<F>(mut function: F, point: &Tensor, step: f64) -> Result<f64>
where
    F: for<'g> FnMut(&'g Graph, Var<'g>) -> Result<Var<'g>>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }

    let analytic = {
        let graph = Graph::new();
        let x = graph.leaf(point);
        let y = function(&graph, x)?;
        check_finite(y.item()?)?;
        graph.grad_values(y, &[x])?.remove(0)
    };

    let mut eval = |values: Vec<f64>| -> Result<f64> {
        let graph = Graph::new();
        let t = Tensor::from_vec(point.rows(), point.cols(), values)?;
        let y = function(&graph, graph.leaf(&t))?.item()?;
        check_finite(y)
    };

    let mut worst = 0.0_f64;
    for i in 0..point.len() {
        let mut plus = point.values().to_vec();
        let mut minus = plus.clone();
        plus[i] += step;
        minus[i] -= step;
        let fd = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let err = (analytic.values()[i] - fd).abs() / (fd.abs() + 1e-12);
        worst = worst.max(err);
    }
    Ok(worst)
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("function value".into()))
    }
}
