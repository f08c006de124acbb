//! Finite-difference gradient checking.

use super::tape::{Tape, VarId};
use super::tensor::{NumericsError, Tensor};

/// Relative-error denominator floor. Coordinates where both gradients are
/// below this magnitude are compared absolutely against it, which keeps
/// finite-difference noise on near-zero gradients from dominating the score.
pub const GRAD_CHECK_FLOOR: f64 = 1e-2;

/// Max relative error between the tape gradient of `f` and central finite
/// differences at `x`. `f` must produce a scalar.
pub fn grad_check<F>(f: F, x: &Tensor, step: f64) -> Result<f64, NumericsError>
where
    F: Fn(&mut Tape, VarId) -> Result<VarId, NumericsError>,
{
    let mut tape = Tape::new();
    let leaf = tape.input(x.clone().with_grad());
    let loss = f(&mut tape, leaf)?;
    let mut grads = tape.backward(loss)?;
    let analytic = grads
        .take(leaf)
        .unwrap_or_else(|| Tensor::zeros(x.shape().to_vec()));

    let value_of = |point: &Tensor| -> Result<f64, NumericsError> {
        let mut t = Tape::new();
        let id = t.input(point.clone());
        let out = f(&mut t, id)?;
        Ok(t.value(out).item())
    };
    grad_check_against(value_of, &analytic, x, step)
}

/// Max relative error between a supplied `analytic` gradient and central
/// finite differences of `f_value` at `x`. Lets tests compare deliberately
/// corrupted gradients without touching the tape.
pub fn grad_check_against<F, E>(
    f_value: F,
    analytic: &Tensor,
    x: &Tensor,
    step: f64,
) -> Result<f64, E>
where
    F: Fn(&Tensor) -> Result<f64, E>,
{
    assert_eq!(analytic.shape(), x.shape(), "analytic gradient shape mismatch");
    let mut max_err: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += step;
        let mut minus = x.clone();
        minus.data_mut()[i] -= step;
        let numeric = (f_value(&plus)? - f_value(&minus)?) / (2.0 * step);
        let a = analytic.data()[i];
        let denom = a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        max_err = max_err.max((a - numeric).abs() / denom);
    }
    Ok(max_err)
}
