//! Numerical linearization by Richardson-extrapolated central differences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SsError};
use crate::statespace::{Channels, StateSpace};

/// A smooth nonlinear system `x' = f(x, v)`, `y = g(x, v)`.
pub trait NonlinearModel {
    fn derivative(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>>;
    fn output(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>>;
}

/// Plain central difference of `f` in direction `j` with step `h`.
pub fn central_difference<F>(f: &F, x: &DVector<f64>, j: usize, h: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut xp = x.clone();
    let mut xm = x.clone();
    xp[j] += h;
    xm[j] -= h;
    Ok((f(&xp)? - f(&xm)?) / (2.0 * h))
}

/// Jacobian of `f` at `x`; column `j` uses base step `steps[j]` and one Richardson level.
pub fn jacobian<F>(f: &F, x: &DVector<f64>, steps: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if steps.len() != x.len() {
        return Err(SsError::Dimension("one step size per coordinate".into()));
    }
    let f0 = f(x)?;
    let mut jac = DMatrix::zeros(f0.len(), x.len());
    for j in 0..x.len() {
        let h = steps[j];
        let d1 = central_difference(f, x, j, h)?;
        let d2 = central_difference(f, x, j, 0.5 * h)?;
        jac.set_column(j, &((d2 * 4.0 - d1) / 3.0));
    }
    Ok(jac)
}

#[derive(Debug, Clone)]
pub struct LinearizeOptions {
    /// Per-state step sizes.
    pub state_steps: Vec<f64>,
    /// Per-input step sizes.
    pub input_steps: Vec<f64>,
    /// Per-state derivative scales used by the equilibrium check.
    pub derivative_scale: Vec<f64>,
    pub equilibrium_tol: f64,
}

/// Linearize `model` at the equilibrium `(x, v)`.
pub fn linearize<M: NonlinearModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    v: &DVector<f64>,
    inputs: Channels,
    outputs: Channels,
    opts: &LinearizeOptions,
) -> Result<StateSpace> {
    let f0 = model.derivative(x, v)?;
    let scaled = f0
        .iter()
        .zip(&opts.derivative_scale)
        .map(|(d, s)| (d / s).powi(2))
        .sum::<f64>()
        .sqrt();
    if !(scaled <= opts.equilibrium_tol) {
        return Err(SsError::NotAtEquilibrium(scaled));
    }
    let fx = |xx: &DVector<f64>| model.derivative(xx, v);
    let fv = |vv: &DVector<f64>| model.derivative(x, vv);
    let gx = |xx: &DVector<f64>| model.output(xx, v);
    let gv = |vv: &DVector<f64>| model.output(x, vv);
    let a = jacobian(&fx, x, &opts.state_steps)?;
    let b = jacobian(&fv, v, &opts.input_steps)?;
    let c = jacobian(&gx, x, &opts.state_steps)?;
    let d = jacobian(&gv, v, &opts.input_steps)?;
    StateSpace::new(a, b, c, d)?.with_inputs(inputs)?.with_outputs(outputs)
}
