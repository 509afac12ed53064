//! Square-root balanced truncation.

use nalgebra::{DMatrix, SVD};

use crate::error::{Result, SsError};
use crate::linalg;
use crate::statespace::StateSpace;

#[derive(Debug, Clone)]
pub struct Truncation {
    pub reduced: StateSpace,
    /// Twice the sum of the discarded Hankel singular values.
    pub error_bound: f64,
    pub hsv: Vec<f64>,
}

struct Balancing {
    lp: DMatrix<f64>,
    lq: DMatrix<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    hsv: Vec<f64>,
}

fn balance(g: &StateSpace) -> Result<Balancing> {
    g.ensure_stable()?;
    let p = linalg::lyapunov(&g.a, &(&g.b * g.b.transpose()))?;
    let q = linalg::lyapunov(&g.a.transpose(), &(g.c.transpose() * &g.c))?;
    let lp = linalg::psd_factor(&p);
    let lq = linalg::psd_factor(&q);
    let svd = SVD::new(lq.transpose() * &lp, true, true);
    let u = svd.u.ok_or(SsError::EigenFailure)?;
    let v = svd.v_t.ok_or(SsError::EigenFailure)?.transpose();
    Ok(Balancing { lp, lq, u, v, hsv: svd.singular_values.iter().copied().collect() })
}

pub fn hankel_singular_values(g: &StateSpace) -> Result<Vec<f64>> {
    if g.nstates() == 0 {
        return Ok(Vec::new());
    }
    Ok(balance(g)?.hsv)
}

/// Reduce a stable system to order `r`.
///
/// States whose Hankel singular value is numerically zero cannot be balanced, so
/// the returned order is `min(r, numerical rank)`; they contribute nothing to the bound.
pub fn balanced_truncate(g: &StateSpace, r: usize) -> Result<Truncation> {
    let n = g.nstates();
    if r > n {
        return Err(SsError::Dimension(format!("target order {r} exceeds {n}")));
    }
    if n == 0 {
        return Ok(Truncation { reduced: g.clone(), error_bound: 0.0, hsv: Vec::new() });
    }
    let bal = balance(g)?;
    if r == n {
        return Ok(Truncation { reduced: g.clone(), error_bound: 0.0, hsv: bal.hsv });
    }
    let k = r.min(numerical_rank(&bal.hsv));
    let reduced = project(g, &bal, k)?;
    let error_bound = 2.0 * bal.hsv[k..].iter().sum::<f64>();
    Ok(Truncation { reduced, error_bound, hsv: bal.hsv })
}

/// Balanced realization of a stable system with numerically non-minimal states removed.
pub fn balanced_realization(g: &StateSpace) -> Result<StateSpace> {
    if g.nstates() == 0 {
        return Ok(g.clone());
    }
    let bal = balance(g)?;
    let k = numerical_rank(&bal.hsv);
    project(g, &bal, k)
}

fn numerical_rank(hsv: &[f64]) -> usize {
    let s1 = hsv[0];
    hsv.iter().filter(|&&s| s > 1e-13 * s1.max(f64::MIN_POSITIVE)).count()
}

fn project(g: &StateSpace, bal: &Balancing, k: usize) -> Result<StateSpace> {
    let mut t = &bal.lp * bal.v.columns(0, k);
    let mut ti = (&bal.lq * bal.u.columns(0, k)).transpose();
    for j in 0..k {
        let s = bal.hsv[j].powf(-0.5);
        t.column_mut(j).scale_mut(s);
        ti.row_mut(j).scale_mut(s);
    }
    StateSpace::new(&ti * &g.a * &t, &ti * &g.b, &g.c * &t, g.d.clone())?
        .with_inputs(g.inputs.clone())?
        .with_outputs(g.outputs.clone())
}
