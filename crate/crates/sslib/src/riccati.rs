//! Continuous algebraic Riccati equations.

use nalgebra::DMatrix;

use crate::error::{Result, SsError};
use crate::linalg::{self, sym};

/// Residual `A'X + XA - XGX + Q`.
pub fn riccati_residual(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * x + x * a - x * g * x + q
}

fn log_abs_det(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].abs().ln()).sum()
}

/// Matrix sign function by the scaled Newton iteration.
fn matrix_sign(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    let mut z = h.clone();
    let mut scaling = true;
    let mut prev = f64::INFINITY;
    for _ in 0..200 {
        let lu = z.clone().lu();
        let c = if scaling { (log_abs_det(&lu) / n as f64).exp() } else { 1.0 };
        let zi = lu.try_inverse().ok_or_else(|| SsError::NoStabilizingSolution("singular Hamiltonian iterate".into()))?;
        let znew = (&z / c + &zi * c) * 0.5;
        let diff = (&znew - &z).norm();
        let size = znew.norm();
        z = znew;
        if !size.is_finite() {
            return Err(SsError::NoStabilizingSolution("sign iteration diverged".into()));
        }
        if diff <= 1e-2 * size {
            scaling = false;
        }
        if diff <= 1e-13 * size {
            return Ok(z);
        }
        // Rounding floor reached in the quadratic phase.
        if !scaling && diff >= prev && diff <= 1e-7 * size {
            return Ok(z);
        }
        if !scaling {
            prev = diff;
        }
    }
    Err(SsError::NoStabilizingSolution(
        "sign iteration did not converge (Hamiltonian eigenvalues near the imaginary axis)".into(),
    ))
}

/// Stabilizing solution of `A'X + XA - XGX + Q = 0` with symmetric `G`, `Q`.
///
/// Computed from the sign of the Hamiltonian and refined by Newton steps.
pub fn care_general(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if g.shape() != (n, n) || q.shape() != (n, n) {
        return Err(SsError::Dimension("Riccati data must be square and conformal".into()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let h = linalg::block(&[&[a, &(-g)], &[&(-q), &(-a.transpose())]]);
    let w = matrix_sign(&h)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let w11 = w.view((0, 0), (n, n)).into_owned();
    let w12 = w.view((0, n), (n, n)).into_owned();
    let w21 = w.view((n, 0), (n, n)).into_owned();
    let w22 = w.view((n, n), (n, n)).into_owned();
    let lhs = linalg::vstack(&w12, &(w22 + &eye));
    let rhs = -linalg::vstack(&(w11 + &eye), &w21);
    let mut x = sym(&linalg::lstsq(&lhs, &rhs)?);

    let scale = 1.0 + x.norm();
    let mut res = riccati_residual(a, g, q, &x).norm();
    for _ in 0..12 {
        if res <= 1e-14 * scale {
            break;
        }
        let ac = a - g * &x;
        let r = riccati_residual(a, g, q, &x);
        let dx = match linalg::lyapunov(&ac.transpose(), &r) {
            Ok(dx) => dx,
            Err(_) => break,
        };
        let cand = sym(&(&x + dx));
        let cres = riccati_residual(a, g, q, &cand).norm();
        if !(cres < res) {
            break;
        }
        x = cand;
        res = cres;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SsError::NoStabilizingSolution("non-finite solution".into()));
    }
    let ac = a - g * &x;
    let abscissa = linalg::eigenvalues(&ac)?.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if abscissa >= 0.0 {
        return Err(SsError::NoStabilizingSolution(format!("closed-loop abscissa {abscissa:e}")));
    }
    if res > 1e-6 * (1.0 + x.norm()) {
        return Err(SsError::NoStabilizingSolution(format!("residual {res:e} too large")));
    }
    Ok(x)
}

/// Stabilizing solution of `A'X + XA - XBR^{-1}B'X + Q = 0`.
pub fn care_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != a.nrows() || r.shape() != (b.ncols(), b.ncols()) {
        return Err(SsError::Dimension("care_solve operand shapes".into()));
    }
    let chol = nalgebra::Cholesky::new(sym(r)).ok_or(SsError::Singular("R is not positive definite"))?;
    let g = b * chol.solve(&b.transpose());
    care_general(a, &sym(&g), &sym(q))
}
