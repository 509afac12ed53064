//! System norms.

use nalgebra::DMatrix;

use crate::error::{Result, SsError};
use crate::linalg::{self, max_sv, max_sv_complex};
use crate::statespace::StateSpace;

/// Peak singular value of the frequency response over the given grid.
pub fn grid_peak(g: &StateSpace, freqs: &[f64]) -> f64 {
    freqs.iter().map(|&w| max_sv_complex(&g.freq_resp(w))).fold(0.0, f64::max)
}

/// The standard verification grid: 10^4 log-spaced points over [1e-4, 1e4] rad/s.
pub fn verification_grid() -> Vec<f64> {
    linalg::log_grid(1e-4, 1e4, 10_000)
}

fn sigma_at(g: &StateSpace, w: f64) -> f64 {
    max_sv_complex(&g.freq_resp(w))
}

/// H-infinity norm of a stable system to relative accuracy `tol`.
///
/// Level-set iteration on the imaginary-axis eigenvalues of the Hamiltonian:
/// every iterate is a singular value actually attained at some frequency, so the
/// returned value is a certified lower bound with no imaginary-axis crossing at
/// `(1 + 2 tol)` times it.
pub fn hinf_norm(g: &StateSpace, tol: f64) -> Result<f64> {
    g.ensure_stable()?;
    let n = g.nstates();
    if n == 0 || g.ninputs() == 0 || g.noutputs() == 0 {
        return Ok(max_sv(&g.d));
    }
    let tol = tol.max(1e-12);
    let (a, b, c, d) = (&g.a, &g.b, &g.c, &g.d);

    let mut lb = max_sv(d).max(sigma_at(g, 0.0));
    for p in g.poles()? {
        let w = if p.im.abs() > 0.0 { p.im.abs() } else { p.norm() };
        lb = lb.max(sigma_at(g, w));
    }
    if lb == 0.0 {
        lb = linalg::log_grid(1e-3, 1e3, 13).iter().map(|&w| sigma_at(g, w)).fold(0.0, f64::max);
        if lb == 0.0 {
            // Zero transfer matrix at every probe frequency.
            return Ok(0.0);
        }
    }

    let m = g.ninputs();
    let p = g.noutputs();
    for _ in 0..100 {
        let gamma = (1.0 + 2.0 * tol) * lb;
        let r = DMatrix::<f64>::identity(m, m) * (gamma * gamma) - d.transpose() * d;
        let ri = r.clone().try_inverse().ok_or(SsError::Singular("hinf_norm R"))?;
        let ah = a + b * &ri * d.transpose() * c;
        let h12 = b * &ri * b.transpose();
        let h21 = -(c.transpose() * (DMatrix::<f64>::identity(p, p) + d * &ri * d.transpose()) * c);
        let h = linalg::block(&[&[&ah, &h12], &[&h21, &(-ah.transpose())]]);
        let ev = linalg::eigenvalues(&h)?;
        let hn = h.norm();
        let mut ws: Vec<f64> = ev
            .iter()
            .filter(|l| l.im >= 0.0 && l.re.abs() <= 1e-8 * (hn + 1.0).max(l.norm()))
            .map(|l| l.im)
            .collect();
        if ws.is_empty() {
            return Ok(lb * (1.0 + tol));
        }
        ws.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut cands = Vec::with_capacity(ws.len() + 1);
        if ws.len() == 1 {
            cands.push(ws[0]);
        } else {
            for k in 0..ws.len() - 1 {
                cands.push(0.5 * (ws[k] + ws[k + 1]));
            }
            cands.push(ws[0]);
        }
        let newlb = cands.iter().map(|&w| sigma_at(g, w)).fold(lb, f64::max);
        if newlb <= lb * (1.0 + 1e-3 * tol) {
            return Ok(lb * (1.0 + tol));
        }
        lb = newlb;
    }
    Ok(lb * (1.0 + tol))
}
