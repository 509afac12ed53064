//! H-infinity output-feedback synthesis (central controller, general D-matrices).

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Result, SsError};
use crate::lft::{lft_close, GeneralizedPlant, Partition};
use crate::linalg::{self, max_sv, min_sv};
use crate::norm::hinf_norm;
use crate::riccati::care_general;
use crate::statespace::{Channels, StateSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct HinfOptions {
    /// Relative bisection tolerance on gamma.
    pub gamma_tol: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Size of the feedthrough blocks appended when D12 or D21 lose rank.
    pub regularization: f64,
    /// The returned controller is computed at `(1 + backoff)` times the bisection bound.
    pub backoff: f64,
}

impl Default for HinfOptions {
    fn default() -> Self {
        HinfOptions { gamma_tol: 1e-4, gamma_min: 1e-6, gamma_max: 1e6, regularization: 1e-4, backoff: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct HinfResult {
    pub k: StateSpace,
    /// Level at which `k` was computed; the closed-loop norm is below it.
    pub gamma: f64,
    /// Closed-loop norm of the original (unregularized) plant with `k`.
    pub closed_loop_norm: f64,
    pub regularized_d12: bool,
    pub regularized_d21: bool,
}

/// Plant data after regularization and D12/D21 normalization.
struct Normalized {
    p: Partition,
    /// `u = ru_inv * u'`
    ru_inv: DMatrix<f64>,
    /// `y' = ry_inv * y`
    ry_inv: DMatrix<f64>,
}

fn zeros(r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::zeros(r, c)
}

fn eye(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

fn rows(m: &DMatrix<f64>, r0: usize, nr: usize) -> DMatrix<f64> {
    m.view((r0, 0), (nr, m.ncols())).into_owned()
}

fn cols(m: &DMatrix<f64>, c0: usize, nc: usize) -> DMatrix<f64> {
    m.view((0, c0), (m.nrows(), nc)).into_owned()
}

/// Eigenvectors of a symmetric matrix sorted by ascending eigenvalue.
fn sorted_eigvecs(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(linalg::sym(m));
    let mut idx: Vec<usize> = (0..m.nrows()).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[i].partial_cmp(&e.eigenvalues[j]).unwrap());
    DMatrix::from_fn(m.nrows(), m.nrows(), |r, c| e.eigenvectors[(r, idx[c])])
}

fn regularize(mut p: Partition, eps: f64) -> (Partition, bool, bool) {
    let n = p.a.nrows();
    let (m1, m2, p1, p2) = (p.b1.ncols(), p.b2.ncols(), p.c1.nrows(), p.c2.nrows());
    let need12 = m2 > 0 && (p1 < m2 || min_sv(&p.d12) < eps);
    if need12 {
        p.c1 = linalg::vstack(&p.c1, &zeros(m2, n));
        p.d11 = linalg::vstack(&p.d11, &zeros(m2, m1));
        p.d12 = linalg::vstack(&p.d12, &(eye(m2) * eps));
    }
    let p1 = p.c1.nrows();
    let need21 = p2 > 0 && (m1 < p2 || min_sv(&p.d21) < eps);
    if need21 {
        p.b1 = linalg::hstack(&p.b1, &zeros(n, p2));
        p.d11 = linalg::hstack(&p.d11, &zeros(p1, p2));
        p.d21 = linalg::hstack(&p.d21, &(eye(p2) * eps));
    }
    (p, need12, need21)
}

fn normalize(p: &Partition) -> Result<Normalized> {
    let (m1, m2, p1, p2) = (p.b1.ncols(), p.b2.ncols(), p.c1.nrows(), p.c2.nrows());
    // z' = Theta' z with Theta = [U_perp, U_1], so Theta' D12 = [0; Ru].
    let theta = sorted_eigvecs(&(&p.d12 * p.d12.transpose()));
    let u1 = cols(&theta, p1 - m2, m2);
    let ru = u1.transpose() * &p.d12;
    let ru_inv = ru.try_inverse().ok_or(SsError::NotSynthesizable("D12 has no full column rank".into()))?;
    // w = Phi w' with Phi = [V_perp, V_1], so D21 Phi = [0, Ry].
    let phi = sorted_eigvecs(&(p.d21.transpose() * &p.d21));
    let v1 = cols(&phi, m1 - p2, p2);
    let ry = &p.d21 * v1;
    let ry_inv = ry.try_inverse().ok_or(SsError::NotSynthesizable("D21 has no full row rank".into()))?;

    let mut d12 = theta.transpose() * &p.d12 * &ru_inv;
    d12.view_mut((0, 0), (p1 - m2, m2)).fill(0.0);
    d12.view_mut((p1 - m2, 0), (m2, m2)).copy_from(&eye(m2));
    let mut d21 = &ry_inv * &p.d21 * &phi;
    d21.view_mut((0, 0), (p2, m1 - p2)).fill(0.0);
    d21.view_mut((0, m1 - p2), (p2, p2)).copy_from(&eye(p2));
    Ok(Normalized {
        p: Partition {
            a: p.a.clone(),
            b1: &p.b1 * &phi,
            b2: &p.b2 * &ru_inv,
            c1: theta.transpose() * &p.c1,
            c2: &ry_inv * &p.c2,
            d11: theta.transpose() * &p.d11 * &phi,
            d12,
            d21,
            d22: zeros(p2, m2),
        },
        ru_inv,
        ry_inv,
    })
}

/// Lower bound on gamma imposed by the feedthrough D11 alone.
fn d11_bound(p: &Partition) -> f64 {
    let (m1, m2, p1, p2) = (p.b1.ncols(), p.b2.ncols(), p.c1.nrows(), p.c2.nrows());
    let top = p.d11.view((0, 0), (p1 - m2, m1)).into_owned();
    let left = p.d11.view((0, 0), (p1, m1 - p2)).into_owned();
    max_sv(&top).max(max_sv(&left))
}

/// Central controller of the normalized problem at level `gamma`.
fn central_controller(p: &Partition, gamma: f64) -> Result<StateSpace> {
    let infeasible = |why: &str| SsError::NotSynthesizable(format!("gamma {gamma:e}: {why}"));
    let n = p.a.nrows();
    let (m1, m2, p1, p2) = (p.b1.ncols(), p.b2.ncols(), p.c1.nrows(), p.c2.nrows());
    let g2 = gamma * gamma;
    if gamma <= d11_bound(p) {
        return Err(infeasible("below the feedthrough bound"));
    }
    let b = linalg::hstack(&p.b1, &p.b2);
    let c = linalg::vstack(&p.c1, &p.c2);
    let d1dot = linalg::hstack(&p.d11, &p.d12);
    let ddot1 = linalg::vstack(&p.d11, &p.d21);

    let mut r = d1dot.transpose() * &d1dot;
    for i in 0..m1 {
        r[(i, i)] -= g2;
    }
    let ri = r.try_inverse().ok_or_else(|| infeasible("R singular"))?;
    let ax = &p.a - &b * &ri * d1dot.transpose() * &p.c1;
    let gx = linalg::sym(&(&b * &ri * b.transpose()));
    let qx = linalg::sym(&(p.c1.transpose() * &p.c1 - p.c1.transpose() * &d1dot * &ri * d1dot.transpose() * &p.c1));
    let x = care_general(&ax, &gx, &qx).map_err(|e| infeasible(&format!("X: {e}")))?;

    let mut rt = &ddot1 * ddot1.transpose();
    for i in 0..p1 {
        rt[(i, i)] -= g2;
    }
    let rti = rt.try_inverse().ok_or_else(|| infeasible("R~ singular"))?;
    let ay = &p.a - &p.b1 * ddot1.transpose() * &rti * &c;
    let gy = linalg::sym(&(c.transpose() * &rti * &c));
    let qy = linalg::sym(&(&p.b1 * p.b1.transpose() - &p.b1 * ddot1.transpose() * &rti * &ddot1 * p.b1.transpose()));
    let y = care_general(&ay.transpose(), &gy, &qy).map_err(|e| infeasible(&format!("Y: {e}")))?;

    let tol_x = 1e-9 * (1.0 + x.norm());
    let tol_y = 1e-9 * (1.0 + y.norm());
    if linalg::min_sym_eig(&x) < -tol_x || linalg::min_sym_eig(&y) < -tol_y {
        return Err(infeasible("Riccati solution indefinite"));
    }
    let rho = linalg::spectral_radius(&(&x * &y))?;
    if rho >= g2 * (1.0 - 1e-10) {
        return Err(infeasible("coupling condition"));
    }

    let f = -(&ri * (d1dot.transpose() * &p.c1 + b.transpose() * &x));
    let l = -((&p.b1 * ddot1.transpose() + &y * c.transpose()) * &rti);
    let f12 = rows(&f, m1 - p2, p2);
    let f2 = rows(&f, m1, m2);
    let l12 = cols(&l, p1 - m2, m2);
    let l2 = cols(&l, p1, p2);

    let d1111 = p.d11.view((0, 0), (p1 - m2, m1 - p2)).into_owned();
    let d1112 = p.d11.view((0, m1 - p2), (p1 - m2, p2)).into_owned();
    let d1121 = p.d11.view((p1 - m2, 0), (m2, m1 - p2)).into_owned();
    let d1122 = p.d11.view((p1 - m2, m1 - p2), (m2, p2)).into_owned();
    let inv_a = (eye(p1 - m2) * g2 - &d1111 * d1111.transpose())
        .try_inverse()
        .ok_or_else(|| infeasible("D1111 bound"))?;
    let inv_b = (eye(m1 - p2) * g2 - d1111.transpose() * &d1111)
        .try_inverse()
        .ok_or_else(|| infeasible("D1111 bound"))?;
    let dh11 = -(&d1121 * d1111.transpose() * &inv_a * &d1112) - &d1122;
    let m12 = linalg::sym(&(eye(m2) - &d1121 * &inv_b * d1121.transpose()));
    let m21 = linalg::sym(&(eye(p2) - d1112.transpose() * &inv_a * &d1112));
    let dh12 = Cholesky::new(m12).ok_or_else(|| infeasible("D^12 factor"))?.l();
    let dh21 = Cholesky::new(m21).ok_or_else(|| infeasible("D^21 factor"))?.l().transpose();
    let dh12_inv = dh12.clone().try_inverse().ok_or_else(|| infeasible("D^12 singular"))?;
    let dh21_inv = dh21.clone().try_inverse().ok_or_else(|| infeasible("D^21 singular"))?;

    let z = (eye(n) - &y * &x / g2).try_inverse().ok_or_else(|| infeasible("I - YX/g^2 singular"))?;
    let bh2 = &z * (&p.b2 + &l12) * &dh12;
    let ch2 = -(&dh21 * (&p.c2 + &f12));
    let bh1 = -(&z * &l2) + &bh2 * &dh12_inv * &dh11;
    let ch1 = &f2 + &dh11 * &dh21_inv * &ch2;
    let ah = &p.a + &b * &f + &bh1 * &dh21_inv * &ch2;
    StateSpace::new(ah, bh1, ch1, dh11).map_err(|e| infeasible(&e.to_string()))
}

/// Central controller that also internally stabilizes the normalized plant.
fn feasible_controller(norm: &Normalized, gamma: f64) -> Result<StateSpace> {
    let k = central_controller(&norm.p, gamma)?;
    let g = GeneralizedPlant::from_partition(&norm.p)?;
    let cl = lft_close(&g, &k)?;
    let abscissa = cl.spectral_abscissa()?;
    if abscissa >= -1e-12 {
        return Err(SsError::NotSynthesizable(format!("gamma {gamma:e}: closed loop not stable")));
    }
    Ok(k)
}

/// Map a controller of the normalized problem back to the original coordinates and loop-shift D22.
fn denormalize(k0: &StateSpace, norm: &Normalized, d22: &DMatrix<f64>) -> Result<StateSpace> {
    let bk = &k0.b * &norm.ry_inv;
    let ck = &norm.ru_inv * &k0.c;
    let dk = &norm.ru_inv * &k0.d * &norm.ry_inv;
    let nu = dk.nrows();
    let ny = dk.ncols();
    let delta = (eye(nu) + &dk * d22).try_inverse().ok_or(SsError::IllPosed)?;
    let a = &k0.a - &bk * d22 * &delta * &ck;
    let b = &bk * (eye(ny) - d22 * &delta * &dk);
    let c = &delta * &ck;
    let d = &delta * &dk;
    StateSpace::new(a, b, c, d)
}

/// Suboptimal H-infinity controller for `g` with gamma found by bisection.
pub fn hinf_synthesize(g: &GeneralizedPlant, opts: &HinfOptions) -> Result<HinfResult> {
    if g.nu() == 0 || g.ny() == 0 {
        return Err(SsError::NotSynthesizable("plant has no control inputs or measurements".into()));
    }
    let (reg, r12, r21) = regularize(g.partition(), opts.regularization);
    let norm = normalize(&reg)?;

    let mut lo = opts.gamma_min.max(d11_bound(&norm.p) * (1.0 + 1e-9));
    let mut hi = opts.gamma_max;
    if lo >= hi {
        return Err(SsError::NotSynthesizable("feedthrough bound exceeds gamma_max".into()));
    }
    if feasible_controller(&norm, hi).is_err() {
        return Err(SsError::NotSynthesizable(format!("infeasible at gamma_max = {hi:e}")));
    }
    if feasible_controller(&norm, lo).is_ok() {
        hi = lo;
    } else {
        while hi / lo > 1.0 + opts.gamma_tol {
            let mid = (lo * hi).sqrt();
            if feasible_controller(&norm, mid).is_ok() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    let mut gamma = hi * (1.0 + opts.backoff);
    let mut last_err = None;
    for _ in 0..20 {
        match feasible_controller(&norm, gamma) {
            Ok(k0) => {
                let k = denormalize(&k0, &norm, &g.partition().d22)?
                    .with_inputs(Channels::single("y", g.ny()))?
                    .with_outputs(Channels::single("u", g.nu()))?;
                let cl = lft_close(g, &k)?;
                if cl.ensure_stable().is_ok() {
                    let cl_norm = hinf_norm(&cl, 1e-7)?;
                    if cl_norm <= gamma * (1.0 + 1e-6) {
                        return Ok(HinfResult {
                            k,
                            gamma,
                            closed_loop_norm: cl_norm,
                            regularized_d12: r12,
                            regularized_d21: r21,
                        });
                    }
                }
            }
            Err(e) => last_err = Some(e),
        }
        gamma *= 1.0 + 10.0 * opts.gamma_tol.max(1e-6);
    }
    Err(last_err.unwrap_or_else(|| SsError::NotSynthesizable("could not certify closed-loop norm".into())))
}
