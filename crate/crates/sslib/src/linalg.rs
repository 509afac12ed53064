//! Dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, Schur, SVD};
use num_complex::Complex64;

use crate::error::{Result, SsError};

pub fn blkdiag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (r1, c1) = a.shape();
    let (r2, c2) = b.shape();
    let mut m = DMatrix::zeros(r1 + r2, c1 + c2);
    m.view_mut((0, 0), (r1, c1)).copy_from(a);
    m.view_mut((r1, c1), (r2, c2)).copy_from(b);
    m
}

pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    m
}

pub fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.ncols(), "vstack column mismatch");
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    m
}

/// Build a matrix from a grid of blocks given row-major.
pub fn block(rows: &[&[&DMatrix<f64>]]) -> DMatrix<f64> {
    let heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
    let widths: Vec<usize> = rows[0].iter().map(|b| b.ncols()).collect();
    let mut m = DMatrix::zeros(heights.iter().sum(), widths.iter().sum());
    let mut r0 = 0;
    for (i, row) in rows.iter().enumerate() {
        let mut c0 = 0;
        for (j, blk) in row.iter().enumerate() {
            assert_eq!(blk.shape(), (heights[i], widths[j]), "block ({i},{j}) has wrong shape");
            m.view_mut((r0, c0), blk.shape()).copy_from(*blk);
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    m
}

pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_sv(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.max()
}

pub fn min_sv(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.min()
}

pub fn max_sv_complex(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.max()
}

pub fn real_schur(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    [f64::EPSILON, 16.0 * f64::EPSILON, 256.0 * f64::EPSILON]
        .into_iter()
        .find_map(|eps| Schur::try_new(m.clone(), eps, 1000 * n.max(10)))
        .map(|s| s.unpack())
        .ok_or(SsError::EigenFailure)
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let n = m.nrows();
    let b = balance_matrix(m);
    let shift = 0.5 * b.amax();
    // The QR iteration occasionally stalls; a transposed or shifted copy takes another path.
    let candidates = [(b.clone(), 0.0), (b.transpose(), 0.0), (&b + DMatrix::identity(n, n) * shift, shift)];
    for (mat, s) in candidates.iter() {
        for eps in [f64::EPSILON, 16.0 * f64::EPSILON] {
            if let Some(schur) = Schur::try_new(mat.clone(), eps, 1000 * n.max(10)) {
                return Ok(schur.complex_eigenvalues().iter().map(|l| l - s).collect());
            }
        }
    }
    Err(SsError::EigenFailure)
}

/// Diagonal similarity by powers of two equalizing row and column norms (eigenvalues unchanged).
pub fn balance_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let radix = 2.0f64;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / radix {
                f *= radix;
                cc *= radix;
                rr /= radix;
            }
            while cc > rr * radix {
                f /= radix;
                cc /= radix;
                rr *= radix;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    a
}

pub fn is_hurwitz(m: &DMatrix<f64>, margin: f64) -> bool {
    matches!(eigenvalues(m), Ok(ev) if ev.iter().all(|l| l.re < -margin))
}

/// Diagonal block sizes (1 or 2) of a real quasi-triangular Schur factor.
fn schur_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let two = i + 1 < n && t[(i + 1, i)].abs() > f64::EPSILON * (t[(i, i)].abs() + t[(i + 1, i + 1)].abs());
        if two {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Solve `T Y + Y S = C` for upper quasi-triangular `T` and `S`.
fn quasi_triangular_sylvester(t: &DMatrix<f64>, s: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let bt = schur_blocks(t);
    let bs = schur_blocks(s);
    let mut y = DMatrix::zeros(t.nrows(), s.nrows());
    for &(i0, p) in bt.iter().rev() {
        for &(j0, q) in bs.iter() {
            let mut rhs = c.view((i0, j0), (p, q)).into_owned();
            let tail = i0 + p;
            if tail < t.nrows() {
                let w = t.nrows() - tail;
                rhs -= t.view((i0, tail), (p, w)) * y.view((tail, j0), (w, q));
            }
            if j0 > 0 {
                rhs -= y.view((i0, 0), (p, j0)) * s.view((0, j0), (j0, q));
            }
            let tii = t.view((i0, i0), (p, p));
            let sjj = s.view((j0, j0), (q, q));
            // (I_q kron T_ii + S_jj' kron I_p) vec(Y) = vec(rhs)
            let k = p * q;
            let mut m = DMatrix::zeros(k, k);
            for jj in 0..q {
                for ii in 0..p {
                    let row = jj * p + ii;
                    for kk in 0..p {
                        m[(row, jj * p + kk)] += tii[(ii, kk)];
                    }
                    for ll in 0..q {
                        m[(row, ll * p + ii)] += sjj[(ll, jj)];
                    }
                }
            }
            let v = DMatrix::from_fn(k, 1, |r, _| rhs[(r % p, r / p)]);
            let sol = m.lu().solve(&v).ok_or(SsError::Singular("Sylvester block"))?;
            if sol.iter().any(|x| !x.is_finite()) {
                return Err(SsError::Singular("Sylvester block"));
            }
            for jj in 0..q {
                for ii in 0..p {
                    y[(i0 + ii, j0 + jj)] = sol[(jj * p + ii, 0)];
                }
            }
        }
    }
    Ok(y)
}

/// Solve the Sylvester equation `A X + X B = C` (Bartels-Stewart).
pub fn sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Ok(DMatrix::zeros(a.nrows(), b.nrows()));
    }
    let (u, t) = real_schur(a)?;
    let (v, s) = real_schur(b)?;
    let ct = u.transpose() * c * &v;
    let y = quasi_triangular_sylvester(&t, &s, &ct)?;
    Ok(u * y * v.transpose())
}

/// Solve `A X + X A' + Q = 0`.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let (u, t) = real_schur(a)?;
    let ct = -(u.transpose() * q * &u);
    let tt = t.transpose();
    // T Y + Y T' = C with T' lower triangular: flip the ordering of T' to make it upper.
    let rev = DMatrix::from_fn(n, n, |i, j| if i + j == n - 1 { 1.0 } else { 0.0 });
    let s = &rev * tt * &rev;
    let y = quasi_triangular_sylvester(&t, &s, &(&ct * &rev))? * &rev;
    let x = &u * y * u.transpose();
    // One refinement step against roundoff.
    let r = a * &x + &x * a.transpose() + q;
    let y2 = quasi_triangular_sylvester(&t, &s, &(-(u.transpose() * r * &u) * &rev))? * &rev;
    Ok(sym(&(x + &u * y2 * u.transpose())))
}

/// Least-squares / minimum-norm solve via SVD.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = SVD::new(a.clone(), true, true);
    let tol = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * svd.singular_values.max();
    svd.solve(b, tol).map_err(|_| SsError::Singular("least squares"))
}

/// Symmetric positive-semidefinite square-root factor `L` with `P = L L'`.
pub fn psd_factor(p: &DMatrix<f64>) -> DMatrix<f64> {
    let e = nalgebra::SymmetricEigen::new(sym(p));
    let mut l = e.eigenvectors.clone();
    for (j, lam) in e.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    l
}

pub fn min_sym_eig(p: &DMatrix<f64>) -> f64 {
    if p.nrows() == 0 {
        return 0.0;
    }
    nalgebra::SymmetricEigen::new(sym(p)).eigenvalues.min()
}

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

/// Log-spaced frequency grid of `n` points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n.max(2) - 1) as f64))
        .collect()
}
