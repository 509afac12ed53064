//! Generalized plants and the lower linear fractional transformation.

use nalgebra::DMatrix;

use crate::error::{Result, SsError};
use crate::linalg;
use crate::statespace::{Channels, StateSpace};

/// A state-space system whose inputs split into `[w; u]` and outputs into `[z; y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPlant {
    pub sys: StateSpace,
    /// Number of exogenous inputs `w` (the leading inputs).
    pub nw: usize,
    /// Number of performance outputs `z` (the leading outputs).
    pub nz: usize,
}

/// Partitioned realization `(A, B1, B2, C1, C2, D11, D12, D21, D22)`.
#[derive(Debug, Clone)]
pub struct Partition {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub d11: DMatrix<f64>,
    pub d12: DMatrix<f64>,
    pub d21: DMatrix<f64>,
    pub d22: DMatrix<f64>,
}

impl GeneralizedPlant {
    pub fn new(sys: StateSpace, nw: usize, nz: usize) -> Result<Self> {
        if nw > sys.ninputs() || nz > sys.noutputs() {
            return Err(SsError::Dimension(format!(
                "partition w={nw}, z={nz} exceeds {} inputs / {} outputs",
                sys.ninputs(),
                sys.noutputs()
            )));
        }
        Ok(GeneralizedPlant { sys, nw, nz })
    }

    pub fn nu(&self) -> usize {
        self.sys.ninputs() - self.nw
    }

    pub fn ny(&self) -> usize {
        self.sys.noutputs() - self.nz
    }

    pub fn partition(&self) -> Partition {
        let s = &self.sys;
        let n = s.nstates();
        let (nw, nu, nz, ny) = (self.nw, self.nu(), self.nz, self.ny());
        Partition {
            a: s.a.clone(),
            b1: s.b.view((0, 0), (n, nw)).into_owned(),
            b2: s.b.view((0, nw), (n, nu)).into_owned(),
            c1: s.c.view((0, 0), (nz, n)).into_owned(),
            c2: s.c.view((nz, 0), (ny, n)).into_owned(),
            d11: s.d.view((0, 0), (nz, nw)).into_owned(),
            d12: s.d.view((0, nw), (nz, nu)).into_owned(),
            d21: s.d.view((nz, 0), (ny, nw)).into_owned(),
            d22: s.d.view((nz, nw), (ny, nu)).into_owned(),
        }
    }

    /// Assemble from partitioned blocks.
    pub fn from_partition(p: &Partition) -> Result<Self> {
        let b = linalg::hstack(&p.b1, &p.b2);
        let c = linalg::vstack(&p.c1, &p.c2);
        let d = linalg::block(&[&[&p.d11, &p.d12], &[&p.d21, &p.d22]]);
        let sys = StateSpace::new(p.a.clone(), b, c, d)?
            .with_inputs(Channels::new([("w", p.b1.ncols()), ("u", p.b2.ncols())]))?
            .with_outputs(Channels::new([("z", p.c1.nrows()), ("y", p.c2.nrows())]))?;
        GeneralizedPlant::new(sys, p.b1.ncols(), p.c1.nrows())
    }
}

/// Lower LFT `F_l(G, K)`: the closed-loop map `w -> z` with `u = K y`.
pub fn lft_close(g: &GeneralizedPlant, k: &StateSpace) -> Result<StateSpace> {
    let p = g.partition();
    let (nu, ny) = (g.nu(), g.ny());
    if k.ninputs() != ny || k.noutputs() != nu {
        return Err(SsError::Dimension(format!(
            "controller is {}x{}, plant needs {}x{}",
            k.noutputs(),
            k.ninputs(),
            nu,
            ny
        )));
    }
    let (ak, bk, ck, dk) = (&k.a, &k.b, &k.c, &k.d);
    let eye_y = DMatrix::<f64>::identity(ny, ny);
    let eye_u = DMatrix::<f64>::identity(nu, nu);
    let delta = (&eye_y - &p.d22 * dk).try_inverse().ok_or(SsError::IllPosed)?;
    let delta_t = (&eye_u - dk * &p.d22).try_inverse().ok_or(SsError::IllPosed)?;
    if delta.iter().chain(delta_t.iter()).any(|v| !v.is_finite() || v.abs() > 1e12) {
        return Err(SsError::IllPosed);
    }

    let a11 = &p.a + &p.b2 * &delta_t * dk * &p.c2;
    let a12 = &p.b2 * &delta_t * ck;
    let a21 = bk * &delta * &p.c2;
    let a22 = ak + bk * &delta * &p.d22 * ck;
    let b1 = &p.b1 + &p.b2 * &delta_t * dk * &p.d21;
    let b2 = bk * &delta * &p.d21;
    let c1 = &p.c1 + &p.d12 * &delta_t * dk * &p.c2;
    let c2 = &p.d12 * &delta_t * ck;
    let d = &p.d11 + &p.d12 * &delta_t * dk * &p.d21;

    let a = linalg::block(&[&[&a11, &a12], &[&a21, &a22]]);
    let b = linalg::vstack(&b1, &b2);
    let c = linalg::hstack(&c1, &c2);
    let mut cl = StateSpace::new(a, b, c, d)?;
    let s = &g.sys;
    cl.inputs = leading_channels(&s.inputs, g.nw);
    cl.outputs = leading_channels(&s.outputs, g.nz);
    Ok(cl)
}

/// Channel groups that lie entirely within the first `n` channels; falls back to a single group.
fn leading_channels(ch: &Channels, n: usize) -> Channels {
    let mut acc = Vec::new();
    let mut used = 0;
    for grp in ch.groups() {
        if used + grp.size > n {
            break;
        }
        acc.push((grp.name.clone(), grp.size));
        used += grp.size;
    }
    if used == n {
        Channels::new(acc)
    } else {
        Channels::single("w", n)
    }
}
