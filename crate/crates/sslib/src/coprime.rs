//! Left coprime factorizations of plants and controllers.

use nalgebra::DMatrix;

use crate::error::{Result, SsError};
use crate::linalg::{self, max_sv_complex};
use crate::riccati::care_solve;
use crate::statespace::{Channels, StateSpace};

/// Left coprime factors `P_uy = M^-1 N`, `P_dy = M^-1 N_d`, `P_fy = M^-1 N_f` sharing one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct CoprimeFactors {
    /// Output-injection gain with `A + L C` stable.
    pub l: DMatrix<f64>,
    pub m: StateSpace,
    pub n: StateSpace,
    pub n_d: StateSpace,
    pub n_f: StateSpace,
}

/// Controller factors `K = V^-1 U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerFactors {
    pub l: DMatrix<f64>,
    pub v: StateSpace,
    pub u: StateSpace,
}

/// Output-injection gain from the filter Riccati equation with unit weights.
pub fn observer_gain(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, c.nrows()));
    }
    let p = c.nrows();
    let y = care_solve(&a.transpose(), &c.transpose(), &DMatrix::identity(n, n), &DMatrix::identity(p, p))
        .map_err(|_| SsError::NotDetectable)?;
    Ok(-(y * c.transpose()))
}

fn factor_block(sys: &StateSpace, l: &DMatrix<f64>, cols: std::ops::Range<usize>, name: &str) -> Result<StateSpace> {
    let n = sys.nstates();
    let b = sys.b.view((0, cols.start), (n, cols.len())).into_owned();
    let d = sys.d.view((0, cols.start), (sys.noutputs(), cols.len())).into_owned();
    StateSpace::new(&sys.a + l * &sys.c, b + l * &d, sys.c.clone(), d)?
        .with_inputs(Channels::single(name, cols.len()))?
        .with_outputs(sys.outputs.clone())
}

/// Factor with a given injection gain `l`; `A + L C` must be stable.
pub fn left_coprime_with_gain(p: &StateSpace, l: &DMatrix<f64>) -> Result<CoprimeFactors> {
    let n = p.nstates();
    let ny = p.noutputs();
    if l.shape() != (n, ny) {
        return Err(SsError::Dimension("injection gain shape".into()));
    }
    let af = &p.a + l * &p.c;
    if n > 0 && !linalg::is_hurwitz(&af, 1e-9) {
        return Err(SsError::NotDetectable);
    }
    let span = |name: &str| p.inputs.range(name).unwrap_or(0..0);
    let u = if p.inputs.contains("u") { span("u") } else { 0..p.ninputs() };
    let m = StateSpace::new(af.clone(), l.clone(), p.c.clone(), DMatrix::identity(ny, ny))?
        .with_inputs(p.outputs.clone())?
        .with_outputs(p.outputs.clone())?;
    Ok(CoprimeFactors {
        l: l.clone(),
        m,
        n: factor_block(p, l, u, "u")?,
        n_d: factor_block(p, l, span("d"), "d")?,
        n_f: factor_block(p, l, span("f"), "f")?,
    })
}

/// Left coprime factorization with the unit-weight filter Riccati gain.
///
/// Inputs are taken from the channel groups `u`, `d`, `f`; a system without a `u`
/// group is factored over all of its inputs.
pub fn left_coprime_factorize(p: &StateSpace) -> Result<CoprimeFactors> {
    let l = observer_gain(&p.a, &p.c)?;
    left_coprime_with_gain(p, &l)
}

/// `K = V^-1 U` with `V = (A+LC, L, C, I)`, `U = (A+LC, B+LD, C, D)`.
pub fn coprime_controller(k: &StateSpace) -> Result<ControllerFactors> {
    let l = observer_gain(&k.a, &k.c)?;
    coprime_controller_with_gain(k, &l)
}

pub fn coprime_controller_with_gain(k: &StateSpace, l: &DMatrix<f64>) -> Result<ControllerFactors> {
    let af = &k.a + l * &k.c;
    if k.nstates() > 0 && !linalg::is_hurwitz(&af, 1e-9) {
        return Err(SsError::NotDetectable);
    }
    let nu = k.noutputs();
    let v = StateSpace::new(af.clone(), l.clone(), k.c.clone(), DMatrix::identity(nu, nu))?
        .with_inputs(k.outputs.clone())?
        .with_outputs(k.outputs.clone())?;
    let u = StateSpace::new(af, &k.b + l * &k.d, k.c.clone(), k.d.clone())?
        .with_inputs(k.inputs.clone())?
        .with_outputs(k.outputs.clone())?;
    Ok(ControllerFactors { l: l.clone(), v, u })
}

/// `max_w sigma(N(jw) - M(jw) P(jw))` over `freqs`; valid for unstable `P` as well.
pub fn factor_residual(n: &StateSpace, m: &StateSpace, p: &StateSpace, freqs: &[f64]) -> f64 {
    freqs
        .iter()
        .map(|&w| {
            let r = n.freq_resp(w) - m.freq_resp(w) * p.freq_resp(w);
            max_sv_complex(&r)
        })
        .fold(0.0, f64::max)
}
