//! Generalized internal model control: compensator design, runtime and scheduling.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sslib::linalg::{blkdiag, block};
use sslib::{balanced_truncate, hinf_norm, hinf_synthesize, lft_close, Channels, CoprimeFactors, DiscreteBlock, GeneralizedPlant, HinfOptions, SsError, StateSpace};
use thiserror::Error;

use crate::controller::{feedback_state_matrix, NominalDesign};
use crate::fdi::{constrained_equilibrium, residual_scaling, FdiDesign, FdiError, ResidualObserver, ResidualState};
use crate::plant::{LinearPlantModel, PointLabel};

#[derive(Debug, Error)]
pub enum GimcError {
    #[error("closed loop is not internally stable")]
    UnstableLoop,
    #[error("compensator synthesis failed: {0}")]
    NotSynthesizable(String),
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("invalid compensator settings: {0}")]
    InvalidSettings(String),
}

impl From<SsError> for GimcError {
    fn from(e: SsError) -> Self {
        GimcError::NotSynthesizable(e.to_string())
    }
}

impl From<FdiError> for GimcError {
    fn from(e: FdiError) -> Self {
        GimcError::NotSynthesizable(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GimcSettings {
    pub alpha_d: f64,
    pub alpha_f: f64,
    /// Air-flow scale (kg/s) of the normalized disturbance input.
    pub disturbance_scale: f64,
    /// Largest order of a reduced compensator.
    pub max_order: usize,
    /// Largest relative cost increase accepted from order reduction.
    pub max_loss: f64,
    /// Compensator effort penalty and residual noise level in the design plant.
    pub regularization: f64,
    /// Weights on (N_c, alpha) in the sensor-fault program.
    pub sensor_u_weight: [f64; 2],
    /// Scheduling hysteresis around the midpoint between two points (kPa).
    pub hysteresis: f64,
}

impl Default for GimcSettings {
    fn default() -> Self {
        GimcSettings { alpha_d: 1.0, alpha_f: 1.0, disturbance_scale: 0.005, max_order: 12, max_loss: 0.05, regularization: 3e-2, sensor_u_weight: [1.0, 10.0], hysteresis: 10.0 }
    }
}

impl GimcSettings {
    pub fn validate(&self) -> Result<(), GimcError> {
        for a in [self.alpha_d, self.alpha_f] {
            if !(0.0..=1.0).contains(&a) {
                return Err(GimcError::InvalidSettings(format!("weighting factor {a} outside [0, 1]")));
            }
        }
        if self.sensor_u_weight.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(GimcError::InvalidSettings("sensor input weights must be positive".into()));
        }
        if !(self.disturbance_scale > 0.0) || !(self.regularization > 0.0) || self.max_order == 0 || !(self.max_loss >= 0.0) || !(self.hysteresis >= 0.0) {
            return Err(GimcError::InvalidSettings("scale, order, loss and hysteresis must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QKind {
    Actuator,
    Sensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QDesign {
    /// Compensator `f_e -> q`.
    pub q: StateSpace,
    pub kind: QKind,
    pub alpha_d: f64,
    pub alpha_f: f64,
    pub full_order: usize,
    pub reduced_order: usize,
    /// Program cost with `Q = 0`.
    pub baseline: f64,
    pub full_cost: f64,
    /// Cost after order reduction.
    pub reduced_cost: f64,
    /// Cost of the delivered compensator.
    pub cost: f64,
    /// Truncation bound `2 sum(discarded HSV)`.
    pub error_bound: f64,
}

pub struct Sensitivities {
    pub s_i: StateSpace,
    pub s_o: StateSpace,
    pub t_o: StateSpace,
}

/// `S_i = (I + K P)^-1`, `S_o = (I + P K)^-1`, `T_o = I - S_o`.
pub fn sensitivities(p_uy: &StateSpace, k: &StateSpace) -> Result<Sensitivities, GimcError> {
    if p_uy.ninputs() != k.noutputs() || p_uy.noutputs() != k.ninputs() {
        return Err(GimcError::ChannelMismatch("loop dimensions".into()));
    }
    let cl = feedback_state_matrix(p_uy, k).map_err(|e| GimcError::NotSynthesizable(e.to_string()))?;
    if !sslib::linalg::is_hurwitz(&cl, 0.0) {
        return Err(GimcError::UnstableLoop);
    }
    let (p, m) = (p_uy.noutputs(), p_uy.ninputs());
    let s_o = StateSpace::identity(p).add(&p_uy.mul(k)?)?.inverse()?;
    let s_i = StateSpace::identity(m).add(&k.mul(p_uy)?)?.inverse()?;
    let t_o = StateSpace::identity(p).sub(&s_o)?;
    Ok(Sensitivities { s_i, s_o, t_o })
}

/// Controller realization with inputs `[e, q]` solving `V u = U e - q`.
pub fn gimc_realization(nominal: &NominalDesign) -> Result<StateSpace, GimcError> {
    let k = &nominal.k;
    let l = &nominal.factors.l;
    let nu = k.noutputs();
    Ok(StateSpace::new(k.a.clone(), block(&[&[&k.b, l]]), k.c.clone(), block(&[&[&k.d, &(-DMatrix::<f64>::identity(nu, nu))]]))?
        .with_inputs(Channels::new([("e", k.ninputs()), ("q", nu)]))?
        .with_outputs(Channels::single("u", nu))?)
}

/// Nominal closed loop from `[d, f, q]` to `[y, u]` with `y` the two tracked outputs.
pub fn closed_loop_blocks(lin: &LinearPlantModel, nominal: &NominalDesign) -> Result<StateSpace, GimcError> {
    let s = &lin.sys;
    let mis = |m: &str| GimcError::ChannelMismatch(m.into());
    let ur = s.inputs.range("u").ok_or_else(|| mis("no u group"))?;
    let dr = s.inputs.range("d").ok_or_else(|| mis("no d group"))?;
    let fr = s.inputs.range("f").ok_or_else(|| mis("no f group"))?;
    let cols = |r: &std::ops::Range<usize>, m: &DMatrix<f64>| m.columns(r.start, r.len()).into_owned();
    let n = s.nstates();
    let (nu, nd, nf) = (ur.len(), dr.len(), fr.len());
    let c = s.c.rows(0, 2).into_owned();
    let d2 = s.d.rows(0, 2).into_owned();
    let (du, dd, df) = (cols(&ur, &d2), cols(&dr, &d2), cols(&fr, &d2));
    let z = |r: usize, c: usize| DMatrix::<f64>::zeros(r, c);
    let i = DMatrix::<f64>::identity(nu, nu);
    let b1 = block(&[&[&cols(&dr, &s.b), &cols(&fr, &s.b), &z(n, nu)]]);
    let c1 = block(&[&[&c], &[&z(nu, n)]]);
    let d11 = block(&[&[&dd, &df, &z(2, nu)], &[&z(nu, nd), &z(nu, nf), &z(nu, nu)]]);
    let d12 = block(&[&[&du], &[&i]]);
    let c2 = block(&[&[&(-&c)], &[&z(nu, n)]]);
    let d21 = block(&[&[&(-&dd), &(-&df), &z(2, nu)], &[&z(nu, nd), &z(nu, nf), &i]]);
    let d22 = block(&[&[&(-&du)], &[&z(nu, nu)]]);
    let sys = StateSpace::new(
        s.a.clone(),
        block(&[&[&b1, &cols(&ur, &s.b)]]),
        block(&[&[&c1], &[&c2]]),
        block(&[&[&d11, &d12], &[&d21, &d22]]),
    )?
    .with_inputs(Channels::new([("d", nd), ("f", nf), ("q", nu), ("u", nu)]))?
    .with_outputs(Channels::new([("y", 2), ("u", nu), ("meas", 2 + nu)]))?;
    let g = GeneralizedPlant::new(sys, nd + nf + nu, 2 + nu)?;
    let cl = lft_close(&g, &gimc_realization(nominal)?)?;
    if !cl.is_stable() {
        return Err(GimcError::UnstableLoop);
    }
    Ok(cl)
}

/// Stack systems vertically over one shared input vector; `parts[i].1` maps it to the inputs of `parts[i].0`.
fn stack_outputs(parts: &[(StateSpace, DMatrix<f64>)]) -> Result<StateSpace, GimcError> {
    let mut a = DMatrix::zeros(0, 0);
    let mut c = DMatrix::zeros(0, 0);
    let mut b: Option<DMatrix<f64>> = None;
    let mut d: Option<DMatrix<f64>> = None;
    for (g, e) in parts {
        if g.ninputs() != e.nrows() {
            return Err(GimcError::ChannelMismatch("input map does not match".into()));
        }
        a = blkdiag(&a, &g.a);
        c = blkdiag(&c, &g.c);
        let (gb, gd) = (&g.b * e, &g.d * e);
        b = Some(match b {
            None => gb,
            Some(prev) => sslib::linalg::vstack(&prev, &gb),
        });
        d = Some(match d {
            None => gd,
            Some(prev) => sslib::linalg::vstack(&prev, &gd),
        });
    }
    let (b, d) = (b.expect("at least one part"), d.expect("at least one part"));
    Ok(StateSpace::new(a, b, c, d)?)
}

/// Row-selection matrix picking `idx` out of `n` with gains.
fn picker(n: usize, idx: &[(usize, f64)]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(idx.len(), n);
    for (r, &(j, g)) in idx.iter().enumerate() {
        m[(r, j)] = g;
    }
    m
}

/// Compensator design plant `G_Q`; the measured residual is scaled by `scale`.
///
/// Actuator: `z = y` for `w = (alpha_d d, alpha_f f_N)`.
/// Sensor: `z = (alpha_d y_d, alpha_f u_f)` where `y_d` is the output response to `d` and `q`,
/// `u_f` the control response to `f_p` and `q`.
pub fn q_design_plant(
    kind: QKind,
    t: &StateSpace,
    factors: &CoprimeFactors,
    settings: &GimcSettings,
    scale: &DMatrix<f64>,
) -> Result<GeneralizedPlant, GimcError> {
    let nu = 2;
    let (ny_t, nt_in) = (t.noutputs(), t.ninputs());
    if nt_in != 5 || ny_t != 4 {
        return Err(GimcError::ChannelMismatch("closed loop must map [d, f, q] to [y, u]".into()));
    }
    let p = factors.n_f.noutputs();
    let sd = settings.disturbance_scale;
    let (ad, af) = (settings.alpha_d, settings.alpha_f);
    let fcol = match kind {
        QKind::Actuator => 0,
        QKind::Sensor => 1,
    };
    // Global input vector: [d_norm, f, q1, q2].
    let nin = 2 + nu;
    let nf = StateSpace::new(
        factors.n_d.a.clone(),
        block(&[&[&factors.n_d.b, &factors.n_f.b.columns(fcol, 1).into_owned()]]),
        factors.n_d.c.clone(),
        block(&[&[&factors.n_d.d, &factors.n_f.d.columns(fcol, 1).into_owned()]]),
    )?
    .scale_outputs(scale)?;
    let q_idx = [(2, 1.0), (3, 1.0)];
    let (z_sys, meas_map) = match kind {
        QKind::Actuator => {
            // Columns of T are [d, f_N, f_p, q1, q2]; f_p is not an input here.
            let ty = t.select(0..5, 0..2)?;
            let e = picker(nin, &[(0, ad * sd), (1, af), (0, 0.0), q_idx[0], q_idx[1]]);
            (vec![(ty, e)], picker(nin, &[(0, ad * sd), (1, af)]))
        }
        QKind::Sensor => {
            let td = t.select(0..1, 0..2)?.hstack_with(&t.select(3..5, 0..2)?)?.scale_outputs(&(DMatrix::identity(2, 2) * ad))?;
            let wu = DMatrix::from_diagonal(&DVector::from_row_slice(&settings.sensor_u_weight)) * af;
            let tf = t.select(2..5, 2..4)?.scale_outputs(&wu)?;
            (
                vec![
                    (td, picker(nin, &[(0, sd), q_idx[0], q_idx[1]])),
                    (tf, picker(nin, &[(1, 1.0), q_idx[0], q_idx[1]])),
                ],
                picker(nin, &[(0, sd), (1, 1.0)]),
            )
        }
    };
    let mut parts = z_sys;
    parts.push((nf, meas_map));
    // The stacked realization repeats the loop modes; keep a minimal balanced one.
    let sys = sslib::balanced_realization(&stack_outputs(&parts)?)?;
    let nz = sys.noutputs() - p;
    let sys = sys
        .with_inputs(Channels::new([("w", 2), ("q", nu)]))?
        .with_outputs(Channels::new([("z", nz), ("fe", p)]))?;
    Ok(GeneralizedPlant::new(sys, 2, nz)?)
}

trait HstackWith {
    fn hstack_with(&self, other: &StateSpace) -> Result<StateSpace, SsError>;
}

impl HstackWith for StateSpace {
    /// Horizontal concatenation of two selections of one realization.
    fn hstack_with(&self, other: &StateSpace) -> Result<StateSpace, SsError> {
        if self.a != other.a || self.c != other.c {
            return Err(SsError::Dimension("selections must share a realization".into()));
        }
        StateSpace::new(self.a.clone(), sslib::linalg::hstack(&self.b, &other.b), self.c.clone(), sslib::linalg::hstack(&self.d, &other.d))
    }
}

/// Program cost of a compensator acting on the unscaled residual.
pub fn q_cost(g: &GeneralizedPlant, q_scaled: &StateSpace) -> Result<f64, GimcError> {
    Ok(hinf_norm(&lft_close(g, q_scaled)?, 1e-6)?)
}

/// Design and reduce the compensator for one fault class.
pub fn design_q(
    kind: QKind,
    lin: &LinearPlantModel,
    nominal: &NominalDesign,
    factors: &CoprimeFactors,
    settings: &GimcSettings,
    opts: &HinfOptions,
) -> Result<QDesign, GimcError> {
    settings.validate()?;
    let t = closed_loop_blocks(lin, nominal)?;
    let scale = residual_scaling(factors)?;
    let g = q_design_plant(kind, &t, factors, settings, &scale)?;
    let p = factors.n_f.noutputs();
    let baseline = q_cost(&g, &StateSpace::zero(2, p))?;
    let res = hinf_synthesize(&g, &HinfOptions { regularization: settings.regularization, ..opts.clone() })?;
    let full = res.k;
    let full_cost = q_cost(&g, &full)?;
    if !(full_cost < baseline) {
        return Err(GimcError::NotSynthesizable(format!("cost {full_cost} does not improve on {baseline}")));
    }
    let n = full.nstates();
    let allowed = full_cost * (1.0 + settings.max_loss);
    let mut chosen = None;
    for r in 1..=settings.max_order.min(n) {
        let tr = balanced_truncate(&full, r)?;
        if !tr.reduced.is_stable() {
            continue;
        }
        if let Ok(cost) = q_cost(&g, &tr.reduced) {
            if cost <= allowed {
                chosen = Some((tr, cost));
                break;
            }
        }
    }
    let (tr, reduced_cost) = chosen.ok_or_else(|| GimcError::NotSynthesizable(format!("no compensator of order <= {} within the loss bound", settings.max_order)))?;
    let mut q_scaled = tr.reduced.clone();
    if kind == QKind::Actuator {
        let nf = factors.n_f.dc_gain()?.columns(0, 1).into_owned();
        let nd = factors.n_d.dc_gain()?;
        q_scaled.d += actuator_dc_correction(&t.dc_gain()?, &q_scaled.dc_gain()?, &(&scale * nf), &(&scale * nd))?;
    }
    let cost = q_cost(&g, &q_scaled)?;
    if !(cost < baseline) {
        return Err(GimcError::NotSynthesizable(format!("reduced cost {cost} does not improve on {baseline}")));
    }
    let q = q_scaled.scale_inputs(&scale)?.with_inputs(Channels::single("fe", p))?.with_outputs(Channels::single("q", 2))?;
    Ok(QDesign {
        q,
        kind,
        alpha_d: settings.alpha_d,
        alpha_f: settings.alpha_f,
        full_order: n,
        reduced_order: tr.reduced.nstates(),
        baseline,
        full_cost,
        reduced_cost,
        cost,
        error_bound: tr.error_bound,
    })
}

/// Static term making the steady-state output response to `f_N` and `d` vanish.
///
/// `t0` is the loop gain at s = 0 with columns `[d, f_N, f_p, q1, q2]` and rows `[y1, y2, u1, u2]`;
/// `nf0`, `nd0` are the residual gains of `f_N` and `d` as seen by `q0`.
pub fn actuator_dc_correction(t0: &DMatrix<f64>, q0: &DMatrix<f64>, nf0: &DMatrix<f64>, nd0: &DMatrix<f64>) -> Result<DMatrix<f64>, GimcError> {
    let tqy = t0.view((0, 3), (2, 2)).into_owned();
    let n = sslib::linalg::hstack(nf0, nd0);
    let w = sslib::linalg::hstack(&t0.view((0, 1), (2, 1)).into_owned(), &t0.view((0, 0), (2, 1)).into_owned());
    let r = -(w + &tqy * q0 * &n);
    let tqy_inv = tqy.try_inverse().ok_or_else(|| GimcError::NotSynthesizable("compensation path has no static gain".into()))?;
    // Minimum-norm X with X n = tqy^-1 r.
    let m = tqy_inv * r;
    let xt = sslib::linalg::lstsq(&n.transpose(), &m.transpose())?;
    Ok(xt.transpose())
}

pub fn design_q_actuator(
    lin: &LinearPlantModel,
    nominal: &NominalDesign,
    factors: &CoprimeFactors,
    settings: &GimcSettings,
    opts: &HinfOptions,
) -> Result<QDesign, GimcError> {
    design_q(QKind::Actuator, lin, nominal, factors, settings, opts)
}

pub fn design_q_sensor(
    lin: &LinearPlantModel,
    nominal: &NominalDesign,
    factors: &CoprimeFactors,
    settings: &GimcSettings,
    opts: &HinfOptions,
) -> Result<QDesign, GimcError> {
    design_q(QKind::Sensor, lin, nominal, factors, settings, opts)
}

/// Complete design set at one operating point.
#[derive(Debug, Clone)]
pub struct SchedulePoint {
    pub label: PointLabel,
    pub lin: LinearPlantModel,
    pub nominal: NominalDesign,
    pub factors: CoprimeFactors,
    pub fdi: FdiDesign,
    /// Compensators; `None` when the program has no admissible reduced solution.
    pub q_act: Option<QDesign>,
    pub q_sen: Option<QDesign>,
    /// Scheduling-variable value of the point (kPa).
    pub p_e_ref: f64,
}

/// Nearest point to `var` (clamped to the span), switching away from `current` only once
/// `var` is more than `hysteresis` past the midpoint between the two points.
pub fn schedule_select(centers: &[f64], var: f64, current: Option<usize>, hysteresis: f64) -> usize {
    assert!(!centers.is_empty(), "no schedule points");
    let lo = centers.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = centers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v = var.clamp(lo, hi);
    let nearest = (0..centers.len())
        .min_by(|&a, &b| (centers[a] - v).abs().total_cmp(&(centers[b] - v).abs()))
        .expect("non-empty");
    match current {
        Some(c) if c != nearest && c < centers.len() => {
            // Past the midpoint by the band means the distance gap exceeds twice the band.
            if (centers[c] - v).abs() - (centers[nearest] - v).abs() > 2.0 * hysteresis {
                nearest
            } else {
                c
            }
        }
        _ => nearest,
    }
}

/// How the compensation signal is routed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Gating {
    /// Compensator chosen by the latched isolation flags.
    #[default]
    Flags,
    /// Actuator compensator always connected.
    AlwaysActuator,
    /// Sensor compensator always connected.
    AlwaysSensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    Nominal,
    Compensating(QKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopOutput {
    /// Absolute actuator command.
    pub u_cmd: [f64; 2],
    pub f_e: DVector<f64>,
    pub r: [f64; 2],
    pub q: [f64; 2],
    pub flags: [bool; 2],
}

/// Residual generator with isolation filter and latched flags.
#[derive(Debug, Clone)]
pub struct FdiMonitor {
    observer: ResidualObserver,
    pub state: ResidualState,
    u0: DVector<f64>,
    y0: DVector<f64>,
}

impl FdiMonitor {
    pub fn new(point: &SchedulePoint, debounce: f64, dt: f64) -> Result<Self, GimcError> {
        Ok(FdiMonitor {
            observer: ResidualObserver::new(&point.lin.p_uy()?, &point.factors.l, dt)?,
            state: ResidualState::new(&point.fdi, debounce, dt)?,
            u0: trim_inputs(point),
            y0: point.lin.y0(),
        })
    }

    /// Residual for absolute output `y` and the command applied over the last step; filters it.
    pub fn sense(&mut self, t: f64, y: &DVector<f64>, u_prev: [f64; 2]) -> (DVector<f64>, [f64; 2]) {
        let f_e = self.observer.residual(&(y - &self.y0), &(DVector::from_row_slice(&u_prev) - &self.u0));
        let r = self.state.step(&f_e, t);
        (f_e, r)
    }

    /// Propagate the observer with the absolute command held over the next step.
    pub fn advance(&mut self, u: [f64; 2], f_e: &DVector<f64>) {
        self.observer.advance(&(DVector::from_row_slice(&u) - &self.u0), f_e);
    }

    fn reinitialize(&mut self, y: &DVector<f64>, u: [f64; 2]) -> Result<(), GimcError> {
        self.observer.align(&(y - &self.y0), &(DVector::from_row_slice(&u) - &self.u0))?;
        self.state.filter.reset();
        Ok(())
    }

    pub fn flags(&self) -> [bool; 2] {
        self.state.flags
    }
}

fn trim_inputs(point: &SchedulePoint) -> DVector<f64> {
    DVector::from_row_slice(&[point.lin.trim.inputs.n_c, point.lin.trim.inputs.alpha])
}

fn tracking_error(reference: [f64; 2], y: &DVector<f64>) -> DVector<f64> {
    DVector::from_row_slice(&[reference[0] - y[0], reference[1] - y[1]])
}

/// Controller state with `C x = u - D_e e` and minimal drift `A x + B_e e`.
fn bumpless_state(k: &StateSpace, e: &DVector<f64>, u_dev: &DVector<f64>) -> Result<DVector<f64>, GimcError> {
    let ne = e.len();
    let be = k.b.columns(0, ne).into_owned();
    let de = k.d.columns(0, ne).into_owned();
    Ok(constrained_equilibrium(&k.a, &(&be * e), &k.c, &(u_dev - &de * e))?)
}

/// A sampled feedback loop controller working on absolute signals.
pub trait LoopController {
    /// One sample: `reference` (p_e, SH), measured outputs `y`, command applied over the last step.
    /// The caller reports the command actually applied through [`LoopController::commit`].
    fn step(&mut self, t: f64, reference: [f64; 2], y: &DVector<f64>, u_prev: [f64; 2]) -> LoopOutput;
    /// Restart so that the command continues from `u` and the residual from zero.
    fn reinitialize(&mut self, reference: [f64; 2], y: &DVector<f64>, u: [f64; 2]) -> Result<(), GimcError>;
    fn monitor(&self) -> &FdiMonitor;
    fn monitor_mut(&mut self) -> &mut FdiMonitor;

    /// Propagate the residual generator with the command held over the next step.
    fn commit(&mut self, u_applied: [f64; 2], f_e: &DVector<f64>) {
        self.monitor_mut().advance(u_applied, f_e);
    }

    /// Take over latched flags from the previously active controller.
    fn inherit_flags(&mut self, from: &FdiMonitor) {
        let st = &mut self.monitor_mut().state;
        st.flags = from.state.flags;
        st.onset = from.state.onset;
    }
}

/// Nominal controller alone, with the isolation filter running alongside.
#[derive(Debug, Clone)]
pub struct NominalController {
    k: DiscreteBlock,
    k_cont: StateSpace,
    monitor: FdiMonitor,
    u0: DVector<f64>,
}

impl NominalController {
    pub fn new(point: &SchedulePoint, debounce: f64, dt: f64) -> Result<Self, GimcError> {
        Ok(NominalController {
            k: DiscreteBlock::new(&point.nominal.k, dt)?,
            k_cont: point.nominal.k.clone(),
            monitor: FdiMonitor::new(point, debounce, dt)?,
            u0: trim_inputs(point),
        })
    }
}

impl LoopController for NominalController {
    fn step(&mut self, t: f64, reference: [f64; 2], y: &DVector<f64>, u_prev: [f64; 2]) -> LoopOutput {
        let (f_e, r) = self.monitor.sense(t, y, u_prev);
        let u = self.k.step(&tracking_error(reference, y)) + &self.u0;
        let u_cmd = [u[0], u[1]];
        LoopOutput { u_cmd, f_e, r, q: [0.0; 2], flags: self.monitor.flags() }
    }

    fn reinitialize(&mut self, reference: [f64; 2], y: &DVector<f64>, u: [f64; 2]) -> Result<(), GimcError> {
        let u_dev = DVector::from_row_slice(&u) - &self.u0;
        self.k.x = bumpless_state(&self.k_cont, &tracking_error(reference, y), &u_dev)?;
        self.monitor.reinitialize(y, u)
    }

    fn monitor(&self) -> &FdiMonitor {
        &self.monitor
    }

    fn monitor_mut(&mut self) -> &mut FdiMonitor {
        &mut self.monitor
    }
}

/// Sampled GIMC loop at one schedule point.
#[derive(Debug, Clone)]
pub struct GimcController {
    k: DiscreteBlock,
    k_cont: StateSpace,
    monitor: FdiMonitor,
    q_act: DiscreteBlock,
    q_sen: DiscreteBlock,
    pub gating: Gating,
    pub mode: ControllerMode,
    u0: DVector<f64>,
}

impl GimcController {
    pub fn new(point: &SchedulePoint, gating: Gating, debounce: f64, dt: f64) -> Result<Self, GimcError> {
        let missing = |what: &str| GimcError::InvalidSettings(format!("no {what} compensator at the {} point", point.label.name()));
        let q_act = point.q_act.as_ref().ok_or_else(|| missing("actuator"))?;
        let q_sen = point.q_sen.as_ref().ok_or_else(|| missing("sensor"))?;
        let k_cont = gimc_realization(&point.nominal)?;
        Ok(GimcController {
            k: DiscreteBlock::new(&k_cont, dt)?,
            k_cont,
            monitor: FdiMonitor::new(point, debounce, dt)?,
            q_act: DiscreteBlock::new(&q_act.q, dt)?,
            q_sen: DiscreteBlock::new(&q_sen.q, dt)?,
            gating,
            mode: ControllerMode::Nominal,
            u0: trim_inputs(point),
        })
    }
}

impl LoopController for GimcController {
    fn step(&mut self, t: f64, reference: [f64; 2], y: &DVector<f64>, u_prev: [f64; 2]) -> LoopOutput {
        let (f_e, r) = self.monitor.sense(t, y, u_prev);
        let qa = self.q_act.step(&f_e);
        let qs = self.q_sen.step(&f_e);
        let flags = self.monitor.flags();
        self.mode = match self.gating {
            Gating::AlwaysActuator => ControllerMode::Compensating(QKind::Actuator),
            Gating::AlwaysSensor => ControllerMode::Compensating(QKind::Sensor),
            Gating::Flags if flags[0] => ControllerMode::Compensating(QKind::Actuator),
            Gating::Flags if flags[1] => ControllerMode::Compensating(QKind::Sensor),
            Gating::Flags => ControllerMode::Nominal,
        };
        let q = match self.mode {
            ControllerMode::Nominal => DVector::zeros(2),
            ControllerMode::Compensating(QKind::Actuator) => qa,
            ControllerMode::Compensating(QKind::Sensor) => qs,
        };
        let e = tracking_error(reference, y);
        let input = DVector::from_iterator(4, e.iter().chain(q.iter()).copied());
        let u = self.k.step(&input) + &self.u0;
        let u_cmd = [u[0], u[1]];
        LoopOutput { u_cmd, f_e, r, q: [q[0], q[1]], flags }
    }

    /// Compensator and filter states are cleared; latched flags are kept.
    fn reinitialize(&mut self, reference: [f64; 2], y: &DVector<f64>, u: [f64; 2]) -> Result<(), GimcError> {
        let u_dev = DVector::from_row_slice(&u) - &self.u0;
        self.k.x = bumpless_state(&self.k_cont, &tracking_error(reference, y), &u_dev)?;
        self.q_act.reset();
        self.q_sen.reset();
        self.monitor.reinitialize(y, u)
    }

    fn monitor(&self) -> &FdiMonitor {
        &self.monitor
    }

    fn monitor_mut(&mut self) -> &mut FdiMonitor {
        &mut self.monitor
    }
}
