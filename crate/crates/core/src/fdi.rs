//! Fault isolation filter design and the online residual generator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sslib::linalg::{blkdiag, block};
use sslib::{hinf_norm, hinf_synthesize, lft_close, Channels, CoprimeFactors, Discrete, DiscreteBlock, GeneralizedPlant, HinfOptions, SsError, StateSpace};
use thiserror::Error;

use crate::plant::SensorSet;

#[derive(Debug, Error)]
pub enum FdiError {
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("isolation filter synthesis failed: {0}")]
    NotSynthesizable(String),
    #[error("invalid FDI settings: {0}")]
    InvalidSettings(String),
}

impl From<SsError> for FdiError {
    fn from(e: SsError) -> Self {
        FdiError::NotSynthesizable(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdiSettings {
    /// Time constant of the isolation weight `T(s) = I / (tau s + 1)`.
    pub weight_time_constant: f64,
    /// Air-flow scale (kg/s) of the disturbance input when only pressure and superheat are measured.
    pub disturbance_scale_two_outputs: f64,
    /// Air-flow scale (kg/s) of the disturbance input with the wall thermocouple added.
    pub disturbance_scale_three_outputs: f64,
    /// Threshold = factor times the largest fault-free residual magnitude.
    pub threshold_factor: f64,
    /// Lower bound on each threshold (residual units: rpm, kPa).
    pub threshold_floor: [f64; 2],
    /// Time a residual must stay above its threshold before the flag latches (s).
    pub debounce: f64,
}

impl Default for FdiSettings {
    fn default() -> Self {
        FdiSettings {
            weight_time_constant: 10.0,
            disturbance_scale_two_outputs: 1e-5,
            disturbance_scale_three_outputs: 1e-2,
            threshold_factor: 3.0,
            threshold_floor: [4.0, 0.5],
            debounce: 5.0,
        }
    }
}

impl FdiSettings {
    pub fn validate(&self) -> Result<(), FdiError> {
        let vals = [
            self.weight_time_constant,
            self.disturbance_scale_two_outputs,
            self.disturbance_scale_three_outputs,
            self.threshold_factor, self.threshold_floor[0], self.threshold_floor[1]];
        if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(self.debounce >= 0.0) {
            return Err(FdiError::InvalidSettings("weights, scales and thresholds must be positive".into()));
        }
        Ok(())
    }

    pub fn disturbance_scale(&self, set: SensorSet) -> f64 {
        match set {
            SensorSet::TwoOutputs => self.disturbance_scale_two_outputs,
            SensorSet::ThreeOutputs => self.disturbance_scale_three_outputs,
        }
    }

    pub fn weight(&self) -> StateSpace {
        let tau = self.weight_time_constant;
        let i2 = DMatrix::<f64>::identity(2, 2);
        StateSpace::new(&i2 * (-1.0 / tau), i2.clone(), &i2 * (1.0 / tau), DMatrix::zeros(2, 2)).expect("2x2 weight")
    }
}

/// Isolation filter `H_I: f_e -> r` with its design data.
#[derive(Debug, Clone, PartialEq)]
pub struct FdiDesign {
    pub h_i: StateSpace,
    pub t_weight: StateSpace,
    pub thresholds: [f64; 2],
    pub sensor_set: SensorSet,
    pub gamma: f64,
    /// Cost of the zero filter, `||T||`.
    pub baseline: f64,
}

/// Design plant: `w = (d, f)`, `u = r`, `z = T f - r`, measurement `f_e = N_d d + N_f f`.
pub fn build_fdi_plant(factors: &CoprimeFactors, t_weight: &StateSpace, disturbance_scale: f64) -> Result<GeneralizedPlant, FdiError> {
    let (nd, nf) = (&factors.n_d, &factors.n_f);
    if nf.ninputs() != 2 || nd.ninputs() != 1 {
        return Err(FdiError::ChannelMismatch("expected one disturbance and two fault inputs".into()));
    }
    if t_weight.ninputs() != 2 || t_weight.noutputs() != 2 {
        return Err(FdiError::ChannelMismatch("isolation weight must be 2x2".into()));
    }
    if nd.a != nf.a {
        return Err(FdiError::ChannelMismatch("factors must share one realization".into()));
    }
    let p = nf.noutputs();
    let (nt, n) = (t_weight.nstates(), nf.nstates());
    let z = |r: usize, c: usize| DMatrix::<f64>::zeros(r, c);
    let bd = &nd.b * disturbance_scale;
    let dd = &nd.d * disturbance_scale;
    let a = blkdiag(&t_weight.a, &nf.a);
    let b = block(&[&[&z(nt, 1), &t_weight.b, &z(nt, 2)], &[&bd, &nf.b, &z(n, 2)]]);
    let c = block(&[&[&t_weight.c, &z(2, n)], &[&z(p, nt), &nf.c]]);
    let d = block(&[&[&z(2, 1), &t_weight.d, &(-DMatrix::<f64>::identity(2, 2))], &[&dd, &nf.d, &z(p, 2)]]);
    let sys = StateSpace::new(a, b, c, d)?
        .with_inputs(Channels::new([("d", 1), ("f", 2), ("r", 2)]))?
        .with_outputs(Channels::new([("z", 2), ("fe", p)]))?;
    Ok(GeneralizedPlant::new(sys, 3, 2)?)
}

pub fn design_isolation_filter(factors: &CoprimeFactors, settings: &FdiSettings, sensor_set: SensorSet, opts: &HinfOptions) -> Result<FdiDesign, FdiError> {
    settings.validate()?;
    if factors.n_f.noutputs() != sensor_set.noutputs() {
        return Err(FdiError::ChannelMismatch("factors do not match the sensor set".into()));
    }
    let t = settings.weight();
    // Residual channels are normalized by their static fault gains so the
    // regularization acts at a comparable level on every channel.
    let scale = residual_scaling(factors)?;
    let scaled = scale_residuals(factors, &scale)?;
    let g = build_fdi_plant(&scaled, &t, settings.disturbance_scale(sensor_set))?;
    let res = hinf_synthesize(&g, opts)?;
    let h_i = res
        .k
        .scale_inputs(&scale)?
        .with_inputs(Channels::single("fe", sensor_set.noutputs()))?
        .with_outputs(Channels::single("r", 2))?;
    if !h_i.is_stable() {
        return Err(FdiError::NotSynthesizable("isolation filter is unstable".into()));
    }
    let baseline = hinf_norm(&t, 1e-6)?;
    Ok(FdiDesign { h_i, t_weight: t, thresholds: settings.threshold_floor, sensor_set, gamma: res.gamma, baseline })
}

/// Diagonal scaling `1 / max_j |N_f(0)_ij|` of the residual channels.
pub fn residual_scaling(factors: &CoprimeFactors) -> Result<DMatrix<f64>, FdiError> {
    let dc = factors.n_f.dc_gain()?;
    let mut s = DMatrix::zeros(dc.nrows(), dc.nrows());
    for i in 0..dc.nrows() {
        let g = dc.row(i).amax();
        s[(i, i)] = if g > 0.0 { 1.0 / g } else { 1.0 };
    }
    Ok(s)
}

fn scale_residuals(factors: &CoprimeFactors, s: &DMatrix<f64>) -> Result<CoprimeFactors, FdiError> {
    Ok(CoprimeFactors {
        l: factors.l.clone(),
        m: factors.m.scale_outputs(s)?,
        n: factors.n.scale_outputs(s)?,
        n_d: factors.n_d.scale_outputs(s)?,
        n_f: factors.n_f.scale_outputs(s)?,
    })
}

/// Isolation cost `||[0 T] - H_I [N_d N_f]||` for a given filter.
pub fn isolation_cost(factors: &CoprimeFactors, settings: &FdiSettings, sensor_set: SensorSet, h_i: &StateSpace) -> Result<f64, FdiError> {
    let g = build_fdi_plant(factors, &settings.weight(), settings.disturbance_scale(sensor_set))?;
    Ok(hinf_norm(&lft_close(&g, h_i)?, 1e-6)?)
}

/// Static map from faults to residuals, `H_I(0) N_f(0)`.
pub fn fault_to_residual_dc(factors: &CoprimeFactors, h_i: &StateSpace) -> Result<DMatrix<f64>, FdiError> {
    Ok(h_i.dc_gain()? * factors.n_f.dc_gain()?)
}

/// Smallest diagonal magnitude over the largest off-diagonal magnitude.
pub fn isolation_ratio(dc: &DMatrix<f64>) -> f64 {
    let n = dc.nrows().min(dc.ncols());
    let diag = (0..n).map(|i| dc[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    let mut off = 0.0f64;
    for i in 0..dc.nrows() {
        for j in 0..dc.ncols() {
            if i != j {
                off = off.max(dc[(i, j)].abs());
            }
        }
    }
    diag / off.max(f64::MIN_POSITIVE)
}

/// Thresholds from the largest fault-free residual magnitudes of a calibration suite.
pub fn calibrate_thresholds(max_abs: [f64; 2], settings: &FdiSettings) -> [f64; 2] {
    [0, 1].map(|k| (settings.threshold_factor * max_abs[k]).max(settings.threshold_floor[k]))
}

/// Sampled observer realizing `f_e = M y - N u` for inputs held over each step.
#[derive(Debug, Clone)]
pub struct ResidualObserver {
    phi: DMatrix<f64>,
    gamma_u: DMatrix<f64>,
    gamma_l: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    pub x: DVector<f64>,
}

impl ResidualObserver {
    /// `p_uy` is the plant from the control inputs to the residual outputs, `l` its injection gain.
    pub fn new(p_uy: &StateSpace, l: &DMatrix<f64>, dt: f64) -> Result<Self, FdiError> {
        let n = p_uy.nstates();
        let m = p_uy.ninputs();
        let g = StateSpace::new(p_uy.a.clone(), block(&[&[&p_uy.b, l]]), p_uy.c.clone(), DMatrix::zeros(p_uy.noutputs(), m + l.ncols()))?;
        let disc = Discrete::zoh(&g, dt)?;
        let closed = &disc.phi + disc.gamma.columns(m, l.ncols()) * &p_uy.c;
        if sslib::linalg::spectral_radius(&closed)? >= 1.0 {
            return Err(FdiError::NotSynthesizable("sampled residual observer is unstable".into()));
        }
        Ok(ResidualObserver {
            phi: disc.phi.clone(),
            gamma_u: disc.gamma.columns(0, m).into_owned(),
            gamma_l: disc.gamma.columns(m, l.ncols()).into_owned(),
            a: p_uy.a.clone(),
            b: p_uy.b.clone(),
            c: p_uy.c.clone(),
            d: p_uy.d.clone(),
            x: DVector::zeros(n),
        })
    }

    pub fn residual(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        y - &self.c * &self.x - &self.d * u
    }

    /// Advance with the input applied over the step and the residual of this sample.
    pub fn advance(&mut self, u: &DVector<f64>, f_e: &DVector<f64>) {
        self.x = &self.phi * &self.x + &self.gamma_u * u - &self.gamma_l * f_e;
    }

    /// Set the state estimate to the equilibrium closest to matching the given output.
    pub fn align(&mut self, y: &DVector<f64>, u: &DVector<f64>) -> Result<(), FdiError> {
        let target = y - &self.d * u;
        self.x = constrained_equilibrium(&self.a, &(&self.b * u), &self.c, &target)?;
        Ok(())
    }
}

/// State `x` with `C x = target` (weighted heavily) and `A x + forcing` as small as possible.
pub fn constrained_equilibrium(a: &DMatrix<f64>, forcing: &DVector<f64>, c: &DMatrix<f64>, target: &DVector<f64>) -> Result<DVector<f64>, FdiError> {
    let w = 1e6 * (1.0 + sslib::linalg::max_sv(a)) / (1.0 + sslib::linalg::max_sv(c));
    let lhs = sslib::linalg::vstack(&(c * w), a);
    let mut rhs = DVector::zeros(lhs.nrows());
    rhs.rows_mut(0, c.nrows()).copy_from(&(target * w));
    rhs.rows_mut(c.nrows(), a.nrows()).copy_from(&(-forcing));
    let sol = sslib::linalg::lstsq(&lhs, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))?;
    Ok(sol.column(0).into_owned())
}

/// Online residual evaluation with latched, debounced flags.
#[derive(Debug, Clone)]
pub struct ResidualState {
    pub filter: DiscreteBlock,
    pub thresholds: [f64; 2],
    debounce_steps: usize,
    above: [usize; 2],
    pub flags: [bool; 2],
    /// Time at which each flag latched.
    pub onset: [Option<f64>; 2],
    pub r: [f64; 2],
}

impl ResidualState {
    pub fn new(design: &FdiDesign, debounce: f64, dt: f64) -> Result<Self, FdiError> {
        Ok(ResidualState {
            filter: DiscreteBlock::new(&design.h_i, dt)?,
            thresholds: design.thresholds,
            debounce_steps: (debounce / dt).round() as usize,
            above: [0; 2],
            flags: [false; 2],
            onset: [None; 2],
            r: [0.0; 2],
        })
    }

    /// Filter one residual sample and update the flags; returns `r`.
    pub fn step(&mut self, f_e: &DVector<f64>, t: f64) -> [f64; 2] {
        let r = self.filter.step(f_e);
        self.r = [r[0], r[1]];
        for k in 0..2 {
            if self.r[k].abs() > self.thresholds[k] {
                self.above[k] += 1;
            } else {
                self.above[k] = 0;
            }
            if !self.flags[k] && self.above[k] > self.debounce_steps {
                self.flags[k] = true;
                self.onset[k] = Some(t);
            }
        }
        self.r
    }

    /// Clear flags and filter state.
    pub fn reset(&mut self) {
        self.filter.reset();
        self.above = [0; 2];
        self.flags = [false; 2];
        self.onset = [None; 2];
        self.r = [0.0; 2];
    }
}
