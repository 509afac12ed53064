//! Moving-boundary evaporator with static compressor and valve and a lumped condenser.

mod linear;
mod params;
mod trim;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, SVD};
use thiserror::Error;

use crate::props::{PropertyModel, PropsError};

pub use linear::{linearize_plant, trim_outputs, LinearPlantModel, SensorSet};
pub use params::{CondenserParams, PlantParams};
pub use trim::{OperatingPoint, PointLabel, TrimMode, TrimResult, TrimTarget, CONDENSER_AIR_FLOW};

pub const KELVIN: f64 = 273.15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error(transparent)]
    Props(#[from] PropsError),
    #[error("refrigerant balance matrix is singular (condition number {0:e})")]
    SingularZ(f64),
    #[error("two-phase zone length {0} left the admissible range")]
    ZoneCollapse(f64),
    #[error("negative valve pressure drop ({p_up} kPa upstream, {p_down} kPa downstream)")]
    NegativePressureDrop { p_up: f64, p_down: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("trim did not converge: {0}")]
    NoConvergence(String),
}

/// Five-state moving-boundary evaporator state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvapState {
    /// Normalized two-phase length.
    pub zeta: f64,
    /// Evaporator pressure (kPa).
    pub p_e: f64,
    /// Outlet enthalpy of the superheated zone (kJ/kg).
    pub h_e2: f64,
    pub t_w1: f64,
    pub t_w2: f64,
}

/// Full integration state: evaporator plus condenser pressure (kPa).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub evap: EvapState,
    pub p_c: f64,
}

pub const NSTATES: usize = 6;

impl PlantState {
    pub fn to_array(&self) -> [f64; NSTATES] {
        let e = &self.evap;
        [e.zeta, e.p_e, e.h_e2, e.t_w1, e.t_w2, self.p_c]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        PlantState {
            evap: EvapState { zeta: v[0], p_e: v[1], h_e2: v[2], t_w1: v[3], t_w2: v[4] },
            p_c: v[5],
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.to_array())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantInputs {
    /// Compressor speed (rpm).
    pub n_c: f64,
    /// Valve opening (%).
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub mdot_ea: f64,
    pub t_ea_in: f64,
    pub mdot_ca: f64,
    pub t_ca_in: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaultVector {
    /// Additive compressor-speed fault (rpm).
    pub f_n: f64,
    /// Additive pressure-measurement fault (kPa).
    pub f_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    pub p_e: f64,
    pub sh: f64,
    pub t_e2w: f64,
}

/// Intermediate quantities of one right-hand-side evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Internals {
    pub mdot_v: f64,
    pub mdot_c: f64,
    pub mdot_12: f64,
    pub q_tp: f64,
    pub q_sh: f64,
    pub q_air1: f64,
    pub q_air2: f64,
    /// Evaporator inlet enthalpy.
    pub h_in: f64,
    /// Compressor discharge enthalpy.
    pub h_comp_out: f64,
    pub h_3: f64,
    pub t_sat: f64,
    pub superheat: f64,
    pub p_c_target: f64,
    pub gamma_bar: f64,
    pub x_in: f64,
    pub t_air_out: f64,
    /// Condition number of the 4x4 refrigerant balance block.
    pub balance_condition: f64,
}

/// Descriptor form `Z x' = f` of the evaporator plus the explicit condenser rate.
#[derive(Debug, Clone)]
pub struct RhsEval {
    pub z: DMatrix<f64>,
    pub f: DVector<f64>,
    pub xdot: [f64; NSTATES],
    pub internals: Internals,
}

/// Compressor mass flow and discharge enthalpy.
pub fn compressor_flow(
    p_suction: f64,
    rho_suction: f64,
    t_suction: f64,
    h_suction: f64,
    p_discharge: f64,
    n_c_actual: f64,
    params: &PlantParams,
) -> Result<(f64, f64), PlantError> {
    if !(n_c_actual >= 0.0) {
        return Err(PlantError::InvalidInput(format!("compressor speed {n_c_actual} rpm")));
    }
    let omega = n_c_actual * 2.0 * std::f64::consts::PI / 60.0;
    let ratio = p_discharge / p_suction;
    let eta_v = (params.eta_v * (1.0 + params.clearance - params.clearance * ratio.powf(1.0 / params.polytropic_n))).max(0.0);
    let mdot = eta_v * params.v_d * rho_suction * omega;
    let k = params.vapour_kappa;
    let dh_s = params.vapour_cp * (t_suction + KELVIN) * (ratio.powf((k - 1.0) / k) - 1.0);
    let h_out = h_suction + dh_s.max(0.0) / params.eta_s;
    Ok((mdot, h_out))
}

/// Orifice flow through the expansion valve (kg/s); pressures in kPa.
pub fn valve_flow(alpha: f64, p_up: f64, p_down: f64, rho_up: f64, params: &PlantParams) -> Result<f64, PlantError> {
    if !(0.0..=100.0).contains(&alpha) {
        return Err(PlantError::InvalidInput(format!("valve opening {alpha} %")));
    }
    if p_up < p_down {
        return Err(PlantError::NegativePressureDrop { p_up, p_down });
    }
    let area = alpha / 100.0 * params.a_v_max;
    Ok(params.c_d * area * (2.0 * rho_up * (p_up - p_down) * 1e3).sqrt())
}

/// Static condenser map target pressure (kPa).
pub fn condenser_target(mdot_c: f64, t_ca_in: f64, c: &CondenserParams) -> f64 {
    c.p_c0 + c.k_m * (mdot_c - c.mdot_c0) + c.k_t * (t_ca_in - c.t_ca0)
}

/// Condenser pressure rate and outlet enthalpy.
pub fn condenser_update(
    p_c: f64,
    mdot_c: f64,
    t_ca_in: f64,
    props: &PropertyModel,
    c: &CondenserParams,
) -> Result<(f64, f64), PlantError> {
    let sat = props.sat_props(p_c)?;
    let h_3 = sat.h_f - c.cp_liquid * c.subcool;
    let rate = (condenser_target(mdot_c, t_ca_in, c) - p_c) / c.tau_c;
    Ok((rate, h_3))
}

/// Wall energy balance of one zone: returns `(C_w,k dT/dt, Q_air,k)`.
pub fn wall_dynamics(zone_fraction: f64, t_wall: f64, q_refrigerant: f64, mdot_ea: f64, t_ea_in: f64, params: &PlantParams) -> (f64, f64) {
    let alpha = params.alpha_air * (mdot_ea / params.air_flow_ref).powf(params.air_flow_exponent);
    let q_air = alpha * params.a_o * zone_fraction * (t_ea_in - t_wall);
    (q_air - q_refrigerant, q_air)
}

#[derive(Debug, Clone)]
pub struct Plant {
    pub params: PlantParams,
    pub props: PropertyModel,
    /// Mean void fraction held fixed; `None` evaluates it from the current inlet quality.
    pub gamma_bar: Option<f64>,
}

impl Plant {
    pub fn new(params: PlantParams) -> Result<Self, PlantError> {
        params.validate().map_err(PlantError::InvalidInput)?;
        Ok(Plant { params, props: PropertyModel::r134a().clone(), gamma_bar: None })
    }

    pub fn with_gamma_bar(mut self, gamma_bar: f64) -> Self {
        self.gamma_bar = Some(gamma_bar);
        self
    }

    pub fn evaporator_rhs(&self, x: &PlantState, u: &PlantInputs, v: &BoundaryConditions) -> Result<RhsEval, PlantError> {
        let par = &self.params;
        let e = &x.evap;
        let (zeta, p_e, h_e2) = (e.zeta, e.p_e, e.h_e2);
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(PlantError::ZoneCollapse(zeta));
        }
        if !(v.mdot_ea > 0.0 && v.mdot_ca > 0.0) {
            return Err(PlantError::InvalidInput("air mass flows must be positive".into()));
        }
        let s = self.props.sat_props(p_e)?;
        let suction = self.props.sh_props(p_e, h_e2)?;

        let (mdot_c, h_comp_out) = compressor_flow(p_e, suction.rho, suction.t, h_e2, x.p_c, u.n_c, par)?;
        let (pc_dot, h_3) = condenser_update(x.p_c, mdot_c, v.t_ca_in, &self.props, &par.condenser)?;
        // Subcooled liquid density approximated by the saturated value.
        let rho_3 = self.props.sat_props(x.p_c)?.rho_f;
        let h_4 = h_3;
        let x_in = (h_4 - s.h_f) / (s.h_g - s.h_f);
        if !(0.0..1.0).contains(&x_in) {
            return Err(PlantError::InvalidInput(format!("evaporator inlet quality {x_in:.4} outside [0, 1)")));
        }
        let gb = match self.gamma_bar {
            Some(g) => g,
            None => crate::props::mean_void_fraction_from_densities(s.rho_f, s.rho_g, x_in)?,
        };

        // Two-phase mixture properties with frozen mean void fraction.
        let rho_tp = gb * s.rho_g + (1.0 - gb) * s.rho_f;
        let drho_tp = gb * s.d_rho_g_dp + (1.0 - gb) * s.d_rho_f_dp;
        let num = gb * s.rho_g * s.h_g + (1.0 - gb) * s.rho_f * s.h_f;
        let h_tp = num / rho_tp;
        let dnum = gb * (s.d_rho_g_dp * s.h_g + s.rho_g * s.d_h_g_dp) + (1.0 - gb) * (s.d_rho_f_dp * s.h_f + s.rho_f * s.d_h_f_dp);
        let dh_tp = (dnum - h_tp * drho_tp) / rho_tp;

        // Superheated zone at its mean enthalpy.
        let h_sh = 0.5 * (s.h_g + h_e2);
        let sh = self.props.sh_props(p_e, h_sh)?;

        let mdot_v = valve_flow(u.alpha, x.p_c, p_e, rho_3, par)?;

        let q_tp = par.alpha_tp * par.a_i * zeta * (e.t_w1 - s.t_sat);
        let q_sh = par.alpha_sh * par.a_i * (1.0 - zeta) * (e.t_w2 - sh.t);

        let vol = par.v_e;
        let (hg, dhg, rg) = (s.h_g, s.d_h_g_dp, s.rho_g);
        // Unknowns: (zeta', p', h_e2', mdot_12).
        let m = nalgebra::Matrix4::new(
            vol * (rho_tp - rg),
            vol * zeta * drho_tp,
            0.0,
            1.0,
            -vol * rg * (hg - h_tp),
            vol * zeta * (rho_tp * dh_tp - 1.0),
            0.0,
            hg - h_tp,
            -vol * (sh.rho - rg),
            vol * (1.0 - zeta) * (sh.d_rho_dp + sh.d_rho_dh * 0.5 * dhg),
            vol * (1.0 - zeta) * sh.d_rho_dh * 0.5,
            -1.0,
            vol * rg * (hg - h_sh),
            vol * (1.0 - zeta) * (sh.rho * 0.5 * dhg - 1.0),
            vol * (1.0 - zeta) * sh.rho * 0.5,
            -(hg - h_sh),
        );
        let b = nalgebra::Vector4::new(mdot_v, mdot_v * (h_4 - h_tp) + q_tp, -mdot_c, -mdot_c * (h_e2 - h_sh) + q_sh);
        let sv = SVD::new(m, false, false).singular_values;
        let cond = sv.max() / sv.min();
        if !(cond < 1e12) {
            return Err(PlantError::SingularZ(cond));
        }

        // Eliminate mdot_12 with the two-phase mass balance.
        let mut zr = Matrix3::zeros();
        let mut fr = Vector3::zeros();
        for r in 0..3 {
            let k = r + 1;
            let coef = m[(k, 3)];
            for c in 0..3 {
                zr[(r, c)] = m[(k, c)] - coef * m[(0, c)];
            }
            fr[r] = b[k] - coef * b[0];
        }
        let dx = zr.lu().solve(&fr).ok_or(PlantError::SingularZ(f64::INFINITY))?;
        let mdot_12 = b[0] - (m[(0, 0)] * dx[0] + m[(0, 1)] * dx[1]);

        let cw1 = zeta * par.wall_capacitance;
        let cw2 = (1.0 - zeta) * par.wall_capacitance;
        let (f_w1, q_air1) = wall_dynamics(zeta, e.t_w1, q_tp, v.mdot_ea, v.t_ea_in, par);
        let (f_w2, q_air2) = wall_dynamics(1.0 - zeta, e.t_w2, q_sh, v.mdot_ea, v.t_ea_in, par);

        let p_c_target = condenser_target(mdot_c, v.t_ca_in, &par.condenser);

        let mut z = DMatrix::zeros(5, 5);
        z.view_mut((0, 0), (3, 3)).copy_from(&zr);
        z[(3, 3)] = cw1;
        z[(4, 4)] = cw2;
        let f = DVector::from_row_slice(&[fr[0], fr[1], fr[2], f_w1, f_w2]);

        let xdot = [dx[0], dx[1], dx[2], f_w1 / cw1, f_w2 / cw2, pc_dot];
        let t_air_out = v.t_ea_in - (q_air1 + q_air2) / (v.mdot_ea * par.air_cp);
        Ok(RhsEval {
            z,
            f,
            xdot,
            internals: Internals {
                mdot_v,
                mdot_c,
                mdot_12,
                q_tp,
                q_sh,
                q_air1,
                q_air2,
                h_in: h_4,
                h_comp_out,
                h_3,
                t_sat: s.t_sat,
                superheat: suction.t - s.t_sat,
                p_c_target,
                gamma_bar: gb,
                x_in,
                t_air_out,
                balance_condition: cond,
            },
        })
    }

    /// State derivative with the actuator fault applied.
    pub fn derivative(&self, x: &PlantState, u_cmd: &PlantInputs, v: &BoundaryConditions, faults: &FaultVector) -> Result<[f64; NSTATES], PlantError> {
        let u_act = PlantInputs { n_c: u_cmd.n_c + faults.f_n, alpha: u_cmd.alpha };
        Ok(self.evaporator_rhs(x, &u_act, v)?.xdot)
    }

    /// Measured outputs; the pressure fault is additive on the pressure signal.
    pub fn outputs(&self, x: &PlantState, f_p: f64) -> Result<Measurements, PlantError> {
        let s = self.props.sat_props(x.evap.p_e)?;
        let sh = self.props.sh_props(x.evap.p_e, x.evap.h_e2)?;
        Ok(Measurements { p_e: x.evap.p_e + f_p, sh: sh.t - s.t_sat, t_e2w: x.evap.t_w2 })
    }

    /// One linearly implicit two-stage Rosenbrock (ROS2) step with inputs held over `dt`.
    pub fn step(&self, x: &PlantState, u_cmd: &PlantInputs, v: &BoundaryConditions, faults: &FaultVector, dt: f64) -> Result<PlantState, PlantError> {
        if !(dt > 0.0) {
            return Err(PlantError::InvalidInput(format!("time step {dt}")));
        }
        let f = |y: &[f64; NSTATES]| self.derivative(&PlantState::from_slice(y), u_cmd, v, faults);
        let y0 = x.to_array();
        let f0 = f(&y0)?;
        let scales = state_scales();
        let mut jac = nalgebra::SMatrix::<f64, NSTATES, NSTATES>::zeros();
        for j in 0..NSTATES {
            let h = 1e-7 * scales[j];
            let mut yp = y0;
            yp[j] += h;
            let fp = f(&yp)?;
            for i in 0..NSTATES {
                jac[(i, j)] = (fp[i] - f0[i]) / h;
            }
        }
        let gamma = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
        let w = nalgebra::SMatrix::<f64, NSTATES, NSTATES>::identity() - jac * (gamma * dt);
        let lu = w.lu();
        let k1 = lu.solve(&nalgebra::SVector::<f64, NSTATES>::from(f0)).ok_or(PlantError::SingularZ(f64::INFINITY))?;
        let mut y1 = y0;
        for i in 0..NSTATES {
            y1[i] += dt * k1[i];
        }
        let f1 = f(&y1)?;
        let rhs2 = nalgebra::SVector::<f64, NSTATES>::from(f1) - k1 * 2.0;
        let k2 = lu.solve(&rhs2).ok_or(PlantError::SingularZ(f64::INFINITY))?;
        let mut y = y0;
        for i in 0..NSTATES {
            y[i] += dt * (1.5 * k1[i] + 0.5 * k2[i]);
        }
        let next = PlantState::from_slice(&y);
        let guard = self.params.zone_guard;
        if !(next.evap.zeta > guard && next.evap.zeta < 1.0 - guard) {
            return Err(PlantError::ZoneCollapse(next.evap.zeta));
        }
        Ok(next)
    }
}

/// Typical magnitudes of the six states, used for difference steps and residual scaling.
pub fn state_scales() -> [f64; NSTATES] {
    [1.0, 100.0, 100.0, 10.0, 10.0, 1000.0]
}
