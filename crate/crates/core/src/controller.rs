//! Nominal H-infinity tracking controller.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sslib::linalg::block;
use sslib::{balanced_realization, coprime_controller, hinf_synthesize, lft_close, Channels, ControllerFactors, GeneralizedPlant, HinfOptions, SsError, StateSpace};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("controller synthesis failed: {0}")]
    NotSynthesizable(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

impl From<SsError> for ControllerError {
    fn from(e: SsError) -> Self {
        ControllerError::NotSynthesizable(e.to_string())
    }
}

/// Weights of the tracking design.
///
/// `W_e = k_e (s + omega_i) / (s + omega_i * integrator_ratio)` on each tracking error,
/// constant `W_u` on (N_c, alpha) and `W_y` on (p_e, SH). The exogenous inputs are
/// normalized: the disturbance, references and noises enter through the given scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerformanceWeights {
    pub k_e: f64,
    pub omega_i: f64,
    pub integrator_ratio: f64,
    pub w_u: [f64; 2],
    pub w_y: [f64; 2],
    /// Air-flow disturbance scale (kg/s).
    pub disturbance_scale: f64,
    /// Reference scales (kPa, degC).
    pub reference_scale: [f64; 2],
    /// Measurement-noise scales (kPa, degC).
    pub noise_scale: [f64; 2],
}

impl Default for PerformanceWeights {
    fn default() -> Self {
        PerformanceWeights {
            k_e: 1.0,
            omega_i: 0.1,
            integrator_ratio: 1e-2,
            w_u: [1e-3, 1e-2],
            w_y: [1e-2, 1e-2],
            disturbance_scale: 0.005,
            reference_scale: [5.0, 2.5],
            noise_scale: [0.05, 0.05],
        }
    }
}

impl PerformanceWeights {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let pos = [self.k_e, self.omega_i, self.integrator_ratio];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ControllerError::InvalidWeights("k_e, omega_i and integrator_ratio must be positive".into()));
        }
        if self.integrator_ratio >= 1.0 {
            return Err(ControllerError::InvalidWeights("integrator_ratio must be below 1".into()));
        }
        let rest = [self.w_u[0], self.w_u[1], self.w_y[0], self.w_y[1], self.disturbance_scale]
            .into_iter()
            .chain(self.reference_scale)
            .chain(self.noise_scale);
        for v in rest {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ControllerError::InvalidWeights(format!("negative or non-finite weight {v}")));
            }
        }
        Ok(())
    }

    /// Tracking-error weight as a 2x2 diagonal system.
    pub fn error_weight(&self) -> StateSpace {
        let p = self.omega_i * self.integrator_ratio;
        let i2 = DMatrix::<f64>::identity(2, 2);
        StateSpace::new(&i2 * -p, i2.clone(), &i2 * (self.k_e * (self.omega_i - p)), &i2 * self.k_e).expect("2x2 weight")
    }
}

/// Synthesis plant with `w = [dmdot_ea, p_e_r, SH_r, n1, n2]`, `z = [W_e e, W_u u, W_y y]`,
/// `u = [N_c, alpha]` and measurement `e = r - y - n`; the error weight acts on the measured error.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPlant {
    pub plant: GeneralizedPlant,
}

/// Build the augmented plant from a linearization with channel groups `u`, `d` and outputs `y`
/// (the first two outputs are the tracked ones).
pub fn build_augmented_plant(p_lin: &StateSpace, w: &PerformanceWeights) -> Result<AugmentedPlant, ControllerError> {
    w.validate()?;
    let mis = |s: &str| ControllerError::ChannelMismatch(s.to_string());
    let ur = p_lin.inputs.range("u").ok_or_else(|| mis("plant has no u group"))?;
    let dr = p_lin.inputs.range("d").ok_or_else(|| mis("plant has no d group"))?;
    if ur.len() != 2 || dr.len() != 1 {
        return Err(mis("expected 2 control inputs and 1 disturbance input"));
    }
    if p_lin.noutputs() < 2 {
        return Err(mis("expected at least two outputs"));
    }
    let n = p_lin.nstates();
    let cols = |r: &std::ops::Range<usize>, m: &DMatrix<f64>| m.view((0, r.start), (m.nrows(), r.len())).into_owned();
    let rows2 = |m: &DMatrix<f64>| m.rows(0, 2).into_owned();
    let a = p_lin.a.clone();
    let bu = cols(&ur, &p_lin.b);
    let bd = cols(&dr, &p_lin.b) * w.disturbance_scale;
    let c = rows2(&p_lin.c);
    let du = rows2(&cols(&ur, &p_lin.d));
    let dd = rows2(&cols(&dr, &p_lin.d)) * w.disturbance_scale;

    let we = w.error_weight();
    let (aw, bw, cw, dw) = (&we.a, &we.b, &we.c, &we.d);
    let sr = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&w.reference_scale));
    let sn = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&w.noise_scale));
    let wu = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&w.w_u));
    let wy = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&w.w_y));
    let z = |r: usize, c: usize| DMatrix::<f64>::zeros(r, c);

    let aa = block(&[&[&a, &z(n, 2)], &[&(-(bw * &c)), aw]]);
    let b1 = block(&[&[&bd, &z(n, 2), &z(n, 2)], &[&(-(bw * &dd)), &(bw * &sr), &(-(bw * &sn))]]);
    let b2 = block(&[&[&bu], &[&(-(bw * &du))]]);
    let c1 = block(&[&[&(-(dw * &c)), cw], &[&z(2, n), &z(2, 2)], &[&(&wy * &c), &z(2, 2)]]);
    let d11 = block(&[&[&(-(dw * &dd)), &(dw * &sr), &(-(dw * &sn))], &[&z(2, 1), &z(2, 2), &z(2, 2)], &[&(&wy * &dd), &z(2, 2), &z(2, 2)]]);
    let d12 = block(&[&[&(-(dw * &du))], &[&wu], &[&(&wy * &du)]]);
    let c2 = block(&[&[&(-&c), &z(2, 2)]]);
    let d21 = block(&[&[&(-&dd), &sr, &(-&sn)]]);
    let d22 = -du;

    let sys = StateSpace::new(
        aa,
        block(&[&[&b1, &b2]]),
        block(&[&[&c1], &[&c2]]),
        block(&[&[&d11, &d12], &[&d21, &d22]]),
    )?
    .with_inputs(Channels::new([("w", 5), ("u", 2)]))?
    .with_outputs(Channels::new([("z", 6), ("e", 2)]))?;
    Ok(AugmentedPlant { plant: GeneralizedPlant::new(sys, 5, 6)? })
}

/// Nominal controller `K: e -> u` with its left coprime factors.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalDesign {
    pub k: StateSpace,
    pub factors: ControllerFactors,
    pub gamma: f64,
    pub closed_loop_norm: f64,
}

/// Unity negative feedback of `p` (u -> y) with `k` (e = -y -> u); returns the closed-loop state matrix.
pub fn feedback_state_matrix(p: &StateSpace, k: &StateSpace) -> Result<DMatrix<f64>, ControllerError> {
    if p.ninputs() != k.noutputs() || p.noutputs() != k.ninputs() {
        return Err(ControllerError::ChannelMismatch("loop dimensions".into()));
    }
    let m = p.noutputs();
    let w = (DMatrix::<f64>::identity(m, m) + &p.d * &k.d)
        .try_inverse()
        .ok_or_else(|| ControllerError::NotSynthesizable("ill-posed feedback loop".into()))?;
    // y = W (C x - D Ck xk), u = Ck xk - Dk y
    let yx = &w * &p.c;
    let yk = -(&w * &p.d * &k.c);
    let ux = -(&k.d * &yx);
    let uk = &k.c - &k.d * &yk;
    Ok(block(&[
        &[&(&p.a + &p.b * &ux), &(&p.b * &uk)],
        &[&(-(&k.b * &yx)), &(&k.a - &k.b * &yk)],
    ]))
}

pub fn synth_nominal(p_lin: &StateSpace, w: &PerformanceWeights, opts: &HinfOptions) -> Result<NominalDesign, ControllerError> {
    let aug = build_augmented_plant(p_lin, w)?;
    let res = hinf_synthesize(&aug.plant, opts)?;
    let k = balanced_realization(&res.k)?.with_inputs(Channels::single("e", 2))?.with_outputs(Channels::single("u", 2))?;
    let cl = lft_close(&aug.plant, &k)?;
    if !cl.is_stable() {
        return Err(ControllerError::NotSynthesizable("closed loop not internally stable".into()));
    }
    let factors = coprime_controller(&k)?;
    Ok(NominalDesign { k, factors, gamma: res.gamma, closed_loop_norm: res.closed_loop_norm })
}
