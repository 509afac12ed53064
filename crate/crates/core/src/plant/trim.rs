//! Equilibrium computation and the calibrated operating points.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{state_scales, BoundaryConditions, EvapState, FaultVector, Internals, Plant, PlantError, PlantInputs, PlantState, NSTATES};

/// What the trim holds fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TrimMode {
    /// Fixed actuator inputs; solve for the state.
    Inputs { n_c: f64, alpha: f64 },
    /// Fixed pressure and superheat; solve for state and inputs.
    Outputs { p_e: f64, sh: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimTarget {
    pub mode: TrimMode,
    pub boundary: BoundaryConditions,
    /// Starting state for Newton; `None` uses a generic guess.
    pub initial: Option<PlantState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrimResult {
    pub state: PlantState,
    pub inputs: PlantInputs,
    pub boundary: BoundaryConditions,
    /// Mean void fraction evaluated at the equilibrium.
    pub gamma_bar: f64,
    /// Scaled derivative norm at the returned point.
    pub residual: f64,
    pub internals: Internals,
    pub iterations: usize,
}

const MAX_NEWTON: usize = 60;
const TOL: f64 = 1e-10;

fn default_guess(v: &BoundaryConditions) -> PlantState {
    PlantState {
        evap: EvapState { zeta: 0.8, p_e: 250.0, h_e2: 410.0, t_w1: 0.0, t_w2: v.t_ea_in - 15.0 },
        p_c: 1000.0,
    }
}

impl Plant {
    /// Scaled residual: state rates in units of the state scales, plus output errors in output mode.
    fn trim_residual(&self, z: &[f64], target: &TrimTarget) -> Result<DVector<f64>, PlantError> {
        let sc = state_scales();
        let mut xs = [0.0; NSTATES];
        for i in 0..NSTATES {
            xs[i] = z[i] * sc[i];
        }
        let x = PlantState::from_slice(&xs);
        let (u, extra) = match target.mode {
            TrimMode::Inputs { n_c, alpha } => (PlantInputs { n_c, alpha }, None),
            TrimMode::Outputs { p_e, sh } => (PlantInputs { n_c: z[NSTATES] * 1000.0, alpha: z[NSTATES + 1] * 10.0 }, Some((p_e, sh))),
        };
        let d = self.derivative(&x, &u, &target.boundary, &FaultVector::default())?;
        let mut r: Vec<f64> = (0..NSTATES).map(|i| d[i] / sc[i]).collect();
        if let Some((p_e, sh)) = extra {
            let y = self.outputs(&x, 0.0)?;
            r.push((y.p_e - p_e) / sc[1]);
            r.push((y.sh - sh) / 10.0);
        }
        Ok(DVector::from_vec(r))
    }

    fn newton(&self, z0: Vec<f64>, target: &TrimTarget) -> Result<(Vec<f64>, f64, usize), PlantError> {
        let mut z = z0;
        let nz = z.len();
        let mut r = self.trim_residual(&z, target)?;
        let mut norm = r.norm();
        for it in 0..MAX_NEWTON {
            if norm <= TOL {
                return Ok((z, norm, it));
            }
            let mut jac = DMatrix::zeros(r.len(), nz);
            for j in 0..nz {
                let h = 1e-7 * z[j].abs().max(1e-2);
                let mut zp = z.clone();
                zp[j] += h;
                let mut zm = z.clone();
                zm[j] -= h;
                let col = (self.trim_residual(&zp, target)? - self.trim_residual(&zm, target)?) / (2.0 * h);
                jac.set_column(j, &col);
            }
            let step = jac.lu().solve(&(-&r)).ok_or(PlantError::NoConvergence("singular trim Jacobian".into()))?;
            let mut lambda = 1.0;
            loop {
                let cand: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
                if let Ok(rc) = self.trim_residual(&cand, target) {
                    let nc = rc.norm();
                    if nc < norm {
                        z = cand;
                        r = rc;
                        norm = nc;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-6 {
                    return Err(PlantError::NoConvergence(format!("line search failed at residual {norm:e}")));
                }
            }
        }
        if norm <= TOL {
            Ok((z, norm, MAX_NEWTON))
        } else {
            Err(PlantError::NoConvergence(format!("residual {norm:e} after {MAX_NEWTON} iterations")))
        }
    }

    /// Newton trim; on failure with fixed inputs, integrates forward and retries from the end state.
    pub fn trim(&self, target: &TrimTarget) -> Result<TrimResult, PlantError> {
        let x0 = target.initial.unwrap_or_else(|| default_guess(&target.boundary));
        let sc = state_scales();
        let pack = |x: &PlantState| -> Vec<f64> {
            let a = x.to_array();
            let mut z: Vec<f64> = (0..NSTATES).map(|i| a[i] / sc[i]).collect();
            if let TrimMode::Outputs { .. } = target.mode {
                z.push(1.0);
                z.push(4.0);
            }
            z
        };
        let solved = match self.newton(pack(&x0), target) {
            Ok(s) => s,
            Err(first) => match target.mode {
                TrimMode::Inputs { n_c, alpha } => {
                    let u = PlantInputs { n_c, alpha };
                    let mut x = x0;
                    for _ in 0..(600.0 / 0.05) as usize {
                        x = self.step(&x, &u, &target.boundary, &FaultVector::default(), 0.05).map_err(|_| first.clone())?;
                    }
                    self.newton(pack(&x), target)?
                }
                TrimMode::Outputs { .. } => return Err(first),
            },
        };
        let (z, residual, iterations) = solved;
        let mut xs = [0.0; NSTATES];
        for i in 0..NSTATES {
            xs[i] = z[i] * sc[i];
        }
        let state = PlantState::from_slice(&xs);
        let inputs = match target.mode {
            TrimMode::Inputs { n_c, alpha } => PlantInputs { n_c, alpha },
            TrimMode::Outputs { .. } => PlantInputs { n_c: z[NSTATES] * 1000.0, alpha: z[NSTATES + 1] * 10.0 },
        };
        let eval = self.evaporator_rhs(&state, &inputs, &target.boundary)?;
        Ok(TrimResult {
            state,
            inputs,
            boundary: target.boundary,
            gamma_bar: eval.internals.gamma_bar,
            residual,
            internals: eval.internals,
            iterations,
        })
    }
}

/// Calibrated operating points: ambient temperature, actuator settings and evaporator air flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub enum PointLabel {
    Low,
    Med,
    High,
}

impl PointLabel {
    pub const ALL: [PointLabel; 3] = [PointLabel::Low, PointLabel::Med, PointLabel::High];

    pub fn name(self) -> &'static str {
        match self {
            PointLabel::Low => "Low",
            PointLabel::Med => "Med",
            PointLabel::High => "High",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Some(PointLabel::Low),
            "med" | "medium" => Some(PointLabel::Med),
            "high" => Some(PointLabel::High),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub label: PointLabel,
    pub t_a: f64,
    pub n_c: f64,
    pub alpha: f64,
    pub mdot_ea: f64,
    /// Reference evaporator pressure of the point (kPa).
    pub p_e_nominal: f64,
    /// Equilibrium of the calibrated model, used as the Newton start.
    pub guess: [f64; NSTATES],
}

/// Condenser air flow; the lumped condenser map does not depend on it.
pub const CONDENSER_AIR_FLOW: f64 = 0.5;

impl OperatingPoint {
    pub fn get(label: PointLabel) -> Self {
        match label {
            PointLabel::Low => OperatingPoint {
                label,
                t_a: 25.0,
                n_c: 450.0,
                alpha: 25.0,
                mdot_ea: 0.092,
                p_e_nominal: 302.2,
                guess: [0.742, 299.4, 420.7, 1.35, 15.7, 857.7],
            },
            PointLabel::Med => OperatingPoint {
                label,
                t_a: 30.0,
                n_c: 1000.0,
                alpha: 40.0,
                mdot_ea: 0.096,
                p_e_nominal: 251.2,
                guess: [0.890, 254.5, 407.7, -2.77, 9.40, 1036.1],
            },
            PointLabel::High => OperatingPoint {
                label,
                t_a: 40.0,
                n_c: 2500.0,
                alpha: 55.0,
                mdot_ea: 0.105,
                p_e_nominal: 204.6,
                guess: [0.802, 203.8, 411.4, -7.95, 11.3, 1388.0],
            },
        }
    }

    pub fn boundary(&self) -> BoundaryConditions {
        BoundaryConditions { mdot_ea: self.mdot_ea, t_ea_in: self.t_a, mdot_ca: CONDENSER_AIR_FLOW, t_ca_in: self.t_a }
    }

    pub fn target(&self) -> TrimTarget {
        TrimTarget {
            mode: TrimMode::Inputs { n_c: self.n_c, alpha: self.alpha },
            boundary: self.boundary(),
            initial: Some(PlantState::from_slice(&self.guess)),
        }
    }
}
