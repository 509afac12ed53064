//! Channel-labelled linearization of the plant at a trim point.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sslib::{linearize, Channels, LinearizeOptions, NonlinearModel, SsError, StateSpace};

use super::{state_scales, BoundaryConditions, FaultVector, Plant, PlantError, PlantInputs, PlantState, TrimResult, NSTATES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SensorSet {
    /// Pressure and superheat.
    #[default]
    TwoOutputs,
    /// Pressure, superheat and the superheated-zone wall thermocouple.
    ThreeOutputs,
}

impl SensorSet {
    pub fn noutputs(self) -> usize {
        match self {
            SensorSet::TwoOutputs => 2,
            SensorSet::ThreeOutputs => 3,
        }
    }
}

/// Linear model in deviation variables around `trim`.
///
/// Inputs: `u` = (N_c rpm, alpha %), `d` = mdot_ea (kg/s), `f` = (f_N rpm, f_p kPa).
/// Outputs: `y` = (p_e kPa, SH degC[, T_e2w degC]).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlantModel {
    pub trim: TrimResult,
    pub sensor_set: SensorSet,
    pub sys: StateSpace,
}

impl LinearPlantModel {
    /// Trim outputs for the chosen sensor set.
    pub fn y0(&self) -> DVector<f64> {
        trim_outputs(&self.trim, self.sensor_set)
    }

    /// Plant without fault inputs: channel groups `u`, `d`.
    pub fn nominal(&self) -> Result<StateSpace, SsError> {
        self.sys.select_groups(&["u", "d"], &["y"])
    }

    pub fn p_uy(&self) -> Result<StateSpace, SsError> {
        self.sys.select_groups(&["u"], &["y"])
    }
}

pub fn trim_outputs(trim: &TrimResult, set: SensorSet) -> DVector<f64> {
    let x = &trim.state.evap;
    let sh = trim.internals.superheat;
    match set {
        SensorSet::TwoOutputs => DVector::from_row_slice(&[x.p_e, sh]),
        SensorSet::ThreeOutputs => DVector::from_row_slice(&[x.p_e, sh, x.t_w2]),
    }
}

struct Adapter<'a> {
    plant: &'a Plant,
    boundary: BoundaryConditions,
    set: SensorSet,
}

fn to_ss(e: PlantError) -> SsError {
    SsError::Model(e.to_string())
}

impl NonlinearModel for Adapter<'_> {
    fn derivative(&self, x: &DVector<f64>, v: &DVector<f64>) -> sslib::Result<DVector<f64>> {
        let xs = PlantState::from_slice(x.as_slice());
        let u = PlantInputs { n_c: v[0], alpha: v[1] };
        let bc = BoundaryConditions { mdot_ea: v[2], ..self.boundary };
        let f = FaultVector { f_n: v[3], f_p: v[4] };
        let d = self.plant.derivative(&xs, &u, &bc, &f).map_err(to_ss)?;
        Ok(DVector::from_row_slice(&d))
    }

    fn output(&self, x: &DVector<f64>, v: &DVector<f64>) -> sslib::Result<DVector<f64>> {
        let xs = PlantState::from_slice(x.as_slice());
        let y = self.plant.outputs(&xs, v[4]).map_err(to_ss)?;
        Ok(match self.set {
            SensorSet::TwoOutputs => DVector::from_row_slice(&[y.p_e, y.sh]),
            SensorSet::ThreeOutputs => DVector::from_row_slice(&[y.p_e, y.sh, y.t_e2w]),
        })
    }
}

/// Linearize with the mean void fraction frozen at its trim value.
pub fn linearize_plant(plant: &Plant, trim: &TrimResult, set: SensorSet) -> Result<LinearPlantModel, PlantError> {
    let frozen = plant.clone().with_gamma_bar(trim.gamma_bar);
    let adapter = Adapter { plant: &frozen, boundary: trim.boundary, set };
    let x = trim.state.to_vector();
    let v = DVector::from_row_slice(&[trim.inputs.n_c, trim.inputs.alpha, trim.boundary.mdot_ea, 0.0, 0.0]);
    let sc = state_scales();
    let opts = LinearizeOptions {
        state_steps: sc.iter().map(|s| 1e-4 * s).collect(),
        input_steps: vec![1.0, 0.05, 1e-4, 1.0, 0.1],
        derivative_scale: sc.to_vec(),
        equilibrium_tol: 1e-8,
    };
    let inputs = Channels::new([("u", 2), ("d", 1), ("f", 2)]);
    let outputs = Channels::single("y", set.noutputs());
    let sys = linearize(&adapter, &x, &v, inputs, outputs, &opts).map_err(|e| match e {
        SsError::NotAtEquilibrium(r) => PlantError::NoConvergence(format!("not at equilibrium (scaled rate {r:e})")),
        other => PlantError::InvalidInput(other.to_string()),
    })?;
    debug_assert_eq!(sys.nstates(), NSTATES);
    Ok(LinearPlantModel { trim: trim.clone(), sensor_set: set, sys })
}
