use serde::{Deserialize, Serialize};

/// Lumped condenser: first-order lag of p_c toward an affine map of compressor flow and air temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CondenserParams {
    /// Map anchor pressure (kPa) at `mdot_c0` and `t_ca0`.
    pub p_c0: f64,
    /// Map anchor refrigerant flow (kg/s).
    pub mdot_c0: f64,
    /// kPa per kg/s.
    pub k_m: f64,
    /// kPa per K.
    pub k_t: f64,
    pub t_ca0: f64,
    /// Time constant (s).
    pub tau_c: f64,
    /// Condenser outlet subcooling (K).
    pub subcool: f64,
    /// Liquid specific heat (kJ/kg K).
    pub cp_liquid: f64,
}

impl Default for CondenserParams {
    fn default() -> Self {
        CondenserParams {
            p_c0: 1036.135,
            mdot_c0: 0.0155,
            k_m: 1170.0,
            k_t: 34.0,
            t_ca0: 30.0,
            tau_c: 20.0,
            subcool: 5.0,
            cp_liquid: 1.4,
        }
    }
}

/// Plant parameters in kPa, kJ/kg, kW, m^3, kg/s, degC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    /// Evaporator internal volume (m^3).
    pub v_e: f64,
    /// Compressor displacement per radian of shaft rotation (m^3/rad).
    pub v_d: f64,
    /// Volumetric efficiency at zero clearance loss.
    pub eta_v: f64,
    /// Clearance volume ratio; 0 makes the volumetric efficiency constant.
    pub clearance: f64,
    /// Re-expansion polytropic exponent.
    pub polytropic_n: f64,
    pub eta_s: f64,
    /// Vapour specific heat (kJ/kg K) and heat-capacity ratio for the isentropic rise.
    pub vapour_cp: f64,
    pub vapour_kappa: f64,
    pub c_d: f64,
    /// Valve area at 100 % opening (m^2).
    pub a_v_max: f64,
    /// Refrigerant-side coefficients (kW/m^2 K).
    pub alpha_tp: f64,
    pub alpha_sh: f64,
    /// Air-side coefficient (kW/m^2 K) at `air_flow_ref`.
    pub alpha_air: f64,
    pub air_flow_ref: f64,
    pub air_flow_exponent: f64,
    pub a_i: f64,
    pub a_o: f64,
    /// Total wall heat capacity (kJ/K), split between zones by tube length.
    pub wall_capacitance: f64,
    pub air_cp: f64,
    pub condenser: CondenserParams,
    /// Two-phase length must stay inside (guard, 1 - guard).
    pub zone_guard: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            v_e: 1.2e-3,
            v_d: 1.645e-5,
            eta_v: 0.9,
            clearance: 0.06,
            polytropic_n: 1.1,
            eta_s: 0.7,
            vapour_cp: 0.9,
            vapour_kappa: 1.12,
            c_d: 0.7,
            a_v_max: 1.31e-6,
            alpha_tp: 2.43,
            alpha_sh: 0.238,
            alpha_air: 0.0232,
            air_flow_ref: 0.12,
            air_flow_exponent: 0.8,
            a_i: 1.0,
            a_o: 4.0,
            wall_capacitance: 2.7,
            air_cp: 1.006,
            condenser: CondenserParams::default(),
            zone_guard: 0.01,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("v_e", self.v_e),
            ("v_d", self.v_d),
            ("eta_v", self.eta_v),
            ("polytropic_n", self.polytropic_n),
            ("eta_s", self.eta_s),
            ("vapour_cp", self.vapour_cp),
            ("vapour_kappa", self.vapour_kappa),
            ("c_d", self.c_d),
            ("a_v_max", self.a_v_max),
            ("alpha_tp", self.alpha_tp),
            ("alpha_sh", self.alpha_sh),
            ("alpha_air", self.alpha_air),
            ("air_flow_ref", self.air_flow_ref),
            ("a_i", self.a_i),
            ("a_o", self.a_o),
            ("wall_capacitance", self.wall_capacitance),
            ("air_cp", self.air_cp),
            ("condenser.p_c0", self.condenser.p_c0),
            ("condenser.tau_c", self.condenser.tau_c),
            ("condenser.cp_liquid", self.condenser.cp_liquid),
            ("zone_guard", self.zone_guard),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("plant.{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.clearance) {
            return Err("plant.clearance must lie in [0, 1)".into());
        }
        if self.vapour_kappa <= 1.0 {
            return Err("plant.vapour_kappa must exceed 1".into());
        }
        if self.condenser.subcool < 0.0 {
            return Err("plant.condenser.subcool must be non-negative".into());
        }
        if self.zone_guard >= 0.5 {
            return Err("plant.zone_guard must be below 0.5".into());
        }
        Ok(())
    }
}
