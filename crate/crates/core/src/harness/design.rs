//! Per-point design: trim, linearization, nominal controller, isolation filter, compensators
//! and calibrated thresholds, plus the serialized design bundle.

use serde::{Deserialize, Serialize};
use sslib::io::StateSpaceRecord;
use sslib::{left_coprime_factorize, HinfOptions};

use super::{calibration_suite, run_scenario, Config, HarnessError, RunSettings};
use crate::controller::synth_nominal;
use crate::fdi::{calibrate_thresholds, design_isolation_filter, fault_to_residual_dc, isolation_ratio};
use crate::gimc::{design_q, QDesign, QKind, SchedulePoint};
use crate::plant::{linearize_plant, OperatingPoint, Plant, PointLabel, SensorSet, TrimResult};

fn synth(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Synthesis(e.to_string())
}

impl Config {
    pub fn run_settings(&self) -> RunSettings {
        RunSettings { debounce: self.fdi.debounce, hysteresis: self.gimc.hysteresis }
    }

    pub fn build_plant(&self) -> Result<Plant, HarnessError> {
        Plant::new(self.plant.clone()).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

pub fn trim_point(plant: &Plant, label: PointLabel) -> Result<TrimResult, HarnessError> {
    plant.trim(&OperatingPoint::get(label).target()).map_err(synth)
}

/// A designed point with the reasons for any missing compensator.
#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub point: SchedulePoint,
    pub q_failures: Vec<(QKind, String)>,
}

/// Design every block at one point; thresholds are left at their floors.
pub fn design_point_uncalibrated(plant: &Plant, label: PointLabel, set: SensorSet, cfg: &Config) -> Result<DesignOutcome, HarnessError> {
    let trim = trim_point(plant, label)?;
    let lin = linearize_plant(plant, &trim, set).map_err(synth)?;
    let opts = HinfOptions::default();
    let nominal = synth_nominal(&lin.nominal().map_err(synth)?, &cfg.weights, &opts).map_err(synth)?;
    let factors = left_coprime_factorize(&lin.sys).map_err(synth)?;
    let fdi = design_isolation_filter(&factors, &cfg.fdi, set, &opts).map_err(synth)?;
    let mut q_failures = Vec::new();
    let mut q = |kind| match design_q(kind, &lin, &nominal, &factors, &cfg.gimc, &opts) {
        Ok(d) => Some(d),
        Err(e) => {
            q_failures.push((kind, e.to_string()));
            None
        }
    };
    let q_act = q(QKind::Actuator);
    let q_sen = q(QKind::Sensor);
    let p_e_ref = trim.state.evap.p_e;
    Ok(DesignOutcome { point: SchedulePoint { label, lin, nominal, factors, fdi, q_act, q_sen, p_e_ref }, q_failures })
}

/// Largest fault-free residual magnitudes over the calibration suite.
pub fn calibration_residuals(plant: &Plant, point: &SchedulePoint, rs: &RunSettings) -> Result<[f64; 2], HarnessError> {
    let mut max = [0.0f64; 2];
    for sc in calibration_suite(point.label, point.lin.sensor_set) {
        let res = run_scenario(plant, std::slice::from_ref(point), &sc, rs)?;
        for k in 0..2 {
            max[k] = max[k].max(res.metrics.max_abs_residual[k]);
        }
    }
    Ok(max)
}

/// Full design at one point including threshold calibration.
pub fn design_point(plant: &Plant, label: PointLabel, set: SensorSet, cfg: &Config) -> Result<DesignOutcome, HarnessError> {
    let mut out = design_point_uncalibrated(plant, label, set, cfg)?;
    let max = calibration_residuals(plant, &out.point, &cfg.run_settings())?;
    out.point.fdi.thresholds = calibrate_thresholds(max, &cfg.fdi);
    Ok(out)
}

/// Summary of one compensator in a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QRecord {
    pub kind: QKind,
    pub alpha_d: f64,
    pub alpha_f: f64,
    pub full_order: usize,
    pub reduced_order: usize,
    pub baseline: f64,
    pub full_cost: f64,
    pub cost: f64,
    pub error_bound: f64,
    pub q: StateSpaceRecord,
}

impl From<&QDesign> for QRecord {
    fn from(d: &QDesign) -> Self {
        QRecord {
            kind: d.kind,
            alpha_d: d.alpha_d,
            alpha_f: d.alpha_f,
            full_order: d.full_order,
            reduced_order: d.reduced_order,
            baseline: d.baseline,
            full_cost: d.full_cost,
            cost: d.cost,
            error_bound: d.error_bound,
            q: StateSpaceRecord::from(&d.q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub label: PointLabel,
    pub sensor_set: SensorSet,
    /// Scheduling-variable value (kPa).
    pub p_e_ref: f64,
    pub t_a: f64,
    pub n_c: f64,
    pub alpha: f64,
    pub mdot_ea: f64,
    pub trim_state: Vec<f64>,
    pub trim_outputs: Vec<f64>,
    pub thresholds: [f64; 2],
    pub nominal_gamma: f64,
    pub fdi_gamma: f64,
    /// Isolation ratio of the static fault-to-residual map.
    pub isolation_ratio: f64,
}

/// Everything designed at one point in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignBundle {
    pub meta: BundleMeta,
    pub plant: StateSpaceRecord,
    pub k: StateSpaceRecord,
    /// Controller realization with inputs `[e, q]`.
    pub k_gimc: StateSpaceRecord,
    pub m_tilde: StateSpaceRecord,
    pub n_tilde: StateSpaceRecord,
    pub h_i: StateSpaceRecord,
    pub q_act: Option<QRecord>,
    pub q_sen: Option<QRecord>,
}

impl DesignBundle {
    pub fn from_point(p: &SchedulePoint) -> Result<Self, HarnessError> {
        let trim = &p.lin.trim;
        let dc = fault_to_residual_dc(&p.factors, &p.fdi.h_i).map_err(synth)?;
        Ok(DesignBundle {
            meta: BundleMeta {
                label: p.label,
                sensor_set: p.lin.sensor_set,
                p_e_ref: p.p_e_ref,
                t_a: trim.boundary.t_ea_in,
                n_c: trim.inputs.n_c,
                alpha: trim.inputs.alpha,
                mdot_ea: trim.boundary.mdot_ea,
                trim_state: trim.state.to_array().to_vec(),
                trim_outputs: p.lin.y0().iter().copied().collect(),
                thresholds: p.fdi.thresholds,
                nominal_gamma: p.nominal.gamma,
                fdi_gamma: p.fdi.gamma,
                isolation_ratio: isolation_ratio(&dc),
            },
            plant: (&p.lin.sys).into(),
            k: (&p.nominal.k).into(),
            k_gimc: (&crate::gimc::gimc_realization(&p.nominal).map_err(synth)?).into(),
            m_tilde: (&p.factors.m).into(),
            n_tilde: (&p.factors.n).into(),
            h_i: (&p.fdi.h_i).into(),
            q_act: p.q_act.as_ref().map(QRecord::from),
            q_sen: p.q_sen.as_ref().map(QRecord::from),
        })
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Io(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

/// Designs at several points, one thread per point.
pub fn design_points(plant: &Plant, labels: &[PointLabel], set: SensorSet, cfg: &Config) -> Result<Vec<DesignOutcome>, HarnessError> {
    std::thread::scope(|s| {
        let handles: Vec<_> = labels.iter().map(|&l| s.spawn(move || design_point(plant, l, set, cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("design thread panicked")).collect()
    })
}

/// The points a scenario needs: all of them when scheduling, else its own.
pub fn design_for_scenario(plant: &Plant, cfg: &Config) -> Result<Vec<DesignOutcome>, HarnessError> {
    let sc = &cfg.scenario;
    let labels: Vec<PointLabel> = if sc.schedule { PointLabel::ALL.to_vec() } else { vec![sc.operating_point] };
    design_points(plant, &labels, sc.sensor_set, cfg)
}
