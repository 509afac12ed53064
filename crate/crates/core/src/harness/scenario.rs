//! Scenario description: references, disturbances, faults and controller mode.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::gimc::Gating;
use crate::plant::{PointLabel, SensorSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Nominal controller only.
    #[default]
    Passive,
    ActiveGimc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultChannel {
    #[serde(rename = "f_N")]
    Actuator,
    #[serde(rename = "f_p")]
    Sensor,
}

impl FaultChannel {
    pub fn index(self) -> usize {
        match self {
            FaultChannel::Actuator => 0,
            FaultChannel::Sensor => 1,
        }
    }
}

/// Reference offsets from the trim outputs of the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencePoint {
    pub time: f64,
    /// Pressure offset (kPa).
    pub p_e: f64,
    /// Superheat offset (degC).
    pub sh: f64,
}

/// Relative step of the evaporator air flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceStep {
    pub time: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEvent {
    pub time: f64,
    pub channel: FaultChannel,
    /// rpm for `f_N`, kPa for `f_p`.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub operating_point: PointLabel,
    pub duration: f64,
    pub dt: f64,
    pub mode: Mode,
    pub gating: Gating,
    pub sensor_set: SensorSet,
    pub references: Vec<ReferencePoint>,
    /// Linear interpolation between reference points instead of steps.
    pub interpolate_references: bool,
    pub disturbances: Vec<DisturbanceStep>,
    pub faults: Vec<FaultEvent>,
    /// Uniform measurement-noise amplitudes on (p_e, SH).
    pub noise: [f64; 2],
    pub seed: u64,
    /// Switch between all designed points by the pressure reference.
    pub schedule: bool,
    /// Move ambient temperature and air flow with the pressure reference between the points' values.
    pub ambient_follows_reference: bool,
    /// Simulate the linearization instead of the nonlinear plant.
    pub linear_plant: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            operating_point: PointLabel::Med,
            duration: 300.0,
            dt: 0.01,
            mode: Mode::Passive,
            gating: Gating::Flags,
            sensor_set: SensorSet::ThreeOutputs,
            references: Vec::new(),
            interpolate_references: false,
            disturbances: Vec::new(),
            faults: Vec::new(),
            noise: [0.0; 2],
            seed: 0,
            schedule: false,
            ambient_follows_reference: false,
            linear_plant: false,
        }
    }
}

impl Scenario {
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration {} and dt {} must be positive", self.duration, self.dt));
        }
        let n = self.duration / self.dt;
        if (n - n.round()).abs() > 1e-6 * n.max(1.0) {
            return bad(format!("dt {} does not divide duration {}", self.dt, self.duration));
        }
        let times = self
            .references
            .iter()
            .map(|r| r.time)
            .chain(self.disturbances.iter().map(|d| d.time))
            .chain(self.faults.iter().map(|f| f.time));
        for t in times {
            if !(0.0..=self.duration).contains(&t) {
                return bad(format!("event at t = {t} outside [0, {}]", self.duration));
            }
        }
        if self.references.windows(2).any(|w| w[1].time < w[0].time) {
            return bad("reference points must be ordered in time".into());
        }
        if self.noise.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("noise amplitudes must be non-negative".into());
        }
        Ok(())
    }

    /// Reference offsets (kPa, degC) at time `t`.
    pub fn reference_offset(&self, t: f64) -> [f64; 2] {
        let refs = &self.references;
        let Some(first) = refs.first() else {
            return [0.0; 2];
        };
        if self.interpolate_references {
            if t <= first.time {
                return [first.p_e, first.sh];
            }
            for w in refs.windows(2) {
                if t <= w[1].time {
                    let span = w[1].time - w[0].time;
                    let s = if span > 0.0 { (t - w[0].time) / span } else { 1.0 };
                    return [w[0].p_e + s * (w[1].p_e - w[0].p_e), w[0].sh + s * (w[1].sh - w[0].sh)];
                }
            }
            let last = refs.last().expect("non-empty");
            [last.p_e, last.sh]
        } else {
            refs.iter().filter(|r| r.time <= t).last().map_or([0.0; 2], |r| [r.p_e, r.sh])
        }
    }

    /// Total relative air-flow change at time `t`.
    pub fn disturbance_fraction(&self, t: f64) -> f64 {
        self.disturbances.iter().filter(|d| d.time <= t).map(|d| d.fraction).sum()
    }

    /// Accumulated (f_N, f_p) at time `t`.
    pub fn faults_at(&self, t: f64) -> [f64; 2] {
        let mut f = [0.0; 2];
        for e in self.faults.iter().filter(|e| e.time <= t) {
            f[e.channel.index()] += e.magnitude;
        }
        f
    }

    pub fn first_fault_time(&self) -> Option<f64> {
        self.faults.iter().map(|f| f.time).min_by(f64::total_cmp)
    }
}

/// Reference step of the accommodation studies: +5 kPa, -2.5 degC.
pub const MANOEUVRE: [f64; 2] = [5.0, -2.5];

/// Manoeuvre at 50 s followed by one fault at `fault_time`.
pub fn manoeuvre_with_fault(point: PointLabel, channel: FaultChannel, magnitude: f64, fault_time: f64, duration: f64, mode: Mode) -> Scenario {
    Scenario {
        operating_point: point,
        duration,
        mode,
        references: vec![ReferencePoint { time: 50.0, p_e: MANOEUVRE[0], sh: MANOEUVRE[1] }],
        faults: vec![FaultEvent { time: fault_time, channel, magnitude }],
        ..Scenario::default()
    }
}

/// Actuator fault of 40 rpm at 500 s after the manoeuvre.
pub fn actuator_fault_scenario(point: PointLabel, mode: Mode) -> Scenario {
    manoeuvre_with_fault(point, FaultChannel::Actuator, 40.0, 500.0, 1000.0, mode)
}

/// Pressure-sensor fault of 5 kPa at 500 s after the manoeuvre.
pub fn sensor_fault_scenario(point: PointLabel, mode: Mode) -> Scenario {
    manoeuvre_with_fault(point, FaultChannel::Sensor, 5.0, 500.0, 1000.0, mode)
}

/// Passive run with f_N = 40 rpm at 400 s and f_p = 5 kPa at 700 s.
pub fn isolation_scenario(point: PointLabel, sensor_set: SensorSet) -> Scenario {
    Scenario {
        operating_point: point,
        duration: 1000.0,
        sensor_set,
        references: vec![ReferencePoint { time: 50.0, p_e: MANOEUVRE[0], sh: MANOEUVRE[1] }],
        faults: vec![
            FaultEvent { time: 400.0, channel: FaultChannel::Actuator, magnitude: 40.0 },
            FaultEvent { time: 700.0, channel: FaultChannel::Sensor, magnitude: 5.0 },
        ],
        ..Scenario::default()
    }
}

/// Relative air-flow step of the robustness study.
pub const DISTURBANCE_STEP: f64 = -0.1;

/// Fault-free passive run with an air-flow step at 200 s.
pub fn disturbance_scenario(point: PointLabel, sensor_set: SensorSet) -> Scenario {
    Scenario {
        operating_point: point,
        duration: 600.0,
        sensor_set,
        disturbances: vec![DisturbanceStep { time: 200.0, fraction: DISTURBANCE_STEP }],
        ..Scenario::default()
    }
}

/// Fault-free runs used to set the residual thresholds: hold, the manoeuvre and its reverse,
/// each with small air-flow steps.
pub fn calibration_suite(point: PointLabel, sensor_set: SensorSet) -> Vec<Scenario> {
    let base = Scenario { operating_point: point, sensor_set, duration: 400.0, ..Scenario::default() };
    let air = vec![DisturbanceStep { time: 150.0, fraction: 0.02 }, DisturbanceStep { time: 250.0, fraction: -0.04 }];
    let step = |sign: f64| vec![ReferencePoint { time: 50.0, p_e: sign * MANOEUVRE[0], sh: sign * MANOEUVRE[1] }];
    vec![
        Scenario { duration: 300.0, ..base.clone() },
        Scenario { references: step(1.0), disturbances: air.clone(), ..base.clone() },
        Scenario { references: step(-1.0), disturbances: air, ..base },
    ]
}

/// Slow pressure ramp from the first to the last schedule point, passing through the
/// intermediate ones; `trims[i]` are the (p_e, SH) trim outputs ordered along the ramp.
pub fn ramp_scenario(start: PointLabel, trims: &[[f64; 2]], ramp_time: f64, mode: Mode) -> Scenario {
    let t0 = 100.0;
    let n = trims.len().max(2) - 1;
    let references = trims
        .iter()
        .enumerate()
        .map(|(i, y)| ReferencePoint { time: t0 + ramp_time * i as f64 / n as f64, p_e: y[0] - trims[0][0], sh: y[1] - trims[0][1] })
        .collect();
    Scenario {
        operating_point: start,
        duration: t0 + ramp_time + 100.0,
        mode,
        references,
        interpolate_references: true,
        schedule: true,
        ambient_follows_reference: true,
        ..Scenario::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_and_ramp_references() {
        let mut sc = Scenario {
            references: vec![ReferencePoint { time: 10.0, p_e: 2.0, sh: -1.0 }, ReferencePoint { time: 20.0, p_e: 4.0, sh: 1.0 }],
            ..Scenario::default()
        };
        assert_eq!(sc.reference_offset(5.0), [0.0, 0.0]);
        assert_eq!(sc.reference_offset(15.0), [2.0, -1.0]);
        assert_eq!(sc.reference_offset(25.0), [4.0, 1.0]);
        sc.interpolate_references = true;
        assert_eq!(sc.reference_offset(5.0), [2.0, -1.0]);
        assert_eq!(sc.reference_offset(15.0), [3.0, 0.0]);
        assert_eq!(sc.reference_offset(25.0), [4.0, 1.0]);
    }

    #[test]
    fn faults_accumulate_per_channel() {
        let sc = isolation_scenario(PointLabel::Med, SensorSet::ThreeOutputs);
        assert_eq!(sc.faults_at(399.0), [0.0, 0.0]);
        assert_eq!(sc.faults_at(400.0), [40.0, 0.0]);
        assert_eq!(sc.faults_at(800.0), [40.0, 5.0]);
        assert_eq!(sc.first_fault_time(), Some(400.0));
    }

    #[test]
    fn validation_rejects_bad_timing() {
        let ok = actuator_fault_scenario(PointLabel::Low, Mode::ActiveGimc);
        assert!(ok.validate().is_ok());
        assert!(Scenario { dt: 0.03, duration: 1.0, ..Scenario::default() }.validate().is_err());
        let late = Scenario { faults: vec![FaultEvent { time: 400.0, channel: FaultChannel::Sensor, magnitude: 1.0 }], ..Scenario::default() };
        assert!(late.validate().is_err());
    }

    #[test]
    fn scenario_toml_round_trip() {
        let sc = isolation_scenario(PointLabel::High, SensorSet::TwoOutputs);
        let text = toml::to_string(&sc).unwrap();
        assert!(text.contains("f_N"));
        let back: Scenario = toml::from_str(&text).unwrap();
        assert_eq!(back, sc);
    }
}
