#![allow(dead_code)]

use std::sync::OnceLock;

use ftc_core::gimc::SchedulePoint;
use ftc_core::harness::{design_point_uncalibrated, Config};
use ftc_core::plant::{LinearPlantModel, Plant, PointLabel, SensorSet};
use nalgebra::DVector;
use sslib::{Discrete, DiscreteBlock, StateSpace};

pub fn plant() -> &'static Plant {
    static PLANT: OnceLock<Plant> = OnceLock::new();
    PLANT.get_or_init(|| Config::default().build_plant().unwrap())
}

/// Uncalibrated design at one point, built once per test binary.
pub fn point(label: PointLabel, set: SensorSet) -> &'static SchedulePoint {
    static POINTS: [OnceLock<SchedulePoint>; 6] = [const { OnceLock::new() }; 6];
    let i = PointLabel::ALL.iter().position(|l| *l == label).unwrap() * 2 + (set == SensorSet::ThreeOutputs) as usize;
    POINTS[i].get_or_init(|| design_point_uncalibrated(plant(), label, set, &Config::default()).unwrap().point)
}

pub fn med() -> &'static SchedulePoint {
    point(PointLabel::Med, SensorSet::ThreeOutputs)
}

pub struct Trace {
    pub t: Vec<f64>,
    pub y: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
}

/// Sampled loop of the linear model with `k: e -> u` on the two tracked outputs, in deviation variables.
pub fn linear_loop(
    lin: &LinearPlantModel,
    k: &StateSpace,
    dt: f64,
    t_end: f64,
    r: impl Fn(f64) -> [f64; 2],
    d: impl Fn(f64) -> f64,
    f: impl Fn(f64) -> [f64; 2],
) -> Trace {
    let p = Discrete::zoh(&lin.sys, dt).unwrap();
    let mut x = DVector::zeros(p.nstates());
    let mut kb = DiscreteBlock::new(k, dt).unwrap();
    let mut tr = Trace { t: Vec::new(), y: Vec::new(), u: Vec::new() };
    let steps = (t_end / dt).round() as usize;
    for i in 0..=steps {
        let t = i as f64 * dt;
        let (fv, dv) = (f(t), d(t));
        let w = DVector::from_row_slice(&[0.0, 0.0, dv, fv[0], fv[1]]);
        let y = &p.c * &x + &p.d * &w;
        let rv = r(t);
        let e = DVector::from_row_slice(&[rv[0] - y[0], rv[1] - y[1]]);
        let u = kb.step(&e);
        let input = DVector::from_row_slice(&[u[0], u[1], dv, fv[0], fv[1]]);
        x = &p.phi * &x + &p.gamma * &input;
        tr.t.push(t);
        tr.y.push(y);
        tr.u.push(u);
    }
    tr
}
