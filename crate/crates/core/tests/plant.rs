use ftc_core::plant::*;
use ftc_core::props::PropertyModel;
use proptest::prelude::*;

fn plant() -> Plant {
    Plant::new(PlantParams::default()).unwrap()
}

fn trim(p: &Plant, label: PointLabel) -> TrimResult {
    p.trim(&OperatingPoint::get(label).target()).unwrap()
}

fn rpm(omega: f64) -> f64 {
    omega * 60.0 / (2.0 * std::f64::consts::PI)
}

#[test]
fn compressor_flow_product() {
    let params = PlantParams { eta_v: 0.7, v_d: 1e-4, clearance: 0.0, ..PlantParams::default() };
    let (m, h_out) = compressor_flow(250.0, 14.0, 0.0, 400.0, 1000.0, rpm(100.0), &params).unwrap();
    assert!((m - 0.098).abs() < 1e-12, "{m}");
    assert!(h_out >= 400.0);
    let (zero, _) = compressor_flow(250.0, 14.0, 0.0, 400.0, 1000.0, 0.0, &params).unwrap();
    assert_eq!(zero, 0.0);
    assert!(compressor_flow(250.0, 14.0, 0.0, 400.0, 1000.0, -1.0, &params).is_err());
}

#[test]
fn valve_flow_hand_evaluation() {
    let params = PlantParams::default();
    let rho = 1150.0;
    let got = valve_flow(40.0, 1000.0, 300.0, rho, &params).unwrap();
    let want = params.c_d * 0.4 * params.a_v_max * (2.0 * rho * 700e3).sqrt();
    assert!((got - want).abs() <= 1e-12 * want);
    assert_eq!(valve_flow(40.0, 500.0, 500.0, rho, &params).unwrap(), 0.0);
    assert_eq!(valve_flow(0.0, 900.0, 300.0, rho, &params).unwrap(), 0.0);
    assert!(matches!(valve_flow(40.0, 300.0, 500.0, rho, &params), Err(PlantError::NegativePressureDrop { .. })));
    assert!(matches!(valve_flow(120.0, 900.0, 300.0, rho, &params), Err(PlantError::InvalidInput(_))));
}

#[test]
fn condenser_map_anchor_and_subcooling() {
    let c = CondenserParams::default();
    assert!((condenser_target(c.mdot_c0, c.t_ca0, &c) - c.p_c0).abs() < 1e-12);
    let props = PropertyModel::r134a();
    let (rate, h_3) = condenser_update(c.p_c0, c.mdot_c0, c.t_ca0, props, &c).unwrap();
    assert!(rate.abs() < 1e-12);
    assert!(h_3 < props.sat_props(c.p_c0).unwrap().h_f);
}

#[test]
fn condenser_lag_is_first_order() {
    let c = CondenserParams::default();
    let props = PropertyModel::r134a();
    let target = condenser_target(c.mdot_c0 * 1.2, c.t_ca0, &c);
    let (mut p, dt) = (c.p_c0, 1e-3);
    let steps = (c.tau_c / dt).round() as usize;
    for _ in 0..steps {
        let (rate, _) = condenser_update(p, c.mdot_c0 * 1.2, c.t_ca0, props, &c).unwrap();
        p += dt * rate;
    }
    let expected = target + (c.p_c0 - target) * (-1.0f64).exp();
    assert!((p - expected).abs() < 1e-3 * (target - c.p_c0).abs(), "{p} vs {expected}");
}

#[test]
fn wall_balance() {
    let params = PlantParams::default();
    let (rate, q_air) = wall_dynamics(0.5, 20.0, 0.0, 0.1, 20.0, &params);
    assert_eq!(rate, 0.0);
    assert_eq!(q_air, 0.0);
    let (cold, _) = wall_dynamics(0.5, 10.0, 0.3, 0.1, 25.0, &params);
    let (warm, _) = wall_dynamics(0.5, 10.0, 0.3, 0.1, 26.0, &params);
    assert!(warm > cold);
}

#[test]
fn outputs_and_pressure_fault() {
    let p = plant();
    let tr = trim(&p, PointLabel::Med);
    let clean = p.outputs(&tr.state, 0.0).unwrap();
    assert_eq!(clean.p_e, tr.state.evap.p_e);
    let faulty = p.outputs(&tr.state, 5.0).unwrap();
    assert_eq!(faulty.p_e, tr.state.evap.p_e + 5.0);
    assert_eq!(faulty.sh, clean.sh);
    assert!(clean.sh >= 0.0);
    assert_eq!(clean.t_e2w, tr.state.evap.t_w2);

    let mut boundary = tr.state;
    boundary.evap.h_e2 = p.props.sat_props(boundary.evap.p_e).unwrap().h_g;
    assert!(p.outputs(&boundary, 0.0).unwrap().sh.abs() < 0.5);
}

#[test]
fn trims_are_equilibria() {
    let p = plant();
    for label in PointLabel::ALL {
        let tr = trim(&p, label);
        assert!(tr.residual <= 1e-8, "{label:?} residual {}", tr.residual);
        let rhs = p.evaporator_rhs(&tr.state, &tr.inputs, &tr.boundary).unwrap();
        let sc = state_scales();
        let scaled = rhs.xdot.iter().zip(sc).map(|(d, s)| (d / s).powi(2)).sum::<f64>().sqrt();
        assert!(scaled <= 1e-8, "{label:?} |Z^-1 f| = {scaled}");

        let sv = rhs.z.clone().svd(false, false).singular_values;
        let cond = sv.max() / sv.min();
        assert!(cond.is_finite() && cond < 1e9, "{label:?} cond(Z) = {cond}");

        let i = &rhs.internals;
        assert!((i.mdot_v - i.mdot_c).abs() <= 1e-6 * i.mdot_c);
        assert!((i.mdot_12 - i.mdot_c).abs() <= 1e-6 * i.mdot_c);
        let absorbed = i.mdot_c * (tr.state.evap.h_e2 - i.h_in);
        assert!((absorbed - (i.q_tp + i.q_sh)).abs() <= 1e-6 * absorbed.abs());

        let t_sat = p.props.sat_props(tr.state.evap.p_e).unwrap().t_sat;
        assert!(t_sat < tr.state.evap.t_w1 && tr.state.evap.t_w1 < tr.boundary.t_ea_in, "{label:?} wall sandwich");
    }
}

#[test]
fn table_pressures_within_ten_percent() {
    let p = plant();
    for (label, p_table) in [(PointLabel::Low, 302.2), (PointLabel::Med, 251.2), (PointLabel::High, 204.6)] {
        let p_e = trim(&p, label).state.evap.p_e;
        assert!((p_e - p_table).abs() <= 0.1 * p_table, "{label:?}: {p_e} vs {p_table}");
    }
}

#[test]
fn step_preserves_equilibrium() {
    let p = plant();
    let tr = trim(&p, PointLabel::Med);
    let next = p.step(&tr.state, &tr.inputs, &tr.boundary, &FaultVector::default(), 0.01).unwrap();
    for ((a, b), s) in next.to_array().iter().zip(tr.state.to_array()).zip(state_scales()) {
        assert!((a - b).abs() <= 1e-10 * s, "{a} vs {b}");
    }
}

fn run(p: &Plant, tr: &TrimResult, u: PlantInputs, faults: FaultVector, dt: f64, t_end: f64) -> PlantState {
    let mut x = tr.state;
    for _ in 0..(t_end / dt).round() as usize {
        x = p.step(&x, &u, &tr.boundary, &faults, dt).unwrap();
    }
    x
}

#[test]
fn second_order_self_convergence() {
    let p = plant();
    let tr = trim(&p, PointLabel::Med);
    let u = PlantInputs { n_c: tr.inputs.n_c + 50.0, alpha: tr.inputs.alpha - 1.0 };
    let runs: Vec<[f64; NSTATES]> = [0.04, 0.02, 0.01].iter().map(|&dt| run(&p, &tr, u, FaultVector::default(), dt, 10.0).to_array()).collect();
    let sc = state_scales();
    let diff = |a: &[f64; NSTATES], b: &[f64; NSTATES]| a.iter().zip(b).zip(sc).map(|((x, y), s)| ((x - y) / s).abs()).fold(0.0, f64::max);
    let (e1, e2) = (diff(&runs[0], &runs[1]), diff(&runs[1], &runs[2]));
    assert!(e2 > 0.0 && e1 / e2 > 3.0, "error ratio {} ({e1:e}, {e2:e})", e1 / e2);
}

#[test]
fn compressor_speed_lowers_pressure() {
    let p = plant();
    let tr = trim(&p, PointLabel::Med);
    let u = PlantInputs { n_c: tr.inputs.n_c + 100.0, alpha: tr.inputs.alpha };
    let x = run(&p, &tr, u, FaultVector::default(), 0.01, 30.0);
    assert!(x.evap.p_e < tr.state.evap.p_e - 1.0, "{} vs {}", x.evap.p_e, tr.state.evap.p_e);
}

#[test]
fn actuator_fault_adds_to_speed() {
    let p = plant();
    let tr = trim(&p, PointLabel::Med);
    let with_fault = run(&p, &tr, tr.inputs, FaultVector { f_n: 40.0, f_p: 0.0 }, 0.01, 5.0);
    let shifted = run(&p, &tr, PlantInputs { n_c: tr.inputs.n_c + 40.0, ..tr.inputs }, FaultVector::default(), 0.01, 5.0);
    assert_eq!(with_fault, shifted);
}

#[test]
fn deterministic_trajectories() {
    let p = plant();
    let tr = trim(&p, PointLabel::Low);
    let u = PlantInputs { n_c: tr.inputs.n_c - 30.0, alpha: tr.inputs.alpha + 2.0 };
    let a = run(&p, &tr, u, FaultVector::default(), 0.01, 20.0);
    let b = run(&p, &tr, u, FaultVector::default(), 0.01, 20.0);
    assert_eq!(a.to_array().map(f64::to_bits), b.to_array().map(f64::to_bits));
}

#[test]
fn invalid_step_is_rejected() {
    let p = plant();
    let tr = trim(&p, PointLabel::Med);
    assert!(p.step(&tr.state, &tr.inputs, &tr.boundary, &FaultVector::default(), 0.0).is_err());
    let mut collapsed = tr.state;
    collapsed.evap.zeta = 0.999;
    assert!(p.step(&collapsed, &tr.inputs, &tr.boundary, &FaultVector::default(), 0.01).is_err());
}

proptest! {
    #[test]
    fn compressor_flow_linear_in_speed(n in 100.0f64..3000.0, p_s in 180.0f64..320.0, rho in 8.0f64..16.0) {
        let params = PlantParams::default();
        let (m1, _) = compressor_flow(p_s, rho, 0.0, 400.0, 1000.0, n, &params).unwrap();
        let (m2, _) = compressor_flow(p_s, rho, 0.0, 400.0, 1000.0, 2.0 * n, &params).unwrap();
        prop_assert!((m2 - 2.0 * m1).abs() <= 1e-12 * m2);
    }

    #[test]
    fn valve_flow_square_root_law(alpha in 1.0f64..100.0, dp in 10.0f64..400.0, p_down in 150.0f64..400.0) {
        let params = PlantParams::default();
        let m1 = valve_flow(alpha, p_down + dp, p_down, 1200.0, &params).unwrap();
        let m4 = valve_flow(alpha, p_down + 4.0 * dp, p_down, 1200.0, &params).unwrap();
        prop_assert!(m1 > 0.0);
        prop_assert!((m4 - 2.0 * m1).abs() <= 1e-12 * m4);
    }
}
