mod common;

use common::{med, plant};
use ftc_core::gimc::*;
use ftc_core::harness::{run_scenario, FaultChannel, FaultEvent, Mode, ReferencePoint, RunSettings, Scenario};
use ftc_core::plant::PointLabel;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sslib::{hinf_norm, lft_close, verification_grid, StateSpace};

const TABLE: [f64; 3] = [302.2, 251.2, 204.6];

fn tf1(num: f64, pole: f64) -> StateSpace {
    StateSpace::new(DMatrix::from_element(1, 1, pole), DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, num), DMatrix::zeros(1, 1)).unwrap()
}

fn cmax(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn max_gap(a: &StateSpace, b: &StateSpace) -> f64 {
    verification_grid().iter().map(|&w| cmax(&(a.freq_resp(w) - b.freq_resp(w)))).fold(0.0, f64::max)
}

#[test]
fn sensitivities_open_loop() {
    let p = tf1(2.0, -1.0);
    let s = sensitivities(&p, &StateSpace::zero(1, 1)).unwrap();
    assert!(max_gap(&s.s_o, &StateSpace::identity(1)) < 1e-12);
    assert!(max_gap(&s.s_i, &StateSpace::identity(1)) < 1e-12);
    assert!(max_gap(&s.t_o, &StateSpace::zero(1, 1)) < 1e-12);
}

#[test]
fn sensitivities_static_unit_loop() {
    let one = StateSpace::gain(DMatrix::from_element(1, 1, 1.0));
    let s = sensitivities(&one, &one).unwrap();
    assert!((s.s_o.d[(0, 0)] - 0.5).abs() < 1e-12);
    assert!((s.t_o.d[(0, 0)] - 0.5).abs() < 1e-12);
}

#[test]
fn unstable_loop_is_rejected() {
    let p = tf1(1.0, 1.0);
    assert!(matches!(sensitivities(&p, &StateSpace::zero(1, 1)), Err(GimcError::UnstableLoop)));
}

#[test]
fn sensitivity_identities_for_the_designed_loop() {
    let pt = med();
    let p = pt.lin.p_uy().unwrap().select(0..2, 0..2).unwrap();
    let k = &pt.nominal.k;
    let s = sensitivities(&p, k).unwrap();
    assert!(s.s_o.is_stable() && s.s_i.is_stable() && s.t_o.is_stable());
    let i2 = DMatrix::<Complex64>::identity(2, 2);
    for &w in verification_grid().iter() {
        let (so, si, to, kw) = (s.s_o.freq_resp(w), s.s_i.freq_resp(w), s.t_o.freq_resp(w), k.freq_resp(w));
        let scale = 1.0 + cmax(&kw);
        assert!(cmax(&(&so + &to - &i2)) <= 1e-8);
        assert!(cmax(&(&kw * &so - &si * &kw)) <= 1e-8 * scale, "push-through at {w}");
    }
}

#[test]
fn realization_reproduces_controller_and_factors() {
    let nom = &med().nominal;
    let g = gimc_realization(nom).unwrap();
    let from_e = g.select(0..2, 0..2).unwrap();
    let from_q = g.select(2..4, 0..2).unwrap();
    assert!(max_gap(&from_e, &nom.k) <= 1e-9 * (1.0 + hinf_norm(&nom.k, 1e-6).unwrap()));
    let i2 = DMatrix::<Complex64>::identity(2, 2);
    for &w in verification_grid().iter() {
        let vq = nom.factors.v.freq_resp(w) * from_q.freq_resp(w);
        assert!(cmax(&(vq + &i2)) <= 1e-8, "V u = -q violated at {w}");
    }
}

#[test]
fn schedule_selection() {
    assert_eq!(schedule_select(&TABLE, 251.2, None, 10.0), 1);
    assert_eq!(schedule_select(&TABLE, 400.0, None, 10.0), 0);
    assert_eq!(schedule_select(&TABLE, 100.0, None, 10.0), 2);
    let mid = 0.5 * (TABLE[0] + TABLE[1]);
    assert_eq!(schedule_select(&TABLE, mid - 9.0, Some(0), 10.0), 0);
    assert_eq!(schedule_select(&TABLE, mid - 11.0, Some(0), 10.0), 1);
    assert_eq!(schedule_select(&TABLE, mid + 9.0, Some(1), 10.0), 1);
    assert_eq!(schedule_select(&TABLE, mid + 11.0, Some(1), 10.0), 0);
}

proptest! {
    #[test]
    fn schedule_selection_is_nearest_without_history(v in 150.0f64..350.0) {
        let i = schedule_select(&TABLE, v, None, 10.0);
        let c = v.clamp(204.6, 302.2);
        for j in 0..3 {
            prop_assert!((TABLE[i] - c).abs() <= (TABLE[j] - c).abs());
        }
    }

    #[test]
    fn hysteresis_only_delays_switching(v in 150.0f64..350.0, cur in 0usize..3) {
        let with = schedule_select(&TABLE, v, Some(cur), 10.0);
        let nearest = schedule_select(&TABLE, v, None, 10.0);
        prop_assert!(with == cur || with == nearest);
        prop_assert_eq!(schedule_select(&TABLE, v, Some(cur), 0.0), nearest);
    }
}

#[test]
fn compensators_improve_their_programs() {
    let pt = med();
    let settings = GimcSettings::default();
    for q in [pt.q_act.as_ref().unwrap(), pt.q_sen.as_ref().unwrap()] {
        assert!(q.q.is_stable(), "{:?} unstable", q.kind);
        assert!(q.cost < q.baseline, "{:?}: {} vs {}", q.kind, q.cost, q.baseline);
        assert!(q.full_cost < q.baseline);
        assert!(q.reduced_order <= settings.max_order && q.reduced_order <= q.full_order);
        assert!(q.reduced_cost <= q.full_cost * (1.0 + settings.max_loss) + 1e-9);
        assert!((0.0..=1.0).contains(&q.alpha_d) && (0.0..=1.0).contains(&q.alpha_f));
    }
}

#[test]
fn baseline_is_the_open_program() {
    let pt = med();
    let settings = GimcSettings::default();
    let t = closed_loop_blocks(&pt.lin, &pt.nominal).unwrap();
    let scale = ftc_core::fdi::residual_scaling(&pt.factors).unwrap();
    for q in [pt.q_act.as_ref().unwrap(), pt.q_sen.as_ref().unwrap()] {
        let g = q_design_plant(q.kind, &t, &pt.factors, &settings, &scale).unwrap();
        let open = g.sys.select(0..2, 0..g.nz).unwrap();
        let direct = hinf_norm(&open, 1e-6).unwrap();
        assert!((direct - q.baseline).abs() <= 1e-4 * q.baseline, "{:?}: {direct} vs {}", q.kind, q.baseline);
        let closed = hinf_norm(&lft_close(&g, &StateSpace::zero(2, 3)).unwrap(), 1e-6).unwrap();
        assert!((closed - direct).abs() <= 1e-4 * direct);
    }
}

#[test]
fn settings_are_validated() {
    assert!(GimcSettings { alpha_d: 1.5, ..GimcSettings::default() }.validate().is_err());
    assert!(GimcSettings { max_order: 0, ..GimcSettings::default() }.validate().is_err());
    assert!(GimcSettings::default().validate().is_ok());
}

#[test]
fn missing_compensator_is_a_configuration_error() {
    let mut pt = med().clone();
    pt.q_sen = None;
    assert!(matches!(GimcController::new(&pt, Gating::Flags, 5.0, 0.01), Err(GimcError::InvalidSettings(_))));
}

fn random_outputs(seed: u64, n: usize, y0: &DVector<f64>) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| y0 + DVector::from_fn(y0.len(), |_, _| rng.gen_range(-2.0..2.0))).collect()
}

#[test]
fn gated_compensator_is_dormant_until_a_flag() {
    let pt = med();
    let dt = 0.01;
    let mut nominal = NominalController::new(pt, 1e9, dt).unwrap();
    let mut gimc = GimcController::new(pt, Gating::Flags, 1e9, dt).unwrap();
    let mut forced = GimcController::new(pt, Gating::AlwaysActuator, 1e9, dt).unwrap();
    let y0 = pt.lin.y0();
    let reference = [y0[0] + 3.0, y0[1] - 1.0];
    let u_trim = [pt.lin.trim.inputs.n_c, pt.lin.trim.inputs.alpha];
    let (mut ua, mut ub, mut uc) = (u_trim, u_trim, u_trim);
    let mut forced_gap = 0.0f64;
    for (i, y) in random_outputs(11, 2000, &y0).iter().enumerate() {
        let t = i as f64 * dt;
        let a = nominal.step(t, reference, y, ua);
        let b = gimc.step(t, reference, y, ub);
        let c = forced.step(t, reference, y, uc);
        assert!(b.f_e.amax() > 0.0);
        assert_eq!(b.q, [0.0; 2]);
        assert!((a.u_cmd[0] - b.u_cmd[0]).abs() <= 1e-9 * a.u_cmd[0].abs().max(1.0));
        assert!((a.u_cmd[1] - b.u_cmd[1]).abs() <= 1e-9 * a.u_cmd[1].abs().max(1.0));
        forced_gap = forced_gap.max((c.u_cmd[0] - a.u_cmd[0]).abs());
        nominal.commit(a.u_cmd, &a.f_e);
        gimc.commit(b.u_cmd, &b.f_e);
        forced.commit(c.u_cmd, &c.f_e);
        (ua, ub, uc) = (a.u_cmd, b.u_cmd, c.u_cmd);
    }
    assert!(forced_gap > 1e-3, "connected compensator had no effect");
    assert_eq!(gimc.mode, ControllerMode::Nominal);
    assert_eq!(forced.mode, ControllerMode::Compensating(QKind::Actuator));
}

#[test]
fn flags_select_the_matching_compensator() {
    let pt = med();
    let mut gimc = GimcController::new(pt, Gating::Flags, 0.0, 0.01).unwrap();
    let y0 = pt.lin.y0();
    let u0 = [pt.lin.trim.inputs.n_c, pt.lin.trim.inputs.alpha];
    gimc.monitor_mut().state.thresholds = [f64::INFINITY, 0.0];
    let mut y = y0.clone();
    y[0] += 3.0;
    let out = gimc.step(0.0, [y0[0], y0[1]], &y, u0);
    gimc.commit(out.u_cmd, &out.f_e);
    gimc.step(0.01, [y0[0], y0[1]], &y, out.u_cmd);
    assert_eq!(gimc.monitor().flags(), [false, true]);
    assert_eq!(gimc.mode, ControllerMode::Compensating(QKind::Sensor));

    let mut other = GimcController::new(pt, Gating::Flags, 5.0, 0.01).unwrap();
    other.inherit_flags(gimc.monitor());
    assert_eq!(other.monitor().flags(), [false, true]);
    assert_eq!(other.monitor().state.onset, gimc.monitor().state.onset);
}

#[test]
fn reinitialization_is_bumpless() {
    let pt = med();
    let y0 = pt.lin.y0();
    let mut y = y0.clone();
    y[0] -= 4.0;
    y[1] += 1.5;
    let reference = [y0[0] + 2.0, y0[1]];
    let u = [pt.lin.trim.inputs.n_c + 120.0, pt.lin.trim.inputs.alpha - 3.0];
    let mut ctrls: Vec<Box<dyn LoopController>> =
        vec![Box::new(NominalController::new(pt, 5.0, 0.01).unwrap()), Box::new(GimcController::new(pt, Gating::Flags, 5.0, 0.01).unwrap())];
    for c in ctrls.iter_mut() {
        c.reinitialize(reference, &y, u).unwrap();
        let out = c.step(0.0, reference, &y, u);
        assert!((out.u_cmd[0] - u[0]).abs() < 1e-6 && (out.u_cmd[1] - u[1]).abs() < 1e-6, "{:?} vs {u:?}", out.u_cmd);
        assert!(out.f_e.amax() < 1e-6, "residual after alignment {}", out.f_e);
    }
}

#[test]
fn linear_nominal_equivalence_over_1000_s() {
    let pt = med();
    let rs = RunSettings { debounce: 5.0, hysteresis: 10.0 };
    let base = Scenario {
        operating_point: PointLabel::Med,
        duration: 1000.0,
        linear_plant: true,
        references: vec![ReferencePoint { time: 50.0, p_e: 5.0, sh: -2.5 }, ReferencePoint { time: 500.0, p_e: -3.0, sh: 1.0 }],
        ..Scenario::default()
    };
    let passive = run_scenario(plant(), std::slice::from_ref(pt), &base, &rs).unwrap();
    for gating in [Gating::Flags, Gating::AlwaysActuator, Gating::AlwaysSensor] {
        let sc = Scenario { mode: Mode::ActiveGimc, gating, ..base.clone() };
        let active = run_scenario(plant(), std::slice::from_ref(pt), &sc, &rs).unwrap();
        let gap = passive
            .samples
            .iter()
            .zip(&active.samples)
            .map(|(a, b)| (a.nc_cmd - b.nc_cmd).abs().max((a.alpha - b.alpha).abs()).max((a.pe_meas - b.pe_meas).abs()).max((a.sh - b.sh).abs()))
            .fold(0.0, f64::max);
        assert!(gap <= 1e-9, "{gating:?}: {gap:e}");
    }
}

#[test]
fn linear_actuator_fault_is_accommodated() {
    let pt = med();
    let rs = RunSettings { debounce: 5.0, hysteresis: 10.0 };
    let sc = Scenario {
        operating_point: PointLabel::Med,
        duration: 600.0,
        linear_plant: true,
        mode: Mode::ActiveGimc,
        faults: vec![FaultEvent { time: 100.0, channel: FaultChannel::Actuator, magnitude: 40.0 }],
        ..Scenario::default()
    };
    let res = run_scenario(plant(), std::slice::from_ref(pt), &sc, &rs).unwrap();
    let m = &res.metrics;
    assert!(m.final_error[0].abs() <= 0.05, "offset {:?}", m.final_error);
    assert!((m.shift.unwrap().nc_cmd + 40.0).abs() <= 2.0, "N_c shift {}", m.shift.unwrap().nc_cmd);
}
