mod common;

use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use sslib::discrete::Discrete;
use sslib::linearize::{central_difference, jacobian};
use sslib::{
    balanced_truncate, coprime_controller, factor_residual, hinf_norm, hinf_synthesize, left_coprime_factorize, lft_close,
    verification_grid, Channels, GeneralizedPlant, HinfOptions, StateSpace,
};

fn cm(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

#[test]
fn lft_zero_controller_gives_open_block() {
    let mut rng = rng(1);
    let g = random_stable(&mut rng, 4, 3, 3, 0.1);
    let gp = GeneralizedPlant::new(g.clone(), 2, 2).unwrap();
    let cl = lft_close(&gp, &StateSpace::zero(1, 1)).unwrap();
    let open = g.select(0..2, 0..2).unwrap();
    for w in [0.0, 0.3, 7.0] {
        assert!((cl.freq_resp(w) - open.freq_resp(w)).norm() < 1e-12);
    }
}

#[test]
fn lft_static_hand_formula() {
    // z = a w + b u, y = c w + d u, u = k y  ->  z = (a + b k c / (1 - d k)) w
    let (a, b, c, d, k) = (0.3, 2.0, -1.5, 0.4, 0.7);
    let g = GeneralizedPlant::new(StateSpace::gain(DMatrix::from_row_slice(2, 2, &[a, b, c, d])), 1, 1).unwrap();
    let cl = lft_close(&g, &StateSpace::gain(DMatrix::from_element(1, 1, k))).unwrap();
    let oracle = a + b * k * c / (1.0 - d * k);
    assert!((cl.d[(0, 0)] - oracle).abs() < 1e-14);
}

#[test]
fn lft_ill_posed_detected() {
    let g = GeneralizedPlant::new(StateSpace::gain(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 1.0])), 1, 1).unwrap();
    assert!(lft_close(&g, &StateSpace::gain(DMatrix::from_element(1, 1, 1.0))).is_err());
}

#[test]
fn lft_random_pointwise_oracle() {
    let mut rng = rng(2);
    for _ in 0..5 {
        let g = random_stable(&mut rng, 5, 4, 5, 0.1);
        let k = random_stable(&mut rng, 3, 2, 2, 0.1);
        let gp = GeneralizedPlant::new(g.clone(), 2, 3).unwrap();
        let cl = lft_close(&gp, &k).unwrap();
        for w in sslib::linalg::log_grid(1e-2, 1e2, 20) {
            let gw = g.freq_resp(w);
            let kw = k.freq_resp(w);
            let g11 = gw.view((0, 0), (3, 2)).into_owned();
            let g12 = gw.view((0, 2), (3, 2)).into_owned();
            let g21 = gw.view((3, 0), (2, 2)).into_owned();
            let g22 = gw.view((3, 2), (2, 2)).into_owned();
            let inner = (DMatrix::<Complex64>::identity(2, 2) - &g22 * &kw).try_inverse().unwrap();
            let oracle = g11 + g12 * &kw * inner * g21;
            let got = cl.freq_resp(w);
            assert!((got - &oracle).norm() <= 1e-10 * (1.0 + oracle.norm()));
        }
    }
}

/// Mixed-sensitivity problem for P = 1/(s-1) with W_S = 0.5 (s+10)/(s+0.01).
fn mixed_sensitivity_plant() -> GeneralizedPlant {
    // states: plant x_p, weight x_w; inputs: w = r, u; outputs: z = W_S e, y = e = r - x_p
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, -0.01]);
    let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let c = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5 * 9.99, -1.0, 0.0]);
    let d = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 1.0, 0.0]);
    GeneralizedPlant::new(StateSpace::new(a, b, c, d).unwrap(), 1, 1).unwrap()
}

#[test]
fn synthesis_mixed_sensitivity() {
    let g = mixed_sensitivity_plant();
    let res = hinf_synthesize(&g, &HinfOptions::default()).unwrap();
    let cl = lft_close(&g, &res.k).unwrap();
    assert!(cl.is_stable());
    let norm = hinf_norm(&cl, 1e-8).unwrap();
    assert!(norm <= res.gamma * (1.0 + 1e-6), "{norm} > {}", res.gamma);
    assert!(res.regularized_d12);
    // Grid cross-check of the certified norm.
    assert!(grid_norm(&cl) <= res.gamma * (1.0 + 1e-6));
}

#[test]
fn synthesis_zero_performance_path() {
    let mut rng = rng(3);
    let p = random_stable(&mut rng, 3, 2, 2, 0.2);
    // z has no dependence on anything: C1 = 0, D11 = 0, D12 = 0.
    let n = 3;
    let b = p.b.clone();
    let c = sslib::linalg::vstack(&DMatrix::zeros(1, n), &p.c.rows(0, 1).into_owned());
    let d = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    let g = GeneralizedPlant::new(StateSpace::new(p.a.clone(), b, c, d).unwrap(), 1, 1).unwrap();
    let res = hinf_synthesize(&g, &HinfOptions::default()).unwrap();
    assert!(res.gamma <= 1e-4, "gamma {}", res.gamma);
}

#[test]
fn synthesis_tolerance_refinement_monotone() {
    let g = mixed_sensitivity_plant();
    let coarse = hinf_synthesize(&g, &HinfOptions { gamma_tol: 1e-2, ..Default::default() }).unwrap();
    let fine = hinf_synthesize(&g, &HinfOptions { gamma_tol: 1e-3, ..Default::default() }).unwrap();
    assert!(fine.gamma <= coarse.gamma * (1.0 + 1e-12));
}

#[test]
fn synthesis_with_feedthrough_d11() {
    // Random plant with nonzero D11 and D22; checks the general-D formulas end to end.
    let mut rng = rng(4);
    for _ in 0..5 {
        let mut sys = random_stable(&mut rng, 4, 4, 4, 0.3);
        // Destabilize to exercise feedback.
        sys.a[(0, 0)] += 1.5;
        sys.d = randn(&mut rng, 4, 4) * 0.5;
        let g = GeneralizedPlant::new(sys, 2, 2).unwrap();
        let res = hinf_synthesize(&g, &HinfOptions::default()).unwrap();
        let cl = lft_close(&g, &res.k).unwrap();
        assert!(cl.is_stable());
        assert!(hinf_norm(&cl, 1e-8).unwrap() <= res.gamma * (1.0 + 1e-6));
    }
}

fn unstable_first_order() -> StateSpace {
    tf1(1.0, 1.0)
}

#[test]
fn coprime_unstable_plant() {
    let p = unstable_first_order();
    let f = left_coprime_factorize(&p).unwrap();
    for s in [&f.m, &f.n] {
        assert!(s.is_stable());
    }
    assert!(factor_residual(&f.n, &f.m, &p, &verification_grid()) <= 1e-8);
}

#[test]
fn coprime_static_plant() {
    let p = StateSpace::gain(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    let f = left_coprime_factorize(&p).unwrap();
    assert_eq!(f.m.nstates(), 0);
    assert_eq!(f.m.d, DMatrix::identity(2, 2));
    assert_eq!(f.n.d, p.d);
}

#[test]
fn coprime_stable_plant_with_zero_gain() {
    let mut rng = rng(6);
    let p = random_stable(&mut rng, 3, 1, 2, 0.2);
    let f = sslib::coprime::left_coprime_with_gain(&p, &DMatrix::zeros(3, 2)).unwrap();
    for w in [0.0, 1.0, 10.0] {
        assert!((f.m.freq_resp(w) - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-14);
        assert!((f.n.freq_resp(w) - p.freq_resp(w)).norm() < 1e-14);
    }
}

#[test]
fn coprime_channel_groups() {
    let mut rng = rng(7);
    let p = random_stable(&mut rng, 4, 5, 3, 0.2)
        .with_inputs(Channels::new([("u", 2), ("d", 1), ("f", 2)]))
        .unwrap();
    let f = left_coprime_factorize(&p).unwrap();
    let grid = verification_grid();
    let pu = p.select_groups(&["u"], &["y"]).unwrap();
    let pd = p.select_groups(&["d"], &["y"]).unwrap();
    let pf = p.select_groups(&["f"], &["y"]).unwrap();
    assert!(factor_residual(&f.n, &f.m, &pu, &grid) <= 1e-8);
    assert!(factor_residual(&f.n_d, &f.m, &pd, &grid) <= 1e-8);
    assert!(factor_residual(&f.n_f, &f.m, &pf, &grid) <= 1e-8);
}

#[test]
fn controller_factors() {
    let mut rng = rng(8);
    let mut k = random_stable(&mut rng, 4, 2, 2, 0.1);
    k.a[(1, 1)] += 3.0; // unstable controller
    let f = coprime_controller(&k).unwrap();
    assert!(f.v.is_stable() && f.u.is_stable());
    assert!(factor_residual(&f.u, &f.v, &k, &verification_grid()) <= 1e-8);
}

#[test]
fn balred_full_order_is_identity() {
    let mut rng = rng(9);
    let g = random_stable(&mut rng, 5, 2, 2, 0.1);
    let t = balanced_truncate(&g, 5).unwrap();
    assert_eq!(t.error_bound, 0.0);
    assert_eq!(t.reduced, g);
}

#[test]
fn balred_exact_on_nonminimal() {
    let mut rng = rng(10);
    let g1 = random_stable(&mut rng, 3, 1, 1, 0.2);
    let g2 = random_stable(&mut rng, 2, 1, 1, 0.2);
    // Uncontrollable extra states.
    let a = sslib::linalg::blkdiag(&g1.a, &g2.a);
    let b = sslib::linalg::vstack(&g1.b, &DMatrix::zeros(2, 1));
    let c = sslib::linalg::hstack(&g1.c, &g2.c);
    let g = StateSpace::new(a, b, c, g1.d.clone()).unwrap();
    let t = balanced_truncate(&g, 3).unwrap();
    assert_eq!(t.reduced.nstates(), 3);
    let err = hinf_norm(&g.sub(&t.reduced).unwrap(), 1e-8).unwrap();
    assert!(err <= 1e-8, "error {err}");
}

#[test]
fn balred_bound_random() {
    let mut rng = rng(12);
    let g = random_stable(&mut rng, 10, 2, 2, 0.1);
    let t = balanced_truncate(&g, 4).unwrap();
    let err = hinf_norm(&g.sub(&t.reduced).unwrap(), 1e-8).unwrap();
    assert!(err <= t.error_bound * (1.0 + 1e-6), "{err} > {}", t.error_bound);
    assert!(t.reduced.is_stable());
}

#[test]
fn zoh_scalar_closed_form() {
    let (a, b, dt) = (-0.7, 2.0, 0.05);
    let g = tf1(1.0, a).scale_inputs(&DMatrix::from_element(1, 1, b)).unwrap();
    let d = Discrete::zoh(&g, dt).unwrap();
    assert!((d.phi[(0, 0)] - (a * dt).exp()).abs() < 1e-15);
    assert!((d.gamma[(0, 0)] - b * ((a * dt).exp() - 1.0) / a).abs() < 1e-14);
}

#[test]
fn jacobian_of_linear_map_exact() {
    let mut rng = rng(13);
    let m = randn(&mut rng, 3, 4);
    let f = |x: &nalgebra::DVector<f64>| Ok(&m * x);
    let x = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
    let j = jacobian(&f, &x, &[1e-3; 4]).unwrap();
    assert!((j - &m).norm() < 1e-8);
}

#[test]
fn central_difference_second_order() {
    let f = |x: &nalgebra::DVector<f64>| Ok(nalgebra::DVector::from_vec(vec![x[0].sin() * x[0].exp()]));
    let x = nalgebra::DVector::from_vec(vec![0.7]);
    let exact = 0.7f64.exp() * (0.7f64.sin() + 0.7f64.cos());
    let e1 = (central_difference(&f, &x, 0, 1e-2).unwrap()[0] - exact).abs();
    let e2 = (central_difference(&f, &x, 0, 5e-3).unwrap()[0] - exact).abs();
    assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
    let rich = jacobian(&f, &x, &[1e-2]).unwrap()[(0, 0)];
    assert!((rich - exact).abs() < e2 / 10.0);
}

#[test]
fn serialization_roundtrip_exact() {
    let mut rng = rng(14);
    let g = random_stable(&mut rng, 3, 3, 2, 0.1)
        .with_inputs(Channels::new([("u", 2), ("d", 1)]))
        .unwrap();
    let text = sslib::io::to_toml_string(&g).unwrap();
    let back = sslib::io::from_toml_str(&text).unwrap();
    assert_eq!(back, g);
}

#[test]
fn series_and_inverse() {
    let mut rng = rng(15);
    let mut g = random_stable(&mut rng, 3, 2, 2, 0.1);
    g.d = DMatrix::identity(2, 2) + randn(&mut rng, 2, 2) * 0.1;
    let prod = g.mul(&g.inverse().unwrap()).unwrap();
    for w in [0.0, 0.5, 20.0] {
        assert!((prod.freq_resp(w) - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-10);
    }
    let _ = cm(&g.d);
}
