use ftc_core::props::{mean_void_fraction_from_densities, void_fraction, PropertyModel, PropsError};
use proptest::prelude::*;

fn table(name: &str) -> Vec<Vec<f64>> {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    let mut rd = csv::Reader::from_path(path).unwrap();
    rd.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

#[test]
fn saturation_matches_table() {
    let m = PropertyModel::r134a();
    let (lo, hi) = m.pressure_envelope();
    let mut checked = 0;
    for row in table("r134a_saturation.csv") {
        let (t, p) = (row[0], row[1]);
        if p < lo || p > hi {
            assert!(matches!(m.sat_props(p), Err(PropsError::EnvelopeExceeded { .. })));
            continue;
        }
        let s = m.sat_props(p).unwrap();
        assert!((s.t_sat - t).abs() <= 0.5, "T_sat({p}) = {} vs {t}", s.t_sat);
        assert!(rel(s.rho_f, row[2]) < 0.01, "rho_f at {p}");
        assert!(rel(s.rho_g, row[3]) < 0.02, "rho_g at {p}");
        assert!((s.h_f - row[4]).abs() < 1.0, "h_f at {p}");
        assert!((s.h_g - row[5]).abs() < 1.0, "h_g at {p}");
        checked += 1;
    }
    assert!(checked > 20);
}

#[test]
fn zero_celsius_near_293_kpa() {
    let s = PropertyModel::r134a().sat_props(293.0).unwrap();
    assert!(s.t_sat.abs() <= 0.5, "T_sat = {}", s.t_sat);
}

#[test]
fn med_trim_pressure_is_two_phase() {
    let s = PropertyModel::r134a().sat_props(251.2).unwrap();
    assert!(s.rho_f > s.rho_g && s.rho_g > 0.0 && s.h_g > s.h_f);
}

#[test]
fn superheated_matches_table() {
    let m = PropertyModel::r134a();
    let mut checked = 0;
    for row in table("r134a_superheated.csv") {
        let (p, t, h, rho) = (row[0], row[1], row[2], row[3]);
        match m.sh_props(p, h) {
            Ok(sh) => {
                assert!((sh.t - t).abs() <= 2.0, "T({p}, {h}) = {} vs {t}", sh.t);
                assert!(rel(sh.rho, rho) < 0.03, "rho({p}, {h}) = {} vs {rho}", sh.rho);
                checked += 1;
            }
            Err(PropsError::SuperheatRange { .. }) | Err(PropsError::EnvelopeExceeded { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(checked > 15);
}

#[test]
fn superheat_raises_temperature() {
    let m = PropertyModel::r134a();
    let s = m.sat_props(300.0).unwrap();
    let sh = m.sh_props(300.0, s.h_g + 20.0).unwrap();
    assert!(sh.t - s.t_sat > 0.0);
    let at_boundary = m.sh_props(300.0, s.h_g).unwrap();
    assert!((at_boundary.t - s.t_sat).abs() < 0.5);
}

#[test]
fn envelope_and_phase_errors() {
    let m = PropertyModel::r134a();
    let (lo, hi) = m.pressure_envelope();
    assert!(matches!(m.sat_props(lo - 1.0), Err(PropsError::EnvelopeExceeded { .. })));
    assert!(matches!(m.sat_props(hi + 1.0), Err(PropsError::EnvelopeExceeded { .. })));
    let hg = m.sat_props(300.0).unwrap().h_g;
    assert!(matches!(m.sh_props(300.0, hg - 5.0), Err(PropsError::NotSuperheated { .. })));
    assert!(matches!(m.mean_void_fraction(300.0, 1.5), Err(PropsError::Quality(_))));
}

#[test]
fn bad_fit_file_is_rejected() {
    assert!(matches!(PropertyModel::from_toml_str("tsat = 1"), Err(PropsError::Format(_))));
}

#[test]
fn monotone_on_grid() {
    let m = PropertyModel::r134a();
    let (lo, hi) = m.pressure_envelope();
    let grid: Vec<_> = (0..100).map(|i| m.sat_props(lo + (hi - lo) * i as f64 / 99.0).unwrap()).collect();
    for w in grid.windows(2) {
        assert!(w[1].t_sat > w[0].t_sat);
        assert!(w[1].h_g > w[0].h_g);
        assert!(1.0 / w[1].rho_g < 1.0 / w[0].rho_g, "specific volume of vapour falls with pressure");
    }
}

#[test]
fn saturation_derivatives_on_grid() {
    let m = PropertyModel::r134a();
    let (lo, hi) = m.pressure_envelope();
    for i in 0..20 {
        let p = 1.01 * lo + (0.99 * hi - 1.01 * lo) * i as f64 / 19.0;
        let h = 1e-4 * p;
        let (a, b, s) = (m.sat_props(p + h).unwrap(), m.sat_props(p - h).unwrap(), m.sat_props(p).unwrap());
        let fd = |f: fn(&ftc_core::props::SaturationState) -> f64| (f(&a) - f(&b)) / (2.0 * h);
        let pairs = [
            (s.d_t_sat_dp, fd(|x| x.t_sat)),
            (s.d_rho_f_dp, fd(|x| x.rho_f)),
            (s.d_rho_g_dp, fd(|x| x.rho_g)),
            (s.d_h_f_dp, fd(|x| x.h_f)),
            (s.d_h_g_dp, fd(|x| x.h_g)),
        ];
        for (an, num) in pairs {
            assert!((an - num).abs() <= 1e-6 * an.abs().max(num.abs()) + 1e-9, "p {p}: {an} vs {num}");
        }
    }
}

#[test]
fn superheat_derivatives_on_grid() {
    let m = PropertyModel::r134a();
    let (lo, hi) = m.pressure_envelope();
    let dh_max = m.superheat_limit();
    for i in 0..20 {
        let p = 1.01 * lo + (0.99 * hi - 1.01 * lo) * i as f64 / 19.0;
        for j in 0..20 {
            let hg = m.sat_props(p).unwrap().h_g;
            let h = hg + 0.5 + (dh_max - 1.0) * j as f64 / 19.0;
            let sh = m.sh_props(p, h).unwrap();
            let (dp, dh) = (1e-4 * p, 1e-3);
            let fp = |f: fn(&ftc_core::props::ShProps) -> f64| (f(&m.sh_props(p + dp, h).unwrap()) - f(&m.sh_props(p - dp, h).unwrap())) / (2.0 * dp);
            let fh = |f: fn(&ftc_core::props::ShProps) -> f64| (f(&m.sh_props(p, h + dh).unwrap()) - f(&m.sh_props(p, h - dh).unwrap())) / (2.0 * dh);
            let pairs = [(sh.d_rho_dh, fh(|x| x.rho)), (sh.d_t_dh, fh(|x| x.t)), (sh.d_rho_dp, fp(|x| x.rho)), (sh.d_t_dp, fp(|x| x.t))];
            for (an, num) in pairs {
                assert!((an - num).abs() <= 1e-6 * an.abs().max(num.abs()) + 1e-9, "({p}, {h}): {an} vs {num}");
            }
        }
    }
}

/// Brute-force trapezoid rule over the quality range.
fn void_fraction_oracle(rho_f: f64, rho_g: f64, x_in: f64) -> f64 {
    let n = 10_000;
    let dx = (1.0 - x_in) / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let x = x_in + i as f64 * dx;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        sum += w * void_fraction(rho_f, rho_g, x);
    }
    sum * dx / (1.0 - x_in)
}

#[test]
fn mean_void_fraction_against_quadrature() {
    let m = PropertyModel::r134a();
    let s = m.sat_props(300.0).unwrap();
    let got = m.mean_void_fraction(300.0, 0.2).unwrap();
    let want = void_fraction_oracle(s.rho_f, s.rho_g, 0.2);
    assert!((got - want).abs() <= 1e-6, "{got} vs {want}");
}

#[test]
fn mean_void_fraction_limits() {
    let g = mean_void_fraction_from_densities(1.0, 1.0, 0.0).unwrap();
    assert!((g - 0.5).abs() < 1e-9);
    let near_one = mean_void_fraction_from_densities(1200.0, 12.0, 1.0 - 1e-9).unwrap();
    assert!((near_one - 1.0).abs() < 1e-6);
}

proptest! {
    #[test]
    fn mean_void_fraction_nondecreasing(p in 160.0f64..1900.0, a in 0.0f64..0.98, b in 0.0f64..0.98) {
        let m = PropertyModel::r134a();
        let (x0, x1) = if a <= b { (a, b) } else { (b, a) };
        let g0 = m.mean_void_fraction(p, x0).unwrap();
        let g1 = m.mean_void_fraction(p, x1).unwrap();
        prop_assert!(g0 > 0.0 && g1 <= 1.0);
        prop_assert!(g1 >= g0 - 1e-12);
    }
}
