//! R134a property fits: saturation curves and the superheated-vapour region.

use std::sync::OnceLock;

use serde::Deserialize;
use thiserror::Error;

pub const FIT_HEADER: &str = "# r134a-fit v1";
const BUNDLED_FIT: &str = include_str!("../data/r134a_fit.toml");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropsError {
    #[error("pressure {p:.3} kPa outside the property envelope")]
    EnvelopeExceeded { p: f64 },
    #[error("enthalpy {h:.3} kJ/kg below saturated vapour ({h_g:.3}) at {p:.3} kPa")]
    NotSuperheated { p: f64, h: f64, h_g: f64 },
    #[error("superheat enthalpy offset {dh:.3} kJ/kg outside the fitted range at {p:.3} kPa")]
    SuperheatRange { p: f64, dh: f64 },
    #[error("inlet quality {0} outside [0, 1]")]
    Quality(f64),
    #[error("property file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Deserialize)]
struct Meta {
    p_min_kpa: f64,
    p_max_kpa: f64,
    p_ref_kpa: f64,
    dh_max_kjkg: f64,
    dh_scale_kjkg: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct Curve {
    #[serde(default)]
    log: bool,
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct Surface {
    nx: usize,
    nh: usize,
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct FitFile {
    meta: Meta,
    tsat: Curve,
    rho_f: Curve,
    rho_g: Curve,
    h_f: Curve,
    h_g: Curve,
    rho_sh: Surface,
    t_sh: Surface,
}

/// Saturation properties at one pressure; derivatives are with respect to p in kPa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationState {
    pub p: f64,
    pub t_sat: f64,
    pub rho_f: f64,
    pub rho_g: f64,
    pub h_f: f64,
    pub h_g: f64,
    pub d_t_sat_dp: f64,
    pub d_rho_f_dp: f64,
    pub d_rho_g_dp: f64,
    pub d_h_f_dp: f64,
    pub d_h_g_dp: f64,
}

/// Superheated-vapour density and temperature with partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShProps {
    pub rho: f64,
    pub t: f64,
    pub d_rho_dp: f64,
    pub d_rho_dh: f64,
    pub d_t_dp: f64,
    pub d_t_dh: f64,
}

#[derive(Debug, Clone)]
pub struct PropertyModel {
    meta: Meta,
    fit: FitFile,
}

/// Polynomial value and first derivative (ascending coefficients).
fn poly(c: &[f64], x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut dv = 0.0;
    for &a in c.iter().rev() {
        dv = dv * x + v;
        v = v * x + a;
    }
    (v, dv)
}

/// Bivariate polynomial value and partials in x and s.
fn surface(sf: &Surface, x: f64, s: f64) -> (f64, f64, f64) {
    let mut v = 0.0;
    let mut vx = 0.0;
    let mut vs = 0.0;
    let mut xi = 1.0;
    let mut dxi = 0.0;
    for i in 0..=sf.nx {
        let row = &sf.coeffs[i * (sf.nh + 1)..(i + 1) * (sf.nh + 1)];
        let (q, dq) = poly(row, s);
        v += xi * q;
        vx += dxi * q;
        vs += xi * dq;
        dxi = dxi * x + xi;
        xi *= x;
    }
    (v, vx, vs)
}

impl PropertyModel {
    pub fn from_toml_str(text: &str) -> Result<Self, PropsError> {
        let first = text.lines().next().unwrap_or("").trim();
        if first != FIT_HEADER {
            return Err(PropsError::Format(format!("expected header `{FIT_HEADER}`, found `{first}`")));
        }
        let fit: FitFile = toml::from_str(text).map_err(|e| PropsError::Format(e.to_string()))?;
        for (name, c) in [("tsat", &fit.tsat), ("rho_f", &fit.rho_f), ("rho_g", &fit.rho_g), ("h_f", &fit.h_f), ("h_g", &fit.h_g)] {
            if c.coeffs.is_empty() {
                return Err(PropsError::Format(format!("{name}: no coefficients")));
            }
        }
        for (name, s) in [("rho_sh", &fit.rho_sh), ("t_sh", &fit.t_sh)] {
            if s.coeffs.len() != (s.nx + 1) * (s.nh + 1) {
                return Err(PropsError::Format(format!("{name}: expected {} coefficients", (s.nx + 1) * (s.nh + 1))));
            }
        }
        Ok(PropertyModel { meta: fit.meta.clone(), fit })
    }

    /// The bundled R134a fit.
    pub fn r134a() -> &'static PropertyModel {
        static MODEL: OnceLock<PropertyModel> = OnceLock::new();
        MODEL.get_or_init(|| PropertyModel::from_toml_str(BUNDLED_FIT).expect("bundled fit parses"))
    }

    pub fn pressure_envelope(&self) -> (f64, f64) {
        (self.meta.p_min_kpa, self.meta.p_max_kpa)
    }

    pub fn superheat_limit(&self) -> f64 {
        self.meta.dh_max_kjkg
    }

    fn check_p(&self, p: f64) -> Result<(), PropsError> {
        if p.is_finite() && p >= self.meta.p_min_kpa && p <= self.meta.p_max_kpa {
            Ok(())
        } else {
            Err(PropsError::EnvelopeExceeded { p })
        }
    }

    pub fn sat_props(&self, p: f64) -> Result<SaturationState, PropsError> {
        self.check_p(p)?;
        let x = (p / self.meta.p_ref_kpa).ln();
        let eval = |c: &Curve| {
            let (v, dv) = poly(&c.coeffs, x);
            if c.log {
                let e = v.exp();
                (e, e * dv / p)
            } else {
                (v, dv / p)
            }
        };
        let (t_sat, d_t_sat_dp) = eval(&self.fit.tsat);
        let (rho_f, d_rho_f_dp) = eval(&self.fit.rho_f);
        let (rho_g, d_rho_g_dp) = eval(&self.fit.rho_g);
        let (h_f, d_h_f_dp) = eval(&self.fit.h_f);
        let (h_g, d_h_g_dp) = eval(&self.fit.h_g);
        Ok(SaturationState { p, t_sat, rho_f, rho_g, h_f, h_g, d_t_sat_dp, d_rho_f_dp, d_rho_g_dp, d_h_f_dp, d_h_g_dp })
    }

    pub fn sh_props(&self, p: f64, h: f64) -> Result<ShProps, PropsError> {
        let sat = self.sat_props(p)?;
        let dh = h - sat.h_g;
        if !(dh >= 0.0) {
            return Err(PropsError::NotSuperheated { p, h, h_g: sat.h_g });
        }
        if dh > self.meta.dh_max_kjkg {
            return Err(PropsError::SuperheatRange { p, dh });
        }
        let x = (p / self.meta.p_ref_kpa).ln();
        let scale = self.meta.dh_scale_kjkg;
        let s = dh / scale;
        let ddh_dp = -sat.d_h_g_dp;

        let (g, gx, gs) = surface(&self.fit.t_sh, x, s);
        let t = sat.t_sat + dh * g;
        let dg_dp = gx / p + gs * ddh_dp / scale;
        let d_t_dp = sat.d_t_sat_dp + ddh_dp * g + dh * dg_dp;
        let d_t_dh = g + dh * gs / scale;

        let (q, qx, qs) = surface(&self.fit.rho_sh, x, s);
        let den = 1.0 + dh * q;
        let rho = sat.rho_g / den;
        let dq_dp = qx / p + qs * ddh_dp / scale;
        let dden_dp = ddh_dp * q + dh * dq_dp;
        let dden_dh = q + dh * qs / scale;
        let d_rho_dp = sat.d_rho_g_dp / den - sat.rho_g * dden_dp / (den * den);
        let d_rho_dh = -sat.rho_g * dden_dh / (den * den);
        Ok(ShProps { rho, t, d_rho_dp, d_rho_dh, d_t_dp, d_t_dh })
    }

    /// Mean void fraction over qualities `[x_in, 1]` (Zivi slip).
    pub fn mean_void_fraction(&self, p: f64, x_in: f64) -> Result<f64, PropsError> {
        let sat = self.sat_props(p)?;
        mean_void_fraction_from_densities(sat.rho_f, sat.rho_g, x_in)
    }
}

/// Local void fraction at quality `x` with slip ratio `(rho_f/rho_g)^(1/3)`.
pub fn void_fraction(rho_f: f64, rho_g: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let slip = (rho_f / rho_g).cbrt();
    1.0 / (1.0 + (1.0 - x) / x * (rho_g / rho_f) * slip)
}

const GAUSS_ORDER: usize = 32;

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_ORDER;
        (0..n)
            .map(|i| {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

/// Mean void fraction for given phase densities; exposed for testing degenerate cases.
pub fn mean_void_fraction_from_densities(rho_f: f64, rho_g: f64, x_in: f64) -> Result<f64, PropsError> {
    if !(0.0..=1.0).contains(&x_in) {
        return Err(PropsError::Quality(x_in));
    }
    if x_in >= 1.0 {
        return Ok(1.0);
    }
    let half = 0.5 * (1.0 - x_in);
    let mid = 0.5 * (1.0 + x_in);
    Ok(0.5 * gauss_legendre().iter().map(|&(t, w)| w * void_fraction(rho_f, rho_g, mid + half * t)).sum::<f64>())
}
