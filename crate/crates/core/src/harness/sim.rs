//! Closed-loop simulation, time series and metrics.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sslib::Discrete;

use super::{HarnessError, Mode, Scenario};
use crate::gimc::{schedule_select, GimcController, LoopController, NominalController, SchedulePoint};
use crate::plant::{trim_outputs, BoundaryConditions, FaultVector, Plant, PlantInputs, PlantState};

/// Runtime settings shared by all scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    /// Time a residual must stay above threshold before its flag latches (s).
    pub debounce: f64,
    /// Scheduling hysteresis (kPa).
    pub hysteresis: f64,
}

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub pe_true: f64,
    pub pe_meas: f64,
    pub sh: f64,
    #[serde(rename = "Nc_cmd")]
    pub nc_cmd: f64,
    #[serde(rename = "Nc_act")]
    pub nc_act: f64,
    pub alpha: f64,
    pub mdot_ea: f64,
    pub r1: f64,
    pub r2: f64,
    pub flag1: u8,
    pub flag2: u8,
    pub q1: f64,
    pub q2: f64,
}

pub const CSV_HEADER: [&str; 14] = ["t", "pe_true", "pe_meas", "sh", "Nc_cmd", "Nc_act", "alpha", "mdot_ea", "r1", "r2", "flag1", "flag2", "q1", "q2"];

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub samples: Vec<Sample>,
    /// Trim outputs (p_e, SH) of the starting point; references are offsets from them.
    pub reference_base: [f64; 2],
    /// Times at which the active schedule point changed.
    pub switch_times: Vec<f64>,
    pub metrics: Metrics,
}

fn point_index(points: &[SchedulePoint], sc: &Scenario) -> Result<usize, HarnessError> {
    points
        .iter()
        .position(|p| p.label == sc.operating_point)
        .ok_or_else(|| HarnessError::Config(format!("no design for the {} point", sc.operating_point.name())))
}

fn build_controller(point: &SchedulePoint, mode: Mode, sc: &Scenario, rs: &RunSettings) -> Result<Box<dyn LoopController>, HarnessError> {
    let cfg = |e: crate::gimc::GimcError| HarnessError::Config(e.to_string());
    Ok(match mode {
        Mode::Passive => Box::new(NominalController::new(point, rs.debounce, sc.dt).map_err(cfg)?),
        Mode::ActiveGimc => Box::new(GimcController::new(point, sc.gating, rs.debounce, sc.dt).map_err(cfg)?),
    })
}

/// Boundary conditions interpolated by the pressure reference over the points (sorted by `p_e_ref`).
fn scheduled_boundary(points: &[&SchedulePoint], p_ref: f64) -> BoundaryConditions {
    let first = points[0];
    let last = points[points.len() - 1];
    let lerp = |a: &BoundaryConditions, b: &BoundaryConditions, s: f64| BoundaryConditions {
        mdot_ea: a.mdot_ea + s * (b.mdot_ea - a.mdot_ea),
        t_ea_in: a.t_ea_in + s * (b.t_ea_in - a.t_ea_in),
        mdot_ca: a.mdot_ca + s * (b.mdot_ca - a.mdot_ca),
        t_ca_in: a.t_ca_in + s * (b.t_ca_in - a.t_ca_in),
    };
    if p_ref <= first.p_e_ref {
        return first.lin.trim.boundary;
    }
    for w in points.windows(2) {
        if p_ref <= w[1].p_e_ref {
            let s = (p_ref - w[0].p_e_ref) / (w[1].p_e_ref - w[0].p_e_ref);
            return lerp(&w[0].lin.trim.boundary, &w[1].lin.trim.boundary, s);
        }
    }
    last.lin.trim.boundary
}

enum PlantSim<'a> {
    Nonlinear { plant: &'a Plant, x: PlantState },
    Linear { disc: Discrete, x: DVector<f64>, y0: DVector<f64>, v0: [f64; 3] },
}

impl PlantSim<'_> {
    /// (true outputs, outputs with the sensor fault).
    fn outputs(&self, f_p: f64, nout: usize) -> Result<(DVector<f64>, DVector<f64>), String> {
        match self {
            PlantSim::Nonlinear { plant, x } => {
                let m = plant.outputs(x, 0.0).map_err(|e| e.to_string())?;
                let all = [m.p_e, m.sh, m.t_e2w];
                let y = DVector::from_row_slice(&all[..nout]);
                let mut ym = y.clone();
                ym[0] += f_p;
                Ok((y, ym))
            }
            PlantSim::Linear { disc, x, y0, .. } => {
                let y = y0 + &disc.c * x;
                let f_p_col = disc.d.column(4) * f_p;
                Ok((y.clone(), y + f_p_col))
            }
        }
    }

    fn step(&mut self, u: [f64; 2], bc: &BoundaryConditions, f: [f64; 2], dt: f64) -> Result<(), String> {
        match self {
            PlantSim::Nonlinear { plant, x } => {
                *x = plant
                    .step(x, &PlantInputs { n_c: u[0], alpha: u[1] }, bc, &FaultVector { f_n: f[0], f_p: f[1] }, dt)
                    .map_err(|e| e.to_string())?;
            }
            PlantSim::Linear { disc, x, v0, .. } => {
                let v = DVector::from_row_slice(&[u[0] - v0[0], u[1] - v0[1], bc.mdot_ea - v0[2], f[0], f[1]]);
                *x = &disc.phi * &*x + &disc.gamma * v;
            }
        }
        Ok(())
    }
}

/// Simulate one scenario against the designs in `points`.
pub fn run_scenario(plant: &Plant, points: &[SchedulePoint], sc: &Scenario, rs: &RunSettings) -> Result<SimResult, HarnessError> {
    sc.validate()?;
    if let Some(p) = points.iter().find(|p| p.lin.sensor_set != sc.sensor_set) {
        return Err(HarnessError::Config(format!("the {} design uses a different sensor set", p.label.name())));
    }
    let start = point_index(points, sc)?;
    let home = &points[start];
    let trim = &home.lin.trim;
    let y_base = trim_outputs(trim, sc.sensor_set);
    let reference_base = [y_base[0], y_base[1]];
    let nout = sc.sensor_set.noutputs();

    let mut sorted: Vec<&SchedulePoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.p_e_ref.total_cmp(&b.p_e_ref));
    let centers: Vec<f64> = points.iter().map(|p| p.p_e_ref).collect();

    let mut controllers: Vec<Option<Box<dyn LoopController>>> = points.iter().map(|_| None).collect();
    controllers[start] = Some(build_controller(home, sc.mode, sc, rs)?);
    if sc.schedule {
        for (i, p) in points.iter().enumerate() {
            if i != start {
                controllers[i] = Some(build_controller(p, sc.mode, sc, rs)?);
            }
        }
    }
    let mut active = start;

    let mut sim = if sc.linear_plant {
        if sc.schedule || sc.ambient_follows_reference {
            return Err(HarnessError::Config("scheduling needs the nonlinear plant".into()));
        }
        let disc = Discrete::zoh(&home.lin.sys, sc.dt).map_err(|e| HarnessError::Config(e.to_string()))?;
        let x = DVector::zeros(disc.nstates());
        PlantSim::Linear { disc, x, y0: home.lin.y0(), v0: [trim.inputs.n_c, trim.inputs.alpha, trim.boundary.mdot_ea] }
    } else {
        PlantSim::Nonlinear { plant, x: trim.state }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut u_prev = [trim.inputs.n_c, trim.inputs.alpha];
    let n = sc.steps();
    let mut samples = Vec::with_capacity(n + 1);
    let mut switch_times = Vec::new();
    for k in 0..=n {
        let t = k as f64 * sc.dt;
        let fail = |message: String| HarnessError::Simulation { t, message };
        let off = sc.reference_offset(t);
        let reference = [reference_base[0] + off[0], reference_base[1] + off[1]];
        let faults = sc.faults_at(t);
        let mut bc = if sc.ambient_follows_reference { scheduled_boundary(&sorted, reference[0]) } else { trim.boundary };
        bc.mdot_ea *= 1.0 + sc.disturbance_fraction(t);

        let (y_true, mut y) = sim.outputs(faults[1], nout).map_err(fail)?;
        for (i, a) in sc.noise.iter().enumerate() {
            if *a > 0.0 {
                y[i] += rng.gen_range(-*a..=*a);
            }
        }

        if sc.schedule {
            let next = schedule_select(&centers, reference[0], Some(active), rs.hysteresis);
            if next != active {
                let prev = controllers[active].take().expect("active controller");
                let ctrl = controllers[next].as_mut().expect("scheduled controller");
                ctrl.reinitialize(reference, &y, u_prev).map_err(|e| fail(e.to_string()))?;
                ctrl.inherit_flags(prev.monitor());
                controllers[active] = Some(prev);
                active = next;
                switch_times.push(t);
            }
        }

        let ctrl = controllers[active].as_mut().expect("active controller");
        let out = ctrl.step(t, reference, &y, u_prev);
        if out.u_cmd.iter().chain(out.f_e.iter()).any(|v| !v.is_finite()) {
            return Err(fail("controller output is not finite".into()));
        }
        let u = [out.u_cmd[0].max(0.0), out.u_cmd[1].clamp(0.0, 100.0)];
        ctrl.commit(u, &out.f_e);
        samples.push(Sample {
            t,
            pe_true: y_true[0],
            pe_meas: y[0],
            sh: y[1],
            nc_cmd: u[0],
            nc_act: u[0] + faults[0],
            alpha: u[1],
            mdot_ea: bc.mdot_ea,
            r1: out.r[0],
            r2: out.r[1],
            flag1: out.flags[0] as u8,
            flag2: out.flags[1] as u8,
            q1: out.q[0],
            q2: out.q[1],
        });
        if k < n {
            sim.step(u, &bc, faults, sc.dt).map_err(fail)?;
        }
        u_prev = u;
    }
    let metrics = Metrics::compute(&samples, sc, reference_base, &switch_times);
    Ok(SimResult { samples, reference_base, switch_times, metrics })
}

/// Means of the main channels over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeans {
    pub pe_true: f64,
    pub pe_meas: f64,
    pub sh: f64,
    pub nc_cmd: f64,
    pub alpha: f64,
    pub r1: f64,
    pub r2: f64,
}

impl ChannelMeans {
    fn over(s: &[Sample]) -> ChannelMeans {
        let m = |f: fn(&Sample) -> f64| s.iter().map(f).sum::<f64>() / s.len().max(1) as f64;
        ChannelMeans {
            pe_true: m(|x| x.pe_true),
            pe_meas: m(|x| x.pe_meas),
            sh: m(|x| x.sh),
            nc_cmd: m(|x| x.nc_cmd),
            alpha: m(|x| x.alpha),
            r1: m(|x| x.r1),
            r2: m(|x| x.r2),
        }
    }

    fn minus(&self, o: &ChannelMeans) -> ChannelMeans {
        ChannelMeans {
            pe_true: self.pe_true - o.pe_true,
            pe_meas: self.pe_meas - o.pe_meas,
            sh: self.sh - o.sh,
            nc_cmd: self.nc_cmd - o.nc_cmd,
            alpha: self.alpha - o.alpha,
            r1: self.r1 - o.r1,
            r2: self.r2 - o.r2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub fault_time: f64,
    pub channel: super::FaultChannel,
    /// Time from the fault to the latch of its own flag; absent when it never latched after the fault.
    pub latency: Option<f64>,
}

/// Scenario metrics; every entry is a function of the samples and the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Means over the final 10 % of the run.
    pub final_mean: ChannelMeans,
    /// Means over the window of the same length ending at the first fault.
    pub pre_fault_mean: Option<ChannelMeans>,
    /// `final_mean - pre_fault_mean`.
    pub shift: Option<ChannelMeans>,
    /// Mean (p_e true - ref, SH - ref) over the final 10 %.
    pub final_error: [f64; 2],
    /// RMS tracking error of (p_e true, SH) over the run.
    pub rmse: [f64; 2],
    pub detections: Vec<Detection>,
    /// Latch time of the actuator flag.
    pub flag1_time: Option<f64>,
    /// Latch time of the sensor flag.
    pub flag2_time: Option<f64>,
    /// A flag latched before the first fault (or at all in a fault-free run).
    pub false_alarm: bool,
    /// Largest residual magnitudes before the first fault.
    pub max_abs_residual: [f64; 2],
    /// Largest growth of the pressure tracking-error magnitude within 10 s after a schedule
    /// switch, relative to its value just before the switch.
    pub switch_jump: f64,
}

/// Window length after a switch used for `switch_jump` (s).
pub const SWITCH_WINDOW: f64 = 10.0;

impl Metrics {
    pub fn compute(s: &[Sample], sc: &Scenario, reference_base: [f64; 2], switch_times: &[f64]) -> Metrics {
        let n = s.len();
        let tail = (n / 10).max(1);
        let final_slice = &s[n - tail..];
        let final_mean = ChannelMeans::over(final_slice);
        let fault_time = sc.first_fault_time();
        let fault_index = fault_time.map(|tf| s.iter().position(|x| x.t >= tf).unwrap_or(n));
        let pre_fault_mean = fault_index.map(|k| ChannelMeans::over(&s[k.saturating_sub(tail)..k]));
        let shift = pre_fault_mean.map(|p| final_mean.minus(&p));

        let err = |x: &Sample| {
            let off = sc.reference_offset(x.t);
            [x.pe_true - reference_base[0] - off[0], x.sh - reference_base[1] - off[1]]
        };
        let mut final_error = [0.0; 2];
        for x in final_slice {
            let e = err(x);
            final_error[0] += e[0] / tail as f64;
            final_error[1] += e[1] / tail as f64;
        }
        let mut sq = [0.0; 2];
        for x in s {
            let e = err(x);
            sq[0] += e[0] * e[0];
            sq[1] += e[1] * e[1];
        }
        let rmse = sq.map(|v| (v / n.max(1) as f64).sqrt());

        let flag_times = [
            s.iter().find(|x| x.flag1 != 0).map(|x| x.t),
            s.iter().find(|x| x.flag2 != 0).map(|x| x.t),
        ];
        let detections = sc
            .faults
            .iter()
            .map(|f| {
                let latched = flag_times[f.channel.index()];
                Detection { fault_time: f.time, channel: f.channel, latency: latched.filter(|tl| *tl >= f.time).map(|tl| tl - f.time) }
            })
            .collect();
        let horizon = fault_time.unwrap_or(f64::INFINITY);
        let false_alarm = flag_times.iter().flatten().any(|tl| *tl < horizon);
        let mut max_abs_residual = [0.0f64; 2];
        for x in s.iter().filter(|x| x.t < horizon) {
            max_abs_residual[0] = max_abs_residual[0].max(x.r1.abs());
            max_abs_residual[1] = max_abs_residual[1].max(x.r2.abs());
        }

        let mut switch_jump = 0.0f64;
        for &ts in switch_times {
            let Some(k) = s.iter().position(|x| x.t >= ts) else { continue };
            let before = err(&s[k.saturating_sub(1)])[0].abs();
            for x in s[k..].iter().take_while(|x| x.t <= ts + SWITCH_WINDOW) {
                switch_jump = switch_jump.max(err(x)[0].abs() - before);
            }
        }
        Metrics {
            final_mean,
            pre_fault_mean,
            shift,
            final_error,
            rmse,
            detections,
            flag1_time: flag_times[0],
            flag2_time: flag_times[1],
            false_alarm,
            max_abs_residual,
            switch_jump,
        }
    }

    pub fn flag_times(&self) -> [Option<f64>; 2] {
        [self.flag1_time, self.flag2_time]
    }
}

pub fn write_csv<W: std::io::Write>(samples: &[Sample], w: W) -> Result<(), HarnessError> {
    let io = |e: csv::Error| HarnessError::Io(e.to_string());
    let mut wr = csv::Writer::from_writer(w);
    for s in samples {
        wr.serialize(s).map_err(io)?;
    }
    wr.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<Sample>, HarnessError> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers().map_err(|e| HarnessError::Io(e.to_string()))?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(HarnessError::Io(format!("unexpected header {header:?}")));
    }
    rd.deserialize().collect::<Result<Vec<Sample>, _>>().map_err(|e| HarnessError::Io(e.to_string()))
}

/// Metrics block as structured text.
pub fn report_toml(sc: &Scenario, m: &Metrics) -> Result<String, HarnessError> {
    #[derive(Serialize)]
    struct Report<'a> {
        scenario: &'a Scenario,
        metrics: &'a Metrics,
    }
    toml::to_string(&Report { scenario: sc, metrics: m }).map_err(|e| HarnessError::Io(e.to_string()))
}

/// Passive and active runs of one scenario.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub passive: SimResult,
    pub active: SimResult,
    /// Active minus passive: final tracking errors (p_e, SH).
    pub final_error_delta: [f64; 2],
    /// Active minus passive post-fault shift of N_c (rpm), when the scenario has a fault.
    pub nc_shift_delta: Option<f64>,
    /// Largest difference of (p_e, SH, N_c, alpha) between the two runs.
    pub max_trajectory_difference: f64,
}

pub fn compare_modes(plant: &Plant, points: &[SchedulePoint], sc: &Scenario, rs: &RunSettings) -> Result<Comparison, HarnessError> {
    let passive = run_scenario(plant, points, &Scenario { mode: Mode::Passive, ..sc.clone() }, rs)?;
    let active = run_scenario(plant, points, &Scenario { mode: Mode::ActiveGimc, ..sc.clone() }, rs)?;
    let (mp, ma) = (&passive.metrics, &active.metrics);
    let final_error_delta = [ma.final_error[0] - mp.final_error[0], ma.final_error[1] - mp.final_error[1]];
    let nc_shift_delta = ma.shift.zip(mp.shift).map(|(a, p)| a.nc_cmd - p.nc_cmd);
    let max_trajectory_difference = trajectory_difference(&passive.samples, &active.samples);
    Ok(Comparison { passive, active, final_error_delta, nc_shift_delta, max_trajectory_difference })
}

/// Largest absolute difference of the measured outputs and commands between two runs.
pub fn trajectory_difference(a: &[Sample], b: &[Sample]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| [x.pe_true - y.pe_true, x.pe_meas - y.pe_meas, x.sh - y.sh, x.nc_cmd - y.nc_cmd, x.alpha - y.alpha])
        .fold(0.0f64, |m, d| m.max(d.abs()))
}
