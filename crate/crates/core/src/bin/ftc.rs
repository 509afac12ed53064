use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ftc_core::controller::synth_nominal;
use ftc_core::fdi::{fault_to_residual_dc, isolation_ratio};
use ftc_core::gimc::{design_q, QKind};
use ftc_core::harness::{
    compare_modes, design_for_scenario, design_point, design_point_uncalibrated, design_points, report_toml, run_scenario, trim_point, write_csv, Config,
    DesignBundle, HarnessError, QRecord,
};
use ftc_core::plant::{linearize_plant, trim_outputs, PointLabel, SensorSet};
use sslib::io::to_toml_string;
use sslib::{left_coprime_factorize, HinfOptions};

#[derive(Parser)]
#[command(name = "ftc", about = "Fault-tolerant A/C control workbench")]
struct Cli {
    /// Configuration file with sections plant, weights, fdi, gimc and scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Point {
    Low,
    Med,
    High,
}

impl From<Point> for PointLabel {
    fn from(p: Point) -> Self {
        match p {
            Point::Low => PointLabel::Low,
            Point::Med => PointLabel::Med,
            Point::High => PointLabel::High,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Sensors {
    Two,
    Three,
}

impl From<Sensors> for SensorSet {
    fn from(s: Sensors) -> Self {
        match s {
            Sensors::Two => SensorSet::TwoOutputs,
            Sensors::Three => SensorSet::ThreeOutputs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Actuator,
    Sensor,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium at one or all operating points.
    Trim {
        #[arg(long)]
        point: Option<Point>,
    },
    /// Linear model at a point.
    Linearize {
        #[arg(long, default_value = "med")]
        point: Point,
        #[arg(long, default_value = "three")]
        sensors: Sensors,
    },
    /// Nominal tracking controller.
    SynthNominal {
        #[arg(long, default_value = "med")]
        point: Point,
    },
    /// Isolation filter with calibrated thresholds.
    SynthFdi {
        #[arg(long, default_value = "med")]
        point: Point,
        #[arg(long, default_value = "three")]
        sensors: Sensors,
        /// Keep the threshold floors instead of running the calibration suite.
        #[arg(long)]
        no_calibrate: bool,
    },
    /// Compensator for one fault class.
    SynthQ {
        #[arg(long, default_value = "med")]
        point: Point,
        #[arg(long, default_value = "three")]
        sensors: Sensors,
        #[arg(long)]
        kind: Kind,
    },
    /// Run the configured scenario.
    Simulate {
        /// Time-series output.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Metrics output; printed when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the configured scenario in passive and active mode.
    Compare {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Design at all points and write one bundle per point.
    SweepPoints {
        #[arg(long, default_value = "three")]
        sensors: Sensors,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn synth(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Synthesis(e.to_string())
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<std::fs::File, HarnessError> {
    std::fs::File::create(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let plant = cfg.build_plant()?;
    match cli.command {
        Command::Trim { point } => {
            let labels = point.map_or(PointLabel::ALL.to_vec(), |p| vec![p.into()]);
            for l in labels {
                let tr = trim_point(&plant, l)?;
                let y = trim_outputs(&tr, SensorSet::ThreeOutputs);
                let s = tr.state;
                println!("[{}]", l.name());
                println!("n_c = {}\nalpha = {}\nmdot_ea = {}\nt_a = {}", tr.inputs.n_c, tr.inputs.alpha, tr.boundary.mdot_ea, tr.boundary.t_ea_in);
                println!("zeta = {}\np_e = {}\nh_e2 = {}\nt_w1 = {}\nt_w2 = {}\np_c = {}", s.evap.zeta, s.evap.p_e, s.evap.h_e2, s.evap.t_w1, s.evap.t_w2, s.p_c);
                println!("superheat = {}\nt_e2w = {}\ngamma_bar = {}\nresidual = {:e}\n", y[1], y[2], tr.gamma_bar, tr.residual);
            }
        }
        Command::Linearize { point, sensors } => {
            let tr = trim_point(&plant, point.into())?;
            let lin = linearize_plant(&plant, &tr, sensors.into()).map_err(synth)?;
            print!("{}", to_toml_string(&lin.sys).map_err(synth)?);
        }
        Command::SynthNominal { point } => {
            let tr = trim_point(&plant, point.into())?;
            let lin = linearize_plant(&plant, &tr, SensorSet::TwoOutputs).map_err(synth)?;
            let nom = synth_nominal(&lin.nominal().map_err(synth)?, &cfg.weights, &HinfOptions::default()).map_err(synth)?;
            println!("gamma = {}\nclosed_loop_norm = {}\norder = {}\n", nom.gamma, nom.closed_loop_norm, nom.k.nstates());
            print!("{}", to_toml_string(&nom.k).map_err(synth)?);
        }
        Command::SynthFdi { point, sensors, no_calibrate } => {
            let out = if no_calibrate {
                design_point_uncalibrated(&plant, point.into(), sensors.into(), &cfg)?
            } else {
                design_point(&plant, point.into(), sensors.into(), &cfg)?
            };
            let p = &out.point;
            let dc = fault_to_residual_dc(&p.factors, &p.fdi.h_i).map_err(synth)?;
            println!("gamma = {}\nthresholds = {:?}\nisolation_ratio = {}\n", p.fdi.gamma, p.fdi.thresholds, isolation_ratio(&dc));
            print!("{}", to_toml_string(&p.fdi.h_i).map_err(synth)?);
        }
        Command::SynthQ { point, sensors, kind } => {
            let tr = trim_point(&plant, point.into())?;
            let lin = linearize_plant(&plant, &tr, sensors.into()).map_err(synth)?;
            let opts = HinfOptions::default();
            let nom = synth_nominal(&lin.nominal().map_err(synth)?, &cfg.weights, &opts).map_err(synth)?;
            let factors = left_coprime_factorize(&lin.sys).map_err(synth)?;
            let kind = match kind {
                Kind::Actuator => QKind::Actuator,
                Kind::Sensor => QKind::Sensor,
            };
            let q = design_q(kind, &lin, &nom, &factors, &cfg.gimc, &opts).map_err(synth)?;
            print!("{}", toml::to_string(&QRecord::from(&q)).map_err(|e| HarnessError::Io(e.to_string()))?);
        }
        Command::Simulate { csv, report } => {
            let points: Vec<_> = design_for_scenario(&plant, &cfg)?.into_iter().map(|o| o.point).collect();
            let res = run_scenario(&plant, &points, &cfg.scenario, &cfg.run_settings())?;
            if let Some(path) = csv {
                write_csv(&res.samples, create(&path)?)?;
            }
            let text = report_toml(&cfg.scenario, &res.metrics)?;
            match report {
                Some(path) => write_file(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Compare { out_dir } => {
            std::fs::create_dir_all(&out_dir).map_err(|e| HarnessError::Io(e.to_string()))?;
            let points: Vec<_> = design_for_scenario(&plant, &cfg)?.into_iter().map(|o| o.point).collect();
            let c = compare_modes(&plant, &points, &cfg.scenario, &cfg.run_settings())?;
            write_csv(&c.passive.samples, create(&out_dir.join("passive.csv"))?)?;
            write_csv(&c.active.samples, create(&out_dir.join("active.csv"))?)?;
            write_file(&out_dir.join("passive_report.toml"), &report_toml(&cfg.scenario, &c.passive.metrics)?)?;
            write_file(&out_dir.join("active_report.toml"), &report_toml(&cfg.scenario, &c.active.metrics)?)?;
            println!("final_error_delta = {:?}", c.final_error_delta);
            if let Some(d) = c.nc_shift_delta {
                println!("nc_shift_delta = {d}");
            }
            println!("max_trajectory_difference = {}", c.max_trajectory_difference);
        }
        Command::SweepPoints { sensors, out_dir } => {
            let outcomes = design_points(&plant, &PointLabel::ALL, sensors.into(), &cfg)?;
            if let Some(dir) = &out_dir {
                std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(e.to_string()))?;
            }
            for o in &outcomes {
                let b = DesignBundle::from_point(&o.point)?;
                println!("[{}]", o.point.label.name());
                println!("p_e_ref = {}\nthresholds = {:?}\nisolation_ratio = {}", b.meta.p_e_ref, b.meta.thresholds, b.meta.isolation_ratio);
                for (name, q) in [("q_act", &b.q_act), ("q_sen", &b.q_sen)] {
                    match q {
                        Some(q) => println!("{name} = {{ order = {}, cost = {}, baseline = {} }}", q.reduced_order, q.cost, q.baseline),
                        None => println!("{name} = \"not available\""),
                    }
                }
                for (kind, why) in &o.q_failures {
                    eprintln!("{} {kind:?} compensator: {why}", o.point.label.name());
                }
                println!();
                if let Some(dir) = &out_dir {
                    write_file(&dir.join(format!("{}.toml", o.point.label.name().to_lowercase())), &b.to_toml()?)?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
