//! Front end of the `nvberry` binary: configuration, the simulation
//! commands and record output.
//!
//! Every command produces a list of flat records. Input columns are named by
//! their dotted config key (`geometry.theta`), so a record can be fed back
//! through `--set` to reproduce itself.

pub mod config;
pub mod output;

use std::fmt;

use nvberry::{
    adiabaticity_margin, echo_trajectory, end_to_end_estimate, extract_geometric_phase, extract_rectified_phase,
    geometric_phase, pi_pulse_times, ramsey_trajectory, relative_sensitivity, relative_uncertainty, run_echo,
    run_ramsey, solid_angle, steepest_retard, DecoherenceKind, Gauge, Method, OracleOptions, PhysicalConstants,
    PropagationConfig, ProtocolOptions, ProtocolResult, SensitivityParams, SignalModel, SpindleConfig,
};
use rayon::prelude::*;
use serde_json::{Map, Value};

pub use config::{BerryPath, Command, RunConfig};

/// One output row, columns in insertion order.
pub type Record = Map<String, Value>;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration.
    Config(String),
    /// A physics module refused the run.
    Physics {
        stage: &'static str,
        source: nvberry::Error,
    },
    /// Writing the output failed.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Physics {
                source: nvberry::Error::InvalidParameter { .. },
                ..
            } => 2,
            Self::Physics { source, .. } if source.is_numeric() => 4,
            Self::Physics { .. } => 3,
            Self::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(msg) => write!(f, "config: {msg}"),
            Self::Physics { stage, source } => write!(f, "{stage}: {source}"),
            Self::Io(msg) => write!(f, "output: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

fn at(stage: &'static str) -> impl FnOnce(nvberry::Error) -> CliError {
    move |source| CliError::Physics { stage, source }
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn gauge_name(g: Gauge) -> &'static str {
    match g {
        Gauge::Raw => "raw",
        Gauge::MicrowaveFixed => "microwave",
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::PiecewiseExponential => "exponential",
        Method::Rk4 => "rk4",
    }
}

fn decoherence_name(k: DecoherenceKind) -> &'static str {
    match k {
        DecoherenceKind::None => "none",
        DecoherenceKind::Gaussian => "gaussian",
        DecoherenceKind::Exponential => "exponential",
    }
}

/// Runs the configured command.
pub fn run(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    match cfg.command {
        Command::Berry => berry(cfg).map(|r| vec![r]),
        Command::Ramsey => ramsey(cfg).map(|r| vec![r]),
        Command::Echo => echo(cfg).map(|r| vec![r]),
        Command::Sensitivity => sensitivity(cfg),
        Command::Sweep => sweep(cfg),
    }
}

fn berry(cfg: &RunConfig) -> Result<Record, CliError> {
    let g = &cfg.geometry;
    let n = &cfg.numeric;
    let physical = PhysicalConstants::default();
    let scaled = physical
        .with_zero_field(n.ratio * g.omega)
        .map_err(at("oracle setup"))?;
    let propagation =
        PropagationConfig::new(n.step / scaled.zero_field, n.method, n.tolerance).map_err(at("oracle setup"))?;

    let mut rec = Record::new();
    rec.insert("command".into(), "berry".into());
    rec.insert(
        "geometry.path".into(),
        match g.path {
            BerryPath::Ramsey => "ramsey",
            BerryPath::Echo => "echo",
        }
        .into(),
    );
    rec.insert("geometry.omega".into(), num(g.omega));
    rec.insert("geometry.theta".into(), num(g.theta));
    rec.insert("geometry.theta0".into(), num(g.theta0));
    rec.insert("geometry.phi0".into(), num(g.phi0));
    rec.insert("geometry.rotations".into(), g.rotations.into());
    rec.insert("geometry.start_angle".into(), num(g.start_angle));
    rec.insert("numeric.m".into(), n.m.value().into());
    rec.insert("numeric.ratio".into(), num(n.ratio));
    rec.insert("numeric.step".into(), num(n.step));
    rec.insert("numeric.tolerance".into(), num(n.tolerance));
    rec.insert("numeric.method".into(), method_name(n.method).into());

    let (gauge, analytic, numeric, solid, margin, oracle_margin) = match g.path {
        BerryPath::Ramsey => {
            let spindle = SpindleConfig::ramsey(g.omega, g.theta).map_err(at("trajectory"))?;
            let traj = ramsey_trajectory(&spindle, g.phi0).map_err(at("trajectory"))?;
            let analytic = geometric_phase(&traj, n.m, n.gauge, None).map_err(at("analytic phase"))?;
            let opts = OracleOptions {
                propagation,
                splitting: 0.0,
                gauge: n.gauge,
            };
            let numeric = extract_geometric_phase(&traj, n.m, &opts, &scaled).map_err(at("oracle"))?;
            let solid = solid_angle(&traj).ok();
            (
                n.gauge,
                analytic.geometric,
                numeric.geometric,
                solid,
                adiabaticity_margin(&traj, &physical),
                adiabaticity_margin(&traj, &scaled),
            )
        }
        BerryPath::Echo => {
            // the rectified oracle tracks the +1 branch in the microwave frame
            let spindle = SpindleConfig::echo(g.omega, g.theta0)
                .and_then(|s| s.with_start_angle(g.start_angle))
                .map_err(at("trajectory"))?;
            let traj = echo_trajectory(&spindle, g.rotations).map_err(at("trajectory"))?;
            let pulses = pi_pulse_times(&spindle, g.rotations).map_err(at("trajectory"))?;
            let analytic = geometric_phase(
                &traj,
                nvberry::MagneticNumber::PLUS,
                Gauge::MicrowaveFixed,
                Some(&pulses),
            )
            .map_err(at("analytic phase"))?;
            let opts = OracleOptions {
                propagation,
                splitting: 0.0,
                gauge: Gauge::MicrowaveFixed,
            };
            let numeric = extract_rectified_phase(&traj, &pulses, &opts, &scaled).map_err(at("oracle"))?;
            (
                Gauge::MicrowaveFixed,
                analytic.geometric,
                numeric.geometric,
                None,
                adiabaticity_margin(&traj, &physical),
                adiabaticity_margin(&traj, &scaled),
            )
        }
    };
    rec.insert("numeric.gauge".into(), gauge_name(gauge).into());
    rec.insert("phase_analytic".into(), num(analytic));
    rec.insert("phase_numeric".into(), num(numeric));
    rec.insert("difference".into(), num(numeric - analytic));
    rec.insert("solid_angle".into(), solid.map_or(Value::Null, num));
    rec.insert("adiabaticity_margin".into(), num(margin));
    rec.insert("oracle_margin".into(), num(oracle_margin));
    Ok(rec)
}

fn protocol_inputs(cfg: &RunConfig, rec: &mut Record) {
    let d = &cfg.decoherence;
    rec.insert("decoherence.model".into(), decoherence_name(d.kind).into());
    rec.insert(
        "decoherence.timescale".into(),
        if d.kind == DecoherenceKind::None {
            Value::Null
        } else {
            num(d.timescale)
        },
    );
    let r = &cfg.readout;
    rec.insert("readout.repetitions".into(), r.params.repetitions.into());
    rec.insert("readout.efficiency".into(), num(r.params.efficiency));
    match r.params.model {
        SignalModel::Gaussian => {
            rec.insert("readout.model".into(), "gaussian".into());
            rec.insert("readout.contrast".into(), Value::Null);
        }
        SignalModel::Poisson { contrast } => {
            rec.insert("readout.model".into(), "poisson".into());
            rec.insert("readout.contrast".into(), num(contrast));
        }
    }
    rec.insert("readout.trials".into(), r.trials.into());
    rec.insert("readout.seed".into(), r.seed.into());
}

fn protocol_outputs(
    cfg: &RunConfig,
    result: &ProtocolResult,
    at_steepest: &ProtocolResult,
    rec: &mut Record,
) -> Result<(), CliError> {
    rec.insert("phase_estimate".into(), num(result.phase_estimate));
    rec.insert("population_m0".into(), num(result.population_m0));
    rec.insert("coherence_factor".into(), num(result.coherence_factor));
    rec.insert("duration".into(), num(result.duration));
    rec.insert("pulses".into(), result.pulses.len().into());
    rec.insert("adiabaticity_margin".into(), num(result.adiabaticity_margin));
    let estimate = end_to_end_estimate(
        &vec![at_steepest.clone(); cfg.readout.trials],
        &cfg.readout.params,
        cfg.readout.seed,
    )
    .map_err(at("readout"))?;
    rec.insert("mc_retard".into(), num(at_steepest.retard));
    rec.insert("mc_phase_mean".into(), num(estimate.mean));
    rec.insert("mc_phase_std".into(), num(estimate.std));
    rec.insert("mc_predicted_std".into(), num(estimate.predicted_std));
    Ok(())
}

fn ramsey(cfg: &RunConfig) -> Result<Record, CliError> {
    let g = &cfg.geometry;
    let spindle = SpindleConfig::ramsey(g.omega, g.theta).map_err(at("trajectory"))?;
    let opts = ProtocolOptions::default();
    let result = run_ramsey(&spindle, g.phi0, &cfg.decoherence, g.retard, &opts).map_err(at("ramsey protocol"))?;
    let steep = run_ramsey(
        &spindle,
        g.phi0,
        &cfg.decoherence,
        steepest_retard(result.phase_estimate),
        &opts,
    )
    .map_err(at("ramsey protocol"))?;

    let mut rec = Record::new();
    rec.insert("command".into(), "ramsey".into());
    rec.insert("geometry.omega".into(), num(g.omega));
    rec.insert("geometry.theta".into(), num(g.theta));
    rec.insert("geometry.phi0".into(), num(g.phi0));
    rec.insert("geometry.retard".into(), num(g.retard));
    protocol_inputs(cfg, &mut rec);
    protocol_outputs(cfg, &result, &steep, &mut rec)?;
    Ok(rec)
}

fn echo(cfg: &RunConfig) -> Result<Record, CliError> {
    let g = &cfg.geometry;
    let spindle = SpindleConfig::echo(g.omega, g.theta0)
        .and_then(|s| s.with_start_angle(g.start_angle))
        .map_err(at("trajectory"))?;
    let opts = ProtocolOptions::default();
    let result = run_echo(&spindle, g.rotations, &cfg.decoherence, g.retard, &opts).map_err(at("echo protocol"))?;
    let steep = run_echo(
        &spindle,
        g.rotations,
        &cfg.decoherence,
        steepest_retard(result.phase_estimate),
        &opts,
    )
    .map_err(at("echo protocol"))?;

    let mut rec = Record::new();
    rec.insert("command".into(), "echo".into());
    rec.insert("geometry.omega".into(), num(g.omega));
    rec.insert("geometry.theta0".into(), num(g.theta0));
    rec.insert("geometry.rotations".into(), g.rotations.into());
    rec.insert("geometry.start_angle".into(), num(g.start_angle));
    rec.insert("geometry.retard".into(), num(g.retard));
    protocol_inputs(cfg, &mut rec);
    protocol_outputs(cfg, &result, &steep, &mut rec)?;
    Ok(rec)
}

fn sensitivity(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let s = &cfg.sensitivity;
    let efficiency = cfg.readout.params.efficiency;
    [("echo", s.t2), ("ramsey", s.t2_star)]
        .into_iter()
        .map(|(protocol, coherence_time)| {
            let sp = SensitivityParams::new(s.a, cfg.geometry.omega, coherence_time, efficiency, s.total_time)
                .map_err(at("sensitivity"))?;
            let mut rec = Record::new();
            rec.insert("command".into(), "sensitivity".into());
            rec.insert("protocol".into(), protocol.into());
            rec.insert("geometry.omega".into(), num(sp.omega));
            rec.insert("sensitivity.a".into(), num(sp.a));
            rec.insert("coherence_time".into(), num(coherence_time));
            rec.insert("readout.efficiency".into(), num(efficiency));
            rec.insert("sensitivity.total_time".into(), num(sp.total_time));
            rec.insert("measurement_time".into(), num(sp.measurement_time));
            rec.insert(
                "relative_sensitivity".into(),
                num(relative_sensitivity(&sp).map_err(at("sensitivity"))?),
            );
            rec.insert(
                "relative_uncertainty".into(),
                num(relative_uncertainty(&sp).map_err(at("sensitivity"))?),
            );
            Ok(rec)
        })
        .collect()
}

fn sweep(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let axis = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [sweep] section".into()))?;
    let points: Vec<(usize, f64)> = axis.values().into_iter().enumerate().collect();
    let rows: Vec<Result<Vec<Record>, CliError>> = points
        .par_iter()
        .map(|&(i, value)| {
            let point = cfg.sweep_point(i, value)?;
            let records = run(&point)?;
            Ok(records
                .into_iter()
                .map(|r| {
                    let mut rec = Record::new();
                    rec.insert("sweep.parameter".into(), axis.parameter.clone().into());
                    rec.insert("sweep.index".into(), i.into());
                    rec.insert("sweep.value".into(), num(value));
                    rec.extend(r);
                    rec
                })
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for row in rows {
        out.extend(row?);
    }
    Ok(out)
}
