//! Run configuration: a TOML file with fixed sections, `--set` overrides,
//! defaults and validation.
//!
//! All angles are in radians, angular speeds in rad/s and times in seconds.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nvberry::{
    DecoherenceKind, DecoherenceModel, Gauge, MagneticNumber, Method, ReadoutParams, SensitivityParams, SignalModel,
    SpindleConfig,
};
use serde::Deserialize;
use toml::{Table, Value};

use crate::CliError;

pub const DEFAULT_OMEGA: f64 = 4000.0 * PI;
pub const DEFAULT_T2: f64 = 2e-3;
pub const DEFAULT_T2_STAR: f64 = 10e-6;
pub const DEFAULT_EFFICIENCY: f64 = 0.15;
pub const DEFAULT_A: f64 = 2.0;

/// Every accepted key, by section.
pub const KEYS: &[(&str, &[&str])] = &[
    (
        "geometry",
        &[
            "omega",
            "theta",
            "theta0",
            "phi0",
            "rotations",
            "start_angle",
            "retard",
            "path",
        ],
    ),
    ("decoherence", &["model", "timescale"]),
    (
        "readout",
        &["repetitions", "efficiency", "seed", "trials", "model", "contrast"],
    ),
    ("numeric", &["ratio", "step", "tolerance", "gauge", "m", "method"]),
    ("sensitivity", &["a", "t2", "t2_star", "total_time"]),
    ("sweep", &["command", "parameter", "min", "max", "count"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Berry,
    Ramsey,
    Echo,
    Sensitivity,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Berry => "berry",
            Self::Ramsey => "ramsey",
            Self::Echo => "echo",
            Self::Sensitivity => "sensitivity",
            Self::Sweep => "sweep",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "berry" => Ok(Self::Berry),
            "ramsey" => Ok(Self::Ramsey),
            "echo" => Ok(Self::Echo),
            "sensitivity" => Ok(Self::Sensitivity),
            "sweep" => Ok(Self::Sweep),
            other => Err(format!("unknown command `{other}`")),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Path used by the `berry` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BerryPath {
    /// Fixed polar angle, azimuth swept through phi0.
    Ramsey,
    /// Tilted-spindle path with pi-pulse rectification.
    Echo,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    omega: Option<f64>,
    theta: Option<f64>,
    theta0: Option<f64>,
    phi0: Option<f64>,
    rotations: Option<u32>,
    start_angle: Option<f64>,
    retard: Option<f64>,
    path: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecoherence {
    model: Option<String>,
    timescale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReadout {
    repetitions: Option<u64>,
    efficiency: Option<f64>,
    seed: Option<u64>,
    trials: Option<usize>,
    model: Option<String>,
    contrast: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumeric {
    ratio: Option<f64>,
    step: Option<f64>,
    tolerance: Option<f64>,
    gauge: Option<String>,
    m: Option<i32>,
    method: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensitivity {
    a: Option<f64>,
    t2: Option<f64>,
    t2_star: Option<f64>,
    total_time: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    command: Option<String>,
    parameter: Option<String>,
    min: Option<f64>,
    max: Option<f64>,
    count: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    geometry: RawGeometry,
    #[serde(default)]
    decoherence: RawDecoherence,
    #[serde(default)]
    readout: RawReadout,
    #[serde(default)]
    numeric: RawNumeric,
    #[serde(default)]
    sensitivity: RawSensitivity,
    #[serde(default)]
    sweep: RawSweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// Spindle angular speed (rad/s).
    pub omega: f64,
    /// NV polar angle from the spindle axis, Ramsey geometry (rad).
    pub theta: f64,
    /// Spindle tilt, echo geometry (rad).
    pub theta0: f64,
    /// Azimuth swept in the Ramsey geometry (rad).
    pub phi0: f64,
    pub rotations: u32,
    pub start_angle: f64,
    /// Phase retard of the closing pi/2 pulse (rad).
    pub retard: f64,
    pub path: BerryPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub params: ReadoutParams,
    pub seed: u64,
    /// Repetitions of the whole sequence in the Monte Carlo estimate.
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numeric {
    /// D / Omega used by the evolution oracle.
    pub ratio: f64,
    /// Oracle time step in units of 1/D.
    pub step: f64,
    /// Allowed norm drift.
    pub tolerance: f64,
    pub gauge: Gauge,
    pub m: MagneticNumber,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivity {
    pub a: f64,
    pub t2: f64,
    pub t2_star: f64,
    pub total_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub command: Command,
    /// Dotted key, e.g. `geometry.theta`.
    pub parameter: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|k| self.min + (self.max - self.min) * k as f64 / (self.count - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub geometry: Geometry,
    pub decoherence: DecoherenceModel,
    pub readout: Readout,
    pub numeric: Numeric,
    pub sensitivity: Sensitivity,
    pub sweep: Option<Sweep>,
    /// Merged table the configuration was built from; sweeps re-use it.
    pub table: Table,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn validation(err: nvberry::Error) -> CliError {
    CliError::Config(format!("validation error: {err}"))
}

/// Loads a config file (if any) and applies `key=value` overrides.
pub fn load_table(text: Option<&str>, overrides: &[String]) -> Result<Table, CliError> {
    let mut table = match text {
        Some(t) => t
            .parse::<Table>()
            .map_err(|e| config_error(format!("parse error: {e}")))?,
        None => Table::new(),
    };
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| config_error(format!("parse error: override `{item}` is not key=value")))?;
        set_value(&mut table, key.trim(), parse_value(raw.trim()))?;
    }
    Ok(table)
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Resolves `section.key`, or a bare key that exists in exactly one section.
pub fn qualify(key: &str) -> Result<(String, String), CliError> {
    if let Some((section, name)) = key.split_once('.') {
        return Ok((section.to_string(), name.to_string()));
    }
    let owners: Vec<&str> = KEYS
        .iter()
        .filter(|(_, keys)| keys.contains(&key))
        .map(|(section, _)| *section)
        .collect();
    match owners.as_slice() {
        [one] => Ok((one.to_string(), key.to_string())),
        [] => Err(config_error(format!("parse error: unknown key `{key}`"))),
        many => Err(config_error(format!(
            "parse error: key `{key}` is ambiguous; use one of {}",
            many.iter().map(|s| format!("{s}.{key}")).collect::<Vec<_>>().join(", ")
        ))),
    }
}

pub fn set_value(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let (section, name) = qualify(key)?;
    let entry = table
        .entry(section.clone())
        .or_insert_with(|| Value::Table(Table::new()));
    match entry {
        Value::Table(t) => {
            t.insert(name, value);
            Ok(())
        }
        _ => Err(config_error(format!("parse error: `{section}` is not a section"))),
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(config_error(format!(
            "validation error: `{name}` must be finite and > 0, got {v}"
        )))
    }
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(format!("validation error: `{name}` must be finite")))
    }
}

fn parse_gauge(s: &str) -> Result<Gauge, CliError> {
    match s {
        "raw" => Ok(Gauge::Raw),
        "microwave" | "microwave_fixed" => Ok(Gauge::MicrowaveFixed),
        other => Err(config_error(format!(
            "validation error: `numeric.gauge` must be raw or microwave, got `{other}`"
        ))),
    }
}

impl RunConfig {
    /// Builds and validates a configuration for `command` from a merged table.
    pub fn from_table(command: Command, table: Table) -> Result<Self, CliError> {
        let raw: RawConfig = Value::Table(table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| config_error(format!("parse error: {}", e.message())))?;

        let g = &raw.geometry;
        let default_phi0 = match command {
            Command::Berry => TAU,
            _ => DEFAULT_OMEGA * DEFAULT_T2_STAR,
        };
        let geometry = Geometry {
            omega: positive("geometry.omega", g.omega.unwrap_or(DEFAULT_OMEGA))?,
            theta: g.theta.unwrap_or(PI / 3.0),
            theta0: g.theta0.unwrap_or(0.25),
            phi0: g.phi0.unwrap_or(default_phi0),
            rotations: g.rotations.unwrap_or(4),
            start_angle: finite("geometry.start_angle", g.start_angle.unwrap_or(0.0))?,
            retard: finite("geometry.retard", g.retard.unwrap_or(0.0))?,
            path: match g.path.as_deref().unwrap_or("ramsey") {
                "ramsey" => BerryPath::Ramsey,
                "echo" => BerryPath::Echo,
                other => {
                    return Err(config_error(format!(
                        "validation error: `geometry.path` must be ramsey or echo, got `{other}`"
                    )))
                }
            },
        };
        SpindleConfig::new(geometry.omega, geometry.theta0, geometry.theta).map_err(validation)?;
        if !(geometry.phi0.is_finite() && geometry.phi0 >= 0.0) {
            return Err(config_error(
                "validation error: `geometry.phi0` must be finite and >= 0",
            ));
        }
        if geometry.rotations == 0 {
            return Err(config_error("validation error: `geometry.rotations` must be >= 1"));
        }

        let s = &raw.sensitivity;
        let sensitivity = Sensitivity {
            a: s.a.unwrap_or(DEFAULT_A),
            t2: positive("sensitivity.t2", s.t2.unwrap_or(DEFAULT_T2))?,
            t2_star: positive("sensitivity.t2_star", s.t2_star.unwrap_or(DEFAULT_T2_STAR))?,
            total_time: positive("sensitivity.total_time", s.total_time.unwrap_or(3.0 * 3600.0))?,
        };
        SensitivityParams::new(
            sensitivity.a,
            geometry.omega,
            sensitivity.t2,
            DEFAULT_EFFICIENCY,
            sensitivity.total_time,
        )
        .map_err(validation)?;

        let d = &raw.decoherence;
        let kind = match d.model.as_deref() {
            None if command == Command::Echo => DecoherenceKind::Exponential,
            None => DecoherenceKind::Gaussian,
            Some("gaussian") => DecoherenceKind::Gaussian,
            Some("exponential") => DecoherenceKind::Exponential,
            Some("none") => DecoherenceKind::None,
            Some(other) => {
                return Err(config_error(format!(
                    "validation error: `decoherence.model` must be gaussian, exponential or none, got `{other}`"
                )))
            }
        };
        let timescale = d.timescale.unwrap_or(match kind {
            DecoherenceKind::Gaussian => sensitivity.t2_star,
            DecoherenceKind::Exponential => sensitivity.t2,
            DecoherenceKind::None => f64::INFINITY,
        });
        let decoherence = match kind {
            DecoherenceKind::None => DecoherenceModel::none(),
            _ => DecoherenceModel::new(kind, timescale).map_err(validation)?,
        };

        let r = &raw.readout;
        let model = match r.model.as_deref().unwrap_or("gaussian") {
            "gaussian" => SignalModel::Gaussian,
            "poisson" => SignalModel::Poisson {
                contrast: r.contrast.unwrap_or(0.3),
            },
            other => {
                return Err(config_error(format!(
                    "validation error: `readout.model` must be gaussian or poisson, got `{other}`"
                )))
            }
        };
        let params = ReadoutParams::new(
            r.repetitions.unwrap_or(100_000),
            r.efficiency.unwrap_or(DEFAULT_EFFICIENCY),
        )
        .and_then(|p| p.with_model(model))
        .map_err(validation)?;
        let trials = r.trials.unwrap_or(1000);
        if trials < nvberry::measurement::MIN_TRIALS {
            return Err(config_error(format!(
                "validation error: `readout.trials` must be >= {}",
                nvberry::measurement::MIN_TRIALS
            )));
        }
        let readout = Readout {
            params,
            seed: r.seed.unwrap_or(0),
            trials,
        };

        let n = &raw.numeric;
        let ratio = positive("numeric.ratio", n.ratio.unwrap_or(1000.0))?;
        let step = positive("numeric.step", n.step.unwrap_or(0.01))?;
        let tolerance = n.tolerance.unwrap_or(1e-8);
        if !(tolerance > 0.0 && tolerance <= 1e-3) {
            return Err(config_error(
                "validation error: `numeric.tolerance` must lie in (0, 1e-3]",
            ));
        }
        let numeric = Numeric {
            ratio,
            step,
            tolerance,
            gauge: parse_gauge(n.gauge.as_deref().unwrap_or("raw"))?,
            m: MagneticNumber::try_from(n.m.unwrap_or(1)).map_err(validation)?,
            method: match n.method.as_deref().unwrap_or("exponential") {
                "exponential" => Method::PiecewiseExponential,
                "rk4" => Method::Rk4,
                other => {
                    return Err(config_error(format!(
                        "validation error: `numeric.method` must be exponential or rk4, got `{other}`"
                    )))
                }
            },
        };

        let sweep = if command == Command::Sweep {
            let w = &raw.sweep;
            let target: Command = w
                .command
                .as_deref()
                .unwrap_or("ramsey")
                .parse()
                .map_err(|e| config_error(format!("validation error: `sweep.command`: {e}")))?;
            if target == Command::Sweep {
                return Err(config_error("validation error: `sweep.command` cannot be sweep"));
            }
            let parameter = w
                .parameter
                .clone()
                .ok_or_else(|| config_error("validation error: `sweep.parameter` is required"))?;
            let (section, name) = qualify(&parameter)?;
            if section == "sweep"
                || !KEYS
                    .iter()
                    .any(|(s, keys)| *s == section && keys.contains(&name.as_str()))
            {
                return Err(config_error(format!("validation error: cannot sweep `{parameter}`")));
            }
            let min = finite(
                "sweep.min",
                w.min
                    .ok_or_else(|| config_error("validation error: `sweep.min` is required"))?,
            )?;
            let max = finite(
                "sweep.max",
                w.max
                    .ok_or_else(|| config_error("validation error: `sweep.max` is required"))?,
            )?;
            let count = w.count.unwrap_or(11);
            if count == 0 {
                return Err(config_error("validation error: `sweep.count` must be >= 1"));
            }
            Some(Sweep {
                command: target,
                parameter: format!("{section}.{name}"),
                min,
                max,
                count,
            })
        } else {
            None
        };

        Ok(Self {
            command,
            geometry,
            decoherence,
            readout,
            numeric,
            sensitivity,
            sweep,
            table,
        })
    }

    /// Configuration of one sweep point: the merged table with the swept key
    /// set to `value`, run as the sweep's target command.
    pub fn sweep_point(&self, index: usize, value: f64) -> Result<Self, CliError> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| config_error("validation error: not a sweep configuration"))?;
        let mut table = self.table.clone();
        let v = if value.fract() == 0.0 && value.abs() < 9.0e15 {
            Value::Integer(value as i64)
        } else {
            Value::Float(value)
        };
        // disjoint readout stream per point
        set_value(
            &mut table,
            "readout.seed",
            Value::Integer(self.readout.seed.wrapping_add(index as u64) as i64),
        )?;
        set_value(&mut table, &sweep.parameter, v)?;
        Self::from_table(sweep.command, table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(command: Command, text: &str, overrides: &[&str]) -> Result<RunConfig, CliError> {
        let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        RunConfig::from_table(command, load_table(Some(text), &overrides)?)
    }

    #[test]
    fn minimal_echo_config_gets_defaults() {
        let cfg = build(Command::Echo, "[geometry]\ntheta0 = 0.25\nrotations = 4\n", &[]).unwrap();
        assert_eq!(cfg.geometry.omega, 4000.0 * PI);
        assert_eq!(cfg.geometry.theta0, 0.25);
        assert_eq!(cfg.geometry.rotations, 4);
        assert_eq!(cfg.decoherence.kind, DecoherenceKind::Exponential);
        assert_eq!(cfg.decoherence.timescale, 2e-3);
        assert_eq!(cfg.sensitivity.t2_star, 10e-6);
        assert_eq!(cfg.sensitivity.a, 2.0);
        assert_eq!(cfg.readout.params.efficiency, 0.15);
    }

    #[test]
    fn ramsey_defaults_to_gaussian_dephasing_over_one_t2_star() {
        let cfg = build(Command::Ramsey, "", &[]).unwrap();
        assert_eq!(cfg.decoherence.kind, DecoherenceKind::Gaussian);
        assert_eq!(cfg.decoherence.timescale, 10e-6);
        assert!((cfg.geometry.phi0 / cfg.geometry.omega - 10e-6).abs() < 1e-18);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        for text in ["[geometry]\nomega_rpm = 3\n", "[plot]\nx = 1\n", "omega = 3\n"] {
            let err = build(Command::Echo, text, &[]).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{text}");
        }
        assert!(build(Command::Echo, "", &["omega_rpm=3"]).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for set in [
            "omega=-1",
            "theta=2",
            "phi0=-1",
            "rotations=0",
            "efficiency=1.5",
            "repetitions=0",
            "ratio=0",
            "tolerance=1",
            "gauge=coulomb",
            "a=0.5",
            "trials=10",
            "path=square",
            "geometry.theta=\"wide\"",
        ] {
            assert!(build(Command::Berry, "", &[set]).is_err(), "{set}");
        }
    }

    #[test]
    fn overrides_resolve_bare_and_dotted_keys() {
        let cfg = build(
            Command::Ramsey,
            "[geometry]\ntheta = 0.5\n",
            &["theta=0.7", "readout.seed=9"],
        )
        .unwrap();
        assert_eq!(cfg.geometry.theta, 0.7);
        assert_eq!(cfg.readout.seed, 9);
        // `model` lives in two sections
        assert!(qualify("model").is_err());
        assert_eq!(
            qualify("timescale").unwrap(),
            ("decoherence".to_string(), "timescale".to_string())
        );
        assert_eq!(parse_value("gaussian"), Value::String("gaussian".into()));
        assert_eq!(parse_value("3"), Value::Integer(3));
        assert_eq!(parse_value("1e-8"), Value::Float(1e-8));
    }

    #[test]
    fn sweep_points_get_their_own_seed() {
        let cfg = build(
            Command::Sweep,
            "[sweep]\ncommand = \"ramsey\"\nparameter = \"theta\"\nmin = 0.2\nmax = 1.0\ncount = 5\n",
            &["seed=40"],
        )
        .unwrap();
        let sweep = cfg.sweep.as_ref().unwrap();
        assert_eq!(sweep.values(), vec![0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        let p = cfg.sweep_point(3, 0.8).unwrap();
        assert_eq!(p.command, Command::Ramsey);
        assert_eq!(p.geometry.theta, 0.8);
        assert_eq!(p.readout.seed, 43);
        let seeds = build(
            Command::Sweep,
            "[sweep]\nparameter = \"readout.seed\"\nmin = 1\nmax = 3\ncount = 3\n",
            &[],
        )
        .unwrap();
        assert_eq!(seeds.sweep_point(2, 3.0).unwrap().readout.seed, 3);
        assert!(build(
            Command::Sweep,
            "[sweep]\nparameter = \"sweep.count\"\nmin = 1\nmax = 2\n",
            &[]
        )
        .is_err());
    }
}
