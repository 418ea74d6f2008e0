//! Ramsey and spin-echo sequences on the {m = 0, m = +1} transition.
//!
//! Pulses are resonant with the 0 <-> +1 transition and are described in the
//! rotating frame, so dynamic phases drop out and only the geometric phase
//! of the +1 branch relative to the 0 branch survives. The m = -1 level is
//! never addressed.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::eigenstructure::{Gauge, MagneticNumber};
use crate::error::{Error, Result};
use crate::evolution::{adiabaticity_margin, unitary_step, MIN_ADIABATICITY_MARGIN};
use crate::physics::{Basis, CMatrix3, CVector3, Orientation, PhysicalConstants, SpinState, C64};
use crate::trajectories::{echo_trajectory, pi_pulse_times, ramsey_trajectory, SpindleConfig};

/// Below this |sin theta| the lab-z microwave field has no transverse part.
pub const NO_DRIVE_LIMIT: f64 = 1e-6;
/// Sequences longer than this many coherence times are rejected.
pub const DEAD_SIGNAL_FACTOR: f64 = 5.0;

const PLUS: usize = 0;
const ZERO: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseKind {
    HalfPi,
    Pi,
    Readout,
}

impl PulseKind {
    /// Rotation angle on the two-level transition.
    pub fn angle(self) -> f64 {
        match self {
            Self::HalfPi => PI / 2.0,
            Self::Pi => PI,
            Self::Readout => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEvent {
    pub kind: PulseKind,
    /// Seconds from the start of the sequence.
    pub time: f64,
    /// Microwave phase of the pulse (rad).
    pub axis_phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoherenceKind {
    /// No dephasing; envelope is identically 1.
    None,
    /// exp(-(t / T2*)^2), free precession.
    Gaussian,
    /// exp(-t / T2), echo-refocused.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceModel {
    pub kind: DecoherenceKind,
    /// Seconds; ignored for [`DecoherenceKind::None`].
    pub timescale: f64,
}

impl DecoherenceModel {
    pub fn new(kind: DecoherenceKind, timescale: f64) -> Result<Self> {
        if kind != DecoherenceKind::None && !(timescale.is_finite() && timescale > 0.0) {
            return Err(Error::invalid("timescale", "must be finite and > 0"));
        }
        Ok(Self { kind, timescale })
    }

    pub fn none() -> Self {
        Self {
            kind: DecoherenceKind::None,
            timescale: f64::INFINITY,
        }
    }

    pub fn gaussian(t2_star: f64) -> Result<Self> {
        Self::new(DecoherenceKind::Gaussian, t2_star)
    }

    pub fn exponential(t2: f64) -> Result<Self> {
        Self::new(DecoherenceKind::Exponential, t2)
    }

    /// Coherence remaining after `t` seconds, in (0, 1].
    pub fn envelope(&self, t: f64) -> f64 {
        match self.kind {
            DecoherenceKind::None => 1.0,
            DecoherenceKind::Gaussian => (-(t / self.timescale).powi(2)).exp(),
            DecoherenceKind::Exponential => (-t / self.timescale).exp(),
        }
    }

    fn check_alive(&self, duration: f64) -> Result<()> {
        let limit = DEAD_SIGNAL_FACTOR * self.timescale;
        if self.kind != DecoherenceKind::None && duration > limit {
            return Err(Error::SignalDead { duration, limit });
        }
        Ok(())
    }
}

/// Resonant drive used by the finite-duration pulse mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiDrive {
    /// Microwave field amplitude B_R along lab z (T).
    pub field: f64,
    /// Drive frequency minus transition frequency (rad/s).
    pub detuning: f64,
}

impl RabiDrive {
    /// gamma B_R sin(theta) / sqrt 2.
    pub fn rabi_frequency(&self, o: Orientation, c: &PhysicalConstants) -> f64 {
        c.gyromagnetic() * self.field.abs() * o.theta().sin() * FRAC_1_SQRT_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PulseMode {
    /// Instantaneous rotations.
    #[default]
    Ideal,
    /// Rotations of finite length under a resonant (or detuned) drive; the
    /// diamond is held still during each pulse.
    Finite(RabiDrive),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProtocolOptions {
    pub constants: PhysicalConstants,
    pub pulses: PulseMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    /// Relative geometric phase of the +1 branch (rad).
    pub phase_estimate: f64,
    pub population_m0: f64,
    pub coherence_factor: f64,
    pub retard: f64,
    /// Total sequence length (s).
    pub duration: f64,
    pub pulses: Vec<PulseEvent>,
    pub adiabaticity_margin: f64,
}

/// Ideal two-level rotation by `angle` about the axis at `axis_phase`, in
/// (+1, 0, -1) amplitude order.
fn rotation(angle: f64, axis_phase: f64) -> CMatrix3 {
    let (s, c) = (angle / 2.0).sin_cos();
    let mut u = CMatrix3::identity();
    u[(ZERO, ZERO)] = C64::from(c);
    u[(PLUS, PLUS)] = C64::from(c);
    u[(ZERO, PLUS)] = C64::new(0.0, -s) * C64::from_polar(1.0, -axis_phase);
    u[(PLUS, ZERO)] = C64::new(0.0, -s) * C64::from_polar(1.0, axis_phase);
    u
}

/// Rotating-frame propagator of a finite pulse with the same nominal angle.
fn finite_rotation(angle: f64, axis_phase: f64, drive: &RabiDrive, o: Orientation, c: &PhysicalConstants) -> CMatrix3 {
    let rabi = drive.rabi_frequency(o, c);
    let mut h = CMatrix3::zeros();
    h[(PLUS, PLUS)] = C64::from(-drive.detuning);
    h[(ZERO, PLUS)] = C64::from_polar(rabi / 2.0, -axis_phase);
    h[(PLUS, ZERO)] = C64::from_polar(rabi / 2.0, axis_phase);
    unitary_step(&h, angle / rabi)
}

/// Microwave-gauge amplitudes -> raw-gauge amplitudes at azimuth phi.
fn raw_from_microwave(phi: f64) -> CMatrix3 {
    CMatrix3::from_diagonal(&CVector3::from_fn(|k, _| {
        let m = MagneticNumber::ALL[k].as_f64();
        C64::from_polar(1.0, -m * phi)
    }))
}

fn pulse_matrix(kind: PulseKind, axis_phase: f64, o: Orientation, mode: &PulseMode, c: &PhysicalConstants) -> CMatrix3 {
    match mode {
        PulseMode::Ideal => rotation(kind.angle(), axis_phase),
        PulseMode::Finite(_) if kind == PulseKind::Readout => CMatrix3::identity(),
        PulseMode::Finite(drive) => finite_rotation(kind.angle(), axis_phase, drive, o, c),
    }
}

fn apply_with(
    state: &SpinState,
    kind: PulseKind,
    axis_phase: f64,
    o: Orientation,
    mode: &PulseMode,
    c: &PhysicalConstants,
) -> Result<SpinState> {
    let gauge = match state.basis() {
        Basis::NvPrime { orientation, gauge } if orientation == o => gauge,
        other => {
            return Err(Error::BasisMismatch(format!(
                "pulse at {o:?} needs a state in that NV basis, got {other:?}"
            )))
        }
    };
    let sin_theta = o.theta().sin().abs();
    if sin_theta <= NO_DRIVE_LIMIT {
        return Err(Error::NoDrive { sin_theta });
    }
    let u = pulse_matrix(kind, axis_phase, o, mode, c);
    let u = match gauge {
        Gauge::MicrowaveFixed => u,
        Gauge::Raw => {
            let p = raw_from_microwave(o.phi());
            p * u * p.adjoint()
        }
    };
    Ok(SpinState::from_vector(u * state.vector(), state.basis()))
}

/// Ideal pulse on the 0 <-> +1 transition. The state must be written in the
/// NV basis at `o`; in the raw gauge the rotation axis picks up the azimuth.
pub fn apply_pulse(state: &SpinState, kind: PulseKind, axis_phase: f64, o: Orientation) -> Result<SpinState> {
    apply_with(
        state,
        kind,
        axis_phase,
        o,
        &PulseMode::Ideal,
        &PhysicalConstants::default(),
    )
}

/// Finite-duration version of [`apply_pulse`] for validating the ideal one.
pub fn apply_finite_pulse(
    state: &SpinState,
    kind: PulseKind,
    axis_phase: f64,
    o: Orientation,
    drive: &RabiDrive,
    c: &PhysicalConstants,
) -> Result<SpinState> {
    if !(drive.field.is_finite() && drive.field != 0.0 && drive.detuning.is_finite()) {
        return Err(Error::invalid(
            "drive",
            "field must be finite and non-zero, detuning finite",
        ));
    }
    apply_with(state, kind, axis_phase, o, &PulseMode::Finite(*drive), c)
}

/// Free evolution in the rotating frame: the +1 branch gains exp(i phase),
/// and the state is re-labelled with the new orientation.
fn precess(state: &SpinState, phase: f64, o: Orientation) -> SpinState {
    let mut v = *state.vector();
    v[PLUS] *= C64::from_polar(1.0, phase);
    SpinState::from_vector(
        v,
        Basis::NvPrime {
            orientation: o,
            gauge: Gauge::MicrowaveFixed,
        },
    )
}

fn finish(
    state: &SpinState,
    phase: f64,
    coherence: f64,
    retard: f64,
    duration: f64,
    pulses: Vec<PulseEvent>,
    margin: f64,
) -> ProtocolResult {
    let ideal = state.populations()[ZERO];
    ProtocolResult {
        phase_estimate: phase,
        population_m0: 0.5 + coherence * (ideal - 0.5),
        coherence_factor: coherence,
        retard,
        duration,
        pulses,
        adiabaticity_margin: margin,
    }
}

fn nv_basis(o: Orientation) -> Basis {
    Basis::NvPrime {
        orientation: o,
        gauge: Gauge::MicrowaveFixed,
    }
}

/// Axis phase of the closing pi/2 pulse; chosen so that
/// population_m0 = (1 + coherence cos(Phi + retard)) / 2.
fn closing_axis(retard: f64) -> f64 {
    PI - retard
}

/// pi/2 at phi = 0, free rotation of the spindle through phi0 at fixed NV
/// polar angle, pi/2 with a phase retard, then readout.
pub fn run_ramsey(
    cfg: &SpindleConfig,
    phi0: f64,
    deco: &DecoherenceModel,
    retard: f64,
    opts: &ProtocolOptions,
) -> Result<ProtocolResult> {
    let traj = ramsey_trajectory(cfg, phi0)?;
    let duration = traj.duration();
    deco.check_alive(duration)?;
    let margin = adiabaticity_margin(&traj, &opts.constants);
    if margin < MIN_ADIABATICITY_MARGIN {
        return Err(Error::NotAdiabatic {
            margin,
            required: MIN_ADIABATICITY_MARGIN,
        });
    }
    let c = &opts.constants;
    let start = traj.orientation(0.0);
    let end = traj.orientation(duration);
    let phase = phi0 * cfg.nv_theta.cos();

    let psi = SpinState::basis_vector(0, nv_basis(start))?;
    let psi = apply_with(&psi, PulseKind::HalfPi, 0.0, start, &opts.pulses, c)?;
    let psi = precess(&psi, phase, end);
    let psi = apply_with(&psi, PulseKind::HalfPi, closing_axis(retard), end, &opts.pulses, c)?;

    let pulses = vec![
        PulseEvent {
            kind: PulseKind::HalfPi,
            time: 0.0,
            axis_phase: 0.0,
        },
        PulseEvent {
            kind: PulseKind::HalfPi,
            time: duration,
            axis_phase: closing_axis(retard),
        },
        PulseEvent {
            kind: PulseKind::Readout,
            time: duration,
            axis_phase: 0.0,
        },
    ];
    Ok(finish(
        &psi,
        phase,
        deco.envelope(duration),
        retard,
        duration,
        pulses,
        margin,
    ))
}

/// Microwave-gauge m = +1 phase accumulated on the echo path up to spindle
/// angle u, measured from the NV axis lying in the lab x-y plane.
fn echo_phase_at(theta0: f64, u: f64) -> f64 {
    (theta0.tan() * u.sin()).atan()
}

/// pi/2 at t = 0, a pi pulse each time the NV axis crosses the lab x-y
/// plane, and the closing pi/2 after `rotations` full turns.
pub fn run_echo(
    cfg: &SpindleConfig,
    rotations: u32,
    deco: &DecoherenceModel,
    retard: f64,
    opts: &ProtocolOptions,
) -> Result<ProtocolResult> {
    let traj = echo_trajectory(cfg, rotations)?;
    let duration = traj.duration();
    deco.check_alive(duration)?;
    let c = &opts.constants;
    let margin = adiabaticity_margin(&traj, c);
    let flips = pi_pulse_times(cfg, rotations)?;
    let theta0 = cfg.tilt_theta0;
    let angle = |t: f64| cfg.omega * t + cfg.start_angle;

    let mut pulses = vec![PulseEvent {
        kind: PulseKind::HalfPi,
        time: 0.0,
        axis_phase: 0.0,
    }];
    let start = traj.orientation(0.0);
    let mut psi = SpinState::basis_vector(0, nv_basis(start))?;
    psi = apply_with(&psi, PulseKind::HalfPi, 0.0, start, &opts.pulses, c)?;

    let mut last = 0.0;
    let mut sign = 1.0;
    let mut rectified = 0.0;
    for &t in flips.iter().chain(std::iter::once(&duration)) {
        let gained = echo_phase_at(theta0, angle(t)) - echo_phase_at(theta0, angle(last));
        rectified += sign * gained;
        let o = traj.orientation(t);
        psi = precess(&psi, gained, o);
        if t < duration {
            psi = apply_with(&psi, PulseKind::Pi, 0.0, o, &opts.pulses, c)?;
            pulses.push(PulseEvent {
                kind: PulseKind::Pi,
                time: t,
                axis_phase: 0.0,
            });
            sign = -sign;
        }
        last = t;
    }

    let end = traj.orientation(duration);
    psi = apply_with(&psi, PulseKind::HalfPi, closing_axis(retard), end, &opts.pulses, c)?;
    pulses.push(PulseEvent {
        kind: PulseKind::HalfPi,
        time: duration,
        axis_phase: closing_axis(retard),
    });
    pulses.push(PulseEvent {
        kind: PulseKind::Readout,
        time: duration,
        axis_phase: 0.0,
    });
    // +-4 n theta0, the sign set by which half-turn the first pi pulse ends
    let closed_form = 4.0 * rotations as f64 * theta0;
    let phase = match cfg.start_angle.cos() {
        c if c > 0.0 => closed_form,
        c if c < 0.0 => -closed_form,
        _ => rectified,
    };
    Ok(finish(
        &psi,
        phase,
        deco.envelope(duration),
        retard,
        duration,
        pulses,
        margin,
    ))
}
