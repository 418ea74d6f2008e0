//! Instantaneous NV eigenstates, gauge choices and geometric-phase line
//! integrals.
//!
//! Phase convention: an eigenstate transported adiabatically picks up
//! exp(i Phi) relative to the reference eigenstate at the final orientation,
//! with Phi = i * integral <psi|d psi/dt> dt. In this convention the
//! microwave-fixed gauge connection is m cos(theta) per unit phi and the raw
//! gauge connection is -m (1 - cos theta), so a closed raw-gauge loop gives
//! -m times the enclosed solid angle.

use std::cell::Cell;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::physics::{Basis, CMatrix3, CVector3, Orientation, SpinState, C64};
use crate::quadrature::{integrate_pieces, romberg_stieltjes};
use crate::trajectories::{Trajectory, CLOSURE_TOLERANCE};

/// Relative tolerance for all geometric-phase quadratures.
pub const PHASE_REL_TOL: f64 = 1e-9;
/// Raw-gauge paths must stay this far from theta = pi.
pub const RAW_GAUGE_EXCLUSION: f64 = 1e-6;

const PHASE_ABS_FLOOR: f64 = 1e-13;

/// Phase convention for the instantaneous eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gauge {
    /// Eigenstates exactly as written in the closed form below.
    Raw,
    /// Raw eigenstates multiplied by exp(-i m phi); the microwave coupling
    /// is then independent of phi.
    MicrowaveFixed,
}

/// Spin projection m on the NV axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MagneticNumber(i8);

impl MagneticNumber {
    pub const PLUS: Self = Self(1);
    pub const ZERO: Self = Self(0);
    pub const MINUS: Self = Self(-1);
    pub const ALL: [Self; 3] = [Self::PLUS, Self::ZERO, Self::MINUS];

    pub fn new(m: i8) -> Result<Self> {
        match m {
            -1..=1 => Ok(Self(m)),
            _ => Err(Error::invalid("m", format!("{m} is not in {{-1, 0, 1}}"))),
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Position in (+1, 0, -1) amplitude order.
    pub fn index(self) -> usize {
        (1 - self.0) as usize
    }
}

impl TryFrom<i32> for MagneticNumber {
    type Error = Error;

    fn try_from(m: i32) -> Result<Self> {
        i8::try_from(m)
            .map_err(|_| Error::invalid("m", format!("{m} is not in {{-1, 0, 1}}")))
            .and_then(Self::new)
    }
}

/// Lab-basis amplitudes of the m-th NV eigenstate.
pub fn eigenvector(m: MagneticNumber, o: Orientation, gauge: Gauge) -> CVector3 {
    let theta = o.theta();
    let phi = o.phi();
    let (half_s, half_c) = (theta / 2.0).sin_cos();
    let st = theta.sin();
    let e = |k: f64| C64::from_polar(1.0, k * phi);
    let raw = match m.value() {
        1 => CVector3::new(
            C64::from(half_c * half_c),
            e(1.0) * (st * FRAC_1_SQRT_2),
            e(2.0) * (half_s * half_s),
        ),
        0 => CVector3::new(
            -e(-1.0) * (st * FRAC_1_SQRT_2),
            C64::from(theta.cos()),
            e(1.0) * (st * FRAC_1_SQRT_2),
        ),
        _ => CVector3::new(
            e(-2.0) * (half_s * half_s),
            -e(-1.0) * (st * FRAC_1_SQRT_2),
            C64::from(half_c * half_c),
        ),
    };
    match gauge {
        Gauge::Raw => raw,
        Gauge::MicrowaveFixed => raw * e(-m.as_f64()),
    }
}

/// Unitary whose columns are the (+1, 0, -1) eigenvectors.
pub fn eigenbasis(o: Orientation, gauge: Gauge) -> CMatrix3 {
    CMatrix3::from_columns(&[
        eigenvector(MagneticNumber::PLUS, o, gauge),
        eigenvector(MagneticNumber::ZERO, o, gauge),
        eigenvector(MagneticNumber::MINUS, o, gauge),
    ])
}

/// The m-th eigenstate of the zero-field Hamiltonian at `o`, lab basis.
pub fn analytic_eigenstate(m: MagneticNumber, o: Orientation, gauge: Gauge) -> SpinState {
    SpinState::from_vector(eigenvector(m, o, gauge), Basis::LabZ)
}

/// Berry connection per unit azimuth, dPhi/dphi, at polar angle theta.
pub fn berry_connection(m: MagneticNumber, theta: f64, gauge: Gauge) -> f64 {
    let m = m.as_f64();
    match gauge {
        Gauge::Raw => -m * (1.0 - theta.cos()),
        Gauge::MicrowaveFixed => m * theta.cos(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseResult {
    /// Geometric phase (rad).
    pub geometric: f64,
    /// Enclosed solid angle (sr); only for closed paths.
    pub solid_angle: Option<f64>,
    pub gauge: Gauge,
}

/// Pieces [0, t_1], [t_1, t_2], ..., [t_k, T] with alternating signs
/// starting at +1. Pulse times outside (0, T) are ignored.
pub(crate) fn rectified_pieces(duration: f64, pulses: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut breaks = vec![0.0];
    let mut weights = Vec::new();
    let mut sign = 1.0;
    let mut inside: Vec<f64> = pulses.iter().copied().filter(|&t| t > 0.0 && t < duration).collect();
    inside.sort_by(f64::total_cmp);
    for t in inside {
        breaks.push(t);
        weights.push(sign);
        sign = -sign;
    }
    breaks.push(duration);
    weights.push(sign);
    (breaks, weights)
}

/// Guards the raw gauge against its Dirac string at theta = pi.
fn check_raw_gauge(traj: &Trajectory) -> Result<()> {
    for t in traj.sample_times(4097) {
        let theta = traj.theta(t);
        if PI - theta < RAW_GAUGE_EXCLUSION {
            return Err(Error::GaugeSingularity { theta });
        }
    }
    Ok(())
}

/// Line integral of the Berry connection along `traj`.
///
/// With `rectification`, the integrand changes sign at each listed pulse
/// time (ideal pi pulses exchanging the two levels of the superposition).
pub fn geometric_phase(
    traj: &Trajectory,
    m: MagneticNumber,
    gauge: Gauge,
    rectification: Option<&[f64]>,
) -> Result<PhaseResult> {
    if gauge == Gauge::Raw {
        check_raw_gauge(traj)?;
    }
    let (breaks, weights) = rectified_pieces(traj.duration(), rectification.unwrap_or(&[]));
    let worst = Cell::new(0.0f64);
    let est = integrate_pieces(
        |t| {
            let theta = traj.theta(t);
            worst.set(worst.get().max(theta));
            berry_connection(m, theta, gauge) * traj.dphi_dt(t)
        },
        &breaks,
        &weights,
        PHASE_REL_TOL,
        PHASE_ABS_FLOOR,
    )?;
    if gauge == Gauge::Raw && PI - worst.get() < RAW_GAUGE_EXCLUSION {
        return Err(Error::GaugeSingularity { theta: worst.get() });
    }
    let solid_angle = if traj.is_closed() {
        Some(solid_angle(traj)?)
    } else {
        None
    };
    Ok(PhaseResult {
        geometric: est.value,
        solid_angle,
        gauge,
    })
}

/// Signed solid angle enclosed by a closed path, as the spherical line
/// integral of (1 - cos theta) d phi.
pub fn solid_angle(traj: &Trajectory) -> Result<f64> {
    let gap = traj.closure_gap();
    if gap > CLOSURE_TOLERANCE {
        return Err(Error::NotClosed { gap });
    }
    let est = integrate_pieces(
        |t| (1.0 - traj.theta(t).cos()) * traj.dphi_dt(t),
        &[0.0, traj.duration()],
        &[1.0],
        PHASE_REL_TOL,
        PHASE_ABS_FLOOR,
    )?;
    Ok(est.value)
}

/// Geometric phase of a path given only as 2^k + 1 evenly spaced samples of
/// (theta, phi); trapezoid sums with Richardson extrapolation.
pub fn geometric_phase_sampled(theta: &[f64], phi: &[f64], m: MagneticNumber, gauge: Gauge) -> Result<f64> {
    if theta.len() != phi.len() {
        return Err(Error::invalid("samples", "theta and phi lengths differ"));
    }
    if gauge == Gauge::Raw {
        if let Some(&t) = theta.iter().find(|&&t| PI - t < RAW_GAUGE_EXCLUSION) {
            return Err(Error::GaugeSingularity { theta: t });
        }
    }
    let connection: Vec<f64> = theta.iter().map(|&t| berry_connection(m, t, gauge)).collect();
    Ok(romberg_stieltjes(&connection, phi)?.value)
}
