//! Orientation paths of the NV axis for the two spindle geometries.
//!
//! Ramsey geometry: the spindle is the lab z axis and the NV axis sits at a
//! fixed polar angle, so theta is constant and phi = Omega t.
//!
//! Echo geometry: the spindle is tilted by theta0 away from z inside the x-z
//! plane (towards -x) and the NV axis is perpendicular to it. With
//! s = (-sin t0, 0, cos t0), e1 = (cos t0, 0, sin t0), e2 = (0, 1, 0) the NV
//! axis is z'(t) = cos(u) e1 + sin(u) e2 with u = Omega t + start_angle.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::physics::Orientation;

/// Endpoint tolerance for deciding that a path is a closed loop.
pub const CLOSURE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpindleConfig {
    /// Spindle angular speed (rad/s).
    pub omega: f64,
    /// Spindle tilt from the lab z axis (echo geometry).
    pub tilt_theta0: f64,
    /// NV polar angle from the spindle axis (Ramsey geometry).
    pub nv_theta: f64,
    /// Spindle angle at t = 0 (echo geometry); 0 puts the NV axis on e1.
    pub start_angle: f64,
}

impl SpindleConfig {
    pub fn new(omega: f64, tilt_theta0: f64, nv_theta: f64) -> Result<Self> {
        let cfg = Self {
            omega,
            tilt_theta0,
            nv_theta,
            start_angle: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn ramsey(omega: f64, nv_theta: f64) -> Result<Self> {
        Self::new(omega, 0.0, nv_theta)
    }

    pub fn echo(omega: f64, tilt_theta0: f64) -> Result<Self> {
        Self::new(omega, tilt_theta0, PI / 2.0)
    }

    pub fn with_start_angle(mut self, start_angle: f64) -> Result<Self> {
        if !start_angle.is_finite() {
            return Err(Error::invalid("start_angle", "must be finite"));
        }
        self.start_angle = start_angle;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::invalid("omega", "must be finite and > 0"));
        }
        for (name, v) in [("tilt_theta0", self.tilt_theta0), ("nv_theta", self.nv_theta)] {
            if !(0.0..=PI / 2.0).contains(&v) {
                return Err(Error::invalid(name, format!("{v} is outside [0, pi/2]")));
            }
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }
}

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Path {
    Azimuthal {
        theta: f64,
        omega: f64,
    },
    TiltedSpindle {
        theta0: f64,
        omega: f64,
        start: f64,
    },
    Custom {
        theta: Arc<ScalarFn>,
        phi: Arc<ScalarFn>,
        dphi: Arc<ScalarFn>,
    },
}

/// Time-parametrized NV-axis path (theta(t), phi(t)) on [0, duration].
///
/// phi is always the continuous branch; it is never reduced mod 2pi.
#[derive(Clone)]
pub struct Trajectory {
    path: Path,
    duration: f64,
    closed: bool,
    degenerate: bool,
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.path {
            Path::Azimuthal { .. } => "azimuthal",
            Path::TiltedSpindle { .. } => "tilted-spindle",
            Path::Custom { .. } => "custom",
        };
        f.debug_struct("Trajectory")
            .field("kind", &kind)
            .field("duration", &self.duration)
            .field("closed", &self.closed)
            .field("degenerate", &self.degenerate)
            .finish()
    }
}

impl Trajectory {
    /// A user-supplied path. `closed` is decided from the endpoints.
    pub fn custom<T, P, D>(theta: T, phi: P, dphi_dt: D, duration: f64) -> Result<Self>
    where
        T: Fn(f64) -> f64 + Send + Sync + 'static,
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::invalid("duration", "must be finite and >= 0"));
        }
        for t in [0.0, duration] {
            let th = theta(t);
            if !(0.0..=PI).contains(&th) || !phi(t).is_finite() || !dphi_dt(t).is_finite() {
                return Err(Error::invalid("trajectory", format!("invalid value at t = {t}")));
            }
        }
        let gap = endpoint_gap(theta(0.0), phi(0.0), theta(duration), phi(duration));
        Ok(Self {
            path: Path::Custom {
                theta: Arc::new(theta),
                phi: Arc::new(phi),
                dphi: Arc::new(dphi_dt),
            },
            duration,
            closed: gap <= CLOSURE_TOLERANCE,
            degenerate: false,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Set for the untilted echo spindle, where the path is a great circle
    /// through the equator with no tilt to rectify.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn theta(&self, t: f64) -> f64 {
        match &self.path {
            Path::Azimuthal { theta, .. } => *theta,
            Path::TiltedSpindle { theta0, omega, start } => {
                let u = omega * t + start;
                (theta0.sin() * u.cos()).clamp(-1.0, 1.0).acos()
            }
            Path::Custom { theta, .. } => theta(t),
        }
    }

    pub fn phi(&self, t: f64) -> f64 {
        match &self.path {
            Path::Azimuthal { omega, .. } => omega * t,
            Path::TiltedSpindle { theta0, omega, start } => {
                let u = omega * t + start;
                let (su, cu) = u.sin_cos();
                let c0 = theta0.cos();
                // phi - u from the angle difference; the denominator stays
                // positive for theta0 < pi/2 so this branch is continuous.
                u + (su * cu * (1.0 - c0)).atan2(c0 * cu * cu + su * su)
            }
            Path::Custom { phi, .. } => phi(t),
        }
    }

    pub fn dphi_dt(&self, t: f64) -> f64 {
        match &self.path {
            Path::Azimuthal { omega, .. } => *omega,
            Path::TiltedSpindle { theta0, omega, start } => {
                let cu = (omega * t + start).cos();
                let s0 = theta0.sin();
                omega * theta0.cos() / (1.0 - s0 * s0 * cu * cu)
            }
            Path::Custom { dphi, .. } => dphi(t),
        }
    }

    pub fn dtheta_dt(&self, t: f64) -> f64 {
        match &self.path {
            Path::Azimuthal { .. } => 0.0,
            Path::TiltedSpindle { theta0, omega, start } => {
                let u = omega * t + start;
                let s0 = theta0.sin();
                let sin_theta = (1.0 - (s0 * u.cos()).powi(2)).max(0.0).sqrt();
                if sin_theta == 0.0 {
                    0.0
                } else {
                    omega * s0 * u.sin() / sin_theta
                }
            }
            Path::Custom { theta, .. } => {
                let h = 1e-6 * self.duration.max(f64::MIN_POSITIVE);
                let lo = (t - h).max(0.0);
                let hi = (t + h).min(self.duration);
                if hi > lo {
                    (theta(hi) - theta(lo)) / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn orientation(&self, t: f64) -> Orientation {
        Orientation::clamped(self.theta(t), self.phi(t))
    }

    /// Unit NV axis in the lab frame.
    pub fn axis(&self, t: f64) -> [f64; 3] {
        match &self.path {
            Path::TiltedSpindle { theta0, omega, start } => {
                let (su, cu) = (omega * t + start).sin_cos();
                let (s0, c0) = theta0.sin_cos();
                [c0 * cu, su, s0 * cu]
            }
            _ => self.orientation(t).axis(),
        }
    }

    /// Evenly spaced sample times including both endpoints.
    pub fn sample_times(&self, samples: usize) -> Vec<f64> {
        let n = samples.max(2);
        (0..n).map(|i| self.duration * i as f64 / (n - 1) as f64).collect()
    }

    /// Angular distance travelled on the unit sphere, estimated from samples.
    pub fn arc_length(&self, samples: usize) -> f64 {
        let ts = self.sample_times(samples);
        ts.windows(2)
            .map(|w| {
                let a = self.axis(w[0]);
                let b = self.axis(w[1]);
                let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
                dot.acos()
            })
            .sum()
    }

    /// Largest gap between start and end orientation, with phi compared
    /// mod 2pi.
    pub fn closure_gap(&self) -> f64 {
        endpoint_gap(
            self.theta(0.0),
            self.phi(0.0),
            self.theta(self.duration),
            self.phi(self.duration),
        )
    }
}

fn endpoint_gap(theta0: f64, phi0: f64, theta1: f64, phi1: f64) -> f64 {
    let dphi = (phi1 - phi0).rem_euclid(TAU);
    let dphi = dphi.min(TAU - dphi);
    // phi is meaningless at the poles
    let pole = theta0.min(PI - theta0) < CLOSURE_TOLERANCE;
    let dphi = if pole { 0.0 } else { dphi };
    (theta1 - theta0).abs().max(dphi)
}

/// NV axis at fixed polar angle swept through azimuth phi0 at rate Omega.
pub fn ramsey_trajectory(cfg: &SpindleConfig, phi0: f64) -> Result<Trajectory> {
    cfg.validate()?;
    if !(phi0.is_finite() && phi0 >= 0.0) {
        return Err(Error::invalid("phi0", "must be finite and >= 0"));
    }
    let wrapped = phi0.rem_euclid(TAU);
    let closed = wrapped.min(TAU - wrapped) <= CLOSURE_TOLERANCE;
    Ok(Trajectory {
        path: Path::Azimuthal {
            theta: cfg.nv_theta,
            omega: cfg.omega,
        },
        duration: phi0 / cfg.omega,
        closed,
        degenerate: false,
    })
}

/// NV axis perpendicular to a tilted spindle, for `rotations` full turns.
///
/// theta0 = 0 is allowed but flagged via [`Trajectory::is_degenerate`].
pub fn echo_trajectory(cfg: &SpindleConfig, rotations: u32) -> Result<Trajectory> {
    cfg.validate()?;
    if rotations == 0 {
        return Err(Error::invalid("rotations", "must be >= 1"));
    }
    if cfg.tilt_theta0 >= PI / 2.0 {
        return Err(Error::invalid("tilt_theta0", "must be < pi/2 for the echo geometry"));
    }
    Ok(Trajectory {
        path: Path::TiltedSpindle {
            theta0: cfg.tilt_theta0,
            omega: cfg.omega,
            start: cfg.start_angle,
        },
        duration: rotations as f64 * cfg.period(),
        closed: true,
        degenerate: cfg.tilt_theta0 == 0.0,
    })
}

/// Times in [0, n T) at which the NV axis is perpendicular to z, i.e.
/// cos(Omega t + start) = 0; two per rotation, ascending.
pub fn pi_pulse_times(cfg: &SpindleConfig, rotations: u32) -> Result<Vec<f64>> {
    cfg.validate()?;
    let end = rotations as f64 * cfg.period();
    // first k with (pi/2 + k pi - start) >= 0
    let k0 = ((cfg.start_angle - PI / 2.0) / PI).ceil();
    let mut times = Vec::with_capacity(2 * rotations as usize);
    let mut k = k0;
    loop {
        let t = (PI / 2.0 + k * PI - cfg.start_angle) / cfg.omega;
        if t >= end - 1e-12 * end.max(1.0) || times.len() >= 2 * rotations as usize {
            break;
        }
        if t >= 0.0 {
            times.push(t);
        }
        k += 1.0;
    }
    Ok(times)
}
