//! Brute-force Schrödinger propagation and numerical extraction of the
//! geometric phase.
//!
//! The extraction routines never look at the Berry connection: they start in
//! an analytic eigenstate, integrate i d psi/dt = H(t) psi step by step and
//! compare the result with the reference eigenstate at the final
//! orientation. The dynamic phase -E_m t is removed analytically before the
//! overlap phase is unwrapped.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::SymmetricEigen;

use crate::eigenstructure::{analytic_eigenstate, eigenbasis, Gauge, MagneticNumber};
use crate::error::{Error, Result};
use crate::physics::{spin_along, Basis, CMatrix3, CVector3, PhysicalConstants, SpinOperator, SpinState, C64};
use crate::trajectories::Trajectory;

/// Runs with a smaller adiabaticity margin are refused.
pub const MIN_ADIABATICITY_MARGIN: f64 = 10.0;
/// Reported margin when the path does not move the axis at all.
pub const MARGIN_CAP: f64 = 1e300;
/// Minimum number of overlap checkpoints per 2pi of axis motion.
pub const CHECKPOINTS_PER_TURN: usize = 64;

const HERMITIAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// exp(-i H(t + dt/2) dt) per step, exact for the frozen Hamiltonian.
    PiecewiseExponential,
    /// Classical fourth-order Runge-Kutta.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    /// Requested step (s); the actual step divides each interval evenly.
    pub dt: f64,
    pub method: Method,
    /// Allowed drift of the state norm.
    pub tol: f64,
}

impl PropagationConfig {
    pub fn new(dt: f64, method: Method, tol: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", "must be finite and > 0"));
        }
        if !(tol > 0.0 && tol <= 1e-3) {
            return Err(Error::invalid("tol", "must lie in (0, 1e-3]"));
        }
        Ok(Self { dt, method, tol })
    }

    pub fn exponential(dt: f64) -> Result<Self> {
        Self::new(dt, Method::PiecewiseExponential, 1e-8)
    }
}

/// exp(-i x) - 1 without cancellation for small x.
fn phase_minus_one(x: f64) -> C64 {
    let s = (0.5 * x).sin();
    C64::new(-2.0 * s * s, -x.sin())
}

/// exp(-i H dt) = exp(-i shift dt) (I + K) with shift the eigenvalue closest
/// to zero.
/// Keeping K small (rather than forming U) avoids a systematic norm drift
/// of a few ulp per step.
fn step_parts(h: &CMatrix3, dt: f64) -> (CMatrix3, f64) {
    let eig = SymmetricEigen::new(*h);
    let shift = eig
        .eigenvalues
        .iter()
        .copied()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    let v = orthonormalized(eig.eigenvectors);
    let d = eig.eigenvalues.map(|e| phase_minus_one((e - shift) * dt));
    (v * CMatrix3::from_diagonal(&d) * v.adjoint(), shift)
}

/// exp(-i H dt) for Hermitian H.
pub fn unitary_step(h: &CMatrix3, dt: f64) -> CMatrix3 {
    let (k, shift) = step_parts(h, dt);
    (CMatrix3::identity() + k) * C64::from_polar(1.0, -shift * dt)
}

/// Gram-Schmidt with one re-orthogonalization pass.
fn orthonormalized(mut v: CMatrix3) -> CMatrix3 {
    for j in 0..3 {
        for _ in 0..2 {
            for k in 0..j {
                let proj = v.column(k).dotc(&v.column(j));
                let ck = v.column(k).into_owned();
                v.column_mut(j).axpy(-proj, &ck, C64::from(1.0));
            }
        }
        let n = v.column(j).norm();
        v.column_mut(j).unscale_mut(n);
    }
    v
}

fn check_hermitian(h: &SpinOperator) -> Result<()> {
    let deviation = h.hermiticity_error();
    if deviation > HERMITIAN_TOLERANCE * h.max_abs().max(1.0) {
        return Err(Error::NonHermitian { deviation });
    }
    Ok(())
}

fn derivative(h: &CMatrix3, psi: &CVector3) -> CVector3 {
    (h * psi) * C64::new(0.0, -1.0)
}

/// Closed-form exp(-i H dt) - I for the frozen step, when one is known.
type ExactStep<'a> = &'a dyn Fn(f64, f64) -> CMatrix3;

/// Steps a lab-basis vector from t0 to t1 under H(t).
fn advance<H>(
    h: &H,
    exact: Option<ExactStep>,
    psi: &mut CVector3,
    t0: f64,
    t1: f64,
    cfg: &PropagationConfig,
) -> Result<()>
where
    H: Fn(f64) -> SpinOperator,
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(());
    }
    let steps = (span / cfg.dt).ceil().max(1.0) as usize;
    let dt = span / steps as f64;
    // phase of the eigenvalue shifts, applied once at the end
    let mut global = 0.0;
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        match cfg.method {
            Method::PiecewiseExponential => {
                let tm = t + 0.5 * dt;
                let (k, shift) = match exact {
                    Some(step) => (step(tm, dt), 0.0),
                    None => {
                        let hm = h(tm);
                        check_hermitian(&hm)?;
                        step_parts(hm.matrix(), dt)
                    }
                };
                global += shift * dt;
                *psi += k * *psi;
            }
            Method::Rk4 => {
                let h0 = h(t);
                let hm = h(t + 0.5 * dt);
                let h1 = h(t + dt);
                for op in [&h0, &hm, &h1] {
                    check_hermitian(op)?;
                }
                let dtc = C64::from(dt);
                let k1 = derivative(h0.matrix(), psi);
                let k2 = derivative(hm.matrix(), &(*psi + k1 * (dtc * 0.5)));
                let k3 = derivative(hm.matrix(), &(*psi + k2 * (dtc * 0.5)));
                let k4 = derivative(h1.matrix(), &(*psi + k3 * dtc));
                let two = C64::from(2.0);
                *psi += (k1 + k2 * two + k3 * two + k4) * (dtc / 6.0);
            }
        }
    }
    if global != 0.0 {
        *psi *= C64::from_polar(1.0, -global);
    }
    let drift = (psi.norm() - 1.0).abs();
    if drift > cfg.tol {
        return Err(Error::NormDrift { drift });
    }
    Ok(())
}

/// Integrates i d psi/dt = H(t) psi from t0 to t1.
///
/// H(t) must return lab-basis operators; the initial state is converted to
/// the lab basis first and the result is returned there.
pub fn propagate<H>(h: H, psi0: &SpinState, t0: f64, t1: f64, cfg: &PropagationConfig) -> Result<SpinState>
where
    H: Fn(f64) -> SpinOperator,
{
    let drift = (psi0.norm() - 1.0).abs();
    if drift > 1e-10 {
        return Err(Error::NormDrift { drift });
    }
    if t1 < t0 {
        return Err(Error::invalid("t1", "must be >= t0"));
    }
    let probe = h(t0);
    if probe.basis() != Basis::LabZ {
        return Err(Error::BasisMismatch(
            "propagation Hamiltonian must be in the lab basis".into(),
        ));
    }
    let mut psi = *psi0.to_lab().vector();
    advance(&h, None, &mut psi, t0, t1, cfg)?;
    Ok(SpinState::from_vector(psi, Basis::LabZ))
}

/// 2 D^2 / max_t (theta'^2 + sin^2 theta phi'^2). Larger is more adiabatic.
pub fn adiabaticity_margin(traj: &Trajectory, c: &PhysicalConstants) -> f64 {
    let speed2 = traj
        .sample_times(4097)
        .into_iter()
        .map(|t| {
            let s = traj.theta(t).sin();
            traj.dtheta_dt(t).powi(2) + (s * traj.dphi_dt(t)).powi(2)
        })
        .fold(0.0, f64::max);
    if speed2 == 0.0 {
        return MARGIN_CAP;
    }
    (2.0 * c.zero_field * c.zero_field / speed2).min(MARGIN_CAP)
}

/// Phase split of a numerically propagated eigenstate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDecomposition {
    /// Unwrapped total phase relative to the reference eigenstate.
    pub total: f64,
    /// Dynamic part, -E_m t with the bare eigenvalue.
    pub dynamic: f64,
    /// total - dynamic.
    pub geometric: f64,
}

/// Knobs for the oracle runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub propagation: PropagationConfig,
    /// Co-rotating splitting omega_s S_z' (rad/s), 0 for the bare H0.
    pub splitting: f64,
    /// Gauge of the reference eigenstates.
    pub gauge: Gauge,
}

impl OracleOptions {
    /// Step chosen so that D dt is small enough for a sub-1e-4 phase error
    /// over one turn at the scaled ratios used by the tests.
    pub fn for_constants(c: &PhysicalConstants, gauge: Gauge) -> Self {
        Self {
            propagation: PropagationConfig {
                dt: 0.01 / c.zero_field,
                method: Method::PiecewiseExponential,
                tol: 1e-8,
            },
            splitting: 0.0,
            gauge,
        }
    }
}

fn checkpoint_times(traj: &Trajectory, extra: &[f64]) -> Vec<f64> {
    let arc = traj.arc_length(4097) + (traj.phi(traj.duration()) - traj.phi(0.0)).abs();
    let n = ((CHECKPOINTS_PER_TURN as f64 * arc / TAU).ceil() as usize).max(CHECKPOINTS_PER_TURN);
    let mut times: Vec<f64> = traj.sample_times(n + 1);
    times.extend(extra.iter().copied().filter(|&t| t > 0.0 && t < traj.duration()));
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * traj.duration());
    times
}

fn oracle_hamiltonian<'a>(
    traj: &'a Trajectory,
    c: &'a PhysicalConstants,
    splitting: f64,
) -> impl Fn(f64) -> SpinOperator + 'a {
    let d = C64::from(c.zero_field);
    let s = C64::from(splitting);
    move |t| {
        let ns = spin_along(traj.axis(t));
        let n = ns.matrix();
        SpinOperator::lab(n * n * d + n * s)
    }
}

/// exp(-i (D N^2 + w N) dt) - I for N = n.S, from the spectral projectors
/// (N^2 +- N)/2 (N^3 = N for spin 1).
fn oracle_step<'a>(
    traj: &'a Trajectory,
    c: &'a PhysicalConstants,
    splitting: f64,
) -> impl Fn(f64, f64) -> CMatrix3 + 'a {
    let d = c.zero_field;
    move |t, dt| {
        let n = *spin_along(traj.axis(t)).matrix();
        let n2 = n * n;
        let half = C64::from(0.5);
        let up = phase_minus_one((d + splitting) * dt);
        let down = phase_minus_one((d - splitting) * dt);
        (n2 + n) * (half * up) + (n2 - n) * (half * down)
    }
}

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

struct Unwrapper {
    value: f64,
}

impl Unwrapper {
    fn push(&mut self, raw: f64, time: f64) -> Result<()> {
        let step = wrap(raw - self.value);
        if step.abs() > PI / 2.0 {
            return Err(Error::PhaseUnwrapFailure {
                time,
                reason: format!("phase jumped by {step:.3} rad between checkpoints"),
            });
        }
        self.value += step;
        Ok(())
    }
}

/// Propagates the m-th eigenstate along `traj` under D (n(t).S)^2 (plus the
/// optional co-rotating splitting) and reads off its geometric phase.
pub fn extract_geometric_phase(
    traj: &Trajectory,
    m: MagneticNumber,
    opts: &OracleOptions,
    c: &PhysicalConstants,
) -> Result<PhaseDecomposition> {
    let margin = adiabaticity_margin(traj, c);
    if margin < MIN_ADIABATICITY_MARGIN {
        return Err(Error::NotAdiabatic {
            margin,
            required: MIN_ADIABATICITY_MARGIN,
        });
    }
    let energy = c.zero_field * m.as_f64().powi(2) + opts.splitting * m.as_f64();
    let h = oracle_hamiltonian(traj, c, opts.splitting);
    let step = oracle_step(traj, c, opts.splitting);
    let mut psi = *analytic_eigenstate(m, traj.orientation(0.0), opts.gauge).vector();
    let mut phase = Unwrapper { value: 0.0 };
    let times = checkpoint_times(traj, &[]);
    for w in times.windows(2) {
        advance(&h, Some(&step), &mut psi, w[0], w[1], &opts.propagation)?;
        let reference = analytic_eigenstate(m, traj.orientation(w[1]), opts.gauge);
        let overlap = reference.vector().dotc(&psi) * C64::from_polar(1.0, energy * w[1]);
        if overlap.norm() < 0.5 {
            return Err(Error::PhaseUnwrapFailure {
                time: w[1],
                reason: format!(
                    "overlap with the instantaneous eigenstate fell to {:.3}",
                    overlap.norm()
                ),
            });
        }
        phase.push(overlap.arg(), w[1])?;
    }
    let dynamic = -energy * traj.duration();
    Ok(PhaseDecomposition {
        total: phase.value + dynamic,
        dynamic,
        geometric: phase.value,
    })
}

/// Numerical counterpart of the rectified phase: propagates
/// (|0> + |+1>)/sqrt 2 in the microwave-fixed basis, applies ideal pi pulses
/// (|0> <-> |+1>) at `pulses`, and returns the phase of the branch that
/// started in |+1> relative to the branch that started in |0>.
pub fn extract_rectified_phase(
    traj: &Trajectory,
    pulses: &[f64],
    opts: &OracleOptions,
    c: &PhysicalConstants,
) -> Result<PhaseDecomposition> {
    let margin = adiabaticity_margin(traj, c);
    if margin < MIN_ADIABATICITY_MARGIN {
        return Err(Error::NotAdiabatic {
            margin,
            required: MIN_ADIABATICITY_MARGIN,
        });
    }
    let gauge = Gauge::MicrowaveFixed;
    let upper = c.zero_field + opts.splitting;
    let h = oracle_hamiltonian(traj, c, opts.splitting);
    let step = oracle_step(traj, c, opts.splitting);
    let mut pulse_times: Vec<f64> = pulses
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < traj.duration())
        .collect();
    pulse_times.sort_by(f64::total_cmp);

    let v0 = eigenbasis(traj.orientation(0.0), gauge);
    let mut psi = v0 * CVector3::new(C64::from(FRAC_1_SQRT_2), C64::from(FRAC_1_SQRT_2), C64::from(0.0));
    let mut phase = Unwrapper { value: 0.0 };
    let mut flips = 0usize;
    // time each branch has spent in |+1>
    let (mut in_upper_a, mut in_upper_b) = (0.0, 0.0);
    let mut next_pulse = pulse_times.iter().peekable();

    let times = checkpoint_times(traj, &pulse_times);
    for w in times.windows(2) {
        advance(&h, Some(&step), &mut psi, w[0], w[1], &opts.propagation)?;
        if flips.is_multiple_of(2) {
            in_upper_a += w[1] - w[0];
        } else {
            in_upper_b += w[1] - w[0];
        }
        let v = eigenbasis(traj.orientation(w[1]), gauge);
        let coeffs = v.adjoint() * psi;
        let (a, b) = if flips.is_multiple_of(2) {
            (coeffs[0], coeffs[1])
        } else {
            (coeffs[1], coeffs[0])
        };
        let dynamic = -upper * (in_upper_a - in_upper_b);
        let ratio = a * b.conj() * C64::from_polar(1.0, -dynamic);
        if ratio.norm() < 0.25 {
            return Err(Error::PhaseUnwrapFailure {
                time: w[1],
                reason: format!("branch coherence fell to {:.3}", 2.0 * ratio.norm()),
            });
        }
        phase.push(ratio.arg(), w[1])?;

        if next_pulse
            .peek()
            .is_some_and(|&&tp| (tp - w[1]).abs() <= 1e-15 * traj.duration())
        {
            next_pulse.next();
            let minus_i = C64::new(0.0, -1.0);
            let swapped = CVector3::new(coeffs[1] * minus_i, coeffs[0] * minus_i, coeffs[2]);
            psi = v * swapped;
            flips += 1;
        }
    }
    let dynamic = -upper * (in_upper_a - in_upper_b);
    Ok(PhaseDecomposition {
        total: phase.value + dynamic,
        dynamic,
        geometric: phase.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenstructure::geometric_phase;
    use crate::hamiltonian::zero_field_hamiltonian;
    use crate::physics::Orientation;
    use crate::trajectories::{ramsey_trajectory, SpindleConfig};

    fn scaled(ratio: f64) -> (PhysicalConstants, SpindleConfig) {
        let c = PhysicalConstants::default().with_zero_field(ratio).unwrap();
        (c, SpindleConfig::ramsey(1.0, PI / 2.0).unwrap())
    }

    #[test]
    fn config_validation() {
        assert!(PropagationConfig::new(0.0, Method::Rk4, 1e-8).is_err());
        assert!(PropagationConfig::new(1e-3, Method::Rk4, 1e-2).is_err());
        assert!(PropagationConfig::new(1e-3, Method::Rk4, 1e-3).is_ok());
    }

    #[test]
    fn stationary_m0_state() {
        let c = PhysicalConstants::default().with_zero_field(1.0).unwrap();
        let o = Orientation::new(0.0, 0.0).unwrap();
        let h = zero_field_hamiltonian(o, &c);
        let psi0 = SpinState::basis_vector(0, Basis::LabZ).unwrap();
        for method in [Method::PiecewiseExponential, Method::Rk4] {
            let cfg = PropagationConfig::new(1e-2, method, 1e-8).unwrap();
            let out = propagate(|_| h, &psi0, 0.0, 7.3, &cfg).unwrap();
            assert!((out.vector() - psi0.vector()).norm() < 1e-14);
        }
    }

    #[test]
    fn constant_hamiltonian_dynamic_phase() {
        let c = PhysicalConstants::default().with_zero_field(2.0).unwrap();
        let o = Orientation::new(0.7, 0.3).unwrap();
        let h = zero_field_hamiltonian(o, &c);
        let psi0 = analytic_eigenstate(MagneticNumber::PLUS, o, Gauge::Raw);
        let t = 3.1;
        for (method, tol) in [(Method::PiecewiseExponential, 1e-12), (Method::Rk4, 1e-8)] {
            let cfg = PropagationConfig::new(1e-3, method, 1e-8).unwrap();
            let out = propagate(|_| h, &psi0, 0.0, t, &cfg).unwrap();
            let phase = psi0.inner(&out).unwrap().arg();
            assert!((wrap(phase + 2.0 * t)).abs() < tol, "{method:?}");
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix3::zeros();
        m[(0, 1)] = C64::new(1.0, 0.0);
        let psi0 = SpinState::basis_vector(1, Basis::LabZ).unwrap();
        let cfg = PropagationConfig::exponential(0.1).unwrap();
        let r = propagate(|_| SpinOperator::lab(m), &psi0, 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn rk4_norm_drift_is_reported() {
        let c = PhysicalConstants::default().with_zero_field(1.0).unwrap();
        let h = zero_field_hamiltonian(Orientation::new(1.0, 0.0).unwrap(), &c);
        let psi0 = SpinState::basis_vector(1, Basis::LabZ).unwrap();
        let cfg = PropagationConfig::new(0.5, Method::Rk4, 1e-8).unwrap();
        let r = propagate(|_| h, &psi0, 0.0, 100.0, &cfg);
        assert!(matches!(r, Err(Error::NormDrift { .. })));
    }

    #[test]
    fn adiabatic_following_one_turn() {
        let (c, cfg) = scaled(100.0);
        let tr = ramsey_trajectory(&cfg, TAU).unwrap();
        let h = oracle_hamiltonian(&tr, &c, 0.0);
        let psi0 = analytic_eigenstate(MagneticNumber::PLUS, tr.orientation(0.0), Gauge::Raw);
        let pc = PropagationConfig::exponential(0.01 / c.zero_field).unwrap();
        let out = propagate(h, &psi0, 0.0, tr.duration(), &pc).unwrap();
        let reference = analytic_eigenstate(MagneticNumber::PLUS, tr.orientation(tr.duration()), Gauge::Raw);
        assert!(reference.inner(&out).unwrap().norm() > 1.0 - 1e-3);
    }

    #[test]
    fn margin_values() {
        let c = PhysicalConstants::default();
        let omega = 4000.0 * PI;
        let tr = ramsey_trajectory(&SpindleConfig::ramsey(omega, PI / 2.0).unwrap(), 1.0).unwrap();
        let expected = 2.0 * c.zero_field.powi(2) / omega.powi(2);
        let margin = adiabaticity_margin(&tr, &c);
        assert!((margin / expected - 1.0).abs() < 1e-12);
        assert!((margin / 4.1e12 - 1.0).abs() < 0.02);

        let tr2 = ramsey_trajectory(&SpindleConfig::ramsey(2.0 * omega, PI / 2.0).unwrap(), 1.0).unwrap();
        assert!((adiabaticity_margin(&tr2, &c) * 4.0 / margin - 1.0).abs() < 1e-12);

        let polar = ramsey_trajectory(&SpindleConfig::ramsey(omega, 0.0).unwrap(), 1.0).unwrap();
        assert_eq!(adiabaticity_margin(&polar, &c), MARGIN_CAP);
    }

    #[test]
    fn m0_gets_no_geometric_phase_and_m1_loop_matches() {
        let (c, _) = scaled(1000.0);
        let cfg = SpindleConfig::ramsey(1.0, PI / 3.0).unwrap();
        let tr = ramsey_trajectory(&cfg, TAU).unwrap();
        let opts = OracleOptions::for_constants(&c, Gauge::Raw);
        let p0 = extract_geometric_phase(&tr, MagneticNumber::ZERO, &opts, &c).unwrap();
        // m = 0 carries no Berry phase; the residue is the O(Omega/D)
        // non-adiabatic shift
        assert!(p0.geometric.abs() < 1e-2);
        let p1 = extract_geometric_phase(&tr, MagneticNumber::PLUS, &opts, &c).unwrap();
        let analytic = geometric_phase(&tr, MagneticNumber::PLUS, Gauge::Raw, None)
            .unwrap()
            .geometric;
        assert!((p1.geometric - analytic).abs() < 5e-3, "{} vs {analytic}", p1.geometric);
        assert!((p1.total - p1.dynamic - p1.geometric).abs() < 1e-9);
    }

    #[test]
    fn refuses_fast_rotation() {
        let c = PhysicalConstants::default().with_zero_field(1.0).unwrap();
        let tr = ramsey_trajectory(&SpindleConfig::ramsey(1.0, PI / 2.0).unwrap(), 1.0).unwrap();
        let opts = OracleOptions::for_constants(&c, Gauge::Raw);
        let r = extract_geometric_phase(&tr, MagneticNumber::PLUS, &opts, &c);
        assert!(matches!(r, Err(Error::NotAdiabatic { .. })));
    }
}
