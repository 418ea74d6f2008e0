//! Spin-1 algebra, states and operators.
//!
//! Everything is stored in angular-frequency units with hbar = 1. Amplitudes
//! are ordered (m = +1, 0, -1) in whichever basis the value is tagged with.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::eigenstructure::{eigenbasis, Gauge};
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix3 = Matrix3<C64>;
pub type CVector3 = Vector3<C64>;

/// Norm tolerance every constructed or evolved state is held to.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Zero-field splitting D (rad/s).
    pub zero_field: f64,
    /// Landé g factor.
    pub g_factor: f64,
    /// Bohr magneton over hbar (rad s^-1 T^-1).
    pub bohr_over_hbar: f64,
}

impl PhysicalConstants {
    /// NV ground-state splitting of 2.88 GHz.
    pub const ZERO_FIELD_HZ: f64 = 2.88e9;
    /// mu_B / h in Hz/T (CODATA 2018).
    pub const BOHR_HZ_PER_TESLA: f64 = 1.399_624_493_61e10;

    pub fn new(zero_field: f64, g_factor: f64, bohr_over_hbar: f64) -> Result<Self> {
        if !(zero_field.is_finite() && zero_field > 0.0) {
            return Err(Error::invalid("zero_field", "must be finite and > 0"));
        }
        if !g_factor.is_finite() || !bohr_over_hbar.is_finite() {
            return Err(Error::invalid("g_factor", "must be finite"));
        }
        Ok(Self {
            zero_field,
            g_factor,
            bohr_over_hbar,
        })
    }

    /// Same g and mu_B but a different zero-field splitting, used for the
    /// scaled oracle runs.
    pub fn with_zero_field(self, zero_field: f64) -> Result<Self> {
        Self::new(zero_field, self.g_factor, self.bohr_over_hbar)
    }

    /// Gyromagnetic ratio g * mu_B / hbar (rad s^-1 T^-1).
    pub fn gyromagnetic(&self) -> f64 {
        self.g_factor * self.bohr_over_hbar
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            zero_field: 2.0 * PI * Self::ZERO_FIELD_HZ,
            g_factor: 2.0,
            bohr_over_hbar: 2.0 * PI * Self::BOHR_HZ_PER_TESLA,
        }
    }
}

/// Direction of the NV axis in the lab frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    theta: f64,
    phi: f64,
}

impl Orientation {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::invalid("phi", "must be finite"));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::invalid("theta", format!("{theta} is outside [0, pi]")));
        }
        Ok(Self { theta, phi })
    }

    /// Clamps theta into [0, pi]; for values produced by trajectory formulas
    /// that may overshoot by rounding.
    pub(crate) fn clamped(theta: f64, phi: f64) -> Self {
        Self {
            theta: theta.clamp(0.0, PI),
            phi,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Same direction with phi reduced to [0, 2pi).
    pub fn reduced(&self) -> Self {
        Self {
            theta: self.theta,
            phi: self.phi.rem_euclid(2.0 * PI),
        }
    }

    /// Unit vector (sin t cos p, sin t sin p, cos t).
    pub fn axis(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticField {
    vector: [f64; 3],
}

impl MagneticField {
    pub fn new(vector: [f64; 3]) -> Result<Self> {
        if vector.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("magnetic field", "components must be finite"));
        }
        Ok(Self { vector })
    }

    pub fn zero() -> Self {
        Self { vector: [0.0; 3] }
    }

    pub fn vector(&self) -> [f64; 3] {
        self.vector
    }
}

/// Which basis a state or operator is written in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Basis {
    /// Eigenbasis of the lab S_z.
    LabZ,
    /// Instantaneous NV eigenbasis at a given orientation, in a given gauge.
    NvPrime { orientation: Orientation, gauge: Gauge },
}

fn ensure_same(a: &Basis, b: &Basis) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::BasisMismatch(format!("{a:?} vs {b:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState {
    amplitudes: CVector3,
    basis: Basis,
}

impl SpinState {
    /// Normalizes the amplitudes; fails on a zero or non-finite vector.
    pub fn new(amplitudes: [C64; 3], basis: Basis) -> Result<Self> {
        let v = CVector3::from(amplitudes);
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::invalid("amplitudes", "must be finite and non-zero"));
        }
        Ok(Self {
            amplitudes: v.unscale(norm),
            basis,
        })
    }

    pub fn lab(amplitudes: [C64; 3]) -> Result<Self> {
        Self::new(amplitudes, Basis::LabZ)
    }

    /// Basis vector |m> (m = +1, 0, -1) of the given basis.
    pub fn basis_vector(m: i8, basis: Basis) -> Result<Self> {
        let idx = crate::eigenstructure::MagneticNumber::new(m)?.index();
        let mut a = [C64::new(0.0, 0.0); 3];
        a[idx] = C64::new(1.0, 0.0);
        Ok(Self {
            amplitudes: CVector3::from(a),
            basis,
        })
    }

    pub(crate) fn from_vector(amplitudes: CVector3, basis: Basis) -> Self {
        Self { amplitudes, basis }
    }

    pub fn amplitudes(&self) -> [C64; 3] {
        [self.amplitudes[0], self.amplitudes[1], self.amplitudes[2]]
    }

    pub fn vector(&self) -> &CVector3 {
        &self.amplitudes
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Populations |a_i|^2 in amplitude order.
    pub fn populations(&self) -> [f64; 3] {
        let a = self.amplitudes();
        [a[0].norm_sqr(), a[1].norm_sqr(), a[2].norm_sqr()]
    }

    /// <self|other>; both states must share a basis.
    pub fn inner(&self, other: &SpinState) -> Result<C64> {
        ensure_same(&self.basis, &other.basis)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Applies an operator without renormalizing.
    pub fn apply(&self, op: &SpinOperator) -> Result<SpinState> {
        ensure_same(&self.basis, &op.basis)?;
        Ok(Self {
            amplitudes: op.matrix * self.amplitudes,
            basis: self.basis,
        })
    }

    /// Re-expresses the state in the lab z-basis.
    pub fn to_lab(&self) -> SpinState {
        match self.basis {
            Basis::LabZ => *self,
            Basis::NvPrime { orientation, gauge } => Self {
                amplitudes: eigenbasis(orientation, gauge) * self.amplitudes,
                basis: Basis::LabZ,
            },
        }
    }

    /// Re-expresses the state in the NV eigenbasis at `orientation`.
    pub fn to_nv(&self, orientation: Orientation, gauge: Gauge) -> SpinState {
        let lab = self.to_lab();
        Self {
            amplitudes: eigenbasis(orientation, gauge).adjoint() * lab.amplitudes,
            basis: Basis::NvPrime { orientation, gauge },
        }
    }
}

/// A 3x3 complex operator tagged with its basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinOperator {
    matrix: CMatrix3,
    basis: Basis,
}

impl SpinOperator {
    pub fn new(matrix: CMatrix3, basis: Basis) -> Self {
        Self { matrix, basis }
    }

    pub fn lab(matrix: CMatrix3) -> Self {
        Self::new(matrix, Basis::LabZ)
    }

    pub fn zero(basis: Basis) -> Self {
        Self::new(CMatrix3::zeros(), basis)
    }

    pub fn identity(basis: Basis) -> Self {
        Self::new(CMatrix3::identity(), basis)
    }

    pub fn matrix(&self) -> &CMatrix3 {
        &self.matrix
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    /// max |H - H^dagger| over entries.
    pub fn hermiticity_error(&self) -> f64 {
        (self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, factor: f64) -> SpinOperator {
        Self::new(self.matrix * C64::new(factor, 0.0), self.basis)
    }

    pub fn add(&self, other: &SpinOperator) -> Result<SpinOperator> {
        ensure_same(&self.basis, &other.basis)?;
        Ok(Self::new(self.matrix + other.matrix, self.basis))
    }

    pub fn sub(&self, other: &SpinOperator) -> Result<SpinOperator> {
        ensure_same(&self.basis, &other.basis)?;
        Ok(Self::new(self.matrix - other.matrix, self.basis))
    }

    pub fn mul(&self, other: &SpinOperator) -> Result<SpinOperator> {
        ensure_same(&self.basis, &other.basis)?;
        Ok(Self::new(self.matrix * other.matrix, self.basis))
    }

    /// [self, other].
    pub fn commutator(&self, other: &SpinOperator) -> Result<SpinOperator> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Hermitian eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let mut ev: Vec<f64> = self.matrix.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2]]
    }
}

/// Spin-1 operators S_x, S_y, S_z in the lab z-basis (hbar = 1).
pub fn spin1_operators() -> (SpinOperator, SpinOperator, SpinOperator) {
    let z = C64::new(0.0, 0.0);
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let i = C64::new(0.0, FRAC_1_SQRT_2);
    let one = C64::new(1.0, 0.0);
    #[rustfmt::skip]
    let sx = CMatrix3::new(
        z, r, z,
        r, z, r,
        z, r, z,
    );
    #[rustfmt::skip]
    let sy = CMatrix3::new(
        z, -i, z,
        i, z, -i,
        z, i, z,
    );
    let sz = CMatrix3::from_diagonal(&CVector3::new(one, z, -one));
    (SpinOperator::lab(sx), SpinOperator::lab(sy), SpinOperator::lab(sz))
}

/// n . S for a lab-frame unit vector n.
pub fn spin_along(axis: [f64; 3]) -> SpinOperator {
    let (sx, sy, sz) = spin1_operators();
    SpinOperator::lab(
        sx.matrix * C64::new(axis[0], 0.0) + sy.matrix * C64::new(axis[1], 0.0) + sz.matrix * C64::new(axis[2], 0.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_dev(a: &CMatrix3, b: &CMatrix3) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn sz_is_diagonal() {
        let (_, _, sz) = spin1_operators();
        let expected = CMatrix3::from_diagonal(&CVector3::new(
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-1.0, 0.0),
        ));
        assert_eq!(*sz.matrix(), expected);
    }

    #[test]
    fn su2_commutator() {
        let (sx, sy, sz) = spin1_operators();
        let c = sx.commutator(&sy).unwrap();
        let isz = sz.matrix() * C64::new(0.0, 1.0);
        assert!(max_dev(c.matrix(), &isz) < 1e-15);
    }

    #[test]
    fn casimir_is_two() {
        let (sx, sy, sz) = spin1_operators();
        let s2 = sx.mul(&sx).unwrap().matrix() + sy.mul(&sy).unwrap().matrix() + sz.mul(&sz).unwrap().matrix();
        let two = CMatrix3::identity() * C64::new(2.0, 0.0);
        assert!(max_dev(&s2, &two) < 1e-15);
    }

    #[test]
    fn state_is_normalized_on_construction() {
        let s = SpinState::lab([C64::new(3.0, 0.0), C64::new(0.0, 4.0), C64::new(0.0, 0.0)]).unwrap();
        assert!((s.norm() - 1.0).abs() < NORM_TOLERANCE);
        assert!(SpinState::lab([C64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn mixing_bases_is_an_error() {
        let o = Orientation::new(0.3, 0.1).unwrap();
        let nv = Basis::NvPrime {
            orientation: o,
            gauge: Gauge::Raw,
        };
        let a = SpinState::basis_vector(1, Basis::LabZ).unwrap();
        let b = SpinState::basis_vector(1, nv).unwrap();
        assert!(matches!(a.inner(&b), Err(Error::BasisMismatch(_))));
        let (_, _, sz) = spin1_operators();
        assert!(b.apply(&sz).is_err());
        assert!(sz.add(&SpinOperator::zero(nv)).is_err());
    }

    #[test]
    fn basis_round_trip() {
        let o = Orientation::new(1.1, -0.7).unwrap();
        let psi = SpinState::lab([C64::new(0.2, 0.1), C64::new(-0.5, 0.3), C64::new(0.4, -0.6)]).unwrap();
        for gauge in [Gauge::Raw, Gauge::MicrowaveFixed] {
            let back = psi.to_nv(o, gauge).to_lab();
            assert!((back.vector() - psi.vector()).norm() < 1e-14);
        }
    }

    #[test]
    fn orientation_rejects_bad_theta() {
        assert!(Orientation::new(-0.1, 0.0).is_err());
        assert!(Orientation::new(PI + 1e-9, 0.0).is_err());
        assert!(Orientation::new(PI, 123.0).is_ok());
        let o = Orientation::new(0.5, -0.5).unwrap().reduced();
        assert!((o.phi() - (2.0 * PI - 0.5)).abs() < 1e-15);
    }
}
