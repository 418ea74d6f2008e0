//! Ground-state Hamiltonians of the NV center.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::eigenstructure::Gauge;
use crate::error::{Error, Result};
use crate::physics::{
    spin1_operators, spin_along, Basis, CMatrix3, MagneticField, Orientation, PhysicalConstants, SpinOperator, C64,
};

/// Largest drive-to-carrier ratio accepted by the weak-field form of the
/// microwave interaction.
pub const WEAK_DRIVE_LIMIT: f64 = 0.1;

/// D (n.S)^2 in the lab z-basis.
pub fn zero_field_hamiltonian(o: Orientation, c: &PhysicalConstants) -> SpinOperator {
    let ns = spin_along(o.axis());
    let sq = ns.matrix() * ns.matrix();
    SpinOperator::lab(sq * C64::new(c.zero_field, 0.0))
}

/// g mu_B / hbar (B . S) in the lab z-basis.
pub fn zeeman_hamiltonian(b: MagneticField, c: &PhysicalConstants) -> SpinOperator {
    let (sx, sy, sz) = spin1_operators();
    let [bx, by, bz] = b.vector();
    let gamma = c.gyromagnetic();
    SpinOperator::lab(
        (sx.matrix() * C64::new(bx, 0.0) + sy.matrix() * C64::new(by, 0.0) + sz.matrix() * C64::new(bz, 0.0))
            * C64::new(gamma, 0.0),
    )
}

/// Static splitting term omega_s S_z' from a field co-rotating with the NV
/// axis; `splitting` is gamma * |B| in rad/s.
pub fn splitting_hamiltonian(o: Orientation, splitting: f64) -> SpinOperator {
    spin_along(o.axis()).scale(splitting)
}

/// Matrix elements <psi_j|S_z|psi_k> between the raw-gauge NV eigenstates.
///
/// Diagonal (cos t, 0, -cos t); the off-diagonal neighbours carry
/// -sin t / sqrt 2 with phase e^{-i phi} above the diagonal.
pub fn lab_sz_in_nv_basis(o: Orientation) -> CMatrix3 {
    let (st, ct) = o.theta().sin_cos();
    let w = C64::from_polar(-st * FRAC_1_SQRT_2, -o.phi());
    let z = C64::new(0.0, 0.0);
    let d = C64::new(ct, 0.0);
    #[rustfmt::skip]
    let m = CMatrix3::new(
        d, w, z,
        w.conj(), z, w,
        z, w.conj(), -d,
    );
    m
}

/// Interaction with a linearly polarized microwave field B_R cos(omega t)
/// along the lab z axis, written in the raw-gauge NV basis at `o`.
///
/// With `approximate` the S_z' diagonal is dropped, which is only accepted
/// when gamma B_R / omega < [`WEAK_DRIVE_LIMIT`].
pub fn interaction_hamiltonian(
    b_r: f64,
    omega: f64,
    t: f64,
    o: Orientation,
    c: &PhysicalConstants,
    approximate: bool,
) -> Result<SpinOperator> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::invalid("omega", "must be finite and > 0"));
    }
    let amplitude = c.gyromagnetic() * b_r;
    if approximate {
        let ratio = amplitude.abs() / omega;
        if ratio >= WEAK_DRIVE_LIMIT {
            return Err(Error::ApproximationInvalid { ratio });
        }
    }
    let mut m = lab_sz_in_nv_basis(o);
    if approximate {
        for k in 0..3 {
            m[(k, k)] = C64::new(0.0, 0.0);
        }
    }
    let basis = Basis::NvPrime {
        orientation: o,
        gauge: Gauge::Raw,
    };
    Ok(SpinOperator::new(
        m * C64::new(amplitude * (omega * t).cos(), 0.0),
        basis,
    ))
}
