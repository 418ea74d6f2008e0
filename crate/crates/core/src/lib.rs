//! Geometric phase of a single NV spin in a mechanically rotating diamond.
//!
//! Layers, bottom up:
//! - [`physics`] / [`hamiltonian`]: spin-1 algebra and the NV ground-state
//!   Hamiltonians, in angular-frequency units with hbar = 1.
//! - [`eigenstructure`]: closed-form instantaneous eigenstates, the two gauges
//!   and geometric-phase line integrals.
//! - [`trajectories`]: the Ramsey and spin-echo spindle geometries.
//! - [`evolution`]: step-by-step propagation used as an independent oracle.
//! - [`protocols`]: Ramsey and echo pulse sequences with ideal pulses.
//! - [`measurement`]: fluorescence readout statistics and sensitivity.

pub mod eigenstructure;
pub mod error;
pub mod evolution;
pub mod hamiltonian;
pub mod measurement;
pub mod physics;
pub mod protocols;
pub mod quadrature;
pub mod trajectories;

pub use eigenstructure::{
    analytic_eigenstate, berry_connection, geometric_phase, geometric_phase_sampled, solid_angle, Gauge,
    MagneticNumber, PhaseResult,
};
pub use error::{Error, Result};
pub use evolution::{
    adiabaticity_margin, extract_geometric_phase, extract_rectified_phase, propagate, Method, OracleOptions,
    PhaseDecomposition, PropagationConfig,
};
pub use hamiltonian::{interaction_hamiltonian, zeeman_hamiltonian, zero_field_hamiltonian};
pub use measurement::{
    end_to_end_estimate, phase_uncertainty, relative_sensitivity, relative_uncertainty, sample_signal, steepest_retard,
    PhaseEstimate, ReadoutParams, SensitivityParams, SignalModel,
};
pub use physics::{spin1_operators, Basis, MagneticField, Orientation, PhysicalConstants, SpinOperator, SpinState};
pub use protocols::{
    apply_finite_pulse, apply_pulse, run_echo, run_ramsey, DecoherenceKind, DecoherenceModel, ProtocolOptions,
    ProtocolResult, PulseEvent, PulseKind, PulseMode, RabiDrive,
};
pub use trajectories::{echo_trajectory, pi_pulse_times, ramsey_trajectory, SpindleConfig, Trajectory};
