//! Fluorescence readout statistics and shot-noise sensitivity.
//!
//! The normalized signal S has mean equal to the m = 0 population and
//! variance 1/(2 C^2 N_r) after N_r repetitions. All sampling is driven by
//! an explicit seed.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::protocols::ProtocolResult;

/// Fewest trials accepted by [`end_to_end_estimate`].
pub const MIN_TRIALS: usize = 100;

/// How a single averaged signal is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SignalModel {
    /// S ~ Normal(population, 1/(2 C^2 N_r)).
    #[default]
    Gaussian,
    /// Per-shot projection onto m = 0 followed by Poisson photon counts;
    /// m = +1 is dimmer than m = 0 by the fraction `contrast`. The bright
    /// rate is set so that the variance at population 1/2 equals the
    /// Gaussian one.
    Poisson { contrast: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutParams {
    pub repetitions: u64,
    /// Readout efficiency factor C in (0, 1].
    pub efficiency: f64,
    pub model: SignalModel,
}

impl ReadoutParams {
    pub fn new(repetitions: u64, efficiency: f64) -> Result<Self> {
        let rp = Self {
            repetitions,
            efficiency,
            model: SignalModel::Gaussian,
        };
        rp.validate()?;
        Ok(rp)
    }

    pub fn with_model(mut self, model: SignalModel) -> Result<Self> {
        self.model = model;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be >= 1"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid(
                "efficiency",
                format!("{} is outside (0, 1]", self.efficiency),
            ));
        }
        if let SignalModel::Poisson { contrast } = self.model {
            if !(contrast > 0.0 && contrast <= 1.0) {
                return Err(Error::invalid("contrast", format!("{contrast} is outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// 1/(2 C^2 N_r).
    pub fn signal_variance(&self) -> f64 {
        1.0 / (2.0 * self.efficiency.powi(2) * self.repetitions as f64)
    }

    /// Standard deviation of S.
    pub fn signal_std(&self) -> f64 {
        self.signal_variance().sqrt()
    }

    /// Mean photons per shot from m = 0 in the Poisson model.
    pub fn bright_rate(&self, contrast: f64) -> f64 {
        let c2 = self.efficiency.powi(2);
        2.0 * c2 * (2.0 - contrast) / (contrast * contrast * (2.0 - c2))
    }
}

fn draw<R: Rng>(population: f64, rp: &ReadoutParams, rng: &mut R) -> Result<f64> {
    match rp.model {
        SignalModel::Gaussian => {
            let normal =
                Normal::new(population, rp.signal_std()).map_err(|e| Error::invalid("signal", e.to_string()))?;
            Ok(normal.sample(rng))
        }
        SignalModel::Poisson { contrast } => {
            let n = rp.repetitions;
            let bright = rp.bright_rate(contrast);
            let dim = bright * (1.0 - contrast);
            let k = Binomial::new(n, population)
                .map_err(|e| Error::invalid("population", e.to_string()))?
                .sample(rng);
            let mean = k as f64 * bright + (n - k) as f64 * dim;
            let counts = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| Error::invalid("photon rate", e.to_string()))?
                    .sample(rng)
            } else {
                0.0
            };
            Ok((counts / n as f64 - dim) / (bright - dim))
        }
    }
}

/// One averaged readout of a state with m = 0 population `population`.
pub fn sample_signal(population: f64, rp: &ReadoutParams, seed: u64) -> Result<f64> {
    rp.validate()?;
    if !(0.0..=1.0).contains(&population) {
        return Err(Error::invalid("population", format!("{population} is outside [0, 1]")));
    }
    draw(population, rp, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Phase error implied by a signal error at the steepest point of the
/// fringe, where |dS/dPhi| = 1/2.
pub fn phase_uncertainty(delta_s: f64) -> Result<f64> {
    if !(delta_s >= 0.0 && delta_s.is_finite()) {
        return Err(Error::invalid("delta_s", "must be finite and >= 0"));
    }
    Ok(2.0 * delta_s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityParams {
    /// Single-measurement time T_M (s).
    pub measurement_time: f64,
    /// Total averaging time T_T (s).
    pub total_time: f64,
    /// T_M / T2.
    pub a: f64,
    /// Spindle angular speed (rad/s).
    pub omega: f64,
    /// T2 or T2* (s).
    pub coherence_time: f64,
    /// Readout efficiency factor C.
    pub efficiency: f64,
}

impl SensitivityParams {
    /// Sets T_M = a T2.
    pub fn new(a: f64, omega: f64, coherence_time: f64, efficiency: f64, total_time: f64) -> Result<Self> {
        let sp = Self {
            measurement_time: a * coherence_time,
            total_time,
            a,
            omega,
            coherence_time,
            efficiency,
        };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("measurement_time", self.measurement_time),
            ("total_time", self.total_time),
            ("omega", self.omega),
            ("coherence_time", self.coherence_time),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, "must be finite and > 0"));
            }
        }
        if !(self.a >= 1.0 && self.a.is_finite()) {
            return Err(Error::invalid("a", format!("{} is below 1", self.a)));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid(
                "efficiency",
                format!("{} is outside (0, 1]", self.efficiency),
            ));
        }
        let implied = self.measurement_time / self.coherence_time;
        if (implied - self.a).abs() > 1e-9 * self.a {
            return Err(Error::invalid(
                "a",
                format!("T_M / T2 = {implied} disagrees with a = {}", self.a),
            ));
        }
        Ok(())
    }
}

/// Relative phase uncertainty per root hertz, 2 pi sqrt(2a) / (C Omega sqrt T2).
pub fn relative_sensitivity(sp: &SensitivityParams) -> Result<f64> {
    sp.validate()?;
    Ok(TAU * (2.0 * sp.a).sqrt() / (sp.efficiency * sp.omega * sp.coherence_time.sqrt()))
}

/// Relative phase uncertainty after averaging for T_T,
/// 2 pi sqrt(2 T_M) / (C Omega T2 sqrt T_T).
pub fn relative_uncertainty(sp: &SensitivityParams) -> Result<f64> {
    sp.validate()?;
    Ok(
        TAU * (2.0 * sp.measurement_time).sqrt()
            / (sp.efficiency * sp.omega * sp.coherence_time * sp.total_time.sqrt()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimate {
    pub mean: f64,
    /// Sample standard deviation of the per-trial estimates.
    pub std: f64,
    /// 2 Delta S / coherence, the linearized prediction for `std`.
    pub predicted_std: f64,
    pub trials: usize,
}

/// Reads out each protocol result once and inverts the fringe linearly
/// about its operating point.
///
/// A result run with phase retard r is taken to sit at the steepest point
/// for the phase -r - pi/2, so S = 1/2 + (c/2) sin(Phi + r + pi/2) is
/// inverted as Phi = -r - pi/2 + 2 (S - 1/2) / c.
pub fn end_to_end_estimate(results: &[ProtocolResult], rp: &ReadoutParams, seed: u64) -> Result<PhaseEstimate> {
    rp.validate()?;
    if results.len() < MIN_TRIALS {
        return Err(Error::invalid(
            "trials",
            format!("{} given, at least {MIN_TRIALS} needed", results.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimates = Vec::with_capacity(results.len());
    let mut coherence = 0.0;
    for r in results {
        if r.coherence_factor.is_nan() || r.coherence_factor <= 0.0 {
            return Err(Error::invalid("coherence_factor", "must be > 0 to invert the fringe"));
        }
        let s = draw(r.population_m0.clamp(0.0, 1.0), rp, &mut rng)?;
        estimates.push(-r.retard - PI / 2.0 + 2.0 * (s - 0.5) / r.coherence_factor);
        coherence += r.coherence_factor;
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(PhaseEstimate {
        mean,
        std: var.sqrt(),
        predicted_std: phase_uncertainty(rp.signal_std())? / (coherence / n),
        trials: estimates.len(),
    })
}

/// Retard that puts a sequence with expected phase `predicted` at the
/// steepest point of its fringe.
pub fn steepest_retard(predicted: f64) -> f64 {
    -predicted - PI / 2.0
}
