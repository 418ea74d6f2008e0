//! Adaptive Gauss-Kronrod (7/15) quadrature and Romberg extrapolation for
//! sampled integrands.

use crate::error::{Error, Result};

// 15-point Kronrod abscissae (non-negative half) and weights; the embedded
// 7-point Gauss rule uses every other node.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over [a, b] to relative tolerance `rel_tol`, refining the
/// worst interval until the summed error estimate is small enough.
///
/// `abs_floor` is the absolute error below which the result is accepted even
/// if the integral itself is (close to) zero.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut segments = vec![kronrod(&mut f, a, b)];
    let mut evaluations = 15;
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::QuadratureFailure { tol: rel_tol, error });
        }
        if error <= (rel_tol * value.abs()).max(abs_floor) {
            return Ok(Estimate {
                value,
                error,
                evaluations,
            });
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureFailure { tol: rel_tol, error });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(Error::QuadratureFailure { tol: rel_tol, error });
        }
        segments.push(kronrod(&mut f, seg.a, mid));
        segments.push(kronrod(&mut f, mid, seg.b));
        evaluations += 30;
    }
}

/// Integrates over consecutive pieces [p_0, p_1], [p_1, p_2], ... with a
/// per-piece weight, so kinks at the breakpoints never land inside a panel.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    breakpoints: &[f64],
    weights: &[f64],
    rel_tol: f64,
    abs_floor: f64,
) -> Result<Estimate> {
    debug_assert_eq!(breakpoints.len(), weights.len() + 1);
    let mut total = Estimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    let pieces = weights.len().max(1) as f64;
    for (w, span) in weights.iter().zip(breakpoints.windows(2)) {
        let e = integrate(&mut f, span[0], span[1], rel_tol, abs_floor / pieces)?;
        total.value += w * e.value;
        total.error += w.abs() * e.error;
        total.evaluations += e.evaluations;
    }
    Ok(total)
}

/// Romberg table built from trapezoid sums on nested subsamplings of
/// `values` against `increments` (the Stieltjes measure between samples).
///
/// Requires 2^k + 1 samples. Returns the extrapolated value and the last
/// correction as an error estimate.
pub fn romberg_stieltjes(values: &[f64], positions: &[f64]) -> Result<Estimate> {
    let n = values.len();
    if n != positions.len() || n < 3 || !(n - 1).is_power_of_two() {
        return Err(Error::invalid("samples", "need 2^k + 1 equally spaced samples"));
    }
    let levels = (n - 1).trailing_zeros() as usize;
    let mut trapezoids = Vec::with_capacity(levels + 1);
    for level in 0..=levels {
        let stride = (n - 1) >> level;
        let mut sum = 0.0;
        let mut i = 0;
        while i + stride < n {
            sum += 0.5 * (values[i] + values[i + stride]) * (positions[i + stride] - positions[i]);
            i += stride;
        }
        trapezoids.push(sum);
    }
    let mut row = trapezoids;
    let mut correction = f64::INFINITY;
    let mut factor = 4.0;
    while row.len() > 1 {
        let next: Vec<f64> = row.windows(2).map(|w| w[1] + (w[1] - w[0]) / (factor - 1.0)).collect();
        correction = (next[next.len() - 1] - row[row.len() - 1]).abs();
        row = next;
        factor *= 4.0;
    }
    Ok(Estimate {
        value: row[0],
        error: correction,
        evaluations: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let e = integrate(|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, 1e-12, 0.0).unwrap();
        assert!((e.value - (8.0 - 2.0 + 4.0 - (-1.0 - 0.5 - 2.0))).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand_converges() {
        // Lorentzian with width 1e-3: arctan closed form
        let w = 1e-3;
        let e = integrate(|x| w / (x * x + w * w), -1.0, 1.0, 1e-10, 0.0).unwrap();
        let exact = 2.0 * (1.0 / w).atan();
        assert!((e.value - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn pieces_apply_weights() {
        let e = integrate_pieces(|x| x.cos(), &[0.0, PI / 2.0, PI], &[1.0, -1.0], 1e-12, 1e-14).unwrap();
        assert!((e.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_failure_on_nonintegrable() {
        let r = integrate(|x: f64| 1.0 / x.abs().sqrt().max(1e-300).powi(3), -1.0, 1.0, 1e-9, 0.0);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }

    #[test]
    fn romberg_on_samples() {
        let n = 65;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64 * PI).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let e = romberg_stieltjes(&ys, &xs).unwrap();
        assert!((e.value - 2.0).abs() < 1e-12);
        assert!(romberg_stieltjes(&ys[..10], &xs[..10]).is_err());
    }
}
