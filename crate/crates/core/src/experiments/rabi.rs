//! Effective Rabi frequency from a sampled population curve.
//!
//! The model `P(t) = A sin^2(W t / 2 + phi) + C` is linear in
//! `(a0, a1, b1)` once `W` is fixed:
//! `P = a0 + a1 cos(W t) + b1 sin(W t)`. So `W` is seeded from the
//! periodogram peak and then refined by minimizing the projected residual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::DotPair;
use crate::propagator::Trajectory;

/// Periodogram grid spacing is `2 pi / (OVERSAMPLE * span)`.
const OVERSAMPLE: f64 = 8.0;
/// Peak power must exceed the mean periodogram power by this factor.
const NOISE_FLOOR_RATIO: f64 = 20.0;
/// Population variance below which the curve counts as constant.
const FLAT_VARIANCE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    /// Angular frequency `W` of the population oscillation.
    pub frequency: f64,
    /// Peak-to-trough amplitude `A`, clipped to `[0, 1]`.
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// Root-mean-square deviation of the fit.
    pub residual: f64,
    pub channel: DotPair,
    pub samples: usize,
}

/// Least-squares `(a0, a1, b1)` and the residual sum of squares at `w`.
fn project(t: &[f64], p: &[f64], w: f64) -> ([f64; 3], f64) {
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (&ti, &pi) in t.iter().zip(p) {
        let (s, c) = (w * ti).sin_cos();
        let basis = [1.0, c, s];
        for r in 0..3 {
            rhs[r] += basis[r] * pi;
            for k in 0..3 {
                m[r][k] += basis[r] * basis[k];
            }
        }
    }
    let coef = solve3(m, rhs).unwrap_or([p.iter().sum::<f64>() / p.len() as f64, 0.0, 0.0]);
    let rss = t
        .iter()
        .zip(p)
        .map(|(&ti, &pi)| {
            let (s, c) = (w * ti).sin_cos();
            let r = pi - coef[0] - coef[1] * c - coef[2] * s;
            r * r
        })
        .sum();
    (coef, rss)
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = m.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / m[row][row];
    }
    Some(x)
}

/// Golden-section minimum of `f` on `[a, b]`.
pub(crate) fn golden_min(mut a: f64, mut b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Fits `A sin^2(W t / 2 + phi) + C` to one pair population of `traj`.
pub fn extract_rabi_frequency(traj: &Trajectory, channel: DotPair) -> Result<RabiFit> {
    let n = traj.len();
    if n < 8 {
        return Err(Error::ExtractionFailure(format!("need at least 8 samples, got {n}")));
    }
    let t0 = traj.times[0];
    let span = traj.times[n - 1] - t0;
    if !(span > 0.0) {
        return Err(Error::ExtractionFailure("trajectory has zero duration".into()));
    }
    // centered times keep the normal equations well conditioned
    let mid = t0 + span / 2.0;
    let t: Vec<f64> = traj.times.iter().map(|x| x - mid).collect();
    let p = traj.channel(channel.idx());
    let mean = p.iter().sum::<f64>() / n as f64;
    let variance = p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if variance < FLAT_VARIANCE {
        return Err(Error::ExtractionFailure(format!(
            "{} is constant (variance {variance:.2e})",
            channel.label()
        )));
    }

    let spacing = span / (n - 1) as f64;
    let w_lo = std::f64::consts::PI / span;
    let w_hi = std::f64::consts::PI / spacing;
    let dw = 2.0 * std::f64::consts::PI / (OVERSAMPLE * span);
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut total = 0.0;
    let mut count = 0usize;
    let mut w = w_lo;
    while w <= w_hi {
        let (mut re, mut im) = (0.0, 0.0);
        for (&ti, &pi) in t.iter().zip(&p) {
            let (s, c) = (w * ti).sin_cos();
            re += (pi - mean) * c;
            im += (pi - mean) * s;
        }
        let power = re * re + im * im;
        total += power;
        count += 1;
        if power > best.1 {
            best = (w, power);
        }
        w += dw;
    }
    let mean_power = total / count.max(1) as f64;
    if !(best.1 > NOISE_FLOOR_RATIO * mean_power) {
        return Err(Error::ExtractionFailure(format!(
            "no spectral peak above the noise floor in {}",
            channel.label()
        )));
    }

    let lo = (best.0 - dw).max(w_lo / 2.0);
    let w = golden_min(lo, best.0 + dw, 1e-12 * best.0.max(1e-300), |w| project(&t, &p, w).1);
    let two_pi = 2.0 * std::f64::consts::PI;
    if w * span < two_pi {
        return Err(Error::ExtractionFailure(format!(
            "trajectory spans {:.2} oscillations of {}, need at least one",
            w * span / two_pi,
            channel.label()
        )));
    }
    let ([a0, a1, b1], rss) = project(&t, &p, w);
    let half = (a1 * a1 + b1 * b1).sqrt();
    let amplitude = (2.0 * half).clamp(0.0, 1.0);
    // a1 cos + b1 sin = -(A/2) cos(W (t + mid) + 2 phi)
    let phase = (0.5 * (b1.atan2(-a1) - w * mid)).rem_euclid(std::f64::consts::PI);
    Ok(RabiFit {
        frequency: w,
        amplitude,
        phase,
        offset: a0 - half,
        residual: (rss / n as f64).sqrt(),
        channel,
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn synthetic(f: impl Fn(f64) -> f64, t_end: f64, n: usize) -> Trajectory {
        let mut traj = Trajectory::default();
        for i in 0..n {
            let t = t_end * i as f64 / (n - 1) as f64;
            let v = f(t);
            traj.push(t, [0.0, 1.0 - v, v, 0.0], 1.0, 0.0);
        }
        traj
    }

    #[test]
    fn recovers_generator() {
        let traj = synthetic(|t| (0.0139 * t).sin().powi(2), 700.0, 2000);
        let fit = extract_rabi_frequency(&traj, DotPair::P10).unwrap();
        assert_abs_diff_eq!(fit.frequency, 0.0278, epsilon = 1e-4);
        assert_abs_diff_eq!(fit.amplitude, 1.0, epsilon = 1e-6);
        assert!(fit.residual < 1e-8);
        let other = extract_rabi_frequency(&traj, DotPair::P01).unwrap();
        assert_abs_diff_eq!(other.frequency, fit.frequency, epsilon = 1e-9);
    }

    #[test]
    fn constant_curve_fails() {
        let traj = synthetic(|_| 0.3, 100.0, 500);
        assert!(matches!(extract_rabi_frequency(&traj, DotPair::P10), Err(Error::ExtractionFailure(_))));
        let zero = synthetic(|_| 0.0, 100.0, 500);
        assert!(extract_rabi_frequency(&zero, DotPair::P11).is_err());
    }

    #[test]
    fn less_than_one_period_fails() {
        let traj = synthetic(|t| (0.01 * t).sin().powi(2), 100.0, 500);
        assert!(matches!(extract_rabi_frequency(&traj, DotPair::P10), Err(Error::ExtractionFailure(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn fit_recovers_random_parameters(w in 0.02f64..0.5, a in 0.2f64..1.0, phi in 0.0f64..3.0, c in 0.0f64..0.1) {
            let t_end = 3.0 * 2.0 * std::f64::consts::PI / w;
            let traj = synthetic(|t| a * (w * t / 2.0 + phi).sin().powi(2) + c, t_end, 1500);
            let fit = extract_rabi_frequency(&traj, DotPair::P10).unwrap();
            prop_assert!((fit.frequency - w).abs() < 1e-6 * w);
            prop_assert!((fit.amplitude - a).abs() < 1e-6);
            prop_assert!((fit.offset - c).abs() < 1e-6);
            let model = a * (w * 1.234 / 2.0 + phi).sin().powi(2);
            let refit = fit.amplitude * (fit.frequency * 1.234 / 2.0 + fit.phase).sin().powi(2);
            prop_assert!((model - refit).abs() < 1e-5);
        }
    }
}
