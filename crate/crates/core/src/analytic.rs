//! Closed-form dispersive-regime results and the six-state reduced model.
//!
//! Starting from `|01,n>`, scheme 2 moves population to `|10,n>` through the
//! far-detuned states `|00,n+-1>` and `|11,n+-1>`. Eliminating them gives
//!
//! ```text
//! Omega_eff = (Omega^2 / 2) [1/(Delta + w_c) - 1/(Delta - w_c)]
//! p(00)     = (Omega^2 / 4) [(n+1)/(Delta + w_c)^2 + n/(Delta - w_c)^2]
//! p(11)     = (Omega^2 / 4) [n/(Delta + w_c)^2 + (n+1)/(Delta - w_c)^2]
//! ```
//!
//! and, for collinear fields, the amplitude ratio `beta = Omega_2 / Omega_1`
//! that equalizes the light shifts of `|01>` and `|10>`.
//!
//! [`reduced_six_state_evolve`] integrates the Schrödinger equation on the
//! six-state subspace before elimination. Its couplings are written out by
//! hand and it uses classical RK4, so it shares no code with the full-space
//! propagator it is compared against.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, Scheme, SystemConfig, POLE_GUARD};
use crate::propagator::{TimeGrid, Trajectory};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveParams {
    pub omega1: f64,
    pub omega2: f64,
    pub omega_c: f64,
    /// Common diagonal detuning `Delta_11 = Delta_22`.
    pub delta: f64,
    pub alpha: f64,
    pub n: u32,
}

impl DispersiveParams {
    /// Equal amplitudes `Omega_1 = Omega_2 = omega`.
    pub fn single(omega: f64, omega_c: f64, delta: f64) -> Self {
        Self {
            omega1: omega,
            omega2: omega,
            omega_c,
            delta,
            alpha: 0.0,
            n: 0,
        }
    }

    pub fn with_n(mut self, n: u32) -> Self {
        self.n = n;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_amplitudes(mut self, omega1: f64, omega2: f64) -> Self {
        self.omega1 = omega1;
        self.omega2 = omega2;
        self
    }

    fn check_poles(&self) -> Result<(f64, f64)> {
        let plus = self.delta + self.omega_c;
        let minus = self.delta - self.omega_c;
        if plus.abs() < POLE_GUARD || minus.abs() < POLE_GUARD {
            return Err(Error::domain(format!(
                "Delta = {} is within {POLE_GUARD:e} of a pole at +-omega_c = +-{}",
                self.delta, self.omega_c
            )));
        }
        Ok((plus, minus))
    }
}

/// Effective Rabi frequency for a single field per dot, `Omega = omega1`.
pub fn omega_eff_single(p: &DispersiveParams) -> Result<f64> {
    let (plus, minus) = p.check_poles()?;
    Ok(p.omega1 * p.omega1 / 2.0 * (1.0 / plus - 1.0 / minus))
}

/// Maximum `|00>` population during the transfer, `Omega = omega1`.
pub fn p_max_00(p: &DispersiveParams) -> Result<f64> {
    let (plus, minus) = p.check_poles()?;
    let n = p.n as f64;
    Ok(p.omega1 * p.omega1 / 4.0 * ((n + 1.0) / (plus * plus) + n / (minus * minus)))
}

/// Maximum `|11>` population during the transfer, `Omega = omega1`.
pub fn p_max_11(p: &DispersiveParams) -> Result<f64> {
    let (plus, minus) = p.check_poles()?;
    let n = p.n as f64;
    Ok(p.omega1 * p.omega1 / 4.0 * (n / (plus * plus) + (n + 1.0) / (minus * minus)))
}

/// Amplitude ratio `Omega_2 / Omega_1` maximizing the collinear transfer.
pub fn beta_ratio(p: &DispersiveParams) -> Result<f64> {
    let (wc, d, a) = (p.omega_c, p.delta, p.alpha);
    let (plus, minus) = p.check_poles()?;
    let denominators = [
        ("alpha - 1", a - 1.0),
        ("alpha + 1", a + 1.0),
        ("(alpha + 1) w_c - (alpha - 1) Delta", (a + 1.0) * wc - (a - 1.0) * d),
        ("(alpha + 1) Delta - (alpha - 1) w_c", (a + 1.0) * d - (a - 1.0) * wc),
    ];
    for (name, v) in denominators {
        if v.abs() < POLE_GUARD {
            return Err(Error::domain(format!("beta: `{name}` vanishes")));
        }
    }
    let ratio = minus / plus;
    let num = 1.0 + 1.0 / (a - 1.0) + ratio - minus / denominators[2].1;
    let den = 1.0 - 1.0 / (a + 1.0) + ratio - minus / denominators[3].1;
    if den.abs() < POLE_GUARD {
        return Err(Error::domain("beta: denominator of the quotient vanishes"));
    }
    let q = num / den;
    if q < 0.0 {
        return Err(Error::domain(format!("beta: quotient {q} is negative")));
    }
    Ok(q.sqrt())
}

/// Effective Rabi frequency for collinear fields with amplitudes
/// `omega1`, `omega2`.
pub fn omega_eff_collinear(p: &DispersiveParams) -> Result<f64> {
    let (plus, minus) = p.check_poles()?;
    Ok(p.omega1 * p.omega2 / 2.0 * (1.0 / plus - 1.0 / minus))
}

/// Ordering of the reduced basis.
pub const REDUCED_LABELS: [&str; 6] = ["|01,n>", "|00,n-1>", "|00,n+1>", "|11,n-1>", "|11,n+1>", "|10,n>"];

/// Amplitudes over `REDUCED_LABELS`. For `n = 0` the two `n-1` slots stay
/// identically zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState {
    pub amplitudes: [C64; 6],
    pub n: usize,
}

impl ReducedState {
    pub fn start(n: usize) -> Self {
        let mut amplitudes = [C64::new(0.0, 0.0); 6];
        amplitudes[0] = C64::new(1.0, 0.0);
        Self { amplitudes, n }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `[P00, P01, P10, P11]`.
    pub fn pair_populations(&self) -> [f64; 4] {
        let p = |i: usize| self.amplitudes[i].norm_sqr();
        [p(1) + p(2), p(0), p(5), p(3) + p(4)]
    }

    pub fn photon_mean(&self) -> f64 {
        let n = self.n as f64;
        let p = |i: usize| self.amplitudes[i].norm_sqr();
        n * (p(0) + p(5)) + (n - 1.0).max(0.0) * (p(1) + p(3)) + (n + 1.0) * (p(2) + p(4))
    }
}

/// Hermitian 6x6 Hamiltonian on the reduced basis at time `t`.
fn reduced_hamiltonian(cfg: &SystemConfig, n: usize, t: f64) -> [[C64; 6]; 6] {
    let wc = cfg.omega_c;
    let up = ((n + 1) as f64).sqrt();
    let down = (n as f64).sqrt();
    // sum over lasers of -Omega_jk(t)/2 * e^{i (Delta_jk +- w_c) t}
    let lower = |j: usize, photon_up: bool| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..2 {
            if !cfg.keeps(j, k) {
                continue;
            }
            let f = cfg.detuning_idx(j, k) + if photon_up { wc } else { -wc };
            acc -= cfg.coupling_at(j, k, t) * 0.5 * C64::from_polar(1.0, f * t);
        }
        acc
    };
    let mut h = [[C64::new(0.0, 0.0); 6]; 6];
    let mut set = |row: usize, col: usize, v: C64| {
        h[row][col] = v;
        h[col][row] = v.conj();
    };
    // dot 2 lowering |01,n> -> |00,n+-1>
    set(2, 0, lower(1, true) * up);
    set(1, 0, lower(1, false) * down);
    // dot 1 lowering |10,n> -> |00,n+-1>
    set(2, 5, lower(0, true) * up);
    set(1, 5, lower(0, false) * down);
    // dot 1 lowering |11,n-1> -> |01,n>, |11,n+1> -> |01,n>
    set(0, 3, lower(0, true) * down);
    set(0, 4, lower(0, false) * up);
    // dot 2 lowering |11,n-1> -> |10,n>, |11,n+1> -> |10,n>
    set(5, 3, lower(1, true) * down);
    set(5, 4, lower(1, false) * up);
    h
}

fn rhs(cfg: &SystemConfig, n: usize, t: f64, psi: &[C64; 6]) -> [C64; 6] {
    let h = reduced_hamiltonian(cfg, n, t);
    let mut out = [C64::new(0.0, 0.0); 6];
    for (r, row) in h.iter().enumerate() {
        let acc: C64 = row.iter().zip(psi).map(|(a, b)| a * b).sum();
        out[r] = C64::new(acc.im, -acc.re); // -i * acc
    }
    out
}

fn axpy(a: &[C64; 6], s: f64, b: &[C64; 6]) -> [C64; 6] {
    let mut out = *a;
    for (o, v) in out.iter_mut().zip(b) {
        *o += *v * s;
    }
    out
}

/// Integrates the six-state model starting from `|01,n>` with classical RK4.
pub fn reduced_six_state_evolve(cfg: &SystemConfig, n: usize, grid: &TimeGrid, tol: f64) -> Result<Trajectory> {
    if cfg.scheme != Scheme::Two {
        return Err(Error::invalid("the six-state model describes scheme 2 only"));
    }
    if cfg.model == ModelKind::Lab {
        return Err(Error::invalid("the six-state model is written in the rotating frame"));
    }
    grid.check_guard(cfg)?;
    let mut state = ReducedState::start(n);
    let steps = grid.steps();
    let h = grid.dt();
    let stride = grid.stride();
    let mut traj = Trajectory::default();
    let push = |traj: &mut Trajectory, t: f64, s: &ReducedState| -> Result<()> {
        let norm = s.norm_sqr();
        if !norm.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite amplitude at t = {t}")));
        }
        traj.push(t, s.pair_populations(), norm, s.photon_mean());
        Ok(())
    };
    push(&mut traj, grid.t_start, &state)?;
    for s in 0..steps {
        let t = grid.t_start + s as f64 * h;
        let y = state.amplitudes;
        let k1 = rhs(cfg, n, t, &y);
        let k2 = rhs(cfg, n, t + h / 2.0, &axpy(&y, h / 2.0, &k1));
        let k3 = rhs(cfg, n, t + h / 2.0, &axpy(&y, h / 2.0, &k2));
        let k4 = rhs(cfg, n, t + h, &axpy(&y, h, &k3));
        for i in 0..6 {
            state.amplitudes[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
        if n == 0 {
            state.amplitudes[1] = C64::new(0.0, 0.0);
            state.amplitudes[3] = C64::new(0.0, 0.0);
        }
        let done = s + 1;
        if done % stride == 0 || done == steps {
            push(&mut traj, grid.t_start + done as f64 * h, &state)?;
        }
    }
    let drift = traj.norm_drift();
    if drift > tol {
        return Err(Error::IntegrationFailure { drift, tol });
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn omega_eff_single_examples() {
        let v = omega_eff_single(&DispersiveParams::single(1.0, 100.0, 80.0)).unwrap();
        assert_abs_diff_eq!(v, 0.0277778, epsilon = 5e-8);
        let v = omega_eff_single(&DispersiveParams::single(1.0, 100.0, 90.0)).unwrap();
        assert_abs_diff_eq!(v, 0.0526316, epsilon = 5e-8);
        assert_eq!(omega_eff_single(&DispersiveParams::single(0.0, 100.0, 90.0)).unwrap(), 0.0);
    }

    #[test]
    fn poles_are_rejected() {
        for d in [100.0, -100.0, 100.0 + 1e-7] {
            let p = DispersiveParams::single(1.0, 100.0, d);
            assert!(matches!(omega_eff_single(&p), Err(Error::Domain(_))));
            assert!(p_max_00(&p).is_err());
            assert!(p_max_11(&p).is_err());
            assert!(omega_eff_collinear(&p).is_err());
        }
    }

    #[test]
    fn leak_maxima_examples() {
        let p = DispersiveParams::single(1.0, 100.0, 80.0).with_n(2);
        assert_abs_diff_eq!(p_max_00(&p).unwrap(), 0.0012731, epsilon = 5e-8);
        assert_abs_diff_eq!(p_max_11(&p).unwrap(), 0.0018904, epsilon = 5e-8);

        let p0 = DispersiveParams::single(1.0, 100.0, 80.0).with_n(0);
        assert_abs_diff_eq!(p_max_00(&p0).unwrap(), 0.25 / 180f64.powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(p_max_11(&p0).unwrap(), 0.25 / 20f64.powi(2), epsilon = 1e-15);
    }

    #[test]
    fn beta_examples() {
        let p = DispersiveParams::single(1.0, 100.0, 80.0).with_alpha(2.0);
        assert_abs_diff_eq!(beta_ratio(&p).unwrap(), 1.6837, epsilon = 5e-5);
        let p = DispersiveParams::single(1.0, 1000.0, 990.0).with_alpha(10.0);
        assert_abs_diff_eq!(beta_ratio(&p).unwrap(), 1.10526, epsilon = 5e-6);
        let p = DispersiveParams::single(1.0, 100.0, 80.0).with_alpha(1e4);
        assert!((beta_ratio(&p).unwrap() - 1.0).abs() < 1e-2);
        let p = DispersiveParams::single(1.0, 100.0, 80.0).with_alpha(1.0);
        assert!(matches!(beta_ratio(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn collinear_examples() {
        let p = DispersiveParams::single(1.0, 100.0, 80.0);
        assert_abs_diff_eq!(omega_eff_collinear(&p).unwrap(), 0.0277778, epsilon = 5e-8);
        // 1.6837 / 36
        let p = p.with_amplitudes(1.0, 1.6837);
        assert_abs_diff_eq!(omega_eff_collinear(&p).unwrap(), 0.0467694, epsilon = 5e-8);
        assert_eq!(omega_eff_collinear(&p.with_amplitudes(0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(omega_eff_collinear(&p.with_amplitudes(1.0, 0.0)).unwrap(), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn simplified_form(om in 0.0f64..3.0, wc in 10.0f64..2000.0, frac in 0.01f64..0.99) {
                let d = wc * frac;
                let v = omega_eff_single(&DispersiveParams::single(om, wc, d)).unwrap();
                let alt = -om * om * wc / (d * d - wc * wc);
                prop_assert!((v - alt).abs() <= 1e-12 * alt.abs().max(1e-300));
            }

            #[test]
            fn leak_difference_is_n_free(om in 0.0f64..3.0, wc in 10.0f64..2000.0, frac in 0.01f64..0.99, n in 0u32..20) {
                let p = DispersiveParams::single(om, wc, wc * frac).with_n(n);
                let (a, b) = (p_max_00(&p).unwrap(), p_max_11(&p).unwrap());
                prop_assert!(a >= 0.0 && b >= 0.0);
                let d = wc * frac;
                let want = om * om / 4.0 * (1.0 / (d - wc).powi(2) - 1.0 / (d + wc).powi(2));
                prop_assert!((b - a - want).abs() <= 1e-9 * want.abs().max(1e-12));
                let p2 = DispersiveParams::single(2.0 * om, wc, d).with_n(n);
                prop_assert!((p_max_00(&p2).unwrap() - 4.0 * a).abs() <= 1e-12 * a.max(1e-300));
            }

            #[test]
            fn collinear_matches_geometric_mean(o1 in 0.01f64..3.0, o2 in 0.01f64..3.0, wc in 10.0f64..2000.0, frac in 0.01f64..0.99) {
                let p = DispersiveParams::single(1.0, wc, wc * frac).with_amplitudes(o1, o2);
                let single = omega_eff_single(&DispersiveParams::single((o1 * o2).sqrt(), wc, wc * frac)).unwrap();
                let col = omega_eff_collinear(&p).unwrap();
                prop_assert!((col - single).abs() <= 1e-12 * col.abs());
            }
        }

        // beta has a pole where (alpha + 1) Delta = (alpha - 1) w_c, i.e. at
        // alpha = (w_c + Delta) / (w_c - Delta); the approach to 1 is monotone
        // beyond it.
        #[test]
        fn beta_decreases_towards_one() {
            for (d, wc) in [(80.0, 100.0), (990.0, 1000.0), (70.0, 100.0)] {
                let pole = (wc + d) / (wc - d);
                let mut last = f64::INFINITY;
                let mut alpha = 2.0 * pole;
                while alpha <= 1e4 {
                    let b = beta_ratio(&DispersiveParams::single(1.0, wc, d).with_alpha(alpha)).unwrap();
                    assert!(b <= last + 1e-12, "beta not monotone at alpha={alpha}");
                    assert!(b >= 1.0);
                    last = b;
                    alpha *= 1.25;
                }
                assert!((last - 1.0).abs() < 1e-2);
            }
        }
    }
}
