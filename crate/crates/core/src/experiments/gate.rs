//! Two-qubit gate reconstruction from pulsed scheme-2 evolution.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rabi::golden_min;
use crate::analytic::{beta_ratio, DispersiveParams};
use crate::error::{Error, Result};
use crate::fockspace::{BasisIndex, DotPair, StateVector};
use crate::model::{Envelope, EnvelopeShape, ModelKind, Scheme, SystemConfig};
use crate::propagator::{propagate_columns, TimeGrid, DEFAULT_NORM_TOL, DEFAULT_STEP_FACTOR};

/// Pulse center and window, in units of the Gaussian width `tau`.
pub const PULSE_CENTER: f64 = 5.0;
pub const PULSE_WINDOW: f64 = 10.0;
/// Entries with modulus below this cannot define a phase reference.
const PHASE_FLOOR: f64 = 1e-6;

/// How the global phase of a [`GateMatrix`] was fixed.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// As propagated.
    Raw,
    /// `U[00][00]` made real and nonnegative.
    Corner,
    /// `U[00][00]` vanished; the largest diagonal entry (index given) was
    /// made real and nonnegative instead.
    Diagonal(usize),
}

/// A 4x4 block of the propagator over `{|00,n>, |01,n>, |10,n>, |11,n>}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateMatrix {
    pub entries: [[C64; 4]; 4],
    pub photon_sector: usize,
    pub phase_convention: PhaseConvention,
    /// `max |U^dag U - I|` over the block; leakage shows up here.
    pub unitarity_defect: f64,
}

impl GateMatrix {
    pub fn new(entries: [[C64; 4]; 4], photon_sector: usize) -> Self {
        let mut g = Self {
            entries,
            photon_sector,
            phase_convention: PhaseConvention::Raw,
            unitarity_defect: 0.0,
        };
        g.unitarity_defect = g.block_defect();
        g
    }

    pub fn identity() -> Self {
        let mut e = [[C64::new(0.0, 0.0); 4]; 4];
        for (i, row) in e.iter_mut().enumerate() {
            row[i] = C64::new(1.0, 0.0);
        }
        Self::new(e, 0)
    }

    /// Canonical `sqrt(SWAP)`.
    pub fn sqrt_swap() -> Self {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let p = C64::new(0.5, 0.5);
        let m = C64::new(0.5, -0.5);
        Self::new([[one, z, z, z], [z, p, m, z], [z, m, p, z], [z, z, z, one]], 0)
    }

    fn block_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..4 {
            for j in 0..4 {
                let mut acc: C64 = (0..4).map(|k| self.entries[k][i].conj() * self.entries[k][j]).sum();
                if i == j {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// Matrix product `self * rhs`.
    pub fn compose(&self, rhs: &GateMatrix) -> GateMatrix {
        let mut e = [[C64::new(0.0, 0.0); 4]; 4];
        for (i, row) in e.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.entries[i][k] * rhs.entries[k][j]).sum();
            }
        }
        GateMatrix {
            phase_convention: PhaseConvention::Raw,
            ..GateMatrix::new(e, self.photon_sector)
        }
    }

    /// Population of `out` after applying the gate to the basis state `input`.
    pub fn transition_probability(&self, input: DotPair, out: DotPair) -> f64 {
        self.entries[out.idx()][input.idx()].norm_sqr()
    }

    /// Largest elementwise deviation of real or imaginary parts.
    pub fn max_deviation(&self, other: &GateMatrix) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..4 {
            for j in 0..4 {
                let d = self.entries[i][j] - other.entries[i][j];
                worst = worst.max(d.re.abs()).max(d.im.abs());
            }
        }
        worst
    }

    /// `arg(U00 U33 / (U11 U22))` in radians, wrapped to `(-pi, pi]`.
    ///
    /// Unchanged by global and single-qubit `z` phases, so it separates a
    /// conditional phase from frame conventions. Canonical `sqrt(SWAP)`
    /// gives `-pi/2`.
    pub fn conditional_phase(&self) -> f64 {
        let e = &self.entries;
        (e[0][0] * e[3][3] * (e[1][1] * e[2][2]).conj()).arg()
    }
}

/// Multiplies `u` by `e^{-i arg U00}` so that `U00` becomes real and
/// nonnegative. If `U00` vanishes, the largest-modulus diagonal entry is used
/// and the convention records which one.
pub fn phase_fix(u: &GateMatrix) -> Result<GateMatrix> {
    let diag: Vec<f64> = (0..4).map(|i| u.entries[i][i].norm()).collect();
    let (pivot, convention) = if diag[0] > PHASE_FLOOR {
        (0, PhaseConvention::Corner)
    } else {
        let (i, m) = diag
            .iter()
            .enumerate()
            .fold((0, 0.0), |best, (i, &m)| if m > best.1 { (i, m) } else { best });
        if m <= PHASE_FLOOR {
            return Err(Error::CannotFix(format!(
                "every diagonal entry is below {PHASE_FLOOR:e} in modulus"
            )));
        }
        (i, PhaseConvention::Diagonal(i))
    };
    let rot = C64::from_polar(1.0, -u.entries[pivot][pivot].arg());
    let mut out = u.clone();
    for row in out.entries.iter_mut() {
        for v in row.iter_mut() {
            *v *= rot;
        }
    }
    // remove the rounding residue so the pivot is exactly real
    out.entries[pivot][pivot] = C64::new(u.entries[pivot][pivot].norm(), 0.0);
    out.phase_convention = convention;
    Ok(out)
}

/// `|tr(target^dag u)| / 4`.
pub fn gate_fidelity(u: &GateMatrix, target: &GateMatrix) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            acc += target.entries[i][j].conj() * u.entries[i][j];
        }
    }
    acc.norm() / 4.0
}

/// Collinear scheme-2 configuration with Gaussian pulses
/// `Omega_1 = exp(-(t - 5 tau)^2 / (2 tau^2))`, `Omega_2 = beta e^{i pi} Omega_1`.
/// `beta = None` takes the light-shift-balancing ratio.
pub fn pulsed_config(omega_c: f64, delta: f64, alpha: f64, tau: f64, beta: Option<f64>, n: usize) -> Result<SystemConfig> {
    let beta = match beta {
        Some(b) => b,
        None => beta_ratio(&DispersiveParams::single(1.0, omega_c, delta).with_alpha(alpha))?,
    };
    let e1 = Envelope::gaussian(1.0, PULSE_CENTER * tau, tau)?;
    let e2 = e1.with_scale(C64::from_polar(beta, PI));
    SystemConfig::dispersive(omega_c, delta, alpha, Scheme::Two, ModelKind::Collinear, [e1, e2], BasisIndex::new(0, 1, n))
}

/// Copy of `cfg` with every Gaussian envelope recentred at `5 tau` with
/// width `tau`.
pub fn with_pulse_width(cfg: &SystemConfig, tau: f64) -> Result<SystemConfig> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("tau must be positive and finite, got {tau}")));
    }
    let mut out = cfg.clone();
    for laser in out.lasers.iter_mut() {
        match &mut laser.envelope.shape {
            EnvelopeShape::Gaussian { center, width, .. } => {
                *center = PULSE_CENTER * tau;
                *width = tau;
            }
            EnvelopeShape::Ramp { .. } => return Err(Error::invalid("pulse width needs gaussian envelopes")),
        }
    }
    Ok(out)
}

/// Gaussian width of the first laser.
pub fn pulse_width(cfg: &SystemConfig) -> Result<f64> {
    match cfg.lasers[0].envelope.shape {
        EnvelopeShape::Gaussian { width, .. } => Ok(width),
        EnvelopeShape::Ramp { .. } => Err(Error::invalid("gate runs need gaussian envelopes")),
    }
}

/// The window `[0, 10 tau]` with step `step_factor / f_max`.
pub fn pulse_grid(cfg: &SystemConfig, step_factor: f64) -> Result<TimeGrid> {
    let tau = pulse_width(cfg)?;
    TimeGrid::new(0.0, PULSE_WINDOW * tau, step_factor / cfg.max_phase_frequency())
}

/// Propagates the four computational kets in photon sector `n` and
/// returns the phase-fixed block. Leakage is not renormalized away; it
/// shows up in `unitarity_defect`.
pub fn gate_tomography(cfg: &SystemConfig, grid: &TimeGrid, n: usize) -> Result<GateMatrix> {
    for (k, laser) in cfg.lasers.iter().enumerate() {
        if !matches!(laser.envelope.shape, EnvelopeShape::Gaussian { .. }) {
            return Err(Error::invalid(format!("gate tomography needs a gaussian envelope on laser {}", k + 1)));
        }
    }
    if n > cfg.n_max {
        return Err(Error::invalid(format!("photon sector {n} exceeds n_max {}", cfg.n_max)));
    }
    let kets: Vec<BasisIndex> = DotPair::ALL
        .iter()
        .map(|p| {
            let (a, b) = p.levels();
            BasisIndex::new(a, b, n)
        })
        .collect();
    let initial: Vec<StateVector> = kets.iter().map(|&b| StateVector::basis(cfg.n_max, b)).collect::<Result<_>>()?;
    let finals = propagate_columns(cfg, &initial, grid, DEFAULT_NORM_TOL)?;
    let mut entries = [[C64::new(0.0, 0.0); 4]; 4];
    for (col, psi) in finals.iter().enumerate() {
        for (row, &b) in kets.iter().enumerate() {
            entries[row][col] = psi.amplitude(b)?;
        }
    }
    phase_fix(&GateMatrix::new(entries, n))
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub photon_sector: usize,
    pub step_factor: f64,
    /// Stop once the bracket is narrower than this.
    pub tau_tol: f64,
    /// Points of the initial scan locating the maximum, endpoints included.
    pub scan_points: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            photon_sector: 0,
            step_factor: DEFAULT_STEP_FACTOR,
            tau_tol: 1e-3,
            scan_points: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub tau: f64,
    pub fidelity: f64,
    /// Every `(tau, fidelity)` evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Fidelity against canonical `sqrt(SWAP)` for pulse width `tau`.
pub fn fidelity_at(cfg: &SystemConfig, tau: f64, opts: &CalibrationOptions) -> Result<f64> {
    let c = with_pulse_width(cfg, tau)?;
    let grid = pulse_grid(&c, opts.step_factor)?;
    let u = gate_tomography(&c, &grid, opts.photon_sector)?;
    Ok(gate_fidelity(&u, &GateMatrix::sqrt_swap()))
}

/// Maximizes the `sqrt(SWAP)` fidelity over the pulse width in `bracket`.
///
/// A uniform scan locates the best interior point; golden-section search
/// then refines between its neighbours. If the scan peaks at an endpoint
/// there is no interior maximum and the endpoint values are reported.
pub fn calibrate_tau(cfg: &SystemConfig, bracket: (f64, f64), opts: &CalibrationOptions) -> Result<Calibration> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid(format!("bad tau bracket [{lo}, {hi}]")));
    }
    if opts.scan_points < 3 || !(opts.tau_tol > 0.0) {
        return Err(Error::invalid("calibration needs scan_points >= 3 and tau_tol > 0"));
    }
    let m = opts.scan_points;
    let taus: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let scan: Vec<f64> = taus.par_iter().map(|&tau| fidelity_at(cfg, tau, opts)).collect::<Result<_>>()?;
    let mut evaluations: Vec<(f64, f64)> = taus.iter().copied().zip(scan.iter().copied()).collect();
    let best = (0..m).fold(0, |b, i| if scan[i] > scan[b] { i } else { b });
    if best == 0 || best == m - 1 {
        return Err(Error::CalibrationFailure {
            lo,
            hi,
            f_lo: scan[0],
            f_hi: scan[m - 1],
        });
    }
    let mut failure = None;
    let tau = golden_min(taus[best - 1], taus[best + 1], opts.tau_tol, |tau| match fidelity_at(cfg, tau, opts) {
        Ok(f) => {
            evaluations.push((tau, f));
            -f
        }
        Err(e) => {
            failure.get_or_insert(e);
            f64::INFINITY
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let fidelity = fidelity_at(cfg, tau, opts)?;
    evaluations.push((tau, fidelity));
    Ok(Calibration {
        tau,
        fidelity,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn eq9() -> GateMatrix {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let a = C64::new(0.5, 0.5039);
        let b = C64::new(0.5, -0.4961);
        GateMatrix::new([[one, z, z, z], [z, a, b, z], [z, b, a, z], [z, z, z, one]], 0)
    }

    #[test]
    fn fidelity_examples() {
        let t = GateMatrix::sqrt_swap();
        assert_abs_diff_eq!(gate_fidelity(&t, &t), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gate_fidelity(&GateMatrix::identity(), &t), 10f64.sqrt() / 4.0, epsilon = 1e-15);
        assert!(gate_fidelity(&eq9(), &t) >= 0.995);
        assert_abs_diff_eq!(t.conditional_phase(), -PI / 2.0, epsilon = 1e-15);
        let swap = t.compose(&t);
        assert_abs_diff_eq!(swap.transition_probability(DotPair::P01, DotPair::P10), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn phase_fix_examples() {
        let fixed = phase_fix(&eq9()).unwrap();
        assert_eq!(fixed.entries, eq9().entries);
        assert_eq!(fixed.phase_convention, PhaseConvention::Corner);

        let mut u = GateMatrix::identity();
        u.entries[0][0] = C64::new(0.0, 0.0);
        u.entries[3][3] = C64::new(0.0, 1.0);
        let fixed = phase_fix(&u).unwrap();
        assert_eq!(fixed.phase_convention, PhaseConvention::Diagonal(1));

        let zero = GateMatrix::new([[C64::new(0.0, 0.0); 4]; 4], 0);
        assert!(matches!(phase_fix(&zero), Err(Error::CannotFix(_))));
    }

    proptest! {
        #[test]
        fn phase_fix_removes_global_phase(theta in -10.0f64..10.0) {
            let mut u = GateMatrix::identity();
            for i in 0..4 {
                u.entries[i][i] = C64::from_polar(1.0, theta);
            }
            let fixed = phase_fix(&u).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((fixed.entries[i][j] - want).norm() < 1e-14);
                }
            }
        }

        #[test]
        fn phase_fix_is_idempotent(re in proptest::collection::vec(-1.0f64..1.0, 32)) {
            let mut e = [[C64::new(0.0, 0.0); 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    e[i][j] = C64::new(re[2 * (4 * i + j)], re[2 * (4 * i + j) + 1]);
                }
            }
            let once = phase_fix(&GateMatrix::new(e, 0)).unwrap();
            let twice = phase_fix(&once).unwrap();
            prop_assert_eq!(&once.entries, &twice.entries);
            prop_assert!(once.entries[0][0].im == 0.0 && once.entries[0][0].re >= 0.0);
        }

        #[test]
        fn fidelity_in_unit_interval_and_phase_blind(theta in -4.0f64..4.0) {
            let t = GateMatrix::sqrt_swap();
            let mut u = t.clone();
            for row in u.entries.iter_mut() {
                for v in row.iter_mut() {
                    *v *= C64::from_polar(1.0, theta);
                }
            }
            prop_assert!((gate_fidelity(&u, &t) - 1.0).abs() < 1e-14);
            let mut v = t.clone();
            v.entries[3][3] = C64::from_polar(1.0, theta);
            prop_assert!(gate_fidelity(&v, &t) <= 1.0 + 1e-14);
        }
    }

    #[test]
    fn zero_area_pulse_is_identity() {
        let mut cfg = pulsed_config(1000.0, 990.0, 10.0, 2.0, None, 0).unwrap().with_n_max(2);
        cfg.coupling = [[0.0; 2]; 2];
        let grid = pulse_grid(&cfg, DEFAULT_STEP_FACTOR).unwrap();
        let u = gate_tomography(&cfg, &grid, 0).unwrap();
        assert_eq!(u.entries, GateMatrix::identity().entries);
        assert_eq!(u.unitarity_defect, 0.0);
    }

    #[test]
    fn tomography_requires_gaussians() {
        let r = Envelope::ramp(1.0, 10.0).unwrap();
        let cfg = SystemConfig::dispersive(100.0, 80.0, 2.0, Scheme::Two, ModelKind::Collinear, [r, r], BasisIndex::new(0, 1, 0)).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 1e-4).unwrap();
        assert!(gate_tomography(&cfg, &grid, 0).is_err());
        assert!(with_pulse_width(&cfg, 3.0).is_err());
        assert!(calibrate_tau(&cfg, (5.0, 1.0), &CalibrationOptions::default()).is_err());
    }

    // Weak, short pulse in a moderately detuned system: the gate is close to
    // identity, and repeated tomography is bit-identical.
    #[test]
    fn tomography_is_deterministic_and_unitary() {
        let cfg = pulsed_config(100.0, 80.0, 2.0, 4.0, None, 0).unwrap().with_n_max(3);
        let grid = pulse_grid(&cfg, DEFAULT_STEP_FACTOR).unwrap();
        let a = gate_tomography(&cfg, &grid, 0).unwrap();
        let b = gate_tomography(&cfg, &grid, 0).unwrap();
        assert_eq!(a, b);
        assert!(a.unitarity_defect < 1e-3, "defect {}", a.unitarity_defect);
        assert_eq!(a.entries[0][0].im, 0.0);
    }
}
