//! Time integration of `i dpsi/dt = H(t) psi`.
//!
//! Each step of length `h` applies the fourth-order commutator-free Magnus
//! scheme with Gauss-Legendre nodes `c_{1,2} = 1/2 -+ sqrt(3)/6`:
//!
//! ```text
//! psi <- exp(-i h (a2 H(t+c1 h) + a1 H(t+c2 h)))
//!        exp(-i h (a1 H(t+c1 h) + a2 H(t+c2 h))) psi,
//! a1 = 1/4 + sqrt(3)/6,  a2 = 1/4 - sqrt(3)/6
//! ```
//!
//! Each exponential is a Taylor series truncated once the remainder bound
//! drops below `2^-56`, so norm loss per step sits at rounding level. The
//! rotating-frame couplings oscillate at up to `|Delta_jk| + w_c`, and the
//! step is required to resolve that: `dt * f_max <= 0.1`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{BasisIndex, OperatorMatrix, StateVector};
use crate::model::{Coefficients, Generator, SystemConfig};

/// Default `dt_max * f_max`.
pub const DEFAULT_STEP_FACTOR: f64 = 0.05;
/// Largest accepted `dt * f_max`.
pub const MAX_STEP_FACTOR: f64 = 0.1;
pub const DEFAULT_NORM_TOL: f64 = 1e-8;
pub const DEFAULT_SAMPLES: usize = 2000;

const TAYLOR_REMAINDER: f64 = 1.4e-17;
const MAX_EXP_ARG: f64 = 0.5;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt_max: f64,
    /// Record every `sample_stride`-th step. `None` picks the stride giving
    /// about [`DEFAULT_SAMPLES`] samples.
    pub sample_stride: Option<usize>,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, dt_max: f64) -> Result<Self> {
        let grid = Self {
            t_start,
            t_end,
            dt_max,
            sample_stride: None,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid with the default step `0.05 / f_max` for `cfg`.
    pub fn for_config(cfg: &SystemConfig, t_start: f64, t_end: f64) -> Result<Self> {
        Self::new(t_start, t_end, DEFAULT_STEP_FACTOR / cfg.max_phase_frequency())
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = Some(stride.max(1));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite()) {
            return Err(Error::invalid("time grid bounds must be finite"));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::invalid(format!(
                "t_end ({}) must exceed t_start ({})",
                self.t_end, self.t_start
            )));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::invalid(format!("dt_max must be > 0, got {}", self.dt_max)));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn steps(&self) -> usize {
        ((self.span() / self.dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    pub fn dt(&self) -> f64 {
        self.span() / self.steps() as f64
    }

    pub fn stride(&self) -> usize {
        self.sample_stride
            .unwrap_or_else(|| self.steps().div_ceil(DEFAULT_SAMPLES))
            .max(1)
    }

    /// Same span with half the step, sampled at the same instants.
    pub fn refined(&self) -> Self {
        let steps = self.steps();
        Self {
            dt_max: self.span() / (2 * steps) as f64,
            sample_stride: Some(2 * self.stride()),
            ..*self
        }
    }

    /// Rejects grids whose step does not resolve the fastest phase of `cfg`.
    pub fn check_guard(&self, cfg: &SystemConfig) -> Result<()> {
        self.validate()?;
        let f_max = cfg.max_phase_frequency();
        let product = self.dt() * f_max;
        if product > MAX_STEP_FACTOR * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "time step {:.3e} too coarse for phase frequency {f_max}: dt * f_max = {product:.3} > {MAX_STEP_FACTOR}",
                self.dt()
            )));
        }
        Ok(())
    }
}

/// Sampled observables along one propagation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `[P00, P01, P10, P11]`, each summed over photon number.
    pub populations: Vec<[f64; 4]>,
    pub norm: Vec<f64>,
    pub photon_mean: Vec<f64>,
    /// Largest value of each pair population over every integration step,
    /// not just the recorded samples.
    pub step_peaks: [f64; 4],
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, pops: [f64; 4], norm: f64, photon_mean: f64) {
        for (peak, p) in self.step_peaks.iter_mut().zip(pops) {
            *peak = peak.max(p);
        }
        self.times.push(t);
        self.populations.push(pops);
        self.norm.push(norm);
        self.photon_mean.push(photon_mean);
    }

    /// Population series of one channel (`0..4` for `P00..P11`).
    pub fn channel(&self, idx: usize) -> Vec<f64> {
        self.populations.iter().map(|p| p[idx]).collect()
    }

    pub fn max_of(&self, idx: usize) -> f64 {
        self.populations.iter().map(|p| p[idx]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn norm_drift(&self) -> f64 {
        let first = self.norm.first().copied().unwrap_or(1.0);
        self.norm.iter().map(|n| (n - first).abs()).fold(0.0, f64::max)
    }

    /// Samples with `t >= t_from`. Step peaks are recomputed from the
    /// retained samples only.
    pub fn window(&self, t_from: f64) -> Trajectory {
        let start = self.times.partition_point(|t| *t < t_from);
        let mut out = Trajectory::default();
        for i in start..self.len() {
            out.push(self.times[i], self.populations[i], self.norm[i], self.photon_mean[i]);
        }
        out
    }

    /// Largest absolute difference between two trajectories sampled at the
    /// same instants.
    pub fn max_population_deviation(&self, other: &Trajectory) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::invalid(format!(
                "trajectories have {} and {} samples",
                self.len(),
                other.len()
            )));
        }
        let mut worst = 0.0_f64;
        for (i, (a, b)) in self.populations.iter().zip(&other.populations).enumerate() {
            if (self.times[i] - other.times[i]).abs() > 1e-9 * (1.0 + self.times[i].abs()) {
                return Err(Error::invalid("trajectories are sampled at different times"));
            }
            for c in 0..4 {
                worst = worst.max((a[c] - b[c]).abs());
            }
        }
        Ok(worst)
    }
}

const S3: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)
const NODE_1: f64 = 0.5 - S3 / 2.0;
const NODE_2: f64 = 0.5 + S3 / 2.0;
const WEIGHT_BIG: f64 = 0.25 + S3 / 2.0;
const WEIGHT_SMALL: f64 = 0.25 - S3 / 2.0;

/// Phase factors are advanced by recurrence between consecutive steps and
/// recomputed exactly this often.
const PHASE_RESYNC: usize = 1024;

/// Single-state stepper with preallocated scratch space.
pub(crate) struct Stepper<'a> {
    gen: &'a Generator,
    freqs: Vec<f64>,
    // e^{i f h}, and the phasors at the two nodes of the previous step
    rot: Vec<C64>,
    node1: Vec<C64>,
    node2: Vec<C64>,
    prev: Option<(f64, f64)>,
    since_sync: usize,
    term: Vec<C64>,
    next: Vec<C64>,
    at_node: [Coefficients; 2],
    mixed: Coefficients,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(gen: &'a Generator) -> Self {
        let dim = gen.dim();
        let freqs: Vec<f64> = gen.phase_frequencies().collect();
        let zeros = vec![C64::new(0.0, 0.0); freqs.len()];
        let blank = Coefficients {
            channel: vec![C64::new(0.0, 0.0); gen.channel_count()],
            diag_weight: 1.0,
        };
        Self {
            gen,
            rot: zeros.clone(),
            node1: zeros.clone(),
            node2: zeros,
            freqs,
            prev: None,
            since_sync: 0,
            term: vec![C64::new(0.0, 0.0); dim],
            next: vec![C64::new(0.0, 0.0); dim],
            at_node: [blank.clone(), blank.clone()],
            mixed: blank,
        }
    }

    /// `psi <- exp(-i h H[coef]) psi`.
    fn exp_apply(&mut self, h: f64, psi: &mut [C64]) {
        let coef = &self.mixed;
        let x_total = h.abs() * self.gen.norm_bound(coef);
        if x_total == 0.0 {
            return;
        }
        let pieces = (x_total / MAX_EXP_ARG).ceil().max(1.0) as usize;
        let sub = h / pieces as f64;
        let x = x_total / pieces as f64;
        // smallest order K with x^(K+1) / (K+1)! below the remainder target
        let mut order = 1;
        let mut bound = x * x / 2.0;
        while bound > TAYLOR_REMAINDER && order < 40 {
            order += 1;
            bound *= x / (order + 1) as f64;
        }
        for _ in 0..pieces {
            self.term.copy_from_slice(psi);
            for k in 1..=order {
                self.gen.apply(coef, &self.term, &mut self.next);
                let f = C64::new(0.0, -sub / k as f64);
                for (t, n) in self.term.iter_mut().zip(&self.next) {
                    *t = *n * f;
                }
                for (p, t) in psi.iter_mut().zip(&self.term) {
                    *p += *t;
                }
            }
        }
    }

    fn update_phasors(&mut self, t: f64, h: f64) {
        let continues = match self.prev {
            Some((t_prev, h_prev)) => h_prev == h && (t - (t_prev + h)).abs() <= 1e-9 * h.abs(),
            None => false,
        };
        if continues && self.since_sync < PHASE_RESYNC {
            for ((a, b), r) in self.node1.iter_mut().zip(self.node2.iter_mut()).zip(&self.rot) {
                *a *= r;
                *b *= r;
            }
            self.since_sync += 1;
        } else {
            for (i, f) in self.freqs.iter().enumerate() {
                self.rot[i] = C64::from_polar(1.0, f * h);
                self.node1[i] = C64::from_polar(1.0, f * (t + NODE_1 * h));
                self.node2[i] = C64::from_polar(1.0, f * (t + NODE_2 * h));
            }
            self.since_sync = 0;
        }
        self.prev = Some((t, h));
    }

    pub(crate) fn step(&mut self, t: f64, h: f64, psi: &mut [C64]) {
        self.update_phasors(t, h);
        let [c1, c2] = &mut self.at_node;
        self.gen.coefficients_into(t + NODE_1 * h, &self.node1, c1);
        self.gen.coefficients_into(t + NODE_2 * h, &self.node2, c2);
        self.mix(WEIGHT_BIG, WEIGHT_SMALL);
        self.exp_apply(h, psi);
        self.mix(WEIGHT_SMALL, WEIGHT_BIG);
        self.exp_apply(h, psi);
    }

    fn mix(&mut self, w1: f64, w2: f64) {
        let [c1, c2] = &self.at_node;
        for ((m, a), b) in self.mixed.channel.iter_mut().zip(&c1.channel).zip(&c2.channel) {
            *m = *a * w1 + *b * w2;
        }
        self.mixed.diag_weight = w1 * c1.diag_weight + w2 * c2.diag_weight;
    }
}

/// Basis indices of the excitation-parity sector (`q1 + q2 + n` mod 2) that
/// holds all of `psi`, or `None` if it straddles both sectors. The generator
/// never couples the two sectors.
fn parity_sector(psi: &StateVector) -> Option<Vec<usize>> {
    let space = psi.space();
    let parity = |i: usize| {
        let b = space.state_of(i);
        (b.q1 as usize + b.q2 as usize + b.n) % 2
    };
    let mut found = None;
    for (i, a) in psi.amplitudes.iter().enumerate() {
        if *a != C64::new(0.0, 0.0) {
            match found {
                None => found = Some(parity(i)),
                Some(p) if p != parity(i) => return None,
                _ => {}
            }
        }
    }
    let p = found.unwrap_or(0);
    Some((0..space.dim()).filter(|&i| parity(i) == p).collect())
}

fn check_initial(cfg: &SystemConfig, psi0: &StateVector) -> Result<()> {
    if psi0.n_max != cfg.n_max {
        return Err(Error::invalid(format!(
            "state truncation {} does not match config n_max {}",
            psi0.n_max, cfg.n_max
        )));
    }
    let norm = psi0.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("initial state not normalized: |psi|^2 = {norm}")));
    }
    Ok(())
}

fn record(traj: &mut Trajectory, t: f64, psi: &StateVector) -> Result<()> {
    let norm = psi.norm_sqr();
    if !norm.is_finite() {
        return Err(Error::NumericalFailure(format!("non-finite amplitude at t = {t}")));
    }
    traj.push(t, psi.pair_populations(), norm, psi.photon_mean());
    Ok(())
}

fn space_pair(psi: &StateVector, i: usize) -> usize {
    psi.space().state_of(i).pair().idx()
}

/// Runs the integrator, returning the sampled trajectory and the final state.
pub fn evolve(cfg: &SystemConfig, psi0: &StateVector, grid: &TimeGrid, tol: f64) -> Result<(Trajectory, StateVector)> {
    check_initial(cfg, psi0)?;
    grid.check_guard(cfg)?;
    let full = Generator::new(cfg)?;
    let sector = parity_sector(psi0);
    let gen = match &sector {
        Some(keep) => full.restrict(keep)?,
        None => full,
    };
    let mut stepper = Stepper::new(&gen);
    let steps = grid.steps();
    let h = grid.dt();
    let stride = grid.stride();
    let mut psi = psi0.clone();
    let mut work: Vec<C64> = match &sector {
        Some(keep) => keep.iter().map(|&i| psi0.amplitudes[i]).collect(),
        None => psi0.amplitudes.clone(),
    };
    let pair_of: Vec<usize> = match &sector {
        Some(keep) => keep.iter().map(|&i| space_pair(psi0, i)).collect(),
        None => (0..psi0.amplitudes.len()).map(|i| space_pair(psi0, i)).collect(),
    };
    let mut traj = Trajectory::default();
    record(&mut traj, grid.t_start, &psi)?;
    for s in 0..steps {
        let t = grid.t_start + s as f64 * h;
        stepper.step(t, h, &mut work);
        let mut pops = [0.0; 4];
        for (a, &p) in work.iter().zip(&pair_of) {
            pops[p] += a.norm_sqr();
        }
        for (peak, p) in traj.step_peaks.iter_mut().zip(pops) {
            *peak = peak.max(p);
        }
        let done = s + 1;
        if done % stride == 0 || done == steps {
            match &sector {
                Some(keep) => keep.iter().zip(&work).for_each(|(&i, a)| psi.amplitudes[i] = *a),
                None => psi.amplitudes.copy_from_slice(&work),
            }
            record(&mut traj, grid.t_start + done as f64 * h, &psi)?;
        }
    }
    let drift = traj.norm_drift();
    if drift > tol {
        return Err(Error::IntegrationFailure { drift, tol });
    }
    Ok((traj, psi))
}

pub fn propagate_state(cfg: &SystemConfig, psi0: &StateVector, grid: &TimeGrid, tol: f64) -> Result<Trajectory> {
    evolve(cfg, psi0, grid, tol).map(|(traj, _)| traj)
}

/// Final states for several initial states. Columns are independent and run
/// in parallel; results keep the input order.
pub fn propagate_columns(
    cfg: &SystemConfig,
    initial: &[StateVector],
    grid: &TimeGrid,
    tol: f64,
) -> Result<Vec<StateVector>> {
    let coarse = TimeGrid {
        sample_stride: Some(grid.steps()),
        ..*grid
    };
    initial
        .par_iter()
        .map(|psi0| evolve(cfg, psi0, &coarse, tol).map(|(_, psi)| psi))
        .collect()
}

/// Full propagator `U(t_end, t_start)` from the evolution of every basis ket.
pub fn propagate_unitary(cfg: &SystemConfig, grid: &TimeGrid, tol: f64) -> Result<OperatorMatrix> {
    let space = cfg.space();
    let basis: Vec<StateVector> = space
        .states()
        .map(|b| StateVector::basis(cfg.n_max, b))
        .collect::<Result<_>>()?;
    let cols = propagate_columns(cfg, &basis, grid, tol)?;
    let mut u = OperatorMatrix::zeros(space.dim());
    u.hermitian = false;
    for (c, psi) in cols.iter().enumerate() {
        for (r, amp) in psi.amplitudes.iter().enumerate() {
            u.entries[[r, c]] = *amp;
        }
    }
    let defect = u.unitarity_defect();
    if defect > tol {
        return Err(Error::IntegrationFailure { drift: defect, tol });
    }
    Ok(u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Max population change when `n_max` grows by 2.
    pub truncation_deviation: f64,
    /// Max population change when the step is halved.
    pub step_deviation: f64,
    pub max_deviation: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Reruns a trajectory at `n_max + 2` and at half the step and reports the
/// largest population deviation from the baseline.
pub fn convergence_check(cfg: &SystemConfig, psi0: &StateVector, grid: &TimeGrid, tol: f64) -> Result<ConvergenceReport> {
    let base = propagate_state(cfg, psi0, grid, DEFAULT_NORM_TOL)?;

    let bigger = cfg.clone().with_n_max(cfg.n_max + 2);
    let psi_big = embed(psi0, bigger.n_max)?;
    let wide = propagate_state(&bigger, &psi_big, grid, DEFAULT_NORM_TOL)?;

    let fine = propagate_state(cfg, psi0, &grid.refined(), DEFAULT_NORM_TOL)?;

    let truncation_deviation = base.max_population_deviation(&wide)?;
    let step_deviation = base.max_population_deviation(&fine)?;
    let max_deviation = truncation_deviation.max(step_deviation);
    Ok(ConvergenceReport {
        truncation_deviation,
        step_deviation,
        max_deviation,
        tol,
        passed: max_deviation < tol,
    })
}

/// Copies a state into a larger truncation.
pub fn embed(psi: &StateVector, n_max: usize) -> Result<StateVector> {
    if n_max < psi.n_max {
        return Err(Error::invalid("cannot embed into a smaller truncation"));
    }
    let mut out = StateVector::zeros(n_max);
    let src = psi.space();
    let dst = out.space();
    for (i, amp) in psi.amplitudes.iter().enumerate() {
        let b: BasisIndex = src.state_of(i);
        out.amplitudes[dst.index_of(b)?] = *amp;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::BasisIndex;
    use crate::model::{Envelope, ModelKind, Scheme, DEFAULT_RAMP_TIME};
    use approx::assert_abs_diff_eq;

    fn cfg(model: ModelKind, n: usize) -> SystemConfig {
        let r = Envelope::ramp(1.0, DEFAULT_RAMP_TIME).unwrap();
        SystemConfig::dispersive(100.0, 80.0, 2.0, Scheme::Two, model, [r, r], BasisIndex::new(0, 1, n)).unwrap()
    }

    #[test]
    fn grid_validation_and_guard() {
        assert!(TimeGrid::new(1.0, 1.0, 0.1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.0).is_err());
        let c = cfg(ModelKind::Collinear, 2);
        let coarse = TimeGrid::new(0.0, 10.0, 0.2 / c.max_phase_frequency()).unwrap();
        assert!(coarse.check_guard(&c).is_err());
        let ok = TimeGrid::for_config(&c, 0.0, 10.0).unwrap();
        ok.check_guard(&c).unwrap();
        assert_eq!(ok.refined().steps(), 2 * ok.steps());
    }

    #[test]
    fn zero_drive_is_stationary() {
        let mut c = cfg(ModelKind::Collinear, 2);
        c.coupling = [[0.0; 2]; 2];
        let psi0 = StateVector::basis(c.n_max, c.initial).unwrap();
        let grid = TimeGrid::for_config(&c, 0.0, 5.0).unwrap();
        let (traj, psi) = evolve(&c, &psi0, &grid, 1e-12).unwrap();
        assert_eq!(psi, psi0);
        assert!(traj.populations.iter().all(|p| p[1] == 1.0));
    }

    #[test]
    fn unnormalized_initial_state_rejected() {
        let c = cfg(ModelKind::Collinear, 2);
        let mut psi0 = StateVector::basis(c.n_max, c.initial).unwrap();
        psi0.amplitudes[0] = C64::new(0.5, 0.0);
        let grid = TimeGrid::for_config(&c, 0.0, 1.0).unwrap();
        assert!(propagate_state(&c, &psi0, &grid, 1e-8).is_err());
    }

    // Single dot, n_max = 0 kills every photon-changing process except the
    // raising of the photon number, so use n_max = 1 and zero detuning on the
    // photon-up channel: |1,0> <-> |0,1> with coupling -Omega/2 and phase
    // e^{i (Delta + w_c) t}. With Delta = -w_c the pair is resonant and
    // oscillates as cos^2(Omega t / 2).
    #[test]
    fn resonant_two_level_rabi() {
        let r = Envelope::ramp(1.0, 1e-9).unwrap();
        let mut c = SystemConfig::dispersive(100.0, -100.0 + 1e-3, 0.0, Scheme::Two, ModelKind::PerDot, [r, r], BasisIndex::new(1, 0, 0)).unwrap();
        c.coupling = [[0.4, 0.0], [0.0, 0.0]];
        c.n_max = 1;
        let psi0 = StateVector::basis(1, c.initial).unwrap();
        let grid = TimeGrid::for_config(&c, 0.0, 20.0).unwrap();
        let (traj, _) = evolve(&c, &psi0, &grid, 1e-10).unwrap();
        // detuned by 1e-3: generalized Rabi formula
        let g = 0.4_f64;
        let d = 1e-3_f64;
        let w = (g * g + d * d).sqrt();
        for (t, p) in traj.times.iter().zip(&traj.populations) {
            let want = 1.0 - (g / w).powi(2) * (w * t / 2.0).sin().powi(2);
            assert!((p[2] - want).abs() < 1e-6, "t={t}: {} vs {want}", p[2]);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let c = cfg(ModelKind::Collinear, 1);
        let psi0 = StateVector::basis(c.n_max, c.initial).unwrap();
        let f = c.max_phase_frequency();
        let run = |factor: f64| {
            let grid = TimeGrid::new(0.0, 10.0, factor / f).unwrap();
            evolve(&c, &psi0, &grid, 1e-8).unwrap().1
        };
        let reference = run(0.0125);
        let e1 = {
            let p = run(0.1);
            p.amplitudes.iter().zip(&reference.amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        };
        let e2 = {
            let p = run(0.05);
            p.amplitudes.iter().zip(&reference.amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        };
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "observed order {order} (errors {e1:.3e}, {e2:.3e})");
    }

    #[test]
    fn time_reversal() {
        let c = cfg(ModelKind::Collinear, 2);
        let psi0 = StateVector::basis(c.n_max, c.initial).unwrap();
        let fwd = TimeGrid::for_config(&c, 0.0, 60.0).unwrap();
        let (_, mid) = evolve(&c, &psi0, &fwd, 1e-8).unwrap();
        // integrate backwards by stepping with negative h
        let gen = Generator::new(&c).unwrap();
        let mut stepper = Stepper::new(&gen);
        let mut psi = mid.amplitudes.clone();
        let h = fwd.dt();
        for s in (0..fwd.steps()).rev() {
            let t = (s + 1) as f64 * h;
            stepper.step(t, -h, &mut psi);
        }
        let err = psi.iter().zip(&psi0.amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "round trip error {err:.3e}");
    }

    #[test]
    fn unitary_composition_and_columns() {
        let mut c = cfg(ModelKind::Collinear, 0);
        c.n_max = 2;
        let f = c.max_phase_frequency();
        let dt = DEFAULT_STEP_FACTOR / f;
        let u_full = propagate_unitary(&c, &TimeGrid::new(0.0, 30.0, dt).unwrap(), 1e-8).unwrap();
        let u_a = propagate_unitary(&c, &TimeGrid::new(0.0, 12.0, dt).unwrap(), 1e-8).unwrap();
        let u_b = propagate_unitary(&c, &TimeGrid::new(12.0, 30.0, dt).unwrap(), 1e-8).unwrap();
        let composed = u_b.dot(&u_a);
        let err = (&composed.entries - &u_full.entries).iter().fold(0.0_f64, |m, x| m.max(x.norm()));
        assert!(err < 1e-7, "composition error {err:.3e}");
        assert!(u_full.unitarity_defect() < 1e-8);

        let grid = TimeGrid::new(0.0, 30.0, dt).unwrap();
        for (col, b) in c.space().states().enumerate().step_by(3) {
            let (_, psi) = evolve(&c, &StateVector::basis(c.n_max, b).unwrap(), &grid, 1e-8).unwrap();
            for (r, amp) in psi.amplitudes.iter().enumerate() {
                assert_abs_diff_eq!((amp - u_full.entries[[r, col]]).norm(), 0.0, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn zero_drive_unitary_is_identity() {
        let mut c = cfg(ModelKind::Collinear, 0);
        c.coupling = [[0.0; 2]; 2];
        c.n_max = 1;
        let u = propagate_unitary(&c, &TimeGrid::for_config(&c, 0.0, 2.0).unwrap(), 1e-12).unwrap();
        assert_eq!(u.entries, OperatorMatrix::identity(c.dim()).entries);
    }

    #[test]
    fn convergence_rejects_bad_truncation() {
        let c = cfg(ModelKind::PerDot, 2).with_n_max(1);
        let psi0 = StateVector::basis(1, BasisIndex::new(0, 1, 1)).unwrap();
        let grid = TimeGrid::for_config(&c, 0.0, 1.0).unwrap();
        assert!(convergence_check(&c, &psi0, &grid, 1e-4).is_err());
        assert!(StateVector::basis(1, BasisIndex::new(0, 1, 2)).is_err());
    }

    #[test]
    fn embed_preserves_amplitudes() {
        let psi = StateVector::basis(2, BasisIndex::new(1, 0, 2)).unwrap();
        let big = embed(&psi, 5).unwrap();
        assert_eq!(big.amplitude(BasisIndex::new(1, 0, 2)).unwrap(), C64::new(1.0, 0.0));
        assert!(embed(&big, 2).is_err());
    }
}
