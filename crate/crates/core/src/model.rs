//! Physical parameters and Hamiltonian assembly.
//!
//! Units: `hbar = 1` and the peak amplitude of laser 1 is the frequency unit,
//! so times are measured in inverse peak couplings.
//!
//! Three Hamiltonian variants are provided:
//!
//! * [`ModelKind::Lab`]: `w_c a^dag a + sum_j w_j1 s_j11 + H_I(t)` with the
//!   drive phases `e^{i w_k t}`.
//! * [`ModelKind::Collinear`]: the interaction picture of the lab Hamiltonian
//!   with respect to its free part. Every laser couples to every dot.
//! * [`ModelKind::PerDot`]: the collinear Hamiltonian with only the `k == j`
//!   couplings kept.
//!
//! The dense builders (`hamiltonian_*`) assemble operators from
//! [`crate::fockspace`] ladder and transition matrices. Time stepping uses the
//! sparse [`Generator`] instead, which is checked elementwise against the
//! dense route in the tests.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{annihilation, creation, dot_transition, BasisIndex, Dot, FockSpace, OperatorMatrix};

/// Ratio of the dot-1 exciton frequency to the cavity frequency used when no
/// absolute frequency is given. Only the lab-frame builder is sensitive to it.
pub const DEFAULT_EXCITON_OVER_CAVITY: f64 = 20.0;

/// Default sin^2 turn-on time for continuous-wave drives.
pub const DEFAULT_RAMP_TIME: f64 = 50.0;

/// Guard band around the poles `Delta = +-w_c` of the closed-form results.
pub const POLE_GUARD: f64 = 1e-6;

/// `Omega_jk = g_c g_L / nu` for a dot coupled through an off-resonant
/// intermediate level.
pub fn effective_coupling(g_c: f64, g_l: f64, nu: f64) -> Result<f64> {
    if nu == 0.0 {
        return Err(Error::DivisionByZero("intermediate-state detuning nu is zero".into()));
    }
    Ok(g_c * g_l / nu)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeShape {
    /// `peak * sin^2(pi t / (2 ramp_time))` on `[0, ramp_time]`, `peak`
    /// afterwards and zero before `t = 0`.
    Ramp { peak: f64, ramp_time: f64 },
    /// `peak * exp(-(t - center)^2 / (2 width^2))`.
    Gaussian { peak: f64, center: f64, width: f64 },
}

/// Time-dependent complex amplitude of one laser.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub shape: EnvelopeShape,
    /// Complex prefactor, e.g. `beta * e^{i pi}`.
    pub scale: C64,
}

impl Envelope {
    pub fn ramp(peak: f64, ramp_time: f64) -> Result<Self> {
        let env = Self {
            shape: EnvelopeShape::Ramp { peak, ramp_time },
            scale: C64::new(1.0, 0.0),
        };
        env.validate()?;
        Ok(env)
    }

    pub fn gaussian(peak: f64, center: f64, width: f64) -> Result<Self> {
        let env = Self {
            shape: EnvelopeShape::Gaussian { peak, center, width },
            scale: C64::new(1.0, 0.0),
        };
        env.validate()?;
        Ok(env)
    }

    pub fn with_scale(mut self, scale: C64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.shape {
            EnvelopeShape::Ramp { peak, ramp_time } => {
                if !(ramp_time > 0.0) {
                    return Err(Error::invalid(format!("ramp_time must be > 0, got {ramp_time}")));
                }
                if !peak.is_finite() {
                    return Err(Error::invalid("ramp peak must be finite"));
                }
            }
            EnvelopeShape::Gaussian { peak, center, width } => {
                if !(width > 0.0) {
                    return Err(Error::invalid(format!("gaussian width must be > 0, got {width}")));
                }
                if !peak.is_finite() || !center.is_finite() {
                    return Err(Error::invalid("gaussian peak and center must be finite"));
                }
            }
        }
        if !(self.scale.re.is_finite() && self.scale.im.is_finite()) {
            return Err(Error::invalid("envelope scale must be finite"));
        }
        Ok(())
    }

    /// Peak modulus `|peak * scale|`.
    pub fn peak_modulus(&self) -> f64 {
        let peak = match self.shape {
            EnvelopeShape::Ramp { peak, .. } | EnvelopeShape::Gaussian { peak, .. } => peak,
        };
        peak.abs() * self.scale.norm()
    }

    pub fn eval(&self, t: f64) -> C64 {
        let real = match self.shape {
            EnvelopeShape::Ramp { peak, ramp_time } => {
                if t < 0.0 {
                    0.0
                } else if t <= ramp_time {
                    peak * (PI * t / (2.0 * ramp_time)).sin().powi(2)
                } else {
                    peak
                }
            }
            EnvelopeShape::Gaussian { peak, center, width } => {
                let x = (t - center) / width;
                peak * (-0.5 * x * x).exp()
            }
        };
        self.scale * real
    }
}

/// Validating evaluation of an envelope.
pub fn envelope_eval(env: &Envelope, t: f64) -> Result<C64> {
    env.validate()?;
    Ok(env.eval(t))
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DotParams {
    /// Exciton frequency `w_j1`; the ground level is the energy zero.
    pub omega_1: f64,
}

/// How a laser frequency is specified. The other representation is derived.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaserDetuning {
    /// Absolute angular frequency `w_k`.
    Absolute(f64),
    /// Detuning `Delta_kk = w_k - w_k1` from the dot with the same index.
    Diagonal(f64),
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    pub detuning: LaserDetuning,
    pub envelope: Envelope,
    /// Extra phase in radians, applied on top of the envelope scale.
    #[serde(default)]
    pub phase: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `Delta_11 = -Delta_22`: drives `|00,n> <-> |11,n>`.
    One,
    /// `Delta_11 = Delta_22`: drives `|01,n> <-> |10,n>`.
    Two,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Collinear,
    PerDot,
    Lab,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub omega_c: f64,
    pub dots: [DotParams; 2],
    pub lasers: [LaserParams; 2],
    /// Base couplings `Omega_jk`, indexed `[dot][laser]`. The instantaneous
    /// coupling is `coupling[j][k] * envelope_k(t) * e^{i phase_k}`.
    pub coupling: [[f64; 2]; 2],
    /// Splitting parameter with `delta = alpha (w_c - Delta)`, when the dots
    /// were placed through it.
    pub alpha: Option<f64>,
    pub scheme: Scheme,
    pub model: ModelKind,
    pub n_max: usize,
    pub initial: BasisIndex,
}

impl SystemConfig {
    /// Standard two-laser configuration parametrized by the common detuning
    /// `delta_common` and splitting parameter `alpha`.
    ///
    /// Scheme 2 sets `Delta_11 = Delta_22 = Delta`; scheme 1 sets
    /// `Delta_11 = Delta`, `Delta_22 = -Delta`. Both lasers get unit couplings
    /// to both dots and the given envelopes. `n_max` defaults to
    /// `initial.n + 6`.
    pub fn dispersive(
        omega_c: f64,
        delta_common: f64,
        alpha: f64,
        scheme: Scheme,
        model: ModelKind,
        envelopes: [Envelope; 2],
        initial: BasisIndex,
    ) -> Result<Self> {
        let split = alpha * (omega_c - delta_common);
        let omega_11 = DEFAULT_EXCITON_OVER_CAVITY * omega_c;
        let (d1, d2) = match scheme {
            Scheme::Two => (delta_common, delta_common),
            Scheme::One => (delta_common, -delta_common),
        };
        let cfg = Self {
            omega_c,
            dots: [DotParams { omega_1: omega_11 }, DotParams { omega_1: omega_11 - split }],
            lasers: [
                LaserParams {
                    detuning: LaserDetuning::Diagonal(d1),
                    envelope: envelopes[0],
                    phase: 0.0,
                },
                LaserParams {
                    detuning: LaserDetuning::Diagonal(d2),
                    envelope: envelopes[1],
                    phase: 0.0,
                },
            ],
            coupling: [[1.0, 1.0], [1.0, 1.0]],
            alpha: Some(alpha),
            scheme,
            model,
            n_max: initial.n + 6,
            initial,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_model(mut self, model: ModelKind) -> Self {
        self.model = model;
        self
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_initial(mut self, initial: BasisIndex) -> Self {
        self.initial = initial;
        self
    }

    pub fn space(&self) -> FockSpace {
        FockSpace::new(self.n_max)
    }

    pub fn dim(&self) -> usize {
        self.space().dim()
    }

    /// Dot splitting `delta = w_11 - w_21`.
    pub fn dot_splitting(&self) -> f64 {
        self.dots[0].omega_1 - self.dots[1].omega_1
    }

    /// Absolute laser frequency `w_k` (0-based `k`).
    pub fn laser_frequency(&self, k: usize) -> f64 {
        match self.lasers[k].detuning {
            LaserDetuning::Absolute(w) => w,
            LaserDetuning::Diagonal(d) => d + self.dots[k].omega_1,
        }
    }

    /// `Delta_jk = w_k - w_j1` with 0-based indices.
    pub fn detuning_idx(&self, j: usize, k: usize) -> f64 {
        self.laser_frequency(k) - self.dots[j].omega_1
    }

    /// Common diagonal detuning when `Delta_11 == |Delta_22|`, else `Delta_11`.
    pub fn common_detuning(&self) -> f64 {
        self.detuning_idx(0, 0)
    }

    /// Instantaneous complex coupling `Omega_jk(t)` (0-based indices).
    pub fn coupling_at(&self, j: usize, k: usize, t: f64) -> C64 {
        let laser = &self.lasers[k];
        self.coupling[j][k] * laser.envelope.eval(t) * C64::from_polar(1.0, laser.phase)
    }

    /// Whether the current model keeps the `(j, k)` coupling.
    pub fn keeps(&self, j: usize, k: usize) -> bool {
        match self.model {
            ModelKind::PerDot => j == k,
            ModelKind::Collinear | ModelKind::Lab => true,
        }
    }

    /// Largest phase frequency appearing in the Hamiltonian of the active
    /// model. The time step guard is expressed relative to it.
    pub fn max_phase_frequency(&self) -> f64 {
        match self.model {
            ModelKind::Collinear | ModelKind::PerDot => {
                let mut worst = 0.0_f64;
                for j in 0..2 {
                    for k in 0..2 {
                        if self.keeps(j, k) {
                            worst = worst.max(self.detuning_idx(j, k).abs());
                        }
                    }
                }
                worst + self.omega_c.abs()
            }
            ModelKind::Lab => {
                let laser = (0..2).map(|k| self.laser_frequency(k).abs()).fold(0.0, f64::max);
                let (lo, hi) = self.space().states().map(|b| self.free_energy(b)).fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), e| (lo.min(e), hi.max(e)),
                );
                laser + (hi - lo)
            }
        }
    }

    /// Eigenvalue of `w_c a^dag a + sum_j w_j1 s_j11` on a basis ket.
    pub fn free_energy(&self, b: BasisIndex) -> f64 {
        self.omega_c * b.n as f64 + b.q1 as f64 * self.dots[0].omega_1 + b.q2 as f64 * self.dots[1].omega_1
    }

    /// Checks every physical field. Error messages name the offending key.
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("`{name}` must be finite, got {v}")))
            }
        };
        finite("omega_c", self.omega_c)?;
        if self.omega_c <= 0.0 {
            return Err(Error::Config(format!("`omega_c` must be > 0, got {}", self.omega_c)));
        }
        for (j, d) in self.dots.iter().enumerate() {
            finite(&format!("dots[{j}].omega_1"), d.omega_1)?;
        }
        for (k, l) in self.lasers.iter().enumerate() {
            l.envelope
                .validate()
                .map_err(|e| Error::Config(format!("`lasers[{k}].envelope`: {e}")))?;
            finite(&format!("lasers[{k}].phase"), l.phase)?;
        }
        for j in 0..2 {
            for k in 0..2 {
                finite(&format!("coupling[{j}][{k}]"), self.coupling[j][k])?;
            }
        }
        let d11 = self.detuning_idx(0, 0);
        let d22 = self.detuning_idx(1, 1);
        for (name, d) in [("delta (laser 1)", d11), ("delta (laser 2)", d22)] {
            if (d.abs() - self.omega_c).abs() < POLE_GUARD {
                return Err(Error::Config(format!(
                    "`{name}` = {d} sits on the pole |Delta| = omega_c"
                )));
            }
        }
        let tol = 1e-9 * (1.0 + d11.abs());
        match self.scheme {
            Scheme::Two if (d11 - d22).abs() > tol => {
                return Err(Error::Config(format!(
                    "`scheme` = 2 requires Delta_11 == Delta_22, got {d11} and {d22}"
                )))
            }
            Scheme::One if (d11 + d22).abs() > tol => {
                return Err(Error::Config(format!(
                    "`scheme` = 1 requires Delta_11 == -Delta_22, got {d11} and {d22}"
                )))
            }
            _ => {}
        }
        if self.initial.n > self.n_max {
            return Err(Error::Config(format!(
                "`n_max` = {} is below the initial photon number {}",
                self.n_max, self.initial.n
            )));
        }
        if self.initial.q1 > 1 || self.initial.q2 > 1 {
            return Err(Error::Config("`initial` dot levels must be 0 or 1".into()));
        }
        Ok(())
    }
}

/// `Delta_jk` for 1-based dot `j` and laser `k`.
pub fn detuning(cfg: &SystemConfig, j: i64, k: i64) -> Result<f64> {
    let j = Dot::from_number(j)?.idx();
    let k = Dot::from_number(k).map_err(|_| Error::invalid("laser index must be 1 or 2"))?.idx();
    Ok(cfg.detuning_idx(j, k))
}

fn require_model(cfg: &SystemConfig, want: ModelKind) -> Result<()> {
    if cfg.model != want {
        return Err(Error::invalid(format!(
            "config model is {:?}, builder expects {:?}",
            cfg.model, want
        )));
    }
    Ok(())
}

fn rotating_from_operators(cfg: &SystemConfig, t: f64, keep: impl Fn(usize, usize) -> bool) -> Result<OperatorMatrix> {
    let n_max = cfg.n_max;
    let a = annihilation(n_max);
    let ad = creation(n_max);
    let mut half = OperatorMatrix::zeros(cfg.dim());
    for j in 0..2 {
        let lower = dot_transition(j as i64 + 1, 0, 1, n_max)?;
        let raise_photon = ad.dot(&lower);
        let lower_photon = lower.dot(&a);
        for k in 0..2 {
            if !keep(j, k) {
                continue;
            }
            let omega = cfg.coupling_at(j, k, t);
            let d = cfg.detuning_idx(j, k);
            let up = omega * -0.5 * C64::from_polar(1.0, (d + cfg.omega_c) * t);
            let down = omega * -0.5 * C64::from_polar(1.0, (d - cfg.omega_c) * t);
            half = &half + &raise_photon.scaled(up);
            half = &half + &lower_photon.scaled(down);
        }
    }
    Ok(half.plus_adjoint())
}

/// Rotating-frame Hamiltonian with every laser acting on every dot.
pub fn hamiltonian_rotating(cfg: &SystemConfig, t: f64) -> Result<OperatorMatrix> {
    require_model(cfg, ModelKind::Collinear)?;
    rotating_from_operators(cfg, t, |_, _| true)
}

/// Rotating-frame Hamiltonian where dot `j` only sees laser `j`.
pub fn hamiltonian_per_dot(cfg: &SystemConfig, t: f64) -> Result<OperatorMatrix> {
    require_model(cfg, ModelKind::PerDot)?;
    rotating_from_operators(cfg, t, |j, k| j == k)
}

/// Lab-frame Hamiltonian `w_c a^dag a + sum_j w_j1 s_j11 + H_I(t)`.
pub fn hamiltonian_lab(cfg: &SystemConfig, t: f64) -> Result<OperatorMatrix> {
    require_model(cfg, ModelKind::Lab)?;
    let n_max = cfg.n_max;
    let a = annihilation(n_max);
    let ad = creation(n_max);
    let mut half = OperatorMatrix::zeros(cfg.dim());
    for j in 0..2 {
        let lower = dot_transition(j as i64 + 1, 0, 1, n_max)?;
        let both = &ad.dot(&lower) + &lower.dot(&a);
        for k in 0..2 {
            let c = cfg.coupling_at(j, k, t) * -0.5 * C64::from_polar(1.0, cfg.laser_frequency(k) * t);
            half = &half + &both.scaled(c);
        }
    }
    let mut h = half.plus_adjoint();
    let number = ad.dot(&a);
    let mut free = number.scaled(C64::new(cfg.omega_c, 0.0));
    for j in 0..2 {
        let proj = dot_transition(j as i64 + 1, 1, 1, n_max)?;
        free = &free + &proj.scaled(C64::new(cfg.dots[j].omega_1, 0.0));
    }
    // free part is real diagonal, so the sum stays exactly Hermitian
    free.hermitian = true;
    h = &h + &free;
    Ok(h)
}

/// Dispatch on `cfg.model`.
pub fn hamiltonian(cfg: &SystemConfig, t: f64) -> Result<OperatorMatrix> {
    match cfg.model {
        ModelKind::Collinear => hamiltonian_rotating(cfg, t),
        ModelKind::PerDot => hamiltonian_per_dot(cfg, t),
        ModelKind::Lab => hamiltonian_lab(cfg, t),
    }
}

/// One phase-carrying contribution to a channel coefficient.
#[derive(Copy, Clone, Debug)]
struct ChannelTerm {
    laser: usize,
    /// `-Omega_jk e^{i phase_k} / 2` (envelope excluded).
    amp: C64,
    freq: f64,
}

/// A fixed sparsity pattern (at most one entry per row and per column)
/// multiplied by a time-dependent coefficient; its adjoint is added
/// implicitly.
#[derive(Clone, Debug)]
struct Channel {
    entries: Vec<(usize, usize, f64)>,
    terms: Vec<ChannelTerm>,
}

/// Sparse representation of `H(t)` used by the integrators.
///
/// `H(t) = diag + sum_c (coef_c(t) P_c + conj(coef_c(t)) P_c^T)`.
#[derive(Clone, Debug)]
pub struct Generator {
    dim: usize,
    channels: Vec<Channel>,
    diag: Vec<f64>,
    lasers: [Envelope; 2],
    max_entry: f64,
}

/// Channel coefficients at one instant (or a weighted combination of
/// instants).
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub channel: Vec<C64>,
    pub diag_weight: f64,
}

impl Generator {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let space = cfg.space();
        let mut channels = Vec::new();
        for (j, dot) in Dot::BOTH.into_iter().enumerate() {
            // a^dag s_j01 (photon up) and s_j01 a (photon down)
            for photon_up in [true, false] {
                let mut entries = Vec::new();
                for (col, ket) in space.states().enumerate() {
                    if ket.dot(dot) != 1 {
                        continue;
                    }
                    let lowered = ket.with_dot(dot, 0);
                    let (n_new, factor) = if photon_up {
                        (ket.n + 1, ((ket.n + 1) as f64).sqrt())
                    } else {
                        if ket.n == 0 {
                            continue;
                        }
                        (ket.n - 1, (ket.n as f64).sqrt())
                    };
                    if n_new > cfg.n_max {
                        continue;
                    }
                    let row = space.index_of(BasisIndex { n: n_new, ..lowered })?;
                    entries.push((row, col, factor));
                }
                let mut terms = Vec::new();
                for k in 0..2 {
                    if !cfg.keeps(j, k) || cfg.coupling[j][k] == 0.0 {
                        continue;
                    }
                    let amp = -0.5 * cfg.coupling[j][k] * C64::from_polar(1.0, cfg.lasers[k].phase);
                    let freq = match cfg.model {
                        ModelKind::Lab => cfg.laser_frequency(k),
                        _ if photon_up => cfg.detuning_idx(j, k) + cfg.omega_c,
                        _ => cfg.detuning_idx(j, k) - cfg.omega_c,
                    };
                    terms.push(ChannelTerm { laser: k, amp, freq });
                }
                if !terms.is_empty() && !entries.is_empty() {
                    channels.push(Channel { entries, terms });
                }
            }
        }
        let diag = match cfg.model {
            ModelKind::Lab => space.states().map(|b| cfg.free_energy(b)).collect(),
            _ => vec![0.0; space.dim()],
        };
        Ok(Self {
            dim: space.dim(),
            channels,
            diag,
            lasers: [cfg.lasers[0].envelope, cfg.lasers[1].envelope],
            max_entry: (cfg.n_max.max(1) as f64).sqrt(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_diagonal(&self) -> bool {
        self.diag.iter().any(|d| *d != 0.0)
    }

    pub fn coefficients(&self, t: f64) -> Coefficients {
        let phasors: Vec<C64> = self.phase_frequencies().map(|f| C64::from_polar(1.0, f * t)).collect();
        self.coefficients_with(t, &phasors)
    }

    /// Frequencies of every phase-carrying term, in the order expected by
    /// [`Generator::coefficients_with`].
    pub(crate) fn phase_frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.channels.iter().flat_map(|ch| ch.terms.iter().map(|t| t.freq))
    }

    /// Coefficients at `t` with the phase factors `e^{i f t}` supplied by the
    /// caller (the integrator advances them by recurrence).
    pub(crate) fn coefficients_with(&self, t: f64, phasors: &[C64]) -> Coefficients {
        let mut out = Coefficients {
            channel: vec![C64::new(0.0, 0.0); self.channels.len()],
            diag_weight: 1.0,
        };
        self.coefficients_into(t, phasors, &mut out);
        out
    }

    /// Allocation-free form of [`Generator::coefficients_with`].
    pub(crate) fn coefficients_into(&self, t: f64, phasors: &[C64], out: &mut Coefficients) {
        let env = [self.lasers[0].eval(t), self.lasers[1].eval(t)];
        let mut phase = phasors.iter();
        for (ch, slot) in self.channels.iter().zip(out.channel.iter_mut()) {
            *slot = ch
                .terms
                .iter()
                .zip(phase.by_ref())
                .map(|(term, p)| term.amp * env[term.laser] * p)
                .sum();
        }
        out.diag_weight = 1.0;
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Generator acting on the span of `keep` (indices into the full basis,
    /// in the order given). Every coupling must stay inside or outside the
    /// subset.
    pub fn restrict(&self, keep: &[usize]) -> Result<Generator> {
        let mut pos = vec![usize::MAX; self.dim];
        for (i, &k) in keep.iter().enumerate() {
            if k >= self.dim || pos[k] != usize::MAX {
                return Err(Error::invalid(format!("bad subspace index {k}")));
            }
            pos[k] = i;
        }
        let mut channels = Vec::with_capacity(self.channels.len());
        for ch in &self.channels {
            let mut entries = Vec::new();
            for &(row, col, f) in &ch.entries {
                match (pos[row], pos[col]) {
                    (usize::MAX, usize::MAX) => {}
                    (r, c) if r != usize::MAX && c != usize::MAX => entries.push((r, c, f)),
                    _ => return Err(Error::invalid("subspace is not invariant under the generator")),
                }
            }
            channels.push(Channel {
                entries,
                terms: ch.terms.clone(),
            });
        }
        Ok(Generator {
            dim: keep.len(),
            channels,
            diag: keep.iter().map(|&k| self.diag[k]).collect(),
            lasers: self.lasers,
            max_entry: self.max_entry,
        })
    }

    /// `sum_i w_i coef(t_i)`, with the static diagonal weighted by `sum_i w_i`.
    pub fn combine(&self, parts: &[(f64, &Coefficients)]) -> Coefficients {
        let mut channel = vec![C64::new(0.0, 0.0); self.channels.len()];
        let mut diag_weight = 0.0;
        for (w, c) in parts {
            for (acc, v) in channel.iter_mut().zip(&c.channel) {
                *acc += *v * *w;
            }
            diag_weight += w * c.diag_weight;
        }
        Coefficients { channel, diag_weight }
    }

    /// Upper bound on the operator norm of the generator for `coef`.
    pub fn norm_bound(&self, coef: &Coefficients) -> f64 {
        let off: f64 = coef.channel.iter().map(|c| c.norm()).sum::<f64>() * 2.0 * self.max_entry;
        let diag = self.diag.iter().fold(0.0_f64, |m, d| m.max(d.abs())) * coef.diag_weight.abs();
        off + diag
    }

    /// `out = H psi` for the operator described by `coef`.
    pub fn apply(&self, coef: &Coefficients, psi: &[C64], out: &mut [C64]) {
        debug_assert_eq!(psi.len(), self.dim);
        if coef.diag_weight != 0.0 && self.has_diagonal() {
            for ((o, d), p) in out.iter_mut().zip(&self.diag).zip(psi) {
                *o = *p * (*d * coef.diag_weight);
            }
        } else {
            out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        }
        for (ch, c) in self.channels.iter().zip(&coef.channel) {
            let cc = c.conj();
            for &(row, col, f) in &ch.entries {
                out[row] += *c * f * psi[col];
                out[col] += cc * f * psi[row];
            }
        }
    }

    /// Dense matrix for `coef`; used to cross-check the sparse route.
    pub fn to_dense(&self, coef: &Coefficients) -> OperatorMatrix {
        let mut op = OperatorMatrix::zeros(self.dim);
        for (i, d) in self.diag.iter().enumerate() {
            op.entries[[i, i]] += C64::new(*d * coef.diag_weight, 0.0);
        }
        for (ch, c) in self.channels.iter().zip(&coef.channel) {
            for &(row, col, f) in &ch.entries {
                op.entries[[row, col]] += *c * f;
                op.entries[[col, row]] += c.conj() * f;
            }
        }
        op
    }
}
