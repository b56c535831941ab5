//! Truncated product space of two two-level dots and one cavity mode.
//!
//! Basis kets are `|q1 q2, n>` with `q1, q2 ∈ {0, 1}` and `0 <= n <= n_max`.
//! The flat ordering is lexicographic in `(q1, q2, n)`:
//!
//! ```text
//! index = (2 * q1 + q2) * (n_max + 1) + n
//! ```
//!
//! This ordering is part of the on-disk contract and must not change.

use std::fmt;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hilbert-space dimension `4 * (n_max + 1)`.
pub fn dim(n_max: i64) -> Result<usize> {
    if n_max < 0 {
        return Err(Error::invalid(format!("n_max must be >= 0, got {n_max}")));
    }
    Ok(4 * (n_max as usize + 1))
}

/// Label of a single basis ket `|q1 q2, n>`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisIndex {
    pub q1: u8,
    pub q2: u8,
    pub n: usize,
}

impl BasisIndex {
    pub fn new(q1: u8, q2: u8, n: usize) -> Self {
        Self { q1, q2, n }
    }

    /// Level of dot `j` (1 or 2).
    pub fn dot(&self, j: Dot) -> u8 {
        match j {
            Dot::One => self.q1,
            Dot::Two => self.q2,
        }
    }

    pub fn with_dot(mut self, j: Dot, level: u8) -> Self {
        match j {
            Dot::One => self.q1 = level,
            Dot::Two => self.q2 = level,
        }
        self
    }

    pub fn pair(&self) -> DotPair {
        DotPair::from_levels(self.q1, self.q2)
    }
}

impl fmt::Display for BasisIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}{},{}>", self.q1, self.q2, self.n)
    }
}

/// Dot label.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dot {
    One,
    Two,
}

impl Dot {
    pub const BOTH: [Dot; 2] = [Dot::One, Dot::Two];

    /// Parse a 1-based dot number.
    pub fn from_number(j: i64) -> Result<Self> {
        match j {
            1 => Ok(Dot::One),
            2 => Ok(Dot::Two),
            _ => Err(Error::invalid(format!("dot index must be 1 or 2, got {j}"))),
        }
    }

    pub fn idx(self) -> usize {
        match self {
            Dot::One => 0,
            Dot::Two => 1,
        }
    }
}

/// Joint dot configuration, summed over photon number.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DotPair {
    P00,
    P01,
    P10,
    P11,
}

impl DotPair {
    pub const ALL: [DotPair; 4] = [DotPair::P00, DotPair::P01, DotPair::P10, DotPair::P11];

    pub fn from_levels(q1: u8, q2: u8) -> Self {
        match (q1, q2) {
            (0, 0) => DotPair::P00,
            (0, _) => DotPair::P01,
            (_, 0) => DotPair::P10,
            _ => DotPair::P11,
        }
    }

    /// Position in the computational basis `{00, 01, 10, 11}`.
    pub fn idx(self) -> usize {
        match self {
            DotPair::P00 => 0,
            DotPair::P01 => 1,
            DotPair::P10 => 2,
            DotPair::P11 => 3,
        }
    }

    pub fn levels(self) -> (u8, u8) {
        match self {
            DotPair::P00 => (0, 0),
            DotPair::P01 => (0, 1),
            DotPair::P10 => (1, 0),
            DotPair::P11 => (1, 1),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DotPair::P00 => "P00",
            DotPair::P01 => "P01",
            DotPair::P10 => "P10",
            DotPair::P11 => "P11",
        }
    }
}

impl std::str::FromStr for DotPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches(['P', 'p']) {
            "00" => Ok(DotPair::P00),
            "01" => Ok(DotPair::P01),
            "10" => Ok(DotPair::P10),
            "11" => Ok(DotPair::P11),
            _ => Err(Error::invalid(format!("unknown population channel `{s}`"))),
        }
    }
}

/// The truncated space for a fixed `n_max`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct FockSpace {
    n_max: usize,
}

impl FockSpace {
    pub fn new(n_max: usize) -> Self {
        Self { n_max }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        4 * (self.n_max + 1)
    }

    pub fn index_of(&self, b: BasisIndex) -> Result<usize> {
        if b.q1 > 1 || b.q2 > 1 {
            return Err(Error::invalid(format!("dot levels must be 0 or 1, got {b}")));
        }
        if b.n > self.n_max {
            return Err(Error::invalid(format!(
                "photon number {} exceeds truncation n_max = {}",
                b.n, self.n_max
            )));
        }
        Ok((2 * b.q1 as usize + b.q2 as usize) * (self.n_max + 1) + b.n)
    }

    /// Inverse of [`FockSpace::index_of`]. Panics if `i >= dim`.
    pub fn state_of(&self, i: usize) -> BasisIndex {
        assert!(i < self.dim(), "flat index {i} out of range");
        let levels = self.n_max + 1;
        let pair = i / levels;
        BasisIndex {
            q1: (pair / 2) as u8,
            q2: (pair % 2) as u8,
            n: i % levels,
        }
    }

    pub fn states(&self) -> impl Iterator<Item = BasisIndex> + '_ {
        (0..self.dim()).map(move |i| self.state_of(i))
    }
}

/// Complex amplitudes over the flat basis of a [`FockSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
    pub n_max: usize,
}

impl StateVector {
    pub fn zeros(n_max: usize) -> Self {
        let space = FockSpace::new(n_max);
        Self {
            amplitudes: vec![C64::new(0.0, 0.0); space.dim()],
            n_max,
        }
    }

    pub fn basis(n_max: usize, b: BasisIndex) -> Result<Self> {
        let mut psi = Self::zeros(n_max);
        let i = psi.space().index_of(b)?;
        psi.amplitudes[i] = C64::new(1.0, 0.0);
        Ok(psi)
    }

    /// Normalized superposition of `(amplitude, ket)` pairs.
    pub fn superposition(n_max: usize, terms: &[(C64, BasisIndex)]) -> Result<Self> {
        let mut psi = Self::zeros(n_max);
        for (c, b) in terms {
            let i = psi.space().index_of(*b)?;
            psi.amplitudes[i] += *c;
        }
        let norm = psi.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("superposition has zero norm"));
        }
        psi.amplitudes.iter_mut().for_each(|c| *c /= norm);
        Ok(psi)
    }

    pub fn space(&self) -> FockSpace {
        FockSpace::new(self.n_max)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn amplitude(&self, b: BasisIndex) -> Result<C64> {
        Ok(self.amplitudes[self.space().index_of(b)?])
    }

    /// Sum of `|amplitude|^2` over kets matching `filter`.
    pub fn population<F>(&self, filter: F) -> f64
    where
        F: Fn(BasisIndex) -> bool,
    {
        let space = self.space();
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| filter(space.state_of(*i)))
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    /// Populations `[P00, P01, P10, P11]`, each summed over photon number.
    pub fn pair_populations(&self) -> [f64; 4] {
        let levels = self.n_max + 1;
        let mut out = [0.0; 4];
        for (block, p) in out.iter_mut().enumerate() {
            *p = self.amplitudes[block * levels..(block + 1) * levels]
                .iter()
                .map(|c| c.norm_sqr())
                .sum();
        }
        out
    }

    /// `<a^dag a>`.
    pub fn photon_mean(&self) -> f64 {
        let levels = self.n_max + 1;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, c)| (i % levels) as f64 * c.norm_sqr())
            .sum()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Population filter matching one joint dot configuration, any photon number.
pub fn pair_filter(pair: DotPair) -> impl Fn(BasisIndex) -> bool {
    let (q1, q2) = pair.levels();
    move |b: BasisIndex| b.q1 == q1 && b.q2 == q2
}

/// Dense operator on the truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub entries: Array2<C64>,
    /// Set when the constructor guarantees `entries == entries^dag` exactly.
    pub hermitian: bool,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: Array2::zeros((dim, dim)),
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: Array2::eye(dim),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.t().mapv(|c| c.conj()),
            hermitian: self.hermitian,
        }
    }

    pub fn dot(&self, rhs: &OperatorMatrix) -> Self {
        Self {
            entries: self.entries.dot(&rhs.entries),
            hermitian: false,
        }
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        assert_eq!(self.dim(), psi.amplitudes.len(), "dimension mismatch");
        let amplitudes = self
            .entries
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&psi.amplitudes).map(|(h, c)| h * c).sum())
            .collect();
        StateVector {
            amplitudes,
            n_max: psi.n_max,
        }
    }

    pub fn expectation(&self, psi: &StateVector) -> C64 {
        psi.inner(&self.apply(psi))
    }

    /// `max |H - H^dag|` over all entries.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for r in 0..n {
            for c in 0..n {
                worst = worst.max((self.entries[[r, c]] - self.entries[[c, r]].conj()).norm());
            }
        }
        worst
    }

    /// `max |U^dag U - I|` over all entries.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.adjoint().dot(self);
        let n = self.dim();
        let mut worst = 0.0_f64;
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((prod.entries[[r, c]] - target).norm());
            }
        }
        worst
    }

    /// Returns `self + self^dag`, which is Hermitian by construction.
    pub fn plus_adjoint(&self) -> Self {
        let sum = &self.entries + &self.entries.t().mapv(|c| c.conj());
        Self {
            entries: sum,
            hermitian: true,
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            entries: self.entries.mapv(|c| c * s),
            hermitian: self.hermitian && s.im == 0.0,
        }
    }
}

impl std::ops::Add for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            entries: &self.entries + &rhs.entries,
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

/// Cavity annihilation operator `a`; `a|q1 q2, n> = sqrt(n) |q1 q2, n-1>`.
///
/// For `n_max = 0` this is the zero operator.
pub fn annihilation(n_max: usize) -> OperatorMatrix {
    let space = FockSpace::new(n_max);
    let mut op = OperatorMatrix::zeros(space.dim());
    op.hermitian = false;
    for (col, b) in space.states().enumerate() {
        if b.n == 0 {
            continue;
        }
        let row = space.index_of(BasisIndex { n: b.n - 1, ..b }).expect("in range");
        op.entries[[row, col]] = C64::new((b.n as f64).sqrt(), 0.0);
    }
    op
}

pub fn creation(n_max: usize) -> OperatorMatrix {
    let mut op = annihilation(n_max).adjoint();
    op.hermitian = false;
    op
}

/// `sigma_{j,ab} = |a_j><b_j|` on dot `j`, identity on the rest.
pub fn dot_transition(j: i64, a: u8, b: u8, n_max: usize) -> Result<OperatorMatrix> {
    let dot = Dot::from_number(j)?;
    if a > 1 || b > 1 {
        return Err(Error::invalid(format!("dot levels must be 0 or 1, got ({a}, {b})")));
    }
    let space = FockSpace::new(n_max);
    let mut op = OperatorMatrix::zeros(space.dim());
    op.hermitian = a == b;
    for (col, ket) in space.states().enumerate() {
        if ket.dot(dot) != b {
            continue;
        }
        let row = space.index_of(ket.with_dot(dot, a)).expect("in range");
        op.entries[[row, col]] = C64::new(1.0, 0.0);
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ket(q1: u8, q2: u8, n: usize) -> BasisIndex {
        BasisIndex::new(q1, q2, n)
    }

    #[test]
    fn dimensions() {
        assert_eq!(dim(0).unwrap(), 4);
        assert_eq!(dim(2).unwrap(), 12);
        assert_eq!(dim(10).unwrap(), 44);
        assert!(matches!(dim(-1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ordering_is_lexicographic() {
        let space = FockSpace::new(2);
        let order: Vec<_> = space.states().collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
        assert_eq!(space.index_of(ket(0, 1, 2)).unwrap(), 5);
        assert!(space.index_of(ket(0, 1, 3)).is_err());
        assert!(space.index_of(ket(2, 0, 0)).is_err());
    }

    #[test]
    fn annihilation_examples() {
        let a = annihilation(3);
        let psi = StateVector::basis(3, ket(0, 1, 2)).unwrap();
        let out = a.apply(&psi);
        assert_abs_diff_eq!(out.amplitude(ket(0, 1, 1)).unwrap().re, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(out.norm_sqr(), 2.0, epsilon = 1e-14);

        let vac = StateVector::basis(3, ket(0, 0, 0)).unwrap();
        assert_eq!(a.apply(&vac).norm_sqr(), 0.0);

        let num = creation(3).dot(&a);
        let psi = StateVector::basis(3, ket(1, 1, 3)).unwrap();
        assert_abs_diff_eq!(num.expectation(&psi).re, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn annihilation_at_zero_truncation_is_zero() {
        let a = annihilation(0);
        assert!(a.entries.iter().all(|c| *c == C64::new(0.0, 0.0)));
    }

    #[test]
    fn top_level_has_no_preimage() {
        let a = annihilation(4);
        let space = FockSpace::new(4);
        for (row, b) in space.states().enumerate() {
            if b.n == 4 {
                assert!(a.entries.row(row).iter().all(|c| c.norm() == 0.0));
            }
        }
    }

    #[test]
    fn dot_transition_examples() {
        let n_max = 2;
        let s01 = dot_transition(1, 0, 1, n_max).unwrap();
        let out = s01.apply(&StateVector::basis(n_max, ket(1, 0, 1)).unwrap());
        assert_eq!(out, StateVector::basis(n_max, ket(0, 0, 1)).unwrap());
        let out = s01.apply(&StateVector::basis(n_max, ket(0, 1, 1)).unwrap());
        assert_eq!(out.norm_sqr(), 0.0);

        let p = dot_transition(2, 1, 1, n_max).unwrap();
        let psi = StateVector::basis(n_max, ket(0, 1, 2)).unwrap();
        assert_eq!(p.apply(&psi), psi);

        assert!(dot_transition(3, 0, 1, n_max).is_err());
        assert!(dot_transition(0, 0, 1, n_max).is_err());
    }

    #[test]
    fn population_examples() {
        let n_max = 3;
        let psi = StateVector::basis(n_max, ket(0, 1, 2)).unwrap();
        assert_eq!(psi.population(pair_filter(DotPair::P01)), 1.0);
        assert_eq!(psi.population(pair_filter(DotPair::P10)), 0.0);

        let one = C64::new(1.0, 0.0);
        let psi = StateVector::superposition(n_max, &[(one, ket(0, 1, 2)), (one, ket(1, 0, 2))]).unwrap();
        assert_abs_diff_eq!(psi.population(pair_filter(DotPair::P01)), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.pair_populations()[DotPair::P10.idx()], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn sigma_algebra() {
        let n_max = 2;
        for j in 1..=2 {
            let s01 = dot_transition(j, 0, 1, n_max).unwrap();
            let s10 = dot_transition(j, 1, 0, n_max).unwrap();
            let s00 = dot_transition(j, 0, 0, n_max).unwrap();
            let s11 = dot_transition(j, 1, 1, n_max).unwrap();
            assert_eq!(s01.dot(&s10).entries, s00.entries);
            assert_eq!((&s00 + &s11).entries, OperatorMatrix::identity(dim(2).unwrap()).entries);
        }
    }

    #[test]
    fn commutator_below_truncation() {
        let n_max = 5;
        let a = annihilation(n_max);
        let ad = creation(n_max);
        assert_eq!(ad.entries, a.adjoint().entries);
        let comm = &a.dot(&ad).entries - &ad.dot(&a).entries;
        let space = FockSpace::new(n_max);
        for (r, br) in space.states().enumerate() {
            for (c, bc) in space.states().enumerate() {
                if br.n < n_max && bc.n < n_max {
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(comm[[r, c]].re, expect, epsilon = 1e-12);
                    assert_abs_diff_eq!(comm[[r, c]].im, 0.0);
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn index_round_trip(n_max in 0usize..=64, frac in 0.0f64..1.0) {
                let space = FockSpace::new(n_max);
                let i = ((space.dim() as f64) * frac) as usize;
                prop_assert_eq!(space.index_of(space.state_of(i)).unwrap(), i);
            }

            #[test]
            fn pair_populations_sum_to_norm(
                raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16)
            ) {
                let psi = StateVector {
                    amplitudes: raw.iter().map(|(r, i)| C64::new(*r, *i)).collect(),
                    n_max: 3,
                };
                let total: f64 = psi.pair_populations().iter().sum();
                prop_assert!((total - psi.norm_sqr()).abs() < 1e-12);
                for p in DotPair::ALL {
                    prop_assert!((psi.population(pair_filter(p)) - psi.pair_populations()[p.idx()]).abs() < 1e-12);
                }
            }
        }
    }
}
