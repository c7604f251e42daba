//! Minimal dense statevector simulator.
//!
//! Complex state vectors, validated unitary matrices, Kronecker products and
//! projective measurement driven by an explicit, seeded [`RandomSource`].
//!
//! Basis ordering is big-endian: in an `n`-qubit register qubit 0 is the most
//! significant bit of the basis index, so `|q0 q1 ... q(n-1)>` has index
//! `q0 * 2^(n-1) + ... + q(n-1)`.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single complex probability amplitude.
pub type Amplitude = Complex64;

/// Maximum entrywise deviation of `U†U` from the identity.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

/// Maximum deviation of a state's squared norm from one.
pub const NORM_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension must be positive")]
    EmptyDimension,
    #[error("state is not normalized: squared norm {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },
    #[error("state has zero norm and cannot be renormalized")]
    ZeroNorm,
    #[error("matrix is not unitary: max |U†U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },
    #[error("non-finite amplitude at index {index}")]
    NonFinite { index: usize },
    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("measurement subset is empty")]
    EmptySubset,
    #[error("measurement subset covers the whole basis")]
    FullSubset,
    #[error("sampled a measurement branch with zero probability")]
    ZeroProbabilityBranch,
    #[error("control and target qubit coincide ({0})")]
    QubitClash(usize),
    #[error("qubit {qubit} out of range for a {n}-qubit register")]
    QubitOutOfRange { qubit: usize, n: usize },
}

pub type Result<T> = std::result::Result<T, QsimError>;

fn check_finite(amps: &[Complex64]) -> Result<()> {
    match amps.iter().position(|a| !a.re.is_finite() || !a.im.is_finite()) {
        Some(index) => Err(QsimError::NonFinite { index }),
        None => Ok(()),
    }
}

/// A normalized complex amplitude vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl TryFrom<Vec<Complex64>> for StateVector {
    type Error = QsimError;

    fn try_from(amps: Vec<Complex64>) -> Result<Self> {
        StateVector::new(amps)
    }
}

impl From<StateVector> for Vec<Complex64> {
    fn from(state: StateVector) -> Self {
        state.amps
    }
}

impl StateVector {
    /// Builds a state, rejecting non-finite entries and vectors whose squared
    /// norm is not one within [`NORM_TOLERANCE`].
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(QsimError::EmptyDimension);
        }
        check_finite(&amps)?;
        let norm_sqr = norm_sqr(&amps);
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(QsimError::NotNormalized { norm_sqr });
        }
        Ok(Self { amps })
    }

    /// Builds a state by explicitly rescaling `amps` to unit norm.
    pub fn from_unnormalized(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(QsimError::EmptyDimension);
        }
        check_finite(&amps)?;
        let mut state = Self { amps };
        state.renormalize()?;
        Ok(state)
    }

    /// Computational basis state `|k>`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if dim == 0 {
            return Err(QsimError::EmptyDimension);
        }
        if k >= dim {
            return Err(QsimError::IndexOutOfRange { index: k, dim });
        }
        let mut amps = vec![ZERO; dim];
        amps[k] = ONE;
        Ok(Self { amps })
    }

    /// The uniform superposition over all `dim` basis states.
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(QsimError::EmptyDimension);
        }
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(Self { amps: vec![a; dim] })
    }

    /// Haar-distributed random state.
    pub fn random(dim: usize, rng: &mut RandomSource) -> Result<Self> {
        let amps = (0..dim).map(|_| gaussian_complex(rng)).collect();
        Self::from_unnormalized(amps)
    }

    pub(crate) fn from_raw_unchecked(amps: Vec<Complex64>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn amplitude(&self, k: usize) -> Result<Complex64> {
        self.amps
            .get(k)
            .copied()
            .ok_or(QsimError::IndexOutOfRange { index: k, dim: self.dim() })
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    /// Rescales to unit norm. This is the only place drift is corrected.
    pub fn renormalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if n == 0.0 || !n.is_finite() {
            return Err(QsimError::ZeroNorm);
        }
        let scale = 1.0 / n.sqrt();
        for a in &mut self.amps {
            *a *= scale;
        }
        Ok(())
    }

    /// `<self|other>`, conjugating `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        inner_raw(&self.amps, &other.amps)
    }

    /// `|<k|self>|^2`.
    pub fn outcome_probability(&self, k: usize) -> Result<f64> {
        Ok(self.amplitude(k)?.norm_sqr())
    }

    /// All outcome probabilities in basis order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector { amps }
    }

    /// Probability that a projective measurement onto `subset` succeeds.
    pub fn subset_probability(&self, subset: &[usize]) -> Result<f64> {
        let mask = self.subset_mask(subset)?;
        Ok(self
            .amps
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(a, _)| a.norm_sqr())
            .sum())
    }

    fn subset_mask(&self, subset: &[usize]) -> Result<Vec<bool>> {
        if subset.is_empty() {
            return Err(QsimError::EmptySubset);
        }
        let mut mask = vec![false; self.dim()];
        for &k in subset {
            if k >= self.dim() {
                return Err(QsimError::IndexOutOfRange { index: k, dim: self.dim() });
            }
            mask[k] = true;
        }
        if mask.iter().all(|&m| m) {
            return Err(QsimError::FullSubset);
        }
        Ok(mask)
    }

    /// Projects onto the `subset` branch (or its complement) and renormalizes,
    /// without sampling. Returns the branch probability with the state.
    pub fn project_subset(&self, subset: &[usize], outcome: SubsetOutcome) -> Result<(f64, StateVector)> {
        let mask = self.subset_mask(subset)?;
        let keep = outcome == SubsetOutcome::In;
        let amps: Vec<Complex64> = self
            .amps
            .iter()
            .zip(&mask)
            .map(|(&a, &m)| if m == keep { a } else { ZERO })
            .collect();
        let prob = norm_sqr(&amps);
        if prob == 0.0 {
            return Err(QsimError::ZeroProbabilityBranch);
        }
        let mut collapsed = StateVector { amps };
        collapsed.renormalize()?;
        Ok((prob, collapsed))
    }

    /// Samples the two-outcome measurement `{P_subset, I - P_subset}`.
    pub fn measure_subset(&self, subset: &[usize], rng: &mut RandomSource) -> Result<Measurement> {
        let p_in = self.subset_probability(subset)?;
        let outcome = if rng.next_f64() < p_in {
            SubsetOutcome::In
        } else {
            SubsetOutcome::Out
        };
        let (probability, collapsed) = self.project_subset(subset, outcome)?;
        Ok(Measurement { outcome, probability, collapsed })
    }
}

pub(crate) fn norm_sqr(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

pub(crate) fn inner_raw(bra: &[Complex64], ket: &[Complex64]) -> Result<Complex64> {
    if bra.len() != ket.len() {
        return Err(QsimError::DimensionMismatch { expected: bra.len(), found: ket.len() });
    }
    Ok(bra.iter().zip(ket).map(|(a, b)| a.conj() * b).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetOutcome {
    In,
    Out,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub outcome: SubsetOutcome,
    /// Probability of the branch that was sampled.
    pub probability: f64,
    pub collapsed: StateVector,
}

/// A square matrix with `U†U = I` within [`UNITARITY_TOLERANCE`], stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Complex64>>", into = "Vec<Vec<Complex64>>")]
pub struct UnitaryMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl TryFrom<Vec<Vec<Complex64>>> for UnitaryMatrix {
    type Error = QsimError;

    fn try_from(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        UnitaryMatrix::from_rows(rows)
    }
}

impl From<UnitaryMatrix> for Vec<Vec<Complex64>> {
    fn from(u: UnitaryMatrix) -> Self {
        u.rows()
    }
}

impl UnitaryMatrix {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(QsimError::EmptyDimension);
        }
        if entries.len() != dim * dim {
            return Err(QsimError::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        check_finite(&entries)?;
        let u = Self { dim, entries };
        let deviation = u.unitarity_deviation();
        if deviation > UNITARITY_TOLERANCE {
            return Err(QsimError::NotUnitary { deviation });
        }
        Ok(u)
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(QsimError::DimensionMismatch { expected: dim, found: row.len() });
            }
            entries.extend(row);
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ONE;
        }
        Self { dim, entries }
    }

    pub fn hadamard() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { dim: 2, entries: vec![h, h, h, -h] }
    }

    pub fn pauli_x() -> Self {
        Self { dim: 2, entries: vec![ZERO, ONE, ONE, ZERO] }
    }

    pub fn pauli_z() -> Self {
        Self { dim: 2, entries: vec![ONE, ZERO, ZERO, -ONE] }
    }

    /// Single-qubit unitary in the Euler parameterization
    /// `[[cos(θ/2), -e^{iλ} sin(θ/2)], [e^{iφ} sin(θ/2), e^{i(φ+λ)} cos(θ/2)]]`.
    pub fn euler(theta: f64, phi: f64, lambda: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Self {
            dim: 2,
            entries: vec![
                Complex64::new(c, 0.0),
                -Complex64::from_polar(s, lambda),
                Complex64::from_polar(s, phi),
                Complex64::from_polar(c, phi + lambda),
            ],
        }
    }

    /// Haar-random unitary via Gram-Schmidt on a complex Gaussian matrix.
    pub fn random(dim: usize, rng: &mut RandomSource) -> Result<Self> {
        if dim == 0 {
            return Err(QsimError::EmptyDimension);
        }
        // columns[j] is column j
        let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
        while columns.len() < dim {
            let mut v: Vec<Complex64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
            for q in &columns {
                let proj = inner_raw(q, &v)?;
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
            let n = norm_sqr(&v).sqrt();
            if n < 1e-8 {
                continue;
            }
            for vi in &mut v {
                *vi /= n;
            }
            columns.push(v);
        }
        let mut entries = vec![ZERO; dim * dim];
        for (j, col) in columns.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                entries[i * dim + j] = x;
            }
        }
        Self::new(dim, entries)
    }

    /// Permutation matrix sending basis state `j` to `perm[j]`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let dim = perm.len();
        let mut seen = vec![false; dim];
        let mut entries = vec![ZERO; dim * dim];
        for (j, &i) in perm.iter().enumerate() {
            if i >= dim || seen[i] {
                return Err(QsimError::NotUnitary { deviation: 1.0 });
            }
            seen[i] = true;
            entries[i * dim + j] = ONE;
        }
        Self::new(dim, entries)
    }

    /// CNOT on an `n`-qubit register. With `anti` the target flips when the
    /// control is `|0>` instead of `|1>`.
    pub fn controlled_not(n: usize, control: usize, target: usize, anti: bool) -> Result<Self> {
        if control == target {
            return Err(QsimError::QubitClash(control));
        }
        for qubit in [control, target] {
            if qubit >= n {
                return Err(QsimError::QubitOutOfRange { qubit, n });
            }
        }
        let dim = 1usize << n;
        let cbit = 1usize << (n - 1 - control);
        let tbit = 1usize << (n - 1 - target);
        let perm: Vec<usize> = (0..dim)
            .map(|j| {
                let control_set = j & cbit != 0;
                if control_set != anti {
                    j ^ tbit
                } else {
                    j
                }
            })
            .collect();
        Self::permutation(&perm)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    /// `max |(U†U - I)_ij|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let mut acc = ZERO;
                for k in 0..d {
                    acc += self.entries[k * d + i].conj() * self.entries[k * d + j];
                }
                if i == j {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// `U|ψ>`.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        Ok(StateVector::from_raw_unchecked(self.apply_raw(&psi.amps)?))
    }

    /// `U v` for an arbitrary (possibly unnormalized) vector.
    pub fn apply_raw(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim {
            return Err(QsimError::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        Ok(self
            .entries
            .chunks(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &UnitaryMatrix) -> Result<UnitaryMatrix> {
        if self.dim != other.dim {
            return Err(QsimError::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entries[i * d + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..d {
                    entries[i * d + j] += a * other.entries[k * d + j];
                }
            }
        }
        Ok(Self { dim: d, entries })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> UnitaryMatrix {
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[j * d + i] = self.entries[i * d + j].conj();
            }
        }
        Self { dim: d, entries }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn tensor(&self, other: &UnitaryMatrix) -> UnitaryMatrix {
        let (a, b) = (self.dim, other.dim);
        let d = a * b;
        let mut entries = vec![ZERO; d * d];
        for i1 in 0..a {
            for j1 in 0..a {
                let x = self.entries[i1 * a + j1];
                for i2 in 0..b {
                    for j2 in 0..b {
                        entries[(i1 * b + i2) * d + j1 * b + j2] = x * other.entries[i2 * b + j2];
                    }
                }
            }
        }
        Self { dim: d, entries }
    }

    /// `e^{iθ} U`.
    pub fn with_global_phase(&self, theta: f64) -> UnitaryMatrix {
        let p = Complex64::from_polar(1.0, theta);
        Self { dim: self.dim, entries: self.entries.iter().map(|x| x * p).collect() }
    }

    /// Largest entrywise distance to `other`; `f64::INFINITY` on dimension mismatch.
    pub fn max_distance(&self, other: &UnitaryMatrix) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Row-stochastic transition weights `|U_ij|^2` indexed `[to][from]`.
    pub fn transition_weights(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.iter().map(|x| x.norm_sqr()).collect()).collect()
    }
}

fn gaussian_complex(rng: &mut RandomSource) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Seeded source of randomness. Identical seeds yield identical draw sequences.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, draws: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        (self.next_f64() * n as f64) as usize % n
    }

    /// Derives an independent child source, e.g. one per batch member.
    pub fn fork(&mut self) -> RandomSource {
        RandomSource::new(self.next_u64())
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
