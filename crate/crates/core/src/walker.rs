//! Discrete-time quantum walk with power `k` on a finite line.
//!
//! The state lives on `position ⊗ coin` with coin index `m ∈ {-k..k}`; basis
//! index of `(x, m)` is `x·(2k+1) + (m+k)`. One step applies the strategy
//! `U(t)`, then the coin `C` (row `m`, column `l` holds `a_{lm}`), then moves
//! the `m` component by `m` sites.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{norm_sqr, QsimError, RandomSource, UnitaryMatrix, NORM_TOLERANCE};

#[derive(Debug, Error)]
pub enum WalkerError {
    #[error("walk power k must be at least 1")]
    ZeroPower,
    #[error("lattice length {length} must exceed 2k = {}", 2 * .k)]
    LatticeTooShort { length: usize, k: usize },
    #[error("initial position {position} outside lattice of length {length}")]
    PositionOutOfRange { position: usize, length: usize },
    #[error("expected coin dimension {expected}, got {found}")]
    CoinDimension { expected: usize, found: usize },
    #[error("initial coin state has norm^2 {0}, expected 1")]
    CoinNotNormalized(f64),
    #[error("state has {found} amplitudes, expected {expected}")]
    StateDimension { expected: usize, found: usize },
    #[error("invalid hop kernel: {0}")]
    InvalidKernel(String),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

pub type Result<T> = std::result::Result<T, WalkerError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Moves that would leave the lattice stay put with the coin reversed.
    Wall,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkerConfig {
    pub k: usize,
    pub length: usize,
    pub boundary: Boundary,
    pub initial_position: usize,
    /// `a_{-k}, ..., a_k`.
    pub initial_coin: Vec<Complex64>,
}

impl WalkerConfig {
    pub fn new(k: usize, length: usize, boundary: Boundary, initial_position: usize, initial_coin: Vec<Complex64>) -> Result<Self> {
        let c = Self { k, length, boundary, initial_position, initial_coin };
        c.validate()?;
        Ok(c)
    }

    /// Walker at `x0` with all coin weight on `m = 0`.
    pub fn localized(k: usize, length: usize, boundary: Boundary, x0: usize) -> Result<Self> {
        let mut coin = vec![Complex64::new(0.0, 0.0); 2 * k + 1];
        if let Some(c) = coin.get_mut(k) {
            *c = Complex64::new(1.0, 0.0);
        }
        Self::new(k, length, boundary, x0, coin)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(WalkerError::ZeroPower);
        }
        if self.length <= 2 * self.k {
            return Err(WalkerError::LatticeTooShort { length: self.length, k: self.k });
        }
        if self.initial_position >= self.length {
            return Err(WalkerError::PositionOutOfRange { position: self.initial_position, length: self.length });
        }
        if self.initial_coin.len() != self.coin_dim() {
            return Err(WalkerError::CoinDimension { expected: self.coin_dim(), found: self.initial_coin.len() });
        }
        let n = norm_sqr(&self.initial_coin);
        if !((n - 1.0).abs() <= NORM_TOLERANCE) {
            return Err(WalkerError::CoinNotNormalized(n));
        }
        Ok(())
    }

    pub fn coin_dim(&self) -> usize {
        2 * self.k + 1
    }

    pub fn dim(&self) -> usize {
        self.length * self.coin_dim()
    }

    pub fn index(&self, x: usize, m: i64) -> usize {
        x * self.coin_dim() + (m + self.k as i64) as usize
    }

    /// Whether moving by `m` from `x` crosses a wall.
    pub fn leaves(&self, x: usize, m: i64) -> bool {
        self.boundary == Boundary::Wall && !(0..self.length as i64).contains(&(x as i64 + m))
    }

    /// Where the `(x, m)` component lands after the shift.
    pub fn destination(&self, x: usize, m: i64) -> (usize, i64) {
        let l = self.length as i64;
        let y = x as i64 + m;
        match self.boundary {
            Boundary::Periodic => (y.rem_euclid(l) as usize, m),
            Boundary::Wall if (0..l).contains(&y) => (y as usize, m),
            Boundary::Wall => (x, -m),
        }
    }
}

/// A `(2k+1)`-dimensional coin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoinMatrix(UnitaryMatrix);

impl CoinMatrix {
    pub fn new(u: UnitaryMatrix) -> Self {
        CoinMatrix(u)
    }

    pub fn identity(k: usize) -> Self {
        CoinMatrix(UnitaryMatrix::identity(2 * k + 1))
    }

    /// `2/(2k+1) J - I`.
    pub fn grover(k: usize) -> Self {
        let d = 2 * k + 1;
        let c = 2.0 / d as f64;
        let rows = (0..d)
            .map(|i| (0..d).map(|j| Complex64::new(if i == j { c - 1.0 } else { c }, 0.0)).collect())
            .collect();
        CoinMatrix(UnitaryMatrix::from_rows(rows).expect("grover coin is unitary"))
    }

    /// Discrete Fourier transform on the coin.
    pub fn dft(k: usize) -> Self {
        let d = 2 * k + 1;
        let s = 1.0 / (d as f64).sqrt();
        let rows = (0..d)
            .map(|i| (0..d).map(|j| Complex64::from_polar(s, 2.0 * std::f64::consts::PI * (i * j) as f64 / d as f64)).collect())
            .collect();
        CoinMatrix(UnitaryMatrix::from_rows(rows).expect("dft is unitary"))
    }

    /// Cyclic relabelling `m -> m+1` (wrapping `k -> -k`).
    pub fn cyclic_shift(k: usize) -> Self {
        let d = 2 * k + 1;
        let perm: Vec<usize> = (0..d).map(|j| (j + 1) % d).collect();
        CoinMatrix(UnitaryMatrix::permutation(&perm).expect("valid permutation"))
    }

    /// `k = 1` coin acting as a Hadamard on `m = ±1` and fixing `m = 0`.
    pub fn hadamard_type() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let z = Complex64::new(0.0, 0.0);
        let r = |x: f64| Complex64::new(x, 0.0);
        CoinMatrix(
            UnitaryMatrix::from_rows(vec![vec![r(h), z, r(h)], vec![z, r(1.0), z], vec![r(h), z, r(-h)]])
                .expect("hadamard-type coin is unitary"),
        )
    }

    pub fn random(k: usize, rng: &mut RandomSource) -> Self {
        CoinMatrix(UnitaryMatrix::random(2 * k + 1, rng).expect("positive dimension"))
    }

    pub fn matrix(&self) -> &UnitaryMatrix {
        &self.0
    }

    /// `a_{lm}` with `l, m ∈ {-k..k}`.
    pub fn a(&self, l: i64, m: i64) -> Complex64 {
        let k = (self.0.dim() as i64 - 1) / 2;
        self.0.get((m + k) as usize, (l + k) as usize)
    }

    /// `U_m = Σ_l a_{lm} |m><l|`: the coin restricted to output row `m`.
    pub fn component(&self, m: i64) -> UnitaryComponent {
        let k = (self.0.dim() as i64 - 1) / 2;
        let row = (m + k) as usize;
        UnitaryComponent { m, row: (0..self.0.dim()).map(|l| self.0.get(row, l)).collect() }
    }
}

/// One `U_m`, stored as its single non-zero row.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryComponent {
    pub m: i64,
    pub row: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkerState {
    time: usize,
    k: usize,
    length: usize,
    amplitudes: Vec<Complex64>,
}

impl WalkerState {
    pub fn initial(config: &WalkerConfig) -> Result<Self> {
        config.validate()?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); config.dim()];
        let base = config.initial_position * config.coin_dim();
        amplitudes[base..base + config.coin_dim()].copy_from_slice(&config.initial_coin);
        Ok(Self { time: 0, k: config.k, length: config.length, amplitudes })
    }

    /// Builds a state from raw amplitudes; they must be normalized.
    pub fn from_amplitudes(config: &WalkerConfig, time: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != config.dim() {
            return Err(WalkerError::StateDimension { expected: config.dim(), found: amplitudes.len() });
        }
        let n = norm_sqr(&amplitudes);
        if !((n - 1.0).abs() <= NORM_TOLERANCE) {
            return Err(QsimError::NotNormalized { norm_sqr: n }.into());
        }
        Ok(Self { time, k: config.k, length: config.length, amplitudes })
    }

    pub(crate) fn from_raw(time: usize, k: usize, length: usize, amplitudes: Vec<Complex64>) -> Self {
        Self { time, k, length, amplitudes }
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    /// `ψ^m(x)`.
    pub fn amplitude(&self, x: usize, m: i64) -> Complex64 {
        self.amplitudes[x * (2 * self.k + 1) + (m + self.k as i64) as usize]
    }

    /// The coin vector at site `x`.
    pub fn site(&self, x: usize) -> &[Complex64] {
        let d = 2 * self.k + 1;
        &self.amplitudes[x * d..(x + 1) * d]
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }
}

fn check_coin(config: &WalkerConfig, u: &UnitaryMatrix) -> Result<()> {
    if u.dim() != config.coin_dim() {
        return Err(WalkerError::CoinDimension { expected: config.coin_dim(), found: u.dim() });
    }
    Ok(())
}

/// `(Σ_m S_m ⊗ U_m)(I ⊗ U(t))` as a dense matrix on `position ⊗ coin`.
pub fn make_step_operator(config: &WalkerConfig, coin: &CoinMatrix, strategy: &UnitaryMatrix) -> Result<UnitaryMatrix> {
    config.validate()?;
    check_coin(config, coin.matrix())?;
    check_coin(config, strategy)?;
    let d = config.coin_dim();
    let local = coin.matrix().matmul(strategy)?;
    let n = config.dim();
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    for x in 0..config.length {
        for mi in 0..d {
            let m = mi as i64 - config.k as i64;
            let (y, m2) = config.destination(x, m);
            let row = config.index(y, m2);
            for l in 0..d {
                entries[row * n + x * d + l] += local.get(mi, l);
            }
        }
    }
    Ok(UnitaryMatrix::new(n, entries)?)
}

/// One step of the walk.
pub fn step(state: &WalkerState, config: &WalkerConfig, coin: &CoinMatrix, strategy: &UnitaryMatrix) -> Result<WalkerState> {
    shift(state, config, coin, strategy, false)
}

/// As [`step`], but components that would cross a wall are discarded rather
/// than reflected, so the result may lose norm.
pub fn step_absorbing(
    state: &WalkerState,
    config: &WalkerConfig,
    coin: &CoinMatrix,
    strategy: &UnitaryMatrix,
) -> Result<WalkerState> {
    shift(state, config, coin, strategy, true)
}

fn shift(state: &WalkerState, config: &WalkerConfig, coin: &CoinMatrix, strategy: &UnitaryMatrix, absorb: bool) -> Result<WalkerState> {
    check_coin(config, coin.matrix())?;
    check_coin(config, strategy)?;
    if state.amplitudes.len() != config.dim() || state.k != config.k {
        return Err(WalkerError::StateDimension { expected: config.dim(), found: state.amplitudes.len() });
    }
    let local = coin.matrix().matmul(strategy)?;
    let d = config.coin_dim();
    let mut out = vec![Complex64::new(0.0, 0.0); config.dim()];
    for x in 0..config.length {
        let site = state.site(x);
        if site.iter().all(|a| a.norm_sqr() == 0.0) {
            continue;
        }
        let v = local.apply_raw(site)?;
        for (mi, amp) in v.into_iter().enumerate() {
            let m = mi as i64 - config.k as i64;
            if absorb && config.leaves(x, m) {
                continue;
            }
            let (y, m2) = config.destination(x, m);
            out[y * d + (m2 + config.k as i64) as usize] += amp;
        }
    }
    Ok(WalkerState { time: state.time + 1, k: state.k, length: state.length, amplitudes: out })
}

/// `μ(x) = Σ_m |ψ^m(x)|^2`.
pub fn position_distribution(state: &WalkerState) -> Vec<f64> {
    let d = 2 * state.k + 1;
    state.amplitudes.chunks(d).map(norm_sqr).collect()
}

/// Mean and standard deviation of site index under `mu`.
pub fn spread_stats(mu: &[f64]) -> (f64, f64) {
    let total: f64 = mu.iter().sum();
    let mean = mu.iter().enumerate().map(|(x, p)| x as f64 * p).sum::<f64>() / total;
    let var = mu.iter().enumerate().map(|(x, p)| (x as f64 - mean).powi(2) * p).sum::<f64>() / total;
    (mean, var.max(0.0).sqrt())
}

/// One step of a classical random walk: mass at `x` hops by `m` with
/// probability `kernel[m+k]`, with the same boundary handling as the quantum
/// walk (a blocked hop at a wall stays put).
pub fn classical_step(dist: &[f64], kernel: &[f64], boundary: Boundary) -> Result<Vec<f64>> {
    hop(dist, kernel, boundary, false)
}

/// As [`classical_step`], but mass that would cross a wall is discarded.
pub fn classical_step_absorbing(dist: &[f64], kernel: &[f64], boundary: Boundary) -> Result<Vec<f64>> {
    hop(dist, kernel, boundary, true)
}

fn hop(dist: &[f64], kernel: &[f64], boundary: Boundary, absorb: bool) -> Result<Vec<f64>> {
    if kernel.len() % 2 == 0 {
        return Err(WalkerError::InvalidKernel(format!("length {} is not odd", kernel.len())));
    }
    if kernel.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(WalkerError::InvalidKernel("weights must be finite and non-negative".into()));
    }
    let total: f64 = kernel.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(WalkerError::InvalidKernel(format!("weights sum to {total}")));
    }
    let k = (kernel.len() / 2) as i64;
    let l = dist.len() as i64;
    let mut out = vec![0.0; dist.len()];
    for (x, &p) in dist.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (mi, &w) in kernel.iter().enumerate() {
            let y = x as i64 + mi as i64 - k;
            let y = match boundary {
                Boundary::Periodic => y.rem_euclid(l),
                Boundary::Wall if (0..l).contains(&y) => y,
                Boundary::Wall if absorb => continue,
                Boundary::Wall => x as i64,
            };
            out[y as usize] += p * w;
        }
    }
    Ok(out)
}
