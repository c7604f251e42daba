//! The angel problem on a line: a power-`k` quantum walker (Angel) against a
//! Devil who detects the walker and places blocks.
//!
//! Every site carries a block qubit `α|0> + β|1>`; a site is blocked once its
//! qubit has collapsed to `|1>`. Detection, placement and block checks run
//! their two-qubit circuits through [`crate::qsim`].

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{norm_sqr, QsimError, RandomSource, StateVector, SubsetOutcome, UnitaryMatrix, NORM_TOLERANCE};
use crate::walker::{self, Boundary, CoinMatrix, WalkerConfig, WalkerError, WalkerState};

pub const DEFAULT_HORIZON: usize = 200;
pub const DEFAULT_CAUGHT_EPSILON: f64 = 1e-9;
/// Tolerance for matching a coin against the non-universal gate set.
pub const GATE_SET_TOLERANCE: f64 = 1e-12;
/// Sites with `μ` above this count as support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AngelError {
    #[error("invalid match config: {0}")]
    InvalidConfig(String),
    #[error("match is over ({0:?})")]
    NotOngoing(MatchStatus),
    #[error("site {site} outside board of length {length}")]
    SiteOutOfRange { site: usize, length: usize },
    #[error("coin rejected for {class:?} Angel: {reason}")]
    CoinRejected { class: ResourceClass, reason: String },
    #[error("no block may be placed at {0}: it was not just detected empty")]
    NoFreshDetection(usize),
    #[error("forced outcome has probability zero")]
    ImpossibleBranch,
    #[error("enumeration exceeds {0} branches")]
    EnumerationTooLarge(usize),
    #[error(transparent)]
    Walker(#[from] WalkerError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

pub type Result<T> = std::result::Result<T, AngelError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ResourceClass {
    Universal,
    NonUniversal,
    Classical,
}

/// How an admitted coin is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveRoute {
    Quantum,
    Classical,
}

/// The finite gate set of a non-universal Angel.
pub fn non_universal_coins(k: usize) -> Vec<UnitaryMatrix> {
    vec![
        UnitaryMatrix::identity(2 * k + 1),
        CoinMatrix::grover(k).matrix().clone(),
        CoinMatrix::cyclic_shift(k).matrix().clone(),
    ]
}

/// Decides whether an Angel of `class` may play `coin`, and how.
/// A classical Angel may name any coin, but it only ever takes the
/// stochastic route.
pub fn resource_class_filter(class: ResourceClass, k: usize, coin: &UnitaryMatrix) -> Result<MoveRoute> {
    if coin.dim() != 2 * k + 1 {
        return Err(AngelError::CoinRejected { class, reason: format!("dimension {} != {}", coin.dim(), 2 * k + 1) });
    }
    match class {
        ResourceClass::Universal => Ok(MoveRoute::Quantum),
        ResourceClass::NonUniversal => {
            if non_universal_coins(k).iter().any(|g| g.max_distance(coin) <= GATE_SET_TOLERANCE) {
                Ok(MoveRoute::Quantum)
            } else {
                Err(AngelError::CoinRejected { class, reason: "not in the gate set".into() })
            }
        }
        ResourceClass::Classical => Ok(MoveRoute::Classical),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockQubit {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl BlockQubit {
    pub const EMPTY: BlockQubit = BlockQubit { alpha: Complex64::new(1.0, 0.0), beta: Complex64::new(0.0, 0.0) };
    pub const BLOCKED: BlockQubit = BlockQubit { alpha: Complex64::new(0.0, 0.0), beta: Complex64::new(1.0, 0.0) };

    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if !((n - 1.0).abs() <= NORM_TOLERANCE) {
            return Err(QsimError::NotNormalized { norm_sqr: n }.into());
        }
        Ok(Self { alpha, beta })
    }

    pub fn is_blocked(&self) -> bool {
        self.alpha == Complex64::new(0.0, 0.0)
    }

    fn state(&self) -> StateVector {
        StateVector::from_raw_unchecked(vec![self.alpha, self.beta])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Board {
    sites: Vec<BlockQubit>,
}

impl Board {
    pub fn empty(length: usize) -> Self {
        Self { sites: vec![BlockQubit::EMPTY; length] }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, x: usize) -> BlockQubit {
        self.sites[x]
    }

    pub fn set(&mut self, x: usize, q: BlockQubit) -> Result<()> {
        let length = self.len();
        *self.sites.get_mut(x).ok_or(AngelError::SiteOutOfRange { site: x, length })? = q;
        Ok(())
    }

    pub fn is_blocked(&self, x: usize) -> bool {
        self.sites[x].is_blocked()
    }

    pub fn blocked_sites(&self) -> Vec<usize> {
        (0..self.len()).filter(|&x| self.is_blocked(x)).collect()
    }
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn default_epsilon() -> f64 {
    DEFAULT_CAUGHT_EPSILON
}

fn default_class() -> ResourceClass {
    ResourceClass::Universal
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub walker: WalkerConfig,
    /// Fixed coin `C` applied after the Angel's per-round strategy; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coin: Option<CoinMatrix>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_epsilon")]
    pub caught_epsilon: f64,
    #[serde(default = "default_class")]
    pub angel_class: ResourceClass,
    #[serde(default = "default_class")]
    pub devil_class: ResourceClass,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub devil_opens: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_blocks: Vec<usize>,
}

impl MatchConfig {
    pub fn new(walker: WalkerConfig) -> Self {
        Self {
            walker,
            coin: None,
            horizon: DEFAULT_HORIZON,
            caught_epsilon: DEFAULT_CAUGHT_EPSILON,
            angel_class: ResourceClass::Universal,
            devil_class: ResourceClass::Universal,
            seed: 0,
            devil_opens: false,
            initial_blocks: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.walker.validate().map_err(|e| AngelError::InvalidConfig(e.to_string()))?;
        if self.horizon == 0 {
            return Err(AngelError::InvalidConfig("horizon must be at least 1".into()));
        }
        if !(self.caught_epsilon > 0.0 && self.caught_epsilon < 1.0) {
            return Err(AngelError::InvalidConfig(format!("caught_epsilon {} not in (0, 1)", self.caught_epsilon)));
        }
        if let Some(c) = &self.coin {
            if c.matrix().dim() != self.walker.coin_dim() {
                return Err(AngelError::InvalidConfig(format!(
                    "coin dimension {} != {}",
                    c.matrix().dim(),
                    self.walker.coin_dim()
                )));
            }
        }
        for &b in &self.initial_blocks {
            if b >= self.walker.length {
                return Err(AngelError::InvalidConfig(format!("initial block {b} off the board")));
            }
            if b == self.walker.initial_position {
                return Err(AngelError::InvalidConfig(format!("initial block {b} on the Angel's start")));
            }
        }
        Ok(())
    }

    pub fn base_coin(&self) -> CoinMatrix {
        self.coin.clone().unwrap_or_else(|| CoinMatrix::identity(self.walker.k))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MatchStatus {
    Ongoing,
    AngelCaught,
    AngelSurvived,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Angel,
    Devil,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MatchEvent {
    AngelMove { round: usize, route: MoveRoute, retained: f64, caught: bool },
    Detection { round: usize, site: usize, outcome: u8, probability: f64 },
    Placement { round: usize, site: usize, #[serde(default, skip_serializing_if = "Option::is_none")] ancilla: Option<u8> },
    Surrounded { round: usize, site: usize },
}

impl MatchEvent {
    pub fn round(&self) -> usize {
        match self {
            MatchEvent::AngelMove { round, .. }
            | MatchEvent::Detection { round, .. }
            | MatchEvent::Placement { round, .. }
            | MatchEvent::Surrounded { round, .. } => *round,
        }
    }

    pub fn is_angel(&self) -> bool {
        matches!(self, MatchEvent::AngelMove { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DevilAction {
    pub target: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub round: usize,
    pub site: usize,
    pub outcome: u8,
}

/// What the Devil knows: the board blocks and its own detections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DevilView {
    pub round: usize,
    pub horizon: usize,
    pub length: usize,
    pub k: usize,
    pub status: MatchStatus,
    pub blocked_sites: Vec<usize>,
    pub detections: Vec<DetectionRecord>,
}

/// Source of measurement outcomes: sampled, or dictated for enumeration.
enum Draw<'a> {
    Sample(&'a mut RandomSource),
    Forced { detection: u8, ancilla: u8, used: u8 },
}

impl Draw<'_> {
    /// Measures ancilla indices `{1, 3}` of a two-qubit register.
    fn ancilla(&mut self, reg: &StateVector, forced: impl Fn(u8, u8) -> u8) -> Result<(u8, f64, StateVector)> {
        match self {
            Draw::Sample(rng) => {
                let m = reg.measure_subset(&[1, 3], rng)?;
                Ok((u8::from(m.outcome == SubsetOutcome::In), m.probability, m.collapsed))
            }
            Draw::Forced { detection, ancilla, used } => {
                *used += 1;
                let outcome = forced(*detection, *ancilla);
                let side = if outcome == 1 { SubsetOutcome::In } else { SubsetOutcome::Out };
                match reg.project_subset(&[1, 3], side) {
                    Ok((p, collapsed)) => Ok((outcome, p, collapsed)),
                    Err(QsimError::ZeroProbabilityBranch) => Err(AngelError::ImpossibleBranch),
                    Err(e) => Err(e.into()),
                }
            }
        }
    }
}

fn cnot(control: usize, target: usize, anti: bool) -> UnitaryMatrix {
    UnitaryMatrix::controlled_not(2, control, target, anti).expect("two-qubit gate")
}

fn ancilla_zero() -> StateVector {
    StateVector::basis(2, 0).expect("qubit")
}

#[derive(Clone, Debug)]
pub struct MatchState {
    config: MatchConfig,
    round: usize,
    board: Board,
    angel: WalkerState,
    history: Vec<MatchEvent>,
    status: MatchStatus,
    fresh_empty: Option<usize>,
}

impl MatchState {
    pub fn new(config: MatchConfig) -> Result<Self> {
        config.validate()?;
        let mut board = Board::empty(config.walker.length);
        for &b in &config.initial_blocks {
            board.set(b, BlockQubit::BLOCKED)?;
        }
        let mut angel = WalkerState::initial(&config.walker)?;
        if config.angel_class == ResourceClass::Classical {
            angel = embed_distribution(&config.walker, 0, &walker::position_distribution(&angel));
        }
        Ok(Self { config, round: 0, board, angel, history: Vec::new(), status: MatchStatus::Ongoing, fresh_empty: None })
    }

    pub fn config(&self) -> &MatchConfig {
        &self.config
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn board(&self) -> &Board {
        &self.board
    }

    pub fn angel(&self) -> &WalkerState {
        &self.angel
    }

    pub fn history(&self) -> &[MatchEvent] {
        &self.history
    }

    pub fn status(&self) -> MatchStatus {
        self.status
    }

    pub fn winner(&self) -> Option<Winner> {
        match self.status {
            MatchStatus::Ongoing => None,
            MatchStatus::AngelCaught => Some(Winner::Devil),
            MatchStatus::AngelSurvived => Some(Winner::Angel),
        }
    }

    /// `μ_t`, the Angel's position distribution.
    pub fn mu(&self) -> Vec<f64> {
        walker::position_distribution(&self.angel)
    }

    pub fn devil_view(&self) -> DevilView {
        DevilView {
            round: self.round,
            horizon: self.config.horizon,
            length: self.config.walker.length,
            k: self.config.walker.k,
            status: self.status,
            blocked_sites: self.board.blocked_sites(),
            detections: self
                .history
                .iter()
                .filter_map(|e| match e {
                    MatchEvent::Detection { round, site, outcome, .. } => {
                        Some(DetectionRecord { round: *round, site: *site, outcome: *outcome })
                    }
                    _ => None,
                })
                .collect(),
        }
    }

    fn ensure_ongoing(&self) -> Result<()> {
        if self.status != MatchStatus::Ongoing {
            return Err(AngelError::NotOngoing(self.status));
        }
        Ok(())
    }

    fn ensure_site(&self, x: usize) -> Result<()> {
        if x >= self.config.walker.length {
            return Err(AngelError::SiteOutOfRange { site: x, length: self.config.walker.length });
        }
        Ok(())
    }

    /// One Angel step with strategy `coin`, then projection off blocked sites.
    /// Sites beyond a wall count as blocked.
    pub fn angel_move(&mut self, coin: &UnitaryMatrix) -> Result<()> {
        self.ensure_ongoing()?;
        let route = resource_class_filter(self.config.angel_class, self.config.walker.k, coin)?;
        let mut next = self.stepped(coin, route)?;
        let retained = self.project_blocked(&mut next);
        let caught = retained < self.config.caught_epsilon;
        if !caught {
            renormalize(&mut next, retained);
        }
        self.angel = next;
        self.fresh_empty = None;
        self.history.push(MatchEvent::AngelMove { round: self.round, route, retained, caught });
        if caught {
            self.status = MatchStatus::AngelCaught;
        }
        Ok(())
    }

    fn stepped(&self, coin: &UnitaryMatrix, route: MoveRoute) -> Result<WalkerState> {
        let cfg = &self.config.walker;
        let base = self.config.base_coin();
        match route {
            MoveRoute::Quantum => Ok(walker::step_absorbing(&self.angel, cfg, &base, coin)?),
            MoveRoute::Classical => {
                let kernel = classical_kernel(&base, coin, cfg.k)?;
                let mu = walker::classical_step_absorbing(&self.mu(), &kernel, cfg.boundary)?;
                Ok(embed_distribution(cfg, self.angel.time() + 1, &mu))
            }
        }
    }

    /// Zeroes amplitudes on blocked sites and returns the remaining norm².
    fn project_blocked(&self, state: &mut WalkerState) -> f64 {
        let d = self.config.walker.coin_dim();
        let amps = state.amplitudes_mut();
        for x in self.board.blocked_sites() {
            amps[x * d..(x + 1) * d].fill(Complex64::new(0.0, 0.0));
        }
        norm_sqr(amps)
    }

    /// Probability that detecting at `x` finds the Angel, from the circuit.
    pub fn detection_probability(&self, x: usize) -> Result<f64> {
        self.ensure_site(x)?;
        let reg = self.detection_register(x);
        Ok(reg.subset_probability(&[1, 3])?)
    }

    fn detection_register(&self, x: usize) -> StateVector {
        detection_circuit(norm_sqr(self.angel.site(x)))
    }

    /// Replaces the block qubit at `x`. A blocked site stays blocked.
    pub fn set_block(&mut self, x: usize, q: BlockQubit) -> Result<()> {
        self.ensure_site(x)?;
        if self.board.is_blocked(x) && !q.is_blocked() {
            return Err(AngelError::InvalidConfig(format!("site {x} is already blocked")));
        }
        self.board.set(x, q)
    }

    /// Replaces the Angel's state, which must be normalized and fit the board.
    pub fn set_angel(&mut self, state: WalkerState) -> Result<()> {
        let cfg = &self.config.walker;
        if state.k() != cfg.k || state.length() != cfg.length {
            return Err(AngelError::InvalidConfig("walker state does not fit the board".into()));
        }
        let n = state.norm_sqr();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(QsimError::NotNormalized { norm_sqr: n }.into());
        }
        self.angel = state;
        self.fresh_empty = None;
        Ok(())
    }

    pub fn devil_detect(&mut self, x: usize, rng: &mut RandomSource) -> Result<u8> {
        self.detect(x, &mut Draw::Sample(rng)).map(|(o, _)| o)
    }

    /// Detection with a dictated outcome; returns that outcome's probability.
    pub fn devil_detect_forced(&mut self, x: usize, outcome: u8) -> Result<f64> {
        self.detect(x, &mut Draw::Forced { detection: outcome, ancilla: 0, used: 0 }).map(|(_, p)| p)
    }

    fn detect(&mut self, x: usize, draw: &mut Draw<'_>) -> Result<(u8, f64)> {
        self.ensure_ongoing()?;
        self.ensure_site(x)?;
        let reg = self.detection_register(x);
        let (outcome, probability, _) = draw.ancilla(&reg, |d, _| d)?;
        let d = self.config.walker.coin_dim();
        let amps = self.angel.amplitudes_mut();
        for (i, a) in amps.iter_mut().enumerate() {
            if (i / d == x) != (outcome == 1) {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let n = norm_sqr(amps);
        if n == 0.0 {
            return Err(AngelError::ImpossibleBranch);
        }
        renormalize(&mut self.angel, n);
        self.fresh_empty = (outcome == 0).then_some(x);
        self.history.push(MatchEvent::Detection { round: self.round, site: x, outcome, probability });
        Ok((outcome, probability))
    }

    /// Places a block at `x`, which must have just been detected empty.
    pub fn devil_place_block(&mut self, x: usize, rng: &mut RandomSource) -> Result<()> {
        self.place(x, &mut Draw::Sample(rng)).map(|_| ())
    }

    fn place(&mut self, x: usize, draw: &mut Draw<'_>) -> Result<f64> {
        self.ensure_ongoing()?;
        self.ensure_site(x)?;
        if self.fresh_empty != Some(x) {
            return Err(AngelError::NoFreshDetection(x));
        }
        let (ancilla, probability) = match self.config.devil_class {
            ResourceClass::Classical => (None, 1.0),
            _ => {
                let reg = block_creation_circuit(self.board.site(x));
                let (a, p, _) = draw.ancilla(&reg, |_, a| a)?;
                (Some(a), p)
            }
        };
        self.board.set(x, BlockQubit::BLOCKED)?;
        self.fresh_empty = None;
        self.history.push(MatchEvent::Placement { round: self.round, site: x, ancilla });
        Ok(probability)
    }

    /// The Angel probes the block qubit at `x`; it collapses to the result.
    pub fn angel_check_block(&mut self, x: usize, rng: &mut RandomSource) -> Result<u8> {
        self.ensure_ongoing()?;
        self.ensure_site(x)?;
        let reg = cnot(0, 1, false).apply(&self.board.site(x).state().tensor(&ancilla_zero()))?;
        let (outcome, _, _) = Draw::Sample(rng).ancilla(&reg, |d, _| d)?;
        self.board.set(x, if outcome == 1 { BlockQubit::BLOCKED } else { BlockQubit::EMPTY })?;
        Ok(outcome)
    }

    /// Every site within distance `k` of `x`, other than `x`, is blocked or
    /// off the board.
    pub fn surrounded(&self, x: usize) -> bool {
        let cfg = &self.config.walker;
        let l = cfg.length as i64;
        (1..=cfg.k as i64).flat_map(|d| [x as i64 - d, x as i64 + d]).all(|y| match cfg.boundary {
            Boundary::Periodic => self.board.is_blocked(y.rem_euclid(l) as usize),
            Boundary::Wall => !(0..l).contains(&y) || self.board.is_blocked(y as usize),
        })
    }

    /// One round: Angel moves, Devil detects at the target, places a block
    /// there on outcome 0, or checks for a surrounded Angel on outcome 1.
    /// With `devil_opens` the Devil's half comes first.
    pub fn play_round(&mut self, action: DevilAction, angel: &mut dyn AngelStrategy, rng: &mut RandomSource) -> Result<()> {
        self.round_with(action, angel, &mut Draw::Sample(rng)).map(|_| ())
    }

    fn round_with(&mut self, action: DevilAction, angel: &mut dyn AngelStrategy, draw: &mut Draw<'_>) -> Result<f64> {
        self.ensure_ongoing()?;
        self.ensure_site(action.target)?;
        let mut probability = 1.0;
        if !self.config.devil_opens {
            self.angel_phase(angel)?;
        }
        if self.status == MatchStatus::Ongoing {
            probability *= self.devil_phase(action.target, draw)?;
        }
        if self.config.devil_opens && self.status == MatchStatus::Ongoing {
            self.angel_phase(angel)?;
        }
        self.round += 1;
        if self.status == MatchStatus::Ongoing && self.round >= self.config.horizon {
            self.status = MatchStatus::AngelSurvived;
        }
        Ok(probability)
    }

    fn angel_phase(&mut self, angel: &mut dyn AngelStrategy) -> Result<()> {
        let coin = angel.select(&AngelContext {
            round: self.round,
            config: &self.config,
            angel: &self.angel,
            board: &self.board,
            history: &self.history,
        });
        self.angel_move(&coin)
    }

    fn devil_phase(&mut self, x: usize, draw: &mut Draw<'_>) -> Result<f64> {
        let (outcome, mut probability) = self.detect(x, draw)?;
        if outcome == 0 {
            probability *= self.place(x, draw)?;
        } else if self.surrounded(x) {
            self.history.push(MatchEvent::Surrounded { round: self.round, site: x });
            self.status = MatchStatus::AngelCaught;
        }
        Ok(probability)
    }

    /// Lists every broken match invariant; empty when the state is sound.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.status == MatchStatus::Ongoing {
            let n = self.angel.norm_sqr();
            if (n - 1.0).abs() > NORM_TOLERANCE {
                out.push(format!("Angel norm^2 {n} while ongoing"));
            }
            let mu = self.mu();
            for x in self.board.blocked_sites() {
                if mu[x] >= 1e-12 {
                    out.push(format!("Angel weight {} on blocked site {x}", mu[x]));
                }
            }
        }
        for e in &self.history {
            if let MatchEvent::Placement { site, .. } = e {
                if self.board.site(*site) != BlockQubit::BLOCKED {
                    out.push(format!("placed block at {site} is no longer |1>"));
                }
            }
        }
        for &b in &self.config.initial_blocks {
            if !self.board.is_blocked(b) {
                out.push(format!("initial block at {b} lost"));
            }
        }
        for (i, w) in self.history.windows(2).enumerate() {
            if w[0].is_angel() && w[1].is_angel() {
                out.push(format!("two Angel moves in a row at event {i}"));
            }
            if w[1].round() < w[0].round() {
                out.push(format!("history goes back in time at event {i}"));
            }
        }
        // within a round the Devil acts in one contiguous block
        for round in 0..=self.round {
            let kinds: Vec<bool> = self.history.iter().filter(|e| e.round() == round).map(MatchEvent::is_angel).collect();
            let switches = kinds.windows(2).filter(|w| w[0] != w[1]).count();
            if kinds.iter().filter(|&&a| a).count() > 1 || switches > 1 {
                out.push(format!("round {round} interleaves players"));
            }
        }
        let terminal_by_horizon = self.status == MatchStatus::AngelSurvived;
        if terminal_by_horizon && self.round != self.config.horizon {
            out.push(format!("survived at round {} before horizon {}", self.round, self.config.horizon));
        }
        out
    }
}

/// Occupancy qubit `(√(1-μ), √μ)` and a fresh ancilla after the CNOT; the
/// ancilla reads 1 with probability `μ`.
pub fn detection_circuit(mu: f64) -> StateVector {
    let mu = mu.clamp(0.0, 1.0);
    let occupancy = StateVector::from_raw_unchecked(vec![Complex64::new((1.0 - mu).sqrt(), 0.0), Complex64::new(mu.sqrt(), 0.0)]);
    cnot(0, 1, false).apply(&occupancy.tensor(&ancilla_zero())).expect("two qubits")
}

/// Block qubit and a fresh ancilla after CNOT(block→ancilla) and an
/// anti-controlled NOT(ancilla→block). The block qubit ends in `|1>`; the
/// ancilla keeps `|β|^2`.
pub fn block_creation_circuit(q: BlockQubit) -> StateVector {
    let reg = q.state().tensor(&ancilla_zero());
    let reg = cnot(0, 1, false).apply(&reg).expect("two qubits");
    cnot(1, 0, true).apply(&reg).expect("two qubits")
}

fn renormalize(state: &mut WalkerState, norm_sqr: f64) {
    let s = norm_sqr.sqrt();
    for a in state.amplitudes_mut() {
        *a /= s;
    }
}

/// `|(C·U) e_0|^2`: hop probabilities for a classical Angel.
pub fn classical_kernel(base: &CoinMatrix, coin: &UnitaryMatrix, k: usize) -> Result<Vec<f64>> {
    let local = base.matrix().matmul(coin)?;
    Ok(local.column(k).iter().map(|a| a.norm_sqr()).collect())
}

/// A classical distribution carried as `√μ(x)` on coin state `m = 0`.
fn embed_distribution(cfg: &WalkerConfig, time: usize, mu: &[f64]) -> WalkerState {
    let d = cfg.coin_dim();
    let mut amps = vec![Complex64::new(0.0, 0.0); cfg.dim()];
    for (x, &p) in mu.iter().enumerate() {
        amps[x * d + cfg.k] = Complex64::new(p.max(0.0).sqrt(), 0.0);
    }
    WalkerState::from_raw(time, cfg.k, cfg.length, amps)
}

pub struct AngelContext<'a> {
    pub round: usize,
    pub config: &'a MatchConfig,
    pub angel: &'a WalkerState,
    pub board: &'a Board,
    pub history: &'a [MatchEvent],
}

pub trait AngelStrategy {
    /// The strategy unitary `U(t)` for this round.
    fn select(&mut self, ctx: &AngelContext<'_>) -> UnitaryMatrix;
}

pub trait DevilPolicy {
    fn target(&mut self, view: &DevilView) -> usize;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoinChoice {
    Identity,
    Grover,
    CyclicShift,
    Dft,
    HadamardType,
    Matrix(UnitaryMatrix),
}

impl CoinChoice {
    pub fn matrix(&self, k: usize) -> Result<UnitaryMatrix> {
        Ok(match self {
            CoinChoice::Identity => UnitaryMatrix::identity(2 * k + 1),
            CoinChoice::Grover => CoinMatrix::grover(k).matrix().clone(),
            CoinChoice::CyclicShift => CoinMatrix::cyclic_shift(k).matrix().clone(),
            CoinChoice::Dft => CoinMatrix::dft(k).matrix().clone(),
            CoinChoice::HadamardType if k == 1 => CoinMatrix::hadamard_type().matrix().clone(),
            CoinChoice::HadamardType => {
                return Err(AngelError::InvalidConfig("hadamard_type coin needs k = 1".into()));
            }
            CoinChoice::Matrix(u) => u.clone(),
        })
    }
}

/// Serializable description of an Angel auto-player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngelStrategySpec {
    FixedCoin { coin: CoinChoice },
    RandomCoin { seed: u64 },
    GreedySpread,
}

impl AngelStrategySpec {
    pub fn build(&self, config: &MatchConfig) -> Result<AngelPlayer> {
        let k = config.walker.k;
        Ok(match self {
            AngelStrategySpec::FixedCoin { coin } => {
                let u = coin.matrix(k)?;
                resource_class_filter(config.angel_class, k, &u)?;
                AngelPlayer::Fixed(u)
            }
            AngelStrategySpec::RandomCoin { seed } => AngelPlayer::Random { rng: RandomSource::new(*seed), class: config.angel_class },
            AngelStrategySpec::GreedySpread => {
                let mut candidates = non_universal_coins(k);
                if config.angel_class == ResourceClass::Universal {
                    candidates.push(CoinMatrix::dft(k).matrix().clone());
                    if k == 1 {
                        candidates.push(CoinMatrix::hadamard_type().matrix().clone());
                    }
                }
                AngelPlayer::Greedy { candidates }
            }
        })
    }

    fn reseeded(&self, rng: &mut RandomSource) -> Self {
        match self {
            AngelStrategySpec::RandomCoin { .. } => AngelStrategySpec::RandomCoin { seed: rng.next_u64() },
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum AngelPlayer {
    Fixed(UnitaryMatrix),
    Random { rng: RandomSource, class: ResourceClass },
    Greedy { candidates: Vec<UnitaryMatrix> },
}

impl AngelStrategy for AngelPlayer {
    fn select(&mut self, ctx: &AngelContext<'_>) -> UnitaryMatrix {
        let k = ctx.config.walker.k;
        match self {
            AngelPlayer::Fixed(u) => u.clone(),
            AngelPlayer::Random { rng, class } => match class {
                ResourceClass::Universal => UnitaryMatrix::random(2 * k + 1, rng).expect("positive dimension"),
                _ => {
                    let set = non_universal_coins(k);
                    set[rng.below(set.len())].clone()
                }
            },
            AngelPlayer::Greedy { candidates } => {
                let probe = MatchState {
                    config: ctx.config.clone(),
                    round: ctx.round,
                    board: ctx.board.clone(),
                    angel: ctx.angel.clone(),
                    history: Vec::new(),
                    status: MatchStatus::Ongoing,
                    fresh_empty: None,
                };
                let mut best: Option<(usize, &UnitaryMatrix)> = None;
                for c in candidates.iter() {
                    let mut trial = probe.clone();
                    if trial.angel_move(c).is_err() {
                        continue;
                    }
                    let support = if trial.status == MatchStatus::Ongoing {
                        trial.mu().iter().filter(|&&p| p > SUPPORT_THRESHOLD).count()
                    } else {
                        0
                    };
                    if best.is_none_or(|(s, _)| support > s) {
                        best = Some((support, c));
                    }
                }
                best.map(|(_, c)| c.clone()).unwrap_or_else(|| UnitaryMatrix::identity(2 * k + 1))
            }
        }
    }
}

/// Serializable description of a Devil auto-player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DevilPolicySpec {
    /// Sweeps the board left to right, skipping known blocks.
    Scanner,
    RandomSite { seed: u64 },
}

impl DevilPolicySpec {
    pub fn build(&self) -> DevilPlayer {
        match self {
            DevilPolicySpec::Scanner => DevilPlayer::Scanner,
            DevilPolicySpec::RandomSite { seed } => DevilPlayer::Random(RandomSource::new(*seed)),
        }
    }

    fn reseeded(&self, rng: &mut RandomSource) -> Self {
        match self {
            DevilPolicySpec::RandomSite { .. } => DevilPolicySpec::RandomSite { seed: rng.next_u64() },
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum DevilPlayer {
    Scanner,
    Random(RandomSource),
}

impl DevilPolicy for DevilPlayer {
    fn target(&mut self, view: &DevilView) -> usize {
        let free: Vec<usize> = (0..view.length).filter(|x| !view.blocked_sites.contains(x)).collect();
        if free.is_empty() {
            return 0;
        }
        match self {
            DevilPlayer::Scanner => {
                let start = view.detections.last().map_or(0, |d| d.site + 1);
                *free.iter().find(|&&x| x >= start).unwrap_or(&free[0])
            }
            DevilPlayer::Random(rng) => free[rng.below(free.len())],
        }
    }
}

/// A finished match as written to transcripts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub config: MatchConfig,
    pub angel: AngelStrategySpec,
    pub devil: DevilPolicySpec,
    pub status: MatchStatus,
    pub winner: Winner,
    pub rounds: usize,
    pub events: Vec<MatchEvent>,
    pub blocked_sites: Vec<usize>,
}

/// Plays a whole match. Measurements draw from `config.seed`.
pub fn run_match(config: &MatchConfig, angel: &AngelStrategySpec, devil: &DevilPolicySpec) -> Result<MatchRecord> {
    let mut state = MatchState::new(config.clone())?;
    let mut angel_player = angel.build(config)?;
    let mut devil_player = devil.build();
    let mut rng = RandomSource::new(config.seed);
    while state.status == MatchStatus::Ongoing {
        let target = devil_player.target(&state.devil_view());
        state.play_round(DevilAction { target }, &mut angel_player, &mut rng)?;
    }
    Ok(MatchRecord {
        config: config.clone(),
        angel: angel.clone(),
        devil: devil.clone(),
        status: state.status,
        winner: state.winner().expect("terminal"),
        rounds: state.round,
        blocked_sites: state.board.blocked_sites(),
        events: state.history,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub matches: usize,
    pub angel_wins: usize,
    pub devil_wins: usize,
    pub angel_win_rate: f64,
    pub mean_rounds: f64,
}

/// Plays `matches` matches. Match `i` gets seeds forked from `config.seed`,
/// so the batch is reproducible from that one number.
pub fn run_batch(
    config: &MatchConfig,
    angel: &AngelStrategySpec,
    devil: &DevilPolicySpec,
    matches: usize,
) -> Result<(Vec<MatchRecord>, BatchSummary)> {
    let mut master = RandomSource::new(config.seed);
    let mut records = Vec::with_capacity(matches);
    for _ in 0..matches {
        let mut cfg = config.clone();
        cfg.seed = master.next_u64();
        let a = angel.reseeded(&mut master);
        let d = devil.reseeded(&mut master);
        records.push(run_match(&cfg, &a, &d)?);
    }
    let angel_wins = records.iter().filter(|r| r.winner == Winner::Angel).count();
    let summary = BatchSummary {
        matches,
        angel_wins,
        devil_wins: matches - angel_wins,
        angel_win_rate: if matches == 0 { 0.0 } else { angel_wins as f64 / matches as f64 },
        mean_rounds: if matches == 0 { 0.0 } else { records.iter().map(|r| r.rounds as f64).sum::<f64>() / matches as f64 },
    };
    Ok((records, summary))
}

/// Upper bound on live branches in [`enumerate_matches`].
pub const ENUMERATION_LIMIT: usize = 1 << 16;

/// Every possible course of a match with its probability, branching on each
/// measurement outcome instead of sampling.
pub fn enumerate_matches(config: &MatchConfig, angel: &AngelStrategySpec, devil: &DevilPolicySpec) -> Result<Vec<(MatchState, f64)>> {
    let start = MatchState::new(config.clone())?;
    let mut live = vec![(start, angel.build(config)?, devil.build(), 1.0)];
    let mut done = Vec::new();
    while let Some((state, angel_player, devil_player, p)) = live.pop() {
        if state.status != MatchStatus::Ongoing {
            done.push((state, p));
            continue;
        }
        let mut dp = devil_player.clone();
        let target = dp.target(&state.devil_view());
        // a branch is kept only if every outcome it fixes was actually drawn
        for (detection, ancilla) in [(0u8, 0u8), (0, 1), (1, 0)] {
            let mut s = state.clone();
            let mut a = angel_player.clone();
            let mut draw = Draw::Forced { detection, ancilla, used: 0 };
            let q = match s.round_with(DevilAction { target }, &mut a, &mut draw) {
                Ok(q) => q,
                Err(AngelError::ImpossibleBranch) => continue,
                Err(e) => return Err(e),
            };
            let Draw::Forced { used, .. } = draw else { unreachable!() };
            let fixed = match (detection, ancilla) {
                (0, 0) => 0,
                (1, 0) => 1,
                _ => 2,
            };
            if used < fixed || q <= 0.0 {
                continue;
            }
            live.push((s, a, dp.clone(), p * q));
        }
        if live.len() + done.len() > ENUMERATION_LIMIT {
            return Err(AngelError::EnumerationTooLarge(ENUMERATION_LIMIT));
        }
    }
    Ok(done)
}
