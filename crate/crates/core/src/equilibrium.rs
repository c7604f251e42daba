//! Best responses, Nash equilibria, subgames and truncated games over a
//! finite grid of unitary strategies.
//!
//! Results are "ε-Nash at grid resolution G": deviations are only searched
//! over the grid (plus the profile's own strategies).

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gametree::{
    GameDefinition, GameError, InfoSetId, NodeDef, NodeId, NodeKind, NodeLabel, Partitions, PlayerId, QuantumGame,
    StrategyProfile,
};
use crate::qsim::UnitaryMatrix;

pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_EVALUATION_BUDGET: u64 = 10_000_000;
/// Subgame roots reached with probability at or below this are treated as unreachable.
pub const REACH_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("grid resolution must be at least 2, got {0}")]
    GridTooCoarse(usize),
    #[error("strategy space needs at least one qubit")]
    NoQubits,
    #[error("strategy space acts on dimension {space}, game dimension is {game}")]
    DimensionMismatch { space: usize, game: usize },
    #[error("search needs {needed} payoff evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error(transparent)]
    Game(#[from] GameError),
}

pub type Result<T> = std::result::Result<T, EquilibriumError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub theta: f64,
    pub phi: f64,
    pub lambda: f64,
}

impl EulerAngles {
    pub fn unitary(&self) -> UnitaryMatrix {
        UnitaryMatrix::euler(self.theta, self.phi, self.lambda)
    }
}

/// Recovers `(θ, φ, λ)` and the global phase `α` with
/// `u = e^{iα} U(θ, φ, λ)`. Only defined for 2x2 matrices.
pub fn euler_angles(u: &UnitaryMatrix) -> Option<(EulerAngles, f64)> {
    if u.dim() != 2 {
        return None;
    }
    let (u00, u01, u10, u11) = (u.get(0, 0), u.get(0, 1), u.get(1, 0), u.get(1, 1));
    let theta = 2.0 * u10.norm().atan2(u00.norm());
    let wrap = |x: f64| x.rem_euclid(2.0 * PI);
    let (alpha, phi, lambda) = if u00.norm() >= u10.norm() {
        let alpha = u00.arg();
        if u10.norm() < 1e-12 {
            (alpha, 0.0, wrap(u11.arg() - alpha))
        } else {
            (alpha, wrap(u10.arg() - alpha), wrap((-u01).arg() - alpha))
        }
    } else {
        // cos(θ/2) may vanish: fix α from the off-diagonal entries
        let alpha = (-u01).arg();
        let lambda = if u00.norm() < 1e-12 { 0.0 } else { wrap((-u01).arg() - u00.arg()) };
        let alpha = if u00.norm() < 1e-12 { alpha } else { u00.arg() };
        (alpha, wrap(u10.arg() - alpha), lambda)
    };
    Some((EulerAngles { theta, phi, lambda }, alpha))
}

/// A grid strategy: its position in the enumeration, the per-qubit angles and
/// the resulting unitary (tensor product over qubits, qubit 0 first).
#[derive(Clone, Debug, PartialEq)]
pub struct GridStrategy {
    pub index: usize,
    pub angles: Vec<EulerAngles>,
    pub unitary: UnitaryMatrix,
}

/// Finite strategy set `S_i`: tensor products of single-qubit Euler grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySpace {
    pub qubit_count: usize,
    pub grid: usize,
    pub tie_tolerance: f64,
    pub evaluation_budget: u64,
}

impl StrategySpace {
    pub fn new(grid: usize) -> Result<Self> {
        Self::with_qubits(1, grid)
    }

    pub fn with_qubits(qubit_count: usize, grid: usize) -> Result<Self> {
        if grid < 2 {
            return Err(EquilibriumError::GridTooCoarse(grid));
        }
        if qubit_count == 0 {
            return Err(EquilibriumError::NoQubits);
        }
        Ok(Self { qubit_count, grid, tie_tolerance: DEFAULT_TIE_TOLERANCE, evaluation_budget: DEFAULT_EVALUATION_BUDGET })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.evaluation_budget = budget;
        self
    }

    pub fn with_tie_tolerance(mut self, tol: f64) -> Self {
        self.tie_tolerance = tol;
        self
    }

    pub fn dimension(&self) -> usize {
        1 << self.qubit_count
    }

    /// Number of strategies, `(G^3)^qubits`.
    pub fn size(&self) -> usize {
        self.grid.pow(3).pow(self.qubit_count as u32)
    }

    /// Single-qubit grid in lexicographic `(θ, φ, λ)` order.
    pub fn single_qubit_angles(&self) -> Vec<EulerAngles> {
        let g = self.grid;
        let theta = |j: usize| if j == g - 1 { PI } else { PI * j as f64 / (g - 1) as f64 };
        let turn = |j: usize| 2.0 * PI * j as f64 / g as f64;
        let mut out = Vec::with_capacity(g * g * g);
        for a in 0..g {
            for b in 0..g {
                for c in 0..g {
                    out.push(EulerAngles { theta: theta(a), phi: turn(b), lambda: turn(c) });
                }
            }
        }
        out
    }

    pub fn strategies(&self) -> Vec<GridStrategy> {
        let single = self.single_qubit_angles();
        let mut out: Vec<GridStrategy> = single
            .iter()
            .map(|a| GridStrategy { index: 0, angles: vec![*a], unitary: a.unitary() })
            .collect();
        for _ in 1..self.qubit_count {
            out = out
                .iter()
                .flat_map(|s| {
                    single.iter().map(move |a| {
                        let mut angles = s.angles.clone();
                        angles.push(*a);
                        GridStrategy { index: 0, angles, unitary: s.unitary.tensor(&a.unitary()) }
                    })
                })
                .collect();
        }
        for (i, s) in out.iter_mut().enumerate() {
            s.index = i;
        }
        out
    }

    /// Finds a grid strategy equal to `u` entrywise within `tol`.
    pub fn locate(&self, strategies: &[GridStrategy], u: &UnitaryMatrix, tol: f64) -> Option<usize> {
        strategies.iter().position(|s| s.unitary.dim() == u.dim() && s.unitary.max_distance(u) <= tol)
    }
}

/// The grid's unitaries in enumeration order.
pub fn enumerate_strategies(space: &StrategySpace) -> Vec<UnitaryMatrix> {
    space.strategies().into_iter().map(|s| s.unitary).collect()
}

/// One information set's strategy as it appears in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<EulerAngles>>,
    pub unitary: UnitaryMatrix,
}

impl StrategyEntry {
    fn from_grid(s: &GridStrategy) -> Self {
        Self { grid_index: Some(s.index), angles: Some(s.angles.clone()), unitary: s.unitary.clone() }
    }

    fn describe(u: &UnitaryMatrix, space: &StrategySpace, grid: &[GridStrategy]) -> Self {
        if let Some(i) = space.locate(grid, u, 1e-12) {
            return Self::from_grid(&grid[i]);
        }
        Self { grid_index: None, angles: euler_angles(u).map(|(a, _)| vec![a]), unitary: u.clone() }
    }
}

pub type ProfileEntries = BTreeMap<InfoSetId, StrategyEntry>;

fn to_profile(entries: &ProfileEntries) -> StrategyProfile {
    let mut p = StrategyProfile::new();
    for (k, e) in entries {
        p.insert(k.clone(), e.unitary.clone());
    }
    p
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestResponseSet {
    pub responder: PlayerId,
    /// Strategies of the information sets the responder does not own.
    pub context: ProfileEntries,
    /// Every joint assignment to the responder's sets within the tie
    /// tolerance of `value`, in grid order.
    pub responses: Vec<ProfileEntries>,
    pub value: f64,
}

impl BestResponseSet {
    /// Grid indices of each response, in the responder's turn order.
    pub fn response_indices(&self) -> Vec<Vec<usize>> {
        self.responses.iter().map(|r| r.values().map(|e| e.grid_index.expect("grid response")).collect()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub profile: ProfileEntries,
    pub epsilon: f64,
    pub grid: usize,
    pub payoffs: BTreeMap<PlayerId, f64>,
    /// Largest payoff gain any grid deviation offers each player (never negative).
    pub per_player_slack: BTreeMap<PlayerId, f64>,
    /// For players with a strictly profitable deviation, the best one found.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub deviations: BTreeMap<PlayerId, ProfileEntries>,
    pub is_nash: bool,
}

impl EquilibriumReport {
    pub fn strategy_profile(&self) -> StrategyProfile {
        to_profile(&self.profile)
    }

    pub fn max_slack(&self) -> f64 {
        self.per_player_slack.values().copied().fold(0.0, f64::max)
    }
}

/// Per-search view of a game: information sets in turn order, their owners,
/// and the grid.
struct Search<'a> {
    game: &'a QuantumGame,
    space: &'a StrategySpace,
    grid: &'a [GridStrategy],
    order: Vec<InfoSetId>,
    /// Definition position of each turn-order set.
    positions: Vec<usize>,
    owners: Vec<PlayerId>,
}

impl<'a> Search<'a> {
    fn new(game: &'a QuantumGame, space: &'a StrategySpace, grid: &'a [GridStrategy]) -> Result<Self> {
        if space.dimension() != game.dimension() {
            return Err(EquilibriumError::DimensionMismatch { space: space.dimension(), game: game.dimension() });
        }
        let order: Vec<InfoSetId> = game.turn_order().into_iter().cloned().collect();
        let positions = order.iter().map(|s| game.info_set_position(s)).collect::<std::result::Result<_, _>>()?;
        let owners = order.iter().map(|s| game.info_set_owner(s)).collect::<std::result::Result<_, _>>()?;
        Ok(Self { game, space, grid, order, positions, owners })
    }

    fn owned_by(&self, player: PlayerId) -> Vec<usize> {
        (0..self.order.len()).filter(|&j| self.owners[j] == player).collect()
    }

    fn budget(&self, needed: u128) -> Result<()> {
        if needed > self.space.evaluation_budget as u128 {
            return Err(EquilibriumError::BudgetExceeded { needed, budget: self.space.evaluation_budget });
        }
        Ok(())
    }

    fn grid_power(&self, k: usize) -> u128 {
        (self.grid.len() as u128).saturating_pow(k as u32)
    }

    /// Payoffs with `chosen[j]` the strategy of turn-order set `j`.
    fn eval(&self, chosen: &[&UnitaryMatrix]) -> Result<Vec<f64>> {
        let mut by_position: Vec<&UnitaryMatrix> = chosen.to_vec();
        for (j, &pos) in self.positions.iter().enumerate() {
            by_position[pos] = chosen[j];
        }
        Ok(self.game.expected_payoffs_indexed(&by_position, None)?)
    }

    fn chosen_from<'p>(&self, profile: &'p StrategyProfile) -> Result<Vec<&'p UnitaryMatrix>> {
        self.order
            .iter()
            .map(|s| {
                let u = profile.get(s).ok_or_else(|| GameError::UncoveredInfoSet(s.clone()))?;
                if u.dim() != self.game.dimension() {
                    return Err(GameError::StrategyDimension { set: s.clone(), expected: self.game.dimension(), found: u.dim() }.into());
                }
                Ok(u)
            })
            .collect()
    }

    fn entries(&self, sets: &[usize], chosen: &[&UnitaryMatrix]) -> ProfileEntries {
        sets.iter().map(|&j| (self.order[j].clone(), StrategyEntry::describe(chosen[j], self.space, &self.grid))).collect()
    }

    fn grid_entries(&self, sets: &[usize], idx: &[usize]) -> ProfileEntries {
        sets.iter().zip(idx).map(|(&j, &g)| (self.order[j].clone(), StrategyEntry::from_grid(&self.grid[g]))).collect()
    }

    /// Best joint assignment of `sets` with the rest of `chosen` fixed:
    /// `(best value, first grid assignment attaining it)`.
    fn best_over(&self, chosen: &[&'a UnitaryMatrix], sets: &[usize], player_index: usize) -> Result<(f64, Vec<usize>)> {
        let mut trial: Vec<&UnitaryMatrix> = chosen.to_vec();
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for idx in MixedRadix::new(self.grid.len(), sets.len()) {
            for (&j, &g) in sets.iter().zip(&idx) {
                trial[j] = &self.grid[g].unitary;
            }
            let v = self.eval(&trial)?[player_index];
            if v > best.0 {
                best = (v, idx);
            }
        }
        Ok(best)
    }

    fn deviation_groups(sets: &[usize]) -> Vec<Vec<usize>> {
        if sets.len() <= 2 {
            vec![sets.to_vec()]
        } else {
            sets.iter().map(|&j| vec![j]).collect()
        }
    }

    fn report(&self, chosen: &[&UnitaryMatrix], epsilon: f64) -> Result<EquilibriumReport> {
        let current = self.eval(chosen)?;
        let mut slack = BTreeMap::new();
        let mut deviations = BTreeMap::new();
        for (pi, &p) in self.game.players().iter().enumerate() {
            let sets = self.owned_by(p);
            let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
            for group in Self::deviation_groups(&sets) {
                let (v, idx) = self.best_over(chosen, &group, pi)?;
                if best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, group, idx));
                }
            }
            let gain = best.as_ref().map_or(0.0, |b| (b.0 - current[pi]).max(0.0));
            slack.insert(p, gain);
            if let Some((_, group, idx)) = best.filter(|_| gain > 0.0) {
                deviations.insert(p, self.grid_entries(&group, &idx));
            }
        }
        let all: Vec<usize> = (0..self.order.len()).collect();
        Ok(EquilibriumReport {
            profile: self.entries(&all, chosen),
            epsilon,
            grid: self.space.grid,
            payoffs: self.game.players().iter().copied().zip(current).collect(),
            is_nash: slack.values().all(|&s| s <= epsilon),
            per_player_slack: slack,
            deviations,
        })
    }
}

/// Counts through `len` digits in base `radix`, most significant first.
struct MixedRadix {
    radix: usize,
    digits: Vec<usize>,
    done: bool,
}

impl MixedRadix {
    fn new(radix: usize, len: usize) -> Self {
        Self { radix, digits: vec![0; len], done: radix == 0 && len > 0 }
    }
}

impl Iterator for MixedRadix {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.digits.clone();
        self.done = true;
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < self.radix {
                self.done = false;
                break;
            }
            *d = 0;
        }
        Some(out)
    }
}

/// `b_i(U_{-i})`: the grid assignments to `player`'s information sets that
/// maximize their payoff against `opposing`.
pub fn best_response(
    game: &QuantumGame,
    player: PlayerId,
    opposing: &StrategyProfile,
    space: &StrategySpace,
) -> Result<BestResponseSet> {
    let grid = space.strategies();
    let search = Search::new(game, space, &grid)?;
    let pi = game.player_index(player)?;
    let own = search.owned_by(player);
    let others: Vec<usize> = (0..search.order.len()).filter(|j| !own.contains(j)).collect();
    search.budget(search.grid_power(own.len()))?;

    let identity = UnitaryMatrix::identity(game.dimension());
    let mut chosen: Vec<&UnitaryMatrix> = vec![&identity; search.order.len()];
    for &j in &others {
        let set = &search.order[j];
        let u = opposing.get(set).ok_or_else(|| GameError::UncoveredInfoSet(set.clone()))?;
        if u.dim() != game.dimension() {
            return Err(GameError::StrategyDimension { set: set.clone(), expected: game.dimension(), found: u.dim() }.into());
        }
        chosen[j] = u;
    }
    let context = search.entries(&others, &chosen);
    best_response_from(&search, player, pi, &own, chosen, context)
}

fn best_response_from<'s>(
    search: &'s Search<'_>,
    player: PlayerId,
    pi: usize,
    own: &[usize],
    mut chosen: Vec<&'s UnitaryMatrix>,
    context: ProfileEntries,
) -> Result<BestResponseSet> {
    let mut values = Vec::new();
    for idx in MixedRadix::new(search.grid.len(), own.len()) {
        for (&j, &g) in own.iter().zip(&idx) {
            chosen[j] = &search.grid[g].unitary;
        }
        values.push((search.eval(&chosen)?[pi], idx));
    }
    let value = values.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    let responses = values
        .iter()
        .filter(|(v, _)| value - v <= search.space.tie_tolerance)
        .map(|(_, idx)| search.grid_entries(own, idx))
        .collect();
    Ok(BestResponseSet { responder: player, context, responses, value })
}

/// The best-response correspondence of `player`, keyed by the index of the
/// opposing grid profile (mixed radix over the opposing sets in turn order,
/// earliest set most significant).
pub fn best_response_correspondence(
    game: &QuantumGame,
    player: PlayerId,
    space: &StrategySpace,
) -> Result<BTreeMap<usize, BestResponseSet>> {
    let grid = space.strategies();
    let search = Search::new(game, space, &grid)?;
    let pi = game.player_index(player)?;
    let own = search.owned_by(player);
    let others: Vec<usize> = (0..search.order.len()).filter(|j| !own.contains(j)).collect();
    search.budget(search.grid_power(search.order.len()))?;

    let mut out = BTreeMap::new();
    for (key, idx) in MixedRadix::new(search.grid.len(), others.len()).enumerate() {
        let mut chosen: Vec<&UnitaryMatrix> = vec![&search.grid[0].unitary; search.order.len()];
        for (&j, &g) in others.iter().zip(&idx) {
            chosen[j] = &search.grid[g].unitary;
        }
        let context = search.grid_entries(&others, &idx);
        out.insert(key, best_response_from(&search, player, pi, &own, chosen, context)?);
    }
    Ok(out)
}

/// Measures how much each player could gain by deviating on the grid:
/// one information set at a time, or jointly when the player owns at most two.
pub fn is_nash(game: &QuantumGame, profile: &StrategyProfile, space: &StrategySpace, epsilon: f64) -> Result<EquilibriumReport> {
    nash_report(game, profile, space, &space.strategies(), epsilon)
}

fn nash_report(
    game: &QuantumGame,
    profile: &StrategyProfile,
    space: &StrategySpace,
    grid: &[GridStrategy],
    epsilon: f64,
) -> Result<EquilibriumReport> {
    let search = Search::new(game, space, grid)?;
    let chosen = search.chosen_from(profile)?;
    let mut needed = 1u128;
    for &p in game.players() {
        for group in Search::deviation_groups(&search.owned_by(p)) {
            needed += search.grid_power(group.len());
        }
    }
    search.budget(needed)?;
    search.report(&chosen, epsilon)
}

/// Every grid profile that is ε-Nash, in grid order (mixed radix over the
/// information sets in turn order, earliest set most significant).
pub fn find_nash(game: &QuantumGame, space: &StrategySpace, epsilon: f64) -> Result<Vec<EquilibriumReport>> {
    let grid = space.strategies();
    let search = Search::new(game, space, &grid)?;
    let m = search.order.len();
    let s = search.grid.len();
    let total = search.grid_power(m);
    search.budget(total)?;
    let total = total as usize;
    let n = game.players().len();

    // payoff table over all grid profiles
    let mut table = vec![0.0; total * n];
    let mut chosen: Vec<&UnitaryMatrix> = vec![&search.grid[0].unitary; m];
    for (flat, idx) in MixedRadix::new(s, m).enumerate() {
        for (j, &g) in idx.iter().enumerate() {
            chosen[j] = &search.grid[g].unitary;
        }
        table[flat * n..(flat + 1) * n].copy_from_slice(&search.eval(&chosen)?);
    }

    let stride: Vec<usize> = (0..m).map(|j| s.pow((m - 1 - j) as u32)).collect();
    let digit = |flat: usize, j: usize| (flat / stride[j]) % s;
    let mut slack = vec![0.0f64; total * n];
    let mut best_at = vec![usize::MAX; total * n];
    for (pi, &p) in game.players().iter().enumerate() {
        for group in Search::deviation_groups(&search.owned_by(p)) {
            // best over the group's coordinates, keyed by the profile with them zeroed
            let key = |flat: usize| flat - group.iter().map(|&j| digit(flat, j) * stride[j]).sum::<usize>();
            let mut best = vec![(f64::NEG_INFINITY, 0usize); total];
            for flat in 0..total {
                let v = table[flat * n + pi];
                let b = &mut best[key(flat)];
                if v > b.0 {
                    *b = (v, flat);
                }
            }
            for flat in 0..total {
                let (v, at) = best[key(flat)];
                let gain = (v - table[flat * n + pi]).max(0.0);
                if best_at[flat * n + pi] == usize::MAX || gain > slack[flat * n + pi] {
                    slack[flat * n + pi] = gain;
                    best_at[flat * n + pi] = at;
                }
            }
        }
    }

    let mut out = Vec::new();
    let all: Vec<usize> = (0..m).collect();
    for flat in 0..total {
        if (0..n).any(|pi| slack[flat * n + pi] > epsilon) {
            continue;
        }
        let idx: Vec<usize> = (0..m).map(|j| digit(flat, j)).collect();
        let mut per_player_slack = BTreeMap::new();
        let mut deviations = BTreeMap::new();
        for (pi, &p) in game.players().iter().enumerate() {
            let gain = slack[flat * n + pi];
            per_player_slack.insert(p, gain);
            if gain > 0.0 {
                let at = best_at[flat * n + pi];
                let own = search.owned_by(p);
                let dev: Vec<usize> = own.iter().map(|&j| digit(at, j)).collect();
                deviations.insert(p, search.grid_entries(&own, &dev));
            }
        }
        out.push(EquilibriumReport {
            profile: search.grid_entries(&all, &idx),
            epsilon,
            grid: space.grid,
            payoffs: game.players().iter().enumerate().map(|(pi, &p)| (p, table[flat * n + pi])).collect(),
            per_player_slack,
            deviations,
            is_nash: true,
        });
    }
    Ok(out)
}

fn require_subgame_root(game: &QuantumGame, node: &NodeId) -> Result<()> {
    if let Some(set) = game.subgame_closure_violation(node)? {
        return Err(GameError::InvalidSubgameRoot { node: node.clone(), set }.into());
    }
    Ok(())
}

/// Removes players who own no move, projecting payoff vectors to match.
/// A game without moves keeps every player.
fn drop_idle_players(def: &mut GameDefinition) {
    let owners: BTreeSet<PlayerId> = def.nodes.iter().filter_map(|n| n.owner).collect();
    if owners.is_empty() {
        return;
    }
    let keep: Vec<usize> = (0..def.players.len()).filter(|&i| owners.contains(&def.players[i])).collect();
    let project = |g: &Vec<f64>| keep.iter().map(|&i| g[i]).collect::<Vec<f64>>();
    def.players = keep.iter().map(|&i| def.players[i]).collect();
    for g in def.payoffs.values_mut() {
        *g = project(g);
    }
    if let Some(rows) = def.observation_payoffs.as_mut() {
        for row in rows.iter_mut() {
            *row = project(row);
        }
    }
}

/// The subgame rooted at `node`. A coherent root takes the normalized state
/// that `profile` delivers to it as its initial state.
pub fn extract_subgame(game: &QuantumGame, node: &NodeId, profile: &StrategyProfile) -> Result<QuantumGame> {
    require_subgame_root(game, node)?;
    let entry = game.entry_state(node, profile)?;
    let inside: BTreeSet<NodeId> = game.subtree(node)?.into_iter().collect();
    let src = game.definition();
    let nodes: Vec<NodeDef> = src
        .nodes
        .iter()
        .filter(|n| inside.contains(&n.id))
        .map(|n| {
            let mut n = n.clone();
            if &n.id == node && n.label == NodeLabel::Coherent {
                n.label = NodeLabel::State(entry.clone());
            }
            n
        })
        .collect();
    let mut def = GameDefinition {
        name: src.name.as_ref().map(|s| format!("{s}/{node}")),
        dimension: src.dimension,
        players: src.players.clone(),
        root: node.clone(),
        nodes,
        partitions: Partitions {
            information_sets: src
                .partitions
                .information_sets
                .iter()
                .filter(|s| s.moves.iter().any(|m| inside.contains(m)))
                .cloned()
                .collect(),
        },
        payoffs: src.payoffs.iter().filter(|(k, _)| inside.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
        observation_payoffs: src.observation_payoffs.clone(),
    };
    drop_idle_players(&mut def);
    Ok(QuantumGame::new(def)?)
}

/// Replaces the subgame at `node` with a single vertex paying each player
/// their expected payoff in that subgame under `profile`.
pub fn truncate(game: &QuantumGame, node: &NodeId, profile: &StrategyProfile) -> Result<QuantumGame> {
    require_subgame_root(game, node)?;
    let value = game.subgame_expected_payoffs(node, profile)?;
    let below: BTreeSet<NodeId> = game.subtree(node)?.into_iter().filter(|n| n != node).collect();
    let src = game.definition();
    let nodes: Vec<NodeDef> = src
        .nodes
        .iter()
        .filter(|n| !below.contains(&n.id))
        .map(|n| {
            if &n.id == node {
                NodeDef { id: n.id.clone(), kind: NodeKind::Vertex, owner: None, label: n.label.clone(), children: vec![] }
            } else {
                n.clone()
            }
        })
        .collect();
    let mut payoffs: BTreeMap<NodeId, Vec<f64>> =
        src.payoffs.iter().filter(|(k, _)| !below.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect();
    payoffs.insert(node.clone(), value);
    let mut def = GameDefinition {
        name: src.name.as_ref().map(|s| format!("{s}|{node}")),
        dimension: src.dimension,
        players: src.players.clone(),
        root: src.root.clone(),
        nodes,
        partitions: Partitions {
            information_sets: src
                .partitions
                .information_sets
                .iter()
                .filter(|s| s.moves.iter().all(|m| !below.contains(m) && m != node))
                .cloned()
                .collect(),
        },
        payoffs,
        observation_payoffs: src.observation_payoffs.clone(),
    };
    drop_idle_players(&mut def);
    Ok(QuantumGame::new(def)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgameCheck {
    pub root: NodeId,
    pub reach_probability: f64,
    pub per_player_slack: BTreeMap<PlayerId, f64>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgameReport {
    pub epsilon: f64,
    /// Restriction of the profile is ε-Nash in every reachable subgame.
    pub property1: Vec<SubgameCheck>,
    /// Residual profile is ε-Nash in every truncated game.
    pub property2: Vec<SubgameCheck>,
    /// Coherent subgame roots with no well-defined entry state under the profile.
    pub skipped: Vec<NodeId>,
    pub holds: bool,
}

impl SubgameReport {
    pub fn failures(&self) -> impl Iterator<Item = &SubgameCheck> {
        self.property1.iter().chain(&self.property2).filter(|c| !c.holds)
    }
}

/// Checks both subgame properties of an equilibrium on every valid subgame.
pub fn check_theorem1(
    game: &QuantumGame,
    report: &EquilibriumReport,
    space: &StrategySpace,
    epsilon: f64,
) -> Result<SubgameReport> {
    check_subgame_properties(game, &report.strategy_profile(), space, epsilon)
}

pub fn check_subgame_properties(
    game: &QuantumGame,
    profile: &StrategyProfile,
    space: &StrategySpace,
    epsilon: f64,
) -> Result<SubgameReport> {
    let mut property1 = Vec::new();
    let mut property2 = Vec::new();
    let mut skipped = Vec::new();
    let grid = space.strategies();
    let roots: Vec<NodeId> = game.subtree(game.root())?;
    for root in roots {
        if game.subgame_closure_violation(&root)?.is_some() {
            continue;
        }
        let reach = game.reach_probability(&root, profile)?;
        let coherent = game.label(&root)? == &NodeLabel::Coherent;
        if coherent && reach <= REACH_THRESHOLD {
            skipped.push(root);
            continue;
        }
        let check = |derived: &QuantumGame| -> Result<SubgameCheck> {
            let r = nash_report(derived, &profile.restricted_to(derived), space, &grid, epsilon)?;
            Ok(SubgameCheck { root: root.clone(), reach_probability: reach, holds: r.is_nash, per_player_slack: r.per_player_slack })
        };
        if reach > REACH_THRESHOLD {
            property1.push(check(&extract_subgame(game, &root, profile)?)?);
        }
        property2.push(check(&truncate(game, &root, profile)?)?);
    }
    let holds = property1.iter().chain(&property2).all(|c| c.holds);
    Ok(SubgameReport { epsilon, property1, property2, skipped, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gametree::builders::*;
    use crate::gametree::{InfoSetDef, NodeKind};
    use crate::qsim::RandomSource;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn space(g: usize) -> StrategySpace {
        StrategySpace::new(g).unwrap()
    }

    fn grid_profile(game: &QuantumGame, sp: &StrategySpace, idx: &[usize]) -> StrategyProfile {
        let grid = enumerate_strategies(sp);
        let mut p = StrategyProfile::new();
        for (s, &i) in game.turn_order().into_iter().zip(idx) {
            p.insert(s.clone(), grid[i].clone());
        }
        p
    }

    #[test]
    fn grid_enumeration() {
        let g2 = enumerate_strategies(&space(2));
        assert_eq!(g2.len(), 8);
        assert_eq!(g2[0].max_distance(&UnitaryMatrix::identity(2)), 0.0);
        for g in [2, 3, 5] {
            let all = enumerate_strategies(&space(g));
            assert_eq!(all.len(), g * g * g);
            assert!(all.iter().all(|u| u.unitarity_deviation() <= 1e-12));
        }
        let two = StrategySpace::with_qubits(2, 2).unwrap();
        let all = enumerate_strategies(&two);
        assert_eq!(all.len(), 64);
        assert!(all.iter().all(|u| u.dim() == 4 && u.unitarity_deviation() <= 1e-12));
        assert!(matches!(StrategySpace::new(1), Err(EquilibriumError::GridTooCoarse(1))));
    }

    #[test]
    fn coarse_grid_nests_in_finer_grid() {
        let fine = enumerate_strategies(&space(4));
        for u in enumerate_strategies(&space(2)) {
            assert!(fine.iter().any(|v| v.max_distance(&u) == 0.0));
        }
    }

    #[test]
    fn euler_angles_recover_matrix() {
        let mut rng = RandomSource::new(2);
        let mut cases: Vec<UnitaryMatrix> = (0..20).map(|_| UnitaryMatrix::random(2, &mut rng).unwrap()).collect();
        cases.extend([UnitaryMatrix::pauli_x(), UnitaryMatrix::pauli_z(), UnitaryMatrix::hadamard(), UnitaryMatrix::identity(2)]);
        cases.extend(enumerate_strategies(&space(3)));
        for u in cases {
            let (a, alpha) = euler_angles(&u).unwrap();
            let back = a.unitary().with_global_phase(alpha);
            assert!(back.max_distance(&u) < 1e-12, "{u:?} -> {a:?}");
        }
    }

    #[test]
    fn bit_flip_is_a_best_response() {
        let game = single_player_chain([0.0, 1.0]);
        let mut def = game.definition().clone();
        // one move only
        def.nodes.remove(1);
        def.nodes[0].children = vec![NodeId::new("o0"), NodeId::new("o1")];
        def.partitions.information_sets.retain(|s| s.id.as_str() == "u1");
        let game = QuantumGame::new(def).unwrap();
        let br = best_response(&game, PlayerId(1), &StrategyProfile::new(), &space(2)).unwrap();
        assert!((br.value - 1.0).abs() < 1e-12);
        assert!(br.responses.iter().all(|r| r.values().all(|e| (e.angles.as_ref().unwrap()[0].theta - PI).abs() < 1e-15)));
        assert_eq!(br.responses.len(), 4);
    }

    #[test]
    fn best_response_beats_every_grid_element() {
        let game = two_stage_game("g0", [[1.0, 1.0], [0.0, 0.0]]);
        let sp = space(4);
        let opposing = StrategyProfile::new().with("u1", UnitaryMatrix::hadamard());
        let br = best_response(&game, PlayerId(2), &opposing, &sp).unwrap();
        for u in enumerate_strategies(&sp) {
            let p = opposing.clone().with("u2", u);
            assert!(game.expected_payoff(&p, PlayerId(2), None).unwrap() <= br.value);
        }
        for r in &br.responses {
            let p = opposing.clone().with("u2", r[&InfoSetId::new("u2")].unitary.clone());
            let v = game.expected_payoff(&p, PlayerId(2), None).unwrap();
            assert!((v - br.value).abs() <= DEFAULT_TIE_TOLERANCE);
        }
        assert!(matches!(
            best_response(&game, PlayerId(2), &StrategyProfile::new(), &sp),
            Err(EquilibriumError::Game(GameError::UncoveredInfoSet(_)))
        ));
    }

    #[test]
    fn phase_duplicates_tie() {
        let game = two_stage_game("g0", [[1.0, 1.0], [0.0, 0.0]]);
        let sp = space(2);
        let opposing = StrategyProfile::new().with("u1", UnitaryMatrix::hadamard());
        let br = best_response(&game, PlayerId(2), &opposing, &sp).unwrap();
        // U(θ,φ,λ) and U(θ,φ+π,λ+π)·(-1)... every response differs from another by a global phase at most
        let values: Vec<f64> = br
            .responses
            .iter()
            .map(|r| {
                let u = r[&InfoSetId::new("u2")].unitary.with_global_phase(1.3);
                game.expected_payoff(&opposing.clone().with("u2", u), PlayerId(2), None).unwrap()
            })
            .collect();
        assert!(values.iter().all(|v| (v - br.value).abs() < 1e-12));
    }

    #[test]
    fn correspondence_covers_opposing_grid() {
        let game = bundled_two_stage();
        let sp = space(2);
        let corr = best_response_correspondence(&game, PlayerId(2), &sp).unwrap();
        assert_eq!(corr.len(), 8);
        let grid = enumerate_strategies(&sp);
        for (k, set) in &corr {
            let opposing = StrategyProfile::new().with("u1", grid[*k].clone());
            let direct = best_response(&game, PlayerId(2), &opposing, &sp).unwrap();
            assert_eq!(direct.value, set.value);
            assert_eq!(direct.response_indices(), set.response_indices());
            assert!(set.responses.len() <= grid.len());
        }
    }

    #[test]
    fn refining_the_grid_never_lowers_best_values() {
        let game = bundled_two_stage();
        let coarse = space(2);
        let fine = space(4);
        let fine_grid = enumerate_strategies(&fine);
        let coarse_corr = best_response_correspondence(&game, PlayerId(2), &coarse).unwrap();
        for (k, u) in enumerate_strategies(&coarse).into_iter().enumerate() {
            let j = fine_grid.iter().position(|v| v.max_distance(&u) == 0.0).unwrap();
            let opposing = StrategyProfile::new().with("u1", fine_grid[j].clone());
            let refined = best_response(&game, PlayerId(2), &opposing, &fine).unwrap();
            assert!(refined.value >= coarse_corr[&k].value);
        }
    }

    #[test]
    fn budget_guard() {
        let game = branching_example();
        let sp = space(4).with_budget(1000);
        assert!(matches!(find_nash(&game, &sp, 1e-9), Err(EquilibriumError::BudgetExceeded { .. })));
        let small = bundled_two_stage();
        assert!(matches!(
            best_response_correspondence(&small, PlayerId(1), &space(4).with_budget(10)),
            Err(EquilibriumError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn constant_game_everything_is_nash() {
        let game = two_stage_game("flat", [[0.5, 0.5], [0.5, 0.5]]);
        let sp = space(2);
        let all = find_nash(&game, &sp, 1e-9).unwrap();
        assert_eq!(all.len(), 64);
        let mut rng = RandomSource::new(5);
        let p = StrategyProfile::new()
            .with("u1", UnitaryMatrix::random(2, &mut rng).unwrap())
            .with("u2", UnitaryMatrix::random(2, &mut rng).unwrap());
        let r = is_nash(&game, &p, &sp, 0.0).unwrap();
        assert!(r.is_nash);
        assert!(r.per_player_slack.values().all(|&s| s < 1e-15));
    }

    #[test]
    fn best_response_profile_has_no_slack() {
        let game = single_player_chain([0.2, 0.9]);
        let sp = space(3);
        let br = best_response(&game, PlayerId(1), &StrategyProfile::new(), &sp).unwrap();
        let r = is_nash(&game, &to_profile(&br.responses[0]), &sp, 1e-12).unwrap();
        assert!(r.per_player_slack[&PlayerId(1)] <= 1e-12);
        assert!(r.is_nash);
    }

    #[test]
    fn profitable_deviation_is_reported() {
        let game = bundled_two_stage();
        let sp = space(3);
        // H then I leaves both players at half their best payoff
        let p = StrategyProfile::new().with("u1", UnitaryMatrix::hadamard()).with("u2", UnitaryMatrix::identity(2));
        let r = is_nash(&game, &p, &sp, 1e-9).unwrap();
        assert!(!r.is_nash);
        let dev = &r.deviations[&PlayerId(2)];
        let u = dev[&InfoSetId::new("u2")].unitary.clone();
        let gained = game.expected_payoff(&p.clone().with("u2", u), PlayerId(2), None).unwrap();
        let base = game.expected_payoff(&p, PlayerId(2), None).unwrap();
        assert!((gained - base - r.per_player_slack[&PlayerId(2)]).abs() < 1e-12);
        assert!(r.per_player_slack[&PlayerId(2)] > 1e-9);
        // exhaustive scan agrees on the size of the gain
        let best = enumerate_strategies(&sp)
            .into_iter()
            .map(|u| game.expected_payoff(&p.clone().with("u2", u), PlayerId(2), None).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - base - r.per_player_slack[&PlayerId(2)]).abs() < 1e-15);
    }

    fn oracle_nash(game: &QuantumGame, sp: &StrategySpace, eps: f64) -> Vec<(usize, usize)> {
        let grid = enumerate_strategies(sp);
        let pay = |i: usize, j: usize| {
            let p = StrategyProfile::new().with("u1", grid[i].clone()).with("u2", grid[j].clone());
            game.expected_payoffs(&p, None).unwrap()
        };
        let table: Vec<Vec<Vec<f64>>> = (0..grid.len()).map(|i| (0..grid.len()).map(|j| pay(i, j)).collect()).collect();
        let mut out = Vec::new();
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                let best1 = (0..grid.len()).map(|k| table[k][j][0]).fold(f64::NEG_INFINITY, f64::max);
                let best2 = (0..grid.len()).map(|k| table[i][k][1]).fold(f64::NEG_INFINITY, f64::max);
                if best1 - table[i][j][0] <= eps && best2 - table[i][j][1] <= eps {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn zero_sum_search_matches_oracle() {
        let game = zero_sum_two_stage();
        let sp = space(3);
        let found: Vec<(usize, usize)> = find_nash(&game, &sp, 1e-9)
            .unwrap()
            .iter()
            .map(|r| (r.profile[&InfoSetId::new("u1")].grid_index.unwrap(), r.profile[&InfoSetId::new("u2")].grid_index.unwrap()))
            .collect();
        assert_eq!(found, oracle_nash(&game, &sp, 1e-9));
    }

    #[test]
    fn found_equilibria_pass_is_nash() {
        let game = bundled_two_stage();
        let sp = space(2);
        let found = find_nash(&game, &sp, 1e-9).unwrap();
        assert!(!found.is_empty());
        for r in &found {
            let again = is_nash(&game, &r.strategy_profile(), &sp, 1e-9).unwrap();
            assert!(again.is_nash);
            assert_eq!(again.per_player_slack, r.per_player_slack);
            assert_eq!(again.payoffs, r.payoffs);
        }
        assert_eq!(found, find_nash(&game, &sp, 1e-9).unwrap());
    }

    #[test]
    fn joint_deviation_over_two_sets() {
        let game = single_player_chain([0.0, 1.0]);
        let sp = space(2);
        let found = find_nash(&game, &sp, 1e-9).unwrap();
        for r in &found {
            assert!((r.payoffs[&PlayerId(1)] - 1.0).abs() < 1e-12);
        }
        let p = grid_profile(&game, &sp, &[0, 0]);
        let r = is_nash(&game, &p, &sp, 1e-9).unwrap();
        assert!((r.per_player_slack[&PlayerId(1)] - 1.0).abs() < 1e-12);
        assert_eq!(r.deviations[&PlayerId(1)].len(), 2);
    }

    #[test]
    fn report_serializes_with_angles() {
        let game = bundled_two_stage();
        let sp = space(2);
        let r = &find_nash(&game, &sp, 1e-9).unwrap()[0];
        let json = serde_json::to_value(r).unwrap();
        assert!(json["profile"]["u1"]["angles"][0]["theta"].is_number());
        let back: EquilibriumReport = serde_json::from_value(json).unwrap();
        assert_eq!(&back, r);
    }

    #[test]
    fn root_subgame_is_whole_game() {
        let game = branching_example();
        let p = StrategyProfile::identities(&game);
        let sub = extract_subgame(&game, game.root(), &p).unwrap();
        assert_eq!(sub.definition().nodes, game.definition().nodes);
        assert_eq!(sub.players(), game.players());
    }

    #[test]
    fn straddling_information_set_is_named() {
        let game = branching_example();
        let p = StrategyProfile::identities(&game);
        match extract_subgame(&game, &NodeId::new("psi2_1"), &p) {
            Err(EquilibriumError::Game(GameError::InvalidSubgameRoot { set, .. })) => {
                assert!(["I1_b", "I1_c", "I2_a"].contains(&set.as_str()))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn per_move_tree() -> QuantumGame {
        let g = branching_example();
        let mut def = g.definition().clone();
        def.partitions.information_sets = g
            .definition()
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Move)
            .map(|n| InfoSetDef { id: InfoSetId(format!("u_{}", n.id)), owner: n.owner.unwrap(), moves: vec![n.id.clone()] })
            .collect();
        QuantumGame::new(def).unwrap()
    }

    fn random_profile(game: &QuantumGame, seed: u64) -> StrategyProfile {
        let mut rng = RandomSource::new(seed);
        let mut p = StrategyProfile::new();
        for s in game.turn_order() {
            p.insert(s.clone(), UnitaryMatrix::random(game.dimension(), &mut rng).unwrap());
        }
        p
    }

    #[test]
    fn interior_cut_validates() {
        let game = per_move_tree();
        let p = random_profile(&game, 1);
        let sub = extract_subgame(&game, &NodeId::new("psi2_2"), &p).unwrap();
        assert!(crate::gametree::validate_game(sub.definition()).is_valid());
        assert_eq!(sub.vertices().len(), 8);
    }

    #[test]
    fn truncation_examples() {
        let game = bundled_two_stage();
        let mut rng = RandomSource::new(77);
        let p = StrategyProfile::new()
            .with("u1", UnitaryMatrix::random(2, &mut rng).unwrap())
            .with("u2", UnitaryMatrix::random(2, &mut rng).unwrap());
        let leaf = truncate(&game, &NodeId::new("o1"), &p).unwrap();
        assert_eq!(leaf.payoff(&NodeId::new("o1")).unwrap().unwrap(), &[0.0, 0.0]);
        assert_eq!(leaf.definition().nodes, game.definition().nodes);

        let whole = truncate(&game, game.root(), &p).unwrap();
        assert_eq!(whole.vertices().len(), 1);
        assert_eq!(whole.payoff(game.root()).unwrap().unwrap(), game.expected_payoffs(&p, None).unwrap().as_slice());
    }

    proptest! {
        #[test]
        fn truncation_preserves_expected_payoff(seed in any::<u64>(), pick in 0usize..31) {
            let game = per_move_tree();
            let p = random_profile(&game, seed);
            let nodes: Vec<NodeId> = game.subtree(game.root()).unwrap();
            let root = &nodes[pick % nodes.len()];
            let t = truncate(&game, root, &p).unwrap();
            let full = game.expected_payoffs(&p, None).unwrap();
            let cut = t.expected_payoffs(&p.restricted_to(&t), None).unwrap();
            for (pi, player) in game.players().iter().enumerate() {
                if let Ok(k) = t.player_index(*player) {
                    prop_assert!((full[pi] - cut[k]).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn coherent_truncation_preserves_expected_payoff(seed in any::<u64>()) {
            let game = bundled_two_stage();
            let p = random_profile(&game, seed);
            let t = truncate(&game, &NodeId::new("s1"), &p).unwrap();
            let full = game.expected_payoff(&p, PlayerId(1), None).unwrap();
            let cut = t.expected_payoff(&p.restricted_to(&t), PlayerId(1), None).unwrap();
            prop_assert!((full - cut).abs() < 1e-10);
        }

        #[test]
        fn scaling_payoffs_keeps_best_responses(c in 0.5f64..4.0, g0 in -1.0f64..1.0, g1 in -1.0f64..1.0) {
            let sp = space(3);
            let base = two_stage_game("a", [[0.0, g0], [0.0, g1]]);
            let scaled = two_stage_game("b", [[0.0, c * g0], [0.0, c * g1]]);
            let opposing = StrategyProfile::new().with("u1", UnitaryMatrix::euler(1.1, 0.3, 2.0));
            let a = best_response(&base, PlayerId(2), &opposing, &sp).unwrap();
            let b = best_response(&scaled, PlayerId(2), &opposing, &sp).unwrap();
            prop_assert_eq!(a.response_indices(), b.response_indices());
            prop_assert!((b.value - c * a.value).abs() < 1e-12);
        }

        #[test]
        fn slack_is_never_negative(seed in any::<u64>()) {
            let game = zero_sum_two_stage();
            let r = is_nash(&game, &random_profile(&game, seed), &space(2), 1e-9).unwrap();
            prop_assert!(r.per_player_slack.values().all(|&s| s >= 0.0));
        }
    }

    #[test]
    fn single_vertex_game_passes_vacuously() {
        let def = GameDefinition {
            name: None,
            dimension: 2,
            players: vec![PlayerId(1)],
            root: NodeId::new("end"),
            nodes: vec![NodeDef { id: NodeId::new("end"), kind: NodeKind::Vertex, owner: None, label: NodeLabel::Basis(0), children: vec![] }],
            partitions: Partitions::default(),
            payoffs: [(NodeId::new("end"), vec![3.0])].into_iter().collect(),
            observation_payoffs: None,
        };
        let game = QuantumGame::new(def).unwrap();
        let r = is_nash(&game, &StrategyProfile::new(), &space(2), 1e-9).unwrap();
        let t = check_theorem1(&game, &r, &space(2), 1e-9).unwrap();
        assert!(t.holds);
    }

    #[test]
    fn equilibria_satisfy_subgame_properties() {
        let game = bundled_two_stage();
        let sp = space(2);
        for r in find_nash(&game, &sp, 1e-9).unwrap() {
            let t = check_theorem1(&game, &r, &sp, 1e-9).unwrap();
            assert!(t.holds, "{:?}", t.failures().collect::<Vec<_>>());
            assert!(t.property1.iter().any(|c| c.root.as_str() == "s1"));
        }
    }

    #[test]
    fn perturbed_profile_breaks_property_one() {
        let game = bundled_two_stage();
        let sp = space(2);
        let r = find_nash(&game, &sp, 1e-9).unwrap().remove(0);
        let mut p = r.strategy_profile();
        // rotate player 2 away from |0>
        let u2 = p.get(&InfoSetId::new("u2")).unwrap().clone();
        p.insert(InfoSetId::new("u2"), UnitaryMatrix::pauli_x().matmul(&u2).unwrap());
        let t = check_subgame_properties(&game, &p, &sp, 1e-9).unwrap();
        assert!(!t.holds);
        assert!(t.property1.iter().any(|c| !c.holds && c.reach_probability > 0.0));
    }

    #[test]
    fn searches_are_deterministic() {
        let game = zero_sum_two_stage();
        let sp = space(2);
        let a = serde_json::to_string(&find_nash(&game, &sp, 1e-9).unwrap()).unwrap();
        let b = serde_json::to_string(&find_nash(&game, &sp, 1e-9).unwrap()).unwrap();
        assert_eq!(a, b);
        let _ = Complex64::new(0.0, 0.0);
    }
}
