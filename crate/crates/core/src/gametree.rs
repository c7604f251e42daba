//! Quantum extensive-form games `(N, K, P, I, g)`.
//!
//! A game tree is made of *moves* (a player acts on the quantum state with the
//! unitary assigned to the move's information set) and *vertices* (terminal
//! outcomes with a payoff vector). Every node carries a label describing how
//! the state arriving at it relates to its parent:
//!
//! - `basis` / `state`: a rank-1 outcome. The children of a branching move form
//!   a complete orthonormal basis of the game's Hilbert space, and the branch
//!   amplitude is `<label|U|incoming>`.
//! - `coherent`: the sole child of a move, receiving `U|incoming>` with no
//!   projection. Chains of coherent moves are where paths interfere.
//!
//! Labels are bookkeeping only; every evaluation recomputes states from the
//! root by applying the profile's unitaries, so a stale label never leaks into
//! a result.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{inner_raw, norm_sqr, QsimError, StateVector, UnitaryMatrix};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InfoSetId(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub u32);

macro_rules! string_id {
    ($t:ident) => {
        impl $t {
            pub fn new(s: impl Into<String>) -> Self {
                $t(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $t {
            fn from(s: &str) -> Self {
                $t(s.to_owned())
            }
        }
    };
}

string_id!(NodeId);
string_id!(InfoSetId);

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Move,
    Vertex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeLabel {
    Basis(usize),
    State(StateVector),
    Coherent,
}

impl NodeLabel {
    fn vector(&self, dim: usize) -> Option<Vec<Complex64>> {
        match self {
            NodeLabel::Basis(k) => StateVector::basis(dim, *k).ok().map(StateVector::into_amplitudes),
            NodeLabel::State(s) => Some(s.amplitudes().to_vec()),
            NodeLabel::Coherent => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDef {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<PlayerId>,
    pub label: NodeLabel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfoSetDef {
    pub id: InfoSetId,
    pub owner: PlayerId,
    pub moves: Vec<NodeId>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Partitions {
    pub information_sets: Vec<InfoSetDef>,
}

/// The on-disk game document. May be invalid; see [`validate_game`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameDefinition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Hilbert-space dimension shared by every node state and strategy.
    pub dimension: usize,
    pub players: Vec<PlayerId>,
    pub root: NodeId,
    pub nodes: Vec<NodeDef>,
    pub partitions: Partitions,
    /// Vertex id -> payoff per player, in `players` order.
    pub payoffs: BTreeMap<NodeId, Vec<f64>>,
    /// Payoff per computational-basis outcome, used when play is observed at
    /// a horizon that ends on a move rather than a vertex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_payoffs: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ZeroDimension,
    NoPlayers,
    DuplicatePlayer(PlayerId),
    DuplicateNode(NodeId),
    UnknownRoot(NodeId),
    UnknownChild { parent: NodeId, child: NodeId },
    RootHasParent(NodeId),
    MultipleParents(NodeId),
    Cycle(NodeId),
    Disconnected(NodeId),
    VertexHasChildren(NodeId),
    MoveWithoutChildren(NodeId),
    MoveWithoutOwner(NodeId),
    VertexWithOwner(NodeId),
    UnknownOwner { node: NodeId, owner: PlayerId },
    EmptyPlayerPartition(PlayerId),
    DuplicateInfoSet(InfoSetId),
    EmptyInfoSet(InfoSetId),
    UnknownInfoSetOwner { set: InfoSetId, owner: PlayerId },
    InfoSetUnknownNode { set: InfoSetId, node: NodeId },
    InfoSetContainsVertex { set: InfoSetId, node: NodeId },
    InfoSetOwnerMismatch { set: InfoSetId, node: NodeId },
    InfoSetOverlap { node: NodeId, sets: Vec<InfoSetId> },
    MoveNotInInfoSet(NodeId),
    BadLabel { node: NodeId, reason: String },
    IndefiniteRoot(NodeId),
    CoherentNotSole(NodeId),
    IncompleteBranching(NodeId),
    MissingPayoff(NodeId),
    PayoffOnMove(NodeId),
    UnknownPayoffNode(NodeId),
    PayoffLength { node: NodeId, expected: usize, found: usize },
    NonFinitePayoff(NodeId),
    ObservationPayoffShape,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            ZeroDimension => write!(f, "dimension must be positive"),
            NoPlayers => write!(f, "game has moves but no players"),
            DuplicatePlayer(p) => write!(f, "player {p} listed twice"),
            DuplicateNode(n) => write!(f, "node {n} defined twice"),
            UnknownRoot(n) => write!(f, "root {n} is not a node"),
            UnknownChild { parent, child } => write!(f, "{parent} lists unknown child {child}"),
            RootHasParent(n) => write!(f, "root {n} has a parent"),
            MultipleParents(n) => write!(f, "node {n} has more than one parent"),
            Cycle(n) => write!(f, "cycle through {n}"),
            Disconnected(n) => write!(f, "node {n} is not reachable from the root"),
            VertexHasChildren(n) => write!(f, "vertex {n} has children"),
            MoveWithoutChildren(n) => write!(f, "move {n} has no children"),
            MoveWithoutOwner(n) => write!(f, "move {n} has no owner"),
            VertexWithOwner(n) => write!(f, "vertex {n} has an owner"),
            UnknownOwner { node, owner } => write!(f, "move {node} owned by unknown player {owner}"),
            EmptyPlayerPartition(p) => write!(f, "P_{p} is empty: player {p} owns no move"),
            DuplicateInfoSet(s) => write!(f, "information set {s} defined twice"),
            EmptyInfoSet(s) => write!(f, "information set {s} is empty"),
            UnknownInfoSetOwner { set, owner } => write!(f, "information set {set} owned by unknown player {owner}"),
            InfoSetUnknownNode { set, node } => write!(f, "information set {set} lists unknown node {node}"),
            InfoSetContainsVertex { set, node } => write!(f, "information set {set} contains vertex {node}"),
            InfoSetOwnerMismatch { set, node } => write!(f, "information set {set} contains {node} owned by another player"),
            InfoSetOverlap { node, sets } => {
                let names: Vec<&str> = sets.iter().map(|s| s.as_str()).collect();
                write!(f, "move {node} belongs to several information sets: {}", names.join(", "))
            }
            MoveNotInInfoSet(n) => write!(f, "move {n} is in no information set"),
            BadLabel { node, reason } => write!(f, "node {node} has a bad label: {reason}"),
            IndefiniteRoot(n) => write!(f, "root {n} must carry a definite (basis or state) label"),
            CoherentNotSole(n) => write!(f, "move {n} mixes a coherent child with siblings"),
            IncompleteBranching(n) => write!(f, "children of move {n} do not form an orthonormal basis"),
            MissingPayoff(n) => write!(f, "vertex {n} has no payoff"),
            PayoffOnMove(n) => write!(f, "payoff given for move {n}"),
            UnknownPayoffNode(n) => write!(f, "payoff given for unknown node {n}"),
            PayoffLength { node, expected, found } => {
                write!(f, "payoff of {node} has {found} entries, expected {expected}")
            }
            NonFinitePayoff(n) => write!(f, "payoff of {n} is not finite"),
            ObservationPayoffShape => write!(f, "observation payoffs must have one row per basis outcome and one entry per player"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid game: {0}")]
    Invalid(ValidationReport),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown information set {0}")]
    UnknownInfoSet(InfoSetId),
    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),
    #[error("profile assigns no unitary to information set {0}")]
    UncoveredInfoSet(InfoSetId),
    #[error("strategy for {set} has dimension {found}, game dimension is {expected}")]
    StrategyDimension { set: InfoSetId, expected: usize, found: usize },
    #[error("horizon {horizon} exceeds tree depth {depth}")]
    HorizonOutOfRange { horizon: usize, depth: usize },
    #[error("play observed at move {0} but the game defines no observation payoffs")]
    MissingObservationPayoff(NodeId),
    #[error("{node} is not a subgame root: information set {set} straddles the cut")]
    InvalidSubgameRoot { node: NodeId, set: InfoSetId },
    #[error("node {0} is unreachable under this profile")]
    Unreachable(NodeId),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error("malformed game document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GameError>;

/// Validates every partition and tree condition, collecting all failures.
pub fn validate_game(def: &GameDefinition) -> ValidationReport {
    let mut v = Vec::new();
    if def.dimension == 0 {
        v.push(Violation::ZeroDimension);
    }

    let mut players = BTreeSet::new();
    for p in &def.players {
        if !players.insert(*p) {
            v.push(Violation::DuplicatePlayer(*p));
        }
    }

    let mut index: HashMap<&NodeId, usize> = HashMap::new();
    for (i, n) in def.nodes.iter().enumerate() {
        if index.insert(&n.id, i).is_some() {
            v.push(Violation::DuplicateNode(n.id.clone()));
        }
    }

    // tree shape
    let mut parents = vec![0usize; def.nodes.len()];
    for n in &def.nodes {
        for c in &n.children {
            match index.get(c) {
                Some(&ci) => parents[ci] += 1,
                None => v.push(Violation::UnknownChild { parent: n.id.clone(), child: c.clone() }),
            }
        }
    }
    match index.get(&def.root) {
        None => v.push(Violation::UnknownRoot(def.root.clone())),
        Some(&ri) => {
            if parents[ri] > 0 {
                v.push(Violation::RootHasParent(def.root.clone()));
            }
            for (i, n) in def.nodes.iter().enumerate() {
                if i != ri && parents[i] > 1 {
                    v.push(Violation::MultipleParents(n.id.clone()));
                }
            }
            // iterative DFS with an on-stack marker to report cycles
            let mut state = vec![0u8; def.nodes.len()]; // 0 new, 1 open, 2 done
            let mut stack = vec![(ri, 0usize)];
            state[ri] = 1;
            while let Some(&mut (ni, ref mut next)) = stack.last_mut() {
                let children = &def.nodes[ni].children;
                if *next < children.len() {
                    let c = &children[*next];
                    *next += 1;
                    if let Some(&ci) = index.get(c) {
                        match state[ci] {
                            0 => {
                                state[ci] = 1;
                                stack.push((ci, 0));
                            }
                            1 => v.push(Violation::Cycle(c.clone())),
                            _ => {}
                        }
                    }
                } else {
                    state[ni] = 2;
                    stack.pop();
                }
            }
            for (i, n) in def.nodes.iter().enumerate() {
                if state[i] == 0 {
                    v.push(Violation::Disconnected(n.id.clone()));
                }
            }
            if let NodeLabel::Coherent = def.nodes[ri].label {
                v.push(Violation::IndefiniteRoot(def.root.clone()));
            }
        }
    }

    // kinds, owners, labels
    let mut owned: BTreeMap<PlayerId, usize> = BTreeMap::new();
    let mut move_count = 0;
    for n in &def.nodes {
        match n.kind {
            NodeKind::Vertex => {
                if !n.children.is_empty() {
                    v.push(Violation::VertexHasChildren(n.id.clone()));
                }
                if n.owner.is_some() {
                    v.push(Violation::VertexWithOwner(n.id.clone()));
                }
            }
            NodeKind::Move => {
                move_count += 1;
                if n.children.is_empty() {
                    v.push(Violation::MoveWithoutChildren(n.id.clone()));
                }
                match n.owner {
                    None => v.push(Violation::MoveWithoutOwner(n.id.clone())),
                    Some(p) if !players.contains(&p) => {
                        v.push(Violation::UnknownOwner { node: n.id.clone(), owner: p })
                    }
                    Some(p) => *owned.entry(p).or_default() += 1,
                }
            }
        }
        match &n.label {
            NodeLabel::Basis(k) if *k >= def.dimension => v.push(Violation::BadLabel {
                node: n.id.clone(),
                reason: format!("basis index {k} out of range"),
            }),
            NodeLabel::State(s) if s.dim() != def.dimension => v.push(Violation::BadLabel {
                node: n.id.clone(),
                reason: format!("state dimension {} != {}", s.dim(), def.dimension),
            }),
            _ => {}
        }
    }
    if move_count > 0 {
        if def.players.is_empty() {
            v.push(Violation::NoPlayers);
        }
        for p in &def.players {
            if !owned.contains_key(p) {
                v.push(Violation::EmptyPlayerPartition(*p));
            }
        }
    }

    // branching structure
    for n in def.nodes.iter().filter(|n| n.kind == NodeKind::Move) {
        let kids: Vec<&NodeDef> = n.children.iter().filter_map(|c| index.get(c).map(|&i| &def.nodes[i])).collect();
        if kids.len() != n.children.len() || kids.is_empty() {
            continue;
        }
        let coherent = kids.iter().filter(|k| matches!(k.label, NodeLabel::Coherent)).count();
        if coherent > 0 {
            if kids.len() > 1 {
                v.push(Violation::CoherentNotSole(n.id.clone()));
            }
            continue;
        }
        if def.dimension == 0 {
            continue;
        }
        let vectors: Option<Vec<Vec<Complex64>>> = kids.iter().map(|k| k.label.vector(def.dimension)).collect();
        let complete = match vectors {
            Some(vs) if vs.len() == def.dimension => is_orthonormal(&vs),
            _ => false,
        };
        if !complete {
            v.push(Violation::IncompleteBranching(n.id.clone()));
        }
    }

    // information partition
    let mut membership: BTreeMap<&NodeId, Vec<InfoSetId>> = BTreeMap::new();
    let mut set_ids = BTreeSet::new();
    for s in &def.partitions.information_sets {
        if !set_ids.insert(&s.id) {
            v.push(Violation::DuplicateInfoSet(s.id.clone()));
        }
        if s.moves.is_empty() {
            v.push(Violation::EmptyInfoSet(s.id.clone()));
        }
        if !players.contains(&s.owner) {
            v.push(Violation::UnknownInfoSetOwner { set: s.id.clone(), owner: s.owner });
        }
        for m in &s.moves {
            match index.get(m).map(|&i| &def.nodes[i]) {
                None => v.push(Violation::InfoSetUnknownNode { set: s.id.clone(), node: m.clone() }),
                Some(node) if node.kind == NodeKind::Vertex => {
                    v.push(Violation::InfoSetContainsVertex { set: s.id.clone(), node: m.clone() })
                }
                Some(node) => {
                    if node.owner != Some(s.owner) {
                        v.push(Violation::InfoSetOwnerMismatch { set: s.id.clone(), node: m.clone() });
                    }
                    membership.entry(m).or_default().push(s.id.clone());
                }
            }
        }
    }
    for n in def.nodes.iter().filter(|n| n.kind == NodeKind::Move) {
        match membership.get(&n.id) {
            None => v.push(Violation::MoveNotInInfoSet(n.id.clone())),
            Some(sets) if sets.len() > 1 => {
                v.push(Violation::InfoSetOverlap { node: n.id.clone(), sets: sets.clone() })
            }
            _ => {}
        }
    }

    // payoffs
    for n in &def.nodes {
        let payoff = def.payoffs.get(&n.id);
        match (n.kind, payoff) {
            (NodeKind::Vertex, None) => v.push(Violation::MissingPayoff(n.id.clone())),
            (NodeKind::Move, Some(_)) => v.push(Violation::PayoffOnMove(n.id.clone())),
            (NodeKind::Vertex, Some(g)) => {
                if g.len() != def.players.len() {
                    v.push(Violation::PayoffLength { node: n.id.clone(), expected: def.players.len(), found: g.len() });
                }
                if g.iter().any(|x| !x.is_finite()) {
                    v.push(Violation::NonFinitePayoff(n.id.clone()));
                }
            }
            _ => {}
        }
    }
    for id in def.payoffs.keys() {
        if !index.contains_key(id) {
            v.push(Violation::UnknownPayoffNode(id.clone()));
        }
    }
    if let Some(obs) = &def.observation_payoffs {
        let ok = obs.len() == def.dimension
            && obs.iter().all(|row| row.len() == def.players.len() && row.iter().all(|x| x.is_finite()));
        if !ok {
            v.push(Violation::ObservationPayoffShape);
        }
    }

    ValidationReport { violations: v }
}

fn is_orthonormal(vs: &[Vec<Complex64>]) -> bool {
    for (i, a) in vs.iter().enumerate() {
        for (j, b) in vs.iter().enumerate().skip(i) {
            let g = inner_raw(a, b).unwrap_or(Complex64::new(f64::NAN, 0.0));
            let want = if i == j { 1.0 } else { 0.0 };
            if !((g - want).norm() <= 1e-10) {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug)]
struct Node {
    id: NodeId,
    kind: NodeKind,
    owner: Option<PlayerId>,
    label: NodeLabel,
    parent: Option<usize>,
    children: Vec<usize>,
    depth: usize,
    info_set: Option<usize>,
}

#[derive(Clone, Debug)]
struct InfoSet {
    id: InfoSetId,
    owner: PlayerId,
    members: Vec<usize>,
}

/// A validated game. Immutable once built.
#[derive(Clone, Debug)]
pub struct QuantumGame {
    def: GameDefinition,
    nodes: Vec<Node>,
    node_index: HashMap<NodeId, usize>,
    sets: Vec<InfoSet>,
    set_index: HashMap<InfoSetId, usize>,
    root: usize,
    payoffs: Vec<Option<Vec<f64>>>,
    max_depth: usize,
}

impl QuantumGame {
    pub fn new(def: GameDefinition) -> Result<Self> {
        let report = validate_game(&def);
        if !report.is_valid() {
            return Err(GameError::Invalid(report));
        }
        let node_index: HashMap<NodeId, usize> =
            def.nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        let mut nodes: Vec<Node> = def
            .nodes
            .iter()
            .map(|n| Node {
                id: n.id.clone(),
                kind: n.kind,
                owner: n.owner,
                label: n.label.clone(),
                parent: None,
                children: n.children.iter().map(|c| node_index[c]).collect(),
                depth: 0,
                info_set: None,
            })
            .collect();
        for i in 0..nodes.len() {
            for c in nodes[i].children.clone() {
                nodes[c].parent = Some(i);
            }
        }
        let root = node_index[&def.root];
        let mut stack = vec![root];
        let mut max_depth = 0;
        while let Some(i) = stack.pop() {
            let d = nodes[i].depth;
            max_depth = max_depth.max(d);
            for c in nodes[i].children.clone() {
                nodes[c].depth = d + 1;
                stack.push(c);
            }
        }
        let sets: Vec<InfoSet> = def
            .partitions
            .information_sets
            .iter()
            .map(|s| InfoSet { id: s.id.clone(), owner: s.owner, members: s.moves.iter().map(|m| node_index[m]).collect() })
            .collect();
        for (si, s) in sets.iter().enumerate() {
            for &m in &s.members {
                nodes[m].info_set = Some(si);
            }
        }
        let set_index = sets.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        let payoffs = nodes.iter().map(|n| def.payoffs.get(&n.id).cloned()).collect();
        Ok(Self { def, nodes, node_index, sets, set_index, root, payoffs, max_depth })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.def).expect("game definitions always serialize")
    }

    pub fn definition(&self) -> &GameDefinition {
        &self.def
    }

    pub fn name(&self) -> Option<&str> {
        self.def.name.as_deref()
    }

    pub fn dimension(&self) -> usize {
        self.def.dimension
    }

    pub fn players(&self) -> &[PlayerId] {
        &self.def.players
    }

    pub fn player_index(&self, p: PlayerId) -> Result<usize> {
        self.def.players.iter().position(|&q| q == p).ok_or(GameError::UnknownPlayer(p))
    }

    pub fn root(&self) -> &NodeId {
        &self.nodes[self.root].id
    }

    /// Longest root-to-leaf path, in moves.
    pub fn depth(&self) -> usize {
        self.max_depth
    }

    pub fn initial_state(&self) -> StateVector {
        let amps = self.nodes[self.root].label.vector(self.dimension()).expect("validated root label");
        StateVector::from_raw_unchecked(amps)
    }

    fn idx(&self, id: &NodeId) -> Result<usize> {
        self.node_index.get(id).copied().ok_or_else(|| GameError::UnknownNode(id.clone()))
    }

    fn set_idx(&self, id: &InfoSetId) -> Result<usize> {
        self.set_index.get(id).copied().ok_or_else(|| GameError::UnknownInfoSet(id.clone()))
    }

    pub fn contains_node(&self, id: &NodeId) -> bool {
        self.node_index.contains_key(id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter().map(|n| &n.id)
    }

    pub fn kind(&self, id: &NodeId) -> Result<NodeKind> {
        Ok(self.nodes[self.idx(id)?].kind)
    }

    pub fn label(&self, id: &NodeId) -> Result<&NodeLabel> {
        Ok(&self.nodes[self.idx(id)?].label)
    }

    pub fn owner(&self, id: &NodeId) -> Result<Option<PlayerId>> {
        Ok(self.nodes[self.idx(id)?].owner)
    }

    pub fn node_depth(&self, id: &NodeId) -> Result<usize> {
        Ok(self.nodes[self.idx(id)?].depth)
    }

    pub fn parent(&self, id: &NodeId) -> Result<Option<&NodeId>> {
        Ok(self.nodes[self.idx(id)?].parent.map(|p| &self.nodes[p].id))
    }

    pub fn info_set_of(&self, id: &NodeId) -> Result<Option<&InfoSetId>> {
        Ok(self.nodes[self.idx(id)?].info_set.map(|s| &self.sets[s].id))
    }

    pub fn payoff(&self, vertex: &NodeId) -> Result<Option<&[f64]>> {
        Ok(self.payoffs[self.idx(vertex)?].as_deref())
    }

    pub fn vertices(&self) -> Vec<&NodeId> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Vertex).map(|n| &n.id).collect()
    }

    pub fn info_set_ids(&self) -> Vec<&InfoSetId> {
        self.sets.iter().map(|s| &s.id).collect()
    }

    pub fn info_set_owner(&self, id: &InfoSetId) -> Result<PlayerId> {
        Ok(self.sets[self.set_idx(id)?].owner)
    }

    pub fn info_set_members(&self, id: &InfoSetId) -> Result<Vec<&NodeId>> {
        Ok(self.sets[self.set_idx(id)?].members.iter().map(|&m| &self.nodes[m].id).collect())
    }

    /// Information sets owned by `player`, in turn order.
    pub fn info_sets_of(&self, player: PlayerId) -> Vec<&InfoSetId> {
        self.turn_order().into_iter().filter(|s| self.sets[self.set_index[*s]].owner == player).collect()
    }

    /// Information sets ordered by the depth of their shallowest move, then id.
    pub fn turn_order(&self) -> Vec<&InfoSetId> {
        let mut order: Vec<(usize, &InfoSetId)> = self
            .sets
            .iter()
            .map(|s| (s.members.iter().map(|&m| self.nodes[m].depth).min().unwrap_or(0), &s.id))
            .collect();
        order.sort();
        order.into_iter().map(|(_, id)| id).collect()
    }

    /// `B(ψ)`: the nodes immediately after `node`.
    pub fn successors(&self, node: &NodeId) -> Result<BTreeSet<NodeId>> {
        let i = self.idx(node)?;
        Ok(self.nodes[i].children.iter().map(|&c| self.nodes[c].id.clone()).collect())
    }

    /// `B(u) = ∪_{ψ∈u} B(ψ)`.
    pub fn info_set_successors(&self, set: &InfoSetId) -> Result<BTreeSet<NodeId>> {
        let s = &self.sets[self.set_idx(set)?];
        Ok(s.members.iter().flat_map(|&m| self.nodes[m].children.iter()).map(|&c| self.nodes[c].id.clone()).collect())
    }

    /// All node ids in the subtree rooted at `node`, in pre-order.
    pub fn subtree(&self, node: &NodeId) -> Result<Vec<NodeId>> {
        Ok(self.subtree_idx(self.idx(node)?).into_iter().map(|i| self.nodes[i].id.clone()).collect())
    }

    fn subtree_idx(&self, start: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            out.push(i);
            stack.extend(self.nodes[i].children.iter().rev());
        }
        out
    }

    /// The first information set that contains moves both inside and outside
    /// the subtree at `node`, if any. `None` means `node` roots a subgame.
    pub fn subgame_closure_violation(&self, node: &NodeId) -> Result<Option<InfoSetId>> {
        let inside: BTreeSet<usize> = self.subtree_idx(self.idx(node)?).into_iter().collect();
        for s in &self.sets {
            let n_in = s.members.iter().filter(|m| inside.contains(m)).count();
            if n_in > 0 && n_in < s.members.len() {
                return Ok(Some(s.id.clone()));
            }
        }
        Ok(None)
    }

    fn strategy<'a, P: Strategies + ?Sized>(&self, profile: &'a P, set: usize) -> Result<&'a UnitaryMatrix> {
        let id = &self.sets[set].id;
        let u = profile.lookup(set, id).ok_or_else(|| GameError::UncoveredInfoSet(id.clone()))?;
        if u.dim() != self.dimension() {
            return Err(GameError::StrategyDimension { set: id.clone(), expected: self.dimension(), found: u.dim() });
        }
        Ok(u)
    }

    /// Position of `set` in the definition's information-set list; this is
    /// the index used by [`QuantumGame::expected_payoffs_indexed`].
    pub(crate) fn info_set_position(&self, set: &InfoSetId) -> Result<usize> {
        self.set_idx(set)
    }

    /// Expected payoffs with strategies given by information-set position.
    pub(crate) fn expected_payoffs_indexed(&self, strategies: &[&UnitaryMatrix], horizon: Option<usize>) -> Result<Vec<f64>> {
        self.expected_payoffs_with(strategies, horizon)
    }

    /// Applies the move's strategy to `incoming` and projects onto `child`.
    fn transition(&self, child: usize, evolved: &[Complex64]) -> (Complex64, Vec<Complex64>) {
        match &self.nodes[child].label {
            NodeLabel::Coherent => (Complex64::new(norm_sqr(evolved).sqrt(), 0.0), evolved.to_vec()),
            label => {
                let v = label.vector(self.dimension()).expect("rank-1 label");
                let amp = inner_raw(&v, evolved).expect("dimension checked");
                (amp, v.into_iter().map(|x| x * amp).collect())
            }
        }
    }

    fn path_from_root(&self, target: usize) -> Vec<usize> {
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Unnormalized state arriving at `node` and its reach amplitude.
    fn arriving(&self, node: usize, profile: &StrategyProfile) -> Result<(Complex64, Vec<Complex64>)> {
        let path = self.path_from_root(node);
        let mut state = self.initial_state().into_amplitudes();
        let mut amp = Complex64::new(1.0, 0.0);
        for w in path.windows(2) {
            let u = self.strategy(profile, self.nodes[w[0]].info_set.expect("moves have sets"))?;
            let evolved = u.apply_raw(&state)?;
            let (a, s) = self.transition(w[1], &evolved);
            amp = a;
            state = s;
        }
        Ok((amp, state))
    }

    /// `<ψ|U_N ⋯ U_1|ψ_in>` with the branch projections along the path to `node`.
    /// For a coherent node the label is the evolved state, so this is its norm.
    pub fn reach_amplitude(&self, node: &NodeId, profile: &StrategyProfile) -> Result<Complex64> {
        Ok(self.arriving(self.idx(node)?, profile)?.0)
    }

    /// `|reach_amplitude|^2`.
    pub fn reach_probability(&self, node: &NodeId, profile: &StrategyProfile) -> Result<f64> {
        let (_, state) = self.arriving(self.idx(node)?, profile)?;
        Ok(norm_sqr(&state))
    }

    /// Visits every node in the subtree at `start` (down to `horizon` levels
    /// below it) with its unnormalized arriving state.
    fn propagate<P: Strategies + ?Sized, F>(
        &self,
        start: usize,
        entry: Vec<Complex64>,
        profile: &P,
        horizon: Option<usize>,
        visit: &mut F,
    ) -> Result<()>
    where
        F: FnMut(usize, usize, &[Complex64]) -> Result<()>,
    {
        let mut stack = vec![(start, 0usize, entry)];
        while let Some((i, level, state)) = stack.pop() {
            visit(i, level, &state)?;
            if horizon.is_some_and(|h| level >= h) || self.nodes[i].kind == NodeKind::Vertex {
                continue;
            }
            let u = self.strategy(profile, self.nodes[i].info_set.expect("moves have sets"))?;
            let evolved = u.apply_raw(&state)?;
            for &c in self.nodes[i].children.iter().rev() {
                let (_, s) = self.transition(c, &evolved);
                stack.push((c, level + 1, s));
            }
        }
        Ok(())
    }

    /// Probability of ending at each vertex.
    pub fn vertex_probabilities(&self, profile: &StrategyProfile) -> Result<BTreeMap<NodeId, f64>> {
        let mut out = BTreeMap::new();
        self.propagate(self.root, self.initial_state().into_amplitudes(), profile, None, &mut |i, _, s| {
            if self.nodes[i].kind == NodeKind::Vertex {
                out.insert(self.nodes[i].id.clone(), norm_sqr(s));
            }
            Ok(())
        })?;
        Ok(out)
    }

    fn payoff_accumulator(&self, horizon: Option<usize>) -> impl Fn(usize, usize, &[Complex64], &mut [f64]) -> Result<()> + '_ {
        move |i, level, state, acc| {
            let node = &self.nodes[i];
            if node.kind == NodeKind::Vertex {
                let p = norm_sqr(state);
                for (a, g) in acc.iter_mut().zip(self.payoffs[i].as_ref().expect("validated")) {
                    *a += p * g;
                }
            } else if horizon == Some(level) {
                let obs = self
                    .def
                    .observation_payoffs
                    .as_ref()
                    .ok_or_else(|| GameError::MissingObservationPayoff(node.id.clone()))?;
                for (k, amp) in state.iter().enumerate() {
                    let p = amp.norm_sqr();
                    for (a, g) in acc.iter_mut().zip(&obs[k]) {
                        *a += p * g;
                    }
                }
            }
            Ok(())
        }
    }

    /// Expected payoff of every player (in `players()` order), observing play
    /// after `horizon` moves, or at the vertices when `horizon` is `None`.
    pub fn expected_payoffs(&self, profile: &StrategyProfile, horizon: Option<usize>) -> Result<Vec<f64>> {
        self.expected_payoffs_with(profile, horizon)
    }

    fn expected_payoffs_with<P: Strategies + ?Sized>(&self, profile: &P, horizon: Option<usize>) -> Result<Vec<f64>> {
        if let Some(h) = horizon {
            if h > self.max_depth {
                return Err(GameError::HorizonOutOfRange { horizon: h, depth: self.max_depth });
            }
        }
        let mut acc = vec![0.0; self.players().len()];
        let add = self.payoff_accumulator(horizon);
        self.propagate(self.root, self.initial_state().into_amplitudes(), profile, horizon, &mut |i, l, s| {
            add(i, l, s, &mut acc)
        })?;
        Ok(acc)
    }

    pub fn expected_payoff(&self, profile: &StrategyProfile, player: PlayerId, horizon: Option<usize>) -> Result<f64> {
        let i = self.player_index(player)?;
        Ok(self.expected_payoffs(profile, horizon)?[i])
    }

    /// Normalized state entering the subtree at `node`. Rank-1 labels are
    /// used as they stand; coherent nodes are evolved from the root.
    pub fn entry_state(&self, node: &NodeId, profile: &StrategyProfile) -> Result<StateVector> {
        let i = self.idx(node)?;
        if let Some(v) = self.nodes[i].label.vector(self.dimension()) {
            return Ok(StateVector::from_raw_unchecked(v));
        }
        let (_, state) = self.arriving(i, profile)?;
        StateVector::from_unnormalized(state).map_err(|_| GameError::Unreachable(node.clone()))
    }

    /// `f^ψ_i`: every player's expected payoff in the subgame rooted at `node`,
    /// conditioned on play having reached it.
    pub fn subgame_expected_payoffs(&self, node: &NodeId, profile: &StrategyProfile) -> Result<Vec<f64>> {
        if let Some(set) = self.subgame_closure_violation(node)? {
            return Err(GameError::InvalidSubgameRoot { node: node.clone(), set });
        }
        let entry = self.entry_state(node, profile)?;
        let mut acc = vec![0.0; self.players().len()];
        let add = self.payoff_accumulator(None);
        self.propagate(self.idx(node)?, entry.into_amplitudes(), profile, None, &mut |i, l, s| add(i, l, s, &mut acc))?;
        Ok(acc)
    }

    pub fn subgame_expected_payoff(&self, node: &NodeId, profile: &StrategyProfile, player: PlayerId) -> Result<f64> {
        let i = self.player_index(player)?;
        Ok(self.subgame_expected_payoffs(node, profile)?[i])
    }

    /// Vertex probabilities when every strategy is replaced by its classical
    /// stochastic shadow `|U_ij|^2` and composed without interference.
    pub fn classical_vertex_probabilities(&self, profile: &StrategyProfile) -> Result<BTreeMap<NodeId, f64>> {
        let dim = self.dimension();
        let mut out = BTreeMap::new();
        let start: Vec<f64> = self.initial_state().probabilities();
        let mut stack = vec![(self.root, start)];
        while let Some((i, dist)) = stack.pop() {
            let node = &self.nodes[i];
            if node.kind == NodeKind::Vertex {
                out.insert(node.id.clone(), dist.iter().sum());
                continue;
            }
            let weights = self.strategy(profile, node.info_set.expect("moves have sets"))?.transition_weights();
            let next: Vec<f64> = (0..dim).map(|r| (0..dim).map(|c| weights[r][c] * dist[c]).sum()).collect();
            for &c in &node.children {
                let d = match &self.nodes[c].label {
                    NodeLabel::Coherent => next.clone(),
                    label => {
                        let v = label.vector(dim).expect("rank-1 label");
                        let mass: f64 = v.iter().zip(&next).map(|(a, p)| a.norm_sqr() * p).sum();
                        v.iter().map(|a| a.norm_sqr() * mass).collect()
                    }
                };
                stack.push((c, d));
            }
        }
        Ok(out)
    }
}

pub(crate) trait Strategies {
    fn lookup(&self, position: usize, id: &InfoSetId) -> Option<&UnitaryMatrix>;
}

impl Strategies for StrategyProfile {
    fn lookup(&self, _: usize, id: &InfoSetId) -> Option<&UnitaryMatrix> {
        self.assignment.get(id)
    }
}

impl Strategies for [&UnitaryMatrix] {
    fn lookup(&self, position: usize, _: &InfoSetId) -> Option<&UnitaryMatrix> {
        self.get(position).copied()
    }
}

/// Assignment of a unitary to each information set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StrategyProfile {
    assignment: BTreeMap<InfoSetId, UnitaryMatrix>,
}

impl StrategyProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, set: impl Into<InfoSetId>, u: UnitaryMatrix) -> Self {
        self.assignment.insert(set.into(), u);
        self
    }

    pub fn insert(&mut self, set: InfoSetId, u: UnitaryMatrix) -> Option<UnitaryMatrix> {
        self.assignment.insert(set, u)
    }

    pub fn get(&self, set: &InfoSetId) -> Option<&UnitaryMatrix> {
        self.assignment.get(set)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InfoSetId, &UnitaryMatrix)> {
        self.assignment.iter()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Identity on every information set of `game`.
    pub fn identities(game: &QuantumGame) -> Self {
        let u = UnitaryMatrix::identity(game.dimension());
        Self { assignment: game.info_set_ids().into_iter().map(|s| (s.clone(), u.clone())).collect() }
    }

    /// Keeps only the entries for information sets of `game`.
    pub fn restricted_to(&self, game: &QuantumGame) -> Self {
        Self {
            assignment: game
                .info_set_ids()
                .into_iter()
                .filter_map(|s| self.assignment.get(s).map(|u| (s.clone(), u.clone())))
                .collect(),
        }
    }

    /// Errors on the first information set of `game` without a strategy.
    pub fn check_covers(&self, game: &QuantumGame) -> Result<()> {
        for s in game.turn_order() {
            game.strategy(self, game.set_index[s])?;
        }
        Ok(())
    }
}

/// Game builders, including the bundled examples.
pub mod builders {
    use super::*;

    /// A coherent chain: the root (labelled `initial`) is followed by one move
    /// per step, each owned by the listed player and information set, and the
    /// last move branches into the computational basis. `outcome_payoffs[k]`
    /// is the payoff vector of outcome `|k>` and also serves as the
    /// observation table for intermediate horizons.
    pub fn chain_game(
        name: &str,
        initial: NodeLabel,
        steps: &[(PlayerId, &str)],
        outcome_payoffs: Vec<Vec<f64>>,
    ) -> Result<QuantumGame> {
        let dimension = outcome_payoffs.len();
        let mut players: Vec<PlayerId> = Vec::new();
        for (p, _) in steps {
            if !players.contains(p) {
                players.push(*p);
            }
        }
        let mut nodes = Vec::new();
        let mut sets: BTreeMap<&str, InfoSetDef> = BTreeMap::new();
        for (t, (p, set)) in steps.iter().enumerate() {
            let id = NodeId(format!("s{t}"));
            let next = if t + 1 < steps.len() {
                vec![NodeId(format!("s{}", t + 1))]
            } else {
                (0..dimension).map(|k| NodeId(format!("o{k}"))).collect()
            };
            nodes.push(NodeDef {
                id: id.clone(),
                kind: NodeKind::Move,
                owner: Some(*p),
                label: if t == 0 { initial.clone() } else { NodeLabel::Coherent },
                children: next,
            });
            sets.entry(set)
                .or_insert_with(|| InfoSetDef { id: InfoSetId::new(*set), owner: *p, moves: Vec::new() })
                .moves
                .push(id);
        }
        let mut payoffs = BTreeMap::new();
        for (k, g) in outcome_payoffs.iter().enumerate() {
            let id = NodeId(format!("o{k}"));
            nodes.push(NodeDef { id: id.clone(), kind: NodeKind::Vertex, owner: None, label: NodeLabel::Basis(k), children: vec![] });
            payoffs.insert(id, g.clone());
        }
        QuantumGame::new(GameDefinition {
            name: Some(name.to_owned()),
            dimension,
            players,
            root: NodeId::new("s0"),
            nodes,
            partitions: Partitions { information_sets: sets.into_values().collect() },
            payoffs,
            observation_payoffs: Some(outcome_payoffs),
        })
    }

    /// Two coherent single-qubit steps from `|0>`: player 1 plays `u1`, then
    /// player 2 plays `u2`. `payoffs[k]` is `(g_1(k), g_2(k))`.
    pub fn two_stage_game(name: &str, payoffs: [[f64; 2]; 2]) -> QuantumGame {
        chain_game(
            name,
            NodeLabel::Basis(0),
            &[(PlayerId(1), "u1"), (PlayerId(2), "u2")],
            payoffs.iter().map(|g| g.to_vec()).collect(),
        )
        .expect("two-stage game is well formed")
    }

    /// The bundled two-step two-player game: both players prefer outcome `|0>`,
    /// player 1 more strongly.
    pub fn bundled_two_stage() -> QuantumGame {
        two_stage_game("two-stage", [[2.0, 1.0], [0.0, 0.0]])
    }

    /// Zero-sum variant: player 1 is paid for `|1>`, player 2 for `|0>`.
    pub fn zero_sum_two_stage() -> QuantumGame {
        two_stage_game("two-stage-zero-sum", [[-1.0, 1.0], [1.0, -1.0]])
    }

    /// A single player acting twice through two information sets.
    pub fn single_player_chain(payoffs: [f64; 2]) -> QuantumGame {
        chain_game(
            "single-player-chain",
            NodeLabel::Basis(0),
            &[(PlayerId(1), "u1"), (PlayerId(1), "u2")],
            vec![vec![payoffs[0]], vec![payoffs[1]]],
        )
        .expect("chain is well formed")
    }

    /// The four-level binary tree with alternating players: player 1 moves at
    /// depths 0 and 2, player 2 at depths 1 and 3; every move measures in the
    /// computational basis of one qubit.
    pub fn branching_example() -> QuantumGame {
        let mut nodes = Vec::new();
        let p1 = PlayerId(1);
        let p2 = PlayerId(2);
        // (player, count) per depth; names continue numbering per player
        let mut next = [0usize; 2];
        let level_names: Vec<Vec<String>> = [(1, 1), (2, 2), (1, 4), (2, 8)]
            .iter()
            .map(|&(player, count)| {
                let names = (0..count).map(|j| format!("psi{player}_{}", next[player - 1] + j + 1)).collect();
                next[player - 1] += count;
                names
            })
            .collect();
        let vertex_names: Vec<String> = (1..=16).map(|i| format!("w{i}")).collect();
        for (depth, names) in level_names.iter().enumerate() {
            for (j, name) in names.iter().enumerate() {
                let children: Vec<NodeId> = if depth + 1 < level_names.len() {
                    vec![NodeId::new(level_names[depth + 1][2 * j].clone()), NodeId::new(level_names[depth + 1][2 * j + 1].clone())]
                } else {
                    vec![NodeId::new(vertex_names[2 * j].clone()), NodeId::new(vertex_names[2 * j + 1].clone())]
                };
                nodes.push(NodeDef {
                    id: NodeId::new(name.clone()),
                    kind: NodeKind::Move,
                    owner: Some(if depth % 2 == 0 { p1 } else { p2 }),
                    label: NodeLabel::Basis(j % 2),
                    children,
                });
            }
        }
        let mut payoffs = BTreeMap::new();
        for (j, name) in vertex_names.iter().enumerate() {
            nodes.push(NodeDef { id: NodeId::new(name.clone()), kind: NodeKind::Vertex, owner: None, label: NodeLabel::Basis(j % 2), children: vec![] });
            payoffs.insert(NodeId::new(name.clone()), vec![((j * 7) % 16) as f64 / 15.0, ((j * 11) % 16) as f64 / 15.0]);
        }
        let set = |id: &str, owner, moves: &[&str]| InfoSetDef {
            id: InfoSetId::new(id),
            owner,
            moves: moves.iter().map(|m| NodeId::new(*m)).collect(),
        };
        QuantumGame::new(GameDefinition {
            name: Some("branching-example".into()),
            dimension: 2,
            players: vec![p1, p2],
            root: NodeId::new("psi1_1"),
            nodes,
            partitions: Partitions {
                information_sets: vec![
                    set("I1_a", p1, &["psi1_1"]),
                    set("I1_b", p1, &["psi1_2", "psi1_5"]),
                    set("I1_c", p1, &["psi1_3", "psi1_4"]),
                    set("I2_a", p2, &["psi2_1", "psi2_2"]),
                    set("I2_b", p2, &["psi2_3", "psi2_4", "psi2_5", "psi2_6"]),
                    set("I2_c", p2, &["psi2_7", "psi2_8", "psi2_9", "psi2_10"]),
                ],
            },
            payoffs,
            observation_payoffs: None,
        })
        .expect("branching example is well formed")
    }

    /// Names of the games shipped as JSON with the crate.
    pub const BUNDLED: [&str; 3] = ["two-stage", "two-stage-zero-sum", "branching"];

    pub fn bundled_json(name: &str) -> Option<&'static str> {
        match name {
            "two-stage" => Some(include_str!("../games/two_stage.json")),
            "two-stage-zero-sum" => Some(include_str!("../games/two_stage_zero_sum.json")),
            "branching" => Some(include_str!("../games/branching.json")),
            _ => None,
        }
    }

    pub fn bundled(name: &str) -> Option<Result<QuantumGame>> {
        bundled_json(name).map(QuantumGame::from_json)
    }
}

#[cfg(test)]
mod tests {
    use super::builders::*;
    use super::*;
    use crate::qsim::RandomSource;
    use proptest::prelude::*;

    #[test]
    fn bundled_files_match_builders() {
        let built = [bundled_two_stage(), zero_sum_two_stage(), branching_example()];
        for (name, game) in BUNDLED.iter().zip(built) {
            let loaded = bundled(name).unwrap().unwrap();
            assert_eq!(loaded.definition(), game.definition(), "{name}");
        }
        assert!(bundled("nope").is_none());
    }

    fn ids(xs: &[&str]) -> BTreeSet<NodeId> {
        xs.iter().map(|x| NodeId::new(*x)).collect()
    }

    fn hh_profile() -> StrategyProfile {
        StrategyProfile::new().with("u1", UnitaryMatrix::hadamard()).with("u2", UnitaryMatrix::hadamard())
    }

    #[test]
    fn branching_example_validates() {
        let g = branching_example();
        assert!(validate_game(g.definition()).is_valid());
        assert_eq!(g.depth(), 4);
        assert_eq!(g.vertices().len(), 16);
    }

    #[test]
    fn overlapping_information_sets_are_reported() {
        let g = branching_example();
        let mut def = g.definition().clone();
        def.partitions.information_sets[1].moves.push(NodeId::new("psi1_3"));
        let report = validate_game(&def);
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::InfoSetOverlap { node, .. } if node.as_str() == "psi1_3"
        )));
    }

    #[test]
    fn empty_player_partition_is_reported() {
        let g = bundled_two_stage();
        let mut def = g.definition().clone();
        // hand player 1's only move to player 2
        def.nodes[0].owner = Some(PlayerId(2));
        def.partitions.information_sets.iter_mut().for_each(|s| s.owner = PlayerId(2));
        let report = validate_game(&def);
        assert!(report.violations.contains(&Violation::EmptyPlayerPartition(PlayerId(1))));
    }

    #[test]
    fn structural_violations_are_collected() {
        let g = bundled_two_stage();
        let mut def = g.definition().clone();
        def.nodes[1].children.push(NodeId::new("s0")); // cycle back to root
        def.payoffs.remove(&NodeId::new("o1"));
        let report = validate_game(&def);
        assert!(report.violations.contains(&Violation::RootHasParent(NodeId::new("s0"))));
        assert!(report.violations.contains(&Violation::MissingPayoff(NodeId::new("o1"))));
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Cycle(_))));
    }

    #[test]
    fn incomplete_branching_is_reported() {
        let g = bundled_two_stage();
        let mut def = g.definition().clone();
        let o1 = def.nodes.iter_mut().find(|n| n.id.as_str() == "o1").unwrap();
        o1.label = NodeLabel::Basis(0);
        let report = validate_game(&def);
        assert!(report.violations.contains(&Violation::IncompleteBranching(NodeId::new("s1"))));
    }

    #[test]
    fn successors_match_tree() {
        let g = branching_example();
        assert_eq!(g.successors(&"psi1_1".into()).unwrap(), ids(&["psi2_1", "psi2_2"]));
        assert_eq!(g.successors(&"psi2_1".into()).unwrap(), ids(&["psi1_2", "psi1_3"]));
        assert!(g.successors(&"w3".into()).unwrap().is_empty());
        assert!(matches!(g.successors(&"nope".into()), Err(GameError::UnknownNode(_))));
    }

    #[test]
    fn info_set_successors_union() {
        let g = branching_example();
        assert_eq!(
            g.info_set_successors(&"I2_a".into()).unwrap(),
            ids(&["psi1_2", "psi1_3", "psi1_4", "psi1_5"])
        );
        assert_eq!(g.info_set_successors(&"I1_a".into()).unwrap(), g.successors(&"psi1_1".into()).unwrap());
        for s in g.info_set_ids() {
            let total: usize = g.info_set_members(s).unwrap().iter().map(|m| g.successors(m).unwrap().len()).sum();
            assert_eq!(g.info_set_successors(s).unwrap().len(), total);
        }
        assert!(g.info_set_successors(&"missing".into()).is_err());
    }

    #[test]
    fn reach_amplitude_examples() {
        let g = bundled_two_stage();
        let id = StrategyProfile::identities(&g);
        assert_eq!(g.reach_amplitude(g.root(), &id).unwrap(), Complex64::new(1.0, 0.0));
        let amp = g.reach_amplitude(&"o0".into(), &hh_profile()).unwrap();
        assert!((amp - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(g.reach_probability(&"o1".into(), &hh_profile()).unwrap() < 1e-30);
        let half = StrategyProfile::new().with("u1", UnitaryMatrix::hadamard()).with("u2", UnitaryMatrix::identity(2));
        assert!((g.reach_probability(&"o0".into(), &half).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reach_requires_covered_path() {
        let g = bundled_two_stage();
        let partial = StrategyProfile::new().with("u1", UnitaryMatrix::hadamard());
        assert!(g.reach_amplitude(&"s1".into(), &partial).is_ok());
        assert!(matches!(g.reach_amplitude(&"o0".into(), &partial), Err(GameError::UncoveredInfoSet(_))));
        let wrong = partial.with("u2", UnitaryMatrix::identity(4));
        assert!(matches!(g.reach_amplitude(&"o0".into(), &wrong), Err(GameError::StrategyDimension { .. })));
    }

    #[test]
    fn reach_matches_sequential_application() {
        let g = bundled_two_stage();
        let mut rng = RandomSource::new(41);
        for _ in 0..10 {
            let u1 = UnitaryMatrix::random(2, &mut rng).unwrap();
            let u2 = UnitaryMatrix::random(2, &mut rng).unwrap();
            let p = StrategyProfile::new().with("u1", u1.clone()).with("u2", u2.clone());
            let psi = u2.apply(&u1.apply(&StateVector::basis(2, 0).unwrap()).unwrap()).unwrap();
            for k in 0..2 {
                let want = StateVector::basis(2, k).unwrap().inner(&psi).unwrap();
                let got = g.reach_amplitude(&NodeId(format!("o{k}")), &p).unwrap();
                assert!((got - want).norm() < 1e-12);
                assert!((g.reach_probability(&NodeId(format!("o{k}")), &p).unwrap() - want.norm_sqr()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expected_payoff_examples() {
        let g = two_stage_game("t", [[1.0, 1.0], [0.0, 0.0]]);
        assert!((g.expected_payoff(&hh_profile(), PlayerId(1), Some(2)).unwrap() - 1.0).abs() < 1e-12);
        assert!((g.expected_payoff(&hh_profile(), PlayerId(1), Some(1)).unwrap() - 0.5).abs() < 1e-12);
        assert!((g.expected_payoff(&hh_profile(), PlayerId(1), Some(0)).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            g.expected_payoff(&hh_profile(), PlayerId(1), Some(3)),
            Err(GameError::HorizonOutOfRange { .. })
        ));

        let flat = two_stage_game("flat", [[0.7, 0.7], [0.7, 0.7]]);
        let mut rng = RandomSource::new(3);
        let p = StrategyProfile::new()
            .with("u1", UnitaryMatrix::random(2, &mut rng).unwrap())
            .with("u2", UnitaryMatrix::random(2, &mut rng).unwrap());
        assert!((flat.expected_payoff(&p, PlayerId(2), None).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn horizon_on_move_needs_observation_table() {
        let g = branching_example();
        let p = StrategyProfile::identities(&g);
        assert!(matches!(
            g.expected_payoffs(&p, Some(2)),
            Err(GameError::MissingObservationPayoff(_))
        ));
        assert!(g.expected_payoffs(&p, Some(4)).is_ok());
    }

    #[test]
    fn expected_payoff_matches_vertex_enumeration() {
        let g = branching_example();
        let mut rng = RandomSource::new(8);
        let mut p = StrategyProfile::new();
        for s in g.info_set_ids() {
            p.insert(s.clone(), UnitaryMatrix::random(2, &mut rng).unwrap());
        }
        let payoffs = g.expected_payoffs(&p, None).unwrap();
        let mut want = [0.0; 2];
        for v in g.vertices() {
            let prob = g.reach_probability(v, &p).unwrap();
            let pay = g.payoff(v).unwrap().unwrap();
            want[0] += prob * pay[0];
            want[1] += prob * pay[1];
        }
        assert!((payoffs[0] - want[0]).abs() < 1e-12);
        assert!((payoffs[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn subgame_payoff_examples() {
        let g = bundled_two_stage();
        let p = hh_profile();
        let whole = g.subgame_expected_payoffs(g.root(), &p).unwrap();
        assert_eq!(whole, g.expected_payoffs(&p, None).unwrap());
        assert_eq!(g.subgame_expected_payoffs(&"o0".into(), &p).unwrap(), vec![2.0, 1.0]);

        let tree = branching_example();
        assert!(matches!(
            tree.subgame_expected_payoffs(&"psi2_1".into(), &StrategyProfile::identities(&tree)),
            Err(GameError::InvalidSubgameRoot { .. })
        ));
    }

    #[test]
    fn subgame_payoff_on_branching_tree_matches_enumeration() {
        // a tree whose interior subgames are closed
        let g = branching_example();
        let mut def = g.definition().clone();
        def.partitions.information_sets = g
            .definition()
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Move)
            .map(|n| InfoSetDef { id: InfoSetId(format!("u_{}", n.id)), owner: n.owner.unwrap(), moves: vec![n.id.clone()] })
            .collect();
        let g = QuantumGame::new(def).unwrap();
        let mut rng = RandomSource::new(12);
        let mut p = StrategyProfile::new();
        for s in g.info_set_ids() {
            p.insert(s.clone(), UnitaryMatrix::random(2, &mut rng).unwrap());
        }
        let root = NodeId::new("psi2_2");
        let got = g.subgame_expected_payoffs(&root, &p).unwrap();
        // enumerate W^ψ: conditional probability of each vertex under the subtree
        let reach_root = g.reach_probability(&root, &p).unwrap();
        let mut want = [0.0; 2];
        for v in g.subtree(&root).unwrap() {
            if g.kind(&v).unwrap() == NodeKind::Vertex {
                let prob = g.reach_probability(&v, &p).unwrap() / reach_root;
                let pay = g.payoff(&v).unwrap().unwrap();
                want[0] += prob * pay[0];
                want[1] += prob * pay[1];
            }
        }
        assert!((got[0] - want[0]).abs() < 1e-12);
        assert!((got[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn turn_order_follows_depth() {
        let g = branching_example();
        let order: Vec<&str> = g.turn_order().into_iter().map(|s| s.as_str()).collect();
        assert_eq!(order, ["I1_a", "I2_a", "I1_b", "I1_c", "I2_b", "I2_c"]);
        assert_eq!(g.info_sets_of(PlayerId(2)).len(), 3);
    }

    #[test]
    fn json_round_trip_and_builders_validate() {
        for g in [branching_example(), bundled_two_stage(), zero_sum_two_stage(), single_player_chain([0.0, 1.0])] {
            assert!(validate_game(g.definition()).is_valid());
            let back = QuantumGame::from_json(&g.to_json()).unwrap();
            assert_eq!(back.definition(), g.definition());
        }
    }

    #[test]
    fn malformed_json_is_rejected() {
        assert!(matches!(QuantumGame::from_json("{\"dimension\": 2}"), Err(GameError::Json(_))));
    }

    #[test]
    fn classical_shadow_stays_positive_where_quantum_vanishes() {
        let g = bundled_two_stage();
        let p = hh_profile();
        let quantum = g.vertex_probabilities(&p).unwrap();
        let classical = g.classical_vertex_probabilities(&p).unwrap();
        assert!(quantum[&NodeId::new("o1")] < 1e-30);
        assert!((classical[&NodeId::new("o1")] - 0.5).abs() < 1e-15);
        assert!(classical.values().all(|&x| x > 0.0));
    }

    proptest! {
        #[test]
        fn vertex_probabilities_sum_to_one(seed in any::<u64>()) {
            let mut rng = RandomSource::new(seed);
            for g in [branching_example(), bundled_two_stage()] {
                let mut p = StrategyProfile::new();
                for s in g.info_set_ids() {
                    p.insert(s.clone(), UnitaryMatrix::random(2, &mut rng).unwrap());
                }
                let total: f64 = g.vertex_probabilities(&p).unwrap().values().sum();
                prop_assert!((total - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn reach_probability_ignores_global_phase(seed in any::<u64>(), which in 0usize..3) {
            let theta = [std::f64::consts::PI / 7.0, std::f64::consts::PI / 3.0, 1.0][which];
            let g = branching_example();
            let mut rng = RandomSource::new(seed);
            let mut p = StrategyProfile::new();
            let mut q = StrategyProfile::new();
            for s in g.info_set_ids() {
                let u = UnitaryMatrix::random(2, &mut rng).unwrap();
                q.insert(s.clone(), u.with_global_phase(theta));
                p.insert(s.clone(), u);
            }
            for v in g.vertices() {
                let a = g.reach_probability(v, &p).unwrap();
                let b = g.reach_probability(v, &q).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn classical_shadow_is_positive_for_dense_unitaries(seed in any::<u64>()) {
            let g = bundled_two_stage();
            let mut rng = RandomSource::new(seed);
            let u1 = UnitaryMatrix::random(2, &mut rng).unwrap();
            prop_assume!(u1.entries().iter().all(|x| x.norm() > 1e-3));
            // the adjoint annihilates |1> in the quantum game
            let p = StrategyProfile::new().with("u1", u1.clone()).with("u2", u1.adjoint());
            let quantum = g.vertex_probabilities(&p).unwrap();
            let classical = g.classical_vertex_probabilities(&p).unwrap();
            prop_assert!(quantum[&NodeId::new("o1")] < 1e-20);
            prop_assert!(classical.values().all(|&x| x > 0.0));
        }
    }
}
