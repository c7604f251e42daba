//! Two-step path interference and Grover search as an extensive-form process.

use num_complex::Complex64;
use thiserror::Error;

use crate::gametree::builders::chain_game;
use crate::gametree::{GameError, NodeLabel, PlayerId, QuantumGame, StrategyProfile};
use crate::qsim::{QsimError, StateVector, UnitaryMatrix};

#[derive(Debug, Error)]
pub enum InterferenceError {
    #[error("two-step system needs 2x2 unitaries, got dimension {0}")]
    NotSingleQubit(usize),
    #[error("database size {0} is not a power of two >= 2")]
    BadDatabaseSize(usize),
    #[error("marked item {w} out of range for N = {n}")]
    MarkedOutOfRange { w: usize, n: usize },
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Game(#[from] GameError),
}

pub type Result<T> = std::result::Result<T, InterferenceError>;

/// `U1 = [[a, a'], [b, b']]`, `U2 = [[c, e], [d, f]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoStageSystem {
    u1: UnitaryMatrix,
    u2: UnitaryMatrix,
}

impl TwoStageSystem {
    pub fn new(u1: UnitaryMatrix, u2: UnitaryMatrix) -> Result<Self> {
        for u in [&u1, &u2] {
            if u.dim() != 2 {
                return Err(InterferenceError::NotSingleQubit(u.dim()));
            }
        }
        Ok(Self { u1, u2 })
    }

    pub fn u1(&self) -> &UnitaryMatrix {
        &self.u1
    }

    pub fn u2(&self) -> &UnitaryMatrix {
        &self.u2
    }

    /// `(a, b, c, d, e, f)`.
    pub fn entries(&self) -> [Complex64; 6] {
        let (u1, u2) = (&self.u1, &self.u2);
        [u1.get(0, 0), u1.get(1, 0), u2.get(0, 0), u2.get(1, 0), u2.get(0, 1), u2.get(1, 1)]
    }
}

/// Probabilities after one step from `|0>`: `(|a|^2, |b|^2)`. The same for
/// the classical and the quantum process.
pub fn first_step(sys: &TwoStageSystem) -> (f64, f64) {
    let [a, b, ..] = sys.entries();
    (a.norm_sqr(), b.norm_sqr())
}

/// Two steps of the classical process: transition probabilities multiply
/// along each path and the paths' probabilities add.
pub fn classical_two_step(sys: &TwoStageSystem) -> (f64, f64) {
    let [a, b, c, d, e, f] = sys.entries().map(|z| z.norm_sqr());
    (a * c + b * e, a * d + b * f)
}

/// Two steps of the quantum process: amplitudes add along the paths before
/// squaring, so paths can cancel.
pub fn quantum_two_step(sys: &TwoStageSystem) -> (f64, f64) {
    let [a, b, c, d, e, f] = sys.entries();
    ((a * c + b * e).norm_sqr(), (a * d + b * f).norm_sqr())
}

/// `U1†`: with it as the second step both paths into `|1>` cancel, so all
/// probability returns to `|0>`.
pub fn annihilating_partner(u1: &UnitaryMatrix) -> UnitaryMatrix {
    u1.adjoint()
}

/// A second step that cancels every path into `outcome`.
pub fn partner_zeroing(u1: &UnitaryMatrix, outcome: usize) -> UnitaryMatrix {
    match outcome {
        1 => u1.adjoint(),
        _ => UnitaryMatrix::pauli_x().matmul(&u1.adjoint()).expect("2x2"),
    }
}

/// The two-step system as a two-player chain game with the given payoffs
/// per outcome, plus the profile that plays `U1` then `U2`.
pub fn two_stage_as_game(sys: &TwoStageSystem, payoffs: [[f64; 2]; 2]) -> (QuantumGame, StrategyProfile) {
    let game = crate::gametree::builders::two_stage_game("two-stage", payoffs);
    let profile = StrategyProfile::new().with("u1", sys.u1.clone()).with("u2", sys.u2.clone());
    (game, profile)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroverInstance {
    pub n: usize,
    pub w: usize,
    pub iterations: usize,
}

impl GroverInstance {
    pub fn new(n: usize, w: usize, iterations: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(InterferenceError::BadDatabaseSize(n));
        }
        if w >= n {
            return Err(InterferenceError::MarkedOutOfRange { w, n });
        }
        Ok(Self { n, w, iterations })
    }

    /// Oracle `I - 2|w><w|`.
    pub fn oracle(&self) -> UnitaryMatrix {
        let mut rows = identity_rows(self.n);
        rows[self.w][self.w] = Complex64::new(-1.0, 0.0);
        UnitaryMatrix::from_rows(rows).expect("reflection is unitary")
    }

    /// Diffusion `2|ψ><ψ| - I` about the uniform superposition.
    pub fn diffusion(&self) -> UnitaryMatrix {
        let c = 2.0 / self.n as f64;
        let mut rows = vec![vec![Complex64::new(c, 0.0); self.n]; self.n];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] -= 1.0;
        }
        UnitaryMatrix::from_rows(rows).expect("reflection is unitary")
    }
}

fn identity_rows(n: usize) -> Vec<Vec<Complex64>> {
    (0..n).map(|i| (0..n).map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect()).collect()
}

/// Success probability after each of `0..=iterations` rounds, by direct
/// statevector evolution.
pub fn grover_trace_direct(inst: &GroverInstance) -> Vec<f64> {
    let (oracle, diffusion) = (inst.oracle(), inst.diffusion());
    let mut psi = StateVector::uniform(inst.n).expect("n >= 2");
    let mut trace = vec![psi.outcome_probability(inst.w).expect("w < n")];
    for _ in 0..inst.iterations {
        psi = diffusion.apply(&oracle.apply(&psi).expect("dim")).expect("dim");
        trace.push(psi.outcome_probability(inst.w).expect("w < n"));
    }
    trace
}

/// The search as a chain game: player 2 plays the oracle, player 1 the
/// diffusion, alternating, starting from the uniform superposition. Both are
/// paid 1 when the marked item is observed.
pub fn grover_tree(inst: &GroverInstance) -> Result<(QuantumGame, StrategyProfile)> {
    let rounds = inst.iterations.max(1);
    let mut steps = Vec::with_capacity(2 * rounds);
    for _ in 0..rounds {
        steps.push((PlayerId(2), "oracle"));
        steps.push((PlayerId(1), "diffusion"));
    }
    let payoffs = (0..inst.n).map(|k| if k == inst.w { vec![1.0, 1.0] } else { vec![0.0, 0.0] }).collect();
    let uniform = StateVector::uniform(inst.n)?;
    let game = chain_game("grover", NodeLabel::State(uniform), &steps, payoffs)?;
    let profile = StrategyProfile::new().with("oracle", inst.oracle()).with("diffusion", inst.diffusion());
    Ok((game, profile))
}

/// The same trace read off the chain game: entry `t` is the expected payoff
/// when play is observed after `2t` moves.
pub fn grover_trace_tree(inst: &GroverInstance) -> Result<Vec<f64>> {
    let (game, profile) = grover_tree(inst)?;
    (0..=inst.iterations)
        .map(|t| Ok(game.expected_payoff(&profile, PlayerId(1), Some(2 * t))?))
        .collect()
}

/// Largest `N` for which [`grover_game`] runs through the game tree.
pub const GROVER_TREE_LIMIT: usize = 256;

/// Success-probability trace; `trace[0] = 1/N`.
pub fn grover_game(inst: &GroverInstance) -> Result<Vec<f64>> {
    if inst.n <= GROVER_TREE_LIMIT {
        grover_trace_tree(inst)
    } else {
        Ok(grover_trace_direct(inst))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::RandomSource;
    use proptest::prelude::*;

    fn sys(u1: UnitaryMatrix, u2: UnitaryMatrix) -> TwoStageSystem {
        TwoStageSystem::new(u1, u2).unwrap()
    }

    fn close(a: (f64, f64), b: (f64, f64), tol: f64) -> bool {
        (a.0 - b.0).abs() <= tol && (a.1 - b.1).abs() <= tol
    }

    fn dense_random(rng: &mut RandomSource) -> UnitaryMatrix {
        loop {
            let u = UnitaryMatrix::random(2, rng).unwrap();
            if u.entries().iter().all(|z| z.norm() > 0.05) {
                return u;
            }
        }
    }

    #[test]
    fn classical_examples() {
        let h = UnitaryMatrix::hadamard();
        assert!(close(classical_two_step(&sys(h.clone(), h.clone())), (0.5, 0.5), 1e-15));
        assert!(close(classical_two_step(&sys(UnitaryMatrix::identity(2), h)), (0.5, 0.5), 1e-15));
    }

    #[test]
    fn quantum_examples() {
        let h = UnitaryMatrix::hadamard();
        assert!(close(quantum_two_step(&sys(h.clone(), h.clone())), (1.0, 0.0), 1e-15));
        assert!(close(quantum_two_step(&sys(h, UnitaryMatrix::identity(2))), (0.5, 0.5), 1e-15));
    }

    #[test]
    fn quantum_matches_statevector() {
        let mut rng = RandomSource::new(19);
        for _ in 0..50 {
            let s = sys(UnitaryMatrix::random(2, &mut rng).unwrap(), UnitaryMatrix::random(2, &mut rng).unwrap());
            let psi = s.u2().apply(&s.u1().apply(&StateVector::basis(2, 0).unwrap()).unwrap()).unwrap();
            let want = (psi.outcome_probability(0).unwrap(), psi.outcome_probability(1).unwrap());
            assert!(close(quantum_two_step(&s), want, 1e-12));
        }
    }

    #[test]
    fn classical_matches_stochastic_product() {
        let mut rng = RandomSource::new(20);
        for _ in 0..50 {
            let s = sys(dense_random(&mut rng), dense_random(&mut rng));
            let m1 = s.u1().transition_weights();
            let m2 = s.u2().transition_weights();
            let p0 = m2[0][0] * m1[0][0] + m2[0][1] * m1[1][0];
            let p1 = m2[1][0] * m1[0][0] + m2[1][1] * m1[1][0];
            let got = classical_two_step(&s);
            assert!(close(got, (p0, p1), 1e-15));
            assert!(got.0.min(got.1) > 0.0);
        }
    }

    #[test]
    fn partners_annihilate() {
        let h = UnitaryMatrix::hadamard();
        assert!(annihilating_partner(&h).max_distance(&h) < 1e-15);
        let mut rng = RandomSource::new(21);
        for _ in 0..50 {
            let u = dense_random(&mut rng);
            let s = sys(u.clone(), annihilating_partner(&u));
            assert!(close(quantum_two_step(&s), (1.0, 0.0), 1e-12));
            let c = classical_two_step(&s);
            assert!(c.0 > 0.0 && c.1 > 0.0);
            let flipped = sys(u.clone(), partner_zeroing(&u, 0));
            assert!(close(quantum_two_step(&flipped), (0.0, 1.0), 1e-12));
        }
    }

    #[test]
    fn two_stage_agrees_with_game_tree() {
        let mut rng = RandomSource::new(22);
        for _ in 0..20 {
            let s = sys(UnitaryMatrix::random(2, &mut rng).unwrap(), UnitaryMatrix::random(2, &mut rng).unwrap());
            let (game, profile) = two_stage_as_game(&s, [[1.0, 0.0], [0.0, 1.0]]);
            let payoffs = game.expected_payoffs(&profile, None).unwrap();
            assert!(close((payoffs[0], payoffs[1]), quantum_two_step(&s), 1e-12));
            let classical = game.classical_vertex_probabilities(&profile).unwrap();
            let c = classical_two_step(&s);
            assert!((classical[&"o0".into()] - c.0).abs() < 1e-12);
            assert!((classical[&"o1".into()] - c.1).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_dimension() {
        assert!(TwoStageSystem::new(UnitaryMatrix::identity(4), UnitaryMatrix::identity(2)).is_err());
        assert!(GroverInstance::new(6, 0, 1).is_err());
        assert!(GroverInstance::new(4, 4, 1).is_err());
    }

    #[test]
    fn grover_examples() {
        let t = grover_game(&GroverInstance::new(4, 2, 1).unwrap()).unwrap();
        assert!((t[0] - 0.25).abs() < 1e-15);
        assert!((t[1] - 1.0).abs() < 1e-12);
        let t = grover_game(&GroverInstance::new(2, 1, 0).unwrap()).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0] - 0.5).abs() < 1e-15);
        let t = grover_game(&GroverInstance::new(16, 5, 3).unwrap()).unwrap();
        let closed = |t: f64| ((2.0 * t + 1.0) * (0.25f64).asin()).sin().powi(2);
        assert!(t[3] >= 0.96);
        for (i, p) in t.iter().enumerate() {
            assert!((p - closed(i as f64)).abs() < 1e-10);
        }
    }

    #[test]
    fn grover_routes_agree() {
        for n in [2, 4, 8, 32] {
            let inst = GroverInstance::new(n, n / 2, 6).unwrap();
            let tree = grover_trace_tree(&inst).unwrap();
            let direct = grover_trace_direct(&inst);
            for (a, b) in tree.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grover_trace_ignores_marked_label() {
        let base = grover_trace_direct(&GroverInstance::new(4, 0, 5).unwrap());
        for w in 1..4 {
            let other = grover_trace_tree(&GroverInstance::new(4, w, 5).unwrap()).unwrap();
            for (a, b) in base.iter().zip(&other) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn probabilities_are_conserved(seed in any::<u64>()) {
            let mut rng = RandomSource::new(seed);
            let s = sys(UnitaryMatrix::random(2, &mut rng).unwrap(), UnitaryMatrix::random(2, &mut rng).unwrap());
            let (c0, c1) = classical_two_step(&s);
            let (q0, q1) = quantum_two_step(&s);
            prop_assert!((c0 + c1 - 1.0).abs() < 1e-10);
            prop_assert!((q0 + q1 - 1.0).abs() < 1e-10);
            let (a, b) = first_step(&s);
            let psi = s.u1().apply(&StateVector::basis(2, 0).unwrap()).unwrap();
            prop_assert!((a - psi.outcome_probability(0).unwrap()).abs() < 1e-15);
            prop_assert!((b - psi.outcome_probability(1).unwrap()).abs() < 1e-15);
        }
    }
}
