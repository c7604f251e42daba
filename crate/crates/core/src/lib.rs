//! Quantum extensive-form games.
//!
//! - [`qsim`]: dense statevector simulation (states, unitaries, measurement).
//! - [`gametree`]: quantum game trees, information sets, reachability and payoffs.
//! - [`equilibrium`]: best responses and Nash search over Euler-angle strategy grids,
//!   subgames, truncated games and subgame-perfection checks.
//! - [`interference`]: two-stage path annihilation and Grover search as a game.
//! - [`walker`]: discrete-time quantum walk with power `k` on a finite line.
//! - [`angelgame`]: the quantum Angel-vs-Devil match engine.

pub mod angelgame;
pub mod equilibrium;
pub mod gametree;
pub mod interference;
pub mod qsim;
pub mod walker;
