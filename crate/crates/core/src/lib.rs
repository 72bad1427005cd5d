//! Tabular toolkit for transfer learning in alternating two-player zero-sum
//! Markov games: exact game solvers, a pursuer-evader gridworld, min-max
//! Q-learning and successor-feature learners with game generalized policy
//! improvement, a task library, empirical bound audits and an experiment
//! harness.

pub mod bounds;
pub mod eval;
pub mod game;
pub mod gridworld;
pub mod learning;
pub mod rng;
pub mod transfer;
