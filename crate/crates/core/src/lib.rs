//! Land allocation with friend bonuses.
//!
//! A library for a small allocation model: agents receive at most one plot
//! each on an undirected plot graph, an agent's utility is its own plot
//! value plus a directed bonus for every friend on an adjacent plot, and
//! unmatched agents get zero. On top of the model the crate provides
//!
//! * exhaustive allocation-space scans (Pareto dominance, individual
//!   rationality, welfare) in [`space`],
//! * reference mechanisms (null, serial dictatorship, iterated Pareto
//!   improvement, welfare maximization) in [`mechanisms`],
//! * a strategyproofness checker and an exhaustive mechanism-table solver
//!   over finite instance families in [`verify`], and
//! * the two shipped impossibility families (plot unacceptability, and the
//!   marriage encoding via unacceptable neighbors) in [`families`].
//!
//! All arithmetic is exact rational; see [`value`]. Every search is
//! deterministic, including tie-breaks and reported statistics, so results
//! are reproducible bit for bit.
//!
//! Types are plain data without interior mutability; everything is `Send`
//! and `Sync`, and all functions are pure apart from allocation.

pub mod families;
pub mod mechanisms;
pub mod model;
pub mod space;
pub mod value;
pub mod verify;

pub use model::{Agent, Allocation, Instance, Plot, PlotGraph};
pub use value::{ExtendedValue, Rational};
