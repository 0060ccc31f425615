//! Nonsmooth-optimization laboratory.
//!
//! A desk-scale testbed for constant-step first-order methods on locally
//! Lipschitz functions: exact Clarke-subgradient oracles for a fixed catalog
//! of example problems, four seeded iterative methods, an explicit-Euler
//! integrator for subgradient trajectories `x'(t) ∈ −c·∂f(x(t))`, and
//! empirical probes for local stability, global stability, strong
//! instability, and trajectory approximation.
//!
//! Entry points:
//! - [`oracles::catalog_get`] builds an [`oracles::ObjectiveSpec`] by id.
//! - [`methods`] runs the subgradient, momentum, reshuffling, and cyclic
//!   coordinate-descent recursions, producing replayable
//!   [`methods::IterateTrace`]s.
//! - [`flow::integrate`] produces a [`flow::TrajectorySample`] with the
//!   chain-rule energy ledger `∫ d(0,∂f(x))² ds`.
//! - [`probes`] turns the stability definitions into grid experiments and
//!   the instability theorem's hypotheses into numerical checkers.
//! - [`analysis`] holds the closed-form root computations for `x²sin(1/x)`.
//!
//! Everything is deterministic: randomness flows from named 64-bit seeds
//! through [`rng::SplitMix64`] only.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod flow;
pub mod hull;
pub mod methods;
pub mod oracles;
pub mod probes;
pub mod rng;
pub mod trace_io;

pub use error::Error;

/// Iterate/state vector in ℝⁿ.
///
/// Matrix-variable problems (rpca_l1) store X ∈ ℝ^{m×r} and Y ∈ ℝ^{n×r}
/// row-major concatenated; the owning spec records the shapes.
pub type Point = Vec<f64>;

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Squared Euclidean norm.
pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Euclidean distance.
pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// True when every entry is finite.
pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}
