//! Delay margins and simulation for average-consensus networks.
//!
//! A group of integrator agents linked by an undirected weighted graph and
//! running the Laplacian protocol reaches average consensus: every state
//! converges to the mean of the initial states. When the links carry
//! bounded communication delays, consensus survives only up to a critical
//! delay set by the spectrum of the graph Laplacian. This crate computes
//! those margins, simulates the delayed dynamics directly, and cross-checks
//! the two against each other.
//!
//! The pieces:
//!
//! * [`graph`]: networks, delay classes, Laplacians and sub-Laplacians.
//! * [`spectral`]: eigenvalues on the zero-average subspace, operator
//!   norms, pairwise product norms.
//! * [`bounds`]: the four delay margins (constant/time-varying crossed
//!   with uniform/non-uniform), decay-rate margins, the delay-independent
//!   condition, closed forms for complete and ring networks, and a scalar
//!   quasipolynomial root finder used as an independent oracle.
//! * [`sim`]: fixed-step integration of the delayed dynamics with cubic
//!   Hermite history interpolation, verdict classification, and empirical
//!   critical-delay searches.
//!
//! ```
//! use delay_consensus::{bounds, spectral_summary, AgentGraph};
//!
//! // Three agents in a triangle; two edges share one delay, the third has
//! // its own.
//! let g = AgentGraph::build(3, 2, &[(1, 2, 1.0, 1), (2, 3, 1.0, 1), (1, 3, 1.0, 2)])?;
//! let summary = spectral_summary(&g)?;
//! assert!((summary.norm_delta - 3.0).abs() < 1e-12);
//!
//! // Consensus holds for every constant delay below pi/6.
//! let margin = bounds::margin_constant_uniform(&summary);
//! assert!((margin - std::f64::consts::PI / 6.0).abs() < 1e-12);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod bounds;
pub mod graph;
pub mod matrix;
mod poly;
pub mod rng;
pub mod sim;
pub mod spectral;

pub use graph::{AgentGraph, DelayPartition, GraphError, LaplacianMatrix};
pub use sim::{
    classify, simulate, Classification, DelaySignal, InitialCondition, SimError, SimulationVerdict,
    Trajectory,
};
pub use spectral::{
    product_norm, project_h1, spectral_summary, sum_product_norms, symmetric_eigenvalues, NormMode,
    ProductNormTable, SpectralError, SpectralSummary,
};

#[cfg(doctest)]
mod book {
    //! Keeps the guide's code snippets compiling and passing; each chapter
    //! of `book/` is pulled in as doctests.
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/margins.md")]
    mod margins {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
