//! Frequent induced subgraph discovery in sets of directed, typed graphs.
//!
//! The pipeline:
//!
//! 1. [`sampling`] draws connected induced `k`-subgraphs from a graph set
//!    (or enumerates all of them exactly).
//! 2. [`denoiser`] trains a posterior network on those samples under the
//!    noising processes of [`diffusion`].
//! 3. [`diffusion::mc_log_prob`] turns the trained network into a Monte
//!    Carlo estimate of a pattern's log generative probability, used as a
//!    frequency surrogate.
//! 4. [`search`] grows patterns one node at a time, keeping the best-scoring
//!    candidates per size.
//! 5. [`eval`] compares estimates against exact counts.
//!
//! The guide in `book/` walks through each stage; its code listings are
//! compiled as doctests of this crate.

pub mod dataset;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod graph;
pub mod rng;
pub mod sampling;
pub mod search;

pub use error::{Error, Result};
pub use graph::{Alphabet, Pattern, PatternKey, SubgraphInstance, TypedDigraph};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/diffusion.md")]
    mod diffusion {}
    #[doc = include_str!("../../../book/src/denoiser.md")]
    mod denoiser {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
