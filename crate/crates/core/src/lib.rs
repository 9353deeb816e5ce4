//! View-space node representation learning.
//!
//! A graph with any number of nodes `N` and features `F` is lifted into an
//! `N x F x C` tensor by stacking `C` propagated copies of its feature matrix
//! (one per *view finder*). Each `C`-dimensional *view vector* is collapsed
//! back to a scalar by a shared map `φ`, which makes the transformation
//! equivariant to both node and feature permutations. Applying one such
//! transformation repeatedly with shared parameters gives a recurrent
//! encoder that can be frozen and reused on unseen graphs.

pub mod analysis;
pub mod dense;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod synthetic;
pub mod trainer;
pub mod viewfinder;

pub use error::{Error, Result};
pub use graph::{Dataset, FeatureMatrix, Graph};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/views.md")]
    mod views {}
    #[doc = include_str!("../../../book/src/encoder.md")]
    mod encoder {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/checks.md")]
    mod checks {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
