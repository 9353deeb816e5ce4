//! View finders: permutation-equivariant operators `ν(A)` applied to node
//! features without materializing `ν(A)`, and view stacking into an
//! `N x F x C` tensor.

mod propagate;
mod spec;
mod tensor;

pub use propagate::{estimate_lambda_max, propagate, propagate_transpose};
pub use spec::{default_finder_set, ViewFinderSet, ViewFinderSpec, MAX_HOPS};
pub use tensor::{stack_views, stack_views_transpose, ViewTensor};
