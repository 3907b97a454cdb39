//! Expectations over edge-factored spanning-arborescence distributions.
//!
//! A weighted rooted graph induces a distribution over its arborescences
//! ("trees") in which the weight of a tree is the product of its edge
//! weights.  The partition function of that distribution is a Laplacian
//! determinant, and first- and second-order expectations of edge-additive
//! functions reduce to derivatives of that determinant.  This crate
//! computes those quantities in closed form:
//!
//! * [`graph`] — the graph/tree data model and a brute-force enumeration
//!   oracle for small graphs,
//! * [`linalg`] — dense LU factorization, determinants and inverses,
//! * [`laplacian`] — the Laplacian constructions for multi-root and
//!   single-root tree sets, their derivative sparsity, and the partition
//!   function,
//! * [`expectations`] — edge totals, pairwise totals, and three
//!   algorithms for second-order totals,
//! * [`quantities`] — applications: expected attachment score, Shannon
//!   entropy, KL divergence, generalized-expectation objectives, Renyi
//!   entropy and distribution norms, each with gradients where defined.
//!
//! All numeric kernels are generic over the scalar type through the
//! [`Real`] trait; `f64` is the intended default and is what the
//! concrete aliases at the crate root use.

pub mod error;
pub mod expectations;
pub mod graph;
pub mod laplacian;
pub mod linalg;
pub mod quantities;

pub use error::{Error, Result};
pub use graph::{EdgeFunction, LabeledWeightedGraph, RootConstraint, Tree, WeightedGraph};

use std::fmt::{Debug, Display};
use std::iter::{Product, Sum};
use std::ops::{AddAssign, MulAssign, SubAssign};

/// Scalar type for all numeric kernels: `f32`, `f64`, or anything
/// float-like that `num_traits::Float` covers.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Product
    + Debug
    + Display
    + 'static
{
}

impl<T> Real for T where
    T: num_traits::Float
        + num_traits::FromPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + Sum
        + Product
        + Debug
        + Display
        + 'static
{
}

/// Lift an `f64` constant into the working scalar type.
pub(crate) fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("constant not representable in scalar type")
}

pub type Graph64 = graph::WeightedGraph<f64>;
pub type LabeledGraph64 = graph::LabeledWeightedGraph<f64>;
pub type EdgeFunction64 = graph::EdgeFunction<f64>;
pub type Matrix64 = linalg::Matrix<f64>;

pub type Graph32 = graph::WeightedGraph<f32>;
pub type Matrix32 = linalg::Matrix<f32>;
