//! Learning tree-structured discrete distributions with the Chow-Liu
//! algorithm.
//!
//! The crate is organised bottom-up:
//!
//! - [`info`]: entropy, mutual information and conditional mutual
//!   information of probability tables, plus the `f(a, b)` decomposition.
//! - [`model`]: dense joints, tree models, projections onto trees, divergences.
//! - [`estimation`]: sample sets, counting, the add-1 estimator.
//! - [`chowliu`]: pairwise MI weights, maximum spanning trees, full learner.
//! - [`citest`]: plug-in (conditional) independence testers.
//! - [`hardinstances`]: three-bit hard instances and their exact facts.
//! - [`experiment`] and [`io`]: the experiment runner and file formats used by
//!   the `chowliu` binary.
//!
//! Probability tables are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices.

pub mod chowliu;
pub mod citest;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod hardinstances;
pub mod info;
pub mod io;
pub mod model;
mod scalar;
pub mod seed;
mod union_find;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DenseJointF64 = model::DenseJoint<f64>;
pub type DenseJointF32 = model::DenseJoint<f32>;
pub type TreeModelF64 = model::TreeModel<f64>;
pub type TreeModelF32 = model::TreeModel<f32>;
pub type PairTableF64 = info::PairTable<f64>;
pub type PairTableF32 = info::PairTable<f32>;
pub type TripleTableF64 = info::TripleTable<f64>;
pub type TripleTableF32 = info::TripleTable<f32>;
pub type MIMatrixF64 = chowliu::MIMatrix<f64>;
pub type MIMatrixF32 = chowliu::MIMatrix<f32>;
