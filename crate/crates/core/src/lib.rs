#![cfg_attr(not(feature = "std"), no_std)]
//! Bingham distributions on the unit quaternion sphere.
//!
//! The crate covers the distribution itself ([`bingham`]), the constructions
//! that turn raw predictor outputs into valid parameters ([`orientation`]),
//! mixtures over rotations and translations ([`mixture`]), the training
//! objectives with analytic gradients ([`losses`]), a small feed-forward
//! predictor trained on synthetic ambiguous data ([`trainer`]) and the
//! evaluation metrics ([`metrics`]).
//!
//! Everything here is pure computation and works with `alloc` only; file
//! formats and the command line live in the companion `bingham` crate.

extern crate alloc;

pub mod bingham;
pub mod losses;
pub mod metrics;
pub mod mixture;
pub mod network;
pub mod orientation;
pub mod quadrature;
pub mod quaternion;
pub mod scene;
pub mod trainer;

pub use bingham::{BinghamDistribution, NormalizationTable, Normalizer, Quadrature, TableSpec};
pub use mixture::{BinghamMixture, GaussianComponent, GaussianMixture, PoseHypothesis};
pub use orientation::{ConcentrationMatrix, OrientationMatrix, VStrategy};
pub use quaternion::{RotationError, UnitQuaternion};
