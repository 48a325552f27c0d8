//! Numerical laboratory for dilute suspensions of rigid particles in Stokes flow.
//!
//! The crate is organised around five layers:
//!
//! * [`geometry`]: particle shapes (triangulated surfaces), rigid motions and
//!   generation of particle clouds obeying the dilution scaling
//!   `B_i = h_i + (1/N) Q_i B_i^0`.
//! * [`exterior`]: regularized-Stokeslet boundary-integral solver for the
//!   exterior Stokes problem around one particle, forces, torques and the
//!   6x6 Stokes resistance matrix.
//! * [`grid`]: staggered (MAC) Stokes solver on a box with volume
//!   penalization of rigid particles and an optional Brinkman friction term.
//! * [`homogenization`]: empirical measures, mollified Brinkman fields and the
//!   convergence study comparing the N-particle flow with its Stokes-Brinkman
//!   limit.
//! * [`harness`]: configuration, run manifests, plot tables and the CLI.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod exterior;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod homogenization;
pub mod par;

pub use nalgebra::{Matrix3, Vector3};

/// 6x6 matrix type used for resistance matrices.
pub type Matrix6 = nalgebra::Matrix6<f64>;
/// 3-vectors of `f64` used for points, velocities and forces.
pub type Vec3 = Vector3<f64>;
/// 3x3 matrices of `f64`.
pub type Mat3 = Matrix3<f64>;
