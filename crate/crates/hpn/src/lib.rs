//! Bi-Hamiltonian curve flows in quaternionic projective space.
//!
//! The crate is layered: quaternion algebra, the symmetric Lie algebra
//! `u(n+1,H)`, periodic spectral calculus, the Hamiltonian operator pair and
//! recursion operator, time integration of the mKdV and sine-Gordon systems,
//! and curve reconstruction from the flow variables.

pub mod biham_ops;
pub mod curve_geometry;
pub mod grid_calculus;
pub mod quat_core;
pub mod soliton_flows;
pub mod symm_lie;
