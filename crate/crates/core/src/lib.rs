//! Singular-orbit counting functions and partial complexities of polygonal billiards on the
//! Euclidean plane, the round sphere and the hyperbolic plane.
//!
//! Orbits are unfolded into the model ([`unfold`]): a pencil of directions at a point, or a family
//! of parallel rays, is split into beams at every corner image it meets. The recorded corner hits
//! give the counting functions ([`counting`]), the cuts give the complexities ([`complexity`]), and
//! [`stats`] compares both with their closed-form averages by seeded Monte Carlo sampling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod complexity;
pub mod counting;
pub mod error;
pub mod geom;
pub mod polygon;
pub mod stats;
pub mod unfold;
pub mod verify;
