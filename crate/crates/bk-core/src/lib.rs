//! Computational engine for Blanchet-Khovanov algebras.
//!
//! The crate provides the diagrammatic combinatorics (weights, blocks, cup
//! and circle diagrams), the graded algebra with its signed surgery
//! multiplication, bimodules over composite matchings, the combinatorial web
//! model used for degree and sign cross-checks, and an exhaustive
//! verification harness for the structural laws at small block sizes.

pub mod algebra;
pub mod arc;
pub mod bimod;
pub mod blocks;
pub mod error;
pub mod planar;
pub mod poly;
pub mod verify;
pub mod web;

pub use algebra::{basis, idempotents, mult, poincare, structure_constants, AlgebraElement};
pub use arc::{canonical_cup, CapDiagram, CircleDiagram, CircleState, CupDiagram, OrientedCircleDiagram};
pub use blocks::{balanced_blocks_up_to, block_of, Block, BlockSym, Weight, WeightSym};
pub use error::{BkError, Result};
pub use poly::LaurentPoly;
