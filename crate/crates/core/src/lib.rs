//! Desk-scale laboratory for constant-depth circuits over weight-thresholded
//! gates. A gate is in G(k) if it is constant on all inputs of Hamming
//! weight ≥ k (orlike) or on all inputs with ≥ k zeros (andlike); GC⁰(k)
//! circuits are constant-depth circuits over such gates. The crate provides
//! exact truth-table semantics, canonical decision trees and witness
//! machinery for restriction-switching experiments, the unambiguous-DNF
//! depth-reduction transform, explicit pseudorandom generators, Fourier
//! spectrum analysis with a query learner, and the explicit circuit families
//! that make the bounds tight.

pub mod boolfun;
pub mod circuit;
pub mod constructions;
pub mod depthred;
pub mod error;
pub mod prg;
pub mod spectral;
pub mod stats;
pub mod switching;

pub use error::{Error, Result};
