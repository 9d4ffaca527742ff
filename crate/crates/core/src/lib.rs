//! Reconstruction of principal semi-algebraic shapes from truncated power
//! moments.
//!
//! The crate is organised bottom-up:
//!
//! * [`series`]: truncated power series in one and two inverse variables, with
//!   exact `exp`/`log` on the truncation box.
//! * [`domains`]: test shapes, sampled shade functions and forward moment
//!   computation.
//! * [`exptransform`]: the exponential transform, both as a coefficient map
//!   (moments to `b` / `t` coefficients) and as a pointwise integral.
//! * [`reconstruct`]: degeneracy detection, node polynomial, defining
//!   polynomial and quadrature data of a planar quadrature domain.
//! * [`markov1d`]: the one-dimensional interval-union pipeline (Hankel rank
//!   and Padé recovery).
//! * [`volume`]: admissible multi-indices and Monte Carlo sublevel-set volumes.
//! * [`stability`]: experiment harness for the perturbation inequalities.
//!
//! Complex numbers are [`num_complex::Complex64`] everywhere and serialize as
//! `[re, im]` pairs.

pub mod domains;
pub mod error;
pub mod exptransform;
pub mod linalg;
pub mod markov1d;
pub mod poly;
pub mod quad;
pub mod reconstruct;
pub mod selftest;
pub mod series;
pub mod stability;
pub mod volume;

pub use num_complex::Complex64;

pub use domains::{
    DomainSpec, MomentTable1D, MomentTable2D, Perturbation, Provenance, ShadeFunction,
};
pub use error::{Error, Result};
pub use exptransform::{ExpCoeffTable, TCoeffTable};
pub use linalg::{CMatrix, HermitianEigen};
pub use markov1d::{HankelMatrix, RationalE1D};
pub use poly::CPoly;
pub use reconstruct::{HermitianBivarPoly, QuadratureData, ReconstructionReport};
pub use series::{TruncSeries1, TruncSeries2};
pub use volume::{AdmissibleIndex, RealPoly};

/// Convenience constructor for a complex number.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
