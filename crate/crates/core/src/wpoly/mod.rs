//! Sparse bivariate polynomials, weighted homogeneity and factorization
//! into `c x^m y^n prod (x^q - alpha y^p)`.

mod factor;
mod poly;
mod polytype;
mod roots;
mod weights;

pub use factor::{
    factorize, DampingSelection, Factorization, GapIndexSet, LinearRoot, Root, DEFAULT_N0,
};
pub use poly::{PolyEval, Term, WPoly};
pub(crate) use poly::rational_from_f64;
pub use polytype::{poly_type_constant, PolyTypeConstant};
pub use roots::UPoly;
pub use weights::{detect_weights, WeightSignature};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WPolyError {
    #[error("polynomial has no terms")]
    EmptyPolynomial,
    #[error("polynomial is not weighted homogeneous")]
    NotWeightedHomogeneous,
    #[error("root finding failed: {0}")]
    RootFindingFailed(String),
    #[error("expanded product has imaginary coefficients (relative residual {0:.3e})")]
    NonRealExpansion(f64),
    #[error("no conjugate invariant prefix of length >= {0}")]
    NoConjugateInvariantSelection(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
