//! Finite-size quantum macrostates.
//!
//! The crate computes, at a given system size `N`, the objects that describe
//! macroscopic values of (generally noncommuting) mean-field observables:
//!
//! - [`operator`]: dense Hermitian linear algebra, site embeddings of
//!   single-spin operators, spectral decompositions and matrix functions.
//! - [`macrostate`]: spectral window projections, counting H-functions,
//!   microcanonical expectations and concentration diagnostics, including
//!   noncommutative polynomials of the observables.
//! - [`ensembles`]: Gibbs states, entropies, the conjugate-parameter solver,
//!   and the exponential concentration / equipartition diagnostics linking
//!   microcanonical and canonical entropies.
//! - [`kac`]: the quantum Kac ring, its exact product-state dynamics, the
//!   macroscopic map on Bloch vectors and H-theorem checks.

pub mod ensembles;
pub mod error;
pub mod kac;
pub mod macrostate;
pub mod operator;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use operator::{
    average_observable, commutator_norm, eigh, embed_site_operator, matrix_function, pauli,
    DensityMatrix, HermitianOperator, LocalOperator, SpectralDecomposition, C64,
};

/// Binary entropy term `η(x) = −x log x`, with `η(0) = 0` and `−∞` outside `[0, 1]`.
pub fn eta(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        f64::NEG_INFINITY
    } else if x == 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Entropy per spin of a spin-1/2 system whose magnetization has length `m`.
///
/// `η((1+m)/2) + η((1−m)/2)`; `−∞` for `m > 1`.
pub fn spin_entropy(m: f64) -> f64 {
    let m = m.abs();
    if m > 1.0 {
        return f64::NEG_INFINITY;
    }
    eta((1.0 + m) / 2.0) + eta((1.0 - m) / 2.0)
}
