//! Quantum Fisher information from Krylov projections of the SLD equation.
//!
//! The SLD equation `½{ρ, L} = O0` is a linear system for the superoperator
//! `K: Q ↦ ½{ρ, Q}`, which is positive in the ρ-weighted inner product
//! `⟨A, B⟩_ρ = ½ Tr(ρ{A†, B})`. In the eigenbasis of ρ, K is diagonal with
//! eigenvalues `w_ab = (ρ_a + ρ_b)/2`, so Lanczos on K from the seed `O0`
//! builds the orthogonal polynomials of a discrete spectral measure and the
//! truncated QFI is a Gauss quadrature of `λ⁻²` against it.
//!
//! Modules, bottom up:
//! - [`operator_space`]: density matrices, weighted Liouville vectors, seeds.
//! - [`lanczos`]: Krylov recursion and the tridiagonal matrix `T_n`.
//! - [`qfi`]: exact QFI, Krylov coefficients, tail errors and the `D/n` bound.
//! - [`spectral`]: spectral measure, moments, Hankel route, quadrature, regimes.
//! - [`synthetic`]: model measures and measure-space Lanczos.
//! - [`models`]: the mixed-field Ising chain and random states.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lanczos;
pub mod models;
pub mod operator_space;
pub mod qfi;
pub mod spectral;
pub mod synthetic;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Version of this crate, recorded in experiment provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use lanczos::{fn_series, run_lanczos, KrylovResult, LanczosOptions, Reorth, TridiagonalMatrix};
pub use models::{ising_hamiltonian, random_density_matrix, IsingParams};
pub use operator_space::{
    build_weighted_space, kraus_seed, validate_density_matrix, CMatrix, DensityMatrix, HermitianOperator,
    KrausSeed, LiouvilleVector, WeightedSpace,
};
pub use qfi::{analyze_seed, analyze_unitary, error_report, exact_qfi, QfiAnalysis, QfiReport, QuantityKind};
pub use spectral::{
    classify_measure, gauss_quadrature, lanczos_from_moments, moments, qfi_by_quadrature, spectral_measure,
    ClassifyOptions, QuadratureRule, RegimeClassification, SpectralMeasure,
};
pub use synthetic::{
    coefficient_tail, fit_decay, make_gapped_measure, make_hard_edge_measure, stieltjes_lanczos, DecayFit,
    DecayModel,
};
