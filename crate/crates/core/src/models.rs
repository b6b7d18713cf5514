//! Physical model builders: the mixed-field Ising chain and random states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_space::{validate_density_matrix, CMatrix, DensityMatrix, HermitianOperator, DEFAULT_EPS_RANK};

/// Default cap on the Hilbert dimension `2^L`.
pub const DEFAULT_MAX_HILBERT_DIM: usize = 1 << 7;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn pauli_y() -> CMatrix {
    let i = Complex64::new(0.0, 1.0);
    CMatrix::from_row_slice(2, 2, &[c(0.0), -i, i, c(0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `op` acting on site `site` of an `length`-site chain (site 0 is the
/// leftmost tensor factor).
pub fn site_operator(op: &CMatrix, site: usize, length: usize) -> CMatrix {
    let id = CMatrix::identity(2, 2);
    (0..length).fold(CMatrix::identity(1, 1), |acc, i| {
        kron(&acc, if i == site { op } else { &id })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub length: usize,
    #[serde(rename = "J", alias = "j")]
    pub j: f64,
    pub g: f64,
    pub h: f64,
}

impl IsingParams {
    pub fn new(length: usize, g: f64, h: f64) -> Self {
        Self { length, j: 1.0, g, h }
    }

    pub fn hilbert_dim(&self) -> usize {
        1usize.checked_shl(self.length as u32).unwrap_or(usize::MAX)
    }

    pub fn validate(&self, max_dim: usize) -> Result<()> {
        if self.length < 2 {
            return Err(Error::InvalidParameter(format!(
                "chain length must be at least 2 (got {})",
                self.length
            )));
        }
        if !(self.j.is_finite() && self.g.is_finite() && self.h.is_finite()) {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        if self.length >= usize::BITS as usize || self.hilbert_dim() > max_dim {
            return Err(Error::DimensionTooLarge {
                dim: self.hilbert_dim(),
                cap: max_dim,
            });
        }
        Ok(())
    }
}

/// `H = −J Σ_{i<L} Z_i Z_{i+1} − Σ_i (g X_i + h Z_i)` with open boundary.
pub fn ising_hamiltonian(p: &IsingParams) -> Result<HermitianOperator> {
    ising_hamiltonian_capped(p, DEFAULT_MAX_HILBERT_DIM)
}

pub fn ising_hamiltonian_capped(p: &IsingParams, max_dim: usize) -> Result<HermitianOperator> {
    p.validate(max_dim)?;
    let l = p.length;
    let dim = p.hilbert_dim();
    let (x, z) = (pauli_x(), pauli_z());
    let zs: Vec<CMatrix> = (0..l).map(|i| site_operator(&z, i, l)).collect();

    let mut h = CMatrix::zeros(dim, dim);
    for i in 0..l - 1 {
        h -= (&zs[i] * &zs[i + 1]) * c(p.j);
    }
    for (i, zi) in zs.iter().enumerate() {
        h -= site_operator(&x, i, l) * c(p.g) + zi * c(p.h);
    }
    HermitianOperator::new(&h)
}

/// Hilbert–Schmidt random state `ρ = GG†/Tr(GG†)` with standard complex
/// Gaussian `G` drawn from a ChaCha8 stream seeded by `seed`.
pub fn random_density_matrix(dim: usize, seed: u64) -> Result<DensityMatrix> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be at least 2 (got {dim})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..2 {
        let g = CMatrix::from_fn(dim, dim, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        });
        let gg = &g * g.adjoint();
        let tr = gg.trace().re;
        match validate_density_matrix(&(gg / c(tr)), DEFAULT_EPS_RANK) {
            Ok(rho) => return Ok(rho),
            Err(e @ Error::RankDeficient { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("loop ran"))
}

/// Random Hermitian matrix with Gaussian entries (GUE up to scale).
pub fn random_hermitian(dim: usize, seed: u64) -> HermitianOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    HermitianOperator::new(&((&g + g.adjoint()) * c(0.5))).expect("symmetrized matrix is Hermitian")
}

/// Random real symmetric matrix, for tests that want a real Hamiltonian.
pub fn random_real_symmetric(dim: usize, seed: u64) -> HermitianOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    HermitianOperator::from_real(&((&g + g.transpose()) * 0.5)).expect("symmetric")
}

/// SplitMix64 finalizer, used to derive independent per-member seeds.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of ensemble member `index`.
pub fn member_seed(rng_seed: u64, index: usize) -> u64 {
    mix_seed(rng_seed ^ index as u64)
}
