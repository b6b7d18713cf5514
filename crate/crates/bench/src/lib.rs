//! Fixtures shared by the benchmarks.

use krylov_qfi::models::ising_hamiltonian_capped;
use krylov_qfi::{random_density_matrix, HermitianOperator, IsingParams, LiouvilleVector, WeightedSpace};

pub struct IsingFixture {
    pub space: WeightedSpace,
    pub h: HermitianOperator,
    pub seed: LiouvilleVector,
    pub seed_norm: f64,
}

/// Random state on the `length`-site chain at `g = −1.05`, `h = 0.5`.
pub fn ising_fixture(length: usize, rng_seed: u64) -> IsingFixture {
    let params = IsingParams::new(length, -1.05, 0.5);
    let h = ising_hamiltonian_capped(&params, 1 << length).expect("valid chain");
    let space = WeightedSpace::new(random_density_matrix(h.dim(), rng_seed).expect("full rank"));
    let (seed, seed_norm) = space.unitary_seed(&h).expect("nonzero seed");
    IsingFixture { space, h, seed, seed_norm }
}
