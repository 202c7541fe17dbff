//! Fixtures shared by the criterion benches.

use qthermo_core::random::{self, seeded};
use qthermo_core::verify::{random_scenario, InitialKind, RandomScenario};
use qthermo_core::{DensityMatrix, HermitianMatrix};

/// Random joint scenario with a two-segment schedule and a tabulated ramp.
pub fn scenario(d_s: usize, d_e: usize) -> RandomScenario {
    let mut rng = seeded(7);
    random_scenario(&mut rng, d_s, d_e, InitialKind::Joint).expect("fixture scenario")
}

pub fn hermitian(dim: usize) -> HermitianMatrix {
    random::random_hermitian(&mut seeded(11), dim, 1.0)
}

/// An environment Hamiltonian and a full-rank state on it.
pub fn environment(dim: usize) -> (HermitianMatrix, DensityMatrix) {
    let mut rng = seeded(13);
    (random::random_env_hamiltonian(&mut rng, dim, 1.0), random::wishart_density(&mut rng, dim))
}
