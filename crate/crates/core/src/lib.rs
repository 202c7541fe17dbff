//! Entropy production for a finite system coupled to a finite environment,
//! with the environment's inverse temperature chosen freely along the
//! protocol.
//!
//! The crate is layered: [`linalg`] and [`thermo`] provide the matrix and
//! entropic primitives, [`dynamics`] evolves joint states, [`production`]
//! and [`bounds`] evaluate entropy production and its lower bounds,
//! [`qubit`] holds the closed-form two-level example, and [`scenario`] and
//! [`verify`] drive everything from files and randomized sweeps.

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod production;
pub mod qubit;
pub mod random;
pub mod scenario;
pub mod thermo;
pub mod verify;

pub use bounds::{BoundReport, PerturbedInitial, SufficientCheck};
pub use dynamics::{evolve, HamiltonianSchedule, Segment, Trajectory};
pub use error::{Error, Result};
pub use linalg::{BipartiteState, DensityMatrix, HermitianMatrix, MatrixJson, Subsystem, UnitaryMatrix, C64};
pub use production::{build_report, BetaPolicy, EpReport};
pub use qubit::{EnvPoint, RegionGrid, RegionMap, RegionPolicy};
pub use scenario::{run_simulate, Scenario, Simulation};
pub use thermo::{BetaSolveConfig, EnvHamiltonian, ExtReal, GibbsSpec};
pub use verify::{run_verify, VerifySuiteConfig, VerifySummary};
