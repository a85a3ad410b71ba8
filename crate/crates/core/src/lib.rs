//! Projection Monte Carlo verification for guided stoquastic Hamiltonians and
//! a Suzuki-Trotter pipeline for the partition function of the ferromagnetic
//! transverse-field Ising model (TIM).
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: local stoquastic Hamiltonians, TIM instances, protocol parameters.
//! - [`oracle`]: exact dense computations used as ground truth at small `n`.
//! - [`guiding`]: guiding-state amplitudes, regularization and padding.
//! - [`walk`]: the Poisson branching walk and the accept/reject verifier.
//! - [`trotter`]: Trotter error operator and the quantum-to-classical mapping.
//! - [`ising`]: classical ferromagnetic Ising partition functions (exact and MCMC).
//!
//! Every stochastic routine takes an explicit seed; per-trial random streams are
//! derived with [`rng::stream`] so results do not depend on thread scheduling.

pub mod basis;
pub mod error;
pub mod guiding;
pub mod instances;
pub mod io;
pub mod ising;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod trotter;
pub mod walk;

pub use basis::BasisState;
pub use error::{Error, Result};
pub use guiding::{GuideKind, GuideSpec, GuidingState, RegularizedGuide};
pub use ising::{ClassicalIsingModel, PartitionEstimate};
pub use model::{
    GreenOperator, LocalTerm, ProblemInstance, ProtocolParams, StoquasticHamiltonian, TimModel,
};
pub use oracle::{DenseOperator, SpectralSummary};
pub use trotter::{ClassicalMapping, TrotterPlan};
pub use walk::{WalkConfig, WalkOutcome, WalkerPopulation};
