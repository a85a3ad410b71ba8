//! Deterministic workloads shared by the kernel benchmarks.

use stoqmc_core::guiding::{GuidingState, RegularizedGuide};
use stoqmc_core::instances::random_ferro_ising;
use stoqmc_core::ising::ClassicalIsingModel;
use stoqmc_core::model::{tim_to_local, GreenOperator, StoquasticHamiltonian, TimModel};
use stoqmc_core::rng::stream;
use stoqmc_core::Result;

/// Open ferromagnetic chain with unit couplings and uniform field `h`.
pub fn tim_chain(n: usize, h: f64) -> Result<TimModel> {
    let couplings = (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1.0)).collect();
    TimModel::new(n, couplings, vec![h; n])
}

/// Everything a branching walk needs, for the chain at `λ_M` = `lambda_m`.
pub struct WalkWorkload {
    pub hamiltonian: StoquasticHamiltonian,
    pub green: GreenOperator,
    pub guide: RegularizedGuide,
}

pub fn walk_workload(n: usize, lambda_m: f64) -> Result<WalkWorkload> {
    let hamiltonian = tim_to_local(&tim_chain(n, 1.0)?)?;
    let green = GreenOperator::for_hamiltonian(&hamiltonian, lambda_m)?;
    let guide = RegularizedGuide::new(GuidingState::product(&vec![0.5; n])?);
    Ok(WalkWorkload { hamiltonian, green, guide })
}

/// Random ferromagnet with fixed seed.
pub fn ferro_ising(spins: usize, seed: u64) -> Result<ClassicalIsingModel> {
    random_ferro_ising(spins, 0.3, 1.0, &mut stream(seed, 0))
}
