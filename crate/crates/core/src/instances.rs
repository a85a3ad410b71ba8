//! Seeded random instances for tests, benchmarks and the fixture suite.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::Result;
use crate::ising::ClassicalIsingModel;
use crate::model::{x_term, LocalTerm, StoquasticHamiltonian, TimModel};

/// `terms` random stoquastic blocks of locality `1..=k_max` plus `−h_u X_u`
/// with `h_u ∈ [0.2, 1]` on every qubit, which makes `H` irreducible.
pub fn random_stoquastic<R: Rng + ?Sized>(
    n: usize,
    k_max: usize,
    terms: usize,
    rng: &mut R,
) -> Result<StoquasticHamiltonian> {
    let k_max = k_max.clamp(1, n);
    let mut out = Vec::with_capacity(terms + n);
    for _ in 0..terms {
        let k = rng.random_range(1..=k_max);
        let mut support: Vec<usize> = sample(rng, n, k).into_vec();
        support.sort_unstable();
        let dim = 1 << k;
        let mut block = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            block[(i, i)] = rng.random_range(-1.0..1.0);
            for j in (i + 1)..dim {
                if rng.random_bool(0.5) {
                    let v = -rng.random_range(0.0..1.0);
                    block[(i, j)] = v;
                    block[(j, i)] = v;
                }
            }
        }
        out.push(LocalTerm::new(support, block)?);
    }
    for u in 0..n {
        out.push(x_term(u, rng.random_range(0.2..1.0))?);
    }
    StoquasticHamiltonian::new(n, out)
}

/// Ferromagnetic TIM: each pair coupled with probability `density`,
/// `J ∈ [0.1, 1]`, `h_u ∈ [0.1, 1]`.
pub fn random_tim<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Result<TimModel> {
    let mut couplings = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(density.clamp(0.0, 1.0)) {
                couplings.push((u, v, rng.random_range(0.1..1.0)));
            }
        }
    }
    let fields = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    TimModel::new(n, couplings, fields)
}

/// Ferromagnetic Ising graph: each pair joined with probability `density`, `w ∈ [0, w_max]`.
pub fn random_ferro_ising<R: Rng + ?Sized>(
    num_spins: usize,
    density: f64,
    w_max: f64,
    rng: &mut R,
) -> Result<ClassicalIsingModel> {
    let mut edges = Vec::new();
    for i in 0..num_spins {
        for j in (i + 1)..num_spins {
            if rng.random_bool(density.clamp(0.0, 1.0)) {
                edges.push((i, j, rng.random_range(0.0..=w_max)));
            }
        }
    }
    ClassicalIsingModel::new(num_spins, edges, 0.0)
}
