//! Dense oracle cross-checked against a Kronecker-product construction and
//! closed-form spectra.

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use stoqmc_core::instances::random_stoquastic;
use stoqmc_core::model::{tim_to_local, StoquasticHamiltonian, TimModel};
use stoqmc_core::oracle::{build_dense, partition_exact, spectrum};
use stoqmc_core::rng::stream;
use stoqmc_core::trotter::tim_partition_exact;

/// `|a⟩⟨b|` on one qubit.
fn unit(a: usize, b: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2, 2);
    m[(a, b)] = 1.0;
    m
}

/// `Σ_ij block_ij ⊗_q (|i_q⟩⟨j_q| or I)`, with qubit 0 the least significant
/// factor and support position `k` the local bit `k`.
fn kronecker_dense(h: &StoquasticHamiltonian) -> DMatrix<f64> {
    let n = h.n();
    let dim = 1 << n;
    let mut total = DMatrix::zeros(dim, dim);
    for term in h.terms() {
        let support = term.support();
        for i in 0..term.dim() {
            for j in 0..term.dim() {
                let v = term.entry(i, j);
                if v == 0.0 {
                    continue;
                }
                let mut op = DMatrix::from_element(1, 1, 1.0);
                for q in (0..n).rev() {
                    let factor = match support.iter().position(|&s| s == q) {
                        Some(k) => unit((i >> k) & 1, (j >> k) & 1),
                        None => DMatrix::identity(2, 2),
                    };
                    op = op.kronecker(&factor);
                }
                total += op * v;
            }
        }
    }
    total
}

#[test]
fn dense_build_matches_kronecker_construction() {
    let mut r = stream(41, 0);
    for n in 1..=6 {
        for terms in [1, 3] {
            let h = random_stoquastic(n, 3, terms, &mut r).unwrap();
            let dense = build_dense(&h).unwrap();
            let kron = kronecker_dense(&h);
            let diff = (dense.matrix() - &kron).abs().max();
            assert!(diff < 1e-14, "n = {n}: {diff}");
        }
    }
}

#[test]
fn two_spin_tim_spectrum_is_closed_form() {
    // −ZZ − X₁ − X₂ has eigenvalues ±√5 and ±1.
    let tim = TimModel::new(2, vec![(0, 1, 1.0)], vec![1.0, 1.0]).unwrap();
    let s = spectrum(&tim_to_local(&tim).unwrap()).unwrap();
    let expected = [-(5f64.sqrt()), -1.0, 1.0, 5f64.sqrt()];
    for (a, b) in s.eigenvalues.iter().zip(expected) {
        assert_relative_eq!(*a, b, epsilon = 1e-12);
    }
    // Perron-Frobenius: the ground state has one sign.
    assert!(s.ground_state.iter().all(|&a| a > 0.0));
}

#[test]
fn partition_routes_agree() {
    let mut r = stream(42, 0);
    for n in 1..=5 {
        let tim = stoqmc_core::instances::random_tim(n, 0.6, &mut r).unwrap();
        let a = partition_exact(&tim_to_local(&tim).unwrap()).unwrap().log_z;
        let b = tim_partition_exact(&tim).unwrap().log_z;
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }
    // Single qubit: tr e^{hX} = 2 cosh h.
    let one = TimModel::new(1, vec![], vec![0.7]).unwrap();
    assert_relative_eq!(
        tim_partition_exact(&one).unwrap().z,
        2.0 * 0.7f64.cosh(),
        max_relative = 1e-14
    );
}
