//! Trotter error bound, eigenvalue sandwich and the quantum-to-classical mapping.

use nalgebra::DMatrix;
use proptest::prelude::*;
use stoqmc_core::instances::random_tim;
use stoqmc_core::ising::{partition_exact_enum, partition_exact_layered, ClassicalIsingModel};
use stoqmc_core::linalg::spread;
use stoqmc_core::model::TimModel;
use stoqmc_core::rng::stream;
use stoqmc_core::trotter::{
    map_to_classical, plan_trotter, plan_with_steps, tim_partition_exact, trotter_error_operator,
    trotterized_trace_exact,
};
use rand::Rng;

fn random_symmetric(dim: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    0.5 * (&m + m.transpose())
}

#[test]
fn error_operator_obeys_cubic_bound() {
    let mut r = stream(21, 0);
    for dim in [2, 3, 8, 16, 32] {
        let a = random_symmetric(dim, &mut r);
        let b = random_symmetric(dim, &mut r);
        let rho = spread(&a) + spread(&b);
        for frac in [1.0, 0.5, 0.1] {
            let (_, norm) = trotter_error_operator(&a, &b, frac / (2.0 * rho)).unwrap();
            assert!(norm <= 12.0 * rho.powi(3), "dim {dim}: {norm} > {}", 12.0 * rho.powi(3));
        }
    }
}

#[test]
fn commuting_parts_have_no_error() {
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]));
    let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, 0.1, -0.7]));
    let rho = spread(&a) + spread(&b);
    let (d, norm) = trotter_error_operator(&a, &b, 1.0 / (2.0 * rho)).unwrap();
    assert!(norm < 1e-9 && d.abs().max() < 1e-9);
}

#[test]
fn trotterized_trace_is_sandwiched() {
    // Weyl: each eigenvalue of r·log(e^{At/2}e^{Bt}e^{At/2}) is within ‖D‖/r² ≤ 12ρ³/r².
    let mut r = stream(22, 0);
    for i in 0..24 {
        let n = 1 + i % 4;
        let tim = random_tim(n, 0.8, &mut r).unwrap();
        let steps = 1 + (i as u64 * 5) % 20;
        let plan = plan_with_steps(&tim, steps).unwrap();
        let gap = (trotterized_trace_exact(&tim, steps).unwrap().log_z - tim_partition_exact(&tim).unwrap().log_z).abs();
        assert!(gap <= plan.eigenvalue_shift, "n {n} r {steps}: {gap} > {}", plan.eigenvalue_shift);
    }
}

#[test]
fn planned_steps_meet_delta() {
    let tim = TimModel::new(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], vec![1.0; 3]).unwrap();
    for delta in [0.5, 0.1, 0.02] {
        let plan = plan_trotter(&tim, delta).unwrap();
        let z = tim_partition_exact(&tim).unwrap().log_z;
        let zp = trotterized_trace_exact(&tim, plan.r).unwrap().log_z;
        assert!(((zp - z).exp() - 1.0).abs() <= delta.exp() - 1.0);
    }
}

#[test]
fn single_qubit_ring_gives_two_cosh() {
    // A = 0, so (e^{Bt})^r = e^{hX} for every r.
    for h in [0.3, 1.0, 2.5] {
        let tim = TimModel::new(1, vec![], vec![h]).unwrap();
        for steps in 1..=7 {
            let m = map_to_classical(&tim, &plan_with_steps(&tim, steps).unwrap(), None).unwrap();
            let log_z = partition_exact_enum(&m.ising).unwrap();
            assert!((log_z - (2.0 * h.cosh()).ln()).abs() < 1e-12, "h {h} r {steps}");
        }
    }
}

#[test]
fn field_floor_bounds_the_change_in_log_z() {
    let tim = TimModel::new(2, vec![(0, 1, 1.0)], vec![0.0, 0.0]).unwrap();
    let delta = 0.1;
    let plan = plan_trotter(&tim, delta).unwrap();
    let m = map_to_classical(&tim, &plan, Some(delta)).unwrap();
    let floor = m.floor.as_ref().unwrap();
    assert_eq!(floor.raised, vec![0, 1]);
    let original = tim_partition_exact(&tim).unwrap().log_z;
    // tr e^{ZZ} = 2e + 2/e.
    assert!((original - (2.0 * 1f64.exp() + 2.0 * (-1f64).exp()).ln()).abs() < 1e-12);
    let floored = tim_partition_exact(&floor.model).unwrap().log_z;
    assert!((floored - original).abs() <= floor.log_perturbation);
    let mapped = partition_exact_layered(&m.ising, 2).unwrap();
    let trace = trotterized_trace_exact(&floor.model, plan.r).unwrap().log_z;
    assert!(((mapped - trace).exp() - 1.0).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mapping_identity_and_shape(seed in 0u64..10_000, n in 1usize..=3, steps in 1u64..=6) {
        let tim = random_tim(n, 0.7, &mut stream(seed, 0)).unwrap();
        let m = map_to_classical(&tim, &plan_with_steps(&tim, steps).unwrap(), None).unwrap();
        let r = steps as usize;
        prop_assert_eq!(m.ising.num_spins(), n * r);
        prop_assert!(m.ising.edges().iter().all(|e| e.2 >= 0.0));
        let inter = match r { 1 => 0, 2 => n, _ => n * r };
        prop_assert_eq!(m.ising.edges().len(), r * tim.couplings().len() + inter);
        let trace = trotterized_trace_exact(&tim, steps).unwrap().log_z;
        let by_enum = partition_exact_enum(&m.ising).unwrap();
        let by_layers = partition_exact_layered(&m.ising, n).unwrap();
        prop_assert!(((by_enum - trace).exp() - 1.0).abs() < 1e-8);
        prop_assert!(((by_layers - trace).exp() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn relabeling_preserves_partition_sum(seed in 0u64..10_000, spins in 2usize..=9) {
        let mut r = stream(seed, 1);
        let model = stoqmc_core::instances::random_ferro_ising(spins, 0.5, 1.5, &mut r).unwrap();
        let mut perm: Vec<usize> = (0..spins).collect();
        for i in (1..spins).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let relabeled: ClassicalIsingModel = model.relabeled(&perm).unwrap();
        let a = partition_exact_enum(&model).unwrap();
        let b = partition_exact_enum(&relabeled).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }
}
