//! Guide regularization, padding and the good-set mass bound.

use proptest::prelude::*;
use stoqmc_core::guiding::{default_phi_min, padded_guide, GuideKind, GuidingState, RegularizedGuide};
use stoqmc_core::oracle::good_set_from;
use stoqmc_core::BasisState;

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

proptest! {
    #[test]
    fn regularized_values_are_clamped(probs in prop::collection::vec(0.0f64..=1.0, 1..8)) {
        let n = probs.len();
        let guide = RegularizedGuide::new(GuidingState::product(&probs).unwrap());
        for x in 0..(1u64 << n) {
            let v = guide.value(BasisState(x));
            prop_assert!(v >= default_phi_min(n) && v <= 1.0);
        }
    }

    #[test]
    fn padding_keeps_unit_norm(raw in prop::collection::vec(0.0f64..1.0, 8)) {
        prop_assume!(raw.iter().any(|&a| a > 1e-3));
        let table = unit(raw);
        let omega = GuidingState::from_table(3, table.clone(), GuideKind::User).unwrap();
        let padded = padded_guide(&omega).unwrap();
        let norm2: f64 = padded.to_vec().unwrap().iter().map(|a| a * a).sum();
        prop_assert!((norm2 - 1.0).abs() < 1e-12);
        // Padding only raises amplitudes, up to the common scale.
        let floor = padded.to_vec().unwrap().iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(floor > 0.0);
    }

    #[test]
    fn good_set_holds_half_the_mass(
        psi in prop::collection::vec(0.01f64..1.0, 16),
        phi in prop::collection::vec(0.0f64..1.0, 16),
    ) {
        prop_assume!(phi.iter().any(|&a| a > 1e-3));
        let psi = unit(psi);
        let good = good_set_from(&psi, &phi).unwrap();
        prop_assert!(good.mass >= 0.5 - 1e-12);
        prop_assert!(!good.members.is_empty());
        let total: f64 = good.pi.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}
