// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::DMatrix;
use proptest::prelude::*;
use trajkrotov::network::{build_collective_lindblad, build_hamiltonian, NetworkSpec};
use trajkrotov::quantum::C64;

fn chain(n_nodes: usize) -> NetworkSpec {
    NetworkSpec { n_nodes, ..NetworkSpec::two_node() }
}

fn rank(m: &DMatrix<C64>, tol: f64) -> usize {
    m.clone().svd(false, false).singular_values.iter().filter(|s| **s > tol).count()
}

#[test]
fn lindblad_null_space_has_dimension_two_n() {
    for n in 1..=8 {
        let spec = chain(n);
        let l = build_collective_lindblad(&spec).unwrap().to_nalgebra();
        let null = spec.dim() - rank(&l, 1e-10);
        assert_eq!(null, 2 * n, "N = {n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_never_couples_vacuum(n in 1usize..6, seed in prop::collection::vec(-300.0f64..300.0, 6)) {
        let spec = chain(n);
        let h = build_hamiltonian(&spec, &seed[..n]).unwrap();
        prop_assert!(h.hermiticity_deviation() <= 1e-12);
        for x in 0..spec.dim() {
            prop_assert_eq!(h.entry(0, x), C64::new(0.0, 0.0));
            prop_assert_eq!(h.entry(x, 0), C64::new(0.0, 0.0));
        }
    }
}
