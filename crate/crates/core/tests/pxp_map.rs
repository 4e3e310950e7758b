//! Spin-1 to PXP cross-check: dimensions and spectra.

mod common;

use blockade_core::basis::enumerate_basis;
use blockade_core::model::{Boundary, Caps};
use blockade_core::ops::build_constrained_hamiltonian;
use blockade_core::pxp::{map_spin1_state, pxp_equivalent, unmap_spin1_state};
use blockade_core::spectra::diagonalize;
use common::spin_model;

#[test]
fn spectra_match_up_to_sqrt2() {
    let caps = Caps::default();
    for n in [3usize, 4] {
        let model = spin_model(2, n, Boundary::Periodic, 200.0);
        let basis = enumerate_basis(&model, &caps).unwrap();
        let h = build_constrained_hamiltonian(&model, &basis).unwrap();
        let eig = diagonalize(&h, &caps).unwrap();

        let pxp = pxp_equivalent(&model, &caps).unwrap();
        assert_eq!(pxp.basis.dim(), basis.dim(), "dimension mismatch at n = {n}");
        let pxp_eig = diagonalize(&pxp.hamiltonian, &caps).unwrap();

        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        for i in 0..eig.dim() {
            let want = inv_sqrt2 * pxp_eig.energies[i];
            assert!(
                (eig.energies[i] - want).abs() < 1e-10,
                "n = {n}, level {i}: {} vs {}",
                eig.energies[i],
                want
            );
        }
    }
}

#[test]
fn bijection_covers_both_bases() {
    let caps = Caps::default();
    let model = spin_model(2, 4, Boundary::Periodic, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let pxp = pxp_equivalent(&model, &caps).unwrap();
    let mut seen = vec![false; pxp.basis.dim()];
    for s in basis.states() {
        let q = map_spin1_state(s);
        let idx = pxp.basis.index_of(&q).expect("image inside the PXP basis");
        assert!(!seen[idx], "mapping must be injective");
        seen[idx] = true;
        assert_eq!(unmap_spin1_state(&q).unwrap(), s.clone());
    }
    assert!(seen.iter().all(|&s| s), "mapping must be onto");
}

#[test]
fn open_boundary_dimensions_also_match() {
    let caps = Caps::default();
    let model = spin_model(2, 3, Boundary::Open, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let pxp = pxp_equivalent(&model, &caps).unwrap();
    assert_eq!(pxp.basis.dim(), basis.dim());
}
