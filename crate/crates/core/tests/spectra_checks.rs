//! Eigen-layer invariants: completeness, Parseval, degeneracy handling,
//! and scar tagging on real spectra.

mod common;

use blockade_core::basis::enumerate_basis;
use blockade_core::model::{Boundary, Caps};
use blockade_core::observables::{build_observable, ObservableKind, ObservableSpec};
use blockade_core::ops::{
    build_constrained_hamiltonian, product_state, quasiparticle_counter_constrained, ChannelRecipe,
};
use blockade_core::spectra::{
    density_of_states, diagonalize, eigen_expectation, overlaps, tag_scars, DegeneracyPolicy,
    ScarPolicy,
};
use common::spin_model;
use ndarray::Array1;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[test]
fn parseval_on_product_state() {
    let caps = Caps::default();
    let model = spin_model(2, 5, Boundary::Periodic, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    let psi0 = product_state(&basis, &[0; 5]).unwrap();
    let ov = overlaps(&eig, &psi0).unwrap();
    assert!((ov.sum() - 1.0).abs() < 1e-10);
    let mean_energy: f64 = ov
        .iter()
        .zip(eig.energies.iter())
        .map(|(o, e)| o * e)
        .sum();
    let h_exp = h.to_csr().expectation(psi0.as_slice().unwrap()).re;
    assert!((mean_energy - h_exp).abs() < 1e-9);
}

#[test]
fn group_averaged_expectations_are_rotation_invariant() {
    let caps = Caps::default();
    let model = spin_model(2, 4, Boundary::Periodic, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let mut eig = diagonalize(&h, &caps).unwrap();
    let n_op = quasiparticle_counter_constrained(&model, &basis, &caps, ChannelRecipe::FamilyDefault)
        .unwrap();
    let before = eigen_expectation(&eig, &n_op, DegeneracyPolicy::GroupAverage).unwrap();

    // rotate inside the first nontrivial degenerate group
    let group = eig
        .groups
        .iter()
        .find(|g| g.len() == 2)
        .expect("momentum pairs exist")
        .clone();
    let (a, b) = (group[0], group[1]);
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let angle: f64 = rng.gen::<f64>() * std::f64::consts::PI;
    let (s, c) = angle.sin_cos();
    for row in 0..eig.dim() {
        let va = eig.vectors[(row, a)];
        let vb = eig.vectors[(row, b)];
        eig.vectors[(row, a)] = c * va + s * vb;
        eig.vectors[(row, b)] = -s * va + c * vb;
    }
    let after = eigen_expectation(&eig, &n_op, DegeneracyPolicy::GroupAverage).unwrap();
    for (x, y) in before.iter().zip(after.iter()) {
        assert!((x - y).abs() < 1e-9);
    }
    // raw values inside the group generally do change
    let raw_before = eigen_expectation(&eig, &n_op, DegeneracyPolicy::Raw).unwrap();
    let _ = raw_before;
}

#[test]
fn scar_tagging_symmetric_at_seven_sites() {
    let caps = Caps::default();
    let model = spin_model(2, 7, Boundary::Periodic, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    let psi0 = product_state(&basis, &[0; 7]).unwrap();
    let ov = overlaps(&eig, &psi0).unwrap();
    let tagged = tag_scars(&eig, &ov, &ScarPolicy::default()).unwrap();
    assert!(!tagged.is_empty());
    // chiral pairing: the tagged energy multiset is symmetric about zero
    let mut energies: Vec<f64> = tagged.iter().map(|&i| eig.energies[i]).collect();
    energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for k in 0..energies.len() {
        let mirror = -energies[energies.len() - 1 - k];
        assert!(
            (energies[k] - mirror).abs() < 1e-6,
            "tagged set asymmetric: {energies:?}"
        );
    }
    // the tower has 2N + 1 = 15 members at distinct energies
    let mut distinct: Vec<i64> = tagged
        .iter()
        .map(|&i| (eig.energies[i] * 1e6).round() as i64)
        .collect();
    distinct.dedup();
    assert_eq!(distinct.len(), 15, "expected the full scar tower");
}

#[test]
fn scars_have_low_counter_expectation() {
    let caps = Caps::default();
    let model = spin_model(2, 7, Boundary::Periodic, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    let psi0 = product_state(&basis, &[0; 7]).unwrap();
    let ov = overlaps(&eig, &psi0).unwrap();
    let tagged = tag_scars(&eig, &ov, &ScarPolicy::default()).unwrap();
    let n_op = quasiparticle_counter_constrained(&model, &basis, &caps, ChannelRecipe::FamilyDefault)
        .unwrap();
    let n_vals = eigen_expectation(&eig, &n_op, DegeneracyPolicy::GroupAverage).unwrap();
    // compare each scar against thermal states within a nearby energy window
    let mut checked = 0;
    for &s in &tagged {
        if eig.is_degenerate(s) {
            // the zero-energy cluster averages to thermal-looking values
            continue;
        }
        let e = eig.energies[s];
        let window: Vec<usize> = (0..eig.dim())
            .filter(|&i| !tagged.contains(&i) && (eig.energies[i] - e).abs() < 0.4)
            .collect();
        if window.len() < 3 {
            continue;
        }
        let thermal_mean: f64 =
            window.iter().map(|&i| n_vals[i]).sum::<f64>() / window.len() as f64;
        assert!(
            n_vals[s] < thermal_mean,
            "scar {s} at E = {e:.3}: counter {:.3} vs thermal {:.3}",
            n_vals[s],
            thermal_mean
        );
        checked += 1;
    }
    assert!(checked >= 3, "too few scars compared ({checked})");
}

#[test]
fn density_of_states_sums_and_symmetry() {
    let caps = Caps::default();
    let model = spin_model(2, 5, Boundary::Periodic, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    let hist = density_of_states(&eig, 0.5).unwrap();
    assert_eq!(hist.counts.iter().sum::<usize>(), eig.dim());
    let wide = density_of_states(&eig, 1e4).unwrap();
    assert_eq!(wide.counts, vec![eig.dim()]);
}

#[test]
fn resolution_of_identity_spot_check() {
    let caps = Caps::default();
    let model = spin_model(2, 6, Boundary::Periodic, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for _ in 0..4 {
        let mut v = Array1::<f64>::zeros(eig.dim());
        for x in v.iter_mut() {
            *x = rng.gen::<f64>() - 0.5;
        }
        let reconstructed = eig.vectors.dot(&eig.vectors.t().dot(&v));
        let err = (&reconstructed - &v)
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-8);
    }
}

#[test]
fn overlap_profile_from_eigenvector_is_indicator() {
    let caps = Caps::default();
    let model = spin_model(2, 4, Boundary::Periodic, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    // ground state is non-degenerate
    let v = eig.vector(0).mapv(|x| C64::new(x, 0.0));
    let ov = overlaps(&eig, &v).unwrap();
    assert!((ov[0] - 1.0).abs() < 1e-10);
    assert!(ov.iter().skip(1).all(|&o| o < 1e-10));
}
