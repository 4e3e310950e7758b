//! Projector algebra, jump-term cancellation on the constrained subspace,
//! and effective-Hamiltonian identities.

mod common;

use blockade_core::basis::enumerate_basis;
use blockade_core::model::{Boundary, Caps};
use blockade_core::ops::{
    build_channels, build_constrained_hamiltonian, build_projectors, effective_hamiltonian,
    embed_constrained_op, embed_vector, ChannelRecipe, LiouvillianKind,
};
use blockade_core::sparse::{BasisTag, SparseOperator};
use blockade_core::spectra::diagonalize;
use common::spin_model;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn random_constrained_density(
    model: &blockade_core::model::BondModel,
    basis: &blockade_core::basis::ConstrainedBasis,
    caps: &Caps,
    rng: &mut ChaCha12Rng,
) -> Array2<C64> {
    // rho = A A† / tr over a random constrained-supported A, embedded
    let dim = basis.dim();
    let mut a = Array2::<C64>::zeros((dim, dim));
    for v in a.iter_mut() {
        *v = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    }
    let prod = a.dot(&a.t().mapv(|z| z.conj()));
    let tr: C64 = (0..dim).map(|i| prod[(i, i)]).sum();
    let rho_c = prod.mapv(|z| z / tr);
    let sparse = SparseOperator::from_dense(rho_c.view(), BasisTag::Constrained, true);
    embed_constrained_op(model, basis, caps, &sparse)
        .unwrap()
        .to_dense()
}

#[test]
fn projector_identities_small_sizes() {
    let caps = Caps::default();
    for n in 2..=5 {
        let model = spin_model(2, n, Boundary::Periodic, 200.0);
        let projectors = build_projectors(&model, &caps).unwrap();
        let p = &projectors.p_hat;
        // P^2 = P
        assert!(p.matmul(p).unwrap().max_diff(p).unwrap() < 1e-12);
        // [pi_m, pi_n] = 0 and Pi_k P = 0
        for (i, pi_a) in projectors.pi.iter().enumerate() {
            for pi_b in projectors.pi.iter().skip(i + 1) {
                let ab = pi_a.matmul(pi_b).unwrap();
                let ba = pi_b.matmul(pi_a).unwrap();
                assert!(ab.max_diff(&ba).unwrap() < 1e-12);
            }
        }
        for cap_pi in &projectors.cap_pi {
            let prod = cap_pi.matmul(p).unwrap();
            assert!(prod.max_norm() < 1e-12);
        }
    }
}

#[test]
fn full_space_hamiltonian_commutes_with_projector() {
    let caps = Caps::default();
    for n in [3usize, 4, 5] {
        let model = spin_model(2, n, Boundary::Periodic, 100.0);
        let basis = enumerate_basis(&model, &caps).unwrap();
        let p = build_projectors(&model, &caps).unwrap().p_hat;
        // the blockaded Hamiltonian in the full space equals
        // H0 - sqrt(j) (M + M†) for the spin chain; build it from channels
        let h0 = blockade_core::ops::build_h0_full(&model, &caps).unwrap();
        let ms = blockade_core::ops::build_bond_jump_ops(&model, &caps).unwrap();
        let mut h = h0;
        let j = model.spec.j.value();
        for m in &ms {
            h = h.add(&m.scale(C64::new(-j.sqrt(), 0.0))).unwrap();
            h = h.add(&m.adjoint().scale(C64::new(-j.sqrt(), 0.0))).unwrap();
        }
        let hp = h.matmul(&p).unwrap();
        let ph = p.matmul(&h).unwrap();
        assert!(hp.max_diff(&ph).unwrap() < 1e-12);
        // its compression agrees with the constrained build
        let compressed = blockade_core::ops::compress_to_basis(&model, &basis, &caps, &h).unwrap();
        let direct = build_constrained_hamiltonian(&model, &basis).unwrap();
        assert!(compressed.max_diff(&direct).unwrap() < 1e-12);
    }
}

#[test]
fn jump_term_annihilates_constrained_density_matrices() {
    let caps = Caps::default();
    let model = spin_model(2, 4, Boundary::Periodic, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let channels = build_channels(&model, &caps, ChannelRecipe::FamilyDefault).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for _ in 0..20 {
        let rho = random_constrained_density(&model, &basis, &caps, &mut rng);
        // J(rho) = gamma1 sum L1 rho L1† + gamma2 sum L2 rho L2†
        let dim = rho.nrows();
        let mut out = Array2::<C64>::zeros((dim, dim));
        for (rate, ops) in [
            (channels.gamma1, &channels.ops1),
            (channels.gamma2, &channels.ops2),
        ] {
            for l in ops {
                let lc = l.to_csr();
                let mut t1 = Array2::zeros((dim, dim));
                lc.spmm(rho.view(), &mut t1);
                let mut t2 = Array2::zeros((dim, dim));
                lc.spmm_right_dagger(t1.view(), &mut t2);
                out.scaled_add(C64::new(rate, 0.0), &t2);
            }
        }
        let max = out.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        assert!(max < 1e-12, "jump term leaked {max:.3e}");
    }
}

#[test]
fn effective_hamiltonian_shares_right_eigenvectors() {
    let caps = Caps::default();
    for n in [3usize, 4, 5] {
        let model = spin_model(2, n, Boundary::Periodic, 200.0);
        let basis = enumerate_basis(&model, &caps).unwrap();
        let h = build_constrained_hamiltonian(&model, &basis).unwrap();
        let eig = diagonalize(&h, &caps).unwrap();
        let hn = effective_hamiltonian(
            &model,
            &basis,
            &caps,
            LiouvillianKind::Full,
            ChannelRecipe::FamilyDefault,
        )
        .unwrap()
        .to_csr();
        for i in 0..eig.dim() {
            let v = eig.vector(i).mapv(|x| C64::new(x, 0.0));
            let full = embed_vector(&model, &basis, &caps, &v).unwrap();
            let hv = hn.matvec_alloc(&full);
            let mut resid: f64 = 0.0;
            for (a, b) in hv.iter().zip(full.iter()) {
                resid += (a - b * eig.energies[i]).norm_sqr();
            }
            assert!(
                resid.sqrt() < 1e-10,
                "n = {n}, eigenpair {i} residual {:.2e}",
                resid.sqrt()
            );
        }
    }
}

#[test]
fn general_recipe_also_shares_right_eigenvectors() {
    let caps = Caps::default();
    let model = spin_model(2, 4, Boundary::Periodic, 150.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    let hn = effective_hamiltonian(
        &model,
        &basis,
        &caps,
        LiouvillianKind::Full,
        ChannelRecipe::General,
    )
    .unwrap()
    .to_csr();
    for i in (0..eig.dim()).step_by(5) {
        let v = eig.vector(i).mapv(|x| C64::new(x, 0.0));
        let full = embed_vector(&model, &basis, &caps, &v).unwrap();
        let hv = hn.matvec_alloc(&full);
        let mut resid: f64 = 0.0;
        for (a, b) in hv.iter().zip(full.iter()) {
            resid += (a - b * eig.energies[i]).norm_sqr();
        }
        assert!(resid.sqrt() < 1e-10);
    }
}

/// Eigenvalues of the anti-Hermitian part (H - H†)/(2i), i.e. the decay-rate
/// matrix. The balanced kind has both signs; the positive kinds are
/// dissipative only.
fn antihermitian_eigs(op: &SparseOperator) -> Vec<f64> {
    use ndarray_linalg::{Eigh, UPLO};
    let dense = op.to_dense();
    let dim = dense.nrows();
    let mut anti = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        for k in 0..dim {
            anti[(i, k)] = (dense[(i, k)] - dense[(k, i)].conj()) / C64::new(0.0, 2.0);
        }
    }
    let (vals, _) = anti.eigh(UPLO::Lower).expect("hermitian eigensolve");
    vals.to_vec()
}

#[test]
fn decay_matrix_signs_by_kind() {
    let caps = Caps::default();
    let model = spin_model(2, 3, Boundary::Periodic, 50.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let tol = 1e-10;
    let hn = effective_hamiltonian(&model, &basis, &caps, LiouvillianKind::Full, ChannelRecipe::FamilyDefault).unwrap();
    let eigs = antihermitian_eigs(&hn);
    assert!(eigs.iter().any(|&x| x > tol), "balanced kind should gain somewhere");
    assert!(eigs.iter().any(|&x| x < -tol));
    for kind in [LiouvillianKind::Positive, LiouvillianKind::LindbladPrime] {
        let h = effective_hamiltonian(&model, &basis, &caps, kind, ChannelRecipe::FamilyDefault).unwrap();
        let eigs = antihermitian_eigs(&h);
        assert!(
            eigs.iter().all(|&x| x < tol),
            "{kind:?} must be dissipative only: max {:?}",
            eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        );
    }
}

#[test]
fn positive_kind_approaches_balanced_kind_in_c() {
    let caps = Caps::default();
    let mut norms = Vec::new();
    for &c in &[100.0, 1000.0, 10000.0] {
        let model = spin_model(2, 3, Boundary::Periodic, c);
        let basis = enumerate_basis(&model, &caps).unwrap();
        let hn = effective_hamiltonian(&model, &basis, &caps, LiouvillianKind::Full, ChannelRecipe::FamilyDefault).unwrap();
        let hp = effective_hamiltonian(&model, &basis, &caps, LiouvillianKind::Positive, ChannelRecipe::FamilyDefault).unwrap();
        norms.push(hp.max_diff(&hn).unwrap());
    }
    // the difference is (sqrt(2j)/c) * counter: it shrinks like 1/c
    assert!(norms[1] < 0.15 * norms[0]);
    assert!(norms[2] < 0.15 * norms[1]);
}

#[test]
fn counter_is_positive_semidefinite_and_nonconserved() {
    let caps = Caps::default();
    let model = spin_model(2, 3, Boundary::Periodic, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let nc = blockade_core::ops::quasiparticle_counter_constrained(
        &model,
        &basis,
        &caps,
        ChannelRecipe::FamilyDefault,
    )
    .unwrap();
    let eig = diagonalize(&nc, &caps).unwrap();
    assert!(eig.energies.iter().all(|&x| x > -1e-12));
    // does not commute with H
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let hn = h.matmul(&nc).unwrap();
    let nh = nc.matmul(&h).unwrap();
    assert!(hn.max_diff(&nh).unwrap() > 1e-3);
}

#[test]
fn single_bond_counter_spectrum_is_zero_one() {
    let caps = Caps::default();
    let model = spin_model(2, 2, Boundary::Open, 200.0);
    let channels = build_channels(&model, &caps, ChannelRecipe::FamilyDefault).unwrap();
    let l2 = &channels.ops2[0];
    let n_bond = l2.adjoint().matmul(l2).unwrap();
    let mut n_herm = n_bond.clone();
    n_herm.hermitian = true;
    let eig = diagonalize(&n_herm, &caps).unwrap();
    for &e in eig.energies.iter() {
        assert!(e.abs() < 1e-12 || (e - 1.0).abs() < 1e-12);
    }
}

#[test]
fn rates_match_their_definitions() {
    let caps = Caps::default();
    let model = spin_model(2, 4, Boundary::Periodic, 200.0);
    let ch = build_channels(&model, &caps, ChannelRecipe::FamilyDefault).unwrap();
    let j = 1.0f64;
    assert!((ch.gamma1 - 200.0 * (2.0 * j).sqrt()).abs() < 1e-12);
    assert!((ch.gamma2 + 2.0 * (2.0 * j).sqrt() / 200.0).abs() < 1e-15);
    // gamma2 at j = 1, c = 200 is about -0.0141421
    assert!((ch.gamma2 + 0.014142135623730951).abs() < 1e-15);
    let general = build_channels(&model, &caps, ChannelRecipe::General).unwrap();
    assert!((general.gamma1 - 400.0).abs() < 1e-12);
    assert!((general.gamma2 + 0.01).abs() < 1e-15);
}

#[test]
fn unitary_restriction_of_full_kind_is_exact_on_subspace() {
    // the balanced effective Hamiltonian equals the constrained H when
    // compressed to the subspace
    let caps = Caps::default();
    let model = spin_model(2, 4, Boundary::Periodic, 75.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let hn = effective_hamiltonian(&model, &basis, &caps, LiouvillianKind::Full, ChannelRecipe::FamilyDefault).unwrap();
    let compressed = blockade_core::ops::compress_to_basis(&model, &basis, &caps, &hn).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    assert!(compressed.max_diff(&h).unwrap() < 1e-10);
}

#[test]
fn pi_annihilates_embedded_states() {
    let caps = Caps::default();
    let model = spin_model(4, 3, Boundary::Periodic, 10.0); // spin-2 for variety
    let basis = enumerate_basis(&model, &caps).unwrap();
    let projectors = build_projectors(&model, &caps).unwrap();
    let mut v: Array1<C64> = Array1::zeros(basis.dim());
    for i in 0..basis.dim() {
        v[i] = C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos());
    }
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|z| z / norm);
    let full = embed_vector(&model, &basis, &caps, &v).unwrap();
    for pi in &projectors.pi {
        let out = pi.to_csr().matvec_alloc(&full);
        let max = out.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        assert!(max < 1e-14);
    }
}
