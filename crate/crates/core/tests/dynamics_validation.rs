//! Master-equation and trajectory validation at desk scale.

mod common;

use blockade_core::basis::enumerate_basis;
use blockade_core::dynamics::{
    evolve_master, evolve_unitary, propagate_drift, sample_trajectories, ChannelRequest,
    MasterOptions, TimeGrid, TrajectoryOptions, UnitaryPropagator,
};
use blockade_core::model::{Boundary, Caps};
use blockade_core::ops::{
    build_constrained_hamiltonian, build_projector_full, effective_hamiltonian, embed_vector,
    product_state, ChannelRecipe, LiouvillianKind,
};
use blockade_core::spectra::diagonalize;
use blockade_core::analysis::{fit_exponential, FitWindow};
use common::spin_model;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

fn embedded_product_state(
    model: &blockade_core::model::BondModel,
    basis: &blockade_core::basis::ConstrainedBasis,
    caps: &Caps,
    labels: &[u8],
) -> Array1<C64> {
    let v = product_state(basis, labels).unwrap();
    embed_vector(model, basis, caps, &v).unwrap()
}

fn pure_density(psi: &Array1<C64>) -> Array2<C64> {
    blockade_core::dynamics::pure_density(psi)
}

#[test]
fn full_kind_preserves_constrained_dynamics() {
    // jump-free subspace: the balanced master equation reproduces unitary
    // fidelity for a constrained start
    let caps = Caps::default();
    let model = spin_model(2, 3, Boundary::Periodic, 100.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    let psi0c = product_state(&basis, &[0, 0, 0]).unwrap();
    let psi0 = embed_vector(&model, &basis, &caps, &psi0c).unwrap();
    let grid = TimeGrid::new(4.0, 41).unwrap();
    let request = ChannelRequest {
        fidelity_ref: Some(psi0.clone()),
        leakage_op: Some(build_projector_full(&model, &caps).unwrap()),
        observables: vec![],
    };
    let (series, _) = evolve_master(
        &model,
        &basis,
        &caps,
        LiouvillianKind::Full,
        pure_density(&psi0),
        &grid,
        &request,
        &MasterOptions::default(),
    )
    .unwrap();
    let unitary = evolve_unitary(&eig, &psi0c, &grid, &[]).unwrap();
    let fid_me = &series.channel("fidelity").unwrap().values;
    let fid_un = &unitary.channel("fidelity").unwrap().values;
    for (a, b) in fid_me.iter().zip(fid_un) {
        assert!((a - b).abs() < 1e-6, "master {a} vs unitary {b}");
    }
    for &l in &series.channel("leakage").unwrap().values {
        assert!((l - 1.0).abs() < 1e-9, "leakage must stay zero: {l}");
    }
}

#[test]
fn eigenstate_density_matrix_is_stationary_under_full_kind() {
    let caps = Caps::default();
    let model = spin_model(2, 3, Boundary::Periodic, 60.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    let v = eig.vector(4).mapv(|x| C64::new(x, 0.0));
    let full = embed_vector(&model, &basis, &caps, &v).unwrap();
    let grid = TimeGrid::new(3.0, 16).unwrap();
    let request = ChannelRequest {
        fidelity_ref: Some(full.clone()),
        leakage_op: None,
        observables: vec![],
    };
    let (series, _) = evolve_master(
        &model,
        &basis,
        &caps,
        LiouvillianKind::Full,
        pure_density(&full),
        &grid,
        &request,
        &MasterOptions::default(),
    )
    .unwrap();
    for &f in &series.channel("fidelity").unwrap().values {
        assert!((f - 1.0).abs() < 1e-8, "eigenstate should be stationary: {f}");
    }
}

#[test]
fn trace_and_hermiticity_preserved_for_all_kinds() {
    let caps = Caps::default();
    let model = spin_model(2, 3, Boundary::Periodic, 50.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let psi0 = embedded_product_state(&model, &basis, &caps, &[0, 1, 1]);
    let grid = TimeGrid::new(2.0, 11).unwrap();
    for kind in [
        LiouvillianKind::Full,
        LiouvillianKind::Positive,
        LiouvillianKind::LindbladPrime,
    ] {
        let request = ChannelRequest {
            fidelity_ref: Some(psi0.clone()),
            leakage_op: Some(build_projector_full(&model, &caps).unwrap()),
            observables: vec![],
        };
        let (series, snaps) = evolve_master(
            &model,
            &basis,
            &caps,
            kind,
            pure_density(&psi0),
            &grid,
            &request,
            &MasterOptions {
                store_states: true,
                ..Default::default()
            },
        )
        .unwrap();
        // integration-level checks passed; verify the snapshots directly too
        for rho in snaps.unwrap() {
            let tr: C64 = (0..rho.nrows()).map(|i| rho[(i, i)]).sum();
            assert!((tr.re - 1.0).abs() < 1e-6);
            let mut dev: f64 = 0.0;
            for i in 0..rho.nrows() {
                for k in 0..rho.ncols() {
                    dev = dev.max((rho[(i, k)] - rho[(k, i)].conj()).norm());
                }
            }
            assert!(dev < 1e-9);
        }
        let leak = &series.channel("leakage").unwrap().values;
        assert!(leak[0] > 1.0 - 1e-9);
    }
}

#[test]
fn convergence_to_unitary_improves_with_c() {
    let caps = Caps::default();
    let base = spin_model(2, 3, Boundary::Periodic, 1.0);
    let basis = enumerate_basis(&base, &caps).unwrap();
    let h = build_constrained_hamiltonian(&base, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    let psi0c = product_state(&basis, &[0, 0, 0]).unwrap();
    let grid = TimeGrid::new(5.0, 26).unwrap();
    let unitary = evolve_unitary(&eig, &psi0c, &grid, &[]).unwrap();
    let fid_un = &unitary.channel("fidelity").unwrap().values;
    for kind in [LiouvillianKind::Positive, LiouvillianKind::LindbladPrime] {
        let mut devs = Vec::new();
        for &c in &[50.0, 200.0, 800.0] {
            let model = spin_model(2, 3, Boundary::Periodic, c);
            let psi0 = embedded_product_state(&model, &basis, &caps, &[0, 0, 0]);
            let request = ChannelRequest {
                fidelity_ref: Some(psi0.clone()),
                leakage_op: None,
                observables: vec![],
            };
            let (series, _) = evolve_master(
                &model,
                &basis,
                &caps,
                kind,
                pure_density(&psi0),
                &grid,
                &request,
                &MasterOptions::default(),
            )
            .unwrap();
            let dev = series
                .channel("fidelity")
                .unwrap()
                .values
                .iter()
                .zip(fid_un)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            devs.push(dev);
        }
        assert!(
            devs[0] > devs[1] && devs[1] > devs[2],
            "{kind:?}: deviations must decrease with c, got {devs:?}"
        );
    }
}

#[test]
fn trajectories_are_bit_reproducible() {
    let caps = Caps::default();
    let model = spin_model(2, 3, Boundary::Periodic, 30.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let psi0 = embedded_product_state(&model, &basis, &caps, &[0, 0, 0]);
    let grid = TimeGrid::new(3.0, 13).unwrap();
    let request = || ChannelRequest {
        fidelity_ref: Some(psi0.clone()),
        leakage_op: Some(build_projector_full(&model, &caps).unwrap()),
        observables: vec![],
    };
    let run = || {
        sample_trajectories(
            &model,
            &basis,
            &caps,
            LiouvillianKind::Positive,
            &psi0,
            &grid,
            8,
            1234,
            &request(),
            &TrajectoryOptions::default(),
        )
        .unwrap()
    };
    let a = run();
    let b = run();
    for (ca, cb) in a.channels.iter().zip(&b.channels) {
        assert_eq!(ca.values, cb.values, "channel {} not reproducible", ca.name);
    }
}

#[test]
fn shared_prefix_matches_naive_integration() {
    let caps = Caps::default();
    let model = spin_model(2, 3, Boundary::Periodic, 30.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let psi0 = embedded_product_state(&model, &basis, &caps, &[0, 0, 0]);
    let grid = TimeGrid::new(3.0, 13).unwrap();
    let request = || ChannelRequest {
        fidelity_ref: Some(psi0.clone()),
        leakage_op: Some(build_projector_full(&model, &caps).unwrap()),
        observables: vec![],
    };
    let run = |naive: bool| {
        sample_trajectories(
            &model,
            &basis,
            &caps,
            LiouvillianKind::Positive,
            &psi0,
            &grid,
            16,
            99,
            &request(),
            &TrajectoryOptions {
                force_naive: naive,
                ..Default::default()
            },
        )
        .unwrap()
    };
    let fast = run(false);
    let slow = run(true);
    for (ca, cb) in fast.channels.iter().zip(&slow.channels) {
        for (x, y) in ca.values.iter().zip(&cb.values) {
            assert_eq!(x, y, "channel {} differs between modes", ca.name);
        }
    }
}

#[test]
fn full_kind_rejected_for_trajectories() {
    let caps = Caps::default();
    let model = spin_model(2, 3, Boundary::Periodic, 30.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let psi0 = embedded_product_state(&model, &basis, &caps, &[0, 0, 0]);
    let grid = TimeGrid::new(1.0, 5).unwrap();
    let err = sample_trajectories(
        &model,
        &basis,
        &caps,
        LiouvillianKind::Full,
        &psi0,
        &grid,
        4,
        1,
        &ChannelRequest::default(),
        &TrajectoryOptions::default(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("unraveling"));
}

#[test]
fn trajectory_average_matches_master_equation() {
    // lindblad-prime at 4 sites: 500 trajectories against the DM integration
    let caps = Caps::default();
    let model = spin_model(2, 4, Boundary::Periodic, 40.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let psi0 = embedded_product_state(&model, &basis, &caps, &[0, 0, 0, 0]);
    let grid = TimeGrid::new(6.0, 25).unwrap();
    let p_hat = build_projector_full(&model, &caps).unwrap();
    let request = || ChannelRequest {
        fidelity_ref: Some(psi0.clone()),
        leakage_op: Some(p_hat.clone()),
        observables: vec![],
    };
    let (dm, _) = evolve_master(
        &model,
        &basis,
        &caps,
        LiouvillianKind::LindbladPrime,
        pure_density(&psi0),
        &grid,
        &request(),
        &MasterOptions {
            dt: Some(0.005),
            ..Default::default()
        },
    )
    .unwrap();
    let traj = sample_trajectories(
        &model,
        &basis,
        &caps,
        LiouvillianKind::LindbladPrime,
        &psi0,
        &grid,
        500,
        1,
        &request(),
        &TrajectoryOptions {
            dt: Some(0.005),
            ..Default::default()
        },
    )
    .unwrap();
    for name in ["fidelity", "leakage"] {
        let dm_ch = dm.channel(name).unwrap();
        let tr_ch = traj.channel(name).unwrap();
        let se = tr_ch.stderr.as_ref().unwrap();
        for i in 0..dm_ch.values.len() {
            let diff = (dm_ch.values[i] - tr_ch.values[i]).abs();
            // the empirical stderr collapses to zero while no trajectory has
            // jumped yet; the estimator still has binomial resolution 1/n
            let band = 3.0 * se[i] + 1.0 / 500.0;
            assert!(
                diff <= band,
                "{name}[{i}]: |{:.6} - {:.6}| = {diff:.2e} > {band:.2e}",
                dm_ch.values[i],
                tr_ch.values[i]
            );
        }
    }
}

#[test]
fn positive_kind_trajectories_match_master_equation() {
    // exercises post-jump continuation (jumps are not absorbing here)
    let caps = Caps::default();
    let model = spin_model(2, 3, Boundary::Periodic, 25.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let psi0 = embedded_product_state(&model, &basis, &caps, &[0, 1, 2]);
    let grid = TimeGrid::new(3.0, 13).unwrap();
    let p_hat = build_projector_full(&model, &caps).unwrap();
    let request = || ChannelRequest {
        fidelity_ref: Some(psi0.clone()),
        leakage_op: Some(p_hat.clone()),
        observables: vec![],
    };
    let (dm, _) = evolve_master(
        &model,
        &basis,
        &caps,
        LiouvillianKind::Positive,
        pure_density(&psi0),
        &grid,
        &request(),
        &MasterOptions::default(),
    )
    .unwrap();
    let traj = sample_trajectories(
        &model,
        &basis,
        &caps,
        LiouvillianKind::Positive,
        &psi0,
        &grid,
        400,
        77,
        &request(),
        &TrajectoryOptions::default(),
    )
    .unwrap();
    for name in ["fidelity", "leakage"] {
        let dm_ch = dm.channel(name).unwrap();
        let tr_ch = traj.channel(name).unwrap();
        let se = tr_ch.stderr.as_ref().unwrap();
        for i in 0..dm_ch.values.len() {
            let diff = (dm_ch.values[i] - tr_ch.values[i]).abs();
            assert!(
                diff <= 3.5 * se[i] + 1.0 / 400.0,
                "{name}[{i}]: diff {diff:.3e} vs se {:.3e}",
                se[i]
            );
        }
    }
}

#[test]
fn nojump_branch_matches_master_equation_decay() {
    // the decay-scan shortcut: fidelity of an eigenstate under the positive
    // kind from the no-jump branch vs full DM integration
    let caps = Caps::default();
    let model = spin_model(2, 4, Boundary::Periodic, 100.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    // a nondegenerate mid-spectrum state
    let idx = (0..eig.dim())
        .find(|&i| !eig.is_degenerate(i) && eig.energies[i] > 0.4 && eig.energies[i] < 2.0)
        .unwrap();
    let v = eig.vector(idx).mapv(|x| C64::new(x, 0.0));
    let full = embed_vector(&model, &basis, &caps, &v).unwrap();
    let grid = TimeGrid::new(10.0, 41).unwrap();
    let h_plus = effective_hamiltonian(
        &model,
        &basis,
        &caps,
        LiouvillianKind::Positive,
        ChannelRecipe::FamilyDefault,
    )
    .unwrap();
    let drift = propagate_drift(&h_plus, &full, &grid, 0.001).unwrap();
    let request = ChannelRequest {
        fidelity_ref: Some(full.clone()),
        leakage_op: None,
        observables: vec![],
    };
    let (dm, _) = evolve_master(
        &model,
        &basis,
        &caps,
        LiouvillianKind::Positive,
        pure_density(&full),
        &grid,
        &request,
        &MasterOptions {
            dt: Some(0.001),
            ..Default::default()
        },
    )
    .unwrap();
    let f_nj = &drift.channel("survival").unwrap().values;
    let f_dm = &dm.channel("fidelity").unwrap().values;
    // the DM fidelity exceeds the branch by the jump-return correction only
    for (a, b) in f_nj.iter().zip(f_dm) {
        assert!(b + 1e-9 >= *a);
        assert!((a - b).abs() < 5e-3, "branch {a} vs DM {b}");
    }
    // and the fitted rates agree to better than a percent of the rate
    let fit_nj = fit_exponential(&drift.times, f_nj, FitWindow::default()).unwrap();
    let fit_dm = fit_exponential(&dm.times, f_dm, FitWindow::default()).unwrap();
    let a_nj = fit_nj.coefficients[0];
    let a_dm = fit_dm.coefficients[0];
    assert!(
        (a_nj - a_dm).abs() < 0.01 * a_dm.abs().max(1e-6),
        "rates: branch {a_nj:.6e} vs DM {a_dm:.6e}"
    );
}

#[test]
fn unitary_propagator_norm_and_revival() {
    let caps = Caps::default();
    let model = spin_model(2, 5, Boundary::Periodic, 200.0);
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    let psi0 = product_state(&basis, &[0; 5]).unwrap();
    let prop = UnitaryPropagator::new(&eig, &psi0).unwrap();
    let grid = TimeGrid::new(30.0, 601).unwrap();
    let fid: Vec<f64> = grid
        .times()
        .iter()
        .map(|&t| prop.survival_amplitude(t).norm_sqr())
        .collect();
    // quasi-periodic revivals: some peak after the initial decay well above
    // the long-time mean
    let first_quarter = &fid[1..fid.len() / 4];
    let min_early = first_quarter.iter().cloned().fold(f64::INFINITY, f64::min);
    let later_max = fid[fid.len() / 8..]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mean: f64 = fid.iter().sum::<f64>() / fid.len() as f64;
    assert!(min_early < 0.5, "fidelity should decay initially");
    assert!(
        later_max > mean + 0.3,
        "revival peak {later_max:.3} should rise above the mean {mean:.3}"
    );
}
