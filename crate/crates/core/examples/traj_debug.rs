use blockade_core::basis::enumerate_basis;
use blockade_core::dynamics::*;
use blockade_core::model::{BondModel, Boundary, Caps, ModelSpec};
use blockade_core::ops::*;
use blockade_core::spin::SpinJ;

fn main() {
    let caps = Caps::default();
    let spec = ModelSpec::spin_chain(SpinJ::from_twice(2).unwrap(), 4, Boundary::Periodic, 40.0);
    let model = BondModel::from_spec(&spec).unwrap();
    let basis = enumerate_basis(&model, &caps).unwrap();
    let v = product_state(&basis, &[0, 0, 0, 0]).unwrap();
    let psi0 = embed_vector(&model, &basis, &caps, &v).unwrap();
    let grid = TimeGrid::new(6.0, 25).unwrap();
    // no-jump norm profile
    let h_eff = effective_hamiltonian(&model, &basis, &caps, LiouvillianKind::LindbladPrime, ChannelRecipe::FamilyDefault).unwrap();
    let drift = propagate_drift(&h_eff, &psi0, &grid, 0.005).unwrap();
    let n2 = &drift.channel("norm2").unwrap().values;
    println!("norm2 profile: t=1.25 -> {:.6}, t=6 -> {:.6}", n2[5], n2[24]);
    let p_hat = build_projector_full(&model, &caps).unwrap();
    for seed in [2024u64, 1, 2, 3] {
        let request = ChannelRequest {
            fidelity_ref: Some(psi0.clone()),
            leakage_op: Some(p_hat.clone()),
            observables: vec![],
        };
        let traj = sample_trajectories(&model, &basis, &caps, LiouvillianKind::LindbladPrime,
            &psi0, &grid, 500, seed, &request, &TrajectoryOptions { dt: Some(0.005), ..Default::default() }).unwrap();
        let leak = &traj.channel("leakage").unwrap().values;
        println!("seed {seed}: observed jumps t=1.25: {:.1}, t=6.0: {:.1}; expected {:.1} / {:.1}",
            (1.0 - leak[5]) * 500.0, (1.0 - leak[24]) * 500.0,
            (1.0 - n2[5]) * 500.0, (1.0 - n2[24]) * 500.0);
    }
}
