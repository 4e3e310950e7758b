use blockade_core::basis::enumerate_basis;
use blockade_core::model::{Boundary, Caps, ModelSpec};
use blockade_core::observables::*;
use blockade_core::ops::*;
use blockade_core::spectra::*;
use blockade_core::spin::SpinJ;
use blockade_core::model::BondModel;

fn main() {
    let caps = Caps::default();
    let spec = ModelSpec::spin_chain(SpinJ::from_twice(2).unwrap(), 7, Boundary::Periodic, 200.0);
    let model = BondModel::from_spec(&spec).unwrap();
    let basis = enumerate_basis(&model, &caps).unwrap();
    let h = build_constrained_hamiltonian(&model, &basis).unwrap();
    let eig = diagonalize(&h, &caps).unwrap();
    let psi0 = product_state(&basis, &[0; 7]).unwrap();
    let ov = overlaps(&eig, &psi0).unwrap();
    // group-aggregated profile sorted desc
    let mut sums: Vec<(usize, f64, f64, usize)> = eig
        .groups
        .iter()
        .enumerate()
        .map(|(gi, g)| (gi, g.iter().map(|&i| ov[i]).sum::<f64>(), eig.energies[g[0]], g.len()))
        .collect();
    sums.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!("top 30 groups (group, sum_overlap, E, size):");
    for row in sums.iter().take(30) {
        println!("  g{:3}  ov={:10.3e}  E={:8.4}  size={}", row.0, row.1, row.2, row.3);
    }
    println!("...");
    for row in sums.iter().skip(30).take(10) {
        println!("  g{:3}  ov={:10.3e}  E={:8.4}  size={}", row.0, row.1, row.2, row.3);
    }
    let tagged = tag_scars(&eig, &ov, &ScarPolicy::default()).unwrap();
    println!("tagged {} states: {:?}", tagged.len(), tagged);
    for &i in &tagged {
        println!("  idx {:3}  E={:8.4}  ov={:9.3e} deg={}", i, eig.energies[i], ov[i], eig.is_degenerate(i));
    }
    let n_op = quasiparticle_counter_constrained(&model, &basis, &caps, ChannelRecipe::FamilyDefault).unwrap();
    let n_vals = eigen_expectation(&eig, &n_op, DegeneracyPolicy::GroupAverage).unwrap();
    let o2 = build_observable(&model, &basis, &ObservableSpec::averaged(ObservableKind::ZzBond)).unwrap();
    let o2_vals = eigen_expectation(&eig, &o2, DegeneracyPolicy::GroupAverage).unwrap();
    println!("\nfull profile (i, E, ov, N, O2):");
    for i in 0..eig.dim() {
        if ov[i] > 1e-4 {
            println!("  {:3} E={:8.4} ov={:9.3e} N={:6.3} O2={:6.3}", i, eig.energies[i], ov[i], n_vals[i], o2_vals[i]);
        }
    }
}
