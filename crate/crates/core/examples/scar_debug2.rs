use blockade_core::basis::enumerate_basis;
use blockade_core::model::{BondModel, Boundary, Caps, ModelSpec};
use blockade_core::ops::*;
use blockade_core::spectra::*;
use blockade_core::spin::SpinJ;

fn main() {
    for n in [7usize, 9] {
        let caps = Caps::default();
        let spec = ModelSpec::spin_chain(SpinJ::from_twice(2).unwrap(), n, Boundary::Periodic, 200.0);
        let model = BondModel::from_spec(&spec).unwrap();
        let basis = enumerate_basis(&model, &caps).unwrap();
        let h = build_constrained_hamiltonian(&model, &basis).unwrap();
        let eig = diagonalize(&h, &caps).unwrap();
        let psi0 = product_state(&basis, &vec![0u8; n]).unwrap();
        let ov = overlaps(&eig, &psi0).unwrap();
        // group aggregation
        let groups: Vec<(f64, f64, usize)> = eig.groups.iter()
            .map(|g| (g.iter().map(|&i| ov[i]).sum::<f64>(),
                      g.iter().map(|&i| eig.energies[i]).sum::<f64>() / g.len() as f64,
                      g.len()))
            .collect();
        let floor = 1e-8;
        let mut cand: Vec<(f64,f64,usize)> = groups.iter().cloned().filter(|&(s,_,_)| s >= floor).collect();
        cand.sort_by(|a,b| b.0.partial_cmp(&a.0).unwrap());
        // radius from min spacing of top-3 loudest
        let top: Vec<f64> = cand.iter().take(3).map(|&(_,e,_)| e).collect();
        let mut minsp = f64::INFINITY;
        for i in 0..top.len() { for k in i+1..top.len() {
            let d = (top[i]-top[k]).abs();
            if d > 1e-9 && d < minsp { minsp = d; }
        }}
        let radius = 0.5 * minsp;
        println!("== N={n}: dim={}, radius={radius:.4}", eig.dim());
        let mut maxima: Vec<(f64,f64,usize)> = cand.iter().cloned().filter(|&(s,e,_)| {
            !groups.iter().any(|&(s2,e2,_)| s2 > s && (e2-e).abs() <= radius)
        }).collect();
        maxima.sort_by(|a,b| a.1.partial_cmp(&b.1).unwrap());
        println!("local maxima: {}", maxima.len());
        for &(s,e,g) in &maxima {
            println!("   E={e:8.4}  ov={s:10.3e}  gsize={g}");
        }
    }
}
