//! Shared oracles for the integration suites. These deliberately avoid the
//! library's enumeration and operator machinery so they can vouch for it.

#![allow(dead_code)]

use blockade_core::model::{BondModel, Boundary, ModelSpec};
use blockade_core::spin::SpinJ;

pub fn spin_model(twice_j: u32, n: usize, boundary: Boundary, c: f64) -> BondModel {
    let spec = ModelSpec::spin_chain(SpinJ::from_twice(twice_j).unwrap(), n, boundary, c);
    BondModel::from_spec(&spec).unwrap()
}

/// Count blockade-free product states by filtering the whole product space.
pub fn brute_force_dim(site_dim: usize, n_sites: usize, periodic: bool, forbidden: &[(u8, u8)]) -> usize {
    let total = site_dim.pow(n_sites as u32);
    let mut count = 0usize;
    let mut labels = vec![0u8; n_sites];
    for idx in 0..total {
        let mut rem = idx;
        for k in (0..n_sites).rev() {
            labels[k] = (rem % site_dim) as u8;
            rem /= site_dim;
        }
        let mut ok = true;
        for k in 0..n_sites.saturating_sub(1) {
            if forbidden.contains(&(labels[k], labels[k + 1])) {
                ok = false;
                break;
            }
        }
        if ok && periodic && n_sites >= 2 && forbidden.contains(&(labels[n_sites - 1], labels[0])) {
            ok = false;
        }
        if ok {
            count += 1;
        }
    }
    count
}

/// Forbidden pair list of the spin-chain blockade: (level 0, level d-1).
pub fn spin_chain_forbidden(site_dim: usize) -> Vec<(u8, u8)> {
    vec![(0, site_dim as u8 - 1)]
}

/// Transfer-matrix count of allowed label strings, in exact integer
/// arithmetic. For periodic chains this is the trace of T^N; for open
/// chains the sum of all entries of T^(N-1).
pub fn transfer_matrix_dim(
    site_dim: usize,
    n_sites: usize,
    periodic: bool,
    forbidden: &[(u8, u8)],
) -> u128 {
    let d = site_dim;
    let mut t = vec![vec![0u128; d]; d];
    for a in 0..d {
        for b in 0..d {
            t[a][b] = if forbidden.contains(&(a as u8, b as u8)) {
                0
            } else {
                1
            };
        }
    }
    let matmul = |x: &Vec<Vec<u128>>, y: &Vec<Vec<u128>>| {
        let mut out = vec![vec![0u128; d]; d];
        for i in 0..d {
            for k in 0..d {
                if x[i][k] == 0 {
                    continue;
                }
                for j in 0..d {
                    out[i][j] += x[i][k] * y[k][j];
                }
            }
        }
        out
    };
    if n_sites == 1 {
        return d as u128;
    }
    if periodic {
        let mut acc = t.clone();
        for _ in 1..n_sites {
            acc = matmul(&acc, &t);
        }
        (0..d).map(|i| acc[i][i]).sum()
    } else {
        let mut acc = t.clone();
        for _ in 2..n_sites {
            acc = matmul(&acc, &t);
        }
        acc.iter().flatten().sum()
    }
}
