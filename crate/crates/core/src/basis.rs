//! Enumeration of the blockade-free product basis.

use crate::error::{Error, Result};
use crate::model::{BondModel, Boundary, Caps};

/// Ordered basis of the constrained subspace.
///
/// States are site-level tuples in lexicographic order (level 0 is `m = +j`,
/// so lexicographic order means descending m at each site). `index_of` is a
/// binary search over the sorted list.
#[derive(Clone, Debug)]
pub struct ConstrainedBasis {
    pub site_dim: usize,
    pub n_sites: usize,
    states: Vec<Vec<u8>>,
}

impl ConstrainedBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &[u8] {
        &self.states[index]
    }

    pub fn index_of(&self, labels: &[u8]) -> Option<usize> {
        self.states
            .binary_search_by(|probe| probe.as_slice().cmp(labels))
            .ok()
    }

    /// Index of a state in the full product space (mixed radix, site 0 most
    /// significant). Full-space lexicographic rank coincides with this.
    pub fn full_index(&self, labels: &[u8]) -> usize {
        labels
            .iter()
            .fold(0usize, |acc, &l| acc * self.site_dim + l as usize)
    }
}

/// Enumerate every product state annihilated by all bond projectors, in
/// lexicographic order. The count is capped by `caps.max_basis_dim`.
pub fn enumerate_basis(model: &BondModel, caps: &Caps) -> Result<ConstrainedBasis> {
    let d = model.site_dim;
    let n = model.n_sites;
    let periodic = model.boundary == Boundary::Periodic && n >= 2;
    let allowed = |a: u8, b: u8| model.pair_allowed[a as usize * d + b as usize];

    let mut states: Vec<Vec<u8>> = Vec::new();
    let mut current = vec![0u8; n];
    // depth-first in label order yields lexicographic output directly
    let mut depth = 0usize;
    let mut level: Vec<u8> = vec![0; n + 1];
    loop {
        if level[depth] as usize >= d {
            if depth == 0 {
                break;
            }
            depth -= 1;
            level[depth] += 1;
            continue;
        }
        let l = level[depth];
        // bond to the previous site (for a single-site chain there are none)
        let ok_prev = depth == 0 || allowed(current[depth - 1], l);
        if !ok_prev {
            level[depth] += 1;
            continue;
        }
        current[depth] = l;
        if depth + 1 == n {
            let ok_wrap = !periodic || allowed(current[n - 1], current[0]);
            if ok_wrap {
                if states.len() >= caps.max_basis_dim {
                    return Err(Error::Capacity {
                        what: format!("constrained basis for {n} sites of dimension {d}"),
                        requested: states.len() + 1,
                        cap_name: "max_basis_dim",
                        cap: caps.max_basis_dim,
                        advice: "raise the cap or shrink the chain".into(),
                    });
                }
                states.push(current.clone());
            }
            level[depth] += 1;
        } else {
            depth += 1;
            level[depth] = 0;
        }
    }

    if states.is_empty() {
        return Err(Error::validation(
            "the blockade leaves no product state; the constrained space is empty",
        ));
    }
    Ok(ConstrainedBasis {
        site_dim: d,
        n_sites: n,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BondModel, Boundary, ModelSpec};
    use crate::spin::SpinJ;

    fn model(j2: u32, n: usize, boundary: Boundary) -> BondModel {
        let spec = ModelSpec::spin_chain(SpinJ::from_twice(j2).unwrap(), n, boundary, 200.0);
        BondModel::from_spec(&spec).unwrap()
    }

    #[test]
    fn spin1_two_sites_open_has_eight() {
        // 9 products minus the single forbidden |1,-1>
        let m = model(2, 2, Boundary::Open);
        let b = enumerate_basis(&m, &Caps::default()).unwrap();
        assert_eq!(b.dim(), 8);
        assert!(b.index_of(&[0, 2]).is_none());
        assert!(b.index_of(&[2, 0]).is_some());
    }

    #[test]
    fn spin1_three_sites_periodic_has_eighteen() {
        let m = model(2, 3, Boundary::Periodic);
        let b = enumerate_basis(&m, &Caps::default()).unwrap();
        assert_eq!(b.dim(), 18);
    }

    #[test]
    fn states_sorted_and_indexed() {
        let m = model(2, 4, Boundary::Periodic);
        let b = enumerate_basis(&m, &Caps::default()).unwrap();
        for w in b.states().windows(2) {
            assert!(w[0] < w[1], "lexicographic order violated");
        }
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
        }
    }

    #[test]
    fn cap_produces_capacity_error() {
        let m = model(2, 9, Boundary::Periodic);
        let caps = Caps {
            max_basis_dim: 100,
            ..Caps::default()
        };
        match enumerate_basis(&m, &caps) {
            Err(Error::Capacity { cap, .. }) => assert_eq!(cap, 100),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn single_site_chain_is_unconstrained() {
        let m = model(2, 1, Boundary::Open);
        let b = enumerate_basis(&m, &Caps::default()).unwrap();
        assert_eq!(b.dim(), 3);
    }
}
