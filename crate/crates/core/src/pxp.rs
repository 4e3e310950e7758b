//! Equivalence between the spin-1 blockaded chain and the PXP chain on
//! twice as many two-level sites.
//!
//! Site dictionary (levels ordered up-first on both sides):
//! `|m=1> -> |down,up>`, `|m=0> -> |down,down>`, `|m=-1> -> |up,down>`.
//! The image of the constrained spin-1 basis is exactly the no-adjacent-
//! up-up subspace of the qubit chain, and the spin-1 Hamiltonian equals
//! `1/sqrt(2)` times the PXP Hamiltonian under this dictionary.

use crate::basis::{enumerate_basis, ConstrainedBasis};
use crate::error::{Error, Result};
use crate::model::{BondModel, Caps, Family, ModelSpec};
use crate::ops::build_constrained_hamiltonian;
use crate::sparse::SparseOperator;
use crate::spin::SpinJ;

/// Qubit labels: 0 = up, 1 = down. Pairs per spin-1 level 0,1,2.
const PAIR_OF_LEVEL: [[u8; 2]; 3] = [[1, 0], [1, 1], [0, 1]];

/// The PXP model equivalent to a spin-1 blockaded chain.
pub struct PxpEquivalent {
    pub n_qubits: usize,
    pub model: BondModel,
    pub basis: ConstrainedBasis,
    pub hamiltonian: SparseOperator,
}

/// Map one constrained spin-1 state to its qubit string.
pub fn map_spin1_state(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * labels.len());
    for &l in labels {
        out.extend_from_slice(&PAIR_OF_LEVEL[l as usize]);
    }
    out
}

/// Inverse dictionary; fails on qubit strings outside the image.
pub fn unmap_spin1_state(qubits: &[u8]) -> Result<Vec<u8>> {
    if qubits.len() % 2 != 0 {
        return Err(Error::validation("qubit string must have even length"));
    }
    qubits
        .chunks(2)
        .map(|pair| {
            PAIR_OF_LEVEL
                .iter()
                .position(|p| p == pair)
                .map(|l| l as u8)
                .ok_or_else(|| Error::validation("qubit pair outside the mapping image"))
        })
        .collect()
}

/// Build the 2N-site PXP chain (as a generic bond-blockade model: Pauli-x
/// local terms, the up-up pair forbidden) with its basis and Hamiltonian.
pub fn pxp_equivalent(model: &BondModel, caps: &Caps) -> Result<PxpEquivalent> {
    if model.spec.family != Family::SpinChainBlockade || model.spec.j.twice() != 2 {
        return Err(Error::validation(
            "the PXP mapping is defined for the spin-1 chain",
        ));
    }
    let n_qubits = 2 * model.n_sites;
    let pauli_x = vec![vec![
        vec![[0.0, 0.0], [1.0, 0.0]],
        vec![[1.0, 0.0], [0.0, 0.0]],
    ]];
    // forbidden |up,up> = product pair (0,0), the first pair-basis vector
    let mut up_up = vec![[0.0, 0.0]; 4];
    up_up[0] = [1.0, 0.0];
    let spec = ModelSpec {
        family: Family::GenericBondBlockade,
        j: SpinJ::from_twice(1)?,
        n_sites: n_qubits,
        boundary: model.boundary,
        c: model.c,
        local_h: Some(pauli_x),
        bond_projector_states: Some(vec![up_up]),
    };
    let pxp_model = BondModel::from_spec(&spec)?;
    let basis = enumerate_basis(&pxp_model, caps)?;
    let hamiltonian = build_constrained_hamiltonian(&pxp_model, &basis)?;
    Ok(PxpEquivalent {
        n_qubits,
        model: pxp_model,
        basis,
        hamiltonian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Boundary;

    fn spin1_model(n: usize, boundary: Boundary) -> BondModel {
        let spec = ModelSpec::spin_chain(SpinJ::from_twice(2).unwrap(), n, boundary, 200.0);
        BondModel::from_spec(&spec).unwrap()
    }

    #[test]
    fn dictionary_round_trip() {
        for labels in [[0u8, 1, 2], [2, 1, 0], [1, 1, 1]] {
            let q = map_spin1_state(&labels);
            assert_eq!(unmap_spin1_state(&q).unwrap(), labels.to_vec());
        }
        assert!(unmap_spin1_state(&[0, 0]).is_err());
    }

    #[test]
    fn image_lands_in_pxp_basis_and_dimensions_match() {
        let caps = Caps::default();
        let model = spin1_model(3, Boundary::Periodic);
        let spin_basis = enumerate_basis(&model, &caps).unwrap();
        let pxp = pxp_equivalent(&model, &caps).unwrap();
        assert_eq!(pxp.basis.dim(), spin_basis.dim());
        for s in spin_basis.states() {
            let q = map_spin1_state(s);
            assert!(pxp.basis.index_of(&q).is_some());
        }
    }

    #[test]
    fn rejects_higher_spin() {
        let spec = ModelSpec::spin_chain(SpinJ::from_twice(3).unwrap(), 4, Boundary::Periodic, 200.0);
        let model = BondModel::from_spec(&spec).unwrap();
        assert!(pxp_equivalent(&model, &Caps::default()).is_err());
    }
}
