//! Model specifications and the unified internal representation.
//!
//! Every family reduces to the same shape: a chain of `n_sites` sites of
//! dimension `site_dim`, a single-site local Hamiltonian per site, and one
//! bond projector (possibly rank > 1) repeated on every bond. The
//! high-dimensional PXP family arrives here after re-encoding physical site
//! pairs into logical sites, which eliminates the intra-pair blockade at
//! encoding time.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sparse::{BasisTag, SparseOperator, DROP_TOL};
use crate::spin::{spin_x, SpinJ};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SpinChainBlockade,
    GenericBondBlockade,
    HdPxp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    Open,
}

fn default_boundary() -> Boundary {
    Boundary::Periodic
}

fn default_c() -> f64 {
    200.0
}

/// Complex matrix in the JSON schema: rows of `[re, im]` pairs.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;
/// Complex vector in the JSON schema.
pub type JsonVector = Vec<[f64; 2]>;

/// Declarative description of a constrained model.
///
/// JSON schema: `family` (kebab-case), `j` (number or "p/q" string),
/// `n_sites`, `boundary` (default "periodic"), `c` (default 200), and for
/// the generic family `local_h` (one matrix, or one per site) plus
/// `bond_projector_states` (orthonormal vectors on the two-site product
/// space; the bond projector is the sum of their dyads).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub j: SpinJ,
    pub n_sites: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_h: Option<Vec<JsonMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bond_projector_states: Option<Vec<JsonVector>>,
}

impl ModelSpec {
    pub fn spin_chain(j: SpinJ, n_sites: usize, boundary: Boundary, c: f64) -> Self {
        ModelSpec {
            family: Family::SpinChainBlockade,
            j,
            n_sites,
            boundary,
            c,
            local_h: None,
            bond_projector_states: None,
        }
    }

    pub fn hd_pxp(j: SpinJ, n_physical_sites: usize, boundary: Boundary, c: f64) -> Self {
        ModelSpec {
            family: Family::HdPxp,
            j,
            n_sites: n_physical_sites,
            boundary,
            c,
            local_h: None,
            bond_projector_states: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::validation("n_sites must be at least 1"));
        }
        if !(self.c > 0.0) {
            return Err(Error::validation(format!(
                "dissipation parameter c must be positive, got {}",
                self.c
            )));
        }
        match self.family {
            Family::SpinChainBlockade | Family::HdPxp => {
                if self.j.twice() < 2 {
                    return Err(Error::validation(format!(
                        "family {:?} requires spin j >= 1, got j = {}",
                        self.family, self.j
                    )));
                }
                if self.local_h.is_some() || self.bond_projector_states.is_some() {
                    return Err(Error::validation(
                        "local_h / bond_projector_states are only accepted for the generic-bond-blockade family",
                    ));
                }
                if self.family == Family::HdPxp && self.n_sites % 2 != 0 {
                    return Err(Error::validation(
                        "hd-pxp requires an even number of physical sites",
                    ));
                }
            }
            Family::GenericBondBlockade => {
                let h = self
                    .local_h
                    .as_ref()
                    .ok_or_else(|| Error::validation("generic-bond-blockade requires local_h"))?;
                if h.is_empty() || (h.len() != 1 && h.len() != self.n_sites) {
                    return Err(Error::validation(
                        "local_h must contain one matrix or one matrix per site",
                    ));
                }
                let d = self.j.site_dim();
                for (k, m) in h.iter().enumerate() {
                    if m.len() != d || m.iter().any(|row| row.len() != d) {
                        return Err(Error::validation(format!(
                            "local_h[{k}] must be {d}x{d} to match j = {}",
                            self.j
                        )));
                    }
                }
                let states = self.bond_projector_states.as_ref().ok_or_else(|| {
                    Error::validation("generic-bond-blockade requires bond_projector_states")
                })?;
                if states.is_empty() {
                    return Err(Error::validation("bond_projector_states must be non-empty"));
                }
                for (k, v) in states.iter().enumerate() {
                    if v.len() != d * d {
                        return Err(Error::validation(format!(
                            "bond_projector_states[{k}] must have length {} (two-site product space)",
                            d * d
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding; keys every cache entry.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Size caps guarding dense and full-product-space work.
#[derive(Clone, Copy, Debug)]
pub struct Caps {
    /// Largest constrained basis that will be enumerated.
    pub max_basis_dim: usize,
    /// Largest dimension handed to the dense eigensolver.
    pub max_dense_dim: usize,
    /// Largest full product space in which operators are materialized.
    pub max_full_dim: usize,
    /// Largest full-space density matrix that will be integrated.
    pub max_dm_dim: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_basis_dim: 2_000_000,
            max_dense_dim: 8000,
            max_full_dim: 600_000,
            max_dm_dim: 2187,
        }
    }
}

/// Physical-pair metadata kept when an hd-pxp spec is reduced to logical sites.
#[derive(Clone, Debug)]
pub struct HdReduction {
    pub physical_j: SpinJ,
    pub physical_sites: usize,
    /// Logical level -> (first, second) physical level indices of the pair.
    pub kept_pairs: Vec<(usize, usize)>,
}

/// Unified internal form of a constrained model.
#[derive(Clone, Debug)]
pub struct BondModel {
    pub spec: ModelSpec,
    pub site_dim: usize,
    /// Model sites: physical sites for the spin chain and generic families,
    /// logical sites (pairs) for hd-pxp.
    pub n_sites: usize,
    pub boundary: Boundary,
    pub c: f64,
    /// Per-site local Hamiltonian (length `n_sites`).
    pub local_h: Vec<Array2<C64>>,
    /// Orthonormal vectors whose dyads sum to the bond projector.
    pub bond_states: Vec<Array1<C64>>,
    /// `pair_allowed[a * site_dim + b]`: the product pair (a, b) is
    /// annihilated by the bond projector.
    pub pair_allowed: Vec<bool>,
    /// The bond projector is diagonal in the product pair basis.
    pub pi_diagonal: bool,
    pub hd: Option<HdReduction>,
}

fn unit_pair_vector(d: usize, a: usize, b: usize) -> Array1<C64> {
    let mut v = Array1::zeros(d * d);
    v[a * d + b] = C64::new(1.0, 0.0);
    v
}

fn json_to_matrix(m: &JsonMatrix) -> Array2<C64> {
    let rows = m.len();
    let cols = m[0].len();
    Array2::from_shape_fn((rows, cols), |(i, j)| C64::new(m[i][j][0], m[i][j][1]))
}

fn json_to_vector(v: &JsonVector) -> Array1<C64> {
    Array1::from_iter(v.iter().map(|z| C64::new(z[0], z[1])))
}

fn matrix_to_json(m: &Array2<C64>) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn vector_to_json(v: &Array1<C64>) -> JsonVector {
    v.iter().map(|z| [z.re, z.im]).collect()
}

impl BondModel {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        match spec.family {
            Family::SpinChainBlockade => Self::build_spin_chain(spec),
            Family::GenericBondBlockade => Self::build_generic(spec),
            Family::HdPxp => Self::build_hd_pxp(spec),
        }
    }

    fn build_spin_chain(spec: &ModelSpec) -> Result<Self> {
        let d = spec.j.site_dim();
        let sx = spin_x(spec.j);
        // forbidden bond pattern |x> = |+j, -j>, i.e. levels (0, d-1)
        let bond_states = vec![unit_pair_vector(d, 0, d - 1)];
        let mut pair_allowed = vec![true; d * d];
        pair_allowed[d - 1] = false;
        Ok(BondModel {
            spec: spec.clone(),
            site_dim: d,
            n_sites: spec.n_sites,
            boundary: spec.boundary,
            c: spec.c,
            local_h: vec![sx; spec.n_sites],
            bond_states,
            pair_allowed,
            pi_diagonal: true,
            hd: None,
        })
    }

    fn build_generic(spec: &ModelSpec) -> Result<Self> {
        let d = spec.j.site_dim();
        let raw_h = spec.local_h.as_ref().unwrap();
        let mut local_h: Vec<Array2<C64>> = raw_h.iter().map(json_to_matrix).collect();
        if local_h.len() == 1 {
            local_h = vec![local_h[0].clone(); spec.n_sites];
        }
        for (k, h) in local_h.iter().enumerate() {
            let dev = hermiticity_dev_dense(h);
            if dev > 1e-10 {
                return Err(Error::validation(format!(
                    "local_h[{k}] is not Hermitian (max deviation {dev:.2e})"
                )));
            }
        }
        let bond_states: Vec<Array1<C64>> = spec
            .bond_projector_states
            .as_ref()
            .unwrap()
            .iter()
            .map(json_to_vector)
            .collect();
        // orthonormal vectors make the dyad sum an exact projector
        for (i, u) in bond_states.iter().enumerate() {
            for (k, v) in bond_states.iter().enumerate() {
                let g: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                let want = if i == k { 1.0 } else { 0.0 };
                if (g - want).norm() > 1e-10 {
                    return Err(Error::validation(format!(
                        "bond projector states {i} and {k} are not orthonormal; \
                         the dyad sum would not be a projector"
                    )));
                }
            }
        }
        let model = BondModel {
            spec: spec.clone(),
            site_dim: d,
            n_sites: spec.n_sites,
            boundary: spec.boundary,
            c: spec.c,
            local_h,
            bond_states: bond_states.clone(),
            pair_allowed: pair_allowed_from_states(d, &bond_states),
            pi_diagonal: pi_is_diagonal(d, &bond_states),
            hd: None,
        };
        model.check_adjacent_commutation()?;
        Ok(model)
    }

    /// Re-encode physical site pairs into logical sites of dimension 4j+1.
    ///
    /// Kept pair states, in lexicographic order of (first, second) level
    /// indices: |m, -j> for m = j..(-j+1), then |-j, m> for m = j..(-j+1),
    /// then |-j, -j>. Pairs with both members above -j never appear.
    fn build_hd_pxp(spec: &ModelSpec) -> Result<Self> {
        let jd = spec.j.site_dim();
        let low = jd - 1; // level index of m = -j
        let mut kept_pairs = Vec::with_capacity(2 * jd - 1);
        for a in 0..jd {
            for b in 0..jd {
                if a == low || b == low {
                    kept_pairs.push((a, b));
                }
            }
        }
        let dl = kept_pairs.len(); // 4j + 1
        debug_assert_eq!(dl, 2 * jd - 1);

        // logical local Hamiltonian: s^x ⊗ |-j><-j| + |-j><-j| ⊗ s^x
        // restricted to the kept pairs (the restriction is exact: both terms
        // preserve the kept set).
        let sx = spin_x(spec.j);
        let mut h_logical: Array2<C64> = Array2::zeros((dl, dl));
        for (r, &(a1, b1)) in kept_pairs.iter().enumerate() {
            for (col, &(a2, b2)) in kept_pairs.iter().enumerate() {
                let mut v = C64::new(0.0, 0.0);
                if b1 == low && b2 == low {
                    v += sx[(a1, a2)];
                }
                if a1 == low && a2 == low {
                    v += sx[(b1, b2)];
                }
                h_logical[(r, col)] = v;
            }
        }

        // logical bond blockade: second member of the left pair and first
        // member of the right pair both above -j
        let mut bond_states = Vec::new();
        for (la, &(_, b)) in kept_pairs.iter().enumerate() {
            if b == low {
                continue; // left logical state must have second member above -j
            }
            for (lb, &(a2, _)) in kept_pairs.iter().enumerate() {
                if a2 == low {
                    continue;
                }
                bond_states.push(unit_pair_vector(dl, la, lb));
            }
        }

        let n_logical = spec.n_sites / 2;
        Ok(BondModel {
            spec: spec.clone(),
            site_dim: dl,
            n_sites: n_logical,
            boundary: spec.boundary,
            c: spec.c,
            local_h: vec![h_logical; n_logical],
            bond_states: bond_states.clone(),
            pair_allowed: pair_allowed_from_states(dl, &bond_states),
            pi_diagonal: true,
            hd: Some(HdReduction {
                physical_j: spec.j,
                physical_sites: spec.n_sites,
                kept_pairs,
            }),
        })
    }

    /// Bonds as (site, site + 1) pairs; the last bond wraps for periodic
    /// chains. A single-site chain has no bonds.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        if self.n_sites < 2 {
            return Vec::new();
        }
        let mut out: Vec<(usize, usize)> = (0..self.n_sites - 1).map(|k| (k, k + 1)).collect();
        if self.boundary == Boundary::Periodic && self.n_sites >= 2 {
            out.push((self.n_sites - 1, 0));
        }
        out
    }

    /// Bond indices whose projector acts on `site` (at most two).
    pub fn bonds_touching(&self, site: usize) -> Vec<usize> {
        self.bonds()
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| a == site || b == site)
            .map(|(k, _)| k)
            .collect()
    }

    /// The bond projector as a dense matrix on the two-site product space.
    pub fn bond_projector_dense(&self) -> Array2<C64> {
        let d2 = self.site_dim * self.site_dim;
        let mut out = Array2::zeros((d2, d2));
        for v in &self.bond_states {
            for r in 0..d2 {
                if v[r].norm() < DROP_TOL {
                    continue;
                }
                for c in 0..d2 {
                    out[(r, c)] += v[r] * v[c].conj();
                }
            }
        }
        out
    }

    pub fn is_spin_chain(&self) -> bool {
        self.spec.family == Family::SpinChainBlockade
    }

    /// Adjacent bond projectors must commute; checked on the three-site space.
    fn check_adjacent_commutation(&self) -> Result<()> {
        if self.n_sites < 3 {
            return Ok(());
        }
        let d = self.site_dim;
        let pi = SparseOperator::from_dense(self.bond_projector_dense().view(), BasisTag::Full, true);
        let id = SparseOperator::identity(d, BasisTag::Full);
        let left = kron_sparse(&pi, &id); // π ⊗ I on sites (0,1,2)
        let right = kron_sparse(&id, &pi); // I ⊗ π
        let ab = left.matmul(&right)?;
        let ba = right.matmul(&left)?;
        let dev = ab.max_diff(&ba)?;
        if dev > 1e-12 {
            return Err(Error::validation(format!(
                "adjacent bond projectors do not commute (max deviation {dev:.2e})"
            )));
        }
        Ok(())
    }

    /// Human-readable label for one site level.
    pub fn level_name(&self, level: usize) -> String {
        if let Some(hd) = &self.hd {
            let (a, b) = hd.kept_pairs[level];
            let low = hd.physical_j.site_dim() - 1;
            if a == low && b == low {
                "c".to_string()
            } else if a == low {
                format!("a[{}]", fmt_m(hd.physical_j, b))
            } else {
                format!("b[{}]", fmt_m(hd.physical_j, a))
            }
        } else {
            fmt_m(self.spec.j, level)
        }
    }

    pub fn state_string(&self, labels: &[u8]) -> String {
        labels
            .iter()
            .map(|&l| self.level_name(l as usize))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Materialize the logical model as a standalone generic-family spec.
    /// Only meaningful for hd-pxp inputs.
    pub fn to_generic_spec(&self) -> Result<ModelSpec> {
        if self.hd.is_none() {
            return Err(Error::validation(
                "to_generic_spec applies to hd-pxp models only",
            ));
        }
        let twice = (self.site_dim - 1) as u32; // site_dim = 2*(2j)+1
        Ok(ModelSpec {
            family: Family::GenericBondBlockade,
            j: SpinJ::from_twice(twice)?,
            n_sites: self.n_sites,
            boundary: self.boundary,
            c: self.c,
            local_h: Some(vec![matrix_to_json(&self.local_h[0])]),
            bond_projector_states: Some(self.bond_states.iter().map(vector_to_json).collect()),
        })
    }
}

fn fmt_m(j: SpinJ, level: usize) -> String {
    let twice_m = j.twice() as i64 - 2 * level as i64;
    if twice_m % 2 == 0 {
        format!("{}", twice_m / 2)
    } else {
        format!("{}/2", twice_m)
    }
}

fn hermiticity_dev_dense(m: &Array2<C64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for k in 0..m.ncols() {
            dev = dev.max((m[(i, k)] - m[(k, i)].conj()).norm());
        }
    }
    dev
}

fn pair_allowed_from_states(d: usize, states: &[Array1<C64>]) -> Vec<bool> {
    (0..d * d)
        .map(|p| states.iter().all(|v| v[p].norm_sqr() < DROP_TOL * DROP_TOL))
        .collect()
}

fn pi_is_diagonal(d: usize, states: &[Array1<C64>]) -> bool {
    // diagonal with 0/1 entries iff every state is a product basis vector
    states.iter().all(|v| {
        let mut support = 0usize;
        let mut unit = true;
        for z in v.iter() {
            if z.norm() >= DROP_TOL {
                support += 1;
                unit &= (z.norm() - 1.0).abs() < 1e-12;
            }
        }
        support == 1 && unit && d > 0
    })
}

/// Kronecker product of two square sparse matrices.
pub fn kron_sparse(a: &SparseOperator, b: &SparseOperator) -> SparseOperator {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut entries = Vec::with_capacity(a.nnz() * b.nnz());
    for &(ra, ca, va) in a.entries() {
        for &(rb, cb, vb) in b.entries() {
            entries.push((
                ra * nb as u32 + rb,
                ca * nb as u32 + cb,
                va * vb,
            ));
        }
    }
    SparseOperator::from_entries(
        na * nb,
        a.ncols() * b.ncols(),
        entries,
        BasisTag::Full,
        a.hermitian && b.hermitian,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_spin1(n: usize) -> ModelSpec {
        ModelSpec::spin_chain(SpinJ::from_twice(2).unwrap(), n, Boundary::Periodic, 200.0)
    }

    #[test]
    fn spin_chain_pair_table() {
        let m = BondModel::from_spec(&spec_spin1(4)).unwrap();
        assert_eq!(m.site_dim, 3);
        // only (m=+1, m=-1) = levels (0, 2) is forbidden
        let forbidden: Vec<usize> = (0..9).filter(|&p| !m.pair_allowed[p]).collect();
        assert_eq!(forbidden, vec![2]);
    }

    #[test]
    fn spin_chain_requires_j_at_least_one() {
        let spec = ModelSpec::spin_chain(SpinJ::from_twice(1).unwrap(), 4, Boundary::Periodic, 1.0);
        assert!(matches!(
            BondModel::from_spec(&spec),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn c_must_be_positive() {
        let spec = ModelSpec::spin_chain(SpinJ::from_twice(2).unwrap(), 4, Boundary::Periodic, 0.0);
        assert!(BondModel::from_spec(&spec).is_err());
    }

    #[test]
    fn hd_requires_even_sites() {
        let spec = ModelSpec::hd_pxp(SpinJ::from_twice(2).unwrap(), 5, Boundary::Periodic, 100.0);
        assert!(BondModel::from_spec(&spec).is_err());
    }

    #[test]
    fn hd_logical_dimension_is_4j_plus_1() {
        let spec = ModelSpec::hd_pxp(SpinJ::from_twice(2).unwrap(), 12, Boundary::Periodic, 100.0);
        let m = BondModel::from_spec(&spec).unwrap();
        assert_eq!(m.site_dim, 5);
        assert_eq!(m.n_sites, 6);
        let h = &m.local_h[0];
        assert!(hermiticity_dev_dense(h) < 1e-14);
    }

    #[test]
    fn bonds_wrap_only_for_periodic() {
        let mut spec = spec_spin1(5);
        let m = BondModel::from_spec(&spec).unwrap();
        assert_eq!(m.bonds().len(), 5);
        spec.boundary = Boundary::Open;
        let m = BondModel::from_spec(&spec).unwrap();
        assert_eq!(m.bonds().len(), 4);
    }

    #[test]
    fn spec_hash_covers_fields() {
        let a = spec_spin1(5);
        let mut b = spec_spin1(5);
        assert_eq!(a.hash(), b.hash());
        b.c = 201.0;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"family":"spin-chain-blockade","j":"3/2","n_sites":7,"c":400.0}"#;
        let spec: ModelSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.j.twice(), 3);
        assert_eq!(spec.boundary, Boundary::Periodic);
        let again: ModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again.hash(), spec.hash());
    }

    #[test]
    fn generic_rejects_non_orthonormal_states() {
        let d = 2usize;
        let spec = ModelSpec {
            family: Family::GenericBondBlockade,
            j: SpinJ::from_twice(1).unwrap(),
            n_sites: 4,
            boundary: Boundary::Periodic,
            c: 10.0,
            local_h: Some(vec![vec![
                vec![[0.0, 0.0], [1.0, 0.0]],
                vec![[1.0, 0.0], [0.0, 0.0]],
            ]]),
            bond_projector_states: Some(vec![
                vec![[1.0, 0.0]; d * d], // not normalized
            ]),
        };
        assert!(BondModel::from_spec(&spec).is_err());
    }
}
