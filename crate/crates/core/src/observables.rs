//! Local observable catalog.
//!
//! Catalog codes follow the run-config schema: `O1` (population above the
//! lowest level on one site), `O2` (`s^z ⊗ s^z` on a bond), `O3` (projector
//! onto `(|j,j> - |-j,-j>)/sqrt(2)` on a bond), `hd-O1` (`s^z` at a physical
//! site of the hd-pxp chain), `hd-O2` (`s^z_k s^z_{k+2}`, physical), plus
//! custom single-site and bond matrices.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::basis::ConstrainedBasis;
use crate::error::{Error, Result};
use crate::model::{BondModel, Boundary, Caps, Family};
use crate::ops::{embed_bond_op, embed_site_op, FullSpace};
use crate::sparse::{BasisTag, SparseOperator, DROP_TOL};
use crate::spin::{spin_z, SpinJ};

#[derive(Clone, Debug)]
pub enum ObservableKind {
    /// `O1`: `I - |-j><-j|` on one site.
    UpperPopulation,
    /// `O2`: `s^z ⊗ s^z` on a bond.
    ZzBond,
    /// `O3`: projector onto `(|j,j> - |-j,-j>)/sqrt(2)` on a bond.
    ExtremalPairProjector,
    /// `hd-O1`: `s^z` at a physical site (hd-pxp family only).
    PhysicalSz,
    /// `hd-O2`: `s^z_p s^z_{p+2}` at physical sites (hd-pxp family only).
    PhysicalZzNnn,
    /// Arbitrary single-site matrix.
    CustomSite(Array2<C64>),
    /// Arbitrary two-site matrix on a bond.
    CustomBond(Array2<C64>),
}

/// Where an observable acts: a fixed (0-based) site/bond index, or averaged
/// over all translations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    Site(usize),
    Averaged,
}

#[derive(Clone, Debug)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    pub placement: Placement,
}

impl ObservableSpec {
    pub fn averaged(kind: ObservableKind) -> Self {
        ObservableSpec {
            kind,
            placement: Placement::Averaged,
        }
    }

    pub fn at(kind: ObservableKind, site: usize) -> Self {
        ObservableSpec {
            kind,
            placement: Placement::Site(site),
        }
    }
}

fn site_matrix(model: &BondModel, kind: &ObservableKind) -> Option<Array2<C64>> {
    let d = model.site_dim;
    match kind {
        ObservableKind::UpperPopulation => {
            let mut m: Array2<C64> = Array2::eye(d);
            m[(d - 1, d - 1)] = C64::new(0.0, 0.0);
            Some(m)
        }
        ObservableKind::CustomSite(m) => Some(m.clone()),
        _ => None,
    }
}

fn bond_matrix(model: &BondModel, kind: &ObservableKind) -> Option<Array2<C64>> {
    let d = model.site_dim;
    match kind {
        ObservableKind::ZzBond => {
            let sz = spin_z(model.spec.j);
            let mut m = Array2::zeros((d * d, d * d));
            for a in 0..d {
                for b in 0..d {
                    m[(a * d + b, a * d + b)] = sz[(a, a)] * sz[(b, b)];
                }
            }
            Some(m)
        }
        ObservableKind::ExtremalPairProjector => {
            let top = 0usize;
            let bot = d - 1;
            let mut v: Array1<C64> = Array1::zeros(d * d);
            v[top * d + top] = C64::new(1.0 / 2f64.sqrt(), 0.0);
            v[bot * d + bot] = C64::new(-1.0 / 2f64.sqrt(), 0.0);
            let mut m = Array2::zeros((d * d, d * d));
            for r in 0..d * d {
                for c in 0..d * d {
                    m[(r, c)] = v[r] * v[c].conj();
                }
            }
            Some(m)
        }
        ObservableKind::CustomBond(m) => Some(m.clone()),
        _ => None,
    }
}

/// m value of a physical hd-pxp site given the logical label at its pair.
fn hd_site_m(j: SpinJ, pair: (usize, usize), member: usize) -> f64 {
    let level = if member == 0 { pair.0 } else { pair.1 };
    j.m_of_level(level)
}

/// Diagonal value of a physical-site s^z observable on one logical state.
fn hd_sz_diag(model: &BondModel, labels: &[u8], physical_site: usize) -> f64 {
    let hd = model.hd.as_ref().expect("hd family");
    let logical = physical_site / 2;
    let member = physical_site % 2;
    hd_site_m(hd.physical_j, hd.kept_pairs[labels[logical] as usize], member)
}

fn physical_positions(model: &BondModel, offset: usize) -> Vec<usize> {
    let hd = model.hd.as_ref().expect("hd family");
    let n = hd.physical_sites;
    match model.boundary {
        Boundary::Periodic => (0..n).collect(),
        Boundary::Open => (0..n.saturating_sub(offset)).collect(),
    }
}

/// Build an observable in the constrained basis.
pub fn build_observable(
    model: &BondModel,
    basis: &ConstrainedBasis,
    spec: &ObservableSpec,
) -> Result<SparseOperator> {
    validate_placement(model, spec)?;
    let dim = basis.dim();
    let mut entries: Vec<(u32, u32, C64)> = Vec::new();
    match &spec.kind {
        ObservableKind::PhysicalSz => {
            let positions = placement_positions(model, spec, PlacementSpace::HdPhysical(0))?;
            let weight = 1.0 / positions.len() as f64;
            for (col, labels) in basis.states().iter().enumerate() {
                let mut v = 0.0;
                for &p in &positions {
                    v += hd_sz_diag(model, labels, p);
                }
                let v = v * if spec.placement == Placement::Averaged { weight } else { 1.0 };
                if v.abs() >= DROP_TOL {
                    entries.push((col as u32, col as u32, C64::new(v, 0.0)));
                }
            }
        }
        ObservableKind::PhysicalZzNnn => {
            let positions = placement_positions(model, spec, PlacementSpace::HdPhysical(2))?;
            let weight = 1.0 / positions.len() as f64;
            let n_phys = model.hd.as_ref().unwrap().physical_sites;
            for (col, labels) in basis.states().iter().enumerate() {
                let mut v = 0.0;
                for &p in &positions {
                    let q = (p + 2) % n_phys;
                    v += hd_sz_diag(model, labels, p) * hd_sz_diag(model, labels, q);
                }
                let v = v * if spec.placement == Placement::Averaged { weight } else { 1.0 };
                if v.abs() >= DROP_TOL {
                    entries.push((col as u32, col as u32, C64::new(v, 0.0)));
                }
            }
        }
        kind => {
            if let Some(m) = site_matrix(model, kind) {
                let positions = placement_positions(model, spec, PlacementSpace::Sites)?;
                let weight = if spec.placement == Placement::Averaged {
                    1.0 / positions.len() as f64
                } else {
                    1.0
                };
                let d = model.site_dim;
                let mut scratch = vec![0u8; model.n_sites];
                for (col, labels) in basis.states().iter().enumerate() {
                    for &site in &positions {
                        let from = labels[site] as usize;
                        for to in 0..d {
                            let amp = m[(to, from)] * weight;
                            if amp.norm() < DROP_TOL {
                                continue;
                            }
                            if to == from {
                                entries.push((col as u32, col as u32, amp));
                            } else {
                                scratch.copy_from_slice(labels);
                                scratch[site] = to as u8;
                                if let Some(row) = basis.index_of(&scratch) {
                                    entries.push((row as u32, col as u32, amp));
                                }
                            }
                        }
                    }
                }
            } else if let Some(m) = bond_matrix(model, kind) {
                let bonds = model.bonds();
                let positions = placement_positions(model, spec, PlacementSpace::Bonds)?;
                let weight = if spec.placement == Placement::Averaged {
                    1.0 / positions.len() as f64
                } else {
                    1.0
                };
                let d = model.site_dim;
                let mut scratch = vec![0u8; model.n_sites];
                for (col, labels) in basis.states().iter().enumerate() {
                    for &bk in &positions {
                        let (s1, s2) = bonds[bk];
                        let from = labels[s1] as usize * d + labels[s2] as usize;
                        for to1 in 0..d {
                            for to2 in 0..d {
                                let to = to1 * d + to2;
                                let amp = m[(to, from)] * weight;
                                if amp.norm() < DROP_TOL {
                                    continue;
                                }
                                if to == from {
                                    entries.push((col as u32, col as u32, amp));
                                } else {
                                    scratch.copy_from_slice(labels);
                                    scratch[s1] = to1 as u8;
                                    scratch[s2] = to2 as u8;
                                    if let Some(row) = basis.index_of(&scratch) {
                                        entries.push((row as u32, col as u32, amp));
                                    }
                                }
                            }
                        }
                    }
                }
            } else {
                return Err(Error::validation(
                    "observable kind not applicable to this family",
                ));
            }
        }
    }
    Ok(SparseOperator::from_entries(
        dim,
        dim,
        entries,
        BasisTag::Constrained,
        true,
    ))
}

/// Build an observable in the full product space.
pub fn build_observable_full(
    model: &BondModel,
    caps: &Caps,
    spec: &ObservableSpec,
) -> Result<SparseOperator> {
    validate_placement(model, spec)?;
    let space = FullSpace::new(model, caps)?;
    let mut acc = SparseOperator::zero(space.dim, space.dim, BasisTag::Full);
    if let Some(m) = site_matrix(model, &spec.kind) {
        let positions = placement_positions(model, spec, PlacementSpace::Sites)?;
        let weight = avg_weight(spec, positions.len());
        for &site in &positions {
            let op = embed_site_op(model, caps, &m, site)?;
            acc = acc.add(&op.scale(C64::new(weight, 0.0)))?;
        }
    } else if let Some(m) = bond_matrix(model, &spec.kind) {
        let bonds = model.bonds();
        let positions = placement_positions(model, spec, PlacementSpace::Bonds)?;
        let weight = avg_weight(spec, positions.len());
        let mut pair_entries = Vec::new();
        for ((r, c), &v) in m.indexed_iter() {
            if v.norm() >= DROP_TOL {
                pair_entries.push((r, c, v * weight));
            }
        }
        for &bk in &positions {
            let (s1, s2) = bonds[bk];
            let op = embed_bond_op(&space, &pair_entries, s1, s2);
            acc = acc.add(&op)?;
        }
    } else if matches!(
        spec.kind,
        ObservableKind::PhysicalSz | ObservableKind::PhysicalZzNnn
    ) {
        let offset = if matches!(spec.kind, ObservableKind::PhysicalSz) { 0 } else { 2 };
        let positions = placement_positions(model, spec, PlacementSpace::HdPhysical(offset))?;
        let weight = avg_weight(spec, positions.len());
        let n_phys = model.hd.as_ref().unwrap().physical_sites;
        let mut labels = vec![0u8; model.n_sites];
        let mut entries = Vec::new();
        for idx in 0..space.dim {
            space.labels(idx, &mut labels);
            let mut v = 0.0;
            for &p in &positions {
                v += match spec.kind {
                    ObservableKind::PhysicalSz => hd_sz_diag(model, &labels, p),
                    _ => {
                        hd_sz_diag(model, &labels, p)
                            * hd_sz_diag(model, &labels, (p + 2) % n_phys)
                    }
                };
            }
            if (v * weight).abs() >= DROP_TOL {
                entries.push((idx as u32, idx as u32, C64::new(v * weight, 0.0)));
            }
        }
        acc = acc.add(&SparseOperator::from_entries(
            space.dim,
            space.dim,
            entries,
            BasisTag::Full,
            true,
        ))?;
    } else {
        return Err(Error::validation(
            "observable kind not applicable to this family",
        ));
    }
    acc.hermitian = true;
    Ok(acc)
}

fn avg_weight(spec: &ObservableSpec, count: usize) -> f64 {
    if spec.placement == Placement::Averaged {
        1.0 / count as f64
    } else {
        1.0
    }
}

enum PlacementSpace {
    Sites,
    Bonds,
    HdPhysical(usize),
}

fn placement_positions(
    model: &BondModel,
    spec: &ObservableSpec,
    space: PlacementSpace,
) -> Result<Vec<usize>> {
    let all: Vec<usize> = match space {
        PlacementSpace::Sites => (0..model.n_sites).collect(),
        PlacementSpace::Bonds => (0..model.bonds().len()).collect(),
        PlacementSpace::HdPhysical(offset) => physical_positions(model, offset),
    };
    match spec.placement {
        Placement::Averaged => {
            if all.is_empty() {
                Err(Error::validation("no valid positions for this observable"))
            } else {
                Ok(all)
            }
        }
        Placement::Site(k) => {
            if all.contains(&k) {
                Ok(vec![k])
            } else {
                Err(Error::validation(format!(
                    "position {k} out of range for this observable"
                )))
            }
        }
    }
}

fn validate_placement(model: &BondModel, spec: &ObservableSpec) -> Result<()> {
    let is_hd_kind = matches!(
        spec.kind,
        ObservableKind::PhysicalSz | ObservableKind::PhysicalZzNnn
    );
    if is_hd_kind && model.spec.family != Family::HdPxp {
        return Err(Error::validation(
            "hd-* observables require the hd-pxp family",
        ));
    }
    if !is_hd_kind && model.spec.family == Family::HdPxp {
        if matches!(spec.kind, ObservableKind::CustomSite(_) | ObservableKind::CustomBond(_)) {
            // custom matrices act on logical sites; allowed but the caller
            // must supply logical-dimension matrices
        }
    }
    if let ObservableKind::CustomSite(m) = &spec.kind {
        if m.nrows() != model.site_dim || m.ncols() != model.site_dim {
            return Err(Error::validation("custom site matrix has wrong dimension"));
        }
    }
    if let ObservableKind::CustomBond(m) = &spec.kind {
        let d2 = model.site_dim * model.site_dim;
        if m.nrows() != d2 || m.ncols() != d2 {
            return Err(Error::validation("custom bond matrix has wrong dimension"));
        }
    }
    Ok(())
}
