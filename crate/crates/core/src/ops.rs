//! Operator builders: constrained Hamiltonians, blockade projectors,
//! engineered dissipation channels, effective (non-Hermitian) Hamiltonians,
//! and the quasi-particle counter.
//!
//! Constrained-basis operators are compressions `P O P` restricted to the
//! enumerated subspace. Full-space operators live in the `d^N` product space
//! and are only built when a workflow genuinely needs them (projector
//! identities, leakage, master equations).

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::basis::ConstrainedBasis;
use crate::error::{Error, Result};
use crate::model::{BondModel, Caps, Family};
use crate::sparse::{BasisTag, SparseOperator, DROP_TOL};

/// Mixed-radix addressing for the full product space (site 0 most
/// significant, matching lexicographic order).
#[derive(Clone, Debug)]
pub struct FullSpace {
    pub site_dim: usize,
    pub n_sites: usize,
    pub dim: usize,
    weights: Vec<usize>,
}

impl FullSpace {
    pub fn new(model: &BondModel, caps: &Caps) -> Result<Self> {
        let mut dim: usize = 1;
        for _ in 0..model.n_sites {
            dim = dim.checked_mul(model.site_dim).unwrap_or(usize::MAX);
            if dim > caps.max_full_dim {
                return Err(Error::Capacity {
                    what: format!(
                        "full product space {}^{}",
                        model.site_dim, model.n_sites
                    ),
                    requested: dim,
                    cap_name: "max_full_dim",
                    cap: caps.max_full_dim,
                    advice: "work in the constrained basis or raise the cap".into(),
                });
            }
        }
        let mut weights = vec![1usize; model.n_sites];
        for k in (0..model.n_sites.saturating_sub(1)).rev() {
            weights[k] = weights[k + 1] * model.site_dim;
        }
        Ok(FullSpace {
            site_dim: model.site_dim,
            n_sites: model.n_sites,
            dim,
            weights,
        })
    }

    pub fn index(&self, labels: &[u8]) -> usize {
        labels
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| l as usize * w)
            .sum()
    }

    pub fn labels(&self, mut index: usize, out: &mut [u8]) {
        for k in (0..self.n_sites).rev() {
            out[k] = (index % self.site_dim) as u8;
            index /= self.site_dim;
        }
    }

    pub fn site_label(&self, index: usize, site: usize) -> u8 {
        ((index / self.weights[site]) % self.site_dim) as u8
    }
}

/// The constrained Hamiltonian: compression of the unconstrained sum of
/// local terms onto the blockade-free subspace.
pub fn build_constrained_hamiltonian(
    model: &BondModel,
    basis: &ConstrainedBasis,
) -> Result<SparseOperator> {
    if basis.site_dim != model.site_dim || basis.n_sites != model.n_sites {
        return Err(Error::consistency(
            "basis does not match the model it is used with",
        ));
    }
    let d = model.site_dim;
    let dim = basis.dim();
    let mut entries: Vec<(u32, u32, C64)> = Vec::new();
    let mut scratch = vec![0u8; model.n_sites];
    for (col, labels) in basis.states().iter().enumerate() {
        for site in 0..model.n_sites {
            let h = &model.local_h[site];
            let from = labels[site] as usize;
            for to in 0..d {
                let amp = h[(to, from)];
                if amp.norm() < DROP_TOL {
                    continue;
                }
                if to == from {
                    entries.push((col as u32, col as u32, amp));
                    continue;
                }
                scratch.copy_from_slice(labels);
                scratch[site] = to as u8;
                if let Some(row) = basis.index_of(&scratch) {
                    entries.push((row as u32, col as u32, amp));
                }
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

/// Unconstrained Hamiltonian (sum of local terms) in the full space.
pub fn build_h0_full(model: &BondModel, caps: &Caps) -> Result<SparseOperator> {
    let space = FullSpace::new(model, caps)?;
    let d = model.site_dim;
    let mut entries = Vec::new();
    for site in 0..model.n_sites {
        let h = &model.local_h[site];
        let w = space.weights[site];
        for from in 0..d {
            for to in 0..d {
                let amp = h[(to, from)];
                if amp.norm() < DROP_TOL {
                    continue;
                }
                push_site_entries(&space, w, from, to, amp, &mut entries);
            }
        }
    }
    Ok(SparseOperator::from_entries(
        space.dim,
        space.dim,
        entries,
        BasisTag::Full,
        true,
    ))
}

/// All full-space indices whose label at `site` equals `from`, paired with
/// the index where that label is replaced by `to`.
fn push_site_entries(
    space: &FullSpace,
    w: usize,
    from: usize,
    to: usize,
    amp: C64,
    entries: &mut Vec<(u32, u32, C64)>,
) {
    let d = space.site_dim;
    let block = w * d;
    let n_blocks = space.dim / block;
    for blk in 0..n_blocks {
        let base = blk * block;
        for rest in 0..w {
            let col = base + from * w + rest;
            let row = base + to * w + rest;
            entries.push((row as u32, col as u32, amp));
        }
    }
}

/// Embed a two-site operator given by entries on the pair space into the
/// full space at bond (s1, s2).
pub fn embed_bond_op(
    space: &FullSpace,
    pair_entries: &[(usize, usize, C64)],
    s1: usize,
    s2: usize,
) -> SparseOperator {
    let d = space.site_dim;
    let w1 = space.weights[s1];
    let w2 = space.weights[s2];
    let mut entries = Vec::new();
    // iterate the complement by walking all indices with both sites at 0
    let mut rest_indices: Vec<usize> = Vec::with_capacity(space.dim / (d * d));
    let mut labels = vec![0u8; space.n_sites];
    for idx in 0..space.dim {
        space.labels(idx, &mut labels);
        if labels[s1] == 0 && labels[s2] == 0 {
            rest_indices.push(idx);
        }
    }
    for &(pr, pc, v) in pair_entries {
        let (r1, r2) = (pr / d, pr % d);
        let (c1, c2) = (pc / d, pc % d);
        for &base in &rest_indices {
            let row = base + r1 * w1 + r2 * w2;
            let col = base + c1 * w1 + c2 * w2;
            entries.push((row as u32, col as u32, v));
        }
    }
    SparseOperator::from_entries(space.dim, space.dim, entries, BasisTag::Full, false)
}

fn dense_to_pair_entries(m: &Array2<C64>) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for ((r, c), &v) in m.indexed_iter() {
        if v.norm() >= DROP_TOL {
            out.push((r, c, v));
        }
    }
    out
}

/// Blockade projector on one bond, embedded in the full space.
pub fn build_pi_full(model: &BondModel, caps: &Caps, bond: usize) -> Result<SparseOperator> {
    let space = FullSpace::new(model, caps)?;
    let bonds = model.bonds();
    let &(s1, s2) = bonds
        .get(bond)
        .ok_or_else(|| Error::validation(format!("bond index {bond} out of range")))?;
    let pair = model.bond_projector_dense();
    let mut op = embed_bond_op(&space, &dense_to_pair_entries(&pair), s1, s2);
    op.hermitian = true;
    Ok(op)
}

/// Projector onto the constrained subspace, `prod_k (I - pi_k)`.
pub fn build_projector_full(model: &BondModel, caps: &Caps) -> Result<SparseOperator> {
    let space = FullSpace::new(model, caps)?;
    if model.pi_diagonal {
        let d = model.site_dim;
        let bonds = model.bonds();
        let mut labels = vec![0u8; model.n_sites];
        let mut entries = Vec::new();
        for idx in 0..space.dim {
            space.labels(idx, &mut labels);
            let ok = bonds
                .iter()
                .all(|&(a, b)| model.pair_allowed[labels[a] as usize * d + labels[b] as usize]);
            if ok {
                entries.push((idx as u32, idx as u32, C64::new(1.0, 0.0)));
            }
        }
        return Ok(SparseOperator::from_entries(
            space.dim,
            space.dim,
            entries,
            BasisTag::Full,
            true,
        ));
    }
    // generic, possibly entangled bond states: multiply the factors out
    let mut acc = SparseOperator::identity(space.dim, BasisTag::Full);
    for k in 0..model.bonds().len() {
        let pi = build_pi_full(model, caps, k)?;
        let factor = SparseOperator::identity(space.dim, BasisTag::Full)
            .add(&pi.scale(C64::new(-1.0, 0.0)))?;
        acc = acc.matmul(&factor)?;
    }
    acc.hermitian = true;
    Ok(acc)
}

/// The local blockade felt by one site: `I - prod (I - pi)` over the bonds
/// touching that site.
pub fn build_cap_pi_full(model: &BondModel, caps: &Caps, site: usize) -> Result<SparseOperator> {
    let space = FullSpace::new(model, caps)?;
    let touching = model.bonds_touching(site);
    let id = SparseOperator::identity(space.dim, BasisTag::Full);
    let mut acc = id.clone();
    for &b in &touching {
        let pi = build_pi_full(model, caps, b)?;
        let factor = id.add(&pi.scale(C64::new(-1.0, 0.0)))?;
        acc = acc.matmul(&factor)?;
    }
    let mut out = id.add(&acc.scale(C64::new(-1.0, 0.0)))?;
    out.hermitian = true;
    Ok(out)
}

/// Bundle returned by [`build_projectors`].
pub struct Projectors {
    pub p_hat: SparseOperator,
    pub pi: Vec<SparseOperator>,
    pub cap_pi: Vec<SparseOperator>,
}

pub fn build_projectors(model: &BondModel, caps: &Caps) -> Result<Projectors> {
    let p_hat = build_projector_full(model, caps)?;
    let pi = (0..model.bonds().len())
        .map(|k| build_pi_full(model, caps, k))
        .collect::<Result<Vec<_>>>()?;
    let cap_pi = (0..model.n_sites)
        .map(|k| build_cap_pi_full(model, caps, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(Projectors { p_hat, pi, cap_pi })
}

/// How the dissipation channels are assembled.
///
/// `FamilyDefault` uses the bond-local construction for the spin chain
/// (jump operators supported on two adjacent sites) and the general
/// per-site construction for everything else. `General` forces the per-site
/// construction `L1 = Pi_k - (i/c) Pi_k h_k`, `L2 = Pi_k h_k` for any
/// family. The two recipes agree inside the constrained subspace but are
/// distinct operators elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelRecipe {
    FamilyDefault,
    General,
}

/// Engineered dissipation channels. `gamma1 > 0` confines, `gamma2 < 0`
/// compensates; their jump terms cancel on the constrained subspace.
pub struct ChannelSet {
    pub gamma1: f64,
    pub ops1: Vec<SparseOperator>,
    pub gamma2: f64,
    pub ops2: Vec<SparseOperator>,
}

/// Bond transition operators `M_k = |x><y|` of the spin-chain family:
/// `|x>` the forbidden pattern, `|y>` its symmetric precursor.
pub fn build_bond_jump_ops(model: &BondModel, caps: &Caps) -> Result<Vec<SparseOperator>> {
    if model.spec.family != Family::SpinChainBlockade {
        return Err(Error::validation(
            "bond transition operators are defined for the spin-chain family",
        ));
    }
    let space = FullSpace::new(model, caps)?;
    let d = model.site_dim;
    let inv_sqrt2 = C64::new(1.0 / 2f64.sqrt(), 0.0);
    let x = d - 1; // pair (0, d-1) = |+j, -j>
    let y1 = d - 2; // pair (0, d-2) = |+j, -j+1>
    let y2 = 2 * d - 1; // pair (1, d-1) = |j-1, -j>
    let pair_entries = vec![(x, y1, inv_sqrt2), (x, y2, inv_sqrt2)];
    Ok(model
        .bonds()
        .iter()
        .map(|&(s1, s2)| embed_bond_op(&space, &pair_entries, s1, s2))
        .collect())
}

pub fn build_channels(
    model: &BondModel,
    caps: &Caps,
    recipe: ChannelRecipe,
) -> Result<ChannelSet> {
    let bond_local =
        recipe == ChannelRecipe::FamilyDefault && model.spec.family == Family::SpinChainBlockade;
    if bond_local {
        let c = model.c;
        let j = model.spec.j.value();
        let sqrt_2j = (2.0 * j).sqrt();
        let m_ops = build_bond_jump_ops(model, caps)?;
        let mut ops1 = Vec::with_capacity(m_ops.len());
        for (k, m) in m_ops.iter().enumerate() {
            let pi = build_pi_full(model, caps, k)?;
            let l1 = pi.add(&m.scale(C64::new(0.0, -2f64.sqrt() / c)))?;
            ops1.push(l1);
        }
        Ok(ChannelSet {
            gamma1: c * sqrt_2j,
            ops1,
            gamma2: -2.0 * sqrt_2j / c,
            ops2: m_ops,
        })
    } else {
        let c = model.c;
        let space = FullSpace::new(model, caps)?;
        let mut ops1 = Vec::with_capacity(model.n_sites);
        let mut ops2 = Vec::with_capacity(model.n_sites);
        for site in 0..model.n_sites {
            let cap_pi = build_cap_pi_full(model, caps, site)?;
            let h_site = embed_site_op(model, caps, &model.local_h[site], site)?;
            let pih = cap_pi.matmul(&h_site)?;
            let l1 = cap_pi.add(&pih.scale(C64::new(0.0, -1.0 / c)))?;
            ops1.push(l1);
            ops2.push(pih);
            debug_assert_eq!(h_site.nrows(), space.dim);
        }
        Ok(ChannelSet {
            gamma1: 2.0 * c,
            ops1,
            gamma2: -2.0 / c,
            ops2,
        })
    }
}

/// Single-site operator embedded in the full space.
pub fn embed_site_op(
    model: &BondModel,
    caps: &Caps,
    op: &Array2<C64>,
    site: usize,
) -> Result<SparseOperator> {
    let space = FullSpace::new(model, caps)?;
    if site >= model.n_sites {
        return Err(Error::validation(format!("site {site} out of range")));
    }
    let d = model.site_dim;
    let w = space.weights[site];
    let mut entries = Vec::new();
    for from in 0..d {
        for to in 0..d {
            let amp = op[(to, from)];
            if amp.norm() >= DROP_TOL {
                push_site_entries(&space, w, from, to, amp, &mut entries);
            }
        }
    }
    Ok(SparseOperator::from_entries(
        space.dim,
        space.dim,
        entries,
        BasisTag::Full,
        false,
    ))
}

/// Liouvillian flavors.
///
/// `Full` carries both engineered channels (one rate negative) and leaves
/// the constrained subspace jump-free. `Positive` keeps only the confining
/// channel. `LindbladPrime` pairs the doubly projected Hamiltonian with the
/// weak leakage channel at rate `-gamma2 > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiouvillianKind {
    Full,
    Positive,
    LindbladPrime,
}

/// Effective (generally non-Hermitian) Hamiltonian of a Liouvillian kind,
/// assembled from the channels as `base - (i/2) sum gamma L†L`.
pub fn effective_hamiltonian(
    model: &BondModel,
    basis: &ConstrainedBasis,
    caps: &Caps,
    kind: LiouvillianKind,
    recipe: ChannelRecipe,
) -> Result<SparseOperator> {
    let channels = build_channels(model, caps, recipe)?;
    let base = match kind {
        LiouvillianKind::Full | LiouvillianKind::Positive => build_h0_full(model, caps)?,
        LiouvillianKind::LindbladPrime => {
            let hc = build_constrained_hamiltonian(model, basis)?;
            embed_constrained_op(model, basis, caps, &hc)?
        }
    };
    let mut acc = base;
    let add_channel = |rate: f64, ops: &[SparseOperator], acc: &mut SparseOperator| -> Result<()> {
        for l in ops {
            let ldl = l.adjoint().matmul(l)?;
            *acc = acc.add(&ldl.scale(C64::new(0.0, -0.5 * rate)))?;
        }
        Ok(())
    };
    match kind {
        LiouvillianKind::Full => {
            add_channel(channels.gamma1, &channels.ops1, &mut acc)?;
            add_channel(channels.gamma2, &channels.ops2, &mut acc)?;
        }
        LiouvillianKind::Positive => {
            add_channel(channels.gamma1, &channels.ops1, &mut acc)?;
        }
        LiouvillianKind::LindbladPrime => {
            add_channel(-channels.gamma2, &channels.ops2, &mut acc)?;
        }
    }
    acc.hermitian = false;
    Ok(acc)
}

/// Jump channels `(rate, L)` actually used by a Liouvillian kind.
pub fn jump_channels(
    model: &BondModel,
    caps: &Caps,
    kind: LiouvillianKind,
    recipe: ChannelRecipe,
) -> Result<Vec<(f64, SparseOperator)>> {
    let ch = build_channels(model, caps, recipe)?;
    let mut out = Vec::new();
    match kind {
        LiouvillianKind::Full => {
            out.extend(ch.ops1.into_iter().map(|l| (ch.gamma1, l)));
            out.extend(ch.ops2.into_iter().map(|l| (ch.gamma2, l)));
        }
        LiouvillianKind::Positive => {
            out.extend(ch.ops1.into_iter().map(|l| (ch.gamma1, l)));
        }
        LiouvillianKind::LindbladPrime => {
            out.extend(ch.ops2.into_iter().map(|l| (-ch.gamma2, l)));
        }
    }
    Ok(out)
}

/// Quasi-particle counter `sum_k L2† L2` in the full space.
pub fn quasiparticle_counter_full(
    model: &BondModel,
    caps: &Caps,
    recipe: ChannelRecipe,
) -> Result<SparseOperator> {
    let ch = build_channels(model, caps, recipe)?;
    let dim = ch.ops2[0].nrows();
    let mut acc = SparseOperator::zero(dim, dim, BasisTag::Full);
    for l in &ch.ops2 {
        acc = acc.add(&l.adjoint().matmul(l)?)?;
    }
    acc.hermitian = true;
    Ok(acc)
}

/// Quasi-particle counter compressed to the constrained basis.
pub fn quasiparticle_counter_constrained(
    model: &BondModel,
    basis: &ConstrainedBasis,
    caps: &Caps,
    recipe: ChannelRecipe,
) -> Result<SparseOperator> {
    let full = quasiparticle_counter_full(model, caps, recipe)?;
    compress_to_basis(model, basis, caps, &full)
}

/// Compress a full-space operator to the constrained basis (`P O P`
/// restricted): entries whose row and column labels are both blockade-free.
pub fn compress_to_basis(
    model: &BondModel,
    basis: &ConstrainedBasis,
    caps: &Caps,
    op: &SparseOperator,
) -> Result<SparseOperator> {
    if op.basis != BasisTag::Full {
        return Err(Error::consistency("compress expects a full-space operator"));
    }
    let space = FullSpace::new(model, caps)?;
    if op.nrows() != space.dim {
        return Err(Error::consistency("operator dimension mismatch"));
    }
    let mut row_labels = vec![0u8; model.n_sites];
    let mut col_labels = vec![0u8; model.n_sites];
    let mut entries = Vec::new();
    for &(r, c, v) in op.entries() {
        space.labels(r as usize, &mut row_labels);
        space.labels(c as usize, &mut col_labels);
        if let (Some(ri), Some(ci)) = (basis.index_of(&row_labels), basis.index_of(&col_labels)) {
            entries.push((ri as u32, ci as u32, v));
        }
    }
    Ok(SparseOperator::from_entries(
        basis.dim(),
        basis.dim(),
        entries,
        BasisTag::Constrained,
        op.hermitian,
    ))
}

/// Embed a constrained-basis operator into the full space (zero outside).
pub fn embed_constrained_op(
    model: &BondModel,
    basis: &ConstrainedBasis,
    caps: &Caps,
    op: &SparseOperator,
) -> Result<SparseOperator> {
    if op.basis != BasisTag::Constrained || op.nrows() != basis.dim() {
        return Err(Error::consistency("embed expects a constrained-basis operator"));
    }
    let space = FullSpace::new(model, caps)?;
    let full_of: Vec<u32> = basis
        .states()
        .iter()
        .map(|s| space.index(s) as u32)
        .collect();
    let entries = op
        .entries()
        .iter()
        .map(|&(r, c, v)| (full_of[r as usize], full_of[c as usize], v))
        .collect();
    Ok(SparseOperator::from_entries(
        space.dim,
        space.dim,
        entries,
        BasisTag::Full,
        op.hermitian,
    ))
}

/// Embed a constrained vector into the full space.
pub fn embed_vector(
    model: &BondModel,
    basis: &ConstrainedBasis,
    caps: &Caps,
    v: &Array1<C64>,
) -> Result<Array1<C64>> {
    if v.len() != basis.dim() {
        return Err(Error::consistency("vector length does not match basis"));
    }
    let space = FullSpace::new(model, caps)?;
    let mut out = Array1::zeros(space.dim);
    for (i, s) in basis.states().iter().enumerate() {
        out[space.index(s)] = v[i];
    }
    Ok(out)
}

/// Project a full vector onto the constrained basis, returning the
/// constrained coordinates and the squared norm left outside.
pub fn project_vector(
    model: &BondModel,
    basis: &ConstrainedBasis,
    caps: &Caps,
    v: &Array1<C64>,
) -> Result<(Array1<C64>, f64)> {
    let space = FullSpace::new(model, caps)?;
    if v.len() != space.dim {
        return Err(Error::consistency("vector length does not match full space"));
    }
    let mut out = Array1::zeros(basis.dim());
    let mut kept = 0.0;
    for (i, s) in basis.states().iter().enumerate() {
        let z = v[space.index(s)];
        out[i] = z;
        kept += z.norm_sqr();
    }
    let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    Ok((out, (total - kept).max(0.0)))
}

/// Unit product state in the constrained basis.
pub fn product_state(basis: &ConstrainedBasis, labels: &[u8]) -> Result<Array1<C64>> {
    let idx = basis.index_of(labels).ok_or_else(|| {
        Error::validation("requested product state is not in the constrained basis")
    })?;
    let mut v = Array1::zeros(basis.dim());
    v[idx] = C64::new(1.0, 0.0);
    Ok(v)
}
