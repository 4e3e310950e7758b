//! Exact diagonalization in the constrained subspace and per-eigenstate
//! observables.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use ndarray_linalg::{Eigh, UPLO};
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Caps;
use crate::sparse::{BasisTag, SparseOperator};

/// Relative tolerance defining degenerate clusters (times spectral range).
pub const DEGENERACY_REL_TOL: f64 = 1e-8;

/// Full spectrum and eigenvectors of a constrained Hamiltonian.
///
/// Vectors are stored as real columns: every model family shipped here has a
/// real-symmetric Hamiltonian in the product basis. A complex-Hermitian input
/// is rejected rather than silently upcast.
pub struct EigenSystem {
    pub energies: Array1<f64>,
    /// Column `i` is the eigenvector of `energies[i]`.
    pub vectors: Array2<f64>,
    /// Indices clustered within `DEGENERACY_REL_TOL * spectral_range()`.
    pub groups: Vec<Vec<usize>>,
    /// Group index of each eigenstate.
    pub group_of: Vec<usize>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn spectral_range(&self) -> f64 {
        if self.energies.is_empty() {
            0.0
        } else {
            self.energies[self.energies.len() - 1] - self.energies[0]
        }
    }

    pub fn degeneracy_tol(&self) -> f64 {
        DEGENERACY_REL_TOL * self.spectral_range()
    }

    pub fn is_degenerate(&self, index: usize) -> bool {
        self.groups[self.group_of[index]].len() > 1
    }

    /// Contiguous copy of eigenvector `i`.
    pub fn vector(&self, i: usize) -> Array1<f64> {
        self.vectors.column(i).to_owned()
    }

    fn group_by_tolerance(energies: &Array1<f64>) -> (Vec<Vec<usize>>, Vec<usize>) {
        let n = energies.len();
        let range = if n == 0 { 0.0 } else { energies[n - 1] - energies[0] };
        let tol = DEGENERACY_REL_TOL * range;
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_of = vec![0usize; n];
        for i in 0..n {
            let start_new = match groups.last() {
                Some(g) => {
                    let last = *g.last().unwrap();
                    (energies[i] - energies[last]).abs() > tol
                }
                None => true,
            };
            if start_new {
                groups.push(vec![i]);
            } else {
                groups.last_mut().unwrap().push(i);
            }
            group_of[i] = groups.len() - 1;
        }
        (groups, group_of)
    }
}

/// Dense symmetric eigensolve of a Hermitian constrained-basis operator.
pub fn diagonalize(h: &SparseOperator, caps: &Caps) -> Result<EigenSystem> {
    if h.nrows() != h.ncols() {
        return Err(Error::validation("diagonalize requires a square operator"));
    }
    if !h.hermitian || h.hermiticity_deviation() > 1e-12 {
        return Err(Error::validation(
            "diagonalize requires a Hermitian operator",
        ));
    }
    if h.nrows() > caps.max_dense_dim {
        return Err(Error::Capacity {
            what: "dense eigensolve".into(),
            requested: h.nrows(),
            cap_name: "max_dense_dim",
            cap: caps.max_dense_dim,
            advice: "use trajectory-based workflows or raise the cap".into(),
        });
    }
    if !h.is_real() {
        return Err(Error::validation(
            "diagonalize supports real-symmetric operators; all built-in \
             families produce real Hamiltonians in this basis",
        ));
    }
    let dim = h.nrows();
    let mut dense = Array2::<f64>::zeros((dim, dim));
    for &(r, c, v) in h.entries() {
        dense[(r as usize, c as usize)] = v.re;
    }
    let (energies, vectors) = dense
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("symmetric eigensolve failed: {e}")))?;

    // spot-check the residual against the sparse operator
    let csr = h.to_real_csr().expect("checked real");
    let scale = energies.iter().fold(1.0f64, |a, &e| a.max(e.abs()));
    let mut worst = 0.0f64;
    let step = (dim / 64).max(1);
    let mut buf = vec![0.0f64; dim];
    let mut col = vec![0.0f64; dim];
    for i in (0..dim).step_by(step) {
        for a in 0..dim {
            col[a] = vectors[(a, i)];
        }
        csr.matvec(&col, &mut buf);
        let mut err2 = 0.0;
        for a in 0..dim {
            let r = buf[a] - energies[i] * col[a];
            err2 += r * r;
        }
        worst = worst.max(err2.sqrt());
    }
    if worst > 1e-9 * scale.max(1.0) {
        return Err(Error::Linalg(format!(
            "eigenpair residual {worst:.2e} exceeds tolerance"
        )));
    }

    let (groups, group_of) = EigenSystem::group_by_tolerance(&energies);
    Ok(EigenSystem {
        energies,
        vectors,
        groups,
        group_of,
    })
}

/// How per-eigenstate expectation values treat degenerate clusters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegeneracyPolicy {
    /// Replace each value by its mean over the degenerate group (default:
    /// removes eigenvector arbitrariness inside the group).
    GroupAverage,
    /// Report raw per-eigenvector values.
    Raw,
}

/// `<O>_i = v_i' O v_i` for every eigenstate.
pub fn eigen_expectation(
    eig: &EigenSystem,
    op: &SparseOperator,
    policy: DegeneracyPolicy,
) -> Result<Vec<f64>> {
    if op.nrows() != eig.dim() || op.ncols() != eig.dim() {
        return Err(Error::consistency(
            "observable dimension does not match the eigensystem",
        ));
    }
    if op.basis != BasisTag::Constrained {
        return Err(Error::consistency(
            "eigen expectations take constrained-basis operators",
        ));
    }
    if !op.hermitian {
        return Err(Error::validation("observable must be Hermitian"));
    }
    let csr = op.to_real_csr().ok_or_else(|| {
        Error::validation("expectation fast path requires a real operator")
    })?;
    let dim = eig.dim();
    let mut values: Vec<f64> = (0..dim)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; dim],
            |col, i| {
                for a in 0..dim {
                    col[a] = eig.vectors[(a, i)];
                }
                csr.quadratic_form(col)
            },
        )
        .collect();
    if policy == DegeneracyPolicy::GroupAverage {
        for g in &eig.groups {
            if g.len() > 1 {
                let mean = g.iter().map(|&i| values[i]).sum::<f64>() / g.len() as f64;
                for &i in g {
                    values[i] = mean;
                }
            }
        }
    }
    Ok(values)
}

/// `|<state|E_i>|^2` for a normalized constrained state.
pub fn overlaps(eig: &EigenSystem, state: &Array1<C64>) -> Result<Array1<f64>> {
    if state.len() != eig.dim() {
        return Err(Error::consistency("state dimension mismatch"));
    }
    let norm: f64 = state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::validation(format!(
            "overlaps require a normalized state (norm = {norm:.12})"
        )));
    }
    let re = state.mapv(|z| z.re);
    let im = state.mapv(|z| z.im);
    let cre = eig.vectors.t().dot(&re);
    let cim = eig.vectors.t().dot(&im);
    Ok(Array1::from_iter(
        cre.iter().zip(cim.iter()).map(|(a, b)| a * a + b * b),
    ))
}

/// How scar states are identified from an overlap profile.
#[derive(Clone, Debug)]
pub enum ScarPolicy {
    /// Tag whole degeneracy groups that are local overlap maxima within an
    /// energy radius calibrated from the loudest groups' spacing (the scar
    /// tower is evenly spaced, so prominence in energy separates it from
    /// thermal states that happen to be loud). Groups below `floor` are
    /// ignored. This is the default.
    LocalProminence { floor: f64 },
    /// Tag whole degeneracy groups above the largest gap in the sorted
    /// log10 overlap profile (groups below `floor` are ignored). Adequate
    /// for cleanly separated bands; the tower's quiet edge members fall
    /// below loud thermal states at 7+ sites, where `LocalProminence`
    /// should be used instead.
    GapThreshold { floor: f64 },
    /// Caller-supplied eigenstate indices.
    Explicit(Vec<usize>),
}

impl Default for ScarPolicy {
    fn default() -> Self {
        ScarPolicy::LocalProminence { floor: 1e-8 }
    }
}

/// Identify scar states by overlap prominence with the scar seed state.
///
/// Overlaps are aggregated over degeneracy groups (the group sum is
/// invariant under eigenvector rotations inside a group). Returns sorted
/// eigenstate indices of every member of each tagged group.
pub fn tag_scars(
    eig: &EigenSystem,
    overlaps: &Array1<f64>,
    policy: &ScarPolicy,
) -> Result<Vec<usize>> {
    if eig.dim() == 0 {
        return Err(Error::validation("empty spectrum"));
    }
    let collect = |groups: Vec<usize>| -> Vec<usize> {
        let mut out: Vec<usize> = groups
            .into_iter()
            .flat_map(|gi| eig.groups[gi].iter().copied())
            .collect();
        out.sort_unstable();
        out
    };
    match policy {
        ScarPolicy::Explicit(list) => {
            let mut out = list.clone();
            out.sort_unstable();
            out.dedup();
            if out.iter().any(|&i| i >= eig.dim()) {
                return Err(Error::validation("explicit scar index out of range"));
            }
            Ok(out)
        }
        ScarPolicy::GapThreshold { floor } => {
            let mut group_sums: Vec<(usize, f64)> = eig
                .groups
                .iter()
                .enumerate()
                .map(|(gi, g)| (gi, g.iter().map(|&i| overlaps[i]).sum::<f64>()))
                .filter(|&(_, s)| s >= *floor)
                .collect();
            if group_sums.is_empty() {
                return Ok(Vec::new());
            }
            group_sums.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            let logs: Vec<f64> = group_sums.iter().map(|&(_, s)| s.log10()).collect();
            let mut split = logs.len();
            let mut best_gap = 0.0;
            for w in 0..logs.len().saturating_sub(1) {
                let gap = logs[w] - logs[w + 1];
                if gap > best_gap {
                    best_gap = gap;
                    split = w + 1;
                }
            }
            Ok(collect(group_sums[..split].iter().map(|&(gi, _)| gi).collect()))
        }
        ScarPolicy::LocalProminence { floor } => {
            let sums: Vec<f64> = eig
                .groups
                .iter()
                .map(|g| g.iter().map(|&i| overlaps[i]).sum::<f64>())
                .collect();
            let centers: Vec<f64> = eig
                .groups
                .iter()
                .map(|g| g.iter().map(|&i| eig.energies[i]).sum::<f64>() / g.len() as f64)
                .collect();
            let mut candidates: Vec<usize> = (0..eig.groups.len())
                .filter(|&gi| sums[gi] >= *floor)
                .collect();
            if candidates.is_empty() {
                return Ok(Vec::new());
            }
            candidates.sort_by(|&a, &b| sums[b].partial_cmp(&sums[a]).unwrap());
            // tower spacing estimate: smallest nonzero energy spacing among
            // the three loudest groups
            let top: Vec<f64> = candidates.iter().take(3).map(|&gi| centers[gi]).collect();
            let mut spacing = f64::INFINITY;
            for i in 0..top.len() {
                for k in i + 1..top.len() {
                    let d = (top[i] - top[k]).abs();
                    if d > 1e-9 && d < spacing {
                        spacing = d;
                    }
                }
            }
            let radius = if spacing.is_finite() { 0.5 * spacing } else { 0.0 };
            let kept: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&gi| {
                    !candidates.iter().any(|&other| {
                        sums[other] > sums[gi]
                            && (centers[other] - centers[gi]).abs() <= radius
                    })
                })
                .collect();
            Ok(collect(kept))
        }
    }
}

/// Energy histogram (diagnostic).
pub struct Histogram {
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

pub fn density_of_states(eig: &EigenSystem, bin_width: f64) -> Result<Histogram> {
    if !(bin_width > 0.0) {
        return Err(Error::validation("bin width must be positive"));
    }
    let lo = eig.energies[0];
    let hi = eig.energies[eig.dim() - 1];
    let n_bins = (((hi - lo) / bin_width).floor() as usize + 1).max(1);
    let mut counts = vec![0usize; n_bins];
    for &e in eig.energies.iter() {
        let b = (((e - lo) / bin_width) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram {
        lo,
        bin_width,
        counts,
    })
}

/// Per-eigenstate summary rows (CSV schema:
/// `index,energy,overlap0,n_expect,<obs...>,scar_flag`).
pub struct EigenTable {
    pub energies: Vec<f64>,
    pub overlap0: Vec<f64>,
    pub n_expect: Vec<f64>,
    pub observables: Vec<(String, Vec<f64>)>,
    pub scar_flags: Vec<bool>,
}

impl EigenTable {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let obs_names: Vec<&str> = self.observables.iter().map(|(n, _)| n.as_str()).collect();
        write!(w, "index,energy,overlap0,n_expect")?;
        for name in &obs_names {
            write!(w, ",{name}")?;
        }
        writeln!(w, ",scar_flag")?;
        for i in 0..self.dim() {
            write!(
                w,
                "{},{:.16e},{:.16e},{:.16e}",
                i, self.energies[i], self.overlap0[i], self.n_expect[i]
            )?;
            for (_, vals) in &self.observables {
                write!(w, ",{:.16e}", vals[i])?;
            }
            writeln!(w, ",{}", if self.scar_flags[i] { 1 } else { 0 })?;
        }
        Ok(())
    }
}

const CACHE_MAGIC: &[u8; 8] = b"BLKEIG01";
const CACHE_VERSION: u32 = 1;

/// Serialize eigendata keyed by the model-spec hash.
///
/// Layout: magic, version (u32), flags (u32, 0 = real vectors), dim (u64),
/// hash length (u32) + hash bytes, energies, then the vector matrix
/// row-major with column i the i-th eigenvector; all floats little-endian
/// f64.
pub fn write_eigen_cache(path: &Path, spec_hash: &str, eig: &EigenSystem) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(CACHE_MAGIC)?;
    f.write_all(&CACHE_VERSION.to_le_bytes())?;
    f.write_all(&0u32.to_le_bytes())?;
    f.write_all(&(eig.dim() as u64).to_le_bytes())?;
    let hash = spec_hash.as_bytes();
    f.write_all(&(hash.len() as u32).to_le_bytes())?;
    f.write_all(hash)?;
    for &e in eig.energies.iter() {
        f.write_all(&e.to_le_bytes())?;
    }
    let view = eig.vectors.as_standard_layout();
    for &v in view.as_slice().expect("contiguous").iter() {
        f.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read cached eigendata; `None` when missing or keyed by a different spec.
pub fn read_eigen_cache(path: &Path, spec_hash: &str) -> Result<Option<EigenSystem>> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut f = std::io::BufReader::new(file);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Ok(None);
    }
    let mut w32 = [0u8; 4];
    f.read_exact(&mut w32)?;
    if u32::from_le_bytes(w32) != CACHE_VERSION {
        return Ok(None);
    }
    f.read_exact(&mut w32)?; // flags
    let mut w64 = [0u8; 8];
    f.read_exact(&mut w64)?;
    let dim = u64::from_le_bytes(w64) as usize;
    f.read_exact(&mut w32)?;
    let hash_len = u32::from_le_bytes(w32) as usize;
    let mut hash = vec![0u8; hash_len];
    f.read_exact(&mut hash)?;
    if hash != spec_hash.as_bytes() {
        return Ok(None);
    }
    let mut energies = Array1::zeros(dim);
    for i in 0..dim {
        f.read_exact(&mut w64)?;
        energies[i] = f64::from_le_bytes(w64);
    }
    let mut vectors = Array2::zeros((dim, dim));
    {
        let slice = vectors.as_slice_mut().expect("contiguous");
        for v in slice.iter_mut() {
            f.read_exact(&mut w64)?;
            *v = f64::from_le_bytes(w64);
        }
    }
    let (groups, group_of) = EigenSystem::group_by_tolerance(&energies);
    Ok(Some(EigenSystem {
        energies,
        vectors,
        groups,
        group_of,
    }))
}
