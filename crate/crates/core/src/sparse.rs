//! Complex sparse matrices tagged with the basis they act in.
//!
//! Storage is canonical coordinate form: entries sorted by (row, col),
//! duplicates summed, magnitudes below [`DROP_TOL`] dropped. Hot paths
//! convert to CSR once and reuse it.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::io::Write;

use crate::error::{Error, Result};

/// Entries with magnitude below this are dropped during canonicalization.
pub const DROP_TOL: f64 = 1e-14;

/// Which index space an operator's rows/columns refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisTag {
    /// Full product space of dimension `d^N`.
    Full,
    /// The blockade-free subspace enumerated by a `ConstrainedBasis`.
    Constrained,
}

#[derive(Clone, Debug)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    entries: Vec<(u32, u32, C64)>,
    pub basis: BasisTag,
    pub hermitian: bool,
}

impl SparseOperator {
    /// Build from raw coordinate entries; sorts, merges duplicates, and drops
    /// near-zero values.
    pub fn from_entries(
        nrows: usize,
        ncols: usize,
        mut entries: Vec<(u32, u32, C64)>,
        basis: BasisTag,
        hermitian: bool,
    ) -> Self {
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut canon: Vec<(u32, u32, C64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match canon.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => canon.push((r, c, v)),
            }
        }
        canon.retain(|&(_, _, v)| v.norm() >= DROP_TOL);
        SparseOperator {
            nrows,
            ncols,
            entries: canon,
            basis,
            hermitian,
        }
    }

    pub fn zero(nrows: usize, ncols: usize, basis: BasisTag) -> Self {
        SparseOperator {
            nrows,
            ncols,
            entries: Vec::new(),
            basis,
            hermitian: nrows == ncols,
        }
    }

    pub fn identity(dim: usize, basis: BasisTag) -> Self {
        let entries = (0..dim as u32).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
        SparseOperator::from_entries(dim, dim, entries, basis, true)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(u32, u32, C64)] {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries
            .iter()
            .filter(|&&(r, c, _)| r == c)
            .map(|&(_, _, v)| v)
            .sum()
    }

    /// Largest entry magnitude; 0 for an empty matrix.
    pub fn max_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.2.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, factor: C64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, v)| (r, c, factor * v))
            .collect();
        SparseOperator::from_entries(
            self.nrows,
            self.ncols,
            entries,
            self.basis,
            self.hermitian && factor.im == 0.0,
        )
    }

    pub fn add(&self, other: &SparseOperator) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols || self.basis != other.basis {
            return Err(Error::consistency("sparse add: shape or basis mismatch"));
        }
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        Ok(SparseOperator::from_entries(
            self.nrows,
            self.ncols,
            entries,
            self.basis,
            self.hermitian && other.hermitian,
        ))
    }

    pub fn adjoint(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, v)| (c, r, v.conj()))
            .collect();
        SparseOperator::from_entries(self.ncols, self.nrows, entries, self.basis, self.hermitian)
    }

    /// Sparse-sparse product `self * other`.
    pub fn matmul(&self, other: &SparseOperator) -> Result<Self> {
        if self.ncols != other.nrows || self.basis != other.basis {
            return Err(Error::consistency("sparse matmul: shape or basis mismatch"));
        }
        let rhs = other.to_csr();
        let mut entries = Vec::new();
        for &(r, k, v) in &self.entries {
            let (cols, vals) = rhs.row(k as usize);
            for (c, w) in cols.iter().zip(vals) {
                entries.push((r, *c, v * w));
            }
        }
        Ok(SparseOperator::from_entries(
            self.nrows,
            other.ncols,
            entries,
            self.basis,
            false,
        ))
    }

    /// `max |A - A†|`; 0 means exactly conjugate-symmetric.
    pub fn hermiticity_deviation(&self) -> f64 {
        let adj = self.adjoint();
        let mut dev: f64 = 0.0;
        let mut i = 0;
        let mut k = 0;
        // both entry lists are sorted; walk them together
        while i < self.entries.len() || k < adj.entries.len() {
            let a = self.entries.get(i);
            let b = adj.entries.get(k);
            match (a, b) {
                (Some(&(r1, c1, v1)), Some(&(r2, c2, v2))) => {
                    if (r1, c1) == (r2, c2) {
                        dev = dev.max((v1 - v2).norm());
                        i += 1;
                        k += 1;
                    } else if (r1, c1) < (r2, c2) {
                        dev = dev.max(v1.norm());
                        i += 1;
                    } else {
                        dev = dev.max(v2.norm());
                        k += 1;
                    }
                }
                (Some(&(_, _, v1)), None) => {
                    dev = dev.max(v1.norm());
                    i += 1;
                }
                (None, Some(&(_, _, v2))) => {
                    dev = dev.max(v2.norm());
                    k += 1;
                }
                (None, None) => break,
            }
        }
        dev
    }

    /// Entrywise max |self - other|, requiring equal shapes.
    pub fn max_diff(&self, other: &SparseOperator) -> Result<f64> {
        let neg = other.scale(C64::new(-1.0, 0.0));
        Ok(self.add(&neg)?.max_norm())
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for &(r, c, v) in &self.entries {
            out[(r as usize, c as usize)] += v;
        }
        out
    }

    pub fn from_dense(mat: ArrayView2<'_, C64>, basis: BasisTag, hermitian: bool) -> Self {
        let mut entries = Vec::new();
        for ((r, c), &v) in mat.indexed_iter() {
            if v.norm() >= DROP_TOL {
                entries.push((r as u32, c as u32, v));
            }
        }
        SparseOperator::from_entries(mat.nrows(), mat.ncols(), entries, basis, hermitian)
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut indptr = vec![0usize; self.nrows + 1];
        for &(r, _, _) in &self.entries {
            indptr[r as usize + 1] += 1;
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        let indices = self.entries.iter().map(|e| e.1).collect();
        let values = self.entries.iter().map(|e| e.2).collect();
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }

    /// True if all imaginary parts vanish (below `DROP_TOL`).
    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|e| e.2.im.abs() < DROP_TOL)
    }

    /// Write in MatrixMarket coordinate format (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.entries.len())?;
        for &(r, c, v) in &self.entries {
            writeln!(w, "{} {} {:.16e} {:.16e}", r + 1, c + 1, v.re, v.im)?;
        }
        Ok(())
    }
}

/// CSR over real values, for operators with no imaginary parts.
#[derive(Clone, Debug)]
pub struct RealCsr {
    pub nrows: usize,
    pub ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl RealCsr {
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    /// y = A x over f64.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c as usize];
            }
            y[i] = acc;
        }
    }

    /// `x' A x` for a real vector.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut row_acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                row_acc += v * x[*c as usize];
            }
            acc += x[i] * row_acc;
        }
        acc
    }
}

impl SparseOperator {
    /// Real CSR view; `None` if any entry has an imaginary part.
    pub fn to_real_csr(&self) -> Option<RealCsr> {
        if !self.is_real() {
            return None;
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        for &(r, _, _) in &self.entries {
            indptr[r as usize + 1] += 1;
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        Some(RealCsr {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices: self.entries.iter().map(|e| e.1).collect(),
            values: self.entries.iter().map(|e| e.2.re).collect(),
        })
    }
}

/// Compressed sparse row form used by the compute kernels.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn row(&self, i: usize) -> (&[u32], &[C64]) {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = A x
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = C64::new(0.0, 0.0);
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c as usize];
            }
            y[i] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &Array1<C64>) -> Array1<C64> {
        let mut y = Array1::zeros(self.nrows);
        self.matvec(
            x.as_slice().expect("contiguous"),
            y.as_slice_mut().expect("contiguous"),
        );
        y
    }

    /// `<x|A|x>` without materializing A x (x must match both dims).
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut row_acc = C64::new(0.0, 0.0);
            for (c, v) in cols.iter().zip(vals) {
                row_acc += v * x[*c as usize];
            }
            acc += x[i].conj() * row_acc;
        }
        acc
    }

    /// `‖A x‖²`.
    pub fn apply_norm_sqr(&self, x: &[C64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut row_acc = C64::new(0.0, 0.0);
            for (c, v) in cols.iter().zip(vals) {
                row_acc += v * x[*c as usize];
            }
            acc += row_acc.norm_sqr();
        }
        acc
    }

    /// out = A · B with dense row-major B, parallel over output rows.
    pub fn spmm(&self, b: ArrayView2<'_, C64>, out: &mut Array2<C64>) {
        debug_assert_eq!(b.nrows(), self.ncols);
        debug_assert_eq!(out.nrows(), self.nrows);
        debug_assert_eq!(out.ncols(), b.ncols());
        let bs = b.as_standard_layout();
        let b_slice = bs.as_slice().expect("contiguous");
        let w = b.ncols();
        let rows: Vec<_> = out.outer_iter_mut().collect();
        rows.into_par_iter().enumerate().for_each(|(i, mut row)| {
            let r = row.as_slice_mut().expect("contiguous");
            r.fill(C64::new(0.0, 0.0));
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let src = &b_slice[*c as usize * w..(*c as usize + 1) * w];
                for (dst, s) in r.iter_mut().zip(src) {
                    *dst += v * s;
                }
            }
        });
    }

    /// out = B · A†, parallel over rows of B.
    pub fn spmm_right_dagger(&self, b: ArrayView2<'_, C64>, out: &mut Array2<C64>) {
        debug_assert_eq!(b.ncols(), self.ncols);
        debug_assert_eq!(out.nrows(), b.nrows());
        debug_assert_eq!(out.ncols(), self.nrows);
        let bs = b.as_standard_layout();
        let b_slice = bs.as_slice().expect("contiguous");
        let w = b.ncols();
        let rows: Vec<_> = out.outer_iter_mut().collect();
        rows.into_par_iter().enumerate().for_each(|(a, mut row)| {
            let r = row.as_slice_mut().expect("contiguous");
            r.fill(C64::new(0.0, 0.0));
            let src = &b_slice[a * w..(a + 1) * w];
            for i in 0..self.nrows {
                let (cols, vals) = self.row(i);
                let mut acc = C64::new(0.0, 0.0);
                for (c, v) in cols.iter().zip(vals) {
                    acc += src[*c as usize] * v.conj();
                }
                r[i] = acc;
            }
        });
    }
}
