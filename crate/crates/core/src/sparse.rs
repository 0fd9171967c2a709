//! Minimal compressed sparse row matrices.
//!
//! The workbench only needs construction from triplets, transpose, products,
//! sums, and matrix-vector application. Transposition permutes stored values
//! without arithmetic, so `-transpose` round-trips bitwise; the skew assembly
//! in [`crate::blocks`] relies on that.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Compressed sparse row matrix with explicit dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    /// Row start offsets, length `nrows + 1`.
    pub indptr: Vec<usize>,
    /// Column indices, sorted within each row.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds from (row, col, value) triplets. Duplicate entries are summed;
    /// explicit zeros are kept (callers control sparsity patterns).
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::Shape(format!(
                    "triplet ({r},{c}) outside {nrows}x{ncols}"
                )));
            }
        }
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_unstable_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut row = 0usize;
        for k in order {
            let (r, c, v) = triplets[k];
            while row < r {
                row += 1;
                indptr[row] = indices.len();
            }
            if let (Some(&last_c), Some(last_v)) = (indices.last(), values.last_mut()) {
                if indptr[row] < indices.len() && last_c == c {
                    *last_v += v;
                    continue;
                }
            }
            indices.push(c);
            values.push(v);
        }
        while row < nrows {
            row += 1;
            indptr[row] = indices.len();
        }
        Ok(Csr { nrows, ncols, indptr, indices, values })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Csr {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &triplets).expect("dense shape is consistent")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                m[(r, self.indices[k])] += self.values[k];
            }
        }
        m
    }

    /// Exact transpose: values are permuted, never recomputed.
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0f64; self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let dst = next[c];
                indices[dst] = r;
                values[dst] = self.values[k];
                next[c] += 1;
            }
        }
        Csr { nrows: self.ncols, ncols: self.nrows, indptr, indices, values }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn add(&self, other: &Csr) -> Result<Csr> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Shape(format!(
                "add {}x{} with {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            let (mut i, ei) = (self.indptr[r], self.indptr[r + 1]);
            let (mut j, ej) = (other.indptr[r], other.indptr[r + 1]);
            while i < ei || j < ej {
                if j >= ej || (i < ei && self.indices[i] < other.indices[j]) {
                    indices.push(self.indices[i]);
                    values.push(self.values[i]);
                    i += 1;
                } else if i >= ei || other.indices[j] < self.indices[i] {
                    indices.push(other.indices[j]);
                    values.push(other.values[j]);
                    j += 1;
                } else {
                    indices.push(self.indices[i]);
                    values.push(self.values[i] + other.values[j]);
                    i += 1;
                    j += 1;
                }
            }
            indptr[r + 1] = indices.len();
        }
        Ok(Csr { nrows: self.nrows, ncols: self.ncols, indptr, indices, values })
    }

    /// Sparse product `self * other` with a dense row accumulator.
    pub fn matmul(&self, other: &Csr) -> Result<Csr> {
        if self.ncols != other.nrows {
            return Err(Error::Shape(format!(
                "matmul {}x{} with {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0f64; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let a = self.values[k];
                let mid = self.indices[k];
                for m in other.indptr[mid]..other.indptr[mid + 1] {
                    let c = other.indices[m];
                    if acc[c] == 0.0 && !touched.contains(&c) {
                        touched.push(c);
                    }
                    acc[c] += a * other.values[m];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                indices.push(c);
                values.push(acc[c]);
                acc[c] = 0.0;
            }
            touched.clear();
            indptr[r + 1] = indices.len();
        }
        Ok(Csr { nrows: self.nrows, ncols: other.ncols, indptr, indices, values })
    }

    /// `y += alpha * self * x`.
    pub fn matvec_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        crate::threads::for_row_chunks(y, 1, |row0, chunk| {
            for (i, yv) in chunk.iter_mut().enumerate() {
                let r = row0 + i;
                let mut s = 0.0;
                for k in self.indptr[r]..self.indptr[r + 1] {
                    s += self.values[k] * x[self.indices[k]];
                }
                *yv += alpha * s;
            }
        });
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.nrows);
        self.matvec_acc(1.0, x.as_slice(), y.as_mut_slice());
        y
    }

    /// Largest absolute entry (zero for an empty pattern).
    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Kronecker product `identity(k) (x) self`: repeats the matrix on k
    /// diagonal blocks. In the node-major, slot-minor layout this applies a
    /// per-node slot action identically at every node.
    pub fn identity_kron(&self, k: usize) -> Csr {
        let mut indptr = vec![0usize; self.nrows * k + 1];
        let mut indices = Vec::with_capacity(self.nnz() * k);
        let mut values = Vec::with_capacity(self.nnz() * k);
        for b in 0..k {
            for r in 0..self.nrows {
                for m in self.indptr[r]..self.indptr[r + 1] {
                    indices.push(b * self.ncols + self.indices[m]);
                    values.push(self.values[m]);
                }
                indptr[b * self.nrows + r + 1] = indices.len();
            }
        }
        Csr { nrows: self.nrows * k, ncols: self.ncols * k, indptr, indices, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = Csr::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5), (1, 0, -1.0)]).unwrap();
        assert_eq!(m.indptr, vec![0, 1, 3]);
        assert_eq!(m.indices, vec![1, 0, 2]);
        assert_eq!(m.values, vec![2.0, -1.0, 1.5]);
    }

    #[test]
    fn transpose_is_bitwise_involution() {
        let m = Csr::from_triplets(3, 2, &[(0, 1, 0.3), (2, 0, -7.25), (1, 1, 1e-30)]).unwrap();
        let t = m.transpose().transpose();
        assert_eq!(m, t);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = Csr::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -3.0)]).unwrap();
        let b = Csr::from_triplets(3, 2, &[(0, 1, 4.0), (2, 0, 5.0), (1, 0, 6.0)]).unwrap();
        let c = a.matmul(&b).unwrap().to_dense();
        let cd = a.to_dense() * b.to_dense();
        assert_eq!(c, cd);
    }

    #[test]
    fn add_and_matvec() {
        let a = Csr::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0)]).unwrap();
        let b = Csr::from_triplets(2, 2, &[(0, 1, 3.0), (1, 0, -2.0)]).unwrap();
        let s = a.add(&b).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let y = s.matvec(&x);
        assert_eq!(y, DVector::from_vec(vec![4.0, 0.0]));
    }

    #[test]
    fn identity_kron_repeats_diagonal_blocks() {
        let a = Csr::from_triplets(2, 3, &[(0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        let k = a.identity_kron(2);
        assert_eq!((k.nrows, k.ncols), (4, 6));
        let d = k.to_dense();
        assert_eq!(d[(0, 1)], 2.0);
        assert_eq!(d[(1, 0)], 3.0);
        assert_eq!(d[(2, 4)], 2.0);
        assert_eq!(d[(3, 3)], 3.0);
        assert_eq!(d.iter().filter(|v| **v != 0.0).count(), 4);
    }
}
