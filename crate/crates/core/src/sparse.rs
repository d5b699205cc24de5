//! Compressed sparse row storage and a sparse LU wrapper.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            assert!(
                i < nrows && j < ncols,
                "entry ({i}, {j}) outside {nrows}x{ncols}"
            );
            if last == Some((i, j)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(pos) => self.values[r.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `A^T x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, j, v) in self.iter() {
            y[j] += v * x[i];
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| alpha * v).collect(),
            ..self.clone()
        }
    }

    /// `alpha A + beta B`
    pub fn add(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} + {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let t: Vec<_> = self
            .iter()
            .map(|(i, j, v)| (i, j, alpha * v))
            .chain(other.iter().map(|(i, j, v)| (i, j, beta * v)))
            .collect();
        Ok(Self::from_triplets(self.nrows, self.ncols, &t))
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max == 0.0 {
            return 0.0;
        }
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / max
    }

    /// `P A P^T` where row/column `i` moves to `perm[i]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        assert_eq!(self.nrows, self.ncols);
        let t: Vec<_> = self.iter().map(|(i, j, v)| (perm[i], perm[j], v)).collect();
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            d[(i, j)] += v;
        }
        d
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<_> = self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::Factorization(format!("{e:?}")))
    }
}

/// Block matrix assembled from sparse blocks placed at row/column offsets.
pub fn block(nrows: usize, ncols: usize, blocks: &[(usize, usize, &CsrMatrix)]) -> CsrMatrix {
    let t: Vec<_> = blocks
        .iter()
        .flat_map(|&(r0, c0, b)| b.iter().map(move |(i, j, v)| (r0 + i, c0 + j, v)))
        .collect();
    CsrMatrix::from_triplets(nrows, ncols, &t)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sparse LU factorization of a square matrix.
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::DimensionMismatch(format!(
                "LU of a {}x{} matrix",
                a.nrows, a.ncols
            )));
        }
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self { n: a.nrows, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(x.as_mut());
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solves for several right-hand sides stored as columns.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if rhs.is_empty() {
            return Vec::new();
        }
        let mut x = Mat::from_fn(self.n, rhs.len(), |i, j| rhs[j][i]);
        self.lu.solve_in_place(x.as_mut());
        (0..rhs.len())
            .map(|j| (0..self.n).map(|i| x[(i, j)]).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn duplicates_are_summed_and_rows_sorted() {
        let a =
            CsrMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 2, 4.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(1, 2), 5.0);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![2.0, 8.0]);
        assert_eq!(a.tr_mul_vec(&[1.0, 2.0]), vec![6.0, 2.0, 10.0]);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn lu_solves_indefinite_saddle_system() {
        // [[2, 0, 1], [0, 3, 1], [1, 1, 0]]
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 2.0),
                (1, 1, 3.0),
                (0, 2, 1.0),
                (2, 0, 1.0),
                (1, 2, 1.0),
                (2, 1, 1.0),
            ],
        );
        let lu = SparseLu::factor(&a).unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*ri, bi, epsilon = 1e-14);
        }
        let many = lu.solve_many(&[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]]);
        assert_eq!(many[0], x);
    }

    #[test]
    fn symmetric_permutation_preserves_spectrum_trace() {
        let a =
            CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (2, 2, 5.0)]);
        let p = a.permute_symmetric(&[2, 0, 1]);
        assert_eq!(p.get(2, 0), 2.0);
        assert_eq!(p.get(1, 1), 5.0);
        assert_eq!(p.asymmetry(), 0.0);
        let sum = a.add(1.0, &CsrMatrix::identity(3), -1.0).unwrap();
        assert_eq!(sum.get(0, 0), 0.0);
        assert_eq!(sum.to_dense()[(2, 2)], 4.0);
    }
}
