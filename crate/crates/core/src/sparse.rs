//! Compressed sparse row storage for sampled matrices.
//!
//! The transpose is stored alongside so that both `A x` and `Aᵀ x` are row
//! sweeps with a fixed reduction order.

use nalgebra::DMatrix;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds from triplets. Entries within a row are sorted by column;
    /// duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for &(i, j, v) in triplets {
            assert!(i < rows && j < cols, "triplet ({i},{j}) out of bounds");
            per_row[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        for mut row in per_row {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        Csr {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Entry lookup by binary search within the row; zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Csr {
        let triplets: Vec<(usize, usize, f64)> = (0..self.rows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (j, i, v)))
            .collect();
        Csr::from_triplets(self.cols, self.rows, &triplets)
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// `self * x` for a dense block `x` (cols × b).
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.cols);
        let b = x.ncols();
        let rows: Vec<Vec<f64>> = (0..self.rows)
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![0.0; b];
                for (j, v) in self.row(i) {
                    for (c, a) in acc.iter_mut().enumerate() {
                        *a += v * x[(j, c)];
                    }
                }
                acc
            })
            .collect();
        DMatrix::from_fn(self.rows, b, |i, c| rows[i][c])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Sparse matrix with its transpose precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    csr: Csr,
    csr_t: Csr,
}

impl SparseMatrix {
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        Self::from_csr(Csr::from_triplets(rows, cols, triplets))
    }

    pub fn from_csr(csr: Csr) -> Self {
        let csr_t = csr.transpose();
        SparseMatrix { csr, csr_t }
    }

    pub fn nrows(&self) -> usize {
        self.csr.rows
    }

    pub fn ncols(&self) -> usize {
        self.csr.cols
    }

    pub fn nnz(&self) -> usize {
        self.csr.nnz()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.csr.get(i, j)
    }

    pub fn csr(&self) -> &Csr {
        &self.csr
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.csr.scale(c);
        self.csr_t.scale(c);
        self
    }

    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.csr.mul_dense(x)
    }

    pub fn tr_mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.csr_t.mul_dense(x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.csr.to_dense()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_match_dense() {
        let a = SparseMatrix::from_triplets(3, 4, &[(0, 1, 2.0), (2, 3, -1.0), (1, 0, 0.5), (0, 1, 1.0)]);
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(2, 2), 0.0);
        let x = DMatrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64);
        let dense = a.to_dense();
        assert_eq!(a.mul_dense(&x), &dense * &x);
        let y = DMatrix::from_fn(3, 2, |i, j| (i as f64) - (j as f64));
        assert_eq!(a.tr_mul_dense(&y), dense.transpose() * &y);
    }
}
