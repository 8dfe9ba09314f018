//! Compressed sparse row matrices, just enough for graph propagation.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square CSR matrix. Column indices within a row are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets. Duplicate coordinates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of `row` as (column, value).
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[row]..self.indptr[row + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let span = self.indptr[row]..self.indptr[row + 1];
        match self.indices[span.clone()].binary_search(&col) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// `self · rhs` for a dense right-hand side.
    pub fn matmul(&self, rhs: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if rhs.nrows() != self.n {
            return Err(Error::Shape(format!(
                "sparse {}x{} times dense {}x{}",
                self.n,
                self.n,
                rhs.nrows(),
                rhs.ncols()
            )));
        }
        let mut out = Array2::zeros((self.n, rhs.ncols()));
        for i in 0..self.n {
            let mut out_row = out.row_mut(i);
            for (j, v) in self.row(i) {
                out_row.scaled_add(v, &rhs.row(j));
            }
        }
        Ok(out)
    }

    /// `self · diag(scale)`, i.e. column `j` multiplied by `scale[j]`.
    pub fn scale_columns(&self, scale: &Array1<f64>) -> CsrMatrix {
        let mut out = self.clone();
        for (v, &c) in out.values.iter_mut().zip(&out.indices) {
            *v *= scale[c];
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Estimates the spectral radius by power iteration from a fixed positive start vector.
    pub fn spectral_radius_estimate(&self, steps: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let mut x = Array1::from_elem(self.n, 1.0 / (self.n as f64).sqrt());
        // perturb so the start vector is not orthogonal to a dominant eigenvector
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += 1e-3 * ((i * 7919 % 13) as f64);
        }
        let norm = x.dot(&x).sqrt();
        x /= norm;
        let mut estimate = 0.0;
        for _ in 0..steps {
            let mut y = Array1::zeros(self.n);
            for i in 0..self.n {
                y[i] = self.row(i).map(|(j, v)| v * x[j]).sum::<f64>();
            }
            let ny = y.dot(&y).sqrt();
            if ny == 0.0 {
                return 0.0;
            }
            estimate = ny;
            x = y / ny;
        }
        estimate
    }
}
