//! Sparse symmetric matrices (lower-triangle CSR), rectangular CSR for
//! transfer operators, and an envelope (skyline) Cholesky factorization that
//! covers every direct solve in the crate.

use crate::dense::DenseMatrix;
use crate::error::Error;

/// Symmetric sparse matrix. Only entries with `col <= row` are stored; the
/// upper triangle is implied.
#[derive(Debug, Clone)]
pub struct SymSparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SymSparseMatrix {
    /// Build from unordered triplets. Entries are mirrored into the lower
    /// triangle and duplicates are summed, so assembly loops may add the same
    /// logical entry repeatedly but must emit each unordered pair once.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets
            .iter()
            .map(|&(i, j, v)| if j > i { (j, i, v) } else { (i, j, v) })
            .collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut prev: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            assert!(i < n, "row {i} out of bounds for dimension {n}");
            if prev == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                prev = Some((i, j));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        SymSparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    /// Stored entry at (i, j) with j <= i, or zero.
    pub fn get_lower(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i);
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Symmetric matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let v = self.values[k];
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            d[i] = self.get_lower(i, i);
        }
        d
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                m.set(i, j, self.values[k]);
                if j != i {
                    m.set(j, i, self.values[k]);
                }
            }
        }
        m
    }
}

/// General rectangular sparse matrix in CSR form; used for the transfer
/// operators between spaces.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut prev: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            assert!(i < rows && j < cols, "triplet ({i}, {j}) out of bounds");
            if prev == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                prev = Some((i, j));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
        y
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m.add_to(i, self.col_idx[k], self.values[k]);
            }
        }
        m
    }
}

/// Envelope (skyline) Cholesky factor. Row i stores columns
/// `first[i]..=i` contiguously; fill from the factorization stays inside the
/// envelope, which is what makes this storage exact.
pub struct SkylineFactor {
    n: usize,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineFactor {
    /// Factor a symmetric positive definite matrix.
    pub fn factor(a: &SymSparseMatrix) -> Result<Self, Error> {
        let n = a.n;
        let mut first = vec![0usize; n];
        for i in 0..n {
            first[i] = if a.row_ptr[i] < a.row_ptr[i + 1] {
                a.col_idx[a.row_ptr[i]].min(i)
            } else {
                i
            };
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k];
                data[offset[i] + (j - first[i])] = a.values[k];
            }
        }
        // In-place factorization, row by row.
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = data[offset[i] + (j - fi)];
                for k in start..j {
                    s -= data[offset[i] + (k - fi)] * data[offset[j] + (k - fj)];
                }
                let djj = data[offset[j] + (j - fj)];
                data[offset[i] + (j - fi)] = s / djj;
            }
            let mut d = data[offset[i] + (i - fi)];
            for k in fi..i {
                let lik = data[offset[i] + (k - fi)];
                d -= lik * lik;
            }
            if d <= 0.0 {
                return Err(Error::CholeskyFailure { row: i });
            }
            data[offset[i] + (i - fi)] = d.sqrt();
        }
        Ok(SkylineFactor {
            n,
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve A x = b through the two triangular sweeps.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        for i in 0..self.n {
            let fi = self.first[i];
            let mut s = x[i];
            for k in fi..i {
                s -= self.data[self.offset[i] + (k - fi)] * x[k];
            }
            x[i] = s / self.data[self.offset[i] + (i - fi)];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            x[i] /= self.data[self.offset[i] + (i - fi)];
            let xi = x[i];
            for k in fi..i {
                x[k] -= self.data[self.offset[i] + (k - fi)] * xi;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SymSparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
        }
        SymSparseMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_accumulate_and_mirror() {
        let a = SymSparseMatrix::from_triplets(3, &[(0, 1, 2.0), (1, 0, 3.0), (2, 2, 1.0)]);
        assert_eq!(a.get_lower(1, 0), 5.0);
        assert_eq!(a.get_lower(2, 2), 1.0);
        let d = a.to_dense();
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let a = laplacian_1d(7);
        let d = a.to_dense();
        let x: Vec<f64> = (0..7).map(|i| (i as f64 * 0.7).cos()).collect();
        let y1 = a.matvec(&x);
        let y2 = d.matvec(&x);
        for (u, v) in y1.iter().zip(&y2) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn skyline_solves_laplacian() {
        let n = 40;
        let a = laplacian_1d(n);
        let f = SkylineFactor::factor(&a).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.13).sin()).collect();
        let b = a.matvec(&x_true);
        let x = f.solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn skyline_rejects_indefinite() {
        let a = SymSparseMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            SkylineFactor::factor(&a),
            Err(Error::CholeskyFailure { row: 1 })
        ));
    }

    #[test]
    fn csr_apply_and_transpose() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0)]);
        assert_eq!(m.apply(&[1.0, 10.0, 100.0]), vec![201.0, -10.0]);
        assert_eq!(m.apply_transpose(&[1.0, 1.0]), vec![1.0, -1.0, 2.0]);
    }
}
