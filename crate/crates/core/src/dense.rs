//! Dense row-major matrices sized for desk-scale work. No BLAS behind this,
//! just straightforward loops; the dimensions in this crate stay small enough
//! that clarity wins.

/// Dense matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from a slice of rows; panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            entries.extend_from_slice(row);
        }
        DenseMatrix {
            rows: r,
            cols: c,
            entries,
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = DenseMatrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] += v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            let mut s = 0.0;
            for j in 0..self.cols {
                s += row[j] * x[j];
            }
            y[i] = s;
        }
        y
    }

    /// y = A^T x without forming the transpose.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            let xi = x[i];
            for j in 0..self.cols {
                y[j] += row[j] * xi;
            }
        }
        y
    }

    pub fn matmul(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, b.rows, "inner dimensions differ");
        let mut c = DenseMatrix::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                let brow = b.row(k);
                let crow = &mut c.entries[i * b.cols..(i + 1) * b.cols];
                for j in 0..b.cols {
                    crow[j] += aik * brow[j];
                }
            }
        }
        c
    }

    /// A^T B A, the congruence transform used all over the constants lab.
    pub fn congruence(&self, b: &DenseMatrix) -> DenseMatrix {
        let ba = b.matmul(self);
        self.transpose().matmul(&ba)
    }

    pub fn scale(&mut self, s: f64) {
        for e in &mut self.entries {
            *e *= s;
        }
    }

    pub fn add_scaled(&mut self, other: &DenseMatrix, s: f64) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += s * b;
        }
    }

    /// Kronecker product; index (i_a * b.rows + i_b, j_a * b.cols + j_b).
    pub fn kron(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut k = DenseMatrix::zeros(self.rows * b.rows, self.cols * b.cols);
        for ia in 0..self.rows {
            for ja in 0..self.cols {
                let a = self.get(ia, ja);
                if a == 0.0 {
                    continue;
                }
                for ib in 0..b.rows {
                    for jb in 0..b.cols {
                        k.set(ia * b.rows + ib, ja * b.cols + jb, a * b.get(ib, jb));
                    }
                }
            }
        }
        k
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// Largest absolute difference from the transpose; zero for exactly
    /// symmetric assembly.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Apply the 2D tensor operator `Ay (x) Ax` to a vector laid out x-fastest
/// (index = ix + nx * iy). Cheaper than forming the Kronecker product when
/// only the action is needed.
pub fn apply_tensor2(ax: &DenseMatrix, ay: &DenseMatrix, v: &[f64]) -> Vec<f64> {
    let (nx, ny) = (ax.cols, ay.cols);
    assert_eq!(v.len(), nx * ny);
    let (mx, my) = (ax.rows, ay.rows);
    // First contract x within each y-row, then contract y.
    let mut tmp = vec![0.0; mx * ny];
    for iy in 0..ny {
        let src = &v[iy * nx..(iy + 1) * nx];
        let dst = &mut tmp[iy * mx..(iy + 1) * mx];
        for (i, d) in dst.iter_mut().enumerate() {
            let row = ax.row(i);
            let mut s = 0.0;
            for j in 0..nx {
                s += row[j] * src[j];
            }
            *d = s;
        }
    }
    let mut out = vec![0.0; mx * my];
    for i in 0..my {
        let row = ay.row(i);
        let dst = &mut out[i * mx..(i + 1) * mx];
        for j in 0..ny {
            let a = row[j];
            if a == 0.0 {
                continue;
            }
            let src = &tmp[j * mx..(j + 1) * mx];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }
    out
}
