//! One-dimensional building blocks: evaluation matrices for nodal polynomial
//! and piecewise linear bases, Gram matrices in the L2 and H1-seminorm inner
//! products, and the spectral differentiation matrix. Everything
//! higher-dimensional in this crate is a tensor product of these.

use crate::dense::DenseMatrix;
use crate::dyadic::DyadicGrid;
use crate::error::Error;
use crate::lgl::{lgl_grid, LglGrid};

/// Strictly increasing grid of at least two points.
#[derive(Debug, Clone)]
pub struct Grid1D {
    points: Vec<f64>,
}

impl Grid1D {
    pub fn new(points: Vec<f64>) -> Self {
        assert!(points.len() >= 2, "a grid needs at least two points");
        for w in points.windows(2) {
            assert!(
                w[0] < w[1] && w[0].is_finite() && w[1].is_finite(),
                "grid points must be finite and strictly increasing"
            );
        }
        Grid1D { points }
    }

    pub fn from_lgl(g: &LglGrid) -> Self {
        Grid1D::new(g.nodes.clone())
    }

    pub fn from_dyadic(g: &DyadicGrid) -> Self {
        Grid1D::new(g.coords.clone())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Affine image of the grid with [-1, 1] mapped to [a, b].
    pub fn map_affine(&self, a: f64, b: f64) -> Grid1D {
        assert!(a < b);
        Grid1D::new(
            self.points
                .iter()
                .map(|x| a + 0.5 * (x + 1.0) * (b - a))
                .collect(),
        )
    }
}

/// Barycentric weights, rescaled by the interval capacity so products stay in
/// range for degrees in the hundreds.
fn barycentric_weights(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    let capacity = (points[n - 1] - points[0]) / 4.0;
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                w[j] *= (points[j] - points[k]) / capacity;
            }
        }
        w[j] = 1.0 / w[j];
    }
    w
}

/// Evaluation matrix of the nodal Lagrange basis on `source` at the `targets`:
/// entry (i, j) is the j-th basis polynomial at target i. A target that
/// coincides with a source node gets an exact cardinal row. Applying the
/// matrix to nodal values interpolates; rows sum to one.
pub fn lagrange_eval_matrix(source: &Grid1D, targets: &[f64]) -> DenseMatrix {
    let nodes = source.points();
    let n = nodes.len();
    let w = barycentric_weights(nodes);
    let mut m = DenseMatrix::zeros(targets.len(), n);
    for (i, &t) in targets.iter().enumerate() {
        if let Some(j) = nodes.iter().position(|&x| x == t) {
            m.set(i, j, 1.0);
            continue;
        }
        let mut denom = 0.0;
        for j in 0..n {
            denom += w[j] / (t - nodes[j]);
        }
        for j in 0..n {
            m.set(i, j, w[j] / (t - nodes[j]) / denom);
        }
    }
    m
}

/// Evaluation matrix of the piecewise linear hat basis on `source` at the
/// `targets`; at most two entries per row. Targets must lie inside the grid's
/// span.
pub fn p1_eval_matrix(source: &Grid1D, targets: &[f64]) -> DenseMatrix {
    let nodes = source.points();
    let n = nodes.len();
    let mut m = DenseMatrix::zeros(targets.len(), n);
    for (i, &t) in targets.iter().enumerate() {
        assert!(
            t >= nodes[0] && t <= nodes[n - 1],
            "target {t} outside grid span [{}, {}]",
            nodes[0],
            nodes[n - 1]
        );
        if let Some(j) = nodes.iter().position(|&x| x == t) {
            m.set(i, j, 1.0);
            continue;
        }
        let j = nodes.partition_point(|&x| x < t) - 1;
        let h = nodes[j + 1] - nodes[j];
        m.set(i, j, (nodes[j + 1] - t) / h);
        m.set(i, j + 1, (t - nodes[j]) / h);
    }
    m
}

/// Gram matrix of the hat basis: the exact tridiagonal mass matrix for m = 0,
/// the exact stiffness matrix for m = 1.
pub fn gram_p1(grid: &Grid1D, m: u32) -> DenseMatrix {
    let x = grid.points();
    let n = x.len();
    let mut g = DenseMatrix::zeros(n, n);
    for e in 0..n - 1 {
        let h = x[e + 1] - x[e];
        match m {
            0 => {
                g.add_to(e, e, h / 3.0);
                g.add_to(e + 1, e + 1, h / 3.0);
                g.add_to(e, e + 1, h / 6.0);
                g.add_to(e + 1, e, h / 6.0);
            }
            1 => {
                g.add_to(e, e, 1.0 / h);
                g.add_to(e + 1, e + 1, 1.0 / h);
                g.add_to(e, e + 1, -1.0 / h);
                g.add_to(e + 1, e, -1.0 / h);
            }
            _ => panic!("m must be 0 or 1"),
        }
    }
    g
}

/// F^T F with a symmetric fill, so the result is bitwise symmetric.
fn gram_of_samples(f: &DenseMatrix) -> DenseMatrix {
    let n = f.cols;
    let mut g = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..f.rows {
                s += f.get(k, i) * f.get(k, j);
            }
            g.set(i, j, s);
            g.set(j, i, s);
        }
    }
    g
}

/// Gram matrix of the degree-p nodal Lobatto basis, exact in the L2 inner
/// product (m = 0) or the H1 seminorm (m = 1). Integration uses the Lobatto
/// rule of degree p + 2, whose exactness 2p + 3 covers products of two basis
/// functions.
pub fn gram_spectral(p: u32, m: u32) -> Result<DenseMatrix, Error> {
    let nodes = lgl_grid(p)?;
    let source = Grid1D::from_lgl(&nodes);
    let quad = lgl_grid(p + 2)?;
    let e = lagrange_eval_matrix(&source, &quad.nodes);
    let samples = match m {
        0 => e,
        1 => e.matmul(&diff_matrix(p)?),
        _ => panic!("m must be 0 or 1"),
    };
    // Fold sqrt(w) into the sample matrix, then form the Gram product.
    let mut f = samples;
    for (row, &w) in quad.weights.iter().enumerate() {
        let s = w.sqrt();
        for j in 0..f.cols {
            let v = f.get(row, j) * s;
            f.set(row, j, v);
        }
    }
    Ok(gram_of_samples(&f))
}

/// Spectral differentiation matrix on the degree-p Lobatto grid: entry (i, j)
/// is the derivative of the j-th basis polynomial at node i. Built from the
/// barycentric weights with the negative-sum trick, so rows sum to zero
/// exactly.
pub fn diff_matrix(p: u32) -> Result<DenseMatrix, Error> {
    let grid = lgl_grid(p)?;
    let x = &grid.nodes;
    let n = x.len();
    let w = barycentric_weights(x);
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if j != i {
                let v = (w[j] / w[i]) / (x[i] - x[j]);
                d.set(i, j, v);
                diag -= v;
            }
        }
        d.set(i, i, diag);
    }
    Ok(d)
}

/// Diagonal sampling matrix of the vertex shape function
/// phi_z(x) = (1 + z x) / 2 on the given grid, z in {-1, +1}.
pub fn shape_product_matrix(z: f64, grid: &Grid1D) -> DenseMatrix {
    assert!(z == 1.0 || z == -1.0, "z selects an endpoint");
    let diag: Vec<f64> = grid
        .points()
        .iter()
        .map(|&x| 0.5 * (1.0 + z * x))
        .collect();
    DenseMatrix::diagonal(&diag)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Monomial coefficients of prod (x - r) over the given roots.
    fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
        let mut c = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= r * ck;
            }
            c = next;
        }
        c
    }

    fn poly_eval(c: &[f64], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
    }

    fn poly_derivative(c: &[f64]) -> Vec<f64> {
        c.iter()
            .enumerate()
            .skip(1)
            .map(|(k, &ck)| k as f64 * ck)
            .collect()
    }

    /// Exact integral over [-1, 1] from monomial coefficients.
    fn poly_integral(c: &[f64]) -> f64 {
        c.iter()
            .enumerate()
            .map(|(k, &ck)| {
                if k % 2 == 0 {
                    2.0 * ck / (k as f64 + 1.0)
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; a.len() + b.len() - 1];
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                c[i + j] += ai * bj;
            }
        }
        c
    }

    /// Monomial coefficients of the j-th Lagrange basis polynomial.
    fn lagrange_coeffs(nodes: &[f64], j: usize) -> Vec<f64> {
        let others: Vec<f64> = nodes
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, &x)| x)
            .collect();
        let mut c = poly_from_roots(&others);
        let scale = poly_eval(&c, nodes[j]);
        for ck in &mut c {
            *ck /= scale;
        }
        c
    }

    #[test]
    fn quadratic_basis_row_at_half() {
        let grid = Grid1D::new(vec![-1.0, 0.0, 1.0]);
        let m = lagrange_eval_matrix(&grid, &[0.5]);
        assert!((m.get(0, 0) + 0.125).abs() < 1e-15);
        assert!((m.get(0, 1) - 0.75).abs() < 1e-15);
        assert!((m.get(0, 2) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn rows_sum_to_one_and_nodes_hit_exactly() {
        for p in [3, 17, 64, 200] {
            let grid = Grid1D::from_lgl(&lgl_grid(p).unwrap());
            let targets: Vec<f64> = (0..40).map(|i| -0.99 + 0.05 * i as f64).collect();
            let m = lagrange_eval_matrix(&grid, &targets);
            for i in 0..m.rows {
                let s: f64 = m.row(i).iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "p={p} row {i}: {s}");
            }
            let at_nodes = lagrange_eval_matrix(&grid, grid.points());
            for i in 0..at_nodes.rows {
                for j in 0..at_nodes.cols {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_eq!(at_nodes.get(i, j), want);
                }
            }
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        for p in [4, 16, 64] {
            let grid = Grid1D::from_lgl(&lgl_grid(p).unwrap());
            // Degree-p polynomial with O(1) coefficients.
            let values: Vec<f64> = grid
                .points()
                .iter()
                .map(|&x| (0..=p).map(|k| (x / 1.3).powi(k as i32)).sum())
                .collect();
            let targets = [-0.987, -0.5, -0.123, 0.0, 0.33, 0.777, 0.999];
            let m = lagrange_eval_matrix(&grid, &targets);
            let interp = m.matvec(&values);
            for (i, &t) in targets.iter().enumerate() {
                let exact: f64 = (0..=p).map(|k| (t / 1.3).powi(k as i32)).sum();
                assert!(
                    (interp[i] - exact).abs() < 1e-11 * exact.abs().max(1.0),
                    "p={p} t={t}: {} vs {exact}",
                    interp[i]
                );
            }
        }
    }

    #[test]
    fn hat_basis_partitions_unity() {
        let grid = Grid1D::new(vec![-1.0, -0.75, -0.5, 0.0, 0.5, 0.75, 1.0]);
        let targets = [-1.0, -0.8, -0.6, -0.2, 0.1, 0.5, 0.9, 1.0];
        let m = p1_eval_matrix(&grid, &targets);
        for i in 0..m.rows {
            let s: f64 = m.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
            let nonzero = m.row(i).iter().filter(|v| **v != 0.0).count();
            assert!(nonzero <= 2);
        }
        // Interior evaluation: -0.6 sits at 3/5 of [-0.75, -0.5].
        let j = 1;
        assert!((m.get(2, j) - 0.4).abs() < 1e-14);
        assert!((m.get(2, j + 1) - 0.6).abs() < 1e-14);
    }

    #[test]
    fn p1_gram_closed_forms_on_unit_spacing() {
        let grid = Grid1D::new(vec![-1.0, 0.0, 1.0]);
        let mass = gram_p1(&grid, 0);
        let want_mass = [
            [1.0 / 3.0, 1.0 / 6.0, 0.0],
            [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            [0.0, 1.0 / 6.0, 1.0 / 3.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((mass.get(i, j) - want_mass[i][j]).abs() < 1e-15);
            }
        }
        let stiff = gram_p1(&grid, 1);
        let want_stiff = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((stiff.get(i, j) - want_stiff[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn spectral_gram_closed_form_p2() {
        let g = gram_spectral(2, 0).unwrap();
        let want = [
            [4.0 / 15.0, 2.0 / 15.0, -1.0 / 15.0],
            [2.0 / 15.0, 16.0 / 15.0, 2.0 / 15.0],
            [-1.0 / 15.0, 2.0 / 15.0, 4.0 / 15.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (g.get(i, j) - want[i][j]).abs() < 1e-13,
                    "({i},{j}): {} vs {}",
                    g.get(i, j),
                    want[i][j]
                );
            }
        }
    }

    #[test]
    fn spectral_gram_closed_forms_p1() {
        let mass = gram_spectral(1, 0).unwrap();
        for (i, j, v) in [
            (0, 0, 2.0 / 3.0),
            (0, 1, 1.0 / 3.0),
            (1, 0, 1.0 / 3.0),
            (1, 1, 2.0 / 3.0),
        ] {
            assert!((mass.get(i, j) - v).abs() < 1e-14);
        }
        let stiff = gram_spectral(1, 1).unwrap();
        for (i, j, v) in [(0, 0, 0.5), (0, 1, -0.5), (1, 0, -0.5), (1, 1, 0.5)] {
            assert!((stiff.get(i, j) - v).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_gram_matches_symbolic_integration() {
        // Independent route: expand each basis polynomial in monomial
        // coefficients and integrate products exactly.
        for p in [1, 2, 3, 4, 5] {
            let nodes = lgl_grid(p).unwrap().nodes.clone();
            for m in [0, 1] {
                let g = gram_spectral(p, m).unwrap();
                for i in 0..nodes.len() {
                    for j in 0..nodes.len() {
                        let mut ci = lagrange_coeffs(&nodes, i);
                        let mut cj = lagrange_coeffs(&nodes, j);
                        if m == 1 {
                            ci = poly_derivative(&ci);
                            cj = poly_derivative(&cj);
                        }
                        let want = poly_integral(&poly_mul(&ci, &cj));
                        assert!(
                            (g.get(i, j) - want).abs() < 1e-12,
                            "p={p} m={m} ({i},{j}): {} vs {want}",
                            g.get(i, j)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gram_matrices_are_bitwise_symmetric() {
        for p in [3, 8, 21] {
            for m in [0, 1] {
                assert_eq!(gram_spectral(p, m).unwrap().asymmetry(), 0.0);
            }
        }
    }

    #[test]
    fn diff_matrix_rows_sum_to_zero_and_differentiate() {
        for p in [2, 8, 24, 40] {
            let d = diff_matrix(p).unwrap();
            for i in 0..d.rows {
                let s: f64 = d.row(i).iter().sum();
                let scale: f64 = d.row(i).iter().map(|v| v.abs()).sum();
                assert!(s.abs() <= 1e-13 * scale.max(1.0), "p={p} row {i}: {s}");
            }
            let grid = lgl_grid(p).unwrap();
            for k in 1..=p.min(10) {
                let values: Vec<f64> = grid.nodes.iter().map(|x| x.powi(k as i32)).collect();
                let derivs = d.matvec(&values);
                for (i, &x) in grid.nodes.iter().enumerate() {
                    let want = k as f64 * x.powi(k as i32 - 1);
                    assert!(
                        (derivs[i] - want).abs() < 1e-9 * (1.0 + want.abs()),
                        "p={p} k={k} node {i}"
                    );
                }
            }
        }
    }

    #[test]
    fn shape_product_samples_the_affine_factor() {
        let grid = Grid1D::new(vec![-1.0, 0.0, 1.0]);
        let plus = shape_product_matrix(1.0, &grid);
        assert_eq!(
            (0..3).map(|i| plus.get(i, i)).collect::<Vec<_>>(),
            vec![0.0, 0.5, 1.0]
        );
        let minus = shape_product_matrix(-1.0, &grid);
        assert_eq!(
            (0..3).map(|i| minus.get(i, i)).collect::<Vec<_>>(),
            vec![1.0, 0.5, 0.0]
        );
    }

    #[test]
    fn affine_map_keeps_relative_layout() {
        let grid = Grid1D::new(vec![-1.0, 0.0, 1.0]).map_affine(2.0, 4.0);
        assert_eq!(grid.points(), &[2.0, 3.0, 4.0]);
    }
}
