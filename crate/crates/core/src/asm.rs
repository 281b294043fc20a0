//! Additive two-stage preconditioner for the penalized DG system.
//!
//! The outer stage pairs a diagonal smoother built from tensor quadrature
//! weights with a correction in the conforming spectral-element subspace.
//! The subspace solve is itself replaced by an additive pair: a cheap
//! auxiliary form handled by a direct sparse factorization, plus a vertex
//! decomposition that lands in the piecewise-linear dyadic space, where the
//! final solve is either exact or a short diagonally preconditioned CG run.
//! Every layer is symmetric, so the whole stack is again a valid CG
//! preconditioner.

use crate::dense::{apply_tensor2, DenseMatrix};
use crate::dfe::{assemble_dfe_stiffness, dfe_map, push_expanded, DfeMap};
use crate::dyadic::DEFAULT_ALPHA;
use crate::error::Error;
use crate::krylov::{pcg, DiagonalOp, SymOp};
use crate::lgl::lgl_grid;
use crate::mesh::{check_grading, RectMesh};
use crate::operators::{lagrange_eval_matrix, p1_eval_matrix, shape_product_matrix, Grid1D};
use crate::sipg::{
    assemble_cg_sem, cg_dof_map, penalty_weight, CgDofMap, DgDofMap, PenaltyConfig,
};
use crate::sparse::{CsrMatrix, SkylineFactor, SymSparseMatrix};
use crate::util::unravel;

/// Scaling knobs of the diagonal smoother.
#[derive(Debug, Clone)]
pub struct SmootherConfig {
    pub beta1: f64,
    pub c1: f64,
    pub rho1: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig {
            beta1: 1.0,
            c1: 1.0,
            rho1: 1.0,
        }
    }
}

/// Diagonal smoother weights, one per DG dof.
///
/// Each node gets an inverse-breadth volume term built from its tensor
/// quadrature weights; nodes in the closure of a face additionally collect
/// that face's jump penalty scaled by the tangential weights, so the
/// smoother dominates both parts of the DG form diagonal.
pub fn stage1_smoother(
    mesh: &RectMesh,
    dofs: &DgDofMap,
    smoother: &SmootherConfig,
    penalty: &PenaltyConfig,
) -> Result<Vec<f64>, Error> {
    let d = mesh.dim;
    let volume_scale = smoother.beta1 * smoother.c1 * smoother.c1;
    let jump_scale = smoother.beta1 * penalty.gamma * smoother.rho1;
    let mut b = vec![0.0; dofs.total];
    for (c, cell) in mesh.cells.iter().enumerate() {
        let base = dofs.offsets[c];
        let weights: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let rule = lgl_grid(cell.degrees[k])?;
                Ok(rule
                    .weights
                    .iter()
                    .map(|w| w * cell.sides[k] / 2.0)
                    .collect())
            })
            .collect::<Result<_, Error>>()?;
        let shape: Vec<usize> = weights.iter().map(|w| w.len()).collect();
        let nloc: usize = shape.iter().product();
        for local in 0..nloc {
            let idx = unravel(local, &shape);
            let prod: f64 = (0..d).map(|k| weights[k][idx[k]]).product();
            let inv_sq: f64 = (0..d).map(|k| weights[k][idx[k]].powi(-2)).sum();
            b[base + local] = volume_scale * inv_sq * prod;
        }
        for &fi in &mesh.cell_faces[c] {
            let face = &mesh.faces[fi];
            let k = face.direction;
            let end = if face.minus == Some(c) {
                shape[k] - 1
            } else {
                0
            };
            let omega = penalty_weight(face, mesh);
            if d == 1 {
                b[base + end] += jump_scale * omega;
            } else {
                let t = 1 - k;
                for (it, &wt) in weights[t].iter().enumerate() {
                    let local = if k == 0 {
                        it * shape[0] + end
                    } else {
                        end * shape[0] + it
                    };
                    b[base + local] += jump_scale * omega * wt;
                }
            }
        }
    }
    Ok(b)
}

/// Physical side lengths of the tensor subcells cut out by each cell's
/// Lobatto nodes, per cell and direction.
fn lgl_subcell_lengths(mesh: &RectMesh) -> Result<Vec<Vec<Vec<f64>>>, Error> {
    mesh.cells
        .iter()
        .map(|cell| {
            (0..mesh.dim)
                .map(|k| {
                    let grid = lgl_grid(cell.degrees[k])?;
                    Ok(grid
                        .interval_lengths()
                        .iter()
                        .map(|l| l * cell.sides[k] / 2.0)
                        .collect())
                })
                .collect()
        })
        .collect()
}

/// Per cell and Lobatto subcell: which directions see the subcell as a thin
/// slab. A subcell is flagged for direction k when some other side exceeds
/// its k-side by more than `c_aspect`; in one dimension nothing is ever
/// flagged, and no subcell is flagged in every direction at once.
pub fn classify_cells(mesh: &RectMesh, c_aspect: f64) -> Result<Vec<Vec<Vec<bool>>>, Error> {
    let d = mesh.dim;
    let all_lengths = lgl_subcell_lengths(mesh)?;
    Ok(all_lengths
        .iter()
        .map(|lengths| {
            let counts: Vec<usize> = lengths.iter().map(|l| l.len()).collect();
            let nsub: usize = counts.iter().product();
            (0..nsub)
                .map(|s| {
                    let idx = unravel(s, &counts);
                    let h: Vec<f64> = (0..d).map(|k| lengths[k][idx[k]]).collect();
                    (0..d)
                        .map(|k| {
                            let other = (0..d)
                                .filter(|&l| l != k)
                                .map(|l| h[l])
                                .fold(0.0, f64::max);
                            other > c_aspect * h[k]
                        })
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Middle smoother of the conforming correction: acts on conforming
/// coefficients through the piecewise multilinear interpolant on Lobatto
/// subcells. Per subcell and direction an inverse-squared-size mass term,
/// except that slab directions keep only the exact directional derivative
/// with trapezoid coupling across the slab, which stays bounded on thin
/// subcells.
pub fn stage2_bform(
    mesh: &RectMesh,
    cg: &CgDofMap,
    c_aspect: f64,
) -> Result<SymSparseMatrix, Error> {
    let d = mesh.dim;
    let classes = classify_cells(mesh, c_aspect)?;
    let all_lengths = lgl_subcell_lengths(mesh)?;
    let mut triplets = Vec::new();
    for (c, cell) in mesh.cells.iter().enumerate() {
        let cell_rows = &cg.rows[c];
        let lengths = &all_lengths[c];
        let nx = cell.degrees[0] as usize + 1;
        if d == 1 {
            for (i, &h) in lengths[0].iter().enumerate() {
                let scale = h.powi(-2) * h / 6.0;
                let corners = [i, i + 1];
                let mass = [[2.0, 1.0], [1.0, 2.0]];
                for (a, &la) in corners.iter().enumerate() {
                    for (b, &lb) in corners.iter().enumerate() {
                        push_expanded(&mut triplets, cell_rows, la, lb, scale * mass[a][b]);
                    }
                }
            }
        } else {
            let counts = [lengths[0].len(), lengths[1].len()];
            for jy in 0..counts[1] {
                for jx in 0..counts[0] {
                    let (hx, hy) = (lengths[0][jx], lengths[1][jy]);
                    let aniso = &classes[c][jy * counts[0] + jx];
                    let corners = [
                        jy * nx + jx,
                        jy * nx + jx + 1,
                        (jy + 1) * nx + jx,
                        (jy + 1) * nx + jx + 1,
                    ];
                    let mut local = DenseMatrix::zeros(4, 4);
                    for k in 0..2 {
                        if !aniso[k] {
                            let hk = if k == 0 { hx } else { hy };
                            let scale = hk.powi(-2) * hx * hy / 36.0;
                            let mass = [
                                [4.0, 2.0, 2.0, 1.0],
                                [2.0, 4.0, 1.0, 2.0],
                                [2.0, 1.0, 4.0, 2.0],
                                [1.0, 2.0, 2.0, 4.0],
                            ];
                            for a in 0..4 {
                                for b in 0..4 {
                                    local.add_to(a, b, scale * mass[a][b]);
                                }
                            }
                        } else {
                            let (coef, pairs) = if k == 0 {
                                (hy / (2.0 * hx), [[0usize, 1usize], [2, 3]])
                            } else {
                                (hx / (2.0 * hy), [[0, 2], [1, 3]])
                            };
                            for pair in pairs {
                                let mut diff = [0.0; 4];
                                diff[pair[0]] = -1.0;
                                diff[pair[1]] = 1.0;
                                for a in 0..4 {
                                    for b in 0..4 {
                                        local.add_to(a, b, coef * diff[a] * diff[b]);
                                    }
                                }
                            }
                        }
                    }
                    for a in 0..4 {
                        for b in 0..4 {
                            push_expanded(
                                &mut triplets,
                                cell_rows,
                                corners[a],
                                corners[b],
                                local.get(a, b),
                            );
                        }
                    }
                }
            }
        }
    }
    Ok(SymSparseMatrix::from_triplets(cg.total, &triplets))
}

/// Rectangular operator between two dof spaces.
pub trait Transfer {
    /// (output dimension, input dimension).
    fn dims(&self) -> (usize, usize);
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64>;
}

impl Transfer for CsrMatrix {
    fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        CsrMatrix::apply(self, x)
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        CsrMatrix::apply_transpose(self, y)
    }
}

/// Vertex-decomposition transfer from the dyadic space into the conforming
/// spectral-element space.
///
/// Each cell splits its contribution over its corners. For corner z the
/// one-dimensional chain first re-reads the cell's piecewise-linear data on
/// the coarsest dyadic grid among the cells sharing z, multiplies by the
/// hat-function factor tied to z, then interpolates the result at the
/// Lobatto nodes of the shared minimal degree before re-expanding at the
/// cell's own degree. Sharing cells build identical traces, which keeps the
/// summed image continuous; the proof of that is exercised by the tests
/// rather than assumed.
pub struct VertexTransfer {
    dfe: DfeMap,
    cg: CgDofMap,
    dg_shapes: Vec<usize>,
    /// Per cell and corner: one factor matrix per direction.
    cell_terms: Vec<Vec<Vec<DenseMatrix>>>,
}

impl VertexTransfer {
    pub fn new(
        mesh: &RectMesh,
        dirichlet: bool,
        alpha: f64,
        max_ratio: f64,
    ) -> Result<Self, Error> {
        let report = check_grading(mesh, max_ratio);
        if !report.passes() {
            return Err(Error::Grading {
                faces: report.violations,
            });
        }
        let dfe = dfe_map(mesh, dirichlet, alpha)?;
        let cg = cg_dof_map(mesh, dirichlet)?;
        let d = mesh.dim;

        let mut cell_terms = Vec::with_capacity(mesh.cells.len());
        for (c, cell) in mesh.cells.iter().enumerate() {
            let mut terms = Vec::new();
            for bits in 0..(1usize << d) {
                let corner = cell.corner(bits);
                let vi = mesh
                    .vertex_at(&corner)
                    .expect("cell corner is a mesh vertex");
                let sharing = &mesh.vertices[vi].cells;
                let mut factors = Vec::with_capacity(d);
                for l in 0..d {
                    let z = if bits >> l & 1 == 1 { 1.0 } else { -1.0 };
                    let p_cell = cell.degrees[l];
                    let p_star = sharing
                        .iter()
                        .map(|&s| mesh.cells[s].degrees[l])
                        .min()
                        .unwrap();
                    let d_cell = Grid1D::from_dyadic(&dfe.cell_grids[c][l]);
                    let d_star = crate::dyadic::dyadic_grid(p_star, alpha)?;
                    let star_grid = Grid1D::from_dyadic(&d_star);
                    let read = p1_eval_matrix(&d_cell, &d_star.coords);
                    let hat = shape_product_matrix(z, &star_grid);
                    let nodes_star = lgl_grid(p_star)?;
                    let to_nodes = p1_eval_matrix(&star_grid, &nodes_star.nodes);
                    let lift = lagrange_eval_matrix(
                        &Grid1D::from_lgl(&nodes_star),
                        &lgl_grid(p_cell)?.nodes,
                    );
                    factors.push(lift.matmul(&to_nodes.matmul(&hat.matmul(&read))));
                }
                terms.push(factors);
            }
            cell_terms.push(terms);
        }

        let dg_shapes = mesh
            .cells
            .iter()
            .map(|cell| {
                cell.degrees
                    .iter()
                    .map(|&p| p as usize + 1)
                    .product::<usize>()
            })
            .collect();
        Ok(VertexTransfer {
            dfe,
            cg,
            dg_shapes,
            cell_terms,
        })
    }

    pub fn dfe(&self) -> &DfeMap {
        &self.dfe
    }

    pub fn cg(&self) -> &CgDofMap {
        &self.cg
    }

    /// Per-cell nodal images of a dyadic coefficient vector, before the
    /// continuous coefficients are read off.
    pub fn cell_images(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let values = self.dfe.expand(x);
        self.cell_terms
            .iter()
            .zip(&values)
            .zip(&self.dg_shapes)
            .map(|((terms, v), &n)| {
                let mut out = vec![0.0; n];
                for factors in terms {
                    let img = match factors.len() {
                        1 => factors[0].matvec(v),
                        _ => apply_tensor2(&factors[0], &factors[1], v),
                    };
                    for (o, i) in out.iter_mut().zip(&img) {
                        *o += i;
                    }
                }
                out
            })
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let (rows, cols) = self.dims();
        let mut m = DenseMatrix::zeros(rows, cols);
        for j in 0..cols {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            let col = Transfer::apply(self, &e);
            for i in 0..rows {
                m.set(i, j, col[i]);
            }
        }
        m
    }
}

impl Transfer for VertexTransfer {
    fn dims(&self) -> (usize, usize) {
        (self.cg.total, self.dfe.total)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.cg.extract(&self.cell_images(x))
    }

    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let spread = self.cg.extract_transpose(y, &self.dg_shapes);
        let back: Vec<Vec<f64>> = self
            .cell_terms
            .iter()
            .zip(&spread)
            .enumerate()
            .map(|(c, (terms, w))| {
                let n = self.dfe.cell_node_count(c);
                let mut out = vec![0.0; n];
                for factors in terms {
                    let img = match factors.len() {
                        1 => factors[0].matvec_transpose(w),
                        _ => {
                            let tx = factors[0].transpose();
                            let ty = factors[1].transpose();
                            apply_tensor2(&tx, &ty, w)
                        }
                    };
                    for (o, i) in out.iter_mut().zip(&img) {
                        *o += i;
                    }
                }
                out
            })
            .collect();
        self.dfe.expand_transpose(&back)
    }
}

/// Direct solve with a precomputed factorization, viewed as an operator.
pub struct SkylineSolveOp(pub SkylineFactor);

impl SymOp for SkylineSolveOp {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.solve(x)
    }
}

/// Innermost realization of the dyadic-space solve.
pub enum InnerSolver {
    Exact(SkylineFactor),
    Iterative {
        a: SymSparseMatrix,
        precond: DiagonalOp,
        tol: f64,
        max_iter: usize,
    },
}

impl SymOp for InnerSolver {
    fn dim(&self) -> usize {
        match self {
            InnerSolver::Exact(f) => f.dim(),
            InnerSolver::Iterative { a, .. } => a.n,
        }
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            InnerSolver::Exact(f) => f.solve(x),
            InnerSolver::Iterative {
                a,
                precond,
                tol,
                max_iter,
            } => match pcg(a, precond, x, *tol, *max_iter) {
                Ok((sol, _)) => sol,
                Err(Error::MaxIterReached { solution, .. }) => solution,
                Err(e) => panic!("inner solve failed: {e}"),
            },
        }
    }
}

/// One additive layer: a smoother plus a transferred inner correction.
pub struct PrecondStack {
    smoother: Box<dyn SymOp>,
    transfer: Box<dyn Transfer>,
    inner: Box<dyn SymOp>,
}

impl PrecondStack {
    pub fn new(
        smoother: Box<dyn SymOp>,
        transfer: Box<dyn Transfer>,
        inner: Box<dyn SymOp>,
    ) -> Self {
        let (out_dim, in_dim) = transfer.dims();
        assert_eq!(smoother.dim(), out_dim);
        assert_eq!(inner.dim(), in_dim);
        PrecondStack {
            smoother,
            transfer,
            inner,
        }
    }
}

impl SymOp for PrecondStack {
    fn dim(&self) -> usize {
        self.smoother.dim()
    }
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut out = self.smoother.apply(r);
        let restricted = self.transfer.apply_transpose(r);
        let corrected = self.inner.apply(&restricted);
        let lifted = self.transfer.apply(&corrected);
        for (o, l) in out.iter_mut().zip(&lifted) {
            *o += l;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub enum InnerKind {
    Exact,
    Iterative { tol: f64, max_iter: usize },
}

#[derive(Debug, Clone)]
pub struct PrecondConfig {
    pub penalty: PenaltyConfig,
    pub smoother: SmootherConfig,
    pub c_aspect: f64,
    pub alpha: f64,
    /// When false, stop after the conforming correction and solve it exactly.
    pub two_stage: bool,
    pub inner: InnerKind,
}

impl Default for PrecondConfig {
    fn default() -> Self {
        PrecondConfig {
            penalty: PenaltyConfig::default(),
            smoother: SmootherConfig::default(),
            c_aspect: 10.0,
            alpha: DEFAULT_ALPHA,
            two_stage: true,
            inner: InnerKind::Exact,
        }
    }
}

/// Build the full preconditioner for the DG system on this mesh.
pub fn compose_preconditioner(
    mesh: &RectMesh,
    config: &PrecondConfig,
) -> Result<(PrecondStack, DgDofMap), Error> {
    let dg = DgDofMap::new(mesh);
    let b1 = stage1_smoother(mesh, &dg, &config.smoother, &config.penalty)?;
    let smoother = DiagonalOp(b1.iter().map(|v| 1.0 / v).collect());
    let cg = cg_dof_map(mesh, true)?;
    let injection = cg.injection_matrix(&dg);

    let inner: Box<dyn SymOp> = if !config.two_stage {
        let (a_cg, _) = assemble_cg_sem(mesh, true)?;
        Box::new(SkylineSolveOp(SkylineFactor::factor(&a_cg)?))
    } else {
        let transfer =
            VertexTransfer::new(mesh, true, config.alpha, config.penalty.max_ratio)?;
        let b2 = stage2_bform(mesh, transfer.cg(), config.c_aspect)?;
        let b2_solve = SkylineSolveOp(SkylineFactor::factor(&b2)?);
        let a_dyadic = assemble_dfe_stiffness(mesh, transfer.dfe())?;
        let innermost: Box<dyn SymOp> = match config.inner {
            InnerKind::Exact => Box::new(InnerSolver::Exact(SkylineFactor::factor(&a_dyadic)?)),
            InnerKind::Iterative { tol, max_iter } => {
                let precond =
                    DiagonalOp(a_dyadic.diagonal().iter().map(|v| 1.0 / v).collect());
                Box::new(InnerSolver::Iterative {
                    a: a_dyadic,
                    precond,
                    tol,
                    max_iter,
                })
            }
        };
        Box::new(PrecondStack::new(
            Box::new(b2_solve),
            Box::new(transfer),
            innermost,
        ))
    };

    Ok((
        PrecondStack::new(Box::new(smoother), Box::new(injection), inner),
        dg,
    ))
}
