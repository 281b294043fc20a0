//! Interior-penalty DG assembly on rectangle meshes with tensor Lobatto
//! bases, plus the conforming spectral-element system on the largest
//! continuous subspace and the injection between the two.
//!
//! All integrals are evaluated with one-dimensional Lobatto rules of degree
//! p + 2 per direction, which are exact for every integrand appearing here;
//! the DG and conforming forms therefore agree to roundoff on continuous
//! inputs.

use std::ops::Range;

use crate::dense::{apply_tensor2, DenseMatrix};
use crate::error::Error;
use crate::lgl::lgl_grid;
use crate::mesh::{check_grading, Face, RectCell, RectMesh};
use crate::operators::{diff_matrix, gram_spectral, lagrange_eval_matrix, Grid1D};
use crate::sparse::{CsrMatrix, SymSparseMatrix};
use crate::util::unravel;

/// Penalty and grading parameters for the DG form.
#[derive(Debug, Clone)]
pub struct PenaltyConfig {
    pub gamma: f64,
    /// Grading bound checked before assembly.
    pub max_ratio: f64,
    /// When false, grading violations are tolerated instead of fatal.
    pub enforce_grading: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            gamma: 3.0,
            max_ratio: 2.0,
            enforce_grading: true,
        }
    }
}

impl PenaltyConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        assert!(gamma > 0.0);
        PenaltyConfig {
            gamma,
            ..PenaltyConfig::default()
        }
    }
}

/// Discontinuous dof layout: one block of tensor nodal values per cell,
/// x-fastest within the block.
#[derive(Debug, Clone)]
pub struct DgDofMap {
    pub offsets: Vec<usize>,
    pub total: usize,
}

impl DgDofMap {
    pub fn new(mesh: &RectMesh) -> Self {
        let mut offsets = Vec::with_capacity(mesh.cells.len() + 1);
        let mut total = 0;
        for cell in &mesh.cells {
            offsets.push(total);
            total += cell.degrees.iter().map(|&p| p as usize + 1).product::<usize>();
        }
        offsets.push(total);
        DgDofMap { offsets, total }
    }

    pub fn cell_range(&self, c: usize) -> Range<usize> {
        self.offsets[c]..self.offsets[c + 1]
    }

    pub fn cell_len(&self, c: usize) -> usize {
        self.offsets[c + 1] - self.offsets[c]
    }
}

/// Number of nodes per direction of a cell.
pub fn cell_shape(cell: &RectCell) -> Vec<usize> {
    cell.degrees.iter().map(|&p| p as usize + 1).collect()
}

/// Jump penalty weight of a face: the larger of p_k(p_k+1)/H_k over the
/// adjacent cells, k the face-normal direction.
pub fn penalty_weight(face: &Face, mesh: &RectMesh) -> f64 {
    let k = face.direction;
    [face.minus, face.plus]
        .into_iter()
        .flatten()
        .map(|c| {
            let cell = &mesh.cells[c];
            let p = cell.degrees[k] as f64;
            p * (p + 1.0) / cell.sides[k]
        })
        .fold(0.0, f64::max)
}

/// Exact cell stiffness of the gradient form in the tensor nodal basis.
pub fn cell_volume_matrix(cell: &RectCell) -> Result<DenseMatrix, Error> {
    match cell.dim() {
        1 => {
            let mut k = gram_spectral(cell.degrees[0], 1)?;
            k.scale(2.0 / cell.sides[0]);
            Ok(k)
        }
        2 => {
            let (px, py) = (cell.degrees[0], cell.degrees[1]);
            let (hx, hy) = (cell.sides[0], cell.sides[1]);
            let mut kx = gram_spectral(px, 1)?;
            kx.scale(2.0 / hx);
            let mut mx = gram_spectral(px, 0)?;
            mx.scale(hx / 2.0);
            let mut ky = gram_spectral(py, 1)?;
            ky.scale(2.0 / hy);
            let mut my = gram_spectral(py, 0)?;
            my.scale(hy / 2.0);
            let mut a = my.kron(&kx);
            a.add_scaled(&ky.kron(&mx), 1.0);
            Ok(a)
        }
        d => panic!("unsupported dimension {d}"),
    }
}

struct FaceSide {
    cell: usize,
    jump_sign: f64,
    /// Multiplies the reference derivative row: average factor times the
    /// normal component times the chain-rule scale 2/H_k.
    normal_coeff: f64,
    /// Nodal index along the normal direction lying on the face.
    normal_end: usize,
    /// Lagrange derivative row at the face coordinate, one entry per normal
    /// node.
    deriv_row: Vec<f64>,
    /// Tangential trace values at the quadrature points (nq rows); a single
    /// 1 in one dimension.
    trace: DenseMatrix,
}

/// Dense symmetric face block over the stacked dofs of the adjacent cells,
/// together with the stacked global indices.
fn face_block(
    mesh: &RectMesh,
    face: &Face,
    gamma: f64,
    dofs: &DgDofMap,
) -> Result<(Vec<usize>, DenseMatrix), Error> {
    let k = face.direction;
    let d = mesh.dim;
    let avg = if face.is_interior() { 0.5 } else { 1.0 };
    let omega = penalty_weight(face, mesh);

    // (cell, jump sign, outward-normal sign, face coordinate in the cell's
    // reference interval). The normal points from the minus to the plus cell;
    // on the boundary it points outward.
    let mut raw: Vec<(usize, f64, f64, f64)> = Vec::new();
    if let Some(c) = face.minus {
        raw.push((c, 1.0, 1.0, 1.0));
    }
    if let Some(c) = face.plus {
        let (jump, normal) = if face.is_interior() {
            (-1.0, 1.0)
        } else {
            (1.0, -1.0)
        };
        raw.push((c, jump, normal, -1.0));
    }

    // Face quadrature: tangential Lobatto rule exact for every trace product.
    let (quad_nodes, quad_weights): (Vec<f64>, Vec<f64>) = if d == 1 {
        (vec![0.0], vec![1.0])
    } else {
        let t = 1 - k;
        let qdeg = raw
            .iter()
            .map(|&(c, ..)| mesh.cells[c].degrees[t])
            .max()
            .unwrap()
            + 2;
        let rule = lgl_grid(qdeg)?;
        let half = 0.5 * (face.span[0].1 - face.span[0].0);
        (
            rule.nodes.clone(),
            rule.weights.iter().map(|w| w * half).collect(),
        )
    };
    let nq = quad_nodes.len();

    let mut sides = Vec::new();
    for &(c, jump_sign, normal_sign, ref_coord) in &raw {
        let cell = &mesh.cells[c];
        let pk = cell.degrees[k];
        let dmat = diff_matrix(pk)?;
        let end = if ref_coord > 0.0 { pk as usize } else { 0 };
        let deriv_row = dmat.row(end).to_vec();
        let trace = if d == 1 {
            DenseMatrix::from_rows(&[vec![1.0]])
        } else {
            let t = 1 - k;
            let tangential = lgl_grid(cell.degrees[t])?;
            let tg = Grid1D::from_lgl(&tangential);
            lagrange_eval_matrix(&tg, &quad_nodes)
        };
        sides.push(FaceSide {
            cell: c,
            jump_sign,
            normal_coeff: avg * normal_sign * 2.0 / cell.sides[k],
            normal_end: end,
            deriv_row,
            trace,
        });
    }

    let side_offsets: Vec<usize> = {
        let mut off = vec![0];
        for s in &sides {
            off.push(off.last().unwrap() + dofs.cell_len(s.cell));
        }
        off
    };
    let ntot = *side_offsets.last().unwrap();
    let mut gdofs = Vec::with_capacity(ntot);
    for s in &sides {
        gdofs.extend(dofs.cell_range(s.cell));
    }

    // Stacked index of the node with normal index ik and tangential index it.
    let local = |cell: &RectCell, ik: usize, it: usize| -> usize {
        if d == 1 {
            ik
        } else if k == 0 {
            it * (cell.degrees[0] as usize + 1) + ik
        } else {
            ik * (cell.degrees[0] as usize + 1) + it
        }
    };

    let mut f = DenseMatrix::zeros(ntot, ntot);
    let mut grad = vec![0.0; ntot];
    let mut jump: Vec<(usize, f64)> = Vec::new();
    for q in 0..nq {
        let w = quad_weights[q];
        grad.iter_mut().for_each(|g| *g = 0.0);
        jump.clear();
        for (si, s) in sides.iter().enumerate() {
            let cell = &mesh.cells[s.cell];
            let ntang = s.trace.cols;
            for it in 0..ntang {
                let tv = s.trace.get(q, it);
                jump.push((
                    side_offsets[si] + local(cell, s.normal_end, it),
                    s.jump_sign * tv,
                ));
                for (ik, &dv) in s.deriv_row.iter().enumerate() {
                    grad[side_offsets[si] + local(cell, ik, it)] += s.normal_coeff * dv * tv;
                }
            }
        }
        for &(e, jv) in &jump {
            let c = w * jv;
            for (a, &gv) in grad.iter().enumerate() {
                let v = -c * gv;
                f.add_to(a, e, v);
                f.add_to(e, a, v);
            }
            for &(e2, jv2) in &jump {
                f.add_to(e, e2, gamma * omega * c * jv2);
            }
        }
    }
    Ok((gdofs, f))
}

/// Assemble the penalized DG system over the discontinuous dof map.
pub fn assemble_sipg(
    mesh: &RectMesh,
    config: &PenaltyConfig,
) -> Result<(SymSparseMatrix, DgDofMap), Error> {
    assert!(config.gamma > 0.0);
    if config.enforce_grading {
        let report = check_grading(mesh, config.max_ratio);
        if !report.passes() {
            return Err(Error::Grading {
                faces: report.violations,
            });
        }
    }
    let dofs = DgDofMap::new(mesh);
    let mut triplets = Vec::new();
    for (c, cell) in mesh.cells.iter().enumerate() {
        let a = cell_volume_matrix(cell)?;
        let base = dofs.offsets[c];
        for i in 0..a.rows {
            for j in 0..=i {
                let v = a.get(i, j);
                if v != 0.0 {
                    triplets.push((base + i, base + j, v));
                }
            }
        }
    }
    for face in &mesh.faces {
        let (gdofs, f) = face_block(mesh, face, config.gamma, &dofs)?;
        for i in 0..f.rows {
            for j in 0..=i {
                let v = f.get(i, j);
                if v != 0.0 {
                    triplets.push((gdofs[i], gdofs[j], v));
                }
            }
        }
    }
    let a = SymSparseMatrix::from_triplets(dofs.total, &triplets);
    Ok((a, dofs))
}

/// Cell-wise load vector with the same quadrature as the stiffness.
pub fn assemble_load(
    mesh: &RectMesh,
    dofs: &DgDofMap,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<Vec<f64>, Error> {
    Ok(quadrature_accumulate(mesh, dofs, f, 2, QuadTarget::Load)?.into_vector())
}

/// L2 distance between the DG function and a smooth reference, with a rule
/// comfortably past exactness for the polynomial part.
pub fn l2_error(
    mesh: &RectMesh,
    dofs: &DgDofMap,
    u: &[f64],
    exact: &dyn Fn(&[f64]) -> f64,
) -> Result<f64, Error> {
    assert_eq!(u.len(), dofs.total);
    if let QuadResult::Scalar(e2) =
        quadrature_accumulate(mesh, dofs, exact, 6, QuadTarget::ErrorSq(u))?
    {
        Ok(e2.sqrt())
    } else {
        unreachable!()
    }
}

enum QuadTarget<'a> {
    Load,
    ErrorSq(&'a [f64]),
}

enum QuadResult {
    Vector(Vec<f64>),
    Scalar(f64),
}

fn quadrature_accumulate(
    mesh: &RectMesh,
    dofs: &DgDofMap,
    f: &dyn Fn(&[f64]) -> f64,
    extra_degree: u32,
    target: QuadTarget,
) -> Result<QuadResult, Error> {
    let mut load = vec![0.0; dofs.total];
    let mut err2 = 0.0;
    for (c, cell) in mesh.cells.iter().enumerate() {
        let d = cell.dim();
        let rules: Vec<_> = (0..d)
            .map(|k| lgl_grid(cell.degrees[k] + extra_degree))
            .collect::<Result<_, _>>()?;
        let evals: Vec<DenseMatrix> = (0..d)
            .map(|k| {
                let nodes = lgl_grid(cell.degrees[k])?;
                let g = Grid1D::from_lgl(&nodes);
                Ok(lagrange_eval_matrix(&g, &rules[k].nodes))
            })
            .collect::<Result<_, Error>>()?;
        let base = dofs.offsets[c];
        let cell_vals = match &target {
            QuadTarget::ErrorSq(u) => {
                let vals = &u[dofs.cell_range(c)];
                if d == 1 {
                    evals[0].matvec(vals)
                } else {
                    apply_tensor2(&evals[0], &evals[1], vals)
                }
            }
            QuadTarget::Load => Vec::new(),
        };
        if d == 1 {
            let h2 = cell.sides[0] / 2.0;
            for (q, &xi) in rules[0].nodes.iter().enumerate() {
                let x = cell.origin[0] + h2 * (xi + 1.0);
                let w = rules[0].weights[q] * h2;
                let fx = f(&[x]);
                match &target {
                    QuadTarget::Load => {
                        for j in 0..evals[0].cols {
                            load[base + j] += w * fx * evals[0].get(q, j);
                        }
                    }
                    QuadTarget::ErrorSq(_) => {
                        let diff = cell_vals[q] - fx;
                        err2 += w * diff * diff;
                    }
                }
            }
        } else {
            let (hx2, hy2) = (cell.sides[0] / 2.0, cell.sides[1] / 2.0);
            let (nqx, nx) = (evals[0].rows, evals[0].cols);
            for (qy, &eta) in rules[1].nodes.iter().enumerate() {
                let y = cell.origin[1] + hy2 * (eta + 1.0);
                let wy = rules[1].weights[qy] * hy2;
                for (qx, &xi) in rules[0].nodes.iter().enumerate() {
                    let x = cell.origin[0] + hx2 * (xi + 1.0);
                    let w = wy * rules[0].weights[qx] * hx2;
                    let fx = f(&[x, y]);
                    match &target {
                        QuadTarget::Load => {
                            for jy in 0..evals[1].cols {
                                let ey = evals[1].get(qy, jy);
                                if ey == 0.0 {
                                    continue;
                                }
                                for jx in 0..nx {
                                    load[base + jy * nx + jx] +=
                                        w * fx * ey * evals[0].get(qx, jx);
                                }
                            }
                        }
                        QuadTarget::ErrorSq(_) => {
                            let diff = cell_vals[qy * nqx + qx] - fx;
                            err2 += w * diff * diff;
                        }
                    }
                }
            }
        }
    }
    Ok(match target {
        QuadTarget::Load => QuadResult::Vector(load),
        QuadTarget::ErrorSq(_) => QuadResult::Scalar(err2),
    })
}

impl QuadResult {
    fn into_vector(self) -> Vec<f64> {
        match self {
            QuadResult::Vector(v) => v,
            QuadResult::Scalar(_) => unreachable!(),
        }
    }
}

/// Evaluate a DG vector inside one cell at a physical point.
pub fn eval_dg(mesh: &RectMesh, dofs: &DgDofMap, u: &[f64], cell: usize, x: &[f64]) -> f64 {
    let c = &mesh.cells[cell];
    let vals = &u[dofs.cell_range(cell)];
    let rows: Vec<DenseMatrix> = (0..c.dim())
        .map(|k| {
            let g = Grid1D::from_lgl(&lgl_grid(c.degrees[k]).expect("grid"));
            let xi = 2.0 * (x[k] - c.origin[k]) / c.sides[k] - 1.0;
            lagrange_eval_matrix(&g, &[xi])
        })
        .collect();
    if c.dim() == 1 {
        rows[0].matvec(vals)[0]
    } else {
        apply_tensor2(&rows[0], &rows[1], vals)[0]
    }
}

/// Product of sin(pi x_k) over the directions: zero on the unit-box boundary.
pub fn sin_product(x: &[f64]) -> f64 {
    x.iter().map(|&v| (std::f64::consts::PI * v).sin()).product()
}

/// Negative Laplacian of `sin_product`.
pub fn sin_product_load(x: &[f64]) -> f64 {
    let pi = std::f64::consts::PI;
    x.len() as f64 * pi * pi * sin_product(x)
}

/// Continuous dof layout: free vertices, then trace-interior face nodes at
/// the minimum tangential degree of the adjacent cells, then cell interiors.
#[derive(Debug, Clone)]
pub struct CgDofMap {
    pub total: usize,
    pub dirichlet: bool,
    /// Expansion of each cell-local nodal value in continuous coefficients.
    pub rows: Vec<Vec<Vec<(usize, f64)>>>,
    /// Dof of each mesh vertex; None when eliminated.
    pub vertex_dof: Vec<Option<usize>>,
    /// Trace-interior dofs per face, ascending in the tangential direction.
    pub face_dofs: Vec<Vec<usize>>,
    /// Tangential trace degree per face (minimum rule); 0 in one dimension.
    pub face_degree: Vec<u32>,
    /// Owner-cell evaluation rule recovering each coefficient from cell
    /// nodal values.
    pub extraction: Vec<(usize, Vec<(usize, f64)>)>,
}

fn find_vertex(mesh: &RectMesh, coords: &[f64]) -> usize {
    mesh.vertex_at(coords).expect("corner matches a mesh vertex")
}

/// Face index at a given side of a cell: `side` 0 for the low face, 1 for the
/// high face in direction k.
fn cell_face(mesh: &RectMesh, c: usize, k: usize, side: usize) -> usize {
    *mesh.cell_faces[c]
        .iter()
        .find(|&&fi| {
            let f = &mesh.faces[fi];
            f.direction == k
                && if side == 1 {
                    f.minus == Some(c)
                } else {
                    f.plus == Some(c)
                }
        })
        .expect("cell face present")
}

pub fn cg_dof_map(mesh: &RectMesh, dirichlet: bool) -> Result<CgDofMap, Error> {
    let d = mesh.dim;
    let mut next = 0usize;
    let mut extraction: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();

    let vertex_dof: Vec<Option<usize>> = mesh
        .vertices
        .iter()
        .map(|v| {
            if dirichlet && v.on_boundary {
                None
            } else {
                let id = next;
                next += 1;
                let owner = v.cells[0];
                let cell = &mesh.cells[owner];
                let shape = cell_shape(cell);
                let mut idx = 0;
                for k in (0..d).rev() {
                    let at_high = (v.coords[k] - cell.high(k)).abs() <= mesh.tol;
                    idx = idx * shape[k] + if at_high { shape[k] - 1 } else { 0 };
                }
                extraction.push((owner, vec![(idx, 1.0)]));
                Some(id)
            }
        })
        .collect();

    let mut face_degree = vec![0u32; mesh.faces.len()];
    let mut face_dofs: Vec<Vec<usize>> = vec![Vec::new(); mesh.faces.len()];
    if d == 2 {
        for (fi, face) in mesh.faces.iter().enumerate() {
            let t = 1 - face.direction;
            let pdeg = [face.minus, face.plus]
                .into_iter()
                .flatten()
                .map(|c| mesh.cells[c].degrees[t])
                .min()
                .unwrap();
            face_degree[fi] = pdeg;
            if dirichlet && face.is_boundary() {
                continue;
            }
            let owner = [face.minus, face.plus].into_iter().flatten().min().unwrap();
            let cell = &mesh.cells[owner];
            let shape = cell_shape(cell);
            let pt = cell.degrees[t];
            let face_grid = lgl_grid(pdeg)?;
            let owner_nodes = lgl_grid(pt)?;
            let owner_grid = Grid1D::from_lgl(&owner_nodes);
            let end = if mesh.faces[fi].minus == Some(owner) {
                shape[face.direction] - 1
            } else {
                0
            };
            let local = |ik: usize, it: usize| {
                if face.direction == 0 {
                    it * shape[0] + ik
                } else {
                    ik * shape[0] + it
                }
            };
            for j in 1..pdeg as usize {
                let id = next;
                next += 1;
                face_dofs[fi].push(id);
                let rule = if pt == pdeg {
                    vec![(local(end, j), 1.0)]
                } else {
                    let row = lagrange_eval_matrix(&owner_grid, &[face_grid.nodes[j]]);
                    (0..owner_grid.len())
                        .map(|it| (local(end, it), row.get(0, it)))
                        .filter(|&(_, v)| v != 0.0)
                        .collect()
                };
                extraction.push((owner, rule));
            }
        }
    }

    let mut cell_interior_base = Vec::with_capacity(mesh.cells.len());
    for (c, cell) in mesh.cells.iter().enumerate() {
        cell_interior_base.push(next);
        let count: usize = cell.degrees.iter().map(|&p| (p as usize).max(1) - 1).product();
        for local in interior_locals(cell) {
            extraction.push((c, vec![(local, 1.0)]));
        }
        next += count;
    }

    // Expansion rows, the inverse view of the numbering above.
    let mut rows = Vec::with_capacity(mesh.cells.len());
    for (c, cell) in mesh.cells.iter().enumerate() {
        let shape = cell_shape(cell);
        let nloc: usize = shape.iter().product();
        let mut cell_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nloc);
        let mut interior_next = cell_interior_base[c];
        for local in 0..nloc {
            let idx = unravel(local, &shape);
            let ends: Vec<Option<usize>> = (0..d)
                .map(|k| {
                    if idx[k] == 0 {
                        Some(0)
                    } else if idx[k] == shape[k] - 1 {
                        Some(1)
                    } else {
                        None
                    }
                })
                .collect();
            let nends = ends.iter().flatten().count();
            let row: Vec<(usize, f64)> = if nends == 0 {
                let id = interior_next;
                interior_next += 1;
                vec![(id, 1.0)]
            } else if nends == d {
                let coords: Vec<f64> = (0..d)
                    .map(|k| {
                        if ends[k] == Some(1) {
                            cell.high(k)
                        } else {
                            cell.low(k)
                        }
                    })
                    .collect();
                match vertex_dof[find_vertex(mesh, &coords)] {
                    Some(g) => vec![(g, 1.0)],
                    None => Vec::new(),
                }
            } else {
                let k = (0..d).find(|&k| ends[k].is_some()).unwrap();
                let t = 1 - k;
                let fi = cell_face(mesh, c, k, ends[k].unwrap());
                let pdeg = face_degree[fi];
                let tau = lgl_grid(cell.degrees[t])?.nodes[idx[t]];
                let face = &mesh.faces[fi];
                let (a, b) = face.span[0];
                let mut lo_coords = vec![0.0; 2];
                lo_coords[k] = face.position;
                lo_coords[t] = a;
                let mut hi_coords = vec![0.0; 2];
                hi_coords[k] = face.position;
                hi_coords[t] = b;
                let lo_v = vertex_dof[find_vertex(mesh, &lo_coords)];
                let hi_v = vertex_dof[find_vertex(mesh, &hi_coords)];
                let target = |j: usize| -> Option<usize> {
                    if j == 0 {
                        lo_v
                    } else if j == pdeg as usize {
                        hi_v
                    } else {
                        face_dofs[fi].get(j - 1).copied()
                    }
                };
                if cell.degrees[t] == pdeg {
                    target(idx[t]).map(|g| vec![(g, 1.0)]).unwrap_or_default()
                } else {
                    let face_nodes = lgl_grid(pdeg)?;
                    let fg = Grid1D::from_lgl(&face_nodes);
                    let row = lagrange_eval_matrix(&fg, &[tau]);
                    (0..=pdeg as usize)
                        .filter_map(|j| {
                            target(j).and_then(|g| {
                                let v = row.get(0, j);
                                (v != 0.0).then_some((g, v))
                            })
                        })
                        .collect()
                }
            };
            cell_rows.push(row);
        }
        rows.push(cell_rows);
    }

    Ok(CgDofMap {
        total: next,
        dirichlet,
        rows,
        vertex_dof,
        face_dofs,
        face_degree,
        extraction,
    })
}

fn interior_locals(cell: &RectCell) -> Vec<usize> {
    let shape = cell_shape(cell);
    let nloc: usize = shape.iter().product();
    (0..nloc)
        .filter(|&l| {
            let idx = unravel(l, &shape);
            idx.iter()
                .zip(&shape)
                .all(|(&i, &n)| i > 0 && i < n - 1)
        })
        .collect()
}

impl CgDofMap {
    /// Rectangular expansion from continuous coefficients to discontinuous
    /// nodal values.
    pub fn injection_matrix(&self, dg: &DgDofMap) -> CsrMatrix {
        let mut triplets = Vec::new();
        for (c, cell_rows) in self.rows.iter().enumerate() {
            let base = dg.offsets[c];
            for (local, row) in cell_rows.iter().enumerate() {
                for &(g, v) in row {
                    triplets.push((base + local, g, v));
                }
            }
        }
        CsrMatrix::from_triplets(dg.total, self.total, &triplets)
    }

    /// Read coefficients off per-cell nodal values known to be continuous.
    pub fn extract(&self, values: &[Vec<f64>]) -> Vec<f64> {
        self.extraction
            .iter()
            .map(|(c, rule)| rule.iter().map(|&(l, w)| values[*c][l] * w).sum())
            .collect()
    }

    /// Transpose of `extract`: scatter coefficients into per-cell arrays.
    pub fn extract_transpose(&self, coeffs: &[f64], shapes: &[usize]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = shapes.iter().map(|&n| vec![0.0; n]).collect();
        for (dof, (c, rule)) in self.extraction.iter().enumerate() {
            for &(l, w) in rule {
                out[*c][l] += coeffs[dof] * w;
            }
        }
        out
    }
}

/// Assemble the conforming spectral-element stiffness matrix.
pub fn assemble_cg_sem(
    mesh: &RectMesh,
    dirichlet: bool,
) -> Result<(SymSparseMatrix, CgDofMap), Error> {
    let map = cg_dof_map(mesh, dirichlet)?;
    let mut triplets = Vec::new();
    for (c, cell) in mesh.cells.iter().enumerate() {
        let a = cell_volume_matrix(cell)?;
        let nloc = a.rows;
        let cell_rows = &map.rows[c];

        let mut touched: Vec<usize> = cell_rows
            .iter()
            .flat_map(|row| row.iter().map(|&(g, _)| g))
            .collect();
        touched.sort_unstable();
        touched.dedup();
        if touched.is_empty() {
            continue;
        }
        let loc_of = |g: usize| touched.binary_search(&g).unwrap();

        let ncg = touched.len();
        let mut c_mat = DenseMatrix::zeros(nloc, ncg);
        for (j, row) in cell_rows.iter().enumerate() {
            for &(g, w) in row {
                let jl = loc_of(g);
                for i in 0..nloc {
                    c_mat.add_to(i, jl, w * a.get(i, j));
                }
            }
        }
        let mut b = DenseMatrix::zeros(ncg, ncg);
        for (j, row) in cell_rows.iter().enumerate() {
            for &(g, w) in row {
                let jl = loc_of(g);
                for l in 0..ncg {
                    b.add_to(jl, l, w * c_mat.get(j, l));
                }
            }
        }
        for l1 in 0..ncg {
            for l2 in 0..=l1 {
                let v = 0.5 * (b.get(l1, l2) + b.get(l2, l1));
                if v != 0.0 {
                    triplets.push((touched[l1], touched[l2], v));
                }
            }
        }
    }
    let a = SymSparseMatrix::from_triplets(map.total, &triplets);
    Ok((a, map))
}
