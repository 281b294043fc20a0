//! Conforming piecewise-(bi)linear finite elements on the per-cell dyadic
//! tensor grids.
//!
//! Continuity across an interior face couples two one-dimensional dyadic
//! grids that generally differ. A function linear on the subintervals of
//! both sides can only break slope at breakpoints the sides share, so the
//! face trace lives on the exact intersection of the two tangential grids.
//! Intersection points belong to each side's grid, which keeps every
//! coupling weight either 1 or a short interpolation between neighbours.

use std::sync::Arc;

use crate::dyadic::{dyadic_grid, intersect, DyadicGrid, DyadicPoint};
use crate::error::Error;
use crate::mesh::{RectCell, RectMesh};
use crate::operators::{gram_p1, Grid1D};
use crate::sparse::SymSparseMatrix;
use crate::util::unravel;

/// Dof layout of the dyadic element space: free vertices, then trace
/// breakpoints interior to each face, then cell-interior tensor nodes.
#[derive(Debug, Clone)]
pub struct DfeMap {
    pub total: usize,
    pub dirichlet: bool,
    pub alpha: f64,
    /// Per cell, per direction: the dyadic grid of that direction's degree.
    pub cell_grids: Vec<Vec<Arc<DyadicGrid>>>,
    /// Expansion of each cell-local nodal value in global coefficients.
    pub rows: Vec<Vec<Vec<(usize, f64)>>>,
    pub vertex_dof: Vec<Option<usize>>,
    /// Trace-interior dofs per face, ascending tangentially.
    pub face_dofs: Vec<Vec<usize>>,
    /// Breakpoints of each face trace on the reference interval.
    pub face_trace: Vec<Vec<DyadicPoint>>,
    /// Owner-cell rule recovering each coefficient from nodal values.
    pub extraction: Vec<(usize, Vec<(usize, f64)>)>,
}

fn find_vertex(mesh: &RectMesh, coords: &[f64]) -> usize {
    mesh.vertex_at(coords).expect("corner matches a mesh vertex")
}

fn corner_local(cell: &RectCell, grids: &[Arc<DyadicGrid>], coords: &[f64], tol: f64) -> usize {
    let mut idx = 0;
    for k in (0..cell.dim()).rev() {
        let n = grids[k].coords.len();
        let at_high = (coords[k] - cell.high(k)).abs() <= tol;
        idx = idx * n + if at_high { n - 1 } else { 0 };
    }
    idx
}

pub fn dfe_map(mesh: &RectMesh, dirichlet: bool, alpha: f64) -> Result<DfeMap, Error> {
    let d = mesh.dim;
    let cell_grids: Vec<Vec<Arc<DyadicGrid>>> = mesh
        .cells
        .iter()
        .map(|cell| {
            cell.degrees
                .iter()
                .map(|&p| dyadic_grid(p, alpha))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;

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
                let local = corner_local(
                    &mesh.cells[owner],
                    &cell_grids[owner],
                    &v.coords,
                    mesh.tol,
                );
                extraction.push((owner, vec![(local, 1.0)]));
                Some(id)
            }
        })
        .collect();

    let mut face_trace: Vec<Vec<DyadicPoint>> = vec![Vec::new(); mesh.faces.len()];
    let mut face_dofs: Vec<Vec<usize>> = vec![Vec::new(); mesh.faces.len()];
    if d == 2 {
        for (fi, face) in mesh.faces.iter().enumerate() {
            let t = 1 - face.direction;
            let sides: Vec<usize> = [face.minus, face.plus].into_iter().flatten().collect();
            let trace = if sides.len() == 2 {
                intersect(
                    &cell_grids[sides[0]][t].points,
                    &cell_grids[sides[1]][t].points,
                )
            } else {
                cell_grids[sides[0]][t].points.clone()
            };
            face_trace[fi] = trace;
            if dirichlet && face.is_boundary() {
                continue;
            }
            let owner = sides[0];
            let owner_points = &cell_grids[owner][t].points;
            let shape: Vec<usize> = cell_grids[owner].iter().map(|g| g.coords.len()).collect();
            let end = if face.minus == Some(owner) {
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
            let ntrace = face_trace[fi].len();
            for j in 1..ntrace.max(1) - 1 {
                let id = next;
                next += 1;
                face_dofs[fi].push(id);
                let it = owner_points
                    .binary_search(&face_trace[fi][j])
                    .expect("trace point belongs to both side grids");
                extraction.push((owner, vec![(local(end, it), 1.0)]));
            }
        }
    }

    let mut cell_interior_base = Vec::with_capacity(mesh.cells.len());
    for (c, grids) in cell_grids.iter().enumerate() {
        cell_interior_base.push(next);
        let shape: Vec<usize> = grids.iter().map(|g| g.coords.len()).collect();
        let nloc: usize = shape.iter().product();
        for local in 0..nloc {
            let idx = unravel(local, &shape);
            if idx
                .iter()
                .zip(&shape)
                .all(|(&i, &n)| i > 0 && i < n - 1)
            {
                extraction.push((c, vec![(local, 1.0)]));
                next += 1;
            }
        }
    }

    let mut rows = Vec::with_capacity(mesh.cells.len());
    for (c, cell) in mesh.cells.iter().enumerate() {
        let grids = &cell_grids[c];
        let shape: Vec<usize> = grids.iter().map(|g| g.coords.len()).collect();
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
                let face = &mesh.faces[fi];
                let trace = &face_trace[fi];
                let (a, b) = face.span[0];
                let mut lo_coords = vec![0.0; 2];
                lo_coords[k] = face.position;
                lo_coords[t] = a;
                let mut hi_coords = lo_coords.clone();
                hi_coords[t] = b;
                let lo_v = vertex_dof[find_vertex(mesh, &lo_coords)];
                let hi_v = vertex_dof[find_vertex(mesh, &hi_coords)];
                let last = trace.len() - 1;
                let target = |j: usize| -> Option<usize> {
                    if j == 0 {
                        lo_v
                    } else if j == last {
                        hi_v
                    } else {
                        face_dofs[fi].get(j - 1).copied()
                    }
                };
                let tau = grids[t].points[idx[t]];
                match trace.binary_search(&tau) {
                    Ok(j) => target(j).map(|g| vec![(g, 1.0)]).unwrap_or_default(),
                    Err(pos) => {
                        let (xl, xr) = (trace[pos - 1].coord(), trace[pos].coord());
                        let w = (tau.coord() - xl) / (xr - xl);
                        [(pos - 1, 1.0 - w), (pos, w)]
                            .into_iter()
                            .filter_map(|(j, wt)| {
                                target(j).and_then(|g| (wt != 0.0).then_some((g, wt)))
                            })
                            .collect()
                    }
                }
            };
            cell_rows.push(row);
        }
        rows.push(cell_rows);
    }

    Ok(DfeMap {
        total: next,
        dirichlet,
        alpha,
        cell_grids,
        rows,
        vertex_dof,
        face_dofs,
        face_trace,
        extraction,
    })
}

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

impl DfeMap {
    pub fn cell_node_count(&self, c: usize) -> usize {
        self.cell_grids[c].iter().map(|g| g.coords.len()).product()
    }

    /// Per-cell nodal values of a coefficient vector.
    pub fn expand(&self, coeffs: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(coeffs.len(), self.total);
        self.rows
            .iter()
            .map(|cell_rows| {
                cell_rows
                    .iter()
                    .map(|row| row.iter().map(|&(g, w)| w * coeffs[g]).sum())
                    .collect()
            })
            .collect()
    }

    /// Transpose of `expand`.
    pub fn expand_transpose(&self, values: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.total];
        for (cell_rows, vals) in self.rows.iter().zip(values) {
            for (row, &v) in cell_rows.iter().zip(vals.iter()) {
                for &(g, w) in row {
                    out[g] += w * v;
                }
            }
        }
        out
    }

    /// Read coefficients off per-cell values known to be continuous.
    pub fn extract(&self, values: &[Vec<f64>]) -> Vec<f64> {
        self.extraction
            .iter()
            .map(|(c, rule)| rule.iter().map(|&(l, w)| values[*c][l] * w).sum())
            .collect()
    }

    /// Transpose of `extract`.
    pub fn extract_transpose(&self, coeffs: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = (0..self.rows.len())
            .map(|c| vec![0.0; self.cell_node_count(c)])
            .collect();
        for (dof, (c, rule)) in self.extraction.iter().enumerate() {
            for &(l, w) in rule {
                out[*c][l] += coeffs[dof] * w;
            }
        }
        out
    }
}

/// Piecewise-(bi)linear evaluation of per-cell nodal values at a physical
/// point of one cell.
pub fn eval_p1_cell(
    mesh: &RectMesh,
    map: &DfeMap,
    cell: usize,
    values: &[f64],
    x: &[f64],
) -> f64 {
    let c = &mesh.cells[cell];
    let d = c.dim();
    let mut idx = vec![0usize; d];
    let mut wts = vec![0.0f64; d];
    for k in 0..d {
        let coords = &map.cell_grids[cell][k].coords;
        let xi = 2.0 * (x[k] - c.origin[k]) / c.sides[k] - 1.0;
        let mut i = coords.partition_point(|&p| p <= xi);
        i = i.clamp(1, coords.len() - 1);
        idx[k] = i - 1;
        wts[k] = (xi - coords[i - 1]) / (coords[i] - coords[i - 1]);
    }
    let nx = map.cell_grids[cell][0].coords.len();
    if d == 1 {
        values[idx[0]] * (1.0 - wts[0]) + values[idx[0] + 1] * wts[0]
    } else {
        let at = |ix: usize, iy: usize| values[iy * nx + ix];
        let lo = at(idx[0], idx[1]) * (1.0 - wts[0]) + at(idx[0] + 1, idx[1]) * wts[0];
        let hi =
            at(idx[0], idx[1] + 1) * (1.0 - wts[0]) + at(idx[0] + 1, idx[1] + 1) * wts[0];
        lo * (1.0 - wts[1]) + hi * wts[1]
    }
}

/// Gradient stiffness matrix of the dyadic element space.
pub fn assemble_dfe_stiffness(mesh: &RectMesh, map: &DfeMap) -> Result<SymSparseMatrix, Error> {
    let mut triplets = Vec::new();
    for (c, cell) in mesh.cells.iter().enumerate() {
        let d = cell.dim();
        let grids: Vec<Grid1D> = map.cell_grids[c]
            .iter()
            .map(|g| Grid1D::from_dyadic(g))
            .collect();
        let cell_rows = &map.rows[c];
        if d == 1 {
            let mut k1 = gram_p1(&grids[0], 1);
            k1.scale(2.0 / cell.sides[0]);
            let n = k1.rows;
            for i in 0..n {
                for j in i.saturating_sub(1)..(i + 2).min(n) {
                    push_expanded(&mut triplets, cell_rows, i, j, k1.get(i, j));
                }
            }
        } else {
            let (hx, hy) = (cell.sides[0], cell.sides[1]);
            let mut kx = gram_p1(&grids[0], 1);
            kx.scale(2.0 / hx);
            let mut mx = gram_p1(&grids[0], 0);
            mx.scale(hx / 2.0);
            let mut ky = gram_p1(&grids[1], 1);
            ky.scale(2.0 / hy);
            let mut my = gram_p1(&grids[1], 0);
            my.scale(hy / 2.0);
            let (nx, ny) = (kx.rows, ky.rows);
            for iy in 0..ny {
                for ix in 0..nx {
                    let l1 = iy * nx + ix;
                    for jy in iy.saturating_sub(1)..(iy + 2).min(ny) {
                        for jx in ix.saturating_sub(1)..(ix + 2).min(nx) {
                            let v = my.get(iy, jy) * kx.get(ix, jx)
                                + ky.get(iy, jy) * mx.get(ix, jx);
                            push_expanded(&mut triplets, cell_rows, l1, jy * nx + jx, v);
                        }
                    }
                }
            }
        }
    }
    Ok(SymSparseMatrix::from_triplets(map.total, &triplets))
}

/// Scatter one ordered local pair through the expansion rows. Keeping only
/// orientations with g1 >= g2 makes each unordered global pair accumulate
/// exactly once per ordered local source.
pub(crate) fn push_expanded(
    triplets: &mut Vec<(usize, usize, f64)>,
    cell_rows: &[Vec<(usize, f64)>],
    l1: usize,
    l2: usize,
    v: f64,
) {
    if v == 0.0 {
        return;
    }
    for &(g1, w1) in &cell_rows[l1] {
        for &(g2, w2) in &cell_rows[l2] {
            if g1 >= g2 {
                triplets.push((g1, g2, w1 * w2 * v));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::dyadic::DEFAULT_ALPHA;
    use crate::mesh::{build_mesh, RectCell};

    fn splitmix(state: &mut u64) -> f64 {
        *state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    #[test]
    fn dof_counts_follow_the_grid_sizes() {
        let mesh = build_mesh(vec![RectCell::new(vec![0.0], vec![1.0], vec![2])]).unwrap();
        assert_eq!(dfe_map(&mesh, true, DEFAULT_ALPHA).unwrap().total, 1);
        assert_eq!(dfe_map(&mesh, false, DEFAULT_ALPHA).unwrap().total, 3);

        let mesh = build_mesh(vec![
            RectCell::new(vec![0.0], vec![1.0], vec![2]),
            RectCell::new(vec![1.0], vec![1.0], vec![4]),
        ])
        .unwrap();
        let map = dfe_map(&mesh, true, DEFAULT_ALPHA).unwrap();
        assert_eq!(map.total, 1 + 1 + 5);

        let mesh = build_mesh(vec![RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2])])
            .unwrap();
        assert_eq!(dfe_map(&mesh, true, DEFAULT_ALPHA).unwrap().total, 1);
        assert_eq!(dfe_map(&mesh, false, DEFAULT_ALPHA).unwrap().total, 9);
    }

    #[test]
    fn shared_face_trace_uses_the_common_breakpoints() {
        let mesh = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2]),
            RectCell::new(vec![1.0, 0.0], vec![1.0, 1.0], vec![4, 4]),
        ])
        .unwrap();
        let map = dfe_map(&mesh, false, DEFAULT_ALPHA).unwrap();
        let shared = mesh.faces.iter().position(|f| f.is_interior()).unwrap();
        let coords: Vec<f64> = map.face_trace[shared].iter().map(|p| p.coord()).collect();
        assert_eq!(coords, vec![-1.0, 0.0, 1.0]);
        assert_eq!(map.face_dofs[shared].len(), 1);
        assert_eq!(map.total, 51);
    }

    #[test]
    fn expansion_is_continuous_across_faces_and_extraction_inverts() {
        let mesh = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 3]),
            RectCell::new(vec![1.0, 0.0], vec![1.0, 1.0], vec![4, 4]),
        ])
        .unwrap();
        for dirichlet in [false, true] {
            let map = dfe_map(&mesh, dirichlet, DEFAULT_ALPHA).unwrap();
            let mut state = 0x5EEDu64;
            let c: Vec<f64> = (0..map.total).map(|_| splitmix(&mut state)).collect();
            let vals = map.expand(&c);
            for i in 0..200 {
                let y = (i as f64 + 0.5) / 200.0;
                let left = eval_p1_cell(&mesh, &map, 0, &vals[0], &[1.0, y]);
                let right = eval_p1_cell(&mesh, &map, 1, &vals[1], &[1.0, y]);
                assert!(
                    (left - right).abs() <= 1e-12 * (1.0 + left.abs()),
                    "dirichlet {dirichlet}, trace mismatch at y = {y}"
                );
            }
            let back = map.extract(&vals);
            for (a, b) in back.iter().zip(&c) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn transposes_match_their_forward_maps() {
        let mesh = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![3, 2]),
            RectCell::new(vec![1.0, 0.0], vec![1.0, 1.0], vec![2, 2]),
        ])
        .unwrap();
        let map = dfe_map(&mesh, true, DEFAULT_ALPHA).unwrap();
        let mut state = 11u64;
        let c: Vec<f64> = (0..map.total).map(|_| splitmix(&mut state)).collect();
        let v: Vec<Vec<f64>> = (0..mesh.cells.len())
            .map(|cl| (0..map.cell_node_count(cl)).map(|_| splitmix(&mut state)).collect())
            .collect();
        let ec = map.expand(&c);
        let lhs: f64 = ec
            .iter()
            .zip(&v)
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(a, b)| a * b)
            .sum();
        let etv = map.expand_transpose(&v);
        let rhs: f64 = etv.iter().zip(&c).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));

        let xc = map.extract(&v);
        let lhs2: f64 = xc.iter().zip(&c).map(|(a, b)| a * b).sum();
        let xtv = map.extract_transpose(&c);
        let rhs2: f64 = xtv
            .iter()
            .zip(&v)
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs2 - rhs2).abs() <= 1e-12 * (1.0 + lhs2.abs()));
    }

    #[test]
    fn single_cell_interior_stencil_matches_the_uniform_value() {
        // Unit square, degree 2 in both directions: the dyadic grid is
        // {-1, 0, 1}, so the space under elimination is one bilinear hat on a
        // 2x2 subgrid with value 8/3 of the Dirichlet form.
        let mesh = build_mesh(vec![RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2])])
            .unwrap();
        let map = dfe_map(&mesh, true, DEFAULT_ALPHA).unwrap();
        let a = assemble_dfe_stiffness(&mesh, &map).unwrap();
        assert_eq!(a.n, 1);
        assert!((a.get_lower(0, 0) - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_annihilates_constants_without_elimination() {
        let mesh = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2]),
            RectCell::new(vec![1.0, 0.0], vec![1.0, 1.0], vec![4, 3]),
        ])
        .unwrap();
        let map = dfe_map(&mesh, false, DEFAULT_ALPHA).unwrap();
        let a = assemble_dfe_stiffness(&mesh, &map).unwrap();
        let ones = vec![1.0; map.total];
        let r = a.matvec(&ones);
        let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-12, "constant residual {worst}");
    }

    #[test]
    fn stiffness_matches_dense_congruence_oracle() {
        let mesh = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.5, 1.0], vec![2, 2]),
            RectCell::new(vec![1.5, 0.0], vec![0.8, 1.0], vec![3, 2]),
        ])
        .unwrap();
        for dirichlet in [false, true] {
            let map = dfe_map(&mesh, dirichlet, DEFAULT_ALPHA).unwrap();
            let a = assemble_dfe_stiffness(&mesh, &map).unwrap().to_dense();

            let mut dense = DenseMatrix::zeros(map.total, map.total);
            for (c, cell) in mesh.cells.iter().enumerate() {
                let nloc = map.cell_node_count(c);
                let grids: Vec<Grid1D> = map.cell_grids[c]
                    .iter()
                    .map(|g| Grid1D::from_dyadic(g))
                    .collect();
                let (hx, hy) = (cell.sides[0], cell.sides[1]);
                let mut kx = gram_p1(&grids[0], 1);
                kx.scale(2.0 / hx);
                let mut mx = gram_p1(&grids[0], 0);
                mx.scale(hx / 2.0);
                let mut ky = gram_p1(&grids[1], 1);
                ky.scale(2.0 / hy);
                let mut my = gram_p1(&grids[1], 0);
                my.scale(hy / 2.0);
                let mut local = my.kron(&kx);
                local.add_scaled(&ky.kron(&mx), 1.0);
                let mut e = DenseMatrix::zeros(nloc, map.total);
                for (l, row) in map.rows[c].iter().enumerate() {
                    for &(g, w) in row {
                        e.add_to(l, g, w);
                    }
                }
                dense.add_scaled(&e.congruence(&local), 1.0);
            }
            let mut worst = 0.0f64;
            for i in 0..map.total {
                for j in 0..map.total {
                    worst = worst.max((a.get(i, j) - dense.get(i, j)).abs());
                }
            }
            assert!(worst < 1e-12, "dirichlet {dirichlet}: deviation {worst}");
        }
    }
}
