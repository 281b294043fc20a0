//! Rectangle meshes in one and two dimensions: cells with per-direction
//! polynomial degrees, derived face and vertex connectivity, conformity
//! validation, and the degree/size grading check.
//!
//! Cells are axis-aligned boxes given by origin and side lengths. Any two
//! cells must meet in a full shared face, a single vertex, or not at all;
//! hanging nodes are rejected at construction.

use crate::error::Error;

/// Relative geometric tolerance; scaled by the mesh diameter during build.
const REL_TOL: f64 = 1e-12;

/// Axis-aligned cell with anisotropic polynomial degrees.
#[derive(Debug, Clone)]
pub struct RectCell {
    pub origin: Vec<f64>,
    pub sides: Vec<f64>,
    pub degrees: Vec<u32>,
}

impl RectCell {
    pub fn new(origin: Vec<f64>, sides: Vec<f64>, degrees: Vec<u32>) -> Self {
        let d = origin.len();
        assert!(d == 1 || d == 2, "only dimensions 1 and 2 are supported");
        assert_eq!(sides.len(), d);
        assert_eq!(degrees.len(), d);
        assert!(sides.iter().all(|&h| h > 0.0 && h.is_finite()));
        assert!(degrees.iter().all(|&p| p >= 1), "degrees start at 1");
        RectCell {
            origin,
            sides,
            degrees,
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn low(&self, k: usize) -> f64 {
        self.origin[k]
    }

    pub fn high(&self, k: usize) -> f64 {
        self.origin[k] + self.sides[k]
    }

    /// Corner coordinates, indexed by a bit per direction (bit k set means the
    /// high side in direction k).
    pub fn corner(&self, index: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                if index >> k & 1 == 1 {
                    self.high(k)
                } else {
                    self.low(k)
                }
            })
            .collect()
    }
}

/// A face of the mesh: a point (d = 1) or an axis-parallel segment (d = 2).
#[derive(Debug, Clone)]
pub struct Face {
    /// Axis the face is orthogonal to.
    pub direction: usize,
    /// Coordinate of the face plane along `direction`.
    pub position: f64,
    /// Tangential extents in the remaining axis order; empty for d = 1.
    pub span: Vec<(f64, f64)>,
    /// Cell on the low-coordinate side, if any.
    pub minus: Option<usize>,
    /// Cell on the high-coordinate side, if any.
    pub plus: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none() || self.plus.is_none()
    }

    pub fn is_interior(&self) -> bool {
        !self.is_boundary()
    }

    /// The adjacent cell of a boundary face.
    pub fn boundary_cell(&self) -> usize {
        debug_assert!(self.is_boundary());
        self.minus.or(self.plus).expect("face without any cell")
    }
}

/// Mesh vertex with the list of incident cells.
#[derive(Debug, Clone)]
pub struct Vertex {
    pub coords: Vec<f64>,
    pub cells: Vec<usize>,
    /// True when the vertex lies on the domain boundary.
    pub on_boundary: bool,
}

/// Validated mesh with derived connectivity.
#[derive(Debug, Clone)]
pub struct RectMesh {
    pub dim: usize,
    pub cells: Vec<RectCell>,
    pub faces: Vec<Face>,
    pub vertices: Vec<Vertex>,
    /// Face indices incident to each cell.
    pub cell_faces: Vec<Vec<usize>>,
    /// Geometric tolerance used during construction.
    pub tol: f64,
}

impl RectMesh {
    /// Index of the vertex at the given coordinates, within tolerance.
    pub fn vertex_at(&self, coords: &[f64]) -> Option<usize> {
        self.vertices.iter().position(|v| {
            v.coords
                .iter()
                .zip(coords)
                .all(|(a, b)| close(*a, *b, self.tol))
        })
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Build a mesh from a cell list, validating conformity and connectivity.
pub fn build_mesh(cells: Vec<RectCell>) -> Result<RectMesh, Error> {
    if cells.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let dim = cells[0].dim();
    assert!(
        cells.iter().all(|c| c.dim() == dim),
        "mixed cell dimensions"
    );

    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for c in &cells {
        for k in 0..dim {
            lo[k] = lo[k].min(c.low(k));
            hi[k] = hi[k].max(c.high(k));
        }
    }
    let diameter = (0..dim)
        .map(|k| (hi[k] - lo[k]).powi(2))
        .sum::<f64>()
        .sqrt();
    let tol = REL_TOL * diameter;

    let n = cells.len();
    let mut interior: Vec<Face> = Vec::new();
    // matched[cell][2k + side]: side 0 = low face, 1 = high face in direction k.
    let mut matched = vec![vec![false; 2 * dim]; n];

    for a in 0..n {
        for b in a + 1..n {
            let (ca, cb) = (&cells[a], &cells[b]);
            let overlap = (0..dim)
                .all(|k| ca.low(k) < cb.high(k) - tol && cb.low(k) < ca.high(k) - tol);
            if overlap {
                return Err(Error::Conformity {
                    cell_a: a,
                    cell_b: b,
                    detail: "interiors overlap".to_string(),
                });
            }
            for k in 0..dim {
                // a below b, or b below a, touching in direction k.
                let (low_cell, high_cell, touching) = if close(ca.high(k), cb.low(k), tol) {
                    (a, b, true)
                } else if close(cb.high(k), ca.low(k), tol) {
                    (b, a, true)
                } else {
                    (a, b, false)
                };
                if !touching {
                    continue;
                }
                let (cl, ch) = (&cells[low_cell], &cells[high_cell]);
                // Tangential relationship decides face vs vertex vs error.
                let mut full = true;
                let mut contact = true;
                for l in 0..dim {
                    if l == k {
                        continue;
                    }
                    let ov = cl.high(l).min(ch.high(l)) - cl.low(l).max(ch.low(l));
                    if ov <= tol {
                        contact = false;
                    }
                    if !(close(cl.low(l), ch.low(l), tol) && close(cl.high(l), ch.high(l), tol)) {
                        full = false;
                    }
                }
                if !contact {
                    continue; // vertex contact or no contact at all
                }
                if !full {
                    return Err(Error::Conformity {
                        cell_a: a,
                        cell_b: b,
                        detail: format!("partial face contact in direction {k}"),
                    });
                }
                let cl = &cells[low_cell];
                interior.push(Face {
                    direction: k,
                    position: cl.high(k),
                    span: (0..dim)
                        .filter(|&l| l != k)
                        .map(|l| (cl.low(l), cl.high(l)))
                        .collect(),
                    minus: Some(low_cell),
                    plus: Some(high_cell),
                });
                matched[low_cell][2 * k + 1] = true;
                matched[high_cell][2 * k] = true;
            }
        }
    }

    let mut faces = interior;
    for (c, cell) in cells.iter().enumerate() {
        for k in 0..dim {
            let span: Vec<(f64, f64)> = (0..dim)
                .filter(|&l| l != k)
                .map(|l| (cell.low(l), cell.high(l)))
                .collect();
            if !matched[c][2 * k] {
                faces.push(Face {
                    direction: k,
                    position: cell.low(k),
                    span: span.clone(),
                    minus: None,
                    plus: Some(c),
                });
            }
            if !matched[c][2 * k + 1] {
                faces.push(Face {
                    direction: k,
                    position: cell.high(k),
                    span,
                    minus: Some(c),
                    plus: None,
                });
            }
        }
    }

    // Deterministic face order independent of the cell input order.
    faces.sort_by(|f, g| {
        let key = |f: &Face| {
            let mut k = vec![f.direction as f64, f.position];
            for &(a, b) in &f.span {
                k.push(a);
                k.push(b);
            }
            k
        };
        key(f).partial_cmp(&key(g)).unwrap()
    });

    let mut cell_faces = vec![Vec::new(); n];
    for (fi, f) in faces.iter().enumerate() {
        if let Some(c) = f.minus {
            cell_faces[c].push(fi);
        }
        if let Some(c) = f.plus {
            cell_faces[c].push(fi);
        }
    }

    // Connectivity across interior faces.
    let mut component = vec![usize::MAX; n];
    let mut stack = vec![0usize];
    component[0] = 0;
    while let Some(c) = stack.pop() {
        for &fi in &cell_faces[c] {
            let f = &faces[fi];
            for other in [f.minus, f.plus].into_iter().flatten() {
                if component[other] == usize::MAX {
                    component[other] = 0;
                    stack.push(other);
                }
            }
        }
    }
    if component.iter().any(|&c| c == usize::MAX) {
        return Err(Error::Disconnected);
    }

    // Vertices: deduplicated cell corners.
    let mut vertices: Vec<Vertex> = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        for corner in 0..1usize << dim {
            let coords = cell.corner(corner);
            let found = vertices
                .iter_mut()
                .find(|v| v.coords.iter().zip(&coords).all(|(a, b)| close(*a, *b, tol)));
            match found {
                Some(v) => v.cells.push(c),
                None => vertices.push(Vertex {
                    coords,
                    cells: vec![c],
                    on_boundary: false,
                }),
            }
        }
    }
    for v in &mut vertices {
        v.cells.sort_unstable();
        v.cells.dedup();
    }
    vertices.sort_by(|a, b| a.coords.partial_cmp(&b.coords).unwrap());
    for v in &mut vertices {
        v.on_boundary = faces.iter().any(|f| {
            f.is_boundary()
                && close(v.coords[f.direction], f.position, tol)
                && f.span.iter().enumerate().all(|(si, &(a, b))| {
                    let tang: Vec<usize> = (0..dim).filter(|&l| l != f.direction).collect();
                    let x = v.coords[tang[si]];
                    x >= a - tol && x <= b + tol
                })
        });
    }

    Ok(RectMesh {
        dim,
        cells,
        faces,
        vertices,
        cell_faces,
        tol,
    })
}

/// Result of the grading check.
#[derive(Debug, Clone)]
pub struct GradingReport {
    pub max_degree_ratio: f64,
    pub max_size_ratio: f64,
    /// Interior faces across which a ratio exceeds the bound.
    pub violations: Vec<usize>,
}

impl GradingReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Largest degree and size ratios between neighbors, per direction, across
/// every interior face. A face violates the bound when either ratio exceeds
/// `max_ratio`; equality passes.
pub fn check_grading(mesh: &RectMesh, max_ratio: f64) -> GradingReport {
    let mut max_degree_ratio = 1.0_f64;
    let mut max_size_ratio = 1.0_f64;
    let mut violations = Vec::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let (a, b) = match (f.minus, f.plus) {
            (Some(a), Some(b)) => (a, b),
            _ => continue,
        };
        let (ca, cb) = (&mesh.cells[a], &mesh.cells[b]);
        let mut face_worst = 1.0_f64;
        for k in 0..mesh.dim {
            let dr = {
                let (pa, pb) = (ca.degrees[k] as f64, cb.degrees[k] as f64);
                (pa / pb).max(pb / pa)
            };
            let sr = (ca.sides[k] / cb.sides[k]).max(cb.sides[k] / ca.sides[k]);
            max_degree_ratio = max_degree_ratio.max(dr);
            max_size_ratio = max_size_ratio.max(sr);
            face_worst = face_worst.max(dr).max(sr);
        }
        if face_worst > max_ratio {
            violations.push(fi);
        }
    }
    GradingReport {
        max_degree_ratio,
        max_size_ratio,
        violations,
    }
}

/// Parse the plain-text cell format: one cell per line, `x0 Hx px` in one
/// dimension or `x0 y0 Hx Hy px py` in two; `#` starts a comment.
pub fn parse_mesh(text: &str) -> Result<Vec<RectCell>, Error> {
    let mut cells = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let d = match tokens.len() {
            3 => 1,
            6 => 2,
            n => {
                return Err(Error::MeshFormat {
                    line: lineno + 1,
                    detail: format!("expected 3 or 6 fields, found {n}"),
                })
            }
        };
        if *dim.get_or_insert(d) != d {
            return Err(Error::MeshFormat {
                line: lineno + 1,
                detail: "mixed 1D and 2D cell lines".to_string(),
            });
        }
        let parse_f = |s: &str| -> Result<f64, Error> {
            s.parse().map_err(|_| Error::MeshFormat {
                line: lineno + 1,
                detail: format!("bad number {s:?}"),
            })
        };
        let parse_p = |s: &str| -> Result<u32, Error> {
            let p: u32 = s.parse().map_err(|_| Error::MeshFormat {
                line: lineno + 1,
                detail: format!("bad degree {s:?}"),
            })?;
            if p == 0 {
                return Err(Error::MeshFormat {
                    line: lineno + 1,
                    detail: "degree must be at least 1".to_string(),
                });
            }
            Ok(p)
        };
        let cell = if d == 1 {
            RectCell::new(
                vec![parse_f(tokens[0])?],
                vec![parse_f(tokens[1])?],
                vec![parse_p(tokens[2])?],
            )
        } else {
            RectCell::new(
                vec![parse_f(tokens[0])?, parse_f(tokens[1])?],
                vec![parse_f(tokens[2])?, parse_f(tokens[3])?],
                vec![parse_p(tokens[4])?, parse_p(tokens[5])?],
            )
        };
        cells.push(cell);
    }
    if cells.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(cells)
}

/// Convenience: n-by-m uniform grid of unit-degree-scaled cells over
/// [0, n hx] x [0, m hy] with a shared degree pair.
pub fn uniform_grid(n: usize, m: usize, hx: f64, hy: f64, px: u32, py: u32) -> Vec<RectCell> {
    let mut cells = Vec::with_capacity(n * m);
    for j in 0..m {
        for i in 0..n {
            cells.push(RectCell::new(
                vec![i as f64 * hx, j as f64 * hy],
                vec![hx, hy],
                vec![px, py],
            ));
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_squares_share_one_face() {
        let mesh = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2]),
            RectCell::new(vec![1.0, 0.0], vec![1.0, 1.0], vec![2, 2]),
        ])
        .unwrap();
        let interior: Vec<&Face> = mesh.faces.iter().filter(|f| f.is_interior()).collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(interior[0].direction, 0);
        assert_eq!(interior[0].minus, Some(0));
        assert_eq!(interior[0].plus, Some(1));
        assert_eq!(mesh.faces.len() - 1, 6);
        assert_eq!(mesh.vertices.len(), 6);
    }

    #[test]
    fn stacked_squares_face_normal_is_y() {
        let mesh = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![1, 1]),
            RectCell::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![1, 1]),
        ])
        .unwrap();
        let interior: Vec<&Face> = mesh.faces.iter().filter(|f| f.is_interior()).collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(interior[0].direction, 1);
    }

    #[test]
    fn grid_counts() {
        for (n, m) in [(2, 2), (3, 2), (4, 4)] {
            let mesh = build_mesh(uniform_grid(n, m, 0.5, 0.25, 3, 2)).unwrap();
            let interior = mesh.faces.iter().filter(|f| f.is_interior()).count();
            assert_eq!(interior, n * (m - 1) + m * (n - 1), "{n}x{m}");
            assert_eq!(mesh.vertices.len(), (n + 1) * (m + 1), "{n}x{m}");
            let boundary = mesh.faces.iter().filter(|f| f.is_boundary()).count();
            assert_eq!(boundary, 2 * n + 2 * m, "{n}x{m}");
        }
    }

    #[test]
    fn overlap_is_rejected() {
        let err = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![1, 1]),
            RectCell::new(vec![0.5, 0.0], vec![1.0, 1.0], vec![1, 1]),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Conformity { cell_a: 0, cell_b: 1, .. }));
    }

    #[test]
    fn hanging_half_face_is_rejected() {
        let err = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![1, 1]),
            RectCell::new(vec![1.0, 0.5], vec![1.0, 1.0], vec![1, 1]),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Conformity { .. }));
    }

    #[test]
    fn diagonal_vertex_contact_is_fine_but_disconnects() {
        // Two squares sharing only a corner: conforming geometry, but no face
        // connects them.
        let err = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![1, 1]),
            RectCell::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![1, 1]),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Disconnected));
    }

    #[test]
    fn one_dimensional_chain() {
        let mesh = build_mesh(vec![
            RectCell::new(vec![0.0], vec![1.0], vec![3]),
            RectCell::new(vec![1.0], vec![0.5], vec![2]),
            RectCell::new(vec![1.5], vec![1.0], vec![3]),
        ])
        .unwrap();
        assert_eq!(mesh.faces.iter().filter(|f| f.is_interior()).count(), 2);
        assert_eq!(mesh.faces.iter().filter(|f| f.is_boundary()).count(), 2);
        assert_eq!(mesh.vertices.len(), 4);
        let boundary_vertices = mesh.vertices.iter().filter(|v| v.on_boundary).count();
        assert_eq!(boundary_vertices, 2);
    }

    #[test]
    fn face_set_ignores_cell_order() {
        let cells = uniform_grid(3, 2, 1.0, 1.0, 2, 2);
        let mut reversed = cells.clone();
        reversed.reverse();
        let a = build_mesh(cells).unwrap();
        let b = build_mesh(reversed).unwrap();
        assert_eq!(a.faces.len(), b.faces.len());
        for (fa, fb) in a.faces.iter().zip(&b.faces) {
            assert_eq!(fa.direction, fb.direction);
            assert_eq!(fa.position, fb.position);
            assert_eq!(fa.span, fb.span);
            assert_eq!(fa.is_boundary(), fb.is_boundary());
        }
    }

    #[test]
    fn grading_ratios_and_violations() {
        let mesh = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2]),
            RectCell::new(vec![1.0, 0.0], vec![1.0, 1.0], vec![4, 2]),
        ])
        .unwrap();
        let report = check_grading(&mesh, 2.0);
        assert_eq!(report.max_degree_ratio, 2.0);
        assert_eq!(report.max_size_ratio, 1.0);
        assert!(report.passes(), "ratio equal to the bound passes");

        let mesh = build_mesh(vec![
            RectCell::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2]),
            RectCell::new(vec![1.0, 0.0], vec![1.0, 1.0], vec![5, 2]),
        ])
        .unwrap();
        let report = check_grading(&mesh, 2.0);
        assert_eq!(report.violations.len(), 1);
        assert!(mesh.faces[report.violations[0]].is_interior());
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let text = "# two cells\n0 0 1 1 2 2\n1 0 1 1 4 2 # neighbor\n";
        let cells = parse_mesh(text).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[1].degrees, vec![4, 2]);

        let text_1d = "0 1 3\n1 0.5 2\n";
        let cells = parse_mesh(text_1d).unwrap();
        assert_eq!(cells[1].sides, vec![0.5]);

        match parse_mesh("0 0 1 1 2\n") {
            Err(Error::MeshFormat { line: 1, .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
        match parse_mesh("0 0 1 1 2 0\n") {
            Err(Error::MeshFormat { line: 1, .. }) => {}
            other => panic!("expected degree error, got {other:?}"),
        }
        match parse_mesh("0 1 3\n0 0 1 1 2 2\n") {
            Err(Error::MeshFormat { line: 2, .. }) => {}
            other => panic!("expected mixed-dimension error, got {other:?}"),
        }
        assert!(matches!(parse_mesh("# empty\n"), Err(Error::EmptyMesh)));
    }

    #[test]
    fn boundary_vertex_flags_on_grid() {
        let mesh = build_mesh(uniform_grid(2, 2, 1.0, 1.0, 1, 1)).unwrap();
        let interior: Vec<&Vertex> = mesh.vertices.iter().filter(|v| !v.on_boundary).collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(interior[0].coords, vec![1.0, 1.0]);
        assert_eq!(interior[0].cells.len(), 4);
    }
}
