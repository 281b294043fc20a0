//! Sharp constants of the one-dimensional interpolation inequalities behind
//! the two-stage splitting, computed as largest generalized eigenvalues, plus
//! the norm-equivalence constants between a polynomial and its piecewise
//! linear reading on the same Lobatto nodes.

use std::fmt;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::dense::DenseMatrix;
use crate::dyadic::{dyadic_grid, DEFAULT_ALPHA};
use crate::error::Error;
use crate::lgl::lgl_grid;
use crate::linalg::{generalized_eigen, generalized_residual, ones_complement_basis};
use crate::operators::{
    gram_p1, gram_spectral, lagrange_eval_matrix, p1_eval_matrix, shape_product_matrix, Grid1D,
};
use crate::util::{fmt_f64, maybe_par_map};

/// Accepted relative residual of the returned extremal eigenpair.
pub const EIGVEC_RESIDUAL_BOUND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// Vertex-weighted re-interpolation between polynomial degrees.
    Basic0,
    /// The same estimate between piecewise linear spaces on dyadic grids.
    Basic1,
}

impl Inequality {
    pub fn name(self) -> &'static str {
        match self {
            Inequality::Basic0 => "basic0",
            Inequality::Basic1 => "basic1",
        }
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantQuery {
    pub ineq: Inequality,
    pub m: u32,
    pub p: u32,
    pub q: u32,
    /// Endpoint selected by the vertex weight, +1 or -1.
    pub z: f64,
    pub alpha: f64,
}

impl ConstantQuery {
    pub fn new(ineq: Inequality, m: u32, p: u32, q: u32) -> Self {
        ConstantQuery {
            ineq,
            m,
            p,
            q,
            z: 1.0,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstantResult {
    pub query: ConstantQuery,
    pub constant: f64,
    /// Relative residual of the winning eigenpair, kept as evidence.
    pub eigvec_residual: f64,
}

fn extremal_constant(
    a: &DenseMatrix,
    m: &DenseMatrix,
    query: ConstantQuery,
) -> Result<ConstantResult, Error> {
    let eig = generalized_eigen(a, m)?;
    let lambda = *eig.values.last().expect("nonempty spectrum");
    let n = a.rows;
    let x: Vec<f64> = (0..n).map(|i| eig.vectors.get(i, n - 1)).collect();
    let residual = generalized_residual(a, m, lambda, &x);
    assert!(
        residual <= EIGVEC_RESIDUAL_BOUND,
        "eigenpair residual {residual} out of bounds for {query:?}"
    );
    Ok(ConstantResult {
        query,
        constant: lambda.max(0.0).sqrt(),
        eigvec_residual: residual,
    })
}

fn validate(query: &ConstantQuery) {
    assert!(query.p >= 1 && query.q >= 1);
    assert!(query.m <= 1);
    assert!(query.z == 1.0 || query.z == -1.0);
}

/// Constant of the polynomial inequality: the image space carries the
/// degree-q interpolation of the vertex-weighted input polynomial.
pub fn constant_basic0(query: ConstantQuery) -> Result<ConstantResult, Error> {
    assert_eq!(query.ineq, Inequality::Basic0);
    validate(&query);
    let source_nodes = lgl_grid(query.p)?;
    let source = Grid1D::from_lgl(&source_nodes);
    let targets = lgl_grid(query.q)?;
    let target_grid = Grid1D::from_lgl(&targets);
    let t = shape_product_matrix(query.z, &target_grid)
        .matmul(&lagrange_eval_matrix(&source, &targets.nodes));
    let lhs = gram_spectral(query.q, query.m)?;
    let a = t.congruence(&lhs);
    let mut rhs = gram_spectral(query.p, 0)?;
    if query.m == 1 {
        rhs.add_scaled(&gram_spectral(query.p, 1)?, 1.0);
    }
    extremal_constant(&a, &rhs, query)
}

/// Constant of the piecewise linear analogue on dyadic grids.
pub fn constant_basic1(query: ConstantQuery) -> Result<ConstantResult, Error> {
    assert_eq!(query.ineq, Inequality::Basic1);
    validate(&query);
    let source_points = dyadic_grid(query.p, query.alpha)?;
    let source = Grid1D::from_dyadic(&source_points);
    let target = dyadic_grid(query.q, query.alpha)?;
    let target_grid = Grid1D::from_dyadic(&target);
    let t = shape_product_matrix(query.z, &target_grid)
        .matmul(&p1_eval_matrix(&source, &target.coords));
    let lhs = gram_p1(&target_grid, query.m);
    let a = t.congruence(&lhs);
    let mut rhs = gram_p1(&source, 0);
    if query.m == 1 {
        rhs.add_scaled(&gram_p1(&source, 1), 1.0);
    }
    extremal_constant(&a, &rhs, query)
}

pub fn constant_for(query: ConstantQuery) -> Result<ConstantResult, Error> {
    match query.ineq {
        Inequality::Basic0 => constant_basic0(query),
        Inequality::Basic1 => constant_basic1(query),
    }
}

/// Extremal constants of the equivalence between a degree-p polynomial and
/// its piecewise linear reading at the same Lobatto nodes, in the L2 norm
/// (m = 0) or the gradient seminorm (m = 1, constants factored out).
pub fn norm_equivalence_constants(p: u32, m: u32) -> Result<(f64, f64), Error> {
    assert!(p >= 1 && m <= 1);
    let nodes = lgl_grid(p)?;
    let grid = Grid1D::from_lgl(&nodes);
    let linear = gram_p1(&grid, m);
    let spectral = gram_spectral(p, m)?;
    let (a, b) = if m == 0 {
        (linear, spectral)
    } else {
        let basis = ones_complement_basis(p as usize + 1);
        (basis.congruence(&linear), basis.congruence(&spectral))
    };
    let eig = generalized_eigen(&a, &b)?;
    let lo = eig.values.first().expect("nonempty spectrum").max(0.0);
    let hi = eig.values.last().unwrap().max(0.0);
    Ok((lo.sqrt(), hi.sqrt()))
}

/// Queries of the rectangular sweep, in a fixed deterministic order.
pub fn grid_queries(max: u32, alpha: f64) -> Vec<ConstantQuery> {
    let mut queries = Vec::new();
    for ineq in [Inequality::Basic0, Inequality::Basic1] {
        for m in [0, 1] {
            for p in 1..=max {
                for q in 1..=max {
                    queries.push(ConstantQuery {
                        alpha,
                        ..ConstantQuery::new(ineq, m, p, q)
                    });
                }
            }
        }
    }
    queries
}

/// Queries along the fixed-ratio line p = ratio * q.
pub fn line_queries(ratio: u32, qmax: u32, alpha: f64) -> Vec<ConstantQuery> {
    assert!(ratio >= 1);
    let mut queries = Vec::new();
    for ineq in [Inequality::Basic0, Inequality::Basic1] {
        for m in [0, 1] {
            for q in 1..=qmax {
                queries.push(ConstantQuery {
                    alpha,
                    ..ConstantQuery::new(ineq, m, ratio * q, q)
                });
            }
        }
    }
    queries
}

pub fn run_queries(
    queries: Vec<ConstantQuery>,
    parallel: bool,
) -> Result<Vec<ConstantResult>, Error> {
    run_queries_cached(queries, parallel, &ConstantCache::disabled())
}

/// Per-query result store so repeated sweeps stay incremental: each
/// (inequality, m, p, q, alpha) combination lives in its own file named by a
/// hash of that description.
#[derive(Debug, Clone, Default)]
pub struct ConstantCache {
    dir: Option<PathBuf>,
}

/// Environment variable naming the cache directory.
pub const CACHE_DIR_VAR: &str = "SIPG_CACHE_DIR";

impl ConstantCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ConstantCache {
            dir: Some(dir.into()),
        }
    }

    pub fn disabled() -> Self {
        ConstantCache { dir: None }
    }

    /// Cache under the directory named by `SIPG_CACHE_DIR`, disabled when
    /// the variable is unset or empty.
    pub fn from_env() -> Self {
        match std::env::var(CACHE_DIR_VAR) {
            Ok(dir) if !dir.is_empty() => ConstantCache::new(dir),
            _ => ConstantCache::disabled(),
        }
    }

    fn path_for(&self, query: &ConstantQuery) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        let tag = format!(
            "{},{},{},{},{}",
            query.ineq, query.m, query.p, query.q, query.alpha
        );
        let mut hasher = Sha256::new();
        hasher.update(tag.as_bytes());
        let digest = hasher.finalize();
        let mut name = String::with_capacity(68);
        for b in digest {
            name.push_str(&format!("{b:02x}"));
        }
        name.push_str(".csv");
        Some(dir.join(name))
    }

    fn lookup(&self, query: &ConstantQuery) -> Option<ConstantResult> {
        let text = std::fs::read_to_string(self.path_for(query)?).ok()?;
        let mut lines = text.lines();
        let constant: f64 = lines.next()?.trim().parse().ok()?;
        let eigvec_residual: f64 = lines.next()?.trim().parse().ok()?;
        Some(ConstantResult {
            query: *query,
            constant,
            eigvec_residual,
        })
    }

    fn store(&self, result: &ConstantResult) {
        let Some(path) = self.path_for(&result.query) else {
            return;
        };
        if let Some(dir) = &self.dir {
            let _ = std::fs::create_dir_all(dir);
        }
        let body = format!(
            "{}\n{}\n",
            fmt_f64(result.constant),
            fmt_f64(result.eigvec_residual)
        );
        let _ = std::fs::write(path, body);
    }
}

pub fn run_queries_cached(
    queries: Vec<ConstantQuery>,
    parallel: bool,
    cache: &ConstantCache,
) -> Result<Vec<ConstantResult>, Error> {
    let results = maybe_par_map(queries, parallel, |q| match cache.lookup(&q) {
        Some(hit) => Ok(hit),
        None => {
            let fresh = constant_for(q)?;
            cache.store(&fresh);
            Ok(fresh)
        }
    });
    results.into_iter().collect()
}

pub const CSV_HEADER: &str = "ineq,m,p,q,alpha,constant";

/// Render results as CSV. The constant column uses an exact round-trip
/// format so reruns are byte-identical.
pub fn to_csv(results: &[ConstantResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        let q = &r.query;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            q.ineq,
            q.m,
            q.p,
            q.q,
            q.alpha,
            fmt_f64(r.constant)
        ));
    }
    out
}
