//! Legendre-Gauss-Lobatto grids on [-1, 1]: nodes, quadrature weights, and the
//! quasi-uniformity ratio of the induced partition.
//!
//! The degree-p grid consists of the endpoints plus the p-1 roots of L_p', the
//! derivative of the Legendre polynomial. Quadrature with the companion weights
//! integrates polynomials up to degree 2p-1 exactly. Grids are memoized per
//! degree since every module in the crate keeps asking for the same handful.

use crate::error::Error;
use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

/// Newton stops once the last update is below this.
const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Nodes and weights of the degree-p Lobatto rule, both in ascending node
/// order, with `nodes.len() == p + 1`.
#[derive(Debug, Clone)]
pub struct LglGrid {
    pub p: u32,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre polynomial value and first derivative at x, by the three-term
/// recurrence. The derivative at the endpoints uses its closed form since the
/// usual relation divides by 1 - x^2.
pub fn legendre_eval(p: u32, x: f64) -> (f64, f64) {
    if p == 0 {
        return (1.0, 0.0);
    }
    let mut lm1 = 1.0; // L_0
    let mut l = x; // L_1
    for n in 1..p {
        let nf = n as f64;
        let lp1 = ((2.0 * nf + 1.0) * x * l - nf * lm1) / (nf + 1.0);
        lm1 = l;
        l = lp1;
    }
    let pf = p as f64;
    let deriv = if x == 1.0 {
        pf * (pf + 1.0) / 2.0
    } else if x == -1.0 {
        if p % 2 == 0 {
            -pf * (pf + 1.0) / 2.0
        } else {
            pf * (pf + 1.0) / 2.0
        }
    } else {
        pf * (lm1 - x * l) / (1.0 - x * x)
    };
    (l, deriv)
}

impl LglGrid {
    fn compute(p: u32) -> Result<LglGrid, Error> {
        if p == 0 {
            return Err(Error::DegreeTooSmall { p });
        }
        let n = p as usize + 1;
        let mut nodes = vec![0.0; n];
        nodes[0] = -1.0;
        nodes[p as usize] = 1.0;
        let pf = p as f64;
        // Interior nodes: Newton on L_p', seeded with the Chebyshev-Lobatto
        // points, which interlace tightly enough for monotone convergence.
        for i in 1..p as usize {
            let mut x = -(std::f64::consts::PI * i as f64 / pf).cos();
            let mut ok = false;
            for _ in 0..NEWTON_MAX_ITER {
                let (l, dl) = legendre_eval(p, x);
                // L'' from the Legendre differential equation.
                let d2l = (2.0 * x * dl - pf * (pf + 1.0) * l) / (1.0 - x * x);
                let step = dl / d2l;
                x -= step;
                if step.abs() < NEWTON_TOL {
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Err(Error::NonConvergence { index: i });
            }
            nodes[i] = x;
        }
        // Symmetrize so the grid is a bitwise mirror image of itself.
        for i in 1..n / 2 {
            let a = 0.5 * (nodes[i] - nodes[n - 1 - i]);
            nodes[i] = a;
            nodes[n - 1 - i] = -a;
        }
        if p % 2 == 0 {
            nodes[p as usize / 2] = 0.0;
        }
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let (l, _) = legendre_eval(p, nodes[i]);
            weights[i] = 2.0 / (pf * (pf + 1.0) * l * l);
        }
        Ok(LglGrid { p, nodes, weights })
    }

    /// Lengths of the p subintervals between consecutive nodes.
    pub fn interval_lengths(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

static CACHE: OnceLock<RwLock<HashMap<u32, Arc<LglGrid>>>> = OnceLock::new();

/// Shared, memoized grid for degree p. The first caller for a given degree
/// computes it while holding the write lock, so each degree is computed once.
pub fn lgl_grid(p: u32) -> Result<Arc<LglGrid>, Error> {
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(g) = cache.read().unwrap().get(&p) {
        return Ok(g.clone());
    }
    let mut map = cache.write().unwrap();
    if let Some(g) = map.get(&p) {
        return Ok(g.clone());
    }
    let g = Arc::new(LglGrid::compute(p)?);
    map.insert(p, g.clone());
    Ok(g)
}

/// Largest ratio of adjacent subinterval lengths of the degree-p grid,
/// counting both orientations, so the result is always >= 1. Needs p >= 2;
/// the degree-1 grid has a single interval and no adjacent pair.
pub fn quasi_uniformity_ratio(p: u32) -> Result<f64, Error> {
    if p < 2 {
        return Err(Error::DegreeTooSmall { p });
    }
    let grid = lgl_grid(p)?;
    let h = grid.interval_lengths();
    let mut worst = 1.0_f64;
    for w in h.windows(2) {
        worst = worst.max(w[1] / w[0]).max(w[0] / w[1]);
    }
    Ok(worst)
}
