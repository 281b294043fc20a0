//! Dyadic companion grids for Lobatto grids on [-1, 1].
//!
//! Starting from the whole interval, each dyadic interval is bisected while it
//! is longer than `alpha` times the shortest Lobatto subinterval it overlaps
//! in a set of positive measure. The result is a partition into intervals
//! `[-1 + 2 num / 2^level, -1 + 2 (num + 1) / 2^level]` that resolves the
//! Lobatto grid locally without over-refining, and whose breakpoints are exact
//! dyadic rationals, so set operations between grids are exact.

use crate::error::Error;
use crate::lgl::lgl_grid;
use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

/// Default refinement factor: intervals stop splitting once they are no longer
/// than 1.2 times the shortest overlapping Lobatto interval.
pub const DEFAULT_ALPHA: f64 = 1.2;

/// A dyadic rational in [-1, 1], stored as x = -1 + 2 num / 2^level in lowest
/// terms (num odd, or level 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicPoint {
    pub num: u64,
    pub level: u32,
}

impl DyadicPoint {
    pub fn new(num: u64, level: u32) -> Self {
        debug_assert!(num <= 1u64 << level);
        let mut p = DyadicPoint { num, level };
        while p.level > 0 && p.num % 2 == 0 {
            p.num /= 2;
            p.level -= 1;
        }
        p
    }

    /// Exact f64 coordinate; levels here stay far below the 52-bit limit.
    pub fn coord(&self) -> f64 {
        -1.0 + 2.0 * self.num as f64 / (1u64 << self.level) as f64
    }

    /// Numerator after aligning to the given (finer or equal) level.
    fn aligned(&self, level: u32) -> u64 {
        self.num << (level - self.level)
    }
}

impl PartialOrd for DyadicPoint {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicPoint {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let level = self.level.max(other.level);
        self.aligned(level).cmp(&other.aligned(level))
    }
}

/// Dyadic partition of [-1, 1] associated with a Lobatto degree.
#[derive(Debug, Clone)]
pub struct DyadicGrid {
    pub p: u32,
    pub alpha: f64,
    /// Breakpoints in ascending order, from -1 to 1 inclusive.
    pub points: Vec<DyadicPoint>,
    /// The breakpoints as f64 coordinates.
    pub coords: Vec<f64>,
}

impl DyadicGrid {
    pub fn num_intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn interval_lengths(&self) -> Vec<f64> {
        self.coords.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Shortest Lobatto subinterval overlapping (a, b) in positive measure, i.e.
/// with open intersection. Touching at an endpoint does not count.
fn min_overlap_length(lgl_nodes: &[f64], a: f64, b: f64) -> f64 {
    let mut best = f64::INFINITY;
    for w in lgl_nodes.windows(2) {
        if w[0] < b && a < w[1] {
            best = best.min(w[1] - w[0]);
        }
    }
    debug_assert!(best.is_finite());
    best
}

fn refine(
    num: u64,
    level: u32,
    lgl_nodes: &[f64],
    alpha: f64,
    out: &mut Vec<DyadicPoint>,
) {
    let a = DyadicPoint::new(num, level).coord();
    let b = DyadicPoint::new(num + 1, level).coord();
    let len = b - a;
    if len > alpha * min_overlap_length(lgl_nodes, a, b) {
        assert!(level < 50, "dyadic refinement ran away");
        refine(2 * num, level + 1, lgl_nodes, alpha, out);
        refine(2 * num + 1, level + 1, lgl_nodes, alpha, out);
    } else {
        out.push(DyadicPoint::new(num, level));
    }
}

fn compute(p: u32, alpha: f64) -> Result<DyadicGrid, Error> {
    assert!(alpha > 0.0 && alpha.is_finite(), "alpha must be positive");
    let lgl = lgl_grid(p)?;
    let mut points = Vec::new();
    refine(0, 0, &lgl.nodes, alpha, &mut points);
    points.push(DyadicPoint::new(1, 0));
    let coords = points.iter().map(|q| q.coord()).collect();
    Ok(DyadicGrid {
        p,
        alpha,
        points,
        coords,
    })
}

static CACHE: OnceLock<RwLock<HashMap<(u32, u64), Arc<DyadicGrid>>>> = OnceLock::new();

/// Memoized dyadic grid for Lobatto degree p and refinement factor alpha.
pub fn dyadic_grid(p: u32, alpha: f64) -> Result<Arc<DyadicGrid>, Error> {
    let key = (p, alpha.to_bits());
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(g) = cache.read().unwrap().get(&key) {
        return Ok(g.clone());
    }
    let mut map = cache.write().unwrap();
    if let Some(g) = map.get(&key) {
        return Ok(g.clone());
    }
    let g = Arc::new(compute(p, alpha)?);
    map.insert(key, g.clone());
    Ok(g)
}

/// Union of two breakpoint sets, exact and sorted.
pub fn join(a: &[DyadicPoint], b: &[DyadicPoint]) -> Vec<DyadicPoint> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                use std::cmp::Ordering::*;
                match x.cmp(&y) {
                    Less => {
                        i += 1;
                        x
                    }
                    Greater => {
                        j += 1;
                        y
                    }
                    Equal => {
                        i += 1;
                        j += 1;
                        x
                    }
                }
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// Breakpoints present in both sets, exact and sorted.
pub fn intersect(a: &[DyadicPoint], b: &[DyadicPoint]) -> Vec<DyadicPoint> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        use std::cmp::Ordering::*;
        match a[i].cmp(&b[j]) {
            Less => i += 1,
            Greater => j += 1,
            Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// True when every breakpoint of `coarse` also appears in `fine`.
pub fn is_nested(coarse: &[DyadicPoint], fine: &[DyadicPoint]) -> bool {
    intersect(coarse, fine).len() == coarse.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(g: &DyadicGrid) -> Vec<f64> {
        g.coords.clone()
    }

    #[test]
    fn degree_one_needs_no_refinement() {
        let g = dyadic_grid(1, DEFAULT_ALPHA).unwrap();
        assert_eq!(coords(&g), vec![-1.0, 1.0]);
    }

    #[test]
    fn degree_two_bisects_once() {
        let g = dyadic_grid(2, DEFAULT_ALPHA).unwrap();
        assert_eq!(coords(&g), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn degree_four_hand_derived() {
        // Lobatto nodes at +-1, +-sqrt(3/7), 0; tracing the bisection rule by
        // hand gives breakpoints at 0, +-1/2, +-3/4.
        let g = dyadic_grid(4, DEFAULT_ALPHA).unwrap();
        assert_eq!(coords(&g), vec![-1.0, -0.75, -0.5, 0.0, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn grids_are_symmetric() {
        for p in [2, 3, 4, 7, 16, 33, 64] {
            let g = dyadic_grid(p, DEFAULT_ALPHA).unwrap();
            let c = coords(&g);
            for i in 0..c.len() {
                assert_eq!(c[i], -c[c.len() - 1 - i], "p={p} i={i}");
            }
        }
    }

    #[test]
    fn resolution_and_minimality() {
        for p in [1, 2, 5, 8, 16, 31, 64] {
            let g = dyadic_grid(p, DEFAULT_ALPHA).unwrap();
            let lgl = lgl_grid(p).unwrap();
            for w in g.coords.windows(2) {
                let len = w[1] - w[0];
                let h = min_overlap_length(&lgl.nodes, w[0], w[1]);
                assert!(len <= DEFAULT_ALPHA * h, "p={p}: [{}, {}] unresolved", w[0], w[1]);
            }
            // Every interior breakpoint is the midpoint of exactly one
            // bisection; that parent interval must violate the resolution
            // bound, otherwise the grid over-refined.
            for q in &g.points[1..g.points.len() - 1] {
                let half = 2.0 / (1u64 << q.level) as f64;
                let (a, b) = (q.coord() - half, q.coord() + half);
                let h = min_overlap_length(&lgl.nodes, a, b);
                assert!(
                    2.0 * half > DEFAULT_ALPHA * h,
                    "p={p}: parent of {} was bisected without need",
                    q.coord()
                );
            }
        }
    }

    #[test]
    fn join_and_nesting_of_two_and_four() {
        let g2 = dyadic_grid(2, DEFAULT_ALPHA).unwrap();
        let g4 = dyadic_grid(4, DEFAULT_ALPHA).unwrap();
        assert!(is_nested(&g2.points, &g4.points));
        let joined = join(&g2.points, &g4.points);
        assert_eq!(joined, g4.points);
        let meet = intersect(&g2.points, &g4.points);
        assert_eq!(meet, g2.points);
    }

    #[test]
    fn point_ordering_is_exact_across_levels() {
        let half = DyadicPoint::new(3, 2); // 1/2
        let same = DyadicPoint::new(6, 3); // canonicalizes to 3/2^2
        assert_eq!(half, same);
        let quarter = DyadicPoint::new(5, 3); // 1/4
        assert!(quarter < half);
    }

    #[test]
    fn interval_count_stays_proportional_to_degree() {
        for p in [1, 4, 16, 64, 128] {
            let g = dyadic_grid(p, DEFAULT_ALPHA).unwrap();
            let ratio = g.num_intervals() as f64 / p as f64;
            assert!(ratio <= 8.0, "p={p}: {} intervals", g.num_intervals());
        }
    }

    #[test]
    fn memoization_returns_shared_grid() {
        let a = dyadic_grid(9, DEFAULT_ALPHA).unwrap();
        let b = dyadic_grid(9, DEFAULT_ALPHA).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let c = dyadic_grid(9, 1.5).unwrap();
        assert!(!Arc::ptr_eq(&a, &c));
    }
}
