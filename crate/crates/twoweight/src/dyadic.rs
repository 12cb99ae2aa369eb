//! Shifted dyadic grids, navigation, and the good/bad classification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::Interval;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DyadicError {
    #[error("scale {scale} outside grid window [{n_min}, {n_max}]")]
    ScaleOutsideWindow { scale: i32, n_min: i32, n_max: i32 },
    #[error("grid window [{0}, {1}] is empty")]
    EmptyWindow(i32, i32),
    #[error("bit vector has length {got}, window needs {want}")]
    BitLength { got: usize, want: usize },
    #[error("window top {top} is below the scale {scale} of the tested interval")]
    InsufficientWindow { scale: i32, top: i32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Shift bits of a dyadic grid over the scale window `[n_min, n_max]`.
///
/// Bit `i` (for `n_min <= i < n_max`) shifts every interval of scale above `i` by `2^i`;
/// bits below the window are taken to be zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridParam {
    n_min: i32,
    n_max: i32,
    bits: Vec<u8>,
    seed: Option<u64>,
}

/// An interval of a grid, addressed by scale (length `2^scale`) and index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub scale: i32,
    pub index: i64,
}

fn pow2(n: i32) -> f64 {
    2f64.powi(n)
}

impl GridParam {
    /// The unshifted grid over the window.
    pub fn standard(n_min: i32, n_max: i32) -> Result<Self, DyadicError> {
        Self::from_bits(n_min, n_max, vec![0; (n_max - n_min).max(0) as usize])
    }

    pub fn from_bits(n_min: i32, n_max: i32, bits: Vec<u8>) -> Result<Self, DyadicError> {
        if n_min > n_max {
            return Err(DyadicError::EmptyWindow(n_min, n_max));
        }
        let want = (n_max - n_min) as usize;
        if bits.len() != want {
            return Err(DyadicError::BitLength { got: bits.len(), want });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(DyadicError::InvalidParameter("shift bits must be 0 or 1".into()));
        }
        Ok(GridParam { n_min, n_max, bits, seed: None })
    }

    /// Fair random bits from a ChaCha stream keyed by `seed`.
    pub fn random(n_min: i32, n_max: i32, seed: u64) -> Result<Self, DyadicError> {
        Self::random_stream(n_min, n_max, seed, 0)
    }

    /// Like [`GridParam::random`] but on an independent stream, used for per-trial grids.
    pub fn random_stream(n_min: i32, n_max: i32, seed: u64, stream: u64) -> Result<Self, DyadicError> {
        if n_min > n_max {
            return Err(DyadicError::EmptyWindow(n_min, n_max));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let bits = (n_min..n_max).map(|_| rng.random::<bool>() as u8).collect();
        Ok(GridParam { n_min, n_max, bits, seed: Some(seed) })
    }

    pub fn n_min(&self) -> i32 {
        self.n_min
    }

    pub fn n_max(&self) -> i32 {
        self.n_max
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn bit(&self, i: i32) -> u8 {
        if i < self.n_min || i >= self.n_max {
            0
        } else {
            self.bits[(i - self.n_min) as usize]
        }
    }

    fn check_scale(&self, scale: i32) -> Result<(), DyadicError> {
        if scale < self.n_min || scale > self.n_max {
            Err(DyadicError::ScaleOutsideWindow { scale, n_min: self.n_min, n_max: self.n_max })
        } else {
            Ok(())
        }
    }

    /// Left endpoint of the index-0 interval at `scale`.
    pub fn offset(&self, scale: i32) -> f64 {
        (self.n_min..scale.min(self.n_max)).map(|i| self.bit(i) as f64 * pow2(i)).sum()
    }

    pub fn realize(&self, d: DyadicInterval) -> Result<Interval, DyadicError> {
        self.check_scale(d.scale)?;
        let len = pow2(d.scale);
        let left = len * d.index as f64 + self.offset(d.scale);
        Ok(Interval::new(left, left + len).expect("dyadic intervals have positive length"))
    }

    /// The interval of the given scale containing `x` (half-open convention).
    pub fn containing(&self, x: f64, scale: i32) -> Result<DyadicInterval, DyadicError> {
        self.check_scale(scale)?;
        let index = ((x - self.offset(scale)) / pow2(scale)).floor() as i64;
        Ok(DyadicInterval { scale, index })
    }

    pub fn parent(&self, d: DyadicInterval) -> Result<DyadicInterval, DyadicError> {
        self.check_scale(d.scale + 1)?;
        let b = self.bit(d.scale) as i64;
        Ok(DyadicInterval { scale: d.scale + 1, index: (d.index - b).div_euclid(2) })
    }

    /// The `j`-fold parent.
    pub fn ancestor(&self, d: DyadicInterval, j: u32) -> Result<DyadicInterval, DyadicError> {
        self.check_scale(d.scale + j as i32)?;
        let mut cur = d;
        for _ in 0..j {
            cur = self.parent(cur)?;
        }
        Ok(cur)
    }

    /// Left and right children.
    pub fn children(&self, d: DyadicInterval) -> Result<[DyadicInterval; 2], DyadicError> {
        self.check_scale(d.scale - 1)?;
        let b = self.bit(d.scale - 1) as i64;
        let k = 2 * d.index + b;
        Ok([
            DyadicInterval { scale: d.scale - 1, index: k },
            DyadicInterval { scale: d.scale - 1, index: k + 1 },
        ])
    }

    /// Whether `inner` is `outer` or one of its descendants.
    pub fn is_descendant(&self, inner: DyadicInterval, outer: DyadicInterval) -> bool {
        if inner.scale > outer.scale {
            return false;
        }
        match self.ancestor(inner, (outer.scale - inner.scale) as u32) {
            Ok(a) => a == outer,
            Err(_) => false,
        }
    }
}

/// A finite tree of a grid: `root` and its descendants down to `depth` generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub grid: GridParam,
    pub root: DyadicInterval,
    pub depth: u32,
}

impl Window {
    pub fn new(grid: GridParam, root: DyadicInterval, depth: u32) -> Result<Self, DyadicError> {
        grid.check_scale(root.scale)?;
        grid.check_scale(root.scale - depth as i32)?;
        Ok(Window { grid, root, depth })
    }

    /// Index of the leftmost descendant of the root at relative `level`.
    pub fn first_index(&self, level: u32) -> i64 {
        let mut k = self.root.index;
        for l in 0..level {
            let b = self.grid.bit(self.root.scale - l as i32 - 1) as i64;
            k = 2 * k + b;
        }
        k
    }

    /// The `j`-th descendant (from the left) at relative `level`.
    pub fn node(&self, level: u32, j: usize) -> DyadicInterval {
        DyadicInterval { scale: self.root.scale - level as i32, index: self.first_index(level) + j as i64 }
    }

    /// Relative level and left-to-right position of a node in the window.
    pub fn locate(&self, d: DyadicInterval) -> Option<(u32, usize)> {
        let level = self.root.scale - d.scale;
        if level < 0 || level as u32 > self.depth {
            return None;
        }
        let j = d.index - self.first_index(level as u32);
        (0..(1i64 << level)).contains(&j).then_some((level as u32, j as usize))
    }

    pub fn level(&self, level: u32) -> impl Iterator<Item = DyadicInterval> + '_ {
        let first = self.first_index(level);
        let scale = self.root.scale - level as i32;
        (0..(1i64 << level)).map(move |j| DyadicInterval { scale, index: first + j })
    }

    /// All nodes from the root down to `depth`, level by level.
    pub fn nodes(&self) -> Vec<DyadicInterval> {
        (0..=self.depth).flat_map(|l| self.level(l).collect::<Vec<_>>()).collect()
    }

    pub fn realize(&self, d: DyadicInterval) -> Interval {
        self.grid.realize(d).expect("window nodes lie in the grid window")
    }

    /// Breakpoints of the leaves, `2^depth + 1` points.
    pub fn leaf_breakpoints(&self) -> Vec<f64> {
        let root = self.realize(self.root);
        let n = 1usize << self.depth;
        let h = root.length() / n as f64;
        (0..=n).map(|i| if i == n { root.right() } else { root.left() + h * i as f64 }).collect()
    }
}

/// Endpoints and midpoint of an interval.
pub fn boundary_set(interval: &Interval) -> [f64; 3] {
    interval.boundary_set()
}

/// Outcome of a goodness test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodReport {
    pub good: bool,
    /// Scale of the first witnessing interval when bad.
    pub witness_scale: Option<i32>,
    /// The scan stopped at the window top while the interval still looked good,
    /// so larger intervals outside the window were not examined.
    pub capped: bool,
}

fn point_to_interval_distance(p: f64, j: &Interval) -> f64 {
    j.distance_to_point(p)
}

/// Tests whether `j` (an interval of `grid_a`) is `r`-good with respect to `grid_b`:
/// no interval `I` of `grid_b` with `|I| >= 2^r |J|` has a boundary point within
/// `|J|^eps |I|^(1-eps) / 2` of `J`. Scales are scanned up to the top of `grid_b`'s window.
pub fn is_r_good(
    j: DyadicInterval,
    grid_a: &GridParam,
    grid_b: &GridParam,
    r: u32,
    eps: f64,
) -> Result<GoodReport, DyadicError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(DyadicError::InvalidParameter(format!("eps must lie in (0,1), got {eps}")));
    }
    if r == 0 {
        return Err(DyadicError::InvalidParameter("r must be positive".into()));
    }
    let jr = grid_a.realize(j)?;
    good_against(&jr, j.scale, grid_b, r, eps)
}

pub(crate) fn good_against(
    jr: &Interval,
    j_scale: i32,
    grid_b: &GridParam,
    r: u32,
    eps: f64,
) -> Result<GoodReport, DyadicError> {
    if grid_b.n_max() < j_scale {
        return Err(DyadicError::InsufficientWindow { scale: j_scale, top: grid_b.n_max() });
    }
    let jl = jr.length();
    let start = j_scale + r as i32;
    for s in start.max(grid_b.n_min())..=grid_b.n_max() {
        let len = pow2(s);
        let threshold = 0.5 * jl.powf(eps) * len.powf(1.0 - eps);
        let k = grid_b.containing(jr.left(), s)?.index;
        for idx in [k - 1, k, k + 1] {
            let ir = grid_b.realize(DyadicInterval { scale: s, index: idx })?;
            if ir.boundary_set().iter().any(|&p| point_to_interval_distance(p, jr) <= threshold) {
                return Ok(GoodReport { good: false, witness_scale: Some(s), capped: false });
            }
        }
    }
    Ok(GoodReport { good: true, witness_scale: None, capped: start <= grid_b.n_max() })
}

/// Monte-Carlo estimate of the probability that `j` is `r`-bad for a random grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BadEstimate {
    pub r: u32,
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    pub bad: u64,
}

/// Draws `trials` random grids over `window` (trial `t` uses stream `t` of `seed`) and
/// counts how often `j` is `r`-bad.
pub fn estimate_bad_probability(
    j: DyadicInterval,
    grid_a: &GridParam,
    window: (i32, i32),
    r: u32,
    eps: f64,
    trials: u64,
    seed: u64,
) -> Result<BadEstimate, DyadicError> {
    if trials < 100 {
        return Err(DyadicError::InvalidParameter(format!("need at least 100 trials, got {trials}")));
    }
    let jr = grid_a.realize(j)?;
    if !(eps > 0.0 && eps < 1.0) || r == 0 {
        return Err(DyadicError::InvalidParameter("eps must lie in (0,1) and r must be positive".into()));
    }
    let bad: u64 = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64, DyadicError> {
            let grid_b = GridParam::random_stream(window.0, window.1, seed, t)?;
            let rep = good_against(&jr, j.scale, &grid_b, r, eps)?;
            Ok(u64::from(!rep.good))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let p = bad as f64 / trials as f64;
    Ok(BadEstimate { r, estimate: p, stderr: (p * (1.0 - p) / trials as f64).sqrt(), trials, bad })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(l: f64, r: f64) -> Interval {
        Interval::new(l, r).unwrap()
    }

    #[test]
    fn realize_examples() {
        let g = GridParam::standard(-10, 10).unwrap();
        assert_eq!(g.realize(DyadicInterval { scale: 0, index: 0 }).unwrap(), iv(0.0, 1.0));
        assert_eq!(g.realize(DyadicInterval { scale: -1, index: 1 }).unwrap(), iv(0.5, 1.0));
        let mut bits = vec![0u8; 20];
        bits[9] = 1; // scale -1
        let s = GridParam::from_bits(-10, 10, bits).unwrap();
        assert_eq!(s.realize(DyadicInterval { scale: 0, index: 0 }).unwrap(), iv(0.5, 1.5));
        assert!(g.realize(DyadicInterval { scale: 11, index: 0 }).is_err());
    }

    #[test]
    fn ancestor_examples() {
        let g = GridParam::standard(-10, 10).unwrap();
        let quarter = g.containing(0.1, -2).unwrap();
        assert_eq!(g.realize(g.ancestor(quarter, 2).unwrap()).unwrap(), iv(0.0, 1.0));
        let d = g.containing(0.4, -3).unwrap();
        assert_eq!(g.realize(d).unwrap(), iv(0.375, 0.5));
        assert_eq!(g.realize(g.ancestor(d, 1).unwrap()).unwrap(), iv(0.25, 0.5));
        assert!(g.ancestor(d, 20).is_err());
    }

    #[test]
    fn boundary_examples() {
        assert_eq!(boundary_set(&iv(0.0, 1.0)), [0.0, 0.5, 1.0]);
        assert_eq!(boundary_set(&iv(-2.0, 2.0)), [-2.0, 0.0, 2.0]);
        assert_eq!(boundary_set(&iv(1.0 / 3.0, 2.0 / 3.0))[1], 0.5);
    }

    #[test]
    fn goodness_examples() {
        // J = [1/4, 3/8); with r = 3 the only candidate scale in a window topped at 0 is [0,1) and its neighbours.
        let g = GridParam::standard(-10, 0).unwrap();
        let j = g.containing(0.3, -3).unwrap();
        assert!(is_r_good(j, &g, &g, 3, 0.75).unwrap().good);
        let bad = is_r_good(j, &g, &g, 3, 0.5).unwrap();
        assert!(!bad.good);
        assert_eq!(bad.witness_scale, Some(0));
        // sharing an endpoint with a large interval
        let edge = g.containing(0.0, -5).unwrap();
        for eps in [0.1, 0.5, 0.9] {
            assert!(!is_r_good(edge, &g, &g, 2, eps).unwrap().good);
        }
    }

    #[test]
    fn no_candidates_means_good_and_zero_probability() {
        let g = GridParam::standard(-4, 2).unwrap();
        let j = g.containing(0.3, 0).unwrap();
        let rep = is_r_good(j, &g, &g, 5, 0.5).unwrap();
        assert!(rep.good && !rep.capped);
        let est = estimate_bad_probability(j, &g, (-4, 2), 5, 0.5, 200, 1).unwrap();
        assert_eq!(est.estimate, 0.0);
    }

    #[test]
    fn estimate_is_reproducible() {
        let g = GridParam::standard(-2, 12).unwrap();
        let j = DyadicInterval { scale: 0, index: 0 };
        let a = estimate_bad_probability(j, &g, (-2, 12), 8, 0.5, 500, 42).unwrap();
        let b = estimate_bad_probability(j, &g, (-2, 12), 8, 0.5, 500, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.estimate > 0.0 && a.estimate < 1.0);
    }

    #[test]
    fn window_locate_round_trip() {
        let g = GridParam::random(-12, 4, 9).unwrap();
        let w = Window::new(g, DyadicInterval { scale: 0, index: 3 }, 5).unwrap();
        for l in 0..=5 {
            for (j, d) in w.level(l).enumerate() {
                assert_eq!(w.locate(d), Some((l, j)));
                assert!(w.grid.is_descendant(d, w.root));
            }
        }
        let bp = w.leaf_breakpoints();
        let root = w.realize(w.root);
        assert_eq!(bp[0], root.left());
        for (j, d) in w.level(5).enumerate() {
            assert_eq!(w.realize(d).left(), bp[j]);
        }
    }
}
