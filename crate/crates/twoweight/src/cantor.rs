//! The middle-thirds Cantor pair: the level-`m` approximation of the Cantor measure, the
//! gap-supported atomic measures built against it, and finite-depth checks of the
//! quantitative claims about the pair.
//!
//! Triadic endpoints are integer numerators over `3^k`, converted to floating point once.
//! Indices `j` are 0-based from the left.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{a2_constant, A2Half, ConditionError};
use crate::functionals::{mass_and_energy, poisson, psi_hybrid, PoissonVariant};
use crate::measure::{Closure, Interval, Measure, MeasureError, Region};
use crate::transform::{hilbert_at_point, solve_decreasing, testing_constant, Direction, TransformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CantorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no level point on gaps {0:?}")]
    MissingPoints(Vec<(u32, u64)>),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

pub fn pow3(k: u32) -> u64 {
    3u64.pow(k)
}

/// Numerator of the left endpoint of `I_j^k` over `3^k`: the ternary digits are twice the
/// binary digits of `j`.
pub fn left_numerator(k: u32, j: u64) -> u64 {
    (0..k).fold(0u64, |acc, i| 3 * acc + 2 * ((j >> (k - 1 - i)) & 1))
}

/// A closed interval `I_j^k` of the `k`-th generation, of length `3^-k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TriadicInterval {
    pub level: u32,
    pub index: u64,
    pub numerator: u64,
}

impl TriadicInterval {
    pub fn new(level: u32, index: u64) -> Self {
        TriadicInterval { level, index, numerator: left_numerator(level, index) }
    }

    pub fn left(&self) -> f64 {
        self.numerator as f64 / pow3(self.level) as f64
    }

    pub fn right(&self) -> f64 {
        (self.numerator + 1) as f64 / pow3(self.level) as f64
    }

    pub fn length(&self) -> f64 {
        1.0 / pow3(self.level) as f64
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.left(), self.right()).expect("triadic intervals are nondegenerate")
    }

    pub fn gap(&self) -> Gap {
        Gap { level: self.level, index: self.index, numerator: self.numerator }
    }

    pub fn children(&self) -> [TriadicInterval; 2] {
        [TriadicInterval::new(self.level + 1, 2 * self.index), TriadicInterval::new(self.level + 1, 2 * self.index + 1)]
    }
}

/// The removed open middle third `G_j^k = (a, b)` of `I_j^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub level: u32,
    pub index: u64,
    /// Left endpoint numerator of the enclosing `I_j^k`.
    pub numerator: u64,
}

impl Gap {
    pub fn left(&self) -> f64 {
        (3 * self.numerator + 1) as f64 / pow3(self.level + 1) as f64
    }

    pub fn right(&self) -> f64 {
        (3 * self.numerator + 2) as f64 / pow3(self.level + 1) as f64
    }

    pub fn center(&self) -> f64 {
        (6 * self.numerator + 3) as f64 / (2 * pow3(self.level + 1)) as f64
    }

    pub fn length(&self) -> f64 {
        1.0 / pow3(self.level + 1) as f64
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.left(), self.right()).expect("gaps are nondegenerate")
    }

    /// Atom mass `s^k = (1/3)^k (2/3)^k`.
    pub fn mass(&self) -> f64 {
        atom_mass(self.level)
    }
}

pub fn atom_mass(k: u32) -> f64 {
    (2.0f64 / 9.0).powi(k as i32)
}

/// Intervals of generation `m` together with every gap of generation below `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CantorLevel {
    pub depth: u32,
    pub intervals: Vec<TriadicInterval>,
    pub gaps: Vec<Gap>,
}

impl CantorLevel {
    pub fn new(depth: u32) -> Self {
        CantorLevel { depth, intervals: generation(depth), gaps: gaps_below(depth) }
    }
}

pub fn generation(k: u32) -> Vec<TriadicInterval> {
    (0..1u64 << k).map(|j| TriadicInterval::new(k, j)).collect()
}

/// Gaps of generations `0..m`, ordered by generation then position.
pub fn gaps_below(m: u32) -> Vec<Gap> {
    (0..m).flat_map(|k| generation(k).into_iter().map(|i| i.gap())).collect()
}

/// The absolutely continuous level-`m` approximation: density `(3/2)^m` on each interval
/// of generation `m`.
pub fn build_omega(m: u32) -> Result<Measure, CantorError> {
    if m == 0 || m > 30 {
        return Err(CantorError::InvalidParameter(format!("depth must lie in 1..=30, got {m}")));
    }
    let d = 1.5f64.powi(m as i32);
    let segs = generation(m).iter().map(|i| (i.left(), i.right(), d)).collect();
    Ok(Measure::new(vec![], segs)?)
}

/// Number of generation-`m` intervals inside `I_j^k`, so that `ω^(m)(I_j^k)` is that count
/// over `2^m`.
pub fn omega_mass_rational(m: u32, k: u32, j: u64) -> (u64, u64) {
    let inside = (0..1u64 << m).filter(|&i| i >> (m - k) == j).count() as u64;
    (inside, 1u64 << m)
}

/// Number of terms kept in the far-field expansion.
const TERMS: usize = 26;

/// Fast evaluation of `Hω^(m)` by self-similar far-field expansions: a generation-`ℓ`
/// interval far from the evaluation point is replaced by its centered moments, which are
/// those of `ω^(m-ℓ)` on `[0,1]` scaled by `2^-ℓ 3^-ℓn`.
#[derive(Debug, Clone)]
pub struct CantorHilbert {
    depth: u32,
    /// `moments[N][n]`: `n`-th moment of `ω^(N)` on `[0,1]` about `1/2`.
    moments: Vec<[f64; TERMS]>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl CantorHilbert {
    pub fn new(depth: u32) -> Self {
        let mut base = [0.0; TERMS];
        for (n, v) in base.iter_mut().enumerate() {
            if n % 2 == 0 {
                *v = 0.5f64.powi(n as i32) / (n + 1) as f64;
            }
        }
        let mut moments = vec![base];
        for _ in 0..depth {
            let prev = moments.last().unwrap();
            let mut next = [0.0; TERMS];
            for (n, v) in next.iter_mut().enumerate() {
                if n % 2 == 1 {
                    continue;
                }
                let mut s = 0.0;
                for i in (0..=n).step_by(2) {
                    // shifts of ±1/3 contribute equally for even n - i
                    s += binomial(n, i) * 3f64.powi(-(i as i32)) * prev[i] * 3f64.powi(-((n - i) as i32));
                }
                *v = s;
            }
            moments.push(next);
        }
        CantorHilbert { depth, moments }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// `Hω^(m)(x) = ∫ dω^(m)(y) / (x - y)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_within(x, TriadicInterval::new(0, 0))
    }

    /// `H(1_I ω^(m))(x)` for a triadic interval `I` of generation at most `m`.
    pub fn eval_within(&self, x: f64, root: TriadicInterval) -> f64 {
        let d = 1.5f64.powi(self.depth as i32);
        let mut total = 0.0;
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            let len = node.length();
            let c = node.left() + 0.5 * len;
            let u = x - c;
            if u.abs() >= 2.0 * len {
                let rem = (self.depth - node.level) as usize;
                let mass = 0.5f64.powi(node.level as i32);
                let mut s = 0.0;
                let mut p = 1.0 / u;
                let step = len * len / (u * u);
                for n in (0..TERMS).step_by(2) {
                    s += self.moments[rem][n] * p;
                    p *= step;
                }
                total += mass * s;
            } else if node.level == self.depth {
                total += d * ((x - node.left()).abs().ln() - (x - node.right()).abs().ln());
            } else {
                stack.extend(node.children());
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaVariant {
    /// Atoms at the gap centers.
    Center,
    /// Atoms at the zero of `Hω` on each gap.
    Zero,
    /// Atoms where `Hω = (3/2)^k` on each generation-`k` gap.
    Level,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapPoint {
    pub level: u32,
    pub index: u64,
    pub position: f64,
    pub mass: f64,
    /// `|z - center| / |G|`.
    pub displacement: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaBuild {
    pub variant: SigmaVariant,
    pub depth: u32,
    /// Depth of the approximation of `ω` used for root finding (absent for centers).
    pub surrogate_depth: Option<u32>,
    pub points: Vec<GapPoint>,
    #[serde(skip)]
    pub measure: Measure,
    /// Largest displacement over all gaps.
    pub max_displacement: f64,
}

/// Gap-supported atomic measure `Σ_{k<m} Σ_j s^k δ_{z_j^k}` with points chosen by `variant`;
/// zero and level points are located on `ω^(surrogate)` (`surrogate ≥ m`).
pub fn build_sigma(m: u32, variant: SigmaVariant, surrogate: u32) -> Result<SigmaBuild, CantorError> {
    if m == 0 {
        return Err(CantorError::InvalidParameter("depth must be positive".into()));
    }
    if variant != SigmaVariant::Center && surrogate < m {
        return Err(CantorError::InvalidParameter(format!("surrogate depth {surrogate} below {m}")));
    }
    let gaps = gaps_below(m);
    let h = CantorHilbert::new(surrogate);
    let located: Vec<Result<f64, (u32, u64)>> = gaps
        .par_iter()
        .map(|g| match variant {
            SigmaVariant::Center => Ok(g.center()),
            SigmaVariant::Zero | SigmaVariant::Level => {
                let target = if variant == SigmaVariant::Zero { 0.0 } else { 1.5f64.powi(g.level as i32) };
                solve_decreasing(|z| Ok(h.eval(z)), &g.interval(), target).map_err(|_| (g.level, g.index))
            }
        })
        .collect();
    let missing: Vec<(u32, u64)> = located.iter().filter_map(|r| r.err()).collect();
    if !missing.is_empty() {
        return Err(CantorError::MissingPoints(missing));
    }
    let points: Vec<GapPoint> = gaps
        .iter()
        .zip(located)
        .map(|(g, z)| {
            let z = z.expect("checked above");
            GapPoint {
                level: g.level,
                index: g.index,
                position: z,
                mass: g.mass(),
                displacement: (z - g.center()).abs() / g.length(),
            }
        })
        .collect();
    let measure = Measure::new(points.iter().map(|p| (p.position, p.mass)).collect(), vec![])?;
    let max_displacement = points.iter().map(|p| p.displacement).fold(0.0, f64::max);
    Ok(SigmaBuild {
        variant,
        depth: m,
        surrogate_depth: (variant != SigmaVariant::Center).then_some(surrogate),
        points,
        measure,
        max_displacement,
    })
}

/// `ε₀ = 1 / (log₂3 - 1/2)`.
pub fn epsilon_zero() -> f64 {
    1.0 / (3f64.ln() / 2f64.ln() - 0.5)
}

/// `½ Dil_{1/3} μ + ½ Trans_{2/3} Dil_{1/3} μ`.
pub fn omega_recursion(prev: &Measure) -> Result<Measure, CantorError> {
    let a = prev.affine_pushforward(1.0 / 3.0, 0.0)?.scaled(0.5);
    let b = prev.affine_pushforward(1.0 / 3.0, 2.0 / 3.0)?.scaled(0.5);
    Ok(a.sum(&b))
}

/// `(2/9) Dil_{1/3} μ + δ_{1/2} + (2/9) Trans_{2/3} Dil_{1/3} μ`.
pub fn sigma_recursion(prev: &Measure) -> Result<Measure, CantorError> {
    let a = prev.affine_pushforward(1.0 / 3.0, 0.0)?.scaled(2.0 / 9.0);
    let b = prev.affine_pushforward(1.0 / 3.0, 2.0 / 3.0)?.scaled(2.0 / 9.0);
    Ok(a.sum(&Measure::dirac(0.5, 1.0)?).sum(&b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupRow {
    pub level: u32,
    pub index: u64,
    /// `Hω(a - c 3^-k) (2/3)^k`.
    pub outside_left: f64,
    /// `Hω(a + c 3^-k) (2/3)^k`, inside the gap.
    pub inside_left: f64,
    /// `Hω(b - c 3^-k) (2/3)^k`, inside the gap.
    pub inside_right: f64,
    /// `Hω(b + c 3^-k) (2/3)^k`.
    pub outside_right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub depth: u32,
    pub c: f64,
    pub rows: Vec<BlowupRow>,
    /// `max / min` of the inside-left ratios over generations `2..=depth-2`.
    pub inside_band: f64,
    /// `max / min` of the outside-left ratios over the same range (infinite on a sign change).
    pub outside_band: f64,
}

fn band(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return 1.0;
    }
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Scaled values of `Hω^(m)` at distance `c 3^-k` on both sides of both endpoints of the
/// leftmost and rightmost gaps of each generation `k ≤ m - 2`.
pub fn blowup_rate_check(m: u32, c: f64) -> Result<BlowupReport, CantorError> {
    if !(c > 0.0 && c <= 0.5) {
        return Err(CantorError::InvalidParameter(format!("c must lie in (0, 1/2], got {c}")));
    }
    if m < 3 {
        return Err(CantorError::InvalidParameter("depth must be at least 3".into()));
    }
    let h = CantorHilbert::new(m);
    let mut rows = Vec::new();
    for k in 1..=m - 2 {
        let last = (1u64 << k) - 1;
        for j in if last == 0 { vec![0] } else { vec![0, last] } {
            let g = TriadicInterval::new(k, j).gap();
            let off = c / pow3(k) as f64;
            let s = (2.0f64 / 3.0).powi(k as i32);
            rows.push(BlowupRow {
                level: k,
                index: j,
                outside_left: h.eval(g.left() - off) * s,
                inside_left: h.eval(g.left() + off) * s,
                inside_right: h.eval(g.right() - off) * s,
                outside_right: h.eval(g.right() + off) * s,
            });
        }
    }
    let sel = |r: &&BlowupRow| r.level >= 2;
    let inside_band = band(rows.iter().filter(sel).map(|r| r.inside_left));
    let outside_band = band(rows.iter().filter(sel).map(|r| r.outside_left));
    Ok(BlowupReport { depth: m, c, rows, inside_band, outside_band })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalCheck {
    pub depth: u32,
    pub level: u32,
    pub index: u64,
    /// `(3/2)^ℓ sup_{I_j^k} σ(I_j^k ∩ Q) / |I_j^k|` with `Q = I_r^ℓ`.
    pub scaled_sup: f64,
    /// `∫ M(1_Q σ)² dω^(m) / σ(Q)`, with `M` the triadic maximal function.
    pub integral_ratio: f64,
}

/// Triadic maximal-function checks for `Q = I_r^ℓ` at depth `m`, using gap-center atoms
/// (every variant puts the same mass in each triadic interval).
pub fn maximal_function_check(m: u32, level: u32, index: u64) -> Result<MaximalCheck, CantorError> {
    if level + 2 > m {
        return Err(CantorError::InvalidParameter(format!("need level <= depth - 2, got {level} and {m}")));
    }
    if index >= 1u64 << level {
        return Err(CantorError::InvalidParameter(format!("index {index} out of range")));
    }
    let sigma = build_sigma(m, SigmaVariant::Center, m)?.measure;
    let q = TriadicInterval::new(level, index);
    let qi = q.interval();
    let sq = sigma.mass(&qi, Closure::CLOSED);
    // averages over every triadic interval of generation ≤ m
    let mut avg: Vec<Vec<f64>> = Vec::with_capacity(m as usize + 1);
    for k in 0..=m {
        let row = generation(k)
            .iter()
            .map(|t| match t.interval().intersect(&qi) {
                Some(x) => sigma.mass(&x, Closure::CLOSED) / t.length(),
                None => 0.0,
            })
            .collect();
        avg.push(row);
    }
    let scaled_sup = avg.iter().flatten().cloned().fold(0.0, f64::max) * 1.5f64.powi(level as i32);
    let n = 1usize << m;
    let mut integral = 0.0;
    for i in 0..n {
        let mx = (0..=m).map(|k| avg[k as usize][i >> (m - k)]).fold(0.0, f64::max);
        integral += mx * mx / n as f64;
    }
    Ok(MaximalCheck { depth: m, level, index, scaled_sup, integral_ratio: integral / sq })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassRow {
    pub level: u32,
    pub measured: f64,
    /// `(9/5)(2/9)^ℓ`.
    pub limit: f64,
    /// `(9/5)(2/9)^ℓ (1 - (4/9)^(m-ℓ))`, the value with generations below `m` only.
    pub truncated: f64,
    pub relative_error: f64,
    /// `(4/9)^(m-ℓ) / (1 - 4/9)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonRow {
    pub level: u32,
    /// Extremes over `r` of `P(I_r^ℓ, ω^(m)) (2/3)^ℓ`.
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PivotalRow {
    pub level: u32,
    /// Sum over the gaps of generations `≤ ℓ` of `σ(G) P(G, ω)²`.
    pub partial_sum: f64,
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceRow {
    pub level: u32,
    /// `Σ_j s^k |Hω(z̈_j^k)|²` with `Hω` evaluated directly on the surrogate.
    pub level_sum: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualHybridRow {
    pub level: u32,
    /// `max_j σ(I) E(I,σ) P(I,ω)² / ω(I)` over generation-`ℓ` intervals.
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestingRow {
    pub level: u32,
    pub forward: f64,
    pub dual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonZero {
    pub value: f64,
    /// `|(2/9)^(ε₀/2) - 1/2|`.
    pub identity_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimpleA2 {
    /// `max |s^k ω(I_j^k) / |I_j^k|² - 1|` over generations below `m`.
    pub max_deviation: f64,
    /// `√ max P(I,ω) P(I,σ)` over the triadic family.
    pub a2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub depth: u32,
    pub surrogate_depth: u32,
    pub max_displacement: f64,
    /// Largest change of a zero between surrogates of depth `m'` and `m' + 2`, relative to its gap.
    pub surrogate_sensitivity: f64,
    pub masses: Vec<MassRow>,
    pub poisson: Vec<PoissonRow>,
    pub pivotal: Vec<PivotalRow>,
    pub divergence: Vec<DivergenceRow>,
    pub epsilon_zero: EpsilonZero,
    pub dual_hybrid: Vec<DualHybridRow>,
    pub simple_a2: SimpleA2,
    pub testing: Vec<TestingRow>,
    /// `max |H(1_Q ω)(z)| / P(Q, ω)` over atoms `z ∈ Q`, `Q` triadic.
    pub poisson_claim: f64,
}

/// Report sections, selectable individually.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sections {
    pub masses: bool,
    pub poisson: bool,
    pub pivotal: bool,
    pub divergence: bool,
    pub dual_hybrid: bool,
    pub simple_a2: bool,
    pub testing: bool,
}

impl Sections {
    pub const ALL: Sections = Sections {
        masses: true,
        poisson: true,
        pivotal: true,
        divergence: true,
        dual_hybrid: true,
        simple_a2: true,
        testing: true,
    };
    pub const NONE: Sections = Sections {
        masses: false,
        poisson: false,
        pivotal: false,
        divergence: false,
        dual_hybrid: false,
        simple_a2: false,
        testing: false,
    };
}

pub fn mass_rows(m: u32, sigma: &Measure) -> Vec<MassRow> {
    (0..m)
        .map(|l| {
            let q = TriadicInterval::new(l, 0).interval();
            let measured = sigma.mass(&q, Closure::CLOSED);
            let limit = 1.8 * atom_mass(l);
            let tail = (4.0f64 / 9.0).powi((m - l) as i32);
            MassRow {
                level: l,
                measured,
                limit,
                truncated: limit * (1.0 - tail),
                relative_error: (measured - limit).abs() / limit,
                bound: tail / (1.0 - 4.0 / 9.0),
            }
        })
        .collect()
}

pub fn poisson_rows(omega: &Measure, levels: u32) -> Vec<PoissonRow> {
    (0..=levels)
        .map(|l| {
            let s = (2.0f64 / 3.0).powi(l as i32);
            let v: Vec<f64> =
                generation(l).par_iter().map(|t| poisson(&t.interval(), omega, PoissonVariant::Standard) * s).collect();
            PoissonRow {
                level: l,
                min: v.iter().cloned().fold(f64::INFINITY, f64::min),
                max: v.iter().cloned().fold(0.0, f64::max),
            }
        })
        .collect()
}

/// Dual pivotal sums over the gap partition of `[0,1]`.
pub fn pivotal_rows(omega: &Measure, sigma: &Measure, m: u32) -> Vec<PivotalRow> {
    let region = Region::Within(Interval::new(0.0, 1.0).unwrap());
    let mut total = 0.0;
    (0..m)
        .map(|l| {
            let inc: f64 = generation(l)
                .par_iter()
                .map(|t| psi_hybrid(&t.gap().interval(), &region, sigma, omega, 0.0))
                .collect::<Vec<f64>>()
                .iter()
                .sum();
            total += inc;
            PivotalRow { level: l, partial_sum: total, increment: inc }
        })
        .collect()
}

/// `Σ s^k |Hω(z)|²` per generation for level points, with `Hω` computed directly on `ω^(surrogate)`.
pub fn divergence_rows(m: u32, surrogate: u32) -> Result<Vec<DivergenceRow>, CantorError> {
    let build = build_sigma(m, SigmaVariant::Level, surrogate)?;
    let omega = build_omega(surrogate)?;
    let values: Vec<Result<(u32, f64), TransformError>> = build
        .points
        .par_iter()
        .map(|p| hilbert_at_point(&omega, p.position, None).map(|h| (p.level, p.mass * h * h)))
        .collect();
    let mut per_level = vec![0.0; m as usize];
    for v in values {
        let (k, x) = v?;
        per_level[k as usize] += x;
    }
    let mut cumulative = 0.0;
    Ok(per_level
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            if k >= 1 {
                cumulative += s;
            }
            DivergenceRow { level: k as u32, level_sum: s, cumulative }
        })
        .collect())
}

/// Worst ratio `σ(I) E(I,σ)^ε P(I,ω)² / ω(I)` per generation `ℓ ≤ levels`.
pub fn dual_hybrid_rows(omega: &Measure, sigma: &Measure, levels: u32, eps: f64) -> Vec<DualHybridRow> {
    (0..=levels)
        .map(|l| {
            let v: Vec<f64> = generation(l)
                .par_iter()
                .map(|t| {
                    let i = t.interval();
                    let (ms, e) = mass_and_energy(&i, sigma);
                    let Some(e) = e else { return 0.0 };
                    let p = poisson(&i, omega, PoissonVariant::Standard);
                    ms * e.powf(eps) * p * p / omega.mass(&i, Closure::CLOSED)
                })
                .collect();
            DualHybridRow { level: l, max_ratio: v.into_iter().fold(0.0, f64::max) }
        })
        .collect()
}

fn simple_a2(omega: &Measure, sigma: &Measure, m: u32) -> Result<SimpleA2, CantorError> {
    let mut dev: f64 = 0.0;
    let mut family = Vec::new();
    for k in 0..m {
        for t in generation(k) {
            let i = t.interval();
            let v = atom_mass(k) * omega.mass(&i, Closure::CLOSED) / (i.length() * i.length());
            dev = dev.max((v - 1.0).abs());
            family.push(i);
        }
    }
    let a2 = a2_constant(omega, sigma, &family, A2Half::Both)?.value;
    Ok(SimpleA2 { max_deviation: dev, a2 })
}

fn testing_rows(omega: &Measure, sigma: &Measure, levels: u32) -> Result<Vec<TestingRow>, CantorError> {
    (0..=levels)
        .map(|l| {
            let family: Vec<Interval> = generation(l).iter().map(|t| t.interval()).collect();
            let forward = testing_constant(omega, sigma, &family, Direction::Forward, None)?.constant;
            let dual = testing_constant(omega, sigma, &family, Direction::Dual, None)?.constant;
            Ok(TestingRow { level: l, forward, dual })
        })
        .collect()
}

fn poisson_claim(omega_depth: u32, omega: &Measure, points: &[GapPoint], levels: u32) -> f64 {
    let h = CantorHilbert::new(omega_depth);
    let mut worst: f64 = 0.0;
    for l in 0..=levels {
        for t in generation(l) {
            let i = t.interval();
            let p = poisson(&i, omega, PoissonVariant::Standard);
            for z in points.iter().filter(|z| i.contains_closed(z.position)) {
                worst = worst.max(h.eval_within(z.position, t).abs() / p);
            }
        }
    }
    worst
}

/// Finite-depth study of the pair `(ω^(m), σ^(m))`, `σ` carrying its atoms at the zeros of
/// `Hω^(m')`.
pub fn counterexample_report(m: u32, surrogate: u32, sections: Sections) -> Result<CounterexampleReport, CantorError> {
    if m < 4 {
        return Err(CantorError::InvalidParameter(format!("depth must be at least 4, got {m}")));
    }
    let omega = build_omega(m)?;
    let sigma_build = build_sigma(m, SigmaVariant::Zero, surrogate)?;
    let finer = build_sigma(m, SigmaVariant::Zero, surrogate + 2)?;
    let surrogate_sensitivity = sigma_build
        .points
        .iter()
        .zip(&finer.points)
        .map(|(a, b)| (a.position - b.position).abs() * pow3(a.level + 1) as f64)
        .fold(0.0, f64::max);
    let sigma = &sigma_build.measure;
    let testing_levels = (m - 2).min(5);
    Ok(CounterexampleReport {
        depth: m,
        surrogate_depth: surrogate,
        max_displacement: sigma_build.max_displacement,
        surrogate_sensitivity,
        masses: if sections.masses { mass_rows(m, sigma) } else { Vec::new() },
        poisson: if sections.poisson { poisson_rows(&omega, m - 2) } else { Vec::new() },
        pivotal: if sections.pivotal { pivotal_rows(&omega, sigma, m) } else { Vec::new() },
        divergence: if sections.divergence { divergence_rows(m, surrogate)? } else { Vec::new() },
        epsilon_zero: EpsilonZero {
            value: epsilon_zero(),
            identity_residual: ((2.0f64 / 9.0).powf(epsilon_zero() / 2.0) - 0.5).abs(),
        },
        dual_hybrid: if sections.dual_hybrid { dual_hybrid_rows(&omega, sigma, m, 1.0) } else { Vec::new() },
        simple_a2: if sections.simple_a2 {
            simple_a2(&omega, sigma, m)?
        } else {
            SimpleA2 { max_deviation: f64::NAN, a2: f64::NAN }
        },
        testing: if sections.testing { testing_rows(&omega, sigma, testing_levels)? } else { Vec::new() },
        poisson_claim: if sections.poisson { poisson_claim(m, &omega, &sigma_build.points, m - 2) } else { f64::NAN },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triadic_endpoints() {
        let g = TriadicInterval::new(0, 0).gap();
        assert_eq!((g.left(), g.right(), g.center()), (1.0 / 3.0, 2.0 / 3.0, 0.5));
        assert_eq!(g.mass(), 1.0);
        let i = TriadicInterval::new(2, 3);
        assert_eq!(i.left(), 8.0 / 9.0);
        let g1 = TriadicInterval::new(1, 0).gap();
        assert_eq!((g1.left(), g1.right()), (1.0 / 9.0, 2.0 / 9.0));
        assert!((g1.mass() - 2.0 / 9.0).abs() < 1e-16);
        let lv = CantorLevel::new(4);
        assert_eq!(lv.intervals.len(), 16);
        assert_eq!(lv.gaps.len(), 15);
    }

    #[test]
    fn omega_masses() {
        let w = build_omega(6).unwrap();
        assert!((w.total_mass() - 1.0).abs() < 1e-13);
        for k in 0..=6 {
            for t in generation(k) {
                assert!((w.mass(&t.interval(), Closure::CLOSED) - 0.5f64.powi(k as i32)).abs() < 1e-13);
            }
            assert_eq!(omega_mass_rational(6, k, 0), (1u64 << (6 - k), 64));
        }
        assert_eq!(w.segments()[0].density, 1.5f64.powi(6));
    }

    #[test]
    fn fast_evaluator_matches_direct() {
        let m = 7;
        let h = CantorHilbert::new(m);
        let w = build_omega(m).unwrap();
        for g in gaps_below(m).iter().step_by(5) {
            for x in [g.left() + 0.1 * g.length(), g.center(), g.right() - 0.01 * g.length()] {
                let a = h.eval(x);
                let b = hilbert_at_point(&w, x, None).unwrap();
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{x}: {a} vs {b}");
            }
        }
        for x in [-0.5, 1.7, 0.05] {
            let b = hilbert_at_point(&w, x, None).unwrap();
            assert!((h.eval(x) - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
        let q = TriadicInterval::new(2, 1);
        let part = w.restrict(&q.interval(), false);
        let b = hilbert_at_point(&part, 0.5, None).unwrap();
        assert!((h.eval_within(0.5, q) - b).abs() < 1e-10 * b.abs());
    }

    #[test]
    fn zero_variant_is_symmetric() {
        let s = build_sigma(3, SigmaVariant::Zero, 9).unwrap();
        assert!((s.points[0].position - 0.5).abs() < 1e-12);
        assert!(s.max_displacement < 0.5);
        let c = build_sigma(3, SigmaVariant::Center, 3).unwrap();
        assert_eq!(c.points[1].position, 1.5 / 9.0);
    }

    #[test]
    fn self_similarity() {
        for m in 2..6 {
            let lhs = build_omega(m).unwrap();
            let rhs = omega_recursion(&build_omega(m - 1).unwrap()).unwrap();
            assert!(lhs.approx_eq(&rhs, 1e-12));
            let sl = build_sigma(m, SigmaVariant::Center, m).unwrap().measure;
            let sr = sigma_recursion(&build_sigma(m - 1, SigmaVariant::Center, m).unwrap().measure).unwrap();
            assert!(sl.approx_eq(&sr, 1e-12));
        }
    }

    #[test]
    fn epsilon_zero_identity() {
        let e = epsilon_zero();
        assert!(((2.0f64 / 9.0).powf(e / 2.0) - 0.5).abs() < 1e-12);
        assert!((e - 0.9217).abs() < 1e-4);
    }

    #[test]
    fn blowup_signs() {
        let r = blowup_rate_check(10, 1.0 / 60.0).unwrap();
        for row in &r.rows {
            assert!(row.inside_left > 0.0 && row.inside_right < 0.0);
        }
        // mirror symmetry x -> 1 - x flips the sign of Hω
        for pair in r.rows.chunks(2).skip(1) {
            assert!((pair[0].outside_left + pair[1].outside_right).abs() < 1e-8 * pair[0].outside_left.abs().max(1.0));
        }
        assert!(r.inside_band < 3.0);
    }

    #[test]
    fn maximal_check_small() {
        let c = maximal_function_check(6, 0, 0).unwrap();
        assert!(c.scaled_sup > 1.0 && c.scaled_sup < 2.0);
        assert!(c.integral_ratio.is_finite() && c.integral_ratio > 0.0);
    }
}
