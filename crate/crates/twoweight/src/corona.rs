//! Stopping intervals, corona decompositions, Carleson sums and the regrouping of the
//! bilinear form `⟨H(σf), φ⟩_ω` into labeled pieces.
//!
//! Window nodes are addressed by `(level, position)` relative to the window root.
//! Pairings against the transform are read off a table of leaf-to-leaf interactions, so
//! every piece is an exact regrouping of one finite double sum.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::conditions::{energy_hypothesis_dyadic, ConditionError};
use crate::dyadic::{is_r_good, DyadicError, DyadicInterval, Window};
use crate::functionals::{psi_gamma_eps, FunctionalError};
use crate::haar::{analyze, window_haar_values, window_masses, HaarCoefficients, StepFunction};
use crate::measure::{Interval, Measure, Region};
use crate::transform::{interaction, pair_form, TransformError, TruncationProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoronaError {
    #[error("root carries no sigma mass")]
    EmptyRoot,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("forest and table were built on different windows")]
    WindowMismatch,
    #[error("{side} function has mean {mean}, expected zero")]
    NotMeanZero { side: &'static str, mean: f64 },
    #[error("{0} function is not supported in the window root or not constant on its leaves")]
    NotWindowMeasurable(&'static str),
    #[error("good pair {sigma:?}, {omega:?} overlaps without nesting")]
    GeometryViolation { sigma: DyadicInterval, omega: DyadicInterval },
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

type Pos = (u32, usize);

fn ancestor_pos((l, j): Pos, up: u32) -> Pos {
    (l - up, j >> up)
}

/// Leaf index range `[lo, hi)` covered by a node.
fn leaf_range(depth: u32, (l, j): Pos) -> (usize, usize) {
    let w = 1usize << (depth - l);
    (j * w, (j + 1) * w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingNode {
    pub interval: DyadicInterval,
    pub realized: Interval,
    pub level: u32,
    pub position: usize,
    /// 1 for the root.
    pub generation: u32,
    /// Index of the parent stopping interval in [`StoppingForest::nodes`].
    pub parent: Option<usize>,
    pub sigma_mass: f64,
    /// Ψ estimate that triggered the selection (absent for the root).
    pub psi: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StoppingForest {
    pub window: Window,
    pub gamma: f64,
    pub eps: f64,
    pub threshold: f64,
    pub budget: u32,
    nodes: Vec<StoppingNode>,
    #[serde(skip)]
    index: HashMap<Pos, usize>,
}

impl StoppingForest {
    pub fn nodes(&self) -> &[StoppingNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Index of the node at a window position, if it is a stopping interval.
    pub fn find(&self, pos: Pos) -> Option<usize> {
        self.index.get(&pos).copied()
    }

    /// The smallest stopping interval containing the window node at `pos`.
    pub fn minimal_containing(&self, pos: Pos) -> usize {
        (0..=pos.0)
            .find_map(|up| self.find(ancestor_pos(pos, up)))
            .expect("the root is a stopping interval")
    }

    /// Stopping children of a node.
    pub fn children_of(&self, k: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&c| self.nodes[c].parent == Some(k)).collect()
    }

    /// The `t`-fold stopping parent.
    pub fn ancestor(&self, mut k: usize, t: u32) -> Option<usize> {
        for _ in 0..t {
            k = self.nodes[k].parent?;
        }
        Some(k)
    }

    fn leaves(&self, k: usize) -> (usize, usize) {
        let n = &self.nodes[k];
        leaf_range(self.window.depth, (n.level, n.position))
    }
}

/// Builds the stopping intervals: starting from the window root, each stopping interval `S`
/// receives as children the maximal strict window descendants `S'` with `σ(S') > 0` and
/// `Ψ_{γ,ε}(S', S) ≥ 4 F² σ(S')`, Ψ being the budgeted lower-bound estimator.
///
/// Descendants without σ-mass are never selected: they satisfy the threshold vacuously and
/// carry no σ-Haar content.
#[allow(clippy::too_many_arguments)]
pub fn build_stopping_forest(
    sigma: &Measure,
    omega: &Measure,
    window: &Window,
    gamma: f64,
    eps: f64,
    threshold: f64,
    budget: u32,
) -> Result<StoppingForest, CoronaError> {
    if !(threshold > 0.0) {
        return Err(CoronaError::InvalidParameter(format!("threshold must be positive, got {threshold}")));
    }
    let masses = window_masses(window, sigma);
    if masses[0][0] <= 0.0 {
        return Err(CoronaError::EmptyRoot);
    }
    let root = window.root;
    let mut forest = StoppingForest {
        window: window.clone(),
        gamma,
        eps,
        threshold,
        budget,
        nodes: vec![StoppingNode {
            interval: root,
            realized: window.realize(root),
            level: 0,
            position: 0,
            generation: 1,
            parent: None,
            sigma_mass: masses[0][0],
            psi: None,
        }],
        index: HashMap::from([((0, 0), 0)]),
    };
    let factor = 4.0 * threshold * threshold;
    let mut k = 0;
    while k < forest.nodes.len() {
        let s = forest.nodes[k].clone();
        let region = Region::Within(s.realized);
        let mut stack: Vec<Pos> = Vec::new();
        if s.level < window.depth {
            stack.push((s.level + 1, 2 * s.position + 1));
            stack.push((s.level + 1, 2 * s.position));
        }
        while let Some((l, j)) = stack.pop() {
            let m = masses[l as usize][j];
            if m <= 0.0 {
                continue;
            }
            let d = window.node(l, j);
            let iv = window.realize(d);
            let psi = psi_gamma_eps(&iv, &region, omega, sigma, gamma, eps, budget)?.value;
            if psi >= factor * m {
                forest.index.insert((l, j), forest.nodes.len());
                forest.nodes.push(StoppingNode {
                    interval: d,
                    realized: iv,
                    level: l,
                    position: j,
                    generation: s.generation + 1,
                    parent: Some(k),
                    sigma_mass: m,
                    psi: Some(psi),
                });
            } else if l < window.depth {
                stack.push((l + 1, 2 * j + 1));
                stack.push((l + 1, 2 * j));
            }
        }
        k += 1;
    }
    Ok(forest)
}

/// The largest window value of the dyadic Energy Hypothesis constant, taken over every
/// window node with σ-mass as the parent interval. Used as the stopping threshold it
/// makes the quarter packing bound hold by construction.
pub fn calibrate_threshold(
    sigma: &Measure,
    omega: &Measure,
    window: &Window,
    gamma: f64,
    eps: f64,
    budget: u32,
) -> Result<f64, CoronaError> {
    let masses = window_masses(window, sigma);
    let mut best: f64 = 0.0;
    for l in 0..window.depth {
        for j in 0..1usize << l {
            if masses[l as usize][j] <= 0.0 {
                continue;
            }
            let iv = window.realize(window.node(l, j));
            let r = energy_hypothesis_dyadic(omega, sigma, &iv, gamma, eps, window.depth - l, budget, false)?;
            best = best.max(r.value);
        }
    }
    Ok(best)
}

/// Packing bound check: the worst ratio `Σ_{S' child of S} σ(S') / σ(S)`.
pub fn worst_packing_ratio(forest: &StoppingForest) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..forest.len() {
        let total: f64 = forest.children_of(k).iter().map(|&c| forest.nodes[c].sigma_mass).sum();
        worst = worst.max(total / forest.nodes[k].sigma_mass);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Sigma,
    Omega,
}

/// Membership of window nodes in the coronas of a forest.
#[derive(Debug, Clone)]
pub struct CoronaAssignment {
    pub sigma_window: Window,
    pub omega_window: Window,
    pub r: u32,
    /// For σ nodes above the leaves: the stopping intervals (one or two) whose corona
    /// contains the node.
    sigma: Vec<Vec<Vec<usize>>>,
    /// For ω nodes above the leaves: the stopping interval whose corona contains it.
    omega: Vec<Vec<Option<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentRow {
    pub side: Side,
    pub interval: DyadicInterval,
    pub stopping: Vec<DyadicInterval>,
}

impl CoronaAssignment {
    pub fn sigma_coronas(&self, pos: Pos) -> &[usize] {
        &self.sigma[pos.0 as usize][pos.1]
    }

    /// `None` for unassigned nodes and for leaves.
    pub fn omega_corona(&self, pos: Pos) -> Option<usize> {
        self.omega.get(pos.0 as usize).and_then(|row| row[pos.1])
    }

    /// ω nodes of the corona of stopping node `k`, in window order.
    pub fn omega_members(&self, k: usize) -> Vec<Pos> {
        let mut out = Vec::new();
        for (l, row) in self.omega.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                if *s == Some(k) {
                    out.push((l as u32, j));
                }
            }
        }
        out
    }

    pub fn rows(&self, forest: &StoppingForest) -> Vec<AssignmentRow> {
        let mut out = Vec::new();
        for (l, row) in self.sigma.iter().enumerate() {
            for (j, list) in row.iter().enumerate() {
                out.push(AssignmentRow {
                    side: Side::Sigma,
                    interval: self.sigma_window.node(l as u32, j),
                    stopping: list.iter().map(|&k| forest.nodes[k].interval).collect(),
                });
            }
        }
        for (l, row) in self.omega.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                out.push(AssignmentRow {
                    side: Side::Omega,
                    interval: self.omega_window.node(l as u32, j),
                    stopping: s.iter().map(|&k| forest.nodes[k].interval).collect(),
                });
            }
        }
        out
    }
}

/// σ side: a node belongs to the corona of each minimal stopping interval containing one
/// of its children. ω side: a node belongs to the corona of the smallest stopping interval
/// `S` with `J ⊂ S` and `2^r |J| < |S|`; nodes with no such `S` stay unassigned.
pub fn corona_assign(forest: &StoppingForest, omega_window: &Window, r: u32) -> CoronaAssignment {
    let sw = &forest.window;
    let mut sigma = Vec::with_capacity(sw.depth as usize);
    for l in 0..sw.depth {
        let row: Vec<Vec<usize>> = (0..1usize << l)
            .map(|j| {
                let a = forest.minimal_containing((l + 1, 2 * j));
                let b = forest.minimal_containing((l + 1, 2 * j + 1));
                if a == b {
                    vec![a]
                } else {
                    vec![a.min(b), a.max(b)]
                }
            })
            .collect();
        sigma.push(row);
    }
    let factor = 2f64.powi(r as i32);
    let mut omega = Vec::with_capacity(omega_window.depth as usize);
    for l in 0..omega_window.depth {
        let row: Vec<Option<usize>> = omega_window
            .level(l)
            .map(|d| {
                let jr = omega_window.realize(d);
                let tol = 1e-12 * jr.length();
                let mut best: Option<usize> = None;
                for (k, s) in forest.nodes.iter().enumerate() {
                    let sr = s.realized;
                    if jr.left() >= sr.left() - tol && jr.right() <= sr.right() + tol && factor * jr.length() < sr.length() {
                        let better = best.map_or(true, |b| sr.length() < forest.nodes[b].realized.length());
                        if better {
                            best = Some(k);
                        }
                    }
                }
                best
            })
            .collect();
        omega.push(row);
    }
    CoronaAssignment { sigma_window: sw.clone(), omega_window: omega_window.clone(), r, sigma, omega }
}

/// Haar expansion of `f` in `L²(μ)` restricted to the corona of stopping node `k`.
pub fn corona_projection(
    k: usize,
    f: &StepFunction,
    mu: &Measure,
    side: Side,
    assignment: &CoronaAssignment,
) -> HaarCoefficients {
    let window = match side {
        Side::Sigma => &assignment.sigma_window,
        Side::Omega => &assignment.omega_window,
    };
    let full = analyze(f, mu, window);
    full.filtered(|d| {
        let pos = window.locate(*d).expect("coefficients live in the window");
        match side {
            Side::Sigma => assignment.sigma_coronas(pos).contains(&k),
            Side::Omega => assignment.omega_corona(pos) == Some(k),
        }
    })
}

/// Leaf-to-leaf interactions `∫∫ K(x-y) dσ|_p(y) dω|_q(x)` between the leaves of a σ window
/// and an ω window, folded against the ω Haar functions.
#[derive(Debug, Clone)]
pub struct InteractionTable {
    sigma: Measure,
    omega: Measure,
    sigma_window: Window,
    omega_window: Window,
    trunc: Option<TruncationProfile>,
    sigma_masses: Vec<Vec<f64>>,
    omega_masses: Vec<Vec<f64>>,
    sigma_haar: Vec<Vec<Option<(f64, f64)>>>,
    /// For each ω node above the leaves: prefix sums over σ leaves of `⟨H(σ 1_p), h_J⟩_ω`.
    prefix: Vec<Vec<Vec<f64>>>,
}

fn leaf_pieces(window: &Window, mu: &Measure) -> Vec<Measure> {
    let bp = window.leaf_breakpoints();
    bp.windows(2)
        .map(|w| mu.restrict_region(&Region::Within(Interval::new(w[0], w[1]).expect("leaf has positive length"))))
        .collect()
}

impl InteractionTable {
    pub fn new(
        sigma: &Measure,
        omega: &Measure,
        sigma_window: &Window,
        omega_window: &Window,
        trunc: Option<TruncationProfile>,
    ) -> Result<Self, CoronaError> {
        let sp = leaf_pieces(sigma_window, sigma);
        let wp = leaf_pieces(omega_window, omega);
        let nw = wp.len();
        let matrix: Vec<Vec<f64>> = sp
            .par_iter()
            .map(|s| {
                wp.iter()
                    .map(|w| if s.is_zero() || w.is_zero() { Ok(0.0) } else { interaction(s, w, trunc) })
                    .collect::<Result<Vec<f64>, TransformError>>()
            })
            .collect::<Result<_, _>>()?;
        let omega_masses = window_masses(omega_window, omega);
        let omega_haar = window_haar_values(&omega_masses);
        let od = omega_window.depth;
        let mut prefix = Vec::with_capacity(od as usize);
        for l in 0..od {
            let row: Vec<Vec<f64>> = (0..1usize << l)
                .map(|j| {
                    let mut out = vec![0.0; sp.len() + 1];
                    if let Some((a, b)) = omega_haar[l as usize][j] {
                        let (lo, hi) = leaf_range(od, (l, j));
                        let mid = (lo + hi) / 2;
                        for (p, row) in matrix.iter().enumerate() {
                            let left: f64 = row[lo..mid].iter().sum();
                            let right: f64 = row[mid..hi].iter().sum();
                            out[p + 1] = out[p] + a * left + b * right;
                        }
                    }
                    out
                })
                .collect();
            prefix.push(row);
        }
        debug_assert!(matrix.iter().all(|r| r.len() == nw));
        let sigma_masses = window_masses(sigma_window, sigma);
        let sigma_haar = window_haar_values(&sigma_masses);
        Ok(InteractionTable {
            sigma: sigma.clone(),
            omega: omega.clone(),
            sigma_window: sigma_window.clone(),
            omega_window: omega_window.clone(),
            trunc,
            sigma_masses,
            omega_masses,
            sigma_haar,
            prefix,
        })
    }

    pub fn sigma_window(&self) -> &Window {
        &self.sigma_window
    }

    pub fn omega_window(&self) -> &Window {
        &self.omega_window
    }

    /// `⟨H(σ 1_E), h_J⟩_ω` for `E` the union of σ leaves `lo..hi` (zero when `h_J` is undefined).
    pub fn range_pairing(&self, lo: usize, hi: usize, j: Pos) -> f64 {
        let p = &self.prefix[j.0 as usize][j.1];
        p[hi] - p[lo]
    }

    /// `⟨H(σ 1_I), h_J⟩_ω` for a σ window node `I`.
    pub fn node_pairing(&self, i: Pos, j: Pos) -> f64 {
        let (lo, hi) = leaf_range(self.sigma_window.depth, i);
        self.range_pairing(lo, hi, j)
    }

    /// `⟨H(σ h_I), h_J⟩_ω`, or `None` when `h_I` is undefined.
    pub fn haar_pairing(&self, i: Pos, j: Pos) -> Option<f64> {
        let (a, b) = self.sigma_haar[i.0 as usize][i.1]?;
        Some(a * self.node_pairing((i.0 + 1, 2 * i.1), j) + b * self.node_pairing((i.0 + 1, 2 * i.1 + 1), j))
    }

    pub fn sigma_mass(&self, pos: Pos) -> f64 {
        self.sigma_masses[pos.0 as usize][pos.1]
    }

    pub fn omega_mass(&self, pos: Pos) -> f64 {
        self.omega_masses[pos.0 as usize][pos.1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CarlesonKind {
    Alpha,
    Beta,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlesonEntry {
    pub stopping: DyadicInterval,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlesonTable {
    pub kind: CarlesonKind,
    pub t: u32,
    pub values: Vec<CarlesonEntry>,
    /// `max_K Σ_{S : dyadic parent of S ⊂ K} value(S) / σ(K)` over window nodes `K`.
    pub ratio: f64,
    pub ratio_witness: Option<DyadicInterval>,
}

/// Leaf ranges of `outer ∖ inner` for nested window nodes.
fn difference_ranges(depth: u32, outer: Pos, inner: Pos) -> [(usize, usize); 2] {
    let (olo, ohi) = leaf_range(depth, outer);
    let (ilo, ihi) = leaf_range(depth, inner);
    [(olo, ilo), (ihi, ohi)]
}

fn projected_norm_sq(table: &InteractionTable, members: &[Pos], ranges: &[(usize, usize)]) -> f64 {
    members
        .iter()
        .map(|&j| {
            let v: f64 = ranges.iter().map(|&(lo, hi)| table.range_pairing(lo, hi, j)).sum();
            v * v
        })
        .sum()
}

/// Per-stopping-interval Carleson quantities and their aggregated ratio.
///
/// * `alpha`, for `t ≥ 1`: `Σ_{S' : π^t(S') = S} ‖P^ω_{S'} H(σ 1_{π(S) ∖ S})‖²`
/// * `beta`: `‖P^ω_S H(σ 1_{dyadic parent of S})‖²`
/// * `gamma`: `‖P^ω_S H(σ 1_{π(S) ∖ dyadic parent of S})‖²`
///
/// where `π` is the stopping parent. Only stopping intervals below the root appear.
pub fn carleson_sums(
    table: &InteractionTable,
    forest: &StoppingForest,
    assignment: &CoronaAssignment,
    kind: CarlesonKind,
    t: u32,
) -> Result<CarlesonTable, CoronaError> {
    if forest.window != table.sigma_window || assignment.sigma_window != table.sigma_window {
        return Err(CoronaError::WindowMismatch);
    }
    if kind == CarlesonKind::Alpha && t == 0 {
        return Err(CoronaError::InvalidParameter("alpha needs t >= 1".into()));
    }
    let depth = forest.window.depth;
    let members: Vec<Vec<Pos>> = (0..forest.len()).map(|k| assignment.omega_members(k)).collect();
    let mut values = Vec::new();
    let mut by_pos: Vec<(Pos, f64)> = Vec::new();
    for (k, s) in forest.nodes.iter().enumerate() {
        let Some(parent) = s.parent else { continue };
        let pos = (s.level, s.position);
        let dyadic_parent = ancestor_pos(pos, 1);
        let pp = (forest.nodes[parent].level, forest.nodes[parent].position);
        let value = match kind {
            CarlesonKind::Beta => projected_norm_sq(table, &members[k], &[leaf_range(depth, dyadic_parent)]),
            CarlesonKind::Gamma => projected_norm_sq(table, &members[k], &difference_ranges(depth, pp, dyadic_parent)),
            CarlesonKind::Alpha => {
                let ranges = difference_ranges(depth, pp, pos);
                (0..forest.len())
                    .filter(|&d| forest.ancestor(d, t) == Some(k))
                    .map(|d| projected_norm_sq(table, &members[d], &ranges))
                    .sum()
            }
        };
        values.push(CarlesonEntry { stopping: s.interval, value });
        by_pos.push((pos, value));
    }
    let mut ratio = 0.0;
    let mut witness = None;
    for l in 0..depth {
        for j in 0..1usize << l {
            let m = table.sigma_mass((l, j));
            if m <= 0.0 {
                continue;
            }
            let total: f64 = by_pos
                .iter()
                .filter(|((sl, sj), _)| *sl >= l + 1 && ((sj >> 1) >> (sl - 1 - l)) == j)
                .map(|(_, v)| v)
                .sum();
            if total / m > ratio {
                ratio = total / m;
                witness = Some(forest.window.node(l, j));
            }
        }
    }
    Ok(CarlesonTable { kind, t, values, ratio, ratio_witness: witness })
}

/// Values of the labeled pieces. `upper` splits as `diagonal + long_range + short_range`,
/// `short_range` as `mid_range + nested`, and `nested = neighbor + paraproduct - stopping`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Pieces {
    /// Good pairs with `|J| ≤ |I|`.
    pub upper: f64,
    /// Good pairs with `|J| > |I|`.
    pub lower: f64,
    /// `2^-r |I| ≤ |J| ≤ |I|`, `dist(I, J) ≤ |I|`.
    pub diagonal: f64,
    /// `|J| ≤ |I|`, `dist(I, J) > |I|`.
    pub long_range: f64,
    /// `|J| < 2^-r |I|`, `dist(I, J) ≤ |I|`.
    pub short_range: f64,
    /// Short-range pairs with `I ∩ J = ∅`.
    pub mid_range: f64,
    /// Short-range pairs with `J ⊂ I`.
    pub nested: f64,
    pub neighbor: f64,
    pub paraproduct: f64,
    pub stopping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PieceCounts {
    pub lower: usize,
    pub diagonal: usize,
    pub long_range: usize,
    pub mid_range: usize,
    pub nested: usize,
    pub remainder: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub pieces: Pieces,
    /// Pairs involving a bad interval or one too large for the good projections.
    pub remainder: f64,
    /// Direct evaluation of the bilinear form.
    pub total: f64,
    /// `lower + diagonal + long_range + mid_range + neighbor + paraproduct - stopping + remainder`.
    pub reconstructed: f64,
    /// `|total - reconstructed|` over the absolute pair sum `Σ |⟨f,h_I⟩ ⟨H(σh_I),h_J⟩ ⟨φ,h_J⟩|`.
    pub relative_residual: f64,
    pub counts: PieceCounts,
    pub good_sigma: usize,
    pub good_omega: usize,
    pub r: u32,
    pub eps: f64,
}

#[derive(Clone, Copy)]
enum Class {
    Lower,
    Diagonal,
    LongRange,
    MidRange,
    Nested,
}

fn classify(i: &Interval, si: i32, j: &Interval, sj: i32, r: u32) -> Class {
    let r = r as i32;
    if sj > si {
        return Class::Lower;
    }
    let far = i.distance(j) > i.length();
    if far {
        Class::LongRange
    } else if sj >= si - r {
        Class::Diagonal
    } else if i.overlaps(j) {
        Class::Nested
    } else {
        Class::MidRange
    }
}

fn check_input(f: &StepFunction, mu: &Measure, window: &Window, side: &'static str) -> Result<(), CoronaError> {
    let root = window.realize(window.root);
    if !restricted_eq(f, &root) || !f.is_window_measurable(window) {
        return Err(CoronaError::NotWindowMeasurable(side));
    }
    let mean = f.integrate_over(mu, root.left(), root.right());
    let scale: f64 = f.values().iter().fold(0.0f64, |a, v| a.max(v.abs())) * mu.mass(&root, crate::measure::Closure::HALF_OPEN);
    if mean.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(CoronaError::NotMeanZero { side, mean });
    }
    Ok(())
}

/// Nonzero values of `f` occur only inside `root`.
fn restricted_eq(f: &StepFunction, root: &Interval) -> bool {
    f.breakpoints()
        .windows(2)
        .zip(f.values())
        .all(|(w, v)| *v == 0.0 || (w[0] >= root.left() && w[1] <= root.right()))
}

/// Splits `⟨H(σf), φ⟩_ω` over the Haar pairs of the two windows into the labeled pieces
/// over good pairs plus the remainder over all other pairs.
///
/// A σ node `I` is good when it is `r`-good against the ω grid and `|I| ≤ 2^-r |I⁰|`;
/// likewise for ω nodes. For a nested pair the enclosing stopping interval is the minimal
/// stopping interval containing the child of `I` that contains `J`.
pub fn bilinear_decompose(
    table: &InteractionTable,
    f: &StepFunction,
    phi: &StepFunction,
    forest: &StoppingForest,
    r: u32,
    eps: f64,
) -> Result<DecompositionReport, CoronaError> {
    if forest.window != table.sigma_window {
        return Err(CoronaError::WindowMismatch);
    }
    let sw = &table.sigma_window;
    let ow = &table.omega_window;
    check_input(f, &table.sigma, sw, "sigma")?;
    check_input(phi, &table.omega, ow, "omega")?;
    let fc = analyze(f, &table.sigma, sw);
    let pc = analyze(phi, &table.omega, ow);

    let sd = sw.depth;
    let od = ow.depth;
    // (pos, interval, scale, coefficient, good)
    let mut snodes = Vec::new();
    for l in 0..sd {
        for j in 0..1usize << l {
            let d = sw.node(l, j);
            let Some(&a) = fc.entries.get(&d) else { continue };
            let good = l >= r && is_r_good(d, &sw.grid, &ow.grid, r, eps)?.good;
            snodes.push(((l, j), sw.realize(d), d, a, good));
        }
    }
    let mut onodes = Vec::new();
    for l in 0..od {
        for j in 0..1usize << l {
            let d = ow.node(l, j);
            let Some(&b) = pc.entries.get(&d) else { continue };
            let good = l >= r && is_r_good(d, &ow.grid, &sw.grid, r, eps)?.good;
            onodes.push(((l, j), ow.realize(d), d, b, good));
        }
    }

    // per σ row: [lower, diagonal, long, mid, neighbor, para, stop, remainder, abs] + counts
    let rows: Vec<Result<([f64; 9], PieceCounts), CoronaError>> = snodes
        .par_iter()
        .map(|&(ip, ir, id, a, igood)| {
            let mut acc = [0.0; 9];
            let mut counts = PieceCounts::default();
            let (ha, hb) = table.sigma_haar[ip.0 as usize][ip.1].expect("coefficient implies Haar function");
            let left = (ip.0 + 1, 2 * ip.1);
            let right = (ip.0 + 1, 2 * ip.1 + 1);
            for &(jp, jr, jd, b, jgood) in &onodes {
                let pl = table.node_pairing(left, jp);
                let pr = table.node_pairing(right, jp);
                let m = ha * pl + hb * pr;
                let w = a * b;
                acc[8] += (w * m).abs();
                if !(igood && jgood) {
                    acc[7] += w * m;
                    counts.remainder += 1;
                    continue;
                }
                match classify(&ir, id.scale, &jr, jd.scale, r) {
                    Class::Lower => {
                        acc[0] += w * m;
                        counts.lower += 1;
                    }
                    Class::Diagonal => {
                        acc[1] += w * m;
                        counts.diagonal += 1;
                    }
                    Class::LongRange => {
                        acc[2] += w * m;
                        counts.long_range += 1;
                    }
                    Class::MidRange => {
                        acc[3] += w * m;
                        counts.mid_range += 1;
                    }
                    Class::Nested => {
                        let tol = 1e-12 * ir.length();
                        if jr.left() < ir.left() - tol || jr.right() > ir.right() + tol {
                            return Err(CoronaError::GeometryViolation { sigma: id, omega: jd });
                        }
                        let mid = sw.realize(sw.node(left.0, left.1)).right();
                        let (child, h_in, h_out, p_in, p_out) =
                            if jr.left() < mid { (left, ha, hb, pl, pr) } else { (right, hb, ha, pr, pl) };
                        let hat = forest.minimal_containing(child);
                        let (slo, shi) = forest.leaves(hat);
                        let p_hat = table.range_pairing(slo, shi, jp);
                        acc[4] += w * h_out * p_out;
                        acc[5] += w * h_in * p_hat;
                        acc[6] += w * h_in * (p_hat - p_in);
                        counts.nested += 1;
                    }
                }
            }
            Ok((acc, counts))
        })
        .collect();

    let mut acc = [0.0; 9];
    let mut counts = PieceCounts::default();
    for row in rows {
        let (a, c) = row?;
        for (t, v) in acc.iter_mut().zip(a) {
            *t += v;
        }
        counts.lower += c.lower;
        counts.diagonal += c.diagonal;
        counts.long_range += c.long_range;
        counts.mid_range += c.mid_range;
        counts.nested += c.nested;
        counts.remainder += c.remainder;
    }
    let [lower, diagonal, long_range, mid_range, neighbor, paraproduct, stopping, remainder, abs_sum] = acc;
    let nested = neighbor + paraproduct - stopping;
    let short_range = mid_range + nested;
    let upper = diagonal + long_range + short_range;
    let pieces = Pieces { upper, lower, diagonal, long_range, short_range, mid_range, nested, neighbor, paraproduct, stopping };
    let total = pair_form(&table.sigma, f, &table.omega, phi, table.trunc)?;
    let reconstructed = lower + diagonal + long_range + mid_range + neighbor + paraproduct - stopping + remainder;
    let diff = (total - reconstructed).abs();
    let relative_residual = if diff == 0.0 { 0.0 } else { diff / abs_sum.max(total.abs()) };
    Ok(DecompositionReport {
        pieces,
        remainder,
        total,
        reconstructed,
        relative_residual,
        counts,
        good_sigma: snodes.iter().filter(|n| n.4).count(),
        good_omega: onodes.iter().filter(|n| n.4).count(),
        r,
        eps,
    })
}
