//! Weighted Haar systems, martingale expansions and the Carleson embedding check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::{DyadicInterval, GridParam, Window};
use crate::measure::{Interval, Measure};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HaarError {
    #[error("average over an interval of zero mass is undefined")]
    UndefinedAverage,
    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),
    #[error(transparent)]
    Dyadic(#[from] crate::dyadic::DyadicError),
}

/// Piecewise-constant function, zero outside `[breakpoints[0], breakpoints[n])`.
/// Piece `i` is the half-open interval `[breakpoints[i], breakpoints[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStep", into = "RawStep")]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawStep {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawStep> for StepFunction {
    type Error = HaarError;
    fn try_from(r: RawStep) -> Result<Self, HaarError> {
        StepFunction::new(r.breakpoints, r.values)
    }
}

impl From<StepFunction> for RawStep {
    fn from(s: StepFunction) -> Self {
        RawStep { breakpoints: s.breakpoints, values: s.values }
    }
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, HaarError> {
        if breakpoints.len() != values.len() + 1 || values.is_empty() {
            return Err(HaarError::InvalidStepFunction(format!(
                "{} breakpoints for {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(HaarError::InvalidStepFunction("non-finite entry".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HaarError::InvalidStepFunction("breakpoints must increase strictly".into()));
        }
        Ok(StepFunction { breakpoints, values })
    }

    pub fn constant(on: &Interval, value: f64) -> Self {
        StepFunction { breakpoints: vec![on.left(), on.right()], values: vec![value] }
    }

    pub fn indicator(of: &Interval) -> Self {
        Self::constant(of, 1.0)
    }

    /// One value per leaf of the window.
    pub fn from_leaves(window: &Window, values: Vec<f64>) -> Result<Self, HaarError> {
        Self::new(window.leaf_breakpoints(), values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> Interval {
        Interval::new(self.breakpoints[0], *self.breakpoints.last().unwrap()).unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= x);
        if i == 0 || i == self.breakpoints.len() {
            0.0
        } else {
            self.values[i - 1]
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        StepFunction { breakpoints: self.breakpoints.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    fn merged_breakpoints(&self, other: &StepFunction) -> Vec<f64> {
        let mut b: Vec<f64> = self.breakpoints.iter().chain(other.breakpoints.iter()).copied().collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Pointwise `self + c * other`.
    pub fn add_scaled(&self, other: &StepFunction, c: f64) -> Self {
        let b = self.merged_breakpoints(other);
        let values = b
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                self.eval(m) + c * other.eval(m)
            })
            .collect();
        StepFunction { breakpoints: b, values }
    }

    /// `∫_{[l,r)} f dσ`.
    pub fn integrate_over(&self, sigma: &Measure, l: f64, r: f64) -> f64 {
        let mut total = 0.0;
        for (i, w) in self.breakpoints.windows(2).enumerate() {
            let (a, b) = (w[0].max(l), w[1].min(r));
            if a < b && self.values[i] != 0.0 {
                total += self.values[i] * sigma.mass_half_open(a, b);
            }
        }
        total
    }

    pub fn integrate(&self, sigma: &Measure) -> f64 {
        self.integrate_over(sigma, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `⟨f, g⟩_σ`.
    pub fn inner(&self, other: &StepFunction, sigma: &Measure) -> f64 {
        let b = self.merged_breakpoints(other);
        b.windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                let v = self.eval(m) * other.eval(m);
                if v == 0.0 {
                    0.0
                } else {
                    v * sigma.mass_half_open(w[0], w[1])
                }
            })
            .sum()
    }

    pub fn norm_sq(&self, sigma: &Measure) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| if *v == 0.0 { 0.0 } else { v * v * sigma.mass_half_open(w[0], w[1]) })
            .sum()
    }

    /// Whether every interior breakpoint of `f` is a leaf boundary of the window
    /// and `f` vanishes outside the root.
    pub fn is_window_measurable(&self, window: &Window) -> bool {
        let leaves = window.leaf_breakpoints();
        let root = window.realize(window.root);
        let tol = 1e-13 * root.length().max(1.0);
        self.breakpoints.windows(2).zip(&self.values).all(|(w, v)| {
            *v == 0.0 || (w[0] >= root.left() - tol && w[1] <= root.right() + tol)
        }) && self.breakpoints.iter().all(|&b| {
            b <= root.left() + tol
                || b >= root.right() - tol
                || leaves.iter().any(|&p| (p - b).abs() <= tol)
        })
    }

    /// Snaps to the window leaves by sampling each leaf at its midpoint.
    /// The flag reports whether any breakpoint actually moved.
    pub fn snap_to_window(&self, window: &Window) -> (StepFunction, bool) {
        let leaves = window.leaf_breakpoints();
        let values = leaves.windows(2).map(|w| self.eval(0.5 * (w[0] + w[1]))).collect();
        (StepFunction { breakpoints: leaves, values }, !self.is_window_measurable(window))
    }
}

/// σ-average of `f` on `I`.
pub fn expectation(f: &StepFunction, interval: &Interval, sigma: &Measure) -> Result<f64, HaarError> {
    let m = sigma.mass_half_open(interval.left(), interval.right());
    if m <= 0.0 {
        return Err(HaarError::UndefinedAverage);
    }
    Ok(f.integrate_over(sigma, interval.left(), interval.right()) / m)
}

/// Values of the Haar function on the left and right halves, given the child masses.
/// `None` when either child carries no mass.
pub fn haar_values(left_mass: f64, right_mass: f64) -> Option<(f64, f64)> {
    if left_mass <= 0.0 || right_mass <= 0.0 {
        return None;
    }
    let total = left_mass + right_mass;
    Some((-(right_mass / (total * left_mass)).sqrt(), (left_mass / (total * right_mass)).sqrt()))
}

fn child_masses(grid: &GridParam, d: DyadicInterval, sigma: &Measure) -> Result<(Interval, Interval, f64, f64), HaarError> {
    let [l, r] = grid.children(d)?;
    let (li, ri) = (grid.realize(l)?, grid.realize(r)?);
    let lm = sigma.mass_half_open(li.left(), li.right());
    let rm = sigma.mass_half_open(ri.left(), ri.right());
    Ok((li, ri, lm, rm))
}

/// The σ-adapted Haar function of `d`; the zero function when a child has no mass.
pub fn haar_function(d: DyadicInterval, grid: &GridParam, sigma: &Measure) -> Result<StepFunction, HaarError> {
    let (li, ri, lm, rm) = child_masses(grid, d, sigma)?;
    let (a, b) = haar_values(lm, rm).unwrap_or((0.0, 0.0));
    Ok(StepFunction { breakpoints: vec![li.left(), li.right(), ri.right()], values: vec![a, b] })
}

/// Haar coefficients of a function over a window, plus its σ-mean on the root.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarCoefficients {
    pub window: Window,
    pub entries: BTreeMap<DyadicInterval, f64>,
    pub mean: f64,
}

#[derive(Serialize)]
struct CoefficientRow {
    scale: i32,
    index: i64,
    left: f64,
    right: f64,
    value: f64,
}

impl Serialize for HaarCoefficients {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let rows: Vec<CoefficientRow> = self
            .entries
            .iter()
            .map(|(d, v)| {
                let i = self.window.realize(*d);
                CoefficientRow { scale: d.scale, index: d.index, left: i.left(), right: i.right(), value: *v }
            })
            .collect();
        let mut st = s.serialize_struct("HaarCoefficients", 4)?;
        st.serialize_field("root", &self.window.root)?;
        st.serialize_field("depth", &self.window.depth)?;
        st.serialize_field("mean", &self.mean)?;
        st.serialize_field("entries", &rows)?;
        st.end()
    }
}

impl HaarCoefficients {
    pub fn norm_sq(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum()
    }

    pub fn filtered(&self, keep: impl Fn(&DyadicInterval) -> bool) -> HaarCoefficients {
        HaarCoefficients {
            window: self.window.clone(),
            entries: self.entries.iter().filter(|(d, _)| keep(d)).map(|(d, v)| (*d, *v)).collect(),
            mean: 0.0,
        }
    }
}

/// Per-node masses of a window, indexed `[level][position]`.
pub(crate) fn window_masses(window: &Window, sigma: &Measure) -> Vec<Vec<f64>> {
    (0..=window.depth)
        .map(|l| {
            window
                .level(l)
                .map(|d| {
                    let i = window.realize(d);
                    sigma.mass_half_open(i.left(), i.right())
                })
                .collect()
        })
        .collect()
}

/// Haar values `(left, right)` for each node above the leaves, indexed `[level][position]`.
pub(crate) fn window_haar_values(masses: &[Vec<f64>]) -> Vec<Vec<Option<(f64, f64)>>> {
    (0..masses.len().saturating_sub(1))
        .map(|l| (0..masses[l].len()).map(|j| haar_values(masses[l + 1][2 * j], masses[l + 1][2 * j + 1])).collect())
        .collect()
}

/// Coefficients `⟨f, h_I⟩_σ` for every node of the window above the leaves.
pub fn analyze(f: &StepFunction, sigma: &Measure, window: &Window) -> HaarCoefficients {
    let masses = window_masses(window, sigma);
    let hv = window_haar_values(&masses);
    let depth = window.depth as usize;
    let leaves = window.leaf_breakpoints();
    let mut integrals: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    integrals[depth] = leaves.windows(2).map(|w| f.integrate_over(sigma, w[0], w[1])).collect();
    for l in (0..depth).rev() {
        integrals[l] = (0..1usize << l).map(|j| integrals[l + 1][2 * j] + integrals[l + 1][2 * j + 1]).collect();
    }
    let mut entries = BTreeMap::new();
    for l in 0..depth {
        for (j, d) in window.level(l as u32).enumerate() {
            if let Some((a, b)) = hv[l][j] {
                entries.insert(d, a * integrals[l + 1][2 * j] + b * integrals[l + 1][2 * j + 1]);
            }
        }
    }
    let mean = if masses[0][0] > 0.0 { integrals[0][0] / masses[0][0] } else { 0.0 };
    HaarCoefficients { window: window.clone(), entries, mean }
}

/// Inverse of [`analyze`]: the leaf-wise step function `mean + Σ c_I h_I`.
pub fn synthesize(c: &HaarCoefficients, sigma: &Measure) -> StepFunction {
    let window = &c.window;
    let masses = window_masses(window, sigma);
    let hv = window_haar_values(&masses);
    let mut vals = vec![c.mean];
    for l in 0..window.depth as usize {
        let mut next = Vec::with_capacity(vals.len() * 2);
        for (j, d) in window.level(l as u32).enumerate() {
            let (a, b) = match (c.entries.get(&d), hv[l][j]) {
                (Some(coef), Some((a, b))) => (coef * a, coef * b),
                _ => (0.0, 0.0),
            };
            next.push(vals[j] + a);
            next.push(vals[j] + b);
        }
        vals = next;
    }
    StepFunction { breakpoints: window.leaf_breakpoints(), values: vals }
}

/// Result of the Carleson embedding comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarlesonCheck {
    /// `max_J Σ_{I ⊂ J} a_I / σ(J)` over keyed `J`.
    pub c2: f64,
    /// `max_f Σ a_I (E_I f)^2 / ‖f‖^2` over the probes.
    pub worst_ratio: f64,
    /// Some keyed `J` has zero mass but encloses positive coefficient mass.
    pub infinite: bool,
}

/// Compares the packing constant of `a` with the embedding ratio on the probe functions.
pub fn carleson_embedding_check(
    a: &BTreeMap<DyadicInterval, f64>,
    sigma: &Measure,
    window: &Window,
    probes: &[StepFunction],
) -> CarlesonCheck {
    let masses = window_masses(window, sigma);
    let depth = window.depth as usize;
    let mut sub: Vec<Vec<f64>> = (0..=depth).map(|l| vec![0.0; 1 << l]).collect();
    for (d, v) in a {
        if let Some((l, j)) = window.locate(*d) {
            sub[l as usize][j] += v;
        }
    }
    for l in (0..depth).rev() {
        for j in 0..1usize << l {
            sub[l][j] += sub[l + 1][2 * j] + sub[l + 1][2 * j + 1];
        }
    }
    let mut c2: f64 = 0.0;
    let mut infinite = false;
    for d in a.keys() {
        if let Some((l, j)) = window.locate(*d) {
            let (s, m) = (sub[l as usize][j], masses[l as usize][j]);
            if m > 0.0 {
                c2 = c2.max(s / m);
            } else if s > 0.0 {
                infinite = true;
            }
        }
    }
    if infinite {
        c2 = f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for f in probes {
        let norm = f.norm_sq(sigma);
        if norm <= 0.0 {
            continue;
        }
        let mut s = 0.0;
        for (d, v) in a {
            if let Some((l, j)) = window.locate(*d) {
                let m = masses[l as usize][j];
                if m > 0.0 && *v != 0.0 {
                    let i = window.realize(*d);
                    let e = f.integrate_over(sigma, i.left(), i.right()) / m;
                    s += v * e * e;
                }
            }
        }
        worst = worst.max(s / norm);
    }
    CarlesonCheck { c2, worst_ratio: worst, infinite }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_window(depth: u32) -> Window {
        Window::new(GridParam::standard(-20, 4).unwrap(), DyadicInterval { scale: 0, index: 0 }, depth).unwrap()
    }

    #[test]
    fn expectation_examples() {
        let u = Interval::new(0.0, 1.0).unwrap();
        let leb = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        assert!((expectation(&StepFunction::constant(&u, 3.0), &u, &leb).unwrap() - 3.0).abs() < 1e-15);
        let f = StepFunction::indicator(&Interval::new(0.0, 0.5).unwrap());
        assert_eq!(expectation(&f, &u, &leb).unwrap(), 0.5);
        let s = Measure::new(vec![(0.25, 1.0), (0.75, 3.0)], vec![]).unwrap();
        assert_eq!(expectation(&f, &u, &s).unwrap(), 0.25);
        assert_eq!(expectation(&f, &u, &Measure::zero()), Err(HaarError::UndefinedAverage));
    }

    #[test]
    fn haar_function_examples() {
        let g = GridParam::standard(-10, 4).unwrap();
        let root = DyadicInterval { scale: 0, index: 0 };
        let leb = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        let h = haar_function(root, &g, &leb).unwrap();
        assert_eq!(h.values(), &[-1.0, 1.0]);
        let s = Measure::new(vec![(0.25, 1.0), (0.75, 3.0)], vec![]).unwrap();
        let h = haar_function(root, &g, &s).unwrap();
        assert!((h.values()[0] + 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((h.values()[1] - 3f64.sqrt() / 6.0).abs() < 1e-15);
        assert!((h.norm_sq(&s) - 1.0).abs() < 1e-14);
        let one_sided = Measure::dirac(0.25, 1.0).unwrap();
        assert_eq!(haar_function(root, &g, &one_sided).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn analyze_constant_and_single_haar() {
        let w = unit_window(4);
        let s = Measure::new(vec![(0.1, 1.0), (0.3, 2.0), (0.6, 0.5)], vec![(0.7, 0.95, 2.0)]).unwrap();
        let c = analyze(&StepFunction::constant(&Interval::new(0.0, 1.0).unwrap(), 1.0), &s, &w);
        assert!((c.mean - 1.0).abs() < 1e-14);
        assert!(c.entries.values().all(|v| v.abs() < 1e-14));
        let j = w.node(1, 0);
        let h = haar_function(j, &w.grid, &s).unwrap();
        let c = analyze(&h, &s, &w);
        for (d, v) in &c.entries {
            let want = if *d == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-13, "{d:?} {v}");
        }
    }

    #[test]
    fn synthesize_examples() {
        let w = unit_window(3);
        let s = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        let c = HaarCoefficients { window: w.clone(), entries: BTreeMap::new(), mean: 2.5 };
        assert!(synthesize(&c, &s).values().iter().all(|v| *v == 2.5));
        let d = w.node(1, 1);
        let mut entries = BTreeMap::new();
        entries.insert(d, 0.5);
        let f = synthesize(&HaarCoefficients { window: w.clone(), entries, mean: 0.0 }, &s);
        let h = haar_function(d, &w.grid, &s).unwrap();
        for x in [0.05, 0.3, 0.55, 0.7, 0.8, 0.99] {
            assert!((f.eval(x) - 0.5 * h.eval(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn carleson_examples() {
        let w = unit_window(3);
        let s = Measure::new(vec![(0.1, 1.0), (0.45, 2.0), (0.8, 0.7)], vec![(0.5, 0.7, 1.0)]).unwrap();
        let probe = StepFunction::constant(&Interval::new(0.0, 1.0).unwrap(), 1.0);
        let zero: BTreeMap<_, _> = w.nodes().into_iter().map(|d| (d, 0.0)).collect();
        let c = carleson_embedding_check(&zero, &s, &w, &[probe.clone()]);
        assert_eq!((c.c2, c.worst_ratio), (0.0, 0.0));
        let masses: BTreeMap<_, _> = w
            .nodes()
            .into_iter()
            .map(|d| {
                let i = w.realize(d);
                (d, s.mass_half_open(i.left(), i.right()))
            })
            .collect();
        let c = carleson_embedding_check(&masses, &s, &w, &[probe]);
        assert!((c.c2 - 4.0).abs() < 1e-12);
        assert!(!c.infinite);
    }

    #[test]
    fn zero_mass_with_coefficients_is_infinite() {
        let w = unit_window(2);
        let s = Measure::dirac(0.1, 1.0).unwrap();
        let mut a = BTreeMap::new();
        a.insert(w.node(1, 1), 1.0);
        let c = carleson_embedding_check(&a, &s, &w, &[]);
        assert!(c.infinite && c.c2.is_infinite());
    }

    #[test]
    fn step_function_json() {
        let f = StepFunction::new(vec![0.0, 0.5, 1.0], vec![1.0, -1.0]).unwrap();
        let back: StepFunction = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<StepFunction>(r#"{"breakpoints":[0,0],"values":[1]}"#).is_err());
    }
}
