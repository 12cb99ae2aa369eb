//! Hilbert transforms of measures: pointwise values, bilinear forms, gap roots,
//! testing and weak-boundedness constants.
//!
//! The kernel is `K(t) = ζ_ε(|t|) / t` with `t = x - y` (x the evaluation point, y the
//! integration variable), or `1/t` in principal value when no truncation is given.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::haar::StepFunction;
use crate::measure::{no_common_point_mass, Atom, Interval, Measure, Region, Segment, POSITION_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("untruncated kernel is singular at {0}")]
    Singular(f64),
    #[error("the measures share a point mass")]
    CommonPointMass,
    #[error("target {target} not attained on the gap (range {low}..{high})")]
    NoRoot { target: f64, low: f64, high: f64 },
    #[error("the gap carries positive mass")]
    GapNotEmpty,
    #[error("pair ({0:?}, {1:?}) violates the proximity or comparability constraint")]
    InvalidPair(Interval, Interval),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Smooth cutoff: 0 below 1/2, 1 above 1, cubic smoothstep in between.
pub fn zeta(t: f64) -> f64 {
    if t <= 0.5 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let s = 2.0 * t - 1.0;
        s * s * (3.0 - 2.0 * s)
    }
}

/// Truncation at scale `eps`: the kernel vanishes for `|t| <= eps/2` and is exact for `|t| >= eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationProfile {
    eps: f64,
}

impl TruncationProfile {
    pub fn new(eps: f64) -> Result<Self, TransformError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(TransformError::InvalidParameter(format!("truncation eps must be positive, got {eps}")));
        }
        Ok(TruncationProfile { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cutoff(&self, t: f64) -> f64 {
        zeta(t.abs() / self.eps)
    }
}

/// Kernel value at `t = x - y`.
pub fn kernel(t: f64, trunc: Option<TruncationProfile>) -> Result<f64, TransformError> {
    match trunc {
        Some(p) => {
            let c = p.cutoff(t);
            Ok(if c == 0.0 { 0.0 } else { c / t })
        }
        None if t == 0.0 => Err(TransformError::Singular(t)),
        None => Ok(1.0 / t),
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

pub(crate) fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(16))
}

fn gl32() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(32))
}

/// `∫_u^v (α + βt)/t dt` for `u < v` not straddling zero. Endpoints equal to zero
/// drop their logarithm (the caller pairs them into a principal value).
fn log_piece(u: f64, v: f64, alpha: f64, beta: f64) -> f64 {
    let lin = beta * (v - u);
    if alpha == 0.0 {
        return lin;
    }
    let log = if u == 0.0 {
        v.abs().ln()
    } else if v == 0.0 {
        -u.abs().ln()
    } else if u < 0.0 && v > 0.0 {
        (v / -u).ln()
    } else {
        ((v - u) / u).ln_1p()
    };
    alpha * log + lin
}

/// `∫_p^q K(t) (α + βt) dt` over the cutoff annulus by 32-point quadrature.
fn annulus_piece(u: f64, v: f64, alpha: f64, beta: f64, p: TruncationProfile) -> f64 {
    let (x, w) = gl32();
    let (c, h) = (0.5 * (u + v), 0.5 * (v - u));
    let mut s = 0.0;
    for i in 0..x.len() {
        let t = c + h * x[i];
        s += w[i] * p.cutoff(t) * (alpha + beta * t) / t;
    }
    s * h
}

/// `∫_p^q K(t) (α + βt) dt`. Untruncated, an interior zero is taken in principal value
/// and an endpoint at zero is singular unless `α + β·0 = 0`.
pub fn kernel_linear(p: f64, q: f64, alpha: f64, beta: f64, trunc: Option<TruncationProfile>) -> Result<f64, TransformError> {
    if p >= q {
        return Ok(0.0);
    }
    match trunc {
        None => {
            if (p == 0.0 || q == 0.0) && alpha != 0.0 {
                return Err(TransformError::Singular(0.0));
            }
            Ok(log_piece(p, q, alpha, beta))
        }
        Some(prof) => Ok(truncated_linear(p, q, alpha, beta, prof)),
    }
}

fn truncated_linear(p: f64, q: f64, alpha: f64, beta: f64, prof: TruncationProfile) -> f64 {
    let e = prof.eps();
    let cuts = [-e, -0.5 * e, 0.5 * e, e];
    let mut pts = Vec::with_capacity(6);
    pts.push(p);
    for c in cuts {
        if c > p && c < q {
            pts.push(c);
        }
    }
    pts.push(q);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (u, v) = (w[0], w[1]);
        let m = 0.5 * (u + v);
        if m.abs() <= 0.5 * e {
            continue;
        }
        if m.abs() >= e {
            total += log_piece(u, v, alpha, beta);
        } else {
            total += annulus_piece(u, v, alpha, beta, prof);
        }
    }
    total
}

/// `∫_{[a,b]} K(x - y) dy`.
fn segment_at_point(x: f64, s: &Segment, trunc: Option<TruncationProfile>) -> Result<f64, TransformError> {
    if trunc.is_none() && (x == s.left || x == s.right) {
        return Err(TransformError::Singular(x));
    }
    Ok(s.density * kernel_linear(x - s.right, x - s.left, 1.0, 0.0, trunc)?)
}

/// `(Hμ)(x)`, truncated or in principal value.
pub fn hilbert_at_point(mu: &Measure, x: f64, trunc: Option<TruncationProfile>) -> Result<f64, TransformError> {
    let mut total = 0.0;
    for a in mu.atoms() {
        let t = x - a.position;
        if trunc.is_none() && t.abs() <= POSITION_TOL * mu.scale() {
            return Err(TransformError::Singular(x));
        }
        total += a.mass * kernel(t, trunc)?;
    }
    for s in mu.segments() {
        total += segment_at_point(x, s, trunc)?;
    }
    Ok(total)
}

/// `∫_B ∫_A K(x - y) dy dx` for unit densities.
fn segment_segment(a: (f64, f64), b: (f64, f64), trunc: Option<TruncationProfile>) -> Result<f64, TransformError> {
    let t1 = b.0 - a.1;
    let t4 = b.1 - a.0;
    let (u, v) = (b.0 - a.0, b.1 - a.1);
    let (t2, t3) = if u <= v { (u, v) } else { (v, u) };
    let h = (a.1 - a.0).min(b.1 - b.0);
    let pieces = [(t1, t2, -t1, 1.0), (t2, t3, h, 0.0), (t3, t4, t4, -1.0)];
    let mut total = 0.0;
    for (p, q, al, be) in pieces {
        if p < q {
            total += match trunc {
                None => log_piece(p, q, al, be),
                Some(prof) => truncated_linear(p, q, al, be, prof),
            };
        }
    }
    Ok(total)
}

/// `∫∫ K(x - y) dσ(y) dω(x)`.
pub fn interaction(sigma: &Measure, omega: &Measure, trunc: Option<TruncationProfile>) -> Result<f64, TransformError> {
    let tol = POSITION_TOL * sigma.scale().max(omega.scale());
    let mut total = 0.0;
    for y in sigma.atoms() {
        for x in omega.atoms() {
            let t = x.position - y.position;
            if trunc.is_none() && t.abs() <= tol {
                return Err(TransformError::CommonPointMass);
            }
            total += x.mass * y.mass * kernel(t, trunc)?;
        }
        for s in omega.segments() {
            if trunc.is_none() && (y.position == s.left || y.position == s.right) {
                return Err(TransformError::Singular(y.position));
            }
            total += y.mass * s.density * kernel_linear(s.left - y.position, s.right - y.position, 1.0, 0.0, trunc)?;
        }
    }
    for s in sigma.segments() {
        for x in omega.atoms() {
            total += x.mass * segment_at_point(x.position, s, trunc)?;
        }
        for t in omega.segments() {
            total += s.density * t.density * segment_segment((s.left, s.right), (t.left, t.right), trunc)?;
        }
    }
    Ok(total)
}

fn split_by_steps(mu: &Measure, f: &StepFunction) -> Vec<(f64, Measure)> {
    f.breakpoints()
        .windows(2)
        .zip(f.values())
        .filter(|(_, v)| **v != 0.0)
        .map(|(w, v)| (*v, mu.restrict_region(&Region::Within(Interval::new(w[0], w[1]).unwrap()))))
        .filter(|(_, m)| !m.is_zero())
        .collect()
}

/// `⟨H(fσ), φ⟩_ω = ∫∫ K(x - y) f(y) φ(x) dσ(y) dω(x)`.
pub fn pair_form(
    sigma: &Measure,
    f: &StepFunction,
    omega: &Measure,
    phi: &StepFunction,
    trunc: Option<TruncationProfile>,
) -> Result<f64, TransformError> {
    if !no_common_point_mass(omega, sigma) {
        return Err(TransformError::CommonPointMass);
    }
    let fs = split_by_steps(sigma, f);
    let ps = split_by_steps(omega, phi);
    let mut total = 0.0;
    for (fv, fm) in &fs {
        for (pv, pm) in &ps {
            total += fv * pv * interaction(fm, pm, trunc)?;
        }
    }
    Ok(total)
}

/// Root of a decreasing function `h = target` inside the open interval `gap`,
/// to within `1e-13 |gap|` or machine resolution, whichever is coarser.
pub fn solve_decreasing<F>(h: F, gap: &Interval, target: f64) -> Result<f64, TransformError>
where
    F: Fn(f64) -> Result<f64, TransformError>,
{
    let (a, b) = (gap.left(), gap.right());
    let len = gap.length();
    let floor = 1e-15 * len;
    let mut off = 0.25 * len;
    let mut lo = a + off;
    let mut h_lo = h(lo)?;
    while h_lo < target {
        off *= 0.5;
        if off < floor {
            return Err(TransformError::NoRoot { target, low: h(b - 0.25 * len)?, high: h_lo });
        }
        lo = a + off;
        h_lo = h(lo)?;
    }
    let mut off = 0.25 * len;
    let mut hi = b - off;
    let mut h_hi = h(hi)?;
    while h_hi > target {
        off *= 0.5;
        if off < floor {
            return Err(TransformError::NoRoot { target, low: h_hi, high: h_lo });
        }
        hi = b - off;
        h_hi = h(hi)?;
    }
    if lo > hi {
        // both probes sit on the same side of the root
        std::mem::swap(&mut lo, &mut hi);
        let (vl, vh) = (h(lo)?, h(hi)?);
        if !(vl >= target && vh <= target) {
            return Err(TransformError::InvalidParameter("function is not decreasing on the gap".into()));
        }
    }
    while hi - lo > 1e-13 * len {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // adjacent floats: the tolerance is below machine resolution
            break;
        }
        if h(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves `Hω(z) = target` on a gap of the support of `ω`.
pub fn solve_on_gap(omega: &Measure, gap: &Interval, target: f64) -> Result<f64, TransformError> {
    if omega.mass(gap, crate::measure::Closure::OPEN) > 0.0 {
        return Err(TransformError::GapNotEmpty);
    }
    solve_decreasing(|z| hilbert_at_point(omega, z, None), gap, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Dual,
}

/// Largest tested ratio with the interval that attains it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestingReport {
    pub direction: Direction,
    pub constant: f64,
    pub witness: Option<Interval>,
}

/// Positions where `Hν` is singular or nonsmooth.
fn singular_points(nu: &Measure) -> Vec<f64> {
    let mut pts: Vec<f64> = nu.atoms().iter().map(|a| a.position).collect();
    for s in nu.segments() {
        pts.push(s.left);
        pts.push(s.right);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn nearest_gap(pts: &[f64], u: f64, v: f64) -> (f64, Option<f64>) {
    let i = pts.partition_point(|&p| p < u);
    let inside = (i < pts.len() && pts[i] <= v).then(|| pts[i]);
    let mut d = f64::INFINITY;
    if i > 0 {
        d = d.min(u - pts[i - 1]);
    }
    if i < pts.len() {
        d = d.min((pts[i] - v).max(0.0));
    }
    (d, inside)
}

fn square_integral_on(
    nu: &Measure,
    pts: &[f64],
    u: f64,
    v: f64,
    trunc: Option<TruncationProfile>,
    floor: f64,
) -> Result<f64, TransformError> {
    let len = v - u;
    let (d, inside) = nearest_gap(pts, u, v);
    if let Some(p) = inside {
        if p > u && p < v && len > floor {
            return Ok(square_integral_on(nu, pts, u, p, trunc, floor)? + square_integral_on(nu, pts, p, v, trunc, floor)?);
        }
    }
    let smooth = match trunc {
        Some(prof) => d >= len || len <= 0.125 * prof.eps(),
        None => d >= len,
    };
    if smooth || len <= floor {
        let (x, w) = gl16();
        let (c, h) = (0.5 * (u + v), 0.5 * len);
        let mut s = 0.0;
        for i in 0..x.len() {
            let val = hilbert_at_point(nu, c + h * x[i], trunc)?;
            s += w[i] * val * val;
        }
        return Ok(s * h);
    }
    let m = 0.5 * (u + v);
    Ok(square_integral_on(nu, pts, u, m, trunc, floor)? + square_integral_on(nu, pts, m, v, trunc, floor)?)
}

/// `∫ |Hν|² dμ`; atoms of `μ` exactly, segments by adaptive Gauss-Legendre quadrature.
pub fn square_integral(nu: &Measure, mu: &Measure, trunc: Option<TruncationProfile>) -> Result<f64, TransformError> {
    let pts = singular_points(nu);
    let mut total = 0.0;
    for a in mu.atoms() {
        let h = hilbert_at_point(nu, a.position, trunc)?;
        total += a.mass * h * h;
    }
    for s in mu.segments() {
        if trunc.is_none() && nu.atoms_in(s.left, s.right).iter().any(|a: &Atom| a.position > s.left) {
            return Err(TransformError::Singular(s.left));
        }
        let floor = 1e-12 * (s.right - s.left);
        total += s.density * square_integral_on(nu, &pts, s.left, s.right, trunc, floor)?;
    }
    Ok(total)
}

fn pick_max(values: Vec<(f64, Interval)>) -> (f64, Option<Interval>) {
    let mut best = (0.0, None);
    for (v, i) in values {
        if v > best.0 {
            best = (v, Some(i));
        }
    }
    best
}

/// Forward: `max_I ∫_I |H(1_I σ)|² dω / σ(I)`; dual swaps the roles of the measures.
pub fn testing_constant(
    omega: &Measure,
    sigma: &Measure,
    family: &[Interval],
    direction: Direction,
    trunc: Option<TruncationProfile>,
) -> Result<TestingReport, TransformError> {
    let (src, tgt) = match direction {
        Direction::Forward => (sigma, omega),
        Direction::Dual => (omega, sigma),
    };
    let values: Vec<(f64, Interval)> = family
        .par_iter()
        .map(|i| -> Result<(f64, Interval), TransformError> {
            let m = src.mass_half_open(i.left(), i.right());
            if m <= 0.0 {
                return Ok((0.0, *i));
            }
            let nu = src.restrict(i, false);
            let mu = tgt.restrict(i, false);
            Ok((square_integral(&nu, &mu, trunc)? / m, *i))
        })
        .collect::<Result<_, _>>()?;
    let (constant, witness) = pick_max(values);
    Ok(TestingReport { direction, constant, witness })
}

/// Largest weak-boundedness ratio with the pair that attains it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakBoundednessReport {
    pub constant: f64,
    pub witness: Option<(Interval, Interval)>,
}

/// `max |∫_J H(1_I σ) dω| / √(σ(I) ω(J))` over pairs with `dist(I,J) <= |I|+|J|` and
/// `1/c <= |I|/|J| <= c`.
pub fn weak_boundedness_constant(
    omega: &Measure,
    sigma: &Measure,
    pairs: &[(Interval, Interval)],
    trunc: Option<TruncationProfile>,
    comparability: f64,
) -> Result<WeakBoundednessReport, TransformError> {
    if comparability < 1.0 {
        return Err(TransformError::InvalidParameter("comparability constant must be at least 1".into()));
    }
    for (i, j) in pairs {
        let ratio = i.length() / j.length();
        let close = i.distance(j) <= i.length() + j.length();
        if !close || ratio > comparability * (1.0 + 1e-12) || ratio * comparability < 1.0 - 1e-12 {
            return Err(TransformError::InvalidPair(*i, *j));
        }
    }
    let values: Vec<(f64, (Interval, Interval))> = pairs
        .par_iter()
        .map(|(i, j)| -> Result<_, TransformError> {
            let (ms, mo) = (sigma.mass_half_open(i.left(), i.right()), omega.mass_half_open(j.left(), j.right()));
            if ms <= 0.0 || mo <= 0.0 {
                return Ok((0.0, (*i, *j)));
            }
            let v = interaction(&sigma.restrict(i, false), &omega.restrict(j, false), trunc)?;
            Ok((v.abs() / (ms * mo).sqrt(), (*i, *j)))
        })
        .collect::<Result<_, _>>()?;
    let mut best = WeakBoundednessReport { constant: 0.0, witness: None };
    for (v, p) in values {
        if v > best.constant {
            best = WeakBoundednessReport { constant: v, witness: Some(p) };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(l: f64, r: f64) -> Interval {
        Interval::new(l, r).unwrap()
    }

    #[test]
    fn zeta_shape() {
        assert_eq!(zeta(0.3), 0.0);
        assert_eq!(zeta(0.75), 0.5);
        assert_eq!(zeta(1.2), 1.0);
        let mut prev = 0.0;
        for i in 0..=200 {
            let z = zeta(0.4 + i as f64 * 0.004);
            assert!(z >= prev);
            prev = z;
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(32);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn pointwise_examples() {
        let d0 = Measure::dirac(0.0, 1.0).unwrap();
        assert_eq!(hilbert_at_point(&d0, 2.0, None).unwrap(), 0.5);
        let two = Measure::new(vec![(0.0, 1.0), (1.0, 1.0)], vec![]).unwrap();
        assert_eq!(hilbert_at_point(&two, 0.5, None).unwrap(), 0.0);
        let leb = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        assert!((hilbert_at_point(&leb, 2.0, None).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(hilbert_at_point(&d0, 0.0, None), Err(TransformError::Singular(_))));
        // principal value at the midpoint of a symmetric segment
        assert!(hilbert_at_point(&leb, 0.5, None).unwrap().abs() < 1e-15);
    }

    #[test]
    fn truncated_segment_matches_brute_force() {
        let leb = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        let p = TruncationProfile::new(0.3).unwrap();
        for &x in &[0.2, 0.5, 0.9, 1.1, -0.05] {
            let n = 400_000;
            let mut s = 0.0;
            for i in 0..n {
                let y = (i as f64 + 0.5) / n as f64;
                s += kernel(x - y, Some(p)).unwrap() / n as f64;
            }
            let v = hilbert_at_point(&leb, x, Some(p)).unwrap();
            assert!((v - s).abs() < 1e-8, "{x}: {v} vs {s}");
        }
    }

    #[test]
    fn pair_form_examples() {
        let u = iv(-5.0, 5.0);
        let one = StepFunction::constant(&u, 1.0);
        let p = TruncationProfile::new(0.25).unwrap();
        let s = Measure::dirac(0.0, 1.0).unwrap();
        let w = Measure::dirac(1.0, 1.0).unwrap();
        assert_eq!(pair_form(&s, &one, &w, &one, Some(p)).unwrap(), 1.0);
        assert_eq!(pair_form(&s, &one.scaled(0.0), &w, &one, Some(p)).unwrap(), 0.0);
        let s2 = Measure::new(vec![(0.0, 1.0), (1.0, 1.0)], vec![]).unwrap();
        let w2 = Measure::dirac(0.5, 1.0).unwrap();
        assert_eq!(pair_form(&s2, &one, &w2, &one, Some(p)).unwrap(), 0.0);
        assert_eq!(pair_form(&s, &one, &s, &one, Some(p)), Err(TransformError::CommonPointMass));
    }

    #[test]
    fn segment_segment_matches_corner_formula() {
        // ∫_B ∫_A dy dx / (x - y) = Σ ± G(corner differences) with G(t) = t log|t|
        let g = |t: f64| if t == 0.0 { 0.0 } else { t * t.abs().ln() };
        let a = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        let b = Measure::uniform(0.4, 2.0, 1.0).unwrap();
        let want = -g(2.0 - 1.0) + g(2.0 - 0.0) + g(0.4 - 1.0) - g(0.4 - 0.0);
        assert!((interaction(&a, &b, None).unwrap() - want).abs() < 1e-14);
        // the truncated kernel is bounded and smooth, so a midpoint rule is accurate
        let p = TruncationProfile::new(0.2).unwrap();
        let v = interaction(&a, &b, Some(p)).unwrap();
        let n = 100_000;
        let h = 1.6 / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let x = 0.4 + (i as f64 + 0.5) * h;
            s += hilbert_at_point(&a, x, Some(p)).unwrap() * h;
        }
        assert!((v - s).abs() < 1e-9, "{v} vs {s}");
        assert!(interaction(&a, &a, None).unwrap().abs() < 1e-15);
    }

    #[test]
    fn gap_roots() {
        let w = Measure::new(vec![(0.0, 1.0), (1.0, 1.0)], vec![]).unwrap();
        let g = iv(0.0, 1.0);
        assert!((solve_on_gap(&w, &g, 0.0).unwrap() - 0.5).abs() < 1e-13);
        let z = solve_on_gap(&w, &g, 1.5).unwrap();
        assert!((z - 1.0 / 3.0).abs() < 1e-12);
        let z2 = solve_on_gap(&w, &g, 3.0).unwrap();
        assert!(z2 < z);
        let seg = Measure::uniform(0.2, 0.4, 1.0).unwrap();
        assert_eq!(solve_on_gap(&seg, &g, 0.0), Err(TransformError::GapNotEmpty));
    }

    #[test]
    fn testing_examples() {
        let s = Measure::dirac(0.0, 1.0).unwrap();
        let w = Measure::dirac(1.0, 1.0).unwrap();
        let r = testing_constant(&w, &s, &[iv(-2.0, 2.0)], Direction::Forward, None).unwrap();
        assert_eq!(r.constant, 1.0);
        assert_eq!(r.witness, Some(iv(-2.0, 2.0)));
        let r = testing_constant(&w, &s, &[iv(-1.0, 0.5), iv(0.5, 3.0)], Direction::Forward, None).unwrap();
        assert_eq!(r.constant, 0.0);
    }

    #[test]
    fn weak_boundedness_examples() {
        let s = Measure::dirac(0.0, 1.0).unwrap();
        let w = Measure::dirac(1.0, 1.0).unwrap();
        let r = weak_boundedness_constant(&w, &s, &[(iv(-1.0, 0.5), iv(0.5, 2.0))], None, 2.0).unwrap();
        assert_eq!(r.constant, 1.0);
        let r = weak_boundedness_constant(&w, &s, &[(iv(0.5, 0.75), iv(0.75, 1.25))], None, 2.0).unwrap();
        assert_eq!(r.constant, 0.0);
        assert!(weak_boundedness_constant(&w, &s, &[(iv(0.0, 1.0), iv(10.0, 11.0))], None, 2.0).is_err());
    }

    #[test]
    fn square_integral_of_lebesgue_against_segment() {
        // ∫_2^3 log(x/(x-1))^2 dx by a fine midpoint rule
        let nu = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        let mu = Measure::uniform(2.0, 3.0, 1.0).unwrap();
        let v = square_integral(&nu, &mu, None).unwrap();
        let n = 100_000;
        let mut s = 0.0;
        for i in 0..n {
            let x = 2.0 + (i as f64 + 0.5) / n as f64;
            s += (x / (x - 1.0)).ln().powi(2) / n as f64;
        }
        assert!((v - s).abs() < 1e-9);
    }
}
