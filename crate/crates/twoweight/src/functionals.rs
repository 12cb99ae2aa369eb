//! Poisson integrals, energies and the Φ/Ψ functionals built from them.
//!
//! Intervals passed as `J` or `I` are closed for the mass and energy factors; the set
//! `E` that restricts σ is a [`Region`] (half-open pieces).

use serde::Serialize;
use thiserror::Error;

use crate::measure::{Interval, Measure, Region};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("energy of an interval with zero mass is undefined")]
    UndefinedEnergy,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoissonVariant {
    /// `∫ |I| / (|I| + dist(x, I))² dν`
    #[default]
    Standard,
    /// `ν(I)/|I| + (|I|/2) ∫_{I^c} |z - c_I|^{-2} dν`
    Sharp,
}

fn standard_segment(i: &Interval, p: f64, q: f64) -> f64 {
    let (a, b, len) = (i.left(), i.right(), i.length());
    let mut s = 0.0;
    let lq = q.min(a);
    if p < lq {
        s += len * (1.0 / (len + a - lq) - 1.0 / (len + a - p));
    }
    let (ip, iq) = (p.max(a), q.min(b));
    if ip < iq {
        s += (iq - ip) / len;
    }
    let rp = p.max(b);
    if rp < q {
        s += len * (1.0 / (len + rp - b) - 1.0 / (len + q - b));
    }
    s
}

fn sharp_segment(i: &Interval, p: f64, q: f64) -> f64 {
    let (a, b, len, c) = (i.left(), i.right(), i.length(), i.center());
    let mut s = 0.0;
    let lq = q.min(a);
    if p < lq {
        s += 0.5 * len * (1.0 / (c - lq) - 1.0 / (c - p));
    }
    let (ip, iq) = (p.max(a), q.min(b));
    if ip < iq {
        s += (iq - ip) / len;
    }
    let rp = p.max(b);
    if rp < q {
        s += 0.5 * len * (1.0 / (rp - c) - 1.0 / (q - c));
    }
    s
}

/// Poisson integral of `ν` restricted to `region` at the scale and position of `I`.
pub fn poisson_in(i: &Interval, nu: &Measure, region: &Region, variant: PoissonVariant) -> f64 {
    let len = i.length();
    let mut total = 0.0;
    for at in nu.atoms() {
        if !region.contains(at.position) {
            continue;
        }
        let x = at.position;
        total += at.mass
            * match variant {
                PoissonVariant::Standard => {
                    let d = i.distance_to_point(x);
                    len / ((len + d) * (len + d))
                }
                PoissonVariant::Sharp => {
                    if i.contains_closed(x) {
                        1.0 / len
                    } else {
                        let d = x - i.center();
                        0.5 * len / (d * d)
                    }
                }
            };
    }
    for seg in nu.segments() {
        for (p, q) in region.clip(seg.left, seg.right) {
            total += seg.density
                * match variant {
                    PoissonVariant::Standard => standard_segment(i, p, q),
                    PoissonVariant::Sharp => sharp_segment(i, p, q),
                };
        }
    }
    total
}

pub fn poisson(i: &Interval, nu: &Measure, variant: PoissonVariant) -> f64 {
    poisson_in(i, nu, &Region::All, variant)
}

/// Mass and energy of `ω` on the closed interval `I`.
pub fn mass_and_energy(i: &Interval, omega: &Measure) -> (f64, Option<f64>) {
    let (l, r) = (i.left(), i.right());
    let atoms = omega.atoms_closed(l, r);
    let segs: Vec<(f64, f64, f64)> = omega
        .segments_near(l, r)
        .iter()
        .filter_map(|s| {
            let (p, q) = (s.left.max(l), s.right.min(r));
            (p < q).then_some((p, q, s.density))
        })
        .collect();
    let c = i.center();
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    for a in atoms {
        m0 += a.mass;
        m1 += a.mass * (a.position - c);
    }
    for &(p, q, d) in &segs {
        let (u, v) = (p - c, q - c);
        m0 += d * (v - u);
        m1 += d * 0.5 * (v - u) * (v + u);
    }
    if m0 <= 0.0 {
        return (0.0, None);
    }
    if segs.is_empty() && atoms.iter().all(|a| a.position == atoms[0].position) {
        return (m0, Some(0.0));
    }
    let mean = m1 / m0;
    let mut var = 0.0;
    for a in atoms {
        let t = a.position - c - mean;
        var += a.mass * t * t;
    }
    for &(p, q, d) in &segs {
        let (u, v) = (p - c - mean, q - c - mean);
        var += d * (v * v * v - u * u * u) / 3.0;
    }
    let e = (var.max(0.0) / m0).sqrt() / i.length();
    (m0, Some(e.min(1.0)))
}

/// Normalised standard deviation of position under `ω` on `I`.
pub fn energy(i: &Interval, omega: &Measure) -> Result<f64, FunctionalError> {
    mass_and_energy(i, omega).1.ok_or(FunctionalError::UndefinedEnergy)
}

/// `ω(J) E(J,ω)^p P(J, 1_E σ)²`; zero when `ω(J) = 0`.
pub fn psi_hybrid(j: &Interval, region: &Region, omega: &Measure, sigma: &Measure, energy_exponent: f64) -> f64 {
    let (m, e) = mass_and_energy(j, omega);
    let Some(e) = e else { return 0.0 };
    let p = poisson_in(j, sigma, region, PoissonVariant::Standard);
    if p == 0.0 {
        return 0.0;
    }
    m * e.powf(energy_exponent) * p * p
}

/// `ω(J) E(J,ω)² P(J, 1_E σ)²`.
pub fn phi(j: &Interval, region: &Region, omega: &Measure, sigma: &Measure) -> f64 {
    psi_hybrid(j, region, omega, sigma, 2.0)
}

/// Whether `part` keeps the distance `|part|^ε |parent|^(1-ε) / 2` from the endpoints and
/// midpoint of `parent`.
pub fn is_eps_good(part: &Interval, parent: &Interval, eps: f64) -> bool {
    let threshold = 0.5 * part.length().powf(eps) * parent.length().powf(1.0 - eps);
    parent.boundary_set().iter().all(|&p| part.distance_to_point(p) > threshold)
}

/// Disjoint subintervals of a parent, optionally tagged as ε-good.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionSpec {
    pub parent: Interval,
    pub parts: Vec<Interval>,
    pub eps_good: Option<f64>,
}

impl PartitionSpec {
    pub fn new(parent: Interval, mut parts: Vec<Interval>, eps_good: Option<f64>) -> Result<Self, FunctionalError> {
        parts.sort_by(|a, b| a.left().total_cmp(&b.left()));
        for w in parts.windows(2) {
            if w[0].right() > w[1].left() {
                return Err(FunctionalError::InvalidPartition(format!("{:?} and {:?} overlap", w[0], w[1])));
            }
        }
        for p in &parts {
            if !p.is_within(&parent) {
                return Err(FunctionalError::InvalidPartition(format!("{p:?} is not inside the parent")));
            }
            if let Some(eps) = eps_good {
                if !is_eps_good(p, &parent, eps) {
                    return Err(FunctionalError::InvalidPartition(format!("{p:?} is not {eps}-good")));
                }
            }
        }
        Ok(PartitionSpec { parent, parts, eps_good })
    }

    /// The `2^level` equal pieces of the parent.
    pub fn uniform(parent: Interval, level: u32) -> Self {
        PartitionSpec { parent, parts: halving_level(&parent, level), eps_good: None }
    }
}

/// The `2^level` dyadic pieces of an interval, left to right.
pub fn halving_level(i: &Interval, level: u32) -> Vec<Interval> {
    let n = 1usize << level;
    let h = i.length() / n as f64;
    (0..n)
        .map(|k| {
            let l = i.left() + h * k as f64;
            let r = if k + 1 == n { i.right() } else { i.left() + h * (k + 1) as f64 };
            Interval::new(l, r).unwrap()
        })
        .collect()
}

/// Best value and the chosen nodes `(level, position)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TreeChoice {
    pub value: f64,
    pub nodes: Vec<(u32, usize)>,
}

/// Exact maximum of `2^{γ·min level} Σ weight` over antichains of the binary tree of depth
/// `levels.len() - 1` whose members are admissible and lie at level ≥ 1.
/// `weight[l][j]` is the node weight and `admissible[l][j]` its eligibility.
pub(crate) fn best_antichain(weight: &[Vec<f64>], admissible: &[Vec<bool>], gamma: f64) -> TreeChoice {
    let depth = weight.len() - 1;
    let mut best = TreeChoice { value: 0.0, nodes: Vec::new() };
    for d in 1..=depth {
        // dp over levels from the bottom, restricted to nodes at level >= d
        let mut val: Vec<f64> = (0..1usize << depth)
            .map(|j| if admissible[depth][j] { weight[depth][j] } else { 0.0 })
            .collect();
        let mut take: Vec<Vec<bool>> = vec![Vec::new(); depth + 1];
        take[depth] = val.iter().map(|v| *v > 0.0).collect();
        for l in (1..depth).rev() {
            let mut next = Vec::with_capacity(1 << l);
            let mut t = Vec::with_capacity(1 << l);
            for j in 0..1usize << l {
                let split = val[2 * j] + val[2 * j + 1];
                let own = if l >= d && admissible[l][j] { weight[l][j] } else { 0.0 };
                if own > 0.0 && own >= split {
                    next.push(own);
                    t.push(true);
                } else {
                    next.push(split);
                    t.push(false);
                }
            }
            val = next;
            take[l] = t;
        }
        let total = if depth >= 1 { val.iter().sum::<f64>() } else { 0.0 };
        if total <= 0.0 {
            continue;
        }
        let mut nodes = Vec::new();
        let mut stack: Vec<(u32, usize)> = vec![(1, 0), (1, 1)];
        while let Some((l, j)) = stack.pop() {
            if take[l as usize][j] {
                nodes.push((l, j));
            } else if (l as usize) < depth {
                stack.push((l + 1, 2 * j + 1));
                stack.push((l + 1, 2 * j));
            }
        }
        nodes.sort();
        let min_level = nodes.iter().map(|n| n.0).min().unwrap_or(d as u32);
        let value = 2f64.powf(gamma * min_level as f64) * total;
        if value > best.value {
            best = TreeChoice { value, nodes };
        }
    }
    best
}

/// Lower bound for `Ψ_{γ,ε}(I, E)` with the partition that attains it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiEstimate {
    pub value: f64,
    pub witness: PartitionSpec,
    /// Depth of the dyadic search below `I`.
    pub budget: u32,
}

/// Maximises `inf_s (|I|/|J_s|)^γ Σ_s Φ(J_s, E)` over ε-good subpartitions of `I` made of
/// dyadic descendants at most `budget` generations down. Within that family the maximum is
/// exact; the true supremum over all ε-good subpartitions can only be larger.
pub fn psi_gamma_eps(
    i: &Interval,
    region: &Region,
    omega: &Measure,
    sigma: &Measure,
    gamma: f64,
    eps: f64,
    budget: u32,
) -> Result<PsiEstimate, FunctionalError> {
    if budget == 0 {
        return Err(FunctionalError::InvalidParameter("budget must be at least 1".into()));
    }
    if !(gamma > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(FunctionalError::InvalidParameter(format!("need gamma > 0 and eps in (0,1), got {gamma}, {eps}")));
    }
    let levels: Vec<Vec<Interval>> = (0..=budget).map(|l| halving_level(i, l)).collect();
    let weight: Vec<Vec<f64>> = levels.iter().map(|lv| lv.iter().map(|j| phi(j, region, omega, sigma)).collect()).collect();
    let admissible: Vec<Vec<bool>> = levels.iter().map(|lv| lv.iter().map(|j| is_eps_good(j, i, eps)).collect()).collect();
    let choice = best_antichain(&weight, &admissible, gamma);
    let parts = choice.nodes.iter().map(|&(l, j)| levels[l as usize][j]).collect();
    Ok(PsiEstimate { value: choice.value, witness: PartitionSpec { parent: *i, parts, eps_good: Some(eps) }, budget })
}
