//! Estimates of the named condition constants over finite families, and the
//! necessity cross-checks relating them.
//!
//! Every value is a lower bound for the true supremum: only the supplied intervals and
//! partitions are examined.

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::functionals::{
    mass_and_energy, poisson, poisson_in, psi_gamma_eps, psi_hybrid, FunctionalError, PartitionSpec, PoissonVariant,
};
use crate::measure::{Closure, Interval, Measure, Region};
use crate::transform::{testing_constant, weak_boundedness_constant, Direction, TransformError, TruncationProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConditionError {
    #[error("normalising mass of {0:?} is zero")]
    ZeroNormalizer(Interval),
    #[error("partition parent {got:?} differs from {want:?}")]
    ParentMismatch { got: Interval, want: Interval },
    #[error("empty family")]
    EmptyFamily,
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionName {
    A2,
    A2HalfForward,
    A2HalfDual,
    Testing,
    TestingDual,
    WeakBoundedness,
    Hybrid(f64),
    HybridDual(f64),
    EnergyHypothesis { gamma: f64, eps: f64 },
    EnergyHypothesisDual { gamma: f64, eps: f64 },
    Hardy,
}

impl fmt::Display for ConditionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionName::A2 => write!(f, "A2"),
            ConditionName::A2HalfForward => write!(f, "A2_half_forward"),
            ConditionName::A2HalfDual => write!(f, "A2_half_dual"),
            ConditionName::Testing => write!(f, "H"),
            ConditionName::TestingDual => write!(f, "H_dual"),
            ConditionName::WeakBoundedness => write!(f, "W"),
            ConditionName::Hybrid(e) => write!(f, "hybrid({e})"),
            ConditionName::HybridDual(e) => write!(f, "hybrid_dual({e})"),
            ConditionName::EnergyHypothesis { gamma, eps } => write!(f, "energy_hypothesis({gamma},{eps})"),
            ConditionName::EnergyHypothesisDual { gamma, eps } => write!(f, "energy_hypothesis_dual({gamma},{eps})"),
            ConditionName::Hardy => write!(f, "hardy"),
        }
    }
}

impl Serialize for ConditionName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Witness {
    None,
    Interval { interval: Interval },
    Partition { partition: PartitionSpec },
    Pair { first: Interval, second: Interval },
}

/// Size of the examined search space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SearchStamp {
    pub family_size: usize,
    pub depth: Option<u32>,
    pub budget: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub name: ConditionName,
    pub value: f64,
    pub witness: Witness,
    pub search: SearchStamp,
    pub truncation_note: String,
    pub divergent: bool,
}

const LOWER_BOUND_NOTE: &str = "lower bound: supremum taken over the listed family only";

impl ConditionReport {
    fn new(name: ConditionName, value: f64, witness: Witness, search: SearchStamp) -> Self {
        ConditionReport { name, value, witness, search, truncation_note: LOWER_BOUND_NOTE.to_string(), divergent: false }
    }
}

/// Which side of the A₂ product to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum A2Half {
    Both,
    Forward,
    Dual,
}

fn closed_mass(m: &Measure, i: &Interval) -> f64 {
    m.mass(i, Closure::CLOSED)
}

/// `√ max P(I,ω) P(I,σ)` (both), `max ω(I)/|I| · P(I,σ)` (forward) or
/// `max σ(I)/|I| · P(I,ω)` (dual).
pub fn a2_constant(omega: &Measure, sigma: &Measure, family: &[Interval], half: A2Half) -> Result<ConditionReport, ConditionError> {
    if family.is_empty() {
        return Err(ConditionError::EmptyFamily);
    }
    let std = PoissonVariant::Standard;
    let mut best = (0.0, None);
    for i in family {
        let v = match half {
            A2Half::Both => poisson(i, omega, std) * poisson(i, sigma, std),
            A2Half::Forward => closed_mass(omega, i) / i.length() * poisson(i, sigma, std),
            A2Half::Dual => closed_mass(sigma, i) / i.length() * poisson(i, omega, std),
        };
        if v > best.0 {
            best = (v, Some(*i));
        }
    }
    let (name, value) = match half {
        A2Half::Both => (ConditionName::A2, best.0.sqrt()),
        A2Half::Forward => (ConditionName::A2HalfForward, best.0),
        A2Half::Dual => (ConditionName::A2HalfDual, best.0),
    };
    let witness = best.1.map_or(Witness::None, |interval| Witness::Interval { interval });
    Ok(ConditionReport::new(name, value, witness, SearchStamp { family_size: family.len(), ..Default::default() }))
}

fn check_parent(p: &PartitionSpec, i0: &Interval) -> Result<(), ConditionError> {
    let tol = 1e-12 * i0.length();
    if (p.parent.left() - i0.left()).abs() > tol || (p.parent.right() - i0.right()).abs() > tol {
        return Err(ConditionError::ParentMismatch { got: p.parent, want: *i0 });
    }
    Ok(())
}

fn normaliser(m: &Measure, i0: &Interval) -> Result<f64, ConditionError> {
    let n = closed_mass(m, i0);
    if n <= 0.0 {
        Err(ConditionError::ZeroNormalizer(*i0))
    } else {
        Ok(n)
    }
}

/// Sum of hybrid summands `ω(I_r) E(I_r,ω)^p P(I_r, 1_{I0} σ)²` over one partition
/// (roles swapped when `dual`).
pub fn hybrid_sum(omega: &Measure, sigma: &Measure, i0: &Interval, exponent: f64, partition: &PartitionSpec, dual: bool) -> f64 {
    let (w, s) = if dual { (sigma, omega) } else { (omega, sigma) };
    let region = Region::Within(*i0);
    partition.parts.iter().map(|j| psi_hybrid(j, &region, w, s, exponent)).sum()
}

/// `√ max_partitions Σ_r ω(I_r) E(I_r,ω)^p P(I_r, 1_{I0} σ)² / σ(I0)`.
pub fn hybrid_constant(
    omega: &Measure,
    sigma: &Measure,
    i0: &Interval,
    exponent: f64,
    partitions: &[PartitionSpec],
    dual: bool,
) -> Result<ConditionReport, ConditionError> {
    if !(0.0..=2.0).contains(&exponent) {
        return Err(FunctionalError::InvalidParameter(format!("energy exponent {exponent} outside [0,2]")).into());
    }
    let norm = normaliser(if dual { omega } else { sigma }, i0)?;
    let mut best = (0.0, None);
    for p in partitions {
        check_parent(p, i0)?;
        let v = hybrid_sum(omega, sigma, i0, exponent, p, dual) / norm;
        if v > best.0 {
            best = (v, Some(p.clone()));
        }
    }
    let name = if dual { ConditionName::HybridDual(exponent) } else { ConditionName::Hybrid(exponent) };
    let witness = best.1.map_or(Witness::None, |partition| Witness::Partition { partition });
    Ok(ConditionReport::new(name, best.0.sqrt(), witness, SearchStamp { family_size: partitions.len(), ..Default::default() }))
}

/// `√ max_partitions Σ_r Ψ_{γ,ε}(I_r, I0) / σ(I0)` with the budgeted Ψ estimator.
#[allow(clippy::too_many_arguments)]
pub fn energy_hypothesis_constant(
    omega: &Measure,
    sigma: &Measure,
    i0: &Interval,
    gamma: f64,
    eps: f64,
    partitions: &[PartitionSpec],
    budget: u32,
    dual: bool,
) -> Result<ConditionReport, ConditionError> {
    let (w, s) = if dual { (sigma, omega) } else { (omega, sigma) };
    let norm = normaliser(s, i0)?;
    let region = Region::Within(*i0);
    let mut best = (0.0, None);
    for p in partitions {
        check_parent(p, i0)?;
        let mut total = 0.0;
        for j in &p.parts {
            total += psi_gamma_eps(j, &region, w, s, gamma, eps, budget)?.value;
        }
        if total / norm > best.0 {
            best = (total / norm, Some(p.clone()));
        }
    }
    let name = if dual {
        ConditionName::EnergyHypothesisDual { gamma, eps }
    } else {
        ConditionName::EnergyHypothesis { gamma, eps }
    };
    let witness = best.1.map_or(Witness::None, |partition| Witness::Partition { partition });
    Ok(ConditionReport::new(
        name,
        best.0.sqrt(),
        witness,
        SearchStamp { family_size: partitions.len(), budget: Some(budget), ..Default::default() },
    ))
}

/// Like [`energy_hypothesis_constant`] but maximising over every partition of `I0` into
/// dyadic pieces at most `depth` generations down (exact within that family).
#[allow(clippy::too_many_arguments)]
pub fn energy_hypothesis_dyadic(
    omega: &Measure,
    sigma: &Measure,
    i0: &Interval,
    gamma: f64,
    eps: f64,
    depth: u32,
    budget: u32,
    dual: bool,
) -> Result<ConditionReport, ConditionError> {
    let (w, s) = if dual { (sigma, omega) } else { (omega, sigma) };
    let norm = normaliser(s, i0)?;
    let region = Region::Within(*i0);
    let levels: Vec<Vec<Interval>> = (0..=depth).map(|l| crate::functionals::halving_level(i0, l)).collect();
    let mut psi: Vec<Vec<f64>> = Vec::with_capacity(levels.len());
    for lv in &levels {
        let mut row = Vec::with_capacity(lv.len());
        for j in lv {
            row.push(psi_gamma_eps(j, &region, w, s, gamma, eps, budget)?.value);
        }
        psi.push(row);
    }
    // best partition value below each node: keep the node or split it
    let mut val = psi[depth as usize].clone();
    let mut keep: Vec<Vec<bool>> = vec![Vec::new(); depth as usize + 1];
    keep[depth as usize] = vec![true; val.len()];
    for l in (0..depth as usize).rev() {
        let mut next = Vec::with_capacity(1 << l);
        let mut k = Vec::with_capacity(1 << l);
        for j in 0..1usize << l {
            let split = val[2 * j] + val[2 * j + 1];
            if psi[l][j] >= split {
                next.push(psi[l][j]);
                k.push(true);
            } else {
                next.push(split);
                k.push(false);
            }
        }
        val = next;
        keep[l] = k;
    }
    let mut parts = Vec::new();
    let mut stack = vec![(0usize, 0usize)];
    while let Some((l, j)) = stack.pop() {
        if keep[l][j] {
            parts.push(levels[l][j]);
        } else {
            stack.push((l + 1, 2 * j + 1));
            stack.push((l + 1, 2 * j));
        }
    }
    let name = if dual {
        ConditionName::EnergyHypothesisDual { gamma, eps }
    } else {
        ConditionName::EnergyHypothesis { gamma, eps }
    };
    let value = (val[0] / norm).sqrt();
    let witness = Witness::Partition { partition: PartitionSpec { parent: *i0, parts, eps_good: None } };
    Ok(ConditionReport::new(
        name,
        value,
        witness,
        SearchStamp { family_size: (1usize << (depth + 1)) - 1, depth: Some(depth), budget: Some(budget) },
    ))
}

/// `max_r ω̂([r, a]) σ([0, r])` over a uniform grid of `resolution` points in `(0, a)`
/// together with every atom position there.
pub fn hardy_constant(omega_hat: &Measure, sigma: &Measure, a: f64, resolution: usize) -> Result<f64, ConditionError> {
    if !(a > 0.0) {
        return Err(FunctionalError::InvalidParameter(format!("a must be positive, got {a}")).into());
    }
    let mut rs: Vec<f64> = (1..resolution.max(1)).map(|k| a * k as f64 / resolution.max(1) as f64).collect();
    for m in [omega_hat, sigma] {
        rs.extend(m.atoms().iter().map(|x| x.position).filter(|&x| x > 0.0 && x < a));
        for s in m.segments() {
            rs.extend([s.left, s.right].into_iter().filter(|&x| x > 0.0 && x < a));
        }
    }
    let mut best: f64 = 0.0;
    for r in rs {
        let upper = omega_hat.mass_between(r, a, Closure::CLOSED);
        let lower = sigma.mass_between(0.0, r, Closure::CLOSED);
        best = best.max(upper * lower);
    }
    Ok(best)
}

/// Testing constant as a report: the square root of the largest testing ratio.
pub fn testing_report(
    omega: &Measure,
    sigma: &Measure,
    family: &[Interval],
    direction: Direction,
    trunc: Option<TruncationProfile>,
) -> Result<ConditionReport, ConditionError> {
    if family.is_empty() {
        return Err(ConditionError::EmptyFamily);
    }
    let t = testing_constant(omega, sigma, family, direction, trunc)?;
    let name = match direction {
        Direction::Forward => ConditionName::Testing,
        Direction::Dual => ConditionName::TestingDual,
    };
    let witness = t.witness.map_or(Witness::None, |interval| Witness::Interval { interval });
    let search = SearchStamp { family_size: family.len(), ..Default::default() };
    Ok(ConditionReport::new(name, t.constant.sqrt(), witness, search))
}

/// Weak-boundedness constant as a report; zero when there are no pairs.
pub fn weak_boundedness_report(
    omega: &Measure,
    sigma: &Measure,
    pairs: &[(Interval, Interval)],
    trunc: Option<TruncationProfile>,
    comparability: f64,
) -> Result<ConditionReport, ConditionError> {
    let search = SearchStamp { family_size: pairs.len(), ..Default::default() };
    if pairs.is_empty() {
        return Ok(ConditionReport::new(ConditionName::WeakBoundedness, 0.0, Witness::None, search));
    }
    let w = weak_boundedness_constant(omega, sigma, pairs, trunc, comparability)?;
    let witness = w.witness.map_or(Witness::None, |(first, second)| Witness::Pair { first, second });
    Ok(ConditionReport::new(ConditionName::WeakBoundedness, w.constant, witness, search))
}

/// Marks a sequence of reports over nested windows as divergent when the last three
/// increments are all increases and the value grew by at least `1.5x` across them.
pub fn flag_divergence(reports: &mut [ConditionReport]) -> bool {
    let values: Vec<f64> = reports.iter().map(|r| r.value).collect();
    let divergent = is_divergent(&values);
    if divergent {
        if let Some(last) = reports.last_mut() {
            last.divergent = true;
        }
    }
    divergent
}

/// Growth test used by [`flag_divergence`].
pub fn is_divergent(values: &[f64]) -> bool {
    if values.len() < 4 {
        return false;
    }
    let tail = &values[values.len() - 4..];
    tail.windows(2).all(|w| w[1] > w[0]) && tail[0] > 0.0 && tail[3] >= 1.5 * tail[0]
}

/// Ratios of the necessity cross-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessityReport {
    pub energy: f64,
    pub a2: f64,
    pub testing: f64,
    pub testing_dual: f64,
    pub weak_boundedness: f64,
    /// `E / (A₂ + H)`.
    pub energy_ratio: f64,
    /// `W / (min(H, H*) + A₂)`.
    pub weak_ratio: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Computes the energy constant (forward, exponent 2, over `partitions`), A₂, both testing
/// constants (square roots of the testing ratios) and W, then the two necessity ratios.
pub fn necessity_crosscheck(
    omega: &Measure,
    sigma: &Measure,
    family: &[Interval],
    partitions: &[PartitionSpec],
    pairs: &[(Interval, Interval)],
    trunc: Option<TruncationProfile>,
    comparability: f64,
) -> Result<NecessityReport, ConditionError> {
    let mut energy: f64 = 0.0;
    for p in partitions {
        let norm = closed_mass(sigma, &p.parent);
        if norm > 0.0 {
            energy = energy.max((hybrid_sum(omega, sigma, &p.parent, 2.0, p, false) / norm).sqrt());
        }
    }
    let a2 = a2_constant(omega, sigma, family, A2Half::Both)?.value;
    let h = testing_constant(omega, sigma, family, Direction::Forward, trunc)?.constant.sqrt();
    let hd = testing_constant(omega, sigma, family, Direction::Dual, trunc)?.constant.sqrt();
    let w = if pairs.is_empty() {
        0.0
    } else {
        weak_boundedness_constant(omega, sigma, pairs, trunc, comparability)?.constant
    };
    Ok(NecessityReport {
        energy,
        a2,
        testing: h,
        testing_dual: hd,
        weak_boundedness: w,
        energy_ratio: ratio(energy, a2 + h),
        weak_ratio: ratio(w, h.min(hd) + a2),
    })
}

/// Energy summand of a single interval, exposed for direct checks.
pub fn energy_summand(j: &Interval, region: &Region, omega: &Measure, sigma: &Measure) -> f64 {
    let (m, e) = mass_and_energy(j, omega);
    match e {
        Some(e) => {
            let p = poisson_in(j, sigma, region, PoissonVariant::Standard);
            m * e * e * p * p
        }
        None => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(l: f64, r: f64) -> Interval {
        Interval::new(l, r).unwrap()
    }

    #[test]
    fn a2_zero_and_divergence() {
        let z = Measure::zero();
        let r = a2_constant(&z, &z, &[iv(0.0, 1.0)], A2Half::Both).unwrap();
        assert_eq!(r.value, 0.0);
        let d = Measure::dirac(0.0, 1.0).unwrap();
        let mut reports: Vec<ConditionReport> = (0..6)
            .map(|k| {
                let h = 2f64.powi(-k);
                a2_constant(&d, &d, &[iv(-h, h)], A2Half::Both).unwrap()
            })
            .collect();
        assert!(flag_divergence(&mut reports));
        assert!(reports.last().unwrap().divergent);
    }

    #[test]
    fn divergence_rule() {
        assert!(!is_divergent(&[1.0, 1.1, 1.15, 1.17, 1.18]));
        assert!(is_divergent(&[4.0, 5.0, 6.0, 7.0]));
        assert!(!is_divergent(&[1.0, 2.0, 3.0]));
        assert!(!is_divergent(&[1.0, 3.0, 2.9, 4.0]));
    }

    #[test]
    fn hybrid_zero_with_single_atoms() {
        let i0 = iv(0.0, 4.0);
        let w = Measure::new(vec![(0.5, 1.0), (1.5, 2.0), (2.5, 1.0)], vec![]).unwrap();
        let s = Measure::uniform(0.0, 4.0, 1.0).unwrap();
        let p = PartitionSpec::new(i0, vec![iv(0.0, 1.0), iv(1.0, 2.0), iv(2.0, 3.0)], None).unwrap();
        let r = hybrid_constant(&w, &s, &i0, 2.0, &[p.clone()], false).unwrap();
        assert_eq!(r.value, 0.0);
        let piv = hybrid_constant(&w, &s, &i0, 0.0, &[p], false).unwrap();
        assert!(piv.value > 0.0);
        let empty = Measure::zero();
        assert!(hybrid_constant(&w, &empty, &i0, 2.0, &[], false).is_err());
    }

    #[test]
    fn hardy_examples() {
        let w = Measure::dirac(1.0, 1.0).unwrap();
        let s = Measure::dirac(0.5, 1.0).unwrap();
        assert_eq!(hardy_constant(&w, &s, 2.0, 64).unwrap(), 1.0);
        assert_eq!(hardy_constant(&w, &Measure::zero(), 2.0, 64).unwrap(), 0.0);
        assert_eq!(hardy_constant(&w, &s.scaled(2.0), 2.0, 64).unwrap(), 2.0);
    }

    #[test]
    fn energy_hypothesis_zero_without_mass() {
        let i0 = iv(0.0, 1.0);
        let w = Measure::dirac(5.0, 1.0).unwrap();
        let s = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        let p = PartitionSpec::uniform(i0, 2);
        let r = energy_hypothesis_constant(&w, &s, &i0, 1.0, 0.5, &[p], 3, false).unwrap();
        assert_eq!(r.value, 0.0);
    }
}
