//! Finite positive measures on the line: point masses plus uniform segments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used to decide whether two positions coincide.
/// The absolute tolerance is this value times the configuration scale.
pub const POSITION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("degenerate interval [{0}, {1}]")]
    DegenerateInterval(f64, f64),
    #[error("non-finite coordinate or weight")]
    NonFinite,
    #[error("atom mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("segment density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("pushforward scale must be nonzero")]
    ZeroScale,
}

/// A nondegenerate interval. Endpoint inclusion is decided by the query, not the type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    left: f64,
    right: f64,
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = MeasureError;
    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.left, i.right]
    }
}

impl Interval {
    pub fn new(left: f64, right: f64) -> Result<Self, MeasureError> {
        if !left.is_finite() || !right.is_finite() {
            return Err(MeasureError::NonFinite);
        }
        if left >= right {
            return Err(MeasureError::DegenerateInterval(left, right));
        }
        Ok(Interval { left, right })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn length(&self) -> f64 {
        self.right - self.left
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.left + self.right)
    }

    /// Endpoints and midpoint.
    pub fn boundary_set(&self) -> [f64; 3] {
        [self.left, self.center(), self.right]
    }

    /// Membership in `[left, right)`.
    pub fn contains(&self, x: f64) -> bool {
        self.left <= x && x < self.right
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        self.left <= x && x <= self.right
    }

    /// Whether `self` lies inside `other` (as closed sets).
    pub fn is_within(&self, other: &Interval) -> bool {
        other.left <= self.left && self.right <= other.right
    }

    /// Intersection as half-open sets; `None` when empty.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let l = self.left.max(other.left);
        let r = self.right.min(other.right);
        (l < r).then_some(Interval { left: l, right: r })
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.intersect(other).is_some()
    }

    pub fn distance_to_point(&self, x: f64) -> f64 {
        (self.left - x).max(x - self.right).max(0.0)
    }

    pub fn distance(&self, other: &Interval) -> f64 {
        (self.left - other.right).max(other.left - self.right).max(0.0)
    }
}

/// Endpoint inclusion flags for mass queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Closure {
    pub left: bool,
    pub right: bool,
}

impl Closure {
    pub const CLOSED: Closure = Closure { left: true, right: true };
    pub const OPEN: Closure = Closure { left: false, right: false };
    pub const HALF_OPEN: Closure = Closure { left: true, right: false };
}

/// A set that measures are restricted to. Intervals are taken half-open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    All,
    Within(Interval),
    /// `outer` with `hole` removed.
    Between { outer: Interval, hole: Interval },
}

impl Region {
    pub fn contains(&self, x: f64) -> bool {
        match self {
            Region::All => true,
            Region::Within(i) => i.contains(x),
            Region::Between { outer, hole } => outer.contains(x) && !hole.contains(x),
        }
    }

    /// The pieces of `[a, b]` lying in the region.
    pub fn clip(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(2);
        let mut push = |l: f64, r: f64| {
            if l < r {
                out.push((l, r));
            }
        };
        match self {
            Region::All => push(a, b),
            Region::Within(i) => push(a.max(i.left), b.min(i.right)),
            Region::Between { outer, hole } => {
                let l = a.max(outer.left);
                let r = b.min(outer.right);
                push(l, r.min(hole.left));
                push(l.max(hole.right), r);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub left: f64,
    pub right: f64,
    pub density: f64,
}

impl Segment {
    pub fn mass(&self) -> f64 {
        self.density * (self.right - self.left)
    }

    fn overlap_mass(&self, l: f64, r: f64) -> f64 {
        let a = self.left.max(l);
        let b = self.right.min(r);
        if a < b {
            self.density * (b - a)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RawMeasure {
    #[serde(default)]
    atoms: Vec<[f64; 2]>,
    #[serde(default)]
    segments: Vec<[f64; 3]>,
}

/// Point masses plus piecewise-uniform densities. Immutable after construction.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct Measure {
    atoms: Vec<Atom>,
    segments: Vec<Segment>,
    atom_prefix: Vec<f64>,
    segment_prefix: Vec<f64>,
    segments_disjoint: bool,
    scale: f64,
}

impl TryFrom<RawMeasure> for Measure {
    type Error = MeasureError;
    fn try_from(raw: RawMeasure) -> Result<Self, Self::Error> {
        Measure::new(
            raw.atoms.iter().map(|a| (a[0], a[1])).collect(),
            raw.segments.iter().map(|s| (s[0], s[1], s[2])).collect(),
        )
    }
}

impl From<Measure> for RawMeasure {
    fn from(m: Measure) -> Self {
        RawMeasure {
            atoms: m.atoms.iter().map(|a| [a.position, a.mass]).collect(),
            segments: m.segments.iter().map(|s| [s.left, s.right, s.density]).collect(),
        }
    }
}

impl PartialEq for Measure {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.segments == other.segments
    }
}

impl Measure {
    /// Builds a measure from `(position, mass)` atoms and `(left, right, density)` segments.
    pub fn new(atoms: Vec<(f64, f64)>, segments: Vec<(f64, f64, f64)>) -> Result<Self, MeasureError> {
        let mut a = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            if !x.is_finite() || !m.is_finite() {
                return Err(MeasureError::NonFinite);
            }
            if m <= 0.0 {
                return Err(MeasureError::NonPositiveMass(m));
            }
            a.push(Atom { position: x, mass: m });
        }
        let mut s = Vec::with_capacity(segments.len());
        for (l, r, d) in segments {
            if !d.is_finite() {
                return Err(MeasureError::NonFinite);
            }
            Interval::new(l, r)?;
            if d <= 0.0 {
                return Err(MeasureError::NonPositiveDensity(d));
            }
            s.push(Segment { left: l, right: r, density: d });
        }
        Ok(Self::from_parts(a, s))
    }

    pub fn zero() -> Self {
        Self::from_parts(Vec::new(), Vec::new())
    }

    pub fn dirac(x: f64, mass: f64) -> Result<Self, MeasureError> {
        Self::new(vec![(x, mass)], vec![])
    }

    pub fn uniform(left: f64, right: f64, density: f64) -> Result<Self, MeasureError> {
        Self::new(vec![], vec![(left, right, density)])
    }

    /// Assumes validated parts; sorts and merges.
    pub(crate) fn from_parts(mut atoms: Vec<Atom>, mut segments: Vec<Segment>) -> Self {
        atoms.sort_by(|p, q| p.position.total_cmp(&q.position));
        segments.sort_by(|p, q| p.left.total_cmp(&q.left).then(p.right.total_cmp(&q.right)));
        let mut scale: f64 = 1.0;
        for a in &atoms {
            scale = scale.max(a.position.abs());
        }
        for s in &segments {
            scale = scale.max(s.left.abs()).max(s.right.abs());
        }
        let tol = POSITION_TOL * scale;
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if (a.position - last.position).abs() <= tol => last.mass += a.mass,
                _ => merged.push(a),
            }
        }
        let mut atom_prefix = Vec::with_capacity(merged.len() + 1);
        let mut acc = 0.0;
        atom_prefix.push(acc);
        for a in &merged {
            acc += a.mass;
            atom_prefix.push(acc);
        }
        let mut segment_prefix = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        segment_prefix.push(acc);
        for s in &segments {
            acc += s.mass();
            segment_prefix.push(acc);
        }
        let segments_disjoint = segments.windows(2).all(|w| w[0].right <= w[1].left);
        Measure { atoms: merged, segments, atom_prefix, segment_prefix, segments_disjoint, scale }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.segments.is_empty()
    }

    /// Largest absolute coordinate appearing in the support, at least 1.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn total_mass(&self) -> f64 {
        self.atom_prefix.last().copied().unwrap_or(0.0) + self.segment_prefix.last().copied().unwrap_or(0.0)
    }

    /// Mass of `I` with the requested endpoint inclusion.
    pub fn mass(&self, interval: &Interval, closure: Closure) -> f64 {
        self.mass_between(interval.left, interval.right, closure)
    }

    pub(crate) fn mass_between(&self, l: f64, r: f64, closure: Closure) -> f64 {
        let lo = if closure.left {
            self.atoms.partition_point(|a| a.position < l)
        } else {
            self.atoms.partition_point(|a| a.position <= l)
        };
        let hi = if closure.right {
            self.atoms.partition_point(|a| a.position <= r)
        } else {
            self.atoms.partition_point(|a| a.position < r)
        };
        let atom_mass = if hi > lo { self.atom_prefix[hi] - self.atom_prefix[lo] } else { 0.0 };
        atom_mass + self.segment_mass_between(l, r)
    }

    /// Mass of `[l, r)`.
    pub(crate) fn mass_half_open(&self, l: f64, r: f64) -> f64 {
        if l >= r {
            return 0.0;
        }
        self.mass_between(l, r, Closure::HALF_OPEN)
    }

    fn segment_mass_between(&self, l: f64, r: f64) -> f64 {
        if self.segments.is_empty() || l >= r {
            return 0.0;
        }
        if !self.segments_disjoint {
            return self.segments.iter().map(|s| s.overlap_mass(l, r)).sum();
        }
        let (first, last) = self.segment_range(l, r);
        if first >= last {
            return 0.0;
        }
        if last - first <= 2 {
            return self.segments[first..last].iter().map(|s| s.overlap_mass(l, r)).sum();
        }
        let mut total = self.segment_prefix[last - 1] - self.segment_prefix[first + 1];
        total += self.segments[first].overlap_mass(l, r);
        total += self.segments[last - 1].overlap_mass(l, r);
        total
    }

    /// Index range of segments that may meet `(l, r)`.
    fn segment_range(&self, l: f64, r: f64) -> (usize, usize) {
        if !self.segments_disjoint {
            return (0, self.segments.len());
        }
        let first = self.segments.partition_point(|s| s.right <= l);
        let last = self.segments.partition_point(|s| s.left < r);
        (first, last.max(first))
    }

    /// Atoms in `[l, r]`.
    pub(crate) fn atoms_closed(&self, l: f64, r: f64) -> &[Atom] {
        let lo = self.atoms.partition_point(|a| a.position < l);
        let hi = self.atoms.partition_point(|a| a.position <= r);
        &self.atoms[lo..hi.max(lo)]
    }

    /// Atoms with position in `[l, r)`.
    pub(crate) fn atoms_in(&self, l: f64, r: f64) -> &[Atom] {
        let lo = self.atoms.partition_point(|a| a.position < l);
        let hi = self.atoms.partition_point(|a| a.position < r);
        &self.atoms[lo..hi.max(lo)]
    }

    /// Segments that may overlap `(l, r)`; a superset when segments overlap each other.
    pub(crate) fn segments_near(&self, l: f64, r: f64) -> &[Segment] {
        let (first, last) = self.segment_range(l, r);
        &self.segments[first..last]
    }

    /// Restriction to `[l, r)` when `complement` is false, or to its complement.
    pub fn restrict(&self, interval: &Interval, complement: bool) -> Measure {
        if complement {
            let mut atoms = Vec::new();
            let mut segs = Vec::new();
            for a in &self.atoms {
                if !interval.contains(a.position) {
                    atoms.push(*a);
                }
            }
            for s in &self.segments {
                if s.left < interval.left {
                    segs.push(Segment { right: s.right.min(interval.left), ..*s });
                }
                if s.right > interval.right {
                    segs.push(Segment { left: s.left.max(interval.right), ..*s });
                }
            }
            Self::from_parts(atoms, segs)
        } else {
            self.restrict_region(&Region::Within(*interval))
        }
    }

    pub fn restrict_region(&self, region: &Region) -> Measure {
        if let Region::All = region {
            return self.clone();
        }
        let atoms = self.atoms.iter().filter(|a| region.contains(a.position)).copied().collect();
        let mut segs = Vec::new();
        for s in &self.segments {
            for (l, r) in region.clip(s.left, s.right) {
                segs.push(Segment { left: l, right: r, density: s.density });
            }
        }
        Self::from_parts(atoms, segs)
    }

    /// Pushforward under `x -> scale * x + shift`.
    pub fn affine_pushforward(&self, scale: f64, shift: f64) -> Result<Measure, MeasureError> {
        if scale == 0.0 {
            return Err(MeasureError::ZeroScale);
        }
        if !scale.is_finite() || !shift.is_finite() {
            return Err(MeasureError::NonFinite);
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { position: scale * a.position + shift, mass: a.mass })
            .collect();
        let segs = self
            .segments
            .iter()
            .map(|s| {
                let (p, q) = (scale * s.left + shift, scale * s.right + shift);
                Segment { left: p.min(q), right: p.max(q), density: s.density / scale.abs() }
            })
            .collect();
        Ok(Self::from_parts(atoms, segs))
    }

    /// Multiplies every weight by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Measure {
        assert!(factor > 0.0 && factor.is_finite(), "scale factor must be positive");
        let atoms = self.atoms.iter().map(|a| Atom { mass: a.mass * factor, ..*a }).collect();
        let segs = self.segments.iter().map(|s| Segment { density: s.density * factor, ..*s }).collect();
        Self::from_parts(atoms, segs)
    }

    pub fn sum(&self, other: &Measure) -> Measure {
        let atoms = self.atoms.iter().chain(other.atoms.iter()).copied().collect();
        let segs = self.segments.iter().chain(other.segments.iter()).copied().collect();
        Self::from_parts(atoms, segs)
    }

    /// Componentwise comparison of atoms and segments up to `tol` (absolute).
    pub fn approx_eq(&self, other: &Measure, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()));
        self.atoms.len() == other.atoms.len()
            && self.segments.len() == other.segments.len()
            && self
                .atoms
                .iter()
                .zip(&other.atoms)
                .all(|(p, q)| close(p.position, q.position) && close(p.mass, q.mass))
            && self.segments.iter().zip(&other.segments).all(|(p, q)| {
                close(p.left, q.left) && close(p.right, q.right) && close(p.density, q.density)
            })
    }

    /// Smallest closed interval containing the support.
    pub fn support_hull(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if let (Some(f), Some(l)) = (self.atoms.first(), self.atoms.last()) {
            lo = lo.min(f.position);
            hi = hi.max(l.position);
        }
        for s in &self.segments {
            lo = lo.min(s.left);
            hi = hi.max(s.right);
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// True iff no atom position is shared between the two measures, up to the position tolerance.
pub fn no_common_point_mass(omega: &Measure, sigma: &Measure) -> bool {
    let tol = POSITION_TOL * omega.scale().max(sigma.scale());
    let (a, b) = (omega.atoms(), sigma.atoms());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let d = a[i].position - b[j].position;
        if d.abs() <= tol {
            return false;
        }
        if d < 0.0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_interval() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, 1.0).is_err());
    }

    #[test]
    fn closure_flags_on_atoms() {
        let m = Measure::new(vec![(0.0, 1.0), (1.0, 2.0)], vec![]).unwrap();
        let i = Interval::new(0.0, 1.0).unwrap();
        assert_eq!(m.mass(&i, Closure::CLOSED), 3.0);
        assert_eq!(m.mass(&i, Closure::OPEN), 0.0);
        assert_eq!(m.mass(&i, Closure::HALF_OPEN), 1.0);
    }

    #[test]
    fn duplicates_merge() {
        let m = Measure::new(vec![(0.5, 1.0), (0.5, 2.0)], vec![]).unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert_eq!(m.atoms()[0].mass, 3.0);
    }

    #[test]
    fn restrict_examples() {
        let m = Measure::new(vec![(0.0, 1.0), (2.0, 1.0)], vec![]).unwrap();
        let r = m.restrict(&Interval::new(1.0, 3.0).unwrap(), false);
        assert_eq!(r.atoms(), &[Atom { position: 2.0, mass: 1.0 }]);

        let leb = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        let c = leb.restrict(&Interval::new(0.0, 0.5).unwrap(), true);
        assert_eq!(c.segments(), &[Segment { left: 0.5, right: 1.0, density: 1.0 }]);
    }

    #[test]
    fn pushforward_examples() {
        let d = Measure::dirac(0.0, 1.0).unwrap();
        let p = d.affine_pushforward(1.0 / 3.0, 2.0 / 3.0).unwrap();
        assert_eq!(p.atoms()[0].position, 2.0 / 3.0);
        let u = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        let q = u.affine_pushforward(2.0, 0.0).unwrap();
        assert_eq!(q.segments(), &[Segment { left: 0.0, right: 2.0, density: 0.5 }]);
        assert_eq!(q.total_mass(), 1.0);
        assert_eq!(u.affine_pushforward(0.0, 1.0).unwrap_err(), MeasureError::ZeroScale);
        let flipped = u.affine_pushforward(-1.0, 0.0).unwrap();
        assert_eq!(flipped.segments()[0].left, -1.0);
    }

    #[test]
    fn common_point_mass() {
        let a = Measure::dirac(0.0, 1.0).unwrap();
        let b = Measure::dirac(1.0, 1.0).unwrap();
        assert!(!no_common_point_mass(&a, &a));
        assert!(no_common_point_mass(&a, &b));
    }

    #[test]
    fn json_round_trip() {
        let m = Measure::new(vec![(0.25, 1.0)], vec![(0.0, 1.0, 2.0)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"atoms":[[0.25,1.0]],"segments":[[0.0,1.0,2.0]]}"#);
        let back: Measure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Measure>(r#"{"atoms":[[0.0,-1.0]]}"#).is_err());
    }

    #[test]
    fn disjoint_fast_path_matches_linear_scan() {
        let segs: Vec<_> = (0..50).map(|i| (i as f64, i as f64 + 0.5, 1.0 + i as f64)).collect();
        let m = Measure::new(vec![], segs.clone()).unwrap();
        for &(l, r) in &[(0.25, 10.3), (3.1, 3.2), (-5.0, 100.0), (7.5, 8.0), (2.2, 4.4)] {
            let slow: f64 = segs
                .iter()
                .map(|&(a, b, d)| d * (b.min(r) - a.max(l)).max(0.0))
                .sum();
            let fast = m.mass(&Interval::new(l, r).unwrap(), Closure::CLOSED);
            assert!((fast - slow).abs() <= 1e-12 * slow.max(1.0), "{l} {r}: {fast} vs {slow}");
        }
    }
}
