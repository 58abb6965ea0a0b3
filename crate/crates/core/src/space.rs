//! Ground metrics, finite measures and particle configurations.
//!
//! Sites are indices `0..n` into the site list of a [`GroundMetric`]. Line
//! metrics also carry a real coordinate per site. Measures that live directly
//! on the real line use [`Coord`] as their site type.

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a site in a finite site list.
pub type Site = usize;

/// Totally ordered real coordinate used as an atom identifier on the line.
pub type Coord = OrderedFloat<f64>;

/// Finite measure on the real line.
pub type LineMeasure = FiniteMeasure<Coord>;

/// Non-negative measure with finitely many atoms, sorted by site.
///
/// Duplicate atoms are merged on construction and zero weights are dropped,
/// so two measures are equal exactly when they have the same representation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteMeasure<S = Site> {
    atoms: Vec<(S, f64)>,
}

impl<S: Ord + Copy> Default for FiniteMeasure<S> {
    fn default() -> Self {
        Self::zero()
    }
}

fn check_weight(w: f64) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(Error::InvalidMeasure(format!("weight {w} is not a finite non-negative number")));
    }
    Ok(())
}

impl<S: Ord + Copy> FiniteMeasure<S> {
    pub fn zero() -> Self {
        Self { atoms: Vec::new() }
    }

    /// Builds a measure from atoms in any order, merging duplicates.
    pub fn new(atoms: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let mut v: Vec<(S, f64)> = atoms.into_iter().collect();
        for &(_, w) in &v {
            check_weight(w)?;
        }
        v.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self::from_sorted(v))
    }

    // Input sorted by site; merges equal sites and drops zeros.
    fn from_sorted(v: Vec<(S, f64)>) -> Self {
        let mut atoms: Vec<(S, f64)> = Vec::with_capacity(v.len());
        for (s, w) in v {
            match atoms.last_mut() {
                Some(last) if last.0 == s => last.1 += w,
                _ => atoms.push((s, w)),
            }
        }
        atoms.retain(|a| a.1 > 0.0);
        Self { atoms }
    }

    /// Point mass. Panics on a negative or non-finite weight.
    pub fn dirac(site: S, weight: f64) -> Self {
        check_weight(weight).expect("dirac weight");
        Self::from_sorted(vec![(site, weight)])
    }

    pub fn atoms(&self) -> &[(S, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn weight(&self, site: S) -> f64 {
        match self.atoms.binary_search_by(|a| a.0.cmp(&site)) {
            Ok(i) => self.atoms[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn support(&self) -> impl Iterator<Item = S> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    /// `factor * self`; panics on a negative factor.
    pub fn scaled(&self, factor: f64) -> Self {
        check_weight(factor).expect("scale factor");
        Self::from_sorted(self.atoms.iter().map(|&(s, w)| (s, w * factor)).collect())
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut v = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.atoms.len() || j < other.atoms.len() {
            let take_left = match (self.atoms.get(i), other.atoms.get(j)) {
                (Some(a), Some(b)) => a.0 <= b.0,
                (Some(_), None) => true,
                _ => false,
            };
            if take_left {
                v.push(self.atoms[i]);
                i += 1;
            } else {
                v.push(other.atoms[j]);
                j += 1;
            }
        }
        Self::from_sorted(v)
    }

    /// `self + weight * δ_site`.
    pub fn with_atom(&self, site: S, weight: f64) -> Self {
        self.plus(&Self::dirac(site, weight))
    }

    /// Copy with the atom at `site` removed.
    pub fn without(&self, site: S) -> Self {
        Self { atoms: self.atoms.iter().copied().filter(|a| a.0 != site).collect() }
    }

    pub fn map_sites<T: Ord + Copy>(&self, f: impl Fn(S) -> T) -> FiniteMeasure<T> {
        let mut v: Vec<(T, f64)> = self.atoms.iter().map(|&(s, w)| (f(s), w)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        FiniteMeasure::from_sorted(v)
    }
}

impl FiniteMeasure<Coord> {
    /// Measure on the line from `(coordinate, weight)` pairs.
    pub fn on_line(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.iter().any(|a| !a.0.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite coordinate".into()));
        }
        Self::new(atoms.iter().map(|&(z, w)| (OrderedFloat(z), w)))
    }
}

/// `sum_j w_j |z_j|`.
pub fn abs_first_moment(m: &LineMeasure) -> f64 {
    m.atoms().iter().map(|(z, w)| w * z.0.abs()).sum()
}

/// Right-continuous distribution function `m((-inf, t])`.
pub fn cdf_eval(m: &LineMeasure, t: f64) -> f64 {
    m.atoms().iter().take_while(|a| a.0 .0 <= t).map(|a| a.1).sum()
}

/// Constant-density piece `[start, end)` of a base measure. Ends may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub density: f64,
}

/// Base measure of a line metric: atoms plus constant-density segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseMeasure {
    atoms: Vec<(f64, f64)>,
    segments: Vec<Segment>,
}

impl BaseMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, segments: Vec<Segment>) -> Result<Self> {
        for &(p, w) in &atoms {
            if !p.is_finite() || !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidMeasure(format!("bad base atom ({p}, {w})")));
            }
        }
        for s in &segments {
            if s.start.is_nan() || s.end.is_nan() || s.start >= s.end || !s.density.is_finite() || s.density < 0.0 {
                return Err(Error::InvalidMeasure(format!("bad base segment {s:?}")));
            }
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { atoms, segments })
    }

    pub fn lebesgue() -> Self {
        Self {
            atoms: Vec::new(),
            segments: vec![Segment { start: f64::NEG_INFINITY, end: f64::INFINITY, density: 1.0 }],
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Mass of `[a, b)`; zero when `b <= a`.
    pub fn interval(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let atoms: f64 = self.atoms.iter().filter(|p| p.0 >= a && p.0 < b).map(|p| p.1).sum();
        let dens: f64 = self
            .segments
            .iter()
            .map(|s| {
                let len = s.end.min(b) - s.start.max(a);
                if len > 0.0 {
                    s.density * len
                } else {
                    0.0
                }
            })
            .sum();
        atoms + dens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    General,
    Trivial,
    WeightedLine,
    MeasureLine,
}

#[derive(Debug, Clone)]
enum Rule {
    General(Vec<f64>),
    Trivial,
    // d(i, j) = |pos[i] - pos[j]| with pos[i] = mu([coords[0], coords[i]))
    Line { coords: Vec<f64>, pos: Vec<f64>, base: BaseMeasure },
}

/// Finite site set `0..n` with a distance rule.
#[derive(Debug, Clone)]
pub struct GroundMetric {
    n: usize,
    kind: MetricKind,
    rule: Rule,
}

impl GroundMetric {
    /// Distance matrix; must be a metric with positive off-diagonal entries.
    pub fn general(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::InvalidMetric("empty site set".into()));
        }
        let mut flat = Vec::with_capacity(n * n);
        for row in &matrix {
            if row.len() != n {
                return Err(Error::InvalidMetric("distance matrix is not square".into()));
            }
            flat.extend_from_slice(row);
        }
        let scale = flat.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
        let tol = 1e-12 * scale;
        for i in 0..n {
            for j in 0..n {
                let v = flat[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMetric(format!("entry ({i},{j}) = {v}")));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidMetric(format!("nonzero diagonal at {i}")));
                }
                if i != j && v == 0.0 {
                    return Err(Error::InvalidMetric(format!("distinct sites {i},{j} at distance 0")));
                }
                if (v - flat[j * n + i]).abs() > tol {
                    return Err(Error::InvalidMetric(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if flat[i * n + k] > flat[i * n + j] + flat[j * n + k] + tol {
                        return Err(Error::InvalidMetric(format!("triangle inequality fails at ({i},{j},{k})")));
                    }
                }
            }
        }
        Ok(Self { n, kind: MetricKind::General, rule: Rule::General(flat) })
    }

    pub fn trivial(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMetric("empty site set".into()));
        }
        Ok(Self { n, kind: MetricKind::Trivial, rule: Rule::Trivial })
    }

    /// Sites `0..=weights.len()` with `d(x, y) = |U(x) - U(y)|`, `U(x) = sum_{k<x} u_k`.
    pub fn weighted_line(weights: &[f64]) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidMetric(format!("line weight {w} is not positive")));
        }
        let segments = weights
            .iter()
            .enumerate()
            .map(|(k, &u)| Segment { start: k as f64, end: (k + 1) as f64, density: u })
            .collect();
        let base = BaseMeasure { atoms: Vec::new(), segments };
        let coords: Vec<f64> = (0..=weights.len()).map(|k| k as f64).collect();
        let mut pos = Vec::with_capacity(coords.len());
        let mut acc = 0.0;
        pos.push(0.0);
        for &u in weights {
            acc += u;
            pos.push(acc);
        }
        Ok(Self { n: coords.len(), kind: MetricKind::WeightedLine, rule: Rule::Line { coords, pos, base } })
    }

    /// Sites at strictly increasing `coords` with `d(x, y) = mu([min, max))`.
    pub fn measure_line(coords: Vec<f64>, base: BaseMeasure) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidMetric("empty site set".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) || coords.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMetric("line coordinates must be finite and strictly increasing".into()));
        }
        let pos: Vec<f64> = coords.iter().map(|&c| base.interval(coords[0], c)).collect();
        if let Some(k) = (1..pos.len()).find(|&k| pos[k] <= pos[k - 1]) {
            return Err(Error::InvalidMetric(format!(
                "base measure gives zero distance between sites {} and {k}",
                k - 1
            )));
        }
        Ok(Self { n: coords.len(), kind: MetricKind::MeasureLine, rule: Rule::Line { coords, pos, base } })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    /// Distance between two sites. Panics if either is out of range.
    #[inline]
    pub fn d(&self, x: Site, y: Site) -> f64 {
        assert!(x < self.n && y < self.n, "site out of range");
        match &self.rule {
            Rule::General(m) => m[x * self.n + y],
            Rule::Trivial => {
                if x == y {
                    0.0
                } else {
                    1.0
                }
            }
            Rule::Line { pos, .. } => (pos[x] - pos[y]).abs(),
        }
    }

    pub fn check_site(&self, x: Site) -> Result<()> {
        if x < self.n {
            Ok(())
        } else {
            Err(Error::UnknownSite { site: x, size: self.n })
        }
    }

    pub fn check_measure(&self, m: &FiniteMeasure) -> Result<()> {
        m.support().try_for_each(|s| self.check_site(s))
    }

    /// Site coordinates of a line metric.
    pub fn coords(&self) -> Option<&[f64]> {
        match &self.rule {
            Rule::Line { coords, .. } => Some(coords),
            _ => None,
        }
    }

    /// Base measure of a line metric.
    pub fn base(&self) -> Option<&BaseMeasure> {
        match &self.rule {
            Rule::Line { base, .. } => Some(base),
            _ => None,
        }
    }

    /// Largest distance between two sites.
    pub fn diameter(&self) -> f64 {
        match &self.rule {
            Rule::General(m) => m.iter().copied().fold(0.0, f64::max),
            Rule::Trivial => {
                if self.n > 1 {
                    1.0
                } else {
                    0.0
                }
            }
            Rule::Line { pos, .. } => pos[pos.len() - 1] - pos[0],
        }
    }

    /// Pushes a site-indexed measure onto the real line (line metrics only).
    pub fn to_line(&self, m: &FiniteMeasure) -> Option<LineMeasure> {
        let coords = self.coords()?;
        Some(m.map_sites(|s| OrderedFloat(coords[s])))
    }
}

/// Sites of the `N` particles.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(Vec<Site>);

impl Configuration {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument("configuration needs at least one particle".into()));
        }
        Ok(Self(sites))
    }

    pub fn single(site: Site) -> Self {
        Self(vec![site])
    }

    pub fn sites(&self) -> &[Site] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn set(&mut self, i: usize, site: Site) {
        self.0[i] = site;
    }

    pub fn check(&self, g: &GroundMetric) -> Result<()> {
        self.0.iter().try_for_each(|&s| g.check_site(s))
    }

    /// Number of particles at each of `n_sites` sites.
    pub fn occupation(&self, n_sites: usize) -> Vec<usize> {
        let mut counts = vec![0; n_sites];
        for &s in &self.0 {
            counts[s] += 1;
        }
        counts
    }
}

impl std::ops::Index<usize> for Configuration {
    type Output = Site;
    fn index(&self, i: usize) -> &Site {
        &self.0[i]
    }
}

/// `(1/N) sum_i d(a_i, b_i)`.
pub fn config_distance(a: &Configuration, b: &Configuration, g: &GroundMetric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    a.check(g)?;
    b.check(g)?;
    Ok(distance_unchecked(a.sites(), b.sites(), g))
}

pub(crate) fn distance_unchecked(a: &[Site], b: &[Site], g: &GroundMetric) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(&x, &y)| g.d(x, y)).sum();
    s / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v: &[usize]) -> Configuration {
        Configuration::new(v.to_vec()).unwrap()
    }

    #[test]
    fn config_distance_examples() {
        let g = GroundMetric::trivial(5).unwrap();
        assert_eq!(config_distance(&cfg(&[1, 2, 3]), &cfg(&[1, 2, 3]), &g).unwrap(), 0.0);
        let v = config_distance(&cfg(&[1, 2, 3]), &cfg(&[1, 2, 4]), &g).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        let w = GroundMetric::weighted_line(&[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(config_distance(&cfg(&[0, 0]), &cfg(&[2, 1]), &w).unwrap(), 2.0);
    }

    #[test]
    fn config_distance_errors() {
        let g = GroundMetric::trivial(3).unwrap();
        assert_eq!(config_distance(&cfg(&[0]), &cfg(&[0, 1]), &g), Err(Error::LengthMismatch(1, 2)));
        assert!(matches!(config_distance(&cfg(&[0]), &cfg(&[7]), &g), Err(Error::UnknownSite { .. })));
        assert!(Configuration::new(vec![]).is_err());
    }

    #[test]
    fn moments_and_cdf() {
        let m = LineMeasure::on_line(&[(0.0, 1.0)]).unwrap();
        assert_eq!(abs_first_moment(&m), 0.0);
        let m = LineMeasure::on_line(&[(-2.0, 0.5), (2.0, 0.5)]).unwrap();
        assert_eq!(abs_first_moment(&m), 2.0);
        let m = LineMeasure::on_line(&[(1.0, 2.0), (3.0, 1.0)]).unwrap();
        assert_eq!(abs_first_moment(&m), 5.0);

        let m = LineMeasure::on_line(&[(0.0, 0.5), (2.0, 0.5)]).unwrap();
        assert_eq!(cdf_eval(&m, -1.0), 0.0);
        assert_eq!(cdf_eval(&m, 1.0), 0.5);
        let d = LineMeasure::on_line(&[(1.0, 1.0)]).unwrap();
        assert_eq!(cdf_eval(&d, 1.0), 1.0);
        assert_eq!(cdf_eval(&d, 0.999), 0.0);
    }

    #[test]
    fn measure_merges_and_drops_zeros() {
        let a = FiniteMeasure::new(vec![(3, 1.0), (1, 2.0), (3, 0.5), (2, 0.0)]).unwrap();
        assert_eq!(a.atoms(), &[(1, 2.0), (3, 1.5)]);
        assert!(FiniteMeasure::new(vec![(0, -1.0)]).is_err());
        assert!(FiniteMeasure::new(vec![(0, f64::NAN)]).is_err());
        assert_eq!(FiniteMeasure::<Site>::zero().mass(), 0.0);
        let b = a.plus(&FiniteMeasure::dirac(2, 1.0));
        assert_eq!(b.atoms(), &[(1, 2.0), (2, 1.0), (3, 1.5)]);
        assert_eq!(b.weight(2), 1.0);
        assert_eq!(b.weight(0), 0.0);
    }

    #[test]
    fn line_metrics() {
        let g = GroundMetric::measure_line(vec![0.0, 1.0, 3.0], BaseMeasure::lebesgue()).unwrap();
        assert_eq!(g.d(0, 2), 3.0);
        assert_eq!(g.d(2, 1), 2.0);
        // atom at the left end counts, at the right end does not
        let base = BaseMeasure::new(vec![(0.0, 1.0)], vec![]).unwrap();
        let g = GroundMetric::measure_line(vec![-1.0, 0.0, 1.0], base);
        assert!(g.is_err());
        let base = BaseMeasure::new(vec![(0.0, 1.0), (0.5, 2.0), (1.0, 4.0)], vec![]).unwrap();
        let g = GroundMetric::measure_line(vec![0.0, 0.5, 1.0, 2.0], base).unwrap();
        assert_eq!(g.d(0, 1), 1.0);
        assert_eq!(g.d(0, 2), 3.0);
        assert_eq!(g.d(1, 3), 6.0);
    }

    #[test]
    fn general_metric_validation() {
        assert!(GroundMetric::general(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(GroundMetric::general(vec![vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
        let bad = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(GroundMetric::general(bad).is_err());
        let ok = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        let g = GroundMetric::general(ok).unwrap();
        assert_eq!(g.d(0, 2), 2.0);
        assert_eq!(g.diameter(), 2.0);
        assert!(GroundMetric::weighted_line(&[1.0, 0.0]).is_err());
    }
}
