//! The multipolar inverse-square potential and its variants.
//!
//! The workhorse is the pairwise field
//!
//! ```text
//! V(x) = sum_{i<j} |a_i - a_j|^2 / (|x - a_i|^2 |x - a_j|^2)
//! ```
//!
//! which blows up like (n-1)/|x - a_i|^2 at each pole. A regularization
//! delta > 0 replaces every squared distance by |x - a_i|^2 + delta^2, which
//! keeps the pairwise product structure and decreases the field pointwise.

use thiserror::Error;

use crate::geometry::{Domain, PoleConfiguration};
use crate::util::{dist_sq, HALTON_BASES};

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("potential evaluated at (or too close to) pole {0} with delta = 0")]
    EvaluationAtPole(usize),
    #[error("sampling region contains no admissible points")]
    EmptyRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    /// Sum over pole pairs of |a_i - a_j|^2 / (|x-a_i|^2 |x-a_j|^2).
    PairwiseMultipolar,
    /// Exploratory variant: sum over poles of 1 / |x-a_i|^2. No optimal
    /// constants are claimed for it.
    SumInverseSquare,
    /// A single 1 / |x-a_i|^2 term.
    SingleInverseSquare(usize),
}

#[derive(Debug, Clone)]
pub struct PotentialField {
    kind: PotentialKind,
    config: PoleConfiguration,
    delta: f64,
}

impl PotentialField {
    pub fn new(kind: PotentialKind, config: PoleConfiguration, delta: f64) -> Self {
        assert!(delta >= 0.0, "regularization must be nonnegative");
        if let PotentialKind::SingleInverseSquare(i) = kind {
            assert!(i < config.len(), "pole index out of range");
        }
        PotentialField { kind, config, delta }
    }

    pub fn pairwise(config: PoleConfiguration) -> Self {
        Self::new(PotentialKind::PairwiseMultipolar, config, 0.0)
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn config(&self) -> &PoleConfiguration {
        &self.config
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self::new(self.kind, self.config.clone(), delta)
    }

    /// Field value at `x`. With delta = 0 evaluation within 1e-14 of the
    /// configuration scale of a pole is refused.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, PotentialError> {
        if self.delta == 0.0 {
            let guard = 1e-14 * self.config.max_separation();
            let guard_sq = guard * guard;
            for (i, a) in self.config.poles().iter().enumerate() {
                if dist_sq(x, a) <= guard_sq {
                    return Err(PotentialError::EvaluationAtPole(i));
                }
            }
        }
        Ok(self.evaluate_unchecked(x))
    }

    /// Same as [`evaluate`](Self::evaluate) but without the pole guard;
    /// returns `inf` exactly at a pole when delta = 0.
    pub fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        let d2 = self.delta * self.delta;
        let poles = self.config.poles();
        match self.kind {
            PotentialKind::PairwiseMultipolar => {
                let r2: Vec<f64> = poles.iter().map(|a| dist_sq(x, a) + d2).collect();
                let mut v = 0.0;
                for i in 0..poles.len() {
                    for j in (i + 1)..poles.len() {
                        v += dist_sq(&poles[i], &poles[j]) / (r2[i] * r2[j]);
                    }
                }
                v
            }
            PotentialKind::SumInverseSquare => poles
                .iter()
                .map(|a| 1.0 / (dist_sq(x, a) + d2))
                .sum(),
            PotentialKind::SingleInverseSquare(i) => 1.0 / (dist_sq(x, &poles[i]) + d2),
        }
    }

    /// Exact limit of V(x) |x - a_i|^2 as x approaches pole i.
    ///
    /// For the pairwise field every pair through pole i contributes
    /// |a_i - a_j|^2 / |a_i - a_j|^2 = 1, so the limit is n - 1,
    /// independent of the pole positions.
    pub fn local_limit(&self, i: usize) -> f64 {
        assert!(
            self.kind == PotentialKind::PairwiseMultipolar && self.delta == 0.0,
            "local_limit is defined for the exact pairwise field"
        );
        assert!(i < self.config.len());
        (self.config.len() - 1) as f64
    }
}

/// Subregion descriptor for infimum sampling.
#[derive(Debug, Clone)]
pub enum Region {
    /// Spherical shell `inner <= |x - center| <= outer`.
    Shell { center: Vec<f64>, inner: f64, outer: f64 },
    /// Closed ball around a point.
    Ball { center: Vec<f64>, radius: f64 },
    /// The whole domain.
    WholeDomain,
}

impl Region {
    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Shell { center, inner, outer } => {
                let d = dist_sq(x, center).sqrt();
                *inner <= d && d <= *outer
            }
            Region::Ball { center, radius } => dist_sq(x, center) <= radius * radius,
            Region::WholeDomain => true,
        }
    }

    fn sample_box(&self, domain: &Domain) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Shell { center, outer, .. } => (
                center.iter().map(|c| c - outer).collect(),
                center.iter().map(|c| c + outer).collect(),
            ),
            Region::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Region::WholeDomain => domain.bounding_box(8.0 * domain.scale()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InfimumEstimate {
    pub value: f64,
    pub minimizer: Vec<f64>,
    pub samples_used: usize,
}

/// Sampled lower estimate of `inf V` over a region intersected with the
/// domain, with the sample minimizer reported.
///
/// Low-discrepancy (Halton) candidates feed a shrinking pattern search.
/// Deterministic for a fixed seed.
pub fn infimum_over_region(
    field: &PotentialField,
    domain: &Domain,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<InfimumEstimate, PotentialError> {
    let eval = |x: &[f64]| field.evaluate_unchecked(x);
    infimum_of(&eval, field.config().dimension(), domain, region, samples, seed)
}

/// Generic sampled infimum of an arbitrary function; shared with the gap
/// bound machinery.
pub(crate) fn infimum_of(
    f: &dyn Fn(&[f64]) -> f64,
    dim: usize,
    domain: &Domain,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<InfimumEstimate, PotentialError> {
    let (lo, hi) = region.sample_box(domain);
    let admissible = |x: &[f64]| domain.contains(x) && region.contains(x);

    // the seed shifts the Halton stream start, keeping runs reproducible
    let offset = (crate::util::halton(1 + (seed % 1024), 2) * 1e6) as u64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut used = 0usize;
    let mut x = vec![0.0; dim];
    for k in 0..samples.max(16) as u64 {
        for (d, xd) in x.iter_mut().enumerate() {
            let u = crate::util::halton(k + 1 + offset, HALTON_BASES[d % HALTON_BASES.len()]);
            *xd = lo[d] + u * (hi[d] - lo[d]);
        }
        if !admissible(&x) {
            continue;
        }
        used += 1;
        let v = f(&x);
        if v.is_finite() && best.as_ref().map_or(true, |(b, _)| v < *b) {
            best = Some((v, x.clone()));
        }
    }
    let (mut best_v, mut best_x) = best.ok_or(PotentialError::EmptyRegion)?;

    // pattern-search polish with shrinking steps
    let span = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| h - l)
        .fold(0.0_f64, f64::max);
    let mut step = span / 16.0;
    let mut trial = best_x.clone();
    while step > 1e-10 * span {
        let mut improved = false;
        for d in 0..dim {
            for sgn in [-1.0, 1.0] {
                trial.copy_from_slice(&best_x);
                trial[d] += sgn * step;
                if admissible(&trial) {
                    let v = f(&trial);
                    if v.is_finite() && v < best_v {
                        best_v = v;
                        best_x.copy_from_slice(&trial);
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(InfimumEstimate {
        value: best_v,
        minimizer: best_x,
        samples_used: used,
    })
}
