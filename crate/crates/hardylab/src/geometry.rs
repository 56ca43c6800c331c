//! Domains and pole configurations.
//!
//! A [`Domain`] is one of a handful of geometric regions with exact
//! inside-tests and boundary distances; a [`PoleConfiguration`] is a set of
//! n >= 2 distinct singular points, placed either strictly inside the domain
//! or on its boundary, together with the metric quantities every other module
//! consumes: the minimal pairwise separation, the minimal distance from a
//! pole to the boundary, and the minimum of the two.

use thiserror::Error;

use crate::util::{dist, norm};

/// Relative tolerance used to decide whether a point lies *on* the boundary.
/// Scaled by the domain's natural length scale.
pub const BOUNDARY_TOL: f64 = 1e-9;

pub type Point = Vec<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point has dimension {got}, domain has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("pole list mixes interior and boundary points")]
    MixedPlacement,
    #[error("poles {0} and {1} coincide")]
    DuplicatePole(usize, usize),
    #[error("interior poles require dimension N >= 3, got N = {0}")]
    DimensionRestriction(usize),
    #[error("pole {0} lies outside the closed domain")]
    PoleOutsideDomain(usize),
    #[error("need at least two poles, got {0}")]
    TooFewPoles(usize),
}

/// Supported region kinds. Everything is immutable after construction and an
/// operation on it is pure.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Open ball of the given radius around `center`.
    Ball { center: Point, radius: f64 },
    /// Complement of a closed ball.
    ExteriorBall { center: Point, radius: f64 },
    /// `{ x : x[axis] > offset }`.
    HalfSpace { dim: usize, axis: usize, offset: f64 },
    /// Axis-aligned open box.
    Box { lower: Point, upper: Point },
    /// Interior of the ellipse x1^2/a^2 + x2^2/b^2 < 1, centered at the
    /// origin of the plane. Inside-test and boundary parametrization only.
    Ellipse2D { semi_x: f64, semi_y: f64 },
}

impl Domain {
    pub fn ball(center: Point, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::InvalidDomain("radius must be positive".into()));
        }
        if center.len() < 2 {
            return Err(GeometryError::InvalidDomain("dimension must be >= 2".into()));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn exterior_ball(center: Point, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::InvalidDomain("radius must be positive".into()));
        }
        if center.len() < 2 {
            return Err(GeometryError::InvalidDomain("dimension must be >= 2".into()));
        }
        Ok(Domain::ExteriorBall { center, radius })
    }

    pub fn half_space(dim: usize, axis: usize, offset: f64) -> Result<Self, GeometryError> {
        if dim < 2 || axis >= dim {
            return Err(GeometryError::InvalidDomain(format!(
                "half-space needs dim >= 2 and axis < dim, got dim={dim}, axis={axis}"
            )));
        }
        Ok(Domain::HalfSpace { dim, axis, offset })
    }

    pub fn axis_box(lower: Point, upper: Point) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() || lower.len() < 2 {
            return Err(GeometryError::InvalidDomain("box corners must share a dimension >= 2".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(GeometryError::InvalidDomain("box needs lower < upper componentwise".into()));
        }
        Ok(Domain::Box { lower, upper })
    }

    pub fn ellipse(semi_x: f64, semi_y: f64) -> Result<Self, GeometryError> {
        if !(semi_x > 0.0 && semi_y > 0.0) {
            return Err(GeometryError::InvalidDomain("semi-axes must be positive".into()));
        }
        Ok(Domain::Ellipse2D { semi_x, semi_y })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Ball { center, .. } | Domain::ExteriorBall { center, .. } => center.len(),
            Domain::HalfSpace { dim, .. } => *dim,
            Domain::Box { lower, .. } => lower.len(),
            Domain::Ellipse2D { .. } => 2,
        }
    }

    /// Natural length scale; all boundary tolerances are relative to this.
    pub fn scale(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } | Domain::ExteriorBall { radius, .. } => *radius,
            Domain::HalfSpace { offset, .. } => offset.abs().max(1.0),
            Domain::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| u - l)
                .fold(0.0_f64, f64::max),
            Domain::Ellipse2D { semi_x, semi_y } => semi_x.max(*semi_y),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Domain::Ball { .. } | Domain::Box { .. } | Domain::Ellipse2D { .. })
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.dimension() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// True iff `x` is strictly interior.
    pub fn inside(&self, x: &[f64]) -> Result<bool, GeometryError> {
        self.check_dim(x)?;
        Ok(self.contains(x))
    }

    /// Unchecked inside-test for hot paths; the caller guarantees dimensions.
    pub(crate) fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Ball { center, radius } => dist(x, center) < *radius,
            Domain::ExteriorBall { center, radius } => dist(x, center) > *radius,
            Domain::HalfSpace { axis, offset, .. } => x[*axis] > *offset,
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(xi, (l, u))| *l < *xi && *xi < *u),
            Domain::Ellipse2D { semi_x, semi_y } => {
                let q = x[0] * x[0] / (semi_x * semi_x) + x[1] * x[1] / (semi_y * semi_y);
                q < 1.0
            }
        }
    }

    /// Distance from an interior point to the boundary; zero on the boundary,
    /// negative outside (so it doubles as a signed membership test).
    pub fn boundary_distance(&self, x: &[f64]) -> Result<f64, GeometryError> {
        self.check_dim(x)?;
        Ok(self.signed_boundary_distance(x))
    }

    pub(crate) fn signed_boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Ball { center, radius } => radius - dist(x, center),
            Domain::ExteriorBall { center, radius } => dist(x, center) - radius,
            Domain::HalfSpace { axis, offset, .. } => x[*axis] - offset,
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(xi, (l, u))| (xi - l).min(u - xi))
                .fold(f64::INFINITY, f64::min),
            Domain::Ellipse2D { semi_x, semi_y } => {
                let d = ellipse_boundary_distance(*semi_x, *semi_y, x);
                let q = x[0] * x[0] / (semi_x * semi_x) + x[1] * x[1] / (semi_y * semi_y);
                if q <= 1.0 {
                    d
                } else {
                    -d
                }
            }
        }
    }

    /// Point `(a cos t, b sin t)` on the ellipse boundary. Panics for other
    /// domain kinds.
    pub fn ellipse_boundary_point(&self, t: f64) -> Point {
        match self {
            Domain::Ellipse2D { semi_x, semi_y } => vec![semi_x * t.cos(), semi_y * t.sin()],
            _ => panic!("ellipse_boundary_point is only defined for Ellipse2D"),
        }
    }

    pub(crate) fn on_boundary(&self, x: &[f64]) -> bool {
        self.signed_boundary_distance(x).abs() <= BOUNDARY_TOL * self.scale()
    }

    /// Axis-aligned bounding box, clipped to `extent` around `focus` for
    /// unbounded domains.
    pub(crate) fn bounding_box(&self, extent: f64) -> (Point, Point) {
        match self {
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Domain::Box { lower, upper } => (lower.clone(), upper.clone()),
            Domain::Ellipse2D { semi_x, semi_y } => {
                (vec![-semi_x, -semi_y], vec![*semi_x, *semi_y])
            }
            Domain::ExteriorBall { center, .. } => (
                center.iter().map(|c| c - extent).collect(),
                center.iter().map(|c| c + extent).collect(),
            ),
            Domain::HalfSpace { dim, axis, offset } => {
                let mut lower = vec![-extent; *dim];
                let mut upper = vec![extent; *dim];
                lower[*axis] = *offset;
                upper[*axis] = offset + extent;
                (lower, upper)
            }
        }
    }
}

/// Nearest-distance from `x` to the ellipse boundary, by parametric sampling
/// refined with a few Newton steps. Good to ~1e-12 at desk scale.
fn ellipse_boundary_distance(a: f64, b: f64, x: &[f64]) -> f64 {
    let f = |t: f64| {
        let dx = x[0] - a * t.cos();
        let dy = x[1] - b * t.sin();
        dx * dx + dy * dy
    };
    let mut best_t = 0.0;
    let mut best = f64::INFINITY;
    let m = 256;
    for k in 0..m {
        let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
        let v = f(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    // golden-section polish around the best sample
    let (mut lo, mut hi) = (
        best_t - 2.0 * std::f64::consts::PI / m as f64,
        best_t + 2.0 * std::f64::consts::PI / m as f64,
    );
    for _ in 0..80 {
        let m1 = lo + 0.382 * (hi - lo);
        let m2 = lo + 0.618 * (hi - lo);
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.5 * (lo + hi)).sqrt()
}

/// Whether all poles sit inside the domain or all on its boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Interior,
    Boundary,
}

/// An ordered list of distinct singular points plus derived metric data.
#[derive(Debug, Clone)]
pub struct PoleConfiguration {
    poles: Vec<Point>,
    placement: Placement,
    dim: usize,
    min_separation: f64,
    min_boundary_distance: f64,
}

impl PoleConfiguration {
    pub fn poles(&self) -> &[Point] {
        &self.poles
    }

    pub fn pole(&self, i: usize) -> &[f64] {
        &self.poles[i]
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Smallest pairwise distance between poles.
    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    /// Smallest distance from a pole to the boundary (zero for boundary
    /// placement).
    pub fn min_boundary_distance(&self) -> f64 {
        self.min_boundary_distance
    }

    /// min(separation, boundary distance); the safe radius for disjoint
    /// pole neighborhoods.
    pub fn min_scale(&self) -> f64 {
        self.min_separation.min(self.min_boundary_distance)
    }

    /// Largest pairwise distance; the configuration's own length scale.
    pub fn max_separation(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.poles.len() {
            for j in (i + 1)..self.poles.len() {
                m = m.max(dist(&self.poles[i], &self.poles[j]));
            }
        }
        m
    }
}

/// Classifies a pole list against a domain and computes the derived metrics.
///
/// All poles must be pairwise distinct and either all strictly interior
/// (which additionally requires N >= 3) or all on the boundary within
/// tolerance. Mixed configurations are rejected.
pub fn pole_metrics(domain: &Domain, poles: &[Point]) -> Result<PoleConfiguration, GeometryError> {
    if poles.len() < 2 {
        return Err(GeometryError::TooFewPoles(poles.len()));
    }
    let dim = domain.dimension();
    for p in poles {
        if p.len() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }
    let scale = domain.scale();
    for i in 0..poles.len() {
        for j in (i + 1)..poles.len() {
            if dist(&poles[i], &poles[j]) <= BOUNDARY_TOL * scale {
                return Err(GeometryError::DuplicatePole(i, j));
            }
        }
    }

    let mut n_interior = 0;
    let mut n_boundary = 0;
    for (i, p) in poles.iter().enumerate() {
        if domain.on_boundary(p) {
            n_boundary += 1;
        } else if domain.contains(p) {
            n_interior += 1;
        } else {
            return Err(GeometryError::PoleOutsideDomain(i));
        }
    }
    let placement = match (n_interior, n_boundary) {
        (_, 0) => Placement::Interior,
        (0, _) => Placement::Boundary,
        _ => return Err(GeometryError::MixedPlacement),
    };
    if placement == Placement::Interior && dim < 3 {
        return Err(GeometryError::DimensionRestriction(dim));
    }

    let mut min_sep = f64::INFINITY;
    for i in 0..poles.len() {
        for j in (i + 1)..poles.len() {
            min_sep = min_sep.min(dist(&poles[i], &poles[j]));
        }
    }
    let min_bd = match placement {
        Placement::Boundary => 0.0,
        Placement::Interior => poles
            .iter()
            .map(|p| domain.signed_boundary_distance(p))
            .fold(f64::INFINITY, f64::min),
    };

    Ok(PoleConfiguration {
        poles: poles.to_vec(),
        placement,
        dim,
        min_separation: min_sep,
        min_boundary_distance: min_bd,
    })
}

/// Vertices of a regular (n-1)-simplex with the given circumradius, centered
/// at `center`, embedded in the first n-1 coordinate directions.
pub fn simplex_vertices(dim: usize, n: usize, center: &[f64], circumradius: f64) -> Vec<Point> {
    assert!(n >= 2 && n <= dim + 1, "a regular simplex with {n} vertices needs dimension >= {}", n - 1);
    assert_eq!(center.len(), dim);
    // Start from the standard basis of R^n shifted to zero mean, which gives
    // n points with circumradius sqrt(1 - 1/n) in the hyperplane sum(x) = 0,
    // then express them in an orthonormal basis of that hyperplane.
    let mut raw: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut v = vec![-1.0 / n as f64; n];
            v[i] += 1.0;
            v
        })
        .collect();
    // Gram-Schmidt an orthonormal basis of span(raw) (dimension n-1).
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in &raw {
        let mut w = v.clone();
        for b in &basis {
            let c = crate::util::dot(&w, b);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= c * bi;
            }
        }
        let nw = norm(&w);
        if nw > 1e-12 {
            for wi in &mut w {
                *wi /= nw;
            }
            basis.push(w);
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    let r0 = (1.0 - 1.0 / n as f64).sqrt();
    for v in &mut raw {
        let coords: Vec<f64> = basis.iter().map(|b| crate::util::dot(v, b)).collect();
        *v = coords;
    }
    raw.into_iter()
        .map(|coords| {
            let mut p = center.to_vec();
            for (k, c) in coords.iter().enumerate() {
                p[k] += circumradius * c / r0;
            }
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_ball(dim: usize) -> Domain {
        Domain::ball(vec![0.0; dim], 1.0).unwrap()
    }

    #[test]
    fn inside_basic_cases() {
        let b = unit_ball(3);
        assert!(b.inside(&[0.0, 0.0, 0.0]).unwrap());
        let hs = Domain::half_space(3, 2, 0.0).unwrap();
        assert!(!hs.inside(&[0.0, 0.0, -1.0]).unwrap());
        let eb = Domain::exterior_ball(vec![0.0; 3], 1.0).unwrap();
        assert!(eb.inside(&[2.0, 0.0, 0.0]).unwrap());
    }

    #[test]
    fn inside_rejects_dimension_mismatch() {
        let b = unit_ball(3);
        assert_eq!(
            b.inside(&[0.0, 0.0]),
            Err(GeometryError::DimensionMismatch { expected: 3, got: 2 })
        );
    }

    #[test]
    fn boundary_distance_closed_forms() {
        let b = unit_ball(3);
        assert_relative_eq!(b.boundary_distance(&[0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_relative_eq!(b.boundary_distance(&[0.5, 0.0, 0.0]).unwrap(), 0.5);
        let hs = Domain::half_space(2, 1, 0.0).unwrap();
        assert_relative_eq!(hs.boundary_distance(&[3.0, 0.25]).unwrap(), 0.25);
        let bx = Domain::axis_box(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        assert_relative_eq!(bx.boundary_distance(&[0.5, 0.5]).unwrap(), 0.5);
        assert_relative_eq!(bx.boundary_distance(&[0.1, 0.5]).unwrap(), 0.1);
    }

    #[test]
    fn ellipse_inside_and_boundary() {
        let e = Domain::ellipse(2.0, 1.0).unwrap();
        assert!(e.inside(&[0.0, 0.0]).unwrap());
        assert!(!e.inside(&[2.5, 0.0]).unwrap());
        let p = e.ellipse_boundary_point(0.7);
        assert!(e.on_boundary(&p));
        // distance from center to the nearest boundary point is the minor axis
        assert_relative_eq!(e.boundary_distance(&[0.0, 0.0]).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn pole_metrics_interior_bipolar() {
        let b = unit_ball(3);
        let cfg = pole_metrics(&b, &[vec![-0.5, 0.0, 0.0], vec![0.5, 0.0, 0.0]]).unwrap();
        assert_eq!(cfg.placement(), Placement::Interior);
        assert_relative_eq!(cfg.min_separation(), 1.0);
        assert_relative_eq!(cfg.min_boundary_distance(), 0.5);
        assert_relative_eq!(cfg.min_scale(), 0.5);
    }

    #[test]
    fn pole_metrics_boundary_antipodal_disc() {
        let d = unit_ball(2);
        let cfg = pole_metrics(&d, &[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(cfg.placement(), Placement::Boundary);
        assert_relative_eq!(cfg.min_separation(), 2.0);
    }

    #[test]
    fn pole_metrics_rejects_mixed_and_duplicates_and_low_dim() {
        let d = unit_ball(2);
        assert_eq!(
            pole_metrics(&d, &[vec![0.0, 0.0], vec![1.0, 0.0]]),
            Err(GeometryError::MixedPlacement)
        );
        let b = unit_ball(3);
        assert_eq!(
            pole_metrics(&b, &[vec![0.1, 0.0, 0.0], vec![0.1, 0.0, 0.0]]),
            Err(GeometryError::DuplicatePole(0, 1))
        );
        // interior poles in the plane are rejected
        assert_eq!(
            pole_metrics(&d, &[vec![0.3, 0.0], vec![-0.3, 0.0]]),
            Err(GeometryError::DimensionRestriction(2))
        );
    }

    #[test]
    fn simplex_vertices_are_equidistant() {
        let vs = simplex_vertices(3, 4, &[0.0; 3], 0.5);
        assert_eq!(vs.len(), 4);
        for v in &vs {
            assert_relative_eq!(norm(v), 0.5, epsilon = 1e-12);
        }
        let d01 = dist(&vs[0], &vs[1]);
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert_relative_eq!(dist(&vs[i], &vs[j]), d01, epsilon = 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn ball_distance_identity(x in prop::collection::vec(-0.99..0.99f64, 3)) {
            let b = unit_ball(3);
            prop_assume!(norm(&x) < 1.0);
            // rho(x) + |x - x0| = r exactly, up to rounding
            let rho = b.boundary_distance(&x).unwrap();
            prop_assert!((rho + norm(&x) - 1.0).abs() < 1e-14);
        }

        #[test]
        fn pole_metrics_permutation_invariant(seed in 0u64..500) {
            let b = unit_ball(3);
            let p1 = vec![0.3 + (seed as f64 * 1e-4), 0.1, 0.0];
            let p2 = vec![-0.4, 0.2, 0.1];
            let p3 = vec![0.0, -0.5, 0.2];
            let a = pole_metrics(&b, &[p1.clone(), p2.clone(), p3.clone()]).unwrap();
            let c = pole_metrics(&b, &[p3, p1, p2]).unwrap();
            prop_assert!((a.min_separation() - c.min_separation()).abs() < 1e-15);
            prop_assert!((a.min_boundary_distance() - c.min_boundary_distance()).abs() < 1e-15);
            prop_assert!((a.min_scale() - c.min_scale()).abs() < 1e-15);
        }
    }
}
