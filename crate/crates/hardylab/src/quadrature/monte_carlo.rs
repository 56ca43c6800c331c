//! Importance-sampled Monte Carlo integration, the independent oracle for
//! the deterministic engine.
//!
//! The sampling density is a mixture of a uniform component on the domain's
//! bounding box and one power-law radial component per declared singularity,
//! with the radial exponent matched to the declared integrand exponent. The
//! estimator is unbiased for the (truncated, on unbounded domains) integral;
//! the reported error is a 95% confidence half-width.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Integrand, Method, QuadratureError, QuadratureResult, QuadratureSpec};
use crate::geometry::Domain;
use crate::util::{dist, unit_sphere_area};

struct PoleComponent {
    center: Vec<f64>,
    radius: f64,
    /// radial sampling density is proportional to r^(beta + N - 1)
    beta: f64,
    norm: f64,
}

pub fn monte_carlo_oracle(
    integrand: &Integrand,
    domain: &Domain,
    spec: &QuadratureSpec,
    samples: usize,
) -> Result<QuadratureResult, QuadratureError> {
    let dim = domain.dimension();
    if dim != integrand.dim {
        return Err(QuadratureError::UnsupportedRegion(
            "integrand/domain dimension mismatch".into(),
        ));
    }
    let extent = if domain.is_bounded() {
        domain.scale() * 2.0
    } else {
        spec.truncation_radius
    };
    let (lo, hi) = domain.bounding_box(extent);
    let vol_box: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let omega = unit_sphere_area(dim);

    // one power-law component per singular point, capped at half the distance
    // to the nearest other pole so the components don't fight each other
    let mut components: Vec<PoleComponent> = Vec::new();
    for (i, (pole, alpha)) in integrand.singularities.iter().enumerate() {
        let beta = *alpha;
        let p = beta + dim as f64;
        if p <= 0.0 {
            // only legal when the support avoids the pole; then uniform
            // sampling covers what's left
            if integrand.support.hole_radius_at(pole).unwrap_or(0.0) > 0.0 {
                continue;
            }
            return Err(QuadratureError::DegenerateImportanceDensity(format!(
                "exponent {beta} at pole {i} cannot be importance-sampled in dimension {dim}"
            )));
        }
        let mut radius = domain.scale();
        for (j, (other, _)) in integrand.singularities.iter().enumerate() {
            if i != j {
                radius = radius.min(0.5 * dist(pole, other));
            }
        }
        let norm = p / (omega * radius.powf(p));
        components.push(PoleComponent {
            center: pole.clone(),
            radius,
            beta,
            norm,
        });
    }

    let w_uniform = if components.is_empty() { 1.0 } else { 0.5 };
    let w_pole = if components.is_empty() {
        0.0
    } else {
        0.5 / components.len() as f64
    };

    let pdf = |x: &[f64]| -> f64 {
        let mut p = 0.0;
        let in_box = x.iter().zip(lo.iter().zip(&hi)).all(|(xi, (a, b))| xi >= a && xi <= b);
        if in_box {
            p += w_uniform / vol_box;
        }
        for c in &components {
            let r = dist(x, &c.center);
            if r <= c.radius && r > 0.0 {
                p += w_pole * c.norm * r.powf(c.beta);
            }
        }
        p
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let n = samples.max(16);
    let mut x = vec![0.0; dim];
    for _ in 0..n {
        // pick a mixture component
        let u: f64 = rng.random();
        if u < w_uniform || components.is_empty() {
            for (d, xd) in x.iter_mut().enumerate() {
                *xd = lo[d] + rng.random_range(0.0..1.0) * (hi[d] - lo[d]);
            }
        } else {
            let k = ((u - w_uniform) / w_pole) as usize;
            let c = &components[k.min(components.len() - 1)];
            let p = c.beta + dim as f64;
            let r = c.radius * rng.random_range(0.0_f64..1.0).powf(1.0 / p);
            // uniform direction via normalized Gaussians
            let mut norm_sq = 0.0;
            for xd in x.iter_mut() {
                // Box-Muller
                let (u1, u2): (f64, f64) = (rng.random_range(1e-12..1.0), rng.random());
                *xd = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                norm_sq += *xd * *xd;
            }
            let scale = r / norm_sq.sqrt().max(1e-300);
            for (xd, cd) in x.iter_mut().zip(&c.center) {
                *xd = cd + *xd * scale;
            }
        }
        let density = pdf(&x);
        if density <= 0.0 {
            continue;
        }
        let mut val = 0.0;
        if domain.contains(&x) {
            let fx = integrand.eval(&x);
            if fx.is_finite() {
                val = fx / density;
            }
        }
        sum += val;
        sum_sq += val * val;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0) / (n as f64 - 1.0).max(1.0) * n as f64;
    let half_width = 1.96 * (var / n as f64).sqrt();
    Ok(QuadratureResult {
        value: mean,
        error: half_width,
        cells: n,
        method: Method::MonteCarlo,
        tail_bound: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn disc_area() {
        let disc = Domain::ball(vec![0.0; 2], 1.0).unwrap();
        let f = Integrand::new(2, |_| 1.0);
        let spec = QuadratureSpec::default().with_seed(42);
        let r = monte_carlo_oracle(&f, &disc, &spec, 200_000).unwrap();
        assert!(
            (r.value - std::f64::consts::PI).abs() <= 3.0 * r.error,
            "{} vs pi, ci {}",
            r.value,
            r.error
        );
        assert_relative_eq!(r.value, std::f64::consts::PI, max_relative = 0.02);
    }

    #[test]
    fn singular_radial_integral_in_plane() {
        // int over unit disc of |x|^-1 = 2 pi
        let disc = Domain::ball(vec![0.0; 2], 1.0).unwrap();
        let f = Integrand::new(2, |x| 1.0 / crate::util::norm(x))
            .with_singularities(vec![(vec![0.0; 2], -1.0)]);
        let spec = QuadratureSpec::default().with_seed(7);
        let r = monte_carlo_oracle(&f, &disc, &spec, 200_000).unwrap();
        assert!(
            (r.value - 2.0 * std::f64::consts::PI).abs() <= 3.0 * r.error,
            "{} vs 2pi, ci {}",
            r.value,
            r.error
        );
    }

    #[test]
    fn agrees_with_deterministic_engine_on_potential() {
        // V over the disc minus the eps-balls, antipodal poles
        let disc = Domain::ball(vec![0.0; 2], 1.0).unwrap();
        let cfg = crate::geometry::pole_metrics(&disc, &[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let v = crate::potential::PotentialField::pairwise(cfg);
        let eps = 0.05;
        let poles = [vec![1.0, 0.0], vec![-1.0, 0.0]];
        let support = crate::trialfn::Support {
            within: None,
            zero_on: poles.iter().map(|p| (p.clone(), eps)).collect(),
        };
        let vf = v.clone();
        let integrand = Integrand::new(2, move |x| {
            if poles.iter().any(|p| dist(x, p) < eps) {
                0.0
            } else {
                vf.evaluate_unchecked(x)
            }
        })
        .with_singularities(vec![(vec![1.0, 0.0], -2.0), (vec![-1.0, 0.0], -2.0)])
        .with_support(support);
        let spec = QuadratureSpec::default().with_seed(3).with_rel_tol(1e-7);
        let det = super::super::integrate(&integrand, &disc, &spec).unwrap();
        let mc = monte_carlo_oracle(&integrand, &disc, &spec, 400_000).unwrap();
        assert!(
            (det.value - mc.value).abs() <= det.error + mc.error,
            "det {} +/- {} vs mc {} +/- {}",
            det.value,
            det.error,
            mc.value,
            mc.error
        );
    }
}
