//! Log-profile cutoff functions and the minimizing sequences built from them.
//!
//! All cutoffs take values in [0, 1], vanish on the balls of radius eps^2
//! around the poles, and ramp logarithmically. Gradients on the interface
//! spheres take the inward-piece one-sided value; the interfaces have measure
//! zero so quadrature never sees the choice.

use crate::geometry::{Domain, Placement, PoleConfiguration};
use crate::trialfn::scalar_field::{FieldBuilder, ScalarField, Singularity, Support};
use crate::trialfn::TrialFnError;
use crate::util::dist;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffVariant {
    /// Up-down log profile on eps^2 <= |x-a_i| <= sqrt(eps) around interior
    /// poles; zero elsewhere.
    InteriorBipolar,
    /// Log ramp from 0 to 1 on eps^2 <= |x-a_i| <= eps around boundary poles
    /// of a ball; 1 elsewhere.
    BoundaryBall,
    /// Same near-pole ramps plus a far-field log taper that kills the
    /// function between 1/eps and 1/eps^2 from the reference center.
    ExteriorOrHalfSpace,
}

/// Piecewise-log cutoff around the poles.
pub fn cutoff(
    domain: &Domain,
    config: &PoleConfiguration,
    eps: f64,
    variant: CutoffVariant,
) -> Result<ScalarField, TrialFnError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(TrialFnError::EpsTooLarge {
            eps,
            limit: 1.0,
            reason: "eps must lie in (0, 1)".into(),
        });
    }
    let dim = config.dimension();
    let poles: Vec<Vec<f64>> = config.poles().to_vec();
    let log_inv_eps = -eps.ln();

    match variant {
        CutoffVariant::InteriorBipolar => {
            let limit = (config.min_scale() * config.min_scale() / 4.0).min(1.0);
            if eps >= limit {
                return Err(TrialFnError::EpsTooLarge {
                    eps,
                    limit,
                    reason: "interior cutoff needs eps < min(1, M^2/4)".into(),
                });
            }
            let outer = eps.sqrt();
            let inner = eps * eps;
            let p_eval = poles.clone();
            let p_grad = poles.clone();
            let mid = eps;
            let support = Support {
                within: Some(poles.iter().map(|a| (a.clone(), outer)).collect()),
                zero_on: poles.iter().map(|a| (a.clone(), inner)).collect(),
            };
            Ok(FieldBuilder::new(dim, move |x| {
                for a in &p_eval {
                    let s = dist(x, a);
                    if s <= outer {
                        return if s <= inner {
                            0.0
                        } else if s <= mid {
                            (s / inner).ln() / log_inv_eps
                        } else {
                            2.0 * (outer / s).ln() / log_inv_eps
                        };
                    }
                }
                0.0
            })
            .scale(eps)
            .gradient(move |x, out| {
                out.fill(0.0);
                for a in &p_grad {
                    let s = dist(x, a);
                    if s <= outer && s > inner {
                        let c = if s <= mid {
                            1.0 / (log_inv_eps * s * s)
                        } else {
                            -2.0 / (log_inv_eps * s * s)
                        };
                        for (o, (xi, ai)) in out.iter_mut().zip(x.iter().zip(a)) {
                            *o = c * (xi - ai);
                        }
                        return;
                    }
                }
            })
            .support(support)
            .build())
        }
        CutoffVariant::BoundaryBall => {
            let limit = (config.min_separation() / 2.0).min(1.0);
            if eps >= limit {
                return Err(TrialFnError::EpsTooLarge {
                    eps,
                    limit,
                    reason: "boundary cutoff needs eps < min(1, d/2)".into(),
                });
            }
            let inner = eps * eps;
            let p_eval = poles.clone();
            let p_grad = poles.clone();
            let support = Support {
                within: None,
                zero_on: poles.iter().map(|a| (a.clone(), inner)).collect(),
            };
            Ok(FieldBuilder::new(dim, move |x| {
                for a in &p_eval {
                    let s = dist(x, a);
                    if s <= eps {
                        return if s <= inner {
                            0.0
                        } else {
                            (s / inner).ln() / log_inv_eps
                        };
                    }
                }
                1.0
            })
            .scale(eps)
            .gradient(move |x, out| {
                out.fill(0.0);
                for a in &p_grad {
                    let s = dist(x, a);
                    if s <= eps && s > inner {
                        let c = 1.0 / (log_inv_eps * s * s);
                        for (o, (xi, ai)) in out.iter_mut().zip(x.iter().zip(a)) {
                            *o = c * (xi - ai);
                        }
                        return;
                    }
                }
            })
            .support(support)
            .build())
        }
        CutoffVariant::ExteriorOrHalfSpace => {
            // reference center: ball center for the exterior, the boundary
            // projection of the origin for a half-space
            let center = match domain {
                Domain::ExteriorBall { center, .. } => center.clone(),
                Domain::HalfSpace { dim, axis, offset } => {
                    let mut c = vec![0.0; *dim];
                    c[*axis] = *offset;
                    c
                }
                _ => {
                    return Err(TrialFnError::UnsupportedDomain(
                        "far-field cutoff needs an exterior ball or half-space".into(),
                    ))
                }
            };
            let limit = (config.min_separation() / 2.0).min(1.0);
            if eps >= limit {
                return Err(TrialFnError::EpsTooLarge {
                    eps,
                    limit,
                    reason: "cutoff needs eps < min(1, d/2)".into(),
                });
            }
            // poles (plus their eps-balls) must sit well inside the plateau ball
            let farthest = poles.iter().map(|a| dist(a, &center)).fold(0.0, f64::max);
            if farthest + eps > 0.5 / eps {
                return Err(TrialFnError::EpsTooLarge {
                    eps,
                    limit: 0.5 / (farthest + eps),
                    reason: "poles must lie within half the plateau radius".into(),
                });
            }
            let inner = eps * eps;
            let taper_lo = 1.0 / eps;
            let taper_hi = 1.0 / (eps * eps);
            let p_eval = poles.clone();
            let p_grad = poles.clone();
            let c_eval = center.clone();
            let c_grad = center.clone();
            let support = Support {
                within: Some(vec![(center.clone(), taper_hi)]),
                zero_on: poles.iter().map(|a| (a.clone(), inner)).collect(),
            };
            Ok(FieldBuilder::new(dim, move |x| {
                for a in &p_eval {
                    let s = dist(x, a);
                    if s <= eps {
                        return if s <= inner {
                            0.0
                        } else {
                            (s / inner).ln() / log_inv_eps
                        };
                    }
                }
                let rho = dist(x, &c_eval);
                if rho <= taper_lo {
                    1.0
                } else if rho < taper_hi {
                    (1.0 / (inner * rho)).ln() / log_inv_eps
                } else {
                    0.0
                }
            })
            .scale(eps)
            .gradient(move |x, out| {
                out.fill(0.0);
                for a in &p_grad {
                    let s = dist(x, a);
                    if s <= eps {
                        if s > inner {
                            let c = 1.0 / (log_inv_eps * s * s);
                            for (o, (xi, ai)) in out.iter_mut().zip(x.iter().zip(a)) {
                                *o = c * (xi - ai);
                            }
                        }
                        return;
                    }
                }
                let rho = dist(x, &c_grad);
                if rho > taper_lo && rho < taper_hi {
                    let c = -1.0 / (log_inv_eps * rho * rho);
                    for (o, (xi, ci)) in out.iter_mut().zip(x.iter().zip(&c_grad)) {
                        *o = c * (xi - ci);
                    }
                }
            })
            .support(support)
            .build())
        }
    }
}

/// One element of the minimizing sequence for the configuration's optimal
/// Hardy constant: the cutoff times the appropriate singular product
/// (and, for boundary poles, the domain weight).
pub fn minimizing_sequence_element(
    domain: &Domain,
    config: &PoleConfiguration,
    eps: f64,
) -> Result<ScalarField, TrialFnError> {
    let n = config.len() as f64;
    let dim = config.dimension() as f64;
    match config.placement() {
        Placement::Interior => {
            let theta = cutoff(domain, config, eps, CutoffVariant::InteriorBipolar)?;
            let exponent = -(dim - 2.0) / n;
            let mut factors = vec![theta];
            for a in config.poles() {
                factors.push(ScalarField::distance_power(a.clone(), exponent));
            }
            let field = ScalarField::product(factors);
            // near each pole the cutoff vanishes identically; the declared
            // exponents describe the ramp region where the product behaves
            // like the singular factor alone
            Ok(override_singularities(
                field,
                config,
                exponent,
                exponent - 1.0,
            ))
        }
        Placement::Boundary => {
            let variant = match domain {
                Domain::Ball { .. } => CutoffVariant::BoundaryBall,
                Domain::ExteriorBall { .. } | Domain::HalfSpace { .. } => {
                    CutoffVariant::ExteriorOrHalfSpace
                }
                _ => {
                    return Err(TrialFnError::UnsupportedDomain(
                        "minimizing sequences cover balls, exterior balls and half-spaces".into(),
                    ))
                }
            };
            let theta = cutoff(domain, config, eps, variant)?;
            let weight = crate::trialfn::boundary_weight(domain)?;
            let exponent = -dim / n;
            let mut factors = vec![theta, weight.field().clone()];
            for a in config.poles() {
                factors.push(ScalarField::distance_power(a.clone(), exponent));
            }
            let field = ScalarField::product(factors);
            // the boundary weight vanishes linearly at each pole, lifting the
            // value exponent by one
            Ok(override_singularities(
                field,
                config,
                exponent + 1.0,
                exponent,
            ))
        }
    }
}

fn override_singularities(
    field: ScalarField,
    config: &PoleConfiguration,
    value_exponent: f64,
    gradient_exponent: f64,
) -> ScalarField {
    let singularities: Vec<Singularity> = config
        .poles()
        .iter()
        .map(|a| Singularity {
            at: a.clone(),
            value_exponent,
            gradient_exponent,
        })
        .collect();
    let support = field.support().clone();
    let f_eval = field.clone();
    let f_grad = field.clone();
    FieldBuilder::new(field.dim(), move |x| f_eval.value(x))
        .scale(field.length_scale())
        .gradient(move |x, out| f_grad.gradient(x, out))
        .singularities(singularities)
        .support(support)
        .tail_exponent(field.tail_exponent())
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pole_metrics;
    use crate::util::norm;
    use approx::assert_relative_eq;

    fn interior_cfg() -> (Domain, PoleConfiguration) {
        let ball = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        let cfg = pole_metrics(&ball, &[vec![-0.5, 0.0, 0.0], vec![0.5, 0.0, 0.0]]).unwrap();
        (ball, cfg)
    }

    fn boundary_disc_cfg() -> (Domain, PoleConfiguration) {
        let disc = Domain::ball(vec![0.0; 2], 1.0).unwrap();
        let cfg = pole_metrics(&disc, &[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        (disc, cfg)
    }

    #[test]
    fn interior_profile_values() {
        let (ball, cfg) = interior_cfg();
        let eps = 1e-3;
        let theta = cutoff(&ball, &cfg, eps, CutoffVariant::InteriorBipolar).unwrap();
        // at |x-a1| = eps^1.5 the up-ramp reads 0.5
        let x = [-0.5 + eps.powf(1.5), 0.0, 0.0];
        assert_relative_eq!(theta.value(&x), 0.5, epsilon = 1e-12);
        // ramp endpoints
        assert_relative_eq!(theta.value(&[-0.5 + eps, 0.0, 0.0]), 1.0, epsilon = 1e-12);
        assert_relative_eq!(theta.value(&[-0.5 + eps * eps, 0.0, 0.0]), 0.0, epsilon = 1e-12);
        assert_relative_eq!(theta.value(&[-0.5 + eps.sqrt(), 0.0, 0.0]), 0.0, epsilon = 1e-12);
        // and zero away from the poles
        assert_eq!(theta.value(&[0.0, 0.3, 0.0]), 0.0);
    }

    #[test]
    fn boundary_ramp_endpoints() {
        let (disc, cfg) = boundary_disc_cfg();
        let eps = 1e-2;
        let theta = cutoff(&disc, &cfg, eps, CutoffVariant::BoundaryBall).unwrap();
        assert_relative_eq!(theta.value(&[1.0 - eps * eps, 0.0]), 0.0, epsilon = 1e-12);
        assert_relative_eq!(theta.value(&[1.0 - eps, 0.0]), 1.0, epsilon = 1e-12);
        assert_eq!(theta.value(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn far_field_taper_midpoint() {
        let hs = Domain::half_space(2, 1, 0.0).unwrap();
        let cfg = pole_metrics(&hs, &[vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let eps = 1e-2;
        let theta = cutoff(&hs, &cfg, eps, CutoffVariant::ExteriorOrHalfSpace).unwrap();
        // |x| = eps^{-1.5} sits halfway down the far taper
        let rho = eps.powf(-1.5);
        assert_relative_eq!(theta.value(&[0.0, rho]), 0.5, epsilon = 1e-12);
        assert_relative_eq!(theta.value(&[0.0, 1.0 / eps]), 1.0, epsilon = 1e-12);
        assert_eq!(theta.value(&[0.0, 1.0 / (eps * eps) + 1.0]), 0.0);
    }

    #[test]
    fn eps_too_large_is_rejected() {
        let (ball, cfg) = interior_cfg();
        // M = 0.5, so the interior variant needs eps < 1/16
        assert!(matches!(
            cutoff(&ball, &cfg, 0.1, CutoffVariant::InteriorBipolar),
            Err(TrialFnError::EpsTooLarge { .. })
        ));
        let (disc, bcfg) = boundary_disc_cfg();
        assert!(cutoff(&disc, &bcfg, 0.9, CutoffVariant::BoundaryBall).is_err());
    }

    #[test]
    fn sandwich_and_interface_continuity() {
        let (ball, cfg) = interior_cfg();
        let eps = 1e-2;
        let theta = cutoff(&ball, &cfg, eps, CutoffVariant::InteriorBipolar).unwrap();
        // probe across every interface radius along a fixed direction
        let dir = [0.6, 0.64, 0.48];
        for r in [eps * eps, eps, eps.sqrt()] {
            for sgn in [-1.0, 1.0] {
                let s = r * (1.0 + sgn * 1e-13);
                let x: Vec<f64> = [-0.5, 0.0, 0.0]
                    .iter()
                    .zip(&dir)
                    .map(|(a, d)| a + s * d)
                    .collect();
                let inner_val = {
                    let xi: Vec<f64> = [-0.5, 0.0, 0.0]
                        .iter()
                        .zip(&dir)
                        .map(|(a, d)| a + r * d)
                        .collect();
                    theta.value(&xi)
                };
                assert!((theta.value(&x) - inner_val).abs() < 1e-10);
            }
        }
        // sandwich on a sweep of radii
        for k in 0..200 {
            let s = 1e-5 + (k as f64) * 0.5e-3;
            let x = [-0.5 + s, 1e-4, 0.0];
            let v = theta.value(&x);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn sequence_element_is_plain_product_on_plateau() {
        let (ball, cfg) = interior_cfg();
        let eps = 1e-3;
        let u = minimizing_sequence_element(&ball, &cfg, eps).unwrap();
        // at |x-a1| = eps the cutoff is 1, so u equals the singular product
        let x = [-0.5 + eps, 0.0, 0.0];
        let expect = crate::util::dist(&x, &[-0.5, 0.0, 0.0]).powf(-0.5)
            * crate::util::dist(&x, &[0.5, 0.0, 0.0]).powf(-0.5);
        assert_relative_eq!(u.value(&x), expect, max_relative = 1e-12);
        // and vanishes in the eps^2 holes
        assert_eq!(u.value(&[-0.5 + 0.5 * eps * eps, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn boundary_sequence_vanishes_in_holes() {
        let (disc, cfg) = boundary_disc_cfg();
        let eps = 1e-2;
        let u = minimizing_sequence_element(&disc, &cfg, eps).unwrap();
        assert_eq!(u.value(&[1.0 - 0.5 * eps * eps, 0.0]), 0.0);
        // generic interior point: theta * f * prod r^{-N/2}
        let x = [0.2, 0.3];
        let f = 1.0 - crate::util::norm_sq(&x);
        let expect = f
            * crate::util::dist(&x, &[1.0, 0.0]).powf(-1.0)
            * crate::util::dist(&x, &[-1.0, 0.0]).powf(-1.0);
        assert_relative_eq!(u.value(&x), expect, max_relative = 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences_off_interfaces() {
        let (ball, cfg) = interior_cfg();
        let eps = 1e-2;
        let u = minimizing_sequence_element(&ball, &cfg, eps).unwrap();
        // a point inside the up-ramp, away from interfaces
        let s = eps * eps * 10.0;
        let x = [-0.5 + s * 0.6, s * 0.64, s * 0.48];
        let mut g = vec![0.0; 3];
        let mut fd = vec![0.0; 3];
        u.gradient(&x, &mut g);
        // use a tiny custom step because the field varies at scale eps^2
        let h = s * 1e-4;
        for d in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            fd[d] = (u.value(&xp) - u.value(&xm)) / (2.0 * h);
        }
        let scale = norm(&g);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-5 * scale, "{a} vs {b}");
        }
    }
}
