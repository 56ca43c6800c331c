//! Weights, supersolution residuals, exact minimizers, and cutoff
//! minimizing sequences, all as evaluatable fields with closed-form
//! gradients.
//!
//! Two families of weights drive everything:
//!
//! * interior poles: the fundamental solution `|x - a_i|^{-(N-2)}`, harmonic
//!   away from its pole;
//! * boundary poles: `f(x) |x - a_i|^{-N}` where `f` is a domain weight
//!   (ball: r^2 - |x - x0|^2, exterior: |x - x0|^2 - r^2, half-space: the
//!   height coordinate) whose supersolution residual
//!   `S(f, a) = -lap f |x-a|^2 + 2N grad f . (x-a) - 2N f`
//!   vanishes identically exactly when the pole sits on the boundary.

mod cutoff;
mod scalar_field;

pub use cutoff::{cutoff, minimizing_sequence_element, CutoffVariant};
pub use scalar_field::{FieldBuilder, ScalarField, Singularity, Support};

use thiserror::Error;

use crate::geometry::{Domain, Placement, PoleConfiguration};
use crate::util::{dist_sq, norm_sq};

#[derive(Debug, Error)]
pub enum TrialFnError {
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),
    #[error("the optimal constant is not attained for this domain/pole count: {0}")]
    NotAttained(String),
    #[error("eps = {eps} too large (needs < {limit}): {reason}")]
    EpsTooLarge { eps: f64, limit: f64, reason: String },
    #[error("field is not strictly positive at probe point {0:?}")]
    NonpositiveField(Vec<f64>),
}

/// `phi_i(x) = |x - a_i|^{-(N-2)}`, the fundamental-solution weight for an
/// interior pole.
pub fn interior_weight(config: &PoleConfiguration, i: usize) -> ScalarField {
    assert_eq!(config.placement(), Placement::Interior, "interior weights need interior poles");
    let n = config.dimension();
    assert!(n >= 3, "interior weights need N >= 3");
    ScalarField::distance_power(config.pole(i).to_vec(), -((n as f64) - 2.0))
}

/// A positive C^2 weight certifying a domain for boundary poles.
#[derive(Clone, Debug)]
pub struct BoundaryWeight {
    field: ScalarField,
    domain: Domain,
}

impl BoundaryWeight {
    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.field.value(x)
    }
}

/// The canonical domain weight with exact gradient and Laplacian.
pub fn boundary_weight(domain: &Domain) -> Result<BoundaryWeight, TrialFnError> {
    let dim = domain.dimension();
    let field = match domain {
        Domain::Ball { center, radius } => {
            let r2 = radius * radius;
            let c1 = center.clone();
            let c2 = center.clone();
            let n = dim as f64;
            FieldBuilder::new(dim, move |x| r2 - dist_sq(x, &c1))
                .scale(*radius)
                .gradient(move |x, out| {
                    for (o, (xi, ci)) in out.iter_mut().zip(x.iter().zip(&c2)) {
                        *o = -2.0 * (xi - ci);
                    }
                })
                .laplacian(move |_| -2.0 * n)
                .tail_exponent(Some(2.0))
                .build()
        }
        Domain::ExteriorBall { center, radius } => {
            let r2 = radius * radius;
            let c1 = center.clone();
            let c2 = center.clone();
            let n = dim as f64;
            FieldBuilder::new(dim, move |x| dist_sq(x, &c1) - r2)
                .scale(*radius)
                .gradient(move |x, out| {
                    for (o, (xi, ci)) in out.iter_mut().zip(x.iter().zip(&c2)) {
                        *o = 2.0 * (xi - ci);
                    }
                })
                .laplacian(move |_| 2.0 * n)
                .tail_exponent(Some(2.0))
                .build()
        }
        Domain::HalfSpace { axis, offset, .. } => {
            let ax = *axis;
            let off = *offset;
            FieldBuilder::new(dim, move |x| x[ax] - off)
                .gradient(move |_, out| {
                    out.fill(0.0);
                    out[ax] = 1.0;
                })
                .laplacian(|_| 0.0)
                .tail_exponent(Some(1.0))
                .build()
        }
        Domain::Ellipse2D { semi_x, semi_y } => {
            let a2 = semi_x * semi_x;
            let b2 = semi_y * semi_y;
            FieldBuilder::new(2, move |x| 1.0 - x[0] * x[0] / a2 - x[1] * x[1] / b2)
                .scale(semi_x.max(*semi_y))
                .gradient(move |x, out| {
                    out[0] = -2.0 * x[0] / a2;
                    out[1] = -2.0 * x[1] / b2;
                })
                .laplacian(move |_| -2.0 / a2 - 2.0 / b2)
                .build()
        }
        Domain::Box { .. } => {
            return Err(TrialFnError::UnsupportedDomain(
                "no canonical boundary weight for a box".into(),
            ))
        }
    };
    Ok(BoundaryWeight {
        field,
        domain: domain.clone(),
    })
}

/// Supersolution residual `S(f, a)(x) = -lap f |x-a|^2 + 2N grad f . (x-a) - 2N f`.
///
/// Identically zero on ball, exterior-ball and half-space weights whenever
/// `a` lies on the boundary; of nonconstant sign for the ellipse weight.
pub fn supersolution_residual(weight: &BoundaryWeight, pole: &[f64], x: &[f64]) -> f64 {
    let n = weight.domain.dimension() as f64;
    let f = weight.field.value(x);
    let lap = weight.field.laplacian(x);
    let mut grad = vec![0.0; x.len()];
    weight.field.gradient(x, &mut grad);
    let r2 = dist_sq(x, pole);
    let dir: f64 = grad
        .iter()
        .zip(x.iter().zip(pole))
        .map(|(g, (xi, ai))| g * (xi - ai))
        .sum();
    -lap * r2 + 2.0 * n * dir - 2.0 * n * f
}

/// The explicit minimizer `f(x) prod_i |x - a_i|^{-N/n}` for boundary poles
/// on the domains where the optimal constant N^2/n^2 is attained.
///
/// Attainability requires n >= 3 on the ball and half-space, and n >= 3 with
/// N >= 3 on the exterior ball; other combinations return `NotAttained`.
pub fn exact_minimizer(
    domain: &Domain,
    config: &PoleConfiguration,
) -> Result<ScalarField, TrialFnError> {
    if config.placement() != Placement::Boundary {
        return Err(TrialFnError::UnsupportedDomain(
            "exact minimizers exist for boundary poles".into(),
        ));
    }
    let n_poles = config.len();
    let dim = config.dimension();
    match domain {
        Domain::Ball { .. } => {
            if n_poles < 3 {
                return Err(TrialFnError::NotAttained(format!(
                    "ball with n = {n_poles}: attained only for n >= 3"
                )));
            }
        }
        Domain::HalfSpace { .. } => {
            if n_poles < 3 {
                return Err(TrialFnError::NotAttained(format!(
                    "half-space with n = {n_poles}: attained only for n >= 3"
                )));
            }
        }
        Domain::ExteriorBall { .. } => {
            if n_poles < 3 || dim < 3 {
                return Err(TrialFnError::NotAttained(format!(
                    "exterior ball with n = {n_poles}, N = {dim}: attained only for n >= 3 and N >= 3"
                )));
            }
        }
        _ => {
            return Err(TrialFnError::UnsupportedDomain(
                "exact minimizers cover balls, exterior balls and half-spaces".into(),
            ))
        }
    }

    let weight = boundary_weight(domain)?;
    let exponent = -(dim as f64) / (n_poles as f64);
    let mut factors = vec![weight.field().clone()];
    for a in config.poles() {
        factors.push(ScalarField::distance_power(a.clone(), exponent));
    }
    let field = ScalarField::product(factors);
    // f vanishes linearly at each boundary pole, so along an inward ray the
    // value behaves like s^(1 - N/n) while the gradient keeps s^(-N/n)
    let singularities = config
        .poles()
        .iter()
        .map(|a| Singularity {
            at: a.clone(),
            value_exponent: exponent + 1.0,
            gradient_exponent: exponent,
        })
        .collect();
    let f_eval = field.clone();
    let f_grad = field.clone();
    Ok(FieldBuilder::new(field.dim(), move |x| f_eval.value(x))
        .scale(field.length_scale())
        .gradient(move |x, out| f_grad.gradient(x, out))
        .singularities(singularities)
        .tail_exponent(field.tail_exponent())
        .build())
}

/// Geometric mean `(phi_1 ... phi_n)^(1/n)` of strictly positive fields,
/// with gradient `phi * (1/n) sum grad phi_i / phi_i`.
///
/// Positivity cannot be checked globally, so the caller supplies probe
/// points; a nonpositive value at any probe is a hard error.
pub fn product_weight(
    fields: &[ScalarField],
    probes: &[Vec<f64>],
) -> Result<ScalarField, TrialFnError> {
    assert!(!fields.is_empty());
    let dim = fields[0].dim();
    for p in probes {
        for f in fields {
            if !(f.value(p) > 0.0) {
                return Err(TrialFnError::NonpositiveField(p.clone()));
            }
        }
    }
    let k = fields.len() as f64;
    let fs_eval: Vec<ScalarField> = fields.to_vec();
    let fs_grad: Vec<ScalarField> = fields.to_vec();
    let scale = fields
        .iter()
        .map(|f| f.length_scale())
        .fold(f64::INFINITY, f64::min);

    // exponents scale by 1/n at shared poles
    let mut singularities: Vec<Singularity> = Vec::new();
    for f in fields {
        for s in f.singularities() {
            if let Some(m) = singularities
                .iter_mut()
                .find(|m| crate::util::dist(&m.at, &s.at) < 1e-12)
            {
                m.value_exponent += s.value_exponent / k;
                m.gradient_exponent = m.value_exponent - 1.0;
            } else {
                singularities.push(Singularity {
                    at: s.at.clone(),
                    value_exponent: s.value_exponent / k,
                    gradient_exponent: s.value_exponent / k - 1.0,
                });
            }
        }
    }

    Ok(FieldBuilder::new(dim, move |x| {
        let mut acc = 0.0;
        for f in &fs_eval {
            acc += f.value(x).ln();
        }
        (acc / k).exp()
    })
    .scale(scale)
    .gradient(move |x, out| {
        let mut acc = 0.0;
        for f in &fs_grad {
            acc += f.value(x).ln();
        }
        let phi = (acc / k).exp();
        out.fill(0.0);
        let mut g = vec![0.0; x.len()];
        for f in &fs_grad {
            f.gradient(x, &mut g);
            let v = f.value(x);
            for (o, gi) in out.iter_mut().zip(&g) {
                *o += gi / v;
            }
        }
        for o in out.iter_mut() {
            *o *= phi / k;
        }
    })
    .singularities(singularities)
    .build())
}

/// `sum_{i<j} |grad phi_i / phi_i - grad phi_j / phi_j|^2` evaluated from the
/// fields' own gradients. For the interior weights this equals
/// `(N-2)^2 V` pointwise; for boundary weights `N^2 V`.
pub fn pairwise_gradient_gap(fields: &[ScalarField], x: &[f64]) -> f64 {
    let dim = x.len();
    let mut logs: Vec<Vec<f64>> = Vec::with_capacity(fields.len());
    let mut g = vec![0.0; dim];
    for f in fields {
        f.gradient(x, &mut g);
        let v = f.value(x);
        logs.push(g.iter().map(|gi| gi / v).collect());
    }
    let mut acc = 0.0;
    for i in 0..fields.len() {
        for j in (i + 1)..fields.len() {
            let diff: Vec<f64> = logs[i].iter().zip(&logs[j]).map(|(a, b)| a - b).collect();
            acc += norm_sq(&diff);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pole_metrics;
    use crate::potential::PotentialField;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interior_weight_values() {
        let ball = Domain::ball(vec![0.0; 3], 3.0).unwrap();
        let cfg = pole_metrics(&ball, &[vec![0.0; 3], vec![1.0, 0.0, 0.0]]).unwrap();
        let phi = interior_weight(&cfg, 0);
        assert_relative_eq!(phi.value(&[2.0, 0.0, 0.0]), 0.5);
        let ball4 = Domain::ball(vec![0.0; 4], 3.0).unwrap();
        let cfg4 = pole_metrics(&ball4, &[vec![0.0; 4], vec![1.0, 0.0, 0.0, 0.0]]).unwrap();
        let phi4 = interior_weight(&cfg4, 0);
        assert_relative_eq!(phi4.value(&[1.0, 1.0, 0.0, 0.0]), 0.5);
    }

    #[test]
    fn boundary_weight_values_and_laplacians() {
        let ball = Domain::ball(vec![0.0; 2], 1.0).unwrap();
        let f = boundary_weight(&ball).unwrap();
        assert_relative_eq!(f.value(&[0.0, 0.0]), 1.0);
        assert_relative_eq!(f.field().laplacian(&[0.1, 0.2]), -4.0);

        let hs = Domain::half_space(2, 1, 0.0).unwrap();
        let fh = boundary_weight(&hs).unwrap();
        assert_relative_eq!(fh.value(&[7.0, 0.3]), 0.3);
        assert_relative_eq!(fh.field().laplacian(&[7.0, 0.3]), 0.0);

        let eb = Domain::exterior_ball(vec![0.0; 2], 1.0).unwrap();
        let fe = boundary_weight(&eb).unwrap();
        assert_relative_eq!(fe.value(&[2.0, 0.0]), 3.0);
        assert_relative_eq!(fe.field().laplacian(&[2.0, 0.0]), 4.0);

        assert!(boundary_weight(&Domain::axis_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()).is_err());
    }

    #[test]
    fn residual_vanishes_for_boundary_poles() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cases: Vec<(Domain, Vec<f64>)> = vec![
            (Domain::ball(vec![0.0; 2], 1.0).unwrap(), vec![1.0, 0.0]),
            (Domain::ball(vec![0.5, -0.5, 0.0], 2.0).unwrap(), vec![2.5, -0.5, 0.0]),
            (Domain::exterior_ball(vec![0.0; 3], 1.0).unwrap(), {
                let v = [0.6, 0.64, 0.48];
                v.to_vec()
            }),
            (Domain::half_space(3, 2, 0.25).unwrap(), vec![1.0, -2.0, 0.25]),
        ];
        for (domain, pole) in cases {
            let w = boundary_weight(&domain).unwrap();
            let mut hits = 0;
            while hits < 100 {
                let x: Vec<f64> = (0..domain.dimension())
                    .map(|_| rng.random_range(-3.0..3.0))
                    .collect();
                if !domain.contains(&x) {
                    continue;
                }
                hits += 1;
                let s = supersolution_residual(&w, &pole, &x);
                assert!(
                    s.abs() <= 1e-10,
                    "S(f, a) should vanish for boundary poles, got {s} on {domain:?}"
                );
            }
        }
    }

    #[test]
    fn residual_interior_pole_ball_closed_form() {
        // for the ball weight S(f,a) = 2N (|a - x0|^2 - r^2) at every x
        let ball = Domain::ball(vec![0.0; 2], 1.0).unwrap();
        let w = boundary_weight(&ball).unwrap();
        let a = vec![0.0, 0.0];
        for x in [[0.3, 0.4], [-0.5, 0.1], [0.0, 0.9]] {
            assert_relative_eq!(supersolution_residual(&w, &a, &x), -4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ellipse_residual_changes_sign_and_matches_closed_form() {
        let e = Domain::ellipse(2.0, 1.0).unwrap();
        let w = boundary_weight(&e).unwrap();
        let pole = vec![2.0, 0.0];
        let closed = |x: &[f64]| {
            let (a2, b2) = (4.0, 1.0);
            2.0 * (b2 - a2) * ((x[1] - pole[1]).powi(2) - (x[0] - pole[0]).powi(2)) / (a2 * b2)
        };
        // a point where the residual is positive and one where it is negative
        let xp = [0.5, 0.0];
        let xn = [1.9, 0.15];
        assert!(e.contains(&xp) && e.contains(&xn));
        let sp = supersolution_residual(&w, &pole, &xp);
        let sn = supersolution_residual(&w, &pole, &xn);
        assert_relative_eq!(sp, closed(&xp), max_relative = 1e-12);
        assert_relative_eq!(sn, closed(&xn), max_relative = 1e-12);
        assert_relative_eq!(sp, 3.375, max_relative = 1e-12);
        assert_relative_eq!(sn, -0.01875, max_relative = 1e-9);
        assert!(sp > 0.0 && sn < 0.0, "the ellipse residual must change sign");
    }

    #[test]
    fn minimizer_values_and_not_attained_cases() {
        let disc = Domain::ball(vec![0.0; 2], 1.0).unwrap();
        let three: Vec<Vec<f64>> = (0..3)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let cfg = pole_metrics(&disc, &three).unwrap();
        let u = exact_minimizer(&disc, &cfg).unwrap();
        // at the center every pole distance is 1 and f = 1
        assert_relative_eq!(u.value(&[0.0, 0.0]), 1.0, epsilon = 1e-12);

        let ball = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        let two = vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]];
        let cfg2 = pole_metrics(&ball, &two).unwrap();
        assert!(matches!(
            exact_minimizer(&ball, &cfg2),
            Err(TrialFnError::NotAttained(_))
        ));

        let hs = Domain::half_space(2, 1, 0.0).unwrap();
        let line = vec![vec![-1.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]];
        let cfgh = pole_metrics(&hs, &line).unwrap();
        let uh = exact_minimizer(&hs, &cfgh).unwrap();
        // vanishes on the boundary away from the poles
        assert_relative_eq!(uh.value(&[5.0, 0.0]), 0.0);

        let eb2 = Domain::exterior_ball(vec![0.0; 2], 1.0).unwrap();
        let cfge = pole_metrics(
            &eb2,
            &(0..3)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                    vec![t.cos(), t.sin()]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        // exterior ball in the plane: not attained regardless of n
        assert!(exact_minimizer(&eb2, &cfge).is_err());
    }

    #[test]
    fn minimizer_gradient_matches_finite_differences() {
        let disc = Domain::ball(vec![0.0; 2], 1.0).unwrap();
        let three: Vec<Vec<f64>> = (0..3)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let cfg = pole_metrics(&disc, &three).unwrap();
        let u = exact_minimizer(&disc, &cfg).unwrap();
        for x in [[0.2, 0.1], [-0.4, 0.3], [0.0, -0.6]] {
            let mut g = vec![0.0; 2];
            let mut fd = vec![0.0; 2];
            u.gradient(&x, &mut g);
            u.fd_gradient(&x, &mut fd);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6 * crate::util::norm(&g).max(1.0));
            }
        }
    }

    #[test]
    fn boundary_weight_bounded_by_pole_distance() {
        // ball weight: f(x) <= 2 r |x - a_i| for boundary poles
        let disc = Domain::ball(vec![0.0; 2], 1.0).unwrap();
        let w = boundary_weight(&disc).unwrap();
        let pole = [1.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if !disc.contains(&x) {
                continue;
            }
            assert!(w.value(&x) <= 2.0 * crate::util::dist(&x, &pole) + 1e-12);
        }
    }

    #[test]
    fn product_weight_examples() {
        let one = ScalarField::constant(2, 1.0);
        let four = ScalarField::constant(2, 4.0);
        let probes = vec![vec![0.1, 0.2]];
        let gm = product_weight(&[one, four], &probes).unwrap();
        assert_relative_eq!(gm.value(&[0.5, 0.5]), 2.0);

        let phi = ScalarField::distance_power(vec![0.3, 0.0], -1.0);
        let same = product_weight(&[phi.clone(), phi.clone(), phi.clone()], &probes).unwrap();
        let x = [0.9, -0.4];
        assert_relative_eq!(same.value(&x), phi.value(&x), max_relative = 1e-13);

        let neg = ScalarField::constant(2, -1.0);
        assert!(matches!(
            product_weight(&[neg], &probes),
            Err(TrialFnError::NonpositiveField(_))
        ));
    }

    #[test]
    fn pairwise_gap_reproduces_potential() {
        // interior weights: sum |grad phi_i/phi_i - grad phi_j/phi_j|^2 = (N-2)^2 V
        let ball = Domain::ball(vec![0.0; 3], 2.0).unwrap();
        let poles = vec![vec![-1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.8, 0.0]];
        let cfg = pole_metrics(&ball, &poles).unwrap();
        let v = PotentialField::pairwise(cfg.clone());
        let ws: Vec<ScalarField> = (0..3).map(|i| interior_weight(&cfg, i)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let x = [
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            ];
            if poles.iter().any(|p| crate::util::dist(p, &x) < 0.05) {
                continue;
            }
            let lhs = pairwise_gradient_gap(&ws, &x);
            let rhs = v.evaluate_unchecked(&x);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
        }

        // boundary weights f |x-a|^{-N} on the disc: the gap is N^2 V
        let disc = Domain::ball(vec![0.0; 2], 1.0).unwrap();
        let bpoles = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let bcfg = pole_metrics(&disc, &bpoles).unwrap();
        let bv = PotentialField::pairwise(bcfg);
        let f = boundary_weight(&disc).unwrap();
        let bws: Vec<ScalarField> = bpoles
            .iter()
            .map(|a| {
                ScalarField::product(vec![
                    f.field().clone(),
                    ScalarField::distance_power(a.clone(), -2.0),
                ])
            })
            .collect();
        for _ in 0..20 {
            let x = [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)];
            if !disc.contains(&x) || bpoles.iter().any(|p| crate::util::dist(p, &x) < 0.05) {
                continue;
            }
            let lhs = pairwise_gradient_gap(&bws, &x);
            let rhs = 4.0 * bv.evaluate_unchecked(&x);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
        }
    }
}
