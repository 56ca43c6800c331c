//! Coordinate charts mapping rectangular parameter boxes onto the supported
//! integration regions.
//!
//! Every chart exposes the map, the full integration weight (surface
//! Jacobian times the radial reparametrization factor), a conservative
//! enclosing ball for any parameter sub-box, and seed break points that put
//! initial cell boundaries at pole radii and angles.

use smallvec::SmallVec;

use crate::util::dist;

#[derive(Debug, Clone)]
pub(crate) enum Chart {
    /// Spherical coordinates around `center`, radii in `[r_lo, r_hi]`.
    /// `log_radial` parametrizes the radius as `rho = exp(t)`, which is the
    /// right chart for annuli spanning many decades.
    Ball {
        center: Vec<f64>,
        r_lo: f64,
        r_hi: f64,
        log_radial: bool,
    },
    /// Spherical coordinates around a point on the boundary hyperplane of a
    /// half-space, with the polar angle restricted to the inside.
    HalfSpaceBall {
        origin: Vec<f64>,
        axis: usize,
        r_hi: f64,
    },
    /// Cartesian box.
    BoxCart { lower: Vec<f64>, upper: Vec<f64> },
}

impl Chart {
    pub(crate) fn dim(&self) -> usize {
        match self {
            Chart::Ball { center, .. } => center.len(),
            Chart::HalfSpaceBall { origin, .. } => origin.len(),
            Chart::BoxCart { lower, .. } => lower.len(),
        }
    }

    pub(crate) fn param_box(&self) -> (SmallVec<[f64; 3]>, SmallVec<[f64; 3]>) {
        use std::f64::consts::PI;
        match self {
            Chart::Ball {
                center,
                r_lo,
                r_hi,
                log_radial,
            } => {
                let (a, b) = if *log_radial {
                    (r_lo.ln(), r_hi.ln())
                } else {
                    (*r_lo, *r_hi)
                };
                match center.len() {
                    2 => (SmallVec::from_slice(&[a, 0.0]), SmallVec::from_slice(&[b, 2.0 * PI])),
                    3 => (
                        SmallVec::from_slice(&[a, 0.0, 0.0]),
                        SmallVec::from_slice(&[b, PI, 2.0 * PI]),
                    ),
                    d => panic!("ball chart supports dimensions 2 and 3, got {d}"),
                }
            }
            Chart::HalfSpaceBall { origin, r_hi, .. } => match origin.len() {
                2 => (SmallVec::from_slice(&[0.0, 0.0]), SmallVec::from_slice(&[*r_hi, PI])),
                3 => (
                    SmallVec::from_slice(&[0.0, 0.0, 0.0]),
                    SmallVec::from_slice(&[*r_hi, 0.5 * PI, 2.0 * PI]),
                ),
                d => panic!("half-space chart supports dimensions 2 and 3, got {d}"),
            },
            Chart::BoxCart { lower, upper } => {
                (SmallVec::from_slice(lower), SmallVec::from_slice(upper))
            }
        }
    }

    /// Physical point for a parameter vector.
    pub(crate) fn map(&self, p: &[f64], out: &mut [f64]) {
        match self {
            Chart::Ball {
                center, log_radial, ..
            } => {
                let rho = if *log_radial { p[0].exp() } else { p[0] };
                match center.len() {
                    2 => {
                        out[0] = center[0] + rho * p[1].cos();
                        out[1] = center[1] + rho * p[1].sin();
                    }
                    3 => {
                        let (st, ct) = p[1].sin_cos();
                        let (sp, cp) = p[2].sin_cos();
                        out[0] = center[0] + rho * st * cp;
                        out[1] = center[1] + rho * st * sp;
                        out[2] = center[2] + rho * ct;
                    }
                    _ => unreachable!(),
                }
            }
            Chart::HalfSpaceBall { origin, axis, .. } => {
                let rho = p[0];
                match origin.len() {
                    2 => {
                        let t = 1 - axis; // the tangential coordinate
                        let (s, c) = p[1].sin_cos();
                        out[t] = origin[t] + rho * c;
                        out[*axis] = origin[*axis] + rho * s;
                    }
                    3 => {
                        let (st, ct) = p[1].sin_cos();
                        let (sp, cp) = p[2].sin_cos();
                        let mut tang = [0usize; 2];
                        let mut k = 0;
                        for d in 0..3 {
                            if d != *axis {
                                tang[k] = d;
                                k += 1;
                            }
                        }
                        out[tang[0]] = origin[tang[0]] + rho * st * cp;
                        out[tang[1]] = origin[tang[1]] + rho * st * sp;
                        out[*axis] = origin[*axis] + rho * ct;
                    }
                    _ => unreachable!(),
                }
            }
            Chart::BoxCart { .. } => out.copy_from_slice(p),
        }
    }

    /// Full integration weight at a parameter vector: surface Jacobian times
    /// `d rho / d t` for log-radial charts.
    pub(crate) fn weight(&self, p: &[f64]) -> f64 {
        match self {
            Chart::Ball {
                center, log_radial, ..
            } => {
                let rho = if *log_radial { p[0].exp() } else { p[0] };
                let radial = if *log_radial { rho } else { 1.0 };
                match center.len() {
                    2 => rho * radial,
                    3 => rho * rho * p[1].sin() * radial,
                    _ => unreachable!(),
                }
            }
            Chart::HalfSpaceBall { origin, .. } => {
                let rho = p[0];
                match origin.len() {
                    2 => rho,
                    3 => rho * rho * p[1].sin(),
                    _ => unreachable!(),
                }
            }
            Chart::BoxCart { .. } => 1.0,
        }
    }

    /// Conservative ball containing the image of the parameter sub-box.
    pub(crate) fn enclosing_ball(&self, lo: &[f64], hi: &[f64]) -> (SmallVec<[f64; 3]>, f64) {
        let d = self.dim();
        let mid: SmallVec<[f64; 3]> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut center: SmallVec<[f64; 3]> = smallvec::smallvec![0.0; d];
        self.map(&mid, &mut center);
        let radius = match self {
            Chart::Ball { log_radial, .. } => {
                let (r0, r1) = if *log_radial {
                    (lo[0].exp(), hi[0].exp())
                } else {
                    (lo[0], hi[0])
                };
                let ang_span: f64 = lo[1..]
                    .iter()
                    .zip(&hi[1..])
                    .map(|(a, b)| b - a)
                    .sum();
                0.5 * (r1 - r0) + r1 * 0.5 * ang_span.min(2.0 * std::f64::consts::PI)
            }
            Chart::HalfSpaceBall { .. } => {
                let (r0, r1) = (lo[0], hi[0]);
                let ang_span: f64 = lo[1..]
                    .iter()
                    .zip(&hi[1..])
                    .map(|(a, b)| b - a)
                    .sum();
                0.5 * (r1 - r0) + r1 * 0.5 * ang_span.min(2.0 * std::f64::consts::PI)
            }
            Chart::BoxCart { .. } => {
                0.5 * lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| (b - a) * (b - a))
                    .sum::<f64>()
                    .sqrt()
            }
        };
        (center, radius * 1.0000001)
    }

    fn radial_center(&self) -> Option<(&[f64], bool)> {
        match self {
            Chart::Ball {
                center, log_radial, ..
            } => Some((center, *log_radial)),
            Chart::HalfSpaceBall { origin, .. } => Some((origin, false)),
            Chart::BoxCart { .. } => None,
        }
    }

    /// Angular parameter coordinates of the direction from the chart center
    /// toward `rel` (axes 1.. of the parameter box).
    fn angles_of(&self, rel: &[f64], rho: f64) -> SmallVec<[f64; 2]> {
        use std::f64::consts::PI;
        match self {
            Chart::Ball { center, .. } => match center.len() {
                2 => smallvec::smallvec![rel[1].atan2(rel[0]).rem_euclid(2.0 * PI)],
                3 => {
                    let theta = (rel[2] / rho).clamp(-1.0, 1.0).acos();
                    let phi = rel[1].atan2(rel[0]).rem_euclid(2.0 * PI);
                    smallvec::smallvec![theta, phi]
                }
                _ => unreachable!(),
            },
            Chart::HalfSpaceBall { origin, axis, .. } => match origin.len() {
                2 => {
                    let t_ax = 1 - axis;
                    smallvec::smallvec![rel[*axis].atan2(rel[t_ax]).clamp(0.0, PI)]
                }
                3 => {
                    let mut tang = [0usize; 2];
                    let mut k = 0;
                    for dd in 0..3 {
                        if dd != *axis {
                            tang[k] = dd;
                            k += 1;
                        }
                    }
                    let theta = (rel[*axis] / rho).clamp(-1.0, 1.0).acos();
                    let phi = rel[tang[1]].atan2(rel[tang[0]]).rem_euclid(2.0 * PI);
                    smallvec::smallvec![theta.clamp(0.0, 0.5 * PI), phi]
                }
                _ => unreachable!(),
            },
            Chart::BoxCart { .. } => SmallVec::new(),
        }
    }

    /// Seed break coordinates per parameter axis: pole radii and angles plus
    /// a few geometric radial marks, so the first cell layer already
    /// separates the singular structure.
    pub(crate) fn initial_breaks(&self, poles: &[Vec<f64>], ratio: f64) -> Vec<Vec<f64>> {
        let (lo, hi) = self.param_box();
        let d = self.dim();
        let mut breaks: Vec<Vec<f64>> = vec![Vec::new(); d];
        match self.radial_center() {
            Some((center, is_log)) => {
                let center = center.to_vec();
                for a in poles {
                    let rho = dist(a, &center);
                    if is_log && rho <= 0.0 {
                        continue;
                    }
                    breaks[0].push(if is_log { rho.ln() } else { rho });
                    if rho > 1e-300 {
                        let rel: Vec<f64> =
                            a.iter().zip(&center).map(|(ai, ci)| ai - ci).collect();
                        for (k, ang) in self.angles_of(&rel, rho).iter().enumerate() {
                            breaks[1 + k].push(*ang);
                        }
                    }
                }
                // a few geometric radial marks toward the lower end
                let q = ratio.clamp(0.05, 0.95);
                let mut t = hi[0];
                for _ in 0..6 {
                    t = if is_log { t + q.ln() } else { t * q };
                    if t <= lo[0] {
                        break;
                    }
                    breaks[0].push(t);
                }
                // split angles at their midpoints for a sane aspect ratio
                for axis in 1..d {
                    breaks[axis].push(0.5 * (lo[axis] + hi[axis]));
                }
            }
            None => {
                for axis in 0..d {
                    for a in poles {
                        breaks[axis].push(a[axis]);
                    }
                    breaks[axis].push(0.5 * (lo[axis] + hi[axis]));
                }
            }
        }
        for (axis, bl) in breaks.iter_mut().enumerate() {
            let span = hi[axis] - lo[axis];
            bl.retain(|v| *v > lo[axis] + 1e-9 * span && *v < hi[axis] - 1e-9 * span);
            bl.sort_by(f64::total_cmp);
            bl.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * span);
        }
        breaks
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ball_chart_roundtrip_2d() {
        let c = Chart::Ball {
            center: vec![1.0, -2.0],
            r_lo: 0.0,
            r_hi: 2.0,
            log_radial: false,
        };
        let mut x = vec![0.0; 2];
        c.map(&[1.5, std::f64::consts::FRAC_PI_2], &mut x);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], -0.5, epsilon = 1e-14);
        assert_relative_eq!(c.weight(&[1.5, 0.3]), 1.5);
    }

    #[test]
    fn enclosing_ball_contains_cell_images() {
        let c = Chart::Ball {
            center: vec![0.0, 0.0, 0.0],
            r_lo: 0.0,
            r_hi: 1.0,
            log_radial: false,
        };
        let lo = [0.3, 0.2, 0.1];
        let hi = [0.5, 0.9, 1.4];
        let (ctr, rad) = c.enclosing_ball(&lo, &hi);
        let mut x = vec![0.0; 3];
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    let p = [
                        lo[0] + (hi[0] - lo[0]) * i as f64 / 4.0,
                        lo[1] + (hi[1] - lo[1]) * j as f64 / 4.0,
                        lo[2] + (hi[2] - lo[2]) * k as f64 / 4.0,
                    ];
                    c.map(&p, &mut x);
                    assert!(dist(&x, &ctr) <= rad + 1e-12);
                }
            }
        }
    }

    #[test]
    fn half_space_chart_stays_inside() {
        let c = Chart::HalfSpaceBall {
            origin: vec![0.0, 0.0],
            axis: 1,
            r_hi: 10.0,
        };
        let mut x = vec![0.0; 2];
        for i in 1..20 {
            let phi = std::f64::consts::PI * i as f64 / 20.0;
            c.map(&[3.0, phi], &mut x);
            assert!(x[1] >= -1e-12);
        }
    }
}
