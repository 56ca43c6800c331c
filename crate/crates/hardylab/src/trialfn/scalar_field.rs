//! Evaluatable scalar fields with closed-form gradients where available.
//!
//! Fields are immutable closures over their configuration; evaluation is pure
//! and concurrent-safe. Each field carries metadata the quadrature engine
//! needs: declared power-law behavior at singular points and a support
//! descriptor (containment balls and identically-zero holes).

use std::sync::Arc;

use smallvec::SmallVec;

/// Leading power-law behavior of a field near one singular point.
///
/// `value_exponent` is the exponent fitted along a generic ray into the
/// point (`v(a + s w) ~ s^alpha`); `gradient_exponent` the same for
/// `|grad v|`. They differ for products with factors that vanish at the
/// point, such as a boundary weight times a negative distance power.
#[derive(Debug, Clone)]
pub struct Singularity {
    pub at: Vec<f64>,
    pub value_exponent: f64,
    pub gradient_exponent: f64,
}

impl Singularity {
    pub fn isolated(at: Vec<f64>, exponent: f64) -> Self {
        Singularity {
            at,
            value_exponent: exponent,
            gradient_exponent: exponent - 1.0,
        }
    }
}

/// Where a field lives: optionally inside a union of balls, and identically
/// zero on another set of balls (cutoff holes).
#[derive(Debug, Clone, Default)]
pub struct Support {
    /// If set, the field vanishes outside the union of these `(center, radius)` balls.
    pub within: Option<Vec<(Vec<f64>, f64)>>,
    /// The field is identically zero inside each of these balls.
    pub zero_on: Vec<(Vec<f64>, f64)>,
}

impl Support {
    pub fn everywhere() -> Self {
        Support::default()
    }

    pub fn within_ball(center: Vec<f64>, radius: f64) -> Self {
        Support {
            within: Some(vec![(center, radius)]),
            zero_on: Vec::new(),
        }
    }

    /// Smallest zero-hole radius declared at a given point, if any.
    pub fn hole_radius_at(&self, p: &[f64]) -> Option<f64> {
        self.zero_on
            .iter()
            .filter(|(c, r)| crate::util::dist(c, p) <= 1e-12 * (1.0 + *r))
            .map(|(_, r)| *r)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.min(r))))
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

struct Inner {
    dim: usize,
    scale: f64,
    eval: Box<EvalFn>,
    grad: Option<Box<GradFn>>,
    laplacian: Option<Box<EvalFn>>,
    singularities: Vec<Singularity>,
    support: Support,
    /// Value decay exponent at infinity, when known: `|v(x)| ~ |x|^tail`.
    tail: Option<f64>,
}

/// A scalar function of space with optional closed-form first and second
/// derivatives. Cloning is cheap (shared inner).
#[derive(Clone)]
pub struct ScalarField {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.inner.dim)
            .field("singularities", &self.inner.singularities.len())
            .field("closed_gradient", &self.inner.grad.is_some())
            .finish()
    }
}

pub struct FieldBuilder {
    inner: Inner,
}

impl FieldBuilder {
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FieldBuilder {
            inner: Inner {
                dim,
                scale: 1.0,
                eval: Box::new(eval),
                grad: None,
                laplacian: None,
                singularities: Vec::new(),
                support: Support::everywhere(),
                tail: None,
            },
        }
    }

    pub fn scale(mut self, scale: f64) -> Self {
        self.inner.scale = scale;
        self
    }

    pub fn gradient(mut self, g: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.inner.grad = Some(Box::new(g));
        self
    }

    pub fn laplacian(mut self, l: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.inner.laplacian = Some(Box::new(l));
        self
    }

    pub fn singularities(mut self, s: Vec<Singularity>) -> Self {
        self.inner.singularities = s;
        self
    }

    pub fn support(mut self, s: Support) -> Self {
        self.inner.support = s;
        self
    }

    pub fn tail_exponent(mut self, t: Option<f64>) -> Self {
        self.inner.tail = t;
        self
    }

    pub fn build(self) -> ScalarField {
        ScalarField {
            inner: Arc::new(self.inner),
        }
    }
}

impl ScalarField {
    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn length_scale(&self) -> f64 {
        self.inner.scale
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.inner.dim);
        (self.inner.eval)(x)
    }

    pub fn has_closed_gradient(&self) -> bool {
        self.inner.grad.is_some()
    }

    pub fn has_closed_laplacian(&self) -> bool {
        self.inner.laplacian.is_some()
    }

    /// Gradient at `x`, closed form if declared, otherwise central finite
    /// differences with step 1e-5 times the field scale.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inner.dim);
        match &self.inner.grad {
            Some(g) => g(x, out),
            None => self.fd_gradient(x, out),
        }
    }

    /// Central-difference gradient; also serves as the independent oracle for
    /// closed-form gradients in tests.
    pub fn fd_gradient(&self, x: &[f64], out: &mut [f64]) {
        let h = 1e-5 * self.inner.scale;
        let mut xp: SmallVec<[f64; 6]> = SmallVec::from_slice(x);
        for d in 0..x.len() {
            xp[d] = x[d] + h;
            let fp = (self.inner.eval)(&xp);
            xp[d] = x[d] - h;
            let fm = (self.inner.eval)(&xp);
            xp[d] = x[d];
            out[d] = (fp - fm) / (2.0 * h);
        }
    }

    pub fn gradient_norm_sq(&self, x: &[f64]) -> f64 {
        let mut g: SmallVec<[f64; 6]> = smallvec::smallvec![0.0; x.len()];
        self.gradient(x, &mut g);
        crate::util::norm_sq(&g)
    }

    /// Laplacian, closed form or second-order central differences.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        match &self.inner.laplacian {
            Some(l) => l(x),
            None => {
                let h = 1e-4 * self.inner.scale;
                let mut xp: SmallVec<[f64; 6]> = SmallVec::from_slice(x);
                let f0 = (self.inner.eval)(x);
                let mut acc = 0.0;
                for d in 0..x.len() {
                    xp[d] = x[d] + h;
                    let fp = (self.inner.eval)(&xp);
                    xp[d] = x[d] - h;
                    let fm = (self.inner.eval)(&xp);
                    xp[d] = x[d];
                    acc += (fp - 2.0 * f0 + fm) / (h * h);
                }
                acc
            }
        }
    }

    pub fn singularities(&self) -> &[Singularity] {
        &self.inner.singularities
    }

    pub fn support(&self) -> &Support {
        &self.inner.support
    }

    /// Declared value decay at infinity, if known.
    pub fn tail_exponent(&self) -> Option<f64> {
        self.inner.tail
    }

    // ------------------------------------------------------------------
    // constructors
    // ------------------------------------------------------------------

    pub fn constant(dim: usize, c: f64) -> ScalarField {
        FieldBuilder::new(dim, move |_| c)
            .gradient(|_, out| out.fill(0.0))
            .laplacian(|_| 0.0)
            .tail_exponent(Some(0.0))
            .build()
    }

    /// `|x - a|^alpha` with exact gradient and Laplacian.
    pub fn distance_power(pole: Vec<f64>, alpha: f64) -> ScalarField {
        let dim = pole.len();
        let a1 = pole.clone();
        let a2 = pole.clone();
        let a3 = pole.clone();
        let n = dim as f64;
        let mut b = FieldBuilder::new(dim, move |x| crate::util::dist_sq(x, &a1).powf(alpha / 2.0))
            .gradient(move |x, out| {
                // grad = alpha |x-a|^(alpha-2) (x-a)
                let r2 = crate::util::dist_sq(x, &a2);
                if r2 == 0.0 {
                    out.fill(0.0);
                    return;
                }
                let c = alpha * r2.powf(alpha / 2.0 - 1.0);
                for (o, (xi, ai)) in out.iter_mut().zip(x.iter().zip(&a2)) {
                    *o = c * (xi - ai);
                }
            })
            .laplacian(move |x| {
                let r2 = crate::util::dist_sq(x, &a3);
                alpha * (alpha + n - 2.0) * r2.powf(alpha / 2.0 - 1.0)
            });
        if alpha != 0.0 {
            b = b.singularities(vec![Singularity::isolated(pole, alpha)]);
        }
        b.tail_exponent(Some(alpha)).build()
    }

    /// Smooth radial bump `exp(1 - 1/(1 - t^2))` with `t = |x - c|/radius`,
    /// supported on the closed ball of the given radius.
    pub fn bump(center: Vec<f64>, radius: f64) -> ScalarField {
        let dim = center.len();
        let n = dim as f64;
        let c1 = center.clone();
        let c2 = center.clone();
        let c3 = center.clone();
        let profile = move |t2: f64| -> f64 {
            if t2 >= 1.0 {
                0.0
            } else {
                (1.0 - 1.0 / (1.0 - t2)).exp()
            }
        };
        let p2 = profile.clone();
        let p3 = profile.clone();
        FieldBuilder::new(dim, move |x| {
            let t2 = crate::util::dist_sq(x, &c1) / (radius * radius);
            profile(t2)
        })
        .scale(radius)
        .gradient(move |x, out| {
            let t2 = crate::util::dist_sq(x, &c2) / (radius * radius);
            if t2 >= 1.0 {
                out.fill(0.0);
                return;
            }
            // d/dt [1 - 1/(1-t^2)] = -2t/(1-t^2)^2, grad t = (x-c)/(R^2 t) * t
            let b = p2(t2);
            let u = 1.0 - t2;
            let c = -2.0 * b / (radius * radius * u * u);
            for (o, (xi, ci)) in out.iter_mut().zip(x.iter().zip(&c2)) {
                *o = c * (xi - ci);
            }
        })
        .laplacian(move |x| {
            let t2 = crate::util::dist_sq(x, &c3) / (radius * radius);
            if t2 >= 1.0 {
                return 0.0;
            }
            // with g(t) = 1 - 1/(1-t^2):
            //   g'  = -2t/(1-t^2)^2
            //   g'' = -2(1+3t^2)/(1-t^2)^3
            //   lap b = b [ (g'^2 + g'') + g' (N-1)/t ] / R^2
            let b = p3(t2);
            let t = t2.sqrt();
            let u = 1.0 - t2;
            let gp = -2.0 * t / (u * u);
            let gpp = -2.0 * (1.0 + 3.0 * t2) / (u * u * u);
            let radial = if t < 1e-8 {
                // g'/t -> -2 as t -> 0
                -2.0 * (n - 1.0)
            } else {
                gp * (n - 1.0) / t
            };
            b * (gp * gp + gpp + radial) / (radius * radius)
        })
        .support(Support::within_ball(center, radius))
        .build()
    }

    /// Pointwise product of fields; gradients combine by the product rule,
    /// value exponents add, support containment comes from the tightest
    /// factor and zero holes accumulate.
    pub fn product(factors: Vec<ScalarField>) -> ScalarField {
        assert!(!factors.is_empty());
        let dim = factors[0].dim();
        assert!(factors.iter().all(|f| f.dim() == dim));
        let scale = factors
            .iter()
            .map(|f| f.length_scale())
            .fold(f64::INFINITY, f64::min);

        let singularities = merge_singularities(&factors);
        let support = merge_support(&factors);
        let tail = factors
            .iter()
            .map(|f| f.tail_exponent())
            .try_fold(0.0, |acc, t| t.map(|t| acc + t));

        let fs_eval = factors.clone();
        let fs_grad = factors.clone();
        FieldBuilder::new(dim, move |x| fs_eval.iter().map(|f| f.value(x)).product())
            .scale(scale)
            .gradient(move |x, out| {
                let k = fs_grad.len();
                let mut values: SmallVec<[f64; 4]> = SmallVec::with_capacity(k);
                for f in &fs_grad {
                    values.push(f.value(x));
                }
                out.fill(0.0);
                let mut g: SmallVec<[f64; 6]> = smallvec::smallvec![0.0; x.len()];
                for (i, f) in fs_grad.iter().enumerate() {
                    let mut rest = 1.0;
                    for (j, v) in values.iter().enumerate() {
                        if j != i {
                            rest *= v;
                        }
                    }
                    if rest == 0.0 {
                        continue;
                    }
                    f.gradient(x, &mut g);
                    for (o, gi) in out.iter_mut().zip(&g) {
                        *o += rest * gi;
                    }
                }
            })
            .singularities(singularities)
            .support(support)
            .tail_exponent(tail)
            .build()
    }

    /// `c * field` without touching the metadata.
    pub fn scaled(&self, c: f64) -> ScalarField {
        let f = self.clone();
        let g = self.clone();
        FieldBuilder::new(self.dim(), move |x| c * f.value(x))
            .scale(self.length_scale())
            .gradient(move |x, out| {
                g.gradient(x, out);
                for o in out.iter_mut() {
                    *o *= c;
                }
            })
            .singularities(self.singularities().to_vec())
            .support(self.support().clone())
            .tail_exponent(self.tail_exponent())
            .build()
    }
}

fn merge_singularities(factors: &[ScalarField]) -> Vec<Singularity> {
    let mut merged: Vec<Singularity> = Vec::new();
    for f in factors {
        for s in f.singularities() {
            if let Some(m) = merged
                .iter_mut()
                .find(|m| crate::util::dist(&m.at, &s.at) < 1e-12)
            {
                // product rule: value exponents add; the gradient exponent of
                // the product is min over factors of (own gradient exponent
                // plus the others' value exponents), computed incrementally
                m.gradient_exponent = (m.gradient_exponent + s.value_exponent)
                    .min(m.value_exponent + s.gradient_exponent);
                m.value_exponent += s.value_exponent;
            } else {
                merged.push(s.clone());
            }
        }
    }
    merged
}

fn merge_support(factors: &[ScalarField]) -> Support {
    let mut within: Option<Vec<(Vec<f64>, f64)>> = None;
    let mut zero_on = Vec::new();
    for f in factors {
        let s = f.support();
        if let Some(balls) = &s.within {
            // the product is supported inside every factor's support, so any
            // single factor's ball list is a valid container; keep the
            // smallest one seen
            let vol: f64 = balls.iter().map(|(_, r)| r.powi(3)).sum();
            let keep = match &within {
                None => true,
                Some(cur) => vol < cur.iter().map(|(_, r)| r.powi(3)).sum::<f64>(),
            };
            if keep {
                within = Some(balls.clone());
            }
        }
        zero_on.extend(s.zero_on.iter().cloned());
    }
    Support { within, zero_on }
}
