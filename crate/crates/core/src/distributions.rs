//! Reference distributions with seeded samplers and exact (or certified
//! quadrature) oracles for ball probabilities, the smoothed density
//! `p_h(x) = E[K_h(x - X)]`, its derivatives, and kernel moments.
//!
//! Oracles reduce to one- or two-dimensional integrals per distribution kind:
//!
//! | kind             | ball probability         | smoothed functionals                         |
//! |------------------|--------------------------|----------------------------------------------|
//! | point masses     | weight sum               | finite sum                                   |
//! | uniform cube     | exact (d=1), nested GK   | Gaussian: normal-CDF products; else nested GK |
//! | uniform circle   | arc length (arccos)      | angular GK                                   |
//! | uniform sphere   | regularized beta cap     | polar-angle GK (radial) / angular GK         |
//! | unbounded ball   | `r^(d-beta)` at 0, else GK | radial x angular GK                        |
//! | mixture          | weighted sum             | weighted sum                                 |

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use libm::lgamma as ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::kernels::{Kernel, MultiIndex};
use crate::quadrature::{breakpoints, try_integrate, QuadOptions};
use crate::rng::{seeded, SampleRng};
use crate::sample::{dist2, Sample};
use crate::special::{hermite_he, normal_interval, normal_pdf_deriv, spherical_cap_fraction};

/// Parametric description of a reference distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    /// Uniform on `[0, 1]^dim`.
    UniformCube { dim: usize },
    /// Density proportional to `|x|^-beta` on the closed unit ball of `R^dim`.
    UnboundedBall { dim: usize, beta: f64 },
    /// Uniform on the circle of the given radius about the origin of `R^2`.
    UniformCircle { radius: f64 },
    /// Uniform on the `manifold_dim`-sphere of the given radius in `R^(manifold_dim + 1)`.
    UniformSphere { manifold_dim: usize, radius: f64 },
    PointMasses {
        locations: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    Mixture {
        components: Vec<DistributionKind>,
        weights: Vec<f64>,
    },
}

/// A value with an absolute error certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certified {
    pub value: f64,
    pub error: f64,
}

impl Certified {
    fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

/// Accuracy demanded from quadrature-backed oracles.
const ORACLE_REL_TOL: f64 = 1e-11;
const BALL_PROB_TARGET: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionKind", into = "DistributionKind")]
pub struct ReferenceDistribution {
    kind: DistributionKind,
    components: Vec<ReferenceDistribution>,
    cumulative: Vec<f64>,
    ambient_dim: usize,
    analytic_voldim: f64,
    domain_radius: f64,
    reach: Option<f64>,
}

impl TryFrom<DistributionKind> for ReferenceDistribution {
    type Error = Error;

    fn try_from(kind: DistributionKind) -> Result<Self> {
        ReferenceDistribution::new(kind)
    }
}

impl From<ReferenceDistribution> for DistributionKind {
    fn from(d: ReferenceDistribution) -> Self {
        d.kind
    }
}

fn cumulative_weights(weights: &[f64], allow_unit: bool) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(invalid("weights", "must be nonempty"));
    }
    for &w in weights {
        let ok = if allow_unit { w > 0.0 && w <= 1.0 } else { w > 0.0 && w < 1.0 };
        if !ok {
            return Err(invalid("weights", format!("weight {w} outside the admissible range")));
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(invalid("weights", format!("must sum to 1, got {total}")));
    }
    let mut acc = 0.0;
    Ok(weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect())
}

impl ReferenceDistribution {
    pub fn new(kind: DistributionKind) -> Result<Self> {
        let mut components = Vec::new();
        let mut cumulative = Vec::new();
        let (ambient_dim, analytic_voldim, domain_radius, reach) = match &kind {
            DistributionKind::UniformCube { dim } => {
                if *dim == 0 {
                    return Err(invalid("dim", "must be positive"));
                }
                (*dim, *dim as f64, (*dim as f64).sqrt(), None)
            }
            DistributionKind::UnboundedBall { dim, beta } => {
                if *dim == 0 {
                    return Err(invalid("dim", "must be positive"));
                }
                if !(*beta >= 0.0 && *beta < *dim as f64) {
                    return Err(invalid("beta", format!("need 0 <= beta < d, got {beta}")));
                }
                (*dim, *dim as f64 - beta, 2.0, None)
            }
            DistributionKind::UniformCircle { radius } => {
                if !(*radius > 0.0) {
                    return Err(invalid("radius", "must be positive"));
                }
                (2, 1.0, *radius, Some(*radius))
            }
            DistributionKind::UniformSphere {
                manifold_dim,
                radius,
            } => {
                if *manifold_dim == 0 {
                    return Err(invalid("manifold_dim", "must be positive"));
                }
                if !(*radius > 0.0) {
                    return Err(invalid("radius", "must be positive"));
                }
                (manifold_dim + 1, *manifold_dim as f64, *radius, Some(*radius))
            }
            DistributionKind::PointMasses { locations, weights } => {
                if locations.len() != weights.len() || locations.is_empty() {
                    return Err(invalid("locations", "need one weight per location"));
                }
                let dim = locations[0].len();
                if dim == 0 || locations.iter().any(|l| l.len() != dim) {
                    return Err(invalid("locations", "all locations need the same positive dimension"));
                }
                cumulative = cumulative_weights(weights, true)?;
                let radius = locations
                    .iter()
                    .map(|l| l.iter().map(|v| v * v).sum::<f64>().sqrt())
                    .fold(0.0, f64::max);
                (dim, 0.0, radius, None)
            }
            DistributionKind::Mixture {
                components: parts,
                weights,
            } => {
                if parts.len() != weights.len() || parts.is_empty() {
                    return Err(invalid("components", "need one weight per component"));
                }
                cumulative = cumulative_weights(weights, false)?;
                components = parts
                    .iter()
                    .cloned()
                    .map(ReferenceDistribution::new)
                    .collect::<Result<Vec<_>>>()?;
                let dim = components[0].ambient_dim;
                if components.iter().any(|c| c.ambient_dim != dim) {
                    return Err(invalid("components", "ambient dimensions differ"));
                }
                let voldim = components
                    .iter()
                    .map(|c| c.analytic_voldim)
                    .fold(f64::INFINITY, f64::min);
                let radius = components.iter().map(|c| c.domain_radius).fold(0.0, f64::max);
                (dim, voldim, radius, None)
            }
        };
        Ok(Self {
            kind,
            components,
            cumulative,
            ambient_dim,
            analytic_voldim,
            domain_radius,
            reach,
        })
    }

    pub fn uniform_cube(dim: usize) -> Result<Self> {
        Self::new(DistributionKind::UniformCube { dim })
    }

    pub fn unbounded_ball(dim: usize, beta: f64) -> Result<Self> {
        Self::new(DistributionKind::UnboundedBall { dim, beta })
    }

    pub fn uniform_circle(radius: f64) -> Result<Self> {
        Self::new(DistributionKind::UniformCircle { radius })
    }

    pub fn uniform_sphere(manifold_dim: usize, radius: f64) -> Result<Self> {
        Self::new(DistributionKind::UniformSphere {
            manifold_dim,
            radius,
        })
    }

    pub fn point_masses(locations: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        Self::new(DistributionKind::PointMasses { locations, weights })
    }

    pub fn mixture(components: Vec<ReferenceDistribution>, weights: Vec<f64>) -> Result<Self> {
        Self::new(DistributionKind::Mixture {
            components: components.into_iter().map(|c| c.kind).collect(),
            weights,
        })
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn components(&self) -> &[ReferenceDistribution] {
        &self.components
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Volume dimension known in closed form for the kind.
    pub fn analytic_voldim(&self) -> f64 {
        self.analytic_voldim
    }

    /// `R` with the evaluation set inside `B(0, R)`.
    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    /// Override the domain radius used by covering bounds.
    pub fn with_domain_radius(mut self, radius: f64) -> Self {
        self.domain_radius = radius;
        self
    }

    /// Reach of the support for manifold kinds.
    pub fn reach(&self) -> Option<f64> {
        self.reach
    }

    /// The `epsilon` of the kernel-moment bound; zero for every built-in kind.
    pub fn moment_epsilon(&self) -> f64 {
        0.0
    }

    pub fn label(&self) -> String {
        match &self.kind {
            DistributionKind::UniformCube { dim } => format!("uniform_cube(d={dim})"),
            DistributionKind::UnboundedBall { dim, beta } => format!("unbounded_ball(d={dim},beta={beta})"),
            DistributionKind::UniformCircle { radius } => format!("uniform_circle(radius={radius})"),
            DistributionKind::UniformSphere {
                manifold_dim,
                radius,
            } => format!("uniform_sphere(m={manifold_dim},radius={radius})"),
            DistributionKind::PointMasses { locations, .. } => format!("point_masses({})", locations.len()),
            DistributionKind::Mixture { .. } => {
                let parts: Vec<String> = self.components.iter().map(|c| c.label()).collect();
                format!("mixture[{}]", parts.join("+"))
            }
        }
    }

    /// Diameter of the evaluation set (the support).
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            DistributionKind::UniformCube { dim } => (*dim as f64).sqrt(),
            DistributionKind::UnboundedBall { .. } => 2.0,
            DistributionKind::UniformCircle { radius } => 2.0 * radius,
            DistributionKind::UniformSphere { radius, .. } => 2.0 * radius,
            DistributionKind::PointMasses { locations, .. } => {
                let mut best = 0.0f64;
                for a in locations {
                    for b in locations {
                        best = best.max(dist2(a, b).sqrt());
                    }
                }
                best
            }
            DistributionKind::Mixture { .. } => {
                // Upper bound: diagonal of the union of component bounding boxes.
                let (lo, hi) = self.bounding_box();
                dist2(&lo, &hi).sqrt()
            }
        }
    }

    /// Axis-aligned box containing the support.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.ambient_dim;
        match &self.kind {
            DistributionKind::UniformCube { .. } => (vec![0.0; d], vec![1.0; d]),
            DistributionKind::UnboundedBall { .. } => (vec![-1.0; d], vec![1.0; d]),
            DistributionKind::UniformCircle { radius } | DistributionKind::UniformSphere { radius, .. } => {
                (vec![-radius; d], vec![*radius; d])
            }
            DistributionKind::PointMasses { locations, .. } => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for l in locations {
                    for j in 0..d {
                        lo[j] = lo[j].min(l[j]);
                        hi[j] = hi[j].max(l[j]);
                    }
                }
                (lo, hi)
            }
            DistributionKind::Mixture { .. } => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for c in &self.components {
                    let (a, b) = c.bounding_box();
                    for j in 0..d {
                        lo[j] = lo[j].min(a[j]);
                        hi[j] = hi[j].max(b[j]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Points where suprema over the evaluation set are attained but a lattice
    /// can miss them: atoms and density singularities.
    pub fn candidate_points(&self) -> Vec<Vec<f64>> {
        match &self.kind {
            DistributionKind::UnboundedBall { dim, beta } if *beta > 0.0 => vec![vec![0.0; *dim]],
            DistributionKind::PointMasses { locations, .. } => locations.clone(),
            DistributionKind::Mixture { .. } => self.components.iter().flat_map(|c| c.candidate_points()).collect(),
            _ => Vec::new(),
        }
    }

    /// Points known to attain `sup_x E|K((x - X)/h)|^k` for every `h` and `k`.
    /// A symmetric nonincreasing density smoothed by a nonincreasing radial
    /// profile peaks at its center, so the unbounded ball with `s = 0` has the
    /// origin as maximizer.
    pub fn moment_maximizers(&self, s: &MultiIndex) -> Option<Vec<Vec<f64>>> {
        match &self.kind {
            DistributionKind::UnboundedBall { dim, .. } if s.is_zero() => Some(vec![vec![0.0; *dim]]),
            _ => None,
        }
    }

    /// Draws one point into `out`.
    pub fn draw(&self, rng: &mut SampleRng, out: &mut [f64]) {
        match &self.kind {
            DistributionKind::UniformCube { .. } => {
                for v in out.iter_mut() {
                    *v = rng.random::<f64>();
                }
            }
            DistributionKind::UnboundedBall { dim, beta } => {
                // P(|X| <= r) = r^(d - beta): invert the radial CDF.
                let u: f64 = rng.random();
                let radius = u.powf(1.0 / (*dim as f64 - beta));
                random_direction(rng, out);
                out.iter_mut().for_each(|v| *v *= radius);
            }
            DistributionKind::UniformCircle { radius } => {
                let theta = 2.0 * PI * rng.random::<f64>();
                out[0] = radius * theta.cos();
                out[1] = radius * theta.sin();
            }
            DistributionKind::UniformSphere { radius, .. } => {
                random_direction(rng, out);
                out.iter_mut().for_each(|v| *v *= radius);
            }
            DistributionKind::PointMasses { locations, .. } => {
                let i = pick(&self.cumulative, rng.random());
                out.copy_from_slice(&locations[i]);
            }
            DistributionKind::Mixture { .. } => {
                let i = pick(&self.cumulative, rng.random());
                self.components[i].draw(rng, out);
            }
        }
    }

    /// `n` i.i.d. draws from the stream seeded with `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        let mut rng = seeded(seed);
        let mut sample = Sample::with_capacity(self.ambient_dim, n);
        let mut p = vec![0.0; self.ambient_dim];
        for _ in 0..n {
            self.draw(&mut rng, &mut p);
            sample.push(&p);
        }
        Ok(sample)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `P(B(x, r))` for the closed ball, with an absolute error certificate.
    pub fn ball_prob(&self, x: &[f64], r: f64) -> Result<Certified> {
        self.check_point(x)?;
        if !(r > 0.0) {
            return Err(invalid("r", "must be positive"));
        }
        let out = match &self.kind {
            DistributionKind::PointMasses { locations, .. } => {
                let r2 = r * r;
                let mut mass = 0.0;
                let mut prev = 0.0;
                for (loc, &c) in locations.iter().zip(&self.cumulative) {
                    if dist2(x, loc) <= r2 {
                        mass += c - prev;
                    }
                    prev = c;
                }
                Certified::exact(mass)
            }
            DistributionKind::Mixture { weights, .. } => {
                let mut value = 0.0;
                let mut error = 0.0;
                for (c, w) in self.components.iter().zip(weights) {
                    let p = c.ball_prob(x, r)?;
                    value += w * p.value;
                    error += w * p.error;
                }
                Certified { value, error }
            }
            DistributionKind::UniformCircle { radius } => Certified::exact(sphere_ball_fraction(2, *radius, x, r)),
            DistributionKind::UniformSphere { radius, .. } => {
                Certified::exact(sphere_ball_fraction(self.ambient_dim, *radius, x, r))
            }
            DistributionKind::UniformCube { dim } => cube_ball_volume(*dim, x, r)?,
            DistributionKind::UnboundedBall { dim, beta } => unbounded_ball_prob(*dim, *beta, x, r)?,
        };
        if out.error > BALL_PROB_TARGET {
            return Err(Error::AccuracyUnreachable {
                target: BALL_PROB_TARGET,
                achieved: out.error,
            });
        }
        Ok(Certified {
            value: out.value.clamp(0.0, 1.0),
            error: out.error,
        })
    }

    /// `p_h(x) = E[h^-d K((x - X)/h)]`.
    pub fn smoothed_density(&self, kernel: &Kernel, h: f64, x: &[f64]) -> Result<f64> {
        self.smoothed_derivative(kernel, &MultiIndex::zero(self.ambient_dim), h, x)
    }

    /// `D^s p_h(x) = E[h^-(d+|s|) (D^s K)((x - X)/h)]`.
    pub fn smoothed_derivative(&self, kernel: &Kernel, s: &MultiIndex, h: f64, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_kernel(kernel, s, h)?;
        let d = self.ambient_dim as f64;
        let norm = h.powf(-(d + s.order() as f64));
        if let DistributionKind::UniformCube { .. } = self.kind {
            if kernel.is_gaussian() {
                return Ok(gaussian_cube_smoothed(s, h, x));
            }
        }
        let inv_h = 1.0 / h;
        let inv_h2 = inv_h * inv_h;
        let radial = |q: f64| norm * kernel.eval_sq(q * inv_h2);
        let general = |diff: &[f64]| {
            let mut u = [0.0; 8];
            let u = scaled(diff, inv_h, &mut u);
            norm * kernel.deriv_unchecked(s, u)
        };
        let integrand = Integrand {
            radial: if s.is_zero() { Some(&radial) } else { None },
            general: &general,
            reach: kernel.effective_radius() * h,
            magnitude: norm * kernel.deriv_sup_norm(s)?,
            kinks: self.kernel_kinks(kernel, h),
        };
        self.expectation(x, &integrand)
    }

    /// `E[|D^s K((x - X)/h)|^k]`, the unnormalized kernel moment.
    pub fn moment_k(&self, kernel: &Kernel, x: &[f64], h: f64, k: f64, s: &MultiIndex) -> Result<f64> {
        self.check_point(x)?;
        self.check_kernel(kernel, s, h)?;
        if !(k > 0.0) {
            return Err(invalid("k", "must be positive"));
        }
        if let DistributionKind::UniformCube { .. } = self.kind {
            if kernel.is_gaussian() {
                return gaussian_cube_moment(s, h, k, x);
            }
        }
        let inv_h = 1.0 / h;
        let inv_h2 = inv_h * inv_h;
        let radial = |q: f64| kernel.eval_sq(q * inv_h2).abs().powf(k);
        let general = |diff: &[f64]| {
            let mut u = [0.0; 8];
            let u = scaled(diff, inv_h, &mut u);
            kernel.deriv_unchecked(s, u).abs().powf(k)
        };
        let integrand = Integrand {
            radial: if s.is_zero() { Some(&radial) } else { None },
            general: &general,
            reach: kernel.effective_radius() * h,
            magnitude: kernel.deriv_sup_norm(s)?.powf(k),
            kinks: self.kernel_kinks(kernel, h),
        };
        self.expectation(x, &integrand)
    }

    fn check_kernel(&self, kernel: &Kernel, s: &MultiIndex, h: f64) -> Result<()> {
        if kernel.dim() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: kernel.dim(),
            });
        }
        if s.dim() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: s.dim(),
            });
        }
        if s.order() > kernel.deriv_support() {
            return Err(Error::UnsupportedDerivative {
                kernel: kernel.name(),
                order: s.order(),
                supported: kernel.deriv_support(),
            });
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(invalid("h", "bandwidth must be positive and finite"));
        }
        if self.ambient_dim > 8 {
            return Err(invalid("dim", "oracles support ambient dimension up to 8"));
        }
        Ok(())
    }

    fn kernel_kinks(&self, kernel: &Kernel, h: f64) -> Vec<f64> {
        // Radii (in data units) where the kernel profile is not smooth.
        match kernel.support_radius() {
            Some(r) => vec![r * h],
            None => Vec::new(),
        }
    }

    fn expectation(&self, x: &[f64], f: &Integrand<'_>) -> Result<f64> {
        match &self.kind {
            DistributionKind::PointMasses { locations, .. } => {
                let mut acc = 0.0;
                let mut prev = 0.0;
                let mut diff = vec![0.0; self.ambient_dim];
                for (loc, &c) in locations.iter().zip(&self.cumulative) {
                    for j in 0..diff.len() {
                        diff[j] = x[j] - loc[j];
                    }
                    acc += (c - prev) * f.at(&diff);
                    prev = c;
                }
                Ok(acc)
            }
            DistributionKind::Mixture { weights, .. } => {
                let mut acc = 0.0;
                for (c, w) in self.components.iter().zip(weights) {
                    acc += w * c.expectation(x, f)?;
                }
                Ok(acc)
            }
            DistributionKind::UniformCircle { radius } => sphere_mean(2, *radius, x, f),
            DistributionKind::UniformSphere { radius, .. } => sphere_mean(self.ambient_dim, *radius, x, f),
            DistributionKind::UniformCube { dim } => cube_expectation(*dim, x, f),
            DistributionKind::UnboundedBall { dim, beta } => {
                let a = *dim as f64 - beta;
                let xn = norm(x);
                let lo = (xn - f.reach).max(0.0);
                let hi = (xn + f.reach).min(1.0);
                if lo >= hi {
                    return Ok(0.0);
                }
                let mut interior = vec![xn];
                interior.extend(f.kinks.iter().flat_map(|&k| [xn - k, xn + k]));
                let breaks: Vec<f64> = breakpoints(lo, hi, interior).into_iter().map(|rho| rho.powf(a)).collect();
                let q = try_integrate(
                    |u| sphere_mean(*dim, u.powf(1.0 / a), x, f),
                    &breaks,
                    f.options(),
                )?;
                Ok(q.value)
            }
        }
    }
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

fn random_direction(rng: &mut SampleRng, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut n2 = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
            n2 += *v * *v;
        }
        if n2 > 1e-300 {
            let inv = 1.0 / n2.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn scaled<'b>(diff: &[f64], factor: f64, buf: &'b mut [f64; 8]) -> &'b [f64] {
    for (b, d) in buf.iter_mut().zip(diff) {
        *b = d * factor;
    }
    &buf[..diff.len()]
}

/// A functional `g` of the difference vector `x - y`.
struct Integrand<'a> {
    /// `g` as a function of `|x - y|^2` when it is radial.
    radial: Option<&'a dyn Fn(f64) -> f64>,
    general: &'a dyn Fn(&[f64]) -> f64,
    /// `g` is negligible beyond this distance.
    reach: f64,
    /// Upper bound on `|g|`, sets the absolute tolerance.
    magnitude: f64,
    /// Distances at which the radial profile has kinks.
    kinks: Vec<f64>,
}

impl Integrand<'_> {
    fn at(&self, diff: &[f64]) -> f64 {
        match self.radial {
            Some(g) => g(diff.iter().map(|v| v * v).sum()),
            None => (self.general)(diff),
        }
    }

    fn options(&self) -> QuadOptions {
        QuadOptions::new(1e-15 * self.magnitude.max(1e-300), ORACLE_REL_TOL).with_max_panels(4000)
    }
}

/// Mean of `g(x - rho * theta)` over the uniform direction `theta` on `S^{d-1}`.
fn sphere_mean(d: usize, rho: f64, x: &[f64], f: &Integrand<'_>) -> Result<f64> {
    let xn = norm(x);
    if d == 1 {
        let a = f.at(&[x[0] - rho]);
        let b = f.at(&[x[0] + rho]);
        return Ok(0.5 * (a + b));
    }
    if rho == 0.0 {
        return Ok(f.at(x));
    }
    if xn == 0.0 && f.radial.is_some() {
        return Ok(f.at(&{
            let mut y = vec![0.0; d];
            y[0] = rho;
            y
        }));
    }
    // Angle psi between x and theta; |x - rho theta|^2 = |x|^2 + rho^2 - 2 rho |x| cos psi.
    let psi_max = if xn > 0.0 {
        let c = (xn * xn + rho * rho - f.reach * f.reach) / (2.0 * rho * xn);
        if c >= 1.0 {
            return Ok(0.0);
        }
        c.max(-1.0).acos()
    } else if rho > f.reach {
        return Ok(0.0);
    } else {
        PI
    };
    let kinks: Vec<f64> = f
        .kinks
        .iter()
        .filter_map(|&k| {
            if xn == 0.0 {
                return None;
            }
            let c = (xn * xn + rho * rho - k * k) / (2.0 * rho * xn);
            (c > -1.0 && c < 1.0).then(|| c.acos())
        })
        .collect();
    let opts = f.options();
    if let Some(g) = f.radial {
        let breaks = breakpoints(0.0, psi_max, kinks);
        let q = try_integrate(
            |psi| {
                let q = xn * xn + rho * rho - 2.0 * rho * xn * psi.cos();
                Ok(g(q.max(0.0)) * psi.sin().powi(d as i32 - 2))
            },
            &breaks,
            opts,
        )?;
        return Ok(q.value / sin_power_integral(d - 2));
    }
    match d {
        2 => {
            let theta0 = if xn > 0.0 { x[1].atan2(x[0]) } else { 0.0 };
            let mut breaks = breakpoints(-psi_max, psi_max, kinks.iter().flat_map(|&k| [-k, k]));
            if !breaks.contains(&0.0) {
                breaks.push(0.0);
                breaks.sort_by(f64::total_cmp);
            }
            let q = try_integrate(
                |phi| {
                    let t = theta0 + phi;
                    Ok((f.general)(&[x[0] - rho * t.cos(), x[1] - rho * t.sin()]))
                },
                &breaks,
                opts,
            )?;
            Ok(q.value / (2.0 * PI))
        }
        3 => {
            let (e1, e2, e3) = frame3(x, xn);
            let breaks = breakpoints(0.0, psi_max, kinks);
            let inner_opts = opts;
            let q = try_integrate(
                |psi| {
                    let (sp, cp) = psi.sin_cos();
                    let inner = try_integrate(
                        |phi: f64| {
                            let (sf, cf) = phi.sin_cos();
                            let mut diff = [0.0; 3];
                            for j in 0..3 {
                                let theta = cp * e1[j] + sp * (cf * e2[j] + sf * e3[j]);
                                diff[j] = x[j] - rho * theta;
                            }
                            Ok((f.general)(&diff))
                        },
                        &[0.0, PI, 2.0 * PI],
                        inner_opts,
                    )?;
                    Ok(inner.value * sp)
                },
                &breaks,
                opts,
            )?;
            Ok(q.value / (4.0 * PI))
        }
        _ => Err(Error::OracleUnavailable {
            what: "non-radial sphere average",
            distribution: format!("ambient dimension {d}"),
        }),
    }
}

/// `int_0^pi sin^m(psi) dpsi`.
fn sin_power_integral(m: usize) -> f64 {
    let m = m as f64;
    (PI.sqrt().ln() + ln_gamma((m + 1.0) / 2.0) - ln_gamma(m / 2.0 + 1.0)).exp()
}

/// Orthonormal frame with the first vector along `x` (or `e_3` at the origin).
fn frame3(x: &[f64], xn: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let e1 = if xn > 0.0 {
        [x[0] / xn, x[1] / xn, x[2] / xn]
    } else {
        [0.0, 0.0, 1.0]
    };
    let helper = if e1[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot = helper[0] * e1[0] + helper[1] * e1[1] + helper[2] * e1[2];
    let mut e2 = [helper[0] - dot * e1[0], helper[1] - dot * e1[1], helper[2] - dot * e1[2]];
    let n2 = (e2[0] * e2[0] + e2[1] * e2[1] + e2[2] * e2[2]).sqrt();
    e2.iter_mut().for_each(|v| *v /= n2);
    let e3 = [
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    ];
    (e1, e2, e3)
}

/// Fraction of the sphere of radius `rho` in `R^d` lying in the closed ball `B(x, r)`.
fn sphere_ball_fraction(d: usize, rho: f64, x: &[f64], r: f64) -> f64 {
    let xn = norm(x);
    if xn == 0.0 {
        return if r >= rho { 1.0 } else { 0.0 };
    }
    let c = (xn * xn + rho * rho - r * r) / (2.0 * rho * xn);
    spherical_cap_fraction(d, c)
}

fn unbounded_ball_prob(dim: usize, beta: f64, x: &[f64], r: f64) -> Result<Certified> {
    let a = dim as f64 - beta;
    let xn = norm(x);
    if xn == 0.0 {
        return Ok(Certified::exact(r.min(1.0).powf(a)));
    }
    if dim == 1 {
        // F(t) = P(X <= t) = (1 + sign(t) |t|^(1-beta)) / 2 on [-1, 1].
        let cdf = |t: f64| {
            let t = t.clamp(-1.0, 1.0);
            0.5 * (1.0 + t.signum() * t.abs().powf(a))
        };
        return Ok(Certified::exact(cdf(x[0] + r) - cdf(x[0] - r)));
    }
    // Directions at radius rho are uniform: integrate the cap fraction over u = rho^a.
    let inner = (r - xn).clamp(0.0, 1.0);
    let lo = (xn - r).abs().max(inner);
    let hi = (xn + r).min(1.0);
    let mut value = inner.powf(a);
    let mut error = 0.0;
    if hi > lo {
        let q = try_integrate(
            |u| Ok(sphere_ball_fraction(dim, u.powf(1.0 / a), x, r)),
            &[lo.powf(a), hi.powf(a)],
            QuadOptions::new(1e-13, 1e-11),
        )?;
        value += q.value;
        error += q.error;
    }
    Ok(Certified { value, error })
}

/// Volume of `B(x, r) ∩ [0, 1]^dim`.
fn cube_ball_volume(dim: usize, x: &[f64], r: f64) -> Result<Certified> {
    fn interval(c: f64, w: f64) -> f64 {
        ((c + w).min(1.0) - (c - w).max(0.0)).max(0.0)
    }
    fn slab(x: &[f64], r2: f64) -> Result<Certified> {
        if r2 <= 0.0 {
            return Ok(Certified::exact(0.0));
        }
        let w = r2.sqrt();
        if x.len() == 1 {
            return Ok(Certified::exact(interval(x[0], w)));
        }
        let (c, rest) = (x[0], &x[1..]);
        let lo = (c - w).max(0.0);
        let hi = (c + w).min(1.0);
        if lo >= hi {
            return Ok(Certified::exact(0.0));
        }
        // Kinks where the next slice starts touching the cube faces.
        let mut kinks = vec![c];
        for face in [0.0, 1.0] {
            let dist = (rest[0] - face).abs();
            if dist < w {
                let t = (r2 - dist * dist).sqrt();
                kinks.extend([c - t, c + t]);
            }
        }
        let breaks = breakpoints(lo, hi, kinks);
        let mut inner_err = 0.0f64;
        let q = try_integrate(
            |y| {
                let rem = r2 - (y - c) * (y - c);
                let v = slab(rest, rem)?;
                inner_err = inner_err.max(v.error);
                Ok(v.value)
            },
            &breaks,
            QuadOptions::new(1e-14, 1e-12).with_max_panels(4000),
        )?;
        Ok(Certified {
            value: q.value,
            error: q.error + inner_err * (hi - lo),
        })
    }
    if dim > 3 {
        return cube_ball_volume_mc(dim, x, r);
    }
    slab(x, r * r)
}

fn cube_ball_volume_mc(dim: usize, x: &[f64], r: f64) -> Result<Certified> {
    // Fixed-seed Monte Carlo; the 3-sigma binomial half-width is the certificate.
    let draws = 4_000_000usize;
    let mut rng = seeded(0x5eed_ba11);
    let mut hits = 0usize;
    let mut p = vec![0.0; dim];
    for _ in 0..draws {
        for v in p.iter_mut() {
            *v = rng.random::<f64>();
        }
        if dist2(&p, x) <= r * r {
            hits += 1;
        }
    }
    let value = hits as f64 / draws as f64;
    let error = 3.0 * (value * (1.0 - value) / draws as f64).sqrt();
    Ok(Certified { value, error })
}

/// Nested quadrature of `g(x - y)` over `y` in the unit cube, clipped to the
/// ball of radius `reach` about `x`.
fn cube_expectation(dim: usize, x: &[f64], f: &Integrand<'_>) -> Result<f64> {
    if dim > 3 {
        return Err(Error::OracleUnavailable {
            what: "non-Gaussian smoothed functional",
            distribution: format!("uniform_cube(d={dim})"),
        });
    }
    let opts = f.options();
    fn level(
        idx: usize,
        x: &[f64],
        diff: [f64; 3],
        used2: f64,
        f: &Integrand<'_>,
        opts: QuadOptions,
    ) -> Result<f64> {
        let dim = x.len();
        let rem = f.reach * f.reach - used2;
        if rem <= 0.0 {
            return Ok(0.0);
        }
        let w = rem.sqrt();
        let lo = (x[idx] - w).max(0.0);
        let hi = (x[idx] + w).min(1.0);
        if lo >= hi {
            return Ok(0.0);
        }
        let mut kinks = vec![x[idx]];
        for &k in &f.kinks {
            let t2 = k * k - used2;
            if t2 > 0.0 {
                let t = t2.sqrt();
                kinks.extend([x[idx] - t, x[idx] + t]);
            }
        }
        let breaks = breakpoints(lo, hi, kinks);
        let q = try_integrate(
            |y| {
                let mut dd = diff;
                dd[idx] = x[idx] - y;
                let u2 = used2 + dd[idx] * dd[idx];
                if idx + 1 == dim {
                    Ok(f.at(&dd[..dim]))
                } else {
                    level(idx + 1, x, dd, u2, f, opts)
                }
            },
            &breaks,
            opts,
        )?;
        Ok(q.value)
    }
    level(0, x, [0.0; 3], 0.0, f, opts)
}

/// `D^s p_h(x)` for the Gaussian kernel and the uniform cube: a product of
/// one-dimensional closed forms.
fn gaussian_cube_smoothed(s: &MultiIndex, h: f64, x: &[f64]) -> f64 {
    x.iter()
        .zip(s.components())
        .map(|(&xi, &m)| {
            let a = xi / h;
            let b = (xi - 1.0) / h;
            if m == 0 {
                normal_interval(b, a)
            } else {
                // int_0^1 h^-(1+m) phi^(m)((x-y)/h) dy = h^-m [phi^(m-1)(a) - phi^(m-1)(b)]
                h.powi(-(m as i32)) * (normal_pdf_deriv(m - 1, a) - normal_pdf_deriv(m - 1, b))
            }
        })
        .product()
}

/// `E|D^s K((x - X)/h)|^k` for the Gaussian kernel and the uniform cube.
fn gaussian_cube_moment(s: &MultiIndex, h: f64, k: f64, x: &[f64]) -> Result<f64> {
    let mut total = 1.0;
    for (&xi, &m) in x.iter().zip(s.components()) {
        let a = xi / h;
        let b = (xi - 1.0) / h;
        let factor = if m == 0 {
            // |phi(u)|^k = (2 pi)^(-(k-1)/2) k^(-1/2) phi(sqrt(k) u)
            let sk = k.sqrt();
            (2.0 * PI).powf(-(k - 1.0) / 2.0) / sk * normal_interval(sk * b, sk * a)
        } else {
            let lim = 40.0 / k.sqrt();
            let lo = b.max(-lim);
            let hi = a.min(lim);
            if lo >= hi {
                0.0
            } else {
                let zeros = hermite_zeros(m);
                let breaks = breakpoints(lo, hi, zeros);
                let q = try_integrate(
                    |u| Ok(normal_pdf_deriv(m, u).abs().powf(k)),
                    &breaks,
                    QuadOptions::new(1e-300, ORACLE_REL_TOL),
                )?;
                q.value
            }
        };
        total *= h * factor;
    }
    Ok(total)
}

fn hermite_zeros(m: u32) -> Vec<f64> {
    let bound = 2.0 * ((m + 1) as f64).sqrt() + 1.0;
    let steps = 4000;
    let mut zeros = Vec::new();
    let step = 2.0 * bound / steps as f64;
    let mut a = -bound;
    let mut fa = hermite_he(m, a);
    for i in 1..=steps {
        let b = -bound + i as f64 * step;
        let fb = hermite_he(m, b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = hermite_he(m, mid);
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    zeros
}
