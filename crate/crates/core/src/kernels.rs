//! Kernel functions on `R^d`, their partial derivatives, and the scalar
//! functionals (sup norm, Lipschitz constant, tail envelope, integrability
//! integral) that the deviation bounds consume.
//!
//! Every built-in kernel is radial, `K(u) = k(|u|)`, with a nonincreasing
//! profile `k`. Evaluation goes through the squared norm so that distance
//! computations can be shared across bandwidths.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::special::{hermite_he, normal_pdf_deriv, unit_ball_volume};

/// Derivative order `s = (s_1, ..., s_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(components: Vec<u32>) -> Self {
        Self(components)
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// Unit vector `e_j` added to `self`.
    pub fn bumped(&self, j: usize) -> Self {
        let mut s = self.0.clone();
        s[j] += 1;
        Self(s)
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total order `|s|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// User-supplied nonincreasing radial profile `k : [0, inf) -> [0, inf)`.
#[derive(Clone)]
pub struct RadialProfile {
    pub name: String,
    profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Radius beyond which the profile vanishes, if any.
    pub support: Option<f64>,
    pub lipschitz: Option<f64>,
}

impl RadialProfile {
    pub fn new<F>(name: impl Into<String>, profile: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            profile: Arc::new(profile),
            support: None,
            lipschitz: None,
        }
    }

    pub fn with_support(mut self, radius: f64) -> Self {
        self.support = Some(radius);
        self
    }

    pub fn with_lipschitz(mut self, constant: f64) -> Self {
        self.lipschitz = Some(constant);
        self
    }

    pub fn at(&self, r: f64) -> f64 {
        (self.profile)(r)
    }
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum KernelForm {
    Gaussian,
    Epanechnikov,
    Uniform,
    Triangular,
    CustomRadial(RadialProfile),
}

impl KernelForm {
    pub fn name(&self) -> &'static str {
        match self {
            KernelForm::Gaussian => "gaussian",
            KernelForm::Epanechnikov => "epanechnikov",
            KernelForm::Uniform => "uniform",
            KernelForm::Triangular => "triangular",
            KernelForm::CustomRadial(_) => "custom",
        }
    }
}

/// Derivative order reported for kernels that are differentiable to every order.
pub const UNBOUNDED_ORDER: u32 = u32::MAX;

/// A bounded radial kernel on `R^d`.
#[derive(Debug, Clone)]
pub struct Kernel {
    form: KernelForm,
    dim: usize,
    /// Normalizing constant multiplying the profile.
    scale: f64,
    sup_norm: f64,
    lipschitz: Option<f64>,
    deriv_support: u32,
}

impl Kernel {
    pub fn new(form: KernelForm, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        let vol = unit_ball_volume(dim);
        let d = dim as f64;
        let kernel = match &form {
            KernelForm::Gaussian => {
                let scale = (2.0 * PI).powf(-d / 2.0);
                Kernel {
                    scale,
                    sup_norm: scale,
                    lipschitz: Some(scale * (-0.5f64).exp()),
                    deriv_support: UNBOUNDED_ORDER,
                    form,
                    dim,
                }
            }
            KernelForm::Epanechnikov => {
                let scale = (d + 2.0) / (2.0 * vol);
                Kernel {
                    scale,
                    sup_norm: scale,
                    lipschitz: Some(2.0 * scale),
                    deriv_support: 0,
                    form,
                    dim,
                }
            }
            KernelForm::Uniform => {
                let scale = 1.0 / vol;
                Kernel {
                    scale,
                    sup_norm: scale,
                    lipschitz: None,
                    deriv_support: 0,
                    form,
                    dim,
                }
            }
            KernelForm::Triangular => {
                let scale = (d + 1.0) / vol;
                Kernel {
                    scale,
                    sup_norm: scale,
                    lipschitz: Some(scale),
                    deriv_support: 0,
                    form,
                    dim,
                }
            }
            KernelForm::CustomRadial(p) => {
                let sup = p.at(0.0);
                if !(sup.is_finite() && sup >= 0.0) {
                    return Err(invalid("profile", "profile(0) must be finite and nonnegative"));
                }
                Kernel {
                    scale: 1.0,
                    sup_norm: sup,
                    lipschitz: p.lipschitz,
                    deriv_support: 0,
                    form,
                    dim,
                }
            }
        };
        Ok(kernel)
    }

    pub fn gaussian(dim: usize) -> Self {
        Self::new(KernelForm::Gaussian, dim).expect("positive dimension")
    }

    pub fn epanechnikov(dim: usize) -> Self {
        Self::new(KernelForm::Epanechnikov, dim).expect("positive dimension")
    }

    pub fn uniform(dim: usize) -> Self {
        Self::new(KernelForm::Uniform, dim).expect("positive dimension")
    }

    pub fn triangular(dim: usize) -> Self {
        Self::new(KernelForm::Triangular, dim).expect("positive dimension")
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    pub fn name(&self) -> &'static str {
        self.form.name()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `||K||_inf`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// Global Lipschitz constant `M_K`; `None` for discontinuous kernels.
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    /// Largest total order `|s|` for which `D^s K` is implemented.
    pub fn deriv_support(&self) -> u32 {
        self.deriv_support
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.form, KernelForm::Gaussian)
    }

    /// Radius outside which the kernel vanishes.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.form {
            KernelForm::Gaussian => None,
            KernelForm::CustomRadial(p) => p.support,
            _ => Some(1.0),
        }
    }

    /// Radius beyond which `|D^s K|` is below `1e-16 * ||K||_inf` (the support
    /// radius for compact kernels).
    pub fn effective_radius(&self) -> f64 {
        match self.support_radius() {
            Some(r) => r,
            // exp(-r^2/2) * r^3 < 1e-16 for r = 9.5
            None if self.is_gaussian() => 9.5,
            None => 50.0,
        }
    }

    /// Kernel value as a function of the squared norm `q = |u|^2`.
    #[inline]
    pub fn eval_sq(&self, q: f64) -> f64 {
        match &self.form {
            KernelForm::Gaussian => self.scale * (-0.5 * q).exp(),
            KernelForm::Epanechnikov => {
                if q < 1.0 {
                    self.scale * (1.0 - q)
                } else {
                    0.0
                }
            }
            KernelForm::Uniform => {
                if q <= 1.0 {
                    self.scale
                } else {
                    0.0
                }
            }
            KernelForm::Triangular => {
                if q < 1.0 {
                    self.scale * (1.0 - q.sqrt())
                } else {
                    0.0
                }
            }
            KernelForm::CustomRadial(p) => p.at(q.sqrt()),
        }
    }

    /// Radial profile `k(r)` with `K(u) = k(|u|)`.
    pub fn profile(&self, r: f64) -> f64 {
        self.eval_sq(r * r)
    }

    fn check_dim(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: u.len(),
            });
        }
        Ok(())
    }

    fn check_order(&self, s: &MultiIndex) -> Result<()> {
        if s.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: s.dim(),
            });
        }
        if s.order() > self.deriv_support {
            return Err(Error::UnsupportedDerivative {
                kernel: self.name(),
                order: s.order(),
                supported: self.deriv_support,
            });
        }
        Ok(())
    }

    /// `K(u)`.
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        self.check_dim(u)?;
        Ok(self.eval_sq(u.iter().map(|x| x * x).sum()))
    }

    /// `D^s K(u)`. The zeroth derivative is exactly [`Kernel::eval`].
    pub fn deriv_eval(&self, s: &MultiIndex, u: &[f64]) -> Result<f64> {
        self.check_dim(u)?;
        self.check_order(s)?;
        Ok(self.deriv_unchecked(s, u))
    }

    /// `D^s K(u)` without argument validation.
    #[inline]
    pub(crate) fn deriv_unchecked(&self, s: &MultiIndex, u: &[f64]) -> f64 {
        if s.is_zero() {
            return self.eval_sq(u.iter().map(|x| x * x).sum());
        }
        // Only the Gaussian passes `check_order` with |s| > 0; it factorizes
        // into one-dimensional normal densities.
        u.iter()
            .zip(s.components())
            .map(|(&x, &m)| normal_pdf_deriv(m, x))
            .product()
    }

    /// `||D^s K||_inf`.
    pub fn deriv_sup_norm(&self, s: &MultiIndex) -> Result<f64> {
        self.check_order(s)?;
        if s.is_zero() {
            return Ok(self.sup_norm);
        }
        Ok(s.components().iter().map(|&m| gaussian_deriv_1d_sup(m, 0.0)).product())
    }

    /// A global Lipschitz constant of `D^s K`. For `|s| > 0` (Gaussian only)
    /// this is `sqrt(sum_j ||D^{s+e_j} K||_inf^2)`, which dominates the
    /// gradient norm everywhere.
    pub fn deriv_lipschitz(&self, s: &MultiIndex) -> Result<Option<f64>> {
        self.check_order(s)?;
        if s.is_zero() {
            return Ok(self.lipschitz);
        }
        let mut total = 0.0;
        for j in 0..self.dim {
            let g = self.deriv_sup_norm(&s.bumped(j))?;
            total += g * g;
        }
        Ok(Some(total.sqrt()))
    }

    /// `sup_{|x| >= t} |D^s K(x)|`.
    pub fn tail_sup(&self, t: f64, s: &MultiIndex) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid("t", "must be nonnegative"));
        }
        self.check_order(s)?;
        if s.is_zero() {
            // Nonincreasing radial profile: the sup over the shell sits on its
            // inner boundary.
            return Ok(self.profile(t).abs());
        }
        match self.dim {
            1 => Ok(gaussian_deriv_1d_sup(s.components()[0], t)),
            2 | 3 => Ok(gaussian_deriv_shell_sup(s, t)),
            d => Err(invalid(
                "s",
                format!("derivative tail envelope implemented for d <= 3, got d = {d}"),
            )),
        }
    }

    /// `int_0^inf t^(d_vol - 1) sup_{|x| >= t} |D^s K(x)|^k dt`.
    ///
    /// Uses the substitution `v = t^d_vol`, adaptive quadrature up to a cutoff
    /// `T` with `tail_sup(T)^k T^d_vol < 1e-12`, and a doubling-panel tail
    /// remainder that must itself converge.
    pub fn integrability_integral(&self, d_vol: f64, k: f64, s: &MultiIndex) -> Result<f64> {
        if !(d_vol > 0.0) {
            return Err(invalid("d_vol", "must be positive"));
        }
        if !(k > 0.0) {
            return Err(invalid("k", "must be positive"));
        }
        self.check_order(s)?;
        let integrand = |t: f64| -> f64 {
            self.tail_sup(t, s).map(|v| v.powf(k)).unwrap_or(f64::NAN)
        };
        let opts = QuadOptions::new(1e-300, 1e-11);
        let segment = |a: f64, b: f64| -> Result<f64> {
            // int_a^b t^(d_vol-1) g(t) dt = (1/d_vol) int_{a^dv}^{b^dv} g(v^(1/dv)) dv
            let (va, vb) = (a.powf(d_vol), b.powf(d_vol));
            let mut breaks = vec![va];
            if let Some(r) = self.support_radius() {
                let vr = r.powf(d_vol);
                if vr > va && vr < vb {
                    breaks.push(vr);
                }
            }
            breaks.push(vb);
            let q = integrate(|v| integrand(v.powf(1.0 / d_vol)), &breaks, opts)?;
            if !q.value.is_finite() {
                return Err(invalid("kernel", "tail envelope is not finite"));
            }
            Ok(q.value / d_vol)
        };

        if let Some(r) = self.support_radius() {
            // The envelope vanishes beyond the support.
            return segment(0.0, r);
        }
        let mut cutoff = 1.0;
        while integrand(cutoff) * cutoff.powf(d_vol) >= 1e-12 {
            cutoff *= 2.0;
            if cutoff > 1e6 {
                return Err(Error::Divergent {
                    upper: cutoff,
                    remainder: integrand(cutoff) * cutoff.powf(d_vol),
                });
            }
        }
        let body = segment(0.0, cutoff)?;
        let mut remainder = 0.0;
        let (mut a, mut b) = (cutoff, 2.0 * cutoff);
        loop {
            let piece = segment(a, b)?;
            remainder += piece;
            if piece <= 1e-14 * (body + remainder).abs() {
                break;
            }
            a = b;
            b *= 2.0;
            if b > 1e6 {
                return Err(Error::Divergent {
                    upper: b,
                    remainder: piece,
                });
            }
        }
        Ok(body + remainder)
    }
}

/// `sup_{|y| >= t} |phi^(m)(y)|` for the standard normal density `phi`.
///
/// Interior maxima of `|phi^(m)|` sit at the zeros of `He_{m+1}`, all of which
/// lie in `|y| <= 2 sqrt(m + 1)`.
fn gaussian_deriv_1d_sup(m: u32, t: f64) -> f64 {
    let f = |y: f64| normal_pdf_deriv(m, y).abs();
    let mut best = f(t);
    let bound = 2.0 * ((m + 1) as f64).sqrt() + 1.0;
    if t < bound {
        let steps = 4000;
        let he = |y: f64| hermite_he(m + 1, y);
        let h = (bound - t) / steps as f64;
        let mut a = t;
        let mut fa = he(a);
        for i in 1..=steps {
            let b = t + i as f64 * h;
            let fb = he(b);
            if fa == 0.0 {
                best = best.max(f(a));
            } else if fa * fb < 0.0 {
                let (mut lo, mut hi, mut flo) = (a, b, fa);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let fm = he(mid);
                    if (fm < 0.0) == (flo < 0.0) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                best = best.max(f(0.5 * (lo + hi)));
            }
            a = b;
            fa = fb;
        }
    }
    best
}

/// Shell maximization of `|D^s K|` over `|x| >= t` for the Gaussian in
/// dimension 2 or 3: a polar grid search followed by compass refinement.
fn gaussian_deriv_shell_sup(s: &MultiIndex, t: f64) -> f64 {
    let comps = s.components();
    let value = |x: &[f64]| -> f64 {
        x.iter()
            .zip(comps)
            .map(|(&xi, &m)| normal_pdf_deriv(m, xi))
            .product::<f64>()
            .abs()
    };
    // Unconstrained maximizers are products of one-dimensional maximizers.
    let per_axis: Vec<(f64, f64)> = comps
        .iter()
        .map(|&m| {
            let peak = gaussian_deriv_1d_sup(m, 0.0);
            let arg = argmax_1d(m);
            (peak, arg)
        })
        .collect();
    let global: f64 = per_axis.iter().map(|p| p.0).product();
    let arg_norm = per_axis.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
    if arg_norm >= t {
        return global;
    }
    let dim = comps.len();
    let r_max = t + 12.0;
    let radial_steps = ((r_max - t) / 0.02).ceil() as usize;
    let ang = 180usize;
    let mut best = 0.0f64;
    let mut best_x = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    for ir in 0..=radial_steps {
        let r = t + (r_max - t) * ir as f64 / radial_steps as f64;
        for ia in 0..ang {
            let phi = 2.0 * PI * ia as f64 / ang as f64;
            let polar_steps = if dim == 3 { ang / 2 } else { 1 };
            for ip in 0..polar_steps {
                if dim == 3 {
                    let theta = PI * (ip as f64 + 0.5) / polar_steps as f64;
                    x[0] = r * theta.sin() * phi.cos();
                    x[1] = r * theta.sin() * phi.sin();
                    x[2] = r * theta.cos();
                } else {
                    x[0] = r * phi.cos();
                    x[1] = r * phi.sin();
                }
                let v = value(&x);
                if v > best {
                    best = v;
                    best_x.copy_from_slice(&x);
                }
            }
        }
        if dim == 3 && ir > 150 {
            // Radial profile has long decayed; stop refining the coarse 3-D grid.
            break;
        }
    }
    // Compass search, projecting back onto the shell.
    let mut step = 0.05;
    while step > 1e-10 {
        let mut improved = false;
        for j in 0..dim {
            for sign in [-1.0, 1.0] {
                let mut y = best_x.clone();
                y[j] += sign * step;
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < t && norm > 0.0 {
                    y.iter_mut().for_each(|v| *v *= t / norm);
                }
                let v = value(&y);
                if v > best {
                    best = v;
                    best_x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Largest-magnitude maximizer of `|phi^(m)|` on `[0, inf)`.
fn argmax_1d(m: u32) -> f64 {
    let peak = gaussian_deriv_1d_sup(m, 0.0);
    let f = |y: f64| normal_pdf_deriv(m, y).abs();
    let mut arg = 0.0;
    let steps = 20_000;
    let bound = 2.0 * ((m + 1) as f64).sqrt() + 1.0;
    for i in 0..=steps {
        let y = bound * i as f64 / steps as f64;
        if f(y) >= peak * (1.0 - 1e-6) {
            arg = y;
        }
    }
    arg
}
