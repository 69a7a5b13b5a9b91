//! Closed-form concentration bounds for `sup |p̂_h - p_h|` and kernel
//! covering numbers, plus greedy empirical covers to compare against.

use serde::{Deserialize, Serialize};

use crate::distributions::ReferenceDistribution;
use crate::error::{invalid, Error, Result};
use crate::grid::EvalGrid;
use crate::kernels::{Kernel, MultiIndex};
use crate::par::{map_range, Execution};
use crate::sample::Sample;

fn one() -> f64 {
    1.0
}

/// Every constant entering the deviation bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub n: f64,
    /// Smallest bandwidth of the ray, or the fixed bandwidth.
    pub l_n: f64,
    pub d: usize,
    pub d_vol: f64,
    #[serde(default)]
    pub eps: f64,
    pub delta: f64,
    /// VC scale `A`.
    #[serde(default = "one")]
    pub a: f64,
    /// VC dimension `nu`.
    #[serde(default)]
    pub nu: f64,
    /// `||K||_∞` or `||D^s K||_∞`.
    pub sup_norm: f64,
    /// `C_{k=2,P,K,eps}` (or `C_{s,P,K,eps}`).
    #[serde(default = "one")]
    pub sigma2_const: f64,
    #[serde(default)]
    pub s_order: u32,
    /// Domain radius `R`.
    #[serde(default = "one")]
    pub radius: f64,
    /// Lipschitz constant `M_K`.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    #[serde(default = "one")]
    pub universal_c: f64,
    /// The exact-dimension assumption holds, so `eps = 0` is allowed.
    #[serde(default)]
    pub dimension_exact: bool,
}

impl BoundSpec {
    /// A spec with the given sample size, bandwidth and dimensions; remaining
    /// constants at their defaults (`delta = 0.05`, unit constants).
    pub fn new(n: f64, l_n: f64, d: usize, d_vol: f64) -> Self {
        Self {
            n,
            l_n,
            d,
            d_vol,
            eps: 0.0,
            delta: 0.05,
            a: 1.0,
            nu: 0.0,
            sup_norm: 1.0,
            sigma2_const: 1.0,
            s_order: 0,
            radius: 1.0,
            lipschitz: None,
            universal_c: 1.0,
            dimension_exact: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0) {
            return Err(invalid("n", "must be at least 1"));
        }
        if !(self.l_n > 0.0) || !self.l_n.is_finite() {
            return Err(invalid("l_n", "must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", "must lie in (0, 1)"));
        }
        if self.d == 0 {
            return Err(invalid("d", "must be positive"));
        }
        if !(self.d_vol >= 0.0 && self.d_vol <= self.d as f64) {
            return Err(invalid("d_vol", "must lie in [0, d]"));
        }
        if !(self.eps >= 0.0) {
            return Err(invalid("eps", "must be nonnegative"));
        }
        let eps_ok = if self.eps == 0.0 {
            self.d_vol == 0.0 || self.dimension_exact
        } else {
            self.eps < self.d_vol
        };
        if !eps_ok {
            return Err(invalid(
                "eps",
                format!(
                    "eps = {} needs 0 < eps < d_vol = {}, or eps = 0 with d_vol = 0 or the exact-dimension assumption",
                    self.eps, self.d_vol
                ),
            ));
        }
        Ok(())
    }

    fn log_inv_l(&self) -> f64 {
        (1.0 / self.l_n).ln().max(0.0)
    }

    fn log_two_over_delta(&self) -> f64 {
        (2.0 / self.delta).ln()
    }

    /// `d + |s|`.
    pub fn bias_exponent(&self) -> f64 {
        (self.d as u32 + self.s_order) as f64
    }

    /// `2d + 2|s| - d_vol + eps`.
    pub fn variance_exponent(&self) -> f64 {
        2.0 * self.bias_exponent() - self.d_vol + self.eps
    }
}

/// Value of a bound with its individual terms (before the constant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub terms: Vec<f64>,
    pub value: f64,
}

/// Four-term upper bound on `sup_{h >= l_n, x} |D^s p̂_h(x) - D^s p_h(x)|`:
/// `C (L/(n l^a) + sqrt(L/(n l^b)) + sqrt(G/(n l^b)) + G/(n l^a))` with
/// `L = (log 1/l_n)_+`, `G = log(2/delta)`, `a = d + |s|`, `b = 2d + 2|s| - d_vol + eps`.
pub fn upper_bound_ray(spec: &BoundSpec) -> Result<BoundValue> {
    spec.validate()?;
    let l = spec.log_inv_l();
    let g = spec.log_two_over_delta();
    let small = spec.n * spec.l_n.powf(spec.bias_exponent());
    let var = spec.n * spec.l_n.powf(spec.variance_exponent());
    let terms = vec![l / small, (l / var).sqrt(), (g / var).sqrt(), g / small];
    let value = spec.universal_c * terms.iter().sum::<f64>();
    Ok(BoundValue { terms, value })
}

/// Simplified bound `C' sqrt((L + G)/(n l^b))` with its side-condition ratio
/// `(L + G)/(n l^(d_vol - eps))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedBound {
    pub value: f64,
    pub side_condition: f64,
}

pub fn upper_bound_simplified(spec: &BoundSpec) -> Result<SimplifiedBound> {
    spec.validate()?;
    let num = spec.log_inv_l() + spec.log_two_over_delta();
    let value = spec.universal_c * (num / (spec.n * spec.l_n.powf(spec.variance_exponent()))).sqrt();
    let side_condition = num / (spec.n * spec.l_n.powf(spec.d_vol - spec.eps));
    Ok(SimplifiedBound { value, side_condition })
}

/// Fixed-bandwidth bound for Lipschitz kernels on a bounded domain: the same
/// expression as [`upper_bound_simplified`] at `h_n = l_n`, with the
/// constant depending on `R` and `M_K` instead of the VC constants.
pub fn fixed_bandwidth_bound(spec: &BoundSpec) -> Result<SimplifiedBound> {
    if spec.lipschitz.is_none() {
        return Err(invalid("lipschitz", "fixed-bandwidth bound needs a Lipschitz kernel"));
    }
    upper_bound_simplified(spec)
}

/// Lower bound `C sqrt(1/(n h^(2d - d_vol)))` with `C = universal_c`.
pub fn lower_bound(spec: &BoundSpec) -> Result<f64> {
    spec.validate()?;
    if spec.d_vol <= 0.0 {
        return Err(invalid("d_vol", "the lower bound needs positive volume dimension"));
    }
    let exponent = 2.0 * spec.d as f64 - spec.d_vol;
    Ok(spec.universal_c * (1.0 / (spec.n * spec.l_n.powf(exponent))).sqrt())
}

/// `((2 R M / h + ||D^s K||_∞) / eta)^d`.
pub fn covering_bound(kernel: &Kernel, h: f64, radius: f64, eta: f64, s: &MultiIndex) -> Result<f64> {
    let sup = kernel.deriv_sup_norm(s)?;
    if !(eta > 0.0 && eta < sup) {
        return Err(invalid("eta", format!("must lie in (0, {sup}), got {eta}")));
    }
    if !(h > 0.0) {
        return Err(invalid("h", "must be positive"));
    }
    let m = kernel
        .deriv_lipschitz(s)?
        .ok_or_else(|| invalid("kernel", format!("{} kernel has no Lipschitz constant", kernel.name())))?;
    Ok(((2.0 * radius * m / h + sup) / eta).powi(kernel.dim() as i32))
}

/// Size of a greedy `eta`-net of `{D^s K((x - .)/h) : x in grid}` under the
/// empirical `L_2(Q)` metric. Functions are visited in grid order; each
/// becomes a center unless within `eta` of an earlier one.
pub fn empirical_covering(
    kernel: &Kernel,
    s: &MultiIndex,
    h: f64,
    x_grid: &EvalGrid,
    q_sample: &Sample,
    eta: f64,
    exec: Execution,
) -> Result<usize> {
    if !(eta > 0.0) {
        return Err(invalid("eta", "must be positive"));
    }
    if q_sample.is_empty() {
        return Err(invalid("q_sample", "must be nonempty"));
    }
    if x_grid.dim() != kernel.dim() || q_sample.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            found: if x_grid.dim() != kernel.dim() { x_grid.dim() } else { q_sample.dim() },
        });
    }
    kernel.deriv_sup_norm(s)?;
    let inv_h = 1.0 / h;
    let values: Vec<Vec<f64>> = map_range(exec, x_grid.len(), |k| {
        let x = x_grid.points().point(k);
        let mut u = vec![0.0; x.len()];
        q_sample
            .points()
            .map(|y| {
                for j in 0..u.len() {
                    u[j] = (x[j] - y[j]) * inv_h;
                }
                kernel.deriv_unchecked(s, &u)
            })
            .collect()
    });
    let budget = eta * eta * q_sample.len() as f64;
    let mut centers: Vec<usize> = Vec::new();
    for k in 0..values.len() {
        let row = &values[k];
        let covered = centers.iter().any(|&c| {
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(&values[c]) {
                acc += (a - b) * (a - b);
            }
            acc <= budget
        });
        if !covered {
            centers.push(k);
        }
    }
    Ok(centers.len())
}

/// Constants of the combined Talagrand and VC bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub n: f64,
    pub nu: f64,
    pub a: f64,
    /// Uniform bound `B` on the class.
    pub b: f64,
    /// Variance bound `sigma^2`.
    pub sigma2: f64,
    pub delta: f64,
    #[serde(default = "one")]
    pub universal_c: f64,
}

/// `C (nu B/n log(2AB/sigma) + sqrt(nu sigma^2/n log(2AB/sigma))
///    + sqrt(sigma^2 log(1/delta)/n) + B log(1/delta)/n)`.
pub fn combined_envelope(spec: &EnvelopeSpec) -> Result<BoundValue> {
    if !(spec.n >= 1.0) {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(spec.delta > 0.0 && spec.delta < 1.0) {
        return Err(invalid("delta", "must lie in (0, 1)"));
    }
    if !(spec.sigma2 > 0.0) || !(spec.b > 0.0) || !(spec.a > 0.0) || !(spec.nu >= 0.0) {
        return Err(invalid("envelope", "need sigma^2, B, A > 0 and nu >= 0"));
    }
    let sigma = spec.sigma2.sqrt();
    let arg = 2.0 * spec.a * spec.b / sigma;
    if arg <= 1.0 {
        return Err(invalid("sigma", format!("log argument 2AB/sigma = {arg} must exceed 1")));
    }
    let lg = arg.ln();
    let ld = (1.0 / spec.delta).ln();
    let n = spec.n;
    let terms = vec![
        spec.nu * spec.b / n * lg,
        (spec.nu * spec.sigma2 / n * lg).sqrt(),
        (spec.sigma2 * ld / n).sqrt(),
        spec.b * ld / n,
    ];
    let value = spec.universal_c * terms.iter().sum::<f64>();
    Ok(BoundValue { terms, value })
}

/// `sup_x E|D^s K((x - X)/h)|^2` over the grid and candidate points: the
/// variance bound `sigma^2` of the unnormalized class at bandwidth `h`.
pub fn sigma2_from_moments(
    dist: &ReferenceDistribution,
    kernel: &Kernel,
    s: &MultiIndex,
    x_grid: &EvalGrid,
    h: f64,
    exec: Execution,
) -> Result<f64> {
    let grid = moment_grid(dist, s, x_grid)?;
    let vals = map_range(exec, grid.len(), |k| dist.moment_k(kernel, grid.points().point(k), h, 2.0, s));
    let mut best = 0.0f64;
    for v in vals {
        best = best.max(v?);
    }
    Ok(best)
}

/// Points over which moment suprema are taken: the known maximizers when
/// available, otherwise the grid with the candidate points.
pub fn moment_grid(dist: &ReferenceDistribution, s: &MultiIndex, x_grid: &EvalGrid) -> Result<EvalGrid> {
    match dist.moment_maximizers(s) {
        Some(points) => EvalGrid::new(Sample::from_rows(&points)?, 0.0),
        None => Ok(x_grid.clone().with_points(&dist.candidate_points())),
    }
}

/// `max_h sigma^2(h) / h^(d_vol - eps)` over the given bandwidths: a
/// numerical stand-in for `C_{k=2,P,K,eps}`.
pub fn moment_constant(
    dist: &ReferenceDistribution,
    kernel: &Kernel,
    s: &MultiIndex,
    x_grid: &EvalGrid,
    hs: &[f64],
    eps: f64,
    exec: Execution,
) -> Result<f64> {
    let mut best = 0.0f64;
    for &h in hs {
        let v = sigma2_from_moments(dist, kernel, s, x_grid, h, exec)?;
        best = best.max(v / h.powf(dist.analytic_voldim() - eps));
    }
    Ok(best)
}

/// Every bound evaluated at one spec, for the JSON bound report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub spec: BoundSpec,
    pub upper_ray: BoundValue,
    pub simplified: SimplifiedBound,
    pub fixed_bandwidth: Option<SimplifiedBound>,
    pub lower: Option<f64>,
    pub envelope: Option<BoundValue>,
}

pub fn bound_report(spec: &BoundSpec, envelope: Option<&EnvelopeSpec>) -> Result<BoundReport> {
    Ok(BoundReport {
        spec: spec.clone(),
        upper_ray: upper_bound_ray(spec)?,
        simplified: upper_bound_simplified(spec)?,
        fixed_bandwidth: fixed_bandwidth_bound(spec).ok(),
        lower: lower_bound(spec).ok(),
        envelope: envelope.map(combined_envelope).transpose()?,
    })
}
