//! Reports, summary statistics, rate fits and their file formats.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use kdvol::bounds::BoundReport;
use kdvol::dimension::{AssumptionCheck, RadiusSweep};
use kdvol::fit::{log_log_fit, RateFit};
use kdvol::MultiIndex;

use crate::config::{Mode, Statistic, Target};
use crate::error::{HarnessError, Result};
use crate::json::{self, float};

/// Type-7 (linear interpolation) quantile of an unsorted slice.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: mean(values),
            median: quantile(values, 0.5),
            q10: quantile(values, 0.1),
            q90: quantile(values, 0.9),
        }
    }

    pub fn get(&self, statistic: Statistic) -> f64 {
        match statistic {
            Statistic::Mean => self.mean,
            Statistic::Median => self.median,
            Statistic::Q10 => self.q10,
            Statistic::Q90 => self.q90,
        }
    }
}

/// Replicate sup deviations at one `(n, h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationCell {
    pub n: usize,
    pub h: f64,
    /// `sup_x |p̂_h - p_h|` per replicate.
    pub values: Vec<f64>,
    /// `sup` over grid bandwidths `>= h` per replicate.
    pub ray_values: Vec<f64>,
    #[serde(flatten)]
    pub summary: Summary,
    pub ray_summary: Summary,
    /// `2 M δ / h^(d+|s|+1)`; absent for non-Lipschitz kernels.
    pub discretization_bound: Option<f64>,
}

impl DeviationCell {
    pub fn statistic(&self, statistic: Statistic, target: Target) -> f64 {
        match target {
            Target::Fixed => self.summary.get(statistic),
            Target::Ray => self.ray_summary.get(statistic),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub n: Option<usize>,
    pub h: Option<f64>,
    pub replicate: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub config_hash: String,
    pub mode: Mode,
    pub distribution: String,
    pub kernel: String,
    pub s: MultiIndex,
    pub dim: usize,
    pub analytic_voldim: f64,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub grid_points: usize,
    pub grid_spacing: f64,
    pub cells: Vec<DeviationCell>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    H,
    N,
}

impl DeviationReport {
    pub fn sample_sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.cells.iter().map(|c| c.n).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.cells.iter().map(|c| c.h).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Cells along an axis: the `h` sweep at sample size `at` or the `n`
    /// sweep at bandwidth `at`. Defaults: the largest `n` and the smallest `h`.
    pub fn along(&self, axis: Axis, at: Option<f64>) -> Vec<&DeviationCell> {
        let mut out: Vec<&DeviationCell> = match axis {
            Axis::H => {
                let n = at.map(|v| v as usize).or_else(|| self.sample_sizes().last().copied());
                self.cells.iter().filter(|c| Some(c.n) == n).collect()
            }
            Axis::N => {
                let h = at.or_else(|| self.bandwidths().first().copied());
                self.cells
                    .iter()
                    .filter(|c| h.is_some_and(|h| (c.h - h).abs() <= 1e-12 * h))
                    .collect()
            }
        };
        out.sort_by(|a, b| match axis {
            Axis::H => a.h.total_cmp(&b.h),
            Axis::N => a.n.cmp(&b.n),
        });
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        write_file(&dir.join("report.json"), &json::to_string(self))?;
        let mut dev = String::from("n,h,replicate,seed,sup,ray_sup\n");
        for c in &self.cells {
            for (r, (v, rv)) in c.values.iter().zip(&c.ray_values).enumerate() {
                dev.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    c.n,
                    float(c.h),
                    r,
                    self.seeds[r],
                    float(*v),
                    float(*rv)
                ));
            }
        }
        write_file(&dir.join("deviations.csv"), &dev)?;
        let mut sum = String::from("n,h,mean,median,q10,q90,ray_median,discretization_bound\n");
        for c in &self.cells {
            sum.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.n,
                float(c.h),
                float(c.summary.mean),
                float(c.summary.median),
                float(c.summary.q10),
                float(c.summary.q90),
                float(c.ray_summary.median),
                c.discretization_bound.map(float).unwrap_or_default()
            ));
        }
        write_file(&dir.join("summary.csv"), &sum)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("report.json");
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Report(format!("{}: {e}", path.display())))
    }
}

/// Log-log slope of a summary statistic along `axis`.
pub fn fit_rate(
    report: &DeviationReport,
    axis: Axis,
    statistic: Statistic,
    target: Target,
    at: Option<f64>,
) -> Result<RateFit> {
    let cells = report.along(axis, at);
    if cells.len() < 4 {
        return Err(HarnessError::Report(format!(
            "need at least 4 grid points along the {axis:?} axis, found {}",
            cells.len()
        )));
    }
    let xs: Vec<f64> = cells
        .iter()
        .map(|c| match axis {
            Axis::H => c.h,
            Axis::N => c.n as f64,
        })
        .collect();
    let ys: Vec<f64> = cells.iter().map(|c| c.statistic(statistic, target)).collect();
    Ok(log_log_fit(&xs, &ys)?)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoldimReport {
    pub config_hash: String,
    pub distribution: String,
    pub analytic_voldim: f64,
    pub sweep: RadiusSweep,
    pub window: [f64; 2],
    pub fit: RateFit,
    pub assumption: Option<AssumptionCheck>,
    pub box_dimension: Option<RateFit>,
    pub correlation_dimension: Option<RateFit>,
}

impl VoldimReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        write_file(&dir.join("voldim.json"), &json::to_string(self))?;
        let mut csv = Vec::new();
        self.sweep
            .write_csv(&mut csv)
            .map_err(|e| HarnessError::io(&dir.join("sweep.csv"), e))?;
        write_file(&dir.join("sweep.csv"), &String::from_utf8_lossy(&csv))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: usize,
    pub h: f64,
    /// `sup_x E[D^s K((x - X)/h)^2]` from the moment oracle.
    pub sigma2: f64,
    pub report: BoundReport,
    /// Talagrand and VC envelope rescaled to density units (divided by `h^(d+|s|)`).
    pub envelope_density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub config_hash: String,
    pub distribution: String,
    pub sigma2_const: f64,
    pub rows: Vec<BoundRow>,
}

impl BoundsReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        write_file(&dir.join("bounds.json"), &json::to_string(self))?;
        let mut csv = String::from("n,h,sigma2,upper_ray,simplified,side_condition,fixed_bandwidth,lower,envelope_density\n");
        for r in &self.rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.n,
                float(r.h),
                float(r.sigma2),
                float(r.report.upper_ray.value),
                float(r.report.simplified.value),
                float(r.report.simplified.side_condition),
                r.report.fixed_bandwidth.as_ref().map(|b| float(b.value)).unwrap_or_default(),
                r.report.lower.map(float).unwrap_or_default(),
                r.envelope_density.map(float).unwrap_or_default(),
            ));
        }
        write_file(&dir.join("bounds.csv"), &csv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringRow {
    pub kernel: String,
    pub h: f64,
    pub eta: f64,
    pub empirical: usize,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub config_hash: String,
    pub distribution: String,
    pub radius: f64,
    pub q_n: usize,
    pub rows: Vec<CoveringRow>,
    pub violations: usize,
}

impl CoveringReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        write_file(&dir.join("covering.json"), &json::to_string(self))?;
        let mut csv = String::from("kernel,h,eta,empirical,bound,holds\n");
        for r in &self.rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.kernel,
                float(r.h),
                float(r.eta),
                r.empirical,
                float(r.bound),
                r.holds
            ));
        }
        write_file(&dir.join("covering.csv"), &csv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub h: f64,
    /// `sup_x E|D^s K((x - X)/h)|^k` over the grid.
    pub sup_moment: f64,
    pub argmax_x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub config_hash: String,
    pub distribution: String,
    pub k: f64,
    pub analytic_voldim: f64,
    pub rows: Vec<MomentRow>,
    pub fit: Option<RateFit>,
}

impl MomentReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        write_file(&dir.join("moments.json"), &json::to_string(self))?;
        let mut csv = String::from("h,sup_moment\n");
        for r in &self.rows {
            csv.push_str(&format!("{},{}\n", float(r.h), float(r.sup_moment)));
        }
        write_file(&dir.join("moments.csv"), &csv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert!((quantile(&v, 0.1) - 1.4).abs() < 1e-15);
        let s = Summary::of(&v);
        assert!(s.q10 <= s.median && s.median <= s.q90);
    }
}
