//! Experiment orchestration for every mode.

use std::path::Path;

use kdvol::bounds::{
    bound_report, combined_envelope, covering_bound, empirical_covering, moment_grid, sigma2_from_moments, BoundSpec, EnvelopeSpec,
};
use kdvol::dimension::{
    assumption_check, box_dimension_estimate, correlation_dimension_estimate, default_radii, default_window,
    fit_sweep, probability_window, radius_sweep, BallSource, RadiusSweep, DEFAULT_PROBABILITY_BAND,
};
use kdvol::fit::log_log_fit;
use kdvol::kde::{sup_deviation_with_oracle, OracleTable};
use kdvol::par::{current_threads, map_range};
use kdvol::{BandwidthGrid, EvalGrid, Execution, Sample, SupDeviation};

use crate::config::{ExperimentConfig, Mode, Setup, VoldimSource};
use crate::error::{HarnessError, Result};
use crate::report::{
    fit_rate, Axis, BoundRow, BoundsReport, CellFailure, CoveringReport, CoveringRow, DeviationCell,
    DeviationReport, MomentReport, MomentRow, Summary, VoldimReport,
};

/// Report produced by [`run`], one variant per mode family.
#[derive(Debug, Clone, PartialEq)]
pub enum RunReport {
    Deviation(DeviationReport),
    Voldim(VoldimReport),
    Bounds(BoundsReport),
    Covering(CoveringReport),
    Moments(MomentReport),
}

impl RunReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        match self {
            RunReport::Deviation(r) => {
                r.write(dir)?;
                let axis = if r.mode == Mode::RateInN { Axis::N } else { Axis::H };
                if r.along(axis, None).len() >= 4 {
                    crate::plots::emit_plots(r, axis, Default::default(), dir)?;
                }
                Ok(())
            }
            RunReport::Voldim(r) => r.write(dir),
            RunReport::Bounds(r) => r.write(dir),
            RunReport::Covering(r) => r.write(dir),
            RunReport::Moments(r) => r.write(dir),
        }
    }
}

/// Runs the configured mode.
pub fn run(config: &ExperimentConfig, exec: Execution) -> Result<RunReport> {
    config.validate()?;
    Ok(match config.mode {
        Mode::RateInH | Mode::RateInN => RunReport::Deviation(simulate(config, exec)?),
        Mode::Voldim => RunReport::Voldim(voldim(config, exec)?),
        Mode::Bounds => RunReport::Bounds(bounds(config, exec)?),
        Mode::Covering => RunReport::Covering(covering(config, exec)?),
        Mode::MomentScaling => RunReport::Moments(moments(config, exec)?),
    })
}

/// Outcome of one replicate: per sample size, the deviation or the error.
type ReplicateResult = Vec<std::result::Result<SupDeviation, String>>;

/// Monte Carlo sup-deviation campaign over `n_list` × `h_grid`. Replicate
/// `r` draws `max(n_list)` points with seed `base_seed + r`; smaller sample
/// sizes use prefixes of that draw.
pub fn simulate(config: &ExperimentConfig, exec: Execution) -> Result<DeviationReport> {
    config.validate()?;
    let Setup {
        dist,
        kernel,
        s,
        x_grid,
    } = config.setup()?;
    let h_grid = config.bandwidths()?;
    let (oracle, oracle_failures) = OracleTable::compute_each(&dist, &kernel, &s, &h_grid, &x_grid, exec)?;
    let mut failures: Vec<CellFailure> = oracle_failures
        .into_iter()
        .map(|(h, e)| CellFailure {
            n: None,
            h: Some(h),
            replicate: None,
            message: format!("oracle: {e}"),
        })
        .collect();
    let mut n_list = config.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    let n_max = n_list[n_list.len() - 1];
    let seeds: Vec<u64> = (0..config.replicates as u64).map(|r| config.base_seed.wrapping_add(r)).collect();

    let replicate = |r: usize, inner: Execution| -> ReplicateResult {
        let full = match dist.sample(n_max, seeds[r]) {
            Ok(s) => s,
            Err(e) => return n_list.iter().map(|_| Err(e.to_string())).collect(),
        };
        n_list
            .iter()
            .map(|&n| {
                sup_deviation_with_oracle(&full.prefix(n), &kernel, &x_grid, &s, &oracle, inner)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let results: Vec<ReplicateResult> = if exec.is_parallel() && config.replicates >= current_threads() {
        map_range(exec, config.replicates, |r| replicate(r, Execution::Sequential))
    } else {
        (0..config.replicates).map(|r| replicate(r, exec)).collect()
    };

    let hs = oracle.bandwidths();
    let mut cells = Vec::new();
    for (ni, &n) in n_list.iter().enumerate() {
        let mut ok: Vec<&SupDeviation> = Vec::new();
        for (r, res) in results.iter().enumerate() {
            match &res[ni] {
                Ok(dev) => ok.push(dev),
                Err(message) => failures.push(CellFailure {
                    n: Some(n),
                    h: None,
                    replicate: Some(r),
                    message: message.clone(),
                }),
            }
        }
        if ok.is_empty() {
            continue;
        }
        for (hi, &h) in hs.iter().enumerate() {
            let values: Vec<f64> = ok.iter().map(|d| d.per_h[hi]).collect();
            let ray_values: Vec<f64> = ok.iter().map(|d| d.ray[hi]).collect();
            cells.push(DeviationCell {
                n,
                h,
                summary: Summary::of(&values),
                ray_summary: Summary::of(&ray_values),
                discretization_bound: ok[0].per_h_discretization[hi],
                values,
                ray_values,
            });
        }
    }
    Ok(DeviationReport {
        config_hash: config.hash(),
        mode: config.mode,
        distribution: dist.label(),
        kernel: kernel.name().to_string(),
        s,
        dim: dist.ambient_dim(),
        analytic_voldim: dist.analytic_voldim(),
        base_seed: config.base_seed,
        seeds,
        grid_points: x_grid.len(),
        grid_spacing: x_grid.spacing(),
        cells,
        failures,
    })
}

/// Volume-dimension sweep and fit, with the assumption check for the
/// oracle source and optional box and correlation dimensions for the
/// empirical source.
pub fn voldim(config: &ExperimentConfig, exec: Execution) -> Result<VoldimReport> {
    let setup = config.setup()?;
    let dist = &setup.dist;
    let spec = &config.voldim;
    let diam = dist.diameter();
    let radii = spec.radii.clone().unwrap_or_else(|| default_radii(diam));
    let default = default_window(diam);
    let (sweep, window, assumption, box_dimension, correlation_dimension) = match spec.source {
        VoldimSource::Oracle => {
            let sweep = radius_sweep(BallSource::Oracle(dist), &setup.x_grid, &radii, exec)?;
            let window = spec.window.unwrap_or(default);
            let nu = spec.nu.unwrap_or_else(|| dist.analytic_voldim());
            let inside = window_radii(&radii, window);
            let check = assumption_check(dist, &setup.x_grid, &inside, nu, exec)?;
            (sweep, window, Some(check), None, None)
        }
        VoldimSource::Empirical => {
            let n = spec
                .n
                .or_else(|| config.n_list.first().copied())
                .ok_or_else(|| HarnessError::Config("empirical voldim needs voldim.n or n_list".into()))?;
            let sample = dist.sample(n, config.base_seed)?;
            let source = BallSource::Empirical {
                sample: &sample,
                seed: Some(config.base_seed),
            };
            let sweep = radius_sweep(source, &setup.x_grid, &radii, exec)?;
            let band = spec.probability_band.unwrap_or(DEFAULT_PROBABILITY_BAND);
            let window = spec
                .window
                .or_else(|| probability_window(&sweep, band))
                .unwrap_or(default);
            let boxd = spec
                .box_deltas
                .as_ref()
                .map(|deltas| box_dimension_estimate(&sample, deltas))
                .transpose()?;
            let corr = spec
                .correlation_radii
                .as_ref()
                .map(|r| {
                    let m = spec.correlation_n.unwrap_or(2000).min(sample.len());
                    correlation_dimension_estimate(&sample.prefix(m), r)
                })
                .transpose()?;
            (sweep, window, None, boxd, corr)
        }
    };
    let fit = fit_sweep(&restrict(&sweep, window))?;
    Ok(VoldimReport {
        config_hash: config.hash(),
        distribution: dist.label(),
        analytic_voldim: dist.analytic_voldim(),
        sweep,
        window,
        fit,
        assumption,
        box_dimension,
        correlation_dimension,
    })
}

fn in_window(r: f64, [lo, hi]: [f64; 2]) -> bool {
    let tol = 1e-12;
    r >= lo * (1.0 - tol) && r <= hi * (1.0 + tol)
}

fn window_radii(radii: &[f64], window: [f64; 2]) -> Vec<f64> {
    radii.iter().copied().filter(|&r| in_window(r, window)).collect()
}

fn restrict(sweep: &RadiusSweep, window: [f64; 2]) -> RadiusSweep {
    let (radii, sup_probs) = sweep
        .radii
        .iter()
        .zip(&sweep.sup_probs)
        .filter(|(r, _)| in_window(**r, window))
        .map(|(r, p)| (*r, *p))
        .unzip();
    RadiusSweep {
        radii,
        sup_probs,
        source: sweep.source.clone(),
    }
}

/// Closed-form bounds at every `(n, h)`, with `sigma^2` and the moment
/// constant taken from the quadrature oracle.
pub fn bounds(config: &ExperimentConfig, exec: Execution) -> Result<BoundsReport> {
    let setup = config.setup()?;
    let Setup {
        dist,
        kernel,
        s,
        x_grid,
    } = &setup;
    let h_grid = config.bandwidths()?;
    let b = &config.bounds;
    let d = dist.ambient_dim();
    let order = s.order();
    let sup_norm = kernel.deriv_sup_norm(s)?;
    let sigma2: Vec<f64> = h_grid
        .values()
        .iter()
        .map(|&h| sigma2_from_moments(dist, kernel, s, x_grid, h, exec))
        .collect::<kdvol::Result<_>>()?;
    let sigma2_const = sigma2
        .iter()
        .zip(h_grid.values())
        .map(|(v, h)| v / h.powf(dist.analytic_voldim() - b.eps))
        .fold(0.0, f64::max);
    let mut rows = Vec::new();
    for &n in &config.n_list {
        for (hi, &h) in h_grid.values().iter().enumerate() {
            let mut spec = BoundSpec::new(n as f64, h, d, dist.analytic_voldim());
            spec.eps = b.eps;
            spec.delta = b.delta;
            spec.a = b.a;
            spec.nu = b.nu.unwrap_or(d as f64);
            spec.sup_norm = sup_norm;
            spec.sigma2_const = sigma2_const;
            spec.s_order = order;
            spec.radius = dist.domain_radius();
            spec.lipschitz = kernel.deriv_lipschitz(s)?;
            spec.universal_c = b.universal_c;
            spec.dimension_exact = b.dimension_exact;
            let envelope = EnvelopeSpec {
                n: n as f64,
                nu: spec.nu,
                a: b.a,
                b: sup_norm,
                sigma2: sigma2[hi],
                delta: b.delta,
                universal_c: b.universal_c,
            };
            let env_ok = combined_envelope(&envelope).is_ok();
            let report = bound_report(&spec, env_ok.then_some(&envelope))?;
            let envelope_density = report
                .envelope
                .as_ref()
                .map(|e| e.value / h.powi((d as u32 + order) as i32));
            rows.push(BoundRow {
                n,
                h,
                sigma2: sigma2[hi],
                report,
                envelope_density,
            });
        }
    }
    Ok(BoundsReport {
        config_hash: config.hash(),
        distribution: dist.label(),
        sigma2_const,
        rows,
    })
}

/// Greedy empirical covers of the kernel class against the closed-form
/// covering bound on an `(h, eta)` sweep.
pub fn covering(config: &ExperimentConfig, exec: Execution) -> Result<CoveringReport> {
    let setup = config.setup()?;
    let spec = &config.covering;
    let hs = match &spec.hs {
        Some(v) => v.clone(),
        None => config.bandwidths()?.values().to_vec(),
    };
    let fractions = spec
        .eta_fractions
        .clone()
        .unwrap_or_else(|| vec![0.1, 0.2, 0.3, 0.5, 0.7]);
    let q_n = spec.q_n.unwrap_or(200);
    let radius = spec.radius.unwrap_or_else(|| setup.dist.domain_radius());
    let q = setup.dist.sample(q_n, config.base_seed)?;
    // The class is indexed by centers in the ball of radius R.
    let inside: Vec<&[f64]> = setup
        .x_grid
        .points()
        .points()
        .filter(|x| x.iter().map(|v| v * v).sum::<f64>() <= radius * radius * (1.0 + 1e-12))
        .collect();
    if inside.is_empty() {
        return Err(HarnessError::Config(format!("no grid point lies within radius {radius}")));
    }
    let centers = EvalGrid::new(Sample::from_rows(&inside)?, setup.x_grid.spacing())?;
    let sup = setup.kernel.deriv_sup_norm(&setup.s)?;
    let mut rows = Vec::new();
    for &h in &hs {
        for &f in &fractions {
            let eta = f * sup;
            let bound = covering_bound(&setup.kernel, h, radius, eta, &setup.s)?;
            let empirical = empirical_covering(&setup.kernel, &setup.s, h, &centers, &q, eta, exec)?;
            rows.push(CoveringRow {
                kernel: setup.kernel.name().to_string(),
                h,
                eta,
                empirical,
                bound,
                holds: empirical as f64 <= bound,
            });
        }
    }
    let violations = rows.iter().filter(|r| !r.holds).count();
    Ok(CoveringReport {
        config_hash: config.hash(),
        distribution: setup.dist.label(),
        radius,
        q_n,
        rows,
        violations,
    })
}

/// `sup_x E|D^s K((x - X)/h)|^k` across the bandwidth grid and its log-log slope.
pub fn moments(config: &ExperimentConfig, exec: Execution) -> Result<MomentReport> {
    let setup = config.setup()?;
    let h_grid: BandwidthGrid = config.bandwidths()?;
    let k = config.moments.k;
    let grid = moment_grid(&setup.dist, &setup.s, &setup.x_grid)?;
    let mut rows = Vec::new();
    for &h in h_grid.values() {
        let vals = map_range(exec, grid.len(), |i| {
            setup.dist.moment_k(&setup.kernel, grid.points().point(i), h, k, &setup.s)
        });
        let mut best = 0.0f64;
        let mut arg = 0;
        for (i, v) in vals.into_iter().enumerate() {
            let v = v?;
            if v > best {
                best = v;
                arg = i;
            }
        }
        rows.push(MomentRow {
            h,
            sup_moment: best,
            argmax_x: grid.points().point(arg).to_vec(),
        });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let ms: Vec<f64> = rows.iter().map(|r| r.sup_moment).collect();
    let fit = if rows.len() >= 4 { Some(log_log_fit(&hs, &ms)?) } else { None };
    Ok(MomentReport {
        config_hash: config.hash(),
        distribution: setup.dist.label(),
        k,
        analytic_voldim: setup.dist.analytic_voldim(),
        rows,
        fit,
    })
}

/// Fits the rate of a stored deviation report along the axis of its mode.
pub fn fit_report(report: &DeviationReport, config: Option<&ExperimentConfig>) -> Result<kdvol::RateFit> {
    let axis = if report.mode == Mode::RateInN { Axis::N } else { Axis::H };
    let fit = config.map(|c| c.fit.clone()).unwrap_or_default();
    fit_rate(report, axis, fit.statistic, fit.target, None)
}
