//! Volume-dimension estimation from ball-probability decay, and the box and
//! correlation dimensions used for comparison.

use std::collections::HashMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::distributions::ReferenceDistribution;
use crate::error::{invalid, Error, Result};
use crate::fit::{log_log_fit, RateFit, MIN_FIT_POINTS};
use crate::grid::EvalGrid;
use crate::par::{map_range, Execution};
use crate::sample::{dist2, Sample};

/// Sample sizes from which empirical ball counts use the bucket index.
pub const INDEX_THRESHOLD: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepSource {
    Oracle,
    Empirical { n: usize, seed: Option<u64> },
}

/// Where ball probabilities come from.
#[derive(Debug, Clone, Copy)]
pub enum BallSource<'a> {
    Oracle(&'a ReferenceDistribution),
    Empirical { sample: &'a Sample, seed: Option<u64> },
}

impl BallSource<'_> {
    fn dim(&self) -> usize {
        match self {
            BallSource::Oracle(d) => d.ambient_dim(),
            BallSource::Empirical { sample, .. } => sample.dim(),
        }
    }
}

/// `sup_x P(B(x, r_j))` over a decreasing list of radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusSweep {
    pub radii: Vec<f64>,
    pub sup_probs: Vec<f64>,
    pub source: SweepSource,
}

impl RadiusSweep {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "r,sup_prob")?;
        for (r, p) in self.radii.iter().zip(&self.sup_probs) {
            writeln!(w, "{r:.16e},{p:.16e}")?;
        }
        Ok(())
    }
}

/// `[2^-8, 2^-3] * diam`.
pub fn default_window(diameter: f64) -> [f64; 2] {
    [diameter / 256.0, diameter / 8.0]
}

/// Radii `diam * 2^(-k/4)` for `k = 8..=36`, decreasing; covers the default window.
pub fn default_radii(diameter: f64) -> Vec<f64> {
    (8..=36).map(|k| diameter * 2f64.powf(-(k as f64) / 4.0)).collect()
}

fn sorted_radii(radii: &[f64]) -> Result<Vec<f64>> {
    if radii.is_empty() {
        return Err(invalid("radii", "must be nonempty"));
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(invalid("radii", "must be positive and finite"));
    }
    let mut out = radii.to_vec();
    out.sort_by(|a, b| b.total_cmp(a));
    out.dedup();
    Ok(out)
}

/// Evaluates `sup_x P(B(x, r))` for each radius. The oracle source adds the
/// distribution's candidate points (atoms, singularities) to the grid.
pub fn radius_sweep(source: BallSource<'_>, x_grid: &EvalGrid, radii: &[f64], exec: Execution) -> Result<RadiusSweep> {
    let radii = sorted_radii(radii)?;
    if x_grid.dim() != source.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: x_grid.dim(),
        });
    }
    match source {
        BallSource::Oracle(dist) => {
            let grid = x_grid.clone().with_points(&dist.candidate_points());
            let rows = map_range(exec, grid.len(), |k| {
                let x = grid.points().point(k);
                radii
                    .iter()
                    .map(|&r| dist.ball_prob(x, r).map(|c| c.value))
                    .collect::<Result<Vec<f64>>>()
            });
            let mut sup = vec![0.0f64; radii.len()];
            for row in rows {
                for (s, v) in sup.iter_mut().zip(row?) {
                    *s = s.max(v);
                }
            }
            Ok(RadiusSweep {
                radii,
                sup_probs: enforce_monotone(sup),
                source: SweepSource::Oracle,
            })
        }
        BallSource::Empirical { sample, seed } => {
            let counts = empirical_counts(sample, x_grid, &radii, exec);
            let n = sample.len() as f64;
            let sup: Vec<f64> = (0..radii.len())
                .map(|j| counts.iter().map(|c| c[j]).max().unwrap_or(0) as f64 / n)
                .collect();
            Ok(RadiusSweep {
                radii,
                sup_probs: sup,
                source: SweepSource::Empirical {
                    n: sample.len(),
                    seed,
                },
            })
        }
    }
}

/// Quadrature oracles can be a few ulps off monotone; the true sup is monotone.
fn enforce_monotone(mut sup: Vec<f64>) -> Vec<f64> {
    for j in (0..sup.len().saturating_sub(1)).rev() {
        if sup[j] < sup[j + 1] {
            sup[j] = sup[j + 1];
        }
    }
    sup
}

/// Per grid point, the number of sample points in each closed ball
/// `B(x, r_j)` (radii decreasing).
pub fn empirical_counts(sample: &Sample, x_grid: &EvalGrid, radii: &[f64], exec: Execution) -> Vec<Vec<u64>> {
    let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let index = (sample.len() >= INDEX_THRESHOLD && sample.dim() <= 3).then(|| BucketIndex::new(sample, r_max));
    map_range(exec, x_grid.len(), |k| {
        let x = x_grid.points().point(k);
        let mut hist = vec![0u64; r2.len()];
        let mut add = |q: f64| {
            // Number of radii with q <= r_j^2: radii are decreasing.
            let m = r2.partition_point(|&t| q <= t);
            if m > 0 {
                hist[m - 1] += 1;
            }
        };
        match &index {
            Some(ix) => ix.for_each_within(x, r_max, |i| add(dist2(x, sample.point(i)))),
            None => sample.points().for_each(|p| add(dist2(x, p))),
        }
        // Points counted at the smallest radius they fall within; accumulate outward.
        for j in (0..hist.len().saturating_sub(1)).rev() {
            hist[j] += hist[j + 1];
        }
        hist
    })
}

/// Volume-dimension estimate: slope of `log sup_x P(B(x, r))` against
/// `log r` over the radii in `window`.
pub fn voldim_estimate(
    source: BallSource<'_>,
    x_grid: &EvalGrid,
    radii: &[f64],
    window: [f64; 2],
    exec: Execution,
) -> Result<RateFit> {
    let [lo, hi] = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid("window", format!("need 0 < r_min < r_max, got [{lo}, {hi}]")));
    }
    let tol = 1e-12;
    let inside: Vec<f64> = radii
        .iter()
        .copied()
        .filter(|&r| r >= lo * (1.0 - tol) && r <= hi * (1.0 + tol))
        .collect();
    if inside.len() < MIN_FIT_POINTS {
        return Err(invalid(
            "radii",
            format!("need at least {MIN_FIT_POINTS} radii inside [{lo}, {hi}], got {}", inside.len()),
        ));
    }
    let sweep = radius_sweep(source, x_grid, &inside, exec)?;
    fit_sweep(&sweep)
}

/// Default probability band for [`probability_window`].
pub const DEFAULT_PROBABILITY_BAND: [f64; 2] = [0.01, 0.3];

/// Window spanning the radii whose sup probability lies in `band`. For an
/// empirical sweep the lower end keeps the grid maximum of the counts away
/// from its small-count upward bias. `None` if fewer than four radii qualify.
pub fn probability_window(sweep: &RadiusSweep, band: [f64; 2]) -> Option<[f64; 2]> {
    let inside: Vec<f64> = sweep
        .radii
        .iter()
        .zip(&sweep.sup_probs)
        .filter(|(_, p)| **p >= band[0] && **p <= band[1])
        .map(|(r, _)| *r)
        .collect();
    if inside.len() < MIN_FIT_POINTS {
        return None;
    }
    let lo = inside.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inside.iter().copied().fold(0.0, f64::max);
    Some([lo, hi])
}

/// Log-log fit of a sweep.
pub fn fit_sweep(sweep: &RadiusSweep) -> Result<RateFit> {
    if let Some((r, _)) = sweep.radii.iter().zip(&sweep.sup_probs).find(|(_, p)| **p <= 0.0) {
        return Err(Error::ZeroProbability { radius: *r });
    }
    log_log_fit(&sweep.radii, &sweep.sup_probs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    /// `max_{x, r} P(B(x, r)) / r^nu`.
    pub max_ratio: f64,
    /// `max_x min_r P(B(x, r)) / r^nu`, a proxy for `sup_x liminf_r`.
    pub min_liminf_ratio: f64,
    /// Point attaining `min_liminf_ratio`.
    pub witness: Vec<f64>,
}

/// Checks boundedness of `P(B(x, r)) / r^nu` from above (uniformly in x)
/// and from below (at some x) over the given radii.
pub fn assumption_check(
    dist: &ReferenceDistribution,
    x_grid: &EvalGrid,
    radii: &[f64],
    nu: f64,
    exec: Execution,
) -> Result<AssumptionCheck> {
    if !(nu >= 0.0) {
        return Err(invalid("nu", "must be nonnegative"));
    }
    let radii = sorted_radii(radii)?;
    let grid = x_grid.clone().with_points(&dist.candidate_points());
    let rows = map_range(exec, grid.len(), |k| {
        let x = grid.points().point(k);
        radii
            .iter()
            .map(|&r| dist.ball_prob(x, r).map(|c| c.value / r.powf(nu)))
            .collect::<Result<Vec<f64>>>()
    });
    let mut max_ratio = 0.0f64;
    let mut best = f64::NEG_INFINITY;
    let mut witness = 0;
    for (k, row) in rows.into_iter().enumerate() {
        let row = row?;
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        max_ratio = row.iter().copied().fold(max_ratio, f64::max);
        if lo > best {
            best = lo;
            witness = k;
        }
    }
    Ok(AssumptionCheck {
        max_ratio,
        min_liminf_ratio: best,
        witness: grid.points().point(witness).to_vec(),
    })
}

/// Size of the greedy `delta`-cover: points in index order become centers
/// unless already within `delta` of an earlier center.
pub fn greedy_cover_size(sample: &Sample, delta: f64) -> usize {
    let d = sample.dim();
    let d2 = delta * delta;
    if d > 3 {
        let mut centers: Vec<usize> = Vec::new();
        for (i, p) in sample.points().enumerate() {
            if !centers.iter().any(|&c| dist2(sample.point(c), p) <= d2) {
                centers.push(i);
            }
        }
        return centers.len();
    }
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut count = 0;
    for (i, p) in sample.points().enumerate() {
        let key = cell_key(p, delta);
        let mut covered = false;
        visit_neighbors(key, d, |k| {
            if covered {
                return;
            }
            if let Some(list) = cells.get(&k) {
                covered = list.iter().any(|&c| dist2(sample.point(c), p) <= d2);
            }
        });
        if !covered {
            cells.entry(key).or_default().push(i);
            count += 1;
        }
    }
    count
}

/// Box-counting dimension: slope of `log N(delta)` against `log(1/delta)`.
pub fn box_dimension_estimate(sample: &Sample, deltas: &[f64]) -> Result<RateFit> {
    if deltas.len() < MIN_FIT_POINTS {
        return Err(invalid("deltas", format!("need at least {MIN_FIT_POINTS} scales")));
    }
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(invalid("deltas", "must be positive"));
    }
    let counts: Vec<f64> = deltas.iter().map(|&d| greedy_cover_size(sample, d) as f64).collect();
    let inv: Vec<f64> = deltas.iter().map(|d| 1.0 / d).collect();
    let mut fit = log_log_fit(&inv, &counts)?;
    fit.r_window = [
        deltas.iter().copied().fold(f64::INFINITY, f64::min),
        deltas.iter().copied().fold(0.0, f64::max),
    ];
    let first = sample.point(0);
    if sample.points().all(|p| p == first) {
        fit.warnings.push("degenerate sample: all points coincide".to_string());
    }
    Ok(fit)
}

/// Number of unordered pairs `i < j` with `|X_i - X_j| <= r` for each radius.
pub fn pair_counts(sample: &Sample, radii: &[f64]) -> Vec<u64> {
    let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let mut order: Vec<usize> = (0..r2.len()).collect();
    order.sort_by(|&a, &b| r2[a].total_cmp(&r2[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| r2[i]).collect();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let mut hist = vec![0u64; sorted.len() + 1];
    let mut add = |q: f64| {
        // First radius (ascending) with q <= r^2.
        let m = sorted.partition_point(|&t| t < q);
        hist[m] += 1;
    };
    if sample.dim() <= 3 {
        let index = BucketIndex::new(sample, r_max);
        for (i, p) in sample.points().enumerate() {
            index.for_each_within(p, r_max, |j| {
                if j > i {
                    add(dist2(p, sample.point(j)));
                }
            });
        }
    } else {
        for i in 0..sample.len() {
            for j in i + 1..sample.len() {
                add(dist2(sample.point(i), sample.point(j)));
            }
        }
    }
    let mut cumulative = vec![0u64; sorted.len()];
    let mut acc = 0;
    for m in 0..sorted.len() {
        acc += hist[m];
        cumulative[m] = acc;
    }
    let mut out = vec![0u64; radii.len()];
    for (m, &i) in order.iter().enumerate() {
        out[i] = cumulative[m];
    }
    out
}

/// Correlation dimension: slope of `log Ĉ_2(r)` against `log r`, where
/// `Ĉ_2` is the fraction of distinct pairs within distance `r`.
pub fn correlation_dimension_estimate(sample: &Sample, radii: &[f64]) -> Result<RateFit> {
    if sample.len() < 100 {
        return Err(invalid("sample", "need at least 100 points"));
    }
    let radii = sorted_radii(radii)?;
    let counts = pair_counts(sample, &radii);
    let pairs = (sample.len() as f64) * (sample.len() as f64 - 1.0) / 2.0;
    let mut warnings = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&r, &c) in radii.iter().zip(&counts) {
        if c == 0 {
            warnings.push(format!("no pairs within r = {r:e}; radius dropped"));
        } else {
            xs.push(r);
            ys.push(c as f64 / pairs);
        }
    }
    let mut fit = log_log_fit(&xs, &ys)?;
    fit.warnings = warnings;
    Ok(fit)
}

fn cell_key(p: &[f64], cell: f64) -> [i64; 3] {
    let mut key = [0i64; 3];
    for (k, v) in key.iter_mut().zip(p) {
        *k = (v / cell).floor() as i64;
    }
    key
}

fn visit_neighbors(key: [i64; 3], d: usize, mut f: impl FnMut([i64; 3])) {
    let span = |j: usize| if j < d { -1..=1 } else { 0..=0 };
    for a in span(0) {
        for b in span(1) {
            for c in span(2) {
                f([key[0] + a, key[1] + b, key[2] + c]);
            }
        }
    }
}

/// Uniform grid of cells of side `cell` over the sample (dimension <= 3).
/// Point lists inside each cell are in increasing index order.
pub(crate) struct BucketIndex {
    cell: f64,
    dim: usize,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl BucketIndex {
    pub(crate) fn new(sample: &Sample, cell: f64) -> Self {
        let cell = if cell > 0.0 { cell } else { 1.0 };
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in sample.points().enumerate() {
            cells.entry(cell_key(p, cell)).or_default().push(i);
        }
        Self {
            cell,
            dim: sample.dim(),
            cells,
        }
    }

    /// Calls `f(i)` for every point in a cell meeting the cube of half-width
    /// `r` about `x`; callers filter by exact distance.
    pub(crate) fn for_each_within(&self, x: &[f64], r: f64, mut f: impl FnMut(usize)) {
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for j in 0..self.dim {
            lo[j] = ((x[j] - r) / self.cell).floor() as i64;
            hi[j] = ((x[j] + r) / self.cell).floor() as i64;
        }
        for a in lo[0]..=hi[0] {
            for b in lo[1]..=hi[1] {
                for c in lo[2]..=hi[2] {
                    if let Some(list) = self.cells.get(&[a, b, c]) {
                        list.iter().for_each(|&i| f(i));
                    }
                }
            }
        }
    }
}
