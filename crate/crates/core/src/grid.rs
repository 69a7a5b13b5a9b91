//! Evaluation grids over `X` and bandwidth grids over the ray `[l_n, h_max]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionKind, ReferenceDistribution};
use crate::error::{invalid, Result};
use crate::sample::Sample;

/// Product-lattice layout of the leading grid points, row-major with the last
/// axis fastest. `selection` lists the retained flat indices when the grid is
/// a masked lattice (e.g. the lattice points inside a ball).
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub axes: Vec<Vec<f64>>,
    pub selection: Option<Vec<usize>>,
}

impl Lattice {
    pub fn full_len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn len(&self) -> usize {
        match &self.selection {
            Some(s) => s.len(),
            None => self.full_len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Finite subset of `X` with a covering radius: every point of `X` lies within
/// `spacing` of some grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    points: Sample,
    spacing: f64,
    lattice: Option<Lattice>,
}

impl EvalGrid {
    /// Grid from explicit points with a caller-supplied covering radius.
    pub fn new(points: Sample, spacing: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("points", "grid must be nonempty"));
        }
        if !(spacing >= 0.0) || !spacing.is_finite() {
            return Err(invalid("spacing", "must be finite and nonnegative"));
        }
        Ok(Self {
            points,
            spacing,
            lattice: None,
        })
    }

    fn from_lattice(axes: Vec<Vec<f64>>, keep: impl Fn(&[f64]) -> bool, spacing: f64) -> Self {
        let dim = axes.len();
        let total: usize = axes.iter().map(Vec::len).product();
        let mut points = Sample::with_capacity(dim, total);
        let mut selection = Vec::new();
        let mut p = vec![0.0; dim];
        for flat in 0..total {
            let mut rem = flat;
            for j in (0..dim).rev() {
                let len = axes[j].len();
                p[j] = axes[j][rem % len];
                rem /= len;
            }
            if keep(&p) {
                points.push(&p);
                selection.push(flat);
            }
        }
        let selection = (selection.len() != total).then_some(selection);
        Self {
            points,
            spacing,
            lattice: Some(Lattice { axes, selection }),
        }
    }

    /// Regular lattice on `[0, 1]^dim` with step at most `step`.
    pub fn cube(dim: usize, step: f64) -> Result<Self> {
        check_step(step)?;
        let cells = (1.0 / step).ceil() as usize;
        let axis: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
        let actual = 1.0 / cells as f64;
        Ok(Self::from_lattice(vec![axis; dim], |_| true, 0.5 * actual * (dim as f64).sqrt()))
    }

    /// Lattice points of step at most `step` inside the closed ball of the
    /// given radius about the origin. The origin is always a grid point.
    pub fn ball(dim: usize, radius: f64, step: f64) -> Result<Self> {
        check_step(step)?;
        let cells = (radius / step).ceil() as usize;
        let actual = radius / cells as f64;
        let axis: Vec<f64> = (0..=2 * cells).map(|i| (i as f64 - cells as f64) * actual).collect();
        let r2 = radius * radius * (1.0 + 1e-12);
        // A point of the ball is within one cell diagonal of a lattice point
        // inside the ball (move towards the origin corner of its cell).
        Ok(Self::from_lattice(
            vec![axis; dim],
            |p| p.iter().map(|v| v * v).sum::<f64>() <= r2,
            actual * (dim as f64).sqrt(),
        ))
    }

    /// Equally spaced angles on the circle, arc gap at most `step`.
    pub fn circle(radius: f64, step: f64) -> Result<Self> {
        check_step(step)?;
        let count = ((2.0 * PI * radius / step).ceil() as usize).max(3);
        let mut points = Sample::with_capacity(2, count);
        for i in 0..count {
            let t = 2.0 * PI * i as f64 / count as f64;
            points.push(&[radius * t.cos(), radius * t.sin()]);
        }
        let spacing = 2.0 * radius * (PI / (2.0 * count as f64)).sin();
        Self::new(points, spacing)
    }

    /// Hyperspherical-coordinate grid on the `m`-sphere of the given radius:
    /// polar rings at angular gap `step / radius`, each ring gridded
    /// recursively. Covering radius `m * step / 2`.
    pub fn sphere(m: usize, radius: f64, step: f64) -> Result<Self> {
        check_step(step)?;
        if m == 0 {
            return Err(invalid("m", "sphere dimension must be positive"));
        }
        let delta = (step / radius).min(PI / 2.0);
        let mut unit = Vec::new();
        sphere_directions(m, delta, &mut unit);
        let mut points = Sample::with_capacity(m + 1, unit.len());
        for dir in &unit {
            let p: Vec<f64> = dir.iter().map(|v| v * radius).collect();
            points.push(&p);
        }
        Self::new(points, radius * m as f64 * delta / 2.0)
    }

    /// Default grid on the support of `dist` with step `step`.
    pub fn for_distribution(dist: &ReferenceDistribution, step: f64) -> Result<Self> {
        match dist.kind() {
            DistributionKind::UniformCube { dim } => Self::cube(*dim, step),
            DistributionKind::UnboundedBall { dim, .. } => Self::ball(*dim, 1.0, step),
            DistributionKind::UniformCircle { radius } => Self::circle(*radius, step),
            DistributionKind::UniformSphere {
                manifold_dim,
                radius,
            } => Self::sphere(*manifold_dim, *radius, step),
            DistributionKind::PointMasses { locations, .. } => Self::new(Sample::from_rows(locations)?, 0.0),
            DistributionKind::Mixture { .. } => {
                let grids = dist
                    .components()
                    .iter()
                    .map(|c| Self::for_distribution(c, step))
                    .collect::<Result<Vec<_>>>()?;
                let mut points = Sample::with_capacity(dist.ambient_dim(), 0);
                let mut spacing = 0.0f64;
                for g in &grids {
                    for p in g.points.points() {
                        points.push(p);
                    }
                    spacing = spacing.max(g.spacing);
                }
                Self::new(points, spacing)
            }
        }
    }

    /// Append points (e.g. atoms, singularities) that the lattice may miss.
    /// The covering radius is unchanged.
    pub fn with_points(mut self, extra: &[Vec<f64>]) -> Self {
        for p in extra {
            if !self.points.points().any(|q| q == p.as_slice()) {
                self.points.push(p);
            }
        }
        self
    }

    pub fn points(&self) -> &Sample {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Covering radius `delta_x`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Product-lattice layout of the first `lattice().len()` points.
    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(invalid("step", "must be positive and finite"));
    }
    Ok(())
}

fn sphere_directions(m: usize, delta: f64, out: &mut Vec<Vec<f64>>) {
    if m == 1 {
        let count = ((2.0 * PI / delta).ceil() as usize).max(3);
        for i in 0..count {
            let t = 2.0 * PI * i as f64 / count as f64;
            out.push(vec![t.cos(), t.sin()]);
        }
        return;
    }
    let rings = (PI / delta).ceil() as usize;
    let step = PI / rings as f64;
    for i in 0..=rings {
        let theta = i as f64 * step;
        let (s, c) = theta.sin_cos();
        if i == 0 || i == rings || s < 1e-12 {
            let mut p = vec![0.0; m + 1];
            p[0] = c.signum();
            out.push(p);
            continue;
        }
        let mut sub = Vec::new();
        sphere_directions(m - 1, (step / s).min(PI / 2.0), &mut sub);
        for d in sub {
            let mut p = Vec::with_capacity(m + 1);
            p.push(c);
            p.extend(d.iter().map(|v| v * s));
            out.push(p);
        }
    }
}

/// How a bandwidth grid is specified in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthSpec {
    Values { values: Vec<f64> },
    LogSpaced {
        l_n: f64,
        h_max: f64,
        #[serde(default)]
        count: Option<usize>,
        #[serde(default)]
        per_decade: Option<f64>,
    },
}

pub const DEFAULT_PER_DECADE: f64 = 16.0;

/// Increasing list of bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthGrid {
    values: Vec<f64>,
}

impl BandwidthGrid {
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("h_grid", "must be nonempty"));
        }
        if values.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(invalid("h_grid", "bandwidths must be positive and finite"));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(Self { values })
    }

    pub fn single(h: f64) -> Result<Self> {
        Self::from_values(vec![h])
    }

    /// `count` log-spaced values from `l_n` to `h_max` inclusive.
    pub fn log_spaced(l_n: f64, h_max: f64, count: usize) -> Result<Self> {
        if !(l_n > 0.0) || !(h_max >= l_n) {
            return Err(invalid("h_grid", format!("need 0 < l_n <= h_max, got [{l_n}, {h_max}]")));
        }
        if count == 0 {
            return Err(invalid("h_grid", "count must be positive"));
        }
        if count == 1 || h_max == l_n {
            return Self::single(l_n);
        }
        let (a, b) = (l_n.ln(), h_max.ln());
        let mut values: Vec<f64> = (0..count)
            .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
            .collect();
        values[0] = l_n;
        values[count - 1] = h_max;
        Self::from_values(values)
    }

    /// Log-spaced with about `per_decade` points per factor of ten.
    pub fn per_decade(l_n: f64, h_max: f64, per_decade: f64) -> Result<Self> {
        if !(per_decade > 0.0) {
            return Err(invalid("per_decade", "must be positive"));
        }
        let decades = (h_max / l_n).log10().max(0.0);
        let count = ((per_decade * decades).ceil() as usize + 1).max(2);
        Self::log_spaced(l_n, h_max, count)
    }

    pub fn from_spec(spec: &BandwidthSpec) -> Result<Self> {
        match spec {
            BandwidthSpec::Values { values } => Self::from_values(values.clone()),
            BandwidthSpec::LogSpaced {
                l_n,
                h_max,
                count: Some(count),
                ..
            } => Self::log_spaced(*l_n, *h_max, *count),
            BandwidthSpec::LogSpaced {
                l_n,
                h_max,
                per_decade,
                ..
            } => Self::per_decade(*l_n, *h_max, per_decade.unwrap_or(DEFAULT_PER_DECADE)),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn l_n(&self) -> f64 {
        self.values[0]
    }

    pub fn h_max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::dist2;

    fn covering_check(grid: &EvalGrid, probes: &[Vec<f64>]) {
        for p in probes {
            let best = grid
                .points()
                .points()
                .map(|q| dist2(p, q))
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            assert!(best <= grid.spacing() * (1.0 + 1e-12), "probe {p:?} at {best} > {}", grid.spacing());
        }
    }

    #[test]
    fn cube_lattice() {
        let g = EvalGrid::cube(2, 0.1).unwrap();
        assert_eq!(g.len(), 121);
        assert!((g.spacing() - 0.05 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(g.points().point(1), &[0.0, 0.1]);
        assert_eq!(g.lattice().unwrap().len(), 121);
        let probes: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.137) % 1.0, (i as f64 * 0.291) % 1.0]).collect();
        covering_check(&g, &probes);
    }

    #[test]
    fn ball_lattice_contains_origin_and_covers() {
        let g = EvalGrid::ball(2, 1.0, 0.1).unwrap();
        assert!(g.points().points().any(|p| p == [0.0, 0.0]));
        assert!(g.points().points().all(|p| p[0] * p[0] + p[1] * p[1] <= 1.0 + 1e-12));
        let lat = g.lattice().unwrap();
        assert_eq!(lat.len(), g.len());
        let probes: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.7;
                let r = ((i as f64 * 0.013) % 1.0).sqrt();
                vec![r * t.cos(), r * t.sin()]
            })
            .collect();
        covering_check(&g, &probes);
    }

    #[test]
    fn circle_and_sphere_cover() {
        let g = EvalGrid::circle(1.0, 0.05).unwrap();
        let probes: Vec<Vec<f64>> = (0..100).map(|i| vec![(i as f64 * 0.37).cos(), (i as f64 * 0.37).sin()]).collect();
        covering_check(&g, &probes);
        let s = EvalGrid::sphere(2, 2.0, 0.2).unwrap();
        assert!(s.points().points().all(|p| (p.iter().map(|v| v * v).sum::<f64>().sqrt() - 2.0).abs() < 1e-12));
        let probes: Vec<Vec<f64>> = (0..300)
            .map(|i| {
                let z = -1.0 + 2.0 * ((i as f64 * 0.618_034) % 1.0);
                let t = i as f64 * 2.4;
                let r = (1.0 - z * z).sqrt();
                vec![2.0 * r * t.cos(), 2.0 * r * t.sin(), 2.0 * z]
            })
            .collect();
        covering_check(&s, &probes);
    }

    #[test]
    fn bandwidth_grids() {
        let g = BandwidthGrid::log_spaced(0.05, 0.4, 12).unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(g.l_n(), 0.05);
        assert_eq!(g.h_max(), 0.4);
        assert!(g.values().windows(2).all(|w| w[0] < w[1]));
        let d = BandwidthGrid::per_decade(0.01, 1.0, 16.0).unwrap();
        assert_eq!(d.len(), 33);
        assert_eq!(BandwidthGrid::single(0.2).unwrap().values(), &[0.2]);
        assert!(BandwidthGrid::from_values(vec![0.1, -1.0]).is_err());
    }
}
