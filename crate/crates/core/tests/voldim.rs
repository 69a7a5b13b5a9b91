use kdvol::dimension::{
    box_dimension_estimate, correlation_dimension_estimate, default_radii, default_window, empirical_counts,
    probability_window, radius_sweep, voldim_estimate, DEFAULT_PROBABILITY_BAND,
};
use kdvol::{BallSource, EvalGrid, Execution, ReferenceDistribution, Sample};

fn oracle_slope(dist: &ReferenceDistribution, step: f64) -> f64 {
    let grid = EvalGrid::for_distribution(dist, step).unwrap();
    let diam = dist.diameter();
    voldim_estimate(BallSource::Oracle(dist), &grid, &default_radii(diam), default_window(diam), Execution::Parallel)
        .unwrap()
        .slope
}

#[test]
fn oracle_dimension_of_builtins() {
    let cases = [
        (ReferenceDistribution::uniform_cube(1).unwrap(), 0.01, 1.0),
        (ReferenceDistribution::uniform_cube(2).unwrap(), 0.05, 2.0),
        (ReferenceDistribution::uniform_circle(1.0).unwrap(), 0.05, 1.0),
        (ReferenceDistribution::unbounded_ball(2, 1.0).unwrap(), 0.05, 1.0),
    ];
    for (dist, step, want) in cases {
        let slope = oracle_slope(&dist, step);
        assert!((slope - want).abs() < 0.1, "{}: {slope}", dist.label());
    }
}

#[test]
fn atoms_have_dimension_zero() {
    let dist = ReferenceDistribution::point_masses(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5]).unwrap();
    assert!(oracle_slope(&dist, 0.1).abs() < 1e-12);
}

#[test]
fn empirical_counts_are_invariant_under_rigid_motions() {
    let dist = ReferenceDistribution::uniform_circle(1.0).unwrap();
    let sample = dist.sample(4000, 21).unwrap();
    let grid = EvalGrid::for_distribution(&dist, 0.1).unwrap();
    let t = 1.1f64;
    let rot = [t.cos(), -t.sin(), t.sin(), t.cos()];
    let shift = [-2.0, 5.0];
    let moved_grid = EvalGrid::new(grid.points().affine(&rot, &shift), grid.spacing()).unwrap();
    let radii = [0.4, 0.2, 0.1, 0.05];
    let a = empirical_counts(&sample, &grid, &radii, Execution::Parallel);
    let b = empirical_counts(&sample.affine(&rot, &shift), &moved_grid, &radii, Execution::Parallel);
    // Points at distance exactly r may flip under rounding; none expected at this n.
    let diff: u64 = a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| x.abs_diff(*y)).sum();
    assert!(diff <= 2, "{diff}");
}

#[test]
fn empirical_sweep_converges_to_oracle() {
    let dist = ReferenceDistribution::uniform_cube(2).unwrap();
    let grid = EvalGrid::for_distribution(&dist, 0.05).unwrap();
    let radii = [0.2, 0.1];
    let oracle = radius_sweep(BallSource::Oracle(&dist), &grid, &radii, Execution::Parallel).unwrap();
    let mut errs = Vec::new();
    for n in [2_000, 200_000] {
        let sample = dist.sample(n, 3).unwrap();
        let emp = radius_sweep(BallSource::Empirical { sample: &sample, seed: Some(3) }, &grid, &radii, Execution::Parallel)
            .unwrap();
        errs.push((emp.sup_probs[1] / oracle.sup_probs[1] - 1.0).abs());
    }
    assert!(errs[1] < errs[0] && errs[1] < 0.05, "{errs:?}");
}

#[test]
fn probability_window_selects_band() {
    let dist = ReferenceDistribution::uniform_cube(2).unwrap();
    let grid = EvalGrid::for_distribution(&dist, 0.05).unwrap();
    let radii = default_radii(dist.diameter());
    let sweep = radius_sweep(BallSource::Oracle(&dist), &grid, &radii, Execution::Parallel).unwrap();
    let [lo, hi] = probability_window(&sweep, DEFAULT_PROBABILITY_BAND).unwrap();
    for (r, p) in sweep.radii.iter().zip(&sweep.sup_probs) {
        if *r >= lo && *r <= hi {
            assert!(*p >= 0.01 && *p <= 0.3);
        }
    }
    assert!(probability_window(&sweep, [0.5, 0.50001]).is_none());
}

#[test]
fn box_dimension_of_a_segment() {
    let rows: Vec<[f64; 2]> = (0..5000).map(|i| {
        let t = i as f64 / 4999.0;
        [0.3 + 0.6 * t, 0.1 + 0.8 * t]
    }).collect();
    let seg = Sample::from_rows(&rows).unwrap();
    let fit = box_dimension_estimate(&seg, &[0.1, 0.05, 0.02, 0.01, 0.005]).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.1, "{}", fit.slope);
}

#[test]
fn correlation_dimension_of_circle_and_square() {
    let radii = [0.02, 0.04, 0.08, 0.16];
    let circle = ReferenceDistribution::uniform_circle(1.0).unwrap().sample(3000, 1).unwrap();
    let square = ReferenceDistribution::uniform_cube(2).unwrap().sample(3000, 1).unwrap();
    let c = correlation_dimension_estimate(&circle, &radii).unwrap().slope;
    let s = correlation_dimension_estimate(&square, &radii).unwrap().slope;
    assert!((c - 1.0).abs() < 0.15, "{c}");
    assert!((s - 2.0).abs() < 0.25, "{s}");
}

#[test]
fn volume_dimension_does_not_exceed_box_dimension() {
    for dist in [
        ReferenceDistribution::uniform_circle(1.0).unwrap(),
        ReferenceDistribution::uniform_cube(2).unwrap(),
    ] {
        let sample = dist.sample(20_000, 6).unwrap();
        let boxdim = box_dimension_estimate(&sample, &[0.2, 0.1, 0.05, 0.025]).unwrap().slope;
        assert!(oracle_slope(&dist, 0.05) <= boxdim + 0.3, "{}", dist.label());
    }
}
