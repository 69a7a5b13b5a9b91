use kdvol::{
    kde_deriv_eval, kde_eval, kde_eval_multi, kde_grid, sup_deviation, BandwidthGrid, EvalGrid, Execution, Kernel,
    MultiIndex, ReferenceDistribution, Sample,
};

fn assert_close(a: f64, b: f64, rel: f64) {
    assert!((a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300) + 1e-300, "{a} vs {b}");
}

fn grid_matches_direct(dist: &ReferenceDistribution, step: f64, kernel: &Kernel, s: &MultiIndex) {
    let sample = dist.sample(3000, 11).unwrap();
    let grid = EvalGrid::for_distribution(dist, step).unwrap();
    let hs = [0.03, 0.1, 0.35];
    let table = kde_grid(&sample, kernel, s, &hs, &grid, Execution::Parallel).unwrap();
    for k in (0..grid.len()).step_by(7) {
        let x = grid.points().point(k);
        for (hi, &h) in hs.iter().enumerate() {
            let direct = kde_deriv_eval(&sample, kernel, s, h, x).unwrap();
            let scale = kernel.deriv_sup_norm(s).unwrap() / h.powi((kernel.dim() as u32 + s.order()) as i32);
            assert!(
                (table[hi][k] - direct).abs() <= 1e-12 * scale,
                "{} {} h={h}: {} vs {direct}",
                dist.label(),
                kernel.name(),
                table[hi][k]
            );
        }
    }
}

#[test]
fn gaussian_lattice_path_matches_direct_sum() {
    for d in [1, 2, 3] {
        let dist = ReferenceDistribution::uniform_cube(d).unwrap();
        let step = [0.02, 0.06, 0.2][d - 1];
        grid_matches_direct(&dist, step, &Kernel::gaussian(d), &MultiIndex::zero(d));
    }
    let dist = ReferenceDistribution::uniform_cube(2).unwrap();
    for s in [vec![1, 0], vec![0, 2], vec![1, 1]] {
        grid_matches_direct(&dist, 0.06, &Kernel::gaussian(2), &MultiIndex::new(s));
    }
}

#[test]
fn masked_and_ring_grids_match_direct_sum() {
    let circle = ReferenceDistribution::uniform_circle(1.0).unwrap();
    let ball = ReferenceDistribution::unbounded_ball(2, 1.0).unwrap();
    for kernel in [Kernel::gaussian(2), Kernel::epanechnikov(2), Kernel::triangular(2)] {
        grid_matches_direct(&circle, 0.1, &kernel, &MultiIndex::zero(2));
        grid_matches_direct(&ball, 0.1, &kernel, &MultiIndex::zero(2));
    }
}

#[test]
fn multi_bandwidth_equals_single_evaluations() {
    let dist = ReferenceDistribution::uniform_circle(1.0).unwrap();
    let sample = dist.sample(2000, 3).unwrap();
    let hs = [0.02, 0.05, 0.2, 0.6];
    for kernel in [Kernel::gaussian(2), Kernel::epanechnikov(2), Kernel::uniform(2)] {
        for x in [[0.0, 1.0], [0.3, -0.4], [2.0, 2.0]] {
            let multi = kde_eval_multi(&sample, &kernel, &MultiIndex::zero(2), &hs, &x).unwrap();
            for (m, &h) in multi.iter().zip(&hs) {
                assert_close(*m, kde_eval(&sample, &kernel, h, &x).unwrap(), 1e-12);
            }
        }
    }
}

#[test]
fn execution_modes_give_identical_tables() {
    let dist = ReferenceDistribution::uniform_cube(2).unwrap();
    let sample = dist.sample(5000, 9).unwrap();
    let grid = EvalGrid::for_distribution(&dist, 0.05).unwrap();
    for kernel in [Kernel::gaussian(2), Kernel::epanechnikov(2)] {
        let s = MultiIndex::zero(2);
        let a = kde_grid(&sample, &kernel, &s, &[0.05, 0.2], &grid, Execution::Parallel).unwrap();
        let b = kde_grid(&sample, &kernel, &s, &[0.05, 0.2], &grid, Execution::Sequential).unwrap();
        let c = kdvol::par::with_threads(3, || {
            kde_grid(&sample, &kernel, &s, &[0.05, 0.2], &grid, Execution::Parallel).unwrap()
        });
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}

#[test]
fn estimate_is_invariant_under_rigid_motions() {
    let dist = ReferenceDistribution::uniform_cube(2).unwrap();
    let sample = dist.sample(1500, 4).unwrap();
    let t = 0.7f64;
    let rot = [t.cos(), -t.sin(), t.sin(), t.cos()];
    let shift = [3.0, -1.5];
    let moved = sample.affine(&rot, &shift);
    let x = [0.4, 0.6];
    let y = [rot[0] * x[0] + rot[1] * x[1] + shift[0], rot[2] * x[0] + rot[3] * x[1] + shift[1]];
    for kernel in [Kernel::gaussian(2), Kernel::epanechnikov(2)] {
        for h in [0.05, 0.3] {
            assert_close(kde_eval(&sample, &kernel, h, &x).unwrap(), kde_eval(&moved, &kernel, h, &y).unwrap(), 1e-10);
        }
    }
}

#[test]
fn derivative_matches_finite_difference_of_estimate() {
    let dist = ReferenceDistribution::uniform_circle(1.0).unwrap();
    let sample = dist.sample(500, 8).unwrap();
    let k = Kernel::gaussian(2);
    let h = 0.2;
    let e = 1e-6;
    let x = [0.7, 0.2];
    for (j, s) in [(0, MultiIndex::new(vec![1, 0])), (1, MultiIndex::new(vec![0, 1]))] {
        let mut a = x;
        let mut b = x;
        a[j] += e;
        b[j] -= e;
        let fd = (kde_eval(&sample, &k, h, &a).unwrap() - kde_eval(&sample, &k, h, &b).unwrap()) / (2.0 * e);
        let exact = kde_deriv_eval(&sample, &k, &s, h, &x).unwrap();
        assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "{fd} {exact}");
    }
}

#[test]
fn rejects_mismatched_and_degenerate_inputs() {
    let sample = Sample::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
    let k = Kernel::gaussian(2);
    assert!(kde_eval(&sample, &k, 0.1, &[0.0]).is_err());
    assert!(kde_eval(&sample, &k, 0.0, &[0.0, 0.0]).is_err());
    assert!(kde_eval(&sample, &k, -1.0, &[0.0, 0.0]).is_err());
    assert!(kde_eval(&sample, &Kernel::gaussian(1), 0.1, &[0.0, 0.0]).is_err());
    let empty = Sample::with_capacity(2, 0);
    assert!(kde_eval(&empty, &k, 0.1, &[0.0, 0.0]).is_err());
}

#[test]
fn sup_deviation_ray_is_suffix_maximum() {
    let dist = ReferenceDistribution::uniform_cube(1).unwrap();
    let sample = dist.sample(2000, 5).unwrap();
    let grid = EvalGrid::for_distribution(&dist, 0.01).unwrap();
    let h_grid = BandwidthGrid::log_spaced(0.02, 0.4, 6).unwrap();
    let s = MultiIndex::zero(1);
    let dev = sup_deviation(&sample, &dist, &Kernel::epanechnikov(1), &h_grid, &grid, &s, Execution::Parallel).unwrap();
    assert_eq!(dev.per_h.len(), 6);
    for j in 0..6 {
        let tail = dev.per_h[j..].iter().copied().fold(0.0, f64::max);
        assert_eq!(dev.ray[j], tail);
    }
    assert_eq!(dev.value, dev.ray[0]);
    assert!(dev.bandwidths.contains(&dev.argmax_h));
    assert!(dev.discretization_bound.unwrap() >= dev.per_h_discretization[5].unwrap());
}
