//! Sampled-path statistics and super-additivity checks.

use detperturb::brownian::{
    covariance_from_path, sample_path, superadditivity_gap, two_sided_kernel, GaussianConvention, GridSpec,
};
use detperturb::Verdict;

#[test]
fn sample_path_variance_matches_time() {
    let grid = GridSpec::new(1.0, 1.0, 4, 4).unwrap();
    let times = grid.times();
    let paths = 10_000u64;
    let mut sum_sq = vec![0.0; times.len()];
    let mut sum = vec![0.0; times.len()];
    for p in 0..paths {
        let z = sample_path(&grid, 11, p).unwrap().z;
        for (i, v) in z.iter().enumerate() {
            sum[i] += v;
            sum_sq[i] += v * v;
        }
    }
    for (i, t) in times.iter().enumerate() {
        let mean = sum[i] / paths as f64;
        let var = sum_sq[i] / paths as f64 - mean * mean;
        assert!((var - t).abs() <= 0.05 * t, "t={t}: sample variance {var}");
        assert!(mean.abs() <= 4.0 * (t / paths as f64).sqrt(), "t={t}: mean {mean}");
    }
}

#[test]
fn kernel_is_two_sided() {
    assert_eq!(two_sided_kernel(1.0, 2.0), 1.0);
    assert_eq!(two_sided_kernel(-3.0, -0.5), 0.5);
    assert_eq!(two_sided_kernel(-1.0, 2.0), 0.0);
    assert_eq!(two_sided_kernel(0.0, 2.0), 0.0);
}

#[test]
fn superadditivity_holds_under_both_conventions() {
    let grid = GridSpec::new(1.0, 1.0, 16, 16).unwrap();
    for p in 0..100 {
        let path = sample_path(&grid, 0, p).unwrap();
        for conv in [GaussianConvention::Standard, GaussianConvention::Unhalved] {
            let r = superadditivity_gap(&path, conv).unwrap();
            assert_eq!(r.verdict, Verdict::Holds, "path {p} {conv:?}: gap {}", r.gap);
            assert!(r.gap >= -1e-9 * r.scale());
            assert!((r.gap - r.cross_check).abs() <= 1e-10, "path {p}: {} vs {}", r.gap, r.cross_check);
            assert!(r.f_full <= 0.0 && r.f_1 <= 0.0 && r.f_2 <= 0.0);
        }
    }
}

#[test]
fn stronger_potential_lowers_f() {
    let g1 = GridSpec::new(0.7, 1.3, 6, 9).unwrap();
    let path = sample_path(&g1, 5, 2).unwrap();
    let std = superadditivity_gap(&path, GaussianConvention::Standard).unwrap();
    let unh = superadditivity_gap(&path, GaussianConvention::Unhalved).unwrap();
    assert!(std.f_full <= unh.f_full);
    assert!(std.f_1 <= unh.f_1 && std.f_2 <= unh.f_2);
}

#[test]
fn zero_potential_gives_zero() {
    let grid = GridSpec::new(1.0, 2.0, 5, 7).unwrap().with_lambda_scale(0.0).unwrap();
    let r = superadditivity_gap(&sample_path(&grid, 1, 1).unwrap(), GaussianConvention::Standard).unwrap();
    assert_eq!((r.f_full, r.f_1, r.f_2, r.gap), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn covariance_shape_and_partition() {
    let grid = GridSpec::new(1.0, 1.0, 3, 5).unwrap();
    let (c, p) = covariance_from_path(&sample_path(&grid, 2, 0).unwrap()).unwrap();
    assert_eq!(c.n(), 8);
    assert_eq!(p.sizes(), &[3, 5]);
}

#[test]
fn sampling_is_reproducible() {
    let grid = GridSpec::new(1.0, 1.0, 8, 8).unwrap();
    assert_eq!(sample_path(&grid, 3, 4).unwrap(), sample_path(&grid, 3, 4).unwrap());
    assert_ne!(sample_path(&grid, 3, 4).unwrap().z, sample_path(&grid, 3, 5).unwrap().z);
}
