use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::beamforming::AngleGrid;
use crate::otfs::{psi_exact, CrosstalkCache, PulseShape};
use crate::rng::stream;
use crate::stats::{ks_critical_5pct, ks_statistic};
use crate::testutil::{add, cgauss, norm2, Fixture};

/// `G_b x_b` built densely: explicit `U^H a a^H F` kron `Psi`.
fn dense_signal(fx: &Fixture, p: Point) -> Vec<Vec<C64>> {
    let psi = psi_exact(&fx.cfg, &PulseShape::rectangular(fx.cfg.symbol_time()), p.nu, p.tau).unwrap().matrix;
    let na = fx.array.n_antennas;
    let a = DVector::from_fn(na, |n, _| C64::from_polar(1.0, std::f64::consts::PI * n as f64 * p.phi.sin()));
    fx.schedule
        .matrices
        .iter()
        .zip(&fx.x)
        .map(|(u, xb)| {
            let fac = DMatrix::from_fn(u.ncols(), fx.tx.ncols(), |r, q| {
                let ua: C64 = (0..na).map(|n| u[(n, r)].conj() * a[n]).sum();
                let af: C64 = (0..na).map(|n| a[n].conj() * fx.tx[(n, q)]).sum();
                ua * af
            });
            let g = fac.kronecker(&psi);
            (g * DVector::from_column_slice(xb)).as_slice().to_vec()
        })
        .collect()
}

fn scale(y: &[Vec<C64>], c: C64) -> Vec<Vec<C64>> {
    y.iter().map(|b| b.iter().map(|v| v * c).collect()).collect()
}

fn log_likelihood(y: &[Vec<C64>], s: &[Vec<C64>], h: C64) -> f64 {
    -y.iter().zip(s).flat_map(|(yb, sb)| yb.iter().zip(sb).map(move |(a, b)| (a - h * b).norm_sqr())).sum::<f64>()
}

fn on_grid_point(fx: &Fixture) -> Point {
    Point { nu: fx.cfg.doppler_bin(), tau: 2.0 * fx.cfg.delay_bin(), phi: 0.3 }
}

#[test]
fn noiseless_statistic_and_gain() {
    for &(ns, seed) in &[(1, 1), (2, 2)] {
        let fx = Fixture::new(4, 4, 2, 2, ns, seed);
        let p = on_grid_point(&fx);
        let s = dense_signal(&fx, p);
        let h = C64::new(0.7, -1.3);
        let y = scale(&s, h);
        let ctx = fx.ctx();
        let stat = glrt_statistic(&ctx, &y, p).unwrap().unwrap();
        let expect = h.norm_sqr() * norm2(&s);
        assert!((stat - expect).abs() <= 1e-10 * expect, "{stat} vs {expect}");
        let est = estimate_gain(&ctx, &y, p).unwrap().unwrap();
        assert!((est - h).norm() < 1e-9);
        // the least-squares gain is a local maximiser of the likelihood
        let l0 = log_likelihood(&y, &s, est);
        for d in [C64::new(0.01, 0.0), C64::new(-0.01, 0.0), C64::new(0.0, 0.01), C64::new(0.0, -0.01)] {
            assert!(log_likelihood(&y, &s, est * (1.0 + d)) < l0);
        }
    }
}

#[test]
fn perturbed_gain_lowers_likelihood_with_noise() {
    let fx = Fixture::new(4, 4, 2, 3, 1, 7);
    let p = on_grid_point(&fx);
    let s = dense_signal(&fx, p);
    let y = add(&scale(&s, C64::new(0.2, 0.1)), &fx.noise(0.05, &mut stream(7, &[1])));
    let est = estimate_gain(&fx.ctx(), &y, p).unwrap().unwrap();
    let l0 = log_likelihood(&y, &s, est);
    for f in [0.99, 1.01] {
        assert!(log_likelihood(&y, &s, est * f) < l0);
    }
}

#[test]
fn zero_and_orthogonal_inputs() {
    let fx = Fixture::new(4, 4, 2, 2, 1, 3);
    let p = on_grid_point(&fx);
    let ctx = fx.ctx();
    let zeros: Vec<Vec<C64>> = fx.x.iter().map(|_| vec![C64::new(0.0, 0.0); 2 * fx.cfg.nm()]).collect();
    assert_eq!(estimate_gain(&ctx, &zeros, p).unwrap().unwrap(), C64::new(0.0, 0.0));
    let s = dense_signal(&fx, p);
    let mut rng = stream(3, &[2]);
    let w = fx.noise(1.0, &mut rng);
    // remove the component along the stacked signal
    let inner: C64 = s.iter().flatten().zip(w.iter().flatten()).map(|(a, b)| a.conj() * b).sum();
    let y = add(&w, &scale(&s, -inner / norm2(&s)));
    assert!(glrt_statistic(&ctx, &y, p).unwrap().unwrap() < 1e-20 * norm2(&w));
}

#[test]
fn annihilated_hypothesis_is_unsearchable() {
    let mut fx = Fixture::new(4, 4, 2, 1, 1, 4);
    // receive beams orthogonal to a(0): alternate-sign pairs
    let u = DMatrix::from_fn(4, 2, |n, r| {
        let v = if n % 2 == 0 { 1.0 } else { -1.0 };
        C64::new(if n / 2 == r { v } else { 0.0 }, 0.0)
    });
    fx.schedule.matrices = vec![u];
    let y = fx.noise(1.0, &mut stream(4, &[1]));
    let p = Point { nu: 0.0, tau: 0.0, phi: 0.0 };
    assert_eq!(glrt_statistic(&fx.ctx(), &y, p).unwrap(), None);
    assert!(glrt_statistic(&fx.ctx(), &y, Point { phi: 0.4, ..p }).unwrap().is_some());
}

#[test]
fn statistic_is_exponential_under_noise() {
    let fx = Fixture::new(4, 4, 2, 2, 1, 5);
    let ctx = fx.ctx();
    let p = Point { nu: 0.37 * fx.cfg.doppler_bin(), tau: 1.4 * fx.cfg.delay_bin(), phi: -0.2 };
    let sigma2 = 0.3;
    let mut rng = stream(5, &[1]);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| glrt_statistic(&ctx, &fx.noise(sigma2, &mut rng), p).unwrap().unwrap() / sigma2)
        .collect();
    let d = ks_statistic(&draws, |s| 1.0 - (-s).exp());
    println!("KS distance {d:.5}, critical {:.5}", ks_critical_5pct(draws.len()));
    assert!(d < ks_critical_5pct(draws.len()));
}

fn small_grid(fx: &Fixture) -> (SearchGrid, CrosstalkCache) {
    let grid = SearchGrid::new(&fx.cfg, &AngleGrid::uniform_deg(-30.0, 30.0, 5.0).unwrap()).unwrap();
    let cache = CrosstalkCache::new(&fx.cfg, fx.cfg.doppler_bin(), fx.cfg.delay_bin(), 1024);
    (grid, cache)
}

#[test]
fn map_matches_pointwise_statistic_and_block_order() {
    let fx = Fixture::new(4, 4, 2, 3, 2, 6);
    let ctx = fx.ctx();
    let (grid, cache) = small_grid(&fx);
    let y = fx.noise(1.0, &mut stream(6, &[1]));
    let map = build_likelihood_map(&ctx, &y, &grid, &cache).unwrap();
    assert_eq!(map.values.len(), grid.len());
    for flat in (0..grid.len()).step_by(7) {
        let s = glrt_statistic(&ctx, &y, grid.point(grid.unravel(flat))).unwrap().unwrap();
        assert!((map.values[flat] - s).abs() <= 1e-10 * s.max(1e-12));
        assert!(map.values[flat] >= 0.0);
    }
    // reversing the block order leaves every cell unchanged
    let mut rev = fx.schedule.clone();
    rev.matrices.reverse();
    let xr: Vec<Vec<C64>> = fx.x.iter().rev().cloned().collect();
    let yr: Vec<Vec<C64>> = y.iter().rev().cloned().collect();
    let ctx_r = SensingContext { schedule: &rev, x: &xr, ..ctx };
    let map_r = build_likelihood_map(&ctx_r, &yr, &grid, &cache).unwrap();
    for (a, b) in map.values.iter().zip(&map_r.values) {
        assert!((a - b).abs() <= 1e-10 * a.max(1e-12));
    }
}

#[test]
fn strong_target_peaks_at_its_cell() {
    let fx = Fixture::new(8, 16, 4, 2, 1, 8);
    let ctx = fx.ctx();
    let grid = SearchGrid::new(&fx.cfg, &AngleGrid::uniform_deg(-45.0, 45.0, 1.0).unwrap()).unwrap();
    let cache = CrosstalkCache::new(&fx.cfg, fx.cfg.doppler_bin(), fx.cfg.delay_bin(), 1024);
    let cell = [5, 3, 60];
    let p = grid.point(cell);
    let y = add(&reconstruct(&ctx, p, C64::new(3.0, 1.0)).unwrap(), &fx.noise(0.1, &mut stream(8, &[1])));
    let map = build_likelihood_map(&ctx, &y, &grid, &cache).unwrap();
    assert_eq!(grid.unravel(map.argmax().unwrap()), cell);
    let thr = os_cfar_threshold(&map, &CfarConfig::default().with_alpha(3.0)).unwrap();
    assert!(above_threshold_set(&map, &thr).unwrap().contains(&grid.index(cell)));
}

#[test]
fn refinement_on_and_off_grid() {
    let fx = Fixture::new(4, 8, 2, 2, 1, 9);
    let ctx = fx.ctx();
    let (grid, _) = small_grid(&fx);
    let cell = [3, 1, 8];
    let coarse = grid.point(cell);
    let y = reconstruct(&ctx, coarse, C64::new(1.0, 0.5)).unwrap();
    let (r, s) = refine_local(&ctx, &y, &grid, cell, 10, 0).unwrap().unwrap();
    assert!((r.nu - coarse.nu).abs() < 1e-6 && (r.tau - coarse.tau).abs() < 1e-15 && (r.phi - coarse.phi).abs() < 1e-12);
    assert!(s >= glrt_statistic(&ctx, &y, coarse).unwrap().unwrap() * (1.0 - 1e-12));

    // target halfway between coarse cells in every dimension
    let st = grid.steps();
    let truth = Point { nu: coarse.nu + st[0] / 2.0, tau: coarse.tau + st[1] / 2.0, phi: coarse.phi + st[2] / 2.0 };
    let y = reconstruct(&ctx, truth, C64::new(1.0, 0.5)).unwrap();
    let (r, s) = refine_local(&ctx, &y, &grid, cell, 10, 0).unwrap().unwrap();
    assert!(s >= glrt_statistic(&ctx, &y, coarse).unwrap().unwrap());
    for (d, (a, b)) in [(r.nu, truth.nu), (r.tau, truth.tau), (r.phi, truth.phi)].iter().enumerate() {
        assert!((a - b).abs() <= st[d] / 10.0 * (1.0 + 1e-9), "dim {d}: {a} vs {b}");
    }
    // brute-force fine scan oracle over the same box
    let mut best = (f64::MIN, coarse);
    for i in -10..=10 {
        for j in -10..=10 {
            for k in -10..=10 {
                let p = Point {
                    nu: coarse.nu + i as f64 * st[0] / 10.0,
                    tau: coarse.tau + j as f64 * st[1] / 10.0,
                    phi: coarse.phi + k as f64 * st[2] / 10.0,
                };
                if p.tau < 0.0 {
                    continue;
                }
                if let Some(v) = glrt_statistic(&ctx, &y, p).unwrap() {
                    if v > best.0 {
                        best = (v, p);
                    }
                }
            }
        }
    }
    assert!((best.0 - s).abs() <= 1e-12 * s);
}

#[test]
fn cancellation_is_exact_and_invertible() {
    let fx = Fixture::new(4, 4, 2, 2, 2, 10);
    let ctx = fx.ctx();
    let p = Point { nu: -0.3 * fx.cfg.doppler_bin(), tau: 1.7 * fx.cfg.delay_bin(), phi: 0.1 };
    let h = C64::new(-0.4, 0.9);
    let y = reconstruct(&ctx, p, h).unwrap();
    assert!((norm2(&y) - norm2(&scale(&dense_signal(&fx, p), h))).abs() < 1e-10 * norm2(&y));
    let det = Detection {
        order: 0,
        coarse_cell: [0; 3],
        coarse: p,
        refined: p,
        gain: estimate_gain(&ctx, &y, p).unwrap().unwrap(),
        coarse_statistic: 0.0,
        statistic: 0.0,
        threshold: 0.0,
    };
    let res = sic_cancel(&ctx, &y, &det).unwrap();
    assert!(norm2(&res).sqrt() < 1e-8 * norm2(&y).sqrt());
    let w = fx.noise(1.0, &mut stream(10, &[1]));
    let back = add(&sic_cancel(&ctx, &w, &det).unwrap(), &reconstruct(&ctx, p, det.gain).unwrap());
    for (a, b) in back.iter().flatten().zip(w.iter().flatten()) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn detect_all_finds_two_targets_and_respects_limits() {
    let fx = Fixture::new(8, 16, 4, 2, 1, 11);
    let ctx = fx.ctx();
    let grid = SearchGrid::new(&fx.cfg, &AngleGrid::uniform_deg(-45.0, 45.0, 1.0).unwrap()).unwrap();
    let cache = CrosstalkCache::new(&fx.cfg, fx.cfg.doppler_bin(), fx.cfg.delay_bin(), 1024);
    let p1 = grid.point([4, 2, 30]);
    let p2 = grid.point([5, 6, 70]);
    let clean = add(&reconstruct(&ctx, p1, C64::new(2.0, 0.0)).unwrap(), &reconstruct(&ctx, p2, C64::new(0.0, 1.0)).unwrap());
    let y = add(&clean, &fx.noise(1e-4, &mut stream(11, &[1])));
    let proj = CoarseProjections::new(&ctx, &grid, &cache).unwrap();
    let cfar = CfarConfig::default().with_alpha(5.0);
    assert!(detect_all(&ctx, &y, &proj, &cfar, &DetectLimits::new(0)).unwrap().is_empty());
    let dets = detect_all(&ctx, &y, &proj, &cfar, &DetectLimits::new(2)).unwrap();
    assert_eq!(dets.len(), 2);
    assert_eq!(dets[0].order, 0);
    let mut found: Vec<Point> = dets.iter().map(|d| d.refined).collect();
    found.sort_by(|a, b| a.phi.total_cmp(&b.phi));
    for (f, t) in found.iter().zip([p1, p2]) {
        assert!((f.phi - t.phi).abs() <= 0.5_f64.to_radians());
    }
    for d in &dets {
        let st = grid.steps();
        assert!((d.refined.nu - d.coarse.nu).abs() <= st[0] * (1.0 + 1e-9));
        assert!((d.refined.tau - d.coarse.tau).abs() <= st[1] * (1.0 + 1e-9));
        assert!((d.refined.phi - d.coarse.phi).abs() <= st[2] * (1.0 + 1e-9));
    }
}

#[test]
fn noise_only_with_high_alpha_detects_nothing() {
    let fx = Fixture::new(4, 4, 2, 2, 1, 12);
    let ctx = fx.ctx();
    let (grid, cache) = small_grid(&fx);
    let y = fx.noise(1.0, &mut stream(12, &[1]));
    let proj = CoarseProjections::new(&ctx, &grid, &cache).unwrap();
    let dets = detect_all(&ctx, &y, &proj, &CfarConfig::default().with_alpha(1e3), &DetectLimits::new(4)).unwrap();
    assert!(dets.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn statistic_scales_quadratically(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let fx = Fixture::new(4, 4, 2, 2, 1, seed);
        let mut rng = stream(seed, &[3]);
        let y = fx.noise(1.0, &mut rng);
        let p = Point { nu: 0.2 * fx.cfg.doppler_bin(), tau: 0.6 * fx.cfg.delay_bin(), phi: 0.1 * cgauss(&mut rng).re };
        let c = C64::new(re, im);
        let s = glrt_statistic(&fx.ctx(), &y, p).unwrap().unwrap();
        let sc = glrt_statistic(&fx.ctx(), &scale(&y, c), p).unwrap().unwrap();
        prop_assert!((sc - c.norm_sqr() * s).abs() <= 1e-9 * sc.max(1e-12));
    }
}
