use num_complex::Complex64;

use cirsplice::chronos::{chronos_tof, first_significant, solve_bpdn, BpdnOptions, BpdnProblem};
use cirsplice::model::{default_band_plan, synth_handshake, BandPlan, Cir, DistortionParams, DEFAULT_CARRIERS_HZ};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn low_group() -> BandPlan {
    BandPlan::new(65, 312_500, DEFAULT_CARRIERS_HZ[..8].to_vec()).unwrap()
}

/// Self-convolution of on-grid taps, as `(grid index, gain)`.
fn self_convolution(taps: &[(usize, Complex64)]) -> Vec<(usize, Complex64)> {
    let mut out: Vec<(usize, Complex64)> = Vec::new();
    for &(a, ga) in taps {
        for &(b, gb) in taps {
            let k = a + b;
            match out.iter_mut().find(|e| e.0 == k) {
                Some(e) => e.1 += ga * gb,
                None => out.push((k, ga * gb)),
            }
        }
    }
    out.sort_by_key(|e| e.0);
    out
}

#[test]
fn exact_column_gives_a_unit_spike() {
    let plan = low_group();
    let probe = BpdnProblem::new(vec![Complex64::new(0.0, 0.0); 8], &plan, 32, 0.0).unwrap();
    for i in [0usize, 5, 17, 31] {
        let q: Vec<Complex64> = (0..8).map(|m| probe.entry(m, i)).collect();
        let sol = solve_bpdn(&BpdnProblem::new(q, &plan, 32, 0.0).unwrap(), &BpdnOptions::default()).unwrap();
        for (k, x) in sol.x.iter().enumerate() {
            let want = if k == i { 1.0 } else { 0.0 };
            assert!((x - want).norm() < 1e-6, "column {i}: x[{k}] = {x}");
        }
    }
}

#[test]
fn single_tap_is_located_exactly() {
    let plan = default_band_plan();
    let grid = 32 * plan.num_bands();
    let step = 1.0 / (grid as f64 * plan.spacing());
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for k in [6usize, 40, 101] {
        // 2 tau on the baseline grid
        let tau = k as f64 * step / 2.0;
        let cir = Cir::from_pairs(&[(tau, Complex64::new(0.6, -0.4))]).unwrap();
        let dist = DistortionParams::draw(&mut rng, &plan, 960e-9).unwrap();
        let hs = synth_handshake(&cir, &plan, &dist, None, &mut rng).unwrap();
        let est = chronos_tof(&hs, &plan, grid, 0.0, 0.1, &BpdnOptions::default()).unwrap();
        assert_eq!(est.index, k);
        assert!((est.tof - cir.tof()).abs() < 1e-18);
    }
}

#[test]
fn two_taps_put_the_first_peak_at_twice_the_first_delay() {
    let plan = default_band_plan();
    let grid = 32 * plan.num_bands();
    let step = 1.0 / (grid as f64 * plan.spacing());
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    for &(a, b) in &[(10usize, 60usize), (31, 150), (4, 90)] {
        let taps = [(a, Complex64::new(0.7, 0.2)), (b, Complex64::new(-0.2, 0.25))];
        let oracle = self_convolution(&taps);
        let peak = oracle.iter().map(|e| e.1.norm()).fold(0.0, f64::max);
        let first = oracle.iter().find(|e| e.1.norm() > 0.1 * peak).unwrap().0;
        assert_eq!(first, 2 * a);

        let cir = Cir::from_pairs(&taps.iter().map(|&(k, g)| (k as f64 * step, g)).collect::<Vec<_>>()).unwrap();
        let dist = DistortionParams::draw(&mut rng, &plan, 960e-9).unwrap();
        let hs = synth_handshake(&cir, &plan, &dist, None, &mut rng).unwrap();
        let est = chronos_tof(&hs, &plan, grid, 0.0, 0.1, &BpdnOptions::default()).unwrap();
        assert_eq!(est.index, first);
        assert_eq!(first_significant(&est.solution.x, 0.1), Some(first));
    }
}
