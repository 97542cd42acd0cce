use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cirsplice::andenoise::AdmmOptions;
use cirsplice::cleaner::clean_all;
use cirsplice::model::{default_band_plan_with, synth_cfr, synth_distorted, BandPlan, Cir, DistortionParams};
use cirsplice::splicer::{build_dictionary, omp, residual, splice, Dictionary};

fn small_plan() -> BandPlan {
    default_band_plan_with(4, 9).unwrap()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn entries_match_elementwise_exponential() {
    let plan = default_band_plan_with(16, 65).unwrap();
    let g = 2 * plan.num_bands() * plan.subcarriers();
    let dict = build_dictionary(&plan, g).unwrap();
    let freqs = plan.stacked_frequencies_hz();
    let scale = 1.0 / (freqs.len() as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..2000 {
        let row = rng.random_range(0..freqs.len());
        let col = rng.random_range(0..g);
        // reduce f i / (G f_s) modulo one in integers first
        let num = freqs[row] as i128 * col as i128;
        let den = g as i128 * plan.spacing_hz() as i128;
        let cycles = num.rem_euclid(den) as f64 / den as f64;
        let want = Complex64::from_polar(scale, -TAU * cycles);
        assert!((dict.entry(row, col) - want).norm() < 1e-15, "({row}, {col})");
    }
}

#[test]
fn stacking_order_is_band_major() {
    let plan = small_plan();
    let cir = Cir::from_pairs(&[(0.0, Complex64::new(1.0, 0.0)), (1.0e-6, Complex64::new(0.3, 0.1))]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let y = synth_distorted(&cir, &plan, &DistortionParams::none(&plan), None, &mut rng).unwrap();
    let cleaned = clean_all(&y, 100.0, &plan, &AdmmOptions::default()).unwrap();
    let spliced = splice(&cleaned).unwrap();
    let n = plan.subcarriers();
    let half = plan.half_width();
    for m in 0..plan.num_bands() {
        for k in plan.indices() {
            let idx = m * n + (k + half) as usize;
            assert_eq!(spliced[idx], cleaned.csi.get(m, k));
        }
    }
}

#[test]
fn on_grid_channel_is_a_dictionary_combination() {
    let plan = small_plan();
    let g = 2 * plan.num_bands() * plan.subcarriers();
    let dict = build_dictionary(&plan, g).unwrap();
    let taps = [(3usize, Complex64::new(0.8, -0.1)), (40, Complex64::new(0.0, 0.3))];
    let cir = Cir::from_pairs(&taps.iter().map(|&(i, c)| (dict.delay(i), c)).collect::<Vec<_>>()).unwrap();
    let y = synth_cfr(&cir, &plan).unwrap();
    let rows = dict.rows() as f64;
    for r in 0..dict.rows() {
        let want: Complex64 = taps.iter().map(|&(i, c)| dict.entry(r, i) * c * rows.sqrt()).sum();
        // simulated delays sit on a 2^-64 s lattice, a few 1e-10 cycles off the grid
        assert!((y.values()[r] - want).norm() < 1e-8);
    }
}

/// Best pair of columns by exhaustive least squares.
fn best_pair(y: &[Complex64], dict: &Dictionary) -> (usize, usize) {
    let mut best = (0, 0, f64::INFINITY);
    for i in 0..dict.grid() {
        let a = dict.column(i);
        for j in i + 1..dict.grid() {
            let b = dict.column(j);
            // 2x2 normal equations
            let (aa, ab, bb) = (dot(a, a), dot(a, b), dot(b, b));
            let (ay, by) = (dot(a, y), dot(b, y));
            let det = aa * bb - ab * ab.conj();
            if det.norm() < 1e-12 {
                continue;
            }
            let ca = (bb * ay - ab * by) / det;
            let cb = (aa * by - ab.conj() * ay) / det;
            let r: f64 = y
                .iter()
                .zip(a.iter().zip(b))
                .map(|(v, (p, q))| (v - p * ca - q * cb).norm_sqr())
                .sum();
            if r < best.2 {
                best = (i, j, r);
            }
        }
    }
    (best.0, best.1)
}

#[test]
fn two_sparse_recovery_matches_exhaustive_search() {
    let plan = small_plan();
    let g = 2 * plan.num_bands() * plan.subcarriers();
    let dict = build_dictionary(&plan, g).unwrap();
    let min_sep = 2 * g / (plan.num_bands() * plan.subcarriers());
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..10 {
        let i = rng.random_range(0..g);
        let j = (i + rng.random_range(min_sep..g - min_sep)) % g;
        let ci = Complex64::from_polar(rng.random_range(0.5..1.0), rng.random_range(0.0..TAU));
        let cj = Complex64::from_polar(rng.random_range(0.5..1.0), rng.random_range(0.0..TAU));
        let y: Vec<Complex64> = dict.column(i).iter().zip(dict.column(j)).map(|(a, b)| a * ci + b * cj).collect();
        let est = omp(&y, &dict, 2).unwrap();
        let (p, q) = best_pair(&y, &dict);
        assert_eq!(est.support(), vec![p, q]);
        assert_eq!(est.support(), vec![i.min(j), i.max(j)]);
        for &(k, c) in &est.coefficients {
            let want = if k == i { ci } else { cj };
            assert!((c - want).norm() < 1e-8);
        }
    }
}

#[test]
fn residual_is_orthogonal_and_shrinking() {
    let plan = small_plan();
    let dict = build_dictionary(&plan, 3 * plan.num_bands() * plan.subcarriers()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..10 {
        let y: Vec<Complex64> = (0..dict.rows())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let est = omp(&y, &dict, 5).unwrap();
        let r = residual(&y, &dict, &est);
        for i in est.support() {
            assert!(dot(dict.column(i), &r).norm() < 1e-10);
        }
        assert!((norm(&r) - est.residual_norms.last().unwrap()).abs() < 1e-10);
        assert!(est.residual_norms.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn finer_grid_does_not_hurt_on_grid_recovery() {
    let plan = small_plan();
    let mn = plan.num_bands() * plan.subcarriers();
    let coarse = build_dictionary(&plan, 2 * mn).unwrap();
    let fine = build_dictionary(&plan, 4 * mn).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for _ in 0..10 {
        // on both grids: even indices of the fine grid
        let i = rng.random_range(0..2 * mn);
        let j = (i + rng.random_range(4..2 * mn - 4)) % (2 * mn);
        let mut taps = [(i, Complex64::new(0.9, 0.2)), (j, Complex64::new(-0.3, 0.3))];
        taps.sort_by_key(|t| t.0);
        let cir = Cir::from_pairs(&taps.iter().map(|&(k, c)| (coarse.delay(k), c)).collect::<Vec<_>>()).unwrap();
        let y = synth_cfr(&cir, &plan).unwrap();
        let err = |dict: &Dictionary, scale: usize| -> f64 {
            let est = omp(y.values(), dict, 2).unwrap();
            let got: Vec<(usize, Complex64)> = est.taps();
            taps.iter()
                .map(|&(k, c)| {
                    got.iter()
                        .find(|t| t.0 == k * scale)
                        .map_or(c.norm(), |t| (t.1 - c).norm())
                })
                .sum()
        };
        assert!(err(&fine, 2) <= err(&coarse, 1) + 1e-7);
    }
}
