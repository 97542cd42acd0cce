//! Delay and phase disambiguation from the two-way carrier handshake.
//!
//! The product of the two carrier pilots of band `m` is `H[m, 0]^2` plus
//! noise. Shifting the relative channel by `tau` and rotating it by `theta`
//! predicts `exp(j 2 theta) exp(-j 4 pi f_m tau) s_m^2`, with `s_m` the
//! relative channel's response at the carrier. The search over `(tau, theta)`
//! uses the expanded cost
//!
//! `C = sum |q_m|^2 + sum |s_m|^4 - 2 Re(exp(-j 2 theta) S(tau))`,
//! `S(tau) = sum q_m conj(exp(-j 4 pi f_m tau) s_m^2)`,
//!
//! so each grid point costs one complex multiply per band.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BandPlan, HandshakeSamples};
use crate::phase::{cis_ratio, quantize_delay};
use crate::splicer::RelativeCirEstimate;

pub use crate::model::ranging_error;

pub const DEFAULT_TAU_POINTS: usize = 65_536;
pub const DEFAULT_THETA_POINTS: usize = 64;

/// Uniform search grid: `tau_j = j / (I_tau f_s)` and `theta_i = 2 pi i / I_theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmbiguityGrid {
    tau_points: usize,
    theta_points: usize,
}

impl Default for AmbiguityGrid {
    fn default() -> Self {
        Self {
            tau_points: DEFAULT_TAU_POINTS,
            theta_points: DEFAULT_THETA_POINTS,
        }
    }
}

impl AmbiguityGrid {
    pub fn new(tau_points: usize, theta_points: usize) -> Result<Self> {
        if tau_points == 0 || theta_points == 0 {
            return Err(Error::InvalidArgument("ambiguity grid needs at least one point per axis".into()));
        }
        Ok(Self {
            tau_points,
            theta_points,
        })
    }

    pub fn tau_points(&self) -> usize {
        self.tau_points
    }

    pub fn theta_points(&self) -> usize {
        self.theta_points
    }

    /// Delay of point `j`, on the simulator's delay lattice.
    pub fn tau(&self, j: usize, plan: &BandPlan) -> f64 {
        quantize_delay(j as f64 / (self.tau_points as f64 * plan.spacing()))
    }

    pub fn theta(&self, i: usize) -> f64 {
        TAU * i as f64 / self.theta_points as f64
    }

    /// Index of the grid delay nearest to `delay`, wrapping modulo `1/f_s`.
    pub fn nearest_tau(&self, delay: f64, plan: &BandPlan) -> usize {
        let j = (delay * plan.spacing() * self.tau_points as f64).round() as i64;
        j.rem_euclid(self.tau_points as i64) as usize
    }
}

/// `y_rx[m, 0] * y_tx[m, 0]` for every band.
pub fn squared_cfr(samples: &HandshakeSamples) -> Vec<Complex64> {
    samples.tx.iter().zip(&samples.rx).map(|(a, b)| a * b).collect()
}

/// Response of the relative channel at each band's carrier.
pub fn carrier_sums(h0: &RelativeCirEstimate, plan: &BandPlan) -> Vec<Complex64> {
    let denom = h0.grid() as i128 * plan.spacing_hz() as i128;
    let taps = h0.taps();
    plan.carriers_hz()
        .iter()
        .map(|&f| {
            taps.iter()
                .map(|&(i, g)| g * cis_ratio(f as i128 * i as i128, denom))
                .sum()
        })
        .collect()
}

/// Predicted carrier response `exp(j theta) exp(-j 2 pi f_m tau) s_m`.
pub fn predict_zero_carrier(h0: &RelativeCirEstimate, plan: &BandPlan, tau_bar: f64, theta_bar: f64) -> Vec<Complex64> {
    let rot = Complex64::from_polar(1.0, theta_bar);
    carrier_sums(h0, plan)
        .into_iter()
        .zip(plan.carriers_hz())
        .map(|(s, &f)| rot * Complex64::from_polar(1.0, -TAU * (f as f64 * tau_bar).rem_euclid(1.0)) * s)
        .collect()
}

/// `sum |q_m - H_(tau, theta)[m, 0]^2|^2`, evaluated directly.
pub fn cost(q: &[Complex64], h0: &RelativeCirEstimate, plan: &BandPlan, tau_bar: f64, theta_bar: f64) -> f64 {
    predict_zero_carrier(h0, plan, tau_bar, theta_bar)
        .iter()
        .zip(q)
        .map(|(h, q)| (q - h * h).norm_sqr())
        .sum()
}

/// Final channel estimate after disambiguation.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedCir {
    /// `(delay_s, gain)` pairs, ascending delay.
    pub taps: Vec<(f64, Complex64)>,
    pub tof: f64,
    pub tau_index: usize,
    pub theta_index: usize,
    pub theta: f64,
    /// `theta` reduced to `[0, pi)`; the squared pilots cannot tell `theta`
    /// from `theta + pi`.
    pub theta_canonical: f64,
    /// The grid contains `theta + pi`, which attains the same cost.
    pub ambiguous: bool,
    pub cost: f64,
}

/// Precomputed search state for one relative channel estimate.
pub struct CostSurface<'a> {
    plan: &'a BandPlan,
    grid: AmbiguityGrid,
    /// `conj(s_m^2) q_m`
    weights: Vec<Complex64>,
    /// `2 f_m` as integers for the exact carrier phase
    twice_carriers: Vec<i128>,
    /// `exp(-j 2 theta_i)`, indexed by `2 i mod I_theta`
    rotations: Vec<Complex64>,
    constant: f64,
}

impl<'a> CostSurface<'a> {
    pub fn new(h0: &RelativeCirEstimate, q: &[Complex64], plan: &'a BandPlan, grid: AmbiguityGrid) -> Result<Self> {
        if q.len() != plan.num_bands() {
            return Err(Error::Dimension {
                expected: format!("{} squared pilots", plan.num_bands()),
                actual: format!("{}", q.len()),
            });
        }
        let s = carrier_sums(h0, plan);
        if s.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
            return Err(Error::DegenerateEstimate);
        }
        let weights = s.iter().zip(q).map(|(s, q)| (s * s).conj() * q).collect();
        let constant = q.iter().map(|v| v.norm_sqr()).sum::<f64>() + s.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>();
        let rotations = (0..grid.theta_points)
            .map(|k| cis_ratio(k as i128, grid.theta_points as i128))
            .collect();
        Ok(Self {
            plan,
            grid,
            weights,
            twice_carriers: plan.carriers_hz().iter().map(|&f| 2 * f as i128).collect(),
            rotations,
            constant,
        })
    }

    /// `S(tau_j)`.
    pub fn correlation(&self, j: usize) -> Complex64 {
        let denom = self.grid.tau_points as i128 * self.plan.spacing_hz() as i128;
        self.weights
            .iter()
            .zip(&self.twice_carriers)
            // conj(exp(-j 4 pi f tau)) = exp(+j 4 pi f tau)
            .map(|(w, &f2)| w * cis_ratio(f2 * j as i128, denom).conj())
            .sum()
    }

    fn value(&self, corr: Complex64, i: usize) -> f64 {
        let r = self.rotations[(2 * i) % self.grid.theta_points];
        self.constant - 2.0 * (r * corr).re
    }

    /// Cost at grid point `(j, i)`.
    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.value(self.correlation(j), i)
    }

    /// Grid minimizer `(j, i, cost)`; ties go to the smaller `j`, then `i`.
    pub fn argmin(&self) -> (usize, usize, f64) {
        const CHUNK: usize = 1024;
        let n = self.grid.tau_points;
        let local = |start: usize| {
            let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
            for j in start..(start + CHUNK).min(n) {
                let corr = self.correlation(j);
                for i in 0..self.grid.theta_points {
                    let c = self.value(corr, i);
                    if c < best.2 {
                        best = (j, i, c);
                    }
                }
            }
            best
        };
        let bests: Vec<_> = (0..n.div_ceil(CHUNK)).into_par_iter().map(|k| local(k * CHUNK)).collect();
        // chunks are in index order, so strict comparison keeps the first minimizer
        bests
            .into_iter()
            .fold((0, 0, f64::INFINITY), |acc, b| if b.2 < acc.2 { b } else { acc })
    }

    /// Writes `tau_s,theta_rad,cost` for every `step`-th delay and all phases.
    pub fn dump<W: Write>(&self, mut out: W, step: usize) -> Result<()> {
        writeln!(out, "tau_s,theta_rad,cost")?;
        for j in (0..self.grid.tau_points).step_by(step.max(1)) {
            let corr = self.correlation(j);
            let tau = self.grid.tau(j, self.plan);
            for i in 0..self.grid.theta_points {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", tau, self.grid.theta(i), self.value(corr, i))?;
            }
        }
        Ok(())
    }
}

/// Grid search for the shift and rotation that best explain the squared
/// carrier pilots, and the resulting channel.
pub fn resolve(h0: &RelativeCirEstimate, q: &[Complex64], plan: &BandPlan, grid: AmbiguityGrid) -> Result<ResolvedCir> {
    let surface = CostSurface::new(h0, q, plan, grid)?;
    let (j, i, cost) = surface.argmin();
    let tof = grid.tau(j, plan);
    let theta = grid.theta(i);
    let half = grid.theta_points / 2;
    let (canonical_index, ambiguous) = if grid.theta_points % 2 == 0 {
        (i % half, true)
    } else {
        (i, false)
    };
    let rot = Complex64::from_polar(1.0, theta);
    let mut taps: Vec<(f64, Complex64)> = h0.taps().iter().map(|&(k, g)| (tof + h0.delay(k), rot * g)).collect();
    taps.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ResolvedCir {
        taps,
        tof,
        tau_index: j,
        theta_index: i,
        theta,
        theta_canonical: grid.theta(canonical_index),
        ambiguous,
        cost,
    })
}
