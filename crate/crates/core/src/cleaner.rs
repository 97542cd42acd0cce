//! Per-band distortion estimation and removal.
//!
//! The first (smallest-delay) path recovered in a band fixes that band's
//! timing offset and the phase of its coefficient fixes the phase offset.
//! Counter-rotating by both leaves the relative channel: first path at zero
//! delay with a real gain, identical across bands.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::andenoise::{an_denoise_best_effort, finish_band, lambda_for, AdmmOptions, BandEstimate};
use crate::error::{Error, Result};
use crate::model::{distortion_phase, BandDistortion, BandPlan, CsiKind, CsiMatrix};

/// Solver tolerance used when a band fails to converge at the requested one.
const RELAXED_TOL: f64 = 1e-4;

/// Timing offset and phase offset (cycles) implied by a band's first path.
pub fn estimate_band_distortion(estimate: &BandEstimate) -> Result<BandDistortion> {
    let (k, &delay) = estimate
        .delays
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::InvalidArgument("band estimate has no support".into()))?;
    let phi = (-estimate.coeffs[k].arg() / (2.0 * std::f64::consts::PI)).rem_euclid(1.0);
    Ok(BandDistortion::new(delay, phi))
}

/// `exp(j 2 pi (delta n f_s + phi)) y[n]` over one band.
pub fn clean_band(y: &[Complex64], distortion: &BandDistortion, plan: &BandPlan) -> Vec<Complex64> {
    y.iter()
        .zip(plan.indices())
        .map(|(&v, n)| (-distortion_phase(plan, distortion, n)).cis() * v)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandDiagnostics {
    pub lambda: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// The band only converged at the relaxed tolerance (or not at all).
    pub relaxed: bool,
    pub support: usize,
}

/// Cleaned pilots for every band together with the estimated offsets.
#[derive(Debug, Clone)]
pub struct CleanedBandSet {
    /// Cleaned samples; rows of unusable bands are zero.
    pub csi: CsiMatrix,
    /// Estimated offsets; `None` for bands without recovered support.
    pub distortion: Vec<Option<BandDistortion>>,
    pub estimates: Vec<BandEstimate>,
    pub diagnostics: Vec<BandDiagnostics>,
}

impl CleanedBandSet {
    pub fn usable(&self) -> Vec<bool> {
        self.distortion.iter().map(Option::is_some).collect()
    }

    pub fn usable_count(&self) -> usize {
        self.distortion.iter().filter(|d| d.is_some()).count()
    }

    pub fn support_counts(&self) -> Vec<usize> {
        self.estimates.iter().map(BandEstimate::count).collect()
    }
}

struct BandOutcome {
    estimate: BandEstimate,
    diagnostics: BandDiagnostics,
}

fn process_band(y: &[Complex64], snr: f64, plan: &BandPlan, opts: &AdmmOptions) -> Result<BandOutcome> {
    let lambda = lambda_for(y.len(), snr);
    let mut relaxed = false;
    let mut res = an_denoise_best_effort(y, lambda, opts)?;
    if !res.converged {
        relaxed = true;
        let loose = AdmmOptions {
            tol: opts.tol.max(RELAXED_TOL),
            ..*opts
        };
        res = an_denoise_best_effort(y, lambda, &loose)?;
        if !res.converged {
            log::warn!(
                "band solver stopped at {} iterations (residuals {:e}/{:e})",
                res.iterations,
                res.primal_residual,
                res.dual_residual
            );
        }
    }
    let diagnostics = BandDiagnostics {
        lambda,
        iterations: res.iterations,
        primal_residual: res.primal_residual,
        dual_residual: res.dual_residual,
        converged: res.converged,
        relaxed,
        support: 0,
    };
    let fit = finish_band(y, res, lambda, plan)?;
    Ok(BandOutcome {
        diagnostics: BandDiagnostics {
            support: fit.estimate.count(),
            ..diagnostics
        },
        estimate: fit.estimate,
    })
}

/// Denoises, estimates and removes the distortion of every band.
pub fn clean_all(csi: &CsiMatrix, snr: f64, plan: &BandPlan, opts: &AdmmOptions) -> Result<CleanedBandSet> {
    csi.check_plan(plan)?;
    let outcomes = (0..plan.num_bands())
        .into_par_iter()
        .map(|m| process_band(csi.band(m), snr, plan, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut cleaned = CsiMatrix::zeros(plan, CsiKind::Cleaned);
    let mut distortion = Vec::with_capacity(outcomes.len());
    let mut estimates = Vec::with_capacity(outcomes.len());
    let mut diagnostics = Vec::with_capacity(outcomes.len());
    for (m, out) in outcomes.into_iter().enumerate() {
        let d = if out.estimate.is_empty() {
            None
        } else {
            let d = estimate_band_distortion(&out.estimate)?;
            cleaned.band_mut(m).copy_from_slice(&clean_band(csi.band(m), &d, plan));
            Some(d)
        };
        distortion.push(d);
        estimates.push(out.estimate);
        diagnostics.push(out.diagnostics);
    }
    Ok(CleanedBandSet {
        csi: cleaned,
        distortion,
        estimates,
        diagnostics,
    })
}
