//! Per-band atomic norm denoising.
//!
//! Solves
//!
//! ```text
//! minimize    1/2 |x - y|^2 + lambda/2 (t + u_0)
//! subject to  [ T(u)  x ]
//!             [ x^H   t ]  is positive semidefinite
//! ```
//!
//! by ADMM, splitting the structured block from a free PSD copy `Z`. The
//! delay support is then read off the dual polynomial built from the
//! residual `(y - x) / lambda`, polished by local least squares, and the
//! coefficients are refit on the polished delays.

use std::f64::consts::PI;

use faer::{Mat, Side};
use faer::linalg::solvers::{Solve, SolveLstsq};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::BandPlan;
use crate::phase::Turns;

/// Dual polynomial oversampling relative to the band size.
pub const DUAL_GRID_FACTOR: usize = 64;

/// Peaks of the dual polynomial above `1 - DUAL_THRESHOLD_EPS` are support.
pub const DUAL_THRESHOLD_EPS: f64 = 1e-3;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Zero-phase-referenced complex sinusoid over one band,
/// `[a]_n = exp(-j (2 pi n f_s tau - theta))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub delay: f64,
    pub phase: f64,
}

impl Atom {
    pub fn new(delay: f64, phase: f64) -> Self {
        Self { delay, phase }
    }

    pub fn samples(&self, plan: &BandPlan) -> Vec<Complex64> {
        let theta = Turns::from_radians(self.phase);
        plan.indices()
            .map(|n| (theta - Turns::of_product(n * plan.spacing_hz(), self.delay)).cis())
            .collect()
    }
}

/// Regularization weight for a length-`n` band observed at linear `snr`:
/// `(1 + 1/ln n) / sqrt(snr) * sqrt(n ln n + n ln(4 pi ln n))`.
pub fn lambda_for(n: usize, snr: f64) -> f64 {
    let nf = n as f64;
    let ln = nf.ln();
    (1.0 + 1.0 / ln) / snr.sqrt() * (nf * ln + nf * (4.0 * PI * ln).ln()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmOptions {
    /// Relative tolerance on both primal and dual residuals.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial penalty.
    pub rho: f64,
    /// Residual balancing period, iterations.
    pub adapt_every: usize,
    /// Over-relaxation factor in `(0, 2)`; 1 is plain ADMM.
    pub relaxation: f64,
    /// Keep the objective value of every iterate.
    pub record_history: bool,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 20_000,
            rho: 0.1,
            adapt_every: 20,
            relaxation: 1.0,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseResult {
    pub x_hat: Vec<Complex64>,
    /// First column of the Toeplitz block.
    pub u: Vec<Complex64>,
    pub t: f64,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// Objective of the structured iterate, when requested.
    pub history: Vec<f64>,
}

impl DenoiseResult {
    /// The `(N+1) x (N+1)` block `[[T(u), x], [x^H, t]]`.
    pub fn block_matrix(&self) -> Mat<Complex64> {
        structured(&self.u, &self.x_hat, self.t)
    }
}

/// Objective of the denoising program at `(x, u, t)`.
pub fn objective(y: &[Complex64], lambda: f64, x: &[Complex64], u0: f64, t: f64) -> f64 {
    let fit: f64 = x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum();
    0.5 * fit + 0.5 * lambda * (t + u0)
}

fn structured(u: &[Complex64], x: &[Complex64], t: f64) -> Mat<Complex64> {
    let n = x.len();
    Mat::from_fn(n + 1, n + 1, |i, j| {
        if i < n && j < n {
            if i >= j {
                u[i - j]
            } else {
                u[j - i].conj()
            }
        } else if i < n {
            x[i]
        } else if j < n {
            x[j].conj()
        } else {
            Complex64::new(t, 0.0)
        }
    })
}

fn frob(a: &Mat<Complex64>) -> f64 {
    a.norm_l2()
}

/// Projection onto the positive semidefinite cone.
fn project_psd(a: &Mat<Complex64>) -> Result<Mat<Complex64>> {
    let d = a.nrows();
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::InvalidArgument(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let vecs = evd.U();
    let pos = (0..d).filter(|&i| s[i].re > 0.0).count();
    // rebuild from whichever side of the spectrum has fewer terms
    let (mut out, terms): (Mat<Complex64>, Vec<usize>) = if pos <= d - pos {
        (Mat::zeros(d, d), (0..d).filter(|&i| s[i].re > 0.0).collect())
    } else {
        (a.clone(), (0..d).filter(|&i| s[i].re < 0.0).collect())
    };
    let sign = if pos <= d - pos { 1.0 } else { -1.0 };
    for &k in &terms {
        let w = sign * s[k].re;
        let col = vecs.col(k);
        for j in 0..d {
            let cj = col[j].conj() * w;
            for i in j..d {
                out[(i, j)] += col[i] * cj;
            }
        }
    }
    for j in 0..d {
        out[(j, j)].im = 0.0;
        for i in j + 1..d {
            out[(j, i)] = out[(i, j)].conj();
        }
    }
    Ok(out)
}

fn min_eigenvalue(a: &Mat<Complex64>) -> Result<f64> {
    let vals = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::InvalidArgument(format!("eigendecomposition failed: {e:?}")))?;
    Ok(vals.first().copied().unwrap_or(0.0))
}

/// Solves the atomic norm denoising program for one band.
///
/// Returns [`Error::NotConverged`] when the residuals are still above
/// tolerance after `max_iters`; [`an_denoise_best_effort`] returns the last
/// iterate instead.
pub fn an_denoise(y: &[Complex64], lambda: f64, opts: &AdmmOptions) -> Result<DenoiseResult> {
    let res = an_denoise_best_effort(y, lambda, opts)?;
    if !res.converged {
        return Err(Error::NotConverged {
            iterations: res.iterations,
            primal: res.primal_residual,
            dual: res.dual_residual,
        });
    }
    Ok(res)
}

/// Like [`an_denoise`] but reports non-convergence through
/// [`DenoiseResult::converged`].
pub fn an_denoise_best_effort(y: &[Complex64], lambda: f64, opts: &AdmmOptions) -> Result<DenoiseResult> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty band".into()));
    }
    let y_norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if y_norm == 0.0 {
        return Ok(DenoiseResult {
            x_hat: vec![ZERO; n],
            u: vec![ZERO; n],
            t: 0.0,
            objective: 0.0,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            converged: true,
            history: Vec::new(),
        });
    }

    let d = n + 1;
    let abs_tol = 1e-12 * y_norm;
    let mut rho = opts.rho;
    let mut z: Mat<Complex64> = Mat::zeros(d, d);
    let mut dual: Mat<Complex64> = Mat::zeros(d, d);
    let mut u = vec![ZERO; n];
    let mut x = vec![ZERO; n];
    let mut t = 0.0;
    let mut history = Vec::new();
    let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;

    let alpha = opts.relaxation;
    for it in 1..=opts.max_iters {
        iterations = it;
        // structured update against W = Z + Lambda / rho
        let inv = 1.0 / rho;
        let w = Mat::from_fn(d, d, |i, j| z[(i, j)] + dual[(i, j)] * inv);
        let mut trace = 0.0;
        for i in 0..n {
            trace += w[(i, i)].re;
        }
        u[0] = Complex64::new(trace / n as f64 - lambda / (2.0 * rho * n as f64), 0.0);
        for k in 1..n {
            let mut acc = ZERO;
            for i in 0..n - k {
                acc += w[(i + k, i)] + w[(i, i + k)].conj();
            }
            u[k] = acc / (2.0 * (n - k) as f64);
        }
        for i in 0..n {
            x[i] = (y[i] + (w[(i, n)] + w[(n, i)].conj()) * rho) / (1.0 + 2.0 * rho);
        }
        t = w[(n, n)].re - lambda / (2.0 * rho);
        let theta = structured(&u, &x, t);

        // PSD update against the relaxed iterate
        let relaxed = Mat::from_fn(d, d, |i, j| theta[(i, j)] * alpha + z[(i, j)] * (1.0 - alpha));
        let z_new = project_psd(&Mat::from_fn(d, d, |i, j| relaxed[(i, j)] - dual[(i, j)] * inv))?;

        let (mut r2, mut s2) = (0.0, 0.0);
        for j in 0..d {
            for i in 0..d {
                let zn = z_new[(i, j)];
                dual[(i, j)] += (zn - relaxed[(i, j)]) * rho;
                r2 += (zn - theta[(i, j)]).norm_sqr();
                s2 += (zn - z[(i, j)]).norm_sqr();
            }
        }
        r_norm = r2.sqrt();
        s_norm = rho * s2.sqrt();
        z = z_new;

        if opts.record_history {
            history.push(objective(y, lambda, &x, u[0].re, t));
        }

        let eps_pri = abs_tol + opts.tol * frob(&theta).max(frob(&z));
        let eps_dual = abs_tol + opts.tol * frob(&dual);
        if it > 1 && r_norm <= eps_pri && s_norm <= eps_dual {
            converged = true;
            break;
        }
        if opts.adapt_every > 0 && it % opts.adapt_every == 0 {
            let rp = r_norm / eps_pri;
            let rd = s_norm / eps_dual;
            if rp > 10.0 * rd {
                rho *= 2.0;
            } else if rd > 10.0 * rp {
                rho *= 0.5;
            }
        }
    }

    // lift the diagonal just enough to make the structured block PSD
    let lam_min = min_eigenvalue(&structured(&u, &x, t))?;
    if lam_min < 0.0 {
        u[0].re -= lam_min;
        t -= lam_min;
    }

    Ok(DenoiseResult {
        objective: objective(y, lambda, &x, u[0].re, t),
        x_hat: x,
        u,
        t,
        iterations,
        primal_residual: r_norm,
        dual_residual: s_norm,
        converged,
        history,
    })
}

/// Samples of `|Q(tau)|` on the uniform grid of `DUAL_GRID_FACTOR * N`
/// points over `[0, 1/f_s)`, where `Q(tau) = <a(tau, 0), (y - x) / lambda>`.
pub fn dual_polynomial(y: &[Complex64], x_hat: &[Complex64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    let len = DUAL_GRID_FACTOR * n;
    let half = (n as i64 - 1) / 2;
    let mut buf = vec![ZERO; len];
    for (p, (a, b)) in y.iter().zip(x_hat).enumerate() {
        let idx = (p as i64 - half).rem_euclid(len as i64) as usize;
        buf[idx] = (a - b) / lambda;
    }
    // sum_n q_n exp(+j 2 pi n l / L) is an unnormalized inverse DFT
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    buf.into_iter().map(|v| v.norm()).collect()
}

/// Delays where the dual polynomial touches the unit circle, ascending.
pub fn extract_support(result: &DenoiseResult, y: &[Complex64], lambda: f64, plan: &BandPlan) -> Vec<f64> {
    if result.x_hat.iter().all(|v| *v == ZERO) {
        return Vec::new();
    }
    let mags = dual_polynomial(y, &result.x_hat, lambda);
    let len = mags.len();
    let step = plan.max_delay() / len as f64;
    let mut out = Vec::new();
    for l in 0..len {
        let prev = mags[(l + len - 1) % len];
        let cur = mags[l];
        let next = mags[(l + 1) % len];
        if cur < 1.0 - DUAL_THRESHOLD_EPS || cur <= prev || cur < next {
            continue;
        }
        let denom = prev - 2.0 * cur + next;
        let offset = if denom < 0.0 {
            (0.5 * (prev - next) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let tau = ((l as f64 + offset) * step).rem_euclid(plan.max_delay());
        out.push(tau);
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Delays and least-squares coefficients of one band's sparse model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BandEstimate {
    pub delays: Vec<f64>,
    pub coeffs: Vec<Complex64>,
}

impl BandEstimate {
    pub fn count(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }
}

/// Merges delays closer than `1 / (64 N f_s)` on the circle `[0, 1/f_s)`.
pub fn merge_close_delays(delays: &[f64], plan: &BandPlan) -> Vec<f64> {
    let period = plan.max_delay();
    let min_gap = period / (DUAL_GRID_FACTOR * plan.subcarriers()) as f64;
    let mut sorted: Vec<f64> = delays.iter().map(|d| d.rem_euclid(period)).collect();
    sorted.sort_by(f64::total_cmp);
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for d in sorted {
        match groups.last_mut() {
            Some(g) if d - g[g.len() - 1] < min_gap => g.push(d),
            _ => groups.push(vec![d]),
        }
    }
    if groups.len() > 1 {
        let first = groups[0][0];
        let last = *groups.last().unwrap().last().unwrap();
        if first + period - last < min_gap {
            let tail = groups.pop().unwrap();
            groups[0].splice(0..0, tail.into_iter().map(|d| d - period));
        }
    }
    let mut out: Vec<f64> = groups
        .into_iter()
        .map(|g| (g.iter().sum::<f64>() / g.len() as f64).rem_euclid(period))
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Least-squares coefficients of `y` against zero-phase atoms at `delays`.
pub fn fit_coeffs(y: &[Complex64], delays: &[f64], plan: &BandPlan) -> Result<BandEstimate> {
    if y.len() != plan.subcarriers() {
        return Err(Error::Dimension {
            expected: format!("{} samples", plan.subcarriers()),
            actual: format!("{}", y.len()),
        });
    }
    let delays = merge_close_delays(delays, plan);
    if delays.is_empty() {
        return Ok(BandEstimate::default());
    }
    if delays.len() > y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} delays exceed {} samples",
            delays.len(),
            y.len()
        )));
    }
    let cols: Vec<Vec<Complex64>> = delays.iter().map(|&d| Atom::new(d, 0.0).samples(plan)).collect();
    let a = Mat::from_fn(y.len(), delays.len(), |i, j| cols[j][i]);
    let b = Mat::from_fn(y.len(), 1, |i, _| y[i]);
    let sol = a.qr().solve_lstsq(&b);
    let coeffs = (0..delays.len()).map(|k| sol[(k, 0)]).collect();
    Ok(BandEstimate { delays, coeffs })
}

fn atom_matrix(delays: &[f64], plan: &BandPlan) -> Mat<Complex64> {
    let cols: Vec<Vec<Complex64>> = delays.iter().map(|&d| Atom::new(d, 0.0).samples(plan)).collect();
    Mat::from_fn(plan.subcarriers(), delays.len(), |i, j| cols[j][i])
}

fn profiled_residual(y: &[Complex64], a: &Mat<Complex64>) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let b = Mat::from_fn(y.len(), 1, |i, _| y[i]);
    let sol = a.qr().solve_lstsq(&b);
    let c: Vec<Complex64> = (0..a.ncols()).map(|k| sol[(k, 0)]).collect();
    let r: Vec<Complex64> = (0..y.len())
        .map(|i| y[i] - (0..a.ncols()).map(|k| a[(i, k)] * c[k]).sum::<Complex64>())
        .collect();
    let cost = r.iter().map(|v| v.norm_sqr()).sum();
    (c, r, cost)
}

/// Locally refines delays by Levenberg-Marquardt on the least-squares misfit
/// `min_c |y - A(tau) c|^2`, with the coefficients eliminated. No delay moves
/// by more than half a resolution cell `1 / (2 N f_s)`.
pub fn refine_delays(y: &[Complex64], delays: &[f64], plan: &BandPlan) -> Result<Vec<f64>> {
    let k = delays.len();
    let n = plan.subcarriers();
    if k == 0 || k >= n {
        return Ok(delays.to_vec());
    }
    let period = plan.max_delay();
    let max_shift = 0.5 / n as f64;
    let idx: Vec<f64> = plan.indices().map(|v| v as f64).collect();
    // work in cycles of the band period, theta = tau f_s
    let start: Vec<f64> = delays.iter().map(|d| d / period).collect();
    let mut theta = start.clone();
    let mut a = atom_matrix(delays, plan);
    let (mut c, mut r, mut cost) = profiled_residual(y, &a);
    let mut mu = 1e-3;
    for _ in 0..100 {
        // Jacobian of A c in theta, projected off the span of A
        let jac = Mat::from_fn(n, k, |i, j| Complex64::new(0.0, -2.0 * PI * idx[i]) * a[(i, j)] * c[j]);
        let coef = a.qr().solve_lstsq(&jac);
        let jp = Mat::from_fn(n, k, |i, j| jac[(i, j)] - (0..k).map(|l| a[(i, l)] * coef[(l, j)]).sum::<Complex64>());
        let g: Vec<f64> = (0..k)
            .map(|j| (0..n).map(|i| (jp[(i, j)].conj() * r[i]).re).sum())
            .collect();
        let h = Mat::from_fn(k, k, |p, q| (0..n).map(|i| (jp[(i, p)].conj() * jp[(i, q)]).re).sum::<f64>());
        let scale = (0..k).map(|j| h[(j, j)]).fold(0.0, f64::max);
        if scale == 0.0 {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let damped = Mat::from_fn(k, k, |p, q| h[(p, q)] + if p == q { mu * scale } else { 0.0 });
            let rhs = Mat::from_fn(k, 1, |j, _| g[j]);
            let step = match damped.llt(Side::Lower) {
                Ok(llt) => llt.solve(&rhs),
                Err(_) => {
                    mu *= 4.0;
                    continue;
                }
            };
            let trial: Vec<f64> = (0..k).map(|j| theta[j] + step[(j, 0)]).collect();
            if trial.iter().zip(&start).any(|(t, s)| (t - s).abs() > max_shift) {
                mu *= 4.0;
                continue;
            }
            let trial_delays: Vec<f64> = trial.iter().map(|t| t.rem_euclid(1.0) * period).collect();
            let ta = atom_matrix(&trial_delays, plan);
            let (tc, tr, tcost) = profiled_residual(y, &ta);
            if tcost < cost {
                let moved = (0..k).map(|j| step[(j, 0)].abs()).fold(0.0, f64::max);
                let gain = cost - tcost;
                theta = trial;
                a = ta;
                c = tc;
                r = tr;
                cost = tcost;
                mu = (mu / 3.0).max(1e-12);
                improved = moved > 1e-15 && gain > 1e-15 * cost;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Ok(theta.iter().map(|t| t.rem_euclid(1.0) * period).collect())
}

/// Denoised fit of one band together with the solver output.
#[derive(Debug, Clone)]
pub struct BandFit {
    pub estimate: BandEstimate,
    pub denoised: DenoiseResult,
    pub lambda: f64,
}

/// Full per-band chain: regularization weight, denoising, support, refit.
pub fn denoise_band(y: &[Complex64], snr: f64, plan: &BandPlan, opts: &AdmmOptions) -> Result<BandFit> {
    let lambda = lambda_for(y.len(), snr);
    let denoised = an_denoise(y, lambda, opts)?;
    finish_band(y, denoised, lambda, plan)
}

pub(crate) fn finish_band(y: &[Complex64], denoised: DenoiseResult, lambda: f64, plan: &BandPlan) -> Result<BandFit> {
    let support = merge_close_delays(&extract_support(&denoised, y, lambda, plan), plan);
    let refined = refine_delays(y, &support, plan)?;
    let estimate = fit_coeffs(y, &refined, plan)?;
    Ok(BandFit {
        estimate,
        denoised,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_band_plan;

    #[test]
    fn lambda_reference_value() {
        // (1 + 1/ln 65) / 10 * sqrt(65 ln 65 + 65 ln(4 pi ln 65))
        let ln65 = 65f64.ln();
        let direct = (1.0 + 1.0 / ln65) / 10.0 * (65.0 * ln65 + 65.0 * (4.0 * PI * ln65).ln()).sqrt();
        assert!((lambda_for(65, 100.0) - direct).abs() < 1e-12);
        assert!((lambda_for(65, 100.0) - 2.850).abs() < 5e-4);
        assert!((lambda_for(65, 400.0) - lambda_for(65, 100.0) / 2.0).abs() < 1e-12);
        assert!((lambda_for(65, 1.0) - 10.0 * lambda_for(65, 100.0)).abs() < 1e-12);
    }

    #[test]
    fn atom_has_unit_entries() {
        let plan = default_band_plan();
        let a = Atom::new(123.4e-9, 0.7).samples(&plan);
        assert_eq!(a.len(), 65);
        assert!(a.iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
        let norm: f64 = a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!((norm - 65f64.sqrt()).abs() < 1e-12);
        // the center subcarrier carries the atom phase
        assert!((a[32] - Complex64::from_polar(1.0, 0.7)).norm() < 1e-14);
    }

    #[test]
    fn zero_input_gives_zero_solution() {
        let res = an_denoise(&[ZERO; 9], 1.0, &AdmmOptions::default()).unwrap();
        assert!(res.x_hat.iter().all(|v| *v == ZERO));
        assert!(res.u.iter().all(|v| *v == ZERO));
        assert_eq!(res.t, 0.0);
        let plan = BandPlan::new(9, 312_500, vec![2_010_000_000]).unwrap();
        assert!(extract_support(&res, &[ZERO; 9], 1.0, &plan).is_empty());
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        assert!(an_denoise(&[ZERO; 5], 0.0, &AdmmOptions::default()).is_err());
    }

    #[test]
    fn strong_regularization_absorbs_signal() {
        let plan = BandPlan::new(9, 312_500, vec![2_010_000_000]).unwrap();
        let y = Atom::new(400e-9, 0.3).samples(&plan);
        // N |c| = 9 < lambda: the whole signal is thresholded away
        let res = an_denoise(&y, 20.0, &AdmmOptions::default()).unwrap();
        assert!(res.x_hat.iter().all(|v| v.norm() < 1e-5));
        assert!(extract_support(&res, &y, 20.0, &plan).is_empty());
    }

    #[test]
    fn merge_joins_near_duplicates_across_wrap() {
        let plan = default_band_plan();
        let p = plan.max_delay();
        let tiny = p / (64.0 * 65.0) / 4.0;
        let merged = merge_close_delays(&[10e-9, 10e-9 + tiny, p - tiny / 2.0, tiny / 2.0, 500e-9], &plan);
        assert_eq!(merged.len(), 3);
        // the wrapped pair averages to zero, which may round to just below the period
        assert!(merged.iter().any(|&d| d < 1e-15 || d > p - 1e-15));
    }

    #[test]
    fn fit_on_dft_grid_is_a_correlation() {
        let plan = default_band_plan();
        let n = plan.subcarriers();
        let step = plan.max_delay() / n as f64;
        let delays = [3.0 * step, 17.0 * step, 40.0 * step];
        let y: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let est = fit_coeffs(&y, &delays, &plan).unwrap();
        for (d, c) in est.delays.iter().zip(&est.coeffs) {
            let a = Atom::new(*d, 0.0).samples(&plan);
            let corr: Complex64 = a.iter().zip(&y).map(|(ai, yi)| ai.conj() * yi).sum::<Complex64>() / n as f64;
            assert!((corr - c).norm() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_exact_coefficients() {
        let plan = default_band_plan();
        let delays = [12.5e-9, 141.0e-9, 377.7e-9];
        let coeffs = [Complex64::new(0.5, -0.2), Complex64::new(-0.1, 0.3), Complex64::new(0.05, 0.02)];
        let mut y = vec![ZERO; plan.subcarriers()];
        for (d, c) in delays.iter().zip(coeffs) {
            for (yi, ai) in y.iter_mut().zip(Atom::new(*d, 0.0).samples(&plan)) {
                *yi += ai * c;
            }
        }
        let est = fit_coeffs(&y, &delays, &plan).unwrap();
        for (a, b) in est.coeffs.iter().zip(coeffs) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
