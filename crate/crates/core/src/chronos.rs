//! Squared-carrier sparse baseline.
//!
//! The squared carrier pilots sample the spectrum of the channel convolved
//! with itself. Basis pursuit denoising over an oversampled delay grid
//! recovers that self-convolution, whose first significant component sits at
//! twice the time of flight.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::handshake::squared_cfr;
use crate::model::{BandPlan, HandshakeSamples};
use crate::phase::cis_ratio;

/// Default oversampling of the delay grid relative to the number of bands.
pub const DEFAULT_GRID_FACTOR: usize = 32;
/// Default fraction of the largest magnitude that counts as significant.
pub const DEFAULT_SIGNIFICANCE: f64 = 0.1;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `minimize ||x||_1 subject to ||q - F x|| <= eps`.
#[derive(Debug, Clone)]
pub struct BpdnProblem {
    q: Vec<Complex64>,
    // row-major, q.len() x grid
    f: Vec<Complex64>,
    grid: usize,
    eps: f64,
}

impl BpdnProblem {
    /// Carrier Fourier matrix `F[m, i] = exp(-j 2 pi f_m (i / G) / f_s) / sqrt(M)`.
    pub fn new(q: Vec<Complex64>, plan: &BandPlan, grid: usize, eps: f64) -> Result<Self> {
        let m = plan.num_bands();
        if q.len() != m {
            return Err(Error::Dimension {
                expected: format!("{m} squared pilots"),
                actual: format!("{}", q.len()),
            });
        }
        if grid < m {
            return Err(Error::InvalidArgument(format!("grid size {grid} is smaller than {m} bands")));
        }
        let scale = 1.0 / (m as f64).sqrt();
        let denom = grid as i128 * plan.spacing_hz() as i128;
        let f = plan
            .carriers_hz()
            .iter()
            .flat_map(|&fc| (0..grid).map(move |i| cis_ratio(fc as i128 * i as i128, denom) * scale))
            .collect();
        Self::with_matrix(q, f, grid, eps)
    }

    /// Problem with an explicit row-major `q.len() x grid` matrix.
    pub fn with_matrix(q: Vec<Complex64>, f: Vec<Complex64>, grid: usize, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise bound must be non-negative, got {eps}")));
        }
        if grid == 0 || f.len() != q.len() * grid {
            return Err(Error::Dimension {
                expected: format!("{} x {grid} matrix", q.len()),
                actual: format!("{} entries", f.len()),
            });
        }
        Ok(Self { q, f, grid, eps })
    }

    pub fn q(&self) -> &[Complex64] {
        &self.q
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn entry(&self, m: usize, i: usize) -> Complex64 {
        self.f[m * self.grid + i]
    }

    fn rows(&self) -> usize {
        self.q.len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.f
            .chunks_exact(self.grid)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn apply_adjoint(&self, v: &[Complex64], out: &mut [Complex64]) {
        out.fill(ZERO);
        for (row, &c) in self.f.chunks_exact(self.grid).zip(v) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * c;
            }
        }
    }

    fn gram(&self) -> Mat<Complex64> {
        let m = self.rows();
        let g = self.grid;
        Mat::from_fn(m, m, |a, b| {
            self.f[a * g..(a + 1) * g]
                .iter()
                .zip(&self.f[b * g..(b + 1) * g])
                .map(|(x, y)| x * y.conj())
                .sum()
        })
    }

    /// `||q - F x||`.
    pub fn residual_norm(&self, x: &[Complex64]) -> f64 {
        norm(&sub(&self.q, &self.apply(x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpdnOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub adapt_every: usize,
}

impl Default for BpdnOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 50_000,
            adapt_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpdnSolution {
    pub x: Vec<Complex64>,
    /// `||x||_1`.
    pub objective: f64,
    /// `||q - F x||`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn mat_vec(a: &Mat<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * v[j]).sum())
        .collect()
}

fn soft_threshold(v: Complex64, t: f64) -> Complex64 {
    let m = v.norm();
    if m <= t {
        ZERO
    } else {
        v * ((m - t) / m)
    }
}

/// Projection onto `{v : ||v - q|| <= eps}`.
fn project_ball(v: &mut [Complex64], q: &[Complex64], eps: f64) {
    let d = norm(&sub(v, q));
    if d > eps {
        let s = eps / d;
        for (vi, qi) in v.iter_mut().zip(q) {
            *vi = qi + (*vi - qi) * s;
        }
    }
}

/// Solves the problem by ADMM on the splitting `x = z`, `F x = v`, with
/// `z` carrying the l1 term and `v` the noise ball, then moves the sparse
/// iterate onto the ball along the minimum-norm correction.
pub fn solve_bpdn(problem: &BpdnProblem, opts: &BpdnOptions) -> Result<BpdnSolution> {
    let m = problem.rows();
    let g = problem.grid;
    let q = &problem.q;
    let q_norm = norm(q);
    if q_norm <= problem.eps {
        return Ok(BpdnSolution {
            x: vec![ZERO; g],
            objective: 0.0,
            residual: q_norm,
            iterations: 0,
            converged: true,
            primal_residual: 0.0,
            dual_residual: 0.0,
        });
    }

    let gram = problem.gram();
    let kernel = Mat::from_fn(m, m, |a, b| gram[(a, b)] + if a == b { Complex64::new(1.0, 0.0) } else { ZERO });
    let k_inv = kernel
        .llt(Side::Lower)
        .map_err(|_| Error::InvalidArgument("BPDN kernel is not positive definite".into()))?
        .inverse();

    let mut rho = 10.0 / q_norm;
    let mut x = vec![ZERO; g];
    let mut z = vec![ZERO; g];
    let mut u = vec![ZERO; g];
    let mut v = q.clone();
    let mut w = vec![ZERO; m];
    let mut rhs = vec![ZERO; g];
    let mut tmp = vec![ZERO; g];
    let scale = q_norm;
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        iterations += 1;
        // x = (I + F^H F)^{-1} (z - u + F^H (v - w)), by Woodbury
        problem.apply_adjoint(&sub(&v, &w), &mut tmp);
        for k in 0..g {
            rhs[k] = z[k] - u[k] + tmp[k];
        }
        let frhs = problem.apply(&rhs);
        problem.apply_adjoint(&mat_vec(&k_inv, &frhs), &mut tmp);
        for k in 0..g {
            x[k] = rhs[k] - tmp[k];
        }
        let fx = problem.apply(&x);

        let z_old = z.clone();
        for k in 0..g {
            z[k] = soft_threshold(x[k] + u[k], 1.0 / rho);
        }
        let v_old = v.clone();
        v = fx.iter().zip(&w).map(|(a, b)| a + b).collect();
        project_ball(&mut v, q, problem.eps);

        let mut r2 = 0.0;
        for k in 0..g {
            let d = x[k] - z[k];
            u[k] += d;
            r2 += d.norm_sqr();
        }
        for k in 0..m {
            let d = fx[k] - v[k];
            w[k] += d;
            r2 += d.norm_sqr();
        }
        primal = r2.sqrt();
        problem.apply_adjoint(&sub(&v, &v_old), &mut tmp);
        let s2: f64 = z.iter().zip(&z_old).zip(&tmp).map(|((a, b), c)| (a - b + c).norm_sqr()).sum();
        dual = rho * s2.sqrt();

        if primal <= opts.tol * scale && dual <= opts.tol * scale {
            converged = true;
            break;
        }
        if opts.adapt_every > 0 && iterations % opts.adapt_every == 0 {
            let factor = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                u.iter_mut().for_each(|e| *e /= factor);
                w.iter_mut().for_each(|e| *e /= factor);
            }
        }
    }

    // minimum-norm step onto the noise ball
    let r = sub(q, &problem.apply(&z));
    let r_norm = norm(&r);
    if r_norm > problem.eps {
        let gram_inv = gram
            .llt(Side::Lower)
            .map_err(|_| Error::InvalidArgument("carrier Fourier matrix is rank deficient".into()))?
            .inverse();
        let step: Vec<Complex64> = mat_vec(&gram_inv, &r)
            .into_iter()
            .map(|c| c * (1.0 - problem.eps / r_norm))
            .collect();
        problem.apply_adjoint(&step, &mut tmp);
        for k in 0..g {
            z[k] += tmp[k];
        }
    }

    let residual = problem.residual_norm(&z);
    Ok(BpdnSolution {
        objective: z.iter().map(|c| c.norm()).sum(),
        x: z,
        residual,
        iterations,
        converged,
        primal_residual: primal,
        dual_residual: dual,
    })
}

/// Index of the first entry whose magnitude exceeds `eta` times the largest.
pub fn first_significant(x: &[Complex64], eta: f64) -> Option<usize> {
    let peak = x.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    x.iter().position(|c| c.norm() > eta * peak)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChronosEstimate {
    pub tof: f64,
    /// Grid index of the first significant component.
    pub index: usize,
    pub solution: BpdnSolution,
}

/// Time of flight from the squared carrier pilots: half the delay of the
/// first significant component of the recovered self-convolution.
pub fn chronos_tof(
    samples: &HandshakeSamples,
    plan: &BandPlan,
    grid: usize,
    eps: f64,
    eta: f64,
    opts: &BpdnOptions,
) -> Result<ChronosEstimate> {
    let problem = BpdnProblem::new(squared_cfr(samples), plan, grid, eps)?;
    let solution = solve_bpdn(&problem, opts)?;
    let index = first_significant(&solution.x, eta).ok_or(Error::NoSignificantTap)?;
    let tof = index as f64 / (grid as f64 * plan.spacing()) / 2.0;
    Ok(ChronosEstimate { tof, index, solution })
}
