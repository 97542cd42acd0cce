//! Multi-band splicing and sparse recovery of the relative channel.

use std::sync::Arc;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use num_complex::Complex64;

use crate::cleaner::CleanedBandSet;
use crate::error::{Error, Result};
use crate::model::BandPlan;
use crate::phase::cis_ratio;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Overcomplete delay dictionary over the stacked subcarriers of a plan.
///
/// Column `i` samples `exp(-j 2 pi f (i / G) / f_s) / sqrt(MN)` at every
/// subcarrier `f`, rows band-major. Rows of inactive bands are ignored by
/// [`omp`], which renormalizes columns over the remaining rows.
#[derive(Debug, Clone)]
pub struct Dictionary {
    plan: BandPlan,
    grid: usize,
    // column-major, plan.total_subcarriers() rows
    columns: Arc<Vec<Complex64>>,
    active: Vec<bool>,
}

/// Dictionary for `plan` on a grid of `grid` delays over `[0, 1/f_s)`.
pub fn build_dictionary(plan: &BandPlan, grid: usize) -> Result<Dictionary> {
    let rows = plan.total_subcarriers();
    if grid < rows {
        return Err(Error::InvalidArgument(format!(
            "grid size {grid} is smaller than the {rows} spliced subcarriers"
        )));
    }
    let freqs = plan.stacked_frequencies_hz();
    let scale = 1.0 / (rows as f64).sqrt();
    let denom = grid as i128 * plan.spacing_hz() as i128;
    let mut columns = Vec::with_capacity(rows * grid);
    for i in 0..grid {
        columns.extend(freqs.iter().map(|&f| cis_ratio(f as i128 * i as i128, denom) * scale));
    }
    Ok(Dictionary {
        plan: plan.clone(),
        grid,
        columns: Arc::new(columns),
        active: vec![true; plan.num_bands()],
    })
}

impl Dictionary {
    pub fn plan(&self) -> &BandPlan {
        &self.plan
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn rows(&self) -> usize {
        self.plan.total_subcarriers()
    }

    pub fn active_bands(&self) -> &[bool] {
        &self.active
    }

    /// Delay of grid point `i`, seconds.
    pub fn delay(&self, i: usize) -> f64 {
        i as f64 / (self.grid as f64 * self.plan.spacing())
    }

    pub fn column(&self, i: usize) -> &[Complex64] {
        let r = self.rows();
        &self.columns[i * r..(i + 1) * r]
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.columns[col * self.rows() + row]
    }

    /// Same dictionary with only the flagged bands' rows active.
    pub fn with_active_bands(&self, active: &[bool]) -> Result<Dictionary> {
        if active.len() != self.plan.num_bands() {
            return Err(Error::Dimension {
                expected: format!("{} band flags", self.plan.num_bands()),
                actual: format!("{}", active.len()),
            });
        }
        Ok(Dictionary {
            active: active.to_vec(),
            ..self.clone()
        })
    }

    /// Indices of active rows.
    pub fn active_rows(&self) -> Vec<usize> {
        let n = self.plan.subcarriers();
        self.active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .flat_map(|(m, _)| m * n..(m + 1) * n)
            .collect()
    }
}

/// Stacks the usable cleaned bands into one measurement vector.
pub fn splice(cleaned: &CleanedBandSet) -> Result<Vec<Complex64>> {
    if cleaned.usable_count() == 0 {
        return Err(Error::NoUsableBands);
    }
    let mut out = Vec::with_capacity(cleaned.usable_count() * cleaned.csi.subcarriers());
    for (m, d) in cleaned.distortion.iter().enumerate() {
        if d.is_some() {
            out.extend_from_slice(cleaned.csi.band(m));
        }
    }
    Ok(out)
}

/// Sparse grid estimate of the relative channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeCirEstimate {
    grid: usize,
    spacing_hz: f64,
    /// `(grid index, coefficient)` pairs sorted by index; coefficients refer
    /// to the unit-norm dictionary columns over the active rows.
    pub coefficients: Vec<(usize, Complex64)>,
    /// Entry magnitude of a unit-norm column over the active rows.
    pub column_scale: f64,
    /// Residual norm after each iteration.
    pub residual_norms: Vec<f64>,
    /// Grid indices in selection order.
    pub selection_order: Vec<usize>,
}

impl RelativeCirEstimate {
    /// Build directly from physical tap gains on the grid.
    pub fn from_taps(grid: usize, spacing_hz: f64, taps: &[(usize, Complex64)]) -> Self {
        let mut coefficients = taps.to_vec();
        coefficients.sort_by_key(|t| t.0);
        Self {
            grid,
            spacing_hz,
            coefficients,
            column_scale: 1.0,
            residual_norms: Vec::new(),
            selection_order: taps.iter().map(|t| t.0).collect(),
        }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn delay(&self, i: usize) -> f64 {
        i as f64 / (self.grid as f64 * self.spacing_hz)
    }

    pub fn support(&self) -> Vec<usize> {
        self.coefficients.iter().map(|c| c.0).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Physical path gains `(grid index, gain)`: the channel whose response
    /// at frequency `f` is `sum gain * exp(-j 2 pi f delay(i))`.
    pub fn taps(&self) -> Vec<(usize, Complex64)> {
        self.coefficients
            .iter()
            .map(|&(i, c)| (i, c * self.column_scale))
            .collect()
    }
}

fn least_squares(cols: &[Vec<Complex64>], y: &[Complex64]) -> Vec<Complex64> {
    let a = Mat::from_fn(y.len(), cols.len(), |i, j| cols[j][i]);
    let b = Mat::from_fn(y.len(), 1, |i, _| y[i]);
    let sol = a.qr().solve_lstsq(&b);
    (0..cols.len()).map(|k| sol[(k, 0)]).collect()
}

/// Orthogonal matching pursuit with at most `sparsity` atoms.
///
/// `y` holds the spliced measurements of the dictionary's active rows.
pub fn omp(y: &[Complex64], dict: &Dictionary, sparsity: usize) -> Result<RelativeCirEstimate> {
    if sparsity == 0 {
        return Err(Error::InvalidArgument("sparsity must be at least 1".into()));
    }
    let rows = dict.active_rows();
    if y.len() != rows.len() {
        return Err(Error::Dimension {
            expected: format!("{} spliced samples", rows.len()),
            actual: format!("{}", y.len()),
        });
    }
    if rows.len() < sparsity {
        return Err(Error::DegenerateDictionary {
            active_rows: rows.len(),
            sparsity,
        });
    }
    // unit-modulus entries scaled to unit column norm over the active rows
    let renorm = (dict.rows() as f64 / rows.len() as f64).sqrt();
    let column_scale = 1.0 / (rows.len() as f64).sqrt();
    let active_column = |i: usize| -> Vec<Complex64> {
        let col = dict.column(i);
        rows.iter().map(|&r| col[r] * renorm).collect()
    };

    let y_norm = norm(y);
    let mut residual = y.to_vec();
    let mut selected: Vec<usize> = Vec::new();
    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    let mut coeffs: Vec<Complex64> = Vec::new();
    let mut residual_norms = Vec::new();

    while selected.len() < sparsity && norm(&residual) >= 1e-12 * y_norm && y_norm > 0.0 {
        let mut best = (usize::MAX, -1.0);
        for i in 0..dict.grid() {
            if selected.contains(&i) {
                continue;
            }
            let col = dict.column(i);
            let corr: Complex64 = rows.iter().zip(&residual).map(|(&r, v)| col[r].conj() * v).sum();
            let c = corr.norm();
            if c > best.1 {
                best = (i, c);
            }
        }
        selected.push(best.0);
        cols.push(active_column(best.0));
        coeffs = least_squares(&cols, y);
        residual = y.to_vec();
        for (col, c) in cols.iter().zip(&coeffs) {
            for (r, a) in residual.iter_mut().zip(col) {
                *r -= a * c;
            }
        }
        residual_norms.push(norm(&residual));
    }

    let mut coefficients: Vec<(usize, Complex64)> = selected.iter().copied().zip(coeffs).collect();
    coefficients.sort_by_key(|c| c.0);
    Ok(RelativeCirEstimate {
        grid: dict.grid(),
        spacing_hz: dict.plan().spacing(),
        coefficients,
        column_scale,
        residual_norms,
        selection_order: selected,
    })
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Residual `y - D_S c` for a given estimate, over the active rows.
pub fn residual(y: &[Complex64], dict: &Dictionary, est: &RelativeCirEstimate) -> Vec<Complex64> {
    let rows = dict.active_rows();
    let renorm = (dict.rows() as f64 / rows.len() as f64).sqrt();
    let mut r = y.to_vec();
    for &(i, c) in &est.coefficients {
        let col = dict.column(i);
        for (v, &row) in r.iter_mut().zip(&rows) {
            *v -= col[row] * renorm * c;
        }
    }
    r
}

#[allow(dead_code)]
fn zeros(n: usize) -> Vec<Complex64> {
    vec![ZERO; n]
}
