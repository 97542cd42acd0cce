//! Seeded Monte-Carlo comparison of the spliced estimator and the
//! squared-carrier baseline.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::andenoise::AdmmOptions;
use crate::chronos::{chronos_tof, BpdnOptions, DEFAULT_GRID_FACTOR, DEFAULT_SIGNIFICANCE};
use crate::cleaner::{clean_all, CleanedBandSet};
use crate::error::{Error, Result};
use crate::handshake::{ranging_error, resolve, squared_cfr, AmbiguityGrid, ResolvedCir};
use crate::model::{
    default_band_plan_with, draw_cir, synth_distorted, synth_handshake, BandPlan, Cir, CsiMatrix, DistortionParams,
    HandshakeSamples, NoiseModel, Tap, DEFAULT_SUBCARRIERS, SPEED_OF_LIGHT,
};
use crate::phase::quantize_delay;
use crate::rng::{Seeder, Stream};
use crate::splicer::{build_dictionary, omp, splice, Dictionary, RelativeCirEstimate};

/// Denoiser SNR for runs with noise disabled.
pub const NOISELESS_SNR_DB: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub snr_db: f64,
    /// Paths per channel.
    pub sparsity: usize,
    /// Longest path length, meters.
    pub d_max: f64,
    pub variance_base: f64,
    /// Largest per-band timing offset, seconds.
    pub delta_max: f64,
    pub bands: usize,
    pub subcarriers: usize,
    /// Splicing dictionary size; `None` means `2 M N`.
    pub grid: Option<usize>,
    /// Baseline delay grid size; `None` means `32 M`.
    pub chronos_grid: Option<usize>,
    pub tau_grid: usize,
    pub theta_grid: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    /// Ask OMP for two more paths than the channel has.
    pub conservative: bool,
    pub noise: bool,
    pub distortion: bool,
    /// Put the first delay on the search grid and the others on the
    /// dictionary grid relative to it.
    pub snap: bool,
    /// Significance threshold of the baseline's peak picking.
    pub significance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            snr_db: 20.0,
            sparsity: 3,
            d_max: 100.0,
            variance_base: 4.0,
            delta_max: 960e-9,
            bands: 16,
            subcarriers: DEFAULT_SUBCARRIERS,
            grid: None,
            chronos_grid: None,
            tau_grid: crate::handshake::DEFAULT_TAU_POINTS,
            theta_grid: crate::handshake::DEFAULT_THETA_POINTS,
            seed: 1,
            threads: 0,
            conservative: false,
            noise: true,
            distortion: true,
            snap: false,
            significance: DEFAULT_SIGNIFICANCE,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value {value:?} for {key}")))
}

impl ExperimentConfig {
    /// Sets one field by its flag name (`snr-db`, `tau-grid`, ...).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        match key.as_str() {
            "trials" => self.trials = parse_value(&key, value)?,
            "snr-db" => self.snr_db = parse_value(&key, value)?,
            "sparsity" | "k" => self.sparsity = parse_value(&key, value)?,
            "d-max" => self.d_max = parse_value(&key, value)?,
            "variance-base" => self.variance_base = parse_value(&key, value)?,
            "delta-max" => self.delta_max = parse_value(&key, value)?,
            "bands" => self.bands = parse_value(&key, value)?,
            "subcarriers" => self.subcarriers = parse_value(&key, value)?,
            "grid" => self.grid = Some(parse_value(&key, value)?),
            "chronos-grid" => self.chronos_grid = Some(parse_value(&key, value)?),
            "tau-grid" => self.tau_grid = parse_value(&key, value)?,
            "theta-grid" => self.theta_grid = parse_value(&key, value)?,
            "seed" => self.seed = parse_value(&key, value)?,
            "threads" => self.threads = parse_value(&key, value)?,
            "conservative" => self.conservative = parse_value(&key, value)?,
            "noise" => self.noise = parse_value(&key, value)?,
            "distortion" => self.distortion = parse_value(&key, value)?,
            "snap" => self.snap = parse_value(&key, value)?,
            "significance" => self.significance = parse_value(&key, value)?,
            _ => return Err(Error::Parse(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    /// Keys the harness does not own (such as `out`) are returned.
    pub fn apply_file_text(&mut self, text: &str) -> Result<Vec<(String, String)>> {
        let mut other = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "out" {
                other.push((k.to_string(), v.to_string()));
            } else {
                self.set(k, v)?;
            }
        }
        Ok(other)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidArgument("snr-db must be finite".into()));
        }
        if self.sparsity == 0 {
            return Err(Error::InvalidArgument("sparsity must be at least 1".into()));
        }
        if !(self.d_max >= 0.0 && self.d_max.is_finite()) {
            return Err(Error::InvalidArgument("d-max must be finite and non-negative".into()));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::InvalidArgument("significance must lie in (0, 1)".into()));
        }
        AmbiguityGrid::new(self.tau_grid, self.theta_grid)?;
        self.plan()?;
        Ok(())
    }

    pub fn plan(&self) -> Result<BandPlan> {
        default_band_plan_with(self.bands, self.subcarriers)
    }

    pub fn snr(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// SNR the denoiser is tuned for. Noiseless pilots get a high finite
    /// value, since the regularization weight must stay positive.
    pub fn denoise_snr(&self) -> f64 {
        if self.noise {
            self.snr()
        } else {
            10f64.powf(NOISELESS_SNR_DB / 10.0)
        }
    }

    pub fn tau_max(&self) -> f64 {
        self.d_max / SPEED_OF_LIGHT
    }

    pub fn dictionary_size(&self) -> usize {
        self.grid.unwrap_or(2 * self.bands * self.subcarriers)
    }

    pub fn chronos_size(&self) -> usize {
        self.chronos_grid.unwrap_or(DEFAULT_GRID_FACTOR * self.bands)
    }

    pub fn ambiguity_grid(&self) -> AmbiguityGrid {
        AmbiguityGrid::new(self.tau_grid, self.theta_grid).expect("validated grid")
    }

    pub fn omp_sparsity(&self) -> usize {
        if self.conservative {
            self.sparsity + 2
        } else {
            self.sparsity
        }
    }
}

/// Inputs of one simulated trial.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cir: Cir,
    pub distortion: DistortionParams,
    pub csi: CsiMatrix,
    pub handshake: HandshakeSamples,
    /// `||q - H^2||` over the carrier pilots.
    pub squared_noise_norm: f64,
}

/// Puts the first delay on the search grid and the later ones on the
/// dictionary grid relative to it.
pub fn snap_cir(cir: &Cir, plan: &BandPlan, dictionary_size: usize, grid: &AmbiguityGrid) -> Result<Cir> {
    let tof = grid.tau(grid.nearest_tau(cir.tof(), plan), plan);
    let step = 1.0 / (dictionary_size as f64 * plan.spacing());
    let mut last: Option<i64> = None;
    let taps = cir
        .taps()
        .iter()
        .map(|t| {
            let mut i = ((t.delay() - cir.tof()) / step).round() as i64;
            if let Some(prev) = last {
                i = i.max(prev + 1);
            }
            last = Some(i);
            Tap::polar(quantize_delay(tof + i as f64 * step), t.magnitude(), t.phase())
        })
        .collect();
    Cir::new(taps)
}

pub fn draw_scenario(config: &ExperimentConfig, plan: &BandPlan, trial: u64) -> Result<Scenario> {
    let seeder = Seeder::new(config.seed);
    let mut cir = draw_cir(
        &mut seeder.rng(trial, Stream::Channel),
        config.sparsity,
        config.tau_max(),
        config.variance_base,
    )?;
    if config.snap {
        cir = snap_cir(&cir, plan, config.dictionary_size(), &config.ambiguity_grid())?;
    }
    let distortion = if config.distortion {
        DistortionParams::draw(&mut seeder.rng(trial, Stream::Distortion), plan, config.delta_max)?
    } else {
        DistortionParams::none(plan)
    };
    let noise = if config.noise {
        Some(NoiseModel::from_db(config.snr_db)?)
    } else {
        None
    };
    let csi = synth_distorted(&cir, plan, &distortion, noise.as_ref(), &mut seeder.rng(trial, Stream::CsiNoise))?;
    let handshake = synth_handshake(
        &cir,
        plan,
        &distortion,
        noise.as_ref(),
        &mut seeder.rng(trial, Stream::HandshakeNoise),
    )?;
    let squared_noise_norm = squared_cfr(&handshake)
        .iter()
        .zip(plan.carriers_hz())
        .map(|(q, &f)| {
            let h = cir.response(f);
            (q - h * h).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    Ok(Scenario {
        cir,
        distortion,
        csi,
        handshake,
        squared_noise_norm,
    })
}

/// Output of the spliced estimator on one set of pilots.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub cleaned: CleanedBandSet,
    pub relative: RelativeCirEstimate,
    pub resolved: ResolvedCir,
}

/// Cleaning, splicing, sparse recovery and disambiguation.
pub fn run_pipeline(
    csi: &CsiMatrix,
    handshake: &HandshakeSamples,
    snr: f64,
    sparsity: usize,
    plan: &BandPlan,
    dict: &Dictionary,
    grid: AmbiguityGrid,
) -> Result<PipelineOutput> {
    let cleaned = clean_all(csi, snr, plan, &AdmmOptions::default())?;
    let y = splice(&cleaned)?;
    let masked = dict.with_active_bands(&cleaned.usable())?;
    let relative = omp(&y, &masked, sparsity)?;
    let resolved = resolve(&relative, &squared_cfr(handshake), plan, grid)?;
    Ok(PipelineOutput {
        cleaned,
        relative,
        resolved,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub true_tof: f64,
    pub prop_tof: Option<f64>,
    pub prop_err: Option<f64>,
    pub chronos_tof: Option<f64>,
    pub chronos_err: Option<f64>,
    /// Paths found in each band.
    pub band_support: Vec<usize>,
    pub flags: Vec<String>,
}

fn error_code(e: &Error) -> &'static str {
    match e {
        Error::NoUsableBands => "no_usable_bands",
        Error::DegenerateDictionary { .. } => "degenerate_dictionary",
        Error::DegenerateEstimate => "degenerate_estimate",
        Error::NoSignificantTap => "no_significant_tap",
        Error::NotConverged { .. } => "not_converged",
        _ => "error",
    }
}

/// Runs one seeded trial; stage failures become flags.
pub fn run_trial(config: &ExperimentConfig, plan: &BandPlan, dict: &Dictionary, trial: u64) -> Result<TrialRecord> {
    let scenario = draw_scenario(config, plan, trial)?;
    let true_tof = scenario.cir.tof();
    let mut flags = Vec::new();
    let mut band_support = Vec::new();

    let (prop_tof, prop_err) = match run_pipeline(
        &scenario.csi,
        &scenario.handshake,
        config.denoise_snr(),
        config.omp_sparsity(),
        plan,
        dict,
        config.ambiguity_grid(),
    ) {
        Ok(out) => {
            band_support = out.cleaned.support_counts();
            let unusable = plan.num_bands() - out.cleaned.usable_count();
            if unusable > 0 {
                flags.push(format!("unusable_bands={unusable}"));
            }
            let unconverged = out.cleaned.diagnostics.iter().filter(|d| !d.converged).count();
            if unconverged > 0 {
                flags.push(format!("unconverged_bands={unconverged}"));
            }
            let tof = out.resolved.tof;
            (Some(tof), Some(ranging_error(true_tof, tof)))
        }
        Err(e) => {
            log::warn!("trial {trial}: spliced estimator failed: {e}");
            flags.push(format!("prop_failed={}", error_code(&e)));
            (None, None)
        }
    };

    let (chronos_tof_s, chronos_err) = match chronos_tof(
        &scenario.handshake,
        plan,
        config.chronos_size(),
        scenario.squared_noise_norm,
        config.significance,
        &BpdnOptions::default(),
    ) {
        Ok(est) => {
            if !est.solution.converged {
                flags.push("chronos_unconverged".into());
            }
            (Some(est.tof), Some(ranging_error(true_tof, est.tof)))
        }
        Err(e) => {
            log::warn!("trial {trial}: baseline failed: {e}");
            flags.push(format!("chronos_failed={}", error_code(&e)));
            (None, None)
        }
    };

    let record = TrialRecord {
        trial,
        true_tof,
        prop_tof,
        prop_err,
        chronos_tof: chronos_tof_s,
        chronos_err,
        band_support,
        flags,
    };
    log::info!(
        "trial {}: tof {:.4} ns, proposed err {}, baseline err {}, paths per band {:?}",
        trial,
        true_tof * 1e9,
        fmt_opt_m(record.prop_err),
        fmt_opt_m(record.chronos_err),
        record.band_support
    );
    Ok(record)
}

fn fmt_opt_m(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |e| format!("{e:.4} m"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.16e}"))
}

pub const RESULTS_HEADER: &str = "trial,true_tof_s,prop_tof_s,prop_err_m,chronos_tof_s,chronos_err_m,flags";

pub fn write_results<W: Write>(mut out: W, records: &[TrialRecord]) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{:.16e},{},{},{},{},{}",
            r.trial,
            r.true_tof,
            fmt_opt(r.prop_tof),
            fmt_opt(r.prop_err),
            fmt_opt(r.chronos_tof),
            fmt_opt(r.chronos_err),
            r.flags.join("|")
        )?;
    }
    Ok(())
}

/// Sorted errors with the empirical CDF, `error_m,cdf`.
pub fn write_cdf<W: Write>(mut out: W, errors: &[f64]) -> Result<()> {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    writeln!(out, "error_m,cdf")?;
    let n = sorted.len() as f64;
    for (i, e) in sorted.iter().enumerate() {
        writeln!(out, "{:.16e},{:.16e}", e, (i + 1) as f64 / n)?;
    }
    Ok(())
}

/// Nearest-rank percentile: the smallest value with at least `p` percent of
/// the sample at or below it.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&p) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // multiply first so integer p and n give an exact product
    let rank = (p * sorted.len() as f64 / 100.0).ceil().max(1.0) as usize;
    Some(sorted[rank - 1])
}

pub const PERCENTILES: [f64; 3] = [50.0, 90.0, 95.0];

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Percentiles over successful trials.
    pub exclusive: Vec<Option<f64>>,
    /// Percentiles with failures counted as infinite error.
    pub inclusive: Vec<Option<f64>>,
}

impl MethodSummary {
    pub fn from_errors(name: &'static str, errors: &[Option<f64>]) -> Self {
        let ok: Vec<f64> = errors.iter().flatten().copied().collect();
        let all: Vec<f64> = errors.iter().map(|e| e.unwrap_or(f64::INFINITY)).collect();
        let failures = errors.len() - ok.len();
        Self {
            name,
            trials: errors.len(),
            failures,
            exclusive: PERCENTILES.iter().map(|&p| percentile(&ok, p)).collect(),
            inclusive: PERCENTILES.iter().map(|&p| percentile(&all, p).filter(|v| v.is_finite())).collect(),
        }
    }

    pub fn usable(&self) -> bool {
        self.failures < self.trials
    }

    pub fn p(&self, pct: f64) -> Option<f64> {
        PERCENTILES
            .iter()
            .position(|&q| q == pct)
            .and_then(|i| self.exclusive[i])
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub proposed: MethodSummary,
    pub chronos: MethodSummary,
}

impl ExperimentResult {
    pub fn proposed_errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.prop_err).collect()
    }

    pub fn chronos_errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.chronos_err).collect()
    }

    pub fn all_usable(&self) -> bool {
        self.proposed.usable() && self.chronos.usable()
    }

    pub fn summary_text(&self, config: &ExperimentConfig, timestamp: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# generated {timestamp}");
        let _ = writeln!(
            s,
            "# trials={} seed={} snr_db={} bands={} subcarriers={} sparsity={}",
            config.trials, config.seed, config.snr_db, config.bands, config.subcarriers, config.sparsity
        );
        let _ = writeln!(s, "method,scope,trials,failures,p50_m,p90_m,p95_m");
        for m in [&self.proposed, &self.chronos] {
            for (scope, vals) in [("exclusive", &m.exclusive), ("inclusive", &m.inclusive)] {
                let cells: Vec<String> = vals
                    .iter()
                    .map(|v| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6e}")))
                    .collect();
                let _ = writeln!(s, "{},{},{},{},{}", m.name, scope, m.trials, m.failures, cells.join(","));
            }
        }
        s
    }
}

/// Runs every trial and summarizes both methods.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    faer::set_global_parallelism(faer::Par::Seq);
    let plan = config.plan()?;
    let dict = build_dictionary(&plan, config.dictionary_size())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    let records = pool.install(|| {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(config, &plan, &dict, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let prop: Vec<Option<f64>> = records.iter().map(|r| r.prop_err).collect();
    let chr: Vec<Option<f64>> = records.iter().map(|r| r.chronos_err).collect();
    Ok(ExperimentResult {
        proposed: MethodSummary::from_errors("proposed", &prop),
        chronos: MethodSummary::from_errors("chronos", &chr),
        records,
    })
}

/// Writes `results.csv`, `cdf_proposed.csv`, `cdf_chronos.csv` and
/// `summary.txt` into `dir`.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_results(crate::io::create(&dir.join("results.csv"))?, &result.records)?;
    write_cdf(crate::io::create(&dir.join("cdf_proposed.csv"))?, &result.proposed_errors())?;
    write_cdf(crate::io::create(&dir.join("cdf_chronos.csv"))?, &result.chronos_errors())?;
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let stamp = format!("unix {secs}");
    std::fs::write(dir.join("summary.txt"), result.summary_text(config, &stamp))?;
    Ok(())
}

/// Relative channel with physical gains as `(delay, gain)` pairs.
pub fn relative_taps(est: &RelativeCirEstimate) -> Vec<(f64, Complex64)> {
    est.taps().into_iter().map(|(i, g)| (est.delay(i), g)).collect()
}
