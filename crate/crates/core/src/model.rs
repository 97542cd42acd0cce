//! Channel and impairment simulator.
//!
//! Frequencies are whole hertz and delays sit on the 2^-64 s lattice of
//! [`crate::phase`], so every per-path phase is computed exactly modulo one
//! cycle before it is turned into a complex exponential.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::phase::{quantize_delay, Turns};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default subcarrier spacing, Hz.
pub const DEFAULT_SPACING_HZ: i64 = 312_500;

/// Default subcarriers per band.
pub const DEFAULT_SUBCARRIERS: usize = 65;

/// Default carrier frequencies, Hz: eight 20 MHz bands in 2.00-2.19 GHz and
/// eight in 5.00-5.19 GHz. The gaps between bands are deliberately uneven; a
/// uniform raster makes the squared carrier response periodic in delay and
/// leaves time of flight ambiguous. The high group is offset by 0.2 MHz so
/// no two carriers coincide modulo `32 M f_s`, which would make rows of the
/// baseline's Fourier matrix identical.
pub const DEFAULT_CARRIERS_HZ: [i64; 16] = [
    2_010_000_000,
    2_031_800_000,
    2_052_800_000,
    2_075_700_000,
    2_096_300_000,
    2_118_600_000,
    2_139_800_000,
    2_175_500_000,
    5_010_200_000,
    5_033_200_000,
    5_059_400_000,
    5_080_800_000,
    5_105_400_000,
    5_127_500_000,
    5_159_700_000,
    5_180_000_000,
];

/// Frequency layout of the measured bands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandPlan {
    subcarriers: usize,
    spacing_hz: i64,
    carriers_hz: Vec<i64>,
}

impl BandPlan {
    pub fn new(subcarriers: usize, spacing_hz: i64, carriers_hz: Vec<i64>) -> Result<Self> {
        if subcarriers == 0 || subcarriers % 2 == 0 {
            return Err(Error::BandPlan(format!(
                "subcarriers per band must be odd, got {subcarriers}"
            )));
        }
        if spacing_hz <= 0 {
            return Err(Error::BandPlan("subcarrier spacing must be positive".into()));
        }
        if carriers_hz.is_empty() {
            return Err(Error::BandPlan("at least one band is required".into()));
        }
        let half = (subcarriers as i64 - 1) / 2;
        let width = 2 * half * spacing_hz;
        if carriers_hz[0] - half * spacing_hz <= 0 {
            return Err(Error::BandPlan("lowest subcarrier must be above 0 Hz".into()));
        }
        for w in carriers_hz.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::BandPlan("carriers must be strictly increasing".into()));
            }
            if w[1] - w[0] < width {
                return Err(Error::BandPlan(format!(
                    "carriers {} Hz and {} Hz are closer than the band width {width} Hz",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self {
            subcarriers,
            spacing_hz,
            carriers_hz,
        })
    }

    /// Equally spaced carriers, `count` of them starting at `first_hz`.
    pub fn uniform(subcarriers: usize, spacing_hz: i64, first_hz: i64, step_hz: i64, count: usize) -> Result<Self> {
        let carriers = (0..count as i64).map(|m| first_hz + m * step_hz).collect();
        Self::new(subcarriers, spacing_hz, carriers)
    }

    pub fn num_bands(&self) -> usize {
        self.carriers_hz.len()
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// Total number of measured subcarriers across all bands.
    pub fn total_subcarriers(&self) -> usize {
        self.subcarriers * self.carriers_hz.len()
    }

    pub fn spacing_hz(&self) -> i64 {
        self.spacing_hz
    }

    pub fn spacing(&self) -> f64 {
        self.spacing_hz as f64
    }

    pub fn carriers_hz(&self) -> &[i64] {
        &self.carriers_hz
    }

    pub fn carrier_hz(&self, band: usize) -> i64 {
        self.carriers_hz[band]
    }

    /// Largest subcarrier index, `(N - 1) / 2`.
    pub fn half_width(&self) -> i64 {
        (self.subcarriers as i64 - 1) / 2
    }

    /// Signed subcarrier indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = i64> + Clone {
        let h = self.half_width();
        -h..=h
    }

    /// Storage position of signed subcarrier index `n`.
    pub fn position(&self, n: i64) -> usize {
        (n + self.half_width()) as usize
    }

    /// Frequency of subcarrier `n` of `band`, Hz.
    pub fn frequency_hz(&self, band: usize, n: i64) -> i64 {
        self.carriers_hz[band] + n * self.spacing_hz
    }

    /// Unambiguous delay range `1 / f_s`, seconds.
    pub fn max_delay(&self) -> f64 {
        1.0 / self.spacing()
    }

    /// All subcarrier frequencies, band-major then index ascending.
    pub fn stacked_frequencies_hz(&self) -> Vec<i64> {
        (0..self.num_bands())
            .flat_map(|m| self.indices().map(move |n| self.frequency_hz(m, n)))
            .collect()
    }

    /// Keeps only the listed bands, in order.
    pub fn select_bands(&self, bands: &[usize]) -> Result<Self> {
        let carriers = bands
            .iter()
            .map(|&m| {
                self.carriers_hz
                    .get(m)
                    .copied()
                    .ok_or_else(|| Error::BandPlan(format!("band {m} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.subcarriers, self.spacing_hz, carriers)
    }
}

/// 16 bands of 65 subcarriers at 312.5 kHz spacing.
pub fn default_band_plan() -> BandPlan {
    BandPlan::new(DEFAULT_SUBCARRIERS, DEFAULT_SPACING_HZ, DEFAULT_CARRIERS_HZ.to_vec())
        .expect("default plan is valid")
}

/// Default plan restricted to `bands` bands: the lower group fills first,
/// alternating so both frequency groups stay represented.
pub fn default_band_plan_with(bands: usize, subcarriers: usize) -> Result<BandPlan> {
    if bands == 0 || bands > DEFAULT_CARRIERS_HZ.len() {
        return Err(Error::BandPlan(format!(
            "default plan supports 1..={} bands, got {bands}",
            DEFAULT_CARRIERS_HZ.len()
        )));
    }
    let low = bands.div_ceil(2);
    let high = bands / 2;
    let mut carriers: Vec<i64> = DEFAULT_CARRIERS_HZ[..low].to_vec();
    carriers.extend_from_slice(&DEFAULT_CARRIERS_HZ[8..8 + high]);
    BandPlan::new(subcarriers, DEFAULT_SPACING_HZ, carriers)
}

/// One propagation path. The gain is kept in polar form with an exact phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    delay: f64,
    magnitude: f64,
    phase: Turns,
}

impl Tap {
    pub fn new(delay: f64, gain: Complex64) -> Self {
        Self::polar(delay, gain.norm(), Turns::from_radians(gain.arg()))
    }

    pub fn polar(delay: f64, magnitude: f64, phase: Turns) -> Self {
        Self {
            delay: quantize_delay(delay),
            magnitude,
            phase,
        }
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn gain(&self) -> Complex64 {
        self.phase.cis() * self.magnitude
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn phase(&self) -> Turns {
        self.phase
    }
}

/// Sparse channel impulse response, taps sorted by delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    taps: Vec<Tap>,
}

impl Cir {
    pub fn new(taps: Vec<Tap>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Cir("a channel needs at least one tap".into()));
        }
        for t in &taps {
            if !t.delay.is_finite() || t.delay < 0.0 || !t.magnitude.is_finite() {
                return Err(Error::Cir(format!("invalid tap {t:?}")));
            }
        }
        if taps.windows(2).any(|w| w[1].delay <= w[0].delay) {
            return Err(Error::Cir("delays must be strictly increasing".into()));
        }
        Ok(Self { taps })
    }

    pub fn from_pairs(pairs: &[(f64, Complex64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(d, g)| Tap::new(d, g)).collect())
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn sparsity(&self) -> usize {
        self.taps.len()
    }

    /// Time of flight: delay of the first tap.
    pub fn tof(&self) -> f64 {
        self.taps[0].delay
    }

    /// Phase of the first tap's gain, radians in `[0, 2 pi)`.
    pub fn first_phase(&self) -> f64 {
        self.taps[0].phase.radians()
    }

    pub fn delays(&self) -> Vec<f64> {
        self.taps.iter().map(Tap::delay).collect()
    }

    pub fn gains(&self) -> Vec<Complex64> {
        self.taps.iter().map(Tap::gain).collect()
    }

    /// The channel shifted so its first tap sits at delay zero with a
    /// real positive gain.
    pub fn relative(&self) -> Cir {
        let d0 = self.taps[0].delay;
        let p0 = self.taps[0].phase;
        Cir {
            taps: self
                .taps
                .iter()
                .map(|t| Tap::polar(t.delay - d0, t.magnitude, t.phase - p0))
                .collect(),
        }
    }

    pub fn check_range(&self, max_delay: f64) -> Result<()> {
        match self.taps.iter().find(|t| t.delay >= max_delay) {
            Some(t) => Err(Error::DelayRange {
                delay_s: t.delay,
                max_s: max_delay,
            }),
            None => Ok(()),
        }
    }

    /// Frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: i64) -> Complex64 {
        self.taps
            .iter()
            .map(|t| (t.phase - Turns::of_product(freq_hz, t.delay)).cis() * t.magnitude)
            .sum()
    }
}

/// Per-band timing and phase offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandDistortion {
    timing_offset: f64,
    phase_offset: Turns,
}

impl BandDistortion {
    /// Timing offset in seconds and phase offset in cycles.
    pub fn new(timing_offset: f64, phase_offset_cycles: f64) -> Self {
        Self {
            timing_offset: quantize_delay(timing_offset),
            phase_offset: Turns::from_cycles(phase_offset_cycles),
        }
    }

    pub fn from_turns(timing_offset: f64, phase_offset: Turns) -> Self {
        Self {
            timing_offset: quantize_delay(timing_offset),
            phase_offset,
        }
    }

    pub fn timing_offset(&self) -> f64 {
        self.timing_offset
    }

    /// Cycles in `[0, 1)`.
    pub fn phase_offset(&self) -> f64 {
        self.phase_offset.cycles()
    }

    pub fn phase_turns(&self) -> Turns {
        self.phase_offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionParams {
    bands: Vec<BandDistortion>,
}

impl DistortionParams {
    pub fn new(plan: &BandPlan, bands: Vec<BandDistortion>) -> Result<Self> {
        if bands.len() != plan.num_bands() {
            return Err(Error::Distortion(format!(
                "expected {} bands, got {}",
                plan.num_bands(),
                bands.len()
            )));
        }
        let max = plan.max_delay();
        for b in &bands {
            if !(b.timing_offset >= 0.0 && b.timing_offset < max) {
                return Err(Error::DelayRange {
                    delay_s: b.timing_offset,
                    max_s: max,
                });
            }
        }
        Ok(Self { bands })
    }

    pub fn none(plan: &BandPlan) -> Self {
        Self {
            bands: vec![BandDistortion::new(0.0, 0.0); plan.num_bands()],
        }
    }

    /// Timing offsets uniform on `[0, delta_max]`, phase offsets uniform
    /// over the full circle.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, plan: &BandPlan, delta_max: f64) -> Result<Self> {
        if !(delta_max >= 0.0 && delta_max < plan.max_delay()) {
            return Err(Error::InvalidArgument(format!(
                "maximum timing offset {delta_max:e} s must lie in [0, 1/f_s)"
            )));
        }
        let bands = (0..plan.num_bands())
            .map(|_| {
                let delta = if delta_max > 0.0 {
                    rng.random_range(0.0..=delta_max)
                } else {
                    0.0
                };
                BandDistortion::from_turns(delta, Turns(rng.random()))
            })
            .collect();
        Self::new(plan, bands)
    }

    pub fn bands(&self) -> &[BandDistortion] {
        &self.bands
    }

    pub fn band(&self, m: usize) -> &BandDistortion {
        &self.bands[m]
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiKind {
    Ideal,
    Distorted,
    Cleaned,
}

impl CsiKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CsiKind::Ideal => "ideal",
            CsiKind::Distorted => "distorted",
            CsiKind::Cleaned => "cleaned",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ideal" => Some(CsiKind::Ideal),
            "distorted" => Some(CsiKind::Distorted),
            "cleaned" => Some(CsiKind::Cleaned),
            _ => None,
        }
    }
}

/// Complex pilot observations, one row per band, subcarriers in ascending
/// signed index.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMatrix {
    num_bands: usize,
    subcarriers: usize,
    values: Vec<Complex64>,
    kind: CsiKind,
}

impl CsiMatrix {
    pub fn zeros(plan: &BandPlan, kind: CsiKind) -> Self {
        Self {
            num_bands: plan.num_bands(),
            subcarriers: plan.subcarriers(),
            values: vec![Complex64::new(0.0, 0.0); plan.total_subcarriers()],
            kind,
        }
    }

    pub fn from_values(plan: &BandPlan, values: Vec<Complex64>, kind: CsiKind) -> Result<Self> {
        if values.len() != plan.total_subcarriers() {
            return Err(Error::Dimension {
                expected: format!("{} samples", plan.total_subcarriers()),
                actual: format!("{} samples", values.len()),
            });
        }
        Ok(Self {
            num_bands: plan.num_bands(),
            subcarriers: plan.subcarriers(),
            values,
            kind,
        })
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn kind(&self) -> CsiKind {
        self.kind
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn band(&self, m: usize) -> &[Complex64] {
        &self.values[m * self.subcarriers..(m + 1) * self.subcarriers]
    }

    pub fn band_mut(&mut self, m: usize) -> &mut [Complex64] {
        &mut self.values[m * self.subcarriers..(m + 1) * self.subcarriers]
    }

    /// Sample at band `m`, signed subcarrier index `n`.
    pub fn get(&self, m: usize, n: i64) -> Complex64 {
        let half = (self.subcarriers as i64 - 1) / 2;
        self.band(m)[(n + half) as usize]
    }

    pub fn check_plan(&self, plan: &BandPlan) -> Result<()> {
        if self.num_bands != plan.num_bands() || self.subcarriers != plan.subcarriers() {
            return Err(Error::Dimension {
                expected: format!("{}x{}", plan.num_bands(), plan.subcarriers()),
                actual: format!("{}x{}", self.num_bands, self.subcarriers),
            });
        }
        Ok(())
    }
}

/// Carrier-frequency pilots observed at the two access points.
#[derive(Debug, Clone, PartialEq)]
pub struct HandshakeSamples {
    pub tx: Vec<Complex64>,
    pub rx: Vec<Complex64>,
}

impl HandshakeSamples {
    pub fn new(tx: Vec<Complex64>, rx: Vec<Complex64>) -> Result<Self> {
        if tx.len() != rx.len() {
            return Err(Error::Dimension {
                expected: format!("{} receiver samples", tx.len()),
                actual: format!("{}", rx.len()),
            });
        }
        Ok(Self { tx, rx })
    }

    pub fn num_bands(&self) -> usize {
        self.tx.len()
    }
}

/// Circularly-symmetric complex white Gaussian noise of variance `1 / snr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    snr: f64,
}

impl NoiseModel {
    pub fn new(snr: f64) -> Result<Self> {
        if !(snr > 0.0) || snr.is_nan() {
            return Err(Error::InvalidArgument(format!("snr must be positive, got {snr}")));
        }
        Ok(Self { snr })
    }

    pub fn from_db(snr_db: f64) -> Result<Self> {
        Self::new(10f64.powf(snr_db / 10.0))
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn variance(&self) -> f64 {
        1.0 / self.snr
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let s = (0.5 * self.variance()).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    }
}

/// Draws `k` paths with delays uniform on `[0, tau_max]` and gain `i`
/// (1-based) complex Gaussian with variance `variance_base^-i`.
pub fn draw_cir<R: Rng + ?Sized>(rng: &mut R, k: usize, tau_max: f64, variance_base: f64) -> Result<Cir> {
    if k == 0 {
        return Err(Error::InvalidArgument("sparsity must be at least 1".into()));
    }
    if !(tau_max >= 0.0) || !tau_max.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid maximum delay {tau_max}")));
    }
    if !(variance_base > 0.0) || !variance_base.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid variance base {variance_base}")));
    }
    if tau_max == 0.0 && k > 1 {
        return Err(Error::InvalidArgument(
            "cannot draw distinct delays from a zero-length interval".into(),
        ));
    }
    let mut delays: Vec<f64> = loop {
        let mut d: Vec<f64> = (0..k)
            .map(|_| quantize_delay(if tau_max > 0.0 { rng.random_range(0.0..=tau_max) } else { 0.0 }))
            .collect();
        d.sort_by(f64::total_cmp);
        if d.windows(2).all(|w| w[1] > w[0]) {
            break d;
        }
    };
    delays.truncate(k);
    let noise_unit = NoiseModel { snr: 1.0 };
    let taps = delays
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let sd = variance_base.powi(-(i as i32 + 1)).sqrt();
            Tap::new(d, noise_unit.sample(rng) * sd)
        })
        .collect();
    Cir::new(taps)
}

/// Ideal frequency response at every subcarrier of `plan`.
pub fn synth_cfr(cir: &Cir, plan: &BandPlan) -> Result<CsiMatrix> {
    cir.check_range(plan.max_delay())?;
    let mut csi = CsiMatrix::zeros(plan, CsiKind::Ideal);
    for m in 0..plan.num_bands() {
        for (slot, n) in csi.band_mut(m).iter_mut().zip(plan.indices()) {
            *slot = cir.response(plan.frequency_hz(m, n));
        }
    }
    Ok(csi)
}

/// Phase distortion `psi[m, n] = -2 pi (delta_m n f_s + phi_m)` in turns.
pub fn distortion_phase(plan: &BandPlan, band: &BandDistortion, n: i64) -> Turns {
    -(Turns::of_product(n * plan.spacing_hz(), band.timing_offset) + band.phase_offset)
}

/// Applies the per-band phase distortion to an already synthesized response
/// and adds noise.
pub fn apply_distortion<R: Rng + ?Sized>(
    csi_ideal: &CsiMatrix,
    plan: &BandPlan,
    distortion: &DistortionParams,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<CsiMatrix> {
    csi_ideal.check_plan(plan)?;
    check_bands(plan, distortion.len())?;
    let mut out = CsiMatrix::zeros(plan, CsiKind::Distorted);
    for m in 0..plan.num_bands() {
        let band = distortion.band(m);
        let src = csi_ideal.band(m);
        for ((dst, &h), n) in out.band_mut(m).iter_mut().zip(src).zip(plan.indices()) {
            *dst = distortion_phase(plan, band, n).cis() * h;
            if let Some(nm) = noise {
                *dst += nm.sample(rng);
            }
        }
    }
    Ok(out)
}

/// Distorted, noisy pilots synthesized directly from the channel with every
/// path's phase accumulated exactly. Equivalent channel/distortion pairs give
/// bit-identical output for the same noise stream.
pub fn synth_distorted<R: Rng + ?Sized>(
    cir: &Cir,
    plan: &BandPlan,
    distortion: &DistortionParams,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<CsiMatrix> {
    cir.check_range(plan.max_delay())?;
    check_bands(plan, distortion.len())?;
    let mut out = CsiMatrix::zeros(plan, CsiKind::Distorted);
    for m in 0..plan.num_bands() {
        let band = distortion.band(m);
        let f0 = plan.carrier_hz(m);
        // per-path phase at the carrier, shared by the whole band
        let base: Vec<(Turns, f64, f64)> = cir
            .taps()
            .iter()
            .map(|t| {
                (
                    t.phase() - Turns::of_product(f0, t.delay()) - band.phase_offset,
                    band.timing_offset + t.delay(),
                    t.magnitude(),
                )
            })
            .collect();
        for (dst, n) in out.band_mut(m).iter_mut().zip(plan.indices()) {
            let fn_hz = n * plan.spacing_hz();
            let mut acc = Complex64::new(0.0, 0.0);
            for &(p, d, mag) in &base {
                acc += (p - Turns::of_product(fn_hz, d)).cis() * mag;
            }
            if let Some(nm) = noise {
                acc += nm.sample(rng);
            }
            *dst = acc;
        }
    }
    Ok(out)
}

/// Carrier pilots seen by both access points: `exp(+j 2 pi phi_m) H[m, 0]` at
/// the transmitter and `exp(-j 2 pi phi_m) H[m, 0]` at the receiver, each with
/// independent noise.
pub fn synth_handshake<R: Rng + ?Sized>(
    cir: &Cir,
    plan: &BandPlan,
    distortion: &DistortionParams,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<HandshakeSamples> {
    cir.check_range(plan.max_delay())?;
    check_bands(plan, distortion.len())?;
    let mut tx = Vec::with_capacity(plan.num_bands());
    let mut rx = Vec::with_capacity(plan.num_bands());
    for m in 0..plan.num_bands() {
        let phi = distortion.band(m).phase_offset;
        let h = cir.response(plan.carrier_hz(m));
        let mut a = phi.cis() * h;
        let mut b = (-phi).cis() * h;
        if let Some(nm) = noise {
            a += nm.sample(rng);
            b += nm.sample(rng);
        }
        tx.push(a);
        rx.push(b);
    }
    Ok(HandshakeSamples { tx, rx })
}

/// The channel/distortion pair that produces the same distorted pilots after
/// moving every path `delta_bar` seconds earlier and rotating every gain by
/// `phi_bar` cycles. Band `m` absorbs the delay shift as a timing offset and
/// the rotation plus the carrier phase `f_{m,0} * delta_bar` as a phase
/// offset.
pub fn shift_equivalent_params(
    cir: &Cir,
    distortion: &DistortionParams,
    delta_bar: f64,
    phi_bar: f64,
    plan: &BandPlan,
) -> Result<(Cir, DistortionParams)> {
    check_bands(plan, distortion.len())?;
    let shift = quantize_delay(delta_bar);
    let rot = Turns::from_cycles(phi_bar);
    let max = plan.max_delay();
    let taps = cir
        .taps()
        .iter()
        .map(|t| {
            let d = t.delay() - shift;
            if !(d >= 0.0 && d < max) {
                return Err(Error::DelayRange { delay_s: d, max_s: max });
            }
            Ok(Tap::polar(d, t.magnitude(), t.phase() + rot))
        })
        .collect::<Result<Vec<_>>>()?;
    let bands = distortion
        .bands()
        .iter()
        .enumerate()
        .map(|(m, b)| {
            BandDistortion::from_turns(
                b.timing_offset + shift,
                b.phase_offset + rot + Turns::of_product(plan.carrier_hz(m), shift),
            )
        })
        .collect();
    Ok((Cir::new(taps)?, DistortionParams::new(plan, bands)?))
}

/// Ranging error in meters between a true and an estimated time of flight.
pub fn ranging_error(tau_true: f64, tau_est: f64) -> f64 {
    (tau_true - tau_est).abs() * SPEED_OF_LIGHT
}

fn check_bands(plan: &BandPlan, n: usize) -> Result<()> {
    if n != plan.num_bands() {
        return Err(Error::Dimension {
            expected: format!("{} bands", plan.num_bands()),
            actual: format!("{n} bands"),
        });
    }
    Ok(())
}
