//! Flicker-noise synthesis, switching-probability statistics, Welch spectral
//! estimation and power-law fitting.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fft_real, ifft_real, linear_fit, Window};
use crate::par;

/// Uniformly sampled real series.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSeries {
    pub samples: Vec<f64>,
    /// Sample rate, Hz.
    pub fs: f64,
    pub seed: u64,
}

impl NoiseSeries {
    pub fn new(samples: Vec<f64>, fs: f64, seed: u64) -> Result<Self> {
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::invalid(
                "fs",
                format!("sample rate must be > 0, got {fs}"),
            ));
        }
        if samples.len() < 2 {
            return Err(Error::invalid(
                "samples",
                "a series needs at least 2 samples",
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "samples",
                format!("non-finite sample at index {i}"),
            ));
        }
        Ok(Self { samples, fs, seed })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.len() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| i as f64 / self.fs).collect()
    }
}

/// Derives an independent sub-seed for stream `stream` of `seed`.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Gaussian series with one-sided PSD `S(f) = A / f^α` (`A` at 1 Hz), by
/// shaping a white spectrum and inverting it. The DC bin is zero.
pub fn gen_flicker(a: f64, alpha: f64, fs: f64, n: usize, seed: u64) -> Result<NoiseSeries> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid(
            "A",
            format!("amplitude must be > 0, got {a}"),
        ));
    }
    if !(0.0..2.0).contains(&alpha) {
        return Err(Error::invalid(
            "alpha",
            format!("exponent must be in [0, 2), got {alpha}"),
        ));
    }
    if !(fs > 0.0) || !fs.is_finite() {
        return Err(Error::invalid(
            "fs",
            format!("sample rate must be > 0, got {fs}"),
        ));
    }
    if n < 2 {
        return Err(Error::invalid("n", "a series needs at least 2 samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let nf = n as f64;
    for k in 1..=n / 2 {
        let f = k as f64 * fs / nf;
        let s = a / f.powf(alpha);
        let re: f64 = StandardNormal.sample(&mut rng);
        if 2 * k == n {
            spectrum[k] = Complex64::new((s * nf * fs).sqrt() * re, 0.0);
        } else {
            let im: f64 = StandardNormal.sample(&mut rng);
            let c = Complex64::new(re, im) * (s * nf * fs / 4.0).sqrt();
            spectrum[k] = c;
            spectrum[n - k] = c.conj();
        }
    }
    NoiseSeries::new(ifft_real(&spectrum)?, fs, seed)
}

/// Per-segment trend removal before windowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detrend {
    None,
    Mean,
    Linear,
}

impl std::str::FromStr for Detrend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Detrend::None),
            "mean" | "constant" => Ok(Detrend::Mean),
            "linear" => Ok(Detrend::Linear),
            other => Err(format!(
                "unknown detrend `{other}` (expected none, mean or linear)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchOptions {
    /// `None` picks the largest power of two not above `n / 8`.
    pub segment_length: Option<usize>,
    pub overlap: f64,
    pub window: Window,
    pub detrend: Detrend,
}

impl Default for WelchOptions {
    fn default() -> Self {
        Self {
            segment_length: None,
            overlap: 0.5,
            window: Window::Hann,
            detrend: Detrend::Mean,
        }
    }
}

pub fn default_segment_length(n: usize) -> usize {
    let target = (n / 8).max(2);
    1 << (usize::BITS - 1 - target.leading_zeros())
}

/// One-sided power spectral density, DC excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub frequencies: Vec<f64>,
    /// Power density, units of x²/Hz.
    pub psd: Vec<f64>,
    pub segment_length: usize,
    pub overlap: f64,
    pub window: Window,
    pub segments: usize,
}

impl PsdEstimate {
    /// Bin spacing, Hz.
    pub fn resolution(&self) -> f64 {
        if self.frequencies.len() > 1 {
            self.frequencies[1] - self.frequencies[0]
        } else {
            self.frequencies.first().copied().unwrap_or(0.0)
        }
    }

    /// Sum of `S·Δf` over bins with `low ≤ f ≤ high`.
    pub fn band_power(&self, low: f64, high: f64) -> f64 {
        let df = self.resolution();
        self.frequencies
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| **f >= low && **f <= high)
            .map(|(_, s)| s * df)
            .sum()
    }

    /// Power over all reported bins.
    pub fn total_power(&self) -> f64 {
        self.band_power(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn mean_level(&self) -> f64 {
        self.psd.iter().sum::<f64>() / self.psd.len() as f64
    }
}

fn detrend_segment(seg: &mut [f64], mode: Detrend) {
    let n = seg.len() as f64;
    match mode {
        Detrend::None => {}
        Detrend::Mean => {
            let m = seg.iter().sum::<f64>() / n;
            seg.iter_mut().for_each(|v| *v -= m);
        }
        Detrend::Linear => {
            let tm = (n - 1.0) / 2.0;
            let ym = seg.iter().sum::<f64>() / n;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (i, v) in seg.iter().enumerate() {
                let dt = i as f64 - tm;
                sxy += dt * (v - ym);
                sxx += dt * dt;
            }
            let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            for (i, v) in seg.iter_mut().enumerate() {
                *v -= ym + slope * (i as f64 - tm);
            }
        }
    }
}

/// Welch's averaged periodogram, normalized so white noise of variance σ²
/// gives the flat level `2σ²/fs`.
pub fn welch_psd(series: &NoiseSeries, opts: &WelchOptions) -> Result<PsdEstimate> {
    let n = series.len();
    let seg = opts
        .segment_length
        .unwrap_or_else(|| default_segment_length(n));
    if seg < 2 {
        return Err(Error::invalid(
            "segment_length",
            "segments need at least 2 samples",
        ));
    }
    if seg > n {
        return Err(Error::invalid(
            "segment_length",
            format!("segment of {seg} samples is longer than the series ({n})"),
        ));
    }
    if !(0.0..1.0).contains(&opts.overlap) {
        return Err(Error::invalid(
            "overlap",
            format!("overlap fraction must be in [0, 1), got {}", opts.overlap),
        ));
    }
    let step = ((seg as f64 * (1.0 - opts.overlap)).round() as usize).clamp(1, seg);
    let segments = (n - seg) / step + 1;
    let window = opts.window.coefficients(seg);
    let wpow: f64 = window.iter().map(|w| w * w).sum();
    let nbins = seg / 2;
    let starts: Vec<usize> = (0..segments).map(|i| i * step).collect();
    let periodograms = par::map(&starts, |&start| -> Result<Vec<f64>> {
        let mut buf = series.samples[start..start + seg].to_vec();
        detrend_segment(&mut buf, opts.detrend);
        buf.iter_mut().zip(&window).for_each(|(v, w)| *v *= w);
        let spec = fft_real(&buf)?;
        Ok((1..=nbins).map(|k| spec[k].norm_sqr()).collect())
    });
    let mut acc = vec![0.0; nbins];
    for p in periodograms {
        for (a, v) in acc.iter_mut().zip(p?) {
            *a += v;
        }
    }
    let scale = 1.0 / (series.fs * wpow * segments as f64);
    let psd = acc
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let k = i + 1;
            let fold = if 2 * k == seg { 1.0 } else { 2.0 };
            v * scale * fold
        })
        .collect();
    let frequencies = (1..=nbins)
        .map(|k| k as f64 * series.fs / seg as f64)
        .collect();
    Ok(PsdEstimate {
        frequencies,
        psd,
        segment_length: seg,
        overlap: opts.overlap,
        window: opts.window,
        segments,
    })
}

/// `S(f) = A / f^α` fit in log-log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlickerFit {
    /// Power density at 1 Hz.
    pub a: f64,
    pub alpha: f64,
    pub alpha_std_error: Option<f64>,
    /// Bins used in the fit.
    pub bins: usize,
    /// Non-positive bins dropped from the range.
    pub excluded: usize,
}

impl FlickerFit {
    pub fn eval(&self, f: f64) -> f64 {
        self.a / f.powf(self.alpha)
    }
}

/// Minimum bins a flicker fit accepts.
pub const MIN_FIT_BINS: usize = 8;

/// Straight-line fit of `log10 S` against `log10 f` over `low ≤ f ≤ high`.
pub fn fit_flicker(psd: &PsdEstimate, low: f64, high: f64) -> Result<FlickerFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut excluded = 0;
    for (&f, &s) in psd.frequencies.iter().zip(&psd.psd) {
        if f < low || f > high || f <= 0.0 {
            continue;
        }
        if s > 0.0 && s.is_finite() {
            x.push(f.log10());
            y.push(s.log10());
        } else {
            excluded += 1;
        }
    }
    if x.is_empty() && excluded > 0 {
        return Err(Error::Degenerate(format!(
            "all {excluded} bins in [{low}, {high}] Hz are non-positive"
        )));
    }
    if x.len() < MIN_FIT_BINS {
        return Err(Error::invalid(
            "f_range",
            format!(
                "[{low}, {high}] Hz holds {} usable bins; at least {MIN_FIT_BINS} are required",
                x.len()
            ),
        ));
    }
    let fit = linear_fit(&x, &y)?;
    Ok(FlickerFit {
        a: 10f64.powf(fit.params[1]),
        alpha: -fit.params[0],
        alpha_std_error: fit.std_error(0),
        bins: x.len(),
        excluded,
    })
}

/// `A_Φ = A_P · (∂Φ/∂P)²`.
pub fn flux_noise_level(a_psw: f64, dphi_dpsw: f64) -> f64 {
    a_psw * dphi_dpsw * dphi_dpsw
}

/// Inverse of [`flux_noise_level`]: the switching-probability level that maps
/// onto `a_phi`.
pub fn switching_noise_level(a_phi: f64, dphi_dpsw: f64) -> f64 {
    a_phi / (dphi_dpsw * dphi_dpsw)
}

/// Per-trial switching probability held constant over blocks of `hold`
/// consecutive trials: trial `t` uses `values[t / hold]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldSeries {
    pub values: Vec<f64>,
    pub hold: usize,
}

impl HeldSeries {
    pub fn new(values: Vec<f64>, hold: usize) -> Result<Self> {
        if hold == 0 {
            return Err(Error::invalid("hold", "hold length must be at least 1"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "p_series",
                format!("non-finite probability at index {i}"),
            ));
        }
        Ok(Self { values, hold })
    }

    pub fn per_trial(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1)
    }

    pub fn constant(p: f64, trials: usize) -> Result<Self> {
        Self::new(vec![p], trials.max(1))
    }

    pub fn trials(&self) -> usize {
        self.values.len() * self.hold
    }
}

fn binomial_count(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("p is clamped into [0, 1]")
        .sample(rng)
}

/// Switching-probability estimates from consecutive blocks of `n_rep`
/// Bernoulli trials. Each block draws from its own sub-stream of `seed`, so
/// the output does not depend on the thread schedule. Probabilities are
/// clamped into `[0, 1]`; a trailing partial block is dropped.
pub fn simulate_switching(p: &HeldSeries, n_rep: usize, seed: u64) -> Vec<f64> {
    if n_rep == 0 {
        return Vec::new();
    }
    let count = p.trials() / n_rep;
    par::map_range(count, |m| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(m as u64);
        let end = (m + 1) * n_rep;
        let mut t = m * n_rep;
        let mut hits = 0u64;
        while t < end {
            let idx = t / p.hold;
            let chunk_end = ((idx + 1) * p.hold).min(end);
            hits += binomial_count(&mut rng, (chunk_end - t) as u64, p.values[idx]);
            t = chunk_end;
        }
        hits as f64 / n_rep as f64
    })
}

/// Sample standard deviation (`n − 1` normalization).
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `√(p(1−p)/N)`.
pub fn binomial_sigma(p: f64, n_rep: usize) -> f64 {
    (p * (1.0 - p) / n_rep as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaPoint {
    pub n_rep: usize,
    pub sigma: f64,
    /// Binomial prediction at the mean probability.
    pub binomial: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaCurve {
    pub points: Vec<SigmaPoint>,
}

impl SigmaCurve {
    /// Median σ over the three largest repetition numbers.
    pub fn floor(&self) -> Option<f64> {
        let mut pts = self.points.clone();
        pts.sort_by_key(|p| p.n_rep);
        let tail: Vec<f64> = pts.iter().rev().take(3).map(|p| p.sigma).collect();
        let mut tail = tail;
        tail.sort_by(f64::total_cmp);
        match tail.len() {
            0 => None,
            1 => Some(tail[0]),
            2 => Some(0.5 * (tail[0] + tail[1])),
            _ => Some(tail[1]),
        }
    }

    /// The floor, if the three largest repetition numbers sit clearly above
    /// their binomial predictions (median ratio above 1.5).
    pub fn detected_floor(&self) -> Option<f64> {
        let floor = self.floor()?;
        let mut pts = self.points.clone();
        pts.sort_by_key(|p| p.n_rep);
        let mut ratios: Vec<f64> = pts
            .iter()
            .rev()
            .take(3)
            .map(|p| p.sigma / p.binomial)
            .collect();
        ratios.sort_by(f64::total_cmp);
        (ratios[ratios.len() / 2] > 1.5).then_some(floor)
    }

    /// First repetition number whose binomial prediction is below the floor.
    pub fn crossing(&self) -> Option<usize> {
        let floor = self.floor()?;
        let mut pts = self.points.clone();
        pts.sort_by_key(|p| p.n_rep);
        pts.iter().find(|p| p.binomial < floor).map(|p| p.n_rep)
    }
}

/// σ of `estimates` consecutive switching estimates per repetition number,
/// all taken from the start of `p`.
pub fn sigma_vs_nrep(
    p: &HeldSeries,
    n_reps: &[usize],
    estimates: usize,
    seed: u64,
) -> Result<SigmaCurve> {
    if estimates < 2 {
        return Err(Error::invalid(
            "estimates_per_point",
            "need at least 2 estimates per point",
        ));
    }
    let mut points = Vec::with_capacity(n_reps.len());
    for (i, &n_rep) in n_reps.iter().enumerate() {
        if n_rep == 0 {
            return Err(Error::invalid(
                "n_rep",
                "repetition numbers must be positive",
            ));
        }
        let needed = n_rep * estimates;
        if needed > p.trials() {
            return Err(Error::invalid(
                "p_series",
                format!(
                    "{needed} trials needed for n_rep = {n_rep}, series has {}",
                    p.trials()
                ),
            ));
        }
        let values = &p.values[..needed.div_ceil(p.hold)];
        let prefix = HeldSeries {
            values: values.to_vec(),
            hold: p.hold,
        };
        let est = simulate_switching(&prefix, n_rep, sub_seed(seed, i as u64));
        let est = &est[..estimates];
        let mean_p = values.iter().map(|v| v.clamp(0.0, 1.0)).sum::<f64>() / values.len() as f64;
        points.push(SigmaPoint {
            n_rep,
            sigma: sample_std(est),
            binomial: binomial_sigma(mean_p, n_rep),
        });
    }
    Ok(SigmaCurve { points })
}

/// Repeated switching measurement of a bias point whose probability wanders
/// with flicker noise. Each repetition number gets its own record of
/// `estimates × n_rep` trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingExperiment {
    pub p_mean: f64,
    /// Flicker PSD of `P_sw` at 1 Hz, 1/Hz. Zero disables the flicker term.
    pub flicker_a: f64,
    pub flicker_alpha: f64,
    /// Time per trial, s.
    pub repetition_time: f64,
    /// Trials over which the probability is held constant.
    pub hold: usize,
    pub estimates: usize,
}

impl Default for SwitchingExperiment {
    fn default() -> Self {
        Self {
            p_mean: 0.5,
            flicker_a: 0.0,
            flicker_alpha: 0.93,
            repetition_time: 10e-6,
            hold: 100,
            estimates: 300,
        }
    }
}

impl SwitchingExperiment {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_mean) {
            return Err(Error::invalid("p_mean", "probability must be in [0, 1]"));
        }
        if !(self.flicker_a >= 0.0) || !self.flicker_a.is_finite() {
            return Err(Error::invalid(
                "flicker_A",
                "flicker level must be finite and >= 0",
            ));
        }
        if !(0.0..2.0).contains(&self.flicker_alpha) {
            return Err(Error::invalid(
                "flicker_alpha",
                "exponent must be in [0, 2)",
            ));
        }
        if !(self.repetition_time > 0.0) {
            return Err(Error::invalid("repetition_time", "must be > 0"));
        }
        if self.hold == 0 {
            return Err(Error::invalid("hold", "hold length must be at least 1"));
        }
        if self.estimates < 2 {
            return Err(Error::invalid(
                "estimates",
                "need at least 2 estimates per point",
            ));
        }
        Ok(())
    }

    /// Sample rate of the held probability series, Hz.
    pub fn held_rate(&self) -> f64 {
        1.0 / (self.repetition_time * self.hold as f64)
    }

    fn record_length(&self, n_rep: usize) -> usize {
        (n_rep * self.estimates).div_ceil(self.hold).max(2)
    }

    /// Probability record for one repetition number.
    pub fn record(&self, n_rep: usize, seed: u64) -> Result<HeldSeries> {
        let len = self.record_length(n_rep);
        let values = if self.flicker_a > 0.0 {
            let x = gen_flicker(
                self.flicker_a,
                self.flicker_alpha,
                self.held_rate(),
                len,
                seed,
            )?;
            x.samples.iter().map(|v| self.p_mean + v).collect()
        } else {
            vec![self.p_mean; len]
        };
        HeldSeries::new(values, self.hold)
    }

    pub fn run(&self, n_reps: &[usize], seed: u64) -> Result<SigmaCurve> {
        self.validate()?;
        let mut points = Vec::with_capacity(n_reps.len());
        for (i, &n_rep) in n_reps.iter().enumerate() {
            if n_rep == 0 {
                return Err(Error::invalid(
                    "n_rep",
                    "repetition numbers must be positive",
                ));
            }
            let record = self.record(n_rep, sub_seed(seed, 2 * i as u64))?;
            let est = simulate_switching(&record, n_rep, sub_seed(seed, 2 * i as u64 + 1));
            points.push(SigmaPoint {
                n_rep,
                sigma: sample_std(&est[..self.estimates]),
                binomial: binomial_sigma(self.p_mean, n_rep),
            });
        }
        Ok(SigmaCurve { points })
    }

    /// Expected sample variance of the block means contributed by the
    /// flicker term at `n_rep`, averaged over realizations of the record.
    ///
    /// With `N` record samples, `τ` samples per block and `M` blocks, a bin
    /// `k` contributes `E|X_k|²·|H_k|²·M / (N²(M−1))`, where
    /// `H_k = sin(πkτ/N) / (τ sin(πk/N))` is the block-average response.
    pub fn expected_flicker_variance(&self, n_rep: usize) -> f64 {
        if self.flicker_a == 0.0 {
            return 0.0;
        }
        let n = self.record_length(n_rep);
        let m = self.estimates as f64;
        let tau = n_rep as f64 / self.hold as f64;
        let fs = self.held_rate();
        let nf = n as f64;
        let pi = std::f64::consts::PI;
        let mut sum = 0.0;
        for k in 1..=n / 2 {
            let kf = k as f64;
            let s = self.flicker_a / (kf * fs / nf).powf(self.flicker_alpha);
            let num = (pi * kf * tau / nf).sin();
            let den = tau * (pi * kf / nf).sin();
            let h2 = if den == 0.0 { 1.0 } else { (num / den).powi(2) };
            // bins k and N − k each carry S·N·fs/2; the real Nyquist bin
            // alone carries S·N·fs
            sum += s * nf * fs * h2;
        }
        sum * m / (nf * nf * (m - 1.0))
    }

    /// Flicker level that makes the expected flicker σ at `n_rep` equal
    /// `target_sigma`.
    pub fn tuned_flicker_level(&self, target_sigma: f64, n_rep: usize) -> f64 {
        let unit = Self {
            flicker_a: 1.0,
            ..*self
        };
        target_sigma * target_sigma / unit.expected_flicker_variance(n_rep)
    }
}
