//! Flux-qubit transducer: dispersion, spectroscopy fits, the switching
//! response, simulated ESR scans with their extraction, and the spin-count
//! sensitivity budget.

use crate::constants::{FLUX_QUANTUM, PLANCK};
use crate::error::{Error, Result};
use crate::numerics::{nlls_fit, FitResult, NllsOptions};
use crate::par;
use crate::spinsys::SpectrumTrace;

/// Flux-qubit parameters. Flux quantities are in units of Φ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitParams {
    /// Gap energy Δ, J.
    pub delta: f64,
    /// Persistent current, A.
    pub ip: f64,
    /// Offset flux, Φ₀.
    pub phi_off: f64,
    /// Spectral line width (FWHM), Hz.
    pub gamma_q: f64,
    /// Readout visibility.
    pub visibility: f64,
    /// Off-resonant switching probability.
    pub p_base: f64,
}

impl QubitParams {
    pub fn new(
        delta_hz: f64,
        ip: f64,
        phi_off: f64,
        gamma_q: f64,
        visibility: f64,
        p_base: f64,
    ) -> Result<Self> {
        let q = Self {
            delta: delta_hz * PLANCK,
            ip,
            phi_off,
            gamma_q,
            visibility,
            p_base,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(
                "Delta",
                "gap must be finite and non-negative",
            ));
        }
        if !(self.ip > 0.0) || !self.ip.is_finite() {
            return Err(Error::invalid(
                "Ip",
                format!("persistent current must be > 0, got {}", self.ip),
            ));
        }
        if !self.phi_off.is_finite() {
            return Err(Error::invalid("Phi_off", "offset flux must be finite"));
        }
        if !(self.gamma_q > 0.0) || !self.gamma_q.is_finite() {
            return Err(Error::invalid(
                "gamma_q",
                format!("line width must be > 0, got {}", self.gamma_q),
            ));
        }
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(Error::invalid(
                "V",
                format!("visibility must be in (0, 1], got {}", self.visibility),
            ));
        }
        if !(self.p_base >= 0.0) || self.p_base + self.visibility > 1.0 + 1e-12 {
            return Err(Error::invalid(
                "P_base",
                format!(
                    "need 0 <= P_base and P_base + V <= 1, got {} + {}",
                    self.p_base, self.visibility
                ),
            ));
        }
        Ok(())
    }

    pub fn delta_hz(&self) -> f64 {
        self.delta / PLANCK
    }

    /// `ε(Φ) = 2 Ip (Φ − Φoff − Φ₀/2)`, J.
    pub fn detuning(&self, phi: f64) -> f64 {
        2.0 * self.ip * (phi - self.phi_off - 0.5) * FLUX_QUANTUM
    }

    /// Bias flux (Φ₀) where `ε/h = Δ/h + 2γq`, the default operating point
    /// away from degeneracy.
    pub fn default_bias(&self) -> f64 {
        let eps = self.delta + 2.0 * self.gamma_q * PLANCK;
        self.phi_off + 0.5 + eps / (2.0 * self.ip * FLUX_QUANTUM)
    }

    pub fn with_phi_off(&self, phi_off: f64) -> Self {
        Self { phi_off, ..*self }
    }
}

/// `f_q(Φ) = √(Δ² + ε²) / h`.
pub fn qubit_freq(q: &QubitParams, phi: f64) -> f64 {
    q.delta.hypot(q.detuning(phi)) / PLANCK
}

/// `∂f_q/∂Φ` in Hz per Φ₀.
pub fn flux_slope(q: &QubitParams, phi: f64) -> f64 {
    let eps = q.detuning(phi);
    let e = q.delta.hypot(eps);
    if e == 0.0 {
        return 0.0;
    }
    2.0 * q.ip * FLUX_QUANTUM / PLANCK * eps / e
}

/// Result of a spectroscopy fit.
#[derive(Debug, Clone)]
pub struct QubitFit {
    pub params: QubitParams,
    pub fit: FitResult,
    /// All points lie on one side of the fitted minimum, so `Φoff` is only
    /// weakly constrained.
    pub one_sided: bool,
}

const GHZ: f64 = 1e9;
const NANOAMP: f64 = 1e-9;

fn scaled_model(p: &[f64], phi: f64) -> f64 {
    let delta = p[0] * GHZ;
    let eps = 2.0 * p[1] * NANOAMP * FLUX_QUANTUM * (phi - p[2] - 0.5) / PLANCK;
    delta.hypot(eps)
}

fn scaled_jacobian(p: &[f64], phi: f64) -> Vec<f64> {
    let delta = p[0] * GHZ;
    let k = 2.0 * FLUX_QUANTUM / PLANCK;
    let detune = phi - p[2] - 0.5;
    let eps = k * p[1] * NANOAMP * detune;
    let f = delta.hypot(eps).max(f64::MIN_POSITIVE);
    vec![
        delta / f * GHZ,
        eps / f * k * detune * NANOAMP,
        -eps / f * k * p[1] * NANOAMP,
    ]
}

/// Fits `(Δ, Ip, Φoff)` to measured `(Φ, f_q)` pairs (Φ in Φ₀, f in Hz).
/// Line width, visibility and baseline are carried over from `initial`.
pub fn fit_qubit_spectrum(points: &[(f64, f64)], initial: &QubitParams) -> Result<QubitFit> {
    if points.len() < 4 {
        return Err(Error::invalid(
            "points",
            format!("need at least 4 (Φ, f) points, got {}", points.len()),
        ));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let start = [
        initial.delta_hz() / GHZ,
        initial.ip / NANOAMP,
        initial.phi_off,
    ];
    let opts = NllsOptions {
        jacobian: Some(&scaled_jacobian),
        tolerance: 1e-14,
        ..Default::default()
    };
    let fit = nlls_fit(scaled_model, &x, &y, &start, &opts)?;
    let params = QubitParams {
        delta: fit.params[0].abs() * GHZ * PLANCK,
        ip: fit.params[1].abs() * NANOAMP,
        phi_off: fit.params[2],
        ..*initial
    };
    let center = params.phi_off + 0.5;
    let one_sided = x.iter().all(|&p| p >= center) || x.iter().all(|&p| p <= center);
    Ok(QubitFit {
        params,
        fit,
        one_sided,
    })
}

/// Lorentzian switching response of FWHM `γq`, `V` above `P_base`.
pub fn switching_probability(q: &QubitParams, f_drive: f64, f_q: f64) -> f64 {
    let u = 2.0 * (f_drive - f_q) / q.gamma_q;
    q.p_base + q.visibility / (1.0 + u * u)
}

/// Steepest `|∂P/∂f|` of the switching response and the detuning where it
/// occurs: `(3√3/4)·V/γq` at `γq/(2√3)`.
pub fn max_response_slope(q: &QubitParams) -> (f64, f64) {
    let slope = 3.0 * 3f64.sqrt() / 4.0 * q.visibility / q.gamma_q;
    (slope, q.gamma_q / (2.0 * 3f64.sqrt()))
}

/// Qubit spectrum recorded as a function of the ESR excitation frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct EsrScan {
    pub esr_frequencies: Vec<f64>,
    pub drive_frequencies: Vec<f64>,
    /// `p_sw[i][j]`: ESR frequency `i`, qubit drive frequency `j`.
    pub p_sw: Vec<Vec<f64>>,
}

impl EsrScan {
    pub fn new(
        esr_frequencies: Vec<f64>,
        drive_frequencies: Vec<f64>,
        p_sw: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if p_sw.len() != esr_frequencies.len() {
            return Err(Error::invalid(
                "P_sw",
                "one row per ESR frequency is required",
            ));
        }
        for (i, row) in p_sw.iter().enumerate() {
            if row.len() != drive_frequencies.len() {
                return Err(Error::invalid(
                    "P_sw",
                    format!("row {i} does not match the drive grid"),
                ));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(
                    "P_sw",
                    format!("row {i} has entries outside [0, 1]"),
                ));
            }
        }
        Ok(Self {
            esr_frequencies,
            drive_frequencies,
            p_sw,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanReport {
    /// Entries clamped into `[0, 1]`.
    pub clamped: usize,
    /// `|ε| < Δ` at the bias point: usable but with reduced flux slope.
    pub near_degeneracy: bool,
}

fn check_bias(q: &QubitParams, bias: f64) -> Result<bool> {
    let eps = q.detuning(bias).abs();
    let e = q.delta.hypot(eps);
    if e == 0.0 || eps / e < 0.01 {
        return Err(Error::invalid(
            "bias",
            format!(
                "bias {bias} Φ₀ sits at the degeneracy point (Φoff + Φ₀/2 = {}); the qubit has no first-order flux sensitivity there",
                q.phi_off + 0.5
            ),
        ));
    }
    Ok(eps < q.delta)
}

/// Renders the qubit peak over `drive_grid` for every ESR frequency of the
/// spin spectrum. The spin signal shifts the offset flux by
/// `coupling × amplitude` (Φ₀ per unit amplitude).
pub fn simulate_esr_scan(
    q: &QubitParams,
    spin_spectrum: &SpectrumTrace,
    coupling: f64,
    bias: f64,
    drive_grid: &[f64],
) -> Result<(EsrScan, ScanReport)> {
    q.validate()?;
    let near_degeneracy = check_bias(q, bias)?;
    if drive_grid.is_empty() {
        return Err(Error::Empty("drive grid"));
    }
    let rows: Vec<(Vec<f64>, usize)> = par::map(&spin_spectrum.amplitudes, |&amp| {
        let shifted = q.with_phi_off(q.phi_off + coupling * amp);
        let fq = qubit_freq(&shifted, bias);
        let mut clamped = 0;
        let row = drive_grid
            .iter()
            .map(|&fd| {
                let p = switching_probability(q, fd, fq);
                if !(0.0..=1.0).contains(&p) {
                    clamped += 1;
                }
                p.clamp(0.0, 1.0)
            })
            .collect();
        (row, clamped)
    });
    let clamped = rows.iter().map(|r| r.1).sum();
    let scan = EsrScan {
        esr_frequencies: spin_spectrum.frequencies.clone(),
        drive_frequencies: drive_grid.to_vec(),
        p_sw: rows.into_iter().map(|r| r.0).collect(),
    };
    Ok((
        scan,
        ScanReport {
            clamped,
            near_degeneracy,
        },
    ))
}

/// ESR signal recovered from a scan.
#[derive(Debug, Clone)]
pub struct Extraction {
    /// Peak-center shift (Hz) against the median center, per ESR frequency.
    pub trace: SpectrumTrace,
    /// Fitted qubit peak center per row (Hz); interpolated for flagged rows.
    pub centers: Vec<f64>,
    /// Rows without a resolvable or fittable peak.
    pub flagged: Vec<usize>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn lorentzian(p: &[f64], x: f64) -> f64 {
    let u = 2.0 * (x - p[2]) / p[3];
    p[0] + p[1] / (1.0 + u * u)
}

/// Lorentzian fit of one row; returns the center in Hz.
fn fit_row(drive: &[f64], row: &[f64]) -> Option<f64> {
    let (min, max) = row
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut diffs: Vec<f64> = row.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let floor = 1e-9
        + if diffs.is_empty() {
            0.0
        } else {
            4.0 * median(&mut diffs)
        };
    if !(max - min > floor) {
        return None;
    }
    let lo = drive[0];
    let span = drive[drive.len() - 1] - lo;
    if !(span > 0.0) {
        return None;
    }
    let x: Vec<f64> = drive.iter().map(|f| (f - lo) / span).collect();
    let peak = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?.0;
    let half = min + 0.5 * (max - min);
    let above = row.iter().filter(|&&v| v >= half).count().max(2);
    let step = span / (drive.len() - 1) as f64;
    let width = (above as f64 * step / span).max(2.0 * step / span);
    let fit = nlls_fit(
        lorentzian,
        &x,
        row,
        &[min, max - min, x[peak], width],
        &NllsOptions::default(),
    )
    .ok()?;
    let center = fit.params[2];
    if !center.is_finite() || !(-0.5..=1.5).contains(&center) || fit.params[3] == 0.0 {
        return None;
    }
    Some(lo + center * span)
}

/// Per-row Lorentzian fits; the signal is each center minus the median
/// center. Unfittable rows are flagged and linearly interpolated from the
/// nearest fitted neighbours.
pub fn extract_esr_spectrum(scan: &EsrScan) -> Result<Extraction> {
    if scan.esr_frequencies.is_empty() {
        return Err(Error::Empty("ESR scan"));
    }
    if scan.drive_frequencies.len() < 5 {
        return Err(Error::invalid(
            "drive grid",
            "need at least 5 drive frequencies to fit a peak",
        ));
    }
    let fitted: Vec<Option<f64>> =
        par::map(&scan.p_sw, |row| fit_row(&scan.drive_frequencies, row));
    let valid: Vec<usize> = (0..fitted.len()).filter(|&i| fitted[i].is_some()).collect();
    if valid.is_empty() {
        return Err(Error::Degenerate(
            "no row of the scan has a resolvable qubit peak".into(),
        ));
    }
    let flagged: Vec<usize> = (0..fitted.len()).filter(|&i| fitted[i].is_none()).collect();
    let esr = &scan.esr_frequencies;
    let centers: Vec<f64> = (0..fitted.len())
        .map(|i| match fitted[i] {
            Some(c) => c,
            None => {
                let left = valid.iter().rev().find(|&&k| k < i).copied();
                let right = valid.iter().find(|&&k| k > i).copied();
                match (left, right) {
                    (Some(a), Some(b)) => {
                        let (ca, cb) = (fitted[a].unwrap(), fitted[b].unwrap());
                        let t = (esr[i] - esr[a]) / (esr[b] - esr[a]);
                        ca + t * (cb - ca)
                    }
                    (Some(a), None) => fitted[a].unwrap(),
                    (None, Some(b)) => fitted[b].unwrap(),
                    (None, None) => unreachable!("at least one valid row"),
                }
            }
        })
        .collect();
    let mut valid_centers: Vec<f64> = valid.iter().map(|&i| centers[i]).collect();
    let baseline = median(&mut valid_centers);
    let shifts: Vec<f64> = centers.iter().map(|c| c - baseline).collect();
    let trace = SpectrumTrace::new(esr.clone(), shifts)?;
    Ok(Extraction {
        trace,
        centers,
        flagged,
    })
}

/// Converts qubit-frequency shifts (Hz) at `bias` into spin-flux changes
/// (Φ₀), using the first-order flux slope.
pub fn shifts_to_flux(shifts: &[f64], q: &QubitParams, bias: f64) -> Result<Vec<f64>> {
    check_bias(q, bias)?;
    let slope = flux_slope(q, bias);
    // Φoff enters as −Φ, so δf = −slope·δΦm
    Ok(shifts.iter().map(|s| -s / slope).collect())
}

/// Factorized spin-count sensitivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityBreakdown {
    /// `δP_sw`.
    pub dp_sw: f64,
    /// `4γq / (3√3 V)`, Hz per unit switching probability.
    pub slope_term: f64,
    /// `h / (Ip Φ₀)`, Φ₀ per Hz.
    pub flux_term: f64,
    /// `δN/δΦ`, spins per Φ₀.
    pub spin_density: f64,
    /// Minimum detectable spin number.
    pub n_min: f64,
}

/// Optimal sensitivity
/// `N_min = δP_sw · 4hγq / (3√3 V Ip) · δN/δΦ`, with flux in Φ₀.
pub fn sensitivity(dp_sw: f64, q: &QubitParams, spins_per_flux: f64) -> SensitivityBreakdown {
    let slope_term = 4.0 * q.gamma_q / (3.0 * 3f64.sqrt() * q.visibility);
    let flux_term = PLANCK / (q.ip * FLUX_QUANTUM);
    SensitivityBreakdown {
        dp_sw,
        slope_term,
        flux_term,
        spin_density: spins_per_flux,
        n_min: dp_sw * slope_term * flux_term * spins_per_flux,
    }
}

/// Variant built from the Lorentzian response model and the linear-regime
/// flux slope `2Ip/h`; it is exactly half of [`sensitivity`].
pub fn sensitivity_from_lineshape(
    dp_sw: f64,
    q: &QubitParams,
    spins_per_flux: f64,
) -> SensitivityBreakdown {
    let (max_slope, _) = max_response_slope(q);
    let slope_term = 1.0 / max_slope;
    let flux_term = PLANCK / (2.0 * q.ip * FLUX_QUANTUM);
    SensitivityBreakdown {
        dp_sw,
        slope_term,
        flux_term,
        spin_density: spins_per_flux,
        n_min: dp_sw * slope_term * flux_term * spins_per_flux,
    }
}

/// `δN/δΦ = N_v / Φs`, spins per Φ₀.
pub fn spins_per_flux(n_spins: f64, phi_s: f64) -> f64 {
    n_spins / phi_s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinsys::{linear_grid, synthesize_spectrum, Lineshape, Transition};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn reference_qubit() -> QubitParams {
        QubitParams::new(5e9, 330e-9, 0.0, 32e6, 0.23, 0.2).unwrap()
    }

    #[test]
    fn degeneracy_point_gives_gap() {
        let q = reference_qubit().with_phi_off(0.013);
        assert!((qubit_freq(&q, 0.513) - 5e9).abs() < 1e-3);
    }

    #[test]
    fn zero_gap_is_linear() {
        let mut q = reference_qubit();
        q.delta = 0.0;
        let d = 2e-3;
        let expect = 2.0 * q.ip * d * FLUX_QUANTUM / PLANCK;
        assert!((qubit_freq(&q, 0.5 + d) - expect).abs() < 1e-6 * expect);
    }

    #[test]
    fn one_milliflux_detuning() {
        let q = reference_qubit();
        let eps_hz = q.detuning(0.501) / PLANCK;
        assert!((eps_hz / 1e9 - 2.0597).abs() < 5e-5, "{eps_hz}");
        assert!((qubit_freq(&q, 0.501) / 1e9 - 5.4076).abs() < 5e-5);
    }

    #[test]
    fn params_are_validated() {
        assert!(QubitParams::new(5e9, 0.0, 0.0, 32e6, 0.23, 0.2).is_err());
        assert!(QubitParams::new(5e9, 330e-9, 0.0, 32e6, 1.5, 0.0).is_err());
        assert!(QubitParams::new(5e9, 330e-9, 0.0, 32e6, 0.6, 0.5).is_err());
        assert!(QubitParams::new(5e9, 330e-9, 0.0, -1.0, 0.2, 0.0).is_err());
    }

    fn synthetic_points(q: &QubitParams, noise_hz: f64, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_hz.max(1e-300)).unwrap();
        linear_grid(q.phi_off + 0.5 - 0.006, q.phi_off + 0.5 + 0.006, 41)
            .into_iter()
            .map(|phi| {
                let n = if noise_hz > 0.0 {
                    normal.sample(&mut rng)
                } else {
                    0.0
                };
                (phi, qubit_freq(q, phi) + n)
            })
            .collect()
    }

    #[test]
    fn noiseless_fit_recovers_parameters() {
        let truth = QubitParams::new(5e9, 330e-9, 0.0123, 32e6, 0.23, 0.2).unwrap();
        let pts = synthetic_points(&truth, 0.0, 0);
        let start = QubitParams::new(4.6e9, 300e-9, 0.011, 32e6, 0.23, 0.2).unwrap();
        let out = fit_qubit_spectrum(&pts, &start).unwrap();
        assert!(((out.params.delta - truth.delta) / truth.delta).abs() < 1e-8);
        assert!(((out.params.ip - truth.ip) / truth.ip).abs() < 1e-8);
        assert!((out.params.phi_off - truth.phi_off).abs() < 1e-8 * 0.5);
        assert!(!out.one_sided);
    }

    #[test]
    fn symmetric_points_center_the_offset() {
        let truth = QubitParams::new(3e9, 250e-9, -0.02, 32e6, 0.23, 0.2).unwrap();
        let pts: Vec<(f64, f64)> = [-0.004, -0.002, 0.002, 0.004]
            .iter()
            .map(|d| (0.48 + d, qubit_freq(&truth, 0.48 + d)))
            .collect();
        let out = fit_qubit_spectrum(&pts, &truth.with_phi_off(-0.019)).unwrap();
        assert!((out.params.phi_off + 0.02).abs() < 1e-9);
    }

    #[test]
    fn noisy_fit_recovers_current_within_one_percent() {
        let truth = reference_qubit().with_phi_off(0.004);
        let pts = synthetic_points(&truth, 1e6, 17);
        let start = QubitParams::new(4.8e9, 310e-9, 0.003, 32e6, 0.23, 0.2).unwrap();
        let out = fit_qubit_spectrum(&pts, &start).unwrap();
        assert!(((out.params.ip - truth.ip) / truth.ip).abs() < 0.01);
    }

    #[test]
    fn one_sided_data_is_flagged() {
        let truth = reference_qubit();
        let pts: Vec<(f64, f64)> = (1..=8)
            .map(|k| 0.5 + k as f64 * 1e-3)
            .map(|phi| (phi, qubit_freq(&truth, phi)))
            .collect();
        let out = fit_qubit_spectrum(&pts, &truth.with_phi_off(0.0002)).unwrap();
        assert!(out.one_sided);
        assert!(fit_qubit_spectrum(&pts[..3], &truth).is_err());
    }

    #[test]
    fn switching_lineshape_points() {
        let q = reference_qubit();
        let f = 5.2e9;
        assert!((switching_probability(&q, f, f) - (q.p_base + q.visibility)).abs() < 1e-15);
        for s in [-1.0, 1.0] {
            let p = switching_probability(&q, f + s * q.gamma_q / 2.0, f);
            assert!((p - (q.p_base + q.visibility / 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn steepest_slope_by_dense_scan() {
        let q = reference_qubit();
        let f0 = 5e9;
        let h = 1.0;
        let (mut best, mut at) = (0.0_f64, 0.0);
        for k in 0..200_000 {
            let d = k as f64 * q.gamma_q / 200_000.0;
            let s = (switching_probability(&q, f0 + d + h, f0)
                - switching_probability(&q, f0 + d - h, f0))
                / (2.0 * h);
            if s.abs() > best {
                best = s.abs();
                at = d;
            }
        }
        let (slope, detuning) = max_response_slope(&q);
        assert!(((best - slope) / slope).abs() < 1e-6);
        assert!((at - detuning).abs() < q.gamma_q * 1e-4);
        // the reciprocal is the 4γ/(3√3 V) factor of the sensitivity budget
        let b = sensitivity(1.0, &q, 1.0);
        assert!((b.slope_term * slope - 1.0).abs() < 1e-12);
    }

    fn two_line_spectrum() -> SpectrumTrace {
        let lines = [
            Transition {
                frequency: 2.0e9,
                intensity: 1.0,
                lower: 0,
                upper: 1,
            },
            Transition {
                frequency: 2.6e9,
                intensity: 0.5,
                lower: 0,
                upper: 2,
            },
        ];
        synthesize_spectrum(
            &lines,
            &linear_grid(1.5e9, 3.0e9, 301),
            Lineshape::Lorentzian,
            40e6,
        )
        .unwrap()
    }

    #[test]
    fn zero_spectrum_scan_is_flat() {
        let q = reference_qubit();
        let spec = SpectrumTrace::zeros(linear_grid(1e9, 2e9, 11)).unwrap();
        let bias = q.default_bias();
        let fq = qubit_freq(&q, bias);
        let drive = linear_grid(fq - 100e6, fq + 100e6, 81);
        let (scan, report) = simulate_esr_scan(&q, &spec, 1e-3, bias, &drive).unwrap();
        assert!(scan.p_sw.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(report.clamped, 0);
        let ext = extract_esr_spectrum(&scan).unwrap();
        assert!(ext.trace.amplitudes.iter().all(|a| a.abs() < 1.0));
    }

    #[test]
    fn degeneracy_bias_is_refused() {
        let q = reference_qubit();
        let spec = SpectrumTrace::zeros(vec![1e9]).unwrap();
        let err = simulate_esr_scan(&q, &spec, 1e-3, 0.5, &[5e9]).unwrap_err();
        assert!(err.to_string().contains("degeneracy"));
    }

    #[test]
    fn single_line_displacement_follows_chain_rule() {
        let q = reference_qubit();
        let bias = q.default_bias();
        let spec = SpectrumTrace::new(vec![1e9, 2e9, 3e9], vec![0.0, 1.0, 0.0]).unwrap();
        let coupling = 1e-5;
        let center = qubit_freq(&q, bias);
        let drive = linear_grid(center - 100e6, center + 100e6, 401);
        let (scan, _) = simulate_esr_scan(&q, &spec, coupling, bias, &drive).unwrap();
        let ext = extract_esr_spectrum(&scan).unwrap();
        let analytic = flux_slope(&q, bias);
        let h = 1e-7;
        let fd = (qubit_freq(&q, bias + h) - qubit_freq(&q, bias - h)) / (2.0 * h);
        assert!(((analytic - fd) / fd).abs() < 1e-6);
        // raising Φoff by δΦ lowers ε, so to first order the peak moves by −slope·δΦ
        let linear = -analytic * coupling;
        let exact = qubit_freq(&q.with_phi_off(coupling), bias) - center;
        let shift = ext.trace.amplitudes[1];
        assert!(((shift - exact) / exact).abs() < 1e-6, "{shift} vs {exact}");
        assert!(((shift - linear) / linear).abs() < 2e-3);
        assert!(ext.trace.amplitudes[0].abs() < 1e-6 * exact.abs());
        let flux = shifts_to_flux(&ext.trace.amplitudes, &q, bias).unwrap();
        assert!(((flux[1] - coupling) / coupling).abs() < 2e-3);

        let (mirror, _) = simulate_esr_scan(&q, &spec, -coupling, bias, &drive).unwrap();
        let back = extract_esr_spectrum(&mirror).unwrap();
        let exact_back = qubit_freq(&q.with_phi_off(-coupling), bias) - center;
        assert!(((back.trace.amplitudes[1] - exact_back) / exact_back).abs() < 1e-6);
    }

    #[test]
    fn two_line_round_trip() {
        let q = reference_qubit();
        let bias = q.default_bias();
        let spec = two_line_spectrum();
        let peak_amp = spec.amplitudes.iter().cloned().fold(0.0, f64::max);
        // largest shift about a tenth of the line width
        let coupling = 0.1 * q.gamma_q / flux_slope(&q, bias) / peak_amp;
        let center = qubit_freq(&q, bias);
        let drive = linear_grid(center - 120e6, center + 120e6, 241);
        let (scan, _) = simulate_esr_scan(&q, &spec, coupling, bias, &drive).unwrap();
        let ext = extract_esr_spectrum(&scan).unwrap();
        let signal: Vec<f64> = ext.trace.amplitudes.iter().map(|a| -a).collect();
        let out = SpectrumTrace::new(ext.trace.frequencies.clone(), signal).unwrap();
        let pin = spec.peaks(0.0);
        let pout = out.peaks(0.0);
        assert_eq!(pin, pout);
        let ratio_in = spec.amplitudes[pin[1]] / spec.amplitudes[pin[0]];
        let ratio_out = out.amplitudes[pout[1]] / out.amplitudes[pout[0]];
        assert!(((ratio_out - ratio_in) / ratio_in).abs() < 0.05);
    }

    #[test]
    fn corrupted_row_is_flagged_and_interpolated() {
        let q = reference_qubit();
        let bias = q.default_bias();
        let spec = two_line_spectrum();
        let center = qubit_freq(&q, bias);
        let drive = linear_grid(center - 120e6, center + 120e6, 241);
        let (mut scan, _) = simulate_esr_scan(&q, &spec, 1e-6, bias, &drive).unwrap();
        let clean = extract_esr_spectrum(&scan).unwrap();
        scan.p_sw[150] = vec![0.0; drive.len()];
        let ext = extract_esr_spectrum(&scan).unwrap();
        assert_eq!(ext.flagged, vec![150]);
        let interp = 0.5 * (clean.centers[149] + clean.centers[151]);
        assert!((ext.centers[150] - interp).abs() < 1.0);
        for i in (0..spec.frequencies.len()).filter(|&i| i != 150) {
            assert!((ext.centers[i] - clean.centers[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn reference_sensitivity() {
        let q = reference_qubit();
        let b = sensitivity(2.0 * 5e-3, &q, spins_per_flux(6e6, 0.29));
        assert!((b.n_min - 21.5).abs() < 0.05, "{}", b.n_min);
        assert_eq!(sensitivity(0.0, &q, 1e7).n_min, 0.0);
        let alt = sensitivity_from_lineshape(2.0 * 5e-3, &q, spins_per_flux(6e6, 0.29));
        assert!((alt.n_min * 2.0 - b.n_min).abs() < 1e-9 * b.n_min);
    }

    proptest! {
        #[test]
        fn dispersion_symmetric_with_minimum_gap(d in -0.05..0.05f64, off in -0.2..0.2f64) {
            let q = reference_qubit().with_phi_off(off);
            let c = off + 0.5;
            let (a, b) = (qubit_freq(&q, c + d), qubit_freq(&q, c - d));
            prop_assert!((a - b).abs() <= 1e-12 * a);
            prop_assert!(a >= q.delta_hz() * (1.0 - 1e-15));
        }

        #[test]
        fn analytic_flux_slope_matches_finite_difference(d in 0.0005..0.05f64) {
            let q = reference_qubit();
            let phi = 0.5 + d;
            let h = 1e-7;
            let fd = (qubit_freq(&q, phi + h) - qubit_freq(&q, phi - h)) / (2.0 * h);
            let an = flux_slope(&q, phi);
            prop_assert!(((an - fd) / an).abs() < 1e-6);
        }

        #[test]
        fn switching_stays_in_band(fd in 4e9..6e9f64, fq in 4e9..6e9f64) {
            let q = reference_qubit();
            let p = switching_probability(&q, fd, fq);
            prop_assert!(p >= q.p_base && p <= q.p_base + q.visibility);
        }

        #[test]
        fn sensitivity_homogeneity(k in 0.1..10.0f64) {
            let q = reference_qubit();
            let base = sensitivity(0.01, &q, 2e7).n_min;
            let rel = |v: f64, t: f64| ((v - t) / t).abs() < 1e-12;
            prop_assert!(rel(sensitivity(0.01 * k, &q, 2e7).n_min, k * base));
            prop_assert!(rel(sensitivity(0.01, &q, 2e7 * k).n_min, k * base));
            let wide = QubitParams { gamma_q: q.gamma_q * k, ..q };
            prop_assert!(rel(sensitivity(0.01, &wide, 2e7).n_min, k * base));
            let strong = QubitParams { ip: q.ip * k, ..q };
            prop_assert!(rel(sensitivity(0.01, &strong, 2e7).n_min, base / k));
            let vis = QubitParams { visibility: q.visibility / k.max(1.0), ..q };
            prop_assert!(rel(sensitivity(0.01, &vis, 2e7).n_min, base * k.max(1.0)));
        }
    }
}
