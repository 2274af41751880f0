use super::hamiltonian::{build_hamiltonian, moment_operator, FieldVector, SpinSystem};
use super::tensor::AxisRotation;
use crate::constants::{BOHR_MAGNETON, BOLTZMANN, PLANCK};
use crate::error::{Error, Result};
use crate::numerics::{eigensolve, EigenSystem, HermitianMatrix};

/// Lines closer than this are reported as one line with summed intensity.
pub const MERGE_TOLERANCE_HZ: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub frequency: f64,
    /// `|⟨i|M|j⟩/μB|² · (p_i − p_j)`, dimensionless.
    pub intensity: f64,
    pub lower: usize,
    pub upper: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionList {
    pub label: String,
    pub entries: Vec<Transition>,
}

impl TransitionList {
    pub fn total_intensity(&self) -> f64 {
        self.entries.iter().map(|t| t.intensity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, weight: f64) -> Self {
        Self {
            label: self.label.clone(),
            entries: self
                .entries
                .iter()
                .map(|t| Transition {
                    intensity: t.intensity * weight,
                    ..t.clone()
                })
                .collect(),
        }
    }
}

/// Frequency band `[low, high]` in Hz, inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyWindow {
    pub low: f64,
    pub high: f64,
}

impl FrequencyWindow {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low >= 0.0) || !(high >= low) || !high.is_finite() {
            return Err(Error::invalid(
                "f_window",
                format!("need 0 <= low <= high, got [{low}, {high}]"),
            ));
        }
        Ok(Self { low, high })
    }

    pub fn all() -> Self {
        Self {
            low: 0.0,
            high: f64::MAX,
        }
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.low && f <= self.high
    }
}

/// Boltzmann populations of the eigenlevels.
pub fn populations(energies: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::invalid(
            "T",
            format!("temperature must be > 0 K, got {temperature}"),
        ));
    }
    let kt = BOLTZMANN * temperature;
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - e0) / kt).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / z).collect())
}

/// Unweighted `|⟨i|M|j⟩|²` in units of μB² for every pair `i < j`.
pub fn transition_strengths(es: &EigenSystem, drive: &HermitianMatrix) -> Vec<(usize, usize, f64)> {
    let n = es.dim();
    let vecs: Vec<_> = (0..n).map(|k| es.vector(k)).collect();
    let applied: Vec<_> = vecs.iter().map(|v| drive.apply(v)).collect();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let elem: num_complex::Complex64 = vecs[i]
                .iter()
                .zip(&applied[j])
                .map(|(a, b)| a.conj() * b)
                .sum();
            out.push((i, j, elem.norm_sqr() / (BOHR_MAGNETON * BOHR_MAGNETON)));
        }
    }
    out
}

fn merge_close(mut entries: Vec<Transition>) -> Vec<Transition> {
    entries.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    let mut merged: Vec<Transition> = Vec::with_capacity(entries.len());
    let mut anchor = f64::NEG_INFINITY;
    for t in entries {
        match merged.last_mut() {
            Some(last) if t.frequency - anchor < MERGE_TOLERANCE_HZ => {
                last.intensity += t.intensity;
            }
            _ => {
                anchor = t.frequency;
                merged.push(t);
            }
        }
    }
    merged
}

/// Thermally weighted transitions between the eigenlevels of `h` driven by
/// `drive` (J/T). This is the operator-level entry point; [`transitions`]
/// builds both operators from a [`SpinSystem`].
pub fn level_transitions(
    h: &HermitianMatrix,
    drive: &HermitianMatrix,
    temperature: f64,
    window: FrequencyWindow,
) -> Result<Vec<Transition>> {
    if !(temperature > 0.0) {
        return Err(Error::invalid(
            "T",
            format!("temperature must be > 0 K, got {temperature}"),
        ));
    }
    let es = eigensolve(h)?;
    let pops = populations(&es.values, temperature)?;
    let entries = transition_strengths(&es, drive)
        .into_iter()
        .filter_map(|(i, j, strength)| {
            let frequency = ((es.values[j] - es.values[i]) / PLANCK).max(0.0);
            if !window.contains(frequency) {
                return None;
            }
            let dp = (pops[i] - pops[j]).max(0.0);
            Some(Transition {
                frequency,
                intensity: strength * dp,
                lower: i,
                upper: j,
            })
        })
        .collect();
    Ok(merge_close(entries))
}

/// ESR transitions of one spin species in a static field, driven along
/// `drive_axis`.
pub fn transitions(
    sys: &SpinSystem,
    field: &FieldVector,
    temperature: f64,
    drive_axis: [f64; 3],
    window: FrequencyWindow,
) -> Result<TransitionList> {
    let norm = drive_axis.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::invalid("drive_axis", "drive axis must be non-zero"));
    }
    let axis = drive_axis.map(|v| v / norm);
    let h = build_hamiltonian(sys, field)?;
    let m = moment_operator(sys, axis)?;
    Ok(TransitionList {
        label: sys.label.clone(),
        entries: level_transitions(&h, &m, temperature, window)?,
    })
}

/// Crystal with several sites, each appearing as two subclasses related by
/// `subclass_rotation` (when present).
#[derive(Debug, Clone)]
pub struct CrystalConfig {
    pub sites: Vec<SpinSystem>,
    weights: Vec<f64>,
    pub subclass_rotation: Option<AxisRotation>,
}

impl CrystalConfig {
    /// Weights are normalized to sum 1.
    pub fn new(
        sites: Vec<SpinSystem>,
        weights: Vec<f64>,
        subclass_rotation: Option<AxisRotation>,
    ) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::invalid(
                "sites",
                "at least one spin system is required",
            ));
        }
        if weights.len() != sites.len() {
            return Err(Error::invalid(
                "weights",
                format!("{} weights for {} sites", weights.len(), sites.len()),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid(
                "weights",
                "weights must be finite and non-negative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("weights", "weights must not all be zero"));
        }
        Ok(Self {
            sites,
            weights: weights.into_iter().map(|w| w / total).collect(),
            subclass_rotation,
        })
    }

    pub fn single(sys: SpinSystem) -> Self {
        Self {
            sites: vec![sys],
            weights: vec![1.0],
            subclass_rotation: None,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Every magnetically distinct species with its share of the ensemble.
    pub fn species(&self) -> Vec<(usize, SpinSystem, f64)> {
        let mut out = Vec::new();
        for (k, (site, &w)) in self.sites.iter().zip(&self.weights).enumerate() {
            match &self.subclass_rotation {
                Some(rot) => {
                    out.push((k, site.clone(), w / 2.0));
                    out.push((k, site.rotated(rot, format!("{}'", site.label)), w / 2.0));
                }
                None => out.push((k, site.clone(), w)),
            }
        }
        out
    }
}

/// Weighted transitions per site (subclasses folded into their site).
pub fn crystal_transitions(
    crystal: &CrystalConfig,
    field: &FieldVector,
    temperature: f64,
    drive_axis: [f64; 3],
    window: FrequencyWindow,
) -> Result<Vec<TransitionList>> {
    let mut per_site: Vec<TransitionList> = crystal
        .sites
        .iter()
        .map(|s| TransitionList {
            label: s.label.clone(),
            entries: Vec::new(),
        })
        .collect();
    for (site, sys, weight) in crystal.species() {
        let t = transitions(&sys, field, temperature, drive_axis, window)?;
        per_site[site].entries.extend(t.scaled(weight).entries);
    }
    for list in &mut per_site {
        list.entries = merge_close(std::mem::take(&mut list.entries));
    }
    Ok(per_site)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lineshape {
    Lorentzian,
    Gaussian,
}

impl Lineshape {
    /// Unit-area profile with full width at half maximum `fwhm`.
    pub fn eval(self, offset: f64, fwhm: f64) -> f64 {
        match self {
            Lineshape::Lorentzian => {
                let hw = 0.5 * fwhm;
                hw / (std::f64::consts::PI * (offset * offset + hw * hw))
            }
            Lineshape::Gaussian => {
                let sigma = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
                (-0.5 * (offset / sigma).powi(2)).exp()
                    / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Lineshape::Lorentzian => "lorentzian",
            Lineshape::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for Lineshape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lorentzian" => Ok(Lineshape::Lorentzian),
            "gaussian" => Ok(Lineshape::Gaussian),
            other => Err(format!(
                "unknown lineshape `{other}` (expected lorentzian or gaussian)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Lineshape and FWHM (Hz) used for synthesis; `None` for traces that
    /// were measured or extracted.
    pub lineshape: Option<(Lineshape, f64)>,
}

impl SpectrumTrace {
    pub fn new(frequencies: Vec<f64>, amplitudes: Vec<f64>) -> Result<Self> {
        validate_grid(&frequencies)?;
        if amplitudes.len() != frequencies.len() {
            return Err(Error::invalid(
                "amplitudes",
                "length must match the frequency grid",
            ));
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("amplitudes", "amplitudes must be finite"));
        }
        Ok(Self {
            frequencies,
            amplitudes,
            lineshape: None,
        })
    }

    pub fn zeros(frequencies: Vec<f64>) -> Result<Self> {
        let n = frequencies.len();
        Self::new(frequencies, vec![0.0; n])
    }

    /// Linear interpolation, zero outside the grid.
    pub fn sample(&self, f: f64) -> f64 {
        let fr = &self.frequencies;
        if fr.is_empty() || f < fr[0] || f > fr[fr.len() - 1] {
            return 0.0;
        }
        let k = fr.partition_point(|&x| x <= f);
        if k == 0 {
            return self.amplitudes[0];
        }
        if k == fr.len() {
            return self.amplitudes[fr.len() - 1];
        }
        let t = (f - fr[k - 1]) / (fr[k] - fr[k - 1]);
        self.amplitudes[k - 1] * (1.0 - t) + self.amplitudes[k] * t
    }

    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        self.frequencies
            .windows(2)
            .zip(self.amplitudes.windows(2))
            .map(|(f, a)| 0.5 * (a[0] + a[1]) * (f[1] - f[0]))
            .sum()
    }

    /// Local maxima strictly above `threshold`, as grid indices.
    pub fn peaks(&self, threshold: f64) -> Vec<usize> {
        let a = &self.amplitudes;
        (0..a.len())
            .filter(|&k| {
                let left = if k == 0 { f64::NEG_INFINITY } else { a[k - 1] };
                let right = if k + 1 == a.len() {
                    f64::NEG_INFINITY
                } else {
                    a[k + 1]
                };
                a[k] > threshold && a[k] > left && a[k] >= right
            })
            .collect()
    }
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("frequency grid"));
    }
    if grid.iter().any(|f| !f.is_finite()) {
        return Err(Error::invalid("grid", "frequencies must be finite"));
    }
    if let Some(k) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "grid",
            format!("grid must be strictly increasing (index {})", k + 1),
        ));
    }
    Ok(())
}

/// Evenly spaced grid of `n` points on `[start, stop]`.
pub fn linear_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Renders transitions as a continuous spectrum with unit-area lines.
pub fn synthesize_spectrum(
    transitions: &[Transition],
    grid: &[f64],
    lineshape: Lineshape,
    fwhm: f64,
) -> Result<SpectrumTrace> {
    validate_grid(grid)?;
    if !(fwhm > 0.0) || !fwhm.is_finite() {
        return Err(Error::invalid(
            "width",
            format!("FWHM must be > 0, got {fwhm}"),
        ));
    }
    let amplitudes = grid
        .iter()
        .map(|&f| {
            transitions
                .iter()
                .map(|t| t.intensity * lineshape.eval(f - t.frequency, fwhm))
                .sum()
        })
        .collect();
    Ok(SpectrumTrace {
        frequencies: grid.to_vec(),
        amplitudes,
        lineshape: Some((lineshape, fwhm)),
    })
}

/// Sum of several traces sampled on the same grid.
pub fn combine_traces(traces: &[SpectrumTrace]) -> Result<SpectrumTrace> {
    let first = traces.first().ok_or(Error::Empty("trace list"))?;
    let mut amplitudes = vec![0.0; first.frequencies.len()];
    for t in traces {
        if t.frequencies != first.frequencies {
            return Err(Error::invalid(
                "traces",
                "traces must share one frequency grid",
            ));
        }
        for (a, b) in amplitudes.iter_mut().zip(&t.amplitudes) {
            *a += b;
        }
    }
    Ok(SpectrumTrace {
        frequencies: first.frequencies.clone(),
        amplitudes,
        lineshape: first.lineshape,
    })
}
