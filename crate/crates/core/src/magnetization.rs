//! Spin-ensemble magnetization as seen by the qubit: exact thermal moments
//! from the spin Hamiltonian, the saturating `tanh` law, its small-field
//! linear limit and the temperature-differencing pipeline that isolates the
//! spin contribution from the measured offset flux.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::constants::{BOHR_MAGNETON, BOLTZMANN};
use crate::error::{Error, Result};
use crate::numerics::{eigensolve, linear_fit, FitResult};
use crate::spinsys::{
    build_hamiltonian, mat_vec, moment_operator, populations, CrystalConfig, FieldVector,
    SpinSystem,
};

/// Saturation flux `Φs` (Φ₀) and effective g-factor of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetizationModel {
    phi_s: f64,
    g_eff: f64,
}

impl MagnetizationModel {
    pub fn new(phi_s: f64, g_eff: f64) -> Result<Self> {
        if !phi_s.is_finite() {
            return Err(Error::invalid("Phi_s", "saturation flux must be finite"));
        }
        if !(g_eff > 0.0) || !g_eff.is_finite() {
            return Err(Error::invalid("g_eff", format!("must be > 0, got {g_eff}")));
        }
        Ok(Self { phi_s, g_eff })
    }

    pub fn phi_s(&self) -> f64 {
        self.phi_s
    }

    pub fn g_eff(&self) -> f64 {
        self.g_eff
    }

    /// Slope of the linear law against `μB·B/(2kB·T)`, i.e. `Φs·g`.
    pub fn linear_slope(&self) -> f64 {
        self.phi_s * self.g_eff
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(
            "T",
            format!("temperature must be > 0 K, got {t}"),
        ));
    }
    Ok(())
}

/// Dimensionless Zeeman-to-thermal ratio `μB·g·B / (2kB·T)`.
pub fn zeeman_argument(g: f64, b_par: f64, temperature: f64) -> f64 {
    BOHR_MAGNETON * g * b_par / (2.0 * BOLTZMANN * temperature)
}

/// `Φm = Φs·tanh(μB g B / 2kB T)` in Φ₀.
pub fn magnetization_flux(model: &MagnetizationModel, b_par: f64, temperature: f64) -> Result<f64> {
    check_temperature(temperature)?;
    Ok(model.phi_s * zeeman_argument(model.g_eff, b_par, temperature).tanh())
}

/// Small-field limit `Φm ≈ Φs·μB g B / 2kB T`.
pub fn magnetization_flux_linear(
    model: &MagnetizationModel,
    b_par: f64,
    temperature: f64,
) -> Result<f64> {
    check_temperature(temperature)?;
    Ok(model.phi_s * zeeman_argument(model.g_eff, b_par, temperature))
}

fn unit(axis: [f64; 3], name: &'static str) -> Result<[f64; 3]> {
    let n = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n > 0.0) {
        return Err(Error::invalid(name, "axis must be non-zero"));
    }
    Ok(axis.map(|v| v / n))
}

/// Thermal average of the magnetic moment (J/T) along `axis`.
///
/// The moment operator is `−(μB g·S − μN gN I)`, so for positive `g` the
/// moment points along the field.
pub fn thermal_moment(
    sys: &SpinSystem,
    field: &FieldVector,
    temperature: f64,
    axis: [f64; 3],
) -> Result<f64> {
    check_temperature(temperature)?;
    let axis = unit(axis, "axis")?;
    let h = build_hamiltonian(sys, field)?;
    let es = eigensolve(&h)?;
    let pops = populations(&es.values, temperature)?;
    let op = moment_operator(sys, axis)?;
    let mut m = 0.0;
    for (k, p) in pops.iter().enumerate() {
        if *p > 0.0 {
            m -= p * es.matrix_element(&op, k, k).re;
        }
    }
    Ok(m)
}

/// Weighted moment per spin of every species in a crystal.
pub fn crystal_thermal_moment(
    crystal: &CrystalConfig,
    field: &FieldVector,
    temperature: f64,
    axis: [f64; 3],
) -> Result<f64> {
    crystal
        .species()
        .iter()
        .map(|(_, sys, w)| thermal_moment(sys, field, temperature, axis).map(|m| m * w))
        .sum()
}

/// Effective g-factor of the small-field magnetization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveG {
    /// `g̃ ≥ 0` such that the small-field slope `dm/dB = g̃² μB² / 4kB T`.
    pub g_eff: f64,
    /// Sign of the slope: `-1` when the sensed moment is antiparallel to the
    /// sensing axis for positive field.
    pub sign: f64,
    /// No measurable moment along the sensing axis; `g_eff` is reported as 0.
    pub no_moment: bool,
    /// Field step (T) used for the central difference.
    pub field_step: f64,
}

/// Extracts `g̃` from the numerical small-field slope of the thermal moment.
pub fn effective_g(
    crystal: &CrystalConfig,
    b_dir: [f64; 3],
    sense_axis: [f64; 3],
    temperature: f64,
) -> Result<EffectiveG> {
    check_temperature(temperature)?;
    let b_dir = unit(b_dir, "B_dir")?;
    let sense = unit(sense_axis, "sense_axis")?;
    // largest |g·B̂| over species bounds the Zeeman argument
    let g_scale = crystal
        .species()
        .iter()
        .map(|(_, s, _)| {
            let gb = mat_vec(&s.g_matrix(), &b_dir);
            gb.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
        .max(1e-6);
    let step = 1e-3 * 2.0 * BOLTZMANN * temperature / (BOHR_MAGNETON * g_scale);
    let plus =
        crystal_thermal_moment(crystal, &FieldVector::new(step, b_dir)?, temperature, sense)?;
    let minus = crystal_thermal_moment(
        crystal,
        &FieldVector::new(-step, b_dir)?,
        temperature,
        sense,
    )?;
    let slope = (plus - minus) / (2.0 * step);
    let reference =
        BOHR_MAGNETON * BOHR_MAGNETON * g_scale * g_scale / (4.0 * BOLTZMANN * temperature);
    if slope.abs() <= 1e-9 * reference {
        return Ok(EffectiveG {
            g_eff: 0.0,
            sign: 0.0,
            no_moment: true,
            field_step: step,
        });
    }
    Ok(EffectiveG {
        g_eff: (4.0 * BOLTZMANN * temperature * slope.abs()).sqrt() / BOHR_MAGNETON,
        sign: slope.signum(),
        no_moment: false,
        field_step: step,
    })
}

/// Measured qubit offset flux at one field and temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxOffsetRecord {
    /// Parallel field, T.
    pub b_par: f64,
    /// Temperature, K.
    pub temperature: f64,
    /// Offset flux, Φ₀.
    pub phi_off: f64,
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) + 1e-18
}

/// `δΦm(B, T1, T2) = Φoff(B, T2) − Φoff(B, T1)`; both records must share `B`.
pub fn delta_phi_m(first: &FluxOffsetRecord, second: &FluxOffsetRecord) -> Result<f64> {
    if !same_value(first.b_par, second.b_par) {
        return Err(Error::MismatchedField {
            first: first.b_par,
            second: second.b_par,
        });
    }
    check_temperature(first.temperature)?;
    check_temperature(second.temperature)?;
    Ok(second.phi_off - first.phi_off)
}

/// One point of the field-subtracted temperature-difference plot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationPoint {
    pub b_par: f64,
    pub t1: f64,
    pub t2: f64,
    /// `μB·B·(1/T2 − 1/T1) / 2kB`, dimensionless.
    pub x: f64,
    /// `δΦm(B, T1, T2) − δΦm(0, T1, T2)`, Φ₀.
    pub y: f64,
}

fn find(records: &[FluxOffsetRecord], b: f64, t: f64) -> Option<&FluxOffsetRecord> {
    records
        .iter()
        .find(|r| same_value(r.b_par, b) && same_value(r.temperature, t))
}

/// Differences every non-zero-field record against `reference_t` at the
/// same field and subtracts the zero-field difference.
pub fn polarization_points(
    records: &[FluxOffsetRecord],
    reference_t: f64,
) -> Result<Vec<PolarizationPoint>> {
    check_temperature(reference_t)?;
    for (row, r) in records.iter().enumerate() {
        if !(r.temperature > 0.0) {
            return Err(Error::Csv {
                line: row + 1,
                reason: format!("temperature must be > 0, got {} K", r.temperature),
            });
        }
    }
    let mut points = Vec::new();
    for r in records {
        if r.b_par == 0.0 || same_value(r.temperature, reference_t) {
            continue;
        }
        let missing = |b: f64, t: f64| {
            Error::invalid(
                "records",
                format!("no record at B = {} mT, T = {} mK", b * 1e3, t * 1e3),
            )
        };
        let r1 =
            find(records, r.b_par, reference_t).ok_or_else(|| missing(r.b_par, reference_t))?;
        let z1 = find(records, 0.0, reference_t).ok_or_else(|| missing(0.0, reference_t))?;
        let z2 = find(records, 0.0, r.temperature).ok_or_else(|| missing(0.0, r.temperature))?;
        let y = delta_phi_m(r1, r)? - delta_phi_m(z1, z2)?;
        let x =
            BOHR_MAGNETON * r.b_par * (1.0 / r.temperature - 1.0 / reference_t) / (2.0 * BOLTZMANN);
        points.push(PolarizationPoint {
            b_par: r.b_par,
            t1: reference_t,
            t2: r.temperature,
            x,
            y,
        });
    }
    if points.is_empty() {
        return Err(Error::Empty(
            "polarization points (need non-zero fields away from the reference temperature)",
        ));
    }
    Ok(points)
}

/// Linear fit of `y` against `x`; the slope estimates `Φs·g̃`.
pub fn fit_polarization(points: &[PolarizationPoint]) -> Result<FitResult> {
    let x: Vec<f64> = points.iter().map(|p| p.x).collect();
    let y: Vec<f64> = points.iter().map(|p| p.y).collect();
    linear_fit(&x, &y)
}

/// Functional form used to generate synthetic offset tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagnetizationLaw {
    Linear,
    Tanh,
}

/// Synthetic `Φoff(B, T)` table: spin magnetization plus a per-field static
/// background and a small temperature-dependent zero-field term, with
/// optional Gaussian readout noise.
#[derive(Debug, Clone)]
pub struct SyntheticOffsets {
    pub model: MagnetizationModel,
    pub law: MagnetizationLaw,
    /// Static background per unit field, Φ₀/T (stray field, misalignment).
    pub background_per_tesla: f64,
    /// Zero-field spin term `c/T`, Φ₀·K.
    pub zero_field_curie: f64,
    /// Gaussian noise standard deviation, Φ₀.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticOffsets {
    pub fn new(model: MagnetizationModel) -> Self {
        Self {
            model,
            law: MagnetizationLaw::Linear,
            background_per_tesla: 0.8,
            zero_field_curie: 1e-4,
            noise: 0.0,
            seed: 0,
        }
    }

    pub fn generate(&self, fields: &[f64], temperatures: &[f64]) -> Result<Vec<FluxOffsetRecord>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, self.noise.max(0.0))
            .map_err(|e| Error::invalid("noise", e.to_string()))?;
        let mut out = Vec::with_capacity(fields.len() * temperatures.len());
        for &b in fields {
            for &t in temperatures {
                let spin = match self.law {
                    MagnetizationLaw::Linear => magnetization_flux_linear(&self.model, b, t)?,
                    MagnetizationLaw::Tanh => magnetization_flux(&self.model, b, t)?,
                };
                let noise = if self.noise > 0.0 {
                    normal.sample(&mut rng)
                } else {
                    0.0
                };
                out.push(FluxOffsetRecord {
                    b_par: b,
                    temperature: t,
                    phi_off: 0.1
                        + self.background_per_tesla * b
                        + self.zero_field_curie / t
                        + spin
                        + noise,
                });
            }
        }
        Ok(out)
    }
}
