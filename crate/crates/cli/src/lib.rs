//! Commands behind the `fqesr` binary. Each command turns a [`RunConfig`]
//! into a set of named output files and a plain-text report; the binary
//! handles arguments, the environment and the file system.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod plots;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fqesr_core::config::{MagnetizationSection, RunConfig};
use fqesr_core::io;
use fqesr_core::magnetization::{
    effective_g, fit_polarization, magnetization_flux, magnetization_flux_linear,
    polarization_points, FluxOffsetRecord, MagnetizationLaw, PolarizationPoint, SyntheticOffsets,
};
use fqesr_core::noise::{
    fit_flicker, flux_noise_level, simulate_switching, sub_seed, welch_psd, NoiseSeries,
    SigmaCurve, SigmaPoint, SwitchingExperiment,
};
use fqesr_core::qubit::{
    extract_esr_spectrum, qubit_freq, sensitivity, sensitivity_from_lineshape, shifts_to_flux,
    simulate_esr_scan, QubitParams,
};
use fqesr_core::spinsys::{
    crystal_transitions, linear_grid, synthesize_spectrum, FieldVector, Lineshape,
    SpectrumTrace, Transition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Magnetization,
    EsrSim,
    Sensitivity,
    Noise,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Spectrum,
        Command::Magnetization,
        Command::EsrSim,
        Command::Sensitivity,
        Command::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Magnetization => "magnetization",
            Command::EsrSim => "esr-sim",
            Command::Sensitivity => "sensitivity",
            Command::Noise => "noise",
        }
    }
}

/// Files (name, contents) in write order plus the report text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub report: String,
}

impl Outcome {
    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.report.push_str(text.as_ref());
        self.report.push('\n');
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }

    /// Writes every file and `<command>_report.txt` into `dir`.
    pub fn write_to(&self, dir: &Path, command: Command) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let mut written = Vec::new();
        let report_name = format!("{}_report.txt", command.name().replace('-', "_"));
        for (name, contents) in self
            .files
            .iter()
            .map(|(n, c)| (n.as_str(), c))
            .chain(std::iter::once((report_name.as_str(), &self.report)))
        {
            let path = dir.join(name);
            std::fs::write(&path, contents)
                .with_context(|| format!("cannot write {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Spectrum => cmd_spectrum(cfg),
        Command::Magnetization => cmd_magnetization(cfg),
        Command::EsrSim => cmd_esr_sim(cfg),
        Command::Sensitivity => cmd_sensitivity(cfg),
        Command::Noise => cmd_noise(cfg),
    }
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| anyhow!("config error at `{name}`: section is missing"))
}

fn keyed(key: &str, e: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("config error at `{key}`: {e}")
}

/// `x` rounded to three significant figures.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.2e}");
    }
    let decimals = (2 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn mhz(f: f64) -> String {
    format!("{:.4} MHz", f * 1e-6)
}

fn ghz(f: f64) -> String {
    format!("{:.4} GHz", f * 1e-9)
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let sec = section(&cfg.spectrum, "spectrum")?;
    let crystal = cfg.crystal()?;
    let t = sec.temperature()?;
    let window = sec.window()?;
    let (shape, fwhm) = sec.lineshape()?;
    if sec.B_mT.is_empty() {
        bail!(keyed("spectrum.B_mT", "at least one field is required"));
    }
    if sec.points < 2 {
        bail!(keyed("spectrum.points", "need at least 2 grid points"));
    }
    let grid = linear_grid(window.low, window.high, sec.points);
    let source = cfg
        .crystal
        .as_ref()
        .map(|c| c.resolved())
        .transpose()?
        .and_then(|c| c.source);

    let mut out = Outcome::default();
    out.line(format!(
        "spectrum: {} site(s), T = {} mK, B along {:?}, drive along {:?}",
        crystal.sites.len(),
        sec.T_mK,
        sec.B_dir,
        sec.drive_axis
    ));
    if let Some(src) = source {
        out.line(format!("crystal source: {src}"));
    }
    let many = sec.B_mT.len() > 1;
    for (k, (&b_mt, b)) in sec.B_mT.iter().zip(sec.fields_tesla()).enumerate() {
        let field = FieldVector::new(b, sec.B_dir).map_err(|e| keyed("spectrum.B_dir", e))?;
        let lists = crystal_transitions(&crystal, &field, t, sec.drive_axis, window)
            .map_err(|e| keyed("spectrum.drive_axis", e))?;
        let all: Vec<Transition> = lists.iter().flat_map(|l| l.entries.clone()).collect();
        let trace = synthesize_spectrum(&all, &grid, shape, fwhm)?;
        let suffix = if many { format!("_{k}") } else { String::new() };
        out.add(format!("spectrum{suffix}.csv"), io::trace_csv(&trace));
        out.add(format!("transitions{suffix}.csv"), io::transitions_csv(&lists));
        out.line(format!("B = {b_mt} mT"));
        for l in &lists {
            let mut strongest: Vec<&Transition> = l.entries.iter().collect();
            strongest.sort_by(|a, b| b.intensity.total_cmp(&a.intensity));
            let tops: Vec<String> = strongest
                .iter()
                .take(3)
                .map(|t| format!("{} ({})", mhz(t.frequency), sig3(t.intensity)))
                .collect();
            let span = match (
                l.entries.iter().map(|t| t.frequency).reduce(f64::min),
                l.entries.iter().map(|t| t.frequency).reduce(f64::max),
            ) {
                (Some(lo), Some(hi)) => format!(", span {} to {}", ghz(lo), ghz(hi)),
                _ => String::new(),
            };
            out.line(format!(
                "  {}: {} line(s) in window{span}; strongest: {}",
                l.label,
                l.entries.len(),
                if tops.is_empty() {
                    "none".to_string()
                } else {
                    tops.join(", ")
                }
            ));
        }
    }
    if cfg.output.plots {
        out.add("spectrum.gp", plots::spectrum(sec.B_mT.len()));
    }
    Ok(out)
}

fn default_fields_mt() -> Vec<f64> {
    (0..=50).map(|k| k as f64 * 0.1).collect()
}

fn default_temps_mk() -> Vec<f64> {
    vec![50.0, 60.0, 75.0, 100.0, 125.0, 150.0, 200.0]
}

fn magnetization_g(cfg: &RunConfig, sec: &MagnetizationSection, t_ref: f64) -> Result<(f64, String)> {
    if let Some(g) = sec.g_eff {
        return Ok((g, "configured".into()));
    }
    let crystal = cfg
        .crystal()
        .context("magnetization.g_eff is not set and cannot be derived from [crystal]")?;
    let eg = effective_g(&crystal, sec.B_dir, sec.sense_axis, t_ref)
        .map_err(|e| keyed("magnetization.sense_axis", e))?;
    if eg.no_moment {
        bail!(keyed(
            "magnetization.sense_axis",
            "the crystal has no moment along the sensing axis for this field direction; set magnetization.g_eff"
        ));
    }
    Ok((
        eg.g_eff,
        format!("from [crystal] at {} mK", t_ref * 1e3),
    ))
}

fn polarization_csv(points: &[PolarizationPoint]) -> String {
    let mut s = String::from("B_par_mT,T1_mK,T2_mK,x,dPhi_m_Phi0\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            io::format_float(p.b_par * 1e3),
            io::format_float(p.t1 * 1e3),
            io::format_float(p.t2 * 1e3),
            io::format_float(p.x),
            io::format_float(p.y)
        );
    }
    s
}

pub fn cmd_magnetization(cfg: &RunConfig) -> Result<Outcome> {
    let sec = section(&cfg.magnetization, "magnetization")?;
    let law = sec.law()?;
    let seed = cfg.seed.unwrap_or(0);
    if !(sec.noise_mPhi0 >= 0.0) {
        bail!(keyed("magnetization.noise_mPhi0", "must be >= 0"));
    }

    let (records, origin) = match &sec.input_csv {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("magnetization.input_csv: cannot read `{path}`"))?;
            let recs = io::read_records(&text)
                .with_context(|| format!("magnetization.input_csv `{path}`"))?;
            (recs, format!("table {path}"))
        }
        None => {
            let fields = if sec.B_par_mT.is_empty() {
                default_fields_mt()
            } else {
                sec.B_par_mT.clone()
            };
            let temps = if sec.T_mK.is_empty() {
                default_temps_mk()
            } else {
                sec.T_mK.clone()
            };
            if let Some(k) = temps.iter().position(|t| !(*t > 0.0)) {
                bail!(keyed(
                    &format!("magnetization.T_mK[{k}]"),
                    format!("temperature must be > 0, got {} mK", temps[k])
                ));
            }
            (
                synthetic_records(cfg, sec, law, &fields, &temps, seed)?,
                format!(
                    "synthetic, {} field(s) x {} temperature(s), noise {} mPhi0, seed {seed}",
                    fields.len(),
                    temps.len(),
                    sec.noise_mPhi0
                ),
            )
        }
    };
    let t_max = records
        .iter()
        .map(|r| r.temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    let t_ref = match sec.T_ref_mK {
        Some(t) if !(t > 0.0) => bail!(keyed("magnetization.T_ref_mK", "must be > 0")),
        Some(t) => t * 1e-3,
        None => t_max,
    };
    let (g, g_origin) = magnetization_g(cfg, sec, t_ref)?;
    let model = sec.model(g)?;

    let mut out = Outcome::default();
    out.line(format!(
        "magnetization: {} record(s) ({origin})",
        records.len()
    ));
    out.line(format!(
        "model: Phi_s = {} Phi0, g_eff = {} ({g_origin}), law {}",
        sec.Phi_s_Phi0,
        sig3(g),
        sec.law.to_ascii_lowercase()
    ));

    let mut table = String::from("B_par_mT,T_mK,Phi_m_Phi0\n");
    for r in &records {
        let phi = match law {
            MagnetizationLaw::Linear => magnetization_flux_linear(&model, r.b_par, r.temperature)?,
            MagnetizationLaw::Tanh => magnetization_flux(&model, r.b_par, r.temperature)?,
        };
        let _ = writeln!(
            table,
            "{},{},{}",
            io::format_float(r.b_par * 1e3),
            io::format_float(r.temperature * 1e3),
            io::format_float(phi)
        );
    }
    out.add("magnetization_flux.csv", table);
    out.add("flux_offsets.csv", io::records_csv(&records));

    let mut temps: Vec<f64> = records.iter().map(|r| r.temperature).collect();
    temps.sort_by(f64::total_cmp);
    temps.dedup();
    let has_zero = records.iter().any(|r| r.b_par == 0.0);
    let points = if temps.len() < 2 || !has_zero {
        Vec::new()
    } else {
        polarization_points(&records, t_ref)?
    };
    if points.len() < 2 {
        out.line(
            "regression skipped: needs two temperatures, zero-field records and at least two differenced points",
        );
    } else {
        let fit = fit_polarization(&points)?;
        let slope = fit.params[0];
        let se = fit
            .std_error(0)
            .map(|s| format!(" +/- {}", sig3(s)))
            .unwrap_or_default();
        out.add("polarization.csv", polarization_csv(&points));
        out.line(format!(
            "regression over {} point(s), reference T = {} mK",
            points.len(),
            t_ref * 1e3
        ));
        out.line(format!(
            "slope = {:.4}{se} Phi0 (Phi_s * g_eff), intercept = {} Phi0",
            slope,
            sig3(fit.params[1])
        ));
        out.line(format!("Phi_s = slope / g_eff = {:.4} Phi0", slope / g));
    }
    if cfg.output.plots {
        out.add("magnetization.gp", plots::magnetization());
    }
    Ok(out)
}

fn synthetic_records(
    cfg: &RunConfig,
    sec: &MagnetizationSection,
    law: MagnetizationLaw,
    fields_mt: &[f64],
    temps_mk: &[f64],
    seed: u64,
) -> Result<Vec<FluxOffsetRecord>> {
    // the generating model needs g_eff before the reference temperature is
    // known, so use the largest synthetic temperature
    let t_ref = temps_mk.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * 1e-3;
    let (g, _) = magnetization_g(cfg, sec, t_ref)?;
    let gen = SyntheticOffsets {
        model: sec.model(g)?,
        law,
        background_per_tesla: sec.background_Phi0_per_T,
        zero_field_curie: sec.curie_Phi0_K,
        noise: sec.noise_mPhi0 * 1e-3,
        seed,
    };
    let fields: Vec<f64> = fields_mt.iter().map(|b| b * 1e-3).collect();
    let temps: Vec<f64> = temps_mk.iter().map(|t| t * 1e-3).collect();
    Ok(gen.generate(&fields, &temps)?)
}

fn esr_input_trace(cfg: &RunConfig) -> Result<SpectrumTrace> {
    let sec = section(&cfg.esr_sim, "esr_sim")?;
    if sec.points < 2 {
        bail!(keyed("esr_sim.points", "need at least 2 grid points"));
    }
    if sec.use_spectrum {
        let spec = section(&cfg.spectrum, "spectrum")?;
        let crystal = cfg.crystal()?;
        let b = *spec
            .fields_tesla()
            .first()
            .ok_or_else(|| keyed("spectrum.B_mT", "at least one field is required"))?;
        let window = spec.window()?;
        let (shape, fwhm) = spec.lineshape()?;
        let field = FieldVector::new(b, spec.B_dir).map_err(|e| keyed("spectrum.B_dir", e))?;
        let lists = crystal_transitions(&crystal, &field, spec.temperature()?, spec.drive_axis, window)?;
        let all: Vec<Transition> = lists.iter().flat_map(|l| l.entries.clone()).collect();
        let grid = linear_grid(window.low, window.high, sec.points);
        return Ok(synthesize_spectrum(&all, &grid, shape, fwhm)?);
    }
    if sec.lines_GHz.is_empty() {
        bail!(keyed(
            "esr_sim.lines_GHz",
            "no lines given (set lines_GHz or use_spectrum = true)"
        ));
    }
    if sec.intensities.len() != sec.lines_GHz.len() {
        bail!(keyed(
            "esr_sim.intensities",
            format!(
                "{} intensities for {} lines",
                sec.intensities.len(),
                sec.lines_GHz.len()
            )
        ));
    }
    if !(sec.fwhm_MHz > 0.0) {
        bail!(keyed("esr_sim.fwhm_MHz", "line width must be > 0"));
    }
    let fwhm = sec.fwhm_MHz * 1e6;
    let lo = sec.lines_GHz.iter().cloned().fold(f64::INFINITY, f64::min) * 1e9;
    let hi = sec.lines_GHz.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * 1e9;
    let f_min = sec.f_min_GHz.map(|f| f * 1e9).unwrap_or(lo - 5.0 * fwhm);
    let f_max = sec.f_max_GHz.map(|f| f * 1e9).unwrap_or(hi + 5.0 * fwhm);
    if !(f_min >= 0.0 && f_max > f_min) {
        bail!(keyed(
            "esr_sim.f_min_GHz",
            format!("need 0 <= f_min < f_max, got [{}, {}] GHz", f_min * 1e-9, f_max * 1e-9)
        ));
    }
    let lines: Vec<Transition> = sec
        .lines_GHz
        .iter()
        .zip(&sec.intensities)
        .map(|(f, i)| Transition {
            frequency: f * 1e9,
            intensity: *i,
            lower: 0,
            upper: 1,
        })
        .collect();
    let grid = linear_grid(f_min, f_max, sec.points);
    Ok(synthesize_spectrum(
        &lines,
        &grid,
        Lineshape::Lorentzian,
        fwhm,
    )?)
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn cmd_esr_sim(cfg: &RunConfig) -> Result<Outcome> {
    let sec = section(&cfg.esr_sim, "esr_sim")?;
    let qsec = section(&cfg.qubit, "qubit")?;
    let q = qsec.build()?;
    let bias = qsec.bias(&q);
    let input = esr_input_trace(cfg)?;
    if sec.drive_points < 5 {
        bail!(keyed("esr_sim.drive_points", "need at least 5 drive points"));
    }
    if !(sec.drive_span_MHz > 0.0) {
        bail!(keyed("esr_sim.drive_span_MHz", "must be > 0"));
    }
    let peak = max_abs(&input.amplitudes);
    let coupling = if peak > 0.0 {
        sec.max_flux_mPhi0 * 1e-3 / peak
    } else {
        0.0
    };
    let f0 = qubit_freq(&q, bias);
    let half = sec.drive_span_MHz * 1e6 / 2.0;
    let drive = linear_grid(f0 - half, f0 + half, sec.drive_points);
    let (mut scan, report) = simulate_esr_scan(&q, &input, coupling, bias, &drive)
        .map_err(|e| keyed("qubit.bias_detuning_mPhi0", e))?;
    let rows = scan.p_sw.len();
    for &r in &sec.corrupt_rows {
        if r >= rows {
            bail!(keyed(
                "esr_sim.corrupt_rows",
                format!("row {r} is out of range (scan has {rows} rows)")
            ));
        }
        scan.p_sw[r] = vec![q.p_base; drive.len()];
    }
    let extraction = extract_esr_spectrum(&scan)?;
    let flux = shifts_to_flux(&extraction.trace.amplitudes, &q, bias)?;
    let extracted = SpectrumTrace::new(input.frequencies.clone(), flux)?;

    let mut out = Outcome::default();
    out.add("esr_input.csv", io::trace_csv(&input));
    out.add("esr_scan.csv", io::scan_csv(&scan));
    out.add("esr_extracted.csv", io::trace_csv(&extracted));
    out.line(format!(
        "esr-sim: {} ESR point(s) x {} drive point(s), bias {:.6} Phi0, f_q = {}",
        rows,
        drive.len(),
        bias,
        ghz(f0)
    ));
    if report.near_degeneracy {
        out.line("warning: bias is close to degeneracy; the flux response is weak and nonlinear");
    }
    if report.clamped > 0 {
        out.line(format!(
            "warning: {} scan cell(s) clamped to [0, 1]",
            report.clamped
        ));
    }
    out.line(format!(
        "coupling: {} Phi0 per unit amplitude (peak spin flux {} mPhi0)",
        sig3(coupling),
        sec.max_flux_mPhi0
    ));
    if extraction.flagged.is_empty() {
        out.line("flagged rows: none");
    } else {
        let list: Vec<String> = extraction.flagged.iter().map(|r| r.to_string()).collect();
        out.line(format!(
            "flagged rows (no resolvable qubit peak, interpolated): {}",
            list.join(", ")
        ));
    }
    let step = input.frequencies[1] - input.frequencies[0];
    let out_max = max_abs(&extracted.amplitudes);
    if coupling == 0.0 {
        out.line(format!(
            "zero coupling: extracted trace is flat (max |dPhi| = {} Phi0)",
            sig3(out_max)
        ));
    } else {
        let rt = round_trip(&input, &extracted);
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|f| ghz(*f))
                .collect::<Vec<_>>()
                .join(", ")
        };
        out.line(format!("input peaks: {}", fmt(&rt.input)));
        out.line(format!("extracted peaks: {}", fmt(&rt.output)));
        match rt.max_offset {
            Some(d) => out.line(format!(
                "max peak offset: {} grid step(s) ({})",
                sig3(d / step),
                mhz(d)
            )),
            None => out.line("max peak offset: unmatched peaks"),
        }
        if rt.input.len() >= 2 && rt.output.len() == rt.input.len() {
            out.line(format!(
                "relative intensities (to first peak): input {}, extracted {}",
                rt.input_ratios.iter().map(|r| sig3(*r)).collect::<Vec<_>>().join(", "),
                rt.output_ratios.iter().map(|r| sig3(*r)).collect::<Vec<_>>().join(", ")
            ));
        }
    }
    if cfg.output.plots {
        out.add("esr_sim.gp", plots::esr_sim());
    }
    Ok(out)
}

/// Peak positions before and after the scan round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    /// Largest distance (Hz) from an input peak to its nearest extracted peak.
    pub max_offset: Option<f64>,
    pub input_ratios: Vec<f64>,
    pub output_ratios: Vec<f64>,
}

/// Matches local maxima above 10% of each trace's maximum.
pub fn round_trip(input: &SpectrumTrace, output: &SpectrumTrace) -> RoundTrip {
    let peaks = |t: &SpectrumTrace| {
        let idx = t.peaks(0.1 * max_abs(&t.amplitudes));
        let f: Vec<f64> = idx.iter().map(|&k| t.frequencies[k]).collect();
        let a: Vec<f64> = idx.iter().map(|&k| t.amplitudes[k]).collect();
        (f, a)
    };
    let (fin, ain) = peaks(input);
    let (fout, aout) = peaks(output);
    let max_offset = if fout.is_empty() || fin.is_empty() {
        None
    } else {
        Some(
            fin.iter()
                .map(|f| fout.iter().map(|g| (f - g).abs()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max),
        )
    };
    let ratios = |a: &[f64]| a.iter().map(|v| v / a[0]).collect::<Vec<_>>();
    RoundTrip {
        input_ratios: if ain.is_empty() { vec![] } else { ratios(&ain) },
        output_ratios: if aout.is_empty() { vec![] } else { ratios(&aout) },
        input: fin,
        output: fout,
        max_offset,
    }
}

pub fn cmd_sensitivity(cfg: &RunConfig) -> Result<Outcome> {
    let sec = section(&cfg.sensitivity, "sensitivity")?;
    let q = section(&cfg.qubit, "qubit")?.build()?;
    let dp = sec.dp_sw()?;
    if !(dp >= 0.0) {
        bail!(keyed("sensitivity.dP_sw", "must be >= 0"));
    }
    let dn = sec.spins_per_flux()?;
    let b = sensitivity(dp, &q, dn);
    let alt = sensitivity_from_lineshape(dp, &q, dn);
    let mut out = Outcome::default();
    out.line(format!(
        "N_min = {} spins = dP_sw {} x 4*gamma_q/(3*sqrt(3)*V) {} MHz x h/(Ip*Phi0) {} uPhi0/MHz x dN/dPhi {} spins/Phi0",
        sig3(b.n_min),
        sig3(b.dp_sw),
        sig3(b.slope_term * 1e-6),
        sig3(b.flux_term * 1e12),
        sig3(b.spin_density)
    ));
    let f = io::format_float;
    out.add(
        "sensitivity.csv",
        format!(
            "dP_sw,slope_term_Hz,flux_term_Phi0_per_Hz,spin_density_per_Phi0,N_min,N_min_lineshape\n{},{},{},{},{},{}\n",
            f(b.dp_sw),
            f(b.slope_term),
            f(b.flux_term),
            f(b.spin_density),
            f(b.n_min),
            f(alt.n_min)
        ),
    );
    Ok(out)
}

/// Point-wise RMS of several σ curves over the same repetition numbers.
pub fn rms_curve(curves: &[SigmaCurve]) -> SigmaCurve {
    let n = curves.len() as f64;
    let points = curves[0]
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| SigmaPoint {
            n_rep: p.n_rep,
            sigma: (curves.iter().map(|c| c.points[i].sigma.powi(2)).sum::<f64>() / n).sqrt(),
            binomial: p.binomial,
        })
        .collect();
    SigmaCurve { points }
}

/// Flux per unit switching probability at the steepest point of the qubit
/// response, Φ₀.
pub fn flux_per_probability(q: &QubitParams) -> f64 {
    let b = sensitivity(1.0, q, 1.0);
    b.slope_term * b.flux_term
}

/// Switching-probability record sampled once per `n_rep` repetitions.
pub fn switching_record(
    exp: &SwitchingExperiment,
    n_rep: usize,
    samples: usize,
    seed: u64,
) -> Result<NoiseSeries> {
    let long = SwitchingExperiment {
        estimates: samples,
        ..*exp
    };
    let record = long.record(n_rep, sub_seed(seed, 0))?;
    let mut est = simulate_switching(&record, n_rep, sub_seed(seed, 1));
    est.truncate(samples);
    Ok(NoiseSeries::new(
        est,
        1.0 / (n_rep as f64 * exp.repetition_time),
        seed,
    )?)
}

pub fn cmd_noise(cfg: &RunConfig) -> Result<Outcome> {
    let sec = section(&cfg.noise, "noise")?;
    let exp = sec.experiment()?;
    let opts = sec.welch()?;
    let seed = cfg.seed.unwrap_or(0);
    if sec.seeds == 0 {
        bail!(keyed("noise.seeds", "need at least one seed"));
    }
    if sec.n_rep.is_empty() {
        bail!(keyed("noise.n_rep", "at least one repetition number is required"));
    }
    if let Some(k) = sec.n_rep.iter().position(|&n| n == 0) {
        bail!(keyed(&format!("noise.n_rep[{k}]"), "must be positive"));
    }
    if sec.psd_n_rep == 0 {
        bail!(keyed("noise.psd_n_rep", "must be positive"));
    }
    if sec.psd_samples < 64 {
        bail!(keyed("noise.psd_samples", "need at least 64 samples"));
    }

    let curves = (0..sec.seeds)
        .map(|s| exp.run(&sec.n_rep, sub_seed(seed, s as u64)))
        .collect::<fqesr_core::Result<Vec<_>>>()?;
    let curve = rms_curve(&curves);

    let mut out = Outcome::default();
    out.add("sigma_vs_nrep.csv", io::sigma_csv(&curve));
    out.line(format!(
        "noise: p = {}, t_rep = {} us, hold = {}, {} estimate(s) per point, {} seed(s) (RMS), seed {seed}",
        exp.p_mean,
        exp.repetition_time * 1e6,
        exp.hold,
        exp.estimates,
        sec.seeds
    ));
    if exp.flicker_a > 0.0 {
        let how = match (sec.flicker_A_per_Hz, sec.floor_target) {
            (Some(_), _) => "configured".to_string(),
            (None, Some(t)) => format!("tuned so sigma = {t} at n_rep = {}", sec.tune_n_rep),
            _ => unreachable!("flicker level is zero without a source"),
        };
        out.line(format!(
            "flicker: A = {} /Hz ({how}), alpha = {}",
            sig3(exp.flicker_a),
            exp.flicker_alpha
        ));
    } else {
        out.line("flicker: none (constant p)");
    }
    let binomial: Vec<&SigmaPoint> = curve.points.iter().filter(|p| p.n_rep <= 500).collect();
    if binomial.is_empty() {
        out.line("binomial regime (n_rep <= 500): no points");
    } else {
        let dev = binomial
            .iter()
            .map(|p| (p.sigma / p.binomial - 1.0).abs())
            .fold(0.0, f64::max);
        out.line(format!(
            "binomial regime (n_rep <= 500): max deviation from sqrt(p(1-p)/n_rep) {:.1}%",
            dev * 100.0
        ));
    }
    match curve.detected_floor() {
        Some(f) => out.line(format!(
            "floor: {} (median sigma of the three largest n_rep)",
            sig3(f)
        )),
        None => out.line("floor: none detected"),
    }
    if let (Some(_), Some(n)) = (curve.detected_floor(), curve.crossing()) {
        out.line(format!("binomial prediction falls below the floor at n_rep = {n}"));
    }

    let series = switching_record(&exp, sec.psd_n_rep, sec.psd_samples, sub_seed(seed, 1 << 32))?;
    let psd = welch_psd(&series, &opts).map_err(|e| keyed("noise.segment_length", e))?;
    out.add("psd_series.csv", io::series_csv(&series));
    out.add("psd.csv", io::psd_csv(&psd));
    out.line(format!(
        "psd: {} sample(s) at {} Hz (n_rep = {}), segment {} x {}, {} window",
        series.len(),
        sig3(series.fs),
        sec.psd_n_rep,
        psd.segment_length,
        psd.segments,
        psd.window.name()
    ));
    let fit = fit_flicker(&psd, sec.fit_f_min_Hz, sec.fit_f_max_Hz)
        .map_err(|e| keyed("noise.fit_f_max_Hz", e))?;
    let se = fit
        .alpha_std_error
        .map(|s| format!(" +/- {:.3}", s))
        .unwrap_or_default();
    out.line(format!(
        "flicker fit ({} bin(s) in [{}, {}] Hz{}): A = {} /Hz, alpha = {:.3}{se}",
        fit.bins,
        sec.fit_f_min_Hz,
        sec.fit_f_max_Hz,
        if fit.excluded > 0 {
            format!(", {} non-positive excluded", fit.excluded)
        } else {
            String::new()
        },
        sig3(fit.a),
        fit.alpha
    ));
    let slope = match (sec.dPhi_dPsw_Phi0, &cfg.qubit) {
        (Some(s), _) => Some((s, "configured")),
        (None, Some(qs)) => Some((flux_per_probability(&qs.build()?), "from [qubit]")),
        (None, None) => None,
    };
    match slope {
        Some((s, how)) => {
            let a_phi = flux_noise_level(fit.a, s);
            out.line(format!(
                "flux noise: A_Phi = {} Phi0^2/Hz = ({} uPhi0)^2/Hz with dPhi/dP_sw = {} Phi0 ({how})",
                sig3(a_phi),
                sig3(a_phi.sqrt() * 1e6),
                sig3(s)
            ));
        }
        None => out.line("flux noise: no dPhi/dP_sw (set noise.dPhi_dPsw_Phi0 or [qubit])"),
    }
    if cfg.output.plots {
        out.add("noise.gp", plots::noise());
    }
    Ok(out)
}
