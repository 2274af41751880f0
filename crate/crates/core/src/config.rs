//! Run configuration: a sectioned TOML document whose keys carry their units
//! (`B_mT`, `T_mK`, `gamma_q_MHz`, ...). Any key can be overridden from the
//! environment with `FQESR_<SECTION>__<KEY>`; array elements are addressed
//! by index, e.g. `FQESR_CRYSTAL__SITE__0__WEIGHT`.

use serde::{Deserialize, Deserializer};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::fixtures;
use crate::magnetization::{MagnetizationLaw, MagnetizationModel};
use crate::noise::{Detrend, SwitchingExperiment, WelchOptions};
use crate::numerics::Window;
use crate::qubit::QubitParams;
use crate::spinsys::{
    AxisRotation, CrystalConfig, FrequencyWindow, Lineshape, Mat3, Spin, SpinSystem, TensorSpec,
    IDENTITY,
};

pub const ENV_PREFIX: &str = "FQESR_";

const MHZ: f64 = 1e6;
const GHZ: f64 = 1e9;

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match Either::deserialize(d)? {
        Either::One(v) => vec![v],
        Either::Many(v) => v,
    })
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSection,
    pub crystal: Option<CrystalSection>,
    pub spectrum: Option<SpectrumSection>,
    pub magnetization: Option<MagnetizationSection>,
    pub qubit: Option<QubitSection>,
    pub esr_sim: Option<EsrSimSection>,
    pub sensitivity: Option<SensitivitySection>,
    pub noise: Option<NoiseSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    /// Also write gnuplot scripts next to the CSV files.
    #[serde(default)]
    pub plots: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SiteSection {
    pub label: Option<String>,
    #[serde(default = "half")]
    pub S: f64,
    #[serde(default)]
    pub I: f64,
    #[serde(default)]
    pub g_n: f64,
    #[serde(default = "unit")]
    pub weight: f64,
    pub g_matrix: Option<Mat3>,
    pub g_principal: Option<[f64; 3]>,
    pub g_euler_rad: Option<[f64; 3]>,
    pub A_matrix_MHz: Option<Mat3>,
    pub A_principal_MHz: Option<[f64; 3]>,
    pub A_euler_rad: Option<[f64; 3]>,
    pub Q_matrix_MHz: Option<Mat3>,
    pub Q_principal_MHz: Option<[f64; 3]>,
    pub Q_euler_rad: Option<[f64; 3]>,
}

fn half() -> f64 {
    0.5
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    /// Built-in fixture name; its sites come before any listed here.
    pub fixture: Option<String>,
    pub source: Option<String>,
    pub subclass_axis: Option<[f64; 3]>,
    #[serde(default)]
    pub site: Vec<SiteSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SpectrumSection {
    #[serde(deserialize_with = "one_or_many")]
    pub B_mT: Vec<f64>,
    #[serde(default = "d2")]
    pub B_dir: [f64; 3],
    pub T_mK: f64,
    #[serde(default = "d1")]
    pub drive_axis: [f64; 3],
    pub f_min_GHz: f64,
    pub f_max_GHz: f64,
    #[serde(default = "spectrum_points")]
    pub points: usize,
    #[serde(default = "lorentzian")]
    pub lineshape: String,
    #[serde(default = "twenty")]
    pub fwhm_MHz: f64,
}

fn d1() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

fn d2() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn spectrum_points() -> usize {
    2001
}

fn lorentzian() -> String {
    "lorentzian".into()
}

fn twenty() -> f64 {
    20.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct MagnetizationSection {
    #[serde(default = "phi_s_default")]
    pub Phi_s_Phi0: f64,
    /// Effective g; computed from `[crystal]` when absent.
    pub g_eff: Option<f64>,
    #[serde(default = "linear_law")]
    pub law: String,
    #[serde(default, deserialize_with = "one_or_many")]
    pub B_par_mT: Vec<f64>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub T_mK: Vec<f64>,
    /// Reference (highest) temperature for the differencing; defaults to the
    /// largest temperature present.
    pub T_ref_mK: Option<f64>,
    #[serde(default)]
    pub noise_mPhi0: f64,
    #[serde(default = "background_default")]
    pub background_Phi0_per_T: f64,
    #[serde(default = "curie_default")]
    pub curie_Phi0_K: f64,
    /// Measured `B_par_mT,T_mK,Phi_off_mPhi0` table instead of synthetic data.
    pub input_csv: Option<String>,
    #[serde(default = "d2")]
    pub B_dir: [f64; 3],
    #[serde(default = "d1")]
    pub sense_axis: [f64; 3],
}

fn phi_s_default() -> f64 {
    0.29
}

fn linear_law() -> String {
    "linear".into()
}

fn background_default() -> f64 {
    0.8
}

fn curie_default() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct QubitSection {
    pub Delta_GHz: Option<f64>,
    pub Ip_nA: Option<f64>,
    #[serde(default)]
    pub Phi_off_mPhi0: f64,
    pub gamma_q_MHz: Option<f64>,
    pub V: Option<f64>,
    #[serde(default = "p_base_default")]
    pub P_base: f64,
    /// Bias measured from the degeneracy point `Φoff + Φ₀/2`.
    pub bias_detuning_mPhi0: Option<f64>,
}

fn p_base_default() -> f64 {
    0.2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct EsrSimSection {
    #[serde(default)]
    pub lines_GHz: Vec<f64>,
    #[serde(default)]
    pub intensities: Vec<f64>,
    #[serde(default = "forty")]
    pub fwhm_MHz: f64,
    pub f_min_GHz: Option<f64>,
    pub f_max_GHz: Option<f64>,
    #[serde(default = "esr_points")]
    pub points: usize,
    /// Take the spin spectrum from `[spectrum]` (first field) instead.
    #[serde(default)]
    pub use_spectrum: bool,
    /// Spin flux at the strongest point of the spectrum.
    pub max_flux_mPhi0: f64,
    #[serde(default = "span_default")]
    pub drive_span_MHz: f64,
    #[serde(default = "drive_points")]
    pub drive_points: usize,
    /// Rows replaced by a flat, unfittable response before extraction.
    #[serde(default)]
    pub corrupt_rows: Vec<usize>,
}

fn forty() -> f64 {
    40.0
}

fn esr_points() -> usize {
    301
}

fn span_default() -> f64 {
    240.0
}

fn drive_points() -> usize {
    241
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SensitivitySection {
    pub dP_sw: Option<f64>,
    /// Alternative to `dP_sw`: measured σP_sw, with `δP_sw = 2σP_sw`.
    pub sigma_P: Option<f64>,
    pub N_spins: Option<f64>,
    pub Phi_s_Phi0: Option<f64>,
    /// Alternative to `N_spins / Phi_s_Phi0`.
    pub dN_dPhi_per_Phi0: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct NoiseSection {
    #[serde(default = "p_mean_default")]
    pub p_mean: f64,
    #[serde(default = "alpha_default")]
    pub alpha: f64,
    /// Flicker PSD of `P_sw` at 1 Hz. Overrides `floor_target`.
    pub flicker_A_per_Hz: Option<f64>,
    /// Derive the flicker level so its σ at `tune_n_rep` equals this.
    pub floor_target: Option<f64>,
    #[serde(default = "tune_default")]
    pub tune_n_rep: usize,
    #[serde(default = "rep_time_default")]
    pub repetition_time_us: f64,
    #[serde(default = "hold_default")]
    pub hold: usize,
    #[serde(default = "estimates_default")]
    pub estimates: usize,
    #[serde(default = "n_rep_default")]
    pub n_rep: Vec<usize>,
    /// Independent curves averaged (RMS) per point.
    #[serde(default = "one")]
    pub seeds: usize,
    /// Repetitions per estimate of the continuous record used for the PSD.
    #[serde(default = "psd_n_rep_default")]
    pub psd_n_rep: usize,
    #[serde(default = "psd_samples_default")]
    pub psd_samples: usize,
    pub segment_length: Option<usize>,
    #[serde(default = "overlap_default")]
    pub overlap: f64,
    #[serde(default = "hann")]
    pub window: String,
    #[serde(default = "mean_detrend")]
    pub detrend: String,
    #[serde(default)]
    pub fit_f_min_Hz: f64,
    #[serde(default = "fit_max_default")]
    pub fit_f_max_Hz: f64,
    /// Flux per unit switching probability; from `[qubit]` when absent.
    pub dPhi_dPsw_Phi0: Option<f64>,
}

fn p_mean_default() -> f64 {
    0.5
}

fn alpha_default() -> f64 {
    0.93
}

fn tune_default() -> usize {
    5000
}

fn rep_time_default() -> f64 {
    10.0
}

fn hold_default() -> usize {
    100
}

fn estimates_default() -> usize {
    300
}

fn n_rep_default() -> Vec<usize> {
    vec![
        100, 200, 500, 1000, 2000, 5000, 10_000, 20_000, 50_000, 100_000, 200_000, 500_000,
        1_000_000,
    ]
}

fn one() -> usize {
    1
}

fn psd_n_rep_default() -> usize {
    10_000
}

fn psd_samples_default() -> usize {
    1 << 16
}

fn overlap_default() -> f64 {
    0.5
}

fn hann() -> String {
    "hann".into()
}

fn mean_detrend() -> String {
    "mean".into()
}

fn fit_max_default() -> f64 {
    0.1
}

/// Every key of the schema, used to restore the case of environment names
/// for keys the document does not already contain.
const KNOWN_KEYS: &[&str] = &[
    "seed",
    "output",
    "dir",
    "plots",
    "crystal",
    "fixture",
    "source",
    "subclass_axis",
    "site",
    "label",
    "S",
    "I",
    "g_n",
    "weight",
    "g_matrix",
    "g_principal",
    "g_euler_rad",
    "A_matrix_MHz",
    "A_principal_MHz",
    "A_euler_rad",
    "Q_matrix_MHz",
    "Q_principal_MHz",
    "Q_euler_rad",
    "spectrum",
    "B_mT",
    "B_dir",
    "T_mK",
    "drive_axis",
    "f_min_GHz",
    "f_max_GHz",
    "points",
    "lineshape",
    "fwhm_MHz",
    "magnetization",
    "Phi_s_Phi0",
    "g_eff",
    "law",
    "B_par_mT",
    "T_ref_mK",
    "noise_mPhi0",
    "background_Phi0_per_T",
    "curie_Phi0_K",
    "input_csv",
    "sense_axis",
    "qubit",
    "Delta_GHz",
    "Ip_nA",
    "Phi_off_mPhi0",
    "gamma_q_MHz",
    "V",
    "P_base",
    "bias_detuning_mPhi0",
    "esr_sim",
    "lines_GHz",
    "intensities",
    "use_spectrum",
    "max_flux_mPhi0",
    "drive_span_MHz",
    "drive_points",
    "corrupt_rows",
    "sensitivity",
    "dP_sw",
    "sigma_P",
    "N_spins",
    "dN_dPhi_per_Phi0",
    "noise",
    "p_mean",
    "alpha",
    "flicker_A_per_Hz",
    "floor_target",
    "tune_n_rep",
    "repetition_time_us",
    "hold",
    "estimates",
    "n_rep",
    "seeds",
    "psd_n_rep",
    "psd_samples",
    "segment_length",
    "overlap",
    "window",
    "detrend",
    "fit_f_min_Hz",
    "fit_f_max_Hz",
    "dPhi_dPsw_Phi0",
];

fn find_key(table: &Table, key: &str) -> Option<String> {
    table
        .keys()
        .find(|k| k.eq_ignore_ascii_case(key))
        .cloned()
        .or_else(|| {
            KNOWN_KEYS
                .iter()
                .find(|k| k.eq_ignore_ascii_case(key))
                .map(|k| k.to_string())
        })
}

fn parse_env_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

fn set_path(root: &mut Table, path: &[&str], value: Value, full: &str) -> Result<()> {
    let (head, rest) = path.split_first().expect("non-empty path");
    let key = find_key(root, head).unwrap_or_else(|| head.to_string());
    if rest.is_empty() {
        root.insert(key, value);
        return Ok(());
    }
    let entry = root
        .entry(key.clone())
        .or_insert_with(|| Value::Table(Table::new()));
    set_value(entry, rest, value, full)
}

fn set_value(node: &mut Value, path: &[&str], value: Value, full: &str) -> Result<()> {
    match node {
        Value::Table(t) => set_path(t, path, value, full),
        Value::Array(a) => {
            let (head, rest) = path.split_first().expect("non-empty path");
            let idx: usize = head
                .parse()
                .map_err(|_| Error::config(full, format!("`{head}` is not an array index")))?;
            let len = a.len();
            let slot = a.get_mut(idx).ok_or_else(|| {
                Error::config(full, format!("index {idx} out of range (length {len})"))
            })?;
            if rest.is_empty() {
                *slot = value;
                Ok(())
            } else {
                set_value(slot, rest, value, full)
            }
        }
        _ => Err(Error::config(full, "cannot descend into a scalar value")),
    }
}

/// Applies `FQESR_*` overrides from `vars` to a parsed document.
pub fn apply_overrides(
    doc: &mut Table,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<Vec<String>> {
    let mut applied = Vec::new();
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (name, raw) in vars {
        let path: Vec<&str> = name[ENV_PREFIX.len()..].split("__").collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(Error::config(name.as_str(), "empty path segment"));
        }
        set_path(doc, &path, parse_env_value(&raw), &name)?;
        applied.push(name);
    }
    Ok(applied)
}

impl RunConfig {
    /// Parses a document without environment overrides.
    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
        Self::from_table(doc)
    }

    pub fn from_table(doc: Table) -> Result<Self> {
        serde_path_to_error::deserialize(Value::Table(doc)).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().to_string())
        })
    }

    /// Parses `text` and applies the `FQESR_*` variables of `vars`.
    pub fn load(
        text: &str,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<(Self, Vec<String>)> {
        let mut doc: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
        let applied = apply_overrides(&mut doc, vars)?;
        Ok((Self::from_table(doc)?, applied))
    }

    pub fn crystal(&self) -> Result<CrystalConfig> {
        let section = self
            .crystal
            .as_ref()
            .ok_or_else(|| Error::config("crystal", "section is missing"))?;
        section.build()
    }

    pub fn qubit(&self) -> Result<QubitParams> {
        self.qubit
            .as_ref()
            .ok_or_else(|| Error::config("qubit", "section is missing"))?
            .build()
    }
}

fn tensor(
    key: &str,
    matrix: Option<Mat3>,
    principal: Option<[f64; 3]>,
    euler: Option<[f64; 3]>,
    scale: f64,
) -> Result<Option<TensorSpec>> {
    match (matrix, principal) {
        (Some(_), Some(_)) => Err(Error::config(
            key,
            "give either a matrix or principal values, not both",
        )),
        (Some(m), None) => {
            if euler.is_some() {
                return Err(Error::config(
                    key,
                    "Euler angles only apply to principal values",
                ));
            }
            let scaled = m.map(|row| row.map(|v| v * scale));
            TensorSpec::from_symmetric(&scaled)
                .map(Some)
                .map_err(|e| Error::config(key, e.to_string()))
        }
        (None, Some(p)) => Ok(Some(TensorSpec::new(
            p.map(|v| v * scale),
            euler.unwrap_or([0.0; 3]),
        ))),
        (None, None) => Ok(None),
    }
}

impl SiteSection {
    pub fn build(&self, prefix: &str) -> Result<SpinSystem> {
        let key = |k: &str| format!("{prefix}.{k}");
        let s = Spin::new(self.S).map_err(|e| Error::config(key("S"), e.to_string()))?;
        let i = Spin::new(self.I).map_err(|e| Error::config(key("I"), e.to_string()))?;
        if s.multiplicity() < 2 {
            return Err(Error::config(
                key("S"),
                "electron spin must be at least 1/2",
            ));
        }
        let g = tensor(
            &key("g"),
            self.g_matrix,
            self.g_principal,
            self.g_euler_rad,
            1.0,
        )?
        .ok_or_else(|| Error::config(key("g_principal"), "a g tensor is required"))?;
        let a = tensor(
            &key("A"),
            self.A_matrix_MHz,
            self.A_principal_MHz,
            self.A_euler_rad,
            MHZ,
        )?
        .unwrap_or_else(TensorSpec::zero);
        let q = tensor(
            &key("Q"),
            self.Q_matrix_MHz,
            self.Q_principal_MHz,
            self.Q_euler_rad,
            MHZ,
        )?
        .unwrap_or_else(TensorSpec::zero);
        Ok(SpinSystem {
            label: self.label.clone().unwrap_or_else(|| prefix.to_string()),
            electron_spin: s,
            nuclear_spin: i,
            g,
            hyperfine: a,
            quadrupole: q,
            nuclear_g: self.g_n,
            frame: IDENTITY,
        })
    }
}

impl CrystalSection {
    /// Resolves the fixture (if any) and merges its sites with the listed ones.
    pub fn resolved(&self) -> Result<CrystalSection> {
        let mut out = match &self.fixture {
            Some(name) => {
                let text = fixtures::crystal_toml(name).ok_or_else(|| {
                    Error::config(
                        "crystal.fixture",
                        format!(
                            "unknown fixture `{name}` (available: {})",
                            fixtures::NAMES.join(", ")
                        ),
                    )
                })?;
                let base: CrystalSection = toml::from_str(text)
                    .map_err(|e| Error::config("crystal.fixture", e.to_string()))?;
                base
            }
            None => CrystalSection::default(),
        };
        if self.source.is_some() {
            out.source = self.source.clone();
        }
        if self.subclass_axis.is_some() {
            out.subclass_axis = self.subclass_axis;
        }
        out.site.extend(self.site.iter().cloned());
        out.fixture = self.fixture.clone();
        Ok(out)
    }

    pub fn build(&self) -> Result<CrystalConfig> {
        let r = self.resolved()?;
        if r.site.is_empty() {
            return Err(Error::config(
                "crystal.site",
                "empty site list: define [[crystal.site]] entries or a fixture",
            ));
        }
        let sites = r
            .site
            .iter()
            .enumerate()
            .map(|(k, s)| s.build(&format!("crystal.site.{k}")))
            .collect::<Result<Vec<_>>>()?;
        let weights = r.site.iter().map(|s| s.weight).collect();
        let rotation = r
            .subclass_axis
            .map(AxisRotation::c2)
            .transpose()
            .map_err(|e| Error::config("crystal.subclass_axis", e.to_string()))?;
        CrystalConfig::new(sites, weights, rotation)
            .map_err(|e| Error::config("crystal.site", e.to_string()))
    }
}

impl SpectrumSection {
    pub fn fields_tesla(&self) -> Vec<f64> {
        self.B_mT.iter().map(|b| b * 1e-3).collect()
    }

    pub fn temperature(&self) -> Result<f64> {
        if !(self.T_mK > 0.0) {
            return Err(Error::config("spectrum.T_mK", "temperature must be > 0"));
        }
        Ok(self.T_mK * 1e-3)
    }

    pub fn window(&self) -> Result<FrequencyWindow> {
        FrequencyWindow::new(self.f_min_GHz * GHZ, self.f_max_GHz * GHZ)
            .map_err(|e| Error::config("spectrum.f_min_GHz", e.to_string()))
    }

    pub fn lineshape(&self) -> Result<(Lineshape, f64)> {
        let shape = self
            .lineshape
            .parse()
            .map_err(|e: String| Error::config("spectrum.lineshape", e))?;
        if !(self.fwhm_MHz > 0.0) {
            return Err(Error::config("spectrum.fwhm_MHz", "line width must be > 0"));
        }
        Ok((shape, self.fwhm_MHz * MHZ))
    }
}

impl MagnetizationSection {
    pub fn law(&self) -> Result<MagnetizationLaw> {
        match self.law.to_ascii_lowercase().as_str() {
            "linear" => Ok(MagnetizationLaw::Linear),
            "tanh" => Ok(MagnetizationLaw::Tanh),
            other => Err(Error::config(
                "magnetization.law",
                format!("unknown law `{other}` (expected linear or tanh)"),
            )),
        }
    }

    pub fn model(&self, g_eff: f64) -> Result<MagnetizationModel> {
        MagnetizationModel::new(self.Phi_s_Phi0, g_eff)
            .map_err(|e| Error::config("magnetization.Phi_s_Phi0", e.to_string()))
    }
}

impl QubitSection {
    pub fn build(&self) -> Result<QubitParams> {
        let need = |v: Option<f64>, k: &str| {
            v.ok_or_else(|| Error::config(format!("qubit.{k}"), "missing parameter"))
        };
        let delta = need(self.Delta_GHz, "Delta_GHz")?;
        let ip = need(self.Ip_nA, "Ip_nA")?;
        let gamma = need(self.gamma_q_MHz, "gamma_q_MHz")?;
        let v = need(self.V, "V")?;
        QubitParams::new(
            delta * GHZ,
            ip * 1e-9,
            self.Phi_off_mPhi0 * 1e-3,
            gamma * MHZ,
            v,
            self.P_base,
        )
        .map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                let key = match name {
                    "Delta" => "Delta_GHz",
                    "Ip" => "Ip_nA",
                    "gamma_q" => "gamma_q_MHz",
                    "Phi_off" => "Phi_off_mPhi0",
                    other => other,
                };
                Error::config(format!("qubit.{key}"), reason)
            }
            other => other,
        })
    }

    /// Absolute bias flux in Φ₀.
    pub fn bias(&self, q: &QubitParams) -> f64 {
        match self.bias_detuning_mPhi0 {
            Some(d) => q.phi_off + 0.5 + d * 1e-3,
            None => q.default_bias(),
        }
    }
}

impl SensitivitySection {
    pub fn dp_sw(&self) -> Result<f64> {
        match (self.dP_sw, self.sigma_P) {
            (Some(d), None) => Ok(d),
            (None, Some(s)) => Ok(2.0 * s),
            (Some(_), Some(_)) => Err(Error::config(
                "sensitivity.dP_sw",
                "give either dP_sw or sigma_P, not both",
            )),
            (None, None) => Err(Error::config("sensitivity.dP_sw", "missing parameter")),
        }
    }

    pub fn spins_per_flux(&self) -> Result<f64> {
        if let Some(d) = self.dN_dPhi_per_Phi0 {
            return Ok(d);
        }
        let n = self
            .N_spins
            .ok_or_else(|| Error::config("sensitivity.N_spins", "missing parameter"))?;
        let phi = self
            .Phi_s_Phi0
            .ok_or_else(|| Error::config("sensitivity.Phi_s_Phi0", "missing parameter"))?;
        if !(phi > 0.0) {
            return Err(Error::config("sensitivity.Phi_s_Phi0", "must be > 0"));
        }
        Ok(n / phi)
    }
}

impl NoiseSection {
    pub fn experiment(&self) -> Result<SwitchingExperiment> {
        let base = SwitchingExperiment {
            p_mean: self.p_mean,
            flicker_a: 0.0,
            flicker_alpha: self.alpha,
            repetition_time: self.repetition_time_us * 1e-6,
            hold: self.hold,
            estimates: self.estimates,
        };
        base.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                let key = match name {
                    "flicker_alpha" => "alpha",
                    "repetition_time" => "repetition_time_us",
                    other => other,
                };
                Error::config(format!("noise.{key}"), reason)
            }
            other => other,
        })?;
        let a = match (self.flicker_A_per_Hz, self.floor_target) {
            (Some(a), _) => {
                if !(a >= 0.0) {
                    return Err(Error::config("noise.flicker_A_per_Hz", "must be >= 0"));
                }
                a
            }
            (None, Some(target)) => {
                if !(target > 0.0) {
                    return Err(Error::config("noise.floor_target", "must be > 0"));
                }
                base.tuned_flicker_level(target, self.tune_n_rep)
            }
            (None, None) => 0.0,
        };
        Ok(SwitchingExperiment {
            flicker_a: a,
            ..base
        })
    }

    pub fn welch(&self) -> Result<WelchOptions> {
        let window: Window = self
            .window
            .parse()
            .map_err(|e: String| Error::config("noise.window", e))?;
        let detrend: Detrend = self
            .detrend
            .parse()
            .map_err(|e: String| Error::config("noise.detrend", e))?;
        Ok(WelchOptions {
            segment_length: self.segment_length,
            overlap: self.overlap,
            window,
            detrend,
        })
    }
}
