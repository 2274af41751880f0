use std::path::Path;
use std::process::{Command as Process, Output};

use fqesr_cli::{
    cmd_esr_sim, cmd_magnetization, cmd_noise, cmd_sensitivity, cmd_spectrum, round_trip, sig3,
};
use fqesr_core::config::RunConfig;
use fqesr_core::io;
use fqesr_core::magnetization::{magnetization_flux_linear, MagnetizationModel};

const QUBIT: &str = "[qubit]\nDelta_GHz = 5.0\nIp_nA = 330.0\ngamma_q_MHz = 32.0\nV = 0.23\n";
const SENS: &str = "[sensitivity]\ndP_sw = 0.01\nN_spins = 6e6\nPhi_s_Phi0 = 0.29\n";

fn cfg(text: &str) -> RunConfig {
    RunConfig::from_toml(text).unwrap()
}

fn fqesr(args: &[&str], config: &Path, out: &Path, env: &[(&str, &str)]) -> Output {
    let mut p = Process::new(env!("CARGO_BIN_EXE_fqesr"));
    p.args(args).arg("--config").arg(config).arg("--out").arg(out);
    for (k, v) in env {
        p.env(k, v);
    }
    p.output().unwrap()
}

fn n_min(report: &str) -> f64 {
    report
        .strip_prefix("N_min = ")
        .and_then(|r| r.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn sig3_rounding() {
    assert_eq!(sig3(21.517), "21.5");
    assert_eq!(sig3(0.01), "0.0100");
    assert_eq!(sig3(1234.0), "1234");
    assert_eq!(sig3(0.0), "0");
    assert_eq!(sig3(2.07e7), "2.07e7");
}

#[test]
fn sensitivity_scaling_and_errors() {
    let base = cmd_sensitivity(&cfg(&format!("{QUBIT}{SENS}"))).unwrap();
    assert_eq!(n_min(&base.report), 21.5);
    let zero = cmd_sensitivity(&cfg(&format!(
        "{QUBIT}[sensitivity]\ndP_sw = 0.0\nN_spins = 6e6\nPhi_s_Phi0 = 0.29\n"
    )))
    .unwrap();
    assert_eq!(n_min(&zero.report), 0.0);
    let doubled = cmd_sensitivity(&cfg(&format!(
        "{}{SENS}",
        QUBIT.replace("V = 0.23", "V = 0.46")
    )))
    .unwrap();
    let csv = |o: &fqesr_cli::Outcome| -> f64 {
        let row = o.file("sensitivity.csv").unwrap().lines().nth(1).unwrap().to_string();
        row.split(',').nth(4).unwrap().parse().unwrap()
    };
    assert!((csv(&doubled) * 2.0 - csv(&base)).abs() < 1e-12);
    let lineshape: f64 = base
        .file("sensitivity.csv")
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(5)
        .unwrap()
        .parse()
        .unwrap();
    assert!((lineshape * 2.0 - csv(&base)).abs() < 1e-9);

    let err = cmd_sensitivity(&cfg(&format!(
        "{QUBIT}[sensitivity]\ndP_sw = 0.01\nN_spins = 6e6\n"
    )))
    .unwrap_err();
    assert!(format!("{err:#}").contains("sensitivity.Phi_s_Phi0"), "{err:#}");
    let err = cmd_sensitivity(&cfg(&format!(
        "{}{SENS}",
        QUBIT.replace("gamma_q_MHz = 32.0\n", "")
    )))
    .unwrap_err();
    assert!(format!("{err:#}").contains("qubit.gamma_q_MHz"), "{err:#}");
}

#[test]
fn spectrum_errors_name_keys() {
    let err = cmd_spectrum(&cfg(
        "[crystal]\nfixture = \"er168\"\n[spectrum]\nB_mT = 1\nT_mK = 50\nf_min_GHz = 0\nf_max_GHz = 1\n",
    ))
    .unwrap_err();
    assert!(format!("{err:#}").contains("crystal.fixture"), "{err:#}");
    let err = cmd_spectrum(&cfg(
        "[crystal]\n[spectrum]\nB_mT = 1\nT_mK = 50\nf_min_GHz = 0\nf_max_GHz = 1\n",
    ))
    .unwrap_err();
    assert!(format!("{err:#}").contains("crystal.site"), "{err:#}");
    let err = cmd_spectrum(&cfg("[crystal]\nfixture = \"spin_half_g2\"\n")).unwrap_err();
    assert!(format!("{err:#}").contains("`spectrum`"), "{err:#}");
}

#[test]
fn spectrum_field_list_writes_one_table_per_field() {
    let out = cmd_spectrum(&cfg(
        "[output]\nplots = true\n[crystal]\nfixture = \"spin_half_g2\"\n[spectrum]\nB_mT = [1.0, 2.0]\nT_mK = 50\nf_min_GHz = 0\nf_max_GHz = 0.1\npoints = 11\n",
    ))
    .unwrap();
    let names: Vec<&str> = out.files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "spectrum_0.csv",
            "transitions_0.csv",
            "spectrum_1.csv",
            "transitions_1.csv",
            "spectrum.gp"
        ]
    );
    let f = |name: &str| -> f64 {
        out.file(name).unwrap().lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap()
    };
    assert!((f("transitions_1.csv") / f("transitions_0.csv") - 2.0).abs() < 1e-12);
    for (_, text) in out.files.iter().filter(|(n, _)| n.ends_with(".csv")) {
        assert!(text.lines().next().unwrap().contains("f_Hz"));
    }
}

#[test]
fn er_fixture_spans_the_low_gigahertz_band() {
    let text = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/er167_spectrum.toml"),
    )
    .unwrap();
    let out = cmd_spectrum(&cfg(&text)).unwrap();
    assert!(out.report.contains("transcribe before quantitative use"));
    let table = out.file("transitions.csv").unwrap();
    for site in ["site1", "site2"] {
        let in_band = table
            .lines()
            .skip(1)
            .filter(|l| l.ends_with(&format!(",{site}")))
            .filter(|l| {
                let f: f64 = l.split(',').next().unwrap().parse().unwrap();
                (1e9..=5e9).contains(&f)
            })
            .count();
        assert!(in_band >= 10, "{site}: {in_band}");
    }
}

#[test]
fn single_point_magnetization_matches_closed_form() {
    let out = cmd_magnetization(&cfg(
        "[magnetization]\nPhi_s_Phi0 = 0.29\ng_eff = 5.2\nB_par_mT = 2.0\nT_mK = 80.0\n",
    ))
    .unwrap();
    let table = out.file("magnetization_flux.csv").unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "B_par_mT,T_mK,Phi_m_Phi0");
    assert_eq!(rows.len(), 2);
    let phi: f64 = rows[1].split(',').nth(2).unwrap().parse().unwrap();
    let model = MagnetizationModel::new(0.29, 5.2).unwrap();
    assert_eq!(phi, magnetization_flux_linear(&model, 2e-3, 0.08).unwrap());
    assert!(out.report.contains("regression skipped"));
    assert!(out.file("polarization.csv").is_none());
}

#[test]
fn magnetization_reports_phi_s_and_rejects_bad_temperatures() {
    let out = cmd_magnetization(&cfg("[magnetization]\nPhi_s_Phi0 = 0.29\ng_eff = 5.2\n")).unwrap();
    assert!(out.report.contains("Phi_s = slope / g_eff = 0.2900 Phi0"), "{}", out.report);
    assert!(out.report.contains("slope = 1.5080"));

    let err = cmd_magnetization(&cfg(
        "[magnetization]\ng_eff = 5.2\nT_mK = [50.0, -10.0]\n",
    ))
    .unwrap_err();
    assert!(format!("{err:#}").contains("magnetization.T_mK[1]"), "{err:#}");

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("offsets.csv");
    std::fs::write(&csv, "B_par_mT,T_mK,Phi_off_mPhi0\n0,50,1\n1,0,2\n").unwrap();
    let text = format!(
        "[magnetization]\ng_eff = 5.2\ninput_csv = \"{}\"\n",
        csv.display()
    );
    let err = cmd_magnetization(&cfg(&text)).unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("line 3") && msg.contains("magnetization.input_csv"), "{msg}");
}

#[test]
fn magnetization_reads_measured_tables() {
    let synth = cmd_magnetization(&cfg(
        "[magnetization]\nPhi_s_Phi0 = 0.29\ng_eff = 5.2\nB_par_mT = [0, 1, 2, 5]\nT_mK = [50, 100, 200]\n",
    ))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("offsets.csv");
    std::fs::write(&csv, synth.file("flux_offsets.csv").unwrap()).unwrap();
    let text = format!(
        "[magnetization]\nPhi_s_Phi0 = 0.29\ng_eff = 5.2\ninput_csv = \"{}\"\n",
        csv.display()
    );
    let measured = cmd_magnetization(&cfg(&text)).unwrap();
    let values = |o: &fqesr_cli::Outcome| -> Vec<f64> {
        o.file("polarization.csv")
            .unwrap()
            .lines()
            .skip(1)
            .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
            .collect()
    };
    let (a, b) = (values(&measured), values(&synth));
    assert_eq!(a.len(), 30);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{x} {y}");
    }
}

#[test]
fn magnetization_derives_g_from_crystal() {
    let out = cmd_magnetization(&cfg(
        "[crystal]\nfixture = \"spin_half_g2\"\n[magnetization]\nPhi_s_Phi0 = 0.1\nB_dir = [1, 0, 0]\n",
    ))
    .unwrap();
    assert!(out.report.contains("g_eff = 2.00 (from [crystal]"), "{}", out.report);
    let err = cmd_magnetization(&cfg(
        "[crystal]\nfixture = \"spin_half_g2\"\n[magnetization]\nB_dir = [0, 1, 0]\nsense_axis = [1, 0, 0]\n",
    ))
    .unwrap_err();
    assert!(format!("{err:#}").contains("magnetization.sense_axis"), "{err:#}");
    let err = cmd_magnetization(&cfg("[magnetization]\n")).unwrap_err();
    assert!(format!("{err:#}").contains("magnetization.g_eff"), "{err:#}");
}

const ESR: &str = "[esr_sim]\nlines_GHz = [2.0, 3.2]\nintensities = [1.0, 0.6]\nf_min_GHz = 1.5\nf_max_GHz = 3.7\npoints = 221\nmax_flux_mPhi0 = 0.02\n";

#[test]
fn esr_round_trip_and_flagging() {
    let out = cmd_esr_sim(&cfg(&format!("{QUBIT}{ESR}corrupt_rows = [40]\n"))).unwrap();
    assert!(out.report.contains("flagged rows (no resolvable qubit peak, interpolated): 40"));
    let input = io::read_trace(out.file("esr_input.csv").unwrap()).unwrap();
    let extracted = io::read_trace(out.file("esr_extracted.csv").unwrap()).unwrap();
    let rt = round_trip(&input, &extracted);
    let step = input.frequencies[1] - input.frequencies[0];
    assert_eq!(rt.output.len(), 2);
    assert!(rt.max_offset.unwrap() <= step);
    let scan = io::read_scan(out.file("esr_scan.csv").unwrap()).unwrap();
    assert_eq!(scan.p_sw.len(), 221);
    assert!(scan.p_sw[40].iter().all(|&p| p == 0.2));
}

#[test]
fn esr_zero_coupling_is_flat() {
    let text = format!("{QUBIT}{ESR}").replace("max_flux_mPhi0 = 0.02", "max_flux_mPhi0 = 0.0");
    let out = cmd_esr_sim(&cfg(&text)).unwrap();
    assert!(out.report.contains("zero coupling"));
    let extracted = io::read_trace(out.file("esr_extracted.csv").unwrap()).unwrap();
    assert!(extracted.amplitudes.iter().all(|a| a.abs() < 1e-12));
}

#[test]
fn esr_refuses_degeneracy_and_bad_rows() {
    let text = format!("{QUBIT}bias_detuning_mPhi0 = 0.0\n{ESR}");
    let err = cmd_esr_sim(&cfg(&text)).unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("degeneracy") && msg.contains("qubit.bias_detuning_mPhi0"), "{msg}");
    let err = cmd_esr_sim(&cfg(&format!("{QUBIT}{ESR}corrupt_rows = [500]\n"))).unwrap_err();
    assert!(format!("{err:#}").contains("esr_sim.corrupt_rows"));
    let err = cmd_esr_sim(&cfg(&format!("{QUBIT}{ESR}").replace("[1.0, 0.6]", "[1.0]")))
        .unwrap_err();
    assert!(format!("{err:#}").contains("esr_sim.intensities"));
}

const SMALL_NOISE: &str = "[noise]\nn_rep = [100, 300, 1000, 3000, 10000]\nestimates = 200\npsd_n_rep = 1000\npsd_samples = 8192\nfit_f_max_Hz = 5.0\n";

#[test]
fn constant_probability_reports_no_floor() {
    let out = cmd_noise(&cfg(&format!("seed = 4\n{SMALL_NOISE}"))).unwrap();
    assert!(out.report.contains("floor: none detected"), "{}", out.report);
    assert!(out.report.contains("flicker: none"));
    let sigma = out.file("sigma_vs_nrep.csv").unwrap();
    assert!(sigma.starts_with("n_rep,sigma_P,binomial_sigma_P\n"));
    assert_eq!(sigma.lines().count(), 6);
    assert!(out.file("psd.csv").unwrap().starts_with("f_Hz,S\n"));
    assert!(out.file("psd_series.csv").unwrap().starts_with("t_s,value\n"));
}

#[test]
fn flicker_fit_is_stable_across_seeds() {
    let alpha = |seed: u64| -> f64 {
        let text = format!(
            "seed = {seed}\n{SMALL_NOISE}flicker_A_per_Hz = 1e-4\n"
        )
        .replace("fit_f_max_Hz = 5.0", "fit_f_max_Hz = 1.0");
        let out = cmd_noise(&cfg(&text)).unwrap();
        assert!(out.report.contains("floor: "));
        let line = out.report.lines().find(|l| l.starts_with("flicker fit")).unwrap();
        let (_, rest) = line.split_once("alpha = ").unwrap();
        rest.split_whitespace().next().unwrap().parse().unwrap()
    };
    let (a, b) = (alpha(1), alpha(2));
    assert!((a - 0.93).abs() < 0.1 && (b - 0.93).abs() < 0.1, "{a} {b}");
    assert!((a - b).abs() < 0.1, "{a} {b}");
}

#[test]
fn noise_reports_flux_level_from_slope() {
    let text = format!("seed = 1\n{SMALL_NOISE}flicker_A_per_Hz = 1e-4\ndPhi_dPsw_Phi0 = 5e-5\n");
    let out = cmd_noise(&cfg(&text)).unwrap();
    assert!(out.report.contains("dPhi/dP_sw = 5.00e-5 Phi0 (configured)"), "{}", out.report);
}

#[test]
fn noise_rejects_bad_exponent() {
    let err = cmd_noise(&cfg("[noise]\nalpha = 2.0\n")).unwrap_err();
    assert!(format!("{err:#}").contains("noise.alpha"), "{err:#}");
    let err = cmd_noise(&cfg("[noise]\nseeds = 0\n")).unwrap_err();
    assert!(format!("{err:#}").contains("noise.seeds"));
}

#[test]
fn binary_exit_codes_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("sens.toml");
    std::fs::write(&good, format!("{QUBIT}{SENS}")).unwrap();
    let out = fqesr(&["sensitivity"], &good, &dir.path().join("a"), &[]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("N_min = 21.5 spins"));
    assert!(dir.path().join("a/sensitivity.csv").exists());
    assert!(dir.path().join("a/sensitivity_report.txt").exists());

    let out = fqesr(
        &["sensitivity"],
        &good,
        &dir.path().join("b"),
        &[("FQESR_QUBIT__V", "0.46")],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("N_min = 10.8 spins"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FQESR_QUBIT__V"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "[crystal]\nfixture = \"nope\"\n[spectrum]\nB_mT = 1\nT_mK = 50\nf_min_GHz = 0\nf_max_GHz = 1\n",
    )
    .unwrap();
    let out = fqesr(&["spectrum"], &bad, &dir.path().join("c"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("crystal.fixture"));

    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, format!("{QUBIT}{SENS}N_spin = 4\n")).unwrap();
    let out = fqesr(&["sensitivity"], &typo, &dir.path().join("d"), &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("N_spin"));

    let out = Process::new(env!("CARGO_BIN_EXE_fqesr"))
        .arg("noise")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.toml");
    std::fs::write(
        &path,
        "seed = 1\n[magnetization]\ng_eff = 5.2\nnoise_mPhi0 = 1.0\nB_par_mT = [0, 1]\nT_mK = [50, 100]\n",
    )
    .unwrap();
    let read = |sub: &str| std::fs::read(dir.path().join(sub).join("flux_offsets.csv")).unwrap();
    fqesr(&["magnetization"], &path, &dir.path().join("s1"), &[]);
    fqesr(&["magnetization", "--seed", "1"], &path, &dir.path().join("s1b"), &[]);
    fqesr(&["magnetization", "--seed", "2"], &path, &dir.path().join("s2"), &[]);
    assert_eq!(read("s1"), read("s1b"));
    assert_ne!(read("s1"), read("s2"));
}
