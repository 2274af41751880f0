use fqesr_core::config::RunConfig;
use fqesr_core::magnetization::effective_g;
use fqesr_core::spinsys::{crystal_transitions, FieldVector, FrequencyWindow};

fn crystal() -> fqesr_core::spinsys::CrystalConfig {
    RunConfig::from_toml("[crystal]\nfixture = \"er167_yso\"\n")
        .unwrap()
        .crystal()
        .unwrap()
}

#[test]
fn two_sites_populate_the_low_gigahertz_band() {
    let c = crystal();
    let field = FieldVector::new(1.7e-3, [0.0, 1.0, 0.0]).unwrap();
    let lists =
        crystal_transitions(&c, &field, 0.05, [1.0, 0.0, 0.0], FrequencyWindow::all()).unwrap();
    assert_eq!(lists.len(), 2);
    for l in &lists {
        let band: Vec<f64> = l
            .entries
            .iter()
            .filter(|t| t.frequency > 1e9 && t.frequency < 5e9)
            .map(|t| t.frequency)
            .collect();
        assert!(band.len() >= 10, "{} has {} lines in band", l.label, band.len());
        let lo = band.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = band.iter().cloned().fold(0.0, f64::max);
        assert!(lo < 2e9 && hi > 4e9, "{}: {lo}..{hi}", l.label);
    }
}

#[test]
fn subclasses_cancel_along_the_twofold_axis() {
    let c = crystal();
    let along_b = effective_g(&c, [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], 0.05).unwrap();
    assert!(along_b.no_moment);
    let normal = effective_g(&c, [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], 0.05).unwrap();
    assert!(!normal.no_moment && normal.g_eff > 1.0);
}
