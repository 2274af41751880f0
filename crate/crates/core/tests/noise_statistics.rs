use fqesr_core::noise::*;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

#[test]
fn constant_probability_is_binomial() {
    let (p, n_rep, m) = (0.5, 100, 10_000);
    let series = HeldSeries::constant(p, n_rep * m).unwrap();
    let est = simulate_switching(&series, n_rep, 99);
    let mut counts = vec![0usize; n_rep + 1];
    for e in &est {
        counts[(e * n_rep as f64).round() as usize] += 1;
    }
    let law = Binomial::new(p, n_rep as u64).unwrap();
    // pool tails until every cell expects at least 5 counts
    let expected: Vec<f64> = (0..=n_rep).map(|k| law.pmf(k as u64) * m as f64).collect();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for k in 0..=n_rep {
        o += counts[k] as f64;
        e += expected[k];
        if e >= 5.0 && expected[k..].iter().sum::<f64>() - expected[k] >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += o;
        last.1 += e;
    }
    let chi2: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() - 1) as f64;
    let critical = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical} with {dof} dof");
}

#[test]
fn constant_probability_curve_follows_binomial() {
    let series = HeldSeries::constant(0.3, 2_000 * 400).unwrap();
    let curve = sigma_vs_nrep(&series, &[10, 100, 1000, 2000], 400, 4).unwrap();
    for p in &curve.points {
        // σ of a 400-sample standard deviation is about 3.5 %
        assert!((p.sigma / p.binomial - 1.0).abs() < 0.12, "{p:?}");
    }
    assert_eq!(curve.detected_floor(), None);
}

fn ensemble(exp: &SwitchingExperiment, n_reps: &[usize], seeds: u64) -> Vec<f64> {
    let mut acc = vec![0.0; n_reps.len()];
    for seed in 0..seeds {
        let c = exp.run(n_reps, seed).unwrap();
        for (a, p) in acc.iter_mut().zip(&c.points) {
            *a += p.sigma * p.sigma / seeds as f64;
        }
    }
    acc.into_iter().map(f64::sqrt).collect()
}

#[test]
fn flicker_curve_decreases_then_flattens() {
    let base = SwitchingExperiment {
        estimates: 100,
        ..Default::default()
    };
    let exp = SwitchingExperiment {
        flicker_a: base.tuned_flicker_level(5e-3, 5000),
        ..base
    };
    let n_reps = [100, 300, 1000, 3000, 10_000, 30_000, 100_000, 300_000];
    let sigma = ensemble(&exp, &n_reps, 6);
    for w in sigma.windows(2) {
        // non-increasing up to sampling error
        assert!(w[1] <= w[0] * 1.1, "{sigma:?}");
    }
    // beyond the crossing (binomial = floor near n_rep = 10⁴) the excess over
    // binomial is the flicker floor, which drifts only slowly for α near 1
    let excess: Vec<f64> = n_reps[5..]
        .iter()
        .zip(&sigma[5..])
        .map(|(&n, s)| (s * s - binomial_sigma(0.5, n).powi(2)).sqrt())
        .collect();
    for (&n, e) in n_reps[5..].iter().zip(&excess) {
        let predicted = exp.expected_flicker_variance(n).sqrt();
        assert!((e / predicted - 1.0).abs() < 0.2, "n_rep {n}: {e} vs {predicted}");
    }
    let spread = excess.iter().cloned().fold(0.0, f64::max)
        / excess.iter().cloned().fold(1.0, f64::min);
    assert!(spread < 1.2, "{excess:?}");
}

#[test]
fn floor_scales_linearly_with_flicker_amplitude() {
    let base = SwitchingExperiment {
        estimates: 100,
        ..Default::default()
    };
    let a = base.tuned_flicker_level(5e-3, 5000);
    let n_reps = [100_000, 200_000, 400_000];
    let floor = |scale: f64| {
        // scale multiplies the series amplitude, so the PSD level by scale²
        let exp = SwitchingExperiment {
            flicker_a: a * scale * scale,
            ..base
        };
        let s = ensemble(&exp, &n_reps, 10);
        let mut s = s.clone();
        s.sort_by(f64::total_cmp);
        s[1]
    };
    let (f1, f2) = (floor(1.0), floor(2.0));
    let slope = (f2 / f1).log2();
    assert!((slope - 1.0).abs() < 0.1, "log-log slope {slope}");
}

#[test]
fn zero_flicker_estimate_matches_binomial_limit() {
    let exp = SwitchingExperiment::default();
    assert_eq!(exp.expected_flicker_variance(5000), 0.0);
    let c = exp.run(&[100, 1000], 3).unwrap();
    for p in &c.points {
        assert!((p.sigma / p.binomial - 1.0).abs() < 0.15);
    }
}
