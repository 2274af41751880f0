use fqesr_core::numerics::{eigensolve, HermitianMatrix};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let mut e = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        e[i * n + i] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in (i + 1)..n {
            let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            e[i * n + j] = v;
            e[j * n + i] = v.conj();
        }
    }
    HermitianMatrix::new(n, e).unwrap()
}

#[test]
fn matches_reference_eigenvalues_and_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..300 {
        let n = rng.gen_range(2..=32);
        let h = random_hermitian(n, &mut rng);
        let norm = h.frobenius_norm();
        let es = eigensolve(&h).unwrap();
        assert!(es.max_residual(&h) <= 1e-10 * norm);
        assert!(es.reconstruction_error(&h) <= 1e-10 * norm);
        assert!(es.orthonormality_error() <= 1e-10);

        let m = DMatrix::from_fn(n, n, |i, j| h.get(i, j));
        let mut reference: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (a, b) in es.values.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-10 * norm, "n = {n}: {a} vs {b}");
        }
    }
}

#[test]
fn degenerate_spectrum_keeps_orthonormal_vectors() {
    // 4-fold degenerate block plus a separate level, rotated by a random unitary
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 5;
    let raw = random_hermitian(n, &mut rng);
    let basis = eigensolve(&raw).unwrap().vectors;
    let h = HermitianMatrix::from_real_diagonal(&[1.0, 1.0, 1.0, 1.0, -2.0]).unitary_similarity(&basis);
    let es = eigensolve(&h).unwrap();
    assert!(es.orthonormality_error() < 1e-12);
    assert!(es.max_residual(&h) < 1e-12);
    assert!((es.values[0] + 2.0).abs() < 1e-12);
    assert!(es.values[1..].iter().all(|v| (v - 1.0).abs() < 1e-12));
}
