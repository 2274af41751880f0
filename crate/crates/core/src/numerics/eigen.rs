//! Dense Hermitian eigensolver (cyclic complex Jacobi).
//!
//! Each rotation first removes the phase of the pivot element with a diagonal
//! unitary and then applies an ordinary real Jacobi rotation, so the pair
//! `(p, q)` is annihilated exactly. For the matrix sizes in this crate
//! (dimension ≤ 64) cyclic Jacobi is accurate to a few ulps of ‖H‖ and needs
//! no tridiagonalization.

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const HERMITIAN_TOL: f64 = 1e-12;

/// Dense complex Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Validates Hermiticity to `1e-12` of the largest entry magnitude.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("Hermitian matrix dimension"));
        }
        if entries.len() != dim * dim {
            return Err(Error::invalid(
                "entries",
                format!(
                    "expected {} entries for dim {dim}, got {}",
                    dim * dim,
                    entries.len()
                ),
            ));
        }
        let scale = entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = HERMITIAN_TOL * scale;
        for i in 0..dim {
            for j in i..dim {
                let deviation = (entries[i * dim + j] - entries[j * dim + i].conj()).norm();
                if deviation > tol || !deviation.is_finite() {
                    return Err(Error::NotHermitian {
                        row: i,
                        col: j,
                        deviation,
                    });
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, &d) in diag.iter().enumerate() {
            m.entries[i * dim + i] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds from a closure without validation; symmetrizes by averaging
    /// `(i, j)` with `conj(j, i)` so round-off never breaks the invariant.
    pub(crate) fn from_fn_symmetrized(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = if i == j {
                    Complex64::new(f(i, i).re, 0.0)
                } else {
                    (f(i, j) + f(j, i).conj()) * 0.5
                };
                entries[i * dim + j] = v;
                entries[j * dim + i] = v.conj();
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    /// `self · v` for a column vector.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.entries[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `U† · self · U` for a unitary `U` given row-major.
    pub fn unitary_similarity(&self, u: &[Complex64]) -> Self {
        let n = self.dim;
        let mut tmp = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                tmp[i * n + j] = (0..n).map(|k| self.entries[i * n + k] * u[k * n + j]).sum();
            }
        }
        Self::from_fn_symmetrized(n, |i, j| {
            (0..n).map(|k| u[k * n + i].conj() * tmp[k * n + j]).sum()
        })
    }

    /// Entrywise `self + scale · other`.
    pub fn add_scaled(&mut self, other: &HermitianMatrix, scale: f64) {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += b * scale;
        }
    }
}

/// Eigenvalues ascending with column-stored orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// Row-major `dim × dim`; column `k` is the eigenvector of `values[k]`.
    pub vectors: Vec<Complex64>,
    dim: usize,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.dim)
            .map(|i| self.vectors[i * self.dim + k])
            .collect()
    }

    /// `⟨v_i| op |v_j⟩`.
    pub fn matrix_element(&self, op: &HermitianMatrix, i: usize, j: usize) -> Complex64 {
        let vi = self.vector(i);
        let opvj = op.apply(&self.vector(j));
        vi.iter().zip(&opvj).map(|(a, b)| a.conj() * b).sum()
    }

    /// `max_k ‖H v_k − λ_k v_k‖`.
    pub fn max_residual(&self, h: &HermitianMatrix) -> f64 {
        (0..self.dim)
            .map(|k| {
                let v = self.vector(k);
                h.apply(&v)
                    .iter()
                    .zip(&v)
                    .map(|(hv, v)| (hv - v * self.values[k]).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `‖V diag(λ) V† − H‖_F`.
    pub fn reconstruction_error(&self, h: &HermitianMatrix) -> f64 {
        let n = self.dim;
        let mut err = 0.0;
        for i in 0..n {
            for j in 0..n {
                let r: Complex64 = (0..n)
                    .map(|k| {
                        self.vectors[i * n + k] * self.values[k] * self.vectors[j * n + k].conj()
                    })
                    .sum();
                err += (r - h.get(i, j)).norm_sqr();
            }
        }
        err.sqrt()
    }

    /// `max |V†V − 1|` entrywise.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                let dot: Complex64 = (0..n)
                    .map(|i| self.vectors[i * n + a].conj() * self.vectors[i * n + b])
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }
}

fn off_diagonal_norm(a: &[Complex64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn eigensolve(h: &HermitianMatrix) -> Result<EigenSystem> {
    let n = h.dim;
    let mut a = h.entries.clone();
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = Complex64::new(1.0, 0.0);
    }

    let norm = h.frobenius_norm();
    let threshold = f64::EPSILON * norm * n as f64;
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, n);
        if off <= threshold || norm == 0.0 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let phase = apq / r;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U restricted to (p, q): [[c, s], [-s e^{-iφ}, c e^{-iφ}]]
                let ph = phase.conj();
                let u_pp = Complex64::new(c, 0.0);
                let u_pq = Complex64::new(s, 0.0);
                let u_qp = ph * (-s);
                let u_qq = ph * c;

                // A ← A U (columns p, q)
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * u_pp + akq * u_qp;
                    a[k * n + q] = akp * u_pq + akq * u_qq;
                }
                // A ← U† A (rows p, q)
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[q * n + k] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[p * n + q] = Complex64::new(0.0, 0.0);
                a[q * n + p] = Complex64::new(0.0, 0.0);
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;
                // V ← V U
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * u_pp + vkq * u_qp;
                    v[k * n + q] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].re.total_cmp(&a[y * n + y].re));
    let values = order.iter().map(|&k| a[k * n + k].re).collect();
    let mut vectors = vec![Complex64::new(0.0, 0.0); n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + new_col] = v[i * n + old_col];
        }
    }
    Ok(EigenSystem {
        values,
        vectors,
        dim: n,
    })
}
