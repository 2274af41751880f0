//! Spin Hamiltonian on the `|m_S⟩ ⊗ |m_I⟩` product basis:
//!
//! `H = μB B·g·S + h I·A·S + h I·Q·I − μN gN B·I`
//!
//! Spin operators are dimensionless (ℏ = 1); couplings carry energy units.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::tensor::{conjugate, mat_mul, AxisRotation, Mat3, TensorSpec, IDENTITY};
use crate::constants::{BOHR_MAGNETON, NUCLEAR_MAGNETON, PLANCK};
use crate::error::{Error, Result};
use crate::numerics::HermitianMatrix;

pub const MAX_HILBERT_DIM: usize = 64;

/// Spin quantum number stored as `2s` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Spin(u32);

impl Spin {
    pub const ZERO: Spin = Spin(0);
    pub const HALF: Spin = Spin(1);

    pub fn from_twice(twice: u32) -> Self {
        Spin(twice)
    }

    /// Accepts integer or half-integer values only.
    pub fn new(value: f64) -> Result<Self> {
        let twice = 2.0 * value;
        if !(value >= 0.0) || (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::invalid(
                "spin",
                format!("{value} is not a non-negative integer or half-integer"),
            ));
        }
        Ok(Spin(twice.round() as u32))
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn multiplicity(self) -> usize {
        self.0 as usize + 1
    }
}

/// `(Sx, Sy, Sz)` for spin `s` in the basis `m = s, s−1, …, −s`.
pub fn spin_matrices(spin: Spin) -> [DMatrix<Complex64>; 3] {
    let d = spin.multiplicity();
    let s = spin.value();
    let m = |k: usize| s - k as f64;
    let mut sp = DMatrix::<Complex64>::zeros(d, d);
    for k in 1..d {
        // S+ |m⟩ = √(s(s+1) − m(m+1)) |m+1⟩; |m+1⟩ sits at index k−1
        let mk = m(k);
        sp[(k - 1, k)] = Complex64::new((s * (s + 1.0) - mk * (mk + 1.0)).sqrt(), 0.0);
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm) * Complex64::new(0.5, 0.0);
    let sy = (&sp - &sm) * Complex64::new(0.0, -0.5);
    let sz = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::new(m(i), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    [sx, sy, sz]
}

/// One magnetically distinct spin species: electron spin `S`, nuclear spin
/// `I`, and the interaction tensors. `frame` is an extra rotation applied
/// to all tensors (identity for the reference subclass).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    pub label: String,
    pub electron_spin: Spin,
    pub nuclear_spin: Spin,
    pub g: TensorSpec,
    /// Hyperfine tensor, Hz.
    pub hyperfine: TensorSpec,
    /// Quadrupole tensor, Hz.
    pub quadrupole: TensorSpec,
    pub nuclear_g: f64,
    pub frame: Mat3,
}

impl SpinSystem {
    /// Isotropic-g electron spin without a nucleus.
    pub fn electron(label: impl Into<String>, s: Spin, g: f64) -> Self {
        Self {
            label: label.into(),
            electron_spin: s,
            nuclear_spin: Spin::ZERO,
            g: TensorSpec::isotropic(g),
            hyperfine: TensorSpec::zero(),
            quadrupole: TensorSpec::zero(),
            nuclear_g: 0.0,
            frame: IDENTITY,
        }
    }

    pub fn hilbert_dim(&self) -> usize {
        self.electron_spin.multiplicity() * self.nuclear_spin.multiplicity()
    }

    pub fn g_matrix(&self) -> Mat3 {
        self.in_frame(self.g.matrix())
    }

    pub fn hyperfine_matrix(&self) -> Mat3 {
        self.in_frame(self.hyperfine.matrix())
    }

    pub fn quadrupole_matrix(&self) -> Mat3 {
        self.in_frame(self.quadrupole.matrix())
    }

    fn in_frame(&self, m: Mat3) -> Mat3 {
        conjugate(&self.frame, &m)
    }

    /// The same species seen through a symmetry operation of the crystal.
    pub fn rotated(&self, rotation: &AxisRotation, label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            frame: mat_mul(&rotation.matrix(), &self.frame),
            ..self.clone()
        }
    }

    fn check_dim(&self) -> Result<usize> {
        let dim = self.hilbert_dim();
        if dim > MAX_HILBERT_DIM {
            return Err(Error::DimensionOverflow {
                dim,
                max: MAX_HILBERT_DIM,
            });
        }
        Ok(dim)
    }
}

/// Static field: magnitude (T) and unit direction in the crystal frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldVector {
    magnitude: f64,
    direction: [f64; 3],
}

impl FieldVector {
    /// Normalizes `direction`; a zero direction is only accepted for a
    /// zero magnitude.
    pub fn new(magnitude_t: f64, direction: [f64; 3]) -> Result<Self> {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !magnitude_t.is_finite() {
            return Err(Error::invalid("B", "field magnitude must be finite"));
        }
        if !(norm > 0.0) {
            if magnitude_t == 0.0 {
                return Ok(Self {
                    magnitude: 0.0,
                    direction: [0.0, 0.0, 1.0],
                });
            }
            return Err(Error::invalid(
                "direction",
                "field direction must be non-zero",
            ));
        }
        Ok(Self {
            magnitude: magnitude_t,
            direction: direction.map(|v| v / norm),
        })
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    /// Cartesian components in tesla.
    pub fn vector(&self) -> [f64; 3] {
        self.direction.map(|d| d * self.magnitude)
    }
}

/// Spin operators embedded in the product space.
pub(crate) struct ProductOperators {
    pub s: [DMatrix<Complex64>; 3],
    pub i: [DMatrix<Complex64>; 3],
}

impl ProductOperators {
    pub fn new(sys: &SpinSystem) -> Self {
        let ds = sys.electron_spin.multiplicity();
        let di = sys.nuclear_spin.multiplicity();
        let id_s = DMatrix::<Complex64>::identity(ds, ds);
        let id_i = DMatrix::<Complex64>::identity(di, di);
        let s = spin_matrices(sys.electron_spin).map(|m| m.kronecker(&id_i));
        let i = spin_matrices(sys.nuclear_spin).map(|m| id_s.kronecker(&m));
        Self { s, i }
    }
}

fn to_hermitian(m: &DMatrix<Complex64>) -> HermitianMatrix {
    HermitianMatrix::from_fn_symmetrized(m.nrows(), |i, j| m[(i, j)])
}

/// Builds the Hamiltonian in joules.
pub fn build_hamiltonian(sys: &SpinSystem, field: &FieldVector) -> Result<HermitianMatrix> {
    let dim = sys.check_dim()?;
    let ops = ProductOperators::new(sys);
    let b = field.vector();
    let g = sys.g_matrix();
    let a = sys.hyperfine_matrix();
    let q = sys.quadrupole_matrix();
    let re = |v: f64| Complex64::new(v, 0.0);

    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for x in 0..3 {
        for y in 0..3 {
            let zeeman = BOHR_MAGNETON * b[x] * g[x][y];
            if zeeman != 0.0 {
                h += &ops.s[y] * re(zeeman);
            }
            if a[x][y] != 0.0 {
                h += (&ops.i[x] * &ops.s[y]) * re(PLANCK * a[x][y]);
            }
            if q[x][y] != 0.0 {
                h += (&ops.i[x] * &ops.i[y]) * re(PLANCK * q[x][y]);
            }
        }
        let nuclear = -NUCLEAR_MAGNETON * sys.nuclear_g * b[x];
        if nuclear != 0.0 {
            h += &ops.i[x] * re(nuclear);
        }
    }
    Ok(to_hermitian(&h))
}

/// `axis · (μB g·S − μN gN I)` in J/T. The physical magnetic moment is the
/// negative of this operator (the electron moment is antiparallel to its
/// spin).
pub fn moment_operator(sys: &SpinSystem, axis: [f64; 3]) -> Result<HermitianMatrix> {
    let dim = sys.check_dim()?;
    let ops = ProductOperators::new(sys);
    let g = sys.g_matrix();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for x in 0..3 {
        if axis[x] == 0.0 {
            continue;
        }
        for y in 0..3 {
            let c = BOHR_MAGNETON * axis[x] * g[x][y];
            if c != 0.0 {
                m += &ops.s[y] * Complex64::new(c, 0.0);
            }
        }
        m -= &ops.i[x] * Complex64::new(NUCLEAR_MAGNETON * sys.nuclear_g * axis[x], 0.0);
    }
    Ok(to_hermitian(&m))
}
