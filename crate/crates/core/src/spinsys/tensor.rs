//! Anisotropic 3×3 interaction tensors and rotations in the crystal frame
//! `(D1, D2, b)`.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn mat_vec(a: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| (0..3).map(|k| a[i][k] * v[k]).sum())
}

/// `R · T · Rᵀ`.
pub fn conjugate(rotation: &Mat3, tensor: &Mat3) -> Mat3 {
    mat_mul(&mat_mul(rotation, tensor), &transpose(rotation))
}

pub fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub fn rot_y(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

/// Active z-y-z rotation `Rz(α)·Ry(β)·Rz(γ)`.
pub fn euler_zyz(angles: [f64; 3]) -> Mat3 {
    mat_mul(
        &mat_mul(&rot_z(angles[0]), &rot_y(angles[1])),
        &rot_z(angles[2]),
    )
}

fn euler_from_rotation(r: &Mat3) -> [f64; 3] {
    let beta = r[2][2].clamp(-1.0, 1.0).acos();
    if beta.sin().abs() < 1e-12 {
        // gimbal lock: only α ± γ is defined, put everything in α
        [(-r[0][1]).atan2(r[1][1]), beta, 0.0]
    } else {
        [r[1][2].atan2(r[0][2]), beta, r[2][1].atan2(-r[2][0])]
    }
}

/// Principal values plus the z-y-z Euler angles (radians) of the principal
/// frame. For `g` the values are dimensionless; for hyperfine and quadrupole
/// tensors they are couplings divided by `h` (Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorSpec {
    pub principal_values: [f64; 3],
    pub euler_angles: [f64; 3],
}

impl TensorSpec {
    pub fn new(principal_values: [f64; 3], euler_angles: [f64; 3]) -> Self {
        Self {
            principal_values,
            euler_angles,
        }
    }

    pub fn isotropic(value: f64) -> Self {
        Self::new([value; 3], [0.0; 3])
    }

    pub fn zero() -> Self {
        Self::isotropic(0.0)
    }

    pub fn rotation(&self) -> Mat3 {
        euler_zyz(self.euler_angles)
    }

    /// Lab-frame matrix `R·diag(principal)·Rᵀ`.
    pub fn matrix(&self) -> Mat3 {
        rotate_tensor(self)
    }

    /// Decomposes a symmetric matrix into principal values and a proper
    /// rotation. Fails on asymmetric input.
    pub fn from_symmetric(m: &Mat3) -> Result<Self> {
        let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..3 {
            for j in (i + 1)..3 {
                if (m[i][j] - m[j][i]).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::invalid(
                        "tensor",
                        format!("matrix is not symmetric at ({i}, {j})"),
                    ));
                }
            }
        }
        let nm = Matrix3::from_fn(|i, j| m[i][j]);
        let eig = SymmetricEigen::new(nm);
        let mut r: Mat3 = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = eig.eigenvectors[(i, j)];
            }
        }
        if eig.eigenvectors.determinant() < 0.0 {
            for row in r.iter_mut() {
                row[2] = -row[2];
            }
        }
        let values = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        Ok(Self::new(values, euler_from_rotation(&r)))
    }
}

/// `R·diag(principal_values)·Rᵀ` with `R` from the z-y-z Euler angles.
pub fn rotate_tensor(spec: &TensorSpec) -> Mat3 {
    let p = spec.principal_values;
    let d = [[p[0], 0.0, 0.0], [0.0, p[1], 0.0], [0.0, 0.0, p[2]]];
    conjugate(&spec.rotation(), &d)
}

/// A proper rotation about an axis, e.g. the C₂ operation relating two
/// magnetically inequivalent subclasses of a site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRotation {
    axis: [f64; 3],
    angle: f64,
}

impl AxisRotation {
    pub fn new(axis: [f64; 3], angle: f64) -> Result<Self> {
        let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid(
                "subclass_axis",
                "rotation axis must be non-zero",
            ));
        }
        Ok(Self {
            axis: axis.map(|v| v / norm),
            angle,
        })
    }

    /// Two-fold rotation about `axis`.
    pub fn c2(axis: [f64; 3]) -> Result<Self> {
        Self::new(axis, std::f64::consts::PI)
    }

    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Rodrigues rotation matrix.
    pub fn matrix(&self) -> Mat3 {
        let [x, y, z] = self.axis;
        let (s, c) = self.angle.sin_cos();
        let t = 1.0 - c;
        [
            [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
            [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
            [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
        ]
    }
}

/// Conjugates a lab-frame tensor by the subclass rotation.
pub fn apply_subclass(tensor: &Mat3, rotation: &AxisRotation) -> Mat3 {
    conjugate(&rotation.matrix(), tensor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: &Mat3, b: &Mat3, tol: f64) -> bool {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .all(|(x, y)| (x - y).abs() <= tol)
    }

    fn sym_eigenvalues(m: &Mat3) -> [f64; 3] {
        let e = SymmetricEigen::new(Matrix3::from_fn(|i, j| m[i][j])).eigenvalues;
        let mut v = [e[0], e[1], e[2]];
        v.sort_by(f64::total_cmp);
        v
    }

    fn det(m: &Mat3) -> f64 {
        Matrix3::from_fn(|i, j| m[i][j]).determinant()
    }

    #[test]
    fn identity_euler_keeps_diagonal() {
        let m = rotate_tensor(&TensorSpec::new([1.0, 2.0, 3.0], [0.0; 3]));
        assert!(close(
            &m,
            &[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]],
            0.0
        ));
    }

    #[test]
    fn quarter_turn_about_z_permutes_axes() {
        let m = rotate_tensor(&TensorSpec::new([1.0, 2.0, 3.0], [FRAC_PI_2, 0.0, 0.0]));
        // explicit product with Rz(π/2) = [[0,-1,0],[1,0,0],[0,0,1]]
        let r = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let d = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]];
        let mut oracle = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        oracle[i][j] += r[i][k] * d[k][l] * r[j][l];
                    }
                }
            }
        }
        assert!(close(&m, &oracle, 1e-15));
        assert!(close(
            &m,
            &[[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 3.0]],
            1e-15
        ));
    }

    #[test]
    fn isotropic_tensor_is_rotation_invariant() {
        let iso = [[4.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 4.0]];
        let rot = AxisRotation::new([1.0, 2.0, -0.5], 0.77).unwrap();
        assert!(close(&apply_subclass(&iso, &rot), &iso, 1e-14));
    }

    #[test]
    fn c2_about_b_flips_off_diagonal_block() {
        let t = rotate_tensor(&TensorSpec::new([1.0, 2.0, 3.0], [0.3, 0.9, -0.4]));
        let c2 = AxisRotation::c2([0.0, 0.0, 1.0]).unwrap();
        let out = apply_subclass(&t, &c2);
        // conjugation by diag(-1, -1, 1)
        let oracle = [
            [t[0][0], t[0][1], -t[0][2]],
            [t[1][0], t[1][1], -t[1][2]],
            [-t[2][0], -t[2][1], t[2][2]],
        ];
        assert!(close(&out, &oracle, 1e-14));
        assert!(close(&apply_subclass(&out, &c2), &t, 1e-12));
    }

    #[test]
    fn zero_axis_rejected() {
        assert!(AxisRotation::new([0.0; 3], PI).is_err());
    }

    #[test]
    fn symmetric_round_trip() {
        let spec = TensorSpec::new([3.0, -1.0, 7.5], [1.1, 0.6, -2.0]);
        let m = spec.matrix();
        let back = TensorSpec::from_symmetric(&m).unwrap();
        assert!(close(&back.matrix(), &m, 1e-12));
    }

    #[test]
    fn gimbal_lock_round_trip() {
        for beta in [0.0, PI] {
            let m = TensorSpec::new([1.0, 2.0, 3.0], [0.4, beta, 0.3]).matrix();
            let back = TensorSpec::from_symmetric(&m).unwrap();
            assert!(close(&back.matrix(), &m, 1e-12));
        }
    }

    proptest! {
        #[test]
        fn rotation_is_proper_and_preserves_spectrum(a in -PI..PI, b in 0.0..PI, c in -PI..PI) {
            let r = euler_zyz([a, b, c]);
            prop_assert!(close(&mat_mul(&r, &transpose(&r)), &IDENTITY, 1e-12));
            prop_assert!((det(&r) - 1.0).abs() < 1e-12);
            let ev = sym_eigenvalues(&rotate_tensor(&TensorSpec::new([1.0, 2.0, 3.0], [a, b, c])));
            for (e, t) in ev.iter().zip([1.0, 2.0, 3.0]) {
                prop_assert!((e - t).abs() < 1e-12);
            }
        }

        #[test]
        fn c2_is_an_involution(x in -1.0..1.0f64, y in -1.0..1.0f64, z in 0.1..1.0f64, a in -PI..PI, b in 0.0..PI) {
            let t = rotate_tensor(&TensorSpec::new([0.5, -2.0, 9.0], [a, b, 0.2]));
            let c2 = AxisRotation::c2([x, y, z]).unwrap();
            prop_assert!(close(&apply_subclass(&apply_subclass(&t, &c2), &c2), &t, 1e-12));
        }
    }
}
