//! Built-in crystal fixtures in the `[crystal]` config schema.

pub const NAMES: &[&str] = &["spin_half_g2", "er167_yso"];

/// Isotropic g = 2 spin 1/2 without a nucleus.
pub const SPIN_HALF_G2: &str = include_str!("../fixtures/spin_half_g2.toml");

/// ¹⁶⁷Er:Y₂SiO₅ with placeholder tensors; see the file header before using
/// its line positions.
pub const ER167_YSO: &str = include_str!("../fixtures/er167_yso.toml");

pub fn crystal_toml(name: &str) -> Option<&'static str> {
    match name {
        "spin_half_g2" => Some(SPIN_HALF_G2),
        "er167_yso" => Some(ER167_YSO),
        _ => None,
    }
}
