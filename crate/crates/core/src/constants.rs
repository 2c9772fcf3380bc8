//! Physical constants (CODATA 2018, exact where the SI defines them).

/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;
/// Planck constant, J s.
pub const H: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = H / (2.0 * std::f64::consts::PI);
/// Bohr radius, m.
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
