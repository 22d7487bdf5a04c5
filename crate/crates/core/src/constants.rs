//! CODATA 2018 values in SI units.

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const HBAR: f64 = 1.054_571_817e-34;

/// e^2 / (4 pi eps0), in J m.
pub const COULOMB_CONSTANT: f64 =
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY);

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Converts a frequency in Hz to angular frequency.
#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    f * TWO_PI
}

#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TWO_PI
}
