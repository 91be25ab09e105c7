//! CODATA 2018 constants (SI) and a few unit helpers.

use std::f64::consts::TAU;

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;

/// Mass of a singly charged ⁴⁰Ca⁺ ion (neutral atomic mass minus one electron).
pub const CA40_ION_MASS: f64 = 39.962_590_863 * ATOMIC_MASS_UNIT - ELECTRON_MASS;

#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    TAU * f
}

#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TAU
}

#[inline]
pub fn rad_to_khz(w: f64) -> f64 {
    w / TAU / 1e3
}
