//! Conversions between the (quantity/2π) MHz values used at every boundary and
//! the rad/µs angular frequencies used internally.

use std::f64::consts::TAU;

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// ω/2π in MHz to ω in rad/µs.
pub fn mhz(value: f64) -> f64 {
    value * TAU
}

/// ω in rad/µs to ω/2π in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / TAU
}

/// ω/2π in GHz to ω in rad/µs.
pub fn ghz(value: f64) -> f64 {
    value * 1.0e3 * TAU
}

/// Rate in rad/µs to rad/s.
pub fn per_second(omega: f64) -> f64 {
    omega * 1.0e6
}
