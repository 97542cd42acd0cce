//! Exact phase bookkeeping.
//!
//! Delays live on a lattice of 2^-64 s and frequencies are whole hertz, so
//! the number of cycles `f * tau` modulo one is the low 64 bits of the
//! integer product `f_hz * ticks`. Sums of such phases are exact, which makes
//! the simulator reproduce equivalent parameter sets bit for bit.

use std::f64::consts::TAU;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// A phase expressed in cycles as a 64-bit binary fraction, wrapping modulo
/// one full cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Turns(pub u64);

impl Turns {
    pub const ZERO: Turns = Turns(0);

    /// Converts a phase in cycles, reducing it modulo one.
    pub fn from_cycles(cycles: f64) -> Self {
        let frac = cycles - cycles.floor();
        // frac * 2^64 can round up to exactly 2^64 for frac just below one
        let scaled = (frac * TWO_POW_64).round();
        if scaled >= TWO_POW_64 {
            Turns(0)
        } else {
            Turns(scaled as u64)
        }
    }

    pub fn from_radians(rad: f64) -> Self {
        Self::from_cycles(rad / TAU)
    }

    /// Phase accumulated by a tone of `freq_hz` over `delay` seconds, i.e.
    /// `freq_hz * delay` cycles. The delay is snapped to the tick lattice.
    pub fn of_product(freq_hz: i64, delay: f64) -> Self {
        Turns((freq_hz as u64).wrapping_mul(delay_ticks(delay) as u64))
    }

    /// Cycles in `[0, 1)`.
    pub fn cycles(self) -> f64 {
        let c = self.0 as f64 / TWO_POW_64;
        // values within half an ulp of a full turn round up to 1.0
        if c >= 1.0 {
            0.0
        } else {
            c
        }
    }

    /// Cycles in `[-0.5, 0.5)`.
    pub fn signed_cycles(self) -> f64 {
        self.0 as i64 as f64 / TWO_POW_64
    }

    pub fn radians(self) -> f64 {
        self.cycles() * TAU
    }

    /// `exp(j 2 pi self)`.
    pub fn cis(self) -> Complex64 {
        let (s, c) = (TAU * self.signed_cycles()).sin_cos();
        Complex64::new(c, s)
    }
}

impl Add for Turns {
    type Output = Turns;
    fn add(self, rhs: Turns) -> Turns {
        Turns(self.0.wrapping_add(rhs.0))
    }
}

impl Sub for Turns {
    type Output = Turns;
    fn sub(self, rhs: Turns) -> Turns {
        Turns(self.0.wrapping_sub(rhs.0))
    }
}

impl Neg for Turns {
    type Output = Turns;
    fn neg(self) -> Turns {
        Turns(self.0.wrapping_neg())
    }
}

/// Number of 2^-64 s ticks in `delay`, rounded to nearest.
pub fn delay_ticks(delay: f64) -> i64 {
    (delay * TWO_POW_64).round() as i64
}

/// Snaps a delay in seconds onto the 2^-64 s lattice. Lattice values below
/// 2^-11 s are exactly representable, and adding or subtracting two of them
/// is exact.
pub fn quantize_delay(delay: f64) -> f64 {
    delay_ticks(delay) as f64 / TWO_POW_64
}

/// `exp(-j 2 pi p / q)` for integers, with the ratio reduced exactly before
/// the conversion to floating point.
pub fn cis_ratio(p: i128, q: i128) -> Complex64 {
    debug_assert!(q > 0);
    let r = p.rem_euclid(q);
    // fold to (-q/2, q/2] so the angle stays small
    let r = if 2 * r > q { r - q } else { r };
    let (s, c) = (-TAU * (r as f64 / q as f64)).sin_cos();
    Complex64::new(c, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_modulo_one_cycle() {
        let a = Turns::from_cycles(0.75);
        let b = Turns::from_cycles(0.5);
        assert_eq!((a + b).cycles(), 0.25);
        assert_eq!((b - a).cycles(), 0.75);
        assert_eq!(Turns::from_cycles(-0.25), Turns::from_cycles(0.75));
        assert_eq!(Turns::from_cycles(1.0 - 1e-18), Turns::ZERO);
    }

    #[test]
    fn product_matches_float_phase() {
        let f = 5_179_800_000_i64;
        let tau = quantize_delay(123.456e-9);
        let exact = Turns::of_product(f, tau).cycles();
        let naive = (f as f64 * tau).rem_euclid(1.0);
        assert!((exact - naive).abs() < 1e-6);
    }

    #[test]
    fn product_is_distributive() {
        let f = 2_031_800_000_i64 - 17 * 312_500;
        let a = quantize_delay(87.1e-9);
        let b = quantize_delay(311.9e-9);
        assert_eq!(a + b - b, a);
        assert_eq!(
            Turns::of_product(f, a + b),
            Turns::of_product(f, a) + Turns::of_product(f, b)
        );
    }

    #[test]
    fn cis_ratio_quarter_turn() {
        let z = cis_ratio(1, 4);
        assert!((z - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        let w = cis_ratio(-3, 4);
        assert!((z - w).norm() < 1e-15);
    }
}
