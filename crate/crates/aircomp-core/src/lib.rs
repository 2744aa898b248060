//! Over-the-air computation (AirComp) in cell-free massive MIMO.
//!
//! The crate is split into four layers:
//!
//! * [`linalg`] — complex Hermitian linear algebra (factorization, solves,
//!   quadratic forms) shared by everything else.
//! * [`channel`] — network snapshots: AP/device placement with wrap-around,
//!   3GPP UMi path loss, correlated shadowing, Gaussian local scattering,
//!   and correlated Rayleigh channel draws.
//! * [`pilots`] — pilot assignment, pilot-phase observations, and MMSE
//!   channel estimation under pilot contamination.
//! * [`design`] — transmit-coefficient and combiner designs for the three
//!   AP-cooperation levels, the asymptotic MSE floor, and fronthaul
//!   signaling counts.
//!
//! The crate is `no_std` (with `alloc`); IO, configuration files, and the
//! experiment harness live in the companion `aircomp-sim` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod channel;
pub mod design;
mod error;
pub mod linalg;
pub mod pilots;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Converts a power level in dBm to linear milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    num_traits::Float::powf(10.0_f64, dbm / 10.0)
}

/// Converts a linear (milliwatt or unitless) quantity to decibels.
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * num_traits::Float::log10(lin)
}
