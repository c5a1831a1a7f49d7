//! Link-level simulation of OTFS (orthogonal time frequency space) modulation.
//!
//! The crate covers the full delay-Doppler chain:
//!
//! - [`constellation`]: Gray-labelled square QAM alphabets and hard slicing.
//! - [`modem`]: ISFFT/Heisenberg transmitter, Wigner/SFFT receiver and the
//!   effective delay-Doppler channel matrix.
//! - [`channel`]: random integer delay-Doppler multipath channels, in matrix
//!   and scalar form.
//! - [`detect`]: the Bayesian parallel-interference-cancellation detector with
//!   decision statistics combining (B-PIC-DSC), an MMSE baseline and an
//!   exhaustive ML reference.
//! - [`sim`]: seeded, parallel Monte Carlo BER sweeps with CSV output.
//! - [`verify`]: self-checks exposed through the `otfs verify` subcommand.

pub mod channel;
pub mod constellation;
pub mod detect;
pub mod error;
pub mod linalg;
pub mod modem;
pub mod rng;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
