//! Numerical toolkit for success-or-draw quantum supermaps in the Choi
//! representation: labeled operator algebra, channels, comb validation, the
//! universal d-slot construction and protocol simulation.

pub mod channels;
pub mod combs;
pub mod construction;
pub mod error;
pub mod labels;
pub mod protocols;
pub mod tensor;

pub use error::{Error, Result};
