#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod allocations;
pub mod bargaining;
pub mod curves;
pub mod distributions;
pub mod error;
pub mod evaluate;
pub mod frontier;
pub mod math;
pub mod multiunit;
pub mod quad;
pub mod simplex;
pub mod simulate;
pub mod singlebuyer;

pub use distributions::{Classification, Family, Piece, Shape, ValueCurve};
pub use error::{Error, Result};
