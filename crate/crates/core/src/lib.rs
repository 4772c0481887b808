#![cfg_attr(not(feature = "std"), no_std)]
// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod expr;
pub mod fft;
pub mod fio;
pub mod grid;
pub mod interp;
pub mod metaplectic;
pub mod quantize;
pub mod quasimode;
pub mod states;
pub mod symbolcalc;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
