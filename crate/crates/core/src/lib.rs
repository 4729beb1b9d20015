#![cfg_attr(not(feature = "std"), no_std)]
extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod gronwall;
pub mod kernels;
pub mod measures;
pub mod par;
pub mod rng;
pub mod transport;

pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelSpec};
