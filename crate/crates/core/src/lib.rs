//! Grid-scale machinery for compactly supported divergence-free planar
//! fields `v = ∇⊥f`.
//!
//! The stream function `f` is sampled at cell centers and extended by zero
//! outside the grid. On top of that representation the crate provides
//!
//! * exact anisotropic total variation and the discrete coarea identity ([`field`]),
//! * sets of finite perimeter on the grid: components, holes, saturation ([`region`]),
//! * the component tree of superlevel sets ([`maxtree`]),
//! * the greedy decomposition of `f` into monotone pieces ([`monodec`]),
//! * essential level curves, their weights and Hamiltonian time ([`curves`]),
//! * weak divergence defects and the chain-rule test ([`weakdiv`]),
//! * exact 1D transport on a level curve and the non-uniqueness witness ([`transport1d`]),
//! * weak Sard scoring ([`sard`]) and closed-form example fields ([`gallery`]).
//!
//! Everything is `no_std` + `alloc`; file formats and the command line live in
//! the `streamdec` companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod curves;
mod error;
pub mod field;
pub mod gallery;
pub mod maxtree;
pub mod monodec;
pub mod region;
pub mod sard;
pub mod transport1d;
pub mod weakdiv;

pub use error::{Error, Result};
pub use field::{GridSpec, ScalarField, VectorField};
pub use region::RegionMask;
