//! Linear maps between matrix algebras that are Hermitian-preserving and
//! trace-preserving but not necessarily completely positive.
//!
//! Maps are stored as Choi matrices ([`QuantumMap`]). On top of that sit the
//! semi-positivity program ([`sdp`]), the hierarchy classifier
//! ([`classify`]), constructive decompositions into physical maps
//! ([`decompose`]), unitary dilations and context circuits ([`dilate`]) and
//! error correction for signed operator-sum noise ([`qec`]).

pub mod atlas;
pub mod classify;
pub mod decompose;
pub mod dilate;
pub mod error;
pub mod io;
pub mod linalg;
pub mod map;
pub mod qec;
pub mod sdp;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Tolerances, C64};
pub use map::{QuantumMap, Sign, SignedKrausRep};
