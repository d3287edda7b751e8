#![allow(clippy::needless_range_loop)]

//! Exact arithmetic and certified lattice computations for two-step
//! multiquadratic towers of number fields: unramified quadratic steps,
//! explicit fundamental domains for their rings of integers, and the
//! radius, index and discriminant bounds attached to them.

pub mod domain;
pub mod embed;
pub mod error;
pub mod field;
pub mod integers;
pub mod interval;
pub mod lattice;
pub mod linalg;
pub mod rational;
pub mod unramified;
pub mod voronoi;

pub use error::{Error, Result};
pub use field::{FieldElement, SubsetOrder, Tower};
pub use interval::{ComplexInterval, Interval};
pub use rational::Q;
