//! Exact unital Koszul duality engine.
//!
//! Planar trees, the exterior/Clifford sign calculus, the augmented bar construction of a
//! unital DG operad algebra, and D-structures, all over ℚ or a prime field.

pub mod coeff;
pub mod linalg;
pub mod chain;
pub mod tree;
pub mod sign;
pub mod operad;
pub mod algebra;
pub mod bar;
pub mod dstructure;
pub mod io;
pub mod report;
