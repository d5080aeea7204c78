//! Numerical gluing construction of Ricci-flat Kähler metrics on the Kummer
//! surface.
//!
//! The crate builds the approximate solution obtained by grafting scaled
//! Eguchi-Hanson patches onto the flat orbifold `T⁴/±1`, solves the linear
//! problems on cylinders and on manifolds with cylindrical ends, and runs the
//! nonlinear Picard iteration that corrects the grafted metric to a
//! numerically Ricci-flat one.

pub mod acceptance;
pub mod charts;
pub mod cli;
pub mod conformal_frame;
pub mod cross_section;
pub mod cy_solver;
pub mod eguchi_hanson;
pub mod ends_gluing;
pub mod error;
pub mod fit;
pub mod hermitian;
pub mod kummer_assembly;
pub mod linalg;
pub mod poly;
pub mod quadrature;
pub mod cylinder_linear;

pub use error::{Error, Result};
