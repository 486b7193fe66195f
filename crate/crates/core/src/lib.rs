//! Numerical toolkit for harmonic functions on asymptotically cylindrical
//! surfaces and their higher-dimensional warped-product analogues.

pub mod cli;
pub mod discretize;
pub mod geometry;
pub mod harmonic;
pub mod oracle;
pub mod spectral;
pub mod verify;
