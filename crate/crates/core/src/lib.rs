//! H(div)-conformal elements on arbitrary polygons, built from Poisson solutions,
//! with classical Raviart–Thomas elements for cross-validation.

pub mod catalog;
pub mod elements;
pub mod geometry;
pub mod harness;
pub mod hdiv_basis;
pub mod poisson;
pub mod polyfam;
pub mod quadrature;
pub mod rt_classical;
