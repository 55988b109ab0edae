//! Numerical laboratory for Hessian, statistical and locally conformally
//! Hessian structures on flat affine charts.

pub mod cli;
pub mod cones;
pub mod expr;
pub mod geom;
pub mod hesstat;
pub mod jet;
pub mod lch;
