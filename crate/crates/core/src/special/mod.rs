//! Special functions and quadrature rules shared by every replica integral.

mod lambert;
mod quadrature;

pub use lambert::{lambert_w0, lambert_w0_exp};
pub use quadrature::{
    gauss_hermite, gauss_laguerre, log_gauss_laguerre, MeasureKind, Quadrature, QuadratureRule,
    MAX_HERMITE_NODES, MAX_LAGUERRE_NODES,
};
