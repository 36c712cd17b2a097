//! Numerical building blocks shared by the solver layers.

pub mod bessel;
pub mod linalg;
pub mod magnus;
pub mod quadrature;
pub mod roots;
