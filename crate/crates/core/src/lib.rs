//! Discrete first eigenpairs of the p-Laplacian on planar domains, their
//! large-p behaviour, and optimal transport to the boundary.

pub mod asymptotics;
pub mod eigensolver;
pub mod export;
pub mod geometry;
pub mod logsum;
pub mod measures;
pub mod skyline;
pub mod stencil;
pub mod transport;
