//! Closed semi-Riemannian geodesics described by frame data: Galerkin
//! spectral flow of the index forms, Jacobi fields, Maslov and concavity
//! indices, and the comparison of both sides of the index formulas.

pub mod frame;
pub mod galerkin;
pub mod jacobi;
pub mod report;

pub use frame::{
    constant_curvature, example_frame, Coefficients, ExampleParams, GeodesicFrameData,
    GeodesicSpec, EXAMPLE_NAMES,
};
pub use galerkin::{
    assemble_b, sf_dirichlet, sf_geodesic, sf_twisted, symmetry_j, Converged, GalerkinSpace,
    TwistedReport,
};
pub use jacobi::{
    concavity_index, conjugate_instants, jacobi_fundamental, jacobi_nullities, maslov_index,
    ConjugateInstant, Crossing, JacobiFlow, Nullities,
};
pub use report::{verify_periodic_formula, GeodesicReport};
