//! Both sides of the index formulas for a closed geodesic.

use serde::Serialize;

use super::frame::GeodesicFrameData;
use super::galerkin::{sf_dirichlet, sf_geodesic, Converged, GalerkinSpace};
use super::jacobi::{
    concavity_index, conjugate_instants, jacobi_nullities, maslov_index, ConjugateInstant, Crossing,
    JacobiFlow, DEFAULT_GRID,
};
use crate::error::Result;
use crate::linalg::Tolerance;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicReport {
    pub sf: i64,
    pub sf_dirichlet: i64,
    pub i_maslov: i64,
    pub i_conc: usize,
    pub n_per: usize,
    pub n0: usize,
    pub dim_per_cap_0: usize,
    pub n_minus_g: usize,
    pub residual_periodic: i64,
    pub residual_dirichlet: i64,
    pub conjugate_instants: Vec<ConjugateInstant>,
    pub crossings: Vec<Crossing>,
    pub convergence: Converged,
    pub convergence_dirichlet: Converged,
    /// Nullity of the assembled `B_1` at `m` modes.
    pub b1_nullity: usize,
    pub symplectic_residual: f64,
    pub integration_error: f64,
    pub warnings: Vec<String>,
}

impl GeodesicReport {
    pub fn holds(&self) -> bool {
        self.residual_periodic == 0 && self.residual_dirichlet == 0
    }
}

/// Galerkin spectral flows on one side, Jacobi-field invariants on the other.
pub fn verify_periodic_formula(
    frame: &GeodesicFrameData,
    modes: usize,
    tol: &Tolerance,
) -> Result<GeodesicReport> {
    let convergence = sf_geodesic(frame, modes, tol)?;
    let convergence_dirichlet = sf_dirichlet(frame, modes, tol)?;
    let b1_nullity = GalerkinSpace::new(frame, modes)?.assemble_b(1.0)?.inertia(tol)?.zero;

    let flow = JacobiFlow::compute(frame, DEFAULT_GRID)?;
    let instants = conjugate_instants(&flow)?;
    let n_minus_g = frame.n_minus_g();
    let (i_maslov, crossings) = maslov_index(&flow, &instants, n_minus_g)?;
    let i_conc = concavity_index(&flow)?;
    let nullities = jacobi_nullities(&flow)?;

    let sf = convergence.at_m;
    let sf_d = convergence_dirichlet.at_m;
    let g = n_minus_g as i64;
    let residual_periodic =
        sf - (nullities.dim_per_cap_0 as i64 - i_maslov - i_conc as i64 - g);
    let residual_dirichlet = sf_d - (nullities.n0 as i64 - g - i_maslov);

    let mut warnings = Vec::new();
    if b1_nullity != nullities.n_per {
        warnings.push(format!(
            "nullity of B_1 ({b1_nullity}) differs from the periodic Jacobi nullity ({}); \
             the mode count may be below the frequency content of the data",
            nullities.n_per
        ));
    }
    Ok(GeodesicReport {
        sf,
        sf_dirichlet: sf_d,
        i_maslov,
        i_conc,
        n_per: nullities.n_per,
        n0: nullities.n0,
        dim_per_cap_0: nullities.dim_per_cap_0,
        n_minus_g,
        residual_periodic,
        residual_dirichlet,
        conjugate_instants: instants,
        crossings,
        convergence,
        convergence_dirichlet,
        b1_nullity,
        symplectic_residual: flow.symplectic_residual,
        integration_error: flow.integration_error,
        warnings,
    })
}
