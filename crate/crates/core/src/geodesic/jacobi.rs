//! Jacobi fields in first-order form. With the frame momentum
//! `p = G(v' + Γv)` the Jacobi equation `(d/dt + Γ)² v = R̄ v` becomes
//!
//! ```text
//! v' = G p − Γ v,    p' = G R̄ v − G Γ G p,
//! ```
//!
//! a linear Hamiltonian system whose fundamental solution `Φ_t` preserves
//! `Ω = [[0, I], [−I, 0]]`.

use serde::Serialize;

use super::frame::GeodesicFrameData;
use crate::error::{Error, Result};
use crate::linalg::{kernel_basis_at_scale, max_abs, op_norm, svd, symmetrize, Matrix, Tolerance};

pub const ODE_TOLERANCE: f64 = 1e-11;
/// Tolerance of the confirmation run used to estimate the integration error.
pub const ODE_CHECK_TOLERANCE: f64 = 1e-13;
pub const SYMPLECTIC_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_GRID: usize = 257;

const MAX_STEPS: usize = 1_000_000;

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Coefficient matrix of the first-order system at time `t`.
pub fn system_matrix(frame: &GeodesicFrameData, t: f64) -> Matrix {
    let n = frame.n();
    let g = frame.g();
    let gamma = frame.gamma().eval(t);
    let rbar = frame.rbar().eval(t);
    let mut a = Matrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&(-&gamma));
    a.view_mut((0, n), (n, n)).copy_from(&g);
    a.view_mut((n, 0), (n, n)).copy_from(&(&g * rbar));
    a.view_mut((n, n), (n, n)).copy_from(&(-(&g * &gamma * &g)));
    a
}

pub fn omega(n: usize) -> Matrix {
    let mut w = Matrix::zeros(2 * n, 2 * n);
    w.view_mut((0, n), (n, n)).copy_from(&Matrix::identity(n, n));
    w.view_mut((n, 0), (n, n)).copy_from(&(-Matrix::identity(n, n)));
    w
}

/// `‖ΦᵀΩΦ − Ω‖_max / max(1, ‖Φ‖_max²)`.
pub fn symplectic_residual(phi: &Matrix) -> f64 {
    let n = phi.nrows() / 2;
    let w = omega(n);
    let scale = max_abs(phi).powi(2).max(1.0);
    max_abs(&(phi.transpose() * &w * phi - &w)) / scale
}

/// Integrates `Y' = A(t) Y` from `(t0, y0)` to `t1` with the embedded pair.
fn integrate(frame: &GeodesicFrameData, t0: f64, y0: &Matrix, t1: f64, tol: f64) -> Result<(Matrix, usize)> {
    if t1 == t0 {
        return Ok((y0.clone(), 0));
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let constant = frame.is_constant();
    let a_const = if constant { Some(system_matrix(frame, 0.0)) } else { None };
    let rhs = |t: f64, y: &Matrix| -> Matrix {
        match &a_const {
            Some(a) => a * y,
            None => system_matrix(frame, t) * y,
        }
    };
    let mut t = t0;
    let mut y = y0.clone();
    let mut h = (span / 16.0).min(1e-2).max(1e-6 * span);
    let mut steps = 0;
    let mut k: Vec<Matrix> = Vec::with_capacity(7);
    let mut first = rhs(t, &y);
    while (t1 - t) * dir > 0.0 {
        if steps >= MAX_STEPS {
            return Err(Error::numerical(format!(
                "Jacobi integration exceeded {MAX_STEPS} steps near t = {t}"
            )));
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        k.clear();
        k.push(first.clone());
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    ys += kj * (A[s][j] * step * dir);
                }
            }
            k.push(rhs(t + C[s] * step * dir, &ys));
        }
        // stage 7 is evaluated at the fifth-order solution (FSAL)
        let mut y_new = y.clone();
        for (j, kj) in k.iter().take(6).enumerate() {
            if A[6][j] != 0.0 {
                y_new += kj * (A[6][j] * step * dir);
            }
        }
        let mut err = 0.0f64;
        for idx in 0..y.len() {
            let e: f64 = (0..7).map(|j| E[j] * k[j][idx]).sum::<f64>() * step;
            let sc = tol + tol * y[idx].abs().max(y_new[idx].abs());
            err = err.max(e.abs() / sc);
        }
        steps += 1;
        if err <= 1.0 {
            t = if last { t1 } else { t + step * dir };
            y = y_new;
            first = k[6].clone();
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = step * factor;
        if !h.is_finite() || h < 1e-10 * span {
            return Err(Error::numerical(format!("Jacobi integration step underflow near t = {t}")));
        }
    }
    Ok((y, steps))
}

/// Fundamental solution stored on a uniform grid of `[0, 1]`.
#[derive(Debug, Clone)]
pub struct JacobiFlow {
    frame: GeodesicFrameData,
    grid: Vec<f64>,
    states: Vec<Matrix>,
    /// Largest scaled symplectic residual over the grid.
    pub symplectic_residual: f64,
    /// `‖Φ_1 − Φ_1^check‖_max / max(1, ‖Φ_1‖_max)` against a tighter run.
    pub integration_error: f64,
    pub steps: usize,
}

impl JacobiFlow {
    pub fn compute(frame: &GeodesicFrameData, grid_points: usize) -> Result<Self> {
        let n = frame.n();
        let points = grid_points.max(2);
        let grid: Vec<f64> = (0..points)
            .map(|i| if i + 1 == points { 1.0 } else { i as f64 / (points - 1) as f64 })
            .collect();
        let mut states = Vec::with_capacity(points);
        states.push(Matrix::identity(2 * n, 2 * n));
        let mut steps = 0;
        for w in grid.windows(2) {
            let (next, s) = integrate(frame, w[0], states.last().expect("nonempty"), w[1], ODE_TOLERANCE)?;
            steps += s;
            states.push(next);
        }
        let symplectic = states.iter().map(symplectic_residual).fold(0.0, f64::max);
        if symplectic > SYMPLECTIC_TOLERANCE {
            return Err(Error::numerical(format!(
                "Jacobi flow symplectic residual {symplectic:.3e} exceeds {SYMPLECTIC_TOLERANCE:.0e} \
                 after {steps} steps"
            )));
        }
        let (check, _) = integrate(frame, 0.0, &Matrix::identity(2 * n, 2 * n), 1.0, ODE_CHECK_TOLERANCE)?;
        let phi1 = states.last().expect("nonempty");
        let integration_error = max_abs(&(phi1 - &check)) / max_abs(phi1).max(1.0);
        if integration_error > 1e-8 {
            return Err(Error::numerical(format!(
                "Jacobi flow not reproducible at tighter tolerance (difference {integration_error:.3e})"
            )));
        }
        Ok(JacobiFlow {
            frame: frame.clone(),
            grid,
            states,
            symplectic_residual: symplectic,
            integration_error,
            steps,
        })
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn states(&self) -> &[Matrix] {
        &self.states
    }

    pub fn monodromy(&self) -> &Matrix {
        self.states.last().expect("nonempty")
    }

    /// `Φ_t`, integrated from the nearest stored grid point.
    pub fn at(&self, t: f64) -> Result<Matrix> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::input(format!("t = {t} outside [0, 1]")));
        }
        let last = self.grid.len() - 1;
        let pos = t * last as f64;
        let i = (pos.round() as usize).min(last);
        if (self.grid[i] - t).abs() == 0.0 {
            return Ok(self.states[i].clone());
        }
        Ok(integrate(&self.frame, self.grid[i], &self.states[i], t, ODE_TOLERANCE)?.0)
    }
}

pub fn jacobi_fundamental(frame: &GeodesicFrameData, grid_points: usize) -> Result<JacobiFlow> {
    JacobiFlow::compute(frame, grid_points)
}

fn block(phi: &Matrix, row: usize, col: usize) -> Matrix {
    let n = phi.nrows() / 2;
    phi.view((row * n, col * n), (n, n)).into_owned()
}

/// `v(t)` for `v(0) = 0`, as a function of the initial momentum.
pub fn v_block(phi: &Matrix) -> Matrix {
    block(phi, 0, 1)
}

/// `p(t)` for `v(0) = 0`.
pub fn d_block(phi: &Matrix) -> Matrix {
    block(phi, 1, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugateInstant {
    pub t: f64,
    pub multiplicity: usize,
}

pub const CONJUGATE_GRID: usize = 512;
const CANDIDATE_RATIO: f64 = 0.2;
const ZERO_RATIO: f64 = 1e-6;

fn conditioning(flow: &JacobiFlow, t: f64) -> Result<(f64, Vec<f64>)> {
    let v = v_block(&flow.at(t)?);
    let sv = svd(&v)?.singular_values;
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok((0.0, sv));
    }
    Ok((sv.last().copied().unwrap_or(0.0) / top, sv))
}

/// Zeros of `det V(t)` in `(0, 1]` with multiplicities. Candidates are local
/// minima of `σ_min/σ_max` on a grid, refined by golden-section search.
pub fn conjugate_instants(flow: &JacobiFlow) -> Result<Vec<ConjugateInstant>> {
    let points = CONJUGATE_GRID;
    let times: Vec<f64> = (1..=points).map(|i| i as f64 / points as f64).collect();
    let ratios = times
        .iter()
        .map(|&t| Ok(conditioning(flow, t)?.0))
        .collect::<Result<Vec<f64>>>()?;
    for i in 1..ratios.len() {
        if ratios[i] <= ZERO_RATIO && ratios[i - 1] <= ZERO_RATIO {
            return Err(Error::numerical(format!(
                "conjugate instants are not isolated near t = {} at grid resolution 1/{points}",
                times[i]
            )));
        }
    }
    let mut out: Vec<ConjugateInstant> = Vec::new();
    for i in 0..ratios.len() {
        let left = if i == 0 { f64::INFINITY } else { ratios[i - 1] };
        let right = ratios.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if !(ratios[i] < CANDIDATE_RATIO && ratios[i] <= left && ratios[i] <= right) {
            continue;
        }
        let lo = if i == 0 { 0.5 / points as f64 } else { times[i - 1] };
        let hi = times.get(i + 1).copied().unwrap_or(1.0);
        let mut t = golden_minimum(|s| conditioning(flow, s).map(|c| c.0), lo, hi)?;
        if (1.0 - t).abs() < 1e-9 {
            t = 1.0;
        }
        let (ratio, sv) = conditioning(flow, t)?;
        if ratio > ZERO_RATIO {
            continue;
        }
        let top = sv[0];
        let multiplicity = sv.iter().filter(|&&s| s / top <= ZERO_RATIO).count();
        if out.last().is_some_and(|c| (c.t - t).abs() < 1e-9) {
            continue;
        }
        out.push(ConjugateInstant { t, multiplicity });
    }
    Ok(out)
}

fn golden_minimum<F>(f: F, mut a: f64, mut b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a) > 1e-13 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    // the bracket ends are candidates too (a zero exactly at t = 1)
    let mid = 0.5 * (a + b);
    let mut best = (f(mid)?, mid);
    for x in [a, b] {
        let fx = f(x)?;
        if fx < best.0 {
            best = (fx, x);
        }
    }
    Ok(best.1)
}

/// Crossing data at one conjugate instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub t: f64,
    pub multiplicity: usize,
    pub signature: i64,
}

/// `n₋(g) + Σ signature of the crossing forms` over the conjugate instants.
pub fn maslov_index(flow: &JacobiFlow, instants: &[ConjugateInstant], n_minus_g: usize) -> Result<(i64, Vec<Crossing>)> {
    let g = flow.frame.g();
    let mut total = n_minus_g as i64;
    let mut crossings = Vec::with_capacity(instants.len());
    for c in instants {
        let phi = flow.at(c.t)?;
        let v = v_block(&phi);
        let d = d_block(&phi);
        let dec = svd(&v)?;
        let n = v.ncols();
        let kernel = dec.v.columns(n - c.multiplicity, c.multiplicity).into_owned();
        let dk = &d * &kernel;
        let q = symmetrize(&(dk.transpose() * &g * &dk));
        let scale = op_norm(&d)?.powi(2).max(1.0);
        let eig = crate::linalg::eigvals_sym(&q, &Tolerance::default())?;
        if eig.iter().any(|x| x.abs() <= 1e-8 * scale) {
            return Err(Error::numerical(format!(
                "degenerate crossing form at t = {}; perturb the curvature data and rerun",
                c.t
            )));
        }
        let signature = eig.iter().map(|x| x.signum() as i64).sum::<i64>();
        total += signature;
        crossings.push(Crossing {
            t: c.t,
            multiplicity: c.multiplicity,
            signature,
        });
    }
    Ok((total, crossings))
}

/// Negative index of `M_ab = g(u_a(1) − u_a(0), v_b(0))` on the space of
/// Jacobi fields with `v(1) = v(0)`.
pub fn concavity_index(flow: &JacobiFlow) -> Result<usize> {
    let n = flow.n();
    let phi1 = flow.monodromy();
    let scale = op_norm(phi1)?.max(1.0);
    let mut constraint = phi1.view((0, 0), (n, 2 * n)).into_owned();
    for i in 0..n {
        constraint[(i, i)] -= 1.0;
    }
    let basis = kernel_basis_at_scale(&constraint, scale, &nullity_tolerance())?;
    if basis.ncols() == 0 {
        return Ok(0);
    }
    let end = phi1 * &basis;
    let dp = end.rows(n, n) - basis.rows(n, n);
    let v0 = basis.rows(0, n);
    let m = dp.transpose() * v0;
    let m_norm = op_norm(&m)?;
    let asym = max_abs(&(&m - m.transpose()));
    if asym > 1e-8 * m_norm.max(1.0) {
        return Err(Error::numerical(format!(
            "concavity form is not symmetric (defect {asym:.3e})"
        )));
    }
    let band = 1e-8 * scale * scale;
    let vals = crate::linalg::eigvals_sym(&symmetrize(&m), &Tolerance::default())?;
    Ok(vals.iter().filter(|&&x| x < -band).count())
}

fn nullity_tolerance() -> Tolerance {
    Tolerance {
        rel_zero: 1e-7,
        abs_zero: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Nullities {
    pub n_per: usize,
    pub n0: usize,
    pub dim_per_cap_0: usize,
}

/// `dim ker(Φ_1 − I)`, `dim ker V(1)` and `dim{(0, p) : Φ_1 (0, p) = (0, p)}`.
pub fn jacobi_nullities(flow: &JacobiFlow) -> Result<Nullities> {
    let n = flow.n();
    let phi1 = flow.monodromy();
    let scale = op_norm(phi1)?.max(1.0);
    let tol = nullity_tolerance();
    let periodic = phi1 - Matrix::identity(2 * n, 2 * n);
    let n_per = kernel_basis_at_scale(&periodic, scale, &tol)?.ncols();
    let n0 = kernel_basis_at_scale(&v_block(phi1), scale, &tol)?.ncols();
    let mut stacked = Matrix::zeros(2 * n, n);
    stacked.rows_mut(0, n).copy_from(&v_block(phi1));
    stacked
        .rows_mut(n, n)
        .copy_from(&(d_block(phi1) - Matrix::identity(n, n)));
    let dim_per_cap_0 = kernel_basis_at_scale(&stacked, scale, &tol)?.ncols();
    Ok(Nullities {
        n_per,
        n0,
        dim_per_cap_0,
    })
}
