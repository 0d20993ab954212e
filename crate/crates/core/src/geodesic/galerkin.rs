//! Galerkin discretization of the periodic index forms `B_t` on the space
//! spanned by `{1, √2 cos 2πkt, √2 sin 2πkt}_{k ≤ m} ⊗ R^n`, with the inner
//! product `⟨V, W⟩ = V(0)·W(0) + ∫ V'·W'`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use serde::Serialize;

use super::frame::GeodesicFrameData;
use crate::error::{Error, Result};
use crate::flow::{sf_endpoints, sf_restricted, FlowReport, OperatorPath};
use crate::forms::SymmetricForm;
use crate::grassmann::{Subspace, SymmetryOperator};
use crate::linalg::{kernel_basis, orthonormal_basis, symmetrize, Matrix, Tolerance};

const NODES_PER_PANEL: usize = 16;

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule on `[0, 1]`.
pub fn composite_rule(panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(NODES_PER_PANEL);
    let h = 1.0 / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let a = p as f64 * h;
            x.iter()
                .zip(&w)
                .map(move |(xi, wi)| (a + 0.5 * h * (xi + 1.0), 0.5 * h * wi))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Scalar basis: the real Fourier functions up to `modes`, optionally
/// followed by the linear function `ψ(r) = r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ScalarBasis {
    modes: usize,
    linear: bool,
}

impl ScalarBasis {
    fn len(&self) -> usize {
        2 * self.modes + 1 + usize::from(self.linear)
    }

    fn eval(&self, r: f64, vals: &mut [f64], ders: &mut [f64]) {
        vals[0] = 1.0;
        ders[0] = 0.0;
        for k in 1..=self.modes {
            let w = 2.0 * PI * k as f64;
            let (s, c) = (w * r).sin_cos();
            vals[2 * k - 1] = SQRT_2 * c;
            ders[2 * k - 1] = -SQRT_2 * w * s;
            vals[2 * k] = SQRT_2 * s;
            ders[2 * k] = SQRT_2 * w * c;
        }
        if self.linear {
            let last = self.len() - 1;
            vals[last] = r;
            ders[last] = 1.0;
        }
    }

    fn at_zero(&self) -> Vec<f64> {
        let mut vals = vec![0.0; self.len()];
        let mut ders = vec![0.0; self.len()];
        self.eval(0.0, &mut vals, &mut ders);
        vals
    }
}

/// `∫φφᵀ`, `∫φφ'ᵀ`, `∫φ'φ'ᵀ` over `[0, 1]`.
#[derive(Debug, Clone)]
struct ScalarIntegrals {
    i00: Matrix,
    i01: Matrix,
    i11: Matrix,
}

fn scalar_integrals(basis: ScalarBasis, rule: &[(f64, f64)]) -> ScalarIntegrals {
    let k = basis.len();
    let mut i00 = Matrix::zeros(k, k);
    let mut i01 = Matrix::zeros(k, k);
    let mut i11 = Matrix::zeros(k, k);
    let mut v = vec![0.0; k];
    let mut d = vec![0.0; k];
    for &(r, w) in rule {
        basis.eval(r, &mut v, &mut d);
        for a in 0..k {
            for b in 0..k {
                i00[(a, b)] += w * v[a] * v[b];
                i01[(a, b)] += w * v[a] * d[b];
                i11[(a, b)] += w * d[a] * d[b];
            }
        }
    }
    ScalarIntegrals { i00, i01, i11 }
}

#[derive(Debug)]
struct Discretization {
    basis: ScalarBasis,
    n: usize,
    rule: Vec<(f64, f64)>,
    integrals: ScalarIntegrals,
    gram: Matrix,
}

impl Discretization {
    fn new(n: usize, modes: usize, linear: bool, data_frequency: usize) -> Self {
        let basis = ScalarBasis { modes, linear };
        let rule = composite_rule(2 * modes + 2 * data_frequency + 4);
        let integrals = scalar_integrals(basis, &rule);
        let p0 = nalgebra::DVector::from_vec(basis.at_zero());
        let scalar_gram = &p0 * p0.transpose() + &integrals.i11;
        let gram = symmetrize(&scalar_gram.kronecker(&Matrix::identity(n, n)));
        Discretization {
            basis,
            n,
            rule,
            integrals,
            gram,
        }
    }

    fn dim(&self) -> usize {
        self.basis.len() * self.n
    }

    fn blocks(frame: &GeodesicFrameData, g: &Matrix, s: f64) -> (Matrix, Matrix) {
        let gamma = frame.gamma().eval(s);
        let x = gamma.transpose() * g;
        let y = &x * &gamma + frame.rbar().eval(s).transpose() * g;
        (x, y)
    }

    /// Galerkin matrix of `B_t`; coefficients are read at `s = t·r`.
    fn assemble(&self, t: f64, frame: &GeodesicFrameData) -> Matrix {
        if !frame.is_constant() {
            return self.assemble_by_quadrature(t, frame);
        }
        let g = frame.g();
        let (x, y) = Self::blocks(frame, &g, 0.0);
        let ints = &self.integrals;
        symmetrize(
            &(ints.i11.kronecker(&g)
                + ints.i01.kronecker(&x) * t
                + ints.i01.transpose().kronecker(&x.transpose()) * t
                + ints.i00.kronecker(&y) * (t * t)),
        )
    }

    fn assemble_by_quadrature(&self, t: f64, frame: &GeodesicFrameData) -> Matrix {
        let g = frame.g();
        let k = self.basis.len();
        let n = self.n;
        let mut out = self.integrals.i11.kronecker(&g);
        let mut v = vec![0.0; k];
        let mut d = vec![0.0; k];
        for &(r, w) in &self.rule {
            self.basis.eval(r, &mut v, &mut d);
            let (x, y) = Self::blocks(frame, &g, t * r);
            for a in 0..k {
                for b in 0..k {
                    let c01 = w * t * v[a] * d[b];
                    let c10 = w * t * d[a] * v[b];
                    let c00 = w * t * t * v[a] * v[b];
                    for i in 0..n {
                        for l in 0..n {
                            out[(a * n + i, b * n + l)] +=
                                c01 * x[(i, l)] + c10 * x[(l, i)] + c00 * y[(i, l)];
                        }
                    }
                }
            }
        }
        symmetrize(&out)
    }

    /// Evaluation at 0 as an `n × N` matrix.
    fn eval_at_zero(&self) -> Matrix {
        let p0 = self.basis.at_zero();
        let n = self.n;
        let mut e = Matrix::zeros(n, self.dim());
        for (j, &pj) in p0.iter().enumerate() {
            for i in 0..n {
                e[(i, j * n + i)] = pj;
            }
        }
        e
    }
}

/// The discretized space of periodic fields with `m` Fourier modes, bound to
/// the frame data it discretizes.
#[derive(Debug, Clone)]
pub struct GalerkinSpace {
    frame: Arc<GeodesicFrameData>,
    modes: usize,
    disc: Arc<Discretization>,
}

impl GalerkinSpace {
    pub fn new(frame: &GeodesicFrameData, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::input("at least one Fourier mode is required"));
        }
        let disc = Discretization::new(frame.n(), modes, false, frame.max_frequency());
        Ok(GalerkinSpace {
            frame: Arc::new(frame.clone()),
            modes,
            disc: Arc::new(disc),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.disc.dim()
    }

    pub fn frame(&self) -> &GeodesicFrameData {
        &self.frame
    }

    pub fn gram(&self) -> &Matrix {
        &self.disc.gram
    }

    pub fn eval_at_zero(&self) -> Matrix {
        self.disc.eval_at_zero()
    }

    /// Coefficient vector of the field `φ_j e_i`.
    pub fn index(&self, scalar: usize, component: usize) -> usize {
        scalar * self.frame.n() + component
    }

    /// Fields vanishing at 0 (kernel of evaluation at 0).
    pub fn dirichlet_subspace(&self, tol: &Tolerance) -> Result<Subspace> {
        Subspace::from_orthonormal(kernel_basis(&self.eval_at_zero(), tol)?)
    }

    pub fn assemble_matrix(&self, t: f64) -> Result<Matrix> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::input(format!("t = {t} outside [0, 1]")));
        }
        Ok(self.disc.assemble(t, &self.frame))
    }

    /// `B_t` with the Gram matrix attached.
    pub fn assemble_b(&self, t: f64) -> Result<SymmetricForm> {
        SymmetricForm::with_gram(self.assemble_matrix(t)?, self.disc.gram.clone())
    }

    /// `t ↦ B_t`, assembled lazily.
    pub fn path(&self) -> Result<OperatorPath> {
        let space = self.clone();
        OperatorPath::family(self.dim(), 0.0, 1.0, move |t| space.assemble_b(t))
    }

    /// Multiplication by `G`.
    pub fn symmetry_j(&self) -> Result<SymmetryOperator> {
        let k = self.disc.basis.len();
        SymmetryOperator::new(Matrix::identity(k, k).kronecker(&self.frame.g()))
    }
}

pub fn assemble_b(t: f64, space: &GalerkinSpace) -> Result<SymmetricForm> {
    space.assemble_b(t)
}

pub fn symmetry_j(space: &GalerkinSpace) -> Result<SymmetryOperator> {
    space.symmetry_j()
}

/// Spectral flow of `t ↦ B_t` on the periodic space with `m` modes.
pub fn sf_geodesic_at(space: &GalerkinSpace, tol: &Tolerance) -> Result<FlowReport> {
    sf_endpoints(&space.path()?, tol)
}

/// The same flow restricted to fields vanishing at 0.
pub fn sf_dirichlet_at(space: &GalerkinSpace, tol: &Tolerance) -> Result<FlowReport> {
    sf_restricted(&space.path()?, &space.dirichlet_subspace(tol)?, tol)
}

/// A Galerkin value together with its value after doubling the modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Converged {
    pub modes: usize,
    pub at_m: i64,
    pub at_2m: i64,
}

fn converged<F>(frame: &GeodesicFrameData, modes: usize, what: &str, f: F) -> Result<Converged>
where
    F: Fn(&GalerkinSpace) -> Result<i64>,
{
    let at_m = f(&GalerkinSpace::new(frame, modes)?)?;
    let at_2m = f(&GalerkinSpace::new(frame, 2 * modes)?)?;
    if at_m != at_2m {
        return Err(Error::numerical(format!(
            "{what} not stabilized: {at_m} with {modes} modes, {at_2m} with {} modes; increase the mode count",
            2 * modes
        )));
    }
    Ok(Converged { modes, at_m, at_2m })
}

/// Spectral flow of the closed geodesic, checked at `m` and `2m` modes.
pub fn sf_geodesic(frame: &GeodesicFrameData, modes: usize, tol: &Tolerance) -> Result<Converged> {
    converged(frame, modes, "geodesic spectral flow", |s| Ok(sf_geodesic_at(s, tol)?.sf))
}

pub fn sf_dirichlet(frame: &GeodesicFrameData, modes: usize, tol: &Tolerance) -> Result<Converged> {
    converged(frame, modes, "Dirichlet spectral flow", |s| Ok(sf_dirichlet_at(s, tol)?.sf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TwistedReport {
    pub sf_s: i64,
    pub n_s: usize,
    pub sf: i64,
}

/// Flow on fields with `V(1) = S V(0)`, realized as
/// `V(t) = W(t) + t (S − I) W(0)` for periodic `W`, together with `n_S`,
/// the negative index of `g` on the image of `S − I`.
pub fn sf_twisted(frame: &GeodesicFrameData, modes: usize, tol: &Tolerance) -> Result<TwistedReport> {
    let n = frame.n();
    let s = frame
        .holonomy()
        .cloned()
        .unwrap_or_else(|| Matrix::identity(n, n));
    if modes == 0 {
        return Err(Error::input("at least one Fourier mode is required"));
    }
    let periodic = Discretization::new(n, modes, false, frame.max_frequency());
    let extended = Discretization::new(n, modes, true, frame.max_frequency());
    let np = periodic.dim();
    let mut x = Matrix::zeros(extended.dim(), np);
    x.view_mut((0, 0), (np, np)).copy_from(&Matrix::identity(np, np));
    let twist = (&s - Matrix::identity(n, n)) * periodic.eval_at_zero();
    x.view_mut((np, 0), (n, np)).copy_from(&twist);
    let gram = symmetrize(&(x.transpose() * &extended.gram * &x));
    let form_at = |t: f64| -> Result<SymmetricForm> {
        let a = symmetrize(&(x.transpose() * extended.assemble(t, frame) * &x));
        SymmetricForm::with_gram(a, gram.clone())
    };
    let path = OperatorPath::from_samples(vec![(0.0, form_at(0.0)?), (1.0, form_at(1.0)?)])?;
    let sf_s = sf_endpoints(&path, tol)?.sf;

    let image = orthonormal_basis(&(&s - Matrix::identity(n, n)), tol)?;
    let n_s = if image.ncols() == 0 {
        0
    } else {
        let restricted = symmetrize(&(image.transpose() * frame.g() * &image));
        SymmetricForm::new(restricted)?.inertia(tol)?.negative
    };
    Ok(TwistedReport {
        sf_s,
        n_s,
        sf: sf_s - n_s as i64,
    })
}
