//! Subspace calculus on `R^N`: projections, Fredholm-pair index, relative
//! dimension, Kato's minimum gap, the gap metric, graph projections and the
//! lifting of continuous subspace families to paths of orthogonal maps.
//!
//! In finite dimension every pair of subspaces is a Fredholm pair and every
//! pair is commensurable, so all integer invariants here are always defined.
//! They are computed from numerical ranks at a [`Tolerance`], never from
//! the closed-form dimension identities they are tested against.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    eig_sym, kernel_basis, max_abs, numerical_rank, op_norm_sym, orthonormal_basis,
    orthonormality_defect, svd, Matrix, Tolerance,
};

/// Consecutive samples farther apart than this (in the gap metric) are
/// bisected when a refinement callback is available.
pub const LIFT_TARGET_GAP: f64 = 0.9;
/// Gap at which the Kato rotation between two samples no longer exists.
pub const LIFT_HARD_GAP: f64 = 1.0 - 1e-6;
/// Maximum bisection depth per sample interval in [`lift_path`].
pub const LIFT_MAX_BISECTIONS: usize = 20;

/// A linear subspace of `R^N`, stored as an `N×k` matrix with orthonormal
/// columns. Immutable; all set operations return fresh values.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: Matrix,
}

impl Subspace {
    /// Column space of arbitrary spanning columns, rank decided at `tol`.
    pub fn from_columns(columns: &Matrix, tol: &Tolerance) -> Result<Self> {
        Ok(Subspace {
            basis: orthonormal_basis(columns, tol)?,
        })
    }

    /// Wraps a matrix that already has orthonormal columns.
    pub fn from_orthonormal(basis: Matrix) -> Result<Self> {
        let k = basis.ncols();
        let defect = orthonormality_defect(&basis);
        if defect > 1e-10 * (k.max(1) as f64) {
            return Err(Error::input(format!(
                "basis columns are not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Subspace { basis })
    }

    /// Span of the given vectors in `R^dim`.
    pub fn span(dim: usize, vectors: &[Vec<f64>], tol: &Tolerance) -> Result<Self> {
        let cols = crate::linalg::matrix_from_columns(dim, vectors)?;
        Self::from_columns(&cols, tol)
    }

    pub fn zero(dim: usize) -> Self {
        Subspace {
            basis: Matrix::zeros(dim, 0),
        }
    }

    pub fn full(dim: usize) -> Self {
        Subspace {
            basis: Matrix::identity(dim, dim),
        }
    }

    /// Span of the listed standard basis vectors.
    pub fn coordinate(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut basis = Matrix::zeros(dim, indices.len());
        for (col, &i) in indices.iter().enumerate() {
            if i >= dim {
                return Err(Error::input(format!("coordinate index {i} out of range for R^{dim}")));
            }
            basis[(i, col)] = 1.0;
        }
        Self::from_orthonormal(basis)
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn codim(&self) -> usize {
        self.ambient_dim() - self.dim()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    /// Orthogonal projection `P = Q Qᵀ`.
    pub fn projection(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    /// Distance of `v` from the subspace relative to `‖v‖`, tested at `tol`.
    pub fn contains(&self, v: &DVector<f64>, tol: &Tolerance) -> bool {
        let residual = v - &self.basis * (self.basis.transpose() * v);
        residual.norm() <= tol.threshold(v.norm())
    }

    pub fn orthocomplement(&self, tol: &Tolerance) -> Result<Subspace> {
        let n = self.ambient_dim();
        if self.is_zero() {
            return Ok(Subspace::full(n));
        }
        Ok(Subspace {
            basis: kernel_basis(&self.basis.transpose(), tol)?,
        })
    }

    pub fn sum(&self, other: &Subspace, tol: &Tolerance) -> Result<Subspace> {
        check_dim(self.ambient_dim(), other.ambient_dim(), "subspace sum")?;
        let mut cols = Matrix::zeros(self.ambient_dim(), self.dim() + other.dim());
        cols.columns_mut(0, self.dim()).copy_from(&self.basis);
        cols.columns_mut(self.dim(), other.dim()).copy_from(&other.basis);
        Subspace::from_columns(&cols, tol)
    }

    /// `V ∩ W = (V⊥ + W⊥)⊥`.
    pub fn intersect(&self, other: &Subspace, tol: &Tolerance) -> Result<Subspace> {
        check_dim(self.ambient_dim(), other.ambient_dim(), "subspace intersection")?;
        self.orthocomplement(tol)?
            .sum(&other.orthocomplement(tol)?, tol)?
            .orthocomplement(tol)
    }

    /// Image of the subspace under a linear map of `R^N` into `R^M`.
    pub fn image_under(&self, map: &Matrix, tol: &Tolerance) -> Result<Subspace> {
        check_dim(self.ambient_dim(), map.ncols(), "subspace image")?;
        Subspace::from_columns(&(map * &self.basis), tol)
    }

    /// Same subspace equality test used throughout the tests: equal dimension
    /// and projections within `eps`.
    pub fn approx_eq(&self, other: &Subspace, eps: f64) -> bool {
        self.ambient_dim() == other.ambient_dim()
            && self.dim() == other.dim()
            && max_abs(&(self.projection() - other.projection())) <= eps
    }
}

/// Orthogonal projection onto `V`.
pub fn projection(v: &Subspace) -> Matrix {
    v.projection()
}

pub fn sum(v: &Subspace, w: &Subspace, tol: &Tolerance) -> Result<Subspace> {
    v.sum(w, tol)
}

pub fn intersect(v: &Subspace, w: &Subspace, tol: &Tolerance) -> Result<Subspace> {
    v.intersect(w, tol)
}

pub fn orthocomplement(v: &Subspace, tol: &Tolerance) -> Result<Subspace> {
    v.orthocomplement(tol)
}

/// Index of the Fredholm pair `(V, W)`: `dim(V∩W) − codim(V+W)`.
pub fn fredholm_pair_index(v: &Subspace, w: &Subspace, tol: &Tolerance) -> Result<i64> {
    check_dim(v.ambient_dim(), w.ambient_dim(), "Fredholm pair")?;
    let cap = v.intersect(w, tol)?.dim() as i64;
    let plus = v.sum(w, tol)?.codim() as i64;
    Ok(cap - plus)
}

/// Fredholm index of the compressed projection `P_{V⊥}|_W : W → V⊥`.
pub fn projection_restriction_index(v: &Subspace, w: &Subspace, tol: &Tolerance) -> Result<i64> {
    check_dim(v.ambient_dim(), w.ambient_dim(), "projection restriction")?;
    let vperp = v.orthocomplement(tol)?;
    // Matrix of P_{V⊥}|_W in orthonormal coordinates of W and V⊥.
    let op = vperp.basis().transpose() * w.basis();
    let rank = numerical_rank(&op, tol)? as i64;
    let kernel = w.dim() as i64 - rank;
    let cokernel = vperp.dim() as i64 - rank;
    Ok(kernel - cokernel)
}

/// Relative dimension `dim(V∩W⊥) − dim(W∩V⊥)`.
pub fn relative_dimension(v: &Subspace, w: &Subspace, tol: &Tolerance) -> Result<i64> {
    check_dim(v.ambient_dim(), w.ambient_dim(), "relative dimension")?;
    let a = v.intersect(&w.orthocomplement(tol)?, tol)?.dim() as i64;
    let b = w.intersect(&v.orthocomplement(tol)?, tol)?.dim() as i64;
    Ok(a - b)
}

/// Kato's minimum gap `γ(V, W)`: the reduced minimum modulus of
/// `P_{V⊥}|_W`, i.e. the smallest nonzero singular value of that map.
/// Returns 1 when `W ⊆ V` (no nonzero singular values).
pub fn kato_gamma(v: &Subspace, w: &Subspace, tol: &Tolerance) -> Result<f64> {
    check_dim(v.ambient_dim(), w.ambient_dim(), "Kato gamma")?;
    if w.is_zero() || v.dim() == v.ambient_dim() {
        return Ok(1.0);
    }
    let vperp = v.orthocomplement(tol)?;
    let op = vperp.basis().transpose() * w.basis();
    let dec = svd(&op)?;
    let cut = tol.threshold(1.0);
    Ok(dec
        .singular_values
        .iter()
        .copied()
        .filter(|&s| s > cut)
        .fold(1.0f64, f64::min))
}

/// Gap metric `‖P_V − P_W‖`.
pub fn gap_distance(v: &Subspace, w: &Subspace, tol: &Tolerance) -> Result<f64> {
    check_dim(v.ambient_dim(), w.ambient_dim(), "gap distance")?;
    op_norm_sym(&(v.projection() - w.projection()), tol)
}

/// Orthogonal projection of `R^{k0} ⊕ R^{k1}` onto the graph of
/// `L: R^{k0} → R^{k1}` (`L` is `k1×k0`).
pub fn graph_projection(l: &Matrix) -> Result<Matrix> {
    let (k1, k0) = l.shape();
    let lt = l.transpose();
    let inner = Matrix::identity(k1, k1) + l * &lt;
    let s = nalgebra::Cholesky::new(inner)
        .ok_or_else(|| Error::numerical("I + LLᵀ is not positive definite"))?
        .inverse();
    let mut p = Matrix::zeros(k0 + k1, k0 + k1);
    p.view_mut((0, 0), (k0, k0))
        .copy_from(&(Matrix::identity(k0, k0) - &lt * &s * l));
    p.view_mut((0, k0), (k0, k1)).copy_from(&(&lt * &s));
    p.view_mut((k0, 0), (k1, k0)).copy_from(&(&s * l));
    p.view_mut((k0, k0), (k1, k1))
        .copy_from(&(Matrix::identity(k1, k1) - &s));
    Ok(p)
}

/// A sampled continuous family of subspaces of constant dimension.
#[derive(Debug, Clone)]
pub struct SubspacePath {
    samples: Vec<(f64, Subspace)>,
}

impl SubspacePath {
    pub fn new(samples: Vec<(f64, Subspace)>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::input("subspace path needs at least one sample"))?;
        let (n, k) = (first.1.ambient_dim(), first.1.dim());
        for pair in samples.windows(2) {
            if pair[1].0.partial_cmp(&pair[0].0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::input("subspace path times must be strictly increasing"));
            }
        }
        for (t, s) in &samples {
            if !t.is_finite() {
                return Err(Error::input("non-finite sample time"));
            }
            check_dim(n, s.ambient_dim(), "subspace path ambient dimension")?;
            check_dim(k, s.dim(), "subspace path dimension (must be constant)")?;
        }
        Ok(SubspacePath { samples })
    }

    /// Samples `t ↦ family(t)` on `count` uniform points of `[a, b]`.
    pub fn sample<F>(a: f64, b: f64, count: usize, family: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<Subspace>,
    {
        if count < 2 || b.partial_cmp(&a) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::input("need at least two samples on a nondegenerate interval"));
        }
        let samples = (0..count)
            .map(|i| {
                let t = a + (b - a) * i as f64 / (count - 1) as f64;
                family(t).map(|s| (t, s))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    pub fn samples(&self) -> &[(f64, Subspace)] {
        &self.samples
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|(t, _)| *t).collect()
    }

    pub fn ambient_dim(&self) -> usize {
        self.samples[0].1.ambient_dim()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].1.dim()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }
}

/// Orthogonal maps `Φ_t` carrying a reference subspace onto each sample of a
/// subspace path.
#[derive(Debug, Clone)]
pub struct PathLift {
    pub times: Vec<f64>,
    pub frames: Vec<Matrix>,
    /// Number of bisections performed to keep consecutive gaps small.
    pub refinements: usize,
}

/// Callback producing intermediate members of the family during refinement.
pub type Refiner<'a> = &'a dyn Fn(f64) -> Result<Subspace>;

/// Kato's direct rotation taking `Im P` onto `Im P'` (requires `‖P − P'‖ < 1`):
/// `U = (P'P + (I−P')(I−P)) (I − (P−P')²)^{-1/2}`.
pub fn kato_rotation(p: &Matrix, p_next: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    let n = p.nrows();
    let id = Matrix::identity(n, n);
    let d = p - p_next;
    let core = &id - &d * &d;
    let eig = eig_sym(&core, tol)?;
    if eig.values[0] <= 1e-12 {
        return Err(Error::numerical("Kato rotation undefined: subspaces at gap distance 1"));
    }
    let inv_sqrt = DVector::from_iterator(n, eig.values.iter().map(|x| 1.0 / x.sqrt()));
    let root = &eig.vectors * Matrix::from_diagonal(&inv_sqrt) * eig.vectors.transpose();
    let mix = p_next * p + (&id - p_next) * (&id - p);
    Ok(mix * root)
}

/// Lifts a subspace path to orthogonal maps `Φ_t` with `Φ_t(W_ref) = V_t`.
///
/// `initial` must be orthogonal and map `w_ref` onto the first sample.
/// Consecutive samples are joined by Kato rotations; intervals whose gap
/// exceeds [`LIFT_TARGET_GAP`] are bisected through `refine` when given.
pub fn lift_path(
    path: &SubspacePath,
    w_ref: &Subspace,
    initial: &Matrix,
    refine: Option<Refiner<'_>>,
    tol: &Tolerance,
) -> Result<PathLift> {
    let n = path.ambient_dim();
    check_dim(n, w_ref.ambient_dim(), "reference subspace")?;
    check_dim(path.dim(), w_ref.dim(), "reference subspace dimension")?;
    if initial.shape() != (n, n) {
        return Err(Error::input("initial isometry has the wrong shape"));
    }
    if orthonormality_defect(initial) > 1e-9 {
        return Err(Error::input("initial map is not orthogonal"));
    }
    let start = w_ref.image_under(initial, tol)?;
    let first = &path.samples()[0];
    if gap_distance(&start, &first.1, tol)? > 1e-7 {
        return Err(Error::input(
            "initial map does not carry the reference subspace onto the first sample",
        ));
    }

    let mut frames = Vec::with_capacity(path.samples().len());
    let mut refinements = 0;
    frames.push(initial.clone());
    for pair in path.samples().windows(2) {
        let (t0, s0) = (&pair[0].0, &pair[0].1);
        let (t1, s1) = (&pair[1].0, &pair[1].1);
        let step = rotation_between(*t0, s0, *t1, s1, refine, 0, &mut refinements, tol)?;
        let next = step * frames.last().expect("nonempty");
        frames.push(next);
    }
    Ok(PathLift {
        times: path.times(),
        frames,
        refinements,
    })
}

#[allow(clippy::too_many_arguments)]
fn rotation_between(
    t0: f64,
    s0: &Subspace,
    t1: f64,
    s1: &Subspace,
    refine: Option<Refiner<'_>>,
    depth: usize,
    refinements: &mut usize,
    tol: &Tolerance,
) -> Result<Matrix> {
    let gap = gap_distance(s0, s1, tol)?;
    if gap > LIFT_TARGET_GAP {
        if let Some(cb) = refine {
            if depth < LIFT_MAX_BISECTIONS {
                *refinements += 1;
                let tm = 0.5 * (t0 + t1);
                let sm = cb(tm)?;
                check_dim(s0.dim(), sm.dim(), "refined subspace dimension")?;
                let left = rotation_between(t0, s0, tm, &sm, refine, depth + 1, refinements, tol)?;
                let right = rotation_between(tm, &sm, t1, s1, refine, depth + 1, refinements, tol)?;
                return Ok(right * left);
            }
        }
        if gap >= LIFT_HARD_GAP {
            return Err(Error::numerical(format!(
                "cannot lift subspace path on [{t0}, {t1}]: gap {gap:.6} reaches 1"
            )));
        }
    }
    kato_rotation(&s0.projection(), &s1.projection(), tol)
}

/// A self-adjoint involution `𝔍 = 𝔍ᵀ`, `𝔍² = I`.
#[derive(Debug, Clone)]
pub struct SymmetryOperator {
    matrix: Matrix,
}

impl SymmetryOperator {
    pub fn new(matrix: Matrix) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::input("symmetry must be square"));
        }
        if crate::linalg::symmetry_defect(&matrix) > 1e-10 {
            return Err(Error::input("symmetry operator is not self-adjoint"));
        }
        if max_abs(&(&matrix * &matrix - Matrix::identity(n, n))) > 1e-9 {
            return Err(Error::input("symmetry operator does not square to the identity"));
        }
        Ok(SymmetryOperator { matrix })
    }

    /// `P_W − P_{W⊥}` for the given subspace `W`.
    pub fn from_positive_space(w: &Subspace) -> Self {
        let n = w.ambient_dim();
        SymmetryOperator {
            matrix: w.projection() * 2.0 - Matrix::identity(n, n),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `ker(𝔍 − I)`.
    pub fn positive_space(&self, tol: &Tolerance) -> Result<Subspace> {
        let n = self.dim();
        Ok(Subspace {
            basis: kernel_basis(&(&self.matrix - Matrix::identity(n, n)), tol)?,
        })
    }
}

/// Orthogonal `U_t` with `U_t 𝔍_t U_tᵀ = 𝔍_0` along a sampled path of
/// symmetries, obtained by lifting the path of positive eigenspaces.
pub fn conjugate_symmetries_to_constant(
    symmetries: &[SymmetryOperator],
    tol: &Tolerance,
) -> Result<(Vec<Matrix>, SymmetryOperator)> {
    let first = symmetries
        .first()
        .ok_or_else(|| Error::input("empty symmetry path"))?;
    let n = first.dim();
    let spaces = symmetries
        .iter()
        .enumerate()
        .map(|(i, s)| {
            check_dim(n, s.dim(), "symmetry path dimension")?;
            Ok((i as f64, s.positive_space(tol)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let path = SubspacePath::new(spaces)?;
    let w_ref = path.samples()[0].1.clone();
    let lift = lift_path(&path, &w_ref, &Matrix::identity(n, n), None, tol)?;
    let us = lift.frames.into_iter().map(|phi| phi.transpose()).collect();
    Ok((us, first.clone()))
}
