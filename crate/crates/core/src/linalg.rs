//! Dense linear-algebra kernels shared by every other module.
//!
//! Everything here is deterministic: symmetric eigenproblems use cyclic
//! Jacobi rotations, singular values come from one-sided (Hestenes) Jacobi
//! orthogonalization, and all rank decisions go through [`Tolerance`] relative
//! to the largest singular value or eigenvalue magnitude of the input.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real matrix. Storage is column-major (nalgebra); constructors taking
/// flat data expect row-major order.
pub type Matrix = DMatrix<f64>;

const MAX_JACOBI_SWEEPS: usize = 100;
const MAX_SVD_SWEEPS: usize = 80;

/// Thresholds deciding when a computed quantity counts as zero.
///
/// A value `x` is numerically zero relative to a scale `s` iff
/// `|x| <= abs_zero + rel_zero * s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel_zero: f64,
    pub abs_zero: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel_zero: 1e-9,
            abs_zero: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn new(rel_zero: f64, abs_zero: f64) -> Result<Self> {
        if !(rel_zero > 0.0 && rel_zero.is_finite() && abs_zero > 0.0 && abs_zero.is_finite()) {
            return Err(Error::input(format!(
                "tolerances must be finite and strictly positive (rel_zero={rel_zero}, abs_zero={abs_zero})"
            )));
        }
        Ok(Tolerance { rel_zero, abs_zero })
    }

    /// Default absolute floor with a custom relative threshold.
    pub fn with_rel(rel_zero: f64) -> Result<Self> {
        Self::new(rel_zero, Tolerance::default().abs_zero)
    }

    #[inline]
    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs_zero + self.rel_zero * scale
    }

    #[inline]
    pub fn is_zero(&self, x: f64, scale: f64) -> bool {
        x.abs() <= self.threshold(scale)
    }
}

/// Builds a matrix from row-major data, rejecting NaN and infinities.
pub fn matrix_from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Matrix> {
    if data.len() != rows * cols {
        return Err(Error::input(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            data.len()
        )));
    }
    if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
        return Err(Error::input(format!("non-finite matrix entry {bad}")));
    }
    Ok(Matrix::from_row_slice(rows, cols, data))
}

/// Builds a matrix from a list of rows, rejecting ragged input and non-finite entries.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::input("ragged matrix rows"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    matrix_from_row_major(rows.len(), ncols, &flat)
}

/// Builds a matrix whose columns are the given vectors (all of length `dim`).
pub fn matrix_from_columns(dim: usize, columns: &[Vec<f64>]) -> Result<Matrix> {
    if let Some(c) = columns.iter().find(|c| c.len() != dim) {
        return Err(Error::input(format!(
            "column of length {} in ambient dimension {dim}",
            c.len()
        )));
    }
    let flat: Vec<f64> = columns.iter().flatten().copied().collect();
    if let Some(bad) = flat.iter().find(|x| !x.is_finite()) {
        return Err(Error::input(format!("non-finite vector entry {bad}")));
    }
    Ok(Matrix::from_column_slice(dim, columns.len(), &flat))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Largest entrywise asymmetry `|a_ij - a_ji|`.
pub fn symmetry_defect(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Checks squareness and symmetry (relative to the entry scale) and returns
/// the exactly symmetrized matrix.
pub fn checked_symmetric(a: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::input(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_finite(a) {
        return Err(Error::input("matrix has non-finite entries"));
    }
    let defect = symmetry_defect(a);
    if defect > tol.threshold(max_abs(a)) {
        return Err(Error::input(format!(
            "matrix is not symmetric (max asymmetry {defect:.3e})"
        )));
    }
    Ok(symmetrize(a))
}

/// Eigen-decomposition of a symmetric matrix: `A = Q diag(values) Qᵀ`,
/// eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymmetricEigen {
    /// Largest eigenvalue magnitude.
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn inertia(&self, tol: &Tolerance) -> Inertia {
        Inertia::from_eigenvalues(&self.values, tol)
    }
}

/// Counts of negative, zero and positive eigenvalues at a tolerance, plus the
/// margins needed to judge how well the zero band separates the clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
    /// Smallest `|λ|` among eigenvalues outside the zero band (`inf` if none).
    pub min_nonzero_abs: f64,
    /// Largest `|λ|` among eigenvalues inside the zero band (0 if none).
    pub max_zero_abs: f64,
    /// Half-width of the zero band that was applied.
    pub band: f64,
}

impl Inertia {
    pub fn from_eigenvalues(values: &[f64], tol: &Tolerance) -> Self {
        let radius = values.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let band = tol.threshold(radius);
        let mut out = Inertia {
            negative: 0,
            zero: 0,
            positive: 0,
            min_nonzero_abs: f64::INFINITY,
            max_zero_abs: 0.0,
            band,
        };
        for &x in values {
            if x.abs() <= band {
                out.zero += 1;
                out.max_zero_abs = out.max_zero_abs.max(x.abs());
            } else {
                if x < 0.0 {
                    out.negative += 1;
                } else {
                    out.positive += 1;
                }
                out.min_nonzero_abs = out.min_nonzero_abs.min(x.abs());
            }
        }
        out
    }

    /// Distance from the band edge to the nearest eigenvalue on either side.
    pub fn separation(&self) -> f64 {
        (self.min_nonzero_abs - self.band).min(self.band - self.max_zero_abs)
    }

    pub fn signature(&self) -> i64 {
        self.positive as i64 - self.negative as i64
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn eig_sym(a: &Matrix, tol: &Tolerance) -> Result<SymmetricEigen> {
    let a = checked_symmetric(a, tol)?;
    let (values, vectors) = jacobi_eigen(&a, true)?;
    Ok(SymmetricEigen {
        values,
        vectors: vectors.expect("vectors requested"),
    })
}

/// Eigenvalues only (ascending); skips the eigenvector accumulation.
pub fn eigvals_sym(a: &Matrix, tol: &Tolerance) -> Result<Vec<f64>> {
    let a = checked_symmetric(a, tol)?;
    Ok(jacobi_eigen(&a, false)?.0)
}

fn jacobi_eigen(a: &Matrix, want_vectors: bool) -> Result<(Vec<f64>, Option<Matrix>)> {
    let n = a.nrows();
    // Row-major working copy; only the strict upper triangle is rotated.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = a[(i, j)];
        }
    }
    // Eigenvectors stored as rows so that rotations touch contiguous memory.
    let mut vt: Vec<f64> = if want_vectors {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        v
    } else {
        Vec::new()
    };
    let mut d: Vec<f64> = (0..n).map(|i| w[i * n + i]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    let mut converged = n <= 1;
    for sweep in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += w[p * n + q].abs();
            }
        }
        if off == 0.0 {
            converged = true;
            break;
        }
        let thresh = if sweep < 3 {
            0.2 * off / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[p * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    w[p * n + q] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                w[p * n + q] = 0.0;
                let rot = |x: f64, y: f64| (x - s * (y + x * tau), y + s * (x - y * tau));
                for j in 0..p {
                    let (x, y) = rot(w[j * n + p], w[j * n + q]);
                    w[j * n + p] = x;
                    w[j * n + q] = y;
                }
                for j in (p + 1)..q {
                    let (x, y) = rot(w[p * n + j], w[j * n + q]);
                    w[p * n + j] = x;
                    w[j * n + q] = y;
                }
                for j in (q + 1)..n {
                    let (x, y) = rot(w[p * n + j], w[q * n + j]);
                    w[p * n + j] = x;
                    w[q * n + j] = y;
                }
                if want_vectors {
                    let (rp, rq) = vt.split_at_mut(q * n);
                    let rp = &mut rp[p * n..p * n + n];
                    let rq = &mut rq[..n];
                    for j in 0..n {
                        let (x, y) = rot(rp[j], rq[j]);
                        rp[j] = x;
                        rq[j] = y;
                    }
                }
            }
        }
        for i in 0..n {
            b[i] += z[i];
            d[i] = b[i];
            z[i] = 0.0;
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "Jacobi eigenvalue iteration did not converge in {MAX_JACOBI_SWEEPS} sweeps (n={n})"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = want_vectors.then(|| {
        let mut q = Matrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            for row in 0..n {
                q[(row, col)] = vt[k * n + row];
            }
        }
        q
    });
    Ok((values, vectors))
}

/// Thin singular value decomposition `A V = U Σ`, singular values descending.
///
/// `u` has one column per column of `A`; columns belonging to zero singular
/// values are left at zero. `v` is square and orthogonal.
#[derive(Debug, Clone)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    pub u: Matrix,
    pub v: Matrix,
}

impl Svd {
    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `tol` relative to the largest one.
    pub fn rank(&self, tol: &Tolerance) -> usize {
        let cut = tol.threshold(self.largest());
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }
}

/// One-sided Jacobi SVD.
pub fn svd(a: &Matrix) -> Result<Svd> {
    let m = a.nrows();
    let n = a.ncols();
    let mut u = a.clone();
    let mut v = Matrix::identity(n, n);
    let fro2: f64 = a.iter().map(|x| x * x).sum();
    let floor = (f64::EPSILON * f64::EPSILON) * fro2 * 1e-6;
    let eps = f64::EPSILON * 4.0;

    let mut converged = n <= 1 || fro2 == 0.0;
    for _ in 0..MAX_SVD_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let cp = u.column(p);
                    let cq = u.column(q);
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if alpha <= floor || beta <= floor {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut u, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "one-sided Jacobi SVD did not converge in {MAX_SVD_SWEEPS} sweeps ({m}x{n})"
        )));
    }

    let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut uu = Matrix::zeros(m, n);
    let mut vv = Matrix::zeros(n, n);
    let mut sv = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        let s = norms[k];
        sv.push(s);
        if s > 0.0 {
            uu.set_column(col, &(u.column(k) / s));
        }
        vv.set_column(col, &v.column(k));
    }
    Ok(Svd {
        singular_values: sv,
        u: uu,
        v: vv,
    })
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.nrows();
    let data = m.as_mut_slice();
    let (left, right) = data.split_at_mut(q * rows);
    let cp = &mut left[p * rows..p * rows + rows];
    let cq = &mut right[..rows];
    for i in 0..rows {
        let x = cp[i];
        let y = cq[i];
        cp[i] = c * x - s * y;
        cq[i] = s * x + c * y;
    }
}

/// Numerical rank relative to the largest singular value.
pub fn numerical_rank(a: &Matrix, tol: &Tolerance) -> Result<usize> {
    if a.is_empty() {
        return Ok(0);
    }
    Ok(svd(a)?.rank(tol))
}

/// Orthonormal basis (as columns) of the column space of `columns`.
pub fn orthonormal_basis(columns: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    let dim = columns.nrows();
    if columns.ncols() == 0 || dim == 0 {
        return Ok(Matrix::zeros(dim, 0));
    }
    let dec = svd(columns)?;
    let r = dec.rank(tol);
    let selected = dec.u.columns(0, r).into_owned();
    Ok(reorthonormalize(selected))
}

/// Orthonormal basis of `{x : A x = 0}`.
pub fn kernel_basis(a: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return Ok(Matrix::identity(n, n));
    }
    let dec = svd(a)?;
    let r = dec.rank(tol);
    let selected = dec.v.columns(r, n - r).into_owned();
    Ok(reorthonormalize(selected))
}

/// Kernel with the rank cut taken relative to an external `scale` rather
/// than the largest singular value, for matrices that may be entirely small.
pub fn kernel_basis_at_scale(a: &Matrix, scale: f64, tol: &Tolerance) -> Result<Matrix> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return Ok(Matrix::identity(n, n));
    }
    let dec = svd(a)?;
    let cut = tol.threshold(scale);
    let r = dec.singular_values.iter().filter(|&&s| s > cut).count();
    Ok(reorthonormalize(dec.v.columns(r, n - r).into_owned()))
}

/// Two passes of modified Gram–Schmidt over nearly orthonormal columns.
fn reorthonormalize(mut q: Matrix) -> Matrix {
    let k = q.ncols();
    for _ in 0..2 {
        for j in 0..k {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let ci = q.column(i).into_owned();
                q.column_mut(j).axpy(-proj, &ci, 1.0);
            }
            let nrm = q.column(j).norm();
            if nrm > 0.0 {
                q.column_mut(j).scale_mut(1.0 / nrm);
            }
        }
    }
    q
}

/// Largest singular value.
pub fn op_norm(a: &Matrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(svd(a)?.largest())
}

/// Operator 2-norm of a symmetric matrix (its spectral radius).
pub fn op_norm_sym(a: &Matrix, tol: &Tolerance) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let vals = eigvals_sym(a, tol)?;
    Ok(vals.iter().fold(0.0, |acc, x| acc.max(x.abs())))
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    nalgebra::Cholesky::new(symmetrize(m))
        .map(|c| c.l())
        .ok_or_else(|| Error::input("Gram matrix is not positive definite"))
}

/// Generalized symmetric eigenproblem `A x = λ M x` with `M` positive
/// definite, reduced through the Cholesky factor of `M` to the plain
/// symmetric case. Eigenvectors are `M`-orthonormal.
pub fn pencil_eigen(a: &Matrix, m: &Matrix, tol: &Tolerance) -> Result<SymmetricEigen> {
    let c = reduce_pencil(a, m, tol)?.0;
    let (values, y) = jacobi_eigen(&c, true)?;
    let l = cholesky(m)?;
    let x = l
        .tr_solve_lower_triangular(&y.expect("vectors requested"))
        .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
    Ok(SymmetricEigen { values, vectors: x })
}

/// Pencil eigenvalues only.
pub fn pencil_eigvals(a: &Matrix, m: &Matrix, tol: &Tolerance) -> Result<Vec<f64>> {
    let c = reduce_pencil(a, m, tol)?.0;
    Ok(jacobi_eigen(&c, false)?.0)
}

fn reduce_pencil(a: &Matrix, m: &Matrix, tol: &Tolerance) -> Result<(Matrix, Matrix)> {
    let a = checked_symmetric(a, tol)?;
    if m.shape() != a.shape() {
        return Err(Error::input("Gram matrix shape differs from form matrix"));
    }
    let l = cholesky(m)?;
    let y = l
        .solve_lower_triangular(&a)
        .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
    Ok((symmetrize(&c), l))
}

/// Block-diagonal embedding `[[a, 0], [0, b]]`.
pub fn block_diag(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// `‖QᵀQ − I‖_max` for a matrix with (supposedly) orthonormal columns.
pub fn orthonormality_defect(q: &Matrix) -> f64 {
    let k = q.ncols();
    max_abs(&(q.transpose() * q - Matrix::identity(k, k)))
}
