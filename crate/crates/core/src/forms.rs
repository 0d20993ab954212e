//! Symmetric bilinear forms `B(x, y) = xᵀ A y` on `R^N`, optionally relative
//! to a Gram matrix `M`, in which case the represented operator is `M⁻¹A`
//! and every index count comes from the pencil `(A, M)`.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::grassmann::{relative_dimension, Subspace};
use crate::linalg::{
    checked_symmetric, cholesky, eig_sym, kernel_basis_at_scale, max_abs, op_norm_sym, pencil_eigen,
    pencil_eigvals, eigvals_sym, Inertia, Matrix, SymmetricEigen, Tolerance,
};

#[derive(Debug, Clone)]
pub struct SymmetricForm {
    a: Matrix,
    gram: Option<Matrix>,
}

impl SymmetricForm {
    pub fn new(a: Matrix) -> Result<Self> {
        let a = checked_symmetric(&a, &Tolerance::default())?;
        Ok(SymmetricForm { a, gram: None })
    }

    pub fn with_gram(a: Matrix, gram: Matrix) -> Result<Self> {
        let a = checked_symmetric(&a, &Tolerance::default())?;
        check_dim(a.nrows(), gram.nrows(), "Gram matrix rows")?;
        check_dim(a.ncols(), gram.ncols(), "Gram matrix columns")?;
        let gram = checked_symmetric(&gram, &Tolerance::default())?;
        cholesky(&gram)?;
        Ok(SymmetricForm {
            a,
            gram: Some(gram),
        })
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn gram(&self) -> Option<&Matrix> {
        self.gram.as_ref()
    }

    /// `B(x, y)`.
    pub fn eval(&self, x: &nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>) -> f64 {
        x.dot(&(&self.a * y))
    }

    /// Eigenvalues of the represented operator, ascending.
    pub fn eigenvalues(&self, tol: &Tolerance) -> Result<Vec<f64>> {
        match &self.gram {
            Some(m) => pencil_eigvals(&self.a, m, tol),
            None => eigvals_sym(&self.a, tol),
        }
    }

    fn eigen(&self, tol: &Tolerance) -> Result<SymmetricEigen> {
        match &self.gram {
            Some(m) => pencil_eigen(&self.a, m, tol),
            None => eig_sym(&self.a, tol),
        }
    }

    pub fn inertia(&self, tol: &Tolerance) -> Result<Inertia> {
        Ok(Inertia::from_eigenvalues(&self.eigenvalues(tol)?, tol))
    }

    /// Matrix of the restriction `B|_{V×V}` in the orthonormal coordinates of
    /// `V` (with the Gram matrix compressed the same way).
    pub fn restrict(&self, v: &Subspace) -> Result<SymmetricForm> {
        check_dim(self.dim(), v.ambient_dim(), "restriction subspace")?;
        let q = v.basis();
        let a = crate::linalg::symmetrize(&(q.transpose() * &self.a * q));
        let gram = self
            .gram
            .as_ref()
            .map(|m| crate::linalg::symmetrize(&(q.transpose() * m * q)));
        Ok(SymmetricForm { a, gram })
    }

    /// Pulls the form back along a linear map: `SᵀAS` (and `SᵀMS`).
    pub fn congruent(&self, s: &Matrix) -> Result<SymmetricForm> {
        check_dim(self.dim(), s.nrows(), "congruence")?;
        let a = crate::linalg::symmetrize(&(s.transpose() * &self.a * s));
        let gram = self
            .gram
            .as_ref()
            .map(|m| crate::linalg::symmetrize(&(s.transpose() * m * s)));
        Ok(SymmetricForm { a, gram })
    }
}

pub fn morse_index(b: &SymmetricForm, tol: &Tolerance) -> Result<usize> {
    Ok(b.inertia(tol)?.negative)
}

pub fn coindex(b: &SymmetricForm, tol: &Tolerance) -> Result<usize> {
    Ok(b.inertia(tol)?.positive)
}

pub fn nullity(b: &SymmetricForm, tol: &Tolerance) -> Result<usize> {
    Ok(b.inertia(tol)?.zero)
}

pub fn restrict(b: &SymmetricForm, v: &Subspace) -> Result<SymmetricForm> {
    b.restrict(v)
}

/// Negative, positive and null eigenspaces of the represented operator.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub v_minus: Subspace,
    pub v_plus: Subspace,
    pub kernel: Subspace,
    pub eigenvalues: Vec<f64>,
    pub inertia: Inertia,
}

pub fn spectral_split(b: &SymmetricForm, tol: &Tolerance) -> Result<SpectralSplit> {
    let eig = b.eigen(tol)?;
    let inertia = eig.inertia(tol);
    let n = b.dim();
    let pick = |range: std::ops::Range<usize>| -> Result<Subspace> {
        let cols = eig.vectors.columns(range.start, range.len()).into_owned();
        if cols.ncols() == 0 {
            return Ok(Subspace::zero(n));
        }
        Subspace::from_columns(&cols, &Tolerance::default())
    };
    // eigenvalues are ascending: negatives, then the band, then positives
    let neg = inertia.negative;
    let zero = inertia.zero;
    Ok(SpectralSplit {
        v_minus: pick(0..neg)?,
        kernel: pick(neg..neg + zero)?,
        v_plus: pick(neg + zero..n)?,
        eigenvalues: eig.values,
        inertia,
    })
}

/// `V^{⊥B} = {x : B(v, x) = 0 ∀ v ∈ V}`, the kernel of `Vᵀ A`.
pub fn b_orthocomplement(b: &SymmetricForm, v: &Subspace, tol: &Tolerance) -> Result<Subspace> {
    check_dim(b.dim(), v.ambient_dim(), "B-orthogonal complement")?;
    if v.is_zero() {
        return Ok(Subspace::full(b.dim()));
    }
    let constraints = v.basis().transpose() * b.matrix();
    // rows may all be tiny when V sits inside the kernel; cut against ‖A‖
    let scale = max_abs(b.matrix());
    Subspace::from_orthonormal(kernel_basis_at_scale(&constraints, scale, tol)?)
}

/// `ker T`, taken from the zero band of the spectrum.
pub fn kernel(b: &SymmetricForm, tol: &Tolerance) -> Result<Subspace> {
    Ok(spectral_split(b, tol)?.kernel)
}

/// `‖ZᵀAZ‖ ≤ tol·‖A‖` in operator norm.
pub fn is_isotropic(b: &SymmetricForm, z: &Subspace, tol: &Tolerance) -> Result<bool> {
    check_dim(b.dim(), z.ambient_dim(), "isotropic test")?;
    if z.is_zero() {
        return Ok(true);
    }
    let compressed = crate::linalg::symmetrize(&(z.basis().transpose() * b.matrix() * z.basis()));
    let scale = op_norm_sym(b.matrix(), tol)?;
    Ok(op_norm_sym(&compressed, tol)? <= tol.threshold(scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IsotropicBounds {
    pub dim: usize,
    pub morse_index: usize,
    pub coindex: usize,
    pub kernel_intersection: usize,
}

impl IsotropicBounds {
    /// `dim Z ≤ n₋ + dim(Z∩ker)` and `dim Z ≤ n₊ + dim(Z∩ker)`.
    pub fn hold(&self) -> bool {
        self.dim <= self.morse_index + self.kernel_intersection
            && self.dim <= self.coindex + self.kernel_intersection
    }
}

pub fn isotropic_bounds(b: &SymmetricForm, z: &Subspace, tol: &Tolerance) -> Result<IsotropicBounds> {
    if !is_isotropic(b, z, tol)? {
        return Err(Error::input("subspace is not isotropic for the form"));
    }
    let split = spectral_split(b, tol)?;
    Ok(IsotropicBounds {
        dim: z.dim(),
        morse_index: split.inertia.negative,
        coindex: split.inertia.positive,
        kernel_intersection: z.intersect(&split.kernel, tol)?.dim(),
    })
}

/// The three terms `n₋(B|V^⊥B) + dim(V∩V^⊥B) − dim(V∩ker T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RestrictionTerms {
    pub morse_on_b_complement: usize,
    pub v_cap_b_complement: usize,
    pub v_cap_kernel: usize,
}

impl RestrictionTerms {
    pub fn value(&self) -> i64 {
        self.morse_on_b_complement as i64 + self.v_cap_b_complement as i64
            - self.v_cap_kernel as i64
    }
}

pub fn restriction_terms(b: &SymmetricForm, v: &Subspace, tol: &Tolerance) -> Result<RestrictionTerms> {
    let vb = b_orthocomplement(b, v, tol)?;
    let ker = kernel(b, tol)?;
    Ok(RestrictionTerms {
        morse_on_b_complement: morse_index(&b.restrict(&vb)?, tol)?,
        v_cap_b_complement: v.intersect(&vb, tol)?.dim(),
        v_cap_kernel: v.intersect(&ker, tol)?.dim(),
    })
}

/// Negative eigenspace of `B|_V`, embedded back into `R^N`.
pub fn embedded_restricted_negative_space(
    b: &SymmetricForm,
    v: &Subspace,
    tol: &Tolerance,
) -> Result<Subspace> {
    let restricted = b.restrict(v)?;
    let local = spectral_split(&restricted, tol)?.v_minus;
    if local.is_zero() {
        return Ok(Subspace::zero(b.dim()));
    }
    Subspace::from_columns(&(v.basis() * local.basis()), tol)
}

/// Relative dimension of `V⁻(T)` against the embedded `V⁻(T̃)` of the
/// restriction to `V`, both directly and from the restriction terms.
pub fn negative_space_relative_dimension(
    b: &SymmetricForm,
    v: &Subspace,
    tol: &Tolerance,
) -> Result<(i64, i64)> {
    check_dim(b.dim(), v.ambient_dim(), "restriction subspace")?;
    let full = spectral_split(b, tol)?.v_minus;
    let restricted = embedded_restricted_negative_space(b, v, tol)?;
    let direct = relative_dimension(&full, &restricted, tol)?;
    Ok((direct, restriction_terms(b, v, tol)?.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn diag(d: &[f64]) -> SymmetricForm {
        SymmetricForm::diagonal(d).unwrap()
    }

    fn diagonal_line() -> Subspace {
        Subspace::span(2, &[vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]], &tol()).unwrap()
    }

    #[test]
    fn split_of_diagonal_form() {
        let s = spectral_split(&diag(&[1.0, -1.0, 0.0]), &tol()).unwrap();
        assert!(s.v_plus.approx_eq(&Subspace::coordinate(3, &[0]).unwrap(), 1e-14));
        assert!(s.v_minus.approx_eq(&Subspace::coordinate(3, &[1]).unwrap(), 1e-14));
        assert!(s.kernel.approx_eq(&Subspace::coordinate(3, &[2]).unwrap(), 1e-14));
    }

    #[test]
    fn positive_definite_has_empty_negative_space() {
        let s = spectral_split(&diag(&[1.0, 2.0, 3.0]), &tol()).unwrap();
        assert_eq!(s.v_minus.dim(), 0);
        assert_eq!(s.kernel.dim(), 0);
    }

    #[test]
    fn tiny_eigenvalue_lands_in_kernel() {
        // Q diag(1e-15, 2, -3) Qᵀ with a fixed rotation Q
        let (c, s) = (0.6, 0.8);
        let q = Matrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let d = Matrix::from_diagonal(&DVector::from_vec(vec![1e-15, 2.0, -3.0]));
        let a = crate::linalg::symmetrize(&(&q * d * q.transpose()));
        let split = spectral_split(&SymmetricForm::new(a).unwrap(), &tol()).unwrap();
        assert_eq!(split.kernel.dim(), 1);
        let e = DVector::from_vec(vec![c, s, 0.0]);
        assert!(split.kernel.contains(&e, &Tolerance::with_rel(1e-8).unwrap()));
    }

    #[test]
    fn index_counts() {
        let t = tol();
        assert_eq!(morse_index(&diag(&[-2.0, -1.0, 3.0]), &t).unwrap(), 2);
        let zero = SymmetricForm::new(Matrix::zeros(4, 4)).unwrap();
        assert_eq!(morse_index(&zero, &t).unwrap(), 0);
        assert_eq!(nullity(&zero, &t).unwrap(), 4);
        let pencil = SymmetricForm::with_gram(
            Matrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0])),
            Matrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])),
        )
        .unwrap();
        assert_eq!(morse_index(&pencil, &t).unwrap(), 1);
        let vals = pencil.eigenvalues(&t).unwrap();
        assert!((vals[0] + 0.25).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gram_must_be_positive_definite() {
        let err = SymmetricForm::with_gram(Matrix::identity(2, 2), -Matrix::identity(2, 2));
        assert!(err.unwrap_err().is_input());
        assert!(SymmetricForm::new(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn restriction_examples() {
        let b = diag(&[1.0, -1.0]);
        let r = b.restrict(&Subspace::coordinate(2, &[0]).unwrap()).unwrap();
        assert_eq!(r.matrix(), &Matrix::from_element(1, 1, 1.0));
        let r = b.restrict(&diagonal_line()).unwrap();
        assert!(r.matrix()[(0, 0)].abs() < 1e-15);
        let full = b.restrict(&Subspace::full(2)).unwrap();
        assert_eq!(full.inertia(&tol()).unwrap(), b.inertia(&tol()).unwrap());
        assert!(b.restrict(&Subspace::full(3)).unwrap_err().is_input());
    }

    #[test]
    fn b_orthocomplement_examples() {
        let t = tol();
        let vb = b_orthocomplement(&diag(&[1.0, 1.0, 0.0]), &Subspace::coordinate(3, &[0]).unwrap(), &t)
            .unwrap();
        assert!(vb.approx_eq(&Subspace::coordinate(3, &[1, 2]).unwrap(), 1e-14));
        let vb = b_orthocomplement(&diag(&[2.0, -1.0]), &Subspace::full(2), &t).unwrap();
        assert_eq!(vb.dim(), 0);
        let v = diagonal_line();
        assert!(b_orthocomplement(&diag(&[1.0, -1.0]), &v, &t)
            .unwrap()
            .approx_eq(&v, 1e-14));
    }

    #[test]
    fn isotropy_examples() {
        let t = tol();
        let b = diag(&[1.0, 0.0]);
        assert!(is_isotropic(&b, &Subspace::coordinate(2, &[1]).unwrap(), &t).unwrap());
        assert!(is_isotropic(&diag(&[1.0, -1.0]), &diagonal_line(), &t).unwrap());
        assert!(!is_isotropic(&diag(&[1.0, 1.0]), &Subspace::coordinate(2, &[0]).unwrap(), &t).unwrap());
    }

    #[test]
    fn isotropic_bound_examples() {
        let t = tol();
        let b = diag(&[1.0, -1.0]);
        let bounds = isotropic_bounds(&b, &diagonal_line(), &t).unwrap();
        assert_eq!(
            bounds,
            IsotropicBounds { dim: 1, morse_index: 1, coindex: 1, kernel_intersection: 0 }
        );
        let b4 = diag(&[1.0, -1.0, 1.0, -1.0]);
        let z = Subspace::span(
            4,
            &[vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]],
            &t,
        )
        .unwrap();
        let bounds = isotropic_bounds(&b4, &z, &t).unwrap();
        assert_eq!((bounds.dim, bounds.morse_index, bounds.kernel_intersection), (2, 2, 0));
        assert!(bounds.hold());
        let semi = diag(&[1.0, 0.0]);
        let bounds = isotropic_bounds(&semi, &Subspace::coordinate(2, &[1]).unwrap(), &t).unwrap();
        assert_eq!(bounds.kernel_intersection, 1);
        assert!(bounds.hold());
        let err = isotropic_bounds(&diag(&[1.0, 1.0]), &Subspace::coordinate(2, &[0]).unwrap(), &t);
        assert!(err.unwrap_err().is_input());
    }

    #[test]
    fn negative_space_relative_dimension_examples() {
        let t = tol();
        assert_eq!(
            negative_space_relative_dimension(&diag(&[1.0, -1.0]), &diagonal_line(), &t).unwrap(),
            (1, 1)
        );
        let terms = restriction_terms(&diag(&[1.0, -1.0]), &diagonal_line(), &t).unwrap();
        assert_eq!(
            terms,
            RestrictionTerms { morse_on_b_complement: 0, v_cap_b_complement: 1, v_cap_kernel: 0 }
        );
        let b = diag(&[-1.0, -1.0, 1.0]);
        let v = Subspace::coordinate(3, &[0, 1]).unwrap();
        assert_eq!(negative_space_relative_dimension(&b, &v, &t).unwrap(), (0, 0));
        assert_eq!(
            negative_space_relative_dimension(&b, &Subspace::full(3), &t).unwrap(),
            (0, 0)
        );
    }

    #[test]
    fn gram_does_not_change_b_orthocomplement() {
        let t = tol();
        let a = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, -1.0, 0.5, 0.0, 0.5, 3.0]);
        let m = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 4.0]);
        let v = Subspace::coordinate(3, &[0]).unwrap();
        let plain = b_orthocomplement(&SymmetricForm::new(a.clone()).unwrap(), &v, &t).unwrap();
        let weighted = b_orthocomplement(&SymmetricForm::with_gram(a, m).unwrap(), &v, &t).unwrap();
        assert!(plain.approx_eq(&weighted, 1e-12));
    }
}
