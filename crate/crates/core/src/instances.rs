//! Seeded random instances for property sweeps and the CLI `--random` mode.
//! Every generator is a pure function of its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::flow::OperatorPath;
use crate::forms::{b_orthocomplement, SymmetricForm};
use crate::grassmann::{Subspace, SubspacePath};
use crate::linalg::{symmetrize, Matrix, Tolerance};

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut InstanceRng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_symmetric(n: usize, rng: &mut InstanceRng) -> Matrix {
    symmetrize(&gaussian_matrix(n, n, rng))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal(n: usize, rng: &mut InstanceRng) -> Matrix {
    let qr = gaussian_matrix(n, n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn random_subspace(n: usize, k: usize, rng: &mut InstanceRng) -> Subspace {
    let q = random_orthogonal(n, rng);
    Subspace::from_orthonormal(q.columns(0, k).into_owned()).expect("orthogonal columns")
}

/// Random antisymmetric matrix with entries of order `scale`.
pub fn random_antisymmetric(n: usize, scale: f64, rng: &mut InstanceRng) -> Matrix {
    let g = gaussian_matrix(n, n, rng);
    (&g - g.transpose()) * (0.5 * scale)
}

/// `Q diag(λ) Qᵀ` with `negative` eigenvalues in `[-2, -0.5]`, `zero` exact
/// zeros and the rest in `[0.5, 2]`; also returns `Q` (eigenvectors in the
/// order negatives, zeros, positives).
pub fn form_with_inertia(
    n: usize,
    negative: usize,
    zero: usize,
    rng: &mut InstanceRng,
) -> (Matrix, Matrix) {
    assert!(negative + zero <= n, "inertia exceeds dimension");
    let q = random_orthogonal(n, rng);
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let mag = rng.random_range(0.5..2.0);
            if i < negative {
                -mag
            } else if i < negative + zero {
                0.0
            } else {
                mag
            }
        })
        .collect();
    let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(values));
    (symmetrize(&(&q * d * q.transpose())), q)
}

/// How the restriction subspace is chosen relative to the form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubspaceKind {
    Generic,
    /// Contains a kernel vector of the form.
    ThroughKernel,
    /// Contains a nonzero `x` with `x ∈ V ∩ V^⊥B`.
    Isotropic,
}

/// A random subspace of dimension `k` of the given kind for the form `a`
/// with eigenvectors `q` laid out as in [`form_with_inertia`].
fn subspace_for_form(
    a: &Matrix,
    q: &Matrix,
    inertia: (usize, usize),
    k: usize,
    kind: SubspaceKind,
    rng: &mut InstanceRng,
) -> Subspace {
    let n = a.nrows();
    let tol = Tolerance::default();
    let (negative, zero) = inertia;
    let positive = n - negative - zero;
    let seed_vector = match kind {
        SubspaceKind::ThroughKernel if zero > 0 => Some(q.column(negative).into_owned()),
        SubspaceKind::Isotropic if negative > 0 && positive > 0 => {
            let u = q.column(n - 1).into_owned();
            let w = q.column(0).into_owned();
            let lu = u.dot(&(a * &u));
            let lw = w.dot(&(a * &w));
            Some(u + w * (lu / lw.abs()).sqrt())
        }
        _ => None,
    };
    let Some(x) = seed_vector else {
        return random_subspace(n, k, rng);
    };
    let x = x.normalize();
    let mut cols = Matrix::zeros(n, k);
    cols.set_column(0, &x);
    if k > 1 {
        // the rest of V is drawn inside x^⊥B so that x stays B-orthogonal
        // to all of V (for kernel vectors that is every direction)
        let form = SymmetricForm::new(a.clone()).expect("symmetric");
        let line = Subspace::from_orthonormal(Matrix::from_columns(std::slice::from_ref(&x))).expect("unit");
        let complement = b_orthocomplement(&form, &line, &tol).expect("complement");
        let coeffs = gaussian_matrix(complement.dim(), k - 1, rng);
        cols.columns_mut(1, k - 1).copy_from(&(complement.basis() * coeffs));
    }
    Subspace::from_columns(&cols, &tol).expect("spanning columns")
}

/// A path and a subspace for the fixed-subspace reduction identity.
#[derive(Debug, Clone)]
pub struct ReductionInstance {
    pub path: OperatorPath,
    pub subspace: Subspace,
    pub degenerate: bool,
}

/// Random instance with `N ≤ max_dim` and `codim ≤ max_codim`. When
/// `degenerate` is set, both endpoints get a nontrivial kernel and the
/// subspace is made to meet the endpoint kernel or to contain a
/// B-isotropic direction.
pub fn reduction_instance(
    seed: u64,
    max_dim: usize,
    max_codim: usize,
    degenerate: bool,
) -> Result<ReductionInstance> {
    let mut r = rng(seed);
    let n = r.random_range(2..=max_dim.max(2));
    let codim = r.random_range(0..=max_codim.min(n - 1));
    reduction_instance_with(&mut r, n, codim, degenerate)
}

pub fn reduction_instance_with(
    r: &mut InstanceRng,
    n: usize,
    codim: usize,
    degenerate: bool,
) -> Result<ReductionInstance> {
    let k = n - codim;
    let endpoint = |r: &mut InstanceRng| {
        let zero = if degenerate { r.random_range(1..=n.min(3)) } else { 0 };
        let negative = r.random_range(0..=n - zero);
        let (a, q) = form_with_inertia(n, negative, zero, r);
        (a, q, (negative, zero))
    };
    let (a0, q0, in0) = endpoint(r);
    let (a1, _, _) = endpoint(r);
    let middle = random_symmetric(n, r);
    let kind = if degenerate {
        match r.random_range(0..3) {
            0 => SubspaceKind::Generic,
            1 => SubspaceKind::ThroughKernel,
            _ => SubspaceKind::Isotropic,
        }
    } else {
        SubspaceKind::Generic
    };
    let subspace = subspace_for_form(&a0, &q0, in0, k, kind, r);
    let path = OperatorPath::from_samples(vec![
        (0.0, SymmetricForm::new(a0)?),
        (0.5, SymmetricForm::new(middle)?),
        (1.0, SymmetricForm::new(a1)?),
    ])?;
    Ok(ReductionInstance {
        path,
        subspace,
        degenerate,
    })
}

/// A single form with a subspace, cycling through the subspace kinds.
pub fn form_subspace_pair(seed: u64, max_dim: usize) -> Result<(SymmetricForm, Subspace)> {
    let mut r = rng(seed);
    let n = r.random_range(2..=max_dim.max(2));
    let k = r.random_range(1..=n);
    let zero = r.random_range(0..=n.min(2));
    let negative = r.random_range(0..=n - zero);
    let (a, q) = form_with_inertia(n, negative, zero, &mut r);
    let kind = match seed % 3 {
        0 => SubspaceKind::Generic,
        1 => SubspaceKind::ThroughKernel,
        _ => SubspaceKind::Isotropic,
    };
    let v = subspace_for_form(&a, &q, (negative, zero), k, kind, &mut r);
    Ok((SymmetricForm::new(a)?, v))
}

/// A path with a smoothly rotating family `V_t = exp(tK) V_0`.
#[derive(Debug, Clone)]
pub struct VaryingInstance {
    pub path: OperatorPath,
    pub family: SubspacePath,
    pub generator: Matrix,
    pub initial: Subspace,
}

impl VaryingInstance {
    pub fn member(&self, t: f64) -> Result<Subspace> {
        Subspace::from_columns(&((&self.generator * t).exp() * self.initial.basis()), &Tolerance::default())
    }
}

pub fn varying_instance(seed: u64, n: usize, codim: usize, samples: usize) -> Result<VaryingInstance> {
    let mut r = rng(seed);
    let k = n - codim;
    let generator = random_antisymmetric(n, 1.0, &mut r);
    let initial = random_subspace(n, k, &mut r);
    let knots = (0..3)
        .map(|i| {
            let negative = r.random_range(0..=n);
            let (a, _) = form_with_inertia(n, negative, 0, &mut r);
            Ok((i as f64 / 2.0, SymmetricForm::new(a)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let path = OperatorPath::from_samples(knots)?;
    let family = {
        let g = generator.clone();
        let v0 = initial.clone();
        SubspacePath::sample(0.0, 1.0, samples, move |t| {
            Subspace::from_columns(&((&g * t).exp() * v0.basis()), &Tolerance::default())
        })?
    };
    Ok(VaryingInstance {
        path,
        family,
        generator,
        initial,
    })
}

/// Random piecewise-linear path of dimension `≤ max_dim` through a few
/// random symmetric knots.
pub fn random_path(seed: u64, max_dim: usize) -> Result<OperatorPath> {
    let mut r = rng(seed);
    let n = r.random_range(1..=max_dim.max(1));
    random_path_with(&mut r, n)
}

pub fn random_path_with(r: &mut InstanceRng, n: usize) -> Result<OperatorPath> {
    let knots = r.random_range(2..=4);
    let samples = (0..knots)
        .map(|i| {
            Ok((
                i as f64 / (knots - 1) as f64,
                SymmetricForm::new(random_symmetric(n, r))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    OperatorPath::from_samples(samples)
}
