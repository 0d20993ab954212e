//! Randomized invariants across modules. Instances come from the seeded
//! generators so that a failing case is reproduced by its seed alone.

use proptest::prelude::*;

use crate::flow::{
    cogredient_transform, sf_endpoints, sf_partition, sf_varying, verify_reduction, OperatorPath,
    PartitionControl, Trivialization,
};
use crate::forms::{
    b_orthocomplement, isotropic_bounds, kernel, morse_index, negative_space_relative_dimension,
    nullity, restrict, spectral_split, SymmetricForm,
};
use crate::grassmann::{
    fredholm_pair_index, gap_distance, kato_gamma, lift_path, projection_restriction_index,
    relative_dimension, Subspace,
};
use crate::instances::{
    form_subspace_pair, form_with_inertia, gaussian_matrix, random_orthogonal, random_path,
    random_subspace, random_symmetric, reduction_instance, rng, varying_instance,
};
use crate::linalg::{
    eig_sym, kernel_basis, max_abs, op_norm, orthonormal_basis, orthonormality_defect, Matrix,
    Tolerance,
};
use rand::Rng;

fn tol() -> Tolerance {
    Tolerance::default()
}

/// Two subspaces of `R^n` sharing `shared` random directions.
fn subspace_pair(seed: u64) -> (Subspace, Subspace) {
    let mut r = rng(seed);
    let n = r.random_range(1..=8);
    let k = r.random_range(0..=n);
    let l = r.random_range(0..=n);
    let shared = r.random_range(0..=k.min(l));
    let q = random_orthogonal(n, &mut r);
    let common = q.columns(0, shared).into_owned();
    let mut v = gaussian_matrix(n, k, &mut r);
    let mut w = gaussian_matrix(n, l, &mut r);
    v.columns_mut(0, shared).copy_from(&common);
    w.columns_mut(0, shared).copy_from(&common);
    (
        Subspace::from_columns(&v, &tol()).unwrap(),
        Subspace::from_columns(&w, &tol()).unwrap(),
    )
}

fn perp(v: &Subspace) -> Subspace {
    v.orthocomplement(&tol()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn inertia_is_orthogonally_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=10);
        let zero = r.random_range(0..=n.min(3));
        let neg = r.random_range(0..=n - zero);
        let (a, _) = form_with_inertia(n, neg, zero, &mut r);
        let q = random_orthogonal(n, &mut r);
        let i1 = eig_sym(&a, &tol()).unwrap().inertia(&tol());
        let i2 = eig_sym(&(q.transpose() * &a * &q), &tol()).unwrap().inertia(&tol());
        prop_assert_eq!((i1.negative, i1.zero, i1.positive), (neg, zero, n - neg - zero));
        prop_assert_eq!((i1.negative, i1.zero, i1.positive), (i2.negative, i2.zero, i2.positive));
    }

    #[test]
    fn kernel_and_basis_bounds(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=10);
        let zero = r.random_range(0..=n);
        let (a, _) = form_with_inertia(n, 0, zero, &mut r);
        let t = tol();
        let k = kernel_basis(&a, &t).unwrap();
        prop_assert_eq!(k.ncols(), zero);
        let norm = op_norm(&a).unwrap();
        for x in k.column_iter() {
            prop_assert!((&a * x).norm() <= 10.0 * t.threshold(norm).max(1e-300) + 1e-15);
        }
        let cols = gaussian_matrix(n, r.random_range(1..=n + 2), &mut r);
        let b = orthonormal_basis(&cols, &t).unwrap();
        prop_assert!(orthonormality_defect(&b) <= 1e-10 * b.ncols().max(1) as f64);
    }

    #[test]
    fn fredholm_index_symmetries(seed in any::<u64>()) {
        let (v, w) = subspace_pair(seed);
        let t = tol();
        let i = fredholm_pair_index(&v, &w, &t).unwrap();
        prop_assert_eq!(i, fredholm_pair_index(&w, &v, &t).unwrap());
        prop_assert_eq!(i, -fredholm_pair_index(&perp(&v), &perp(&w), &t).unwrap());
        prop_assert_eq!(i, projection_restriction_index(&v, &w, &t).unwrap());
        // in finite dimension the index is dim V + dim W − N
        prop_assert_eq!(i, v.dim() as i64 + w.dim() as i64 - v.ambient_dim() as i64);
    }

    #[test]
    fn relative_dimension_laws(seed in any::<u64>()) {
        let (v, w) = subspace_pair(seed);
        let t = tol();
        let mut r = rng(seed ^ 0x5eed);
        let z = random_subspace(v.ambient_dim(), r.random_range(0..=v.ambient_dim()), &mut r);
        let vw = relative_dimension(&v, &w, &t).unwrap();
        let wz = relative_dimension(&w, &z, &t).unwrap();
        let vz = relative_dimension(&v, &z, &t).unwrap();
        prop_assert_eq!(vz, vw + wz);
        prop_assert_eq!(vw, v.dim() as i64 - w.dim() as i64);
        prop_assert_eq!(vw, fredholm_pair_index(&v, &perp(&w), &t).unwrap());
    }

    #[test]
    fn projection_sum_kernel_and_image(seed in any::<u64>()) {
        let (v, w) = subspace_pair(seed);
        let t = tol();
        let sum = v.projection() + w.projection();
        let ker = Subspace::from_columns(&kernel_basis(&sum, &t).unwrap(), &t).unwrap();
        let both = perp(&v).intersect(&perp(&w), &t).unwrap();
        prop_assert!(ker.approx_eq(&both, 1e-8));
        if v.intersect(&w, &t).unwrap().is_zero() {
            let image = Subspace::from_columns(&sum, &t).unwrap();
            prop_assert!(image.approx_eq(&v.sum(&w, &t).unwrap(), 1e-8));
        }
    }

    #[test]
    fn gamma_and_gap(seed in any::<u64>()) {
        let (v, w) = subspace_pair(seed);
        let t = tol();
        let g = kato_gamma(&v, &w, &t).unwrap();
        prop_assert!(g > 0.0 && g <= 1.0);
        // smallest distance to V of a unit vector of W orthogonal to V∩W
        let cap = v.intersect(&w, &t).unwrap();
        let rest = w.intersect(&perp(&cap), &t).unwrap();
        let oracle = if rest.is_zero() {
            1.0
        } else {
            let m = perp(&v).basis().transpose() * rest.basis();
            crate::linalg::svd(&m).unwrap().singular_values.last().copied().unwrap_or(1.0)
        };
        prop_assert!((g - oracle).abs() <= 1e-9, "gamma {} vs {}", g, oracle);
        let d = gap_distance(&v, &w, &t).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - gap_distance(&perp(&v), &perp(&w), &t).unwrap()).abs() <= 1e-10);
        if v.dim() != w.dim() {
            prop_assert!(d >= 1.0 - 1e-10);
        }
    }

    #[test]
    fn lift_carries_reference(seed in any::<u64>()) {
        let inst = varying_instance(seed, 6, 2, 9).unwrap();
        let triv = Trivialization::identity_at_start(&inst.family);
        let lift = lift_path(&inst.family, &triv.reference, &triv.initial, None, &tol()).unwrap();
        for (frame, (_, s)) in lift.frames.iter().zip(inst.family.samples()) {
            prop_assert!(orthonormality_defect(frame) <= 1e-10);
            let image = triv.reference.image_under(frame, &tol()).unwrap();
            prop_assert!(image.approx_eq(s, 1e-8));
        }
    }

    #[test]
    fn splitting_is_orthogonal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=10);
        let a = random_symmetric(n, &mut r);
        let form = SymmetricForm::new(a.clone()).unwrap();
        let split = spectral_split(&form, &tol()).unwrap();
        let cross = split.v_minus.basis().transpose() * split.v_plus.basis();
        let b_cross = split.v_minus.basis().transpose() * &a * split.v_plus.basis();
        let scale = 1e-8 * max_abs(&a).max(1.0);
        prop_assert!(cross.iter().all(|x| x.abs() <= scale));
        prop_assert!(b_cross.iter().all(|x| x.abs() <= scale));
        prop_assert_eq!(split.v_minus.dim() + split.v_plus.dim() + split.kernel.dim(), n);
    }

    #[test]
    fn b_orthogonal_complement_laws(seed in any::<u64>()) {
        let (b, v) = form_subspace_pair(seed, 8).unwrap();
        let t = tol();
        let vb = b_orthocomplement(&b, &v, &t).unwrap();
        let cap = v.intersect(&vb, &t).unwrap();
        let restricted = restrict(&b, &v).unwrap();
        prop_assert_eq!(nullity(&restricted, &t).unwrap(), cap.dim());
        if cap.is_zero() {
            prop_assert_eq!(v.dim() + vb.dim(), b.dim());
            prop_assert_eq!(v.sum(&vb, &t).unwrap().dim(), b.dim());
        }
        let cap_b = b_orthocomplement(&b, &cap, &t).unwrap();
        prop_assert!(cap_b.approx_eq(&v.sum(&vb, &t).unwrap(), 1e-7));
    }

    #[test]
    fn isotropic_subspaces_force_indefiniteness(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=8);
        let (a, q) = form_with_inertia(n, 1, 0, &mut r);
        let form = SymmetricForm::new(a.clone()).unwrap();
        // u + s w with B(u,u) = −s² B(w,w) is a null line
        let u = q.column(n - 1).into_owned();
        let w = q.column(0).into_owned();
        let s = (u.dot(&(&a * &u)) / -w.dot(&(&a * &w))).sqrt();
        let z = Subspace::from_columns(&Matrix::from_columns(&[u + w * s]), &tol()).unwrap();
        let bounds = isotropic_bounds(&form, &z, &tol()).unwrap();
        prop_assert!(bounds.hold());
        prop_assert!(bounds.morse_index >= 1 && bounds.coindex >= 1);
    }

    #[test]
    fn semidefinite_is_definite_off_kernel(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=8);
        let zero = r.random_range(0..n);
        let (a, _) = form_with_inertia(n, 0, zero, &mut r);
        let form = SymmetricForm::new(a).unwrap();
        let off = perp(&kernel(&form, &tol()).unwrap());
        let i = restrict(&form, &off).unwrap().inertia(&tol()).unwrap();
        prop_assert_eq!((i.negative, i.zero, i.positive), (0, 0, n - zero));
    }

    #[test]
    fn negative_space_identity(seed in any::<u64>()) {
        let (b, v) = form_subspace_pair(seed, 8).unwrap();
        let t = tol();
        let (direct, formula) = negative_space_relative_dimension(&b, &v, &t).unwrap();
        prop_assert_eq!(direct, formula);
        let vb = b_orthocomplement(&b, &v, &t).unwrap();
        if v.sum(&vb, &t).unwrap().dim() == b.dim() {
            prop_assert_eq!(direct, morse_index(&restrict(&b, &vb).unwrap(), &t).unwrap() as i64);
        }
        let split = spectral_split(&b, &t).unwrap();
        let rest = split.v_plus.sum(&split.kernel, &t).unwrap();
        prop_assert_eq!(fredholm_pair_index(&split.v_minus, &rest, &t).unwrap(), 0);
    }

    #[test]
    fn partition_matches_endpoints(seed in any::<u64>()) {
        let path = random_path(seed, 6).unwrap();
        let e = sf_endpoints(&path, &tol()).unwrap();
        let p = sf_partition(&path, &PartitionControl::default(), &tol()).unwrap();
        prop_assert_eq!(e.sf, p.sf);
    }

    #[test]
    fn flow_is_additive_under_concatenation(seed in any::<u64>(), cut in 0.05f64..0.95) {
        let path = random_path(seed, 8).unwrap();
        let whole = sf_partition(&path, &PartitionControl::default(), &tol()).unwrap().sf;
        let left = sf_partition(&path.restrict_domain(0.0, cut).unwrap(), &PartitionControl::default(), &tol()).unwrap().sf;
        let right = sf_partition(&path.restrict_domain(cut, 1.0).unwrap(), &PartitionControl::default(), &tol()).unwrap().sf;
        prop_assert_eq!(whole, left + right);
    }

    #[test]
    fn flow_depends_only_on_endpoints(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=8);
        let a = SymmetricForm::new(random_symmetric(n, &mut r)).unwrap();
        let b = SymmetricForm::new(random_symmetric(n, &mut r)).unwrap();
        let detour = SymmetricForm::new(random_symmetric(n, &mut r) * 3.0).unwrap();
        let direct = OperatorPath::from_samples(vec![(0.0, a.clone()), (1.0, b.clone())]).unwrap();
        let around = OperatorPath::from_samples(vec![(0.0, a), (0.5, detour), (1.0, b)]).unwrap();
        let control = PartitionControl::default();
        prop_assert_eq!(
            sf_partition(&direct, &control, &tol()).unwrap().sf,
            sf_partition(&around, &control, &tol()).unwrap().sf
        );
    }

    #[test]
    fn flow_is_cogredience_invariant(seed in any::<u64>()) {
        let path = random_path(seed, 6).unwrap();
        let n = path.dim();
        let mut r = rng(seed ^ 0xc09);
        // S_t = exp(tK) D stays invertible along the path
        let k = crate::instances::random_antisymmetric(n, 1.0, &mut r);
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| r.random_range(0.5..2.0)));
        let grid: Vec<(f64, Matrix)> = (0..=8)
            .map(|i| {
                let t = i as f64 / 8.0;
                (t, (&k * t).exp() * &d)
            })
            .collect();
        let moved = cogredient_transform(&path, &grid).unwrap();
        prop_assert_eq!(sf_endpoints(&moved, &tol()).unwrap().sf, sf_endpoints(&path, &tol()).unwrap().sf);
    }

    #[test]
    fn reduction_identity(seed in any::<u64>(), degenerate in any::<bool>()) {
        let inst = reduction_instance(seed, 8, 3, degenerate).unwrap();
        let rep = verify_reduction(&inst.path, &inst.subspace, &tol()).unwrap();
        prop_assert!(rep.holds(), "lhs {} rhs {}", rep.lhs, rep.rhs);
    }

    #[test]
    fn varying_flow_is_trivialization_independent(seed in any::<u64>()) {
        let inst = varying_instance(seed, 6, 2, 17).unwrap();
        let t = tol();
        let refine = |s: f64| inst.member(s);
        let one = sf_varying(&inst.path, &inst.family, &Trivialization::identity_at_start(&inst.family), Some(&refine), &t).unwrap();
        let two = sf_varying(&inst.path, &inst.family, &Trivialization::coordinate(&inst.family, &t).unwrap(), Some(&refine), &t).unwrap();
        prop_assert_eq!(one.sf, two.sf);
    }
}
