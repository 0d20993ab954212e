//! Spectral flow of paths of symmetric forms, by endpoint relative dimension
//! and by an adaptive Phillips partition, plus the reduction identities for
//! restrictions to fixed and to moving subspaces.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::forms::{
    embedded_restricted_negative_space, restriction_terms, spectral_split, RestrictionTerms,
    SymmetricForm,
};
use crate::grassmann::{lift_path, relative_dimension, Refiner, Subspace, SubspacePath};
use crate::linalg::{svd, Inertia, Matrix, Tolerance};

type FamilyFn = dyn Fn(f64) -> Result<SymmetricForm> + Send + Sync;

#[derive(Clone)]
enum Source {
    /// Piecewise-linear interpolation of the samples (Gram too, when given).
    Samples(Vec<(f64, SymmetricForm)>),
    /// `A + t B`.
    Affine { a: Matrix, b: Matrix, gram: Option<Matrix> },
    Family(Arc<FamilyFn>),
}

/// A continuous path `t ↦ T_t` of symmetric forms on `[start, end]`.
#[derive(Clone)]
pub struct OperatorPath {
    start: f64,
    end: f64,
    dim: usize,
    source: Source,
}

impl fmt::Debug for OperatorPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Samples(s) => format!("samples({})", s.len()),
            Source::Affine { .. } => "affine".to_string(),
            Source::Family(_) => "family".to_string(),
        };
        write!(f, "OperatorPath[{}, {}] dim {} {}", self.start, self.end, self.dim, kind)
    }
}

fn check_domain(start: f64, end: f64) -> Result<()> {
    if !(start.is_finite() && end.is_finite() && end > start) {
        return Err(Error::input(format!("invalid path domain [{start}, {end}]")));
    }
    Ok(())
}

impl OperatorPath {
    pub fn from_samples(samples: Vec<(f64, SymmetricForm)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::input("a sampled path needs at least two samples"));
        }
        let dim = samples[0].1.dim();
        let has_gram = samples[0].1.gram().is_some();
        for pair in samples.windows(2) {
            if pair[1].0.partial_cmp(&pair[0].0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::input("sample times must be strictly increasing"));
            }
        }
        for (_, s) in &samples {
            check_dim(dim, s.dim(), "path sample dimension")?;
            if s.gram().is_some() != has_gram {
                return Err(Error::input("either every sample carries a Gram matrix or none does"));
            }
        }
        let (start, end) = (samples[0].0, samples[samples.len() - 1].0);
        check_domain(start, end)?;
        Ok(OperatorPath {
            start,
            end,
            dim,
            source: Source::Samples(samples),
        })
    }

    /// `T_t = A + t B` on `[start, end]`.
    pub fn affine(a: Matrix, b: Matrix, gram: Option<Matrix>, start: f64, end: f64) -> Result<Self> {
        check_domain(start, end)?;
        // validate once through the form constructors
        let probe = |m: Matrix| match &gram {
            Some(g) => SymmetricForm::with_gram(m, g.clone()),
            None => SymmetricForm::new(m),
        };
        let a = probe(a)?.matrix().clone();
        check_dim(a.nrows(), b.nrows(), "affine path")?;
        let b = SymmetricForm::new(b)?.matrix().clone();
        Ok(OperatorPath {
            start,
            end,
            dim: a.nrows(),
            source: Source::Affine { a, b, gram },
        })
    }

    /// A path given by a closure; it is evaluated lazily.
    pub fn family<F>(dim: usize, start: f64, end: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<SymmetricForm> + Send + Sync + 'static,
    {
        check_domain(start, end)?;
        Ok(OperatorPath {
            start,
            end,
            dim,
            source: Source::Family(Arc::new(f)),
        })
    }

    pub fn constant(form: SymmetricForm, start: f64, end: f64) -> Result<Self> {
        Self::from_samples(vec![(start, form.clone()), (end, form)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    /// Sample times for sampled paths, endpoints otherwise.
    pub fn knots(&self) -> Vec<f64> {
        match &self.source {
            Source::Samples(s) => s.iter().map(|(t, _)| *t).collect(),
            _ => vec![self.start, self.end],
        }
    }

    pub fn at(&self, t: f64) -> Result<SymmetricForm> {
        let slack = 1e-12 * (1.0 + self.start.abs().max(self.end.abs()));
        if !(t >= self.start - slack && t <= self.end + slack) {
            return Err(Error::input(format!(
                "t = {t} outside the path domain [{}, {}]",
                self.start, self.end
            )));
        }
        let t = t.clamp(self.start, self.end);
        let form = match &self.source {
            Source::Samples(samples) => {
                let k = samples.partition_point(|(s, _)| *s <= t).clamp(1, samples.len() - 1);
                let (t0, f0) = &samples[k - 1];
                let (t1, f1) = &samples[k];
                let w = (t - t0) / (t1 - t0);
                let a = f0.matrix() * (1.0 - w) + f1.matrix() * w;
                match (f0.gram(), f1.gram()) {
                    (Some(g0), Some(g1)) => SymmetricForm::with_gram(a, g0 * (1.0 - w) + g1 * w)?,
                    _ => SymmetricForm::new(a)?,
                }
            }
            Source::Affine { a, b, gram } => {
                let m = a + b * t;
                match gram {
                    Some(g) => SymmetricForm::with_gram(m, g.clone())?,
                    None => SymmetricForm::new(m)?,
                }
            }
            Source::Family(f) => f(t)?,
        };
        check_dim(self.dim, form.dim(), "path value dimension")?;
        Ok(form)
    }

    pub fn eigenvalues_at(&self, t: f64, tol: &Tolerance) -> Result<Vec<f64>> {
        self.at(t)?.eigenvalues(tol)
    }

    /// The same path on a subinterval `[a, b]` of its domain.
    pub fn restrict_domain(&self, a: f64, b: f64) -> Result<OperatorPath> {
        check_domain(a, b)?;
        if a < self.start || b > self.end {
            return Err(Error::input(format!(
                "[{a}, {b}] is not inside [{}, {}]",
                self.start, self.end
            )));
        }
        let source = match &self.source {
            Source::Samples(samples) => {
                let mut inner = vec![(a, self.at(a)?)];
                inner.extend(samples.iter().filter(|(t, _)| *t > a && *t < b).cloned());
                inner.push((b, self.at(b)?));
                Source::Samples(inner)
            }
            other => other.clone(),
        };
        Ok(OperatorPath {
            start: a,
            end: b,
            dim: self.dim,
            source,
        })
    }

    /// `t ↦ T_t|_{V×V}` in the orthonormal coordinates of `V`.
    pub fn compress(&self, v: &Subspace) -> Result<OperatorPath> {
        check_dim(self.dim, v.ambient_dim(), "restriction subspace")?;
        let source = match &self.source {
            Source::Samples(samples) => Source::Samples(
                samples
                    .iter()
                    .map(|(t, f)| Ok((*t, f.restrict(v)?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            Source::Affine { a, b, gram } => {
                let q = v.basis();
                Source::Affine {
                    a: crate::linalg::symmetrize(&(q.transpose() * a * q)),
                    b: crate::linalg::symmetrize(&(q.transpose() * b * q)),
                    gram: gram.as_ref().map(|g| crate::linalg::symmetrize(&(q.transpose() * g * q))),
                }
            }
            Source::Family(f) => {
                let f = Arc::clone(f);
                let v = v.clone();
                Source::Family(Arc::new(move |t| f(t)?.restrict(&v)))
            }
        };
        Ok(OperatorPath {
            start: self.start,
            end: self.end,
            dim: v.dim(),
            source,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMethod {
    Endpoints,
    Partition,
}

/// One cell `[start, end]` of a Phillips partition with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionCell {
    pub start: f64,
    pub end: f64,
    pub threshold: f64,
    /// Smallest distance from `±threshold` to a sampled eigenvalue.
    pub margin: f64,
    pub contribution: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    pub sf: i64,
    pub method: FlowMethod,
    pub endpoint_morse: (usize, usize),
    pub endpoint_nullities: (usize, usize),
    /// Distance from the endpoint spectra to the zero band edge.
    pub min_endpoint_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<PartitionCell>>,
    pub warnings: Vec<String>,
}

fn endpoint_inertia(path: &OperatorPath, tol: &Tolerance) -> Result<(Inertia, Inertia)> {
    let (a, b) = path.domain();
    Ok((path.at(a)?.inertia(tol)?, path.at(b)?.inertia(tol)?))
}

fn endpoint_report(path: &OperatorPath, sf: i64, method: FlowMethod, tol: &Tolerance) -> Result<FlowReport> {
    let (ia, ib) = endpoint_inertia(path, tol)?;
    let (a, b) = path.domain();
    let mut warnings = Vec::new();
    for (t, i) in [(a, &ia), (b, &ib)] {
        if i.zero > 0 {
            warnings.push(format!("degenerate endpoint at t = {t}: nullity {}", i.zero));
        }
    }
    let gap = |i: &Inertia| i.min_nonzero_abs - i.band;
    Ok(FlowReport {
        sf,
        method,
        endpoint_morse: (ia.negative, ib.negative),
        endpoint_nullities: (ia.zero, ib.zero),
        min_endpoint_gap: gap(&ia).min(gap(&ib)),
        partition: None,
        warnings,
    })
}

/// `sf = n₋(T_a) − n₋(T_b)`, endpoint kernel counted as nonnegative.
pub fn sf_endpoints(path: &OperatorPath, tol: &Tolerance) -> Result<FlowReport> {
    let (ia, ib) = endpoint_inertia(path, tol)?;
    let sf = ia.negative as i64 - ib.negative as i64;
    endpoint_report(path, sf, FlowMethod::Endpoints, tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionControl {
    /// Sample points per cell used to certify a threshold.
    pub check_points: usize,
    pub max_depth: usize,
}

impl Default for PartitionControl {
    fn default() -> Self {
        PartitionControl {
            check_points: 64,
            max_depth: 24,
        }
    }
}

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect()
}

fn radius(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Spectral flow from a Phillips partition: cells `[t_{i-1}, t_i]` with
/// thresholds `a_i` such that `±a_i` stays out of the spectrum on each cell
/// (certified on a check grid), and
/// `sf = Σ rank χ_{[0,a_i]}(T_{t_i}) − rank χ_{[0,a_i]}(T_{t_{i-1}})`.
///
/// Thresholds are kept below half the largest spectral radius seen along
/// the path so the construction never degenerates into counting the whole
/// spectrum.
pub fn sf_partition(path: &OperatorPath, control: &PartitionControl, tol: &Tolerance) -> Result<FlowReport> {
    let (a, b) = path.domain();
    let mut scale = 0.0f64;
    for t in grid(a, b, control.check_points) {
        scale = scale.max(radius(&path.eigenvalues_at(t, tol)?));
    }
    let cap = if scale > 0.0 { 0.5 * scale } else { 1.0 };
    let mut cells = Vec::new();
    partition_cell(path, a, b, 0, cap, control, tol, &mut cells)?;
    let sf = cells.iter().map(|c| c.contribution).sum();
    let mut report = endpoint_report(path, sf, FlowMethod::Partition, tol)?;
    report.partition = Some(cells);
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn partition_cell(
    path: &OperatorPath,
    l: f64,
    r: f64,
    depth: usize,
    cap: f64,
    control: &PartitionControl,
    tol: &Tolerance,
    out: &mut Vec<PartitionCell>,
) -> Result<()> {
    if let Some(cell) = certify_cell(path, l, r, cap, control, tol)? {
        out.push(cell);
        return Ok(());
    }
    if depth >= control.max_depth {
        return Err(Error::numerical(format!(
            "spectral flow partition: no admissible threshold on [{l}, {r}] after {depth} bisections"
        )));
    }
    let m = 0.5 * (l + r);
    partition_cell(path, l, m, depth + 1, cap, control, tol, out)?;
    partition_cell(path, m, r, depth + 1, cap, control, tol, out)
}

fn certify_cell(
    path: &OperatorPath,
    l: f64,
    r: f64,
    cap: f64,
    control: &PartitionControl,
    tol: &Tolerance,
) -> Result<Option<PartitionCell>> {
    let times = grid(l, r, control.check_points);
    let spectra = times
        .iter()
        .map(|&t| path.eigenvalues_at(t, tol))
        .collect::<Result<Vec<_>>>()?;
    let bands: Vec<f64> = spectra.iter().map(|s| tol.threshold(radius(s))).collect();
    let lower = bands.iter().fold(0.0f64, |acc, &x| acc.max(x));
    // largest movement of any (sorted) eigenvalue between neighbouring
    // check points; a crossing of ±a between them needs at least the margin
    let step = spectra
        .windows(2)
        .flat_map(|w| w[0].iter().zip(&w[1]).map(|(x, y)| (x - y).abs()))
        .fold(0.0f64, f64::max);

    let mut levels: Vec<f64> = spectra
        .iter()
        .flatten()
        .map(|x| x.abs())
        .filter(|&x| x > lower && x < cap)
        .collect();
    levels.push(cap);
    levels.sort_by(f64::total_cmp);

    let mut lo = lower;
    for &hi in &levels {
        if hi > lo {
            let a = 0.5 * (lo + hi);
            let margin = spectra
                .iter()
                .flatten()
                .map(|x| (x.abs() - a).abs())
                .fold(f64::INFINITY, f64::min);
            let inside = |s: &Vec<f64>| s.iter().filter(|x| x.abs() <= a).count();
            let count = inside(&spectra[0]);
            if margin > step && margin > 0.0 && spectra.iter().all(|s| inside(s) == count) {
                let rank = |s: &Vec<f64>, band: f64| s.iter().filter(|&&x| x >= -band && x <= a).count() as i64;
                let last = spectra.len() - 1;
                return Ok(Some(PartitionCell {
                    start: l,
                    end: r,
                    threshold: a,
                    margin,
                    contribution: rank(&spectra[last], bands[last]) - rank(&spectra[0], bands[0]),
                }));
            }
        }
        lo = hi;
    }
    Ok(None)
}

/// Spectral flow of `t ↦ T_t|_{V×V}`.
pub fn sf_restricted(path: &OperatorPath, v: &Subspace, tol: &Tolerance) -> Result<FlowReport> {
    sf_endpoints(&path.compress(v)?, tol)
}

/// Both sides of the reduction identity for a fixed subspace `V`:
/// `sf(T) − sf(T|_V) = terms(a) − terms(b)`.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub sf_full: i64,
    pub sf_restricted: i64,
    pub lhs: i64,
    pub rhs: i64,
    pub terms_a: RestrictionTerms,
    pub terms_b: RestrictionTerms,
    pub warnings: Vec<String>,
}

impl ReductionReport {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

pub fn verify_reduction(path: &OperatorPath, v: &Subspace, tol: &Tolerance) -> Result<ReductionReport> {
    let full = sf_endpoints(path, tol)?;
    let restricted = sf_restricted(path, v, tol)?;
    let (a, b) = path.domain();
    let terms_a = restriction_terms(&path.at(a)?, v, tol)?;
    let terms_b = restriction_terms(&path.at(b)?, v, tol)?;
    let mut warnings = full.warnings.clone();
    warnings.extend(restricted.warnings.iter().map(|w| format!("restricted: {w}")));
    Ok(ReductionReport {
        sf_full: full.sf,
        sf_restricted: restricted.sf,
        lhs: full.sf - restricted.sf,
        rhs: terms_a.value() - terms_b.value(),
        terms_a,
        terms_b,
        warnings,
    })
}

/// How the moving subspaces are identified with a fixed model space:
/// orthogonal `Φ_t` with `Φ_t(W_ref) = V_t`, starting from `initial`.
#[derive(Debug, Clone)]
pub struct Trivialization {
    pub reference: Subspace,
    pub initial: Matrix,
}

impl Trivialization {
    /// `W_ref = V_a`, `Φ_a = I`.
    pub fn identity_at_start(family: &SubspacePath) -> Self {
        let n = family.ambient_dim();
        Trivialization {
            reference: family.samples()[0].1.clone(),
            initial: Matrix::identity(n, n),
        }
    }

    /// `W_ref = span(e_1..e_k)`, `Φ_a = [Q_{V_a} | Q_{V_a⊥}]`.
    pub fn coordinate(family: &SubspacePath, tol: &Tolerance) -> Result<Self> {
        let n = family.ambient_dim();
        let k = family.dim();
        let v0 = &family.samples()[0].1;
        let perp = v0.orthocomplement(tol)?;
        let mut initial = Matrix::zeros(n, n);
        initial.columns_mut(0, k).copy_from(v0.basis());
        initial.columns_mut(k, n - k).copy_from(perp.basis());
        Ok(Trivialization {
            reference: Subspace::coordinate(n, &(0..k).collect::<Vec<_>>())?,
            initial,
        })
    }
}

/// The compressed path `T̃_t = (Φ_t Q⋆)ᵀ T_t (Φ_t Q⋆)` together with the
/// frames `Φ_t Q⋆` at the family's sample times.
#[derive(Debug, Clone)]
pub struct VaryingRestriction {
    pub path: OperatorPath,
    pub frames: Vec<Matrix>,
    pub refinements: usize,
}

pub fn varying_restriction(
    path: &OperatorPath,
    family: &SubspacePath,
    trivialization: &Trivialization,
    refine: Option<Refiner<'_>>,
    tol: &Tolerance,
) -> Result<VaryingRestriction> {
    check_dim(path.dim(), family.ambient_dim(), "subspace family ambient dimension")?;
    let (a, b) = path.domain();
    let (fa, fb) = family.domain();
    let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
    if (fa - a).abs() > slack || (fb - b).abs() > slack {
        return Err(Error::input(format!(
            "subspace family domain [{fa}, {fb}] differs from path domain [{a}, {b}]"
        )));
    }
    let lift = lift_path(family, &trivialization.reference, &trivialization.initial, refine, tol)?;
    let q_ref = trivialization.reference.basis();
    let frames: Vec<Matrix> = lift.frames.iter().map(|phi| phi * q_ref).collect();
    let samples = lift
        .times
        .iter()
        .zip(&frames)
        .map(|(&t, frame)| Ok((t.clamp(a, b), path.at(t.clamp(a, b))?.congruent(frame)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(VaryingRestriction {
        path: OperatorPath::from_samples(samples)?,
        frames,
        refinements: lift.refinements,
    })
}

/// Spectral flow of the path restricted to the moving domains `V_t`.
pub fn sf_varying(
    path: &OperatorPath,
    family: &SubspacePath,
    trivialization: &Trivialization,
    refine: Option<Refiner<'_>>,
    tol: &Tolerance,
) -> Result<FlowReport> {
    sf_endpoints(&varying_restriction(path, family, trivialization, refine, tol)?.path, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct VaryingReductionReport {
    pub sf_full: i64,
    pub sf_varying: i64,
    pub lhs: i64,
    pub rhs: i64,
    pub relative_dimension_a: i64,
    pub relative_dimension_b: i64,
    pub lift_refinements: usize,
    pub warnings: Vec<String>,
}

impl VaryingReductionReport {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

/// `sf(T) − sf(T̃)` against the relative dimension of `V⁻(T)` and the
/// embedded `V⁻(T̃)` at both ends, through the same trivialization.
pub fn verify_reduction_varying(
    path: &OperatorPath,
    family: &SubspacePath,
    trivialization: &Trivialization,
    refine: Option<Refiner<'_>>,
    tol: &Tolerance,
) -> Result<VaryingReductionReport> {
    let restriction = varying_restriction(path, family, trivialization, refine, tol)?;
    let full = sf_endpoints(path, tol)?;
    let varying = sf_endpoints(&restriction.path, tol)?;
    let (a, b) = path.domain();
    let end_dimension = |t: f64, frame: &Matrix| -> Result<i64> {
        let form = path.at(t)?;
        let domain = Subspace::from_orthonormal(frame.clone())?;
        let negative = spectral_split(&form, tol)?.v_minus;
        let embedded = embedded_restricted_negative_space(&form, &domain, tol)?;
        relative_dimension(&negative, &embedded, tol)
    };
    let ra = end_dimension(a, &restriction.frames[0])?;
    let rb = end_dimension(b, restriction.frames.last().expect("nonempty lift"))?;
    let mut warnings = full.warnings.clone();
    warnings.extend(varying.warnings.iter().map(|w| format!("restricted: {w}")));
    Ok(VaryingReductionReport {
        sf_full: full.sf,
        sf_varying: varying.sf,
        lhs: full.sf - varying.sf,
        rhs: ra - rb,
        relative_dimension_a: ra,
        relative_dimension_b: rb,
        lift_refinements: restriction.refinements,
        warnings,
    })
}

/// `t ↦ S_tᵀ T_t S_t` on the grid where the `S_t` are given (which must
/// start and end at the path endpoints); linear in between.
pub fn cogredient_transform(path: &OperatorPath, grid: &[(f64, Matrix)]) -> Result<OperatorPath> {
    let (a, b) = path.domain();
    let (first, last) = match (grid.first(), grid.last()) {
        (Some(f), Some(l)) => (f.0, l.0),
        _ => return Err(Error::input("empty cogredience grid")),
    };
    let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
    if (first - a).abs() > slack || (last - b).abs() > slack {
        return Err(Error::input("cogredience grid must span the path domain"));
    }
    let samples = grid
        .iter()
        .map(|(t, s)| {
            if s.shape() != (path.dim(), path.dim()) {
                return Err(Error::input("cogredience matrix has the wrong shape"));
            }
            let dec = svd(s)?;
            let smallest = dec.singular_values.last().copied().unwrap_or(0.0);
            if smallest <= 1e-12 * dec.largest() || !smallest.is_finite() {
                return Err(Error::input(format!("cogredience matrix at t = {t} is singular")));
            }
            let t = t.clamp(a, b);
            Ok((t, path.at(t)?.congruent(s)?))
        })
        .collect::<Result<Vec<_>>>()?;
    OperatorPath::from_samples(samples)
}

/// Eigenvalues of the represented operator on a uniform grid.
pub fn eigenvalue_trace(path: &OperatorPath, points: usize, tol: &Tolerance) -> Result<Vec<(f64, Vec<f64>)>> {
    let (a, b) = path.domain();
    grid(a, b, points)
        .into_iter()
        .map(|t| Ok((t, path.eigenvalues_at(t, tol)?)))
        .collect()
}

/// Writes rows `t,λ_1,…,λ_N` with a header line.
pub fn write_trace_csv<W: Write>(trace: &[(f64, Vec<f64>)], mut out: W) -> std::io::Result<()> {
    let n = trace.first().map(|(_, v)| v.len()).unwrap_or(0);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("lambda_{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (t, values) in trace {
        let row: Vec<String> = std::iter::once(format!("{t:.17e}"))
            .chain(values.iter().map(|x| format!("{x:.17e}")))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn diag(d: &[f64]) -> Matrix {
        Matrix::from_diagonal(&DVector::from_column_slice(d))
    }

    fn affine(a: &[f64], b: &[f64]) -> OperatorPath {
        OperatorPath::affine(diag(a), diag(b), None, 0.0, 1.0).unwrap()
    }

    fn rotation(theta: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn endpoint_examples() {
        let t = tol();
        let constant = OperatorPath::constant(SymmetricForm::diagonal(&[1.0, -2.0]).unwrap(), 0.0, 1.0).unwrap();
        assert_eq!(sf_endpoints(&constant, &t).unwrap().sf, 0);
        assert_eq!(sf_endpoints(&affine(&[-1.0, 1.0], &[2.0, 0.0]), &t).unwrap().sf, 1);
        assert_eq!(sf_endpoints(&affine(&[1.0, -1.0], &[-2.0, 0.0]), &t).unwrap().sf, -1);
    }

    #[test]
    fn partition_examples() {
        let t = tol();
        let c = PartitionControl::default();
        let up = sf_partition(&affine(&[-1.0, 1.0], &[2.0, 0.0]), &c, &t).unwrap();
        assert_eq!(up.sf, 1);
        let cells = up.partition.unwrap();
        assert!(cells.windows(2).all(|w| w[0].end == w[1].start));
        let constant = OperatorPath::constant(SymmetricForm::diagonal(&[1.0, -2.0]).unwrap(), 0.0, 1.0).unwrap();
        assert_eq!(sf_partition(&constant, &c, &t).unwrap().sf, 0);
        let touch = OperatorPath::family(1, -1.0, 1.0, |s| SymmetricForm::diagonal(&[s * s])).unwrap();
        let report = sf_partition(&touch, &c, &t).unwrap();
        assert_eq!(report.sf, 0);
        assert_eq!(sf_endpoints(&touch, &t).unwrap().sf, 0);
    }

    #[test]
    fn partition_reports_exhausted_budget() {
        // eigenvalue oscillating faster than any check grid can resolve
        let wild = OperatorPath::family(1, 0.0, 1.0, |s| SymmetricForm::diagonal(&[(1e7 * s).sin()])).unwrap();
        let control = PartitionControl { check_points: 8, max_depth: 3 };
        let err = sf_partition(&wild, &control, &tol()).unwrap_err();
        assert!(matches!(err, Error::Numerical(ref m) if m.contains("no admissible threshold")));
    }

    #[test]
    fn restricted_examples() {
        let t = tol();
        let p = affine(&[-1.0, 1.0], &[2.0, 0.0]);
        assert_eq!(sf_restricted(&p, &Subspace::coordinate(2, &[1]).unwrap(), &t).unwrap().sf, 0);
        let q = affine(&[-1.0, 1.0, -1.0], &[2.0, 0.0, 0.0]);
        assert_eq!(sf_restricted(&q, &Subspace::coordinate(3, &[0, 1]).unwrap(), &t).unwrap().sf, 1);
        assert_eq!(sf_restricted(&p, &Subspace::full(2), &t).unwrap().sf, 1);
        assert!(sf_restricted(&p, &Subspace::full(3), &t).unwrap_err().is_input());
    }

    #[test]
    fn reduction_examples() {
        let t = tol();
        let q = affine(&[-1.0, 1.0, -1.0], &[2.0, 0.0, 0.0]);
        let r = verify_reduction(&q, &Subspace::coordinate(3, &[0, 1]).unwrap(), &t).unwrap();
        assert_eq!((r.lhs, r.rhs), (0, 0));
        assert_eq!(r.terms_a.value(), 1);
        assert_eq!(r.terms_b.value(), 1);
        assert_eq!(r.terms_a.morse_on_b_complement, 1);

        let degenerate = affine(&[0.0, 1.0], &[1.0, 0.0]);
        let r = verify_reduction(&degenerate, &Subspace::coordinate(2, &[1]).unwrap(), &t).unwrap();
        assert_eq!((r.lhs, r.rhs), (0, 0));
        assert!(!r.warnings.is_empty());

        let r = verify_reduction(&q, &Subspace::full(3), &t).unwrap();
        assert_eq!((r.lhs, r.rhs), (0, 0));
    }

    fn line(theta: f64) -> Subspace {
        Subspace::span(2, &[vec![theta.cos(), theta.sin()]], &tol()).unwrap()
    }

    #[test]
    fn varying_examples() {
        let t = tol();
        let identity = OperatorPath::constant(SymmetricForm::new(Matrix::identity(2, 2)).unwrap(), 0.0, 1.0).unwrap();
        let rotating = SubspacePath::sample(0.0, 1.0, 9, |s| Ok(line(s))).unwrap();
        let triv = Trivialization::identity_at_start(&rotating);
        assert_eq!(sf_varying(&identity, &rotating, &triv, None, &t).unwrap().sf, 0);
        let report = verify_reduction_varying(&identity, &rotating, &triv, None, &t).unwrap();
        assert!(report.holds());

        let lorentz = OperatorPath::constant(SymmetricForm::diagonal(&[1.0, 1.0, -1.0]).unwrap(), 0.0, 1.0).unwrap();
        let family = SubspacePath::sample(0.0, 1.0, 9, |s| {
            Subspace::span(3, &[vec![s.cos(), s.sin(), 0.0], vec![0.0, 0.0, 1.0]], &tol())
        })
        .unwrap();
        let triv = Trivialization::coordinate(&family, &t).unwrap();
        let vr = varying_restriction(&lorentz, &family, &triv, None, &t).unwrap();
        // cogredient to the constant diag(1, −1)
        for s in [0.0, 0.5, 1.0] {
            let f = vr.path.at(s).unwrap();
            assert!(crate::linalg::max_abs(&(f.matrix() - diag(&[1.0, -1.0]))) < 1e-7);
        }
        assert_eq!(sf_varying(&lorentz, &family, &triv, None, &t).unwrap().sf, 0);
    }

    #[test]
    fn constant_family_reduces_to_fixed_restriction() {
        let t = tol();
        let q = affine(&[-1.0, 1.0, -1.0], &[2.0, 0.0, 0.0]);
        let v = Subspace::coordinate(3, &[0, 1]).unwrap();
        let family = SubspacePath::sample(0.0, 1.0, 3, |_| Ok(v.clone())).unwrap();
        let triv = Trivialization::identity_at_start(&family);
        let varying = verify_reduction_varying(&q, &family, &triv, None, &t).unwrap();
        let fixed = verify_reduction(&q, &v, &t).unwrap();
        assert_eq!(varying.sf_varying, fixed.sf_restricted);
        assert_eq!(varying.lhs, fixed.lhs);
        assert!(varying.holds());
    }

    #[test]
    fn varying_domain_mismatch_is_input_error() {
        let t = tol();
        let p = affine(&[-1.0, 1.0], &[2.0, 0.0]);
        let family = SubspacePath::sample(0.0, 2.0, 3, |s| Ok(line(s))).unwrap();
        let triv = Trivialization::identity_at_start(&family);
        assert!(sf_varying(&p, &family, &triv, None, &t).unwrap_err().is_input());
    }

    #[test]
    fn cogredience_examples() {
        let t = tol();
        let p = affine(&[-1.0, 1.0], &[2.0, 0.0]);
        let base = sf_endpoints(&p, &t).unwrap().sf;
        let ident: Vec<(f64, Matrix)> = vec![(0.0, Matrix::identity(2, 2)), (1.0, Matrix::identity(2, 2))];
        let same = cogredient_transform(&p, &ident).unwrap();
        for s in [0.0, 0.3, 1.0] {
            assert!(crate::linalg::max_abs(&(same.at(s).unwrap().matrix() - p.at(s).unwrap().matrix())) < 1e-15);
        }
        let doubled: Vec<(f64, Matrix)> = vec![(0.0, Matrix::identity(2, 2) * 2.0), (1.0, Matrix::identity(2, 2) * 2.0)];
        assert_eq!(sf_endpoints(&cogredient_transform(&p, &doubled).unwrap(), &t).unwrap().sf, base);
        let rotating: Vec<(f64, Matrix)> = (0..=4).map(|i| (i as f64 / 4.0, rotation(i as f64 / 4.0))).collect();
        assert_eq!(sf_endpoints(&cogredient_transform(&p, &rotating).unwrap(), &t).unwrap().sf, base);
        let singular = vec![(0.0, Matrix::identity(2, 2)), (1.0, Matrix::zeros(2, 2))];
        assert!(cogredient_transform(&p, &singular).unwrap_err().is_input());
    }

    #[test]
    fn sampled_path_interpolates_linearly() {
        let p = OperatorPath::from_samples(vec![
            (0.0, SymmetricForm::diagonal(&[0.0]).unwrap()),
            (2.0, SymmetricForm::diagonal(&[4.0]).unwrap()),
        ])
        .unwrap();
        assert!((p.at(0.5).unwrap().matrix()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(p.at(2.5).unwrap_err().is_input());
        let sub = p.restrict_domain(0.5, 1.0).unwrap();
        assert!((sub.at(1.0).unwrap().matrix()[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let p = affine(&[-1.0, 1.0], &[2.0, 0.0]);
        let trace = eigenvalue_trace(&p, 3, &tol()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,lambda_1,lambda_2");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("5.0"));
    }
}
