//! JSON scenario files. Matrices are lists of rows; subspaces are lists of
//! spanning vectors.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use sfkit_core::flow::{OperatorPath, Trivialization};
use sfkit_core::forms::SymmetricForm;
use sfkit_core::grassmann::{Subspace, SubspacePath};
use sfkit_core::linalg::{matrix_from_rows, max_abs, Tolerance};
use sfkit_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Path,
    Reduce,
    Vary,
    Geodesic,
    Grassmann,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Path => "path",
            Kind::Reduce => "reduce",
            Kind::Vary => "vary",
            Kind::Geodesic => "geodesic",
            Kind::Grassmann => "grassmann",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: Kind,
    #[serde(default)]
    pub payload: Value,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub random: bool,
    #[serde(default)]
    pub tolerance: Option<ToleranceSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub rel_zero: Option<f64>,
    pub abs_zero: Option<f64>,
}

impl ToleranceSpec {
    pub fn apply(&self, base: Tolerance) -> Result<Tolerance> {
        Tolerance::new(
            self.rel_zero.unwrap_or(base.rel_zero),
            self.abs_zero.unwrap_or(base.abs_zero),
        )
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::input(format!("scenario schema: {e}")))?;
        if s.random && s.seed.is_none() {
            return Err(Error::input("scenario schema: \"seed\" is required when \"random\" is true"));
        }
        Ok(s)
    }

    pub fn payload<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        serde_json::from_value(self.payload.clone())
            .map_err(|e| Error::input(format!("scenario schema ({} payload): {e}", self.kind.name())))
    }
}

/// Parameters of a random scenario; command-line flags fill in what is absent.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub dim: Option<usize>,
    pub codim: Option<usize>,
    pub degenerate: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub t: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub samples: Vec<SampleSpec>,
}

impl PathSpec {
    pub fn build(&self) -> Result<OperatorPath> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let a = matrix_from_rows(&s.a)?;
                let form = match &s.m {
                    Some(m) => SymmetricForm::with_gram(a, matrix_from_rows(m)?)?,
                    None => SymmetricForm::new(a)?,
                };
                Ok((s.t, form))
            })
            .collect::<Result<Vec<_>>>()?;
        OperatorPath::from_samples(samples)
    }
}

pub fn span(dim: usize, vectors: &[Vec<f64>]) -> Result<Subspace> {
    Subspace::span(dim, vectors, &Tolerance::default())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceSpec {
    pub path: PathSpec,
    pub subspace: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilySpec {
    /// `V_t = exp((t − a) K) V_a`.
    Rotation {
        generator: Vec<Vec<f64>>,
        initial: Vec<Vec<f64>>,
        #[serde(default = "default_family_samples")]
        samples: usize,
    },
    Sampled {
        samples: Vec<FamilySample>,
    },
}

fn default_family_samples() -> usize {
    17
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySample {
    pub t: f64,
    pub basis: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TrivializationKind {
    /// Reference space `V_a`, initial map the identity.
    #[default]
    Identity,
    /// Reference space spanned by the first coordinate vectors.
    Coordinate,
}

impl TrivializationKind {
    pub fn build(self, family: &SubspacePath, tol: &Tolerance) -> Result<Trivialization> {
        match self {
            TrivializationKind::Identity => Ok(Trivialization::identity_at_start(family)),
            TrivializationKind::Coordinate => Trivialization::coordinate(family, tol),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarySpec {
    pub path: PathSpec,
    pub family: FamilySpec,
    #[serde(default)]
    pub trivialization: Option<TrivializationKind>,
}

/// A subspace family together with a way to evaluate it between samples.
pub struct Family {
    pub path: SubspacePath,
    pub member: Option<Box<dyn Fn(f64) -> Result<Subspace>>>,
}

impl FamilySpec {
    pub fn build(&self, dim: usize, domain: (f64, f64)) -> Result<Family> {
        match self {
            FamilySpec::Rotation {
                generator,
                initial,
                samples,
            } => {
                let k = matrix_from_rows(generator)?;
                if k.shape() != (dim, dim) {
                    return Err(Error::input("rotation generator has the wrong shape"));
                }
                if max_abs(&(&k + k.transpose())) > 1e-12 * max_abs(&k).max(1.0) {
                    return Err(Error::input("rotation generator must be antisymmetric"));
                }
                let v0 = span(dim, initial)?;
                let start = domain.0;
                let member = move |t: f64| -> Result<Subspace> {
                    Subspace::from_columns(&((&k * (t - start)).exp() * v0.basis()), &Tolerance::default())
                };
                let path = SubspacePath::sample(domain.0, domain.1, (*samples).max(2), &member)?;
                Ok(Family {
                    path,
                    member: Some(Box::new(member)),
                })
            }
            FamilySpec::Sampled { samples } => {
                let list = samples
                    .iter()
                    .map(|s| Ok((s.t, span(dim, &s.basis)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Family {
                    path: SubspacePath::new(list)?,
                    member: None,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrassmannSpec {
    pub dim: usize,
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
}

pub fn diag(d: &[f64]) -> Vec<Vec<f64>> {
    (0..d.len())
        .map(|i| (0..d.len()).map(|j| if i == j { d[i] } else { 0.0 }).collect())
        .collect()
}
