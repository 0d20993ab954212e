//! Frame data along a closed geodesic: the metric signature `G`, the frame
//! connection `Γ_t`, the curvature endomorphism `R̄_t` and an optional
//! holonomy `S`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows, max_abs, Matrix};

const STRUCTURE_TOL: f64 = 1e-10;

/// A matrix-valued function of `t ∈ [0, 1]`, periodic with period 1.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Const(Matrix),
    /// `c0 + Σ_q cos_q cos(2πqt) + sin_q sin(2πqt)`, `q = 1, 2, …`.
    Fourier {
        c0: Matrix,
        cos: Vec<Matrix>,
        sin: Vec<Matrix>,
    },
}

impl Coefficients {
    pub fn zero(n: usize) -> Self {
        Coefficients::Const(Matrix::zeros(n, n))
    }

    pub fn eval(&self, t: f64) -> Matrix {
        match self {
            Coefficients::Const(m) => m.clone(),
            Coefficients::Fourier { c0, cos, sin } => {
                let mut out = c0.clone();
                for (q, c) in cos.iter().enumerate() {
                    out += c * (2.0 * PI * (q + 1) as f64 * t).cos();
                }
                for (q, s) in sin.iter().enumerate() {
                    out += s * (2.0 * PI * (q + 1) as f64 * t).sin();
                }
                out
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Coefficients::Const(_) => true,
            Coefficients::Fourier { cos, sin, .. } => cos
                .iter()
                .chain(sin)
                .all(|m| m.iter().all(|&x| x == 0.0)),
        }
    }

    /// Highest frequency present.
    pub fn max_frequency(&self) -> usize {
        match self {
            Coefficients::Const(_) => 0,
            Coefficients::Fourier { cos, sin, .. } => cos.len().max(sin.len()),
        }
    }

    /// Every matrix that enters the expansion linearly.
    fn terms(&self) -> Vec<&Matrix> {
        match self {
            Coefficients::Const(m) => vec![m],
            Coefficients::Fourier { c0, cos, sin } => {
                std::iter::once(c0).chain(cos).chain(sin).collect()
            }
        }
    }

    fn check_shape(&self, n: usize, what: &str) -> Result<()> {
        for m in self.terms() {
            if m.shape() != (n, n) {
                return Err(Error::input(format!(
                    "{what} coefficient has shape {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !crate::linalg::is_finite(m) {
                return Err(Error::input(format!("{what} coefficient has non-finite entries")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicFrameData {
    n: usize,
    g: Vec<f64>,
    gamma: Coefficients,
    rbar: Coefficients,
    holonomy: Option<Matrix>,
}

impl GeodesicFrameData {
    /// Validates: `G = diag(±1)`, `GΓ + ΓᵀG = 0`, `GR̄` symmetric (both
    /// checked on every coefficient matrix, which covers all `t` since the
    /// conditions are linear) and `SᵀGS = G` when a holonomy is given.
    pub fn new(
        g: Vec<f64>,
        gamma: Coefficients,
        rbar: Coefficients,
        holonomy: Option<Matrix>,
    ) -> Result<Self> {
        let n = g.len();
        if n == 0 {
            return Err(Error::input("frame dimension must be positive"));
        }
        if g.iter().any(|&x| x != 1.0 && x != -1.0) {
            return Err(Error::input("G entries must be +1 or -1"));
        }
        gamma.check_shape(n, "Gamma")?;
        rbar.check_shape(n, "Rbar")?;
        let gm = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&g));
        for c in gamma.terms() {
            let defect = max_abs(&(&gm * c + c.transpose() * &gm));
            if defect > STRUCTURE_TOL * (1.0 + max_abs(c)) {
                return Err(Error::input(format!(
                    "Gamma is not G-antisymmetric (defect {defect:.3e})"
                )));
            }
        }
        for c in rbar.terms() {
            let gr = &gm * c;
            let defect = crate::linalg::symmetry_defect(&gr);
            if defect > STRUCTURE_TOL * (1.0 + max_abs(c)) {
                return Err(Error::input(format!(
                    "G*Rbar is not symmetric (defect {defect:.3e})"
                )));
            }
        }
        if let Some(s) = &holonomy {
            if s.shape() != (n, n) {
                return Err(Error::input("holonomy S must be n x n"));
            }
            let defect = max_abs(&(s.transpose() * &gm * s - &gm));
            if defect > STRUCTURE_TOL {
                return Err(Error::input(format!(
                    "holonomy does not preserve G (|SᵀGS - G| = {defect:.3e})"
                )));
            }
        }
        Ok(GeodesicFrameData {
            n,
            g,
            gamma,
            rbar,
            holonomy,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn signs(&self) -> &[f64] {
        &self.g
    }

    pub fn g(&self) -> Matrix {
        Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.g))
    }

    /// Number of timelike (`-1`) directions.
    pub fn n_minus_g(&self) -> usize {
        self.g.iter().filter(|&&x| x < 0.0).count()
    }

    pub fn gamma(&self) -> &Coefficients {
        &self.gamma
    }

    pub fn rbar(&self) -> &Coefficients {
        &self.rbar
    }

    pub fn holonomy(&self) -> Option<&Matrix> {
        self.holonomy.as_ref()
    }

    pub fn with_holonomy(&self, s: Option<Matrix>) -> Result<Self> {
        Self::new(self.g.clone(), self.gamma.clone(), self.rbar.clone(), s)
    }

    /// Same data with `R̄` replaced by `R̄ + εI`, for moving a degenerate
    /// crossing off the critical configuration. `G(R̄ + εI)` stays symmetric.
    pub fn with_curvature_shift(&self, eps: f64) -> Result<Self> {
        let shift = Matrix::identity(self.n(), self.n()) * eps;
        let rbar = match &self.rbar {
            Coefficients::Const(m) => Coefficients::Const(m + shift),
            Coefficients::Fourier { c0, cos, sin } => Coefficients::Fourier {
                c0: c0 + shift,
                cos: cos.clone(),
                sin: sin.clone(),
            },
        };
        Self::new(self.g.clone(), self.gamma.clone(), rbar, self.holonomy.clone())
    }

    pub fn is_constant(&self) -> bool {
        self.gamma.is_constant() && self.rbar.is_constant()
    }

    pub fn max_frequency(&self) -> usize {
        self.gamma.max_frequency().max(self.rbar.max_frequency())
    }
}

/// Parameters understood by [`example_frame`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExampleParams {
    /// Dimension for `flat_torus` (default 2).
    pub n: Option<usize>,
    /// `c` in `R̄ = diag(0, c)` for `constant_curvature` (default 1).
    pub curvature: Option<f64>,
}

pub const EXAMPLE_NAMES: [&str; 4] = [
    "flat_torus",
    "sphere_equator",
    "lorentz_product",
    "constant_curvature",
];

fn diag(d: &[f64]) -> Matrix {
    Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(d))
}

/// Constant data with `Γ = 0`.
pub fn constant_curvature(g: Vec<f64>, rbar: Matrix) -> Result<GeodesicFrameData> {
    let n = g.len();
    GeodesicFrameData::new(g, Coefficients::zero(n), Coefficients::Const(rbar), None)
}

pub fn example_frame(name: &str, params: &ExampleParams) -> Result<GeodesicFrameData> {
    let four_pi2 = 4.0 * PI * PI;
    match name {
        "flat_torus" => {
            let n = params.n.unwrap_or(2);
            constant_curvature(vec![1.0; n], Matrix::zeros(n, n))
        }
        "sphere_equator" => constant_curvature(vec![1.0, 1.0], diag(&[0.0, -four_pi2])),
        "lorentz_product" => {
            constant_curvature(vec![1.0, 1.0, -1.0], diag(&[0.0, -four_pi2, 0.0]))
        }
        "constant_curvature" => {
            let c = params.curvature.unwrap_or(1.0);
            constant_curvature(vec![1.0, 1.0], diag(&[0.0, c]))
        }
        other => Err(Error::input(format!(
            "unknown example '{other}' (known: {})",
            EXAMPLE_NAMES.join(", ")
        ))),
    }
}

/// JSON form of a coefficient function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CoefficientsSpec {
    Const { coeffs: Vec<Vec<f64>> },
    Fourier { coeffs: FourierSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSpec {
    pub c0: Vec<Vec<f64>>,
    #[serde(default)]
    pub cos: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub sin: Vec<Vec<Vec<f64>>>,
}

impl CoefficientsSpec {
    pub fn build(&self) -> Result<Coefficients> {
        Ok(match self {
            CoefficientsSpec::Const { coeffs } => Coefficients::Const(matrix_from_rows(coeffs)?),
            CoefficientsSpec::Fourier { coeffs } => Coefficients::Fourier {
                c0: matrix_from_rows(&coeffs.c0)?,
                cos: coeffs.cos.iter().map(|m| matrix_from_rows(m)).collect::<Result<_>>()?,
                sin: coeffs.sin.iter().map(|m| matrix_from_rows(m)).collect::<Result<_>>()?,
            },
        })
    }

    pub fn from_coefficients(c: &Coefficients) -> Self {
        match c {
            Coefficients::Const(m) => CoefficientsSpec::Const {
                coeffs: matrix_to_rows(m),
            },
            Coefficients::Fourier { c0, cos, sin } => CoefficientsSpec::Fourier {
                coeffs: FourierSpec {
                    c0: matrix_to_rows(c0),
                    cos: cos.iter().map(matrix_to_rows).collect(),
                    sin: sin.iter().map(matrix_to_rows).collect(),
                },
            },
        }
    }
}

/// JSON geodesic problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub n: usize,
    #[serde(rename = "G")]
    pub g: Vec<f64>,
    #[serde(rename = "Gamma", default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<CoefficientsSpec>,
    #[serde(rename = "Rbar", default, skip_serializing_if = "Option::is_none")]
    pub rbar: Option<CoefficientsSpec>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
}

impl GeodesicSpec {
    pub fn build(&self) -> Result<GeodesicFrameData> {
        if self.g.len() != self.n {
            return Err(Error::input(format!(
                "G has {} entries but n = {}",
                self.g.len(),
                self.n
            )));
        }
        let coeffs = |spec: &Option<CoefficientsSpec>| match spec {
            Some(s) => s.build(),
            None => Ok(Coefficients::zero(self.n)),
        };
        let s = self.s.as_ref().map(|rows| matrix_from_rows(rows)).transpose()?;
        GeodesicFrameData::new(self.g.clone(), coeffs(&self.gamma)?, coeffs(&self.rbar)?, s)
    }

    pub fn from_frame(frame: &GeodesicFrameData, modes: Option<usize>) -> Self {
        GeodesicSpec {
            n: frame.n(),
            g: frame.signs().to_vec(),
            gamma: Some(CoefficientsSpec::from_coefficients(frame.gamma())),
            rbar: Some(CoefficientsSpec::from_coefficients(frame.rbar())),
            s: frame.holonomy().map(matrix_to_rows),
            modes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curvature_shift_moves_rbar_only() {
        let f = example_frame("sphere_equator", &ExampleParams::default()).unwrap();
        let g = f.with_curvature_shift(0.25).unwrap();
        assert_eq!(g.rbar().eval(0.3) - f.rbar().eval(0.3), Matrix::identity(2, 2) * 0.25);
        assert_eq!(g.gamma(), f.gamma());
    }

    #[test]
    fn catalog_frames_validate() {
        for name in EXAMPLE_NAMES {
            let f = example_frame(name, &ExampleParams::default()).unwrap();
            let g = f.g();
            let gr = &g * f.rbar().eval(0.3);
            assert!(crate::linalg::symmetry_defect(&gr) == 0.0);
        }
        assert_eq!(example_frame("lorentz_product", &ExampleParams::default()).unwrap().n_minus_g(), 1);
        assert!(example_frame("klein_bottle", &ExampleParams::default()).unwrap_err().is_input());
    }

    #[test]
    fn rejects_broken_structure() {
        let bad_r = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(constant_curvature(vec![1.0, 1.0], bad_r).unwrap_err().is_input());
        let sym_gamma = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let err = GeodesicFrameData::new(
            vec![1.0, 1.0],
            Coefficients::Const(sym_gamma.clone()),
            Coefficients::zero(2),
            None,
        );
        assert!(err.unwrap_err().is_input());
        // the same Γ is G-antisymmetric for G = diag(1, -1)
        assert!(GeodesicFrameData::new(
            vec![1.0, -1.0],
            Coefficients::Const(sym_gamma),
            Coefficients::zero(2),
            None
        )
        .is_ok());
        assert!(GeodesicFrameData::new(vec![2.0], Coefficients::zero(1), Coefficients::zero(1), None).is_err());
        let boost = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(constant_curvature(vec![1.0, 1.0], Matrix::zeros(2, 2))
            .unwrap()
            .with_holonomy(Some(boost))
            .is_err());
    }

    #[test]
    fn fourier_evaluation() {
        let c = Coefficients::Fourier {
            c0: Matrix::from_element(1, 1, 1.0),
            cos: vec![Matrix::from_element(1, 1, 2.0)],
            sin: vec![Matrix::zeros(1, 1), Matrix::from_element(1, 1, 3.0)],
        };
        let t = 0.125;
        let expected = 1.0 + 2.0 * (2.0 * PI * t).cos() + 3.0 * (4.0 * PI * t).sin();
        assert!((c.eval(t)[(0, 0)] - expected).abs() < 1e-14);
        assert_eq!(c.max_frequency(), 2);
        assert!(!c.is_constant());
    }

    #[test]
    fn spec_round_trip() {
        let f = example_frame("sphere_equator", &ExampleParams::default()).unwrap();
        let spec = GeodesicSpec::from_frame(&f, Some(8));
        let json = serde_json::to_string(&spec).unwrap();
        let back: GeodesicSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build().unwrap(), f);
        let broken = r#"{"n": 2, "G": [1, 1], "Gamma": {"type": "spline", "coeffs": []}}"#;
        assert!(serde_json::from_str::<GeodesicSpec>(broken).is_err());
    }
}
