//! The relative-operator pipeline: grid, image group, both operators,
//! pullback, difference and norm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::NodeGrid;
use super::kernel::Truncation;
use super::operator::{assemble_operator, operator_norm, pullback_operator, relative_operator, NormEstimate};
use super::{ScatteringError, SpectralParam};
use crate::kleinian::{GroupIsomorphism, Rect, SchottkyGroup};
use crate::qc::{DiffeoField, SampleGrid};

/// Default nodes per side of the tensor grid.
pub const DEFAULT_GRID_N: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeConfig {
    pub s: SpectralParam,
    pub grid_n: usize,
    pub truncation: Truncation,
    /// Overrides the group's reference rectangle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<Rect>,
}

impl Default for RelativeConfig {
    fn default() -> Self {
        Self {
            s: SpectralParam::real(super::DEFAULT_S),
            grid_n: DEFAULT_GRID_N,
            truncation: Truncation::default(),
            rect: None,
        }
    }
}

/// How the image group was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageGroup {
    /// `ψΓψ⁻¹` for a Möbius `ψ`.
    Conjugation,
    /// Circles through the images of boundary points (non-conformal `ψ`).
    CircleImages,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeReport {
    /// The converged norm, or the lower bracket when not converged.
    pub norm: f64,
    pub estimate: NormEstimate,
    pub converged: bool,
    pub nodes: usize,
    pub image: ImageGroup,
    /// Frobenius norm of the weight-symmetrized `S₁`, for scale.
    pub s1_frobenius: f64,
}

fn weighted_frobenius(m: &super::KernelMatrix) -> f64 {
    let n = m.n;
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            sum += m.get(i, j).norm_sqr() * m.weights[i] / m.weights[j];
        }
    }
    sum.sqrt()
}

/// `‖S₁(s) − ψ*S₂(s)‖` on a tensor grid of the source group.
pub fn relative_norm(
    group: &SchottkyGroup,
    psi: &DiffeoField,
    cfg: &RelativeConfig,
) -> Result<RelativeReport, ScatteringError> {
    cfg.s.require_convergent()?;
    let rect = cfg
        .rect
        .or(group.rect())
        .ok_or_else(|| ScatteringError::InvalidArgument("no reference rectangle for the grid".into()))?;
    let grid = NodeGrid::tensor(group, rect, cfg.grid_n)?;
    let (iso, image) = match psi.as_moebius() {
        Some(h) => (GroupIsomorphism::conjugation(group, &h)?, ImageGroup::Conjugation),
        None => (GroupIsomorphism::circle_images(group, |z| psi.apply(z).ok())?, ImageGroup::CircleImages),
    };
    let pushed = grid.push_forward(psi)?;
    let s1 = assemble_operator(group, &cfg.s, &grid, cfg.truncation)?;
    let s2 = assemble_operator(&iso.image, &cfg.s, &pushed, cfg.truncation)?;
    let pulled = pullback_operator(psi, &grid, &s2)?;
    let rel = relative_operator(&s1, &pulled)?;
    let (estimate, converged) = match operator_norm(&rel) {
        Ok(e) => (e, true),
        Err(ScatteringError::NonConvergence { iterations, lower, upper }) => {
            (NormEstimate { norm: lower, lower, upper, iterations }, false)
        }
        Err(e) => return Err(e),
    };
    Ok(RelativeReport {
        norm: estimate.norm,
        estimate,
        converged,
        nodes: grid.len(),
        image,
        s1_frobenius: weighted_frobenius(&s1),
    })
}

/// One-parameter deformation families for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepFamily {
    /// Constant Beltrami coefficient `μ` (real).
    LinearBeltrami,
    /// Radial stretch with exponent `k`.
    RadialStretch,
}

impl SweepFamily {
    pub fn field(self, p: f64) -> Result<DiffeoField, ScatteringError> {
        Ok(match self {
            SweepFamily::LinearBeltrami => DiffeoField::linear_beltrami(Complex64::new(p, 0.0))?,
            SweepFamily::RadialStretch => DiffeoField::radial_stretch(p)?,
        })
    }

    /// Parameter of the identity map.
    pub fn identity_parameter(self) -> f64 {
        match self {
            SweepFamily::LinearBeltrami => 0.0,
            SweepFamily::RadialStretch => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    /// Maximal dilatation of the deformation over the grid rectangle.
    pub k: Option<f64>,
    pub report: Option<RelativeReport>,
    pub error: Option<String>,
}

/// Relative norms over a deformation family, sorted by parameter, with the
/// identity row always present. Failures are recorded per row.
pub fn srel_sweep(
    group: &SchottkyGroup,
    family: SweepFamily,
    values: &[f64],
    cfg: &RelativeConfig,
) -> Result<Vec<SweepRow>, ScatteringError> {
    cfg.s.require_convergent()?;
    let mut params: Vec<f64> = values.to_vec();
    if !params.iter().any(|p| *p == family.identity_parameter()) {
        params.push(family.identity_parameter());
    }
    if let Some(p) = params.iter().find(|p| !p.is_finite()) {
        return Err(ScatteringError::InvalidArgument(format!("sweep value {p} is not finite")));
    }
    params.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    params.dedup();
    let rect = cfg.rect.or(group.rect());
    Ok(params
        .into_iter()
        .map(|p| {
            let run = || -> Result<(Option<f64>, RelativeReport), ScatteringError> {
                let psi = family.field(p)?;
                let k = match rect {
                    Some(r) => Some(psi.dilatation(&SampleGrid::new(r, 64))?.k_from_lambda),
                    None => None,
                };
                Ok((k, relative_norm(group, &psi, cfg)?))
            };
            match run() {
                Ok((k, report)) => SweepRow { parameter: p, k, report: Some(report), error: None },
                Err(e) => SweepRow { parameter: p, k: None, report: None, error: Some(e.to_string()) },
            }
        })
        .collect())
}
