use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ConeError, Result};
use crate::grid::Grid;
use crate::model_geometry::{DomainSpec, MetricField, Transverse};

/// Normalized right-hand side `f` of the Monge-Ampère equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceTerm {
    pub domain: DomainSpec,
    pub values: Vec<f64>,
    /// Constant added to the raw source by [`build_rhs`].
    pub constant: f64,
    /// Whether the equation carries the `- mu phi` feedback.
    pub mu_coupled: bool,
}

/// Largest raw source value accepted before `exp` is considered unsafe.
pub const SOURCE_OVERFLOW: f64 = 700.0;

fn volume_weights(metric: &MetricField) -> Result<Vec<f64>> {
    let grid = Grid::new(&metric.domain)?;
    Ok(grid
        .quadrature_weights()
        .iter()
        .zip(metric.log_det())
        .map(|(w, ld)| w * ld.exp())
        .collect())
}

/// `f = f_raw + c` with `sum w e^f det g = sum w det g`.
pub fn build_rhs(f_raw: &[f64], metric: &MetricField, mu_coupled: bool) -> Result<SourceTerm> {
    if f_raw.len() != metric.len() {
        return Err(ConeError::DomainMismatch(format!(
            "source has {} values, grid has {}",
            f_raw.len(),
            metric.len()
        )));
    }
    if f_raw.iter().any(|v| !v.is_finite()) {
        return Err(ConeError::InvalidParams("source has non-finite values".into()));
    }
    let top = f_raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top > SOURCE_OVERFLOW {
        return Err(ConeError::Overflow(top));
    }
    let w = volume_weights(metric)?;
    let vol: f64 = w.iter().sum();
    let ef: f64 = w.iter().zip(f_raw).map(|(w, f)| w * (f - top).exp()).sum();
    let c = vol.ln() - ef.ln() - top;
    Ok(SourceTerm {
        domain: metric.domain.clone(),
        values: f_raw.iter().map(|f| f + c).collect(),
        constant: c,
        mu_coupled,
    })
}

/// `|sum w e^f det g - sum w det g| / sum w det g`.
pub fn normalization_defect(source: &SourceTerm, metric: &MetricField) -> Result<f64> {
    let w = volume_weights(metric)?;
    let vol: f64 = w.iter().sum();
    let ef: f64 = w.iter().zip(&source.values).map(|(w, f)| w * f.exp()).sum();
    Ok((ef - vol).abs() / vol)
}

/// Catalog of raw sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    Zero,
    /// `beta b(rho) (1 + cos(2 pi x / L) / 2)`, `b` a radial cosine bump.
    Bump { beta: f64 },
    /// `beta log(rho^2 + eps)`, converging in `L^p` as `eps -> 0`.
    LogRadial { beta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(flatten)]
    pub kind: SourceKind,
    #[serde(default)]
    pub mu_coupled: bool,
}

impl SourceSpec {
    pub fn new(kind: SourceKind) -> Self {
        Self {
            kind,
            mu_coupled: false,
        }
    }

    pub fn from_catalog(name: &str) -> Result<Self> {
        let kind = match name {
            "zero" => SourceKind::Zero,
            "bump" => SourceKind::Bump { beta: 0.5 },
            "log_radial" => SourceKind::LogRadial { beta: 0.2 },
            _ => {
                return Err(ConeError::UnknownCatalog {
                    kind: "source",
                    name: name.to_string(),
                })
            }
        };
        Ok(Self::new(kind))
    }

    /// Raw values on the grid of `domain` for regularization `eps`.
    pub fn sample(&self, domain: &DomainSpec, eps: f64) -> Result<Vec<f64>> {
        let span = domain.rho_max - domain.rho_min;
        let period = domain.smooth_period;
        let smooth = domain.transverse() == Transverse::Smooth;
        let vals = domain
            .points()
            .iter()
            .map(|p| {
                let rho = p[0].norm();
                match self.kind {
                    SourceKind::Zero => 0.0,
                    SourceKind::Bump { beta } => {
                        let b = 0.5 * (1.0 + (PI * (rho - domain.rho_min) / span).cos());
                        let t = if smooth {
                            1.0 + 0.5 * (2.0 * PI * p[1].re / period).cos()
                        } else {
                            1.0
                        };
                        beta * b * t
                    }
                    SourceKind::LogRadial { beta } => beta * (rho * rho + eps).ln(),
                }
            })
            .collect::<Vec<f64>>();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(ConeError::InvalidParams("source is singular on the grid (eps = 0 at the axis?)".into()));
        }
        Ok(vals)
    }
}
