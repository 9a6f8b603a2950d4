use serde::{Deserialize, Serialize};

use super::{sup_abs, trace_against, MaProblem};
use crate::curvature::{condition_number, COND_WARN};
use crate::error::Result;
use crate::grid::Grid;
use crate::model_geometry::{CMatrix, MetricField};

/// Ricci form `-dd^c log det g` on a grid, with its trace and (optionally)
/// a Ricci potential.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RicciData {
    #[serde(skip)]
    pub form: Vec<CMatrix>,
    pub trace: Vec<f64>,
    pub potential: Option<Vec<f64>>,
    pub mu: f64,
    /// `inf min(Δ_g f, 0)` over the grid (zero when no potential was solved).
    pub inf_laplacian_minus: f64,
    pub inf_laplacian: f64,
    /// `max (tr_g rho)^+ |z_1|^{2 tau}` over the innermost tenth of the radial rows.
    pub growth_ratio: f64,
    pub ill_conditioned: bool,
}

/// `rho = -dd^c log det g` by second differences.
pub fn ricci_form(metric: &MetricField) -> Result<RicciData> {
    metric.check_positive()?;
    let grid = Grid::new(&metric.domain)?;
    let ld = metric.log_det();
    let neg: Vec<f64> = ld.iter().map(|v| -v).collect();
    let form = grid.hessian_field(&neg, grid.default_inner());
    let trace: Vec<f64> = form
        .iter()
        .zip(&metric.matrices)
        .map(|(r, g)| trace_against(g, r))
        .collect();
    let ill = metric.matrices.iter().any(|g| condition_number(g) > COND_WARN);
    let tau = metric.domain.cone_angles[0];
    let rows = (grid.nr / 10).max(1);
    let mut growth: f64 = 0.0;
    for i in 0..rows {
        for j in 0..grid.nt {
            let t = trace[grid.index(i, j)].max(0.0);
            growth = growth.max(t * grid.rho[i].powf(2.0 * tau));
        }
    }
    Ok(RicciData {
        form,
        trace,
        potential: None,
        mu: 0.0,
        inf_laplacian_minus: 0.0,
        inf_laplacian: f64::NAN,
        growth_ratio: growth,
        ill_conditioned: ill,
    })
}

/// Solve `Δ_g f = tr_g(rho - mu g)` with `f = 0` on the outer boundary.
pub fn ricci_potential(metric: &MetricField, mu: f64, workers: usize) -> Result<RicciData> {
    let mut data = ricci_form(metric)?;
    let n = metric.dim() as f64;
    let rhs: Vec<f64> = data.trace.iter().map(|t| t - mu * n).collect();
    let prob = MaProblem::new(metric)?;
    let f = if sup_abs(&rhs) == 0.0 {
        vec![0.0; metric.len()]
    } else {
        prob.poisson(&rhs, workers)?
    };
    let lap = prob.laplacian(&f);
    let nu = prob.unknowns();
    data.inf_laplacian = lap[..nu].iter().cloned().fold(f64::INFINITY, f64::min);
    data.inf_laplacian_minus = data.inf_laplacian.min(0.0);
    data.potential = Some(f);
    data.mu = mu;
    Ok(data)
}
