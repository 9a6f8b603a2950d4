use serde::{Deserialize, Serialize};

use super::{is_positive, trace_against, MaProblem, PotentialField, SourceTerm};
use crate::curvature::curvature_at;
use crate::error::{ConeError, Result};
use crate::grid::Grid;
use crate::holder::frame_components;
use crate::model_geometry::{log_det_hermitian, CMatrix, MetricField, ReferenceMetric};
use crate::parallel::par_map;

/// The quantities an a-priori bound on `|dd^c phi|` depends on.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MonitorReport {
    pub phi_sup: f64,
    /// `sup (n + Δ_g phi)`.
    pub sup_trace: f64,
    pub sup_laplacian: f64,
    pub inf_f: f64,
    /// `inf min(Δ_g f, 0)`.
    pub inf_laplacian_f_minus: f64,
    /// Infimum of normalized bisectional curvature of the reference metric
    /// over grid nodes and frame pairs; `None` when not requested.
    pub inf_bisectional: Option<f64>,
}

/// Record `|phi|_inf`, `sup(n + Δφ)`, `inf f`, `inf (Δf)^-` and optionally
/// the curvature infimum of `reference` over the grid.
pub fn laplacian_monitor(
    phi: &PotentialField,
    metric: &MetricField,
    source: &SourceTerm,
    reference: Option<&ReferenceMetric>,
    workers: usize,
) -> Result<MonitorReport> {
    if phi.domain != metric.domain || source.domain != metric.domain {
        return Err(ConeError::DomainMismatch("monitor inputs on different grids".into()));
    }
    let prob = MaProblem::new(metric)?;
    let nu = prob.unknowns();
    let lap = prob.laplacian(&phi.values);
    let sup_lap = lap[..nu].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = metric.dim() as f64;
    let grid = &prob.grid;
    let fh = grid.hessian_field(&source.values, grid.default_inner());
    let lap_f = fh
        .iter()
        .zip(&metric.matrices)
        .map(|(h, g)| trace_against(g, h))
        .fold(f64::INFINITY, f64::min);
    let inf_bis = match reference {
        Some(m) => {
            let pts = metric.domain.points();
            let vals = par_map(&pts, workers, |p| -> Result<f64> {
                let s = curvature_at(m, p)?;
                Ok(s.frame_pairs.iter().map(|x| x.1).fold(f64::INFINITY, f64::min))
            });
            let mut inf = f64::INFINITY;
            for v in vals {
                inf = inf.min(v?);
            }
            Some(inf)
        }
        None => None,
    };
    Ok(MonitorReport {
        phi_sup: phi.sup_norm(),
        sup_trace: n + sup_lap,
        sup_laplacian: sup_lap,
        inf_f: source.values.iter().cloned().fold(f64::INFINITY, f64::min),
        inf_laplacian_f_minus: lap_f.min(0.0),
        inf_bisectional: inf_bis,
    })
}

/// Margins of the second-order estimate
/// `Δ' log(n + Δφ) >= (Δf + Σ R_{a a b b} ((1 + λ_a)/(1 + λ_b) - 1)) / (n + Δφ)`
/// in a frame that is `g`-unitary and diagonalizes `dd^c φ`, and of the
/// variant with `log(n + Δφ) - C_2 φ` on the left.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InequalityReport {
    pub c2: f64,
    pub min_margin: f64,
    pub argmin: usize,
    /// Smallest `margin + 10 h^2 scale`: nonnegative when every node passes.
    pub min_tolerance_slack: f64,
    pub h: f64,
    /// Interior node minimizing `n + Δφ - C_2 φ`.
    pub extremum: usize,
    pub margin_at_extremum: f64,
    pub shifted_margin_at_extremum: f64,
    pub min_shifted_margin: f64,
}

/// Evaluate the inequality at the interior nodes.
pub fn differential_inequality_check(
    phi: &PotentialField,
    metric: &MetricField,
    source: &SourceTerm,
    reference: &ReferenceMetric,
    c2: f64,
    workers: usize,
) -> Result<InequalityReport> {
    if phi.domain != metric.domain || source.domain != metric.domain {
        return Err(ConeError::DomainMismatch("inequality inputs on different grids".into()));
    }
    let prob = MaProblem::new(metric)?;
    let grid = &prob.grid;
    let n = grid.dim();
    let nf = n as f64;
    let hphi = prob.hessians(&phi.values);
    let trace: Vec<f64> = hphi
        .iter()
        .zip(&metric.matrices)
        .map(|(h, g)| nf + trace_against(g, h))
        .collect();
    if let Some(k) = trace.iter().position(|t| !(*t > 0.0)) {
        return Err(ConeError::FrameFailure(k));
    }
    let q: Vec<f64> = trace.iter().map(|t| t.ln()).collect();
    let hq = grid.hessian_field(&q, grid.default_inner());
    let hf = grid.hessian_field(&source.values, grid.default_inner());
    let points = metric.domain.points();
    let interior: Vec<usize> = (1..grid.nr - 1)
        .flat_map(|i| (0..grid.nt).map(move |j| (i, j)))
        .map(|(i, j)| grid.index(i, j))
        .collect();
    let rows = par_map(&interior, workers, |&p| -> Result<(f64, f64, f64)> {
        let g = &metric.matrices[p];
        let gp = g + &hphi[p];
        if !is_positive(&gp) {
            return Err(ConeError::FrameFailure(p));
        }
        let lhs = trace_against(&gp, &hq[p]);
        let lap_f = trace_against(g, &hf[p]);
        let m = frame_components(g, &hphi[p]).map_err(|_| ConeError::FrameFailure(p))?;
        let eig = m.clone().symmetric_eigen();
        let lam = &eig.eigenvalues;
        let chol = g.clone().cholesky().ok_or(ConeError::FrameFailure(p))?;
        let linv_adj = chol.l().try_inverse().ok_or(ConeError::FrameFailure(p))?.adjoint();
        let frame: CMatrix = &linv_adj * &eig.eigenvectors;
        let s = curvature_at(reference, &points[p])?;
        let mut sum = 0.0;
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let va: Vec<_> = frame.column(a).iter().cloned().collect();
                let vb: Vec<_> = frame.column(b).iter().cloned().collect();
                sum += s.bisectional(&va, &vb) * ((1.0 + lam[a]) / (1.0 + lam[b]) - 1.0);
            }
        }
        let rhs = (lap_f + sum) / trace[p];
        // Δ'φ = n - tr_{g'} g
        let lap_prime_phi = nf - trace_against(&gp, g);
        let scale = 1.0 + hq[p].iter().fold(0.0f64, |m, z| m.max(z.norm())) + lap_f.abs();
        Ok((lhs - rhs, lhs - c2 * lap_prime_phi - rhs, scale))
    });
    let mut margins = Vec::with_capacity(rows.len());
    for r in rows {
        margins.push(r?);
    }
    let h2 = grid.h * grid.h;
    let mut min_margin = f64::INFINITY;
    let mut argmin = 0;
    let mut slack = f64::INFINITY;
    let mut min_shift = f64::INFINITY;
    let mut ext = (f64::INFINITY, 0usize);
    for (k, &(m, ms, scale)) in margins.iter().enumerate() {
        let p = interior[k];
        if m < min_margin {
            min_margin = m;
            argmin = p;
        }
        slack = slack.min(m + 10.0 * h2 * scale);
        min_shift = min_shift.min(ms);
        let w = trace[p] - c2 * phi.values[p];
        if w < ext.0 {
            ext = (w, k);
        }
    }
    let (_, ek) = ext;
    Ok(InequalityReport {
        c2,
        min_margin,
        argmin,
        min_tolerance_slack: slack,
        h: grid.h,
        extremum: interior[ek],
        margin_at_extremum: margins[ek].0,
        shifted_margin_at_extremum: margins[ek].1,
        min_shifted_margin: min_shift,
    })
}

/// Smallest `C_2` the shifted estimate asks for: `2 C (n^2 + 1) / min eig g`
/// with `C = max(0, -inf R)`.
pub fn suggested_c2(inf_bisectional: f64, metric: &MetricField) -> f64 {
    let n = metric.dim() as f64;
    let c = (-inf_bisectional).max(0.0);
    let lam = metric
        .matrices
        .iter()
        .map(crate::model_geometry::min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    2.0 * c * (n * n + 1.0) / lam
}

/// `H = log det dd^c w - log |z_1|^{2 tau - 2} + mu w` at the nodes of the
/// local chart. The chart is a ball, not a cylinder: nodes whose stencil
/// crosses the periodic seam of the smooth direction are `NaN`.
pub fn localized_h(w: &PotentialField, mu: f64, tau: f64) -> Result<Vec<f64>> {
    let grid = Grid::new(&w.domain)?;
    let hs = grid.hessian_field(&w.values, grid.default_inner());
    let points = w.domain.points();
    let seam = grid.kind == crate::model_geometry::Transverse::Smooth;
    let mut out = Vec::with_capacity(hs.len());
    for (k, (h, p)) in hs.iter().zip(&points).enumerate() {
        let j = k % grid.nt;
        if seam && (j == 0 || j + 1 == grid.nt) {
            out.push(f64::NAN);
            continue;
        }
        if !is_positive(h) {
            return Err(ConeError::NotPsh(k));
        }
        let r2 = p[0].norm_sqr();
        out.push(log_det_hermitian(h) - (tau - 1.0) * r2.ln() + mu * w.values[k]);
    }
    Ok(out)
}

/// `sup |log det dd^c w - log |z_1|^{2 tau - 2} + mu w - H|`.
pub fn localized_residual(w: &PotentialField, mu: f64, h: &[f64], tau: f64) -> Result<f64> {
    let lh = localized_h(w, mu, tau)?;
    if h.len() != lh.len() {
        return Err(ConeError::DomainMismatch("H has the wrong length".into()));
    }
    Ok(lh
        .iter()
        .zip(h)
        .filter(|(a, _)| a.is_finite())
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// Oscillation of a grid field over nodes with `|z_1| <= radius`.
pub fn oscillation_within(values: &[f64], w: &PotentialField, radius: f64) -> f64 {
    let pts = w.domain.points();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (v, p) in values.iter().zip(&pts) {
        if p[0].norm() <= radius && v.is_finite() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}
