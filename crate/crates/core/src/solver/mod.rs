//! Damped Newton solver for the regularized complex Monge-Ampère equation
//! `log det(g + dd^c phi) - log det g = f (- mu phi)` on the model grids,
//! with Ricci data and the monitored a-priori quantities.

mod monitor;
mod ricci;
mod source;

pub use monitor::*;
pub use ricci::*;
pub use source::*;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::banded::{band_solve, BandMatrix};
use crate::error::{ConeError, Result};
use crate::grid::{Grid, Inner, Stencil};
use crate::model_geometry::{log_det_hermitian, CMatrix, ConeParams, DomainSpec, MetricField, ReferenceMetric};
use crate::parallel::par_map;

/// Scalar potential on a grid, `phi = boundary_value` on the outer radial row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    pub domain: DomainSpec,
    pub values: Vec<f64>,
    #[serde(default)]
    pub boundary_value: f64,
}

impl PotentialField {
    pub fn zeros(domain: &DomainSpec) -> Self {
        Self {
            domain: domain.clone(),
            values: vec![0.0; domain.len()],
            boundary_value: 0.0,
        }
    }

    pub fn from_fn<F: Fn(&[Complex64]) -> f64>(domain: &DomainSpec, f: F) -> Self {
        Self {
            domain: domain.clone(),
            values: domain.points().iter().map(|p| f(p)).collect(),
            boundary_value: 0.0,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        sup_abs(&self.values)
    }
}

pub(crate) fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Positive definiteness for the `n <= 2` matrices used on grids.
pub(crate) fn is_positive(m: &CMatrix) -> bool {
    match m.nrows() {
        1 => m[(0, 0)].re > 0.0,
        2 => m[(0, 0)].re > 0.0 && m[(0, 0)].re * m[(1, 1)].re - m[(0, 1)].norm_sqr() > 0.0,
        _ => crate::model_geometry::min_eigenvalue(m) > 0.0,
    }
}

/// `tr(A^{-1} B)` for Hermitian `A`.
pub(crate) fn trace_against(a: &CMatrix, b: &CMatrix) -> f64 {
    let inv = a.clone().try_inverse().expect("invertible metric");
    (&inv * b).trace().re
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub max_picard: usize,
    pub workers: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 60,
            max_halvings: 40,
            max_picard: 60,
            workers: 1,
        }
    }
}

/// Outcome of one solve plus the monitored a-priori inputs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub epsilon: f64,
    pub iterations: usize,
    pub halvings: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub normalization_defect: f64,
    #[serde(flatten)]
    pub monitor: MonitorReport,
    /// Excluded from JSON so that reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// The discretized operator for one metric and grid.
pub struct MaProblem<'a> {
    pub grid: Grid,
    pub metric: &'a MetricField,
    inner: Inner,
    stencils: Vec<Stencil>,
    log_det_g: Vec<f64>,
    unknowns: usize,
}

impl<'a> MaProblem<'a> {
    pub fn new(metric: &'a MetricField) -> Result<Self> {
        let grid = Grid::new(&metric.domain)?;
        let inner = grid.solver_inner();
        let mut stencils = Vec::with_capacity(grid.len());
        for i in 0..grid.nr {
            for j in 0..grid.nt {
                stencils.push(grid.stencil(i, j, inner));
            }
        }
        let unknowns = (grid.nr - 1) * grid.nt;
        Ok(Self {
            log_det_g: metric.log_det(),
            grid,
            metric,
            inner,
            stencils,
            unknowns,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.unknowns
    }

    pub fn inner(&self) -> Inner {
        self.inner
    }

    /// `dd^c phi` at every node (outer row one-sided).
    pub fn hessians(&self, phi: &[f64]) -> Vec<CMatrix> {
        let n = self.grid.dim();
        self.stencils.iter().map(|s| s.hessian(phi, n)).collect()
    }

    /// `log det(g + H) - log det g - f + mu phi` on the unknowns; `None` if
    /// `g + H` fails to be positive somewhere.
    pub fn residual(&self, phi: &[f64], f: &[f64], mu: f64) -> Option<Vec<f64>> {
        let n = self.grid.dim();
        let mut out = Vec::with_capacity(self.unknowns);
        for p in 0..self.unknowns {
            let gp = &self.metric.matrices[p] + self.stencils[p].hessian(phi, n);
            if !is_positive(&gp) {
                return None;
            }
            out.push(log_det_hermitian(&gp) - self.log_det_g[p] - f[p] + mu * phi[p]);
        }
        Some(out)
    }

    /// Band matrix of `u -> tr((g + H)^{-1} dd^c u) + shift u` on the unknowns.
    pub fn linearization(&self, phi: &[f64], shift: f64, workers: usize) -> BandMatrix {
        let n = self.grid.dim();
        let bw = 2 * self.grid.nt - 1;
        let nu = self.unknowns;
        let idx: Vec<usize> = (0..nu).collect();
        let rows = par_map(&idx, workers, |&p| {
            let gp = &self.metric.matrices[p] + self.stencils[p].hessian(phi, n);
            let inv = gp.try_inverse().unwrap_or_else(|| CMatrix::zeros(n, n));
            let c11 = inv[(0, 0)].re;
            let (c22, c12) = if n > 1 {
                (inv[(1, 1)].re, 2.0 * inv[(0, 1)].re)
            } else {
                (0.0, 0.0)
            };
            let st = &self.stencils[p];
            let mut row: Vec<(usize, f64)> = Vec::new();
            for (list, c) in [(&st.d11, c11), (&st.d22, c22), (&st.d12, c12)] {
                for &(k, w) in list.iter() {
                    row.push((k, c * w));
                }
            }
            row
        });
        let mut a = BandMatrix::new(nu, bw, bw);
        for (p, row) in rows.into_iter().enumerate() {
            for (k, w) in row {
                if k < nu {
                    a.add(p, k, w);
                }
            }
            if shift != 0.0 {
                a.add(p, p, shift);
            }
        }
        a
    }

    /// Full-grid vector from unknowns plus the Dirichlet row.
    pub fn expand(&self, u: &[f64], boundary: f64) -> Vec<f64> {
        let mut v = u.to_vec();
        v.resize(self.grid.len(), boundary);
        v
    }

    /// `tr_g(dd^c u)` at every node.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let hs = self.hessians(u);
        hs.iter()
            .zip(&self.metric.matrices)
            .map(|(h, g)| trace_against(g, h))
            .collect()
    }

    /// Solve the linear Dirichlet problem `tr_g(dd^c u) = rhs` (`u = 0` on the outer row).
    pub fn poisson(&self, rhs: &[f64], workers: usize) -> Result<Vec<f64>> {
        let zeros = vec![0.0; self.grid.len()];
        let a = self.linearization(&zeros, 0.0, workers);
        let u = band_solve(a, &rhs[..self.unknowns])?;
        Ok(self.expand(&u, 0.0))
    }
}

/// Damped Newton iteration from `initial` (or zero) for fixed source values.
fn newton_inner(
    prob: &MaProblem,
    f: &[f64],
    mu: f64,
    initial: &[f64],
    opts: &SolveOptions,
    iter_base: usize,
) -> Result<(Vec<f64>, Vec<f64>, usize, usize)> {
    let nu = prob.unknowns();
    let mut phi = prob.expand(&initial[..nu], 0.0);
    let mut res = prob.residual(&phi, f, mu).ok_or(ConeError::PositivityUnrecoverable {
        iteration: iter_base,
        halvings: 0,
    })?;
    let mut norm = sup_abs(&res);
    let mut history = vec![norm];
    let mut halvings = 0;
    for it in 0..opts.max_iterations {
        if norm <= opts.tol {
            return Ok((phi, history, it, halvings));
        }
        let a = prob.linearization(&phi, mu, opts.workers);
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let delta = band_solve(a, &rhs)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = (0..phi.len())
                .map(|k| if k < nu { phi[k] + t * delta[k] } else { phi[k] })
                .collect();
            if let Some(r) = prob.residual(&trial, f, mu) {
                let rn = sup_abs(&r);
                if rn < norm {
                    phi = trial;
                    res = r;
                    norm = rn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
            halvings += 1;
        }
        if !accepted {
            if norm <= 10.0 * opts.tol {
                // stalled at the rounding floor just above tol
                return Ok((phi, history, it, halvings));
            }
            return Err(ConeError::PositivityUnrecoverable {
                iteration: iter_base + it,
                halvings: opts.max_halvings,
            });
        }
        history.push(norm);
    }
    if norm <= opts.tol {
        return Ok((phi, history, opts.max_iterations, halvings));
    }
    Err(ConeError::MaxIterations {
        iterations: opts.max_iterations,
        residual: norm,
    })
}

/// Solve `(omega + dd^c phi)^n = e^f omega^n` (with `- mu phi` when the source
/// is mu-coupled) with `phi = 0` on the outer boundary.
pub fn newton_solve(
    params: &ConeParams,
    metric: &MetricField,
    source: &SourceTerm,
    opts: &SolveOptions,
    initial: Option<&PotentialField>,
) -> Result<(PotentialField, SolveReport)> {
    let start = std::time::Instant::now();
    if source.domain != metric.domain {
        return Err(ConeError::DomainMismatch("source and metric grids differ".into()));
    }
    if params.epsilon == 0.0 && metric.domain.rho_min == 0.0 {
        return Err(ConeError::InvalidDomain("the solver needs epsilon > 0 or rho_min > 0".into()));
    }
    metric.check_positive()?;
    let prob = MaProblem::new(metric)?;
    let init = match initial {
        Some(p) if p.domain == metric.domain => p.values.clone(),
        Some(_) => return Err(ConeError::DomainMismatch("initial guess on another grid".into())),
        None => vec![0.0; metric.len()],
    };
    let mu = if source.mu_coupled { params.mu } else { 0.0 };
    let (phi, history, iterations, halvings) = if mu <= 0.0 {
        newton_inner(&prob, &source.values, mu, &init, opts, 0)?
    } else {
        // Picard on the -mu phi feedback
        let mut phi = prob.expand(&init[..prob.unknowns()], 0.0);
        let mut history = Vec::new();
        let mut iters = 0;
        let mut halv = 0;
        let mut converged = false;
        let mut last_change = f64::INFINITY;
        let mut growing = 0;
        for _ in 0..opts.max_picard {
            let f: Vec<f64> = source.values.iter().zip(&phi).map(|(f, p)| f - mu * p).collect();
            let (next, h, it, hv) = newton_inner(&prob, &f, 0.0, &phi, opts, iters)?;
            iters += it;
            halv += hv;
            history.extend(h);
            let change = phi.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            phi = next;
            if change <= opts.tol {
                converged = true;
                break;
            }
            // mu beyond the contraction range of the feedback
            growing = if change > last_change { growing + 1 } else { 0 };
            last_change = change;
            if growing >= 3 {
                break;
            }
        }
        if !converged {
            return Err(ConeError::MaxIterations {
                iterations: iters,
                residual: *history.last().unwrap_or(&f64::NAN),
            });
        }
        let r = sup_abs(&prob.residual(&phi, &source.values, mu).expect("accepted iterate is positive"));
        history.push(r);
        (phi, history, iters, halv)
    };
    let field = PotentialField {
        domain: metric.domain.clone(),
        values: phi,
        boundary_value: 0.0,
    };
    let monitor = laplacian_monitor(&field, metric, source, None, opts.workers)?;
    let report = SolveReport {
        epsilon: params.epsilon,
        iterations,
        halvings,
        residual: *history.last().unwrap(),
        residual_history: history,
        normalization_defect: normalization_defect(source, metric)?,
        monitor,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((field, report))
}

/// One step of an ε-continuation.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ContinuationStep {
    pub epsilon: f64,
    pub report: SolveReport,
    /// `sup |phi_k - phi_{k-1}|`, absent for the first step.
    pub cauchy: Option<f64>,
    /// `(sum w |e^{f_k} - e^{f_{k-1}}|^2 / sum w)^{1/2}`.
    pub source_lp: Option<f64>,
    #[serde(skip)]
    pub phi: Option<PotentialField>,
}

/// Solve along a decreasing ε schedule, warm-starting each solve.
pub fn epsilon_continuation(
    metric: &ReferenceMetric,
    domain: &DomainSpec,
    source: &SourceSpec,
    schedule: &[f64],
    opts: &SolveOptions,
    with_curvature: bool,
) -> Result<Vec<ContinuationStep>> {
    if schedule.is_empty() || schedule.iter().any(|&e| !(e > 0.0)) {
        return Err(ConeError::InvalidParams("schedule must be positive".into()));
    }
    if schedule.windows(2).any(|w| w[1] > w[0]) {
        return Err(ConeError::InvalidParams("schedule must be decreasing".into()));
    }
    let grid = Grid::new(domain)?;
    let weights = grid.quadrature_weights();
    let mut out: Vec<ContinuationStep> = Vec::new();
    let mut prev: Option<(PotentialField, Vec<f64>)> = None;
    for &eps in schedule {
        let step = (|| -> Result<ContinuationStep> {
            let m = metric.with_params(metric.params.with_epsilon(eps));
            let field = MetricField::from_reference(&m, domain)?;
            let raw = source.sample(domain, eps)?;
            let src = build_rhs(&raw, &field, source.mu_coupled)?;
            let warm = prev.as_ref().map(|p| &p.0);
            let solved = match newton_solve(&m.params, &field, &src, opts, warm) {
                Ok(s) => s,
                Err(_) if warm.is_some() => newton_solve(&m.params, &field, &src, opts, None)?,
                Err(e) => return Err(e),
            };
            let (phi, mut report) = solved;
            report.monitor = laplacian_monitor(&phi, &field, &src, with_curvature.then_some(&m), opts.workers)?;
            let ef: Vec<f64> = src.values.iter().map(|v| v.exp()).collect();
            let (cauchy, lp) = match &prev {
                Some((p, pef)) => {
                    let c = phi.values.iter().zip(&p.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    let num: f64 = weights.iter().zip(ef.iter().zip(pef)).map(|(w, (a, b))| w * (a - b).powi(2)).sum();
                    let den: f64 = weights.iter().sum();
                    (Some(c), Some((num / den).sqrt()))
                }
                None => (None, None),
            };
            prev = Some((phi.clone(), ef));
            Ok(ContinuationStep {
                epsilon: eps,
                report,
                cauchy,
                source_lp: lp,
                phi: Some(phi),
            })
        })()
        .map_err(|e| ConeError::AtEpsilon {
            eps,
            source: Box::new(e),
        })?;
        out.push(step);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
