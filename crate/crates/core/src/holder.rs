//! Conical distance and Hölder seminorms of grid functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ConeError, Result};
use crate::grid::Grid;
use crate::model_geometry::{CMatrix, MetricField, Point};
use crate::parallel::par_map;
use crate::solver::PotentialField;

/// Growth factor under one refinement that flags a seminorm as unbounded.
pub const DIVERGENCE_RATIO: f64 = 1.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceConvention {
    /// Euclidean distance after `z -> |z|^{tau - 1} z`.
    #[default]
    XiMap,
    /// Intrinsic distance of the flat cone, computed on the sector
    /// `w = z^tau` (`tau = 1/p`) with its edges identified.
    Uniformization,
}

/// `d_tau` on `C^n` with cone angle `tau` in the first `cone_dims` coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeDistance {
    pub tau: f64,
    pub convention: DistanceConvention,
    pub cone_dims: usize,
}

impl ConeDistance {
    pub fn new(tau: f64, convention: DistanceConvention) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(ConeError::InvalidParams(format!("tau = {tau} outside (0, 1]")));
        }
        if convention == DistanceConvention::Uniformization {
            let p = 1.0 / tau;
            if (p - p.round()).abs() > 1e-9 {
                return Err(ConeError::InvalidParams(format!(
                    "uniformization needs tau = 1/p, got {tau}"
                )));
            }
        }
        Ok(Self {
            tau,
            convention,
            cone_dims: 1,
        })
    }

    pub fn xi(tau: f64) -> Self {
        Self::new(tau, DistanceConvention::XiMap).expect("tau in (0, 1]")
    }

    pub fn distance(&self, x: &[Complex64], y: &[Complex64]) -> f64 {
        let mut s = 0.0;
        for (k, (a, b)) in x.iter().zip(y).enumerate() {
            let d = if k < self.cone_dims {
                match self.convention {
                    DistanceConvention::XiMap => (xi(*a, self.tau) - xi(*b, self.tau)).norm(),
                    DistanceConvention::Uniformization => sector_distance(*a, *b, self.tau),
                }
            } else {
                (a - b).norm()
            };
            s += d * d;
        }
        s.sqrt()
    }
}

fn xi(z: Complex64, tau: f64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        z
    } else {
        z * r.powf(tau - 1.0)
    }
}

fn sector_distance(a: Complex64, b: Complex64, tau: f64) -> f64 {
    let (ra, rb) = (a.norm().powf(tau), b.norm().powf(tau));
    let mut dt = (a.arg() - b.arg()).rem_euclid(2.0 * PI);
    if dt > PI {
        dt = 2.0 * PI - dt;
    }
    let ang = tau * dt;
    (ra * ra + rb * rb - 2.0 * ra * rb * ang.cos()).max(0.0).sqrt()
}

/// `d_tau(x, y)` with the ξ-map on `z_1`.
pub fn d_tau(x: &[Complex64], y: &[Complex64], tau: f64) -> f64 {
    ConeDistance::xi(tau).distance(x, y)
}

/// Real values on a finite point set.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub points: Vec<Point>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(points: Vec<Point>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(ConeError::DomainMismatch(format!(
                "{} points vs {} values",
                points.len(),
                values.len()
            )));
        }
        if points.is_empty() {
            return Err(ConeError::InvalidDomain("empty grid".into()));
        }
        Ok(Self { points, values })
    }

    pub fn from_fn<F: Fn(&[Complex64]) -> f64>(points: Vec<Point>, f: F) -> Self {
        let values = points.iter().map(|p| f(p)).collect();
        Self { points, values }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            points: self.points.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Points of the unit cone disc (`n = 1`) uniform in `|xi|`: `radial`
/// radii from 0 to 1 inclusive on `angular` rays, the origin once.
pub fn cone_disc_points(tau: f64, radial: usize, angular: usize) -> Vec<Point> {
    let mut pts = vec![vec![Complex64::new(0.0, 0.0)]];
    for i in 1..radial {
        let s = i as f64 / (radial - 1) as f64;
        let r = s.powf(1.0 / tau);
        for j in 0..angular {
            pts.push(vec![Complex64::from_polar(r, 2.0 * PI * j as f64 / angular as f64)]);
        }
    }
    pts
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HolderReport {
    pub alpha: f64,
    pub tau: f64,
    pub sup: f64,
    pub seminorm: f64,
    pub total: f64,
    pub argmax_pair: Option<[usize; 2]>,
    pub argmax_points: Option<[Vec<[f64; 2]>; 2]>,
    pub pairs_checked: u64,
    pub diverging: bool,
}

fn pair_quotient(f: &GridFunction, d: &ConeDistance, alpha: f64, i: usize, j: usize) -> f64 {
    let dist = d.distance(&f.points[i], &f.points[j]);
    if dist <= 0.0 {
        return 0.0;
    }
    (f.values[i] - f.values[j]).abs() / dist.powf(alpha)
}

/// Partner indices for `i` in the subsampled scan: dyadic offsets in index
/// order and in cone-radius order.
fn partners(i: usize, n: usize, by_radius: &[usize], rank: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut off = 1usize;
    while off < n {
        if i + off < n {
            out.push(i + off);
        }
        let r = rank[i];
        if r + off < n {
            out.push(by_radius[r + off]);
        }
        off *= 2;
    }
    out.retain(|&j| j != i);
    out.sort_unstable();
    out.dedup();
    out
}

/// `sup |f(x) - f(y)| / d(x, y)^alpha` over grid pairs.
///
/// When the pair count exceeds `pair_budget`, every pair among the points
/// closest to the divisor is kept and the rest are sampled at dyadic
/// offsets, deterministically.
pub fn holder_seminorm(
    f: &GridFunction,
    alpha: f64,
    distance: &ConeDistance,
    pair_budget: u64,
    workers: usize,
) -> Result<HolderReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(ConeError::InvalidParams(format!("alpha = {alpha} outside (0, 1]")));
    }
    let n = f.points.len();
    if n == 0 {
        return Err(ConeError::InvalidDomain("empty grid".into()));
    }
    let total_pairs = (n as u64) * (n as u64 - 1) / 2;
    let idx: Vec<usize> = (0..n).collect();
    let rows: Vec<(f64, usize, u64)> = if total_pairs <= pair_budget {
        par_map(&idx, workers, |&i| {
            let mut best = (0.0, usize::MAX);
            for j in i + 1..n {
                let q = pair_quotient(f, distance, alpha, i, j);
                if q > best.0 {
                    best = (q, j);
                }
            }
            (best.0, best.1, (n - 1 - i) as u64)
        })
    } else {
        let mut by_radius = idx.clone();
        by_radius.sort_by(|&a, &b| {
            f.points[a][0]
                .norm()
                .partial_cmp(&f.points[b][0].norm())
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut rank = vec![0; n];
        for (r, &i) in by_radius.iter().enumerate() {
            rank[i] = r;
        }
        let near = ((pair_budget as f64 / 2.0).sqrt() as usize).clamp(2, n);
        let near_set: Vec<usize> = by_radius[..near].to_vec();
        par_map(&idx, workers, |&i| {
            let mut best = (0.0, usize::MAX);
            let mut count = 0u64;
            let mut visit = |j: usize| {
                let q = pair_quotient(f, distance, alpha, i, j);
                count += 1;
                if q > best.0 {
                    best = (q, j);
                }
            };
            if rank[i] < near {
                for &j in &near_set {
                    if rank[j] > rank[i] {
                        visit(j);
                    }
                }
            }
            for j in partners(i, n, &by_radius, &rank) {
                if !(rank[i] < near && rank[j] < near) {
                    visit(j);
                }
            }
            (best.0, best.1, count)
        })
    };
    let mut semi = 0.0;
    let mut arg = None;
    let mut checked = 0u64;
    for (i, &(q, j, c)) in rows.iter().enumerate() {
        checked += c;
        if q > semi {
            semi = q;
            arg = Some([i, j]);
        }
    }
    let sup = f.sup();
    let pts = |k: usize| f.points[k].iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
    Ok(HolderReport {
        alpha,
        tau: distance.tau,
        sup,
        seminorm: semi,
        total: sup + semi,
        argmax_pair: arg,
        argmax_points: arg.map(|[a, b]| [pts(a), pts(b)]),
        pairs_checked: checked,
        diverging: false,
    })
}

/// Mark reports (ordered coarse to fine) whose seminorm grew by at least
/// [`DIVERGENCE_RATIO`] over the previous resolution. Returns whether the
/// finest step diverged.
pub fn flag_divergence(reports: &mut [HolderReport]) -> bool {
    for k in 1..reports.len() {
        let prev = reports[k - 1].seminorm;
        let cur = reports[k].seminorm;
        reports[k].diverging = cur >= DIVERGENCE_RATIO * prev && cur > 0.0;
    }
    reports.last().map(|r| r.diverging).unwrap_or(false)
}

/// `g`-orthonormal components of a Hermitian matrix: `L^{-1} H L^{-*}`
/// with `g = L L^*`.
pub fn frame_components(g: &CMatrix, h: &CMatrix) -> Result<CMatrix> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| ConeError::InvalidParams("metric not positive definite".into()))?;
    let l = chol.l();
    let linv = l.try_inverse().ok_or_else(|| ConeError::InvalidParams("singular metric".into()))?;
    Ok(&linv * h * linv.adjoint())
}

/// Aggregate `C^{2,alpha}_tau` measurement of a potential against a metric.
///
/// `sup = sup |phi| + sup |dd^c phi|_g`, `seminorm` is the sum of the
/// seminorms of the real and imaginary parts of every orthonormal-frame
/// component of `dd^c phi`.
pub fn c2alpha_norm(
    phi: &PotentialField,
    metric: &MetricField,
    alpha: f64,
    distance: &ConeDistance,
    pair_budget: u64,
    workers: usize,
) -> Result<HolderReport> {
    if phi.domain != metric.domain {
        return Err(ConeError::DomainMismatch("potential and metric live on different grids".into()));
    }
    let grid = Grid::new(&phi.domain)?;
    let hess = grid.hessian_field(&phi.values, grid.default_inner());
    let n = grid.dim();
    let points = phi.domain.points();
    let mut comps: Vec<Vec<f64>> = vec![Vec::with_capacity(points.len()); n * n];
    let mut sup_dd: f64 = 0.0;
    for (g, h) in metric.matrices.iter().zip(&hess) {
        let m = frame_components(g, h)?;
        sup_dd = sup_dd.max((&m * &m).trace().re.max(0.0).sqrt());
        for a in 0..n {
            for b in a..n {
                comps[a * n + b].push(m[(a, b)].re);
                if a < b {
                    comps[b * n + a].push(m[(a, b)].im);
                }
            }
        }
    }
    let sup_phi = phi.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut semi = 0.0;
    let mut best: Option<HolderReport> = None;
    let mut checked = 0;
    for c in comps.into_iter().filter(|c| !c.is_empty()) {
        let gf = GridFunction::new(points.clone(), c)?;
        let r = holder_seminorm(&gf, alpha, distance, pair_budget, workers)?;
        semi += r.seminorm;
        checked += r.pairs_checked;
        if best.as_ref().map(|b| r.seminorm > b.seminorm).unwrap_or(true) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one component");
    let sup = sup_phi + sup_dd;
    Ok(HolderReport {
        alpha,
        tau: distance.tau,
        sup,
        seminorm: semi,
        total: sup + semi,
        argmax_pair: best.argmax_pair,
        argmax_points: best.argmax_points,
        pairs_checked: checked,
        diverging: false,
    })
}
