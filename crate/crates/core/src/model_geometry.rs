//! Parameters, weights, domains and closed-form evaluation of the metric
//! families: the product cone model, and the reference metric
//! `omega_0 + a ddbar (|s|^2 + eps)^tau -/+ c ddbar (|s|^2 + eps)^tau'`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ConeError, Result};
use crate::jet::{Jet, JetSpace};

pub type Point = Vec<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Scalar parameters of the metric family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    pub tau: f64,
    pub tau_prime: f64,
    pub a_coef: f64,
    pub c_coef: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub mu: f64,
}

impl ConeParams {
    pub fn new(tau: f64, tau_prime: f64, a_coef: f64, c_coef: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            tau,
            tau_prime,
            a_coef,
            c_coef,
            epsilon,
            mu: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// `tau = 1` is accepted for the flat case as long as no correction
    /// term is present.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ConeError::InvalidParams(m));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau = {} outside (0, 1]", self.tau));
        }
        if !(self.tau_prime > 0.0 && self.tau_prime <= 1.0) {
            return bad(format!("tau' = {} outside (0, 1]", self.tau_prime));
        }
        if self.c_coef != 0.0 && !(self.tau < self.tau_prime && self.tau_prime < 1.0) {
            return bad(format!(
                "correction needs tau < tau' < 1, got tau = {}, tau' = {}",
                self.tau, self.tau_prime
            ));
        }
        if !(self.a_coef > 0.0) {
            return bad(format!("a = {} must be positive", self.a_coef));
        }
        if !(self.c_coef >= 0.0) {
            return bad(format!("c = {} must be nonnegative", self.c_coef));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon = {} must be nonnegative", self.epsilon));
        }
        if !self.mu.is_finite() {
            return bad("mu must be finite".into());
        }
        Ok(())
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_c(mut self, c_coef: f64) -> Self {
        self.c_coef = c_coef;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }
}

/// Closed-form line-bundle weights `a(z) > 0`, with `|s|_h^2 = a |z_1|^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// `a = value`.
    Constant { value: f64 },
    /// `a = exp(kappa |z|^2)`.
    Gaussian { kappa: f64 },
    /// `a = exp(kappa |z_1|^2 + eta cos(2 pi Re z_2 / period))`.
    Periodic { kappa: f64, eta: f64, period: f64 },
    /// `a = exp(kappa (z_1 + zbar_1))`.
    Tilted { kappa: f64 },
    /// `a = exp(P)` for a real polynomial `P = sum coef z^holo zbar^anti`.
    ExpPoly { terms: Vec<PolyTerm> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    #[serde(default)]
    pub holo: Vec<usize>,
    #[serde(default)]
    pub anti: Vec<usize>,
}

/// A Hermitian metric on the line bundle, represented by its weight `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianWeight {
    pub kind: WeightKind,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl HermitianWeight {
    pub fn new(kind: WeightKind) -> Result<Self> {
        if let WeightKind::ExpPoly { terms } = &kind {
            check_real_poly(terms)?;
        }
        if let WeightKind::Constant { value } = kind {
            if !(value > 0.0) {
                return Err(ConeError::InvalidParams(format!(
                    "constant weight {value} must be positive"
                )));
            }
        }
        if let WeightKind::Periodic { period, .. } = kind {
            if !(period > 0.0) {
                return Err(ConeError::InvalidParams("period must be positive".into()));
            }
        }
        Ok(Self { kind, scale: 1.0 })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(WeightKind::Constant { value }).expect("positive constant")
    }

    pub fn unit() -> Self {
        Self::constant(1.0)
    }

    /// Built-in catalog by name.
    pub fn from_catalog(name: &str, period: f64) -> Result<Self> {
        let kind = match name {
            "constant" | "unit" => WeightKind::Constant { value: 1.0 },
            "gaussian" => WeightKind::Gaussian { kappa: 0.5 },
            "periodic" => WeightKind::Periodic {
                kappa: 0.5,
                eta: 0.2,
                period,
            },
            "tilted" => WeightKind::Tilted { kappa: 0.3 },
            _ => {
                return Err(ConeError::UnknownCatalog {
                    kind: "weight",
                    name: name.to_string(),
                })
            }
        };
        Self::new(kind)
    }

    /// Jet of `a` (including the scale factor) at `point`.
    pub fn jet(&self, space: &Arc<JetSpace>, point: &[Complex64]) -> Jet {
        let z = |k: usize| Jet::z(space, k, point[k]);
        let zb = |k: usize| Jet::zbar(space, k, point[k]);
        let base = match &self.kind {
            WeightKind::Constant { value } => Jet::real(space, *value),
            WeightKind::Gaussian { kappa } => {
                let mut s = Jet::real(space, 0.0);
                for k in 0..space.dim() {
                    s = &s + &(&z(k) * &zb(k));
                }
                s.scale_real(*kappa).exp()
            }
            WeightKind::Periodic { kappa, eta, period } => {
                let mut p = (&z(0) * &zb(0)).scale_real(*kappa);
                if space.dim() > 1 {
                    let re_z2 = (&z(1) + &zb(1)).scale_real(0.5);
                    let c = re_z2.scale_real(2.0 * PI / period).cos();
                    p = &p + &c.scale_real(*eta);
                }
                p.exp()
            }
            WeightKind::Tilted { kappa } => (&z(0) + &zb(0)).scale_real(*kappa).exp(),
            WeightKind::ExpPoly { terms } => {
                let mut p = Jet::real(space, 0.0);
                for t in terms {
                    let mut m = Jet::constant(space, Complex64::new(t.re, t.im));
                    for &k in &t.holo {
                        m = &m * &z(k);
                    }
                    for &k in &t.anti {
                        m = &m * &zb(k);
                    }
                    p = &p + &m;
                }
                p.exp()
            }
        };
        base.scale_real(self.scale)
    }

    /// Adapted normalization at `point`: `a = 1`, `da = 0` and the
    /// holomorphic-holomorphic second derivatives vanish.
    pub fn is_adapted_at(&self, point: &[Complex64]) -> bool {
        let n = point.len();
        let sp = JetSpace::new(n);
        let j = self.jet(&sp, point);
        let tol = 1e-12;
        if (j.value() - 1.0).norm() > tol {
            return false;
        }
        for a in 0..n {
            if j.deriv(&[a], &[]).unwrap().norm() > tol {
                return false;
            }
            for b in a..n {
                if j.deriv(&[a, b], &[]).unwrap().norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Flag for the adapted normalization at the origin.
    pub fn adapted_flag(&self, dim: usize) -> bool {
        self.is_adapted_at(&vec![Complex64::new(0.0, 0.0); dim])
    }

    /// Whether the weight is periodic in `Re z_2` with the given period.
    pub fn is_periodic_in_smooth(&self, period: f64) -> bool {
        match &self.kind {
            WeightKind::Constant { .. } => true,
            WeightKind::Tilted { .. } => true,
            WeightKind::Periodic { period: p, .. } => {
                let ratio = period / p;
                (ratio - ratio.round()).abs() < 1e-12
            }
            _ => false,
        }
    }
}

fn check_real_poly(terms: &[PolyTerm]) -> Result<()> {
    for t in terms {
        let (mut h, mut a) = (t.holo.clone(), t.anti.clone());
        h.sort_unstable();
        a.sort_unstable();
        let conj = terms.iter().any(|s| {
            let (mut sh, mut sa) = (s.holo.clone(), s.anti.clone());
            sh.sort_unstable();
            sa.sort_unstable();
            sh == a && sa == h && (s.re - t.re).abs() < 1e-14 && (s.im + t.im).abs() < 1e-14
        });
        if !conj {
            return Err(ConeError::InvalidParams(format!(
                "polynomial weight is not real: term {:?}/{:?} has no conjugate partner",
                t.holo, t.anti
            )));
        }
    }
    Ok(())
}

/// `scale_line_bundle_metric`: replace `a` by `factor * a`.
pub fn scale_line_bundle_metric(weight: &HermitianWeight, factor: f64) -> Result<HermitianWeight> {
    if !(factor > 0.0) {
        return Err(ConeError::InvalidParams(format!(
            "scale factor {factor} must be positive"
        )));
    }
    let mut w = weight.clone();
    w.scale *= factor;
    Ok(w)
}

/// Constant background Kähler metric `omega_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseMetric {
    matrix: CMatrix,
}

impl BaseMetric {
    pub fn flat(dim: usize) -> Self {
        Self::scaled_flat(dim, 1.0)
    }

    pub fn scaled_flat(dim: usize, scale: f64) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim) * Complex64::new(scale, 0.0),
        }
    }

    pub fn constant(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || !is_hermitian(&matrix, 1e-14) {
            return Err(ConeError::InvalidParams(
                "base metric must be a square Hermitian matrix".into(),
            ));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    fn potential(&self, space: &Arc<JetSpace>, point: &[Complex64]) -> Jet {
        let n = self.dim();
        let mut p = Jet::real(space, 0.0);
        for a in 0..n {
            for b in 0..n {
                let m = self.matrix[(a, b)];
                if m.norm() == 0.0 {
                    continue;
                }
                let t = &Jet::z(space, a, point[a]) * &Jet::zbar(space, b, point[b]);
                p = &p + &t.scale(m);
            }
        }
        p
    }
}

/// Sign in front of the `|s|^{2 tau'}` correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionSign {
    /// The curvature-bounded-below choice `- c ddbar |s|^{2 tau'}`.
    #[default]
    Subtract,
    /// The sign-flipped variant whose curvature blows up negatively.
    Add,
}

impl CorrectionSign {
    pub fn factor(self) -> f64 {
        match self {
            Self::Subtract => -1.0,
            Self::Add => 1.0,
        }
    }
}

/// Everything needed to evaluate the reference metric and its jets.
#[derive(Clone, Debug)]
pub struct ReferenceMetric {
    pub params: ConeParams,
    pub weight: HermitianWeight,
    pub base: BaseMetric,
    pub sign: CorrectionSign,
}

/// Metric components and their derivatives at one point, indexed as
/// `g[(a, b)] = g_{a bbar}`, `dg[c][(a, b)] = d_c g_{a bbar}`,
/// `dgbar[d][(a, b)] = dbar_d g_{a bbar}` and
/// `ddg[c][d][(a, b)] = d_c dbar_d g_{a bbar}`.
#[derive(Clone, Debug)]
pub struct MetricJets {
    pub g: CMatrix,
    pub dg: Vec<CMatrix>,
    pub dgbar: Vec<CMatrix>,
    pub ddg: Vec<Vec<CMatrix>>,
}

impl MetricJets {
    pub fn from_potential(phi: &Jet) -> Self {
        let n = phi.space().dim();
        let d = |h: &[usize], a: &[usize]| phi.deriv(h, a).expect("order <= 2 per side");
        let g = CMatrix::from_fn(n, n, |a, b| d(&[a], &[b]));
        let dg = (0..n)
            .map(|c| CMatrix::from_fn(n, n, |a, b| d(&[a, c], &[b])))
            .collect();
        let dgbar = (0..n)
            .map(|e| CMatrix::from_fn(n, n, |a, b| d(&[a], &[b, e])))
            .collect();
        let ddg = (0..n)
            .map(|c| {
                (0..n)
                    .map(|e| CMatrix::from_fn(n, n, |a, b| d(&[a, c], &[b, e])))
                    .collect()
            })
            .collect();
        Self { g, dg, dgbar, ddg }
    }
}

impl ReferenceMetric {
    pub fn new(params: ConeParams, weight: HermitianWeight, base: BaseMetric) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            weight,
            base,
            sign: CorrectionSign::Subtract,
        })
    }

    pub fn with_sign(mut self, sign: CorrectionSign) -> Self {
        self.sign = sign;
        self
    }

    pub fn with_params(&self, params: ConeParams) -> Self {
        let mut m = self.clone();
        m.params = params;
        m
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Jet of the full Kähler potential at `point`.
    pub fn potential_jet(&self, point: &[Complex64]) -> Result<Jet> {
        let n = self.dim();
        if point.len() != n {
            return Err(ConeError::InvalidParams(format!(
                "point has {} coordinates, metric has dimension {n}",
                point.len()
            )));
        }
        let space = JetSpace::new(n);
        let p = &self.params;
        let a = self.weight.jet(&space, point);
        let u = &a * &(&Jet::z(&space, 0, point[0]) * &Jet::zbar(&space, 0, point[0]));
        let shifted = u.add_const(Complex64::new(p.epsilon, 0.0));
        let x0 = shifted.value().re;
        if !(x0 > 0.0) {
            return Err(ConeError::SingularPoint {
                point: fmt_point(point),
                reason: "|s|^2 + eps vanishes (on the divisor with eps = 0)".into(),
            });
        }
        let mut phi = shifted.powf(p.tau).scale_real(p.a_coef);
        if p.c_coef != 0.0 {
            let corr = shifted.powf(p.tau_prime).scale_real(p.c_coef * self.sign.factor());
            phi = &phi + &corr;
        }
        Ok(&phi + &self.base.potential(&space, point))
    }

    pub fn jets(&self, point: &[Complex64]) -> Result<MetricJets> {
        Ok(MetricJets::from_potential(&self.potential_jet(point)?))
    }

    /// Metric matrix without the positivity check.
    pub fn metric_unchecked(&self, point: &[Complex64]) -> Result<CMatrix> {
        let phi = self.potential_jet(point)?;
        let n = self.dim();
        Ok(CMatrix::from_fn(n, n, |a, b| phi.deriv(&[a], &[b]).unwrap()))
    }
}

/// Closed-form product cone metric `ddbar(sum_j |z_j|^{2 tau_j} + sum |z_j|^2)`,
/// regularized by `eps` in the cone directions when `params.epsilon > 0`.
pub fn eval_model_metric(params: &ConeParams, domain: &DomainSpec, point: &[Complex64]) -> Result<CMatrix> {
    let n = domain.dim;
    if point.len() != n {
        return Err(ConeError::InvalidParams(format!(
            "point has {} coordinates, domain has dimension {n}",
            point.len()
        )));
    }
    let eps = params.epsilon;
    let mut m = CMatrix::identity(n, n);
    for (j, &t) in domain.cone_angles.iter().enumerate() {
        let u = point[j].norm_sqr();
        if eps == 0.0 && u == 0.0 && t < 1.0 {
            return Err(ConeError::SingularPoint {
                point: fmt_point(point),
                reason: format!("z_{} = 0 with eps = 0", j + 1),
            });
        }
        let v = if eps == 0.0 {
            if t == 1.0 {
                1.0
            } else {
                t * t * u.powf(t - 1.0)
            }
        } else {
            t * (u + eps).powf(t - 2.0) * (t * u + eps)
        };
        m[(j, j)] = Complex64::new(v, 0.0);
    }
    Ok(m)
}

/// Reference metric at `point`, checked for positive definiteness.
pub fn eval_reference_metric(metric: &ReferenceMetric, point: &[Complex64]) -> Result<CMatrix> {
    let g = metric.metric_unchecked(point)?;
    let lam = min_eigenvalue(&g);
    if !(lam > 0.0) {
        return Err(ConeError::PositivityViolation {
            point: fmt_point(point),
            min_eigenvalue: lam,
        });
    }
    Ok(g)
}

/// Search the weight scale sequence `ratio^k`, `k = 0..=max_steps`, for the
/// first factor that makes the metric positive definite at every sample.
pub fn positivity_scale_search(
    metric: &ReferenceMetric,
    samples: &[Point],
    ratio: f64,
    max_steps: usize,
) -> Result<f64> {
    if !(ratio > 0.0) || ratio == 1.0 {
        return Err(ConeError::InvalidParams(format!("bad scale ratio {ratio}")));
    }
    let mut factor = 1.0;
    for _ in 0..=max_steps {
        let mut m = metric.clone();
        m.weight = scale_line_bundle_metric(&metric.weight, factor)?;
        let mut ok = true;
        for p in samples {
            let g = m.metric_unchecked(p)?;
            if !(min_eigenvalue(&g) > 0.0) {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(factor);
        }
        factor *= ratio;
    }
    Err(ConeError::PositivityViolation {
        point: "sample grid".into(),
        min_eigenvalue: f64::NAN,
    })
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)].re,
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = m[(0, 1)].norm_sqr();
            let tr = a + d;
            let disc = ((a - d) * (a - d) + 4.0 * b).sqrt();
            // smaller root computed without cancellation
            let big = 0.5 * (tr + disc.copysign(tr));
            if big == 0.0 {
                0.0
            } else {
                let small = (a * d - b) / big;
                small.min(big)
            }
        }
        _ => m
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min),
    }
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
    (0..m.nrows()).all(|a| (0..m.ncols()).all(|b| (m[(a, b)] - m[(b, a)].conj()).norm() <= tol * scale))
}

pub(crate) fn fmt_point(p: &[Complex64]) -> String {
    let parts: Vec<String> = p.iter().map(|c| format!("{:.6e}{:+.6e}i", c.re, c.im)).collect();
    format!("({})", parts.join(", "))
}

/// Radial node placement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadialSpacing {
    /// Cell-centred nodes `rho_min + (i + 1/2) h` with the last node on `rho_max`.
    #[default]
    Uniform,
    /// Geometric nodes from `rho_min` to `rho_max` inclusive.
    Log,
}

/// The discretized model domain `C_tau x C^{n-1}`.
///
/// Grids cover the first cone direction radially and, when present, the
/// real part of the first smooth direction periodically. Points sit at
/// angle zero unless `angular_points > 1` (full-angle grid, `n = 1` only).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub dim: usize,
    pub cone_angles: Vec<f64>,
    pub rho_min: f64,
    pub rho_max: f64,
    pub radial_points: usize,
    #[serde(default)]
    pub radial_spacing: RadialSpacing,
    #[serde(default = "one_usize")]
    pub angular_points: usize,
    #[serde(default = "one")]
    pub smooth_period: f64,
    #[serde(default = "four")]
    pub smooth_points: usize,
}

fn one_usize() -> usize {
    1
}

fn four() -> usize {
    4
}

/// Second grid axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transverse {
    None,
    Angle,
    Smooth,
}

impl DomainSpec {
    /// `n = 1` or `n = 2` model with one cone direction.
    pub fn model(dim: usize, tau: f64, rho_min: f64, rho_max: f64, radial_points: usize) -> Self {
        Self {
            dim,
            cone_angles: vec![tau],
            rho_min,
            rho_max,
            radial_points,
            radial_spacing: RadialSpacing::Uniform,
            angular_points: 1,
            smooth_period: 1.0,
            smooth_points: if dim > 1 { radial_points } else { 1 },
        }
    }

    pub fn with_smooth(mut self, period: f64, points: usize) -> Self {
        self.smooth_period = period;
        self.smooth_points = points;
        self
    }

    pub fn with_spacing(mut self, spacing: RadialSpacing) -> Self {
        self.radial_spacing = spacing;
        self
    }

    pub fn with_angles(mut self, angular_points: usize) -> Self {
        self.angular_points = angular_points;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ConeError::InvalidDomain(m));
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.cone_angles.is_empty() || self.cone_angles.len() > self.dim {
            return bad(format!(
                "need 1..={} cone directions, got {}",
                self.dim,
                self.cone_angles.len()
            ));
        }
        if self.cone_angles.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return bad("cone angles must lie in (0, 1]".into());
        }
        if !(self.rho_min >= 0.0 && self.rho_max > self.rho_min) {
            return bad(format!(
                "radial extent [{}, {}] is invalid",
                self.rho_min, self.rho_max
            ));
        }
        if self.radial_points < 4 {
            return bad("radial resolution must be at least 4".into());
        }
        if self.radial_spacing == RadialSpacing::Log && self.rho_min <= 0.0 {
            return bad("log spacing needs rho_min > 0".into());
        }
        match self.transverse() {
            Transverse::Smooth if self.smooth_points < 4 => {
                return bad("smooth resolution must be at least 4".into())
            }
            Transverse::Angle if self.angular_points < 4 || self.angular_points % 2 == 1 => {
                return bad("angular resolution must be even and at least 4".into())
            }
            _ => {}
        }
        if self.angular_points > 1 && self.dim > 1 {
            return bad("full-angle grids are only available for n = 1".into());
        }
        if !(self.smooth_period > 0.0) {
            return bad("smooth period must be positive".into());
        }
        Ok(())
    }

    /// Check the domain against the parameters it will be used with.
    pub fn validate_for(&self, params: &ConeParams) -> Result<()> {
        self.validate()?;
        if params.epsilon == 0.0 && self.rho_min <= 0.0 {
            return Err(ConeError::InvalidDomain(
                "rho_min > 0 is required when epsilon = 0".into(),
            ));
        }
        Ok(())
    }

    pub fn transverse(&self) -> Transverse {
        if self.angular_points > 1 {
            Transverse::Angle
        } else if self.dim > self.cone_angles.len() {
            Transverse::Smooth
        } else {
            Transverse::None
        }
    }

    pub fn radial_nodes(&self) -> Vec<f64> {
        let n = self.radial_points;
        match self.radial_spacing {
            RadialSpacing::Uniform => {
                let h = self.radial_step();
                (0..n).map(|i| self.rho_min + (i as f64 + 0.5) * h).collect()
            }
            RadialSpacing::Log => {
                let (a, b) = (self.rho_min.ln(), self.rho_max.ln());
                (0..n)
                    .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                    .collect()
            }
        }
    }

    /// Radial step of the uniform layout.
    pub fn radial_step(&self) -> f64 {
        (self.rho_max - self.rho_min) / (self.radial_points as f64 - 0.5)
    }

    pub fn transverse_len(&self) -> usize {
        match self.transverse() {
            Transverse::None => 1,
            Transverse::Angle => self.angular_points,
            Transverse::Smooth => self.smooth_points,
        }
    }

    pub fn transverse_step(&self) -> f64 {
        match self.transverse() {
            Transverse::None => 1.0,
            Transverse::Angle => 2.0 * PI / self.angular_points as f64,
            Transverse::Smooth => self.smooth_period / self.smooth_points as f64,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.radial_points, self.transverse_len())
    }

    pub fn len(&self) -> usize {
        self.radial_points * self.transverse_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid point with radial index `i` and transverse index `j`.
    pub fn point(&self, i: usize, j: usize) -> Point {
        let rho = self.radial_nodes()[i];
        self.point_at(rho, j)
    }

    pub fn point_at(&self, rho: f64, j: usize) -> Point {
        let mut p = vec![Complex64::new(0.0, 0.0); self.dim];
        let k = self.cone_angles.len();
        match self.transverse() {
            Transverse::Angle => p[0] = Complex64::from_polar(rho, j as f64 * self.transverse_step()),
            _ => p[0] = Complex64::new(rho, 0.0),
        }
        for q in p.iter_mut().take(k).skip(1) {
            *q = Complex64::new(self.rho_max, 0.0);
        }
        if self.transverse() == Transverse::Smooth {
            p[k] = Complex64::new(j as f64 * self.transverse_step(), 0.0);
        }
        p
    }

    pub fn points(&self) -> Vec<Point> {
        let nodes = self.radial_nodes();
        let nt = self.transverse_len();
        let mut out = Vec::with_capacity(self.len());
        for &rho in &nodes {
            for j in 0..nt {
                out.push(self.point_at(rho, j));
            }
        }
        out
    }
}

/// Grid of Hermitian metric matrices over a domain, stored radial-major.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub domain: DomainSpec,
    pub matrices: Vec<CMatrix>,
}

impl MetricField {
    pub fn from_fn<F>(domain: &DomainSpec, mut f: F) -> Result<Self>
    where
        F: FnMut(&[Complex64]) -> Result<CMatrix>,
    {
        domain.validate()?;
        let matrices = domain
            .points()
            .iter()
            .map(|p| f(p))
            .collect::<Result<Vec<_>>>()?;
        let field = Self {
            domain: domain.clone(),
            matrices,
        };
        field.check_positive()?;
        Ok(field)
    }

    /// Evaluate the reference metric on every grid node.
    pub fn from_reference(metric: &ReferenceMetric, domain: &DomainSpec) -> Result<Self> {
        domain.validate_for(&metric.params)?;
        if domain.dim != metric.dim() {
            return Err(ConeError::DomainMismatch(format!(
                "domain dimension {} vs metric dimension {}",
                domain.dim,
                metric.dim()
            )));
        }
        if domain.transverse() == Transverse::Smooth
            && !metric.weight.is_periodic_in_smooth(domain.smooth_period)
        {
            return Err(ConeError::DomainMismatch(
                "weight is not periodic in the smooth direction".into(),
            ));
        }
        Self::from_fn(domain, |p| eval_reference_metric(metric, p))
    }

    pub fn check_positive(&self) -> Result<()> {
        for (m, p) in self.matrices.iter().zip(self.domain.points()) {
            let lam = min_eigenvalue(m);
            if !(lam > 0.0) {
                return Err(ConeError::PositivityViolation {
                    point: fmt_point(&p),
                    min_eigenvalue: lam,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn log_det(&self) -> Vec<f64> {
        self.matrices.iter().map(|m| log_det_hermitian(m)).collect()
    }
}

/// `log det` of a Hermitian positive definite matrix.
pub fn log_det_hermitian(m: &CMatrix) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)].re.ln(),
        2 => (m[(0, 0)].re * m[(1, 1)].re - m[(0, 1)].norm_sqr()).ln(),
        _ => m.determinant().re.ln(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn flat_params(tau: f64) -> ConeParams {
        ConeParams::new(tau, 1.0, 1.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn model_metric_flat_is_identity() {
        let d = DomainSpec::model(2, 1.0, 0.1, 1.0, 8);
        let g = eval_model_metric(&flat_params(1.0), &d, &[c(0.3), c(-0.7)]).unwrap();
        assert_eq!(g, CMatrix::identity(2, 2));
    }

    #[test]
    fn model_metric_examples() {
        let d = DomainSpec::model(1, 0.5, 0.1, 1.0, 8);
        let g = eval_model_metric(&flat_params(0.5), &d, &[c(0.25)]).unwrap();
        assert!((g[(0, 0)].re - 1.0).abs() < 1e-15);

        let mut d2 = DomainSpec::model(2, 0.5, 0.1, 1.0, 8);
        d2.cone_angles = vec![0.5, 0.75];
        let g = eval_model_metric(&flat_params(0.5), &d2, &[c(0.5), c(0.5)]).unwrap();
        assert!((g[(0, 0)].re - 0.25 / 0.5).abs() < 1e-15);
        assert!((g[(1, 1)].re - 0.5625 * 0.5f64.powf(-0.5)).abs() < 1e-15);
        assert_eq!(g[(0, 1)], c(0.0));
    }

    #[test]
    fn model_metric_singular_on_divisor() {
        let d = DomainSpec::model(1, 0.5, 0.1, 1.0, 8);
        let err = eval_model_metric(&flat_params(0.5), &d, &[c(0.0)]).unwrap_err();
        assert!(matches!(err, ConeError::SingularPoint { .. }));
        // smoothing makes it finite: tau (eps)^{tau-2} eps = tau eps^{tau-1}
        let p = flat_params(0.5).with_epsilon(0.01);
        let g = eval_model_metric(&p, &d, &[c(0.0)]).unwrap();
        assert!((g[(0, 0)].re - 0.5 * 0.01f64.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn reference_reduces_to_flat_plus_model() {
        let params = ConeParams::new(0.6, 0.8, 1.0, 0.0, 0.0).unwrap();
        let m = ReferenceMetric::new(params, HermitianWeight::unit(), BaseMetric::flat(2)).unwrap();
        let d = DomainSpec::model(2, 0.6, 0.05, 1.0, 8);
        for p in [[c(0.1), c(0.3)], [c(0.7), c(-0.2)]] {
            let g = eval_reference_metric(&m, &p).unwrap();
            let model = eval_model_metric(&params, &d, &p).unwrap();
            let want = &model + CMatrix::from_diagonal_element(2, 2, c(1.0))
                - CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0), c(1.0)]));
            assert!((&g - &want).norm() < 1e-13, "{g} vs {want}");
        }
    }

    #[test]
    fn adapted_point_matches_good_coordinate_form() {
        // At the origin of z_2 with the gaussian weight: g_{11} =
        // g0 + K_{,11} r^{2t} + t^2 K r^{2t-2} - M_{,11} r^{2t'} - t'^2 M r^{2t'-2}
        // is only exact at the adapted point itself, so check at z_1 -> small
        // against the full closed form evaluated from the weight derivatives.
        let (t, tp) = (0.6, 0.85);
        let params = ConeParams::new(t, tp, 1.0, 1.0, 0.0).unwrap();
        let w = HermitianWeight::new(WeightKind::Gaussian { kappa: 0.5 }).unwrap();
        assert!(w.adapted_flag(2));
        let m = ReferenceMetric::new(params, w, BaseMetric::flat(2)).unwrap();
        let r = 1e-3;
        let g = m.metric_unchecked(&[c(r), c(0.0)]).unwrap();
        // a = exp(k r^2), K = a^t: K ~ 1, K_{,11} ~ t k, etc.
        let a = (0.5 * r * r as f64).exp();
        let k = a.powf(t);
        let mm = a.powf(tp);
        let lead = 1.0 + t * t * k * r.powf(2.0 * t - 2.0) - tp * tp * mm * r.powf(2.0 * tp - 2.0);
        // remaining terms are O(r^{2t}) relative to unit scale
        assert!((g[(0, 0)].re - lead).abs() < 10.0 * r.powf(2.0 * t));
    }

    #[test]
    fn smooth_family_has_finite_limit_on_divisor() {
        let params = ConeParams::new(0.6, 0.8, 1.0, 0.2, 0.01).unwrap();
        let m = ReferenceMetric::new(params, HermitianWeight::unit(), BaseMetric::flat(1)).unwrap();
        let g0 = m.metric_unchecked(&[c(0.0)]).unwrap()[(0, 0)].re;
        // F'(eps) = a t eps^{t-1} - c t' eps^{t'-1}
        let want = 1.0 + 0.6 * 0.01f64.powf(-0.4) - 0.2 * 0.8 * 0.01f64.powf(-0.2);
        assert!((g0 - want).abs() < 1e-12 * want);
        let g_near = m.metric_unchecked(&[c(1e-7)]).unwrap()[(0, 0)].re;
        assert!((g_near - g0).abs() < 1e-8 * g0);
    }

    #[test]
    fn epsilon_continuity() {
        let base = ConeParams::new(0.7, 0.9, 1.0, 0.3, 0.0).unwrap();
        let m = ReferenceMetric::new(base, HermitianWeight::unit(), BaseMetric::flat(2)).unwrap();
        let p = [c(0.2), c(0.1)];
        let g0 = m.metric_unchecked(&p).unwrap();
        let mut prev = f64::INFINITY;
        for k in 8..30 {
            let eps = 2f64.powi(-k);
            let g = m.with_params(base.with_epsilon(eps)).metric_unchecked(&p).unwrap();
            let d = (&g - &g0).norm();
            assert!(d < prev, "k = {k}: {d} >= {prev}");
            prev = d;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn scaling_weight() {
        let w = HermitianWeight::unit();
        assert_eq!(scale_line_bundle_metric(&w, 1.0).unwrap(), w);
        let w2 = scale_line_bundle_metric(&w, 2.0).unwrap();
        let sp = JetSpace::new(1);
        let a = w2.jet(&sp, &[c(0.3)]).value().re;
        assert_eq!(a, 2.0);
        assert!(scale_line_bundle_metric(&w, 0.0).is_err());
    }

    #[test]
    fn positivity_search_matches_eigenvalue_scan() {
        // correction dominates for large |z|: g = 1 + 0.36 (a r^2)^{-0.4} a
        // - 2 * 0.64 (a r^2)^{-0.2} a; shrinking a restores positivity
        let params = ConeParams::new(0.6, 0.8, 1.0, 2.0, 0.0).unwrap();
        let m = ReferenceMetric::new(params, HermitianWeight::unit(), BaseMetric::flat(1)).unwrap();
        let samples: Vec<Point> = (1..=20).map(|i| vec![c(0.1 * i as f64)]).collect();
        assert!(samples
            .iter()
            .any(|p| min_eigenvalue(&m.metric_unchecked(p).unwrap()) <= 0.0));
        let s = positivity_scale_search(&m, &samples, 0.5, 30).unwrap();
        // oracle: scan the same sequence by hand
        let mut expect = 1.0;
        loop {
            let mut mm = m.clone();
            mm.weight = scale_line_bundle_metric(&m.weight, expect).unwrap();
            if samples
                .iter()
                .all(|p| min_eigenvalue(&mm.metric_unchecked(p).unwrap()) > 0.0)
            {
                break;
            }
            expect *= 0.5;
        }
        assert_eq!(s, expect);
        assert!(s < 1.0);
    }

    #[test]
    fn positivity_violation_reported() {
        let params = ConeParams::new(0.6, 0.8, 1.0, 2.0, 0.0).unwrap();
        let m = ReferenceMetric::new(params, HermitianWeight::unit(), BaseMetric::flat(1)).unwrap();
        let err = eval_reference_metric(&m, &[c(0.5)]).unwrap_err();
        match err {
            ConeError::PositivityViolation { min_eigenvalue, .. } => assert!(min_eigenvalue < 0.0),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn params_validation() {
        assert!(ConeParams::new(0.5, 0.4, 1.0, 0.1, 0.0).is_err());
        assert!(ConeParams::new(0.5, 0.7, 0.0, 0.1, 0.0).is_err());
        assert!(ConeParams::new(0.5, 0.7, 1.0, -0.1, 0.0).is_err());
        assert!(ConeParams::new(0.5, 0.7, 1.0, 0.1, -1.0).is_err());
        assert!(ConeParams::new(1.0, 1.0, 1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn domain_layout() {
        let d = DomainSpec::model(2, 0.5, 0.0, 1.0, 8).with_smooth(2.0, 6);
        d.validate().unwrap();
        let nodes = d.radial_nodes();
        assert!((nodes[7] - 1.0).abs() < 1e-15);
        assert!((nodes[0] - 0.5 * d.radial_step()).abs() < 1e-15);
        assert_eq!(d.len(), 48);
        assert_eq!(d.point(0, 3)[1], c(1.0));
        assert!(d.validate_for(&ConeParams::new(0.5, 0.7, 1.0, 0.0, 0.0).unwrap()).is_err());
        let bad = DomainSpec::model(1, 0.5, 0.1, 1.0, 3);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn non_real_polynomial_rejected() {
        let t = PolyTerm {
            re: 1.0,
            im: 0.0,
            holo: vec![0],
            anti: vec![],
        };
        assert!(HermitianWeight::new(WeightKind::ExpPoly { terms: vec![t] }).is_err());
    }
}
