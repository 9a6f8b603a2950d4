//! Floating-point curvature of the reference metrics from exact jets:
//! `R_{a b c d} = -g_{a b, c d} + g^{m n} g_{a n, c} g_{m b, d}`.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConeError, Result};
use crate::model_geometry::{fmt_point, min_eigenvalue, CMatrix, DomainSpec, MetricJets, Point, ReferenceMetric};
use crate::parallel::par_map;

/// Condition number above which a sample is flagged.
pub const COND_WARN: f64 = 1e12;

type CVector = DVector<Complex64>;

/// Curvature tensor at one point with recorded bisectional values.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureSample {
    pub point: Vec<[f64; 2]>,
    pub dim: usize,
    /// Row-major `R[a][b][c][d]`, 0-based.
    #[serde(skip)]
    pub components: Vec<Complex64>,
    #[serde(skip)]
    pub metric: CMatrix,
    pub condition_number: f64,
    pub ill_conditioned: bool,
    /// `R(d1, d1, d1, d1) / |d1|^4`.
    pub normalized_bisectional: f64,
    /// `(label, value)` for the frame pairs `(d1, d1)` and `(d1, dj)`.
    pub frame_pairs: Vec<(String, f64)>,
}

impl CurvatureSample {
    pub fn component(&self, a: usize, b: usize, c: usize, d: usize) -> Complex64 {
        let n = self.dim;
        self.components[((a * n + b) * n + c) * n + d]
    }

    /// `R(v, vbar, w, wbar) / (|v|^2 |w|^2)`.
    pub fn bisectional(&self, v: &[Complex64], w: &[Complex64]) -> f64 {
        let n = self.dim;
        let mut s = Complex64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        s += self.component(a, b, c, d) * v[a] * v[b].conj() * w[c] * w[d].conj();
                    }
                }
            }
        }
        s.re / (self.norm_sq(v) * self.norm_sq(w))
    }

    pub fn norm_sq(&self, v: &[Complex64]) -> f64 {
        let x = CVector::from_column_slice(v);
        (x.adjoint() * &self.metric * &x)[(0, 0)].re
    }

    /// Worst relative violation of `R_{abcd} = conj(R_{badc})` and `R_{abcd} = R_{cbad}`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim;
        let scale = self.components.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let r = self.component(a, b, c, d);
                        worst = worst
                            .max((r - self.component(b, a, d, c).conj()).norm())
                            .max((r - self.component(c, b, a, d)).norm());
                    }
                }
            }
        }
        worst / scale
    }

    pub fn max_abs_component(&self) -> f64 {
        self.components.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

fn unit(n: usize, k: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    v[k] = Complex64::new(1.0, 0.0);
    v
}

pub fn condition_number(g: &CMatrix) -> f64 {
    let ev = g.clone().symmetric_eigenvalues();
    let max = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// Curvature tensor from jets of the potential.
pub fn curvature_from_jets(jets: &MetricJets, point: &[Complex64]) -> Result<CurvatureSample> {
    let n = jets.g.nrows();
    let lam = min_eigenvalue(&jets.g);
    if !(lam > 0.0) {
        return Err(ConeError::PositivityViolation {
            point: fmt_point(point),
            min_eigenvalue: lam,
        });
    }
    let ginv = jets.g.clone().try_inverse().ok_or_else(|| ConeError::SingularPoint {
        point: fmt_point(point),
        reason: "metric matrix is singular".into(),
    })?;
    let mut comps = vec![Complex64::new(0.0, 0.0); n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut s = -jets.ddg[c][d][(a, b)];
                    for m in 0..n {
                        for nu in 0..n {
                            // g^{m nu} = ginv[(nu, m)]
                            s += ginv[(nu, m)] * jets.dg[c][(a, nu)] * jets.dgbar[d][(m, b)];
                        }
                    }
                    comps[((a * n + b) * n + c) * n + d] = s;
                }
            }
        }
    }
    let cond = condition_number(&jets.g);
    let mut sample = CurvatureSample {
        point: point.iter().map(|z| [z.re, z.im]).collect(),
        dim: n,
        components: comps,
        metric: jets.g.clone(),
        condition_number: cond,
        ill_conditioned: cond > COND_WARN,
        normalized_bisectional: 0.0,
        frame_pairs: vec![],
    };
    let e1 = unit(n, 0);
    sample.normalized_bisectional = sample.bisectional(&e1, &e1);
    sample.frame_pairs.push(("d1,d1".into(), sample.normalized_bisectional));
    for j in 1..n {
        let v = sample.bisectional(&e1, &unit(n, j));
        sample.frame_pairs.push((format!("d1,d{}", j + 1), v));
    }
    Ok(sample)
}

/// Full curvature sample of the reference metric at `point`.
pub fn curvature_at(metric: &ReferenceMetric, point: &[Complex64]) -> Result<CurvatureSample> {
    curvature_from_jets(&metric.jets(point)?, point)
}

/// What a rate fit measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateQuantity {
    /// `R(d1, d1, d1, d1) / |d1|^4`.
    #[default]
    Normalized,
    /// The raw component `R_{1 1 1 1}`.
    Component,
    /// `R(d1, d1, d2, d2) / (|d1|^2 |d2|^2)`.
    Mixed,
}

/// Log-log regression of `|quantity|` against `|z_1|`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub residual: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub all_positive: bool,
    pub all_negative: bool,
}

/// Least-squares line through `(log x, log |y|)`.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() || xs.len() < 4 {
        return Err(ConeError::DegenerateFit("need at least 4 samples".into()));
    }
    if xs.iter().any(|&x| !(x > 0.0)) {
        return Err(ConeError::DegenerateFit("radii must be positive".into()));
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(0.0, f64::max);
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(ConeError::DegenerateFit("radii must span at least 2 decades".into()));
    }
    if ys.iter().all(|y| y.abs() < 1e-12) {
        return Err(ConeError::DegenerateFit("all samples below 1e-12".into()));
    }
    if ys.iter().any(|y| *y == 0.0 || !y.is_finite()) {
        return Err(ConeError::DegenerateFit("zero or non-finite sample".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(RateFit {
        exponent: slope,
        coefficient: icpt,
        residual: rms,
        radii: xs.to_vec(),
        values: ys.to_vec(),
        all_positive: ys.iter().all(|&y| y > 0.0),
        all_negative: ys.iter().all(|&y| y < 0.0),
    })
}

/// `count` log-spaced radii from `hi` down to `lo` inclusive.
pub fn log_radii(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    let (a, b) = (hi.ln(), lo.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp())
        .collect()
}

/// Point on the ray `z_1 = r e^{i theta}`, other coordinates at `rest`.
pub fn ray_point(dim: usize, r: f64, theta: f64, rest: &[Complex64]) -> Point {
    let mut p = vec![Complex64::new(0.0, 0.0); dim];
    p[0] = Complex64::from_polar(r, theta);
    for (k, z) in rest.iter().enumerate().take(dim - 1) {
        p[k + 1] = *z;
    }
    p
}

pub fn sample_quantity(s: &CurvatureSample, q: RateQuantity) -> Result<f64> {
    Ok(match q {
        RateQuantity::Normalized => s.normalized_bisectional,
        RateQuantity::Component => s.component(0, 0, 0, 0).re,
        RateQuantity::Mixed => {
            if s.dim < 2 {
                return Err(ConeError::InvalidParams("mixed pair needs n >= 2".into()));
            }
            s.frame_pairs[1].1
        }
    })
}

/// Fit the blow-up exponent of `quantity` along the ray at angle `theta`.
pub fn fit_blowup_rate(
    metric: &ReferenceMetric,
    quantity: RateQuantity,
    radii: &[f64],
    theta: f64,
) -> Result<RateFit> {
    if radii.len() < 4 {
        return Err(ConeError::DegenerateFit("need at least 4 radii".into()));
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(ConeError::InvalidParams("radii must be strictly decreasing".into()));
    }
    let n = metric.dim();
    let rest = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];
    let mut ys = Vec::with_capacity(radii.len());
    for &r in radii {
        let s = curvature_at(metric, &ray_point(n, r, theta, &rest))?;
        ys.push(sample_quantity(&s, quantity)?);
    }
    log_log_fit(radii, &ys)
}

/// Per-ε result of a lower-bound scan.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EpsilonInfimum {
    pub epsilon: f64,
    pub infimum: f64,
    pub argmin_rho: f64,
    pub pair: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LowerBoundScan {
    pub per_epsilon: Vec<EpsilonInfimum>,
    /// Smallest infimum over all ε: the empirical uniform bound.
    pub uniform_bound: f64,
    /// `max |inf| / min |inf|` over ε.
    pub spread_ratio: f64,
}

impl LowerBoundScan {
    pub fn as_map(&self) -> BTreeMap<String, f64> {
        self.per_epsilon
            .iter()
            .map(|e| (format!("{:e}", e.epsilon), e.infimum))
            .collect()
    }
}

/// Random unit-direction pairs used in addition to the frame pairs.
pub fn random_pairs(dim: usize, count: usize, seed: u64) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
        (0..dim)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    };
    (0..count).map(|_| (draw(&mut rng), draw(&mut rng))).collect()
}

/// Infimum of normalized bisectional curvature over the grid and vector
/// pairs, for each ε.
pub fn uniform_lower_bound_scan(
    metric: &ReferenceMetric,
    eps_list: &[f64],
    domain: &DomainSpec,
    random_pair_count: usize,
    seed: u64,
    workers: usize,
) -> Result<LowerBoundScan> {
    domain.validate()?;
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(ConeError::InvalidParams("eps_list must lie in (0, 1]".into()));
    }
    let points = domain.points();
    let pairs = if metric.dim() > 1 {
        random_pairs(metric.dim(), random_pair_count, seed)
    } else {
        vec![]
    };
    let mut per = Vec::new();
    for &eps in eps_list {
        let m = metric.with_params(metric.params.with_epsilon(eps));
        let results = par_map(&points, workers, |p| -> Result<(f64, String, f64)> {
            let s = curvature_at(&m, p).map_err(|e| ConeError::AtEpsilon {
                eps,
                source: Box::new(e),
            })?;
            let mut best = (f64::INFINITY, String::new());
            for (label, v) in &s.frame_pairs {
                if *v < best.0 {
                    best = (*v, label.clone());
                }
            }
            for (k, (v, w)) in pairs.iter().enumerate() {
                let b = s.bisectional(v, w);
                if b < best.0 {
                    best = (b, format!("random{k}"));
                }
            }
            Ok((best.0, best.1, p[0].norm()))
        });
        let mut inf = EpsilonInfimum {
            epsilon: eps,
            infimum: f64::INFINITY,
            argmin_rho: f64::NAN,
            pair: String::new(),
        };
        for r in results {
            let (v, label, rho) = r?;
            if v < inf.infimum {
                inf = EpsilonInfimum {
                    epsilon: eps,
                    infimum: v,
                    argmin_rho: rho,
                    pair: label,
                };
            }
        }
        per.push(inf);
    }
    let uniform_bound = per.iter().map(|e| e.infimum).fold(f64::INFINITY, f64::min);
    let mags: Vec<f64> = per.iter().map(|e| e.infimum.abs()).collect();
    let (hi, lo) = (mags.iter().cloned().fold(0.0, f64::max), mags.iter().cloned().fold(f64::INFINITY, f64::min));
    // identical infima (possibly all zero) do not vary
    let spread_ratio = if hi == lo { 1.0 } else { hi / lo };
    Ok(LowerBoundScan {
        per_epsilon: per,
        uniform_bound,
        spread_ratio,
    })
}

/// `|omega_tilde - omega_tau|_{omega_tau}`, the pointwise norm of the
/// correction term measured in the uncorrected metric.
pub fn metric_closeness(metric: &ReferenceMetric, point: &[Complex64]) -> Result<f64> {
    if metric.params.c_coef == 0.0 {
        return Ok(0.0);
    }
    let plain = metric.with_params(metric.params.with_c(0.0));
    let g_tau = plain.metric_unchecked(point)?;
    let g_tilde = metric.metric_unchecked(point)?;
    let d = &g_tilde - &g_tau;
    let ginv = g_tau.try_inverse().ok_or_else(|| ConeError::SingularPoint {
        point: fmt_point(point),
        reason: "metric matrix is singular".into(),
    })?;
    let m = &ginv * &d;
    Ok((&m * &m).trace().re.max(0.0).sqrt())
}

/// Worst relative discrepancy between closed-form derivatives and central
/// differences: first derivatives from differences of the metric, mixed
/// second derivatives from differences of the closed-form first derivatives.
pub fn finite_difference_check(metric: &ReferenceMetric, point: &[Complex64], h: f64) -> Result<f64> {
    let n = metric.dim();
    let jets = metric.jets(point)?;
    let shifted = |k: usize, dx: Complex64| -> Point {
        let mut p = point.to_vec();
        p[k] += dx;
        p
    };
    let re = Complex64::new(h, 0.0);
    let im = Complex64::new(0.0, h);
    let half = Complex64::new(0.5, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for c in 0..n {
        let gxp = metric.metric_unchecked(&shifted(c, re))?;
        let gxm = metric.metric_unchecked(&shifted(c, -re))?;
        let gyp = metric.metric_unchecked(&shifted(c, im))?;
        let gym = metric.metric_unchecked(&shifted(c, -im))?;
        let dx = (&gxp - &gxm) / Complex64::new(2.0 * h, 0.0);
        let dy = (&gyp - &gym) / Complex64::new(2.0 * h, 0.0);
        // d_c = (d_x - i d_y) / 2, dbar_c = (d_x + i d_y) / 2
        let fd = (&dx - &dy * i) * half;
        let fdb = (&dx + &dy * i) * half;
        err = err.max((&fd - &jets.dg[c]).camax()).max((&fdb - &jets.dgbar[c]).camax());
        scale = scale.max(jets.dg[c].camax()).max(jets.dgbar[c].camax());

        let jxp = metric.jets(&shifted(c, re))?;
        let jxm = metric.jets(&shifted(c, -re))?;
        let jyp = metric.jets(&shifted(c, im))?;
        let jym = metric.jets(&shifted(c, -im))?;
        for d in 0..n {
            // d_c dbar_d g from the dbar_d g field
            let dx = (&jxp.dgbar[d] - &jxm.dgbar[d]) / Complex64::new(2.0 * h, 0.0);
            let dy = (&jyp.dgbar[d] - &jym.dgbar[d]) / Complex64::new(2.0 * h, 0.0);
            let fd2 = (&dx - &dy * i) * half;
            err = err.max((&fd2 - &jets.ddg[c][d]).camax());
            scale = scale.max(jets.ddg[c][d].camax());
        }
    }
    Ok(err / scale.max(1.0))
}
