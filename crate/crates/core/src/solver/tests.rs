use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model_geometry::{BaseMetric, HermitianWeight};

fn reference(tau: f64, tp: f64, c: f64, eps: f64, dim: usize) -> ReferenceMetric {
    let p = ConeParams::new(tau, tp, 1.0, c, eps).unwrap();
    ReferenceMetric::new(p, HermitianWeight::unit(), BaseMetric::flat(dim)).unwrap()
}

fn zero_source(m: &MetricField) -> SourceTerm {
    build_rhs(&vec![0.0; m.len()], m, false).unwrap()
}

#[test]
fn zero_source_gives_zero_potential() {
    let r = reference(0.75, 0.9, 0.05, 0.1, 2);
    let d = DomainSpec::model(2, 0.75, 0.0, 1.0, 12).with_smooth(1.0, 8);
    let m = MetricField::from_reference(&r, &d).unwrap();
    let (phi, rep) = newton_solve(&r.params, &m, &zero_source(&m), &SolveOptions::default(), None).unwrap();
    assert!(phi.sup_norm() <= 1e-10);
    assert_eq!(rep.iterations, 0);
    assert!((rep.monitor.sup_trace - 2.0).abs() < 1e-12);
}

#[test]
fn rhs_normalization() {
    let r = reference(0.75, 0.9, 0.05, 0.1, 2);
    let d = DomainSpec::model(2, 0.75, 0.0, 1.0, 10).with_smooth(2.0, 8);
    let m = MetricField::from_reference(&r, &d).unwrap();
    assert_eq!(zero_source(&m).constant, 0.0);
    let one = build_rhs(&vec![1.0; m.len()], &m, false).unwrap();
    assert!((one.constant + 1.0).abs() < 1e-14);
    let raw: Vec<f64> = d.points().iter().map(|p| p[1].re).collect();
    let s = build_rhs(&raw, &m, false).unwrap();
    assert!(normalization_defect(&s, &m).unwrap() <= 1e-10);
    let big = vec![701.0; m.len()];
    assert!(matches!(build_rhs(&big, &m, false), Err(ConeError::Overflow(_))));
}

/// Independent radial oracle: in one variable the equation is linear,
/// `(u'' + u'/r) / 4 = g (e^f - 1)`, solved by the Thomas algorithm.
fn thomas_oracle(rho: &[f64], h: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rho.len() - 1;
    let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let lo = 1.0 / (4.0 * h * h) - 1.0 / (8.0 * h * rho[i]);
        let hi = 1.0 / (4.0 * h * h) + 1.0 / (8.0 * h * rho[i]);
        b[i] = -2.0 / (4.0 * h * h);
        if i == 0 {
            b[i] += lo;
        } else {
            a[i] = lo;
        }
        c[i] = hi;
    }
    let mut d = rhs[..n].to_vec();
    for i in 1..n {
        let w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    let mut u = vec![0.0; n + 1];
    u[n - 1] = d[n - 1] / b[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = (d[i] - c[i] * u[i + 1]) / b[i];
    }
    u
}

#[test]
fn one_dimensional_newton_matches_linear_oracle() {
    let r = reference(0.75, 0.9, 0.05, 0.05, 1);
    let d = DomainSpec::model(1, 0.75, 0.0, 1.0, 48);
    let m = MetricField::from_reference(&r, &d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = Grid::new(&d).unwrap();
    for _ in 0..3 {
        let (a, k, c) = (rng.gen_range(-1.0..1.0), rng.gen_range(1.0..4.0), rng.gen_range(-0.5..0.5));
        let raw: Vec<f64> = grid.rho.iter().map(|x| a * (k * x).cos() + c * x * x).collect();
        let s = build_rhs(&raw, &m, false).unwrap();
        let (phi, rep) = newton_solve(&r.params, &m, &s, &SolveOptions::default(), None).unwrap();
        assert!(rep.residual <= 1e-10);
        let rhs: Vec<f64> = m
            .matrices
            .iter()
            .zip(&s.values)
            .map(|(g, f)| g[(0, 0)].re * (f.exp() - 1.0))
            .collect();
        let u = thomas_oracle(&grid.rho, grid.h, &rhs);
        let err = phi.values.iter().zip(&u).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err <= 1e-6, "{err}");
    }
}

fn bump(rho: f64) -> (f64, f64, f64) {
    let s = PI * rho;
    (0.5 * (1.0 + s.cos()), -0.5 * PI * s.sin(), -0.5 * PI * PI * s.cos())
}

/// Manufactured `phi* = A b(rho)(1 + beta cos 2 pi x)` with the exact Hessian.
pub(crate) fn manufactured(n: usize) -> (ReferenceMetric, MetricField, SourceTerm, Vec<f64>) {
    let (amp, beta) = (1e-2, 0.5);
    let r = reference(0.75, 0.9, 0.05, 0.1, 2);
    let d = DomainSpec::model(2, 0.75, 0.0, 1.0, n).with_smooth(1.0, n);
    let m = MetricField::from_reference(&r, &d).unwrap();
    let pts = d.points();
    let mut exact = Vec::new();
    let mut f = Vec::new();
    for (p, g) in pts.iter().zip(&m.matrices) {
        let rho = p[0].norm();
        let x = p[1].re;
        let (b, b1, b2) = bump(rho);
        let w = 2.0 * PI;
        let (t, t1, t2) = (1.0 + beta * (w * x).cos(), -beta * w * (w * x).sin(), -beta * w * w * (w * x).cos());
        exact.push(amp * b * t);
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 0)] = Complex64::new(0.25 * amp * (b2 + b1 / rho) * t, 0.0);
        h[(1, 1)] = Complex64::new(0.25 * amp * b * t2, 0.0);
        h[(0, 1)] = Complex64::new(0.25 * amp * b1 * t1, 0.0);
        h[(1, 0)] = h[(0, 1)];
        f.push(log_det_hermitian(&(g + h)) - log_det_hermitian(g));
    }
    let s = SourceTerm {
        domain: d,
        values: f,
        constant: 0.0,
        mu_coupled: false,
    };
    (r, m, s, exact)
}

#[test]
fn manufactured_solution_converges_second_order() {
    let mut errs = Vec::new();
    for n in [12, 24, 48] {
        let (r, m, s, exact) = manufactured(n);
        let (phi, rep) = newton_solve(&r.params, &m, &s, &SolveOptions::default(), None).unwrap();
        assert!(rep.residual_history.windows(2).all(|w| w[1] < w[0]));
        errs.push(phi.values.iter().zip(&exact).fold(0.0f64, |e, (a, b)| e.max((a - b).abs())));
    }
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 3.0 && ratio < 5.5, "{errs:?}");
    }
}

#[test]
fn mu_coupling_both_signs() {
    for mu in [-0.5, 0.1] {
        let r = reference(0.75, 0.9, 0.05, 0.1, 1);
        let params = r.params.with_mu(mu);
        let d = DomainSpec::model(1, 0.75, 0.0, 1.0, 24);
        let m = MetricField::from_reference(&r, &d).unwrap();
        let raw = SourceSpec::from_catalog("bump").unwrap().sample(&d, 0.1).unwrap();
        let s = build_rhs(&raw, &m, true).unwrap();
        let (phi, _) = newton_solve(&params, &m, &s, &SolveOptions::default(), None).unwrap_or_else(|e| panic!("{mu}: {e}"));
        let prob = MaProblem::new(&m).unwrap();
        let res = prob.residual(&phi.values, &s.values, mu).unwrap();
        assert!(sup_abs(&res) < 1e-9, "{mu}");
        assert!(phi.sup_norm() > 1e-4);
    }
    // the Picard feedback stops contracting for large positive mu
    let r = reference(0.75, 0.9, 0.05, 0.1, 1);
    let d = DomainSpec::model(1, 0.75, 0.0, 1.0, 24);
    let m = MetricField::from_reference(&r, &d).unwrap();
    let raw = SourceSpec::from_catalog("bump").unwrap().sample(&d, 0.1).unwrap();
    let s = build_rhs(&raw, &m, true).unwrap();
    assert!(newton_solve(&r.params.with_mu(0.5), &m, &s, &SolveOptions::default(), None).is_err());
}

#[test]
fn ricci_examples() {
    // flat
    let flat = reference(1.0, 1.0, 0.0, 0.0, 2);
    let d = DomainSpec::model(2, 1.0, 0.1, 1.0, 10).with_smooth(1.0, 8);
    let m = MetricField::from_reference(&flat, &d).unwrap();
    let rd = ricci_form(&m).unwrap();
    assert!(rd.trace.iter().all(|t| t.abs() < 1e-8));
    let rp = ricci_potential(&m, 0.0, 1).unwrap();
    assert!(rp.potential.unwrap().iter().all(|v| v.abs() < 1e-10));
    // pure cone off the tip
    // pure cone off the tip: log |z|^{2 tau - 2} is harmonic, second order at interior rows
    let p = ConeParams::new(0.6, 1.0, 1.0, 0.0, 0.0).unwrap();
    let cone = ReferenceMetric::new(p, HermitianWeight::unit(), BaseMetric::scaled_flat(1, 0.0)).unwrap();
    let mut worst = Vec::new();
    for n in [40, 80, 160] {
        let d1 = DomainSpec::model(1, 0.6, 0.2, 1.0, n);
        let rd = ricci_form(&MetricField::from_reference(&cone, &d1).unwrap()).unwrap();
        worst.push(rd.form[1..n - 1].iter().fold(0.0f64, |m, r| m.max(r[(0, 0)].norm())));
    }
    let ratio = worst[1] / worst[2];
    assert!(ratio > 3.2 && ratio < 4.5, "{worst:?}");
    // (1 + |z|^2)^{-2}: rho = 2 g
    let mut errs = Vec::new();
    for n in [20, 40] {
        let d = DomainSpec::model(1, 1.0, 0.0, 1.0, n);
        let m = MetricField::from_fn(&d, |z| {
            Ok(CMatrix::from_element(1, 1, Complex64::new((1.0 + z[0].norm_sqr()).powi(-2), 0.0)))
        })
        .unwrap();
        let rd = ricci_form(&m).unwrap();
        errs.push(rd.trace.iter().fold(0.0f64, |e, t| e.max((t - 2.0).abs())));
    }
    assert!(errs[1] < 1e-2 && errs[0] / errs[1] > 3.0, "{errs:?}");
}

fn inf_lap_f(c: f64, rho_min: f64) -> f64 {
    // a small base keeps its (1 - tau)^2 |z|^{2 - 4 tau} Ricci term below the correction's
    let p = ConeParams::new(0.75, 0.9, 1.0, c, 0.0).unwrap();
    let r = ReferenceMetric::new(p, HermitianWeight::unit(), BaseMetric::scaled_flat(1, 0.01)).unwrap();
    // resolve the inner row: h well below rho_min
    let d = DomainSpec::model(1, 0.75, rho_min, 0.05, 2000);
    let m = MetricField::from_reference(&r, &d).unwrap();
    ricci_potential(&m, 0.0, 1).unwrap().inf_laplacian
}

#[test]
fn ricci_potential_good_versus_naive() {
    let good: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&r| inf_lap_f(0.5, r)).collect();
    let naive: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&r| inf_lap_f(0.0, r)).collect();
    assert!(naive[0] > naive[1] && naive[1] > naive[2] && naive[2] < -10.0, "{naive:?}");
    assert!(good.iter().all(|v| *v > -1.0), "{good:?} {naive:?}");
}

#[test]
fn inequality_trivial_and_manufactured() {
    let r = reference(0.75, 0.9, 0.05, 0.1, 2);
    let d = DomainSpec::model(2, 0.75, 0.0, 1.0, 12).with_smooth(1.0, 12);
    let m = MetricField::from_reference(&r, &d).unwrap();
    let z = PotentialField::zeros(&d);
    let rep = differential_inequality_check(&z, &m, &zero_source(&m), &r, 0.0, 1).unwrap();
    assert!(rep.min_margin.abs() < 1e-12);
    let (r, m, s, _) = manufactured(24);
    let (phi, _) = newton_solve(&r.params, &m, &s, &SolveOptions::default(), None).unwrap();
    let a = differential_inequality_check(&phi, &m, &s, &r, 0.0, 1).unwrap();
    assert!(a.min_tolerance_slack >= 0.0, "{a:?}");
    let c2 = 50.0;
    let b = differential_inequality_check(&phi, &m, &s, &r, c2, 1).unwrap();
    assert!(b.shifted_margin_at_extremum > b.margin_at_extremum, "{b:?}");
}

#[test]
fn localized_model_solution() {
    let tau = 0.6;
    let d = DomainSpec::model(2, tau, 0.2, 1.0, 40).with_smooth(1.0, 16);
    let model = |p: &[Complex64]| p[0].norm().powf(2.0 * tau) + 2.0 * p[1].re * p[1].re;
    let w = PotentialField::from_fn(&d, model);
    let h = vec![2.0 * tau.ln(); d.len()];
    let base = localized_residual(&w, 0.0, &h, tau).unwrap();
    assert!(base < 1e-2, "{base}");
    let w2 = PotentialField::from_fn(&d, |p| model(p) + p[1].re);
    assert!((localized_residual(&w2, 0.0, &h, tau).unwrap() - base).abs() < 1e-10);
    let bad = PotentialField::from_fn(&d, |p| -model(p));
    assert!(matches!(localized_residual(&bad, 0.0, &h, tau), Err(ConeError::NotPsh(_))));
}

#[test]
fn continuation_constant_schedule() {
    let r = reference(0.75, 0.9, 0.05, 0.1, 1);
    let d = DomainSpec::model(1, 0.75, 0.0, 1.0, 24);
    let src = SourceSpec::from_catalog("log_radial").unwrap();
    let steps = epsilon_continuation(&r, &d, &src, &[0.1, 0.1], &SolveOptions::default(), false).unwrap();
    assert_eq!(steps[1].cauchy, Some(0.0));
    assert!(epsilon_continuation(&r, &d, &src, &[0.01, 0.1], &SolveOptions::default(), false).is_err());
}
