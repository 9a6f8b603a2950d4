use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use conekit::banded::{band_solve, BandMatrix};
use conekit::curvature::{condition_number, curvature_at};
use conekit::holder::{holder_seminorm, ConeDistance, DistanceConvention, GridFunction};
use conekit::io::{to_json_string, BinaryGrid};
use conekit::model_geometry::{
    eval_model_metric, eval_reference_metric, min_eigenvalue, BaseMetric, CMatrix, ConeParams, CorrectionSign,
    DomainSpec, HermitianWeight, MetricField, ReferenceMetric,
};
use conekit::solver::{build_rhs, newton_solve, normalization_defect, MaProblem, SolveOptions};
use conekit::symbolic::{int, rat, sym_ddbar, sym_eval_numeric, Affine, Base, Factor, Poly, Region, SymExpr, Tag};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cone_pair() -> impl Strategy<Value = (f64, f64)> {
    (0.2f64..0.9, 0.02f64..0.95).prop_map(|(t, s)| (t, t + s * (0.99 - t)))
}

fn weight_name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["unit", "constant", "gaussian", "periodic", "tilted"])
}

fn reference(t: f64, tp: f64, cc: f64, eps: f64, w: &str, dim: usize, gamma: f64) -> ReferenceMetric {
    let p = ConeParams::new(t, tp, 1.0, cc, eps).unwrap();
    ReferenceMetric::new(p, HermitianWeight::from_catalog(w, 1.0).unwrap(), BaseMetric::scaled_flat(dim, gamma)).unwrap()
}

fn hermitian_defect(g: &CMatrix) -> f64 {
    let scale = g.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    (g - g.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm())) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_is_hermitian(
        (t, tp) in cone_pair(), w in weight_name(), cc in 0.0f64..0.3, eps in 0.0f64..0.5,
        r in 0.01f64..0.9, th in 0.0f64..6.3, z2 in -1.0f64..1.0, y2 in -1.0f64..1.0,
    ) {
        let m = reference(t, tp, cc, eps, w, 2, 1.0);
        let g = m.metric_unchecked(&[Complex64::from_polar(r, th), c(z2, y2)]).unwrap();
        prop_assert!(hermitian_defect(&g) <= 1e-14, "{}", hermitian_defect(&g));
    }

    #[test]
    fn family_continuous_in_epsilon(
        (t, tp) in cone_pair(), cc in 0.0f64..0.3, r in 0.05f64..0.9, th in 0.0f64..6.3,
    ) {
        let point = [Complex64::from_polar(r, th)];
        let g0 = reference(t, tp, cc, 0.0, "unit", 1, 1.0).metric_unchecked(&point).unwrap();
        let diffs: Vec<f64> = (4..40).step_by(4)
            .map(|k| {
                let g = reference(t, tp, cc, 0.5f64.powi(k), "unit", 1, 1.0).metric_unchecked(&point).unwrap();
                (g - &g0).norm() / g0.norm()
            })
            .collect();
        // once eps is well below |z|^2 the defect shrinks at every step
        let tail: Vec<f64> = (4..40).step_by(4).zip(&diffs).filter(|(k, _)| 0.5f64.powi(*k) < 0.25 * r * r).map(|(_, d)| *d).collect();
        prop_assert!(tail.windows(2).all(|d| d[1] <= d[0] + 1e-15), "{diffs:?}");
        // and is first order in eps / |z|^2
        prop_assert!(*diffs.last().unwrap() <= 10.0 * 0.5f64.powi(36) / (r * r), "{diffs:?}");
    }

    #[test]
    fn unit_weight_without_correction_is_model(
        t in 0.1f64..1.0, eps in prop::sample::select(vec![0.0, 1e-3, 0.1]),
        r in 0.01f64..0.9, th in 0.0f64..6.3, z2 in -1.0f64..1.0,
    ) {
        let p = ConeParams::new(t, 1.0, 1.0, 0.0, eps).unwrap();
        let m = ReferenceMetric::new(p, HermitianWeight::unit(), BaseMetric::flat(2)).unwrap();
        let d = DomainSpec::model(2, t, 0.0, 1.0, 8).with_smooth(1.0, 4);
        let point = [Complex64::from_polar(r, th), c(z2, 0.3)];
        let a = eval_reference_metric(&m, &point).unwrap();
        // the model carries the flat part only in the smooth direction
        let mut b = eval_model_metric(&p, &d, &point).unwrap();
        b[(0, 0)] += 1.0;
        prop_assert!((&a - &b).norm() <= 1e-12 * b.norm(), "{a} vs {b}");
    }

    #[test]
    fn curvature_has_kahler_symmetries(
        (t, tp) in cone_pair(), w in weight_name(), cc in 0.0f64..0.2, eps in 0.0f64..0.3,
        r in 0.05f64..0.8, th in 0.0f64..6.3, z2 in -0.5f64..0.5,
    ) {
        let m = reference(t, tp, cc, eps, w, 2, 1.0);
        let point = [Complex64::from_polar(r, th), c(z2, 0.1)];
        prop_assume!(min_eigenvalue(&m.metric_unchecked(&point).unwrap()) > 0.0);
        let s = curvature_at(&m, &point).unwrap();
        prop_assert!(s.symmetry_defect() <= 1e-9 * s.max_abs_component().max(1.0), "{}", s.symmetry_defect());
    }

    #[test]
    fn conditioning_tracks_cone_power(t in 0.3f64..0.9, r in 1e-3f64..1e-2) {
        let m = reference(t, 1.0, 0.0, 0.0, "unit", 2, 1.0);
        let cond = |r: f64| condition_number(&m.metric_unchecked(&[c(r, 0.0), c(0.2, 0.0)]).unwrap());
        let growth = cond(r / 100.0) / cond(r);
        let model = 100f64.powf(2.0 - 2.0 * t);
        prop_assert!(growth >= model / 2.0 && growth <= model * 2.0, "{growth} vs {model}");
    }

    #[test]
    fn good_metric_curvature_eventually_positive(
        t in 0.3f64..0.6, gap in 0.15f64..0.25, th in 0.0f64..6.3,
    ) {
        let tp = t + gap;
        let m = reference(t, tp, 0.5, 0.0, "unit", 1, 1.0);
        // the subleading terms are relatively of order |z|^{2(t'-t)} and,
        // through the flat base, |z|^{2(1-t')}
        let r = 10f64.powf(-1.5 / gap.min(1.0 - tp));
        let s = curvature_at(&m, &[Complex64::from_polar(r, th)]).unwrap();
        prop_assert!(s.normalized_bisectional > 0.0, "r = {r}: {}", s.normalized_bisectional);
    }

    #[test]
    fn conventions_within_cone_factor(
        p in 2usize..5, r1 in 0.0f64..1.0, r2 in 0.0f64..1.0, a1 in 0.0f64..6.3, a2 in 0.0f64..6.3,
    ) {
        let tau = 1.0 / p as f64;
        let x = [Complex64::from_polar(r1, a1)];
        let y = [Complex64::from_polar(r2, a2)];
        let dx = ConeDistance::new(tau, DistanceConvention::XiMap).unwrap().distance(&x, &y);
        let du = ConeDistance::new(tau, DistanceConvention::Uniformization).unwrap().distance(&x, &y);
        prop_assume!(du > 1e-12);
        let q = dx / du;
        prop_assert!(q >= 1.0 - 1e-9 && q <= p as f64 * (1.0 + 1e-9), "{q}");
    }

    #[test]
    fn seminorm_scaling_and_alpha_order(
        tau in 0.3f64..1.0, k in -5.0f64..5.0, seed in 0u64..1000,
        a1 in 0.1f64..1.0, a2 in 0.1f64..1.0,
    ) {
        // points with |xi| <= 1/2, so the domain has d_tau-diameter at most 1
        let mut pts = Vec::new();
        let mut vals = Vec::new();
        let mut s = seed;
        for i in 0..40 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (s >> 11) as f64 / (1u64 << 53) as f64;
            let rad = (0.5 * u).powf(1.0 / tau);
            pts.push(vec![Complex64::from_polar(rad, i as f64 * 0.7)]);
            vals.push((u * 7.0).sin() * 0.5);
        }
        let f = GridFunction::new(pts, vals).unwrap();
        let d = ConeDistance::xi(tau);
        let base = holder_seminorm(&f, 0.6, &d, u64::MAX, 1).unwrap().seminorm;
        let scaled = holder_seminorm(&f.scaled(k), 0.6, &d, u64::MAX, 1).unwrap().seminorm;
        prop_assert!((scaled - k.abs() * base).abs() <= 1e-14 * scaled.max(1e-300), "{scaled} vs {}", k.abs() * base);
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let s_lo = holder_seminorm(&f, lo, &d, u64::MAX, 1).unwrap().seminorm;
        let s_hi = holder_seminorm(&f, hi, &d, u64::MAX, 1).unwrap().seminorm;
        prop_assert!(s_lo <= s_hi * (1.0 + 1e-12), "{s_lo} > {s_hi}");
    }

    #[test]
    fn band_solve_matches_dense(n in 3usize..40, kl in 0usize..4, ku in 0usize..4, seed in 0u64..10_000) {
        let mut a = BandMatrix::new(n, kl, ku);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j { 4.0 + next() } else { next() };
                a.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| next()).collect();
        let x = band_solve(a, &b).unwrap();
        let want = dense.lu().solve(&DVector::from_vec(b)).unwrap();
        for (u, v) in x.iter().zip(want.iter()) {
            prop_assert!((u - v).abs() <= 1e-12, "{u} vs {v}");
        }
    }

    #[test]
    fn grid_and_json_round_trip(data in prop::collection::vec(any::<f64>(), 1..64)) {
        let g = BinaryGrid::new(vec![data.len() as u64], data.clone()).unwrap();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        let back = BinaryGrid::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.dims, g.dims);
        for (a, b) in back.data.iter().zip(&data) {
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
        let finite: Vec<f64> = data.into_iter().filter(|x| x.is_finite()).collect();
        let text = to_json_string(&finite).unwrap();
        let parsed: Vec<f64> = serde_json::from_str(&text).unwrap();
        prop_assert!(parsed.iter().zip(&finite).all(|(a, b)| a.to_bits() == b.to_bits() || (*a == 0.0 && *b == 0.0)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rhs_normalized_and_newton_monotone(
        amp in -0.8f64..0.8, k in 0.5f64..4.0, shift in -1.0f64..1.0, eps in 0.02f64..0.2,
    ) {
        let m = reference(0.75, 0.9, 0.05, eps, "unit", 1, 1.0);
        let d = DomainSpec::model(1, 0.75, 0.0, 1.0, 20);
        let field = MetricField::from_reference(&m, &d).unwrap();
        let raw: Vec<f64> = d.points().iter().map(|p| amp * (k * p[0].norm()).cos() + shift).collect();
        let s = build_rhs(&raw, &field, false).unwrap();
        prop_assert!(normalization_defect(&s, &field).unwrap() <= 1e-10);
        let (phi, rep) = newton_solve(&m.params, &field, &s, &SolveOptions::default(), None).unwrap();
        prop_assert!(rep.residual_history.windows(2).all(|w| w[1] < w[0]), "{:?}", rep.residual_history);
        prop_assert!(normalization_defect(&s, &field).unwrap() <= 1e-8);
        let prob = MaProblem::new(&field).unwrap();
        for (g, h) in field.matrices.iter().zip(prob.hessians(&phi.values)) {
            prop_assert!(min_eigenvalue(&(g + h)) > 0.0);
        }
    }
}

/// Tag-free flat curvature expansion, built once: the exponents are symbolic
/// in (t, t') so one expansion serves every parameter draw.
fn flat_expansion() -> &'static SymExpr {
    static E: OnceLock<SymExpr> = OnceLock::new();
    E.get_or_init(|| {
        conekit::symbolic::sym_curvature_component_flat(CorrectionSign::Subtract, &rat(1, 10), 40, Region::Standard).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn symbolic_matches_numeric_curvature(t in 0.2f64..0.6, gap in 0.3f64..1.0, r in 0.01f64..0.1) {
        let tp = t + gap * (0.99 - t);
        // the inverse series is geometric in this ratio, so draws are kept
        // where it converges
        let ratio = (tp / t).powi(2) * r.powf(2.0 * (tp - t)) + 0.1 * r.powf(2.0 - 2.0 * t) / (t * t);
        prop_assume!(ratio <= 0.5);
        let sym = sym_eval_numeric(flat_expansion(), t, tp, r, &BTreeMap::new()).unwrap();
        let m = reference(t, tp, 1.0, 0.0, "unit", 1, 0.1);
        let num = curvature_at(&m, &[c(r, 0.0)]).unwrap().component(0, 0, 0, 0).re;
        prop_assert!(((sym - num) / num).abs() <= 1e-4, "{sym} vs {num}");
    }

    #[test]
    fn canonicalize_idempotent_and_ddbar_linear(
        terms in prop::collection::vec((-5i64..6, 1i64..4, -3i64..3, -2i64..3, -2i64..3, 0u32..3, 0u32..3, 0usize..4), 1..6),
        split in 0usize..6,
    ) {
        let tags = [
            Tag::one(),
            Tag::single(Factor::bare(Base::K)),
            Tag::single(Factor::new(Base::M, &[1], &[]).unwrap()),
            Tag::single(Factor::new(Base::K, &[2], &[1]).unwrap()),
        ];
        let build = |ts: &[(i64, i64, i64, i64, i64, u32, u32, usize)]| {
            let mut e = SymExpr::zero();
            for &(n, d, p0, p1, p2, q, r, k) in ts {
                e = &e + &SymExpr::term(Poly::monomial(rat(n, d), (p1 + 2) as i32 % 2, 0), Affine::new(p0, p1, p2), q, r, tags[k].clone());
            }
            e
        };
        let cut = split.min(terms.len());
        let (e1, e2) = (build(&terms[..cut]), build(&terms[cut..]));
        let sum = &e1 + &e2;
        prop_assert_eq!(sum.canonicalize(), sum.clone());
        prop_assert_eq!(sum.canonicalize().canonicalize(), sum.canonicalize());
        for pair in [(1u8, 1u8), (1, 2), (2, 1)] {
            let lhs = sym_ddbar(&sum, pair).unwrap();
            let rhs = &sym_ddbar(&e1, pair).unwrap() + &sym_ddbar(&e2, pair).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
        prop_assert_eq!(int(0), int(0));
    }
}

#[test]
fn seam_free_angle_grid_positive() {
    // the full-angle grid evaluates the same metric on every ray
    let m = reference(0.75, 0.9, 0.05, 0.1, "unit", 1, 1.0);
    let d = DomainSpec::model(1, 0.75, 0.0, 1.0, 8).with_angles(6);
    let field = MetricField::from_reference(&m, &d).unwrap();
    field.check_positive().unwrap();
    let pts = d.points();
    for (p, g) in pts.iter().zip(&field.matrices) {
        let q = [Complex64::from_polar(p[0].norm(), p[0].arg() + 2.0 * PI / 6.0)];
        let h = m.metric_unchecked(&q).unwrap();
        assert!((g - h).norm() <= 1e-12 * g.norm());
    }
}
