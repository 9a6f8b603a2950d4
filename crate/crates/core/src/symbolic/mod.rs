//! Exact symbolic expansion of the reference potential near the divisor:
//! metric components, derivatives, the `g^{11}` series and the `1 1 1 1`
//! curvature component, with rational arithmetic throughout.

pub mod coeff;
pub mod expr;
pub mod region;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{ConeError, Result};
use crate::model_geometry::CorrectionSign;
pub use coeff::{int, rat, Poly, Rat};
pub use expr::{Affine, Base, Factor, Shape, SymExpr, SymTerm, Tag};
pub use region::{compare_exponents, factor_monomial_square, poly_sign, Region, SquareFactorization};

/// `K |z|^{2t} -/+ M |z|^{2t'}`.
pub fn sym_potential(sign: CorrectionSign) -> SymExpr {
    let k = SymExpr::term(Poly::one(), Affine::new(0, 2, 0), 0, 0, Tag::single(Factor::bare(Base::K)));
    let m = SymExpr::term(
        Poly::constant(int(sign.factor() as i64)),
        Affine::new(0, 0, 2),
        0,
        0,
        Tag::single(Factor::bare(Base::M)),
    );
    &k + &m
}

/// The base potential `P`, whose `ddbar` is `g0`.
pub fn sym_base_potential() -> SymExpr {
    SymExpr::term(Poly::one(), Affine::ZERO, 0, 0, Tag::single(Factor::bare(Base::P)))
}

/// Full potential including the base term.
pub fn sym_full_potential(sign: CorrectionSign) -> SymExpr {
    &sym_potential(sign) + &sym_base_potential()
}

/// `d_alpha dbar_beta expr`, indices 1-based.
pub fn sym_ddbar(expr: &SymExpr, index_pair: (u8, u8)) -> Result<SymExpr> {
    expr.derivatives(&[index_pair.0], &[index_pair.1])
}

/// Evaluate at an adapted point: `K = M = 1`, first derivatives and pure
/// (anti)holomorphic second derivatives of `K`, `M` vanish.
pub fn sym_adapted_evaluate(expr: &SymExpr) -> SymExpr {
    let mut out = SymExpr::zero();
    'terms: for (s, c) in expr.iter() {
        let mut kept = vec![];
        for f in &s.tag.0 {
            if f.base == Base::P {
                kept.push(f.clone());
                continue;
            }
            let pure2 = f.order() == 2 && (f.holo.is_empty() || f.anti.is_empty());
            match f.order() {
                0 => {}
                1 => continue 'terms,
                2 if pure2 => continue 'terms,
                _ => kept.push(f.clone()),
            }
        }
        out.add_term(c.clone(), Shape::new(s.p, s.q, s.r, Tag(kept)));
    }
    out
}

/// The term dominating as `|z| -> 0` on `region`: its exponent is strictly
/// below every other exponent in the expression.
pub fn dominant_term(expr: &SymExpr, region: Region) -> Option<SymTerm> {
    let terms = expr.terms();
    terms
        .iter()
        .find(|t| {
            terms.iter().all(|o| {
                std::ptr::eq(*t, o) || compare_exponents(t.shape.p, o.shape.p, region) == Some(Ordering::Less)
            })
        })
        .cloned()
}

/// Geometric series for `1 / g_{11}` about its dominant term, through
/// `(g - D)^order / D^order`.
pub fn sym_inverse_11(metric_terms: &SymExpr, order: usize, region: Region) -> Result<SymExpr> {
    let d = dominant_term(metric_terms, region).ok_or_else(|| {
        ConeError::DominationFailure("no term dominates all others on the region".into())
    })?;
    let (c, i, j) = d.coeff.as_monomial().ok_or_else(|| {
        ConeError::DominationFailure(format!("dominant coefficient {} is not a monomial", d.coeff))
    })?;
    if !c.is_positive() || d.shape.q != 0 || d.shape.r != 0 || !d.shape.tag.is_one() {
        return Err(ConeError::DominationFailure(format!(
            "dominant term {d} is not a positive pure power"
        )));
    }
    let d_inv = SymExpr::term(Poly::monomial(c.recip(), -i, -j), -d.shape.p, 0, 0, Tag::one());
    let rest = metric_terms.filter(|s, _| *s != d.shape);
    let y = -&(&rest * &d_inv);
    let mut sum = SymExpr::constant(Poly::one());
    let mut power = SymExpr::constant(Poly::one());
    for _ in 0..order {
        power = &power * &y;
        sum = &sum + &power;
    }
    Ok(&d_inv * &sum)
}

/// Adapted-point metric component `g_{1 1}` including `g0`.
pub fn sym_metric_11(sign: CorrectionSign) -> Result<SymExpr> {
    Ok(sym_adapted_evaluate(&sym_ddbar(&sym_full_potential(sign), (1, 1))?))
}

/// `R_{1 1 1 1} = -g_{11,11} + g^{11} g_{11,1} g_{11,1bar}` at an adapted point,
/// uncontracted.
pub fn sym_curvature_component(sign: CorrectionSign, order: usize, region: Region) -> Result<SymExpr> {
    let g = sym_ddbar(&sym_full_potential(sign), (1, 1))?;
    let dg = sym_adapted_evaluate(&g.derivative(1, false)?);
    let dgb = sym_adapted_evaluate(&g.derivative(1, true)?);
    let ddg = sym_adapted_evaluate(&g.derivatives(&[1], &[1])?);
    let inv = sym_inverse_11(&sym_adapted_evaluate(&g), order, region)?;
    Ok(&(&inv * &(&dg * &dgb)) - &ddg)
}

/// Curvature component for a constant weight and `g0_{11} = gamma`, with the
/// tags substituted before the inverse series is formed. Much smaller than
/// the fully symbolic expansion, so high orders are cheap.
pub fn sym_curvature_component_flat(
    sign: CorrectionSign,
    gamma: &Rat,
    order: usize,
    region: Region,
) -> Result<SymExpr> {
    let g = sym_ddbar(&sym_full_potential(sign), (1, 1))?;
    let parts = [
        g.derivative(1, false)?,
        g.derivative(1, true)?,
        g.derivatives(&[1], &[1])?,
        g,
    ];
    let flat: Vec<SymExpr> = parts
        .iter()
        .map(|e| {
            let a = sym_adapted_evaluate(e);
            a.substitute(&flat_tag_substitution(&a, gamma))
        })
        .collect();
    let inv = sym_inverse_11(&flat[3], order, region)?;
    Ok(&(&inv * &(&flat[0] * &flat[1])) - &flat[2])
}

/// Radial weight `|z|^{2 - 2t}` carried by each `v^1 vbar^1` of a unit vector.
pub const UNIT_VECTOR_SHIFT: Affine = Affine::new(2, -2, 0);

/// `R_{1 1 1 1} v v w w` with both unit vectors contributing `|z|^{2-2t}`.
pub fn sym_curvature_1111(sign: CorrectionSign, order: usize, region: Region) -> Result<SymExpr> {
    Ok(sym_curvature_component(sign, order, region)?.shift_radial(UNIT_VECTOR_SHIFT.scale(2)))
}

/// Substitute numbers. `z_1` is taken real and positive, and every tag
/// factor must have a value in `weight_bounds`, keyed by its text form.
pub fn sym_eval_numeric(
    expr: &SymExpr,
    tau: f64,
    tau_prime: f64,
    modulus: f64,
    weight_bounds: &BTreeMap<String, f64>,
) -> Result<f64> {
    if !(modulus > 0.0) {
        return Err(ConeError::InvalidParams(format!("|z| = {modulus} must be positive")));
    }
    let mut total = 0.0;
    for (s, c) in expr.iter() {
        let mut tag = 1.0;
        for f in &s.tag.0 {
            let key = f.to_string();
            tag *= weight_bounds
                .get(&key)
                .copied()
                .ok_or(ConeError::MissingTag(key))?;
        }
        if tag == 0.0 {
            continue;
        }
        let p = s.p.eval(tau, tau_prime) + (s.q + s.r) as f64;
        total += c.eval(tau, tau_prime) * modulus.powf(p) * tag;
    }
    Ok(total)
}

/// Tag values for a constant weight (`a = 1`) and a flat base with
/// `g0_{11} = gamma`: every derivative of `K`, `M` vanishes.
pub fn flat_tag_values(expr: &SymExpr, gamma: f64) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (s, _) in expr.iter() {
        for f in &s.tag.0 {
            let v = match f.base {
                Base::P if f.holo == [1] && f.anti == [1] => gamma,
                Base::P => 0.0,
                _ if f.order() == 0 => 1.0,
                _ => 0.0,
            };
            out.insert(f.to_string(), v);
        }
    }
    out
}

/// Exact counterpart of [`flat_tag_values`] with rational `gamma`.
pub fn flat_tag_substitution(expr: &SymExpr, gamma: &Rat) -> BTreeMap<Factor, Rat> {
    let mut out = BTreeMap::new();
    for (s, _) in expr.iter() {
        for f in &s.tag.0 {
            let v = match f.base {
                Base::P if f.holo == [1] && f.anti == [1] => gamma.clone(),
                Base::P => Rat::zero(),
                _ if f.order() == 0 => int(1),
                _ => Rat::zero(),
            };
            out.insert(f.clone(), v);
        }
    }
    out
}

/// Outcome of the exact cancellation and positivity analysis.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureAnalysis {
    pub sign: CorrectionSign,
    pub cancelled_exponent: String,
    pub cancelled_coefficient: String,
    pub cancellation_exact: bool,
    pub leading_exponent: String,
    pub leading_coefficient: String,
    pub expected_coefficient: String,
    pub matches_expected: bool,
    pub factorization: Option<String>,
    pub sign_on_region: Option<String>,
    pub leading_is_lowest: bool,
    #[serde(skip)]
    pub leading_factorization: Option<SquareFactorization>,
}

/// Check the two exact claims about the contracted curvature: the `|z|^{-2t}`
/// coefficient vanishes, and the next tag-free coefficient at
/// `|z|^{2t' - 4t}` is `-/+ t'^2 (t' - t)^2`, of definite sign.
pub fn analyze_curvature(sign: CorrectionSign) -> Result<CurvatureAnalysis> {
    let r = sym_curvature_1111(sign, 2, Region::Standard)?;
    let cancelled = Affine::new(0, -2, 0);
    let leading = Affine::new(0, -4, 2);
    let c0 = r.radial_coefficient(cancelled);
    let c1 = r.radial_coefficient(leading);
    let d = &Poly::tp() - &Poly::t();
    // with the subtracted correction the coefficient is +t'^2 (t'-t)^2
    let expected = (&d * &d).shift(0, 2).scale(&int(-(sign.factor() as i64)));
    let fact = factor_monomial_square(&c1);
    let sign_on = fact.as_ref().and_then(|f| f.sign_on(Region::Standard));
    let leading_is_lowest = r.iter().all(|(s, _)| {
        s.p == leading || s.p == cancelled || compare_exponents(s.p, leading, Region::Standard) == Some(Ordering::Greater)
    });
    Ok(CurvatureAnalysis {
        sign,
        cancelled_exponent: cancelled.to_string(),
        cancelled_coefficient: c0.to_string(),
        cancellation_exact: c0.is_zero() && r.iter().all(|(s, _)| s.p != cancelled),
        leading_exponent: leading.to_string(),
        leading_coefficient: c1.to_string(),
        expected_coefficient: expected.to_string(),
        matches_expected: c1 == expected,
        factorization: fact.as_ref().map(|f| {
            format!(
                "{} * t^{} * t'^{} * ({}*t + {}*t' + {})^2",
                coeff::fmt_rat(&f.constant),
                f.t_pow,
                f.tp_pow,
                coeff::fmt_rat(&f.linear[0]),
                coeff::fmt_rat(&f.linear[1]),
                coeff::fmt_rat(&f.linear[2])
            )
        }),
        leading_factorization: fact.clone(),
        sign_on_region: sign_on.map(|o| match o {
            Ordering::Greater => "positive".to_string(),
            Ordering::Less => "negative".to_string(),
            Ordering::Equal => "zero".to_string(),
        }),
        leading_is_lowest,
    })
}

/// Named canonical text documents used as golden files.
pub fn golden_documents() -> Result<Vec<(String, String)>> {
    let sign = CorrectionSign::Subtract;
    let phi = sym_full_potential(sign);
    let idx = [1u8, 2];
    let mut metric = String::new();
    let mut adapted = String::new();
    let mut second = String::new();
    for &a in &idx {
        for &b in &idx {
            let g = sym_ddbar(&phi, (a, b))?;
            metric.push_str(&format!("# g[{a}|{b}]\n{}", g.to_text()));
            adapted.push_str(&format!("# g[{a}|{b}]\n{}", sym_adapted_evaluate(&g).to_text()));
            for &c in &idx {
                for &d in &idx {
                    let gg = sym_adapted_evaluate(&g.derivatives(&[c], &[d])?);
                    second.push_str(&format!("# g[{a}|{b}],[{c}|{d}]\n{}", gg.to_text()));
                }
            }
        }
    }
    let inverse = sym_inverse_11(&sym_metric_11(sign)?, 2, Region::Standard)?;
    let curvature = sym_curvature_1111(sign, 2, Region::Standard)?;
    Ok(vec![
        ("metric.txt".into(), metric),
        ("metric_adapted.txt".into(), adapted),
        ("metric_second_derivatives.txt".into(), second),
        ("inverse_11.txt".into(), inverse.to_text()),
        ("curvature_1111.txt".into(), curvature.to_text()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(base: Base, h: &[u8], a: &[u8]) -> Tag {
        Tag::single(Factor::new(base, h, a).unwrap())
    }

    fn t2() -> Poly {
        &Poly::t() * &Poly::t()
    }

    fn tp2() -> Poly {
        &Poly::tp() * &Poly::tp()
    }

    #[test]
    fn potential_shape() {
        let p = sym_potential(CorrectionSign::Subtract);
        let ts = p.terms();
        assert_eq!(ts.len(), 2);
        // sorted by (p0, p1, p2): the t' exponent comes first
        assert_eq!(ts[0].shape.p, Affine::new(0, 0, 2));
        assert_eq!(ts[0].coeff, Poly::constant(int(-1)));
        assert_eq!(ts[1].shape.p, Affine::new(0, 2, 0));
        // t' = t and K = M leaves nothing
        let sub = BTreeMap::from([(Factor::bare(Base::K), int(1)), (Factor::bare(Base::M), int(1))]);
        assert!(p.on_diagonal().substitute(&sub).is_zero());
    }

    #[test]
    fn ddbar_of_cone_term() {
        let k = SymExpr::term(Poly::one(), Affine::new(0, 2, 0), 0, 0, tag(Base::K, &[], &[]));
        let g = sym_ddbar(&k, (1, 1)).unwrap();
        assert_eq!(g.len(), 4);
        let e = Affine::new(-2, 2, 0);
        assert_eq!(g.coefficient(e, 0, 0, &tag(Base::K, &[], &[])), t2());
        assert_eq!(g.coefficient(e, 1, 0, &tag(Base::K, &[1], &[])), Poly::t());
        assert_eq!(g.coefficient(e, 0, 1, &tag(Base::K, &[], &[1])), Poly::t());
        assert_eq!(g.coefficient(Affine::new(0, 2, 0), 0, 0, &tag(Base::K, &[1], &[1])), Poly::one());
        // with the base potential this is the five-term first line
        let with_base = sym_ddbar(&(&k + &sym_base_potential()), (1, 1)).unwrap();
        assert_eq!(with_base.len(), 5);
    }

    #[test]
    fn ddbar_off_cone_direction_without_weight() {
        let e = SymExpr::term(Poly::one(), Affine::new(0, 2, 0), 0, 0, Tag::one());
        assert!(sym_ddbar(&e, (2, 2)).unwrap().is_zero());
    }

    #[test]
    fn mixed_partials_commute() {
        let phi = sym_full_potential(CorrectionSign::Subtract);
        for idx in [[1u8, 1, 1], [1, 2, 1], [2, 1, 2], [2, 2, 1]] {
            let a = phi
                .derivative(idx[0], false)
                .and_then(|e| e.derivative(idx[1], true))
                .and_then(|e| e.derivative(idx[2], false))
                .unwrap();
            let b = phi
                .derivative(idx[0], false)
                .and_then(|e| e.derivative(idx[2], false))
                .and_then(|e| e.derivative(idx[1], true))
                .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn adapted_metric_good_coordinates() {
        let g = sym_metric_11(CorrectionSign::Subtract).unwrap();
        let mut want = SymExpr::zero();
        let terms = [
            (Poly::one(), Affine::ZERO, tag(Base::P, &[1], &[1])),
            (Poly::one(), Affine::new(0, 2, 0), tag(Base::K, &[1], &[1])),
            (t2(), Affine::new(-2, 2, 0), Tag::one()),
            (-&Poly::one(), Affine::new(0, 0, 2), tag(Base::M, &[1], &[1])),
            (-&tp2(), Affine::new(-2, 0, 2), Tag::one()),
        ];
        for (c, p, t) in terms {
            want.add_term(c, Shape::new(p, 0, 0, t));
        }
        assert_eq!(g, want);
    }

    #[test]
    fn adapted_drops_first_derivatives() {
        let e = SymExpr::term(Poly::t(), Affine::new(-2, 2, 0), 1, 0, tag(Base::K, &[2], &[]));
        assert!(sym_adapted_evaluate(&e).is_zero());
        let e = SymExpr::term(Poly::t(), Affine::ZERO, 0, 0, tag(Base::M, &[], &[1, 2]));
        assert!(sym_adapted_evaluate(&e).is_zero());
    }

    #[test]
    fn adapted_second_derivative_leading_terms() {
        let g = sym_ddbar(&sym_full_potential(CorrectionSign::Subtract), (1, 1)).unwrap();
        let gg = sym_adapted_evaluate(&g.derivatives(&[1], &[1]).unwrap());
        let one_minus = |p: Poly| &Poly::one() - &p;
        let sq = |p: Poly| &p * &p;
        assert_eq!(
            gg.radial_coefficient(Affine::new(-4, 2, 0)),
            &t2() * &sq(one_minus(Poly::t()))
        );
        assert_eq!(
            gg.radial_coefficient(Affine::new(-4, 0, 2)),
            -&(&tp2() * &sq(one_minus(Poly::tp())))
        );
    }

    #[test]
    fn inverse_leading_terms() {
        let g = sym_metric_11(CorrectionSign::Subtract).unwrap();
        let i0 = sym_inverse_11(&g, 0, Region::Standard).unwrap();
        assert_eq!(i0.len(), 1);
        assert_eq!(
            i0.radial_coefficient(Affine::new(2, -2, 0)),
            Poly::monomial(int(1), -2, 0)
        );
        let i1 = sym_inverse_11(&g, 1, Region::Standard).unwrap();
        assert_eq!(
            i1.radial_coefficient(Affine::new(2, -4, 2)),
            Poly::monomial(int(1), -4, 2)
        );
    }

    #[test]
    fn inverse_domination_failure() {
        let g = sym_metric_11(CorrectionSign::Subtract).unwrap();
        assert!(matches!(
            sym_inverse_11(&g, 1, Region::Reversed),
            Err(ConeError::DominationFailure(_))
        ));
        assert!(matches!(
            sym_inverse_11(&g, 1, Region::Diagonal),
            Err(ConeError::DominationFailure(_))
        ));
    }

    #[test]
    fn inverse_numeric_cross_check() {
        let (t, tp, r) = (0.5, 0.75, 1e-3);
        let g = sym_metric_11(CorrectionSign::Subtract).unwrap();
        let inv = sym_inverse_11(&g, 1, Region::Standard).unwrap();
        let bounds = flat_tag_values(&inv, 1.0);
        let approx = sym_eval_numeric(&inv, t, tp, r, &bounds).unwrap();
        let gb = flat_tag_values(&g, 1.0);
        let exact = 1.0 / sym_eval_numeric(&g, t, tp, r, &gb).unwrap();
        let exact_closed = 1.0 / (1.0 + t * t * r.powf(2.0 * t - 2.0) - tp * tp * r.powf(2.0 * tp - 2.0));
        assert!((exact - exact_closed).abs() < 1e-14 * exact);
        assert!(((approx - exact) / exact).abs() <= 10.0 * r.powf(2.0 * (tp - t)));
    }

    #[test]
    fn eval_numeric_basics() {
        let b = BTreeMap::new();
        assert_eq!(sym_eval_numeric(&SymExpr::zero(), 0.5, 0.7, 0.3, &b).unwrap(), 0.0);
        let e = SymExpr::term(t2(), Affine::new(-2, 2, 0), 0, 0, Tag::one());
        assert_eq!(sym_eval_numeric(&e, 0.5, 0.7, 0.25, &b).unwrap(), 1.0);
        let k = SymExpr::term(Poly::one(), Affine::ZERO, 0, 0, tag(Base::K, &[1], &[1]));
        assert!(matches!(
            sym_eval_numeric(&k, 0.5, 0.7, 0.25, &b),
            Err(ConeError::MissingTag(_))
        ));
    }

    #[test]
    fn cancellation_and_positivity() {
        let a = analyze_curvature(CorrectionSign::Subtract).unwrap();
        assert!(a.cancellation_exact);
        assert!(a.matches_expected, "{a:?}");
        assert_eq!(a.sign_on_region.as_deref(), Some("positive"));
        assert!(a.leading_is_lowest);
        let b = analyze_curvature(CorrectionSign::Add).unwrap();
        assert!(b.cancellation_exact);
        assert!(b.matches_expected, "{b:?}");
        assert_eq!(b.sign_on_region.as_deref(), Some("negative"));
    }

    /// Closed form of the flat `n = 1` curvature, from `g(u)` with `u = |z|^2`:
    /// `R = -(g' + u g'') + u g'^2 / g`.
    fn closed_form_curvature(t: f64, tp: f64, gamma: f64, r: f64) -> f64 {
        let u = r * r;
        let g = gamma + t * t * u.powf(t - 1.0) - tp * tp * u.powf(tp - 1.0);
        let g1 = t * t * (t - 1.0) * u.powf(t - 2.0) - tp * tp * (tp - 1.0) * u.powf(tp - 2.0);
        let g2 = t * t * (t - 1.0) * (t - 2.0) * u.powf(t - 3.0)
            - tp * tp * (tp - 1.0) * (tp - 2.0) * u.powf(tp - 3.0);
        -(g1 + u * g2) + u * g1 * g1 / g
    }

    #[test]
    fn leading_term_dominates_numerically() {
        let (t, tp) = (0.75, 0.9);
        let e = sym_curvature_component_flat(CorrectionSign::Subtract, &int(0), 30, Region::Standard)
            .unwrap()
            .shift_radial(UNIT_VECTOR_SHIFT.scale(2));
        let b = BTreeMap::new();
        let lead = |r: f64| tp * tp * (tp - t) * (tp - t) * r.powf(2.0 * tp - 4.0 * t);
        // at |z| = 1e-2 the subleading powers still contribute about 57%
        let v = sym_eval_numeric(&e, t, tp, 1e-2, &b).unwrap();
        let exact = closed_form_curvature(t, tp, 0.0, 1e-2) * 1e-2f64.powf(4.0 - 4.0 * t);
        assert!(v > 0.0);
        assert!(((v - exact) / exact).abs() < 1e-9, "{v} vs {exact}");
        assert!((v / lead(1e-2) - 1.5667).abs() < 1e-3);
        // and the leading term takes over as |z| -> 0
        for (r, tol) in [(1e-4, 0.2), (1e-8, 0.01)] {
            let v = sym_eval_numeric(&e, t, tp, r, &b).unwrap();
            assert!(((v - lead(r)) / lead(r)).abs() < tol, "{r}: {v} vs {}", lead(r));
        }
    }

    #[test]
    fn flat_expansion_matches_symbolic_one() {
        let (t, tp, r) = (0.6, 0.8, 0.05);
        let full = sym_curvature_component(CorrectionSign::Subtract, 3, Region::Standard).unwrap();
        let flat = sym_curvature_component_flat(CorrectionSign::Subtract, &rat(1, 2), 3, Region::Standard).unwrap();
        let v1 = sym_eval_numeric(&full, t, tp, r, &flat_tag_values(&full, 0.5)).unwrap();
        let v2 = sym_eval_numeric(&flat, t, tp, r, &BTreeMap::new()).unwrap();
        assert!(((v1 - v2) / v2).abs() < 1e-12);
    }

    #[test]
    fn canonicalize_idempotent_on_generated() {
        for d in golden_documents().unwrap() {
            assert!(!d.1.is_empty());
        }
        let e = sym_curvature_1111(CorrectionSign::Subtract, 2, Region::Standard).unwrap();
        assert_eq!(e.canonicalize(), e);
        assert_eq!(e.canonicalize().canonicalize(), e.canonicalize());
    }
}
