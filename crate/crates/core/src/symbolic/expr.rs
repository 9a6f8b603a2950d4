//! Terms `c(t, t') |z|^p z^q zbar^r * tag` and their sums.
//!
//! `z` is the cone coordinate `z_1`. A tag is a product of formal
//! derivatives of `K = a^t`, `M = a^t'` or the base potential `P`, written
//! `K[1,2|1]` for `d_1 d_2 dbar_1 K`. Indices are 1-based.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::coeff::{rat, Poly, Rat};
use crate::error::{ConeError, Result};

/// Highest derivative order allowed on a single tag factor.
pub const MAX_TAG_ORDER: usize = 4;

/// Radial exponent `p0 + p1 t + p2 t'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Affine {
    pub p0: i64,
    pub p1: i64,
    pub p2: i64,
}

impl Affine {
    pub const ZERO: Affine = Affine { p0: 0, p1: 0, p2: 0 };

    pub const fn new(p0: i64, p1: i64, p2: i64) -> Self {
        Self { p0, p1, p2 }
    }

    pub fn eval(&self, t: f64, tp: f64) -> f64 {
        self.p0 as f64 + self.p1 as f64 * t + self.p2 as f64 * tp
    }

    pub fn as_poly(&self) -> Poly {
        Poly::affine(rat(self.p0, 1), rat(self.p1, 1), rat(self.p2, 1))
    }

    pub fn scale(&self, k: i64) -> Self {
        Self::new(self.p0 * k, self.p1 * k, self.p2 * k)
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(self, o: Affine) -> Affine {
        Affine::new(self.p0 + o.p0, self.p1 + o.p1, self.p2 + o.p2)
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, o: Affine) -> Affine {
        Affine::new(self.p0 - o.p0, self.p1 - o.p1, self.p2 - o.p2)
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scale(-1)
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}·t + {}·t'", self.p0, self.p1, self.p2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Base {
    K,
    M,
    P,
}

impl Base {
    fn name(self) -> &'static str {
        match self {
            Base::K => "K",
            Base::M => "M",
            Base::P => "P",
        }
    }
}

/// One formal derivative `d^holo dbar^anti base`, index lists sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Factor {
    pub base: Base,
    pub holo: Vec<u8>,
    pub anti: Vec<u8>,
}

impl Factor {
    pub fn bare(base: Base) -> Self {
        Self {
            base,
            holo: vec![],
            anti: vec![],
        }
    }

    pub fn new(base: Base, holo: &[u8], anti: &[u8]) -> Result<Self> {
        let mut f = Self::bare(base);
        for &h in holo {
            f = f.bump(h, false)?;
        }
        for &a in anti {
            f = f.bump(a, true)?;
        }
        Ok(f)
    }

    pub fn order(&self) -> usize {
        self.holo.len() + self.anti.len()
    }

    fn bump(&self, idx: u8, conj: bool) -> Result<Self> {
        let mut f = self.clone();
        let list = if conj { &mut f.anti } else { &mut f.holo };
        list.push(idx);
        list.sort_unstable();
        if f.order() > MAX_TAG_ORDER {
            return Err(ConeError::DerivativeOrder { order: f.order() });
        }
        Ok(f)
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.order() == 0 {
            return write!(f, "{}", self.base.name());
        }
        let join = |v: &[u8]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{}[{}|{}]", self.base.name(), join(&self.holo), join(&self.anti))
    }
}

/// Sorted product of factors; empty means `1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Tag(pub Vec<Factor>);

impl Tag {
    pub fn one() -> Self {
        Self(vec![])
    }

    pub fn single(f: Factor) -> Self {
        Self(vec![f])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    fn mul(&self, o: &Tag) -> Tag {
        let mut v: Vec<Factor> = self.0.iter().chain(o.0.iter()).cloned().collect();
        v.sort();
        Tag(v)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Everything but the coefficient; the sort key of a term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shape {
    pub p: Affine,
    pub q: u32,
    pub r: u32,
    pub tag: Tag,
}

impl Shape {
    pub fn new(p: Affine, q: u32, r: u32, tag: Tag) -> Self {
        let m = q.min(r);
        Self {
            p: p + Affine::new(2 * m as i64, 0, 0),
            q: q - m,
            r: r - m,
            tag,
        }
    }

    pub fn radial(p: Affine) -> Self {
        Self::new(p, 0, 0, Tag::one())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymTerm {
    pub coeff: Poly,
    pub shape: Shape,
}

impl SymTerm {
    pub fn new(coeff: Poly, p: Affine, q: u32, r: u32, tag: Tag) -> Self {
        Self {
            coeff,
            shape: Shape::new(p, q, r, tag),
        }
    }
}

impl fmt::Display for SymTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.shape;
        write!(
            f,
            "{} * |z|^({}) * z^{} * zbar^{} * {}",
            self.coeff, s.p, s.q, s.r, s.tag
        )
    }
}

/// Canonical sum of terms: merged by shape, zero terms dropped, sorted by
/// `(p0, p1, p2, q, r, tag)`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SymExpr {
    terms: BTreeMap<Shape, Poly>,
}

impl SymExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms<I: IntoIterator<Item = SymTerm>>(terms: I) -> Self {
        let mut e = Self::zero();
        for t in terms {
            e.add_term(t.coeff, t.shape);
        }
        e
    }

    pub fn term(coeff: Poly, p: Affine, q: u32, r: u32, tag: Tag) -> Self {
        Self::from_terms([SymTerm::new(coeff, p, q, r, tag)])
    }

    pub fn constant(c: Poly) -> Self {
        Self::term(c, Affine::ZERO, 0, 0, Tag::one())
    }

    pub fn add_term(&mut self, coeff: Poly, shape: Shape) {
        if coeff.is_zero() {
            return;
        }
        let shape = Shape::new(shape.p, shape.q, shape.r, shape.tag);
        let sum = match self.terms.get(&shape) {
            Some(c) => c + &coeff,
            None => coeff,
        };
        if sum.is_zero() {
            self.terms.remove(&shape);
        } else {
            self.terms.insert(shape, sum);
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> Vec<SymTerm> {
        self.terms
            .iter()
            .map(|(s, c)| SymTerm {
                coeff: c.clone(),
                shape: s.clone(),
            })
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Shape, &Poly)> {
        self.terms.iter()
    }

    /// Rebuild from scratch; the result equals `self` for any expression
    /// built through this API.
    pub fn canonicalize(&self) -> Self {
        Self::from_terms(self.terms())
    }

    /// Coefficient of `|z|^p z^q zbar^r * tag`.
    pub fn coefficient(&self, p: Affine, q: u32, r: u32, tag: &Tag) -> Poly {
        self.terms
            .get(&Shape::new(p, q, r, tag.clone()))
            .cloned()
            .unwrap_or_else(Poly::zero)
    }

    /// Coefficient of the tag-free pure power `|z|^p`.
    pub fn radial_coefficient(&self, p: Affine) -> Poly {
        self.coefficient(p, 0, 0, &Tag::one())
    }

    pub fn scale(&self, c: &Poly) -> Self {
        let mut out = Self::zero();
        for (s, k) in &self.terms {
            out.add_term(k * c, s.clone());
        }
        out
    }

    /// Multiply every term by `|z|^shift`.
    pub fn shift_radial(&self, shift: Affine) -> Self {
        let mut out = Self::zero();
        for (s, k) in &self.terms {
            out.add_term(k.clone(), Shape::new(s.p + shift, s.q, s.r, s.tag.clone()));
        }
        out
    }

    /// Keep the terms that satisfy `keep`.
    pub fn filter<F: Fn(&Shape, &Poly) -> bool>(&self, keep: F) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(s, c)| keep(s, c))
                .map(|(s, c)| (s.clone(), c.clone()))
                .collect(),
        }
    }

    /// Wirtinger derivative `d_idx` (or `dbar_idx` when `conj`), 1-based.
    pub fn derivative(&self, idx: u8, conj: bool) -> Result<Self> {
        if idx == 0 {
            return Err(ConeError::InvalidParams("indices are 1-based".into()));
        }
        let mut out = Self::zero();
        for (s, c) in &self.terms {
            // product rule on the tag factors
            for (k, f) in s.tag.0.iter().enumerate() {
                let mut factors = s.tag.0.clone();
                factors[k] = f.bump(idx, conj)?;
                factors.sort();
                out.add_term(c.clone(), Shape::new(s.p, s.q, s.r, Tag(factors)));
            }
            if idx != 1 {
                continue;
            }
            // d |z|^p = (p/2) |z|^{p-2} zbar,  dbar |z|^p = (p/2) |z|^{p-2} z
            let half_p = s.p.as_poly().scale(&rat(1, 2));
            let lowered = s.p - Affine::new(2, 0, 0);
            let (q, r) = (s.q, s.r);
            if conj {
                out.add_term(c * &half_p, Shape::new(lowered, q + 1, r, s.tag.clone()));
                if r > 0 {
                    out.add_term(c.scale(&rat(r as i64, 1)), Shape::new(s.p, q, r - 1, s.tag.clone()));
                }
            } else {
                out.add_term(c * &half_p, Shape::new(lowered, q, r + 1, s.tag.clone()));
                if q > 0 {
                    out.add_term(c.scale(&rat(q as i64, 1)), Shape::new(s.p, q - 1, r, s.tag.clone()));
                }
            }
        }
        Ok(out)
    }

    /// Apply a sequence of derivatives, holomorphic ones first.
    pub fn derivatives(&self, holo: &[u8], anti: &[u8]) -> Result<Self> {
        let mut e = self.clone();
        for &h in holo {
            e = e.derivative(h, false)?;
        }
        for &a in anti {
            e = e.derivative(a, true)?;
        }
        Ok(e)
    }

    /// Replace tag factors by exact rational values; factors missing from
    /// `values` are kept symbolic.
    pub fn substitute(&self, values: &BTreeMap<Factor, Rat>) -> Self {
        let mut out = Self::zero();
        for (s, c) in &self.terms {
            let mut k = c.clone();
            let mut rest = vec![];
            for f in &s.tag.0 {
                match values.get(f) {
                    Some(v) => k = k.scale(v),
                    None => rest.push(f.clone()),
                }
            }
            out.add_term(k, Shape::new(s.p, s.q, s.r, Tag(rest)));
        }
        out
    }

    /// Substitute `t' = t` in coefficients and exponents.
    pub fn on_diagonal(&self) -> Self {
        let mut out = Self::zero();
        for (s, c) in &self.terms {
            let p = Affine::new(s.p.p0, s.p.p1 + s.p.p2, 0);
            out.add_term(c.on_diagonal(), Shape::new(p, s.q, s.r, s.tag.clone()));
        }
        out
    }

    /// Canonical text form, one term per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in self.terms() {
            s.push_str(&t.to_string());
            s.push('\n');
        }
        if s.is_empty() {
            s.push_str("0\n");
        }
        s
    }

    /// Set of distinct radial exponents.
    pub fn exponents(&self) -> Vec<Affine> {
        let mut v: Vec<Affine> = self.terms.keys().map(|s| s.p).collect();
        v.dedup();
        v
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

impl Add for &SymExpr {
    type Output = SymExpr;
    fn add(self, rhs: &SymExpr) -> SymExpr {
        let mut out = self.clone();
        for (s, c) in &rhs.terms {
            out.add_term(c.clone(), s.clone());
        }
        out
    }
}

impl Sub for &SymExpr {
    type Output = SymExpr;
    fn sub(self, rhs: &SymExpr) -> SymExpr {
        let mut out = self.clone();
        for (s, c) in &rhs.terms {
            out.add_term(-c, s.clone());
        }
        out
    }
}

impl Neg for &SymExpr {
    type Output = SymExpr;
    fn neg(self) -> SymExpr {
        self.scale(&-&Poly::one())
    }
}

impl Mul for &SymExpr {
    type Output = SymExpr;
    fn mul(self, rhs: &SymExpr) -> SymExpr {
        let mut out = SymExpr::zero();
        for (s1, c1) in &self.terms {
            for (s2, c2) in &rhs.terms {
                out.add_term(
                    c1 * c2,
                    Shape::new(s1.p + s2.p, s1.q + s2.q, s1.r + s2.r, s1.tag.mul(&s2.tag)),
                );
            }
        }
        out
    }
}
