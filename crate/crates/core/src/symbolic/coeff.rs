//! Exact coefficients: Laurent polynomials in `t` (negative powers appear
//! through the inverse metric) times polynomials in `t'`, over the rationals.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// `sum c_{ij} t^i t'^j`, keyed by `(i, j)`; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Poly {
    terms: BTreeMap<(i32, i32), Rat>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn monomial(c: Rat, t_pow: i32, tp_pow: i32) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((t_pow, tp_pow), c);
        }
        Self { terms }
    }

    /// `t`
    pub fn t() -> Self {
        Self::monomial(Rat::one(), 1, 0)
    }

    /// `t'`
    pub fn tp() -> Self {
        Self::monomial(Rat::one(), 0, 1)
    }

    /// `c0 + c1 t + c2 t'`.
    pub fn affine(c0: Rat, c1: Rat, c2: Rat) -> Self {
        let mut p = Self::constant(c0);
        p.add_monomial(c1, 1, 0);
        p.add_monomial(c2, 0, 1);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(i32, i32), &Rat)> {
        self.terms.iter()
    }

    pub fn coeff(&self, t_pow: i32, tp_pow: i32) -> Rat {
        self.terms.get(&(t_pow, tp_pow)).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn add_monomial(&mut self, c: Rat, t_pow: i32, tp_pow: i32) {
        if c.is_zero() {
            return;
        }
        let key = (t_pow, tp_pow);
        let sum = self.terms.get(&key).cloned().unwrap_or_else(Rat::zero) + c;
        if sum.is_zero() {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, sum);
        }
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect(),
        }
    }

    /// Multiply by `t^a t'^b`.
    pub fn shift(&self, a: i32, b: i32) -> Self {
        Self {
            terms: self.terms.iter().map(|(&(i, j), v)| ((i + a, j + b), v.clone())).collect(),
        }
    }

    pub fn eval(&self, t: f64, tp: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| c.to_f64().unwrap_or(f64::NAN) * t.powi(i) * tp.powi(j))
            .sum()
    }

    pub fn eval_exact(&self, t: &Rat, tp: &Rat) -> Rat {
        let mut s = Rat::zero();
        for (&(i, j), c) in &self.terms {
            s += c * rpow(t, i) * rpow(tp, j);
        }
        s
    }

    /// Substitute `t' = t`.
    pub fn on_diagonal(&self) -> Self {
        let mut out = Self::zero();
        for (&(i, j), c) in &self.terms {
            out.add_monomial(c.clone(), i + j, 0);
        }
        out
    }

    /// Single term `c t^i t'^j`, if that is all there is.
    pub fn as_monomial(&self) -> Option<(Rat, i32, i32)> {
        if self.terms.len() == 1 {
            let (&(i, j), c) = self.terms.iter().next().unwrap();
            Some((c.clone(), i, j))
        } else {
            None
        }
    }

    /// Lowest powers of `t` and `t'` over all terms.
    pub fn min_powers(&self) -> (i32, i32) {
        let i = self.terms.keys().map(|k| k.0).min().unwrap_or(0);
        let j = self.terms.keys().map(|k| k.1).min().unwrap_or(0);
        (i, j)
    }
}

fn rpow(x: &Rat, n: i32) -> Rat {
    if n >= 0 {
        num_traits::pow(x.clone(), n as usize)
    } else {
        num_traits::pow(x.recip(), (-n) as usize)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (&(i, j), c) in &rhs.terms {
            out.add_monomial(c.clone(), i, j);
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (&(i, j), c) in &rhs.terms {
            out.add_monomial(-c.clone(), i, j);
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(&-Rat::one())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (&(i1, j1), c1) in &self.terms {
            for (&(i2, j2), c2) in &rhs.terms {
                out.add_monomial(c1 * c2, i1 + i2, j1 + j2);
            }
        }
        out
    }
}

pub fn fmt_rat(c: &Rat) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn fmt_var(name: &str, k: i32) -> Option<String> {
    match k {
        0 => None,
        1 => Some(name.to_string()),
        _ => Some(format!("{name}^{k}")),
    }
}

impl fmt::Display for Poly {
    /// Highest total degree first, e.g. `(t'^2 - 2*t*t' + t^2)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut keys: Vec<&(i32, i32)> = self.terms.keys().collect();
        keys.sort_by(|a, b| (b.0 + b.1).cmp(&(a.0 + a.1)).then(b.1.cmp(&a.1)));
        let mut s = String::new();
        for (n, k) in keys.into_iter().enumerate() {
            let c = &self.terms[k];
            let vars: Vec<String> = [fmt_var("t", k.0), fmt_var("t'", k.1)].into_iter().flatten().collect();
            let mag = c.abs();
            let body = if vars.is_empty() {
                fmt_rat(&mag)
            } else if mag.is_one() {
                vars.join("*")
            } else {
                format!("{}*{}", fmt_rat(&mag), vars.join("*"))
            };
            if n == 0 {
                if c.is_negative() {
                    s.push('-');
                }
            } else {
                s.push_str(if c.is_negative() { " - " } else { " + " });
            }
            s.push_str(&body);
        }
        write!(f, "({s})")
    }
}
