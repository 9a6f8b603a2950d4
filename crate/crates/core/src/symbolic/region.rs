//! Sign questions on parameter regions in the `(t, t')` plane, and
//! factorization of coefficients as `c * t^i t'^j * (u t + v t' + w)^2`.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::coeff::{Poly, Rat};
use super::expr::Affine;

/// Open parameter region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `0 < t < t' < 1`
    #[default]
    Standard,
    /// `0 < t' < t < 1`
    Reversed,
    /// `0 < t = t' < 1`
    Diagonal,
}

impl Region {
    /// Vertices `(t, t')` of the closure; the region is their open hull.
    pub fn vertices(self) -> &'static [(i64, i64)] {
        match self {
            Region::Standard => &[(0, 0), (0, 1), (1, 1)],
            Region::Reversed => &[(0, 0), (1, 0), (1, 1)],
            Region::Diagonal => &[(0, 0), (1, 1)],
        }
    }

    pub fn contains(self, t: f64, tp: f64) -> bool {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        unit(t)
            && unit(tp)
            && match self {
                Region::Standard => t < tp,
                Region::Reversed => tp < t,
                Region::Diagonal => t == tp,
            }
    }
}

/// Sign of an affine form on the open region, when it is constant there.
/// Returns `Some(Equal)` only if the form vanishes identically on the region.
pub fn affine_sign(d: Affine, region: Region) -> Option<Ordering> {
    let vals: Vec<i64> = region
        .vertices()
        .iter()
        .map(|&(t, tp)| d.p0 + d.p1 * t + d.p2 * tp)
        .collect();
    if vals.iter().all(|&v| v == 0) {
        Some(Ordering::Equal)
    } else if vals.iter().all(|&v| v >= 0) {
        Some(Ordering::Greater)
    } else if vals.iter().all(|&v| v <= 0) {
        Some(Ordering::Less)
    } else {
        None
    }
}

/// Compare two exponents on the whole region; `None` if the order changes.
pub fn compare_exponents(a: Affine, b: Affine, region: Region) -> Option<Ordering> {
    affine_sign(a - b, region)
}

/// `constant * t^t_pow * t'^tp_pow * (u t + v t' + w)^2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SquareFactorization {
    pub constant: Rat,
    pub t_pow: i32,
    pub tp_pow: i32,
    pub linear: [Rat; 3],
}

impl SquareFactorization {
    pub fn expand(&self) -> Poly {
        let [u, v, w] = &self.linear;
        let l = Poly::affine(w.clone(), u.clone(), v.clone());
        (&l * &l).shift(self.t_pow, self.tp_pow).scale(&self.constant)
    }

    /// Sign on the open region: the monomial is positive for `t, t' > 0`,
    /// the square is positive unless the linear form vanishes inside.
    pub fn sign_on(&self, region: Region) -> Option<Ordering> {
        let [u, v, w] = &self.linear;
        let vals: Vec<Rat> = region
            .vertices()
            .iter()
            .map(|&(t, tp)| u * Rat::from_integer(t.into()) + v * Rat::from_integer(tp.into()) + w)
            .collect();
        let nonneg = vals.iter().all(|x| !x.is_negative());
        let nonpos = vals.iter().all(|x| !x.is_positive());
        let all_zero = vals.iter().all(|x| x.is_zero());
        if all_zero || !(nonneg || nonpos) {
            return None;
        }
        Some(if self.constant.is_positive() {
            Ordering::Greater
        } else {
            Ordering::Less
        })
    }
}

fn rat_sqrt(x: &Rat) -> Option<Rat> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer().sqrt();
    let d = x.denom().sqrt();
    let r = Rat::new(n, d);
    (&r * &r == *x).then_some(r)
}

/// Try to write `p` as a monomial times a constant times a perfect square
/// of a linear form.
pub fn factor_monomial_square(p: &Poly) -> Option<SquareFactorization> {
    if p.is_zero() {
        return None;
    }
    let (i0, j0) = p.min_powers();
    let q = p.shift(-i0, -j0);
    if q.iter().any(|(&(i, j), _)| i < 0 || j < 0 || i + j > 2) {
        return None;
    }
    // normalize by the first nonzero square coefficient
    let constant = [q.coeff(2, 0), q.coeff(0, 2), q.coeff(0, 0)]
        .into_iter()
        .find(|c| !c.is_zero())?;
    let q = q.scale(&constant.recip());
    let (a, b, c) = (q.coeff(2, 0), q.coeff(0, 2), q.coeff(0, 0));
    let (ab, ac, bc) = (q.coeff(1, 1), q.coeff(1, 0), q.coeff(0, 1));
    let two = Rat::from_integer(BigInt::from(2));
    let linear = if !a.is_zero() {
        let u = rat_sqrt(&a)?;
        [u.clone(), &ab / (&two * &u), &ac / (&two * &u)]
    } else if !b.is_zero() {
        let v = rat_sqrt(&b)?;
        [Rat::zero(), v.clone(), &bc / (&two * &v)]
    } else {
        let w = rat_sqrt(&c)?;
        [Rat::zero(), Rat::zero(), w]
    };
    let f = SquareFactorization {
        constant,
        t_pow: i0,
        tp_pow: j0,
        linear,
    };
    (f.expand() == *p).then_some(f)
}

/// Sign of a coefficient on the region, when it can be decided from a
/// monomial or a monomial times a square.
pub fn poly_sign(p: &Poly, region: Region) -> Option<Ordering> {
    if p.is_zero() {
        return Some(Ordering::Equal);
    }
    if let Some((c, _, _)) = p.as_monomial() {
        return Some(if c.is_positive() {
            Ordering::Greater
        } else {
            Ordering::Less
        });
    }
    factor_monomial_square(p)?.sign_on(region)
}
