//! Truncated Wirtinger jets.
//!
//! A [`Jet`] stores the Taylor coefficients of a function of
//! `(z_1..z_n, zbar_1..zbar_n)` about a base point, keeping every monomial
//! `z^I zbar^J` with `|I| <= 2` and `|J| <= 2`. That is exactly the
//! information needed for a metric `g = ddbar Phi`, its first derivatives and
//! the mixed second derivatives entering the curvature tensor.
//!
//! Arithmetic is exact up to floating point rounding; nothing here uses
//! finite differences.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

/// Index tables shared by all jets over the same dimension.
#[derive(Debug)]
pub struct JetSpace {
    n: usize,
    /// Holomorphic monomials of degree <= 2, as sorted index lists.
    monomials: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
    /// `(i, j, k)` with `monomials[i] * monomials[j] = monomials[k]`.
    products: Vec<(usize, usize, usize)>,
    /// `I!` for each monomial.
    factorials: Vec<f64>,
}

impl JetSpace {
    pub fn new(n: usize) -> Arc<Self> {
        assert!(n >= 1, "jet space needs at least one complex dimension");
        let mut monomials = vec![vec![]];
        for i in 0..n {
            monomials.push(vec![i]);
        }
        for i in 0..n {
            for j in i..n {
                monomials.push(vec![i, j]);
            }
        }
        let lookup: HashMap<Vec<usize>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(k, m)| (m.clone(), k))
            .collect();
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if a.len() + b.len() > 2 {
                    continue;
                }
                let mut m: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
                m.sort_unstable();
                products.push((i, j, lookup[&m]));
            }
        }
        let factorials = monomials
            .iter()
            .map(|m| if m.len() == 2 && m[0] == m[1] { 2.0 } else { 1.0 })
            .collect();
        Arc::new(Self {
            n,
            monomials,
            lookup,
            products,
            factorials,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn size(&self) -> usize {
        self.monomials.len()
    }

    fn index(&self, holo: &[usize]) -> Option<usize> {
        let mut m = holo.to_vec();
        m.sort_unstable();
        self.lookup.get(&m).copied()
    }
}

/// A truncated bi-degree (2, 2) Taylor expansion.
#[derive(Clone, Debug)]
pub struct Jet {
    space: Arc<JetSpace>,
    /// Row-major `[holo][anti]` coefficient table.
    coeffs: Vec<Complex64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: Complex64) -> Self {
        let m = space.size();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m * m];
        coeffs[0] = value;
        Self {
            space: Arc::clone(space),
            coeffs,
        }
    }

    pub fn real(space: &Arc<JetSpace>, value: f64) -> Self {
        Self::constant(space, Complex64::new(value, 0.0))
    }

    /// The coordinate function `z_k` expanded about `z_k = value`.
    pub fn z(space: &Arc<JetSpace>, k: usize, value: Complex64) -> Self {
        let mut j = Self::constant(space, value);
        let m = space.size();
        j.coeffs[(1 + k) * m] = Complex64::new(1.0, 0.0);
        j
    }

    /// The conjugate coordinate `zbar_k` expanded about `conj(value)`.
    pub fn zbar(space: &Arc<JetSpace>, k: usize, value: Complex64) -> Self {
        let mut j = Self::constant(space, value.conj());
        j.coeffs[1 + k] = Complex64::new(1.0, 0.0);
        j
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Mixed Wirtinger derivative `d^holo dbar^anti` at the base point.
    ///
    /// Returns `None` when either index list has more than two entries.
    pub fn deriv(&self, holo: &[usize], anti: &[usize]) -> Option<Complex64> {
        let h = self.space.index(holo)?;
        let a = self.space.index(anti)?;
        let m = self.space.size();
        Some(self.coeffs[h * m + a] * self.space.factorials[h] * self.space.factorials[a])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            space: Arc::clone(&self.space),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn add_const(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// Compose with a univariate function given its derivatives
    /// `f(x0), f'(x0), ..., f''''(x0)` at the constant term `x0`.
    pub fn compose(&self, derivs: [Complex64; 5]) -> Self {
        let mut dx = self.clone();
        dx.coeffs[0] = Complex64::new(0.0, 0.0);
        let mut out = Self::constant(&self.space, derivs[0]);
        let mut power = Self::real(&self.space, 1.0);
        let mut factorial = 1.0;
        for (k, d) in derivs.iter().enumerate().skip(1) {
            power = &power * &dx;
            factorial *= k as f64;
            out = &out + &power.scale(d / factorial);
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose([e; 5])
    }

    /// `self^p` for a jet whose constant term is real and positive.
    pub fn powf(&self, p: f64) -> Self {
        let x0 = self.value().re;
        let mut d = [Complex64::new(0.0, 0.0); 5];
        let mut coef = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = Complex64::new(coef * x0.powf(p - k as f64), 0.0);
            coef *= p - k as f64;
        }
        self.compose(d)
    }

    pub fn cos(&self) -> Self {
        let x = self.value();
        let (s, c) = (x.sin(), x.cos());
        self.compose([c, -s, -c, s, c])
    }

    pub fn ln(&self) -> Self {
        let x = self.value();
        let one = Complex64::new(1.0, 0.0);
        self.compose([
            x.ln(),
            one / x,
            -one / (x * x),
            2.0 * one / (x * x * x),
            -6.0 * one / (x * x * x * x),
        ])
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet {
            space: Arc::clone(&self.space),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet {
            space: Arc::clone(&self.space),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale_real(-1.0)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let space = &self.space;
        let m = space.size();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m * m];
        for &(h1, h2, h) in &space.products {
            for &(a1, a2, a) in &space.products {
                let x = self.coeffs[h1 * m + a1];
                if x.re == 0.0 && x.im == 0.0 {
                    continue;
                }
                coeffs[h * m + a] += x * rhs.coeffs[h2 * m + a2];
            }
        }
        Jet {
            space: Arc::clone(space),
            coeffs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn modulus_squared_derivatives() {
        let sp = JetSpace::new(2);
        let p = c(0.3, -0.2);
        let r2 = &Jet::z(&sp, 0, p) * &Jet::zbar(&sp, 0, p);
        assert!((r2.value() - p.norm_sqr()).norm() < 1e-15);
        assert!((r2.deriv(&[0], &[]).unwrap() - p.conj()).norm() < 1e-15);
        assert!((r2.deriv(&[0], &[0]).unwrap() - 1.0).norm() < 1e-15);
        assert!(r2.deriv(&[0, 0], &[0]).unwrap().norm() < 1e-15);
        assert!(r2.deriv(&[1], &[1]).unwrap().norm() < 1e-15);
    }

    #[test]
    fn power_matches_closed_form() {
        // ddbar |z|^{2t} = t^2 |z|^{2t-2}; d ddbar = t^2 (t-1) |z|^{2t-4} zbar
        let sp = JetSpace::new(1);
        let t = 0.7;
        let p = c(0.4, 0.25);
        let r = p.norm();
        let u = &Jet::z(&sp, 0, p) * &Jet::zbar(&sp, 0, p);
        let phi = u.powf(t);
        let g = phi.deriv(&[0], &[0]).unwrap();
        assert!((g.re - t * t * r.powf(2.0 * t - 2.0)).abs() < 1e-13);
        let g1 = phi.deriv(&[0, 0], &[0]).unwrap();
        let want = p.conj() * t * t * (t - 1.0) * r.powf(2.0 * t - 4.0);
        assert!((g1 - want).norm() < 1e-12);
        let g11 = phi.deriv(&[0, 0], &[0, 0]).unwrap();
        let want = t * t * (t - 1.0) * (t - 1.0) * r.powf(2.0 * t - 4.0);
        assert!((g11.re - want).abs() < 1e-11 * want.abs());
    }

    #[test]
    fn exp_log_roundtrip() {
        let sp = JetSpace::new(2);
        let p = [c(0.1, 0.2), c(-0.3, 0.05)];
        let x = &(&Jet::z(&sp, 0, p[0]) * &Jet::zbar(&sp, 1, p[1])) + &Jet::real(&sp, 1.5);
        let back = x.exp().ln();
        for h in [vec![], vec![0], vec![1], vec![0, 1]] {
            for a in [vec![], vec![0], vec![1], vec![1, 1]] {
                let d = back.deriv(&h, &a).unwrap() - x.deriv(&h, &a).unwrap();
                assert!(d.norm() < 1e-12, "{h:?} {a:?}");
            }
        }
    }

    #[test]
    fn too_many_indices() {
        let sp = JetSpace::new(1);
        let j = Jet::real(&sp, 1.0);
        assert!(j.deriv(&[0, 0, 0], &[]).is_none());
    }
}
