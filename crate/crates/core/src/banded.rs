//! Banded LU with partial pivoting for the Newton and Poisson systems.

use crate::error::{ConeError, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored by
/// columns with `kl` extra rows for pivoting fill-in.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + j * self.ldab
    }

    /// Add `v` to entry `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            i <= j + self.kl && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i > j + self.kl || j > i + self.ku {
            return 0.0;
        }
        self.ab[self.idx(i, j)]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (j, &xj) in x.iter().enumerate() {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.ab[self.idx(i, j)] * xj;
            }
        }
        y
    }

    /// In-place factorization.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        let scale = self.ab.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = 0.0;
            for k in 0..=km {
                let v = self.ab[self.idx(j + k, j)].abs();
                if v > best {
                    best = v;
                    jp = k;
                }
            }
            ipiv[j] = j + jp;
            if best <= scale * 1e-300 {
                return Err(ConeError::LinearSolve(format!("zero pivot in column {j}")));
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[self.idx(j, j)];
            for k in 1..=km {
                let t = self.idx(j + k, j);
                self.ab[t] /= piv;
            }
            for c in j + 1..=ju {
                let a = self.ab[self.idx(j, c)];
                if a == 0.0 {
                    continue;
                }
                for k in 1..=km {
                    let l = self.ab[self.idx(j + k, j)];
                    let t = self.idx(j + k, c);
                    self.ab[t] -= l * a;
                }
            }
        }
        debug_assert!(kv < self.ldab);
        Ok(BandLu { m: self, ipiv })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let kv = m.kl + m.ku;
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.ipiv[j]);
            let km = m.kl.min(n - 1 - j);
            let xj = x[j];
            if xj != 0.0 {
                for k in 1..=km {
                    x[j + k] -= m.ab[m.idx(j + k, j)] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= m.ab[m.idx(j, j)];
            let xj = x[j];
            for i in j.saturating_sub(kv)..j {
                x[i] -= m.ab[m.idx(i, j)] * xj;
            }
        }
        x
    }
}

/// Solve `A x = b` for a band matrix.
pub fn band_solve(a: BandMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let lu = a.factor()?;
    let x = lu.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ConeError::LinearSolve("non-finite solution".into()));
    }
    Ok(x)
}
