//! Finite-difference stencils on the rotation-reduced model grids.
//!
//! Functions are invariant under rotation of `z_1` (and under translation in
//! `Im z_2` when `n = 2`), so a grid value at `(rho, x)` stands for the whole
//! orbit. At angle zero the complex Hessian is
//! `u_{1 1} = (u_rr + u_r / r) / 4`, `u_{2 2} = u_xx / 4`, `u_{1 2} = u_rx / 4`.
//! The full-angle `n = 1` grid adds `u_tt / (4 r^2)` to `u_{1 1}`.

use num_complex::Complex64;

use crate::error::{ConeError, Result};
use crate::model_geometry::{CMatrix, DomainSpec, RadialSpacing, Transverse};

/// Treatment of the innermost radial row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inner {
    /// `rho_min = 0`: ghost node across the axis.
    Axis,
    /// Zero radial derivative at `rho_min` (even reflection).
    Neumann,
    /// Second-order one-sided differences.
    OneSided,
}

/// Sparse rows of the three Hessian entries at one node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Stencil {
    pub d11: Vec<(usize, f64)>,
    pub d22: Vec<(usize, f64)>,
    pub d12: Vec<(usize, f64)>,
}

impl Stencil {
    fn apply(row: &[(usize, f64)], u: &[f64]) -> f64 {
        row.iter().map(|&(k, w)| w * u[k]).sum()
    }

    /// `[[u11, u12], [u12, u22]]` restricted to `dim`.
    pub fn hessian(&self, u: &[f64], dim: usize) -> CMatrix {
        let mut m = CMatrix::zeros(dim, dim);
        m[(0, 0)] = Complex64::new(Self::apply(&self.d11, u), 0.0);
        if dim > 1 {
            let h12 = Complex64::new(Self::apply(&self.d12, u), 0.0);
            m[(0, 1)] = h12;
            m[(1, 0)] = h12;
            m[(1, 1)] = Complex64::new(Self::apply(&self.d22, u), 0.0);
        }
        m
    }
}

/// Uniform cell-centred grid with its stencils.
#[derive(Clone, Debug)]
pub struct Grid {
    pub domain: DomainSpec,
    pub kind: Transverse,
    pub nr: usize,
    pub nt: usize,
    pub rho: Vec<f64>,
    pub h: f64,
    pub k: f64,
}

impl Grid {
    pub fn new(domain: &DomainSpec) -> Result<Self> {
        domain.validate()?;
        if domain.radial_spacing != RadialSpacing::Uniform {
            return Err(ConeError::InvalidDomain("finite differences need uniform radial spacing".into()));
        }
        let kind = domain.transverse();
        let ok = match kind {
            Transverse::None | Transverse::Angle => domain.dim == 1,
            Transverse::Smooth => domain.dim == 2 && domain.cone_angles.len() == 1,
        };
        if !ok {
            return Err(ConeError::InvalidDomain(
                "grids support n = 1, or n = 2 with one cone and one smooth direction".into(),
            ));
        }
        Ok(Self {
            domain: domain.clone(),
            kind,
            nr: domain.radial_points,
            nt: domain.transverse_len(),
            rho: domain.radial_nodes(),
            h: domain.radial_step(),
            k: domain.transverse_step(),
        })
    }

    pub fn len(&self) -> usize {
        self.nr * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nt + j
    }

    /// Natural inner treatment for arbitrary smooth fields.
    pub fn default_inner(&self) -> Inner {
        if self.domain.rho_min == 0.0 {
            Inner::Axis
        } else {
            Inner::OneSided
        }
    }

    /// Inner treatment for the unknown of a Dirichlet problem.
    pub fn solver_inner(&self) -> Inner {
        if self.domain.rho_min == 0.0 {
            Inner::Axis
        } else {
            Inner::Neumann
        }
    }

    /// Radial first and second derivative rows as `(row, weight)`; row `-1`
    /// is a ghost.
    fn radial_rows(&self, i: usize, inner: Inner) -> (Vec<(isize, f64)>, Vec<(isize, f64)>) {
        let h = self.h;
        let ii = i as isize;
        let last = self.nr - 1;
        if i == last {
            return (
                vec![(ii, 1.5 / h), (ii - 1, -2.0 / h), (ii - 2, 0.5 / h)],
                vec![(ii, 2.0 / (h * h)), (ii - 1, -5.0 / (h * h)), (ii - 2, 4.0 / (h * h)), (ii - 3, -1.0 / (h * h))],
            );
        }
        if i == 0 && inner == Inner::OneSided {
            return (
                vec![(0, -1.5 / h), (1, 2.0 / h), (2, -0.5 / h)],
                vec![(0, 2.0 / (h * h)), (1, -5.0 / (h * h)), (2, 4.0 / (h * h)), (3, -1.0 / (h * h))],
            );
        }
        (
            vec![(ii - 1, -0.5 / h), (ii + 1, 0.5 / h)],
            vec![(ii - 1, 1.0 / (h * h)), (ii, -2.0 / (h * h)), (ii + 1, 1.0 / (h * h))],
        )
    }

    fn resolve(&self, i: isize, j: usize, inner: Inner) -> usize {
        if i >= 0 {
            return self.index(i as usize, j);
        }
        debug_assert_eq!(i, -1);
        match (inner, self.kind) {
            (Inner::Axis, Transverse::Angle) => self.index(0, (j + self.nt / 2) % self.nt),
            _ => self.index(0, j),
        }
    }

    /// Hessian stencil at node `(i, j)`.
    pub fn stencil(&self, i: usize, j: usize, inner: Inner) -> Stencil {
        let (r1, r2) = self.radial_rows(i, inner);
        let r = self.rho[i];
        let nt = self.nt;
        let mut st = Stencil::default();
        let push = |row: &mut Vec<(usize, f64)>, k: usize, w: f64| {
            if let Some(e) = row.iter_mut().find(|e| e.0 == k) {
                e.1 += w;
            } else {
                row.push((k, w));
            }
        };
        for &(ri, w) in &r2 {
            push(&mut st.d11, self.resolve(ri, j, inner), 0.25 * w);
        }
        for &(ri, w) in &r1 {
            push(&mut st.d11, self.resolve(ri, j, inner), 0.25 * w / r);
        }
        let jm = (j + nt - 1) % nt;
        let jp = (j + 1) % nt;
        let k2 = self.k * self.k;
        match self.kind {
            Transverse::None => {}
            Transverse::Angle => {
                let s = 0.25 / (r * r * k2);
                push(&mut st.d11, self.index(i, jm), s);
                push(&mut st.d11, self.index(i, j), -2.0 * s);
                push(&mut st.d11, self.index(i, jp), s);
            }
            Transverse::Smooth => {
                push(&mut st.d22, self.index(i, jm), 0.25 / k2);
                push(&mut st.d22, self.index(i, j), -0.5 / k2);
                push(&mut st.d22, self.index(i, jp), 0.25 / k2);
                for &(ri, w) in &r1 {
                    let c = 0.25 * w * 0.5 / self.k;
                    push(&mut st.d12, self.resolve(ri, jp, inner), c);
                    push(&mut st.d12, self.resolve(ri, jm, inner), -c);
                }
            }
        }
        st.d11.retain(|e| e.1 != 0.0);
        st.d22.retain(|e| e.1 != 0.0);
        st.d12.retain(|e| e.1 != 0.0);
        st
    }

    /// Hessian of a grid field at every node.
    pub fn hessian_field(&self, u: &[f64], inner: Inner) -> Vec<CMatrix> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nr {
            for j in 0..self.nt {
                out.push(self.stencil(i, j, inner).hessian(u, self.dim()));
            }
        }
        out
    }

    /// Quadrature weight of each node for `int u dV_euclid` over the orbit
    /// space: `rho * drho * dt`, half weight on the outer row.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let tw = match self.kind {
            Transverse::Angle => self.k,
            Transverse::Smooth => 2.0 * std::f64::consts::PI * self.k,
            Transverse::None => 2.0 * std::f64::consts::PI,
        };
        let mut w = Vec::with_capacity(self.len());
        for i in 0..self.nr {
            let half = if i + 1 == self.nr { 0.5 } else { 1.0 };
            for _ in 0..self.nt {
                w.push(self.rho[i] * self.h * half * tw);
            }
        }
        w
    }

    /// Evaluate a closed-form function on every node.
    pub fn sample<F: Fn(&[Complex64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.domain.points().iter().map(|p| f(p)).collect()
    }

    pub fn is_boundary_row(&self, i: usize) -> bool {
        i == 0 || i + 1 == self.nr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(p: &[Complex64]) -> f64 {
        // |z1|^4 + |z1|^2 x + x^2 with x = Re z2 -- not periodic, tested away from the wrap
        let u = p[0].norm_sqr();
        let x = if p.len() > 1 { p[1].re } else { 0.0 };
        u * u + u * x + x * x
    }

    #[test]
    fn radial_hessian_is_exact_on_quadratics_in_u() {
        // u = |z|^2 and |z|^4: ddbar = 1 and 4|z|^2; second differences exact on quadratics in rho
        let d = DomainSpec::model(1, 0.5, 0.0, 1.0, 16);
        let g = Grid::new(&d).unwrap();
        let u2 = g.sample(|p| p[0].norm_sqr());
        for inner in [Inner::Axis, Inner::OneSided] {
            let h = g.hessian_field(&u2, inner);
            for m in &h {
                assert!((m[(0, 0)].re - 1.0).abs() < 1e-10);
            }
        }
        let d = DomainSpec::model(1, 0.5, 0.2, 1.0, 16);
        let g = Grid::new(&d).unwrap();
        let u4 = g.sample(|p| p[0].norm_sqr().powi(2));
        let h = g.hessian_field(&u4, Inner::OneSided);
        for (m, r) in h.iter().zip(g.rho.iter()) {
            // rho^4: (12 r^2 + 4 r^2) / 4 = 4 r^2, second derivative exact up to the h^2 rho^4 term
            assert!((m[(0, 0)].re - 4.0 * r * r).abs() < 10.0 * g.h * g.h, "{r}");
        }
    }

    #[test]
    fn mixed_and_smooth_entries() {
        let d = DomainSpec::model(2, 0.5, 0.2, 1.0, 24).with_smooth(10.0, 40);
        let g = Grid::new(&d).unwrap();
        let u = g.sample(poly);
        let hs = g.hessian_field(&u, Inner::OneSided);
        for i in 1..g.nr - 1 {
            for j in 2..g.nt - 2 {
                let m = &hs[g.index(i, j)];
                let r = g.rho[i];
                let x = j as f64 * g.k;
                // u11 = (16 r^2 + 4 x)/4 ... from r^4 + r^2 x: (12r^2+2x + 4r^2+2x)/4
                assert!((m[(0, 0)].re - (4.0 * r * r + x)).abs() < 1e-8 + 4.0 * g.h * g.h);
                assert!((m[(1, 1)].re - 0.5).abs() < 1e-9);
                // u_rx = 2r, /4
                assert!((m[(0, 1)].re - 0.5 * r).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn angle_grid_axis_ghost() {
        // Re(z)^2 = r^2 cos^2 t: ddbar = 1/2
        let d = DomainSpec::model(1, 0.5, 0.0, 1.0, 32).with_angles(64);
        let g = Grid::new(&d).unwrap();
        let u = g.sample(|p| p[0].re * p[0].re);
        let hs = g.hessian_field(&u, Inner::Axis);
        let worst = hs.iter().map(|m| (m[(0, 0)].re - 0.5).abs()).fold(0.0, f64::max);
        assert!(worst < 2e-2, "{worst}");
    }

    #[test]
    fn quadrature_integrates_disc_area() {
        let d = DomainSpec::model(1, 0.5, 0.0, 1.0, 200);
        let g = Grid::new(&d).unwrap();
        let a: f64 = g.quadrature_weights().iter().sum();
        assert!((a - std::f64::consts::PI).abs() < 1e-2);
    }

    #[test]
    fn rejects_log_spacing() {
        let d = DomainSpec::model(1, 0.5, 0.1, 1.0, 16).with_spacing(RadialSpacing::Log);
        assert!(Grid::new(&d).is_err());
    }
}
