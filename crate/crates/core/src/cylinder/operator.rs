use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MapState, Renormalizer};
use crate::dual::Real;
use crate::error::Result;
use crate::grid::{CylinderGrid, Field, SphereGeometry};

/// First and second t-derivatives at row `i`: central inside, one-sided
/// second order at the ends (three-point second derivative when `n_t = 3`).
pub(crate) fn t_derivs(f: impl Fn(usize) -> f64, i: usize, nt: usize, h: f64) -> (f64, f64) {
    let h2 = h * h;
    if i > 0 && i + 1 < nt {
        return ((f(i + 1) - f(i - 1)) / (2.0 * h), (f(i + 1) - 2.0 * f(i) + f(i - 1)) / h2);
    }
    // k-th point inward from the boundary, and the orientation sign
    let (at, sign): (Box<dyn Fn(usize) -> f64>, f64) = if i == 0 {
        (Box::new(|k| f(k)), 1.0)
    } else {
        (Box::new(|k| f(nt - 1 - k)), -1.0)
    };
    let d1 = sign * (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
    let d2 = if nt >= 4 {
        (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2
    } else {
        (at(0) - 2.0 * at(1) + at(2)) / h2
    };
    (d1, d2)
}

/// `Δ_{S²}` in flux form at node `j`, zero flux through the poles.
pub(crate) fn sphere_laplacian(geo: &SphereGeometry, row: &[f64], j: usize) -> f64 {
    let mut flux = 0.0;
    if j + 1 < geo.n {
        flux += geo.s_face[j + 1] * (row[j + 1] - row[j]);
    }
    if j > 0 {
        flux -= geo.s_face[j] * (row[j] - row[j - 1]);
    }
    flux / (geo.s[j] * geo.dtheta * geo.dtheta)
}

/// `L f = ∂²_t f − ∂_t f + Δ_{S²} f` on the whole grid.
pub fn op_l(grid: &CylinderGrid, f: &Field) -> Field {
    let geo = grid.sphere();
    let h = grid.ht();
    let nt = grid.n_t;
    let mut out = Field::zeros(grid);
    for i in 0..nt {
        for j in 0..grid.n_theta {
            let (d1, d2) = t_derivs(|k| f.get(k, j), i, nt, h);
            out.set(i, j, d2 - d1 + sphere_laplacian(&geo, f.row(i), j));
        }
    }
    out
}

/// θ-direction pieces of the residual at one node.
pub(crate) struct ThetaTerms<T> {
    /// `Δ_{S²} Φ`
    pub lap: T,
    /// Fluxes `e^{4Ψ} v_θ / sin³θ` through the north and south faces.
    pub f_n: T,
    pub f_s: T,
    pub e_c: T,
}

/// Shared stencil data for residual evaluation and Jacobian assembly.
pub(crate) struct Stencil {
    pub geo: SphereGeometry,
    pub ht: f64,
    pub nt: usize,
    pub traces: (f64, f64),
    pub g: Field,
    pub llnw: Field,
}

impl Stencil {
    pub fn new(grid: &CylinderGrid, renorm: &Renormalizer, traces: (f64, f64)) -> Self {
        Self {
            geo: grid.sphere(),
            ht: grid.ht(),
            nt: grid.n_t,
            traces,
            g: renorm.g_field(grid),
            llnw: renorm.l_ln_omega_field(grid),
        }
    }

    /// `phi` and `v` hold `(centre, north neighbour, south neighbour)`; the
    /// neighbour slot is ignored on a pole row, where the ghost trace and the
    /// even extrapolation `Ψ_pole = (9Ψ₀ − Ψ₁)/8` take its place.
    pub fn theta_terms<T: Real>(&self, i: usize, j: usize, phi: [T; 3], v: [T; 3]) -> ThetaTerms<T> {
        let geo = &self.geo;
        let n = geo.n;
        let north = j == 0;
        let south = j + 1 == n;
        let dth = geo.dtheta;
        let psi_c = phi[0] - self.g.get(i, j);
        let e_c = (psi_c * 4.0).exp();

        let mut flux = T::cst(0.0);
        let (e_n, v_n) = if north {
            let psi_s = phi[2] - self.g.get(i, j + 1);
            ((((psi_c * 9.0 - psi_s) / 8.0) * 4.0).exp(), T::cst(self.traces.0))
        } else {
            flux = flux - (phi[0] - phi[1]) * geo.s_face[j];
            (((phi[1] - self.g.get(i, j - 1)) * 4.0).exp(), v[1])
        };
        let (e_s, v_s) = if south {
            let psi_n = phi[1] - self.g.get(i, j - 1);
            ((((psi_c * 9.0 - psi_n) / 8.0) * 4.0).exp(), T::cst(self.traces.1))
        } else {
            flux = flux + (phi[2] - phi[0]) * geo.s_face[j + 1];
            (((phi[2] - self.g.get(i, j + 1)) * 4.0).exp(), v[2])
        };
        let f_n = (e_n + e_c) * (0.5 * geo.kappa[j]) * (v[0] - v_n);
        let f_s = (e_c + e_s) * (0.5 * geo.kappa[j + 1]) * (v_s - v[0]);
        ThetaTerms { lap: flux / (geo.s[j] * dth * dth), f_n, f_s, e_c }
    }

    /// Residual pair at an interior row. Slots are ordered
    /// `(centre, north, south, west = i−1, east = i+1)`.
    pub fn node<T: Real>(&self, i: usize, j: usize, phi: [T; 5], v: [T; 5]) -> (T, T) {
        let h = self.ht;
        let s = self.geo.s[j];
        let th = self.theta_terms(i, j, [phi[0], phi[1], phi[2]], [v[0], v[1], v[2]]);
        let e_c = th.e_c;
        let e_w = ((phi[3] - self.g.get(i - 1, j)) * 4.0).exp();
        let e_e = ((phi[4] - self.g.get(i + 1, j)) * 4.0).exp();
        let dv_e = (v[4] - v[0]) / h;
        let dv_w = (v[0] - v[3]) / h;
        let g_e = (e_c + e_e) * 0.5 * dv_e;
        let g_w = (e_c + e_w) * 0.5 * dv_w;

        let s3 = s * s * s;
        let rv = ((g_e - g_w) / h + (th.f_s - th.f_n) * (s3 / self.geo.dtheta)) / e_c
            - (v[4] - v[3]) / (2.0 * h);
        let lap_t = (phi[4] - phi[0] * 2.0 + phi[3]) / (h * h) - (phi[4] - phi[3]) / (2.0 * h);
        let source = (g_e * dv_e + g_w * dv_w) / (s3 * s)
            + (th.f_s * th.f_s + th.f_n * th.f_n) * (s * s) / e_c;
        let rphi = lap_t + th.lap - source - self.llnw.get(i, j);
        (rphi, rv)
    }

    /// Residual pair on a boundary row, non-conservative one-sided form.
    fn boundary_node(&self, state: &MapState, e: &Field, i: usize, j: usize) -> (f64, f64) {
        let n = self.geo.n;
        let nb = |f: &Field, d: isize| -> f64 {
            let jj = j as isize + d;
            if jj < 0 || jj >= n as isize {
                0.0
            } else {
                f.get(i, jj as usize)
            }
        };
        let phi = [state.phi.get(i, j), nb(&state.phi, -1), nb(&state.phi, 1)];
        let v = [state.v.get(i, j), nb(&state.v, -1), nb(&state.v, 1)];
        let th = self.theta_terms(i, j, phi, v);
        let h = self.ht;
        let (p1, p2) = t_derivs(|k| state.phi.get(k, j), i, self.nt, h);
        let (v1, v2) = t_derivs(|k| state.v.get(k, j), i, self.nt, h);
        let (e1, _) = t_derivs(|k| e.get(k, j), i, self.nt, h);
        let s = self.geo.s[j];
        let e_c = th.e_c;
        let rphi = p2 - p1 + th.lap
            - 2.0 * (e_c / s.powi(4) * v1 * v1 + 0.5 * s * s / e_c * (th.f_s * th.f_s + th.f_n * th.f_n))
            - self.llnw.get(i, j);
        let rv = v2 + (e1 / e_c - 1.0) * v1 + s.powi(3) * (th.f_s - th.f_n) / (self.geo.dtheta * e_c);
        (rphi, rv)
    }

    pub fn interior_node_f64(&self, state: &MapState, i: usize, j: usize) -> (f64, f64) {
        let n = self.geo.n;
        let at = |f: &Field, ii: usize, jj: isize| -> f64 {
            if jj < 0 || jj >= n as isize {
                0.0
            } else {
                f.get(ii, jj as usize)
            }
        };
        let jj = j as isize;
        let phi = [
            state.phi.get(i, j),
            at(&state.phi, i, jj - 1),
            at(&state.phi, i, jj + 1),
            state.phi.get(i - 1, j),
            state.phi.get(i + 1, j),
        ];
        let v = [
            state.v.get(i, j),
            at(&state.v, i, jj - 1),
            at(&state.v, i, jj + 1),
            state.v.get(i - 1, j),
            state.v.get(i + 1, j),
        ];
        self.node(i, j, phi, v)
    }
}

/// `(R_Φ, R_v)` of the renormalized system at every node. Interior rows use
/// the conservative stencil of the solver; the two end rows use one-sided
/// second-order differences.
pub fn residual(state: &MapState) -> Result<(Field, Field)> {
    state.check_finite()?;
    let grid = &state.grid;
    let st = Stencil::new(grid, &state.renorm, state.traces);
    let psi = state.psi();
    let e = psi.map(|p| (4.0 * p).exp());
    let nt = grid.n_t;
    let n = grid.n_theta;
    let rows: Vec<Vec<(f64, f64)>> = (0..nt)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == 0 || i + 1 == nt {
                        st.boundary_node(state, &e, i, j)
                    } else {
                        st.interior_node_f64(state, i, j)
                    }
                })
                .collect()
        })
        .collect();
    let mut rphi = Field::zeros(grid);
    let mut rv = Field::zeros(grid);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, (a, b)) in row.into_iter().enumerate() {
            rphi.set(i, j, a);
            rv.set(i, j, b);
        }
    }
    Ok((rphi, rv))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub phi: f64,
    pub v: f64,
}

impl ResidualNorms {
    pub fn max(&self) -> f64 {
        self.phi.max(self.v)
    }
}

pub fn residual_norms(state: &MapState) -> Result<ResidualNorms> {
    let (rp, rv) = residual(state)?;
    Ok(ResidualNorms { phi: rp.sup_norm(), v: rv.sup_norm() })
}
