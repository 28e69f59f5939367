use super::Renormalizer;
use crate::banded::BandMatrix;
use crate::error::Result;
use crate::grid::{CylinderGrid, Field};

/// Solves `Lξ = L ln ω` with `ξ = 0` on both end spheres, using the same
/// discrete `L` as the residual. Subtracting `ξ` from `Φ` leaves a system
/// with homogeneous right side.
pub fn homogenize_renormalizer(renorm: &Renormalizer, grid: &CylinderGrid) -> Result<Field> {
    let nt = grid.n_t;
    let n = grid.n_theta;
    let geo = grid.sphere();
    let h = grid.ht();
    let rhs_field = renorm.l_ln_omega_field(grid);
    let m = (nt - 2) * n;
    let mut a = BandMatrix::zeros(m, n, n);
    let mut rhs = vec![0.0; m];
    let cw = 1.0 / (h * h) + 0.5 / h;
    let ce = 1.0 / (h * h) - 0.5 / h;
    for i in 1..nt - 1 {
        for j in 0..n {
            let row = (i - 1) * n + j;
            let w = geo.s[j] * geo.dtheta * geo.dtheta;
            let mut diag = -2.0 / (h * h);
            if j > 0 {
                a.add(row, row - 1, geo.s_face[j] / w);
                diag -= geo.s_face[j] / w;
            }
            if j + 1 < n {
                a.add(row, row + 1, geo.s_face[j + 1] / w);
                diag -= geo.s_face[j + 1] / w;
            }
            a.add(row, row, diag);
            // ξ vanishes on rows 0 and nt − 1
            if i > 1 {
                a.add(row, row - n, cw);
            }
            if i + 2 < nt {
                a.add(row, row + n, ce);
            }
            rhs[row] = rhs_field.get(i, j);
        }
    }
    let x = a.factor()?.solve(&rhs);
    let mut xi = Field::zeros(grid);
    for i in 1..nt - 1 {
        xi.row_mut(i).copy_from_slice(&x[(i - 1) * n..i * n]);
    }
    Ok(xi)
}
