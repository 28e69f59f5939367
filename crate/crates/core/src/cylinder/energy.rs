use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::operator::t_derivs;
use super::MapState;
use crate::error::{Error, Result};
use crate::grid::Field;

struct SliceData {
    psi: Field,
    e: Field,
    llnw: Field,
}

impl SliceData {
    fn new(s: &MapState) -> Self {
        let psi = s.psi();
        let e = psi.map(|p| (4.0 * p).exp());
        Self { psi, e, llnw: s.renorm.l_ln_omega_field(&s.grid) }
    }
}

/// `∫ |∇Φ|² /2π` and `∫ e^{4u}|∇v|² /2π` on slice `i`, both in flux form.
/// The v-term uses the same half-cell conductances and pole ghosts as the
/// residual.
fn gradient_terms(s: &MapState, d: &SliceData, i: usize) -> (f64, f64) {
    let geo = s.grid.sphere();
    let n = geo.n;
    let dth = geo.dtheta;
    let phi = s.phi.row(i);
    let v = s.v.row(i);
    let e = d.e.row(i);
    let psi = d.psi.row(i);
    let mut gp = 0.0;
    for f in 1..n {
        gp += geo.s_face[f] * (phi[f] - phi[f - 1]).powi(2) / dth;
    }
    let e_north = (4.0 * (9.0 * psi[0] - psi[1]) / 8.0).exp();
    let e_south = (4.0 * (9.0 * psi[n - 1] - psi[n - 2]) / 8.0).exp();
    let mut gv = geo.kappa[0] * 0.5 * (e_north + e[0]) * (v[0] - s.traces.0).powi(2);
    for f in 1..n {
        gv += geo.kappa[f] * 0.5 * (e[f - 1] + e[f]) * (v[f] - v[f - 1]).powi(2);
    }
    gv += geo.kappa[n] * 0.5 * (e[n - 1] + e_south) * (s.traces.1 - v[n - 1]).powi(2);
    (gp, gv)
}

fn energy_with(s: &MapState, d: &SliceData, i: usize) -> f64 {
    let geo = s.grid.sphere();
    let (gp, gv) = gradient_terms(s, d, i);
    let src: f64 = (0..geo.n)
        .map(|j| geo.s[j] * geo.dtheta * 2.0 * d.llnw.get(i, j) * s.phi.get(i, j))
        .sum();
    PI * (gp + gv + src)
}

fn kinetic_with(s: &MapState, d: &SliceData, i: usize) -> f64 {
    let geo = s.grid.sphere();
    let h = s.grid.ht();
    let nt = s.grid.n_t;
    let mut k = 0.0;
    for j in 0..geo.n {
        let (pt, _) = t_derivs(|r| s.phi.get(r, j), i, nt, h);
        let (vt, _) = t_derivs(|r| s.v.get(r, j), i, nt, h);
        k += geo.s[j] * geo.dtheta * (pt * pt + d.e.get(i, j) * vt * vt / geo.s[j].powi(4));
    }
    PI * k
}

/// Sphere energy `ℰ = ½∫(|∇Φ|² + e^{4u}|∇v|² + 2(L ln ω)Φ)` on slice `i`.
pub fn sphere_energy(s: &MapState, i: usize) -> f64 {
    energy_with(s, &SliceData::new(s), i)
}

/// Kinetic term `K = ½∫(|∂_tΦ|² + e^{4u}|∂_t v|²)` on slice `i`.
pub fn kinetic_energy(s: &MapState, i: usize) -> f64 {
    kinetic_with(s, &SliceData::new(s), i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub kinetic: Vec<f64>,
    /// `d/dt(K − ℰ) − 2K`; the two end entries use one-sided differences.
    pub drift: Vec<f64>,
}

impl EnergyLedger {
    /// Largest drift over interior slices.
    pub fn interior_drift(&self) -> f64 {
        let n = self.drift.len();
        self.drift[1..n - 1].iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Per-slice energies and the monotonicity drift, for any renormalizer.
pub fn energy_ledger(s: &MapState) -> EnergyLedger {
    let d = SliceData::new(s);
    let nt = s.grid.n_t;
    let energy: Vec<f64> = (0..nt).map(|i| energy_with(s, &d, i)).collect();
    let kinetic: Vec<f64> = (0..nt).map(|i| kinetic_with(s, &d, i)).collect();
    let h = s.grid.ht();
    let drift = (0..nt)
        .map(|i| {
            let (dd, _) = t_derivs(|k| kinetic[k] - energy[k], i, nt, h);
            dd - 2.0 * kinetic[i]
        })
        .collect();
    EnergyLedger { t: s.grid.ts(), energy, kinetic, drift }
}

/// The monotonicity identity requires `ω` independent of `t`.
pub fn monotonicity_check(s: &MapState) -> Result<EnergyLedger> {
    if !s.renorm.is_translation_invariant() {
        return Err(Error::Hypothesis(format!(
            "monotonicity identity needs a t-independent renormalizer, got {}",
            s.renorm.name()
        )));
    }
    Ok(energy_ledger(s))
}

/// Defect of the truncated energy identity from the slice nearest `t` to
/// the last slice, `|ℰ(t) − ℰ(T) − ∫2K − K(t) + K(T)|`.
pub fn energy_identity_check(s: &MapState, t: f64) -> Result<f64> {
    if !s.renorm.is_translation_invariant() {
        return Err(Error::Hypothesis("energy identity needs a t-independent renormalizer".into()));
    }
    let led = energy_ledger(s);
    let i0 = s.grid.nearest_t(t);
    let last = s.grid.n_t - 1;
    let h = s.grid.ht();
    let mut integral = 0.0;
    for i in i0..last {
        integral += h * (led.kinetic[i] + led.kinetic[i + 1]);
    }
    Ok((led.energy[i0] - led.energy[last] - integral - led.kinetic[i0] + led.kinetic[last]).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalBound {
    pub lhs: f64,
    pub rhs: f64,
    pub lambda: f64,
    pub radius: f64,
}

impl LocalBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// The local energy bound on the window `[center − 2, center + 2]`, read as
/// the unit cylinder `(−2, 2) × S²`: `∫_{−R}^{R}∫ e_g ≤ 5000Λ²/(2 − R)²`
/// with `Λ = sup|Φ|` over the window. The bound assumes `L ln ω = 0`.
pub fn local_bound_check(s: &MapState, center: f64, radius: f64) -> Result<LocalBound> {
    if !(radius > 0.0 && radius < 2.0) {
        return Err(Error::InvalidParameter(format!("radius must lie in (0, 2), got {radius}")));
    }
    let grid = &s.grid;
    if center - 2.0 < grid.t_min - 1e-12 || center + 2.0 > grid.t_max + 1e-12 {
        return Err(Error::InvalidParameter("window [center-2, center+2] leaves the grid".into()));
    }
    let d = SliceData::new(s);
    if d.llnw.sup_norm() > 1e-6 {
        return Err(Error::Hypothesis("local bound assumes L ln omega = 0".into()));
    }
    let h = grid.ht();
    let lo = ((center - radius - grid.t_min) / h).ceil() as usize;
    let hi = ((center + radius - grid.t_min) / h).floor() as usize;
    let density = |i: usize| {
        let (gp, gv) = gradient_terms(s, &d, i);
        2.0 * PI * (gp + gv) + 2.0 * kinetic_with(s, &d, i)
    };
    let mut lhs = 0.0;
    for i in lo..hi {
        lhs += 0.5 * h * (density(i) + density(i + 1));
    }
    let wlo = grid.nearest_t(center - 2.0);
    let whi = grid.nearest_t(center + 2.0);
    let lambda = s.phi.sup_norm_rows(wlo..whi + 1);
    Ok(LocalBound { lhs, rhs: 5000.0 * lambda * lambda / (2.0 - radius).powi(2), lambda, radius })
}
