//! Spacetime metric data from a harmonic map state: the twist potential
//! `w` and conformal factor `α` by line integration of their quadrature
//! 1-forms, angle defects of the two axis rods at the puncture, and the
//! near-horizon limit.
//!
//! In polar coordinates `(r, θ)` with `t = −ln r`, `Ψ = u + ln sin θ` and
//! `E = e^{4Ψ}`, the quadrature equations read
//!
//! ```text
//! ∂_t w = 2e^{−t} E ∂_θv / sin³θ,      ∂_θ w = −2e^{−t} E ∂_t v / sin³θ,
//! ∂_t α = −s² + 2s²Ψ_t − s²(Ψ_t² − Ψ_θ²) − 2scΨ_θ + 2scΨ_tΨ_θ
//!         − (E/s³)(s(v_t² − v_θ²) − 2c v_t v_θ),
//! ∂_θ α = 2s²Ψ_θ − sc + sc(Ψ_θ² − Ψ_t²) − 2s²Ψ_tΨ_θ + 2scΨ_t
//!         + (E/s³)(c(v_θ² − v_t²) − 2s v_t v_θ),
//! ```
//!
//! with `s = sin θ`, `c = cos θ`. Every term is regular at the poles.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{fit_tangent, least_squares};
use crate::closed_forms::{nhg_metric, NhgComponents, TangentParams};
use crate::cylinder::{t_derivs, MapState};
use crate::error::{Error, Result};
use crate::grid::{CylinderGrid, Field};

/// A potential recovered from its gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub values: Field,
    /// Discrete `∂_t F_θ − ∂_θ F_t` of the 1-form at each node.
    pub curl: Field,
    /// Sup difference between the two L-shaped integration orders.
    pub path_defect: f64,
}

/// Integration constant for `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaGauge {
    /// The north rod carries no conical singularity.
    NorthRod,
    /// `e^{2α₀} = 1/4` for the tangent parameter `b`, i.e. the north rod
    /// value is `ln(1 + b)`.
    NearHorizon { b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFields {
    pub grid: CylinderGrid,
    /// `U = u + ln ρ = Ψ − t`.
    pub u: Field,
    pub w: Field,
    pub alpha: Field,
    pub w_curl: Field,
    pub alpha_curl: Field,
    pub w_path_defect: f64,
    pub alpha_path_defect: f64,
    /// Node `(i, j)` at which `w` takes the value `w_ref`.
    pub reference: (usize, usize),
    pub w_ref: f64,
    pub alpha_gauge: AlphaGauge,
}

/// Derivatives of `Ψ` and `v` at every node. `Ψ` is even across the poles,
/// so its ghost beyond the first ring is the ring itself. For `v` the
/// weighted slope `q = ∂_θv / sin³θ` is taken from face fluxes with the
/// exact conductances `1/∫sin³` and the pole traces, then averaged to nodes.
struct Derivs {
    psi: Field,
    e: Field,
    psi_t: Field,
    psi_th: Field,
    v_t: Field,
    v_q: Field,
}

fn theta_derivative(row: &[f64], j: usize, dth: f64) -> f64 {
    let n = row.len();
    let lo = if j == 0 { row[0] } else { row[j - 1] };
    let hi = if j + 1 == n { row[n - 1] } else { row[j + 1] };
    (hi - lo) / (2.0 * dth)
}

fn t_field(grid: &CylinderGrid, f: &Field) -> Field {
    let h = grid.ht();
    let mut out = Field::zeros(grid);
    for i in 0..grid.n_t {
        for j in 0..grid.n_theta {
            out.set(i, j, t_derivs(|r| f.get(r, j), i, grid.n_t, h).0);
        }
    }
    out
}

fn theta_field(grid: &CylinderGrid, f: &Field) -> Field {
    let mut out = Field::zeros(grid);
    let dth = grid.dtheta();
    for i in 0..grid.n_t {
        let row = f.row(i);
        for j in 0..grid.n_theta {
            out.set(i, j, theta_derivative(row, j, dth));
        }
    }
    out
}

fn weighted_slope(s: &MapState) -> Field {
    let g = &s.grid;
    let geo = g.sphere();
    let n = geo.n;
    let mut out = Field::zeros(g);
    let mut face = vec![0.0; n + 1];
    for i in 0..g.n_t {
        let v = s.v.row(i);
        face[0] = geo.kappa[0] * (v[0] - s.traces.0);
        for f in 1..n {
            face[f] = geo.kappa[f] * (v[f] - v[f - 1]);
        }
        face[n] = geo.kappa[n] * (s.traces.1 - v[n - 1]);
        for (j, x) in out.row_mut(i).iter_mut().enumerate() {
            *x = 0.5 * (face[j] + face[j + 1]);
        }
    }
    out
}

impl Derivs {
    fn new(s: &MapState) -> Self {
        let g = &s.grid;
        let psi = s.psi();
        let e = psi.map(|p| (4.0 * p).exp());
        Self {
            psi_t: t_field(g, &psi),
            psi_th: theta_field(g, &psi),
            v_t: t_field(g, &s.v),
            v_q: weighted_slope(s),
            psi,
            e,
        }
    }
}

/// Recovers `F` from `(F_t, F_θ)` on nodes, trapezoidal along an L-shaped
/// path from `(i0, j0)`: in t along row `j0`, then in θ. The swapped path
/// (θ first, then t) is used for the path defect.
fn integrate_form(grid: &CylinderGrid, ft: &Field, fth: &Field, origin: (usize, usize), value: f64) -> Potential {
    let (nt, n) = (grid.n_t, grid.n_theta);
    let h = grid.ht();
    let dth = grid.dtheta();
    let (i0, j0) = origin;
    // in t along column j, starting from `start` at row i0
    let along_t = |j: usize, start: f64, out: &mut Field| {
        out.set(i0, j, start);
        for i in i0 + 1..nt {
            let x = out.get(i - 1, j) + 0.5 * h * (ft.get(i - 1, j) + ft.get(i, j));
            out.set(i, j, x);
        }
        for i in (0..i0).rev() {
            let x = out.get(i + 1, j) - 0.5 * h * (ft.get(i, j) + ft.get(i + 1, j));
            out.set(i, j, x);
        }
    };
    let along_theta = |i: usize, start: f64, out: &mut Field| {
        out.set(i, j0, start);
        for j in j0 + 1..n {
            let x = out.get(i, j - 1) + 0.5 * dth * (fth.get(i, j - 1) + fth.get(i, j));
            out.set(i, j, x);
        }
        for j in (0..j0).rev() {
            let x = out.get(i, j + 1) - 0.5 * dth * (fth.get(i, j) + fth.get(i, j + 1));
            out.set(i, j, x);
        }
    };
    let mut first = Field::zeros(grid);
    along_t(j0, value, &mut first);
    for i in 0..nt {
        let start = first.get(i, j0);
        along_theta(i, start, &mut first);
    }
    let mut second = Field::zeros(grid);
    along_theta(i0, value, &mut second);
    for j in 0..n {
        let start = second.get(i0, j);
        along_t(j, start, &mut second);
    }
    let path_defect = first.zip_map(&second, |a, b| a - b).sup_norm();

    let mut curl = Field::zeros(grid);
    for i in 0..nt {
        for j in 0..n {
            let dt = t_derivs(|r| fth.get(r, j), i, nt, h).0;
            // F_t is even across both poles for both forms
            let dt_th = theta_derivative(ft.row(i), j, dth);
            curl.set(i, j, dt - dt_th);
        }
    }
    Potential { values: first, curl, path_defect }
}

fn reference_node(grid: &CylinderGrid) -> (usize, usize) {
    (grid.n_t - 1, grid.n_theta / 2)
}

/// `w` with `w = w_ref` at the reference node (last slice, middle ring).
pub fn integrate_w(s: &MapState, w_ref: f64) -> Potential {
    integrate_w_with(s, &Derivs::new(s), w_ref)
}

fn integrate_w_with(s: &MapState, d: &Derivs, w_ref: f64) -> Potential {
    let g = &s.grid;
    let mut ft = Field::zeros(g);
    let mut fth = Field::zeros(g);
    for i in 0..g.n_t {
        let r = (-g.t(i)).exp();
        for j in 0..g.n_theta {
            let s3 = g.theta(j).sin().powi(3);
            let k = 2.0 * r * d.e.get(i, j);
            ft.set(i, j, k * d.v_q.get(i, j));
            fth.set(i, j, -k * d.v_t.get(i, j) / s3);
        }
    }
    integrate_form(g, &ft, &fth, reference_node(g), w_ref)
}

fn alpha_form(s: &MapState, d: &Derivs) -> (Field, Field) {
    let g = &s.grid;
    let mut ft = Field::zeros(g);
    let mut fth = Field::zeros(g);
    for i in 0..g.n_t {
        for j in 0..g.n_theta {
            let (sn, c) = g.theta(j).sin_cos();
            let (pt, pth) = (d.psi_t.get(i, j), d.psi_th.get(i, j));
            let (vt, q) = (d.v_t.get(i, j), d.v_q.get(i, j));
            let e = d.e.get(i, j);
            let s3 = sn.powi(3);
            let s2 = sn * sn;
            let sc = sn * c;
            let rar = s2 - 2.0 * s2 * pt + s2 * (pt * pt - pth * pth) + 2.0 * sc * pth - 2.0 * sc * pt * pth
                + e * (sn * vt * vt / s3 - sn * s3 * q * q - 2.0 * c * vt * q);
            let ath = 2.0 * s2 * pth - sc + sc * (pth * pth - pt * pt) - 2.0 * s2 * pt * pth + 2.0 * sc * pt
                + e * (c * (s3 * q * q - vt * vt / s3) - 2.0 * sn * vt * q);
            ft.set(i, j, -rar);
            fth.set(i, j, ath);
        }
    }
    (ft, fth)
}

/// `α` integrated from the reference node and then shifted to `gauge`.
pub fn integrate_alpha(s: &MapState, gauge: AlphaGauge) -> Result<Potential> {
    integrate_alpha_with(s, &Derivs::new(s), gauge)
}

fn integrate_alpha_with(s: &MapState, d: &Derivs, gauge: AlphaGauge) -> Result<Potential> {
    let g = &s.grid;
    let (ft, fth) = alpha_form(s, d);
    let mut p = integrate_form(g, &ft, &fth, reference_node(g), 0.0);
    let north = pole_limit(&p.values, g.n_t - 1, Pole::North)?.value;
    let target = match gauge {
        AlphaGauge::NorthRod => 0.0,
        AlphaGauge::NearHorizon { b } => b.ln_1p(),
    };
    let shift = target - north;
    p.values = p.values.map(|x| x + shift);
    Ok(p)
}

pub fn reconstruct(s: &MapState, w_ref: f64, gauge: AlphaGauge) -> Result<MetricFields> {
    let d = Derivs::new(s);
    let w = integrate_w_with(s, &d, w_ref);
    let alpha = integrate_alpha_with(s, &d, gauge)?;
    if !(w.values.is_finite() && alpha.values.is_finite()) {
        return Err(Error::NonFinite("reconstructed metric functions".into()));
    }
    let g = s.grid;
    let mut u = d.psi.clone();
    for i in 0..g.n_t {
        let t = g.t(i);
        for x in u.row_mut(i) {
            *x -= t;
        }
    }
    Ok(MetricFields {
        grid: g,
        u,
        w: w.values,
        alpha: alpha.values,
        w_curl: w.curl,
        alpha_curl: alpha.curl,
        w_path_defect: w.path_defect,
        alpha_path_defect: alpha.path_defect,
        reference: reference_node(&g),
        w_ref,
        alpha_gauge: gauge,
    })
}

// ---------------------------------------------------------------------------
// rods and angle defects

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pole {
    North,
    South,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleLimit {
    pub value: f64,
    /// Difference to the two-ring extrapolation `A + B sin²θ`.
    pub spread: f64,
}

/// Extrapolation of row `i` to a pole through `A + B s² + C s⁴` on the
/// three nearest rings.
pub fn pole_limit(f: &Field, i: usize, pole: Pole) -> Result<PoleLimit> {
    let n = f.n_theta;
    if n < 3 {
        return Err(Error::InvalidParameter("pole extrapolation needs three rings".into()));
    }
    let dth = std::f64::consts::PI / n as f64;
    let idx = |k: usize| match pole {
        Pole::North => k,
        Pole::South => n - 1 - k,
    };
    let x: Vec<f64> = (0..3).map(|k| (((k as f64) + 0.5) * dth).sin().powi(2)).collect();
    let y: Vec<f64> = (0..3).map(|k| f.get(i, idx(k))).collect();
    // Lagrange interpolation in s² evaluated at 0
    let mut value = 0.0;
    for a in 0..3 {
        let mut l = 1.0;
        for b in 0..3 {
            if a != b {
                l *= x[b] / (x[b] - x[a]);
            }
        }
        value += l * y[a];
    }
    let two = (y[0] * x[1] - y[1] * x[0]) / (x[1] - x[0]);
    if !value.is_finite() {
        return Err(Error::FitUnstable("pole extrapolation is not finite".into()));
    }
    Ok(PoleLimit { value, spread: (value - two).abs() })
}

/// Spread above which a pole extrapolation is flagged.
pub const EXTRAPOLATION_FLAG: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    /// Slice at which the rods are read off.
    pub t_station: f64,
    pub b_north: f64,
    pub b_south: f64,
    /// `¼(e^{−𝐛} − 1)` for the north and south rods.
    pub forces: (f64, f64),
    pub difference: f64,
    pub predicted: f64,
    pub discrepancy: f64,
    /// Change of each rod value between the first slice and the station.
    pub rod_variation: (f64, f64),
    pub extrapolation_spread: f64,
    pub flagged: bool,
}

pub fn force(b: f64) -> f64 {
    0.25 * ((-b).exp() - 1.0)
}

/// Rod defects read off at the last slice (nearest the puncture).
pub fn angle_defects(mf: &MetricFields, fitted_b: f64) -> Result<DefectReport> {
    angle_defects_at(mf, fitted_b, mf.alpha.n_t - 1)
}

pub fn angle_defects_at(mf: &MetricFields, fitted_b: f64, station: usize) -> Result<DefectReport> {
    let f = &mf.alpha;
    if station >= f.n_t {
        return Err(Error::InvalidParameter(format!("station {station} outside the grid")));
    }
    if !(fitted_b.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("b = {fitted_b} outside (-1, 1)")));
    }
    let n = pole_limit(f, station, Pole::North)?;
    let s = pole_limit(f, station, Pole::South)?;
    let n0 = pole_limit(f, 0, Pole::North)?;
    let s0 = pole_limit(f, 0, Pole::South)?;
    let difference = n.value - s.value;
    let predicted = ((1.0 + fitted_b) / (1.0 - fitted_b)).ln();
    let spread = n.spread.max(s.spread);
    Ok(DefectReport {
        t_station: mf.grid.t(station),
        b_north: n.value,
        b_south: s.value,
        forces: (force(n.value), force(s.value)),
        difference,
        predicted,
        discrepancy: (difference - predicted).abs(),
        rod_variation: ((n.value - n0.value).abs(), (s.value - s0.value).abs()),
        extrapolation_spread: spread,
        flagged: spread > EXTRAPOLATION_FLAG,
    })
}

// ---------------------------------------------------------------------------
// near-horizon limit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NhgLimitReport {
    pub params: TangentParams,
    pub rbar: f64,
    pub epsilons: Vec<f64>,
    pub theta: Vec<f64>,
    /// Scaled metric components over θ, one profile per ε.
    pub profiles: Vec<Vec<NhgComponents>>,
    /// Sup over θ and components of the difference to the closed form.
    pub distances: Vec<f64>,
    /// `Ω = −w₀`.
    pub omega: f64,
    pub w0: f64,
    /// Fitted `∂_r w` at the puncture, `1/a` in theory.
    pub w_slope: f64,
    /// Mean of `α − ln(1 + cos²θ + 2b cos θ)` on the last slice.
    pub alpha0: f64,
    pub monotone: bool,
}

/// Values of row-interpolated `f` at `t`, cubic Lagrange on four nodes.
fn interp_row(grid: &CylinderGrid, f: &Field, t: f64) -> Vec<f64> {
    let h = grid.ht();
    let x = (t - grid.t_min) / h;
    let nt = grid.n_t;
    let base = (x.floor() as isize - 1).clamp(0, nt.saturating_sub(4) as isize) as usize;
    let k = 4.min(nt);
    let nodes: Vec<usize> = (base..base + k).collect();
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&a| {
            nodes
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| (x - b as f64) / (a as f64 - b as f64))
                .product()
        })
        .collect();
    (0..grid.n_theta)
        .map(|j| nodes.iter().zip(&weights).map(|(&i, w)| w * f.get(i, j)).sum())
        .collect()
}

/// `w₀` and the slope of `w` in `r` from `w ≈ w₀ + k r + k₂ r²` on the
/// last two e-folds, averaged over θ ∈ [π/6, 5π/6].
fn fit_w0(grid: &CylinderGrid, w: &Field) -> Result<(f64, f64)> {
    let rows: Vec<usize> = (0..grid.n_t).filter(|&i| grid.t(i) >= grid.t_max - 2.0 - 1e-12).collect();
    let r: Vec<f64> = rows.iter().map(|&i| (-grid.t(i)).exp()).collect();
    let cols = vec![vec![1.0; r.len()], r.clone(), r.iter().map(|x| x * x).collect()];
    let (lo, hi) = (std::f64::consts::FRAC_PI_6, 5.0 * std::f64::consts::FRAC_PI_6);
    let mut acc = (0.0, 0.0, 0usize);
    for j in 0..grid.n_theta {
        let th = grid.theta(j);
        if th < lo || th > hi {
            continue;
        }
        let y: Vec<f64> = rows.iter().map(|&i| w.get(i, j)).collect();
        let (c, _) = least_squares(&cols, &y)?;
        acc = (acc.0 + c[0], acc.1 + c[1], acc.2 + 1);
    }
    if acc.2 == 0 {
        return Err(Error::InvalidParameter("no θ nodes in the w window".into()));
    }
    Ok((acc.0 / acc.2 as f64, acc.1 / acc.2 as f64))
}

/// Scaled metric `r = εr̄`, `τ = τ̄/ε`, `φ = φ̄ + Ωτ̄/ε` for each ε, compared
/// with the closed-form near-horizon metric of `params` (fitted from the
/// state when absent).
pub fn nhg_limit(s: &MapState, epsilons: &[f64], rbar: f64, params: Option<TangentParams>) -> Result<NhgLimitReport> {
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) || !(rbar > 0.0) {
        return Err(Error::InvalidParameter("epsilons and rbar must be positive".into()));
    }
    let g = s.grid;
    for e in epsilons {
        let t = -(e * rbar).ln();
        if t < g.t_min - 1e-12 || t > g.t_max + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "r = {:.3e} (t = {t:.3}) is not resolved by the grid [{}, {}]",
                e * rbar,
                g.t_min,
                g.t_max
            )));
        }
    }
    let params = match params {
        Some(p) => p,
        None => fit_tangent(s)?.params,
    };
    let mf = reconstruct(s, 0.0, AlphaGauge::NearHorizon { b: params.b })?;
    let (w0, w_slope) = fit_w0(&g, &mf.w)?;
    let psi = s.psi();
    let theta = g.thetas();
    let last = g.n_t - 1;
    let alpha0 = theta
        .iter()
        .enumerate()
        .map(|(j, th)| {
            let c = th.cos();
            mf.alpha.get(last, j) - (1.0 + c * c + 2.0 * params.b * c).ln()
        })
        .sum::<f64>()
        / theta.len() as f64;

    let mut profiles = Vec::new();
    let mut distances = Vec::new();
    for &eps in epsilons {
        let t = -(eps * rbar).ln();
        let p = interp_row(&g, &psi, t);
        let w = interp_row(&g, &mf.w, t);
        let al = interp_row(&g, &mf.alpha, t);
        let mut prof = Vec::with_capacity(theta.len());
        let mut dist = 0.0f64;
        for (j, &th) in theta.iter().enumerate() {
            let s2 = th.sin().powi(2);
            let gpp = (-2.0 * p[j]).exp() * s2;
            let rot = (w[j] - w0) / eps;
            let h = (-2.0 * p[j] + 2.0 * al[j]).exp();
            let comp = NhgComponents {
                g_tt: -rbar * rbar * (2.0 * p[j]).exp() + gpp * rot * rot,
                g_tphi: gpp * rot,
                g_phiphi: gpp,
                g_rr: h / (rbar * rbar),
                g_thth: h,
            };
            dist = dist.max(comp.max_abs_diff(&nhg_metric(params, rbar, th)));
            prof.push(comp);
        }
        profiles.push(prof);
        distances.push(dist);
    }
    let monotone = distances.windows(2).all(|d| d[1] < d[0]);
    Ok(NhgLimitReport {
        params,
        rbar,
        epsilons: epsilons.to_vec(),
        theta,
        profiles,
        distances,
        omega: -w0,
        w0,
        w_slope,
        alpha0,
        monotone,
    })
}
