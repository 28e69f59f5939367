//! Closed-form solutions: extreme Kerr, the tangent-map family and its
//! near-horizon metric, plus hyperbolic-plane geometry.
//!
//! The target is the hyperbolic plane with metric `du² + e^{4u} dv²`, which
//! has Gaussian curvature −2. Geodesics parameterized by arclength have unit
//! speed in this metric. Doubling the metric gives curvature −1, so distances
//! quoted for the curvature −1 normalization are √2 times the ones here.
//!
//! Singular quantities are split as `u = Ψ − ln sin θ` and the regular part
//! `Ψ` is what the `*_regular` functions return; it is finite on `[0, π]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible |b|; atanh is evaluated only inside this range.
pub const B_GUARD: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrParams {
    pub m: f64,
}

impl KerrParams {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {m}")));
        }
        Ok(Self { m })
    }

    /// Half-jump of the twist potential at the puncture, `2m²`.
    pub fn a(&self) -> f64 {
        2.0 * self.m * self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentParams {
    pub a: f64,
    pub b: f64,
}

impl TangentParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
        }
        if !(b.abs() <= B_GUARD) {
            return Err(Error::InvalidParameter(format!("b must lie in (-1, 1), got {b}")));
        }
        Ok(Self { a, b })
    }

    fn q(&self) -> f64 {
        ((1.0 - self.b) * (1.0 + self.b)).sqrt()
    }

    /// `tanh⁻¹ b`, written as a log ratio.
    pub fn atanh_b(&self) -> f64 {
        0.5 * ((1.0 + self.b) / (1.0 - self.b)).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicPoint {
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NhgComponents {
    pub g_tt: f64,
    pub g_tphi: f64,
    pub g_phiphi: f64,
    pub g_rr: f64,
    pub g_thth: f64,
}

impl NhgComponents {
    pub fn as_array(&self) -> [f64; 5] {
        [self.g_tt, self.g_tphi, self.g_phiphi, self.g_rr, self.g_thth]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

fn check_open_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < std::f64::consts::PI {
        Ok(())
    } else {
        Err(Error::Domain(format!("theta = {theta} outside (0, pi)")))
    }
}

/// Regular part `(u_K + ln sin θ, v_K)` of the extreme Kerr map at polar `(r, θ)`.
pub fn kerr_regular(p: KerrParams, r: f64, theta: f64) -> (f64, f64) {
    let m = p.m;
    let (s, c) = theta.sin_cos();
    let rm = r + m;
    let sigma = rm * rm + m * m * c * c;
    let psi = -0.5 * (rm * rm + m * m + 2.0 * m.powi(3) * rm * s * s / sigma).ln();
    let v = m * m * c * (3.0 - c * c) + m.powi(4) * s.powi(4) * c / sigma;
    (psi, v)
}

pub fn kerr_map(p: KerrParams, r: f64, theta: f64) -> Result<HyperbolicPoint> {
    check_open_theta(theta)?;
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("r = {r} is negative")));
    }
    let (psi, v) = kerr_regular(p, r, theta);
    Ok(HyperbolicPoint { u: psi - theta.sin().ln(), v })
}

/// `D(θ) = 1 + cos²θ + 2b cos θ`, written as a sum of squares.
fn d_of(p: TangentParams, c: f64) -> f64 {
    let q = p.q();
    (c + p.b) * (c + p.b) + q * q
}

/// Regular part `(ū + ln sin θ, v̄)` of the tangent map; finite on `[0, π]`.
pub fn tangent_regular(p: TangentParams, theta: f64) -> (f64, f64) {
    let c = theta.cos();
    let d = d_of(p, c);
    let psi = 0.5 * (d / (2.0 * p.a * p.q())).ln();
    let v = p.a * (p.b * (1.0 + c * c) + 2.0 * c) / d;
    (psi, v)
}

pub fn tangent_map(p: TangentParams, theta: f64) -> Result<HyperbolicPoint> {
    check_open_theta(theta)?;
    let (psi, v) = tangent_regular(p, theta);
    Ok(HyperbolicPoint { u: psi - theta.sin().ln(), v })
}

/// Analytic θ-derivatives `(ū′, v̄′)` of the tangent map.
pub fn tangent_derivatives(p: TangentParams, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let d = d_of(p, c);
    let q2 = (1.0 - p.b) * (1.0 + p.b);
    let du = -c / s - s * (c + p.b) / d;
    let dv = -2.0 * p.a * q2 * s.powi(3) / (d * d);
    (du, dv)
}

/// `ln cosh x` without overflow.
fn ln_cosh(x: f64) -> f64 {
    let y = x.abs();
    y + (-2.0 * y).exp().ln_1p() - std::f64::consts::LN_2
}

/// Arclength variable `s(θ) = ½ ln((1 − cos θ)/(1 + cos θ))`.
pub fn arclength_of_theta(theta: f64) -> f64 {
    (0.5 * theta).tan().ln()
}

/// The tangent map as a unit-speed geodesic, `x = −2s + tanh⁻¹ b`.
pub fn tangent_map_arclength(p: TangentParams, s: f64) -> HyperbolicPoint {
    let x = -2.0 * s + p.atanh_b();
    HyperbolicPoint {
        u: 0.5 * (ln_cosh(x) - (2.0 * p.a).ln()),
        v: p.a * x.tanh(),
    }
}

fn ln_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Distance from `cosh 2w = cosh 2Δu + 2 e^{2(u+u*)} Δv²` given
/// `ln(2 e^{2(u+u*)})`, which lets callers pass regularized heights.
fn distance_from_parts(du: f64, ln_coef: f64, dv: f64) -> f64 {
    if du == 0.0 && dv == 0.0 {
        return 0.0;
    }
    let ln_dv2 = if dv == 0.0 { f64::NEG_INFINITY } else { 2.0 * dv.abs().ln() };
    let ln_b = ln_coef + ln_dv2;
    // δ = cosh 2w − 1 = 2 sinh²Δu + 2e^{2(u+u*)}Δv²
    let ln_a = if du == 0.0 {
        f64::NEG_INFINITY
    } else {
        std::f64::consts::LN_2 + 2.0 * du.abs().sinh().ln()
    };
    let ln_delta = ln_add_exp(ln_a, ln_b);
    if ln_delta < 600.0 {
        let delta = ln_delta.exp();
        0.5 * (delta + (delta * (2.0 + delta)).sqrt()).ln_1p()
    } else {
        // arccosh(1 + δ) = ln(2(1 + δ)) up to e^{-2 ln δ}
        0.5 * (std::f64::consts::LN_2 + ln_delta)
    }
}

/// Distance in the curvature −2 plane; symmetric and overflow-safe.
pub fn hyperbolic_distance(p: HyperbolicPoint, q: HyperbolicPoint) -> f64 {
    let ln_coef = std::f64::consts::LN_2 + 2.0 * (p.u + q.u);
    distance_from_parts(p.u - q.u, ln_coef, p.v - q.v)
}

/// Distance between two points given by regular heights `Ψ = u + ln sin θ`
/// at the same colatitude. Valid on the open interval; the `sin⁻⁴` factor
/// enters only through its logarithm.
pub fn regular_distance(theta: f64, p: (f64, f64), q: (f64, f64)) -> f64 {
    let ln_coef = std::f64::consts::LN_2 + 2.0 * (p.0 + q.0) - 4.0 * theta.sin().ln();
    distance_from_parts(p.0 - q.0, ln_coef, p.1 - q.1)
}

/// `v₀(θ) = ½ a cos θ (3 − cos²θ)`.
pub fn v0_profile(a: f64, theta: f64) -> f64 {
    let c = theta.cos();
    0.5 * a * c * (3.0 - c * c)
}

/// Near-horizon metric of the tangent map `(a, b)` at `(r̄, θ)`.
pub fn nhg_metric(p: TangentParams, rbar: f64, theta: f64) -> NhgComponents {
    let (s, c) = theta.sin_cos();
    let d = d_of(p, c);
    let q = p.q();
    let f = d / (2.0 * p.a * q);
    let g = 2.0 * p.a * q * s * s / d;
    let h = 0.5 * p.a * q * d;
    NhgComponents {
        g_tt: -rbar * rbar * f + g * rbar * rbar / (p.a * p.a),
        g_tphi: g * rbar / p.a,
        g_phiphi: g,
        g_rr: h / (rbar * rbar),
        g_thth: h,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiFields {
    /// `(∂_b ū, ∂_b v̄)`, vanishing second component at both poles.
    pub phi_b: (f64, f64),
    /// `(∂_a ū, ∂_a v̄)`, second component `±1` at the poles.
    pub phi_a: (f64, f64),
}

pub fn jacobi_fields(p: TangentParams, theta: f64) -> JacobiFields {
    let (s, c) = theta.sin_cos();
    let d = d_of(p, c);
    let q2 = (1.0 - p.b) * (1.0 + p.b);
    JacobiFields {
        phi_b: (p.b / (2.0 * q2) + c / d, p.a * s.powi(4) / (d * d)),
        phi_a: (-0.5 / p.a, (p.b * (1.0 + c * c) + 2.0 * c) / d),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstIntegrals {
    /// `e^{4ū} v̄′ sin θ`, constant `−1/(2a)`.
    pub flux: f64,
    /// `ū′ − 2 e^{4ū} v̄ v̄′`, identically zero.
    pub c1: f64,
    /// `¼ e^{−4ū} + v̄²`, constant `a²`.
    pub orbit: f64,
}

pub fn first_integrals(p: TangentParams, theta: f64) -> FirstIntegrals {
    let s = theta.sin();
    let (psi, v) = tangent_regular(p, theta);
    let (du, dv) = tangent_derivatives(p, theta);
    // e^{4u} = e^{4Ψ}/s⁴
    let e4u = (4.0 * psi).exp() / s.powi(4);
    FirstIntegrals {
        flux: e4u * dv * s,
        c1: du - 2.0 * e4u * v * dv,
        orbit: 0.25 * (-4.0 * psi).exp() * s.powi(4) + v * v,
    }
}
