//! Discrete eigenproblems on the sphere: the weighted twist operator
//! `sin⁴θ div(sin⁻⁴θ ∇w) = −μw` and the axisymmetric linearization of the
//! harmonic map system at a tangent map.
//!
//! Both are assembled as symmetric forms on the pole-offset θ grid with the
//! same half-cell conductances `1/∫sin³` as the residual, so a zero
//! Dirichlet ghost at the poles encodes the weighted `H¹₀` condition.

mod eigen;

use serde::{Deserialize, Serialize};

use crate::closed_forms::{tangent_regular, TangentParams};
use crate::error::{Error, Result};
use crate::grid::{SphereGeometry, SphereProfile};

pub use eigen::{smallest_eigenpairs, EigenPairs, SymBand};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub eigenvalues: Vec<f64>,
    /// One entry per eigenvalue, one profile per operator component.
    pub eigenfunctions: Vec<Vec<SphereProfile>>,
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
}

/// Associated Legendre function `P²_n(x)`, upward three-term recurrence in
/// the degree. For order 2 the recurrence runs in the direction of the
/// dominant solution, so no downward pass is needed.
pub fn legendre_p2(n: usize, x: f64) -> f64 {
    assert!(n >= 2, "P^2_n needs n >= 2");
    let mut pm2 = 3.0 * (1.0 - x * x);
    if n == 2 {
        return pm2;
    }
    let mut pm1 = 5.0 * x * pm2;
    for l in 4..=n {
        let lf = l as f64;
        let p = (x * (2.0 * lf - 1.0) * pm1 - (lf + 1.0) * pm2) / (lf - 2.0);
        pm2 = pm1;
        pm1 = p;
    }
    pm1
}

/// Twist eigenfunction of index `ℓ ≥ 1` before normalization:
/// `sin²θ P²_{ℓ+1}(cos θ)`.
pub fn twist_mode(l: usize, theta: f64) -> f64 {
    theta.sin().powi(2) * legendre_p2(l + 1, theta.cos())
}

/// Weighted twist problem `K w = μ M w` with `M_j = Δθ/sin³θ_j`.
pub fn assemble_twist(n_theta: usize) -> (SymBand, Vec<f64>) {
    let geo = SphereGeometry::new(n_theta);
    let n = n_theta;
    let mut k = SymBand::new(n, 1);
    k.add(0, 0, geo.kappa[0]);
    k.add(n - 1, n - 1, geo.kappa[n]);
    for f in 1..n {
        let c = geo.kappa[f];
        k.add(f - 1, f - 1, c);
        k.add(f, f, c);
        k.add(f - 1, f, -c);
    }
    let mass = geo.s.iter().map(|s| geo.dtheta / s.powi(3)).collect();
    (k, mass)
}

pub fn twist_spectrum(n_theta: usize, k: usize) -> Result<EigenReport> {
    if n_theta < 4 {
        return Err(Error::InvalidParameter("n_theta must be at least 4".into()));
    }
    let (a, mass) = assemble_twist(n_theta);
    let pairs = smallest_eigenpairs(&a, &mass, k, 0.0, 1e-10)?;
    Ok(EigenReport {
        eigenvalues: pairs.values,
        eigenfunctions: pairs
            .vectors
            .into_iter()
            .map(|w| vec![SphereProfile { values: w, traces: (0.0, 0.0) }])
            .collect(),
        residual_norms: pairs.residuals,
        iterations: pairs.iterations,
    })
}

/// The symmetric form `ℬ` of the linearized operator at the tangent map
/// `(a, b)` together with its mass matrix. Unknowns interleave
/// `(φ₁_j, φ₂_j)`; `φ₂` has zero ghosts at both poles.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub params: TangentParams,
    pub n_theta: usize,
    pub azimuthal: u32,
    pub form: SymBand,
    /// `diag(sin θ_j Δθ, E_j Δθ/sin³θ_j)`, the `L² × L²(e^{4u})` product.
    pub mass: Vec<f64>,
}

impl LinearizedOperator {
    /// `ℬ[φ, ψ]` per unit azimuthal angle, on interleaved vectors.
    pub fn bilinear(&self, phi: &[f64], psi: &[f64]) -> f64 {
        self.form.quadratic(phi, psi)
    }

    /// Strong form `M⁻¹ℬφ`, the discrete `−(L₁φ, L₂φ)`.
    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        self.form.matvec(phi).iter().zip(&self.mass).map(|(y, m)| y / m).collect()
    }

    pub fn interleave(&self, first: impl Fn(f64) -> f64, second: impl Fn(f64) -> f64) -> Vec<f64> {
        let geo = SphereGeometry::new(self.n_theta);
        geo.theta.iter().flat_map(|&t| [first(t), second(t)]).collect()
    }

    /// `⟨φ, ψ⟩` in the weighted product.
    pub fn inner(&self, phi: &[f64], psi: &[f64]) -> f64 {
        phi.iter().zip(psi).zip(&self.mass).map(|((x, y), m)| x * y * m).sum()
    }
}

/// Assembles `ℬ` on `n_θ` nodes. With `azimuthal = m > 0` the Fourier
/// penalty `m²∫(φ₁² + e^{4u}φ₂²) dθ/sin θ` is added.
///
/// On a tangent map the flux `sin θ e^{4u} v′` equals `−1/(2a)`, so the
/// five-term integrand becomes
/// `s φ₁′ψ₁′ + (E/s³) φ₂′ψ₂′ + 2s³/(a²E) φ₁ψ₁ + (2/a)(φ₁′ψ₂ + ψ₁′φ₂)`
/// with `E = e^{4Ψ}`; the last pair is the integrated-by-parts form of the
/// mixed terms and is discretized as face difference times face average,
/// which keeps the matrix exactly symmetric.
pub fn assemble_linearized(p: TangentParams, n_theta: usize, azimuthal: u32) -> LinearizedOperator {
    let geo = SphereGeometry::new(n_theta);
    let n = n_theta;
    let dth = geo.dtheta;
    let a = p.a;
    let e_at = |th: f64| (4.0 * tangent_regular(p, th).0).exp();
    let e: Vec<f64> = geo.theta.iter().map(|&t| e_at(t)).collect();
    let e_north = e_at(0.0);
    let e_south = e_at(std::f64::consts::PI);
    let i1 = |j: usize| 2 * j;
    let i2 = |j: usize| 2 * j + 1;
    let mut form = SymBand::new(2 * n, 3);

    for f in 1..n {
        let c = geo.s_face[f] / dth;
        form.add(i1(f - 1), i1(f - 1), c);
        form.add(i1(f), i1(f), c);
        form.add(i1(f - 1), i1(f), -c);
    }
    form.add(i2(0), i2(0), geo.kappa[0] * 0.5 * (e_north + e[0]));
    form.add(i2(n - 1), i2(n - 1), geo.kappa[n] * 0.5 * (e[n - 1] + e_south));
    for f in 1..n {
        let c = geo.kappa[f] * 0.5 * (e[f - 1] + e[f]);
        form.add(i2(f - 1), i2(f - 1), c);
        form.add(i2(f), i2(f), c);
        form.add(i2(f - 1), i2(f), -c);
    }
    for j in 0..n {
        let s = geo.s[j];
        form.add(i1(j), i1(j), dth * 2.0 * s.powi(3) / (a * a * e[j]));
    }
    // (2/a) Σ_f (φ₁_f − φ₁_{f−1}) · ½(ψ₂_{f−1} + ψ₂_f), plus its transpose
    let w = 1.0 / a;
    for f in 1..n {
        for q in [f - 1, f] {
            form.add(i2(q), i1(f), w);
            form.add(i2(q), i1(f - 1), -w);
        }
    }
    if azimuthal > 0 {
        let m2 = (azimuthal as f64).powi(2);
        for j in 0..n {
            let s = geo.s[j];
            form.add(i1(j), i1(j), m2 * dth / s);
            form.add(i2(j), i2(j), m2 * dth * e[j] / s.powi(5));
        }
    }
    let mass = (0..n).flat_map(|j| [geo.s[j] * dth, e[j] * dth / geo.s[j].powi(3)]).collect();
    LinearizedOperator { params: p, n_theta, azimuthal, form, mass }
}

fn split_components(op: &LinearizedOperator, x: &[f64]) -> Vec<SphereProfile> {
    let n = op.n_theta;
    let first: Vec<f64> = (0..n).map(|j| x[2 * j]).collect();
    let second: Vec<f64> = (0..n).map(|j| x[2 * j + 1]).collect();
    let tn = (9.0 * first[0] - first[1]) / 8.0;
    let ts = (9.0 * first[n - 1] - first[n - 2]) / 8.0;
    vec![SphereProfile { values: first, traces: (tn, ts) }, SphereProfile { values: second, traces: (0.0, 0.0) }]
}

/// Smallest `k` eigenvalues of `ℬ` relative to the weighted product.
pub fn kernel_spectrum(p: TangentParams, n_theta: usize, k: usize) -> Result<EigenReport> {
    linearized_spectrum(&assemble_linearized(p, n_theta, 0), k)
}

pub fn linearized_spectrum(op: &LinearizedOperator, k: usize) -> Result<EigenReport> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let pairs = smallest_eigenpairs(&op.form, &op.mass, k, -1.0, 1e-10)?;
    Ok(EigenReport {
        eigenvalues: pairs.values,
        eigenfunctions: pairs.vectors.iter().map(|x| split_components(op, x)).collect(),
        residual_norms: pairs.residuals,
        iterations: pairs.iterations,
    })
}

/// `ℬ[φ, ψ]` at the tangent map for pairs of profiles sampled on the nodes.
pub fn bilinear_form(p: TangentParams, phi: (&[f64], &[f64]), psi: (&[f64], &[f64])) -> Result<f64> {
    let n = phi.0.len();
    if [phi.1.len(), psi.0.len(), psi.1.len()].iter().any(|&m| m != n) || n < 4 {
        return Err(Error::InvalidParameter("profiles must share one grid of at least 4 nodes".into()));
    }
    let op = assemble_linearized(p, n, 0);
    let x: Vec<f64> = (0..n).flat_map(|j| [phi.0[j], phi.1[j]]).collect();
    let y: Vec<f64> = (0..n).flat_map(|j| [psi.0[j], psi.1[j]]).collect();
    Ok(op.bilinear(&x, &y))
}

/// `|⟨x, y⟩_M| / (‖x‖_M ‖y‖_M)`.
pub fn weighted_cosine(x: &[f64], y: &[f64], mass: &[f64]) -> f64 {
    let dot = |u: &[f64], w: &[f64]| -> f64 { u.iter().zip(w).zip(mass).map(|((a, b), m)| a * b * m).sum() };
    dot(x, y).abs() / (dot(x, x) * dot(y, y)).sqrt()
}
