//! The renormalized system on the cylinder `ℝ × S²` with `t = −ln r`.
//!
//! Unknowns are `Φ = u + ln ω` and `v`. Internally every formula works with
//! the regular height `Ψ = u + ln sin θ = Φ − g`, where `g = ln ω − ln sin θ`,
//! so that `e^{4u} = e^{4Ψ}/sin⁴θ` splits into a smooth factor and a known
//! singular weight.

mod energy;
mod homogenize;
mod operator;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::closed_forms::{kerr_regular, tangent_regular, KerrParams, TangentParams};
use crate::error::{Error, Result};
use crate::grid::{BoundaryPair, CylinderGrid, Field, SphereProfile};

pub use energy::{
    energy_identity_check, energy_ledger, kinetic_energy, local_bound_check, monotonicity_check,
    sphere_energy, EnergyLedger, LocalBound,
};
pub use homogenize::homogenize_renormalizer;
pub use operator::{op_l, residual, residual_norms, ResidualNorms};
pub(crate) use operator::{t_derivs, Stencil};

type GFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A user renormalizer given through `g(t, θ) = ln ω − ln sin θ`.
#[derive(Clone)]
pub struct CustomRenormalizer {
    pub label: String,
    g: Arc<GFn>,
    /// Certified bound on `‖ln ω − ln sin θ‖`.
    pub a1: f64,
    pub t_independent: bool,
}

impl CustomRenormalizer {
    pub fn new(
        label: impl Into<String>,
        a1: f64,
        t_independent: bool,
        g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(a1 >= 0.0 && a1.is_finite()) {
            return Err(Error::InvalidParameter(format!("A1 bound must be finite, got {a1}")));
        }
        Ok(Self { label: label.into(), g: Arc::new(g), a1, t_independent })
    }
}

#[derive(Clone)]
pub enum Renormalizer {
    /// `ω = sin θ`
    TranslationInvariant,
    /// `ω = ρ = e^{−t} sin θ`
    LinearGrowth,
    Custom(CustomRenormalizer),
}

impl fmt::Debug for Renormalizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenormalizerKind {
    TranslationInvariant,
    LinearGrowth,
    Custom,
}

impl Renormalizer {
    pub fn kind(&self) -> RenormalizerKind {
        match self {
            Self::TranslationInvariant => RenormalizerKind::TranslationInvariant,
            Self::LinearGrowth => RenormalizerKind::LinearGrowth,
            Self::Custom(_) => RenormalizerKind::Custom,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::TranslationInvariant => "translation_invariant".into(),
            Self::LinearGrowth => "linear_growth".into(),
            Self::Custom(c) => format!("custom:{}", c.label),
        }
    }

    /// `ln ω − ln sin θ`.
    pub fn g(&self, t: f64, theta: f64) -> f64 {
        match self {
            Self::TranslationInvariant => 0.0,
            Self::LinearGrowth => -t,
            Self::Custom(c) => (c.g)(t, theta),
        }
    }

    /// `L ln ω`: exact for the built-in kinds, central differences of `g`
    /// with step 1e−4 otherwise.
    pub fn l_ln_omega(&self, t: f64, theta: f64) -> f64 {
        match self {
            Self::TranslationInvariant => -1.0,
            Self::LinearGrowth => 0.0,
            Self::Custom(c) => {
                let h = 1e-4;
                let g = |t: f64, th: f64| (c.g)(t, th);
                let g0 = g(t, theta);
                let gtt = (g(t + h, theta) - 2.0 * g0 + g(t - h, theta)) / (h * h);
                let gt = (g(t + h, theta) - g(t - h, theta)) / (2.0 * h);
                let gaa = (g(t, theta + h) - 2.0 * g0 + g(t, theta - h)) / (h * h);
                let ga = (g(t, theta + h) - g(t, theta - h)) / (2.0 * h);
                -1.0 + gtt - gt + gaa + theta.cos() / theta.sin() * ga
            }
        }
    }

    pub fn is_translation_invariant(&self) -> bool {
        match self {
            Self::TranslationInvariant => true,
            Self::LinearGrowth => false,
            Self::Custom(c) => c.t_independent,
        }
    }

    pub fn g_field(&self, grid: &CylinderGrid) -> Field {
        Field::from_fn(grid, |t, th| self.g(t, th))
    }

    pub fn l_ln_omega_field(&self, grid: &CylinderGrid) -> Field {
        Field::from_fn(grid, |t, th| self.l_ln_omega(t, th))
    }
}

/// The renormalized pair `(Φ, v)` on a grid together with the pole traces of
/// `v`. The traces are stored as a pair so that gauge shifts `v ↦ v + c`
/// stay representable; the half-jump is `a = (v_N − v_S)/2`.
#[derive(Debug, Clone)]
pub struct MapState {
    pub grid: CylinderGrid,
    pub renorm: Renormalizer,
    pub phi: Field,
    pub v: Field,
    /// `(v_N, v_S)`: Dirichlet traces at θ = 0 and θ = π.
    pub traces: (f64, f64),
}

impl MapState {
    pub fn new(grid: CylinderGrid, renorm: Renormalizer, phi: Field, v: Field, traces: (f64, f64)) -> Result<Self> {
        for f in [&phi, &v] {
            if f.n_t != grid.n_t || f.n_theta != grid.n_theta {
                return Err(Error::InvalidParameter("field shape does not match grid".into()));
            }
        }
        let s = Self { grid, renorm, phi, v, traces };
        s.check_finite()?;
        Ok(s)
    }

    pub fn check_finite(&self) -> Result<()> {
        if !self.phi.is_finite() {
            return Err(Error::NonFinite("Phi".into()));
        }
        if !self.v.is_finite() {
            return Err(Error::NonFinite("v".into()));
        }
        if !(self.traces.0.is_finite() && self.traces.1.is_finite()) {
            return Err(Error::NonFinite("pole traces".into()));
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        0.5 * (self.traces.0 - self.traces.1)
    }

    /// Builds a state from `(t, θ) ↦ (Ψ, v)`.
    pub fn from_regular(
        grid: CylinderGrid,
        renorm: Renormalizer,
        traces: (f64, f64),
        f: impl Fn(f64, f64) -> (f64, f64),
    ) -> Self {
        let mut phi = Field::zeros(&grid);
        let mut v = Field::zeros(&grid);
        for i in 0..grid.n_t {
            let t = grid.t(i);
            for j in 0..grid.n_theta {
                let th = grid.theta(j);
                let (psi, vv) = f(t, th);
                phi.set(i, j, psi + renorm.g(t, th));
                v.set(i, j, vv);
            }
        }
        Self { grid, renorm, phi, v, traces }
    }

    /// Extreme Kerr sampled at `r = e^{−t}`.
    pub fn kerr(grid: CylinderGrid, renorm: Renormalizer, p: KerrParams) -> Self {
        let a = p.a();
        Self::from_regular(grid, renorm, (a, -a), |t, th| kerr_regular(p, (-t).exp(), th))
    }

    /// The tangent map lifted as a t-independent state.
    pub fn tangent(grid: CylinderGrid, renorm: Renormalizer, p: TangentParams) -> Self {
        Self::from_regular(grid, renorm, (p.a, -p.a), |_, th| tangent_regular(p, th))
    }

    pub fn g_field(&self) -> Field {
        self.renorm.g_field(&self.grid)
    }

    /// `Ψ = Φ − g = u + ln sin θ`.
    pub fn psi(&self) -> Field {
        self.phi.zip_map(&self.g_field(), |p, g| p - g)
    }

    pub fn sup_phi(&self) -> f64 {
        self.phi.sup_norm()
    }

    /// Dirichlet data `(Φ, v)` on row `i`.
    pub fn slice(&self, i: usize) -> BoundaryPair {
        BoundaryPair {
            phi: self.phi.row(i).to_vec(),
            v: SphereProfile { values: self.v.row(i).to_vec(), traces: self.traces },
        }
    }

    /// The invariants of the solution class: `sup|Φ| ≤ Λ` and `v` inside
    /// the trace interval up to `eps`.
    pub fn check_bounds(&self, lambda: f64, eps: f64) -> Result<()> {
        let sup = self.sup_phi();
        if sup > lambda {
            return Err(Error::BoundBreach { value: sup, guard: lambda });
        }
        let lo = self.traces.0.min(self.traces.1) - eps;
        let hi = self.traces.0.max(self.traces.1) + eps;
        if let Some(x) = self.v.values.iter().find(|&&x| x < lo || x > hi) {
            return Err(Error::Hypothesis(format!("v = {x} outside [{lo}, {hi}]")));
        }
        Ok(())
    }
}
