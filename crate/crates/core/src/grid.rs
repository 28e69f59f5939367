use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Product grid on `[t_min, t_max] × [0, π]`. θ nodes sit at cell centres
/// `θ_j = (j + ½)π/n_θ`, so no node touches a pole; t nodes include both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
    pub n_theta: usize,
}

impl CylinderGrid {
    pub fn new(t_min: f64, t_max: f64, n_t: usize, n_theta: usize) -> Result<Self> {
        if !(t_min < t_max) || !t_min.is_finite() || !t_max.is_finite() {
            return Err(Error::InvalidParameter(format!("need t_min < t_max, got [{t_min}, {t_max}]")));
        }
        if n_t < 3 {
            return Err(Error::InvalidParameter(format!("n_t must be at least 3, got {n_t}")));
        }
        if n_theta < 4 {
            return Err(Error::InvalidParameter(format!("n_theta must be at least 4, got {n_theta}")));
        }
        Ok(Self { t_min, t_max, n_t, n_theta })
    }

    pub fn ht(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n_t - 1) as f64
    }

    pub fn dtheta(&self) -> f64 {
        PI / self.n_theta as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i == self.n_t - 1 {
            self.t_max
        } else {
            self.t_min + i as f64 * self.ht()
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dtheta()
    }

    /// Colatitude of face `f`, between nodes `f − 1` and `f`; faces 0 and
    /// `n_θ` are the poles.
    pub fn face_theta(&self, f: usize) -> f64 {
        f as f64 * self.dtheta()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.n_t).map(|i| self.t(i)).collect()
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta).map(|j| self.theta(j)).collect()
    }

    pub fn len(&self) -> usize {
        self.n_t * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the t node closest to `t`.
    pub fn nearest_t(&self, t: f64) -> usize {
        let x = ((t - self.t_min) / self.ht()).round();
        x.clamp(0.0, (self.n_t - 1) as f64) as usize
    }

    pub fn with_t_range(&self, t_min: f64, t_max: f64) -> Result<Self> {
        Self::new(t_min, t_max, self.n_t, self.n_theta)
    }

    /// Nodes and faces shared by every discrete θ operator.
    pub fn sphere(&self) -> SphereGeometry {
        SphereGeometry::new(self.n_theta)
    }
}

/// `∫₀^θ sin³` computed as `x²(1 − x/3)` with `x = 1 − cos θ`, which keeps
/// full relative accuracy near the north pole.
fn sin3_primitive(theta: f64) -> f64 {
    let h = (0.5 * theta).sin();
    let x = 2.0 * h * h;
    x * x * (1.0 - x / 3.0)
}

/// `∫_a^b sin³θ dθ` without cancellation near either pole.
pub fn sin3_integral(a: f64, b: f64) -> f64 {
    if a + b <= PI {
        sin3_primitive(b) - sin3_primitive(a)
    } else {
        sin3_primitive(PI - a) - sin3_primitive(PI - b)
    }
}

/// Per-node and per-face data of the pole-offset θ grid.
#[derive(Debug, Clone)]
pub struct SphereGeometry {
    pub n: usize,
    pub dtheta: f64,
    /// `sin θ_j` at nodes.
    pub s: Vec<f64>,
    pub cos: Vec<f64>,
    pub theta: Vec<f64>,
    /// `sin` at faces `0..=n`; the pole entries are exactly zero.
    pub s_face: Vec<f64>,
    /// Conductances `1/∫ sin³` across faces `0..=n`. Faces 0 and `n` span
    /// the half cell between a pole and its nearest node.
    pub kappa: Vec<f64>,
}

impl SphereGeometry {
    pub fn new(n: usize) -> Self {
        let dtheta = PI / n as f64;
        let theta: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * dtheta).collect();
        let s = theta.iter().map(|t| t.sin()).collect();
        let cos = theta.iter().map(|t| t.cos()).collect();
        let mut s_face: Vec<f64> = (0..=n).map(|f| (f as f64 * dtheta).sin()).collect();
        s_face[0] = 0.0;
        s_face[n] = 0.0;
        let mut kappa = Vec::with_capacity(n + 1);
        kappa.push(1.0 / sin3_integral(0.0, theta[0]));
        for f in 1..n {
            kappa.push(1.0 / sin3_integral(theta[f - 1], theta[f]));
        }
        kappa.push(1.0 / sin3_integral(theta[n - 1], PI));
        Self { n, dtheta, s, cos, theta, s_face, kappa }
    }
}

/// Values on the grid, `t` index outer and `θ` index inner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub n_t: usize,
    pub n_theta: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &CylinderGrid) -> Self {
        Self { n_t: grid.n_t, n_theta: grid.n_theta, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &CylinderGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_t {
            let t = grid.t(i);
            for j in 0..grid.n_theta {
                values.push(f(t, grid.theta(j)));
            }
        }
        Self { n_t: grid.n_t, n_theta: grid.n_theta, values }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_theta + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.values[i * self.n_theta + j] = x;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_theta..(i + 1) * self.n_theta]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_theta..(i + 1) * self.n_theta]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { n_t: self.n_t, n_theta: self.n_theta, values: self.values.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        Self {
            n_t: self.n_t,
            n_theta: self.n_theta,
            values: self.values.iter().zip(&other.values).map(|(&x, &y)| f(x, y)).collect(),
        }
    }

    /// Sup norm over the rows `rows`.
    pub fn sup_norm_rows(&self, rows: std::ops::Range<usize>) -> f64 {
        rows.flat_map(|i| self.row(i).iter()).fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// One field restricted to a sphere, with the two pole traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereProfile {
    pub values: Vec<f64>,
    /// `(north, south)` traces at θ = 0 and θ = π.
    pub traces: (f64, f64),
}

impl SphereProfile {
    pub fn new(values: Vec<f64>, traces: (f64, f64)) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::InvalidParameter("a sphere profile needs at least 4 nodes".into()));
        }
        if !values.iter().all(|x| x.is_finite()) || !traces.0.is_finite() || !traces.1.is_finite() {
            return Err(Error::NonFinite("sphere profile".into()));
        }
        Ok(Self { values, traces })
    }

    pub fn from_fn(n_theta: usize, traces: (f64, f64), f: impl Fn(f64) -> f64) -> Self {
        let geo = SphereGeometry::new(n_theta);
        Self { values: geo.theta.iter().map(|&t| f(t)).collect(), traces }
    }
}

/// Dirichlet data on one end sphere: `Φ` and `v` profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPair {
    pub phi: Vec<f64>,
    pub v: SphereProfile,
}

impl BoundaryPair {
    pub fn lerp(&self, other: &Self, lambda: f64) -> Self {
        let mix = |x: f64, y: f64| (1.0 - lambda) * x + lambda * y;
        Self {
            phi: self.phi.iter().zip(&other.phi).map(|(&x, &y)| mix(x, y)).collect(),
            v: SphereProfile {
                values: self.v.values.iter().zip(&other.v.values).map(|(&x, &y)| mix(x, y)).collect(),
                traces: (mix(self.v.traces.0, other.v.traces.0), mix(self.v.traces.1, other.v.traces.1)),
            },
        }
    }
}
