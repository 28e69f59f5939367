//! Fits of the asymptotic structure of a state: the tangent map and decay
//! rate at a puncture (`t → +∞`), and the spherical-harmonic and twist
//! expansions at infinity (`t → −∞`, renormalizer `ω = ρ`).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::closed_forms::{regular_distance, tangent_regular, v0_profile, TangentParams};
use crate::cylinder::{MapState, RenormalizerKind};
use crate::error::{Error, Result};
use crate::grid::SphereGeometry;
use crate::spectral::twist_mode;

/// Least squares `y ≈ Σ c_k X_k` with columns rescaled to unit sup norm.
/// Returns the coefficients and the rms residual.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    let k = columns.len();
    if n < k || k == 0 {
        return Err(Error::FitUnstable(format!("{n} samples for {k} unknowns")));
    }
    let scale: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect();
    if scale.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::FitUnstable("design column vanishes on the sample".into()));
    }
    let a = DMatrix::from_fn(n, k, |i, j| columns[j][i] / scale[j]);
    let qr = a.clone().qr();
    let r = qr.r();
    let rmax = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-12 * rmax) {
        return Err(Error::FitUnstable("rank-deficient design".into()));
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let c = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::FitUnstable("triangular solve failed".into()))?;
    let res = (&a * &c - DVector::from_column_slice(y)).norm() / (n as f64).sqrt();
    Ok(((0..k).map(|j| c[j] / scale[j]).collect(), res))
}

/// Ordinary least squares `y = intercept + slope·x` with its `r²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len() as f64;
    if x.len() < 3 || x.len() != y.len() {
        return Err(Error::FitUnstable("line fit needs at least 3 matching samples".into()));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::FitUnstable("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LineFit { slope, intercept: my - slope * mx, r2 })
}

/// Projection of a sampled profile onto a finite basis in a diagonal
/// inner product, through an orthonormalized copy of the basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProjection {
    /// Coefficients in the original (non-orthonormal) basis.
    pub coefficients: Vec<f64>,
    /// Coordinates in the orthonormalized basis.
    pub amplitudes: Vec<f64>,
    /// `‖f − Σ c_k e_k‖²`.
    pub remainder: f64,
    /// `‖f‖²`.
    pub norm2: f64,
}

impl ModeProjection {
    /// `|Σ amplitudes² + remainder − ‖f‖²| / ‖f‖²`.
    pub fn parseval_defect(&self) -> f64 {
        let s: f64 = self.amplitudes.iter().map(|a| a * a).sum();
        (s + self.remainder - self.norm2).abs() / self.norm2.max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone)]
pub struct WeightedBasis {
    weights: Vec<f64>,
    basis: Vec<Vec<f64>>,
    /// Orthonormal vectors in the scaled space `√w·e`.
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl WeightedBasis {
    pub fn new(weights: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self> {
        let n = weights.len();
        let k = basis.len();
        let a = DMatrix::from_fn(n, k, |i, j| weights[i].sqrt() * basis[j][i]);
        let qr = a.qr();
        let (q, r) = (qr.q(), qr.r());
        if (0..k).any(|i| r[(i, i)].abs() < 1e-12) {
            return Err(Error::FitUnstable("basis is numerically dependent on this grid".into()));
        }
        Ok(Self { weights, basis, q, r })
    }

    pub fn project(&self, f: &[f64]) -> ModeProjection {
        let sf = DVector::from_iterator(f.len(), f.iter().zip(&self.weights).map(|(x, w)| x * w.sqrt()));
        let amp = self.q.transpose() * &sf;
        let c = self.r.solve_upper_triangular(&amp).expect("checked at construction");
        let mut remainder = 0.0;
        for (i, (x, w)) in f.iter().zip(&self.weights).enumerate() {
            let fit: f64 = self.basis.iter().zip(c.iter()).map(|(e, ck)| ck * e[i]).sum();
            remainder += w * (x - fit).powi(2);
        }
        ModeProjection {
            coefficients: c.iter().copied().collect(),
            amplitudes: amp.iter().copied().collect(),
            remainder,
            norm2: f.iter().zip(&self.weights).map(|(x, w)| w * x * x).sum(),
        }
    }
}

// ---------------------------------------------------------------------------
// tangent map at a puncture

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentFitOptions {
    /// Rate-fit window; the whole grid when absent.
    pub window: Option<(f64, f64)>,
    /// Slices dropped next to each end of the grid.
    pub exclude: usize,
    pub min_slices: usize,
    pub min_r2: f64,
    /// Distances below this are treated as roundoff.
    pub floor: f64,
}

impl Default for TangentFitOptions {
    fn default() -> Self {
        Self { window: None, exclude: 2, min_slices: 10, min_r2: 0.99, floor: 1e-11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentFit {
    pub params: TangentParams,
    /// `v` is compared after removing this constant, `(v_N + v_S)/2`.
    pub gauge_offset: f64,
    /// Decay exponent of the per-slice sup-distance; absent when the state
    /// already coincides with the fitted tangent map.
    pub beta: Option<f64>,
    pub r2: Option<f64>,
    pub fit_window: (f64, f64),
    pub slices_used: usize,
    pub t: Vec<f64>,
    /// Per-slice sup over θ of the hyperbolic distance to the fitted map.
    pub residuals: Vec<f64>,
    pub note: Option<String>,
}

fn slice_distances(s: &MapState, p: TangentParams, offset: f64, i: usize, out: &mut [f64]) {
    let g = &s.grid;
    for (j, d) in out.iter_mut().enumerate() {
        let th = g.theta(j);
        let psi = s.phi.get(i, j) - s.renorm.g(g.t(i), th);
        *d = regular_distance(th, (psi, s.v.get(i, j) - offset), tangent_regular(p, th));
    }
}

fn l2_objective(s: &MapState, geo: &SphereGeometry, a: f64, offset: f64, rows: &[usize], b: f64) -> f64 {
    let p = TangentParams { a, b };
    let mut d = vec![0.0; geo.n];
    let mut total = 0.0;
    for &i in rows {
        slice_distances(s, p, offset, i, &mut d);
        total += d.iter().zip(&geo.s).map(|(x, w)| w * x * x).sum::<f64>();
    }
    total * geo.dtheta
}

/// Golden-section minimization on `[lo, hi]`; near-ties keep the half
/// closer to zero.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        let left = f1 < f2 || (f1 == f2 && x1.abs() <= x2.abs());
        if left {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

const B_SEARCH: f64 = 1.0 - 1e-6;

pub fn fit_tangent(s: &MapState) -> Result<TangentFit> {
    fit_tangent_with(s, &TangentFitOptions::default())
}

pub fn fit_tangent_with(s: &MapState, opt: &TangentFitOptions) -> Result<TangentFit> {
    if s.renorm.kind() != RenormalizerKind::TranslationInvariant {
        return Err(Error::Hypothesis("tangent fit expects the translation-invariant renormalizer".into()));
    }
    let g = s.grid;
    if g.t_max - g.t_min < 3.0 {
        return Err(Error::Hypothesis("tangent fit needs at least 3 e-folds in t".into()));
    }
    let a = s.a();
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::FitUnstable(format!("pole traces {:?} do not give a positive jump", s.traces)));
    }
    let offset = 0.5 * (s.traces.0 + s.traces.1);
    let geo = g.sphere();
    let last = g.n_t - 1;
    let b0 = golden(|b| l2_objective(s, &geo, a, offset, &[last], b), -B_SEARCH, B_SEARCH, 1e-13);
    let efold: Vec<usize> = (0..g.n_t).filter(|&i| g.t(i) >= g.t_max - 1.0 - 1e-12).collect();
    let b = golden(
        |b| l2_objective(s, &geo, a, offset, &efold, b),
        (b0 - 0.05).max(-B_SEARCH),
        (b0 + 0.05).min(B_SEARCH),
        1e-13,
    );
    let params = TangentParams::new(a, b)?;

    let mut d = vec![0.0; geo.n];
    let residuals: Vec<f64> = (0..g.n_t)
        .map(|i| {
            slice_distances(s, params, offset, i, &mut d);
            d.iter().fold(0.0f64, |m, x| m.max(*x))
        })
        .collect();
    let (w0, w1) = opt.window.unwrap_or((g.t_min, g.t_max));
    let rows: Vec<usize> = (opt.exclude..g.n_t.saturating_sub(opt.exclude))
        .filter(|&i| g.t(i) >= w0 - 1e-12 && g.t(i) <= w1 + 1e-12)
        .collect();
    let mut fit = TangentFit {
        params,
        gauge_offset: offset,
        beta: None,
        r2: None,
        fit_window: (w0, w1),
        slices_used: 0,
        t: g.ts(),
        residuals,
        note: None,
    };
    let usable: Vec<usize> = rows.iter().copied().filter(|&i| fit.residuals[i] > opt.floor).collect();
    if usable.is_empty() && !rows.is_empty() {
        fit.note = Some("state coincides with the fitted tangent map; decay rate not reportable".into());
        return Ok(fit);
    }
    if usable.len() < opt.min_slices {
        return Err(Error::FitUnstable(format!(
            "{} slices above the roundoff floor, {} required",
            usable.len(),
            opt.min_slices
        )));
    }
    let x: Vec<f64> = usable.iter().map(|&i| g.t(i)).collect();
    let y: Vec<f64> = usable.iter().map(|&i| fit.residuals[i].ln()).collect();
    let line = line_fit(&x, &y)?;
    if line.r2 < opt.min_r2 {
        return Err(Error::FitUnstable(format!("log-linear decay fit has r2 = {:.4}", line.r2)));
    }
    fit.beta = Some(-line.slope);
    fit.r2 = Some(line.r2);
    fit.slices_used = usable.len();
    Ok(fit)
}

// ---------------------------------------------------------------------------
// expansion at infinity

/// Slice indices used by the far-field fits, two dropped at each end.
fn far_rows(s: &MapState) -> Result<Vec<usize>> {
    if s.renorm.kind() != RenormalizerKind::LinearGrowth {
        return Err(Error::Hypothesis("far-field fits expect the renormalizer omega = rho".into()));
    }
    let rows: Vec<usize> = (2..s.grid.n_t.saturating_sub(2)).collect();
    if rows.len() < 6 {
        return Err(Error::FitUnstable("too few slices for a far-field fit".into()));
    }
    Ok(rows)
}

fn legendre(l: usize, x: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => x,
        _ => 1.5 * x * x - 0.5,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFit {
    /// Coefficient of the leading power `e^{(i+1)t} = r^{−(i+1)}`.
    pub leading: f64,
    /// Coefficient of the `e^{4t}` column that absorbs higher orders.
    pub nuisance: f64,
    /// Free log-linear exponent of the mode after removing the constant and
    /// nuisance parts; absent for a mode that vanishes on the data.
    pub exponent: Option<f64>,
    pub exponent_r2: Option<f64>,
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfinityUFit {
    pub c0: f64,
    /// Coefficients of `r⁻¹P₀`, `r⁻²P₁`, `r⁻³P₂`.
    pub y0: f64,
    pub y1: f64,
    pub y2: f64,
    pub modes: Vec<ModeFit>,
    pub t: Vec<f64>,
    /// Per-slice Legendre coefficients `[P₀, P₁, P₂]`.
    pub amplitudes: Vec<[f64; 3]>,
    pub max_parseval_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfinityVFit {
    pub a_twist: f64,
    pub gauge_offset: f64,
    /// Coefficient of `r⁻¹ sin⁴θ`.
    pub c2: f64,
    pub c2_rms_residual: f64,
    /// Log-linear decay exponent of the remainder after the `c₂` term.
    pub tail_exponent: Option<f64>,
    pub tail_r2: Option<f64>,
    pub t: Vec<f64>,
    /// Per-slice twist-mode coefficients, `sin⁴θ` normalization for the first.
    pub amplitudes: Vec<Vec<f64>>,
    pub max_parseval_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfinityFit {
    pub u: InfinityUFit,
    pub v: InfinityVFit,
}

const NEGLIGIBLE: f64 = 1e-11;

fn exponent_of(ts: &[f64], signal: &[f64]) -> Option<LineFit> {
    let peak = signal.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak < NEGLIGIBLE {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(signal)
        .filter(|(_, s)| s.abs() > 1e-6 * peak)
        .map(|(t, s)| (*t, s.abs().ln()))
        .unzip();
    line_fit(&x, &y).ok()
}

/// `Φ(t) ≈ c₀ + Σ_i Y_i e^{(i+1)t} P_i(cos θ)` for `i = 0, 1, 2`.
pub fn fit_infinity_u(s: &MapState) -> Result<InfinityUFit> {
    let rows = far_rows(s)?;
    let g = s.grid;
    let geo = g.sphere();
    let weights: Vec<f64> = geo.s.iter().map(|x| x * geo.dtheta).collect();
    let basis = (0..3).map(|l| geo.cos.iter().map(|&c| legendre(l, c)).collect()).collect();
    let wb = WeightedBasis::new(weights, basis)?;
    let ts: Vec<f64> = rows.iter().map(|&i| g.t(i)).collect();
    let mut amplitudes = Vec::with_capacity(rows.len());
    let mut parseval = 0.0f64;
    for &i in &rows {
        let pr = wb.project(s.phi.row(i));
        parseval = parseval.max(pr.parseval_defect());
        amplitudes.push([pr.coefficients[0], pr.coefficients[1], pr.coefficients[2]]);
    }
    let e = |k: f64| -> Vec<f64> { ts.iter().map(|t| (k * t).exp()).collect() };
    let mut modes = Vec::new();
    let mut c0 = 0.0;
    for l in 0..3 {
        let y: Vec<f64> = amplitudes.iter().map(|a| a[l]).collect();
        let lead = (l + 1) as f64;
        let mut cols = vec![e(lead), e(4.0)];
        if l == 0 {
            cols.insert(0, vec![1.0; ts.len()]);
        }
        let (c, rms) = least_squares(&cols, &y)?;
        let (constant, leading, nuisance) = if l == 0 { (c[0], c[1], c[2]) } else { (0.0, c[0], c[1]) };
        if l == 0 {
            c0 = constant;
        }
        let signal: Vec<f64> = y
            .iter()
            .zip(&ts)
            .map(|(a, t)| a - constant - nuisance * (4.0 * t).exp())
            .collect();
        let line = exponent_of(&ts, &signal);
        modes.push(ModeFit {
            leading,
            nuisance,
            exponent: line.map(|l| l.slope),
            exponent_r2: line.map(|l| l.r2),
            rms_residual: rms,
        });
    }
    Ok(InfinityUFit {
        c0,
        y0: modes[0].leading,
        y1: modes[1].leading,
        y2: modes[2].leading,
        modes,
        t: ts,
        amplitudes,
        max_parseval_defect: parseval,
    })
}

/// Number of twist modes in the far-field projection of `v`.
pub const TWIST_MODES: usize = 4;

/// `v(t) ≈ v₀ + c₂ e^t sin⁴θ + …` after removing the gauge offset.
pub fn fit_infinity_v(s: &MapState) -> Result<InfinityVFit> {
    let rows = far_rows(s)?;
    let g = s.grid;
    let geo = g.sphere();
    let a = s.a();
    if !(a > 0.0) {
        return Err(Error::FitUnstable(format!("pole traces {:?} do not give a positive jump", s.traces)));
    }
    let offset = 0.5 * (s.traces.0 + s.traces.1);
    let weights: Vec<f64> = geo.s.iter().map(|x| geo.dtheta / x.powi(3)).collect();
    // mode 1 is sin⁴θ itself; higher modes sin²θ P²_{ℓ+1}
    let basis = (1..=TWIST_MODES)
        .map(|l| {
            geo.theta
                .iter()
                .map(|&th| if l == 1 { th.sin().powi(4) } else { twist_mode(l, th) })
                .collect()
        })
        .collect();
    let wb = WeightedBasis::new(weights.clone(), basis)?;
    let ts: Vec<f64> = rows.iter().map(|&i| g.t(i)).collect();
    let mut amplitudes = Vec::with_capacity(rows.len());
    let mut parseval = 0.0f64;
    let mut devs = Vec::with_capacity(rows.len());
    for &i in &rows {
        let dev: Vec<f64> = s
            .v
            .row(i)
            .iter()
            .zip(&geo.theta)
            .map(|(v, &th)| v - offset - v0_profile(a, th))
            .collect();
        let pr = wb.project(&dev);
        parseval = parseval.max(pr.parseval_defect());
        amplitudes.push(pr.coefficients.clone());
        devs.push(dev);
    }
    let y: Vec<f64> = amplitudes.iter().map(|c| c[0]).collect();
    let e = |k: f64| -> Vec<f64> { ts.iter().map(|t| (k * t).exp()).collect() };
    let (c, rms) = least_squares(&[e(1.0), e(2.0)], &y)?;
    let c2 = c[0];
    let tail: Vec<f64> = devs
        .iter()
        .zip(&ts)
        .map(|(dev, t)| {
            let et = t.exp();
            dev.iter()
                .zip(&geo.theta)
                .zip(&weights)
                .map(|((d, th), w)| w * (d - c2 * et * th.sin().powi(4)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let line = exponent_of(&ts, &tail);
    Ok(InfinityVFit {
        a_twist: a,
        gauge_offset: offset,
        c2,
        c2_rms_residual: rms,
        tail_exponent: line.map(|l| l.slope),
        tail_r2: line.map(|l| l.r2),
        t: ts,
        amplitudes,
        max_parseval_defect: parseval,
    })
}

pub fn fit_infinity(s: &MapState) -> Result<InfinityFit> {
    Ok(InfinityFit { u: fit_infinity_u(s)?, v: fit_infinity_v(s)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::KerrParams;
    use crate::cylinder::Renormalizer;
    use crate::grid::{CylinderGrid, Field};

    #[test]
    fn least_squares_recovers_exact_coefficients() {
        let t: Vec<f64> = (0..20).map(|i| -6.0 + 0.2 * i as f64).collect();
        let cols: Vec<Vec<f64>> = [0.0, 1.0, 4.0].iter().map(|k| t.iter().map(|x| (k * x).exp()).collect()).collect();
        let y: Vec<f64> = t.iter().map(|x| 0.5 - 2.0 * x.exp() + 9.0 * (4.0 * x).exp()).collect();
        let (c, rms) = least_squares(&cols, &y).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-11 && (c[2] - 9.0).abs() < 1e-7);
        assert!(rms < 1e-14);
        assert!(least_squares(&[cols[1].clone(), cols[1].clone()], &y).is_err());
    }

    #[test]
    fn weighted_projection_satisfies_parseval() {
        let geo = SphereGeometry::new(40);
        let w: Vec<f64> = geo.s.iter().map(|s| s * geo.dtheta).collect();
        let basis = (0..3).map(|l| geo.cos.iter().map(|&c| legendre(l, c)).collect()).collect();
        let wb = WeightedBasis::new(w, basis).unwrap();
        let f: Vec<f64> = geo.theta.iter().map(|t| (3.0 * t).sin() + t.cos().powi(3)).collect();
        let pr = wb.project(&f);
        assert!(pr.parseval_defect() < 1e-12);
        assert!(pr.remainder > 1e-3);
    }

    #[test]
    fn tangent_fit_is_idempotent_on_the_family() {
        let g = CylinderGrid::new(0.0, 3.0, 7, 24).unwrap();
        for a in [0.5, 1.0, 1.5, 2.0, 3.0] {
            for b in [-0.8, -0.4, 0.0, 0.4, 0.8] {
                let p = TangentParams::new(a, b).unwrap();
                let f = fit_tangent(&MapState::tangent(g, Renormalizer::TranslationInvariant, p)).unwrap();
                assert!((f.params.a - a).abs() < 1e-8 && (f.params.b - b).abs() < 1e-8, "({a},{b}) -> {:?}", f.params);
                assert!(f.beta.is_none() && f.note.is_some());
            }
        }
    }

    #[test]
    fn tangent_fit_of_extreme_kerr() {
        let g = CylinderGrid::new(2.0, 10.0, 41, 48).unwrap();
        let s = MapState::kerr(g, Renormalizer::TranslationInvariant, KerrParams::new(1.0).unwrap());
        let f = fit_tangent(&s).unwrap();
        assert!((f.params.a - 2.0).abs() < 1e-3 && f.params.b.abs() < 1e-3);
        let beta = f.beta.unwrap();
        assert!(beta > 0.0 && f.r2.unwrap() >= 0.99);
        // the Kerr correction is O(r), so the rate is 1
        assert!((beta - 1.0).abs() < 0.05, "{beta}");
    }

    #[test]
    fn tangent_fit_rejects_bad_inputs() {
        let g = CylinderGrid::new(0.0, 4.0, 9, 16).unwrap();
        let p = TangentParams::new(1.0, 0.2).unwrap();
        assert!(matches!(fit_tangent(&MapState::tangent(g, Renormalizer::LinearGrowth, p)), Err(Error::Hypothesis(_))));
        let mut s = MapState::tangent(g, Renormalizer::TranslationInvariant, p);
        s.traces = (-1.0, 1.0);
        assert!(matches!(fit_tangent(&s), Err(Error::FitUnstable(_))));
        let short = CylinderGrid::new(0.0, 2.0, 9, 16).unwrap();
        assert!(fit_tangent(&MapState::tangent(short, Renormalizer::TranslationInvariant, p)).is_err());
    }

    fn far_grid() -> CylinderGrid {
        CylinderGrid::new(-(1000f64).ln(), -(10f64).ln(), 49, 96).unwrap()
    }

    fn synthetic(phi: impl Fn(f64, f64) -> f64, v: impl Fn(f64, f64) -> f64, a: f64) -> MapState {
        let g = far_grid();
        MapState::new(g, Renormalizer::LinearGrowth, Field::from_fn(&g, phi), Field::from_fn(&g, v), (a, -a)).unwrap()
    }

    #[test]
    fn far_field_of_constant_and_synthetic_states() {
        let v0 = |_: f64, th: f64| v0_profile(1.0, th);
        let c = synthetic(|_, _| 0.75, v0, 1.0);
        let u = fit_infinity_u(&c).unwrap();
        assert!((u.c0 - 0.75).abs() < 1e-12);
        assert!(u.y0.abs() < 1e-10 && u.y1.abs() < 1e-10 && u.y2.abs() < 1e-10);
        let vf = fit_infinity_v(&c).unwrap();
        assert!(vf.c2.abs() < 1e-12 && vf.amplitudes.iter().flatten().all(|x| x.abs() < 1e-12));
        assert!(vf.tail_exponent.is_none());

        let s = synthetic(|t, th| 3.0 + 5.0 * (2.0 * t).exp() * th.cos(), v0, 1.0);
        let u = fit_infinity_u(&s).unwrap();
        assert!((u.c0 - 3.0).abs() < 1e-8 && (u.y1 - 5.0).abs() < 1e-8);
        assert!(u.y0.abs() < 1e-8 && u.y2.abs() < 1e-8);
        assert!((u.modes[1].exponent.unwrap() - 2.0).abs() < 1e-8);

        let s = synthetic(|_, _| 0.0, |t, th| v0_profile(1.5, th) + 7.0 * t.exp() * th.sin().powi(4), 1.5);
        let vf = fit_infinity_v(&s).unwrap();
        assert!((vf.c2 - 7.0).abs() < 1e-8, "{}", vf.c2);
    }

    #[test]
    fn far_field_of_extreme_kerr() {
        for m in [1.0, 0.8] {
            let s = MapState::kerr(far_grid(), Renormalizer::LinearGrowth, KerrParams::new(m).unwrap());
            let f = fit_infinity(&s).unwrap();
            assert!(f.u.c0.abs() < 1e-3 && (f.u.y0 + m).abs() < 1e-3, "{:?}", (f.u.c0, f.u.y0));
            assert!((f.v.a_twist - 2.0 * m * m).abs() < 1e-3 && f.v.c2.abs() < 1e-3);
            // Φ is even in cos θ, and v − v₀ is odd
            assert!(f.u.y1.abs() < 1e-12 && f.u.modes[1].exponent.is_none());
            let e0 = f.u.modes[0].exponent.unwrap();
            let e2 = f.u.modes[2].exponent.unwrap();
            assert!((e0 - 1.0).abs() < 0.05 && (e2 - 3.0).abs() < 0.05, "{e0} {e2}");
            assert!((f.v.tail_exponent.unwrap() - 2.0).abs() < 0.05);
            assert!(f.u.max_parseval_defect < 1e-10 && f.v.max_parseval_defect < 1e-10);
        }
    }

    #[test]
    fn far_field_requires_linear_growth() {
        let g = far_grid();
        let s = MapState::kerr(g, Renormalizer::TranslationInvariant, KerrParams::new(1.0).unwrap());
        assert!(matches!(fit_infinity_u(&s), Err(Error::Hypothesis(_))));
        assert!(matches!(fit_infinity_v(&s), Err(Error::Hypothesis(_))));
    }
}
