//! Damped Newton for the Dirichlet problem on `[t_min, t_max] × S²`.
//!
//! The unknowns are `(Φ, v)` on the interior rows, interleaved per node with
//! `t` outer and `θ` inner, so the Jacobian is banded with half-bandwidth
//! `2n_θ + 1`. Jacobian entries come from dual numbers pushed through the
//! same stencil as [`crate::cylinder::residual`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::cylinder::{MapState, Renormalizer, Stencil};
use crate::dual::{Dual, Real};
use crate::error::{Error, Result};
use crate::grid::{BoundaryPair, CylinderGrid, Field};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub max_newton_iters: usize,
    /// Relative sup-norm target: stop once `‖R‖ ≤ tol·(1 + ‖R₀‖)`.
    pub residual_tol: f64,
    /// Backtracking factor in (0, 1).
    pub damping: f64,
    pub min_step: f64,
    pub continuation_steps: usize,
    /// Guard on `sup|Φ|`; defaults to `sup|Φ_bc| + 1`.
    pub lambda_guard: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_newton_iters: 40,
            residual_tol: 1e-10,
            damping: 0.5,
            min_step: 1e-8,
            continuation_steps: 1,
            lambda_guard: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.residual_tol > 0.0) {
            return bad("residual_tol must be positive");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad("damping must lie in (0, 1)");
        }
        if !(self.min_step > 0.0 && self.min_step < 1.0) {
            return bad("min_step must lie in (0, 1)");
        }
        if self.max_newton_iters == 0 || self.continuation_steps == 0 {
            return bad("iteration and continuation counts must be positive");
        }
        if matches!(self.lambda_guard, Some(l) if !(l > 0.0)) {
            return bad("lambda_guard must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub lambda: f64,
    pub iterations: usize,
    pub final_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// Sup norm of the interior residual before each Newton step and at exit.
    pub residual_history: Vec<f64>,
    pub step_lengths: Vec<f64>,
    pub converged: bool,
    pub final_state: MapState,
    /// One entry per continuation stage; a single stage for plain solves.
    pub stages: Vec<StageSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub step_lengths: Vec<f64>,
    pub converged: bool,
    pub stages: Vec<StageSummary>,
    pub sup_phi: f64,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            iterations: self.iterations,
            residual_history: self.residual_history.clone(),
            step_lengths: self.step_lengths.clone(),
            converged: self.converged,
            stages: self.stages.clone(),
            sup_phi: self.final_state.sup_phi(),
        }
    }

    /// `max r_{k+1}/r_k²` over steps that start below `below` and end above
    /// `floor`; the quadratic-convergence constant of the Newton tail.
    pub fn quadratic_tail_ratio(&self, below: f64, floor: f64) -> Option<f64> {
        let h = &self.residual_history;
        h.windows(2)
            .filter(|w| w[0] < below && w[1] > floor)
            .map(|w| w[1] / (w[0] * w[0]))
            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |y| y.max(x))))
    }
}

/// Harmonic interpolation of `Φ` in `t` (the kernel `A + B e^t` of
/// `∂²_t − ∂_t`) and linear blending of `v` between the two end profiles.
pub fn initial_guess(
    grid: CylinderGrid,
    renorm: Renormalizer,
    bc_lo: &BoundaryPair,
    bc_hi: &BoundaryPair,
) -> Result<MapState> {
    check_bc(&grid, bc_lo)?;
    check_bc(&grid, bc_hi)?;
    let span = grid.t_max - grid.t_min;
    let mut phi = Field::zeros(&grid);
    let mut v = Field::zeros(&grid);
    for i in 0..grid.n_t {
        let dt = grid.t(i) - grid.t_min;
        let wh = dt.exp_m1() / span.exp_m1();
        let wl = dt / span;
        for j in 0..grid.n_theta {
            phi.set(i, j, (1.0 - wh) * bc_lo.phi[j] + wh * bc_hi.phi[j]);
            v.set(i, j, (1.0 - wl) * bc_lo.v.values[j] + wl * bc_hi.v.values[j]);
        }
    }
    MapState::new(grid, renorm, phi, v, bc_lo.v.traces)
}

fn check_bc(grid: &CylinderGrid, bc: &BoundaryPair) -> Result<()> {
    if bc.phi.len() != grid.n_theta || bc.v.values.len() != grid.n_theta {
        return Err(Error::InvalidParameter("boundary profile length does not match n_theta".into()));
    }
    if !bc.phi.iter().chain(&bc.v.values).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("boundary data".into()));
    }
    Ok(())
}

struct Newton<'a> {
    st: Stencil,
    grid: &'a CylinderGrid,
}

impl Newton<'_> {
    fn unknowns(&self) -> usize {
        2 * (self.grid.n_t - 2) * self.grid.n_theta
    }

    fn residual(&self, s: &MapState) -> Vec<f64> {
        let n = self.grid.n_theta;
        let nt = self.grid.n_t;
        let mut out = vec![0.0; self.unknowns()];
        out.par_chunks_mut(2 * n).enumerate().for_each(|(r, chunk)| {
            let i = r + 1;
            for j in 0..n {
                let (a, b) = self.st.interior_node_f64(s, i, j);
                chunk[2 * j] = a;
                chunk[2 * j + 1] = b;
            }
        });
        debug_assert_eq!(out.len(), 2 * (nt - 2) * n);
        out
    }

    fn jacobian(&self, s: &MapState) -> BandMatrix {
        let n = self.grid.n_theta;
        let nt = self.grid.n_t;
        let bw = 2 * n + 1;
        let rows: Vec<Vec<(Dual, Dual)>> = (1..nt - 1)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let get = |f: &Field, ii: usize, jj: isize| {
                            if jj < 0 || jj >= n as isize {
                                0.0
                            } else {
                                f.get(ii, jj as usize)
                            }
                        };
                        let jj = j as isize;
                        let pos = [(i, jj), (i, jj - 1), (i, jj + 1), (i - 1, jj), (i + 1, jj)];
                        let mut phi = [Dual::cst(0.0); 5];
                        let mut v = [Dual::cst(0.0); 5];
                        for (k, &(ii, jk)) in pos.iter().enumerate() {
                            phi[k] = Dual::var(get(&s.phi, ii, jk), 2 * k);
                            v[k] = Dual::var(get(&s.v, ii, jk), 2 * k + 1);
                        }
                        self.st.node(i, j, phi, v)
                    })
                    .collect()
            })
            .collect();
        let m = self.unknowns();
        let mut jac = BandMatrix::zeros(m, bw, bw);
        for (r, row) in rows.iter().enumerate() {
            let i = r + 1;
            for (j, (rp, rv)) in row.iter().enumerate() {
                let k = r * n + j;
                let nbr: [Option<usize>; 5] = [
                    Some(k),
                    (j > 0).then(|| k - 1),
                    (j + 1 < n).then(|| k + 1),
                    (i > 1).then(|| k - n),
                    (i + 2 < nt).then(|| k + n),
                ];
                for (slot, col) in nbr.iter().enumerate() {
                    if let Some(c) = col {
                        for f in 0..2 {
                            let d0 = rp.d[2 * slot + f];
                            let d1 = rv.d[2 * slot + f];
                            if d0 != 0.0 {
                                jac.add(2 * k, 2 * c + f, d0);
                            }
                            if d1 != 0.0 {
                                jac.add(2 * k + 1, 2 * c + f, d1);
                            }
                        }
                    }
                }
            }
        }
        jac
    }
}

fn sup(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, y| if y.is_finite() { m.max(y.abs()) } else { f64::INFINITY })
}

fn apply_step(s: &MapState, dx: &[f64], lambda: f64) -> MapState {
    let mut out = s.clone();
    let n = s.grid.n_theta;
    for r in 0..s.grid.n_t - 2 {
        let i = r + 1;
        for j in 0..n {
            let k = r * n + j;
            out.phi.set(i, j, s.phi.get(i, j) - lambda * dx[2 * k]);
            out.v.set(i, j, s.v.get(i, j) - lambda * dx[2 * k + 1]);
        }
    }
    out
}

/// Newton solve with Dirichlet data on both end spheres. `a` must equal
/// half the jump between the pole traces carried by `bc_lo.v`.
pub fn solve_dirichlet(
    grid: CylinderGrid,
    renorm: Renormalizer,
    a: f64,
    bc_lo: &BoundaryPair,
    bc_hi: &BoundaryPair,
    init: &MapState,
    cfg: &SolveConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
    }
    check_bc(&grid, bc_lo)?;
    check_bc(&grid, bc_hi)?;
    let traces = bc_lo.v.traces;
    let tr_tol = 1e-12 * (1.0 + a);
    if (bc_hi.v.traces.0 - traces.0).abs() > tr_tol || (bc_hi.v.traces.1 - traces.1).abs() > tr_tol {
        return Err(Error::InvalidParameter("pole traces differ between the end spheres".into()));
    }
    if (0.5 * (traces.0 - traces.1) - a).abs() > tr_tol {
        return Err(Error::InvalidParameter(format!("pole traces {traces:?} are incompatible with a = {a}")));
    }
    if init.grid != grid {
        return Err(Error::InvalidParameter("initial state lives on a different grid".into()));
    }
    let mut x = MapState::new(grid, renorm.clone(), init.phi.clone(), init.v.clone(), traces)?;
    let last = grid.n_t - 1;
    x.phi.row_mut(0).copy_from_slice(&bc_lo.phi);
    x.phi.row_mut(last).copy_from_slice(&bc_hi.phi);
    x.v.row_mut(0).copy_from_slice(&bc_lo.v.values);
    x.v.row_mut(last).copy_from_slice(&bc_hi.v.values);
    let guard = cfg
        .lambda_guard
        .unwrap_or_else(|| bc_lo.phi.iter().chain(&bc_hi.phi).fold(0.0, |m: f64, p| m.max(p.abs())) + 1.0);

    let newton = Newton { st: Stencil::new(&grid, &renorm, traces), grid: &grid };
    let mut r = newton.residual(&x);
    let mut norm = sup(&r);
    if !norm.is_finite() {
        return Err(Error::NonFinite("initial residual".into()));
    }
    let target = cfg.residual_tol * (1.0 + norm);
    let mut history = vec![norm];
    let mut steps = Vec::new();
    let mut it = 0;
    while norm > target {
        if it == cfg.max_newton_iters {
            return Err(Error::NonConvergence { iterations: it, residual: norm });
        }
        let lu = newton.jacobian(&x).factor()?;
        let dx = lu.solve(&r);
        let mut lambda = 1.0;
        loop {
            let trial = apply_step(&x, &dx, lambda);
            let rt = newton.residual(&trial);
            let nt = sup(&rt);
            if nt.is_finite() && nt <= (1.0 - 1e-4 * lambda) * norm {
                x = trial;
                r = rt;
                norm = nt;
                break;
            }
            lambda *= cfg.damping;
            if lambda < cfg.min_step {
                return Err(Error::NonConvergence { iterations: it, residual: norm });
            }
        }
        it += 1;
        steps.push(lambda);
        history.push(norm);
    }
    let sup_phi = x.sup_phi();
    if sup_phi > guard {
        return Err(Error::BoundBreach { value: sup_phi, guard });
    }
    Ok(SolveReport {
        iterations: it,
        residual_history: history,
        step_lengths: steps,
        converged: true,
        final_state: x,
        stages: vec![StageSummary { lambda: 1.0, iterations: it, final_residual: norm }],
    })
}

/// Linear homotopy of the boundary data from `base` to `target` in `steps`
/// stages, warm-starting each Newton solve from the previous stage.
pub fn continuation_solve(
    grid: CylinderGrid,
    renorm: Renormalizer,
    base: (&BoundaryPair, &BoundaryPair),
    target: (&BoundaryPair, &BoundaryPair),
    steps: usize,
    init: Option<&MapState>,
    cfg: &SolveConfig,
) -> Result<SolveReport> {
    if steps == 0 {
        return Err(Error::InvalidParameter("continuation needs at least one step".into()));
    }
    let mut state = match init {
        Some(s) => s.clone(),
        None => initial_guess(grid, renorm.clone(), base.0, base.1)?,
    };
    let mut stages = Vec::with_capacity(steps);
    let mut report = None;
    for k in 1..=steps {
        let lambda = k as f64 / steps as f64;
        let lo = base.0.lerp(target.0, lambda);
        let hi = base.1.lerp(target.1, lambda);
        let a = 0.5 * (lo.v.traces.0 - lo.v.traces.1);
        let rep = solve_dirichlet(grid, renorm.clone(), a, &lo, &hi, &state, cfg)
            .map_err(|e| Error::Continuation { step: k, source: Box::new(e) })?;
        stages.push(StageSummary {
            lambda,
            iterations: rep.iterations,
            final_residual: *rep.residual_history.last().unwrap(),
        });
        state = rep.final_state.clone();
        report = Some(rep);
    }
    let mut rep = report.unwrap();
    rep.stages = stages;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::{KerrParams, TangentParams};

    #[test]
    fn jacobian_matches_finite_differences() {
        let grid = CylinderGrid::new(1.0, 2.0, 5, 6).unwrap();
        let p = KerrParams::new(1.0).unwrap();
        let mut s = MapState::kerr(grid, Renormalizer::TranslationInvariant, p);
        for (k, x) in s.v.values.iter_mut().enumerate() {
            *x += 0.01 * (k as f64).sin();
        }
        let newton = Newton { st: Stencil::new(&grid, &s.renorm, s.traces), grid: &grid };
        let jac = newton.jacobian(&s);
        let base = newton.residual(&s);
        let m = newton.unknowns();
        let h = 1e-6;
        for col in 0..m {
            let mut e = vec![0.0; m];
            e[col] = 1.0;
            let sp = apply_step(&s, &e, -h);
            let sm = apply_step(&s, &e, h);
            let rp = newton.residual(&sp);
            let rm = newton.residual(&sm);
            for row in 0..m {
                let fd = (rp[row] - rm[row]) / (2.0 * h);
                let scale = 1.0 + fd.abs() + base[row].abs();
                assert!((jac.get(row, col) - fd).abs() < 1e-5 * scale, "({row},{col}) {} vs {fd}", jac.get(row, col));
            }
        }
    }

    #[test]
    fn tangent_lift_is_a_fixed_point_up_to_discretization() {
        let p = TangentParams::new(1.0, 0.3).unwrap();
        let cfg = SolveConfig::default();
        let mut moves = Vec::new();
        for n in [16usize, 32] {
            let grid = CylinderGrid::new(0.0, 3.0, n + 1, n).unwrap();
            let s = MapState::tangent(grid, Renormalizer::TranslationInvariant, p);
            let rep = solve_dirichlet(grid, s.renorm.clone(), 1.0, &s.slice(0), &s.slice(n), &s, &cfg).unwrap();
            assert!(rep.iterations <= 3, "{:?}", rep.residual_history);
            moves.push(rep.final_state.phi.zip_map(&s.phi, |a, b| a - b).sup_norm());
            let again = solve_dirichlet(grid, s.renorm.clone(), 1.0, &s.slice(0), &s.slice(n), &rep.final_state, &cfg)
                .unwrap();
            assert_eq!(again.iterations, 0);
        }
        // the Newton correction is the O(h²) discretization error
        let order = (moves[0] / moves[1]).log2();
        assert!((order - 2.0).abs() < 0.3, "{moves:?}");
    }
}
