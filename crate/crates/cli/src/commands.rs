use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use singmap::asymptotics::{fit_infinity, fit_tangent_with, line_fit, TangentFitOptions};
use singmap::closed_forms::{jacobi_fields, nhg_metric, TangentParams};
use singmap::cylinder::{residual, residual_norms, MapState};
use singmap::grid::{CylinderGrid, Field};
use singmap::reconstruction::{angle_defects, nhg_limit, reconstruct, AlphaGauge};
use singmap::solver::{continuation_solve, initial_guess, solve_dirichlet};
use singmap::spectral::{assemble_linearized, linearized_spectrum, twist_spectrum, weighted_cosine};

use crate::config::{RunConfig, SourceKind};
use crate::io::{field_csv, profiles_csv, to_json, StateFile};
use crate::{CliError, ExitCode};

/// What a command produced; `main` writes it under the output directory.
pub struct Outcome {
    pub results: Value,
    /// Relative path and contents.
    pub files: Vec<(String, Vec<u8>)>,
    pub inputs: Vec<PathBuf>,
    pub exit: ExitCode,
    pub message: String,
}

impl Outcome {
    fn ok(results: Value) -> Self {
        Self { results, files: Vec::new(), inputs: Vec::new(), exit: ExitCode::Ok, message: "ok".into() }
    }

    fn fail(mut self, exit: ExitCode, message: String) -> Self {
        self.exit = exit;
        self.message = message;
        self
    }

    fn field(&mut self, name: &str, grid: &CylinderGrid, f: &Field) {
        self.files.push((format!("fields/{name}.csv"), field_csv(grid, f)));
    }
}

/// Closed-form state of the configured source on `grid`.
fn sample(cfg: &RunConfig, grid: CylinderGrid) -> Result<MapState, CliError> {
    let renorm = cfg.renormalizer.build();
    Ok(match cfg.source.kind {
        SourceKind::Kerr => MapState::kerr(grid, renorm, cfg.source.kerr()?),
        SourceKind::Tangent => MapState::tangent(grid, renorm, cfg.source.tangent()?),
        SourceKind::Constant => {
            let z = Field::zeros(&grid);
            MapState::new(grid, renorm, z.clone(), z, (0.0, 0.0))?
        }
    })
}

/// The state a fitting command works on: the piped input if given,
/// otherwise the sampled source.
fn load_state(cfg: &RunConfig, out: &mut Vec<PathBuf>) -> Result<MapState, CliError> {
    match &cfg.input {
        Some(p) => {
            out.push(p.clone());
            StateFile::load(p)?.into_state()
        }
        None => sample(cfg, cfg.grid.build()?),
    }
}

/// Tangent parameters known in closed form for the source, if any.
fn ground_truth(cfg: &RunConfig) -> Result<Option<TangentParams>, CliError> {
    if cfg.input.is_some() {
        return Ok(None);
    }
    Ok(match cfg.source.kind {
        SourceKind::Kerr => Some(TangentParams::new(cfg.source.kerr()?.a(), 0.0)?),
        SourceKind::Tangent => Some(cfg.source.tangent()?),
        SourceKind::Constant => None,
    })
}

pub const MIN_ORDER: f64 = 1.8;

pub fn residual_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut rows = Vec::new();
    let (mut lh, mut lr) = (Vec::new(), Vec::new());
    let mut finest = None;
    for &n in &cfg.ladder {
        let grid = CylinderGrid::new(cfg.grid.t_min, cfg.grid.t_max, n, n)?;
        let s = sample(cfg, grid)?;
        let r = residual_norms(&s)?;
        let h = grid.dtheta();
        rows.push(json!({ "n": n, "h_theta": h, "h_t": grid.ht(), "residual_phi": r.phi, "residual_v": r.v, "residual": r.max() }));
        lh.push(h.ln());
        lr.push(r.max().max(f64::MIN_POSITIVE).ln());
        finest = Some(s);
    }
    let pairwise: Vec<f64> = lr.windows(2).zip(lh.windows(2)).map(|(r, h)| (r[0] - r[1]) / (h[0] - h[1])).collect();
    let fit = line_fit(&lh, &lr)?;
    let order = fit.slope;
    let mut o = Outcome::ok(json!({
        "source": cfg.source,
        "table": rows,
        "pairwise_orders": pairwise,
        "order": order,
        "order_r2": fit.r2,
        "min_order": MIN_ORDER,
    }));
    if let Some(s) = finest {
        let (rp, rv) = residual(&s)?;
        o.field("residual_phi", &s.grid, &rp);
        o.field("residual_v", &s.grid, &rv);
    }
    if !(order >= MIN_ORDER) {
        let msg = format!("convergence order {order:.3} below {MIN_ORDER}");
        return Ok(o.fail(ExitCode::Invariant, msg));
    }
    Ok(o)
}

/// `P_l(x)` by the three-term recurrence.
fn legendre(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

pub fn solve_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.source.kind == SourceKind::Constant {
        return Err(CliError::Config("solve needs a kerr or tangent source".into()));
    }
    let grid = cfg.grid.build()?;
    let renorm = cfg.renormalizer.build();
    let exact = sample(cfg, grid)?;
    let exact_lo = exact.slice(0);
    let bc_hi = exact.slice(grid.n_t - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weights: Vec<f64> = (0..cfg.perturb.modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut bc_lo = exact_lo.clone();
    if cfg.perturb.amplitude != 0.0 {
        for (j, x) in bc_lo.phi.iter_mut().enumerate() {
            let c = grid.theta(j).cos();
            *x += cfg.perturb.amplitude * weights.iter().enumerate().map(|(l, w)| w * legendre(l + 1, c)).sum::<f64>();
        }
    }
    let rep = if cfg.solver.continuation_steps > 1 {
        let steps = cfg.solver.continuation_steps;
        continuation_solve(grid, renorm, (&exact_lo, &bc_hi), (&bc_lo, &bc_hi), steps, Some(&exact), &cfg.solver)?
    } else {
        let init = initial_guess(grid, renorm.clone(), &bc_lo, &bc_hi)?;
        solve_dirichlet(grid, renorm, exact.a(), &bc_lo, &bc_hi, &init, &cfg.solver)?
    };
    let s = &rep.final_state;
    let err_phi = s.phi.zip_map(&exact.phi, |x, y| x - y);
    let err_v = s.v.zip_map(&exact.v, |x, y| x - y);
    let exact_data = cfg.perturb.amplitude == 0.0;
    let mut o = Outcome::ok(json!({
        "summary": rep.summary(),
        "perturbation_weights": weights,
        "closed_form_error": if exact_data { json!({ "phi": err_phi.sup_norm(), "v": err_v.sup_norm() }) } else { Value::Null },
        "quadratic_tail_ratio": rep.quadratic_tail_ratio(1e-2, 1e-13),
        "final_residual": residual_norms(s)?,
    }));
    o.field("phi", &grid, &s.phi);
    o.field("v", &grid, &s.v);
    if exact_data {
        o.field("error_phi", &grid, &err_phi);
        o.field("error_v", &grid, &err_v);
    }
    o.files.push(("state.json".into(), to_json(&StateFile::from_state(s, cfg.renormalizer))?));
    if !rep.converged {
        return Ok(o.fail(ExitCode::Solver, "Newton iteration did not converge".into()));
    }
    Ok(o)
}

pub fn spectrum_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sc = &cfg.spectrum;
    let n = sc.n_theta;
    let theta = singmap::grid::SphereGeometry::new(n).theta;
    if sc.twist {
        let rep = twist_spectrum(n, sc.k)?;
        let expected: Vec<f64> = (1..=sc.k).map(|l| (l * (l + 3)) as f64).collect();
        let rel: Vec<f64> = rep.eigenvalues.iter().zip(&expected).map(|(x, e)| (x - e).abs() / e).collect();
        let mut o = Outcome::ok(json!({
            "operator": "twist",
            "n_theta": n,
            "eigenvalues": rep.eigenvalues,
            "expected": expected,
            "relative_errors": rel,
            "residual_norms": rep.residual_norms,
            "iterations": rep.iterations,
        }));
        let names: Vec<String> = (1..=sc.k).map(|l| format!("mode_{l}")).collect();
        let cols: Vec<Vec<f64>> = rep.eigenfunctions.iter().map(|f| f[0].values.clone()).collect();
        o.files.push(("fields/eigenfunctions.csv".into(), profiles_csv(&theta, &names, &cols)));
        return Ok(o);
    }
    let p = cfg.source.tangent()?;
    let op = assemble_linearized(p, n, sc.azimuthal);
    let rep = linearized_spectrum(&op, sc.k)?;
    let kernel = rep.eigenfunctions.first().map(|f| {
        let x: Vec<f64> = (0..n).flat_map(|j| [f[0].values[j], f[1].values[j]]).collect();
        let jb = op.interleave(|t| jacobi_fields(p, t).phi_b.0, |t| jacobi_fields(p, t).phi_b.1);
        weighted_cosine(&x, &jb, &op.mass)
    });
    let mut o = Outcome::ok(json!({
        "operator": "linearized",
        "params": p,
        "azimuthal": sc.azimuthal,
        "n_theta": n,
        "eigenvalues": rep.eigenvalues,
        "kernel_alignment": kernel,
        "residual_norms": rep.residual_norms,
        "iterations": rep.iterations,
    }));
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for (k, f) in rep.eigenfunctions.iter().enumerate() {
        names.push(format!("phi1_{}", k + 1));
        names.push(format!("phi2_{}", k + 1));
        cols.push(f[0].values.clone());
        cols.push(f[1].values.clone());
    }
    o.files.push(("fields/eigenfunctions.csv".into(), profiles_csv(&theta, &names, &cols)));
    Ok(o)
}

pub fn tangent_fit_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut inputs = Vec::new();
    let s = load_state(cfg, &mut inputs)?;
    let opt = TangentFitOptions {
        window: cfg.fit.window,
        exclude: cfg.fit.exclude,
        min_slices: cfg.fit.min_slices,
        min_r2: cfg.fit.min_r2,
        ..Default::default()
    };
    let fit = fit_tangent_with(&s, &opt)?;
    let truth = ground_truth(cfg)?;
    let errors = truth.map(|t| json!({ "a": (fit.params.a - t.a).abs(), "b": (fit.params.b - t.b).abs() }));
    let mut o = Outcome::ok(json!({ "fit": fit, "ground_truth": truth, "errors": errors }));
    o.inputs = inputs;
    Ok(o)
}

pub fn infinity_fit_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut inputs = Vec::new();
    let s = load_state(cfg, &mut inputs)?;
    let fit = fit_infinity(&s)?;
    let mut o = Outcome::ok(json!({ "fit": fit }));
    o.inputs = inputs;
    Ok(o)
}

/// `b` for the defect prediction: closed form when known, else fitted.
fn defect_b(cfg: &RunConfig, s: &MapState) -> Result<f64, CliError> {
    match ground_truth(cfg)? {
        Some(p) => Ok(p.b),
        None => Ok(fit_tangent_with(s, &TangentFitOptions::default())?.params.b),
    }
}

pub fn reconstruct_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut inputs = Vec::new();
    let s = load_state(cfg, &mut inputs)?;
    let mf = reconstruct(&s, 0.0, AlphaGauge::NorthRod)?;
    let b = defect_b(cfg, &s)?;
    let d = angle_defects(&mf, b)?;
    let g = mf.grid;
    let mut o = Outcome::ok(json!({
        "w_reference": { "node": mf.reference, "value": mf.w_ref },
        "alpha_gauge": mf.alpha_gauge,
        "w_path_defect": mf.w_path_defect,
        "alpha_path_defect": mf.alpha_path_defect,
        "w_curl_sup": mf.w_curl.sup_norm(),
        "alpha_curl_sup": mf.alpha_curl.sup_norm(),
        "defects": d,
    }));
    o.inputs = inputs;
    o.field("u", &g, &mf.u);
    o.field("w", &g, &mf.w);
    o.field("alpha", &g, &mf.alpha);
    o.field("w_curl", &g, &mf.w_curl);
    o.field("alpha_curl", &g, &mf.alpha_curl);
    if d.flagged {
        let msg = format!("pole extrapolation spread {:.3e} flagged", d.extrapolation_spread);
        return Ok(o.fail(ExitCode::Fit, msg));
    }
    Ok(o)
}

pub fn nhg_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut inputs = Vec::new();
    let s = load_state(cfg, &mut inputs)?;
    let params = ground_truth(cfg)?;
    let rep = nhg_limit(&s, &cfg.epsilons, cfg.rbar, params)?;
    let mf = reconstruct(&s, 0.0, AlphaGauge::NorthRod)?;
    let d = angle_defects(&mf, rep.params.b)?;
    let names: Vec<String> = ["g_tt", "g_tphi", "g_phiphi", "g_rr", "g_thth"]
        .iter()
        .flat_map(|c| [c.to_string(), format!("{c}_exact")])
        .collect();
    let exact: Vec<[f64; 5]> = rep.theta.iter().map(|&t| nhg_metric(rep.params, cfg.rbar, t).as_array()).collect();
    let mut files = Vec::new();
    for (k, prof) in rep.profiles.iter().enumerate() {
        let mut cols = Vec::new();
        for c in 0..5 {
            cols.push(prof.iter().map(|p| p.as_array()[c]).collect());
            cols.push(exact.iter().map(|e| e[c]).collect());
        }
        files.push((format!("fields/nhg_eps_{k}.csv"), profiles_csv(&rep.theta, &names, &cols)));
    }
    let summary = json!({
        "params": rep.params,
        "rbar": rep.rbar,
        "epsilons": rep.epsilons,
        "distances": rep.distances,
        "monotone": rep.monotone,
        "omega": rep.omega,
        "w0": rep.w0,
        "w_slope": rep.w_slope,
        "alpha0": rep.alpha0,
    });
    let mut o = Outcome::ok(json!({ "nhg": summary, "defects": d }));
    o.files = files;
    o.inputs = inputs;
    Ok(o)
}
