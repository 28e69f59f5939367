//! One PASS/FAIL line per acceptance criterion. Criteria listed in
//! `KNOWN_RED` are reported but do not fail the run; see the README.

use std::f64::consts::PI;
use std::time::Instant;

use singmap::asymptotics::{fit_infinity, fit_tangent, fit_tangent_with, TangentFitOptions};
use singmap::closed_forms::{first_integrals, jacobi_fields, tangent_regular, KerrParams, TangentParams};
use singmap::cylinder::{energy_identity_check, monotonicity_check, residual_norms, MapState, Renormalizer};
use singmap::grid::{CylinderGrid, Field};
use singmap::reconstruction::{angle_defects, nhg_limit, reconstruct, AlphaGauge};
use singmap::solver::{initial_guess, solve_dirichlet, SolveConfig};
use singmap::spectral::{assemble_linearized, assemble_twist, linearized_spectrum, twist_spectrum, weighted_cosine};

const KNOWN_RED: &[usize] = &[10];

type Outcome = (bool, String);

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn c1_residual_convergence() -> Outcome {
    let start = Instant::now();
    let mut states: Vec<(String, Box<dyn Fn(CylinderGrid) -> MapState>)> = vec![(
        "kerr m=1".into(),
        Box::new(move |g| MapState::kerr(g, Renormalizer::TranslationInvariant, KerrParams::new(1.0).unwrap())),
    )];
    for (a, b) in [(1.0, 0.0), (1.0, 0.5), (2.0, -0.7)] {
        let p = TangentParams::new(a, b).unwrap();
        states.push((format!("tangent ({a},{b})"), Box::new(move |g| MapState::tangent(g, Renormalizer::TranslationInvariant, p))));
    }
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, make) in &states {
        let r: Vec<f64> = [64usize, 128, 256]
            .iter()
            .map(|&n| residual_norms(&make(CylinderGrid::new(2.0, 8.0, n, n).unwrap())).unwrap().max())
            .collect();
        let o = [order(r[0], r[1]), order(r[1], r[2])];
        ok &= o.iter().all(|x| (x - 2.0).abs() <= 0.2);
        detail.push(format!("{name}: {:.3}/{:.3}", o[0], o[1]));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 30.0;
    (ok, format!("orders {}; {secs:.2} s", detail.join(", ")))
}

fn c2_first_integrals() -> Outcome {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    let params = [(0.5, -0.8), (1.0, 0.0), (1.0, 0.5), (2.0, -0.7), (3.0, 0.9)];
    for (a, b) in params {
        let p = TangentParams::new(a, b).unwrap();
        for k in 0..200 {
            let th = PI * (k as f64 + 0.5) / 200.0;
            let f = first_integrals(p, th);
            worst.0 = worst.0.max(f.c1.abs());
            worst.1 = worst.1.max((f.flux + 0.5 / a).abs());
            worst.2 = worst.2.max((f.orbit - a * a).abs());
            count += 1;
        }
    }
    let ok = count >= 1000 && worst.0 <= 1e-10 && worst.1 <= 1e-10 && worst.2 <= 1e-10;
    (ok, format!("{count} points: |c1| {:.1e}, |c2 + 1/(2a)| {:.1e}, |orbit - a^2| {:.1e}", worst.0, worst.1, worst.2))
}

fn c3_twist_spectrum() -> Outcome {
    let exact: Vec<f64> = (1..=5).map(|l| (l * (l + 3)) as f64).collect();
    let reps: Vec<_> = [128usize, 256, 512].iter().map(|&n| twist_spectrum(n, 5).unwrap()).collect();
    let fine = &reps[2];
    let rel = fine.eigenvalues.iter().zip(&exact).map(|(x, e)| (x - e).abs() / e).fold(0.0, f64::max);
    let mut min_order = f64::INFINITY;
    for l in 0..5 {
        let e: Vec<f64> = reps.iter().map(|r| (r.eigenvalues[l] - exact[l]).abs()).collect();
        min_order = min_order.min(order(e[0], e[1])).min(order(e[1], e[2]));
    }
    let (_, mass) = assemble_twist(512);
    let s4: Vec<f64> = (0..512).map(|j| (PI * (j as f64 + 0.5) / 512.0).sin().powi(4)).collect();
    let cos = weighted_cosine(&fine.eigenfunctions[0][0].values, &s4, &mass);
    let ok = rel <= 5e-3 && min_order > 1.8 && cos >= 1.0 - 1e-6;
    let vals: Vec<String> = fine.eigenvalues.iter().map(|x| format!("{x:.4}")).collect();
    (ok, format!("mu = [{}], max rel err {rel:.2e}, min order {min_order:.3}, cos(sin^4) 1-{:.1e}", vals.join(", "), 1.0 - cos))
}

fn c4_linearized_kernel() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (a, b) in [(1.0, 0.0), (1.0, 0.5), (2.0, -0.7)] {
        let p = TangentParams::new(a, b).unwrap();
        let mut mu = Vec::new();
        for n in [256usize, 512] {
            let op = assemble_linearized(p, n, 0);
            let rep = linearized_spectrum(&op, 2).unwrap();
            let x: Vec<f64> =
                (0..n).flat_map(|j| [rep.eigenfunctions[0][0].values[j], rep.eigenfunctions[0][1].values[j]]).collect();
            let jb = op.interleave(|t| jacobi_fields(p, t).phi_b.0, |t| jacobi_fields(p, t).phi_b.1);
            let cos = weighted_cosine(&x, &jb, &op.mass);
            mu.push((rep.eigenvalues[0], rep.eigenvalues[1], cos));
        }
        let o = order(mu[0].0.abs(), mu[1].0.abs());
        let gap_drift = (mu[0].1 - mu[1].1).abs();
        ok &= mu[1].0.abs() < 1e-3 && o > 1.8 && mu[1].1 > 1.5 && gap_drift < 1e-2 && mu[1].2 >= 1.0 - 1e-6;
        detail.push(format!(
            "({a},{b}): mu1 {:.1e} (order {o:.2}), mu2 {:.4}, cos 1-{:.1e}",
            mu[1].0,
            mu[1].1,
            1.0 - mu[1].2
        ));
    }
    (ok, detail.join("; "))
}

fn c5_energy_identities() -> Outcome {
    let kerr = |n: usize| {
        let g = CylinderGrid::new(2.0, 8.0, 2 * n + 1, n).unwrap();
        MapState::kerr(g, Renormalizer::TranslationInvariant, KerrParams::new(1.0).unwrap())
    };
    let defects = |s: &MapState| (monotonicity_check(s).unwrap().interior_drift(), energy_identity_check(s, 3.0).unwrap());
    let d: Vec<(f64, f64)> = [32usize, 64, 128].iter().map(|&n| defects(&kerr(n))).collect();
    let om = order(d[1].0, d[2].0);
    let oi = order(d[1].1, d[2].1);
    let s = kerr(128);
    let mut p = s.clone();
    p.phi = Field::from_fn(&s.grid, |t, th| {
        let c = th.cos();
        0.3 * (-(t - 5.0) * (t - 5.0)).exp() * (1.5 * c * c - 0.5)
    })
    .zip_map(&s.phi, |x, y| x + y);
    let dp = defects(&p);
    let ratio = ((dp.0 / d[2].0), (dp.1 / d[2].1));
    let ok = om > 1.8 && oi > 1.8 && ratio.0 >= 1e3 && ratio.1 >= 1e3;
    (
        ok,
        format!(
            "exact drift {:.2e} (order {om:.2}), identity {:.2e} (order {oi:.2}); perturbed/exact {:.0}x, {:.0}x",
            d[2].0, d[2].1, ratio.0, ratio.1
        ),
    )
}

fn c6_solver_fidelity() -> Outcome {
    let n = 64;
    let g = CylinderGrid::new(2.0, 8.0, n + 1, n).unwrap();
    let r = Renormalizer::TranslationInvariant;
    let s = MapState::kerr(g, r.clone(), KerrParams::new(1.0).unwrap());
    // residual-scale estimate: the truncation error of the closed form
    let tau = residual_norms(&s).unwrap().max();
    let init = initial_guess(g, r.clone(), &s.slice(0), &s.slice(n)).unwrap();
    let rep = solve_dirichlet(g, r, s.a(), &s.slice(0), &s.slice(n), &init, &SolveConfig::default()).unwrap();
    let f = &rep.final_state;
    let err = f.phi.zip_map(&s.phi, |x, y| x - y).sup_norm().max(f.v.zip_map(&s.v, |x, y| x - y).sup_norm());
    let q = rep.quadratic_tail_ratio(1e-2, 1e-12);
    let ok = rep.converged && err <= 5.0 * tau && matches!(q, Some(c) if c < 1.0);
    let hist: Vec<String> = rep.residual_history.iter().map(|x| format!("{x:.1e}")).collect();
    (ok, format!("err {err:.2e} = {:.3} tau (tau {tau:.2e}); residuals [{}]; max r_k+1/r_k^2 {:.3}", err / tau, hist.join(", "), q.unwrap_or(f64::NAN)))
}

fn perturbed_tangent_solution(p: TangentParams, eps: f64) -> MapState {
    let g = CylinderGrid::new(0.0, 6.0, 49, 128).unwrap();
    let r = Renormalizer::TranslationInvariant;
    let exact = MapState::tangent(g, r.clone(), p);
    let geo = g.sphere();
    // bump on Φ with its φ_b component removed, so the limit keeps (a, b)
    let f: Vec<f64> = geo.cos.iter().map(|c| 1.5 * c * c - 0.5 + 0.3 * c).collect();
    let jb: Vec<(f64, f64)> = geo.theta.iter().map(|&t| jacobi_fields(p, t).phi_b).collect();
    let e4: Vec<f64> = geo.theta.iter().map(|&t| (4.0 * tangent_regular(p, t).0).exp()).collect();
    let dot: f64 = (0..geo.n).map(|j| geo.s[j] * f[j] * jb[j].0).sum();
    let norm: f64 = (0..geo.n).map(|j| geo.s[j] * jb[j].0 * jb[j].0 + e4[j] / geo.s[j].powi(3) * jb[j].1 * jb[j].1).sum();
    let c = dot / norm;
    let mut lo = exact.slice(0);
    for j in 0..geo.n {
        lo.phi[j] += eps * (f[j] - c * jb[j].0);
        lo.v.values[j] -= eps * c * jb[j].1;
    }
    let hi = exact.slice(g.n_t - 1);
    let init = initial_guess(g, r.clone(), &lo, &hi).unwrap();
    solve_dirichlet(g, r, p.a, &lo, &hi, &init, &SolveConfig::default()).unwrap().final_state
}

fn c7_tangent_convergence() -> Outcome {
    let g = CylinderGrid::new(2.0, 10.0, 81, 64).unwrap();
    let kerr = MapState::kerr(g, Renormalizer::TranslationInvariant, KerrParams::new(1.0).unwrap());
    let fk = fit_tangent(&kerr).unwrap();
    let p = TangentParams::new(1.0, 0.5).unwrap();
    let s = perturbed_tangent_solution(p, 0.1);
    let fp = fit_tangent_with(&s, &TangentFitOptions { window: Some((1.0, 4.0)), ..Default::default() }).unwrap();
    let good = |f: &singmap::asymptotics::TangentFit, a: f64, b: f64| {
        matches!(f.beta, Some(x) if x > 0.0)
            && matches!(f.r2, Some(r) if r >= 0.99)
            && (f.params.a - a).abs() <= 1e-3
            && (f.params.b - b).abs() <= 1e-3
    };
    let ok = good(&fk, 2.0, 0.0) && good(&fp, p.a, p.b);
    let show = |f: &singmap::asymptotics::TangentFit| {
        let (a, b) = (f.params.a, f.params.b);
        format!("(a,b)=({a:.6},{b:.3e}) beta {:.3} r2 {:.4}", f.beta.unwrap_or(f64::NAN), f.r2.unwrap_or(f64::NAN))
    };
    (ok, format!("kerr {}; perturbed tangent (1,0.5) {}", show(&fk), show(&fp)))
}

fn c8_infinity() -> Outcome {
    let g = CylinderGrid::new(-(1000f64).ln(), -(10f64).ln(), 65, 128).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for m in [1.0, 0.7] {
        let s = MapState::kerr(g, Renormalizer::LinearGrowth, KerrParams::new(m).unwrap());
        let f = fit_infinity(&s).unwrap();
        let e = [f.u.c0.abs(), (f.u.y0 + m).abs(), (f.v.a_twist - 2.0 * m * m).abs(), f.v.c2.abs()];
        ok &= e.iter().all(|x| *x <= 1e-3);
        detail.push(format!(
            "m={m}: c0 {:.1e}, y0 {:.6}, a_twist {:.6}, c2 {:.1e}",
            f.u.c0, f.u.y0, f.v.a_twist, f.v.c2
        ));
    }
    (ok, detail.join("; "))
}

fn c9_defect_difference() -> Outcome {
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut spread = 0.0f64;
    for b in [-0.6, -0.2, 0.2, 0.6] {
        let mut diffs = Vec::new();
        for a in [0.5, 1.0, 2.0] {
            let p = TangentParams::new(a, b).unwrap();
            let g = CylinderGrid::new(0.0, 2.0, 9, 512).unwrap();
            let s = MapState::tangent(g, Renormalizer::TranslationInvariant, p);
            let mf = reconstruct(&s, 0.0, AlphaGauge::NorthRod).unwrap();
            let d = angle_defects(&mf, b).unwrap();
            ok &= !d.flagged;
            worst = worst.max(d.discrepancy);
            diffs.push(d.difference);
        }
        let (lo, hi) = diffs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
        spread = spread.max(hi - lo);
    }
    ok &= worst <= 1e-3 && spread <= 1e-3;
    (ok, format!("max |diff - ln((1+b)/(1-b))| {worst:.2e}, max spread over a {spread:.1e}"))
}

fn c10_nhg() -> Outcome {
    let g = CylinderGrid::new(0.0, 8.0, 257, 128).unwrap();
    let s = MapState::kerr(g, Renormalizer::TranslationInvariant, KerrParams::new(1.0).unwrap());
    let eps: Vec<f64> = (2..=6).map(|k| 2f64.powi(-k)).collect();
    let r = nhg_limit(&s, &eps, 1.0, Some(TangentParams::new(2.0, 0.0).unwrap())).unwrap();
    let last = *r.distances.last().unwrap();
    let ok = r.monotone && last < 1e-2;
    let d: Vec<String> = r.distances.iter().map(|x| format!("{x:.4}")).collect();
    (ok, format!("distances [{}], monotone {}, eps=2^-6 distance {last:.4} (target < 1e-2)", d.join(", "), r.monotone))
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "closed-form residual convergence", c1_residual_convergence),
        (2, "first-integral identities", c2_first_integrals),
        (3, "twist spectrum", c3_twist_spectrum),
        (4, "linearized kernel", c4_linearized_kernel),
        (5, "monotonicity and energy identity", c5_energy_identities),
        (6, "solver fidelity", c6_solver_fidelity),
        (7, "tangent-map convergence", c7_tangent_convergence),
        (8, "infinity expansion", c8_infinity),
        (9, "defect difference", c9_defect_difference),
        (10, "near-horizon limit", c10_nhg),
    ];
    let mut unexpected = Vec::new();
    for (k, name, run) in criteria {
        let t = Instant::now();
        let (ok, detail) = run();
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("criterion {k:>2} {tag} {name}: {detail} [{:.1} s]", t.elapsed().as_secs_f64());
        let red = KNOWN_RED.contains(&k);
        if !ok && !red {
            unexpected.push(k);
        }
        if ok && red {
            println!("criterion {k:>2} passes but is listed as known red");
        }
    }
    if !unexpected.is_empty() {
        eprintln!("failing criteria: {unexpected:?}");
        std::process::exit(1);
    }
}
