use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use singmap::closed_forms::{KerrParams, TangentParams};
use singmap::cylinder::{
    energy_identity_check, energy_ledger, homogenize_renormalizer, local_bound_check, monotonicity_check, op_l,
    residual, sphere_energy, CustomRenormalizer, MapState, Renormalizer,
};
use singmap::grid::{CylinderGrid, Field};
use singmap::Error;

fn smooth_state(grid: CylinderGrid, seed: f64) -> MapState {
    let phi = Field::from_fn(&grid, |t, th| 0.3 * (seed + t).sin() * th.cos() + 0.1 * seed * (2.0 * th).cos());
    let v = Field::from_fn(&grid, |t, th| {
        let c = th.cos();
        c * (3.0 - c * c) * (1.0 + 0.1 * (t * seed).cos())
    });
    MapState::new(grid, Renormalizer::TranslationInvariant, phi, v, (2.0, -2.0)).unwrap()
}

#[test]
fn op_l_annihilates_its_t_kernel() {
    let g = CylinderGrid::new(-1.0, 2.0, 31, 16).unwrap();
    let f = Field::from_fn(&g, |t, _| 3.0 - 0.5 * t.exp());
    // the one-sided end stencils are exact on quadratics only
    let lf = op_l(&g, &f);
    for i in 1..g.n_t - 1 {
        for &x in lf.row(i) {
            assert!(x.abs() < 1e-2, "{x}");
        }
    }
    let c = Field::from_fn(&g, |_, _| 1.7);
    assert!(op_l(&g, &c).sup_norm() < 1e-12);
}

#[test]
fn op_l_on_separated_solutions_is_second_order() {
    // f = e^{λt} P₂(cos θ) with λ² − λ − 6 = 0, so L f = 0
    let lam = -2.0;
    let err = |n: usize| {
        let g = CylinderGrid::new(0.0, 1.0, n + 1, n).unwrap();
        let f = Field::from_fn(&g, |t, th| (lam * t).exp() * (1.5 * th.cos().powi(2) - 0.5));
        op_l(&g, &f).sup_norm()
    };
    let (e1, e2) = (err(32), err(64));
    assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
}

#[test]
fn constant_state_has_unit_phi_residual() {
    let g = CylinderGrid::new(0.0, 1.0, 9, 12).unwrap();
    let z = Field::zeros(&g);
    let s = MapState::new(g, Renormalizer::TranslationInvariant, z.clone(), z, (0.0, 0.0)).unwrap();
    let (rp, rv) = residual(&s).unwrap();
    assert!(rp.values.iter().all(|x| (x - 1.0).abs() < 1e-12));
    assert_eq!(rv.sup_norm(), 0.0);
}

#[test]
fn residual_rejects_non_finite_states() {
    let g = CylinderGrid::new(0.0, 1.0, 5, 8).unwrap();
    let mut s = smooth_state(g, 0.3);
    s.phi.set(2, 3, f64::NAN);
    assert!(matches!(residual(&s), Err(Error::NonFinite(_))));
}

#[test]
fn homogenized_renormalizer_solves_its_equation() {
    let custom = CustomRenormalizer::new("bump", 0.2, false, |t, th| 0.2 * (-t * t).exp() * th.sin().powi(2)).unwrap();
    let r = Renormalizer::Custom(custom);
    let g = CylinderGrid::new(-2.0, 2.0, 41, 24).unwrap();
    let xi = homogenize_renormalizer(&r, &g).unwrap();
    let lx = op_l(&g, &xi);
    let rhs = r.l_ln_omega_field(&g);
    for i in 1..g.n_t - 1 {
        for j in 0..g.n_theta {
            assert!((lx.get(i, j) - rhs.get(i, j)).abs() < 1e-8);
        }
    }
    assert!(xi.row(0).iter().chain(xi.row(g.n_t - 1)).all(|x| *x == 0.0));
}

#[test]
fn built_in_renormalizers() {
    let g = CylinderGrid::new(0.0, 1.0, 5, 8).unwrap();
    let lg = Renormalizer::LinearGrowth;
    assert!(homogenize_renormalizer(&lg, &g).unwrap().sup_norm() < 1e-14);
    assert_eq!(lg.g(1.5, 0.4), -1.5);
    assert_eq!(Renormalizer::TranslationInvariant.l_ln_omega(0.3, 1.0), -1.0);
    // finite differences of a custom g that reproduces ω = ρ
    let c = CustomRenormalizer::new("rho", 0.0, false, |t, _| -t).unwrap();
    assert_relative_eq!(Renormalizer::Custom(c).l_ln_omega(0.3, 1.0), 0.0, epsilon = 1e-6);
}

#[test]
fn energy_identities_hold_to_second_order_on_kerr() {
    let run = |n: usize| {
        let g = CylinderGrid::new(2.0, 8.0, 2 * n + 1, n).unwrap();
        let s = MapState::kerr(g, Renormalizer::TranslationInvariant, KerrParams::new(1.0).unwrap());
        (monotonicity_check(&s).unwrap().interior_drift(), energy_identity_check(&s, 3.0).unwrap())
    };
    let (a, b) = (run(32), run(64));
    assert!((a.0 / b.0).log2() > 1.8 && (a.1 / b.1).log2() > 1.8, "{a:?} {b:?}");
}

#[test]
fn energy_checks_demand_translation_invariance() {
    let g = CylinderGrid::new(0.0, 3.0, 13, 8).unwrap();
    let s = MapState::kerr(g, Renormalizer::LinearGrowth, KerrParams::new(1.0).unwrap());
    assert!(matches!(monotonicity_check(&s), Err(Error::Hypothesis(_))));
    assert!(matches!(energy_identity_check(&s, 1.0), Err(Error::Hypothesis(_))));
    // the ledger itself is available for any renormalizer
    assert_eq!(energy_ledger(&s).energy.len(), 13);
}

#[test]
fn tangent_lift_has_constant_energy_and_no_kinetic_term() {
    let p = TangentParams::new(1.0, 0.4).unwrap();
    let g = CylinderGrid::new(0.0, 3.0, 13, 32).unwrap();
    let s = MapState::tangent(g, Renormalizer::TranslationInvariant, p);
    let led = energy_ledger(&s);
    assert!(led.kinetic.iter().all(|k| k.abs() < 1e-14));
    let e0 = led.energy[0];
    assert!(led.energy.iter().all(|e| (e - e0).abs() < 1e-12 * e0.abs().max(1.0)));
}

#[test]
fn local_bound_on_kerr_and_its_preconditions() {
    let g = CylinderGrid::new(0.0, 8.0, 81, 32).unwrap();
    let lg = MapState::kerr(g, Renormalizer::LinearGrowth, KerrParams::new(1.0).unwrap());
    let b = local_bound_check(&lg, 4.0, 1.0).unwrap();
    assert!(b.holds(), "{b:?}");
    assert!(local_bound_check(&lg, 1.0, 1.0).is_err());
    assert!(local_bound_check(&lg, 4.0, 2.0).is_err());
    let ti = MapState::kerr(g, Renormalizer::TranslationInvariant, KerrParams::new(1.0).unwrap());
    assert!(matches!(local_bound_check(&ti, 4.0, 1.0), Err(Error::Hypothesis(_))));
}

#[test]
fn bounds_check_flags_v_outside_the_trace_interval() {
    let g = CylinderGrid::new(0.0, 1.0, 5, 8).unwrap();
    let mut s = smooth_state(g, 0.1);
    // c(3 − c²) stays inside [−2, 2]; the t-modulation may not
    s.v = s.v.map(|x| 0.9 * x);
    assert!(s.check_bounds(10.0, 1e-9).is_ok());
    s.v.set(2, 2, 5.0);
    assert!(matches!(s.check_bounds(10.0, 1e-9), Err(Error::Hypothesis(_))));
    assert!(matches!(s.check_bounds(1e-3, 1e-9), Err(Error::BoundBreach { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Shifting `v` together with its traces is an isometry of the target.
    #[test]
    fn residual_is_invariant_under_v_shift(seed in 0.0f64..3.0, c in -5.0f64..5.0) {
        let g = CylinderGrid::new(0.0, 1.0, 7, 10).unwrap();
        let s = smooth_state(g, seed);
        let mut t = s.clone();
        t.v = s.v.map(|x| x + c);
        t.traces = (s.traces.0 + c, s.traces.1 + c);
        let (p0, v0) = residual(&s).unwrap();
        let (p1, v1) = residual(&t).unwrap();
        for k in 0..p0.values.len() {
            prop_assert!((p0.values[k] - p1.values[k]).abs() < 1e-9 * (1.0 + p0.values[k].abs()));
            prop_assert!((v0.values[k] - v1.values[k]).abs() < 1e-9 * (1.0 + v0.values[k].abs()));
        }
        prop_assert!((sphere_energy(&s, 3) - sphere_energy(&t, 3)).abs() < 1e-9);
    }

    /// `(u, v) ↦ (u + c, e^{−2c} v)` is an isometry: `R_Φ` is unchanged and
    /// `R_v` scales by `e^{−2c}`.
    #[test]
    fn residual_is_equivariant_under_dilation(seed in 0.0f64..3.0, c in -0.5f64..0.5) {
        let g = CylinderGrid::new(0.0, 1.0, 7, 10).unwrap();
        let s = smooth_state(g, seed);
        let k = (-2.0 * c).exp();
        let mut t = s.clone();
        t.phi = s.phi.map(|x| x + c);
        t.v = s.v.map(|x| k * x);
        t.traces = (k * s.traces.0, k * s.traces.1);
        let (p0, v0) = residual(&s).unwrap();
        let (p1, v1) = residual(&t).unwrap();
        for i in 0..p0.values.len() {
            prop_assert!((p0.values[i] - p1.values[i]).abs() < 1e-8 * (1.0 + p0.values[i].abs()));
            prop_assert!((k * v0.values[i] - v1.values[i]).abs() < 1e-8 * (1.0 + v0.values[i].abs()));
        }
    }

    /// Reflection `θ ↦ π − θ` with `v ↦ −v` maps solutions to solutions.
    #[test]
    fn residual_commutes_with_reflection(seed in 0.0f64..3.0) {
        let g = CylinderGrid::new(0.0, 1.0, 7, 10).unwrap();
        let s = smooth_state(g, seed);
        let n = g.n_theta;
        let flip = |f: &Field, sign: f64| Field::from_fn(&g, |t, th| {
            let i = g.nearest_t(t);
            let j = ((PI - th) / g.dtheta() - 0.5).round() as usize;
            sign * f.get(i, j.min(n - 1))
        });
        let mut t = s.clone();
        t.phi = flip(&s.phi, 1.0);
        t.v = flip(&s.v, -1.0);
        t.traces = (-s.traces.1, -s.traces.0);
        let (p0, v0) = residual(&s).unwrap();
        let (p1, v1) = residual(&t).unwrap();
        let (fp, fv) = (flip(&p0, 1.0), flip(&v0, -1.0));
        for i in 0..p0.values.len() {
            prop_assert!((fp.values[i] - p1.values[i]).abs() < 1e-9 * (1.0 + fp.values[i].abs()));
            prop_assert!((fv.values[i] - v1.values[i]).abs() < 1e-9 * (1.0 + fv.values[i].abs()));
        }
    }

    /// The tangent lift is t-independent, so its residual is the same on
    /// every interior slice.
    #[test]
    fn tangent_residual_is_translation_invariant(a in 0.3f64..3.0, b in -0.9f64..0.9) {
        let p = TangentParams::new(a, b).unwrap();
        let g = CylinderGrid::new(0.0, 2.0, 9, 24).unwrap();
        let s = MapState::tangent(g, Renormalizer::TranslationInvariant, p);
        let (rp, rv) = residual(&s).unwrap();
        for i in 2..g.n_t - 1 {
            for j in 0..g.n_theta {
                prop_assert!((rp.get(i, j) - rp.get(1, j)).abs() < 1e-9);
                prop_assert!((rv.get(i, j) - rv.get(1, j)).abs() < 1e-9);
            }
        }
    }
}
