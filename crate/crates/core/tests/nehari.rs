use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use spikelab::fem::FemSpace;
use spikelab::geometry::{generate_mesh, DomainSpec};
use spikelab::nehari::*;
use spikelab::nonlinearity::{CustomNonlinearity, NonlinearitySpec};
use spikelab::radial::{find_ground_state, RadialProfile, RadialSettings};

fn cubic() -> NonlinearitySpec {
    NonlinearitySpec::pure_power(3.0, 2.0, 2).unwrap()
}

fn profile() -> Arc<RadialProfile> {
    static P: OnceLock<Arc<RadialProfile>> = OnceLock::new();
    P.get_or_init(|| Arc::new(find_ground_state(&cubic(), &RadialSettings::default()).unwrap()))
        .clone()
}

fn space(d: &DomainSpec, h: f64) -> FemSpace {
    FemSpace::new(Arc::new(generate_mesh(d, h).unwrap()))
}

fn bump(eps: f64, point: Vec<f64>) -> SolveConfig {
    SolveConfig::new(
        eps,
        InitialGuess::BoundaryBump {
            point,
            scale: 1.0,
            profile: profile(),
        },
    )
}

fn disk_solve(h: f64, point: Vec<f64>) -> (FemSpace, SolveReport) {
    let sp = space(&DomainSpec::ball(1.0, 2).unwrap(), h);
    let mut cfg = bump(0.3, point);
    cfg.max_iters = 20_000;
    let r = least_energy_solve(&sp, &cubic(), &cfg).unwrap();
    (sp, r)
}

#[test]
fn ellipse_solve_is_stationary_on_the_manifold() {
    let d = DomainSpec::ellipse(2.0, 1.0).unwrap();
    let eps = 0.25;
    let sp = space(&d, eps / 3.0);
    let r = least_energy_solve(&sp, &cubic(), &bump(eps, vec![2.0, 0.0])).unwrap();
    assert!(r.converged, "{}", r.status);
    assert!(r.residual < 1e-6);
    assert!((r.t_star - 1.0).abs() < 1e-6);
    assert!((r.t_history.last().unwrap() - 1.0).abs() < 1e-6);
    assert!(r.c_eps > 0.0);
    assert!(r.u.values.iter().all(|&x| x >= 0.0));
    let mp = mountain_pass_value_check(&sp, &cubic(), eps, &r.u.values);
    assert!(mp.gap < 1e-6, "{mp:?}");
    assert!(mp.nehari_residual < 1e-6, "{mp:?}");
    assert!((mp.t_at_max - 1.0).abs() <= mp.grid_spacing);
    assert_eq!(mp.c_from_energy, r.c_eps);
}

#[test]
fn disk_bumps_agree_and_peak_hugs_boundary() {
    let (sp, a) = disk_solve(0.1, vec![1.0, 0.0]);
    let (_, b) = disk_solve(0.1, vec![0.0, 1.0]);
    assert!(a.converged && b.converged);
    assert!(((a.c_eps - b.c_eps) / a.c_eps).abs() < 1e-4, "{} vs {}", a.c_eps, b.c_eps);
    let r = |p: &[f64]| (p[0] * p[0] + p[1] * p[1]).sqrt();
    assert!(1.0 - r(&a.peak.position) <= sp.mesh().h);
    let (fine, c) = disk_solve(0.05, vec![1.0, 0.0]);
    assert!(c.converged, "{} {} {:e} {:?}", c.status, c.iterations, c.residual, c.peak);
    assert!(1.0 - r(&c.peak.position) <= fine.mesh().h);
}

#[test]
fn descent_is_monotone() {
    let (_, r) = disk_solve(0.1, vec![0.0, -1.0]);
    for w in r.energy_history.windows(2) {
        assert!(w[1] <= w[0] + 1e-13 * w[0].abs(), "{} -> {}", w[0], w[1]);
    }
    assert_eq!(r.energy_history.len(), r.iterations + 1);
}

#[test]
fn converged_solution_survives_refinement_restart() {
    let d = DomainSpec::ellipse(2.0, 1.0).unwrap();
    let eps = 0.35;
    let coarse = space(&d, eps / 3.0);
    let r = least_energy_solve(&coarse, &cubic(), &bump(eps, vec![2.0, 0.0])).unwrap();
    assert!(r.converged);
    let fine = space(&d, eps / 6.0);
    let cfg = SolveConfig::new(eps, InitialGuess::Continuation(Arc::new(r.clone())));
    let s = least_energy_solve(&fine, &cubic(), &cfg).unwrap();
    assert!(s.converged, "{}", s.status);
    assert!(((s.c_eps - r.c_eps) / r.c_eps).abs() < 0.05);
    let dx: f64 = s.peak.position.iter().zip(&r.peak.position).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(dx <= coarse.mesh().h + fine.mesh().h);
}

#[test]
fn zero_initial_guess_collapses() {
    let sp = space(&DomainSpec::ball(1.0, 2).unwrap(), 0.1);
    let cfg = SolveConfig::new(0.3, InitialGuess::FromField(vec![0.0; sp.mesh().n_vertices()]));
    assert_eq!(least_energy_solve(&sp, &cubic(), &cfg).unwrap_err(), NehariError::CollapseToZero);
}

#[test]
fn invalid_configs_rejected() {
    let sp = space(&DomainSpec::ball(1.0, 2).unwrap(), 0.1);
    let n = sp.mesh().n_vertices();
    for eps in [0.0, -0.1, 1.5] {
        let cfg = SolveConfig::new(eps, InitialGuess::FromField(vec![1.0; n]));
        assert!(matches!(least_energy_solve(&sp, &cubic(), &cfg), Err(NehariError::InvalidConfig(_))));
    }
    let mut cfg = SolveConfig::new(0.3, InitialGuess::FromField(vec![1.0; n]));
    cfg.grad_tol = 0.0;
    assert!(matches!(least_energy_solve(&sp, &cubic(), &cfg), Err(NehariError::InvalidConfig(_))));
    // p = 6 is supercritical in three dimensions.
    let sp3 = space(&DomainSpec::ball(1.0, 3).unwrap(), 0.25);
    let bad = NonlinearitySpec::pure_power(6.0, 2.0, 3).unwrap();
    let cfg = SolveConfig::new(1.0, InitialGuess::FromField(vec![1.0; sp3.mesh().n_vertices()]));
    assert!(matches!(least_energy_solve(&sp3, &bad, &cfg), Err(NehariError::Hypotheses(_))));
}

#[test]
fn custom_scale_matches_closed_form() {
    let sp = space(&DomainSpec::ellipse(2.0, 1.0).unwrap(), 0.2);
    let custom = NonlinearitySpec::custom(CustomNonlinearity::new("cube", |t| t.max(0.0).powi(3), |t| 3.0 * t.max(0.0).powi(2)), 2.0, 2).unwrap();
    let u: Vec<f64> = (0..sp.mesh().n_vertices())
        .map(|i| {
            let x = sp.mesh().vertex(i);
            (-(x[0] - 2.0).powi(2) - x[1] * x[1]).exp()
        })
        .collect();
    let a = nehari_scale(&sp, &cubic(), 0.4, &u).unwrap();
    let b = nehari_scale(&sp, &custom, 0.4, &u).unwrap();
    assert!(((a - b) / a).abs() < 1e-12, "{a} vs {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scale_is_homogeneous(lambda in 0.01..100.0f64, m in 2.0..3.0f64, seed in 0u64..1000) {
        let sp = space(&DomainSpec::ball(1.0, 2).unwrap(), 0.2);
        let spec = NonlinearitySpec::pure_power(m + 0.7, m, 2).unwrap();
        let u: Vec<f64> = (0..sp.mesh().n_vertices())
            .map(|i| {
                let x = sp.mesh().vertex(i);
                (1.0 + ((seed as f64) * 0.37 + 3.0 * x[0] - 2.0 * x[1]).sin()).max(0.0)
            })
            .collect();
        let t = nehari_scale(&sp, &spec, 0.5, &u).unwrap();
        let v: Vec<f64> = u.iter().map(|x| lambda * x).collect();
        let tl = nehari_scale(&sp, &spec, 0.5, &v).unwrap();
        prop_assert!((tl * lambda / t - 1.0).abs() < 1e-12);
    }
}
