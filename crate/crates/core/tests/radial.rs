use spikelab::nonlinearity::NonlinearitySpec;
use spikelab::radial::*;

fn cubic_3d() -> NonlinearitySpec {
    NonlinearitySpec::pure_power(3.0, 2.0, 3).unwrap()
}

fn solve(spec: &NonlinearitySpec, h_r: f64) -> RadialProfile {
    let settings = RadialSettings {
        h_r,
        ..RadialSettings::default()
    };
    find_ground_state(spec, &settings).unwrap()
}

#[test]
fn shoot_height_matches_fine_grid_oracle() {
    let s = cubic_3d();
    let coarse = solve(&s, 1e-3);
    let fine = solve(&s, 1e-4);
    assert!((fine.shoot_height - 4.337).abs() < 1e-3, "{}", fine.shoot_height);
    assert!((coarse.shoot_height - fine.shoot_height).abs() < 1e-8 * fine.shoot_height);
}

#[test]
fn cubic_decay_plateau() {
    let p = solve(&cubic_3d(), 1e-3);
    let d = decay_diagnostics(&p).unwrap();
    assert_eq!(d.mu, 1.0);
    assert!(d.plateau_error < 0.02, "{d:?}");
    assert!(d.slope_error < 1e-2 * d.mu, "{d:?}");
}

#[test]
fn quasilinear_decay_plateau() {
    let s = NonlinearitySpec::pure_power(2.5, 2.5, 3).unwrap();
    let p = solve(&s, 1e-3);
    let d = decay_diagnostics(&p).unwrap();
    assert!((d.mu - (1.0f64 / 1.5).powf(0.4)).abs() < 1e-15);
    assert!(d.plateau_error < 0.02, "{d:?}");
    assert!(d.slope_error < 1e-2 * d.mu, "{d:?}");
    assert!(p.dw[1..].iter().all(|&x| x < 0.0));
}

#[test]
fn short_profile_rejected_by_decay_fit() {
    let s = cubic_3d();
    let settings = RadialSettings {
        r_max: 12.0,
        ..RadialSettings::default()
    };
    let p = find_ground_state(&s, &settings).unwrap();
    assert!(matches!(decay_diagnostics(&p), Err(RadialError::ProfileTooShort { .. })));
}

#[test]
fn constants_are_positive_and_half_level_exact() {
    let s = cubic_3d();
    let c = ground_state_constants(&solve(&s, 1e-3), &s).unwrap();
    assert!(c.mu > 0.0 && c.c_star > 0.0 && c.gamma > 0.0);
    assert_eq!(c.c_star_half, c.c_star / 2.0);
    assert!(c.warnings.is_empty(), "{:?}", c.warnings);
}

#[test]
fn c_star_richardson_consistent() {
    let s = cubic_3d();
    let c: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
        .iter()
        .map(|&h| ground_state_constants(&solve(&s, h), &s).unwrap().c_star)
        .collect();
    // Richardson limit assuming second-order convergence.
    let limit = c[2] + (c[2] - c[1]) / 3.0;
    for v in &c {
        assert!(((v - limit) / limit).abs() < 1e-4, "{c:?} -> {limit}");
    }
}

#[test]
fn halving_radial_step_changes_constants_little() {
    let s = cubic_3d();
    let (a, b) = (solve(&s, 1e-3), solve(&s, 5e-4));
    let (ca, cb) = (
        ground_state_constants(&a, &s).unwrap(),
        ground_state_constants(&b, &s).unwrap(),
    );
    let (da, db) = (decay_diagnostics(&a).unwrap(), decay_diagnostics(&b).unwrap());
    let rel = |x: f64, y: f64| ((x - y) / y).abs();
    assert!(rel(ca.c_star, cb.c_star) < 1e-3);
    assert!(rel(ca.gamma, cb.gamma) < 1e-3);
    assert!(rel(da.mu_fit, db.mu_fit) < 1e-3);
}

#[test]
fn gamma_crosscheck_settles_angular_constant() {
    let s = cubic_3d();
    let p = solve(&s, 1e-3);
    let g = gamma_crosscheck(&p, &s, 1_000_000, 7);
    assert!(g.relative_gap < 0.02, "{g:?}");
    assert!(g.gamma_direct > 0.0);
    assert_eq!(g.matched_constant, AngularConstant::HalfSphereMoment);
    assert!((g.angular_estimate - std::f64::consts::PI).abs() < 4.0 * g.angular_std_error);

    let half = gamma_crosscheck(&p, &s, 500_000, 7);
    assert!((half.gamma_direct - g.gamma_direct).abs() < 3.0 * half.gamma_std_error);
}

#[test]
fn gamma_crosscheck_in_the_plane() {
    let s = NonlinearitySpec::pure_power(3.0, 2.0, 2).unwrap();
    let p = solve(&s, 1e-3);
    let g = gamma_crosscheck(&p, &s, 400_000, 3);
    assert!((g.angular_estimate - 2.0).abs() < 4.0 * g.angular_std_error);
    assert!(g.relative_gap < 0.02);
}

#[test]
fn gamma_crosscheck_is_seed_reproducible() {
    let s = cubic_3d();
    let p = solve(&s, 1e-3);
    let a = gamma_crosscheck(&p, &s, 200_000, 11);
    let b = gamma_crosscheck(&p, &s, 200_000, 11);
    assert_eq!(a.gamma_direct.to_bits(), b.gamma_direct.to_bits());
}

#[test]
fn moment_identity_identity_and_trace_free() {
    let s = cubic_3d();
    let p = solve(&s, 1e-3);
    let id = moment_identity_check(&p, &s, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert!((id.lhs / id.rhs - 1.0).abs() < 0.01, "{id:?}");
    let tf = moment_identity_check(&p, &s, &[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
    assert!(tf.lhs.abs() < 1e-2 * tf.gamma);
    let off = moment_identity_check(&p, &s, &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    assert!(off.lhs.abs() < 1e-2 * off.gamma);
    assert!(matches!(
        moment_identity_check(&p, &s, &[vec![1.0, 2.0], vec![0.0, 1.0]]),
        Err(RadialError::HessianShape { expected: 2 })
    ));
}

/// Tensor-product quadrature of the energy density on the plane `z_N = 0`,
/// used as an independent oracle for the second moments.
fn planar_moments(p: &RadialProfile, s: &NonlinearitySpec, half_width: f64, n: usize) -> [f64; 3] {
    let h = 2.0 * half_width / n as f64;
    let m = p.m;
    let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let x = -half_width + (i as f64 + 0.5) * h;
        for j in 0..n {
            let y = -half_width + (j as f64 + 0.5) * h;
            let r = (x * x + y * y).sqrt();
            let w = p.value_at(r);
            let k = ((r / p.h_r) as usize).min(p.dw.len() - 2);
            let t = r / p.h_r - k as f64;
            let dw = (1.0 - t) * p.dw[k] + t * p.dw[k + 1];
            let e = (dw.abs().powf(m) + w.powf(m)) / m - s.eval_big_f(w);
            xx += x * x * e;
            yy += y * y * e;
            xy += x * y * e;
        }
    }
    let a = h * h;
    [xx * a, yy * a, xy * a]
}

#[test]
fn moment_identity_matches_planar_quadrature() {
    let s = cubic_3d();
    let p = solve(&s, 1e-3);
    let [xx, yy, xy] = planar_moments(&p, &s, 12.0, 1200);
    let id = moment_identity_check(&p, &s, &[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
    assert!(((id.lhs - xx) / xx).abs() < 1e-3, "{} vs {xx}", id.lhs);
    assert!(((xx - yy) / xx).abs() < 1e-9);
    assert!(xy.abs() < 1e-9 * xx);
}
