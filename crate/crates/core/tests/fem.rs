use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikelab::fem::FemSpace;
use spikelab::geometry::{generate_mesh, DomainSpec, Mesh};
use spikelab::nonlinearity::NonlinearitySpec;
use spikelab::numerics::simpson_uniform;
use spikelab::radial::{find_ground_state, RadialSettings};

fn space(domain: DomainSpec, h: f64) -> FemSpace {
    FemSpace::new(Arc::new(generate_mesh(&domain, h).unwrap()))
}

fn directional_error(s: &FemSpace, spec: &NonlinearitySpec, eps: f64, rng: &mut ChaCha8Rng) -> f64 {
    let n = s.mesh().n_vertices();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.5)).collect();
    let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let err = s.directional_derivative_error(spec, eps, &v, &dir, 1e-5);
    // Independent oracle for the helper: plain summation of the same quotient.
    let shift = |sign: f64| -> Vec<f64> { v.iter().zip(&dir).map(|(a, b)| a + sign * 1e-5 * b).collect() };
    let fd = (s.energy(spec, eps, &shift(1.0)).total - s.energy(spec, eps, &shift(-1.0)).total) / 2e-5;
    let exact: f64 = s.gradient(spec, eps, &v).iter().zip(&dir).map(|(a, b)| a * b).sum();
    assert!((err - ((fd - exact) / exact).abs()).abs() < 1e-9);
    err
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let meshes = [
        space(DomainSpec::ball(1.0, 2).unwrap(), 0.1),
        space(DomainSpec::ellipse(2.0, 1.0).unwrap(), 0.15),
    ];
    for m in [2.0, 2.5, 3.0] {
        let spec = NonlinearitySpec::pure_power(m + 0.5, m, 2).unwrap();
        for s in &meshes {
            for _ in 0..20 {
                let err = directional_error(s, &spec, 0.3, &mut rng);
                assert!(err < 1e-6, "m = {m}: relative error {err}");
            }
        }
    }
}

#[test]
fn gradient_matches_central_differences_3d() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = space(DomainSpec::ellipsoid(1.6, 1.0, 1.0).unwrap(), 0.25);
    for m in [2.0, 2.5] {
        let spec = NonlinearitySpec::pure_power(2.5, m, 3).unwrap();
        for _ in 0..3 {
            assert!(directional_error(&s, &spec, 0.4, &mut rng) < 1e-6);
        }
    }
}

#[test]
fn energy_invariant_under_vertex_renumbering() {
    let mesh = generate_mesh(&DomainSpec::ellipse(2.0, 1.0).unwrap(), 0.1).unwrap();
    let n = mesh.n_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    // Reverse-and-rotate permutation of vertex ids, cells reversed too.
    let perm: Vec<usize> = (0..n).map(|i| (n - 1 - i + 17) % n).collect();
    let mut coords = vec![0.0; mesh.coords.len()];
    let mut pv = vec![0.0; n];
    for i in 0..n {
        coords[perm[i] * 2..perm[i] * 2 + 2].copy_from_slice(mesh.vertex(i));
        pv[perm[i]] = v[i];
    }
    let mut cells = Vec::new();
    for c in (0..mesh.n_cells()).rev() {
        cells.extend(mesh.cell(c).iter().map(|&x| perm[x]));
    }
    let boundary: Vec<usize> = mesh.boundary.iter().map(|&b| perm[b]).collect();
    let other = Mesh::from_parts(2, mesh.h, coords, cells, boundary, mesh.normals.clone()).unwrap();
    let spec = NonlinearitySpec::pure_power(3.0, 2.5, 2).unwrap();
    let a = FemSpace::new(Arc::new(mesh)).energy(&spec, 0.2, &v);
    let b = FemSpace::new(Arc::new(other)).energy(&spec, 0.2, &pv);
    assert!((a.total - b.total).abs() < 1e-13 * a.total.abs().max(1.0));
}

#[test]
fn energy_is_bit_identical_across_pool_sizes() {
    let s = space(DomainSpec::ellipse(2.0, 1.0).unwrap(), 0.05);
    let spec = NonlinearitySpec::pure_power(3.0, 2.0, 2).unwrap();
    let n = s.mesh().n_vertices();
    let v: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 500.0).collect();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| s.energy_and_gradient(&spec, 0.2, &v))
    };
    let (e1, g1) = run(1);
    let (e4, g4) = run(4);
    assert_eq!(e1.total.to_bits(), e4.total.to_bits());
    assert!(g1.iter().zip(&g4).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn spike_energy_matches_radial_quadrature() {
    let spec = NonlinearitySpec::pure_power(3.0, 2.0, 2).unwrap();
    let profile = find_ground_state(&spec, &RadialSettings::default()).unwrap();
    let eps = 0.2;
    let s = space(DomainSpec::ball(1.0, 2).unwrap(), 0.01);
    let mesh = s.mesh().clone();
    let v: Vec<f64> = (0..mesh.n_vertices())
        .map(|i| {
            let p = mesh.vertex(i);
            profile.value_at(p[0].hypot(p[1]) / eps)
        })
        .collect();
    let fe = s.energy(&spec, eps, &v).total;
    // ε² · 2π ∫_0^{1/ε} E(w) r dr.
    let cut = (1.0 / eps / profile.h_r).round() as usize;
    let dens: Vec<f64> = (0..=cut)
        .map(|i| {
            let (w, dw, r) = (profile.w[i], profile.dw[i], profile.r[i]);
            (0.5 * (dw * dw + w * w) - spec.eval_big_f(w)) * r
        })
        .collect();
    let radial = eps * eps * std::f64::consts::TAU * simpson_uniform(&dens, profile.h_r);
    assert!(((fe - radial) / radial).abs() < 0.02, "{fe} vs {radial}");
}

#[test]
fn nonnegative_fields_use_plain_primitive() {
    let s = space(DomainSpec::ball(1.0, 2).unwrap(), 0.1);
    let spec = NonlinearitySpec::pure_power(3.0, 2.0, 2).unwrap();
    let n = s.mesh().n_vertices();
    let v: Vec<f64> = (0..n).map(|i| 0.5 + 0.4 * ((i as f64) * 0.37).sin()).collect();
    let direct: f64 = s.quadrature_samples(&v).iter().map(|(w, x)| w * x.powi(4) / 4.0).sum();
    assert!((s.energy(&spec, 0.3, &v).potential_term - direct).abs() < 1e-13);
}
