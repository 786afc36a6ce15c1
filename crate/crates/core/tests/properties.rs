use std::f64::consts::PI;

use formfield::controller::control_input;
use formfield::escape::{
    deflection_bound, deflection_direction, init_escape, metropolis_accept, rotate_force, run_escape_step,
    sample_deflection_angle,
};
use formfield::potential::smooth_force;
use formfield::{AnnealParams, ControllerSpec, Rotation, Topology, Vec2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec2(range: f64) -> impl Strategy<Value = Vec2> {
    (-range..range, -range..range).prop_map(|(x, y)| Vec2::new(x, y))
}

fn nonzero_vec2(range: f64) -> impl Strategy<Value = Vec2> {
    vec2(range).prop_filter("nonzero", |v| v.norm() > 1e-3)
}

fn graph() -> impl Strategy<Value = Topology> {
    (1usize..9).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..20).prop_map(move |pairs| {
            let edges: Vec<_> = pairs.into_iter().filter(|(a, b)| a != b).collect();
            Topology::from_edges(n, &edges).unwrap()
        })
    })
}

fn rotation() -> impl Strategy<Value = Rotation> {
    prop_oneof![Just(Rotation::Cw), Just(Rotation::Ccw)]
}

fn mirror(v: Vec2) -> Vec2 {
    Vec2::new(v.x, -v.y)
}

proptest! {
    #[test]
    fn laplacian_is_symmetric_psd_with_zero_row_sums(topo in graph()) {
        let l = topo.laplacian();
        let n = topo.len();
        for i in 0..n {
            let row: f64 = (0..n).map(|j| l[(i, j)]).sum();
            prop_assert!(row.abs() < 1e-12);
            prop_assert_eq!(l[(i, i)], topo.degree(i) as f64);
            for j in 0..n {
                prop_assert_eq!(l[(i, j)], l[(j, i)]);
            }
        }
        let eig = l.symmetric_eigen();
        prop_assert!(eig.eigenvalues.min() >= -1e-10);
    }

    #[test]
    fn control_is_odd_and_axis_separable(f in vec2(50.0), g in vec2(50.0), gamma in 0.1f64..10.0, k in 0usize..9) {
        let spec = ControllerSpec::table()[k];
        let u = control_input(f, gamma, spec);
        let v = control_input(-f, gamma, spec);
        prop_assert!((u + v).norm() <= 1e-12 * u.norm().max(1.0));
        let mixed = control_input(Vec2::new(f.x, g.y), gamma, spec);
        prop_assert_eq!(mixed.x, u.x);
        prop_assert_eq!(mixed.y, control_input(g, gamma, spec).y);
        // Each axis pushes along its force component.
        prop_assert!(u.x * f.x >= 0.0 && u.y * f.y >= 0.0);
    }

    #[test]
    fn rotation_preserves_norm_and_sense(f in nonzero_vec2(100.0), theta in 1e-6f64..(PI - 1e-6), dir in rotation()) {
        let r = rotate_force(f, theta, dir);
        prop_assert!((r.norm() - f.norm()).abs() <= 1e-12 * f.norm());
        prop_assert!((f.angle_between(r) - theta).abs() < 1e-9);
        let signed = f.cross(r);
        match dir {
            Rotation::Ccw => prop_assert!(signed > 0.0),
            Rotation::Cw => prop_assert!(signed < 0.0),
        }
        let other = match dir { Rotation::Cw => Rotation::Ccw, Rotation::Ccw => Rotation::Cw };
        let back = rotate_force(r, theta, other);
        prop_assert!((back - f).norm() <= 1e-9 * f.norm());
    }

    #[test]
    fn deflection_direction_flips_under_mirror(att in nonzero_vec2(10.0), rep in nonzero_vec2(10.0)) {
        prop_assume!(att.cross(att - rep).abs() > 1e-9);
        let d = deflection_direction(att, rep);
        let m = deflection_direction(mirror(att), mirror(rep));
        prop_assert_ne!(d, m);
    }

    #[test]
    fn deflection_samples_stay_in_interval(theta_c in 0.0f64..PI, c in 1.05f64..4.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let upper = deflection_bound(theta_c, c);
        match sample_deflection_angle(theta_c, c, &mut rng) {
            Ok(theta) => prop_assert!(theta > 0.0 && theta <= upper),
            Err(_) => prop_assert!(upper <= 0.0),
        }
    }

    /// Rotation never changes |f_e| or the rotation sense, whatever the
    /// energy landscape does.
    #[test]
    fn escape_force_norm_and_direction_invariant(
        att in nonzero_vec2(20.0),
        rep in nonzero_vec2(20.0),
        seed in any::<u64>(),
        slope in vec2(5.0),
    ) {
        let params = AnnealParams::default();
        prop_assume!(deflection_bound(rep.angle_between(att), params.c) > 0.0);
        let mut ctx = init_escape(att, rep, Vec2::ZERO, &params).unwrap();
        let n0 = ctx.f_e_initial.norm();
        let dir = ctx.direction;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec2::ZERO;
        for _ in 0..200 {
            let mv = run_escape_step(
                &mut ctx,
                x,
                &params,
                |p| Some(slope.dot(p) + (p.x * 3.0).sin()),
                |f| x + f * 0.01,
                &mut rng,
            ).unwrap();
            x = mv.position.unwrap();
            prop_assert!((ctx.f_e.norm() - n0).abs() <= 1e-9 * n0);
            prop_assert_eq!(ctx.direction, dir);
        }
    }

    #[test]
    fn smoothing_is_a_convex_blend(a in vec2(100.0), b in vec2(100.0), alpha in 0.0f64..=1.0) {
        let s = smooth_force(a, b, alpha);
        prop_assert!(s.norm() <= a.norm().max(b.norm()) + 1e-9);
        prop_assert!((smooth_force(a, b, 0.0) - b).norm() == 0.0);
    }

    #[test]
    fn metropolis_always_takes_downhill(e in -1e6f64..1e6, drop in 0.0f64..1e3, t in 1e-6f64..1e3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(metropolis_accept(e, e - drop, t, &mut rng));
    }
}

#[test]
fn metropolis_acceptance_rate_matches_boltzmann_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 100_000;
    for t in [0.5, 10.0] {
        let de = t * 2f64.ln();
        let hits = (0..trials)
            .filter(|_| metropolis_accept(1.0, 1.0 + de, t, &mut rng))
            .count();
        let rate = hits as f64 / trials as f64;
        assert!((rate - 0.5).abs() <= 0.01, "T = {t}: rate {rate}");
    }
}
