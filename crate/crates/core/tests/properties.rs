use proptest::prelude::*;

use swe_core::low_order::{low_order_update, Sources};
use swe_core::mesh::{build_interval_mesh, build_quad_mesh, BoundaryKind, QuadMeshSpec, RectangleBoundary};
use swe_core::riemann::{exact_riemann_max_speed, max_wave_speed_primitive};
use swe_core::verification::limited_euler_step;
use swe_core::{PhysConstants, State};

const G: f64 = 9.81;

fn depth() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.0..1e-6, 1e-6..5.0]
}

fn states_1d(n: usize) -> impl Strategy<Value = Vec<State>> {
    prop::collection::vec((depth(), -4.0..4.0f64), n)
        .prop_map(|v| v.into_iter().map(|(h, u)| State::new_1d(h, if h > 0.0 { h * u } else { 0.0 })).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn wave_speed_bound_dominates_exact(h_l in depth(), h_r in depth(), u_l in -8.0..8.0f64, u_r in -8.0..8.0f64) {
        let (u_l, u_r) = (if h_l > 0.0 { u_l } else { 0.0 }, if h_r > 0.0 { u_r } else { 0.0 });
        let bound = max_wave_speed_primitive(h_l, u_l, h_r, u_r, G);
        let exact = exact_riemann_max_speed(h_l, u_l, h_r, u_r, G).unwrap();
        prop_assert!(bound >= exact - 1e-10, "bound {bound} exact {exact}");
    }

    #[test]
    fn low_order_keeps_depth_and_mass(u in states_1d(9), z in prop::collection::vec(0.0..0.5f64, 9), cfl in 0.05..1.0f64) {
        let g = build_interval_mesh(8, 0.0, 2.0, [BoundaryKind::Reflecting; 2]).unwrap();
        let h_max = u.iter().map(|s| s.h).fold(1e-3, f64::max);
        let consts = PhysConstants::new(G, 1e-4, h_max).unwrap();
        let mut w = swe_core::low_order::LowOrderWorkspace::new(&g);
        w.prepare(&g, &u, &z, &consts);
        let tau = cfl * w.max_time_step(&g).unwrap_or(1.0);
        let low = low_order_update(&g, &u, &z, tau, &Sources::NONE, &consts).unwrap();
        let next = &low.update;
        let m = g.lumped_mass();
        let before: f64 = u.iter().zip(m).map(|(s, m)| s.h * m).sum();
        let after: f64 = next.iter().zip(m).map(|(s, m)| s.h * m).sum();
        // Water crosses the boundary only through the diagonal fluxes.
        let boundary: f64 = (0..9).map(|i| low.flux[g.sparsity().diag(i)].h).sum::<f64>() * tau;
        let scale: f64 = u.iter().zip(m).map(|(s, m)| (s.h + s.q[0].abs() * tau) * m).sum();
        prop_assert!(next.iter().all(|s| s.h >= 0.0));
        prop_assert!((after - before - boundary).abs() <= 1e-14 * scale.max(1e-300), "{after} {before} {boundary}");
    }

    #[test]
    fn limited_step_stays_in_local_bounds(
        u in prop::collection::vec((depth(), -3.0..3.0f64, -3.0..3.0f64), 16),
        z in prop::collection::vec(0.0..0.5f64, 16),
        cfl in 0.05..1.0f64,
        distortion in 0.0..0.3f64,
        relax in any::<bool>(),
    ) {
        let g = build_quad_mesh(&QuadMeshSpec {
            nx: 3,
            ny: 3,
            extent: [0.0, 0.0, 1.5, 1.0],
            distortion,
            seed: 9,
            tags: RectangleBoundary::uniform(BoundaryKind::Reflecting),
        })
        .unwrap();
        let u: Vec<State> = u.into_iter().map(|(h, a, b)| if h > 0.0 { State::new(h, [h * a, h * b]) } else { State::ZERO }).collect();
        let step = limited_euler_step(&g, &u, &z, cfl, relax).unwrap();
        let (ok, excess) = step.within_bounds();
        prop_assert!(ok, "bound excess {excess:e}");
        prop_assert!(step.u.iter().all(|s| s.h >= 0.0 && s.is_finite()));
    }
}
