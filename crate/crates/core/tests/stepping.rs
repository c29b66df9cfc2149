use swe_core::boundary::BoundaryData;
use swe_core::erk::{builtin_scheme, ErkStepper, LimiterMode, Problem, StageOptions};
use swe_core::high_order::high_order_fluxes;
use swe_core::low_order::{low_order_update, LowOrderWorkspace, Sources};
use swe_core::{build_interval_mesh, build_quad_mesh, BoundaryKind, MeshGraph, PhysConstants, QuadMeshSpec, RectangleBoundary, State};

const G: f64 = 9.81;

fn consts(h_max: f64) -> PhysConstants {
    PhysConstants { g: G, eps_reg: 1e-4, h_max_ref: h_max }
}

fn problem<'a>(graph: &'a MeshGraph, z: &'a [f64], c: PhysConstants, options: StageOptions) -> Problem<'a> {
    Problem { graph, bathymetry: z, consts: c, manning: 0.0, rain: None, boundary_data: None, options }
}

fn run(p: &Problem<'_>, scheme: &str, u: &mut [State], t_end: f64, cfl: f64) -> ErkStepper {
    let mut st = ErkStepper::new(builtin_scheme(scheme).unwrap(), p.graph, &p.options);
    let mut t = 0.0;
    let mut cycle = 0;
    while t < t_end * (1.0 - 1e-14) {
        let info = st.step(p, u, t, cfl, 1.0, t_end, cycle).unwrap();
        t += info.dt;
        cycle += 1;
    }
    st
}

#[test]
fn lake_at_rest_2d_distorted() {
    let g = build_quad_mesh(&QuadMeshSpec {
        nx: 12,
        ny: 10,
        extent: [0.0, 0.0, 2.0, 1.0],
        distortion: 0.2,
        seed: 3,
        tags: RectangleBoundary::uniform(BoundaryKind::Reflecting),
    })
    .unwrap();
    let z: Vec<f64> = g
        .coords()
        .iter()
        .map(|x| (0.8 - 4.0 * ((x[0] - 0.7).powi(2) + (x[1] - 0.5).powi(2))).max(0.0))
        .collect();
    let u0: Vec<State> = z.iter().map(|z| State::new((0.5 - z).max(0.0), [0.0; 2])).collect();
    let p = problem(&g, &z, consts(0.5), StageOptions::default());
    let mut st = ErkStepper::new(builtin_scheme("RK(3,3;1)").unwrap(), &g, &p.options);
    let mut u = u0.clone();
    let mut t = 0.0;
    for cycle in 0..100 {
        t += st.step(&p, &mut u, t, 0.9, 0.01, f64::INFINITY, cycle).unwrap().dt;
    }
    let err = u.iter().zip(&u0).map(|(a, b)| (*a - *b).max_abs()).fold(0.0, f64::max);
    assert!(err < 1e-13, "{err}");
}

#[test]
fn forward_euler_low_order_matches_direct_update() {
    let g = build_interval_mesh(20, 0.0, 1.0, [BoundaryKind::Free; 2]).unwrap();
    let z: Vec<f64> = g.coords().iter().map(|x| 0.1 * (3.0 * x[0]).sin()).collect();
    let u0: Vec<State> = g.coords().iter().map(|x| State::new_1d(1.0 + 0.2 * (x[0] > 0.5) as u8 as f64, 0.3)).collect();
    let c = consts(1.2);
    let opts = StageOptions { limiter: LimiterMode::LowOrder, ..StageOptions::default() };
    let p = problem(&g, &z, c, opts);
    let mut st = ErkStepper::new(builtin_scheme("RK(1,1;1)").unwrap(), &g, &opts);
    let mut u = u0.clone();
    let tau = st.time_step(&p, &u, 0.5, 1.0).unwrap();
    st.step(&p, &mut u, 0.0, 0.5, 1.0, 1.0, 0).unwrap();
    let direct = low_order_update(&g, &u0, &z, tau, &Sources::NONE, &c).unwrap();
    for (a, b) in u.iter().zip(&direct.update) {
        assert!((*a - *b).max_abs() < 1e-14);
    }
}

/// Stage-wise recurrence `U^(l+1) = U^(l) + τ Σ_k w_lk L(U^(k))` evaluated
/// directly with the high-order operator `L = M_L^{-1} Σ_j F^H_ij`.
fn classical(g: &MeshGraph, z: &[f64], c: &PhysConstants, weights: &[Vec<f64>], u0: &[State], tau: f64) -> Vec<State> {
    let mut low = LowOrderWorkspace::new(g);
    let s = g.sparsity();
    let m = g.lumped_mass();
    let mut stages: Vec<Vec<State>> = Vec::new();
    let mut u = u0.to_vec();
    for w in weights {
        low.prepare(g, &u, z, c);
        let mut f = vec![State::ZERO; s.nnz()];
        let d = low.d.clone();
        high_order_fluxes(g, &u, z, &low, &d, c.g, &mut f);
        stages.push((0..s.rows()).map(|i| s.row(i).fold(State::ZERO, |a, k| a + f[k]) * (1.0 / m[i])).collect());
        u = (0..u.len()).map(|i| w.iter().enumerate().fold(u[i], |a, (k, wk)| a + stages[k][i] * (tau * wk))).collect();
    }
    u
}

#[test]
fn unlimited_stages_follow_classical_recurrence() {
    let g = build_interval_mesh(40, 0.0, 1.0, [BoundaryKind::Free; 2]).unwrap();
    let z: Vec<f64> = g.coords().iter().map(|x| 0.05 * (6.0 * x[0]).cos()).collect();
    let u0: Vec<State> =
        g.coords().iter().map(|x| State::new_1d(1.0 + 0.1 * (6.0 * x[0]).sin(), 0.2 + 0.05 * x[0])).collect();
    let c = consts(1.1);
    let opts =
        StageOptions { limiter: LimiterMode::Unlimited, mass_correction: false, indicator: false, ..Default::default() };
    let p = problem(&g, &z, c, opts);
    for name in ["RK(2,2;1)", "RK(3,3;1)", "RK(4,3;1)", "RK(5,4;1)"] {
        let scheme = builtin_scheme(name).unwrap();
        let mut st = ErkStepper::new(scheme.clone(), &g, &opts);
        let mut u = u0.clone();
        let info = st.step(&p, &mut u, 0.0, 0.3, 1.0, 1.0, 0).unwrap();
        let reference = classical(&g, &z, &c, scheme.weights().unwrap(), &u0, info.tau_n);
        let err = u.iter().zip(&reference).map(|(a, b)| (*a - *b).max_abs()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{name}: {err}");
    }
}

#[test]
fn reflecting_box_conserves_mass_and_stays_positive() {
    let g = build_interval_mesh(100, 0.0, 1.0, [BoundaryKind::Reflecting; 2]).unwrap();
    let z = vec![0.0; g.node_count()];
    let u0: Vec<State> = g.coords().iter().map(|x| State::new_1d(if x[0] < 0.5 { 1.0 } else { 1e-3 }, 0.0)).collect();
    let p = problem(&g, &z, consts(1.0), StageOptions::default());
    let mut u = u0.clone();
    let st = run(&p, "RK(3,3;1)", &mut u, 0.1, 0.9);
    let m = g.lumped_mass();
    let mass0: f64 = u0.iter().zip(m).map(|(u, m)| u.h * m).sum();
    let mass1: f64 = u.iter().zip(m).map(|(u, m)| u.h * m).sum();
    assert!(((mass1 - mass0) - st.budget.total().h).abs() < 1e-13 * mass0);
    assert!((mass1 - mass0).abs() < 1e-13 * mass0);
    assert!(u.iter().all(|u| u.h >= 0.0 && u.is_finite()));
}

#[test]
fn budget_tracks_boundary_inflow() {
    let g = build_interval_mesh(50, 0.0, 1.0, [BoundaryKind::Dirichlet, BoundaryKind::Free]).unwrap();
    let z = vec![0.0; g.node_count()];
    let data = |_x: [f64; 2], _t: f64| State::new_1d(1.0, 0.5);
    let data: &BoundaryData = &data;
    let u0 = vec![State::new_1d(0.8, 0.1); g.node_count()];
    let mut p = problem(&g, &z, consts(1.0), StageOptions::default());
    p.boundary_data = Some(data);
    for scheme in ["RK(3,3;1)", "RK(3,3;1/3)"] {
        let mut u = u0.clone();
        let st = run(&p, scheme, &mut u, 0.05, 0.5);
        let m = g.lumped_mass();
        let drift: f64 = u.iter().zip(&u0).zip(m).map(|((a, b), m)| (a.h - b.h) * m).sum::<f64>() - st.budget.total().h;
        assert!(drift.abs() < 1e-13, "{scheme}: {drift}");
    }
}

#[test]
fn ssp_needs_three_times_the_stages() {
    let g = build_interval_mesh(50, 0.0, 1.0, [BoundaryKind::Reflecting; 2]).unwrap();
    let z = vec![0.0; g.node_count()];
    let u0: Vec<State> = g.coords().iter().map(|x| State::new_1d(1.0 + 0.1 * (-50.0 * (x[0] - 0.5).powi(2)).exp(), 0.0)).collect();
    let p = problem(&g, &z, consts(1.1), StageOptions::default());
    let mut a = u0.clone();
    let erk = run(&p, "RK(3,3;1)", &mut a, 0.2, 0.5);
    let mut b = u0.clone();
    let ssp = run(&p, "RK(3,3;1/3)", &mut b, 0.2, 0.5);
    let ratio = ssp.stage_count as f64 / erk.stage_count as f64;
    assert!((ratio - 3.0).abs() < 0.15, "{ratio}");
    let diff = a.iter().zip(&b).map(|(a, b)| (*a - *b).max_abs()).fold(0.0, f64::max);
    assert!(diff < 1e-2, "{diff}");
}
