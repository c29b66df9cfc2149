//! Built-in test configurations: bathymetry, initial data, exact solutions
//! and boundary data, plus the consolidated error indicator.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::erk::Rain;
use crate::error::{Error, Result};
use crate::mesh::{build_interval_mesh, build_quad_mesh, BoundaryKind, MeshGraph, QuadMeshSpec, RectangleBoundary};
use crate::state::{norm, State, Vec2};

pub type PointFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type StateFn = Arc<dyn Fn(Vec2) -> State + Send + Sync>;
pub type TimeStateFn = Arc<dyn Fn(Vec2, f64) -> State + Send + Sync>;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { x0: f64, x1: f64, tags: [BoundaryKind; 2] },
    /// `extent = [x0, y0, x1, y1]`; `ratio` cells per direction per mesh unit.
    Rectangle { extent: [f64; 4], tags: RectangleBoundary, ratio: [usize; 2] },
}

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub domain: Domain,
    pub bathymetry: PointFn,
    pub initial: StateFn,
    pub exact: Option<TimeStateFn>,
    /// Far-field / Dirichlet data for the boundary post-processing.
    pub boundary_data: Option<TimeStateFn>,
    pub manning: f64,
    pub rain: Option<Rain>,
    pub final_time: f64,
    pub cfl: f64,
    /// Default mesh resolution (cells per mesh unit).
    pub cells: usize,
    pub distortion: f64,
    /// Reference depth when the initial state is dry everywhere.
    pub h_ref: Option<f64>,
    /// Point where a discharge time series is recorded.
    pub probe: Option<Vec2>,
    /// Default for relaxing the limiter bounds in smooth regions.
    pub relax: bool,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("final_time", &self.final_time)
            .field("cfl", &self.cfl)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn mesh(&self, cells: usize, distortion: f64, seed: u64) -> Result<MeshGraph> {
        match self.domain {
            Domain::Interval { x0, x1, tags } => build_interval_mesh(cells, x0, x1, tags),
            Domain::Rectangle { extent, tags, ratio } => build_quad_mesh(&QuadMeshSpec {
                nx: cells * ratio[0],
                ny: cells * ratio[1],
                extent,
                distortion,
                seed,
                tags,
            }),
        }
    }

    pub fn bathymetry_at(&self, graph: &MeshGraph) -> Vec<f64> {
        graph.coords().iter().map(|x| (self.bathymetry)(*x)).collect()
    }

    pub fn initial_at(&self, graph: &MeshGraph) -> Vec<State> {
        graph.coords().iter().map(|x| (self.initial)(*x)).collect()
    }

    pub fn exact_at(&self, graph: &MeshGraph, t: f64) -> Option<Vec<State>> {
        self.exact.as_ref().map(|f| graph.coords().iter().map(|x| f(*x, t)).collect())
    }
}

pub const SCENARIO_NAMES: [&str; 6] = ["three_bumps", "inclined_friction", "rain_test3", "rain_test4", "vortex", "paraboloid"];

/// Conical bump `z = max(0, height − ‖x − center‖ / slope)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cone {
    pub center: Vec2,
    pub height: f64,
    pub slope: f64,
}

pub const DEFAULT_CONES: [Cone; 3] = [
    Cone { center: [30.0, 6.0], height: 1.0, slope: 8.0 },
    Cone { center: [30.0, 24.0], height: 1.0, slope: 8.0 },
    Cone { center: [47.5, 15.0], height: 3.0, slope: 10.0 / 3.0 },
];

pub fn three_bumps() -> Scenario {
    three_bumps_with(&DEFAULT_CONES)
}

/// Lake at rest with surface 1.5 m over conical bumps in `[0,75]×[0,30]`.
pub fn three_bumps_with(cones: &[Cone]) -> Scenario {
    let cones = cones.to_vec();
    let z: PointFn = Arc::new(move |x: Vec2| {
        cones.iter().fold(0.0, |acc: f64, c| {
            acc.max(c.height - norm([x[0] - c.center[0], x[1] - c.center[1]]) / c.slope)
        })
    });
    let zz = z.clone();
    let initial: StateFn = Arc::new(move |x| State::new((1.5 - zz(x)).max(0.0), [0.0; 2]));
    let init = initial.clone();
    Scenario {
        name: "three_bumps".into(),
        domain: Domain::Rectangle {
            extent: [0.0, 0.0, 75.0, 30.0],
            tags: RectangleBoundary::uniform(BoundaryKind::Reflecting),
            ratio: [2, 1],
        },
        bathymetry: z,
        initial,
        exact: Some(Arc::new(move |x, _t| init(x))),
        boundary_data: None,
        manning: 0.0,
        rain: None,
        final_time: 100.0,
        cfl: 0.9,
        cells: 32,
        distortion: 0.25,
        h_ref: None,
        probe: None,
        relax: false,
    }
}

/// Equilibrium depth `(n² q₀² / b)^{3/10}` of uniform flow down a slope.
pub fn normal_depth(manning: f64, q0: f64, slope: f64) -> f64 {
    (manning * manning * q0 * q0 / slope).powf(0.3)
}

/// Uniform flow down `z = −b x` on `(0, 25)` balanced by Manning friction.
pub fn inclined_friction() -> Scenario {
    let (b, q0, n) = (0.01, 0.1, 0.02);
    let h0 = normal_depth(n, q0, b);
    let u0 = State::new_1d(h0, q0);
    Scenario {
        name: "inclined_friction".into(),
        domain: Domain::Interval { x0: 0.0, x1: 25.0, tags: [BoundaryKind::Dirichlet, BoundaryKind::NonReflecting] },
        bathymetry: Arc::new(move |x| -b * x[0]),
        initial: Arc::new(move |_| u0),
        exact: Some(Arc::new(move |_, _| u0)),
        boundary_data: Some(Arc::new(move |_, _| u0)),
        manning: n,
        rain: None,
        final_time: 100.0,
        cfl: 0.5,
        cells: 512,
        distortion: 0.0,
        h_ref: None,
        probe: None,
        relax: false,
    }
}

/// Slope and roughness of the two rain configurations.
pub fn rain_parameters(test: u32) -> Result<(f64, f64)> {
    match test {
        3 => Ok((0.02, 0.033)),
        4 => Ok((0.005, 0.033)),
        _ => Err(Error::UnknownScenario(format!("rain_test{test}"))),
    }
}

/// Rain of 1e-4 m/s for 100 s on an initially dry incline `(0, 2.5)`.
pub fn rain_incline(test: u32) -> Result<Scenario> {
    let (b, n) = rain_parameters(test)?;
    Ok(Scenario {
        name: format!("rain_test{test}"),
        domain: Domain::Interval { x0: 0.0, x1: 2.5, tags: [BoundaryKind::Reflecting, BoundaryKind::Free] },
        bathymetry: Arc::new(move |x| -b * x[0]),
        initial: Arc::new(|_| State::ZERO),
        exact: None,
        boundary_data: None,
        manning: n,
        rain: Some(Rain { rate: 1e-4, start: 0.0, end: 100.0 }),
        final_time: 150.0,
        cfl: 0.5,
        cells: 200,
        distortion: 0.0,
        h_ref: Some(0.01),
        probe: Some([2.5, 0.0]),
        relax: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexParams {
    pub h_inf: f64,
    pub beta: f64,
    pub r0: f64,
    pub v_inf: Vec2,
    pub center: Vec2,
}

impl Default for VortexParams {
    fn default() -> Self {
        VortexParams { h_inf: 2.0, beta: 2.0, r0: 1.0, v_inf: [1.0, 1.0], center: [0.0, 0.0] }
    }
}

/// Exact travelling vortex state.
pub fn vortex_state(p: &VortexParams, x: Vec2, t: f64, g: f64) -> State {
    let xb = [x[0] - p.center[0] - p.v_inf[0] * t, x[1] - p.center[1] - p.v_inf[1] * t];
    let r2 = (xb[0] * xb[0] + xb[1] * xb[1]) / (p.r0 * p.r0);
    let psi = p.beta / (2.0 * PI) * (0.5 * (1.0 - r2)).exp();
    let h = p.h_inf - psi * psi / (2.0 * g * p.r0 * p.r0);
    // ∂ψ/∂x_k = −ψ x̄_k / r0².
    let dpsi = [-psi * xb[0] / (p.r0 * p.r0), -psi * xb[1] / (p.r0 * p.r0)];
    let v = [p.v_inf[0] + dpsi[1], p.v_inf[1] - dpsi[0]];
    State::new(h, [h * v[0], h * v[1]])
}

pub fn vortex() -> Scenario {
    vortex_with(VortexParams::default())
}

pub fn vortex_with(p: VortexParams) -> Scenario {
    let exact: TimeStateFn = Arc::new(move |x, t| vortex_state(&p, x, t, GRAVITY));
    let e0 = exact.clone();
    Scenario {
        name: "vortex".into(),
        domain: Domain::Rectangle {
            extent: [-6.0, -6.0, 6.0, 6.0],
            tags: RectangleBoundary::uniform(BoundaryKind::Dirichlet),
            ratio: [1, 1],
        },
        bathymetry: Arc::new(|_| 0.0),
        initial: Arc::new(move |x| e0(x, 0.0)),
        exact: Some(exact.clone()),
        boundary_data: Some(exact),
        manning: 0.0,
        rain: None,
        final_time: 2.0,
        cfl: 0.25,
        cells: 32,
        distortion: 0.0,
        h_ref: None,
        probe: None,
        relax: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParaboloidParams {
    /// Basin radius scale [m].
    pub a: f64,
    /// Depth at the basin center [m].
    pub h0: f64,
    /// Amplitude of the orbit of the planar surface [m].
    pub eta: f64,
    /// Side length of the square domain [m].
    pub length: f64,
}

impl Default for ParaboloidParams {
    fn default() -> Self {
        ParaboloidParams { a: 1.0, h0: 0.1, eta: 0.5, length: 4.0 }
    }
}

impl ParaboloidParams {
    pub fn omega(&self, g: f64) -> f64 {
        (2.0 * g * self.h0).sqrt() / self.a
    }

    pub fn period(&self, g: f64) -> f64 {
        2.0 * PI / self.omega(g)
    }

    pub fn bathymetry(&self, x: Vec2) -> f64 {
        let c = 0.5 * self.length;
        let r2 = (x[0] - c).powi(2) + (x[1] - c).powi(2);
        -self.h0 * (1.0 - r2 / (self.a * self.a))
    }

    /// Planar free surface rotating around the basin center.
    pub fn state(&self, x: Vec2, t: f64, g: f64) -> State {
        let c = 0.5 * self.length;
        let w = self.omega(g);
        let (s, co) = (w * t).sin_cos();
        let surface = self.eta * self.h0 / (self.a * self.a) * (2.0 * (x[0] - c) * co + 2.0 * (x[1] - c) * s - self.eta);
        let h = (surface - self.bathymetry(x)).max(0.0);
        if h == 0.0 {
            return State::ZERO;
        }
        let v = [-self.eta * w * s, self.eta * w * co];
        State::new(h, [h * v[0], h * v[1]])
    }
}

pub fn paraboloid() -> Scenario {
    paraboloid_with(ParaboloidParams::default())
}

/// Thacker's planar surface in a paraboloid, run for three periods.
pub fn paraboloid_with(p: ParaboloidParams) -> Scenario {
    let exact: TimeStateFn = Arc::new(move |x, t| p.state(x, t, GRAVITY));
    let e0 = exact.clone();
    Scenario {
        name: "paraboloid".into(),
        domain: Domain::Rectangle {
            extent: [0.0, 0.0, p.length, p.length],
            tags: RectangleBoundary::uniform(BoundaryKind::Reflecting),
            ratio: [1, 1],
        },
        bathymetry: Arc::new(move |x| p.bathymetry(x)),
        initial: Arc::new(move |x| e0(x, 0.0)),
        exact: Some(exact),
        boundary_data: None,
        manning: 0.0,
        rain: None,
        final_time: 3.0 * p.period(GRAVITY),
        cfl: 0.5,
        cells: 32,
        distortion: 0.0,
        h_ref: None,
        probe: None,
        relax: true,
    }
}

pub fn scenario_by_name(name: &str) -> Result<Scenario> {
    match name.trim().to_ascii_lowercase().as_str() {
        "three_bumps" => Ok(three_bumps()),
        "inclined_friction" => Ok(inclined_friction()),
        "rain_test3" => rain_incline(3),
        "rain_test4" => rain_incline(4),
        "vortex" => Ok(vortex()),
        "paraboloid" => Ok(paraboloid()),
        _ => Err(Error::UnknownScenario(name.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    Linf,
}

/// `‖H − h_ex‖ / ‖h_ex‖ + ‖Q − q_ex‖ / ‖q_ex‖`, with lumped-mass quadrature
/// for `L¹` and the nodal maximum for `L^∞`. The discharge term is absolute
/// when `q_ex` vanishes.
pub fn error_norm(graph: &MeshGraph, u: &[State], exact: &[State], which: Norm) -> Result<f64> {
    let m = graph.lumped_mass();
    let (mut eh, mut nh, mut eq, mut nq) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..u.len() {
        let dh = (u[i].h - exact[i].h).abs();
        let dq = norm([u[i].q[0] - exact[i].q[0], u[i].q[1] - exact[i].q[1]]);
        let (h, q) = (exact[i].h.abs(), norm(exact[i].q));
        match which {
            Norm::L1 => {
                eh += m[i] * dh;
                nh += m[i] * h;
                eq += m[i] * dq;
                nq += m[i] * q;
            }
            Norm::Linf => {
                eh = eh.max(dh);
                nh = nh.max(h);
                eq = eq.max(dq);
                nq = nq.max(q);
            }
        }
    }
    if nh == 0.0 {
        return Err(Error::Config("exact water depth vanishes; relative error undefined".into()));
    }
    Ok(eh / nh + if nq > 0.0 { eq / nq } else { eq })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vortex_center_by_hand() {
        let u = vortex_state(&VortexParams::default(), [0.0, 0.0], 0.0, GRAVITY);
        let psi = 1.0 / PI * 0.5_f64.exp();
        assert!((psi - 0.524_804_280_025_352_6).abs() < 1e-15);
        assert!((u.h - (2.0 - psi * psi / (2.0 * GRAVITY))).abs() < 1e-15);
        assert!((u.h - 1.98596).abs() < 1e-5);
        assert!((u.q[0] / u.h - 1.0).abs() < 1e-15 && (u.q[1] / u.h - 1.0).abs() < 1e-15);
        let far = vortex_state(&VortexParams::default(), [6.0, -6.0], 0.0, GRAVITY);
        assert!((far.h - 2.0).abs() < 1e-12 && (far.q[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn vortex_is_divergence_free_and_travels() {
        let p = VortexParams::default();
        let a = vortex_state(&p, [0.3, -0.2], 0.0, GRAVITY);
        let b = vortex_state(&p, [0.8, 0.3], 0.5, GRAVITY);
        assert!((a - b).max_abs() < 1e-14);
    }

    #[test]
    fn paraboloid_period_and_shoreline() {
        let p = ParaboloidParams::default();
        assert!((3.0 * p.period(GRAVITY) - 13.457_104_40).abs() < 5e-9);
        // Shoreline is the circle where the plane meets the bowl.
        for t in [0.0, 1.0, 2.5] {
            let s = paraboloid().exact.unwrap();
            let w = p.omega(GRAVITY);
            let center = [2.0 + p.eta * (w * t).cos(), 2.0 + p.eta * (w * t).sin()];
            assert!(s(center, t).h > 0.0);
            for k in 0..8 {
                let ang = k as f64 * PI / 4.0;
                let edge = [center[0] + 1.001 * ang.cos(), center[1] + 1.001 * ang.sin()];
                assert_eq!(s(edge, t).h, 0.0);
                let inner = [center[0] + 0.999 * ang.cos(), center[1] + 0.999 * ang.sin()];
                assert!(s(inner, t).h > 0.0);
            }
        }
    }

    #[test]
    fn three_bump_initial_surface() {
        let s = three_bumps();
        for x in [[0.0, 0.0], [30.0, 6.0], [47.5, 15.0], [44.0, 14.0], [60.0, 20.0]] {
            let u = (s.initial)(x);
            let z = (s.bathymetry)(x);
            assert_eq!(u.q, [0.0; 2]);
            if u.h > 0.0 {
                assert!((u.h + z - 1.5).abs() < 1e-15);
            }
        }
        assert_eq!((s.initial)([47.5, 15.0]).h, 0.0);
        assert!((s.initial)([30.0, 6.0]).h > 0.0);
    }

    #[test]
    fn normal_depth_value() {
        assert!((normal_depth(0.02, 0.1, 0.01) - 0.0956352).abs() < 5e-8);
    }

    #[test]
    fn error_norm_examples() {
        let g = build_interval_mesh(10, 0.0, 1.0, [BoundaryKind::Free; 2]).unwrap();
        let ex = vec![State::new_1d(1.0, 0.0); 11];
        assert_eq!(error_norm(&g, &ex, &ex, Norm::L1).unwrap(), 0.0);
        let u: Vec<State> = ex.iter().map(|s| State::new_1d(s.h + 1e-3, 0.0)).collect();
        assert!((error_norm(&g, &u, &ex, Norm::L1).unwrap() - 1e-3).abs() < 1e-15);
        assert!((error_norm(&g, &u, &ex, Norm::Linf).unwrap() - 1e-3).abs() < 1e-15);
        assert!(error_norm(&g, &u, &vec![State::ZERO; 11], Norm::L1).is_err());
    }

    #[test]
    fn exactness_at_start() {
        for name in ["three_bumps", "inclined_friction", "vortex", "paraboloid"] {
            let s = scenario_by_name(name).unwrap();
            let g = s.mesh(8, 0.0, 1).unwrap();
            let u0 = s.initial_at(&g);
            assert!(u0.iter().all(|u| u.h >= 0.0 && (u.h > 0.0 || u.q == [0.0; 2])));
            let ex = s.exact_at(&g, 0.0).unwrap();
            assert!(error_norm(&g, &u0, &ex, Norm::Linf).unwrap() <= 1e-13);
        }
        assert!(scenario_by_name("nope").is_err());
    }
}
