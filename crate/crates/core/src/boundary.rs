//! Boundary conditions enforced by post-processing the boundary states at
//! the end of every stage.

use crate::error::{Error, Result};
use crate::mesh::{BoundaryKind, MeshGraph};
use crate::state::{dot, State, Vec2};

/// Projection removing the normal discharge.
#[inline]
pub fn apply_reflecting(u: &State, n: Vec2) -> State {
    let qn = dot(u.q, n);
    State::new(u.h, [u.q[0] - qn * n[0], u.q[1] - qn * n[1]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowRegime {
    TorrentialInflow,
    TorrentialOutflow,
    FluvialInflow,
    FluvialOutflow,
}

#[inline]
fn velocity(u: &State) -> Vec2 {
    if u.h > 0.0 {
        [u.q[0] / u.h, u.q[1] / u.h]
    } else {
        [0.0; 2]
    }
}

/// Regime of the outward normal velocity relative to the wave speed.
pub fn flow_regime(u: &State, n: Vec2, g: f64) -> FlowRegime {
    let a = (g * u.h.max(0.0)).sqrt();
    let vn = dot(velocity(u), n);
    if vn < 0.0 {
        if a < -vn {
            FlowRegime::TorrentialInflow
        } else {
            FlowRegime::FluvialInflow
        }
    } else if a <= vn {
        FlowRegime::TorrentialOutflow
    } else {
        FlowRegime::FluvialOutflow
    }
}

/// Riemann invariants `(V_n − 2a, V_n + 2a)`.
#[inline]
pub fn riemann_invariants(u: &State, n: Vec2, g: f64) -> (f64, f64) {
    let a = (g * u.h.max(0.0)).sqrt();
    let vn = dot(velocity(u), n);
    (vn - 2.0 * a, vn + 2.0 * a)
}

/// Far-field data must satisfy `V_n ≤ 2a` to be usable in fluvial regimes.
pub fn check_nonreflecting_data(u_d: &State, n: Vec2, g: f64) -> Result<()> {
    let a = (g * u_d.h.max(0.0)).sqrt();
    let vn = dot(velocity(u_d), n);
    if vn > 2.0 * a {
        return Err(Error::Config(format!(
            "non-reflecting boundary data inadmissible: normal velocity {vn} exceeds 2*sqrt(g h) = {}",
            2.0 * a
        )));
    }
    Ok(())
}

/// Result of the non-reflecting post-processing; `clamped` flags a negative
/// invariant difference that was cut to a dry state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonReflecting {
    pub state: State,
    pub regime: FlowRegime,
    pub clamped: bool,
}

/// Match the outgoing invariant of `u` and the incoming one of the far-field
/// state `u_d`, depending on the flow regime.
pub fn apply_nonreflecting(u: &State, u_d: &State, n: Vec2, g: f64) -> NonReflecting {
    let regime = flow_regime(u, n, g);
    let (state, clamped) = match regime {
        FlowRegime::TorrentialInflow => (*u_d, false),
        FlowRegime::TorrentialOutflow => (*u, false),
        FlowRegime::FluvialInflow | FlowRegime::FluvialOutflow => {
            let (r1_d, _) = riemann_invariants(u_d, n, g);
            let (_, r3) = riemann_invariants(u, n, g);
            let diff = r3 - r1_d;
            let clamped = diff < 0.0;
            let a = 0.25 * diff.max(0.0);
            let h = a * a / g;
            let vn = 0.5 * (r1_d + r3);
            let tangential_src = if regime == FlowRegime::FluvialInflow { u_d } else { u };
            let v = velocity(tangential_src);
            let vt = dot(v, n);
            let tang = [v[0] - vt * n[0], v[1] - vt * n[1]];
            (State::new(h, [h * (tang[0] + vn * n[0]), h * (tang[1] + vn * n[1])]), clamped)
        }
    };
    NonReflecting { state, regime, clamped }
}

/// Which components a Dirichlet condition replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirichletMask {
    pub depth: bool,
    pub discharge: bool,
}

impl DirichletMask {
    pub const FULL: DirichletMask = DirichletMask { depth: true, discharge: true };
    pub const DISCHARGE: DirichletMask = DirichletMask { depth: false, discharge: true };
    pub const NONE: DirichletMask = DirichletMask { depth: false, discharge: false };
}

#[inline]
pub fn apply_dirichlet(u: &State, u_d: &State, mask: DirichletMask) -> State {
    State::new(if mask.depth { u_d.h } else { u.h }, if mask.discharge { u_d.q } else { u.q })
}

/// Boundary data provider: far-field / Dirichlet state at a point and time.
pub type BoundaryData<'a> = dyn Fn(Vec2, f64) -> State + 'a;

/// Counters collected while post-processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BoundaryStats {
    pub fluvial_clamps: usize,
}

/// Post-process all boundary nodes at time `t`: reflecting first, then
/// non-reflecting, then Dirichlet. `jump` accumulates `m_i (U^P − U)`.
pub fn apply_boundary_conditions(
    graph: &MeshGraph,
    u: &mut [State],
    t: f64,
    data: Option<&BoundaryData<'_>>,
    g: f64,
    jump: &mut [State],
    stats: &mut BoundaryStats,
) {
    let m = graph.lumped_mass();
    let x = graph.coords();
    let order = [
        BoundaryKind::Reflecting,
        BoundaryKind::NonReflecting,
        BoundaryKind::DirichletDischarge,
        BoundaryKind::Dirichlet,
    ];
    for kind in order {
        for b in graph.boundary_nodes().iter().filter(|b| b.kind == kind) {
            let i = b.node;
            let old = u[i];
            let new = if b.flagged && kind != BoundaryKind::Dirichlet && kind != BoundaryKind::DirichletDischarge {
                b.face_normals.iter().fold(old, |acc, n| apply_reflecting(&acc, *n))
            } else {
                match kind {
                    BoundaryKind::Reflecting => apply_reflecting(&old, b.normal),
                    BoundaryKind::NonReflecting => match data {
                        Some(f) => {
                            let r = apply_nonreflecting(&old, &f(x[i], t), b.normal, g);
                            if r.clamped {
                                stats.fluvial_clamps += 1;
                            }
                            r.state
                        }
                        None => old,
                    },
                    BoundaryKind::Dirichlet => data.map_or(old, |f| apply_dirichlet(&old, &f(x[i], t), DirichletMask::FULL)),
                    BoundaryKind::DirichletDischarge => {
                        data.map_or(old, |f| apply_dirichlet(&old, &f(x[i], t), DirichletMask::DISCHARGE))
                    }
                    BoundaryKind::Free => old,
                }
            };
            if new != old {
                jump[i] += (new - old) * m[i];
                u[i] = new;
            }
        }
    }
}
