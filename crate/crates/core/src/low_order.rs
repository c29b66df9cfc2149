//! First-order, invariant-domain preserving forward-Euler update with
//! hydrostatic reconstruction, graph viscosity, affine shift and the
//! rain/friction sources.

use crate::error::{Error, Result};
use crate::mesh::MeshGraph;
use crate::riemann::{bar_state_with_velocity, max_wave_speed_primitive};
use crate::state::{dot, norm, regularized_velocity, PhysConstants, State, Vec2};

/// Reconstructed depth `max(0, h_i + z_i − max(z_i, z_j))` and state
/// `(H*, v_i H*)`.
#[inline]
pub fn hydrostatic_star(u_i: &State, z_i: f64, z_j: f64, v_i: Vec2) -> (f64, State) {
    let h = (u_i.h + z_i - z_i.max(z_j)).max(0.0);
    (h, State::new(h, [v_i[0] * h, v_i[1] * h]))
}

/// Rain and Manning friction parameters for one stage. `rain` is the rate
/// already multiplied by its time-window indicator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sources {
    /// Manning roughness coefficient [s m^{-1/3}].
    pub manning: f64,
    /// Rain rate [m/s].
    pub rain: f64,
}

impl Sources {
    pub const NONE: Sources = Sources { manning: 0.0, rain: 0.0 };

    pub fn is_active(&self) -> bool {
        self.manning != 0.0 || self.rain != 0.0
    }
}

/// Source vector `(R, −g n² q ‖v‖ / ℋ)` with the regularized friction depth
/// `ℋ = ½[h^{4/3} + max(h^{4/3}, 2 g n² τ ‖v‖)]`.
#[inline]
pub fn manning_rain_source(u: &State, v: Vec2, tau: f64, src: &Sources, g: f64) -> State {
    let mut s = State::new(src.rain, [0.0; 2]);
    if src.manning == 0.0 {
        return s;
    }
    let speed = norm(v);
    if speed == 0.0 {
        return s;
    }
    let gn2 = g * src.manning * src.manning;
    let h43 = u.h.max(0.0).powf(4.0 / 3.0);
    let hh = 0.5 * (h43 + h43.max(2.0 * gn2 * tau * speed));
    let k = -gn2 * speed / hh;
    s.q = [k * u.q[0], k * u.q[1]];
    s
}

/// Low-order flux between `i` and `j` from the reconstructed states.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn low_order_flux(
    star_i: &State,
    v_i: Vec2,
    star_j: &State,
    v_j: Vec2,
    h_i: f64,
    c: Vec2,
    d: f64,
    g: f64,
) -> State {
    let vc_i = dot(v_i, c);
    let vc_j = dot(v_j, c);
    let p = g * (0.5 * star_j.h * star_j.h - 0.5 * star_i.h * star_i.h + h_i * h_i);
    State {
        h: -(star_j.h * vc_j + star_i.h * vc_i) + d * (star_j.h - star_i.h),
        q: [
            -(star_j.q[0] * vc_j + star_i.q[0] * vc_i) + d * (star_j.q[0] - star_i.q[0]) - p * c[0],
            -(star_j.q[1] * vc_j + star_i.q[1] * vc_i) + d * (star_j.q[1] - star_i.q[1]) - p * c[1],
        ],
    }
}

/// Per-stage low-order data, indexed like the graph's sparsity pattern.
#[derive(Debug, Clone)]
pub struct LowOrderWorkspace {
    /// Regularized velocity per node.
    pub velocity: Vec<Vec2>,
    /// `H_i^{j,*}` for entry `(i, j)`; the diagonal holds `h_i`.
    pub h_star: Vec<f64>,
    /// Graph viscosity; the diagonal holds `−Σ_{j≠i} d_ij`.
    pub d: Vec<f64>,
    pub flux: Vec<State>,
    /// Affine shift `B_i`.
    pub shift: Vec<State>,
    pub source: Vec<State>,
    pub update: Vec<State>,
}

impl LowOrderWorkspace {
    pub fn new(graph: &MeshGraph) -> Self {
        let n = graph.node_count();
        let nnz = graph.sparsity().nnz();
        LowOrderWorkspace {
            velocity: vec![[0.0; 2]; n],
            h_star: vec![0.0; nnz],
            d: vec![0.0; nnz],
            flux: vec![State::ZERO; nnz],
            shift: vec![State::ZERO; n],
            source: vec![State::ZERO; n],
            update: vec![State::ZERO; n],
        }
    }

    /// Velocities, reconstructed depths and graph viscosity for `u`.
    pub fn prepare(&mut self, graph: &MeshGraph, u: &[State], z: &[f64], consts: &PhysConstants) {
        let s = graph.sparsity();
        let c = graph.c_entries();
        let cn = graph.c_norms();
        for (v, ui) in self.velocity.iter_mut().zip(u) {
            *v = regularized_velocity(ui, consts);
        }
        for i in 0..s.rows() {
            for k in s.row(i) {
                let j = s.col(k);
                self.h_star[k] = if j == i { u[i].h } else { (u[i].h + z[i] - z[i].max(z[j])).max(0.0) };
            }
        }
        for i in 0..s.rows() {
            let kd = s.diag(i);
            for k in s.row(i) {
                let j = s.col(k);
                if j <= i {
                    continue;
                }
                let kt = s.transpose(k);
                let (hi, hj) = (self.h_star[k], self.h_star[kt]);
                let (vi, vj) = (self.velocity[i], self.velocity[j]);
                let mut dij = 0.0;
                if cn[k] > 0.0 {
                    let n = [c[k][0] / cn[k], c[k][1] / cn[k]];
                    dij = max_wave_speed_primitive(hi, dot(vi, n), hj, dot(vj, n), consts.g) * cn[k];
                }
                let antisymmetric = c[kt][0] == -c[k][0] && c[kt][1] == -c[k][1];
                if !antisymmetric && cn[kt] > 0.0 {
                    let n = [c[kt][0] / cn[kt], c[kt][1] / cn[kt]];
                    let dji = max_wave_speed_primitive(hj, dot(vj, n), hi, dot(vi, n), consts.g) * cn[kt];
                    dij = dij.max(dji);
                }
                self.d[k] = dij;
                self.d[kt] = dij;
            }
            self.d[kd] = 0.0;
        }
        for i in 0..s.rows() {
            let kd = s.diag(i);
            let sum: f64 = s.row(i).filter(|&k| k != kd).map(|k| self.d[k]).sum();
            self.d[kd] = -sum;
        }
    }

    /// Largest admissible forward-Euler step `min_i m_i / (2|d_ii|)`, or
    /// `None` when every diagonal viscosity vanishes.
    pub fn max_time_step(&self, graph: &MeshGraph) -> Option<f64> {
        let s = graph.sparsity();
        let m = graph.lumped_mass();
        let mut t = f64::INFINITY;
        for i in 0..s.rows() {
            let dii = self.d[s.diag(i)].abs();
            if dii > 0.0 {
                t = t.min(m[i] / (2.0 * dii));
            }
        }
        t.is_finite().then_some(t)
    }

    /// Reconstructed state `U_i^{j,*}` for entry `k = (i, j)`; the diagonal
    /// entry returns `U_i` itself.
    #[inline]
    pub fn star(&self, u: &[State], i: usize, j: usize, k: usize) -> State {
        if i == j {
            return u[i];
        }
        let h = self.h_star[k];
        let v = self.velocity[i];
        State::new(h, [v[0] * h, v[1] * h])
    }

    /// Bar state `Ū_ij`; equals `U_i` on the diagonal and on edges without
    /// viscosity.
    #[inline]
    pub fn bar_state(&self, graph: &MeshGraph, u: &[State], g: f64, i: usize, k: usize) -> State {
        let s = graph.sparsity();
        let j = s.col(k);
        let d = self.d[k];
        if j == i || d <= 0.0 {
            return u[i];
        }
        let kt = s.transpose(k);
        let si = self.star(u, i, j, k);
        let sj = self.star(u, j, i, kt);
        bar_state_with_velocity(&si, self.velocity[i], &sj, self.velocity[j], graph.c_entries()[k], d, g)
    }

    /// Fluxes, affine shift, sources and the low-order update for step `tau`.
    pub fn assemble(
        &mut self,
        graph: &MeshGraph,
        u: &[State],
        tau: f64,
        sources: &Sources,
        consts: &PhysConstants,
    ) -> Result<()> {
        if let Some(tau_max) = self.max_time_step(graph) {
            if tau > tau_max * (1.0 + 1e-12) {
                return Err(Error::Cfl { tau, tau_max });
            }
        }
        let s = graph.sparsity();
        let c = graph.c_entries();
        let m = graph.lumped_mass();
        let g = consts.g;
        for i in 0..s.rows() {
            let vi = self.velocity[i];
            let mut sum = State::ZERO;
            let mut shift = State::ZERO;
            for k in s.row(i) {
                let j = s.col(k);
                let kt = s.transpose(k);
                let si = self.star(u, i, j, k);
                let sj = self.star(u, j, i, kt);
                let f = low_order_flux(&si, vi, &sj, self.velocity[j], u[i].h, c[k], self.d[k], g);
                self.flux[k] = f;
                sum += f;
                if j != i {
                    shift += (si - u[i]) * (-2.0 * (self.d[k] + dot(vi, c[k])));
                }
            }
            let src = manning_rain_source(&u[i], vi, tau, sources, g);
            self.shift[i] = shift;
            self.source[i] = src;
            self.update[i] = u[i] + (sum + src * m[i]) * (tau / m[i]);
        }
        Ok(())
    }
}

/// Graph viscosity for every stencil entry.
pub fn low_order_viscosity(graph: &MeshGraph, u: &[State], z: &[f64], consts: &PhysConstants) -> Vec<f64> {
    let mut w = LowOrderWorkspace::new(graph);
    w.prepare(graph, u, z, consts);
    w.d
}

/// One low-order forward-Euler step. Refuses steps above the admissible
/// bound and reports it.
pub fn low_order_update(
    graph: &MeshGraph,
    u: &[State],
    z: &[f64],
    tau: f64,
    sources: &Sources,
    consts: &PhysConstants,
) -> Result<LowOrderWorkspace> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {tau}")));
    }
    let mut w = LowOrderWorkspace::new(graph);
    w.prepare(graph, u, z, consts);
    w.assemble(graph, u, tau, sources, consts)?;
    Ok(w)
}
