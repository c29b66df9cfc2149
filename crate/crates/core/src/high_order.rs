//! High-order fluxes: entropy-commutator indicator, reduced graph viscosity,
//! consistent-mass correction and the antidiffusive increments `P_ij`.

use crate::low_order::LowOrderWorkspace;
use crate::mesh::MeshGraph;
use crate::state::{
    dot, entropy_flux_flat_with_velocity, flux_dot, grad_entropy_flat_with_velocity,
    PhysConstants, State, Vec2,
};

/// Indicator `α_i = |N_i| / (D_i + ε D_max)` for every node, clipped to
/// `[0, 1]`. `velocity` holds the regularized velocities of `u`.
pub fn entropy_indicator(graph: &MeshGraph, u: &[State], velocity: &[Vec2], consts: &PhysConstants) -> Vec<f64> {
    let mut alpha = vec![0.0; u.len()];
    entropy_indicator_into(graph, u, velocity, consts, &mut alpha);
    alpha
}

pub(crate) fn entropy_indicator_into(
    graph: &MeshGraph,
    u: &[State],
    velocity: &[Vec2],
    consts: &PhysConstants,
    alpha: &mut [f64],
) {
    let g = consts.g;
    let hm = consts.h_max_ref;
    let d_max = (g * hm).sqrt() * 0.5 * g * hm * hm;
    let floor = consts.eps_reg * d_max;
    let s = graph.sparsity();
    let c = graph.c_entries();
    for i in 0..s.rows() {
        let grad = grad_entropy_flat_with_velocity(&u[i], velocity[i], g);
        let mut ent = 0.0;
        let mut chain = 0.0;
        for k in s.row(i) {
            let j = s.col(k);
            let ef = entropy_flux_flat_with_velocity(&u[j], velocity[j], g);
            ent += dot(ef, c[k]);
            let f = flux_dot(&u[j], velocity[j], c[k], g);
            chain += grad.h * f.h + dot(grad.q, f.q);
        }
        let num = (ent - chain).abs();
        let den = ent.abs() + chain.abs() + floor;
        alpha[i] = if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.0 };
    }
}

/// `d^H_ij = d^L_ij (α_i + α_j) / 2`, diagonal closing the row sum.
pub fn high_order_viscosity(graph: &MeshGraph, d_low: &[f64], alpha: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; d_low.len()];
    high_order_viscosity_into(graph, d_low, alpha, &mut d);
    d
}

pub(crate) fn high_order_viscosity_into(graph: &MeshGraph, d_low: &[f64], alpha: &[f64], d: &mut [f64]) {
    let s = graph.sparsity();
    for i in 0..s.rows() {
        let kd = s.diag(i);
        let mut sum = 0.0;
        for k in s.row(i) {
            if k == kd {
                continue;
            }
            let j = s.col(k);
            d[k] = d_low[k] * 0.5 * (alpha[i] + alpha[j]);
            sum += d[k];
        }
        d[kd] = -sum;
    }
}

/// High-order flux between `i` and `j`.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn high_order_flux(
    u_i: &State,
    v_i: Vec2,
    u_j: &State,
    v_j: Vec2,
    star_i: &State,
    star_j: &State,
    dz: f64,
    c: Vec2,
    d: f64,
    g: f64,
) -> State {
    let vc_i = dot(v_i, c);
    let vc_j = dot(v_j, c);
    let p = g * (u_i.h * u_j.h + u_i.h * dz);
    State {
        h: -(u_j.h * vc_j + u_i.h * vc_i) + d * (star_j.h - star_i.h),
        q: [
            -(u_j.q[0] * vc_j + u_i.q[0] * vc_i) + d * (star_j.q[0] - star_i.q[0]) - p * c[0],
            -(u_j.q[1] * vc_j + u_i.q[1] * vc_i) + d * (star_j.q[1] - star_i.q[1]) - p * c[1],
        ],
    }
}

/// Fill `out` with `F^H_ij` for every entry, reusing the reconstruction and
/// velocities stored in `low`.
pub fn high_order_fluxes(
    graph: &MeshGraph,
    u: &[State],
    z: &[f64],
    low: &LowOrderWorkspace,
    d_high: &[f64],
    g: f64,
    out: &mut [State],
) {
    let s = graph.sparsity();
    let c = graph.c_entries();
    for i in 0..s.rows() {
        let vi = low.velocity[i];
        for k in s.row(i) {
            let j = s.col(k);
            let kt = s.transpose(k);
            let si = low.star(u, i, j, k);
            let sj = low.star(u, j, i, kt);
            out[k] = high_order_flux(&u[i], vi, &u[j], low.velocity[j], &si, &sj, z[j] - z[i], c[k], d_high[k], g);
        }
    }
}

/// Row sums `Σ_j F_ij`.
pub fn node_sums(graph: &MeshGraph, flux: &[State], out: &mut [State]) {
    let s = graph.sparsity();
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = State::ZERO;
        for k in s.row(i) {
            acc += flux[k];
        }
        *o = acc;
    }
}

/// Correction entries `b_ij = δ_ij − m_ij / m_j`.
pub fn mass_correction(graph: &MeshGraph) -> Vec<f64> {
    let s = graph.sparsity();
    let m = graph.lumped_mass();
    let mass = graph.mass_entries();
    let mut b = vec![0.0; s.nnz()];
    for i in 0..s.rows() {
        for k in s.row(i) {
            let j = s.col(k);
            b[k] = if i == j { 1.0 } else { 0.0 } - mass[k] / m[j];
        }
    }
    b
}

/// Consistent-mass product `Σ_j m_ij S_j`.
pub fn mass_product(graph: &MeshGraph, s_node: &[State], out: &mut [State]) {
    let s = graph.sparsity();
    let mass = graph.mass_entries();
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = State::ZERO;
        for k in s.row(i) {
            acc += s_node[s.col(k)] * mass[k];
        }
        *o = acc;
    }
}

/// Limiter weight `λ_i = 1 / Card(I*(i))`.
#[inline]
pub fn limiter_weight(graph: &MeshGraph, i: usize) -> f64 {
    1.0 / graph.sparsity().off_diag_count(i) as f64
}

/// Source contributions to the increments: the high-order source `S̆`, its
/// consistent-mass product `Y = M S̆` and the low-order source.
#[derive(Debug, Clone, Copy)]
pub struct SourceIncrements<'a> {
    pub high: &'a [State],
    pub high_mass: &'a [State],
    pub low: &'a [State],
}

/// Increments `P_ij` for every off-diagonal entry; diagonal entries are set
/// to zero. The mismatch between the diagonal high- and low-order terms
/// (nonzero only when the high-order data stem from other stages or from
/// sources) is spread evenly over the off-diagonal increments so that
/// `Σ_j λ_i P_ij` reproduces the high-order update exactly.
#[allow(clippy::too_many_arguments)]
pub fn assemble_p(
    graph: &MeshGraph,
    tau: f64,
    flux_high: &[State],
    flux_high_sum: &[State],
    flux_low: &[State],
    b: &[f64],
    sources: Option<SourceIncrements<'_>>,
    out: &mut [State],
) {
    let s = graph.sparsity();
    let m = graph.lumped_mass();
    let mass = graph.mass_entries();
    for i in 0..s.rows() {
        let kd = s.diag(i);
        let lambda = limiter_weight(graph, i);
        let scale = tau / (m[i] * lambda);
        let mut diag = flux_high[kd] - flux_low[kd];
        if let Some(src) = sources {
            diag += (src.high[i] - src.low[i]) * mass[kd];
        }
        let diag = diag * lambda;
        for k in s.row(i) {
            if k == kd {
                out[k] = State::ZERO;
                continue;
            }
            let j = s.col(k);
            let kt = s.transpose(k);
            let mut p = flux_high[k] - flux_low[k] + flux_high_sum[j] * b[k] - flux_high_sum[i] * b[kt] + diag;
            if let Some(src) = sources {
                p += (src.high[j] - src.low[i]) * mass[k] + src.high_mass[j] * b[k] - src.high_mass[i] * b[kt];
            }
            out[k] = p * scale;
        }
    }
}

/// Provisional high-order forward-Euler state,
/// `U_i + τ/m_i Σ_j (F^H_ij + b_ij F^H_j − b_ji F^H_i)`. Diagnostic only:
/// it need not be admissible.
pub fn provisional_high_update(
    graph: &MeshGraph,
    u: &[State],
    flux_high: &[State],
    b: &[f64],
    tau: f64,
) -> Vec<State> {
    let s = graph.sparsity();
    let m = graph.lumped_mass();
    let mut sums = vec![State::ZERO; u.len()];
    node_sums(graph, flux_high, &mut sums);
    (0..s.rows())
        .map(|i| {
            let mut rhs = State::ZERO;
            for k in s.row(i) {
                let j = s.col(k);
                rhs += flux_high[k] + sums[j] * b[k] - sums[i] * b[s.transpose(k)];
            }
            u[i] + rhs * (tau / m[i])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::low_order::Sources;
    use crate::mesh::{build_interval_mesh, BoundaryKind};

    const G: f64 = 9.81;

    fn consts() -> PhysConstants {
        PhysConstants { g: G, eps_reg: 1e-4, h_max_ref: 1.0 }
    }

    fn velocities(u: &[State]) -> Vec<Vec2> {
        u.iter().map(|x| crate::state::regularized_velocity(x, &consts())).collect()
    }

    #[test]
    fn indicator_vanishes_on_constant_and_rest_states() {
        let g = build_interval_mesh(8, 0.0, 1.0, [BoundaryKind::Free; 2]).unwrap();
        let u = vec![State::new_1d(1.3, 0.7); 9];
        let a = entropy_indicator(&g, &u, &velocities(&u), &consts());
        assert!(a.iter().all(|&x| x < 1e-12), "{a:?}");
        let u: Vec<State> = (0..9).map(|i| State::new_1d(1.0 + 0.1 * i as f64, 0.0)).collect();
        let a = entropy_indicator(&g, &u, &velocities(&u), &consts());
        assert!(a.iter().all(|&x| x == 0.0), "{a:?}");
    }

    #[test]
    fn indicator_at_jumps() {
        // Depth 1 left of x = 0.5 and 0.5 from there on.
        let g = build_interval_mesh(10, 0.0, 1.0, [BoundaryKind::Free; 2]).unwrap();
        let uniform: Vec<State> = (0..11)
            .map(|i| if i < 5 { State::new_1d(1.0, 1.0) } else { State::new_1d(0.5, 0.5) })
            .collect();
        let a = entropy_indicator(&g, &uniform, &velocities(&uniform), &consts());
        assert!((a[4] - ALPHA_UNIFORM_VELOCITY).abs() < 1e-12, "{}", a[4]);
        assert_eq!(a[1], 0.0);
        // Same depth jump, fluid at rest on the left and moving at 1 m/s on the right.
        let sheared: Vec<State> = (0..11)
            .map(|i| if i < 5 { State::new_1d(1.0, 0.0) } else { State::new_1d(0.5, 0.5) })
            .collect();
        let a = entropy_indicator(&g, &sheared, &velocities(&sheared), &consts());
        assert!((0.5..=1.0).contains(&a[5]), "{}", a[5]);
        assert!((a[5] - ALPHA_VELOCITY_JUMP).abs() < 1e-12, "{}", a[5]);
    }

    // Independent scalar evaluations of the indicator at the jump node.
    const ALPHA_UNIFORM_VELOCITY: f64 = 0.074_569_809_359_427_54;
    const ALPHA_VELOCITY_JUMP: f64 = 0.999_165_472_497_120_8;

    #[test]
    fn viscosity_blending() {
        let g = build_interval_mesh(2, 0.0, 1.0, [BoundaryKind::Free; 2]).unwrap();
        let d_low = vec![1.0; g.sparsity().nnz()];
        let d = high_order_viscosity(&g, &d_low, &[0.2, 0.6, 1.0]);
        let k = g.sparsity().find(0, 1).unwrap();
        assert!((d[k] - 0.4).abs() < 1e-15);
        let kd = g.sparsity().diag(1);
        assert!((d[kd] + 0.4 + 0.8).abs() < 1e-15);
        let ones = high_order_viscosity(&g, &d_low, &[1.0; 3]);
        assert_eq!(ones[k], 1.0);
        let zeros = high_order_viscosity(&g, &d_low, &[0.0; 3]);
        assert!(zeros.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mass_correction_entries() {
        let g = build_interval_mesh(6, 0.0, 1.0, [BoundaryKind::Free; 2]).unwrap();
        let b = mass_correction(&g);
        let s = g.sparsity();
        let k = s.diag(3);
        assert!((b[k] - 1.0 / 3.0).abs() < 1e-15);
        assert!((b[s.find(3, 4).unwrap()] + 1.0 / 6.0).abs() < 1e-15);
        for i in 0..7 {
            let col: f64 = s.row(i).map(|k| b[s.transpose(k)]).sum();
            assert!(col.abs() < 1e-15, "row {i}: {col}");
        }
    }

    #[test]
    fn flat_fluxes_are_antisymmetric_in_interior() {
        let g = build_interval_mesh(10, 0.0, 1.0, [BoundaryKind::Free; 2]).unwrap();
        let u: Vec<State> = (0..11).map(|i| State::new_1d(1.0 + 0.3 * (i as f64).sin(), 0.2 * (i as f64).cos())).collect();
        let z = vec![0.0; 11];
        let mut low = LowOrderWorkspace::new(&g);
        low.prepare(&g, &u, &z, &consts());
        let alpha = entropy_indicator(&g, &u, &low.velocity, &consts());
        let dh = high_order_viscosity(&g, &low.d, &alpha);
        let mut f = vec![State::ZERO; g.sparsity().nnz()];
        high_order_fluxes(&g, &u, &z, &low, &dh, G, &mut f);
        let s = g.sparsity();
        for i in 1..10 {
            for k in s.row(i) {
                if s.col(k) != i && s.col(k) > 0 && s.col(k) < 10 {
                    let sum = f[k] + f[s.transpose(k)];
                    assert!(sum.max_abs() < 1e-13, "{sum:?}");
                }
            }
        }
    }

    #[test]
    fn increments_reassemble_high_order_update() {
        let g = build_interval_mesh(16, 0.0, 1.0, [BoundaryKind::Free; 2]).unwrap();
        let n = g.node_count();
        let z: Vec<f64> = g.coords().iter().map(|x| 0.1 * (4.0 * x[0]).sin()).collect();
        let u: Vec<State> = (0..n).map(|i| State::new_1d(1.0 + 0.2 * (i as f64 * 0.9).cos(), 0.3)).collect();
        let mut low = LowOrderWorkspace::new(&g);
        low.prepare(&g, &u, &z, &consts());
        let tau = 0.5 * low.max_time_step(&g).unwrap();
        low.assemble(&g, &u, tau, &Sources::NONE, &consts()).unwrap();
        let alpha = entropy_indicator(&g, &u, &low.velocity, &consts());
        let dh = high_order_viscosity(&g, &low.d, &alpha);
        let nnz = g.sparsity().nnz();
        let mut fh = vec![State::ZERO; nnz];
        high_order_fluxes(&g, &u, &z, &low, &dh, G, &mut fh);
        let mut sums = vec![State::ZERO; n];
        node_sums(&g, &fh, &mut sums);
        let b = mass_correction(&g);
        let mut p = vec![State::ZERO; nnz];
        assemble_p(&g, tau, &fh, &sums, &low.flux, &b, None, &mut p);
        let uh = provisional_high_update(&g, &u, &fh, &b, tau);
        let s = g.sparsity();
        for i in 0..n {
            let lambda = limiter_weight(&g, i);
            let mut acc = low.update[i];
            for k in s.row(i) {
                acc += p[k] * lambda;
            }
            let diff = (acc - uh[i]).max_abs();
            assert!(diff <= 1e-12 * uh[i].max_abs(), "node {i}: {diff}");
        }
        // Flat topography skew-symmetry away from the boundary rows.
        let zf = vec![0.0; n];
        low.prepare(&g, &u, &zf, &consts());
        low.assemble(&g, &u, tau, &Sources::NONE, &consts()).unwrap();
        let dh = high_order_viscosity(&g, &low.d, &alpha);
        high_order_fluxes(&g, &u, &zf, &low, &dh, G, &mut fh);
        node_sums(&g, &fh, &mut sums);
        assemble_p(&g, tau, &fh, &sums, &low.flux, &b, None, &mut p);
        let m = g.lumped_mass();
        for i in 2..n - 2 {
            for k in s.row(i) {
                let j = s.col(k);
                if j == i {
                    continue;
                }
                let a = p[k] * (m[i] * limiter_weight(&g, i));
                let bb = p[s.transpose(k)] * (m[j] * limiter_weight(&g, j));
                assert!((a + bb).max_abs() <= 1e-12 * a.max_abs().max(1e-10), "{a:?} {bb:?}");
            }
        }
    }

    #[test]
    fn identical_fluxes_give_zero_increments() {
        let g = build_interval_mesh(4, 0.0, 1.0, [BoundaryKind::Free; 2]).unwrap();
        let nnz = g.sparsity().nnz();
        let f: Vec<State> = (0..nnz).map(|k| State::new_1d(k as f64, 1.0)).collect();
        let b = vec![0.0; nnz];
        let sums = vec![State::ZERO; 5];
        let mut p = vec![State::new_1d(9.0, 9.0); nnz];
        assemble_p(&g, 0.1, &f, &sums, &f, &b, None, &mut p);
        assert!(p.iter().all(|x| *x == State::ZERO));
    }
}
