//! Convex limiting of the antidiffusive increments against local bounds on
//! the water depth and on the squared velocity.

use crate::error::{Error, Result};
use crate::high_order::limiter_weight;
use crate::low_order::LowOrderWorkspace;
use crate::mesh::MeshGraph;
use crate::state::{dot, regularized_velocity, PhysConstants, State};

/// Division guard in the depth limiter.
pub const EPS_LIMITER: f64 = 1e-14;

/// Velocity bounds below this multiple of `sqrt(g h_max)` are round-off
/// and are set to zero, which sends near-rest nodes to the low-order update.
pub const VELOCITY_FLOOR: f64 = 1e-12;

/// Local admissible bounds of one node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LimiterBounds {
    pub h_min: f64,
    pub h_max: f64,
    pub v2_max: f64,
}

/// Bounds of node `i` over the shifted bar states
/// `W_ij = Ū_ij + τ/m_i (B_i + m_i S_i)`, `j ∈ I(i)`.
pub fn compute_bounds(
    graph: &MeshGraph,
    low: &LowOrderWorkspace,
    u: &[State],
    tau: f64,
    relax: bool,
    consts: &PhysConstants,
    i: usize,
) -> LimiterBounds {
    let s = graph.sparsity();
    let m = graph.lumped_mass()[i];
    let shift = (low.shift[i] + low.source[i] * m) * (tau / m);
    let mut b = LimiterBounds { h_min: f64::INFINITY, h_max: f64::NEG_INFINITY, v2_max: 0.0 };
    for k in s.row(i) {
        let w = low.bar_state(graph, u, consts.g, i, k) + shift;
        b.h_min = b.h_min.min(w.h);
        b.h_max = b.h_max.max(w.h);
        let v = regularized_velocity(&w, consts);
        b.v2_max = b.v2_max.max(dot(v, v));
    }
    b.h_min = b.h_min.max(0.0);
    b.h_max = b.h_max.max(b.h_min);
    if b.v2_max <= VELOCITY_FLOOR * VELOCITY_FLOOR * consts.g * consts.h_max_ref {
        b.v2_max = 0.0;
    }
    if relax {
        let r = (m / graph.measure()).powf(1.5 / graph.dim() as f64);
        b.h_min = (b.h_min * (1.0 - r)).max(0.0);
        b.h_max *= 1.0 + r;
        b.v2_max *= 1.0 + r;
    }
    b
}

/// Largest `ℓ ∈ [0, 1]` keeping the depth of `u_l + ℓ p` inside the bounds.
#[inline]
pub fn limit_depth(u_l: &State, p: &State, b: &LimiterBounds, eps: f64) -> f64 {
    let h = u_l.h;
    let ph = p.h;
    let trial = h + ph;
    let l = if trial < b.h_min {
        (h - b.h_min).max(0.0) / (ph.abs() + eps * b.h_max)
    } else if trial > b.h_max {
        (b.h_max - h).max(0.0) / (ph.abs() + eps * b.h_max)
    } else {
        1.0
    };
    l.min(1.0)
}

/// `Ψ(u) = h² V²_max − ‖q‖²`.
#[inline]
pub fn velocity_margin(u: &State, v2_max: f64) -> f64 {
    u.h * u.h * v2_max - dot(u.q, u.q)
}

/// Largest `ℓ ∈ [0, cap]` such that `Ψ(u_l + t p) ≥ 0` for all `t ∈ [0, ℓ]`.
///
/// `Ψ` is quadratic in `ℓ`; the admissible set is an interval starting at 0
/// (second-order cone), so the answer is `cap` or the largest root below it.
pub fn limit_velocity(u_l: &State, p: &State, v2_max: f64, cap: f64) -> f64 {
    let a = p.h * p.h * v2_max - dot(p.q, p.q);
    let b = 2.0 * (u_l.h * p.h * v2_max - dot(u_l.q, p.q));
    let c = velocity_margin(u_l, v2_max);
    let psi = |l: f64| (a * l + b) * l + c;
    let scale = u_l.h * u_l.h * v2_max + dot(u_l.q, u_l.q);
    if c < -1e-12 * scale {
        return 0.0;
    }
    if psi(cap) >= 0.0 {
        return cap;
    }
    let mut root = if a.abs() <= 1e-14 * (b.abs() + c.abs()) {
        if b < 0.0 {
            -c / b
        } else {
            0.0
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            0.0
        } else {
            let sq = disc.sqrt();
            let qq = -0.5 * (b + b.signum() * sq);
            let (r1, r2) = if qq != 0.0 { (qq / a, c / qq) } else { (0.0, 0.0) };
            [r1, r2].into_iter().filter(|r| *r >= 0.0 && *r < cap).fold(0.0, f64::max)
        }
    };
    root = root.clamp(0.0, cap);
    if psi(root) < 0.0 {
        // Round-off put the root past the crossing; back off by bisection.
        let (mut lo, mut hi) = (0.0, root);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if psi(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        root = lo;
    }
    root
}

/// Directed limiter coefficients for every off-diagonal entry, then
/// symmetrized to `ℓ_ij = min(ℓ_ij, ℓ_ji)`.
///
/// Fails when a low-order state with a non-degenerate lower depth bound
/// breaks its own velocity bound.
pub fn limiter_coefficients(
    graph: &MeshGraph,
    u_low: &[State],
    p: &[State],
    bounds: &[LimiterBounds],
    consts: &PhysConstants,
    ell: &mut [f64],
) -> Result<()> {
    let s = graph.sparsity();
    let h_dry = consts.dry_threshold();
    let c_ref = (consts.g * consts.h_max_ref).sqrt() * consts.h_max_ref;
    // Velocities below the noise floor are zeroed in the bounds.
    let abs_tol = (VELOCITY_FLOOR * c_ref) * (VELOCITY_FLOOR * c_ref);
    for i in 0..s.rows() {
        let b = &bounds[i];
        let ul = &u_low[i];
        let margin = velocity_margin(ul, b.v2_max);
        let scale = ul.h * ul.h * b.v2_max + dot(ul.q, ul.q);
        if margin < -(1e-10 * scale + abs_tol) && b.h_min >= h_dry {
            return Err(Error::LimiterBound { node: i, psi: margin });
        }
        let kd = s.diag(i);
        for k in s.row(i) {
            if k == kd {
                ell[k] = 0.0;
                continue;
            }
            let lh = limit_depth(ul, &p[k], b, EPS_LIMITER);
            ell[k] = limit_velocity(ul, &p[k], b.v2_max, lh);
        }
    }
    for i in 0..s.rows() {
        for k in s.row(i) {
            let kt = s.transpose(k);
            if s.col(k) > i {
                let l = ell[k].min(ell[kt]);
                ell[k] = l;
                ell[kt] = l;
            }
        }
    }
    Ok(())
}

/// Committed state `U_i = U^L_i + Σ_{j≠i} ℓ_ij λ_i P_ij`.
pub fn final_update(graph: &MeshGraph, u_low: &[State], p: &[State], ell: &[f64], out: &mut [State]) {
    let s = graph.sparsity();
    for i in 0..s.rows() {
        let lambda = limiter_weight(graph, i);
        let mut acc = State::ZERO;
        for k in s.row(i) {
            acc += p[k] * ell[k];
        }
        out[i] = u_low[i] + acc * lambda;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(h_min: f64, h_max: f64, v2_max: f64) -> LimiterBounds {
        LimiterBounds { h_min, h_max, v2_max }
    }

    #[test]
    fn depth_limiter_branches() {
        let b = bounds(0.8, 1.2, 1.0);
        let u = State::new_1d(1.0, 0.0);
        assert_eq!(limit_depth(&u, &State::new_1d(0.1, 0.0), &b, 0.0), 1.0);
        let l = limit_depth(&u, &State::new_1d(-0.5, 0.0), &b, 0.0);
        assert!((l - 0.4).abs() < 1e-15);
        let l = limit_depth(&u, &State::new_1d(0.5, 0.0), &b, 0.0);
        assert!((l - 0.4).abs() < 1e-15);
        assert_eq!(limit_depth(&u, &State::ZERO, &b, EPS_LIMITER), 1.0);
        // Constant bounds: candidate on the closed interval.
        let b = bounds(1.0, 1.0, 0.0);
        assert_eq!(limit_depth(&u, &State::ZERO, &b, EPS_LIMITER), 1.0);
        // Low-order state below its bound by round-off never yields a push.
        let b = bounds(1.0 + 1e-15, 2.0, 0.0);
        assert_eq!(limit_depth(&u, &State::new_1d(-1.0, 0.0), &b, EPS_LIMITER), 0.0);
    }

    #[test]
    fn velocity_limiter_cases() {
        // Rest state.
        let u = State::new_1d(1.0, 0.0);
        assert_eq!(limit_velocity(&u, &State::new_1d(0.0, 1.0), 0.0, 1.0), 0.0);
        // Pure depth increase.
        assert_eq!(limit_velocity(&State::new_1d(1.0, 0.5), &State::new_1d(0.3, 0.0), 1.0, 0.7), 0.7);
        // (1)^2 * 1 - l^2 = 0 at l = 1.
        assert_eq!(limit_velocity(&u, &State::new_1d(0.0, 1.0), 1.0, 1.0), 1.0);
        // Root strictly inside: 1 - (l * 2)^2 = 0 at l = 0.5.
        let l = limit_velocity(&u, &State::new_1d(0.0, 2.0), 1.0, 1.0);
        assert!((l - 0.5).abs() < 1e-15, "{l}");
        // Degenerate quadratic: Ψ linear.
        let l = limit_velocity(&State::new_1d(1.0, 1.0), &State::new_1d(-0.5, -0.5), 1.0, 1.0);
        assert_eq!(l, 1.0);
    }

    #[test]
    fn velocity_limiter_is_feasible_on_whole_interval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let h: f64 = rng.gen_range(0.01..2.0);
            let v2: f64 = rng.gen_range(0.0..4.0);
            let speed = v2.sqrt() * rng.gen_range(0.0..1.0);
            let ang: f64 = rng.gen_range(0.0..6.3);
            let u = State::new(h, [h * speed * ang.cos(), h * speed * ang.sin()]);
            let p = State::new(rng.gen_range(-0.5 * h..h), [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
            let cap = rng.gen_range(0.0..1.0);
            let l = limit_velocity(&u, &p, v2, cap);
            assert!((0.0..=cap).contains(&l));
            for t in [0.25, 0.5, 0.75, 1.0] {
                let w = u + p * (t * l);
                let tol = 1e-12 * (w.h * w.h * v2 + dot(w.q, w.q)) + 1e-15;
                assert!(velocity_margin(&w, v2) >= -tol, "l={l} t={t}");
            }
        }
    }

    #[test]
    fn zero_coefficients_keep_low_order_state() {
        use crate::mesh::{build_interval_mesh, BoundaryKind};
        let g = build_interval_mesh(4, 0.0, 1.0, [BoundaryKind::Free; 2]).unwrap();
        let nnz = g.sparsity().nnz();
        let ul: Vec<State> = (0..5).map(|i| State::new_1d(1.0 + i as f64, 0.1)).collect();
        let p = vec![State::new_1d(0.3, -0.2); nnz];
        let mut out = vec![State::ZERO; 5];
        final_update(&g, &ul, &p, &vec![0.0; nnz], &mut out);
        assert_eq!(out, ul);
    }
}
