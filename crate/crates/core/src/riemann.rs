//! Maximum wave speed of the one-dimensional Riemann problem projected on a
//! direction: a closed-form guaranteed upper bound for the solver loop and an
//! iterative exact solver used as test oracle.

use crate::error::{Error, Result};
use crate::state::{dot, flux_dot, regularized_velocity, PhysConstants, State, Vec2};

/// Upper bound on the largest absolute wave speed, from primitive data
/// (depth and normal velocity on either side).
///
/// The intermediate depth comes from the two-rarefaction approximation, which
/// never underestimates the exact one. Shock branches are evaluated there and
/// each outer speed is additionally capped by the vacuum front speed of the
/// opposite side, which keeps the bound continuous as a depth goes to zero.
#[inline]
pub fn max_wave_speed_primitive(h_l: f64, u_l: f64, h_r: f64, u_r: f64, g: f64) -> f64 {
    let h_l = h_l.max(0.0);
    let h_r = h_r.max(0.0);
    if h_l == 0.0 && h_r == 0.0 {
        return u_l.abs().max(u_r.abs());
    }
    let a_l = (g * h_l).sqrt();
    let a_r = (g * h_r).sqrt();
    let x = (2.0 * (a_l + a_r) + u_l - u_r).max(0.0);
    let h_tilde = x * x / (16.0 * g);

    let lambda_minus = if h_l > 0.0 {
        let e = (h_tilde - h_l).max(0.0) / h_l;
        let s_l = u_l - a_l * ((1.0 + 0.5 * e) * (1.0 + e)).sqrt();
        (u_l - a_l).min(s_l.max(u_r - 2.0 * a_r))
    } else {
        u_l.min(u_r - 2.0 * a_r)
    };
    let lambda_plus = if h_r > 0.0 {
        let e = (h_tilde - h_r).max(0.0) / h_r;
        let s_r = u_r + a_r * ((1.0 + 0.5 * e) * (1.0 + e)).sqrt();
        (u_r + a_r).max(s_r.min(u_l + 2.0 * a_l))
    } else {
        u_r.max(u_l + 2.0 * a_l)
    };
    lambda_minus.abs().max(lambda_plus.abs())
}

/// Guaranteed maximum wave speed for states `u_l`, `u_r` along unit `n`.
/// Velocities are the regularized ones.
pub fn max_wave_speed(u_l: &State, u_r: &State, n: Vec2, consts: &PhysConstants) -> f64 {
    let v_l = regularized_velocity(u_l, consts);
    let v_r = regularized_velocity(u_r, consts);
    max_wave_speed_primitive(u_l.h, dot(v_l, n), u_r.h, dot(v_r, n), consts.g)
}

/// Depth function of one side: velocity jump across the wave connecting
/// `h_k` to `h`, and its derivative.
fn side_function(h: f64, h_k: f64, g: f64) -> (f64, f64) {
    if h <= h_k {
        let a = (g * h).sqrt();
        let f = 2.0 * (a - (g * h_k).sqrt());
        let df = if h > 0.0 { g / a } else { f64::INFINITY };
        (f, df)
    } else {
        let s = (g * (h + h_k) / (2.0 * h * h_k)).sqrt();
        let f = (h - h_k) * s;
        // d/dh [(h - h_k) sqrt(g (h + h_k) / (2 h h_k))]
        let ds = -g / (4.0 * h * h * s);
        (f, s + (h - h_k) * ds)
    }
}

/// Extreme wave speeds (leftmost, rightmost) of the exact solution.
pub fn exact_riemann_speeds(h_l: f64, u_l: f64, h_r: f64, u_r: f64, g: f64) -> Result<(f64, f64)> {
    if h_l < 0.0 {
        return Err(Error::NegativeDepth(h_l));
    }
    if h_r < 0.0 {
        return Err(Error::NegativeDepth(h_r));
    }
    let a_l = (g * h_l).sqrt();
    let a_r = (g * h_r).sqrt();
    if h_l == 0.0 && h_r == 0.0 {
        return Ok((u_l.min(u_r), u_l.max(u_r)));
    }
    if h_r == 0.0 {
        return Ok((u_l - a_l, u_l + 2.0 * a_l));
    }
    if h_l == 0.0 {
        return Ok((u_r - 2.0 * a_r, u_r + a_r));
    }
    let phi = |h: f64| {
        let (fl, dfl) = side_function(h, h_l, g);
        let (fr, dfr) = side_function(h, h_r, g);
        (fl + fr + u_r - u_l, dfl + dfr)
    };
    // Dry middle state.
    if phi(0.0).0 >= 0.0 {
        return Ok((u_l - a_l, u_r + a_r));
    }
    let x = (2.0 * (a_l + a_r) + u_l - u_r).max(0.0);
    let mut hi = (x * x / (16.0 * g)).max(h_l.max(h_r));
    while phi(hi).0 < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let mut h = 0.5 * (lo + hi);
    const MAX_ITER: usize = 100;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let (f, df) = phi(h);
        if f == 0.0 {
            converged = true;
            break;
        }
        if f < 0.0 {
            lo = h;
        } else {
            hi = h;
        }
        let newton = h - f / df;
        let next = if newton > lo && newton < hi && df.is_finite() { newton } else { 0.5 * (lo + hi) };
        if (next - h).abs() <= 1e-14 * h || hi - lo <= 1e-14 * hi {
            h = next;
            converged = true;
            break;
        }
        h = next;
    }
    if !converged {
        return Err(Error::NoConvergence(MAX_ITER));
    }
    let left = if h > h_l {
        u_l - (g * h * (h + h_l) / (2.0 * h_l)).sqrt()
    } else {
        u_l - a_l
    };
    let right = if h > h_r {
        u_r + (g * h * (h + h_r) / (2.0 * h_r)).sqrt()
    } else {
        u_r + a_r
    };
    Ok((left, right))
}

/// Exact maximal absolute signal speed. Test oracle only.
pub fn exact_riemann_max_speed(h_l: f64, u_l: f64, h_r: f64, u_r: f64, g: f64) -> Result<f64> {
    let (l, r) = exact_riemann_speeds(h_l, u_l, h_r, u_r, g)?;
    Ok(l.abs().max(r.abs()))
}

/// Riemann average `½(U_i + U_j) − (f(U_j) − f(U_i)) c / (2 d)` with fluxes
/// evaluated at the supplied velocities.
#[inline]
pub fn bar_state_with_velocity(u_i: &State, v_i: Vec2, u_j: &State, v_j: Vec2, c: Vec2, d: f64, g: f64) -> State {
    let df = flux_dot(u_j, v_j, c, g) - flux_dot(u_i, v_i, c, g);
    (*u_i + *u_j) * 0.5 - df * (0.5 / d)
}

/// Bar state of two (reconstructed) states. Velocities are `q / h`, zero on
/// dry states. A zero viscosity is accepted only for identical states.
pub fn bar_state(u_i: &State, u_j: &State, c: Vec2, d: f64, g: f64) -> Result<State> {
    if u_i.h < 0.0 {
        return Err(Error::NegativeDepth(u_i.h));
    }
    if u_j.h < 0.0 {
        return Err(Error::NegativeDepth(u_j.h));
    }
    if !(d > 0.0) {
        if u_i == u_j {
            return Ok(*u_i);
        }
        return Err(Error::Config(format!("bar state needs positive viscosity, got {d}")));
    }
    let vel = |u: &State| if u.h > 0.0 { [u.q[0] / u.h, u.q[1] / u.h] } else { [0.0; 2] };
    Ok(bar_state_with_velocity(u_i, vel(u_i), u_j, vel(u_j), c, d, g))
}
