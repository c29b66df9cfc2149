//! Conserved state algebra: physical flux, flat-bottom entropy pair and the
//! regularized velocity used near dry states.
//!
//! States always carry a two-component discharge. One-dimensional problems
//! keep the second component at zero; every formula below then reduces to the
//! one-dimensional one.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Two-component vector used for discharges, velocities, normals and `c_ij`.
pub type Vec2 = [f64; 2];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

/// Conserved pair (water depth, discharge).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    /// Water depth [m].
    pub h: f64,
    /// Discharge [m²/s].
    pub q: Vec2,
}

impl State {
    pub const ZERO: State = State { h: 0.0, q: [0.0, 0.0] };

    #[inline]
    pub const fn new(h: f64, q: Vec2) -> Self {
        State { h, q }
    }

    /// A one-dimensional state.
    #[inline]
    pub const fn new_1d(h: f64, q: f64) -> Self {
        State { h, q: [q, 0.0] }
    }

    #[inline]
    pub fn as_array(&self) -> [f64; 3] {
        [self.h, self.q[0], self.q[1]]
    }

    #[inline]
    pub fn from_array(a: [f64; 3]) -> Self {
        State { h: a[0], q: [a[1], a[2]] }
    }

    /// Componentwise maximum of absolute values.
    #[inline]
    pub fn max_abs(&self) -> f64 {
        self.h.abs().max(self.q[0].abs()).max(self.q[1].abs())
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.q[0].is_finite() && self.q[1].is_finite()
    }
}

impl Add for State {
    type Output = State;
    #[inline]
    fn add(self, o: State) -> State {
        State { h: self.h + o.h, q: [self.q[0] + o.q[0], self.q[1] + o.q[1]] }
    }
}

impl Sub for State {
    type Output = State;
    #[inline]
    fn sub(self, o: State) -> State {
        State { h: self.h - o.h, q: [self.q[0] - o.q[0], self.q[1] - o.q[1]] }
    }
}

impl Mul<f64> for State {
    type Output = State;
    #[inline]
    fn mul(self, s: f64) -> State {
        State { h: self.h * s, q: [self.q[0] * s, self.q[1] * s] }
    }
}

impl Mul<State> for f64 {
    type Output = State;
    #[inline]
    fn mul(self, u: State) -> State {
        u * self
    }
}

impl Neg for State {
    type Output = State;
    #[inline]
    fn neg(self) -> State {
        State { h: -self.h, q: [-self.q[0], -self.q[1]] }
    }
}

impl AddAssign for State {
    #[inline]
    fn add_assign(&mut self, o: State) {
        self.h += o.h;
        self.q[0] += o.q[0];
        self.q[1] += o.q[1];
    }
}

impl SubAssign for State {
    #[inline]
    fn sub_assign(&mut self, o: State) {
        self.h -= o.h;
        self.q[0] -= o.q[0];
        self.q[1] -= o.q[1];
    }
}

/// Physical constants and the dry-state regularization scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysConstants {
    /// Gravitational acceleration [m/s²].
    pub g: f64,
    /// Dimensionless regularization parameter.
    pub eps_reg: f64,
    /// Characteristic water depth [m].
    pub h_max_ref: f64,
}

impl Default for PhysConstants {
    fn default() -> Self {
        PhysConstants { g: 9.81, eps_reg: 1e-4, h_max_ref: 1.0 }
    }
}

impl PhysConstants {
    pub fn new(g: f64, eps_reg: f64, h_max_ref: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Config(format!("gravity must be positive, got {g}")));
        }
        if !(eps_reg >= 0.0 && eps_reg.is_finite()) {
            return Err(Error::Config(format!("eps_reg must be non-negative, got {eps_reg}")));
        }
        if !(h_max_ref > 0.0 && h_max_ref.is_finite()) {
            return Err(Error::Config(format!("h_max_ref must be positive, got {h_max_ref}")));
        }
        Ok(PhysConstants { g, eps_reg, h_max_ref })
    }

    /// Depth below which the velocity regularization is active.
    #[inline]
    pub fn dry_threshold(&self) -> f64 {
        self.eps_reg * self.h_max_ref
    }
}

/// Physical flux `f(u)` as a (d+1)×2 matrix: row 0 is `q`, rows 1..=2 are
/// `q ⊗ v + ½ g h² I`.
pub fn physical_flux(u: &State, g: f64) -> Result<[Vec2; 3]> {
    if u.h < 0.0 {
        return Err(Error::NegativeDepth(u.h));
    }
    if u.h == 0.0 {
        return Ok([[0.0; 2]; 3]);
    }
    let v = scale(u.q, 1.0 / u.h);
    Ok(flux_with_velocity(u, v, g))
}

/// Physical flux evaluated with a caller-supplied (typically regularized)
/// velocity.
#[inline]
pub fn flux_with_velocity(u: &State, v: Vec2, g: f64) -> [Vec2; 3] {
    let p = 0.5 * g * u.h * u.h;
    [
        u.q,
        [u.q[0] * v[0] + p, u.q[0] * v[1]],
        [u.q[1] * v[0], u.q[1] * v[1] + p],
    ]
}

/// `f(u) c` for a state with given velocity, i.e. the flux contracted with a
/// direction vector.
#[inline]
pub fn flux_dot(u: &State, v: Vec2, c: Vec2, g: f64) -> State {
    let vc = dot(v, c);
    let p = 0.5 * g * u.h * u.h;
    State { h: dot(u.q, c), q: [u.q[0] * vc + p * c[0], u.q[1] * vc + p * c[1]] }
}

/// Regularized velocity `2h / (h² + max(h, ε h_max)²) q`.
#[inline]
pub fn regularized_velocity(u: &State, consts: &PhysConstants) -> Vec2 {
    let h = u.h;
    let hr = h.max(consts.dry_threshold());
    let denom = h * h + hr * hr;
    if denom == 0.0 {
        return [0.0, 0.0];
    }
    scale(u.q, 2.0 * h / denom)
}

/// Flat-bottom entropy `½ g h² + ½ h |v|²`, extended by zero at `h = 0`.
pub fn entropy_flat(u: &State, consts: &PhysConstants) -> Result<f64> {
    if u.h < 0.0 {
        return Err(Error::NegativeDepth(u.h));
    }
    let v = regularized_velocity(u, consts);
    Ok(entropy_flat_with_velocity(u, v, consts.g))
}

#[inline]
pub(crate) fn entropy_flat_with_velocity(u: &State, v: Vec2, g: f64) -> f64 {
    0.5 * g * u.h * u.h + 0.5 * u.h * dot(v, v)
}

/// Flat-bottom entropy flux `v (E + ½ g h²)`.
pub fn entropy_flux_flat(u: &State, consts: &PhysConstants) -> Result<Vec2> {
    if u.h < 0.0 {
        return Err(Error::NegativeDepth(u.h));
    }
    let v = regularized_velocity(u, consts);
    Ok(entropy_flux_flat_with_velocity(u, v, consts.g))
}

#[inline]
pub(crate) fn entropy_flux_flat_with_velocity(u: &State, v: Vec2, g: f64) -> Vec2 {
    let e = entropy_flat_with_velocity(u, v, g);
    scale(v, e + 0.5 * g * u.h * u.h)
}

/// Gradient of the flat-bottom entropy with respect to the conserved
/// variables: `(g h − ½|v|², v)`.
pub fn grad_entropy_flat(u: &State, consts: &PhysConstants) -> Result<State> {
    if u.h < 0.0 {
        return Err(Error::NegativeDepth(u.h));
    }
    let v = regularized_velocity(u, consts);
    Ok(grad_entropy_flat_with_velocity(u, v, consts.g))
}

#[inline]
pub(crate) fn grad_entropy_flat_with_velocity(u: &State, v: Vec2, g: f64) -> State {
    State { h: g * u.h - 0.5 * dot(v, v), q: v }
}

/// Entropy including the topography term `g z h`. Diagnostics only.
pub fn entropy_with_topography(u: &State, z: f64, consts: &PhysConstants) -> Result<f64> {
    Ok(entropy_flat(u, consts)? + consts.g * z * u.h)
}
