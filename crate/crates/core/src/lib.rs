//! Graph-based shallow-water solver with convex limiting and explicit
//! Runge-Kutta stage updates that keep the water depth non-negative and
//! preserve lakes at rest.

pub mod boundary;
pub mod config;
pub mod driver;
pub mod erk;
pub mod error;
pub mod high_order;
pub mod io;
pub mod limiter;
pub mod low_order;
pub mod mesh;
pub mod riemann;
pub mod scenarios;
pub mod state;
pub mod verification;

pub use config::{parse_config, RunConfig};
pub use driver::{run, RunReport, Simulation};
pub use erk::{builtin_scheme, ErkScheme};
pub use error::{Error, Result};
pub use scenarios::{scenario_by_name, Scenario};
pub use mesh::{build_interval_mesh, build_quad_mesh, BoundaryKind, MeshGraph, QuadMeshSpec, RectangleBoundary};
pub use state::{PhysConstants, State, Vec2};
