//! Fixtures shared by the kernel benchmarks.

use swe_core::erk::{ErkStepper, Problem, StageOptions};
use swe_core::{builtin_scheme, RunConfig, Simulation};

/// Vortex scenario on `cells`² cells, set up but not advanced.
pub fn vortex(cells: usize) -> Simulation {
    let mut cfg = RunConfig::new("vortex");
    cfg.cells = Some(cells);
    Simulation::new(&cfg).expect("built-in scenario")
}

/// Advance `sim` by one step of `scheme` from its current state.
pub fn step_with(sim: &Simulation, stepper: &mut ErkStepper, u: &mut [swe_core::State]) {
    let data = sim.scenario.boundary_data.as_deref().map(|f| f as &swe_core::boundary::BoundaryData);
    let prob = Problem {
        graph: &sim.graph,
        bathymetry: &sim.bathymetry,
        consts: sim.consts,
        manning: 0.0,
        rain: None,
        boundary_data: data,
        options: sim.options,
    };
    stepper.step(&prob, u, 0.0, 0.25, 1.0, f64::INFINITY, 0).expect("admissible step");
}

pub fn stepper(sim: &Simulation, scheme: &str) -> ErkStepper {
    ErkStepper::new(builtin_scheme(scheme).expect("built-in scheme"), &sim.graph, &StageOptions { relax: true, ..sim.options })
}
