//! Run orchestration: set up a scenario from a configuration, march to the
//! final time, write snapshots and probes, and summarize.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use crate::boundary::{check_nonreflecting_data, BoundaryData};
use crate::config::RunConfig;
use crate::erk::{builtin_scheme, ErkStepper, Problem, StageOptions, StepInfo};
use crate::error::{Error, Result};
use crate::io::{write_series, write_snapshot};
use crate::mesh::{BoundaryKind, MeshGraph};
use crate::scenarios::{error_norm, scenario_by_name, three_bumps_with, Norm, Scenario, GRAVITY};
use crate::state::{PhysConstants, State};

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub scheme: String,
    pub nodes: usize,
    pub final_time: f64,
    pub cycles: usize,
    /// Forward-Euler substeps.
    pub stages: usize,
    pub restarts: usize,
    pub wall_time: f64,
    /// Million node updates per second per substep.
    pub throughput: f64,
    pub delta_1: Option<f64>,
    pub delta_inf: Option<f64>,
    pub mass_initial: State,
    pub mass_final: State,
    pub boundary_flux: State,
    pub source: State,
    pub boundary_jump: State,
    /// `Σ m (U^N − U^0)` minus every accounted contribution.
    pub drift: State,
    pub drift_relative: [f64; 3],
    pub min_depth: f64,
    pub fluvial_clamps: usize,
    pub probe: Vec<(f64, f64)>,
    pub files: Vec<PathBuf>,
}

fn fmt_state(s: &State) -> String {
    format!("{:.6e} {:.6e} {:.6e}", s.h, s.q[0], s.q[1])
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        writeln!(o, "scenario {} with {} on {} nodes", self.scenario, self.scheme, self.nodes).unwrap();
        writeln!(o, "  final time       {:.6} s after {} cycles ({} substeps, {} restarts)", self.final_time, self.cycles, self.stages, self.restarts).unwrap();
        writeln!(o, "  wall time        {:.3} s, {:.3} MQ/s", self.wall_time, self.throughput).unwrap();
        if let (Some(a), Some(b)) = (self.delta_1, self.delta_inf) {
            writeln!(o, "  error            delta_1 = {a:.6e}, delta_inf = {b:.6e}").unwrap();
        }
        writeln!(o, "  mass             {} -> {}", fmt_state(&self.mass_initial), fmt_state(&self.mass_final)).unwrap();
        writeln!(o, "  accounted        flux {} source {} jump {}", fmt_state(&self.boundary_flux), fmt_state(&self.source), fmt_state(&self.boundary_jump)).unwrap();
        writeln!(
            o,
            "  drift            {} (relative {:.3e} {:.3e} {:.3e})",
            fmt_state(&self.drift),
            self.drift_relative[0],
            self.drift_relative[1],
            self.drift_relative[2]
        )
        .unwrap();
        writeln!(o, "  min depth        {:.6e}", self.min_depth).unwrap();
        if self.fluvial_clamps > 0 {
            writeln!(o, "  fluvial clamps   {}", self.fluvial_clamps).unwrap();
        }
        o
    }

    pub fn to_key_value(&self) -> String {
        let mut o = String::new();
        let mut kv = |k: &str, v: String| writeln!(o, "{k}={v}").unwrap();
        kv("scenario", self.scenario.clone());
        kv("scheme", self.scheme.clone());
        kv("nodes", self.nodes.to_string());
        kv("final_time", format!("{:.16e}", self.final_time));
        kv("cycles", self.cycles.to_string());
        kv("stages", self.stages.to_string());
        kv("restarts", self.restarts.to_string());
        kv("wall_time", format!("{:.6}", self.wall_time));
        kv("throughput_mqs", format!("{:.6}", self.throughput));
        if let Some(d) = self.delta_1 {
            kv("delta_1", format!("{d:.16e}"));
        }
        if let Some(d) = self.delta_inf {
            kv("delta_inf", format!("{d:.16e}"));
        }
        for (name, s) in [
            ("mass_initial", &self.mass_initial),
            ("mass_final", &self.mass_final),
            ("boundary_flux", &self.boundary_flux),
            ("source", &self.source),
            ("boundary_jump", &self.boundary_jump),
            ("drift", &self.drift),
        ] {
            kv(name, format!("{:.16e},{:.16e},{:.16e}", s.h, s.q[0], s.q[1]));
        }
        kv("drift_relative", format!("{:.6e},{:.6e},{:.6e}", self.drift_relative[0], self.drift_relative[1], self.drift_relative[2]));
        kv("min_depth", format!("{:.16e}", self.min_depth));
        kv("fluvial_clamps", self.fluvial_clamps.to_string());
        o
    }
}

/// A scenario on a mesh together with its evolving state.
pub struct Simulation {
    pub scenario: Scenario,
    pub graph: MeshGraph,
    pub bathymetry: Vec<f64>,
    pub u0: Vec<State>,
    pub u: Vec<State>,
    pub consts: PhysConstants,
    pub options: StageOptions,
    pub stepper: ErkStepper,
    pub t: f64,
    pub cycle: usize,
    pub restarts: usize,
    pub cfl: f64,
    pub tau_max: f64,
    pub final_time: f64,
    probe_node: Option<usize>,
    pub probe: Vec<(f64, f64)>,
}

fn mass_of(graph: &MeshGraph, u: &[State]) -> State {
    u.iter().zip(graph.lumped_mass()).fold(State::ZERO, |a, (u, m)| a + *u * *m)
}

impl Simulation {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let mut scenario = scenario_by_name(&cfg.scenario)?;
        if let Some(cones) = &cfg.cones {
            if scenario.name != "three_bumps" {
                return Err(Error::Config("`cones` only applies to the three_bumps scenario".into()));
            }
            scenario = three_bumps_with(cones);
        }
        let cells = cfg.cells.unwrap_or(scenario.cells);
        let graph = scenario.mesh(cells, cfg.distortion.unwrap_or(scenario.distortion), cfg.seed)?;
        let bathymetry = scenario.bathymetry_at(&graph);
        let u0 = scenario.initial_at(&graph);
        let h_init = u0.iter().map(|u| u.h).fold(0.0, f64::max);
        let h_max_ref = match cfg.h_max_ref {
            Some(h) => h,
            None if h_init > 0.0 => h_init,
            None => scenario.h_ref.ok_or_else(|| Error::Config("initial state is dry; set h_max_ref".into()))?,
        };
        let consts = PhysConstants::new(GRAVITY, cfg.eps_reg, h_max_ref)?;
        if let Some(data) = &scenario.boundary_data {
            for b in graph.boundary_nodes().iter().filter(|b| b.kind == BoundaryKind::NonReflecting) {
                check_nonreflecting_data(&data(graph.coords()[b.node], 0.0), b.normal, GRAVITY)?;
            }
        }
        let options = StageOptions {
            relax: cfg.relax.unwrap_or(scenario.relax),
            limiter: cfg.limiter,
            mass_correction: cfg.mass_correction,
            indicator: cfg.indicator,
            ..StageOptions::default()
        };
        let stepper = ErkStepper::new(builtin_scheme(&cfg.scheme)?, &graph, &options);
        let probe_node = scenario.probe.map(|p| {
            let x = graph.coords();
            (0..x.len())
                .min_by(|&a, &b| {
                    let da = (x[a][0] - p[0]).powi(2) + (x[a][1] - p[1]).powi(2);
                    let db = (x[b][0] - p[0]).powi(2) + (x[b][1] - p[1]).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap()
        });
        let probe = probe_node.map(|i| vec![(0.0, u0[i].q[0])]).unwrap_or_default();
        Ok(Simulation {
            cfl: cfg.cfl.unwrap_or(scenario.cfl),
            tau_max: cfg.tau_max,
            final_time: cfg.final_time.unwrap_or(scenario.final_time),
            u: u0.clone(),
            scenario,
            graph,
            bathymetry,
            u0,
            consts,
            options,
            stepper,
            t: 0.0,
            cycle: 0,
            restarts: 0,
            probe_node,
            probe,
        })
    }

    /// One step, never beyond `t_stop` or across the end of the rain window.
    pub fn step(&mut self, t_stop: f64) -> Result<StepInfo> {
        let mut stop = t_stop;
        if let Some(r) = self.scenario.rain {
            for edge in [r.start, r.end] {
                if self.t < edge && edge < stop {
                    stop = edge;
                }
            }
        }
        let data: Option<&BoundaryData> = self.scenario.boundary_data.as_deref().map(|f| f as &BoundaryData);
        let problem = Problem {
            graph: &self.graph,
            bathymetry: &self.bathymetry,
            consts: self.consts,
            manning: self.scenario.manning,
            rain: self.scenario.rain,
            boundary_data: data,
            options: self.options,
        };
        let info = self.stepper.step(&problem, &mut self.u, self.t, self.cfl, self.tau_max, stop, self.cycle)?;
        self.cycle += 1;
        self.restarts += info.restarts;
        // Land exactly on the stop time when the step was clipped to it.
        self.t = if (self.t + info.dt - stop).abs() <= 1e-12 * stop.abs().max(1.0) { stop } else { self.t + info.dt };
        if let Some(i) = self.probe_node {
            self.probe.push((self.t, self.u[i].q[0]));
        }
        Ok(info)
    }

    pub fn run_until(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            self.step(t_end)?;
        }
        Ok(())
    }

    pub fn mass(&self) -> State {
        mass_of(&self.graph, &self.u)
    }

    pub fn exact_now(&self) -> Option<Vec<State>> {
        self.scenario.exact_at(&self.graph, self.t)
    }

    pub fn error(&self, which: Norm) -> Option<Result<f64>> {
        self.exact_now().map(|ex| error_norm(&self.graph, &self.u, &ex, which))
    }

    pub fn report(&self, wall_time: f64, with_errors: bool) -> Result<RunReport> {
        let mass_initial = mass_of(&self.graph, &self.u0);
        let mass_final = self.mass();
        let budget = &self.stepper.budget;
        let drift = mass_final - mass_initial - budget.total();
        let scale: Vec<f64> = (0..3)
            .map(|c| {
                self.u0
                    .iter()
                    .chain(&self.u)
                    .zip(self.graph.lumped_mass().iter().chain(self.graph.lumped_mass()))
                    .map(|(u, m)| m * u.as_array()[c].abs())
                    .fold(0.0, f64::max)
                    * self.graph.node_count() as f64
            })
            .collect();
        let d = drift.as_array();
        let rel = |c: usize| if scale[c] > 0.0 { d[c].abs() / scale[c] } else { d[c].abs() };
        let (delta_1, delta_inf) = if with_errors && self.scenario.exact.is_some() {
            (self.error(Norm::L1).transpose()?, self.error(Norm::Linf).transpose()?)
        } else {
            (None, None)
        };
        let stages = self.stepper.stage_count;
        Ok(RunReport {
            scenario: self.scenario.name.clone(),
            scheme: self.stepper.scheme().name.to_string(),
            nodes: self.graph.node_count(),
            final_time: self.t,
            cycles: self.cycle,
            stages,
            restarts: self.restarts,
            wall_time,
            throughput: if wall_time > 0.0 { (self.graph.node_count() * stages) as f64 / wall_time / 1e6 } else { 0.0 },
            delta_1,
            delta_inf,
            mass_initial,
            mass_final,
            boundary_flux: budget.total_flux(),
            source: budget.total_source(),
            boundary_jump: budget.total_jump(),
            drift,
            drift_relative: [rel(0), rel(1), rel(2)],
            min_depth: self.u.iter().map(|u| u.h).fold(f64::INFINITY, f64::min),
            fluvial_clamps: self.stepper.boundary_stats.fluvial_clamps,
            probe: self.probe.clone(),
            files: Vec::new(),
        })
    }
}

/// Run a configuration to its final time, writing snapshots, probe series
/// and the key=value report when an output directory is configured.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let mut sim = Simulation::new(cfg)?;
    let mut files = Vec::new();
    let dir = cfg.output_dir.clone();
    if let Some(d) = &dir {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut snap_index = 0;
    let mut write_snap = |sim: &Simulation, files: &mut Vec<PathBuf>| -> Result<()> {
        if let Some(d) = &dir {
            for f in &cfg.formats {
                let p = d.join(format!("{}_{:04}.{}", sim.scenario.name, snap_index, f.extension()));
                write_snapshot(&p, &sim.graph, &sim.u, &sim.bathymetry, *f)?;
                files.push(p);
            }
        }
        snap_index += 1;
        Ok(())
    };
    let start = Instant::now();
    let t_end = sim.final_time;
    if let Some(c) = cfg.cadence {
        write_snap(&sim, &mut files)?;
        let mut k = 1;
        while sim.t < t_end {
            let target = (k as f64 * c).min(t_end);
            sim.run_until(target)?;
            write_snap(&sim, &mut files)?;
            k += 1;
        }
    } else {
        sim.run_until(t_end)?;
        write_snap(&sim, &mut files)?;
    }
    let wall = start.elapsed().as_secs_f64();
    let mut report = sim.report(wall, cfg.errors)?;
    if let Some(d) = &dir {
        if !report.probe.is_empty() {
            let p = d.join(format!("{}_probe.csv", sim.scenario.name));
            write_series(&p, &report.probe)?;
            files.push(p);
        }
        let p = d.join("report.txt");
        std::fs::write(&p, report.to_key_value()).map_err(|e| Error::io(&p, e))?;
        files.push(p);
    }
    report.files = files;
    Ok(report)
}
