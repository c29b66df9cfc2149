//! Acceptance criteria: scenario runs with reference values and randomized
//! property suites. Each criterion yields one pass/fail line.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::driver::Simulation;
use crate::error::{Error, Result};
use crate::high_order::{
    assemble_p, entropy_indicator, high_order_fluxes, high_order_viscosity, mass_correction, node_sums,
};
use crate::limiter::{compute_bounds, final_update, limiter_coefficients, velocity_margin, LimiterBounds};
use crate::low_order::{LowOrderWorkspace, Sources};
use crate::mesh::{build_interval_mesh, build_quad_mesh, BoundaryKind, MeshGraph, QuadMeshSpec, RectangleBoundary};
use crate::riemann::{exact_riemann_max_speed, max_wave_speed_primitive};
use crate::scenarios::{Norm, GRAVITY};
use crate::state::{dot, entropy_flat, entropy_flux_flat, PhysConstants, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    WellBalancing,
    InclinedFriction,
    VortexConvergence,
    ParaboloidConvergence,
    InvariantDomain,
    WaveSpeed,
    Conservation,
    EntropyInequality,
    ErkEfficiency,
    RainBudget,
}

impl Criterion {
    pub const ALL: [Criterion; 10] = [
        Criterion::WellBalancing,
        Criterion::InclinedFriction,
        Criterion::VortexConvergence,
        Criterion::ParaboloidConvergence,
        Criterion::InvariantDomain,
        Criterion::WaveSpeed,
        Criterion::Conservation,
        Criterion::EntropyInequality,
        Criterion::ErkEfficiency,
        Criterion::RainBudget,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::WellBalancing => "well_balancing",
            Criterion::InclinedFriction => "inclined_friction",
            Criterion::VortexConvergence => "vortex_convergence",
            Criterion::ParaboloidConvergence => "paraboloid_convergence",
            Criterion::InvariantDomain => "invariant_domain",
            Criterion::WaveSpeed => "wave_speed",
            Criterion::Conservation => "conservation",
            Criterion::EntropyInequality => "entropy_inequality",
            Criterion::ErkEfficiency => "erk_efficiency",
            Criterion::RainBudget => "rain_budget",
        }
    }

    /// Fine-mesh convergence studies and the large efficiency run.
    pub fn is_long(self) -> bool {
        matches!(self, Criterion::VortexConvergence | Criterion::ParaboloidConvergence | Criterion::ErkEfficiency)
    }

    /// Known not to meet its target. With the fixed indicator floor
    /// `eps_reg * D_max` the entropy indicator fades on fine meshes and the
    /// vortex errors superconverge (rates above 4) below the reference
    /// values; no single `eps_reg` matches both the magnitudes and the rates.
    pub fn expected_failure(self) -> bool {
        matches!(self, Criterion::VortexConvergence)
    }

    fn check(self) -> Result<(bool, String)> {
        match self {
            Criterion::WellBalancing => well_balancing(),
            Criterion::InclinedFriction => inclined_friction(),
            Criterion::VortexConvergence => vortex_convergence(),
            Criterion::ParaboloidConvergence => paraboloid_convergence(),
            Criterion::InvariantDomain => invariant_domain(10_000, 7),
            Criterion::WaveSpeed => wave_speed(100_000, 3),
            Criterion::Conservation => conservation(),
            Criterion::EntropyInequality => entropy_inequality(10_000, 5),
            Criterion::ErkEfficiency => erk_efficiency(),
            Criterion::RainBudget => rain_budget(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    /// Everything except the criteria marked long.
    Quick,
    One(Criterion),
}

impl Suite {
    pub fn criteria(self) -> Vec<Criterion> {
        match self {
            Suite::All => Criterion::ALL.to_vec(),
            Suite::Quick => Criterion::ALL.into_iter().filter(|c| !c.is_long()).collect(),
            Suite::One(c) => vec![c],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "all" => Ok(Suite::All),
            "quick" => Ok(Suite::Quick),
            _ => Criterion::ALL.into_iter().find(|c| c.name() == s).map(Suite::One).ok_or_else(|| {
                let names: Vec<_> = Criterion::ALL.iter().map(|c| c.name()).collect();
                Error::Config(format!("unknown suite `{s}`; expected all, quick or one of {}", names.join(", ")))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub criterion: Criterion,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {} [{:.1} s]", self.name, self.detail, self.seconds)
    }
}

pub fn run_criterion(c: Criterion) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = c.check().unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { criterion: c, name: c.name(), passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Run every criterion of `suite`, reporting each result as it completes.
pub fn run_suite(suite: Suite, report: &mut dyn FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    suite
        .criteria()
        .into_iter()
        .map(|c| {
            let r = run_criterion(c);
            report(&r);
            r
        })
        .collect()
}

fn rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn fmt_list(v: &[f64], prec: usize) -> String {
    v.iter().map(|x| format!("{x:.prec$e}")).collect::<Vec<_>>().join(", ")
}

fn fmt_rates(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}

fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    let mut sim = Simulation::new(cfg)?;
    let t = sim.final_time;
    sim.run_until(t)?;
    Ok(sim)
}

fn well_balancing() -> Result<(bool, String)> {
    let sim = simulate(&RunConfig::new("three_bumps"))?;
    let dh = sim.u.iter().zip(&sim.u0).map(|(a, b)| (a.h - b.h).abs()).fold(0.0, f64::max);
    let q = sim.u.iter().map(|s| s.q[0].hypot(s.q[1])).fold(0.0, f64::max);
    let pass = dh <= 1e-12 && q <= 1e-12;
    Ok((pass, format!("{} nodes, {} cycles: max|dh| = {dh:.3e}, max|q| = {q:.3e} (limit 1e-12)", sim.graph.node_count(), sim.cycle)))
}

fn inclined_friction() -> Result<(bool, String)> {
    let sim = simulate(&RunConfig::new("inclined_friction"))?;
    let d = sim.error(Norm::Linf).expect("exact solution")?;
    Ok((d <= 1e-10, format!("{} nodes: delta_inf = {d:.3e} (limit 1e-10)", sim.graph.node_count())))
}

const VORTEX_REFERENCE: [f64; 4] = [3.57866e-3, 6.28e-4, 8.41e-5, 1.09506e-5];

fn vortex_convergence() -> Result<(bool, String)> {
    let mut errors = Vec::new();
    let mut nodes = Vec::new();
    for cells in [32, 64, 128, 256] {
        let mut cfg = RunConfig::new("vortex");
        cfg.cells = Some(cells);
        let sim = simulate(&cfg)?;
        nodes.push(sim.graph.node_count());
        errors.push(sim.error(Norm::L1).expect("exact solution")?);
    }
    let r = rates(&errors);
    let within = errors.iter().zip(VORTEX_REFERENCE).all(|(e, p)| *e <= 2.0 * p && *e >= 0.5 * p);
    let pass = within && r.iter().all(|&r| r >= 2.3);
    Ok((pass, format!("nodes {nodes:?}: delta_1 = [{}], rates [{}] (reference within x2, rates >= 2.3)", fmt_list(&errors, 3), fmt_rates(&r))))
}

fn paraboloid_convergence() -> Result<(bool, String)> {
    let mut errors = Vec::new();
    for cells in [32, 64, 128] {
        let mut cfg = RunConfig::new("paraboloid");
        cfg.cells = Some(cells);
        errors.push(simulate(&cfg)?.error(Norm::L1).expect("exact solution")?);
    }
    let r = rates(&errors);
    let pass = r.iter().all(|r| (1.2..=2.1).contains(r));
    Ok((pass, format!("delta_1 = [{}], rates [{}] (range [1.2, 2.1])", fmt_list(&errors, 3), fmt_rates(&r))))
}

fn conservation() -> Result<(bool, String)> {
    let sim = simulate(&RunConfig::new("vortex"))?;
    let rep = sim.report(0.0, false)?;
    let worst = rep.drift_relative.iter().copied().fold(0.0, f64::max);
    Ok((
        worst <= 1e-12,
        format!(
            "vortex {} cycles: relative drift h {:.2e}, qx {:.2e}, qy {:.2e} after boundary flux and replacement (limit 1e-12)",
            rep.cycles, rep.drift_relative[0], rep.drift_relative[1], rep.drift_relative[2]
        ),
    ))
}

fn erk_efficiency() -> Result<(bool, String)> {
    let mut cycles = Vec::new();
    for scheme in ["RK(3,3;1)", "RK(3,3;1/3)"] {
        let mut cfg = RunConfig::new("vortex");
        cfg.cells = Some(256);
        cfg.final_time = Some(0.5);
        cfg.cfl = Some(0.2);
        cfg.scheme = scheme.into();
        cycles.push(simulate(&cfg)?.cycle);
    }
    let ratio = cycles[1] as f64 / cycles[0] as f64;
    Ok((
        (2.7..=3.3).contains(&ratio),
        format!("cycles RK(3,3;1/3) {} / RK(3,3;1) {} = {ratio:.3} (range [2.7, 3.3])", cycles[1], cycles[0]),
    ))
}

fn rain_budget() -> Result<(bool, String)> {
    let sim = simulate(&RunConfig::new("rain_test3"))?;
    let rep = sim.report(0.0, false)?;
    let volume_in = rep.source.h;
    let balance = (rep.mass_final.h - rep.mass_initial.h - rep.boundary_flux.h - rep.boundary_jump.h - volume_in).abs()
        / volume_in.abs().max(f64::MIN_POSITIVE);
    let (shape_ok, shape) = rise_then_decay(&rep.probe, 100.0);
    Ok((balance <= 1e-6 && shape_ok, format!("volume balance {balance:.2e} of rain volume {volume_in:.4e} m^3 (limit 1e-6); {shape}")))
}

/// The series rises monotonically to a single peak and decays after
/// `t_decay`, up to a relative tolerance on the peak value.
fn rise_then_decay(series: &[(f64, f64)], t_decay: f64) -> (bool, String) {
    let Some((k_peak, &(t_peak, q_peak))) =
        series.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
    else {
        return (false, "empty outlet series".into());
    };
    if q_peak <= 0.0 {
        return (false, "no outflow at the outlet".into());
    }
    let tol = 1e-6 * q_peak;
    let rising = series[..=k_peak].windows(2).all(|w| w[1].1 >= w[0].1 - tol);
    let after: Vec<_> = series.iter().filter(|(t, _)| *t >= t_decay.max(t_peak)).collect();
    let decaying = after.windows(2).all(|w| w[1].1 <= w[0].1 + tol);
    let fell = after.last().is_some_and(|l| l.1 < q_peak);
    let ok = rising && decaying && fell && t_peak <= t_decay * 1.1;
    (ok, format!("outlet discharge peaks {q_peak:.4e} at t = {t_peak:.1} s, rising {rising}, decaying {decaying}"))
}

fn wave_speed(trials: usize, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let depth = |rng: &mut ChaCha8Rng| match rng.gen_range(0..10) {
        0 => 0.0,
        1 => rng.gen::<f64>() * 1e-8,
        2 => rng.gen::<f64>() * 1e-3,
        _ => rng.gen::<f64>() * 10.0,
    };
    for _ in 0..trials {
        let (h_l, h_r) = (depth(&mut rng), depth(&mut rng));
        let u_l = if h_l > 0.0 { rng.gen_range(-10.0..10.0) } else { 0.0 };
        let u_r = if h_r > 0.0 { rng.gen_range(-10.0..10.0) } else { 0.0 };
        let bound = max_wave_speed_primitive(h_l, u_l, h_r, u_r, GRAVITY);
        let exact = exact_riemann_max_speed(h_l, u_l, h_r, u_r, GRAVITY)?;
        worst = worst.max(exact - bound);
        if bound < exact - 1e-10 {
            violations += 1;
        }
    }
    Ok((violations == 0, format!("{trials} pairs: {violations} violations, max(exact - bound) = {worst:.2e}")))
}

pub fn random_graph(rng: &mut ChaCha8Rng, two_d: bool, min_cells: usize) -> Result<MeshGraph> {
    let kind = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { BoundaryKind::Reflecting } else { BoundaryKind::Free };
    if two_d {
        let x0 = rng.gen_range(-1.0..1.0);
        let y0 = rng.gen_range(-1.0..1.0);
        build_quad_mesh(&QuadMeshSpec {
            nx: rng.gen_range(min_cells..=5),
            ny: rng.gen_range(min_cells..=5),
            extent: [x0, y0, x0 + rng.gen_range(0.2..4.0), y0 + rng.gen_range(0.2..4.0)],
            distortion: rng.gen_range(0.0..0.3),
            seed: rng.gen(),
            tags: RectangleBoundary::uniform(kind(rng)),
        })
    } else {
        let x0 = rng.gen_range(-1.0..1.0);
        build_interval_mesh(rng.gen_range(min_cells..=12), x0, x0 + rng.gen_range(0.2..4.0), [kind(rng), kind(rng)])
    }
}

/// Admissible random field; `dry_share` of the nodes are dry, and nearly
/// dry as well when `near_dry` is set.
pub fn random_field(rng: &mut ChaCha8Rng, graph: &MeshGraph, dry_share: f64, near_dry: bool, h_wet_min: f64) -> Vec<State> {
    (0..graph.node_count())
        .map(|_| {
            let h = if rng.gen_bool(dry_share) {
                match if near_dry { rng.gen_range(0..3) } else { 0 } {
                    0 => 0.0,
                    1 => rng.gen::<f64>() * 1e-10,
                    _ => rng.gen::<f64>() * 1e-5,
                }
            } else {
                rng.gen_range(h_wet_min..2.0)
            };
            if h == 0.0 {
                return State::ZERO;
            }
            let v = [rng.gen_range(-3.0..3.0), if graph.dim() == 2 { rng.gen_range(-3.0..3.0) } else { 0.0 }];
            State::new(h, [h * v[0], h * v[1]])
        })
        .collect()
}

fn invariant_domain(trials: usize, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut first_failure = None;
    let mut min_depth = f64::INFINITY;
    let mut worst = 0.0_f64;
    for trial in 0..trials {
        let graph = random_graph(&mut rng, trial % 2 == 1, 2)?;
        let u = random_field(&mut rng, &graph, 0.3, true, 0.0);
        let z: Vec<f64> = (0..graph.node_count()).map(|_| rng.gen_range(0.0..0.5)).collect();
        let relax = rng.gen_bool(0.5);
        let cfl = rng.gen_range(0.05..=1.0);
        match limited_euler_step(&graph, &u, &z, cfl, relax) {
            Ok(step) => {
                let (ok, excess) = step.within_bounds();
                min_depth = min_depth.min(step.u.iter().map(|s| s.h).fold(f64::INFINITY, f64::min));
                worst = worst.max(excess);
                if !ok {
                    failures += 1;
                    first_failure.get_or_insert(trial);
                }
            }
            Err(e) => {
                failures += 1;
                first_failure.get_or_insert_with(|| {
                    eprintln!("invariant domain trial {trial}: {e}");
                    trial
                });
            }
        }
    }
    let mut detail = format!(
        "{trials} limited steps: {failures} failures, min depth {min_depth:.3e}, worst scaled bound excess {worst:.2e} (limit 1e-12)"
    );
    if let Some(t) = first_failure {
        detail.push_str(&format!(", first failing trial {t}"));
    }
    Ok((failures == 0, detail))
}

/// One limited forward-Euler step and the data needed to check it.
pub struct LimitedStep {
    pub u_low: Vec<State>,
    pub u: Vec<State>,
    pub bounds: Vec<LimiterBounds>,
    pub h_scale: f64,
}

impl LimitedStep {
    /// Depth non-negative, depth of the low-order and limited states inside
    /// the local bounds, and the squared-velocity margin no worse than the
    /// low-order one. Returns the largest scaled excess as well.
    pub fn within_bounds(&self) -> (bool, f64) {
        let mut ok = true;
        let mut worst = 0.0_f64;
        for i in 0..self.u.len() {
            let b = &self.bounds[i];
            let tol = 1e-12 * self.h_scale;
            for h in [self.u_low[i].h, self.u[i].h] {
                let excess = (b.h_min - h).max(h - b.h_max).max(0.0) / self.h_scale;
                worst = worst.max(excess);
                ok &= h >= b.h_min - tol && h <= b.h_max + tol;
            }
            ok &= self.u[i].h >= 0.0;
            let s = &self.u[i];
            let scale = s.h * s.h * b.v2_max + dot(s.q, s.q);
            let floor = velocity_margin(&self.u_low[i], b.v2_max).min(0.0);
            let margin = velocity_margin(s, b.v2_max) - floor;
            if scale > 0.0 {
                worst = worst.max(-margin / scale);
            }
            ok &= margin >= -1e-12 * scale;
        }
        (ok, worst)
    }
}

/// Flux-only forward-Euler step at `cfl` times the admissible step, with the
/// high-order increments limited against the local bounds.
pub fn limited_euler_step(graph: &MeshGraph, u: &[State], z: &[f64], cfl: f64, relax: bool) -> Result<LimitedStep> {
    let h_scale = u.iter().map(|s| s.h).fold(0.0, f64::max).max(1e-3);
    let consts = PhysConstants::new(GRAVITY, 1e-4, h_scale)?;
    let mut low = LowOrderWorkspace::new(graph);
    low.prepare(graph, u, z, &consts);
    let tau = cfl * low.max_time_step(graph).unwrap_or(1.0);
    low.assemble(graph, u, tau, &Sources::NONE, &consts)?;
    let alpha = entropy_indicator(graph, u, &low.velocity, &consts);
    let d_high = high_order_viscosity(graph, &low.d, &alpha);
    let nnz = graph.sparsity().nnz();
    let mut flux = vec![State::ZERO; nnz];
    high_order_fluxes(graph, u, z, &low, &d_high, consts.g, &mut flux);
    let mut sums = vec![State::ZERO; u.len()];
    node_sums(graph, &flux, &mut sums);
    let mut p = vec![State::ZERO; nnz];
    assemble_p(graph, tau, &flux, &sums, &low.flux, &mass_correction(graph), None, &mut p);
    let bounds: Vec<_> = (0..u.len()).map(|i| compute_bounds(graph, &low, u, tau, relax, &consts, i)).collect();
    let mut ell = vec![0.0; nnz];
    limiter_coefficients(graph, &low.update, &p, &bounds, &consts, &mut ell)?;
    let mut out = vec![State::ZERO; u.len()];
    final_update(graph, &low.update, &p, &ell, &mut out);
    Ok(LimitedStep { u_low: low.update, u: out, bounds, h_scale })
}

/// Residual of the discrete flat-bottom entropy inequality at every node with
/// `Σ_j c_ij = 0`, scaled by the magnitude of its terms; positive values are
/// violations.
pub fn entropy_residuals(graph: &MeshGraph, u: &[State], cfl: f64) -> Result<Vec<f64>> {
    let h_max = u.iter().map(|s| s.h).fold(0.0, f64::max).max(1e-3);
    let consts = PhysConstants::new(GRAVITY, 1e-4, h_max)?;
    let z = vec![0.0; u.len()];
    let mut low = LowOrderWorkspace::new(graph);
    low.prepare(graph, u, &z, &consts);
    let tau = cfl * low.max_time_step(graph).unwrap_or(1.0);
    low.assemble(graph, u, tau, &Sources::NONE, &consts)?;
    let s = graph.sparsity();
    let m = graph.lumped_mass();
    let c = graph.c_entries();
    let e: Vec<f64> = u.iter().map(|s| entropy_flat(s, &consts)).collect::<Result<_>>()?;
    let f: Vec<_> = u.iter().map(|s| entropy_flux_flat(s, &consts)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 0..s.rows() {
        let (mut csum, mut cabs) = ([0.0; 2], 0.0);
        for k in s.row(i) {
            csum[0] += c[k][0];
            csum[1] += c[k][1];
            cabs += c[k][0].abs() + c[k][1].abs();
        }
        if csum[0].abs() + csum[1].abs() > 1e-12 * cabs {
            continue;
        }
        let e_new = entropy_flat(&low.update[i], &consts)?;
        let mut lhs = m[i] / tau * (e_new - e[i]);
        let mut scale = m[i] / tau * (e_new.abs() + e[i].abs());
        for k in s.row(i) {
            let j = s.col(k);
            if j == i {
                continue;
            }
            let flux = dot(f[j], c[k]) - dot(f[i], c[k]);
            let visc = low.d[k] * (e[j] - e[i]);
            lhs += flux - visc;
            scale += dot(f[j], c[k]).abs() + dot(f[i], c[k]).abs() + low.d[k] * (e[j].abs() + e[i].abs());
        }
        out.push(if scale > 0.0 { lhs / scale } else { lhs });
    }
    Ok(out)
}

fn entropy_inequality(trials: usize, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut nodes = 0;
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..trials {
        let graph = random_graph(&mut rng, trial % 2 == 1, 2)?;
        let u = random_field(&mut rng, &graph, 0.1, false, 1e-2);
        let cfl = rng.gen_range(0.05..=1.0);
        for r in entropy_residuals(&graph, &u, cfl)? {
            nodes += 1;
            worst = worst.max(r);
            if r > 1e-11 {
                violations += 1;
            }
        }
    }
    Ok((violations == 0, format!("{trials} low-order steps, {nodes} nodes: {violations} violations, max scaled residual {worst:.2e} (limit 1e-11)")))
}
