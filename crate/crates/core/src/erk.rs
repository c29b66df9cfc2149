//! Explicit Runge-Kutta time stepping where every stage is a limited,
//! invariant-domain preserving forward-Euler update driven by a weighted
//! sum of the high-order fluxes of all previous stages.

use crate::boundary::{apply_boundary_conditions, BoundaryData, BoundaryStats};
use crate::error::{Error, Result};
use crate::high_order::{
    assemble_p, entropy_indicator_into, high_order_fluxes, high_order_viscosity_into, limiter_weight, mass_correction,
    mass_product, node_sums, SourceIncrements,
};
use crate::limiter::{compute_bounds, final_update, limiter_coefficients, LimiterBounds};
use crate::low_order::{LowOrderWorkspace, Sources};
use crate::mesh::MeshGraph;
use crate::state::{PhysConstants, State};

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Stage `l` uses `Σ_k w[l][k] F^{H,(k)}`.
    Idp { weights: Vec<Vec<f64>> },
    /// Shu-Osher form: `U^{(l+1)} = keep[l] U^n + (1 − keep[l]) FE(U^{(l)})`,
    /// reached at time `t + times[l] τ`.
    Ssp { keep: Vec<f64>, times: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErkScheme {
    pub name: &'static str,
    pub stages: usize,
    pub order: usize,
    /// Efficiency ratio: one step advances `efficiency · stages · τ_n`.
    pub efficiency: f64,
    pub method: Method,
}

impl ErkScheme {
    #[inline]
    pub fn step_length(&self, tau_n: f64) -> f64 {
        self.efficiency * self.stages as f64 * tau_n
    }

    /// Weight rows, for the stage-weighted schemes.
    pub fn weights(&self) -> Option<&[Vec<f64>]> {
        match &self.method {
            Method::Idp { weights } => Some(weights),
            Method::Ssp { .. } => None,
        }
    }
}

pub const SCHEME_NAMES: [&str; 7] =
    ["RK(1,1;1)", "RK(2,2;1)", "RK(3,3;1)", "RK(4,3;1)", "RK(5,4;1)", "RK(2,2;1/2)", "RK(3,3;1/3)"];

fn canonical(name: &str) -> String {
    let s: String = name.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    match s.as_str() {
        "fe" | "euler" | "erk11" | "rk(1,1;1)" => "RK(1,1;1)",
        "erk22" | "rk(2,2;1)" => "RK(2,2;1)",
        "erk33" | "rk(3,3;1)" => "RK(3,3;1)",
        "erk43" | "rk(4,3;1)" => "RK(4,3;1)",
        "erk54" | "rk(5,4;1)" => "RK(5,4;1)",
        "ssp22" | "ssprk22" | "rk(2,2;1/2)" | "rk(2,2;0.5)" | "rk(2,2;½)" => "RK(2,2;1/2)",
        "ssp33" | "ssprk33" | "rk(3,3;1/3)" | "rk(3,3;⅓)" => "RK(3,3;1/3)",
        _ => return name.to_string(),
    }
    .to_string()
}

/// Built-in scheme by name (`RK(3,3;1)`, `erk33`, `RK(3,3;1/3)`, `ssp33`, ...).
pub fn builtin_scheme(name: &str) -> Result<ErkScheme> {
    let idp = |name, stages, order, weights: Vec<Vec<f64>>| ErkScheme {
        name,
        stages,
        order,
        efficiency: 1.0,
        method: Method::Idp { weights },
    };
    let scheme = match canonical(name).as_str() {
        "RK(1,1;1)" => idp("RK(1,1;1)", 1, 1, vec![vec![1.0]]),
        "RK(2,2;1)" => idp("RK(2,2;1)", 2, 2, vec![vec![1.0], vec![-1.0, 2.0]]),
        "RK(3,3;1)" => idp("RK(3,3;1)", 3, 3, vec![vec![1.0], vec![-1.0, 2.0], vec![0.75, -2.0, 2.25]]),
        "RK(4,3;1)" => idp(
            "RK(4,3;1)",
            4,
            3,
            vec![
                vec![1.0],
                vec![-1.0, 2.0],
                vec![0.0, -1.0, 2.0],
                vec![0.0, 5.0 / 3.0, -10.0 / 3.0, 8.0 / 3.0],
            ],
        ),
        "RK(5,4;1)" => idp(
            "RK(5,4;1)",
            5,
            4,
            vec![
                vec![1.0],
                vec![0.303_779_113_477_746, 0.696_220_886_522_255],
                vec![-2.596_605_007_106_260, 3.860_592_821_791_782, -0.263_987_814_685_521],
                vec![2.373_989_715_203_703, -1.980_102_553_333_916, -3.819_151_895_277_756, 4.425_264_733_407_969],
                vec![
                    -1.606_747_744_309_784,
                    1.817_291_202_624_922,
                    1.137_969_506_889_054,
                    -2.114_595_709_136_266,
                    1.766_082_743_932_075,
                ],
            ],
        ),
        "RK(2,2;1/2)" => ErkScheme {
            name: "RK(2,2;1/2)",
            stages: 2,
            order: 2,
            efficiency: 0.5,
            method: Method::Ssp { keep: vec![0.0, 0.5], times: vec![1.0, 1.0] },
        },
        "RK(3,3;1/3)" => ErkScheme {
            name: "RK(3,3;1/3)",
            stages: 3,
            order: 3,
            efficiency: 1.0 / 3.0,
            method: Method::Ssp { keep: vec![0.0, 0.75, 1.0 / 3.0], times: vec![1.0, 0.5, 1.0] },
        },
        _ => return Err(Error::UnknownScheme(name.to_string())),
    };
    Ok(scheme)
}

/// Elementary step `τ_n = CFL · min_i m_i / (2|d_ii|)`, capped by `tau_max`,
/// which is also the fallback when no node carries viscosity.
pub fn compute_time_step(low: &LowOrderWorkspace, graph: &MeshGraph, cfl: f64, tau_max: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::Config(format!("CFL number must lie in (0, 1], got {cfl}")));
    }
    Ok(match low.max_time_step(graph) {
        Some(t) => (cfl * t).min(tau_max),
        None => tau_max,
    })
}

/// Spatially uniform rain active on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rain {
    pub rate: f64,
    pub start: f64,
    pub end: f64,
}

impl Rain {
    pub fn rate_at(&self, t: f64) -> f64 {
        if t >= self.start && t < self.end {
            self.rate
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimiterMode {
    /// Convex limiting against the local bounds.
    Convex,
    /// `ℓ ≡ 1`: the unlimited high-order update.
    Unlimited,
    /// `ℓ ≡ 0`: the low-order update.
    LowOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOptions {
    pub relax: bool,
    pub limiter: LimiterMode,
    /// Apply the consistent-mass correction `b_ij`.
    pub mass_correction: bool,
    /// Use the entropy indicator; otherwise `α ≡ 1` and `d^H = d^L`.
    pub indicator: bool,
    /// Depth, relative to `h_max_ref`, below which the discharge is zeroed.
    pub dry_clamp: f64,
}

impl Default for StageOptions {
    fn default() -> Self {
        StageOptions { relax: false, limiter: LimiterMode::Convex, mass_correction: true, indicator: true, dry_clamp: 1e-14 }
    }
}

/// Everything a step needs besides the state.
pub struct Problem<'a> {
    pub graph: &'a MeshGraph,
    pub bathymetry: &'a [f64],
    pub consts: PhysConstants,
    pub manning: f64,
    pub rain: Option<Rain>,
    pub boundary_data: Option<&'a BoundaryData<'a>>,
    pub options: StageOptions,
}

impl Problem<'_> {
    fn sources_at(&self, t: f64) -> Sources {
        Sources { manning: self.manning, rain: self.rain.map_or(0.0, |r| r.rate_at(t)) }
    }
}

/// Per-node accounting of everything that changes `Σ m_i U_i` besides
/// internal fluxes: boundary fluxes, sources and post-processing jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct Budget {
    pub flux: Vec<State>,
    pub source: Vec<State>,
    pub jump: Vec<State>,
}

impl Budget {
    pub fn new(n: usize) -> Self {
        Budget { flux: vec![State::ZERO; n], source: vec![State::ZERO; n], jump: vec![State::ZERO; n] }
    }

    fn clear(&mut self) {
        for v in [&mut self.flux, &mut self.source, &mut self.jump] {
            v.iter_mut().for_each(|x| *x = State::ZERO);
        }
    }

    fn scale(&mut self, f: f64) {
        for v in [&mut self.flux, &mut self.source, &mut self.jump] {
            v.iter_mut().for_each(|x| *x = *x * f);
        }
    }

    fn add(&mut self, o: &Budget) {
        for (a, b) in [(&mut self.flux, &o.flux), (&mut self.source, &o.source), (&mut self.jump, &o.jump)] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
    }

    pub fn total_flux(&self) -> State {
        self.flux.iter().fold(State::ZERO, |a, b| a + *b)
    }

    pub fn total_source(&self) -> State {
        self.source.iter().fold(State::ZERO, |a, b| a + *b)
    }

    pub fn total_jump(&self) -> State {
        self.jump.iter().fold(State::ZERO, |a, b| a + *b)
    }

    pub fn total(&self) -> State {
        self.total_flux() + self.total_source() + self.total_jump()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Physical time advanced.
    pub dt: f64,
    pub tau_n: f64,
    pub restarts: usize,
}

/// Maximum number of step restarts with halved `τ_n`.
pub const MAX_RESTARTS: usize = 10;

/// Stage engine with all per-stage buffers.
pub struct ErkStepper {
    scheme: ErkScheme,
    low: LowOrderWorkspace,
    alpha: Vec<f64>,
    d_high: Vec<f64>,
    archive: Vec<Vec<State>>,
    src_archive: Vec<Vec<State>>,
    acc: Vec<State>,
    acc_sum: Vec<State>,
    src_acc: Vec<State>,
    src_mass: Vec<State>,
    p: Vec<State>,
    ell: Vec<f64>,
    bounds: Vec<LimiterBounds>,
    b: Vec<f64>,
    stage: Vec<State>,
    next: Vec<State>,
    base: Vec<State>,
    step_budget: Budget,
    fe_budget: Budget,
    /// Accumulated over all committed steps.
    pub budget: Budget,
    pub boundary_stats: BoundaryStats,
    /// Committed stages (forward-Euler substeps).
    pub stage_count: usize,
}

impl ErkStepper {
    pub fn new(scheme: ErkScheme, graph: &MeshGraph, options: &StageOptions) -> Self {
        let n = graph.node_count();
        let nnz = graph.sparsity().nnz();
        let slots = match &scheme.method {
            Method::Idp { .. } => scheme.stages,
            Method::Ssp { .. } => 1,
        };
        ErkStepper {
            low: LowOrderWorkspace::new(graph),
            alpha: vec![0.0; n],
            d_high: vec![0.0; nnz],
            archive: vec![vec![State::ZERO; nnz]; slots],
            src_archive: vec![vec![State::ZERO; n]; slots],
            acc: vec![State::ZERO; nnz],
            acc_sum: vec![State::ZERO; n],
            src_acc: vec![State::ZERO; n],
            src_mass: vec![State::ZERO; n],
            p: vec![State::ZERO; nnz],
            ell: vec![0.0; nnz],
            bounds: vec![LimiterBounds::default(); n],
            b: if options.mass_correction { mass_correction(graph) } else { vec![0.0; nnz] },
            stage: vec![State::ZERO; n],
            next: vec![State::ZERO; n],
            base: vec![State::ZERO; n],
            step_budget: Budget::new(n),
            fe_budget: Budget::new(n),
            budget: Budget::new(n),
            boundary_stats: BoundaryStats::default(),
            stage_count: 0,
            scheme,
        }
    }

    pub fn scheme(&self) -> &ErkScheme {
        &self.scheme
    }

    /// Admissible elementary step for state `u` (first-stage viscosity).
    pub fn time_step(&mut self, prob: &Problem<'_>, u: &[State], cfl: f64, tau_max: f64) -> Result<f64> {
        self.low.prepare(prob.graph, u, prob.bathymetry, &prob.consts);
        compute_time_step(&self.low, prob.graph, cfl, tau_max)
    }

    /// Advance `u` from `t` by one step, never past `t_stop`.
    pub fn step(
        &mut self,
        prob: &Problem<'_>,
        u: &mut [State],
        t: f64,
        cfl: f64,
        tau_max: f64,
        t_stop: f64,
        cycle: usize,
    ) -> Result<StepInfo> {
        let mut tau_n = self.time_step(prob, u, cfl, tau_max)?;
        if t + self.scheme.step_length(tau_n) > t_stop {
            tau_n = (t_stop - t) / (self.scheme.efficiency * self.scheme.stages as f64);
        }
        if !(tau_n > 0.0) {
            return Err(Error::Solver { cycle, time: t, node: 0, reason: format!("non-positive time step {tau_n}") });
        }
        self.base.copy_from_slice(u);
        let sources = prob.sources_at(t);
        for restart in 0..=MAX_RESTARTS {
            match self.try_step(prob, t, tau_n, &sources) {
                Ok(()) => {
                    u.copy_from_slice(&self.stage);
                    self.budget.add(&self.step_budget);
                    return Ok(StepInfo { dt: self.scheme.step_length(tau_n), tau_n, restarts: restart });
                }
                Err(Error::Cfl { .. }) => tau_n *= 0.5,
                Err(Error::LimiterBound { node, psi }) => {
                    return Err(Error::Solver {
                        cycle,
                        time: t,
                        node,
                        reason: format!("low-order state violates its velocity bound (psi = {psi:e})"),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        Err(Error::Solver {
            cycle,
            time: t,
            node: 0,
            reason: format!("stage CFL condition still violated after {MAX_RESTARTS} restarts"),
        })
    }

    fn try_step(&mut self, prob: &Problem<'_>, t: f64, tau: f64, sources: &Sources) -> Result<()> {
        self.step_budget.clear();
        self.stage.copy_from_slice(&self.base);
        let method = self.scheme.method.clone();
        match &method {
            Method::Idp { weights } => {
                for (l, w) in weights.iter().enumerate() {
                    self.low.prepare(prob.graph, &self.stage, prob.bathymetry, &prob.consts);
                    let mut budget = std::mem::replace(&mut self.step_budget, Budget::new(0));
                    let r = self.run_stage(prob, l, w, tau, sources, &mut budget);
                    self.step_budget = budget;
                    r?;
                    std::mem::swap(&mut self.stage, &mut self.next);
                    self.post_process(prob, t + (l + 1) as f64 * tau);
                }
            }
            Method::Ssp { keep, times } => {
                for (l, (&a, &c)) in keep.iter().zip(times).enumerate() {
                    let _ = l;
                    self.low.prepare(prob.graph, &self.stage, prob.bathymetry, &prob.consts);
                    self.fe_budget.clear();
                    let mut budget = std::mem::replace(&mut self.fe_budget, Budget::new(0));
                    let r = self.run_stage(prob, 0, &[1.0], tau, sources, &mut budget);
                    self.fe_budget = budget;
                    r?;
                    for ((s, nx), b) in self.stage.iter_mut().zip(&self.next).zip(&self.base) {
                        *s = *b * a + *nx * (1.0 - a);
                    }
                    self.step_budget.add(&self.fe_budget);
                    self.step_budget.scale(1.0 - a);
                    self.post_process(prob, t + c * tau);
                }
            }
        }
        Ok(())
    }

    fn post_process(&mut self, prob: &Problem<'_>, t: f64) {
        apply_boundary_conditions(
            prob.graph,
            &mut self.stage,
            t,
            prob.boundary_data,
            prob.consts.g,
            &mut self.step_budget.jump,
            &mut self.boundary_stats,
        );
        let h_dry = prob.options.dry_clamp * prob.consts.h_max_ref;
        let m = prob.graph.lumped_mass();
        for (i, u) in self.stage.iter_mut().enumerate() {
            if u.h < h_dry && (u.q[0] != 0.0 || u.q[1] != 0.0) {
                self.step_budget.jump[i] -= State::new(0.0, u.q) * m[i];
                u.q = [0.0; 2];
            }
        }
        self.stage_count += 1;
    }

    /// One limited stage from `self.stage` into `self.next`. `low` must be
    /// prepared for `self.stage`.
    fn run_stage(
        &mut self,
        prob: &Problem<'_>,
        l: usize,
        weights: &[f64],
        tau: f64,
        sources: &Sources,
        budget: &mut Budget,
    ) -> Result<()> {
        let graph = prob.graph;
        let consts = &prob.consts;
        let g = consts.g;
        let u = &self.stage;
        self.low.assemble(graph, u, tau, sources, consts)?;

        if prob.options.indicator {
            entropy_indicator_into(graph, u, &self.low.velocity, consts, &mut self.alpha);
        } else {
            self.alpha.iter_mut().for_each(|a| *a = 1.0);
        }
        high_order_viscosity_into(graph, &self.low.d, &self.alpha, &mut self.d_high);
        high_order_fluxes(graph, u, prob.bathymetry, &self.low, &self.d_high, g, &mut self.archive[l]);
        let with_sources = sources.is_active();
        if with_sources {
            self.src_archive[l].copy_from_slice(&self.low.source);
        }

        self.acc.iter_mut().for_each(|x| *x = State::ZERO);
        self.src_acc.iter_mut().for_each(|x| *x = State::ZERO);
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (a, f) in self.acc.iter_mut().zip(&self.archive[k]) {
                *a += *f * w;
            }
            if with_sources {
                for (a, f) in self.src_acc.iter_mut().zip(&self.src_archive[k]) {
                    *a += *f * w;
                }
            }
        }
        node_sums(graph, &self.acc, &mut self.acc_sum);
        if with_sources {
            mass_product(graph, &self.src_acc, &mut self.src_mass);
        }
        let src = with_sources.then_some(SourceIncrements {
            high: &self.src_acc,
            high_mass: &self.src_mass,
            low: &self.low.source,
        });
        assemble_p(graph, tau, &self.acc, &self.acc_sum, &self.low.flux, &self.b, src, &mut self.p);

        match prob.options.limiter {
            LimiterMode::Convex => {
                for i in 0..graph.node_count() {
                    self.bounds[i] = compute_bounds(graph, &self.low, u, tau, prob.options.relax, consts, i);
                }
                limiter_coefficients(graph, &self.low.update, &self.p, &self.bounds, consts, &mut self.ell)?;
            }
            LimiterMode::Unlimited => self.ell.iter_mut().for_each(|x| *x = 1.0),
            LimiterMode::LowOrder => self.ell.iter_mut().for_each(|x| *x = 0.0),
        }
        final_update(graph, &self.low.update, &self.p, &self.ell, &mut self.next);

        self.account(graph, tau, with_sources, budget);
        Ok(())
    }

    /// Add the parts of `Σ m_i (U^{new} − U)` that do not cancel pairwise:
    /// fluxes between two boundary nodes, diagonal fluxes, and sources.
    fn account(&self, graph: &MeshGraph, tau: f64, with_sources: bool, budget: &mut Budget) {
        let s = graph.sparsity();
        let m = graph.lumped_mass();
        let mass = graph.mass_entries();
        for i in 0..s.rows() {
            let kd = s.diag(i);
            let lambda = limiter_weight(graph, i);
            let bnd_i = graph.is_boundary(i);
            let d_flux = self.acc[kd] - self.low.flux[kd];
            let mut flux = self.low.flux[kd] * tau;
            let mut src = self.low.source[i] * (tau * m[i]);
            let d_src = if with_sources { (self.src_acc[i] - self.low.source[i]) * mass[kd] } else { State::ZERO };
            for k in s.row(i) {
                if k == kd {
                    continue;
                }
                let j = s.col(k);
                let l = self.ell[k];
                if bnd_i && graph.is_boundary(j) {
                    flux += self.low.flux[k] * tau + self.p[k] * (m[i] * lambda * l);
                } else if l != 0.0 {
                    flux += d_flux * (l * tau * lambda);
                    if with_sources {
                        src += (d_src * lambda + (self.src_acc[j] - self.low.source[i]) * mass[k]) * (l * tau);
                    }
                }
            }
            budget.flux[i] += flux;
            budget.source[i] += src;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_tables() {
        let s = builtin_scheme("RK(2,2;1)").unwrap();
        assert_eq!(s.weights().unwrap(), &[vec![1.0], vec![-1.0, 2.0]]);
        let s = builtin_scheme("RK(4,3;1)").unwrap();
        assert_eq!(s.weights().unwrap()[3], vec![0.0, 5.0 / 3.0, -10.0 / 3.0, 8.0 / 3.0]);
        let s = builtin_scheme("rk(5,4;1)").unwrap();
        assert_eq!(s.weights().unwrap()[4][4], 1.766_082_743_932_075);
        for name in SCHEME_NAMES {
            let s = builtin_scheme(name).unwrap();
            assert_eq!(s.name, name);
            if let Some(w) = s.weights() {
                assert_eq!(w.len(), s.stages);
                for (l, row) in w.iter().enumerate() {
                    assert_eq!(row.len(), l + 1);
                    let sum: f64 = row.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12, "{name} row {l}: {sum}");
                }
            }
        }
        assert!(matches!(builtin_scheme("RK(9,9;1)"), Err(Error::UnknownScheme(_))));
        assert_eq!(builtin_scheme("ssp33").unwrap().efficiency, 1.0 / 3.0);
        assert!((builtin_scheme("erk33").unwrap().step_length(0.1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rain_window() {
        let r = Rain { rate: 1e-4, start: 0.0, end: 100.0 };
        assert_eq!(r.rate_at(50.0), 1e-4);
        assert_eq!(r.rate_at(100.0), 0.0);
    }
}
