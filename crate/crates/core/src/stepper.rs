//! Time stepping: one staggered pass `u -> (c, mu) -> z -> exclusion` per
//! step, whole runs with their final verification, and the eps-sweep.

use serde::{Deserialize, Serialize};

use crate::admissible::{admissible_region, apply_exclusion, check_fineness, check_shrinking, ExclusionEvent, RegionMask};
use crate::cahn_hilliard::{chemical_potential, chemical_potential_residual, dissipation_increment, step_ch_from, SchemeTerms};
use crate::config::{ScenarioConfig, SubstepOrder};
use crate::damage::{damage_dissipation_increment, step_damage, vi_residual};
use crate::elasticity::{energy_transform_check, ElasticProblem};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::ledger::{check_energy_inequality, external_work_increment, free_energy, AprioriMonitor, EnergyVerdict, Fields, Ledger, LedgerRow, MonitorState};
use crate::material::{MaterialModel, RegularizationParams};

/// The tuple `(c, u, z, mu, F)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: usize,
    pub t: f64,
    pub c: ScalarField,
    pub z: ScalarField,
    pub mu: ScalarField,
    pub u: VectorField,
    pub region: RegionMask,
    pub reg: RegularizationParams,
}

/// Per-step solver statistics and substep energies.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub cg_iterations: usize,
    pub newton_iterations: usize,
    pub damage_iterations: usize,
    /// Largest `|lhs - rhs| / (1 + |lhs|)` of the energy-transform identity
    /// over the equilibrium solves of this step.
    pub transform_defect: f64,
    /// `E + D - W_ext (+ J)` accumulated within the step: at its start, after
    /// the displacement solve, after each of the two middle substeps, and after
    /// exclusion with re-equilibration. Non-increasing up to solver tolerance.
    pub substep_energies: [f64; 5],
}

/// Outcome of the verification pass over a finished (or partial) run.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub energy: EnergyVerdict,
    pub shrinking: bool,
    pub fineness: bool,
    /// `0 <= z^k <= z^(k-1) <= 1` nodally at every step.
    pub monotone: bool,
}

impl Verification {
    pub fn ok(&self) -> bool {
        self.energy.ok && self.shrinking && self.fineness && self.monotone
    }
}

/// A stored state at the output cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub c: ScalarField,
    pub z: ScalarField,
    pub mu: ScalarField,
    pub u: VectorField,
    pub region: RegionMask,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ledger: Ledger,
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<ExclusionEvent>,
    /// `F` after initialization and after every step.
    pub masks: Vec<RegionMask>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub verification: Verification,
    pub final_state: SimState,
}

/// A running simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    grid: Grid,
    model: MaterialModel,
    state: SimState,
    b: VectorField,
    ledger: Ledger,
    monitor: AprioriMonitor,
    events: Vec<ExclusionEvent>,
    masks: Vec<RegionMask>,
    diagnostics: Vec<StepDiagnostics>,
    initial_transform_defect: f64,
    monotone: bool,
    fineness: bool,
    total_steps: usize,
}

fn at(step: usize, substep: &'static str) -> impl FnOnce(Error) -> Error {
    move |e| Error::Substep { step, substep, source: Box::new(e) }
}

fn transform_defect(
    grid: &Grid,
    model: &MaterialModel,
    u: &VectorField,
    c: &ScalarField,
    z: &ScalarField,
    eps: f64,
    b: &VectorField,
    region: &RegionMask,
) -> Result<f64> {
    let (lhs, rhs) = energy_transform_check(grid, model, u, c, z, eps, b, Some(region))?;
    Ok((lhs - rhs).abs() / (1.0 + lhs.abs()))
}

/// Equilibrium displacement and the solver statistics.
fn equilibrate(
    grid: &Grid,
    model: &MaterialModel,
    c: &ScalarField,
    z: &ScalarField,
    b: &VectorField,
    eps: f64,
    region: &RegionMask,
    guess: Option<&VectorField>,
) -> Result<(VectorField, usize, f64, f64)> {
    let problem = ElasticProblem::new(grid, model, c, z, eps, Some(region))?;
    let (u, stats) = problem.solve(b, guess)?;
    let defect = transform_defect(grid, model, &u, c, z, eps, b, region)?;
    let res = problem.residual_norm(&u);
    Ok((u, stats.iterations, defect, res))
}

/// Initial state: `u0` minimizes the elastic energy at `(c0, z0, b(0))` on
/// `F0 = A_D({z0 > z_tol})`, `mu0` is the chemical potential of that state.
pub fn init_state(config: &ScenarioConfig) -> Result<SimState> {
    Ok(Simulation::new(config)?.state)
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.build_grid()?;
        let model = config.build_model()?;
        let reg = config.regularization.params();
        let eps = reg.epsilon;
        let c = config.initial_c(&grid);
        let z = config.initial_z(&grid);
        let region = admissible_region(&grid, &z, reg.z_tol);
        let b = config.boundary.at(&grid, 0.0);
        let (u, _, defect, _) = equilibrate(&grid, &model, &c, &z, &b, eps, &region, None).map_err(at(0, "initial equilibrium"))?;
        let mu = chemical_potential(&grid, &model, &c, &u, &z, eps, &region).map_err(at(0, "initial chemical potential"))?;
        let e0 = free_energy(&grid, &model, &c, &u, &z, eps, reg.p, &region);
        let mut monitor = AprioriMonitor::default();
        monitor.observe_state(&grid, &model, MonitorState { c: &c, u: &u, z: &z, region: &region }, eps, reg.p);
        let ledger = Ledger::new(e0, config.regularization.eta, reg.z_tol);
        let fineness = check_fineness(&grid, &region, &z, reg.z_tol, config.regularization.eta).ok;
        Ok(Self {
            config: config.clone(),
            total_steps: config.steps(),
            masks: vec![region.clone()],
            state: SimState { step: 0, t: 0.0, c, z, mu, u, region, reg },
            grid,
            model,
            b,
            ledger,
            monitor,
            events: Vec::new(),
            diagnostics: Vec::new(),
            initial_transform_defect: defect,
            monotone: true,
            fineness,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn model(&self) -> &MaterialModel {
        &self.model
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn events(&self) -> &[ExclusionEvent] {
        &self.events
    }

    pub fn masks(&self) -> &[RegionMask] {
        &self.masks
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    /// Largest energy-transform defect over all equilibrium solves so far.
    pub fn max_transform_defect(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.transform_defect).fold(self.initial_transform_defect, f64::max)
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn is_finished(&self) -> bool {
        self.state.step >= self.total_steps
    }

    pub fn snapshot(&self) -> Snapshot {
        let s = &self.state;
        Snapshot { step: s.step, t: s.t, c: s.c.clone(), z: s.z.clone(), mu: s.mu.clone(), u: s.u.clone(), region: s.region.clone() }
    }

    /// Advance one step and append its ledger row.
    pub fn step(&mut self) -> Result<&LedgerRow> {
        let grid = &self.grid;
        let model = &self.model;
        let prev = &self.state;
        let reg = prev.reg;
        let (eps, p, tau) = (reg.epsilon, reg.p, reg.tau);
        let k = prev.step + 1;
        let t = k as f64 * tau;
        let region_old = &prev.region;
        let b_new = self.config.boundary.at(grid, t);
        let mut cg = 0;
        let mut defect: f64 = 0.0;
        let e_start = free_energy(grid, model, &prev.c, &prev.u, &prev.z, eps, p, region_old);

        // displacement at the new boundary data
        let (u_a, w_ext) = if self.config.boundary.is_static() {
            (prev.u.clone(), 0.0)
        } else {
            let (u_a, it, d, _) = equilibrate(grid, model, &prev.c, &prev.z, &b_new, eps, region_old, Some(&prev.u))
                .map_err(at(k, "equilibrium"))?;
            cg += it;
            defect = defect.max(d);
            let before = Fields { c: &prev.c, u: &prev.u, z: &prev.z };
            let after = Fields { c: &prev.c, u: &u_a, z: &prev.z };
            let w = external_work_increment(grid, model, eps, region_old, before, after, &self.b, &b_new);
            (u_a, w)
        };
        let e_u = free_energy(grid, model, &prev.c, &u_a, &prev.z, eps, p, region_old);

        let (c_new, mu, z_dam, newton, dam_iter, d_ch, d_dam, e_mid) = match self.config.regularization.substep_order {
            SubstepOrder::ChFirst => {
                let ch = step_ch_from(grid, model, &prev.c, &prev.z, &u_a, &prev.z, &reg, Some(region_old), Some(&prev.mu))
                    .map_err(at(k, "Cahn-Hilliard"))?;
                let d_ch = dissipation_increment(grid, model, &ch.mu, &prev.z, eps, tau, Some(region_old));
                let e_mid = free_energy(grid, model, &ch.c, &u_a, &prev.z, eps, p, region_old) + d_ch;
                let dam = step_damage(grid, model, &prev.z, &ch.c, &u_a, &reg, Some(region_old)).map_err(at(k, "damage"))?;
                let d_dam = damage_dissipation_increment(grid, &dam.z, &prev.z, tau, Some(region_old));
                (ch.c, ch.mu, dam.z, ch.newton_iterations, dam.iterations, d_ch, d_dam, e_mid)
            }
            SubstepOrder::DamageFirst => {
                let dam = step_damage(grid, model, &prev.z, &prev.c, &u_a, &reg, Some(region_old)).map_err(at(k, "damage"))?;
                let d_dam = damage_dissipation_increment(grid, &dam.z, &prev.z, tau, Some(region_old));
                let e_mid = free_energy(grid, model, &prev.c, &u_a, &dam.z, eps, p, region_old) + d_dam;
                let ch = step_ch_from(grid, model, &prev.c, &prev.z, &u_a, &dam.z, &reg, Some(region_old), Some(&prev.mu))
                    .map_err(at(k, "Cahn-Hilliard"))?;
                let d_ch = dissipation_increment(grid, model, &ch.mu, &prev.z, eps, tau, Some(region_old));
                (ch.c, ch.mu, dam.z, ch.newton_iterations, dam.iterations, d_ch, d_dam, e_mid)
            }
        };
        let monotone = z_dam.values.iter().zip(&prev.z.values).all(|(&a, &b)| (0.0..=b).contains(&a) && b <= 1.0);
        let e_minus = free_energy(grid, model, &c_new, &u_a, &z_dam, eps, p, region_old);

        // residuals of the step's equations, before exclusion
        let z_en_ch = match self.config.regularization.substep_order {
            SubstepOrder::ChFirst => &prev.z,
            SubstepOrder::DamageFirst => &z_dam,
        };
        let scheme = SchemeTerms { c_prev: &prev.c, stabilizer: model.psi_stabilizer, delta: reg.delta, tau };
        let res_mu = chemical_potential_residual(grid, model, &c_new, &mu, &u_a, z_en_ch, eps, region_old, Some(&scheme));
        let c_dam = match self.config.regularization.substep_order {
            SubstepOrder::ChFirst => &c_new,
            SubstepOrder::DamageFirst => &prev.c,
        };
        let res_vi = vi_residual(grid, model, &z_dam, &prev.z, c_dam, &u_a, &reg, Some(region_old)).map_err(at(k, "damage"))?;

        // exclusion and re-equilibration on the new region
        let region_new = admissible_region(grid, &z_dam, reg.z_tol).intersection(region_old);
        let exclusion = apply_exclusion(grid, &z_dam, &region_new, region_old);
        let z_new = exclusion.z.clone();
        let (u_new, it, d, res_equil) =
            equilibrate(grid, model, &c_new, &z_new, &b_new, eps, &region_new, Some(&u_a)).map_err(at(k, "re-equilibration"))?;
        cg += it;
        defect = defect.max(d);
        let e_plus = free_energy(grid, model, &c_new, &u_new, &z_new, eps, p, &region_new);

        let j_prev = self.ledger.rows.last().map_or(0.0, |r| r.j_cum);
        let mut j_cum = j_prev;
        if exclusion.is_event() {
            let event = exclusion.into_event(k, t, e_minus, e_plus);
            j_cum += event.jump;
            self.events.push(event);
        }

        let mon_old = MonitorState { c: &c_new, u: &u_new, z: &z_new, region: region_old };
        self.monitor.observe_step(grid, model, mon_old, &mu, &prev.z, eps, reg.z_tol, tau, d_ch, d_dam);
        self.monitor.observe_state(grid, model, MonitorState { c: &c_new, u: &u_new, z: &z_new, region: &region_new }, eps, p);
        let fine = check_fineness(grid, &region_new, &z_new, reg.z_tol, self.config.regularization.eta);

        let (w_prev, d_prev) = if self.ledger.rows.is_empty() { (0.0, 0.0) } else { self.ledger.cumulative(self.ledger.rows.len() - 1) };
        let (w_tot, d_tot) = (w_prev + w_ext, d_prev + d_ch + d_dam);
        let row = LedgerRow {
            step: k,
            t,
            energy: e_plus,
            mass: mass(grid, &c_new),
            d_ch,
            d_dam,
            w_ext,
            j_cum,
            slack: self.ledger.e0 + w_tot - e_plus - j_cum - d_tot,
            res_equil,
            res_mu,
            res_vi,
            apriori: self.monitor.values(),
            fineness: fine.measure,
        };
        let jump = j_cum - j_prev;
        self.diagnostics.push(StepDiagnostics {
            step: k,
            cg_iterations: cg,
            newton_iterations: newton,
            damage_iterations: dam_iter,
            transform_defect: defect,
            substep_energies: [
                e_start,
                e_u - w_ext,
                e_mid - w_ext,
                e_minus + d_ch + d_dam - w_ext,
                e_plus + jump + d_ch + d_dam - w_ext,
            ],
        });
        self.monotone &= monotone;
        self.fineness &= fine.ok;
        self.masks.push(region_new.clone());
        self.ledger.rows.push(row);
        self.b = b_new;
        self.state = SimState { step: k, t, c: c_new, z: z_new, mu, u: u_new, region: region_new, reg };
        Ok(self.ledger.rows.last().expect("row just pushed"))
    }

    /// Run the verification pass and record its verdict in the ledger.
    pub fn verify(&mut self) -> Verification {
        let v = Verification {
            energy: check_energy_inequality(&self.ledger),
            shrinking: check_shrinking(&self.masks),
            fineness: self.fineness,
            monotone: self.monotone,
        };
        self.ledger.verdict = Some(v.ok());
        v
    }

    /// Whether the state after `step` is written at the output cadence.
    pub fn is_output_step(&self, step: usize) -> bool {
        step % self.config.output.every == 0 || step == self.total_steps
    }
}

/// `\int_Omega c`, exact for Q1 fields.
pub fn mass(grid: &Grid, c: &ScalarField) -> f64 {
    let m = grid.lumped_mass(&grid.full_mask());
    m.iter().zip(&c.values).map(|(a, b)| a * b).sum()
}

/// Run to `t_end`, keeping snapshots at the configured cadence.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput> {
    let mut sim = Simulation::new(config)?;
    let mut snapshots = vec![sim.snapshot()];
    while !sim.is_finished() {
        sim.step()?;
        if sim.is_output_step(sim.state.step) {
            snapshots.push(sim.snapshot());
        }
    }
    let verification = sim.verify();
    Ok(RunOutput {
        ledger: sim.ledger,
        snapshots,
        events: sim.events,
        masks: sim.masks,
        diagnostics: sim.diagnostics,
        verification,
        final_state: sim.state,
    })
}

pub const MONITOR_NAMES: [&str; 7] =
    ["sup_c_h1", "ehat_l2", "sup_z_w1p", "dz_l2", "sup_elastic_energy", "mobility_grad_mu_l2", "flux_bound_l2"];

/// Monitored values below this are round-off and count as zero in the spread.
pub const SPREAD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub epsilon: f64,
    /// Monitored quantities, `None` if the run failed.
    pub monitors: Option<[f64; 7]>,
    pub verdict: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub monitor_names: Vec<String>,
    pub runs: Vec<SweepRun>,
    /// Max/min ratio of each quantity over the successful runs (1 if all vanish,
    /// infinite if only some do).
    pub spread: [f64; 7],
}

impl SweepReport {
    pub fn all_succeeded(&self) -> bool {
        self.runs.iter().all(|r| r.monitors.is_some())
    }
}

/// Worker count from `CHD_THREADS` (unset or 0: available parallelism).
pub fn worker_threads() -> usize {
    let auto = || std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("CHD_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(0) | None => auto(),
        Some(n) => n,
    }
}

/// Run the scenario once per `epsilon`; failures are recorded per run.
pub fn sweep_epsilon(config: &ScenarioConfig, epsilons: &[f64], threads: usize) -> Result<SweepReport> {
    sweep_epsilon_with(config, epsilons, threads, |cfg| {
        let out = run(cfg)?;
        Ok((out.ledger.rows.last().map_or([0.0; 7], |r| r.apriori), out.ledger.verdict))
    })
}

/// As [`sweep_epsilon`] with a custom runner returning the final monitors and
/// the verdict of one run.
pub fn sweep_epsilon_with<F>(config: &ScenarioConfig, epsilons: &[f64], threads: usize, runner: F) -> Result<SweepReport>
where
    F: Fn(&ScenarioConfig) -> Result<([f64; 7], Option<bool>)> + Sync,
{
    if epsilons.is_empty() {
        return Err(Error::Config("empty epsilon list".into()));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("epsilons must be positive".into()));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("epsilons must be strictly decreasing".into()));
    }
    let one = |eps: f64| -> SweepRun {
        let mut cfg = config.clone();
        cfg.regularization.epsilon = eps;
        match runner(&cfg) {
            Ok((monitors, verdict)) => SweepRun { epsilon: eps, monitors: Some(monitors), verdict, error: None },
            Err(e) => SweepRun { epsilon: eps, monitors: None, verdict: None, error: Some(e.to_string()) },
        }
    };
    let threads = threads.clamp(1, epsilons.len());
    let mut runs: Vec<Option<SweepRun>> = vec![None; epsilons.len()];
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(&mut runs);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= epsilons.len() {
                    break;
                }
                let r = one(epsilons[i]);
                results.lock().expect("sweep results lock")[i] = Some(r);
            });
        }
    });
    let runs: Vec<SweepRun> = runs.into_iter().map(|r| r.expect("every run completes")).collect();
    let mut spread = [1.0; 7];
    for (q, s) in spread.iter_mut().enumerate() {
        let vals: Vec<f64> =
            runs.iter().filter_map(|r| r.monitors.map(|m| if m[q].abs() < SPREAD_FLOOR { 0.0 } else { m[q] })).collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        *s = if vals.is_empty() || max == 0.0 { 1.0 } else if min <= 0.0 { f64::INFINITY } else { max / min };
    }
    Ok(SweepReport { monitor_names: MONITOR_NAMES.iter().map(|s| s.to_string()).collect(), runs, spread })
}
