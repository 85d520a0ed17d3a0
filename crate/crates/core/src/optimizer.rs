//! Schedule search at fixed annealing time, bisection on the annealing time,
//! and the linear-schedule baseline.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dla::DlaSimulator;
use crate::error::{Error, Result};
use crate::ring_model::RingModel;
use crate::schedule::Schedule;
use crate::statevector::{TrotterParams, TrotterSimulator};

/// Largest refinement level reached by default.
pub const DEFAULT_K_MAX: usize = 255;
/// Default ceiling for the doubling search on T.
pub const DEFAULT_T_CAP: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Statevector,
    Dla,
    /// Test double: succeeds exactly when `T` reaches a threshold.
    StepFunction,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Statevector => "statevector",
            BackendKind::Dla => "dla",
            BackendKind::StepFunction => "step-function",
        })
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statevector" => Ok(BackendKind::Statevector),
            "dla" => Ok(BackendKind::Dla),
            "step-function" => Ok(BackendKind::StepFunction),
            _ => Err(Error::InvalidArgument(format!("unknown backend {s:?}"))),
        }
    }
}

/// Anything that maps a schedule to the final problem energy `E(T)`.
pub trait EnergyEvaluator: Send + Sync {
    fn model(&self) -> &RingModel;
    fn backend(&self) -> BackendKind;
    fn energy(&self, schedule: &Schedule) -> Result<f64>;
}

pub struct StatevectorEvaluator {
    sim: TrotterSimulator,
    params: TrotterParams,
}

impl StatevectorEvaluator {
    pub fn new(model: &RingModel, params: TrotterParams) -> Result<Self> {
        params.validate()?;
        Ok(StatevectorEvaluator {
            sim: TrotterSimulator::new(model)?,
            params,
        })
    }

    /// Same, but every evolution asserts norm and `X^N` conservation.
    pub fn with_invariant_checks(model: &RingModel, params: TrotterParams) -> Result<Self> {
        params.validate()?;
        Ok(StatevectorEvaluator {
            sim: TrotterSimulator::new(model)?.with_invariant_checks(),
            params,
        })
    }

    pub fn simulator(&self) -> &TrotterSimulator {
        &self.sim
    }
}

impl EnergyEvaluator for StatevectorEvaluator {
    fn model(&self) -> &RingModel {
        self.sim.model()
    }

    fn backend(&self) -> BackendKind {
        BackendKind::Statevector
    }

    fn energy(&self, schedule: &Schedule) -> Result<f64> {
        Ok(self.sim.converged_energy(schedule, &self.params)?.energy)
    }
}

pub struct DlaEvaluator {
    model: RingModel,
    sim: Arc<DlaSimulator>,
    params: TrotterParams,
}

impl DlaEvaluator {
    pub fn new(model: &RingModel, sim: Arc<DlaSimulator>, params: TrotterParams) -> Result<Self> {
        params.validate()?;
        if sim.basis().couplings() != model.couplings() {
            return Err(Error::InvalidArgument("Lie basis was built for a different model".into()));
        }
        Ok(DlaEvaluator {
            model: model.clone(),
            sim,
            params,
        })
    }
}

impl EnergyEvaluator for DlaEvaluator {
    fn model(&self) -> &RingModel {
        &self.model
    }

    fn backend(&self) -> BackendKind {
        BackendKind::Dla
    }

    fn energy(&self, schedule: &Schedule) -> Result<f64> {
        Ok(self.sim.converged_energy(schedule, &self.params)?.energy)
    }
}

/// Returns `E0` when `T >= threshold` and `E0 + 1` otherwise, whatever the shape.
pub struct StepFunctionEvaluator {
    model: RingModel,
    threshold: f64,
}

impl StepFunctionEvaluator {
    pub fn new(model: &RingModel, threshold: f64) -> Self {
        StepFunctionEvaluator {
            model: model.clone(),
            threshold,
        }
    }
}

impl EnergyEvaluator for StepFunctionEvaluator {
    fn model(&self) -> &RingModel {
        &self.model
    }

    fn backend(&self) -> BackendKind {
        BackendKind::StepFunction
    }

    fn energy(&self, schedule: &Schedule) -> Result<f64> {
        let e0 = self.model.exact_spectrum().e0;
        Ok(if schedule.total_time() >= self.threshold { e0 } else { e0 + 1.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub c: f64,
    /// Energy stagnation threshold between refinement levels.
    pub de_tol: f64,
    /// Relative width at which the bisection on T stops.
    pub dt_tol: f64,
    pub k_init: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Final trust-region radius of the minimizer.
    pub minimizer_tol: f64,
    /// Initial trust-region radius of the minimizer.
    pub minimizer_step: f64,
    pub seed: u64,
    pub t_cap: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            c: 0.5,
            de_tol: 1e-3,
            dt_tol: 0.1,
            k_init: 3,
            k_max: DEFAULT_K_MAX,
            restarts: 10,
            max_iter: 800,
            minimizer_tol: 1e-3,
            minimizer_step: 1.0,
            seed: 0,
            t_cap: DEFAULT_T_CAP,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.c, self.de_tol, self.dt_tol, self.minimizer_tol, self.minimizer_step, self.t_cap];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("tolerances, c and the T cap must be positive".into()));
        }
        if self.k_init < 3 || self.k_init % 2 == 0 {
            return Err(Error::InvalidArgument(format!("k_init must be odd and >= 3, got {}", self.k_init)));
        }
        if self.k_max < self.k_init {
            return Err(Error::InvalidArgument("k_max must be at least k_init".into()));
        }
        if self.restarts == 0 || self.max_iter == 0 {
            return Err(Error::InvalidArgument("restarts and max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sub-stream `counter` of `master`.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    splitmix64(master ^ splitmix64(counter))
}

/// Seed used for the find_schedule probe at annealing time `t`; depends on
/// `t` only, so runs that differ in `c` probe any shared `T` identically.
pub fn probe_seed(master: u64, t: f64) -> u64 {
    derive_seed(master, t.to_bits())
}

/// Derivative-free local minimization (COBYLA) of `objective` from `x0`.
///
/// Returns the best point seen, which is never worse than `x0`. The first
/// objective error aborts the search and is returned.
pub fn minimize_free<F>(objective: F, x0: &[f64], max_iter: usize, tol: f64, step: f64) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if x0.is_empty() {
        return Err(Error::InvalidArgument("empty parameter vector".into()));
    }
    let objective = RefCell::new(objective);
    let f0 = (objective.borrow_mut())(x0)?;
    if !f0.is_finite() {
        return Err(Error::InvalidArgument(format!("objective returned {f0} at the start point")));
    }
    let best = RefCell::new((x0.to_vec(), f0));
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let remaining = Cell::new(max_iter.saturating_sub(1));
    if remaining.get() > 0 {
        let func = |x: &[f64], _: &mut ()| -> f64 {
            // COBYLA cannot digest infinities; after a failure it sees a flat
            // function and winds down.
            if failure.borrow().is_some() {
                return f0;
            }
            let result = (objective.borrow_mut())(x);
            match result {
                Ok(f) if f.is_finite() => {
                    let mut b = best.borrow_mut();
                    if f < b.1 {
                        *b = (x.to_vec(), f);
                    }
                    f
                }
                Ok(f) => {
                    *failure.borrow_mut() = Some(Error::InvalidArgument(format!("objective returned {f}")));
                    f0
                }
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    f0
                }
            }
        };
        let bounds = vec![(-f64::INFINITY, f64::INFINITY); x0.len()];
        let cons: Vec<&dyn cobyla::Func<()>> = Vec::new();
        let stop = cobyla::StopTols {
            xtol_abs: vec![tol; x0.len()],
            ..cobyla::StopTols::default()
        };
        // The outcome is tracked through `best`; the status carries nothing more.
        let _ = cobyla::minimize(func, x0, &bounds, &cons, (), remaining.get(), cobyla::RhoBeg::All(step), Some(stop));
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(best.into_inner())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Success,
    Stagnated,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub k: usize,
    pub energy: f64,
}

/// Outcome of one schedule search at fixed `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: RingModel,
    pub schedule: Schedule,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub c: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E_final")]
    pub e_final: f64,
    pub success: bool,
    pub status: RunStatus,
    pub k_final: usize,
    pub refinement_history: Vec<RefinementStep>,
    pub seed: u64,
    pub backend: BackendKind,
    pub evaluations: u64,
    pub wall_time: f64,
}

/// Energy that stands in for evaluations whose dt loop does not converge:
/// the largest eigenvalue of `H_p`.
fn penalty_energy(model: &RingModel) -> f64 {
    model.couplings().iter().map(|c| c.abs()).sum()
}

struct Objective<'a> {
    eval: &'a dyn EnergyEvaluator,
    count: Cell<u64>,
}

impl Objective<'_> {
    fn energy(&self, schedule: &Schedule) -> Result<f64> {
        self.count.set(self.count.get() + 1);
        match self.eval.energy(schedule) {
            Err(Error::NotConverged { .. }) => Ok(penalty_energy(self.eval.model())),
            other => other,
        }
    }

    fn optimize(&self, start: &Schedule, cfg: &OptimizerConfig) -> Result<(Schedule, f64)> {
        let (x, f) = minimize_free(
            |a| self.energy(&start.with_values(a)?),
            &start.values(),
            cfg.max_iter,
            cfg.minimizer_tol,
            cfg.minimizer_step,
        )?;
        Ok((start.with_values(&x)?, f))
    }
}

/// Random starts at `k_init`, then refinement until the energy threshold is
/// met, the energy stagnates, or `k_max` would be exceeded.
pub fn find_schedule(eval: &dyn EnergyEvaluator, total_time: f64, cfg: &OptimizerConfig) -> Result<RunRecord> {
    cfg.validate()?;
    if !(total_time > 0.0) || !total_time.is_finite() {
        return Err(Error::InvalidArgument(format!("T must be positive, got {total_time}")));
    }
    let clock = Instant::now();
    let model = eval.model();
    let e0 = model.exact_spectrum().e0;
    let threshold = model.energy_threshold(cfg.c)?;

    let starts: Vec<Result<(Schedule, f64, u64)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, r as u64));
            let init = Schedule::init_random(total_time, cfg.k_init, &mut rng)?;
            let obj = Objective {
                eval,
                count: Cell::new(0),
            };
            let (s, e) = obj.optimize(&init, cfg)?;
            Ok((s, e, obj.count.get()))
        })
        .collect();
    let mut evaluations = 0;
    let mut best: Option<(Schedule, f64)> = None;
    for res in starts {
        let (s, e, n) = res?;
        evaluations += n;
        if best.as_ref().is_none_or(|(_, b)| e < *b) {
            best = Some((s, e));
        }
    }
    let (mut schedule, mut energy) = best.expect("at least one restart");
    let mut k = cfg.k_init;
    let mut history = vec![RefinementStep { k, energy }];
    let mut previous: Option<f64> = None;
    let obj = Objective {
        eval,
        count: Cell::new(0),
    };
    let status = loop {
        if energy - e0 <= threshold {
            break RunStatus::Success;
        }
        if previous.is_some_and(|p| (energy - p).abs() < cfg.de_tol) {
            break RunStatus::Stagnated;
        }
        let next = 2 * k + 1;
        if next > cfg.k_max {
            break RunStatus::BudgetExhausted;
        }
        previous = Some(energy);
        let refined = schedule.refine();
        (schedule, energy) = obj.optimize(&refined, cfg)?;
        k = next;
        history.push(RefinementStep { k, energy });
    };
    evaluations += obj.count.get();
    Ok(RunRecord {
        model: model.clone(),
        schedule,
        total_time,
        c: cfg.c,
        e0,
        e_final: energy,
        success: status == RunStatus::Success,
        status,
        k_final: k,
        refinement_history: history,
        seed: cfg.seed,
        backend: eval.backend(),
        evaluations,
        wall_time: clock.elapsed().as_secs_f64(),
    })
}

/// One probe of the outer search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    #[serde(rename = "T")]
    pub total_time: f64,
    pub success: bool,
    /// Bracket after the probe.
    pub t_low: f64,
    pub t_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSearch {
    #[serde(rename = "T_min")]
    pub t_min: f64,
    pub probes: Vec<Probe>,
    pub records: Vec<RunRecord>,
}

impl TimeSearch {
    /// The successful record at `T_min`.
    pub fn best_record(&self) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.success && r.total_time == self.t_min)
    }

    pub fn evaluations(&self) -> u64 {
        self.records.iter().map(|r| r.evaluations).sum()
    }
}

fn bracket_width(high: f64, low: f64) -> f64 {
    (high - low) / (high + low)
}

/// Doubling from `t_init` until a success, then bisection on `[T_low, T_high]`
/// until `(T_high - T_low) / (T_high + T_low) <= dt_tol`. Returns `T_high`.
pub fn minimize_annealing_time(eval: &dyn EnergyEvaluator, t_init: f64, cfg: &OptimizerConfig) -> Result<TimeSearch> {
    cfg.validate()?;
    if !(t_init > 0.0) || !t_init.is_finite() {
        return Err(Error::InvalidArgument(format!("T_init must be positive, got {t_init}")));
    }
    let mut records = Vec::new();
    let mut probes = Vec::new();
    let mut run = |t: f64, low: f64, high: Option<f64>, records: &mut Vec<RunRecord>| -> Result<bool> {
        let probe_cfg = OptimizerConfig {
            seed: probe_seed(cfg.seed, t),
            ..*cfg
        };
        let rec = find_schedule(eval, t, &probe_cfg)?;
        let ok = rec.success;
        records.push(rec);
        let (low, high) = if ok { (low, Some(t)) } else { (t, high) };
        probes.push(Probe {
            total_time: t,
            success: ok,
            t_low: low,
            t_high: high,
        });
        Ok(ok)
    };
    let mut t = t_init;
    let mut low = 0.0;
    while !run(t, low, None, &mut records)? {
        low = t;
        t *= 2.0;
        if t > cfg.t_cap {
            return Err(Error::TimeCapExceeded { cap: cfg.t_cap });
        }
    }
    // Bisection nominally starts from T_low = 0. Its first midpoint would be
    // the last failed doubling probe, whose outcome is already known since
    // probes are deterministic in T, so that step is taken directly.
    let mut high = t;
    while bracket_width(high, low) > cfg.dt_tol {
        let mid = 0.5 * (high + low);
        if run(mid, low, Some(high), &mut records)? {
            high = mid;
        } else {
            low = mid;
        }
    }
    Ok(TimeSearch {
        t_min: high,
        probes,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "T")]
pub enum BaselineOutcome {
    Finite(f64),
    ExceedsCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSearch {
    pub outcome: BaselineOutcome,
    /// Every `(T, E(T))` evaluated, in order.
    pub probes: Vec<(f64, f64)>,
}

/// Smallest `T` (to relative width `dt_tol`) at which the linear schedule
/// meets the energy threshold, or [`BaselineOutcome::ExceedsCap`] if it fails
/// even at `cap`. Doubling starts at `t_init`.
pub fn linear_baseline_time(eval: &dyn EnergyEvaluator, c: f64, t_init: f64, cap: f64, dt_tol: f64) -> Result<BaselineSearch> {
    if !(t_init > 0.0 && cap > 0.0 && dt_tol > 0.0) {
        return Err(Error::InvalidArgument("T_init, cap and dT must be positive".into()));
    }
    let model = eval.model();
    let e0 = model.exact_spectrum().e0;
    let threshold = model.energy_threshold(c)?;
    let mut probes = Vec::new();
    let mut succeeds = |t: f64| -> Result<bool> {
        let e = eval.energy(&Schedule::linear(t)?)?;
        probes.push((t, e));
        Ok(e - e0 <= threshold)
    };
    let mut t = t_init.min(cap);
    let mut low = 0.0;
    loop {
        if succeeds(t)? {
            break;
        }
        if t >= cap {
            return Ok(BaselineSearch {
                outcome: BaselineOutcome::ExceedsCap,
                probes,
            });
        }
        low = t;
        t = (2.0 * t).min(cap);
    }
    let mut high = t;
    while bracket_width(high, low) > dt_tol {
        let mid = 0.5 * (high + low);
        if succeeds(mid)? {
            high = mid;
        } else {
            low = mid;
        }
    }
    Ok(BaselineSearch {
        outcome: BaselineOutcome::Finite(high),
        probes,
    })
}
