//! Multi-size experiment campaigns: specification, seeding, result tables,
//! summaries and the quadratic fit of median annealing times.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dla::{self, DlaSimulator};
use crate::error::{Error, Result};
use crate::optimizer::{
    derive_seed, minimize_annealing_time, BackendKind, DlaEvaluator, EnergyEvaluator, OptimizerConfig,
    StatevectorEvaluator,
};
use crate::ring_model::{RingModel, DEFAULT_J, DEFAULT_J_L, DEFAULT_J_R};
use crate::statevector::TrotterParams;

pub const TOOL_VERSION: &str = concat!("ringanneal ", env!("CARGO_PKG_VERSION"));

/// `k_init` used by repetition `r` is `K_INIT_CYCLE[r % 4]`.
pub const K_INIT_CYCLE: [usize; 4] = [3, 5, 7, 9];

/// Default largest `N` routed to the state-vector backend.
pub const DEFAULT_STATEVECTOR_LIMIT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Auto,
    Statevector,
    Dla,
}

impl BackendChoice {
    /// Backend used for a ring of `n` spins.
    pub fn resolve(self, n: usize, statevector_limit: usize) -> BackendKind {
        match self {
            BackendChoice::Auto if n <= statevector_limit => BackendKind::Statevector,
            BackendChoice::Auto | BackendChoice::Dla => BackendKind::Dla,
            BackendChoice::Statevector => BackendKind::Statevector,
        }
    }
}

fn default_limit() -> usize {
    DEFAULT_STATEVECTOR_LIMIT
}
fn default_j_r() -> f64 {
    DEFAULT_J_R
}
fn default_j_l() -> f64 {
    DEFAULT_J_L
}
fn default_j() -> f64 {
    DEFAULT_J
}
fn default_restarts() -> usize {
    OptimizerConfig::default().restarts
}
fn default_max_iter() -> usize {
    OptimizerConfig::default().max_iter
}
fn default_k_max() -> usize {
    OptimizerConfig::default().k_max
}
fn default_dt_tol() -> f64 {
    OptimizerConfig::default().dt_tol
}
fn default_output() -> PathBuf {
    PathBuf::from("campaign-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSpec {
    #[serde(rename = "N")]
    pub n_values: Vec<usize>,
    #[serde(rename = "c")]
    pub c_values: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default = "default_limit")]
    pub statevector_limit: usize,
    /// Not part of the manifest: it never affects a row.
    #[serde(default = "default_output", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(rename = "J_R", default = "default_j_r")]
    pub j_r: f64,
    #[serde(rename = "J_L", default = "default_j_l")]
    pub j_l: f64,
    #[serde(rename = "J", default = "default_j")]
    pub j: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(rename = "dT", default = "default_dt_tol")]
    pub dt_tol: f64,
    /// Fixed `k_init` for every repetition; cycles through 3, 5, 7, 9 when absent.
    #[serde(default)]
    pub k_init: Option<usize>,
    /// Directory for cached Lie bases.
    #[serde(default)]
    pub dla_cache: Option<PathBuf>,
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::InvalidArgument("campaign needs at least one N".into()));
        }
        if self.c_values.is_empty() {
            return Err(Error::InvalidArgument("campaign needs at least one c".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
        }
        for &n in &self.n_values {
            RingModel::new(n, self.j_r, self.j_l, self.j)?;
        }
        for &c in &self.c_values {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
            }
        }
        self.optimizer_config(self.c_values[0], 0, 0).validate()
    }

    /// Seed of repetition `rep` at size `n`; independent of `c`.
    pub fn repetition_seed(&self, n: usize, rep: usize) -> u64 {
        derive_seed(derive_seed(self.seed, n as u64), rep as u64)
    }

    pub fn k_init_for(&self, rep: usize) -> usize {
        self.k_init.unwrap_or(K_INIT_CYCLE[rep % K_INIT_CYCLE.len()])
    }

    pub fn optimizer_config(&self, c: f64, seed: u64, rep: usize) -> OptimizerConfig {
        OptimizerConfig {
            c,
            seed,
            k_init: self.k_init_for(rep),
            restarts: self.restarts,
            max_iter: self.max_iter,
            k_max: self.k_max,
            dt_tol: self.dt_tol,
            ..OptimizerConfig::default()
        }
    }
}

/// `T_min` or the marker for a search that hit the time cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeResult {
    Found(f64),
    ExceedsCap,
}

impl std::fmt::Display for TimeResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeResult::Found(t) => write!(f, "{t}"),
            TimeResult::ExceedsCap => f.write_str("exceeds-cap"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub c: f64,
    pub repetition: usize,
    pub seed: u64,
    pub k_init: usize,
    #[serde(rename = "T_min")]
    pub t_min: TimeResult,
    #[serde(rename = "E_final")]
    pub e_final: Option<f64>,
    pub k_final: Option<usize>,
    pub backend: BackendKind,
    pub evaluations: u64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub c: f64,
    pub runs: usize,
    pub found: usize,
    pub min: Option<f64>,
    pub median: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub alpha: f64,
    pub beta: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub c: f64,
    pub points: usize,
    /// `median ~ alpha N^2`.
    pub pure: Option<QuadraticFit>,
    /// `median ~ alpha N^2 + beta`.
    pub affine: Option<QuadraticFit>,
}

fn r_squared(points: &[(f64, f64)], predict: impl Fn(f64) -> f64) -> f64 {
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - predict(p.0)).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 { 1.0 } else { 0.0 }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Least-squares fits of `(N, T)` pairs against `N^2`.
pub fn fit_quadratic(points: &[(usize, f64)]) -> (Option<QuadraticFit>, Option<QuadraticFit>) {
    let p: Vec<(f64, f64)> = points.iter().map(|&(n, t)| ((n * n) as f64, t)).collect();
    if p.is_empty() {
        return (None, None);
    }
    let sxx: f64 = p.iter().map(|q| q.0 * q.0).sum();
    let sxy: f64 = p.iter().map(|q| q.0 * q.1).sum();
    let alpha = sxy / sxx;
    let pure = QuadraticFit {
        alpha,
        beta: 0.0,
        r_squared: r_squared(&p, |x| alpha * x),
    };
    if p.len() < 2 {
        return (Some(pure), None);
    }
    let m = p.len() as f64;
    let (mx, my) = (p.iter().map(|q| q.0).sum::<f64>() / m, p.iter().map(|q| q.1).sum::<f64>() / m);
    let cxx: f64 = p.iter().map(|q| (q.0 - mx).powi(2)).sum();
    let cxy: f64 = p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let a = cxy / cxx;
    let b = my - a * mx;
    let affine = QuadraticFit {
        alpha: a,
        beta: b,
        r_squared: r_squared(&p, |x| a * x + b),
    };
    (Some(pure), Some(affine))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs two or more positive points".into()));
    }
    let l: Vec<(f64, f64)> = points.iter().map(|p| (p.0.ln(), p.1.ln())).collect();
    let m = l.len() as f64;
    let (mx, my) = (l.iter().map(|q| q.0).sum::<f64>() / m, l.iter().map(|q| q.1).sum::<f64>() / m);
    let cxx: f64 = l.iter().map(|q| (q.0 - mx).powi(2)).sum();
    let cxy: f64 = l.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    Ok(cxy / cxx)
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

pub fn summarize(rows: &[CampaignRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, u64), (f64, usize, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((r.n, r.c.to_bits())).or_insert((r.c, 0, Vec::new()));
        g.1 += 1;
        if let TimeResult::Found(t) = r.t_min {
            g.2.push(t);
        }
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((n, _), (c, runs, mut ts))| {
            ts.sort_by(f64::total_cmp);
            SummaryRow {
                n,
                c,
                runs,
                found: ts.len(),
                min: ts.first().copied(),
                median: median(&ts),
            }
        })
        .collect();
    out.sort_by(|a, b| a.n.cmp(&b.n).then(a.c.total_cmp(&b.c)));
    out
}

pub fn fit_reports(summary: &[SummaryRow]) -> Vec<FitReport> {
    let mut cs: Vec<f64> = summary.iter().map(|s| s.c).collect();
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    cs.into_iter()
        .map(|c| {
            let pts: Vec<(usize, f64)> = summary
                .iter()
                .filter(|s| s.c == c)
                .filter_map(|s| s.median.map(|m| (s.n, m)))
                .collect();
            let (pure, affine) = fit_quadratic(&pts);
            FitReport {
                c,
                points: pts.len(),
                pure,
                affine,
            }
        })
        .collect()
}

/// `#`-prefixed provenance lines shared by every output file.
pub fn manifest(command: &str, config_json: &str, seed: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# tool: {TOOL_VERSION}");
    let _ = writeln!(s, "# command: {command}");
    let _ = writeln!(s, "# config: {config_json}");
    let _ = writeln!(s, "# master_seed: {seed}");
    let _ = writeln!(s, "# backend: per row");
    s
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const RESULTS_HEADER: &str = "N,c,repetition,seed,k_init,T_min,E_final,k_final,backend,evaluations";

pub fn results_csv(manifest: &str, rows: &[CampaignRow]) -> String {
    let mut s = String::from(manifest);
    s.push_str(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.c,
            r.repetition,
            r.seed,
            r.k_init,
            r.t_min,
            opt(r.e_final),
            opt(r.k_final),
            r.backend,
            r.evaluations
        );
    }
    s
}

pub fn timings_csv(manifest: &str, rows: &[CampaignRow]) -> String {
    let mut s = String::from(manifest);
    s.push_str("N,c,repetition,wall_time\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.n, r.c, r.repetition, r.wall_time);
    }
    s
}

pub fn summary_csv(manifest: &str, summary: &[SummaryRow]) -> String {
    let mut s = String::from(manifest);
    s.push_str("N,c,runs,found,min_T_min,median_T_min\n");
    for r in summary {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.n, r.c, r.runs, r.found, opt(r.min), opt(r.median));
    }
    s
}

pub fn fit_csv(manifest: &str, fits: &[FitReport]) -> String {
    let mut s = String::from(manifest);
    s.push_str("c,points,form,alpha,beta,r_squared\n");
    for f in fits {
        for (form, fit) in [("alpha*N^2", f.pure), ("alpha*N^2+beta", f.affine)] {
            match fit {
                Some(q) => {
                    let _ = writeln!(s, "{},{},{},{},{},{}", f.c, f.points, form, q.alpha, q.beta, q.r_squared);
                }
                None => {
                    let _ = writeln!(s, "{},{},{},,,", f.c, f.points, form);
                }
            }
        }
    }
    s
}

/// Build the evaluator for one size.
pub fn build_evaluator(
    model: &RingModel,
    backend: BackendKind,
    params: TrotterParams,
    dla_cache: Option<&Path>,
) -> Result<Box<dyn EnergyEvaluator>> {
    match backend {
        BackendKind::Statevector => Ok(Box::new(StatevectorEvaluator::new(model, params)?)),
        BackendKind::Dla => {
            let basis = match dla_cache {
                Some(dir) => dla::load_or_build(dir, model)?,
                None => dla::lie_closure(model)?,
            };
            let sim = Arc::new(DlaSimulator::new(Arc::new(basis))?);
            Ok(Box::new(DlaEvaluator::new(model, sim, params)?))
        }
        BackendKind::StepFunction => Err(Error::InvalidArgument("campaigns need a physical backend".into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutput {
    pub rows: Vec<CampaignRow>,
    pub summary: Vec<SummaryRow>,
    pub fits: Vec<FitReport>,
}

/// Run every `(N, c, repetition)` task; rows come back sorted by that key.
pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignOutput> {
    spec.validate()?;
    let mut ns = spec.n_values.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut cs = spec.c_values.clone();
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    let evaluators: Vec<(usize, Box<dyn EnergyEvaluator>)> = ns
        .iter()
        .map(|&n| {
            let model = RingModel::new(n, spec.j_r, spec.j_l, spec.j)?;
            let backend = spec.backend.resolve(n, spec.statevector_limit);
            Ok((n, build_evaluator(&model, backend, TrotterParams::default(), spec.dla_cache.as_deref())?))
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, f64, usize)> = ns
        .iter()
        .flat_map(|&n| cs.iter().flat_map(move |&c| (0..spec.repetitions).map(move |r| (n, c, r))))
        .collect();
    let rows: Vec<Result<CampaignRow>> = tasks
        .par_iter()
        .map(|&(n, c, rep)| {
            let eval = &evaluators.iter().find(|(m, _)| *m == n).expect("evaluator per N").1;
            let seed = spec.repetition_seed(n, rep);
            let cfg = spec.optimizer_config(c, seed, rep);
            let clock = std::time::Instant::now();
            let base = CampaignRow {
                n,
                c,
                repetition: rep,
                seed,
                k_init: cfg.k_init,
                t_min: TimeResult::ExceedsCap,
                e_final: None,
                k_final: None,
                backend: eval.backend(),
                evaluations: 0,
                wall_time: 0.0,
            };
            match minimize_annealing_time(eval.as_ref(), n as f64, &cfg) {
                Ok(search) => {
                    let best = search.best_record().expect("T_min is witnessed by a successful record");
                    Ok(CampaignRow {
                        t_min: TimeResult::Found(search.t_min),
                        e_final: Some(best.e_final),
                        k_final: Some(best.k_final),
                        evaluations: search.evaluations(),
                        wall_time: clock.elapsed().as_secs_f64(),
                        ..base
                    })
                }
                Err(Error::TimeCapExceeded { .. }) => Ok(CampaignRow {
                    wall_time: clock.elapsed().as_secs_f64(),
                    ..base
                }),
                Err(e) => Err(e),
            }
        })
        .collect();
    let rows: Vec<CampaignRow> = rows.into_iter().collect::<Result<_>>()?;
    let summary = summarize(&rows);
    let fits = fit_reports(&summary);
    Ok(CampaignOutput { rows, summary, fits })
}

/// Write `results.csv`, `summary.csv`, `fit.csv` and `timings.csv` under
/// `dir`. Only `timings.csv` varies between identical reruns.
pub fn write_campaign(dir: &Path, spec: &CampaignSpec, out: &CampaignOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let m = manifest("campaign", &serde_json::to_string(spec)?, spec.seed);
    fs::write(dir.join("results.csv"), results_csv(&m, &out.rows))?;
    fs::write(dir.join("summary.csv"), summary_csv(&m, &out.summary))?;
    fs::write(dir.join("fit.csv"), fit_csv(&m, &out.fits))?;
    fs::write(dir.join("timings.csv"), timings_csv(&m, &out.rows))?;
    Ok(())
}
