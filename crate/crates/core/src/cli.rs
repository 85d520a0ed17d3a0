//! Command-line front end.

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::campaign::{self, BackendChoice, CampaignSpec, DEFAULT_STATEVECTOR_LIMIT};
use crate::dla;
use crate::error::{Error, Result};
use crate::optimizer::{
    find_schedule, linear_baseline_time, minimize_annealing_time, BaselineOutcome, EnergyEvaluator,
    OptimizerConfig, RunRecord, StepFunctionEvaluator,
};
use crate::ring_model::{ring_couplings, RingModel, DEFAULT_J, DEFAULT_J_L, DEFAULT_J_R};
use crate::schedule::Schedule;
use crate::spectrum::{population_trace, DEFAULT_MAX_SPECTRUM_N};
use crate::statevector::TrotterParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_NOT_REACHED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "ringanneal", version, about = "Annealing schedule search for the frustrated Ising ring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search one schedule at fixed T; prints the run record as JSON.
    Optimize(OptimizeArgs),
    /// Search the smallest T reaching the threshold.
    MinimizeTime(MinimizeArgs),
    /// Smallest T at which the linear schedule reaches the threshold.
    Baseline(BaselineArgs),
    /// Ground and first-excited populations along a schedule, as CSV.
    Trace(TraceArgs),
    /// Run a campaign described by a JSON file.
    Campaign(CampaignArgs),
    /// Print the Lie closure dimension per N.
    DlaDim(DlaDimArgs),
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long = "N")]
    n: usize,
    #[arg(long = "J-R", default_value_t = DEFAULT_J_R)]
    j_r: f64,
    #[arg(long = "J-L", default_value_t = DEFAULT_J_L)]
    j_l: f64,
    #[arg(long = "J", default_value_t = DEFAULT_J)]
    j: f64,
}

impl ModelArgs {
    fn model(&self) -> Result<RingModel> {
        RingModel::new(self.n, self.j_r, self.j_l, self.j)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum BackendArg {
    Auto,
    Statevector,
    Dla,
}

impl From<BackendArg> for BackendChoice {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Auto => BackendChoice::Auto,
            BackendArg::Statevector => BackendChoice::Statevector,
            BackendArg::Dla => BackendChoice::Dla,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    #[arg(long = "c", default_value_t = 0.5)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    backend: BackendArg,
    #[arg(long, default_value_t = DEFAULT_STATEVECTOR_LIMIT)]
    statevector_limit: usize,
    #[arg(long, default_value_t = 3)]
    k_init: usize,
    #[arg(long, default_value_t = crate::optimizer::DEFAULT_K_MAX)]
    k_max: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 800)]
    max_iter: usize,
    /// Directory for cached Lie bases.
    #[arg(long)]
    dla_cache: Option<PathBuf>,
}

impl SearchArgs {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            c: self.c,
            seed: self.seed,
            k_init: self.k_init,
            k_max: self.k_max,
            restarts: self.restarts,
            max_iter: self.max_iter,
            ..OptimizerConfig::default()
        }
    }

    fn evaluator(&self, model: &RingModel) -> Result<Box<dyn EnergyEvaluator>> {
        let backend = BackendChoice::from(self.backend).resolve(model.n(), self.statevector_limit);
        campaign::build_evaluator(model, backend, TrotterParams::default(), self.dla_cache.as_deref())
    }
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "T")]
    total_time: f64,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MinimizeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// First probe of the doubling search; defaults to N.
    #[arg(long = "T-init")]
    t_init: Option<f64>,
    #[arg(long = "dT", default_value_t = 0.1)]
    dt_tol: f64,
    #[arg(long, default_value_t = crate::optimizer::DEFAULT_T_CAP)]
    cap: f64,
    /// CSV file that receives one result row.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON file for the probe trace and every run record.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Replace the simulator by a stub that succeeds exactly for T >= value.
    #[arg(long)]
    simulate_step_function: Option<f64>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "c", default_value_t = 0.5)]
    c: f64,
    #[arg(long, default_value_t = 1e6)]
    cap: f64,
    #[arg(long = "dT", default_value_t = 0.1)]
    dt_tol: f64,
    #[arg(long = "T-init")]
    t_init: Option<f64>,
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    backend: BackendArg,
    #[arg(long)]
    dla_cache: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// Schedule JSON or a run record from `optimize`.
    #[arg(long)]
    schedule: PathBuf,
    /// Model flags; required when the file holds a bare schedule.
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "J-R", default_value_t = DEFAULT_J_R)]
    j_r: f64,
    #[arg(long = "J-L", default_value_t = DEFAULT_J_L)]
    j_l: f64,
    #[arg(long = "J", default_value_t = DEFAULT_J)]
    j: f64,
    /// Number of evenly spaced sample times.
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Trace the linear schedule with the loaded schedule's T instead.
    #[arg(long)]
    linear: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CampaignArgs {
    spec: PathBuf,
    /// Overrides the campaign file's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DlaDimArgs {
    #[arg(long = "N", num_args = 1.., required = true)]
    n: Vec<usize>,
    #[arg(long = "J-R", default_value_t = DEFAULT_J_R)]
    j_r: f64,
    #[arg(long = "J-L", default_value_t = DEFAULT_J_L)]
    j_l: f64,
    #[arg(long = "J", default_value_t = DEFAULT_J)]
    j: f64,
}

fn emit(output: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn command_line(args: &[OsString]) -> String {
    args.iter().map(|a| a.to_string_lossy()).collect::<Vec<_>>().join(" ")
}

fn optimize(a: &OptimizeArgs, out: &mut dyn Write) -> Result<i32> {
    let model = a.model.model()?;
    let eval = a.search.evaluator(&model)?;
    let rec = find_schedule(eval.as_ref(), a.total_time, &a.search.config())?;
    let mut text = serde_json::to_string_pretty(&rec)?;
    text.push('\n');
    emit(a.output.as_deref(), &text, out)?;
    Ok(if rec.success { EXIT_OK } else { EXIT_NOT_REACHED })
}

const MINIMIZE_HEADER: &str =
    "N,J_R,J_L,J,c,seed,k_init,k_max,restarts,max_iter,dT,T_init,cap,T_min,E_final,k_final,backend,evaluations";

fn minimize_time(a: &MinimizeArgs, argv: &[OsString], out: &mut dyn Write) -> Result<i32> {
    let model = a.model.model()?;
    let eval: Box<dyn EnergyEvaluator> = match a.simulate_step_function {
        Some(threshold) => Box::new(StepFunctionEvaluator::new(&model, threshold)),
        None => a.search.evaluator(&model)?,
    };
    let cfg = OptimizerConfig {
        dt_tol: a.dt_tol,
        t_cap: a.cap,
        ..a.search.config()
    };
    let t_init = a.t_init.unwrap_or(model.n() as f64);
    let (search, code) = match minimize_annealing_time(eval.as_ref(), t_init, &cfg) {
        Ok(s) => (Some(s), EXIT_OK),
        Err(Error::TimeCapExceeded { .. }) => (None, EXIT_NOT_REACHED),
        Err(e) => return Err(e),
    };
    let best = search.as_ref().and_then(|s| s.best_record());
    let t_min = search.as_ref().map(|s| s.t_min.to_string()).unwrap_or_else(|| "exceeds-cap".into());
    let row = format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        model.n(),
        model.j_r(),
        model.j_l(),
        model.j(),
        cfg.c,
        cfg.seed,
        cfg.k_init,
        cfg.k_max,
        cfg.restarts,
        cfg.max_iter,
        cfg.dt_tol,
        t_init,
        cfg.t_cap,
        t_min,
        best.map(|r| r.e_final.to_string()).unwrap_or_default(),
        best.map(|r| r.k_final.to_string()).unwrap_or_default(),
        eval.backend(),
        search.as_ref().map(|s| s.evaluations()).unwrap_or(0),
    );
    if let Some(path) = &a.csv {
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            let cfg_json = serde_json::to_string(&cfg)?;
            let m = campaign::manifest(&command_line(argv), &cfg_json, cfg.seed);
            f.write_all(m.as_bytes())?;
            writeln!(f, "{MINIMIZE_HEADER}")?;
        }
        f.write_all(row.as_bytes())?;
    }
    if let (Some(path), Some(s)) = (&a.records, &search) {
        fs::write(path, serde_json::to_string_pretty(s)?)?;
    }
    writeln!(out, "T_min = {t_min}")?;
    Ok(code)
}

fn baseline(a: &BaselineArgs, out: &mut dyn Write) -> Result<i32> {
    let model = a.model.model()?;
    let backend = BackendChoice::from(a.backend).resolve(model.n(), DEFAULT_STATEVECTOR_LIMIT);
    let eval = campaign::build_evaluator(&model, backend, TrotterParams::default(), a.dla_cache.as_deref())?;
    let t_init = a.t_init.unwrap_or(model.n() as f64);
    let res = linear_baseline_time(eval.as_ref(), a.c, t_init, a.cap, a.dt_tol)?;
    match res.outcome {
        BaselineOutcome::Finite(t) => {
            writeln!(out, "{t}")?;
            Ok(EXIT_OK)
        }
        BaselineOutcome::ExceedsCap => {
            writeln!(out, "exceeds cap")?;
            Ok(EXIT_NOT_REACHED)
        }
    }
}

fn load_schedule(path: &Path) -> Result<(Schedule, Option<RingModel>)> {
    let text = fs::read_to_string(path)?;
    if let Ok(rec) = serde_json::from_str::<RunRecord>(&text) {
        return Ok((rec.schedule, Some(rec.model)));
    }
    Ok((serde_json::from_str::<Schedule>(&text)?, None))
}

fn trace(a: &TraceArgs, argv: &[OsString], out: &mut dyn Write) -> Result<i32> {
    let (loaded, stored) = load_schedule(&a.schedule)?;
    let model = match (a.n, stored) {
        (Some(n), _) => RingModel::new(n, a.j_r, a.j_l, a.j)?,
        (None, Some(m)) => m,
        (None, None) => return Err(Error::InvalidArgument("bare schedule files need --N".into())),
    };
    if model.n() > DEFAULT_MAX_SPECTRUM_N {
        return Err(Error::UnsupportedSize(model.n(), 5, DEFAULT_MAX_SPECTRUM_N));
    }
    let schedule = if a.linear { Schedule::linear(loaded.total_time())? } else { loaded };
    let a_star = model.exact_spectrum().a_star;
    let tr = population_trace(&model, &schedule, a.dt, a.grid)?;
    let mut text = campaign::manifest(&command_line(argv), &serde_json::to_string(&model)?, 0);
    text.push_str(&format!("# schedule: {}\n", serde_json::to_string(&schedule)?));
    text.push_str(&format!("# A_star: {a_star}\n"));
    text.push_str(&format!("# crossings_at_A_star: {}\n", schedule.crossing_count(a_star)));
    text.push_str(&format!("# P0_P1_inversions: {}\n", tr.inversions()));
    let mut body = Vec::new();
    tr.write_csv(&mut body)?;
    text.push_str(&String::from_utf8_lossy(&body));
    emit(a.output.as_deref(), &text, out)?;
    Ok(EXIT_OK)
}

fn run_campaign(a: &CampaignArgs, out: &mut dyn Write) -> Result<i32> {
    let text = fs::read_to_string(&a.spec)?;
    let mut spec: CampaignSpec =
        serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("campaign spec: {e}")))?;
    if let Some(dir) = &a.output_dir {
        spec.output_dir = dir.clone();
    }
    let res = campaign::run_campaign(&spec)?;
    campaign::write_campaign(&spec.output_dir, &spec, &res)?;
    for s in &res.summary {
        writeln!(
            out,
            "N={} c={} found={}/{} min={} median={}",
            s.n,
            s.c,
            s.found,
            s.runs,
            s.min.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            s.median.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
        )?;
    }
    for f in &res.fits {
        if let Some(p) = f.pure {
            writeln!(out, "c={} median ~ {} N^2 (R^2 {})", f.c, p.alpha, p.r_squared)?;
        }
    }
    let all_found = res.rows.iter().all(|r| matches!(r.t_min, campaign::TimeResult::Found(_)));
    Ok(if all_found { EXIT_OK } else { EXIT_NOT_REACHED })
}

fn dla_dim(a: &DlaDimArgs, out: &mut dyn Write) -> Result<i32> {
    writeln!(out, "N,dimension")?;
    for &n in &a.n {
        if n < 3 || n % 2 == 0 {
            return Err(Error::InvalidArgument(format!("N must be odd and >= 3, got {n}")));
        }
        let basis = dla::lie_closure_with(&ring_couplings(n, a.j_r, a.j_l, a.j), dla::default_cap(n))?;
        writeln!(out, "{n},{}", basis.dimension())?;
    }
    Ok(EXIT_OK)
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidArgument(_)
            | Error::InvalidModel(_)
            | Error::InvalidSchedule(_)
            | Error::UnsupportedSize(..)
            | Error::InvalidSite(..)
            | Error::Json(_)
    )
}

/// Parse `argv` (program name first), run the command and return the exit code.
pub fn run(argv: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return code;
        }
    };
    let res = match &cli.command {
        Command::Optimize(a) => optimize(a, out),
        Command::MinimizeTime(a) => minimize_time(a, &argv, out),
        Command::Baseline(a) => baseline(a, out),
        Command::Trace(a) => trace(a, &argv, out),
        Command::Campaign(a) => run_campaign(a, out),
        Command::DlaDim(a) => dla_dim(a, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if is_usage(&e) { EXIT_USAGE } else { EXIT_INTERNAL }
        }
    }
}
