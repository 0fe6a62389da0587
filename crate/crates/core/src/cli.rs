//! Command-line entry point: config resolution, subcommand dispatch and output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, ConfigError, Format, RegimeName, RunConfig, ThresholdConfig};
use crate::lundberg;
use crate::output::{csv_preamble, format_real, VERSION};
use crate::pide;
use crate::regimes::{self, LargeLambdaCase, RegimeError, RegimeReport};
use crate::simulate::{self, Horizon, SimConfig, SimError};
use crate::closed_form::ExponentialSolution;

pub const THREADS_ENV: &str = "DUALRISK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dualrisk", version, about = "Optimal dividends in the dual risk model")]
pub struct Cli {
    /// JSON run configuration; the canonical model when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ValueMethod {
    ClosedForm,
    Pide,
}

impl ValueMethod {
    fn as_str(&self) -> &'static str {
        match self {
            ValueMethod::ClosedForm => "closed-form",
            ValueMethod::Pide => "pide",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exponents of the uncontrolled surplus and the mean ruin time.
    Roots {
        /// Also solve the tilted exponent for this eps.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Optimal value function on a grid.
    Value {
        /// Repeat to cross-check methods.
        #[arg(long = "method", value_enum)]
        methods: Vec<ValueMethod>,
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Right end of the grid; twice the barrier by default.
        #[arg(long)]
        x_max: Option<f64>,
    },
    /// Monte Carlo value of a strategy.
    Simulate {
        /// Strategy as JSON, e.g. '{"type":"barrier","b":3.5}'.
        #[arg(long)]
        strategy: Option<String>,
        /// Horizon time, or `inf`.
        #[arg(long)]
        horizon: Option<String>,
        /// Write one CSV row per path.
        #[arg(long)]
        dump_paths: Option<PathBuf>,
    },
    /// Sweep one asymptotic regime.
    Regime { name: Option<String> },
    /// Optimal value minus the threshold-yield value.
    Gap {
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        horizon: Option<String>,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub path: Option<String>,
    pub exit_code: i32,
}

impl CliError {
    fn usage(message: impl ToString) -> Self {
        CliError { kind: "usage", message: message.to_string(), path: None, exit_code: 2 }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError { kind: "io", message: format!("{}: {e}", path.display()), path: None, exit_code: 1 }
    }

    pub fn to_json(&self) -> String {
        let mut v = json!({ "error": self.kind, "message": self.message });
        if let Some(p) = &self.path {
            v["path"] = Value::String(p.clone());
        }
        v.to_string()
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError { kind: e.kind(), path: e.path().map(String::from), message: e.to_string(), exit_code: 2 }
    }
}

impl From<RegimeError> for CliError {
    fn from(e: RegimeError) -> Self {
        CliError { kind: "solver", message: e.to_string(), path: None, exit_code: 1 }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError { kind: "simulation", message: e.to_string(), path: None, exit_code: 1 }
    }
}

fn solver_error(e: impl ToString) -> CliError {
    CliError { kind: "solver", message: e.to_string(), path: None, exit_code: 1 }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprintln!("{}", CliError::usage(e.to_string().trim_end()).to_json());
            return 2;
        }
    };
    match configure_threads().and_then(|()| run(cli)) {
        Ok(summary) => {
            if !summary.is_empty() {
                println!("{summary}");
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("{THREADS_ENV} must be a nonnegative integer (got {raw:?})")))?;
    if n > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => config::parse_config(&std::fs::read(path).map_err(|e| CliError::io(path, e))?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    if let Some(n) = cli.paths {
        cfg.sim.n_paths = n;
    }
    if let Some(out) = &cli.out {
        cfg.output.path = Some(out.clone());
    }
    if let Some(f) = cli.format {
        cfg.output.format = Some(f);
    }
    Ok(cfg)
}

/// Runs a parsed command and returns the one-line summary for stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Roots { eps } => {
            cfg.validate()?;
            roots(&cfg, eps, cfg.output.format.unwrap_or(Format::Json))
        }
        Command::Value { methods, points, x_max } => {
            cfg.validate()?;
            value(&cfg, &methods, points, x_max, cfg.output.format.unwrap_or(Format::Csv))
        }
        Command::Simulate { strategy, horizon, dump_paths } => {
            if let Some(h) = horizon {
                cfg.sim.horizon = config::parse_horizon(&h)?;
            }
            if let Some(s) = strategy {
                cfg.strategy = Some(config::parse_strategy(s.as_bytes(), &cfg.model)?);
            }
            cfg.validate()?;
            simulate_cmd(&cfg, dump_paths.as_deref(), cfg.output.format.unwrap_or(Format::Json))
        }
        Command::Regime { name } => {
            if let Some(n) = name {
                cfg.regime.name = Some(n.parse().map_err(CliError::usage)?);
            }
            cfg.validate()?;
            regime(&cfg, cfg.output.format.unwrap_or(Format::Csv))
        }
        Command::Gap { level, eps, horizon } => {
            if let Some(h) = horizon {
                cfg.sim.horizon = config::parse_horizon(&h)?;
            }
            match (level, eps, cfg.regime.threshold) {
                (Some(level), Some(eps), _) => cfg.regime.threshold = Some(ThresholdConfig { level, eps }),
                (None, None, Some(_)) => {}
                _ => return Err(CliError::usage("gap needs --level and --eps (or regime.threshold in the config)")),
            }
            cfg.validate()?;
            gap(&cfg, cfg.output.format.unwrap_or(Format::Json))
        }
    }
}

fn config_json(cfg: &RunConfig) -> String {
    serde_json::to_string(cfg).expect("config serializes")
}

fn with_provenance(mut v: Value, cfg: &RunConfig) -> Value {
    v["version"] = Value::String(VERSION.into());
    v["config"] = serde_json::to_value(cfg).expect("config serializes");
    v
}

fn to_json_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("result serializes");
    s.push('\n');
    s
}

/// Writes `text` to the configured output file, or returns it for stdout.
fn emit(cfg: &RunConfig, text: String, summary: String) -> Result<String, CliError> {
    match &cfg.output.path {
        Some(path) => {
            write_file(path, &text)?;
            Ok(summary)
        }
        None => Ok(text.trim_end_matches('\n').to_string()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn roots(cfg: &RunConfig, eps: Option<f64>, format: Format) -> Result<String, CliError> {
    let m = &cfg.model;
    let alpha = lundberg::solve_alpha(m).map_err(solver_error)?;
    let mut rows = vec![("alpha", alpha.value, alpha.residual)];
    let mut v = json!({ "alpha": alpha });
    if m.delta > 0.0 {
        let beta = lundberg::solve_beta(m, m.delta).map_err(solver_error)?;
        rows.push(("beta", beta.value, beta.residual));
        v["beta"] = json!(beta);
    }
    if let Some(eps) = eps {
        let tilted = lundberg::solve_alpha_tilted(m, eps).map_err(solver_error)?;
        rows.push(("alpha_tilted", tilted.value, tilted.residual));
        v["alpha_tilted"] = json!(tilted);
    }
    if m.is_profitable() {
        let t = lundberg::defective_mean_ruin_time(m, m.x0).map_err(solver_error)?;
        v["mean_ruin_time"] = json!(t);
    }
    let text = match format {
        Format::Json => to_json_line(&with_provenance(v, cfg)),
        Format::Csv => {
            let mut s = csv_preamble(&config_json(cfg));
            s.push_str("name,value,residual\n");
            for (name, value, residual) in rows {
                writeln!(s, "{name},{},{}", format_real(value), format_real(residual)).unwrap();
            }
            s
        }
    };
    emit(cfg, text, format!("alpha = {}", format_real(alpha.value)))
}

struct ValueCurve {
    method: ValueMethod,
    barrier: f64,
    eval: Box<dyn Fn(f64) -> f64>,
}

fn value_curve(cfg: &RunConfig, method: ValueMethod) -> Result<ValueCurve, CliError> {
    match method {
        ValueMethod::ClosedForm => {
            let sol = ExponentialSolution::new(&cfg.model).map_err(solver_error)?;
            Ok(ValueCurve {
                method,
                barrier: sol.b,
                eval: Box::new(move |x| sol.value(x).expect("grid is nonnegative")),
            })
        }
        ValueMethod::Pide => {
            let vf = pide::solve_barrier(&cfg.model, cfg.solver.n_grid).map_err(solver_error)?;
            Ok(ValueCurve { method, barrier: vf.barrier, eval: Box::new(move |x| vf.eval(x)) })
        }
    }
}

fn suffixed(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn value(
    cfg: &RunConfig,
    methods: &[ValueMethod],
    points: usize,
    x_max: Option<f64>,
    format: Format,
) -> Result<String, CliError> {
    let mut methods = methods.to_vec();
    methods.dedup();
    if methods.is_empty() {
        methods.push(if cfg.model.jumps.exponential_rate().is_some() {
            ValueMethod::ClosedForm
        } else {
            ValueMethod::Pide
        });
    }
    if points < 2 {
        return Err(CliError::usage("--points must be >= 2"));
    }
    if methods.len() > 1 && cfg.output.path.is_none() {
        return Err(CliError::usage("several --method values need --out for the per-method files"));
    }
    let curves = methods.iter().map(|&m| value_curve(cfg, m)).collect::<Result<Vec<_>, _>>()?;
    let x_max = x_max.unwrap_or(2.0 * curves[0].barrier);
    if !(x_max.is_finite() && x_max > 0.0) {
        return Err(CliError::usage(format!("--x-max must be > 0 (got {x_max})")));
    }
    let grid: Vec<f64> = (0..points).map(|i| x_max * i as f64 / (points - 1) as f64).collect();
    let tables: Vec<Vec<f64>> = curves.iter().map(|c| grid.iter().map(|&x| (c.eval)(x)).collect()).collect();

    let render = |c: &ValueCurve, values: &[f64]| match format {
        Format::Json => to_json_line(&with_provenance(
            json!({ "method": c.method.as_str(), "barrier": c.barrier, "x": grid, "value": values }),
            cfg,
        )),
        Format::Csv => {
            let mut s = csv_preamble(&config_json(cfg));
            writeln!(s, "# method: {}", c.method.as_str()).unwrap();
            writeln!(s, "# barrier: {}", format_real(c.barrier)).unwrap();
            s.push_str("x,value\n");
            for (x, v) in grid.iter().zip(values) {
                writeln!(s, "{},{}", format_real(*x), format_real(*v)).unwrap();
            }
            s
        }
    };

    if curves.len() == 1 {
        let text = render(&curves[0], &tables[0]);
        let summary = format!("{}: barrier = {}", curves[0].method.as_str(), format_real(curves[0].barrier));
        return emit(cfg, text, summary);
    }
    let out = cfg.output.path.as_deref().expect("checked above");
    let mut files = Vec::new();
    for (c, values) in curves.iter().zip(&tables) {
        let path = suffixed(out, c.method.as_str());
        write_file(&path, &render(c, values))?;
        files.push(path.display().to_string());
    }
    let sup = tables[0]
        .iter()
        .zip(&tables[1])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let diff = json!({
        "methods": methods.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        "barriers": curves.iter().map(|c| c.barrier).collect::<Vec<_>>(),
        "barrier_gap": (curves[0].barrier - curves[1].barrier).abs(),
        "sup_norm_gap": sup,
        "files": files,
    });
    write_file(&suffixed(out, "diff").with_extension("json"), &to_json_line(&with_provenance(diff.clone(), cfg)))?;
    Ok(diff.to_string())
}

fn simulate_cmd(cfg: &RunConfig, dump: Option<&Path>, format: Format) -> Result<String, CliError> {
    let strategy = cfg
        .strategy
        .ok_or_else(|| CliError::usage("simulate needs --strategy (or strategy in the config)"))?;
    let outcomes = simulate::simulate_paths(&cfg.model, &strategy, &cfg.sim)?;
    let summary = simulate::summarize(&outcomes);
    if let Some(path) = dump {
        let mut s = csv_preamble(&config_json(cfg));
        s.push_str("path_index,discounted_dividends,ruin_time,reached_threshold\n");
        for (i, o) in outcomes.iter().enumerate() {
            let ruin = o.ruin_time.map_or_else(|| "inf".to_string(), format_real);
            writeln!(s, "{i},{},{ruin},{}", format_real(o.discounted_dividends), o.reached_threshold).unwrap();
        }
        write_file(path, &s)?;
    }
    let v = &summary.value;
    let text = match format {
        Format::Json => to_json_line(&with_provenance(
            json!({
                "mean": v.mean,
                "std_error": v.std_error,
                "n": v.n,
                "ruin_fraction": summary.ruin_fraction,
                "reached_fraction": summary.reached_fraction,
            }),
            cfg,
        )),
        Format::Csv => {
            let mut s = csv_preamble(&config_json(cfg));
            s.push_str("mean,std_error,n,ruin_fraction,reached_fraction\n");
            writeln!(
                s,
                "{},{},{},{},{}",
                format_real(v.mean),
                format_real(v.std_error),
                v.n,
                format_real(summary.ruin_fraction),
                format_real(summary.reached_fraction)
            )
            .unwrap();
            s
        }
    };
    emit(cfg, text, format!("mean = {} (se {})", format_real(v.mean), format_real(v.std_error)))
}

fn finite_sim(cfg: &RunConfig, t: f64) -> SimConfig {
    SimConfig { horizon: Horizon::Finite { t }, ..cfg.sim }
}

fn run_regime(cfg: &RunConfig, name: RegimeName) -> Result<RegimeReport, CliError> {
    let m = &cfg.model;
    let r = &cfg.regime;
    let x = r.x.unwrap_or(m.x0);
    let sweep = r.sweep.clone().unwrap_or_else(|| name.default_sweep());
    let n = cfg.solver.n_grid;
    let report = match name {
        RegimeName::SmallDelta => match r.threshold {
            Some(th) => regimes::regime_small_delta_threshold(m, x, &sweep, th.level, th.eps, &cfg.sim)?,
            None => regimes::regime_small_delta(m, x, &sweep, n)?,
        },
        RegimeName::LargeT => regimes::regime_large_t(m, x, &sweep, n, &cfg.sim)?,
        RegimeName::LargeLambda => {
            let case = match r.case.as_deref() {
                None => LargeLambdaCase::Discounted,
                Some(c) => LargeLambdaCase::parse(c).ok_or_else(|| CliError {
                    kind: "invariant",
                    message: format!("regime.case: expected i, ii or iii (got {c:?})"),
                    path: Some("regime.case".into()),
                    exit_code: 2,
                })?,
            };
            let sim = finite_sim(cfg, r.horizon.unwrap_or(1.0));
            match (r.threshold, case) {
                (Some(th), _) => regimes::regime_large_lambda_threshold(m, x, &sweep, th.level, th.eps, &cfg.sim)?,
                (None, LargeLambdaCase::Discounted) => regimes::regime_large_lambda(m, x, &sweep, case, n, &cfg.sim)?,
                (None, _) => regimes::regime_large_lambda(m, x, &sweep, case, n, &sim)?,
            }
        }
        RegimeName::SmallRho => match r.case.as_deref() {
            Some("exact") => regimes::regime_small_rho_exact(m, x, r.horizon.unwrap_or(3.0), &cfg.sim)?,
            None | Some("ratio") => regimes::regime_small_rho(m, x, &sweep)?,
            Some(c) => {
                return Err(CliError {
                    kind: "invariant",
                    message: format!("regime.case: expected exact or ratio (got {c:?})"),
                    path: Some("regime.case".into()),
                    exit_code: 2,
                })
            }
        },
        RegimeName::LargeDelta => regimes::regime_large_delta(m, x, &sweep, n)?,
        RegimeName::SmallT => regimes::regime_small_t(m, x, &sweep, &cfg.sim)?,
    };
    Ok(report)
}

fn regime(cfg: &RunConfig, format: Format) -> Result<String, CliError> {
    let name = cfg
        .regime
        .name
        .ok_or_else(|| CliError::usage("regime needs a name (argument or regime.name in the config)"))?;
    let report = run_regime(cfg, name)?;
    let text = match format {
        Format::Json => to_json_line(&with_provenance(json!({ "report": report }), cfg)),
        Format::Csv => {
            let mut s = csv_preamble(&config_json(cfg));
            writeln!(s, "# regime: {}", report.name).unwrap();
            for (k, v) in &report.notes {
                writeln!(s, "# {k}: {}", format_real(*v)).unwrap();
            }
            s.push_str(&report.to_csv());
            s
        }
    };
    let last = report.last();
    let summary = format!(
        "{}: {} points, final rel_gap = {}",
        report.name,
        report.points.len(),
        format_real(last.rel_gap)
    );
    emit(cfg, text, summary)
}

fn gap(cfg: &RunConfig, format: Format) -> Result<String, CliError> {
    let th = cfg.regime.threshold.expect("checked by caller");
    let x = cfg.regime.x.unwrap_or(cfg.model.x0);
    let g = regimes::near_optimality_gap(&cfg.model, x, th.level, th.eps, cfg.solver.n_grid, &cfg.sim)?;
    let text = match format {
        Format::Json => to_json_line(&with_provenance(json!(g), cfg)),
        Format::Csv => {
            let mut s = csv_preamble(&config_json(cfg));
            s.push_str("optimal,achieved,std_error,n,gap\n");
            writeln!(
                s,
                "{},{},{},{},{}",
                format_real(g.optimal),
                format_real(g.achieved.mean),
                format_real(g.achieved.std_error),
                g.achieved.n,
                format_real(g.gap)
            )
            .unwrap();
            s
        }
    };
    emit(cfg, text, format!("gap = {}", format_real(g.gap)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(suffixed(Path::new("out/v.csv"), "pide"), PathBuf::from("out/v.pide.csv"));
        assert_eq!(suffixed(Path::new("v"), "pide"), PathBuf::from("v.pide"));
        assert_eq!(suffixed(Path::new("v.csv"), "diff").with_extension("json"), PathBuf::from("v.diff.json"));
    }

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["dualrisk", "simulate", "--paths", "10", "--seed", "3", "--horizon", "inf"]).unwrap();
        assert_eq!(cli.paths, Some(10));
        assert_eq!(cli.seed, Some(3));
        let cli = Cli::try_parse_from(["dualrisk", "value", "--method", "closed-form", "--method", "pide"]).unwrap();
        match cli.command {
            Command::Value { methods, .. } => assert_eq!(methods, vec![ValueMethod::ClosedForm, ValueMethod::Pide]),
            _ => panic!("wrong subcommand"),
        }
    }
}
