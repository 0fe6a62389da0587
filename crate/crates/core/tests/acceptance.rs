//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines appear in order and the
//! process exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dualrisk::closed_form::ExponentialSolution;
use dualrisk::lundberg::{self, ModelParams};
use dualrisk::pide;
use dualrisk::regimes::{self, LargeLambdaCase};
use dualrisk::simulate::{self, Estimate, Horizon, SimConfig, Strategy};

const PATHS: usize = 100_000;
const SEED: u64 = 42;

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn canonical() -> ModelParams {
    ModelParams::canonical()
}

fn infinite() -> SimConfig {
    SimConfig::new(PATHS, SEED, Horizon::infinite())
}

fn finite(t: f64) -> SimConfig {
    SimConfig::new(PATHS, SEED, Horizon::Finite { t })
}

fn within_3se(est: &Estimate, target: f64) -> bool {
    est.within(target, 3.0)
}

fn show(est: &Estimate) -> String {
    format!("{:.6} ± {:.6}", est.mean, est.std_error)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let m = canonical();
    let alpha = lundberg::solve_alpha(&m).unwrap();
    let roots = [
        alpha,
        lundberg::solve_beta(&m, m.delta).unwrap(),
        lundberg::solve_alpha_tilted(&m, 0.5).unwrap(),
        lundberg::solve_alpha_tilted(&m, 0.01).unwrap(),
    ];
    let worst = roots.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let pass = (alpha.value - 1.0).abs() <= 1e-10 && worst < 1e-12 && elapsed < Duration::from_secs(1);
    outcome(pass, format!("alpha = {:.15}, max residual = {worst:.2e}, {elapsed:.2?}", alpha.value))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let m = canonical();
    let exact = ExponentialSolution::new(&m).unwrap();
    let vf = pide::solve_barrier(&m, pide::DEFAULT_GRID).unwrap();
    let elapsed = start.elapsed();
    let v_at_b = pide::barrier_value(&m).unwrap();
    let sup = vf
        .grid
        .iter()
        .zip(&vf.values)
        .map(|(&x, &v)| (v - exact.value(x).unwrap()).abs())
        .fold(0.0, f64::max);
    let db = (vf.barrier - exact.b).abs();
    let pass = db <= 1e-3 && sup <= 1e-3 * v_at_b && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!("b: pide {:.6} vs exact {:.6} (gap {db:.2e}); sup gap {sup:.2e} vs {:.2e}; {elapsed:.2?}", vf.barrier, exact.b, 1e-3 * v_at_b),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let m = canonical();
    let exact = ExponentialSolution::new(&m).unwrap();
    let target = exact.value(m.x0).unwrap();
    let est = simulate::estimate_value(&m, &Strategy::Barrier { b: exact.b }, &infinite()).unwrap();
    let elapsed = start.elapsed();
    let pass = within_3se(&est, target) && elapsed < Duration::from_secs(30);
    outcome(pass, format!("MC {} vs exact {target:.6}; {elapsed:.2?}", show(&est)))
}

fn criterion_4() -> Outcome {
    let m = canonical();
    let x = m.x0;
    let cfg = infinite();
    let alpha = lundberg::solve_alpha(&m).unwrap().value;
    let beta = lundberg::solve_beta(&m, m.delta).unwrap().value;
    let mean_time = lundberg::defective_mean_ruin_time(&m, x).unwrap().defective_mean;
    let ruin = simulate::estimate_ruin_probability(&m, x, &cfg).unwrap();
    let laplace = simulate::estimate_ruin_time_laplace(&m, x, m.delta, &cfg).unwrap();
    let time = simulate::estimate_defective_mean_ruin_time(&m, x, &cfg).unwrap();
    let checks = [
        within_3se(&ruin, (-alpha * x).exp()),
        within_3se(&laplace, (-beta * x).exp()),
        within_3se(&time, mean_time),
    ];
    outcome(
        checks.iter().all(|&c| c),
        format!(
            "ruin {} vs {:.6}; laplace {} vs {:.6}; mean time {} vs {:.6}",
            show(&ruin),
            (-alpha * x).exp(),
            show(&laplace),
            (-beta * x).exp(),
            show(&time),
            mean_time
        ),
    )
}

fn criterion_5() -> Outcome {
    let m = canonical();
    let deltas = [0.1, 0.03, 0.01, 0.003, 0.001];
    let r = regimes::regime_small_delta(&m, m.x0, &deltas, pide::DEFAULT_GRID).unwrap();
    let gaps = r.rel_gaps();
    let last = r.last().rel_gap;
    let decreasing = r.decreasing(0.0);
    outcome(
        last < 0.02 && decreasing,
        format!(
            "limit {:.6}; rel_gaps {:?}; final < 2%: {}; decreasing over all points: {decreasing}; over final three: {}",
            r.last().limit,
            gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>(),
            last < 0.02,
            r.decreasing_tail(3, 0.0)
        ),
    )
}

fn criterion_6() -> Outcome {
    let m = canonical();
    let x = m.x0;
    let undiscounted = m.with_delta(0.0);
    let t = 50.0;
    let (slope, constant) = regimes::large_t_expansion(&undiscounted, x).unwrap();
    let target = slope * t + constant;
    let est = simulate::estimate_value(&undiscounted, &Strategy::TerminalPayout, &finite(t)).unwrap();
    let zero_ok = (est.mean - target).abs() <= 3.0 * est.std_error + 0.01 * target;
    let r = regimes::regime_large_t(&m, x, &[20.0, 40.0], pide::DEFAULT_GRID, &infinite()).unwrap();
    let bound_ok = r.points.iter().all(|p| p.within_bound());
    let bounds: Vec<String> = r
        .points
        .iter()
        .map(|p| format!("T={}: gap {:.4} <= {:.4}", p.param, p.abs_gap, p.bound.unwrap()))
        .collect();
    outcome(
        zero_ok && bound_ok,
        format!(
            "delta=0: MC {} vs expansion {target:.6} (tolerance {:.4}, x + expansion = {:.6}); delta>0: {}",
            show(&est),
            3.0 * est.std_error + 0.01 * target,
            x + target,
            bounds.join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let m = canonical();
    let lambdas = [5.0, 10.0, 20.0, 50.0, 100.0];
    let cases = [
        (LargeLambdaCase::Discounted, infinite(), 0.0),
        (LargeLambdaCase::FiniteDiscounted, finite(1.0), 3.0),
        (LargeLambdaCase::FiniteUndiscounted, finite(1.0), 3.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, (case, cfg, n_se)) in ["i", "ii", "iii"].iter().zip(cases) {
        let r = regimes::regime_large_lambda(&m, m.x0, &lambdas, case, pide::DEFAULT_GRID, &cfg).unwrap();
        let ok = r.last().rel_gap < 0.05 && r.decreasing(n_se);
        pass &= ok;
        parts.push(format!(
            "{name}: rel_gaps {:?} {}",
            r.rel_gaps().iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>(),
            if ok { "ok" } else { "not ok" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let m = canonical();
    let exact = regimes::regime_small_rho_exact(&m, m.x0, 3.0, &infinite()).unwrap();
    let exact_ok = exact.points.iter().all(|p| p.abs_gap <= 3.0 * p.se);
    let ratio = regimes::regime_small_rho(&m, m.x0, &[1e-3]).unwrap();
    let p = ratio.last();
    let q = p.computed / p.limit;
    let ratio_ok = (0.8..=1.2).contains(&q);
    let cases: Vec<String> = exact
        .points
        .iter()
        .map(|p| format!("{:.4} ± {:.4} vs {:.4}", p.computed, p.se, p.limit))
        .collect();
    outcome(
        exact_ok && ratio_ok,
        format!("rho=0 cases [{}]; second-order ratio at rho=1e-3 = {q:.4}", cases.join(", ")),
    )
}

fn criterion_9() -> Outcome {
    let m = canonical();
    let delta = 100.0;
    let r = regimes::regime_large_delta(&m, m.x0, &[delta], pide::DEFAULT_GRID).unwrap();
    let c = r.note("second_order_coefficient").unwrap();
    let excess = r.last().computed - m.x0;
    let scaled = delta * excess;
    let pass = excess > 0.0 && excess <= 2.0 * c / delta && (scaled - c).abs() <= 0.1 * c;
    outcome(pass, format!("V - x = {excess:.6e} (cap {:.6e}); delta (V - x) = {scaled:.6} vs {c:.6}", 2.0 * c / delta))
}

fn criterion_10() -> Outcome {
    let m = canonical();
    let ts = [0.81, 0.27, 0.09, 0.03, 0.01];
    let r = regimes::regime_small_t(&m, m.x0, &ts, &infinite()).unwrap();
    let p = r.last();
    let slope_ok = p.abs_gap <= 3.0 * p.se;
    let residual_ok = r.points.iter().all(|p| p.within_bound());
    outcome(
        slope_ok && residual_ok,
        format!(
            "slope at T=0.01 {:.4} ± {:.4} vs {:.4}; fitted C = {:.4}; residuals within C T + 3 SE: {residual_ok}",
            p.computed,
            p.se,
            p.limit,
            r.note("fitted_C").unwrap()
        ),
    )
}

fn criterion_11() -> Outcome {
    let m = canonical().with_delta(0.01);
    let cfg = infinite();
    let fine = regimes::near_optimality_gap(&m, m.x0, 40.0, 0.02, pide::DEFAULT_GRID, &cfg).unwrap();
    let coarse = regimes::near_optimality_gap(&m, m.x0, 10.0, 0.2, pide::DEFAULT_GRID, &cfg).unwrap();
    let pooled = (fine.achieved.std_error.powi(2) + coarse.achieved.std_error.powi(2)).sqrt();
    outcome(
        fine.gap < coarse.gap,
        format!(
            "optimal {:.4}; gap(M=40, eps=0.02) = {:.4}; gap(M=10, eps=0.2) = {:.4}; pooled SE {pooled:.4}",
            fine.optimal, fine.gap, coarse.gap
        ),
    )
}

fn run_cli(dir: &Path, threads: &str) -> Vec<u8> {
    // identical relative paths, so the embedded configs match
    std::fs::create_dir_all(dir).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_dualrisk"))
        .current_dir(dir)
        .env("DUALRISK_THREADS", threads)
        .args(["simulate", "--strategy", r#"{"type":"threshold_yield","M":3,"eps":0.2}"#])
        .args(["--paths", "20000", "--seed", "7", "--horizon", "inf"])
        .args(["--out", "sim.json", "--dump-paths", "paths.csv"])
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let mut bytes = output.stdout;
    bytes.extend(std::fs::read(dir.join("sim.json")).unwrap());
    bytes.extend(std::fs::read(dir.join("paths.csv")).unwrap());
    bytes
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runs = [("1", "a"), ("1", "b"), ("2", "c"), ("4", "d"), ("0", "e")];
    let outputs: Vec<Vec<u8>> = runs.iter().map(|(threads, tag)| run_cli(&dir.path().join(tag), threads)).collect();
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(identical, format!("{} runs with DUALRISK_THREADS in {{1, 2, 4, 0}}, {} bytes each", runs.len(), outputs[0].len()))
}

fn main() {
    let criteria: [(&str, Check); 12] = [
        ("roots", criterion_1),
        ("closed form vs solver", criterion_2),
        ("Monte Carlo vs closed form", criterion_3),
        ("ruin statistics", criterion_4),
        ("small delta", criterion_5),
        ("large T", criterion_6),
        ("large lambda", criterion_7),
        ("small rho", criterion_8),
        ("large delta", criterion_9),
        ("small T", criterion_10),
        ("near-optimality trend", criterion_11),
        ("determinism", criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.1?}]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
