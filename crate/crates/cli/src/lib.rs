//! `regot` — command-line runner binding instance configs to solver, scan
//! and audit runs with reproducible file outputs.
//!
//! Exit codes: 0 success, 2 validation failure, 3 solver non-convergence,
//! 4 threshold failure under `--assert`. Every error prints one
//! machine-parsable line `error: <kind>: <reason>` on stderr.

pub mod config;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use regot_core::error::Error as CoreError;
use regot_core::experiments::{
    audit_monotonicity, audit_rescaling, eps_geometric, scan_bias, scan_energy_gap,
    scan_entropic_tails, scan_map_convergence, scan_support_radius, support_exponent, SweepConfig,
};
use regot_core::instances::{build_instance, instance_dim};
use regot_core::io::{
    fmt_f64, write_map_samples_csv, write_plan_csv, write_potential_csv, write_report_json,
};
use regot_core::measures::InteriorWindow;
use regot_core::regularizer::Regularizer;
use regot_core::solver::solve;
use regot_core::transport_map::t_eps;
use std::fs;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_ASSERT: i32 = 4;

/// Slope window for the support-radius gate.
const SUPPORT_SLOPE_TOL: f64 = 0.15;
const SUPPORT_R2_MIN: f64 = 0.98;
/// Slope window for the energy-gap gate (power branch).
const GAP_SLOPE_TOL: f64 = 0.2;
/// Entropic gap/κ(ε) must stay below this across the sweep.
const GAP_RATIO_BOUND: f64 = 2.0;
/// Bias slope may undershoot the global floor by at most this much.
const BIAS_SLOPE_SLACK: f64 = 0.1;
/// Tail quantity must fall by at least this factor across the sweep.
const TAIL_DECAY_FACTOR: f64 = 10.0;
/// Plan-distance/objective gate for the rescaling audit.
const RESCALING_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(
    name = "regot",
    version,
    about = "Regularised quadratic optimal transport: solves, rate scans, audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one instance at one ε; writes plan.csv, f.csv, g.csv, report.json
    Solve(CommonArgs),
    /// Support-radius rate sweep (power branch; entropic runs scan-tails)
    ScanSupport(CommonArgs),
    /// Energy-gap rate sweep against the exact baseline
    ScanGap(CommonArgs),
    /// Interior bias-radius sweep against the exact map
    ScanBias(CommonArgs),
    /// Entropic tail-mass sweep inside the window
    ScanTails(CommonArgs),
    /// Map and potential convergence sweep against the exact baseline
    ScanMap(CommonArgs),
    /// Cyclical-monotonicity audit of one converged plan
    AuditMonotonicity(CommonArgs),
    /// Affine-rescaling equivariance audit
    AuditRescaling(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::ScanSupport(_) => "scan-support",
            Command::ScanGap(_) => "scan-gap",
            Command::ScanBias(_) => "scan-bias",
            Command::ScanTails(_) => "scan-tails",
            Command::ScanMap(_) => "scan-map",
            Command::AuditMonotonicity(_) => "audit-monotonicity",
            Command::AuditRescaling(_) => "audit-rescaling",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Solve(a)
            | Command::ScanSupport(a)
            | Command::ScanGap(a)
            | Command::ScanBias(a)
            | Command::ScanTails(a)
            | Command::ScanMap(a)
            | Command::AuditMonotonicity(a)
            | Command::AuditRescaling(a) => a,
        }
    }
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// JSON config file; flags override it, it overrides defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance name: translation1d, dilation1d, translation2d, holder1d, holder2d, selfmap
    #[arg(long)]
    instance: Option<String>,
    /// Penalty exponent p in [1, 2]; p = 1 is entropic
    #[arg(long)]
    p: Option<f64>,
    /// Regularisation parameter for solve/audits
    #[arg(long)]
    eps: Option<f64>,
    /// Largest ε of a geometric sweep
    #[arg(long)]
    eps_from: Option<f64>,
    /// Smallest ε of a geometric sweep
    #[arg(long)]
    eps_to: Option<f64>,
    /// Number of sweep points
    #[arg(long)]
    points: Option<usize>,
    /// Atoms per axis; 0 resolves by the mesh rule (scans) or 64 (solve)
    #[arg(long)]
    n: Option<usize>,
    /// Density perturbation amplitude for the holder instances
    #[arg(long)]
    amplitude: Option<f64>,
    /// Solver tolerance (L∞ marginal residual)
    #[arg(long)]
    tol: Option<f64>,
    /// Solver sweep cap
    #[arg(long)]
    max_iter: Option<usize>,
    /// Seed for sampled audits
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    /// Gate the run on its acceptance thresholds (exit 4 on failure)
    #[arg(long = "assert")]
    assert_thresholds: bool,
    /// Worker cap; 1 reproduces the parallel results exactly
    #[arg(long)]
    threads: Option<usize>,
    /// Monotonicity audit sample count
    #[arg(long)]
    quadruples: Option<usize>,
    /// Diagonal of the rescaling matrix A (comma-separated)
    #[arg(long, value_delimiter = ',')]
    a_diag: Option<Vec<f64>>,
    /// Rescaling shift b (comma-separated point)
    #[arg(long, value_delimiter = ',')]
    shift: Option<Vec<f64>>,
    /// Rescaling target-side scale γ
    #[arg(long)]
    gamma: Option<f64>,
    /// Rescaling mass scale κ (only 1 supported)
    #[arg(long)]
    kappa: Option<f64>,
    /// Interior window radius; 0 uses the instance default
    #[arg(long)]
    window_radius: Option<f64>,
}

fn merge(cmd: &str, args: &CommonArgs) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            let mut file_cfg = RunConfig::from_json(&text)?;
            file_cfg.command = cmd.to_string();
            file_cfg
        }
        None => RunConfig::defaults(cmd),
    };
    macro_rules! over {
        ($field:ident) => {
            if let Some(v) = &args.$field {
                cfg.$field = v.clone();
            }
        };
    }
    over!(instance);
    over!(p);
    over!(eps);
    over!(eps_from);
    over!(eps_to);
    over!(points);
    over!(n);
    over!(amplitude);
    over!(tol);
    over!(max_iter);
    over!(seed);
    over!(out);
    over!(threads);
    over!(quadruples);
    over!(a_diag);
    over!(shift);
    over!(gamma);
    over!(kappa);
    over!(window_radius);
    if args.assert_thresholds {
        cfg.assert_thresholds = true;
    }
    Ok(cfg)
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_VALIDATION,
            };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match merge(cli.command.name(), cli.command.args()) {
        Ok(c) => c,
        Err(msg) => return fail(EXIT_VALIDATION, "validation", &msg),
    };
    if cfg.threads > 0 {
        // ignore the error when a pool already exists (repeated in-process runs)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }
    match dispatch(&cfg) {
        Ok(code) => code,
        Err(e) => {
            let (code, kind) = match &e {
                CoreError::NonConvergence { .. } => (EXIT_NON_CONVERGENCE, "non-convergence"),
                _ => (EXIT_VALIDATION, "validation"),
            };
            fail(code, kind, &e.to_string())
        }
    }
}

fn fail(code: i32, kind: &str, msg: &str) -> i32 {
    eprintln!("error: {kind}: {msg}");
    code
}

fn gate(cfg: &RunConfig, ok: bool, what: &str) -> i32 {
    if cfg.assert_thresholds && !ok {
        return fail(EXIT_ASSERT, "assert", what);
    }
    EXIT_OK
}

fn dispatch(cfg: &RunConfig) -> Result<i32, CoreError> {
    fs::create_dir_all(&cfg.out)?;
    // resolved canonical config rides along with every output set
    write_text(&out_file(cfg, "run-config.json"), &cfg.canonical_json())?;
    match cfg.command.as_str() {
        "solve" => cmd_solve(cfg),
        "scan-support" => {
            if cfg.p == 1.0 {
                // entropic plans have full support; route to the tail scan
                eprintln!("note: entropic penalty has full support; running scan-tails");
                cmd_scan_tails(cfg)
            } else {
                cmd_scan_support(cfg)
            }
        }
        "scan-gap" => cmd_scan_gap(cfg),
        "scan-bias" => cmd_scan_bias(cfg),
        "scan-tails" => cmd_scan_tails(cfg),
        "scan-map" => cmd_scan_map(cfg),
        "audit-monotonicity" => cmd_audit_monotonicity(cfg),
        "audit-rescaling" => cmd_audit_rescaling(cfg),
        other => Err(CoreError::InvalidInput(format!("unknown command '{other}'"))),
    }
}

fn resolve_reg(cfg: &RunConfig) -> Result<Regularizer, CoreError> {
    Regularizer::from_p(cfg.p)
}

/// Mesh rule: lattice spacing at most τ(ε_min)/8, so the smallest measured
/// support radius spans at least 8 cells.
fn resolve_n(cfg: &RunConfig, sweep: bool) -> Result<usize, CoreError> {
    if cfg.n > 0 {
        return Ok(cfg.n);
    }
    if !sweep {
        return Ok(64);
    }
    let d = instance_dim(&cfg.instance)?;
    let tau = cfg.eps_to.powf(support_exponent(d, cfg.p.max(1.0)));
    let n = (8.0 / tau).ceil() as usize;
    let n = n.max(16);
    if n > 2048 {
        return Err(CoreError::InvalidInput(format!(
            "mesh rule asks for n = {n} per axis; pass --n explicitly to override"
        )));
    }
    Ok(n)
}

fn sweep_config(cfg: &RunConfig) -> Result<SweepConfig, CoreError> {
    let n = resolve_n(cfg, true)?;
    let inst = build_instance(&cfg.instance, n, cfg.amplitude, cfg.seed)?;
    let eps = eps_geometric(cfg.eps_from, cfg.eps_to, cfg.points)?;
    let mut sweep = SweepConfig::new(inst, resolve_reg(cfg)?, eps, cfg.seed)?;
    sweep.tol = cfg.tol;
    sweep.max_iter = cfg.max_iter;
    if cfg.window_radius > 0.0 {
        sweep.window = InteriorWindow::new(sweep.window.center.clone(), cfg.window_radius)?;
    }
    Ok(sweep)
}

fn out_file(cfg: &RunConfig, name: &str) -> PathBuf {
    Path::new(&cfg.out).join(name)
}

fn write_text(path: &Path, text: &str) -> Result<(), CoreError> {
    fs::write(path, text)?;
    Ok(())
}

fn cmd_solve(cfg: &RunConfig) -> Result<i32, CoreError> {
    let n = resolve_n(cfg, false)?;
    let inst = build_instance(&cfg.instance, n, cfg.amplitude, cfg.seed)?;
    let out = solve(
        &inst.lambda,
        &inst.mu,
        resolve_reg(cfg)?,
        cfg.eps,
        cfg.tol,
        cfg.max_iter,
    )?;

    let mut buf = Vec::new();
    write_plan_csv(&mut buf, &out.plan)?;
    write_text(&out_file(cfg, "plan.csv"), &String::from_utf8_lossy(&buf))?;
    let mut fbuf = Vec::new();
    write_potential_csv(&mut fbuf, "f", &out.potentials.f)?;
    write_text(&out_file(cfg, "f.csv"), &String::from_utf8_lossy(&fbuf))?;
    let mut gbuf = Vec::new();
    write_potential_csv(&mut gbuf, "g", &out.potentials.g)?;
    write_text(&out_file(cfg, "g.csv"), &String::from_utf8_lossy(&gbuf))?;
    write_report_json(&out_file(cfg, "report.json"), &out.report)?;
    let samples: Vec<_> = (0..inst.lambda.len())
        .map(|i| t_eps(&out.potentials, &out.plan, &inst.mu, i))
        .collect::<Result<_, _>>()?;
    let mut mbuf = Vec::new();
    write_map_samples_csv(&mut mbuf, &samples)?;
    write_text(&out_file(cfg, "map.csv"), &String::from_utf8_lossy(&mbuf))?;

    let gap_ok = out.report.gap.abs() <= 1e-6 * (1.0 + out.report.primal.abs());
    let res_ok = out.report.residual <= cfg.tol;
    Ok(gate(
        cfg,
        gap_ok && res_ok,
        &format!(
            "duality gate failed: residual {} gap {}",
            out.report.residual, out.report.gap
        ),
    ))
}

fn cmd_scan_support(cfg: &RunConfig) -> Result<i32, CoreError> {
    let sweep = sweep_config(cfg)?;
    let scan = scan_support_radius(&sweep)?;
    let mut csv = String::from("eps,radius,tau,energy_half,energy_dp2,dropped\n");
    for r in &scan.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(r.eps),
            fmt_f64(r.radius),
            fmt_f64(r.tau),
            fmt_f64(r.energy_half),
            fmt_f64(r.energy_dp2),
            r.dropped
        ));
    }
    write_text(&out_file(cfg, "scan-support.csv"), &csv)?;
    let fit_json = serde_json::json!({
        "slope": scan.fit.slope,
        "intercept": scan.fit.intercept,
        "r_squared": scan.fit.r_squared,
        "predicted_slope": scan.predicted_slope,
        "dropped": scan.dropped,
        "points": scan.fit.points,
    });
    write_text(
        &out_file(cfg, "scan-support.fit.json"),
        &(serde_json::to_string_pretty(&fit_json)? + "\n"),
    )?;
    let ok = (scan.fit.slope - scan.predicted_slope).abs() <= SUPPORT_SLOPE_TOL
        && scan.fit.r_squared >= SUPPORT_R2_MIN;
    Ok(gate(
        cfg,
        ok,
        &format!(
            "support-radius gate failed: slope {} (target {} ± {SUPPORT_SLOPE_TOL}), r² {}",
            scan.fit.slope, scan.predicted_slope, scan.fit.r_squared
        ),
    ))
}

fn cmd_scan_gap(cfg: &RunConfig) -> Result<i32, CoreError> {
    let sweep = sweep_config(cfg)?;
    let entropic = sweep.reg.is_entropic();
    let scan = scan_energy_gap(&sweep)?;
    let mut csv = String::from("eps,primal,gap,abscissa,ratio,dropped\n");
    for r in &scan.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(r.eps),
            fmt_f64(r.primal),
            fmt_f64(r.gap),
            fmt_f64(r.abscissa),
            r.ratio.map(fmt_f64).unwrap_or_default(),
            r.dropped
        ));
    }
    write_text(&out_file(cfg, "scan-gap.csv"), &csv)?;
    let fit_json = serde_json::json!({
        "slope": scan.fit.slope,
        "intercept": scan.fit.intercept,
        "r_squared": scan.fit.r_squared,
        "predicted_slope": scan.predicted_slope,
        "predicted_slope_alt": scan.predicted_slope_alt,
        "dropped": scan.dropped,
        "points": scan.fit.points,
    });
    write_text(
        &out_file(cfg, "scan-gap.fit.json"),
        &(serde_json::to_string_pretty(&fit_json)? + "\n"),
    )?;
    let (ok, what) = if entropic {
        let worst = scan
            .rows
            .iter()
            .filter_map(|r| r.ratio)
            .fold(0.0f64, f64::max);
        (
            worst <= GAP_RATIO_BOUND,
            format!("entropic gap ratio gate failed: max gap/κ(ε) = {worst}"),
        )
    } else {
        (
            (scan.fit.slope - scan.predicted_slope).abs() <= GAP_SLOPE_TOL,
            format!(
                "energy-gap gate failed: slope {} (target {} ± {GAP_SLOPE_TOL})",
                scan.fit.slope, scan.predicted_slope
            ),
        )
    };
    Ok(gate(cfg, ok, &what))
}

fn cmd_scan_bias(cfg: &RunConfig) -> Result<i32, CoreError> {
    let sweep = sweep_config(cfg)?;
    let exact = sweep.instance.exact()?;
    let scan = scan_bias(&sweep, &exact)?;
    let mut csv = String::from("eps,bias_radius\n");
    for r in &scan.rows {
        csv.push_str(&format!("{},{}\n", fmt_f64(r.eps), fmt_f64(r.bias_radius)));
    }
    write_text(&out_file(cfg, "scan-bias.csv"), &csv)?;
    let fit_json = serde_json::json!({
        "slope": scan.fit.slope,
        "intercept": scan.fit.intercept,
        "r_squared": scan.fit.r_squared,
        "floor_slope": scan.floor_slope,
        "sharp_slope": scan.sharp_slope,
        "dropped": scan.dropped,
        "points": scan.fit.points,
    });
    write_text(
        &out_file(cfg, "scan-bias.fit.json"),
        &(serde_json::to_string_pretty(&fit_json)? + "\n"),
    )?;
    let ok = scan.fit.slope >= scan.floor_slope - BIAS_SLOPE_SLACK;
    Ok(gate(
        cfg,
        ok,
        &format!(
            "bias gate failed: slope {} below floor {} - {BIAS_SLOPE_SLACK}",
            scan.fit.slope, scan.floor_slope
        ),
    ))
}

fn cmd_scan_tails(cfg: &RunConfig) -> Result<i32, CoreError> {
    let mut cfg_ent = cfg.clone();
    cfg_ent.p = 1.0;
    let sweep = sweep_config(&cfg_ent)?;
    let scan = scan_entropic_tails(&sweep)?;
    let mut csv = String::from("eps,tail\n");
    for r in &scan.rows {
        csv.push_str(&format!("{},{}\n", fmt_f64(r.eps), fmt_f64(r.tail)));
    }
    write_text(&out_file(cfg, "scan-tails.csv"), &csv)?;
    let ratios: Vec<f64> = scan
        .rows
        .windows(2)
        .map(|w| if w[0].tail > 0.0 { w[1].tail / w[0].tail } else { 0.0 })
        .collect();
    let fit_json = serde_json::json!({
        "lambda_factor": scan.lambda_factor,
        "window_radius": scan.window_radius,
        "ratios": ratios,
    });
    write_text(
        &out_file(cfg, "scan-tails.fit.json"),
        &(serde_json::to_string_pretty(&fit_json)? + "\n"),
    )?;
    let shrinking = ratios.windows(2).all(|w| w[1] <= w[0]);
    let first = scan.rows.first().map(|r| r.tail).unwrap_or(0.0);
    let last = scan.rows.last().map(|r| r.tail).unwrap_or(0.0);
    let ok = shrinking && first >= TAIL_DECAY_FACTOR * last && first > 0.0;
    Ok(gate(
        cfg,
        ok,
        &format!("tail gate failed: first {first}, last {last}, ratios {ratios:?}"),
    ))
}

fn cmd_scan_map(cfg: &RunConfig) -> Result<i32, CoreError> {
    let sweep = sweep_config(cfg)?;
    let exact = sweep.instance.exact()?;
    let scan = scan_map_convergence(&sweep, &exact)?;
    let mut csv = String::from("eps,map_error,potential_error\n");
    for r in &scan.rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(r.eps),
            fmt_f64(r.map_error),
            fmt_f64(r.potential_error)
        ));
    }
    write_text(&out_file(cfg, "scan-map.csv"), &csv)?;
    let fit_json = serde_json::json!({
        "fit": scan.fit,
        "map_error_decreasing": scan.map_error_decreasing,
        "potential_error_decreasing": scan.potential_error_decreasing,
    });
    write_text(
        &out_file(cfg, "scan-map.fit.json"),
        &(serde_json::to_string_pretty(&fit_json)? + "\n"),
    )?;
    let spacing = sweep.instance.lambda.grid_spacing();
    let final_ok = scan
        .rows
        .last()
        .map(|r| r.map_error <= 2.0 * spacing)
        .unwrap_or(false);
    let ok = scan.map_error_decreasing && scan.potential_error_decreasing && final_ok;
    Ok(gate(
        cfg,
        ok,
        &format!(
            "map-convergence gate failed: decreasing=({},{}), final error vs 2*spacing {}",
            scan.map_error_decreasing,
            scan.potential_error_decreasing,
            2.0 * spacing
        ),
    ))
}

fn cmd_audit_monotonicity(cfg: &RunConfig) -> Result<i32, CoreError> {
    let n = resolve_n(cfg, false)?;
    let inst = build_instance(&cfg.instance, n, cfg.amplitude, cfg.seed)?;
    let out = solve(
        &inst.lambda,
        &inst.mu,
        resolve_reg(cfg)?,
        cfg.eps,
        cfg.tol,
        cfg.max_iter,
    )?;
    let audit = audit_monotonicity(&out.plan, &out.potentials, cfg.quadruples, cfg.seed, cfg.tol);
    let json = serde_json::json!({
        "instance": cfg.instance,
        "p": cfg.p,
        "eps": cfg.eps,
        "quadruples": audit.quadruples,
        "violations": audit.violations,
        "worst_margin": audit.worst_margin,
    });
    write_text(
        &out_file(cfg, "audit-monotonicity.json"),
        &(serde_json::to_string_pretty(&json)? + "\n"),
    )?;
    Ok(gate(
        cfg,
        audit.violations == 0,
        &format!("monotonicity gate failed: {} violations", audit.violations),
    ))
}

fn cmd_audit_rescaling(cfg: &RunConfig) -> Result<i32, CoreError> {
    let n = resolve_n(cfg, false)?;
    let inst = build_instance(&cfg.instance, n, cfg.amplitude, cfg.seed)?;
    let d = inst.dim;
    if cfg.a_diag.len() != d || cfg.shift.len() != d {
        return Err(CoreError::InvalidInput(format!(
            "a_diag and shift must have {d} entries for this instance"
        )));
    }
    let mut a = vec![0.0; d * d];
    for (k, v) in cfg.a_diag.iter().enumerate() {
        a[k * d + k] = *v;
    }
    let audit = audit_rescaling(
        &inst.lambda,
        &inst.mu,
        resolve_reg(cfg)?,
        cfg.eps,
        &a,
        &cfg.shift,
        cfg.gamma,
        cfg.kappa,
        cfg.tol,
        cfg.max_iter,
    )?;
    let json = serde_json::json!({
        "instance": cfg.instance,
        "p": cfg.p,
        "eps": cfg.eps,
        "gamma": cfg.gamma,
        "eps_transformed": audit.eps_transformed,
        "plan_distance": audit.plan_distance,
        "objective_difference": audit.objective_difference,
    });
    write_text(
        &out_file(cfg, "audit-rescaling.json"),
        &(serde_json::to_string_pretty(&json)? + "\n"),
    )?;
    let ok = audit.plan_distance <= RESCALING_TOL && audit.objective_difference <= RESCALING_TOL;
    Ok(gate(
        cfg,
        ok,
        &format!(
            "rescaling gate failed: plan distance {}, objective difference {}",
            audit.plan_distance, audit.objective_difference
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn run_args(args: &[&str]) -> i32 {
        let mut argv = vec!["regot"];
        argv.extend_from_slice(args);
        run(argv)
    }

    #[test]
    fn unknown_flag_exits_2_without_files() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("never");
        let code = run_args(&[
            "solve",
            "--no-such-flag",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_VALIDATION);
        assert!(!out.exists());
    }

    #[test]
    fn help_lists_every_command() {
        assert_eq!(run_args(&["--help"]), EXIT_OK);
        for cmd in [
            "solve",
            "scan-support",
            "scan-gap",
            "scan-bias",
            "scan-tails",
            "scan-map",
            "audit-monotonicity",
            "audit-rescaling",
        ] {
            assert_eq!(run_args(&[cmd, "--help"]), EXIT_OK, "{cmd}");
        }
    }

    #[test]
    fn solve_smoke_writes_outputs() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("run");
        let code = run_args(&[
            "solve",
            "--instance",
            "translation1d",
            "--p",
            "2",
            "--eps",
            "0.05",
            "--n",
            "64",
            "--out",
            out.to_str().unwrap(),
            "--assert",
        ]);
        assert_eq!(code, EXIT_OK);
        for f in ["plan.csv", "f.csv", "g.csv", "map.csv", "report.json", "run-config.json"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        for key in ["iterations", "residual", "primal", "dual", "gap", "wall_ms"] {
            assert!(report.get(key).is_some(), "report key {key}");
        }
    }

    #[test]
    fn identical_config_gives_byte_identical_csv() {
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        for d in [&d1, &d2] {
            let code = run_args(&[
                "solve",
                "--instance",
                "holder1d",
                "--p",
                "1.5",
                "--eps",
                "0.1",
                "--n",
                "32",
                "--seed",
                "9",
                "--out",
                d.path().join("o").to_str().unwrap(),
            ]);
            assert_eq!(code, EXIT_OK);
        }
        for f in ["plan.csv", "f.csv", "g.csv"] {
            let a = fs::read(d1.path().join("o").join(f)).unwrap();
            let b = fs::read(d2.path().join("o").join(f)).unwrap();
            assert_eq!(a, b, "{f} differs between identical runs");
        }
    }

    #[test]
    fn threads_one_matches_parallel() {
        // N=1 vs default pool must agree bit-for-bit on the CSV outputs.
        // (The global pool can only be installed once per process, so the
        // single-thread run goes through a scoped pool.)
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let out1 = d1.path().join("o");
        pool.install(|| {
            assert_eq!(
                run_args(&[
                    "solve",
                    "--instance",
                    "translation1d",
                    "--p",
                    "2",
                    "--eps",
                    "0.1",
                    "--n",
                    "48",
                    "--out",
                    out1.to_str().unwrap(),
                ]),
                EXIT_OK
            );
        });
        let out2 = d2.path().join("o");
        assert_eq!(
            run_args(&[
                "solve",
                "--instance",
                "translation1d",
                "--p",
                "2",
                "--eps",
                "0.1",
                "--n",
                "48",
                "--out",
                out2.to_str().unwrap(),
            ]),
            EXIT_OK
        );
        for f in ["plan.csv", "f.csv", "g.csv"] {
            assert_eq!(
                fs::read(out1.join(f)).unwrap(),
                fs::read(out2.join(f)).unwrap(),
                "{f} differs between 1-thread and parallel runs"
            );
        }
    }

    #[test]
    fn config_file_precedence() {
        let dir = tempdir().unwrap();
        let mut file_cfg = RunConfig::defaults("solve");
        file_cfg.instance = "selfmap".into();
        file_cfg.eps = 0.2;
        file_cfg.n = 16;
        let cfg_path = dir.path().join("cfg.json");
        fs::write(&cfg_path, file_cfg.canonical_json()).unwrap();
        // flag overrides the file's eps; file overrides the default instance
        let args = CommonArgs {
            config: Some(cfg_path),
            eps: Some(0.3),
            ..Default::default()
        };
        let merged = merge("solve", &args).unwrap();
        assert_eq!(merged.instance, "selfmap");
        assert_eq!(merged.eps, 0.3);
        assert_eq!(merged.n, 16);
        // canonical round trip of the merged config
        let back = RunConfig::from_json(&merged.canonical_json()).unwrap();
        assert_eq!(merged, back);
    }

    #[test]
    fn invalid_instance_exits_2() {
        let dir = tempdir().unwrap();
        let code = run_args(&[
            "solve",
            "--instance",
            "warp9",
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_VALIDATION);
    }

    #[test]
    fn non_convergence_exits_3() {
        let dir = tempdir().unwrap();
        let code = run_args(&[
            "solve",
            "--instance",
            "translation1d",
            "--p",
            "2",
            "--eps",
            "0.05",
            "--n",
            "32",
            "--max-iter",
            "2",
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_NON_CONVERGENCE);
    }

    #[test]
    fn failed_assertion_exits_4() {
        // at ε comparable to the window radius the tail quantity saturates
        // instead of decaying by 10x, so the --assert gate must trip
        let dir = tempdir().unwrap();
        let code = run_args(&[
            "scan-tails",
            "--instance",
            "selfmap",
            "--n",
            "32",
            "--window-radius",
            "0.04",
            "--eps-from",
            "1.0",
            "--eps-to",
            "0.7",
            "--points",
            "4",
            "--assert",
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_ASSERT);
        // outputs are still written for inspection
        assert!(dir.path().join("o").join("scan-tails.csv").exists());
    }
}
