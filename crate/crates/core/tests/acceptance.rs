//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Thresholds are pinned here, not tuned at runtime:
//!
//! 1.  duality: residual ≤ 1e-8 and |gap| ≤ 1e-6·(1+|primal|) on every d=1
//!     registry instance, p ∈ {1, 1.5, 2}, ε ∈ {0.1, 0.05}, n = 64
//! 2.  support-radius slope = 2/(d(p-1)+2) ± 0.15 with r² ≥ 0.98
//! 3.  energy-gap slope = 4/(d(p-1)+2) ± 0.2 (power); entropic
//!     gap/(ε² log ε⁻²) ≤ 2 across the sweep
//! 4.  bias slope ≥ 4/9 - 0.1
//! 5.  interior Lipschitz constant within a factor-2 band across the ε-sweep
//! 6.  sup-window map error strictly decreasing, final ≤ 2·spacing;
//!     gauge-aligned potential error decreasing
//! 7.  0/10⁴ monotonicity violations on every criterion-1 solve; a corrupted
//!     plan trips the audit
//! 8.  rescaling audit (A = I, b = 0.3, γ = 4, κ = 1) ≤ 1e-6
//! 9.  entropic tail at ε = R/8 at least 10× below its value at ε = R
//! 10. exact_1d and exact_assignment agree to 1e-10 on 20 random instances

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use regot_core::baseline::{exact_1d, exact_assignment};
use regot_core::experiments::{
    audit_monotonicity, audit_rescaling, corrupt_plan_swap_rows, duality_check, eps_geometric,
    scan_bias, scan_energy_gap, scan_entropic_tails, scan_map_convergence, scan_support_radius,
    support_exponent, SweepConfig,
};
use regot_core::instances::build_instance;
use regot_core::measures::{DiscreteMeasure, InteriorWindow};
use regot_core::regularizer::Regularizer;
use regot_core::solver::{solve, SolveOutput};
use regot_core::transport_map::{lipschitz_stat, window_samples};

const TOL: f64 = 1e-8;
const MAX_ITER: usize = 500_000;
const D1_INSTANCES: [&str; 4] = ["translation1d", "dilation1d", "holder1d", "selfmap"];
const HOLDER_AMPLITUDE: f64 = 0.3;

fn regs() -> [Regularizer; 3] {
    [
        Regularizer::Entropic,
        Regularizer::polynomial(1.5).unwrap(),
        Regularizer::polynomial(2.0).unwrap(),
    ]
}

fn verdict(criterion: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

/// Mesh rule: spacing ≤ τ(ε_min)/8.
fn mesh_n(d: usize, p: f64, eps_min: f64) -> usize {
    (8.0 / eps_min.powf(support_exponent(d, p))).ceil() as usize
}

fn criterion1_solves() -> Vec<(String, f64, f64, SolveOutput)> {
    let mut out = Vec::new();
    for name in D1_INSTANCES {
        let inst = build_instance(name, 64, HOLDER_AMPLITUDE, 0).unwrap();
        for reg in regs() {
            for eps in [0.1, 0.05] {
                let sol = solve(&inst.lambda, &inst.mu, reg, eps, TOL, MAX_ITER)
                    .unwrap_or_else(|e| panic!("{name} p={} eps={eps}: {e}", reg.p()));
                out.push((name.to_string(), reg.p(), eps, sol));
            }
        }
    }
    out
}

#[test]
fn criterion_01_duality_gap() {
    let mut ok = true;
    let mut worst = String::new();
    let mut worst_gap = 0.0f64;
    for (name, p, eps, sol) in criterion1_solves() {
        let chk = duality_check(&sol);
        let this_ok =
            chk.residual <= TOL && chk.gap.abs() <= chk.gap_tol && sol.report.wall_ms < 30_000.0;
        if chk.gap.abs() > worst_gap {
            worst_gap = chk.gap.abs();
            worst = format!(
                "worst |gap| {:.2e} (tol {:.2e}) at {name} p={p} eps={eps}, residual {:.2e}",
                chk.gap.abs(),
                chk.gap_tol,
                chk.residual
            );
        }
        ok &= this_ok;
    }
    verdict("1 (duality gap)", ok, &format!("24 solves; {worst}"));
}

#[test]
fn criterion_02_support_radius_rate() {
    let mut details = Vec::new();
    let mut ok = true;
    for p in [2.0, 1.5] {
        let n = mesh_n(1, p, 0.0125);
        let inst = build_instance("translation1d", n, 0.0, 0).unwrap();
        let eps = eps_geometric(0.1, 0.0125, 4).unwrap();
        let cfg = SweepConfig::new(inst, Regularizer::polynomial(p).unwrap(), eps, 0).unwrap();
        let scan = scan_support_radius(&cfg).unwrap();
        let target = support_exponent(1, p);
        let this_ok =
            (scan.fit.slope - target).abs() <= 0.15 && scan.fit.r_squared >= 0.98;
        details.push(format!(
            "p={p}: slope {:.4} (target {:.4}±0.15), r²={:.4}, dropped {:?}",
            scan.fit.slope, target, scan.fit.r_squared, scan.dropped
        ));
        ok &= this_ok;
    }
    verdict("2 (support-radius rate)", ok, &details.join("; "));
}

#[test]
fn criterion_03_energy_gap_rate() {
    let mut details = Vec::new();
    let mut ok = true;
    // power branch: slope against ε
    {
        let n = mesh_n(1, 2.0, 0.0125);
        let inst = build_instance("translation1d", n, 0.0, 0).unwrap();
        let eps = eps_geometric(0.1, 0.0125, 4).unwrap();
        let cfg = SweepConfig::new(inst, Regularizer::polynomial(2.0).unwrap(), eps, 0).unwrap();
        let scan = scan_energy_gap(&cfg).unwrap();
        let this_ok = (scan.fit.slope - 4.0 / 3.0).abs() <= 0.2;
        details.push(format!(
            "p=2: slope {:.4} (target 1.3333±0.2)",
            scan.fit.slope
        ));
        ok &= this_ok;
    }
    // entropic branch: gap/κ(ε) bounded above
    {
        let inst = build_instance("translation1d", 160, 0.0, 0).unwrap();
        let eps = eps_geometric(0.1, 0.0125, 4).unwrap();
        let cfg = SweepConfig::new(inst, Regularizer::Entropic, eps, 0).unwrap();
        let scan = scan_energy_gap(&cfg).unwrap();
        let worst = scan
            .rows
            .iter()
            .filter_map(|r| r.ratio)
            .fold(0.0f64, f64::max);
        let this_ok = worst <= 2.0 && worst > 0.0;
        details.push(format!("p=1: max gap/(ε²logε⁻²) = {worst:.4} (bound 2)"));
        ok &= this_ok;
    }
    verdict("3 (energy-gap rate)", ok, &details.join("; "));
}

#[test]
fn criterion_04_bias_bound() {
    let n = mesh_n(1, 2.0, 0.0125);
    let inst = build_instance("translation1d", n, 0.0, 0).unwrap();
    let exact = inst.exact().unwrap();
    let eps = eps_geometric(0.1, 0.0125, 4).unwrap();
    let cfg = SweepConfig::new(inst, Regularizer::polynomial(2.0).unwrap(), eps, 0).unwrap();
    let scan = scan_bias(&cfg, &exact).unwrap();
    let floor = 4.0 / 9.0 - 0.1;
    let ok = scan.fit.slope >= floor;
    verdict(
        "4 (bias bound)",
        ok,
        &format!(
            "slope {:.4} ≥ floor {:.4} (sharp interior target {:.4})",
            scan.fit.slope, floor, scan.sharp_slope
        ),
    );
}

#[test]
fn criterion_05_eps_uniform_lipschitz() {
    let mut ok = true;
    let mut details = Vec::new();
    for name in ["translation1d", "holder1d"] {
        for reg in regs() {
            // entropic kernels need the lattice resolved but not the mesh
            // rule's n (full support); power branches follow the mesh rule
            let n = if reg.is_entropic() {
                160
            } else {
                mesh_n(1, reg.p(), 0.0125)
            };
            let inst = build_instance(name, n, HOLDER_AMPLITUDE, 0).unwrap();
            let window = inst.window.clone();
            let eps_values = eps_geometric(0.1, 0.0125, 4).unwrap();
            let cfg = SweepConfig::new(inst, reg, eps_values, 0).unwrap();
            let pair_cap = window.radius / 3.0;
            let mut lips = Vec::new();
            cfg.for_each_solve(|_, out| {
                let mu = out.plan.mu().clone();
                let samples: Vec<_> = window_samples(&out.potentials, &out.plan, &mu, &window)?
                    .into_iter()
                    .map(|(_, s)| s)
                    .collect();
                lips.push(lipschitz_stat(&samples, &window, pair_cap)?.lip_constant);
                Ok(())
            })
            .unwrap();
            let lo = lips.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = lips.iter().cloned().fold(0.0f64, f64::max);
            let band = hi / lo;
            let blow_up = lips.windows(2).all(|w| w[1] > w[0]) && band > 1.5;
            let this_ok = band <= 2.0 && !blow_up;
            details.push(format!("{name} p={}: band {band:.3}", reg.p()));
            ok &= this_ok;
        }
    }
    verdict(
        "5 (ε-uniform Lipschitz)",
        ok,
        &format!("max/min over sweep — {}", details.join("; ")),
    );
}

#[test]
fn criterion_06_map_and_potential_convergence() {
    let inst = build_instance("translation1d", 64, 0.0, 0).unwrap();
    let exact = inst.exact().unwrap();
    let spacing = inst.lambda.grid_spacing();
    let eps = eps_geometric(0.4, 0.05, 4).unwrap();
    let cfg = SweepConfig::new(inst, Regularizer::polynomial(2.0).unwrap(), eps, 0).unwrap();
    let scan = scan_map_convergence(&cfg, &exact).unwrap();
    let last = scan.rows.last().unwrap();
    let ok = scan.map_error_decreasing
        && scan.potential_error_decreasing
        && last.map_error <= 2.0 * spacing;
    verdict(
        "6 (map/potential convergence)",
        ok,
        &format!(
            "map errors {:?} (final ≤ {:.4}), potential decreasing: {}",
            scan.rows.iter().map(|r| r.map_error).collect::<Vec<_>>(),
            2.0 * spacing,
            scan.potential_error_decreasing
        ),
    );
}

#[test]
fn criterion_07_monotonicity_audit() {
    let mut ok = true;
    let mut total = 0usize;
    for (name, p, eps, sol) in criterion1_solves() {
        let audit = audit_monotonicity(&sol.plan, &sol.potentials, 10_000, 42, TOL);
        if audit.violations != 0 {
            println!("  violation on {name} p={p} eps={eps}: {audit:?}");
            ok = false;
        }
        total += audit.quadruples;
    }
    // negative control: swapping two rows must trip the audit
    let inst = build_instance("translation1d", 64, 0.0, 0).unwrap();
    let sol = solve(
        &inst.lambda,
        &inst.mu,
        Regularizer::polynomial(2.0).unwrap(),
        0.05,
        TOL,
        MAX_ITER,
    )
    .unwrap();
    let bad = corrupt_plan_swap_rows(&sol.plan, 16, 48);
    let control = audit_monotonicity(&bad, &sol.potentials, 10_000, 42, TOL);
    ok &= control.violations >= 1;
    verdict(
        "7 (monotonicity audit)",
        ok,
        &format!(
            "{total} quadruples over 24 plans, 0 violations; corrupted control: {} violations",
            control.violations
        ),
    );
}

#[test]
fn criterion_08_rescaling_equivariance() {
    let inst = build_instance("translation1d", 64, 0.0, 0).unwrap();
    let audit = audit_rescaling(
        &inst.lambda,
        &inst.mu,
        Regularizer::polynomial(2.0).unwrap(),
        0.05,
        &[1.0],
        &[0.3],
        4.0,
        1.0,
        1e-9,
        MAX_ITER,
    )
    .unwrap();
    let ok = audit.plan_distance <= 1e-6 && audit.objective_difference <= 1e-6;
    verdict(
        "8 (rescaling equivariance)",
        ok,
        &format!(
            "plan distance {:.2e}, adjusted objective difference {:.2e} (ε' = {})",
            audit.plan_distance, audit.objective_difference, audit.eps_transformed
        ),
    );
}

#[test]
fn criterion_09_entropic_tails() {
    let inst = build_instance("selfmap", 64, 0.0, 0).unwrap();
    let r = 1.0 / 24.0;
    let window = InteriorWindow::new(inst.window.center.clone(), r).unwrap();
    let mut cfg = SweepConfig::new(
        inst,
        Regularizer::Entropic,
        vec![r, r / 2.0, r / 4.0, r / 8.0],
        0,
    )
    .unwrap();
    cfg.window = window;
    let scan = scan_entropic_tails(&cfg).unwrap();
    let first = scan.rows.first().unwrap().tail;
    let last = scan.rows.last().unwrap().tail;
    let ratios: Vec<f64> = scan
        .rows
        .windows(2)
        .map(|w| if w[0].tail > 0.0 { w[1].tail / w[0].tail } else { 0.0 })
        .collect();
    let ok = first > 0.0 && first >= 10.0 * last && ratios.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        "9 (entropic tails)",
        ok,
        &format!("tail(R)={first:.3e}, tail(R/8)={last:.3e}, consecutive ratios {ratios:?}"),
    );
}

#[test]
fn criterion_10_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let n = 64;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let ys: Vec<f64> = (0..n).map(|_| 2.0 * rng.gen::<f64>() - 0.5).collect();
        let w = vec![1.0 / n as f64; n];
        let l = DiscreteMeasure::new(1, xs, w.clone(), 0.0, (1.0, 1.0)).unwrap();
        let m = DiscreteMeasure::new(1, ys, w, 0.0, (1.0, 1.0)).unwrap();
        let a = exact_1d(&l, &m).unwrap();
        let b = exact_assignment(&l, &m).unwrap();
        worst = worst.max((a.cost - b.cost).abs());
    }
    let ok = worst <= 1e-10;
    verdict(
        "10 (oracle equivalence)",
        ok,
        &format!("20 random instances, max |cost_1d - cost_assignment| = {worst:.3e}"),
    );
}
