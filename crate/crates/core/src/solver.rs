//! Dual ascent for the regularised transport problem.
//!
//! The dual of the regularised problem is concave in the pair of potentials
//! (f, g), and maximising over one block with the other fixed is exactly
//! solvable: it amounts to restoring one marginal family of the Schrödinger
//! system
//!
//! ```text
//! Σ_y (h')⁻¹((f(x)+g(y)-|x-y|²)/ε²) μ(y) = 1   for every x,
//! Σ_x (h')⁻¹((f(x)+g(y)-|x-y|²)/ε²) λ(x) = 1   for every y.
//! ```
//!
//! For the entropic branch the block update is the classical log-domain
//! Sinkhorn step (closed form); for the power branch each row requires a
//! scalar root-find on a continuous nondecreasing function, done by
//! bisection, which is unconditionally safe. Alternating exact block
//! maximisations gives monotone dual ascent, so the iteration is
//! initialisation-independent; warm starts only shorten it.
//!
//! The plan density is assembled from the converged potentials through
//! Z = (h')⁻¹((f+g-c)/ε²) and stored per-row, sparse or dense.

use crate::error::{Error, Result};
use crate::measures::{sq_dist, DiscreteMeasure};
use crate::regularizer::Regularizer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Dual potentials on the atoms of λ and μ, gauge-fixed to f[0] = 0.
#[derive(Debug, Clone)]
pub struct DualPotentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub eps: f64,
    pub reg: Regularizer,
}

impl DualPotentials {
    /// Dual slack ψ(x_i, y_j) = f_i + g_j - |x_i - y_j|².
    pub fn psi(&self, lambda: &DiscreteMeasure, mu: &DiscreteMeasure, i: usize, j: usize) -> f64 {
        self.f[i] + self.g[j] - sq_dist(lambda.point(i), mu.point(j))
    }
}

/// One row of the coupling density Z = dπ/dP.
#[derive(Debug, Clone)]
pub enum PlanRow {
    Dense(Vec<f64>),
    Sparse(Vec<(usize, f64)>),
}

/// Coupling density against P = λ⊗μ, along with the pair identifying P.
#[derive(Debug, Clone)]
pub struct Plan {
    pub rows: Vec<PlanRow>,
    lambda: DiscreteMeasure,
    mu: DiscreteMeasure,
}

impl Plan {
    pub fn lambda(&self) -> &DiscreteMeasure {
        &self.lambda
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.mu.len()
    }

    /// Density value Z(i, j); zero for entries off a sparse row.
    pub fn z(&self, i: usize, j: usize) -> f64 {
        match &self.rows[i] {
            PlanRow::Dense(v) => v[j],
            PlanRow::Sparse(entries) => entries
                .binary_search_by(|&(jj, _)| jj.cmp(&j))
                .map(|k| entries[k].1)
                .unwrap_or(0.0),
        }
    }

    /// Indices (i, j) carrying strictly positive density.
    pub fn support_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            match row {
                PlanRow::Dense(v) => {
                    for (j, &z) in v.iter().enumerate() {
                        if z > 0.0 {
                            out.push((i, j));
                        }
                    }
                }
                PlanRow::Sparse(entries) => {
                    for &(j, z) in entries {
                        if z > 0.0 {
                            out.push((i, j));
                        }
                    }
                }
            }
        }
        out
    }

    /// Row visit with (column, Z) pairs, skipping structural zeros of sparse
    /// rows. Iteration order is by ascending column index.
    pub fn for_each_in_row<F: FnMut(usize, f64)>(&self, i: usize, mut fun: F) {
        match &self.rows[i] {
            PlanRow::Dense(v) => {
                for (j, &z) in v.iter().enumerate() {
                    fun(j, z);
                }
            }
            PlanRow::Sparse(entries) => {
                for &(j, z) in entries {
                    fun(j, z);
                }
            }
        }
    }
}

/// Summary of one solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub wall_ms: f64,
}

/// Converged potentials, assembled plan and report.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub potentials: DualPotentials,
    pub plan: Plan,
    pub report: SolveReport,
}

/// Fraction of populated entries below which a power-branch row is stored
/// sparse. Entropic rows are always dense (full support).
const SPARSE_ROW_THRESHOLD: f64 = 0.25;

/// Solves the regularised problem between two probability measures.
///
/// Converges until both Schrödinger residuals are ≤ `tol` in L∞, or errors
/// with the best iterate after `max_iter` sweeps. The returned potentials
/// are gauge-fixed to f[0] = 0.
pub fn solve(
    lambda: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    reg: Regularizer,
    eps: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveOutput> {
    solve_with_init(lambda, mu, reg, eps, tol, max_iter, None)
}

/// [`solve`] with an optional warm start `(f, g)`, used by ε-sweeps.
pub fn solve_with_init(
    lambda: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    reg: Regularizer,
    eps: f64,
    tol: f64,
    max_iter: usize,
    init: Option<(&[f64], &[f64])>,
) -> Result<SolveOutput> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 1], got {eps}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tol must be > 0".into()));
    }
    if lambda.dim() != mu.dim() {
        return Err(Error::InvalidInput("marginal dimensions differ".into()));
    }
    if (lambda.total_mass() - 1.0).abs() > 1e-9 || (mu.total_mass() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "marginals must both be probability measures (masses {} and {})",
            lambda.total_mass(),
            mu.total_mass()
        )));
    }

    let start = Instant::now();
    let n_l = lambda.len();
    let n_m = mu.len();

    let (mut f, mut g) = match init {
        Some((f0, g0)) => {
            if f0.len() != n_l || g0.len() != n_m {
                return Err(Error::InvalidInput("warm-start length mismatch".into()));
            }
            (f0.to_vec(), g0.to_vec())
        }
        None => (vec![0.0; n_l], vec![0.0; n_m]),
    };

    let ctx = SweepCtx {
        lambda,
        mu,
        reg,
        eps,
        tol,
    };

    // Restore column feasibility first; for a cold entropic start this is
    // exactly the soft-min initialisation of g.
    g = ctx.update_block(&g, &f, false).0;

    let mut iterations = 0;
    let mut converged = false;
    let mut last_dual = f64::NEG_INFINITY;
    while iterations < max_iter {
        iterations += 1;
        // Row residual of the current iterate (f, g) falls out of the f-update.
        let (f_new, row_res) = ctx.update_block(&f, &g, true);
        if row_res <= tol {
            converged = true;
            break;
        }
        f = f_new;
        let (g_new, _) = ctx.update_block(&g, &f, false);
        g = g_new;

        // Weak duality along the trajectory: the primal value of the
        // iterate's (infeasible) plan dominates the dual value up to the
        // marginal violation it still carries. Every sweep on small
        // instances; sampled on large ones (the check is itself O(n²)).
        let audit_sweep = n_l * n_m <= 4096 || iterations % 64 == 0;
        if cfg!(debug_assertions) && audit_sweep {
            let (p_val, d_val, rr, cr) = ctx.iterate_objectives(&f, &g);
            let fmax = f.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            let gmax = g.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            let slack = rr * fmax + cr * gmax + 10.0 * tol * (1.0 + p_val.abs());
            debug_assert!(
                p_val + slack >= d_val,
                "weak duality violated at sweep {iterations}: P={p_val} D={d_val} slack={slack}"
            );
            debug_assert!(
                d_val >= last_dual - 1e-9 * (1.0 + d_val.abs()),
                "dual ascent not monotone at sweep {iterations}: {last_dual} -> {d_val}"
            );
            last_dual = d_val;
        }
    }

    // Gauge fix f[0] = 0; leaves every ψ and the dual value unchanged.
    let f0 = f[0];
    f.iter_mut().for_each(|v| *v -= f0);
    g.iter_mut().for_each(|v| *v += f0);

    let potentials = DualPotentials { f, g, eps, reg };
    let plan = assemble_plan(&potentials, lambda, mu);
    let (row_res, col_res) = schrodinger_residual(&potentials, lambda, mu);
    let residual = row_res.max(col_res);
    let primal = primal_objective(&plan, lambda, mu, reg, eps);
    let dual = dual_objective(&potentials, lambda, mu);
    let report = SolveReport {
        iterations,
        residual,
        primal,
        dual,
        gap: primal - dual,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    let out = SolveOutput {
        potentials,
        plan,
        report,
    };
    if !converged && residual > tol {
        return Err(Error::NonConvergence {
            residual,
            iterations,
            best: Box::new(out),
        });
    }
    Ok(out)
}

struct SweepCtx<'a> {
    lambda: &'a DiscreteMeasure,
    mu: &'a DiscreteMeasure,
    reg: Regularizer,
    eps: f64,
    tol: f64,
}

impl SweepCtx<'_> {
    /// Exact block maximisation. `row_block = true` updates f from g (and
    /// reports the pre-update L∞ row-marginal residual); `false` updates g
    /// from f. Per-row work is independent, so rows run in parallel with
    /// fixed in-row summation order; results are identical to sequential.
    fn update_block(&self, own: &[f64], other: &[f64], row_block: bool) -> (Vec<f64>, f64) {
        let (own_m, opp_m) = if row_block {
            (self.lambda, self.mu)
        } else {
            (self.mu, self.lambda)
        };
        let n = own_m.len();
        let results: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut cost = vec![0.0; opp_m.len()];
                for (j, c) in cost.iter_mut().enumerate() {
                    *c = sq_dist(own_m.point(i), opp_m.point(j));
                }
                match self.reg {
                    Regularizer::Entropic => {
                        self.entropic_row(own[i], &cost, other, opp_m.weights())
                    }
                    Regularizer::Polynomial { .. } => {
                        self.polynomial_row(own[i], &cost, other, opp_m.weights())
                    }
                }
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        let mut worst = 0.0f64;
        for (v, r) in results {
            out.push(v);
            worst = worst.max(r);
        }
        (out, worst)
    }

    /// Log-domain Sinkhorn step. With Z = exp((f+g-c)/ε² - 1) the exact
    /// update is f = ε² - ε²·logΣ exp((g-c)/ε²)·w; the ε² offset keeps the
    /// potentials consistent with the density convention (h')⁻¹ = exp(·-1).
    /// Returns (new value, |row marginal - 1| of the incoming value), using
    /// row_marginal(f_old) = exp((f_old - f_new)/ε²).
    fn entropic_row(&self, own: f64, cost: &[f64], other: &[f64], w: &[f64]) -> (f64, f64) {
        let e2 = self.eps * self.eps;
        let mut m = f64::NEG_INFINITY;
        let mut a = vec![0.0; cost.len()];
        for j in 0..cost.len() {
            a[j] = (other[j] - cost[j]) / e2 + w[j].ln();
            m = m.max(a[j]);
        }
        let sum: f64 = a.iter().map(|&v| (v - m).exp()).sum();
        let new = e2 * (1.0 - (m + sum.ln()));
        let res = (((own - new) / e2).exp() - 1.0).abs();
        (new, res)
    }

    /// Scalar root-find for the power branch: the map
    /// Φ(f) = Σ_j (h')⁻¹((f + g_j - c_j)/ε²) w_j - 1 is continuous,
    /// nondecreasing, and strictly increasing once positive, so bisection on
    /// the a-priori bracket is unconditionally safe.
    fn polynomial_row(&self, own: f64, cost: &[f64], other: &[f64], w: &[f64]) -> (f64, f64) {
        let e2 = self.eps * self.eps;
        let n = cost.len();
        // thresholds t_j = c_j - g_j; only t_j < f contribute to Φ
        let mut thr: Vec<(f64, f64)> = (0..n).map(|j| (cost[j] - other[j], w[j])).collect();
        thr.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let phi = |fv: f64| -> f64 {
            let mut s = -1.0;
            for &(t, wj) in thr.iter().take_while(|&&(t, _)| t < fv) {
                s += self.reg.h_prime_inv((fv - t) / e2) * wj;
            }
            s
        };
        let w_min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut lo = thr[0].0;
        let mut hi = thr[n - 1].0 + e2 * self.reg.h_prime(1.0 / w_min).expect("cap is positive");
        // widen on bracket failure (cannot occur for exact arithmetic)
        let mut hi_val = phi(hi);
        let mut guard = 0;
        while hi_val < 0.0 && guard < 64 {
            hi = lo + 2.0 * (hi - lo);
            hi_val = phi(hi);
            guard += 1;
        }
        // residual of the incoming value; its sign also halves the bracket
        let phi_own = phi(own);
        if phi_own.abs() <= 0.5 * self.tol {
            return (own, phi_own.abs());
        }
        if own > lo && own < hi {
            if phi_own > 0.0 {
                hi = own;
            } else {
                lo = own;
            }
        }
        (Self::bisect(phi, lo, hi, self.tol), phi_own.abs())
    }

    fn bisect<F: Fn(f64) -> f64>(phi: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let v = phi(mid);
            if v.abs() <= 0.5 * tol || (hi - lo) <= 1e-14 * (1.0 + mid.abs()) {
                return mid;
            }
            if v > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        mid
    }

    /// Primal and dual value of the current iterate plus both marginal
    /// residuals, in one pass. Debug-mode diagnostics only.
    #[allow(clippy::needless_range_loop)] // parallel indexing into f/g/col
    fn iterate_objectives(&self, f: &[f64], g: &[f64]) -> (f64, f64, f64, f64) {
        let e2 = self.eps * self.eps;
        let n_l = self.lambda.len();
        let n_m = self.mu.len();
        let mut primal = 0.0;
        let mut conj = 0.0;
        let mut col = vec![0.0; n_m];
        let mut row_res = 0.0f64;
        for i in 0..n_l {
            let li = self.lambda.weight(i);
            let mut row = 0.0;
            for j in 0..n_m {
                let c = sq_dist(self.lambda.point(i), self.mu.point(j));
                let s = (f[i] + g[j] - c) / e2;
                let z = self.reg.h_prime_inv(s);
                let pw = li * self.mu.weight(j);
                primal += (c * z + e2 * self.reg.h(z).expect("z >= 0")) * pw;
                conj += self.reg.h_star(s) * pw;
                row += z * self.mu.weight(j);
                col[j] += z * li;
            }
            row_res = row_res.max((row - 1.0).abs());
        }
        let col_res = col.iter().fold(0.0f64, |a, &v| a.max((v - 1.0).abs()));
        let dual = f
            .iter()
            .zip(self.lambda.weights())
            .map(|(v, w)| v * w)
            .sum::<f64>()
            + g.iter().zip(self.mu.weights()).map(|(v, w)| v * w).sum::<f64>()
            - e2 * conj;
        (primal, dual, row_res, col_res)
    }
}

/// Builds the plan density Z = (h')⁻¹((f+g-c)/ε²) from converged potentials.
pub fn assemble_plan(
    pot: &DualPotentials,
    lambda: &DiscreteMeasure,
    mu: &DiscreteMeasure,
) -> Plan {
    let e2 = pot.eps * pot.eps;
    let n_m = mu.len();
    let rows: Vec<PlanRow> = (0..lambda.len())
        .into_par_iter()
        .map(|i| {
            let mut dense = Vec::with_capacity(n_m);
            let mut nnz = 0usize;
            for j in 0..n_m {
                let c = sq_dist(lambda.point(i), mu.point(j));
                let z = pot.reg.h_prime_inv((pot.f[i] + pot.g[j] - c) / e2);
                if z > 0.0 {
                    nnz += 1;
                }
                dense.push(z);
            }
            let sparse_ok = !pot.reg.is_entropic()
                && (nnz as f64) < SPARSE_ROW_THRESHOLD * (n_m as f64);
            if sparse_ok {
                PlanRow::Sparse(
                    dense
                        .iter()
                        .enumerate()
                        .filter(|(_, &z)| z > 0.0)
                        .map(|(j, &z)| (j, z))
                        .collect(),
                )
            } else {
                PlanRow::Dense(dense)
            }
        })
        .collect();
    Plan {
        rows,
        lambda: lambda.clone(),
        mu: mu.clone(),
    }
}

/// Primal objective Σ c·Z dP + ε² Σ h(Z) dP.
///
/// Entries absent from sparse rows have Z = 0; they contribute no transport
/// cost but do contribute h(0) (= -1/(p-1) on the power branch) to the
/// penalty, accounted through the uncovered product mass.
pub fn primal_objective(
    plan: &Plan,
    lambda: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    reg: Regularizer,
    eps: f64,
) -> f64 {
    let e2 = eps * eps;
    let mut transport = 0.0;
    let mut penalty = 0.0;
    let mut covered = 0.0;
    for i in 0..plan.n_rows() {
        let li = lambda.weight(i);
        plan.for_each_in_row(i, |j, z| {
            let pw = li * mu.weight(j);
            let c = sq_dist(lambda.point(i), mu.point(j));
            transport += c * z * pw;
            penalty += reg.h(z).expect("plan densities are nonnegative") * pw;
            covered += pw;
        });
    }
    let h0 = reg.h(0.0).expect("h(0) is finite");
    let total = lambda.total_mass() * mu.total_mass();
    penalty += h0 * (total - covered);
    transport + e2 * penalty
}

/// Dual objective Σ f dλ + Σ g dμ - ε² Σ h*((f+g-c)/ε²) dP.
pub fn dual_objective(pot: &DualPotentials, lambda: &DiscreteMeasure, mu: &DiscreteMeasure) -> f64 {
    let e2 = pot.eps * pot.eps;
    let linear: f64 = pot
        .f
        .iter()
        .zip(lambda.weights())
        .map(|(v, w)| v * w)
        .sum::<f64>()
        + pot.g.iter().zip(mu.weights()).map(|(v, w)| v * w).sum::<f64>();
    let conj: f64 = (0..lambda.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..mu.len() {
                let c = sq_dist(lambda.point(i), mu.point(j));
                acc += pot.reg.h_star((pot.f[i] + pot.g[j] - c) / e2) * mu.weight(j);
            }
            acc * lambda.weight(i)
        })
        .sum();
    linear - e2 * conj
}

/// L∞ violations of the two Schrödinger equations for the plan induced by
/// the potentials: (max_x |row marginal - 1|, max_y |column marginal - 1|).
#[allow(clippy::needless_range_loop)] // parallel indexing into f/g/col
pub fn schrodinger_residual(
    pot: &DualPotentials,
    lambda: &DiscreteMeasure,
    mu: &DiscreteMeasure,
) -> (f64, f64) {
    let e2 = pot.eps * pot.eps;
    let n_m = mu.len();
    let mut row_res = 0.0f64;
    let mut col = vec![0.0; n_m];
    for i in 0..lambda.len() {
        let mut row = 0.0;
        for j in 0..n_m {
            let c = sq_dist(lambda.point(i), mu.point(j));
            let z = pot.reg.h_prime_inv((pot.f[i] + pot.g[j] - c) / e2);
            row += z * mu.weight(j);
            col[j] += z * lambda.weight(i);
        }
        row_res = row_res.max((row - 1.0).abs());
    }
    let col_res = col.iter().fold(0.0f64, |a, &v| a.max((v - 1.0).abs()));
    (row_res, col_res)
}
