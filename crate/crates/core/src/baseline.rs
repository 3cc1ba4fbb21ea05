//! Exact (unregularised) quadratic optimal transport baselines.
//!
//! Two independent routes: the 1D monotone rearrangement (any weights) and
//! an exact assignment solver for uniform-weight instances in any dimension.
//! They provide the comparison targets for energy-gap, bias and
//! map-convergence measurements, plus Kantorovich potentials in the same
//! gauge as the dual solver (f vanishes at the first support point).

use crate::error::{Error, Result};
use crate::measures::{sq_dist, DiscreteMeasure};
use crate::solver::Plan;

/// Exact solution: cost, map samples (x, T(x)) on the atoms of λ, and a
/// Kantorovich potential on supp λ.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub cost: f64,
    pub map_samples: Vec<(Vec<f64>, Vec<f64>)>,
    pub potential_f: Vec<f64>,
}

impl ExactSolution {
    /// T(x_i) for the i-th atom of the λ used to build the solution.
    pub fn map_at(&self, i: usize) -> &[f64] {
        &self.map_samples[i].1
    }

    /// Admissible partner potential by c-transform on the atoms of μ:
    /// g(y) = min_x |x-y|² - f(x).
    pub fn c_transform_g(&self, mu: &DiscreteMeasure) -> Vec<f64> {
        (0..mu.len())
            .map(|j| {
                self.map_samples
                    .iter()
                    .zip(&self.potential_f)
                    .map(|((x, _), f)| sq_dist(x, mu.point(j)) - f)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

/// Monotone (quantile) coupling in one dimension.
///
/// Cost by exact summation over the northwest-corner traversal of the sorted
/// atoms; T(x) is the coupling-weighted mean of the targets of each source
/// atom (the exact map wherever the atom is not split); f is recovered by
/// trapezoidal integration of f'(x) = 2(x - T(x)) along the sorted support,
/// anchored at f = 0 on the leftmost atom.
pub fn exact_1d(lambda: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<ExactSolution> {
    if lambda.dim() != 1 || mu.dim() != 1 {
        return Err(Error::InvalidInput("exact_1d requires d = 1".into()));
    }
    if (lambda.total_mass() - mu.total_mass()).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "unequal masses: {} vs {}",
            lambda.total_mass(),
            mu.total_mass()
        )));
    }
    let n = lambda.len();
    let m = mu.len();
    let mut ord_l: Vec<usize> = (0..n).collect();
    ord_l.sort_by(|&a, &b| lambda.point(a)[0].partial_cmp(&lambda.point(b)[0]).unwrap());
    let mut ord_m: Vec<usize> = (0..m).collect();
    ord_m.sort_by(|&a, &b| mu.point(a)[0].partial_cmp(&mu.point(b)[0]).unwrap());

    let mut cost = 0.0;
    let mut t_acc = vec![0.0; n];
    let mut a = 0usize;
    let mut b = 0usize;
    let mut rem_a = lambda.weight(ord_l[0]);
    let mut rem_b = mu.weight(ord_m[0]);
    loop {
        let i = ord_l[a];
        let j = ord_m[b];
        let take = rem_a.min(rem_b);
        let dx = lambda.point(i)[0] - mu.point(j)[0];
        cost += take * dx * dx;
        t_acc[i] += take * mu.point(j)[0];
        rem_a -= take;
        rem_b -= take;
        if rem_a <= 1e-15 * lambda.weight(i) {
            a += 1;
            if a == n {
                break;
            }
            rem_a = lambda.weight(ord_l[a]);
        }
        if rem_b <= 1e-15 * mu.weight(j) {
            b += 1;
            if b == m {
                break;
            }
            rem_b = mu.weight(ord_m[b]);
        }
    }

    let map_samples: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|i| {
            (
                lambda.point(i).to_vec(),
                vec![t_acc[i] / lambda.weight(i)],
            )
        })
        .collect();

    // f' = 2(x - T(x)) integrated along the sorted support, f(x_0) = 0
    let mut potential_f = vec![0.0; n];
    for w in ord_l.windows(2) {
        let (i0, i1) = (w[0], w[1]);
        let x0 = lambda.point(i0)[0];
        let x1 = lambda.point(i1)[0];
        let d0 = 2.0 * (x0 - map_samples[i0].1[0]);
        let d1 = 2.0 * (x1 - map_samples[i1].1[0]);
        potential_f[i1] = potential_f[i0] + 0.5 * (d0 + d1) * (x1 - x0);
    }

    Ok(ExactSolution {
        cost,
        map_samples,
        potential_f,
    })
}

/// Exact optimal assignment under squared Euclidean cost, for equal atom
/// counts n ≤ 2048 with uniform weights 1/n.
///
/// Shortest-augmenting-path method on integer-scaled costs (×10¹², rounded)
/// so the pivoting never cycles on floating-point ties; the reported cost is
/// re-summed from the matching in f64. Kantorovich potentials come from the
/// final dual variables, gauge-fixed at the first atom.
#[allow(clippy::needless_range_loop)] // row/col indices drive several arrays
pub fn exact_assignment(lambda: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<ExactSolution> {
    let n = lambda.len();
    if n != mu.len() {
        return Err(Error::InvalidInput(
            "exact_assignment needs equal atom counts; use exact_1d for general weights".into(),
        ));
    }
    if n > 2048 {
        return Err(Error::InvalidInput(
            "exact_assignment caps at n = 2048; use exact_1d or analytic cases".into(),
        ));
    }
    let w = 1.0 / n as f64;
    for i in 0..n {
        if (lambda.weight(i) - w).abs() > 1e-12 || (mu.weight(i) - w).abs() > 1e-12 {
            return Err(Error::InvalidInput(
                "exact_assignment needs uniform weights 1/n; use exact_1d otherwise".into(),
            ));
        }
    }

    const SCALE: f64 = 1e12;
    let mut cost_int = vec![0i64; n * n];
    for i in 0..n {
        for j in 0..n {
            let c = sq_dist(lambda.point(i), mu.point(j));
            debug_assert!(c * SCALE < 9.0e18);
            cost_int[i * n + j] = (c * SCALE).round() as i64;
        }
    }
    let (row_to_col, u, v) = shortest_augmenting_path(&cost_int, n);

    let mut cost = 0.0;
    let mut map_samples = Vec::with_capacity(n);
    for i in 0..n {
        let j = row_to_col[i];
        cost += w * sq_dist(lambda.point(i), mu.point(j));
        map_samples.push((lambda.point(i).to_vec(), mu.point(j).to_vec()));
    }
    let f0 = u[0] as f64 / SCALE;
    let potential_f: Vec<f64> = u.iter().map(|&ui| ui as f64 / SCALE - f0).collect();
    // duals satisfy u_i + v_j <= c_ij with equality on the matching
    debug_assert!((0..n).all(|i| {
        let j = row_to_col[i];
        u[i] + v[j] <= cost_int[i * n + j] + 1
    }));

    Ok(ExactSolution {
        cost,
        map_samples,
        potential_f,
    })
}

/// Jonker–Volgenant style shortest augmenting path; O(n³) worst case.
/// Returns (assignment row -> col, row duals u, col duals v), where
/// u_i + v_j ≤ c_ij everywhere with equality on assigned pairs.
fn shortest_augmenting_path(cost: &[i64], n: usize) -> (Vec<usize>, Vec<i64>, Vec<i64>) {
    const UNSET: usize = usize::MAX;
    let mut u = vec![0i64; n];
    let mut v = vec![0i64; n];
    let mut col_to_row = vec![UNSET; n];
    for start in 0..n {
        // Dijkstra over columns for the cheapest augmenting path from `start`
        let mut min_dist = vec![i64::MAX; n];
        let mut prev_col = vec![UNSET; n];
        let mut done = vec![false; n];
        let mut row = start;
        let mut last_col = UNSET;
        let mut shortest = 0i64;
        loop {
            let mut best = i64::MAX;
            let mut best_col = UNSET;
            for j in 0..n {
                if done[j] {
                    continue;
                }
                let red = cost[row * n + j] - u[row] - v[j] + shortest;
                if red < min_dist[j] {
                    min_dist[j] = red;
                    prev_col[j] = last_col;
                }
                if min_dist[j] < best {
                    best = min_dist[j];
                    best_col = j;
                }
            }
            shortest = best;
            done[best_col] = true;
            last_col = best_col;
            if col_to_row[best_col] == UNSET {
                break;
            }
            row = col_to_row[best_col];
        }
        // dual update keeps reduced costs nonnegative
        u[start] += shortest;
        for j in 0..n {
            if done[j] && j != last_col {
                let r = col_to_row[j];
                u[r] += shortest - min_dist[j];
                v[j] -= shortest - min_dist[j];
            }
        }
        // augment along the recorded path
        let mut j = last_col;
        loop {
            let pj = prev_col[j];
            let r = if pj == UNSET { start } else { col_to_row[pj] };
            col_to_row[j] = r;
            if pj == UNSET {
                break;
            }
            j = pj;
        }
    }
    let mut row_to_col = vec![UNSET; n];
    for j in 0..n {
        row_to_col[col_to_row[j]] = j;
    }
    (row_to_col, u, v)
}

/// Both sides of the stability inequality
///
/// ```text
/// Σ |T(x)-y|² dπ  ≤  2L ( Σ |x-y|² dπ - Σ |x-T(x)|² dλ )
/// ```
///
/// for an L-Lipschitz exact map T, evaluated by exact summation against the
/// plan. Requires the exact solution to live on the same source atoms.
pub fn stability_gap(plan: &Plan, exact: &ExactSolution, lipschitz_l: f64) -> Result<(f64, f64)> {
    let lambda = plan.lambda();
    let mu = plan.mu();
    if exact.map_samples.len() != lambda.len() {
        return Err(Error::InvalidInput(
            "exact solution does not match the plan's source atoms".into(),
        ));
    }
    for i in 0..lambda.len() {
        if sq_dist(&exact.map_samples[i].0, lambda.point(i)) > 1e-20 {
            return Err(Error::InvalidInput(format!(
                "exact map sample {i} sits on a different atom"
            )));
        }
    }
    let mut lhs = 0.0;
    let mut transport = 0.0;
    for i in 0..lambda.len() {
        let li = lambda.weight(i);
        let t = exact.map_at(i);
        plan.for_each_in_row(i, |j, z| {
            let pw = z * li * mu.weight(j);
            lhs += sq_dist(t, mu.point(j)) * pw;
            transport += sq_dist(lambda.point(i), mu.point(j)) * pw;
        });
    }
    let mut exact_term = 0.0;
    for i in 0..lambda.len() {
        exact_term += sq_dist(lambda.point(i), exact.map_at(i)) * lambda.weight(i);
    }
    Ok((lhs, 2.0 * lipschitz_l * (transport - exact_term)))
}
