//! The transport-like map reconstructed from converged dual potentials.
//!
//! The map is the weighted conditional mean
//!
//! ```text
//! T(x) = ( Σ_y w(x,y) μ(y) )⁻¹ Σ_y y · w(x,y) μ(y) ,
//! w(x,y) = 1/h''(Z(x,y))  evaluated at  Z = (h')⁻¹(ψ(x,y)/ε²) ,
//! ```
//!
//! with ψ = f + g - |x-y|². On the entropic branch w = Z, so T is the
//! barycentric projection; at p = 2 the weight is the support indicator and
//! T(x) is the plain conditional mean of the support slice. The gradient
//! convention is ∇f(x) = 2x - 2T(x), obtained by differentiating the
//! Schrödinger equation in x; `grad_f_check` verifies it by central finite
//! differences rather than trusting any one printed sign.

use crate::error::{Error, Result};
use crate::measures::{sq_dist, DiscreteMeasure, InteriorWindow};
use crate::solver::{DualPotentials, Plan};
use std::collections::HashMap;

/// Map value at one source atom, with the weighted mass under it and the
/// measured support radius around it.
#[derive(Debug, Clone)]
pub struct MapSample {
    pub x: Vec<f64>,
    pub t_of_x: Vec<f64>,
    pub weight_mass: f64,
    pub support_radius: f64,
}

/// Largest difference quotient of the map over pairs inside a window.
#[derive(Debug, Clone)]
pub struct LipschitzStat {
    pub window: InteriorWindow,
    pub lip_constant: f64,
    pub pair_count: usize,
}

/// Mass quantile defining the effective support of an entropic row: the
/// smallest set of columns carrying all but this fraction of the row mass.
const ENTROPIC_TAIL_MASS: f64 = 1e-6;

/// Evaluates the map at source atom `x_index`.
///
/// The support radius is max |y - x| over the plan support of the row for
/// the power branch; entropic rows have full support, so the radius is taken
/// over the smallest column set carrying 1 - 1e-6 of the row mass.
pub fn t_eps(
    pot: &DualPotentials,
    plan: &Plan,
    mu: &DiscreteMeasure,
    x_index: usize,
) -> Result<MapSample> {
    let lambda = plan.lambda();
    if x_index >= lambda.len() {
        return Err(Error::InvalidInput(format!(
            "x_index {x_index} out of range (n = {})",
            lambda.len()
        )));
    }
    let x = lambda.point(x_index).to_vec();
    let e2 = pot.eps * pot.eps;
    let d = mu.dim();
    let mut mass = 0.0;
    let mut mean = vec![0.0; d];
    for j in 0..mu.len() {
        let psi = pot.f[x_index] + pot.g[j] - sq_dist(&x, mu.point(j));
        let w = pot.reg.conjugate_weight(psi / e2) * mu.weight(j);
        if w > 0.0 {
            mass += w;
            for (k, y) in mu.point(j).iter().enumerate() {
                mean[k] += w * y;
            }
        }
    }
    if !(mass > 0.0) {
        return Err(Error::ZeroMass(x_index));
    }
    mean.iter_mut().for_each(|v| *v /= mass);

    let support_radius = if pot.reg.is_entropic() {
        effective_support_radius(plan, mu, x_index, &x)
    } else {
        let mut r = 0.0f64;
        plan.for_each_in_row(x_index, |j, z| {
            if z > 0.0 {
                r = r.max(sq_dist(&x, mu.point(j)).sqrt());
            }
        });
        r
    };

    Ok(MapSample {
        x,
        t_of_x: mean,
        weight_mass: mass,
        support_radius,
    })
}

fn effective_support_radius(plan: &Plan, mu: &DiscreteMeasure, i: usize, x: &[f64]) -> f64 {
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(mu.len());
    let mut total = 0.0;
    plan.for_each_in_row(i, |j, z| {
        let m = z * mu.weight(j);
        total += m;
        entries.push((j, m));
    });
    entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut acc = 0.0;
    let mut radius = 0.0f64;
    for (j, m) in entries {
        acc += m;
        radius = radius.max(sq_dist(x, mu.point(j)).sqrt());
        if acc >= (1.0 - ENTROPIC_TAIL_MASS) * total {
            break;
        }
    }
    radius
}

/// Central finite-difference check of ∇f(x) = 2(x - T(x)).
///
/// Returns (finite-difference gradient, 2(x - T(x)), their L∞ discrepancy).
/// `step` must be a positive multiple of the source lattice spacing and the
/// stencil must stay on the lattice; boundary atoms error out.
pub fn grad_f_check(
    pot: &DualPotentials,
    plan: &Plan,
    mu: &DiscreteMeasure,
    x_index: usize,
    step: f64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let lambda = plan.lambda();
    let d = lambda.dim();
    let s = lambda.grid_spacing();
    if !(s > 0.0) {
        return Err(Error::InvalidInput(
            "grad_f_check needs a lattice-structured source measure".into(),
        ));
    }
    let k = (step / s).round() as i64;
    if k < 1 || (step - k as f64 * s).abs() > 1e-9 * s {
        return Err(Error::InvalidInput(format!(
            "step {step} is not a positive multiple of the lattice spacing {s}"
        )));
    }

    // lattice coordinates -> atom index
    let origin = lambda.point(0).to_vec();
    let key = |pt: &[f64]| -> Vec<i64> {
        pt.iter()
            .zip(&origin)
            .map(|(x, o)| ((x - o) / s).round() as i64)
            .collect()
    };
    let mut index: HashMap<Vec<i64>, usize> = HashMap::with_capacity(lambda.len());
    for i in 0..lambda.len() {
        index.insert(key(lambda.point(i)), i);
    }

    let base = key(lambda.point(x_index));
    let mut fd = vec![0.0; d];
    for axis in 0..d {
        let mut up = base.clone();
        up[axis] += k;
        let mut dn = base.clone();
        dn[axis] -= k;
        let (iu, id) = match (index.get(&up), index.get(&dn)) {
            (Some(&a), Some(&b)) => (a, b),
            _ => {
                return Err(Error::Boundary(format!(
                    "stencil for atom {x_index} leaves the lattice on axis {axis}"
                )))
            }
        };
        fd[axis] = (pot.f[iu] - pot.f[id]) / (2.0 * step);
    }

    let sample = t_eps(pot, plan, mu, x_index)?;
    let brenier: Vec<f64> = sample
        .x
        .iter()
        .zip(&sample.t_of_x)
        .map(|(x, t)| 2.0 * (x - t))
        .collect();
    let disc = fd
        .iter()
        .zip(&brenier)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok((fd, brenier, disc))
}

/// Largest difference quotient |T(x)-T(x')|/|x-x'| over admissible pairs
/// inside the window with |x - x'| ≤ `max_pair_distance`.
pub fn lipschitz_stat(
    samples: &[MapSample],
    window: &InteriorWindow,
    max_pair_distance: f64,
) -> Result<LipschitzStat> {
    let inside: Vec<&MapSample> = samples.iter().filter(|s| window.contains(&s.x)).collect();
    if inside.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "window holds {} samples, need at least 2",
            inside.len()
        )));
    }
    let mut lip = 0.0f64;
    let mut pairs = 0usize;
    for a in 0..inside.len() {
        for b in (a + 1)..inside.len() {
            let dx = sq_dist(&inside[a].x, &inside[b].x).sqrt();
            if dx > 0.0 && dx <= max_pair_distance {
                let dt = sq_dist(&inside[a].t_of_x, &inside[b].t_of_x).sqrt();
                lip = lip.max(dt / dx);
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::InvalidInput(
            "no admissible pairs under the distance cap".into(),
        ));
    }
    Ok(LipschitzStat {
        window: window.clone(),
        lip_constant: lip,
        pair_count: pairs,
    })
}

/// Map samples at every window atom, in index order.
pub fn window_samples(
    pot: &DualPotentials,
    plan: &Plan,
    mu: &DiscreteMeasure,
    window: &InteriorWindow,
) -> Result<Vec<(usize, MapSample)>> {
    let lambda = plan.lambda();
    let mut out = Vec::new();
    for i in 0..lambda.len() {
        if window.contains(lambda.point(i)) {
            out.push((i, t_eps(pot, plan, mu, i)?));
        }
    }
    Ok(out)
}
