//! Discrete marginals: weighted point clouds, usually on a regular lattice.
//!
//! Marginals are represented as atoms at cell centers rather than as
//! quadrature of a continuum density: the solver then targets the discrete
//! problem exactly and has a computable duality gap, while continuum claims
//! are assessed through mesh-refinement sweeps.

use crate::error::{Error, Result};

/// A weighted point cloud in R^d.
///
/// `grid_spacing > 0` marks a regular lattice with that spacing (all axes);
/// `0.0` is the sentinel for unstructured clouds. `density_bounds` carry the
/// lower/upper bounds of the continuum density the cloud discretises; they
/// are metadata only, nothing enforces them after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>, // row-major, n * dim
    weights: Vec<f64>,
    grid_spacing: f64,
    density_bounds: (f64, f64),
}

impl DiscreteMeasure {
    pub fn new(
        dim: usize,
        points: Vec<f64>,
        weights: Vec<f64>,
        grid_spacing: f64,
        density_bounds: (f64, f64),
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        if points.len() != weights.len() * dim {
            return Err(Error::InvalidInput(format!(
                "points/weights shape mismatch: {} coordinates vs {} weights in dim {}",
                points.len(),
                weights.len(),
                dim
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidInput("measure needs at least one atom".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput("all weights must be > 0".into()));
        }
        Ok(DiscreteMeasure {
            dim,
            points,
            weights,
            grid_spacing,
            density_bounds,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn grid_spacing(&self) -> f64 {
        self.grid_spacing
    }

    pub fn density_bounds(&self) -> (f64, f64) {
        self.density_bounds
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= 1e-12
    }

    /// Unweighted mean of the atom positions.
    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for i in 0..self.len() {
            for (k, x) in self.point(i).iter().enumerate() {
                c[k] += x;
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }

    /// Componentwise bounding box of the support.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for i in 0..self.len() {
            for (k, &x) in self.point(i).iter().enumerate() {
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        (lo, hi)
    }

    /// Structural self-check: positive weights, pairwise-distinct points,
    /// lattice consistency when a spacing is declared.
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput("nonpositive weight".into()));
        }
        // lexicographic sort detects duplicates in O(n log n)
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.point(a)
                .partial_cmp(self.point(b))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in order.windows(2) {
            if self.point(w[0]) == self.point(w[1]) {
                return Err(Error::InvalidInput(format!(
                    "duplicate atoms at indices {} and {}",
                    w[0], w[1]
                )));
            }
        }
        if self.grid_spacing > 0.0 {
            let origin = self.point(0).to_vec();
            for i in 0..self.len() {
                for (k, &x) in self.point(i).iter().enumerate() {
                    let steps = (x - origin[k]) / self.grid_spacing;
                    if (steps - steps.round()).abs() > 1e-9 {
                        return Err(Error::InvalidInput(format!(
                            "atom {i} is off the declared lattice (axis {k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Central interior window: centroid of the support, radius one third of
    /// the inradius of the bounding box.
    pub fn default_window(&self) -> InteriorWindow {
        let (lo, hi) = self.bounding_box();
        let inradius = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| 0.5 * (b - a))
            .fold(f64::INFINITY, f64::min);
        InteriorWindow {
            center: self.centroid(),
            radius: inradius / 3.0,
        }
    }
}

/// Closed ball compactly contained in the support; every interior estimate
/// (Lipschitz statistics, support radii, tails) is restricted to one.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorWindow {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl InteriorWindow {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput("window radius must be > 0".into()));
        }
        Ok(InteriorWindow { center, radius })
    }

    pub fn contains(&self, pt: &[f64]) -> bool {
        sq_dist(&self.center, pt) <= self.radius * self.radius
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Uniform measure on a box: cell-centered lattice, equal weights.
///
/// Requires the box to have equal side/n on all axes so that a single scalar
/// lattice spacing describes the cloud.
pub fn uniform_on_box(d: usize, lo: &[f64], hi: &[f64], n_per_axis: usize) -> Result<DiscreteMeasure> {
    if lo.len() != d || hi.len() != d {
        return Err(Error::InvalidInput("lo/hi length must equal d".into()));
    }
    if n_per_axis < 2 {
        return Err(Error::InvalidInput("n_per_axis must be >= 2".into()));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(Error::InvalidInput("degenerate box: need lo < hi".into()));
    }
    let spacing = (hi[0] - lo[0]) / n_per_axis as f64;
    for k in 1..d {
        let s = (hi[k] - lo[k]) / n_per_axis as f64;
        if (s - spacing).abs() > 1e-12 * spacing {
            return Err(Error::InvalidInput(
                "uniform_on_box needs equal cell size on all axes".into(),
            ));
        }
    }
    let n_total = n_per_axis.pow(d as u32);
    let mut points = Vec::with_capacity(n_total * d);
    let mut idx = vec![0usize; d];
    for _ in 0..n_total {
        for k in 0..d {
            points.push(lo[k] + (idx[k] as f64 + 0.5) * spacing);
        }
        // odometer increment, last axis fastest
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < n_per_axis {
                break;
            }
            idx[k] = 0;
        }
    }
    let w = 1.0 / n_total as f64;
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    DiscreteMeasure::new(d, points, vec![w; n_total], spacing, (1.0 / vol, 1.0 / vol))
}

/// Uniform lattice with a cosine-perturbed density,
/// w(x) ∝ 1 + amplitude·cos(⟨wavevector, x⟩), renormalised.
///
/// Realises a Hölder-continuous density bounded away from 0 (amplitude < 1/2)
/// with a controllable seminorm. The construction is closed-form, so the
/// seed does not enter the weights; it is accepted for interface symmetry
/// with stochastic families and recorded by callers.
pub fn holder_perturbed(
    d: usize,
    lo: &[f64],
    hi: &[f64],
    n_per_axis: usize,
    amplitude: f64,
    wavevector: &[f64],
    _seed: u64,
) -> Result<DiscreteMeasure> {
    if !(0.0..0.5).contains(&amplitude) {
        return Err(Error::InvalidInput(format!(
            "amplitude must lie in [0, 0.5), got {amplitude}"
        )));
    }
    if wavevector.len() != d {
        return Err(Error::InvalidInput("wavevector length must equal d".into()));
    }
    let base = uniform_on_box(d, lo, hi, n_per_axis)?;
    let n = base.len();
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let phase: f64 = base.point(i).iter().zip(wavevector).map(|(x, k)| x * k).sum();
        weights.push(1.0 + amplitude * phase.cos());
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    DiscreteMeasure::new(
        d,
        base.points.clone(),
        weights,
        base.grid_spacing(),
        ((1.0 - amplitude) / vol, (1.0 + amplitude) / vol),
    )
}

/// Affine image x ↦ A x + b with weights scaled by `mass_scale`.
///
/// Used for the rescaling audits: passing A⁻¹ realises λ_s = κ (Q₁)_# λ with
/// Q₁(x) = A⁻¹ x. The lattice spacing survives only when A is a scalar
/// multiple of the identity; otherwise the result is marked unstructured.
pub fn pushforward_affine(
    m: &DiscreteMeasure,
    a: &[f64], // d*d row-major
    b: &[f64],
    mass_scale: f64,
) -> Result<DiscreteMeasure> {
    let d = m.dim();
    if a.len() != d * d || b.len() != d {
        return Err(Error::InvalidInput("matrix/offset shape mismatch".into()));
    }
    if !(mass_scale > 0.0) {
        return Err(Error::InvalidInput("mass_scale must be > 0".into()));
    }
    let det = det_general(a, d);
    if det.abs() < 1e-14 {
        return Err(Error::InvalidInput("singular matrix in pushforward".into()));
    }
    let mut points = Vec::with_capacity(m.points.len());
    for i in 0..m.len() {
        let x = m.point(i);
        for r in 0..d {
            let mut v = b[r];
            for c in 0..d {
                v += a[r * d + c] * x[c];
            }
            points.push(v);
        }
    }
    let weights: Vec<f64> = m.weights.iter().map(|w| w * mass_scale).collect();
    let spacing = scalar_multiple_of_identity(a, d)
        .map(|c| m.grid_spacing() * c.abs())
        .unwrap_or(0.0);
    let (dl, du) = m.density_bounds();
    let jac = det.abs();
    DiscreteMeasure::new(
        d,
        points,
        weights,
        spacing,
        (dl * mass_scale / jac, du * mass_scale / jac),
    )
}

fn scalar_multiple_of_identity(a: &[f64], d: usize) -> Option<f64> {
    let c = a[0];
    for r in 0..d {
        for k in 0..d {
            let expect = if r == k { c } else { 0.0 };
            if (a[r * d + k] - expect).abs() > 1e-14 * (1.0 + c.abs()) {
                return None;
            }
        }
    }
    Some(c)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub(crate) fn det_general(a: &[f64], d: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..d {
        let mut piv = col;
        for r in col + 1..d {
            if m[r * d + col].abs() > m[piv * d + col].abs() {
                piv = r;
            }
        }
        if m[piv * d + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for k in 0..d {
                m.swap(col * d + k, piv * d + k);
            }
            det = -det;
        }
        det *= m[col * d + col];
        for r in col + 1..d {
            let f = m[r * d + col] / m[col * d + col];
            for k in col..d {
                m[r * d + k] -= f * m[col * d + k];
            }
        }
    }
    det
}

/// Solves A x = rhs by Gaussian elimination (small d).
pub(crate) fn solve_linear(a: &[f64], d: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = rhs.to_vec();
    for col in 0..d {
        let mut piv = col;
        for r in col + 1..d {
            if m[r * d + col].abs() > m[piv * d + col].abs() {
                piv = r;
            }
        }
        if m[piv * d + col].abs() < 1e-14 {
            return Err(Error::InvalidInput("singular matrix".into()));
        }
        if piv != col {
            for k in 0..d {
                m.swap(col * d + k, piv * d + k);
            }
            x.swap(col, piv);
        }
        for r in col + 1..d {
            let f = m[r * d + col] / m[col * d + col];
            for k in col..d {
                m[r * d + k] -= f * m[col * d + k];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..d).rev() {
        for r in 0..col {
            let f = m[r * d + col] / m[col * d + col];
            x[r] -= f * x[col];
        }
        x[col] /= m[col * d + col];
    }
    Ok(x)
}
