//! Named test families used by scans, audits and the CLI.
//!
//! Each instance is a thin parameterisation of the measure constructors:
//!
//! | name          | λ                          | μ                        | exact map |
//! |---------------|----------------------------|--------------------------|-----------|
//! | translation1d | uniform on [0,1]           | uniform on [1,2]         | x + 1     |
//! | dilation1d    | uniform on [0,1]           | uniform on [0,2]         | 2x        |
//! | translation2d | uniform on [0,1]²          | shifted by (1,1)         | x + (1,1) |
//! | holder1d      | cosine-perturbed on [0,1]  | uniform on [0,1]         | monotone  |
//! | holder2d      | cosine-perturbed on [0,1]² | uniform on [0,1]²        | —         |
//! | selfmap       | uniform on [0,1]           | same measure             | identity  |

use crate::baseline::{exact_1d, exact_assignment, ExactSolution};
use crate::error::{Error, Result};
use crate::measures::{holder_perturbed, uniform_on_box, DiscreteMeasure, InteriorWindow};

pub const INSTANCE_NAMES: [&str; 6] = [
    "translation1d",
    "dilation1d",
    "translation2d",
    "holder1d",
    "holder2d",
    "selfmap",
];

/// A built instance: marginals, default interior window, ambient dimension.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub lambda: DiscreteMeasure,
    pub mu: DiscreteMeasure,
    pub window: InteriorWindow,
    pub dim: usize,
}

impl Instance {
    /// Exact unregularised baseline where one is available: the monotone
    /// rearrangement in 1D, the assignment solver for uniform 2D instances.
    pub fn exact(&self) -> Result<ExactSolution> {
        if self.dim == 1 {
            exact_1d(&self.lambda, &self.mu)
        } else if self.name == "translation2d" {
            exact_assignment(&self.lambda, &self.mu)
        } else {
            Err(Error::InvalidInput(format!(
                "no exact baseline for instance '{}'",
                self.name
            )))
        }
    }
}

/// Ambient dimension of a registry instance, without building it.
pub fn instance_dim(name: &str) -> Result<usize> {
    match name {
        "translation1d" | "dilation1d" | "holder1d" | "selfmap" => Ok(1),
        "translation2d" | "holder2d" => Ok(2),
        other => Err(Error::InvalidInput(format!(
            "unknown instance '{other}'; known: {}",
            INSTANCE_NAMES.join(", ")
        ))),
    }
}

/// Builds a registry instance at the requested resolution.
///
/// `amplitude` and `seed` only act on the holder families.
pub fn build_instance(
    name: &str,
    n_per_axis: usize,
    amplitude: f64,
    seed: u64,
) -> Result<Instance> {
    let tau = std::f64::consts::TAU;
    let (lambda, mu, dim) = match name {
        "translation1d" => (
            uniform_on_box(1, &[0.0], &[1.0], n_per_axis)?,
            uniform_on_box(1, &[1.0], &[2.0], n_per_axis)?,
            1,
        ),
        "dilation1d" => (
            uniform_on_box(1, &[0.0], &[1.0], n_per_axis)?,
            uniform_on_box(1, &[0.0], &[2.0], n_per_axis)?,
            1,
        ),
        "translation2d" => {
            let l = uniform_on_box(2, &[0.0, 0.0], &[1.0, 1.0], n_per_axis)?;
            let m = uniform_on_box(2, &[1.0, 1.0], &[2.0, 2.0], n_per_axis)?;
            (l, m, 2)
        }
        "holder1d" => (
            holder_perturbed(1, &[0.0], &[1.0], n_per_axis, amplitude, &[tau], seed)?,
            uniform_on_box(1, &[0.0], &[1.0], n_per_axis)?,
            1,
        ),
        "holder2d" => (
            holder_perturbed(
                2,
                &[0.0, 0.0],
                &[1.0, 1.0],
                n_per_axis,
                amplitude,
                &[tau, tau],
                seed,
            )?,
            uniform_on_box(2, &[0.0, 0.0], &[1.0, 1.0], n_per_axis)?,
            2,
        ),
        "selfmap" => {
            let l = uniform_on_box(1, &[0.0], &[1.0], n_per_axis)?;
            (l.clone(), l, 1)
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown instance '{other}'; known: {}",
                INSTANCE_NAMES.join(", ")
            )))
        }
    };
    let window = lambda.default_window();
    Ok(Instance {
        name: name.to_string(),
        lambda,
        mu,
        window,
        dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_registry_instances_build() {
        for name in INSTANCE_NAMES {
            let n = if name.ends_with("2d") { 8 } else { 32 };
            let inst = build_instance(name, n, 0.3, 7).unwrap();
            inst.lambda.validate().unwrap();
            inst.mu.validate().unwrap();
            assert!(inst.lambda.is_probability());
            assert!(inst.mu.is_probability());
        }
        assert!(build_instance("nope", 8, 0.0, 0).is_err());
    }

    #[test]
    fn exact_baselines_exist_where_promised() {
        assert!(build_instance("translation1d", 16, 0.0, 0).unwrap().exact().is_ok());
        assert!(build_instance("translation2d", 4, 0.0, 0).unwrap().exact().is_ok());
        assert!(build_instance("holder2d", 4, 0.2, 0).unwrap().exact().is_err());
    }

    #[test]
    fn translation2d_exact_cost_is_dimension() {
        let inst = build_instance("translation2d", 6, 0.0, 0).unwrap();
        let sol = inst.exact().unwrap();
        assert!((sol.cost - 2.0).abs() < 1e-9);
    }
}
