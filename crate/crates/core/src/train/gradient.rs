use rand::Rng;

use super::{LocalModel, SgmConfig, StepSchedule, Subset};
use crate::error::{invalid, Error, Result};
use crate::filter::landweber_value;
use crate::kernel::KernelSpec;
use crate::problem::SpectralProblem;
use crate::seed;

/// Largest coefficient magnitude tolerated before a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

fn check_finite(alpha: &[f64], iteration: usize) -> Result<()> {
    for a in alpha {
        if !a.is_finite() || a.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { iteration, magnitude: a.abs() });
        }
    }
    Ok(())
}

/// Mini-batch multi-pass SGM on one partition, in coefficient space.
///
/// Iteration `t` draws `b` indices i.i.d. uniform on the partition from the
/// stream seeded by `partition_seed(base_seed, index)`, computes every
/// residual `f_t(x_i) - y_i` against the current coefficients, then applies
/// `alpha_i -= eta_t r_i / b` in draw order.
pub fn sgm_local(sub: &Subset, cfg: &SgmConfig, kernel: &KernelSpec) -> Result<LocalModel> {
    let n = sub.len();
    if n == 0 {
        return Err(invalid("empty partition"));
    }
    if cfg.batch_size == 0 {
        return Err(invalid("batch size must be at least 1"));
    }
    let steps = cfg.step_schedule.steps(cfg.iterations)?;
    let gram = kernel.gram(&sub.inputs)?;
    let mut rng = seed::rng(seed::partition_seed(cfg.base_seed, sub.index));
    let b = cfg.batch_size;
    let inv_b = 1.0 / b as f64;

    let mut alpha = vec![0.0; n];
    let mut drawn = vec![0usize; b];
    let mut resid = vec![0.0; b];
    for (t, &eta) in steps.iter().enumerate() {
        for (slot, r) in drawn.iter_mut().zip(resid.iter_mut()) {
            let i = rng.random_range(0..n);
            *slot = i;
            let fx: f64 = gram.row(i).iter().zip(&alpha).map(|(k, a)| k * a).sum();
            *r = fx - sub.labels[i];
        }
        for (&i, &r) in drawn.iter().zip(&resid) {
            alpha[i] -= eta * r * inv_b;
            let a = alpha[i];
            if !a.is_finite() || a.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Divergence { iteration: t + 1, magnitude: a.abs() });
            }
        }
    }
    Ok(LocalModel { inputs: sub.inputs.clone(), coeffs: alpha, partition_index: sub.index })
}

fn gradient_recursion(inputs: &[f64], labels: &[f64], steps: &[f64], kernel: &KernelSpec) -> Result<Vec<f64>> {
    let n = inputs.len();
    if n == 0 {
        return Err(invalid("empty partition"));
    }
    let mut alpha = vec![0.0; n];
    if steps.is_empty() {
        return Ok(alpha);
    }
    let gram = kernel.gram(inputs)?;
    let inv_n = 1.0 / n as f64;
    let mut grad = vec![0.0; n];
    for (t, &eta) in steps.iter().enumerate() {
        for (j, g) in grad.iter_mut().enumerate() {
            let fx: f64 = gram.row(j).iter().zip(&alpha).map(|(k, a)| k * a).sum();
            *g = (fx - labels[j]) * inv_n;
        }
        for (a, g) in alpha.iter_mut().zip(&grad) {
            *a -= eta * g;
        }
        check_finite(&alpha, t + 1)?;
    }
    Ok(alpha)
}

/// Full-gradient method on one partition:
/// `alpha <- alpha - eta_t ((1/n) Gram alpha - y / n)` for `t` steps.
pub fn gm_local(sub: &Subset, schedule: &StepSchedule, t: usize, kernel: &KernelSpec) -> Result<LocalModel> {
    let steps = schedule.steps(t)?;
    let coeffs = gradient_recursion(&sub.inputs, &sub.labels, &steps, kernel)?;
    Ok(LocalModel { inputs: sub.inputs.clone(), coeffs, partition_index: sub.index })
}

/// Gradient method driven by the noise-free values `f_rho(x_j)`.
pub fn pseudo_gm_local(
    inputs: &[f64],
    partition_index: usize,
    problem: &SpectralProblem,
    schedule: &StepSchedule,
    t: usize,
    kernel: &KernelSpec,
) -> Result<LocalModel> {
    let labels = inputs.iter().map(|&x| problem.regression_value(x)).collect::<Result<Vec<_>>>()?;
    let steps = schedule.steps(t)?;
    let coeffs = gradient_recursion(inputs, &labels, &steps, kernel)?;
    Ok(LocalModel { inputs: inputs.to_vec(), coeffs, partition_index })
}

/// Per-mode multipliers `G_t(sigma_i)` of the population gradient sequence
/// `r_{t+1} = G_t(L) S^* f_rho`.
pub fn population_sequence(problem: &SpectralProblem, schedule: &StepSchedule, t: usize) -> Result<Vec<f64>> {
    let steps = schedule.steps(t)?;
    Ok(problem.eigenvalues.iter().map(|&s| landweber_value(&steps, s)).collect())
}

/// `||S r_{t+1} - f_rho||^2 = sum_i (sigma_i G_t(sigma_i) - 1)^2 a_i^2`.
pub fn population_bias(problem: &SpectralProblem, multipliers: &[f64]) -> f64 {
    problem
        .eigenvalues
        .iter()
        .zip(multipliers)
        .zip(&problem.target_coeffs)
        .map(|((s, g), a)| {
            let d = s * g - 1.0;
            d * d * a * a
        })
        .sum()
}
