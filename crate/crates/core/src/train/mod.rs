//! Local and distributed training.
//!
//! Every local estimator lives in the span of the kernel sections at its
//! partition's inputs, `f = sum_j alpha_j K(x_j, .)`, and is stored as the
//! coefficient vector `alpha`. The distributed estimator is the uniform
//! average of the `m` local ones.

mod gradient;
mod plan;
mod spectral;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::kernel::KernelSpec;
use crate::problem::{Dataset, SpectralProblem};
use crate::seed;

pub use gradient::{gm_local, population_bias, population_sequence, pseudo_gm_local, sgm_local, DIVERGENCE_LIMIT};
pub use plan::{check_step_condition, plan_parameters, Algorithm, PlanRequest, Regime, Scales, StepCheck, TrainPlan};
pub use spectral::sa_local;

#[derive(Debug, Clone, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    Explicit(Vec<f64>),
}

impl StepSchedule {
    /// Step sizes `eta_1..eta_t` for the first `t` iterations.
    pub fn steps(&self, t: usize) -> Result<Vec<f64>> {
        match self {
            StepSchedule::Constant(eta) => Ok(vec![*eta; t]),
            StepSchedule::Explicit(v) if v.len() >= t => Ok(v[..t].to_vec()),
            StepSchedule::Explicit(v) => {
                Err(invalid(format!("explicit schedule has {} steps, {t} requested", v.len())))
            }
        }
    }

    pub fn max_step(&self) -> f64 {
        match self {
            StepSchedule::Constant(eta) => *eta,
            StepSchedule::Explicit(v) => v.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgmConfig {
    pub partitions: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub step_schedule: StepSchedule,
    pub base_seed: u64,
}

impl SgmConfig {
    /// Check the configuration against a sample of `n_total` points and a
    /// kernel bound `kappa_sq`. With `theory_compliant`, a constant step must
    /// also satisfy `eta <= 1 / (4 kappa^2 max(1, ln T))`.
    pub fn validate(&self, n_total: usize, kappa_sq: f64, theory_compliant: bool) -> Result<()> {
        if self.partitions == 0 || self.batch_size == 0 || self.iterations == 0 {
            return Err(invalid("partitions, batch_size and iterations must be at least 1"));
        }
        if !n_total.is_multiple_of(self.partitions) {
            return Err(Error::Indivisible { n_total, partitions: self.partitions });
        }
        let n = n_total / self.partitions;
        if self.batch_size > n {
            return Err(invalid(format!("batch size {} exceeds local sample size {n}", self.batch_size)));
        }
        let steps = self.step_schedule.steps(self.iterations)?;
        let cap = 1.0 / kappa_sq;
        if let Some(bad) = steps.iter().find(|e| !(**e >= 0.0 && **e <= cap)) {
            return Err(invalid(format!("step size {bad} outside [0, 1/kappa^2 = {cap}]")));
        }
        if theory_compliant {
            if let StepSchedule::Constant(eta) = self.step_schedule {
                let bound = 1.0 / (4.0 * kappa_sq * (self.iterations as f64).ln().max(1.0));
                if eta > bound {
                    return Err(Error::ConstraintViolation(format!(
                        "step size {eta} exceeds 1/(4 kappa^2 log T) = {bound}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One partition of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub index: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<f64>,
}

impl Subset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Split `ds` into `m` disjoint blocks of `N / m` points after a seeded
/// uniform permutation.
pub fn partition_data(ds: &Dataset, m: usize, seed: u64) -> Result<Vec<Subset>> {
    let n_total = ds.len();
    if m == 0 {
        return Err(invalid("number of partitions must be at least 1"));
    }
    if n_total == 0 || !n_total.is_multiple_of(m) {
        return Err(Error::Indivisible { n_total, partitions: m });
    }
    let n = n_total / m;
    let mut perm: Vec<usize> = (0..n_total).collect();
    perm.shuffle(&mut seed::rng(seed));
    Ok(perm
        .chunks(n)
        .enumerate()
        .map(|(index, block)| Subset {
            index,
            inputs: block.iter().map(|&i| ds.inputs[i]).collect(),
            labels: block.iter().map(|&i| ds.labels[i]).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    pub inputs: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub partition_index: usize,
}

impl LocalModel {
    pub fn zero(inputs: Vec<f64>, partition_index: usize) -> Self {
        let coeffs = vec![0.0; inputs.len()];
        LocalModel { inputs, coeffs, partition_index }
    }

    pub fn predict(&self, kernel: &KernelSpec, x: f64) -> Result<f64> {
        let col = kernel.column(&self.inputs, x)?;
        Ok(col.iter().zip(&self.coeffs).map(|(k, a)| k * a).sum())
    }

    /// Coefficients of the predictor in the problem's eigenbasis:
    /// `c_i = sigma_i sum_j alpha_j phi_i(x_j)`.
    pub fn spectral_coefficients(&self, problem: &SpectralProblem) -> Vec<f64> {
        let mut out = vec![0.0; problem.dim];
        self.accumulate_spectral(problem, 1.0, &mut out);
        out
    }

    pub(crate) fn accumulate_spectral(&self, problem: &SpectralProblem, weight: f64, out: &mut [f64]) {
        let mut row = vec![0.0; problem.dim];
        for (&x, &a) in self.inputs.iter().zip(&self.coeffs) {
            crate::problem::basis_row(x, &mut row);
            let wa = weight * a;
            for (o, p) in out.iter_mut().zip(&row) {
                *o += wa * p;
            }
        }
        for (o, s) in out.iter_mut().zip(&problem.eigenvalues) {
            *o *= s;
        }
    }
}

/// Uniform average of local models.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedModel {
    pub locals: Vec<LocalModel>,
}

impl AveragedModel {
    pub fn partitions(&self) -> usize {
        self.locals.len()
    }

    pub fn predict(&self, kernel: &KernelSpec, x: f64) -> Result<f64> {
        let mut acc = 0.0;
        for local in &self.locals {
            acc += local.predict(kernel, x)?;
        }
        Ok(acc / self.locals.len() as f64)
    }

    pub fn spectral_coefficients(&self, problem: &SpectralProblem) -> Vec<f64> {
        let w = 1.0 / self.locals.len() as f64;
        let mut out = vec![0.0; problem.dim];
        for local in &self.locals {
            let mut part = vec![0.0; problem.dim];
            local.accumulate_spectral(problem, w, &mut part);
            for (o, p) in out.iter_mut().zip(part) {
                *o += p;
            }
        }
        out
    }
}

pub fn average_models(locals: Vec<LocalModel>) -> Result<AveragedModel> {
    if locals.is_empty() {
        return Err(Error::EmptyModels);
    }
    Ok(AveragedModel { locals })
}

/// Distributed SGM: partition, train every block with its own index stream,
/// average.
pub fn train_sgm(ds: &Dataset, cfg: &SgmConfig, kernel: &KernelSpec, partition_seed: u64) -> Result<AveragedModel> {
    let parts = partition_data(ds, cfg.partitions, partition_seed)?;
    train_sgm_on(&parts, cfg, kernel)
}

pub fn train_sgm_on(parts: &[Subset], cfg: &SgmConfig, kernel: &KernelSpec) -> Result<AveragedModel> {
    let locals = parts.par_iter().map(|s| sgm_local(s, cfg, kernel)).collect::<Result<Vec<_>>>()?;
    average_models(locals)
}

pub fn train_gm_on(parts: &[Subset], schedule: &StepSchedule, t: usize, kernel: &KernelSpec) -> Result<AveragedModel> {
    let locals = parts.par_iter().map(|s| gm_local(s, schedule, t, kernel)).collect::<Result<Vec<_>>>()?;
    average_models(locals)
}

pub fn train_pseudo_gm_on(
    parts: &[Subset],
    problem: &SpectralProblem,
    schedule: &StepSchedule,
    t: usize,
    kernel: &KernelSpec,
) -> Result<AveragedModel> {
    let locals = parts
        .par_iter()
        .map(|s| pseudo_gm_local(&s.inputs, s.index, problem, schedule, t, kernel))
        .collect::<Result<Vec<_>>>()?;
    average_models(locals)
}

/// Distributed spectral algorithm.
pub fn train_sa(
    ds: &Dataset,
    m: usize,
    filter: &crate::filter::FilterSpec,
    lambda: f64,
    kernel: &KernelSpec,
    partition_seed: u64,
) -> Result<AveragedModel> {
    let parts = partition_data(ds, m, partition_seed)?;
    let locals = parts.par_iter().map(|s| sa_local(s, filter, lambda, kernel)).collect::<Result<Vec<_>>>()?;
    average_models(locals)
}
