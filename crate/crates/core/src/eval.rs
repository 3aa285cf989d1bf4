//! Excess risk, the bias / sample-variance / computational-variance split,
//! and log-log rate fits.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::filter::FilterSpec;
use crate::kernel::KernelSpec;
use crate::problem::SpectralProblem;
use crate::seed;
use crate::train::{
    partition_data, train_gm_on, train_pseudo_gm_on, train_sgm_on, AveragedModel, LocalModel, SgmConfig,
};

/// Anything that predicts as a finite kernel expansion.
pub trait Predictor: Sync {
    fn predict(&self, kernel: &KernelSpec, x: f64) -> Result<f64>;
    /// Coefficients of the predictor in the problem's eigenbasis.
    fn spectral_coefficients(&self, problem: &SpectralProblem) -> Vec<f64>;
}

impl Predictor for LocalModel {
    fn predict(&self, kernel: &KernelSpec, x: f64) -> Result<f64> {
        LocalModel::predict(self, kernel, x)
    }

    fn spectral_coefficients(&self, problem: &SpectralProblem) -> Vec<f64> {
        LocalModel::spectral_coefficients(self, problem)
    }
}

impl Predictor for AveragedModel {
    fn predict(&self, kernel: &KernelSpec, x: f64) -> Result<f64> {
        AveragedModel::predict(self, kernel, x)
    }

    fn spectral_coefficients(&self, problem: &SpectralProblem) -> Vec<f64> {
        AveragedModel::spectral_coefficients(self, problem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskMethod {
    SpectralExact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskReport {
    pub excess_risk: f64,
    pub method: RiskMethod,
    /// Zero for exact reports.
    pub mc_std_error: f64,
}

fn check_kernel(kernel: &KernelSpec, problem: &SpectralProblem) -> Result<()> {
    match kernel.problem() {
        Some(p) if p.dim == problem.dim && p.eigenvalues == problem.eigenvalues => Ok(()),
        _ => Err(Error::KernelMismatch),
    }
}

/// `sum_i (c_i - a_i)^2`: squared distance in `L^2` between a function with
/// eigen-coefficients `c` and the regression function.
pub fn spectral_distance_sq(coeffs: &[f64], problem: &SpectralProblem) -> f64 {
    coeffs.iter().zip(&problem.target_coeffs).map(|(c, a)| (c - a) * (c - a)).sum()
}

fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact excess risk of a model trained with the problem's truncated kernel.
pub fn excess_risk_exact<M: Predictor>(
    model: &M,
    kernel: &KernelSpec,
    problem: &SpectralProblem,
) -> Result<RiskReport> {
    check_kernel(kernel, problem)?;
    let c = model.spectral_coefficients(problem);
    Ok(RiskReport {
        excess_risk: spectral_distance_sq(&c, problem),
        method: RiskMethod::SpectralExact,
        mc_std_error: 0.0,
    })
}

/// Monte Carlo estimate of `E (f(x) - f_rho(x))^2` over `n_test` uniform draws.
pub fn excess_risk_mc<M: Predictor>(
    model: &M,
    kernel: &KernelSpec,
    problem: &SpectralProblem,
    n_test: usize,
    seed: u64,
) -> Result<RiskReport> {
    if n_test < 100 {
        return Err(invalid(format!("n_test must be at least 100, got {n_test}")));
    }
    let mut rng = seed::rng(seed);
    let xs: Vec<f64> = (0..n_test).map(|_| rng.random::<f64>()).collect();
    let sq = xs
        .par_iter()
        .map(|&x| {
            let d = model.predict(kernel, x)? - problem.regression_value(x)?;
            Ok(d * d)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, se) = mean_se(&sq);
    Ok(RiskReport { excess_risk: mean, method: RiskMethod::MonteCarlo, mc_std_error: se })
}

/// Sample mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    fn of(v: &[f64]) -> Self {
        let (mean, se) = mean_se(v);
        Estimate { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub total: Estimate,
    pub bias: Estimate,
    pub sample_var: Estimate,
    pub comp_var: Estimate,
    /// Per-draw `total - bias - sample_var - comp_var`.
    pub residual: Estimate,
    pub n_data: usize,
    pub n_index: usize,
}

impl DecompositionReport {
    /// `total - (bias + sample_var + comp_var)`.
    pub fn gap(&self) -> f64 {
        self.total.mean - (self.bias.mean + self.sample_var.mean + self.comp_var.mean)
    }

    /// Root sum of squares of the four component standard errors.
    pub fn combined_se(&self) -> f64 {
        [self.total.se, self.bias.se, self.sample_var.se, self.comp_var.se].iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

/// How the stochastic iterate is produced in [`decompose_error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Sgm,
    /// Replace SGM by the full-gradient method (no computational variance).
    FullGradient,
}

pub const MIN_DATA_REPLICATIONS: usize = 50;
pub const MIN_INDEX_REPLICATIONS: usize = 20;

/// Nested Monte Carlo estimate of the three-term error decomposition.
///
/// For each of `n_data` datasets drawn from `cfg.base_seed`, the averaged
/// pseudo-GM `h`, GM `g` and `n_index` SGM runs `f` share one partition. The
/// components are averaged first over index seeds, then over datasets.
pub fn decompose_error(
    problem: &SpectralProblem,
    n_total: usize,
    cfg: &SgmConfig,
    replications: (usize, usize),
    sampler: Sampler,
) -> Result<DecompositionReport> {
    let (n_data, n_index) = replications;
    if n_data < MIN_DATA_REPLICATIONS || n_index < MIN_INDEX_REPLICATIONS {
        return Err(invalid(format!(
            "decomposition needs at least ({MIN_DATA_REPLICATIONS}, {MIN_INDEX_REPLICATIONS}) replications, got ({n_data}, {n_index})"
        )));
    }
    decompose_unchecked(problem, n_total, cfg, replications, sampler)
}

pub(crate) fn decompose_unchecked(
    problem: &SpectralProblem,
    n_total: usize,
    cfg: &SgmConfig,
    (n_data, n_index): (usize, usize),
    sampler: Sampler,
) -> Result<DecompositionReport> {
    let p = std::sync::Arc::new(problem.clone());
    let kernel = KernelSpec::spectral(&p);
    let schedule = &cfg.step_schedule;
    let t = cfg.iterations;

    let rows = (0..n_data)
        .into_par_iter()
        .map(|d| {
            let data_seed = seed::derive(cfg.base_seed, d as u64);
            let ds = problem.sample(n_total, data_seed)?;
            let parts = partition_data(&ds, cfg.partitions, seed::derive(data_seed, 1))?;
            let h = train_pseudo_gm_on(&parts, problem, schedule, t, &kernel)?.spectral_coefficients(problem);
            let g = train_gm_on(&parts, schedule, t, &kernel)?.spectral_coefficients(problem);
            let mut total = 0.0;
            let mut comp = 0.0;
            for r in 0..n_index {
                let f = match sampler {
                    Sampler::Sgm => {
                        let run = SgmConfig { base_seed: seed::derive(data_seed, 2 + r as u64), ..cfg.clone() };
                        train_sgm_on(&parts, &run, &kernel)?.spectral_coefficients(problem)
                    }
                    Sampler::FullGradient => g.clone(),
                };
                total += spectral_distance_sq(&f, problem);
                comp += distance_sq(&f, &g);
            }
            let total = total / n_index as f64;
            let comp = comp / n_index as f64;
            let bias = spectral_distance_sq(&h, problem);
            let sample = distance_sq(&g, &h);
            Ok([total, bias, sample, comp, total - bias - sample - comp])
        })
        .collect::<Result<Vec<[f64; 5]>>>()?;

    let col = |k: usize| Estimate::of(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    Ok(DecompositionReport {
        total: col(0),
        bias: col(1),
        sample_var: col(2),
        comp_var: col(3),
        residual: col(4),
        n_data,
        n_index,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(ln N, ln risk)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    /// Number of smallest-`N` points excluded before fitting.
    pub burn_in: usize,
}

/// Ordinary least squares of `ln risk` on `ln N`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    fit_rate_with_burn_in(points, 0)
}

pub fn fit_rate_with_burn_in(points: &[(f64, f64)], burn_in: usize) -> Result<RateFit> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let used = sorted.get(burn_in..).unwrap_or(&[]);
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 points, have {}", used.len())));
    }
    if let Some(bad) = used.iter().find(|(n, r)| !(*n > 0.0 && *r > 0.0 && r.is_finite())) {
        return Err(invalid(format!("N and risk must be positive, got {bad:?}")));
    }
    let logs: Vec<(f64, f64)> = used.iter().map(|(n, r)| (n.ln(), r.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("all N are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit { slope, intercept, r_squared, points: logs, burn_in })
}

/// Predicted exponent of the excess risk in `N`: `-2 zeta / (2 zeta + gamma)`
/// when `2 zeta + gamma > 1`, else `-2 zeta`.
pub fn theory_exponent(zeta: f64, gamma: f64) -> Result<f64> {
    if !(zeta > 0.0) || !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("need zeta > 0 and gamma in [0, 1], got zeta={zeta}, gamma={gamma}")));
    }
    let r = 2.0 * zeta + gamma;
    Ok(if r > 1.0 { -2.0 * zeta / r } else { -2.0 * zeta })
}

/// `Q = 1 v [gamma (1/theta ^ ln n)]`.
pub fn theory_q(gamma: f64, theta: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&theta) || n < 2 {
        return Err(invalid(format!("need gamma, theta in [0, 1] and n >= 2, got {gamma}, {theta}, {n}")));
    }
    let inv = if theta == 0.0 { f64::INFINITY } else { 1.0 / theta };
    Ok(1.0f64.max(gamma * inv.min((n as f64).ln())))
}

/// Largest divisor of `n_total` not exceeding `cap` (at least 1).
pub fn divisor_at_most(n_total: usize, cap: usize) -> usize {
    let mut m = cap.clamp(1, n_total.max(1));
    while !n_total.is_multiple_of(m) {
        m -= 1;
    }
    m
}

/// Mean exact risk of distributed Tikhonov-type estimators over `reps` data
/// draws.
pub fn distributed_sa_risk(
    problem: &std::sync::Arc<SpectralProblem>,
    n_total: usize,
    m: usize,
    filter: &FilterSpec,
    lambda: f64,
    reps: usize,
    base_seed: u64,
) -> Result<Estimate> {
    let kernel = KernelSpec::spectral(problem);
    let risks = (0..reps)
        .into_par_iter()
        .map(|r| {
            let data_seed = seed::derive(base_seed, r as u64);
            let ds = problem.sample(n_total, data_seed)?;
            let model = crate::train::train_sa(&ds, m, filter, lambda, &kernel, seed::derive(data_seed, 1))?;
            Ok(excess_risk_exact(&model, &kernel, problem)?.excess_risk)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::of(&risks))
}

/// Risks of distributed Tikhonov at three partition counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionCheck {
    pub n_total: usize,
    pub lambda: f64,
    pub m_values: [usize; 3],
    pub risks: [Estimate; 3],
}

impl PartitionCheck {
    /// `risk(m_1) / risk(m_0)` and `risk(m_2) / risk(m_0)`.
    pub fn ratios(&self) -> (f64, f64) {
        (self.risks[1].mean / self.risks[0].mean, self.risks[2].mean / self.risks[0].mean)
    }

    /// Moderate split within a factor 3 of the single machine, heavy split
    /// worse by at least a factor 3.
    pub fn degradation_holds(&self) -> bool {
        let (moderate, heavy) = self.ratios();
        (1.0 / 3.0..=3.0).contains(&moderate) && heavy >= 3.0
    }
}

/// Compare `m = 1`, `m = floor(N^0.4)` (adjusted down to a divisor) and
/// `m = N / 2` for distributed Tikhonov with `lambda = N^(-1/(2 zeta + gamma))`.
pub fn partition_degradation(
    problem: &std::sync::Arc<SpectralProblem>,
    n_total: usize,
    reps: usize,
    base_seed: u64,
) -> Result<PartitionCheck> {
    let lambda = (n_total as f64).powf(-1.0 / (2.0 * problem.zeta + problem.gamma));
    let moderate = divisor_at_most(n_total, (n_total as f64).powf(0.4).floor() as usize);
    let m_values = [1, moderate, n_total / 2];
    let filter = FilterSpec::tikhonov();
    let mut risks = [Estimate { mean: 0.0, se: 0.0 }; 3];
    for (slot, &m) in risks.iter_mut().zip(&m_values) {
        *slot = distributed_sa_risk(problem, n_total, m, &filter, lambda, reps, base_seed)?;
    }
    Ok(PartitionCheck { n_total, lambda, m_values, risks })
}

/// Risks of distributed Tikhonov at `m = N^(0.8 bound)` and `m = N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationCheck {
    pub m_values: [usize; 2],
    pub risks: [Estimate; 2],
}

impl SaturationCheck {
    pub fn direction_holds(&self) -> bool {
        self.risks[0].mean <= self.risks[1].mean
    }
}

pub fn saturation_direction(
    problem: &std::sync::Arc<SpectralProblem>,
    n_total: usize,
    reps: usize,
    base_seed: u64,
) -> Result<SaturationCheck> {
    let r = 2.0 * problem.zeta + problem.gamma;
    let lambda = (n_total as f64).powf(-1.0 / r);
    let bound = (r - 1.0) / r;
    let moderate = divisor_at_most(n_total, (n_total as f64).powf(0.8 * bound).floor() as usize);
    let m_values = [moderate, n_total];
    let filter = FilterSpec::tikhonov();
    let a = distributed_sa_risk(problem, n_total, moderate, &filter, lambda, reps, base_seed)?;
    let b = distributed_sa_risk(problem, n_total, n_total, &filter, lambda, reps, base_seed)?;
    Ok(SaturationCheck { m_values, risks: [a, b] })
}
