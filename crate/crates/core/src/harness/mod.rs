//! Experiment configs, sweeps over sample sizes, CSV persistence and rate
//! tables.

mod config;
mod record;

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{AlgorithmTag, ExperimentConfig, MRule};
pub use record::{read_records, write_records, RunRecord, COLUMNS};

use crate::error::{Error, Result};
use crate::eval::{
    excess_risk_exact, excess_risk_mc, fit_rate_with_burn_in, mean_se, theory_exponent, RateFit, RiskReport,
};
use crate::filter::{FilterSpec, FilterTag};
use crate::kernel::KernelSpec;
use crate::problem::{fmt_f64, SpectralProblem, KAPPA_SAFETY};
use crate::seed;
use crate::train::{
    partition_data, plan_parameters, train_sa, train_sgm_on, Algorithm, AveragedModel, PlanRequest, Scales, TrainPlan,
};

pub const VERSION: &str = concat!("kdc-v", env!("CARGO_PKG_VERSION"));

/// Seed of the dataset used by replication `rep` at sample size `n_total`.
/// Independent of the algorithm, so different estimators see the same data.
pub fn data_seed(base_seed: u64, n_total: usize, rep: usize) -> u64 {
    seed::derive(seed::derive(base_seed, n_total as u64), rep as u64)
}

pub fn kernel_for(cfg: &ExperimentConfig, problem: &Arc<SpectralProblem>) -> Result<KernelSpec> {
    match cfg.bandwidth {
        Some(h) => KernelSpec::gaussian(h),
        None => Ok(KernelSpec::spectral(problem)),
    }
}

/// Filter used by the spectral algorithm at regularization `lambda`.
///
/// Landweber runs `ceil(1 / (eta lambda))` constant steps `eta = 1/kappa^2`,
/// so that its effective regularization matches `lambda`.
pub fn filter_for(tag: FilterTag, lambda: f64, kappa_sq: f64, zeta: f64) -> Result<FilterSpec> {
    let tau = zeta.max(1.0);
    let spec = match tag {
        FilterTag::Tikhonov => FilterSpec::tikhonov(),
        FilterTag::TikhonovBc => FilterSpec::tikhonov_bias_corrected(),
        FilterTag::Cutoff => FilterSpec::cutoff(tau),
        FilterTag::Landweber => {
            let eta = 1.0 / kappa_sq;
            let t = (1.0 / (eta * lambda)).ceil().max(1.0) as usize;
            FilterSpec::landweber_constant(eta, t, tau.max(std::f64::consts::E))?
        }
    };
    Ok(spec.with_kappa_sq(kappa_sq))
}

/// Fully resolved parameters for one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub n_total: usize,
    pub m: usize,
    pub plan: TrainPlan,
    pub filter: Option<FilterSpec>,
}

pub fn resolve_run(cfg: &ExperimentConfig, kernel: &KernelSpec, n_total: usize) -> Result<ResolvedRun> {
    let m = cfg.m_rule.resolve(n_total);
    let kappa_sq = kernel.kappa_sq() * KAPPA_SAFETY;
    let req = PlanRequest {
        regime: cfg.regime()?,
        n_total,
        partitions: m,
        zeta: cfg.zeta,
        gamma: cfg.gamma,
        scales: Scales { step: cfg.scale, batch: cfg.batch_scale, iterations: cfg.iter_scale },
        kappa_sq: Some(kappa_sq),
        theory_compliant: cfg.theory_compliant,
        filter: cfg.filter_tag()?,
        base_seed: cfg.base_seed,
    };
    let mut plan = plan_parameters(&req)?;
    let filter = match &mut plan.algorithm {
        Algorithm::Sgm(sgm) => {
            if let Some(b) = cfg.batch_size {
                sgm.batch_size = b;
            }
            if let Some(t) = cfg.iterations {
                sgm.iterations = t;
            }
            if let Some(eta) = cfg.step_size {
                sgm.step_schedule = crate::train::StepSchedule::Constant(eta);
                plan.nominal_step = Some(eta);
                plan.step_clamped = false;
            }
            sgm.validate(n_total, kappa_sq, cfg.theory_compliant)?;
            None
        }
        Algorithm::Sa { filter, lambda, .. } => Some(filter_for(*filter, *lambda, kappa_sq, cfg.zeta)?),
    };
    Ok(ResolvedRun { n_total, m, plan, filter })
}

/// Train one replication on a dataset drawn from `data_seed`.
pub fn train_once(
    problem: &SpectralProblem,
    kernel: &KernelSpec,
    run: &ResolvedRun,
    data_seed: u64,
) -> Result<AveragedModel> {
    let ds = problem.sample(run.n_total, data_seed)?;
    let partition_seed = seed::derive(data_seed, 1);
    match (&run.plan.algorithm, &run.filter) {
        (Algorithm::Sgm(sgm), _) => {
            let parts = partition_data(&ds, sgm.partitions, partition_seed)?;
            let cfg = crate::train::SgmConfig { base_seed: seed::derive(data_seed, 2), ..sgm.clone() };
            train_sgm_on(&parts, &cfg, kernel)
        }
        (Algorithm::Sa { partitions, lambda, .. }, Some(filter)) => {
            train_sa(&ds, *partitions, filter, *lambda, kernel, partition_seed)
        }
        (Algorithm::Sa { .. }, None) => Err(Error::InvalidParameter("spectral run without a filter".into())),
    }
}

/// Exact risk for the spectral kernel, Monte Carlo otherwise.
pub fn risk_of(
    cfg: &ExperimentConfig,
    problem: &SpectralProblem,
    kernel: &KernelSpec,
    model: &AveragedModel,
    data_seed: u64,
) -> Result<RiskReport> {
    match kernel {
        KernelSpec::SpectralTruncated(_) => excess_risk_exact(model, kernel, problem),
        KernelSpec::Gaussian { .. } => excess_risk_mc(model, kernel, problem, cfg.n_test, seed::derive(data_seed, 3)),
    }
}

fn base_record(cfg: &ExperimentConfig, n_total: usize) -> RunRecord {
    RunRecord {
        n_total,
        m: cfg.m_rule.resolve(n_total),
        requested_beta: cfg.m_rule.beta(),
        dim: cfg.dim,
        gamma: cfg.gamma,
        zeta: cfg.zeta,
        source_norm: cfg.source_norm,
        noise_sd: cfg.noise_sd,
        algorithm: cfg.algorithm().map(|a| a.as_str().to_string()).unwrap_or_default(),
        regime: cfg.regime.clone(),
        filter: String::new(),
        batch_size: None,
        iterations: None,
        step_size: None,
        lambda: None,
        scale: cfg.scale,
        replications: cfg.replications,
        base_seed: cfg.base_seed,
        risk_mean: f64::NAN,
        risk_se: f64::NAN,
        risk_method: if cfg.bandwidth.is_some() { "monte_carlo" } else { "spectral_exact" }.to_string(),
        step_clamped: false,
        partition_warning: false,
        wall_ms: 0,
        version: VERSION.to_string(),
        error: None,
    }
}

fn run_point(cfg: &ExperimentConfig, problem: &Arc<SpectralProblem>, kernel: &KernelSpec, n_total: usize) -> RunRecord {
    let start = Instant::now();
    let mut rec = base_record(cfg, n_total);
    let outcome = resolve_run(cfg, kernel, n_total).and_then(|run| {
        rec.m = run.m;
        rec.step_clamped = run.plan.step_clamped;
        rec.partition_warning = run.plan.partition_warning;
        match &run.plan.algorithm {
            Algorithm::Sgm(s) => {
                rec.batch_size = Some(s.batch_size);
                rec.iterations = Some(s.iterations);
                rec.step_size = Some(s.step_schedule.max_step());
            }
            Algorithm::Sa { filter, lambda, .. } => {
                rec.filter = filter.as_str().to_string();
                rec.lambda = Some(*lambda);
            }
        }
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let ds = data_seed(cfg.base_seed, n_total, rep);
                let model = train_once(problem, kernel, &run, ds)?;
                Ok(risk_of(cfg, problem, kernel, &model, ds)?.excess_risk)
            })
            .collect::<Result<Vec<f64>>>()
    });
    match outcome {
        Ok(risks) => {
            let (mean, se) = mean_se(&risks);
            rec.risk_mean = mean;
            rec.risk_se = se;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec.wall_ms = start.elapsed().as_millis() as u64;
    rec
}

/// Run every sample size in the config. Errors are recorded per row; records
/// come back ordered by `(N, m)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let problem = Arc::new(cfg.problem()?);
    let kernel = kernel_for(cfg, &problem)?;
    let mut records: Vec<RunRecord> = cfg.n_list.par_iter().map(|&n| run_point(cfg, &problem, &kernel, n)).collect();
    records.sort_by_key(|r| (r.n_total, r.m));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub fit: RateFit,
    pub theory_exponent: f64,
    /// `slope - theory_exponent`.
    pub gap: f64,
    /// Successful records as `(N, risk_mean, risk_se)`.
    pub rows: Vec<(usize, f64, f64)>,
}

impl RateTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["N", "risk_mean", "risk_se", "log_N", "log_risk"])?;
        for &(n, mean, se) in &self.rows {
            out.write_record([
                n.to_string(),
                fmt_f64(mean),
                fmt_f64(se),
                fmt_f64((n as f64).ln()),
                fmt_f64(mean.ln()),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "slope {:.4} (r^2 {:.4}), theory exponent {:.4}, gap {:+.4}",
            self.fit.slope, self.fit.r_squared, self.theory_exponent, self.gap
        )
    }
}

/// Fit the rate on the successful records and optionally write
/// `rate_fit.csv` into `out_dir`.
pub fn emit_rate_table(records: &[RunRecord], burn_in: usize, out_dir: Option<&Path>) -> Result<RateTable> {
    let ok: Vec<&RunRecord> =
        records.iter().filter(|r| r.error.is_none() && r.risk_mean > 0.0 && r.risk_mean.is_finite()).collect();
    let mut distinct: Vec<usize> = ok.iter().map(|r| r.n_total).collect();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!("need 3 successful sample sizes, have {}", distinct.len())));
    }
    let first = ok[0];
    let theory = theory_exponent(first.zeta, first.gamma)?;
    let points: Vec<(f64, f64)> = ok.iter().map(|r| (r.n_total as f64, r.risk_mean)).collect();
    let fit = fit_rate_with_burn_in(&points, burn_in)?;
    let table = RateTable {
        gap: fit.slope - theory,
        theory_exponent: theory,
        fit,
        rows: ok.iter().map(|r| (r.n_total, r.risk_mean, r.risk_se)).collect(),
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        table.write_csv(std::fs::File::create(dir.join("rate_fit.csv"))?)?;
    }
    Ok(table)
}
