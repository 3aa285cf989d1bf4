use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use kdc::eval::{decompose_error, Sampler};
use kdc::filter::{landweber_bounds, validate_filter, FilterSpec, FilterTag};
use kdc::harness::{
    data_seed, emit_rate_table, filter_for, kernel_for, read_records, resolve_run, risk_of, run_experiment, train_once,
    write_records, ExperimentConfig,
};
use kdc::problem::{fmt_f64, log_grid, SpectralProblem};
use kdc::train::Algorithm;
use kdc::{Error, Result};

#[derive(Parser)]
#[command(name = "kdc", version, about = "Divide-and-conquer kernel regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `base_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic problem as JSON.
    GenProblem(Common),
    /// Draw a dataset and write it as CSV.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Sample size; defaults to the first entry of `n_list`.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Train one model and write its coefficients.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the full sweep over `n_list`.
    Sweep(Common),
    /// Estimate the bias / sample variance / computational variance split.
    Decompose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit the rate exponent on a records CSV.
    RateFit {
        #[command(flatten)]
        common: Common,
        /// Records CSV; defaults to the config's `output`.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Grid-check the qualification inequalities of a filter.
    ValidateFilters {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "all")]
        filter: String,
        #[arg(long, default_value_t = 200)]
        lambda_points: usize,
        #[arg(long, default_value_t = 200)]
        u_points: usize,
        #[arg(long, default_value_t = 1.0)]
        kappa_sq: f64,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let path = common.config.as_ref().ok_or_else(|| Error::InvalidParameter("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = common.seed {
        cfg.base_seed = s;
    }
    Ok(cfg)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(File::create(p)?)
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn configure_threads() -> Result<()> {
    let threads = match std::env::var("KDC_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| Error::InvalidParameter(format!("KDC_THREADS=`{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::GenProblem(common) => {
            let cfg = load(&common)?;
            writeln!(sink(common.out.as_deref())?, "{}", cfg.problem()?.to_json()?)?;
            Ok(true)
        }
        Command::Sample { common, n } => {
            let cfg = load(&common)?;
            let n = n.unwrap_or(cfg.n_list[0]);
            let ds = cfg.problem()?.sample(n, cfg.base_seed)?;
            ds.write_csv(sink(common.out.as_deref())?)?;
            Ok(true)
        }
        Command::Train { common, n } => {
            let cfg = load(&common)?;
            let n = n.unwrap_or(cfg.n_list[0]);
            let problem = Arc::new(cfg.problem()?);
            let kernel = kernel_for(&cfg, &problem)?;
            let run = resolve_run(&cfg, &kernel, n)?;
            let seed = data_seed(cfg.base_seed, n, 0);
            let model = train_once(&problem, &kernel, &run, seed)?;
            let risk = risk_of(&cfg, &problem, &kernel, &model, seed)?;
            let mut out = csv::Writer::from_writer(sink(common.out.as_deref())?);
            out.write_record(["partition", "x", "alpha"]).map_err(Error::from)?;
            for local in &model.locals {
                for (x, a) in local.inputs.iter().zip(&local.coeffs) {
                    out.write_record([local.partition_index.to_string(), fmt_f64(*x), fmt_f64(*a)])
                        .map_err(Error::from)?;
                }
            }
            out.flush()?;
            eprintln!("N={n} m={} excess_risk={}", run.m, fmt_f64(risk.excess_risk));
            Ok(true)
        }
        Command::Sweep(common) => {
            let cfg = load(&common)?;
            let records = run_experiment(&cfg)?;
            let out = common.out.clone().or_else(|| cfg.output.clone().map(PathBuf::from));
            write_records(&records, sink(out.as_deref())?)?;
            let ok = records.iter().all(|r| r.error.is_none());
            for r in records.iter().filter(|r| r.error.is_some()) {
                eprintln!("N={} m={}: {}", r.n_total, r.m, r.error.as_deref().unwrap_or_default());
            }
            let dir = out.as_deref().and_then(Path::parent).map(Path::to_path_buf);
            match emit_rate_table(&records, cfg.burn_in, dir.as_deref()) {
                Ok(t) => eprintln!("{}", t.summary()),
                Err(e) => eprintln!("rate fit skipped: {e}"),
            }
            Ok(ok)
        }
        Command::Decompose { common, n } => {
            let cfg = load(&common)?;
            let n = n.unwrap_or(cfg.n_list[0]);
            let problem = Arc::new(cfg.problem()?);
            let kernel = kernel_for(&cfg, &problem)?;
            let run = resolve_run(&cfg, &kernel, n)?;
            let Algorithm::Sgm(sgm) = &run.plan.algorithm else {
                return Err(Error::InvalidParameter("decompose needs an SGM regime".into()));
            };
            let sgm = kdc::SgmConfig { base_seed: cfg.base_seed, ..sgm.clone() };
            let r = decompose_error(&problem, n, &sgm, (cfg.decomp_n_data, cfg.decomp_n_index), Sampler::Sgm)?;
            let mut out = csv::Writer::from_writer(sink(common.out.as_deref())?);
            out.write_record(["component", "mean", "se"]).map_err(Error::from)?;
            for (name, e) in [
                ("total", r.total),
                ("bias", r.bias),
                ("sample_var", r.sample_var),
                ("comp_var", r.comp_var),
                ("residual", r.residual),
            ] {
                out.write_record([name.to_string(), fmt_f64(e.mean), fmt_f64(e.se)]).map_err(Error::from)?;
            }
            out.flush()?;
            eprintln!("gap {} combined SE {}", fmt_f64(r.gap()), fmt_f64(r.combined_se()));
            Ok(true)
        }
        Command::RateFit { common, records } => {
            let cfg = load(&common)?;
            let path = records
                .or_else(|| cfg.output.clone().map(PathBuf::from))
                .ok_or_else(|| Error::InvalidParameter("no records file given".into()))?;
            let recs = read_records(BufReader::new(File::open(&path)?))?;
            let dir = common.out.clone().or_else(|| path.parent().map(Path::to_path_buf));
            let table = emit_rate_table(&recs, cfg.burn_in, dir.as_deref())?;
            println!("{}", table.summary());
            Ok(true)
        }
        Command::ValidateFilters { common, filter, lambda_points, u_points, kappa_sq } => {
            let tags: Vec<FilterTag> = if filter == "all" { FilterTag::ALL.to_vec() } else { vec![filter.parse()?] };
            let (kappa_sq, zeta) = match &common.config {
                Some(_) => {
                    let p: SpectralProblem = load(&common)?.problem()?;
                    (p.kappa_sq_safe(), p.zeta)
                }
                None => (kappa_sq, 1.0),
            };
            let lambdas = log_grid(1e-6 * kappa_sq, kappa_sq, lambda_points);
            let us = log_grid(1e-6 * kappa_sq, kappa_sq, u_points);
            let alphas: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
            let mut out = csv::Writer::from_writer(sink(common.out.as_deref())?);
            out.write_record(["filter", "const_e", "const_f", "qualification", "max_lhs_e", "max_lhs_f", "pass"])
                .map_err(Error::from)?;
            let mut all_ok = true;
            for tag in tags {
                let spec: FilterSpec = filter_for(tag, 1e-3, kappa_sq, zeta.max(3.0))?;
                let report = validate_filter(&spec, kappa_sq, &lambdas, &us, &alphas);
                let mut ok = report.passed();
                if let kdc::FilterKind::Landweber { steps } = &spec.kind {
                    ok &= landweber_bounds(steps, &us, &[0.0, 0.5, 1.0, 2.0]).bounds_hold();
                }
                all_ok &= ok;
                out.write_record([
                    tag.as_str().to_string(),
                    fmt_f64(report.const_e),
                    fmt_f64(report.const_f),
                    fmt_f64(report.qualification),
                    fmt_f64(report.max_lhs_e),
                    fmt_f64(report.max_lhs_f),
                    ok.to_string(),
                ])
                .map_err(Error::from)?;
                for v in &report.violations {
                    eprintln!("{tag}: {v}");
                }
            }
            out.flush()?;
            Ok(all_ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
