//! Synthetic regression problems with a known kernel spectrum.
//!
//! The input space is `[0, 1]` with the uniform measure. The integral operator
//! of the kernel has eigenfunctions `phi_i(x) = sqrt(2) sin(i pi x)` and
//! eigenvalues `sigma_i = i^(-1/gamma)`, so the capacity exponent is exactly
//! `gamma`. The regression function is `f(x) = sum_i a_i phi_i(x)` with
//! `a_i = sigma_i^zeta g_i` and `||g|| = source_norm`, which makes the source
//! condition hold with equality.

use std::f64::consts::{PI, SQRT_2};
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;

/// Number of equispaced points used to maximize `K(x, x)`.
pub const KAPPA_GRID_POINTS: usize = 10_001;

/// Factor applied to the grid estimate of `kappa^2` wherever it bounds a step
/// size or a filter domain.
pub const KAPPA_SAFETY: f64 = 1.01;

pub const DEFAULT_DIM: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProblem {
    pub dim: usize,
    pub gamma: f64,
    pub zeta: f64,
    pub source_norm: f64,
    pub noise_sd: f64,
    pub eigenvalues: Vec<f64>,
    pub target_coeffs: Vec<f64>,
    pub kappa_sq: f64,
}

/// Basis function `phi_i(x) = sqrt(2) sin(i pi x)`, 1-based `i`.
#[inline]
pub fn basis(i: usize, x: f64) -> f64 {
    SQRT_2 * (i as f64 * PI * x).sin()
}

/// All `dim` basis values at `x`, written into `out`.
pub fn basis_row(x: f64, out: &mut [f64]) {
    for (k, v) in out.iter_mut().enumerate() {
        *v = basis(k + 1, x);
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain { value: x, domain: "[0, 1]" })
    }
}

impl SpectralProblem {
    /// Build the problem family member with `dim` retained modes.
    pub fn build(dim: usize, gamma: f64, zeta: f64, source_norm: f64, noise_sd: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim must be at least 1"));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(invalid(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(invalid(format!("zeta must be positive, got {zeta}")));
        }
        if !(source_norm > 0.0 && source_norm.is_finite()) {
            return Err(invalid(format!("source_norm must be positive, got {source_norm}")));
        }
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(invalid(format!("noise_sd must be non-negative, got {noise_sd}")));
        }

        let eigenvalues: Vec<f64> = (1..=dim).map(|i| (i as f64).powf(-1.0 / gamma)).collect();
        let weights: Vec<f64> = (1..=dim).map(|i| 1.0 / i as f64).collect();
        let wnorm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        let target_coeffs =
            eigenvalues.iter().zip(&weights).map(|(s, w)| s.powf(zeta) * source_norm * w / wnorm).collect();

        let mut problem =
            SpectralProblem { dim, gamma, zeta, source_norm, noise_sd, eigenvalues, target_coeffs, kappa_sq: 0.0 };
        problem.kappa_sq = problem.kernel_diag_sup();
        Ok(problem)
    }

    /// Grid maximum of `K(x, x) = sum_i sigma_i phi_i(x)^2` over
    /// [`KAPPA_GRID_POINTS`] equispaced points of `[0, 1]`.
    fn kernel_diag_sup(&self) -> f64 {
        let steps = (KAPPA_GRID_POINTS - 1) as f64;
        (0..KAPPA_GRID_POINTS)
            .map(|k| {
                let x = k as f64 / steps;
                self.eigenvalues
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let p = basis(i + 1, x);
                        s * (p * p)
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `kappa^2` inflated by [`KAPPA_SAFETY`], for step-size and domain bounds.
    pub fn kappa_sq_safe(&self) -> f64 {
        self.kappa_sq * KAPPA_SAFETY
    }

    /// Check the structural invariants of a problem read from disk.
    pub fn validate(&self) -> Result<()> {
        if self.eigenvalues.len() != self.dim || self.target_coeffs.len() != self.dim {
            return Err(invalid("eigenvalues and target_coeffs must have length dim"));
        }
        if self.eigenvalues.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid("eigenvalues must be strictly positive"));
        }
        if self.eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("eigenvalues must be non-increasing"));
        }
        if !(self.kappa_sq >= self.eigenvalues[0]) {
            return Err(invalid("kappa_sq must dominate the largest eigenvalue"));
        }
        Ok(())
    }

    /// `f_rho(x) = sum_i a_i phi_i(x)`.
    pub fn regression_value(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.regression_value_unchecked(x))
    }

    pub(crate) fn regression_value_unchecked(&self, x: f64) -> f64 {
        self.target_coeffs.iter().enumerate().map(|(i, a)| a * basis(i + 1, x)).sum()
    }

    /// `||f_rho||_rho^2 = sum_i a_i^2`.
    pub fn target_norm_sq(&self) -> f64 {
        self.target_coeffs.iter().map(|a| a * a).sum()
    }

    /// `||L^(-zeta) f_rho||_rho^2`, equal to `source_norm^2` by construction.
    pub fn source_norm_sq(&self) -> f64 {
        self.target_coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(a, s)| {
                let g = a / s.powf(self.zeta);
                g * g
            })
            .sum()
    }

    /// Upper bound on `sup_x |f_rho(x)|`.
    pub fn sup_norm_bound(&self) -> f64 {
        SQRT_2 * self.target_coeffs.iter().map(|a| a.abs()).sum::<f64>()
    }

    /// Operative second-moment bound `M^2 = ||f_rho||_inf^2 + sigma^2`.
    pub fn second_moment_bound(&self) -> f64 {
        let f = self.sup_norm_bound();
        f * f + self.noise_sd * self.noise_sd
    }

    /// Effective dimension `tr(L (L + lambda)^-1) = sum_i sigma_i / (sigma_i + lambda)`.
    pub fn effective_dimension(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(self.eigenvalues.iter().map(|s| s / (s + lambda)).sum())
    }

    /// Analytic constant `c_gamma` with `N(lambda) <= c_gamma lambda^-gamma`
    /// for every `lambda > 0`.
    ///
    /// For `gamma < 1` the sum is dominated by `int_0^inf dx / (1 + lambda x^(1/gamma))`,
    /// which evaluates to `pi gamma / sin(pi gamma) lambda^-gamma`. For
    /// `gamma = 1` the bound uses the truncation: `lambda N(lambda) <= ln(1 + dim)`
    /// when `lambda <= 1` and `<= tr(L)` otherwise.
    pub fn capacity_constant(&self) -> f64 {
        if self.gamma < 1.0 {
            PI * self.gamma / (PI * self.gamma).sin()
        } else {
            let trace: f64 = self.eigenvalues.iter().sum();
            trace.max((1.0 + self.dim as f64).ln())
        }
    }

    /// Supremum of `N(lambda) lambda^gamma` over a log grid on `[1e-6, 1]`.
    pub fn capacity_sup_on_grid(&self, points: usize) -> f64 {
        log_grid(1e-6, 1.0, points)
            .into_iter()
            .map(|l| self.eigenvalues.iter().map(|s| s / (s + l)).sum::<f64>() * l.powf(self.gamma))
            .fold(0.0, f64::max)
    }

    /// Bound on the kernel mass discarded by truncating at `dim` modes:
    /// `2 sum_{i > dim} sigma_i`. Infinite when `gamma = 1`.
    pub fn spectral_tail_bound(&self) -> f64 {
        if self.gamma >= 1.0 {
            return f64::INFINITY;
        }
        let p = 1.0 / self.gamma;
        2.0 * (self.dim as f64).powf(1.0 - p) / (p - 1.0)
    }

    /// Stable identifier derived from the generating parameters.
    pub fn id(&self) -> u64 {
        [
            self.dim as u64,
            self.gamma.to_bits(),
            self.zeta.to_bits(),
            self.source_norm.to_bits(),
            self.noise_sd.to_bits(),
        ]
        .iter()
        .fold(0u64, |h, v| seed::mix64(h ^ v))
    }

    /// Draw `n_total` i.i.d. points: `x ~ U[0, 1]`, `y = f_rho(x) + noise_sd * z`.
    pub fn sample(&self, n_total: usize, seed: u64) -> Result<Dataset> {
        if n_total == 0 {
            return Err(invalid("n_total must be at least 1"));
        }
        let mut rng = seed::rng(seed);
        let mut inputs = Vec::with_capacity(n_total);
        let mut labels = Vec::with_capacity(n_total);
        for _ in 0..n_total {
            let x: f64 = rng.random();
            let z: f64 = rng.sample(StandardNormal);
            inputs.push(x);
            labels.push(self.regression_value_unchecked(x) + self.noise_sd * z);
        }
        Ok(Dataset { inputs, labels, problem_id: self.id(), seed })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: SpectralProblem = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub labels: Vec<f64>,
    pub problem_id: u64,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Write as CSV with header `x,y` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y")?;
        for (x, y) in self.inputs.iter().zip(&self.labels) {
            writeln!(w, "{},{}", fmt_f64(*x), fmt_f64(*y))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim) != Some("x,y") {
            return Err(Error::Format("dataset CSV must start with header `x,y`".into()));
        }
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse().ok()).ok_or_else(|| Error::Format(format!("bad dataset row {}", k + 2)))
            };
            inputs.push(parse(parts.next())?);
            labels.push(parse(parts.next())?);
        }
        Ok(Dataset { inputs, labels, problem_id: 0, seed: 0 })
    }
}

/// Decimal float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
