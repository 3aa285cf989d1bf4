//! Spectral regularization filters.
//!
//! A filter `G_lambda(u)` turns the empirical covariance operator `T_x` into a
//! regularized inverse; the local spectral estimator is
//! `G_lambda(T_x) (1/n) sum_i y_i K_{x_i}`. In coefficient space, with
//! `(s_i, v_i)` the eigenpairs of `Gram / n`, this is
//! `alpha = (1/n) V diag(G_lambda(s)) V^T y`.
//!
//! Every filter carries its qualification `tau` and the constants `E` and
//! `F_tau` bounding
//!
//! ```text
//! |u^a G(u)| lambda^(1-a)          <= E       for a in [0, 1]
//! |1 - G(u) u| u^a lambda^(-a)     <= F_tau   for a in [0, tau]
//! ```
//!
//! [`validate_filter`] checks both on grids.

use std::f64::consts::E as EULER;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{invalid, Error, Result};
use crate::kernel::{sym_eigendecompose, GramMatrix, CLAMP_TOL};

/// Tolerance factor applied to the declared constants and to the domain bound.
pub const VALIDATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum FilterKind {
    /// `1 / (u + lambda)`
    Tikhonov,
    /// Gradient-method filter `sum_k eta_k prod_{i > k} (1 - eta_i u)`,
    /// with the full step schedule `eta_1..eta_t`.
    Landweber { steps: Vec<f64> },
    /// `1/u` if `u >= lambda`, else `0`.
    SpectralCutoff,
    /// `lambda / (lambda + u)^2 + 1 / (lambda + u)`
    TikhonovBiasCorrected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub qualification: f64,
    pub const_e: f64,
    pub const_f: f64,
    /// Upper end of the filter domain `[0, kappa^2]`; `None` skips the check.
    pub kappa_sq: Option<f64>,
}

impl FilterSpec {
    pub fn tikhonov() -> Self {
        FilterSpec { kind: FilterKind::Tikhonov, qualification: 1.0, const_e: 1.0, const_f: 1.0, kappa_sq: None }
    }

    /// Landweber filter with qualification `tau` (any positive value) and
    /// `F_tau = (tau / e)^tau`.
    pub fn landweber(steps: Vec<f64>, tau: f64) -> Result<Self> {
        if steps.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(invalid("Landweber step sizes must be finite and non-negative"));
        }
        if !(steps.iter().sum::<f64>() > 0.0) {
            return Err(invalid("Landweber needs a positive total step size"));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid("qualification must be positive"));
        }
        Ok(FilterSpec {
            kind: FilterKind::Landweber { steps },
            qualification: tau,
            const_e: 1.0,
            const_f: (tau / EULER).powf(tau),
            kappa_sq: None,
        })
    }

    pub fn landweber_constant(eta: f64, t: usize, tau: f64) -> Result<Self> {
        Self::landweber(vec![eta; t], tau)
    }

    /// Spectral cut-off; the qualification is arbitrary and `E = F_tau = 1`.
    pub fn cutoff(tau: f64) -> Self {
        FilterSpec { kind: FilterKind::SpectralCutoff, qualification: tau, const_e: 1.0, const_f: 1.0, kappa_sq: None }
    }

    pub fn tikhonov_bias_corrected() -> Self {
        FilterSpec {
            kind: FilterKind::TikhonovBiasCorrected,
            qualification: 2.0,
            const_e: 2.0,
            const_f: 1.0,
            kappa_sq: None,
        }
    }

    pub fn with_kappa_sq(mut self, kappa_sq: f64) -> Self {
        self.kappa_sq = Some(kappa_sq);
        self
    }

    pub fn tag(&self) -> FilterTag {
        match self.kind {
            FilterKind::Tikhonov => FilterTag::Tikhonov,
            FilterKind::Landweber { .. } => FilterTag::Landweber,
            FilterKind::SpectralCutoff => FilterTag::Cutoff,
            FilterKind::TikhonovBiasCorrected => FilterTag::TikhonovBc,
        }
    }

    /// Regularization parameter actually in force: `lambda` itself, or
    /// `(sum_k eta_k)^-1` for Landweber.
    pub fn effective_lambda(&self, lambda: f64) -> f64 {
        match &self.kind {
            FilterKind::Landweber { steps } => 1.0 / steps.iter().sum::<f64>(),
            _ => lambda,
        }
    }

    fn check_domain(&self, u: f64) -> Result<()> {
        let upper = self.kappa_sq.map_or(f64::INFINITY, |k| k * (1.0 + VALIDATION_SLACK));
        if u >= 0.0 && u <= upper {
            Ok(())
        } else {
            Err(Error::Domain { value: u, domain: "[0, kappa^2]" })
        }
    }

    /// `G_lambda(u)`.
    pub fn value(&self, lambda: f64, u: f64) -> Result<f64> {
        self.check_domain(u)?;
        if !matches!(self.kind, FilterKind::Landweber { .. }) && !(lambda > 0.0) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(self.value_unchecked(lambda, u))
    }

    fn value_unchecked(&self, lambda: f64, u: f64) -> f64 {
        match &self.kind {
            FilterKind::Tikhonov => 1.0 / (u + lambda),
            FilterKind::SpectralCutoff => {
                if u >= lambda {
                    1.0 / u
                } else {
                    0.0
                }
            }
            FilterKind::TikhonovBiasCorrected => {
                let d = lambda + u;
                lambda / (d * d) + 1.0 / d
            }
            FilterKind::Landweber { steps } => landweber_value(steps, u),
        }
    }

    /// `1 - u G_lambda(u)`; for Landweber this is the residual product
    /// `prod_k (1 - eta_k u)`.
    pub fn residual(&self, lambda: f64, u: f64) -> Result<f64> {
        self.value(lambda, u)?;
        Ok(self.residual_unchecked(lambda, u))
    }

    // Closed forms avoid the cancellation in `1 - u G` for u >> lambda.
    fn residual_unchecked(&self, lambda: f64, u: f64) -> f64 {
        match &self.kind {
            FilterKind::Tikhonov => lambda / (lambda + u),
            FilterKind::SpectralCutoff => {
                if u >= lambda {
                    0.0
                } else {
                    1.0
                }
            }
            FilterKind::TikhonovBiasCorrected => {
                let q = lambda / (lambda + u);
                q * q
            }
            FilterKind::Landweber { steps } => landweber_residual(steps, u),
        }
    }
}

/// `G_t(u)` by the forward recurrence `G <- G (1 - eta_k u) + eta_k`, k = 1..t,
/// which is the gradient iteration run on one spectral mode.
pub fn landweber_value(steps: &[f64], u: f64) -> f64 {
    steps.iter().fold(0.0, |g, eta| g * (1.0 - eta * u) + eta)
}

/// `prod_{k=1}^t (1 - eta_k u)`.
pub fn landweber_residual(steps: &[f64], u: f64) -> f64 {
    steps.iter().map(|eta| 1.0 - eta * u).product()
}

/// Configuration string tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterTag {
    Tikhonov,
    Landweber,
    Cutoff,
    TikhonovBc,
}

impl FilterTag {
    pub const ALL: [FilterTag; 4] =
        [FilterTag::Tikhonov, FilterTag::Landweber, FilterTag::Cutoff, FilterTag::TikhonovBc];

    pub fn as_str(&self) -> &'static str {
        match self {
            FilterTag::Tikhonov => "tikhonov",
            FilterTag::Landweber => "landweber",
            FilterTag::Cutoff => "cutoff",
            FilterTag::TikhonovBc => "tikhonov_bc",
        }
    }
}

impl fmt::Display for FilterTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tikhonov" => Ok(FilterTag::Tikhonov),
            "landweber" => Ok(FilterTag::Landweber),
            "cutoff" => Ok(FilterTag::Cutoff),
            "tikhonov_bc" => Ok(FilterTag::TikhonovBc),
            other => Err(invalid(format!("unknown filter tag `{other}`"))),
        }
    }
}

/// Spectral estimator coefficients `alpha = (1/n) V diag(G(s)) V^T rhs`,
/// where `(s, V)` are the eigenpairs of `g / n`.
pub fn apply_filter(spec: &FilterSpec, lambda: f64, g: &GramMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = g.n();
    if rhs.len() != n {
        return Err(invalid(format!("rhs has length {}, Gram is {n}x{n}", rhs.len())));
    }
    let eig = sym_eigendecompose(&g.scaled(1.0 / n as f64))?;
    let y = DVector::from_column_slice(rhs);
    let mut proj = eig.vectors.tr_mul(&y);
    for (p, s) in proj.iter_mut().zip(&eig.values) {
        *p *= spec.value(lambda, *s)?;
    }
    let alpha = (&eig.vectors * proj) / n as f64;
    Ok(alpha.iter().copied().collect())
}

/// Same estimator as [`apply_filter`] for a Gram matrix given in factored
/// form `Gram = B B^T` with `B` of shape `n x d`, `d < n`.
///
/// The range of `Gram / n` is spanned by the left singular vectors of
/// `B / sqrt(n)`; on its orthogonal complement the filter acts as the scalar
/// `G(0)`. The result is identical to the dense path up to round-off, at
/// `O(n d^2)` instead of `O(n^3)`.
pub fn apply_filter_factored(spec: &FilterSpec, lambda: f64, features: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = features.nrows();
    if rhs.len() != n {
        return Err(invalid(format!("rhs has length {}, features have {n} rows", rhs.len())));
    }
    let scaled = features / (n as f64).sqrt();
    let svd = SVD::try_new(scaled, true, false, f64::EPSILON, 1000 * n.max(10)).ok_or(Error::EigenConvergence(n))?;
    let u = svd.u.as_ref().ok_or(Error::EigenConvergence(n))?;
    let values: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    let trace: f64 = values.iter().sum();
    let tol = CLAMP_TOL * trace / n as f64;

    let y = DVector::from_column_slice(rhs);
    let g0 = spec.value(lambda, 0.0)?;
    let mut alpha = &y * g0;
    for (k, &s) in values.iter().enumerate() {
        let s = if s > tol { s } else { 0.0 };
        let col = u.column(k);
        let c = col.dot(&y);
        alpha += col * (c * (spec.value(lambda, s)? - g0));
    }
    alpha /= n as f64;
    Ok(alpha.iter().copied().collect())
}

/// Result of a grid check of the two qualification inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub tag: FilterTag,
    pub const_e: f64,
    pub const_f: f64,
    pub qualification: f64,
    /// Largest observed `|u^a G(u)| lambda^(1-a)`.
    pub max_lhs_e: f64,
    /// Largest observed `|1 - G(u) u| u^a lambda^(-a)`.
    pub max_lhs_f: f64,
    pub pass_e: bool,
    pub pass_f: bool,
    pub violations: Vec<String>,
}

impl FilterReport {
    pub fn passed(&self) -> bool {
        self.pass_e && self.pass_f
    }
}

/// Grid check of the `E` and `F_tau` inequalities.
///
/// `alpha_grid` values in `[0, 1]` feed the `E` check and values in
/// `[0, tau]` feed the `F_tau` check. For the cut-off filter every `lambda`
/// inside `(0, kappa^2]` is added to the `u` grid. For Landweber the lambda
/// grid is ignored in favor of `(sum eta)^-1`.
pub fn validate_filter(
    spec: &FilterSpec,
    kappa_sq: f64,
    lambda_grid: &[f64],
    u_grid: &[f64],
    alpha_grid: &[f64],
) -> FilterReport {
    let mut report = FilterReport {
        tag: spec.tag(),
        const_e: spec.const_e,
        const_f: spec.const_f,
        qualification: spec.qualification,
        max_lhs_e: 0.0,
        max_lhs_f: 0.0,
        pass_e: true,
        pass_f: true,
        violations: Vec::new(),
    };
    if lambda_grid.is_empty() || u_grid.is_empty() || alpha_grid.is_empty() {
        report.pass_e = false;
        report.pass_f = false;
        report.violations.push("empty grid".into());
        return report;
    }
    let lambdas: Vec<f64> = match &spec.kind {
        FilterKind::Landweber { .. } => vec![spec.effective_lambda(0.0)],
        _ => lambda_grid.to_vec(),
    };
    let e_bound = spec.const_e * (1.0 + VALIDATION_SLACK);
    let f_bound = spec.const_f * (1.0 + VALIDATION_SLACK);

    for &lambda in &lambdas {
        let mut us: Vec<f64> = u_grid.iter().copied().filter(|u| *u > 0.0 && *u <= kappa_sq).collect();
        if matches!(spec.kind, FilterKind::SpectralCutoff) && lambda > 0.0 && lambda <= kappa_sq {
            us.push(lambda);
        }
        for &u in &us {
            let g = spec.value_unchecked(lambda, u);
            let r = spec.residual_unchecked(lambda, u);
            for &a in alpha_grid {
                if (0.0..=1.0).contains(&a) {
                    let lhs = (u.powf(a) * g).abs() * lambda.powf(1.0 - a);
                    report.max_lhs_e = report.max_lhs_e.max(lhs);
                    if lhs > e_bound {
                        report.pass_e = false;
                        if report.violations.len() < 16 {
                            report.violations.push(format!("E: lambda={lambda:e} u={u:e} a={a} lhs={lhs:e}"));
                        }
                    }
                }
                if a >= 0.0 && a <= spec.qualification {
                    let lhs = r.abs() * u.powf(a) * lambda.powf(-a);
                    report.max_lhs_f = report.max_lhs_f.max(lhs);
                    if lhs > f_bound {
                        report.pass_f = false;
                        if report.violations.len() < 16 {
                            report.violations.push(format!("F: lambda={lambda:e} u={u:e} a={a} lhs={lhs:e}"));
                        }
                    }
                }
            }
        }
    }
    report
}

/// Grid check of the pointwise gradient-method filter bounds:
///
/// 1. `u^a G_t(u) <= lambda_t^(a-1)` for `a` in `[0, 1]`,
/// 2. `prod_k (1 - eta_k u) u^a <= (a/e)^a lambda_t^a` for `a >= 0`,
///
/// plus the identity `u G_t(u) + prod_k (1 - eta_k u) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandweberReport {
    /// Largest ratio of left to right side in bound 1.
    pub max_ratio_value: f64,
    /// Largest ratio of left to right side in bound 2.
    pub max_ratio_residual: f64,
    /// Largest `|u G_t(u) + prod - 1|`.
    pub max_identity_error: f64,
}

impl LandweberReport {
    pub fn bounds_hold(&self) -> bool {
        self.max_ratio_value <= 1.0 + VALIDATION_SLACK && self.max_ratio_residual <= 1.0 + VALIDATION_SLACK
    }
}

pub fn landweber_bounds(steps: &[f64], u_grid: &[f64], alpha_grid: &[f64]) -> LandweberReport {
    let lambda_t = 1.0 / steps.iter().sum::<f64>();
    let mut report = LandweberReport { max_ratio_value: 0.0, max_ratio_residual: 0.0, max_identity_error: 0.0 };
    for &u in u_grid {
        let g = landweber_value(steps, u);
        let p = landweber_residual(steps, u);
        report.max_identity_error = report.max_identity_error.max((u * g + p - 1.0).abs());
        for &a in alpha_grid {
            if (0.0..=1.0).contains(&a) {
                let ratio = u.powf(a) * g / lambda_t.powf(a - 1.0);
                report.max_ratio_value = report.max_ratio_value.max(ratio);
            }
            if a >= 0.0 {
                let ratio = p * u.powf(a) / ((a / EULER).powf(a) * lambda_t.powf(a));
                report.max_ratio_residual = report.max_ratio_residual.max(ratio);
            }
        }
    }
    report
}
