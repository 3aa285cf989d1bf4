use std::fmt;
use std::str::FromStr;

use super::{SgmConfig, StepSchedule};
use crate::error::{invalid, Error, Result};
use crate::filter::FilterTag;

/// Named parameter regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Cor1_1,
    Cor1_2,
    Cor2_1,
    Cor2_2,
    Cor2_3,
    Cor2_4,
    Cor3_1,
    Cor3_2,
    Cor3_3,
    Cor3_4,
    Cor5,
    Cor6,
}

impl Regime {
    pub const ALL: [Regime; 12] = [
        Regime::Cor1_1,
        Regime::Cor1_2,
        Regime::Cor2_1,
        Regime::Cor2_2,
        Regime::Cor2_3,
        Regime::Cor2_4,
        Regime::Cor3_1,
        Regime::Cor3_2,
        Regime::Cor3_3,
        Regime::Cor3_4,
        Regime::Cor5,
        Regime::Cor6,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Cor1_1 => "cor1.1",
            Regime::Cor1_2 => "cor1.2",
            Regime::Cor2_1 => "cor2.1",
            Regime::Cor2_2 => "cor2.2",
            Regime::Cor2_3 => "cor2.3",
            Regime::Cor2_4 => "cor2.4",
            Regime::Cor3_1 => "cor3.1",
            Regime::Cor3_2 => "cor3.2",
            Regime::Cor3_3 => "cor3.3",
            Regime::Cor3_4 => "cor3.4",
            Regime::Cor5 => "cor5",
            Regime::Cor6 => "cor6",
        }
    }

    /// Spectral-algorithm regimes; the others drive SGM.
    pub fn is_spectral(&self) -> bool {
        matches!(self, Regime::Cor5 | Regime::Cor6)
    }

    /// Regimes stated for a single machine only.
    pub fn requires_single_partition(&self) -> bool {
        matches!(self, Regime::Cor3_1 | Regime::Cor3_2 | Regime::Cor3_3 | Regime::Cor3_4 | Regime::Cor6)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL.iter().find(|r| r.as_str() == s).copied().ok_or_else(|| Error::InvalidRegime(s.to_string()))
    }
}

/// Constants multiplying the exact powers in each regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    /// Multiplies step sizes and `lambda`.
    pub step: f64,
    pub batch: f64,
    pub iterations: f64,
}

impl Scales {
    pub fn uniform(s: f64) -> Self {
        Scales { step: s, batch: s, iterations: s }
    }

    /// Scale only the step size (or `lambda`); batch and iteration counts use
    /// the exact powers.
    pub fn step_only(s: f64) -> Self {
        Scales { step: s, batch: 1.0, iterations: 1.0 }
    }
}

impl Default for Scales {
    fn default() -> Self {
        Scales::uniform(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub regime: Regime,
    pub n_total: usize,
    pub partitions: usize,
    pub zeta: f64,
    pub gamma: f64,
    pub scales: Scales,
    /// Kernel bound used for the step caps; `None` disables clamping.
    pub kappa_sq: Option<f64>,
    pub theory_compliant: bool,
    /// Filter for spectral regimes.
    pub filter: FilterTag,
    pub base_seed: u64,
}

impl PlanRequest {
    pub fn new(regime: Regime, n_total: usize, partitions: usize, zeta: f64, gamma: f64, scale: f64) -> Self {
        PlanRequest {
            regime,
            n_total,
            partitions,
            zeta,
            gamma,
            scales: Scales::step_only(scale),
            kappa_sq: None,
            theory_compliant: false,
            filter: FilterTag::Tikhonov,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    Sgm(SgmConfig),
    Sa { partitions: usize, filter: FilterTag, lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainPlan {
    pub regime: Regime,
    pub algorithm: Algorithm,
    pub scales: Scales,
    /// Step size as given by the regime, before any clamp.
    pub nominal_step: Option<f64>,
    pub step_clamped: bool,
    pub batch_clamped: bool,
    /// Exponent `(2 zeta + gamma - 1) / (2 zeta + gamma)` of the partition bound.
    pub partition_exponent: f64,
    /// `m` exceeds `N^partition_exponent`.
    pub partition_warning: bool,
}

impl TrainPlan {
    pub fn partitions(&self) -> usize {
        match &self.algorithm {
            Algorithm::Sgm(c) => c.partitions,
            Algorithm::Sa { partitions, .. } => *partitions,
        }
    }

    pub fn step_size(&self) -> Option<f64> {
        match &self.algorithm {
            Algorithm::Sgm(c) => Some(c.step_schedule.max_step()),
            Algorithm::Sa { .. } => None,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match &self.algorithm {
            Algorithm::Sa { lambda, .. } => Some(*lambda),
            Algorithm::Sgm(_) => None,
        }
    }
}

fn round_batch(x: f64) -> usize {
    (x.round() as usize).max(1)
}

fn ceil_iter(x: f64) -> usize {
    (x.ceil() as usize).max(1)
}

/// Resolve a named regime into concrete algorithm parameters.
pub fn plan_parameters(req: &PlanRequest) -> Result<TrainPlan> {
    let PlanRequest { regime, n_total, partitions: m, zeta, gamma, scales, .. } = *req;
    if n_total == 0 || m == 0 {
        return Err(invalid("N and m must be at least 1"));
    }
    if n_total % m != 0 {
        return Err(Error::Indivisible { n_total, partitions: m });
    }
    if !(zeta > 0.0 && gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid(format!("need zeta > 0 and gamma in (0, 1], got zeta={zeta}, gamma={gamma}")));
    }
    for s in [scales.step, scales.batch, scales.iterations] {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid(format!("scale constants must be positive, got {s}")));
        }
    }
    if regime.requires_single_partition() && m != 1 {
        return Err(Error::ConstraintViolation(format!("{regime} is a single-machine regime, got m = {m}")));
    }
    let big_n = n_total as f64;
    let n = (n_total / m) as f64;
    let mf = m as f64;
    let r = 2.0 * zeta + gamma;
    let is_cor2 = matches!(regime, Regime::Cor2_1 | Regime::Cor2_2 | Regime::Cor2_3 | Regime::Cor2_4);
    if (is_cor2 || regime == Regime::Cor5) && r <= 1.0 {
        return Err(Error::ConstraintViolation(format!("{regime} requires 2 zeta + gamma > 1, got {r}")));
    }
    if is_cor2 && zeta > 1.0 {
        return Err(Error::ConstraintViolation(format!("{regime} requires zeta <= 1, got {zeta}")));
    }
    let ln_n = big_n.ln().max(1.0);
    let alpha = 1.0 / r.max(1.0);
    let (s_eta, s_b, s_t) = (scales.step, scales.batch, scales.iterations);

    // (eta, b, T) or lambda
    let sgm = match regime {
        Regime::Cor1_1 => Some((s_eta * mf / big_n.sqrt(), 1.0, n)),
        Regime::Cor1_2 => Some((s_eta / ln_n, s_b * big_n.sqrt() / mf, s_t * big_n.sqrt() * ln_n)),
        Regime::Cor2_1 => Some((s_eta / n, 1.0, s_t * big_n.powf(1.0 / r) * n)),
        Regime::Cor2_2 => Some((s_eta / n.sqrt(), s_b * n.sqrt(), s_t * big_n.powf(1.0 / r) * n.sqrt())),
        Regime::Cor2_3 => {
            Some((s_eta * big_n.powf(-2.0 * zeta / r) * mf, 1.0, s_t * big_n.powf((2.0 * zeta + 1.0) / r) / mf))
        }
        Regime::Cor2_4 => Some((s_eta / ln_n, s_b * big_n.powf(2.0 * zeta / r) / mf, s_t * big_n.powf(1.0 / r) * ln_n)),
        Regime::Cor3_1 => Some((s_eta / big_n, 1.0, s_t * big_n.powf(alpha + 1.0))),
        Regime::Cor3_2 => Some((s_eta / big_n.sqrt(), s_b * big_n.sqrt(), s_t * big_n.powf(alpha + 0.5))),
        Regime::Cor3_3 => {
            Some((s_eta * big_n.powf(-2.0 * zeta * alpha), 1.0, s_t * big_n.powf(alpha * (2.0 * zeta + 1.0))))
        }
        Regime::Cor3_4 => Some((s_eta / ln_n, s_b * big_n.powf(2.0 * zeta * alpha), s_t * big_n.powf(alpha) * ln_n)),
        Regime::Cor5 | Regime::Cor6 => None,
    };

    let partition_exponent = if r > 1.0 { (r - 1.0) / r } else { 0.0 };
    let partition_warning = mf > big_n.powf(partition_exponent) * (1.0 + 1e-12);

    let plan = match sgm {
        Some((eta_nominal, b_raw, t_raw)) => {
            let mut batch = round_batch(b_raw);
            let batch_clamped = batch > n_total / m;
            batch = batch.min(n_total / m);
            let iterations = ceil_iter(t_raw);
            let mut eta = eta_nominal;
            let mut step_clamped = false;
            if let Some(k2) = req.kappa_sq {
                let mut cap = 1.0 / k2;
                if req.theory_compliant {
                    cap /= 4.0 * (iterations as f64).ln().max(1.0);
                }
                if eta > cap {
                    eta = cap;
                    step_clamped = true;
                }
            }
            TrainPlan {
                regime,
                algorithm: Algorithm::Sgm(SgmConfig {
                    partitions: m,
                    batch_size: batch,
                    iterations,
                    step_schedule: StepSchedule::Constant(eta),
                    base_seed: req.base_seed,
                }),
                scales,
                nominal_step: Some(eta_nominal),
                step_clamped,
                batch_clamped,
                partition_exponent,
                partition_warning,
            }
        }
        None => {
            let lambda = match regime {
                Regime::Cor5 => s_eta * big_n.powf(-1.0 / r),
                _ => s_eta * big_n.powf(-1.0 / r.max(1.0)),
            };
            TrainPlan {
                regime,
                algorithm: Algorithm::Sa { partitions: m, filter: req.filter, lambda },
                scales,
                nominal_step: None,
                step_clamped: false,
                batch_clamped: false,
                partition_exponent,
                partition_warning,
            }
        }
    };
    let values_ok = match &plan.algorithm {
        Algorithm::Sgm(c) => {
            let e = c.step_schedule.max_step();
            e > 0.0 && e.is_finite()
        }
        Algorithm::Sa { lambda, .. } => *lambda > 0.0 && lambda.is_finite(),
    };
    if !values_ok {
        return Err(invalid(format!("{regime} resolved to a non-positive or non-finite parameter")));
    }
    Ok(plan)
}

/// Outcome of the sufficient step-size check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCheck {
    pub pass: bool,
    /// Largest value of `lhs_t * 4 kappa^2` over `t in [2, T]`.
    pub max_ratio: f64,
}

/// Evaluate `(1/eta_t) sum_{k=1}^{t-1} 1/(k(k+1)) sum_{i=t-k}^{t-1} eta_i^2`
/// for every `t in [2, T]` and compare against `1 / (4 kappa^2)`.
pub fn check_step_condition(schedule: &StepSchedule, t_max: usize, kappa_sq: f64) -> Result<StepCheck> {
    if t_max == 0 {
        return Err(invalid("T must be at least 1"));
    }
    let steps = schedule.steps(t_max)?;
    // prefix[i] = eta_1^2 + ... + eta_i^2
    let mut prefix = vec![0.0; t_max + 1];
    for (i, e) in steps.iter().enumerate() {
        prefix[i + 1] = prefix[i] + e * e;
    }
    let mut max_ratio: f64 = 0.0;
    for t in 2..=t_max {
        let eta_t = steps[t - 1];
        let mut acc = 0.0;
        for k in 1..t {
            let inner = prefix[t - 1] - prefix[t - 1 - k];
            acc += inner / (k as f64 * (k as f64 + 1.0));
        }
        let ratio = if eta_t > 0.0 {
            acc / eta_t * 4.0 * kappa_sq
        } else if acc > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        max_ratio = max_ratio.max(ratio);
    }
    Ok(StepCheck { pass: max_ratio <= 1.0, max_ratio })
}
