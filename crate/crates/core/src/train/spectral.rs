use super::{LocalModel, Subset};
use crate::error::{invalid, Result};
use crate::filter::{apply_filter, apply_filter_factored, FilterSpec};
use crate::kernel::{spectral_features, KernelSpec};
use crate::problem::KAPPA_SAFETY;

/// Local spectral-algorithm estimator
/// `alpha = (1/n) V diag(G_lambda(s)) V^T y` on one partition.
///
/// A filter without an explicit domain bound gets `1.01 kappa^2` of the
/// kernel. For the truncated spectral kernel with fewer modes than points the
/// Gram matrix is handled in factored form.
pub fn sa_local(sub: &Subset, filter: &FilterSpec, lambda: f64, kernel: &KernelSpec) -> Result<LocalModel> {
    if sub.is_empty() {
        return Err(invalid("empty partition"));
    }
    let spec = match filter.kappa_sq {
        Some(_) => filter.clone(),
        None => filter.clone().with_kappa_sq(kernel.kappa_sq() * KAPPA_SAFETY),
    };
    let coeffs = match kernel.problem() {
        Some(p) if p.dim < sub.len() => {
            for &x in &sub.inputs {
                kernel.eval(x, x)?;
            }
            apply_filter_factored(&spec, lambda, &spectral_features(p, &sub.inputs), &sub.labels)?
        }
        _ => apply_filter(&spec, lambda, &kernel.gram(&sub.inputs)?, &sub.labels)?,
    };
    Ok(LocalModel { inputs: sub.inputs.clone(), coeffs, partition_index: sub.index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::SpectralProblem;
    use std::sync::Arc;

    #[test]
    fn factored_and_dense_agree() {
        let p = Arc::new(SpectralProblem::build(8, 1.0, 0.5, 1.0, 0.2).unwrap());
        let k = KernelSpec::spectral(&p);
        let ds = p.sample(30, 4).unwrap();
        let sub = Subset { index: 0, inputs: ds.inputs.clone(), labels: ds.labels.clone() };
        let spec = FilterSpec::tikhonov();
        let fast = sa_local(&sub, &spec, 0.01, &k).unwrap();
        let dense =
            apply_filter(&spec.with_kappa_sq(p.kappa_sq_safe()), 0.01, &k.gram(&sub.inputs).unwrap(), &sub.labels)
                .unwrap();
        for (a, b) in fast.coeffs.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn tikhonov_solves_the_regularized_system() {
        let k = KernelSpec::gaussian(0.2).unwrap();
        let sub = Subset { index: 0, inputs: vec![0.1, 0.35, 0.6, 0.9], labels: vec![1.0, -0.5, 0.25, 2.0] };
        let lambda = 0.05;
        let m = sa_local(&sub, &FilterSpec::tikhonov(), lambda, &k).unwrap();
        let g = k.gram(&sub.inputs).unwrap();
        let n = sub.len() as f64;
        for j in 0..sub.len() {
            let lhs: f64 = g.row(j).iter().zip(&m.coeffs).map(|(a, b)| a * b).sum::<f64>() + n * lambda * m.coeffs[j];
            assert!((lhs - sub.labels[j]).abs() < 1e-10);
        }
    }
}
