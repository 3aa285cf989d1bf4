//! Kernel evaluation and Gram-matrix algebra.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::problem::{basis_row, SpectralProblem};

/// Relative tolerance below which negative eigenvalues are treated as
/// round-off and clamped to zero (scaled by `trace / n`).
pub const CLAMP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `K(x, u) = sum_i sigma_i phi_i(x) phi_i(u)` over the problem's modes.
    SpectralTruncated(Arc<SpectralProblem>),
    /// `K(x, u) = exp(-(x - u)^2 / (2 h^2))`.
    Gaussian { bandwidth: f64 },
}

impl KernelSpec {
    pub fn spectral(problem: &Arc<SpectralProblem>) -> Self {
        KernelSpec::SpectralTruncated(Arc::clone(problem))
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(KernelSpec::Gaussian { bandwidth })
    }

    /// Upper bound on `K(x, x)`.
    pub fn kappa_sq(&self) -> f64 {
        match self {
            KernelSpec::SpectralTruncated(p) => p.kappa_sq,
            KernelSpec::Gaussian { .. } => 1.0,
        }
    }

    pub fn problem(&self) -> Option<&Arc<SpectralProblem>> {
        match self {
            KernelSpec::SpectralTruncated(p) => Some(p),
            KernelSpec::Gaussian { .. } => None,
        }
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let ok = match self {
            KernelSpec::SpectralTruncated(_) => (0.0..=1.0).contains(&x),
            KernelSpec::Gaussian { .. } => x.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            let domain = match self {
                KernelSpec::SpectralTruncated(_) => "[0, 1]",
                KernelSpec::Gaussian { .. } => "finite reals",
            };
            Err(Error::Domain { value: x, domain })
        }
    }

    pub fn eval(&self, x: f64, u: f64) -> Result<f64> {
        self.check_domain(x)?;
        self.check_domain(u)?;
        Ok(match self {
            KernelSpec::SpectralTruncated(p) => {
                let mut fx = vec![0.0; p.dim];
                let mut fu = vec![0.0; p.dim];
                basis_row(x, &mut fx);
                basis_row(u, &mut fu);
                spectral_dot(&p.eigenvalues, &fx, &fu)
            }
            KernelSpec::Gaussian { bandwidth } => gaussian(*bandwidth, x, u),
        })
    }

    /// Gram matrix `G[j][k] = K(x_j, x_k)`.
    pub fn gram(&self, inputs: &[f64]) -> Result<GramMatrix> {
        if inputs.is_empty() {
            return Err(invalid("gram needs at least one input"));
        }
        for &x in inputs {
            self.check_domain(x)?;
        }
        let n = inputs.len();
        let mut m = DMatrix::zeros(n, n);
        match self {
            KernelSpec::SpectralTruncated(p) => {
                let rows = basis_rows(p.dim, inputs);
                for j in 0..n {
                    for k in j..n {
                        let v = spectral_dot(&p.eigenvalues, &rows[j], &rows[k]);
                        m[(j, k)] = v;
                        m[(k, j)] = v;
                    }
                }
            }
            KernelSpec::Gaussian { bandwidth } => {
                for j in 0..n {
                    for k in j..n {
                        let v = gaussian(*bandwidth, inputs[j], inputs[k]);
                        m[(j, k)] = v;
                        m[(k, j)] = v;
                    }
                }
            }
        }
        Ok(GramMatrix(m))
    }

    /// Values `K(x_j, x)` for every `x_j` in `inputs`.
    pub fn column(&self, inputs: &[f64], x: f64) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        Ok(match self {
            KernelSpec::SpectralTruncated(p) => {
                let mut fx = vec![0.0; p.dim];
                basis_row(x, &mut fx);
                let mut fj = vec![0.0; p.dim];
                inputs
                    .iter()
                    .map(|&xj| {
                        basis_row(xj, &mut fj);
                        spectral_dot(&p.eigenvalues, &fj, &fx)
                    })
                    .collect()
            }
            KernelSpec::Gaussian { bandwidth } => inputs.iter().map(|&xj| gaussian(*bandwidth, xj, x)).collect(),
        })
    }
}

#[inline]
fn gaussian(h: f64, x: f64, u: f64) -> f64 {
    let d = x - u;
    (-(d * d) / (2.0 * h * h)).exp()
}

#[inline]
fn spectral_dot(sigma: &[f64], a: &[f64], b: &[f64]) -> f64 {
    sigma.iter().zip(a.iter().zip(b)).map(|(s, (x, y))| s * (x * y)).sum()
}

fn basis_rows(dim: usize, inputs: &[f64]) -> Vec<Vec<f64>> {
    inputs
        .iter()
        .map(|&x| {
            let mut r = vec![0.0; dim];
            basis_row(x, &mut r);
            r
        })
        .collect()
}

/// Scaled feature matrix `B[j][i] = sqrt(sigma_i) phi_i(x_j)`, so that the
/// spectral Gram matrix factors as `B B^T`.
pub fn spectral_features(problem: &SpectralProblem, inputs: &[f64]) -> DMatrix<f64> {
    let n = inputs.len();
    let roots: Vec<f64> = problem.eigenvalues.iter().map(|s| s.sqrt()).collect();
    let mut b = DMatrix::zeros(n, problem.dim);
    let mut row = vec![0.0; problem.dim];
    for (j, &x) in inputs.iter().enumerate() {
        basis_row(x, &mut row);
        for i in 0..problem.dim {
            b[(j, i)] = roots[i] * row[i];
        }
    }
    b
}

/// Symmetric kernel matrix over one set of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(pub DMatrix<f64>);

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        // column-major storage; symmetric, so column j equals row j
        let n = self.n();
        &self.0.as_slice()[j * n..(j + 1) * n]
    }

    pub fn scaled(&self, factor: f64) -> GramMatrix {
        GramMatrix(&self.0 * factor)
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector of `values[i]`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.values));
        &self.vectors * d * self.vectors.transpose()
    }
}

/// Symmetric eigendecomposition with round-off negatives clamped to zero.
///
/// Negative eigenvalues no smaller than `-CLAMP_TOL * trace / n` are set to
/// zero; anything more negative is reported unchanged.
pub fn sym_eigendecompose(g: &GramMatrix) -> Result<SymEigen> {
    let n = g.n();
    if n == 0 {
        return Err(invalid("empty matrix"));
    }
    let eig = SymmetricEigen::try_new(g.0.clone(), f64::EPSILON, 1000 * n.max(10)).ok_or(Error::EigenConvergence(n))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let floor = -CLAMP_TOL * g.trace().abs() / n as f64;
    let values = order
        .iter()
        .map(|&i| {
            let v = eig.eigenvalues[i];
            if v < 0.0 && v >= floor {
                0.0
            } else {
                v
            }
        })
        .collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEigen { values, vectors })
}
