//! Entropy functionals, Bregman divergences and mutual information.
//!
//! All values are in nats; conversion to bits happens only at reporting.
//! Gradients follow the convention of the solvers: the gradient of quantum
//! mutual information is log σ − log(tr_R σ) ⊗ I_R, with the constant
//! −tr[ρ_A log ρ_A] term excluded (it does not vary with σ).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hermitian::{
    divided_diff_log_pair, DensityMatrix, HermitianMatrix, EIG_FLOOR,
};

/// Bipartite quantum state σ on B⊗R with dims (m, n), m·n = dim σ.
#[derive(Debug, Clone)]
pub struct BipartiteState {
    sigma: DensityMatrix,
    dims: (usize, usize),
}

impl BipartiteState {
    pub fn new(sigma: DensityMatrix, dims: (usize, usize)) -> Result<Self> {
        let (m, n) = dims;
        if m * n != sigma.dim() {
            return Err(Error::InvalidInput(format!(
                "state dimension {} does not factor as {m}x{n}",
                sigma.dim()
            )));
        }
        Ok(Self { sigma, dims })
    }

    pub fn sigma(&self) -> &DensityMatrix {
        &self.sigma
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn trace_b(&self) -> HermitianMatrix {
        self.sigma
            .as_hermitian()
            .partial_trace_b(self.dims)
            .expect("dims validated at construction")
    }

    pub fn trace_r(&self) -> HermitianMatrix {
        self.sigma
            .as_hermitian()
            .partial_trace_r(self.dims)
            .expect("dims validated at construction")
    }
}

/// Von Neumann entropy S(ρ) = −tr[ρ log ρ] in nats, with 0·log 0 = 0.
pub fn von_neumann_entropy(rho: &HermitianMatrix) -> Result<f64> {
    let eig = rho.eig();
    let mut s = 0.0;
    for &lam in eig.eigenvalues.iter() {
        if lam < -1e-12 {
            return Err(Error::InvalidInput(format!(
                "entropy of a non-PSD matrix: eigenvalue {lam:.3e}"
            )));
        }
        if lam > EIG_FLOOR {
            s -= lam * lam.ln();
        }
    }
    Ok(s)
}

/// Quantum relative entropy S(ρ‖σ) = tr[ρ(log ρ − log σ)] in nats.
///
/// Support of σ is enforced by clipping its eigenvalues at the floor, so a
/// genuine support violation shows up as a very large positive value rather
/// than an error.
pub fn quantum_relative_entropy(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch {} vs {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let eig_r = rho.eig();
    let mut tr_rho_log_rho = 0.0;
    for &lam in eig_r.eigenvalues.iter() {
        if lam < -1e-12 {
            return Err(Error::InvalidInput(format!(
                "relative entropy of a non-PSD matrix: eigenvalue {lam:.3e}"
            )));
        }
        if lam > EIG_FLOOR {
            tr_rho_log_rho += lam * lam.ln();
        }
    }
    let eig_s = sigma.eig();
    // tr[ρ log σ] = Σ_i log(μ_i) ⟨u_i|ρ|u_i⟩ with μ clipped at the floor.
    let mut tr_rho_log_sigma = 0.0;
    for i in 0..sigma.dim() {
        let mu = eig_s.eigenvalues[i].max(EIG_FLOOR);
        let u = eig_s.eigenvectors.column(i);
        let mut quad = 0.0;
        for a in 0..rho.dim() {
            for b in 0..rho.dim() {
                quad += (u[a].conj() * rho.entry(a, b) * u[b]).re;
            }
        }
        tr_rho_log_sigma += mu.ln() * quad;
    }
    Ok(tr_rho_log_rho - tr_rho_log_sigma)
}

/// Bregman divergence generated by negative entropy:
/// D_{−S}(x‖y) = S(x‖y) − tr x + tr y.
pub fn bregman_neg_entropy(x: &HermitianMatrix, y: &HermitianMatrix) -> Result<f64> {
    Ok(quantum_relative_entropy(x, y)? - x.trace() + y.trace())
}

/// Quantum mutual information I_q(σ; ρ_A) = S(σ ‖ tr_R(σ) ⊗ ρ_A) in nats.
pub fn mutual_information(sigma: &BipartiteState, rho_a: &DensityMatrix) -> Result<f64> {
    let (_, n) = sigma.dims();
    if rho_a.dim() != n {
        return Err(Error::InvalidInput(format!(
            "input state dimension {} does not match R factor {n}",
            rho_a.dim()
        )));
    }
    let ref_state = sigma.trace_r().kron(rho_a.as_hermitian());
    quantum_relative_entropy(sigma.sigma().as_hermitian(), &ref_state)
}

/// Gradient of quantum mutual information, log σ − log(tr_R σ) ⊗ I_R.
///
/// The constant term in ρ_A is excluded; `rho_a` only fixes dimensions.
pub fn mutual_information_gradient(
    sigma: &BipartiteState,
    rho_a: &DensityMatrix,
) -> Result<HermitianMatrix> {
    let (_, n) = sigma.dims();
    if rho_a.dim() != n {
        return Err(Error::InvalidInput(format!(
            "input state dimension {} does not match R factor {n}",
            rho_a.dim()
        )));
    }
    mutual_information_gradient_matrix(sigma.sigma().as_hermitian(), sigma.dims())
}

/// Gradient on raw matrices; used internally on near-feasible iterates.
pub(crate) fn mutual_information_gradient_matrix(
    sigma: &HermitianMatrix,
    dims: (usize, usize),
) -> Result<HermitianMatrix> {
    let (_, n) = dims;
    let log_sigma = sigma.matrix_log(true)?;
    let log_trr = sigma.partial_trace_r(dims)?.matrix_log(true)?;
    Ok(log_sigma.sub(&log_trr.kron(&HermitianMatrix::identity(n))))
}

/// Second derivative of negative von Neumann entropy as a bilinear form:
/// D²(−S)(x)\[V, W\] = Σ_ij g^{\[1\]}(λ_i, λ_j) (U†VU)_ij conj((U†WU)_ij),
/// where g^{\[1\]} is the first divided differences matrix of g(t) = log t + 1.
pub fn entropy_hessian_bilinear(
    x: &HermitianMatrix,
    v: &HermitianMatrix,
    w: &HermitianMatrix,
) -> Result<f64> {
    let n = x.dim();
    if v.dim() != n || w.dim() != n {
        return Err(Error::InvalidInput("direction dimension mismatch".into()));
    }
    let eig = x.eig();
    if eig.eigenvalues[0] <= EIG_FLOOR {
        return Err(Error::SingularMatrix(format!(
            "entropy Hessian at eigenvalue {:.3e}",
            eig.eigenvalues[0]
        )));
    }
    let u = &eig.eigenvectors;
    let vt = u.adjoint() * v.as_matrix() * u;
    let wt = u.adjoint() * w.as_matrix() * u;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let g = divided_diff_log_pair(eig.eigenvalues[i], eig.eigenvalues[j]);
            acc += g * (vt[(i, j)] * wt[(i, j)].conj()).re;
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Classical counterparts on probability vectors and joint matrices.
// ---------------------------------------------------------------------------

/// Shannon entropy H(x) = −Σ x_i log x_i in nats, with 0·log 0 = 0.
pub fn shannon_entropy(x: &[f64]) -> f64 {
    x.iter()
        .filter(|&&v| v > EIG_FLOOR)
        .map(|&v| -v * v.ln())
        .sum()
}

/// Kullback-Leibler divergence H(x‖y) = Σ x_i log(x_i/y_i) in nats.
pub fn kl_divergence(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y.iter())
        .filter(|(&xi, _)| xi > EIG_FLOOR)
        .map(|(&xi, &yi)| xi * (xi / yi.max(EIG_FLOOR)).ln())
        .sum()
}

/// Classical mutual information I_c(P; p) = H(P ‖ q p^T) in nats, where
/// q = P·1 is the output marginal of the joint distribution P.
pub fn classical_mutual_information(p_joint: &DMatrix<f64>, p: &DVector<f64>) -> f64 {
    let q = row_sums(p_joint);
    let mut acc = 0.0;
    for j in 0..p_joint.ncols() {
        for i in 0..p_joint.nrows() {
            let v = p_joint[(i, j)];
            if v > EIG_FLOOR {
                acc += v * (v / (q[i] * p[j]).max(EIG_FLOOR)).ln();
            }
        }
    }
    acc
}

/// Gradient of classical mutual information: entry (i, j) is
/// log(P_ij / (q_i p_j)).
pub fn classical_mutual_information_gradient(
    p_joint: &DMatrix<f64>,
    p: &DVector<f64>,
) -> DMatrix<f64> {
    let q = row_sums(p_joint);
    DMatrix::from_fn(p_joint.nrows(), p_joint.ncols(), |i, j| {
        (p_joint[(i, j)].max(EIG_FLOOR) / (q[i] * p[j]).max(EIG_FLOOR)).ln()
    })
}

pub(crate) fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}
