//! Classical rate-distortion via the Blahut-Arimoto iteration.
//!
//! The mirror descent step with kernel −H for
//!
//!   minimize  I_c(P; p) + κ Σ_ij P_ij δ_ij   s.t.  Σ_i P_ij = p_j
//!
//! has the closed form P'_ij = p_j q_i e^{−κδ_ij} / Σ_i q_i e^{−κδ_ij} with
//! q = P·1, which is exactly the Blahut-Arimoto update. Certification uses
//! the column-separable Frank-Wolfe gap, and the uniform-input Hamming case
//! has an analytic rate-distortion function used as an oracle.

use nalgebra::{DMatrix, DVector};

use crate::entropy::{
    classical_mutual_information, classical_mutual_information_gradient, row_sums, shannon_entropy,
};
use crate::error::{Error, Result};
use crate::hermitian::EIG_FLOOR;
use crate::LOG2_E;

/// Classical rate-distortion instance at distortion dual κ. Zero-probability
/// inputs are dropped at construction together with their distortion columns.
#[derive(Debug, Clone)]
pub struct CrdProblem {
    pub p: DVector<f64>,
    pub delta: DMatrix<f64>,
    pub kappa: f64,
}

impl CrdProblem {
    pub fn new(p: DVector<f64>, delta: DMatrix<f64>, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kappa must be a nonnegative real, got {kappa}"
            )));
        }
        if delta.ncols() != p.len() {
            return Err(Error::InvalidInput(format!(
                "distortion has {} columns but the distribution has {} entries",
                delta.ncols(),
                p.len()
            )));
        }
        if p.iter().any(|&v| v < 0.0) || delta.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput(
                "probabilities and distortions must be nonnegative".into(),
            ));
        }
        let sum: f64 = p.sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "input distribution sums to {sum}, expected 1"
            )));
        }
        // Drop degenerate inputs.
        let kept: Vec<usize> = (0..p.len()).filter(|&j| p[j] > 0.0).collect();
        if kept.is_empty() {
            return Err(Error::InvalidInput("input distribution is all zero".into()));
        }
        let (p, delta) = if kept.len() == p.len() {
            (p, delta)
        } else {
            let p2 = DVector::from_iterator(kept.len(), kept.iter().map(|&j| p[j]));
            let d2 = DMatrix::from_fn(delta.nrows(), kept.len(), |i, c| delta[(i, kept[c])]);
            (p2, d2)
        };
        Ok(Self { p, delta, kappa })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.delta.nrows(), self.p.len())
    }
}

/// Joint distribution over outputs × inputs with column sums equal to p.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    pub p_joint: DMatrix<f64>,
}

impl JointDistribution {
    pub fn new(p_joint: DMatrix<f64>, problem: &CrdProblem) -> Result<Self> {
        let (m, n) = problem.dims();
        if p_joint.nrows() != m || p_joint.ncols() != n {
            return Err(Error::InvalidInput("joint distribution shape mismatch".into()));
        }
        if p_joint.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("joint distribution has negative entries".into()));
        }
        for j in 0..n {
            let col: f64 = p_joint.column(j).sum();
            if (col - problem.p[j]).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "column {j} sums to {col}, expected {}",
                    problem.p[j]
                )));
            }
        }
        Ok(Self { p_joint })
    }

    /// Uniform-channel initial point P_ij = p_j/m, strictly positive.
    pub fn uniform_start(problem: &CrdProblem) -> Self {
        let (m, n) = problem.dims();
        Self {
            p_joint: DMatrix::from_fn(m, n, |_, j| problem.p[j] / m as f64),
        }
    }
}

/// One Blahut-Arimoto step; feasible and strictly positive by construction.
pub fn ba_step(p_joint: &JointDistribution, problem: &CrdProblem) -> JointDistribution {
    let (m, n) = problem.dims();
    let q = row_sums(&p_joint.p_joint);
    let mut out = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut z = 0.0;
        for i in 0..m {
            let w = q[i] * (-problem.kappa * problem.delta[(i, j)]).exp();
            out[(i, j)] = w;
            z += w;
        }
        // z > 0 for finite κ since q is a probability vector; the floor
        // guards against total underflow.
        let z = z.max(EIG_FLOOR);
        for i in 0..m {
            out[(i, j)] = (problem.p[j] * out[(i, j)] / z).max(EIG_FLOOR);
        }
    }
    JointDistribution { p_joint: out }
}

/// Objective I_c + κ⟨δ, P⟩ in nats.
pub fn crd_objective(p_joint: &DMatrix<f64>, problem: &CrdProblem) -> f64 {
    let lin: f64 = p_joint
        .iter()
        .zip(problem.delta.iter())
        .map(|(a, b)| a * b)
        .sum();
    classical_mutual_information(p_joint, &problem.p) + problem.kappa * lin
}

/// Frank-Wolfe optimality gap: ⟨∇f, P⟩ − Σ_j p_j min_i ∂_ij f ≥ 0, an upper
/// bound on the distance of the objective from its optimum.
pub fn crd_fw_gap(p_joint: &JointDistribution, problem: &CrdProblem) -> f64 {
    let (m, n) = problem.dims();
    let grad = classical_mutual_information_gradient(&p_joint.p_joint, &problem.p);
    let mut upper = 0.0;
    let mut lower = 0.0;
    for j in 0..n {
        let mut min_g = f64::INFINITY;
        for i in 0..m {
            let g = grad[(i, j)] + problem.kappa * problem.delta[(i, j)];
            upper += g * p_joint.p_joint[(i, j)];
            min_g = min_g.min(g);
        }
        lower += problem.p[j] * min_g;
    }
    upper - lower
}

/// Result of a classical rate-distortion solve.
#[derive(Debug, Clone)]
pub struct CrdSolution {
    pub p_joint: JointDistribution,
    pub rate_bits: f64,
    pub distortion: f64,
    pub gap_bits: f64,
    pub iters: usize,
}

/// Runs Blahut-Arimoto until the objective change or the Frank-Wolfe gap
/// drops below `tol` (nats).
pub fn crd_solve(problem: &CrdProblem, tol: f64, max_iters: usize) -> Result<CrdSolution> {
    let mut p_joint = JointDistribution::uniform_start(problem);
    let mut f_prev = crd_objective(&p_joint.p_joint, problem);
    let mut gap = f64::INFINITY;
    for it in 1..=max_iters {
        p_joint = ba_step(&p_joint, problem);
        let f_new = crd_objective(&p_joint.p_joint, problem);
        gap = crd_fw_gap(&p_joint, problem);
        let delta_f = (f_prev - f_new).abs();
        f_prev = f_new;
        if gap < tol || delta_f < tol {
            let lin: f64 = p_joint
                .p_joint
                .iter()
                .zip(problem.delta.iter())
                .map(|(a, b)| a * b)
                .sum();
            return Ok(CrdSolution {
                rate_bits: classical_mutual_information(&p_joint.p_joint, &problem.p) * LOG2_E,
                distortion: lin,
                gap_bits: gap * LOG2_E,
                iters: it,
                p_joint,
            });
        }
    }
    Err(Error::ConvergenceFailure(format!(
        "Blahut-Arimoto did not reach tolerance {tol:.3e} in {max_iters} iterations; last gap {gap:.3e}"
    )))
}

/// Analytic rate-distortion function for the uniform input distribution with
/// Hamming distortion: R = log n − H([1−D, D/(n−1), …]) bits for
/// 0 ≤ D ≤ 1 − 1/n, and 0 up to D = 1. Also returns the attaining channel
/// Q = (D/(n−1))·11ᵀ + (1 − nD/(n−1))·I.
pub fn hamming_uniform_oracle(n: usize, d: f64) -> Result<(f64, DMatrix<f64>)> {
    if n < 2 {
        return Err(Error::InvalidInput("need at least two symbols".into()));
    }
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::InvalidInput(format!(
            "distortion {d} outside [0, 1]"
        )));
    }
    let nf = n as f64;
    let boundary = 1.0 - 1.0 / nf;
    let d_eff = d.min(boundary);
    let off = d_eff / (nf - 1.0);
    let q = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - d_eff } else { off });
    if d >= boundary {
        return Ok((0.0, q));
    }
    let mut probs = vec![d / (nf - 1.0); n];
    probs[0] = 1.0 - d;
    let rate_nats = nf.ln() - shannon_entropy(&probs);
    Ok((rate_nats.max(0.0) * LOG2_E, q))
}

/// Analytic distortion attained at dual parameter κ for the uniform-input
/// Hamming problem: D(κ) = (n−1)/(eᵏ + n−1).
pub fn hamming_uniform_distortion_at(n: usize, kappa: f64) -> f64 {
    let w = (n as f64 - 1.0) * (-kappa).exp();
    w / (1.0 + w)
}
