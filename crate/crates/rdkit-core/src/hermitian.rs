//! Dense Hermitian linear algebra.
//!
//! Everything downstream (entropies, mirror descent, symmetry reduction) is
//! built on the primitives here: eigendecomposition with a deterministic
//! ordering and phase convention, primary matrix functions f(X) = U f(Λ) U†,
//! Kronecker products, partial traces over either tensor factor, the
//! canonical purification ψ = Σ_i √λ_i v_i ⊗ v_i, and the first divided
//! differences kernel for f(x) = eˣ used by dual Hessians.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Builder tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues below this floor are clipped before taking logarithms when
/// clipping is enabled. Iterates of the solvers are interior analytically,
/// but floating point can underflow.
pub const EIG_FLOOR: f64 = 1e-300;

/// Switch point between the direct divided-difference formula and the
/// sinh-based stable form.
pub const DIVIDED_DIFF_SWITCH: f64 = 1e-6;

/// Dense n×n complex Hermitian matrix, stored exactly Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    data: DMatrix<Complex64>,
}

/// Eigendecomposition of a Hermitian matrix: X = U diag(λ) U†.
///
/// Eigenvalues are sorted ascending and each eigenvector is normalized so
/// that its first significant component is real and positive, which makes
/// decompositions reproducible across reduced/full code paths.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Builds from an arbitrary complex matrix, verifying Hermitian symmetry
    /// within `HERMITIAN_TOL` and storing the exactly symmetrized matrix.
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput("matrix must be non-empty".into()));
        }
        for z in m.iter() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::InvalidInput("matrix has non-finite entries".into()));
            }
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = m[(i, j)] - m[(j, i)].conj();
                worst = worst.max(d.norm());
            }
        }
        if worst > HERMITIAN_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix is not Hermitian: max |A - A†| entry is {worst:.3e}"
            )));
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrizes (A + A†)/2 without a tolerance check. The result is
    /// exactly Hermitian entry by entry.
    pub(crate) fn symmetrize(m: DMatrix<Complex64>) -> Self {
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let v = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        Self { data: out }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            data: DMatrix::identity(n, n),
        }
    }

    /// Diagonal matrix with the given real entries.
    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(d[i], 0.0);
        }
        Self { data: m }
    }

    /// Rank-one projector ψψ† from a (not necessarily normalized) vector.
    pub fn outer(psi: &DVector<Complex64>) -> Self {
        let n = psi.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        Self::symmetrize(m)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    /// Trace (real by hermiticity).
    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.data[(i, i)].re).sum()
    }

    /// Hilbert-Schmidt inner product ⟨X, Y⟩ = tr\[XY\], real for Hermitian
    /// arguments.
    pub fn inner(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            data: self.data.map(|z| z * s),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            data: &self.data + &other.data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            data: &self.data - &other.data,
        }
    }

    /// Kronecker product; Hermitian inputs give a Hermitian result.
    pub fn kron(&self, other: &Self) -> Self {
        Self {
            data: self.data.kronecker(&other.data),
        }
    }

    /// Eigendecomposition with deterministic ordering and phases.
    pub fn eig(&self) -> EigDecomposition {
        let eig = nalgebra::linalg::SymmetricEigen::new(self.data.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

        let mut eigenvalues = DVector::zeros(n);
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvalues[dst] = eig.eigenvalues[src];
            let col = eig.eigenvectors.column(src);
            // Phase convention: first significant component made real-positive.
            let mut phase = Complex64::new(1.0, 0.0);
            for i in 0..n {
                let z = col[i];
                if z.norm() > 1e-8 {
                    phase = z.conj() / z.norm();
                    break;
                }
            }
            for i in 0..n {
                eigenvectors[(i, dst)] = col[i] * phase;
            }
        }
        EigDecomposition {
            eigenvalues,
            eigenvectors,
        }
    }

    /// Primary matrix function Σ f(λ_i) v_i v_i†.
    pub fn matrix_fn(&self, f: impl Fn(f64) -> f64) -> Self {
        let eig = self.eig();
        Self::from_eig_values(&eig, &eig.eigenvalues.map(f))
    }

    /// Matrix exponential.
    pub fn matrix_exp(&self) -> Self {
        self.matrix_fn(f64::exp)
    }

    /// Matrix logarithm. With `clip` set, eigenvalues below `EIG_FLOOR` are
    /// clipped to the floor before the log; otherwise an eigenvalue at or
    /// below the floor is an error.
    pub fn matrix_log(&self, clip: bool) -> Result<Self> {
        let eig = self.eig();
        let mut vals = DVector::zeros(self.dim());
        for i in 0..self.dim() {
            let lam = eig.eigenvalues[i];
            if lam <= EIG_FLOOR {
                if !clip {
                    return Err(Error::SingularMatrix(format!(
                        "matrix log of eigenvalue {lam:.3e} below floor"
                    )));
                }
                vals[i] = EIG_FLOOR.ln();
            } else {
                vals[i] = lam.ln();
            }
        }
        Ok(Self::from_eig_values(&eig, &vals))
    }

    /// Principal square root (eigenvalues clamped at zero from below).
    pub fn matrix_sqrt(&self) -> Self {
        self.matrix_fn(|x| x.max(0.0).sqrt())
    }

    /// Inverse square root; fails on eigenvalues at or below the floor.
    pub fn matrix_inv_sqrt(&self) -> Result<Self> {
        let eig = self.eig();
        let mut vals = DVector::zeros(self.dim());
        for i in 0..self.dim() {
            let lam = eig.eigenvalues[i];
            if lam <= EIG_FLOOR {
                return Err(Error::SingularMatrix(format!(
                    "inverse square root of eigenvalue {lam:.3e}"
                )));
            }
            vals[i] = 1.0 / lam.sqrt();
        }
        Ok(Self::from_eig_values(&eig, &vals))
    }

    fn from_eig_values(eig: &EigDecomposition, vals: &DVector<f64>) -> Self {
        let n = vals.len();
        let mut scaled = eig.eigenvectors.clone();
        for j in 0..n {
            for i in 0..n {
                scaled[(i, j)] *= vals[j];
            }
        }
        Self::symmetrize(scaled * eig.eigenvectors.adjoint())
    }

    /// Partial trace over the first tensor factor B of a matrix on B⊗R.
    /// With dims (m, n) the input is an m×m array of n×n blocks and the
    /// result sums the diagonal blocks.
    pub fn partial_trace_b(&self, dims: (usize, usize)) -> Result<Self> {
        let (m, n) = dims;
        self.check_dims(dims)?;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..m {
            for j in 0..n {
                for l in 0..n {
                    out[(j, l)] += self.data[(i * n + j, i * n + l)];
                }
            }
        }
        Ok(Self::symmetrize(out))
    }

    /// Partial trace over the second tensor factor R: elementwise block
    /// traces, giving an m×m matrix.
    pub fn partial_trace_r(&self, dims: (usize, usize)) -> Result<Self> {
        let (m, n) = dims;
        self.check_dims(dims)?;
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            for k in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += self.data[(i * n + j, k * n + j)];
                }
                out[(i, k)] = acc;
            }
        }
        Ok(Self::symmetrize(out))
    }

    fn check_dims(&self, dims: (usize, usize)) -> Result<()> {
        let (m, n) = dims;
        if m == 0 || n == 0 || m * n != self.dim() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: matrix is {}x{} but dims are ({m}, {n})",
                self.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().eigenvalues[0]
    }
}

/// Quantum state: PSD Hermitian matrix with unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    inner: HermitianMatrix,
}

impl DensityMatrix {
    /// Wraps a matrix whose PSD/trace invariants were already established
    /// structurally (e.g. block-diagonal reduced states), skipping the
    /// eigendecomposition that `new` would run.
    pub(crate) fn from_validated(m: HermitianMatrix) -> Self {
        Self { inner: m }
    }

    /// Validates PSD (eigenvalues ≥ −1e-12) and unit trace (within 1e-12).
    pub fn new(m: HermitianMatrix) -> Result<Self> {
        let tr = m.trace();
        if (tr - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let min = m.min_eigenvalue();
        if min < -1e-12 {
            return Err(Error::InvalidInput(format!(
                "density matrix is not PSD: min eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { inner: m })
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            inner: HermitianMatrix::identity(n).scale(1.0 / n as f64),
        }
    }

    /// Pure state ψψ† from a unit vector.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "state vector norm is {norm}, expected 1"
            )));
        }
        Self::new(HermitianMatrix::outer(psi))
    }

    pub fn from_probabilities(p: &[f64]) -> Result<Self> {
        Self::new(HermitianMatrix::from_real_diagonal(p))
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.inner
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        self.inner.as_matrix()
    }

    pub fn eig(&self) -> EigDecomposition {
        self.inner.eig()
    }
}

/// Canonical purification of ρ: the unit vector ψ = Σ_i √λ_i v_i ⊗ v_i on
/// A⊗R together with the pure state ψψ†. Both partial traces of ψψ† equal ρ.
pub fn purification(rho: &DensityMatrix) -> (DVector<Complex64>, DensityMatrix) {
    let n = rho.dim();
    let eig = rho.eig();
    let mut psi = DVector::zeros(n * n);
    for i in 0..n {
        let lam = eig.eigenvalues[i].max(0.0);
        let root = lam.sqrt();
        let v = eig.eigenvectors.column(i);
        for a in 0..n {
            for b in 0..n {
                psi[a * n + b] += v[a] * v[b] * root;
            }
        }
    }
    let rho_ar = HermitianMatrix::outer(&psi);
    // Unit trace and rank one by construction.
    let state = DensityMatrix::new(rho_ar).expect("purification is a valid state");
    (psi, state)
}

/// First divided differences matrix for f(x) = eˣ: entry (i, j) is
/// (e^{λ_i} − e^{λ_j})/(λ_i − λ_j), with the stable symmetric form
/// e^{(λ_i+λ_j)/2} sinh(δ/2)/(δ/2) used when |δ| = |λ_i−λ_j| falls below the
/// switch threshold, and exactly e^{λ_i} on the diagonal.
pub fn divided_diff_exp(lams: &[f64]) -> DMatrix<f64> {
    let n = lams.len();
    DMatrix::from_fn(n, n, |i, j| divided_diff_exp_pair(lams[i], lams[j]))
}

pub(crate) fn divided_diff_exp_pair(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d == 0.0 {
        a.exp()
    } else if d.abs() < DIVIDED_DIFF_SWITCH {
        let h = d * 0.5;
        ((a + b) * 0.5).exp() * h.sinh() / h
    } else {
        (a.exp() - b.exp()) / d
    }
}

/// First divided differences for f(x) = log x (the kernel of the second
/// derivative of negative entropy): (log λ_i − log λ_j)/(λ_i − λ_j) with
/// limit 1/λ on the diagonal. Uses ln_1p for accuracy at near-coincident
/// eigenvalues.
pub(crate) fn divided_diff_log_pair(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d == 0.0 {
        1.0 / a
    } else {
        (d / b).ln_1p() / d
    }
}

/// Orthonormal basis of the real vector space of n×n Hermitian matrices
/// under ⟨X, Y⟩ = tr\[XY\]: the n diagonal units E_ii, then for i<j the
/// symmetric pairs (E_ij + E_ji)/√2 and antisymmetric pairs i(E_ij − E_ji)/√2.
pub fn hermitian_basis(n: usize) -> Vec<HermitianMatrix> {
    let mut basis = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut m = DMatrix::zeros(n, n);
        m[(i, i)] = Complex64::new(1.0, 0.0);
        basis.push(HermitianMatrix { data: m });
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut m = DMatrix::zeros(n, n);
            m[(i, j)] = Complex64::new(s, 0.0);
            m[(j, i)] = Complex64::new(s, 0.0);
            basis.push(HermitianMatrix { data: m });
            let mut m = DMatrix::zeros(n, n);
            m[(i, j)] = Complex64::new(0.0, s);
            m[(j, i)] = Complex64::new(0.0, -s);
            basis.push(HermitianMatrix { data: m });
        }
    }
    basis
}

/// Orthonormal basis of the traceless Hermitian matrices (dimension n²−1):
/// the off-diagonal pairs from `hermitian_basis` plus Gell-Mann style
/// diagonal matrices diag(1,…,1,−k,0,…)/√(k(k+1)).
pub fn traceless_hermitian_basis(n: usize) -> Vec<HermitianMatrix> {
    let mut basis = Vec::with_capacity(n * n - 1);
    for k in 1..n {
        let norm = 1.0 / ((k * (k + 1)) as f64).sqrt();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..k {
            m[(i, i)] = Complex64::new(norm, 0.0);
        }
        m[(k, k)] = Complex64::new(-(k as f64) * norm, 0.0);
        basis.push(HermitianMatrix { data: m });
    }
    basis.extend(hermitian_basis(n).into_iter().skip(n));
    basis
}
