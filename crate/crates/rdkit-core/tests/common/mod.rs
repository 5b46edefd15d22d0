//! Shared helpers for the integration suites: deterministic random states
//! and central finite differences.
//!
//! Each integration target compiles this module separately and uses a
//! different subset of it.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use rdkit_core::entropy::BipartiteState;
use rdkit_core::hermitian::{DensityMatrix, HermitianMatrix};
use rdkit_core::solver::pseudo_project;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha12Rng) -> HermitianMatrix {
    let m = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    HermitianMatrix::from_matrix((&m + m.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
}

pub fn random_density(n: usize, rng: &mut ChaCha12Rng) -> DensityMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let h = HermitianMatrix::from_matrix(&g * g.adjoint()).unwrap();
    let tr = h.trace();
    DensityMatrix::new(h.scale(1.0 / tr)).unwrap()
}

/// Random interior density matrix: mixed with the identity so line searches
/// and finite-difference probes stay inside the PSD cone.
pub fn random_interior_density(n: usize, rng: &mut ChaCha12Rng) -> DensityMatrix {
    let rho = random_density(n, rng);
    let mixed = rho
        .as_hermitian()
        .scale(0.9)
        .add(&HermitianMatrix::identity(n).scale(0.1 / n as f64));
    DensityMatrix::new(mixed).unwrap()
}

/// Random interior state feasible for tr_B σ = ρ_A.
pub fn random_feasible_state(
    dims: (usize, usize),
    rho_a: &DensityMatrix,
    rng: &mut ChaCha12Rng,
) -> BipartiteState {
    let (m, n) = dims;
    let raw = random_interior_density(m * n, rng);
    pseudo_project(&BipartiteState::new(raw, dims).unwrap(), rho_a).unwrap()
}

/// Random traceless Hermitian direction with unit Frobenius norm.
pub fn random_traceless_direction(n: usize, rng: &mut ChaCha12Rng) -> HermitianMatrix {
    let h = random_hermitian(n, rng);
    let traceless = h.sub(&HermitianMatrix::identity(n).scale(h.trace() / n as f64));
    traceless.scale(1.0 / traceless.frobenius_norm())
}

/// Central finite difference of a scalar function along direction `v`.
pub fn central_difference(
    f: impl Fn(&HermitianMatrix) -> f64,
    x: &HermitianMatrix,
    v: &HermitianMatrix,
    h: f64,
) -> f64 {
    let plus = f(&x.add(&v.scale(h)));
    let minus = f(&x.sub(&v.scale(h)));
    (plus - minus) / (2.0 * h)
}

/// Asserts a relative match with a floor for near-zero references.
pub fn assert_close_rel(got: f64, want: f64, rel: f64, scale_floor: f64, label: &str) {
    let scale = want.abs().max(scale_floor);
    assert!(
        (got - want).abs() <= rel * scale,
        "{label}: got {got:.12e}, want {want:.12e} (rel err {:.3e} > {rel:.1e})",
        (got - want).abs() / scale
    );
}
