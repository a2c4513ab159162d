#![allow(dead_code)]

use cavity_reservoir::fock::{FieldState, HilbertConfig};
use std::f64::consts::PI;

use cavity_reservoir::linalg::{self, c, CMatrix, CVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn hilbert(n_max: usize) -> HilbertConfig {
    HilbertConfig::new(n_max).unwrap()
}

/// `G G† / Tr` for a Ginibre matrix `G` whose rows are damped towards high
/// photon numbers, so the state stays away from the truncation edge.
pub fn random_density(d: usize, rank: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edge = (d as f64 * 0.5).max(1.0);
    let g = CMatrix::from_fn(d, rank, |i, _| {
        let damp = (-(i as f64 / edge).powi(4)).exp();
        c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * damp
    });
    let rho = &g * g.adjoint();
    let tr = linalg::trace(&rho);
    rho / tr
}

pub fn random_state(cfg: &HilbertConfig, rank: usize, seed: u64) -> FieldState {
    FieldState::new(random_density(cfg.dim(), rank, seed)).unwrap()
}

pub fn random_ket(d: usize, seed: u64) -> linalg::CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = linalg::CVector::from_fn(d, |i, _| {
        let damp = (-(i as f64 / (0.5 * d as f64)).powi(4)).exp();
        c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * damp
    });
    let norm = v.norm();
    v / c(norm, 0.0)
}

/// Checks the three density-matrix invariants.
pub fn assert_density(m: &CMatrix, what: &str) {
    assert!(
        linalg::hermiticity_error(m) < 1e-10,
        "{what}: not Hermitian"
    );
    assert!(
        (linalg::trace(m).re - 1.0).abs() < 1e-8,
        "{what}: trace {}",
        linalg::trace(m)
    );
    let lo = linalg::min_eigenvalue(m);
    assert!(lo > -1e-8, "{what}: eigenvalue {lo}");
}

/// Position-like quadrature density `⟨x|ρ|x⟩` for `X = (a + a†)/2`, from
/// normalised Hermite functions.
pub fn quadrature_density(rho: &FieldState, x: f64) -> f64 {
    let d = rho.dim();
    let q = 2f64.sqrt() * x;
    let mut psi = vec![0.0; d];
    psi[0] = PI.powf(-0.25) * (-0.5 * q * q).exp();
    if d > 1 {
        psi[1] = 2f64.sqrt() * q * psi[0];
    }
    for n in 1..d - 1 {
        psi[n + 1] = (2.0 / (n + 1) as f64).sqrt() * q * psi[n] - (n as f64 / (n + 1) as f64).sqrt() * psi[n - 1];
    }
    let v = CVector::from_iterator(d, psi.iter().map(|&p| c(p, 0.0)));
    2f64.sqrt() * linalg::sandwich(&v, rho.matrix()).re
}
