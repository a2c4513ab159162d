//! Truncated Fock-space representation of the cavity mode.
//!
//! Operators are dense `(n_max + 1) × (n_max + 1)` complex matrices in the
//! photon-number basis `|0⟩ … |n_max⟩`. Pure states are amplitude vectors,
//! mixed states density matrices.

use std::f64::consts::PI;
use std::ops::Mul;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64};

/// Tolerances applied to every [`FieldState`].
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const PSD_TOL: f64 = 1e-8;
/// Maximum population tolerated in the top tenth of the Fock ladder.
pub const TRUNCATION_POPULATION_TOL: f64 = 1e-4;
/// Coherent amplitudes must satisfy `|α|² ≤ COHERENT_GUARD · n_max`.
pub const COHERENT_GUARD: f64 = 0.6;

/// Photon-number cutoff of the truncated field space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertConfig {
    n_max: usize,
}

impl HilbertConfig {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidParameter(format!(
                "n_max must be >= 1, got {n_max}"
            )));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Field dimension `n_max + 1`.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// First level counted by the truncation guard: levels `n ≥ ⌈0.9·n_max⌉`.
    pub fn guard_level(&self) -> usize {
        ((0.9 * self.n_max as f64).ceil() as usize).min(self.n_max)
    }

    pub fn max_mean_photons(&self) -> f64 {
        COHERENT_GUARD * self.n_max as f64
    }
}

impl Default for HilbertConfig {
    /// Sixty basis states, `|0⟩ … |59⟩`.
    fn default() -> Self {
        Self { n_max: 59 }
    }
}

/// Dense operator on the truncated field space.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOperator {
    matrix: CMatrix,
}

impl FieldOperator {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        Ok(Self { matrix })
    }

    pub fn identity(cfg: &HilbertConfig) -> Self {
        Self {
            matrix: CMatrix::identity(cfg.dim(), cfg.dim()),
        }
    }

    /// Diagonal operator `f(N)`.
    pub fn diagonal_fn(cfg: &HilbertConfig, f: impl Fn(usize) -> C64) -> Self {
        let d = cfg.dim();
        let mut m = CMatrix::zeros(d, d);
        for n in 0..d {
            m[(n, n)] = f(n);
        }
        Self { matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn apply(&self, psi: &PureFieldState) -> CVector {
        &self.matrix * psi.amplitudes()
    }
}

impl Mul for &FieldOperator {
    type Output = FieldOperator;
    fn mul(self, rhs: &FieldOperator) -> FieldOperator {
        FieldOperator {
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

/// Annihilation, creation and number operators.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub a: FieldOperator,
    pub a_dagger: FieldOperator,
    pub n: FieldOperator,
}

/// Builds `a` (with `a[n−1][n] = √n`), `a†` and `N = diag(0..n_max)`.
pub fn make_ladder(cfg: &HilbertConfig) -> Ladder {
    let d = cfg.dim();
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    let a_dagger = a.adjoint();
    let n = FieldOperator::diagonal_fn(cfg, |k| c(k as f64, 0.0));
    Ladder {
        a: FieldOperator { matrix: a },
        a_dagger: FieldOperator { matrix: a_dagger },
        n,
    }
}

/// Normalised pure field state with a fixed global phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PureFieldState {
    amplitudes: CVector,
}

impl PureFieldState {
    /// Normalises `amplitudes` and fixes the global phase so that the first
    /// non-negligible amplitude is real and positive.
    pub fn from_amplitudes(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState(
                "pure state has zero or non-finite norm".into(),
            ));
        }
        let mut v = amplitudes / c(norm, 0.0);
        if let Some(i) = v.iter().position(|z| z.norm() > 1e-12) {
            let z = v[i];
            v *= z.conj() / z.norm();
            v[i] = c(z.norm(), 0.0);
        }
        Ok(Self { amplitudes: v })
    }

    pub fn fock(cfg: &HilbertConfig, n: usize) -> Result<Self> {
        if n > cfg.n_max() {
            return Err(Error::Truncation(format!(
                "Fock level {n} exceeds n_max = {}",
                cfg.n_max()
            )));
        }
        let mut v = CVector::zeros(cfg.dim());
        v[n] = c(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub fn vacuum(cfg: &HilbertConfig) -> Self {
        Self::fock(cfg, 0).expect("vacuum is always representable")
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureFieldState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn expect(&self, op: &FieldOperator) -> C64 {
        linalg::sandwich(&self.amplitudes, op.matrix())
    }

    pub fn to_density(&self) -> FieldState {
        FieldState {
            rho: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

/// Accumulated Kerr phase `φ₀`, with `γ_K t_K = ζ_K t_K = φ₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrParams {
    pub phi0: f64,
}

impl KerrParams {
    pub fn new(phi0: f64) -> Result<Self> {
        if !phi0.is_finite() {
            return Err(Error::InvalidParameter("Kerr phase must be finite".into()));
        }
        Ok(Self { phi0 })
    }

    /// `h₀(n) = φ₀ n (n + 1)`.
    pub fn h0(&self, n: usize) -> f64 {
        self.phi0 * (n * (n + 1)) as f64
    }
}

/// Diagonal unitary `exp(−i h₀(N))`.
pub fn kerr_propagator(params: &KerrParams, cfg: &HilbertConfig) -> FieldOperator {
    FieldOperator::diagonal_fn(cfg, |n| C64::from_polar(1.0, -params.h0(n)))
}

fn check_coherent_guard(alpha: C64, cfg: &HilbertConfig) -> Result<()> {
    if alpha.norm_sqr() > cfg.max_mean_photons() {
        return Err(Error::Truncation(format!(
            "|alpha|^2 = {:.4} exceeds {COHERENT_GUARD}*n_max = {:.4}",
            alpha.norm_sqr(),
            cfg.max_mean_photons()
        )));
    }
    Ok(())
}

/// Unnormalised truncated coherent amplitudes `e^{−|α|²/2} αⁿ/√n!`, in log space.
fn coherent_amplitudes(alpha: C64, dim: usize) -> CVector {
    let r = alpha.norm();
    let phase = alpha.arg();
    CVector::from_fn(dim, |n, _| {
        if n == 0 {
            return c((-0.5 * r * r).exp(), 0.0);
        }
        if r == 0.0 {
            return c(0.0, 0.0);
        }
        let ln_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * linalg::ln_factorial(n);
        C64::from_polar(ln_mag.exp(), n as f64 * phase)
    })
}

/// Coherent state `|α⟩`, renormalised after truncation.
pub fn coherent_state(alpha: C64, cfg: &HilbertConfig) -> Result<PureFieldState> {
    check_coherent_guard(alpha, cfg)?;
    PureFieldState::from_amplitudes(coherent_amplitudes(alpha, cfg.dim()))
}

/// Overlap `⟨β|γ⟩` of two untruncated coherent states.
pub fn coherent_overlap(beta: C64, gamma: C64) -> C64 {
    (-0.5 * beta.norm_sqr() - 0.5 * gamma.norm_sqr() + beta.conj() * gamma).exp()
}

fn mfss_components(alpha: C64, k: usize, rel_phases: &[f64]) -> Result<Vec<(C64, C64)>> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "a superposition needs k >= 1 components".into(),
        ));
    }
    if rel_phases.len() != k - 1 {
        return Err(Error::InvalidParameter(format!(
            "expected {} relative phases for k = {k}, got {}",
            k - 1,
            rel_phases.len()
        )));
    }
    Ok((0..k)
        .map(|j| {
            let weight = if j == 0 {
                c(1.0, 0.0)
            } else {
                C64::from_polar(1.0, rel_phases[j - 1])
            };
            let amp = alpha * C64::from_polar(1.0, 2.0 * PI * j as f64 / k as f64);
            (weight, amp)
        })
        .collect())
}

/// `1/‖Σ_j e^{iθ_j}|α e^{2πij/k}⟩‖`, from the exact Gram matrix of the
/// (non-orthogonal, untruncated) coherent components.
pub fn mfss_normalization(alpha: C64, k: usize, rel_phases: &[f64]) -> Result<f64> {
    let comps = mfss_components(alpha, k, rel_phases)?;
    let mut norm_sqr = C64::new(0.0, 0.0);
    for (wj, aj) in &comps {
        for (wl, al) in &comps {
            norm_sqr += wj.conj() * wl * coherent_overlap(*aj, *al);
        }
    }
    Ok(1.0 / norm_sqr.re.sqrt())
}

/// Superposition `Σ_j e^{iθ_j}|α e^{2πij/k}⟩` of `k` equally spaced coherent
/// components (`θ_0 = 0`).
pub fn ideal_mfss(
    alpha: C64,
    k: usize,
    rel_phases: &[f64],
    cfg: &HilbertConfig,
) -> Result<PureFieldState> {
    check_coherent_guard(alpha, cfg)?;
    let comps = mfss_components(alpha, k, rel_phases)?;
    let scale = mfss_normalization(alpha, k, rel_phases)?;
    let mut v = CVector::zeros(cfg.dim());
    for (w, amp) in comps {
        v += coherent_amplitudes(amp, cfg.dim()) * w;
    }
    v *= c(scale, 0.0);
    PureFieldState::from_amplitudes(v)
}

/// Density operator of the cavity field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    rho: CMatrix,
}

impl FieldState {
    /// Wraps `rho` after checking Hermiticity, unit trace and positivity.
    pub fn new(rho: CMatrix) -> Result<Self> {
        let s = Self { rho };
        s.validate()?;
        Ok(s)
    }

    /// Wraps `rho` without the eigenvalue-based checks.
    pub(crate) fn from_matrix_unchecked(rho: CMatrix) -> Self {
        Self { rho }
    }

    pub fn vacuum(cfg: &HilbertConfig) -> Self {
        PureFieldState::vacuum(cfg).to_density()
    }

    /// Thermal state with mean photon number `n_th`, renormalised on the
    /// truncated ladder.
    pub fn thermal(cfg: &HilbertConfig, n_th: f64) -> Result<Self> {
        if !(n_th >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "thermal occupation {n_th} < 0"
            )));
        }
        if n_th == 0.0 {
            return Ok(Self::vacuum(cfg));
        }
        let ratio = n_th / (1.0 + n_th);
        let weights: Vec<f64> = (0..cfg.dim()).map(|n| ratio.powi(n as i32)).collect();
        let total: f64 = weights.iter().sum();
        let mut rho = CMatrix::zeros(cfg.dim(), cfg.dim());
        for (n, w) in weights.iter().enumerate() {
            rho[(n, n)] = c(w / total, 0.0);
        }
        Ok(Self { rho })
    }

    pub fn maximally_mixed(cfg: &HilbertConfig) -> Self {
        let d = cfg.dim();
        Self {
            rho: CMatrix::identity(d, d) * c(1.0 / d as f64, 0.0),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_matrix(self) -> CMatrix {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.rho)
    }

    pub fn population(&self, n: usize) -> f64 {
        self.rho[(n, n)].re
    }

    /// Total population of the levels watched by the truncation guard.
    pub fn guard_population(&self, cfg: &HilbertConfig) -> f64 {
        (cfg.guard_level()..self.dim())
            .map(|n| self.population(n))
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let herm = linalg::hermiticity_error(&self.rho);
        if !(herm <= HERMITIAN_TOL) {
            return Err(Error::InvalidState(format!("Hermiticity error {herm:.3e}")));
        }
        let tr_err = (self.trace() - c(1.0, 0.0)).norm();
        if !(tr_err <= TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace error {tr_err:.3e}")));
        }
        let min_eig = linalg::min_eigenvalue(&self.rho);
        if !(min_eig >= -PSD_TOL) {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(())
    }

    /// `p ρ + (1 − p) σ`.
    pub fn mix(&self, other: &FieldState, p: f64) -> Result<FieldState> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            rho: &self.rho * c(p, 0.0) + &other.rho * c(1.0 - p, 0.0),
        })
    }

    /// Conjugation `U ρ U†`.
    pub fn conjugate_by(&self, u: &FieldOperator) -> FieldState {
        Self {
            rho: u.matrix() * &self.rho * u.matrix().adjoint(),
        }
    }
}

impl From<&PureFieldState> for FieldState {
    fn from(psi: &PureFieldState) -> Self {
        psi.to_density()
    }
}
