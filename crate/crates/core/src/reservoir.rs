//! The engineered reservoir: thermal cavity relaxation, the per-sample map
//! and full trajectories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    self, AtomPreparation, Backend, TransitOptions, TransitProfile, TransitPropagator,
};
use crate::error::{Error, Result};
use crate::fock::{FieldState, HilbertConfig, PureFieldState, TRUNCATION_POPULATION_TOL};
use crate::linalg::{c, CMatrix};
use crate::lindblad::Dissipator;
use crate::metrics::MetricsRecord;

/// Cavity damping towards a thermal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    /// Photon lifetime T_c (s).
    pub t_c: f64,
    /// Mean thermal photon number.
    pub n_t: f64,
    /// When false the cavity is lossless.
    pub enabled: bool,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            t_c: 0.13,
            n_t: 0.05,
            enabled: true,
        }
    }
}

impl CavityParams {
    pub fn new(t_c: f64, n_t: f64) -> Result<Self> {
        let p = Self {
            t_c,
            n_t,
            enabled: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn lossless() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "T_c must be positive, got {}",
                self.t_c
            )));
        }
        if !(self.n_t >= 0.0 && self.n_t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "n_t must be >= 0, got {}",
                self.n_t
            )));
        }
        Ok(())
    }

    /// κ = 1/T_c.
    pub fn kappa(&self) -> f64 {
        1.0 / self.t_c
    }

    pub fn dissipator(&self) -> Dissipator {
        if self.enabled {
            Dissipator::new(self.kappa(), self.n_t)
        } else {
            Dissipator::new(0.0, 0.0)
        }
    }
}

/// Free evolution of the field under cavity damping for `duration` seconds.
pub fn relax(rho: &FieldState, duration: f64, cavity: &CavityParams) -> Result<FieldState> {
    if !(duration >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration must be >= 0, got {duration}"
        )));
    }
    cavity.validate()?;
    let out = cavity
        .dissipator()
        .evolve(rho.matrix(), rho.dim(), duration);
    Ok(FieldState::from_matrix_unchecked(out))
}

/// How empty and occupied samples are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingMode {
    /// Ensemble average `(1 − p)·empty + p·occupied`.
    Deterministic,
    /// One branch drawn per sample from a seeded generator.
    MonteCarlo { seed: u64 },
}

/// When to precompute the per-sample superoperator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CachePolicy {
    /// Cache a sliced (lossy numeric) transit when the run has more samples
    /// than the operator space has dimensions.
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirConfig {
    pub hilbert: HilbertConfig,
    pub profile: TransitProfile,
    pub cavity: CavityParams,
    /// Probability that a sample carries an atom.
    pub p_at: f64,
    /// Preparation angle of the atoms.
    pub u: f64,
    pub n_samples: usize,
    pub mixing: MixingMode,
    pub backend: Backend,
    /// `(Θ, φ₀)` used by the analytic backend instead of the profile integrals.
    pub analytic_angles: Option<(f64, f64)>,
    pub transit: TransitOptions,
    pub cache: CachePolicy,
    /// Run the step-halving check before the first sample (numeric backend).
    pub check_convergence: bool,
}

impl ReservoirConfig {
    pub fn new(hilbert: HilbertConfig, profile: TransitProfile) -> Self {
        Self {
            hilbert,
            profile,
            cavity: CavityParams::default(),
            p_at: 0.3,
            u: 0.0,
            n_samples: 200,
            mixing: MixingMode::Deterministic,
            backend: Backend::Numeric,
            analytic_angles: None,
            transit: TransitOptions::default(),
            cache: CachePolicy::Auto,
            check_convergence: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.cavity.validate()?;
        if !(0.0..=1.0).contains(&self.p_at) {
            return Err(Error::InvalidParameter(format!(
                "p_at must lie in [0, 1], got {}",
                self.p_at
            )));
        }
        if !self.u.is_finite() {
            return Err(Error::InvalidParameter("u must be finite".into()));
        }
        Ok(())
    }

    /// Sample period: the next atom enters as soon as the previous one leaves.
    pub fn sample_period(&self) -> f64 {
        self.profile.t_i()
    }
}

/// Per-sample superoperator acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct SuperOperator {
    d: usize,
    matrix: CMatrix,
}

impl SuperOperator {
    /// Tabulates a linear map by its action on the matrix units.
    pub fn tabulate(d: usize, map: impl Fn(&CMatrix) -> CMatrix + Sync) -> Self {
        use rayon::prelude::*;
        let columns: Vec<CMatrix> = (0..d * d)
            .into_par_iter()
            .map(|k| {
                let mut unit = CMatrix::zeros(d, d);
                unit[(k % d, k / d)] = c(1.0, 0.0);
                map(&unit)
            })
            .collect();
        let mut matrix = CMatrix::zeros(d * d, d * d);
        for (k, col) in columns.into_iter().enumerate() {
            matrix.column_mut(k).copy_from_slice(col.as_slice());
        }
        Self { d, matrix }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = &self.matrix * crate::linalg::CVector::from_column_slice(rho.as_slice());
        CMatrix::from_column_slice(self.d, self.d, v.as_slice())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// One sample of the atom stream: an atom crosses with probability `p_at`,
/// otherwise the field only relaxes for `t_i`.
#[derive(Debug, Clone)]
pub struct SampleMap {
    d: usize,
    p_at: f64,
    t_i: f64,
    atom: AtomPreparation,
    transit: TransitPropagator,
    dissipator: Dissipator,
    cache: Option<SuperOperator>,
}

impl SampleMap {
    pub fn new(config: &ReservoirConfig) -> Result<Self> {
        config.validate()?;
        let cfg = &config.hilbert;
        let dissipator = config.cavity.dissipator();
        let t_i = config.sample_period();
        let transit = match config.backend {
            Backend::Numeric => {
                TransitPropagator::numeric(&config.profile, cfg, dissipator, &config.transit)?
            }
            Backend::Analytic => {
                let (theta, phi0) = match config.analytic_angles {
                    Some(angles) => angles,
                    None => dynamics::analytic_angles(&config.profile)?,
                };
                TransitPropagator::analytic(theta, phi0, cfg, dissipator, t_i)
            }
        };
        let mut map = Self {
            d: cfg.dim(),
            p_at: config.p_at,
            t_i,
            atom: AtomPreparation::new(config.u),
            transit,
            dissipator,
            cache: None,
        };
        let d2 = map.d * map.d;
        let use_cache = match config.cache {
            CachePolicy::Always => true,
            CachePolicy::Never => false,
            // a unitary transit is already cheaper to apply than a d⁴ table
            CachePolicy::Auto => {
                config.mixing == MixingMode::Deterministic
                    && map.transit.unitary().is_none()
                    && config.n_samples > d2
            }
        };
        if use_cache {
            let sup = SuperOperator::tabulate(map.d, |r| map.deterministic_matrix(r));
            map.cache = Some(sup);
        }
        Ok(map)
    }

    pub fn field_dim(&self) -> usize {
        self.d
    }

    pub fn is_cached(&self) -> bool {
        self.cache.is_some()
    }

    /// Field after an occupied sample, atom traced out.
    pub fn occupied(&self, rho: &CMatrix) -> CMatrix {
        self.transit.apply_field(rho, &self.atom)
    }

    /// Field after an empty sample.
    pub fn empty(&self, rho: &CMatrix) -> CMatrix {
        self.dissipator.evolve(rho, self.d, self.t_i)
    }

    fn deterministic_matrix(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.d, self.d);
        if self.p_at > 0.0 {
            out += self.occupied(rho) * c(self.p_at, 0.0);
        }
        if self.p_at < 1.0 {
            out += self.empty(rho) * c(1.0 - self.p_at, 0.0);
        }
        out
    }

    /// Ensemble-averaged sample.
    pub fn apply(&self, rho: &FieldState) -> Result<FieldState> {
        self.check_dim(rho)?;
        let out = match &self.cache {
            Some(sup) => sup.apply(rho.matrix()),
            None => self.deterministic_matrix(rho.matrix()),
        };
        finish(out)
    }

    /// Sample whose occupancy has already been decided.
    pub fn apply_branch(&self, rho: &FieldState, atom_present: bool) -> Result<FieldState> {
        self.check_dim(rho)?;
        let out = if atom_present {
            self.occupied(rho.matrix())
        } else {
            self.empty(rho.matrix())
        };
        finish(out)
    }

    fn check_dim(&self, rho: &FieldState) -> Result<()> {
        if rho.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: rho.dim(),
            });
        }
        Ok(())
    }
}

/// Restores exact Hermiticity lost to rounding and validates the result.
fn finish(mut m: CMatrix) -> Result<FieldState> {
    let adj = m.adjoint();
    m = (&m + adj) * c(0.5, 0.0);
    FieldState::new(m)
}

/// Single-sample map in the configured mixing mode, for callers that step
/// by hand. Monte Carlo mode consumes one draw from `rng`.
pub fn sample_map(
    rho: &FieldState,
    map: &SampleMap,
    mixing: MixingMode,
    rng: &mut ChaCha8Rng,
) -> Result<FieldState> {
    match mixing {
        MixingMode::Deterministic => map.apply(rho),
        MixingMode::MonteCarlo { .. } => {
            let present = rng.gen::<f64>() < map.p_at;
            map.apply_branch(rho, present)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub final_state: FieldState,
    /// One record per sample, starting with the initial state.
    pub records: Vec<MetricsRecord>,
    /// Largest population above the guard level seen during the run.
    pub truncation_peak: f64,
    /// Every intermediate state, when requested.
    pub states: Option<Vec<FieldState>>,
    pub sample_period: f64,
    pub seed: Option<u64>,
}

/// Extras for [`run_trajectory_with`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Reference for the per-sample fidelity column.
    pub reference: Option<PureFieldState>,
    pub keep_states: bool,
}

pub fn run_trajectory(
    rho0: &FieldState,
    config: &ReservoirConfig,
    observer: &mut dyn FnMut(&MetricsRecord, &FieldState),
) -> Result<TrajectoryResult> {
    run_trajectory_with(rho0, config, &RunOptions::default(), observer)
}

pub fn run_trajectory_with(
    rho0: &FieldState,
    config: &ReservoirConfig,
    options: &RunOptions,
    observer: &mut dyn FnMut(&MetricsRecord, &FieldState),
) -> Result<TrajectoryResult> {
    rho0.validate()?;
    let map = SampleMap::new(config)?;
    if map.field_dim() != rho0.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.field_dim(),
            got: rho0.dim(),
        });
    }
    if config.check_convergence && config.backend == Backend::Numeric {
        dynamics::check_convergence(
            &config.profile,
            &config.hilbert,
            config.cavity.dissipator(),
            &config.transit,
            rho0.matrix(),
            &AtomPreparation::new(config.u),
            1e-4,
        )?;
    }
    let seed = match config.mixing {
        MixingMode::MonteCarlo { seed } => Some(seed),
        MixingMode::Deterministic => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let period = map.t_i;
    let reference = options.reference.as_ref();

    let mut traj = TrajectoryResult {
        final_state: rho0.clone(),
        records: Vec::with_capacity(config.n_samples + 1),
        truncation_peak: 0.0,
        states: options.keep_states.then(|| vec![rho0.clone()]),
        sample_period: period,
        seed,
    };
    let first = MetricsRecord::measure(rho0, 0, 0.0, reference);
    observer(&first, rho0);
    traj.records.push(first);
    traj.truncation_peak = rho0.guard_population(&config.hilbert);

    let mut rho = rho0.clone();
    for j in 1..=config.n_samples {
        rho = sample_map(&rho, &map, config.mixing, &mut rng).map_err(|e| e.at_sample(j))?;
        let peak = rho.guard_population(&config.hilbert);
        traj.truncation_peak = traj.truncation_peak.max(peak);
        if peak > TRUNCATION_POPULATION_TOL {
            return Err(Error::Truncation(format!(
                "population {peak:.2e} above level {} exceeds {TRUNCATION_POPULATION_TOL:.0e}",
                config.hilbert.guard_level()
            ))
            .at_sample(j));
        }
        let record = MetricsRecord::measure(&rho, j, j as f64 * period, reference);
        observer(&record, &rho);
        traj.records.push(record);
        if let Some(states) = traj.states.as_mut() {
            states.push(rho.clone());
        }
    }
    traj.final_state = rho;
    Ok(traj)
}

/// Continues a finished trajectory with the atom stream switched off, on
/// the same sample grid, for `extra_time` seconds (rounded up to whole
/// periods).
pub fn switch_off_decay(
    traj: &TrajectoryResult,
    extra_time: f64,
    config: &ReservoirConfig,
    reference: Option<&PureFieldState>,
) -> Result<TrajectoryResult> {
    if !(extra_time >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "extra time must be >= 0, got {extra_time}"
        )));
    }
    let mut out = traj.clone();
    let period = traj.sample_period;
    let extra = (extra_time / period - 1e-9).ceil().max(0.0) as usize;
    let dissipator = config.cavity.dissipator();
    let start = traj.records.last().map_or(0, |r| r.sample_index);
    let mut rho = traj.final_state.clone();
    for k in 1..=extra {
        let j = start + k;
        rho = finish(dissipator.evolve(rho.matrix(), rho.dim(), period))
            .map_err(|e| e.at_sample(j))?;
        out.records.push(MetricsRecord::measure(
            &rho,
            j,
            j as f64 * period,
            reference,
        ));
        if let Some(states) = out.states.as_mut() {
            states.push(rho.clone());
        }
    }
    out.final_state = rho;
    Ok(out)
}
