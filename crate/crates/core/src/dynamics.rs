//! Atom-field propagators for one atomic transit.
//!
//! The joint space is `(|g⟩, |e⟩) ⊗ (|0⟩ … |n_max⟩)` with index `s·d + n`,
//! `s = 0` for `|g⟩` and `s = 1` for `|e⟩`. The Jaynes-Cummings Hamiltonian
//! only couples the pairs `{|e,n⟩, |g,n+1⟩}`, which the numeric integrator
//! exploits through [`PairBlocks`].

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fock::{self, FieldState, HilbertConfig, KerrParams};
use crate::linalg::{self, c, CMatrix, C64};
use crate::lindblad::{Dissipator, Scratch};
use crate::quad;
use crate::reservoir::CavityParams;

const QUAD_PANELS: usize = 256;

pub const G: usize = 0;
pub const E: usize = 1;

/// Gaussian-mode crossing of a single atom with a Stark-switched detuning.
///
/// All rates are angular frequencies (rad/s); time zero is the crossing of
/// the cavity axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitProfile {
    /// Peak vacuum Rabi frequency Ω₀.
    pub omega0: f64,
    /// Mode waist (m).
    pub w: f64,
    /// Atomic velocity (m/s).
    pub v: f64,
    /// Dispersive detuning magnitude Δ.
    pub delta_disp: f64,
    /// Duration of the resonant window centred on t = 0 (s).
    pub t_r: f64,
    /// Half-width of the interaction window in waist units.
    pub window_factor: f64,
}

impl TransitProfile {
    pub const DEFAULT_WINDOW_FACTOR: f64 = 1.5;

    pub fn new(omega0: f64, w: f64, v: f64, delta_disp: f64, t_r: f64) -> Result<Self> {
        let p = Self {
            omega0,
            w,
            v,
            delta_disp,
            t_r,
            window_factor: Self::DEFAULT_WINDOW_FACTOR,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return bad("omega0 must be positive");
        }
        if !(self.w > 0.0 && self.v > 0.0) {
            return bad("waist and velocity must be positive");
        }
        if !(self.delta_disp >= 0.0 && self.delta_disp.is_finite()) {
            return bad("dispersive detuning must be >= 0");
        }
        if !(self.window_factor > 0.0) {
            return bad("window factor must be positive");
        }
        if !(self.t_r > 0.0 && self.t_r < self.t_i()) {
            return bad("resonant window must satisfy 0 < t_r < t_i");
        }
        Ok(())
    }

    /// Total interaction time `t_i = 2·window_factor·w/v`.
    pub fn t_i(&self) -> f64 {
        2.0 * self.window_factor * self.w / self.v
    }

    pub fn start(&self) -> f64 {
        -0.5 * self.t_i()
    }

    pub fn end(&self) -> f64 {
        0.5 * self.t_i()
    }
}

/// `Ω(t) = Ω₀ exp(−v²t²/w²)`.
pub fn rabi_coupling(t: f64, profile: &TransitProfile) -> f64 {
    let x = profile.v * t / profile.w;
    profile.omega0 * (-x * x).exp()
}

/// Stark ladder: `+Δ` before the resonant window, `0` inside it (edges
/// included), `−Δ` after it.
pub fn detuning_schedule(t: f64, profile: &TransitProfile) -> Result<f64> {
    let (start, end) = (profile.start(), profile.end());
    if !(t >= start && t <= end) {
        return Err(Error::OutOfWindow { t, start, end });
    }
    let half = 0.5 * profile.t_r;
    Ok(if t < -half {
        profile.delta_disp
    } else if t > half {
        -profile.delta_disp
    } else {
        0.0
    })
}

/// Vacuum Rabi angle Θ = ∫Ω dt over the resonant window.
pub fn theta_of(profile: &TransitProfile) -> f64 {
    let half = 0.5 * profile.t_r;
    quad::integrate(|t| rabi_coupling(t, profile), -half, half, QUAD_PANELS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispersiveSegment {
    First,
    Second,
}

/// Dispersive phase `φ₀ = −1/(4δ) ∫Ω² dt` over one dispersive segment, with
/// `δ = +Δ` on the first and `δ = −Δ` on the second.
pub fn phi0_of(profile: &TransitProfile, segment: DispersiveSegment) -> Result<f64> {
    if profile.delta_disp == 0.0 {
        return Err(Error::ZeroDetuning);
    }
    let half = 0.5 * profile.t_r;
    let (a, b, delta) = match segment {
        DispersiveSegment::First => (profile.start(), -half, profile.delta_disp),
        DispersiveSegment::Second => (half, profile.end(), -profile.delta_disp),
    };
    let integral = quad::integrate(|t| rabi_coupling(t, profile).powi(2), a, b, QUAD_PANELS);
    Ok(-integral / (4.0 * delta))
}

/// Atom prepared in `cos(u/2)|g⟩ + sin(u/2)|e⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomPreparation {
    pub u: f64,
}

impl AtomPreparation {
    pub fn new(u: f64) -> Self {
        Self { u }
    }

    /// Real amplitudes on `(|g⟩, |e⟩)`.
    pub fn amplitudes(&self) -> [f64; 2] {
        [(0.5 * self.u).cos(), (0.5 * self.u).sin()]
    }
}

fn joint_dim(cfg: &HilbertConfig) -> usize {
    2 * cfg.dim()
}

/// Dense operator on atom ⊗ field.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOperator {
    matrix: CMatrix,
    d: usize,
}

impl JointOperator {
    pub fn from_matrix(matrix: CMatrix, cfg: &HilbertConfig) -> Result<Self> {
        let n = joint_dim(cfg);
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        Ok(Self {
            matrix,
            d: cfg.dim(),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn field_dim(&self) -> usize {
        self.d
    }

    /// Field block `⟨s|U|s'⟩`.
    pub fn block(&self, s: usize, s_prime: usize) -> CMatrix {
        let d = self.d;
        self.matrix.view((s * d, s_prime * d), (d, d)).into_owned()
    }

    /// Kraus operators `⟨s|U|atom⟩` of the channel on the field.
    pub fn kraus(&self, atom: &AtomPreparation) -> [CMatrix; 2] {
        let [cg, ce] = atom.amplitudes();
        let k = |s| self.block(s, G) * c(cg, 0.0) + self.block(s, E) * c(ce, 0.0);
        [k(G), k(E)]
    }

    pub fn unitarity_error(&self) -> f64 {
        linalg::unitarity_error(&self.matrix)
    }

    /// Block-diagonal operator `I_atom ⊗ f`.
    pub fn field_only(f: &CMatrix, cfg: &HilbertConfig) -> Self {
        let d = cfg.dim();
        let mut m = CMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(f);
        m.view_mut((d, d), (d, d)).copy_from(f);
        Self { matrix: m, d }
    }

    fn from_blocks(gg: &CMatrix, ge: &CMatrix, eg: &CMatrix, ee: &CMatrix) -> Self {
        let d = gg.nrows();
        let mut m = CMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(gg);
        m.view_mut((0, d), (d, d)).copy_from(ge);
        m.view_mut((d, 0), (d, d)).copy_from(eg);
        m.view_mut((d, d), (d, d)).copy_from(ee);
        Self { matrix: m, d }
    }
}

impl std::ops::Mul for &JointOperator {
    type Output = JointOperator;
    fn mul(self, rhs: &JointOperator) -> JointOperator {
        JointOperator {
            matrix: &self.matrix * &rhs.matrix,
            d: self.d,
        }
    }
}

/// Density operator of atom ⊗ field.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    rho: CMatrix,
    d: usize,
}

impl JointState {
    pub fn new(rho: CMatrix, cfg: &HilbertConfig) -> Result<Self> {
        let n = joint_dim(cfg);
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rho.nrows(),
            });
        }
        let s = Self { rho, d: cfg.dim() };
        s.validate()?;
        Ok(s)
    }

    /// `ρ_field ⊗ |u_at⟩⟨u_at|`.
    pub fn product(field: &FieldState, atom: &AtomPreparation) -> Self {
        Self {
            rho: product_matrix(field.matrix(), atom),
            d: field.dim(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn validate(&self) -> Result<()> {
        FieldState::from_matrix_unchecked(self.rho.clone()).validate()
    }

    /// Field state after tracing out the atom.
    pub fn field(&self) -> FieldState {
        FieldState::from_matrix_unchecked(partial_trace_atom(&self.rho, self.d))
    }

    /// Population of the atomic level `s`.
    pub fn atom_population(&self, s: usize) -> f64 {
        (0..self.d)
            .map(|n| self.rho[(s * self.d + n, s * self.d + n)].re)
            .sum()
    }
}

pub(crate) fn product_matrix(field: &CMatrix, atom: &AtomPreparation) -> CMatrix {
    let d = field.nrows();
    let amps = atom.amplitudes();
    let mut m = CMatrix::zeros(2 * d, 2 * d);
    for s in 0..2 {
        for s2 in 0..2 {
            let w = amps[s] * amps[s2];
            if w != 0.0 {
                m.view_mut((s * d, s2 * d), (d, d))
                    .copy_from(&(field * c(w, 0.0)));
            }
        }
    }
    m
}

pub(crate) fn partial_trace_atom(rho: &CMatrix, d: usize) -> CMatrix {
    rho.view((0, 0), (d, d)).into_owned() + rho.view((d, d), (d, d))
}

/// `sin(Θ√n/2)/√n`, continued by `Θ/2` at `n = 0`.
fn sinc_factor(theta: f64, n: usize) -> f64 {
    if n == 0 {
        0.5 * theta
    } else {
        let r = (n as f64).sqrt();
        (0.5 * theta * r).sin() / r
    }
}

fn diag(cfg: &HilbertConfig, f: impl Fn(usize) -> C64) -> CMatrix {
    fock::FieldOperator::diagonal_fn(cfg, f).into_matrix()
}

/// Resonant propagator `U_r(Θ)`, assembled block by block from the ladder
/// operators and functions of N.
pub fn u_resonant(theta: f64, cfg: &HilbertConfig) -> JointOperator {
    u_composite(theta, 0.0, cfg)
}

/// Dispersive propagator `U_d(φ₀) = |g⟩⟨g| e^{−iφ₀N} + |e⟩⟨e| e^{iφ₀(N+1)}`.
pub fn u_dispersive(phi0: f64, cfg: &HilbertConfig) -> JointOperator {
    let gg = diag(cfg, |n| C64::from_polar(1.0, -phi0 * n as f64));
    let ee = diag(cfg, |n| C64::from_polar(1.0, phi0 * (n + 1) as f64));
    let zero = CMatrix::zeros(cfg.dim(), cfg.dim());
    JointOperator::from_blocks(&gg, &zero, &zero, &ee)
}

/// Composite propagator `U_d(φ₀) U_r(Θ) U_d†(φ₀)` in its closed form, with
/// the switching blocks carrying `e^{±2iφ₀N}`.
pub fn u_composite(theta: f64, phi0: f64, cfg: &HilbertConfig) -> JointOperator {
    let ladder = fock::make_ladder(cfg);
    let a = ladder.a.matrix();
    let ad = ladder.a_dagger.matrix();
    let gg = diag(cfg, |n| c((0.5 * theta * (n as f64).sqrt()).cos(), 0.0));
    // N + 1 enters as the truncated a a†, which vanishes on |n_max⟩: the
    // state |e, n_max⟩ has no partner inside the space and stays put
    let n_max = cfg.n_max();
    let ee = diag(cfg, |n| {
        let excitations = if n < n_max { (n + 1) as f64 } else { 0.0 };
        c((0.5 * theta * excitations.sqrt()).cos(), 0.0)
    });
    let s = diag(cfg, |n| c(sinc_factor(theta, n), 0.0));
    let plus = diag(cfg, |n| C64::from_polar(1.0, 2.0 * phi0 * n as f64));
    let minus = diag(cfg, |n| C64::from_polar(1.0, -2.0 * phi0 * n as f64));
    let eg = -(a * &s * &plus);
    let ge = &s * &minus * ad;
    JointOperator::from_blocks(&gg, &ge, &eg, &ee)
}

/// `I_atom ⊗ exp(∓ i h₀(N))` with `h₀(N) = φ₀N(N+1)`; `sign = −1` gives
/// `exp(−i h₀)`.
pub fn kerr_conjugator(phi0: f64, sign: f64, cfg: &HilbertConfig) -> JointOperator {
    let k = KerrParams { phi0 };
    let f = diag(cfg, |n| C64::from_polar(1.0, sign * k.h0(n)));
    JointOperator::field_only(&f, cfg)
}

/// `H_JC = (δ/2)(|e⟩⟨e| − |g⟩⟨g|) + i(Ω/2)(|g⟩⟨e| a† − |e⟩⟨g| a)`.
pub fn jc_hamiltonian(delta: f64, omega: f64, cfg: &HilbertConfig) -> JointOperator {
    let ladder = fock::make_ladder(cfg);
    let d = cfg.dim();
    let id = CMatrix::identity(d, d);
    let gg = &id * c(-0.5 * delta, 0.0);
    let ee = &id * c(0.5 * delta, 0.0);
    let ge = ladder.a_dagger.matrix() * c(0.0, 0.5 * omega);
    let eg = ladder.a.matrix() * c(0.0, -0.5 * omega);
    JointOperator::from_blocks(&gg, &ge, &eg, &ee)
}

/// One interval with a constant detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub detuning: f64,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Time-dependent coupling with a piecewise-constant detuning.
pub trait Drive {
    fn coupling(&self, t: f64) -> f64;
    /// Contiguous segments covering the interaction window, in time order.
    fn segments(&self) -> Vec<Segment>;
    /// Largest coupling reached anywhere in the window.
    fn peak_coupling(&self) -> f64;
}

impl Drive for TransitProfile {
    fn coupling(&self, t: f64) -> f64 {
        rabi_coupling(t, self)
    }

    fn segments(&self) -> Vec<Segment> {
        let half = 0.5 * self.t_r;
        [
            Segment {
                start: self.start(),
                end: -half,
                detuning: self.delta_disp,
            },
            Segment {
                start: -half,
                end: half,
                detuning: 0.0,
            },
            Segment {
                start: half,
                end: self.end(),
                detuning: -self.delta_disp,
            },
        ]
        .into_iter()
        .filter(|s| s.duration() > 0.0)
        .collect()
    }

    fn peak_coupling(&self) -> f64 {
        self.omega0
    }
}

/// Constant coupling and detuning over `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDrive {
    pub omega: f64,
    pub delta: f64,
    pub duration: f64,
}

impl Drive for ConstantDrive {
    fn coupling(&self, _t: f64) -> f64 {
        self.omega
    }

    fn segments(&self) -> Vec<Segment> {
        vec![Segment {
            start: 0.0,
            end: self.duration,
            detuning: self.delta,
        }]
    }

    fn peak_coupling(&self) -> f64 {
        self.omega.abs()
    }
}

/// Gaussian coupling held at one fixed detuning over the whole window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedDetuning {
    pub profile: TransitProfile,
    pub delta: f64,
}

impl Drive for FixedDetuning {
    fn coupling(&self, t: f64) -> f64 {
        rabi_coupling(t, &self.profile)
    }

    fn segments(&self) -> Vec<Segment> {
        vec![Segment {
            start: self.profile.start(),
            end: self.profile.end(),
            detuning: self.delta,
        }]
    }

    fn peak_coupling(&self) -> f64 {
        self.profile.omega0
    }
}

/// Wraps a drive and multiplies its coupling by a constant.
pub struct ScaledCoupling<'a> {
    pub inner: &'a dyn Drive,
    pub scale: f64,
}

impl Drive for ScaledCoupling<'_> {
    fn coupling(&self, t: f64) -> f64 {
        self.scale * self.inner.coupling(t)
    }

    fn segments(&self) -> Vec<Segment> {
        self.inner.segments()
    }

    fn peak_coupling(&self) -> f64 {
        self.scale.abs() * self.inner.peak_coupling()
    }
}

/// Unitary that is block diagonal on the pairs `{|e,n⟩, |g,n+1⟩}`.
///
/// `blocks[n]` is row-major in the ordered basis `(|e,n⟩, |g,n+1⟩)`; `g0`
/// and `e_top` are the phases of the uncoupled states `|g,0⟩` and
/// `|e,n_max⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBlocks {
    d: usize,
    blocks: Vec<[C64; 4]>,
    g0: C64,
    e_top: C64,
}

const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn mul2(a: &[C64; 4], b: &[C64; 4]) -> [C64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// `exp(−i (x σx + y σy + z σz))`.
fn su2_exp(x: f64, y: f64, z: f64) -> [C64; 4] {
    let r = (x * x + y * y + z * z).sqrt();
    let (cr, s) = if r < 1e-8 {
        (1.0 - 0.5 * r * r, 1.0 - r * r / 6.0)
    } else {
        (r.cos(), r.sin() / r)
    };
    [
        c(cr, -s * z),
        c(-s * y, -s * x),
        c(s * y, -s * x),
        c(cr, s * z),
    ]
}

impl PairBlocks {
    pub fn identity(d: usize) -> Self {
        Self {
            d,
            blocks: vec![[ONE, ZERO, ZERO, ONE]; d - 1],
            g0: ONE,
            e_top: ONE,
        }
    }

    pub fn field_dim(&self) -> usize {
        self.d
    }

    /// `self · earlier`.
    pub fn compose(&self, earlier: &PairBlocks) -> PairBlocks {
        PairBlocks {
            d: self.d,
            blocks: self
                .blocks
                .iter()
                .zip(&earlier.blocks)
                .map(|(a, b)| mul2(a, b))
                .collect(),
            g0: self.g0 * earlier.g0,
            e_top: self.e_top * earlier.e_top,
        }
    }

    pub fn to_operator(&self) -> JointOperator {
        let d = self.d;
        let mut m = CMatrix::zeros(2 * d, 2 * d);
        m[(G * d, G * d)] = self.g0;
        m[(E * d + d - 1, E * d + d - 1)] = self.e_top;
        for (n, b) in self.blocks.iter().enumerate() {
            let (ie, ig) = (E * d + n, G * d + n + 1);
            m[(ie, ie)] = b[0];
            m[(ie, ig)] = b[1];
            m[(ig, ie)] = b[2];
            m[(ig, ig)] = b[3];
        }
        JointOperator { matrix: m, d }
    }

    /// `ρ ← U ρ U†` in O(dim²).
    pub fn conjugate(&self, rho: &mut CMatrix) {
        let d = self.d;
        let dim = 2 * d;
        // left multiplication acts on rows
        for j in 0..dim {
            rho[(G * d, j)] *= self.g0;
            rho[(E * d + d - 1, j)] *= self.e_top;
            for (n, b) in self.blocks.iter().enumerate() {
                let (ie, ig) = (E * d + n, G * d + n + 1);
                let (xe, xg) = (rho[(ie, j)], rho[(ig, j)]);
                rho[(ie, j)] = b[0] * xe + b[1] * xg;
                rho[(ig, j)] = b[2] * xe + b[3] * xg;
            }
        }
        // right multiplication by U† acts on columns with conjugated entries
        let g0 = self.g0.conj();
        let e_top = self.e_top.conj();
        for i in 0..dim {
            rho[(i, G * d)] *= g0;
            rho[(i, E * d + d - 1)] *= e_top;
        }
        for (n, b) in self.blocks.iter().enumerate() {
            let (ie, ig) = (E * d + n, G * d + n + 1);
            let (b0, b1, b2, b3) = (b[0].conj(), b[1].conj(), b[2].conj(), b[3].conj());
            for i in 0..dim {
                let (xe, xg) = (rho[(i, ie)], rho[(i, ig)]);
                rho[(i, ie)] = xe * b0 + xg * b1;
                rho[(i, ig)] = xe * b2 + xg * b3;
            }
        }
    }

    /// Propagator of `H_JC` over one constant-detuning segment (or a part of
    /// it), using fourth-order Magnus steps on each 2×2 block with at most
    /// `max_phase` radians of evolution per step.
    pub fn integrate(
        drive: &dyn Drive,
        d: usize,
        t0: f64,
        t1: f64,
        delta: f64,
        max_phase: f64,
    ) -> PairBlocks {
        let duration = t1 - t0;
        if duration <= 0.0 {
            return Self::identity(d);
        }
        let fastest = delta.abs().max(drive.peak_coupling() * (d as f64).sqrt());
        let steps = ((duration * fastest) / max_phase).ceil().max(1.0) as usize;
        let h = duration / steps as f64;
        let g1 = 0.5 - 3f64.sqrt() / 6.0;
        let g2 = 0.5 + 3f64.sqrt() / 6.0;
        let couplings: Vec<(f64, f64)> = (0..steps)
            .map(|k| {
                let t = t0 + k as f64 * h;
                (drive.coupling(t + g1 * h), drive.coupling(t + g2 * h))
            })
            .collect();
        let commutator_scale = 3f64.sqrt() / 12.0 * h * h;
        let blocks = (0..d - 1)
            .map(|n| {
                let root = 0.5 * ((n + 1) as f64).sqrt();
                let mut acc = [ONE, ZERO, ZERO, ONE];
                for &(o1, o2) in &couplings {
                    let (b1, b2) = (root * o1, root * o2);
                    let x = -commutator_scale * delta * (b1 - b2);
                    let y = 0.5 * h * (b1 + b2);
                    let z = 0.5 * h * delta;
                    acc = mul2(&su2_exp(x, y, z), &acc);
                }
                acc
            })
            .collect();
        let bare = 0.5 * delta * duration;
        PairBlocks {
            d,
            blocks,
            g0: C64::from_polar(1.0, bare),
            e_top: C64::from_polar(1.0, -bare),
        }
    }

    /// Full propagator over every segment of `drive`.
    pub fn for_drive(drive: &dyn Drive, d: usize, max_phase: f64) -> PairBlocks {
        drive.segments().iter().fold(Self::identity(d), |acc, s| {
            Self::integrate(drive, d, s.start, s.end, s.detuning, max_phase).compose(&acc)
        })
    }
}

/// `out = H_JC ρ` in O(dim²).
fn apply_jc_left(rho: &CMatrix, d: usize, delta: f64, omega: f64, out: &mut CMatrix) {
    let dim = 2 * d;
    let hd = 0.5 * delta;
    for j in 0..dim {
        for n in 0..d {
            let ig = G * d + n;
            let ie = E * d + n;
            // (Hρ)_{g,n} = −δ/2 ρ_{g,n} + i(Ω/2)√n ρ_{e,n−1}
            let mut vg = rho[(ig, j)] * (-hd);
            if n > 0 {
                vg += rho[(E * d + n - 1, j)] * c(0.0, 0.5 * omega * (n as f64).sqrt());
            }
            // (Hρ)_{e,n} = δ/2 ρ_{e,n} − i(Ω/2)√(n+1) ρ_{g,n+1}
            let mut ve = rho[(ie, j)] * hd;
            if n + 1 < d {
                ve += rho[(G * d + n + 1, j)] * c(0.0, -0.5 * omega * ((n + 1) as f64).sqrt());
            }
            out[(ig, j)] = vg;
            out[(ie, j)] = ve;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Rk4Step {
    h: f64,
    delta: f64,
    omega: [f64; 3],
}

/// Integrator for the numeric backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Exact 2×2 dressed-block propagators, Strang-interleaved with the
    /// dissipator.
    DressedBlocks,
    /// Classic RK4 on the full joint master equation.
    Rk4,
}

/// Step-size controls of the numeric backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitOptions {
    pub integrator: Integrator,
    /// Largest evolution phase per micro-step (rad).
    pub max_phase_per_step: f64,
    /// Number of dissipator slices over the full transit.
    pub loss_slices: usize,
}

impl Default for TransitOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::DressedBlocks,
            max_phase_per_step: 0.05,
            loss_slices: 64,
        }
    }
}

impl TransitOptions {
    /// Same options with every step halved.
    pub fn refined(&self) -> Self {
        Self {
            integrator: self.integrator,
            max_phase_per_step: 0.5 * self.max_phase_per_step,
            loss_slices: 2 * self.loss_slices,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Integrates the exact time-dependent dynamics.
    Numeric,
    /// Applies the closed-form composite propagator instantaneously.
    Analytic,
}

#[derive(Debug, Clone)]
enum Plan {
    /// Closed evolution, applied through its Kraus operators.
    Unitary {
        op: JointOperator,
        relax_after: f64,
    },
    /// Unitary slices interleaved with dissipator steps of the given lengths;
    /// `relax[k]` precedes `slices[k]` and the last entry closes the transit.
    Sliced {
        slices: Vec<PairBlocks>,
        relax: Vec<f64>,
    },
    Rk4 {
        steps: Vec<Rk4Step>,
    },
}

/// Precomputed single-transit map for a fixed drive.
#[derive(Debug, Clone)]
pub struct TransitPropagator {
    d: usize,
    dissipator: Dissipator,
    plan: Plan,
}

impl TransitPropagator {
    /// Numeric propagator for `drive`; `dissipator` acts during the transit.
    pub fn numeric(
        drive: &dyn Drive,
        cfg: &HilbertConfig,
        dissipator: Dissipator,
        options: &TransitOptions,
    ) -> Result<Self> {
        if !(options.max_phase_per_step > 0.0) || options.loss_slices == 0 {
            return Err(Error::InvalidParameter(
                "transit step controls must be positive".into(),
            ));
        }
        let d = cfg.dim();
        let segments = drive.segments();
        let plan = match options.integrator {
            Integrator::DressedBlocks if dissipator.is_zero() => Plan::Unitary {
                op: PairBlocks::for_drive(drive, d, options.max_phase_per_step).to_operator(),
                relax_after: 0.0,
            },
            Integrator::DressedBlocks => {
                let total: f64 = segments.iter().map(Segment::duration).sum();
                let mut slices = Vec::new();
                let mut relax = Vec::new();
                let mut pending = 0.0;
                for s in &segments {
                    let n = ((options.loss_slices as f64) * s.duration() / total)
                        .ceil()
                        .max(1.0) as usize;
                    let h = s.duration() / n as f64;
                    for k in 0..n {
                        let t0 = s.start + k as f64 * h;
                        relax.push(pending + 0.5 * h);
                        slices.push(PairBlocks::integrate(
                            drive,
                            d,
                            t0,
                            t0 + h,
                            s.detuning,
                            options.max_phase_per_step,
                        ));
                        pending = 0.5 * h;
                    }
                }
                relax.push(pending);
                Plan::Sliced { slices, relax }
            }
            Integrator::Rk4 => {
                let mut steps = Vec::new();
                for s in &segments {
                    let fastest = s.detuning.abs().max(drive.peak_coupling());
                    let n = ((s.duration() * fastest) / options.max_phase_per_step)
                        .ceil()
                        .max(1.0) as usize;
                    let h = s.duration() / n as f64;
                    for k in 0..n {
                        let t = s.start + k as f64 * h;
                        steps.push(Rk4Step {
                            h,
                            delta: s.detuning,
                            omega: [
                                drive.coupling(t),
                                drive.coupling(t + 0.5 * h),
                                drive.coupling(t + h),
                            ],
                        });
                    }
                }
                Plan::Rk4 { steps }
            }
        };
        Ok(Self {
            d,
            dissipator,
            plan,
        })
    }

    /// Closed-form composite propagator `U_d(φ₀)U_r(Θ)U_d†(φ₀)`, followed by
    /// `relax_after` seconds of cavity relaxation.
    pub fn analytic(
        theta: f64,
        phi0: f64,
        cfg: &HilbertConfig,
        dissipator: Dissipator,
        relax_after: f64,
    ) -> Self {
        Self {
            d: cfg.dim(),
            dissipator,
            plan: Plan::Unitary {
                op: u_composite(theta, phi0, cfg),
                relax_after,
            },
        }
    }

    pub fn field_dim(&self) -> usize {
        self.d
    }

    /// Closed-evolution operator, when the plan has one.
    pub fn unitary(&self) -> Option<&JointOperator> {
        match &self.plan {
            Plan::Unitary { op, .. } => Some(op),
            _ => None,
        }
    }

    /// Propagates a joint density matrix.
    pub fn apply_joint(&self, rho: &CMatrix) -> CMatrix {
        match &self.plan {
            Plan::Unitary { op, relax_after } => {
                let out = op.matrix() * rho * op.matrix().adjoint();
                self.dissipator.evolve(&out, self.d, *relax_after)
            }
            Plan::Sliced { slices, relax } => {
                let mut state = rho.clone();
                let mut scratch = Scratch::default();
                for (u, r) in slices.iter().zip(relax) {
                    self.dissipator.evolve_in_place(&mut state, self.d, *r, &mut scratch);
                    u.conjugate(&mut state);
                }
                let last = *relax.last().unwrap_or(&0.0);
                self.dissipator.evolve_in_place(&mut state, self.d, last, &mut scratch);
                state
            }
            Plan::Rk4 { steps } => self.rk4(rho, steps),
        }
    }

    /// Field state after one transit of an atom prepared in `atom`, with the
    /// atom traced out.
    pub fn apply_field(&self, rho: &CMatrix, atom: &AtomPreparation) -> CMatrix {
        match &self.plan {
            Plan::Unitary { op, relax_after } => {
                let mut out = CMatrix::zeros(self.d, self.d);
                for k in op.kraus(atom) {
                    out += &k * rho * k.adjoint();
                }
                self.dissipator.evolve(&out, self.d, *relax_after)
            }
            _ => partial_trace_atom(&self.apply_joint(&product_matrix(rho, atom)), self.d),
        }
    }

    fn rk4(&self, rho: &CMatrix, steps: &[Rk4Step]) -> CMatrix {
        let d = self.d;
        let dim = 2 * d;
        let mut state = rho.clone();
        let mut hx = CMatrix::zeros(dim, dim);
        let mut lx = CMatrix::zeros(dim, dim);
        let deriv = |x: &CMatrix, delta: f64, omega: f64, hx: &mut CMatrix, lx: &mut CMatrix| {
            apply_jc_left(x, d, delta, omega, hx);
            let mut k = (&*hx - hx.adjoint()) * c(0.0, -1.0);
            if !self.dissipator.is_zero() {
                self.dissipator.apply(x, d, lx);
                k += &*lx;
            }
            k
        };
        for s in steps {
            let h = c(s.h, 0.0);
            let half = c(0.5 * s.h, 0.0);
            let k1 = deriv(&state, s.delta, s.omega[0], &mut hx, &mut lx);
            let k2 = deriv(
                &(&state + &k1 * half),
                s.delta,
                s.omega[1],
                &mut hx,
                &mut lx,
            );
            let k3 = deriv(
                &(&state + &k2 * half),
                s.delta,
                s.omega[1],
                &mut hx,
                &mut lx,
            );
            let k4 = deriv(&(&state + &k3 * h), s.delta, s.omega[2], &mut hx, &mut lx);
            state += (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(s.h / 6.0, 0.0);
        }
        state
    }
}

/// Propagates a joint state over one transit of `profile`. The analytic
/// backend is an instantaneous unitary and requires a lossless cavity.
pub fn transit_propagate(
    rho: &JointState,
    profile: &TransitProfile,
    cfg: &HilbertConfig,
    cavity: &CavityParams,
    backend: Backend,
) -> Result<JointState> {
    profile.validate()?;
    rho.validate()?;
    let prop = match backend {
        Backend::Numeric => TransitPropagator::numeric(
            profile,
            cfg,
            cavity.dissipator(),
            &TransitOptions::default(),
        )?,
        Backend::Analytic => {
            if cavity.enabled {
                return Err(Error::InvalidParameter(
                    "the analytic transit requires cavity loss to be disabled".into(),
                ));
            }
            let (theta, phi) = analytic_angles(profile)?;
            TransitPropagator::analytic(theta, phi, cfg, Dissipator::new(0.0, 0.0), 0.0)
        }
    };
    let out = prop.apply_joint(rho.matrix());
    Ok(JointState {
        rho: out,
        d: cfg.dim(),
    })
}

/// Mean photon number and purity, the quantities watched by the step-halving
/// convergence check.
pub(crate) fn convergence_observables(rho: &CMatrix) -> (f64, f64) {
    let nbar = (0..rho.nrows()).map(|n| n as f64 * rho[(n, n)].re).sum();
    let purity = linalg::trace_of_product(rho, rho).re;
    (nbar, purity)
}

/// Fails when halving every numeric step moves the mean photon number or the
/// purity of the transit output by more than `tol`.
pub fn check_convergence(
    drive: &dyn Drive,
    cfg: &HilbertConfig,
    dissipator: Dissipator,
    options: &TransitOptions,
    rho: &CMatrix,
    atom: &AtomPreparation,
    tol: f64,
) -> Result<()> {
    let coarse =
        TransitPropagator::numeric(drive, cfg, dissipator, options)?.apply_field(rho, atom);
    let fine = TransitPropagator::numeric(drive, cfg, dissipator, &options.refined())?
        .apply_field(rho, atom);
    let (n1, p1) = convergence_observables(&coarse);
    let (n2, p2) = convergence_observables(&fine);
    let worst = (n1 - n2).abs().max((p1 - p2).abs());
    if worst > tol {
        return Err(Error::Convergence(format!(
            "halving the transit step changed (nbar, purity) by {worst:.2e} > {tol:.0e}"
        )));
    }
    Ok(())
}

/// Angles `(Θ, φ₀)` of the composite propagator equivalent to `profile` in
/// the large-detuning limit; φ₀ is the phase of the second dispersive
/// segment, so the first segment realises `U_d†(φ₀)`.
pub fn analytic_angles(profile: &TransitProfile) -> Result<(f64, f64)> {
    let phi = if profile.delta_disp > 0.0 {
        phi0_of(profile, DispersiveSegment::Second)?
    } else {
        0.0
    };
    Ok((theta_of(profile), phi))
}

/// Vacuum-Rabi reference `Ω₀ = 2π · 50 kHz` used by the built-in scenarios.
pub const OMEGA0_REFERENCE: f64 = 2.0 * PI * 50e3;
