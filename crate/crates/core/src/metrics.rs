//! Observables of the cavity field: photon number, purity, Wigner function,
//! fidelity to ideal superpositions, quadrature squeezing.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{self, FieldState, HilbertConfig, PureFieldState};
use crate::linalg::{self, c, C64};
use crate::optim::NelderMead;

pub fn mean_photon(rho: &FieldState) -> f64 {
    let m = rho.matrix();
    (0..m.nrows()).map(|n| n as f64 * m[(n, n)].re).sum()
}

pub fn purity(rho: &FieldState) -> f64 {
    linalg::trace_of_product(rho.matrix(), rho.matrix()).re
}

/// `⟨a⟩ = Tr(ρ a)`.
pub fn expect_a(rho: &FieldState) -> C64 {
    let m = rho.matrix();
    (1..m.nrows())
        .map(|n| m[(n, n - 1)] * (n as f64).sqrt())
        .sum()
}

/// `⟨a²⟩ = Tr(ρ a²)`.
pub fn expect_a2(rho: &FieldState) -> C64 {
    let m = rho.matrix();
    (2..m.nrows())
        .map(|n| m[(n, n - 2)] * ((n * (n - 1)) as f64).sqrt())
        .sum()
}

/// Overlap fidelity `⟨ψ|ρ|ψ⟩` with a pure reference.
pub fn overlap_fidelity(rho: &FieldState, reference: &PureFieldState) -> f64 {
    linalg::sandwich(reference.amplitudes(), rho.matrix()).re
}

/// Sample points of the phase-space grid, `ξ = x + iy`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

/// `min:max:step` description of a square grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridRange {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && max >= min && min.is_finite() && max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bad grid {min}:{max}:{step}"
            )));
        }
        Ok(Self { min, max, step })
    }

    /// Parses `XMIN:XMAX:STEP`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad grid number '{s}'")))
        };
        match parts.as_slice() {
            [a, b, s] => {
                Self::new(num(a)?, num(b)?, num(s)?).map_err(|e| Error::Config(e.to_string()))
            }
            _ => Err(Error::Config(format!(
                "grid must be XMIN:XMAX:STEP, got '{text}'"
            ))),
        }
    }

    pub fn spec(&self) -> GridSpec {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        let axis: Vec<f64> = (0..n).map(|k| self.min + k as f64 * self.step).collect();
        GridSpec {
            xs: axis.clone(),
            ys: axis,
        }
    }
}

impl Default for GridRange {
    fn default() -> Self {
        Self {
            min: -3.5,
            max: 3.5,
            step: 0.07,
        }
    }
}

impl std::fmt::Display for GridRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.step)
    }
}

impl GridSpec {
    /// Square grid `min, min + step, …, ≤ max` on both axes.
    pub fn square(min: f64, max: f64, step: f64) -> Result<Self> {
        Ok(GridRange::new(min, max, step)?.spec())
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(GridRange::parse(text)?.spec())
    }

    pub fn radius(&self) -> f64 {
        let mx = self.xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let my = self.ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        mx.hypot(my)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridRange::default().spec()
    }
}

/// Wigner function sampled on a grid; `values[(iy, ix)]` is `W(xs[ix] + i ys[iy])`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl WignerGrid {
    /// Riemann sum of `W` over the grid (uniform spacing assumed).
    pub fn integral(&self) -> f64 {
        let dx = spacing(&self.xs);
        let dy = spacing(&self.ys);
        self.values.sum() * dx * dy
    }

    pub fn min_value(&self) -> f64 {
        self.values.min()
    }

    pub fn max_value(&self) -> f64 {
        self.values.max()
    }

    /// `∫ W dy` at each `x` sample.
    pub fn marginal_x(&self) -> Vec<f64> {
        let dy = spacing(&self.ys);
        (0..self.xs.len())
            .map(|ix| self.values.column(ix).sum() * dy)
            .collect()
    }

    /// Plain-text matrix with `# xs:` / `# ys:` headers, 9 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.8e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(out, "# xs: {}", join(&self.xs));
        let _ = writeln!(out, "# ys: {}", join(&self.ys));
        for iy in 0..self.ys.len() {
            let row: Vec<f64> = self.values.row(iy).iter().copied().collect();
            let _ = writeln!(out, "{}", join(&row));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = |line: Option<&str>, tag: &str| -> Result<Vec<f64>> {
            let line = line.ok_or_else(|| Error::Config("truncated Wigner file".into()))?;
            let rest = line
                .strip_prefix(tag)
                .ok_or_else(|| Error::Config(format!("expected '{tag}' header")))?;
            parse_floats(rest)
        };
        let xs = header(lines.next(), "# xs:")?;
        let ys = header(lines.next(), "# ys:")?;
        let mut values = DMatrix::zeros(ys.len(), xs.len());
        for iy in 0..ys.len() {
            let row = parse_floats(
                lines
                    .next()
                    .ok_or_else(|| Error::Config("missing Wigner row".into()))?,
            )?;
            if row.len() != xs.len() {
                return Err(Error::Config(format!(
                    "Wigner row {iy} has {} entries",
                    row.len()
                )));
            }
            for (ix, v) in row.into_iter().enumerate() {
                values[(iy, ix)] = v;
            }
        }
        Ok(Self { xs, ys, values })
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{t}'")))
        })
        .collect()
}

fn spacing(axis: &[f64]) -> f64 {
    if axis.len() > 1 {
        (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
    } else {
        1.0
    }
}

/// `W(ξ) = (2/π) Tr[D(−ξ) ρ D(ξ) Π]`, normalised to unit integral.
///
/// The displaced-parity matrix elements are generated by the Laguerre
/// recurrence of the untruncated displacement operator, so the result is the
/// exact Wigner function of the truncated density matrix.
pub fn wigner_at(rho: &FieldState, xi: C64) -> f64 {
    let m = rho.matrix();
    let d = m.nrows();
    let a = xi;
    let mut w = vec![C64::new(0.0, 0.0); d];
    w[0] = c((-2.0 * a.norm_sqr()).exp() / PI, 0.0);
    let mut total = m[(0, 0)].re * w[0].re;
    for n in 1..d {
        w[n] = a * w[n - 1] * (2.0 / (n as f64).sqrt());
        total += 2.0 * (m[(0, n)] * w[n]).re;
    }
    for mm in 1..d {
        let sm = (mm as f64).sqrt();
        let mut temp = w[mm];
        w[mm] = (a.conj() * temp * 2.0 - w[mm - 1] * sm) / sm;
        total += (m[(mm, mm)] * w[mm]).re;
        for n in mm + 1..d {
            let next = (a * w[n - 1] * 2.0 - temp * sm) / (n as f64).sqrt();
            temp = w[n];
            w[n] = next;
            total += 2.0 * (m[(mm, n)] * w[n]).re;
        }
    }
    2.0 * total
}

/// Radius in phase space beyond which a grid leaves the well-represented
/// part of the truncated space.
pub fn trust_radius(cfg: &HilbertConfig) -> f64 {
    (cfg.guard_level() as f64).sqrt()
}

pub fn wigner(rho: &FieldState, grid: &GridSpec) -> WignerGrid {
    if let Ok(cfg) = HilbertConfig::new(rho.dim().saturating_sub(1).max(1)) {
        if grid.radius() > trust_radius(&cfg) {
            log::warn!(
                "Wigner grid radius {:.2} exceeds trust radius {:.2}",
                grid.radius(),
                trust_radius(&cfg)
            );
        }
    }
    let rows: Vec<Vec<f64>> = grid
        .ys
        .par_iter()
        .map(|&y| grid.xs.iter().map(|&x| wigner_at(rho, c(x, y))).collect())
        .collect();
    let mut values = DMatrix::zeros(grid.ys.len(), grid.xs.len());
    for (iy, row) in rows.into_iter().enumerate() {
        for (ix, v) in row.into_iter().enumerate() {
            values[(iy, ix)] = v;
        }
    }
    WignerGrid {
        xs: grid.xs.clone(),
        ys: grid.ys.clone(),
        values,
    }
}

/// Best-matching ideal superposition of `k` coherent components.
#[derive(Debug, Clone, PartialEq)]
pub struct CatFitResult {
    pub alpha: C64,
    pub rel_phases: Vec<f64>,
    pub fidelity: f64,
    pub reference: PureFieldState,
    pub converged: bool,
}

/// Starting point of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CatGuess {
    pub alpha: C64,
    pub rel_phases: Vec<f64>,
}

fn cfg_of(rho: &FieldState) -> Result<HilbertConfig> {
    HilbertConfig::new(rho.dim() - 1)
}

fn mfss_fidelity(
    rho: &FieldState,
    cfg: &HilbertConfig,
    k: usize,
    alpha: C64,
    phases: &[f64],
) -> f64 {
    match fock::ideal_mfss(alpha, k, phases, cfg) {
        Ok(psi) => overlap_fidelity(rho, &psi),
        Err(_) => 0.0,
    }
}

fn unpack(x: &[f64]) -> (C64, &[f64]) {
    (c(x[0], x[1]), &x[2..])
}

/// Nelder-Mead refinement of an ideal `k`-component superposition against
/// `rho`, over `Re α`, `Im α` and the `k − 1` relative phases. Never returns
/// a lower fidelity than the guess itself.
pub fn fit_cat(rho: &FieldState, k: usize, init: &CatGuess) -> Result<CatFitResult> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "cat fit needs k >= 2, got {k}"
        )));
    }
    if init.rel_phases.len() != k - 1 {
        return Err(Error::InvalidParameter(
            "guess has the wrong number of phases".into(),
        ));
    }
    let cfg = cfg_of(rho)?;
    let objective = |x: &[f64]| {
        let (alpha, phases) = unpack(x);
        1.0 - mfss_fidelity(rho, &cfg, k, alpha, phases)
    };
    let mut x0 = vec![init.alpha.re, init.alpha.im];
    x0.extend(&init.rel_phases);
    let mut step = vec![0.1, 0.1];
    step.extend(std::iter::repeat(0.2).take(k - 1));
    let nm = NelderMead {
        f_tol: 1e-12,
        x_tol: 1e-8,
        max_iter: 5000,
    };
    let mut best = nm.minimize(objective, &x0, &step);
    // a restart from the first optimum escapes early simplex collapse
    let restart = nm.minimize(objective, &best.x, &step);
    let converged = restart.converged && (restart.value - best.value).abs() < 1e-7;
    if restart.value < best.value {
        best = restart;
    }
    let init_value = objective(&x0);
    let x = if best.value <= init_value { best.x } else { x0 };
    let (alpha, phases) = unpack(&x);
    let rel_phases: Vec<f64> = phases.iter().map(|p| p.rem_euclid(2.0 * PI)).collect();
    let reference = fock::ideal_mfss(alpha, k, &rel_phases, &cfg)?;
    let fidelity = overlap_fidelity(rho, &reference);
    Ok(CatFitResult {
        alpha,
        rel_phases,
        fidelity,
        reference,
        converged,
    })
}

/// Coarse grid over `|α|`, `arg α` and the relative phases followed by
/// Nelder-Mead refinement of the best grid points.
pub fn fit_cat_global(rho: &FieldState, k: usize) -> Result<CatFitResult> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "cat fit needs k >= 2, got {k}"
        )));
    }
    let cfg = cfg_of(rho)?;
    let nbar = mean_photon(rho).max(0.0);
    let r_max = (1.5 * nbar.sqrt() + 0.5).min(cfg.max_mean_photons().sqrt());
    let r_min = 0.25 * nbar.sqrt();
    let (n_r, n_arg, n_phase) = (16usize, 16usize, 8usize);
    let phase_points = n_phase.pow((k - 1) as u32);
    let candidates: Vec<(f64, CatGuess)> = (0..n_r * n_arg)
        .into_par_iter()
        .flat_map_iter(|idx| {
            let (ir, ia) = (idx / n_arg, idx % n_arg);
            let r = r_min + (r_max - r_min) * ir as f64 / (n_r - 1) as f64;
            let psi = 2.0 * PI / k as f64 * ia as f64 / n_arg as f64;
            let alpha = C64::from_polar(r, psi);
            let cfg = &cfg;
            (0..phase_points).map(move |ip| {
                let mut rest = ip;
                let phases: Vec<f64> = (0..k - 1)
                    .map(|_| {
                        let p = 2.0 * PI * (rest % n_phase) as f64 / n_phase as f64;
                        rest /= n_phase;
                        p
                    })
                    .collect();
                let f = mfss_fidelity(rho, cfg, k, alpha, &phases);
                (
                    f,
                    CatGuess {
                        alpha,
                        rel_phases: phases,
                    },
                )
            })
        })
        .collect();
    let mut ranked = candidates;
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best: Option<CatFitResult> = None;
    for (_, guess) in ranked.iter().take(4) {
        let fit = fit_cat(rho, k, guess)?;
        if best.as_ref().map_or(true, |b| fit.fidelity > b.fidelity) {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| Error::Convergence("empty fit grid".into()))
}

/// Best coherent-state approximation (`k = 1`), used where no
/// multi-component fit is requested.
pub fn fit_coherent(rho: &FieldState) -> Result<CatFitResult> {
    let cfg = cfg_of(rho)?;
    let start = expect_a(rho);
    let objective = |x: &[f64]| 1.0 - mfss_fidelity(rho, &cfg, 1, c(x[0], x[1]), &[]);
    let nm = NelderMead {
        f_tol: 1e-12,
        x_tol: 1e-8,
        max_iter: 2000,
    };
    let m = nm.minimize(objective, &[start.re, start.im], &[0.1, 0.1]);
    let alpha = c(m.x[0], m.x[1]);
    let reference = fock::ideal_mfss(alpha, 1, &[], &cfg)?;
    let fidelity = overlap_fidelity(rho, &reference);
    Ok(CatFitResult {
        alpha,
        rel_phases: vec![],
        fidelity,
        reference,
        converged: m.converged,
    })
}

/// Quadrature squeezing relative to the vacuum variance 1/4, for
/// `X_θ = (a e^{−iθ} + a† e^{iθ})/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Squeezing {
    /// `10 log₁₀((1/4) / min_θ Var X_θ)`; positive means squeezed.
    pub db: f64,
    pub theta_min: f64,
    pub min_variance: f64,
}

/// `Var X_θ` from the first and second moments.
pub fn quadrature_variance(rho: &FieldState, theta: f64) -> f64 {
    let n = mean_photon(rho);
    let a = expect_a(rho);
    let a2 = expect_a2(rho);
    let rot = C64::from_polar(1.0, -theta);
    let mean = (a * rot).re;
    (2.0 * n + 1.0) / 4.0 + 0.5 * (a2 * rot * rot).re - mean * mean
}

pub fn squeezing_db(rho: &FieldState) -> Squeezing {
    let n = mean_photon(rho);
    let a = expect_a(rho);
    let a2 = expect_a2(rho);
    let cov = a2 - a * a;
    let min_variance = (2.0 * (n - a.norm_sqr()) + 1.0) / 4.0 - 0.5 * cov.norm();
    let theta_min = (0.5 * (cov.arg() + PI)).rem_euclid(PI);
    Squeezing {
        db: 10.0 * (0.25 / min_variance).log10(),
        theta_min,
        min_variance,
    }
}

/// One row of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub sample_index: usize,
    pub time: f64,
    pub n_bar: f64,
    pub purity: f64,
    /// Overlap with the trajectory's reference state; NaN when none is set.
    pub fidelity: f64,
    pub trace_error: f64,
}

pub const METRICS_CSV_HEADER: &str = "sample,time_s,nbar,purity,fidelity,trace_err";

impl MetricsRecord {
    pub fn measure(
        rho: &FieldState,
        sample_index: usize,
        time: f64,
        reference: Option<&PureFieldState>,
    ) -> Self {
        Self {
            sample_index,
            time,
            n_bar: mean_photon(rho),
            purity: purity(rho),
            fidelity: reference.map_or(f64::NAN, |r| overlap_fidelity(rho, r)),
            trace_error: (rho.trace().re - 1.0).abs(),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.3e}",
            self.sample_index, self.time, self.n_bar, self.purity, self.fidelity, self.trace_error
        )
    }
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}
