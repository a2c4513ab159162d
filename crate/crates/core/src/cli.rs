//! Scenario runner behind the command-line tool: trajectory, analyses and
//! artifact files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::FieldState;
use crate::linalg::{c, CMatrix};
use crate::metrics::{self, CatFitResult, GridSpec, Squeezing, WignerGrid};
use crate::reservoir::{self, RunOptions, TrajectoryResult};
use crate::scenario::ScenarioConfig;

/// Everything a run produces before it is written out.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub trajectory: TrajectoryResult,
    pub fit: Option<CatFitResult>,
    pub squeezing: Option<Squeezing>,
    pub wigner: Option<WignerGrid>,
    pub wall_time: f64,
    pub overrides: Vec<(String, String)>,
    pub config_text: String,
}

impl RunReport {
    pub fn final_state(&self) -> &FieldState {
        &self.trajectory.final_state
    }

    pub fn n_bar(&self) -> f64 {
        metrics::mean_photon(self.final_state())
    }

    pub fn purity(&self) -> f64 {
        metrics::purity(self.final_state())
    }

    pub fn fidelity(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.fidelity)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("scenario", self.name.clone());
        kv("samples", (self.trajectory.records.len() - 1).to_string());
        kv("nbar", format!("{:.6}", self.n_bar()));
        kv("purity", format!("{:.6}", self.purity()));
        if let Some(fit) = &self.fit {
            kv("cat_k", (fit.rel_phases.len() + 1).to_string());
            kv("fidelity", format!("{:.6}", fit.fidelity));
            kv(
                "cat_alpha",
                format!("{:.6},{:.6}", fit.alpha.re, fit.alpha.im),
            );
            let phases: Vec<String> = fit.rel_phases.iter().map(|p| format!("{p:.6}")).collect();
            kv("cat_phases", phases.join(","));
            kv("fit_converged", fit.converged.to_string());
        }
        if let Some(sq) = &self.squeezing {
            kv("squeezing_db", format!("{:.6}", sq.db));
            kv("squeezing_theta", format!("{:.6}", sq.theta_min));
        }
        kv(
            "truncation_peak",
            format!("{:.3e}", self.trajectory.truncation_peak),
        );
        if let Some(seed) = self.trajectory.seed {
            kv("seed", seed.to_string());
        }
        let overrides: Vec<String> = self
            .overrides
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        kv(
            "overrides",
            if overrides.is_empty() {
                "none".into()
            } else {
                overrides.join("; ")
            },
        );
        kv("wall_time_s", format!("{:.3}", self.wall_time));
        s.push_str("\n[config]\n");
        s.push_str(&self.config_text);
        s
    }
}

/// Applies `overrides` on top of `cfg`, keeping them for the summary.
pub fn with_overrides(
    cfg: &ScenarioConfig,
    overrides: &[(String, String)],
) -> Result<ScenarioConfig> {
    let mut out = cfg.clone();
    out.apply_all(overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    Ok(out)
}

/// Runs the trajectory and every configured analysis, without touching disk.
pub fn execute(cfg: &ScenarioConfig, overrides: &[(String, String)]) -> Result<RunReport> {
    let start = Instant::now();
    let r = &cfg.reservoir;
    let rho0 = FieldState::vacuum(&r.hilbert);
    let keep = cfg.analyses.cat_k.is_some();
    let mut traj = reservoir::run_trajectory_with(
        &rho0,
        r,
        &RunOptions {
            reference: None,
            keep_states: keep,
        },
        &mut |rec, _| {
            log::debug!(
                "sample {} nbar {:.4} purity {:.4}",
                rec.sample_index,
                rec.n_bar,
                rec.purity
            )
        },
    )?;
    let fit = match cfg.analyses.cat_k {
        Some(k) => Some(metrics::fit_cat_global(&traj.final_state, k)?),
        None => None,
    };
    if let (Some(fit), Some(states)) = (&fit, traj.states.take()) {
        for (rec, rho) in traj.records.iter_mut().zip(&states) {
            rec.fidelity = metrics::overlap_fidelity(rho, &fit.reference);
        }
    }
    let squeezing = cfg
        .analyses
        .squeezing
        .then(|| metrics::squeezing_db(&traj.final_state));
    let wigner = cfg
        .analyses
        .wigner
        .map(|g| metrics::wigner(&traj.final_state, &g.spec()));
    Ok(RunReport {
        name: cfg.name.clone(),
        trajectory: traj,
        fit,
        squeezing,
        wigner,
        wall_time: start.elapsed().as_secs_f64(),
        overrides: overrides.to_vec(),
        config_text: cfg.serialize(),
    })
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const WIGNER_FILE: &str = "wigner_final.txt";
pub const STATE_FILE: &str = "state_final.txt";
pub const SUMMARY_FILE: &str = "summary.txt";

pub fn write_artifacts(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(
        &dir.join(METRICS_FILE),
        &metrics::metrics_csv(&report.trajectory.records),
    )?;
    if let Some(w) = &report.wigner {
        write_atomic(&dir.join(WIGNER_FILE), &w.to_text())?;
    }
    write_atomic(&dir.join(STATE_FILE), &state_to_text(report.final_state()))?;
    write_atomic(&dir.join(SUMMARY_FILE), &report.summary_text())?;
    Ok(())
}

/// `execute` followed by `write_artifacts` into the configured directory.
pub fn run(cfg: &ScenarioConfig, overrides: &[(String, String)]) -> Result<RunReport> {
    let cfg = with_overrides(cfg, overrides)?;
    let report = execute(&cfg, overrides)?;
    write_artifacts(&report, &cfg.output)?;
    Ok(report)
}

/// Density matrix as text: one row per line, entries `re,im` separated by spaces.
pub fn state_to_text(rho: &FieldState) -> String {
    let m = rho.matrix();
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:e},{:e}", m[(i, j)].re, m[(i, j)].im))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn state_from_text(text: &str) -> Result<FieldState> {
    let rows: Vec<Vec<_>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|pair| {
                    let (re, im) = pair
                        .split_once(',')
                        .ok_or_else(|| Error::Config(format!("bad matrix entry '{pair}'")))?;
                    let num = |s: &str| {
                        s.parse::<f64>()
                            .map_err(|_| Error::Config(format!("bad number '{s}'")))
                    };
                    Ok(c(num(re)?, num(im)?))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config("state file is not a square matrix".into()));
    }
    FieldState::new(CMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

/// Wigner function of a saved state.
pub fn wigner_of_file(path: &Path, grid: &GridSpec) -> Result<WignerGrid> {
    let rho = state_from_text(&fs::read_to_string(path)?)?;
    Ok(metrics::wigner(&rho, grid))
}

/// Steady-state metrics of one sweep point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: String,
    pub n_bar: f64,
    pub purity: f64,
    pub fidelity: Option<f64>,
    pub squeezing_db: Option<f64>,
    pub truncation_peak: f64,
}

pub const SWEEP_FILE: &str = "sweep.csv";

/// Runs `cfg` once per value of `key`, in parallel, keeping input order.
/// Per-run artifacts go to `run_NNN` below the output directory.
pub fn sweep(
    cfg: &ScenarioConfig,
    overrides: &[(String, String)],
    key: &str,
    values: &[String],
) -> Result<Vec<SweepRow>> {
    let base = with_overrides(cfg, overrides)?;
    // reject bad keys and values before any work starts
    let configs: Vec<(ScenarioConfig, Vec<(String, String)>)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut all = overrides.to_vec();
            all.push((key.to_string(), v.clone()));
            let mut c = with_overrides(&base, &[(key.to_string(), v.clone())])?;
            c.output = base.output.join(format!("run_{i:03}"));
            Ok((c, all))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Result<SweepRow>> = configs
        .par_iter()
        .zip(values)
        .map(|((c, all), v)| {
            let report = execute(c, all)?;
            write_artifacts(&report, &c.output)?;
            Ok(SweepRow {
                value: v.clone(),
                n_bar: report.n_bar(),
                purity: report.purity(),
                fidelity: report.fidelity(),
                squeezing_db: report.squeezing.map(|s| s.db),
                truncation_peak: report.trajectory.truncation_peak,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&base.output)?;
    write_atomic(&base.output.join(SWEEP_FILE), &sweep_csv(key, &rows))?;
    Ok(rows)
}

pub fn sweep_csv(key: &str, rows: &[SweepRow]) -> String {
    let opt = |x: Option<f64>| x.map_or("NaN".to_string(), |v| format!("{v:.9e}"));
    let mut out =
        String::from("index,param,value,nbar,purity,fidelity,squeezing_db,truncation_peak\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{key},{},{:.9e},{:.9e},{},{},{:.3e}",
            r.value,
            r.n_bar,
            r.purity,
            opt(r.fidelity),
            opt(r.squeezing_db),
            r.truncation_peak
        );
    }
    out
}

/// Exit status for an error: 2 for configuration problems, 3 for numerical
/// failures.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}
