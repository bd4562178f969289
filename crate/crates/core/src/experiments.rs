//! Config-driven runs, phase-space scans and the named reproduction presets.
//!
//! A run writes three files into its output directory:
//!
//! * `trajectory.csv`: `t, a, phase_index_within_value, phi, rho, sigma, n`,
//!   one row per entry per snapshot, with the per-value spread and its
//!   log-log slope repeated on every row of that value;
//! * `report.json`: the convergence report, plus the perturbative oracle for
//!   diagonal Hamiltonians;
//! * `manifest.json`: config hash, version, wall time, integrator health and
//!   status.
//!
//! A scan writes `scan.csv` with one row per `(c, dphi0)` cell.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::diagnostics::{exponent_samples, qm_deviation, ConvergenceReport, DecayClass, SpreadSeries};
use crate::dynamics::{EnsembleState, Entry, EvolutionLaw, Model, DEFAULT_FLOOR};
use crate::error::{Error, Result};
use crate::hamiltonian::{pauli_to_coupling, CouplingMatrix, PauliCoefficients};
use crate::integrator::{evolve, IntegratorControls, Trajectory};
use crate::kernel::{kernel_curvature, validate_kernel, Kernel};
use crate::montecarlo::{empirical_state, run_population, sample_initial_ensemble, write_events_csv};
use crate::perturbation::{fit_sigma, OracleReport};

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 7] =
    ["table1", "table3", "table4_moderate", "table5_large", "table6_identity", "masterplot", "masterplot2"];

/// Default spiked-kernel widths of the phase-space scan; `0` is the flat kernel.
pub const SCAN_C: [f64; 10] = [0.0, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 100.0, 250.0, 1000.0];

/// Widths whose late-time exponents the rate-bound preset reports.
pub const RATE_C: [f64; 6] = [2.0, 5.0, 25.0, 100.0, 250.0, 1000.0];

/// Hamiltonian given either as Pauli coefficients `[ct, cx, cy, cz]` or as
/// explicit magnitude and phase matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<Vec<f64>>>,
}

impl HamiltonianSpec {
    pub fn pauli(ct: f64, cx: f64, cy: f64, cz: f64) -> Self {
        Self { pauli: Some([ct, cx, cy, cz]), ..Self::default() }
    }

    pub fn coupling(&self) -> Result<CouplingMatrix> {
        match (&self.pauli, &self.r, &self.beta) {
            (Some(c), None, None) => {
                let p = PauliCoefficients::new(c[0], c[1], c[2], c[3]);
                if !p.is_finite() {
                    return Err(Error::InvalidCoupling("Pauli coefficients must be finite".into()));
                }
                Ok(pauli_to_coupling(&p))
            }
            (None, Some(r), Some(beta)) => {
                let dim = r.len();
                if r.iter().chain(beta).any(|row| row.len() != dim) || beta.len() != dim {
                    return Err(Error::InvalidCoupling("r and beta must be square and of equal size".into()));
                }
                CouplingMatrix::new(dim, r.concat(), beta.concat())
            }
            _ => Err(Error::InvalidCoupling("give either `pauli` or both `r` and `beta`".into())),
        }
    }
}

/// One initial entry. Its phase is `phi + phi_pi·π + dphi0_multiple·dphi0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    pub a: usize,
    pub rho: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub phi_pi: f64,
    #[serde(default)]
    pub dphi0_multiple: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub members: u64,
    pub dt: f64,
    #[serde(default = "one")]
    pub populations: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogAxis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl LogAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let (lo, hi) = (self.min.ln(), self.max.ln());
        (0..self.points).map(|k| (lo + (hi - lo) * k as f64 / (self.points - 1) as f64).exp()).collect()
    }
}

/// Axes of a `(c, dphi0)` scan. The run's kernel is replaced by the spiked
/// kernel of width `c` (flat for `c = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dphi0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dphi0_log: Option<LogAxis>,
}

impl ScanSpec {
    pub fn dphi0_values(&self) -> Vec<f64> {
        let mut v = self.dphi0.clone().unwrap_or_default();
        if let Some(axis) = &self.dphi0_log {
            v.extend(axis.values());
        }
        v
    }
}

fn default_name() -> String {
    "run".into()
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub hamiltonian: HamiltonianSpec,
    pub kernel: String,
    #[serde(default)]
    pub model: Model,
    pub entries: Vec<EntrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dphi0: Option<f64>,
    #[serde(default)]
    pub integrator: IntegratorControls,
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// Diagnostics horizon; defaults to the integration end time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(self.integrator.t_end)
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::parse(&self.kernel)
    }

    /// Initial state with `dphi0` substituted.
    pub fn initial_state(&self, dim: usize) -> Result<EnsembleState> {
        let d = self.dphi0.unwrap_or(0.0);
        let entries = self
            .entries
            .iter()
            .map(|e| Entry::new(e.a, e.phi + e.phi_pi * PI + e.dphi0_multiple * d, e.rho))
            .collect();
        EnsembleState::new(dim, entries)
    }

    pub fn law(&self) -> Result<EvolutionLaw> {
        Ok(EvolutionLaw::new(self.hamiltonian.coupling()?, self.kernel()?, self.model).with_floor(self.floor))
    }

    /// Every problem with the config, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let coupling = match self.hamiltonian.coupling() {
            Ok(c) => Some(c),
            Err(e) => {
                v.push(format!("hamiltonian: {e}"));
                None
            }
        };
        match self.kernel() {
            Ok(k) => v.extend(validate_kernel(&k).into_iter().map(|m| format!("kernel: {m}"))),
            Err(e) => v.push(format!("kernel: {e}")),
        }
        if self.entries.is_empty() {
            v.push("entries: at least one entry is required".into());
        }
        let uses_dphi0 = self.entries.iter().any(|e| e.dphi0_multiple != 0.0);
        if uses_dphi0 && self.dphi0.is_none() && self.scan.is_none() {
            v.push("dphi0: entries use dphi0_multiple but dphi0 is not set".into());
        }
        if let Some(d) = self.dphi0 {
            if !d.is_finite() {
                v.push(format!("dphi0: must be finite, got {d}"));
            }
        }
        if let Some(c) = &coupling {
            if !self.entries.is_empty() {
                let s = EnsembleState::from_parts_unchecked(
                    c.dim(),
                    self.entries.iter().map(|e| Entry::new(e.a, e.phi + e.phi_pi * PI, e.rho)).collect(),
                );
                v.extend(s.violations().into_iter().map(|m| format!("entries: {m}")));
            }
        }
        v.extend(self.integrator.violations().into_iter().map(|m| format!("integrator: {m}")));
        if !(self.floor >= 0.0 && self.floor < 1.0) {
            v.push(format!("floor: must lie in [0, 1), got {}", self.floor));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h <= self.integrator.t_end) {
                v.push(format!("horizon: must lie in (0, t_end], got {h}"));
            }
        }
        if let Some(mc) = &self.montecarlo {
            if mc.members == 0 {
                v.push("montecarlo: members must be at least 1".into());
            }
            if !(mc.dt > 0.0 && mc.dt.is_finite()) {
                v.push(format!("montecarlo: dt must be > 0, got {}", mc.dt));
            }
            if mc.populations == 0 {
                v.push("montecarlo: populations must be at least 1".into());
            }
        }
        if let Some(scan) = &self.scan {
            if scan.c.is_empty() {
                v.push("scan: c axis is empty".into());
            }
            if let Some(c) = scan.c.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
                v.push(format!("scan: c values must be finite and >= 0, got {c}"));
            }
            if let Some(axis) = &scan.dphi0_log {
                if !(axis.min > 0.0 && axis.max >= axis.min && axis.max.is_finite() && axis.points > 0) {
                    v.push(format!("scan: bad log axis {axis:?}"));
                }
            }
            let d = scan.dphi0_values();
            if d.is_empty() {
                v.push("scan: dphi0 axis is empty".into());
            }
            if d.iter().any(|x| !x.is_finite()) {
                v.push("scan: dphi0 values must be finite".into());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// SHA-256 of the config with presentation-only fields (name, output
    /// directory) cleared and the kernel written in canonical form.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.name.clear();
        c.output_dir = None;
        if let Ok(k) = self.kernel() {
            c.kernel = k.label();
        }
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The config of one scan cell.
    pub fn cell(&self, c: f64, dphi0: f64) -> Self {
        let mut cfg = self.clone();
        cfg.kernel = Kernel::spiked(c).label();
        cfg.dphi0 = Some(dphi0);
        cfg.scan = None;
        cfg.name = format!("{}-c{c}-d{dphi0}", self.name);
        cfg
    }
}

/// Integrated run and its diagnostics.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub report: ConvergenceReport,
}

/// Integrates a config and classifies the result.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    cfg.validate()?;
    let law = cfg.law()?;
    let s0 = cfg.initial_state(law.coupling().dim())?;
    let trajectory = evolve(&s0, &law, &cfg.integrator)?;
    let report = ConvergenceReport::from_trajectory(&trajectory, cfg.horizon(), cfg.floor)?;
    Ok(Simulation { trajectory, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub classification: String,
    pub decay_class: DecayClass,
    pub n_at_horizon: Vec<Option<f64>>,
    /// Largest deviation of per-value probabilities from the quantum
    /// reference started at the collapsed initial state.
    pub qm_max_deviation: f64,
    /// Per value, for diagonal Hamiltonians only.
    pub oracle: Vec<Option<OracleReport>>,
    pub convergence: ConvergenceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub config_hash: String,
    pub version: String,
    pub wall_time_s: f64,
    pub trust_flag: bool,
    pub renormalizations: usize,
    pub max_norm_drift: f64,
    pub steps: usize,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
    pub config: ExperimentConfig,
}

impl Manifest {
    fn new(cfg: &ExperimentConfig, preset: Option<&str>) -> Self {
        Self {
            name: cfg.name.clone(),
            preset: preset.map(str::to_string),
            config_hash: cfg.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
            trust_flag: false,
            renormalizations: 0,
            max_norm_drift: 0.0,
            steps: 0,
            status: "ok".into(),
            error: None,
            exit_code: 0,
            config: cfg.clone(),
        }
    }
}

/// Process exit code for an error: 1 for configuration problems, 2 for
/// failures while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownPreset { .. } | Error::KernelSpec(_) | Error::InvalidKernel(_) => 1,
        _ => 2,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes the trajectory CSV with per-value spread and exponent columns.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, floor: f64, out: W) -> Result<()> {
    let series = SpreadSeries::from_trajectory(traj, floor);
    let exponents: Vec<Vec<Option<f64>>> = (0..series.per_value.len())
        .map(|a| exponent_samples(&series.times, &series.value(a)).map(|(n, _)| n).unwrap_or_default())
        .collect();
    write_states_csv(&traj.times, &traj.states, &series.per_value, &exponents, out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn write_states_csv<W: Write>(
    times: &[f64],
    states: &[EnsembleState],
    sigma: &[Vec<Option<f64>>],
    exponents: &[Vec<Option<f64>>],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "a", "phase_index_within_value", "phi", "rho", "sigma", "n"])?;
    for (k, (t, s)) in times.iter().zip(states).enumerate() {
        for (a, group) in s.groups().iter().enumerate() {
            let sig = sigma.get(a).and_then(|v| v.get(k)).copied().flatten();
            let n = exponents.get(a).and_then(|v| v.get(k)).copied().flatten();
            for (idx, &i) in group.iter().enumerate() {
                let e = s.entries()[i];
                w.write_record([
                    t.to_string(),
                    a.to_string(),
                    idx.to_string(),
                    e.phi.to_string(),
                    e.rho.to_string(),
                    fmt_opt(sig),
                    fmt_opt(n),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn oracle_reports(cfg: &ExperimentConfig, sim: &Simulation) -> Result<Vec<Option<OracleReport>>> {
    let coupling = cfg.hamiltonian.coupling()?;
    let dim = coupling.dim();
    if !coupling.is_diagonal() {
        return Ok(vec![None; dim]);
    }
    let lambda = kernel_curvature(&cfg.kernel()?)?.lambda;
    let t = sim.report.times.last().copied().unwrap_or(0.0);
    Ok((0..dim)
        .map(|a| {
            let energy = coupling.r(a, a);
            let fit = sim
                .report
                .final_variance(a)
                .filter(|_| energy > 0.0 && t > 0.0)
                .and_then(|var| fit_sigma(lambda, energy * t, var).ok());
            Some(OracleReport::new(lambda, fit))
        })
        .collect())
}

fn build_report(cfg: &ExperimentConfig, sim: &mut Simulation) -> Result<RunReport> {
    let oracle = oracle_reports(cfg, sim)?;
    sim.report.sigma_fit = oracle.iter().flatten().find_map(|o| o.sigma_fit);
    let qm = qm_deviation(&sim.trajectory, &cfg.hamiltonian.coupling()?)?;
    Ok(RunReport {
        name: cfg.name.clone(),
        classification: sim.report.classification.label(),
        decay_class: sim.report.decay_class,
        n_at_horizon: sim.report.n_at_horizon(),
        qm_max_deviation: qm.into_iter().fold(0.0, f64::max),
        oracle,
        convergence: sim.report.clone(),
    })
}

fn run_montecarlo(cfg: &ExperimentConfig, mc: &MonteCarloSpec, dir: &Path) -> Result<()> {
    let law = cfg.law()?;
    let s0 = cfg.initial_state(law.coupling().dim())?;
    let stride = ((cfg.integrator.dt * cfg.integrator.snapshot_stride as f64) / mc.dt).round().max(1.0) as usize;
    for k in 0..mc.populations {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k);
        let p0 = sample_initial_ensemble(&s0, mc.members, &mut rng)?;
        let run = run_population(p0, &law, mc.dt, cfg.integrator.t_end, stride, &mut rng)?;
        let states: Vec<EnsembleState> = run.populations.iter().map(empirical_state).collect();
        let sigma: Vec<Vec<Option<f64>>> = {
            let dim = s0.dim();
            let mut per = vec![Vec::with_capacity(states.len()); dim];
            for s in &states {
                for (a, v) in crate::diagnostics::phase_dispersion(s).into_iter().enumerate() {
                    per[a].push(v);
                }
            }
            per
        };
        let suffix = if mc.populations == 1 { String::new() } else { format!("_{k}") };
        let f = fs::File::create(dir.join(format!("mc_trajectory{suffix}.csv")))?;
        write_states_csv(&run.times, &states, &sigma, &[], std::io::BufWriter::new(f))?;
        let f = fs::File::create(dir.join(format!("mc_events{suffix}.csv")))?;
        write_events_csv(&run.events, std::io::BufWriter::new(f))?;
    }
    Ok(())
}

/// Runs one experiment and writes its artifacts into `dir`. The manifest is
/// written even when the run fails.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    run_with_manifest(cfg, dir, None)
}

fn run_with_manifest(cfg: &ExperimentConfig, dir: &Path, preset: Option<&str>) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let start = Instant::now();
    let mut manifest = Manifest::new(cfg, preset);
    let result = (|| -> Result<RunReport> {
        let mut sim = simulate(cfg)?;
        manifest.trust_flag = sim.trajectory.trust_flag;
        manifest.renormalizations = sim.trajectory.renormalizations;
        manifest.max_norm_drift = sim.trajectory.max_norm_drift;
        manifest.steps = sim.trajectory.steps;
        let f = fs::File::create(dir.join("trajectory.csv"))?;
        write_trajectory_csv(&sim.trajectory, cfg.floor, std::io::BufWriter::new(f))?;
        let report = build_report(cfg, &mut sim)?;
        write_json(&dir.join("report.json"), &report)?;
        if let Some(mc) = &cfg.montecarlo {
            run_montecarlo(cfg, mc, dir)?;
        }
        Ok(report)
    })();
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    if let Err(e) = &result {
        manifest.status = "error".into();
        manifest.error = Some(e.to_string());
        manifest.exit_code = exit_code(e);
    }
    write_json(&dir.join("manifest.json"), &manifest)?;
    result
}

/// One row of a scan table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub c: f64,
    pub dphi0: f64,
    /// Classification label, or `error: <message>` for a failed cell.
    pub classification: String,
    pub n_at_horizon: Vec<Option<f64>>,
}

impl ScanRow {
    pub fn is_error(&self) -> bool {
        self.classification.starts_with("error")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub rows: Vec<ScanRow>,
}

impl ScanOutcome {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.is_error()).count()
    }

    pub fn cell(&self, c: f64, dphi0: f64) -> Option<&ScanRow> {
        self.rows.iter().find(|r| r.c == c && r.dphi0 == dphi0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["c", "dphi0", "classification", "n_at_horizon"])?;
        for r in &self.rows {
            let n: Vec<String> = r.n_at_horizon.iter().map(|v| fmt_opt(*v)).collect();
            w.write_record([r.c.to_string(), r.dphi0.to_string(), r.classification.clone(), n.join(";")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Classifies every `(c, dphi0)` cell of the config's scan on a pool of
/// `jobs` threads. Rows come out in axis order; failed cells are kept with
/// an error marker.
pub fn scan_phase_space(cfg: &ExperimentConfig, jobs: usize) -> Result<ScanOutcome> {
    cfg.validate()?;
    let scan = cfg.scan.as_ref().ok_or_else(|| Error::Config(vec!["scan: section missing".into()]))?;
    let cells: Vec<(f64, f64)> =
        scan.c.iter().flat_map(|&c| scan.dphi0_values().into_iter().map(move |d| (c, d))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(c, d)| match simulate(&cfg.cell(c, d)) {
                Ok(sim) => ScanRow {
                    c,
                    dphi0: d,
                    classification: sim.report.classification.label(),
                    n_at_horizon: sim.report.n_at_horizon(),
                },
                Err(e) => ScanRow { c, dphi0: d, classification: format!("error: {e}"), n_at_horizon: Vec::new() },
            })
            .collect()
    });
    Ok(ScanOutcome { rows })
}

/// Runs a scan and writes `scan.csv` and `manifest.json` into `dir`.
pub fn run_scan(cfg: &ExperimentConfig, dir: &Path, jobs: usize) -> Result<ScanOutcome> {
    scan_with_manifest(cfg, dir, jobs, None)
}

fn scan_with_manifest(cfg: &ExperimentConfig, dir: &Path, jobs: usize, preset: Option<&str>) -> Result<ScanOutcome> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let start = Instant::now();
    let mut manifest = Manifest::new(cfg, preset);
    let outcome = scan_phase_space(cfg, jobs)?;
    let f = fs::File::create(dir.join("scan.csv"))?;
    outcome.write_csv(std::io::BufWriter::new(f))?;
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    let failed = outcome.failures();
    if failed > 0 {
        manifest.status = "partial".into();
        manifest.error = Some(format!("{failed} of {} cells failed", outcome.rows.len()));
        manifest.exit_code = 3;
    }
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(outcome)
}

/// Two values with three phases each, split by `dphi0` within a value:
/// value 0 at `{0, d, 2d}`, value 1 at `{π/2 + d, π/2, π/2 + d/2}`.
pub fn two_level_template(name: &str, pauli: [f64; 4], kernel: &str, rho: [[f64; 3]; 2], dphi0: f64) -> ExperimentConfig {
    let offsets = [[(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)], [(0.5, 1.0), (0.5, 0.0), (0.5, 0.5)]];
    let entries = (0..2)
        .flat_map(|a| {
            (0..3).map(move |k| EntrySpec {
                a,
                rho: rho[a][k],
                phi: 0.0,
                phi_pi: offsets[a][k].0,
                dphi0_multiple: offsets[a][k].1,
            })
        })
        .collect();
    ExperimentConfig {
        name: name.into(),
        hamiltonian: HamiltonianSpec::pauli(pauli[0], pauli[1], pauli[2], pauli[3]),
        kernel: kernel.into(),
        model: Model::A,
        entries,
        dphi0: Some(dphi0),
        integrator: IntegratorControls::default(),
        floor: DEFAULT_FLOOR,
        horizon: None,
        seed: 0,
        montecarlo: None,
        scan: None,
        output_dir: None,
    }
}

pub const UNEVEN_RHO: [[f64; 3]; 2] = [[0.16, 0.08, 0.06], [0.23, 0.3, 0.17]];
pub const EVEN_RHO: [[f64; 3]; 2] = [[0.2, 0.1, 0.2], [0.2, 0.1, 0.2]];
pub const SIGMA_Z2: [f64; 4] = [0.0, 0.0, 0.0, 2.0];
pub const SIGMA_X_PLUS_Z: [f64; 4] = [0.0, 1.0, 0.0, 1.0];
pub const IDENTITY2: [f64; 4] = [2.0, 0.0, 0.0, 0.0];

/// The small-offset configuration with `H = 2σ_z`.
pub fn table1_config(kernel: &str) -> ExperimentConfig {
    two_level_template(&format!("table1-{}", kernel.replace(':', "")), SIGMA_Z2, kernel, UNEVEN_RHO, 0.001 * PI)
}

/// Large offsets: phases `{0, 1, 2}` and `{π/2 + 1, π/2, π/2 + 0.5}`.
pub fn large_offset_config(name: &str, pauli: [f64; 4], kernel: &str) -> ExperimentConfig {
    two_level_template(name, pauli, kernel, UNEVEN_RHO, 1.0)
}

/// A named preset: a list of runs or one scan.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Runs(Vec<ExperimentConfig>),
    Scan(ExperimentConfig),
}

/// Default scan template: the small-offset configuration over the default
/// `c` axis and 20 log-spaced offsets.
pub fn masterplot_config() -> ExperimentConfig {
    let mut cfg = table1_config("flat");
    cfg.name = "masterplot".into();
    cfg.scan = Some(ScanSpec { c: SCAN_C.to_vec(), dphi0: None, dphi0_log: Some(LogAxis { min: 1e-3 * PI, max: 2.0, points: 20 }) });
    cfg
}

pub fn preset(name: &str) -> Result<Preset> {
    let runs = |v: Vec<ExperimentConfig>| Ok(Preset::Runs(v));
    match name {
        "table1" | "table3" => runs(
            ["flat", "cosine", "spiked:100"]
                .iter()
                .map(|k| {
                    let mut c = table1_config(k);
                    c.name = c.name.replacen("table1", name, 1);
                    c
                })
                .collect(),
        ),
        "table4_moderate" => {
            let d = 0.1 * PI;
            runs(vec![
                two_level_template("table4-xz-cosine-uneven", SIGMA_X_PLUS_Z, "cosine", UNEVEN_RHO, d),
                two_level_template("table4-xz-spiked100-even", SIGMA_X_PLUS_Z, "spiked:100", EVEN_RHO, d),
                two_level_template("table4-z2-spiked100-uneven", SIGMA_Z2, "spiked:100", UNEVEN_RHO, d),
            ])
        }
        "table5_large" => runs(vec![
            large_offset_config("table5-xz-cosine", SIGMA_X_PLUS_Z, "cosine"),
            large_offset_config("table5-z2-spiked100", SIGMA_Z2, "spiked:100"),
        ]),
        "table6_identity" => runs(
            ["cosine", "spiked:100"]
                .iter()
                .map(|k| {
                    let mut c = table1_config(k);
                    c.hamiltonian = HamiltonianSpec::pauli(IDENTITY2[0], IDENTITY2[1], IDENTITY2[2], IDENTITY2[3]);
                    c.name = format!("table6-{}", k.replace(':', ""));
                    c
                })
                .collect(),
        ),
        "masterplot" => Ok(Preset::Scan(masterplot_config())),
        "masterplot2" => runs(
            RATE_C
                .iter()
                .map(|&c| {
                    let mut cfg = table1_config(&Kernel::spiked(c).label());
                    cfg.name = format!("masterplot2-c{c}");
                    cfg
                })
                .collect(),
        ),
        other => Err(Error::UnknownPreset {
            name: other.into(),
            available: PRESETS.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

/// Overrides applied to every config of a preset.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub model: Option<Model>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
    }
}

/// Outcome of a preset reproduction.
#[derive(Debug, Clone)]
pub enum Reproduction {
    Runs(Vec<(String, Result<RunReport>)>),
    Scan(ScanOutcome),
}

impl Reproduction {
    /// 0 when everything succeeded, otherwise the code of the first failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Reproduction::Runs(v) => v.iter().find_map(|(_, r)| r.as_ref().err().map(exit_code)).unwrap_or(0),
            Reproduction::Scan(s) => {
                if s.failures() > 0 {
                    3
                } else {
                    0
                }
            }
        }
    }
}

/// Runs a named preset into `dir`. Each run gets its own subdirectory; the
/// rate-bound preset also writes `minus_n.csv` with `c, t, a, minus_n`.
pub fn reproduce(name: &str, dir: &Path, jobs: usize, overrides: Overrides) -> Result<Reproduction> {
    match preset(name)? {
        Preset::Scan(mut cfg) => {
            overrides.apply(&mut cfg);
            Ok(Reproduction::Scan(scan_with_manifest(&cfg, dir, jobs, Some(name))?))
        }
        Preset::Runs(mut cfgs) => {
            cfgs.iter_mut().for_each(|c| overrides.apply(c));
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
            let results: Vec<(String, Result<RunReport>)> = pool.install(|| {
                cfgs.par_iter()
                    .map(|c| (c.name.clone(), run_with_manifest(c, &dir.join(&c.name), Some(name))))
                    .collect()
            });
            if name == "masterplot2" {
                write_minus_n(&results, &dir.join("minus_n.csv"))?;
            }
            Ok(Reproduction::Runs(results))
        }
    }
}

fn write_minus_n(results: &[(String, Result<RunReport>)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["c", "t", "a", "minus_n"])?;
    for ((_, r), c) in results.iter().zip(RATE_C) {
        let Ok(r) = r else { continue };
        for (a, series) in r.convergence.exponent_series.iter().enumerate() {
            for p in &series.points {
                w.write_record([c.to_string(), p.t.to_string(), a.to_string(), (-p.n).to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
