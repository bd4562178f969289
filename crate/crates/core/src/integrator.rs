//! Classical fourth-order Runge–Kutta integration of an ensemble state, with
//! optional step-doubling error control.
//!
//! Internally each value's phases are shifted by whole turns whenever they
//! leave `(−π, π]`, which keeps small within-value differences resolvable
//! over long runs; snapshots report the unwrapped phases. Probability is
//! monitored rather than enforced: a renormalization happens only if `|Σρ − 1|` exceeds the state
//! tolerance, and every such event is counted.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::dynamics::{EnsembleState, EvolutionLaw, Workspace, NORM_TOL};
use crate::error::{Error, Result};

/// Smallest step the adaptive controller may take before giving up.
pub const MIN_ADAPTIVE_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    #[default]
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorControls {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub tolerance: f64,
    pub mode: StepMode,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        Self { dt: 1e-3, t_end: 1000.0, snapshot_stride: 100, tolerance: 1e-10, mode: StepMode::Fixed }
    }
}

impl IntegratorControls {
    pub fn fixed(dt: f64, t_end: f64, snapshot_stride: usize) -> Self {
        Self { dt, t_end, snapshot_stride, ..Self::default() }
    }

    pub fn adaptive(dt: f64, t_end: f64, tolerance: f64, snapshot_stride: usize) -> Self {
        Self { dt, t_end, snapshot_stride, tolerance, mode: StepMode::Adaptive }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            v.push(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            v.push(format!("t_end must be > 0, got {}", self.t_end));
        }
        if !(self.tolerance > 0.0) {
            v.push(format!("tolerance must be > 0, got {}", self.tolerance));
        }
        if self.snapshot_stride == 0 {
            v.push("snapshot_stride must be positive".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidControls(v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<EnsembleState>,
    /// Set once any occupied entry has dropped below the probability floor.
    pub trust_flag: bool,
    pub renormalizations: usize,
    pub steps: usize,
    /// Largest `|Σρ − 1|` seen before any renormalization.
    pub max_norm_drift: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &EnsembleState {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Result of a single step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: EnsembleState,
    pub renormalized: bool,
}

/// Flat-coordinate RK4 engine: `y = [φ_0..φ_{n-1}, ρ_0..ρ_{n-1}]`.
#[derive(Debug, Clone)]
pub struct Rk4 {
    labels: Vec<usize>,
    ws: Workspace,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(law: &EvolutionLaw, labels: &[usize]) -> Self {
        let m = 2 * labels.len();
        Self {
            labels: labels.to_vec(),
            ws: law.workspace(labels),
            k: [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]],
            tmp: vec![0.0; m],
        }
    }

    fn rhs(&mut self, law: &EvolutionLaw, y: &[f64], stage: usize) -> Result<()> {
        let n = self.labels.len();
        let (dphi, drho) = self.k[stage].split_at_mut(n);
        law.eval_into(&self.labels, &y[..n], &y[n..], &mut self.ws, dphi, drho)
    }

    /// Advances `y` in place by `h`.
    pub fn advance(&mut self, law: &EvolutionLaw, y: &mut [f64], h: f64) -> Result<()> {
        let m = y.len();
        self.rhs(law, y, 0)?;
        for i in 0..m {
            self.tmp[i] = y[i] + 0.5 * h * self.k[0][i];
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.rhs(law, &tmp, 1)?;
        self.tmp = tmp;
        for i in 0..m {
            self.tmp[i] = y[i] + 0.5 * h * self.k[1][i];
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.rhs(law, &tmp, 2)?;
        self.tmp = tmp;
        for i in 0..m {
            self.tmp[i] = y[i] + h * self.k[2][i];
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.rhs(law, &tmp, 3)?;
        self.tmp = tmp;
        let [k1, k2, k3, k4] = &self.k;
        for i in 0..m {
            let incr = h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if incr != 0.0 {
                y[i] += incr;
            }
        }
        Ok(())
    }
}

fn pack(s: &EnsembleState) -> Vec<f64> {
    let mut y = s.phases();
    y.extend(s.probabilities());
    y
}

/// Whole-turn bookkeeping for the phase block of `y`.
struct Turns {
    groups: Vec<Vec<usize>>,
    turns: Vec<i64>,
}

impl Turns {
    fn new(s: &EnsembleState) -> Self {
        let groups: Vec<Vec<usize>> = s.groups().into_iter().filter(|g| !g.is_empty()).collect();
        let turns = vec![0; groups.len()];
        Self { groups, turns }
    }

    /// Shifts every value whose leading phase left `(−π, π]` by whole turns.
    fn rebase(&mut self, y: &mut [f64]) {
        for (g, turns) in self.groups.iter().zip(self.turns.iter_mut()) {
            let lead = y[g[0]];
            if lead.abs() <= PI {
                continue;
            }
            let k = (lead / TAU).round();
            for &i in g {
                y[i] -= k * TAU;
            }
            *turns += k as i64;
        }
    }

    fn unpack(&self, template: &EnsembleState, y: &[f64]) -> EnsembleState {
        let n = template.len();
        let mut phi = y[..n].to_vec();
        for (g, &k) in self.groups.iter().zip(&self.turns) {
            if k != 0 {
                for &i in g {
                    phi[i] += k as f64 * TAU;
                }
            }
        }
        template.with_coordinates(&phi, &y[n..])
    }
}

/// Post-step bookkeeping shared by [`step`] and [`evolve`].
struct Monitor {
    floor: f64,
    below: Vec<bool>,
    trust_flag: bool,
    renormalizations: usize,
    max_norm_drift: f64,
}

impl Monitor {
    fn new(floor: f64, rho: &[f64]) -> Self {
        Self {
            floor,
            below: rho.iter().map(|&r| r < floor).collect(),
            trust_flag: false,
            renormalizations: 0,
            max_norm_drift: 0.0,
        }
    }

    fn check(&mut self, y: &mut [f64], t: f64) -> Result<bool> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure { t });
        }
        let n = y.len() / 2;
        let rho = &mut y[n..];
        for (i, r) in rho.iter_mut().enumerate() {
            if *r < 0.0 {
                *r = 0.0;
                self.trust_flag = true;
            }
            if !self.below[i] && *r < self.floor {
                self.below[i] = true;
                self.trust_flag = true;
            }
        }
        let sum: f64 = rho.iter().sum();
        let drift = (sum - 1.0).abs();
        self.max_norm_drift = self.max_norm_drift.max(drift);
        if drift > NORM_TOL {
            rho.iter_mut().for_each(|r| *r /= sum);
            self.renormalizations += 1;
            return Ok(true);
        }
        Ok(false)
    }
}

/// One RK4 step of size `dt > 0`.
pub fn step(s: &EnsembleState, law: &EvolutionLaw, dt: f64) -> Result<StepOutcome> {
    if !(dt > 0.0) {
        return Err(Error::InvalidControls(format!("dt must be > 0, got {dt}")));
    }
    let mut y = pack(s);
    let mut rk = Rk4::new(law, &s.labels());
    rk.advance(law, &mut y, dt)?;
    let mut mon = Monitor::new(law.floor(), &s.probabilities());
    let renormalized = mon.check(&mut y, dt)?;
    let n = s.len();
    Ok(StepOutcome { state: s.with_coordinates(&y[..n], &y[n..]), renormalized })
}

/// Integrates from `t = 0` to `ctl.t_end`, recording the initial state, every
/// `snapshot_stride`-th accepted step and the final state.
pub fn evolve(s0: &EnsembleState, law: &EvolutionLaw, ctl: &IntegratorControls) -> Result<Trajectory> {
    ctl.validate()?;
    if s0.dim() != law.coupling().dim() {
        return Err(Error::InvalidState("state and coupling dimensions differ".into()));
    }
    let mut y = pack(s0);
    let mut turns = Turns::new(s0);
    turns.rebase(&mut y);
    let mut rk = Rk4::new(law, &s0.labels());
    let mut mon = Monitor::new(law.floor(), &s0.probabilities());
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![s0.clone()],
        trust_flag: false,
        renormalizations: 0,
        steps: 0,
        max_norm_drift: 0.0,
    };

    match ctl.mode {
        StepMode::Fixed => {
            let n_steps = (ctl.t_end / ctl.dt - 1e-9).ceil().max(1.0) as usize;
            for k in 1..=n_steps {
                let t_prev = (k - 1) as f64 * ctl.dt;
                let t = if k == n_steps { ctl.t_end } else { k as f64 * ctl.dt };
                rk.advance(law, &mut y, t - t_prev)?;
                mon.check(&mut y, t)?;
                turns.rebase(&mut y);
                traj.steps += 1;
                if k % ctl.snapshot_stride == 0 || k == n_steps {
                    traj.times.push(t);
                    traj.states.push(turns.unpack(s0, &y));
                }
            }
        }
        StepMode::Adaptive => {
            let mut t = 0.0;
            let mut h = ctl.dt;
            let mut accepted = 0usize;
            let mut full = y.clone();
            let mut half = y.clone();
            while t < ctl.t_end {
                let last = t + h >= ctl.t_end;
                let h_try = if last { ctl.t_end - t } else { h };
                full.copy_from_slice(&y);
                half.copy_from_slice(&y);
                rk.advance(law, &mut full, h_try)?;
                rk.advance(law, &mut half, 0.5 * h_try)?;
                rk.advance(law, &mut half, 0.5 * h_try)?;
                let err = full
                    .iter()
                    .zip(&half)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
                    / 15.0
                    / ctl.tolerance;
                if !err.is_finite() {
                    return Err(Error::IntegrationFailure { t: t + h_try });
                }
                let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) };
                if err <= 1.0 {
                    for (yi, (hf, fu)) in y.iter_mut().zip(half.iter().zip(&full)) {
                        *yi = hf + (hf - fu) / 15.0;
                    }
                    t = if last { ctl.t_end } else { t + h_try };
                    mon.check(&mut y, t)?;
                    turns.rebase(&mut y);
                    accepted += 1;
                    traj.steps += 1;
                    if accepted % ctl.snapshot_stride == 0 || t >= ctl.t_end {
                        traj.times.push(t);
                        traj.states.push(turns.unpack(s0, &y));
                    }
                    if !last {
                        h = h_try * factor;
                    }
                } else {
                    h = h_try * factor;
                    if h < MIN_ADAPTIVE_STEP {
                        return Err(Error::StepCollapse { t });
                    }
                }
            }
        }
    }
    traj.trust_flag = mon.trust_flag;
    traj.renormalizations = mon.renormalizations;
    traj.max_norm_drift = mon.max_norm_drift;
    Ok(traj)
}
