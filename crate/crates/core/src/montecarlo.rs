//! Finite ensembles: `N` discrete members, each carrying an observable value
//! and a phase.
//!
//! Phases drift by the continuum rule evaluated on the empirical state.
//! Probability moves by copying: the law for `ρ̇` is split into antisymmetric
//! pair flows `J_ij`, and when `J_ij < 0` each member of type `i`
//! independently adopts the beables of type `j` with probability
//! `|J_ij| dt / ρ_i`. The expected count change is then `N ρ̇ dt`. A type
//! that loses its last member can never be copied again.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;

use crate::dynamics::{EnsembleState, Entry, EvolutionLaw, Workspace};
use crate::error::{Error, Result};

/// Largest per-member transition probability allowed in one step.
pub const MAX_TRANSITION_PROBABILITY: f64 = 0.1;

/// Members whose phases differ by less than this are reported as one entry.
pub const PHASE_BIN: f64 = 1e-6;

/// Reproducible random stream for population number `stream` of a run.
pub fn population_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberType {
    pub a: usize,
    pub phi: f64,
    pub count: u64,
}

/// A multiset of members, stored as counts over a fixed list of types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    dim: usize,
    types: Vec<MemberType>,
    n: u64,
    t: f64,
}

impl Population {
    pub fn new(dim: usize, types: Vec<MemberType>) -> Result<Self> {
        let n: u64 = types.iter().map(|m| m.count).sum();
        if n == 0 {
            return Err(Error::InvalidState("population must have at least one member".into()));
        }
        if let Some(m) = types.iter().find(|m| m.a >= dim || !m.phi.is_finite()) {
            return Err(Error::InvalidState(format!("bad member type {m:?} for dim {dim}")));
        }
        Ok(Self { dim, types, n, t: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn types(&self) -> &[MemberType] {
        &self.types
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    fn live(&self) -> Vec<usize> {
        (0..self.types.len()).filter(|&i| self.types[i].count > 0).collect()
    }
}

/// Multinomial draw of `n` members over the entries of `s`.
pub fn sample_initial_ensemble<R: Rng + ?Sized>(s: &EnsembleState, n: u64, rng: &mut R) -> Result<Population> {
    if n == 0 {
        return Err(Error::InvalidState("population size must be at least 1".into()));
    }
    let mut remaining = n;
    let mut mass_left = s.total_probability();
    let mut types = Vec::with_capacity(s.len());
    for e in s.entries() {
        let count = if remaining == 0 || mass_left <= 0.0 {
            0
        } else {
            let p = (e.rho / mass_left).clamp(0.0, 1.0);
            binomial(remaining, p, rng)
        };
        remaining -= count;
        mass_left -= e.rho;
        types.push(MemberType { a: e.a, phi: e.phi, count });
    }
    // rounding in the running mass can leave the last draw short
    if remaining > 0 {
        let k = s.entries().iter().rposition(|e| e.rho > 0.0).expect("state has probability");
        types[k].count += remaining;
    }
    Population::new(s.dim(), types)
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if p <= 0.0 || n == 0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("probability in (0, 1)").sample(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Copy,
    Extinction,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::Copy => write!(f, "copy"),
            EventKind::Extinction => write!(f, "extinction"),
        }
    }
}

/// Copies are aggregated per step and ordered pair; extinctions name the
/// lost type in `from_type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEvent {
    pub t: f64,
    pub event: EventKind,
    pub from_type: usize,
    pub to_type: Option<usize>,
    pub count: u64,
}

/// Advances the population by `dt`: phase drift first, then copying with
/// flows evaluated on the drifted phases.
pub fn mc_step<R: Rng + ?Sized>(p: &mut Population, law: &EvolutionLaw, dt: f64, rng: &mut R) -> Result<Vec<McEvent>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidControls(format!("dt must be > 0, got {dt}")));
    }
    if p.dim != law.coupling().dim() {
        return Err(Error::InvalidState(format!("population dim {} does not match coupling dim {}", p.dim, law.coupling().dim())));
    }
    let live = p.live();
    let m = live.len();
    let nf = p.n as f64;
    let labels: Vec<usize> = live.iter().map(|&i| p.types[i].a).collect();
    let rho: Vec<f64> = live.iter().map(|&i| p.types[i].count as f64 / nf).collect();
    let mut phi: Vec<f64> = live.iter().map(|&i| p.types[i].phi).collect();

    let mut ws = Workspace::new(p.dim, &labels);
    let (mut dphi, mut drho) = (vec![0.0; m], vec![0.0; m]);
    law.eval_into(&labels, &phi, &rho, &mut ws, &mut dphi, &mut drho)?;
    for k in 0..m {
        phi[k] += dphi[k] * dt;
    }

    let flows = law.pair_flows(&labels, &phi, &rho)?;
    let mut probs = vec![0.0; m * m];
    for i in 0..m {
        let mut total = 0.0;
        for j in 0..m {
            let f = flows[i * m + j];
            if f < 0.0 {
                probs[i * m + j] = -f * dt / rho[i];
                total += probs[i * m + j];
            }
        }
        if total > MAX_TRANSITION_PROBABILITY {
            return Err(Error::StepTooLarge { prob: total });
        }
    }

    for (k, &i) in live.iter().enumerate() {
        p.types[i].phi = phi[k];
    }
    p.t += dt;

    let mut delta = vec![0i64; m];
    let mut events = Vec::new();
    for i in 0..m {
        let mut remaining = p.types[live[i]].count;
        let mut mass_left = 1.0;
        for j in 0..m {
            let pij = probs[i * m + j];
            if pij == 0.0 || remaining == 0 {
                continue;
            }
            let moved = binomial(remaining, pij / mass_left, rng);
            mass_left -= pij;
            if moved > 0 {
                remaining -= moved;
                delta[i] -= moved as i64;
                delta[j] += moved as i64;
                events.push(McEvent { t: p.t, event: EventKind::Copy, from_type: live[i], to_type: Some(live[j]), count: moved });
            }
        }
    }
    for k in 0..m {
        let ty = &mut p.types[live[k]];
        ty.count = (ty.count as i64 + delta[k]) as u64;
        if ty.count == 0 {
            events.push(McEvent { t: p.t, event: EventKind::Extinction, from_type: live[k], to_type: None, count: 0 });
        }
    }
    Ok(events)
}

/// The population as an ensemble state: `ρ = count/N`, with same-value
/// members closer than [`PHASE_BIN`] merged at their count-weighted mean
/// phase. A value with no members keeps one empty entry so the state stays
/// well formed.
pub fn empirical_state(p: &Population) -> EnsembleState {
    let nf = p.n as f64;
    let mut entries = Vec::new();
    for a in 0..p.dim {
        let mut members: Vec<(f64, u64)> =
            p.types.iter().filter(|m| m.a == a && m.count > 0).map(|m| (m.phi, m.count)).collect();
        if members.is_empty() {
            let phi = p.types.iter().find(|m| m.a == a).map_or(0.0, |m| m.phi);
            entries.push(Entry::new(a, phi, 0.0));
            continue;
        }
        members.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut start = 0;
        for k in 1..=members.len() {
            if k == members.len() || members[k].0 - members[k - 1].0 >= PHASE_BIN {
                let bin = &members[start..k];
                let count: u64 = bin.iter().map(|m| m.1).sum();
                let phi = bin.iter().map(|m| m.0 * m.1 as f64).sum::<f64>() / count as f64;
                entries.push(Entry::new(a, phi, count as f64 / nf));
                start = k;
            }
        }
    }
    EnsembleState::from_parts_unchecked(p.dim, entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRun {
    pub times: Vec<f64>,
    pub populations: Vec<Population>,
    pub events: Vec<McEvent>,
}

impl McRun {
    pub fn states(&self) -> Vec<EnsembleState> {
        self.populations.iter().map(empirical_state).collect()
    }
}

/// Runs `mc_step` up to `t_end`, keeping every `stride`-th population.
pub fn run_population<R: Rng + ?Sized>(
    p0: Population,
    law: &EvolutionLaw,
    dt: f64,
    t_end: f64,
    stride: usize,
    rng: &mut R,
) -> Result<McRun> {
    let steps = (t_end / dt).round() as usize;
    let stride = stride.max(1);
    let mut p = p0;
    let mut run = McRun { times: vec![p.t], populations: vec![p.clone()], events: Vec::new() };
    for k in 1..=steps {
        run.events.extend(mc_step(&mut p, law, dt, rng)?);
        if k % stride == 0 || k == steps {
            run.times.push(p.t);
            run.populations.push(p.clone());
        }
    }
    Ok(run)
}

/// Writes the event log as CSV.
pub fn write_events_csv<W: Write>(events: &[McEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "event", "from_type", "to_type", "count"])?;
    for e in events {
        w.write_record([
            e.t.to_string(),
            e.event.to_string(),
            e.from_type.to_string(),
            e.to_type.map_or_else(String::new, |j| j.to_string()),
            e.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
