//! Convergence measures, run classification and the phenomenology formulas.
//!
//! The phase spread of a value is the probability-weighted circular standard
//! deviation of its phases. Its logarithmic time derivative `n = d ln σ/d ln t`
//! is fitted by least squares over windows half a decade wide.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::circular::weighted_dispersion;
use crate::dynamics::{collapse_to_equilibrium, EnsembleState};
use crate::error::{Error, Result};
use crate::hamiltonian::{qm_reference_evolution, CouplingMatrix};
use crate::integrator::Trajectory;

/// Spread at or above which a value counts as far from equilibrium.
pub const DIVERGENCE_SPREAD: f64 = 0.5;

/// A value converges when its fitted exponent at the horizon is at most this.
pub const CONVERGENCE_EXPONENT: f64 = -0.2;

/// Minimum number of samples in a fit window.
pub const MIN_WINDOW_SAMPLES: usize = 20;

/// Window width in decades.
pub const WINDOW_DECADES: f64 = 0.5;

/// Per-value spread over all entries with `ρ > 0`; `None` for empty values.
pub fn phase_dispersion(s: &EnsembleState) -> Vec<Option<f64>> {
    live_phase_dispersion(s, 0.0)
}

/// Per-value spread over entries with `ρ > floor`. Entries at or below the
/// floor no longer exchange probability and are left out.
pub fn live_phase_dispersion(s: &EnsembleState, floor: f64) -> Vec<Option<f64>> {
    s.groups()
        .iter()
        .map(|g| {
            let (ph, w): (Vec<f64>, Vec<f64>) = g
                .iter()
                .map(|&i| &s.entries()[i])
                .filter(|e| e.rho > floor)
                .map(|e| (e.phi, e.rho))
                .unzip();
            if ph.is_empty() {
                None
            } else {
                weighted_dispersion(&ph, &w)
            }
        })
        .collect()
}

/// Spread time series, one column per observable value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSeries {
    pub times: Vec<f64>,
    /// `per_value[a][k]` is the spread of value `a` at `times[k]`.
    pub per_value: Vec<Vec<Option<f64>>>,
}

impl SpreadSeries {
    pub fn from_trajectory(traj: &Trajectory, floor: f64) -> Self {
        let dim = traj.states.first().map_or(0, |s| s.dim());
        let mut per_value = vec![Vec::with_capacity(traj.len()); dim];
        for s in &traj.states {
            for (a, v) in live_phase_dispersion(s, floor).into_iter().enumerate() {
                per_value[a].push(v);
            }
        }
        Self { times: traj.times.clone(), per_value }
    }

    /// Spread of value `a` with absent entries read as zero.
    pub fn value(&self, a: usize) -> Vec<f64> {
        self.per_value[a].iter().map(|v| v.unwrap_or(0.0)).collect()
    }

    /// Values that are occupied at every sample.
    pub fn occupied_values(&self) -> Vec<usize> {
        (0..self.per_value.len()).filter(|&a| self.per_value[a].iter().all(Option::is_some)).collect()
    }
}

/// Running sums of `(ln t, ln σ)` so that any window fit is O(1).
struct LogFit {
    t: Vec<f64>,
    sx: Vec<f64>,
    sy: Vec<f64>,
    sxx: Vec<f64>,
    sxy: Vec<f64>,
    bad: Vec<usize>,
}

impl LogFit {
    fn new(times: &[f64], sigma: &[f64]) -> Self {
        let n = times.len();
        let mut f = Self {
            t: times.to_vec(),
            sx: vec![0.0; n + 1],
            sy: vec![0.0; n + 1],
            sxx: vec![0.0; n + 1],
            sxy: vec![0.0; n + 1],
            bad: vec![0; n + 1],
        };
        for k in 0..n {
            let ok = times[k] > 0.0 && sigma[k] > 0.0 && sigma[k].is_finite();
            let (x, y) = if ok { (times[k].ln(), sigma[k].ln()) } else { (0.0, 0.0) };
            f.sx[k + 1] = f.sx[k] + x;
            f.sy[k + 1] = f.sy[k] + y;
            f.sxx[k + 1] = f.sxx[k] + x * x;
            f.sxy[k + 1] = f.sxy[k] + x * y;
            f.bad[k + 1] = f.bad[k] + usize::from(!ok);
        }
        f
    }

    /// Sample index range `[lo, hi)` covering `t ∈ [t0, t1]`.
    fn range(&self, t0: f64, t1: f64) -> (usize, usize) {
        let eps = 1e-9 * t1.abs().max(1.0);
        let lo = self.t.partition_point(|&t| t < t0 - eps);
        let hi = self.t.partition_point(|&t| t <= t1 + eps);
        (lo, hi.max(lo))
    }

    /// Least-squares slope over `[lo, hi)`; `None` if too few samples or any
    /// sample has a non-positive spread.
    fn slope(&self, lo: usize, hi: usize) -> Option<f64> {
        let m = hi - lo;
        if m < MIN_WINDOW_SAMPLES || self.bad[hi] != self.bad[lo] {
            return None;
        }
        let m = m as f64;
        let sx = self.sx[hi] - self.sx[lo];
        let sy = self.sy[hi] - self.sy[lo];
        // centre the second moments to avoid cancellation
        let sxx = self.sxx[hi] - self.sxx[lo] - sx * sx / m;
        let sxy = self.sxy[hi] - self.sxy[lo] - sx * sy / m;
        if !(sxx > 0.0) {
            return None;
        }
        Some(sxy / sxx)
    }
}

/// Fitted exponent at one window centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPoint {
    pub t: f64,
    pub n: f64,
}

/// Sliding-window exponent series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExponentSeries {
    pub points: Vec<ExponentPoint>,
    /// Windows dropped because they contained a zero spread.
    pub skipped: usize,
}

/// `n(t) = d ln σ / d ln t` at every sample whose centred half-decade window
/// lies inside the series and holds at least [`MIN_WINDOW_SAMPLES`] samples.
pub fn convergence_exponent(times: &[f64], sigma: &[f64]) -> Result<ExponentSeries> {
    let (aligned, skipped) = exponent_samples(times, sigma)?;
    let points: Vec<ExponentPoint> =
        times.iter().zip(&aligned).filter_map(|(&t, n)| n.map(|n| ExponentPoint { t, n })).collect();
    if points.is_empty() && skipped == 0 {
        return Err(Error::SeriesTooShort(format!("no half-decade window with {MIN_WINDOW_SAMPLES} samples")));
    }
    Ok(ExponentSeries { points, skipped })
}

/// Same fit as [`convergence_exponent`], aligned with `times`; also returns
/// the number of windows skipped for holding a zero spread.
pub fn exponent_samples(times: &[f64], sigma: &[f64]) -> Result<(Vec<Option<f64>>, usize)> {
    if times.len() != sigma.len() {
        return Err(Error::SeriesTooShort("times and spreads differ in length".into()));
    }
    let first = times.iter().copied().find(|&t| t > 0.0);
    let (Some(first), Some(&last)) = (first, times.last()) else {
        return Err(Error::SeriesTooShort("no positive times".into()));
    };
    let half = 10f64.powf(WINDOW_DECADES / 2.0);
    let fit = LogFit::new(times, sigma);
    let mut skipped = 0;
    let aligned = times
        .iter()
        .map(|&tc| {
            if tc / half < first || tc * half > last {
                return None;
            }
            let (lo, hi) = fit.range(tc / half, tc * half);
            if hi - lo < MIN_WINDOW_SAMPLES {
                return None;
            }
            let n = fit.slope(lo, hi);
            skipped += usize::from(n.is_none());
            n
        })
        .collect();
    Ok((aligned, skipped))
}

/// Exponent fitted on the half decade ending at `t_end`.
pub fn exponent_at(times: &[f64], sigma: &[f64], t_end: f64) -> Option<f64> {
    let fit = LogFit::new(times, sigma);
    let (lo, hi) = fit.range(t_end / 10f64.powf(WINDOW_DECADES), t_end);
    fit.slope(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Diverged,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Converged,
    Diverged,
    Marginal,
    /// Values disagree; keyed by observable value.
    PartialPerValue(BTreeMap<usize, Verdict>),
}

impl Classification {
    pub fn label(&self) -> String {
        match self {
            Self::Converged => "converged".into(),
            Self::Diverged => "diverged".into(),
            Self::Marginal => "marginal".into(),
            Self::PartialPerValue(m) => {
                let parts: Vec<String> = m.iter().map(|(a, v)| format!("{a}={}", verdict_label(*v))).collect();
                format!("partial[{}]", parts.join(";"))
            }
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, Self::Converged)
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, Self::Diverged)
    }
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "converged",
        Verdict::Diverged => "diverged",
        Verdict::Marginal => "marginal",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClass {
    PowerLaw,
    Exponential,
    None,
}

/// Outcome for one observable value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueOutcome {
    pub verdict: Verdict,
    /// `None` when the horizon window holds a zero spread.
    pub n_at_horizon: Option<f64>,
    pub decay: DecayClass,
    /// The spread is exactly zero at the horizon: one live phase remains.
    pub merged: bool,
}

fn check_horizon(times: &[f64], horizon: f64) -> Result<()> {
    if !(horizon > 0.0) {
        return Err(Error::SeriesTooShort(format!("horizon must be positive, got {horizon}")));
    }
    match times.last() {
        Some(&t) if t >= horizon * (1.0 - 1e-9) => Ok(()),
        Some(&t) => Err(Error::SeriesTooShort(format!("series ends at t = {t}, before horizon {horizon}"))),
        None => Err(Error::SeriesTooShort("empty series".into())),
    }
}

/// Whether the spread, late in the run, climbed back to its starting scale
/// after having dropped to half of that level: the run approached
/// equilibrium and then moved away again.
fn recurs(times: &[f64], sigma: &[f64], horizon: f64) -> bool {
    let Some(start) = sigma.iter().copied().find(|&s| s > 0.0) else {
        return false;
    };
    let mut low = f64::INFINITY;
    for (&t, &s) in times.iter().zip(sigma) {
        if t > horizon * (1.0 + 1e-9) {
            break;
        }
        if t >= horizon / 10.0 && s >= 0.5 * start && low <= 0.5 * s {
            return true;
        }
        low = low.min(s);
    }
    false
}

/// Exponential decay shows up as an exponent that keeps growing in
/// magnitude roughly in proportion to `t`; a power law has a steady one.
fn decay_class(times: &[f64], sigma: &[f64]) -> DecayClass {
    let Ok(series) = convergence_exponent(times, sigma) else {
        return DecayClass::None;
    };
    let Some(last) = series.points.last() else {
        return DecayClass::None;
    };
    let target = last.t / 10f64.powf(WINDOW_DECADES);
    let Some(early) = series.points.iter().min_by(|a, b| (a.t - target).abs().total_cmp(&(b.t - target).abs())) else {
        return DecayClass::None;
    };
    if early.t >= last.t || last.n > -1.0 || early.n >= 0.0 {
        return if last.n < 0.0 { DecayClass::PowerLaw } else { DecayClass::None };
    }
    // exponential: n2/n1 ≈ t2/t1 = 10^0.5; a power law stays near 1
    if last.n / early.n >= 10f64.powf(WINDOW_DECADES / 2.0) {
        DecayClass::Exponential
    } else {
        DecayClass::PowerLaw
    }
}

/// Classifies a single value's spread series at `horizon`:
/// diverged if the spread reaches [`DIVERGENCE_SPREAD`] during the last
/// decade or climbs back to its initial scale there, otherwise converged if
/// the spread vanishes at the horizon or its fitted exponent is at most
/// [`CONVERGENCE_EXPONENT`], otherwise marginal.
pub fn classify_value(times: &[f64], sigma: &[f64], horizon: f64) -> Result<ValueOutcome> {
    if times.len() != sigma.len() {
        return Err(Error::SeriesTooShort("times and spreads differ in length".into()));
    }
    check_horizon(times, horizon)?;
    let fit = LogFit::new(times, sigma);
    let (lo, hi) = fit.range(horizon / 10f64.powf(WINDOW_DECADES), horizon);
    if hi - lo < MIN_WINDOW_SAMPLES {
        return Err(Error::SeriesTooShort(format!(
            "fewer than {MIN_WINDOW_SAMPLES} samples in the half decade before {horizon}"
        )));
    }
    let n_at_horizon = fit.slope(lo, hi);
    let h_idx = fit.range(horizon, horizon).0.min(sigma.len() - 1);
    let merged = sigma[h_idx] == 0.0;

    let (dlo, dhi) = fit.range(horizon / 10.0, horizon);
    let peak = sigma[dlo..dhi].iter().copied().fold(0.0, f64::max);
    let verdict = if peak >= DIVERGENCE_SPREAD || recurs(times, sigma, horizon) {
        Verdict::Diverged
    } else if merged || n_at_horizon.is_some_and(|n| n <= CONVERGENCE_EXPONENT) {
        Verdict::Converged
    } else {
        Verdict::Marginal
    };
    let decay = if verdict == Verdict::Converged {
        let end = fit.range(0.0, horizon).1;
        decay_class(&times[..end], &sigma[..end])
    } else {
        DecayClass::None
    };
    Ok(ValueOutcome { verdict, n_at_horizon, decay, merged })
}

fn aggregate(outcomes: &BTreeMap<usize, ValueOutcome>) -> Classification {
    let mut verdicts = outcomes.values().map(|o| o.verdict);
    let Some(first) = verdicts.next() else {
        return Classification::Converged;
    };
    if verdicts.all(|v| v == first) {
        match first {
            Verdict::Converged => Classification::Converged,
            Verdict::Diverged => Classification::Diverged,
            Verdict::Marginal => Classification::Marginal,
        }
    } else {
        Classification::PartialPerValue(outcomes.iter().map(|(&a, o)| (a, o.verdict)).collect())
    }
}

/// Classifies a run from its per-value spread series. Values that are empty
/// at any sample are ignored.
pub fn classify_convergence(series: &SpreadSeries, horizon: f64) -> Result<Classification> {
    Ok(aggregate(&value_outcomes(series, horizon)?))
}

fn value_outcomes(series: &SpreadSeries, horizon: f64) -> Result<BTreeMap<usize, ValueOutcome>> {
    let values = series.occupied_values();
    if values.is_empty() {
        return Err(Error::SeriesTooShort("no observable value is occupied throughout".into()));
    }
    values
        .into_iter()
        .map(|a| Ok((a, classify_value(&series.times, &series.value(a), horizon)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub per_value_sigma: Vec<Vec<Option<f64>>>,
    pub exponent_series: Vec<ExponentSeries>,
    pub outcomes: BTreeMap<usize, ValueOutcome>,
    pub classification: Classification,
    pub sigma_fit: Option<f64>,
    pub decay_class: DecayClass,
}

impl ConvergenceReport {
    /// Builds the report from a trajectory, using only entries above `floor`.
    pub fn from_trajectory(traj: &Trajectory, horizon: f64, floor: f64) -> Result<Self> {
        Self::from_series(SpreadSeries::from_trajectory(traj, floor), horizon)
    }

    pub fn from_series(series: SpreadSeries, horizon: f64) -> Result<Self> {
        let outcomes = value_outcomes(&series, horizon)?;
        let classification = aggregate(&outcomes);
        let exponent_series = (0..series.per_value.len())
            .map(|a| convergence_exponent(&series.times, &series.value(a)).unwrap_or_default())
            .collect();
        let mut classes = outcomes.values().map(|o| o.decay);
        let first = classes.next().unwrap_or(DecayClass::None);
        let decay_class = if classes.all(|c| c == first) { first } else { DecayClass::None };
        Ok(Self {
            horizon,
            times: series.times,
            per_value_sigma: series.per_value,
            exponent_series,
            outcomes,
            classification,
            sigma_fit: None,
            decay_class,
        })
    }

    /// Exponent at the horizon for each value, `None` where undefined.
    pub fn n_at_horizon(&self) -> Vec<Option<f64>> {
        let dim = self.per_value_sigma.len();
        (0..dim).map(|a| self.outcomes.get(&a).and_then(|o| o.n_at_horizon)).collect()
    }

    /// Weighted phase variance `⟨Δφ²⟩` of value `a` at the last sample.
    pub fn final_variance(&self, a: usize) -> Option<f64> {
        self.per_value_sigma.get(a)?.last().copied().flatten().map(|s| s * s)
    }
}

/// Sup over values of `|ρ_a(t) − ρ_a^QM(t)|` at each snapshot, with the
/// reference started from the collapsed initial state.
pub fn qm_deviation(traj: &Trajectory, m: &CouplingMatrix) -> Result<Vec<f64>> {
    let Some(s0) = traj.states.first() else {
        return Ok(Vec::new());
    };
    let eq = collapse_to_equilibrium(s0);
    let (rho0, phi0) = (eq.probabilities(), eq.phases());
    let total: f64 = rho0.iter().sum();
    let rho0: Vec<f64> = rho0.iter().map(|r| r / total).collect();
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| {
            let (want, _) = qm_reference_evolution(m, &rho0, &phi0, t)?;
            Ok(s.value_probabilities().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect()
}

/// Level energy shifted by the residual phase variance.
pub fn effective_energy(h_ii: f64, var_dphi: f64) -> Result<f64> {
    if !(var_dphi >= 0.0) {
        return Err(Error::Domain(format!("phase variance must be non-negative, got {var_dphi}")));
    }
    Ok(h_ii * (1.0 + var_dphi))
}

/// Curvature power spectrum with inputs in Planck units: the vacuum term
/// plus a scale-invariant term from the primordial phase variance.
pub fn power_spectrum_estimate(k_over_mp: f64, t_mp: f64, var0: f64) -> Result<f64> {
    if !(k_over_mp >= 0.0 && t_mp > 0.0 && var0 >= 0.0) {
        return Err(Error::Domain(format!(
            "need k/M_p >= 0, M_p t > 0, variance >= 0; got {k_over_mp}, {t_mp}, {var0}"
        )));
    }
    let s3 = 3f64.sqrt();
    Ok(k_over_mp.powi(2) / (16.0 * PI * PI * s3) + s3 * var0 / (8.0 * PI * PI * t_mp * t_mp))
}

/// Vacuum energy density in meV⁴ for a transition temperature in TeV.
pub fn vacuum_energy_estimate(t_tev: f64, var0: f64) -> Result<f64> {
    if !(t_tev > 0.0 && var0 >= 0.0) {
        return Err(Error::Domain(format!("need T > 0 and variance >= 0; got {t_tev}, {var0}")));
    }
    Ok(14.0 * var0.sqrt() * t_tev.powi(8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{EvolutionLaw, Model};
    use crate::hamiltonian::{pauli_to_coupling, PauliCoefficients};
    use crate::integrator::{evolve, IntegratorControls};
    use crate::kernel::Kernel;
    use approx::assert_abs_diff_eq;

    fn grid(t_end: f64, dt: f64) -> Vec<f64> {
        (0..=(t_end / dt).round() as usize).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn dispersion_examples() {
        let s = EnsembleState::equilibrium(&[0.4, 0.6], &[0.3, 1.0]).unwrap();
        assert_eq!(phase_dispersion(&s), vec![Some(0.0), Some(0.0)]);

        let s = EnsembleState::from_groups(&[vec![(0.0, 0.5), (0.2, 0.5)]]).unwrap();
        assert_abs_diff_eq!(phase_dispersion(&s)[0].unwrap(), 0.1, epsilon = 1e-15);

        let s = EnsembleState::from_groups(&[vec![(0.0, 0.25), (0.4, 0.75)]]).unwrap();
        assert_abs_diff_eq!(phase_dispersion(&s)[0].unwrap(), 0.03f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn empty_value_has_no_dispersion() {
        let s = EnsembleState::from_groups(&[vec![(0.0, 1.0)], vec![(0.5, 0.0)]]).unwrap();
        assert_eq!(phase_dispersion(&s), vec![Some(0.0), None]);
    }

    #[test]
    fn live_dispersion_skips_frozen() {
        let s = EnsembleState::from_groups(&[vec![(0.0, 1.0 - 1e-15), (2.0, 1e-15)]]).unwrap();
        assert!(phase_dispersion(&s)[0].unwrap() > 0.0);
        assert_eq!(live_phase_dispersion(&s, 1e-13)[0], Some(0.0));
    }

    #[test]
    fn exponent_of_pure_power_law() {
        let t = grid(100.0, 0.1);
        let sigma: Vec<f64> = t.iter().map(|&t| 3.0 / t).collect();
        let n = convergence_exponent(&t, &sigma).unwrap();
        assert!(!n.points.is_empty());
        for p in &n.points {
            assert_abs_diff_eq!(p.n, -1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn exponent_of_exponential_decays_without_bound() {
        let t = grid(30.0, 0.01);
        let sigma: Vec<f64> = t.iter().map(|&t| (-t).exp()).collect();
        let n = convergence_exponent(&t, &sigma).unwrap();
        let first = n.points.first().unwrap();
        let last = n.points.last().unwrap();
        assert!(last.n < -15.0 && last.n < 3.0 * first.n);
        // n ≈ −t at the window centre
        assert_abs_diff_eq!(last.n / last.t, -1.0, epsilon = 0.1);
    }

    #[test]
    fn zero_spread_windows_are_skipped() {
        let t = grid(100.0, 0.1);
        let sigma: Vec<f64> = t.iter().map(|&t| if t > 50.0 { 0.0 } else { 1.0 / t }).collect();
        let n = convergence_exponent(&t, &sigma).unwrap();
        assert!(n.skipped > 0);
        assert!(n.points.iter().all(|p| (p.n + 1.0).abs() < 1e-9));
    }

    #[test]
    fn classification_examples() {
        let t = grid(1000.0, 0.5);
        let decaying: Vec<f64> = t.iter().map(|&t| 1e-3 / (1.0 + t)).collect();
        let out = classify_value(&t, &decaying, 1000.0).unwrap();
        assert_eq!(out.verdict, Verdict::Converged);
        assert_eq!(out.decay, DecayClass::PowerLaw);

        let big: Vec<f64> = t.iter().map(|&t| 1.0 + 0.3 * (t / 7.0).sin()).collect();
        assert_eq!(classify_value(&t, &big, 1000.0).unwrap().verdict, Verdict::Diverged);

        let flat: Vec<f64> = vec![1e-3; t.len()];
        assert_eq!(classify_value(&t, &flat, 1000.0).unwrap().verdict, Verdict::Marginal);

        // approaches equilibrium, then moves away again
        let back: Vec<f64> = t.iter().map(|&t| 1e-3 * (1.1 + (t / 100.0).cos())).collect();
        assert_eq!(classify_value(&t, &back, 1000.0).unwrap().verdict, Verdict::Diverged);

        let fast: Vec<f64> = t.iter().map(|&t| 1e-3 * (-t / 50.0).exp()).collect();
        let out = classify_value(&t, &fast, 1000.0).unwrap();
        assert_eq!(out.verdict, Verdict::Converged);
        assert_eq!(out.decay, DecayClass::Exponential);
    }

    #[test]
    fn exact_merge_is_converged() {
        let t = grid(1000.0, 0.5);
        let sigma: Vec<f64> = t.iter().map(|&t| if t < 400.0 { 1e-3 * (-t / 40.0).exp() } else { 0.0 }).collect();
        let out = classify_value(&t, &sigma, 1000.0).unwrap();
        assert_eq!(out.verdict, Verdict::Converged);
        assert!(out.merged && out.n_at_horizon.is_none());
        assert_eq!(out.decay, DecayClass::Exponential);
    }

    #[test]
    fn short_series_is_an_error() {
        let t = grid(500.0, 0.5);
        let sigma = vec![1e-3; t.len()];
        assert!(matches!(classify_value(&t, &sigma, 1000.0), Err(Error::SeriesTooShort(_))));
        let t = grid(1000.0, 100.0);
        let sigma = vec![1e-3; t.len()];
        assert!(matches!(classify_value(&t, &sigma, 1000.0), Err(Error::SeriesTooShort(_))));
    }

    #[test]
    fn per_value_disagreement_is_partial() {
        let t = grid(1000.0, 0.5);
        let series = SpreadSeries {
            per_value: vec![
                t.iter().map(|&t| Some(1e-3 / (1.0 + t))).collect(),
                t.iter().map(|&t| Some(1.0 + 0.2 * (t / 9.0).sin())).collect(),
            ],
            times: t,
        };
        let c = classify_convergence(&series, 1000.0).unwrap();
        let want: BTreeMap<usize, Verdict> = [(0, Verdict::Converged), (1, Verdict::Diverged)].into();
        assert_eq!(c, Classification::PartialPerValue(want));
        assert_eq!(c.label(), "partial[0=converged;1=diverged]");
    }

    #[test]
    fn equilibrium_has_no_qm_deviation() {
        let s = EnsembleState::equilibrium(&[0.3, 0.7], &[0.0, PI / 2.0]).unwrap();
        let m = pauli_to_coupling(&PauliCoefficients::new(0.0, 1.0, 0.0, 1.0));
        let law = EvolutionLaw::new(m.clone(), Kernel::Cosine, Model::A);
        let traj = evolve(&s, &law, &IntegratorControls::fixed(1e-3, 5.0, 100)).unwrap();
        let dev = qm_deviation(&traj, &m).unwrap();
        assert_eq!(dev.len(), traj.len());
        assert!(dev.iter().all(|&d| d < 1e-10), "{:?}", dev.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn energy_and_phenomenology() {
        assert_eq!(effective_energy(2.0, 0.0).unwrap(), 2.0);
        assert_abs_diff_eq!(effective_energy(2.0, 0.01).unwrap(), 2.02, epsilon = 1e-15);
        assert!(effective_energy(2.0, -1.0).is_err());

        let vac = power_spectrum_estimate(1e-3, 10.0, 0.0).unwrap();
        assert_abs_diff_eq!(vac, 1e-6 / (16.0 * PI * PI * 3f64.sqrt()), epsilon = 1e-20);
        let flat = power_spectrum_estimate(0.0, 10.0, 4.0).unwrap();
        assert_abs_diff_eq!(flat, 3f64.sqrt() * 4.0 / (8.0 * PI * PI * 100.0), epsilon = 1e-15);
        // t = 1e4 √var0 gives a spectrum of order 1e-10 .. 1e-9
        let p = power_spectrum_estimate(0.0, 1e4 * 0.5, 0.25).unwrap();
        assert_abs_diff_eq!(p, 2.1936e-10, epsilon = 1e-13);

        assert_eq!(vacuum_energy_estimate(1.0, 1.0).unwrap(), 14.0);
        assert_eq!(vacuum_energy_estimate(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(vacuum_energy_estimate(2.0, 1.0).unwrap(), 3584.0);
        assert!(vacuum_energy_estimate(0.0, 1.0).is_err());
    }
}
