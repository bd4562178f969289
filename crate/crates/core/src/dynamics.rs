//! Ensemble state and the right-hand sides of the two non-equilibrium
//! evolution laws.
//!
//! Model A divides by the plain per-value probability `ρ_a` and places the
//! kernel-weighted densities `ρ̃` under the square roots; model B replaces
//! every `ρ_a` by `ρ̃`. Both coincide for the flat kernel and both reduce to
//! the Schrödinger equation when each observable value carries one phase.
//!
//! The pair sums are evaluated through per-value phasor sums
//! `Z_b = Σ_{j∈b} c_j e^{-iφ_j}`, so that the cross-value work is `O(n·dim)`;
//! only the kernel densities need within-value pair loops.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::circular;
use crate::error::{Error, Result};
use crate::hamiltonian::CouplingMatrix;
use crate::kernel::Kernel;

/// Normalization tolerance for a valid state.
pub const NORM_TOL: f64 = 1e-9;

/// Probability below which an entry stops exchanging probability. Set a
/// little above the norm drift a default-controls RK4 run accumulates over
/// `t = 1000` (a few `1e-14`), so frozen entries are ones the integrator can
/// no longer resolve.
pub const DEFAULT_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub a: usize,
    pub phi: f64,
    pub rho: f64,
}

impl Entry {
    pub fn new(a: usize, phi: f64, rho: f64) -> Self {
        Self { a, phi, rho }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    dim: usize,
    entries: Vec<Entry>,
}

impl EnsembleState {
    pub fn new(dim: usize, entries: Vec<Entry>) -> Result<Self> {
        let s = Self { dim, entries };
        let problems = s.violations();
        if problems.is_empty() {
            Ok(s)
        } else {
            Err(Error::InvalidState(problems.join("; ")))
        }
    }

    /// Builds a state from per-value lists of `(phi, rho)`.
    pub fn from_groups(groups: &[Vec<(f64, f64)>]) -> Result<Self> {
        let entries = groups
            .iter()
            .enumerate()
            .flat_map(|(a, g)| g.iter().map(move |&(phi, rho)| Entry::new(a, phi, rho)))
            .collect();
        Self::new(groups.len(), entries)
    }

    /// One phase per observable value.
    pub fn equilibrium(rho: &[f64], phi: &[f64]) -> Result<Self> {
        let entries = rho
            .iter()
            .zip(phi)
            .enumerate()
            .map(|(a, (&r, &p))| Entry::new(a, p, r))
            .collect();
        Self::new(rho.len(), entries)
    }

    pub(crate) fn from_parts_unchecked(dim: usize, entries: Vec<Entry>) -> Self {
        Self { dim, entries }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.dim == 0 {
            v.push("dim must be positive".into());
        }
        if self.entries.is_empty() {
            v.push("state has no entries".into());
        }
        let mut seen = vec![false; self.dim];
        for (i, e) in self.entries.iter().enumerate() {
            if e.a >= self.dim {
                v.push(format!("entry {i}: observable index {} >= dim {}", e.a, self.dim));
            } else {
                seen[e.a] = true;
            }
            if !e.phi.is_finite() {
                v.push(format!("entry {i}: non-finite phase"));
            }
            if !(e.rho >= 0.0) || !e.rho.is_finite() {
                v.push(format!("entry {i}: probability {} must be finite and >= 0", e.rho));
            }
        }
        for (a, s) in seen.iter().enumerate() {
            if !s {
                v.push(format!("observable value {a} has no entry"));
            }
        }
        let sum = self.total_probability();
        if (sum - 1.0).abs() > NORM_TOL {
            v.push(format!("probabilities sum to {sum}, not 1"));
        }
        v
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.a).collect()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.phi).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.rho).collect()
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.rho).sum()
    }

    /// `ρ_a = Σ_j ρ_j δ_{a a_j}` for every value.
    pub fn value_probabilities(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for e in &self.entries {
            out[e.a] += e.rho;
        }
        out
    }

    /// Entry indices grouped by observable value, in entry order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        group_indices(self.dim, &self.labels())
    }

    /// Copy with phases and probabilities replaced (labels kept).
    pub fn with_coordinates(&self, phi: &[f64], rho: &[f64]) -> Self {
        let entries = self
            .entries
            .iter()
            .zip(phi.iter().zip(rho))
            .map(|(e, (&p, &r))| Entry::new(e.a, p, r))
            .collect();
        Self { dim: self.dim, entries }
    }

    /// `φ → −φ` on every entry.
    pub fn phase_conjugated(&self) -> Self {
        let entries = self.entries.iter().map(|e| Entry::new(e.a, -e.phi, e.rho)).collect();
        Self { dim: self.dim, entries }
    }
}

pub(crate) fn group_indices(dim: usize, labels: &[usize]) -> Vec<Vec<usize>> {
    let mut g = vec![Vec::new(); dim];
    for (i, &a) in labels.iter().enumerate() {
        g[a].push(i);
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derivatives {
    pub dphi: Vec<f64>,
    pub drho: Vec<f64>,
}

impl Derivatives {
    pub fn total_drho(&self) -> f64 {
        self.drho.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[default]
    A,
    B,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::A => write!(f, "a"),
            Model::B => write!(f, "b"),
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Model::A),
            "b" => Ok(Model::B),
            other => Err(Error::Config(vec![format!("unknown model `{other}` (expected a or b)")])),
        }
    }
}

/// `ρ̃_i = Σ_j ρ_j δ_{a_i a_j} F(φ_i − φ_j)`.
pub fn rho_tilde(s: &EnsembleState, k: &Kernel, i: usize) -> f64 {
    let ei = s.entries[i];
    s.entries
        .iter()
        .filter(|e| e.a == ei.a)
        .map(|e| e.rho * k.eval(ei.phi - e.phi))
        .sum()
}

/// Scratch buffers reused across right-hand-side evaluations.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    groups: Vec<Vec<usize>>,
    labels: Vec<usize>,
    rho_value: Vec<f64>,
    rho_tilde: Vec<f64>,
    cis: Vec<Complex64>,
    coeff: Vec<f64>,
    z_all: Vec<Complex64>,
    z_active: Vec<Complex64>,
    y_all: Vec<Complex64>,
    y_active: Vec<Complex64>,
    active: Vec<bool>,
    dead: Vec<bool>,
}

impl Workspace {
    pub fn new(dim: usize, labels: &[usize]) -> Self {
        let n = labels.len();
        Self {
            groups: group_indices(dim, labels),
            labels: labels.to_vec(),
            rho_value: vec![0.0; dim],
            rho_tilde: vec![0.0; n],
            cis: vec![Complex64::new(0.0, 0.0); n],
            coeff: vec![0.0; n],
            z_all: vec![Complex64::new(0.0, 0.0); dim],
            z_active: vec![Complex64::new(0.0, 0.0); dim],
            y_all: vec![Complex64::new(0.0, 0.0); dim],
            y_active: vec![Complex64::new(0.0, 0.0); dim],
            active: vec![true; n],
            dead: vec![false; n],
        }
    }

    fn matches(&self, labels: &[usize]) -> bool {
        self.labels == labels
    }
}

/// A complete evolution law: coupling, kernel, model and probability floor.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionLaw {
    coupling: CouplingMatrix,
    kernel: Kernel,
    model: Model,
    floor: f64,
    // H[a][b] with exactly real diagonal
    h: Vec<Complex64>,
}

impl EvolutionLaw {
    pub fn new(coupling: CouplingMatrix, kernel: Kernel, model: Model) -> Self {
        let dim = coupling.dim();
        let mut h = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                let r = coupling.r(a, b);
                if a == b {
                    h.push(Complex64::new(r * coupling.beta(a, a).cos().round(), 0.0));
                } else {
                    let beta = coupling.beta(a, b);
                    h.push(Complex64::new(r * beta.cos(), r * beta.sin()));
                }
            }
        }
        Self { coupling, kernel, model, floor: DEFAULT_FLOOR, h }
    }

    /// Entries with `0 < ρ < floor` keep their phase dynamics but stop
    /// exchanging probability. Entries under the floor whose kernel density
    /// has vanished are extinct and frozen outright.
    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor.max(0.0);
        self
    }

    pub fn coupling(&self) -> &CouplingMatrix {
        &self.coupling
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn workspace(&self, labels: &[usize]) -> Workspace {
        Workspace::new(self.coupling.dim(), labels)
    }

    /// Derivatives of a state.
    pub fn derivatives(&self, s: &EnsembleState) -> Result<Derivatives> {
        if s.dim() != self.coupling.dim() {
            return Err(Error::InvalidState(format!(
                "state dim {} does not match coupling dim {}",
                s.dim(),
                self.coupling.dim()
            )));
        }
        let labels = s.labels();
        let mut ws = self.workspace(&labels);
        let n = s.len();
        let mut d = Derivatives { dphi: vec![0.0; n], drho: vec![0.0; n] };
        self.eval_into(&labels, &s.phases(), &s.probabilities(), &mut ws, &mut d.dphi, &mut d.drho)?;
        Ok(d)
    }

    /// Evaluates the right-hand side on flat coordinate slices.
    pub fn eval_into(
        &self,
        labels: &[usize],
        phi: &[f64],
        rho: &[f64],
        ws: &mut Workspace,
        dphi: &mut [f64],
        drho: &mut [f64],
    ) -> Result<()> {
        if !ws.matches(labels) {
            *ws = self.workspace(labels);
        }
        let dim = self.coupling.dim();
        let n = labels.len();
        let zero = Complex64::new(0.0, 0.0);

        ws.rho_value.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            ws.rho_value[labels[i]] += rho[i];
            ws.active[i] = !(rho[i] > 0.0 && rho[i] < self.floor);
        }

        // kernel-weighted densities, one pass per unordered pair within a value
        for g in &ws.groups {
            for &i in g {
                ws.rho_tilde[i] = rho[i];
            }
            for (p, &i) in g.iter().enumerate() {
                for &j in &g[p + 1..] {
                    let f = self.kernel.eval(phi[i] - phi[j]);
                    ws.rho_tilde[i] += rho[j] * f;
                    ws.rho_tilde[j] += rho[i] * f;
                }
            }
        }

        // an entry under the floor whose density has run out is extinct and stays put
        for i in 0..n {
            let a = labels[i];
            ws.dead[i] = ws.rho_value[a] > 0.0 && !(ws.rho_tilde[i] > 0.0);
            if ws.dead[i] && !(rho[i] < self.floor) {
                return Err(Error::SingularConfiguration { value: a });
            }
        }

        for i in 0..n {
            let a = labels[i];
            let (s, c) = phi[i].sin_cos();
            ws.cis[i] = Complex64::new(c, s);
            ws.coeff[i] = if ws.rho_value[a] > 0.0 && !ws.dead[i] {
                match self.model {
                    Model::A => rho[i] / ws.rho_value[a] * ws.rho_tilde[i].sqrt(),
                    Model::B => rho[i] / ws.rho_tilde[i].sqrt(),
                }
            } else {
                0.0
            };
        }

        ws.z_all.iter_mut().for_each(|z| *z = zero);
        ws.z_active.iter_mut().for_each(|z| *z = zero);
        for j in 0..n {
            let term = ws.cis[j].conj() * ws.coeff[j];
            ws.z_all[labels[j]] += term;
            if ws.active[j] {
                ws.z_active[labels[j]] += term;
            }
        }
        for a in 0..dim {
            let (mut ya, mut yb) = (zero, zero);
            for b in 0..dim {
                let h = self.h[a * dim + b];
                ya += h * ws.z_all[b];
                yb += h * ws.z_active[b];
            }
            ws.y_all[a] = ya;
            ws.y_active[a] = yb;
        }

        for i in 0..n {
            let a = labels[i];
            if ws.rho_value[a] == 0.0 || ws.dead[i] {
                dphi[i] = 0.0;
                drho[i] = 0.0;
                continue;
            }
            let rt_sqrt = ws.rho_tilde[i].sqrt();
            let w = ws.cis[i] * ws.y_all[a];
            dphi[i] = w.re / rt_sqrt;
            drho[i] = if ws.active[i] {
                let flow = (ws.cis[i] * ws.y_active[a]).im;
                match self.model {
                    Model::A => 2.0 * rho[i] / ws.rho_value[a] * rt_sqrt * flow,
                    Model::B => 2.0 * rho[i] / rt_sqrt * flow,
                }
            } else {
                0.0
            };
        }
        Ok(())
    }

    /// Splits the probability law into pairwise flows: row-major `J[i][j]`,
    /// the part of `ρ̇_i` exchanged with entry `j`. The matrix is
    /// antisymmetric and its row sums are the `drho` of [`Self::eval_into`].
    pub fn pair_flows(&self, labels: &[usize], phi: &[f64], rho: &[f64]) -> Result<Vec<f64>> {
        let n = labels.len();
        let dim = self.coupling.dim();
        let mut rho_value = vec![0.0; dim];
        for i in 0..n {
            rho_value[labels[i]] += rho[i];
        }
        let mut weight = vec![0.0; n];
        for i in 0..n {
            let a = labels[i];
            if rho_value[a] == 0.0 || (rho[i] > 0.0 && rho[i] < self.floor) {
                continue;
            }
            let rt: f64 = (0..n)
                .filter(|&j| labels[j] == a)
                .map(|j| rho[j] * self.kernel.eval(phi[i] - phi[j]))
                .sum();
            if !(rt > 0.0) {
                if rho[i] < self.floor {
                    continue;
                }
                return Err(Error::SingularConfiguration { value: a });
            }
            weight[i] = match self.model {
                Model::A => rho[i] / rho_value[a] * rt.sqrt(),
                Model::B => rho[i] / rt.sqrt(),
            };
        }
        let mut j_mat = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j || weight[i] == 0.0 || weight[j] == 0.0 {
                    continue;
                }
                let h = self.h[labels[i] * dim + labels[j]];
                let (s, c) = (phi[i] - phi[j]).sin_cos();
                j_mat[i * n + j] = 2.0 * weight[i] * weight[j] * (Complex64::new(c, s) * h).im;
            }
        }
        Ok(j_mat)
    }
}

pub fn rhs_model_a(s: &EnsembleState, m: &CouplingMatrix, k: &Kernel) -> Result<Derivatives> {
    EvolutionLaw::new(m.clone(), k.clone(), Model::A).derivatives(s)
}

pub fn rhs_model_b(s: &EnsembleState, m: &CouplingMatrix, k: &Kernel) -> Result<Derivatives> {
    EvolutionLaw::new(m.clone(), k.clone(), Model::B).derivatives(s)
}

/// One entry per observable value carrying the value's total probability
/// and its probability-weighted circular mean phase.
pub fn collapse_to_equilibrium(s: &EnsembleState) -> EnsembleState {
    let entries = s
        .groups()
        .iter()
        .enumerate()
        .map(|(a, g)| {
            let phases: Vec<f64> = g.iter().map(|&i| s.entries[i].phi).collect();
            let weights: Vec<f64> = g.iter().map(|&i| s.entries[i].rho).collect();
            let rho: f64 = weights.iter().sum();
            let phi = circular::weighted_mean(&phases, &weights).unwrap_or_else(|| {
                // unoccupied value: keep an unweighted mean as a placeholder phase
                phases.iter().sum::<f64>() / phases.len() as f64
            });
            Entry::new(a, phi, rho)
        })
        .collect();
    EnsembleState::from_parts_unchecked(s.dim, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{pauli_to_coupling, PauliCoefficients};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sigma_z2() -> CouplingMatrix {
        pauli_to_coupling(&PauliCoefficients::new(0.0, 0.0, 0.0, 2.0))
    }

    fn two_same_value() -> EnsembleState {
        EnsembleState::from_groups(&[vec![(0.0, 0.2), (PI, 0.3)], vec![(0.0, 0.5)]]).unwrap()
    }

    #[test]
    fn rho_tilde_examples() {
        let eq = EnsembleState::equilibrium(&[0.3, 0.7], &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(rho_tilde(&eq, &Kernel::Spiked(100.0), 1), 0.7);
        let s = two_same_value();
        assert_abs_diff_eq!(rho_tilde(&s, &Kernel::Cosine, 0), 0.2, epsilon = 1e-16);
        assert_abs_diff_eq!(rho_tilde(&s, &Kernel::Flat, 0), 0.5);
        assert_abs_diff_eq!(rho_tilde(&s, &Kernel::Flat, 1), 0.5);
    }

    #[test]
    fn equilibrium_diagonal_rhs() {
        let s = EnsembleState::equilibrium(&[0.3, 0.7], &[0.0, PI / 2.0]).unwrap();
        for rhs in [rhs_model_a, rhs_model_b] {
            let d = rhs(&s, &sigma_z2(), &Kernel::Spiked(100.0)).unwrap();
            assert_abs_diff_eq!(d.dphi[0], 2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(d.dphi[1], -2.0, epsilon = 1e-15);
            assert_eq!(d.drho, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn workspace_matches_direct_rho_tilde() {
        let s = EnsembleState::from_groups(&[
            vec![(0.0, 0.16), (0.01, 0.08), (0.03, 0.06)],
            vec![(1.6, 0.23), (1.57, 0.3), (1.59, 0.17)],
        ])
        .unwrap();
        let law = EvolutionLaw::new(sigma_z2(), Kernel::Spiked(25.0), Model::A);
        let mut ws = law.workspace(&s.labels());
        let mut dphi = vec![0.0; 6];
        let mut drho = vec![0.0; 6];
        law.eval_into(&s.labels(), &s.phases(), &s.probabilities(), &mut ws, &mut dphi, &mut drho)
            .unwrap();
        for i in 0..6 {
            assert_abs_diff_eq!(ws.rho_tilde[i], rho_tilde(&s, &Kernel::Spiked(25.0), i), epsilon = 1e-16);
        }
    }

    #[test]
    fn unoccupied_value_is_inert() {
        let s = EnsembleState::from_groups(&[
            vec![(0.0, 0.4), (0.3, 0.6)],
            vec![(1.0, 0.0), (2.0, 0.0)],
        ])
        .unwrap();
        let m = pauli_to_coupling(&PauliCoefficients::new(0.0, 1.0, 0.5, 1.0));
        for model in [Model::A, Model::B] {
            let d = EvolutionLaw::new(m.clone(), Kernel::Cosine, model).derivatives(&s).unwrap();
            assert_eq!(&d.drho[2..], &[0.0, 0.0]);
            assert_eq!(&d.dphi[2..], &[0.0, 0.0]);
        }
    }

    #[test]
    fn singular_configuration_reported() {
        // occupied value whose only weight sits outside the kernel support of an empty entry
        let s = EnsembleState::from_groups(&[vec![(0.0, 1.0), (1.0, 0.0)], vec![(0.0, 0.0)]]).unwrap();
        let law = EvolutionLaw::new(sigma_z2(), Kernel::Spiked(100.0), Model::A).with_floor(0.0);
        assert_eq!(law.derivatives(&s).unwrap_err(), Error::SingularConfiguration { value: 0 });
    }

    #[test]
    fn extinct_entry_outside_support_is_frozen() {
        let s = EnsembleState::from_groups(&[vec![(0.0, 1.0), (1.0, 0.0)], vec![(0.0, 0.0)]]).unwrap();
        for model in [Model::A, Model::B] {
            let d = EvolutionLaw::new(sigma_z2(), Kernel::Spiked(100.0), model).derivatives(&s).unwrap();
            assert_eq!((d.dphi[1], d.drho[1]), (0.0, 0.0));
            assert!((d.dphi[0] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn floor_freezes_probability_exchange() {
        let s = EnsembleState::from_groups(&[
            vec![(0.0, 0.5 - 1e-16), (0.2, 1e-16)],
            vec![(1.0, 0.5)],
        ])
        .unwrap();
        let m = pauli_to_coupling(&PauliCoefficients::new(0.0, 1.0, 0.0, 1.0));
        let d = EvolutionLaw::new(m, Kernel::Cosine, Model::A).derivatives(&s).unwrap();
        assert_eq!(d.drho[1], 0.0);
        assert!(d.dphi[1] != 0.0);
        assert!(d.total_drho().abs() < 1e-15);
    }

    #[test]
    fn pair_flows_are_antisymmetric_and_sum_to_drho() {
        let s = EnsembleState::from_groups(&[
            vec![(0.0, 0.16), (0.3, 0.08), (0.7, 0.06)],
            vec![(1.9, 0.23), (1.6, 0.3), (1.75, 0.17)],
        ])
        .unwrap();
        let m = pauli_to_coupling(&PauliCoefficients::new(0.3, 1.0, -0.4, 1.0));
        for model in [Model::A, Model::B] {
            for k in [Kernel::Flat, Kernel::Cosine, Kernel::Spiked(5.0)] {
                let law = EvolutionLaw::new(m.clone(), k, model);
                let j = law.pair_flows(&s.labels(), &s.phases(), &s.probabilities()).unwrap();
                let d = law.derivatives(&s).unwrap();
                let n = s.len();
                for a in 0..n {
                    assert_abs_diff_eq!(j[a * n..(a + 1) * n].iter().sum::<f64>(), d.drho[a], epsilon = 1e-14);
                    for b in 0..n {
                        assert_abs_diff_eq!(j[a * n + b], -j[b * n + a], epsilon = 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn collapse_examples() {
        let eq = EnsembleState::equilibrium(&[0.3, 0.7], &[0.2, -1.0]).unwrap();
        let c = collapse_to_equilibrium(&eq);
        for (x, y) in c.entries().iter().zip(eq.entries()) {
            assert_eq!(x.a, y.a);
            assert_abs_diff_eq!(x.phi, y.phi, epsilon = 1e-15);
            assert_abs_diff_eq!(x.rho, y.rho);
        }

        let s = EnsembleState::new(
            2,
            vec![Entry::new(0, 0.0, 0.25), Entry::new(0, 0.2, 0.25), Entry::new(1, 1.0, 0.5)],
        )
        .unwrap();
        let c = collapse_to_equilibrium(&s);
        assert_eq!(c.len(), 2);
        assert_abs_diff_eq!(c.entries()[0].phi, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(c.entries()[0].rho, 0.5);
        assert_abs_diff_eq!(c.entries()[1].phi, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn state_validation() {
        assert!(EnsembleState::from_groups(&[vec![(0.0, 0.5)], vec![(0.0, 0.6)]]).is_err());
        assert!(EnsembleState::from_groups(&[vec![(0.0, 1.1)], vec![(0.0, -0.1)]]).is_err());
        assert!(EnsembleState::new(2, vec![Entry::new(0, 0.0, 1.0)]).is_err());
        assert!(EnsembleState::new(2, vec![Entry::new(0, 0.0, 0.5), Entry::new(2, 0.0, 0.5)]).is_err());
    }
}
