//! Near-equilibrium theory of a single observable value with a diagonal
//! Hamiltonian, used as an independent check on full simulations.
//!
//! Time is measured in units of the inverse diagonal coupling. For tightly
//! clustered phases the kernel enters only through its curvature
//! `λ = −½F''(0) − 1`. With `λ > 0` the rescaled offsets `x = λ t (φ − ⟨φ⟩)`
//! relax, in log time `τ = ln t`, to a steady density between the two fixed
//! points of `x' = x + x²/2 − (σ² − 1)/2`; with `−1 < λ < 0` the only steady
//! solution has zero variance and the approach to it is exponential.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::diagnostics::DecayClass;
use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Weight normalization tolerance for a reduced state.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Nodes used by the endpoint-weighted quadrature.
pub const QUADRATURE_NODES: usize = 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub phis: Vec<f64>,
    pub weights: Vec<f64>,
    pub lambda: f64,
}

impl ReducedState {
    pub fn new(phis: Vec<f64>, weights: Vec<f64>, lambda: f64) -> Result<Self> {
        if phis.len() != weights.len() || phis.is_empty() {
            return Err(Error::InvalidState("phases and weights must be non-empty and of equal length".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidState("weights must be non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { phis, weights, lambda })
    }

    /// `⟨φ⟩ = Σ wᵢ φᵢ`.
    pub fn mean_phase(&self) -> f64 {
        self.phis.iter().zip(&self.weights).map(|(p, w)| p * w).sum()
    }

    /// `⟨Δφ^m⟩` about the weighted mean.
    pub fn central_moment(&self, m: i32) -> f64 {
        let mean = self.mean_phase();
        self.phis.iter().zip(&self.weights).map(|(p, w)| w * (p - mean).powi(m)).sum()
    }
}

/// Exact reduced right-hand side for one value with unit diagonal coupling.
pub fn reduced_rhs_exact(s: &ReducedState, k: &Kernel) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = s.phis.len();
    let dens: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| s.weights[j] * k.eval(s.phis[i] - s.phis[j])).sum())
        .collect();
    if let Some(i) = dens.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Singular(format!("kernel density vanishes at phase {i}")));
    }
    let mut dphi = vec![0.0; n];
    let mut dw = vec![0.0; n];
    for i in 0..n {
        let (mut c, mut sn) = (0.0, 0.0);
        for j in 0..n {
            let d = s.phis[i] - s.phis[j];
            c += s.weights[j] * d.cos() * (dens[j] / dens[i]).sqrt();
            sn += s.weights[j] * d.sin() * (dens[j] * dens[i]).sqrt();
        }
        dphi[i] = c;
        dw[i] = 2.0 * s.weights[i] * sn;
    }
    Ok((dphi, dw))
}

/// Leading-order rates for a tight cluster. The phase rates are given up to a
/// common drift, `(λ/2)(φᵢ − ⟨φ⟩)²`, so only their differences are meaningful.
pub fn reduced_rhs_taylor(s: &ReducedState) -> (Vec<f64>, Vec<f64>) {
    let mean = s.mean_phase();
    let dphi = s.phis.iter().map(|p| 0.5 * s.lambda * (p - mean).powi(2)).collect();
    let dw = s.phis.iter().zip(&s.weights).map(|(p, w)| 2.0 * w * (p - mean)).collect();
    (dphi, dw)
}

/// `(−1 + σ, −1 − σ)`: the first is unstable, the second stable.
pub fn fixed_points(sigma: f64) -> (f64, f64) {
    (-1.0 + sigma, -1.0 - sigma)
}

/// Velocity of the rescaled offset in log time.
pub fn rescaled_velocity(x: f64, sigma: f64) -> f64 {
    x + 0.5 * x * x - 0.5 * (sigma * sigma - 1.0)
}

/// Growth rate of a member's weight in log time, `w'/w = 2x/λ`.
pub fn rescaled_weight_rate(x: f64, lambda: f64) -> f64 {
    2.0 * x / lambda
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateParams {
    pub lambda: f64,
    pub sigma: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub phi_plus: f64,
    pub phi_minus: f64,
}

impl SteadyStateParams {
    pub fn new(lambda: f64, sigma: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::NoSteadyState { lambda });
        }
        if !(sigma > 1.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("steady state needs sigma > 1, got {sigma}")));
        }
        let (phi_plus, phi_minus) = fixed_points(sigma);
        Ok(Self {
            lambda,
            sigma,
            alpha_plus: -1.0 + 2.0 / lambda - 2.0 / (lambda * sigma),
            alpha_minus: -1.0 + 2.0 / lambda + 2.0 / (lambda * sigma),
            phi_plus,
            phi_minus,
        })
    }

    fn width(&self) -> f64 {
        self.phi_plus - self.phi_minus
    }
}

/// Unnormalized steady density `(x₊ − x)^{α₊} (x − x₋)^{α₋}` on the open
/// interval between the fixed points.
pub fn steady_state_density(p: &SteadyStateParams, x: f64) -> Result<f64> {
    if !(p.lambda > 0.0) {
        return Err(Error::NoSteadyState { lambda: p.lambda });
    }
    if !(x > p.phi_minus && x < p.phi_plus) {
        return Err(Error::Domain(format!("x = {x} outside ({}, {})", p.phi_minus, p.phi_plus)));
    }
    Ok((p.phi_plus - x).powf(p.alpha_plus) * (x - p.phi_minus).powf(p.alpha_minus))
}

/// Gauss–Jacobi rule for `∫_{−1}^{1} (1−u)^a (1+u)^b g(u) du`, built with the
/// Golub–Welsch eigenvalue method.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || !(a > -1.0 && b > -1.0) {
        return Err(Error::Domain(format!("Gauss-Jacobi needs n >= 1 and exponents > -1, got {n}, {a}, {b}")));
    }
    let ab = a + b;
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        j[(k, k)] = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k + 1 < n {
            let m = kf + 1.0;
            let beta = if k == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                let s = 2.0 * m + ab;
                4.0 * m * (m + a) * (m + b) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            j[(k, k + 1)] = beta.sqrt();
            j[(k + 1, k)] = beta.sqrt();
        }
    }
    let mu0 = ((ab + 1.0) * 2f64.ln() + libm::lgamma(a + 1.0) + libm::lgamma(b + 1.0) - libm::lgamma(ab + 2.0)).exp();
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|k| (eig.eigenvalues[k], mu0 * eig.eigenvectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(pairs.into_iter().unzip())
}

/// `∫ g(x) w(x) dx` over the steady-state interval, with the endpoint
/// singularities absorbed into the quadrature weight.
pub fn steady_state_integral(p: &SteadyStateParams, g: impl Fn(f64) -> f64) -> Result<f64> {
    let (u, w) = gauss_jacobi(QUADRATURE_NODES, p.alpha_plus, p.alpha_minus)?;
    let half = 0.5 * p.width();
    let scale = half.powf(1.0 + p.alpha_plus + p.alpha_minus);
    Ok(scale * u.iter().zip(&w).map(|(&u, &w)| w * g(p.phi_minus + half * (1.0 + u))).sum::<f64>())
}

/// Normalization constant of [`steady_state_density`].
pub fn steady_state_normalization(p: &SteadyStateParams) -> Result<f64> {
    steady_state_integral(p, |_| 1.0)
}

/// `⟨x^m⟩` under the normalized steady density.
pub fn steady_state_moment(p: &SteadyStateParams, m: i32) -> Result<f64> {
    Ok(steady_state_integral(p, |x| x.powi(m))? / steady_state_normalization(p)?)
}

/// `⟨x²⟩ = (σ² − 1)/(1 + 4/λ)`.
pub fn variance_prediction(lambda: f64, sigma: f64) -> Result<f64> {
    if lambda == -4.0 {
        return Err(Error::Singular("variance prediction is singular at lambda = -4".into()));
    }
    Ok((sigma * sigma - 1.0) / (1.0 + 4.0 / lambda))
}

/// Inverts [`variance_prediction`] for `σ`, given the phase variance at a
/// time `t` (in units of the inverse diagonal coupling).
pub fn fit_sigma(lambda: f64, t: f64, var_dphi: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::NoSteadyState { lambda });
    }
    if !(t > 0.0 && var_dphi >= 0.0) {
        return Err(Error::Domain(format!("need t > 0 and variance >= 0, got {t}, {var_dphi}")));
    }
    let rescaled = lambda * lambda * t * t * var_dphi;
    Ok((1.0 + rescaled * (1.0 + 4.0 / lambda)).sqrt())
}

fn check_negative_branch(lambda: f64) -> Result<()> {
    if lambda > -1.0 && lambda < 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("static solution needs -1 < lambda < 0, got {lambda}")))
    }
}

/// Exponent of the static density `w(Δφ) ∝ |Δφ|^{4/λ − 2}`.
pub fn static_density_exponent(lambda: f64) -> Result<f64> {
    check_negative_branch(lambda)?;
    Ok(4.0 / lambda - 2.0)
}

/// Variance of the static density cut off below `|Δφ| = dphi_min`.
pub fn cutoff_variance(lambda: f64, dphi_min: f64) -> Result<f64> {
    check_negative_branch(lambda)?;
    Ok((lambda - 4.0) / (-lambda - 4.0) * dphi_min * dphi_min)
}

/// `d⟨Δφ^m⟩/dt = (2 + mλ/2)⟨Δφ^{m+1}⟩ − (m(λ+4)/2)⟨Δφ²⟩⟨Δφ^{m−1}⟩`.
/// The zeroth moment defaults to 1.
pub fn moment_hierarchy_rhs(moments: &BTreeMap<i32, f64>, lambda: f64, m: i32) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain(format!("moment order must be positive, got {m}")));
    }
    let get = |k: i32| match moments.get(&k) {
        Some(&v) => Ok(v),
        None if k == 0 => Ok(1.0),
        None => Err(Error::MissingMoment(k)),
    };
    let mf = m as f64;
    Ok((2.0 + 0.5 * mf * lambda) * get(m + 1)? - 0.5 * mf * (lambda + 4.0) * get(2)? * get(m - 1)?)
}

/// Fifth central moment from lower ones with vanishing higher cumulants.
pub fn gaussian_closure_fifth(m2: f64, m3: f64) -> f64 {
    10.0 * m2 * m3
}

/// `d⟨φ⟩/dt = 1 + ⟨Δφ²⟩`.
pub fn mean_phase_drift(var_dphi: f64) -> Result<f64> {
    if !(var_dphi >= 0.0) {
        return Err(Error::Domain(format!("phase variance must be non-negative, got {var_dphi}")));
    }
    Ok(1.0 + var_dphi)
}

/// Expected decay of the phase spread for a kernel curvature.
pub fn predicted_decay_class(lambda: f64) -> DecayClass {
    if lambda > 0.0 {
        DecayClass::PowerLaw
    } else if lambda > -1.0 && lambda < 0.0 {
        DecayClass::Exponential
    } else {
        DecayClass::None
    }
}

/// Draws from the normalized steady density. The density is a scaled beta
/// distribution on `(x₋, x₊)`.
pub fn sample_steady_state<R: Rng + ?Sized>(p: &SteadyStateParams, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let beta = Beta::new(p.alpha_minus + 1.0, p.alpha_plus + 1.0)
        .map_err(|e| Error::Domain(format!("beta sampler: {e}")))?;
    Ok((0..n).map(|_| p.phi_minus + p.width() * beta.sample(rng)).collect())
}

/// Two-sample Kolmogorov–Smirnov distance between weighted samples.
pub fn weighted_ks_distance(a: &[f64], wa: &[f64], b: &[f64], wb: &[f64]) -> f64 {
    let mut pa: Vec<(f64, f64)> = a.iter().copied().zip(wa.iter().copied()).collect();
    let mut pb: Vec<(f64, f64)> = b.iter().copied().zip(wb.iter().copied()).collect();
    pa.sort_by(|x, y| x.0.total_cmp(&y.0));
    pb.sort_by(|x, y| x.0.total_cmp(&y.0));
    let ta: f64 = wa.iter().sum();
    let tb: f64 = wb.iter().sum();
    let (mut i, mut j) = (0, 0);
    let (mut ca, mut cb) = (0.0, 0.0);
    let mut d: f64 = 0.0;
    while i < pa.len() || j < pb.len() {
        let x = match (pa.get(i), pb.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => break,
        };
        while i < pa.len() && pa[i].0 <= x {
            ca += pa[i].1;
            i += 1;
        }
        while j < pb.len() && pb[j].0 <= x {
            cb += pb[j].1;
            j += 1;
        }
        d = d.max((ca / ta - cb / tb).abs());
    }
    d
}

/// Moves samples one Euler step `dtau` along the rescaled flow, reweighting
/// each by its growth rate, and returns the KS distance between the
/// transported and the original samples.
pub fn stationarity_ks(p: &SteadyStateParams, samples: &[f64], dtau: f64) -> f64 {
    let moved: Vec<f64> = samples.iter().map(|&x| x + dtau * rescaled_velocity(x, p.sigma)).collect();
    let weights: Vec<f64> = samples.iter().map(|&x| 1.0 + dtau * rescaled_weight_rate(x, p.lambda)).collect();
    let ones = vec![1.0; samples.len()];
    weighted_ks_distance(&moved, &weights, samples, &ones)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub lambda: f64,
    pub sigma_fit: Option<f64>,
    pub alpha_plus: Option<f64>,
    pub alpha_minus: Option<f64>,
    pub predicted_variance: Option<f64>,
    pub predicted_decay_class: DecayClass,
}

impl OracleReport {
    pub fn new(lambda: f64, sigma_fit: Option<f64>) -> Self {
        let params = sigma_fit.and_then(|s| SteadyStateParams::new(lambda, s).ok());
        Self {
            lambda,
            sigma_fit,
            alpha_plus: params.map(|p| p.alpha_plus),
            alpha_minus: params.map(|p| p.alpha_minus),
            predicted_variance: params.and_then(|p| variance_prediction(p.lambda, p.sigma).ok()),
            predicted_decay_class: predicted_decay_class(lambda),
        }
    }
}
