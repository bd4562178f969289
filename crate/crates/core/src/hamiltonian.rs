//! Two-level Hamiltonians in Pauli form, their magnitude/phase coupling
//! representation, and exact unitary reference evolution.
//!
//! The coupling representation writes `H = Σ R[a][b] e^{iβ[a][b]} |a⟩⟨b|`
//! with `R` symmetric and non-negative and `β` antisymmetric, and the
//! ensemble wavefunction is `|Ψ⟩ = Σ √ρ_a e^{-iφ_a} |a⟩` (ħ = 1).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::wrap_phase;

const SYMMETRY_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-9;

/// `H = c_t I + c_x σ_x + c_y σ_y + c_z σ_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliCoefficients {
    pub ct: f64,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
}

impl PauliCoefficients {
    pub fn new(ct: f64, cx: f64, cy: f64, cz: f64) -> Self {
        Self { ct, cx, cy, cz }
    }

    pub fn is_finite(&self) -> bool {
        self.ct.is_finite() && self.cx.is_finite() && self.cy.is_finite() && self.cz.is_finite()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::new(alpha * self.ct, alpha * self.cx, alpha * self.cy, alpha * self.cz)
    }
}

/// Magnitudes `R` and phases `β` of the Hamiltonian in the realized basis,
/// stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    dim: usize,
    r: Vec<f64>,
    beta: Vec<f64>,
}

impl CouplingMatrix {
    /// Builds a coupling matrix from row-major `r` and `beta`, checking
    /// symmetry of `r`, antisymmetry of `beta` (mod 2π) and that the
    /// diagonal is real.
    pub fn new(dim: usize, r: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let mut problems = Vec::new();
        if dim == 0 {
            problems.push("dim must be positive".to_string());
        }
        if r.len() != dim * dim || beta.len() != dim * dim {
            problems.push(format!(
                "expected {} entries in R and beta, got {} and {}",
                dim * dim,
                r.len(),
                beta.len()
            ));
            return Err(Error::InvalidCoupling(problems.join("; ")));
        }
        for a in 0..dim {
            for b in 0..dim {
                let rab = r[a * dim + b];
                let bab = beta[a * dim + b];
                if !rab.is_finite() || !bab.is_finite() {
                    problems.push(format!("non-finite entry at ({a},{b})"));
                    continue;
                }
                if rab < 0.0 {
                    problems.push(format!("R[{a}][{b}] = {rab} is negative"));
                }
                if (rab - r[b * dim + a]).abs() > SYMMETRY_TOL * rab.abs().max(1.0) {
                    problems.push(format!("R not symmetric at ({a},{b})"));
                }
                if a != b {
                    let sum = wrap_phase(bab + beta[b * dim + a]);
                    if sum.abs() > SYMMETRY_TOL {
                        problems.push(format!("beta not antisymmetric at ({a},{b})"));
                    }
                } else if rab > 0.0 && (rab * bab.sin()).abs() > SYMMETRY_TOL * rab.max(1.0) {
                    problems.push(format!("diagonal beta[{a}][{a}] = {bab} makes H non-Hermitian"));
                }
            }
        }
        if problems.is_empty() {
            let beta = beta.into_iter().map(wrap_phase).collect();
            Ok(Self { dim, r, beta })
        } else {
            Err(Error::InvalidCoupling(problems.join("; ")))
        }
    }

    /// Diagonal Hamiltonian with the given real eigenvalues.
    pub fn diagonal(energies: &[f64]) -> Result<Self> {
        let dim = energies.len();
        let mut r = vec![0.0; dim * dim];
        let mut beta = vec![0.0; dim * dim];
        for (a, &e) in energies.iter().enumerate() {
            r[a * dim + a] = e.abs();
            beta[a * dim + a] = if e < 0.0 { PI } else { 0.0 };
        }
        Self::new(dim, r, beta)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn r(&self, a: usize, b: usize) -> f64 {
        self.r[a * self.dim + b]
    }

    #[inline]
    pub fn beta(&self, a: usize, b: usize) -> f64 {
        self.beta[a * self.dim + b]
    }

    pub fn r_rows(&self) -> Vec<Vec<f64>> {
        self.r.chunks(self.dim).map(|c| c.to_vec()).collect()
    }

    pub fn beta_rows(&self) -> Vec<Vec<f64>> {
        self.beta.chunks(self.dim).map(|c| c.to_vec()).collect()
    }

    /// All off-diagonal magnitudes vanish.
    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|a| (0..self.dim).all(|b| a == b || self.r(a, b) == 0.0))
    }

    /// Multiplies every magnitude by `alpha > 0`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            dim: self.dim,
            r: self.r.iter().map(|x| x * alpha).collect(),
            beta: self.beta.clone(),
        }
    }

    /// `β → -β`, the time-reversal image of the coupling.
    pub fn time_reversed(&self) -> Self {
        Self {
            dim: self.dim,
            r: self.r.clone(),
            beta: self.beta.iter().map(|&b| wrap_phase(-b)).collect(),
        }
    }

    /// Largest row sum of magnitudes, a bound on the fastest phase rate.
    pub fn max_row_sum(&self) -> f64 {
        self.r
            .chunks(self.dim)
            .map(|row| row.iter().sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Argument of a real or complex number, with `arg(0) = 0`.
fn arg_or_zero(re: f64, im: f64) -> f64 {
    if re == 0.0 && im == 0.0 {
        0.0
    } else {
        wrap_phase(im.atan2(re)) + 0.0
    }
}

/// Spin-½ coupling data from Pauli coefficients. Index 0 is spin up.
pub fn pauli_to_coupling(c: &PauliCoefficients) -> CouplingMatrix {
    let r12 = c.cx.hypot(c.cy);
    let up = c.ct + c.cz;
    let down = c.ct - c.cz;
    let b12 = arg_or_zero(c.cx, -c.cy);
    let b21 = if b12 == 0.0 { 0.0 } else { wrap_phase(-b12) };
    CouplingMatrix {
        dim: 2,
        r: vec![up.abs(), r12, r12, down.abs()],
        beta: vec![arg_or_zero(up, 0.0), b12, b21, arg_or_zero(down, 0.0)],
    }
}

/// `H[a][b] = R[a][b] e^{iβ[a][b]}`.
pub fn coupling_to_hamiltonian(m: &CouplingMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.dim, m.dim, |a, b| Complex64::from_polar(m.r(a, b), m.beta(a, b)))
}

/// Wavefunction amplitudes `√ρ_a e^{-iφ_a}`.
pub fn amplitudes(rho: &[f64], phi: &[f64]) -> Vec<Complex64> {
    rho.iter()
        .zip(phi)
        .map(|(&r, &p)| Complex64::from_polar(r.max(0.0).sqrt(), -p))
        .collect()
}

/// Inverse of [`amplitudes`]; the phase of a vanishing amplitude is reported as 0.
pub fn probabilities_and_phases(psi: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let rho = psi.iter().map(|z| z.norm_sqr()).collect();
    let phi = psi
        .iter()
        .map(|z| if z.norm_sqr() == 0.0 { 0.0 } else { wrap_phase(-z.arg()) + 0.0 })
        .collect();
    (rho, phi)
}

/// `e^{-iHt}` applied to `psi`.
pub fn propagate(m: &CouplingMatrix, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    if m.dim == 2 {
        propagate_two_level(m, psi, t)
    } else {
        propagate_eigen(m, psi, t)
    }
}

// H = h0 I + h·σ, so e^{-iHt} = e^{-i h0 t} [cos(|h|t) I - i sin(|h|t) (h·σ)/|h|].
fn propagate_two_level(m: &CouplingMatrix, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let h11 = m.r(0, 0) * m.beta(0, 0).cos();
    let h22 = m.r(1, 1) * m.beta(1, 1).cos();
    let h12 = Complex64::from_polar(m.r(0, 1), m.beta(0, 1));
    let h0 = 0.5 * (h11 + h22);
    let hz = 0.5 * (h11 - h22);
    let (hx, hy) = (h12.re, -h12.im);
    let norm = (hx * hx + hy * hy + hz * hz).sqrt();
    let global = Complex64::from_polar(1.0, -h0 * t);
    let (c, s_over) = if norm == 0.0 {
        (1.0, 0.0)
    } else {
        let th = norm * t;
        (th.cos(), th.sin() / norm)
    };
    let i = Complex64::i();
    // (h·σ) = [[hz, hx - i hy], [hx + i hy, -hz]]
    let u00 = c - i * s_over * hz;
    let u11 = c + i * s_over * hz;
    let u01 = -i * s_over * Complex64::new(hx, -hy);
    let u10 = -i * s_over * Complex64::new(hx, hy);
    vec![
        global * (u00 * psi[0] + u01 * psi[1]),
        global * (u10 * psi[0] + u11 * psi[1]),
    ]
}

fn propagate_eigen(m: &CouplingMatrix, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let h = coupling_to_hamiltonian(m);
    let eig = h.symmetric_eigen();
    let v = &eig.eigenvectors;
    let coeffs = v.adjoint() * nalgebra::DVector::from_column_slice(psi);
    let phased = nalgebra::DVector::from_iterator(
        m.dim,
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t)),
    );
    (v * phased).iter().copied().collect()
}

/// Exact quantum-mechanical evolution of per-value probabilities and phases.
pub fn qm_reference_evolution(
    m: &CouplingMatrix,
    rho0: &[f64],
    phi0: &[f64],
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if rho0.len() != m.dim || phi0.len() != m.dim {
        return Err(Error::InvalidState(format!(
            "expected {} probabilities and phases",
            m.dim
        )));
    }
    if let Some(bad) = rho0.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::InvalidState(format!("negative probability {bad}")));
    }
    let sum: f64 = rho0.iter().sum();
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { sum });
    }
    let psi = amplitudes(rho0, phi0);
    Ok(probabilities_and_phases(&propagate(m, &psi, t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_coupling(m: &CouplingMatrix, r: [f64; 4], beta: [f64; 4]) {
        for k in 0..4 {
            assert_abs_diff_eq!(m.r[k], r[k], epsilon = 1e-15);
            assert_abs_diff_eq!(m.beta[k], beta[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn pauli_sigma_z() {
        let m = pauli_to_coupling(&PauliCoefficients::new(0.0, 0.0, 0.0, 2.0));
        assert_coupling(&m, [2.0, 0.0, 0.0, 2.0], [0.0, 0.0, 0.0, PI]);
    }

    #[test]
    fn pauli_sigma_x_plus_z() {
        let m = pauli_to_coupling(&PauliCoefficients::new(0.0, 1.0, 0.0, 1.0));
        assert_coupling(&m, [1.0, 1.0, 1.0, 1.0], [0.0, 0.0, 0.0, PI]);
    }

    #[test]
    fn pauli_identity() {
        let m = pauli_to_coupling(&PauliCoefficients::new(2.0, 0.0, 0.0, 0.0));
        assert_coupling(&m, [2.0, 0.0, 0.0, 2.0], [0.0; 4]);
    }

    #[test]
    fn negative_cx_gives_beta_pi() {
        let m = pauli_to_coupling(&PauliCoefficients::new(0.0, -1.0, 0.0, 0.0));
        assert_abs_diff_eq!(m.beta(0, 1), PI);
        assert_abs_diff_eq!(m.beta(1, 0), PI);
        assert!(CouplingMatrix::new(2, m.r.clone(), m.beta.clone()).is_ok());
    }

    #[test]
    fn hamiltonian_examples() {
        let m = pauli_to_coupling(&PauliCoefficients::new(0.0, 0.0, 0.0, 2.0));
        let h = coupling_to_hamiltonian(&m);
        assert_abs_diff_eq!(h[(0, 0)].re, 2.0);
        assert_abs_diff_eq!(h[(1, 1)].re, -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(1, 1)].im, 0.0, epsilon = 1e-15);

        let m = pauli_to_coupling(&PauliCoefficients::new(0.0, 1.0, 0.0, 1.0));
        let h = coupling_to_hamiltonian(&m);
        let want = [[1.0, 1.0], [1.0, -1.0]];
        for a in 0..2 {
            for b in 0..2 {
                assert_abs_diff_eq!(h[(a, b)].re, want[a][b], epsilon = 1e-15);
                assert_abs_diff_eq!(h[(a, b)].im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn round_trip_reproduces_pauli_sum() {
        let c = PauliCoefficients::new(0.3, -1.2, 0.7, -0.4);
        let h = coupling_to_hamiltonian(&pauli_to_coupling(&c));
        let i = Complex64::i();
        let want = [
            [Complex64::from(c.ct + c.cz), c.cx - i * c.cy],
            [c.cx + i * c.cy, Complex64::from(c.ct - c.cz)],
        ];
        for a in 0..2 {
            for b in 0..2 {
                assert!((h[(a, b)] - want[a][b]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_couplings() {
        assert!(CouplingMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0], vec![0.0; 4]).is_err());
        assert!(CouplingMatrix::new(2, vec![1.0, 0.5, 0.5, 1.0], vec![0.0, 0.3, 0.3, 0.0]).is_err());
        assert!(CouplingMatrix::new(2, vec![-1.0, 0.0, 0.0, 1.0], vec![0.0; 4]).is_err());
        assert!(CouplingMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0], vec![0.5, 0.0, 0.0, 0.0]).is_err());
        assert!(CouplingMatrix::new(2, vec![1.0, 0.5, 0.5, 1.0], vec![0.0, 0.3, -0.3, PI]).is_ok());
    }

    #[test]
    fn diagonal_populations_frozen() {
        let m = pauli_to_coupling(&PauliCoefficients::new(0.0, 0.0, 0.0, 2.0));
        for &t in &[0.0, 0.7, 13.0, 1e4] {
            let (rho, _) = qm_reference_evolution(&m, &[0.3, 0.7], &[0.1, -2.0], t).unwrap();
            assert_abs_diff_eq!(rho[0], 0.3, epsilon = 1e-12);
            assert_abs_diff_eq!(rho[1], 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn rabi_flop() {
        let m = pauli_to_coupling(&PauliCoefficients::new(0.0, 1.0, 0.0, 0.0));
        for k in 0..50 {
            let t = 0.137 * k as f64;
            let (rho, _) = qm_reference_evolution(&m, &[1.0, 0.0], &[0.0, 0.0], t).unwrap();
            assert_abs_diff_eq!(rho[0], t.cos().powi(2), epsilon = 1e-14);
            assert_abs_diff_eq!(rho[1], t.sin().powi(2), epsilon = 1e-14);
        }
    }

    #[test]
    fn diagonal_phase_sign() {
        // amplitude √ρ e^{-iφ} under e^{-iEt} gives φ(t) = φ0 + E t
        let m = CouplingMatrix::diagonal(&[2.0, -2.0]).unwrap();
        let (_, phi) = qm_reference_evolution(&m, &[0.5, 0.5], &[0.0, 0.0], 0.25).unwrap();
        assert_abs_diff_eq!(phi[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(phi[1], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn rejects_unnormalized() {
        let m = CouplingMatrix::diagonal(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            qm_reference_evolution(&m, &[0.5, 0.6], &[0.0, 0.0], 1.0),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn eigen_route_matches_closed_form() {
        let m = pauli_to_coupling(&PauliCoefficients::new(0.2, 1.0, -0.5, 0.8));
        let psi = amplitudes(&[0.3, 0.7], &[0.0, 1.0]);
        for &t in &[0.1, 1.0, 7.3] {
            let a = propagate_two_level(&m, &psi, t);
            let b = propagate_eigen(&m, &psi, t);
            for k in 0..2 {
                assert!((a[k] - b[k]).norm() < 1e-12);
            }
        }
    }
}
