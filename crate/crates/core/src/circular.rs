//! Weighted statistics of angles.

use crate::wrap_phase;

/// Probability-weighted mean of phases, robust to wrapping.
///
/// The mean direction of the resultant vector is lifted to the branch of the
/// heaviest phase, and the linear weighted mean of the wrapped offsets about
/// it is returned. For clusters narrower than π this equals the plain
/// weighted mean of the (unwrapped) phases. Weights need not be normalized.
/// Returns `None` when the total weight is not positive.
pub fn weighted_mean(phases: &[f64], weights: &[f64]) -> Option<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let (mut s, mut c) = (0.0, 0.0);
    let mut heaviest = 0;
    for (k, (&p, &w)) in phases.iter().zip(weights).enumerate() {
        s += w * p.sin();
        c += w * p.cos();
        if w > weights[heaviest] {
            heaviest = k;
        }
    }
    let anchor = phases[heaviest];
    let reference = anchor + wrap_phase(s.atan2(c) - anchor);
    let offset: f64 = phases
        .iter()
        .zip(weights)
        .map(|(&p, &w)| w * wrap_phase(p - reference))
        .sum::<f64>()
        / total;
    Some(reference + offset)
}

/// Weighted root-mean-square wrapped distance from [`weighted_mean`].
pub fn weighted_dispersion(phases: &[f64], weights: &[f64]) -> Option<f64> {
    let mean = weighted_mean(phases, weights)?;
    let total: f64 = weights.iter().sum();
    let var = phases
        .iter()
        .zip(weights)
        .map(|(&p, &w)| {
            let d = wrap_phase(p - mean);
            w * d * d
        })
        .sum::<f64>()
        / total;
    Some(var.sqrt())
}
