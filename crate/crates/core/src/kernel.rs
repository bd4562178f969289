//! Phase-overlap kernels `F(Δφ)`.
//!
//! A kernel weights how much an ensemble member with phase `φ_j` counts
//! towards the density seen by a member at `φ_i` with the same observable
//! value. Admissible kernels satisfy `F(0) = 1`, `F ≥ 0`, evenness and
//! 2π-periodicity, and must be continuous at `Δφ = 0`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::wrap_phase;

/// Points on which [`validate_kernel`] checks the invariants.
pub const VALIDATION_GRID: usize = 4096;

const EVEN_TOL: f64 = 1e-12;
const MAX_TABLE_SPACING_NEAR_ZERO: f64 = 1e-3;
const CURVATURE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Kernel {
    /// `F ≡ 1`.
    Flat,
    /// `F = cos²(Δφ/2)`.
    Cosine,
    /// `F = cos²(cΔφ/2) Θ[cos Δφ − cos(π/c)]`.
    Spiked(f64),
    Tabulated(KernelTable),
}

/// Piecewise-linear kernel sampled on a sorted grid of `(Δφ, F)` pairs.
///
/// A grid that starts at `Δφ = 0` is extended to negative arguments by
/// reflection; a grid with negative abscissae is used as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    points: Vec<(f64, f64)>,
    source: Option<String>,
}

impl KernelTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidKernel(vec!["table needs at least two points".into()]));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidKernel(vec!["table contains non-finite values".into()]));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidKernel(vec!["table has duplicate abscissae".into()]));
        }
        Ok(Self { points, source: None })
    }

    /// Reads a headerless or headed two-column CSV of `dphi,value`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)?;
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::InvalidKernel(vec![format!(
                    "{}: expected two columns",
                    path.display()
                )]));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(x), Ok(y)) => points.push((x, y)),
                // header line
                _ if points.is_empty() => continue,
                _ => {
                    return Err(Error::InvalidKernel(vec![format!(
                        "{}: unparsable row {:?}",
                        path.display(),
                        rec
                    )]))
                }
            }
        }
        let mut table = Self::new(points)?;
        table.source = Some(path.display().to_string());
        Ok(table)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn is_one_sided(&self) -> bool {
        self.points[0].0 >= 0.0
    }

    fn interpolate(&self, x: f64) -> f64 {
        let x = if self.is_one_sided() { x.abs() } else { x };
        let pts = &self.points;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        if x >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let k = pts.partition_point(|p| p.0 <= x);
        let (x0, y0) = pts[k - 1];
        let (x1, y1) = pts[k];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn coverage_violations(&self) -> Vec<String> {
        let lo = self.points[0].0;
        let hi = self.points[self.points.len() - 1].0;
        let mut v = Vec::new();
        if self.is_one_sided() {
            if lo != 0.0 {
                v.push(format!("coverage: table must start at dphi = 0, starts at {lo}"));
            }
        } else if lo > -PI + 1e-9 {
            v.push(format!("coverage: two-sided table must reach -pi, starts at {lo}"));
        }
        if hi < PI - 1e-9 {
            v.push(format!("coverage: table must reach pi, ends at {hi}"));
        }
        v
    }

    /// Nodes nearest zero on either side, used for the curvature estimate.
    fn spacing_near_zero(&self) -> f64 {
        let k = self.points.partition_point(|p| p.0 <= 0.0);
        let right = self.points.get(k).map(|p| p.0).unwrap_or(f64::INFINITY);
        if self.is_one_sided() {
            right
        } else {
            let left = if k >= 2 { -self.points[k - 2].0 } else { f64::INFINITY };
            right.max(left)
        }
    }
}

impl Kernel {
    /// Parses `flat | cosine | spiked:<c> | table:<path>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let s = spec.trim();
        match s {
            "flat" => return Ok(Kernel::Flat),
            "cosine" => return Ok(Kernel::Cosine),
            _ => {}
        }
        if let Some(c) = s.strip_prefix("spiked:") {
            let c: f64 = c.trim().parse().map_err(|_| Error::KernelSpec(spec.into()))?;
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::KernelSpec(spec.into()));
            }
            return Ok(Kernel::spiked(c));
        }
        if let Some(path) = s.strip_prefix("table:") {
            return Ok(Kernel::Tabulated(KernelTable::from_csv(Path::new(path.trim()))?));
        }
        Err(Error::KernelSpec(spec.into()))
    }

    /// Member `F_c` of the spiked family; `c = 0` is the flat kernel.
    pub fn spiked(c: f64) -> Self {
        if c == 0.0 {
            Kernel::Flat
        } else {
            Kernel::Spiked(c)
        }
    }

    /// Evaluates `F` at a phase difference, reduced into `(−π, π]`.
    #[inline]
    pub fn eval(&self, dphi: f64) -> f64 {
        let d = wrap_phase(dphi.abs()).abs();
        match self {
            Kernel::Flat => 1.0,
            Kernel::Cosine => {
                let h = (0.5 * d).cos();
                h * h
            }
            Kernel::Spiked(c) => {
                if d.cos() >= (PI / c).cos() {
                    let h = (0.5 * c * d).cos();
                    h * h
                } else {
                    0.0
                }
            }
            Kernel::Tabulated(t) => {
                if t.is_one_sided() {
                    t.interpolate(d)
                } else {
                    t.interpolate(wrap_phase(dphi))
                }
            }
        }
    }

    /// Label used in file names and CSV output.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Flat => write!(f, "flat"),
            Kernel::Cosine => write!(f, "cosine"),
            Kernel::Spiked(c) => write!(f, "spiked:{c}"),
            Kernel::Tabulated(t) => match &t.source {
                Some(p) => write!(f, "table:{p}"),
                None => write!(f, "table:<inline>"),
            },
        }
    }
}

impl TryFrom<String> for Kernel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Kernel::parse(&s)
    }
}

impl From<Kernel> for String {
    fn from(k: Kernel) -> String {
        k.to_string()
    }
}

/// Curvature data of a kernel at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelCurvature {
    /// `Δφ_F⁻² = −½ F''(0)`.
    pub inv_width_sq: f64,
    /// `λ = Δφ_F⁻² − 1`.
    pub lambda: f64,
}

impl KernelCurvature {
    fn from_inv_width_sq(inv_width_sq: f64) -> Self {
        Self { inv_width_sq, lambda: inv_width_sq - 1.0 }
    }
}

pub fn kernel_curvature(k: &Kernel) -> Result<KernelCurvature> {
    let q = match k {
        Kernel::Flat => 0.0,
        Kernel::Cosine => 0.25,
        Kernel::Spiked(c) => 0.25 * c * c,
        Kernel::Tabulated(t) => {
            let spacing = t.spacing_near_zero();
            if spacing > MAX_TABLE_SPACING_NEAR_ZERO {
                return Err(Error::KernelTooCoarse { spacing });
            }
            // Central difference on the table nodes (or the fixed step if finer
            // nodes exist); a sub-node step would only see the linear interpolant.
            let h = spacing.max(CURVATURE_STEP);
            let second = (k.eval(h) - 2.0 * k.eval(0.0) + k.eval(-h)) / (h * h);
            -0.5 * second
        }
    };
    Ok(KernelCurvature::from_inv_width_sq(q))
}

/// Checks the kernel invariants on a uniform grid over `[−π, π]` and returns
/// one message per violated invariant.
pub fn validate_kernel(k: &Kernel) -> Vec<String> {
    let mut out = Vec::new();
    if let Kernel::Spiked(c) = k {
        if !(c.is_finite() && *c > 0.0) {
            out.push(format!("spiked kernel requires c > 0, got {c}"));
            return out;
        }
    }
    if let Kernel::Tabulated(t) = k {
        out.extend(t.coverage_violations());
    }

    let f0 = k.eval(0.0);
    if (f0 - 1.0).abs() > EVEN_TOL {
        out.push(format!("F(0) != 1: F(0) = {f0}"));
    }
    let n = VALIDATION_GRID;
    let mut neg = None;
    let mut odd = None;
    for i in 0..=n {
        let x = -PI + 2.0 * PI * i as f64 / n as f64;
        let v = k.eval(x);
        if !(v >= 0.0) && neg.is_none() {
            neg = Some((x, v));
        }
        if odd.is_none() && (v - k.eval(-x)).abs() > EVEN_TOL {
            odd = Some(x);
        }
    }
    if let Some((x, v)) = neg {
        out.push(format!("non-negativity: F({x}) = {v}"));
    }
    if let Some(x) = odd {
        out.push(format!("evenness: F({x}) != F({})", -x));
    }
    if let Kernel::Tabulated(t) = k {
        if !t.is_one_sided() {
            let lo = t.interpolate(-PI);
            let hi = t.interpolate(PI);
            if (lo - hi).abs() > EVEN_TOL {
                out.push(format!("periodicity: F(-pi) = {lo} but F(pi) = {hi}"));
            }
        }
    }
    // An indicator-like kernel (1 at Δφ = 0, ~0 immediately off it) is excluded.
    let eps = 1e-7;
    let jump = (k.eval(eps) - f0).abs().max((k.eval(-eps) - f0).abs());
    if jump > 1e-3 {
        out.push(format!("discontinuous at equilibrium: |F(±{eps}) - F(0)| = {jump}"));
    }
    out
}

/// [`validate_kernel`] as a `Result`.
pub fn ensure_valid(k: &Kernel) -> Result<()> {
    let v = validate_kernel(k);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidKernel(v))
    }
}
