//! Scaling functions as truncated infinite products, wavelets from masks, and
//! the decay and vanishing-at-the-origin checks.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::PeriodicFunction;
use crate::freqfield::{Grid, Profile, SampledFunction};
use crate::spectrum::Spectrum;

pub const DEFAULT_LEVELS: u32 = 30;
pub const NORMALIZATION_TOL: f64 = 1e-12;
pub const EPSILON_CAP: f64 = 10.0;
pub const MIN_FIT_OMEGA: f64 = 8.0;
const FIT_BINS: usize = 32;

pub fn check_normalized(m0: &PeriodicFunction, s: &Spectrum) -> Result<()> {
    let dev = (m0.evaluate(s, 0.0)? - Complex64::new(1.0, 0.0)).norm();
    if dev > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(dev));
    }
    Ok(())
}

/// `Π_{j=1}^{J} m₀(ξ/(2N)^j)`, evaluable at any frequency.
#[derive(Debug, Clone)]
pub struct CascadeProfile {
    m0: PeriodicFunction,
    spectrum: Spectrum,
    levels: u32,
}

impl CascadeProfile {
    pub fn new(m0: PeriodicFunction, spectrum: Spectrum, levels: u32) -> Result<Self> {
        if levels < 1 {
            return Err(Error::InvalidArgument("cascade needs at least one level".into()));
        }
        check_normalized(&m0, &spectrum)?;
        Ok(CascadeProfile { m0, spectrum, levels })
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }
}

impl Profile for CascadeProfile {
    fn eval(&self, xi: f64) -> Result<Complex64> {
        let d = self.spectrum.dilation() as f64;
        let mut x = xi;
        let mut acc = Complex64::new(1.0, 0.0);
        for _ in 0..self.levels {
            x /= d;
            acc *= self.m0.evaluate(&self.spectrum, x)?;
            if acc == Complex64::new(0.0, 0.0) {
                break;
            }
        }
        Ok(acc)
    }
}

fn unaligned_to_step(e: Error) -> Error {
    match e {
        Error::UnalignedQuery(xi) => {
            Error::StepNotAligned(format!("sampled mask cannot be evaluated at {xi}"))
        }
        other => other,
    }
}

/// Samples of the truncated product on `grid`.
pub fn cascade_scaling(m0: &PeriodicFunction, s: &Spectrum, levels: u32, grid: Grid) -> Result<SampledFunction> {
    let profile = CascadeProfile::new(m0.clone(), *s, levels)?;
    SampledFunction::sample(grid, &profile).map_err(unaligned_to_step)
}

/// `ψ̂(ξ) = m(ξ/2N)·φ̂(ξ/2N)`.
#[derive(Clone)]
pub struct WaveletProfile {
    mask: PeriodicFunction,
    phi: Arc<dyn Profile>,
    spectrum: Spectrum,
}

impl WaveletProfile {
    pub fn new(mask: PeriodicFunction, phi: Arc<dyn Profile>, spectrum: Spectrum) -> Self {
        WaveletProfile { mask, phi, spectrum }
    }
}

impl Profile for WaveletProfile {
    fn eval(&self, xi: f64) -> Result<Complex64> {
        let x = xi / self.spectrum.dilation() as f64;
        let p = self.phi.eval(x)?;
        if p == Complex64::new(0.0, 0.0) {
            return Ok(p);
        }
        Ok(self.mask.evaluate(&self.spectrum, x)? * p)
    }

    fn support(&self) -> Option<(f64, f64)> {
        let d = self.spectrum.dilation() as f64;
        self.phi.support().map(|(a, b)| (a * d, b * d))
    }
}

/// Samples of `m(ξ/2N)·φ̂(ξ/2N)` on `grid`.
pub fn wavelet_from_masks(
    mask: &PeriodicFunction,
    phi: &dyn Profile,
    s: &Spectrum,
    grid: Grid,
) -> Result<SampledFunction> {
    let d = s.dilation() as f64;
    let support = phi.support();
    let samples = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<Complex64> {
            let x = grid.xi(i) / d;
            if let Some((a, b)) = support {
                if x < a || x > b {
                    return Ok(Complex64::new(0.0, 0.0));
                }
            }
            let p = phi.eval(x)?;
            if p == Complex64::new(0.0, 0.0) {
                return Ok(p);
            }
            Ok(mask.evaluate(s, x)? * p)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(unaligned_to_step)?;
    SampledFunction::new(grid, samples)
}

/// Constants of a bound `|f̂(ξ)| ≤ C(1+|ξ|)^{−1/2−ε}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct DecayFit {
    pub C: f64,
    pub epsilon: f64,
    pub pass: bool,
    /// `f̂` vanishes on the tail of the grid; `epsilon` is the cap.
    pub compact: bool,
    /// Worst ratio `|f̂(ξ)| / (C(1+|ξ|)^{−1/2−ε})` over the grid.
    pub worst_ratio: f64,
}

/// Fits the decay exponent over `|ξ| ≥ 1` and verifies the bound on the grid.
///
/// The exponent is a least-squares line through the per-bin maxima of `|f̂|`
/// on logarithmic bins, so zeros of an oscillating profile do not drag the
/// fit. `C` is then the smallest constant for which the bound holds at every
/// grid point.
pub fn fit_decay(f: &SampledFunction) -> Result<DecayFit> {
    let grid = f.grid();
    let omega = grid.omega();
    if omega < MIN_FIT_OMEGA {
        return Err(Error::FitRangeTooShort { needed: MIN_FIT_OMEGA, got: omega });
    }
    let tail: Vec<(f64, f64)> = f
        .samples()
        .iter()
        .enumerate()
        .map(|(i, z)| (grid.xi(i).abs(), z.norm()))
        .filter(|(x, _)| *x >= 1.0)
        .collect();
    let tail_max = tail.iter().map(|p| p.1).fold(0.0, f64::max);
    if tail_max == 0.0 {
        return Err(Error::DegenerateTail);
    }

    let last_nonzero = tail.iter().filter(|p| p.1 > 0.0).map(|p| p.0).fold(0.0, f64::max);
    let compact = last_nonzero < omega * 0.75;

    let epsilon = if compact {
        EPSILON_CAP
    } else {
        let width = ((1.0 + omega).ln() - 2f64.ln()) / FIT_BINS as f64;
        let mut best = vec![(0.0f64, 0.0f64); FIT_BINS];
        for &(x, v) in &tail {
            let t = (1.0 + x).ln();
            let b = (((t - 2f64.ln()) / width) as usize).min(FIT_BINS - 1);
            if v > best[b].1 {
                best[b] = (t, v);
            }
        }
        let pts: Vec<(f64, f64)> = best.into_iter().filter(|p| p.1 > 0.0).map(|(t, v)| (t, v.ln())).collect();
        if pts.len() < 2 {
            return Err(Error::DegenerateTail);
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let slope = sxy / sxx;
        (-slope - 0.5).min(EPSILON_CAP)
    };

    let power = 0.5 + epsilon;
    let c = f
        .samples()
        .iter()
        .enumerate()
        .map(|(i, z)| z.norm() * (1.0 + grid.xi(i).abs()).powf(power))
        .fold(0.0, f64::max);
    let worst_ratio = if c > 0.0 {
        f.samples()
            .iter()
            .enumerate()
            .map(|(i, z)| z.norm() * (1.0 + grid.xi(i).abs()).powf(power) / c)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let pass = epsilon > 0.0 && worst_ratio <= 1.0 + 1e-12;
    Ok(DecayFit { C: c, epsilon, pass, compact, worst_ratio })
}

/// `|ψ̂(0)|` and `max_{0<|ξ|≤1} |ψ̂(ξ)|/|ξ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginCheck {
    pub value_at_zero: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

pub fn wavelet_origin_check(psi: &SampledFunction, tol: f64) -> OriginCheck {
    let grid = psi.grid();
    let value_at_zero = psi.at_offset(0).norm();
    let ppu = grid.per_unit();
    let max_ratio = (1..=ppu.min(grid.half_points()))
        .flat_map(|m| [m, -m])
        .map(|m| psi.at_offset(m).norm() / (m.abs() as f64 / ppu as f64))
        .fold(0.0, f64::max);
    OriginCheck { value_at_zero, max_ratio, pass: value_at_zero <= tol && max_ratio.is_finite() }
}
