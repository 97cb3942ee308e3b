//! Frequency-domain samples, trapezoid inner products and `Λ`-periodization.
//!
//! Grids are stored as an integer number of points per unit length plus an
//! integer half-width, so every grid point is `m / per_unit` for an integer
//! offset `m`. Shifting by a translation `λ = (rk + 2nN)/N` is then an exact
//! index shift whenever `per_unit` is a multiple of `4N`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::spectrum::{phase_ratio, Spectrum, TranslationIndex};

const ALIGN_TOL: f64 = 1e-9;
const SUM_CHUNK: usize = 4096;

/// Sum of `f(0..n)` with a fixed chunking, so the result does not depend on
/// how many worker threads happen to run.
pub(crate) fn ordered_sum<F>(n: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let chunks = n.div_ceil(SUM_CHUNK);
    let partials: Vec<Complex64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SUM_CHUNK;
            let hi = (lo + SUM_CHUNK).min(n);
            (lo..hi).map(&f).sum()
        })
        .collect();
    partials.into_iter().sum()
}

/// Uniform symmetric grid `ξ_m = m / per_unit`, `|m| ≤ half_points`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    per_unit: i64,
    half_points: i64,
}

impl Grid {
    /// Grid over `[-omega, omega]` with spacing `step`. `1/step` must be an
    /// integer and `step` must divide `omega`.
    pub fn new(omega: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidArgument(format!("step must be positive (got {step})")));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidArgument(format!("omega must be positive (got {omega})")));
        }
        let inv = 1.0 / step;
        let per_unit = inv.round();
        if (inv - per_unit).abs() > ALIGN_TOL * per_unit.max(1.0) || per_unit < 1.0 {
            return Err(Error::StepNotAligned(format!(
                "1/step must be a positive integer (step = {step})"
            )));
        }
        let half = omega * per_unit;
        let half_points = half.round();
        if (half - half_points).abs() > ALIGN_TOL * half_points.max(1.0) {
            return Err(Error::StepNotAligned(format!(
                "step {step} does not divide omega {omega}"
            )));
        }
        Grid::from_parts(per_unit as i64, half_points as i64)
    }

    pub fn from_parts(per_unit: i64, half_points: i64) -> Result<Self> {
        if per_unit < 1 || half_points < 1 {
            return Err(Error::InvalidArgument(format!(
                "grid needs per_unit >= 1 and half_points >= 1 (got {per_unit}, {half_points})"
            )));
        }
        Ok(Grid { per_unit, half_points })
    }

    pub fn per_unit(&self) -> i64 {
        self.per_unit
    }

    pub fn half_points(&self) -> i64 {
        self.half_points
    }

    pub fn omega(&self) -> f64 {
        self.half_points as f64 / self.per_unit as f64
    }

    pub fn step(&self) -> f64 {
        1.0 / self.per_unit as f64
    }

    pub fn len(&self) -> usize {
        (2 * self.half_points + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Integer offset of the `i`-th sample.
    pub fn offset(&self, i: usize) -> i64 {
        i as i64 - self.half_points
    }

    pub fn index_of(&self, offset: i64) -> Option<usize> {
        if offset.abs() <= self.half_points {
            Some((offset + self.half_points) as usize)
        } else {
            None
        }
    }

    pub fn xi(&self, i: usize) -> f64 {
        self.offset(i) as f64 / self.per_unit as f64
    }

    /// Trapezoid weight of sample `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.len() {
            0.5 * self.step()
        } else {
            self.step()
        }
    }

    /// Integer offset of `xi` if it lies on the (infinite) lattice of the grid.
    pub fn locate(&self, xi: f64) -> Option<i64> {
        let t = xi * self.per_unit as f64;
        let m = t.round();
        if (t - m).abs() <= ALIGN_TOL * m.abs().max(1.0) {
            Some(m as i64)
        } else {
            None
        }
    }

    /// Same spacing, wider or narrower band.
    pub fn with_half_points(&self, half_points: i64) -> Result<Self> {
        Grid::from_parts(self.per_unit, half_points)
    }

    /// `true` when a shift by any `λ ∈ Λ` maps grid points to grid points and
    /// the cells of the shipped indicator constructions are resolved.
    pub fn is_aligned_for(&self, s: &Spectrum) -> bool {
        self.per_unit % (4 * s.N()) == 0
    }

    pub fn require_aligned(&self, s: &Spectrum) -> Result<()> {
        if self.is_aligned_for(s) {
            Ok(())
        } else {
            Err(Error::StepNotAligned(format!(
                "step 1/{} must divide 1/(4N) = 1/{}",
                self.per_unit,
                4 * s.N()
            )))
        }
    }
}

impl Serialize for Grid {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        GridHeader { omega: self.omega(), step: self.step() }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let h = GridHeader::deserialize(de)?;
        Grid::new(h.omega, h.step).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    omega: f64,
    step: f64,
}

/// Anything that can be evaluated at an arbitrary frequency.
pub trait Profile: Send + Sync {
    fn eval(&self, xi: f64) -> Result<Complex64>;

    /// Interval outside which the profile vanishes, when known.
    fn support(&self) -> Option<(f64, f64)> {
        None
    }

    /// Samples at grid indices `lo..=hi`; profiles with cheaper exact
    /// routes override this.
    fn sample_span(&self, grid: Grid, lo: usize, hi: usize) -> Result<Vec<Complex64>> {
        let support = self.support();
        (lo..=hi)
            .into_par_iter()
            .map(|i| {
                let xi = grid.xi(i);
                match support {
                    Some((a, b)) if xi < a || xi > b => Ok(Complex64::new(0.0, 0.0)),
                    _ => self.eval(xi),
                }
            })
            .collect()
    }

    fn sample_on(&self, grid: Grid) -> Result<SampledFunction> {
        SampledFunction::new(grid, self.sample_span(grid, 0, grid.len() - 1)?)
    }
}

impl<P: Profile + ?Sized> Profile for Arc<P> {
    fn eval(&self, xi: f64) -> Result<Complex64> {
        (**self).eval(xi)
    }
    fn support(&self) -> Option<(f64, f64)> {
        (**self).support()
    }
    fn sample_span(&self, grid: Grid, lo: usize, hi: usize) -> Result<Vec<Complex64>> {
        (**self).sample_span(grid, lo, hi)
    }
    fn sample_on(&self, grid: Grid) -> Result<SampledFunction> {
        (**self).sample_on(grid)
    }
}

impl<P: Profile + ?Sized> Profile for &P {
    fn eval(&self, xi: f64) -> Result<Complex64> {
        (**self).eval(xi)
    }
    fn support(&self) -> Option<(f64, f64)> {
        (**self).support()
    }
    fn sample_span(&self, grid: Grid, lo: usize, hi: usize) -> Result<Vec<Complex64>> {
        (**self).sample_span(grid, lo, hi)
    }
    fn sample_on(&self, grid: Grid) -> Result<SampledFunction> {
        (**self).sample_on(grid)
    }
}

/// `𝟙_Γ` for a given spectrum.
#[derive(Debug, Clone, Copy)]
pub struct GammaIndicator(pub Spectrum);

impl Profile for GammaIndicator {
    fn eval(&self, xi: f64) -> Result<Complex64> {
        Ok(if self.0.gamma_indicator(xi) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    }
    fn support(&self) -> Option<(f64, f64)> {
        Some((0.0, (self.0.N() + 1) as f64 / 2.0))
    }
}

/// Constant times the indicator of a union of half-open intervals.
#[derive(Debug, Clone)]
pub struct IntervalIndicator {
    pub intervals: Vec<(f64, f64)>,
    pub value: Complex64,
}

impl IntervalIndicator {
    pub fn new(intervals: Vec<(f64, f64)>) -> Self {
        IntervalIndicator { intervals, value: Complex64::new(1.0, 0.0) }
    }
}

impl Profile for IntervalIndicator {
    fn eval(&self, xi: f64) -> Result<Complex64> {
        if self.intervals.iter().any(|&(a, b)| (a..b).contains(&xi)) {
            Ok(self.value)
        } else {
            Ok(Complex64::new(0.0, 0.0))
        }
    }
    fn support(&self) -> Option<(f64, f64)> {
        let lo = self.intervals.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = self.intervals.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if lo <= hi {
            Some((lo, hi))
        } else {
            Some((0.0, 0.0))
        }
    }
}

/// Samples of `f̂` on a [`Grid`]; zero outside `[-Ω, Ω]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    samples: Vec<Complex64>,
    nonzero: Option<(usize, usize)>,
}

fn nonzero_range(samples: &[Complex64]) -> Option<(usize, usize)> {
    let first = samples.iter().position(|z| *z != Complex64::new(0.0, 0.0))?;
    let last = samples.iter().rposition(|z| *z != Complex64::new(0.0, 0.0))?;
    Some((first, last))
}

impl SampledFunction {
    pub fn new(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "grid has {} points but {} samples were given",
                grid.len(),
                samples.len()
            )));
        }
        let nonzero = nonzero_range(&samples);
        Ok(SampledFunction { grid, samples, nonzero })
    }

    pub fn zeros(grid: Grid) -> Self {
        SampledFunction { grid, samples: vec![Complex64::new(0.0, 0.0); grid.len()], nonzero: None }
    }

    /// Samples `f(ξ_i)` in parallel.
    pub fn from_fn<F>(grid: Grid, f: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Sync,
    {
        let samples: Vec<Complex64> = (0..grid.len()).into_par_iter().map(|i| f(grid.xi(i))).collect();
        let nonzero = nonzero_range(&samples);
        SampledFunction { grid, samples, nonzero }
    }

    /// Samples `f(m)` indexed by integer offset, for exact constructions.
    pub fn from_offsets<F>(grid: Grid, f: F) -> Self
    where
        F: Fn(i64) -> Complex64 + Sync,
    {
        let samples: Vec<Complex64> =
            (0..grid.len()).into_par_iter().map(|i| f(grid.offset(i))).collect();
        let nonzero = nonzero_range(&samples);
        SampledFunction { grid, samples, nonzero }
    }

    /// Samples a profile, skipping points outside its declared support.
    pub fn sample(grid: Grid, profile: &dyn Profile) -> Result<Self> {
        profile.sample_on(grid)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn omega(&self) -> f64 {
        self.grid.omega()
    }

    pub fn step(&self) -> f64 {
        self.grid.step()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Index range of nonzero samples, inclusive.
    pub fn nonzero_range(&self) -> Option<(usize, usize)> {
        self.nonzero
    }

    pub fn at_offset(&self, offset: i64) -> Complex64 {
        match self.grid.index_of(offset) {
            Some(i) => self.samples[i],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Value at a lattice point; points beyond the band are zero.
    pub fn value_at(&self, xi: f64) -> Result<Complex64> {
        match self.grid.locate(xi) {
            Some(m) => Ok(self.at_offset(m)),
            None => Err(Error::StepNotAligned(format!(
                "xi = {xi} is not a multiple of step 1/{}",
                self.grid.per_unit
            ))),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let samples: Vec<Complex64> = self.samples.iter().map(|z| z * c).collect();
        SampledFunction::new(self.grid, samples).expect("same grid")
    }

    pub fn map<F: Fn(f64, Complex64) -> Complex64 + Sync>(&self, f: F) -> Self {
        let samples: Vec<Complex64> = self
            .samples
            .par_iter()
            .enumerate()
            .map(|(i, z)| f(self.grid.xi(i), *z))
            .collect();
        SampledFunction::new(self.grid, samples).expect("same grid")
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &SampledFunction, b: Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(x, y)| a * x + b * y).collect();
        SampledFunction::new(self.grid, samples)
    }

    pub fn sub(&self, other: &SampledFunction) -> Result<Self> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    pub fn norm_sq(&self) -> f64 {
        let Some((lo, hi)) = self.nonzero else { return 0.0 };
        ordered_sum(hi - lo + 1, |i| {
            let j = lo + i;
            Complex64::new(self.grid.weight(j) * self.samples[j].norm_sqr(), 0.0)
        })
        .re
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        self.to_json_with(Value::Null)
    }

    /// JSON document with an optional provenance block.
    pub fn to_json_with(&self, provenance: Value) -> Result<String> {
        let file = SampledFile {
            omega: self.omega(),
            step: self.step(),
            provenance,
            samples: self.samples.iter().map(|z| [z.re, z.im]).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SampledFile = serde_json::from_str(text)?;
        let grid = Grid::new(file.omega, file.step)?;
        SampledFunction::new(grid, file.samples.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        w.write_all(&self.grid.per_unit.to_le_bytes())?;
        w.write_all(&self.grid.half_points.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for z in &self.samples {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Parse("not a sampled-function file".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != BINARY_VERSION {
            return Err(Error::Parse("unsupported sampled-function version".into()));
        }
        r.read_exact(&mut b8)?;
        let per_unit = i64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let half_points = i64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let grid = Grid::from_parts(per_unit, half_points)?;
        if count != grid.len() {
            return Err(Error::Parse("sample count does not match grid header".into()));
        }
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            samples.push(Complex64::new(re, im));
        }
        SampledFunction::new(grid, samples)
    }

    /// `xi,re,im` rows in grid order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "xi,re,im")?;
        for (i, z) in self.samples.iter().enumerate() {
            writeln!(w, "{},{},{}", self.grid.xi(i), z.re, z.im)?;
        }
        Ok(())
    }
}

const BINARY_MAGIC: &[u8; 4] = b"NMSF";
const BINARY_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SampledFile {
    omega: f64,
    step: f64,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    provenance: Value,
    samples: Vec<[f64; 2]>,
}

impl Profile for SampledFunction {
    fn eval(&self, xi: f64) -> Result<Complex64> {
        if xi.abs() > self.omega() + self.step() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        self.value_at(xi)
    }

    fn support(&self) -> Option<(f64, f64)> {
        match self.nonzero {
            Some((lo, hi)) => Some((self.grid.xi(lo), self.grid.xi(hi))),
            None => Some((0.0, 0.0)),
        }
    }
}

/// Trapezoid approximation of `∫ f̂ conj(ĝ)`.
pub fn inner_product(f: &SampledFunction, g: &SampledFunction) -> Result<Complex64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    let (Some((a0, a1)), Some((b0, b1))) = (f.nonzero, g.nonzero) else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    if lo > hi {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(ordered_sum(hi - lo + 1, |i| {
        let j = lo + i;
        f.samples[j] * g.samples[j].conj() * f.grid.weight(j)
    }))
}

/// Smallest truncation that reaches every grid point: `⌈(Ω+2)/2⌉`.
pub fn default_n_max(grid: &Grid) -> i64 {
    ((grid.omega() + 2.0) / 2.0).ceil() as i64
}

/// `S(ξ) = Σ_λ f̂(ξ+λ) conj(ĝ(ξ+λ))` on one period `[0, 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodizationProfile {
    pub per_unit: i64,
    pub values: Vec<Complex64>,
    pub truncation_n_max: i64,
    /// Bound on how far `values` may sit from the untruncated sum.
    pub tail_bound: f64,
    /// Whether `values` were extrapolated in the truncation.
    #[serde(default)]
    pub extrapolated: bool,
}

impl PeriodizationProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn xi(&self, i: usize) -> f64 {
        i as f64 / self.per_unit as f64
    }

    pub fn max_deviation_from(&self, target: Complex64) -> f64 {
        self.values.iter().map(|z| (z - target).norm()).fold(0.0, f64::max)
    }

    /// Value at a point of the base grid, reduced modulo 2.
    pub fn at_offset(&self, offset: i64) -> Complex64 {
        self.values[offset.rem_euclid(2 * self.per_unit) as usize]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "xi,re,im")?;
        for (i, z) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{}", self.xi(i), z.re, z.im)?;
        }
        Ok(())
    }
}

/// Grid offset of the translation `(k, n)`: `λ · per_unit`.
fn shift_units(s: &Spectrum, per_unit: i64, idx: TranslationIndex) -> i64 {
    s.lambda_numer(idx) * (per_unit / s.N())
}

/// Periodization of two sampled functions by exact index shifts.
pub fn periodize(
    s: &Spectrum,
    f: &SampledFunction,
    g: &SampledFunction,
    n_max: i64,
) -> Result<PeriodizationProfile> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    if n_max < 1 {
        return Err(Error::InvalidArgument(format!("n_max must be at least 1 (got {n_max})")));
    }
    let grid = f.grid;
    grid.require_aligned(s)?;
    let ppu = grid.per_unit;
    let half = grid.half_points;
    let period = 2 * ppu;
    let k_shift = [0, shift_units(s, ppu, TranslationIndex::new(1, 0))];

    let rows: Vec<(Complex64, f64)> = (0..period)
        .into_par_iter()
        .map(|m| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut omitted = 0.0;
            for &ks in &k_shift {
                // m + ks + 2n·ppu ∈ [-half, half]
                let n_lo = (-half - m - ks).div_euclid(period);
                let n_hi = (half - m - ks).div_euclid(period) + 1;
                for n in n_lo..=n_hi {
                    let off = m + ks + n * period;
                    let Some(i) = grid.index_of(off) else { continue };
                    let term = f.samples[i] * g.samples[i].conj();
                    if n.abs() <= n_max {
                        acc += term;
                    } else {
                        omitted += term.norm();
                    }
                }
            }
            (acc, omitted)
        })
        .collect();
    let tail_bound = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(PeriodizationProfile {
        per_unit: ppu,
        values: rows.into_iter().map(|r| r.0).collect(),
        truncation_n_max: n_max,
        tail_bound,
        extrapolated: false,
    })
}

/// Periodization of two profiles evaluated at `ξ + λ` directly.
///
/// When both supports are known and covered by `|n| ≤ n_max` the sum is
/// complete. Otherwise partial sums at `n_max/4`, `n_max/2`, `n_max` are
/// combined by two Richardson steps (tails in powers of `1/n`), and the
/// distance between the last two extrapolants is reported as `tail_bound`.
pub fn periodize_profiles(
    s: &Spectrum,
    f: &dyn Profile,
    g: &dyn Profile,
    per_unit: i64,
    n_max: i64,
) -> Result<PeriodizationProfile> {
    if per_unit < 1 || per_unit % (4 * s.N()) != 0 {
        return Err(Error::StepNotAligned(format!(
            "step 1/{per_unit} must divide 1/(4N) = 1/{}",
            4 * s.N()
        )));
    }
    if n_max < 1 {
        return Err(Error::InvalidArgument(format!("n_max must be at least 1 (got {n_max})")));
    }
    let covered = match (f.support(), g.support()) {
        (Some((a0, a1)), Some((b0, b1))) => {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            // every λ with ξ + λ ∈ [lo, hi] for some ξ ∈ [0, 2)
            let reach = ((lo - 2.0).abs().max(hi.abs()) / 2.0).ceil() as i64 + 1;
            lo > hi || reach <= n_max
        }
        _ => false,
    };
    if !covered && (n_max < 4 || n_max % 4 != 0) {
        return Err(Error::InvalidArgument(format!(
            "extrapolated periodization needs n_max divisible by 4 (got {n_max})"
        )));
    }
    let period = 2 * per_unit;
    let same = std::ptr::addr_eq(f as *const dyn Profile, g as *const dyn Profile);
    let stops = if covered { vec![n_max] } else { vec![n_max / 4, n_max / 2, n_max] };

    let rows = (0..period)
        .into_par_iter()
        .map(|m| -> Result<Vec<Complex64>> {
            let den = (s.N() * per_unit) as f64;
            let term = |n: i64| -> Result<Complex64> {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..=1u8 {
                    // (m·N + numer·per_unit) / (N·per_unit), rounded once
                    let numer = s.lambda_numer(TranslationIndex::new(k, n));
                    let x = (m * s.N() + numer * per_unit) as f64 / den;
                    let fv = f.eval(x)?;
                    if fv != Complex64::new(0.0, 0.0) {
                        let gv = if same { fv } else { g.eval(x)? };
                        acc += fv * gv.conj();
                    }
                }
                Ok(acc)
            };
            let mut partial = term(0)?;
            let mut out = Vec::with_capacity(stops.len());
            let mut done = 0;
            for &stop in &stops {
                for n in done + 1..=stop {
                    partial += term(n)? + term(-n)?;
                }
                done = stop;
                out.push(partial);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let (values, tail_bound) = if covered {
        (rows.into_iter().map(|r| r[0]).collect(), 0.0)
    } else {
        let mut tail: f64 = 0.0;
        let values = rows
            .into_iter()
            .map(|r| {
                let coarse = 2.0 * r[1] - r[0];
                let fine = 2.0 * r[2] - r[1];
                let best = (4.0 * fine - coarse) / 3.0;
                tail = tail.max((best - fine).norm());
                best
            })
            .collect();
        (values, tail)
    };
    Ok(PeriodizationProfile {
        per_unit,
        values,
        truncation_n_max: n_max,
        tail_bound,
        extrapolated: !covered,
    })
}

pub const BIORTHOGONAL: &str = "biorthogonal_translates";

/// Entry for `S ≡ target`; pass iff the deviation is within `tol + tail_bound`.
pub fn periodization_entry(
    name: &str,
    anchor: &str,
    profile: &PeriodizationProfile,
    target: Complex64,
    tol: f64,
) -> crate::report::ConditionEntry {
    crate::report::ConditionEntry::new(
        name,
        anchor,
        profile.max_deviation_from(target),
        tol + profile.tail_bound,
    )
    .with_truncation(serde_json::json!({
        "n_max": profile.truncation_n_max,
        "tail_bound": profile.tail_bound,
        "extrapolated": profile.extrapolated,
        "base_step": 1.0 / profile.per_unit as f64,
    }))
    .with_parameters(serde_json::json!({ "base_tolerance": tol }))
}

/// Checks that the translates of `f` and `g` are biorthogonal (`S ≡ 1`).
pub fn check_biorthogonal(
    s: &Spectrum,
    f: &SampledFunction,
    g: &SampledFunction,
    n_max: i64,
    tol: f64,
) -> Result<crate::report::ConditionEntry> {
    let p = periodize(s, f, g, n_max)?;
    Ok(periodization_entry(
        BIORTHOGONAL,
        "translate biorthogonality: periodization of f̂·conj(ĝ) is 1",
        &p,
        Complex64::new(1.0, 0.0),
        tol,
    ))
}

/// Extremes of `Σ_λ |f̂(ξ+λ)|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RieszBounds {
    pub lower: f64,
    pub upper: f64,
}

impl RieszBounds {
    pub fn from_profile(p: &PeriodizationProfile) -> Self {
        let lower = p.values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min).max(0.0);
        let upper = p.values.iter().map(|z| z.re).fold(0.0, f64::max);
        RieszBounds { lower, upper }
    }
}

pub fn riesz_bounds(s: &Spectrum, f: &SampledFunction, n_max: i64) -> Result<RieszBounds> {
    Ok(RieszBounds::from_profile(&periodize(s, f, f, n_max)?))
}

fn lower_bound_is_zero(b: &RieszBounds) -> bool {
    b.lower <= 1e-12 * b.upper.max(1.0)
}

/// `f̂ / Σ_λ|f̂(·+λ)|²`, whose translates are biorthogonal to those of `f`.
pub fn dual_by_normalization(s: &Spectrum, f: &SampledFunction, n_max: i64) -> Result<SampledFunction> {
    let p = periodize(s, f, f, n_max)?;
    let bounds = RieszBounds::from_profile(&p);
    if lower_bound_is_zero(&bounds) {
        return Err(Error::LowerBoundZero(bounds.lower));
    }
    let grid = f.grid;
    Ok(SampledFunction::from_offsets(grid, |m| {
        f.at_offset(m) / p.at_offset(m).re
    }))
}

/// `(A·E, ‖Σ h_λ f(·−λ)‖², B·E)` with `E = ∫_Γ |ĥ|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanNormSandwich {
    pub lhs: f64,
    pub mid: f64,
    pub rhs: f64,
    pub energy: f64,
    pub bounds: RieszBounds,
}

/// `ĥ(ξ) = Σ h_λ e^{−2πiλξ}` at the grid offset `m`, with exact phases.
pub fn coefficient_symbol(
    s: &Spectrum,
    coeffs: &BTreeMap<TranslationIndex, Complex64>,
    per_unit: i64,
    offset: i64,
) -> Complex64 {
    let den = (s.N() as i128) * per_unit as i128;
    coeffs
        .iter()
        .map(|(idx, h)| h * phase_ratio(-(s.lambda_numer(*idx) as i128) * offset as i128, den))
        .sum()
}

pub fn span_norm_sandwich(
    s: &Spectrum,
    f: &SampledFunction,
    coeffs: &BTreeMap<TranslationIndex, Complex64>,
    n_max: i64,
) -> Result<SpanNormSandwich> {
    let bounds = riesz_bounds(s, f, n_max)?;
    let grid = f.grid;
    let ppu = grid.per_unit;
    let h = grid.step();
    // Riemann sum over the aligned points of Γ
    let half = ppu / 2;
    let gamma_points: Vec<i64> =
        (0..half).chain(s.N() * ppu / 2..(s.N() + 1) * ppu / 2).collect();
    let energy = ordered_sum(gamma_points.len(), |i| {
        Complex64::new(coefficient_symbol(s, coeffs, ppu, gamma_points[i]).norm_sqr() * h, 0.0)
    })
    .re;
    let mid = match f.nonzero {
        None => 0.0,
        Some((lo, hi)) => {
            ordered_sum(hi - lo + 1, |i| {
                let j = lo + i;
                let sym = coefficient_symbol(s, coeffs, ppu, grid.offset(j));
                Complex64::new(grid.weight(j) * f.samples[j].norm_sqr() * sym.norm_sqr(), 0.0)
            })
            .re
        }
    };
    Ok(SpanNormSandwich {
        lhs: bounds.lower * energy,
        mid,
        rhs: bounds.upper * energy,
        energy,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn n2() -> Spectrum {
        Spectrum::new(2, 1).unwrap()
    }

    fn gamma(s: &Spectrum, grid: Grid) -> SampledFunction {
        SampledFunction::sample(grid, &GammaIndicator(*s)).unwrap()
    }

    #[test]
    fn grid_rejects_misaligned_step() {
        assert!(matches!(Grid::new(8.0, 0.3), Err(Error::StepNotAligned(_))));
        assert!(matches!(Grid::new(1.3, 0.5), Err(Error::StepNotAligned(_))));
        let g = Grid::new(8.0, 1.0 / 512.0).unwrap();
        assert_eq!(g.len(), 2 * 8 * 512 + 1);
        assert_eq!(g.xi(0), -8.0);
        assert_eq!(g.xi(g.len() - 1), 8.0);
    }

    #[test]
    fn gamma_has_unit_norm() {
        let s = n2();
        let grid = Grid::new(4.0, 1.0 / 512.0).unwrap();
        let f = gamma(&s, grid);
        let ip = inner_product(&f, &f).unwrap();
        assert!((ip.re - 1.0).abs() <= 2.0 * grid.step());
        assert_eq!(ip.re, 1.0);
    }

    #[test]
    fn zero_inner_product() {
        let grid = Grid::new(2.0, 0.25).unwrap();
        let z = SampledFunction::zeros(grid);
        let f = SampledFunction::from_fn(grid, |x| Complex64::new(x, 1.0));
        assert_eq!(inner_product(&z, &f).unwrap(), c(0.0));
    }

    #[test]
    fn grid_mismatch() {
        let a = SampledFunction::zeros(Grid::new(2.0, 0.25).unwrap());
        let b = SampledFunction::zeros(Grid::new(2.0, 0.125).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch)));
        assert!(matches!(periodize(&n2(), &a, &b, 2), Err(Error::GridMismatch)));
    }

    #[test]
    fn gamma_tiles_for_n2() {
        let s = n2();
        let grid = Grid::new(4.0, 1.0 / 64.0).unwrap();
        let f = gamma(&s, grid);
        let p = periodize(&s, &f, &f, default_n_max(&grid)).unwrap();
        assert_eq!(p.tail_bound, 0.0);
        assert_eq!(p.max_deviation_from(c(1.0)), 0.0);
        let b = RieszBounds::from_profile(&p);
        assert_eq!((b.lower, b.upper), (1.0, 1.0));
    }

    #[test]
    fn misaligned_step_rejected() {
        let s = Spectrum::new(3, 1).unwrap();
        let f = SampledFunction::zeros(Grid::new(4.0, 1.0 / 8.0).unwrap());
        assert!(matches!(periodize(&s, &f, &f, 2), Err(Error::StepNotAligned(_))));
    }

    #[test]
    fn short_truncation_reports_tail() {
        let s = n2();
        let grid = Grid::new(8.0, 1.0 / 16.0).unwrap();
        let f = SampledFunction::from_fn(grid, |x| c((-x.abs()).exp()));
        let p = periodize(&s, &f, &f, 1).unwrap();
        assert!(p.tail_bound > 0.0);
        let full = periodize(&s, &f, &f, default_n_max(&grid)).unwrap();
        assert_eq!(full.tail_bound, 0.0);
        for (a, b) in p.values.iter().zip(&full.values) {
            assert!((a - b).norm() <= p.tail_bound + 1e-15);
        }
    }

    #[test]
    fn biorthogonality_examples() {
        let s = n2();
        let grid = Grid::new(4.0, 1.0 / 64.0).unwrap();
        let f = gamma(&s, grid);
        let nm = default_n_max(&grid);
        let ok = check_biorthogonal(&s, &f, &f, nm, 1e-12).unwrap();
        assert!(ok.pass);
        let twice = check_biorthogonal(&s, &f, &f.scale(c(2.0)), nm, 1e-12).unwrap();
        assert!(!twice.pass);
        assert_eq!(twice.max_deviation, 1.0);
        let quarter = SampledFunction::sample(grid, &IntervalIndicator::new(vec![(0.0, 0.25)])).unwrap();
        assert!(!check_biorthogonal(&s, &f, &quarter, nm, 1e-12).unwrap().pass);
    }

    #[test]
    fn riesz_scaling_and_gaps() {
        let s = n2();
        let grid = Grid::new(4.0, 1.0 / 64.0).unwrap();
        let f = gamma(&s, grid);
        let nm = default_n_max(&grid);
        let b = riesz_bounds(&s, &f.scale(c(2.0)), nm).unwrap();
        assert_eq!((b.lower, b.upper), (4.0, 4.0));
        let quarter = SampledFunction::sample(grid, &IntervalIndicator::new(vec![(0.0, 0.25)])).unwrap();
        assert_eq!(riesz_bounds(&s, &quarter, nm).unwrap().lower, 0.0);
        assert!(matches!(
            dual_by_normalization(&s, &quarter, nm),
            Err(Error::LowerBoundZero(_))
        ));
    }

    #[test]
    fn dual_examples() {
        let s = n2();
        let grid = Grid::new(4.0, 1.0 / 64.0).unwrap();
        let f = gamma(&s, grid);
        let nm = default_n_max(&grid);
        assert_eq!(dual_by_normalization(&s, &f, nm).unwrap(), f);
        let d = dual_by_normalization(&s, &f.scale(c(2.0)), nm).unwrap();
        assert_eq!(d, f.scale(c(0.5)));
    }

    #[test]
    fn sandwich_examples() {
        let s = n2();
        let grid = Grid::new(4.0, 1.0 / 64.0).unwrap();
        let f = gamma(&s, grid);
        let nm = default_n_max(&grid);
        let mut h = BTreeMap::new();
        let zero = span_norm_sandwich(&s, &f, &h, nm).unwrap();
        assert_eq!((zero.lhs, zero.mid, zero.rhs), (0.0, 0.0, 0.0));
        h.insert(TranslationIndex::new(0, 0), c(1.0));
        let one = span_norm_sandwich(&s, &f, &h, nm).unwrap();
        assert_abs_diff_eq!(one.energy, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(one.lhs, one.mid, epsilon = 1e-9);
        assert_abs_diff_eq!(one.rhs, one.mid, epsilon = 1e-9);
    }

    #[test]
    fn json_and_binary_round_trip() {
        let grid = Grid::new(1.0, 0.125).unwrap();
        let f = SampledFunction::from_fn(grid, |x| Complex64::new(x.sin(), x * 0.1));
        let text = f.to_json().unwrap();
        assert_eq!(SampledFunction::from_json(&text).unwrap(), f);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(SampledFunction::read_binary(&buf[..]).unwrap(), f);
        assert!(SampledFunction::read_binary(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn extrapolated_periodization_of_decaying_profile() {
        // Σ_k sinc²(π(ξ+k)) = 1
        let s = Spectrum::classical();
        struct Bump;
        impl Profile for Bump {
            fn eval(&self, xi: f64) -> Result<Complex64> {
                let t = (std::f64::consts::PI * xi).sin();
                let d = std::f64::consts::PI * xi;
                Ok(Complex64::new(if xi == 0.0 { 1.0 } else { t / d }, 0.0))
            }
        }
        let p = periodize_profiles(&s, &Bump, &Bump, 16, 256).unwrap();
        assert!(p.extrapolated);
        let dev = p.max_deviation_from(c(1.0));
        assert!(dev < 1e-7, "{dev}");
        assert!(dev <= p.tail_bound);
        assert!(matches!(
            periodize_profiles(&s, &Bump, &Bump, 16, 6),
            Err(Error::InvalidArgument(_))
        ));
    }
}
