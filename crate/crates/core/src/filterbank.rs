//! Masks, the `2N × 2N` modulation matrix, and the perfect-reconstruction check.
//!
//! Row `ℓ` of the modulation matrix at `ξ` holds `m_ℓ(ξ/(2N) + s/2)` for
//! `s = 0, …, 2N−1`. The half-unit offsets are the `2N` shifts that separate
//! the characters of `Λ`: `e^{−2πiλ·s/2}` runs over all `2N`-th roots of unity
//! as `λ` moves between the two cosets.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::freqfield::{GammaIndicator, Grid, SampledFunction};
use crate::report::ConditionEntry;
use crate::spectrum::{Spectrum, TranslationIndex};

const ALIGN_TOL: f64 = 1e-9;

/// `m(ξ) = Σ_λ a_λ e^{−2πiλξ}` over finitely many `λ ∈ Λ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigPoly {
    pub coeffs: BTreeMap<TranslationIndex, Complex64>,
}

impl TrigPoly {
    pub fn new(coeffs: BTreeMap<TranslationIndex, Complex64>) -> Self {
        TrigPoly { coeffs }
    }

    pub fn from_pairs<I: IntoIterator<Item = ((u8, i64), Complex64)>>(pairs: I) -> Self {
        let coeffs = pairs.into_iter().map(|((k, n), a)| (TranslationIndex::new(k, n), a)).collect();
        TrigPoly { coeffs }
    }

    pub fn evaluate(&self, s: &Spectrum, xi: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(idx, a)| {
                let t = s.lambda_numer(*idx) as f64 * xi / s.N() as f64;
                let frac = t - t.floor();
                a * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * frac)
            })
            .sum()
    }
}

/// Samples of a periodic function on `period / step` equispaced points.
///
/// With `hold` the function is piecewise constant on the cells
/// `[i·step, (i+1)·step)` and can be queried anywhere; otherwise queries must
/// land on sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPeriodic {
    period: f64,
    step: f64,
    samples: Vec<Complex64>,
    hold: bool,
}

impl SampledPeriodic {
    pub fn new(period: f64, step: f64, samples: Vec<Complex64>, hold: bool) -> Result<Self> {
        if !(period > 0.0 && step > 0.0) {
            return Err(Error::InvalidArgument("period and step must be positive".into()));
        }
        let count = period / step;
        if (count - count.round()).abs() > ALIGN_TOL * count.max(1.0)
            || count.round() as usize != samples.len()
        {
            return Err(Error::InvalidArgument(format!(
                "period/step = {count} does not match {} samples",
                samples.len()
            )));
        }
        Ok(SampledPeriodic { period, step, samples, hold })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn hold(&self) -> bool {
        self.hold
    }

    pub fn evaluate(&self, xi: f64) -> Result<Complex64> {
        let t = xi / self.step;
        let nearest = t.round();
        let cell = if (t - nearest).abs() <= ALIGN_TOL * nearest.abs().max(1.0) {
            nearest
        } else if self.hold {
            t.floor()
        } else {
            return Err(Error::UnalignedQuery(xi));
        };
        let len = self.samples.len() as i64;
        Ok(self.samples[(cell as i64).rem_euclid(len) as usize])
    }
}

/// A mask `m_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub enum PeriodicFunction {
    TrigPoly(TrigPoly),
    Sampled(SampledPeriodic),
}

impl PeriodicFunction {
    pub fn evaluate(&self, s: &Spectrum, xi: f64) -> Result<Complex64> {
        match self {
            PeriodicFunction::TrigPoly(p) => Ok(p.evaluate(s, xi)),
            PeriodicFunction::Sampled(p) => p.evaluate(xi),
        }
    }

    pub fn zero() -> Self {
        PeriodicFunction::TrigPoly(TrigPoly::default())
    }
}

pub fn evaluate_mask(m: &PeriodicFunction, s: &Spectrum, xi: f64) -> Result<Complex64> {
    m.evaluate(s, xi)
}

fn number_string(x: f64) -> String {
    format!("{x}")
}

/// Accepts JSON numbers, decimal strings and `p/q` strings.
fn parse_number(v: &serde_json::Value) -> std::result::Result<f64, String> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| format!("bad number {n}")),
        serde_json::Value::String(s) => {
            let s = s.trim();
            if let Some((p, q)) = s.split_once('/') {
                let p: f64 = p.trim().parse().map_err(|_| format!("bad rational {s:?}"))?;
                let q: f64 = q.trim().parse().map_err(|_| format!("bad rational {s:?}"))?;
                Ok(p / q)
            } else {
                s.parse().map_err(|_| format!("bad decimal {s:?}"))
            }
        }
        other => Err(format!("expected a number, got {other}")),
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffRecord {
    k: u8,
    n: i64,
    re: serde_json::Value,
    #[serde(default = "zero_value")]
    im: serde_json::Value,
}

fn zero_value() -> serde_json::Value {
    serde_json::Value::from(0)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum MaskRecord {
    Trigpoly {
        coeffs: Vec<CoeffRecord>,
    },
    Sampled {
        period: f64,
        step: f64,
        samples: Vec<[f64; 2]>,
        #[serde(default)]
        hold: bool,
    },
}

impl Serialize for PeriodicFunction {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rec = match self {
            PeriodicFunction::TrigPoly(p) => MaskRecord::Trigpoly {
                coeffs: p
                    .coeffs
                    .iter()
                    .map(|(idx, a)| CoeffRecord {
                        k: idx.k,
                        n: idx.n,
                        re: number_string(a.re).into(),
                        im: number_string(a.im).into(),
                    })
                    .collect(),
            },
            PeriodicFunction::Sampled(p) => MaskRecord::Sampled {
                period: p.period,
                step: p.step,
                samples: p.samples.iter().map(|z| [z.re, z.im]).collect(),
                hold: p.hold,
            },
        };
        rec.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PeriodicFunction {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match MaskRecord::deserialize(de)? {
            MaskRecord::Trigpoly { coeffs } => {
                let mut map = BTreeMap::new();
                for c in coeffs {
                    if c.k > 1 {
                        return Err(D::Error::custom(format!("coefficient k must be 0 or 1 (got {})", c.k)));
                    }
                    let re = parse_number(&c.re).map_err(D::Error::custom)?;
                    let im = parse_number(&c.im).map_err(D::Error::custom)?;
                    *map.entry(TranslationIndex::new(c.k, c.n)).or_insert(Complex64::new(0.0, 0.0)) +=
                        Complex64::new(re, im);
                }
                Ok(PeriodicFunction::TrigPoly(TrigPoly::new(map)))
            }
            MaskRecord::Sampled { period, step, samples, hold } => {
                let samples = samples.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
                SampledPeriodic::new(period, step, samples, hold)
                    .map(PeriodicFunction::Sampled)
                    .map_err(D::Error::custom)
            }
        }
    }
}

/// Synthesis masks `m_0 … m_{2N−1}` and analysis masks `m̃_0 … m̃_{2N−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    spectrum: Spectrum,
    analysis: Vec<PeriodicFunction>,
    synthesis: Vec<PeriodicFunction>,
}

#[derive(Serialize, Deserialize)]
struct RawSpectrum {
    #[serde(rename = "N")]
    n: i64,
    r: i64,
}

#[derive(Serialize, Deserialize)]
struct BankFile {
    spectrum: RawSpectrum,
    synthesis: Vec<PeriodicFunction>,
    /// Missing means the bank is self-dual.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    analysis: Option<Vec<PeriodicFunction>>,
}

impl FilterBank {
    pub fn new(
        spectrum: Spectrum,
        analysis: Vec<PeriodicFunction>,
        synthesis: Vec<PeriodicFunction>,
    ) -> Result<Self> {
        let expected = spectrum.channels();
        for side in [&analysis, &synthesis] {
            if side.len() != expected {
                return Err(Error::WrongChannelCount { expected, got: side.len() });
            }
        }
        Ok(FilterBank { spectrum, analysis, synthesis })
    }

    pub fn self_dual(spectrum: Spectrum, masks: Vec<PeriodicFunction>) -> Result<Self> {
        FilterBank::new(spectrum, masks.clone(), masks)
    }

    pub fn spectrum(&self) -> Spectrum {
        self.spectrum
    }

    pub fn analysis(&self) -> &[PeriodicFunction] {
        &self.analysis
    }

    pub fn synthesis(&self) -> &[PeriodicFunction] {
        &self.synthesis
    }

    pub fn is_self_dual(&self) -> bool {
        self.analysis == self.synthesis
    }

    /// Analysis and synthesis exchanged.
    pub fn swapped(&self) -> Self {
        FilterBank {
            spectrum: self.spectrum,
            analysis: self.synthesis.clone(),
            synthesis: self.analysis.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BankFile = serde_json::from_str(text)?;
        let spectrum = Spectrum::new(file.spectrum.n, file.spectrum.r)?;
        let analysis = file.analysis.unwrap_or_else(|| file.synthesis.clone());
        FilterBank::new(spectrum, analysis, file.synthesis)
    }

    pub fn load(path: &Path) -> Result<Self> {
        FilterBank::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = BankFile {
            spectrum: RawSpectrum { n: self.spectrum.N(), r: self.spectrum.r() },
            synthesis: self.synthesis.clone(),
            analysis: if self.is_self_dual() { None } else { Some(self.analysis.clone()) },
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::from_str(&self.to_json().expect("bank serializes")).expect("valid json")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = Sha256::digest(self.to_json().expect("bank serializes").as_bytes());
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `M(ξ)` with entries `m_ℓ(ξ/(2N) + s/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationMatrix {
    pub at: f64,
    pub dim: usize,
    pub entries: Vec<Complex64>,
}

impl ModulationMatrix {
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// `self · conj(other)ᵀ`.
    pub fn times_adjoint(&self, other: &ModulationMatrix) -> Vec<Complex64> {
        let d = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|s| self.get(i, s) * other.get(j, s).conj()).sum();
            }
        }
        out
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> Complex64 {
        let d = self.dim;
        let mut a = self.entries.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&x, &y| a[x * d + col].norm().total_cmp(&a[y * d + col].norm()))
                .expect("nonempty");
            if a[pivot * d + col].norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if pivot != col {
                for c in 0..d {
                    a.swap(pivot * d + c, col * d + c);
                }
                det = -det;
            }
            let p = a[col * d + col];
            det *= p;
            for row in col + 1..d {
                let factor = a[row * d + col] / p;
                for c in col..d {
                    let v = a[col * d + c];
                    a[row * d + c] -= factor * v;
                }
            }
        }
        det
    }
}

pub fn modulation_matrix(side: &[PeriodicFunction], s: &Spectrum, xi: f64) -> Result<ModulationMatrix> {
    let dim = s.channels();
    if side.len() != dim {
        return Err(Error::WrongChannelCount { expected: dim, got: side.len() });
    }
    let base = xi / s.dilation() as f64;
    let mut entries = Vec::with_capacity(dim * dim);
    for m in side {
        for col in 0..dim {
            entries.push(m.evaluate(s, base + col as f64 / 2.0)?);
        }
    }
    Ok(ModulationMatrix { at: xi, dim, entries })
}

/// Outcome of the perfect-reconstruction check.
#[derive(Debug, Clone)]
pub struct PrCheck {
    pub entry: ConditionEntry,
    pub min_abs_det: f64,
    /// Point where the deviation peaks.
    pub worst_xi: f64,
}

pub const PERFECT_RECONSTRUCTION: &str = "perfect_reconstruction";

/// `max |M(ξ)·conj(M̃(ξ))ᵀ − I|` over the given points.
pub fn check_pr(bank: &FilterBank, grid: &[f64], tol: f64) -> Result<PrCheck> {
    let s = bank.spectrum;
    let rows = grid
        .par_iter()
        .map(|&xi| -> Result<(f64, f64)> {
            let m = modulation_matrix(&bank.synthesis, &s, xi)?;
            let mt = modulation_matrix(&bank.analysis, &s, xi)?;
            let prod = m.times_adjoint(&mt);
            let d = m.dim;
            let dev = prod
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    let target = if i / d == i % d { 1.0 } else { 0.0 };
                    (z - target).norm()
                })
                .fold(0.0, f64::max);
            Ok((dev, m.det().norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0;
    let mut worst_xi = grid.first().copied().unwrap_or(0.0);
    let mut min_det = f64::INFINITY;
    for (xi, (dev, det)) in grid.iter().zip(&rows) {
        if *dev > worst || dev.is_nan() {
            worst = *dev;
            worst_xi = *xi;
        }
        min_det = min_det.min(*det);
    }
    let entry = ConditionEntry::new(
        PERFECT_RECONSTRUCTION,
        "modulation matrices satisfy M(ξ)·conj(M̃(ξ))ᵀ = I",
        worst,
        tol,
    )
    .with_parameters(serde_json::json!({ "points": grid.len() }))
    .with_values(serde_json::json!({ "min_abs_det": min_det, "worst_xi": worst_xi }));
    Ok(PrCheck { entry, min_abs_det: min_det, worst_xi })
}

/// `ξ = i / per_unit` over one period `[0, 2N²)` of the modulation matrix.
pub fn pr_grid(s: &Spectrum, per_unit: i64) -> Vec<f64> {
    let period = 2 * s.N() * s.N();
    (0..period * per_unit).map(|i| i as f64 / per_unit as f64).collect()
}

/// `max |φ̂(ξ) − m₀(ξ/2N)·φ̂(ξ/2N)|` over the grid points whose quotient by
/// `2N` is again a grid point.
pub fn refinement_residual(phi: &SampledFunction, m0: &PeriodicFunction, s: &Spectrum) -> Result<f64> {
    let grid = phi.grid();
    if !grid.is_aligned_for(s) {
        return Err(Error::StepNotAligned(format!(
            "step 1/{} must divide 1/(4N) = 1/{}",
            grid.per_unit(),
            4 * s.N()
        )));
    }
    let d = s.dilation();
    let h = grid.half_points();
    let offsets: Vec<i64> = (-(h / d)..=(h / d)).map(|q| q * d).collect();
    let devs = offsets
        .par_iter()
        .map(|&m| -> Result<f64> {
            let coarse = m / d;
            let mask = m0.evaluate(s, coarse as f64 / grid.per_unit() as f64)?;
            Ok((phi.at_offset(m) - mask * phi.at_offset(coarse)).norm())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

/// Cell-to-channel assignment of the Shannon-type bank.
///
/// Masks have period `N` and are constant on the `4N²` cells of width
/// `1/(4N)`. Cells `b + 2N·s` (`s = 0, …, 2N−1`) form the fiber of `b`; each
/// channel owns exactly one cell per fiber, so every modulation matrix is a
/// permutation matrix. The two cells of each fiber that lie in `Γ` are fixed
/// by the refinement relation for `𝟙_Γ`; the rest are filled in order.
pub fn shannon_cells(s: &Spectrum) -> Vec<usize> {
    let n = s.N() as usize;
    let two_n = 2 * n;
    let cells = 4 * n * n;
    let mut owner = vec![usize::MAX; cells];
    for b in 0..two_n {
        let low = b;
        let high = 2 * n * n + b;
        let (low_ch, high_ch) = (if b % n == 0 { 0 } else { b % n }, n + b % n);
        owner[low] = low_ch;
        owner[high] = high_ch;
        let mut free_channels = (0..two_n).filter(|&c| c != low_ch && c != high_ch);
        for step in 0..two_n {
            let cell = b + two_n * step;
            if cell != low && cell != high {
                owner[cell] = free_channels.next().expect("one channel per free cell");
            }
        }
    }
    owner
}

/// Self-dual indicator bank whose scaling function is `𝟙_Γ`.
pub fn shannon_bank(s: &Spectrum) -> FilterBank {
    let n = s.N();
    let owner = shannon_cells(s);
    let masks = (0..s.channels())
        .map(|ch| {
            let samples = owner
                .iter()
                .map(|&o| Complex64::new(if o == ch { 1.0 } else { 0.0 }, 0.0))
                .collect();
            PeriodicFunction::Sampled(
                SampledPeriodic::new(n as f64, 1.0 / (4 * n) as f64, samples, true)
                    .expect("cell count matches"),
            )
        })
        .collect();
    FilterBank::self_dual(*s, masks).expect("2N masks")
}

/// The Shannon-type bank with `φ̂ = φ̃̂ = 𝟙_Γ` sampled on `grid`.
pub fn shannon_system(s: &Spectrum, grid: Grid) -> Result<(FilterBank, SampledFunction, SampledFunction)> {
    let phi = SampledFunction::sample(grid, &GammaIndicator(*s))?;
    Ok((shannon_bank(s), phi.clone(), phi))
}

/// The orthonormal Haar bank for `N = 1`.
pub fn haar_bank() -> FilterBank {
    let half = Complex64::new(0.5, 0.0);
    let m0 = TrigPoly::from_pairs([((0, 0), half), ((1, 0), half)]);
    let m1 = TrigPoly::from_pairs([((0, 0), half), ((1, 0), -half)]);
    FilterBank::self_dual(
        Spectrum::classical(),
        vec![PeriodicFunction::TrigPoly(m0), PeriodicFunction::TrigPoly(m1)],
    )
    .expect("two masks")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-15
    }

    #[test]
    fn haar_lowpass_values() {
        let s = Spectrum::classical();
        let m0 = &haar_bank().synthesis()[0].clone();
        assert!(close(m0.evaluate(&s, 0.0).unwrap(), Complex64::new(1.0, 0.0)));
        assert!(close(m0.evaluate(&s, 0.5).unwrap(), Complex64::new(0.0, 0.0)));
        assert!(close(m0.evaluate(&s, 0.25).unwrap(), Complex64::new(0.5, -0.5)));
    }

    #[test]
    fn haar_matrix_at_zero_is_identity() {
        let s = Spectrum::classical();
        let m = modulation_matrix(haar_bank().synthesis(), &s, 0.0).unwrap();
        assert!(close(m.get(0, 0), Complex64::new(1.0, 0.0)));
        assert!(close(m.get(0, 1), Complex64::new(0.0, 0.0)));
        assert!(close(m.get(1, 0), Complex64::new(0.0, 0.0)));
        assert!(close(m.get(1, 1), Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn zero_masks_give_zero_matrix() {
        let s = Spectrum::new(2, 1).unwrap();
        let side = vec![PeriodicFunction::zero(); 4];
        let m = modulation_matrix(&side, &s, 0.3).unwrap();
        assert!(m.entries.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert_eq!(m.det(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn wrong_channel_count() {
        let s = Spectrum::new(2, 1).unwrap();
        assert!(matches!(
            modulation_matrix(&[PeriodicFunction::zero()], &s, 0.0),
            Err(Error::WrongChannelCount { expected: 4, got: 1 })
        ));
        assert!(FilterBank::self_dual(s, vec![PeriodicFunction::zero(); 3]).is_err());
    }

    #[test]
    fn haar_and_shannon_pass_pr() {
        let haar = haar_bank();
        let pr = check_pr(&haar, &pr_grid(&haar.spectrum(), 64), 1e-12).unwrap();
        assert!(pr.entry.pass, "{}", pr.entry.max_deviation);
        assert!(pr.min_abs_det >= 1.0 - 2.0 * 1e-12);
        for (n, r) in [(1, 1), (2, 1), (2, 3), (3, 1), (4, 3)] {
            let s = Spectrum::new(n, r).unwrap();
            let bank = shannon_bank(&s);
            let pr = check_pr(&bank, &pr_grid(&s, 8 * n), 1e-12).unwrap();
            assert_eq!(pr.entry.max_deviation, 0.0, "N={n}");
        }
    }

    #[test]
    fn duplicate_mask_fails_pr() {
        let haar = haar_bank();
        let m0 = haar.synthesis()[0].clone();
        let bad = FilterBank::self_dual(haar.spectrum(), vec![m0.clone(), m0]).unwrap();
        let pr = check_pr(&bad, &pr_grid(&bad.spectrum(), 16), 1e-12).unwrap();
        assert!(!pr.entry.pass);
        assert!(pr.min_abs_det < 1e-12);
    }

    #[test]
    fn shannon_n2_cells() {
        let s = Spectrum::new(2, 1).unwrap();
        let owner = shannon_cells(&s);
        let cells_of = |ch: usize| -> Vec<usize> {
            owner.iter().enumerate().filter(|(_, &o)| o == ch).map(|(i, _)| i).collect()
        };
        assert_eq!(cells_of(0), vec![0, 2, 5, 7]);
        assert_eq!(cells_of(1), vec![1, 3, 4, 6]);
        assert_eq!(cells_of(2), vec![8, 10, 13, 15]);
        assert_eq!(cells_of(3), vec![9, 11, 12, 14]);
    }

    #[test]
    fn sampled_mask_alignment() {
        let m = SampledPeriodic::new(1.0, 0.25, vec![Complex64::new(1.0, 0.0); 4], false).unwrap();
        assert!(m.evaluate(0.75).is_ok());
        assert!(matches!(m.evaluate(0.3), Err(Error::UnalignedQuery(_))));
        let held = SampledPeriodic::new(1.0, 0.25, vec![Complex64::new(1.0, 0.0); 4], true).unwrap();
        assert!(held.evaluate(0.3).is_ok());
    }

    #[test]
    fn shannon_refinement_and_wrong_lowpass() {
        let s = Spectrum::new(2, 1).unwrap();
        let grid = Grid::new(8.0, 1.0 / 64.0).unwrap();
        let (bank, phi, _) = shannon_system(&s, grid).unwrap();
        assert_eq!(refinement_residual(&phi, &bank.synthesis()[0], &s).unwrap(), 0.0);
        let one = PeriodicFunction::TrigPoly(TrigPoly::from_pairs([((0, 0), Complex64::new(1.0, 0.0))]));
        assert!(refinement_residual(&phi, &one, &s).unwrap() > 0.9);
        let zero = SampledFunction::zeros(grid);
        assert_eq!(refinement_residual(&zero, &one, &s).unwrap(), 0.0);
    }

    #[test]
    fn bank_json_round_trip() {
        let haar = haar_bank();
        let text = haar.to_json().unwrap();
        assert_eq!(FilterBank::from_json(&text).unwrap(), haar);
        let s = Spectrum::new(2, 1).unwrap();
        let sh = shannon_bank(&s);
        assert_eq!(FilterBank::from_json(&sh.to_json().unwrap()).unwrap(), sh);
        assert_eq!(haar.digest().len(), 64);
    }

    #[test]
    fn bank_file_accepts_rationals_and_reports_bad_spectrum() {
        let text = r#"{"spectrum":{"N":1,"r":1},"synthesis":[
            {"type":"trigpoly","coeffs":[{"k":0,"n":0,"re":"1/2"},{"k":1,"n":0,"re":0.5}]},
            {"type":"trigpoly","coeffs":[{"k":0,"n":0,"re":"0.5"},{"k":1,"n":0,"re":"-1/2"}]}]}"#;
        assert_eq!(FilterBank::from_json(text).unwrap(), haar_bank());
        let bad = text.replace(r#""r":1"#, r#""r":2"#);
        assert!(matches!(FilterBank::from_json(&bad), Err(Error::Spectrum(_))));
    }

    #[test]
    fn trig_poly_half_shift_structure() {
        let s = Spectrum::new(3, 5).unwrap();
        let a = Complex64::new(0.3, -0.2);
        let b = Complex64::new(-0.7, 0.4);
        let p = TrigPoly::from_pairs([((0, 1), a), ((1, -1), b)]);
        let xi = 0.137;
        let m1 = |x: f64| a * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * 2.0 * x);
        let m2 = |x: f64| b * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (5.0 / 3.0 - 2.0) * x);
        // the k = 0 part is 1/2-periodic, the k = 1 part picks up e^{−πir/N}
        let shifted = p.evaluate(&s, xi + 0.5);
        let expected = m1(xi) + m2(xi) * Complex64::from_polar(1.0, -std::f64::consts::PI * 5.0 / 3.0);
        assert_abs_diff_eq!(shifted.re, expected.re, epsilon = 1e-13);
        assert_abs_diff_eq!(shifted.im, expected.im, epsilon = 1e-13);
    }
}
