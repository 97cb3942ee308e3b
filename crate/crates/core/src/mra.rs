//! Wavelet atoms, projections, decomposition identities and frame estimates.
//!
//! Atom `(ℓ, j, λ)` has transform `(2N)^{−j/2} ψ̂_ℓ((2N)^{−j}ξ) e^{−2πiλ(2N)^{−j}ξ}`
//! with `ψ̂_0 = φ̂`. Coefficients are computed after the substitution
//! `ξ = (2N)^j η`:
//!
//! `⟨f, ψ_{ℓ,j,λ}⟩ = (2N)^{j/2} ∫ f̂((2N)^j η) conj(ψ̂_ℓ(η)) e^{2πiλη} dη`,
//!
//! so every level is integrated on the same `η` grid and the phases are exact
//! rationals of the grid offset.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeProfile, WaveletProfile};
use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::freqfield::{inner_product, Grid, Profile, SampledFunction};
use crate::spectrum::{phase_ratio, Spectrum, TranslationIndex};

const CHUNK: usize = 2048;

/// For `|ψ̂|² ~ η^{−2}` the mass beyond `Ω` is three times the mass on
/// `[0.75Ω, Ω]`; a further factor 4 covers error growth through products
/// and sums of coefficients.
pub const TAIL_SLACK_FACTOR: f64 = 12.0;

/// Which family an atom belongs to: `ψ` (synthesis) or `ψ̃` (analysis).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Synthesis,
    Analysis,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Synthesis => Side::Analysis,
            Side::Analysis => Side::Synthesis,
        }
    }

    fn index(self) -> usize {
        match self {
            Side::Synthesis => 0,
            Side::Analysis => 1,
        }
    }
}

/// `ψ_{ℓ,j,λ}`; channel 0 is the scaling function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub channel: usize,
    pub level: i32,
    pub translation: TranslationIndex,
}

impl Atom {
    pub fn new(channel: usize, level: i32, translation: TranslationIndex) -> Self {
        Atom { channel, level, translation }
    }
}

/// Translations `k ∈ {0,1}`, `|n| ≤ w`, ordered by `k` then `n`.
pub fn window_translations(w: i64) -> Vec<TranslationIndex> {
    (0..=1u8).flat_map(|k| (-w..=w).map(move |n| TranslationIndex::new(k, n))).collect()
}

fn window_len(w: i64) -> usize {
    (2 * (2 * w + 1)) as usize
}

fn window_slot(w: i64, idx: TranslationIndex) -> Option<usize> {
    if idx.n.abs() > w {
        return None;
    }
    Some(idx.k as usize * (2 * w + 1) as usize + (idx.n + w) as usize)
}

fn pow_i128(base: i64, exp: u32) -> i128 {
    (base as i128).pow(exp)
}

/// `(2N)^{−j/2}`.
fn level_amplitude(s: &Spectrum, level: i32) -> f64 {
    (s.dilation() as f64).powf(-level as f64 / 2.0)
}

/// `ξ_m / (2N)^j` at grid offset `m`, rounded once.
fn scaled_point(s: &Spectrum, per_unit: i64, offset: i64, level: i32) -> f64 {
    let d = s.dilation();
    if level >= 0 {
        offset as f64 / (per_unit as i128 * pow_i128(d, level as u32)) as f64
    } else {
        (offset as i128 * pow_i128(d, (-level) as u32)) as f64 / per_unit as f64
    }
}

/// Numerator and denominator of `m / (N · per_unit · (2N)^j)`, the factor
/// multiplying `rk + 2nN` in the phase of a level-`j` atom at offset `m`.
fn phase_ratio_parts(s: &Spectrum, per_unit: i64, offset: i64, level: i32) -> (i128, i128) {
    let d = s.dilation();
    let base = s.N() as i128 * per_unit as i128;
    if level >= 0 {
        (offset as i128, base * pow_i128(d, level as u32))
    } else {
        (offset as i128 * pow_i128(d, (-level) as u32), base)
    }
}

/// `out[slot(k,n)] += weight · e^{2πi·sign·(rk+2nN)·num/den}` over the window.
fn accumulate_window(
    s: &Spectrum,
    w: i64,
    num: i128,
    den: i128,
    sign: i128,
    weight: Complex64,
    out: &mut [Complex64],
) {
    let two_n = 2 * s.N() as i128;
    let step = phase_ratio(sign * two_n * num, den);
    let per_k = (2 * w + 1) as usize;
    for k in 0..2usize {
        let first = s.r() as i128 * k as i128 - two_n * w as i128;
        let mut z = phase_ratio(sign * first * num, den) * weight;
        for slot in &mut out[k * per_k..(k + 1) * per_k] {
            *slot += z;
            z *= step;
        }
    }
}

/// `Σ c(k,n) e^{2πi·sign·(rk+2nN)·num/den}` over the window.
fn window_symbol(s: &Spectrum, w: i64, coeffs: &[Complex64], num: i128, den: i128, sign: i128) -> Complex64 {
    let two_n = 2 * s.N() as i128;
    let step = phase_ratio(sign * two_n * num, den);
    let per_k = (2 * w + 1) as usize;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..2usize {
        let first = s.r() as i128 * k as i128 - two_n * w as i128;
        let mut z = phase_ratio(sign * first * num, den);
        for c in &coeffs[k * per_k..(k + 1) * per_k] {
            acc += c * z;
            z *= step;
        }
    }
    acc
}

/// Transform of a single atom, evaluable anywhere.
#[derive(Clone)]
pub struct AtomProfile {
    generator: Arc<dyn Profile>,
    spectrum: Spectrum,
    atom: Atom,
}

impl Profile for AtomProfile {
    fn eval(&self, xi: f64) -> Result<Complex64> {
        let d = self.spectrum.dilation() as f64;
        let x = xi * d.powi(-self.atom.level);
        let g = self.generator.eval(x)?;
        if g == Complex64::new(0.0, 0.0) {
            return Ok(g);
        }
        let t = self.spectrum.lambda_numer(self.atom.translation) as f64 * x / self.spectrum.N() as f64;
        let frac = t - t.floor();
        let amp = level_amplitude(&self.spectrum, self.atom.level);
        Ok(g * amp * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * frac))
    }

    fn support(&self) -> Option<(f64, f64)> {
        let d = (self.spectrum.dilation() as f64).powi(self.atom.level);
        self.generator.support().map(|(a, b)| (a * d, b * d))
    }
}

/// Finite combination `Σ c_i · atom_i` of one family.
#[derive(Clone)]
pub struct AtomCombination {
    terms: Vec<(AtomProfile, Complex64)>,
    side: Side,
    source: Arc<AtomSource>,
}

impl AtomCombination {
    pub fn terms(&self) -> impl Iterator<Item = (Atom, Complex64)> + '_ {
        self.terms.iter().map(|(p, c)| (p.atom, *c))
    }
}

impl Profile for AtomCombination {
    fn eval(&self, xi: f64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, c) in &self.terms {
            if let Some((a, b)) = p.support() {
                if xi < a || xi > b {
                    continue;
                }
            }
            acc += c * p.eval(xi)?;
        }
        Ok(acc)
    }

    /// Sums cached level envelopes with exact phases instead of evaluating
    /// every generator pointwise.
    fn sample_span(&self, grid: Grid, lo: usize, hi: usize) -> Result<Vec<Complex64>> {
        let s = self.source.spectrum;
        let mut acc = vec![Complex64::new(0.0, 0.0); hi + 1 - lo];
        for (p, c) in &self.terms {
            let atom = p.atom;
            let env = self.source.level_envelope(self.side, atom.channel, atom.level, grid)?;
            let a = env.lo.max(lo);
            let b = (env.lo + env.values.len()).min(hi + 1);
            if a >= b {
                continue;
            }
            let numer = s.lambda_numer(atom.translation) as i128;
            let vals: Vec<Complex64> = (a..b)
                .into_par_iter()
                .map(|i| {
                    let v = env.values[i - env.lo];
                    if v == Complex64::new(0.0, 0.0) {
                        return v;
                    }
                    let (num, den) = phase_ratio_parts(&s, grid.per_unit(), grid.offset(i), atom.level);
                    v * c * phase_ratio(-numer * num, den)
                })
                .collect();
            for (i, z) in vals.into_iter().enumerate() {
                acc[a - lo + i] += z;
            }
        }
        Ok(acc)
    }

    fn support(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (p, _) in &self.terms {
            let (a, b) = p.support()?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        if lo <= hi {
            Some((lo, hi))
        } else {
            Some((0.0, 0.0))
        }
    }
}

/// A profile that is known to vanish outside `support`.
pub struct SupportedProfile {
    inner: Arc<dyn Profile>,
    support: (f64, f64),
}

impl Profile for SupportedProfile {
    fn eval(&self, xi: f64) -> Result<Complex64> {
        if xi < self.support.0 || xi > self.support.1 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        self.inner.eval(xi)
    }

    fn support(&self) -> Option<(f64, f64)> {
        Some(self.support)
    }
}

/// Probes `profile` on `grid`; when it vanishes on the outer quarter of the
/// grid the nonzero range (padded by one step) is attached as its support.
pub fn detect_support(profile: Arc<dyn Profile>, grid: Grid) -> Result<Arc<dyn Profile>> {
    if profile.support().is_some() {
        return Ok(profile);
    }
    let sampled = SampledFunction::sample(grid, profile.as_ref())?;
    let inner_edge = 0.75 * grid.omega();
    match sampled.nonzero_range() {
        None => Ok(Arc::new(SupportedProfile { inner: profile, support: (0.0, 0.0) })),
        Some((lo, hi)) => {
            let (a, b) = (grid.xi(lo), grid.xi(hi));
            if a.abs() < inner_edge && b.abs() < inner_edge {
                let pad = grid.step();
                Ok(Arc::new(SupportedProfile { inner: profile, support: (a - pad, b + pad) }))
            } else {
                Ok(profile)
            }
        }
    }
}

/// Samples of one generator on the `η` grid, restricted to its nonzero range.
#[derive(Debug, Clone, Default)]
struct Envelope {
    lo: usize,
    values: Vec<Complex64>,
}

impl Envelope {
    fn from_sampled(f: &SampledFunction) -> Self {
        match f.nonzero_range() {
            None => Envelope::default(),
            Some((lo, hi)) => Envelope { lo, values: f.samples()[lo..=hi].to_vec() },
        }
    }
}

/// Generator transforms sampled along a level-`j` atom on an output grid.
type LevelKey = (usize, usize, i32, i64, i64);

/// Generators plus a cache of their dilates sampled on output grids.
struct AtomSource {
    spectrum: Spectrum,
    generators: [Vec<Arc<dyn Profile>>; 2],
    level_cache: Mutex<HashMap<LevelKey, Arc<Envelope>>>,
}

impl AtomSource {
    /// `(2N)^{−j/2} ψ̂_ℓ((2N)^{−j}ξ)` on `grid`, cached.
    fn level_envelope(&self, side: Side, channel: usize, level: i32, grid: Grid) -> Result<Arc<Envelope>> {
        let key = (side.index(), channel, level, grid.per_unit(), grid.half_points());
        if let Some(e) = self.level_cache.lock().expect("cache lock").get(&key) {
            return Ok(e.clone());
        }
        let g = self.generators[side.index()][channel].clone();
        let s = self.spectrum;
        let amp = level_amplitude(&s, level);
        let scale = (s.dilation() as f64).powi(level);
        let (lo, hi) = match g.support() {
            Some((a, b)) => {
                let p = grid.per_unit() as f64;
                let lo = ((a * scale * p).floor() as i64 - 1).max(-grid.half_points());
                let hi = ((b * scale * p).ceil() as i64 + 1).min(grid.half_points());
                (lo, hi)
            }
            None => (-grid.half_points(), grid.half_points()),
        };
        let env = if lo > hi {
            Envelope::default()
        } else {
            let values = (lo..=hi)
                .into_par_iter()
                .map(|m| Ok(g.eval(scaled_point(&s, grid.per_unit(), m, level))? * amp))
                .collect::<Result<Vec<_>>>()?;
            Envelope { lo: grid.index_of(lo).expect("inside grid"), values }
        };
        let env = Arc::new(env);
        self.level_cache.lock().expect("cache lock").insert(key, env.clone());
        Ok(env)
    }
}

/// Scaling functions and wavelets of a bank, both families.
pub struct MraSystem {
    spectrum: Spectrum,
    source: Arc<AtomSource>,
    eta: Grid,
    envelopes: [Vec<Envelope>; 2],
    tail_slack: f64,
}

/// Result of [`MraSystem::expand`].
#[derive(Debug, Clone)]
pub struct Expansion {
    pub reconstruction: SampledFunction,
    pub residual: f64,
}

/// Result of [`MraSystem::cross_biorthogonality`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossBiorthogonality {
    pub max_deviation: f64,
    pub max_diagonal_deviation: f64,
    pub pairs: usize,
}

/// Empirical bounds of `Σ|⟨f,ψ⟩|² / ‖f‖²` over a signal sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameEstimate {
    pub lower: f64,
    pub upper: f64,
    pub sample_count: usize,
    pub jlo: i32,
    pub jhi: i32,
    pub window: i64,
}

/// Both families plus the per-signal lower-bound chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameReport {
    pub synthesis: FrameEstimate,
    pub analysis: FrameEstimate,
    /// `(ψ ratio, ψ̃ ratio)` per signal.
    pub ratios: Vec<(f64, f64)>,
    /// `min_f (Σ|⟨f,ψ⟩|²/‖f‖² − 1/upper_ψ̃)`; nonnegative when the chain holds.
    pub chain_margin: f64,
}

/// One row of a coefficient dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub channel: usize,
    pub level: i32,
    pub k: u8,
    pub n: i64,
    pub value: Complex64,
}

impl MraSystem {
    /// Builds the system from explicit generators: index 0 of each side is
    /// the scaling function, `1..2N` the wavelets.
    pub fn new(
        spectrum: Spectrum,
        synthesis: Vec<Arc<dyn Profile>>,
        analysis: Vec<Arc<dyn Profile>>,
        eta: Grid,
    ) -> Result<Self> {
        let expected = spectrum.channels();
        for side in [&synthesis, &analysis] {
            if side.len() != expected {
                return Err(Error::WrongChannelCount { expected, got: side.len() });
            }
        }
        // widen the η grid to cover every known support
        let mut top = eta.omega();
        for g in synthesis.iter().chain(&analysis) {
            if let Some((a, b)) = g.support() {
                top = top.max(a.abs()).max(b.abs());
            }
        }
        let eta = eta.with_half_points((top * eta.per_unit() as f64).ceil() as i64 + 1)?;
        let sample_side = |side: &Vec<Arc<dyn Profile>>| -> Result<Vec<Envelope>> {
            side.iter()
                .map(|g| Ok(Envelope::from_sampled(&SampledFunction::sample(eta, g.as_ref())?)))
                .collect()
        };
        let envelopes = [sample_side(&synthesis)?, sample_side(&analysis)?];
        let tail_slack = envelopes
            .iter()
            .flatten()
            .map(|e| outer_mass_fraction(e, &eta))
            .fold(0.0, f64::max)
            * TAIL_SLACK_FACTOR;
        let source = AtomSource {
            spectrum,
            generators: [synthesis, analysis],
            level_cache: Mutex::new(HashMap::new()),
        };
        Ok(MraSystem { spectrum, source: Arc::new(source), eta, envelopes, tail_slack })
    }

    /// Generators from a bank: cascade scaling functions (`levels` factors)
    /// and wavelets `m_ℓ(ξ/2N)·φ̂(ξ/2N)`.
    pub fn from_bank(bank: &FilterBank, levels: u32, eta: Grid) -> Result<Self> {
        let s = bank.spectrum();
        let probe = eta.with_half_points(eta.per_unit() * (2 * (s.N() + 1)).max(8))?;
        let build = |masks: &[crate::filterbank::PeriodicFunction]| -> Result<Vec<Arc<dyn Profile>>> {
            let phi: Arc<dyn Profile> = Arc::new(CascadeProfile::new(masks[0].clone(), s, levels)?);
            let phi = detect_support(phi, probe)?;
            let mut out = vec![phi.clone()];
            for m in &masks[1..] {
                out.push(Arc::new(WaveletProfile::new(m.clone(), phi.clone(), s)) as Arc<dyn Profile>);
            }
            Ok(out)
        };
        let synthesis = build(bank.synthesis())?;
        let analysis = if bank.is_self_dual() { synthesis.clone() } else { build(bank.analysis())? };
        MraSystem::new(s, synthesis, analysis, eta)
    }

    pub fn spectrum(&self) -> Spectrum {
        self.spectrum
    }

    pub fn eta_grid(&self) -> Grid {
        self.eta
    }

    /// Declared slack for truncating non-compact generators to the `η` grid,
    /// [`TAIL_SLACK_FACTOR`] times the largest fraction of `∫|ψ̂|²` on the
    /// outer quarter `0.75Ω ≤ |η| ≤ Ω`. Zero when every generator is
    /// compactly supported inside the grid.
    pub fn tail_slack(&self) -> f64 {
        self.tail_slack
    }

    pub fn generator(&self, side: Side, channel: usize) -> Arc<dyn Profile> {
        self.source.generators[side.index()][channel].clone()
    }

    pub fn atom_profile(&self, side: Side, atom: Atom) -> AtomProfile {
        AtomProfile { generator: self.generator(side, atom.channel), spectrum: self.spectrum, atom }
    }

    /// Atom transform on `grid` with exact phases.
    pub fn atom_frequency(&self, side: Side, atom: Atom, grid: Grid) -> Result<SampledFunction> {
        let env = self.source.level_envelope(side, atom.channel, atom.level, grid)?;
        let s = self.spectrum;
        let numer = s.lambda_numer(atom.translation) as i128;
        let mut samples = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (i, v) in env.values.iter().enumerate() {
            let idx = env.lo + i;
            let (num, den) = phase_ratio_parts(&s, grid.per_unit(), grid.offset(idx), atom.level);
            samples[idx] = v * phase_ratio(-numer * num, den);
        }
        SampledFunction::new(grid, samples)
    }

    /// `⟨f, atom(ℓ, j, λ)⟩` for every `λ` in the window, ordered as
    /// [`window_translations`].
    pub fn coefficients(&self, f: &dyn Profile, side: Side, channel: usize, level: i32, w: i64) -> Result<Vec<Complex64>> {
        let env = &self.envelopes[side.index()][channel];
        let s = self.spectrum;
        let eta = self.eta;
        let ppu = eta.per_unit();
        let d = s.dilation();
        let len = window_len(w);
        if env.values.is_empty() {
            return Ok(vec![Complex64::new(0.0, 0.0); len]);
        }
        // f̂((2N)^j η_m) is f̂ at offset m of the grid with spacing (2N)^j/ppu
        let scale = pow_i128(d, level.unsigned_abs());
        let level_grid = if level >= 0 {
            (ppu as i128 % scale == 0).then(|| Grid::from_parts((ppu as i128 / scale) as i64, eta.half_points()))
        } else {
            Some(Grid::from_parts((ppu as i128 * scale) as i64, eta.half_points()))
        };
        let fvals = match level_grid {
            Some(g) => f.sample_span(g?, env.lo, env.lo + env.values.len() - 1)?,
            None => (0..env.values.len())
                .into_par_iter()
                .map(|i| {
                    let m = eta.offset(env.lo + i) as i128;
                    f.eval((m * scale) as f64 / ppu as f64)
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let den = s.N() as i128 * ppu as i128;
        let chunks = env.values.len().div_ceil(CHUNK);
        let partials: Vec<Vec<Complex64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![Complex64::new(0.0, 0.0); len];
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(env.values.len());
                for i in lo..hi {
                    let gi = fvals[i] * env.values[i].conj();
                    if gi == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let idx = env.lo + i;
                    let weight = gi * eta.weight(idx);
                    accumulate_window(&s, w, eta.offset(idx) as i128, den, 1, weight, &mut acc);
                }
                acc
            })
            .collect();
        let amp = (d as f64).powf(level as f64 / 2.0);
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for p in partials {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        Ok(out.into_iter().map(|z| z * amp).collect())
    }

    pub fn coefficient(&self, f: &dyn Profile, side: Side, atom: Atom) -> Result<Complex64> {
        let w = atom.translation.n.abs();
        let all = self.coefficients(f, side, atom.channel, atom.level, w)?;
        Ok(all[window_slot(w, atom.translation).expect("inside window")])
    }

    /// `inner_product(f, atom_frequency(atom))` on the grid of `f`.
    pub fn coefficient_on_grid(&self, f: &SampledFunction, side: Side, atom: Atom) -> Result<Complex64> {
        inner_product(f, &self.atom_frequency(side, atom, f.grid())?)
    }

    /// Adds `sign · Σ_λ c_λ atom(ℓ, j, λ)` into `acc` (samples on `grid`).
    fn synthesize_into(
        &self,
        side: Side,
        channel: usize,
        level: i32,
        w: i64,
        coeffs: &[Complex64],
        sign: f64,
        grid: Grid,
        acc: &mut [Complex64],
    ) -> Result<()> {
        if coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
            return Ok(());
        }
        let env = self.source.level_envelope(side, channel, level, grid)?;
        let s = self.spectrum;
        let ppu = grid.per_unit();
        let contrib: Vec<Complex64> = env
            .values
            .par_iter()
            .enumerate()
            .map(|(i, v)| {
                if *v == Complex64::new(0.0, 0.0) {
                    return Complex64::new(0.0, 0.0);
                }
                let (num, den) = phase_ratio_parts(&s, ppu, grid.offset(env.lo + i), level);
                v * window_symbol(&s, w, coeffs, num, den, -1) * sign
            })
            .collect();
        for (i, z) in contrib.into_iter().enumerate() {
            acc[env.lo + i] += z;
        }
        Ok(())
    }

    /// Frequency samples of `Σ_λ c_λ atom(ℓ, j, λ)`.
    pub fn synthesize(&self, side: Side, channel: usize, level: i32, w: i64, coeffs: &[Complex64], grid: Grid) -> Result<SampledFunction> {
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
        self.synthesize_into(side, channel, level, w, coeffs, 1.0, grid, &mut acc)?;
        SampledFunction::new(grid, acc)
    }

    /// `P_j f = Σ_λ ⟨f, φ̃_{j,λ}⟩ φ_{j,λ}`; with `dual` the roles of the
    /// families are exchanged.
    pub fn project(&self, f: &dyn Profile, level: i32, w: i64, dual: bool, grid: Grid) -> Result<SampledFunction> {
        let (coef_side, synth_side) = sides(dual);
        let c = self.coefficients(f, coef_side, 0, level, w)?;
        self.synthesize(synth_side, 0, level, w, &c, grid)
    }

    /// `‖P₁f − P₀f − Σ_{ℓ≥1} Σ_λ ⟨f, ψ̃_{ℓ,0,λ}⟩ψ_{ℓ,0,λ}‖ / ‖f‖`.
    pub fn one_level_residual(&self, f: &dyn Profile, w: i64, dual: bool, grid: Grid) -> Result<f64> {
        let norm = SampledFunction::sample(grid, f)?.norm();
        if norm == 0.0 {
            return Err(Error::ZeroSignal);
        }
        let (coef_side, synth_side) = sides(dual);
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
        let c1 = self.coefficients(f, coef_side, 0, 1, w)?;
        self.synthesize_into(synth_side, 0, 1, w, &c1, 1.0, grid, &mut acc)?;
        for ch in 0..self.spectrum.channels() {
            let c0 = self.coefficients(f, coef_side, ch, 0, w)?;
            self.synthesize_into(synth_side, ch, 0, w, &c0, -1.0, grid, &mut acc)?;
        }
        Ok(SampledFunction::new(grid, acc)?.norm() / norm)
    }

    /// Detail expansion over levels `jlo..=jhi` and its relative residual.
    pub fn expand(&self, f: &dyn Profile, jlo: i32, jhi: i32, w: i64, grid: Grid) -> Result<Expansion> {
        if jlo > jhi {
            return Err(Error::InvalidArgument(format!("empty level range [{jlo}, {jhi}]")));
        }
        let target = SampledFunction::sample(grid, f)?;
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
        let norm = target.norm();
        if norm == 0.0 {
            return Ok(Expansion { reconstruction: SampledFunction::zeros(grid), residual: 0.0 });
        }
        for level in jlo..=jhi {
            for ch in 1..self.spectrum.channels() {
                let c = self.coefficients(f, Side::Analysis, ch, level, w)?;
                self.synthesize_into(Side::Synthesis, ch, level, w, &c, 1.0, grid, &mut acc)?;
            }
        }
        let reconstruction = SampledFunction::new(grid, acc)?;
        let residual = target.sub(&reconstruction)?.norm() / norm;
        Ok(Expansion { reconstruction, residual })
    }

    /// `max |⟨ψ_{ℓ,j,λ}, ψ̃_{ℓ',j',σ}⟩ − δ|` over the given channels, levels and
    /// translations `|n| ≤ w`.
    pub fn cross_biorthogonality(&self, channels: &[usize], levels: &[i32], w: i64) -> Result<CrossBiorthogonality> {
        let s = self.spectrum;
        let d = s.dilation();
        let eta = self.eta;
        let ppu = eta.per_unit();
        let translations = window_translations(w);
        let mut diffs: Vec<i32> = Vec::new();
        for &a in levels {
            for &b in levels {
                if !diffs.contains(&(b - a)) {
                    diffs.push(b - a);
                }
            }
        }
        let mut combos = Vec::new();
        for &l in channels {
            for &lp in channels {
                for &dd in &diffs {
                    combos.push((l, lp, dd));
                }
            }
        }
        // ⟨ψ_{ℓ,j,λ}, ψ̃_{ℓ',j',σ}⟩ depends on j' − j only
        let tables = combos
            .par_iter()
            .map(|&(l, lp, dd)| -> Result<((usize, usize, i32), HashMap<i128, Complex64>)> {
                let gap = dd.unsigned_abs();
                let shrink = pow_i128(d, gap);
                // finer family sampled on η directly, coarser one at η/(2N)^gap
                let (fine_env, coarse_gen, coarse_is_analysis) = if dd >= 0 {
                    (&self.envelopes[0][l], self.generator(Side::Analysis, lp), true)
                } else {
                    (&self.envelopes[1][lp], self.generator(Side::Synthesis, l), false)
                };
                let g = (0..fine_env.values.len())
                    .into_par_iter()
                    .map(|i| -> Result<Complex64> {
                        let idx = fine_env.lo + i;
                        let m = eta.offset(idx);
                        let x = m as f64 / (ppu as i128 * shrink) as f64;
                        let other = coarse_gen.eval(x)?;
                        let fine = fine_env.values[i];
                        let v = if coarse_is_analysis { fine * other.conj() } else { other * fine.conj() };
                        Ok(v * eta.weight(idx))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let den = s.N() as i128 * ppu as i128 * shrink;
                let amp = (d as f64).powf(-(gap as f64) / 2.0);
                let mut keys: Vec<i128> = Vec::new();
                for a in &translations {
                    for b in &translations {
                        let (na, nb) = (s.lambda_numer(*a) as i128, s.lambda_numer(*b) as i128);
                        let key = if dd >= 0 { na * shrink - nb } else { na - nb * shrink };
                        keys.push(key);
                    }
                }
                keys.sort_unstable();
                keys.dedup();
                let values: Vec<Complex64> = keys
                    .par_iter()
                    .map(|&key| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (i, gi) in g.iter().enumerate() {
                            if *gi != Complex64::new(0.0, 0.0) {
                                let m = eta.offset(fine_env.lo + i) as i128;
                                acc += gi * phase_ratio(-key * m, den);
                            }
                        }
                        acc * amp
                    })
                    .collect();
                Ok(((l, lp, dd), keys.into_iter().zip(values).collect()))
            })
            .collect::<Result<HashMap<_, _>>>()?;

        let mut max_dev: f64 = 0.0;
        let mut max_diag: f64 = 0.0;
        let mut pairs = 0;
        for &l in channels {
            for &lp in channels {
                for &j in levels {
                    for &jp in levels {
                        let dd = jp - j;
                        let shrink = pow_i128(d, dd.unsigned_abs());
                        let table = &tables[&(l, lp, dd)];
                        for a in &translations {
                            for b in &translations {
                                let (na, nb) = (s.lambda_numer(*a) as i128, s.lambda_numer(*b) as i128);
                                let key = if dd >= 0 { na * shrink - nb } else { na - nb * shrink };
                                let diag = l == lp && j == jp && a == b;
                                let target = if diag { 1.0 } else { 0.0 };
                                let dev = (table[&key] - target).norm();
                                max_dev = max_dev.max(dev);
                                if diag {
                                    max_diag = max_diag.max(dev);
                                }
                                pairs += 1;
                            }
                        }
                    }
                }
            }
        }
        Ok(CrossBiorthogonality { max_deviation: max_dev, max_diagonal_deviation: max_diag, pairs })
    }

    /// `Σ_{ℓ≥1} Σ_{j=jlo}^{jhi} Σ_{|n|≤w} |⟨f, atom⟩|²`.
    pub fn detail_energy(&self, f: &dyn Profile, side: Side, jlo: i32, jhi: i32, w: i64) -> Result<f64> {
        let mut total = 0.0;
        for level in jlo..=jhi {
            for ch in 1..self.spectrum.channels() {
                total += self.coefficients(f, side, ch, level, w)?.iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
        }
        Ok(total)
    }

    pub fn empirical_frame_bounds(
        &self,
        signals: &[Arc<dyn Profile>],
        jlo: i32,
        jhi: i32,
        w: i64,
        grid: Grid,
    ) -> Result<FrameReport> {
        if signals.is_empty() {
            return Err(Error::InvalidArgument("frame estimate needs at least one signal".into()));
        }
        let mut ratios = Vec::with_capacity(signals.len());
        for f in signals {
            let norm_sq = SampledFunction::sample(grid, f.as_ref())?.norm_sq();
            if norm_sq == 0.0 {
                return Err(Error::ZeroSignal);
            }
            let a = self.detail_energy(f.as_ref(), Side::Synthesis, jlo, jhi, w)? / norm_sq;
            let b = self.detail_energy(f.as_ref(), Side::Analysis, jlo, jhi, w)? / norm_sq;
            ratios.push((a, b));
        }
        let estimate = |pick: fn(&(f64, f64)) -> f64| FrameEstimate {
            lower: ratios.iter().map(pick).fold(f64::INFINITY, f64::min),
            upper: ratios.iter().map(pick).fold(f64::NEG_INFINITY, f64::max),
            sample_count: ratios.len(),
            jlo,
            jhi,
            window: w,
        };
        let synthesis = estimate(|r| r.0);
        let analysis = estimate(|r| r.1);
        let chain_margin =
            ratios.iter().map(|r| r.0 - 1.0 / analysis.upper).fold(f64::INFINITY, f64::min);
        Ok(FrameReport { synthesis, analysis, ratios, chain_margin })
    }

    /// Detail coefficients `⟨f, ψ̃_{ℓ,j,λ}⟩` ordered by `(ℓ, j, k, n)`.
    pub fn coefficient_dump(&self, f: &dyn Profile, jlo: i32, jhi: i32, w: i64) -> Result<Vec<CoefficientRow>> {
        let translations = window_translations(w);
        let mut rows = Vec::new();
        for ch in 1..self.spectrum.channels() {
            for level in jlo..=jhi {
                let c = self.coefficients(f, Side::Analysis, ch, level, w)?;
                for (t, v) in translations.iter().zip(c) {
                    rows.push(CoefficientRow { channel: ch, level, k: t.k, n: t.n, value: v });
                }
            }
        }
        Ok(rows)
    }

    /// Grid wide enough for every atom up to level `jhi` (at least level 1),
    /// with the spacing of the `η` grid.
    pub fn output_grid(&self, jhi: i32) -> Result<Grid> {
        let mut top: f64 = 0.0;
        let mut compact = true;
        for g in self.source.generators.iter().flatten() {
            match g.support() {
                Some((a, b)) => top = top.max(a.abs()).max(b.abs()),
                None => compact = false,
            }
        }
        if !compact {
            top = self.eta.omega();
        }
        let scale = (self.spectrum.dilation() as f64).powi(jhi.max(1));
        let half = (top * scale).ceil() as i64 + 1;
        self.eta.with_half_points(half * self.eta.per_unit())
    }

    /// Combination of synthesis atoms.
    pub fn combination(&self, terms: &[(Atom, Complex64)]) -> AtomCombination {
        AtomCombination {
            terms: terms.iter().map(|(a, c)| (self.atom_profile(Side::Synthesis, *a), *c)).collect(),
            side: Side::Synthesis,
            source: self.source.clone(),
        }
    }
}

fn sides(dual: bool) -> (Side, Side) {
    if dual {
        (Side::Synthesis, Side::Analysis)
    } else {
        (Side::Analysis, Side::Synthesis)
    }
}

fn outer_mass_fraction(env: &Envelope, eta: &Grid) -> f64 {
    let edge = 0.75 * eta.omega();
    let mut total = 0.0;
    let mut outer = 0.0;
    for (i, v) in env.values.iter().enumerate() {
        let e = v.norm_sqr();
        total += e;
        if eta.xi(env.lo + i).abs() >= edge {
            outer += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outer / total
    }
}
