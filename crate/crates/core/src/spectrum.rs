//! The translation set `Λ = {0, r/N} + 2ℤ` and its spectral set
//! `Γ = [0, 1/2) ∪ [N/2, (N+1)/2)`.
//!
//! Translations are kept as exact rationals `(rk + 2nN) / N`; every boundary
//! decision (membership in `Γ`, vanishing of `μ` in an exponential integral)
//! is made on integers so results never depend on rounding.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::SpectrumError;

/// Admissible pair `(N, r)`: `N ≥ 1`, `r` odd, `1 ≤ r ≤ 2N−1`, `gcd(r, N) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpectrum", into = "RawSpectrum")]
pub struct Spectrum {
    n: i64,
    r: i64,
}

#[derive(Serialize, Deserialize)]
struct RawSpectrum {
    #[serde(rename = "N")]
    n: i64,
    r: i64,
}

impl TryFrom<RawSpectrum> for Spectrum {
    type Error = SpectrumError;

    fn try_from(raw: RawSpectrum) -> Result<Self, Self::Error> {
        Spectrum::new(raw.n, raw.r)
    }
}

impl From<Spectrum> for RawSpectrum {
    fn from(s: Spectrum) -> Self {
        RawSpectrum { n: s.n, r: s.r }
    }
}

/// Index `(k, n)` of the translation `rk/N + 2n`, `k ∈ {0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TranslationIndex {
    pub k: u8,
    pub n: i64,
}

impl TranslationIndex {
    pub fn new(k: u8, n: i64) -> Self {
        assert!(k <= 1, "translation coset index must be 0 or 1");
        TranslationIndex { k, n }
    }
}

impl fmt::Display for TranslationIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(k={}, n={})", self.k, self.n)
    }
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Checks the constraints in order and names the first one violated.
pub fn validate_spectrum(n: i64, r: i64) -> Result<Spectrum, SpectrumError> {
    Spectrum::new(n, r)
}

impl Spectrum {
    pub fn new(n: i64, r: i64) -> Result<Self, SpectrumError> {
        if n < 1 {
            return Err(SpectrumError::NNonPositive(n));
        }
        if r.rem_euclid(2) != 1 {
            return Err(SpectrumError::RNotOdd(r));
        }
        if r < 1 || r > 2 * n - 1 {
            return Err(SpectrumError::ROutOfRange { r, n });
        }
        let g = gcd(r, n);
        if g != 1 {
            return Err(SpectrumError::NotCoprime { r, n, gcd: g });
        }
        Ok(Spectrum { n, r })
    }

    /// The classical dyadic case `Λ = ℤ`.
    pub fn classical() -> Self {
        Spectrum { n: 1, r: 1 }
    }

    #[allow(non_snake_case)]
    pub fn N(&self) -> i64 {
        self.n
    }

    pub fn r(&self) -> i64 {
        self.r
    }

    /// Dilation factor `2N`.
    pub fn dilation(&self) -> i64 {
        2 * self.n
    }

    /// Number of channels in a filter bank (equal to the dilation).
    pub fn channels(&self) -> usize {
        (2 * self.n) as usize
    }

    /// Exact translation `rk/N + 2n`.
    pub fn lambda(&self, idx: TranslationIndex) -> Rational64 {
        Rational64::new(self.r * idx.k as i64 + 2 * idx.n * self.n, self.n)
    }

    /// Numerator `rk + 2nN` of the translation over the denominator `N`.
    pub fn lambda_numer(&self, idx: TranslationIndex) -> i64 {
        self.r * idx.k as i64 + 2 * idx.n * self.n
    }

    /// `rk/N + 2n` rounded once to the nearest double.
    pub fn lambda_value(&self, idx: TranslationIndex) -> f64 {
        let num = self.r * idx.k as i64 + 2 * idx.n * self.n;
        num as f64 / self.n as f64
    }

    /// All `λ ∈ Λ ∩ [lo, hi]`, ascending.
    pub fn enumerate_lambda(&self, lo: f64, hi: f64) -> Vec<(TranslationIndex, f64)> {
        if !(lo <= hi) {
            return Vec::new();
        }
        let mut out = Vec::new();
        for k in 0..=1u8 {
            let shift = (self.r * k as i64) as f64 / self.n as f64;
            let n_lo = ((lo - shift) / 2.0).floor() as i64 - 1;
            let n_hi = ((hi - shift) / 2.0).ceil() as i64 + 1;
            for n in n_lo..=n_hi {
                let idx = TranslationIndex::new(k, n);
                let v = self.lambda_value(idx);
                if v >= lo && v <= hi {
                    out.push((idx, v));
                }
            }
        }
        out.sort_by(|a, b| self.lambda(a.0).cmp(&self.lambda(b.0)));
        out
    }

    /// Indices `k ∈ {0,1}`, `|n| ≤ window`, sorted by translation value.
    pub fn window_indices(&self, window: i64) -> Vec<TranslationIndex> {
        let mut idx: Vec<TranslationIndex> = (0..=1u8)
            .flat_map(|k| (-window..=window).map(move |n| TranslationIndex::new(k, n)))
            .collect();
        idx.sort_by(|a, b| self.lambda(*a).cmp(&self.lambda(*b)));
        idx
    }

    /// The two half-open intervals making up `Γ`.
    pub fn gamma_intervals(&self) -> [(Rational64, Rational64); 2] {
        [
            (Rational64::from_integer(0), Rational64::new(1, 2)),
            (Rational64::new(self.n, 2), Rational64::new(self.n + 1, 2)),
        ]
    }

    /// `ξ ∈ Γ` with half-open boundaries.
    pub fn gamma_indicator(&self, xi: f64) -> bool {
        let n = self.n as f64;
        (0.0..0.5).contains(&xi) || (n / 2.0..(n + 1.0) / 2.0).contains(&xi)
    }

    /// Exact `𝟙_Γ(p/q)` for an integer numerator and positive denominator.
    pub fn gamma_contains_ratio(&self, p: i128, q: i128) -> bool {
        debug_assert!(q > 0);
        // scale by 2q: Γ = [0, q) ∪ [Nq, (N+1)q)
        let y = 2 * p;
        let n = self.n as i128;
        (0..q).contains(&y) || (n * q..(n + 1) * q).contains(&y)
    }

    /// `Σ_{λ∈Λ} 𝟙_Γ(p/q + λ)` evaluated in integer arithmetic.
    pub fn tiling_multiplicity(&self, p: i64, q: i64) -> u32 {
        assert!(q > 0, "denominator must be positive");
        let (p, q, n, r) = (p as i128, q as i128, self.n as i128, self.r as i128);
        // ξ + λ = (pN + q(rk + 2mN)) / (qN)
        let den = q * n;
        let xi_floor = p.div_euclid(q);
        let reach = n + 2;
        let mut count = 0;
        for k in 0..=1i128 {
            for m in (-xi_floor / 2 - reach)..=(-xi_floor / 2 + reach) {
                let num = p * n + q * (r * k + 2 * m * n);
                if self.gamma_contains_ratio(num, den) {
                    count += 1;
                }
            }
        }
        count
    }

    /// `∫_Γ e^{2πi(λ_a − λ_b)ξ} dξ` in closed form.
    pub fn exp_inner_product(&self, a: TranslationIndex, b: TranslationIndex) -> Complex64 {
        self.exp_integral(self.lambda(a) - self.lambda(b))
    }

    /// `∫_Γ e^{2πiμξ} dξ` for a rational frequency `μ`.
    pub fn exp_integral(&self, mu: Rational64) -> Complex64 {
        if *mu.numer() == 0 {
            return Complex64::new(1.0, 0.0);
        }
        let denom = Complex64::new(0.0, 2.0 * PI * rational_to_f64(mu));
        self.gamma_intervals()
            .iter()
            .map(|&(a, b)| (unit_phase(mu * b) - unit_phase(mu * a)) / denom)
            .sum()
    }

    /// Gram matrix of `{e^{2πiλξ}}` on `Γ` over the window `|n| ≤ window`.
    pub fn gram_matrix(&self, window: i64) -> GramMatrix {
        let indices = self.window_indices(window.max(1));
        let dim = indices.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for &a in &indices {
            for &b in &indices {
                entries.push(self.exp_inner_product(a, b));
            }
        }
        GramMatrix { indices, entries }
    }
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Spectrum(N={}, r={})", self.n, self.r)
    }
}

pub(crate) fn rational_to_f64(q: Rational64) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// `e^{2πi t}` with `t` reduced modulo 1 exactly before rounding.
pub(crate) fn unit_phase(t: Rational64) -> Complex64 {
    let frac = t - t.floor();
    let angle = 2.0 * PI * rational_to_f64(frac);
    Complex64::new(angle.cos(), angle.sin())
}

/// `e^{2πi num/den}` with the fraction reduced modulo 1 in integer arithmetic.
pub(crate) fn phase_ratio(num: i128, den: i128) -> Complex64 {
    debug_assert!(den > 0);
    let frac = num.rem_euclid(den) as f64 / den as f64;
    let angle = 2.0 * PI * frac;
    Complex64::new(angle.cos(), angle.sin())
}

/// Square complex matrix indexed by translations.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub indices: Vec<TranslationIndex>,
    /// Row-major entries.
    pub entries: Vec<Complex64>,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    /// `max_{a,b} |G_ab − δ_ab|`.
    pub fn max_deviation_from_identity(&self) -> f64 {
        let d = self.dim();
        self.entries
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let target = if i / d == i % d { 1.0 } else { 0.0 };
                (z - target).norm()
            })
            .fold(0.0, f64::max)
    }
}
