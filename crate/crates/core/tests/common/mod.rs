//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use numra::certify::CertifyOptions;
use numra::filterbank::{haar_bank, shannon_bank};
use numra::mra::MraSystem;
use numra::{FilterBank, Grid, Spectrum, TranslationIndex};

/// Composite Simpson rule for a complex integrand on `[a, b]` with `2n` panels.
pub fn simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, n: usize) -> Complex64 {
    let m = 2 * n;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// `∫_Γ e^{2πiμξ} dξ` by quadrature, Γ written out from its definition.
pub fn gamma_exp_quadrature(s: &Spectrum, mu: f64) -> Complex64 {
    let n = s.N() as f64;
    let e = |x: f64| Complex64::from_polar(1.0, 2.0 * PI * mu * x);
    simpson(e, 0.0, 0.5, 2000) + simpson(e, n / 2.0, (n + 1.0) / 2.0, 2000)
}

/// `max |G − I|` with `G_{ab} = ∫_Γ e^{2πi(λ_a − λ_b)ξ}` by quadrature.
pub fn gram_deviation_by_quadrature(s: &Spectrum, window: i64) -> f64 {
    let lambdas: Vec<f64> = (0..=1u8)
        .flat_map(|k| (-window..=window).map(move |n| (k, n)))
        .map(|(k, n)| (s.r() * k as i64) as f64 / s.N() as f64 + 2.0 * n as f64)
        .collect();
    let mut worst: f64 = 0.0;
    for (a, la) in lambdas.iter().enumerate() {
        for (b, lb) in lambdas.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((gamma_exp_quadrature(s, la - lb) - target).norm());
        }
    }
    worst
}

/// `e^{−πiξ} sin(πξ)/(πξ)`, the transform of the unit box.
pub fn haar_phi(xi: f64) -> Complex64 {
    let sinc = if xi == 0.0 { 1.0 } else { (PI * xi).sin() / (PI * xi) };
    Complex64::from_polar(1.0, -PI * xi) * sinc
}

/// `λ = rk/N + 2n` from its definition.
pub fn lambda(s: &Spectrum, t: TranslationIndex) -> f64 {
    (s.r() * t.k as i64) as f64 / s.N() as f64 + 2.0 * t.n as f64
}

pub fn spectrum(n: i64, r: i64) -> Spectrum {
    Spectrum::new(n, r).unwrap()
}

/// Default-resolved options and the system they describe.
pub fn system_for(bank: &FilterBank) -> (CertifyOptions, MraSystem) {
    let opts = CertifyOptions::default().resolved(&bank.spectrum());
    let eta = Grid::new(opts.eta_omega.unwrap(), opts.step.unwrap()).unwrap();
    let system = MraSystem::from_bank(bank, opts.levels, eta).unwrap();
    (opts, system)
}

pub fn shannon2() -> (FilterBank, CertifyOptions, MraSystem) {
    let bank = shannon_bank(&spectrum(2, 1));
    let (o, s) = system_for(&bank);
    (bank, o, s)
}

pub fn haar() -> (FilterBank, CertifyOptions, MraSystem) {
    let bank = haar_bank();
    let (o, s) = system_for(&bank);
    (bank, o, s)
}
