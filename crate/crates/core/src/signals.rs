//! Seeded random test signals.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freqfield::Profile;
use crate::mra::{Atom, MraSystem};
use crate::spectrum::TranslationIndex;

/// Signal families used by the certification stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SignalModel {
    /// `Σ_μ c_μ φ_{1,2Nμ}` over `|n| ≤ window`: elements of `V_1` whose
    /// level-0 decomposition is finite.
    CoarseLattice { window: i64 },
    /// `terms` random detail atoms with levels in `jlo..=jhi` and `|n| ≤ window`.
    DetailSpan { jlo: i32, jhi: i32, window: i64, terms: usize },
    /// White noise at `knots` equispaced points of `[lo, hi]`, smoothed by a
    /// triangular kernel of the knot spacing.
    SmoothedNoise { lo: f64, hi: f64, knots: usize },
}

/// Piecewise-linear interpolation of complex knot values; zero outside.
#[derive(Debug, Clone)]
pub struct SmoothedNoise {
    lo: f64,
    spacing: f64,
    values: Vec<Complex64>,
}

impl Profile for SmoothedNoise {
    fn eval(&self, xi: f64) -> Result<Complex64> {
        let t = (xi - self.lo) / self.spacing;
        let i = t.floor();
        if i < -1.0 || i >= self.values.len() as f64 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let frac = t - i;
        let at = |j: f64| {
            if j < 0.0 || j >= self.values.len() as f64 {
                Complex64::new(0.0, 0.0)
            } else {
                self.values[j as usize]
            }
        };
        Ok(at(i) * (1.0 - frac) + at(i + 1.0) * frac)
    }

    fn support(&self) -> Option<(f64, f64)> {
        Some((self.lo - self.spacing, self.lo + self.spacing * self.values.len() as f64))
    }
}

fn normal_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

impl SignalModel {
    /// Signal number `index` of the stream for `seed`; independent of how
    /// many other signals are drawn.
    pub fn generate(&self, system: &MraSystem, seed: u64, index: u64) -> Result<Arc<dyn Profile>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let s = system.spectrum();
        let two_n = 2 * s.N();
        match *self {
            SignalModel::CoarseLattice { window } => {
                if window < 0 {
                    return Err(Error::InvalidArgument("signal window must be nonnegative".into()));
                }
                let mut terms = Vec::new();
                for k in 0..=1u8 {
                    for n in -window..=window {
                        // 2Nμ = 2(rk + 2Nn) ∈ 2ℤ
                        let numer = s.r() * k as i64 + two_n * n;
                        let idx = TranslationIndex::new(0, numer);
                        terms.push((Atom::new(0, 1, idx), normal_complex(&mut rng)));
                    }
                }
                Ok(Arc::new(system.combination(&terms)))
            }
            SignalModel::DetailSpan { jlo, jhi, window, terms } => {
                if jlo > jhi || terms == 0 || window < 0 {
                    return Err(Error::InvalidArgument("empty detail span".into()));
                }
                let channels = s.channels();
                let picked: Vec<(Atom, Complex64)> = (0..terms)
                    .map(|_| {
                        let ch = rng.random_range(1..channels);
                        let level = rng.random_range(jlo..=jhi);
                        let k = rng.random_range(0..=1u8);
                        let n = rng.random_range(-window..=window);
                        (Atom::new(ch, level, TranslationIndex::new(k, n)), normal_complex(&mut rng))
                    })
                    .collect();
                Ok(Arc::new(system.combination(&picked)))
            }
            SignalModel::SmoothedNoise { lo, hi, knots } => {
                if knots < 2 || !(hi > lo) {
                    return Err(Error::InvalidArgument("smoothed noise needs two knots and lo < hi".into()));
                }
                let spacing = (hi - lo) / (knots - 1) as f64;
                let values = (0..knots).map(|_| normal_complex(&mut rng)).collect();
                Ok(Arc::new(SmoothedNoise { lo, spacing, values }))
            }
        }
    }

    /// Largest coarse-lattice window whose level-1 translations stay within
    /// `|n| ≤ w`.
    pub fn coarse_window_for(system: &MraSystem, w: i64) -> i64 {
        let s = system.spectrum();
        ((w - s.r()) / (2 * s.N())).max(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::shannon_bank;
    use crate::freqfield::Grid;
    use crate::spectrum::Spectrum;

    fn system() -> MraSystem {
        let s = Spectrum::new(2, 1).unwrap();
        MraSystem::from_bank(&shannon_bank(&s), 30, Grid::new(8.0, 1.0 / 256.0).unwrap()).unwrap()
    }

    #[test]
    fn streams_are_reproducible() {
        let sys = system();
        let model = SignalModel::SmoothedNoise { lo: 0.0, hi: 4.0, knots: 9 };
        let a = model.generate(&sys, 7, 3).unwrap();
        let b = model.generate(&sys, 7, 3).unwrap();
        let c = model.generate(&sys, 7, 4).unwrap();
        for x in [0.1, 1.3, 3.9] {
            assert_eq!(a.eval(x).unwrap(), b.eval(x).unwrap());
            assert_ne!(a.eval(x).unwrap(), c.eval(x).unwrap());
        }
    }

    #[test]
    fn smoothed_noise_interpolates_knots() {
        let f = SmoothedNoise { lo: 1.0, spacing: 0.5, values: vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, -2.0)] };
        assert_eq!(f.eval(1.0).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(f.eval(1.25).unwrap(), Complex64::new(2.0, -1.0));
        assert_eq!(f.eval(0.75).unwrap(), Complex64::new(0.5, 0.0));
        assert_eq!(f.eval(2.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn coarse_window_fits() {
        let sys = system();
        assert_eq!(SignalModel::coarse_window_for(&sys, 16), 3);
    }

    #[test]
    fn invalid_models_rejected() {
        let sys = system();
        assert!(SignalModel::DetailSpan { jlo: 1, jhi: 0, window: 1, terms: 1 }.generate(&sys, 0, 0).is_err());
        assert!(SignalModel::SmoothedNoise { lo: 1.0, hi: 1.0, knots: 4 }.generate(&sys, 0, 0).is_err());
    }
}
