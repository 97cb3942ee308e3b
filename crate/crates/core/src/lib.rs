//! Biorthogonal wavelet systems on the nonuniform translation set
//! `Λ = {0, r/N} + 2ℤ` with dilation `2N`: construction, evaluation and
//! numerical certification.

pub mod cascade;
pub mod certify;
pub mod error;
pub mod filterbank;
pub mod freqfield;
pub mod mra;
pub mod report;
pub mod signals;
pub mod spectrum;

pub use error::{Error, Result, SpectrumError};
pub use filterbank::{FilterBank, PeriodicFunction};
pub use freqfield::{Grid, PeriodizationProfile, Profile, RieszBounds, SampledFunction};
pub use report::{CertificationReport, ConditionEntry};
pub use spectrum::{validate_spectrum, Spectrum, TranslationIndex};
