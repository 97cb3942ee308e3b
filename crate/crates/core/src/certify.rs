//! The certification pipeline behind `numra certify`.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cascade::{fit_decay, wavelet_origin_check, NORMALIZATION_TOL};
use crate::error::{Error, Result};
use crate::filterbank::{check_pr, evaluate_mask, pr_grid, refinement_residual, FilterBank};
use crate::freqfield::{periodization_entry, periodize_profiles, Grid, Profile, RieszBounds, SampledFunction, BIORTHOGONAL};
use crate::mra::{MraSystem, Side};
use crate::report::{CertificationReport, ConditionEntry};
use crate::signals::SignalModel;
use crate::spectrum::Spectrum;

/// Exact or algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Identities evaluated through grid quadrature or truncated sums.
pub const QUADRATURE_TOL: f64 = 1e-6;
/// Identities over truncated translation windows.
pub const IDENTITY_TOL: f64 = 1e-5;
pub const EXPANSION_TOL: f64 = 1e-3;
/// Largest accepted `upper/lower` ratio for Riesz and frame bounds.
pub const MAX_CONDITION: f64 = 1e12;
pub const GRAM_WINDOW: i64 = 8;
pub const CROSS_LEVELS: [i32; 4] = [-1, 0, 1, 2];
pub const CROSS_WINDOW: i64 = 4;
pub const DEFAULT_JHI: i32 = 4;
pub const MAX_OUTPUT_POINTS: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyOptions {
    pub omega: f64,
    /// Defaults to `1/(4N·64)`.
    pub step: Option<f64>,
    /// Periodization truncation for profiles without known support.
    pub n_max: i64,
    pub levels: u32,
    pub jlo: i32,
    /// Defaults to the largest level up to 4 whose output grid has at most
    /// [`MAX_OUTPUT_POINTS`] points.
    pub jhi: Option<i32>,
    pub lwindow: i64,
    pub seed: u64,
    pub identity_signals: usize,
    pub expansion_signals: usize,
    pub frame_signals: usize,
    /// Half-width of the coefficient grid; defaults to `4Ω`.
    pub eta_omega: Option<f64>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            omega: 8.0,
            step: None,
            n_max: 256,
            levels: crate::cascade::DEFAULT_LEVELS,
            jlo: -2,
            jhi: None,
            lwindow: 16,
            seed: 0,
            identity_signals: 8,
            expansion_signals: 4,
            frame_signals: 16,
            eta_omega: None,
        }
    }
}

impl CertifyOptions {
    /// Fills every defaulted field for `s`.
    pub fn resolved(&self, s: &Spectrum) -> CertifyOptions {
        let mut o = self.clone();
        o.step = Some(self.step.unwrap_or(1.0 / (4 * s.N() * 64) as f64));
        o.eta_omega = Some(self.eta_omega.unwrap_or(4.0 * self.omega));
        o
    }

    /// Options and bank recorded in a report.
    pub fn from_report(report: &CertificationReport) -> Result<(CertifyOptions, FilterBank)> {
        let p = &report.parameters;
        let opts: CertifyOptions = serde_json::from_value(p.get("options").cloned().unwrap_or(Value::Null))
            .map_err(|e| Error::Parse(format!("report options: {e}")))?;
        let bank = p
            .get("bank")
            .ok_or_else(|| Error::Parse("report has no embedded bank".into()))?;
        let bank = FilterBank::from_json(&bank.to_string())?;
        Ok((opts, bank))
    }
}

/// A finished or aborted run. `error` holds the stage failure, if any; the
/// report then carries the entries gathered so far and is incomplete.
#[derive(Debug)]
pub struct CertifyRun {
    pub report: CertificationReport,
    pub error: Option<Error>,
}

pub fn certify(bank: &FilterBank, options: &CertifyOptions) -> CertifyRun {
    let start = Instant::now();
    let s = bank.spectrum();
    let opts = options.resolved(&s);
    let parameters = json!({
        "options": opts,
        "bank": bank.to_value(),
        "bank_digest": bank.digest(),
    });
    let mut report = CertificationReport::new(s, parameters, opts.seed);
    let error = run_stages(bank, &opts, &mut report).err();
    if let Some(e) = &error {
        report.failure = Some(e.to_string());
    }
    report.finish(start.elapsed().as_secs_f64());
    CertifyRun { report, error }
}

fn run_stages(bank: &FilterBank, opts: &CertifyOptions, report: &mut CertificationReport) -> Result<()> {
    let s = bank.spectrum();
    let step = opts.step.expect("resolved");
    let grid = Grid::new(opts.omega, step)?;
    grid.require_aligned(&s)?;
    if opts.lwindow < 0 {
        return Err(Error::InvalidArgument("lwindow must be nonnegative".into()));
    }

    // spectral pair
    let gram = s.gram_matrix(GRAM_WINDOW);
    report.push(
        ConditionEntry::new(
            "spectral_pair_gram",
            "exponentials over Λ are orthonormal in L²(Γ)",
            gram.max_deviation_from_identity(),
            1e-10,
        )
        .with_parameters(json!({ "window": GRAM_WINDOW, "method": "closed form" })),
    );

    // perfect reconstruction
    let pr = check_pr(bank, &pr_grid(&s, grid.per_unit()), ALGEBRAIC_TOL)?;
    report.push(pr.entry);

    // cascade
    let norm_dev = [&bank.synthesis()[0], &bank.analysis()[0]]
        .into_iter()
        .map(|m| evaluate_mask(m, &s, 0.0).map(|v| (v - 1.0).norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    report.push(ConditionEntry::new(
        "lowpass_normalization",
        "m₀(0) = m̃₀(0) = 1",
        norm_dev,
        NORMALIZATION_TOL,
    ));
    if !(norm_dev <= NORMALIZATION_TOL) {
        return Err(Error::NotNormalized(norm_dev));
    }
    let eta = Grid::new(opts.eta_omega.expect("resolved"), step)?;
    let system = MraSystem::from_bank(bank, opts.levels, eta)?;
    let slack = system.tail_slack();
    let jhi = match opts.jhi {
        Some(j) => j,
        None => {
            let mut j = DEFAULT_JHI;
            while j > opts.jlo.max(1) && system.output_grid(j)?.len() > MAX_OUTPUT_POINTS {
                j -= 1;
            }
            report.parameters["options"]["jhi"] = json!(j);
            j
        }
    };
    if opts.jlo > jhi {
        return Err(Error::InvalidArgument(format!("jlo {} exceeds jhi {jhi}", opts.jlo)));
    }
    let phi = system.generator(Side::Synthesis, 0);
    let phid = system.generator(Side::Analysis, 0);
    let phi_s = SampledFunction::sample(grid, phi.as_ref())?;
    let phid_s = SampledFunction::sample(grid, phid.as_ref())?;

    // refinement
    let refine = refinement_residual(&phi_s, &bank.synthesis()[0], &s)?
        .max(refinement_residual(&phid_s, &bank.analysis()[0], &s)?);
    report.push(
        ConditionEntry::new(
            "refinement_relation",
            "φ̂(ξ) = m₀(ξ/2N)·φ̂(ξ/2N)",
            refine,
            QUADRATURE_TOL,
        )
        .with_parameters(json!({ "cascade_levels": opts.levels, "grid": grid })),
    );

    // biorthogonality of translates
    let tol_for = |p: &crate::freqfield::PeriodizationProfile| if p.extrapolated { QUADRATURE_TOL } else { ALGEBRAIC_TOL };
    let p = periodize_profiles(&s, phi.as_ref(), phid.as_ref(), grid.per_unit(), opts.n_max)?;
    report.push(periodization_entry(
        BIORTHOGONAL,
        "Σ_λ φ̂(ξ+λ)·conj(φ̃̂(ξ+λ)) = 1",
        &p,
        Complex64::new(1.0, 0.0),
        tol_for(&p),
    ));

    // Riesz bounds
    let mut riesz = Vec::new();
    let mut condition: f64 = 0.0;
    for g in [&phi, &phid] {
        let p = periodize_profiles(&s, g.as_ref(), g.as_ref(), grid.per_unit(), opts.n_max)?;
        let b = RieszBounds::from_profile(&p);
        condition = condition.max(if b.lower > 0.0 { b.upper / b.lower } else { f64::INFINITY });
        riesz.push(json!({ "lower": b.lower, "upper": b.upper, "tail_bound": p.tail_bound }));
    }
    report.push(
        ConditionEntry::new("riesz_bounds", "0 < A ≤ Σ_λ|φ̂(ξ+λ)|² ≤ B", condition, MAX_CONDITION)
            .with_values(json!({ "synthesis": riesz[0], "analysis": riesz[1] })),
    );

    // decay of the scaling functions
    let mut fits = Vec::new();
    let mut violation: f64 = 0.0;
    for (name, f) in [("phi", &phi_s), ("phi_dual", &phid_s)] {
        let fit = fit_decay(f)?;
        violation = violation.max(decay_violation(fit.pass, fit.epsilon));
        fits.push(json!({ "function": name, "fit": fit }));
    }
    report.push(
        ConditionEntry::new("decay_scaling", "|φ̂(ξ)| ≤ C(1+|ξ|)^{−1/2−ε}, ε > 0", violation, 0.0)
            .with_values(Value::Array(fits)),
    );

    // wavelets
    let wgrid = Grid::new(opts.omega * s.dilation() as f64, step)?;
    let mut mixed: f64 = 0.0;
    let mut diag: f64 = 0.0;
    let mut diag_tol = ALGEBRAIC_TOL;
    let mut mixed_tol = ALGEBRAIC_TOL;
    let mut origin: f64 = 0.0;
    let mut decay: f64 = 0.0;
    let mut wfits = Vec::new();
    for l in 1..s.channels() {
        let psi = system.generator(Side::Synthesis, l);
        let psid = system.generator(Side::Analysis, l);
        let pd = periodize_profiles(&s, psi.as_ref(), psid.as_ref(), grid.per_unit(), opts.n_max)?;
        diag = diag.max(pd.max_deviation_from(Complex64::new(1.0, 0.0)));
        diag_tol = diag_tol.max(tol_for(&pd) + pd.tail_bound);
        for (a, b) in [(&psi, &phid), (&phi, &psid)] {
            let pm = periodize_profiles(&s, a.as_ref(), b.as_ref(), grid.per_unit(), opts.n_max)?;
            mixed = mixed.max(pm.max_deviation_from(Complex64::new(0.0, 0.0)));
            mixed_tol = mixed_tol.max(tol_for(&pm) + pm.tail_bound);
        }
        for (side, g) in [("synthesis", &psi), ("analysis", &psid)] {
            let sampled = SampledFunction::sample(wgrid, g.as_ref())?;
            let oc = wavelet_origin_check(&sampled, ALGEBRAIC_TOL);
            origin = origin.max(if oc.max_ratio.is_finite() { oc.value_at_zero } else { f64::INFINITY });
            let fit = fit_decay(&sampled)?;
            decay = decay.max(decay_violation(fit.pass, fit.epsilon));
            wfits.push(json!({ "channel": l, "side": side, "fit": fit, "origin": oc }));
        }
    }
    let trunc = json!({ "n_max": opts.n_max, "tolerance_includes_tail_bound": true });
    report.push(
        ConditionEntry::new("wavelet_biorthogonal_translates", "Σ_λ ψ̂_ℓ(ξ+λ)·conj(ψ̃̂_ℓ(ξ+λ)) = 1", diag, diag_tol)
            .with_truncation(trunc.clone()),
    );
    report.push(
        ConditionEntry::new("wavelet_scaling_orthogonal_translates", "Σ_λ ψ̂_ℓ(ξ+λ)·conj(φ̃̂(ξ+λ)) = 0 and dual", mixed, mixed_tol)
            .with_truncation(trunc),
    );
    report.push(ConditionEntry::new("wavelet_origin", "|ψ̂_ℓ(ξ)| ≤ C|ξ| near 0", origin, ALGEBRAIC_TOL));
    report.push(
        ConditionEntry::new("decay_wavelets", "|ψ̂_ℓ(ξ)| ≤ C(1+|ξ|)^{−1/2−ε}, ε > 0", decay, 0.0)
            .with_parameters(json!({ "grid": wgrid }))
            .with_values(Value::Array(wfits)),
    );

    // cross-scale biorthogonality
    let channels: Vec<usize> = (1..s.channels()).collect();
    let cross = system.cross_biorthogonality(&channels, &CROSS_LEVELS, CROSS_WINDOW)?;
    report.push(
        ConditionEntry::new("cross_scale_biorthogonality", "⟨ψ_{ℓ,j,λ}, ψ̃_{ℓ′,j′,σ}⟩ = δδδ", cross.max_deviation, IDENTITY_TOL + slack)
            .with_parameters(json!({ "levels": CROSS_LEVELS, "window": CROSS_WINDOW, "channels": channels }))
            .with_truncation(json!({ "eta_grid": system.eta_grid(), "tail_slack": slack }))
            .with_values(json!(cross)),
    );

    // one-level identity
    let id_grid = system.output_grid(1)?;
    let coarse = SignalModel::CoarseLattice { window: SignalModel::coarse_window_for(&system, opts.lwindow) };
    let mut primal: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for i in 0..opts.identity_signals {
        let f = coarse.generate(&system, opts.seed, i as u64)?;
        primal = primal.max(system.one_level_residual(f.as_ref(), opts.lwindow, false, id_grid)?);
        dual = dual.max(system.one_level_residual(f.as_ref(), opts.lwindow, true, id_grid)?);
    }
    let id_params = json!({ "signals": opts.identity_signals, "model": coarse, "window": opts.lwindow, "grid": id_grid });
    report.push(
        ConditionEntry::new("one_level_identity", "P₁f = P₀f + Σ_ℓ Σ_λ ⟨f, ψ̃_{ℓ,0,λ}⟩ψ_{ℓ,0,λ}", primal, IDENTITY_TOL + slack)
            .with_parameters(id_params.clone())
            .with_truncation(json!({ "tail_slack": slack })),
    );
    report.push(
        ConditionEntry::new("one_level_identity_dual", "P̃₁f = P̃₀f + Σ_ℓ Σ_λ ⟨f, ψ_{ℓ,0,λ}⟩ψ̃_{ℓ,0,λ}", dual, IDENTITY_TOL + slack)
            .with_parameters(id_params)
            .with_truncation(json!({ "tail_slack": slack })),
    );

    // multilevel expansion
    let out_grid = system.output_grid(jhi)?;
    let detail = SignalModel::DetailSpan { jlo: opts.jlo, jhi, window: opts.lwindow / 2, terms: 8 };
    let mut residual: f64 = 0.0;
    for i in 0..opts.expansion_signals {
        let f = detail.generate(&system, opts.seed.wrapping_add(1), i as u64)?;
        residual = residual.max(system.expand(f.as_ref(), opts.jlo, jhi, opts.lwindow, out_grid)?.residual);
    }
    report.push(
        ConditionEntry::new("expansion_residual", "f = Σ_ℓ Σ_j Σ_λ ⟨f, ψ̃_{ℓ,j,λ}⟩ψ_{ℓ,j,λ}", residual, EXPANSION_TOL + slack)
            .with_parameters(json!({ "signals": opts.expansion_signals, "model": detail, "jlo": opts.jlo, "jhi": jhi, "window": opts.lwindow, "grid": out_grid }))
            .with_truncation(json!({ "tail_slack": slack })),
    );

    // frame estimates
    let signals = (0..opts.frame_signals)
        .map(|i| detail.generate(&system, opts.seed.wrapping_add(2), i as u64))
        .collect::<Result<Vec<Arc<dyn Profile>>>>()?;
    let frame = system.empirical_frame_bounds(&signals, opts.jlo, jhi, opts.lwindow, out_grid)?;
    let spread = |e: &crate::mra::FrameEstimate| if e.lower > 0.0 { e.upper / e.lower } else { f64::INFINITY };
    let frame_params = json!({ "signals": opts.frame_signals, "model": detail, "grid": out_grid });
    report.push(
        ConditionEntry::new("frame_bounds", "A‖f‖² ≤ Σ|⟨f,ψ⟩|² ≤ B‖f‖², both families", spread(&frame.synthesis).max(spread(&frame.analysis)), MAX_CONDITION)
            .with_parameters(frame_params.clone())
            .with_values(json!({ "synthesis": frame.synthesis, "analysis": frame.analysis })),
    );
    report.push(
        ConditionEntry::new("frame_lower_bound_chain", "‖f‖²/B̃ ≤ Σ|⟨f,ψ⟩|²", (-frame.chain_margin).max(0.0), 1e-9 + slack)
            .with_parameters(frame_params)
            .with_truncation(json!({ "tail_slack": slack }))
            .with_values(json!({ "chain_margin": frame.chain_margin })),
    );
    Ok(())
}

/// Zero when the fitted bound holds with `ε > 0`, otherwise `1 + max(0, −ε)`.
fn decay_violation(pass: bool, epsilon: f64) -> f64 {
    if pass {
        0.0
    } else {
        1.0 + (-epsilon).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::haar_bank;

    #[test]
    fn resolved_fills_defaults() {
        let s = Spectrum::new(2, 1).unwrap();
        let o = CertifyOptions::default().resolved(&s);
        assert_eq!(o.step, Some(1.0 / 512.0));
        assert_eq!(o.eta_omega, Some(32.0));
    }

    #[test]
    fn bad_level_range_is_incomplete() {
        let opts = CertifyOptions { jlo: 3, jhi: Some(1), ..Default::default() };
        let run = certify(&haar_bank(), &opts);
        assert!(matches!(run.error, Some(Error::InvalidArgument(_))));
        assert!(!run.report.complete);
        assert!(!run.report.pass);
    }
}
