//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the verdict lines are always printed. The
//! process fails when a criterion goes red unless it is listed in
//! `KNOWN_RED` together with the reason it cannot be met.

mod common;

use std::time::Instant;

use num_complex::Complex64;
use numra::cascade::{cascade_scaling, fit_decay, wavelet_from_masks};
use numra::certify::{certify, CertifyOptions};
use numra::filterbank::{check_pr, haar_bank, pr_grid, refinement_residual, shannon_system};
use numra::freqfield::{check_biorthogonal, default_n_max, periodize, periodize_profiles, riesz_bounds, GammaIndicator};
use numra::mra::Side;
use numra::signals::SignalModel;
use numra::{Grid, SampledFunction};

use common::*;

const SPECTRA: [(i64, i64); 5] = [(1, 1), (2, 1), (3, 1), (3, 5), (4, 3)];

/// Criteria that cannot be met as stated, with the reason.
const KNOWN_RED: [(u32, &str); 1] = [(
    2,
    "Γ = [0,1/2) ∪ [N/2,(N+1)/2) is not a tile for Λ when N ≥ 3: e.g. for N = 3 the points of [1/3, 1/2) are covered twice",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gram() -> Outcome {
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for (n, r) in SPECTRA {
        let s = spectrum(n, r);
        let closed = s.gram_matrix(8).max_deviation_from_identity();
        let quad = gram_deviation_by_quadrature(&s, 8);
        pass &= closed <= 1e-10 && quad <= 1e-6;
        lines.push(format!("({n},{r}) closed {closed:.1e} quadrature {quad:.1e}"));
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 5.0;
    outcome(pass, format!("{}; {secs:.2} s", lines.join(", ")))
}

fn tiling() -> Outcome {
    let q = 1i64 << 13;
    let mut lines = Vec::new();
    let mut pass = true;
    for (n, r) in SPECTRA {
        let s = spectrum(n, r);
        // 2^14 points p/q on [0, 2)
        let bad = (0..2 * q).filter(|&p| s.tiling_multiplicity(p, q) != 1).count();
        pass &= bad == 0;
        lines.push(format!("({n},{r}) {bad} points off"));
    }
    outcome(pass, lines.join(", "))
}

fn haar_regression() -> Outcome {
    let bank = haar_bank();
    let s = bank.spectrum();
    let grid = Grid::new(8.0, 1.0 / 256.0).unwrap();
    let m0 = &bank.synthesis()[0];
    let phi = cascade_scaling(m0, &s, 30, grid).unwrap();
    let sup = (0..grid.len()).map(|i| (phi.samples()[i] - haar_phi(grid.xi(i))).norm()).fold(0.0, f64::max);
    let profile = numra::cascade::CascadeProfile::new(m0.clone(), s, 30).unwrap();
    let per = periodize_profiles(&s, &profile, &profile, grid.per_unit(), 1024).unwrap();
    let per_dev = per.max_deviation_from(Complex64::new(1.0, 0.0));
    let pr = check_pr(&bank, &pr_grid(&s, 64), 1e-12).unwrap().entry.max_deviation;
    let refine = refinement_residual(&phi, m0, &s).unwrap();
    let pass = sup <= 1e-6 && per_dev <= 1e-6 && pr <= 1e-12 && refine <= 1e-6;
    outcome(pass, format!("sup {sup:.1e}, periodization {per_dev:.1e}, PR {pr:.1e}, refinement {refine:.1e}"))
}

fn shannon_bank_checks() -> Outcome {
    let s = spectrum(2, 1);
    let grid = Grid::new(8.0, 1.0 / 512.0).unwrap();
    let (bank, phi, phid) = shannon_system(&s, grid).unwrap();
    let n_max = default_n_max(&grid);
    let pr = check_pr(&bank, &pr_grid(&s, 64), 1e-12).unwrap().entry.max_deviation;
    let bio = check_biorthogonal(&s, &phi, &phid, n_max, 1e-12).unwrap().max_deviation;
    let rb = riesz_bounds(&s, &phi, n_max).unwrap();
    let gamma = GammaIndicator(s);
    let psi: Vec<SampledFunction> =
        (0..s.channels()).map(|l| wavelet_from_masks(&bank.synthesis()[l], &gamma, &s, grid).unwrap()).collect();
    let (mut own, mut mixed) = (0.0f64, 0.0f64);
    for a in 0..s.channels() {
        for b in 0..s.channels() {
            let p = periodize(&s, &psi[a], &psi[b], n_max).unwrap();
            if a == b {
                own = own.max(p.max_deviation_from(Complex64::new(1.0, 0.0)));
            } else {
                mixed = mixed.max(p.max_deviation_from(Complex64::new(0.0, 0.0)));
            }
        }
    }
    let pass = pr <= 1e-12 && bio <= 1e-12 && rb.lower == 1.0 && rb.upper == 1.0 && own <= 1e-12 && mixed <= 1e-12;
    outcome(
        pass,
        format!(
            "PR {pr:.1e}, biorthogonal {bio:.1e}, Riesz ({}, {}), own {own:.1e}, mixed {mixed:.1e}",
            rb.lower, rb.upper
        ),
    )
}

fn one_level_identity() -> Outcome {
    let t = Instant::now();
    let (_, opts, system) = shannon2();
    let grid = system.output_grid(1).unwrap();
    let model = SignalModel::CoarseLattice { window: SignalModel::coarse_window_for(&system, opts.lwindow) };
    let (mut primal, mut dual) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let f = model.generate(&system, 11, i).unwrap();
        primal = primal.max(system.one_level_residual(f.as_ref(), opts.lwindow, false, grid).unwrap());
        dual = dual.max(system.one_level_residual(f.as_ref(), opts.lwindow, true, grid).unwrap());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(primal <= 1e-5 && dual <= 1e-5 && secs < 60.0, format!("primal {primal:.1e}, dual {dual:.1e}; {secs:.1} s"))
}

fn cross_scale() -> Outcome {
    let (_, _, system) = shannon2();
    let c = system.cross_biorthogonality(&[1, 2, 3], &[-1, 0, 1, 2], 4).unwrap();
    outcome(c.max_deviation <= 1e-5, format!("max deviation {:.1e} over {} pairs", c.max_deviation, c.pairs))
}

fn frames() -> Outcome {
    let (_, opts, system) = shannon2();
    let (jlo, jhi) = (opts.jlo, 4);
    let grid = system.output_grid(jhi).unwrap();
    let model = SignalModel::DetailSpan { jlo, jhi, window: opts.lwindow / 2, terms: 8 };
    let signals: Vec<_> = (0..100).map(|i| model.generate(&system, 23, i).unwrap()).collect();
    let rep = system.empirical_frame_bounds(&signals, jlo, jhi, opts.lwindow, grid).unwrap();
    let ok = |e: &numra::mra::FrameEstimate| e.lower >= 0.99 && e.upper <= 1.01;
    // the chain, recomputed per signal from the raw ratios
    let chain = rep.ratios.iter().all(|r| r.0 >= 1.0 / rep.analysis.upper - 1e-12);
    outcome(
        ok(&rep.synthesis) && ok(&rep.analysis) && chain,
        format!(
            "ψ [{:.6}, {:.6}], ψ̃ [{:.6}, {:.6}], chain margin {:.1e}",
            rep.synthesis.lower, rep.synthesis.upper, rep.analysis.lower, rep.analysis.upper, rep.chain_margin
        ),
    )
}

fn decay() -> Outcome {
    let grid = Grid::new(64.0, 1.0 / 64.0).unwrap();
    let synthetic = SampledFunction::from_fn(grid, |xi| Complex64::new(1.0 / (1.0 + xi.abs()), 0.0));
    let fit = fit_decay(&synthetic).unwrap();
    let constant = fit_decay(&SampledFunction::from_fn(grid, |_| Complex64::new(1.0, 0.0))).unwrap();
    let (_, _, system) = shannon2();
    let mut atoms = true;
    for l in 0..4 {
        for side in [Side::Synthesis, Side::Analysis] {
            let f = SampledFunction::sample(grid, system.generator(side, l).as_ref()).unwrap();
            atoms &= fit_decay(&f).unwrap().pass;
        }
    }
    let pass = (fit.epsilon - 0.5).abs() <= 0.05 && atoms && !constant.pass && constant.epsilon <= 0.0;
    outcome(pass, format!("ε(synthetic) {:.4}, Shannon atoms pass {atoms}, ε(constant) {:.3}", fit.epsilon, constant.epsilon))
}

fn determinism() -> Outcome {
    let (bank, _, _) = shannon2();
    let first = certify(&bank, &CertifyOptions::default()).report;
    let text = serde_json::to_string(&first).unwrap();
    let (opts, bank2) = CertifyOptions::from_report(&serde_json::from_str(&text).unwrap()).unwrap();
    let second = certify(&bank2, &opts).report;
    let same = first.entries.len() == second.entries.len()
        && first.entries.iter().zip(&second.entries).all(|(a, b)| {
            a.condition == b.condition && a.max_deviation.to_bits() == b.max_deviation.to_bits()
        });
    outcome(same && first.parameters == second.parameters, format!("{} deviations compared", first.entries.len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "spectral-pair Gram", gram),
        (2, "tiling", tiling),
        (3, "Haar regression", haar_regression),
        (4, "Shannon bank", shannon_bank_checks),
        (5, "one-level identity", one_level_identity),
        (6, "cross-scale biorthogonality", cross_scale),
        (7, "frame estimates", frames),
        (8, "decay fits", decay),
        (9, "determinism", determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{name}]: {verdict} ({})", o.detail);
        if !o.pass {
            match KNOWN_RED.iter().find(|k| k.0 == id) {
                Some((_, why)) => println!("    known red: {why}"),
                None => unexpected.push(id),
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
