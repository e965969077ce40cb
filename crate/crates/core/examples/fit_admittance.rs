//! Recover mBVD parameters from a noisy admittance record.

use xfl::extraction::{fit_mbvd, initial_guess, AdmittanceRecord, FitOptions};
use xfl::mbvd::{synthesize_mbvd, ResonatorSpec};

fn main() -> xfl::Result<()> {
    let truth = ResonatorSpec::new(47.7, 0.0256, 22.0, 80.0)?;
    let f: Vec<f64> = (0..801).map(|i| 43.0 + 10.0 * i as f64 / 800.0).collect();
    let data = AdmittanceRecord::from_params(&synthesize_mbvd(&truth)?, f)?.with_noise(40.0, 7)?;

    let guess = initial_guess(&data, 0)?;
    println!("guess: fs {:.3} GHz, k2 {:.3}%, Q {:.1}, C0 {:.1} fF", guess.fs_ghz, 100.0 * guess.k2, guess.q, guess.c0_ff);

    let fit = fit_mbvd(&data, &guess, &FitOptions::default())?;
    let s = &fit.spec;
    println!("fit:   fs {:.3} GHz, k2 {:.3}%, Q {:.1}, C0 {:.1} fF", s.fs_ghz, 100.0 * s.k2, s.q, s.c0_ff);
    println!("truth: fs {:.3} GHz, k2 {:.3}%, Q {:.1}, C0 {:.1} fF", truth.fs_ghz, 100.0 * truth.k2, truth.q, truth.c0_ff);
    println!("residual {:.2e}, converged {}, start {}, {} evals", fit.residual, fit.converged, fit.start, fit.evals);
    for flag in &fit.flags {
        println!("flag: {flag:?}");
    }
    Ok(())
}
