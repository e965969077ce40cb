//! Build an mBVD resonator from its behavioral spec and read the behavior
//! back off the simulated admittance.

use xfl::mbvd::{admittance_sweep, characterize, synthesize_mbvd, CouplingConvention, ResonatorSpec, SpurSpec};

fn main() -> xfl::Result<()> {
    let spec = ResonatorSpec::new(49.6, 0.048, 80.0, 37.0)?.with_spur(SpurSpec { fs_ghz: 53.73, k2: 0.004, q: None });
    let params = synthesize_mbvd(&spec)?;
    println!("C0 = {:.2} fF", params.c0_ff);
    for (i, b) in params.branches.iter().enumerate() {
        println!("branch {i}: Rm = {:.2} ohm, Lm = {:.4} nH, Cm = {:.4} fF", b.rm_ohm, b.lm_nh, b.cm_ff);
    }

    let lossless = characterize(&params.lossless(), CouplingConvention::CapacitanceRatio)?;
    println!(
        "lossless: fs {:.4} GHz, fp {:.4} GHz, k2 {:.3}%",
        lossless.fs_ghz,
        lossless.fp_ghz,
        100.0 * lossless.k2
    );
    let lossy = characterize(&params, CouplingConvention::CapacitanceRatio)?;
    println!("lossy:    fs {:.4} GHz, fp {:.4} GHz, Q {:.1}", lossy.fs_ghz, lossy.fp_ghz, lossy.q);

    let f: Vec<f64> = (0..=20).map(|i| 48.0 + 0.2 * i as f64).collect();
    for (f, y) in f.iter().zip(admittance_sweep(&params, &f)) {
        println!("{f:6.2} GHz  |Y| = {:8.3} mS", 1e3 * y.norm());
    }
    Ok(())
}
