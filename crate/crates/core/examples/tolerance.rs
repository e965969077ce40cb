//! Monte Carlo spread of the resonance under film thickness variation, with
//! and without the filter in the loop.

use xfl::config::DesignConfig;
use xfl::tolerance::{required_thickness_margin, run_tolerance, Distribution, ToleranceScenario, Thresholds};

fn main() -> xfl::Result<()> {
    let resolved = DesignConfig::bundled().resolve()?;

    for name in ["single_layer", "shunt"] {
        let (stack, mode) = resolved.stacks[name].clone();
        let scenario = ToleranceScenario::new(stack.clone(), mode, 1.0, 10_000, 11)?;
        let r = run_tolerance(&scenario, None, None)?;
        println!(
            "{name:<13} f0 {:.3} GHz  std {:.4} GHz (predicted {:.4})  margin for 1.9 GHz {:.2} nm",
            r.nominal_frequency_ghz,
            r.shift.std,
            r.predicted_std_ghz,
            required_thickness_margin(&stack, &mode, 1.9)?,
        );
    }

    let design = resolved.tolerance_design()?;
    let (stack, mode) = resolved.stacks["shunt"].clone();
    let mut scenario = ToleranceScenario::new(stack, mode, 1.0, 200, 11)?;
    scenario.distribution = Distribution::Uniform;
    let thresholds = Thresholds { max_il_db: 4.0, ..Thresholds::default() };
    let r = run_tolerance(&scenario, Some(&design), Some(&thresholds))?;
    if let (Some(il), Some(fbw), Some(rate)) = (&r.il_db, &r.fbw_pct, r.pass_rate) {
        println!("filter IL   mean {:.2} dB, p95 {:.2} dB", il.mean, il.p95);
        println!("filter FBW  mean {:.2} %, std {:.3} %", fbw.mean, fbw.std);
        println!("pass rate   {:.1} % (IL <= {} dB)", 100.0 * rate, thresholds.max_il_db);
    }
    Ok(())
}
