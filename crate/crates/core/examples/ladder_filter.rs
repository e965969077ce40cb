//! Simulate the bundled three-element ladder and extract its passband
//! metrics.

use xfl::config::DesignConfig;
use xfl::ladder::simulate;
use xfl::metrics::extract_metrics;

fn main() -> xfl::Result<()> {
    let resolved = DesignConfig::bundled().resolve()?;
    let filter = resolved.filter()?;
    let sweep = simulate(&filter, &resolved.config.sweep)?;
    let m = extract_metrics(&sweep, &resolved.config.spur_windows.windows())?;

    println!("center     {:.3} GHz", m.f_center_ghz);
    println!("IL         {:.2} dB", m.il_db);
    println!("3 dB FBW   {:.2} %", m.fbw_3db_pct);
    if let Some(oob) = m.oob_db {
        println!("OoB        {oob:.2} dB");
    }
    if let Some(oob) = m.oob_excl_spurs_db {
        println!("OoB (excl. spurs) {oob:.2} dB");
    }
    for (lo, hi) in &m.spur_windows_ghz {
        println!("spur window {lo:.2}..{hi:.2} GHz");
    }

    let s21 = sweep.s21_db();
    let step = sweep.len() / 20;
    for i in (0..sweep.len()).step_by(step) {
        println!("{:6.2} GHz  S21 {:7.2} dB", sweep.frequencies_ghz[i], s21[i]);
    }
    Ok(())
}
